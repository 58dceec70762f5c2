"""A small social-web emulator whose profile pages leak block state via timing.

HTTP surface (HTTP/1.1, every response carries Content-Length):

    GET  /u/{id}        profile page; viewer from ``Cookie: session=<token>``
    POST /login         {"account": id, "credential": str} -> {"token": str}
    POST /accounts      {"id": id, "credential": str|null} -> {"created": bool}
    POST /block         {"owner": id, "target": id} -> {"added": bool}
    GET  /stats         {"profile_requests": int}

``X-Applied-Delay-Ms`` is attached to profile responses only when the service
runs with diagnostics enabled.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
import zlib
from collections import Counter
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import TYPE_CHECKING

import numpy as np

from .rttsim import NO_FAULTS, WIRED, FaultSpec, NetworkEnv, ServiceProfile, sample_with_outcome

if TYPE_CHECKING:
    from .planner import BlockPlan


class ServiceError(Exception):
    status = 400


class UnknownAccount(ServiceError):
    status = 404


class InvalidToken(ServiceError):
    status = 401


class BadCredential(ServiceError):
    status = 403


@dataclass
class Account:
    id: str
    credential: str | None = None
    payload: bytes = b""


@dataclass(frozen=True)
class ProfileResponse:
    status: int
    body: bytes
    delay_ms: float
    blocked: bool


BLOCKED_PAGE = b"<html><body><p>This account is unavailable.</p></body></html>"


def _default_payload(account_id: str) -> bytes:
    posts = "".join(f"<li>post {i} by {account_id}</li>" for i in range(40))
    return f"<html><body><h1>{account_id}</h1><ul>{posts}</ul></body></html>".encode()


class ServiceState:
    """Accounts, block lists and sessions; thread-safe per operation."""

    def __init__(
        self,
        profile: ServiceProfile,
        env: NetworkEnv = WIRED,
        faults: FaultSpec = NO_FAULTS,
        equalize: bool = False,
        seed: int = 0,
        diagnostics: bool = False,
    ):
        self.profile = profile
        self.env = env
        self.faults = faults
        self.equalize = equalize
        self.seed = seed
        self.diagnostics = diagnostics
        self.accounts: dict[str, Account] = {}
        self.block_lists: dict[str, set[str]] = {}
        self.sessions: dict[str, str] = {}
        self.profile_requests: Counter[tuple[str | None, str]] = Counter()
        self._pair_counter: Counter[tuple[str, str]] = Counter()
        self._lock = threading.Lock()

    # -- accounts & sessions ---------------------------------------------

    def create_account(
        self, account_id: str, credential: str | None = None, payload: bytes | None = None
    ) -> bool:
        with self._lock:
            return self._create(account_id, credential, payload)

    def _create(self, account_id: str, credential: str | None = None, payload: bytes | None = None) -> bool:
        if account_id in self.accounts:
            return False
        self.accounts[account_id] = Account(
            account_id, credential, payload if payload is not None else _default_payload(account_id)
        )
        self.block_lists[account_id] = set()
        return True

    def login(self, account_id: str, credential: str | None = None) -> str:
        with self._lock:
            acc = self.accounts.get(account_id)
            if acc is None:
                raise UnknownAccount(account_id)
            if acc.credential is not None and acc.credential != credential:
                raise BadCredential(account_id)
            token = secrets.token_urlsafe(16)
            self.sessions[token] = account_id
            return token

    # -- blocking ----------------------------------------------------------

    def block(self, owner: str, target: str) -> bool:
        with self._lock:
            self._create(owner)
            self._create(target)
            if target in self.block_lists[owner]:
                return False
            self.block_lists[owner].add(target)
            return True

    def is_blocked(self, owner: str, viewer: str | None) -> bool:
        return viewer is not None and viewer in self.block_lists.get(owner, ())

    def apply_block_plan(self, plan: "BlockPlan") -> int:
        """Make every plan account's block list equal its planned set."""
        with self._lock:
            edges = 0
            for acc in plan:
                self._create(acc.account_id)
                for target in acc.blocks:
                    self._create(target)
                self.block_lists[acc.account_id] = set(acc.blocks)
                edges += len(acc.blocks)
            return edges

    # -- profile pages -----------------------------------------------------

    def _pair_rng(self, owner: str, viewer: str | None) -> np.random.Generator:
        key = (owner, viewer or "")
        with self._lock:
            n = self._pair_counter[key]
            self._pair_counter[key] += 1
        return np.random.default_rng(
            [self.seed, zlib.crc32(owner.encode()), zlib.crc32(key[1].encode()), n]
        )

    def serve_profile(self, token: str | None, owner: str) -> ProfileResponse:
        """Resolve the viewer, pick the page variant and sample its delay."""
        with self._lock:
            if token is None:
                viewer = None
            elif token in self.sessions:
                viewer = self.sessions[token]
            else:
                raise InvalidToken("unknown session token")
            if owner not in self.accounts:
                raise UnknownAccount(owner)
            blocked = self.is_blocked(owner, viewer)
            body = BLOCKED_PAGE if blocked else self.accounts[owner].payload
            self.profile_requests[(viewer, owner)] += 1
        profile = self.profile.equalized() if self.equalize else self.profile
        delay, outcome = sample_with_outcome(
            profile, self.env, blocked, self.faults, self._pair_rng(owner, viewer)
        )
        if outcome == "server_error":
            return ProfileResponse(502, b"", delay, blocked)
        return ProfileResponse(200, body, delay, blocked)

    def total_profile_requests(self, viewer: str | None = None) -> int:
        with self._lock:
            if viewer is None:
                return sum(self.profile_requests.values())
            return sum(c for (v, _), c in self.profile_requests.items() if v == viewer)


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    # headers and body go out as separate writes; Nagle would stall the body
    disable_nagle_algorithm = True
    server: "_Server"

    def log_message(self, format: str, *args: object) -> None:  # noqa: A002
        pass

    def _send(self, status: int, body: bytes, headers: dict[str, str] | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Content-Type", "application/json" if body[:1] == b"{" else "text/html")
        for k, v in (headers or {}).items():
            self.send_header(k, v)
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, obj: object) -> None:
        self._send(status, json.dumps(obj).encode())

    def _token(self) -> str | None:
        for part in self.headers.get("Cookie", "").split(";"):
            name, _, value = part.strip().partition("=")
            if name == "session":
                return value
        return None

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b"{}"
        data = json.loads(raw)
        if not isinstance(data, dict):
            raise ServiceError("expected a JSON object")
        return data

    def do_GET(self) -> None:  # noqa: N802
        state = self.server.state
        if self.path == "/stats":
            self._json(200, {"profile_requests": state.total_profile_requests()})
            return
        if not self.path.startswith("/u/"):
            self._json(404, {"error": "not found"})
            return
        owner = self.path[3:]
        try:
            resp = state.serve_profile(self._token(), owner)
        except ServiceError as e:
            self._json(e.status, {"error": type(e).__name__})
            return
        time.sleep(resp.delay_ms / 1000.0)
        headers = {"X-Applied-Delay-Ms": f"{resp.delay_ms:.3f}"} if state.diagnostics else None
        self._send(resp.status, resp.body, headers)

    def do_POST(self) -> None:  # noqa: N802
        state = self.server.state
        try:
            data = self._read_json()
            if self.path == "/login":
                token = state.login(str(data["account"]), data.get("credential"))
                self._json(200, {"token": token})
            elif self.path == "/accounts":
                created = state.create_account(str(data["id"]), data.get("credential"))
                self._json(200, {"created": created})
            elif self.path == "/block":
                added = state.block(str(data["owner"]), str(data["target"]))
                self._json(200, {"added": added})
            else:
                self._json(404, {"error": "not found"})
        except ServiceError as e:
            self._json(e.status, {"error": type(e).__name__})
        except (KeyError, ValueError) as e:
            self._json(400, {"error": f"bad request: {e}"})


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    request_queue_size = 64

    def __init__(self, addr: tuple[str, int], state: ServiceState):
        super().__init__(addr, _Handler)
        self.state = state


class MockService:
    """Runs a ServiceState behind an HTTP server on a background thread."""

    def __init__(self, state: ServiceState, host: str = "127.0.0.1", port: int = 0):
        self.state = state
        self._server = _Server((host, port), state)
        self._thread: threading.Thread | None = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MockService":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockService":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()
