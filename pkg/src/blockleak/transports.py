"""Ways of fetching a signaling/reference profile and timing it."""

from __future__ import annotations

import http.client
import json
import threading
import time
import zlib
from typing import Collection, Mapping, Protocol, Sequence
from urllib.parse import urlsplit

import numpy as np

from .planner import BlockPlan
from .rttsim import NO_FAULTS, WIRED, FaultSpec, NetworkEnv, ServiceProfile, draw_rtts


class TransportFailure(RuntimeError):
    pass


class Transport(Protocol):
    # True when fetches hit a real endpoint and may run on worker threads.
    concurrent: bool

    def fetch(self, account_id: str) -> float:
        """Issue one request for the account's page and return the RTT in ms."""
        ...


class SimulatedVisitor:
    """A visitor whose RTTs come from the simulator instead of the network.

    Each account gets its own random stream derived from (seed, account id),
    so results do not depend on the order in which accounts are measured.
    forced_outliers maps an account id to the 0-based request ordinals that
    return early at ``outlier_scale`` of their nominal RTT.
    """

    concurrent = False

    def __init__(
        self,
        plan: BlockPlan,
        identity: str | None,
        profile: ServiceProfile,
        env: NetworkEnv = WIRED,
        faults: FaultSpec = NO_FAULTS,
        seed: int | Sequence[int] = 0,
        forced_outliers: Mapping[str, Collection[int]] | None = None,
        outlier_scale: float = 0.2,
    ):
        self.plan = plan
        self.identity = identity
        self.profile = profile
        self.env = env
        self.faults = faults
        self.seed = (seed,) if isinstance(seed, int) else tuple(seed)
        self.forced_outliers = {k: set(v) for k, v in (forced_outliers or {}).items()}
        self.outlier_scale = outlier_scale
        self._streams: dict[str, np.random.Generator] = {}
        self._issued: dict[str, int] = {}
        self.log: list[str] = []

    def _stream(self, account_id: str) -> np.random.Generator:
        if account_id not in self._streams:
            self._streams[account_id] = np.random.default_rng(
                [*self.seed, zlib.crc32(account_id.encode())]
            )
        return self._streams[account_id]

    def fetch_batch(self, account_id: str, n: int) -> list[float]:
        blocked = self.plan.blocks(account_id, self.identity)
        rtts, _ = draw_rtts(
            self.profile, self.env, blocked, self.faults, self._stream(account_id), n
        )
        start = self._issued.get(account_id, 0)
        forced = self.forced_outliers.get(account_id)
        if forced:
            for i in range(n):
                if start + i in forced:
                    rtts[i] *= self.outlier_scale
        self._issued[account_id] = start + n
        self.log.extend([account_id] * n)
        return [float(x) for x in rtts]

    def fetch(self, account_id: str) -> float:
        return self.fetch_batch(account_id, 1)[0]


class LiveSession:
    """Times profile fetches against a running mock service.

    One keep-alive connection per worker thread; the session cookie rides on
    every request the way a browser would attach it to a cross-site fetch.
    """

    concurrent = True

    def __init__(self, base_url: str, token: str | None, timeout: float = 30.0):
        parts = urlsplit(base_url)
        self.host = parts.hostname or "127.0.0.1"
        self.port = parts.port or 80
        self.token = token
        self.timeout = timeout
        self._local = threading.local()
        self._count_lock = threading.Lock()
        self.requests_sent = 0
        self.statuses: list[int] = []
        self._conns: list[http.client.HTTPConnection] = []

    def _conn(self) -> http.client.HTTPConnection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
            self._local.conn = conn
            with self._count_lock:
                self._conns.append(conn)
        return conn

    def fetch(self, account_id: str) -> float:
        headers = {"Cookie": f"session={self.token}"} if self.token else {}
        with self._count_lock:
            self.requests_sent += 1
        conn = self._conn()
        try:
            t0 = time.perf_counter()
            conn.request("GET", f"/u/{account_id}", headers=headers)
            resp = conn.getresponse()
            resp.read()
            elapsed = (time.perf_counter() - t0) * 1000.0
        except (OSError, http.client.HTTPException) as e:
            conn.close()
            self._local.conn = None
            raise TransportFailure(f"GET /u/{account_id}: {e}") from e
        with self._count_lock:
            self.statuses.append(resp.status)
        if resp.status in (401, 404):
            raise TransportFailure(f"GET /u/{account_id} -> {resp.status}")
        return elapsed

    def close(self) -> None:
        with self._count_lock:
            conns, self._conns = self._conns, []
        for conn in conns:
            conn.close()
        self._local = threading.local()

    def __enter__(self) -> "LiveSession":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def _post(base_url: str, path: str, payload: dict, timeout: float = 10.0) -> dict:
    parts = urlsplit(base_url)
    conn = http.client.HTTPConnection(parts.hostname, parts.port, timeout=timeout)
    try:
        body = json.dumps(payload)
        conn.request("POST", path, body=body, headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        data = json.loads(resp.read() or b"{}")
        if resp.status != 200:
            raise TransportFailure(f"POST {path} -> {resp.status}: {data}")
        return data
    finally:
        conn.close()


def register_account(base_url: str, account_id: str, credential: str | None = None) -> bool:
    return bool(_post(base_url, "/accounts", {"id": account_id, "credential": credential})["created"])


def login(base_url: str, account_id: str, credential: str | None = None) -> str:
    return str(_post(base_url, "/login", {"account": account_id, "credential": credential})["token"])


def block(base_url: str, owner: str, target: str) -> bool:
    return bool(_post(base_url, "/block", {"owner": owner, "target": target})["added"])
