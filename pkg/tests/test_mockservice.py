import http.client
import json
import threading
import time

import numpy as np
import pytest

from blockleak.harness import interleave, measure
from blockleak.mockservice import (
    BLOCKED_PAGE,
    InvalidToken,
    MockService,
    ServiceState,
    UnknownAccount,
)
from blockleak.planner import BlockPlan
from blockleak.rttsim import FaultSpec, preset
from blockleak.stats import mann_whitney_u
from blockleak.transports import LiveSession, TransportFailure, block, login, register_account

pytestmark = pytest.mark.live


def _instant_state(**kw):
    # tiny delays so functional tests run fast
    return ServiceState(preset("facebook").scaled(0.001), **kw)


def test_block_semantics_and_variants():
    st = _instant_state()
    st.block("owner", "viewer")
    tok = st.login("viewer")
    blocked = st.serve_profile(tok, "owner")
    assert blocked.blocked and blocked.body == BLOCKED_PAGE
    # directional
    other = st.serve_profile(st.login("owner"), "viewer")
    assert not other.blocked and b"viewer" in other.body
    # anonymous viewers are never blocked
    assert not st.serve_profile(None, "owner").blocked
    # repeat requests do not change the variant
    assert all(st.serve_profile(tok, "owner").blocked for _ in range(5))


def test_service_errors():
    st = _instant_state()
    st.create_account("a")
    with pytest.raises(UnknownAccount):
        st.login("ghost")
    with pytest.raises(InvalidToken):
        st.serve_profile("forged", "a")
    with pytest.raises(UnknownAccount):
        st.serve_profile(None, "ghost")


def test_two_logins_give_distinct_valid_tokens():
    st = _instant_state()
    st.create_account("a")
    t1, t2 = st.login("a"), st.login("a")
    assert t1 != t2
    st.serve_profile(t1, "a")
    st.serve_profile(t2, "a")


def test_apply_block_plan(example_plan):
    st = _instant_state()
    edges = st.apply_block_plan(example_plan)
    assert st.block_lists["sig-1-1"] == {"Erin", "Frank", "Grace", "Heidi"}
    assert edges == example_plan.edge_count()
    snapshot = {k: set(v) for k, v in st.block_lists.items()}
    assert st.apply_block_plan(example_plan) == edges
    assert st.block_lists == snapshot
    assert _instant_state().apply_block_plan(BlockPlan([], {}, {})) == 0


def test_delay_streams_are_reproducible():
    def delays(seed):
        st = _instant_state(seed=seed)
        st.block("o", "v")
        tok = st.login("v")
        return [st.serve_profile(tok, "o").delay_ms for _ in range(10)]

    assert delays(1) == delays(1)
    assert delays(1) != delays(2)


def test_server_error_faults_return_502():
    st = _instant_state(faults=FaultSpec(server_error_prob=1.0))
    st.create_account("a")
    resp = st.serve_profile(None, "a")
    assert resp.status == 502


def _get(svc, path, token=None):
    conn = http.client.HTTPConnection(svc.host, svc.port, timeout=5)
    headers = {"Cookie": f"session={token}"} if token else {}
    conn.request("GET", path, headers=headers)
    resp = conn.getresponse()
    body = resp.read()
    conn.close()
    return resp, body


def test_http_surface():
    with MockService(_instant_state()) as svc:
        assert register_account(svc.url, "alice", "pw")
        assert not register_account(svc.url, "alice", "pw")
        assert block(svc.url, "bob", "alice")
        with pytest.raises(TransportFailure):
            login(svc.url, "alice", "wrong")
        tok = login(svc.url, "alice", "pw")
        resp, body = _get(svc, "/u/bob", tok)
        assert resp.status == 200 and body == BLOCKED_PAGE
        assert int(resp.getheader("Content-Length")) == len(body)
        assert resp.getheader("X-Applied-Delay-Ms") is None
        assert _get(svc, "/u/nobody", tok)[0].status == 404
        assert _get(svc, "/u/bob", "forged")[0].status == 401
        resp, body = _get(svc, "/stats")
        assert json.loads(body)["profile_requests"] == 1


def test_diagnostics_header_only_when_enabled():
    with MockService(_instant_state(diagnostics=True)) as svc:
        register_account(svc.url, "a")
        resp, _ = _get(svc, "/u/a")
        assert float(resp.getheader("X-Applied-Delay-Ms")) > 0


def test_six_requests_overlap():
    # 60 ms fixed delay; six concurrent requests must not queue behind each other
    prof = preset("facebook").scaled(0.001)
    prof = type(prof)("flat", 60.0, 0.0, -20.0, 0.0)
    with MockService(ServiceState(prof)) as svc:
        register_account(svc.url, "a")
        with LiveSession(svc.url, None) as sess:
            sess.fetch("a")  # warm-up
            t0 = time.perf_counter()
            threads = [threading.Thread(target=sess.fetch, args=("a",)) for _ in range(6)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            elapsed = (time.perf_counter() - t0) * 1000
    assert elapsed < 2 * 60


def test_timing_contract_on_loopback(fast_facebook):
    state = ServiceState(fast_facebook, seed=5)
    state.block("blocker", "viewer")
    state.create_account("plain")
    with MockService(state) as svc:
        with LiveSession(svc.url, state.login("viewer")) as sess:
            meas = measure(sess, interleave(["blocker", "plain"], 1000), 6)
    blocked, plain = meas.series["blocker"], meas.series["plain"]
    gap = np.percentile(blocked, 5) - np.percentile(plain, 5)
    assert gap == pytest.approx(fast_facebook.delta05_ms, rel=0.15)
    assert mann_whitney_u(blocked, plain).significant
