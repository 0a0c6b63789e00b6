import io
import json
import sys
import threading

import numpy as np
import pytest

from rarag.errors import ProviderFailure
from rarag.harness.provider import (
    HttpProvider,
    JsonLinesProvider,
    encode_request,
    handle_request,
    infer_many,
    make_http_server,
    parse_reply,
    serve_stdio,
)
from rarag.selection import kappa_rrss
from rarag.simulation import PriorSpec, SimulatedProvider, SourceWorld, WorldSpec, load_preset


@pytest.fixture(scope="module")
def world():
    return SourceWorld.from_spec(WorldSpec(50, 6, PriorSpec.beta(), noise=load_preset("llama3-nq", 0.1), seed=12))


V = np.array([1.5, 0.2, 0.9, -0.3, 1.1, 0.4])


def test_parse_reply_valid():
    r = parse_reply('{"answer": "Ottawa", "alignment_score": 0.75}', 0)
    assert r.answer.surface == "Ottawa" and r.answer.canonical_id == "Ottawa" and r.alignment_score == 0.75
    r = parse_reply('{"answer": null, "alignment_score": 0}', 0)
    assert r.answer.is_idk
    r = parse_reply('{"answer": "x", "canonical_id": "q1:gold", "alignment_score": 1}', 0)
    assert r.answer.canonical_id == "q1:gold"


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        "[]",
        '{"answer": "x"}',
        '{"alignment_score": 0.5}',
        '{"answer": "x", "alignment_score": 1.5}',
        '{"answer": "x", "alignment_score": -0.1}',
        '{"answer": "x", "alignment_score": "high"}',
        '{"answer": "x", "alignment_score": true}',
        '{"answer": 3, "alignment_score": 0.5}',
        '{"answer": "x", "canonical_id": 3, "alignment_score": 0.5}',
    ],
)
def test_parse_reply_rejects(line):
    with pytest.raises(ProviderFailure) as exc:
        parse_reply(line, 4)
    assert exc.value.source_id == 4


def test_handle_request(world):
    rec = world.generate_response(2, 5)
    reply = handle_request(world, encode_request(5, "q", 2))
    assert reply["alignment_score"] == rec.alignment_score
    assert "error" in handle_request(world, '{"query_id": 1, "source_id": 99}')
    with pytest.raises(ProviderFailure):
        parse_reply(handle_request(world, "garbage"), 0)


def test_serve_stdio_in_process(world):
    stdin = io.StringIO(encode_request(3, "q", 1) + "\n" + encode_request(4, "q", 0))
    stdout = io.StringIO()
    serve_stdio(world, stdin, stdout)
    lines = stdout.getvalue().splitlines()
    assert len(lines) == 2
    assert parse_reply(lines[0], 1).answer == world.generate_response(1, 3).raw_answer


def _selected(sel):
    return [(sid, a.canonical_id, a.surface) for sid, a in sel]


def test_stdio_provider_matches_simulation(world):
    cmd = [sys.executable, "-m", "rarag", "serve", "--seed", "0", "--n-sources", "6"]
    # the subprocess serves its own world; compare against the same world built here
    from rarag.harness.cli import _world
    from rarag.harness.config import ExperimentConfig, validate

    cfg = validate(ExperimentConfig(n_sources=(6,)))
    local = SimulatedProvider(SourceWorld.from_spec(_world(cfg, 6)))
    with JsonLinesProvider(cmd, 6, timeout=20) as remote:
        for q in range(5):
            a, la = kappa_rrss(q, V, 3, remote, 0.1)
            b, lb = kappa_rrss(q, V, 3, local, 0.1)
            assert _selected(a) == _selected(b) and la.probes_made == lb.probes_made


def test_stdio_provider_timeout_and_exit():
    sleeper = [sys.executable, "-c", "import time, sys; sys.stdin.readline(); time.sleep(5)"]
    with JsonLinesProvider(sleeper, 2, timeout=0.3) as prov:
        with pytest.raises(ProviderFailure):
            prov.probe(0, 0)
    quitter = [sys.executable, "-c", "pass"]
    with JsonLinesProvider(quitter, 2, timeout=5) as prov:
        with pytest.raises(ProviderFailure):
            prov.probe(0, 0)
    with pytest.raises(ProviderFailure):
        JsonLinesProvider(["/nonexistent/provider"], 2)


def test_http_provider(world):
    server = make_http_server(world)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}/"
        remote = HttpProvider(url, 6, max_in_flight=3)
        local = SimulatedProvider(world)
        queries = list(range(12))
        got = infer_many(queries, V, 3, remote, 0.1, max_in_flight=3)
        want = infer_many(queries, V, 3, local, 0.1)
        assert [_selected(s) for s, _ in got] == [_selected(s) for s, _ in want]
        with pytest.raises(ProviderFailure):
            remote.probe(0, 17)  # server answers with an error object
    finally:
        server.shutdown()
        server.server_close()
    with pytest.raises(ProviderFailure):
        HttpProvider(url, 6, timeout=1).probe(0, 0)
