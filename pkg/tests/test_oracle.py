import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from llata.oracle import (
    LogitCache, MockBackend, Oracle, OracleConfig, OracleError, ParseError, extract_logits, mock_infer,
    prompt_hash, to_soft_label,
)

import oracles


# -- parsing --------------------------------------------------------------

def test_extract_answer_sentence():
    ans = "The probabilities of paper 1 belonging to each category are: [0, 7, 0, 0, 0, 9]."
    assert extract_logits(ans, 6) == (0, 7, 0, 0, 0, 9)


def test_extract_first_list_of_right_length():
    assert extract_logits("[1,2] and later [3,4,5,6,7,8]", 6) == (3, 4, 5, 6, 7, 8)


def test_extract_clamps():
    assert extract_logits("[-3, 12]", 2) == (0, 9)


def test_extract_skips_non_integer_lists():
    assert extract_logits("[a, b] then [1, 2]", 2) == (1, 2)


def test_extract_no_list():
    with pytest.raises(ParseError):
        extract_logits("no list here", 3)


# -- soft labels ----------------------------------------------------------

def test_soft_label_answer_vector():
    y = to_soft_label((0, 7, 0, 0, 0, 9))
    # direct evaluation: 1096.63/9203.71 and 8103.08/9203.71
    assert np.round(y, 4).tolist() == [0.0001, 0.1192, 0.0001, 0.0001, 0.0001, 0.8804]
    assert np.round(y, 2).tolist() == [0.0, 0.12, 0.0, 0.0, 0.0, 0.88]
    assert y == pytest.approx(oracles.softmax([0, 7, 0, 0, 0, 9]))


def test_soft_label_uniform_and_onehot():
    assert to_soft_label((4, 4, 4)) == pytest.approx([1 / 3] * 3)
    y = to_soft_label((9, 0, 0, 0, 0, 0))
    assert y[0] == pytest.approx(0.99939, abs=1e-5)


@given(st.lists(st.integers(0, 9), min_size=2, max_size=12))
def test_soft_label_on_simplex(z):
    y = to_soft_label(z)
    assert (y >= 0).all()
    assert y.sum() == pytest.approx(1.0, abs=1e-9)
    assert z[int(np.argmax(y))] == max(z)


def test_mock_infer():
    assert mock_infer(0, 2, 0.0, 4).tolist() == [0, 0, 1, 0]
    assert mock_infer(0, 2, 1.0, 4) == pytest.approx([0.25] * 4)
    assert mock_infer(0, 0, 0.1, 2) == pytest.approx([0.95, 0.05])
    with pytest.raises(OracleError):
        mock_infer(0, None, 0.1, 2)
    with pytest.raises(OracleError):
        mock_infer(0, 5, 0.1, 2)


def test_mock_backend_noiseless_answer():
    answer = MockBackend([1], 0.0, 3).complete("prompt", 0)
    assert extract_logits(answer, 3) == (0, 9, 0)


def test_config_validation():
    with pytest.raises(OracleError):
        OracleConfig(backend="remote").validate()
    with pytest.raises(OracleError):
        OracleConfig(backend="other").validate()
    with pytest.raises(OracleError):
        OracleConfig(mock_noise=1.5).validate()
    OracleConfig(backend="remote", endpoint="http://x", api_key_env="K").validate()


# -- cache ----------------------------------------------------------------

def test_cache_round_trip_survives_reload(tmp_path):
    path = tmp_path / "c.jsonl"
    c = LogitCache(path)
    c.put(3, "abc", (1, 2, 3), "m")
    c.put(3, "abc", (4, 5, 6), "m")  # last write wins
    assert c.get(3, "abc") == (4, 5, 6)
    with open(path, "a") as fh:
        fh.write('{"node": 9, "prompt')  # torn line
    again = LogitCache(path)
    assert again.get(3, "abc") == (4, 5, 6)
    assert again.get(3, "zzz") is None
    assert len(again) == 1
    rec = json.loads(path.read_text().splitlines()[0])
    assert set(rec) == {"node", "prompt_sha256", "logits", "model"}


class CountingBackend:
    def __init__(self, answers):
        self.answers = list(answers)
        self.seen = []

    def complete(self, prompt, node):
        self.seen.append(node)
        return self.answers.pop(0) if self.answers else "[1, 1]"


def test_second_call_hits_cache(tmp_path):
    cfg = OracleConfig(cache_path=str(tmp_path / "c.jsonl"))
    backend = CountingBackend(["[0, 9]"])
    o = Oracle(cfg, 2, backend=backend)
    assert o.infer("p", 0) == (0, 9)
    assert o.infer("p", 0) == (0, 9)
    assert backend.seen == [0] and o.cache_hits == 1
    o2 = Oracle(cfg, 2, backend=backend)
    assert o2.infer("p", 0) == (0, 9) and o2.calls == 0
    assert LogitCache(cfg.cache_path).get(0, prompt_hash("p")) == (0, 9)


def test_parse_failure_retries_then_falls_back(tmp_path):
    cfg = OracleConfig(max_retries=1, cache_path=str(tmp_path / "c.jsonl"))
    o = Oracle(cfg, 2, backend=CountingBackend(["nope", "still nope"]))
    assert o.infer("p", 0) == (0, 0)
    assert o.calls == 2 and o.parse_fallbacks == 1
    assert len(LogitCache(cfg.cache_path)) == 0
    o = Oracle(cfg, 2, backend=CountingBackend(["nope", "[3, 4]"]))
    assert o.infer("p", 0) == (3, 4)


def test_empty_prompt_rejected():
    with pytest.raises(OracleError):
        Oracle(OracleConfig(), 2, labels=[0]).infer("", 0)


# -- remote backend against a local fake endpoint ---------------------------

class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        srv = self.server
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        with srv.lock:
            srv.requests.append((dict(self.headers), body))
            status = srv.statuses.pop(0) if srv.statuses else 200
        if status != 200:
            self.send_response(status)
            self.end_headers()
            self.wfile.write(b"busy")
            return
        node = int(body["messages"][0]["content"].split()[-1])
        content = f"Answer: [{node % 10}, 9]"
        out = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


@pytest.fixture
def fake_server():
    srv = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    srv.requests, srv.statuses, srv.lock = [], [], threading.Lock()
    th = threading.Thread(target=srv.serve_forever, daemon=True)
    th.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def _remote_cfg(srv, **kw):
    return OracleConfig(backend="remote", endpoint=f"http://127.0.0.1:{srv.server_port}/v1/chat/completions",
                        model="test-model", api_key_env="LLATA_TEST_KEY", backoff_base=0.001, **kw)


def test_remote_wire_format(fake_server, monkeypatch):
    monkeypatch.setenv("LLATA_TEST_KEY", "sekret")
    o = Oracle(_remote_cfg(fake_server), 2)
    assert o.infer("classify node 7", 7) == (7, 9)
    headers, body = fake_server.requests[0]
    assert headers["Authorization"] == "Bearer sekret"
    assert body == {"model": "test-model", "messages": [{"role": "user", "content": "classify node 7"}],
                    "temperature": 0}


def test_remote_retries_transient_status(fake_server, monkeypatch):
    monkeypatch.setenv("LLATA_TEST_KEY", "k")
    fake_server.statuses = [503, 429]
    assert Oracle(_remote_cfg(fake_server, max_retries=2), 2).infer("node 3", 3) == (3, 9)
    assert len(fake_server.requests) == 3


def test_remote_gives_up(fake_server, monkeypatch):
    monkeypatch.setenv("LLATA_TEST_KEY", "k")
    fake_server.statuses = [500, 500, 500]
    with pytest.raises(OracleError):
        Oracle(_remote_cfg(fake_server, max_retries=1), 2).infer("node 3", 3)
    fake_server.statuses = [401]
    with pytest.raises(OracleError):
        Oracle(_remote_cfg(fake_server, max_retries=3), 2).infer("node 3", 3)


def test_remote_missing_key(fake_server, monkeypatch):
    monkeypatch.delenv("LLATA_TEST_KEY", raising=False)
    with pytest.raises(OracleError):
        Oracle(_remote_cfg(fake_server), 2).infer("node 1", 1)


def test_remote_unreachable(monkeypatch):
    monkeypatch.setenv("LLATA_TEST_KEY", "k")
    cfg = OracleConfig(backend="remote", endpoint="http://127.0.0.1:1/x", api_key_env="LLATA_TEST_KEY",
                       max_retries=1, backoff_base=0.001, timeout=2)
    with pytest.raises(OracleError):
        Oracle(cfg, 2).infer("node 1", 1)


def test_remote_concurrent_batch(fake_server, monkeypatch, tmp_path):
    monkeypatch.setenv("LLATA_TEST_KEY", "k")
    cfg = _remote_cfg(fake_server, max_in_flight=4, cache_path=str(tmp_path / "c.jsonl"))
    items = [(v, f"node {v}") for v in range(20)]
    out = Oracle(cfg, 2).infer_many(items)
    assert out == {v: (v % 10, 9) for v in range(20)}
    warm = Oracle(cfg, 2)
    assert warm.infer_many(items) == out
    assert warm.calls == 0 and warm.cache_hits == 20
    assert len(fake_server.requests) == 20
