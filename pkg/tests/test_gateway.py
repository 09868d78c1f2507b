import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehrbench import errors
from ehrbench.gateway import (
    EndpointConfig,
    MissingRateReport,
    PredictionOutcome,
    complete,
    complete_batch,
    decode_probability,
    embed,
    missing_rate,
)


class TestDecode:
    @pytest.mark.parametrize("text,expected", [
        ("0.73", 0.73),
        ("0.5", 0.5),
        ("1", 1.0),
        ("0", 0.0),
        ("The probability is 0.85.", 0.85),
        ("85%", 0.85),
        ("0.5%", 0.005),
        ("Risk: 85 %", 0.85),
        ("scores 2.5 then 0.3", 0.3),       # first in-range number wins
        ("RESPONSE: 0.42\n0.9", 0.42),
    ])
    def test_decoded(self, text, expected):
        outcome = decode_probability(text)
        assert outcome.status == "decoded"
        assert outcome.probability == pytest.approx(expected)

    @pytest.mark.parametrize("text", [
        "I do not know",
        "i do not know.",
        "I DO NOT KNOW",
        "Sorry, I do  not know the answer",
    ])
    def test_refusal_fallback(self, text):
        outcome = decode_probability(text)
        assert outcome.status == "fallback_unknown"
        assert outcome.probability == 0.5

    @pytest.mark.parametrize("text", [
        "",
        "no conclusion can be drawn",
        "85",             # bare out-of-range number
        "-0.5",           # negative is never a probability
        "the value 42 is too high",
    ])
    def test_missing(self, text):
        outcome = decode_probability(text)
        assert outcome.status == "missing"
        assert outcome.probability is None

    @given(st.text(max_size=80))
    @settings(max_examples=200)
    def test_decoded_probability_always_in_range(self, text):
        outcome = decode_probability(text)
        if outcome.status == "missing":
            assert outcome.probability is None
        else:
            assert 0.0 <= outcome.probability <= 1.0


class TestMissingRate:
    def test_formula(self):
        report = MissingRateReport(n_test=3107, n_decoded=1933)
        assert report.missing_rate_percent == pytest.approx(37.79, abs=0.01)

    def test_counts_fallback_as_decoded_by_default(self):
        outcomes = [
            PredictionOutcome("a", "decoded", 0.3, "0.3"),
            PredictionOutcome("b", "fallback_unknown", 0.5, "I do not know"),
            PredictionOutcome("c", "missing", None, "??"),
        ]
        assert missing_rate(outcomes).n_decoded == 2
        strict = missing_rate(outcomes, count_unknown_as_missing=True)
        assert strict.n_decoded == 1

    def test_empty_rejected(self):
        with pytest.raises(errors.EmptyInput):
            missing_rate([])

    def test_invariants(self):
        with pytest.raises(errors.InvariantViolation):
            MissingRateReport(n_test=2, n_decoded=3)
        with pytest.raises(errors.InvariantViolation):
            PredictionOutcome("a", "fallback_unknown", 0.4, "x")
        with pytest.raises(errors.InvariantViolation):
            PredictionOutcome("a", "decoded", 1.5, "x")
        with pytest.raises(errors.InvariantViolation):
            PredictionOutcome("a", "missing", 0.1, "x")


class TestStubs:
    def test_echo(self):
        cfg = EndpointConfig(model_name="echo-0.9")
        assert complete("anything", cfg) == "0.9"

    def test_refuse(self):
        cfg = EndpointConfig(model_name="refuse")
        assert decode_probability(complete("x", cfg)).status == \
            "fallback_unknown"

    def test_garbage_has_no_number(self):
        cfg = EndpointConfig(model_name="garbage")
        assert decode_probability(complete("x", cfg)).status == "missing"

    def test_noise_deterministic_and_prompt_sensitive(self):
        cfg = EndpointConfig(model_name="noise-42")
        a = complete("prompt one", cfg)
        assert a == complete("prompt one", cfg)
        assert a != complete("prompt two", cfg)
        assert 0.0 <= float(a) <= 1.0
        other_seed = complete("prompt one",
                              EndpointConfig(model_name="noise-43"))
        assert a != other_seed

    def test_unknown_stub_rejected(self):
        with pytest.raises(errors.InvariantViolation):
            complete("x", EndpointConfig(model_name="mystery"))

    def test_batch_keyed_results(self):
        cfg = EndpointConfig(model_name="noise-1", max_in_flight=3)
        prompts = {f"s{i}": f"prompt {i}" for i in range(10)}
        results = complete_batch(prompts, cfg)
        assert set(results) == set(prompts)
        for sid, text in results.items():
            assert text == complete(prompts[sid], cfg)

    def test_batch_surfaces_per_sample_errors(self):
        cfg = EndpointConfig(model_name="mystery")
        results = complete_batch({"a": "x"}, cfg)
        assert isinstance(results["a"], Exception)

    def test_embed_shape_and_determinism(self):
        cfg = EndpointConfig(model_name="hash-embed-16")
        vecs = embed(["alpha", "beta"], cfg)
        assert vecs.shape == (2, 16)
        again = embed(["alpha", "beta"], cfg)
        assert np.array_equal(vecs, again)
        assert not np.array_equal(vecs[0], vecs[1])
        assert np.all(np.abs(vecs) <= 1.0)

    def test_embed_empty_rejected(self):
        with pytest.raises(errors.EmptyInput):
            embed([], EndpointConfig(model_name="hash-embed-8"))

    def test_embed_requires_embedding_stub(self):
        with pytest.raises(errors.InvariantViolation):
            embed(["x"], EndpointConfig(model_name="echo-0.5"))


def test_endpoint_defaults():
    cfg = EndpointConfig()
    assert cfg.temperature == 0.1
    assert cfg.top_k == 50
    assert cfg.max_new_tokens == 20
    with pytest.raises(errors.InvariantViolation):
        EndpointConfig(max_in_flight=0)
    with pytest.raises(errors.InvariantViolation):
        EndpointConfig(temperature=-1.0)


class _Handler(BaseHTTPRequestHandler):
    """Scripted chat-completions/embeddings endpoint for wire-format tests."""

    script = []        # list of status codes; last one repeats
    requests_seen = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).requests_seen.append((self.path, dict(self.headers), body))
        status = self.script[min(len(self.requests_seen) - 1,
                                 len(self.script) - 1)]
        if status != 200:
            self.send_response(status)
            self.end_headers()
            return
        if self.path.endswith("/embeddings"):
            payload = {"data": [{"embedding": [0.1, 0.2]}
                                for _ in body["input"]]}
        else:
            payload = {"choices": [{"message": {"content": "0.77"}}]}
        blob = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


@pytest.fixture
def http_endpoint():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.requests_seen = []
    _Handler.script = [200]
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpWireFormat:
    def test_chat_payload_and_auth(self, http_endpoint, monkeypatch):
        monkeypatch.setenv("EHRBENCH_API_KEY", "sk-test")
        cfg = EndpointConfig(base_url=http_endpoint, model_name="m1")
        assert complete("hello", cfg) == "0.77"
        path, headers, body = _Handler.requests_seen[0]
        assert path == "/chat/completions"
        assert headers["Authorization"] == "Bearer sk-test"
        assert body["model"] == "m1"
        assert body["messages"] == [{"role": "user", "content": "hello"}]
        assert body["temperature"] == 0.1
        assert body["top_k"] == 50
        assert body["max_tokens"] == 20

    def test_retry_on_server_error(self, http_endpoint):
        _Handler.script = [500, 429, 200]
        cfg = EndpointConfig(base_url=http_endpoint, model_name="m1",
                             max_retries=3, backoff_base=0.0)
        assert complete("x", cfg) == "0.77"
        assert len(_Handler.requests_seen) == 3

    def test_auth_failure_no_retry(self, http_endpoint):
        _Handler.script = [401]
        cfg = EndpointConfig(base_url=http_endpoint, model_name="m1",
                             max_retries=3, backoff_base=0.0)
        with pytest.raises(errors.AuthFailure):
            complete("x", cfg)
        assert len(_Handler.requests_seen) == 1

    def test_exhausted_retries_raise(self, http_endpoint):
        _Handler.script = [503]
        cfg = EndpointConfig(base_url=http_endpoint, model_name="m1",
                             max_retries=1, backoff_base=0.0)
        with pytest.raises(errors.EndpointUnreachable):
            complete("x", cfg)
        assert len(_Handler.requests_seen) == 2

    def test_unreachable_host(self):
        cfg = EndpointConfig(base_url="http://127.0.0.1:9", model_name="m1",
                             max_retries=0, timeout=1)
        with pytest.raises(errors.EndpointUnreachable):
            complete("x", cfg, sample_id="s1")

    def test_embeddings_wire_format(self, http_endpoint):
        cfg = EndpointConfig(base_url=http_endpoint, model_name="emb")
        vecs = embed(["a", "b"], cfg)
        assert vecs.shape == (2, 2)
        path, _, body = _Handler.requests_seen[0]
        assert path == "/embeddings"
        assert body == {"model": "emb", "input": ["a", "b"]}
