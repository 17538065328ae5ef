"""Local hash encoder determinism and the remote encoder adapter."""

import httpx
import numpy as np
import pytest

from tablescout.encoders import LocalHashEncoder, RemoteHttpEncoder
from tablescout.errors import EncoderFailure


class TestLocalHashEncoder:
    def test_shape_and_dtype(self):
        enc = LocalHashEncoder(64)
        out = enc.encode(["alpha", "beta"])
        assert out.shape == (2, 64)
        assert out.dtype == np.float32

    def test_deterministic_across_instances(self):
        a = LocalHashEncoder(128).encode(["sale amount", "year"])
        b = LocalHashEncoder(128).encode(["sale amount", "year"])
        assert np.array_equal(a, b)

    def test_rows_are_unit_norm(self):
        out = LocalHashEncoder(64).encode(["alpha", "a", ""])
        norms = np.linalg.norm(out, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-6)

    def test_casefold_invariance(self):
        enc = LocalHashEncoder(64)
        assert np.array_equal(enc.encode(["Sale Amount"]), enc.encode(["sale amount"]))

    def test_identical_string_identical_vector(self):
        enc = LocalHashEncoder(64)
        out = enc.encode(["year", "month", "year"])
        assert np.array_equal(out[0], out[2])
        assert not np.array_equal(out[0], out[1])

    def test_short_strings_still_nonzero(self):
        # strings below trigram length fall back to one whole-string feature
        out = LocalHashEncoder(64).encode(["", "a"])
        assert (np.linalg.norm(out, axis=1) > 0.0).all()

    def test_empty_batch(self):
        assert LocalHashEncoder(64).encode([]).shape == (0, 64)

    def test_dim_floor(self):
        with pytest.raises(ValueError):
            LocalHashEncoder(4)

    def test_id_names_dim(self):
        assert LocalHashEncoder(32).id == "hash-trigram-v1-d32"


def _remote(handler, dim=4, batch_size=64):
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return RemoteHttpEncoder("http://enc.test/embed", dim=dim, batch_size=batch_size, client=client)


class TestRemoteHttpEncoder:
    def test_round_trip(self):
        def handler(request):
            import json
            payload = json.loads(request.content)
            vecs = [[float(len(t)), 0.0, 0.0, 1.0] for t in payload["texts"]]
            return httpx.Response(200, json={"vectors": vecs})

        enc = _remote(handler)
        out = enc.encode(["ab", "abcd"])
        assert out.shape == (2, 4)
        assert out[0][0] == 2.0 and out[1][0] == 4.0

    def test_batching_splits_requests(self):
        calls = []

        def handler(request):
            import json
            texts = json.loads(request.content)["texts"]
            calls.append(len(texts))
            return httpx.Response(200, json={"vectors": [[0.0, 0.0, 0.0, 1.0]] * len(texts)})

        enc = _remote(handler, batch_size=2)
        out = enc.encode(["a", "b", "c", "d", "e"])
        assert out.shape == (5, 4)
        assert calls == [2, 2, 1]

    def test_wrong_shape_raises(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[1.0, 2.0]]})

        with pytest.raises(EncoderFailure, match="offset 0"):
            _remote(handler).encode(["a"])

    def test_non_finite_raises(self):
        def handler(request):
            return httpx.Response(200, json={"vectors": [[1.0, 2.0, None, 4.0]]})

        with pytest.raises(EncoderFailure):
            _remote(handler).encode(["a"])

    def test_http_error_raises(self):
        def handler(request):
            return httpx.Response(500, text="boom")

        with pytest.raises(EncoderFailure):
            _remote(handler).encode(["a"])

    def test_empty_batch(self):
        def handler(request):  # pragma: no cover - never called
            raise AssertionError("no request expected")

        assert _remote(handler).encode([]).shape == (0, 4)
