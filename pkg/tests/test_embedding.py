import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest
from hypothesis import given, strategies as st

from corpus_prune.corpus_io import Document
from corpus_prune.embedding import (
    EmbeddingProvider,
    EmbeddingStore,
    HttpEmbeddingProvider,
    PrecomputedEmbeddingProvider,
    embed_corpus,
    fnv1a_ids,
    load_store,
    normalize,
    save_store,
)
from corpus_prune.errors import ProviderError, StoreFormatError, ValidationError

from conftest import random_unit_rows


class TestNormalize:
    def test_three_four_five(self):
        assert np.allclose(normalize(np.array([3.0, 4.0])), [0.6, 0.8])

    def test_unit_vector_unchanged(self):
        assert np.allclose(normalize(np.array([1.0, 0.0])), [1.0, 0.0])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValidationError):
            normalize(np.array([0.0, 0.0]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValidationError):
            normalize(np.array([1.0, np.nan]))
        with pytest.raises(ValidationError):
            normalize(np.array([np.inf, 0.0]))

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            normalize(np.array([]))

    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=1,
            max_size=20,
        ).filter(lambda v: any(abs(x) > 1e-9 for x in v))
    )
    def test_norm_one_and_idempotent(self, components):
        v = np.array(components)
        u = normalize(v)
        assert abs(float(np.linalg.norm(u)) - 1.0) <= 1e-6
        assert np.allclose(normalize(u), u, atol=1e-6)


class _StubProvider(EmbeddingProvider):
    """Deterministic fake: vector derived from text length, plus failure
    injection for retry tests."""

    def __init__(self, dim=4, max_input_chars=2048, fail_times=0):
        self.dim = dim
        self.max_input_chars = max_input_chars
        self.fail_times = fail_times
        self.calls = 0
        self.seen_texts: list[str] = []

    def embed_batch(self, texts):
        self.calls += 1
        if self.fail_times > 0:
            self.fail_times -= 1
            raise ProviderError("injected failure")
        self.seen_texts.extend(texts)
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, t in enumerate(texts):
            out[i, 0] = 1.0 + len(t)
            out[i, 1] = 2.0
        return out


def docs(n):
    return [Document(id=f"d{i}", text="x" * (i + 1)) for i in range(n)]


class TestEmbedCorpus:
    def test_order_and_cardinality(self):
        store = embed_corpus(docs(5), _StubProvider(), batch_size=2)
        assert store.count == 5
        assert store.ids == ("d0", "d1", "d2", "d3", "d4")
        norms = np.linalg.norm(store.rows, axis=1)
        assert np.allclose(norms, 1.0, atol=1e-4)

    def test_empty_stream(self):
        store = embed_corpus([], _StubProvider(dim=8), batch_size=4)
        assert store.count == 0
        assert store.dim == 8

    def test_truncation_to_max_input_chars(self):
        provider = _StubProvider(max_input_chars=10)
        embed_corpus([Document(id="a", text="y" * 100)], provider, batch_size=1)
        assert provider.seen_texts == ["y" * 10]

    def test_retries_then_success(self, monkeypatch):
        provider = _StubProvider(fail_times=2)
        store = embed_corpus(docs(3), provider, batch_size=4, backoff_base=0.0)
        assert store.count == 3
        assert provider.calls == 3

    def test_retries_exhausted_names_first_doc(self):
        provider = _StubProvider(fail_times=3)
        with pytest.raises(ProviderError, match="'d0'"):
            embed_corpus(docs(3), provider, batch_size=4, backoff_base=0.0)

    def test_dim_mismatch_reports_expected_and_received(self):
        class WrongDim(_StubProvider):
            def embed_batch(self, texts):
                return np.ones((len(texts), 7), dtype=np.float32)

        with pytest.raises(ValidationError, match="dimension mismatch"):
            embed_corpus(docs(2), WrongDim(dim=4), batch_size=2)

    def test_zero_vector_from_provider_names_document(self):
        class ZeroRow(_StubProvider):
            def embed_batch(self, texts):
                return np.zeros((len(texts), self.dim), dtype=np.float32)

        with pytest.raises(ProviderError, match="'d0'"):
            embed_corpus(docs(1), ZeroRow(), batch_size=1)

    def test_batch_size_validation(self):
        with pytest.raises(ValidationError):
            embed_corpus(docs(1), _StubProvider(), batch_size=0)


class TestPrecomputedProvider:
    def test_rows_equal_independent_normalization(self, tmp_path):
        # Oracle: normalize the fixture vectors with plain math, no numpy.
        raw = np.array([[3.0, 4.0], [1.0, 1.0], [0.5, -2.0]], dtype=np.float32)
        texts = ["alpha", "beta", "gamma"]
        keys = np.array([PrecomputedEmbeddingProvider.text_key(t) for t in texts])
        path = tmp_path / "pre.npz"
        np.savez(path, keys=keys, vectors=raw)

        provider = PrecomputedEmbeddingProvider(path)
        documents = [Document(id=f"d{i}", text=t) for i, t in enumerate(texts)]
        store = embed_corpus(documents, provider, batch_size=2)

        for i, vec in enumerate(raw):
            norm = math.sqrt(sum(float(x) * float(x) for x in vec))
            expected = [float(x) / norm for x in vec]
            assert np.allclose(store.rows[i], expected, atol=1e-6)

    def test_missing_text_raises(self, tmp_path):
        keys = np.array([PrecomputedEmbeddingProvider.text_key("known")])
        path = tmp_path / "pre.npz"
        np.savez(path, keys=keys, vectors=np.ones((1, 3), dtype=np.float32))
        provider = PrecomputedEmbeddingProvider(path)
        with pytest.raises(ProviderError, match="'d0'"):
            embed_corpus([Document(id="d0", text="unknown")], provider, batch_size=1)


class _EmbedHandler(BaseHTTPRequestHandler):
    fail_next = 0

    def do_POST(self):
        if self.path != "/embed":
            self.send_error(404)
            return
        if _EmbedHandler.fail_next > 0:
            _EmbedHandler.fail_next -= 1
            self.send_error(503)
            return
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        embeddings = [[float(len(t)), 1.0, 0.5] for t in payload["texts"]]
        body = json.dumps({"embeddings": embeddings, "dim": 3}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    server = HTTPServer(("127.0.0.1", 0), _EmbedHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _EmbedHandler.fail_next = 0
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpProvider:
    def test_protocol_round_trip(self, embed_server):
        provider = HttpEmbeddingProvider(embed_server, dim=3)
        store = embed_corpus(docs(3), provider, batch_size=2)
        assert store.count == 3
        assert store.dim == 3

    def test_non_200_is_retryable_then_recovers(self, embed_server):
        _EmbedHandler.fail_next = 2
        provider = HttpEmbeddingProvider(embed_server, dim=3)
        store = embed_corpus(docs(2), provider, batch_size=4, backoff_base=0.0)
        assert store.count == 2

    def test_persistent_failure_raises(self, embed_server):
        _EmbedHandler.fail_next = 99
        provider = HttpEmbeddingProvider(embed_server, dim=3)
        with pytest.raises(ProviderError, match="after 3 attempts"):
            embed_corpus(docs(1), provider, batch_size=1, backoff_base=0.0)

    def test_dim_mismatch_detected(self, embed_server):
        provider = HttpEmbeddingProvider(embed_server, dim=5)
        with pytest.raises(ValidationError, match="expected 5, received 3"):
            provider.embed_batch(["abc"])


class TestStoreRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        rows = random_unit_rows(100, 16, seed=5)
        store = EmbeddingStore(rows=rows, ids=tuple(f"id-{i}" for i in range(100)))
        path = tmp_path / "store.embs"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.ids == store.ids
        assert loaded.rows.tobytes() == store.rows.tobytes()

    def test_empty_store_round_trip(self, tmp_path):
        store = EmbeddingStore(
            rows=np.empty((0, 1024), dtype=np.float32), ids=()
        )
        path = tmp_path / "empty.embs"
        save_store(store, path)
        loaded = load_store(path)
        assert loaded.count == 0
        assert loaded.dim == 1024

    def test_unicode_ids_round_trip(self, tmp_path):
        rows = random_unit_rows(2, 4, seed=1)
        store = EmbeddingStore(rows=rows, ids=("päge-1", "ドキュメント"))
        save_store(store, tmp_path / "u.embs")
        assert load_store(tmp_path / "u.embs").ids == ("päge-1", "ドキュメント")

    def test_bad_magic(self, tmp_path):
        rows = random_unit_rows(1, 4, seed=2)
        path = tmp_path / "s.embs"
        save_store(EmbeddingStore(rows=rows, ids=("a",)), path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(StoreFormatError, match="bad magic"):
            load_store(path)

    def test_truncated_body_reports_offset(self, tmp_path):
        rows = random_unit_rows(4, 8, seed=3)
        path = tmp_path / "t.embs"
        save_store(EmbeddingStore(rows=rows, ids=tuple("abcd")), path)
        data = path.read_bytes()
        path.write_bytes(data[: 28 + 10])
        with pytest.raises(StoreFormatError, match="offset"):
            load_store(path)

    def test_checksum_detects_id_tampering(self, tmp_path):
        rows = random_unit_rows(1, 4, seed=4)
        path = tmp_path / "c.embs"
        save_store(EmbeddingStore(rows=rows, ids=("ab",)), path)
        data = bytearray(path.read_bytes())
        data[-1] = ord("X")  # flip last byte of the only id
        path.write_bytes(bytes(data))
        with pytest.raises(StoreFormatError, match="checksum"):
            load_store(path)

    def test_loaded_store_is_immutable(self, tmp_path):
        rows = random_unit_rows(2, 4, seed=6)
        path = tmp_path / "i.embs"
        save_store(EmbeddingStore(rows=rows, ids=("a", "b")), path)
        loaded = load_store(path)
        with pytest.raises(ValueError):
            loaded.rows[0, 0] = 9.0


class TestStoreInvariants:
    def test_non_unit_row_rejected(self):
        rows = np.ones((1, 4), dtype=np.float32)
        with pytest.raises(ValidationError, match="norm"):
            EmbeddingStore(rows=rows, ids=("a",))

    def test_duplicate_ids_rejected(self):
        rows = random_unit_rows(2, 4, seed=7)
        with pytest.raises(ValidationError):
            EmbeddingStore(rows=rows, ids=("a", "a"))

    def test_id_count_mismatch_rejected(self):
        rows = random_unit_rows(2, 4, seed=8)
        with pytest.raises(ValidationError):
            EmbeddingStore(rows=rows, ids=("a",))


class TestFnv1a:
    def test_known_reference_values(self):
        # FNV-1a 64-bit published vectors: empty input and "a".
        assert fnv1a_ids([]) == 0xCBF29CE484222325
        assert fnv1a_ids(["a"]) == 0xAF63DC4C8601EC8C

    def test_separator_prevents_boundary_aliasing(self):
        assert fnv1a_ids(["ab", "c"]) != fnv1a_ids(["a", "bc"])
        assert fnv1a_ids(["ab", "c"]) != fnv1a_ids(["abc"])
