import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from codemix_sentiment.alignment import (
    AlignmentConfig,
    AlignmentError,
    BilingualDictionary,
    CrossLingualAligner,
    DimensionMismatchError,
    JointEmbeddings,
    build_seed_dictionary,
    csls_match,
    normalize_embeddings,
    orthogonal_map,
    orthogonality_error,
    project_full,
    self_learning_align,
    write_dictionary,
)
from codemix_sentiment.embeddings import EmbeddingMatrix, Embeddings, Vocabulary, load_embeddings
from codemix_sentiment.embeddings.vocab import SubwordIndex


def unit(rng, n, d):
    return normalize_embeddings(rng.normal(size=(n, d)))


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def brute_force_csls(A, B, k):
    """Direct evaluation of 2cos(a,b) - r_B(a) - r_A(b) with explicit loops."""
    nA, nB = len(A), len(B)
    kB, kA = max(1, min(k, nB)), max(1, min(k, nA))
    cos = [[float(np.dot(A[i], B[j])) for j in range(nB)] for i in range(nA)]
    r_B = [sum(sorted(cos[i], reverse=True)[:kB]) / kB for i in range(nA)]
    r_A = [sum(sorted((cos[i][j] for i in range(nA)), reverse=True)[:kA]) / kA
           for j in range(nB)]
    idx, scores = [], []
    for i in range(nA):
        row = [2 * cos[i][j] - r_B[i] - r_A[j] for j in range(nB)]
        best = max(range(nB), key=lambda j: (row[j], -j))
        idx.append(best)
        scores.append(row[best])
    return np.array(idx), np.array(scores)


def identity_dict(n):
    return BilingualDictionary(np.arange(n), np.arange(n), ["forward"] * n)


class TestNormalize:
    def test_examples(self):
        np.testing.assert_allclose(normalize_embeddings(np.array([[3.0, 4.0]])), [[0.6, 0.8]])
        u = np.array([[0.6, 0.8]])
        np.testing.assert_array_equal(normalize_embeddings(u), u)

    def test_zero_row_warns(self):
        with pytest.warns(UserWarning, match="zero"):
            out = normalize_embeddings(np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert not out[0].any()

    @given(arrays(np.float64, (5, 3), elements=st.floats(-100, 100)))
    def test_idempotent(self, X):
        X = X + 1e-3  # keep rows away from zero
        once = normalize_embeddings(X)
        np.testing.assert_allclose(normalize_embeddings(once), once, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(once, axis=1), 1.0, atol=1e-12)


class TestCSLS:
    def test_single_row_example(self):
        A = np.array([[1.0, 0.0]])
        B = np.array([[1.0, 0.0], [0.0, 1.0]])
        idx, score = csls_match(A, B, 1)
        # candidates: b0 -> 2*1 - 1 - 1 = 0 ; b1 -> 2*0 - 1 - 0 = -1
        assert idx.tolist() == [0]
        assert score[0] == 0.0
        np.testing.assert_array_equal((idx, score), brute_force_csls(A, B, 1))

    def test_random_5x3_k2(self):
        rng = np.random.default_rng(4)
        A, B = unit(rng, 5, 3), unit(rng, 5, 3)
        idx, score = csls_match(A, B, 2)
        ref_idx, ref_score = brute_force_csls(A, B, 2)
        np.testing.assert_array_equal(idx, ref_idx)
        np.testing.assert_allclose(score, ref_score, rtol=0, atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 50), st.integers(1, 50), st.integers(1, 12), st.integers(1, 10),
           st.integers(0, 2 ** 32 - 1))
    def test_brute_force_equivalence(self, n_a, n_b, d, k, seed):
        rng = np.random.default_rng(seed)
        A, B = unit(rng, n_a, d), unit(rng, n_b, d)
        idx, score = csls_match(A, B, k)
        ref_idx, ref_score = brute_force_csls(A, B, k)
        np.testing.assert_array_equal(idx, ref_idx)
        np.testing.assert_allclose(score, ref_score, rtol=0, atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 40), st.integers(2, 10), st.integers(0, 10 ** 6))
    def test_self_match_k1(self, n, d, seed):
        # with k=1 every radius is 1, so the self score 0 beats 2cos - 2 < 0
        A = unit(np.random.default_rng(seed), n, d)
        idx, score = csls_match(A, A, 1)
        np.testing.assert_array_equal(idx, np.arange(n))
        np.testing.assert_allclose(score, 0.0, atol=1e-12)

    def test_self_match_can_fail_for_larger_k(self):
        # dense neighbourhoods raise radii enough for a neighbour to outscore self
        angles = np.radians([-141.7, 143.6, -15.9, 20.0, 119.5, -133.4, 150.1])
        A = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        idx, _ = csls_match(A, A, 3)
        assert idx[0] != 0
        np.testing.assert_array_equal(idx, brute_force_csls(A, A, 3)[0])

    def test_empty_target(self):
        with pytest.raises(AlignmentError):
            csls_match(np.ones((2, 2)), np.zeros((0, 2)), 3)


class TestSeedDictionary:
    def test_permuted_copy(self):
        rng = np.random.default_rng(0)
        X = unit(rng, 60, 8)
        perm = rng.permutation(60)
        Z = np.empty_like(X)
        Z[perm] = X  # row i of X lives at row perm[i] of Z
        d = build_seed_dictionary(X, Z, AlignmentConfig(vocab_cutoff=100))
        assert {(i, int(perm[i])) for i in range(60)} <= set(d.pairs())

    def test_identity(self):
        X = unit(np.random.default_rng(1), 30, 6)
        d = build_seed_dictionary(X, X, AlignmentConfig(vocab_cutoff=100))
        assert {(i, i) for i in range(30)} <= set(d.pairs())

    def test_shape_contract(self):
        rng = np.random.default_rng(2)
        d = build_seed_dictionary(unit(rng, 20, 5), unit(rng, 20, 5), AlignmentConfig())
        assert len(d) <= 40
        assert d.src.min() >= 0 and d.src.max() < 20
        assert d.trg.min() >= 0 and d.trg.max() < 20
        assert len(set(d.pairs())) == len(d)

    def test_cutoff_truncates(self):
        rng = np.random.default_rng(3)
        d = build_seed_dictionary(unit(rng, 50, 5), unit(rng, 40, 5),
                                  AlignmentConfig(vocab_cutoff=10))
        assert d.src.max() < 10 and d.trg.max() < 10


class TestProcrustes:
    def test_identity(self):
        X = unit(np.random.default_rng(0), 40, 7)
        W = orthogonal_map(X, X, identity_dict(40))
        np.testing.assert_allclose(W, np.eye(7), atol=1e-10)

    def test_rotation_recovery(self):
        rng = np.random.default_rng(1)
        X = unit(rng, 100, 10)
        R = random_rotation(rng, 10)
        W = orthogonal_map(X, X @ R, identity_dict(100))
        np.testing.assert_allclose(W, R, atol=1e-6)
        assert orthogonality_error(W) < 1e-5

    @pytest.mark.parametrize("seed", range(10))
    def test_optimal_against_random_orthogonal(self, seed):
        rng = np.random.default_rng(100 + seed)
        X, Z = rng.normal(size=(15, 4)), rng.normal(size=(15, 4))
        W = orthogonal_map(X, Z, identity_dict(15))
        best = np.linalg.norm(X @ W - Z)
        assert orthogonality_error(W) < 1e-5
        for _ in range(1000):
            Q = random_rotation(rng, 4)
            if rng.random() < 0.5:
                Q[:, 0] *= -1  # reflections are orthogonal too
            assert best <= np.linalg.norm(X @ Q - Z) + 1e-12

    def test_empty_dictionary(self):
        with pytest.raises(AlignmentError):
            orthogonal_map(np.eye(2), np.eye(2), identity_dict(0))

    def test_rank_deficient_is_still_orthogonal(self):
        X = np.zeros((5, 3))
        X[:, 0] = 1.0
        W = orthogonal_map(X, X, identity_dict(5))
        assert orthogonality_error(W) < 1e-5


class TestSelfLearning:
    def test_fixed_point(self):
        X = unit(np.random.default_rng(5), 80, 10)
        res = self_learning_align(X, X, AlignmentConfig(keep_prob=1.0))
        assert res.converged and res.iterations <= 2
        np.testing.assert_allclose(res.W_src, np.eye(10), atol=1e-8)
        assert {(i, i) for i in range(80)} <= set(res.dictionary.pairs())

    def test_history_non_decreasing(self):
        rng = np.random.default_rng(6)
        X = unit(rng, 120, 12)
        Z = normalize_embeddings(X @ random_rotation(rng, 12) + 0.05 * rng.normal(size=(120, 12)))
        res = self_learning_align(X, Z, AlignmentConfig(seed=1, patience=5))
        assert np.all(np.diff(res.history) >= 0)
        assert res.objective == pytest.approx(max(res.history))
        assert orthogonality_error(res.W_src) < 1e-5

    def test_small_rotation_recovery(self):
        rng = np.random.default_rng(7)
        X = unit(rng, 150, 16)
        perm = rng.permutation(150)
        Z = np.empty_like(X)
        Z[perm] = X @ random_rotation(rng, 16)
        res = self_learning_align(X, Z, AlignmentConfig(seed=0, patience=10))
        fwd = res.dictionary.forward_map()
        precision = np.mean([fwd.get(i) == perm[i] for i in range(150)])
        assert precision >= 0.95
        assert orthogonality_error(res.W_src) < 1e-5

    def test_max_iterations_warns(self):
        rng = np.random.default_rng(8)
        X, Z = unit(rng, 30, 5), unit(rng, 30, 5)
        with pytest.warns(UserWarning, match="max_iterations"):
            res = self_learning_align(X, Z, AlignmentConfig(max_iterations=3))
        assert not res.converged and res.iterations == 3
        assert orthogonality_error(res.W_src) < 1e-5

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        X, Z = unit(rng, 60, 8), unit(rng, 60, 8)
        cfg = AlignmentConfig(seed=4, patience=3)
        a, b = self_learning_align(X, Z, cfg), self_learning_align(X, Z, cfg)
        assert a.W_src.tobytes() == b.W_src.tobytes()
        assert a.dictionary.pairs() == b.dictionary.pairs()

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            self_learning_align(np.eye(4), np.eye(3))

    def test_symmetric_mode_runs(self):
        rng = np.random.default_rng(10)
        X = unit(rng, 80, 8)
        Z = X @ random_rotation(rng, 8)
        res = self_learning_align(X, Z, AlignmentConfig(symmetric=True, patience=5))
        fwd = res.dictionary.forward_map()
        assert np.mean([fwd.get(i) == i for i in range(80)]) >= 0.95


class TestProjectFull:
    def test_identity(self):
        m = EmbeddingMatrix(np.arange(12.0).reshape(4, 3), np.zeros((2, 3)))
        np.testing.assert_array_equal(project_full(m, np.eye(3)).input, m.input)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 10 ** 6))
    def test_isometry_and_inverse(self, d, seed):
        rng = np.random.default_rng(seed)
        X = unit(rng, 20, d)
        W = random_rotation(rng, d)
        Y = project_full(X, W)
        np.testing.assert_allclose(np.linalg.norm(Y, axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(project_full(Y, W.T), X, atol=1e-6)

    def test_dimension_mismatch(self):
        m = EmbeddingMatrix(np.ones((3, 4)), np.ones((2, 4)))
        with pytest.raises(DimensionMismatchError):
            project_full(m, np.eye(3))


def _emb(words, vecs, buckets=0):
    inp = np.vstack([vecs, np.random.default_rng(0).normal(size=(buckets, vecs.shape[1]))])
    return Embeddings(Vocabulary(words, np.arange(len(words), 0, -1), 1),
                      EmbeddingMatrix(inp, np.zeros_like(vecs)), SubwordIndex(3, 6, buckets))


class TestJointEmbeddings:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.src = _emb(["accha", "good"], rng.normal(size=(2, 4)), buckets=30)
        self.trg = _emb(["good", "bad"], rng.normal(size=(2, 4)))
        self.W = random_rotation(rng, 4)

    def test_lookup_rules(self):
        joint = JointEmbeddings(self.src, self.trg, self.W)
        expect = self.src.word_vector("good") @ joint.W_src
        np.testing.assert_allclose(joint["good"], expect / np.linalg.norm(expect), atol=1e-6)
        t = self.trg.word_vector("bad")
        np.testing.assert_allclose(joint["bad"], t / np.linalg.norm(t), atol=1e-6)
        oov = self.src.word_vector("zabardast") @ joint.W_src
        np.testing.assert_allclose(joint["zabardast"], oov / np.linalg.norm(oov), atol=1e-6)
        assert not joint["q"].any()

    def test_save_load(self, tmp_path):
        joint = JointEmbeddings(self.src, self.trg, self.W)
        joint.save(tmp_path / "j.bin")
        back = load_embeddings(tmp_path / "j.bin")
        assert isinstance(back, JointEmbeddings)
        assert back.fingerprint() == joint.fingerprint()
        words = ["accha", "good", "bad", "zabardast"]
        np.testing.assert_array_equal(back.vectors(words), joint.vectors(words))

    def test_dimension_mismatch(self):
        small = _emb(["x"], np.ones((1, 3)))
        with pytest.raises(DimensionMismatchError):
            JointEmbeddings(self.src, small, np.eye(4))


def test_write_dictionary():
    d = BilingualDictionary([0, 1], [1, 0], ["forward", "backward"])
    buf = io.StringIO()
    write_dictionary(d, ["a", "b"], ["x", "y"], buf)
    assert buf.getvalue() == "a\ty\nb\tx\n"


def test_aligner_estimator():
    rng = np.random.default_rng(11)
    X = unit(rng, 50, 6)
    R = random_rotation(rng, 6)
    est = CrossLingualAligner(keep_prob=1.0).fit(X, X @ R)
    np.testing.assert_allclose(est.transform(X), X @ R, atol=1e-6)
    assert est.get_params()["csls_k"] == 8
