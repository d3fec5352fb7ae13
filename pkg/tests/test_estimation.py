"""Posterior fusion, decisions, Gray labeling and error-rate metrics."""

import numpy as np
import pytest

from imdd_ae import estimation as est
from imdd_ae.transceiver import BrnnTransceiver, TransceiverConfig


def fuse_bruteforce(windows):
    """Literal covering-window average, one slot at a time.

    Slot i (1-based) of the stream is covered by windows k with
    k <= i <= k + W - 1; its fused posterior averages exactly those.
    """
    K, W, M = windows.shape
    fused = np.empty((K, M))
    for i in range(1, K + 1):
        ks = [k for k in range(1, K + 1) if k <= i <= k + W - 1]
        fused[i - 1] = sum(windows[k - 1, i - k] for k in ks) / len(ks)
    return fused


def random_posterior_windows(rng, K, W, M):
    raw = rng.uniform(0.01, 1.0, size=(K, W, M))
    return raw / raw.sum(axis=-1, keepdims=True)


class TestFusePosteriors:
    def test_window_one_is_identity(self):
        rng = np.random.default_rng(50)
        w = random_posterior_windows(rng, 7, 1, 5)
        np.testing.assert_array_equal(est.fuse_posteriors(w), w[:, 0])

    def test_w3_hand_example(self):
        """W=3 over a 6-block stream: the four fused slots are
        p1 = p1^(1); p2 = (p2^(1)+p2^(2))/2; p3 = (p3^(1)+p3^(2)+p3^(3))/3;
        p4 = (p4^(2)+p4^(3)+p4^(4))/3."""
        rng = np.random.default_rng(51)
        w = random_posterior_windows(rng, 4, 3, 6)  # windows k=1..4
        fused = est.fuse_posteriors(w)
        np.testing.assert_allclose(fused[0], w[0, 0])
        np.testing.assert_allclose(fused[1], (w[0, 1] + w[1, 0]) / 2)
        np.testing.assert_allclose(fused[2], (w[0, 2] + w[1, 1] + w[2, 0]) / 3)
        np.testing.assert_allclose(fused[3], (w[1, 2] + w[2, 1] + w[3, 0]) / 3)

    def test_exhaustive_bruteforce_equivalence(self):
        rng = np.random.default_rng(52)
        for W in range(1, 7):
            for T in range(1, 13):
                w = random_posterior_windows(rng, T, W, 4)
                got = est.fuse_posteriors(w)
                want = fuse_bruteforce(w)
                assert got.shape == (T, 4)
                np.testing.assert_allclose(got, want, atol=1e-12)

    def test_fused_are_convex_combinations(self):
        rng = np.random.default_rng(53)
        fused = est.fuse_posteriors(random_posterior_windows(rng, 9, 4, 6))
        assert np.all(fused >= 0)
        np.testing.assert_allclose(fused.sum(axis=-1), 1.0, atol=1e-12)

    def test_message_relabeling_equivariance(self):
        rng = np.random.default_rng(54)
        w = random_posterior_windows(rng, 8, 3, 5)
        perm = rng.permutation(5)
        fused = est.fuse_posteriors(w)
        fused_perm = est.fuse_posteriors(w[:, :, perm])
        np.testing.assert_allclose(fused[:, perm], fused_perm, atol=1e-15)
        a = est.decide(fused[..., None])[:, 0]
        b = est.decide(fused_perm[..., None])[:, 0]
        inv = np.argsort(perm)
        np.testing.assert_array_equal(inv[a - 1] + 1, b)


class TestSlidingEstimate:
    @pytest.fixture
    def model(self):
        return BrnnTransceiver(TransceiverConfig(M=8, n=6, window=3), seed=60)

    def test_output_length_rule(self, model):
        rng = np.random.default_rng(61)
        blocks = rng.uniform(0, 0.5, size=(10, 6, 2))
        fused = est.sliding_estimate(model, blocks, 3)
        assert fused.shape == (8, 8, 2)

    def test_window_one_equals_per_block_decoding(self, model):
        rng = np.random.default_rng(62)
        blocks = rng.uniform(0, 0.5, size=(6, 6, 2))
        fused = est.sliding_estimate(model, blocks, 1, carry="none")
        for t in range(6):
            raw, _ = model.rx_decode_np(blocks[t : t + 1])
            np.testing.assert_allclose(fused[t], raw[0], atol=1e-14)
            np.testing.assert_array_equal(est.decide(fused[t][None, ...])[0],
                                          np.argmax(raw[0], axis=0) + 1)

    def test_matches_manual_window_loop_without_carry(self, model):
        rng = np.random.default_rng(63)
        blocks = rng.uniform(0, 0.5, size=(7, 6, 2))
        W = 3
        fused = est.sliding_estimate(model, blocks, W, carry="none")
        K = 7 - W + 1
        windows = np.empty((K, W, 8, 2))
        for k in range(K):
            windows[k], _ = model.rx_decode_np(blocks[k : k + W])
        for s in range(2):
            np.testing.assert_allclose(fused[:, :, s],
                                       fuse_bruteforce(windows[:, :, :, s]),
                                       atol=1e-12)

    def test_too_few_blocks_rejected(self, model):
        with pytest.raises(ValueError):
            est.sliding_estimate(model, np.zeros((2, 6, 1)), 3)

    def test_carry_modes_differ_but_agree_on_first_window(self, model):
        rng = np.random.default_rng(64)
        blocks = rng.uniform(0, 0.5, size=(8, 6, 1))
        a = est.sliding_estimate(model, blocks, 3, carry="fwd")
        b = est.sliding_estimate(model, blocks, 3, carry="none")
        np.testing.assert_allclose(a[0], b[0], atol=1e-14)


class TestDecide:
    def test_onehot(self):
        p = np.zeros(8)
        p[4] = 1.0
        assert est.decide(p) == 5

    def test_uniform_breaks_tie_to_lowest(self):
        assert est.decide(np.full(6, 1 / 6)) == 1

    def test_max_scan_oracle(self):
        rng = np.random.default_rng(65)
        for _ in range(50):
            p = rng.uniform(size=9)
            best, arg = -1.0, -1
            for i, v in enumerate(p):
                if v > best:
                    best, arg = v, i
            assert est.decide(p) == arg + 1


class TestBlerBer:
    def test_all_correct_and_all_wrong(self):
        t = np.array([1, 2, 3, 4])
        assert est.bler(t, t) == 0.0
        assert est.ber(t, t, 8) == 0.0
        wrong = np.array([2, 3, 4, 5])
        assert est.bler(t, wrong) == 1.0

    def test_direct_count_oracle(self):
        rng = np.random.default_rng(66)
        t = rng.integers(1, 9, size=200)
        d = rng.integers(1, 9, size=200)
        assert est.bler(t, d) == np.mean(t != d)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            est.bler(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            est.ber(np.ones(3, dtype=int), np.ones(4, dtype=int), 8)

    def test_single_adjacent_error_is_one_bit(self):
        T = 100
        t = np.full(T, 7)
        d = t.copy()
        d[13] = 8  # Gray-adjacent: indices 6 and 7 differ in one bit
        assert est.ber(t, d, 64) == pytest.approx(1 / (6 * T))

    def test_bruteforce_bit_comparison(self):
        rng = np.random.default_rng(67)
        t = rng.integers(1, 65, size=300)
        d = rng.integers(1, 65, size=300)
        errors = 0
        for a, b in zip(t, d):
            ga = est.gray_bits(int(a), 64)
            gb = est.gray_bits(int(b), 64)
            errors += int(np.sum(ga != gb))
        assert est.ber(t, d, 64) == pytest.approx(errors / (300 * 6))

    def test_ber_bler_inequalities(self):
        rng = np.random.default_rng(68)
        for _ in range(20):
            t = rng.integers(1, 65, size=150)
            d = np.where(rng.uniform(size=150) < 0.3,
                         rng.integers(1, 65, size=150), t)
            r = est.error_report(t, d, 64)
            assert r.ber <= r.bler <= 1.0
            assert r.ber >= r.bler / 6 - 1e-12


class TestGrayCode:
    def test_first_codes(self):
        np.testing.assert_array_equal(est.gray_bits(1, 64), [0] * 6)
        np.testing.assert_array_equal(est.gray_bits(2, 64),
                                      [0, 0, 0, 0, 0, 1])
        np.testing.assert_array_equal(est.gray_bits(3, 64),
                                      [0, 0, 0, 0, 1, 1])

    def test_full_table_adjacency_and_distinctness(self):
        codes = est.gray_code(np.arange(1, 65), 64)
        assert len(set(codes.tolist())) == 64
        for a, b in zip(codes[:-1], codes[1:]):
            assert bin(a ^ b).count("1") == 1

    def test_rejections(self):
        with pytest.raises(ValueError):
            est.gray_code(0, 64)
        with pytest.raises(ValueError):
            est.gray_code(65, 64)
        with pytest.raises(ValueError):
            est.gray_code(1, 48)  # not a power of two


class TestErrorReport:
    def test_counts_consistent(self):
        t = np.array([1, 2, 3, 4, 5])
        d = np.array([1, 2, 4, 4, 5])
        r = est.error_report(t, d, 8)
        assert r.message_count == 5
        assert r.block_errors == 1
        assert r.bler == pytest.approx(0.2)
        assert r.bit_errors >= 1
