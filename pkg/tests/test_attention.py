import numpy as np
import pytest

from second.attention import (
    AttentionAccumulator,
    AttentionMap,
    accumulate,
    entropy,
    fuse_attention,
    max_normalize,
    normalize,
    pool_attention,
)
from second.errors import (
    EmptyCrossAttention,
    GridMismatch,
    NotNormalized,
    SinglePatchGrid,
    ZeroMassAttention,
)
from second.grids import PatchGrid

G2 = PatchGrid((2, 2), 1)    # 2x2 patches
G4 = PatchGrid((4, 4), 1)
G1 = PatchGrid((1, 1), 1)


class TestFuseAttention:
    def test_identity_weights(self):
        self_attn = AttentionMap(G2, [0.1, 0.2, 0.3, 0.4])
        fused = fuse_attention(self_attn, np.ones((1, 4)))
        assert np.allclose(fused.values, self_attn.values)

    def test_zero_self_attention_annihilates(self):
        fused = fuse_attention(AttentionMap(G2, np.zeros(4)), np.ones((3, 4)))
        assert np.all(fused.values == 0)

    def test_multiply_accumulate_by_hand(self):
        grid = PatchGrid((1, 2), 1)
        self_attn = AttentionMap(grid, [0.5, 0.5])
        rows = np.array([[1.0, 0.0], [0.0, 2.0]])
        fused = fuse_attention(self_attn, rows)
        assert np.allclose(fused.values, [0.5, 1.0])

    def test_linear_in_rows(self):
        rng = np.random.default_rng(0)
        self_attn = AttentionMap(G4, rng.random(16))
        rows = rng.random((5, 16))
        whole = fuse_attention(self_attn, rows).values
        parts = fuse_attention(self_attn, rows[:2]).values \
            + fuse_attention(self_attn, rows[2:]).values
        assert np.allclose(whole, parts)

    def test_empty_rows_rejected(self):
        with pytest.raises(EmptyCrossAttention):
            fuse_attention(AttentionMap(G2, np.ones(4)), np.zeros((0, 4)))

    def test_row_length_mismatch(self):
        with pytest.raises(GridMismatch):
            fuse_attention(AttentionMap(G2, np.ones(4)), np.ones((1, 5)))


class TestNormalize:
    def test_symmetric_pair(self):
        grid = PatchGrid((1, 2), 1)
        out = normalize(AttentionMap(grid, [2.0, 2.0]))
        assert np.allclose(out.values, [0.5, 0.5])
        assert out.normalized

    def test_already_normalized(self):
        grid = PatchGrid((1, 3), 1)
        out = normalize(AttentionMap(grid, [1.0, 0.0, 0.0]))
        assert np.allclose(out.values, [1.0, 0.0, 0.0])

    def test_scalar_division(self):
        grid = PatchGrid((1, 2), 1)
        out = normalize(AttentionMap(grid, [1.0, 3.0]))
        assert np.allclose(out.values, [0.25, 0.75])

    def test_zero_mass_rejected(self):
        with pytest.raises(ZeroMassAttention):
            normalize(AttentionMap(G2, np.zeros(4)))


class TestEntropy:
    def test_uniform_is_maximal(self):
        assert entropy(AttentionMap(G4, np.full(16, 1 / 16), normalized=True)) \
            == pytest.approx(1.0, abs=1e-12)

    def test_one_hot_is_zero(self):
        values = np.zeros(16)
        values[3] = 1.0
        assert entropy(AttentionMap(G4, values, normalized=True)) == 0.0

    def test_half_split_over_four(self):
        # two equal patches out of four: ln 2 / ln 4
        attn = AttentionMap(G2, [0.5, 0.5, 0.0, 0.0], normalized=True)
        assert entropy(attn) == pytest.approx(0.5, abs=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        values = rng.random(16)
        values /= values.sum()
        base = entropy(AttentionMap(G4, values, normalized=True))
        for _ in range(10):
            perm = rng.permutation(16)
            assert entropy(AttentionMap(G4, values[perm], normalized=True)) \
                == pytest.approx(base, abs=1e-12)

    def test_moving_mass_to_richer_patch_lowers_entropy(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            values = rng.random(16) + 0.01
            values /= values.sum()
            lo, hi = np.argsort(values)[[0, -1]]
            shift = values[lo] * 0.5
            moved = values.copy()
            moved[lo] -= shift
            moved[hi] += shift
            before = entropy(AttentionMap(G4, values, normalized=True))
            after = entropy(AttentionMap(G4, moved, normalized=True))
            assert after < before

    def test_requires_normalized_flag(self):
        with pytest.raises(NotNormalized):
            entropy(AttentionMap(G4, np.full(16, 1 / 16)))

    def test_single_patch_rejected(self):
        with pytest.raises(SinglePatchGrid):
            entropy(AttentionMap(G1, [1.0], normalized=True))


class TestPoolAttention:
    def test_uniform_stays_uniform_both_ways(self):
        uni = AttentionMap.uniform(G2)
        up = pool_attention(uni, G4)
        assert np.allclose(up.values, 1 / 16)
        assert up.total == pytest.approx(1.0, abs=1e-12)
        down = pool_attention(AttentionMap.uniform(G4), G2)
        assert np.ptp(down.values) == 0.0

    def test_block_mean_downscale(self):
        down = pool_attention(AttentionMap(G2, [4.0, 0.0, 0.0, 0.0]), G1)
        assert down.values[0] == pytest.approx(1.0)

    def test_upscale_conserves_mass(self):
        rng = np.random.default_rng(3)
        attn = AttentionMap(G2, rng.random(4))
        up = pool_attention(attn, PatchGrid((6, 6), 1))
        assert up.total == pytest.approx(attn.total, rel=1e-9)

    def test_downscale_preserves_block_average(self):
        rng = np.random.default_rng(4)
        attn = AttentionMap(G4, rng.random(16))
        down = pool_attention(attn, G2)
        # block mean scales the flat sum by exactly the block area
        assert down.total * 4 == pytest.approx(attn.total, rel=1e-9)
        assert down.values[0] == pytest.approx(attn.as_grid()[:2, :2].mean())

    def test_non_integer_ratio_rejected(self):
        with pytest.raises(GridMismatch):
            pool_attention(AttentionMap(G2, np.ones(4)), PatchGrid((3, 3), 1))


class TestAccumulate:
    def test_uniform_add_raises_every_entry_equally(self):
        acc = AttentionAccumulator(G4)
        acc = accumulate(acc, AttentionMap.uniform(G2))
        assert np.allclose(acc.values, 1 / 16)

    def test_two_adds_double(self):
        stage = AttentionMap(G2, [1.0, 2.0, 3.0, 4.0])
        once = accumulate(AttentionAccumulator(G4), stage)
        twice = accumulate(once, stage)
        assert np.allclose(twice.values, 2 * once.values)

    def test_mass_bookkeeping(self):
        rng = np.random.default_rng(5)
        acc = AttentionAccumulator(G4)
        for k in range(1, 6):
            acc = accumulate(acc, AttentionMap(G2, rng.random(4) + 0.1))
            assert acc.total == pytest.approx(k, abs=1e-9)

    def test_never_decreases(self):
        rng = np.random.default_rng(6)
        acc = AttentionAccumulator(G4)
        prev = acc.values
        for _ in range(5):
            acc = accumulate(acc, AttentionMap(G4, rng.random(16)))
            assert np.all(acc.values >= prev)
            prev = acc.values


class TestMaxNormalize:
    def test_peak_becomes_one(self):
        out = max_normalize(AttentionMap(G2, [1.0, 2.0, 3.0, 4.0]))
        assert out.values.max() == 1.0
        assert np.allclose(out.values, [0.25, 0.5, 0.75, 1.0])

    def test_zero_map_passes_through(self):
        out = max_normalize(AttentionMap(G2, np.zeros(4)))
        assert np.all(out.values == 0)


class TestAttentionMapValidation:
    def test_negative_values_rejected(self):
        with pytest.raises(ValueError):
            AttentionMap(G2, [-0.1, 0.0, 0.0, 0.0])

    def test_wrong_length_rejected(self):
        with pytest.raises(GridMismatch):
            AttentionMap(G2, [1.0, 2.0])

    def test_values_are_read_only(self):
        attn = AttentionMap(G2, np.ones(4))
        with pytest.raises(ValueError):
            attn.values[0] = 5.0
