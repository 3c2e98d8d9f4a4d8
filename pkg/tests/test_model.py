import math

import numpy as np
import pytest

from teacache import model as dit
from teacache import rng
from teacache.errors import FormatError, OddDimension, ShapeMismatch
from teacache.tensor import checksum, rel_l1_distance

# frozen from the first verified build (reference config, weight seed 42)
GOLDEN_FORWARD_T10 = -26.330840333014052
GOLDEN_MODULATE_T10 = 103.22677220500682
GOLDEN_WEIGHTS = 42.48874968372809


@pytest.fixture
def x_t():
    return rng.gaussian_tensor(123, dit.REFERENCE_CONFIG.latent_shape)


class TestSinusoidal:
    def test_zero_timestep(self):
        np.testing.assert_array_equal(dit.sinusoidal_embed(0, 4), [0.0, 0.0, 1.0, 1.0])

    def test_odd_dimension(self):
        with pytest.raises(OddDimension):
            dit.sinusoidal_embed(0, 3)

    def test_large_timestep_bounded(self):
        e = dit.sinusoidal_embed(1000, 64)
        assert e.shape == (64,)
        assert np.all(np.isfinite(e)) and np.all(np.abs(e) <= 1.0)

    def test_matches_formula(self):
        dim, t = 8, 7.0
        e = dit.sinusoidal_embed(t, dim)
        for i in range(dim // 2):
            w = 10000.0 ** (-2 * i / dim)
            assert e[i] == pytest.approx(math.sin(t * w), abs=1e-15)
            assert e[dim // 2 + i] == pytest.approx(math.cos(t * w), abs=1e-15)


class TestTimestepEmbedding:
    def test_deterministic(self, weights):
        a = dit.timestep_embedding(weights, 12)
        b = dit.timestep_embedding(weights, 12)
        assert np.array_equal(a, b)

    def test_varies_with_t(self, weights):
        assert rel_l1_distance(dit.timestep_embedding(weights, 5), dit.timestep_embedding(weights, 6)) > 0

    def test_shape(self, weights):
        assert dit.timestep_embedding(weights, 3).shape == (weights.config.hidden_dim,)


class TestModulate:
    def test_zero_params_is_identity(self, weights):
        x = rng.gaussian_tensor(1, (16, 32))
        emb = dit.timestep_embedding(weights, 4)
        np.testing.assert_array_equal(dit.modulate(x, emb, dit.ModulationParams.zeros(32)), x)

    def test_zero_input_gives_shift(self, weights):
        emb = dit.timestep_embedding(weights, 4)
        p = weights.attn_modulation(1)
        out = dit.modulate(np.zeros((5, 32)), emb, p)
        shift = emb @ p.shift_w + p.shift_b
        for row in out:
            np.testing.assert_array_equal(row, shift)

    def test_against_straight_line_oracle(self, weights):
        emb = dit.timestep_embedding(weights, 10)
        p = weights.attn_modulation(0)
        h = rng.gaussian_tensor(7, (16, 32))
        expected = np.zeros_like(h)
        for j in range(32):
            shift = p.shift_b[j]
            scale = p.scale_b[j]
            for k in range(32):
                shift += emb[k] * p.shift_w[k, j]
                scale += emb[k] * p.scale_w[k, j]
            for i in range(16):
                expected[i, j] = h[i, j] * (1.0 + scale) + shift
        got = dit.modulate(h, emb, p)
        np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-14)
        assert checksum(got) == pytest.approx(checksum(expected), rel=1e-12)
        assert checksum(got) == pytest.approx(GOLDEN_MODULATE_T10, rel=1e-9)

    def test_shape_mismatch(self, weights):
        emb = dit.timestep_embedding(weights, 1)
        with pytest.raises(ShapeMismatch):
            dit.modulate(np.zeros((4, 31)), emb, weights.attn_modulation(0))


class TestForward:
    def test_deterministic_and_shape(self, weights, cond, x_t):
        emb = dit.timestep_embedding(weights, 10)
        a = dit.forward(weights, x_t, emb, cond)
        b = dit.forward(weights, x_t, emb, cond)
        assert a.shape == x_t.shape
        assert np.array_equal(a, b)

    def test_golden_checksum(self, weights, cond, x_t):
        out = dit.forward(weights, x_t, dit.timestep_embedding(weights, 10), cond)
        assert checksum(out) == pytest.approx(GOLDEN_FORWARD_T10, rel=1e-9)

    def test_shape_errors(self, weights, cond):
        emb = dit.timestep_embedding(weights, 1)
        with pytest.raises(ShapeMismatch):
            dit.forward(weights, np.zeros((16, 7)), emb, cond)
        with pytest.raises(ShapeMismatch):
            dit.forward(weights, np.zeros((16, 8)), emb, np.zeros(3))

    def test_small_perturbation_is_tame(self, weights, cond, x_t):
        emb = dit.timestep_embedding(weights, 10)
        base = dit.forward(weights, x_t, emb, cond)
        signs = np.where(rng.uniform(rng.philox(5), 0, 1, x_t.shape) < 0.5, -1.0, 1.0)
        moved = dit.forward(weights, x_t + 1e-9 * signs, emb, cond)
        assert rel_l1_distance(moved, base) < 1e-3


class TestFirstBlockModulatedInput:
    def test_matches_capture(self, weights, cond, x_t):
        emb = dit.timestep_embedding(weights, 10)
        cap = {}
        dit.forward(weights, x_t, emb, cond, capture=cap)
        got = dit.first_block_modulated_input(weights, x_t, emb, cond)
        assert np.array_equal(got, cap["block0_modulated"])

    def test_deterministic(self, weights, cond, x_t):
        emb = dit.timestep_embedding(weights, 3)
        a = dit.first_block_modulated_input(weights, x_t, emb, cond)
        assert np.array_equal(a, dit.first_block_modulated_input(weights, x_t, emb, cond))

    def test_changes_with_t(self, weights, cond, x_t):
        a = dit.first_block_modulated_input(weights, x_t, dit.timestep_embedding(weights, 10), cond)
        b = dit.first_block_modulated_input(weights, x_t, dit.timestep_embedding(weights, 11), cond)
        assert rel_l1_distance(b, a) > 0


class TestWeights:
    def test_pure_function_of_config(self, weights):
        again = dit.init_weights(dit.ModelConfig())
        assert weights.equals(again)
        assert np.array_equal(weights.flat(), again.flat())

    def test_seed_changes_weights(self, weights):
        other = dit.init_weights(dit.ModelConfig(weight_seed=43))
        assert not weights.equals(other)

    def test_init_range_and_golden(self, weights):
        flat = weights.flat()
        assert flat.min() >= -dit.INIT_BOUND and flat.max() <= dit.INIT_BOUND
        assert checksum(flat) == pytest.approx(GOLDEN_WEIGHTS, rel=1e-12)

    def test_layout_size(self, weights):
        n = sum(math.prod(s) for _, s in dit.param_layout(weights.config))
        assert weights.flat().size == n

    def test_roundtrip_file(self, weights, tmp_path):
        path = tmp_path / "w.bin"
        dit.save_weights(weights, path)
        loaded = dit.load_weights(path)
        assert loaded.equals(weights)
        blob = path.read_bytes()
        assert blob[:8] == dit.WEIGHTS_MAGIC
        assert int.from_bytes(blob[8:12], "little") == dit.WEIGHTS_VERSION
        assert int.from_bytes(blob[12:16], "little") == weights.config.token_count

    def test_bad_file(self, weights, tmp_path):
        path = tmp_path / "w.bin"
        dit.save_weights(weights, path)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            dit.load_weights(path)
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 60)
        with pytest.raises(FormatError):
            dit.load_weights(path)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(hidden_dim=30, num_heads=4), dict(token_count=0), dict(num_blocks=-1)],
    )
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            dit.ModelConfig(**kwargs)


def test_forward_flops_positive():
    assert dit.forward_flops(dit.REFERENCE_CONFIG) > 0
