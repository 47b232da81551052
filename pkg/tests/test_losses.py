"""Analytic and property tests for every loss operation.

Expected values below were computed independently with a scalar
calculator (math.log) before the implementation existed, then frozen.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aegan import losses, tape
from aegan.errors import ShapeError, UsageError

LN_HALF = math.log(0.5)  # -0.6931471805599453


class TestAdversarialKernel:
    def test_uniform_half(self):
        # (ln 0.5) + (ln 0.5) = -1.3862943611198906
        v = losses.adversarial_loss([0.5], [0.5])
        assert v == pytest.approx(2 * LN_HALF, abs=1e-12)

    def test_perfect_discriminator_near_zero(self):
        eps = 1e-7
        v = losses.adversarial_loss([1 - eps], [eps])
        assert v == pytest.approx(0.0, abs=1e-5)

    def test_mixed_batch_hand_computed(self):
        # (ln 0.9 + ln 0.5)/2 + ln(1 - 0.1) = -0.504614363766712
        v = losses.adversarial_loss([0.9, 0.5], [0.1])
        assert v == pytest.approx(-0.504614363766712, abs=1e-9)

    def test_empty_batch_rejected(self):
        with pytest.raises(UsageError):
            losses.adversarial_loss([], [0.5])
        with pytest.raises(UsageError):
            losses.adversarial_loss([0.5], [])

    def test_out_of_range_rejected(self):
        with pytest.raises(UsageError):
            losses.adversarial_loss([1.0], [0.5])
        with pytest.raises(UsageError):
            losses.adversarial_loss([0.5], [0.0])

    def test_all_components_share_the_kernel(self):
        """Cross-call every component wrapper with identical inputs."""
        real, fake = [0.7, 0.6], [0.2, 0.3]
        expected = losses.adversarial_loss(real, fake)
        for fn in (losses.gan_loss_generated_samples,
                   losses.gan_loss_autoencoded_samples,
                   losses.gan_loss_encoded_latents,
                   losses.gan_loss_cycled_latents):
            assert fn(real, fake) == expected

    @given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6),
           st.floats(1e-4, 0.4))
    @settings(max_examples=200, deadline=None)
    def test_monotonicity(self, p_real, p_fake, delta):
        base = losses.adversarial_loss([p_real], [p_fake])
        if p_fake + delta < 1.0:
            assert losses.adversarial_loss([p_real], [p_fake + delta]) < base
        if p_real + delta < 1.0:
            assert losses.adversarial_loss([p_real + delta], [p_fake]) > base

    @given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=8),
           st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=8))
    @settings(max_examples=100, deadline=None)
    def test_always_negative(self, real, fake):
        assert losses.adversarial_loss(real, fake) < 0


class TestReconstruction:
    def test_identity_case(self):
        x = np.random.default_rng(0).normal(size=(4, 2))
        z = np.random.default_rng(1).normal(size=(4, 8))
        rx, rz, total = losses.reconstruction_loss(
            x, x.copy(), z, z.copy(), losses.ReconWeights(1.0, 1.0))
        assert rx == 0.0 and rz == 0.0 and total == 0.0

    def test_constant_offset_l1(self):
        x = np.zeros((3, 5))
        rx = losses.sample_reconstruction(x, x + 0.5)
        assert rx == pytest.approx(0.5, abs=1e-12)
        _, _, total = losses.reconstruction_loss(
            x, x + 0.5, np.zeros((3, 2)), np.zeros((3, 2)),
            losses.ReconWeights(1.0, 0.0))
        assert total == pytest.approx(0.5, abs=1e-12)

    def test_three_four_five(self):
        z = np.array([[3.0, 4.0]])
        rz = losses.latent_reconstruction(np.zeros((1, 2)), z)
        assert rz == pytest.approx(5.0, abs=1e-12)
        _, _, total = losses.reconstruction_loss(
            np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)), z,
            losses.ReconWeights(0.0, 1.0))
        assert total == pytest.approx(5.0, abs=1e-12)

    def test_squared_variant(self):
        z = np.array([[3.0, 4.0]])
        assert losses.latent_reconstruction(np.zeros((1, 2)), z, squared=True) \
            == pytest.approx(25.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            losses.sample_reconstruction(np.zeros((2, 2)), np.zeros((3, 2)))
        with pytest.raises(ShapeError):
            losses.latent_reconstruction(np.zeros((2, 2)), np.zeros((2, 3)))

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
    @settings(max_examples=100, deadline=None)
    def test_nonnegative_and_identity_of_indiscernibles(self, vals):
        x = np.array(vals).reshape(1, -1)
        y = np.zeros_like(x)
        rx = losses.sample_reconstruction(x, y)
        rz = losses.latent_reconstruction(x, y)
        assert rx >= 0 and rz >= 0
        if np.max(np.abs(x)) > 1e-9:
            assert rx > 0 and rz > 0
        assert losses.sample_reconstruction(x, x) == 0
        assert losses.latent_reconstruction(x, x) == 0

    def test_negative_weights_rejected(self):
        with pytest.raises(UsageError):
            losses.ReconWeights(-1.0, 0.0)


class TestComposedObjective:
    def test_all_half_perfect_recon(self):
        # 4 components, each 2 ln 0.5, recon terms zero:
        # total = 8 ln 0.5 = -5.545177444479562
        half = np.full((4, 1), 0.5)
        x = np.zeros((4, 2))
        z = np.zeros((4, 8))
        bd = losses.aegan_loss(half, half, half, half, half, half,
                               x, x.copy(), z, z.copy(),
                               losses.ReconWeights(1.0, 1.0))
        assert bd.total == pytest.approx(8 * LN_HALF, abs=1e-9)
        assert bd.recon_x == 0.0 and bd.recon_z == 0.0
        for name in ("gan_x_hat", "gan_x_tilde", "gan_z_hat", "gan_z_tilde"):
            assert getattr(bd, name) == pytest.approx(2 * LN_HALF, abs=1e-12)

    def test_zero_weights_leave_adversarial_sum(self):
        half = np.full((2, 1), 0.5)
        x = np.ones((2, 2))
        z = np.ones((2, 4))
        bd = losses.aegan_loss(half, half, half, half, half, half,
                               x, x * 2, z, z * 3,
                               losses.ReconWeights(0.0, 0.0))
        assert bd.total == pytest.approx(
            bd.gan_x_hat + bd.gan_x_tilde + bd.gan_z_hat + bd.gan_z_tilde, abs=1e-12)

    def test_component_arithmetic(self):
        bd = losses.compose_breakdown(
            losses.ReconWeights(2.0, 4.0),
            gan_x_hat=-1.0, gan_x_tilde=-1.0, gan_z_hat=-1.0, gan_z_tilde=-1.0,
            recon_x=0.5, recon_z=0.25)
        assert bd.total == pytest.approx(-2.0, abs=1e-12)

    def test_total_invariant_holds(self):
        rng = np.random.default_rng(7)
        w = losses.ReconWeights(1.5, 0.25)
        probs = [rng.uniform(0.05, 0.95, size=(5, 1)) for _ in range(6)]
        x, xr = rng.normal(size=(5, 2)), rng.normal(size=(5, 2))
        z, zr = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        bd = losses.aegan_loss(*probs, x, xr, z, zr, w)
        manual = (bd.gan_x_hat + bd.gan_x_tilde + bd.gan_z_hat + bd.gan_z_tilde
                  + w.lambda_rx * bd.recon_x + w.lambda_rz * bd.recon_z)
        assert bd.total == pytest.approx(manual, abs=1e-12)
        for name in ("gan_x_hat", "gan_x_tilde", "gan_z_hat", "gan_z_tilde"):
            assert getattr(bd, name) <= 0

    @given(st.floats(0, 5), st.floats(0, 5))
    @settings(max_examples=50, deadline=None)
    def test_lambda_linearity(self, lx, lz):
        x = np.zeros((2, 3))
        xr = x + 0.4
        z = np.zeros((2, 2))
        zr = z + 1.0
        _, _, w1 = losses.reconstruction_loss(x, xr, z, zr, losses.ReconWeights(lx, lz))
        rx, rz, _ = losses.reconstruction_loss(x, xr, z, zr, losses.ReconWeights(1, 1))
        assert w1 == pytest.approx(lx * rx + lz * rz, rel=1e-12, abs=1e-12)

    def test_absent_components_stay_absent(self):
        bd = losses.compose_breakdown(losses.ReconWeights(1, 1), gan_x_hat=-1.2)
        assert bd.total == pytest.approx(-1.2)
        assert bd.gan_z_hat is None and bd.recon_x is None
        row = bd.csv_row()
        assert row[0] != "" and row[2] == ""


class TestGeneratorSide:
    def test_variants_at_half(self):
        half = np.full((3, 1), 0.5)
        mm = losses.generator_side_loss([half], 0.0, variant="minimax")
        ns = losses.generator_side_loss([half], 0.0, variant="non_saturating")
        assert mm == pytest.approx(LN_HALF, abs=1e-12)
        assert ns == pytest.approx(-LN_HALF, abs=1e-12)
        # with perfect reconstruction the two variants differ by 2 ln 0.5
        assert mm - ns == pytest.approx(2 * LN_HALF, abs=1e-12)

    def test_saturation_limits(self):
        eps = np.full((2, 1), 1e-7)
        mm = losses.generator_side_loss([eps], 0.0, variant="minimax")
        ns = losses.generator_side_loss([eps], 0.0, variant="non_saturating")
        assert mm == pytest.approx(0.0, abs=1e-5)
        assert ns == pytest.approx(-math.log(1e-7), rel=1e-9)

    def test_reconstruction_added_unchanged(self):
        half = np.full((2, 1), 0.5)
        v = losses.generator_side_loss([half], 3.25, variant="non_saturating")
        assert v == pytest.approx(-LN_HALF + 3.25, abs=1e-12)

    def test_unknown_variant(self):
        with pytest.raises(UsageError):
            losses.generator_side_loss([np.array([0.5])], 0.0, variant="wasserstein")

    def test_needs_at_least_one_batch(self):
        with pytest.raises(UsageError):
            losses.generator_side_loss([], 0.0)


class TestDiscriminatorSide:
    def test_sums_components_over_shared_real_batch(self):
        real = np.array([0.8, 0.7])
        f1, f2 = np.array([0.3]), np.array([0.4])
        v = losses.discriminator_side_loss(real, [f1, f2])
        expected = (losses.adversarial_loss(real, f1)
                    + losses.adversarial_loss(real, f2))
        assert v == pytest.approx(expected, abs=1e-12)


class TestTensorPath:
    def test_tensor_inputs_return_tensors_with_gradients(self):
        p = tape.Tensor(np.array([[0.6], [0.4]]), requires_grad=True)
        out = losses.adversarial_loss(np.array([[0.7]]), p)
        assert isinstance(out, tape.Tensor)
        out.backward()
        # d/dp mean(log(1-p)) = -1/(2 (1-p))
        np.testing.assert_allclose(
            p.grad, [[-1 / (2 * 0.4)], [-1 / (2 * 0.6)]], rtol=1e-12)

    def test_value_matches_float_path(self):
        rng = np.random.default_rng(3)
        pr = rng.uniform(0.1, 0.9, size=(4, 1))
        pf = rng.uniform(0.1, 0.9, size=(4, 1))
        f = losses.adversarial_loss(pr, pf)
        t = losses.adversarial_loss(tape.Tensor(pr), tape.Tensor(pf))
        assert t.item() == f
