"""Data consistency and cascade wiring tests."""

import numpy as np
import pytest

from ddrecon.autograd import Tape, Tensor, backward, l2_loss, tsum
from ddrecon.cascade import (
    CascadeConfig,
    DCConfig,
    DualDomainCascade,
    data_consistency,
)
from ddrecon.errors import ShapeMismatchError
from ddrecon.fourier import (
    DOMAIN_IMAGE,
    DOMAIN_KSPACE,
    ComplexImage,
    fft2c,
    ifft2c,
)
from ddrecon.gradcheck import grad_check
from ddrecon.mri import apply_mask, generate_mask, generate_phantom, simulate_coils
from ddrecon.senet import SENetConfig
from ddrecon.training import LossWeights, compute_loss


def tiny_setup(seed=70, ncoil=2, size=8):
    phantom = generate_phantom(32, 32, 4, seed)
    vol = simulate_coils(phantom, ncoil, seed + 1)
    z = vol.complex()[:, 12:12 + size, 12:12 + size]
    from ddrecon.mri import KSpaceVolume

    full = KSpaceVolume.from_complex(z, "tiny")
    mask = generate_mask(size, 2.0, 0.13, seed + 2)
    sparse = apply_mask(full, mask)
    return full, sparse, mask


def randomize_final_layers(model, seed):
    """Move zero-started output layers to a generic operating point."""
    rng = np.random.default_rng(seed)
    for block in list(model.inets) + list(model.knets):
        final = block.net.final
        final.weight.data[:] = rng.uniform(-0.3, 0.3, final.weight.shape)
        final.bias.data[:] = rng.uniform(-0.1, 0.1, final.bias.shape)


def tiny_config(ncoil=2, n_iterations=2, residual=True, lam=0.05):
    ch = 2 * ncoil
    net = SENetConfig(ch, ch, base_width=4, depth=1, reduction_ratio=2)
    return CascadeConfig(
        n_iterations=n_iterations,
        use_cross_iteration_residual=residual,
        inet=net,
        knet=SENetConfig(ch, ch, base_width=4, depth=1, reduction_ratio=2),
        dc=DCConfig(lam),
        ncoil=ncoil,
    )


class TestDataConsistency:
    def test_hand_value_at_sampled_point(self):
        k_pre = ComplexImage(Tensor(np.full((1, 2, 4, 4), 2.0)), DOMAIN_KSPACE)
        k_s = np.full((1, 2, 4, 4), 1.0)
        mask = np.ones(4, dtype=bool)
        out = data_consistency(k_pre, k_s, mask, 0.05)
        expected = (0.05 * 2.0 + 1.0) / 1.05
        np.testing.assert_allclose(out.tensor.data, expected, rtol=1e-15)
        assert expected == pytest.approx(1.0476190476190477)

    def test_unsampled_points_unchanged(self):
        rng = np.random.default_rng(71)
        pre = rng.standard_normal((1, 2, 4, 6))
        k_s = rng.standard_normal((1, 2, 4, 6))
        mask = np.array([True, False, True, False, False, True])
        out = data_consistency(ComplexImage(Tensor(pre), DOMAIN_KSPACE), k_s, mask, 0.05)
        np.testing.assert_array_equal(out.tensor.data[..., ~mask], pre[..., ~mask])

    def test_fixed_point_when_prediction_matches(self):
        rng = np.random.default_rng(72)
        k_s = rng.standard_normal((1, 2, 4, 6))
        mask = np.array([True, True, False, True, False, False])
        out = data_consistency(ComplexImage(Tensor(k_s.copy()), DOMAIN_KSPACE),
                               k_s, mask, 0.05)
        np.testing.assert_allclose(out.tensor.data, k_s, rtol=0, atol=1e-15)

    def test_exact_contraction_factor(self):
        rng = np.random.default_rng(73)
        pre = rng.standard_normal((2, 4, 6, 8))
        k_s = rng.standard_normal((2, 4, 6, 8))
        mask = rng.uniform(size=8) < 0.5
        lam = 0.05
        out = data_consistency(ComplexImage(Tensor(pre), DOMAIN_KSPACE), k_s, mask, lam)
        got = out.tensor.data[..., mask] - k_s[..., mask]
        want = (lam / (lam + 1.0)) * (pre[..., mask] - k_s[..., mask])
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-15)

    def test_lambda_zero_replaces_sampled_columns(self):
        rng = np.random.default_rng(74)
        pre = rng.standard_normal((1, 2, 4, 6))
        k_s = rng.standard_normal((1, 2, 4, 6))
        mask = np.array([True, False, True, True, False, False])
        out = data_consistency(ComplexImage(Tensor(pre), DOMAIN_KSPACE), k_s, mask, 0.0)
        np.testing.assert_array_equal(out.tensor.data[..., mask], k_s[..., mask])
        np.testing.assert_array_equal(out.tensor.data[..., ~mask], pre[..., ~mask])

    def test_gradient_is_scaled_passthrough(self):
        rng = np.random.default_rng(75)
        pre = Tensor(rng.standard_normal((1, 2, 4, 6)), requires_grad=True)
        k_s = rng.standard_normal((1, 2, 4, 6))
        mask = np.array([True, False, False, True, False, True])
        lam = 0.05
        with Tape() as tape:
            out = data_consistency(ComplexImage(pre, DOMAIN_KSPACE), k_s, mask, lam)
            backward(tsum(out.tensor), tape)
        expected = np.where(mask[None, None, None, :], lam / (lam + 1.0), 1.0)
        np.testing.assert_allclose(pre.grad, np.broadcast_to(expected, pre.data.shape),
                                   rtol=1e-15)

    def test_shape_mismatch(self):
        pre = ComplexImage(Tensor(np.zeros((1, 2, 4, 4))), DOMAIN_KSPACE)
        with pytest.raises(ShapeMismatchError):
            data_consistency(pre, np.zeros((1, 2, 4, 6)), np.ones(4, bool), 0.05)


class TestWiring:
    def test_zero_residual_matches_no_residual(self):
        full, sparse, mask = tiny_setup()
        cfg = tiny_config()
        model = DualDomainCascade(cfg, seed=76)
        inet2 = model.inets[1]
        k_in = sparse.data
        zero_res = ComplexImage(Tensor(np.zeros_like(k_in.tensor.data)), DOMAIN_IMAGE)
        a = inet2(k_in, None).tensor.data
        b = inet2(k_in, zero_res).tensor.data
        np.testing.assert_array_equal(a, b)

    def test_knet_zero_residual_matches(self):
        full, sparse, mask = tiny_setup()
        cfg = tiny_config()
        model = DualDomainCascade(cfg, seed=77)
        img = ifft2c(sparse.data)
        zero_res = ComplexImage(Tensor(np.zeros_like(img.tensor.data)), DOMAIN_KSPACE)
        a = model.knets[0](img, None, sparse.data.tensor.data, mask.lines, 0.05)
        b = model.knets[0](img, zero_res, sparse.data.tensor.data, mask.lines, 0.05)
        np.testing.assert_array_equal(a.tensor.data, b.tensor.data)

    def test_residual_shifts_input_by_previous_image(self):
        full, sparse, mask = tiny_setup()
        cfg = tiny_config()
        model = DualDomainCascade(cfg, seed=78)
        out = model(sparse.data, mask.lines)
        i1, k1 = out.images[0], out.kspaces[0]
        # reproduce iteration 2's pre-network input by hand
        expected_input = ifft2c(
            ComplexImage(Tensor(k1.tensor.data), DOMAIN_KSPACE)
        ).tensor.data + i1.tensor.data
        manual = model.inets[1].net(Tensor(expected_input))
        np.testing.assert_allclose(out.images[1].tensor.data, manual.data,
                                   rtol=0, atol=1e-12)

    def test_disabled_residuals_reproduce_plain_two_iteration_wiring(self):
        full, sparse, mask = tiny_setup()
        cfg = tiny_config(residual=False)
        model = DualDomainCascade(cfg, seed=79)
        out = model(sparse.data, mask.lines)
        # manual composition: iteration 2 input is exactly ifft2c(K_1)
        i2_manual = model.inets[1](out.kspaces[0], None)
        k2_manual = model.knets[1](i2_manual, None, sparse.data.tensor.data,
                                   mask.lines, cfg.dc.lam)
        np.testing.assert_array_equal(out.images[1].tensor.data, i2_manual.tensor.data)
        np.testing.assert_array_equal(out.kspaces[1].tensor.data, k2_manual.tensor.data)

    def test_enabling_residual_changes_only_by_previous_iteration_terms(self):
        full, sparse, mask = tiny_setup()
        on = DualDomainCascade(tiny_config(residual=True), seed=80)
        off = DualDomainCascade(tiny_config(residual=False), seed=80)
        # identical parameters by construction seed
        out_on = on(sparse.data, mask.lines)
        out_off = off(sparse.data, mask.lines)
        np.testing.assert_array_equal(out_on.images[0].tensor.data,
                                      out_off.images[0].tensor.data)
        assert (out_on.images[1].tensor.data != out_off.images[1].tensor.data).any()


class TestCascade:
    def test_single_iteration_degenerate(self):
        full, sparse, mask = tiny_setup()
        model = DualDomainCascade(tiny_config(n_iterations=1), seed=81)
        out = model(sparse.data, mask.lines)
        assert len(out.images) == 1 and len(out.kspaces) == 1
        assert out.final_image.data.shape == (1, 8, 8)

    def test_final_image_real_nonnegative(self):
        full, sparse, mask = tiny_setup()
        model = DualDomainCascade(tiny_config(), seed=82)
        out = model(sparse.data, mask.lines)
        assert np.isrealobj(out.final_image.data)
        assert np.all(out.final_image.data >= 0)

    def test_lambda_zero_forces_measurements_for_any_parameters(self):
        full, sparse, mask = tiny_setup()
        for seed in (83, 84):
            model = DualDomainCascade(tiny_config(lam=0.0), seed=seed)
            out = model(sparse.data, mask.lines)
            got = out.kspaces[-1].tensor.data[..., mask.lines]
            want = sparse.data.tensor.data[..., mask.lines]
            np.testing.assert_array_equal(got, want)

    def test_determinism(self):
        full, sparse, mask = tiny_setup()
        a = DualDomainCascade(tiny_config(), seed=85)(sparse.data, mask.lines)
        b = DualDomainCascade(tiny_config(), seed=85)(sparse.data, mask.lines)
        for ta, tb in zip(a.images + a.kspaces, b.images + b.kspaces):
            np.testing.assert_array_equal(ta.tensor.data, tb.tensor.data)
        np.testing.assert_array_equal(a.final_image.data, b.final_image.data)

    def test_batch_duplication_is_exact(self):
        full, sparse, mask = tiny_setup()
        model = DualDomainCascade(tiny_config(), seed=86)
        single = model(sparse.data, mask.lines)
        doubled_input = ComplexImage(
            Tensor(np.concatenate([sparse.data.tensor.data] * 2)), DOMAIN_KSPACE
        )
        doubled = model(doubled_input, np.stack([mask.lines] * 2))
        np.testing.assert_array_equal(doubled.final_image.data[0],
                                      single.final_image.data[0])
        np.testing.assert_array_equal(doubled.final_image.data[1],
                                      single.final_image.data[0])

    def test_full_gradient_check(self):
        full, sparse, mask = tiny_setup()
        model = DualDomainCascade(tiny_config(), seed=87)
        randomize_final_layers(model, seed=88)
        ks = Tensor(sparse.data.tensor.data)
        i_full = ifft2c(full.data).tensor.data
        k_full = full.data.tensor.data
        weights = LossWeights.default_for(2)

        def fwd():
            out = model(ComplexImage(ks, DOMAIN_KSPACE), mask.lines)
            return compute_loss(out, i_full, k_full, weights)

        report = grad_check(fwd, model.parameters())
        assert report.passed(1e-3), (report.max_rel_error, report.failures[:3])

    def test_config_validation(self):
        with pytest.raises(ShapeMismatchError):
            CascadeConfig(n_iterations=0, ncoil=2)
        with pytest.raises(ShapeMismatchError):
            CascadeConfig(inet=SENetConfig(2, 2, 4, 1, 2), ncoil=2)
