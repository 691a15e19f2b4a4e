"""Mask generation, RSS combination, phantom and coil simulation tests."""

import numpy as np
import pytest

from ddrecon.autograd import Tensor
from ddrecon.errors import EmptySplitError, InfeasibleMaskError, ShapeMismatchError
from ddrecon.fourier import fft2c_array, ifft2c_array
from ddrecon.mri import (
    KSpaceVolume,
    apply_mask,
    generate_mask,
    generate_phantom,
    rss_reconstruct,
    sensitivity_maps,
    simulate_coils,
    split_dataset,
    zero_fill_reconstruct,
)


class TestGenerateMask:
    def test_clinical_geometry_counts(self):
        mask = generate_mask(368, 8.0, 0.04, 0)
        center = mask.lines[176:191]
        assert center.all() and center.size == 15
        assert mask.n_kept == 46

    def test_center_block_always_kept(self):
        for seed in range(20):
            mask = generate_mask(64, 8.0, 0.04, seed)
            n_center = 3  # round(0.04 * 64)
            start = (64 - n_center) // 2
            assert mask.lines[start:start + n_center].all()
            assert mask.n_kept == 8  # round(64 / 8)

    def test_acceleration_one_rejected(self):
        with pytest.raises(InfeasibleMaskError):
            generate_mask(368, 1.0, 0.04, 0)

    def test_near_unit_acceleration_keeps_almost_everything(self):
        mask = generate_mask(368, 1.0001, 0.0, 0)
        assert mask.n_kept == round(368 / 1.0001)

    def test_determinism_and_seed_sensitivity(self):
        a = generate_mask(368, 8.0, 0.04, 11)
        b = generate_mask(368, 8.0, 0.04, 11)
        c = generate_mask(368, 8.0, 0.04, 12)
        np.testing.assert_array_equal(a.lines, b.lines)
        assert (a.lines != c.lines).any()
        # differences stay outside the center block
        diff = a.lines != c.lines
        assert not diff[176:191].any()

    def test_infeasible_center_rejected(self):
        # centered block of 26 lines exceeds budget 64/8 = 8
        with pytest.raises(InfeasibleMaskError, match="exceeds"):
            generate_mask(64, 8.0, 0.4, 0)

    def test_small_width_rejected(self):
        with pytest.raises(InfeasibleMaskError):
            generate_mask(4, 2.0, 0.1, 0)


class TestApplyMask:
    def _volume(self, seed=31, ncoil=3, h=12, w=16):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((ncoil, h, w)) + 1j * rng.standard_normal((ncoil, h, w))
        return KSpaceVolume.from_complex(z, "s0")

    def test_all_true_mask_is_identity(self):
        vol = self._volume()
        mask = generate_mask(16, 1.0001, 0.0, 0)
        assert mask.lines.all()
        out = apply_mask(vol, mask)
        np.testing.assert_array_equal(out.complex(), vol.complex())

    def test_masked_columns_zero_kept_columns_bitexact(self):
        vol = self._volume()
        mask = generate_mask(16, 4.0, 0.1, 5)
        out = apply_mask(vol, mask)
        z_in, z_out = vol.complex(), out.complex()
        assert np.all(z_out[:, :, ~mask.lines] == 0)
        np.testing.assert_array_equal(z_out[:, :, mask.lines], z_in[:, :, mask.lines])

    def test_idempotent(self):
        vol = self._volume()
        mask = generate_mask(16, 4.0, 0.1, 6)
        once = apply_mask(vol, mask)
        twice = apply_mask(once, mask)
        np.testing.assert_array_equal(once.complex(), twice.complex())

    def test_energy_ratio_matches_column_energy(self):
        vol = self._volume(seed=32)
        mask = generate_mask(16, 2.0, 0.1, 7)
        out = apply_mask(vol, mask)
        z = vol.complex()
        column_energy = (np.abs(z) ** 2).sum(axis=(0, 1))
        expected = column_energy[mask.lines].sum() / column_energy.sum()
        measured = (np.abs(out.complex()) ** 2).sum() / (np.abs(z) ** 2).sum()
        assert measured == pytest.approx(expected, rel=1e-12)

    def test_length_mismatch(self):
        vol = self._volume()
        with pytest.raises(ShapeMismatchError):
            apply_mask(vol, generate_mask(32, 4.0, 0.1, 0))


class TestRss:
    def test_single_coil_complex_magnitude(self):
        img = np.full((8, 8), 3.0 + 4.0j)
        vol = KSpaceVolume.from_complex(fft2c_array(img)[None])
        out = rss_reconstruct(vol)
        np.testing.assert_allclose(out.data, 5.0, atol=1e-12)

    def test_two_real_coils(self):
        imgs = np.stack([np.full((8, 8), 3.0 + 0j), np.full((8, 8), 4.0 + 0j)])
        vol = KSpaceVolume.from_complex(fft2c_array(imgs))
        out = rss_reconstruct(vol)
        np.testing.assert_allclose(out.data, 5.0, atol=1e-12)

    def test_coil_permutation_invariance(self):
        rng = np.random.default_rng(33)
        z = rng.standard_normal((4, 8, 8)) + 1j * rng.standard_normal((4, 8, 8))
        a = rss_reconstruct(KSpaceVolume.from_complex(z))
        b = rss_reconstruct(KSpaceVolume.from_complex(z[[2, 0, 3, 1]]))
        np.testing.assert_allclose(a.data, b.data, atol=1e-12)

    @pytest.mark.parametrize("theta", [np.pi / 7, np.pi / 3])
    def test_global_phase_invariance(self, theta):
        rng = np.random.default_rng(34)
        z = rng.standard_normal((3, 8, 8)) + 1j * rng.standard_normal((3, 8, 8))
        a = rss_reconstruct(KSpaceVolume.from_complex(z))
        b = rss_reconstruct(KSpaceVolume.from_complex(z * np.exp(1j * theta)))
        np.testing.assert_allclose(a.data, b.data, atol=1e-10)

    def test_zero_fill_full_mask_equals_rss(self):
        rng = np.random.default_rng(35)
        z = rng.standard_normal((2, 8, 16)) + 1j * rng.standard_normal((2, 8, 16))
        vol = KSpaceVolume.from_complex(z)
        full = generate_mask(16, 1.0001, 0.0, 0)
        np.testing.assert_array_equal(
            zero_fill_reconstruct(apply_mask(vol, full)).data,
            rss_reconstruct(vol).data,
        )

    def test_zero_fill_loses_information(self):
        phantom = generate_phantom(64, 64, 8, 1)
        vol = simulate_coils(phantom, 4, 2)
        mask = generate_mask(64, 8.0, 0.04, 3)
        zf = zero_fill_reconstruct(apply_mask(vol, mask))
        full = rss_reconstruct(vol)
        err_zf = ((zf.data - phantom.data) ** 2).sum()
        err_full = ((full.data - phantom.data) ** 2).sum()
        assert err_zf > err_full * 10


class TestPhantom:
    def test_zero_ellipses_gives_zero_image(self):
        assert np.all(generate_phantom(32, 32, 0, 0).data == 0)

    def test_deterministic(self):
        a = generate_phantom(64, 64, 8, 123)
        b = generate_phantom(64, 64, 8, 123)
        np.testing.assert_array_equal(a.data, b.data)

    def test_range_clipped(self):
        img = generate_phantom(64, 64, 12, 5).data
        assert img.min() >= 0.0 and img.max() <= 1.0

    def test_mean_intensity_distribution(self):
        means = [generate_phantom(64, 64, 8, s).data.mean() for s in range(1000)]
        avg = float(np.mean(means))
        assert 0.05 < avg < 0.6

    def test_small_dims_rejected(self):
        with pytest.raises(ShapeMismatchError):
            generate_phantom(16, 64, 4, 0)


class TestSimulateCoils:
    def test_single_coil_round_trip(self):
        phantom = generate_phantom(64, 64, 8, 7)
        vol = simulate_coils(phantom, 1, 8)
        out = rss_reconstruct(vol)
        assert np.abs(out.data - phantom.data).max() < 1e-10

    def test_four_coil_round_trip_within_two_percent(self):
        phantom = generate_phantom(64, 64, 8, 9)
        vol = simulate_coils(phantom, 4, 10)
        out = rss_reconstruct(vol)
        support = phantom.data > 1e-6
        rel = np.abs(out.data[support] - phantom.data[support]) / phantom.data[support]
        assert rel.max() < 0.02

    def test_sensitivity_normalization(self):
        maps = sensitivity_maps(48, 40, 4, 11)
        rss = (np.abs(maps) ** 2).sum(axis=0)
        np.testing.assert_allclose(rss, 1.0, atol=1e-12)

    def test_zero_image_gives_zero_kspace(self):
        vol = simulate_coils(Tensor(np.zeros((32, 32))), 3, 12)
        assert np.all(vol.complex() == 0)

    def test_deterministic(self):
        phantom = generate_phantom(32, 32, 4, 13)
        a = simulate_coils(phantom, 3, 14).complex()
        b = simulate_coils(phantom, 3, 14).complex()
        np.testing.assert_array_equal(a, b)

    def test_noise_off_by_default(self):
        phantom = generate_phantom(32, 32, 4, 15)
        a = simulate_coils(phantom, 2, 16)
        b = simulate_coils(phantom, 2, 16, noise_sigma=0.0)
        np.testing.assert_array_equal(a.complex(), b.complex())

    def test_noise_changes_kspace(self):
        phantom = generate_phantom(32, 32, 4, 15)
        a = simulate_coils(phantom, 2, 16)
        b = simulate_coils(phantom, 2, 16, noise_sigma=0.01)
        assert (a.complex() != b.complex()).any()


class TestSplitDataset:
    def test_paper_sizes(self):
        ids = [f"s{i}" for i in range(720)]
        split = split_dataset(ids, (2 / 3, 1 / 6, 1 / 6), 0)
        assert (len(split.train), len(split.val), len(split.test)) == (480, 120, 120)

    def test_floor_rounding_rule(self):
        split = split_dataset(list("abcdef"), (0.5, 0.25, 0.25), 1)
        assert (len(split.train), len(split.val), len(split.test)) == (3, 1, 2)

    def test_disjoint_and_covering(self):
        ids = [f"s{i}" for i in range(50)]
        split = split_dataset(ids, (0.6, 0.2, 0.2), 2)
        parts = [set(split.train), set(split.val), set(split.test)]
        assert parts[0] | parts[1] | parts[2] == set(ids)
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])

    def test_deterministic(self):
        ids = [f"s{i}" for i in range(30)]
        a = split_dataset(ids, (0.5, 0.25, 0.25), 3)
        b = split_dataset(ids, (0.5, 0.25, 0.25), 3)
        assert a.train == b.train and a.val == b.val and a.test == b.test

    def test_too_few_ids(self):
        with pytest.raises(EmptySplitError):
            split_dataset(["a", "b"], (0.5, 0.25, 0.25), 0)

    def test_bad_fractions(self):
        with pytest.raises(EmptySplitError):
            split_dataset(list("abcdef"), (0.5, 0.3, 0.3), 0)
