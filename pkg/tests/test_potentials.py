"""Trap, Gaussian pair interaction, and minimum-image mapping."""

import numpy as np
import pytest

from bosemd.model import Gaussian, HarmonicTrap, PeriodicBox, SystemSpec, build_system
from bosemd.potentials import (
    gaussian_pair_energy_forces,
    minimum_image,
    trap_energy_forces,
)


class TestMinimumImage:
    def test_inside_box_unchanged(self):
        np.testing.assert_allclose(minimum_image([0.1, -0.2], 3.0), [0.1, -0.2])

    def test_wraps_down(self):
        np.testing.assert_allclose(minimum_image([1.6, 0.0], 3.0), [-1.4, 0.0])

    def test_half_open_boundary(self):
        # components map into [-L/2, L/2): +1.5 folds to -1.5, -1.5 stays
        out = minimum_image([-1.5, 2.9], 3.0)
        np.testing.assert_allclose(out, [-1.5, -0.1], atol=1e-12)
        assert minimum_image([1.5], 3.0)[0] == pytest.approx(-1.5)

    def test_far_image(self):
        assert minimum_image([7.3], 3.0)[0] == pytest.approx(7.3 - 6.0)


def _trap_config(n=2, p=4, seed=0, **kw):
    spec = SystemSpec(n, p, 2, 1.0, HarmonicTrap(), **kw)
    cfg = build_system(spec, seed=seed)
    rng = np.random.default_rng(seed + 50)
    cfg.positions[:] = rng.normal(size=cfg.positions.shape)
    return cfg


class TestTrap:
    def test_origin_zero(self):
        cfg = _trap_config()
        cfg.positions[:] = 0.0
        e, f = trap_energy_forces(cfg)
        assert e == 0.0
        np.testing.assert_array_equal(f, 0.0)

    def test_single_bead_at_unit(self):
        cfg = _trap_config()
        cfg.positions[:] = 0.0
        cfg.positions[0] = [1.0, 0.0]
        e, _ = trap_energy_forces(cfg)
        assert e == pytest.approx(0.5)

    def test_forces_finite_difference(self):
        cfg = _trap_config(seed=1)
        e0, f = trap_energy_forces(cfg)
        eps = 1e-6
        P = cfg.spec.n_beads
        for flat in (0, 3, 7):
            for d in range(2):
                up, dn = cfg.copy(), cfg.copy()
                up.positions[flat, d] += eps
                dn.positions[flat, d] -= eps
                fd = -(trap_energy_forces(up)[0] - trap_energy_forces(dn)[0]) / (2 * eps) / P
                assert f[flat, d] == pytest.approx(fd, rel=1e-8, abs=1e-10)

    def test_rejects_box(self):
        spec = SystemSpec(2, 4, 2, 1.0, PeriodicBox(3.0), mass=0.5)
        cfg = build_system(spec, seed=0)
        with pytest.raises(ValueError):
            trap_energy_forces(cfg)


def _pair_config(geometry, n=2, p=4, g=3.0, s=0.5, seed=0, **kw):
    spec = SystemSpec(n, p, 2, 1.0, geometry, interaction=Gaussian(g, s), **kw)
    cfg = build_system(spec, seed=seed)
    return cfg


class TestGaussianPair:
    def test_coincident_pair_one_slice(self):
        # both ordered pairs count: 1/2 * 2 * g/(pi s^2) = 3/(0.25 pi)
        cfg = _pair_config(HarmonicTrap(), p=1)
        cfg.positions[:] = 0.0
        e, _ = gaussian_pair_energy_forces(cfg)
        assert e == pytest.approx(3.0 / (np.pi * 0.25), rel=1e-12)

    def test_far_separation_negligible(self):
        cfg = _pair_config(HarmonicTrap(), p=2)
        cfg.positions[:2] = 0.0
        cfg.positions[2:] = 50.0
        e, _ = gaussian_pair_energy_forces(cfg)
        assert e < 1e-12

    def test_zero_coupling(self):
        cfg = _pair_config(HarmonicTrap(), g=0.0)
        e, f = gaussian_pair_energy_forces(cfg)
        assert e == 0.0
        np.testing.assert_array_equal(f, 0.0)

    def test_slice_sum_by_hand(self):
        g, s = 2.0, 0.7
        cfg = _pair_config(HarmonicTrap(), n=3, p=2, g=g, s=s, seed=3)
        rng = np.random.default_rng(33)
        cfg.positions[:] = rng.normal(size=cfg.positions.shape)
        v = lambda d: g / (np.pi * s**2) * np.exp(-np.sum(d**2) / s**2)
        expect = 0.0
        for sl in range(2):
            beads = [cfg.positions[cfg.layout.bead(i, sl)] for i in range(3)]
            for i in range(3):
                for j in range(i + 1, 3):
                    expect += v(beads[i] - beads[j])
        e, _ = gaussian_pair_energy_forces(cfg)
        assert e == pytest.approx(expect, rel=1e-12)

    def test_minimum_image_in_box(self):
        # two beads near opposite walls interact across the boundary
        L = 3.0
        cfg = _pair_config(PeriodicBox(L), p=1, mass=0.5, seed=4)
        cfg.positions[0] = [0.1, 0.0]
        cfg.positions[1] = [L - 0.1, 0.0]
        e, _ = gaussian_pair_energy_forces(cfg)
        expect = 3.0 / (np.pi * 0.25) * np.exp(-(0.2**2) / 0.25)
        assert e == pytest.approx(expect, rel=1e-12)

    def test_forces_finite_difference(self):
        cfg = _pair_config(PeriodicBox(3.0), n=3, p=3, mass=0.5, seed=5)
        e0, f = gaussian_pair_energy_forces(cfg)
        eps = 1e-6
        P = cfg.spec.n_beads
        rng = np.random.default_rng(55)
        for flat in rng.integers(0, cfg.positions.shape[0], size=4):
            for d in range(2):
                up, dn = cfg.copy(), cfg.copy()
                up.positions[flat, d] += eps
                dn.positions[flat, d] -= eps
                fd = -(
                    gaussian_pair_energy_forces(up)[0]
                    - gaussian_pair_energy_forces(dn)[0]
                ) / (2 * eps) / P
                assert f[flat, d] == pytest.approx(fd, rel=1e-6, abs=1e-10)

    def test_newtons_third_law(self):
        cfg = _pair_config(PeriodicBox(3.0), n=4, p=3, mass=0.5, seed=6)
        _, f = gaussian_pair_energy_forces(cfg)
        np.testing.assert_allclose(f.sum(axis=0), 0.0, atol=1e-12)

    def test_translation_invariance_in_box(self):
        cfg = _pair_config(PeriodicBox(3.0), n=3, p=4, mass=0.5, seed=7)
        e0, _ = gaussian_pair_energy_forces(cfg)
        cfg.positions += np.array([11.3, -4.7])
        e1, _ = gaussian_pair_energy_forces(cfg)
        assert e1 == pytest.approx(e0, rel=1e-12)

    def test_rejects_missing_interaction(self):
        spec = SystemSpec(2, 4, 2, 1.0, HarmonicTrap())
        cfg = build_system(spec, seed=0)
        with pytest.raises(ValueError):
            gaussian_pair_energy_forces(cfg)
