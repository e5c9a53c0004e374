"""System specification, bead layout, and slice bookkeeping."""

import numpy as np
import pytest

from bosemd.model import (
    BeadLayout,
    Gaussian,
    HarmonicTrap,
    PeriodicBox,
    SliceIndex,
    SystemSpec,
    WormSpec,
    build_system,
    default_tau2_slice,
)


def closed_spec(n=3, p=4, dim=2, beta=1.0):
    return SystemSpec(n_particles=n, n_beads=p, dim=dim, beta=beta, geometry=HarmonicTrap())


def worm_spec(n=3, p=6, j=2, l=1, dim=2, beta=1.0, **kw):
    return SystemSpec(
        n_particles=n, n_beads=p, dim=dim, beta=beta, geometry=HarmonicTrap(),
        worm=WormSpec(j_gap=j, tau2_slice=l), **kw,
    )


class TestSystemSpec:
    def test_derived_scales(self):
        spec = closed_spec(p=9, beta=3.0)
        assert spec.omega_p == pytest.approx(np.sqrt(9.0) / 3.0)
        assert spec.delta_beta == pytest.approx(3.0 / 9)
        assert spec.spring_k == pytest.approx(spec.mass * spec.omega_p**2)

    def test_validation(self):
        with pytest.raises(ValueError):
            SystemSpec(0, 4, 2, 1.0, HarmonicTrap())
        with pytest.raises(ValueError):
            SystemSpec(1, 0, 2, 1.0, HarmonicTrap())
        with pytest.raises(ValueError):
            SystemSpec(1, 4, 4, 1.0, HarmonicTrap())
        with pytest.raises(ValueError):
            SystemSpec(1, 4, 2, -1.0, HarmonicTrap())

    def test_worm_gap_range(self):
        for j in (1, 5):
            SystemSpec(2, 6, 2, 1.0, HarmonicTrap(), worm=WormSpec(j, 0))
        for j in (0, 6, 7):
            with pytest.raises(ValueError):
                SystemSpec(2, 6, 2, 1.0, HarmonicTrap(), worm=WormSpec(j, 0))

    def test_tau2_slice_range(self):
        SystemSpec(2, 6, 2, 1.0, HarmonicTrap(), worm=WormSpec(2, 4))
        with pytest.raises(ValueError):
            SystemSpec(2, 6, 2, 1.0, HarmonicTrap(), worm=WormSpec(2, 5))
        with pytest.raises(ValueError):
            SystemSpec(2, 6, 2, 1.0, HarmonicTrap(), worm=WormSpec(2, -1))

    def test_serialization_round_trip(self):
        specs = [
            closed_spec(),
            worm_spec(interaction=Gaussian(g=3.0, s=0.5)),
            SystemSpec(2, 8, 3, 2.0, PeriodicBox(side=3.0), mass=0.5),
        ]
        for spec in specs:
            again = SystemSpec.from_dict(spec.to_dict())
            assert again == spec

    def test_default_tau2_slice_in_range(self):
        for p in range(2, 20):
            for j in range(1, p):
                l = default_tau2_slice(p, j)
                assert 0 <= l <= p - j
                SystemSpec(2, p, 2, 1.0, HarmonicTrap(), worm=WormSpec(j, l))


class TestSliceIndex:
    def test_closed_identity(self):
        idx = SliceIndex(closed_spec(p=5))
        assert list(idx.worm_slices) == [1, 2, 3, 4, 5]
        assert idx.y_storage == -1 and idx.x_storage == -1
        assert idx.gap_slices.size == 0

    def test_worm_endpoint_slices(self):
        # storage (r^1..r^l, y, x, r^{l+1}..r^{P-J}); y sits at slice l+1,
        # x at slice l+1+J
        idx = SliceIndex(worm_spec(p=6, j=2, l=1))
        worm = idx.worm_slices
        assert worm[0] == 1          # r^1
        assert worm[idx.y_storage] == 2   # y at slice l+1
        assert worm[idx.x_storage] == 4   # x at slice l+1+J
        assert list(worm[3:]) == [4, 5, 6]

    def test_worm_slice_bijection_exhaustive(self):
        # ring beads (everything except y and x) biject onto [1,P] minus the
        # J gap slices l+1..l+J; y is pinned inside the gap at l+1 and x
        # wraps cyclically to (l+J) mod P + 1.
        for p in range(2, 17):
            for j in range(1, p):
                for l in range(0, p - j + 1):
                    spec = SystemSpec(2, p, 2, 1.0, HarmonicTrap(), worm=WormSpec(j, l))
                    idx = SliceIndex(spec)
                    worm = idx.worm_slices
                    assert worm.shape[0] == p - j + 2
                    y_slice = worm[idx.y_storage]
                    x_slice = worm[idx.x_storage]
                    assert y_slice == l + 1
                    assert x_slice == (l + j) % p + 1
                    ring = np.delete(worm, [idx.y_storage, idx.x_storage])
                    gap = set(range(l + 1, l + j + 1))
                    survivors = set(range(1, p + 1)) - gap
                    assert sorted(ring.tolist()) == sorted(survivors)
                    assert y_slice in gap
                    assert sorted(idx.gap_slices.tolist()) == sorted(gap)

    def test_gap_slices_match(self):
        idx = SliceIndex(worm_spec(p=8, j=3, l=2))
        assert sorted(idx.gap_slices.tolist()) == [3, 4, 5]


class TestBeadLayout:
    def test_closed_counts(self):
        layout = BeadLayout.from_spec(closed_spec(n=3, p=4))
        assert list(layout.counts) == [4, 4, 4]
        assert layout.n_total == 12
        assert list(layout.offsets) == [0, 4, 8, 12]
        assert all(layout.spring_break[i] == -1 for i in range(3))

    def test_worm_counts_and_break(self):
        spec = worm_spec(n=3, p=6, j=2, l=1)
        layout = BeadLayout.from_spec(spec)
        assert list(layout.counts) == [6, 6, 6 - 2 + 2]
        assert layout.spring_break[2] == 1  # no spring between y (index l) and x
        assert layout.x_flat == layout.offsets[2] + 2
        assert layout.y_flat == layout.offsets[2] + 1

    def test_slice_members_closed(self):
        spec = closed_spec(n=2, p=3)
        layout = BeadLayout.from_spec(spec)
        assert layout.slice_members.shape == (3, 2)
        for s in range(3):
            for i in range(2):
                assert layout.slice_members[s, i] == layout.offsets[i] + s

    def test_slice_members_worm_gap_is_masked(self):
        spec = worm_spec(n=2, p=6, j=3, l=1)
        layout = BeadLayout.from_spec(spec)
        # gap slices 3,4 (1-based 3..4 interior beyond y) have no worm member
        worm_col = layout.slice_members[:, 1]
        missing = [s + 1 for s in range(6) if worm_col[s] < 0]
        # slices l+2..l+J = 3,4 missing entirely; x slice has the x bead
        # tracked separately via x_flat/x_slice
        assert missing == [3, 4]
        assert layout.x_slice == (1 + 3) % 6 + 1

    def test_bead_accessor_matches_flat(self):
        spec = worm_spec(n=3, p=5, j=2, l=3)
        layout = BeadLayout.from_spec(spec)
        rng = np.random.default_rng(0)
        pos = rng.normal(size=(layout.n_total, spec.dim))
        for part in range(3):
            rows = layout.particle_rows(part)
            np.testing.assert_array_equal(
                pos[rows], pos[layout.offsets[part]:layout.offsets[part] + layout.counts[part]]
            )


class TestBuildSystem:
    def test_shapes_and_determinism(self):
        spec = closed_spec(n=3, p=5, dim=3)
        a = build_system(spec, seed=9)
        b = build_system(spec, seed=9)
        c = build_system(spec, seed=10)
        assert a.positions.shape == (15, 3)
        assert a.velocities.shape == (15, 3)
        assert a.therm_eta.shape == (45, 4)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.velocities, b.velocities)
        assert not np.array_equal(a.positions, c.positions)

    def test_box_start_inside(self):
        spec = SystemSpec(4, 6, 2, 1.0, PeriodicBox(side=2.5), mass=0.5)
        cfg = build_system(spec, seed=3)
        centers = np.array([cfg.positions[cfg.layout.offsets[i]] for i in range(4)])
        assert (centers >= -0.011).all() and (centers < 2.5 + 0.011).all()

    def test_velocity_scale(self):
        spec = SystemSpec(8, 16, 3, 0.5, HarmonicTrap())
        cfg = build_system(spec, seed=1)
        target = 1.0 / (spec.beta * spec.mass)
        assert np.mean(cfg.velocities**2) == pytest.approx(target, rel=0.1)

    def test_copy_is_deep(self):
        cfg = build_system(closed_spec(), seed=0)
        dup = cfg.copy()
        dup.positions += 1.0
        assert not np.allclose(cfg.positions, dup.positions)
