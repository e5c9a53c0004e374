"""External trap, Gaussian pair interaction, periodic minimum image.

Interaction energies are the plain slice sums U = sum_slices V(beads at
that slice); the MD forces are -(1/P) grad U, matching the sampled weight
exp(-beta(V_spring + U/P)).  Ring-polymer springs never use minimum image:
positions stay unwrapped and only pair displacements are wrapped.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .model import BeadConfiguration, HarmonicTrap, PeriodicBox, Gaussian


def minimum_image(delta, side: float):
    """Map displacement components into [-side/2, side/2)."""
    delta = np.asarray(delta)
    return delta - side * np.floor(delta / side + 0.5)


def trap_energy_forces(config: BeadConfiguration):
    """Harmonic one-body term over every stored bead (including x and y)."""
    geo = config.spec.geometry
    if not isinstance(geo, HarmonicTrap):
        raise ValueError("trap_energy_forces requires HarmonicTrap geometry")
    k = config.spec.mass * geo.omega**2
    pos = config.positions
    energy = 0.5 * k * float(np.sum(pos * pos))
    forces = (-k / config.spec.n_beads) * pos
    return energy, forces


@njit(cache=True)
def _pair_kernel(pos, members, x_flat, x_slice, pref, inv_s2, side, periodic):
    """Slice-by-slice Gaussian pair sum; returns (U, raw grad U)."""
    P, N = members.shape
    d = pos.shape[1]
    energy = 0.0
    grad = np.zeros_like(pos)
    delta = np.zeros(d)
    for s in range(P):
        for i in range(N):
            bi = members[s, i]
            if bi < 0:
                continue
            # partners: later particles at this slice, plus x at its slice
            # (x never pairs with its own particle's ring bead).
            for jj in range(i + 1, N + 1):
                if jj < N:
                    bj = members[s, jj]
                    if bj < 0:
                        continue
                elif s == x_slice - 1 and i < N - 1 and x_flat >= 0:
                    bj = x_flat
                else:
                    continue
                r2 = 0.0
                for c in range(d):
                    dx = pos[bi, c] - pos[bj, c]
                    if periodic:
                        dx -= side * np.floor(dx / side + 0.5)
                    delta[c] = dx
                    r2 += dx * dx
                e = pref * np.exp(-r2 * inv_s2)
                energy += e
                for c in range(d):
                    g = -2.0 * inv_s2 * e * delta[c]
                    grad[bi, c] += g
                    grad[bj, c] -= g
    return energy, grad


def gaussian_pair_energy_forces(config: BeadConfiguration):
    """U = sum_slices sum_{pairs} (g/pi s^2) exp(-dr^2/s^2), forces -(1/P) grad U."""
    spec = config.spec
    if not isinstance(spec.interaction, Gaussian):
        raise ValueError("gaussian_pair_energy_forces requires a Gaussian interaction")
    if spec.interaction.g == 0.0:
        return 0.0, np.zeros_like(config.positions)
    layout = config.layout
    periodic = isinstance(spec.geometry, PeriodicBox)
    side = spec.geometry.side if periodic else 1.0
    pref = spec.interaction.g / (np.pi * spec.interaction.s**2)
    inv_s2 = 1.0 / spec.interaction.s**2
    energy, grad = _pair_kernel(
        np.ascontiguousarray(config.positions),
        layout.slice_members,
        layout.x_flat,
        layout.x_slice,
        pref,
        inv_s2,
        side,
        periodic,
    )
    return float(energy), grad / (-spec.n_beads)
