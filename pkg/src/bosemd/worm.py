"""Green's-function (gapped ring) topology for the last particle.

With the worm active, particle N stores (r^1..r^l, y, x, r^{l+1}..r^{P-J}).
The spring chain runs r^1 -> .. -> r^l -> y, then restarts at x -> r^{l+1}
-> .. -> r^{P-J}; there is no x--y spring.  The closure of an E_N^(k) ring
connects r^{P-J} back to the first particle of the ring, exactly as in the
closed case, so the exchange recursion applies unchanged once the chain is
laid out this way.  V_G uses the same log-domain recursion with the
modified E_N^(k); only k = N..1 rings that contain particle N differ.

The gap ends are ordinary degrees of freedom: their positions sample
G(x', tau_1; y', tau_2) = <delta(x - x') delta(y - y')>.
"""

from __future__ import annotations

import numpy as np

from .model import BeadConfiguration
from .exchange import ExchangeResult, _evaluate, ring_segment_energy
from .potentials import gaussian_pair_energy_forces


def _require_worm(config: BeadConfiguration):
    if config.spec.worm is None:
        raise ValueError("worm topology not active on this configuration")


def worm_spring_energy(config: BeadConfiguration, alpha: int, k: int) -> float:
    """E_alpha^(k) with the gapped chain for particle N (no x--y term)."""
    _require_worm(config)
    N = config.spec.n_particles
    if not (1 <= k <= alpha <= N):
        raise IndexError(f"need 1 <= k <= alpha <= N, got alpha={alpha}, k={k}")
    return ring_segment_energy(config, alpha - k, alpha - 1)


def worm_potential_and_forces(config: BeadConfiguration) -> ExchangeResult:
    """V_G^(0..N), forces on all beads including x and y, beta term."""
    _require_worm(config)
    return _evaluate(config)


def worm_interaction(config: BeadConfiguration):
    """Slice-wise interaction U_G and MD forces -(1/P) grad U_G.

    Gap slices sum over the N-1 closed particles only; y participates at
    slice l+1 and x at slice l+1+J (where it does not interact with its own
    particle's ring bead at the shared slice).  Returns (0, zeros) when no
    interaction is configured.
    """
    _require_worm(config)
    if config.spec.interaction is None:
        return 0.0, np.zeros_like(config.positions)
    return gaussian_pair_energy_forces(config)
