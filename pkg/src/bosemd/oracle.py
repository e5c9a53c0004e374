"""Independent reference implementations used only by tests.

The exchange recursion, unrolled, is a weighted sum over the 2^(N-1) ordered
compositions of N into contiguous blocks, each block a single fully
connected ring.  Unrolling one level picks the last block of size k with
factor 1/alpha, so a composition (k_1, ..., k_m) carries weight

    prod_i 1 / (k_1 + ... + k_i)

i.e. one over each block's last particle index.  Worked example, N = 3:

    (1,1,1) -> 1/(1*2*3) = 1/6      three separate rings
    (2,1)   -> 1/(2*3)   = 1/6      ring {1,2}, then ring {3}
    (1,2)   -> 1/(1*3)   = 1/3      ring {1}, then ring {2,3}
    (3)     -> 1/3                  one three-particle ring

The weights sum to 1 (convex combination), which gives the sandwich bounds
tested in the exchange module.  Note this expansion equals the recursion
pointwise but is NOT the full (1/N!) sum over all permutations for N >= 3;
the two agree only after configuration integration.
"""

from __future__ import annotations

from itertools import permutations
from math import factorial
import numpy as np


def _r(config, particle, j):
    """Bead j (0-based) of a particle, by direct storage lookup."""
    return config.positions[config.layout.offsets[particle] + j]


def _block_ring_energy(config, first, last, k_spring):
    """Spring energy of one fully connected block of particles first..last.

    Implements the double sum over l and j with the closure rules
    r_l^{P+1} = r_{l+1}^1 (l < last) and r_last^{P+1} = r_first^1, written
    as plain loops on purpose: this is the test oracle.
    """
    P = config.spec.n_beads
    total = 0.0
    for l in range(first, last + 1):
        for j in range(P):
            if j + 1 < P:
                nxt = _r(config, l, j + 1)
            elif l < last:
                nxt = _r(config, l + 1, 0)
            else:
                nxt = _r(config, first, 0)
            diff = nxt - _r(config, l, j)
            total += float(diff @ diff)
    return 0.5 * k_spring * total


def _compositions(n):
    """All ordered compositions of n as lists of block sizes."""
    if n == 1:
        return [[1]]
    out = []
    for first in range(1, n + 1):
        if first == n:
            out.append([n])
        else:
            out.extend([first] + rest for rest in _compositions(n - first))
    return out


def composition_expansion_VB(config, beta: float) -> float:
    """Brute-force V_B^(N) as the weighted sum over contiguous compositions."""
    spec = config.spec
    if spec.worm is not None:
        raise ValueError("composition oracle is defined for closed rings only")
    if spec.n_particles > 8 or spec.n_beads > 8:
        raise ValueError("oracle enumeration limited to N <= 8, P <= 8")
    k_spring = spec.spring_k
    log_terms = []
    for comp in _compositions(spec.n_particles):
        log_w = 0.0
        energy = 0.0
        first = 0
        for size in comp:
            last = first + size - 1
            log_w -= np.log(last + 1)  # 1-based index of the block's last particle
            energy += _block_ring_energy(config, first, last, k_spring)
            first = last + 1
        log_terms.append(log_w - beta * energy)
    log_terms = np.array(log_terms)
    m = log_terms.max()
    return float(-(m + np.log(np.exp(log_terms - m).sum())) / beta)


def permutation_sum_VB(config, beta: float) -> float:
    """-(1/beta) ln[(1/N!) sum_sigma exp(-beta E_sigma)].

    E_sigma closes bead P of particle l onto bead 1 of particle sigma(l).
    Coincides with the composition expansion pointwise only for N <= 2.
    """
    spec = config.spec
    if spec.worm is not None:
        raise ValueError("permutation oracle is defined for closed rings only")
    N, P = spec.n_particles, spec.n_beads
    if N > 5:
        raise ValueError("permutation sum limited to N <= 5")
    k_spring = spec.spring_k

    internal = 0.0
    for l in range(N):
        for j in range(P - 1):
            diff = _r(config, l, j + 1) - _r(config, l, j)
            internal += float(diff @ diff)

    log_terms = []
    for sigma in permutations(range(N)):
        closures = 0.0
        for l in range(N):
            diff = _r(config, sigma[l], 0) - _r(config, l, P - 1)
            closures += float(diff @ diff)
        e_sigma = 0.5 * k_spring * (internal + closures)
        log_terms.append(-beta * e_sigma)
    log_terms = np.array(log_terms)
    m = log_terms.max()
    lse = m + np.log(np.exp(log_terms - m).sum())
    return float(-(lse - np.log(factorial(N))) / beta)


def ideal_bose_energy(n_particles: int, beta_tilde: float, dim: int) -> float:
    """Exact canonical energy of N ideal bosons in an isotropic trap (units hbar*omega).

    Uses the standard canonical recursion Z_N = (1/N) sum_k Z_1(k b) Z_{N-k}
    with Z_1(b) = (e^{-b/2}/(1-e^{-b}))^d, differentiated analytically.
    """
    b = float(beta_tilde)
    d = int(dim)

    def z1(bb):
        return (np.exp(-bb / 2) / (1.0 - np.exp(-bb))) ** d

    def dz1(bb):
        # d/d(bb) of z1: z1 * d * (-1/2 - 1/(e^bb - 1))
        return z1(bb) * d * (-0.5 - 1.0 / np.expm1(bb))

    N = int(n_particles)
    Z = np.zeros(N + 1)
    dZ = np.zeros(N + 1)
    Z[0], dZ[0] = 1.0, 0.0
    for n in range(1, N + 1):
        acc, dacc = 0.0, 0.0
        for k in range(1, n + 1):
            acc += z1(k * b) * Z[n - k]
            dacc += k * dz1(k * b) * Z[n - k] + z1(k * b) * dZ[n - k]
        Z[n] = acc / n
        dZ[n] = dacc / n
    return float(-dZ[N] / Z[N])
