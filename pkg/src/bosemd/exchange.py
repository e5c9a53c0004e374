"""Bosonic exchange potential: V_B^(N), gradients, and the beta-derivative.

The recursion

    exp(-beta V^(alpha)) = (1/alpha) sum_{k=1}^alpha exp(-beta (E_alpha^(k) + V^(alpha-k)))

is evaluated in log domain: v[alpha] = -(logsumexp_k(-beta(E+v[alpha-k])) -
ln alpha)/beta, with softmax weights from shifted exponents.  beta*E easily
exceeds 1e3 at low temperature, so the naive exponential form underflows.

E_alpha^(k) is the spring energy of the ring formed by the last k particles
of the first alpha: each particle's internal chain, links from bead P of one
particle to bead 1 of the next, and the closure from bead P of particle
alpha back to bead 1 of particle alpha-k+1.  The E table is built once per
call in O(N^2) after O(NP) partial sums; gradient assembly reuses it, which
keeps the overall O(PN^3) cost.

The same kernel serves the gapped (worm) topology: there the last particle's
storage chain is (r^1..r^l, y, x, r^{l+1}..r^{P-J}) with the y--x spring
masked out, which is exactly what the layout's spring_break encodes.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from numba import njit

from .model import BeadConfiguration


@dataclass
class ExchangeResult:
    """Values, forces and diagnostics from one recursion evaluation.

    v_values[alpha] is V^(alpha) for alpha = 0..N (v_values[0] = 0); grad is
    -grad V^(N) per bead (None when only values were requested); beta_term
    is V^(N) + beta dV^(N)/dbeta at fixed coordinates; log_weights[alpha-1]
    holds the log softmax weights of the alpha-level terms.
    """

    v_values: np.ndarray
    grad: np.ndarray | None
    beta_term: float
    log_weights: list

    @property
    def weights(self) -> list:
        return [np.exp(lw) for lw in self.log_weights]


@njit(cache=True)
def _vb_core(pos, offs, brk, k_spring, beta):
    """Value, weight, beta-derivative and gradient recursion in one pass.

    Gradients are accumulated as raw position differences and scaled by
    k_spring once at the end.  Returns (v, logw, dterm, grad) where logw is
    an (N, N) table of log softmax weights padded with -inf.
    """
    N = offs.shape[0] - 1
    B, d = pos.shape

    # Per-particle internal chain energies and their gradients.
    intra = np.zeros(N)
    g_intra = np.zeros((B, d))
    for i in range(N):
        o0, o1 = offs[i], offs[i + 1]
        for j in range(o0, o1 - 1):
            if j - o0 == brk[i]:
                continue
            acc = 0.0
            for c in range(d):
                dx = pos[j + 1, c] - pos[j, c]
                acc += dx * dx
                g_intra[j, c] -= dx
                g_intra[j + 1, c] += dx
            intra[i] += acc

    # link[i]: last bead of particle i -> first bead of particle i+1.
    link = np.zeros(N)
    for i in range(N - 1):
        t, h = offs[i + 1] - 1, offs[i + 1]
        acc = 0.0
        for c in range(d):
            dx = pos[h, c] - pos[t, c]
            acc += dx * dx
        link[i] = acc

    # close[a, b]: first bead of particle a -> last bead of particle b.
    close = np.zeros((N, N))
    for a in range(N):
        ha = offs[a]
        for b in range(a, N):
            tb = offs[b + 1] - 1
            acc = 0.0
            for c in range(d):
                dx = pos[ha, c] - pos[tb, c]
                acc += dx * dx
            close[a, b] = acc

    # E[c, k-1]: ring energy of particles (c-k+1 .. c), 0-based c.
    E = np.zeros((N, N))
    for cix in range(N):
        acc = 0.0
        for k in range(1, cix + 2):
            a = cix - k + 1
            acc += intra[a]
            if k > 1:
                acc += link[a]
            E[cix, k - 1] = 0.5 * k_spring * (acc + close[a, cix])

    # Log-domain value recursion, normalized weights, beta-derivative term.
    v = np.zeros(N + 1)
    dterm = np.zeros(N + 1)
    logw = np.full((N, N), -np.inf)
    for alpha in range(1, N + 1):
        mx = -np.inf
        for k in range(1, alpha + 1):
            t = -beta * (E[alpha - 1, k - 1] + v[alpha - k])
            logw[alpha - 1, k - 1] = t
            if t > mx:
                mx = t
        ssum = 0.0
        for k in range(1, alpha + 1):
            ssum += np.exp(logw[alpha - 1, k - 1] - mx)
        lse = mx + np.log(ssum)
        v[alpha] = -(lse - np.log(alpha)) / beta
        dacc = 0.0
        for k in range(1, alpha + 1):
            logw[alpha - 1, k - 1] -= lse
            dacc += np.exp(logw[alpha - 1, k - 1]) * (
                dterm[alpha - k] - E[alpha - 1, k - 1]
            )
        dterm[alpha] = dacc

    # Gradient recursion G[alpha] = sum_k w_k (grad E_alpha^(k) + G[alpha-k]);
    # grad E touches only the ring particles (zero outside [alpha-k+1, alpha]).
    G = np.zeros((N + 1, B, d))
    for alpha in range(1, N + 1):
        for k in range(1, alpha + 1):
            a = alpha - k
            w = np.exp(logw[alpha - 1, k - 1])
            if w == 0.0:
                continue
            oa, oc = offs[a], offs[alpha]
            if a > 0:
                G[alpha, :oa] += w * G[alpha - k, :oa]
            G[alpha, oa:oc] += w * g_intra[oa:oc]
            for i in range(a, alpha - 1):
                t, h = offs[i + 1] - 1, offs[i + 1]
                for c in range(d):
                    dx = pos[t, c] - pos[h, c]
                    G[alpha, t, c] += w * dx
                    G[alpha, h, c] -= w * dx
            t, h = oc - 1, oa
            for c in range(d):
                dx = pos[t, c] - pos[h, c]
                G[alpha, t, c] += w * dx
                G[alpha, h, c] -= w * dx

    grad = k_spring * G[N]
    return v, logw, dterm[N], grad


def _evaluate(config: BeadConfiguration) -> ExchangeResult:
    """Run the recursion on a configuration of either topology."""
    spec, layout = config.spec, config.layout
    pos = np.ascontiguousarray(config.positions)
    v, logw, dterm, grad = _vb_core(
        pos, layout.offsets, layout.spring_break, spec.spring_k, spec.beta
    )
    log_weights = [logw[a - 1, :a].copy() for a in range(1, spec.n_particles + 1)]
    return ExchangeResult(
        v_values=v, grad=-grad, beta_term=float(dterm), log_weights=log_weights
    )


def _require_closed(config: BeadConfiguration):
    if config.spec.worm is not None:
        raise ValueError("worm topology active; use the worm module instead")


def ring_segment_energy(config: BeadConfiguration, first: int, last: int) -> float:
    """Spring energy of the ring over particles first..last (0-based).

    Walks each particle's storage chain (skipping the masked worm pair if
    present), the inter-particle links, and the closure back to the first
    particle's first bead.
    """
    layout = config.layout
    pos = config.positions
    total = 0.0
    for i in range(first, last + 1):
        o0, o1 = int(layout.offsets[i]), int(layout.offsets[i + 1])
        for j in range(o0, o1 - 1):
            if j - o0 == layout.spring_break[i]:
                continue
            diff = pos[j + 1] - pos[j]
            total += float(diff @ diff)
        nxt = int(layout.offsets[first]) if i == last else o1
        diff = pos[nxt] - pos[o1 - 1]
        total += float(diff @ diff)
    return 0.5 * config.spec.spring_k * total


def spring_energy(config: BeadConfiguration, alpha: int, k: int) -> float:
    """E_alpha^(k): the last k of the first alpha particles fully connected."""
    _require_closed(config)
    N = config.spec.n_particles
    if not (1 <= k <= alpha <= N):
        raise IndexError(f"need 1 <= k <= alpha <= N, got alpha={alpha}, k={k}")
    return ring_segment_energy(config, alpha - k, alpha - 1)


def exchange_potential(config: BeadConfiguration) -> ExchangeResult:
    """V_B^(0..N) values only (grad left unset)."""
    _require_closed(config)
    res = _evaluate(config)
    res.grad = None
    return res


def exchange_forces(config: BeadConfiguration) -> ExchangeResult:
    """V_B values plus per-bead forces -grad V_B^(N)."""
    _require_closed(config)
    return _evaluate(config)


def beta_derivative_term(config: BeadConfiguration) -> float:
    """V_B^(N) + beta dV_B^(N)/dbeta at fixed coordinates (omega_P varies)."""
    _require_closed(config)
    return _evaluate(config).beta_term
