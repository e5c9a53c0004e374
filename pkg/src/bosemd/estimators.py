"""Measurements: energy, density, pair correlation, Green's function, momentum.

Closed-ensemble estimators (energy, density, pair correlation) sample the
V_B distribution; the Green's function samples the gapped-topology
distribution through the positions of the gap ends x and y.  Histograms
store raw deposited mass; normalization happens in the profile methods so
that merging accumulators commutes with normalizing.

The worm sampler determines G only up to the constant Z_G/Z, so radial
profiles are unit-mass normalized and all comparisons are shape-based.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from numba import njit

from .model import BeadConfiguration, HarmonicTrap, PeriodicBox, SystemSpec
from .exchange import beta_derivative_term
from .potentials import trap_energy_forces, gaussian_pair_energy_forces, minimum_image


class InsufficientStatistics(ValueError):
    """A fit window contains empty or nonpositive bins."""


_SHELL_COEFF = {1: 2.0, 2: np.pi, 3: 4.0 * np.pi / 3.0}


def shell_measures(edges: np.ndarray, dim: int) -> np.ndarray:
    """d-dimensional volume of each radial bin [r_i, r_{i+1})."""
    c = _SHELL_COEFF[dim]
    return c * (edges[1:] ** dim - edges[:-1] ** dim)


@dataclass
class RadialProfile:
    """Radial histogram normalized to density per shell volume."""

    edges: np.ndarray
    values: np.ndarray
    counts: np.ndarray
    samples: int
    dim: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])


@dataclass
class EstimatorConfig:
    """Which estimators run and how their histograms are binned.

    None means "resolve from the system": greens bins default to width L/60
    (box) or 0.05 sqrt(hbar/m omega) (trap); ranges cover every reachable
    separation in a box and a generous trap window otherwise.
    """

    energy: bool = True
    density: bool = True
    pair_corr: bool = False
    greens: bool = False
    density_bins: int = 60
    density_extent: float | None = None
    pair_bins: int = 80
    pair_rmax: float | None = None
    greens_bin_width: float | None = None
    greens_rmax: float | None = None
    batch_size: int = 1000

    @classmethod
    def for_spec(cls, spec: SystemSpec, **overrides) -> "EstimatorConfig":
        worm = spec.worm is not None
        base = dict(
            energy=not worm,
            density=not worm,
            pair_corr=False,
            greens=worm,
        )
        base.update(overrides)
        return cls(**base)


def _resolve_bins(spec: SystemSpec, cfg: EstimatorConfig):
    box = isinstance(spec.geometry, PeriodicBox)
    if box:
        L = spec.geometry.side
        reach = L / np.sqrt(2.0) if spec.dim > 1 else L / 2.0
        width = cfg.greens_bin_width or L / 60.0
        extent = cfg.density_extent or L
        pair_rmax = cfg.pair_rmax or reach * 1.000001
    else:
        unit = np.sqrt(spec.hbar / (spec.mass * spec.geometry.omega))
        width = cfg.greens_bin_width or 0.05 * unit
        extent = cfg.density_extent or 5.0 * unit
        reach = cfg.greens_rmax or 4.0 * unit
        pair_rmax = cfg.pair_rmax or 2.0 * extent
    greens_rmax = cfg.greens_rmax or reach
    n_greens = max(int(np.ceil(greens_rmax / width)), 2)
    greens_edges = np.arange(n_greens + 1) * width
    pair_edges = np.linspace(0.0, pair_rmax, cfg.pair_bins + 1)
    if box:
        axis = np.linspace(0.0, spec.geometry.side, cfg.density_bins + 1)
    else:
        axis = np.linspace(-extent, extent, cfg.density_bins + 1)
    density_edges = [axis.copy() for _ in range(spec.dim)]
    return density_edges, pair_edges, greens_edges


class EstimatorAccumulators:
    """Single-writer histogram and scalar accumulators for one trajectory.

    `samples` counts sampling events and is bumped once per event via
    begin_sample(); the individual deposit ops never touch it.  Energy
    standard errors come from means of consecutive equal-size batches
    (autocorrelation-safe when batch_size spans many correlation times);
    a trailing partial batch contributes to the mean but not the stderr.
    """

    def __init__(self, spec: SystemSpec, cfg: EstimatorConfig):
        self.cfg = cfg
        self.dim = spec.dim
        self.samples = 0
        self.energy_sum = 0.0
        self.energy_sq_sum = 0.0
        self.energy_count = 0
        self.batch_size = cfg.batch_size
        self._batch_means: list[float] = []
        self._partial_sum = 0.0
        self._partial_n = 0
        density_edges, pair_edges, greens_edges = _resolve_bins(spec, cfg)
        self.density_edges = density_edges
        self.density_counts = np.zeros([len(e) - 1 for e in density_edges])
        self.density_overflow = 0.0
        self.pair_edges = pair_edges
        self.pair_counts = np.zeros(len(pair_edges) - 1)
        self.pair_overflow = 0.0
        self.greens_edges = greens_edges
        self.greens_counts = np.zeros(len(greens_edges) - 1)
        self.greens_overflow = 0.0

    # ------------------------------------------------------------- deposits
    def begin_sample(self):
        self.samples += 1

    def add_energy(self, value: float):
        self.energy_sum += value
        self.energy_sq_sum += value * value
        self.energy_count += 1
        self._partial_sum += value
        self._partial_n += 1
        if self._partial_n == self.batch_size:
            self._batch_means.append(self._partial_sum / self._partial_n)
            self._partial_sum = 0.0
            self._partial_n = 0

    # -------------------------------------------------------------- results
    def energy_result(self):
        """(mean, stderr from batch means, n_samples)."""
        if self.energy_count == 0:
            return np.nan, 0.0, 0
        mean = self.energy_sum / self.energy_count
        if len(self._batch_means) >= 2:
            bm = np.array(self._batch_means)
            stderr = float(bm.std(ddof=1) / np.sqrt(len(bm)))
        else:
            stderr = 0.0
        return mean, stderr, self.energy_count

    def density_result(self):
        """(edges, density values integrating to N, overflow mass)."""
        widths = [np.diff(e) for e in self.density_edges]
        cell = widths[0]
        for w in widths[1:]:
            cell = np.multiply.outer(cell, w)
        n = max(self.samples, 1)
        return self.density_edges, self.density_counts / (n * cell), self.density_overflow

    def greens_profile(self) -> RadialProfile:
        n = max(self.samples, 1)
        meas = shell_measures(self.greens_edges, self.dim)
        return RadialProfile(
            edges=self.greens_edges,
            values=self.greens_counts / (n * meas),
            counts=self.greens_counts.copy(),
            samples=self.samples,
            dim=self.dim,
        )

    def pair_profile(self) -> RadialProfile:
        n = max(self.samples, 1)
        meas = shell_measures(self.pair_edges, self.dim)
        return RadialProfile(
            edges=self.pair_edges,
            values=self.pair_counts / (n * meas),
            counts=self.pair_counts.copy(),
            samples=self.samples,
            dim=self.dim,
        )

    # ---------------------------------------------------------------- merge
    def merge(self, other: "EstimatorAccumulators") -> "EstimatorAccumulators":
        for mine, theirs in zip(self.density_edges, other.density_edges):
            if not np.array_equal(mine, theirs):
                raise ValueError("cannot merge accumulators with different bins")
        if not np.array_equal(self.greens_edges, other.greens_edges) or not np.array_equal(
            self.pair_edges, other.pair_edges
        ):
            raise ValueError("cannot merge accumulators with different bins")
        out = object.__new__(EstimatorAccumulators)
        out.cfg = self.cfg
        out.dim = self.dim
        out.samples = self.samples + other.samples
        out.energy_sum = self.energy_sum + other.energy_sum
        out.energy_sq_sum = self.energy_sq_sum + other.energy_sq_sum
        out.energy_count = self.energy_count + other.energy_count
        out.batch_size = self.batch_size
        out._batch_means = list(self._batch_means) + list(other._batch_means)
        for part_sum, part_n in ((self._partial_sum, self._partial_n),
                                 (other._partial_sum, other._partial_n)):
            if part_n:
                out._batch_means.append(part_sum / part_n)
        out._partial_sum = 0.0
        out._partial_n = 0
        out.density_edges = self.density_edges
        out.density_counts = self.density_counts + other.density_counts
        out.density_overflow = self.density_overflow + other.density_overflow
        out.pair_edges = self.pair_edges
        out.pair_counts = self.pair_counts + other.pair_counts
        out.pair_overflow = self.pair_overflow + other.pair_overflow
        out.greens_edges = self.greens_edges
        out.greens_counts = self.greens_counts + other.greens_counts
        out.greens_overflow = self.greens_overflow + other.greens_overflow
        return out

    # ---------------------------------------------------------- persistence
    def state_dict(self) -> dict:
        return {
            "samples": np.int64(self.samples),
            "energy_sum": np.float64(self.energy_sum),
            "energy_sq_sum": np.float64(self.energy_sq_sum),
            "energy_count": np.int64(self.energy_count),
            "batch_means": np.array(self._batch_means, dtype=np.float64),
            "partial_sum": np.float64(self._partial_sum),
            "partial_n": np.int64(self._partial_n),
            "density_counts": self.density_counts.copy(),
            "density_overflow": np.float64(self.density_overflow),
            "pair_counts": self.pair_counts.copy(),
            "pair_overflow": np.float64(self.pair_overflow),
            "greens_counts": self.greens_counts.copy(),
            "greens_overflow": np.float64(self.greens_overflow),
        }

    def load_state(self, state: dict):
        self.samples = int(state["samples"])
        self.energy_sum = float(state["energy_sum"])
        self.energy_sq_sum = float(state["energy_sq_sum"])
        self.energy_count = int(state["energy_count"])
        self._batch_means = list(np.asarray(state["batch_means"], dtype=np.float64))
        self._partial_sum = float(state["partial_sum"])
        self._partial_n = int(state["partial_n"])
        self.density_counts[:] = state["density_counts"]
        self.density_overflow = float(state["density_overflow"])
        self.pair_counts[:] = state["pair_counts"]
        self.pair_overflow = float(state["pair_overflow"])
        self.greens_counts[:] = state["greens_counts"]
        self.greens_overflow = float(state["greens_overflow"])


def make_accumulators(spec: SystemSpec, cfg: EstimatorConfig | None = None) -> EstimatorAccumulators:
    return EstimatorAccumulators(spec, cfg or EstimatorConfig.for_spec(spec))


# ------------------------------------------------------------- sample ops


def _require_closed(config):
    if config.spec.worm is not None:
        raise ValueError("closed-ensemble estimator called on a worm configuration")


def energy_sample(config: BeadConfiguration) -> float:
    """PdN/(2 beta) + U/P + (V_B + beta dV_B/dbeta) for the current state."""
    _require_closed(config)
    spec = config.spec
    u = 0.0
    if isinstance(spec.geometry, HarmonicTrap):
        u += trap_energy_forces(config)[0]
    if spec.interaction is not None and spec.interaction.g != 0.0:
        u += gaussian_pair_energy_forces(config)[0]
    kinetic = spec.n_beads * spec.dim * spec.n_particles / (2.0 * spec.beta)
    return kinetic + u / spec.n_beads + beta_derivative_term(config)


def density_sample(config: BeadConfiguration, acc: EstimatorAccumulators):
    """Deposit all N*P beads with weight 1/P onto the d-dim grid."""
    _require_closed(config)
    spec = config.spec
    pos = config.positions
    if isinstance(spec.geometry, PeriodicBox):
        L = spec.geometry.side
        pos = pos - L * np.floor(pos / L)
    hist, _ = np.histogramdd(pos, bins=acc.density_edges)
    acc.density_counts += hist / spec.n_beads
    acc.density_overflow += (pos.shape[0] - hist.sum()) / spec.n_beads


@njit(cache=True)
def _pair_hist_kernel(pos, inv_dr, nbins, side, periodic):
    B, d = pos.shape
    counts = np.zeros(nbins, dtype=np.float64)
    overflow = 0.0
    for a in range(B):
        for b in range(a + 1, B):
            r2 = 0.0
            for c in range(d):
                dx = pos[a, c] - pos[b, c]
                if periodic:
                    dx -= side * np.floor(dx / side + 0.5)
                r2 += dx * dx
            ib = int(np.sqrt(r2) * inv_dr)
            if ib < nbins:
                counts[ib] += 2.0  # both ordered pairs
            else:
                overflow += 2.0
    counts[0] += B  # self pairs at zero separation
    return counts, overflow


def pair_correlation_sample(config: BeadConfiguration, acc: EstimatorAccumulators):
    """All (NP)^2 ordered bead pairs, weight 1/P^2; radial histogram.

    Includes the self pairs demanded by the double-delta estimator, so one
    sample deposits exactly N^2 of mass (counting identity).
    """
    _require_closed(config)
    spec = config.spec
    periodic = isinstance(spec.geometry, PeriodicBox)
    side = spec.geometry.side if periodic else 1.0
    dr = acc.pair_edges[1] - acc.pair_edges[0]
    counts, overflow = _pair_hist_kernel(
        np.ascontiguousarray(config.positions),
        1.0 / dr,
        len(acc.pair_counts),
        side,
        periodic,
    )
    w = 1.0 / spec.n_beads**2
    acc.pair_counts += counts * w
    acc.pair_overflow += overflow * w


def _deposit_radial(acc, r, weight):
    dr = acc.greens_edges[1] - acc.greens_edges[0]
    ib = int(r / dr)
    if ib < len(acc.greens_counts):
        acc.greens_counts[ib] += weight
    else:
        acc.greens_overflow += weight


def greens_sample(config: BeadConfiguration, acc: EstimatorAccumulators):
    """One unit of mass per sample from the gap-end coordinates.

    Box: the minimum-image separation |x - y| (the profile G(r) is
    translation invariant).  Trap: G(0, r) decays with the distance of each
    gap end from the trap center, so |x| and |y| each take half the mass.
    """
    spec = config.spec
    if spec.worm is None:
        raise ValueError("greens_sample requires an active worm")
    pos = config.positions
    x = pos[config.layout.x_flat]
    y = pos[config.layout.y_flat]
    if isinstance(spec.geometry, PeriodicBox):
        delta = minimum_image(x - y, spec.geometry.side)
        _deposit_radial(acc, float(np.sqrt(delta @ delta)), 1.0)
    else:
        _deposit_radial(acc, float(np.sqrt(x @ x)), 0.5)
        _deposit_radial(acc, float(np.sqrt(y @ y)), 0.5)


# ------------------------------------------------------- post-processing


def momentum_distribution(
    profile: RadialProfile,
    spec: SystemSpec,
    n_max: int = 8,
    n_grid: int = 64,
    return_diagnostic: bool = False,
):
    """rho(p) = L^d/(2 pi hbar)^d integral G(x) e^{i p.x/hbar} dx on box momenta.

    The radial profile is laid back onto an n_grid^d minimum-image grid and
    transformed at the quantized momenta p = 2 pi hbar n / L with n in
    [-n_max, n_max]^d, then reduced to a radial |p| profile (shells of equal
    |n|^2 averaged).  Requires a J=1 worm run in a periodic box, the
    discrete stand-in for the tau_1 = tau_2 + 0+ equal-time limit.
    """
    if spec.worm is None or spec.worm.j_gap != 1:
        raise ValueError("momentum distribution requires a J=1 worm run")
    if not isinstance(spec.geometry, PeriodicBox):
        raise ValueError("momentum distribution requires PeriodicBox geometry")
    if spec.dim > 2:
        raise ValueError("momentum reduction implemented for d <= 2")
    L = spec.geometry.side
    hbar = spec.hbar
    coords = minimum_image(np.arange(n_grid) * (L / n_grid), L)

    def lookup(r):
        ib = np.searchsorted(profile.edges, r, side="right") - 1
        ok = (ib >= 0) & (ib < len(profile.values))
        out = np.zeros_like(r)
        out[ok] = profile.values[ib[ok]]
        return out

    n = np.arange(-n_max, n_max + 1)
    phase = np.exp(2j * np.pi / L * np.outer(n, coords))
    pref = (L / (2.0 * np.pi * hbar)) ** spec.dim * (L / n_grid) ** spec.dim
    if spec.dim == 1:
        grid = lookup(np.abs(coords))
        rho = pref * (phase @ grid)
        n2 = n**2
        rho_flat = rho
    else:
        X, Y = np.meshgrid(coords, coords, indexing="ij")
        grid = lookup(np.hypot(X, Y).ravel()).reshape(n_grid, n_grid)
        rho = pref * (phase @ grid @ phase.T)
        n2 = (n[:, None] ** 2 + n[None, :] ** 2).ravel()
        rho_flat = rho.ravel()
    peak = np.abs(rho_flat.real).max()
    residue = float(np.abs(rho_flat.imag).max() / peak) if peak > 0 else 0.0

    shells: dict[int, list] = {}
    for nn, value in zip(n2, rho_flat.real):
        shells.setdefault(int(nn), []).append(value)
    out = [
        ((2.0 * np.pi * hbar / L) * np.sqrt(nn), float(np.mean(vals)))
        for nn, vals in sorted(shells.items())
    ]
    if return_diagnostic:
        return out, residue
    return out


def _fit_window(profile: RadialProfile, r_min: float, r_max: float):
    c = profile.centers
    mask = (c >= r_min) & (c <= r_max)
    if mask.sum() < 2:
        raise ValueError(f"fit window [{r_min}, {r_max}] covers fewer than 2 bins")
    vals = profile.values[mask]
    if np.any(vals <= 0):
        raise InsufficientStatistics(
            f"nonpositive bins inside [{r_min}, {r_max}]; not enough statistics"
        )
    return c[mask], vals


def powerlaw_fit(profile: RadialProfile, r_min: float, r_max: float):
    """Least squares on (ln r, ln G); returns (a, eta, rms residual) for a r^-eta."""
    r, vals = _fit_window(profile, r_min, r_max)
    slope, intercept = np.polyfit(np.log(r), np.log(vals), 1)
    resid = np.log(vals) - (intercept + slope * np.log(r))
    return float(np.exp(intercept)), float(-slope), float(np.sqrt(np.mean(resid**2)))


def gaussian_fit(profile: RadialProfile, r_min: float, r_max: float):
    """Least squares on (r^2, ln G); returns (a, b, rms residual) for a e^{-b r^2}."""
    r, vals = _fit_window(profile, r_min, r_max)
    slope, intercept = np.polyfit(r**2, np.log(vals), 1)
    resid = np.log(vals) - (intercept + slope * r**2)
    return float(np.exp(intercept)), float(-slope), float(np.sqrt(np.mean(resid**2)))
