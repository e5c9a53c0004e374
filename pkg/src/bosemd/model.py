"""System definition: particles, beads, geometry, and imaginary-time indexing.

Conventions used throughout the package:

* Particle ``i`` (0-based) owns a contiguous block of bead rows in the flat
  ``(n_total, dim)`` position array.  Closed particles store their beads in
  slice order ``r^1 .. r^P``.
* If a worm is active it always lives on the last particle, whose storage
  order is ``(r^1 .. r^l, y, x, r^{l+1} .. r^{P-J})`` with ``l = tau2_slice``.
  The bead ``y`` sits at slice ``l+1`` (the imaginary time tau_2) and ``x``
  at slice ``l+1+J`` (tau_1), wrapped cyclically into ``[1, P]``.  There is
  no spring between ``y`` and ``x``.
* Slices are 1-based (``1 .. P``) to match the usual ring-polymer notation;
  storage indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
import numpy as np


# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class HarmonicTrap:
    """Isotropic harmonic confinement of frequency omega."""

    omega: float = 1.0


@dataclass(frozen=True)
class PeriodicBox:
    """Periodic cube (square in 2d) of side L."""

    side: float = 1.0


@dataclass(frozen=True)
class Gaussian:
    """Pair potential (g / pi s^2) exp(-dr^2/s^2), summed over pairs."""

    g: float
    s: float


@dataclass(frozen=True)
class WormSpec:
    """Open-ring (gapped) topology parameters for the last particle.

    j_gap is the number of removed imaginary-time slices J; tau2_slice is
    the storage index l of the last bead before the gap, i.e. tau_2 =
    (l+1) * beta / P.
    """

    j_gap: int
    tau2_slice: int


def default_tau2_slice(n_beads: int, j_gap: int) -> int:
    """Gap placement used when the config does not pin tau2_slice."""
    return min(max(n_beads // 3 - 1, 0), n_beads - j_gap)


@dataclass(frozen=True)
class SystemSpec:
    """Immutable description of one simulated system."""

    n_particles: int
    n_beads: int
    dim: int
    beta: float
    geometry: HarmonicTrap | PeriodicBox
    mass: float = 1.0
    hbar: float = 1.0
    interaction: Gaussian | None = None
    worm: WormSpec | None = None

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_beads < 1:
            raise ValueError("n_beads must be >= 1")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.mass > 0 or not self.hbar > 0:
            raise ValueError("mass and hbar must be positive")
        if isinstance(self.geometry, HarmonicTrap):
            if not self.geometry.omega > 0:
                raise ValueError("trap omega must be positive")
        elif isinstance(self.geometry, PeriodicBox):
            if not self.geometry.side > 0:
                raise ValueError("box side must be positive")
        else:
            raise ValueError("geometry must be HarmonicTrap or PeriodicBox")
        if self.interaction is not None and not self.interaction.s > 0:
            raise ValueError("gaussian width s must be positive")
        if self.worm is not None:
            j, l = self.worm.j_gap, self.worm.tau2_slice
            if not 1 <= j <= self.n_beads - 1:
                raise ValueError(
                    f"worm j_gap must lie in [1, P-1], got J={j} with P={self.n_beads}"
                )
            if not 0 <= l <= self.n_beads - j:
                raise ValueError(
                    f"worm tau2_slice must lie in [0, P-J], got l={l}"
                )

    # Derived quantities (never stored, so they cannot drift out of sync).
    @property
    def omega_p(self) -> float:
        return np.sqrt(self.n_beads) / (self.beta * self.hbar)

    @property
    def delta_beta(self) -> float:
        return self.beta / self.n_beads

    @property
    def spring_k(self) -> float:
        """m * omega_P^2, the ring-polymer spring constant."""
        return self.mass * self.omega_p**2

    def to_dict(self) -> dict:
        d = {
            "n_particles": self.n_particles,
            "n_beads": self.n_beads,
            "dim": self.dim,
            "beta": self.beta,
            "mass": self.mass,
            "hbar": self.hbar,
        }
        if isinstance(self.geometry, HarmonicTrap):
            d["geometry"] = {"kind": "trap", "omega": self.geometry.omega}
        else:
            d["geometry"] = {"kind": "box", "side": self.geometry.side}
        if self.interaction is None:
            d["interaction"] = None
        else:
            d["interaction"] = {
                "kind": "gaussian",
                "g": self.interaction.g,
                "s": self.interaction.s,
            }
        d["worm"] = None if self.worm is None else asdict(self.worm)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        geo = d["geometry"]
        if geo["kind"] == "trap":
            geometry = HarmonicTrap(geo["omega"])
        elif geo["kind"] == "box":
            geometry = PeriodicBox(geo["side"])
        else:
            raise ValueError(f"unknown geometry kind {geo['kind']!r}")
        inter = d.get("interaction")
        interaction = None if inter is None else Gaussian(inter["g"], inter["s"])
        worm = d.get("worm")
        wormspec = None if worm is None else WormSpec(worm["j_gap"], worm["tau2_slice"])
        return cls(
            n_particles=d["n_particles"],
            n_beads=d["n_beads"],
            dim=d["dim"],
            beta=d["beta"],
            geometry=geometry,
            mass=d.get("mass", 1.0),
            hbar=d.get("hbar", 1.0),
            interaction=interaction,
            worm=wormspec,
        )


# ------------------------------------------------------------ slice index


class SliceIndex:
    """Map between bead storage indices and imaginary-time slices.

    For a closed particle storage index j holds the bead of slice j+1.  For
    the worm particle the gap slices l+1 .. l+J carry no ring bead; y covers
    slice l+1 and x covers slice l+1+J (mod P, staying in [1, P]).
    """

    def __init__(self, spec: SystemSpec):
        P = spec.n_beads
        self.n_beads = P
        self.worm = spec.worm
        if spec.worm is None:
            self.worm_slices = np.arange(1, P + 1, dtype=np.int64)
            self.y_storage = self.x_storage = -1
            self.gap_slices = np.empty(0, dtype=np.int64)
        else:
            j, l = spec.worm.j_gap, spec.worm.tau2_slice
            slices = np.empty(P - j + 2, dtype=np.int64)
            slices[:l] = np.arange(1, l + 1)                      # r^1 .. r^l
            slices[l] = l + 1                                     # y
            slices[l + 1] = (l + j) % P + 1                       # x
            slices[l + 2:] = np.arange(l + j + 1, P + 1)          # r^{l+1} ..
            self.worm_slices = slices
            self.y_storage = l
            self.x_storage = l + 1
            self.gap_slices = np.arange(l + 1, l + j + 1, dtype=np.int64)

    def slice_of(self, storage_j: int) -> int:
        """Slice (1-based) of the worm particle's bead at storage index j."""
        return int(self.worm_slices[storage_j])


# ------------------------------------------------------------- bead layout


@dataclass
class BeadLayout:
    """Precomputed index arrays shared by the force and estimator kernels.

    offsets[i] is the first flat bead row of particle i; spring_break[i] is
    the consecutive-pair index with no spring (-1 for closed particles, l
    for the worm particle, i.e. the missing y--x spring); slice_members[s-1,
    i] is the flat bead of particle i at slice s, or -1 inside the gap.  The
    x bead additionally interacts at slice x_slice (it shares that slice
    with a ring bead of the same particle, with which it does not interact).
    """

    n_particles: int
    n_beads: int
    dim: int
    counts: np.ndarray
    offsets: np.ndarray
    spring_break: np.ndarray
    slice_members: np.ndarray
    slices: SliceIndex
    x_flat: int
    y_flat: int
    x_slice: int

    @classmethod
    def from_spec(cls, spec: SystemSpec) -> "BeadLayout":
        N, P = spec.n_particles, spec.n_beads
        counts = np.full(N, P, dtype=np.int64)
        slices = SliceIndex(spec)
        spring_break = np.full(N, -1, dtype=np.int64)
        if spec.worm is not None:
            counts[N - 1] = P - spec.worm.j_gap + 2
            spring_break[N - 1] = spec.worm.tau2_slice
        offsets = np.zeros(N + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])

        members = np.full((P, N), -1, dtype=np.int64)
        for i in range(N - 1):
            members[:, i] = offsets[i] + np.arange(P)
        if spec.worm is None:
            members[:, N - 1] = offsets[N - 1] + np.arange(P)
            x_flat = y_flat = -1
            x_slice = -1
        else:
            o = offsets[N - 1]
            for j, s in enumerate(slices.worm_slices):
                if j == slices.x_storage:
                    continue  # x is the extra bead at its slice, see x_flat
                members[s - 1, N - 1] = o + j
            x_flat = int(o + slices.x_storage)
            y_flat = int(o + slices.y_storage)
            x_slice = slices.slice_of(slices.x_storage)
        return cls(
            n_particles=N,
            n_beads=P,
            dim=spec.dim,
            counts=counts,
            offsets=offsets,
            spring_break=spring_break,
            slice_members=members,
            slices=slices,
            x_flat=x_flat,
            y_flat=y_flat,
            x_slice=x_slice,
        )

    @property
    def n_total(self) -> int:
        return int(self.offsets[-1])

    def bead(self, particle: int, storage_j: int) -> int:
        return int(self.offsets[particle] + storage_j)

    def particle_rows(self, particle: int) -> slice:
        return slice(int(self.offsets[particle]), int(self.offsets[particle + 1]))


# ------------------------------------------------------------ configuration


@dataclass
class BeadConfiguration:
    """Mutable simulation state owned by exactly one trajectory."""

    spec: SystemSpec
    layout: BeadLayout
    positions: np.ndarray   # (n_total, dim)
    velocities: np.ndarray  # (n_total, dim)
    therm_eta: np.ndarray   # (n_dof, M) thermostat positions
    therm_v: np.ndarray     # (n_dof, M) thermostat velocities

    @property
    def n_dof(self) -> int:
        return self.positions.size

    def copy(self) -> "BeadConfiguration":
        return BeadConfiguration(
            spec=self.spec,
            layout=self.layout,
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            therm_eta=self.therm_eta.copy(),
            therm_v=self.therm_v.copy(),
        )


def build_system(spec: SystemSpec, seed: int, chain_length: int = 4) -> BeadConfiguration:
    """Initial state: collapsed rings with jitter, Maxwell-Boltzmann velocities.

    Each particle's beads start on top of a common center (trap: Gaussian
    cloud of width sqrt(hbar/m omega); box: uniform in [0, L)^d) plus a
    uniform jitter of at most 0.01 length units per component.  Velocities
    are drawn at the per-DOF thermostat target temperature 1/beta.  The same
    seed always yields a bit-identical configuration.
    """
    layout = BeadLayout.from_spec(spec)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n, d = layout.n_total, spec.dim

    if isinstance(spec.geometry, HarmonicTrap):
        width = np.sqrt(spec.hbar / (spec.mass * spec.geometry.omega))
        centers = rng.normal(0.0, width, size=(spec.n_particles, d))
    else:
        centers = rng.uniform(0.0, spec.geometry.side, size=(spec.n_particles, d))
    jitter = rng.uniform(-0.01, 0.01, size=(n, d))
    positions = np.empty((n, d))
    for i in range(spec.n_particles):
        positions[layout.particle_rows(i)] = centers[i]
    positions += jitter

    sigma_v = np.sqrt(1.0 / (spec.beta * spec.mass))
    velocities = rng.normal(0.0, sigma_v, size=(n, d))

    return BeadConfiguration(
        spec=spec,
        layout=layout,
        positions=positions,
        velocities=velocities,
        therm_eta=np.zeros((n * d, chain_length)),
        therm_v=np.zeros((n * d, chain_length)),
    )
