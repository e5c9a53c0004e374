"""Path-integral molecular dynamics for identical bosons.

Ring-polymer sampling of the bosonic partition function via the cyclic
recursion over exchange sectors, plus the open-worm extension for thermal
Green's functions and momentum distributions.
"""

__version__ = "0.1.0"

from .model import (
    BeadConfiguration,
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
from .exchange import (
    ExchangeResult,
    beta_derivative_term,
    exchange_forces,
    exchange_potential,
    spring_energy,
)
from .worm import worm_interaction, worm_potential_and_forces, worm_spring_energy
from .potentials import gaussian_pair_energy_forces, minimum_image, trap_energy_forces
from .dynamics import (
    Schedule,
    ThermostatSpec,
    TrajectoryDiverged,
    TrajectoryInterrupted,
    conserved_energy,
    default_thermostat,
    evaluate_forces,
    run_trajectory,
    step,
)
from .estimators import (
    EstimatorConfig,
    InsufficientStatistics,
    RadialProfile,
    density_sample,
    energy_sample,
    gaussian_fit,
    greens_sample,
    make_accumulators,
    momentum_distribution,
    pair_correlation_sample,
    powerlaw_fit,
    shell_measures,
)
