"""Batch front end: config files, trajectory orchestration, CSV outputs.

Config files are flat `section.key = value` lines ('#' comments allowed).
Unknown keys are rejected.  Every default is resolved at parse time and
recorded, so a run is fully described by its manifest; the manifest hash
(sha256 of the sorted key/value JSON) is stamped into every CSV as a
leading comment line.

Trajectory i is seeded from SeedSequence(base_seed).spawn(i) (splittable,
no arithmetic collisions), runs independently, and checkpoints to
checkpoint_<i>.npz in the output directory.  Merging is in trajectory
order, so reruns of a manifest reproduce all CSVs bitwise.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .model import (
    SystemSpec,
    HarmonicTrap,
    PeriodicBox,
    Gaussian,
    WormSpec,
    default_tau2_slice,
)
from .dynamics import (
    Schedule,
    ThermostatSpec,
    TrajectoryDiverged,
    TrajectoryInterrupted,
    run_trajectory,
)
from .estimators import (
    EstimatorConfig,
    make_accumulators,
    momentum_distribution,
)


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def _bool(raw: str) -> bool:
    low = raw.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


# key -> (parser, default); _REQUIRED means the key must appear,
# None means "resolve from the system later".
_REQUIRED = object()
_SCHEMA = {
    "system.n_particles": (int, _REQUIRED),
    "system.n_beads": (int, _REQUIRED),
    "system.dim": (int, _REQUIRED),
    "system.beta": (float, _REQUIRED),
    "system.geometry": (str, _REQUIRED),
    "system.trap_omega": (float, 1.0),
    "system.box_side": (float, None),
    "system.mass": (float, None),
    "system.hbar": (float, 1.0),
    "system.interaction": (str, "none"),
    "system.gaussian_g": (float, 0.0),
    "system.gaussian_s": (float, 0.5),
    "system.worm_gap": (int, 0),
    "system.worm_tau2_slice": (int, None),
    "thermostat.chain_length": (int, 4),
    "thermostat.coupling_frequency": (float, None),
    "thermostat.n_respa": (int, 2),
    "thermostat.sy_order": (int, 7),
    "schedule.n_steps": (int, _REQUIRED),
    "schedule.dt": (float, None),
    "schedule.n_equil": (int, 100_000),
    "schedule.sample_stride": (int, 10),
    "schedule.checkpoint_stride": (int, 100_000),
    "estimators.energy": (_bool, None),
    "estimators.density": (_bool, None),
    "estimators.pair_corr": (_bool, False),
    "estimators.greens": (_bool, None),
    "estimators.density_bins": (int, 60),
    "estimators.density_extent": (float, None),
    "estimators.pair_bins": (int, 80),
    "estimators.pair_rmax": (float, None),
    "estimators.greens_bin_width": (float, None),
    "estimators.greens_rmax": (float, None),
    "estimators.batch_size": (int, 1000),
    "estimators.momentum": (_bool, False),
    "estimators.momentum_n_max": (int, 8),
    "estimators.momentum_grid": (int, 64),
}


@dataclass
class RunManifest:
    """Everything needed to reproduce a run, plus derived run-time entries."""

    values: dict
    est: EstimatorConfig
    momentum: bool
    momentum_n_max: int
    momentum_grid: int
    checkpoint_stride: int


@dataclass
class RunConfig:
    spec: SystemSpec
    thermo: ThermostatSpec
    schedule: Schedule
    manifest: RunManifest


def _read_pairs(path: str) -> dict:
    pairs = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            if key in pairs:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            parse, _ = _SCHEMA[key]
            try:
                pairs[key] = parse(raw)
            except ValueError as err:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {err}") from None
    return pairs


def parse_config(path: str) -> RunConfig:
    """Validate a config file and resolve every default into the manifest."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    pairs = _read_pairs(path)
    for key, (_, default) in _SCHEMA.items():
        if default is _REQUIRED and key not in pairs:
            raise ConfigError(f"missing required key {key!r}")
        pairs.setdefault(key, default)

    geometry_kind = pairs["system.geometry"]
    if geometry_kind == "trap":
        geometry = HarmonicTrap(pairs["system.trap_omega"])
        default_mass = 1.0
    elif geometry_kind == "box":
        if pairs["system.box_side"] is None:
            raise ConfigError("system.box_side is required for box geometry")
        geometry = PeriodicBox(pairs["system.box_side"])
        default_mass = 0.5  # box energy unit hbar^2 / (2 m a^2) with a = 1
    else:
        raise ConfigError(f"system.geometry must be 'trap' or 'box', got {geometry_kind!r}")
    if pairs["system.mass"] is None:
        pairs["system.mass"] = default_mass

    inter_kind = pairs["system.interaction"]
    if inter_kind == "none":
        interaction = None
    elif inter_kind == "gaussian":
        interaction = Gaussian(pairs["system.gaussian_g"], pairs["system.gaussian_s"])
    else:
        raise ConfigError(f"system.interaction must be 'none' or 'gaussian', got {inter_kind!r}")

    P = pairs["system.n_beads"]
    j_gap = pairs["system.worm_gap"]
    if j_gap == 0:
        worm = None
    else:
        if pairs["system.worm_tau2_slice"] is None:
            pairs["system.worm_tau2_slice"] = default_tau2_slice(P, j_gap)
        worm = WormSpec(j_gap, pairs["system.worm_tau2_slice"])
    if worm is None:
        pairs["system.worm_tau2_slice"] = -1

    try:
        spec = SystemSpec(
            n_particles=pairs["system.n_particles"],
            n_beads=P,
            dim=pairs["system.dim"],
            beta=pairs["system.beta"],
            geometry=geometry,
            mass=pairs["system.mass"],
            hbar=pairs["system.hbar"],
            interaction=interaction,
            worm=worm,
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None

    if pairs["thermostat.coupling_frequency"] is None:
        pairs["thermostat.coupling_frequency"] = float(spec.omega_p)
    try:
        thermo = ThermostatSpec(
            chain_length=pairs["thermostat.chain_length"],
            coupling_frequency=pairs["thermostat.coupling_frequency"],
            n_respa=pairs["thermostat.n_respa"],
            sy_order=pairs["thermostat.sy_order"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None

    if pairs["schedule.dt"] is None:
        pairs["schedule.dt"] = float(0.05 / spec.omega_p)
    schedule = Schedule(
        n_steps=pairs["schedule.n_steps"],
        dt=pairs["schedule.dt"],
        n_equil=pairs["schedule.n_equil"],
        sample_stride=pairs["schedule.sample_stride"],
    )
    if schedule.n_steps < 0 or schedule.n_equil < 0 or schedule.sample_stride < 1:
        raise ConfigError("schedule step counts must be nonnegative, stride positive")

    est_overrides = {}
    for field_name in (
        "energy", "density", "pair_corr", "greens", "density_bins", "density_extent",
        "pair_bins", "pair_rmax", "greens_bin_width", "greens_rmax", "batch_size",
    ):
        val = pairs[f"estimators.{field_name}"]
        if val is not None:
            est_overrides[field_name] = val
    est = EstimatorConfig.for_spec(spec, **est_overrides)
    for field_name in ("energy", "density", "pair_corr", "greens"):
        pairs[f"estimators.{field_name}"] = getattr(est, field_name)
    if est.energy and spec.worm is not None:
        raise ConfigError("estimators.energy is undefined for worm runs")
    if (est.density or est.pair_corr) and spec.worm is not None:
        raise ConfigError("density/pair_corr estimators are closed-ensemble only")
    if est.greens and spec.worm is None:
        raise ConfigError("estimators.greens requires a worm (system.worm_gap >= 1)")
    if pairs["estimators.momentum"]:
        if spec.worm is None or spec.worm.j_gap != 1 or not isinstance(geometry, PeriodicBox):
            raise ConfigError("estimators.momentum requires box geometry and worm_gap = 1")

    manifest = RunManifest(
        values=pairs,
        est=est,
        momentum=pairs["estimators.momentum"],
        momentum_n_max=pairs["estimators.momentum_n_max"],
        momentum_grid=pairs["estimators.momentum_grid"],
        checkpoint_stride=pairs["schedule.checkpoint_stride"],
    )
    return RunConfig(spec=spec, thermo=thermo, schedule=schedule, manifest=manifest)


# ----------------------------------------------------------------- running


def _trajectory_seed(base_seed: int, index: int) -> int:
    child = np.random.SeedSequence(base_seed).spawn(index + 1)[index]
    state = child.generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def _checkpoint_writer(path: str):
    def write(state):
        tmp = path + ".tmp.npz"
        np.savez(tmp, **state)
        os.replace(tmp, path)

    return write


def _load_state(path: str) -> dict | None:
    if not os.path.exists(path):
        return None
    with np.load(path) as data:
        return {key: data[key].copy() for key in data.files}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(int(value) if isinstance(value, np.integer) else value)


def _write_csv(path: str, manifest_hash: str, header: list, rows: list):
    with open(path, "w") as fh:
        fh.write(f"# manifest={manifest_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _stderr_across(per_traj: list) -> np.ndarray:
    stacked = np.stack(per_traj)
    if stacked.shape[0] < 2:
        return np.zeros(stacked.shape[1:])
    return stacked.std(axis=0, ddof=1) / np.sqrt(stacked.shape[0])


def run(
    run_cfg: RunConfig,
    out_dir: str,
    trajectories: int,
    base_seed: int,
    steps_override: int | None = None,
    resume: bool = False,
    deterministic: bool = False,
    interrupt_after: int | None = None,
) -> int:
    """Run (or resume) all trajectories and write outputs; returns exit code."""
    spec = run_cfg.spec
    schedule = run_cfg.schedule
    if steps_override is not None:
        schedule = Schedule(
            n_steps=steps_override,
            dt=schedule.dt,
            n_equil=schedule.n_equil,
            sample_stride=schedule.sample_stride,
        )
    manifest = dict(run_cfg.manifest.values)
    manifest["schedule.n_steps"] = schedule.n_steps
    manifest["run.trajectories"] = trajectories
    manifest["run.base_seed"] = base_seed
    manifest["run.seed_derivation"] = "SeedSequence(base_seed).spawn(i)"
    manifest["run.deterministic"] = bool(deterministic)
    manifest["run.version"] = __version__
    mhash = hashlib.sha256(
        json.dumps(manifest, sort_keys=True).encode()
    ).hexdigest()[:12]

    os.makedirs(out_dir, exist_ok=True)
    est = run_cfg.manifest.est

    statuses = []
    accs = []
    interrupted = False
    for i in range(trajectories):
        cp_path = os.path.join(out_dir, f"checkpoint_{i}.npz")
        state = _load_state(cp_path) if resume else None
        seed = _trajectory_seed(base_seed, i)
        try:
            acc = run_trajectory(
                spec,
                run_cfg.thermo,
                schedule,
                seed,
                est=est,
                checkpoint_every=run_cfg.manifest.checkpoint_stride,
                on_checkpoint=_checkpoint_writer(cp_path),
                resume=state,
                interrupt_after=interrupt_after,
            )
        except TrajectoryInterrupted as err:
            print(f"trajectory {i}: interrupted at step {err.step_index}; "
                  f"resume with --resume")
            statuses.append({"trajectory": i, "seed": seed, "status": "interrupted"})
            interrupted = True
            break
        except TrajectoryDiverged as err:
            print(f"trajectory {i}: diverged at step {err.step_index}", file=sys.stderr)
            statuses.append({"trajectory": i, "seed": seed, "status": "diverged"})
            continue
        statuses.append({"trajectory": i, "seed": seed, "status": "ok"})
        accs.append(acc)

    manifest["run.trajectory_status"] = statuses
    manifest["run.manifest_hash"] = mhash
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    if interrupted:
        return 3
    if not accs:
        print("all trajectories failed", file=sys.stderr)
        return 2

    merged = accs[0]
    for acc in accs[1:]:
        merged = merged.merge(acc)
    outputs = []

    if est.energy:
        mean, batch_stderr, count = merged.energy_result()
        if len(accs) >= 2:
            means = np.array([a.energy_result()[0] for a in accs])
            stderr = float(means.std(ddof=1) / np.sqrt(len(means)))
        else:
            stderr = batch_stderr
        path = os.path.join(out_dir, "energy.csv")
        _write_csv(path, mhash, ["estimate", "stderr", "n_samples"], [[mean, stderr, count]])
        outputs.append(path)
        print(f"energy = {mean:.6f} +- {stderr:.6f} ({count} samples)")

    if est.density:
        edges, values, _ = merged.density_result()
        per = [a.density_result()[1].ravel() for a in accs]
        err = _stderr_across(per)
        centers = [0.5 * (e[:-1] + e[1:]) for e in edges]
        mesh = np.meshgrid(*centers, indexing="ij")
        header = [f"bin_center_{k}" for k in range(spec.dim)] + ["value", "stderr"]
        rows = [
            [*(m.ravel()[idx] for m in mesh), values.ravel()[idx], err.ravel()[idx]]
            for idx in range(values.size)
        ]
        path = os.path.join(out_dir, "density.csv")
        _write_csv(path, mhash, header, rows)
        outputs.append(path)

    if est.pair_corr:
        prof = merged.pair_profile()
        per = [a.pair_profile().values for a in accs]
        err = _stderr_across(per)
        rows = [[r, v, e] for r, v, e in zip(prof.centers, prof.values, err)]
        path = os.path.join(out_dir, "pair_corr.csv")
        _write_csv(path, mhash, ["r", "value", "stderr"], rows)
        outputs.append(path)

    if est.greens:
        prof = merged.greens_profile()
        per = [a.greens_profile().values for a in accs]
        err = _stderr_across(per)
        rows = [[r, v, e] for r, v, e in zip(prof.centers, prof.values, err)]
        path = os.path.join(out_dir, "greens.csv")
        _write_csv(path, mhash, ["r", "G", "stderr"], rows)
        outputs.append(path)

    if run_cfg.manifest.momentum:
        n_max = run_cfg.manifest.momentum_n_max
        n_grid = run_cfg.manifest.momentum_grid
        pooled = momentum_distribution(merged.greens_profile(), spec, n_max, n_grid)
        per = [
            np.array([rho for _, rho in momentum_distribution(a.greens_profile(), spec, n_max, n_grid)])
            for a in accs
        ]
        err = _stderr_across(per)
        rows = [[p, rho, e] for (p, rho), e in zip(pooled, err)]
        path = os.path.join(out_dir, "momentum.csv")
        _write_csv(path, mhash, ["p", "rho", "stderr"], rows)
        outputs.append(path)

    for path in outputs:
        print(f"wrote {path}")
    ok = sum(1 for s in statuses if s["status"] == "ok")
    if ok < trajectories:
        print(f"partial results: {ok}/{trajectories} trajectories", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bosemd",
        description="Path-integral molecular dynamics for identical bosons.",
    )
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--trajectories", type=int, default=1, metavar="K")
    parser.add_argument("--seed", type=int, default=0, metavar="S")
    parser.add_argument("--steps", type=int, default=None, metavar="OVERRIDE",
                        help="override schedule.n_steps")
    parser.add_argument("--resume", action="store_true",
                        help="continue from checkpoints in the output directory")
    parser.add_argument("--deterministic", action="store_true",
                        help="record deterministic mode in the manifest")
    parser.add_argument("--interrupt-after", type=int, default=None,
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    try:
        run_cfg = parse_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    if args.trajectories < 1:
        print("config error: --trajectories must be >= 1", file=sys.stderr)
        return 1
    return run(
        run_cfg,
        args.out,
        args.trajectories,
        args.seed,
        steps_override=args.steps,
        resume=args.resume,
        deterministic=args.deterministic,
        interrupt_after=args.interrupt_after,
    )


if __name__ == "__main__":
    sys.exit(main())
