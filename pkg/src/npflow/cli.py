"""Command-line front end.

Subcommands:

* ``run``       integrate a config, writing resolved.yaml, snapshots and
                invariant/radius CSV series into the output directory
* ``diagnose``  recompute diagnostics from the snapshots of a finished run
* ``spectrum``  dump per-snapshot shell spectra as CSV
* ``sweep``     cartesian parameter sweep of whole runs (process-parallel)
* ``validate``  parse and validate a config without running it

Exit codes: 0 success, 1 validation failure, 2 divergence, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .config import (RunConfig, build_initial_state, parse_config,
                     parse_config_doc, render_config)
from .diagnostics import (RadiusRecord, combined_shell_spectrum,
                          gronwall_ledger, invariant_report, npd_radius_bound,
                          npe_budget_ingredients, radius_fit, shell_spectrum,
                          species_chi, sqrt_y_value)
from .errors import (ConfigError, DivergenceError, GevreyOverflowError,
                     InsufficientShellsError, NpflowError, SchemaError,
                     SnapshotError)
from .snapshots import read_snapshot, write_snapshot
from .stepping import run as march
from .timeseries import append_invariants, append_radius, append_row

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


# ---------------------------------------------------------------------------
# running


class _NpeBudgetTracker:
    """Accumulates the Euler-model radius bound causally along a run.

    Uses the same trapezoid increments as the offline evaluation, so a
    rerun of the finished series reproduces these values.
    """

    def __init__(self, cfg: RunConfig, state0):
        self.m = cfg.m_star
        self.c = cfg.c_user
        self.tau0 = cfg.tau0
        self.chi = species_chi(state0)
        self.mean_bar = sum(sp.c.coeffs[0, 0].real**2 for sp in state0.species)
        self.sqrt_y0 = sqrt_y_value(state0, cfg.tau0, self.m)
        self.int_b = 0.0
        self.int_a = 0.0
        self.int_tau = 0.0
        self.prev: tuple[float, float, float, float] | None = None

    def update(self, state) -> float:
        om, rho_part, u_n, gu = npe_budget_ingredients(state, self.m)
        b = rho_part + self.chi * (u_n**2 + 1.0) + gu + self.mean_bar
        t = state.time
        dt = 0.0 if self.prev is None else t - self.prev[0]
        if self.prev is not None:
            self.int_b += 0.5 * (self.prev[1] + b) * dt
        g = float(np.exp(min(self.c * self.int_b, 700.0)))
        om2g = om**2 / g
        if self.prev is not None:
            self.int_a += 0.5 * (self.prev[2] + om2g) * dt
        a = g * (self.sqrt_y0 + self.c * (1.0 + self.tau0) * self.int_a)
        atilde = a + self.chi * a**2
        tg = (om + atilde) / g
        if self.prev is not None:
            self.int_tau += 0.5 * (self.prev[3] + tg) * dt
        self.prev = (t, b, om2g, tg)
        return 1.0 / (g * (1.0 / self.tau0 + self.c * self.int_tau))


def _radius_record(state, cfg: RunConfig, tau_theory: float) -> RadiusRecord:
    fields = [sp.c for sp in state.species]
    if state.is_euler:
        fields.append(state.fluid.omega)
    try:
        tau_est, r2 = radius_fit(combined_shell_spectrum(fields),
                                 cfg.fit_band, cfg.noise_floor)
    except InsufficientShellsError:
        tau_est, r2 = float("nan"), 0.0
    try:
        gnorm = sqrt_y_value(state, tau_est, cfg.m_star)
    except GevreyOverflowError:
        gnorm = float("inf")
    return RadiusRecord(time=float(state.time), tau_estimated=tau_est,
                        tau_theory=float(tau_theory), fit_quality=r2,
                        gevrey_norm_at_tau=gnorm)


def _clean_outputs(outdir: Path) -> None:
    for old in outdir.glob("snapshot_*.bin"):
        old.unlink()
    for name in ("invariants.csv", "radius.csv", "status.json"):
        path = outdir / name
        if path.exists():
            path.unlink()


def execute_run(cfg: RunConfig, outdir: Path, *, quiet: bool = False) -> int:
    """Integrate one resolved config into ``outdir``.  Reruns overwrite."""
    outdir.mkdir(parents=True, exist_ok=True)
    _clean_outputs(outdir)
    (outdir / "resolved.yaml").write_text(render_config(cfg))
    state0 = build_initial_state(cfg)
    inv_path = outdir / "invariants.csv"
    rad_path = outdir / "radius.csv"
    tracker = _NpeBudgetTracker(cfg, state0) if cfg.model == "NPE" else None
    diffusivities = [sc.D for sc in cfg.species]
    last_report = None

    def hook(step_index: int, state) -> None:
        nonlocal last_report
        last_report = invariant_report(state, last_report, cfg.m_star)
        append_invariants(inv_path, last_report)
        if tracker is not None:
            tau_theory = tracker.update(state)
        else:
            tau_theory = npd_radius_bound(state.time, diffusivities, cfg.T0)
        append_radius(rad_path, _radius_record(state, cfg, tau_theory))
        write_snapshot(outdir / f"snapshot_{step_index:08d}.bin", state)

    # blow-ups surface as the diverged flag, not as FP warnings
    with np.errstate(over="ignore", invalid="ignore"):
        traj = march(state0, cfg.stepper, hooks=(hook,), cadence=cfg.cadence)
    status = {"status": "diverged" if traj.diverged else "complete",
              "steps": traj.steps_taken, "final_time": traj.times[-1],
              "divergence_step": traj.divergence_step}
    (outdir / "status.json").write_text(json.dumps(status, indent=2) + "\n")
    if traj.diverged:
        print(f"run diverged at step {traj.divergence_step}; partial outputs "
              f"kept in {outdir}", file=sys.stderr)
        return EXIT_DIVERGED
    if not quiet:
        print(f"run complete: {traj.steps_taken} steps to t = "
              f"{traj.times[-1]:.6g}; outputs in {outdir}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = parse_config(Path(args.config).read_text())
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    if args.cadence is not None:
        cfg = replace(cfg, cadence=args.cadence)
    if cfg.output_dir is None:
        raise ConfigError("no output directory: set output_dir or pass --out",
                          key_path="output_dir")
    outdir = Path(cfg.output_dir)
    if args.resume:
        status = outdir / "status.json"
        if status.exists():
            if json.loads(status.read_text()).get("status") == "complete":
                print(f"skipping completed run in {outdir}")
                return EXIT_OK
    return execute_run(cfg, outdir)


# ---------------------------------------------------------------------------
# diagnose / spectrum


def _load_run(rundir: Path) -> tuple[RunConfig, list]:
    resolved = rundir / "resolved.yaml"
    if not resolved.exists():
        # missing artefacts are I/O failures (exit 3), not config mistakes
        raise FileNotFoundError(f"{rundir} does not look like a run "
                                "directory (no resolved.yaml)")
    cfg = parse_config(resolved.read_text())
    paths = sorted(rundir.glob("snapshot_*.bin"))
    if not paths:
        raise FileNotFoundError(f"no snapshots in {rundir}")
    return cfg, [read_snapshot(p) for p in paths]


def _cmd_diagnose(args) -> int:
    rundir = Path(args.run_dir)
    outdir = Path(args.out) if args.out else rundir
    outdir.mkdir(parents=True, exist_ok=True)
    cfg, states = _load_run(rundir)
    history = [(st.time, st) for st in states]

    inv_path = outdir / "diagnose_invariants.csv"
    rad_path = outdir / "diagnose_radius.csv"
    for path in (inv_path, rad_path):
        if path.exists():
            path.unlink()

    report = None
    for st in states:
        report = invariant_report(st, report, cfg.m_star)
        append_invariants(inv_path, report)

    ledger = gronwall_ledger(history, cfg.m_star, cfg.tau0, cfg.c_user)
    if cfg.model == "NPE":
        tau_theory = ledger.details["tau"]
    else:
        tau_theory = [npd_radius_bound(st.time, [sp.D for sp in st.species],
                                       cfg.T0) for st in states]
    for st, tau_th in zip(states, tau_theory):
        append_radius(rad_path, _radius_record(st, cfg, float(tau_th)))

    payload = {"model": ledger.model,
               "times": [float(v) for v in ledger.times],
               "observed": [float(v) for v in ledger.observed],
               "bound": [float(v) for v in ledger.bound],
               "margin": [float(v) for v in ledger.margin],
               "negative_margin_times": list(ledger.negative_margin_times)}
    (outdir / "gronwall.json").write_text(json.dumps(payload, indent=2) + "\n")

    if cfg.gevrey_probes:
        probe_path = outdir / "diagnose_gevrey.csv"
        if probe_path.exists():
            probe_path.unlink()
        columns = ("time",) + tuple(f"y_tau{t:g}_m{m:g}"
                                    for t, m in cfg.gevrey_probes)
        for st in states:
            row = [st.time]
            for tau, m in cfg.gevrey_probes:
                try:
                    row.append(sqrt_y_value(st, tau, m))
                except GevreyOverflowError:
                    row.append(float("inf"))
            append_row(probe_path, columns, tuple(row))

    masses = np.array([[sp.c.coeffs[0, 0].real for sp in st.species]
                       for st in states])
    drift = float(np.max(np.abs(masses - masses[0]))) if len(states) > 1 else 0.0
    print(f"diagnosed {len(states)} snapshots from {rundir}")
    print(f"max mean-concentration drift: {drift:.3e}")
    print(f"gronwall margin: min {float(np.min(ledger.margin)):.6g}, "
          f"{len(ledger.negative_margin_times)} negative samples")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    rundir = Path(args.run_dir)
    outdir = Path(args.out) if args.out else rundir
    outdir.mkdir(parents=True, exist_ok=True)
    paths = sorted(rundir.glob("snapshot_*.bin"))
    if not paths:
        raise ConfigError(f"no snapshots in {rundir}")
    for path in paths:
        state = read_snapshot(path)
        fields = {f"c{i + 1}": sp.c for i, sp in enumerate(state.species)}
        if state.is_euler:
            fields["omega"] = state.fluid.omega
        rows = []
        for name, f in fields.items():
            spec = shell_spectrum(f)
            rows += [(name, int(s), float(k), float(a)) for s, k, a in
                     zip(spec.shells, spec.k_at_max, spec.amplitude)]
        spec = combined_shell_spectrum(fields.values())
        rows += [("combined", int(s), float(k), float(a)) for s, k, a in
                 zip(spec.shells, spec.k_at_max, spec.amplitude)]
        stem = path.stem.replace("snapshot_", "spectrum_")
        with (outdir / f"{stem}.csv").open("w", newline="") as fh:
            fh.write("field,shell,k_at_max,amplitude\n")
            for name, s, k, a in rows:
                fh.write(f"{name},{s},{'%.17g' % k},{'%.17g' % a}\n")
    print(f"wrote {len(paths)} spectrum files to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweeps


def _split_sweep(text: str) -> tuple[dict, dict]:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    sweep = doc.pop("sweep", None)
    if sweep is None:
        return doc, {}
    if not isinstance(sweep, dict) or not sweep:
        raise ConfigError("expected a mapping of key paths to value lists",
                          key_path="sweep")
    for path, values in sweep.items():
        if not isinstance(values, list) or not values:
            raise ConfigError("expected a non-empty list of values",
                              key_path=f"sweep.{path}")
    return doc, sweep


def _apply_override(doc: dict, path: str, value) -> None:
    segments = path.split(".")
    node = doc
    for seg in segments[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(seg)]
            except (ValueError, IndexError):
                raise ConfigError(f"bad list index {seg!r}",
                                  key_path=f"sweep.{path}") from None
        elif isinstance(node, dict):
            if seg not in node:
                raise ConfigError(f"unknown key {seg!r}",
                                  key_path=f"sweep.{path}")
            node = node[seg]
        else:
            raise ConfigError(f"cannot descend into scalar at {seg!r}",
                              key_path=f"sweep.{path}")
    last = segments[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"bad list index {last!r}",
                              key_path=f"sweep.{path}") from None
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"cannot assign into scalar at {last!r}",
                          key_path=f"sweep.{path}")


def sweep_points(sweep: dict) -> list[dict]:
    """Cartesian product of the sweep axes, in declaration order."""
    axes = list(sweep.items())
    return [dict(zip((p for p, _ in axes), combo))
            for combo in itertools.product(*(vals for _, vals in axes))]


def _point_dir_name(overrides: dict) -> str:
    raw = "__".join(f"{path}={value}" for path, value in overrides.items())
    return re.sub(r"[^A-Za-z0-9_.=+-]", "-", raw)


def _point_config(base_doc: dict, overrides: dict, outdir: Path) -> RunConfig:
    doc = copy.deepcopy(base_doc)
    for path, value in overrides.items():
        _apply_override(doc, path, value)
    doc["output_dir"] = str(outdir)
    return parse_config_doc(doc)


def _sweep_worker(payload) -> dict:
    base_doc, overrides, dirname, outbase = payload
    outdir = Path(outbase) / dirname
    entry = {"dir": dirname, "overrides": overrides}
    try:
        cfg = _point_config(base_doc, overrides, outdir)
        code = execute_run(cfg, outdir, quiet=True)
    except ConfigError as err:
        entry.update(status="invalid", error=str(err), exit_code=EXIT_CONFIG)
        return entry
    except (SnapshotError, SchemaError, OSError) as err:
        entry.update(status="io-error", error=str(err), exit_code=EXIT_IO)
        return entry
    entry.update(status="diverged" if code == EXIT_DIVERGED else "complete",
                 exit_code=code)
    return entry


def _cmd_sweep(args) -> int:
    if args.workers < 1:
        raise ConfigError("need at least one worker", key_path="workers")
    base_doc, sweep = _split_sweep(Path(args.config).read_text())
    if not sweep:
        raise ConfigError("config has no sweep block", key_path="sweep")
    outbase = Path(args.out)
    outbase.mkdir(parents=True, exist_ok=True)
    manifest = outbase / "sweep_manifest.jsonl"

    done: set[str] = set()
    if args.resume and manifest.exists():
        for line in manifest.read_text().splitlines():
            if line.strip():
                done.add(json.loads(line)["dir"])

    points = sweep_points(sweep)
    jobs = []
    skipped = 0
    for overrides in points:
        name = _point_dir_name(overrides)
        if name in done:
            skipped += 1
            continue
        jobs.append((base_doc, overrides, name, str(outbase)))

    entries = []
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for entry in pool.map(_sweep_worker, jobs):
                entries.append(entry)
                with manifest.open("a") as fh:
                    fh.write(json.dumps(entry) + "\n")
    else:
        for job in jobs:
            entry = _sweep_worker(job)
            entries.append(entry)
            with manifest.open("a") as fh:
                fh.write(json.dumps(entry) + "\n")

    codes = [e["exit_code"] for e in entries]
    n_bad = sum(1 for c in codes if c != 0)
    print(f"sweep: {len(points)} points, {skipped} skipped, "
          f"{len(jobs) - n_bad} succeeded, {n_bad} failed")
    for severity in (EXIT_IO, EXIT_CONFIG, EXIT_DIVERGED):
        if severity in codes:
            return severity
    return EXIT_OK


def _cmd_validate(args) -> int:
    base_doc, sweep = _split_sweep(Path(args.config).read_text())
    if not sweep:
        parse_config_doc(base_doc)
        print("configuration OK")
    else:
        points = sweep_points(sweep)
        for overrides in points:
            doc = copy.deepcopy(base_doc)
            for path, value in overrides.items():
                _apply_override(doc, path, value)
            parse_config_doc(doc)
        print(f"configuration OK ({len(points)} sweep points)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="npflow",
        description="Pseudo-spectral ion transport on the periodic box")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate a configuration")
    p.add_argument("--config", required=True, help="YAML run configuration")
    p.add_argument("--out", help="override the configured output directory")
    p.add_argument("--cadence", type=int, help="override the sample cadence")
    p.add_argument("--resume", action="store_true",
                   help="skip if the output directory holds a completed run")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("diagnose",
                       help="recompute diagnostics from run snapshots")
    p.add_argument("run_dir", help="directory written by `npflow run`")
    p.add_argument("--out", help="where to write the diagnostic files")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("spectrum", help="dump shell spectra per snapshot")
    p.add_argument("run_dir", help="directory written by `npflow run`")
    p.add_argument("--out", help="where to write the spectrum CSVs")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("sweep", help="run a cartesian parameter sweep")
    p.add_argument("--config", required=True,
                   help="YAML config with a `sweep:` block")
    p.add_argument("--out", required=True, help="base output directory")
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes (each point runs whole)")
    p.add_argument("--resume", action="store_true",
                   help="skip points already in the manifest")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("validate", help="check a configuration and exit")
    p.add_argument("--config", required=True, help="YAML configuration")
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except (SnapshotError, SchemaError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except NpflowError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
