"""``nls-lab`` command-line front end.

Exit codes: 0 success, 1 invalid input, I/O or internal failure, 2 blow-up signal,
3 Picard iteration did not converge, 4 a verified inequality was violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .config import ConfigError, ScenarioConfig, load_config
from .functionals import INF, energy, hamiltonian, hk_norm, lp_norm, mass
from .io import (
    SnapshotError,
    atomic_write_text,
    diagnostics_csv,
    load_manifest,
    read_snapshot,
    save_trajectory,
    write_snapshot,
)
from .solver import BlowUpDetected, evolve, picard_solve
from . import verify as vf

log = logging.getLogger("nls_lab")

EXIT_OK, EXIT_IO, EXIT_BLOWUP, EXIT_NONCONVERGED, EXIT_VIOLATION = 0, 1, 2, 3, 4

OBSERVABLES = {
    "mass": lambda u, lam, p: mass(u),
    "energy": lambda u, lam, p: energy(u, lam, p),
    "hamiltonian": lambda u, lam, p: hamiltonian(u, lam, p),
    "l2": lambda u, lam, p: lp_norm(u, 2),
    "h1": lambda u, lam, p: hk_norm(u, 1),
    "h2": lambda u, lam, p: hk_norm(u, 2),
    "sup": lambda u, lam, p: lp_norm(u, INF),
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _config_echo(cfg: ScenarioConfig) -> dict:
    return json.loads(json.dumps(cfg.raw, default=str))


def _write_manifest(out: Path, cfg: ScenarioConfig, started: float, status: dict, files: list[str]) -> None:
    man = {
        "artifact_version": __version__,
        "config": _config_echo(cfg),
        "start_time": started,
        "end_time": time.time(),
        "status": status,
        "files": sorted(files),
    }
    atomic_write_text(out / "run_manifest.json", json.dumps(man, indent=2))


def _prepare_out(cfg: ScenarioConfig, override: str | None) -> Path:
    out = Path(override) if override else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evolve(cfg: ScenarioConfig, out_override: str | None = None) -> int:
    started = time.time()
    out = _prepare_out(cfg, out_override)
    with FileLock(str(out / ".nls-lab.lock"), timeout=30):
        u0 = cfg.initial_field()
        s = replace(cfg.solver, scheme="strang")
        n, h = s.time_nodes()
        stride = cfg.snapshot_stride or n
        extra = {"lambda": s.lam, "p": s.p}
        try:
            traj, history = evolve(u0, s, store_every=stride)
        except BlowUpDetected as exc:
            files = ["diagnostics.csv"]
            atomic_write_text(out / "diagnostics.csv", diagnostics_csv(exc.history))
            if exc.last_field is not None:
                saved = save_trajectory(out / "trajectory", [exc.last_field], [exc.t_last], h, extra)
                files += [f"trajectory/{f}" for f in saved]
            status = {"kind": "blowup", "t": exc.t_last, "norm_ratio": _json_num(exc.ratio)}
            _write_manifest(out, cfg, started, status, files)
            log.warning("%s", exc)
            return EXIT_BLOWUP
        atomic_write_text(out / "diagnostics.csv", diagnostics_csv(history))
        if cfg.snapshot_stride:
            slices, times = traj.slices, traj.times
        else:
            slices, times = traj.slices[-1:], traj.times[-1:]
        files = ["diagnostics.csv"] + [
            f"trajectory/{f}" for f in save_trajectory(out / "trajectory", slices, times, traj.dt, extra)
        ]
        _write_manifest(out, cfg, started, {"kind": "completed"}, files)
    return EXIT_OK


def _json_num(x: float):
    return x if np.isfinite(x) else str(x)


def cmd_picard(cfg: ScenarioConfig, out_override: str | None = None) -> int:
    started = time.time()
    if cfg.solver.scheme != "picard":
        raise ConfigError("the picard command needs solver.scheme = 'picard'")
    out = _prepare_out(cfg, out_override)
    with FileLock(str(out / ".nls-lab.lock"), timeout=30):
        u0 = cfg.initial_field()
        rep = picard_solve(u0, cfg.solver)
        atomic_write_text(out / "picard_report.json", rep.to_json())
        traj = rep.final
        stride = cfg.snapshot_stride or (len(traj) - 1)
        keep = list(range(0, len(traj), stride))
        files = ["picard_report.json"] + [
            f"trajectory/{f}"
            for f in save_trajectory(
                out / "trajectory",
                [traj.slices[i] for i in keep],
                [traj.times[i] for i in keep],
                traj.dt * stride,
                {"lambda": cfg.solver.lam, "p": cfg.solver.p},
            )
        ]
        status = {"kind": "completed" if rep.converged else "nonconverged", "iterates_used": rep.iterates_used}
        _write_manifest(out, cfg, started, status, files)
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


def run_check(which: str, cfg: ScenarioConfig, seed: int, fault_inject: bool = False) -> vf.CheckResult:
    grid = cfg.grid
    if which == "decay":
        prop = vf.corrupted_propagator() if fault_inject else vf.free_propagate
        return vf.check_decay(grid, seed, propagate=prop)
    if which == "strichartz":
        return vf.check_strichartz(cfg.initial_field(), cfg.solver)
    if which == "retarded":
        return vf.check_retarded(cfg.initial_field(), cfg.solver)
    if which == "lipschitz":
        return vf.check_lipschitz(grid, seed, cfg.solver.lam or 1.0, max(cfg.solver.p, 1.0))
    if which == "pointwise":
        return vf.check_pointwise(seed)
    if which == "conservation":
        return vf.check_conservation(cfg.initial_field(), replace(cfg.solver, scheme="strang"))
    if which == "admissible":
        extra = []
        if cfg.solver.strichartz_pair is not None:
            sp = cfg.solver.strichartz_pair
            extra.append(((sp.q, sp.r, sp.dim), True))
        return vf.check_admissible(extra)
    raise ConfigError(f"unknown check {which!r}; valid: {', '.join(vf.CHECKS)}")


def cmd_verify(cfg: ScenarioConfig, which: str, seed: int | None = None, out_override: str | None = None, fault_inject: bool = False) -> int:
    seed = cfg.seed if seed is None else seed
    res = run_check(which, cfg, seed, fault_inject)
    doc = {"check": which, "seed": seed, "all_satisfied": res.ok, "verdicts": [v.as_dict() for v in res.verdicts]}
    print(json.dumps(doc, indent=2))
    width = max(len(v.name) for v in res.verdicts)
    for v in res.verdicts:
        print(f"  {'PASS' if v.satisfied else 'FAIL'}  {v.name:<{width}}", file=sys.stderr)
    out = Path(out_override) if out_override else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / f"verify_{which}.json", json.dumps(doc, indent=2))
    if not res.ok:
        if res.counterexample is not None:
            write_snapshot(out / f"counterexample_{which}.nlsf", res.counterexample)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_export_csv(traj_dir: str | Path, observables: list[str], dest=None) -> int:
    d = Path(traj_dir)
    unknown = [o for o in observables if o not in OBSERVABLES]
    if unknown:
        log.error("unknown observable(s) %s; valid names: %s", ", ".join(unknown), ", ".join(OBSERVABLES))
        return EXIT_IO
    try:
        man = load_manifest(d)
    except (OSError, json.JSONDecodeError) as exc:
        log.error("cannot read trajectory manifest in %s: %s", d, exc)
        return EXIT_IO
    lines = [",".join(["t"] + observables)]
    if observables:
        lam, p = man.get("lambda", 0.0), man.get("p", 2.0)
        for entry in man["snapshots"]:
            path = d / entry["file"]
            if not path.exists():
                log.error("missing snapshot %s", path)
                return EXIT_IO
            try:
                u = read_snapshot(path)
            except SnapshotError as exc:
                log.error("corrupt snapshot %s: %s", path, exc)
                return EXIT_IO
            row = [_fmt(entry["t"])] + [_fmt(OBSERVABLES[o](u, lam, p)) for o in observables]
            lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    if dest is None:
        sys.stdout.write(text)
    else:
        atomic_write_text(Path(dest), text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nls-lab", description="Spectral laboratory for i u_t + Lap u = lam |u|^p u")
    ap.add_argument("command", choices=["evolve", "picard", "verify", "export"])
    ap.add_argument("--config", help="scenario file (flat TOML sections)")
    ap.add_argument("--which", choices=vf.CHECKS, help="check to run (verify)")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, help="seed for randomized checks")
    ap.add_argument("--dir", help="trajectory directory (export); default <out>/trajectory")
    ap.add_argument("--observables", default="mass", help="comma-separated observables (export)")
    ap.add_argument("--csv", help="export destination file; default stdout")
    ap.add_argument("--fault-inject", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "export":
            if args.dir:
                traj_dir = Path(args.dir)
            elif args.config or args.out:
                base = Path(args.out) if args.out else load_config(args.config).out_dir
                traj_dir = base / "trajectory"
            else:
                log.error("export needs --dir, --out or --config")
                return EXIT_IO
            obs = [o.strip() for o in args.observables.split(",") if o.strip()]
            return cmd_export_csv(traj_dir, obs, args.csv)
        if not args.config:
            log.error("--config is required for %s", args.command)
            return EXIT_IO
        cfg = load_config(args.config)
        if args.command == "evolve":
            return cmd_evolve(cfg, args.out)
        if args.command == "picard":
            return cmd_picard(cfg, args.out)
        if not args.which:
            log.error("verify needs --which (%s)", ", ".join(vf.CHECKS))
            return EXIT_IO
        return cmd_verify(cfg, args.which, args.seed, args.out, args.fault_inject)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (OSError, Timeout) as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO
    except Exception:
        log.exception("internal failure")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
