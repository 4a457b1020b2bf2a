"""Command-line front end.

Exit status: 0 pass, 1 certification failed, 2 invalid configuration,
3 construction error.  Data files carry no timestamps; those go to
``manifest.json``.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import DimensionCap, MemKernelError
from .io import (load_kernel, read_trajectory_csv, save_kernel, write_json,
                 write_populations_csv, write_states_csv, write_trajectory_csv)
from .propagate import volterra_solve
from .scenario import (ConfigError, Scenario, build, certify_scenario, kernel_notes, load_config,
                       parse_scenario, parse_tol_overrides, propagate, run_classical)
from .verify import certify

EXIT_OK, EXIT_CERT, EXIT_CONFIG, EXIT_BUILD = 0, 1, 2, 3
QUANTUM_KINDS = ("markov", "scalar_kernel", "dephasing_kernel", "hadamard_family",
                 "decoherence", "reduction")


class _Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, args, command, argv):
        self.args = args
        self.argv = list(argv)
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.notes = []
        self.config = None
        self.started = datetime.now(timezone.utc).isoformat()
        self.t0 = time.perf_counter()

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def finish(self, code):
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config_path": getattr(self.args, "config", None),
            "config": self.config,
            "outputs": self.files,
            "notes": self.notes,
            "exit_code": code,
            "versions": {"memkernel": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "started": self.started,
            "wall_time_s": time.perf_counter() - self.t0,
        }
        write_json(self.out / "manifest.json", manifest)
        return code


def _scenario(args, run) -> Scenario:
    cfg = load_config(args.config)
    run.config = cfg
    return parse_scenario(cfg, parse_tol_overrides(args.tol_override), args.stride)


def _write_traj(run, scn, traj):
    write_trajectory_csv(run.path("trajectory.csv"), traj)
    if scn is not None and scn.rho0 is not None:
        write_states_csv(run.path("states.csv"), traj.times, traj.states(scn.rho0))


def _certify(run, scn, traj):
    rep = certify_scenario(scn, traj)
    rep.notes = list(run.notes)
    write_json(run.path("report.json"), rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_CERT


def _quantum(run, scn, force_gain, stop_after_kernel=False):
    built = build(scn, force_gain=force_gain)
    run.notes.extend(built.notes)
    if built.gain is not None:
        write_json(run.path("gain.json"), built.gain.to_dict())
    if built.kernel is None and built.Q is None:
        write_json(run.path("report.json"), {"verdict": "fail", "notes": run.notes})
        return EXIT_CERT
    if built.kernel is not None:
        # propagate from the persisted artifact so split and end-to-end runs agree bit for bit
        save_kernel(run.path("kernel.json"), built.kernel, scn.grid)
        if stop_after_kernel:
            return EXIT_OK
        K, _ = load_kernel(run.out / "kernel.json")
        run.notes.extend(kernel_notes(K))
        traj = volterra_solve(K, scn.grid)
    else:
        if stop_after_kernel:
            raise MemKernelError("no time-domain kernel for this scenario")
        traj = propagate(scn, built)
    _write_traj(run, scn, traj)
    return _certify(run, scn, traj)


def cmd_run(args, run):
    scn = _scenario(args, run)
    if scn.kind == "classical":
        return _classical(run, scn)
    return _quantum(run, scn, args.force_gain)


def cmd_build_kernel(args, run):
    scn = _scenario(args, run)
    if scn.kind not in QUANTUM_KINDS:
        raise ConfigError(f"build-kernel does not apply to kind '{scn.kind}'")
    return _quantum(run, scn, args.force_gain, stop_after_kernel=True)


def cmd_propagate(args, run):
    K, grid = load_kernel(args.kernel)
    scn = None
    if args.config:
        scn = _scenario(args, run)
        if scn.grid != grid:
            raise ConfigError("kernel artifact grid differs from the config grid")
        run.notes.extend(kernel_notes(K))
    traj = volterra_solve(K, grid)
    _write_traj(run, scn, traj)
    if scn is None:
        return EXIT_OK
    return _certify(run, scn, traj)


def cmd_certify(args, run):
    traj = read_trajectory_csv(args.trajectory)
    tols = parse_tol_overrides(args.tol_override)
    s_list = [float(x) for x in args.moments.split(",")] if args.moments else None
    rep = certify(traj, tol=tols.get("cp", 1e-8), stride=args.stride or 1, s_list=s_list,
                  moment_tol=tols.get("moment", 1e-6), accept_tail=args.accept_tail)
    rep.tolerances["trace"] = tols.get("trace", rep.tolerances["trace"])
    write_json(run.path("report.json"), rep.to_dict())
    return EXIT_OK if rep.passed else EXIT_CERT


def _classical(run, scn):
    _, P, report = run_classical(scn)
    write_populations_csv(run.path("populations.csv"), scn.grid.times, P)
    write_json(run.path("report.json"), report)
    return EXIT_OK if report["verdict"] == "pass" else EXIT_CERT


def cmd_classical(args, run):
    scn = _scenario(args, run)
    if scn.kind != "classical":
        raise ConfigError(f"classical expects kind = 'classical', got '{scn.kind}'")
    return _classical(run, scn)


def cmd_reduce(args, run):
    scn = _scenario(args, run)
    if scn.kind not in ("reduction", "decoherence"):
        raise ConfigError(f"reduce expects kind 'reduction' or 'decoherence', got '{scn.kind}'")
    return _quantum(run, scn, args.force_gain)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memkernel",
                                description="Build, propagate and certify memory-kernel dynamics.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="scenario TOML file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--tol-override", action="append", metavar="KEY=VAL",
                        help="override a tolerance (cp, trace, moment, gain, prob)")
        sp.add_argument("--stride", type=int, default=None, help="certify every N-th node")
        sp.add_argument("--force-gain", action="store_true",
                        help="assemble the kernel even if the gain condition fails")

    common(sub.add_parser("run", help="full pipeline for one scenario"))
    common(sub.add_parser("build-kernel", help="persist the kernel as JSON"))
    sp = sub.add_parser("propagate", help="propagate a persisted kernel")
    sp.add_argument("--kernel", required=True, help="kernel artifact from build-kernel")
    sp.add_argument("--config", help="scenario for initial state and certification")
    common(sp, config=False)
    sp = sub.add_parser("certify", help="certify a persisted trajectory CSV")
    sp.add_argument("--trajectory", required=True)
    sp.add_argument("--moments", help="comma-separated s values for the moment hierarchy")
    sp.add_argument("--accept-tail", action="store_true",
                    help="allow moments on horizons with a non-negligible tail")
    common(sp, config=False)
    common(sub.add_parser("classical", help="classical master equation scenario"))
    common(sub.add_parser("reduce", help="reduction or decoherence scenario"))
    return p


COMMANDS = {"run": cmd_run, "build-kernel": cmd_build_kernel, "propagate": cmd_propagate,
            "certify": cmd_certify, "classical": cmd_classical, "reduce": cmd_reduce}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    run = _Run(args, args.command, argv)
    try:
        code = COMMANDS[args.command](args, run)
    except (ConfigError, DimensionCap) as exc:
        print(f"memkernel: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except (MemKernelError, np.linalg.LinAlgError) as exc:
        print(f"memkernel: {type(exc).__name__}: {exc}", file=sys.stderr)
        run.notes.append(f"{type(exc).__name__}: {exc}")
        code = EXIT_BUILD
    run.finish(code)
    if code == EXIT_CERT:
        print("memkernel: certification failed", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
