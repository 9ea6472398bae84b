"""
Command-line front end. Each subcommand runs one experiment, writes its array
data as CSV and a JSON sidecar carrying the run manifest into --out-dir.

Units: hbar = 1 and m = 1/2 by default, so hbar^2/2m = 1 and the Dirichlet
levels of a box of width l read n^2 pi^2 / l^2.
"""
import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from boundary import parse_angle, parse_boundary, reflection_phase, wall_bound_state
from carpet import (
    GOLDEN_TAU,
    XI_INTERVAL,
    CarpetSeries,
    box_counting_dimension,
    plateau_statistics,
    revival_fidelity,
    theta_on_grid,
)
from config import APP_VERSION, UNIT_CONVENTION, load_settings
from errors import ConvergenceError, DomainError, QWallsError, StepError
from forms import compose_diagnostics
from logging_config import get_logger, set_level
from models import GridState, Interval, PhysicalConfig
from movingwalls import build_galerkin, from_expressions, mode_state, propagate
from spectral import lowest_modes, solve_airy_levels, solve_spectrum, write_spectrum_csv
from trotter import convergence_report, prepare_alternation, smooth_bump

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_BAD_ARGS = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4


class RunManifest(BaseModel):
    subcommand: str
    parameters: Dict[str, Any]
    units: Dict[str, Any] = Field(default_factory=lambda: dict(UNIT_CONVENTION))
    version: str = APP_VERSION
    outputs: List[str] = Field(default_factory=list)


class EvolveSpec(BaseModel):
    """Trajectory file of the ``evolve`` subcommand; a missing l0 falls back to --l0"""
    l0: Optional[float] = Field(default=None, gt=0.0)
    M: int = Field(default=32, ge=2)
    dt: float = Field(default=1e-3, gt=0.0)
    t_end: float = Field(default=1.0, gt=0.0)
    l: str = "1"
    d: str = "0"
    initial_mode: int = Field(default=1, ge=1)


def _physical(args) -> PhysicalConfig:
    return PhysicalConfig(hbar=args.hbar, mass=args.mass, l0=args.l0)


def _parameters(args) -> Dict[str, Any]:
    skip = {"handler"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k not in skip}


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _finish(args, results: Dict[str, Any], outputs: List[Path]) -> None:
    sidecar = args.out_dir / f"{args.command}.json"
    manifest = RunManifest(
        subcommand=args.command,
        parameters=_parameters(args),
        outputs=[str(p) for p in outputs + [sidecar]],
    )
    with open(sidecar, "w", encoding="utf-8", newline="\n") as handle:
        json.dump({"manifest": manifest.model_dump(mode="json"), "results": results}, handle, indent=2)
        handle.write("\n")


def _parse_tau(text: str):
    token = text.strip().lower()
    if token == "golden":
        return GOLDEN_TAU, None
    try:
        if "/" in token:
            value = Fraction(token)
            return float(value), value.denominator
        return float(token), None
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"cannot read tau from {text!r}") from exc


def cmd_spectrum(args) -> Dict[str, Any]:
    U = parse_boundary(args.bc)
    interval = Interval(a=args.a, b=args.a + args.l)
    config = _physical(args)
    if args.count:
        modes = lowest_modes(U, interval, config, args.count)
    else:
        modes = solve_spectrum(U, interval, config, args.emax)
    path = args.out_dir / "spectrum.csv"
    write_spectrum_csv(modes, path)
    energies = [m.energy for m in modes]
    for i, e in enumerate(energies):
        print(f"{i:4d}  {e!r}")
    _finish(args, {"bc": U.to_json_dict(), "energies": energies}, [path])
    return {"energies": energies}


def cmd_carpet(args) -> Dict[str, Any]:
    tau, denominator = _parse_tau(args.tau)
    series = CarpetSeries(n_max=args.n_max, l=args.l)
    xi, values = theta_on_grid(series, tau, args.points)
    intensity = np.abs(values) ** 2
    state = GridState.from_samples(XI_INTERVAL, intensity)

    results: Dict[str, Any] = {
        "tau": tau,
        "n_max": series.n_max,
        "dimension_estimate": None,
        "fidelity": revival_fidelity(series, tau),
        "tail_bound": series.tail_bound,
    }
    q = args.plateaus or denominator
    if q:
        results["plateaus"] = plateau_statistics(state, q).model_dump()
    if args.dimension:
        results["box_count"] = box_counting_dimension(state).model_dump()
        results["dimension_estimate"] = results["box_count"]["dimension"]

    path = args.out_dir / "carpet.csv"
    _write_csv(path, ["xi", "re_theta", "im_theta", "intensity"],
               zip(xi.tolist(), values.real.tolist(), values.imag.tolist(), intensity.tolist()))
    print(f"tau={tau!r} fidelity={results['fidelity']:.12f}")
    if "plateaus" in results:
        print(f"plateaus q={q}: ratio={results['plateaus']['ratio']:.4g} single={results['plateaus']['single_plateau']}")
    if "box_count" in results:
        print(f"box dimension {results['box_count']['dimension']:.4f}")
    _finish(args, results, [path])
    return results


def _read_spec(text: str) -> EvolveSpec:
    raw = text.strip()
    if not raw.startswith("{"):
        raw = Path(raw).read_text(encoding="utf-8")
    try:
        return EvolveSpec.model_validate_json(raw)
    except ValueError as exc:
        raise ValueError(f"invalid trajectory spec: {exc}") from exc


def cmd_evolve(args) -> Dict[str, Any]:
    spec = _read_spec(args.spec)
    config = PhysicalConfig(hbar=args.hbar, mass=args.mass, l0=args.l0 if spec.l0 is None else spec.l0)
    traj = from_expressions(spec.l, spec.d)
    ops = build_galerkin(config, spec.M)
    run = propagate(ops, traj, mode_state(ops, spec.initial_mode), 0.0, spec.t_end, spec.dt,
                    record_every=args.record_every, rate_check=args.rate_check)

    path = args.out_dir / "evolve.csv"
    _write_csv(path, ["t", "norm", "energy", "lhs_rate", "rhs_rate"],
               ((s.t, s.norm, s.energy, "" if s.lhs_rate is None else s.lhs_rate,
                 "" if s.rhs_rate is None else s.rhs_rate) for s in run.samples))
    drift = max(abs(s.norm - 1.0) for s in run.samples)
    print(f"{len(run.samples)} samples, dt={run.dt!r}, max norm drift {drift:.3e}")
    results = {"spec": spec.model_dump(), "l0": config.l0, "dt": run.dt, "max_norm_drift": drift}
    _finish(args, results, [path])
    return results


def cmd_trotter(args) -> Dict[str, Any]:
    U, V = parse_boundary(args.bc_u), parse_boundary(args.bc_v)
    interval = Interval(a=0.0, b=args.l)
    n_list = [int(tok) for tok in args.n_list.split(",") if tok.strip()]
    settings = load_settings()
    setup = prepare_alternation(U, V, interval, _physical(args), n_modes=args.modes,
                                oversample=args.oversample, threads=settings.threads)
    report = convergence_report(setup, args.t, n_list, setup.project(smooth_bump(interval)),
                                threads=settings.threads)

    path = args.out_dir / "trotter.csv"
    _write_csv(path, ["N", "error", "norm_deficit", "target_deficit"],
               ((r.n_pairs, r.error, r.norm_deficit, r.target_deficit) for r in report.rows))
    for row in report.rows:
        print(f"N={row.n_pairs:6d}  error={row.error:.6e}  deficit={row.norm_deficit:.3e}")
    results = {
        "W": report.W.to_json_dict(),
        "fitted_order": report.fitted_order,
        "isometry_defects": report.isometry_defects,
        "projection_deficits": report.projection_deficits,
        "transfer_defect": report.transfer_defect,
    }
    _finish(args, results, [path])
    return results


def cmd_compose(args) -> Dict[str, Any]:
    report = compose_diagnostics(parse_boundary(args.u), parse_boundary(args.v))
    results = {
        "W": report.result.to_json_dict(),
        "constraint_dims": report.constraint_dims,
        "joint_constraint_dim": report.joint_constraint_dim,
        "compressed_u": [[[z.real, z.imag] for z in row] for row in report.compressed_u],
        "compressed_v": [[[z.real, z.imag] for z in row] for row in report.compressed_v],
        "w2": None if report.w2 is None else [report.w2.real, report.w2.imag],
    }
    print(json.dumps(results["W"]))
    print(f"constraints {report.constraint_dims} -> {report.joint_constraint_dim}", file=sys.stderr)
    _finish(args, results, [])
    return results


def cmd_airy(args) -> Dict[str, Any]:
    levels = solve_airy_levels(args.levels)
    for eps in levels:
        print(f"{eps:.6g}")
    _finish(args, {"levels": levels}, [])
    return {"levels": levels}


def cmd_reflect(args) -> Dict[str, Any]:
    try:
        angle = parse_angle(args.alpha)
    except ValueError as exc:
        raise DomainError(f"bad Robin angle {args.alpha!r}") from exc
    beta = reflection_phase(angle, args.k, args.l0)
    kappa = wall_bound_state(angle, args.l0)
    print(f"beta={beta!r}")
    if kappa is not None:
        print(f"bound state kappa={kappa!r}")
    results = {"alpha": angle, "k": args.k, "beta": beta, "bound_state_kappa": kappa}
    _finish(args, results, [])
    return results


def build_parser(settings=None) -> argparse.ArgumentParser:
    settings = settings or load_settings()
    units = argparse.ArgumentParser(add_help=False)
    group = units.add_argument_group("units", "defaults hbar=1, m=1/2 give hbar^2/2m = 1")
    group.add_argument("--hbar", type=float, default=1.0, help="reduced Planck constant (default 1)")
    group.add_argument("--mass", type=float, default=0.5, help="particle mass (default 1/2)")
    group.add_argument("--l0", type=float, default=1.0, help="reference length of the boundary condition (default 1)")
    group.add_argument("--out-dir", type=Path, default=settings.output_dir,
                       help=f"output directory (default {settings.output_dir}, env QWALLS_OUTPUT_DIR)")

    parser = argparse.ArgumentParser(prog="qwalls", description="Free particle in a box under U(2) boundary conditions")
    parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[units], help="eigenvalues for one boundary condition")
    p.add_argument("--bc", required=True, help="named condition (dirichlet, robin:pi/2, ...) or JSON")
    p.add_argument("--a", type=float, default=0.0, help="left wall position")
    p.add_argument("--l", type=float, default=1.0, help="box width")
    p.add_argument("--emax", type=float, default=100.0, help="energy cutoff")
    p.add_argument("--count", type=int, default=0, help="lowest COUNT modes instead of an energy cutoff")
    p.set_defaults(handler=cmd_spectrum)

    p = sub.add_parser("carpet", parents=[units], help="theta-function profile of the flat state")
    p.add_argument("--tau", default="golden", help="rescaled time 2 pi hbar t/(m l^2): float, p/q or 'golden'")
    p.add_argument("--n-max", type=int, default=2048)
    p.add_argument("--points", type=int, default=2 ** 14 + 1)
    p.add_argument("--l", type=float, default=1.0, help="box width")
    p.add_argument("--plateaus", type=int, default=0, help="run the plateau test with this denominator")
    p.add_argument("--dimension", action="store_true", help="estimate the box-counting dimension")
    p.set_defaults(handler=cmd_carpet)

    p = sub.add_parser("evolve", parents=[units], help="Crank-Nicolson run between moving walls")
    p.add_argument("--spec", required=True, help='JSON or a JSON file: {"l0", "M", "dt", "t_end", "l", "d"}')
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--rate-check", action="store_true", help="record both sides of the energy-rate identity")
    p.set_defaults(handler=cmd_evolve)

    p = sub.add_parser("trotter", parents=[units], help="alternate two boundary conditions")
    p.add_argument("--bc-u", required=True)
    p.add_argument("--bc-v", required=True)
    p.add_argument("--t", type=float, default=0.1, help="time spent under each condition")
    p.add_argument("--n-list", default="8,32,128,256", help="comma-separated numbers of switching pairs")
    p.add_argument("--modes", type=int, default=64, help="reference modes of the composed condition")
    p.add_argument("--oversample", type=int, default=8)
    p.add_argument("--l", type=float, default=1.0, help="box width")
    p.set_defaults(handler=cmd_trotter)

    p = sub.add_parser("compose", parents=[units], help="composed condition W = star(U, V)")
    p.add_argument("--u", required=True)
    p.add_argument("--v", required=True)
    p.set_defaults(handler=cmd_compose)

    p = sub.add_parser("airy", parents=[units], help="levels eps = E/(m g l) of the accelerating box")
    p.add_argument("--levels", type=int, default=4)
    p.set_defaults(handler=cmd_airy)

    p = sub.add_parser("reflect", parents=[units], help="reflection phase at a Robin wall")
    p.add_argument("--alpha", required=True, help="Robin angle, e.g. pi/2")
    p.add_argument("--k", type=float, required=True, help="wavenumber")
    p.set_defaults(handler=cmd_reflect)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    settings = load_settings()
    set_level(settings.log_level)
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        args.handler(args)
    except (ConvergenceError, StepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (QWallsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    logger.debug("%s finished", args.command)
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
