"""Command-line front end: analyze, reduce, simulate, certify, sweep.

Exit codes: 0 success, 1 a certificate check reported violated hypotheses,
2 usage or runtime errors.  All data outputs are byte-reproducible for a
fixed seed (no timestamps; floats at full precision).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import (VIOLATED, check_blowup_certificate,
                           check_global_solvability, check_lagrange_stability,
                           SamplerConfig)
from .errors import DaekitError
from .implicit import consistent_initialize
from .integrate import integrate_cascade, integrate_first
from .pencil import analysis_report
from .problems import LoadedProblem, load_builtin, load_problem
from .projectors import verify_projectors
from .reduction import (StructureTag, check_structure, reduce_cascade,
                        reduce_first)


def _load(spec: str) -> LoadedProblem:
    path = Path(spec)
    if path.exists():
        return load_problem(path)
    name = spec[:-5] if spec.endswith(".json") else spec
    return load_builtin(name)


def _dump_json(data: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _apply_overrides(problem: LoadedProblem, args) -> None:
    if args.tmax is not None:
        problem.options.t_max = args.tmax
    if args.tol is not None:
        problem.options.rtol = args.tol
        problem.options.atol = args.tol * 1e-2


def _pick_approach(problem: LoadedProblem, requested: str) -> str:
    if requested != "auto":
        return requested
    structured = problem.dae.field.structure_tag is not StructureTag.GENERAL
    return "cascade" if structured and problem.dae.projectors.nu >= 2 \
        else "first"


def _x_guess(problem: LoadedProblem, override) -> np.ndarray:
    guess = problem.x_guess.copy()
    if override:
        vals = [float(v) for v in override.split(",")]
        if len(vals) > guess.size:
            raise DaekitError(f"--x0 has {len(vals)} entries for dimension "
                              f"{guess.size}")
        guess[:len(vals)] = vals
    return guess


def _simulate_once(problem: LoadedProblem, guess, approach: str):
    dae = problem.dae
    if approach == "cascade":
        reduced = reduce_cascade(dae, waive_structure_check=True)
        x01 = dae.projectors.p1 @ guess
        return integrate_cascade(reduced, problem.options.t0, x01,
                                 problem.options)
    reduced = reduce_first(dae)
    x0 = consistent_initialize(reduced, problem.options.t0, guess)
    return integrate_first(reduced, problem.options.t0, x0, problem.options)


def _trajectory_json(traj) -> dict:
    return {
        "times": traj.times.tolist(),
        "states": traj.states.tolist(),
        "w_norms": [float(np.linalg.norm(w)) for w in traj.w_states],
        "residuals": traj.residuals.tolist(),
        "termination": traj.termination.to_dict(),
        "stats": traj.stats,
    }


def cmd_analyze(args) -> int:
    problem = _load(args.problem)
    dae = problem.dae
    report = analysis_report(dae.pencil, dae.canonical, dae.dual)
    report["name"] = problem.name
    report["projector_residuals"] = verify_projectors(dae.projectors,
                                                      dae.pencil)
    out = Path(args.out) / f"{problem.name}_analysis.json"
    _dump_json(report, out)
    print(f"{problem.name}: index={report['index']} "
          f"kernel_dim={report['kernel_dimension']} "
          f"multiplicities={report['multiplicities']} -> {out}")
    return 0


def cmd_reduce(args) -> int:
    problem = _load(args.problem)
    _apply_overrides(problem, args)
    dae = problem.dae
    approach = _pick_approach(problem, args.approach)
    nu = dae.projectors.nu
    summary = {
        "name": problem.name,
        "approach": approach,
        "index": nu,
        "equations": max(2 * nu - 1, 1),
        "kernel_dimension": dae.projectors.n,
        "structure_tag": dae.field.structure_tag.value,
    }
    if dae.field.structure_tag is not StructureTag.GENERAL:
        report = check_structure(dae)
        summary["structure_check"] = {
            "passed": report.passed,
            "worst_projection": report.worst_projection,
            "worst_dependence": report.worst_dependence,
        }
    out = Path(args.out) / f"{problem.name}_reduction.json"
    _dump_json(summary, out)
    print(f"{problem.name}: approach={approach} equations={summary['equations']}"
          f" -> {out}")
    return 0


def cmd_simulate(args) -> int:
    problem = _load(args.problem)
    _apply_overrides(problem, args)
    approach = _pick_approach(problem, args.approach)
    guess = _x_guess(problem, args.x0)
    traj = _simulate_once(problem, guess, approach)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        data_path = out_dir / f"{problem.name}_trajectory.json"
        _dump_json(_trajectory_json(traj), data_path)
    else:
        data_path = out_dir / f"{problem.name}_trajectory.csv"
        traj.to_csv(data_path)
    term_path = out_dir / f"{problem.name}_termination.json"
    traj.termination_json(term_path)
    term = traj.termination
    msg = term.kind
    if term.kind == "blowup_suspected":
        msg += f" (escape estimate {term.t_escape_estimate:.6g})"
    print(f"{problem.name}: {msg}, {traj.times.size} points -> {data_path}")
    return 0


def cmd_certify(args) -> int:
    problem = _load(args.problem)
    _apply_overrides(problem, args)
    if problem.certificate is None:
        raise DaekitError(f"problem '{problem.name}' declares no certificate")
    kind = problem.certificate["kind"]
    lyap = problem.lyapunov()
    comp = problem.comparison()
    approach = _pick_approach(problem, args.approach)
    dae = problem.dae
    reduced = reduce_cascade(dae, waive_structure_check=True) \
        if approach == "cascade" else reduce_first(dae)
    sampler = SamplerConfig(seed=args.seed)
    if kind == "blowup":
        report = check_blowup_certificate(reduced, lyap, comp, sampler)
    elif kind == "lagrange_stability":
        report = check_lagrange_stability(reduced, lyap, comp, sampler)
    elif kind == "global_solvability_norm":
        report = check_global_solvability(reduced, lyap, comp, sampler,
                                          mode="norm_lipschitz")
    else:
        report = check_global_solvability(reduced, lyap, comp, sampler)
    out = Path(args.out) / f"{problem.name}_certificate.json"
    _dump_json(report.to_dict(), out)
    print(f"{problem.name}: {kind} verdict={report.verdict} "
          f"({report.samples_checked} samples, "
          f"{len(report.violations)} violations) -> {out}")
    return 1 if report.verdict == VIOLATED else 0


def cmd_sweep(args) -> int:
    problem = _load(args.problem)
    _apply_overrides(problem, args)
    if not problem.sweep_values:
        raise DaekitError(f"problem '{problem.name}' declares no sweep block")
    approach = _pick_approach(problem, args.approach)
    threads = int(os.environ.get("DAEKIT_THREADS", "0")) or None

    def run(idx_value):
        idx, value = idx_value
        guess = problem.x_guess.copy()
        guess[:value.size] = value
        traj = _simulate_once(problem, guess, approach)
        return idx, guess, traj

    jobs = list(enumerate(problem.sweep_values))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = sorted(pool.map(run, jobs), key=lambda r: r[0])

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["index," + ",".join(f"x0_{k + 1}" for k in
                                 range(problem.x_guess.size))
             + ",termination,escape_estimate,final_norm"]
    for idx, guess, traj in results:
        term = traj.termination
        esc = "" if term.t_escape_estimate is None \
            else f"{term.t_escape_estimate:.17g}"
        fin = f"{float(np.linalg.norm(traj.w_states[-1])):.17g}"
        lines.append(f"{idx}," + ",".join(f"{v:.17g}" for v in guess)
                     + f",{term.kind},{esc},{fin}")
        if args.format == "json":
            _dump_json(_trajectory_json(traj),
                       out_dir / f"{problem.name}_run{idx}.json")
        else:
            traj.to_csv(out_dir / f"{problem.name}_run{idx}.csv")
    summary = out_dir / f"{problem.name}_sweep.csv"
    summary.write_text("\n".join(lines) + "\n")
    print(f"{problem.name}: swept {len(results)} initial points -> {summary}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="daekit",
        description="Analyze, reduce, simulate and certify semilinear "
                    "differential-algebraic systems.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("problem", help="problem file or bundled problem name")
        p.add_argument("--out", default="daekit-out", help="output directory")
        p.add_argument("--tol", type=float, default=None,
                       help="override step-error tolerance (rtol; atol=tol/100)")
        p.add_argument("--tmax", type=float, default=None,
                       help="override the integration horizon")
        p.add_argument("--seed", type=int, default=42,
                       help="seed for samplers and regular-point draws")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--approach", choices=["auto", "first", "cascade"],
                       default="auto")

    for name, fn in (("analyze", cmd_analyze), ("reduce", cmd_reduce),
                     ("simulate", cmd_simulate), ("certify", cmd_certify),
                     ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        common(p)
        if name in ("simulate",):
            p.add_argument("--x0", default=None,
                           help="comma-separated override of the leading "
                                "initial-guess entries")
        p.set_defaults(fn=fn)
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DaekitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:  # pragma: no cover - console entry point
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
