"""Command-line entry point: ``cpgdist <subcommand> [options]``.

Exit codes: 0 success, 1 validation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import fasta, model, studies
from .estimators import CSV_HEADER, InvalidLetter, ObsOutOfRange, estimate_time
from .kernels import ANCESTOR, MODES
from .simulator import BACKEND, ExperimentSpec, run_experiment

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _params(args) -> model.SubstitutionParams:
    if args.params and args.r is not None:
        raise UsageError("give either --params or --r, not both")
    if args.params:
        return model.read_params(args.params)
    return model.jc_cpg_params(10.0 if args.r is None else args.r)


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    params = _params(args)
    if not args.out:
        raise UsageError("simulate needs --out")
    spec = ExperimentSpec(params, args.n, args.t, args.mode, args.burn_in, args.seed)
    pair = run_experiment(spec)
    fasta.write_fasta(pair, args.out, args.wrap)
    fasta.write_metadata(args.out + ".meta", params=params.as_mapping(), t=args.t, n=args.n,
                         mode=args.mode, seed=args.seed, burn_in=args.burn_in)
    return EXIT_OK


def cmd_estimate(args) -> int:
    params = _params(args)
    mode = args.mode
    meta_path = args.alignment + ".meta"
    if mode is None:
        mode = fasta.read_metadata(meta_path)["mode"] if os.path.exists(meta_path) else ANCESTOR
    pair = fasta.read_fasta(args.alignment, mode)
    letters = args.letter or (["C", "A"] if params.jc_cpg_r is not None else ["C"])
    lines = [f"# alignment {args.alignment}: N={pair.n}, mode={mode}"]
    rows = [CSV_HEADER]
    for x in letters:
        est = estimate_time(pair, params, x, epsilon=args.epsilon)
        if est.ci_available:
            lines.append(f"# T_{x} = {est.T:.6g}, {100 * (1 - args.epsilon):g}% CI [{est.ci_low:.6g}, {est.ci_high:.6g}]")
        else:
            lines.append(f"# T_{x} = {est.T:.6g}, CI unavailable (kappa={est.kappa_obs:.3g}, nu={est.nu_obs:.3g})")
        rows.append(est.csv())
    _emit("\n".join(lines + rows) + "\n", args.out)
    return EXIT_OK


def cmd_curve(args) -> int:
    if args.params:
        raise UsageError("curve is defined for JC+CpG; use --r")
    r = 10.0 if args.r is None else args.r
    ts = studies.t_grid(args.t_min, args.t_max, args.step)
    _emit(studies.format_curve(studies.curve_rows(r, ts)), args.out)
    return EXIT_OK


def cmd_scan(args) -> int:
    ts = studies.t_grid(args.t_min, args.t_max, args.step)
    results = studies.scan(ts)
    total = sum(res.violations for res in results)
    lines = [studies.SCAN_HEADER] + [res.line() for res in results]
    lines.append(f"# total strict-decrease violations: {total} (numerical evidence only)")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_coverage(args) -> int:
    params = _params(args)
    modes = [args.mode] if args.mode else list(MODES)
    letters = args.letter or (["C", "A"] if params.jc_cpg_r is not None else ["C"])
    lines = [studies.COVERAGE_HEADER]
    for mode in modes:
        for res in studies.coverage(params, args.n, args.t, mode, letters, args.epsilon, args.replicates,
                                    args.seed, args.burn_in, args.jobs):
            lines.append(res.line())
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    checks = studies.validate()
    lines = [c.line() for c in checks]
    failed = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - failed}/{len(checks)} checks passed (simulation backend: {BACKEND})")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpgdist", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model_flags=True):
        if model_flags:
            p.add_argument("--params", help="key = value parameter file")
            p.add_argument("--r", type=float, help="JC+CpG rate (default 10)")
        p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("simulate", help="simulate an aligned pair")
    common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--t", type=float, default=0.2)
    p.add_argument("--mode", choices=MODES, default=ANCESTOR)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--wrap", type=int, default=0, help="FASTA line width (0: no wrapping)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate elapsed or divergence time")
    common(p)
    p.add_argument("alignment")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--letter", choices=("C", "A"), action="append")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("curve", help="CSV of (C,C), (A,A), [C,C], [A,A]")
    common(p)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("scan", help="monotonicity scan over the explored parameter grid")
    common(p, model_flags=False)
    p.add_argument("--t-min", type=float, default=0.0)
    p.add_argument("--t-max", type=float, default=5.0)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("coverage", help="Monte Carlo coverage of the confidence intervals")
    common(p)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--t", type=float, default=0.2)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--letter", choices=("C", "A"), action="append")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--burn-in", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("validate", help="run the deterministic invariant suite")
    common(p, model_flags=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, model.InvalidParams, fasta.FastaError, InvalidLetter, ObsOutOfRange, ValueError, OSError) as err:
        print(f"cpgdist {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
