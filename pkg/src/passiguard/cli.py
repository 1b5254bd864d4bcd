"""Command-line front end.

Subcommands::

    passiguard run CONFIG [--out DIR] [--set KEY=VALUE ...] [--window S] [--dt S]
    passiguard suite [--out DIR] [--set KEY=VALUE ...]
    passiguard certify --case CASE --gamma G [--rho-target R] [--nu-target N]
    passiguard oracle --num "..." --den "..."

Exit codes are a stable contract: 0 success, 1 config/usage error,
2 divergence (run) or certification failure (certify) -- so CI can assert
an expected unstable run without parsing logs.  The default output
directory comes from ``PASSIGUARD_DEFAULT_OUT`` (falling back to ".").
"""

import argparse
import os
import sys
from pathlib import Path

from .linsys import (DEFAULT_SWEEP, FrequencySweep, RationalTF,
                     UnstableSystemError, l2_gain, tf_to_ss, true_indices_lti)
from .mmatrix import (certify, constraint_margins, design_ifofp, design_ifp,
                      design_ofp, design_passive)
from .scenario import ConfigError, load, load_bundled, bundled_names, report, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2


def _default_out() -> str:
    return os.environ.get("PASSIGUARD_DEFAULT_OUT", ".")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="passiguard",
        description="Closed-loop simulation with passivity-index fault "
                    "detection and controller reconfiguration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config", help="path to a scenario config file")
    _add_common(p_run)

    p_suite = sub.add_parser(
        "suite", help="run the three bundled scenarios, mitigation on and off")
    _add_common(p_suite)

    p_cert = sub.add_parser("certify", help="synthesize a wrapper and certify it")
    p_cert.add_argument("--case", required=True,
                        choices=["passive", "ofp", "ifp", "ifofp"])
    p_cert.add_argument("--gamma", type=float, required=True,
                        help="gain bound of the controller being wrapped")
    p_cert.add_argument("--rho-target", type=float, default=None)
    p_cert.add_argument("--nu-target", type=float, default=None)
    p_cert.add_argument("--controller-num", default="1.37 1.2467",
                        help="controller numerator coefficients")
    p_cert.add_argument("--controller-den", default="1 1.08",
                        help="controller denominator coefficients")

    p_or = sub.add_parser("oracle", help="grid passivity indices and gain of a TF")
    p_or.add_argument("--num", required=True, help="numerator coefficients")
    p_or.add_argument("--den", required=True, help="denominator coefficients")
    p_or.add_argument("--omega-min", type=float, default=DEFAULT_SWEEP.omega_min)
    p_or.add_argument("--omega-max", type=float, default=DEFAULT_SWEEP.omega_max)
    p_or.add_argument("--points-per-decade", type=int,
                      default=DEFAULT_SWEEP.points_per_decade)
    return parser


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="KEY=VALUE", help="config override (repeatable)")
    p.add_argument("--window", type=float, default=None,
                   help="estimator moving window in seconds")
    p.add_argument("--dt", type=float, default=None, help="solver step in seconds")


def _gather_overrides(args):
    overrides = list(args.overrides)
    if args.window is not None:
        overrides.append(f"estimator.window={args.window}")
    if args.dt is not None:
        overrides.append(f"solver.dt={args.dt}")
    return overrides


def _write_outputs(log, outdir: Path):
    outdir.mkdir(parents=True, exist_ok=True)
    name = log.metadata["scenario"]
    summary = report(log)
    log.to_csv(outdir / f"{name}.csv")
    log.events_to_csv(outdir / f"{name}.events.csv")
    with open(outdir / f"{name}.summary.txt", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(str(summary))
    return summary


def cmd_run(args) -> int:
    outdir = Path(args.out or _default_out())
    try:
        scenario = load(args.config, overrides=_gather_overrides(args))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log = run(scenario)
    summary = _write_outputs(log, outdir)
    print(summary)
    print(f"wrote {outdir}/{scenario.name}.{{csv,events.csv,summary.txt}}")
    return EXIT_DIVERGED if log.diverged else EXIT_OK


def cmd_suite(args) -> int:
    outdir = Path(args.out or _default_out())
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name in bundled_names():
        for mode in ("on", "off"):
            overrides = [f"scenario.name={name}_{mode}", f"mitigation={mode}"]
            overrides += _gather_overrides(args)
            try:
                scenario = load_bundled(name, overrides=overrides)
            except ConfigError as exc:
                print(f"config error: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            log = run(scenario)
            summary = _write_outputs(log, outdir)
            rows.append((name, mode, summary))

    header = f"{'scenario':12s} {'mode':4s} {'sup|y|':>12s} {'diverged':>8s} " \
             f"{'first_fault_t':>13s} {'reconfigs':>9s}"
    lines = [header]
    csv_lines = ["scenario,mode,sup_abs_y,diverged,first_fault_t,n_reconfigs"]
    for name, mode, s in rows:
        fft = f"{s.first_fault_t:.3f}" if s.first_fault_t is not None else "-"
        lines.append(f"{name:12s} {mode:4s} {s.sup_abs_y:12.4g} "
                     f"{str(s.diverged):>8s} {fft:>13s} {s.n_reconfigs:9d}")
        csv_lines.append(f"{name},{mode},{s.sup_abs_y:.15g},{int(s.diverged)},"
                         + (f"{s.first_fault_t:.15g}" if s.first_fault_t is not None else "")
                         + f",{s.n_reconfigs}")
    table = "\n".join(lines)
    print(table)
    with open(outdir / "suite_report.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(csv_lines) + "\n")
    print(f"wrote {outdir}/suite_report.csv")
    return EXIT_OK


def cmd_certify(args) -> int:
    try:
        ctrl = tf_to_ss(RationalTF([float(v) for v in args.controller_num.split()],
                                   [float(v) for v in args.controller_den.split()]))
        if args.case == "passive":
            m = design_passive(args.gamma)
        elif args.case == "ofp":
            if args.rho_target is None:
                raise ConfigError("--rho-target required for case ofp")
            m = design_ofp(args.gamma, args.rho_target)
        elif args.case == "ifp":
            if args.nu_target is None:
                raise ConfigError("--nu-target required for case ifp")
            m = design_ifp(args.gamma, args.nu_target)
        else:
            if args.rho_target is None or args.nu_target is None:
                raise ConfigError("--rho-target and --nu-target required for case ifofp")
            m = design_ifofp(args.gamma, args.rho_target, args.nu_target)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    print(f"M = [[{m.m11:.6g}, {m.m12:.6g}], [{m.m21:.6g}, {m.m22:.6g}]]  "
          f"case={m.case.value} gamma={m.gamma_used:g}")
    if m.warning:
        print(f"warning: {m.warning}")
    for name, margin in constraint_margins(m).items():
        print(f"  {name:30s} margin = {margin: .3e}")
    try:
        rep = certify(m, ctrl)
    except (ValueError, UnstableSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(rep)
    return EXIT_OK if rep.passed else EXIT_DIVERGED


def cmd_oracle(args) -> int:
    try:
        tf = RationalTF([float(v) for v in args.num.split()],
                        [float(v) for v in args.den.split()])
        sweep = FrequencySweep(args.omega_min, args.omega_max,
                               args.points_per_decade)
        sys_ss = tf_to_ss(tf)
        idx = true_indices_lti(sys_ss, sweep)
        gain = l2_gain(sys_ss, sweep, safety=1.0)
    except (ValueError, UnstableSystemError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"grid nu  (min Re G(jw))   = {idx.nu:.9g}")
    print(f"grid rho (min Re 1/G(jw)) = {idx.rho:.9g}")
    print(f"grid L2 gain              = {gain:.9g}  (x1.05 = {gain * 1.05:.9g})")
    if idx.skipped:
        print(f"skipped {len(idx.skipped)} grid points where |G| = 0: "
              f"{idx.skipped[:5]}{'...' if len(idx.skipped) > 5 else ''}")
    print("note: grid quantities; upper bounds on the true indices, lower "
          "bound on the true gain")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "suite": cmd_suite,
                "certify": cmd_certify, "oracle": cmd_oracle}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
