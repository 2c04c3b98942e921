"""Command-line interface: experiment runner plus direct evaluation commands."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import cw, experiments, hodge, orbits, parametrix, zeta
from .errors import AbscissaError, AcyclicityError, ShapeError
from .experiments import ConfigError, resolve_config, run
from .graded import complex_from_json
from .reports import make_row, write_csv, write_json_atomic

USAGE_EXIT = 2
FAILURE_EXIT = 1


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_grid(spec):
    """start:stop:step (inclusive stop) or a comma list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {spec!r} is not start:stop:step")
        start, stop, step = (float(p) for p in parts)
        return list(np.arange(start, stop + 1e-12, step))
    return [float(p) for p in spec.split(",")]


def _load_config_file(path):
    if path.endswith(".toml"):
        import tomllib

        with open(path, "rb") as handle:
            return tomllib.load(handle)
    with open(path) as handle:
        return json.load(handle)


def _cmd_run(args):
    overrides = {}
    if args.config:
        data = _load_config_file(args.config)
        overrides.update(data.get("params", data))
    for item in args.param or []:
        if "=" not in item:
            raise ConfigError(f"--param needs key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = _parse_value(value)
    config = resolve_config(args.experiment, overrides, seed=args.seed)
    report = run(config, out_dir=args.out, use_cache=not args.no_cache,
                 jobs=args.jobs)
    if args.figures:
        from .plots import render_figure

        render_figure(report, args.out)
    for name, ok in report["verdicts"].items():
        print(f"[{'PASS' if ok else 'FAIL'}] {args.experiment}: {name}")
    return 0 if report["passed"] else FAILURE_EXIT


def _cmd_zeta_eval(args):
    with open(args.spec) as handle:
        spectrum = zeta.SpectrumByDegree.from_json(json.load(handle))
    s = complex(args.s)
    shift = complex(args.shift)
    values = zeta.spectral_zeta(spectrum, s, shift)
    for degree, value in enumerate(values):
        print(f"degree {degree}: {value.real:.15g} {value.imag:+.15g}i")
    return 0


def _cmd_torsion_circle(args):
    theta = experiments._parse_angle(args.theta)
    for radius in _parse_grid(args.radius):
        value = zeta.circle_torsion(theta, radius)
        print(f"theta={theta:.12g} r={radius:g}: torsion={value:.12g}")
    return 0


def _cmd_torsion_cw(args):
    if args.file:
        data = cw.TwistedCWData.from_json(_load_config_file(args.file))
        if args.theta is not None:
            theta = experiments._parse_angle(args.theta)
            if len(data.generators) != 1:
                raise ConfigError("--theta override needs a single generator")
            data.character[data.generators[0]] = np.exp(1j * theta)
    elif args.theta is not None:
        data = cw.circle_cw(experiments._parse_angle(args.theta))
    else:
        raise ConfigError("torsion cw needs --file or --theta")
    d = cw.build_twisted_cochain(data)
    value = cw.combinatorial_torsion(d)
    print(f"combinatorial torsion: {value:.12g}")
    return 0


def _cmd_hodge_anomaly(args):
    _, maps = complex_from_json(_load_config_file(args.complex))
    if "d" not in maps:
        raise ConfigError("complex file must contain a map named 'd'")
    family = hodge.MetricFamily.from_json(_load_config_file(args.family))
    grid = _parse_grid(args.grid)
    report = hodge.torsion_anomaly_experiment(maps["d"], family, grid)
    for row in report["rows"]:
        if "failed" in row:
            print(f"tau={row['tau']:.6g}: FAILED {row['failed']}")
        else:
            print(f"tau={row['tau']:.6g}: sdet={row['sdet'].real:.12g} "
                  f"ledger_dev={row['ledger_dev']:.3e}")
    print(f"ledger {'PASS' if report['ledger_pass'] else 'FAIL'} "
          f"(max dev {report['max_ledger_dev']:.3e})")
    return 0 if report["ledger_pass"] else FAILURE_EXIT


def _cmd_heat_parametrix(args):
    overrides = {"potential": args.potential, "N": args.N}
    config = resolve_config("heat-parametrix", overrides, seed=args.seed)
    out_dir = args.out
    report = run(config, out_dir=out_dir, use_cache=not args.no_cache)
    if args.report:
        write_json_atomic(args.report, report)
    if args.figures:
        from .plots import render_figure

        render_figure(report, out_dir)
    for name, ok in report["verdicts"].items():
        print(f"[{'PASS' if ok else 'FAIL'}] heat-parametrix: {name}")
    return 0 if report["passed"] else FAILURE_EXIT


def _cmd_ruelle_cat(args):
    entries = [int(x) for x in args.matrix.split(",")]
    if len(entries) != 4:
        raise ConfigError("--matrix needs four comma-separated integers")
    grid = _parse_grid(args.lambda_grid)
    overrides = {
        "matrix": [entries[:2], entries[2:]],
        "alpha": args.alpha,
        "n_max": args.n_max,
        "lambda_start": grid[0], "lambda_stop": grid[-1],
        "lambda_step": grid[1] - grid[0] if len(grid) > 1 else 1.0,
    }
    config = resolve_config("ruelle-cat", overrides, seed=args.seed)
    report = run(config, out_dir=args.out, use_cache=not args.no_cache)
    if args.figures:
        from .plots import render_figure

        render_figure(report, args.out)
    for name, ok in report["verdicts"].items():
        print(f"[{'PASS' if ok else 'FAIL'}] ruelle-cat: {name}")
    return 0 if report["passed"] else FAILURE_EXIT


def _cmd_ruelle_subshift(args):
    m_entries = [int(x) for x in args.M.split(",")]
    size = int(round(len(m_entries) ** 0.5))
    if size * size != len(m_entries):
        raise ConfigError("--M must be a flattened square 0/1 matrix")
    matrix = [m_entries[i * size:(i + 1) * size] for i in range(size)]
    roof = [float(x) for x in args.roof.split(",")]
    overrides = {"matrix": matrix, "roof": roof, "alphas": [args.alpha]}
    if args.lambda_grid:
        grid = _parse_grid(args.lambda_grid)
        overrides.update(lambda_start=grid[0], lambda_stop=grid[-1],
                         lambda_step=grid[1] - grid[0] if len(grid) > 1 else 1.0)
    config = resolve_config("subshift-zeta", overrides, seed=args.seed)
    report = run(config, out_dir=args.out, use_cache=not args.no_cache)
    if args.figures:
        from .plots import render_figure

        render_figure(report, args.out)
    for name, ok in report["verdicts"].items():
        print(f"[{'PASS' if ok else 'FAIL'}] subshift-zeta: {name}")
    return 0 if report["passed"] else FAILURE_EXIT


def _add_common_run_args(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=".")
    parser.add_argument("--no-cache", action="store_true")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--figures", action="store_true", default=True)
    parser.add_argument("--no-figures", dest="figures", action="store_false")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="flatdet",
        description="Superdeterminant constancy experiments: graded complexes, "
                    "circle torsion, heat parametrices, dynamical zetas.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a registered experiment")
    p_run.add_argument("experiment", choices=sorted(experiments.EXPERIMENTS))
    p_run.add_argument("--config", help="TOML or JSON parameter file")
    p_run.add_argument("--param", action="append",
                       help="key=value override (JSON-parsed value)")
    _add_common_run_args(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_zeta = sub.add_parser("zeta", help="spectral zeta operations")
    zeta_sub = p_zeta.add_subparsers(dest="zeta_command", required=True)
    p_eval = zeta_sub.add_parser("eval", help="evaluate a spectrum's zeta")
    p_eval.add_argument("--spec", required=True, help="spectrum JSON file")
    p_eval.add_argument("--s", required=True, help="complex exponent, e.g. 2 or 2+0j")
    p_eval.add_argument("--shift", default="0", help="spectral shift lambda")
    p_eval.set_defaults(func=_cmd_zeta_eval)

    p_torsion = sub.add_parser("torsion", help="analytic/combinatorial torsion")
    torsion_sub = p_torsion.add_subparsers(dest="torsion_command", required=True)
    p_circle = torsion_sub.add_parser("circle", help="twisted-circle torsion")
    p_circle.add_argument("--theta", required=True)
    p_circle.add_argument("--radius", default="1")
    p_circle.set_defaults(func=_cmd_torsion_circle)
    p_cw = torsion_sub.add_parser("cw", help="torsion of a twisted CW complex")
    p_cw.add_argument("--file", help="TwistedCWData JSON")
    p_cw.add_argument("--theta", help="single-generator character angle")
    p_cw.set_defaults(func=_cmd_torsion_cw)

    p_hodge = sub.add_parser("hodge", help="Gram-metric experiments")
    hodge_sub = p_hodge.add_subparsers(dest="hodge_command", required=True)
    p_anomaly = hodge_sub.add_parser("anomaly", help="anomaly ledger sweep")
    p_anomaly.add_argument("--complex", required=True, help="graded complex JSON")
    p_anomaly.add_argument("--family", required=True, help="metric family JSON")
    p_anomaly.add_argument("--grid", default="0:0.5:0.1")
    p_anomaly.set_defaults(func=_cmd_hodge_anomaly)

    p_heat = sub.add_parser("heat", help="heat-kernel parametrix")
    heat_sub = p_heat.add_subparsers(dest="heat_command", required=True)
    p_par = heat_sub.add_parser("parametrix", help="parametrix experiment")
    p_par.add_argument("--potential", default="sin")
    p_par.add_argument("--N", type=int, default=4)
    p_par.add_argument("--report", help="also write the report JSON here")
    _add_common_run_args(p_par)
    p_par.set_defaults(func=_cmd_heat_parametrix)

    p_ruelle = sub.add_parser("ruelle", help="orbit zeta experiments")
    ruelle_sub = p_ruelle.add_subparsers(dest="ruelle_command", required=True)
    p_cat = ruelle_sub.add_parser("cat", help="toral-automorphism suspension")
    p_cat.add_argument("--matrix", default="2,1,1,1")
    p_cat.add_argument("--alpha", default="pi")
    p_cat.add_argument("--lambda-grid", default="1.3:3:0.1")
    p_cat.add_argument("--n-max", type=int, default=60)
    _add_common_run_args(p_cat)
    p_cat.set_defaults(func=_cmd_ruelle_cat)
    p_sub = ruelle_sub.add_parser("subshift", help="roofed subshift suspension")
    p_sub.add_argument("--M", default="1,1,1,0")
    p_sub.add_argument("--roof", default="1,1")
    p_sub.add_argument("--alpha", default="pi")
    p_sub.add_argument("--lambda-grid", default="")
    _add_common_run_args(p_sub)
    p_sub.set_defaults(func=_cmd_ruelle_subshift)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, ShapeError, AcyclicityError, AbscissaError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
