"""Command-line front end: ``ma1pileup <command> [flags]``.

Exit status is 0 on success, 1 on a usage error and 2 when a fit finds no
interior optimum inside its beta window.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import asymptotics
from .estimators import Method, Mode, SearchConfig, WindowMissError, fit
from .experiments import ExperimentSpec, Table, run, rows_to_csv, rows_to_json
from .noise import Ma1Config, NoiseFamily, NoiseSpec, replicate_rng, simulate_ma1

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
# spawn-key tag for the single-path commands
SINGLE_STREAM = 0x53494E  # "SIN"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _float_list(s: str) -> list[float]:
    try:
        return [_parse_theta(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def _parse_theta(v: str) -> float:
    v = v.strip()
    if v.startswith("1/"):
        return 1.0 / float(v[2:])
    return float(v)


def _noise_list(s: str) -> list[NoiseFamily]:
    try:
        return [NoiseFamily.parse(v) for v in s.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _seed(s: str) -> int:
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--n", type=_int_list, default=None, help="comma-separated sample sizes")
    p.add_argument("--noise", type=_noise_list, default=None, help="laplace,gaussian,uniform,t5")
    p.add_argument("--theta0", type=_float_list, default=None, help="comma-separated; 1/x allowed")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=None)
    p.add_argument("--m", type=int, default=None, help="grid size of the limit paths")
    p.add_argument("--beta-max", type=float, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--format", choices=["csv", "json"], default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", type=Path, default=None, help="JSON file with experiment settings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ma1pileup", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("simulate", help="emit one simulated path as JSON")
    _common(p)
    p = sub.add_parser("fit", help="simulate one path and fit it")
    _common(p)
    p.add_argument("--method", choices=[m.value for m in Method], default=Method.JOINT.value)
    p = sub.add_parser("pileup-asym", help="limiting pile-up probabilities")
    _common(p)
    p.add_argument("--rb", action="store_true", help="also report the Rao-Blackwellized Laplace estimate")
    for t in (Table.TABLE1, Table.TABLE2, Table.TABLE3, Table.LAD_COMPARE):
        p = sub.add_parser(t.value, help=f"reproduce {t.value}")
        _common(p)
        p.add_argument("--asym-reps", type=int, default=None, help="limit replicates for asymptotic rows")
    return parser


def _single(values, name):
    if values is None:
        return None
    if len(values) != 1:
        raise UsageError(f"--{name} takes a single value for this command")
    return values[0]


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _one_path(args):
    n = _single(args.n, "n") or 100
    theta0 = _single(args.theta0, "theta0")
    theta0 = 1.0 if theta0 is None else theta0
    family = _single(args.noise, "noise") or NoiseFamily.LAPLACE
    seed = 0 if args.seed is None else args.seed
    spec = NoiseSpec.of(family)
    cfg = Ma1Config(theta0, n, seed)
    sample = simulate_ma1(cfg, spec, replicate_rng(seed, 0, SINGLE_STREAM))
    meta = {"n": n, "theta0": theta0, "noise": family.value, "seed": seed}
    return sample, meta


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _cmd_simulate(args):
    sample, meta = _one_path(args)
    if args.format == "csv":
        lines = ["t,x,z"] + [f"0,,{sample.z[0]!r}"]
        lines += [f"{t},{sample.x[t - 1]!r},{sample.z[t]!r}" for t in range(1, sample.n + 1)]
        return "\n".join(lines) + "\n"
    return _dump({**meta, "x": sample.x.tolist(), "z": sample.z.tolist()})


def _finite(v):
    return v if isinstance(v, float) and math.isfinite(v) else None


def _cmd_fit(args):
    sample, meta = _one_path(args)
    method = Method(args.method)
    mode = Mode.parse(args.mode) if args.mode else (Mode.GLOBAL if method is Method.LAD else Mode.LOCAL)
    cfg = SearchConfig(mode=mode, **({"beta_max": args.beta_max} if args.beta_max else {}))
    res = fit(sample.x, method, cfg)
    rec = {
        **meta,
        "method": method.value,
        "mode": mode.value,
        "theta_hat": res.theta_hat,
        "beta_hat": res.beta_hat,
        "z_init_hat": _finite(res.z_init_hat),
        "sigma_hat": res.sigma_hat,
        "objective": res.objective,
        "pileup": res.pileup,
        "degenerate": res.degenerate,
    }
    if args.format == "csv":
        keys = list(rec)
        return ",".join(keys) + "\n" + ",".join("" if rec[k] is None else str(rec[k]) for k in keys) + "\n"
    return _dump(rec)


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from None
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data


def _experiment_spec(table: Table, args) -> ExperimentSpec:
    conf = _load_config(args.config)
    conf.pop("table", None)
    asym = conf.pop("asymptotic", {}) or {}
    flags = {
        "n_list": args.n,
        "reps": args.reps,
        "noise_list": args.noise,
        "theta0_list": args.theta0,
        "mode": args.mode,
        "seed": args.seed,
        "beta_max": args.beta_max,
        "workers": args.workers,
    }
    conf.update({k: v for k, v in flags.items() if v is not None})
    if args.m is not None:
        asym["m"] = args.m
    asym_reps = getattr(args, "asym_reps", None)
    if table is Table.PILEUP_ASYM and args.reps is not None:
        asym_reps = args.reps
    if asym_reps is not None:
        asym["reps"] = asym_reps
    if "seed" in conf:
        asym.setdefault("seed", conf["seed"])
    try:
        return ExperimentSpec.default(table, asymptotic=asymptotics.AsymptoticConfig(**asym), **conf)
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from None


def _cmd_table(table: Table, args):
    spec = _experiment_spec(table, args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = run(spec)
    if table is Table.PILEUP_ASYM and getattr(args, "rb", False):
        cfg = spec.asymptotic
        p, se = asymptotics.pileup_prob_laplace_rb(cfg)
        print(f"rao-blackwellized laplace: {p:.4f} (s.e. {se:.4f})", file=sys.stderr)
    if args.format == "json":
        return rows_to_json(rows, spec)
    if args.out is not None:
        # machine-readable sidecar next to the CSV
        args.out.with_suffix(args.out.suffix + ".json").write_text(rows_to_json(rows, spec))
    return rows_to_csv(rows)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if args.command == "simulate":
            text = _cmd_simulate(args)
        elif args.command == "fit":
            text = _cmd_fit(args)
        else:
            text = _cmd_table(Table(args.command), args)
    except UsageError as e:
        print(f"ma1pileup: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except WindowMissError as e:
        print(f"ma1pileup: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"ma1pileup: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    _write(text, args.out)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
