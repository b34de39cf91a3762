"""Replicated simulation tables for the unit-root MA(1) estimators.

Every cell (n, noise, theta0) draws its replicate paths from streams keyed by
the master seed and the cell, so all methods in a cell see the same paths and
the output does not depend on how replicates are spread over workers.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import asymptotics
from .asymptotics import AsymptoticConfig
from .estimators import FITTERS, Method, Mode, SearchConfig, WindowMissError
from .noise import Ma1Config, NoiseFamily, NoiseSpec, replicate_rng, simulate_ma1

SAMPLE_STREAM = 0x4D4131  # "MA1"
FAMILY_CODES = {f: i for i, f in enumerate(NoiseFamily)}


class Table(str, enum.Enum):
    TABLE1 = "table1"
    TABLE2 = "table2"
    TABLE3 = "table3"
    LAD_COMPARE = "lad-compare"
    PILEUP_ASYM = "pileup-asym"


_DEFAULTS = {
    Table.TABLE1: dict(n_list=(20, 50, 100, 200, 500), noise_list=tuple(NoiseFamily), theta0_list=(1.0,)),
    Table.TABLE2: dict(n_list=(20, 50, 100, 200), noise_list=(NoiseFamily.LAPLACE,), theta0_list=(1.0,)),
    Table.TABLE3: dict(
        n_list=(50,),
        noise_list=(NoiseFamily.LAPLACE,),
        theta0_list=(0.8, 0.9, 0.95, 1 / 0.95, 1 / 0.9, 1 / 0.8),
        mode=Mode.GLOBAL,
    ),
    Table.LAD_COMPARE: dict(n_list=(50, 100), noise_list=(NoiseFamily.LAPLACE,), theta0_list=(1.0,)),
    Table.PILEUP_ASYM: dict(n_list=(), noise_list=tuple(NoiseFamily), theta0_list=(1.0,)),
}


@dataclass(frozen=True)
class ExperimentSpec:
    table: Table
    n_list: tuple = ()
    reps: int = 1000
    noise_list: tuple = ()
    theta0_list: tuple = (1.0,)
    mode: Mode = Mode.LOCAL
    seed: int = 0
    asymptotic: AsymptoticConfig | None = field(default_factory=AsymptoticConfig)
    # half-width of the beta window; None means 25, or n (theta in [0, 2]) for Table 3
    beta_max: float | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "table", Table(self.table))
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "noise_list", tuple(NoiseFamily.parse(f) for f in self.noise_list))
        object.__setattr__(self, "theta0_list", tuple(float(t) for t in self.theta0_list))
        if self.table is Table.TABLE3 and self.mode is not Mode.GLOBAL:
            raise ValueError("Table 3 reports global optimizers; mode must be global")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not self.noise_list or not self.theta0_list:
            raise ValueError("noise and theta0 lists must be non-empty")
        if self.table is not Table.PILEUP_ASYM and not self.n_list:
            raise ValueError("n_list must be non-empty")

    @classmethod
    def default(cls, table: "Table | str", **overrides) -> "ExperimentSpec":
        table = Table(table)
        kw = dict(_DEFAULTS[table])
        kw.update(overrides)
        return cls(table=table, **kw)

    def search_config(self, n: int, mode: Mode | None = None) -> SearchConfig:
        if self.beta_max is not None:
            bm = float(self.beta_max)
        elif self.table is Table.TABLE3:
            bm = float(n)
        else:
            bm = 25.0
        return SearchConfig(beta_max=bm, mode=mode or self.mode)

    def to_dict(self) -> dict:
        d = {
            "table": self.table.value,
            "n_list": list(self.n_list),
            "reps": self.reps,
            "noise_list": [f.value for f in self.noise_list],
            "theta0_list": list(self.theta0_list),
            "mode": self.mode.value,
            "seed": self.seed,
            "beta_max": self.beta_max,
        }
        # worker counts are left out: results do not depend on them
        if self.asymptotic is None:
            d["asymptotic"] = None
        else:
            d["asymptotic"] = {k: v for k, v in dataclasses.asdict(self.asymptotic).items() if k != "workers"}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        has_asym = "asymptotic" in d
        asym = d.pop("asymptotic", None)
        spec = cls.default(d.pop("table"), **d)
        if isinstance(asym, dict):
            return dataclasses.replace(spec, asymptotic=AsymptoticConfig(**asym))
        if has_asym and asym is None:
            return dataclasses.replace(spec, asymptotic=None)
        return spec


COLUMNS = (
    "table", "method", "mode", "noise", "n", "theta0", "reps", "pileup_freq", "count_lt1",
    "count_eq1", "bias", "sd", "rmse", "asymp_sd", "mc_se", "excluded",
)  # fmt: skip


@dataclass(frozen=True)
class TableRow:
    table: str
    method: str
    mode: str
    noise: str
    n: "int | str"  # "inf" for the asymptotic row
    theta0: float
    reps: int
    pileup_freq: float = math.nan
    count_lt1: int = 0
    count_eq1: int = 0
    bias: float = math.nan
    sd: float = math.nan
    rmse: float = math.nan
    asymp_sd: float = math.nan
    mc_se: float = math.nan
    excluded: int = 0

    @property
    def count_gt1(self) -> int:
        """Non-invertible fits; with the other counts this partitions ``reps``."""
        return self.reps - self.excluded - self.count_lt1 - self.count_eq1

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in COLUMNS}


# ---------------------------------------------------------------------------
# replicate engine
# ---------------------------------------------------------------------------


def cell_key(n: int, family: NoiseFamily, theta0: float) -> tuple[int, ...]:
    theta_bits = int(np.float64(theta0).view(np.uint64))
    return (SAMPLE_STREAM, int(n), FAMILY_CODES[family], theta_bits)


def _fit_chunk(n, family, theta0, seed, start, stop, methods, cfgs):
    spec = NoiseSpec.of(family)
    key = cell_key(n, family, theta0)
    mcfg = Ma1Config(theta0, n, seed)
    out = np.full((len(methods), stop - start, 2), np.nan)
    for i, r in enumerate(range(start, stop)):
        x = simulate_ma1(mcfg, spec, replicate_rng(seed, r, *key)).x
        for k, (method, cfg) in enumerate(zip(methods, cfgs)):
            try:
                res = FITTERS[method](x, cfg)
            except WindowMissError:
                continue
            out[k, i] = res.theta_hat, 1.0 if res.pileup else 0.0
    return out


CHUNK = 50


def run_cell(n, family, theta0, reps, seed, methods: Sequence[Method], cfgs, workers=1) -> np.ndarray:
    """Array ``(len(methods), reps, 2)`` of ``(theta_hat, pileup)``; nan rows are window misses."""
    spans = [(s, min(s + CHUNK, reps)) for s in range(0, reps, CHUNK)]
    args = (n, family, theta0, seed)
    if workers == 1 or len(spans) == 1:
        parts = [_fit_chunk(*args, s, e, tuple(methods), tuple(cfgs)) for s, e in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_fit_chunk, *args, s, e, tuple(methods), tuple(cfgs)) for s, e in spans]
            parts = [f.result() for f in futs]
    return np.concatenate(parts, axis=1)


def summarize(table, method, mode, family, n, theta0, fits: np.ndarray) -> TableRow:
    reps = fits.shape[0]
    ok = ~np.isnan(fits[:, 0])
    excluded = int(reps - ok.sum())
    if excluded:
        warnings.warn(f"{excluded} window misses excluded in cell n={n} {family.value} theta0={theta0} {method}")
    th = fits[ok, 0]
    pile = fits[ok, 1] == 1.0
    kept = th.size
    if kept:
        err = th - theta0
        bias, sd = float(np.mean(err)), float(np.std(err))
        rmse = float(np.sqrt(np.mean(err * err)))
        p = float(np.mean(pile))
        se = math.sqrt(p * (1 - p) / kept)
    else:
        bias = sd = rmse = p = se = math.nan
    return TableRow(
        table=table.value, method=Method(method).value, mode=Mode(mode).value, noise=family.value,
        n=int(n), theta0=float(theta0), reps=reps, pileup_freq=p,
        count_lt1=int(np.sum((th < 1.0) & ~pile)), count_eq1=int(pile.sum()),
        bias=bias, sd=sd, rmse=rmse, mc_se=se, excluded=excluded,
    )  # fmt: skip


def _fit_rows(spec: ExperimentSpec, methods, modes=None) -> list[TableRow]:
    rows = []
    modes = modes or [spec.mode] * len(methods)
    for family in spec.noise_list:
        for theta0 in spec.theta0_list:
            for n in spec.n_list:
                cfgs = [spec.search_config(n, md) for md in modes]
                fits = run_cell(n, family, theta0, spec.reps, spec.seed, methods, cfgs, spec.workers)
                for k, method in enumerate(methods):
                    rows.append(summarize(spec.table, method, modes[k], family, n, theta0, fits[k]))
    return rows


def _require(spec: ExperimentSpec, table: Table):
    if spec.table is not table:
        raise ValueError(f"expected a {table.value} spec, got {spec.table.value}")


def _asym_cfg(spec: ExperimentSpec, family: NoiseFamily) -> AsymptoticConfig:
    base = spec.asymptotic or AsymptoticConfig()
    ns = NoiseSpec.of(family)
    return dataclasses.replace(base, f0=ns.f0, c=ns.c, workers=spec.workers)


def run_pileup_asym(spec: ExperimentSpec) -> list[TableRow]:
    """Limiting pile-up probabilities ``P(-1 < Y < 0)`` per noise family."""
    rows = []
    for family in spec.noise_list:
        cfg = _asym_cfg(spec, family)
        p, se = asymptotics.pileup_prob_mc(cfg)
        rows.append(
            TableRow(
                table=spec.table.value, method=Method.JOINT.value, mode=Mode.LOCAL.value,
                noise=family.value, n="inf", theta0=1.0, reps=cfg.reps, pileup_freq=p,
                count_eq1=int(round(p * cfg.reps)), mc_se=se,
            )  # fmt: skip
        )
    return rows


def run_table1(spec: ExperimentSpec) -> list[TableRow]:
    """Pile-up frequencies of the local joint estimator at theta0 = 1, plus the n = inf row."""
    _require(spec, Table.TABLE1)
    rows = _fit_rows(dataclasses.replace(spec, theta0_list=(1.0,)), [Method.JOINT], [Mode.LOCAL])
    if spec.asymptotic is not None:
        rows += run_pileup_asym(spec)
    return rows


def run_table2(spec: ExperimentSpec) -> list[TableRow]:
    """Bias, sd and rmse of the local joint and exact estimators, Laplace noise, theta0 = 1."""
    _require(spec, Table.TABLE2)
    spec = dataclasses.replace(spec, noise_list=(NoiseFamily.LAPLACE,), theta0_list=(1.0,))
    rows = _fit_rows(spec, [Method.JOINT, Method.EXACT], [Mode.LOCAL, Mode.LOCAL])
    if spec.asymptotic is None:
        return rows
    limit = asymptotics.limit_beta_distributions(_asym_cfg(spec, NoiseFamily.LAPLACE))
    sds = {Method.JOINT.value: limit.sd_joint, Method.EXACT.value: limit.sd_exact}
    return [dataclasses.replace(r, asymp_sd=sds[r.method] / r.n) for r in rows]


def run_table3(spec: ExperimentSpec) -> list[TableRow]:
    """Global joint and exact fits at n = 50 around the unit circle."""
    _require(spec, Table.TABLE3)
    spec = dataclasses.replace(spec, noise_list=(NoiseFamily.LAPLACE,))
    return _fit_rows(spec, [Method.JOINT, Method.EXACT], [Mode.GLOBAL, Mode.GLOBAL])


RATIO_METHOD = "lad/exact"


def run_lad_compare(spec: ExperimentSpec) -> list[TableRow]:
    """LAD against the exact estimator on shared paths; a third row per n carries the rmse ratio."""
    _require(spec, Table.LAD_COMPARE)
    rows = []
    for family in spec.noise_list:
        for theta0 in spec.theta0_list:
            for n in spec.n_list:
                cfgs = [spec.search_config(n, Mode.GLOBAL), spec.search_config(n, spec.mode)]
                methods = [Method.LAD, Method.EXACT]
                fits = run_cell(n, family, theta0, spec.reps, spec.seed, methods, cfgs, spec.workers)
                lad = summarize(spec.table, Method.LAD, Mode.GLOBAL, family, n, theta0, fits[0])
                ex = summarize(spec.table, Method.EXACT, spec.mode, family, n, theta0, fits[1])
                ratio = TableRow(
                    table=spec.table.value, method=RATIO_METHOD, mode=spec.mode.value,
                    noise=family.value, n=int(n), theta0=float(theta0), reps=spec.reps,
                    rmse=lad.rmse / ex.rmse if ex.rmse > 0 else math.nan,
                    excluded=lad.excluded + ex.excluded,
                )  # fmt: skip
                rows += [lad, ex, ratio]
    return rows


RUNNERS = {
    Table.TABLE1: run_table1,
    Table.TABLE2: run_table2,
    Table.TABLE3: run_table3,
    Table.LAD_COMPARE: run_lad_compare,
    Table.PILEUP_ASYM: run_pileup_asym,
}


def run(spec: ExperimentSpec) -> list[TableRow]:
    return RUNNERS[spec.table](spec)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows: Sequence[TableRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r.as_dict()[k]) for k in COLUMNS])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def package_version() -> str:
    from importlib import metadata

    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def rows_to_json(rows: Sequence[TableRow], spec: ExperimentSpec | None = None) -> str:
    doc = {
        "version": package_version(),
        "config": None if spec is None else spec.to_dict(),
        "rows": [{k: _json_safe(v) for k, v in r.as_dict().items()} for r in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
