"""Multi-seed comparison of coarse-model variants.

Configuration files are flat ``key=value`` lines; ``#`` starts a comment.
Each (variant, seed) pair is one solver run written to
``<out>/<variant>_<seed>.csv``; ``<out>/summary.csv`` holds the mean cost
and relative spread per variant.
"""

from __future__ import annotations

import csv
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import generate
from .problems import (
    build_nonconvex_1d_hierarchy,
    build_quadratic_hierarchy,
    build_resnet_hierarchy,
)
from .rmtr import TrustRegionParams, VCycleConfig, minimize

PROBLEMS = ("quadratic", "nonconvex1d", "resnet-blobs", "resnet-smiley", "resnet-spiral")
VARIANT_HELP = "add, mult, mix-fixed-<w>, mix-mfv, mix-bayes-<d|inf>"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    name: str
    model_kind: str
    weight_strategy: str = "fixed"
    fixed_weight: float = 0.5
    history: Optional[int] = None


def parse_variant(text: str) -> Variant:
    """Parse ``add``, ``mult``, ``mix-fixed-0.5`` / ``mix-fixed(0.5)``,
    ``mix-mfv``, ``mix-bayes-5`` / ``mix-bayes(inf)``."""
    t = text.strip().lower()
    m = re.fullmatch(r"(mix-fixed|mix-bayes)[-(]([^()]+)\)?", t)
    if t == "add":
        return Variant("add", "additive")
    if t == "mult":
        return Variant("mult", "multiplicative")
    if t == "mix-mfv":
        return Variant("mix-mfv", "hybrid", "mfv")
    if m and m.group(1) == "mix-fixed":
        try:
            w = float(m.group(2))
        except ValueError:
            w = -1.0
        if not 0.0 <= w <= 1.0:
            raise ConfigError(f"model: mix-fixed weight must lie in [0, 1], got {m.group(2)!r}")
        return Variant(f"mix-fixed-{w:g}", "hybrid", "fixed", fixed_weight=w)
    if m and m.group(1) == "mix-bayes":
        d = m.group(2)
        if d in ("inf", "all"):
            return Variant("mix-bayes-inf", "hybrid", "bayes", history=None)
        if d.isdigit() and int(d) > 0:
            return Variant(f"mix-bayes-{int(d)}", "hybrid", "bayes", history=int(d))
        raise ConfigError(f"model: mix-bayes history must be a positive integer or inf, got {d!r}")
    raise ConfigError(f"model: unknown variant {text.strip()!r}; allowed: {VARIANT_HELP}")


def _int(v):
    return int(v)


def _opt_float(v):
    return None if v.lower() in ("none", "") else float(v)


# key -> (parser, default); None default means "problem dependent"
FIELDS = {
    "problem": (str, None),
    "model": (str, "add"),
    "seeds": (str, "0,1,2,3,4"),
    "levels": (_int, None),
    "n_coarse": (_int, 31),
    "n_samples": (_int, 256),
    "width": (_int, 8),
    "data_seed": (_int, 0),
    "mu_pre": (_int, 1),
    "mu_post": (_int, 1),
    "mu_coarse": (_int, 5),
    "kappa": (float, 1e-8),
    "grad_tol": (float, 1e-6),
    "target_loss": (_opt_float, None),
    "max_cycles": (_int, 100),
    "delta0": (float, 1.0),
    "delta_max": (float, 1e3),
    "eta1": (float, 0.1),
    "eta2": (float, 0.75),
    "shrink": (float, 0.5),
    "grow": (float, 2.0),
    "jobs": (_int, 1),
    "out": (str, "results"),
}
MANDATORY = ("problem",)


@dataclass
class ExperimentConfig:
    problem: str
    variants: list
    seeds: list
    values: dict = field(default_factory=dict)

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    def solver_config(self, v: Variant) -> VCycleConfig:
        c = self.values
        return VCycleConfig(
            levels=c["levels"], mu_pre=c["mu_pre"], mu_post=c["mu_post"],
            mu_coarse=c["mu_coarse"], model_kind=v.model_kind,
            weight_strategy=v.weight_strategy, fixed_weight=v.fixed_weight,
            history=v.history, kappa=c["kappa"], grad_tol=c["grad_tol"],
            target_value=c["target_loss"], max_cycles=c["max_cycles"],
            tr=TrustRegionParams(delta0=c["delta0"], delta_max=c["delta_max"],
                                 eta1=c["eta1"], eta2=c["eta2"],
                                 shrink=c["shrink"], grow=c["grow"]),
        )

    def echo(self) -> list:
        lines = []
        for key in FIELDS:
            v = self.values[key]
            if key == "model":
                v = ",".join(x.name for x in self.variants)
            lines.append(f"{key}={'none' if v is None else v}")
        return lines


def parse_config_text(text: str, env=None) -> ExperimentConfig:
    env = os.environ if env is None else env
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}; allowed: {', '.join(FIELDS)}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    for key in MANDATORY:
        if key not in raw:
            raise ConfigError(f"missing mandatory key {key!r}")
    values = {}
    for key, (conv, default) in FIELDS.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError:
                raise ConfigError(f"{key}: malformed value {raw[key]!r}") from None
        else:
            values[key] = default
    if values["problem"] not in PROBLEMS:
        raise ConfigError(f"problem: unknown {values['problem']!r}; allowed: {', '.join(PROBLEMS)}")
    if values["levels"] is None:
        values["levels"] = 4 if values["problem"].startswith("resnet") else 3
    if values["levels"] < 2:
        raise ConfigError("levels: must be >= 2")
    if env.get("NMM_OUT"):
        values["out"] = env["NMM_OUT"]
    variants = [parse_variant(v) for v in values["model"].split(",") if v.strip()]
    if not variants:
        raise ConfigError("model: at least one variant is required")
    if len({v.name for v in variants}) != len(variants):
        raise ConfigError("model: duplicate variants")
    try:
        seeds = [int(s) for s in values["seeds"].split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"seeds: malformed value {values['seeds']!r}") from None
    if not seeds:
        raise ConfigError("seeds: at least one seed is required")
    cfg = ExperimentConfig(values["problem"], variants, seeds, values)
    try:
        for v in variants:
            cfg.solver_config(v)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def parse_config(path, env=None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config_text(text, env)


def build_hierarchy(cfg: ExperimentConfig):
    c = cfg.values
    if cfg.problem == "quadratic":
        return build_quadratic_hierarchy(c["n_coarse"], c["levels"], seed=c["data_seed"])
    if cfg.problem == "nonconvex1d":
        return build_nonconvex_1d_hierarchy(c["n_coarse"], c["levels"])
    data = generate(cfg.problem.split("-", 1)[1], c["n_samples"], c["data_seed"])
    return build_resnet_hierarchy(data, coarse_blocks=3, refinements=c["levels"] - 1,
                                  width=c["width"])


@dataclass
class RunResult:
    variant: str
    seed: int
    cost: float
    censored: bool
    header: list
    rows: list


def fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def run_one(cfg: ExperimentConfig, variant: Variant, seed: int) -> RunResult:
    hier = build_hierarchy(cfg)
    report = minimize(hier, cfg.solver_config(variant), hier.initial_point(seed))
    return RunResult(variant.name, seed, report.final.work_units, not report.converged,
                     report.csv_header(), report.csv_rows())


def _run_job(args):
    return run_one(*args)


def write_run_csv(path: Path, result: RunResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(result.header)
        for row in result.rows:
            w.writerow([fmt(v) for v in row])


def summarize(costs) -> tuple[float, float]:
    """Mean and spread (population std as a percentage of the mean)."""
    arr = np.asarray(costs, dtype=np.float64)
    mean = float(arr.mean())
    spread = 100.0 * float(arr.std()) / mean if mean > 0 else 0.0
    return mean, spread


SUMMARY_HEADER = ["problem", "variant", "runs", "mean_cost", "spread_pct", "censored_runs"]


def run_experiment(cfg: ExperimentConfig) -> list:
    """Run every (variant, seed) pair; returns the summary rows."""
    jobs = [(cfg, v, s) for v in cfg.variants for s in cfg.seeds]
    if cfg.values["jobs"] > 1:
        with ProcessPoolExecutor(cfg.values["jobs"]) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [run_one(*job) for job in jobs]
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_run_csv(out / f"{r.variant}_{r.seed}.csv", r)
    summary = []
    for v in cfg.variants:
        mine = [r for r in results if r.variant == v.name]
        mean, spread = summarize([r.cost for r in mine])
        summary.append([cfg.problem, v.name, len(mine), mean, spread, sum(r.censored for r in mine)])
    with open(out / "summary.csv", "w", newline="") as fh:
        for line in cfg.echo():
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for row in summary:
            w.writerow([fmt(x) for x in row])
    return summary


def read_summary(path) -> list:
    """Summary rows as dicts, skipping the echoed configuration."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def format_table(summary) -> str:
    lines = [f"{'variant':<16} {'mean cost':>12} {'spread':>9} {'censored':>9}"]
    for problem, name, runs, mean, spread, censored in summary:
        lines.append(f"{name:<16} {mean:12.1f} {spread:8.1f}% {censored:>5}/{runs}")
    return "\n".join(lines)

