"""Acceptance criteria, each at its stated tolerance and runtime budget.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import csv
import time
from pathlib import Path

import numpy as np
import pytest

from nmm.coarse_models import (
    AdditiveModel,
    HistoryBuffer,
    HybridModel,
    HybridWeights,
    MultiplicativeModel,
    bayes_update_weights,
    make_anchor,
    mfv_weights,
)
from nmm.datasets import generate
from nmm.experiment import parse_config_text, read_summary, run_experiment
from nmm.objective import fd_gradient, gradient_error
from nmm.problems import (
    build_nonconvex_1d_hierarchy,
    build_quadratic_hierarchy,
    build_resnet_hierarchy,
)
from nmm.rmtr import VCycleConfig, minimize

from conftest import ACCEPTANCE_LINES

ROOT = Path(__file__).resolve().parent.parent
ARTIFACTS = ROOT / "artifacts"


def report(number, title, passed, detail, soft=False):
    tag = "PASS" if passed else ("FAIL (soft)" if soft else "FAIL")
    line = f"[{number}] {tag:<11} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def small_families(n_s=32, width=4):
    yield build_quadratic_hierarchy(7, 3)
    yield build_nonconvex_1d_hierarchy(7, 3)
    for name in ("blobs", "smiley", "spiral"):
        yield build_resnet_hierarchy(generate(name, n_s, 0), refinements=2, width=width)


def full_families():
    yield build_quadratic_hierarchy(31, 3)
    yield build_nonconvex_1d_hierarchy(31, 3)
    for name in ("blobs", "smiley", "spiral"):
        yield build_resnet_hierarchy(generate(name, 256, 0), refinements=3, width=8)


def random_point(hier, level, rng):
    scale = 3.0 * hier.meta.get("init_scale", 1.0)
    return scale * rng.standard_normal(hier.objectives[level].dim)


def random_anchor(hier, rng, kappa=1e-8):
    """Anchor at a random fine point; half the time the fine model is itself
    an additive model, as in a recursive cycle."""
    k = int(rng.integers(len(hier.transfers)))
    coarse, fine, ops = hier.objectives[k], hier.objectives[k + 1], hier.transfers[k]
    fine_model = fine
    if k + 1 < len(hier.transfers) and rng.random() < 0.5:
        top = make_anchor(hier.objectives[k + 2], random_point(hier, k + 2, rng), fine,
                          hier.transfers[k + 1], kappa)
        fine_model = AdditiveModel(fine, top)
    return make_anchor(fine_model, random_point(hier, k + 1, rng), coarse, ops, kappa), coarse


def test_1_coherence():
    rng = np.random.default_rng(1)
    kappa = 1e-8
    worst = {"additive": 0.0, "hybrid": 0.0, "multiplicative": 0.0}
    start = time.perf_counter()
    for hier in small_families():
        for _ in range(50):
            a, coarse = random_anchor(hier, rng, kappa)
            rg = float(np.max(np.abs(a.restricted_fine_grad)))
            w = HybridWeights.from_add(rng.uniform())
            for kind, model in (("additive", AdditiveModel(coarse, a)),
                                ("hybrid", HybridModel(coarse, a, w)),
                                ("multiplicative", MultiplicativeModel(coarse, a))):
                if kind == "multiplicative":
                    tol_v = 2 * kappa
                    tol_g = 5 * kappa * (1 + rg) / (abs(a.coarse_value) + kappa)
                else:
                    tol_v = 1e-12 * (1 + abs(a.fine_value))
                    tol_g = 1e-12 * (1 + rg)
                ev = abs(model.value(a.x0) - a.fine_value) / tol_v
                eg = np.max(np.abs(model.gradient(a.x0) - a.restricted_fine_grad)) / tol_g
                worst[kind] = max(worst[kind], ev, eg)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1.0 and elapsed < 10
    detail = ", ".join(f"{k} err/tol {v:.1e}" for k, v in worst.items())
    assert report(1, "coherence, 50 anchors x 5 families", ok, f"{detail}; {elapsed:.1f}s")


def test_2_finite_differences():
    rng = np.random.default_rng(2)
    worst_obj = worst_model = 0.0
    start = time.perf_counter()
    for hier in small_families(n_s=64):
        for level, obj in enumerate(hier.objectives):
            for _ in range(10):
                worst_obj = max(worst_obj, gradient_error(obj, random_point(hier, level, rng)))
        for _ in range(10):
            a, coarse = random_anchor(hier, rng)
            for model in (AdditiveModel(coarse, a), MultiplicativeModel(coarse, a),
                          HybridModel(coarse, a, HybridWeights.from_add(rng.uniform()))):
                x = a.x0 + 0.5 * (random_point(hier, 0, rng) if coarse.dim == hier.objectives[0].dim
                                  else rng.standard_normal(coarse.dim) * 3 * hier.meta.get("init_scale", 1.0))
                g = model.gradient(x)
                err = np.max(np.abs(g - fd_gradient(model, x))) / (1 + np.max(np.abs(g)))
                worst_model = max(worst_model, err)
    elapsed = time.perf_counter() - start
    ok = max(worst_obj, worst_model) <= 1e-6 and elapsed < 30
    assert report(2, "gradients vs central differences", ok,
                  f"objectives {worst_obj:.1e}, models {worst_model:.1e}; {elapsed:.1f}s")


def test_3_transfers():
    rng = np.random.default_rng(3)
    adj = proj = 0.0
    start = time.perf_counter()
    for hier in list(full_families()) + list(small_families()):
        for ops in hier.transfers:
            for _ in range(100):
                u, v = rng.standard_normal(ops.n_coarse), rng.standard_normal(ops.n_fine)
                rhs = u @ ops.restrict(v)
                adj = max(adj, abs(ops.prolongate(u) @ v - rhs) / (1 + abs(rhs)))
                if not np.array_equal(ops.project(ops.prolongate(u)), u):
                    proj += 1
    elapsed = time.perf_counter() - start
    ok = adj <= 1e-12 and proj == 0 and elapsed < 5
    assert report(3, "transfer adjointness and projection", ok,
                  f"adjointness {adj:.1e}, projection mismatches {int(proj)}; {elapsed:.1f}s")


def test_4_degenerate_weights():
    rng = np.random.default_rng(4)
    worst_deg = worst_mfv = max_weight = 0.0
    for hier in small_families():
        for _ in range(20):
            a, coarse = random_anchor(hier, rng)
            add, mult = AdditiveModel(coarse, a), MultiplicativeModel(coarse, a)
            x = a.x0 + 0.3 * rng.standard_normal(coarse.dim)
            for w, ref in ((HybridWeights(1.0, 0.0), add), (HybridWeights(0.0, 1.0), mult)):
                h = HybridModel(coarse, a, w)
                rv, rg = ref.value(x), ref.gradient(x)
                worst_deg = max(worst_deg,
                                abs(h.value(x) - rv) / max(abs(rv), 1e-300),
                                np.max(np.abs(h.gradient(x) - rg)) / max(np.max(np.abs(rg)), 1e-300))
            prev = a.fine_value + rng.normal()
            w = mfv_weights(prev, x, add, mult, clamp=False)
            if w.w_add != 0.5:
                terms = (w.w_add * add.value(x), w.w_mult * mult.value(x))
                # near-equal models give weights of order 1e4; the sum then
                # cancels, so the error is measured against the term sizes
                scale = max(abs(prev), abs(terms[0]) + abs(terms[1]))
                worst_mfv = max(worst_mfv, abs(sum(terms) - prev) / scale)
                max_weight = max(max_weight, abs(w.w_add))
    ok = worst_deg <= 1e-15 and worst_mfv <= 1e-12
    assert report(4, "degenerate hybrid weights and MFV interpolation", ok,
                  f"degenerate {worst_deg:.1e}, MFV {worst_mfv:.1e} "
                  f"(largest |w_add| {max_weight:.1e})")


def test_5_bayes():
    rng = np.random.default_rng(5)
    checks = {}
    buf = HistoryBuffer(3)
    for r in (0.5, -0.5, 0.5):
        buf.record(1.0, 1.0 + r, 1.0 - r)
    w = bayes_update_weights(HybridWeights(0.3, 0.7), buf)
    checks["symmetry"] = abs(w.w_add - 0.3) <= 1e-15
    buf = HistoryBuffer(4)
    for _ in range(4):
        f = rng.normal()
        buf.record(f, f, f + rng.normal())
    checks["perfect additive"] = bayes_update_weights(HybridWeights(), buf).w_add >= 1 - 1e-6
    buf = HistoryBuffer(1)
    buf.record(0.0, 0.1, 0.2)
    w = bayes_update_weights(HybridWeights(), buf)
    checks["hand example 2/3"] = abs(w.w_add - 2 / 3) <= 1e-12
    ok_range = True
    for _ in range(500):
        buf = HistoryBuffer(None)
        for _ in range(int(rng.integers(1, 8))):
            buf.record(*(rng.normal(size=3) * 10.0 ** rng.integers(-8, 8)))
        w = bayes_update_weights(HybridWeights.from_add(rng.uniform(1e-6, 1 - 1e-6)), buf)
        ok_range &= 0 < w.w_add < 1 and 0 < w.w_mult < 1 and abs(w.w_add + w.w_mult - 1) <= 1e-15
    checks["range and sum"] = ok_range
    ok = all(checks.values())
    detail = ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in checks.items())
    assert report(5, "Bayesian update", ok, detail)


def test_6_solver_convergence():
    hier = build_quadratic_hierarchy(31, 3)
    start = time.perf_counter()
    rep = minimize(hier, VCycleConfig(mu_coarse=20, grad_tol=1e-8, max_cycles=500),
                   hier.initial_point(0))
    elapsed = time.perf_counter() - start
    x_star = hier.fine.minimizer()
    rel = np.linalg.norm(rep.x - x_star) / np.linalg.norm(x_star)
    gnorm = float(np.max(np.abs(hier.fine.gradient(rep.x))))
    conv_ok = rep.converged and gnorm <= 1e-8 and rel <= 1e-6 and elapsed < 5

    increases = []
    for hier in small_families():
        for kind in ("additive", "multiplicative", "hybrid"):
            for strategy in (("fixed", "mfv", "bayes") if kind == "hybrid" else ("fixed",)):
                cfg = VCycleConfig(model_kind=kind, weight_strategy=strategy, max_cycles=30)
                fs = [r.f_value for r in minimize(hier, cfg, hier.initial_point(1)).records]
                if np.any(np.diff(fs) > 0):
                    increases.append(f"{hier.name}/{kind}/{strategy}")
    ok = conv_ok and not increases
    assert report(6, "quadratic n=127 solve and monotone descent", ok,
                  f"|g|inf {gnorm:.1e}, rel err {rel:.1e}, "
                  f"{rep.cycles} cycles, {elapsed:.2f}s; increases {increases or 'none'}")


def test_7_multilevel_benefit():
    start = time.perf_counter()
    lines = []
    ok = True
    for hier in (build_quadratic_hierarchy(31, 3), build_nonconvex_1d_hierarchy(31, 3)):
        wins = 0
        for seed in range(5):
            x0 = hier.initial_point(seed)
            ml = minimize(hier, VCycleConfig(levels=3, max_cycles=500), x0)
            sl = minimize(hier, VCycleConfig(levels=1, max_cycles=20000), x0)
            sl_cost = sl.final.work_units if sl.converged else np.inf
            wins += ml.converged and ml.final.work_units < sl_cost
        lines.append(f"{hier.name} {wins}/5")
        ok &= wins >= 4
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    assert report(7, "multilevel beats single-level smoothing", ok,
                  f"{', '.join(lines)} seeds; {elapsed:.1f}s")


SPIRAL_CONFIG = ROOT / "configs" / "spiral_trend.cfg"


def test_8_spiral_trend():
    out = ARTIFACTS / "spiral_trend"
    start = time.perf_counter()
    cfg = parse_config_text(SPIRAL_CONFIG.read_text(), env={"NMM_OUT": str(out)})
    run_experiment(cfg)
    elapsed = time.perf_counter() - start
    rows = {r["variant"]: r for r in read_summary(out / "summary.csv")}
    censored = sum(int(r["censored_runs"]) for r in rows.values())
    means = {k: float(r["mean_cost"]) for k, r in rows.items()}
    best = min((k for k in means if k.startswith("mix")), key=means.get)
    ok = means[best] <= means["add"] and censored == 0 and elapsed < 900
    table = ", ".join(f"{k} {v:.0f}" for k, v in means.items())
    report(8, "spiral hybrid mean cost <= additive", ok,
           f"best hybrid {best}; {table}; censored {censored}; {elapsed:.0f}s; artifacts {out}",
           soft=True)
    assert censored == 0 and elapsed < 900
    if not ok:
        pytest.xfail(f"soft criterion violated: {best} {means[best]:.0f} > add {means['add']:.0f}")


def test_9_determinism(tmp_path):
    text = ("problem=resnet-smiley\nmodel=add,mix-bayes-3,mix-mfv\nseeds=0,1\n"
            f"levels=3\nn_samples=32\nwidth=4\nmax_cycles=15\nout={tmp_path}\n")
    runs = []
    for _ in range(2):
        run_experiment(parse_config_text(text, env={}))
        runs.append({p.name: p.read_bytes() for p in tmp_path.iterdir()})
    same = [runs[0][name] == runs[1].get(name) for name in runs[0]]
    ok = all(same) and runs[0].keys() == runs[1].keys()
    assert report(9, "byte-identical reruns", ok, f"{sum(same)}/{len(same)} files identical")
