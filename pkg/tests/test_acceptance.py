"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts. Tolerances and sizes are fixed here and must not be tuned after the
fact.
"""

import csv
import time

import numpy as np
import pytest

from compact_bilinear import (
    LocalDescriptorGrid,
    SeededRng,
    bilinear_pool,
    circ_conv_fast,
    circ_conv_naive,
    exact_kernel,
    gen_rm,
    gen_ts,
    rm_pool,
    ts_pool,
    ts_project,
)
from compact_bilinear.bilinear import bilinear_pool_backward
from compact_bilinear.cli import main
from compact_bilinear.experiments import (
    CALIBRATED_SPREAD,
    bench,
    fewshot_experiment,
    holdout_accuracy,
    make_synth,
    pool,
)
from compact_bilinear.gradcheck import (
    check_bilinear,
    check_l2norm,
    check_rm,
    check_signed_sqrt,
    check_ts,
)

RESULTS = {}


def record(num, ok, detail, elapsed, budget):
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    RESULTS[num] = f"[{status}] criterion {num:2d}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
    return ok and within


def _primes_upto(n):
    return [p for p in range(2, n + 1) if all(p % q for q in range(2, int(p**0.5) + 1))]


def test_c01_bilinear_kernel_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        c = int(rng.integers(1, 33))
        sa, sb = (int(v) for v in rng.integers(1, 17, size=2))
        a = LocalDescriptorGrid(rng.normal(size=(1, sa, 1, c)))
        b = LocalDescriptorGrid(rng.normal(size=(1, 1, sb, c)))
        via_pool = float(bilinear_pool(a).data[0] @ bilinear_pool(b).data[0])
        direct = exact_kernel(a, b)
        worst = max(worst, abs(via_pool - direct) / abs(direct))
    elapsed = time.perf_counter() - t0
    ok = record(1, worst < 1e-10, f"pooled vs double-sum kernel, max rel err {worst:.2e} < 1e-10", elapsed, 10)
    assert ok


def test_c02_convolution_theorem():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for i in range(100):
        c, d = int(rng.integers(1, 17)), int(rng.integers(1, 65))
        p = gen_ts(c, d, SeededRng(1000 + i))
        x = rng.normal(size=c)
        h1, s1, h2, s2 = p.sketch1.h, p.sketch1.s, p.sketch2.h, p.sketch2.s
        # Count Sketch of the flattened outer product under the combined hash
        H = (h1[:, None] + h2[None, :]) % d
        S = s1[:, None] * s2[None, :]
        ref = np.bincount(H.reshape(-1), weights=(S * np.outer(x, x)).reshape(-1), minlength=d)
        worst = max(worst, np.max(np.abs(ts_project(x, p) - ref)))
    elapsed = time.perf_counter() - t0
    ok = record(2, worst < 1e-10, f"TS vs outer-product sketch, max abs err {worst:.2e} < 1e-10", elapsed, 5)
    assert ok


def test_c03_fast_convolution():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    dims = list(range(1, 258))
    primes = _primes_upto(257)
    worst = 0.0
    for i in range(1000):
        # every d in 1..257 is covered; the rest of the draws favour primes
        d = dims[i] if i < len(dims) else int(rng.choice(primes))
        a, b = rng.normal(size=(2, d))
        ref = circ_conv_naive(a, b)
        worst = max(worst, np.max(np.abs(circ_conv_fast(a, b) - ref)) / max(np.max(np.abs(ref)), 1e-300))
    elapsed = time.perf_counter() - t0
    ok = record(3, worst < 1e-8, f"FFT vs O(d^2) convolution, max rel err {worst:.2e} < 1e-8", elapsed, 10)
    assert ok


def test_c04_gradient_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    worst = {}
    shapes = [(2, 1, 1, 1), (8, 17, 2, 2), (5, 31, 3, 1), (16, 64, 2, 2), (12, 100, 1, 3), (32, 127, 2, 1)]
    for c, d, h, w in shapes:
        x = rng.normal(size=(2, h, w, c))
        for name, err in check_rm(x, gen_rm(c, d, c * d), rng.normal(size=(2, d))).items():
            worst[f"rm.{name}"] = max(worst.get(f"rm.{name}", 0.0), err)
        for name, err in check_ts(x, gen_ts(c, d, c * d), rng.normal(size=(2, d))).items():
            worst[f"ts.{name}"] = max(worst.get(f"ts.{name}", 0.0), err)
        if c <= 16:
            worst["bilinear.x"] = max(worst.get("bilinear.x", 0.0),
                                      check_bilinear(x, rng.normal(size=(2, c * c)))["x"])
        v = rng.choice([-1.0, 1.0], size=(3, d)) * rng.uniform(1e-3, 4.0, size=(3, d))
        worst["signed_sqrt"] = max(worst.get("signed_sqrt", 0.0), check_signed_sqrt(v, rng.normal(size=(3, d)))["v"])
        worst["l2norm"] = max(worst.get("l2norm", 0.0),
                              check_l2norm(rng.normal(size=(3, d)), rng.normal(size=(3, d)))["v"])
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    detail = "finite differences, max rel err " + ", ".join(f"{k}={v:.1e}" for k, v in sorted(worst.items()))
    ok = record(4, top < 1e-5 and len(worst) == 9, detail + " < 1e-5", elapsed, 60)
    assert ok


def _kernel_estimates(a, b, method, d, seeds, base):
    gen, pool_fn = (gen_rm, rm_pool) if method == "rm" else (gen_ts, ts_pool)
    vals = np.empty(seeds)
    for i in range(seeds):
        p = gen(a.c, d, base.child(d, i))
        vals[i] = pool_fn(a, p).data[0] @ pool_fn(b, p).data[0]
    return vals


def test_c05_unbiasedness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    lines, ok_all = [], True
    for pair in range(3):
        a = LocalDescriptorGrid(rng.normal(size=(1, 2, 2, 8)))
        b = LocalDescriptorGrid(rng.normal(size=(1, 2, 2, 8)))
        exact = exact_kernel(a, b)
        for method in ("rm", "ts"):
            vals = _kernel_estimates(a, b, method, 64, 500, SeededRng(500 + pair).child(ord(method[0])))
            se = vals.std(ddof=1) / np.sqrt(len(vals))
            z = (vals.mean() - exact) / se
            ok_all &= abs(z) < 3
            lines.append(f"{method}{pair}:z={z:+.2f}")
    elapsed = time.perf_counter() - t0
    ok = record(5, ok_all, "mean over 500 seeds within 3 SE of exact kernel, " + " ".join(lines), elapsed, 60)
    assert ok


def test_c06_variance_decay():
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    a = LocalDescriptorGrid(rng.normal(size=(1, 2, 2, 8)))
    b = LocalDescriptorGrid(rng.normal(size=(1, 2, 2, 8)))
    ratios = {}
    for method in ("rm", "ts"):
        base = SeededRng(606).child(ord(method[0]))
        v256 = _kernel_estimates(a, b, method, 256, 1000, base).var(ddof=1)
        v1024 = _kernel_estimates(a, b, method, 1024, 1000, base).var(ddof=1)
        ratios[method] = v1024 / v256
    elapsed = time.perf_counter() - t0
    ok = record(6, all(r <= 0.35 for r in ratios.values()),
                "var(d=1024)/var(d=256) " + ", ".join(f"{m}={r:.3f}" for m, r in ratios.items()) + " <= 0.35",
                elapsed, 60)
    assert ok


def test_c07_sweep_trend(tmp_path):
    t0 = time.perf_counter()
    out = tmp_path / "sweep.csv"
    dims = [64, 128, 256, 512, 1024, 2048, 4096, 8192]
    code = main(["kernel-sweep", "--method", "ts", "--c", "32", "--h", "4", "--w", "4",
                 "--dim", ",".join(map(str, dims)), "--pairs", "10", "--trials", "50",
                 "--seed", "7", "--output", str(out)])
    with open(out, encoding="utf-8") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    med = [float(r["median_rel_error"]) for r in rows if r["method"] == "ts"]
    decreasing = code == 0 and len(med) == len(dims) and all(b < a for a, b in zip(med, med[1:]))
    elapsed = time.perf_counter() - t0
    ok = record(7, decreasing, "TS median rel err strictly decreasing: " + " ".join(f"{m:.4f}" for m in med),
                elapsed, 300)
    assert ok


def test_c08_classification_parity():
    t0 = time.perf_counter()
    fb, ts = [], []
    for seed in range(10):
        grid, labels = make_synth(10, 60, 32, 4, 4, CALIBRATED_SPREAD, seed=seed)
        fb.append(holdout_accuracy(pool(grid, "bilinear"), labels, 30, seed))
        ts.append(holdout_accuracy(pool(grid, "ts", 1024, seed=seed), labels, 30, seed))
    gap = float(np.median(np.array(fb) - np.array(ts)))
    elapsed = time.perf_counter() - t0
    ok = record(8, abs(gap) <= 0.03,
                f"median FB acc {np.median(fb):.3f}, TS(d=1024) {np.median(ts):.3f}, "
                f"median paired gap {100 * gap:+.2f} pts (|gap| <= 3)", elapsed, 300)
    assert ok


def _monotone(curve, slack=0.02):
    return all(b >= a - slack for a, b in zip(curve, curve[1:]))


def test_c09_fewshot_trend():
    t0 = time.perf_counter()
    shots = [1, 2, 3, 7, 14]
    d_ts = 256  # c**2 = 1024
    fb, ts = [], []
    for trial in range(10):
        grid, labels = make_synth(10, 30, 32, 4, 4, CALIBRATED_SPREAD, seed=trial)
        fb.append([r.mean for r in fewshot_experiment(grid, labels, "bilinear", None, shots, 1, seed=trial)])
        ts.append([r.mean for r in fewshot_experiment(grid, labels, "ts", d_ts, shots, 1, seed=trial)])
    fb_med, ts_med = np.median(fb, axis=0), np.median(ts, axis=0)
    one_shot_ok = ts_med[0] >= fb_med[0]
    mono_ok = _monotone(fb_med) and _monotone(ts_med)
    elapsed = time.perf_counter() - t0
    detail = (f"1-shot median TS(d={d_ts}) {ts_med[0]:.3f} vs FB {fb_med[0]:.3f} "
              f"({'ok' if one_shot_ok else 'TS worse'}); monotone {'ok' if mono_ok else 'violated'}; "
              f"FB {np.round(fb_med, 3).tolist()} TS {np.round(ts_med, 3).tolist()}")
    ok = record(9, one_shot_ok and mono_ok, detail, elapsed, 600)
    assert ok


def test_c10_asymptotic_timing():
    t0 = time.perf_counter()
    ts_lo = bench("ts", 512, 4096, 13, 13, reps=21)
    ts_hi = bench("ts", 512, 8192, 13, 13, reps=21)
    fb_lo = bench("bilinear", 64, None, 13, 13, reps=21, n=8)
    fb_hi = bench("bilinear", 256, None, 13, 13, reps=21, n=8)
    ts_ratio = ts_hi.forward_s / ts_lo.forward_s
    fb_ratio = fb_hi.forward_s / fb_lo.forward_s
    elapsed = time.perf_counter() - t0
    ok = record(10, ts_ratio <= 2.6 and fb_ratio >= 8,
                f"TS fwd time x{ts_ratio:.2f} for 2x d (<= 2.6); bilinear fwd x{fb_ratio:.2f} for 4x c (>= 8)",
                elapsed, 300)
    assert ok
