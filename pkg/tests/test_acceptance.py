"""The twelve acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, and the full list is printed in the
"acceptance criteria" section at the end of the pytest run.
"""

from __future__ import annotations

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import record_criterion, repetition_small, surface
from randcirc import random_circuit
from scurve_checks import axiom_failures, derivative_errors, random_model
from stratqec.circuit import CodeSpec, generate_code
from stratqec.cli import SWEEP_S, main
from stratqec.pipeline import AdapSamConfig, estimate_logical_error_rate, run_scaler
from stratqec.qepg import compile_qepg
from stratqec.sampling import (SamplerConfig, SubspaceStats, binomial_weight_probability,
                               sample_baseline, sample_weight_w, write_stats_csv)
from stratqec.scurve import SCurveModel, compute_w_sat, compute_w_sweet, eval_f, fit
from test_decoders import SINGLE_X_ROWS, single_x_rows
from test_qepg import _oracle_agrees, _random_faults

SUBSPACE_W = [12, 13, 15, 17, 19, 21, 32, 43, 54, 65]
SUBSPACE_N = [207499, 107499, 57499, 40833, 28333, 18333, 10000, 10000, 10000, 10000]
REFERENCE = SCurveModel.ours(3, 34.14, 17.57, 19.71)
P = 5e-4


def check(number: int, ok: bool, detail: str) -> None:
    record_criterion(number, ok, detail)
    assert ok, detail


def test_criterion_01_single_fault_rows():
    start = time.perf_counter()
    c = generate_code(CodeSpec("repetition", 3, 1))
    g = compile_qepg(c)
    rows = single_x_rows(c, g)
    rate = Fraction(sum(r[4] for r in rows.values()), len(rows))
    elapsed = time.perf_counter() - start
    mismatched = [k for k in SINGLE_X_ROWS if rows.get(k) != SINGLE_X_ROWS[k]]
    ok = not mismatched and len(rows) == 11 and rate == Fraction(2, 11) and elapsed < 1.0
    check(1, ok, f"11 rows, mismatches {mismatched}, P_L = {rate}, {elapsed:.3f} s")


def test_criterion_02_fault_tolerant_zone():
    parts, ok = [], True
    for d in (3, 5, 7):
        _, g, dec = surface(d)
        errs = [sample_weight_w(g, dec, w, 100_000, SamplerConfig(seed=d * 10 + w)).num_logical_errors
                for w in range(1, (d - 1) // 2 + 1)]
        ok &= all(e == 0 for e in errs)
        parts.append(f"d={d}: errors {errs}")
    check(2, ok, "10^5 shots per weight w <= t; " + "; ".join(parts))


def test_criterion_03_oracle_equivalence():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    bad = 0
    for _ in range(50):
        c = random_circuit(rng, max_qubits=10, max_ops=40)
        bad += _oracle_agrees(c, compile_qepg(c), _random_faults(rng, c, 1000), rng)
    elapsed = time.perf_counter() - start
    check(3, bad == 0 and elapsed < 60,
          f"50 circuits x 1000 fault sets, {bad} mismatches, {elapsed:.1f} s")


def test_criterion_04_binomial_weights():
    probs = np.array([binomial_weight_probability(9121, P, w) for w in range(9122)])
    total = math.fsum(probs)
    mode = int(np.argmax(probs))
    check(4, abs(total - 1) <= 1e-9 and mode == 4,
          f"sum - 1 = {total - 1:.2e}, mode at w = {mode}")


def test_criterion_05_axioms():
    counts = {}
    for variant in ("ours", "ibm", "generalized"):
        rng = np.random.default_rng(5)
        counts[variant] = sum(bool(axiom_failures(random_model(rng, variant))) for _ in range(100))
    detail = ", ".join(f"{v} {n}/100 failing" for v, n in counts.items())
    check(5, not any(counts.values()), detail)


def test_criterion_06_derivatives():
    worst = {}
    for variant in ("ours", "ibm", "generalized"):
        rng = np.random.default_rng(6)
        worst[variant] = max(max(derivative_errors(random_model(rng, variant))) for _ in range(100))
    detail = ", ".join(f"{v} max rel {e:.1e}" for v, e in worst.items())
    check(6, max(worst.values()) < 1e-5, detail)


def test_criterion_07_fit_recovery():
    truth = np.array([34.14, 17.57, 19.71])
    clean = [(w, eval_f(REFERENCE, w), n) for w, n in zip(SUBSPACE_W, SUBSPACE_N)]
    m = fit(clean, "ours", 3).model
    clean_err = float(np.max(np.abs(np.array([m.mu, m.alpha, m.beta]) / truth - 1)))
    estimates = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        data = [(w, rng.binomial(n, eval_f(REFERENCE, w)) / n, n) for w, n in zip(SUBSPACE_W, SUBSPACE_N)]
        m = fit(data, "ours", 3).model
        estimates.append([m.mu, m.alpha, m.beta])
    est = np.array(estimates)
    per_trial = int(np.sum(np.all(np.abs(est / truth - 1) <= 0.10, axis=1)))
    mean_err = np.abs(est.mean(axis=0) / truth - 1)
    ok = clean_err <= 1e-6 and bool(np.all(mean_err <= 0.10))
    check(7, ok, f"noiseless max rel {clean_err:.1e}; noisy mean over 20 trials rel "
                 f"(mu, alpha, beta) = ({mean_err[0]:.3f}, {mean_err[1]:.3f}, {mean_err[2]:.3f}); "
                 f"{per_trial}/20 single trials inside 10%")


def test_criterion_08_sweet_and_saturation():
    m = SCurveModel.ours(3, 41.71, 19.93, 16.03)
    sweet, sat = compute_w_sweet(m, 1.0), compute_w_sat(m)
    check(8, sweet == 12 and sat == 65, f"w_sweet = {sweet} (want 12), w_sat = {sat} (want 65)")


def test_criterion_09_estimator():
    p_l, region = estimate_logical_error_rate(REFERENCE, 9121, P, 3)
    rel = p_l / 4.36e-6 - 1
    check(9, abs(rel) <= 0.05, f"P_L = {p_l:.4e} over w in {list(region)}, {rel:+.1%} from 4.36e-6")


def _agreement(d: int, s_max: int) -> dict:
    _, g, dec = surface(d)
    scaler, base = [], []
    for seed in range(5):
        r = run_scaler(g, d, P, AdapSamConfig(s_max=s_max), seed=seed, decoder=dec)
        b = sample_baseline(g, dec, P, SamplerConfig(seed=seed, p=P), max_errors=100)
        scaler.append((r.p_l_hat, r.total_shots))
        base.append((b.p_hat, b.shots))
    s = np.array(scaler)
    b = np.array(base)
    return {"rel": s[:, 0].mean() / b[:, 0].mean() - 1,
            "per_seed": s[:, 0] / b[:, 0] - 1,
            "shot_ratio": s[:, 1].sum() / b[:, 1].sum()}


def test_criterion_10_end_to_end():
    a3 = _agreement(3, 500_000)
    a5 = _agreement(5, 50_000)
    ok = abs(a3["rel"]) <= 0.10 and abs(a5["rel"]) <= 0.50 and a5["shot_ratio"] <= 0.05
    per = lambda a: " ".join(f"{x:+.0%}" for x in a["per_seed"])  # noqa: E731
    check(10, ok, f"5-seed mean rel. error d=3 {a3['rel']:+.1%} (seeds {per(a3)}), "
                  f"d=5 {a5['rel']:+.1%} (seeds {per(a5)}); d=5 shot ratio {a5['shot_ratio']:.1%}")


def test_criterion_11_gamma_tradeoff():
    _, g, dec = surface(5)
    runs = [run_scaler(g, 5, P, AdapSamConfig(s_max=1_000_000, gamma=gm), seed=0, decoder=dec)
            for gm in (0.5, 1.0, 2.0)]
    sweet = [r.w_sweet for r in runs]
    shots = [r.total_shots for r in runs]
    ok = sweet == sorted(sweet, reverse=True) and shots == sorted(shots)
    check(11, ok, f"Gamma 0.5/1/2: w_sweet {sweet}, total shots {shots}")


def _noisy_sweep_wins(truth: SCurveModel, trials: int = 20) -> int:
    wins = 0
    for seed in range(trials):
        rng = np.random.default_rng(seed)
        data = [(w, rng.binomial(n, eval_f(truth, w)) / n, n) for w, n in zip(SUBSPACE_W, SUBSPACE_N)]
        r2 = {s: fit(data, "generalized", 3, s=s).r_squared_y for s in (0.25, 1 / 3, 0.5, 1.0, 2.0)}
        wins += max(r2, key=r2.get) == 0.5
    return wins


def test_criterion_12_variant_sweep(tmp_path):
    truth = SCurveModel("generalized", 3, 34.14, 17.57, 19.71, 0.5)
    # the model's own expected error counts at the reference sample sizes
    stats = [SubspaceStats(w, n, int(round(n * eval_f(truth, w))))
             for w, n in zip(SUBSPACE_W, SUBSPACE_N)]
    csv = tmp_path / "subspaces.csv"
    write_stats_csv(csv, stats)
    code = main(["fit", str(csv), "-t", "3", "--sweep", "-o", str(tmp_path / "fits")])
    docs = [json.loads(p.read_text()) for p in sorted((tmp_path / "fits").glob("fit_*.json"))]
    r2 = {d["model"]["s"]: d["r_squared_y"] for d in docs}
    best = max(r2, key=r2.get)
    ok = code == 0 and len(docs) == len(SWEEP_S) and best == pytest.approx(0.5)
    detail = ", ".join(f"s={s:.3g} R2_y={v:.6f}" for s, v in sorted(r2.items()))
    check(12, ok, f"{len(docs)} fits; best s = {best:.3g}; {detail}; with binomial noise "
                  f"s=1/2 is best in {_noisy_sweep_wins(truth)}/20 seeds")
