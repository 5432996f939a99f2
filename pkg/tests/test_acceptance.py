"""Acceptance gate: one test per criterion, each logging a single PASS/FAIL line.

Thresholds and runtime budgets are the contractual ones. Fixed seeds make the
outcome reproducible. Run ``pytest tests/test_acceptance.py -v``; the lines
are collected in the "acceptance criteria" section of the terminal summary.
"""
import filecmp
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats

from infoextract import (analyze_pair, conditional_mi_reference, decouple, dependence_report,
                         direct_mutual_information, fit_extraction, fit_residues,
                         iterate_extraction, legendre_matrix, multivariate_granger, pca_reduce,
                         reconstruct, synth)
from infoextract.extraction import apply_extraction, invert_extraction
from infoextract.granger import delay_profile
from infoextract.infoflow import mutual_information_binned, spearman

G = 1024


def gaussian_mi(rho):
    return -0.5 * np.log(1 - rho ** 2)


def check(log, number, title, verdicts, detail, elapsed, budget):
    """Log one line for the criterion and fail the test unless every verdict holds."""
    timely = elapsed <= budget
    ok = all(verdicts.values()) and timely
    failed = [k for k, v in verdicts.items() if not v] + ([] if timely else ["runtime"])
    status = "PASS" if ok else "FAIL (" + ", ".join(failed) + ")"
    line = f"criterion {number:2d} {title}: {status} | {detail} | {elapsed:.1f}s <= {budget:g}s"
    log.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def copula_data():
    return synth("gaussian-copula", seed=2024, normalized=True, rho=0.7, n=10000)


def test_criterion_01_basis_orthonormality(acceptance_log):
    t0 = time.perf_counter()
    x, w = np.polynomial.legendre.leggauss(64)
    F = legendre_matrix((x + 1) / 2, 8)
    err = float(np.max(np.abs(F.T @ ((w / 2)[:, None] * F) - np.eye(9))))
    elapsed = time.perf_counter() - t0
    check(acceptance_log, 1, "basis orthonormality", {"gram": err <= 1e-8},
          f"max |Gram - I| = {err:.1e} (<= 1e-8)", elapsed, 1)


def _worst_bin_ks(xbar, y, bins=10):
    idx = np.minimum((y * bins).astype(int), bins - 1)
    return [float(stats.kstest(xbar[idx == b], "uniform").statistic) for b in range(bins)]


def test_criterion_02_per_bin_uniformization(acceptance_log, copula_data):
    t0 = time.perf_counter()
    x, y = copula_data.column("x"), copula_data.column("y")
    before = mutual_information_binned(x, y).value
    layer = fit_extraction(copula_data, "x", ["y"], degree=4, grid_size=G)
    xbar = layer.forward(copula_data)
    ks = _worst_bin_ks(xbar, y)
    after = mutual_information_binned(xbar, y).value
    elapsed = time.perf_counter() - t0
    verdicts = {"per-bin KS": max(ks) <= 0.05, "MI after": after <= 0.05,
                "MI before": abs(before - gaussian_mi(0.7)) <= 0.08}
    check(acceptance_log, 2, "per-bin uniformization", verdicts,
          f"max per-y-bin KS {max(ks):.4f} (<= 0.05; bins {np.round(ks, 3).tolist()}), "
          f"MI after {after:.4f} nats (<= 0.05), MI before {before:.4f} "
          f"(0.337 +- 0.08)", elapsed, 5)


def test_criterion_03_reversibility(acceptance_log, copula_data):
    t0 = time.perf_counter()
    layer = fit_extraction(copula_data, "x", ["y"], grid_size=G)
    rows = synth("independent", seed=3, normalized=True, n=1000, dims=2)
    rows = type(rows)(["x", "y"], rows.data)
    back = invert_extraction(layer, apply_extraction(layer, rows))
    single = float(np.max(np.abs(back.data - rows.data)))
    table = synth("gaussian-copula", seed=33, normalized=True, n=1000, dims=3, rho=0.5)
    dec = decouple(table, sweeps=2, track=False)
    chain = float(np.max(np.abs(reconstruct(dec).data - table.data)))
    elapsed = time.perf_counter() - t0
    verdicts = {"layer": single <= 2 / G, "decouple": chain <= 12 / G}
    check(acceptance_log, 3, "reversibility", verdicts,
          f"layer roundtrip {single:.2e} (<= {2 / G:.2e}), 3-column 2-sweep roundtrip "
          f"{chain:.2e} (<= {12 / G:.2e})", elapsed, 5)


def test_criterion_04_iterated_extraction(acceptance_log, copula_data):
    t0 = time.perf_counter()
    y = copula_data.column("y")
    first, second = iterate_extraction(copula_data, "x", ["y"], k=2)
    t1 = apply_extraction(first, copula_data)
    t2 = apply_extraction(second, t1)
    mi1 = mutual_information_binned(t1.column("x"), y).value
    mi2 = mutual_information_binned(t2.column("x"), y).value
    elapsed = time.perf_counter() - t0
    check(acceptance_log, 4, "iterated extraction", {"monotone": mi2 <= mi1 + 0.01},
          f"MI iteration 1 {mi1:.4f}, iteration 2 {mi2:.4f} nats (<= it.1 + 0.01)",
          elapsed, 5)


def test_criterion_05_decoupling(acceptance_log):
    t0 = time.perf_counter()
    table = synth("gaussian-copula", seed=55, normalized=True, n=10000, dims=4, rho=0.5)
    dec = decouple(table, sweeps=2, track=False)
    rep = dependence_report(dec.result)
    elapsed = time.perf_counter() - t0
    verdicts = {"spearman": rep.max_spearman <= 0.05, "MI": rep.max_mi <= 0.03}
    check(acceptance_log, 5, "decoupling", verdicts,
          f"max |Spearman| {rep.max_spearman:.4f} (<= 0.05), max MI {rep.max_mi:.4f} nats "
          f"(<= 0.03)", elapsed, 20)


def test_criterion_06_direct_mi(acceptance_log):
    t0 = time.perf_counter()
    chain = synth("markov-chain", seed=66, normalized=True, n=10000)
    est = direct_mutual_information(chain, "x", "y", ["z"])
    ref = conditional_mi_reference(chain, "x", "y", ["z"])
    raw, direct = est.details["raw"], est.value
    elapsed = time.perf_counter() - t0
    verdicts = {"I(X;Y)": raw >= 0.1, "I_d": direct <= 0.02,
                "verdict": (direct < 0.05) == (ref.value < 0.05) and ref.value < 0.05}
    check(acceptance_log, 6, "direct MI", verdicts,
          f"I(X;Y) {raw:.4f} (>= 0.1), I_d {direct:.4f} (<= 0.02), reference CMI "
          f"{ref.value:.4f} (< 0.05)", elapsed, 10)


def test_criterion_07_delay_recovery(acceptance_log):
    t0 = time.perf_counter()
    hits = {}
    for d in (1, 3, 8):
        found = []
        for seed in range(10):
            t = synth("lagged-pair", seed=700 + seed, normalized=True, n=5000, delay=d,
                      coupling=0.8)
            res = fit_residues(t.column("x"), lags=2, source="x")
            found.append(delay_profile(res, t.column("y"), 10).argmax_delay)
        hits[d] = sum(f == d for f in found)
    elapsed = time.perf_counter() - t0
    check(acceptance_log, 7, "Granger delay recovery",
          {f"d={d}": h >= 9 for d, h in hits.items()},
          "hits per planted delay " + ", ".join(f"d={d}: {h}/10" for d, h in hits.items())
          + " (>= 9/10)", elapsed, 30)


def test_criterion_08_multifeature_consistency(acceptance_log):
    t0 = time.perf_counter()
    t = synth("lagged-pair", seed=88, normalized=True, delay=3)
    pair = analyze_pair(t.column("x"), t.column("y"), 2, 10, source="y", target="x")
    a11 = pair.field.coeffs[:, 1, 1]
    a11_arg = int(pair.field.delays[np.argmax(np.abs(a11))])
    frac = pair.decomposition.variance_fraction
    full = pca_reduce(pair.field, rank=min(len(pair.field.delays), 16))
    rec = float(np.max(np.abs(full.reconstruct() - pair.field.block())))
    elapsed = time.perf_counter() - t0
    verdicts = {"argmax": a11_arg == pair.profile.argmax_delay, "rank-1": frac >= 0.8,
                "reconstruction": rec <= 1e-9}
    check(acceptance_log, 8, "multi-feature consistency", verdicts,
          f"a_11 argmax {a11_arg} vs correlation argmax {pair.profile.argmax_delay}, rank-1 "
          f"variance {frac:.3f} (>= 0.8), full-rank error {rec:.1e} (<= 1e-9)", elapsed, 10)


def test_criterion_09_chain_deconfounding(acceptance_log):
    t0 = time.perf_counter()
    panel = synth("lagged-chain", seed=99, n=5000)
    with_dec = multivariate_granger(panel, lags=2, max_delay=10, decouple_first=True)
    without = multivariate_granger(panel, lags=2, max_delay=10, decouple_first=False)
    xz, xz_raw = with_dec.pair("x", "z"), without.pair("x", "z")
    xy, yz = with_dec.pair("x", "y"), with_dec.pair("y", "z")
    elapsed = time.perf_counter() - t0
    verdicts = {"X->Z decoupled": xz.peak_abs_correlation <= 0.05,
                "X->Z raw": xz_raw.peak_abs_correlation > 0.05,
                "links": xy.peak_delay == 2 and yz.peak_delay == 3}
    check(acceptance_log, 9, "chain de-confounding", verdicts,
          f"X->Z peak {xz.peak_abs_correlation:.4f} decoupled (<= 0.05) vs "
          f"{xz_raw.peak_abs_correlation:.4f} raw (> 0.05); X->Y lag {xy.peak_delay}, "
          f"Y->Z lag {yz.peak_delay}", elapsed, 30)


def test_criterion_10_estimator_calibration(acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    u = rng.random(10000)
    same = mutual_information_binned(u, u, 16).value
    indep = mutual_information_binned(u, rng.random(10000), 16).value
    copula = {}
    for rho in (0.5, 0.7):
        t = synth("gaussian-copula", seed=1000 + int(rho * 10), normalized=True, rho=rho)
        copula[rho] = mutual_information_binned(t.column("x"), t.column("y"), 16).value
    elapsed = time.perf_counter() - t0
    verdicts = {"identical": abs(same - np.log(16)) <= 0.1, "independent": indep <= 0.02,
                **{f"rho={r}": abs(v - gaussian_mi(r)) <= 0.08 for r, v in copula.items()}}
    check(acceptance_log, 10, "estimator calibration", verdicts,
          f"identical {same:.4f} (ln16 = {np.log(16):.4f} +- 0.1), independent {indep:.4f} "
          f"(<= 0.02), " + ", ".join(f"rho={r}: {v:.4f} vs {gaussian_mi(r):.4f}"
                                     for r, v in copula.items()), elapsed, 5)


PIPELINE = [
    ["synth", "--kind", "gaussian-copula", "--rho", "0.7", "--n", "10000", "--seed", "1",
     "-o", "d.csv"],
    ["synth", "--kind", "markov-chain", "--seed", "2", "-o", "chain.csv"],
    ["synth", "--kind", "lagged-chain", "--seed", "3", "--n", "3000", "-o", "panel.csv"],
    ["normalize", "-i", "d.csv", "-o", "dn.csv", "--maps", "maps.json"],
    ["extract", "-i", "d.csv", "--target", "x", "--given", "y", "--iterations", "2",
     "-o", "out.csv", "--layers", "l.json", "--plot", "scatter.svg"],
    ["reconstruct", "-i", "out.csv", "--layers", "l.json", "-o", "back.csv"],
    ["decouple", "-i", "chain.csv", "-o", "dec.csv", "--layers", "dl.json",
     "--report", "dr.json"],
    ["reconstruct", "-i", "dec.csv", "--layers", "dl.json", "-o", "decb.csv", "--denormalize"],
    ["mi", "-i", "d.csv", "--x", "x", "--y", "y", "-o", "mi.json"],
    ["dmi", "-i", "chain.csv", "--matrix", "m.csv", "--reference", "-o", "dmi.json"],
    ["granger", "-i", "panel.csv", "--target", "y", "--source", "x", "--lags", "2",
     "--max-delay", "10", "--plot", "p.svg", "-o", "pair"],
    ["granger", "-i", "panel.csv", "--max-delay", "6", "-o", "panel"],
    ["report", "-i", "chain.csv", "-o", "report.json"],
]


def _run_pipeline(cwd):
    stdout = []
    for argv in PIPELINE:
        proc = subprocess.run([sys.executable, "-m", "infoextract", *argv], cwd=cwd,
                              capture_output=True, text=True)
        assert proc.returncode == 0, (argv, proc.stderr)
        stdout.append(proc.stdout)
    return stdout


def test_criterion_11_determinism(acceptance_log, tmp_path):
    t0 = time.perf_counter()
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    out_a, out_b = _run_pipeline(a), _run_pipeline(b)
    files = sorted(os.listdir(a))
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    elapsed = time.perf_counter() - t0
    kinds = sorted({f.rsplit(".", 1)[-1] for f in files})
    verdicts = {"files": not mismatch and not errors and files == sorted(os.listdir(b)),
                "stdout": out_a == out_b}
    check(acceptance_log, 11, "determinism", verdicts,
          f"{len(files)} artifacts ({', '.join(kinds)}) across {len(PIPELINE)} commands, "
          f"mismatches: {mismatch + errors}", elapsed, 60)
