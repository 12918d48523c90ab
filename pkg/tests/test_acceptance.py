"""Acceptance gate. Each test checks one criterion at its stated tolerance
and records a PASS/FAIL line that is printed in the terminal summary.

Criteria 5 to 7 share trained runs through a cache keyed by
(encoder, observable, lambda, seed); each criterion's reported runtime
is the sum of the runs it uses, whether or not they were cached.
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from qip import qsim
from qip.cli import main
from qip.cluster import bcubed_f, pairwise_f
from qip.config import Config
from qip.encode import EncodingSpec, encode_states
from qip.experiment import prop1_suite, random_state, refiner_benefit, run_point
from qip.gap import gap_pair
from qip.observe import ObservableSpec, quantum_map_batch

import gradcheck
import oracles
from test_cluster import enumerate_bcubed, enumerate_pairwise, random_labeling

pytestmark = pytest.mark.acceptance

DEFAULT = Config().validate()
SEEDS = DEFAULT.run.seeds
_RUNS: dict = {}


def record(report, number, ok, text):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
    report.append(line)
    print(line)
    return ok


def run_cached(encoder, observable, lam, seed):
    key = (encoder, observable, float(lam), seed)
    if key not in _RUNS:
        cfg = replace(DEFAULT, quantum=replace(DEFAULT.quantum, encoder=encoder, observable=observable))
        t0 = time.perf_counter()
        _, history, metrics = run_point(cfg.validate(), seed, lam)
        _RUNS[key] = (metrics, history, time.perf_counter() - t0)
    return _RUNS[key]


def mean_fp(encoder, observable, lam, space="quantum"):
    runs = [run_cached(encoder, observable, lam, s) for s in SEEDS]
    return float(np.mean([m[space]["F_P"] for m, _, _ in runs])), sum(t for _, _, t in runs)


def test_criterion_1_information_gap_suite(acceptance_report):
    t0 = time.perf_counter()
    r = DEFAULT.run
    suite = prop1_suite(r.prop1_qubits, ["Z", "X", "Y"], 1000, "haar", seed=r.seeds[0])
    worst_dense = 0.0
    for n in (2, 3, 4):
        for axis in "ZXY":
            rng = np.random.default_rng([r.seeds[0], n, "XYZ".index(axis)])
            obs = ObservableSpec.parse(axis)
            for _ in range(1000):
                a, b = random_state(n, rng), random_state(n, rng)
                rep = gap_pair(a, b, obs)
                outer = np.outer(a.amplitudes, b.amplitudes.conj())
                dense = sum(oracles.observable(axis, i, n) @ outer @ oracles.observable(axis, i, n) for i in range(n))
                worst_dense = max(worst_dense, abs(np.trace(dense) - rep.witness_trace))
    elapsed = time.perf_counter() - t0
    max_residual = max(v["max_witness_residual"] for v in suite.values())
    min_fraction = min(v["gap_fraction"] for v in suite.values())
    ok = max_residual < 1e-8 and worst_dense < 1e-8 and min_fraction >= 0.99 and elapsed < 30
    record(acceptance_report, 1, ok,
           f"witness residual {max_residual:.1e}, dense cross-check {worst_dense:.1e}, "
           f"min gap fraction {min_fraction:.3f} over {len(suite)} (n, axis) cells x 1000 pairs, {elapsed:.1f}s")
    assert ok


def test_criterion_2_gradient_suite(acceptance_report):
    t0 = time.perf_counter()
    worst, where = 0.0, None
    for kind in gradcheck.ENCODERS:
        for obs in gradcheck.OBSERVABLES:
            for seed in range(20):
                state = gradcheck.tiny_state(kind, obs, seed)
                X, y = gradcheck.tiny_batch(seed)
                err = gradcheck.max_relative_error(state, X, y)
                if err > worst:
                    worst, where = err, (kind, obs, seed)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 120
    record(acceptance_report, 2, ok,
           f"max relative error {worst:.2e} (at {where}) over 3 encoders x 4 observables x 20 seeds, {elapsed:.1f}s")
    assert ok


def test_criterion_3_simulator_oracles(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    gate_err = exp_err = map_err = y_max = 0.0
    for n in range(1, 6):
        for _ in range(10):
            z = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
            psi = qsim.StateVector(n, z / np.linalg.norm(z))
            q = int(rng.integers(n))
            axis = "XYZ"[int(rng.integers(3))]
            U = qsim.rotation_gate(axis, float(rng.uniform(-4, 4)))
            out = qsim.apply_gate(psi, q, U)
            gate_err = max(gate_err, np.max(np.abs(out.amplitudes - oracles.embed(U, q, n) @ psi.amplitudes)))
            if n > 1:
                t = (q + 1) % n
                out = qsim.apply_cnot(psi, q, t)
                gate_err = max(gate_err, np.max(np.abs(out.amplitudes - oracles.cnot_matrix(q, t, n) @ psi.amplitudes)))
            for ax in "XYZ":
                for i in range(n):
                    exp_err = max(exp_err, abs(qsim.expectation(psi, i, ax) - oracles.expect(psi.amplitudes, ax, i, n)))
        for kind in ("amplitude", "phase", "u3"):
            d = 2**n if kind == "amplitude" else 2 * n
            if kind == "amplitude":
                spec = EncodingSpec.amplitude(d)
            elif kind == "phase":
                spec = EncodingSpec.phase(d, n)
            else:
                spec = EncodingSpec.u3(d, n, pqc_params=rng.uniform(-3, 3, (2, n, 3)))
            V = rng.uniform(-2, 2, (5, d))
            for obs in ("Z", "X", "Y", "XZ"):
                got = quantum_map_batch(V, spec, ObservableSpec.parse(obs))
                for row, qv in zip(V, got):
                    map_err = max(map_err, np.max(np.abs(qv - oracles.feature_map(kind, row, n, obs, spec.pqc_params))))
        real = rng.standard_normal((20, 2**n))
        amps = encode_states(real, EncodingSpec.amplitude(2**n))
        y_max = max(y_max, float(np.max(np.abs(qsim.expectations(amps, n, "Y")))))
        amps = encode_states(rng.uniform(-3, 3, (20, 2 * n)), EncodingSpec.phase(2 * n, n))
        y_max = max(y_max, float(np.max(np.abs(qsim.expectations(amps, n, "Y")))))
    elapsed = time.perf_counter() - t0
    worst = max(gate_err, exp_err, map_err)
    ok = worst < 1e-12 and y_max < 1e-10 and elapsed < 30
    record(acceptance_report, 3, ok,
           f"gates {gate_err:.1e}, expectations {exp_err:.1e}, quantum_map {map_err:.1e} (n <= 5); "
           f"real-state <Y> max {y_max:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_metric_oracles(acceptance_report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    mismatches = 0
    for i in range(200):
        if i % 20 == 0:
            n = 300
            pred, true = rng.integers(0, 20, n).tolist(), rng.integers(0, 12, n).tolist()
        else:
            pred, true = random_labeling(rng)
        fp, fb = pairwise_f(pred, true), bcubed_f(pred, true)
        expected = enumerate_pairwise(pred, true)
        got = (0.0, 0.0, 0.0) if fp.degenerate else (fp.precision, fp.recall, fp.f_score)
        mismatches += got != (expected or (0.0, 0.0, 0.0))
        mismatches += (fb.precision, fb.recall, fb.f_score) != enumerate_bcubed(pred, true)
    worked_p = pairwise_f([0, 0, 0, 1], [0, 0, 1, 1]).f_score
    worked_b = bcubed_f([0, 0, 0, 1], [0, 0, 1, 1]).f_score
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and worked_p == 0.4 and worked_b == 12 / 17 and elapsed < 30
    record(acceptance_report, 4, ok,
           f"{mismatches} mismatches over 200 labelings (N <= 300); worked example F_P {worked_p}, "
           f"F_B {worked_b:.5f}, {elapsed:.1f}s")
    assert ok


def test_criterion_5_qip_trend(acceptance_report):
    q0, t_a = mean_fp("amplitude", "Z", 0.0)
    q5, t_b = mean_fp("amplitude", "Z", 0.5)
    c0, _ = mean_fp("amplitude", "Z", 0.0, "classical")
    c5, _ = mean_fp("amplitude", "Z", 0.5, "classical")
    elapsed = t_a + t_b
    dq, dc = q5 - q0, c5 - c0
    ok = dq >= 0.02 and abs(dc) < 0.02 and elapsed < 15 * 60
    record(acceptance_report, 5, ok,
           f"quantum F_P {100 * q0:.2f} -> {100 * q5:.2f} ({100 * dq:+.2f} pts), "
           f"classical F_P {100 * c0:.2f} -> {100 * c5:.2f} ({100 * dc:+.2f} pts), {len(SEEDS)} seeds, {elapsed:.0f}s")
    assert ok


def test_criterion_6_lambda_sweep(acceptance_report):
    lambdas = DEFAULT.sweep.lambdas
    means, elapsed = [], 0.0
    for lam in lambdas:
        m, t = mean_fp("amplitude", "Z", lam)
        means.append(m)
        elapsed += t
    best = int(np.argmax(means))
    interior = 0 < best < len(lambdas) - 1
    drop = means[best] - means[-1]
    ok = interior and drop >= 0.01 and elapsed < 90 * 60
    curve = ", ".join(f"{lam:g}: {100 * m:.1f}" for lam, m in zip(lambdas, means))
    record(acceptance_report, 6, ok,
           f"mean quantum F_P by lambda [{curve}]; argmax lambda {lambdas[best]:g}, "
           f"lambda={lambdas[-1]:g} is {100 * drop:.1f} pts below it, {elapsed:.0f}s")
    assert ok


ABLATION = [("amplitude", "Z"), ("amplitude", "X"), ("amplitude", "XZ"), ("phase", "Z"), ("u3", "Z"), ("u3", "Y")]


def test_criterion_7_encoder_observable_ablation(acceptance_report):
    parts, worst, elapsed = [], math.inf, 0.0
    for enc, obs in ABLATION:
        base, t0 = mean_fp(enc, obs, 0.0)
        qip, t1 = mean_fp(enc, obs, 0.5)
        elapsed += t0 + t1
        worst = min(worst, qip - base)
        parts.append(f"{enc}x{obs} {100 * base:.1f}->{100 * qip:.1f}")
    ok = worst > 0 and elapsed < 60 * 60
    record(acceptance_report, 7, ok,
           f"quantum F_P lambda 0 -> 0.5: {'; '.join(parts)}; smallest margin {100 * worst:+.2f} pts, {elapsed:.0f}s")
    assert ok


def test_criterion_8_refiner_benefit(acceptance_report):
    t0 = time.perf_counter()
    results = [refiner_benefit(DEFAULT, seed, 0.2) for seed in SEEDS]
    elapsed = time.perf_counter() - t0
    unrefined = float(np.mean([r["unrefined"]["F_P"] for r in results]))
    refined = float(np.mean([r["refined"]["F_P"] for r in results]))
    ok = refined - unrefined >= 0.01 and elapsed < 15 * 60
    record(acceptance_report, 8, ok,
           f"F_P with 20% injected cross-class members: unrefined {100 * unrefined:.2f}, refined {100 * refined:.2f} "
           f"({100 * (refined - unrefined):+.2f} pts), {len(SEEDS)} seeds, {elapsed:.0f}s")
    assert ok


def test_criterion_9_lambda_zero_and_determinism(acceptance_report, tmp_path):
    import csv

    cfg_text = "train.epochs = 3\nrun.seeds = 1\nsweep.lambdas = 0, 0.5\n"
    outputs = {}
    for run in ("a", "b"):
        path = tmp_path / f"{run}.cfg"
        path.write_text(cfg_text)
        for cmd in ("train", "sweep-lambda"):
            assert main([cmd, "--config", str(path), "--out", str(tmp_path / run)]) == 0
        outputs[run] = {p.relative_to(tmp_path / run): p.read_bytes() for p in sorted((tmp_path / run).rglob("*")) if p.is_file()}
    identical = outputs["a"] == outputs["b"] and len(outputs["a"]) >= 6

    with open(tmp_path / "a" / "seed1" / "lam0" / "history.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    worst = max(abs(float(r["L_QIP"]) - float(r["L"])) for r in rows)
    k_zero = all(float(r["K"]) == 0.0 for r in rows)
    ok = identical and worst <= 1e-15 and k_zero
    record(acceptance_report, 9, ok,
           f"lambda=0 max |L_QIP - L| {worst:.1e} over {len(rows)} steps, K identically 0: {k_zero}; "
           f"{len(outputs['a'])} output files bitwise identical across repeated runs: {identical}")
    assert ok
