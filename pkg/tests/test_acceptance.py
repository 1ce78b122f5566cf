"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py``; the verdicts appear in the
"acceptance criteria" section of the terminal summary.
"""

import time
from functools import reduce

import numpy as np
import pytest

from fgavqe.analysis import fidelity_upper_bound, ground_state_component, to_distribution, top_k
from fgavqe.cli import main
from fgavqe.encoding import build_hamiltonian, qubo_matrix
from fgavqe.fga_model import (
    GeneratorParams,
    brute_force_solve,
    generate_instance,
    overlap_set,
    total_time,
    violations,
)
from fgavqe.simulator import AnsatzSpec, apply_cnot, apply_ry, prepare, probabilities, sample, zero_state
from fgavqe.vqe import CvarConfig, cvar_exact, cvar_from_samples, evaluate_cost, optimize

from conftest import ACCEPTANCE_LINES, literal_decode


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# (|F|, |G|) per seed; Q ranges over 3..12 and covers non-power-of-two |G|
ENCODING_SHAPES = [
    (2, 3), (3, 4), (4, 3), (2, 5), (3, 5), (4, 4), (6, 4), (3, 6), (2, 7), (4, 2),
    (5, 3), (6, 2), (3, 8), (2, 16), (4, 5), (3, 3), (5, 2), (6, 3), (1, 5), (12, 2),
]


def test_criterion_1_encoding_matches_oracle():
    start = time.perf_counter()
    params = GeneratorParams(overlap_density=0.5)
    checked = mismatches = 0
    for seed, (nf, ng) in enumerate(ENCODING_SHAPES):
        inst = generate_instance(seed, nf, ng, params)
        h = build_hamiltonian(inst)
        lay = h.layout
        assert lay.n_qubits <= 12
        assert h.diagonal().dtype == np.int64
        diag = h.diagonal()
        for b in range(lay.dim):
            a = literal_decode(b, nf, ng, lay.bits_per_flight)
            expect = total_time(inst, a) + h.lam * violations(inst, a)
            mismatches += int(diag[b]) != expect
            checked += 1
    elapsed = time.perf_counter() - start
    verdict(1, mismatches == 0 and elapsed < 60,
            f"{checked} basis states over 20 instances, {mismatches} mismatches, {elapsed:.1f}s")


QUBO_SHAPES = [(2, 2), (2, 3), (3, 3), (2, 4), (4, 2), (3, 5), (4, 4), (2, 8), (5, 3), (4, 3), (1, 16), (8, 2)]


def _first_feasible(seeds, nf, ng):
    for s in seeds:
        inst = generate_instance(s, nf, ng, GeneratorParams(overlap_density=0.4))
        if brute_force_solve(inst).feasible:
            return inst
    raise AssertionError(f"no feasible {nf}x{ng} instance among the seeds")


def test_criterion_2_qubo_cross_check():
    agree = 0
    for k, (nf, ng) in enumerate(QUBO_SHAPES):
        inst = _first_feasible(range(100 * k, 100 * k + 100), nf, ng)
        w, c = qubo_matrix(inst)
        n = nf * ng
        x = ((np.arange(2**n)[:, None] >> np.arange(n)) & 1).astype(float)
        e = np.einsum("ki,ij,kj->k", x, w, x) + c
        blocks = x.reshape(-1, nf, ng)
        one_hot = (blocks.sum(axis=2) == 1).all(axis=1)
        ok = one_hot.copy()
        for i, j in overlap_set(inst):
            ok &= (blocks[:, i, :] * blocks[:, j, :]).sum(axis=1) == 0
        h = build_hamiltonian(inst)
        compact_min = int(h.diagonal().min())
        agree += e[ok].min() == compact_min == brute_force_solve(inst).min_cost
    verdict(2, agree == len(QUBO_SHAPES), f"{agree}/{len(QUBO_SHAPES)} instances with exact minimum match")


I2 = np.eye(2)
X = np.array([[0.0, 1.0], [1.0, 0.0]])
P0, P1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])


def _embed(ops, n):
    return reduce(np.kron, [ops.get(q, I2) for q in reversed(range(n))])


def _dense_prepare(spec, theta):
    n, u = spec.n_qubits, np.eye(2**spec.n_qubits)
    for layer in range(spec.layers):
        if layer:
            for c in range(n - 1):
                u = (_embed({c: P0}, n) + _embed({c: P1, c + 1: X}, n)) @ u
        for k in range(n):
            t = theta[layer * n + k]
            ry = np.array([[np.cos(t / 2), -np.sin(t / 2)], [np.sin(t / 2), np.cos(t / 2)]])
            u = _embed({k: ry}, n) @ u
    return u[:, 0]


def test_criterion_3_simulator():
    rng = np.random.default_rng(3)
    worst = 0.0
    for r in range(100):
        spec = AnsatzSpec(1 + r % 6, 1 + r % 3)
        theta = rng.uniform(-np.pi, np.pi, spec.n_params)
        worst = max(worst, float(np.max(np.abs(prepare(spec, theta) - _dense_prepare(spec, theta)))))
    state = zero_state(6)
    for _ in range(10**4):
        if rng.random() < 0.5:
            apply_ry(state, int(rng.integers(6)), float(rng.uniform(-np.pi, np.pi)))
        else:
            c, t = rng.choice(6, size=2, replace=False)
            state = apply_cnot(state, int(c), int(t))
    drift = abs(float(np.linalg.norm(state)) - 1.0)
    verdict(3, worst <= 1e-10 and drift <= 1e-10,
            f"max amplitude error {worst:.2e}, norm drift after 1e4 gates {drift:.2e}")


def test_criterion_4_cvar_estimator():
    rng = np.random.default_rng(4)
    mean_err = 0.0
    monotone = True
    for _ in range(1000):
        e = rng.integers(-100, 100, size=int(rng.integers(1, 200))).astype(float)
        mean_err = max(mean_err, abs(cvar_from_samples(e, 1.0) - e.mean()))
        eps = np.sort(rng.uniform(1e-3, 1.0, 8))
        vals = [cvar_from_samples(e, x) for x in eps]
        monotone &= all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
    hand = cvar_from_samples([1, 2, 3, 4], 0.5)
    verdict(4, mean_err <= 1e-12 and hand == 1.5 and monotone,
            f"eps=1 error {mean_err:.1e}, hand case {hand}, monotone on 1000 multisets: {monotone}")


def _converged_run(h, init_seed=0):
    spec = AnsatzSpec(h.n_qubits, 2)
    cfg = CvarConfig(epsilon=0.5, shots=None, max_iterations=50 * h.n_qubits, init_seed=init_seed)
    res = optimize(h, spec, cfg)
    return spec, res, abs(res.final_cvar - h.min_energy()) <= 1e-6


def test_criterion_5_full_vqe_convergence():
    start = time.perf_counter()
    hits, evals = 0, []
    for seed in range(10):
        inst = generate_instance(seed, 2, 4)
        h = build_hamiltonian(inst)
        spec = AnsatzSpec(4, 2)
        res = optimize(h, spec, CvarConfig(epsilon=0.5, shots=None, max_iterations=200))
        assert res.n_evaluations <= 200
        e_min = brute_force_solve(inst).min_cost
        ok = abs(res.final_cvar - e_min) <= 1e-6
        hits += ok
        if ok:
            evals.append(res.n_evaluations)
    elapsed = time.perf_counter() - start
    verdict(5, hits >= 8 and elapsed < 120,
            f"{hits}/10 reached oracle minimum, evaluations {min(evals)}-{max(evals)}, {elapsed:.1f}s")


def _runs(n_flights):
    out = []
    for seed in range(10):
        h = build_hamiltonian(generate_instance(seed, n_flights, 4))
        out.append((h, *_converged_run(h)))
    return out


@pytest.fixture(scope="module")
def q6_runs():
    return _runs(3)


def test_criterion_6_ground_component_near_eps(q6_runs):
    details = []
    passed = True
    for q, runs in ((4, _runs(2)), (6, q6_runs)):
        masses = []
        good = 0
        for h, spec, res, ok in runs:
            m = ground_state_component(probabilities(prepare(spec, res.final_params)), h)
            masses.append(m)
            good += ok and 0.35 <= m <= 0.65
        passed &= good >= 8
        details.append(f"Q={q}: {good}/10 converged in band, mass {min(masses):.3f}-{max(masses):.3f}")
    verdict(6, passed, "; ".join(details))


@pytest.fixture(scope="module")
def converged_q6(q6_runs):
    # the converged run whose ground mass sits closest to eps stresses the tail boundary most
    def gap(run):
        h, spec, res, _ = run
        return abs(ground_state_component(probabilities(prepare(spec, res.final_params)), h) - 0.5)

    h, spec, res, _ = min((r for r in q6_runs if r[3]), key=gap)
    return h, spec, res.final_params


def test_criterion_7_shot_consistency(converged_q6):
    h, spec, params = converged_q6
    exact = cvar_exact(probabilities(prepare(spec, params)), h.diagonal(), 0.5)

    def estimate(seed):
        return evaluate_cost(h, spec, params, CvarConfig(epsilon=0.5, shots=1000, rng_seed=seed))

    # sigma: spread of the 1000-shot tail-sample mean over independent reference draws
    sigma = float(np.std([estimate(10**6 + r) for r in range(2000)], ddof=1))
    devs = np.array([abs(estimate(r) - exact) for r in range(100)])
    within = int((devs <= 3 * sigma).sum())
    verdict(7, within >= 95, f"{within}/100 within 3 sigma, sigma={sigma:.4g}, max dev {devs.max():.4g}")


def test_criterion_8_fidelity_bound(converged_q6):
    h, spec, params = converged_q6
    p = np.array([0.1, 0.2, 0.3, 0.4])
    same = fidelity_upper_bound(p, p)
    half = fidelity_upper_bound([0.5, 0.5], [1.0, 0.0])
    state = prepare(spec, params)
    empirical = to_distribution(sample(state, 10**6, 8), spec.n_qubits)
    bound = fidelity_upper_bound(empirical, probabilities(state))
    verdict(8, same == 1.0 and half == 0.5 and bound >= 0.999,
            f"identical {same}, half {half}, K=1e6 empirical vs exact {bound:.6f}")


def test_criterion_9_q18_pipeline():
    start = time.perf_counter()
    inst = generate_instance(9, 9, 4)
    h = build_hamiltonian(inst)
    spec = AnsatzSpec(h.n_qubits, 2)
    theta = np.random.default_rng(9).uniform(-np.pi, np.pi, spec.n_params)
    t0 = time.perf_counter()
    state = prepare(spec, theta)
    t_prepare = time.perf_counter() - t0
    counts = sample(state, 10000, 1)
    summary = top_k(counts, h, 10)
    bound = fidelity_upper_bound(to_distribution(counts, h.n_qubits), probabilities(state))
    total = time.perf_counter() - start
    assert h.n_qubits == 18 and 0 <= summary.ground_mass <= 1 and 0 <= bound <= 1
    verdict(9, total < 10 and t_prepare < 1, f"pipeline {total:.2f}s, prepare {t_prepare:.3f}s at Q=18")


def test_criterion_10_cli_determinism(tmp_path, capsys):
    argv = ["vqe", "--instance-seed", "5", "--flights", "3", "--gates", "4", "--max-iterations", "60",
            "--init-seed", "2", "--sampling-seed", "9"]
    for name in ("a", "b"):
        assert main(argv + ["--out", str(tmp_path / name)]) == 0
    capsys.readouterr()
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    other = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    same = files == other and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files
    )
    verdict(10, same, f"{len(files)} output files compared byte for byte")
