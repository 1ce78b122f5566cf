"""CVaR cost functions, the derivative-free optimization loop and inference runs.

One "iteration" is one cost-function evaluation throughout; the trace records
every evaluation in order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .encoding import DiagonalHamiltonian, decode_bitstring, index_to_bitstring
from .simulator import AnsatzSpec, make_rng, prepare, probabilities, sample

OPTIMIZERS = ("cobyla", "nelder-mead")
INIT_STRATEGIES = ("uniform", "zeros")

# probability below which a basis state counts as "not observed" in exact mode
_SUPPORT_ATOL = 1e-12


class OptimizationError(RuntimeError):
    """The optimizer or cost function failed; ``trace`` holds what was recorded."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class CvarConfig:
    """How a CVaR-VQE run measures and optimizes.

    ``shots=None`` selects exact mode (cost from the full statevector
    distribution); otherwise each evaluation samples ``shots`` measurements.
    """

    epsilon: float = 0.5
    shots: int | None = 1000
    max_iterations: int = 200
    optimizer: str = "cobyla"
    rng_seed: int = 0
    init_strategy: str = "uniform"
    init_seed: int = 0
    rhobeg: float = 0.3
    tol: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; choose from {OPTIMIZERS}")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"unknown init strategy {self.init_strategy!r}")

    @property
    def exact(self) -> bool:
        return self.shots is None


def tail_count(epsilon: float, n: int) -> int:
    """``ceil(epsilon * n)``, immune to products like ``0.7 * 10 = 7.000000000000001``."""
    return max(1, min(n, math.ceil(round(epsilon * n, 9))))


def cvar_from_samples(energies, epsilon: float) -> float:
    """Mean of the ``ceil(epsilon * K)`` smallest of ``K`` sampled energies."""
    e = np.sort(np.asarray(energies, dtype=np.float64).reshape(-1), kind="stable")
    if e.size == 0:
        raise ValueError("need at least one sample")
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    k = tail_count(epsilon, e.size)
    return float(math.fsum(e[:k]) / k)


def tail_from_counts(indices, energies, counts, epsilon: float):
    """Lowest ``ceil(epsilon * K)`` samples of a histogram as ``(indices, energies, counts)``.

    Samples are ordered by energy, ties by basis index.
    """
    indices = np.asarray(indices)
    energies = np.asarray(energies, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        raise ValueError("need at least one sample")
    k = tail_count(epsilon, total)
    order = np.lexsort((indices, energies))
    c = counts[order]
    cum = np.cumsum(c)
    last = int(np.searchsorted(cum, k))
    take = c[: last + 1].copy()
    take[-1] -= cum[last] - k
    return indices[order][: last + 1], energies[order][: last + 1], take


def cvar_from_counts(indices, energies, counts, epsilon: float) -> float:
    """Same value as :func:`cvar_from_samples` on the expanded histogram."""
    _, e, c = tail_from_counts(indices, energies, counts, epsilon)
    return float(math.fsum(e * c) / c.sum())


def cvar_exact(probs, energies, epsilon: float) -> float:
    """CVaR of a discrete distribution, weighting the boundary state fractionally."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    e = np.asarray(energies, dtype=np.float64).reshape(-1)
    order = np.lexsort((np.arange(e.size), e))
    p, e = p[order], e[order]
    cum = np.cumsum(p)
    b = min(int(np.searchsorted(cum, epsilon)), e.size - 1)
    # measured relative to the boundary energy so a point mass comes out exact
    return float(e[b] + math.fsum(p[:b] * (e[:b] - e[b])) / epsilon)


def _energy_lookup(h: DiagonalHamiltonian, indices) -> np.ndarray:
    if h.n_qubits <= 20:
        return h.diagonal()[np.asarray(indices, dtype=np.int64)]
    return h.energies(indices)


@dataclass
class _Evaluation:
    cost: float
    best_index: int
    best_energy: float
    histogram: dict


def _measure(h, spec, params, config: CvarConfig, rng) -> _Evaluation:
    state = prepare(spec, params)
    if config.exact:
        p = probabilities(state)
        diag = h.diagonal()
        cost = cvar_exact(p, diag, config.epsilon)
        support = np.flatnonzero(p > _SUPPORT_ATOL)
        best = int(support[np.argmin(diag[support])])
        hist = {int(i): float(p[i]) for i in support}
        return _Evaluation(cost, best, float(diag[best]), hist)
    hist = sample(state, config.shots, rng)
    idx = np.fromiter(hist.keys(), dtype=np.int64)
    cnt = np.fromiter(hist.values(), dtype=np.int64)
    e = _energy_lookup(h, idx)
    cost = cvar_from_counts(idx, e, cnt, config.epsilon)
    j = int(np.lexsort((idx, e))[0])
    return _Evaluation(cost, int(idx[j]), float(e[j]), hist)


def evaluate_cost(
    h: DiagonalHamiltonian, spec: AnsatzSpec, params, config: CvarConfig, rng=None
) -> float:
    """CVaR cost of ``params``.

    Exact mode uses the full distribution; sampled mode draws ``config.shots``
    measurements from ``rng`` (default: a fresh generator seeded with
    ``config.rng_seed``).
    """
    if spec.n_qubits != h.n_qubits:
        raise ValueError(f"ansatz has {spec.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    rng = make_rng(config.rng_seed if rng is None else rng)
    return _measure(h, spec, params, config, rng).cost


def init_params(spec: AnsatzSpec, strategy: str = "uniform", seed: int = 0) -> np.ndarray:
    """Initial angles: i.i.d. uniform on [-pi, pi] ("uniform") or all zero ("zeros")."""
    if strategy == "zeros":
        return np.zeros(spec.n_params)
    if strategy == "uniform":
        return make_rng(seed).uniform(-np.pi, np.pi, size=spec.n_params)
    raise ValueError(f"unknown init strategy {strategy!r}; choose from {INIT_STRATEGIES}")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    params: tuple[float, ...]
    cvar: float
    best_energy_so_far: float


@dataclass
class VqeRunResult:
    """Outcome of :func:`optimize`.

    ``final_histogram`` maps basis index to shot count in sampled mode and to
    probability in exact mode. ``best_sampled`` is ``(bitstring, energy)`` of
    the lowest-energy state observed in any evaluation.
    """

    trace: list[TraceRecord]
    final_params: np.ndarray
    final_cvar: float
    final_histogram: dict
    best_sampled: tuple[str, float]
    success: bool
    message: str
    exact: bool = True

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


class _BudgetExhausted(Exception):
    pass


def optimize(
    h: DiagonalHamiltonian,
    spec: AnsatzSpec,
    config: CvarConfig,
    initial=None,
) -> VqeRunResult:
    """Minimize the CVaR cost over the ansatz angles.

    Runs COBYLA (default) or Nelder-Mead from ``initial`` or from
    ``init_params(spec, config.init_strategy, config.init_seed)``. Stops after
    ``config.max_iterations`` evaluations or on optimizer convergence, then
    measures once more at the final parameters.
    """
    if spec.n_qubits != h.n_qubits:
        raise ValueError(f"ansatz has {spec.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    x0 = (
        init_params(spec, config.init_strategy, config.init_seed)
        if initial is None
        else np.asarray(initial, dtype=np.float64).copy()
    )
    if x0.size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} initial parameters, got {x0.size}")

    rng = make_rng(config.rng_seed)
    trace: list[TraceRecord] = []
    best = {"index": None, "energy": math.inf}

    def cost(theta):
        if len(trace) >= config.max_iterations:
            raise _BudgetExhausted
        ev = _measure(h, spec, theta, config, rng)
        if ev.best_energy < best["energy"] or (
            ev.best_energy == best["energy"] and ev.best_index < best["index"]
        ):
            best["index"], best["energy"] = ev.best_index, ev.best_energy
        trace.append(
            TraceRecord(len(trace) + 1, tuple(float(t) for t in theta), ev.cost, best["energy"])
        )
        return ev.cost

    if config.optimizer == "cobyla":
        method = "COBYLA"
        options = {"maxiter": config.max_iterations, "rhobeg": config.rhobeg, "tol": config.tol}
    else:
        method = "Nelder-Mead"
        options = {
            "maxfev": config.max_iterations,
            "xatol": config.tol,
            "fatol": config.tol,
        }

    try:
        res = minimize(cost, x0, method=method, options=options)
        final = np.asarray(res.x, dtype=np.float64)
        success, message = bool(res.success), str(res.message)
    except _BudgetExhausted:
        i = min(range(len(trace)), key=lambda r: trace[r].cvar)
        final = np.array(trace[i].params)
        success, message = False, "maximum number of evaluations reached"
    except Exception as exc:
        raise OptimizationError(f"optimization failed: {exc}", trace) from exc

    ev = _measure(h, spec, final, config, rng)
    if ev.best_energy < best["energy"]:
        best["index"], best["energy"] = ev.best_index, ev.best_energy
    return VqeRunResult(
        trace=trace,
        final_params=final,
        final_cvar=ev.cost,
        final_histogram=ev.histogram,
        best_sampled=(index_to_bitstring(best["index"], h.n_qubits), best["energy"]),
        success=success,
        message=message,
        exact=config.exact,
    )


@dataclass
class InferenceResult:
    counts: dict[int, int]
    shots: int
    energies: dict[int, float]
    assignments: dict[int, tuple[int, ...]]
    min_energy: float
    ground_mass: float


def inference(
    h: DiagonalHamiltonian, spec: AnsatzSpec, params, shots: int = 10000, seed=0
) -> InferenceResult:
    """Sample the state at fixed parameters without further optimization.

    ``ground_mass`` is the observed fraction of shots on minimal-energy basis
    states, counting every degenerate encoding of an optimal assignment.
    """
    if spec.n_qubits != h.n_qubits:
        raise ValueError(f"ansatz has {spec.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    state = prepare(spec, params)
    counts = sample(state, shots, seed)
    idx = np.fromiter(counts.keys(), dtype=np.int64)
    cnt = np.fromiter(counts.values(), dtype=np.int64)
    e = _energy_lookup(h, idx)
    e_min = h.min_energy()
    ground = int(cnt[is_minimal(e, e_min)].sum())
    return InferenceResult(
        counts=counts,
        shots=shots,
        energies={int(i): e_i.item() for i, e_i in zip(idx, e)},
        assignments={int(i): decode_bitstring(int(i), h.layout) for i in idx},
        min_energy=e_min,
        ground_mass=ground / shots,
    )


def is_minimal(energies, e_min) -> np.ndarray:
    """Mask of energies equal to ``e_min`` (exact for integer energies)."""
    return np.isclose(np.asarray(energies, dtype=np.float64), e_min, rtol=1e-12, atol=1e-9)
