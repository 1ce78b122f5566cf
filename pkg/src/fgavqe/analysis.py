"""Solution-quality metrics for measured or exact basis-state distributions.

Distributions are dense probability vectors over all ``2^Q`` basis indices, or
histograms ``{basis index: count}`` which are converted to relative
frequencies.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .encoding import DiagonalHamiltonian, decode_bitstring, index_to_bitstring
from .vqe import is_minimal

Distribution = Union[np.ndarray, Mapping[int, float]]


def to_distribution(dist: Distribution, n_qubits: int) -> np.ndarray:
    """Dense probability vector; histograms are normalized by their total count."""
    if isinstance(dist, Mapping):
        p = np.zeros(1 << n_qubits)
        for i, c in dist.items():
            p[int(i)] = c
        total = p.sum()
        if total <= 0:
            raise ValueError("empty histogram")
        return p / total
    p = np.asarray(dist, dtype=np.float64).reshape(-1)
    if p.size != 1 << n_qubits:
        raise ValueError(f"distribution has {p.size} entries, expected {1 << n_qubits}")
    return p


def _check_normalized(p: np.ndarray, name: str, tol: float = 1e-6):
    if np.any(p < 0):
        raise ValueError(f"{name} has negative probabilities")
    s = math.fsum(p)
    if abs(s - 1.0) > tol:
        raise ValueError(f"{name} sums to {s}, not 1")


def fidelity_upper_bound(p_qc, p_id) -> float:
    """Squared Bhattacharyya coefficient ``(sum_i sqrt(p_i q_i))^2``.

    Bounds the state fidelity from above using only measured distributions.
    Accumulated in extended precision so simple cases come out exact.
    """
    p = np.asarray(p_qc, dtype=np.float64).reshape(-1)
    q = np.asarray(p_id, dtype=np.float64).reshape(-1)
    if p.shape != q.shape:
        raise ValueError(f"distributions have different sizes {p.size} and {q.size}")
    _check_normalized(p, "p_qc")
    _check_normalized(q, "p_id")
    pl, ql = p.astype(np.longdouble), q.astype(np.longdouble)
    bc = np.sum(np.sqrt(pl * ql))
    return float(min(1.0, max(0.0, float(bc * bc))))


def ground_state_component(dist: Distribution, h: DiagonalHamiltonian) -> float:
    """Probability on every basis state with the global minimum energy.

    Degenerate encodings of the same optimal assignment all count.
    """
    p = to_distribution(dist, h.n_qubits)
    diag = h.diagonal()
    return float(math.fsum(p[is_minimal(diag, diag.min())]))


@dataclass(frozen=True)
class StateInfo:
    index: int
    bitstring: str
    probability: float
    assignment: tuple[int, ...]
    energy: float
    cost: float
    feasible: bool


@dataclass(frozen=True)
class DistributionSummary:
    top_k: list[StateInfo]
    ground_mass: float
    feasible_mass: float

    def to_dict(self) -> dict:
        return {
            "top_k": [
                {**asdict(s), "assignment": list(s.assignment)} for s in self.top_k
            ],
            "ground_mass": self.ground_mass,
            "feasible_mass": self.feasible_mass,
        }


def feasible_mass(dist: Distribution, h: DiagonalHamiltonian) -> float:
    p = to_distribution(dist, h.n_qubits)
    idx = np.flatnonzero(p)
    return float(math.fsum(p[idx][h.violations(idx) == 0]))


def top_k(dist: Distribution, h: DiagonalHamiltonian, k: int = 5) -> DistributionSummary:
    """The ``k`` most probable basis states (ties by lower index) plus mass totals."""
    if k < 1:
        raise ValueError("k must be at least 1")
    p = to_distribution(dist, h.n_qubits)
    idx = np.arange(p.size)
    order = np.lexsort((idx, -p))[:k]
    order = order[p[order] > 0]
    energies = h.energies(order)
    costs = h.costs(order)
    viol = h.violations(order)
    entries = [
        StateInfo(
            index=int(i),
            bitstring=index_to_bitstring(int(i), h.n_qubits),
            probability=float(p[i]),
            assignment=decode_bitstring(int(i), h.layout),
            energy=e.item(),
            cost=c.item(),
            feasible=bool(v == 0),
        )
        for i, e, c, v in zip(order, energies, costs, viol)
    ]
    return DistributionSummary(entries, ground_state_component(p, h), feasible_mass(p, h))


def approximation_ratio(dist: Distribution, h: DiagonalHamiltonian, oracle_min, oracle_max) -> float:
    """Expected ``(max - cost) / (max - min)`` over feasible decodes; infeasible mass scores 0."""
    if not oracle_min < oracle_max:
        raise ValueError("approximation ratio needs oracle_min < oracle_max")
    p = to_distribution(dist, h.n_qubits)
    idx = np.flatnonzero(p)
    ok = h.violations(idx) == 0
    score = (oracle_max - h.costs(idx[ok]).astype(np.float64)) / (oracle_max - oracle_min)
    return float(math.fsum(p[idx[ok]] * score))


HISTOGRAM_COLUMNS = (
    "index", "bitstring", "count", "probability", "assignment", "energy", "cost", "feasible",
)


def write_histogram_csv(path, dist: Distribution, h: DiagonalHamiltonian, min_probability=0.0):
    """Plot-ready histogram, one row per basis state, most probable first.

    ``count`` is filled only when ``dist`` is a histogram of shot counts.
    ``assignment`` is the decoded gate list joined by ``-``.
    """
    counts = dist if isinstance(dist, Mapping) else None
    p = to_distribution(dist, h.n_qubits)
    idx = np.flatnonzero(p > min_probability)
    idx = idx[np.lexsort((idx, -p[idx]))]
    energies, costs, viol = h.energies(idx), h.costs(idx), h.violations(idx)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTOGRAM_COLUMNS)
        for i, e, c, v in zip(idx, energies, costs, viol):
            w.writerow(
                [
                    int(i),
                    index_to_bitstring(int(i), h.n_qubits),
                    counts[int(i)] if counts is not None else "",
                    repr(float(p[i])),
                    "-".join(str(g) for g in decode_bitstring(int(i), h.layout)),
                    e.item(),
                    c.item(),
                    int(v == 0),
                ]
            )


def read_histogram_csv(path) -> dict[int, int]:
    """Shot counts from a histogram CSV written with counts."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            if row["count"] == "":
                raise ValueError(f"{path}: histogram has no shot counts")
            out[int(row["index"])] = int(row["count"])
    return out


def write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
