"""Compact binary encoding of FGA instances into a diagonal qubit Hamiltonian.

Each flight owns ``M = ceil(log2 |G|)`` consecutive qubits. Flight ``i``'s bit
``k`` lives on qubit ``i*M + k`` and bit ``z_0`` is the most significant bit of
the encoded value ``v``; the gate is ``v mod |G|``, so when ``|G|`` is not a power
of two some gates have several encodings.

Basis state indices follow the simulator's convention: qubit ``q`` is bit ``q``
of the integer index. Bitstring labels list qubits in increasing order, i.e.
``"z_0 z_1 ... z_{Q-1}"`` reading left to right.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .fga_model import Assignment, FgaInstance, overlap_set

DEFAULT_MAX_QUBITS = 30
MAX_DIAGONAL_QUBITS = 24

DIAGONAL_MAGIC = b"FGADIAG1"
_DIAGONAL_HEADER = struct.Struct("<8sII")

BasisState = Union[int, str]


class QubitLimitExceeded(ValueError):
    """The encoding needs more qubits than the configured maximum."""


@dataclass(frozen=True)
class QubitLayout:
    n_flights: int
    n_gates: int
    bits_per_flight: int
    n_qubits: int

    @classmethod
    def for_problem(cls, n_flights: int, n_gates: int) -> "QubitLayout":
        if n_flights < 1 or n_gates < 1:
            raise ValueError("need at least one flight and one gate")
        # a single gate still gets one qubit per flight
        m = max(1, math.ceil(math.log2(n_gates))) if n_gates > 1 else 1
        return cls(n_flights, n_gates, m, m * n_flights)

    @classmethod
    def for_instance(cls, instance: FgaInstance) -> "QubitLayout":
        return cls.for_problem(instance.n_flights, instance.n_gates)

    @property
    def n_values(self) -> int:
        return 1 << self.bits_per_flight

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def qubit(self, flight: int, bit: int) -> int:
        return flight * self.bits_per_flight + bit

    def value_to_gate(self) -> np.ndarray:
        return np.arange(self.n_values) % self.n_gates

    def flight_values(self, indices) -> np.ndarray:
        """Encoded values, shape (n, |F|), for an array of basis indices."""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        m = self.bits_per_flight
        out = np.zeros((idx.size, self.n_flights), dtype=np.int64)
        for i in range(self.n_flights):
            for k in range(m):
                out[:, i] |= ((idx >> self.qubit(i, k)) & 1) << (m - 1 - k)
        return out

    def index_from_values(self, values: Sequence[int]) -> int:
        m = self.bits_per_flight
        index = 0
        for i, v in enumerate(values):
            for k in range(m):
                if (v >> (m - 1 - k)) & 1:
                    index |= 1 << self.qubit(i, k)
        return index


def index_to_bitstring(index: int, n_qubits: int) -> str:
    """Label of a basis index with qubit 0 first."""
    return "".join("1" if (index >> q) & 1 else "0" for q in range(n_qubits))


def bitstring_to_index(bits: str) -> int:
    if any(c not in "01" for c in bits):
        raise ValueError(f"not a bitstring: {bits!r}")
    return sum(1 << q for q, c in enumerate(bits) if c == "1")


def decode_value(bits: Sequence[int] | str, n_gates: int) -> int:
    """Gate index for one flight's bits ``z_0 ... z_{M-1}`` (``z_0`` most significant)."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value % n_gates


def decode_bitstring(b: BasisState, layout: QubitLayout) -> Assignment:
    """Assignment encoded by a basis state, given as an integer index or a bitstring label."""
    if isinstance(b, str):
        if len(b) != layout.n_qubits:
            raise ValueError(f"bitstring has {len(b)} bits, layout needs {layout.n_qubits}")
        b = bitstring_to_index(b)
    if not 0 <= b < layout.dim:
        raise ValueError(f"basis index {b} out of range for {layout.n_qubits} qubits")
    m = layout.bits_per_flight
    return tuple(
        decode_value([(b >> layout.qubit(i, k)) & 1 for k in range(m)], layout.n_gates)
        for i in range(layout.n_flights)
    )


def preimages(a: Sequence[int], layout: QubitLayout) -> list[int]:
    """All basis indices that decode to assignment ``a``, sorted."""
    per_flight = [range(g, layout.n_values, layout.n_gates) for g in a]
    out = [0]
    for i, values in enumerate(per_flight):
        out = [
            idx | layout.index_from_values([0] * i + [v]) for idx in out for v in values
        ]
    return sorted(out)


def default_lambda(instance: FgaInstance) -> int:
    """Penalty weight exceeding the largest possible feasible cost.

    Any overlap violation then costs more than the spread of feasible costs,
    so the energy minimum is feasible whenever a feasible assignment exists.
    """
    n_a = sum(f.n_arrive for f in instance.flights)
    n_d = sum(f.n_depart for f in instance.flights)
    t_a = max(g.t_arrive for g in instance.gates)
    t_d = max(g.t_depart for g in instance.gates)
    transit = int(instance.transit_passengers.sum()) * int(instance.transit_times.max())
    return 1 + n_a * t_a + n_d * t_d + transit


def _normalize_lambda(lam):
    if isinstance(lam, (bool, np.bool_)):
        raise TypeError("lambda must be a number")
    if isinstance(lam, (int, np.integer)):
        return int(lam)
    lam = float(lam)
    return int(lam) if lam.is_integer() else lam


@dataclass(frozen=True, eq=False)
class DiagonalHamiltonian:
    """Energy tables for the encoded problem.

    ``per_flight_cost[i, v]`` is flight ``i``'s arrival/departure cost (plus any
    self-transfer term) at encoded value ``v``. ``pair_cost[(i, j)]`` with
    ``i < j`` is a ``2^M x 2^M`` table holding the transfer cost in both
    directions plus ``lambda`` wherever an overlapping pair shares a gate.
    ``pair_conflict`` holds the matching 0/1 same-gate indicators for overlapping
    pairs only.
    """

    instance: FgaInstance
    layout: QubitLayout
    lam: float
    per_flight_cost: np.ndarray
    pair_cost: dict
    pair_conflict: dict
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def energy(self, b: BasisState) -> float:
        """Energy of one basis state, evaluated from the tables in O(|F|^2)."""
        a = _values_of(b, self.layout)
        e = sum(self.per_flight_cost[i, v] for i, v in enumerate(a))
        for (i, j), table in self.pair_cost.items():
            e += table[a[i], a[j]]
        return e.item() if hasattr(e, "item") else e

    def energies(self, indices) -> np.ndarray:
        """Vectorized energies for an array of basis indices."""
        return self._evaluate(indices, self.per_flight_cost, self.pair_cost)

    def costs(self, indices) -> np.ndarray:
        """Total passenger time of the decoded assignments (penalty excluded)."""
        pure = {k: v - self.lam * self.pair_conflict.get(k, 0) for k, v in self.pair_cost.items()}
        return self._evaluate(indices, self.per_flight_cost, pure)

    def violations(self, indices) -> np.ndarray:
        zero = np.zeros_like(self.per_flight_cost, dtype=np.int64)
        return self._evaluate(indices, zero, self.pair_conflict)

    def _evaluate(self, indices, local, pairs) -> np.ndarray:
        vals = self.layout.flight_values(indices)
        out = np.zeros(vals.shape[0], dtype=local.dtype)
        for i in range(self.layout.n_flights):
            out += local[i][vals[:, i]]
        for (i, j), table in pairs.items():
            out += table[vals[:, i], vals[:, j]]
        return out

    def diagonal(self) -> np.ndarray:
        """All ``2^Q`` energies, indexed by basis index. Cached; read-only."""
        if "diag" not in self._cache:
            if self.n_qubits > MAX_DIAGONAL_QUBITS:
                raise ValueError(
                    f"diagonal of {self.n_qubits} qubits exceeds {MAX_DIAGONAL_QUBITS}-qubit limit"
                )
            d = np.zeros(self.layout.dim, dtype=self.per_flight_cost.dtype)
            step = 1 << 20
            for start in range(0, self.layout.dim, step):
                idx = np.arange(start, min(start + step, self.layout.dim), dtype=np.int64)
                d[start : start + idx.size] = self.energies(idx)
            d.setflags(write=False)
            self._cache["diag"] = d
        return self._cache["diag"]

    def min_energy(self):
        return self.diagonal().min().item()


def _values_of(b: BasisState, layout: QubitLayout) -> list[int]:
    if isinstance(b, str):
        if len(b) != layout.n_qubits:
            raise ValueError(f"bitstring has {len(b)} bits, layout needs {layout.n_qubits}")
        b = bitstring_to_index(b)
    if not 0 <= b < layout.dim:
        raise ValueError(f"basis index {b} out of range for {layout.n_qubits} qubits")
    return [int(v) for v in layout.flight_values([b])[0]]


def build_hamiltonian(
    instance: FgaInstance, lam=None, max_qubits: int = DEFAULT_MAX_QUBITS
) -> DiagonalHamiltonian:
    layout = QubitLayout.for_instance(instance)
    if layout.n_qubits > max_qubits:
        raise QubitLimitExceeded(
            f"encoding needs {layout.n_qubits} qubits, maximum is {max_qubits}"
        )
    lam = default_lambda(instance) if lam is None else _normalize_lambda(lam)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    dtype = np.int64 if isinstance(lam, int) else np.float64

    gate = layout.value_to_gate()
    nf = instance.n_flights
    n_ij = instance.transit_passengers
    t = instance.transit_times
    t_enc = t[np.ix_(gate, gate)]
    same = (gate[:, None] == gate[None, :]).astype(np.int64)

    local = instance.local_costs()[:, gate].astype(dtype)
    for i in range(nf):
        # P_i(v) P_i(w) = delta_vw P_i(v): self-transfers only see the diagonal
        local[i] += n_ij[i, i] * np.diag(t_enc)

    overlaps = overlap_set(instance)
    pair_cost, pair_conflict = {}, {}
    for i in range(nf):
        for j in range(i + 1, nf):
            table = n_ij[i, j] * t_enc + n_ij[j, i] * t_enc.T
            conflict = ((i, j) in overlaps) + ((j, i) in overlaps)
            if conflict:
                pair_conflict[(i, j)] = conflict * same
                table = table + lam * pair_conflict[(i, j)]
            if np.any(table):
                pair_cost[(i, j)] = table.astype(dtype)

    for arr in (local, *pair_cost.values(), *pair_conflict.values()):
        arr.setflags(write=False)
    return DiagonalHamiltonian(instance, layout, lam, local, pair_cost, pair_conflict)


@dataclass(frozen=True)
class PauliZTerm:
    z_qubits: tuple[int, ...]
    coeff: float


def projector_terms(qubits: Sequence[int], bits: Sequence[int]) -> dict[tuple[int, ...], float]:
    """Expand ``|bits><bits|`` on ``qubits`` as a product of ``(1 + (-1)^z Z) / 2`` factors."""
    terms: dict[tuple[int, ...], float] = {(): 1.0}
    for q, z in zip(qubits, bits):
        sign = -1.0 if z else 1.0
        nxt: dict[tuple[int, ...], float] = {}
        for mask, c in terms.items():
            nxt[mask] = nxt.get(mask, 0.0) + 0.5 * c
            zmask = tuple(sorted(mask + (q,)))
            nxt[zmask] = nxt.get(zmask, 0.0) + 0.5 * sign * c
        terms = nxt
    return terms


def _walsh_hadamard(values: np.ndarray) -> np.ndarray:
    a = np.array(values, dtype=np.float64)
    n = a.size
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a = np.concatenate([a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]], axis=1)
        a = a.reshape(n)
        h *= 2
    return a / n


def pauli_terms(h: DiagonalHamiltonian, atol: float = 0.0) -> list[PauliZTerm]:
    """Z-string expansion of the Hamiltonian with equal masks merged.

    Each table is expanded over its qubits with a Walsh-Hadamard transform,
    which sums the projector products term by term. Terms with
    ``|coeff| <= atol`` are dropped. Output is sorted by (weight, mask).
    """
    layout = h.layout
    m = layout.bits_per_flight
    acc: dict[tuple[int, ...], float] = {}

    def add(spectrum: np.ndarray, qubit_of_bit: list[int]):
        nbits = len(qubit_of_bit)
        for s, c in enumerate(spectrum):
            if c == 0.0:
                continue
            mask = tuple(sorted(qubit_of_bit[p] for p in range(nbits) if (s >> p) & 1))
            acc[mask] = acc.get(mask, 0.0) + float(c)

    for i in range(layout.n_flights):
        # value bit p (LSB = 0) is z_{M-1-p}
        add(_walsh_hadamard(h.per_flight_cost[i]), [layout.qubit(i, m - 1 - p) for p in range(m)])
    for (i, j), table in h.pair_cost.items():
        qubits = [layout.qubit(j, m - 1 - p) for p in range(m)]
        qubits += [layout.qubit(i, m - 1 - p) for p in range(m)]
        add(_walsh_hadamard(np.asarray(table).reshape(-1)), qubits)

    terms = [PauliZTerm(k, c) for k, c in acc.items() if abs(c) > atol]
    terms.sort(key=lambda t: (len(t.z_qubits), t.z_qubits))
    return terms


def diagonal_from_terms(terms: Sequence[PauliZTerm], n_qubits: int) -> np.ndarray:
    """Rebuild the diagonal; Z has eigenvalue +1 on |0> and -1 on |1>."""
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    out = np.zeros(idx.size)
    for t in terms:
        parity = np.zeros(idx.size, dtype=np.int64)
        for q in t.z_qubits:
            parity ^= (idx >> q) & 1
        out += t.coeff * (1 - 2 * parity)
    return out


def write_pauli_terms(terms: Sequence[PauliZTerm], path) -> None:
    data = [{"z_qubits": list(t.z_qubits), "coeff": t.coeff} for t in terms]
    Path(path).write_text(json.dumps(data, indent=1) + "\n")


def read_pauli_terms(path) -> list[PauliZTerm]:
    data = json.loads(Path(path).read_text())
    return [PauliZTerm(tuple(int(q) for q in d["z_qubits"]), float(d["coeff"])) for d in data]


def write_diagonal(h: DiagonalHamiltonian, path) -> None:
    """Binary dump: 16-byte header (magic ``FGADIAG1``, uint32 Q, uint32 zero),
    then ``2^Q`` little-endian float64 energies in basis-index order."""
    if h.n_qubits > 20:
        raise ValueError("diagonal export is limited to 20 qubits")
    with open(path, "wb") as fh:
        fh.write(_DIAGONAL_HEADER.pack(DIAGONAL_MAGIC, h.n_qubits, 0))
        fh.write(h.diagonal().astype("<f8").tobytes())


def read_diagonal(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, n_qubits, _ = _DIAGONAL_HEADER.unpack_from(raw)
    if magic != DIAGONAL_MAGIC:
        raise ValueError(f"{path}: not a diagonal file")
    body = raw[_DIAGONAL_HEADER.size :]
    if len(body) != 8 << n_qubits:
        raise ValueError(f"{path}: truncated diagonal for {n_qubits} qubits")
    return np.frombuffer(body, dtype="<f8").copy()


def qubo_matrix(
    instance: FgaInstance, penalty_one_hot=None, penalty_overlap=None
) -> tuple[np.ndarray, float]:
    """Naive one-hot QUBO with ``|F| * |G|`` binary variables.

    Variable ``i * |G| + a`` is 1 when flight ``i`` uses gate ``a``. Returns a
    symmetric matrix ``W`` and constant ``c`` with energy ``x @ W @ x + c``.
    Both penalties default to :func:`default_lambda`.
    """
    lam = default_lambda(instance)
    p1 = lam if penalty_one_hot is None else penalty_one_hot
    p2 = lam if penalty_overlap is None else penalty_overlap
    if p1 <= 0 or p2 <= 0:
        raise ValueError("QUBO penalties must be positive")
    nf, ng = instance.n_flights, instance.n_gates
    n = nf * ng
    w = np.zeros((n, n))

    # transfers: n_ij t_ab x_ia x_jb over all ordered (i, j, a, b)
    w += np.kron(instance.transit_passengers, instance.transit_times).astype(float)
    w[np.diag_indices(n)] += instance.local_costs().reshape(-1)

    # p1 * (sum_a x_ia - 1)^2 = p1 * (-sum_a x_ia + sum_{a != b} x_ia x_ib + 1)
    block = np.full((ng, ng), float(p1))
    np.fill_diagonal(block, -float(p1))
    for i in range(nf):
        w[i * ng : (i + 1) * ng, i * ng : (i + 1) * ng] += block

    for i, j in overlap_set(instance):
        for a in range(ng):
            w[i * ng + a, j * ng + a] += p2 / 2
            w[j * ng + a, i * ng + a] += p2 / 2

    w = (w + w.T) / 2
    return w, float(p1) * nf


def one_hot(a: Sequence[int], n_gates: int) -> np.ndarray:
    x = np.zeros(len(a) * n_gates)
    for i, g in enumerate(a):
        x[i * n_gates + g] = 1.0
    return x


def qubo_energy(w: np.ndarray, constant: float, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ w @ x + constant)
