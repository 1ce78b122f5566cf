"""Flight gate assignment instances, classical cost, constraints and exact oracles.

All times are integer minutes and all passenger counts are integer persons, so
every cost is an exact integer. An assignment is a tuple holding one gate index
per flight; the one-gate-per-flight constraint is therefore structural and only
the gate-overlap constraint needs checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

Assignment = tuple[int, ...]

DEFAULT_ENUMERATION_CAP = 2**24
_CHUNK = 2**18


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class EnumerationCapExceeded(RuntimeError):
    """Raised when exhaustive enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class Flight:
    arrival_time: int
    departure_time: int
    n_arrive: int
    n_depart: int

    def __post_init__(self):
        if not self.arrival_time < self.departure_time:
            raise InstanceError(
                f"flight arrives at {self.arrival_time} but departs at {self.departure_time}"
            )
        if self.n_arrive < 0 or self.n_depart < 0:
            raise InstanceError("passenger counts must be non-negative")


@dataclass(frozen=True)
class Gate:
    t_arrive: int
    t_depart: int

    def __post_init__(self):
        if self.t_arrive < 0 or self.t_depart < 0:
            raise InstanceError("gate walk times must be non-negative")


def _frozen_matrix(values, shape: tuple[int, int], name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.shape != shape:
        raise InstanceError(f"{name} has shape {arr.shape}, expected {shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise InstanceError(f"{name} must contain integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise InstanceError(f"{name} has negative entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FgaInstance:
    """An immutable flight gate assignment problem.

    ``transit_passengers[i, j]`` counts passengers connecting from flight ``i``
    to flight ``j``; ``transit_times[a, b]`` is the walk from gate ``a`` to gate
    ``b``. Neither matrix is required to be symmetric.
    """

    flights: tuple[Flight, ...]
    gates: tuple[Gate, ...]
    transit_passengers: np.ndarray
    transit_times: np.ndarray
    buffer_time: int = 0
    _arrays: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "flights", tuple(self.flights))
        object.__setattr__(self, "gates", tuple(self.gates))
        if not self.flights:
            raise InstanceError("an instance needs at least one flight")
        if not self.gates:
            raise InstanceError("an instance needs at least one gate")
        nf, ng = len(self.flights), len(self.gates)
        object.__setattr__(
            self,
            "transit_passengers",
            _frozen_matrix(self.transit_passengers, (nf, nf), "transit_passengers"),
        )
        object.__setattr__(
            self, "transit_times", _frozen_matrix(self.transit_times, (ng, ng), "transit_times")
        )
        if self.buffer_time < 0:
            raise InstanceError("buffer_time must be non-negative")

    @property
    def n_flights(self) -> int:
        return len(self.flights)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    def local_costs(self) -> np.ndarray:
        """|F| x |G| table of arrival plus departure walking cost for each flight/gate pair."""
        if "local" not in self._arrays:
            n_a = np.array([f.n_arrive for f in self.flights], dtype=np.int64)
            n_d = np.array([f.n_depart for f in self.flights], dtype=np.int64)
            t_a = np.array([g.t_arrive for g in self.gates], dtype=np.int64)
            t_d = np.array([g.t_depart for g in self.gates], dtype=np.int64)
            table = np.outer(n_a, t_a) + np.outer(n_d, t_d)
            table.setflags(write=False)
            self._arrays["local"] = table
        return self._arrays["local"]

    def __eq__(self, other):
        if not isinstance(other, FgaInstance):
            return NotImplemented
        return (
            self.flights == other.flights
            and self.gates == other.gates
            and self.buffer_time == other.buffer_time
            and np.array_equal(self.transit_passengers, other.transit_passengers)
            and np.array_equal(self.transit_times, other.transit_times)
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {
            "flights": [
                {
                    "arrival": f.arrival_time,
                    "departure": f.departure_time,
                    "n_arrive": f.n_arrive,
                    "n_depart": f.n_depart,
                }
                for f in self.flights
            ],
            "gates": [{"t_arrive": g.t_arrive, "t_depart": g.t_depart} for g in self.gates],
            "transit_passengers": self.transit_passengers.tolist(),
            "transit_times": self.transit_times.tolist(),
            "buffer_time": int(self.buffer_time),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FgaInstance":
        try:
            flights = [
                Flight(
                    _as_int(f["arrival"], "arrival"),
                    _as_int(f["departure"], "departure"),
                    _as_int(f["n_arrive"], "n_arrive"),
                    _as_int(f["n_depart"], "n_depart"),
                )
                for f in data["flights"]
            ]
            gates = [
                Gate(_as_int(g["t_arrive"], "t_arrive"), _as_int(g["t_depart"], "t_depart"))
                for g in data["gates"]
            ]
            return cls(
                flights=tuple(flights),
                gates=tuple(gates),
                transit_passengers=_as_matrix(data["transit_passengers"], "transit_passengers"),
                transit_times=_as_matrix(data["transit_times"], "transit_times"),
                buffer_time=_as_int(data.get("buffer_time", 0), "buffer_time"),
            )
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"malformed instance data: {exc!r}") from exc


def _as_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError(f"{name} must be an integer, got {value!r}")
    return value


def _as_matrix(rows, name: str) -> np.ndarray:
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise InstanceError(f"{name} must be a list of lists")
    width = {len(r) for r in rows}
    if len(width) > 1:
        raise InstanceError(f"{name} is ragged")
    for r in rows:
        for v in r:
            _as_int(v, name)
    return np.array(rows, dtype=np.int64).reshape(len(rows), width.pop() if width else 0)


def read_instance(path) -> FgaInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InstanceError(f"{path}: expected a JSON object")
    return FgaInstance.from_dict(data)


def write_instance(instance: FgaInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")


def _check_assignment(instance: FgaInstance, a: Sequence[int]) -> Assignment:
    a = tuple(int(g) for g in a)
    if len(a) != instance.n_flights:
        raise ValueError(f"assignment has {len(a)} entries for {instance.n_flights} flights")
    for g in a:
        if not 0 <= g < instance.n_gates:
            raise ValueError(f"gate index {g} out of range for {instance.n_gates} gates")
    return a


def total_time(instance: FgaInstance, a: Sequence[int]) -> int:
    """Total passenger walking time of an assignment.

    The transfer term sums over all ordered flight pairs, including ``i == j``.
    """
    a = _check_assignment(instance, a)
    local = instance.local_costs()
    cost = sum(int(local[i, g]) for i, g in enumerate(a))
    n, t = instance.transit_passengers, instance.transit_times
    idx = np.array(a)
    cost += int(np.sum(n * t[np.ix_(idx, idx)]))
    return cost


def overlap_set(instance: FgaInstance) -> frozenset[tuple[int, int]]:
    """Ordered flight pairs ``(i, j)`` that cannot share a gate.

    ``(i, j)`` is included when ``j`` arrives strictly after ``i`` arrives and
    strictly before ``i`` departs plus the buffer time.
    """
    pairs = set()
    fl = instance.flights
    for i, fi in enumerate(fl):
        for j, fj in enumerate(fl):
            if fi.arrival_time < fj.arrival_time < fi.departure_time + instance.buffer_time:
                pairs.add((i, j))
    return frozenset(pairs)


def violations(instance: FgaInstance, a: Sequence[int], overlaps=None) -> int:
    """Number of overlapping flight pairs placed at the same gate."""
    a = _check_assignment(instance, a)
    if overlaps is None:
        overlaps = overlap_set(instance)
    return sum(1 for i, j in overlaps if a[i] == a[j])


def is_feasible(instance: FgaInstance, a: Sequence[int], overlaps=None) -> bool:
    return violations(instance, a, overlaps) == 0


@dataclass(frozen=True)
class BruteForceResult:
    """Outcome of exhaustive enumeration.

    ``feasible`` is False when no assignment satisfies the overlap constraint;
    in that case the cost fields are None and ``optimal`` is empty.
    """

    feasible: bool
    min_cost: int | None
    max_cost: int | None
    optimal: tuple[Assignment, ...]
    n_feasible: int
    n_enumerated: int


def _digits(codes: np.ndarray, n_flights: int, n_gates: int) -> np.ndarray:
    # flight 0 is the most significant base-|G| digit, so codes enumerate in lexicographic order
    out = np.empty((codes.size, n_flights), dtype=np.int64)
    rem = codes.copy()
    for i in range(n_flights - 1, -1, -1):
        out[:, i] = rem % n_gates
        rem //= n_gates
    return out


def brute_force_solve(
    instance: FgaInstance, cap: int = DEFAULT_ENUMERATION_CAP
) -> BruteForceResult:
    """Enumerate every assignment and return the optimum over the feasible ones.

    All minimizing assignments are returned, in lexicographic order.
    """
    nf, ng = instance.n_flights, instance.n_gates
    total = ng**nf
    if total > cap:
        raise EnumerationCapExceeded(f"{ng}^{nf} = {total} assignments exceeds cap {cap}")

    local = instance.local_costs()
    n_ij = instance.transit_passengers
    t = instance.transit_times
    pairs = [(i, j, int(n_ij[i, j])) for i in range(nf) for j in range(nf) if n_ij[i, j]]
    overlaps = sorted(overlap_set(instance))

    best, worst = None, None
    optimal: list[Assignment] = []
    n_feasible = 0
    for start in range(0, total, _CHUNK):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        g = _digits(codes, nf, ng)
        ok = np.ones(codes.size, dtype=bool)
        for i, j in overlaps:
            ok &= g[:, i] != g[:, j]
        if not ok.any():
            continue
        g = g[ok]
        cost = np.zeros(g.shape[0], dtype=np.int64)
        for i in range(nf):
            cost += local[i][g[:, i]]
        for i, j, n in pairs:
            cost += n * t[g[:, i], g[:, j]]
        n_feasible += g.shape[0]
        lo, hi = int(cost.min()), int(cost.max())
        worst = hi if worst is None else max(worst, hi)
        if best is None or lo < best:
            best, optimal = lo, []
        if lo == best:
            optimal.extend(tuple(int(x) for x in row) for row in g[cost == lo])

    return BruteForceResult(
        feasible=best is not None,
        min_cost=best,
        max_cost=worst,
        optimal=tuple(optimal),
        n_feasible=n_feasible,
        n_enumerated=total,
    )


@dataclass(frozen=True)
class GeneratorParams:
    """Knobs for :func:`generate_instance`.

    Flight stays last ``stay_range`` minutes. Arrivals are uniform on
    ``[0, horizon)`` where the horizon is chosen so that two flights overlap with
    probability close to ``overlap_density`` (exactly so for continuous arrival
    times and a fixed stay). A transfer ``i -> j`` (``i != j``) exists with
    probability ``transfer_probability`` and carries a count from
    ``transfer_range``.
    """

    walk_range: tuple[int, int] = (1, 10)
    unit_walk: int = 1
    passenger_range: tuple[int, int] = (0, 50)
    transfer_range: tuple[int, int] = (1, 10)
    transfer_probability: float = 0.5
    stay_range: tuple[int, int] = (30, 60)
    buffer_time: int = 10
    overlap_density: float = 0.3

    def __post_init__(self):
        for name in ("walk_range", "passenger_range", "transfer_range", "stay_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must satisfy 0 <= low <= high, got {(lo, hi)}")
        if self.stay_range[0] < 1:
            raise ValueError("stay_range must be at least one minute")
        if self.unit_walk < 0 or self.buffer_time < 0:
            raise ValueError("unit_walk and buffer_time must be non-negative")
        if not 0.0 <= self.transfer_probability <= 1.0:
            raise ValueError("transfer_probability must lie in [0, 1]")
        if not 0.0 < self.overlap_density < 1.0:
            raise ValueError("overlap_density must lie in (0, 1)")

    def horizon(self) -> int:
        # P(|u - v| < w) = 1 - (1 - w/H)^2 for u, v ~ U[0, H)
        window = (self.stay_range[0] + self.stay_range[1]) / 2 + self.buffer_time
        return max(1, math.ceil(window / (1.0 - math.sqrt(1.0 - self.overlap_density))))


def generate_instance(
    seed: int, n_flights: int, n_gates: int, params: GeneratorParams | None = None
) -> FgaInstance:
    """Draw a reproducible synthetic instance.

    Uses numpy's PCG64 generator seeded with ``seed``. Gates sit on a line with
    unit spacing, so ``transit_times[a, b] = |a - b| * unit_walk``. Draw order
    is fixed: gate walk times, passenger counts, transfers, then flight windows.
    """
    if n_flights < 1 or n_gates < 1:
        raise ValueError("n_flights and n_gates must both be at least 1")
    p = params or GeneratorParams()
    rng = np.random.Generator(np.random.PCG64(seed))

    w_lo, w_hi = p.walk_range
    t_walk = rng.integers(w_lo, w_hi, size=(n_gates, 2), endpoint=True)
    gates = tuple(Gate(int(a), int(d)) for a, d in t_walk)

    n_lo, n_hi = p.passenger_range
    counts = rng.integers(n_lo, n_hi, size=(n_flights, 2), endpoint=True)

    has_transfer = rng.random((n_flights, n_flights)) < p.transfer_probability
    tr_lo, tr_hi = p.transfer_range
    sizes = rng.integers(tr_lo, tr_hi, size=(n_flights, n_flights), endpoint=True)
    transfers = np.where(has_transfer, sizes, 0)
    np.fill_diagonal(transfers, 0)

    arrivals = rng.integers(0, p.horizon(), size=n_flights)
    stays = rng.integers(p.stay_range[0], p.stay_range[1], size=n_flights, endpoint=True)
    flights = tuple(
        Flight(int(t), int(t + s), int(c[0]), int(c[1]))
        for t, s, c in zip(arrivals, stays, counts)
    )

    pos = np.arange(n_gates)
    transit_times = np.abs(pos[:, None] - pos[None, :]) * p.unit_walk

    return FgaInstance(
        flights=flights,
        gates=gates,
        transit_passengers=transfers,
        transit_times=transit_times,
        buffer_time=p.buffer_time,
    )
