"""Real-amplitude statevector simulation of the RY + linear-CNOT ansatz.

Basis index convention: qubit ``q`` is bit ``q`` of the index (qubit 0 least
significant). Starting from ``|0...0>`` the ansatz only applies RY and CNOT, both
real, so amplitudes are stored as float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AnsatzSpec:
    """``layers`` RY columns over ``n_qubits`` qubits.

    Every column after the first is preceded by the CNOT chain
    ``0->1, 1->2, ..., (Q-2)->(Q-1)``. Parameters are ordered column by column.
    """

    n_qubits: int
    layers: int = 2

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be at least 1")
        if self.layers < 1:
            raise ValueError("layers must be at least 1")

    @property
    def n_params(self) -> int:
        return self.layers * self.n_qubits


def _split(state: np.ndarray, qubit: int) -> np.ndarray:
    # (high bits, qubit bit, low bits) view
    n = state.size
    low = 1 << qubit
    return state.reshape(n // (2 * low), 2, low)


def _check_qubit(state: np.ndarray, qubit: int):
    n_qubits = state.size.bit_length() - 1
    if not 0 <= qubit < n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(1 << n_qubits)
    state[0] = 1.0
    return state


def apply_ry(state: np.ndarray, qubit: int, theta: float) -> np.ndarray:
    """Apply ``RY(theta) = exp(-i theta Y / 2)`` in place and return the state."""
    _check_qubit(state, qubit)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    v = _split(state, qubit)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = c * a0 - s * a1
    v[:, 1, :] = s * a0 + c * a1
    return state


def apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    """Apply CNOT in place: swap the target pair wherever the control bit is 1."""
    _check_qubit(state, control)
    _check_qubit(state, target)
    if control == target:
        raise ValueError("control and target must differ")
    n_qubits = state.size.bit_length() - 1
    # axis n_qubits-1-q carries qubit q in the C-ordered [2]*Q view
    t = state.reshape([2] * n_qubits)
    ca, ta = n_qubits - 1 - control, n_qubits - 1 - target
    on = [slice(None)] * n_qubits
    on[ca] = 1
    sub = t[tuple(on)]
    tax = ta if ta < ca else ta - 1
    sub[...] = np.flip(sub, axis=tax).copy()
    return state


def prepare(spec: AnsatzSpec, params) -> np.ndarray:
    """Statevector produced by the ansatz on ``|0...0>``."""
    theta = np.asarray(params, dtype=np.float64).reshape(-1)
    if theta.size != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {theta.size}")
    q = spec.n_qubits
    state = zero_state(q)
    for layer in range(spec.layers):
        if layer:
            for c in range(q - 1):
                apply_cnot(state, c, c + 1)
        for k in range(q):
            apply_ry(state, k, theta[layer * q + k])
    return state


def probabilities(state: np.ndarray) -> np.ndarray:
    return np.square(state)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; an existing Generator is passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def sample(state: np.ndarray, shots: int, rng_seed=None) -> dict[int, int]:
    """Draw ``shots`` measurements and return ``{basis index: count}`` for observed states.

    The multinomial draw is equivalent to ``shots`` independent samples from
    the Born distribution. Keys are in increasing index order.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    p = probabilities(state)
    p = p / p.sum()
    counts = make_rng(rng_seed).multinomial(shots, p)
    nz = np.flatnonzero(counts)
    return {int(i): int(counts[i]) for i in nz}


def write_statevector(state: np.ndarray, path) -> None:
    """Dump amplitudes as raw little-endian float64 in basis-index order."""
    if state.size > 1 << 20:
        raise ValueError("statevector dump is limited to 20 qubits")
    Path(path).write_bytes(np.asarray(state, dtype="<f8").tobytes())


def read_statevector(path) -> np.ndarray:
    return np.frombuffer(Path(path).read_bytes(), dtype="<f8").copy()
