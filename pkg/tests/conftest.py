import itertools

import numpy as np
import pytest

from fgavqe.fga_model import FgaInstance, Flight, Gate


def literal_total_time(instance, a):
    """Direct transcription of the three cost sums over one-hot x[i][alpha]."""
    nf, ng = instance.n_flights, instance.n_gates
    x = [[1 if a[i] == al else 0 for al in range(ng)] for i in range(nf)]
    fl, gt = instance.flights, instance.gates
    arrive = sum(fl[i].n_arrive * gt[al].t_arrive * x[i][al] for i in range(nf) for al in range(ng))
    depart = sum(fl[i].n_depart * gt[al].t_depart * x[i][al] for i in range(nf) for al in range(ng))
    transfer = sum(
        int(instance.transit_passengers[i][j]) * int(instance.transit_times[al][be]) * x[i][al] * x[j][be]
        for i, j, al, be in itertools.product(range(nf), range(nf), range(ng), range(ng))
    )
    return arrive + depart + transfer


def literal_overlaps(instance):
    fl, buf = instance.flights, instance.buffer_time
    return {
        (i, j)
        for i in range(len(fl))
        for j in range(len(fl))
        if fl[i].arrival_time < fl[j].arrival_time < fl[i].departure_time + buf
    }


def literal_energy(instance, a, lam):
    viol = sum(1 for i, j in literal_overlaps(instance) if a[i] == a[j])
    return literal_total_time(instance, a) + lam * viol


def literal_decode(index, n_flights, n_gates, m):
    """Decode by building the qubit list z_0..z_{Q-1} first, then reading groups of M."""
    q = n_flights * m
    z = [(index >> k) & 1 for k in range(q)]
    out = []
    for i in range(n_flights):
        bits = z[i * m : (i + 1) * m]
        out.append(int("".join(map(str, bits)), 2) % n_gates)
    return tuple(out)


def make_instance(windows, gate_times, n_counts=None, transfers=None, transit=None, buffer_time=0):
    nf, ng = len(windows), len(gate_times)
    n_counts = n_counts or [(0, 0)] * nf
    flights = tuple(Flight(s, e, na, nd) for (s, e), (na, nd) in zip(windows, n_counts))
    gates = tuple(Gate(a, d) for a, d in gate_times)
    return FgaInstance(
        flights=flights,
        gates=gates,
        transit_passengers=np.zeros((nf, nf), int) if transfers is None else transfers,
        transit_times=np.zeros((ng, ng), int) if transit is None else transit,
        buffer_time=buffer_time,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
