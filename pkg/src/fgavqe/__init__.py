"""Flight gate assignment as a compact qubit Hamiltonian, solved with simulated CVaR-VQE."""

from .analysis import (
    DistributionSummary,
    approximation_ratio,
    fidelity_upper_bound,
    ground_state_component,
    top_k,
)
from .encoding import (
    DiagonalHamiltonian,
    PauliZTerm,
    QubitLayout,
    build_hamiltonian,
    decode_bitstring,
    decode_value,
    default_lambda,
    pauli_terms,
    qubo_matrix,
)
from .fga_model import (
    FgaInstance,
    Flight,
    Gate,
    GeneratorParams,
    brute_force_solve,
    generate_instance,
    is_feasible,
    overlap_set,
    read_instance,
    total_time,
    write_instance,
)
from .simulator import AnsatzSpec, apply_cnot, apply_ry, prepare, probabilities, sample
from .vqe import (
    CvarConfig,
    VqeRunResult,
    cvar_exact,
    cvar_from_samples,
    evaluate_cost,
    inference,
    init_params,
    optimize,
)

__version__ = "0.1.0"
