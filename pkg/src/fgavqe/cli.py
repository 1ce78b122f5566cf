"""Command-line entry point: ``fgavqe <command> ...``.

Every command also accepts ``--config FILE``, a JSON object whose keys are the
long option names with dashes replaced by underscores; explicit flags win.

Exit codes: 0 success, 2 configuration error, 3 enumeration or qubit cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    approximation_ratio,
    fidelity_upper_bound,
    ground_state_component,
    read_histogram_csv,
    to_distribution,
    top_k,
    write_histogram_csv,
    write_json,
)
from .encoding import (
    QubitLayout,
    QubitLimitExceeded,
    build_hamiltonian,
    index_to_bitstring,
    pauli_terms,
    preimages,
    write_diagonal,
    write_pauli_terms,
)
from .fga_model import (
    DEFAULT_ENUMERATION_CAP,
    EnumerationCapExceeded,
    FgaInstance,
    GeneratorParams,
    InstanceError,
    brute_force_solve,
    generate_instance,
    overlap_set,
    read_instance,
    write_instance,
)
from .simulator import AnsatzSpec, prepare, probabilities
from .vqe import CvarConfig, OPTIMIZERS, inference, optimize


EXIT_OK, EXIT_CONFIG, EXIT_CAP = 0, 2, 3

# (epsilon, shots, inference shots); None shots means exact optimization
PROTOCOLS = {
    "full": (0.5, 1000, 1000),
    "inference": (0.25, None, 10000),
}


class ConfigError(Exception):
    pass


def _add_generator_args(p, seed_flag: str):
    d = GeneratorParams()
    p.add_argument(seed_flag, type=int, default=0 if seed_flag == "--seed" else None,
                   help="generator seed")
    p.add_argument("--flights", type=int, help="number of flights |F|")
    p.add_argument("--gates", type=int, help="number of gates |G|")
    p.add_argument("--walk-range", type=int, nargs=2, default=d.walk_range,
                   metavar=("LO", "HI"), help="gate walk time range in minutes")
    p.add_argument("--unit-walk", type=int, default=d.unit_walk,
                   help="walk time between neighbouring gates")
    p.add_argument("--passenger-range", type=int, nargs=2, default=d.passenger_range,
                   metavar=("LO", "HI"))
    p.add_argument("--transfer-range", type=int, nargs=2, default=d.transfer_range,
                   metavar=("LO", "HI"))
    p.add_argument("--transfer-probability", type=float, default=d.transfer_probability)
    p.add_argument("--stay-range", type=int, nargs=2, default=d.stay_range,
                   metavar=("LO", "HI"), help="minutes a plane occupies its gate")
    p.add_argument("--buffer", type=int, default=d.buffer_time, help="buffer time in minutes")
    p.add_argument("--overlap-density", type=float, default=d.overlap_density,
                   help="target probability that two flights overlap")


def _generator_params(args) -> GeneratorParams:
    return GeneratorParams(
        walk_range=tuple(args.walk_range),
        unit_walk=args.unit_walk,
        passenger_range=tuple(args.passenger_range),
        transfer_range=tuple(args.transfer_range),
        transfer_probability=args.transfer_probability,
        stay_range=tuple(args.stay_range),
        buffer_time=args.buffer,
        overlap_density=args.overlap_density,
    )


def _load_instance(args) -> FgaInstance:
    if getattr(args, "instance", None):
        return read_instance(args.instance)
    seed = getattr(args, "instance_seed", None)
    if seed is None or args.flights is None or args.gates is None:
        raise ConfigError("give --instance FILE or --instance-seed with --flights and --gates")
    return generate_instance(seed, args.flights, args.gates, _generator_params(args))


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(
        prog="fgavqe",
        description="Flight gate assignment with CVaR-VQE on a statevector simulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="JSON file with default option values")
        subs[name] = p
        return p

    p = add("generate", "Generate a seeded synthetic instance.")
    _add_generator_args(p, "--seed")
    p.add_argument("--out", required=True, help="instance JSON to write")

    p = add("solve-exact", "Solve an instance by exhaustive enumeration.")
    p.add_argument("--instance", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP,
                   help="maximum number of assignments to enumerate")
    p.add_argument("--out", help="report JSON to write (default: stdout only)")

    p = add("encode", "Build the qubit Hamiltonian and export it.")
    p.add_argument("--instance", required=True)
    p.add_argument("--lambda", dest="lam", type=float, help="penalty weight")
    p.add_argument("--max-qubits", type=int, default=30)
    p.add_argument("--pauli", help="write Z-string terms as JSON")
    p.add_argument("--diagonal", help="write all 2^Q energies as binary (Q <= 20)")

    p = add("vqe", "Run CVaR-VQE, then inference and analysis at the final parameters.")
    p.add_argument("--instance", help="instance JSON (or use --instance-seed)")
    _add_generator_args(p, "--instance-seed")
    p.add_argument("--lambda", dest="lam", type=float, help="penalty weight")
    p.add_argument("--protocol", choices=sorted(PROTOCOLS), default="full",
                   help="full: eps 0.5, 1000 shots; inference: eps 0.25, exact optimization, "
                        "10000 inference shots")
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--shots", type=int, help="shots per evaluation")
    p.add_argument("--exact", action="store_true", default=None,
                   help="optimize the exact (infinite-shot) CVaR")
    p.add_argument("--max-iterations", type=int, help="evaluation budget (default 50*Q)")
    p.add_argument("--optimizer", choices=OPTIMIZERS, default="cobyla")
    p.add_argument("--rhobeg", type=float, default=CvarConfig.rhobeg,
                   help="initial step size of the optimizer in radians")
    p.add_argument("--init", choices=("uniform", "zeros"), default="uniform")
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--sampling-seed", type=int, default=0)
    p.add_argument("--inference-shots", type=int)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--restarts", type=int, default=1,
                   help="independent runs with seeds offset by the restart number")
    p.add_argument("--cap", type=int, default=DEFAULT_ENUMERATION_CAP,
                   help="enumeration cap for the exact oracle (skipped when exceeded)")
    p.add_argument("--out", required=True, help="output directory")

    p = add("inference", "Sample the ansatz state at saved parameters.")
    p.add_argument("--instance", required=True)
    p.add_argument("--params", required=True, help="params.json from a vqe run")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--shots", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")

    p = add("analyze", "Summarize a measured histogram against the exact oracle.")
    p.add_argument("--instance", required=True)
    p.add_argument("--histogram", required=True, help="histogram CSV with counts")
    p.add_argument("--params", help="params.json; adds the fidelity bound vs the exact state")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--out", help="summary JSON to write (default: stdout)")
    return parser, subs


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def _summary_line(instance: FgaInstance) -> str:
    layout = QubitLayout.for_instance(instance)
    return (
        f"flights={instance.n_flights} gates={instance.n_gates} "
        f"M={layout.bits_per_flight} Q={layout.n_qubits} |O|={len(overlap_set(instance))}"
    )


def cmd_generate(args) -> int:
    instance = generate_instance(args.seed, args.flights, args.gates, _generator_params(args))
    write_instance(instance, args.out)
    print(_summary_line(instance))
    return EXIT_OK


def _exact_report(instance: FgaInstance, cap: int) -> dict:
    res = brute_force_solve(instance, cap=cap)
    layout = QubitLayout.for_instance(instance)
    report = {
        "feasible": res.feasible,
        "min_cost": res.min_cost,
        "max_cost": res.max_cost,
        "n_feasible": res.n_feasible,
        "n_enumerated": res.n_enumerated,
        "optimal_assignments": [list(a) for a in res.optimal],
    }
    if layout.n_qubits <= 24:
        report["optimal_bitstrings"] = [
            index_to_bitstring(b, layout.n_qubits) for a in res.optimal for b in preimages(a, layout)
        ]
    return report


def cmd_solve_exact(args) -> int:
    instance = read_instance(args.instance)
    report = _exact_report(instance, args.cap)
    if args.out:
        write_json(args.out, report)
    if not report["feasible"]:
        print("no feasible assignment")
    else:
        print(f"min_cost={report['min_cost']}")
        for a in report["optimal_assignments"]:
            print("optimal " + " ".join(str(g) for g in a))
    return EXIT_OK


def cmd_encode(args) -> int:
    instance = read_instance(args.instance)
    h = build_hamiltonian(instance, args.lam, max_qubits=args.max_qubits)
    print(_summary_line(instance) + f" lambda={h.lam}")
    if args.pauli:
        terms = pauli_terms(h, atol=1e-12)
        write_pauli_terms(terms, args.pauli)
        print(f"pauli terms: {len(terms)}")
    if args.diagonal:
        write_diagonal(h, args.diagonal)
    return EXIT_OK


def _resolve_vqe(args, n_qubits: int) -> dict:
    eps, shots, inf_shots = PROTOCOLS[args.protocol]
    if args.epsilon is not None:
        eps = args.epsilon
    if args.exact:
        shots = None
    elif args.shots is not None:
        shots = args.shots
    return {
        "protocol": args.protocol,
        "layers": args.layers,
        "epsilon": eps,
        "shots": shots,
        "max_iterations": args.max_iterations or 50 * n_qubits,
        "optimizer": args.optimizer,
        "rhobeg": args.rhobeg,
        "init": args.init,
        "init_seed": args.init_seed,
        "sampling_seed": args.sampling_seed,
        "inference_shots": args.inference_shots or inf_shots,
        "top": args.top,
        "lambda": args.lam,
        "restarts": args.restarts,
        "cap": args.cap,
    }


def _write_trace(out: Path, result, spec: AnsatzSpec):
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "cvar", "best_energy_so_far"])
        for r in result.trace:
            w.writerow([r.iteration, repr(r.cvar), repr(float(r.best_energy_so_far))])
    write_json(
        out / "trace_params.json",
        {
            "n_qubits": spec.n_qubits,
            "layers": spec.layers,
            "iterations": [{"iteration": r.iteration, "params": list(r.params)} for r in result.trace],
        },
    )


def _write_params(path: Path, spec: AnsatzSpec, params):
    write_json(path, {"n_qubits": spec.n_qubits, "layers": spec.layers,
                      "params": [float(t) for t in params]})


def _read_params(path, n_qubits: int) -> tuple[AnsatzSpec, np.ndarray]:
    try:
        data = json.loads(Path(path).read_text())
        spec = AnsatzSpec(int(data["n_qubits"]), int(data["layers"]))
        params = np.array(data["params"], dtype=np.float64)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read parameter file {path}: {exc}") from exc
    if spec.n_qubits != n_qubits:
        raise ConfigError(f"parameter file is for {spec.n_qubits} qubits, instance needs {n_qubits}")
    if params.size != spec.n_params:
        raise ConfigError(f"parameter file has {params.size} angles, expected {spec.n_params}")
    return spec, params


def _analysis_block(h, counts, exact_p, top: int) -> dict:
    summary = top_k(counts, h, top).to_dict()
    summary["exact_ground_mass"] = ground_state_component(exact_p, h)
    summary["fidelity_upper_bound"] = fidelity_upper_bound(
        to_distribution(counts, h.n_qubits), exact_p
    )
    return summary


def _run_one(instance_dict: dict, cfg: dict, out: str, restart: int) -> dict:
    instance = FgaInstance.from_dict(instance_dict)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    h = build_hamiltonian(instance, cfg["lambda"])
    spec = AnsatzSpec(h.n_qubits, cfg["layers"])
    config = CvarConfig(
        epsilon=cfg["epsilon"],
        shots=cfg["shots"],
        max_iterations=cfg["max_iterations"],
        optimizer=cfg["optimizer"],
        rng_seed=cfg["sampling_seed"] + restart,
        init_strategy=cfg["init"],
        init_seed=cfg["init_seed"] + restart,
        rhobeg=cfg["rhobeg"],
    )
    result = optimize(h, spec, config)
    _write_trace(out, result, spec)
    _write_params(out / "params.json", spec, result.final_params)

    inf = inference(h, spec, result.final_params, cfg["inference_shots"],
                    seed=cfg["sampling_seed"] + restart)
    exact_p = probabilities(prepare(spec, result.final_params))
    write_histogram_csv(out / "histogram.csv", inf.counts, h)

    summary = {
        "restart": restart,
        "n_qubits": h.n_qubits,
        "lambda": h.lam,
        "min_energy": h.min_energy(),
        "final_cvar": result.final_cvar,
        "success": result.success,
        "message": result.message,
        "n_evaluations": result.n_evaluations,
        "best_sampled": {"bitstring": result.best_sampled[0], "energy": result.best_sampled[1]},
        "reached_min": abs(result.final_cvar - h.min_energy()) <= 1e-6,
        "inference": _analysis_block(h, inf.counts, exact_p, cfg["top"]),
    }
    try:
        oracle = brute_force_solve(instance, cap=cfg["cap"])
    except EnumerationCapExceeded:
        oracle = None
    if oracle is not None and oracle.feasible:
        summary["oracle_min_cost"] = oracle.min_cost
        if oracle.min_cost < oracle.max_cost:
            summary["approximation_ratio"] = approximation_ratio(
                exact_p, h, oracle.min_cost, oracle.max_cost
            )
    summary = _jsonable(summary)
    write_json(out / "summary.json", summary)
    return summary


def cmd_vqe(args) -> int:
    instance = _load_instance(args)
    layout = QubitLayout.for_instance(instance)
    cfg = _resolve_vqe(args, layout.n_qubits)
    if cfg["restarts"] < 1:
        raise ConfigError("--restarts must be at least 1")
    # fail on bad settings before any work starts
    CvarConfig(epsilon=cfg["epsilon"], shots=cfg["shots"], max_iterations=cfg["max_iterations"],
               optimizer=cfg["optimizer"], init_strategy=cfg["init"])
    build_hamiltonian(instance, cfg["lambda"])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_instance(instance, out / "instance.json")
    write_json(out / "config.json", cfg)

    data = instance.to_dict()
    if cfg["restarts"] == 1:
        summaries = [_run_one(data, cfg, str(out), 0)]
    else:
        dirs = [str(out / f"restart_{r:03d}") for r in range(cfg["restarts"])]
        workers = min(cfg["restarts"], os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_run_one, [data] * len(dirs), [cfg] * len(dirs),
                                      dirs, range(len(dirs))))
        write_json(out / "summary.json", {
            "restarts": [
                {k: s[k] for k in ("restart", "final_cvar", "reached_min", "n_evaluations")}
                | {"ground_mass": s["inference"]["ground_mass"]}
                for s in summaries
            ],
            "n_reached_min": sum(s["reached_min"] for s in summaries),
        })
    for s in summaries:
        print(
            f"restart {s['restart']}: cvar={s['final_cvar']:.6g} min={s['min_energy']} "
            f"evals={s['n_evaluations']} ground_mass={s['inference']['ground_mass']:.3f}"
        )
    return EXIT_OK


def cmd_inference(args) -> int:
    instance = read_instance(args.instance)
    h = build_hamiltonian(instance, args.lam)
    spec, params = _read_params(args.params, h.n_qubits)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inf = inference(h, spec, params, args.shots, seed=args.seed)
    exact_p = probabilities(prepare(spec, params))
    write_histogram_csv(out / "histogram.csv", inf.counts, h)
    summary = {"shots": args.shots, "seed": args.seed, "min_energy": inf.min_energy}
    summary.update(_analysis_block(h, inf.counts, exact_p, args.top))
    write_json(out / "summary.json", _jsonable(summary))
    print(f"ground_mass={summary['ground_mass']:.4f} "
          f"fidelity_upper_bound={summary['fidelity_upper_bound']:.4f}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    instance = read_instance(args.instance)
    h = build_hamiltonian(instance, args.lam)
    try:
        counts = read_histogram_csv(args.histogram)
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read histogram {args.histogram}: {exc}") from exc
    summary = top_k(counts, h, args.top).to_dict()
    summary["shots"] = sum(counts.values())
    if args.params:
        spec, params = _read_params(args.params, h.n_qubits)
        exact_p = probabilities(prepare(spec, params))
        summary["fidelity_upper_bound"] = fidelity_upper_bound(
            to_distribution(counts, h.n_qubits), exact_p
        )
    summary = _jsonable(summary)
    if args.out:
        write_json(args.out, summary)
    else:
        print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve-exact": cmd_solve_exact,
    "encode": cmd_encode,
    "vqe": cmd_vqe,
    "inference": cmd_inference,
    "analyze": cmd_analyze,
}


def _apply_config(parser, subs, argv) -> argparse.Namespace:
    # first pass only locates --config; required options may come from the file
    required = [a for sp in subs.values() for a in sp._actions if a.required]
    for a in required:
        a.required = False
    try:
        args = parser.parse_args(argv)
    finally:
        for a in required:
            a.required = True
    if not args.config:
        return parser.parse_args(argv)
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    sub = subs[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in data.items():
        dest = "lam" if key == "lambda" else key
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(f"unknown config key {key!r} for {args.command}")
        defaults[dest] = value
    sub.set_defaults(**defaults)
    for a in sub._actions:
        if a.dest in defaults:
            a.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser, subs = build_parser()
    try:
        args = _apply_config(parser, subs, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except (EnumerationCapExceeded, QubitLimitExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, InstanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
