"""Command-line front end: compile ansatz circuits, simulate dynamics,
compute Green's functions and spectra, and run gate-resource sweeps.

Every command takes a JSON config validated against a schema (unknown keys
rejected).  Outputs are CSV files with comment headers carrying the config
hash and code version, plus JSON summaries.  Exit codes: 0 success, 1 config
error, 2 numerical stall, 3 resource/cap exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import resources as importlib_resources
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from . import __version__
from .circuit import (
    CompiledCircuit,
    ParamCircuit,
    build_brickwall,
    build_trotter1,
    build_vha,
    concat,
    hubbard_u0_ground_prep,
    neel_prep,
    trotter_equivalent_init,
)
from .compilation import CompilationProblem, OptimizeConfig, optimize
from .model import GroupedHamiltonian, load_model_config, sector_indices
from .observables import (
    CircuitBranchEngine,
    ExactBranchEngine,
    SectorEvolver,
    SpectralGrid,
    TimeSeries,
    depth_compression,
    double_occupation,
    gf_momentum,
    mae_scalar,
    mae_series,
    momentum_grid,
    repeated_dynamics,
    retarded_gf,
    spectral_function,
    state_infidelity_series,
    vqe_ground_state,
)
from .qsim import CapExceededError, StateVector
from .resources import (
    ErrorScheme,
    hubbard2d_report,
    load_all_materials,
    load_material,
    material_report,
)
from .subspace import SubspaceSpec, build_basis, gramian

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STALL = 2
EXIT_CAP = 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

_MODEL_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "L"],
    "properties": {
        "model": {"enum": ["heisenberg", "hubbard_chain"]},
        "L": {"type": "integer", "minimum": 2},
        "boundary": {"enum": ["periodic", "open"]},
        "preset": {"enum": ["sr2cuo3"]},
        "t1": {"type": "number"},
        "t2": {"type": "number"},
        "U": {"type": "number"},
        "mu": {"type": "number"},
    },
}

_SUBSPACE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "n_t", "dt"],
    "properties": {
        "kind": {"enum": ["krylov", "gf_krylov"]},
        "n_t": {"type": "integer", "minimum": 0},
        "dt": {"type": "number"},
        "phi": {"type": "number"},
    },
}

_ANSATZ_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "depth"],
    "properties": {
        "family": {"enum": ["brickwall", "vha"]},
        "depth": {"type": "integer", "minimum": 1},
        "translational": {"type": "boolean"},
    },
}

_OPTIMIZER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "fd_step": {"type": "number"},
        "gtol": {"type": "number"},
        "max_iter": {"type": "integer", "minimum": 1},
        "n_restarts": {"type": "integer", "minimum": 0},
        "restart_scale": {"type": "number"},
        "stall_cost": {"type": "number"},
    },
}

_GROUND_STATE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["method"],
    "properties": {
        "method": {"enum": ["neel", "u0_ground", "vqe"]},
        "n_e": {"type": "integer", "minimum": 0},
        "vqe_layers": {"type": "integer", "minimum": 1},
        "vqe_max_iter": {"type": "integer", "minimum": 1},
    },
}

COMPILE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "tau", "ansatz", "subspace", "l_tilde"],
    "properties": {
        "description": {"type": "string"},
        "wall_time_budget_s": {"type": "number"},
        "model": _MODEL_SCHEMA,
        "tau": {"type": "number"},
        "target_r": {"type": "integer", "minimum": 1},
        "ansatz": _ANSATZ_SCHEMA,
        "subspace": _SUBSPACE_SCHEMA,
        "base_prep": _GROUND_STATE_SCHEMA,
        "l_tilde": {"type": "integer", "minimum": 2},
        "mode": {"enum": ["translational", "subsystem", "full_space"]},
        "optimizer": _OPTIMIZER_SCHEMA,
        "seed": {"type": "integer"},
        "stall_cost": {"type": "number"},
    },
}

DYNAMICS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "tau", "n_steps", "observable"],
    "properties": {
        "description": {"type": "string"},
        "wall_time_budget_s": {"type": "number"},
        "model": _MODEL_SCHEMA,
        "tau": {"type": "number"},
        "n_steps": {"type": "integer", "minimum": 0},
        "observable": {"enum": ["doublon", "infidelity"]},
        "initial_state": _GROUND_STATE_SCHEMA,
        "circuit_file": {"type": "string"},
        "compile": COMPILE_SCHEMA,
        "trotter_rs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "target_r": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
}

GF_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "tau", "t_max", "ground_state"],
    "properties": {
        "description": {"type": "string"},
        "wall_time_budget_s": {"type": "number"},
        "model": _MODEL_SCHEMA,
        "tau": {"type": "number"},
        "t_max": {"type": "number"},
        "ground_state": _GROUND_STATE_SCHEMA,
        "circuit_file": {"type": "string"},
        "compile": COMPILE_SCHEMA,
        "trotter_rs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "spectral": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eta": {"type": "number"},
                "omega0": {"type": "number"},
                "n_omega": {"type": "integer", "minimum": 1},
            },
        },
        "k_indices": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "seed": {"type": "integer"},
    },
}

RESOURCES_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "description": {"type": "string"},
        "wall_time_budget_s": {"type": "number"},
        "table": {"enum": ["materials"]},
        "materials": {"type": "array", "items": {"type": "string"}},
        "t": {"type": "number"},
        "epsilon": {"type": "number"},
        "n_cells": {"type": "integer", "minimum": 1},
        "compression": {"type": "number"},
        "budget": {"type": "number"},
        "hubbard2d": {
            "type": "object",
            "additionalProperties": False,
            "required": ["L_values"],
            "properties": {
                "L_values": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "t_values": {"type": "array", "items": {"type": "number"}},
            },
        },
        "seed": {"type": "integer"},
    },
}


def validate_config(cfg: dict, schema: dict) -> None:
    errors = sorted(Draft202012Validator(schema).iter_errors(cfg), key=lambda e: e.json_path)
    if errors:
        lines = [f"{e.json_path}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _csv_header(cfg: dict) -> str:
    return f"# lsvqc {__version__}\n# config_sha256 {_config_hash(cfg)}\n"


def write_csv(path: Path, cfg: dict, columns: list[str], rows) -> None:
    with open(path, "w") as f:
        f.write(_csv_header(cfg))
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12e}"
    return str(v)


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# Shared build steps
# ---------------------------------------------------------------------------


def _build_ansatz(grouped: GroupedHamiltonian, spec: dict) -> ParamCircuit:
    if spec["family"] == "brickwall":
        return build_brickwall(
            grouped.n_qubits, spec["depth"], spec.get("translational", True), grouped.lattice.boundary
        )
    return build_vha(grouped, spec["depth"])


def _build_prep(grouped: GroupedHamiltonian, spec: dict, seed: int = 0) -> ParamCircuit:
    method = spec["method"]
    if method == "neel":
        return neel_prep(grouped.n_qubits)
    if grouped.kind != "hubbard_chain":
        raise ConfigError(f"prep method {method!r} needs the hubbard chain")
    n_e = spec.get("n_e", grouped.lattice.L)
    prep = hubbard_u0_ground_prep(grouped, n_e)
    if method == "u0_ground":
        return prep
    layers = spec.get("vqe_layers", 5)
    res = vqe_ground_state(
        grouped, build_vha(grouped, layers), prep, max_iter=spec.get("vqe_max_iter", 300), seed=seed
    )
    return concat(prep, build_vha(grouped, layers).bind(res.binding))


def _compile_from_config(cfg: dict, seed: int):
    full_model = dict(cfg["model"])
    small_model = dict(full_model, L=cfg["l_tilde"])
    grouped = load_model_config(small_model)
    ansatz = _build_ansatz(grouped, cfg["ansatz"])
    prep_spec = cfg.get("base_prep", {"method": "neel"})
    base_prep = _build_prep(grouped, prep_spec, seed)
    sub = cfg["subspace"]
    spec = SubspaceSpec(sub["kind"], sub["n_t"], sub["dt"], sub.get("phi"), base_prep)
    basis = build_basis(spec, grouped)
    problem = CompilationProblem(
        grouped,
        cfg["tau"],
        ansatz,
        basis,
        mode=cfg.get("mode", "translational"),
        target_r=cfg.get("target_r", 100),
        l_tilde=cfg["l_tilde"],
    )
    opt_cfg = cfg.get("optimizer", {})
    config = OptimizeConfig(
        fd_step=opt_cfg.get("fd_step", 1e-5),
        gtol=opt_cfg.get("gtol", 1e-8),
        max_iter=opt_cfg.get("max_iter", 300),
        n_restarts=opt_cfg.get("n_restarts", 0),
        restart_scale=opt_cfg.get("restart_scale", 1e-2),
        stall_cost=opt_cfg.get("stall_cost"),
        seed=seed,
    )
    init = trotter_equivalent_init(ansatz, grouped, cfg["tau"])
    result = optimize(problem, init, config)
    report = gramian(basis)
    return problem, result, report


def _full_circuit_for(cfg_model: dict, ansatz_spec: dict, binding: dict) -> tuple[GroupedHamiltonian, ParamCircuit]:
    grouped = load_model_config(cfg_model)
    circuit = _build_ansatz(grouped, ansatz_spec)
    return grouped, circuit.bind(binding)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_compile(cfg: dict, out: Path, seed: int, verbose: bool) -> int:
    validate_config(cfg, COMPILE_SCHEMA)
    t0 = time.time()
    problem, result, gram = _compile_from_config(cfg, seed)
    wall = time.time() - t0
    full_grouped, full_circuit = _full_circuit_for(cfg["model"], cfg["ansatz"], result.binding)
    full_circuit.save(out / "circuit.json")
    write_json(
        out / "result.json",
        {
            "binding": result.binding,
            "final_cost": result.final_cost,
            "trace": result.trace,
            "n_evaluations": result.n_evaluations,
            "converged": result.converged,
            "sizing": result.sizing,
            "gramian": {
                "dimension": gram.dimension,
                "det_modulus": gram.det_modulus,
                "rank": gram.rank,
                "min_eigenvalue": gram.min_eigenvalue,
            },
            "config_sha256": _config_hash(cfg),
        },
    )
    _log(verbose, f"final cost {result.final_cost:.3e} after {result.n_evaluations} evaluations ({wall:.1f}s)")
    stall = cfg.get("stall_cost")
    if stall is not None and result.final_cost > stall:
        return EXIT_STALL
    return EXIT_OK


def _initial_state(grouped: GroupedHamiltonian, cfg: dict, seed: int) -> StateVector:
    prep = _build_prep(grouped, cfg.get("initial_state", cfg.get("ground_state", {"method": "neel"})), seed)
    return prep.state()


def cmd_dynamics(cfg: dict, out: Path, seed: int, verbose: bool) -> int:
    validate_config(cfg, DYNAMICS_SCHEMA)
    grouped = load_model_config(cfg["model"])
    tau = cfg["tau"]
    n_steps = cfg["n_steps"]
    binding, ansatz_spec = _resolve_circuit(cfg, out, seed)
    circuit = ansatz_spec.pop("_prebound", None)
    if circuit is None:
        circuit = _build_ansatz(grouped, ansatz_spec).bind(binding)
    psi0 = _initial_state(grouped, cfg, seed)
    times = tau * np.arange(1, n_steps + 1)
    columns = ["t"]
    series: list[np.ndarray] = [times]
    summary: dict = {}

    ladder: list[tuple[int, float]] = []
    lsvqc_metric = None
    if cfg["observable"] == "doublon":
        L = grouped.lattice.L
        n_e = cfg.get("initial_state", {}).get("n_e", L)
        sector = sector_indices(L, n_e, 0.0)
        evolver = SectorEvolver(grouped.total, [sector])
        parts = evolver.decompose(psi0.amplitudes)
        exact = np.array(
            [double_occupation(StateVector(grouped.n_qubits, evolver.reconstruct(parts, t)), L) for t in times]
        )
        columns.append("exact")
        series.append(exact)
        runs = {"lsvqc": circuit}
        for r in cfg.get("trotter_rs", []):
            runs[f"trot_r{r}"] = build_trotter1(grouped, tau, r)
        for label, circ in runs.items():
            states = repeated_dynamics(circ, None, psi0.copy(), n_steps)
            vals = np.array([double_occupation(s, L) for s in states])
            columns.append(label)
            series.append(vals)
            if n_steps:
                metric = float(mae_series(vals, exact)[-1])
                summary[f"mae_{label}"] = metric
                if label == "lsvqc":
                    lsvqc_metric = metric
                else:
                    ladder.append((int(label.split("trot_r")[1]), metric))
    else:
        u_ref = build_trotter1(grouped, tau, cfg.get("target_r", 100))
        runs = {"lsvqc": circuit}
        for r in cfg.get("trotter_rs", []):
            runs[f"trot_r{r}"] = build_trotter1(grouped, tau, r)
        for label, circ in runs.items():
            vals = state_infidelity_series(circ, u_ref, psi0.copy(), n_steps)
            columns.append(label)
            series.append(vals)
            if n_steps:
                metric = float(np.mean(vals))
                summary[f"mean_infidelity_{label}"] = metric
                if label == "lsvqc":
                    lsvqc_metric = metric
                else:
                    ladder.append((int(label.split("trot_r")[1]), metric))

    if lsvqc_metric is not None and len(ladder) >= 2:
        comp = depth_compression(sorted(ladder), lsvqc_metric, max(circuit.depth, 1))
        summary["depth_compression"] = comp.ratio
        summary["depth_equivalent"] = comp.depth_equivalent
        if comp.flag:
            summary["depth_compression_flag"] = comp.flag

    write_csv(out / "dynamics.csv", cfg, columns, zip(*series) if n_steps else [])
    write_json(out / "summary.json", summary | {"config_sha256": _config_hash(cfg)})
    _log(verbose, f"wrote dynamics.csv with columns {columns}")
    return EXIT_OK


def _resolve_circuit(cfg: dict, out: Path, seed: int) -> tuple[dict, dict]:
    """Either load a compiled circuit file or run the inline compile."""
    if "circuit_file" in cfg:
        circuit = ParamCircuit.load(cfg["circuit_file"])
        meta = circuit.meta
        if circuit.family == "vha":
            spec = {"family": "vha", "depth": meta["n_layers"]}
        else:
            spec = {"family": "brickwall", "depth": meta["d_v"], "translational": meta.get("translational", True)}
        binding = {}  # circuit arrives bound
        return binding, spec | {"_prebound": circuit}
    if "compile" not in cfg:
        raise ConfigError("need either circuit_file or an inline compile section")
    sub = cfg["compile"]
    validate_config(sub, COMPILE_SCHEMA)
    _, result, _ = _compile_from_config(sub, seed)
    return result.binding, sub["ansatz"]


def cmd_gf(cfg: dict, out: Path, seed: int, verbose: bool) -> int:
    validate_config(cfg, GF_SCHEMA)
    grouped = load_model_config(cfg["model"])
    if grouped.kind != "hubbard_chain":
        raise ConfigError("green's-function command needs the hubbard chain")
    L = grouped.lattice.L
    tau = cfg["tau"]
    times = np.arange(0.0, cfg["t_max"] + 1e-9, tau)
    n_e = cfg["ground_state"].get("n_e", L)
    prep = _build_prep(grouped, cfg["ground_state"], seed)
    e0 = prep.state().amplitudes

    sectors = [
        sector_indices(L, n_e, 0.0),
        sector_indices(L, n_e - 1, -0.5),
        sector_indices(L, n_e + 1, 0.5),
    ]
    evolver = SectorEvolver(grouped.total, sectors)
    modes = list(range(L))
    engines = {"exact": ExactBranchEngine(evolver, e0.copy(), modes)}
    if "circuit_file" in cfg or "compile" in cfg:
        binding, ansatz_spec = _resolve_circuit(cfg, out, seed)
        circuit = ansatz_spec.pop("_prebound", None)
        if circuit is None:
            circuit = _build_ansatz(grouped, ansatz_spec).bind(binding)
        engines["lsvqc"] = CircuitBranchEngine(CompiledCircuit(circuit), e0.copy(), modes, tau)
    for r in cfg.get("trotter_rs", []):
        engines[f"trot_r{r}"] = CircuitBranchEngine(
            CompiledCircuit(build_trotter1(grouped, tau, r)), e0.copy(), modes, tau
        )

    spec = cfg.get("spectral", {})
    grid = SpectralGrid(spec.get("omega0", 5.0), spec.get("n_omega", 250), spec.get("eta", 0.1))
    k_indices = cfg.get("k_indices", list(range(L)))
    ks = momentum_grid(L)

    g_site = {label: retarded_gf(engine, times) for label, engine in engines.items()}
    summary: dict = {"config_sha256": _config_hash(cfg)}
    a_by_label: dict[str, dict[int, np.ndarray]] = {label: {} for label in engines}
    for m in k_indices:
        k = ks[m]
        cols = ["t"]
        data = [times]
        for label in engines:
            gk = gf_momentum(g_site[label], k, L)
            a_by_label[label][m] = spectral_function(TimeSeries(times, gk), grid)
            cols += [f"{label}_re", f"{label}_im"]
            data += [gk.real, gk.imag]
        write_csv(out / f"gf_k{m}.csv", cfg, cols, zip(*data))
        cols = ["omega"] + list(engines)
        write_csv(
            out / f"spectral_k{m}.csv",
            cfg,
            cols,
            zip(grid.omegas, *[a_by_label[label][m] for label in engines]),
        )
        for label in engines:
            if label != "exact":
                summary[f"mae_A_k{m}_{label}"] = mae_scalar(a_by_label[label][m], a_by_label["exact"][m])
                gk = gf_momentum(g_site[label], k, L)
                gk_ex = gf_momentum(g_site["exact"], k, L)
                summary[f"mae_G_k{m}_{label}"] = float(np.mean(np.abs(gk - gk_ex)[1:]))
    if set(k_indices) == set(range(L)):
        cols = ["omega"] + [f"dos_{label}" for label in engines]
        dos_rows = [np.mean([a_by_label[label][m] for m in range(L)], axis=0) for label in engines]
        write_csv(out / "dos.csv", cfg, cols, zip(grid.omegas, *dos_rows))
        for label, row in zip(engines, dos_rows):
            summary[f"dos_sum_{label}"] = float(np.sum(row) * grid.spacing)
    write_json(out / "summary.json", summary)
    _log(verbose, f"wrote gf/spectra for k indices {k_indices}")
    return EXIT_OK


def cmd_resources(cfg: dict, out: Path, seed: int, verbose: bool) -> int:
    validate_config(cfg, RESOURCES_SCHEMA)
    rows = []
    compression = cfg.get("compression", 10.0)
    budget = cfg.get("budget", 2.0)
    if cfg.get("table") == "materials" or "materials" in cfg:
        names = cfg.get("materials")
        specs = load_all_materials() if not names else [load_material(n) for n in names]
        for spec in specs:
            rows += material_report(
                spec,
                cfg.get("n_cells", 10),
                cfg.get("t", 0.1),
                cfg.get("epsilon", 0.01),
                compression,
                budget,
            )
    if "hubbard2d" in cfg:
        for L in cfg["hubbard2d"]["L_values"]:
            for t in cfg["hubbard2d"].get("t_values", [cfg.get("t", 1.0)]):
                rows += hubbard2d_report(L, t, cfg.get("epsilon", 0.01), compression, budget)
    if not rows:
        raise ConfigError("config selects no estimates (need table/materials or hubbard2d)")
    columns = ["label", "method", "scheme", "depth", "n_1q", "n_2q", "n_rz", "p2q_max", "pphys_max"]
    write_csv(
        out / "resources.csv",
        cfg,
        columns,
        [
            (r.label, r.method, r.scheme, r.depth, r.n_1q if r.n_1q is not None else "", r.n_2q, r.n_rz, r.p2q_max, r.pphys_max)
            for r in rows
        ],
    )
    write_json(out / "resources.json", {"rows": [r.to_json() for r in rows], "config_sha256": _config_hash(cfg)})
    _log(verbose, f"wrote {len(rows)} resource rows")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "compile": cmd_compile,
    "dynamics": cmd_dynamics,
    "gf": cmd_gf,
    "resources": cmd_resources,
}


def _log(verbose: bool, msg: str) -> None:
    if verbose:
        print(msg, file=sys.stderr)


def shipped_config_path(name: str) -> Path:
    ref = importlib_resources.files("lsvqc.configs").joinpath(name)
    return Path(str(ref))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="lsvqc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=None, help="worker hint (vectorized single-process build; recorded only)")
        p.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as f:
            cfg = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](cfg, out, args.seed, args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceededError as exc:
        print(f"cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
