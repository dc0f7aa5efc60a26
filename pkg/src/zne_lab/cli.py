"""Command-line front end: ``plan``, ``run``, ``sweep`` and ``devices``.

Exit codes: 0 success, 2 usage or input error, 3 numerical-integrity error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .circuit import Circuit, CircuitError, generate_alternating_pair_chain, generate_cnot_chain, index_to_bitstring
from .ensemble import (
    DeviceDataError,
    convert_tables,
    load_device_profiles,
    load_device_records,
    noise_model_of,
    run_replicated,
    run_sharded,
    sample_normal_profiles,
)
from .estimator import SHOT_MODES, ShotBudget, allocate_shots, run_plan
from .insertion import PlanError, deepen, make_plan, unmitigated_plan
from .noise import NOISELESS, BitValue, IntegrityError, NoiseModel, TargetProbability, probabilities, simulate

EXIT_USAGE = 2
EXIT_INTEGRITY = 3

SWEEP_COLUMNS = [
    "method",
    "n_cnot",
    "epsilon_mean",
    "epsilon_std",
    "n_devices",
    "strategy",
    "shots_nominal",
    "shots_aux",
    "estimate",
    "std_error",
    "exact_value",
]


class InputError(ValueError):
    """Bad flags or spec contents; reported with exit code 2."""


# -- shared helpers --------------------------------------------------------


def parse_method(text: str):
    """``none``, ``fiim``/``fiimK``, ``riim``, ``siim:S``, ``liim_fiim:0,2``, ``liim_riim:1``."""
    name, _, arg = text.partition(":")
    if name == "none":
        return lambda c: unmitigated_plan(c)
    if name.startswith("fiim"):
        order = int(name[4:] or arg or 1)
        return lambda c: make_plan(c, "fiim", order=order)
    if name == "riim":
        return lambda c: make_plan(c, "riim")
    if name == "siim":
        if not arg:
            raise InputError("method: siim needs a set count, e.g. siim:2")
        return lambda c: make_plan(c, "siim", sets=int(arg))
    if name in ("liim_fiim", "liim_riim"):
        if not arg:
            raise InputError(f"method: {name} needs a CNOT list, e.g. {name}:0,2")
        targets = [int(x) for x in arg.split(",")]
        return lambda c: make_plan(c, name, targets=targets)
    raise InputError(f"method: unknown method {text!r}")


def noiseless_bitstring(c: Circuit) -> str:
    p = probabilities(simulate(c, NOISELESS))
    i = int(np.argmax(p))
    if p[i] < 1.0 - 1e-9:
        raise InputError("observable: 'ideal' needs a circuit whose noiseless output is a basis state")
    return index_to_bitstring(i, c.n_qubits)


def parse_observable(spec, c: Circuit):
    if spec in (None, "bit_value"):
        return BitValue()
    if spec == "ideal":
        return TargetProbability(noiseless_bitstring(c))
    if isinstance(spec, dict) and "target" in spec:
        spec = "target:" + spec["target"]
    if isinstance(spec, str) and spec.startswith("target:"):
        bits = spec.split(":", 1)[1]
        if len(bits) != c.n_qubits:
            raise InputError(f"observable: target {bits!r} does not match {c.n_qubits} qubits")
        return TargetProbability(bits)
    raise InputError(f"observable: unknown observable {spec!r}")


def read_circuit(path: str) -> Circuit:
    try:
        return Circuit.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"circuit: cannot read {path}: {exc}") from None


def circuit_from_args(args) -> Circuit:
    if args.circuit and args.chain is not None:
        raise InputError("circuit: give either --circuit or --chain, not both")
    if args.circuit:
        return read_circuit(args.circuit)
    if args.chain is not None:
        return generate_cnot_chain(args.chain, args.initial or "00")
    raise InputError("circuit: one of --circuit or --chain is required")


def plan_from_args(c: Circuit, args):
    if args.method == "fiim":
        return make_plan(c, "fiim", order=args.order)
    if args.method == "siim":
        return make_plan(c, "siim", sets=args.sets)
    if args.method in ("liim_fiim", "liim_riim"):
        if not args.list:
            raise InputError(f"list: --list is required for {args.method}")
        return make_plan(c, args.method, targets=[int(x) for x in args.list.split(",")])
    if args.method == "none":
        return unmitigated_plan(c)
    return make_plan(c, args.method)


def emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _add_circuit_args(p):
    p.add_argument("--circuit", help="circuit JSON file")
    p.add_argument("--chain", type=int, help="alternating two-qubit CNOT chain of this length")
    p.add_argument("--initial", help="initial bitstring for --chain (qubit 0 first)")


def _add_method_args(p, default="fiim"):
    p.add_argument("--method", default=default, choices=["none", "fiim", "riim", "siim", "liim_fiim", "liim_riim"])
    p.add_argument("--order", type=int, default=1, help="FIIM Richardson order")
    p.add_argument("--sets", type=int, help="SIIM number of sets")
    p.add_argument("--list", help="comma-separated CNOT indices for LIIM")


# -- plan ------------------------------------------------------------------


def cmd_plan(args) -> int:
    c = circuit_from_args(args)
    plan = plan_from_args(c, args)
    emit(json.dumps(plan.to_dict(), indent=2) + "\n", args.output)
    return 0


# -- run -------------------------------------------------------------------


def noise_from_args(args) -> NoiseModel:
    damping = {}
    if args.t1_us is not None or args.cnot_ns is not None:
        if args.t1_us is None or args.cnot_ns is None:
            raise InputError("noise: --t1-us and --cnot-ns must be given together")
        damping = {"t1_us": args.t1_us, "cnot_duration_ns": args.cnot_ns}
    if args.device:
        if args.epsilon is not None:
            raise InputError("noise: give either --epsilon or --device")
        try:
            profile = load_device_profiles(args.data)[args.device]
        except KeyError:
            raise InputError(f"device: unknown device {args.device!r}") from None
        nm = noise_model_of(profile, include_damping=bool(args.device_damping))
        if damping:
            nm = NoiseModel(dict(nm.depolarizing), nm.default_epsilon, **damping)
        return nm
    eps = args.epsilon if args.epsilon is not None else 0.0
    if not 0.0 <= eps <= 1.0:
        raise InputError(f"epsilon: {eps} outside [0, 1]")
    return NoiseModel.uniform(eps, **damping)


def cmd_run(args) -> int:
    c = circuit_from_args(args)
    plan = plan_from_args(c, args)
    nominal = unmitigated_plan(c)
    nm = noise_from_args(args)
    obs = parse_observable(args.observable, c)
    if args.shots < 1 or (args.aux_shots is not None and args.aux_shots < 1):
        raise InputError("shots: shot counts must be >= 1")
    base = ShotBudget(args.shots, args.aux_shots or args.shots)
    exact = {
        "noiseless": run_plan(nominal, NOISELESS, None, 0, obs).value,
        "unmitigated": run_plan(nominal, nm, None, 0, obs).value,
        "mitigated": run_plan(plan, nm, None, 0, obs).value,
    }
    if args.exact:
        budget = None
        unmit = run_plan(nominal, nm, None, args.seed, obs)
        mit = run_plan(plan, nm, None, args.seed, obs)
    else:
        budget = allocate_shots(plan, base, args.allocation)
        unmit = run_plan(nominal, nm, [base.nominal], args.seed, obs)
        mit = run_plan(plan, nm, budget, args.seed, obs)
    result = {
        "method": plan.method,
        "params": plan.params,
        "n_cnot": c.n_cnots,
        "observable": repr(obs),
        "seed": args.seed,
        "shots": budget,
        "unmitigated": unmit.to_dict(),
        "mitigated": mit.to_dict(),
        "exact": exact,
    }
    emit(json.dumps(result, indent=2) + "\n", args.output)
    return 0


# -- sweep -----------------------------------------------------------------


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise InputError(f"{where}{key}: required field missing")
    return d[key]


def _sweep_circuits(spec: dict) -> list[Circuit]:
    src = _require(spec, "circuit", "")
    if not isinstance(src, dict) or len(set(src) & {"file", "chain"}) != 1:
        raise InputError("circuit: give exactly one of 'file' or 'chain'")
    if "file" in src:
        base = [read_circuit(src["file"])]
    else:
        chain = src["chain"]
        lengths = _require(chain, "lengths", "circuit.chain.")
        pattern = chain.get("pattern", "two_qubit")
        if pattern == "two_qubit":
            base = [generate_cnot_chain(n, chain.get("initial_state", "11")) for n in lengths]
        elif pattern == "three_qubit":
            base = [generate_alternating_pair_chain(n, chain.get("initial_state", "111")) for n in lengths]
        else:
            raise InputError(f"circuit.chain.pattern: unknown pattern {pattern!r}")
    factors = spec.get("deepen")
    if factors:
        return [deepen(c, k) for c in base for k in factors]
    return base


def _sweep_noise_points(spec: dict) -> list[dict]:
    """Noise configurations: uniform epsilons or device ensembles."""
    has_eps = "noise" in spec
    has_ens = "ensemble" in spec
    if has_eps == has_ens:
        raise InputError("noise: give exactly one of 'noise' or 'ensemble'")
    if has_eps:
        noise = spec["noise"]
        eps_list = _require(noise, "epsilons", "noise.")
        if not eps_list:
            raise InputError("noise.epsilons: must be non-empty")
        damping = {}
        if "t1_us" in noise or "cnot_duration_ns" in noise:
            damping = {"t1_us": _require(noise, "t1_us", "noise."),
                       "cnot_duration_ns": _require(noise, "cnot_duration_ns", "noise.")}
        return [{"kind": "uniform", "epsilon": float(e), "damping": damping} for e in eps_list]
    ens = spec["ensemble"]
    strategy = ens.get("strategy", "replicated")
    if strategy not in ("replicated", "sharded"):
        raise InputError(f"ensemble.strategy: unknown strategy {strategy!r}")
    if "profiles" in ens:
        path = None if ens["profiles"] == "bundled" else ens["profiles"]
        return [{"kind": "profiles", "path": path, "strategy": strategy,
                 "n_devices": ens.get("n_devices")}]
    mu = float(_require(ens, "mu", "ensemble."))
    sigmas = _require(ens, "sigmas", "ensemble.")
    n = int(_require(ens, "n_devices", "ensemble."))
    return [
        {"kind": "normal", "mu": mu, "sigma": float(s), "n_devices": n, "strategy": strategy,
         "seed": int(ens.get("seed", 0)), "antithetic": bool(ens.get("antithetic", False))}
        for s in sigmas
    ]


def _build_ensemble(point: dict):
    if point["kind"] == "normal":
        return sample_normal_profiles(point["n_devices"], point["mu"], point["sigma"],
                                      point["seed"], antithetic=point["antithetic"])
    ens = load_device_profiles(point["path"])
    if point.get("n_devices"):
        ens = type(ens)(list(ens)[: point["n_devices"]])
    return ens


def _sweep_row(task) -> dict:
    method, c, point, shots_spec, seed, obs_spec = task
    plan = parse_method(method)(c)
    obs = parse_observable(obs_spec, c)
    exact_mode = shots_spec is None
    budget = None
    if not exact_mode:
        base = ShotBudget(int(shots_spec["nominal"]), int(shots_spec.get("per_auxiliary", shots_spec["nominal"])))
        budget = allocate_shots(plan, base, shots_spec.get("allocation", "self_consistent"))
    row = {"method": method, "n_cnot": c.n_cnots}
    if point["kind"] == "uniform":
        nm = NoiseModel.uniform(point["epsilon"], **point["damping"])
        est = run_plan(plan, nm, budget, seed, obs)
        exact = run_plan(plan, nm, None, seed, obs).value
        row.update(epsilon_mean=point["epsilon"], epsilon_std=0.0, n_devices=1, strategy="single")
    else:
        ens = _build_ensemble(point)
        rates = [p.mean_cx_error for p in ens]
        if point["kind"] == "normal":
            row.update(epsilon_mean=point["mu"], epsilon_std=point["sigma"])
        else:
            row.update(epsilon_mean=float(np.mean(rates)), epsilon_std=float(np.std(rates)))
        row.update(n_devices=len(ens), strategy=point["strategy"])
        if point["strategy"] == "replicated":
            est = run_replicated(plan, ens, budget, seed, obs)
            exact = run_replicated(plan, ens, None, seed, obs).value
        else:
            est = run_sharded(plan, ens, budget, seed, obs)
            exact = run_sharded(plan, ens, None, seed, obs).value
    row.update(
        shots_nominal=budget[0] if budget else 0,
        shots_aux=budget[1] if budget and len(budget) > 1 else 0,
        estimate=repr(float(est.value)),
        std_error=repr(float(est.std_error)),
        exact_value=repr(float(exact)),
    )
    return row


def sweep_tasks(spec: dict) -> list[tuple]:
    if spec.get("schema_version", 1) != 1:
        raise InputError(f"schema_version: unsupported version {spec.get('schema_version')!r}")
    circuits = _sweep_circuits(spec)
    points = _sweep_noise_points(spec)
    methods = _require(spec, "methods", "")
    if not methods:
        raise InputError("methods: must be non-empty")
    for m in methods:
        parse_method(m)
    shots = None if spec.get("exact", False) else _require(spec, "shots", "")
    if shots is not None:
        if shots.get("allocation", "self_consistent") not in SHOT_MODES:
            raise InputError(f"shots.allocation: must be one of {SHOT_MODES}")
        if int(_require(shots, "nominal", "shots.")) < 1:
            raise InputError("shots.nominal: must be >= 1")
    seed = int(spec.get("seed", 0))
    obs = spec.get("observable", "bit_value")
    return [(m, c, p, shots, seed, obs) for p in points for c in circuits for m in methods]


def run_sweep(spec: dict, workers: Optional[int] = 1) -> str:
    """CSV text for ``spec``; identical for any worker count."""
    tasks = sweep_tasks(spec)
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"spec: cannot read {args.spec}: {exc}") from None
    if not isinstance(spec, dict):
        raise InputError("spec: top level must be a JSON object")
    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    text = run_sweep(spec, workers)
    emit(text, args.output)
    if args.output:
        meta = {
            "spec": spec,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "version": __version__,
            "workers": workers,
        }
        Path(args.output + ".json").write_text(json.dumps(meta, indent=2) + "\n")
    return 0


# -- devices ---------------------------------------------------------------


def cmd_devices(args) -> int:
    if args.action == "list":
        try:
            records = load_device_records(args.data)
        except OSError as exc:
            raise InputError(f"data: cannot read dataset: {exc}") from None
        active = [p for p in records if not p.retired]
        if not active:
            raise InputError("data: dataset has no active devices")
        lines = [f"{'name':<20} {'cx_error':>10} {'cx_length_ns':>12}"]
        for p in records:
            if p.retired:
                lines.append(f"{p.name:<20} {'retired':>10} {'-':>12}")
            else:
                lines.append(f"{p.name:<20} {p.mean_cx_error:>10.4g} {p.mean_cx_length_ns:>12.4g}")
        emit("\n".join(lines) + "\n", args.output)
        return 0
    if not args.table:
        raise InputError("table: convert needs a table file")
    try:
        text = Path(args.table).read_text()
    except OSError as exc:
        raise InputError(f"table: cannot read {args.table}: {exc}") from None
    emit(json.dumps(convert_tables(text), indent=1) + "\n", args.output)
    return 0


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zne-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="build a mitigation plan and print it as JSON")
    _add_circuit_args(p)
    _add_method_args(p)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="simulate one plan and report estimates")
    _add_circuit_args(p)
    _add_method_args(p)
    p.add_argument("--epsilon", type=float, help="uniform CNOT depolarizing strength")
    p.add_argument("--device", help="take CNOT errors from this device profile")
    p.add_argument("--device-damping", action="store_true", help="use the device T1 and CX length for damping")
    p.add_argument("--data", help="device dataset (default: bundled or $ZNE_LAB_DATA)")
    p.add_argument("--t1-us", type=float)
    p.add_argument("--cnot-ns", type=float)
    p.add_argument("--shots", type=int, default=8192, help="nominal shots before allocation scaling")
    p.add_argument("--aux-shots", type=int, help="per-auxiliary shots before scaling (default: --shots)")
    p.add_argument("--allocation", choices=SHOT_MODES, default="self_consistent")
    p.add_argument("--observable", default="bit_value", help="bit_value, ideal or target:BITS")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="infinite-shot expectations")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a JSON sweep spec and write CSV")
    p.add_argument("spec")
    p.add_argument("--output", "-o")
    p.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("devices", help="list or convert device calibration data")
    p.add_argument("action", choices=["list", "convert"])
    p.add_argument("table", nargs="?", help="bracketed-notation table file for convert")
    p.add_argument("--data", help="device dataset (default: bundled or $ZNE_LAB_DATA)")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_devices)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except IntegrityError as exc:
        print(f"zne-lab: integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (InputError, CircuitError, PlanError, DeviceDataError, ValueError, KeyError) as exc:
        print(f"zne-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
