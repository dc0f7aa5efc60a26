"""Parallel mitigation across ensembles of devices with different error rates.

Two strategies are supported. *Replicated* runs the whole plan on every
device and averages the per-device mitigated values. *Sharded* runs each
plan entry on one device and combines once.
"""
from __future__ import annotations

import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .insertion import MitigationPlan
from .estimator import Estimate, run_entries, run_plan, stream_seed
from .noise import NoiseModel, Observable, _pair_key

DATA_ENV = "ZNE_LAB_DATA"


class DeviceDataError(ValueError):
    """Raised when a device file or table does not match the expected schema."""


@dataclass(frozen=True)
class DeviceProfile:
    """One device's calibration snapshot.

    Per-qubit sequences are indexed by qubit. Readout and T2 fields are kept
    for completeness; simulations never use them.
    """

    name: str
    cx_errors: Mapping[tuple[int, int], float] = field(default_factory=dict)
    cx_length_ns: Mapping[tuple[int, int], float] = field(default_factory=dict)
    x_errors: tuple[float, ...] = ()
    x_length_ns: Optional[float] = None
    t1_us: tuple[float, ...] = ()
    t2_us: tuple[float, ...] = ()
    frequency_ghz: tuple[float, ...] = ()
    readout_p0_given_1: tuple[float, ...] = ()
    readout_p1_given_0: tuple[float, ...] = ()
    retired: bool = False

    def __post_init__(self):
        for attr in ("cx_errors", "cx_length_ns"):
            merged = {}
            for pair, v in dict(getattr(self, attr)).items():
                key = _pair_key(pair)
                if key in merged and merged[key] != v:
                    raise DeviceDataError(f"{self.name}: {attr} not symmetric for pair {key}")
                merged[key] = float(v)
            object.__setattr__(self, attr, merged)
        probs = list(self.cx_errors.values()) + list(self.x_errors)
        probs += list(self.readout_p0_given_1) + list(self.readout_p1_given_0)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise DeviceDataError(f"{self.name}: probability outside [0, 1]")
        positive = list(self.cx_length_ns.values()) + list(self.t1_us) + list(self.t2_us)
        if self.x_length_ns is not None:
            positive.append(self.x_length_ns)
        if any(v <= 0 for v in positive):
            raise DeviceDataError(f"{self.name}: times and lengths must be positive")

    @property
    def mean_cx_error(self) -> float:
        return float(np.mean(list(self.cx_errors.values()))) if self.cx_errors else math.nan

    @property
    def mean_cx_length_ns(self) -> float:
        return float(np.mean(list(self.cx_length_ns.values()))) if self.cx_length_ns else math.nan

    def to_dict(self) -> dict:
        if self.retired:
            return {"name": self.name, "retired": True}
        n = len(self.t1_us)
        qubits = [
            {
                "t1_us": self.t1_us[q],
                "t2_us": self.t2_us[q],
                "frequency_ghz": self.frequency_ghz[q],
                "p0_given_1": self.readout_p0_given_1[q],
                "p1_given_0": self.readout_p1_given_0[q],
            }
            for q in range(n)
        ]
        return {
            "name": self.name,
            "qubits": qubits,
            "x_error": list(self.x_errors),
            "x_length_ns": self.x_length_ns,
            "cx": [
                {"pair": list(p), "error": e, "length_ns": self.cx_length_ns.get(p)}
                for p, e in self.cx_errors.items()
            ],
        }


class DeviceEnsemble(tuple):
    """Non-empty ordered collection of uniquely named device profiles."""

    def __new__(cls, profiles: Sequence[DeviceProfile]):
        profiles = tuple(profiles)
        if not profiles:
            raise DeviceDataError("device ensemble is empty")
        names = [p.name for p in profiles]
        if len(set(names)) != len(names):
            raise DeviceDataError("device names must be unique")
        return super().__new__(cls, profiles)

    @property
    def names(self) -> list[str]:
        return [p.name for p in self]

    def __getitem__(self, item):
        if isinstance(item, str):
            for p in self:
                if p.name == item:
                    return p
            raise KeyError(item)
        return super().__getitem__(item)


@dataclass(frozen=True)
class JobLimits:
    max_shots_per_circuit: int = 8192
    max_circuits_per_job: int = 900

    def __post_init__(self):
        if self.max_shots_per_circuit < 1 or self.max_circuits_per_job < 1:
            raise ValueError("job limits must be >= 1")


# -- synthetic ensembles ---------------------------------------------------


def sample_normal_profiles(
    n: int,
    mu: float,
    sigma: float,
    seed: int,
    pair: tuple[int, int] = (0, 1),
    antithetic: bool = False,
) -> DeviceEnsemble:
    """``n`` single-pair devices with CNOT error drawn from ``N(mu, sigma**2)``.

    Draws outside ``(0, 1]`` are redrawn. With ``antithetic=True`` the
    standard-normal deviates come in ``(z, -z)`` pairs (both redrawn together)
    so the sample mean of the rates is exactly ``mu`` for even ``n``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.default_rng(seed)

    def ok(e):
        return 0.0 < e <= 1.0

    rates: list[float] = []
    while len(rates) < n:
        z = rng.standard_normal()
        if antithetic:
            a, b = mu + sigma * z, mu - sigma * z
            if ok(a) and ok(b):
                rates.extend([a, b])
        elif ok(mu + sigma * z):
            rates.append(mu + sigma * z)
    width = len(str(n - 1))
    return DeviceEnsemble(
        DeviceProfile(f"normal-{i:0{width}d}", {pair: e}) for i, e in enumerate(rates[:n])
    )


def single_rate_ensemble(n: int, epsilon: float, pair: tuple[int, int] = (0, 1)) -> DeviceEnsemble:
    width = len(str(n - 1))
    return DeviceEnsemble(DeviceProfile(f"uniform-{i:0{width}d}", {pair: epsilon}) for i in range(n))


# -- calibration data ------------------------------------------------------

_BRACKET = re.compile(r"\[\s*([+-]?\d+)\s*\]")


def parse_bracketed(text: str) -> float:
    """``"1.437[-2]"`` -> ``0.01437``; plain numbers pass through."""
    s = _BRACKET.sub(r"e\1", text.strip())
    try:
        return float(s)
    except ValueError:
        raise DeviceDataError(f"cannot parse number {text!r}") from None


def _clean_name(cell: str) -> str:
    cell = cell.strip()
    m = re.fullmatch(r"\\texttt\{(.*)\}", cell)
    if m:
        cell = m.group(1)
    return cell.replace("\\_", "_")


def convert_tables(text: str) -> dict:
    """Turn the bracketed-notation calibration tables into the device JSON schema.

    Rows are ``&``-separated and may end in ``\\\\``. Six cells is a qubit row
    (name, T1, T2, frequency, P(0|1), P(1|0), each "Q0, Q1"), five cells a
    gate row (name, X errors, X length, CX(0,1) error, CX length), and
    ``retired & name`` marks a retired system. ``%`` starts a comment.
    """
    qubit_rows: dict[str, list] = {}
    gate_rows: dict[str, list] = {}
    order: list[str] = []
    retired: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        line = line.rstrip("\\").strip()
        cells = [c.strip() for c in line.split("&")]
        if cells[0] == "retired" and len(cells) == 2:
            retired.append(_clean_name(cells[1]))
            continue
        name = _clean_name(cells[0])
        try:
            values = [[parse_bracketed(v) for v in c.split(",")] for c in cells[1:]]
        except DeviceDataError as exc:
            raise DeviceDataError(f"line {lineno} ({name}): {exc}") from None
        if len(cells) == 6:
            qubit_rows[name] = values
        elif len(cells) == 5:
            gate_rows[name] = values
        else:
            raise DeviceDataError(f"line {lineno} ({name}): expected 5 or 6 cells, got {len(cells)}")
        if name not in order:
            order.append(name)
    systems = []
    for name in order:
        if name not in qubit_rows or name not in gate_rows:
            raise DeviceDataError(f"{name}: needs both a qubit row and a gate row")
        t1, t2, freq, p01, p10 = qubit_rows[name]
        xerr, xlen, cxerr, cxlen = gate_rows[name]
        qubits = [
            {"t1_us": t1[q], "t2_us": t2[q], "frequency_ghz": freq[q], "p0_given_1": p01[q], "p1_given_0": p10[q]}
            for q in range(len(t1))
        ]
        systems.append(
            {
                "name": name,
                "qubits": qubits,
                "x_error": xerr,
                "x_length_ns": xlen[0],
                "cx": [{"pair": [0, 1], "error": cxerr[0], "length_ns": cxlen[0]}],
            }
        )
    systems.extend({"name": name, "retired": True} for name in retired)
    return {"schema_version": 1, "systems": systems}


def _profile_from_record(i: int, rec: dict) -> DeviceProfile:
    name = rec.get("name")
    if not isinstance(name, str):
        raise DeviceDataError(f"systems[{i}].name: missing or not a string")
    if rec.get("retired", False):
        return DeviceProfile(name, retired=True)

    def need(obj, key, where):
        if key not in obj:
            raise DeviceDataError(f"{name}: missing field {where}{key}")
        return obj[key]

    qubits = need(rec, "qubits", "")
    cols = {k: [] for k in ("t1_us", "t2_us", "frequency_ghz", "p0_given_1", "p1_given_0")}
    for q, qrec in enumerate(qubits):
        for k in cols:
            cols[k].append(float(need(qrec, k, f"qubits[{q}].")))
    cx_err, cx_len = {}, {}
    for j, cx in enumerate(need(rec, "cx", "")):
        pair = tuple(need(cx, "pair", f"cx[{j}]."))
        if len(pair) != 2:
            raise DeviceDataError(f"{name}: cx[{j}].pair must have two qubits")
        cx_err[pair] = float(need(cx, "error", f"cx[{j}]."))
        cx_len[pair] = float(need(cx, "length_ns", f"cx[{j}]."))
    return DeviceProfile(
        name,
        cx_err,
        cx_len,
        tuple(float(x) for x in need(rec, "x_error", "")),
        float(need(rec, "x_length_ns", "")),
        tuple(cols["t1_us"]),
        tuple(cols["t2_us"]),
        tuple(cols["frequency_ghz"]),
        tuple(cols["p0_given_1"]),
        tuple(cols["p1_given_0"]),
    )


def default_data_path() -> Path:
    override = os.environ.get(DATA_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("zne_lab") / "data" / "devices.json"))


def load_device_records(path: Union[str, Path, None] = None) -> list[DeviceProfile]:
    """Every record in the file, retired systems included."""
    path = Path(path) if path is not None else default_data_path()
    text = path.read_text()
    if not text.strip():
        raise DeviceDataError(f"{path}: file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DeviceDataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict) or not isinstance(data.get("systems"), list):
        raise DeviceDataError(f"{path}: top-level 'systems' list missing")
    return [_profile_from_record(i, rec) for i, rec in enumerate(data["systems"])]


def load_device_profiles(path: Union[str, Path, None] = None) -> DeviceEnsemble:
    """Active (non-retired) devices from ``path`` or the bundled dataset."""
    return DeviceEnsemble(p for p in load_device_records(path) if not p.retired)


def noise_model_of(
    profile: DeviceProfile, include_damping: bool = False, default_epsilon: Optional[float] = None
) -> NoiseModel:
    """Depolarizing model from the CX errors; T1 damping only on request."""
    if profile.retired:
        raise DeviceDataError(f"{profile.name} is retired and has no calibration data")
    kwargs = {}
    if include_damping:
        if not profile.t1_us or not profile.cx_length_ns:
            raise DeviceDataError(f"{profile.name}: damping needs T1 and CX lengths")
        kwargs = {"t1_us": profile.t1_us, "cnot_duration_ns": max(profile.cx_length_ns.values())}
    return NoiseModel(
        dict(profile.cx_errors),
        default_epsilon=default_epsilon if default_epsilon is not None else 0.0,
        **kwargs,
    )


def check_coverage(profile: DeviceProfile, plan: MitigationPlan, default_epsilon: Optional[float] = None) -> None:
    if default_epsilon is not None:
        return
    for c in {e.circuit for e in plan.entries}:
        for g in c.gates:
            if len(g.qubits) == 2 and _pair_key(g.qubits) not in profile.cx_errors:
                raise DeviceDataError(f"{profile.name} has no CX error for pair {g.qubits}")


# -- parallel execution ----------------------------------------------------


def _device_run(args):
    plan, nm, budget, seed, obs, key = args
    return run_plan(plan, nm, budget, seed, obs, device_key=key)


def _map(fn, items, workers: Optional[int]):
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def device_estimates(
    plan: MitigationPlan,
    ensemble: Sequence[DeviceProfile],
    budget: Optional[Sequence[int]],
    seed: int,
    obs: Observable,
    include_damping: bool = False,
    workers: Optional[int] = None,
) -> list[Estimate]:
    """Mitigated estimate from each device running the full plan."""
    for prof in ensemble:
        check_coverage(prof, plan)
    jobs = [
        (plan, noise_model_of(prof, include_damping), budget, seed, obs, d)
        for d, prof in enumerate(ensemble)
    ]
    return _map(_device_run, jobs, workers)


def run_replicated(
    plan: MitigationPlan,
    ensemble: Sequence[DeviceProfile],
    budget: Optional[Sequence[int]],
    seed: int,
    obs: Observable,
    include_damping: bool = False,
    workers: Optional[int] = None,
) -> Estimate:
    """Whole plan on every device (stream key = device index), then average.

    ``budget`` is per device; ``None`` selects exact mode.
    """
    ests = device_estimates(plan, ensemble, budget, seed, obs, include_damping, workers)
    n = len(ests)
    value = math.fsum(e.value for e in ests) / n
    variance = math.fsum(e.variance for e in ests) / n / n
    return Estimate(value, variance, sum(e.shots_used for e in ests))


def assign_entries(
    n_entries: int, n_devices: int, strategy: Union[str, Sequence[int], Mapping[int, int]] = "round_robin"
) -> list[int]:
    """Device index for each plan entry."""
    if strategy == "round_robin":
        return [p % n_devices for p in range(n_entries)]
    if isinstance(strategy, str):
        raise ValueError(f"unknown sharding strategy {strategy!r}")
    if isinstance(strategy, Mapping):
        if set(strategy) != set(range(n_entries)):
            raise ValueError("explicit assignment must cover every plan entry exactly once")
        assignment = [strategy[p] for p in range(n_entries)]
    else:
        assignment = list(strategy)
        if len(assignment) != n_entries:
            raise ValueError(f"assignment has {len(assignment)} entries, plan has {n_entries}")
    for d in assignment:
        if not 0 <= d < n_devices:
            raise ValueError(f"device index {d} outside 0..{n_devices - 1}")
    return [int(d) for d in assignment]


def run_sharded(
    plan: MitigationPlan,
    ensemble: Sequence[DeviceProfile],
    budget: Optional[Sequence[int]],
    seed: int,
    obs: Observable,
    strategy: Union[str, Sequence[int], Mapping[int, int]] = "round_robin",
    include_damping: bool = False,
) -> Estimate:
    """Entry ``p`` on device ``assignment[p]``; one combination at the end.

    Entry streams match :func:`run_plan` (key ``(seed, 0, p)``), so an
    ensemble of identical devices reproduces a single-device run.
    """
    assignment = assign_entries(len(plan.entries), len(ensemble), strategy)
    models = [noise_model_of(ensemble[d], include_damping) for d in assignment]
    for d in set(assignment):
        check_coverage(ensemble[d], plan)
    return run_entries(plan, models, budget, seed, obs)


# -- job batching ----------------------------------------------------------


@dataclass(frozen=True)
class Submission:
    circuit: int
    shots: int


def batch_jobs(demands: Sequence[int], limits: JobLimits) -> list[list[Submission]]:
    """Split per-circuit shot demands into jobs that respect ``limits``.

    ``demands[i]`` is the shot count wanted for circuit ``i``. Demands above
    the per-circuit cap become repeated submissions; consecutive submissions
    are packed into jobs of at most ``max_circuits_per_job``.
    """
    cap = limits.max_shots_per_circuit
    subs = []
    for i, shots in enumerate(demands):
        shots = int(shots)
        if shots < 0:
            raise ValueError(f"negative shot demand for circuit {i}")
        while shots > 0:
            take = min(cap, shots)
            subs.append(Submission(i, take))
            shots -= take
    size = limits.max_circuits_per_job
    return [subs[k : k + size] for k in range(0, len(subs), size)]


# -- metrics ---------------------------------------------------------------


def additional_error(ensemble_estimate: Estimate, single_rate_estimate: Estimate) -> float:
    """Excess of the ensemble result over the single-rate result."""
    return abs(ensemble_estimate.value - single_rate_estimate.value)


def ensemble_seed(seed: int, *key: int) -> int:
    """Seed for drawing a synthetic ensemble, independent of shot streams."""
    return stream_seed(seed, 0xE45E, *key)
