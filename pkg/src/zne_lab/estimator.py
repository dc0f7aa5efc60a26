"""Shot sampling, per-circuit estimates and variance-propagating combination."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .circuit import Circuit, index_to_bitstring
from .insertion import MitigationPlan
from .noise import NoiseModel, Observable, exact_expectation, exact_probabilities

STANDARD_SHOTS = 8192


def stream_seed(seed: int, *key: int) -> int:
    """64-bit seed for the random stream identified by ``(seed, *key)``.

    Streams depend only on their key, never on evaluation order.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in key)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ShotResult:
    counts: Mapping[str, int]
    shots: int
    seed: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    def to_dict(self) -> dict:
        return {"shots": self.shots, "seed": self.seed, "counts": dict(self.counts)}


@dataclass(frozen=True)
class Estimate:
    value: float
    variance: float
    shots_used: int = 0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance)

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "shots_used": self.shots_used}


@dataclass(frozen=True)
class ShotBudget:
    nominal: int
    per_auxiliary: int

    def __post_init__(self):
        if self.nominal < 1 or self.per_auxiliary < 1:
            raise ValueError("shot budgets must be >= 1")


def sample_counts(p: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial counts drawn by inverse-CDF lookup of uniform variates.

    Two calls sharing ``rng`` state and nearby ``p`` yield nearly identical
    counts, which keeps paired comparisons low-noise.
    """
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    outcomes = np.searchsorted(cdf, rng.random(shots), side="right")
    return np.bincount(outcomes, minlength=len(p))


def sample(c: Circuit, nm: NoiseModel, shots: int, seed: int) -> ShotResult:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = exact_probabilities(c, nm)
    counts = sample_counts(p, shots, np.random.default_rng(seed))
    n = c.n_qubits
    return ShotResult(
        {index_to_bitstring(i, n): int(k) for i, k in enumerate(counts) if k}, shots, seed
    )


def _moments(values: np.ndarray, counts: np.ndarray, shots: int) -> tuple[float, float]:
    mean = float(counts @ values) / shots
    if shots < 2:
        return mean, math.inf
    ss = float(counts @ (values - mean) ** 2)
    return mean, ss / (shots - 1) / shots


def estimate_observable(sr: ShotResult, obs: Observable) -> Estimate:
    """Sample mean of ``obs`` and its variance (unbiased sample variance / shots)."""
    if sr.shots < 1 or not sr.counts:
        raise ValueError("cannot estimate from zero shots")
    bits = list(sr.counts)
    values = np.array([obs.value_of(b) for b in bits])
    counts = np.array([sr.counts[b] for b in bits], dtype=float)
    mean, var = _moments(values, counts, sr.shots)
    return Estimate(mean, var, sr.shots)


def combine(plan: MitigationPlan, estimates: Sequence[Estimate]) -> Estimate:
    if len(estimates) != len(plan.entries):
        raise ValueError(f"{len(estimates)} estimates for a {len(plan.entries)}-entry plan")
    value = variance = 0.0
    shots = 0
    for entry, est in zip(plan.entries, estimates):
        w = float(entry.coefficient)
        value += w * est.value
        variance += w * w * est.variance
        shots += est.shots_used
    return Estimate(value, variance, shots)


SHOT_MODES = ("self_consistent", "paper_table")


def shot_scale_factors(n_sets: int, mode: str = "self_consistent") -> tuple[Fraction, int]:
    """Multipliers (nominal, per-auxiliary) relative to a first-order FIIM budget.

    ``self_consistent`` matches the FIIM combined variance given a nominal
    weight of ``(2 + n_s)/2``. ``paper_table`` uses ``(1 + 2 n_s)**2 / 9``
    for the nominal circuit instead.
    """
    if n_sets < 1:
        raise ValueError(f"number of sets must be >= 1, got {n_sets}")
    if mode == "self_consistent":
        nominal = Fraction(2 + n_sets, 3) ** 2
    elif mode == "paper_table":
        nominal = Fraction((1 + 2 * n_sets) ** 2, 9)
    else:
        raise ValueError(f"unknown allocation mode {mode!r}")
    return nominal, n_sets


def allocate_shots(
    plan: MitigationPlan, base: ShotBudget, mode: str = "self_consistent"
) -> list[int]:
    """Per-entry shots for ``plan``; entry 0 is the nominal circuit."""
    nominal, aux = shot_scale_factors(plan.n_sets, mode)
    n_nominal = math.ceil(base.nominal * nominal)
    n_aux = base.per_auxiliary * aux
    return [n_nominal] + [n_aux] * (len(plan.entries) - 1)


def _entry_estimate(c: Circuit, nm: NoiseModel, shots: int, seed: int, obs: Observable) -> Estimate:
    p = exact_probabilities(c, nm)
    counts = sample_counts(p, shots, np.random.default_rng(seed)).astype(float)
    mean, var = _moments(obs.values(c.n_qubits), counts, shots)
    return Estimate(mean, var, shots)


def run_entries(
    plan: MitigationPlan,
    noise_models: Sequence[NoiseModel],
    budget: Optional[Sequence[int]],
    seed: int,
    obs: Observable,
    device_key: int = 0,
) -> Estimate:
    """Run entry ``p`` under ``noise_models[p]`` and combine.

    Entry ``p`` draws from stream ``(seed, device_key, p)``. ``budget=None``
    evaluates exact infinite-shot expectations (zero variance).
    """
    if budget is None:
        ests = [
            Estimate(exact_expectation(e.circuit, nm, obs), 0.0, 0)
            for e, nm in zip(plan.entries, noise_models)
        ]
    else:
        if len(budget) != len(plan.entries):
            raise ValueError(f"budget has {len(budget)} entries, plan has {len(plan.entries)}")
        ests = [
            _entry_estimate(e.circuit, nm, int(shots), stream_seed(seed, device_key, p), obs)
            for p, (e, nm, shots) in enumerate(zip(plan.entries, noise_models, budget))
        ]
    return combine(plan, ests)


def run_plan(
    plan: MitigationPlan,
    nm: NoiseModel,
    budget: Optional[Sequence[int]],
    seed: int,
    obs: Observable,
    device_key: int = 0,
) -> Estimate:
    """Sample every plan entry, estimate ``obs`` and combine.

    Deterministic for fixed arguments. ``budget=None`` is exact mode.
    """
    return run_entries(plan, [nm] * len(plan.entries), budget, seed, obs, device_key)


def exact_plan_value(plan: MitigationPlan, nm: NoiseModel, obs: Observable) -> float:
    return run_plan(plan, nm, None, 0, obs).value
