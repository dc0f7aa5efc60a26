"""Exact density-matrix simulation with CNOT depolarizing noise and T1 decay.

Density matrices are plain ``(2**n, 2**n)`` complex numpy arrays whose basis
index reads qubit 0 as the least-significant bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .circuit import (
    CNOT,
    Circuit,
    Gate,
    OneQubitUnitary,
    bitstring_to_index,
    cnot_positions,
)

MAX_QUBITS = 10

TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-10
PROBABILITY_SUM_TOL = 1e-8


class IntegrityError(ArithmeticError):
    """A density matrix or distribution left its physical domain."""


Pair = tuple[int, int]


def _pair_key(pair: Sequence[int]) -> Pair:
    j, k = (int(q) for q in pair)
    return (j, k) if j < k else (k, j)


@dataclass(frozen=True)
class NoiseModel:
    """Depolarizing strength per unordered qubit pair plus optional T1 decay.

    ``t1_us`` is either one value for every qubit or a per-qubit sequence.
    Amplitude damping is active only when both ``t1_us`` and
    ``cnot_duration_ns`` are given.
    """

    depolarizing: Mapping[Pair, float] = field(default_factory=dict)
    default_epsilon: float = 0.0
    t1_us: Optional[Union[float, Sequence[float]]] = None
    cnot_duration_ns: Optional[float] = None

    def __post_init__(self):
        items = {}
        for pair, eps in dict(self.depolarizing).items():
            key = _pair_key(pair)
            if key[0] == key[1]:
                raise ValueError(f"depolarizing pair {pair} repeats a qubit")
            eps = float(eps)
            if not 0.0 <= eps <= 1.0:
                raise ValueError(f"epsilon for pair {pair} is {eps}, outside [0, 1]")
            if key in items and items[key] != eps:
                raise ValueError(f"asymmetric epsilon for pair {key}")
            items[key] = eps
        object.__setattr__(self, "depolarizing", tuple(sorted(items.items())))
        if not 0.0 <= self.default_epsilon <= 1.0:
            raise ValueError(f"default_epsilon {self.default_epsilon} outside [0, 1]")
        if self.t1_us is not None:
            t1 = self.t1_us
            if isinstance(t1, (int, float, np.floating)):
                t1 = float(t1)
                if t1 <= 0:
                    raise ValueError("T1 must be positive")
            else:
                t1 = tuple(float(x) for x in t1)
                if any(x <= 0 for x in t1):
                    raise ValueError("T1 must be positive")
            object.__setattr__(self, "t1_us", t1)
        if self.cnot_duration_ns is not None and self.cnot_duration_ns < 0:
            raise ValueError("CNOT duration must be non-negative")

    @classmethod
    def uniform(cls, epsilon: float, **kwargs) -> "NoiseModel":
        return cls({}, default_epsilon=epsilon, **kwargs)

    def epsilon(self, pair: Sequence[int]) -> float:
        key = _pair_key(pair)
        for p, eps in self.depolarizing:
            if p == key:
                return eps
        return self.default_epsilon

    @property
    def has_damping(self) -> bool:
        return self.t1_us is not None and self.cnot_duration_ns is not None

    def gamma(self, qubit: int) -> float:
        """Per-CNOT damping constant ``1 - exp(-T_cnot / T1)`` for ``qubit``."""
        if not self.has_damping:
            return 0.0
        t1 = self.t1_us if isinstance(self.t1_us, float) else self.t1_us[qubit]
        return damping_gamma(t1, self.cnot_duration_ns)


def damping_gamma(t1_us: float, duration_ns: float) -> float:
    return -math.expm1(-duration_ns * 1e-3 / t1_us)


@dataclass(frozen=True)
class BitValue:
    """Expectation of the measured bitstring read as an integer."""

    def values(self, n_qubits: int) -> np.ndarray:
        return np.arange(2**n_qubits, dtype=float)

    def value_of(self, bits: str) -> float:
        return float(bitstring_to_index(bits))


@dataclass(frozen=True)
class TargetProbability:
    """Probability of measuring exactly ``bitstring``."""

    bitstring: str

    def values(self, n_qubits: int) -> np.ndarray:
        if len(self.bitstring) != n_qubits:
            raise ValueError(
                f"target bitstring {self.bitstring!r} does not match {n_qubits} qubits"
            )
        v = np.zeros(2**n_qubits)
        v[bitstring_to_index(self.bitstring)] = 1.0
        return v

    def value_of(self, bits: str) -> float:
        return 1.0 if bits == self.bitstring else 0.0


Observable = Union[BitValue, TargetProbability]


def _n_qubits_of(rho: np.ndarray) -> int:
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.ndim != 2 or rho.shape != (dim, dim) or 1 << n != dim:
        raise ValueError(f"density matrix has invalid shape {rho.shape}")
    return n


def basis_density_matrix(bits: str) -> np.ndarray:
    n = len(bits)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    i = bitstring_to_index(bits)
    rho[i, i] = 1.0
    return rho


def check_density_matrix(rho: np.ndarray, check_psd: bool = False) -> None:
    """Raise :class:`IntegrityError` unless ``rho`` is a valid state."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise IntegrityError(f"trace is {tr}, expected 1")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise IntegrityError(f"density matrix not Hermitian (deviation {herm:.3g})")
    if check_psd:
        lam = np.linalg.eigvalsh(rho).min()
        if lam < -PSD_TOL:
            raise IntegrityError(f"density matrix has negative eigenvalue {lam:.3g}")


@lru_cache(maxsize=None)
def _cnot_permutation(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


def _apply_1q_kraus(rho: np.ndarray, ops: Sequence[np.ndarray], q: int, n: int) -> np.ndarray:
    hi, lo = 2 ** (n - 1 - q), 2**q
    t = rho.reshape(hi, 2, lo, hi, 2, lo)
    out = sum(np.einsum("ab,ibjkcl,dc->iajkdl", K, t, K.conj()) for K in ops)
    return out.reshape(rho.shape)


def _replace_with_mixed(rho: np.ndarray, q: int, n: int) -> np.ndarray:
    """``Tr_q(rho) (x) I/2`` on qubit ``q``."""
    hi, lo = 2 ** (n - 1 - q), 2**q
    t = rho.reshape(hi, 2, lo, hi, 2, lo)
    reduced = np.einsum("ibjkbl->ijkl", t)
    out = 0.5 * reduced[:, None, :, :, None, :] * np.eye(2)[None, :, None, None, :, None]
    return out.reshape(rho.shape)


def apply_gate_ideal(rho: np.ndarray, g: Gate) -> np.ndarray:
    n = _n_qubits_of(rho)
    for q in g.qubits:
        if q >= n:
            raise ValueError(f"gate {g!r} acts outside a {n}-qubit register")
    if isinstance(g, CNOT):
        perm = _cnot_permutation(n, g.control, g.target)
        return rho[perm][:, perm]
    return _apply_1q_kraus(rho, [g.array], g.qubit, n)


def apply_depolarizing_2q(rho: np.ndarray, pair: Sequence[int], epsilon: float) -> np.ndarray:
    """``(1 - eps) rho + eps Tr_kl(rho) (x) I_kl / 4``."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1]")
    n = _n_qubits_of(rho)
    k, l = pair
    if k == l or not (0 <= k < n and 0 <= l < n):
        raise ValueError(f"invalid qubit pair {pair} for {n} qubits")
    if epsilon == 0.0:
        return rho.copy()
    mixed = _replace_with_mixed(_replace_with_mixed(rho, k, n), l, n)
    return (1.0 - epsilon) * rho + epsilon * mixed


def apply_amplitude_damping(rho: np.ndarray, q: int, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma {gamma} outside [0, 1]")
    n = _n_qubits_of(rho)
    if not 0 <= q < n:
        raise ValueError(f"qubit {q} outside a {n}-qubit register")
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]])
    k1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]])
    return _apply_1q_kraus(rho, [k0, k1], q, n)


def simulate(
    c: Circuit, nm: NoiseModel, validate: bool = True, check_psd: bool = False
) -> np.ndarray:
    """Evolve ``c.initial_state`` through ``c`` under ``nm``.

    Each CNOT is followed by depolarizing noise on its pair and then, when
    damping is configured, amplitude damping on every qubit for the gate
    duration. One-qubit gates are ideal and instantaneous.
    """
    if c.n_qubits > MAX_QUBITS:
        raise ValueError(f"{c.n_qubits} qubits exceeds the dense-simulation cap of {MAX_QUBITS}")
    n = c.n_qubits
    gammas = [nm.gamma(q) for q in range(n)] if nm.has_damping else []
    rho = basis_density_matrix(c.initial_state)
    for g in c.gates:
        rho = apply_gate_ideal(rho, g)
        if isinstance(g, CNOT):
            eps = nm.epsilon(g.qubits)
            if eps:
                rho = apply_depolarizing_2q(rho, g.qubits, eps)
            for q, gamma in enumerate(gammas):
                if gamma:
                    rho = apply_amplitude_damping(rho, q, gamma)
    if validate:
        check_density_matrix(rho, check_psd=check_psd)
    return rho


def probabilities(rho: np.ndarray) -> np.ndarray:
    p = np.real(np.diag(rho)).copy()
    if abs(p.sum() - 1.0) > PROBABILITY_SUM_TOL:
        raise IntegrityError(f"diagonal sums to {p.sum()}, expected 1")
    if p.min() < -TRACE_TOL or p.max() > 1.0 + TRACE_TOL:
        raise IntegrityError("diagonal entry outside [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def expectation(rho: np.ndarray, obs: Observable) -> float:
    n = _n_qubits_of(rho)
    return float(np.real(np.diag(rho)) @ obs.values(n))


@lru_cache(maxsize=65536)
def _cached_probabilities(c: Circuit, nm: NoiseModel) -> np.ndarray:
    p = probabilities(simulate(c, nm))
    p.setflags(write=False)
    return p


def exact_probabilities(c: Circuit, nm: NoiseModel) -> np.ndarray:
    """Memoized :func:`probabilities` of :func:`simulate`; read-only result."""
    return _cached_probabilities(c, nm)


def exact_expectation(c: Circuit, nm: NoiseModel, obs: Observable) -> float:
    return float(exact_probabilities(c, nm) @ obs.values(c.n_qubits))


NOISELESS = NoiseModel()


def leading_order_expectation(
    c: Circuit, nm: NoiseModel, r: Sequence[int], obs: Observable
) -> float:
    """First-order-in-epsilon prediction for ``c`` with CNOT ``i`` repeated ``r[i]`` times.

    ``(1 - sum eps_i r_i) E_ex + sum eps_i r_i E_i``, where ``E_i`` comes from
    the noiseless circuit with CNOT ``i``'s pair swapped for ``I/4``.
    Damping does not enter.
    """
    positions = cnot_positions(c)
    if len(r) != len(positions):
        raise ValueError(f"replication vector has {len(r)} entries, circuit has {len(positions)} CNOTs")
    for x in r:
        if x < 1 or x % 2 == 0:
            raise ValueError(f"replication entries must be odd and positive, got {x}")
    n = c.n_qubits
    values = obs.values(n)

    def run(mix_at: Optional[int]) -> float:
        rho = basis_density_matrix(c.initial_state)
        for i, g in enumerate(c.gates):
            rho = apply_gate_ideal(rho, g)
            if i == mix_at:
                rho = apply_depolarizing_2q(rho, g.qubits, 1.0)
        return float(np.real(np.diag(rho)) @ values)

    exact = run(None)
    total = exact
    for pos, reps in zip(positions, r):
        weight = nm.epsilon(c.gates[pos].qubits) * reps
        if weight:
            total += weight * (run(pos) - exact)
    return total
