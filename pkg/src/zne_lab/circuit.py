"""Gate-level circuit representation shared by every transform.

Bitstrings are written in qubit order (character ``i`` is qubit ``i``), and
when read as an integer qubit 0 is the least-significant bit. So ``"10"``
prepares qubit 0 in ``|1>`` and denotes basis index 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class CircuitError(ValueError):
    """Raised when a circuit or gate violates its construction invariants."""


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    @property
    def qubits(self) -> tuple[int, int]:
        return (self.control, self.target)


@dataclass(frozen=True)
class OneQubitUnitary:
    """Arbitrary single-qubit unitary.

    The matrix is stored as a nested tuple so that gates (and hence circuits)
    are hashable; use :attr:`array` for a numpy view.
    """

    qubit: int
    matrix: tuple[tuple[complex, complex], tuple[complex, complex]]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise CircuitError(f"one-qubit matrix must be 2x2, got {m.shape}")
        if not np.allclose(m @ m.conj().T, np.eye(2), rtol=0, atol=1e-12):
            raise CircuitError("one-qubit matrix is not unitary")
        object.__setattr__(
            self, "matrix", tuple(tuple(complex(x) for x in row) for row in m)
        )

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex)

    @property
    def qubits(self) -> tuple[int]:
        return (self.qubit,)


Gate = Union[CNOT, OneQubitUnitary]


def bitstring_to_index(bits: str) -> int:
    """Basis index of ``bits`` with qubit 0 as least-significant bit."""
    return sum(1 << i for i, b in enumerate(bits) if b == "1")


def index_to_bitstring(index: int, n_qubits: int) -> str:
    return "".join("1" if (index >> i) & 1 else "0" for i in range(n_qubits))


def _check_bitstring(bits: str, n_qubits: int) -> None:
    if len(bits) != n_qubits:
        raise CircuitError(
            f"initial_state has length {len(bits)}, expected {n_qubits}"
        )
    if set(bits) - {"0", "1"}:
        raise CircuitError(f"initial_state {bits!r} is not a bitstring")


def _check_gate(gate: Gate, n_qubits: int) -> None:
    if not isinstance(gate, (CNOT, OneQubitUnitary)):
        raise CircuitError(f"unsupported gate {gate!r}")
    for q in gate.qubits:
        if not isinstance(q, (int, np.integer)) or q < 0 or q >= n_qubits:
            raise CircuitError(
                f"gate {gate!r} references qubit {q} outside 0..{n_qubits - 1}"
            )
    if isinstance(gate, CNOT) and gate.control == gate.target:
        raise CircuitError(f"CNOT control equals target ({gate.control})")


@dataclass(frozen=True)
class Circuit:
    """Immutable circuit: ``n_qubits`` wires prepared in ``initial_state``.

    Every circuit ends in an implicit measurement of all qubits in the
    computational basis.
    """

    n_qubits: int
    initial_state: str
    gates: tuple[Gate, ...] = field(default=())

    def __post_init__(self):
        if not isinstance(self.n_qubits, (int, np.integer)) or self.n_qubits < 1:
            raise CircuitError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        _check_bitstring(self.initial_state, self.n_qubits)
        gates = tuple(self.gates)
        for i, g in enumerate(gates):
            try:
                _check_gate(g, self.n_qubits)
            except CircuitError as exc:
                raise CircuitError(f"gates[{i}]: {exc}") from None
        object.__setattr__(self, "gates", gates)

    def __len__(self) -> int:
        return len(self.gates)

    def append(self, gate: Gate) -> "Circuit":
        return append_gate(self, gate)

    @property
    def n_cnots(self) -> int:
        return sum(isinstance(g, CNOT) for g in self.gates)

    def to_dict(self) -> dict:
        gates = []
        for g in self.gates:
            if isinstance(g, CNOT):
                gates.append({"type": "cnot", "control": int(g.control), "target": int(g.target)})
            else:
                gates.append(
                    {
                        "type": "u1q",
                        "qubit": int(g.qubit),
                        "matrix": [[[z.real, z.imag] for z in row] for row in g.matrix],
                    }
                )
        return {
            "n_qubits": int(self.n_qubits),
            "initial_state": self.initial_state,
            "gates": gates,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            n_qubits = data["n_qubits"]
            initial_state = data["initial_state"]
            raw_gates = data.get("gates", [])
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"circuit record missing field {exc}") from None
        gates: list[Gate] = []
        for i, raw in enumerate(raw_gates):
            kind = raw.get("type")
            try:
                if kind == "cnot":
                    gates.append(CNOT(int(raw["control"]), int(raw["target"])))
                elif kind == "u1q":
                    m = tuple(
                        tuple(complex(re, im) for re, im in row) for row in raw["matrix"]
                    )
                    gates.append(OneQubitUnitary(int(raw["qubit"]), m))
                else:
                    raise CircuitError(f"gates[{i}].type: unknown gate type {kind!r}")
            except KeyError as exc:
                raise CircuitError(f"gates[{i}]: missing field {exc}") from None
            except (TypeError, ValueError) as exc:
                if str(exc).startswith("gates["):
                    raise
                raise CircuitError(f"gates[{i}]: {exc}") from None
        return cls(n_qubits, initial_state, tuple(gates))

    def dumps(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def new_circuit(n_qubits: int, initial_state: str) -> Circuit:
    return Circuit(n_qubits, initial_state, ())


def append_gate(c: Circuit, g: Gate) -> Circuit:
    _check_gate(g, c.n_qubits)
    return Circuit(c.n_qubits, c.initial_state, c.gates + (g,))


def cnot_positions(c: Circuit) -> list[int]:
    """Indices into ``c.gates`` of every CNOT, in execution order."""
    return [i for i, g in enumerate(c.gates) if isinstance(g, CNOT)]


def generate_pair_chain(
    n_cnots: int, pairs: Sequence[tuple[int, int]], initial_state: str
) -> Circuit:
    """Chain of ``n_cnots`` CNOTs cycling through ``pairs`` of (control, target)."""
    if n_cnots < 1:
        raise CircuitError("n_cnots must be positive")
    gates = tuple(CNOT(*pairs[i % len(pairs)]) for i in range(n_cnots))
    return Circuit(len(initial_state), initial_state, gates)


def generate_cnot_chain(n_cnots: int, initial_state: str = "00") -> Circuit:
    """Two-qubit chain alternating CNOT(0,1), CNOT(1,0), CNOT(0,1), ...

    ``generate_cnot_chain(4, "10")`` is the four-CNOT benchmark whose
    noiseless output is ``"11"`` (integer value 3).
    """
    if len(initial_state) != 2:
        raise CircuitError(f"initial_state: the CNOT chain acts on exactly two qubits, got {initial_state!r}")
    return generate_pair_chain(n_cnots, [(0, 1), (1, 0)], initial_state)


def generate_alternating_pair_chain(n_cnots: int, initial_state: str = "111") -> Circuit:
    """Three-qubit chain alternating CNOT(0,1) and CNOT(1,2)."""
    if len(initial_state) != 3:
        raise CircuitError(f"initial_state: the alternating-pair chain acts on exactly three qubits, got {initial_state!r}")
    return generate_pair_chain(n_cnots, [(0, 1), (1, 2)], initial_state)


def cnot_pairs(c: Circuit) -> list[tuple[int, int]]:
    return [g.qubits for g in c.gates if isinstance(g, CNOT)]
