"""Identity-insertion mitigation plans with exact rational coefficients.

A plan is a list of folded copies of a base circuit together with weights
whose sum removes the part of the noise that is linear in the CNOT error
rates. Folding replaces CNOT ``i`` by ``r_i`` consecutive copies of itself
(``r_i`` odd), which leaves the noiseless output unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .circuit import Circuit, cnot_pairs, cnot_positions


class PlanError(ValueError):
    """Raised for invalid replication vectors or plan parameters."""


def _check_replication(r: Sequence[int], n_cnots: int) -> tuple[int, ...]:
    r = tuple(int(x) for x in r)
    if len(r) != n_cnots:
        raise PlanError(f"replication vector has {len(r)} entries, circuit has {n_cnots} CNOTs")
    for x in r:
        if x < 1 or x % 2 == 0:
            raise PlanError(f"replication entries must be odd and >= 1, got {x}")
    return r


def fold(c: Circuit, r: Sequence[int]) -> Circuit:
    """Replace the ``i``-th CNOT of ``c`` by ``r[i]`` copies of itself."""
    positions = cnot_positions(c)
    r = _check_replication(r, len(positions))
    reps = dict(zip(positions, r))
    gates = []
    for i, g in enumerate(c.gates):
        gates.extend([g] * reps.get(i, 1))
    return Circuit(c.n_qubits, c.initial_state, tuple(gates))


def deepen(c: Circuit, k: int) -> Circuit:
    """Fold every CNOT ``k`` times (``k`` odd)."""
    if k < 1 or k % 2 == 0:
        raise PlanError(f"deepening factor must be odd and >= 1, got {k}")
    return fold(c, [k] * c.n_cnots)


def richardson_coefficients(r_values: Sequence[int]) -> list[Fraction]:
    """Weights extrapolating samples taken at noise scales ``r_values`` to zero.

    Solves ``sum c_i = 1`` and ``sum c_i r_i**m = 0`` for ``m = 1 .. len-1``
    exactly by Gaussian elimination over the rationals.
    """
    rs = [Fraction(int(r)) for r in r_values]
    if not rs:
        raise PlanError("need at least one noise scale")
    if len(set(rs)) != len(rs):
        raise PlanError(f"duplicate noise scales {list(r_values)} make the system singular")
    n = len(rs)
    # rows m = 0..n-1: sum_i c_i r_i**m = [m == 0]
    a = [[r**m for r in rs] + [Fraction(int(m == 0))] for m in range(n)]
    for col in range(n):
        pivot = next(row for row in range(col, n) if a[row][col] != 0)
        a[col], a[pivot] = a[pivot], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for row in range(n):
            if row != col and a[row][col] != 0:
                f = a[row][col]
                a[row] = [x - f * y for x, y in zip(a[row], a[col])]
    return [a[i][n] for i in range(n)]


@dataclass(frozen=True)
class PlanEntry:
    circuit: Circuit
    coefficient: Fraction
    label: str
    replication: tuple[int, ...]


@dataclass(frozen=True)
class MitigationPlan:
    """Weighted circuits whose combination estimates the zero-noise value.

    ``targets`` lists the CNOT indices (counted among CNOTs only) whose linear
    error the plan cancels. ``n_sets`` is the number of correction groups and
    drives shot allocation: 1 for FIIM and list-FIIM, ``n_c`` for RIIM,
    ``|L|`` for list-RIIM, ``n_s`` for SIIM.
    """

    base: Circuit
    entries: tuple[PlanEntry, ...]
    method: str
    params: dict = field(default_factory=dict, hash=False, compare=False)
    targets: tuple[int, ...] = ()
    n_sets: int = 1

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def coefficients(self) -> list[Fraction]:
        return [e.coefficient for e in self.entries]

    @property
    def circuits(self) -> list[Circuit]:
        return [e.circuit for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "params": dict(self.params),
            "targets": list(self.targets),
            "n_sets": self.n_sets,
            "base": self.base.to_dict(),
            "entries": [
                {
                    "label": e.label,
                    "coefficient": {
                        "num": e.coefficient.numerator,
                        "den": e.coefficient.denominator,
                    },
                    "replication": list(e.replication),
                    "circuit": e.circuit.to_dict(),
                }
                for e in self.entries
            ],
        }


def _entry(c: Circuit, r: Sequence[int], coefficient, label: str) -> PlanEntry:
    r = tuple(r)
    return PlanEntry(fold(c, r), Fraction(coefficient), label, r)


def _require_cnots(c: Circuit) -> int:
    n_c = c.n_cnots
    if n_c == 0:
        raise PlanError("circuit has no CNOT gates to fold")
    return n_c


def _tripled(n_c: int, indices: Iterable[int]) -> list[int]:
    r = [1] * n_c
    for i in indices:
        r[i] = 3
    return r


def fiim_plan(c: Circuit, order: int = 1) -> MitigationPlan:
    """Fixed insertion: every CNOT folded ``r = 1, 3, ..., 2k+1`` times."""
    n_c = _require_cnots(c)
    if order < 1:
        raise PlanError(f"FIIM order must be >= 1, got {order}")
    scales = [2 * j + 1 for j in range(order + 1)]
    coeffs = richardson_coefficients(scales)
    entries = tuple(
        _entry(c, [s] * n_c, w, "nominal" if s == 1 else f"fiim r={s}")
        for s, w in zip(scales, coeffs)
    )
    return MitigationPlan(c, entries, "fiim", {"order": order}, tuple(range(n_c)), 1)


def _grouped_plan(c, groups, method, params, targets) -> MitigationPlan:
    """Nominal weight ``(2 + n_groups)/2`` plus ``-1/2`` per tripled group."""
    n_c = c.n_cnots
    entries = [_entry(c, [1] * n_c, Fraction(2 + len(groups), 2), "nominal")]
    for group in groups:
        name = ",".join(str(i) for i in group)
        entries.append(_entry(c, _tripled(n_c, group), Fraction(-1, 2), f"{method} x3[{name}]"))
    return MitigationPlan(c, tuple(entries), method, params, tuple(targets), len(groups))


def riim_plan(c: Circuit) -> MitigationPlan:
    """One auxiliary per CNOT, each with only that gate tripled."""
    n_c = _require_cnots(c)
    return _grouped_plan(c, [[i] for i in range(n_c)], "riim", {}, range(n_c))


def _check_list(c: Circuit, targets: Iterable[int]) -> list[int]:
    n_c = _require_cnots(c)
    lst = sorted(set(int(i) for i in targets))
    if not lst:
        raise PlanError("LIIM list is empty")
    bad = [i for i in lst if not 0 <= i < n_c]
    if bad:
        raise PlanError(f"LIIM list entries {bad} are not CNOT indices (circuit has {n_c})")
    return lst


def liim_fiim_plan(c: Circuit, targets: Iterable[int]) -> MitigationPlan:
    """Nominal (3/2) minus half the circuit with every listed CNOT tripled."""
    lst = _check_list(c, targets)
    n_c = c.n_cnots
    entries = (
        _entry(c, [1] * n_c, Fraction(3, 2), "nominal"),
        _entry(c, _tripled(n_c, lst), Fraction(-1, 2), "liim_fiim x3[" + ",".join(map(str, lst)) + "]"),
    )
    return MitigationPlan(c, entries, "liim_fiim", {"list": lst}, tuple(lst), 1)


def liim_riim_plan(c: Circuit, targets: Iterable[int]) -> MitigationPlan:
    lst = _check_list(c, targets)
    return _grouped_plan(c, [[i] for i in lst], "liim_riim", {"list": lst}, lst)


def siim_partition(n_cnots: int, n_sets: int) -> list[list[int]]:
    """Contiguous split of ``range(n_cnots)`` into ``n_sets`` near-equal runs.

    The first ``n_cnots % n_sets`` sets get the extra gate.
    """
    if not 1 <= n_sets <= n_cnots:
        raise PlanError(f"n_sets must lie in 1..{n_cnots}, got {n_sets}")
    size, extra = divmod(n_cnots, n_sets)
    sets, start = [], 0
    for s in range(n_sets):
        stop = start + size + (s < extra)
        sets.append(list(range(start, stop)))
        start = stop
    return sets


def siim_plan(c: Circuit, n_sets: int) -> MitigationPlan:
    n_c = _require_cnots(c)
    groups = siim_partition(n_c, n_sets)
    return _grouped_plan(c, groups, "siim", {"sets": n_sets}, range(n_c))


def list_for_pair(c: Circuit, pair: Sequence[int]) -> list[int]:
    """CNOT indices acting on the unordered qubit ``pair``."""
    want = set(pair)
    return [i for i, q in enumerate(cnot_pairs(c)) if set(q) == want]


def make_plan(c: Circuit, method: str, order: int = 1, sets: Optional[int] = None,
              targets: Optional[Iterable[int]] = None) -> MitigationPlan:
    """Dispatch by method name: fiim, riim, siim, liim_fiim, liim_riim."""
    if method == "fiim":
        return fiim_plan(c, order)
    if method == "riim":
        return riim_plan(c)
    if method == "siim":
        if sets is None:
            raise PlanError("siim needs a number of sets")
        return siim_plan(c, sets)
    if method in ("liim_fiim", "liim_riim"):
        if targets is None:
            raise PlanError(f"{method} needs a list of CNOT indices")
        return (liim_fiim_plan if method == "liim_fiim" else liim_riim_plan)(c, targets)
    raise PlanError(f"unknown method {method!r}")


def unmitigated_plan(c: Circuit) -> MitigationPlan:
    """Single-entry plan running the base circuit with weight 1."""
    n_c = c.n_cnots
    entry = PlanEntry(c, Fraction(1), "nominal", tuple([1] * n_c))
    return MitigationPlan(c, (entry,), "none", {}, (), 1)
