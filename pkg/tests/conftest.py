import numpy as np
import pytest

from zne_lab import CNOT, Circuit, OneQubitUnitary, generate_cnot_chain


@pytest.fixture
def two_cnot():
    """Two CNOTs, CNOT(0,1) then CNOT(1,0), both qubits in |1>."""
    return generate_cnot_chain(2, "11")


@pytest.fixture
def four_cnot():
    """Four alternating CNOTs on input |10>; noiseless output value 3."""
    return generate_cnot_chain(4, "10")


def random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / abs(np.diag(r)))


def random_circuit(rng, n_qubits=None, n_cnots=None, one_qubit_prob=0.3):
    n = n_qubits or int(rng.integers(2, 4))
    n_c = n_cnots or int(rng.integers(1, 13))
    gates = []
    while sum(isinstance(g, CNOT) for g in gates) < n_c:
        if rng.random() < one_qubit_prob:
            gates.append(OneQubitUnitary(int(rng.integers(n)), random_unitary(rng)))
        else:
            c, t = rng.choice(n, size=2, replace=False)
            gates.append(CNOT(int(c), int(t)))
    bits = "".join(rng.choice(["0", "1"], size=n))
    return Circuit(n, bits, tuple(gates))


def random_density_matrix(rng, n_qubits):
    d = 2**n_qubits
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for the acceptance summary, then assert."""

    def check(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        request.config.stash.setdefault(ACCEPTANCE_KEY, []).append(line)
        print(line)
        assert ok, line

    return check


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
