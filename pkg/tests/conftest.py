import numpy as np
import pytest

from vqnhe_lab.pauli import Hamiltonian, PauliString

I2 = np.eye(2)
PX = np.array([[0, 1], [1, 0]], dtype=complex)
PY = np.array([[0, -1j], [1j, 0]])
PZ = np.diag([1.0, -1.0]).astype(complex)
KRON = {"I": I2, "X": PX, "Y": PY, "Z": PZ}


def kron_matrix(letters: str) -> np.ndarray:
    """Independent dense Pauli oracle: qubit 0 is the leftmost Kronecker factor."""
    m = np.ones((1, 1), dtype=complex)
    for c in letters:
        m = np.kron(m, KRON[c])
    return m


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return v / np.linalg.norm(v)


def random_pauli(n, rng, allow_identity=True):
    while True:
        s = "".join(rng.choice(list("IXYZ"), size=n))
        if allow_identity or set(s) != {"I"}:
            return PauliString(s)


def random_hamiltonian(n, rng, terms=6):
    return Hamiltonian(n, [(float(rng.normal()), random_pauli(n, rng)) for _ in range(terms)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
