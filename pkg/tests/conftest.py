import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def svd_oracle(M):
    """Singular values from the eigenvalues of M^T M, descending."""
    M = np.asarray(M, dtype=np.float64)
    w = np.linalg.eigvalsh(M.T @ M)[::-1]
    return np.sqrt(np.clip(w, 0.0, None))


def random_batch(rng, n=5, dim=4, max_len=12):
    return [rng.normal(size=(int(rng.integers(1, max_len + 1)), dim)) for _ in range(n)]


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
