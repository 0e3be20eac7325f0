import numpy as np
import pytest

from gcpls.ingest import FingerprintMatrix


def brute_rows(X):
    """Rows of a dense 0/1 array as tuples of 1-based positions."""
    return [tuple(int(j) + 1 for j in np.flatnonzero(r)) for r in np.asarray(X)]


def random_fingerprints(rng, n, d, density):
    return FingerprintMatrix.from_dense(rng.random((n, d)) < density)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def check(number, title, ok, detail=""):
        lines.append((number, f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}"
                      + (f" ({detail})" if detail else "")))
        assert ok, f"criterion {number} not met: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
