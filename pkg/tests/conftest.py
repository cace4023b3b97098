import itertools

import numpy as np
import pytest

from sparsesa.linalg import Instance

_CRITERIA = []


def random_instance(m, n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return Instance(rng.normal(size=(m, n)) * scale, rng.normal(size=m))


def lstsq_rss(a, y, cols):
    """Independent oracle: RSS of the least-squares fit on ``cols`` via numpy lstsq."""
    cols = list(cols)
    if not cols:
        return 0.5 * float(y @ y)
    x, *_ = np.linalg.lstsq(a[:, cols], y, rcond=None)
    r = y - a[:, cols] @ x
    return 0.5 * float(r @ r)


def brute_force_min(a, y, k):
    """Independent oracle: best size-k support by lstsq over every combination."""
    best, best_rss = None, np.inf
    for cols in itertools.combinations(range(a.shape[1]), k):
        rss = lstsq_rss(a, y, cols)
        if rss < best_rss:
            best, best_rss = cols, rss
    return best, best_rss


@pytest.fixture
def criterion():
    """Record one acceptance line; shown in the terminal summary."""
    def record(number, ok, detail):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number:>2}: {verdict}  {detail}"
        print(line)
        _CRITERIA.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
