import numpy as np
import pytest

from hrpb.sparse_io import CooMatrix, CsrMatrix, coo_to_csr, generate_synthetic


# ---------------------------------------------------------------------------
# independent oracles (plain loops, no shared code with the library paths)
# ---------------------------------------------------------------------------

def brute_force_bricks(dense, tm, tk):
    """Enumerate HRPB bricks straight from a dense matrix.

    Returns a list of panels; each panel is a list of blocks; each block is
    ``(active_cols_padded, [(brick_col, brick_row, pattern, values), ...])``
    in brick-CSC order.
    """
    M, K = dense.shape
    panels = []
    for p in range(-(-M // tm)):
        rows = range(p * tm, min((p + 1) * tm, M))
        active = [c for c in range(K) if any(dense[r, c] != 0 for r in rows)]
        blocks = []
        for b in range(-(-len(active) // tk)):
            cols = active[b * tk:(b + 1) * tk]
            cols = cols + [K] * (tk - len(cols))
            bricks = []
            for bc in range(tk // 4):
                for br in range(tm // 16):
                    pattern, values = 0, []
                    for lr in range(16):
                        for lc in range(4):
                            r = p * tm + br * 16 + lr
                            c = cols[bc * 4 + lc]
                            if r < M and c < K and dense[r, c] != 0:
                                pattern |= 1 << (lr * 4 + lc)
                                values.append(dense[r, c])
                    if pattern:
                        bricks.append((bc, br, pattern, values))
            blocks.append((cols, bricks))
        panels.append(blocks)
    return panels


def triple_loop_product(dense_a, b):
    """float32 C = A @ B, k ascending, zero terms skipped."""
    M, K = dense_a.shape
    N = b.shape[1]
    c = np.zeros((M, N), dtype=np.float32)
    for i in range(M):
        for j in range(N):
            acc = np.float32(0)
            for k in range(K):
                if dense_a[i, k] != 0:
                    acc = np.float32(acc + np.float32(dense_a[i, k] * b[k, j]))
            c[i, j] = acc
    return c


def make_sentinel_free(csr, tk, seed=0):
    """Add entries so every row panel (tm=16) has a multiple of ``tk`` active columns."""
    rng = np.random.default_rng(seed)
    dense = csr.to_dense()
    M, K = dense.shape
    assert K % tk == 0
    for p in range(-(-M // 16)):
        rows = slice(p * 16, min((p + 1) * 16, M))
        active = np.flatnonzero(np.any(dense[rows] != 0, axis=0))
        short = (-active.size) % tk
        if short:
            free = np.setdiff1d(np.arange(K), active)
            for c in rng.choice(free, short, replace=False):
                dense[p * 16, c] = rng.uniform(0.5, 1.0)
    return CsrMatrix.from_dense(dense)


def random_case(rng, max_dim=2048, min_dim=16, dmin=1e-4, dmax=0.3):
    M = int(rng.integers(min_dim, max_dim + 1))
    K = int(rng.integers(min_dim, max_dim + 1))
    density = float(np.exp(rng.uniform(np.log(dmin), np.log(dmax))))
    return generate_synthetic("random-uniform", M, K, density, seed=int(rng.integers(2**31)))


def integer_case(rng, M, K, density):
    mask = rng.random((M, K)) < density
    vals = rng.choice([-2, -1, 1, 2], size=(M, K))
    rows, cols = np.nonzero(mask)
    return coo_to_csr(CooMatrix(M, K, rows, cols, vals[rows, cols].astype(np.float32)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance reporting: one pass/fail line per criterion
# ---------------------------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    prev = _ACCEPTANCE.get(number, (title, True))
    _ACCEPTANCE[number] = (title, prev[1] and report.passed)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
