"""Sparse matrix ingestion: Matrix Market I/O, COO/CSR containers and synthetic generators."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CooMatrix",
    "CsrMatrix",
    "DenseMatrix",
    "MatrixMarketError",
    "parse_matrix_market",
    "read_matrix_market",
    "write_matrix_market",
    "coo_to_csr",
    "csr_to_coo",
    "generate_synthetic",
]


class MatrixMarketError(ValueError):
    """Raised for malformed Matrix Market input."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class CooMatrix:
    num_rows: int
    num_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.num_rows < 0 or self.num_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if not (rows.shape == cols.shape == values.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and values must be 1-d arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.num_rows:
                raise ValueError("row index out of range")
            if cols.min() < 0 or cols.max() >= self.num_cols:
                raise ValueError("column index out of range")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @property
    def nnz(self):
        return int(self.values.size)

    @property
    def shape(self):
        return (self.num_rows, self.num_cols)

    def entries(self):
        """List of ``(row, col, value)`` triples in storage order."""
        return [
            (int(r), int(c), float(v))
            for r, c, v in zip(self.rows, self.cols, self.values)
        ]

    def is_canonical(self):
        if self.nnz < 2:
            return True
        key = self.rows * self.num_cols + self.cols
        return bool(np.all(np.diff(key) > 0))

    def canonicalize(self):
        """Sort by ``(row, col)`` and sum duplicate coordinates."""
        if self.is_canonical():
            return self
        key = self.rows * self.num_cols + self.cols
        order = np.argsort(key, kind="stable")
        key = key[order]
        values = self.values[order]
        starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
        summed = np.add.reduceat(values, starts) if values.size else values
        key = key[starts]
        return CooMatrix(
            self.num_rows,
            self.num_cols,
            key // max(self.num_cols, 1),
            key % max(self.num_cols, 1),
            summed.astype(np.float32),
        )

    def __eq__(self, other):
        if not isinstance(other, CooMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values.view(np.uint32), other.values.view(np.uint32))
        )

    def __repr__(self):
        return f"CooMatrix(shape={self.shape}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    num_rows: int
    num_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        row_ptr = np.ascontiguousarray(self.row_ptr, dtype=np.int64)
        col_idx = np.ascontiguousarray(self.col_idx, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        object.__setattr__(self, "row_ptr", row_ptr)
        object.__setattr__(self, "col_idx", col_idx)
        object.__setattr__(self, "values", values)
        self.check()

    def check(self):
        """Validate the CSR invariants, raising ``ValueError`` on violation."""
        if self.num_rows < 0 or self.num_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        rp = self.row_ptr
        if rp.shape != (self.num_rows + 1,):
            raise ValueError("row_ptr must have length num_rows + 1")
        if rp[0] != 0 or np.any(np.diff(rp) < 0):
            raise ValueError("row_ptr must start at 0 and be nondecreasing")
        if rp[-1] != self.col_idx.size or self.col_idx.size != self.values.size:
            raise ValueError("row_ptr[-1], col_idx and values disagree on nnz")
        if self.col_idx.size:
            if self.col_idx.min() < 0 or self.col_idx.max() >= self.num_cols:
                raise ValueError("column index out of range")
            step = np.diff(self.col_idx)
            # a decrease is only legal across a row boundary
            bad = np.flatnonzero(step <= 0) + 1
            if bad.size and not np.all(np.isin(bad, rp[1:-1])):
                raise ValueError("column indices must be strictly increasing within each row")

    @property
    def nnz(self):
        return int(self.values.size)

    @property
    def shape(self):
        return (self.num_rows, self.num_cols)

    def row_indices(self):
        """Row index of every stored entry."""
        return np.repeat(np.arange(self.num_rows, dtype=np.int64), np.diff(self.row_ptr))

    def to_dense(self):
        out = np.zeros(self.shape, dtype=np.float32)
        out[self.row_indices(), self.col_idx] = self.values
        return out

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float32)
        if dense.ndim != 2:
            raise ValueError("expected a 2-d array")
        rows, cols = np.nonzero(dense)
        return coo_to_csr(CooMatrix(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols]))

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n, dtype=np.float32))

    @classmethod
    def empty(cls, num_rows, num_cols):
        return cls(num_rows, num_cols, np.zeros(num_rows + 1, dtype=np.int64),
                   np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float32))

    def __eq__(self, other):
        if not isinstance(other, CsrMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
            and np.array_equal(self.values.view(np.uint32), other.values.view(np.uint32))
        )

    def __repr__(self):
        return f"CsrMatrix(shape={self.shape}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class DenseMatrix:
    """Row-major float32 matrix (B and C operands)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise ValueError("DenseMatrix data must be 2-d")
        object.__setattr__(self, "data", data)

    @property
    def num_rows(self):
        return self.data.shape[0]

    @property
    def num_cols(self):
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DenseMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(
            self.data.view(np.uint32), other.data.view(np.uint32)
        )


# ---------------------------------------------------------------------------
# Matrix Market
# ---------------------------------------------------------------------------

_FIELDS = {"real", "double", "pattern"}
_SYMMETRIES = {"general", "symmetric"}


def _lines(source):
    if isinstance(source, (bytes, bytearray, memoryview)):
        source = bytes(source).decode("ascii", errors="replace")
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_matrix_market(source):
    """Parse a Matrix Market coordinate stream into a canonical :class:`CooMatrix`.

    ``source`` may be bytes, str, or a text/binary file object. Symmetric
    inputs are expanded to both triangles, pattern entries get value 1.0 and
    duplicate coordinates are summed.
    """
    stream = _lines(source)
    lineno = 0
    header = None
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("ascii", errors="replace")
        lineno += 1
        header = raw.strip()
        break
    if header is None:
        raise MatrixMarketError("empty input", 1)
    parts = header.split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("malformed header, expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", 1)
    obj, fmt, field, symmetry = (p.lower() for p in parts[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{obj} {fmt}', only 'matrix coordinate' is read", 1)
    if field not in _FIELDS:
        raise MatrixMarketError(f"unsupported field '{field}'", 1)
    if symmetry not in _SYMMETRIES:
        raise MatrixMarketError(f"unsupported symmetry '{symmetry}'", 1)
    pattern = field == "pattern"

    size = None
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("ascii", errors="replace")
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        tokens = line.split()
        try:
            size = [int(t) for t in tokens]
        except ValueError:
            raise MatrixMarketError(f"malformed size line '{line}'", lineno) from None
        if len(size) != 3 or min(size) < 0:
            raise MatrixMarketError(f"malformed size line '{line}'", lineno)
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno + 1)
    num_rows, num_cols, declared = size

    ncols_expected = 2 if pattern else 3
    rows = np.empty(declared, dtype=np.int64)
    cols = np.empty(declared, dtype=np.int64)
    vals = np.empty(declared, dtype=np.float32)
    count = 0
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("ascii", errors="replace")
        lineno += 1
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        tokens = line.split()
        if len(tokens) != ncols_expected:
            raise MatrixMarketError(f"expected {ncols_expected} fields, got {len(tokens)}", lineno)
        if count >= declared:
            raise MatrixMarketError(f"more entries than the declared {declared}", lineno)
        try:
            r = int(tokens[0])
            c = int(tokens[1])
        except ValueError:
            raise MatrixMarketError(f"non-integer index in '{line}'", lineno) from None
        if not (1 <= r <= num_rows and 1 <= c <= num_cols):
            raise MatrixMarketError(f"index ({r}, {c}) out of range for {num_rows}x{num_cols}", lineno)
        if pattern:
            v = 1.0
        else:
            try:
                v = float(tokens[2])
            except ValueError:
                raise MatrixMarketError(f"non-numeric value '{tokens[2]}'", lineno) from None
        rows[count] = r - 1
        cols[count] = c - 1
        vals[count] = v
        count += 1
    if count != declared:
        raise MatrixMarketError(f"expected {declared} entries, found {count}", lineno)

    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (
            np.concatenate([rows, cols[off]]),
            np.concatenate([cols, rows[off]]),
            np.concatenate([vals, vals[off]]),
        )
    return CooMatrix(num_rows, num_cols, rows, cols, vals).canonicalize()


def read_matrix_market(path):
    with open(os.fspath(path), "rb") as fh:
        return parse_matrix_market(fh)


def write_matrix_market(m, sink=None):
    """Serialize ``m`` (COO or CSR) as a general real coordinate file.

    Values are written with enough digits to round-trip float32 exactly.
    Returns the text when ``sink`` is None, else writes to ``sink``.
    """
    if isinstance(m, CsrMatrix):
        m = csr_to_coo(m)
    out = io.StringIO()
    out.write("%%MatrixMarket matrix coordinate real general\n")
    out.write(f"{m.num_rows} {m.num_cols} {m.nnz}\n")
    for r, c, v in zip(m.rows.tolist(), m.cols.tolist(), m.values.astype(np.float64).tolist()):
        out.write(f"{r + 1} {c + 1} {v!r}\n")
    text = out.getvalue()
    if sink is None:
        return text
    if isinstance(sink, (str, os.PathLike)):
        with open(sink, "w") as fh:
            fh.write(text)
    else:
        sink.write(text)
    return None


# ---------------------------------------------------------------------------
# conversions
# ---------------------------------------------------------------------------

def coo_to_csr(m):
    m = m.canonicalize()
    counts = np.bincount(m.rows, minlength=m.num_rows)
    row_ptr = np.zeros(m.num_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=row_ptr[1:])
    return CsrMatrix(m.num_rows, m.num_cols, row_ptr, m.cols.copy(), m.values.copy())


def csr_to_coo(m):
    return CooMatrix(m.num_rows, m.num_cols, m.row_indices(), m.col_idx.copy(), m.values.copy())


# ---------------------------------------------------------------------------
# synthetic matrices
# ---------------------------------------------------------------------------

CLUSTER_SHAPE = (16, 4)


def _bernoulli_positions(rng, total, density):
    """Sorted linear positions of a Bernoulli(density) process over ``total`` slots.

    Draws geometric gaps so the cost scales with the number of hits rather
    than with ``total``.
    """
    if density >= 1.0:
        return np.arange(total, dtype=np.int64)
    chunks = []
    pos = -1
    expected = int(total * density)
    batch = max(64, int(expected * 1.1) + 64)
    while True:
        gaps = rng.geometric(density, size=batch)
        hits = pos + np.cumsum(gaps, dtype=np.int64)
        inside = hits[hits < total]
        chunks.append(inside)
        if inside.size < hits.size:
            break
        pos = int(hits[-1])
        batch = max(64, int((total - pos) * density * 1.1) + 64)
    return np.concatenate(chunks)


def _random_values(rng, n):
    return rng.uniform(-1.0, 1.0, size=n).astype(np.float32)


def generate_synthetic(kind, num_rows, num_cols, density=None, *, seed=0,
                       bandwidth=None, clusters=None):
    """Deterministic synthetic sparse matrix.

    kind
        ``"random-uniform"``: each entry present independently with
        probability ``density``.
        ``"banded"``: entries with ``|i - j| <= bandwidth``, each kept with
        probability ``density`` (default 1).
        ``"block-clustered"``: dense 16x4 clusters on the aligned 16x4 grid.
        Either pass ``clusters`` as a list of ``(cluster_row, cluster_col)``
        grid coordinates, or ``density`` as the fraction of grid slots filled.
    """
    if num_rows <= 0 or num_cols <= 0:
        raise ValueError("num_rows and num_cols must be positive")
    if density is not None and not (0.0 < density <= 1.0):
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)

    if kind == "random-uniform":
        if density is None:
            raise ValueError("random-uniform needs a density")
        pos = _bernoulli_positions(rng, num_rows * num_cols, density)
        rows, cols = np.divmod(pos, num_cols)
    elif kind == "banded":
        if bandwidth is None or bandwidth < 0:
            raise ValueError("banded needs a nonnegative bandwidth")
        offsets = np.arange(-bandwidth, bandwidth + 1)
        rows = np.repeat(np.arange(num_rows, dtype=np.int64), offsets.size)
        cols = rows + np.tile(offsets, num_rows)
        keep = (cols >= 0) & (cols < num_cols)
        rows, cols = rows[keep], cols[keep]
        if density is not None and density < 1.0:
            keep = rng.random(rows.size) < density
            rows, cols = rows[keep], cols[keep]
    elif kind == "block-clustered":
        cm, ck = CLUSTER_SHAPE
        grid_r = -(-num_rows // cm)
        grid_c = -(-num_cols // ck)
        if clusters is not None:
            slots = np.asarray(clusters, dtype=np.int64).reshape(-1, 2)
            if slots.size and (slots[:, 0].max() >= grid_r or slots[:, 1].max() >= grid_c
                               or slots.min() < 0):
                raise ValueError("cluster coordinate outside the 16x4 grid")
            slots = np.unique(slots, axis=0)
        else:
            if density is None:
                raise ValueError("block-clustered needs clusters or a density")
            pos = _bernoulli_positions(rng, grid_r * grid_c, density)
            slots = np.stack(np.divmod(pos, grid_c), axis=1)
        lr, lc = np.divmod(np.arange(cm * ck), ck)
        rows = (slots[:, :1] * cm + lr).ravel()
        cols = (slots[:, 1:] * ck + lc).ravel()
        keep = (rows < num_rows) & (cols < num_cols)
        rows, cols = rows[keep], cols[keep]
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")

    values = _random_values(rng, rows.size)
    return coo_to_csr(CooMatrix(num_rows, num_cols, rows, cols, values))
