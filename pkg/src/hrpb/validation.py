"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np
import scipy.sparse as sp

from .sparse_io import CooMatrix, CsrMatrix, DenseMatrix, coo_to_csr


def check_sparse(A):
    """Coerce ``A`` to a canonical float32 :class:`CsrMatrix`.

    Accepts CsrMatrix, CooMatrix, any scipy sparse matrix/array, or a dense
    2-d array-like (zeros dropped).
    """
    if isinstance(A, CsrMatrix):
        return A
    if isinstance(A, CooMatrix):
        return coo_to_csr(A)
    if sp.issparse(A):
        coo = sp.coo_array(A)
        return coo_to_csr(CooMatrix(coo.shape[0], coo.shape[1], coo.row, coo.col,
                                    np.asarray(coo.data, dtype=np.float32)))
    arr = np.asarray(A)
    if arr.ndim != 2:
        raise ValueError(f"Expected a 2-d sparse operand, got an array with ndim={arr.ndim}")
    if not np.issubdtype(arr.dtype, np.number) or np.iscomplexobj(arr):
        raise ValueError(f"Sparse operand must be real-valued, got dtype {arr.dtype}")
    return CsrMatrix.from_dense(arr)


def check_dense(B, *, num_rows=None, name="B", allow_nonfinite=False):
    """Return ``B`` as a C-contiguous float32 2-d array."""
    if isinstance(B, DenseMatrix):
        arr = B.data
    else:
        if sp.issparse(B):
            raise TypeError(f"{name} must be dense, got a sparse matrix")
        arr = np.asarray(B)
        if arr.ndim == 1:
            raise ValueError(
                f"Expected 2-d array for {name}, got 1-d; reshape with "
                f"{name}.reshape(-1, 1) for a single column"
            )
        if arr.ndim != 2:
            raise ValueError(f"Expected 2-d array for {name}, got ndim={arr.ndim}")
        if np.iscomplexobj(arr):
            raise ValueError(f"{name} must be real-valued")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
    if num_rows is not None and arr.shape[0] != num_rows:
        raise ValueError(f"{name} has {arr.shape[0]} rows, expected {num_rows}")
    if not allow_nonfinite and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinity")
    return arr


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def random_dense(num_rows, num_cols, seed):
    """Seeded B operand: PCG64 (``numpy.random.default_rng``), uniform on [-1, 1), float32."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(num_rows, num_cols)).astype(np.float32)
