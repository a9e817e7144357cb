"""scikit-learn compatible wrapper around HRPB conversion and emulated SpMM."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import HrpbConfig, csr_to_hrpb
from .emulator import ExecConfig, spmm_hrpb
from .model import model_report
from .validation import check_dense, check_positive_int, check_sparse


class HrpbSpMM(TransformerMixin, BaseEstimator):
    """Fixed sparse linear map ``x -> A x`` executed through the HRPB emulator.

    Mirrors ``SparseRandomProjection``: ``transform(X)`` returns ``X @ A.T``
    for ``X`` of shape ``(n_samples, K)``, so it drops into a Pipeline.
    :meth:`spmm` exposes the plain ``A @ B`` product with its counters.

    Parameters
    ----------
    matrix : sparse operand A (CsrMatrix, scipy sparse or dense array), shape (M, K)
    tm, tk : row-panel height and block width
    jobs : panels executed concurrently (results are identical for any value)

    Attributes
    ----------
    hrpb_ : Hrpb
    report_ : ModelReport, or None when A has no nonzeros
    alpha_, beta_, synergy_ : shortcuts into ``report_``
    n_features_in_ : K
    stats_ : ExecStats of the last product
    """

    def __init__(self, matrix=None, tm=16, tk=16, jobs=1):
        self.matrix = matrix
        self.tm = tm
        self.tk = tk
        self.jobs = jobs

    def fit(self, X=None, y=None):
        if self.matrix is None:
            raise ValueError("HrpbSpMM needs a sparse operand: pass matrix=A")
        csr = check_sparse(self.matrix)
        check_positive_int(self.jobs, "jobs")
        config = HrpbConfig(tm=self.tm, tk=self.tk)
        self.hrpb_ = csr_to_hrpb(csr, config, jobs=self.jobs)
        self.n_features_in_ = csr.num_cols
        self.n_output_features_ = csr.num_rows
        if csr.nnz:
            self.report_ = model_report(self.hrpb_)
            self.alpha_ = self.report_.alpha
            self.beta_ = self.report_.beta
            self.synergy_ = self.report_.synergy
        else:
            self.report_ = None
            self.alpha_ = self.beta_ = self.synergy_ = None
        if X is not None:
            check_dense(X, name="X")
            self._check_n_features(X)
        return self

    def _check_n_features(self, X):
        n = np.shape(X)[1]
        if n != self.n_features_in_:
            raise ValueError(
                f"X has {n} features, but {type(self).__name__} is expecting "
                f"{self.n_features_in_} features as input."
            )

    def spmm(self, B):
        """Return ``(A @ B, ExecStats)`` as a float32 array."""
        check_is_fitted(self, "hrpb_")
        b = check_dense(B, num_rows=self.n_features_in_)
        c, stats = spmm_hrpb(self.hrpb_, b, ExecConfig(n=b.shape[1]), jobs=self.jobs)
        self.stats_ = stats
        return c.data, stats

    def transform(self, X):
        check_is_fitted(self, "hrpb_")
        X = check_dense(X, name="X")
        self._check_n_features(X)
        c, _ = self.spmm(X.T)
        return np.ascontiguousarray(c.T)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "hrpb_")
        return np.asarray([f"hrpbspmm{i}" for i in range(self.n_output_features_)], dtype=object)
