"""Analytical data-movement model over HRPB: alpha, beta, OI_shmem and synergy classes."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .core import BRICK_K, BRICK_M, BRICK_SIZE, Hrpb, HrpbConfig, csr_to_hrpb, popcount

__all__ = [
    "Synergy",
    "UndefinedAlphaError",
    "ModelReport",
    "TmAnalysis",
    "LOW_MEDIUM_BOUNDARY",
    "MEDIUM_HIGH_BOUNDARY",
    "compute_alpha",
    "compute_beta",
    "oi_shmem",
    "shmem_trans_b",
    "classify_synergy",
    "model_report",
    "analyze_tm",
    "has_sentinel_columns",
]

LOW_MEDIUM_BOUNDARY = 0.125
MEDIUM_HIGH_BOUNDARY = 0.25

#: MACs delivered by one 32-element B transaction when every brick column is full
_OI_SCALE = 512


class Synergy(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"

    def __str__(self):
        return self.value


class UndefinedAlphaError(ValueError):
    def __init__(self, message="undefined alpha: matrix has no active bricks"):
        super().__init__(message)


def _table(h):
    return h.bricks() if isinstance(h, Hrpb) else h


def compute_alpha(h):
    """Mean nonzero fraction of an active brick: ``nnz / (64 * active_bricks)``."""
    t = _table(h)
    if t.total_bricks == 0:
        raise UndefinedAlphaError()
    return t.nnz / (BRICK_SIZE * t.total_bricks)


def compute_beta(h):
    """Mean number of active bricks per non-empty brick column."""
    t = _table(h)
    cols = t.active_brick_columns()
    if cols == 0:
        raise UndefinedAlphaError("undefined beta: matrix has no active brick columns")
    return t.total_bricks / cols


def oi_shmem(alpha):
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return _OI_SCALE * alpha


def shmem_trans_b(nnz, alpha, beta, brick_m=BRICK_M):
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    return nnz / (32 * alpha * brick_m * beta)


def classify_synergy(alpha):
    """Low below 12.5%, Medium on [12.5%, 25%), High from 25% up."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha < LOW_MEDIUM_BOUNDARY:
        return Synergy.LOW
    if alpha < MEDIUM_HIGH_BOUNDARY:
        return Synergy.MEDIUM
    return Synergy.HIGH


def has_sentinel_columns(h):
    """True if any block carries padded active-column slots."""
    return bool(np.any(np.asarray(h.panel_active_counts) % h.config.tk))


@dataclass(frozen=True)
class ModelReport:
    nnz: int
    num_active_bricks: int
    num_active_brick_columns: int
    alpha: float
    beta: float
    oi_shmem: float
    shmem_trans_b: float
    synergy: Synergy
    per_panel_block_histogram: dict
    brick_density_histogram: dict

    CSV_FIELDS = (
        "nnz", "num_active_bricks", "num_active_brick_columns",
        "alpha", "beta", "oi_shmem", "shmem_trans_b", "synergy",
    )

    def to_dict(self):
        d = asdict(self)
        d["synergy"] = self.synergy.value
        d["per_panel_block_histogram"] = {str(k): v for k, v in self.per_panel_block_histogram.items()}
        d["brick_density_histogram"] = {str(k): v for k, v in self.brick_density_histogram.items()}
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=False)

    def csv_row(self, header=False):
        """One CSV line (optionally preceded by the header) without histograms."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        if header:
            w.writerow(self.CSV_FIELDS)
        d = self.to_dict()
        w.writerow([repr(d[f]) if isinstance(d[f], float) else d[f] for f in self.CSV_FIELDS])
        return out.getvalue()


def model_report(h):
    t = _table(h)
    alpha = compute_alpha(t)
    beta = compute_beta(t)
    blocks = np.diff(h.blocked_row_ptr) if isinstance(h, Hrpb) else np.bincount(t.panel)
    panel_hist = dict(sorted(Counter(blocks.tolist()).items()))
    density_hist = dict(sorted(Counter(popcount(t.pattern).tolist()).items()))
    return ModelReport(
        nnz=t.nnz,
        num_active_bricks=t.total_bricks,
        num_active_brick_columns=t.active_brick_columns(),
        alpha=alpha,
        beta=beta,
        oi_shmem=oi_shmem(alpha),
        shmem_trans_b=shmem_trans_b(t.nnz, alpha, beta),
        synergy=classify_synergy(alpha),
        per_panel_block_histogram=panel_hist,
        brick_density_histogram=density_hist,
    )


@dataclass(frozen=True)
class TmAnalysis:
    """Reuse/density trade-off for one row-panel height.

    ``alpha`` is the brick-column density: nonzeros over the area of the
    non-empty ``tm x 4`` brick columns. At ``tm = 16`` it equals the per-brick
    alpha. ``oi_gain = alpha * beta / alpha(tm=16)``. ``brick_alpha`` is the
    per-active-brick alpha and ``fragment_gain`` the measured reduction in
    B-fragment transactions relative to ``tm = 16``.
    """

    tm: int
    alpha: float
    beta: float
    oi_gain: float
    brick_alpha: float
    fragment_gain: float


def analyze_tm(csr, tm_candidates=(16, 32), tk=16):
    if not tm_candidates:
        raise ValueError("need at least one tm candidate")
    stats = {}
    for tm in sorted(set([16, *tm_candidates])):
        t = csr_to_hrpb(csr, HrpbConfig(tm=tm, tk=tk)).bricks()
        cols = t.active_brick_columns()
        if cols == 0:
            raise UndefinedAlphaError()
        stats[tm] = (t.nnz / (BRICK_K * tm * cols), compute_beta(t), compute_alpha(t), cols)
    base_alpha, _, _, base_cols = stats[16]
    out = {}
    for tm in tm_candidates:
        alpha, beta, brick_alpha, cols = stats[tm]
        out[tm] = TmAnalysis(tm, alpha, beta, alpha * beta / base_alpha, brick_alpha, base_cols / cols)
    return out
