"""Orthogonal matching pursuit baseline over a Gaussian (alpha = 2) design.

The alpha = 2 matrix reuses the same seeded (u, w) substreams as the
heavy-tailed design, so head-to-head comparisons run against literally the
same underlying randomness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .encode import MeasurementVector
from .stable import SeededDesignMatrix, SparseSignal


@dataclass(frozen=True)
class OmpConfig:
    k_iterations: int
    matrix: SeededDesignMatrix
    residual_tol: Optional[float] = None  # optional early stop; unused in reproductions

    def __post_init__(self):
        if self.matrix.params.alpha != 2.0:
            raise ValueError("OMP baseline requires an alpha = 2 design matrix")
        if not 1 <= self.k_iterations <= self.matrix.m:
            raise ValueError("k_iterations must lie in [1, m]")


def gaussian_entry(mat: SeededDesignMatrix, i: int, j: int) -> float:
    """Entry of the alpha = 2 (variance 2) design; same substream scheme."""
    if mat.params.alpha != 2.0:
        raise ValueError("matrix must have alpha = 2")
    return mat.entry(i, j)


def omp_decode(meas: MeasurementVector, cfg: OmpConfig) -> SparseSignal:
    """Greedy decode: iteratively select the column with the largest
    normalized correlation against the residual, then refit all selected
    coordinates by least squares (SVD-based, orthogonal factorization).

    Raises on a rank-deficient selected column set.  An all-zero
    correlation scan stops the selection early (nothing left to explain).
    """
    mat = cfg.matrix
    if meas.matrix.identity() != mat.identity():
        raise ValueError("measurements were taken against a different matrix")
    y = meas.y
    design = mat.materialize()  # rows = coordinates; desk-scale N assumed
    norms = np.linalg.norm(design, axis=1)
    selected: list[int] = []
    coef = np.empty(0)
    r = y.copy()
    for _ in range(cfg.k_iterations):
        scores = np.abs(design @ r) / norms
        if selected:
            scores[selected] = -np.inf
        best = int(np.argmax(scores))
        if scores[best] <= 0.0:
            break
        selected.append(best)
        basis = design[selected].T  # m x |selected|
        coef, _, rank, _ = np.linalg.lstsq(basis, y, rcond=None)
        if rank < len(selected):
            raise np.linalg.LinAlgError(
                f"selected columns are rank deficient ({rank} < {len(selected)})"
            )
        r = y - basis @ coef
        if cfg.residual_tol is not None and np.linalg.norm(r) <= cfg.residual_tol:
            break
    if not selected:
        return SparseSignal(n=mat.n, support=np.empty(0, dtype=np.int64), values=np.empty(0))
    keep = coef != 0.0
    support = np.asarray(selected, dtype=np.int64)[keep]
    return SparseSignal(n=mat.n, support=support, values=coef[keep])
