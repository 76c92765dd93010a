"""
Detection and convergence metrics: empirical thresholds, ROC/AUC, and the
iteration count ``T*`` after which all honest nodes stay near the target.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from calod.consensus import ConvergenceTrace


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC; `points` is an (M, 2) array of (pfa, pd) rows."""

    points: np.ndarray
    auc: float
    n_h0: int
    n_h1: int

    @property
    def pfa(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def pd(self) -> np.ndarray:
        return self.points[:, 1]

    def min_error_probability(self, prior_h0: float = 0.5) -> float:
        """Smallest Bayes error over the operating points for the given prior."""
        err = prior_h0 * self.pfa + (1.0 - prior_h0) * (1.0 - self.pd)
        return float(err.min())

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pfa", "pd"])
        for pfa, pd in self.points:
            w.writerow([repr(float(pfa)), repr(float(pd))])
        buf.write(f"# auc={self.auc!r} n_h0={self.n_h0} n_h1={self.n_h1}\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def calibrate_threshold(h0_scores: Sequence[float], delta: float) -> float:
    """Smallest empirical threshold whose false-alarm rate is at most `delta`.

    Returns the ``ceil((1 - delta) n)``-th smallest H0 score, so that at most
    ``delta n`` scores lie strictly above it.
    """
    s = np.sort(np.asarray(h0_scores, dtype=float))
    if s.size == 0:
        raise ValueError("calibrate_threshold needs at least one H0 score")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    # guard against (1 - delta) * n landing a hair above an integer
    k = math.ceil((1.0 - delta) * s.size - 1e-9)
    return float(s[max(k, 1) - 1])


def empirical_roc(h0_scores: Sequence[float], h1_scores: Sequence[float]) -> RocCurve:
    """ROC from decide-H1-if-score-exceeds-threshold over all pooled scores."""
    s0 = np.sort(np.asarray(h0_scores, dtype=float))
    s1 = np.sort(np.asarray(h1_scores, dtype=float))
    if s0.size == 0 or s1.size == 0:
        raise ValueError("empirical_roc needs scores under both hypotheses")
    thresholds = np.unique(np.concatenate([s0, s1]))[::-1]
    pfa = (s0.size - np.searchsorted(s0, thresholds, side="right")) / s0.size
    pd = (s1.size - np.searchsorted(s1, thresholds, side="right")) / s1.size
    pfa = np.concatenate([[0.0], pfa, [1.0]])
    pd = np.concatenate([[0.0], pd, [1.0]])
    auc = float(np.sum(np.diff(pfa) * (pd[1:] + pd[:-1]) / 2.0))
    return RocCurve(points=np.column_stack([pfa, pd]), auc=auc,
                    n_h0=int(s0.size), n_h1=int(s1.size))


def iterations_to_within(trace: ConvergenceTrace, target: float, fraction: float = 0.95,
                         atol: float = 1e-3) -> Optional[int]:
    """First iteration from which every honest node stays in the band around `target`.

    The band half-width is ``(1 - fraction) |target|``, or `atol` when the
    target is exactly zero.  Returns None if the last recorded iterate is
    outside the band.
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    width = (1.0 - fraction) * abs(target) if target != 0 else atol
    honest = trace.states[:, trace.honest_mask]
    inside = np.all(np.abs(honest - target) <= width, axis=1)
    if not inside[-1]:
        return None
    outside = np.flatnonzero(~inside)
    return 0 if outside.size == 0 else int(outside[-1]) + 1


def relative_convergence_rate(t_star: Optional[int], n_nodes: int) -> Optional[float]:
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    if t_star is None:
        return None
    return t_star / n_nodes
