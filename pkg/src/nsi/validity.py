"""Checks that the data can support the estimator.

The training-treatment test looks only at the assignment pattern and can
run before any outcome is collected.  The subspace-inclusion test compares
donor row spaces in the training and prediction periods once outcomes are
in.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InputError
from .estimator import select_kappa, spectral_decomposition
from .graph import NetworkGraph
from .panel import TreatmentPanel

__all__ = [
    "COLSPACE_TOL",
    "MaskMatrices",
    "TrainingTestResult",
    "SubspaceTestResult",
    "mask_matrices",
    "nbhd_pre_mask",
    "training_treatment_test",
    "colrank_diagnostic",
    "subspace_inclusion_test",
]

COLSPACE_TOL = 1e-9
RANK_TOL = 1e-9


@dataclass(frozen=True)
class MaskMatrices:
    """Indicator matrices of training and target assignments.

    ``b_pre`` is ``N x (T_pre * D)`` with block ``a`` (columns
    ``(a-1)*T_pre .. a*T_pre - 1``) marking where training treatment ``a``
    was applied; ``b_post`` is ``N x D`` with a single 1 per row.
    """

    b_pre: np.ndarray
    b_post: np.ndarray


def _blocks(a: np.ndarray, d: int) -> np.ndarray:
    return np.hstack([(a == lab).astype(float) for lab in range(1, d + 1)])


def mask_matrices(treatments: TreatmentPanel, target=None) -> MaskMatrices:
    target = treatments.target if target is None else np.asarray(target, dtype=np.int64)
    if target is None:
        raise InputError("a full target assignment is required")
    if target.shape != (treatments.n_units,):
        raise InputError("target must have one entry per unit")
    d = treatments.d_treatments
    return MaskMatrices(_blocks(treatments.a_pre, d), _blocks(target[:, None], d))


def nbhd_pre_mask(treatments: TreatmentPanel, g: NetworkGraph, n: int) -> np.ndarray:
    """Rows of the training mask restricted to ``N(n)``."""
    nb = list(g.neighbors(n))
    return _blocks(treatments.a_pre[nb], treatments.d_treatments)


@dataclass(frozen=True)
class TrainingTestResult:
    passed: bool
    colspace_ok: bool
    repeats_ok: bool
    colrank: int
    min_repeats: int

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "colspace_ok": self.colspace_ok,
            "repeats_ok": self.repeats_ok,
            "colrank": self.colrank,
            "min_repeats": self.min_repeats,
        }


def _numerical_rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def training_treatment_test(
    g: NetworkGraph, treatments: TreatmentPanel, n: int, target_nbhd, r_bar: int
) -> TrainingTestResult:
    """Pre-collection diversity check for ego ``n`` and ``target_nbhd``.

    Passes when every target indicator column lies in the span of the
    neighborhood's training mask and every distinct neighborhood training
    column occurs at least ``r_bar * D`` times.
    """
    if r_bar < 1:
        raise InputError("r_bar must be at least 1")
    nb = list(g.neighbors(n))
    tgt = np.asarray(target_nbhd, dtype=np.int64).ravel()
    if tgt.shape[0] != len(nb):
        raise InputError(f"target has length {tgt.shape[0]}, unit {n} has {len(nb)} neighbors")
    d = treatments.d_treatments
    b_pre = _blocks(treatments.a_pre[nb], d)
    b_post = _blocks(tgt[:, None], d)

    colspace_ok = True
    if b_pre.shape[1] == 0:
        colspace_ok = not b_post.any()
    else:
        coef, *_ = np.linalg.lstsq(b_pre, b_post, rcond=None)
        resid = np.linalg.norm(b_post - b_pre @ coef, axis=0)
        colspace_ok = bool(np.all(resid <= COLSPACE_TOL))

    cols = treatments.a_pre[nb].T
    if cols.shape[0]:
        _, counts = np.unique(cols, axis=0, return_counts=True)
        min_repeats = int(counts.min())
    else:
        min_repeats = 0
    repeats_ok = cols.shape[0] > 0 and min_repeats >= r_bar * d
    return TrainingTestResult(
        colspace_ok and repeats_ok, colspace_ok, bool(repeats_ok), _numerical_rank(b_pre), min_repeats
    )


def colrank_diagnostic(treatments: TreatmentPanel, g: NetworkGraph, n: int) -> int:
    """Numerical column rank of the neighborhood training mask; compare with ``|N(n)|``."""
    return _numerical_rank(nbhd_pre_mask(treatments, g, n))


@dataclass(frozen=True)
class SubspaceTestResult:
    beta_hat: float
    threshold: float
    kappa: int
    kappa_prime: int
    gamma: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def subspace_inclusion_test(
    z_pre_I: np.ndarray,
    z_post_I: np.ndarray,
    kappa="knee",
    kappa_prime="knee",
    gamma: float = 0.5,
) -> SubspaceTestResult:
    """Squared Frobenius norm of the post row space projected off the pre row space.

    ``beta_hat`` lies in ``[0, kappa_prime]``; the test passes when it is at
    most ``(1 - gamma) * kappa_prime``.
    """
    if not 0 < gamma < 1:
        raise InputError(f"gamma must lie in (0, 1), got {gamma}")
    z_pre_I = np.asarray(z_pre_I, dtype=float)
    z_post_I = np.asarray(z_post_I, dtype=float)
    if z_pre_I.shape[1] != z_post_I.shape[1]:
        raise InputError("training and prediction matrices must share donor columns")
    if not np.any(z_post_I):
        raise InputError("prediction-period donor matrix is identically zero")
    pre = spectral_decomposition(z_pre_I)
    post = spectral_decomposition(z_post_I)
    k = select_kappa(pre.singular_values, kappa)
    kp = select_kappa(post.singular_values, kappa_prime)
    r_pre = pre.right_vectors[:, :k]
    r_post = post.right_vectors[:, :kp]
    resid = r_post - r_pre @ (r_pre.T @ r_post)
    beta = float(np.sum(resid**2))
    beta = min(max(beta, 0.0), float(kp))
    threshold = (1 - gamma) * kp
    return SubspaceTestResult(beta, threshold, k, kp, gamma, beta <= threshold)
