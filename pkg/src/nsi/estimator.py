"""Principal-component-regression estimator over a donor set.

Step 1 fits weights ``alpha`` by regressing the ego's training outcomes on
the top-``kappa`` singular directions of the donors' training outcomes.
Step 2 applies those weights to the donors' prediction-period outcomes and
builds a normal-approximation interval from the in-sample residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .donors import DonorSet, donor_submatrices
from .errors import DegenerateRank, EstimationInfeasible, InputError
from .panel import ObservationPanel

__all__ = [
    "RANK_FLOOR",
    "LEFTOVER_ENERGY_WARNING",
    "SpectralDecomposition",
    "EstimateReport",
    "spectral_decomposition",
    "svt_pinv",
    "knee_point",
    "universal_threshold_rank",
    "select_kappa",
    "resolve_kappa",
    "ci_multiplier",
    "estimate",
    "estimate_from_matrices",
    "identification_oracle",
]

RANK_FLOOR = 1e-10
LEFTOVER_ENERGY_WARNING = 0.10
UNIVERSAL_FACTOR = 2.02


@dataclass(frozen=True)
class SpectralDecomposition:
    singular_values: np.ndarray
    left_vectors: np.ndarray  # T_pre x q
    right_vectors: np.ndarray  # |I| x q

    def reconstruct(self, kappa: int | None = None) -> np.ndarray:
        k = len(self.singular_values) if kappa is None else kappa
        return (self.left_vectors[:, :k] * self.singular_values[:k]) @ self.right_vectors[:, :k].T


def spectral_decomposition(mat: np.ndarray) -> SpectralDecomposition:
    u, s, vt = np.linalg.svd(np.asarray(mat, dtype=float), full_matrices=False)
    return SpectralDecomposition(s, u, vt.T)


def svt_pinv(z_pre_I: np.ndarray, kappa: int, decomposition: SpectralDecomposition | None = None) -> np.ndarray:
    """Pseudo-inverse of the rank-``kappa`` truncation of ``z_pre_I``."""
    sd = decomposition or spectral_decomposition(z_pre_I)
    s = sd.singular_values
    q = len(s)
    if not 1 <= kappa <= q:
        raise InputError(f"kappa must lie in [1, {q}], got {kappa}")
    if s[0] <= 0 or s[kappa - 1] <= RANK_FLOOR * s[0]:
        raise DegenerateRank(
            f"singular value {kappa} is numerically zero; retry with kappa < {kappa}"
        )
    v = sd.right_vectors[:, :kappa]
    u = sd.left_vectors[:, :kappa]
    return (v / s[:kappa]) @ u.T


def knee_point(spectrum) -> int:
    """Number of components before the elbow of the log-spectrum.

    The elbow is the point lying farthest below the chord joining the
    first and last log singular values; every component ahead of it is
    kept.  A spectrum with numerically zero values (below ``RANK_FLOOR``
    relative to the largest) returns its numerical rank instead, since the
    chord cannot place an elbow on its own endpoint.
    """
    s = np.asarray(spectrum, dtype=float)
    if s.size == 0:
        raise InputError("empty spectrum")
    if s[0] <= 0:
        raise DegenerateRank("all singular values are zero")
    rank = int(np.sum(s > RANK_FLOOR * s[0]))
    if rank < s.size:
        return rank
    if s.size <= 2:
        return 1
    y = np.log(np.maximum(s, s[0] * 1e-16))
    x = np.arange(s.size, dtype=float)
    chord = y[0] + (y[-1] - y[0]) * x / x[-1]
    # Endpoints sit on the chord; only interior points can be the elbow.
    gap = (chord - y)[1:-1]
    elbow = int(np.argmax(gap)) + 1
    if gap[elbow - 1] <= 1e-12 * max(abs(y[0] - y[-1]), 1.0):
        return 1
    return elbow


def universal_threshold_rank(spectrum) -> int:
    """Count singular values above ``2.02 * median(spectrum)``.

    Scaling a pure-noise spectrum by its median estimates sigma * sqrt(max
    dimension), so this is the universal threshold with that correction
    folded in.
    """
    s = np.asarray(spectrum, dtype=float)
    if s.size == 0:
        raise InputError("empty spectrum")
    if s[0] <= 0:
        raise DegenerateRank("all singular values are zero")
    return max(int(np.sum(s > UNIVERSAL_FACTOR * np.median(s))), 1)


def select_kappa(spectrum, policy="knee", floor: int | None = None) -> int:
    """Choose how many spectral components to keep.

    ``policy`` is ``"knee"``, ``"universal"``, an integer, or
    ``("fixed", k)``.  The result is raised to ``floor`` when given and
    always clamped to ``[1, len(spectrum)]``.
    """
    s = np.asarray(spectrum, dtype=float)
    if s.size == 0:
        raise InputError("empty spectrum")
    if not np.any(s > 0):
        raise DegenerateRank("all singular values are zero")
    if isinstance(policy, tuple) and policy[0] == "fixed":
        policy = int(policy[1])
    if isinstance(policy, (int, np.integer)) and not isinstance(policy, bool):
        k = int(policy)
    elif policy == "knee":
        k = knee_point(s)
    elif policy == "universal":
        k = universal_threshold_rank(s)
    else:
        raise InputError(f"unknown kappa policy {policy!r}")
    if floor is not None:
        k = max(k, int(floor))
    return min(max(k, 1), s.size)


def resolve_kappa(kappa, spectrum, nbhd_size: int) -> int:
    """``"auto"`` means knee point floored at the neighborhood size."""
    if kappa == "auto":
        return select_kappa(spectrum, "knee", floor=nbhd_size)
    if isinstance(kappa, str) and kappa.isdigit():
        kappa = int(kappa)
    return select_kappa(spectrum, kappa)


@lru_cache(maxsize=64)
def ci_multiplier(ci_level: float, two_sided: bool = False) -> float:
    """Normal quantile used for the interval half-width.

    The default reads ``ci_level`` as the quantile ``Phi^{-1}(level/100)``
    (1.645 at 95); ``two_sided`` uses ``Phi^{-1}((1 + level/100)/2)``.
    """
    if not 0 < ci_level < 100:
        raise InputError(f"ci_level must lie in (0, 100), got {ci_level}")
    p = (1 + ci_level / 100) / 2 if two_sided else ci_level / 100
    return float(norm.ppf(p))


@dataclass
class EstimateReport:
    point: float
    alpha: np.ndarray
    sigma_hat: float
    kappa: int
    spectrum: np.ndarray
    ci: tuple[float, float]
    ci_level: float
    pointwise: np.ndarray | None = None
    donors: list[int] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def ci_width(self) -> float:
        return self.ci[1] - self.ci[0]

    def to_dict(self) -> dict:
        out = {
            "point": self.point,
            "ci": [self.ci[0], self.ci[1]],
            "ci_level": self.ci_level,
            "alpha": self.alpha.tolist(),
            "sigma_hat": self.sigma_hat,
            "kappa": self.kappa,
            "spectrum": self.spectrum.tolist(),
            "donors": list(self.donors),
            "tests": self.diagnostics.get("tests", {}),
        }
        if self.pointwise is not None:
            out["pointwise"] = self.pointwise.tolist()
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def estimate_from_matrices(
    z_pre_n: np.ndarray,
    z_pre_I: np.ndarray,
    z_post_I: np.ndarray,
    kappa="auto",
    ci_level: float = 95.0,
    two_sided: bool = False,
    nbhd_size: int = 1,
) -> EstimateReport:
    z_pre_n = np.asarray(z_pre_n, dtype=float)
    t_pre, n_donors = z_pre_I.shape
    if t_pre == 0:
        raise EstimationInfeasible("no training measurements")
    if n_donors == 0:
        raise EstimationInfeasible("no donors")
    t_post = z_post_I.shape[0]
    if t_post == 0:
        raise EstimationInfeasible("no prediction measurements")

    sd = spectral_decomposition(z_pre_I)
    k = resolve_kappa(kappa, sd.singular_values, nbhd_size)
    alpha = svt_pinv(z_pre_I, k, sd) @ z_pre_n
    pointwise = z_post_I @ alpha
    point = float(np.ones(t_post) @ z_post_I @ alpha / t_post)
    resid = z_pre_n - z_pre_I @ alpha
    sigma_hat = float(np.linalg.norm(resid) / math.sqrt(t_pre))
    half = ci_multiplier(ci_level, two_sided) * sigma_hat * float(np.linalg.norm(alpha)) / math.sqrt(t_post)

    warnings = []
    energy = sd.singular_values**2
    leftover = float(energy[k:].sum() / energy.sum())
    if leftover > LEFTOVER_ENERGY_WARNING:
        warnings.append(
            f"{leftover:.1%} of spectral energy lies beyond kappa={k}; consider a larger kappa"
        )
    return EstimateReport(
        point=point,
        alpha=alpha,
        sigma_hat=sigma_hat,
        kappa=k,
        spectrum=sd.singular_values,
        ci=(point - half, point + half),
        ci_level=ci_level,
        pointwise=pointwise,
        diagnostics={"leftover_energy": leftover, "two_sided": two_sided},
        warnings=warnings,
    )


def estimate(
    z: ObservationPanel,
    ds: DonorSet,
    kappa="auto",
    ci_level: float = 95.0,
    two_sided: bool = False,
) -> EstimateReport:
    """Estimate the ego's average prediction-period outcome under the donor set's target.

    ``kappa`` is an integer, ``"knee"``, ``"universal"`` or ``"auto"`` (knee
    point, but never fewer components than the ego has neighbors).
    """
    z_pre_n, z_pre_I, z_post_I = donor_submatrices(z, ds)
    report = estimate_from_matrices(
        z_pre_n, z_pre_I, z_post_I, kappa, ci_level, two_sided, nbhd_size=len(ds.target_nbhd)
    )
    report.donors = ds.indices
    return report


def identification_oracle(mean_z_pre_I, mean_z_post_I, mean_z_pre_n, rcond: float = 1e-9) -> float:
    """Noiseless counterpart of the estimator using an exact pseudo-inverse.

    Inputs must be expected outcomes; the result equals the target estimand
    whenever the donors' factors span the ego's and the prediction-period
    row space lies inside the training-period one.
    """
    mean_z_post_I = np.asarray(mean_z_post_I, dtype=float)
    alpha = np.linalg.pinv(np.asarray(mean_z_pre_I, dtype=float), rcond=rcond) @ np.asarray(mean_z_pre_n)
    return float((mean_z_post_I @ alpha).mean())
