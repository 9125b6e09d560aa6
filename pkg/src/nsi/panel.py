"""Treatment and observation panels and the network latent-factor simulator.

Treatments are labelled ``1..D`` everywhere.  The observation matrix is laid
out time-major (``T x N``) while the treatment matrix is unit-major
(``N x T``), following the usual panel notation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import NetworkGraph

__all__ = [
    "TreatmentPanel",
    "ObservationPanel",
    "LatentFactorWorld",
    "SimConfig",
    "factor_bound",
    "draw_world",
    "mean_outcome",
    "stacked_unit_factor",
    "stacked_time_factor",
    "mean_matrix",
    "simulate",
    "true_estimand",
    "counterfactual_means",
]


@dataclass(frozen=True)
class TreatmentPanel:
    a_matrix: np.ndarray
    d_treatments: int
    t_pre: int
    target: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.a_matrix)
        if a.ndim != 2:
            raise InputError("treatment matrix must be two-dimensional (units x time)")
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.equal(np.mod(a, 1), 0)):
                raise InputError("treatments must be integers")
        a = a.astype(np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "a_matrix", a)
        if self.d_treatments < 1:
            raise InputError("d_treatments must be at least 1")
        if a.size and (a.min() < 1 or a.max() > self.d_treatments):
            raise InputError(f"treatments must lie in [1, {self.d_treatments}]")
        if not 0 <= self.t_pre <= a.shape[1]:
            raise InputError(f"t_pre={self.t_pre} outside [0, {a.shape[1]}]")
        post = a[:, self.t_pre :]
        if post.shape[1] and np.any(post != post[:, :1]):
            raise InputError("prediction-period treatments must be constant over time")
        if self.target is not None:
            tgt = np.asarray(self.target, dtype=np.int64)
            if tgt.shape != (a.shape[0],):
                raise InputError("target must have one entry per unit")
            if tgt.min() < 1 or tgt.max() > self.d_treatments:
                raise InputError(f"target treatments must lie in [1, {self.d_treatments}]")
            tgt.setflags(write=False)
            object.__setattr__(self, "target", tgt)

    @property
    def n_units(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_times(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def t_post(self) -> int:
        return self.n_times - self.t_pre

    @property
    def a_pre(self) -> np.ndarray:
        return self.a_matrix[:, : self.t_pre]

    @property
    def a_post(self) -> np.ndarray:
        """The prediction-period treatment vector (one label per unit)."""
        if self.t_post == 0:
            raise InputError("panel has no prediction period")
        return self.a_matrix[:, self.t_pre]

    @classmethod
    def from_parts(cls, a_pre, a_post, t_post: int, d_treatments: int, target=None) -> TreatmentPanel:
        a_pre = np.asarray(a_pre, dtype=np.int64)
        a_post = np.asarray(a_post, dtype=np.int64)
        a = np.hstack([a_pre, np.repeat(a_post[:, None], t_post, axis=1)])
        return cls(a, d_treatments, a_pre.shape[1], target)


@dataclass(frozen=True)
class ObservationPanel:
    """Observed outcomes ``z[t, n]`` with the training/prediction split."""

    z: np.ndarray
    t_pre: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 2:
            raise InputError("observation matrix must be two-dimensional (time x units)")
        if not 0 <= self.t_pre <= z.shape[0]:
            raise InputError(f"t_pre={self.t_pre} outside [0, {z.shape[0]}]")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n_units(self) -> int:
        return self.z.shape[1]

    @property
    def t_post(self) -> int:
        return self.z.shape[0] - self.t_pre

    @property
    def pre(self) -> np.ndarray:
        return self.z[: self.t_pre]

    @property
    def post(self) -> np.ndarray:
        return self.z[self.t_pre :]

    def check_against(self, treatments: TreatmentPanel) -> None:
        if self.z.shape != (treatments.n_times, treatments.n_units) or self.t_pre != treatments.t_pre:
            raise InputError(
                f"observation panel {self.z.shape} (t_pre={self.t_pre}) does not match treatments "
                f"{treatments.a_matrix.shape[::-1]} (t_pre={treatments.t_pre})"
            )


@dataclass(frozen=True)
class LatentFactorWorld:
    """Ground-truth factors of the network latent-factor model.

    ``u[n]`` has shape ``(|N(n)|, r)``; row ``k`` is the factor of the pair
    (k-th neighbor of n, n).  ``w`` has shape ``(T, D, r)`` with treatment
    ``a`` stored at index ``a - 1``.
    """

    rank: int
    u: tuple[np.ndarray, ...]
    w: np.ndarray
    noise_std: float = 0.0
    seed: int | None = None

    def u_pair(self, g: NetworkGraph, j: int, n: int) -> np.ndarray:
        nb = g.neighbors(n)
        try:
            return self.u[n][nb.index(j)]
        except ValueError:
            raise InputError(f"unit {j} is not a neighbor of {n}") from None


@dataclass(frozen=True)
class SimConfig:
    rank: int = 2
    noise_std: float = math.sqrt(0.1)
    seed: int | None = 0
    w_process: str = "random_walk"
    # "neighborhood": 1/sqrt(r(d+1)) as in the simulation protocol;
    # "degree": 1/sqrt(r d) as in the bounded-factor generative example.
    factor_scale: str = "neighborhood"
    noise_kind: str = "gaussian"

    def __post_init__(self):
        if self.rank < 1:
            raise InputError("rank must be at least 1")
        if self.noise_std < 0:
            raise InputError("noise_std must be non-negative")
        if self.w_process not in ("random_walk", "shared_walk", "iid"):
            raise InputError(f"unknown w_process {self.w_process!r}")
        if self.factor_scale not in ("neighborhood", "degree"):
            raise InputError(f"unknown factor_scale {self.factor_scale!r}")
        if self.noise_kind not in ("gaussian", "uniform", "rademacher"):
            raise InputError(f"unknown noise_kind {self.noise_kind!r}")


def factor_bound(rank: int, degree: int, scale: str = "neighborhood") -> float:
    denom = rank * (degree + 1) if scale == "neighborhood" else rank * max(degree, 1)
    return 1.0 / math.sqrt(denom)


def draw_world(g: NetworkGraph, n_times: int, d_treatments: int, cfg: SimConfig, rng) -> LatentFactorWorld:
    r = cfg.rank
    b = factor_bound(r, g.max_degree, cfg.factor_scale)
    u = tuple(rng.uniform(-b, b, size=(len(g.adjacency[n]), r)) for n in range(g.n_units))
    if cfg.w_process == "iid":
        w = rng.uniform(-b, b, size=(n_times, d_treatments, r))
    elif cfg.w_process == "random_walk":
        w = np.cumsum(rng.uniform(-b, b, size=(n_times, d_treatments, r)), axis=0)
    else:
        # One step per time shared by every treatment: treatments keep a
        # fixed offset from each other while the common level wanders.
        start = rng.uniform(-b, b, size=(1, d_treatments, r))
        steps = rng.uniform(-b, b, size=(n_times - 1, 1, r))
        w = start + np.concatenate([np.zeros((1, 1, r)), np.cumsum(steps, axis=0)])
    for arr in u:
        arr.setflags(write=False)
    w.setflags(write=False)
    return LatentFactorWorld(r, u, w, cfg.noise_std, cfg.seed)


def _check_nbhd(g: NetworkGraph, n: int, a_nbhd) -> np.ndarray:
    a = np.asarray(a_nbhd, dtype=np.int64).ravel()
    if a.shape[0] != len(g.neighbors(n)):
        raise InputError(
            f"treatment vector has length {a.shape[0]}, unit {n} has {len(g.neighbors(n))} neighbors"
        )
    return a


def mean_outcome(world: LatentFactorWorld, g: NetworkGraph, t: int, n: int, a_nbhd) -> float:
    """Noiseless outcome: sum over neighbors j of <u_{j,n}, w_{t, a_j}>."""
    a = _check_nbhd(g, n, a_nbhd)
    total = 0.0
    for k in range(a.shape[0]):
        total += float(world.u[n][k] @ world.w[t, a[k] - 1])
    return total


def stacked_unit_factor(world: LatentFactorWorld, g: NetworkGraph, n: int) -> np.ndarray:
    """Network-adjusted unit factor: u_{N_1(n),n}, ..., u_{N_K(n),n} concatenated."""
    return np.concatenate([world.u_pair(g, j, n) for j in g.neighbors(n)])


def stacked_time_factor(world: LatentFactorWorld, g: NetworkGraph, t: int, n: int, a_nbhd) -> np.ndarray:
    a = _check_nbhd(g, n, a_nbhd)
    return np.concatenate([world.w[t, ak - 1] for ak in a])


def counterfactual_means(world: LatentFactorWorld, g: NetworkGraph, n: int, a_nbhd, times=None) -> np.ndarray:
    """Noiseless outcomes of unit ``n`` under ``a_nbhd`` at each of ``times``."""
    a = _check_nbhd(g, n, a_nbhd)
    times = np.arange(world.w.shape[0]) if times is None else np.asarray(times)
    # w[times, a_k - 1] -> (len(times), K, r)
    w = world.w[times][:, a - 1, :]
    return np.einsum("tkr,kr->t", w, world.u[n])


def mean_matrix(world: LatentFactorWorld, g: NetworkGraph, treatments: TreatmentPanel) -> np.ndarray:
    """``T x N`` matrix of noiseless outcomes under the applied treatments."""
    a = treatments.a_matrix
    n_times = a.shape[1]
    out = np.empty((n_times, g.n_units))
    t_idx = np.arange(n_times)[:, None]
    for n in range(g.n_units):
        nb = np.asarray(g.adjacency[n])
        w = world.w[t_idx, a[nb].T - 1]  # (T, K, r)
        out[:, n] = np.einsum("tkr,kr->t", w, world.u[n])
    return out


def _noise(rng, kind: str, std: float, shape) -> np.ndarray:
    if kind == "gaussian":
        return rng.normal(0.0, std, size=shape)
    if kind == "uniform":
        half = std * math.sqrt(3.0)
        return rng.uniform(-half, half, size=shape)
    return std * rng.choice([-1.0, 1.0], size=shape)


def simulate(
    g: NetworkGraph, treatments: TreatmentPanel, cfg: SimConfig, rng=None
) -> tuple[ObservationPanel, LatentFactorWorld]:
    """Draw a latent-factor world and the outcomes observed under ``treatments``.

    Factors are drawn first, then noise, from a generator seeded with
    ``cfg.seed`` unless ``rng`` is supplied.
    """
    if treatments.n_units != g.n_units:
        raise InputError(f"treatments cover {treatments.n_units} units, graph has {g.n_units}")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    world = draw_world(g, treatments.n_times, treatments.d_treatments, cfg, rng)
    mean = mean_matrix(world, g, treatments)
    if cfg.noise_std > 0:
        mean = mean + _noise(rng, cfg.noise_kind, cfg.noise_std, mean.shape)
    return ObservationPanel(mean, treatments.t_pre), world


def true_estimand(world: LatentFactorWorld, g: NetworkGraph, treatments: TreatmentPanel, n: int, target_nbhd) -> float:
    """Average noiseless outcome of ``n`` under ``target_nbhd`` over the prediction period."""
    if treatments.t_post == 0:
        raise InputError("panel has no prediction period")
    times = np.arange(treatments.t_pre, treatments.n_times)
    return float(counterfactual_means(world, g, n, target_nbhd, times).mean())
