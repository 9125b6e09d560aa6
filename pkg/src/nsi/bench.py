"""Seeded simulation studies comparing NSI with SI and a donor-average baseline.

Each simulation draws a fresh latent-factor world on a fixed regular graph,
assigns training treatments (coloring design or constant random labels),
draws prediction treatments uniformly, and scores every estimator on a
random sample of ego units and target neighborhood treatments.  Errors are
accumulated as plain sums so per-simulation results merge in any order.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .design import design_schedule
from .donors import DonorSet, find_donors, si_donors
from .errors import EmptyDonorSet, EstimationInfeasible, InputError
from .estimator import EstimateReport, estimate
from .graph import make_regular_graph, NetworkGraph
from .panel import ObservationPanel, SimConfig, TreatmentPanel, counterfactual_means, simulate

__all__ = [
    "ESTIMATORS",
    "MAX_TARGETS",
    "BenchConfig",
    "EstimatorStats",
    "BenchResult",
    "si_estimate",
    "baseline_estimate",
    "enumerate_targets",
    "build_sim",
    "run_bench",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("nsi", "si", "baseline")
MAX_TARGETS = 64


@dataclass(frozen=True)
class BenchConfig:
    graph_kind: str = "ring"
    n_units: int = 1000
    degree: int = 2
    rank: int = 2
    noise_std: float = math.sqrt(0.1)
    t_pre: int = 150
    t_post: int = 50
    d_treatments: int = 2
    n_sims: int = 200
    n_eval_units: int = 50
    estimators: tuple[str, ...] = ESTIMATORS
    # "design": coloring schedule stretched to fit t_pre; "random": one
    # random label per unit held for the whole training period.
    training: str = "design"
    r_bar: int = 2
    # "all": every neighborhood target (capped) under random prediction
    # labels; "synthetic_control": prediction labels equal the training ones
    # and the target is the neighborhood's own assignment.
    targets: str = "all"
    max_targets: int = MAX_TARGETS
    kappa_policy: str = "knee"
    # Estimates whose kappa falls below these floors are discarded.
    # None means |N(n)| for NSI.
    nsi_kappa_min: int | None = None
    si_kappa_min: int = 1
    donor_mode: str = "identity"
    subsample: bool = False
    ci_level: float = 95.0
    two_sided: bool = False
    w_process: str = "random_walk"
    factor_scale: str = "neighborhood"
    noise_kind: str = "gaussian"
    seed: int = 0
    n_workers: int = 1

    def __post_init__(self):
        if self.n_sims < 1:
            raise InputError("n_sims must be at least 1")
        if not 1 <= self.n_eval_units <= self.n_units:
            raise InputError("n_eval_units must lie in [1, n_units]")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InputError(f"unknown estimators {sorted(unknown)}")
        if self.training not in ("design", "random"):
            raise InputError(f"unknown training scheme {self.training!r}")
        if self.targets not in ("all", "synthetic_control"):
            raise InputError(f"unknown target scheme {self.targets!r}")
        if self.t_pre < 1 or self.t_post < 1:
            raise InputError("t_pre and t_post must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> BenchConfig:
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown bench config keys {sorted(extra)}")
        d = dict(d)
        if "estimators" in d:
            d["estimators"] = tuple(d["estimators"])
        return cls(**d)

    def sim_config(self, seed) -> SimConfig:
        return SimConfig(
            rank=self.rank,
            noise_std=self.noise_std,
            seed=seed,
            w_process=self.w_process,
            factor_scale=self.factor_scale,
            noise_kind=self.noise_kind,
        )


@dataclass
class EstimatorStats:
    """Running sums for one estimator; merge by addition."""

    n_estimates: int = 0
    n_points: int = 0
    sq_err_points: float = 0.0
    truth_points: float = 0.0
    truth_sq_points: float = 0.0
    sq_err_estimand: float = 0.0
    truth_estimand: float = 0.0
    truth_sq_estimand: float = 0.0
    donor_total: int = 0
    covered: int = 0
    excluded: Counter = field(default_factory=Counter)
    kappas: Counter = field(default_factory=Counter)

    def add(self, est: float, pointwise: np.ndarray, truth_t: np.ndarray, n_donors: int) -> None:
        theta = float(truth_t.mean())
        self.n_estimates += 1
        self.n_points += truth_t.size
        self.sq_err_points += float(np.sum((pointwise - truth_t) ** 2))
        self.truth_points += float(truth_t.sum())
        self.truth_sq_points += float(np.sum(truth_t**2))
        self.sq_err_estimand += (est - theta) ** 2
        self.truth_estimand += theta
        self.truth_sq_estimand += theta**2
        self.donor_total += n_donors

    def merge(self, other: EstimatorStats) -> None:
        for name in (
            "n_estimates", "n_points", "sq_err_points", "truth_points", "truth_sq_points",
            "sq_err_estimand", "truth_estimand", "truth_sq_estimand", "donor_total", "covered",
        ):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.excluded.update(other.excluded)
        self.kappas.update(other.kappas)

    @staticmethod
    def _r2(sse, total, total_sq, count):
        sst = total_sq - total * total / count
        return 1.0 - sse / sst if sst > 0 else float("nan")

    @property
    def mse(self) -> float:
        """Mean squared error of per-measurement predictions over the prediction period."""
        return self.sq_err_points / self.n_points if self.n_points else float("nan")

    @property
    def r_squared(self) -> float:
        if not self.n_points:
            return float("nan")
        return self._r2(self.sq_err_points, self.truth_points, self.truth_sq_points, self.n_points)

    @property
    def mse_estimand(self) -> float:
        return self.sq_err_estimand / self.n_estimates if self.n_estimates else float("nan")

    @property
    def r_squared_estimand(self) -> float:
        if not self.n_estimates:
            return float("nan")
        return self._r2(self.sq_err_estimand, self.truth_estimand, self.truth_sq_estimand, self.n_estimates)

    @property
    def mean_donor_count(self) -> float:
        return self.donor_total / self.n_estimates if self.n_estimates else float("nan")

    @property
    def coverage(self) -> float:
        return self.covered / self.n_estimates if self.n_estimates else float("nan")

    def summary(self) -> dict:
        return {
            "mse": self.mse,
            "r_squared": self.r_squared,
            "mse_estimand": self.mse_estimand,
            "r_squared_estimand": self.r_squared_estimand,
            "mean_donor_count": self.mean_donor_count,
            "coverage": self.coverage,
            "n_estimates": self.n_estimates,
            "excluded": dict(self.excluded),
            "kappa_counts": {str(k): v for k, v in sorted(self.kappas.items())},
        }


@dataclass
class BenchResult:
    config: BenchConfig
    stats: dict[str, EstimatorStats]
    residuals: dict[str, np.ndarray]
    effective_t_pre: int
    # one pooled MSE per simulation, in seed order
    per_sim_mse: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> EstimatorStats:
        return self.stats[name]

    @property
    def coverage(self) -> float:
        return self.stats["nsi"].coverage if "nsi" in self.stats else float("nan")

    def to_dict(self, include_residuals: bool = False) -> dict:
        out = {
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.config).items()},
            "effective_t_pre": self.effective_t_pre,
            "estimators": {k: s.summary() for k, s in self.stats.items()},
            "coverage": self.coverage,
        }
        if include_residuals:
            out["residuals"] = {k: v.tolist() for k, v in self.residuals.items()}
        return out


def si_estimate(
    z: ObservationPanel,
    treatments: TreatmentPanel,
    n: int,
    target_a: int,
    kappa="knee",
    ci_level: float = 95.0,
    two_sided: bool = False,
) -> EstimateReport:
    """Synthetic interventions without interference: donors match the ego's own labels only."""
    return estimate(z, si_donors(treatments, n, target_a), kappa, ci_level, two_sided)


def baseline_estimate(z: ObservationPanel, ds: DonorSet) -> float:
    """Unweighted mean of the donors' prediction-period outcomes."""
    if len(ds) == 0:
        raise EmptyDonorSet(f"unit {ds.ego} has no donors")
    return float(z.post[:, ds.indices].mean())


def enumerate_targets(nbhd_size: int, d_treatments: int, cap: int, rng) -> list[tuple[int, ...]]:
    """All ``D**K`` neighborhood targets, or ``cap`` distinct random ones when there are more."""
    total = d_treatments**nbhd_size
    if total <= cap:
        return list(itertools.product(range(1, d_treatments + 1), repeat=nbhd_size))
    picks = rng.choice(total, size=cap, replace=False)
    out = []
    for code in sorted(int(p) for p in picks):
        digits = []
        for _ in range(nbhd_size):
            code, rem = divmod(code, d_treatments)
            digits.append(rem + 1)
        out.append(tuple(reversed(digits)))
    return out


def _graph(cfg: BenchConfig) -> NetworkGraph:
    return make_regular_graph(cfg.graph_kind, cfg.n_units, cfg.degree)


def _training(cfg: BenchConfig, g: NetworkGraph, rng) -> np.ndarray:
    if cfg.training == "random":
        labels = rng.integers(1, cfg.d_treatments + 1, size=g.n_units)
        return np.repeat(labels[:, None], cfg.t_pre, axis=1)
    base = design_schedule(g, cfg.d_treatments, cfg.r_bar)
    t_bar = cfg.t_pre // base.t_prime
    if t_bar < cfg.r_bar * cfg.d_treatments:
        raise InputError(
            f"t_pre={cfg.t_pre} is too short for the design: needs at least {base.t_pre}"
        )
    return np.array(design_schedule(g, cfg.d_treatments, cfg.r_bar, t_bar).a_pre)


def build_sim(cfg: BenchConfig, g: NetworkGraph, rng):
    """One simulated panel: ``(treatments, observations, world)``."""
    a_pre = _training(cfg, g, rng)
    if cfg.targets == "synthetic_control":
        # prediction period keeps the last training assignment
        a_post = a_pre[:, -1].copy()
    else:
        a_post = rng.integers(1, cfg.d_treatments + 1, size=g.n_units)
    tp = TreatmentPanel.from_parts(a_pre, a_post, cfg.t_post, cfg.d_treatments)
    z, world = simulate(g, tp, cfg.sim_config(None), rng=rng)
    return tp, z, world


def _one_estimate(stats, residuals, name, report_or_value, truth_t, n_donors, kappa_min=None):
    if isinstance(report_or_value, EstimateReport):
        rep = report_or_value
        stats.kappas[rep.kappa] += 1
        if kappa_min is not None and rep.kappa < kappa_min:
            stats.excluded["kappa_below_floor"] += 1
            return
        stats.add(rep.point, rep.pointwise, truth_t, n_donors)
        theta = float(truth_t.mean())
        if rep.ci[0] <= theta <= rep.ci[1]:
            stats.covered += 1
        residuals.append(rep.point - theta)
    else:
        value = float(report_or_value)
        stats.add(value, np.full(truth_t.shape, value), truth_t, n_donors)
        residuals.append(value - float(truth_t.mean()))


def _run_sim(cfg: BenchConfig, seed_seq) -> tuple[dict, dict, int]:
    rng = np.random.default_rng(seed_seq)
    g = _graph(cfg)
    tp, z, world = build_sim(cfg, g, rng)
    stats = {name: EstimatorStats() for name in cfg.estimators}
    resid: dict[str, list[float]] = {name: [] for name in cfg.estimators}
    post_times = np.arange(tp.t_pre, tp.n_times)
    units = rng.choice(g.n_units, size=cfg.n_eval_units, replace=False)
    cap = max(int(math.isqrt(g.n_units)), 1)

    for n in (int(u) for u in units):
        nb = g.neighbors(n)
        ego_pos = nb.index(n)
        if cfg.targets == "all":
            targets = enumerate_targets(len(nb), cfg.d_treatments, cfg.max_targets, rng)
        else:
            targets = [tuple(int(x) for x in tp.a_pre[list(nb), 0])]
        nsi_floor = len(nb) if cfg.nsi_kappa_min is None else cfg.nsi_kappa_min
        for tgt in targets:
            truth_t = counterfactual_means(world, g, n, tgt, post_times)
            ds = find_donors(g, tp, n, tgt, cfg.donor_mode)
            if cfg.subsample and len(ds) > cap:
                ds = ds.subset(sorted(rng.choice(len(ds), size=cap, replace=False)))
            for name in cfg.estimators:
                try:
                    if name == "nsi":
                        rep = estimate(z, ds, cfg.kappa_policy, cfg.ci_level, cfg.two_sided)
                        _one_estimate(stats[name], resid[name], name, rep, truth_t, len(ds), nsi_floor)
                    elif name == "si":
                        sds = si_donors(tp, n, tgt[ego_pos])
                        rep = estimate(z, sds, cfg.kappa_policy, cfg.ci_level, cfg.two_sided)
                        _one_estimate(stats[name], resid[name], name, rep, truth_t, len(sds), cfg.si_kappa_min)
                    else:
                        val = baseline_estimate(z, ds)
                        _one_estimate(stats[name], resid[name], name, val, truth_t, len(ds))
                except EmptyDonorSet:
                    stats[name].excluded["no_donors"] += 1
                except EstimationInfeasible:
                    stats[name].excluded["degenerate"] += 1
    return stats, {k: np.asarray(v) for k, v in resid.items()}, tp.t_pre


def run_bench(cfg: BenchConfig) -> BenchResult:
    """Run ``cfg.n_sims`` independent simulations and pool their scores.

    Simulation ``s`` uses the ``s``-th child of ``SeedSequence(cfg.seed)``,
    so results do not depend on worker count or completion order.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_sims)
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(cfg.n_workers) as pool:
            outs = list(pool.map(_run_sim, [cfg] * cfg.n_sims, children))
    else:
        outs = [_run_sim(cfg, c) for c in children]
    stats = {name: EstimatorStats() for name in cfg.estimators}
    residuals: dict[str, list[np.ndarray]] = {name: [] for name in cfg.estimators}
    per_sim: dict[str, list[float]] = {name: [] for name in cfg.estimators}
    t_pre = cfg.t_pre
    for s_stats, s_resid, t_pre in outs:
        for name in cfg.estimators:
            stats[name].merge(s_stats[name])
            residuals[name].append(s_resid[name])
            per_sim[name].append(s_stats[name].mse)
    log.info("bench finished: %d sims, effective t_pre=%d", cfg.n_sims, t_pre)
    return BenchResult(
        cfg,
        stats,
        {k: np.concatenate(v) if v else np.empty(0) for k, v in residuals.items()},
        t_pre,
        {k: np.asarray(v) for k, v in per_sim.items()},
    )
