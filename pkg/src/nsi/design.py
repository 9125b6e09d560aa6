"""Training schedules built from a coloring of the two-hop graph.

Units sharing a color are at least three hops apart, so no neighborhood
ever holds two units with the same non-control treatment at once.  Colors
are handed out ``D - 1`` at a time; each group gets one period of
``t_bar`` identical columns in which its units receive treatments
``2..D`` and everyone else the control ``1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .graph import Coloring, NetworkGraph, greedy_color, two_hop
from .panel import TreatmentPanel

__all__ = [
    "DesignSchedule",
    "design_schedule",
    "tailored_design",
    "conflict_graph",
    "schedule_from_coloring",
    "random_prediction_treatments",
    "t_pre_bound",
]


@dataclass(frozen=True)
class DesignSchedule:
    a_pre: np.ndarray  # N x T_pre
    periods: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]  # (colors, columns)
    t_bar: int
    coloring: Coloring
    d_treatments: int
    r_bar: int

    @property
    def t_prime(self) -> int:
        return len(self.periods)

    @property
    def t_pre(self) -> int:
        return self.a_pre.shape[1]

    def panel(self, a_post, t_post: int, target=None) -> TreatmentPanel:
        return TreatmentPanel.from_parts(self.a_pre, a_post, t_post, self.d_treatments, target)

    def summary(self, max_degree: int | None = None) -> dict:
        out = {
            "num_colors": self.coloring.num_colors,
            "t_prime": self.t_prime,
            "t_bar": self.t_bar,
            "t_pre": self.t_pre,
        }
        if max_degree is not None:
            out["bound_rhs"] = t_pre_bound(self.r_bar, self.d_treatments, max_degree)
        return out


def t_pre_bound(r_bar: int, d_treatments: int, max_degree: int) -> float:
    """Upper bound ``r_bar * D * (d^2 + D) / (D - 1)`` on the schedule length."""
    d = max_degree
    return r_bar * d_treatments * (d * d + d_treatments) / (d_treatments - 1)


def schedule_from_coloring(
    coloring: Coloring, d_treatments: int, r_bar: int, t_bar: int | None = None
) -> DesignSchedule:
    if d_treatments < 2:
        raise InputError("the design needs at least two treatments")
    if r_bar < 1:
        raise InputError("r_bar must be at least 1")
    t_bar = r_bar * d_treatments if t_bar is None else int(t_bar)
    if t_bar < r_bar * d_treatments:
        raise InputError(f"t_bar={t_bar} must be at least r_bar * D = {r_bar * d_treatments}")
    group = d_treatments - 1
    t_prime = math.ceil(coloring.num_colors / group)
    colors = np.asarray(coloring.assignment) + 1  # 1-based color labels
    n_units = colors.shape[0]
    a_pre = np.ones((n_units, t_prime * t_bar), dtype=np.int64)
    periods = []
    for ell in range(t_prime):
        active = tuple(range(ell * group + 1, min((ell + 1) * group, coloring.num_colors) + 1))
        vec = np.where(np.isin(colors, active), colors % group + 2, 1)
        cols = tuple(range(ell * t_bar, (ell + 1) * t_bar))
        a_pre[:, ell * t_bar : (ell + 1) * t_bar] = vec[:, None]
        periods.append((tuple(c - 1 for c in active), cols))
    a_pre.setflags(write=False)
    return DesignSchedule(a_pre, tuple(periods), t_bar, coloring, d_treatments, r_bar)


def design_schedule(g: NetworkGraph, d_treatments: int, r_bar: int, t_bar: int | None = None) -> DesignSchedule:
    """Coloring-based schedule that passes the training-treatment test for every ego and target."""
    if d_treatments < 2:
        raise InputError("the design needs at least two treatments")
    return schedule_from_coloring(greedy_color(two_hop(g)), d_treatments, r_bar, t_bar)


def conflict_graph(g: NetworkGraph, target) -> NetworkGraph:
    """Two-hop graph keeping only pairs whose target treatments differ."""
    target = np.asarray(target)
    if target.shape != (g.n_units,):
        raise InputError("target must have one entry per unit")
    g2 = two_hop(g)
    edges = [(i, j) for i, j in g2.edges() if target[i] != target[j]]
    return NetworkGraph.from_edges(g.n_units, edges)


def tailored_design(
    g: NetworkGraph, d_treatments: int, r_bar: int, target, t_bar: int | None = None
) -> DesignSchedule:
    """Schedule colored on the conflict graph of one specific target assignment."""
    if d_treatments < 2:
        raise InputError("the design needs at least two treatments")
    return schedule_from_coloring(greedy_color(conflict_graph(g, target)), d_treatments, r_bar, t_bar)


def random_prediction_treatments(n_units: int, d_treatments: int, seed=None) -> np.ndarray:
    """I.i.d. uniform labels in ``1..D``."""
    rng = np.random.default_rng(seed)
    return rng.integers(1, d_treatments + 1, size=n_units)
