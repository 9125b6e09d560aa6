"""Donor discovery for an ego unit and a target neighborhood treatment.

A unit ``i != n`` donates to ego ``n`` when its neighborhood has the same
size and some permutation of its neighbors reproduces, row for row, the
ego neighborhood's training treatments and the target treatments in the
prediction period.  ``identity`` mode only tries the canonical alignment;
``exhaustive`` mode tries every permutation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, EmptyDonorSet, InputError
from .graph import NetworkGraph
from .panel import ObservationPanel, TreatmentPanel

__all__ = [
    "DonorSet",
    "MAX_EXHAUSTIVE_NEIGHBORS",
    "find_donors",
    "si_donors",
    "donor_submatrices",
    "check_donor_set",
]

MAX_EXHAUSTIVE_NEIGHBORS = 8


@dataclass(frozen=True)
class DonorSet:
    """Donors of ``ego`` for ``target_nbhd``.

    Each member is ``(i, perm)`` where ``perm[k]`` is the position in
    ``N(i)`` aligned with the k-th ego neighbor.
    """

    ego: int
    target_nbhd: tuple[int, ...]
    members: tuple[tuple[int, tuple[int, ...]], ...]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def subset(self, indices) -> DonorSet:
        keep = [self.members[k] for k in indices]
        return DonorSet(self.ego, self.target_nbhd, tuple(keep))


def _target(g: NetworkGraph, n: int, target_nbhd) -> np.ndarray:
    tgt = np.asarray(target_nbhd, dtype=np.int64).ravel()
    if tgt.shape[0] != len(g.neighbors(n)):
        raise InputError(
            f"target has length {tgt.shape[0]}, unit {n} has {len(g.neighbors(n))} neighbors"
        )
    return tgt


def find_donors(
    g: NetworkGraph,
    treatments: TreatmentPanel,
    n: int,
    target_nbhd,
    mode: str = "identity",
) -> DonorSet:
    """Return every donor of unit ``n`` for ``target_nbhd``.

    An empty result is not an error here; the estimator decides what to do
    with it.
    """
    if mode not in ("identity", "exhaustive"):
        raise InputError(f"unknown donor mode {mode!r}")
    tgt = _target(g, n, target_nbhd)
    ego_nb = np.asarray(g.neighbors(n))
    k = ego_nb.shape[0]
    a_pre = treatments.a_pre
    a_post = treatments.a_post
    ego_pre = a_pre[ego_nb]

    units, nbhds = g.units_with_nbhd_size(k)
    keep = units != n
    cand, nbhds = units[keep], nbhds[keep]
    if cand.size == 0:
        return DonorSet(n, tuple(int(x) for x in tgt), ())

    if mode == "identity":
        nb = nbhds
        ok = np.all(a_post[nb] == tgt, axis=1)
        ok &= np.all(a_pre[nb] == ego_pre, axis=(1, 2))
        ident = tuple(range(k))
        members = tuple((int(i), ident) for i in cand[ok])
        return DonorSet(n, tuple(int(x) for x in tgt), members)

    if k > MAX_EXHAUSTIVE_NEIGHBORS:
        raise CapabilityError(
            f"exhaustive permutation search supports at most {MAX_EXHAUSTIVE_NEIGHBORS} neighbors, got {k}"
        )
    # Rows as hashable keys: (training row, prediction label) per neighbor.
    ego_keys = [(ego_pre[p].tobytes(), int(tgt[p])) for p in range(k)]
    ego_sorted = sorted(ego_keys)
    members = []
    for i in cand:
        nb = g.adjacency[i]
        keys = [(a_pre[j].tobytes(), int(a_post[j])) for j in nb]
        if sorted(keys) != ego_sorted:
            continue
        for perm in itertools.permutations(range(k)):
            if all(keys[perm[p]] == ego_keys[p] for p in range(k)):
                members.append((int(i), tuple(perm)))
                break
    return DonorSet(n, tuple(int(x) for x in tgt), tuple(members))


def si_donors(treatments: TreatmentPanel, n: int, target_a: int) -> DonorSet:
    """Donors under the interference-free rule: own training row and own label only."""
    a_pre = treatments.a_pre
    same = np.all(a_pre == a_pre[n], axis=1) & (treatments.a_post == int(target_a))
    same[n] = False
    members = tuple((int(i), (0,)) for i in np.flatnonzero(same))
    return DonorSet(n, (int(target_a),), members)


def check_donor_set(g: NetworkGraph, treatments: TreatmentPanel, ds: DonorSet) -> None:
    """Raise ``AssertionError`` if any member violates the donor conditions."""
    ego_nb = g.neighbors(ds.ego)
    tgt = np.asarray(ds.target_nbhd)
    for i, perm in ds.members:
        assert i != ds.ego, "ego listed as its own donor"
        nb = g.neighbors(i)
        assert len(nb) == len(ego_nb), f"donor {i} neighborhood size differs"
        mapped = [nb[p] for p in perm]
        assert np.array_equal(treatments.a_pre[mapped], treatments.a_pre[list(ego_nb)]), i
        assert np.array_equal(treatments.a_post[mapped], tgt), i


def donor_submatrices(z: ObservationPanel, ds: DonorSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(z_pre_n, Z_pre_I, Z_post_I)`` with donor columns in member order."""
    if len(ds) == 0:
        raise EmptyDonorSet(f"unit {ds.ego} has no donors for target {list(ds.target_nbhd)}")
    idx = ds.indices
    return z.pre[:, ds.ego].copy(), z.pre[:, idx], z.post[:, idx]
