"""Flat-kernel mean-shift over the 2-D embedding, plus camp naming.

Every point is shifted independently to the mean of its in-bandwidth
neighborhood until convergence; converged positions within the merge
radius collapse into one mode. Small modes are relabeled UNCLUSTERED so
the outcome mirrors the two-main-camps-plus-residue structure the stance
pipeline expects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from .errors import DataError, NumericError
from .graph import UserRetweetMatrix

UNCLUSTERED = "UNCLUSTERED"
UNCLUSTERED_LABEL = -1


def estimate_bandwidth(
    points, quantile: float, max_points: int = 2000, seed: int = 0
) -> float:
    """The given quantile of pairwise Euclidean distances.

    Populations above ``max_points`` are subsampled (seeded) before the
    quadratic pairwise computation.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 2:
        raise ValueError("bandwidth estimation needs at least 2 points")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    if points.shape[0] > max_points:
        chosen = np.random.RandomState(seed).permutation(points.shape[0])[:max_points]
        points = points[chosen]
    distances = pdist(points)
    bandwidth = float(np.quantile(distances, quantile))
    if bandwidth <= 0.0:
        raise NumericError("zero bandwidth: points are identical at this quantile")
    return bandwidth


class FlatMeanShift(BaseEstimator, ClusterMixin):
    """Mean-shift clustering with a flat (uniform) kernel.

    Parameters
    ----------
    bandwidth : float or "auto"
        Kernel radius; "auto" uses ``auto_quantile`` of pairwise distances.
    auto_quantile : float
        Quantile for automatic bandwidth selection.
    max_iterations : int
        Per-point shift budget; stragglers are assigned to the nearest
        mode and counted in ``n_unconverged_``.
    convergence_tol : float
        A point is converged once its displacement drops below this.
    mode_merge_radius : float or None
        Converged positions closer than this merge into one mode
        (defaults to the bandwidth).
    min_cluster_fraction : float
        Clusters smaller than this fraction of the points are dissolved
        into the unclustered label -1.
    random_state : int
        Seed for the bandwidth-estimation subsample.

    Attributes: ``labels_`` (-1 = unclustered), ``cluster_centers_``,
    ``cluster_sizes_``, ``bandwidth_``, ``n_unconverged_``.
    """

    def __init__(
        self,
        bandwidth: float | str = "auto",
        auto_quantile: float = 0.1,
        max_iterations: int = 300,
        convergence_tol: float = 1e-4,
        mode_merge_radius: float | None = None,
        min_cluster_fraction: float = 0.01,
        random_state: int = 0,
    ):
        self.bandwidth = bandwidth
        self.auto_quantile = auto_quantile
        self.max_iterations = max_iterations
        self.convergence_tol = convergence_tol
        self.mode_merge_radius = mode_merge_radius
        self.min_cluster_fraction = min_cluster_fraction
        self.random_state = random_state

    def _resolve_bandwidth(self, X) -> float:
        if self.bandwidth == "auto":
            return estimate_bandwidth(
                X, self.auto_quantile, seed=self.random_state
            )
        bandwidth = float(self.bandwidth)
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        return bandwidth

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not np.all(np.isfinite(X)):
            raise ValueError("points must be finite")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if not 0.0 <= self.min_cluster_fraction < 1.0:
            raise ValueError("min_cluster_fraction must lie in [0, 1)")
        n = X.shape[0]

        if n == 1:
            self.bandwidth_ = (
                float(self.bandwidth) if self.bandwidth != "auto" else 1.0
            )
            self.labels_ = np.zeros(1, dtype=np.int64)
            self.cluster_centers_ = X.copy()
            self.cluster_sizes_ = [1]
            self.n_unconverged_ = 0
            return self

        bandwidth = self._resolve_bandwidth(X)
        merge_radius = (
            bandwidth if self.mode_merge_radius is None else float(self.mode_merge_radius)
        )

        shifted, converged = _shift_points(
            X, bandwidth, self.convergence_tol, self.max_iterations
        )
        labels, centers, sizes = _merge_modes(
            X, shifted, converged, bandwidth, merge_radius
        )

        # dissolve sub-threshold clusters, then order survivors by size
        min_size = self.min_cluster_fraction * n
        keep = [c for c, size in enumerate(sizes) if size >= min_size]
        order = sorted(
            keep, key=lambda c: (-sizes[c], centers[c][0], centers[c][1])
        )
        remap = {old: new for new, old in enumerate(order)}
        final = np.full(n, UNCLUSTERED_LABEL, dtype=np.int64)
        for i in range(n):
            final[i] = remap.get(int(labels[i]), UNCLUSTERED_LABEL)

        self.bandwidth_ = bandwidth
        self.labels_ = final
        self.cluster_centers_ = (
            np.vstack([centers[c] for c in order]) if order else np.empty((0, 2))
        )
        self.cluster_sizes_ = [int((final == c).sum()) for c in range(len(order))]
        self.n_unconverged_ = int((~converged).sum())
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


def _shift_points(X, bandwidth, tol, max_iterations):
    """Iterate every point to its local plateau; returns (positions, converged)."""
    n = X.shape[0]
    positions = X.copy()
    converged = np.zeros(n, dtype=bool)
    active = np.arange(n)
    for _ in range(max_iterations):
        dist = cdist(positions[active], X)
        inside = dist <= bandwidth
        weights = inside.sum(axis=1).astype(np.float64)
        updated = (inside @ X) / weights[:, None]
        displacement = np.linalg.norm(updated - positions[active], axis=1)
        positions[active] = updated
        done = displacement < tol
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    return positions, converged


def _merge_modes(X, shifted, converged, bandwidth, merge_radius):
    """Group converged positions into modes and assign every point.

    Candidates are ranked by neighborhood density (ties by coordinates) so
    the grouping is independent of the input order; a candidate joins the
    first accepted mode within the merge radius. Mode coordinates are the
    means of their members' converged positions. Unconverged points join
    the nearest mode afterwards.
    """
    n = X.shape[0]
    candidate_idx = np.flatnonzero(converged)
    if candidate_idx.size == 0:
        candidate_idx = np.arange(n)  # nothing converged: degrade gracefully

    cand_pos = shifted[candidate_idx]
    intensity = (cdist(cand_pos, X) <= bandwidth).sum(axis=1)
    order = np.lexsort((cand_pos[:, 1], cand_pos[:, 0], -intensity))

    seeds: list[np.ndarray] = []
    group_of_candidate = np.full(candidate_idx.size, -1, dtype=np.int64)
    for pos in order:
        point = cand_pos[pos]
        assigned = -1
        for g, seed in enumerate(seeds):
            if np.linalg.norm(point - seed) <= merge_radius:
                assigned = g
                break
        if assigned < 0:
            seeds.append(point.copy())
            assigned = len(seeds) - 1
        group_of_candidate[pos] = assigned

    labels = np.full(n, -1, dtype=np.int64)
    labels[candidate_idx] = group_of_candidate
    centers = [
        cand_pos[group_of_candidate == g].mean(axis=0) for g in range(len(seeds))
    ]
    center_arr = np.vstack(centers)

    stragglers = np.flatnonzero(labels < 0)
    if stragglers.size:
        nearest = cdist(shifted[stragglers], center_arr).argmin(axis=1)
        labels[stragglers] = nearest

    sizes = [int((labels == g).sum()) for g in range(len(seeds))]
    return labels, centers, sizes


# ---------------------------------------------------------------------------
# stance assignment over matrix users


@dataclass
class StanceAssignment:
    """Per-user cluster label plus the mode geometry.

    ``labels`` holds cluster indices ordered by descending size, -1 for
    unclustered users. ``camp_names`` appears after seed-based naming and
    aligns with the cluster indices.
    """

    users: list[str]
    labels: np.ndarray
    modes: np.ndarray
    sizes: list[int]
    n_unconverged: int = 0
    camp_names: list[str] | None = None

    @classmethod
    def from_label_map(
        cls, mapping: Mapping[str, str], camp_names: Sequence[str]
    ) -> "StanceAssignment":
        """Rebuild a named assignment from persisted user -> label pairs.

        Mode coordinates are not recoverable from the label file and come
        back as NaN placeholders.
        """
        names = list(camp_names)
        users = list(mapping)
        labels = np.array(
            [
                names.index(label) if label in names else UNCLUSTERED_LABEL
                for label in mapping.values()
            ],
            dtype=np.int64,
        )
        sizes = [int((labels == i).sum()) for i in range(len(names))]
        return cls(
            users=users,
            labels=labels,
            modes=np.full((len(names), 2), np.nan),
            sizes=sizes,
            camp_names=names,
        )

    @property
    def n_clusters(self) -> int:
        return len(self.sizes)

    @property
    def n_unclustered(self) -> int:
        return int((self.labels == UNCLUSTERED_LABEL).sum())

    def display_label(self, index: int) -> str:
        label = int(self.labels[index])
        if label == UNCLUSTERED_LABEL:
            return UNCLUSTERED
        if self.camp_names is not None:
            return self.camp_names[label]
        return f"cluster_{label}"

    def user_to_camp(self) -> dict[str, str]:
        """Map of clustered users to camp names (requires naming)."""
        if self.camp_names is None:
            raise ValueError("assignment has no camp names yet")
        return {
            user: self.camp_names[int(label)]
            for user, label in zip(self.users, self.labels)
            if label != UNCLUSTERED_LABEL
        }


def assign_stances(
    users: Sequence[str],
    points: np.ndarray,
    *,
    bandwidth: float | str = "auto",
    auto_quantile: float = 0.1,
    max_iterations: int = 300,
    convergence_tol: float = 1e-4,
    mode_merge_radius: float | None = None,
    min_cluster_fraction: float = 0.01,
    seed: int = 0,
) -> StanceAssignment:
    """Cluster embedded users with FlatMeanShift into a StanceAssignment."""
    if len(users) != np.asarray(points).shape[0]:
        raise ValueError("user list and points disagree")
    model = FlatMeanShift(
        bandwidth=bandwidth,
        auto_quantile=auto_quantile,
        max_iterations=max_iterations,
        convergence_tol=convergence_tol,
        mode_merge_radius=mode_merge_radius,
        min_cluster_fraction=min_cluster_fraction,
        random_state=seed,
    ).fit(points)
    return StanceAssignment(
        users=list(users),
        labels=model.labels_,
        modes=model.cluster_centers_,
        sizes=model.cluster_sizes_,
        n_unconverged=model.n_unconverged_,
    )


def label_clusters_by_seeds(
    assignment: StanceAssignment,
    matrix: UserRetweetMatrix,
    seed_accounts: Mapping[str, Sequence[str]],
) -> StanceAssignment:
    """Name the two major clusters by their retweets of per-camp seed accounts.

    Each of the two largest clusters takes the camp whose seeds receive the
    larger share of that cluster's seed-directed retweets. Any further
    clusters are relabeled UNCLUSTERED. Raises DataError when seeds are
    missing from the matrix, when a cluster shows no preference, or when
    both clusters map to the same camp.
    """
    camps = list(seed_accounts)
    if len(camps) != 2:
        raise ValueError("exactly two seed camps are required")
    seed_sets = {camp: list(dict.fromkeys(seed_accounts[camp])) for camp in camps}
    if not all(seed_sets[c] for c in camps):
        raise ValueError("seed account lists must be non-empty")
    if set(seed_sets[camps[0]]) & set(seed_sets[camps[1]]):
        raise ValueError("seed account lists must be disjoint")
    if assignment.users != matrix.users:
        raise DataError("assignment and matrix cover different user sets")
    if assignment.n_clusters < 2:
        raise DataError(
            f"expected two major clusters, found {assignment.n_clusters}"
        )

    account_index = {a: i for i, a in enumerate(matrix.accounts)}
    missing = [
        s for camp in camps for s in seed_sets[camp] if s not in account_index
    ]
    if missing:
        raise DataError(f"seed accounts absent from matrix: {', '.join(missing)}")

    counts = matrix.counts
    chosen: list[str] = []
    for cluster in (0, 1):
        rows = np.flatnonzero(assignment.labels == cluster)
        shares = {}
        for camp in camps:
            cols = [account_index[s] for s in seed_sets[camp]]
            shares[camp] = int(counts[rows][:, cols].sum())
        total = sum(shares.values())
        if total == 0 or shares[camps[0]] == shares[camps[1]]:
            raise DataError(
                f"cluster {cluster} shows no seed preference "
                f"({shares[camps[0]]} vs {shares[camps[1]]})"
            )
        chosen.append(max(camps, key=lambda c: shares[c]))
    if chosen[0] == chosen[1]:
        raise DataError(
            f"ambiguous naming: both major clusters lean {chosen[0]}"
        )

    labels = assignment.labels.copy()
    labels[labels >= 2] = UNCLUSTERED_LABEL  # demote any minor clusters
    return StanceAssignment(
        users=assignment.users,
        labels=labels,
        modes=assignment.modes[:2].copy(),
        sizes=assignment.sizes[:2],
        n_unconverged=assignment.n_unconverged,
        camp_names=chosen,
    )


# ---------------------------------------------------------------------------
# persistence


def save_assignment(assignment: StanceAssignment, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for i, user in enumerate(assignment.users):
            handle.write(f"{user} {assignment.display_label(i)}\n")


def load_assignment(path: str | Path) -> dict[str, str]:
    """Load persisted labels as a user -> label map."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}: bad assignment line {line!r}")
            mapping[parts[0]] = parts[1]
    return mapping


def save_cluster_summary(assignment: StanceAssignment, path: str | Path) -> None:
    summary = {
        "cluster_sizes": assignment.sizes,
        "camp_names": assignment.camp_names,
        "modes": [[float(x), float(y)] for x, y in assignment.modes],
        "n_unclustered": assignment.n_unclustered,
        "n_unconverged": assignment.n_unconverged,
    }
    Path(path).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
