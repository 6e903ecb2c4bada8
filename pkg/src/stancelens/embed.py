"""From-scratch 2-D neighbor embedding over a cosine k-NN graph.

The pipeline: per-node bandwidth calibration of the k-NN distances, a
symmetrized fuzzy edge-weight graph, a low-dimensional attraction curve
fitted from (min_dist, spread), then stochastic per-edge layout
optimization with negative sampling. Single-threaded optimization under a
fixed seed is the reproducibility contract: reruns are bit-identical.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh
from sklearn.base import BaseEstimator
from sklearn.utils import check_array

from . import _layout
from .errors import DataError, NumericError
from .graph import KnnGraph, cosine_knn

SMOOTH_TOLERANCE = 1e-5
SIGMA_MIN = 1e-3  # lower clamp when the calibration target is unreachable
GRAD_CLIP = 4.0  # per-coordinate bound on one SGD step
REPULSION_STRENGTH = 1.0
_MAX_BISECTION_STEPS = 200


def smooth_knn_calibration(distances, k: int | None = None) -> tuple[float, float]:
    """Per-node (rho, sigma) from an ascending list of k neighbor distances.

    rho is the smallest nonzero distance. sigma solves
    sum_j exp(-max(0, d_j - rho) / sigma) = log2(k) by bisection to a
    residual below 1e-5. When the target is already exceeded at sigma -> 0
    (e.g. all distances equal, or k = 1) sigma is clamped to SIGMA_MIN.
    """
    distances = np.asarray(distances, dtype=np.float64)
    if distances.ndim != 1 or distances.size == 0:
        raise ValueError("distances must be a non-empty 1-D array")
    if k is not None and k != distances.size:
        raise ValueError(f"expected {k} distances, got {distances.size}")
    if np.any(distances < 0):
        raise ValueError("distances must be nonnegative")
    if np.any(np.diff(distances) < 0):
        raise ValueError("distances must be ascending")

    k = distances.size
    target = math.log2(k)
    nonzero = distances[distances > 0.0]
    rho = float(nonzero[0]) if nonzero.size else 0.0
    shifted = np.maximum(distances - rho, 0.0)

    # limit of the sum as sigma -> 0+: terms at or below rho contribute 1
    if float(np.count_nonzero(shifted == 0.0)) >= target:
        return rho, SIGMA_MIN

    def total(sigma: float) -> float:
        return float(np.exp(-shifted / sigma).sum())

    hi = 1.0
    while total(hi) < target:
        hi *= 2.0
        if hi > 2.0**60:
            return rho, hi  # unreachable for log2(k) < k, kept as a guard
    lo = 0.0
    mid = hi
    for _ in range(_MAX_BISECTION_STEPS):
        mid = (lo + hi) / 2.0
        value = total(mid)
        if abs(value - target) < SMOOTH_TOLERANCE:
            break
        if value > target:
            hi = mid
        else:
            lo = mid
    return rho, max(mid, SIGMA_MIN)


def build_fuzzy_graph(knn: KnnGraph) -> sp.coo_matrix:
    """Symmetric fuzzy edge weights from a k-NN graph.

    Directed strengths a(i, j) = exp(-max(0, d_ij - rho_i) / sigma_i) are
    combined with the probabilistic t-conorm w = a + a^T - a o a^T, which
    keeps every weight in (0, 1] and the matrix exactly symmetric.
    """
    indices, distances = knn.indices, knn.distances
    n, k = indices.shape
    rhos = np.empty(n)
    sigmas = np.empty(n)
    for i in range(n):
        rhos[i], sigmas[i] = smooth_knn_calibration(distances[i])
    vals = np.exp(-np.maximum(distances - rhos[:, None], 0.0) / sigmas[:, None])
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    directed = sp.coo_matrix(
        (vals.ravel(), (rows, indices.ravel().astype(np.int64))), shape=(n, n)
    ).tocsr()
    transpose = directed.T.tocsr()
    fuzzy = directed + transpose - directed.multiply(transpose)
    fuzzy = fuzzy.tocoo()
    fuzzy.eliminate_zeros()
    return fuzzy


def fit_curve_params(min_dist: float, spread: float) -> tuple[float, float]:
    """Fit (a, b) so that 1 / (1 + a x^(2b)) tracks the target falloff.

    The target is 1 for x < min_dist and exp(-(x - min_dist) / spread)
    beyond, sampled on [0, 3 spread].
    """
    if not 0 < min_dist <= spread:
        raise ValueError("need 0 < min_dist <= spread")
    xs = np.linspace(0.0, 3.0 * spread, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))

    def residuals(p):
        return 1.0 / (1.0 + p[0] * xs ** (2.0 * p[1])) - ys

    result = least_squares(residuals, x0=[1.0, 1.0], max_nfev=5000)
    if not result.success:
        raise NumericError(
            "attraction-curve fit did not converge: residual "
            f"{float(np.sum(result.fun ** 2)):.3e} for min_dist={min_dist}, spread={spread}"
        )
    return float(result.x[0]), float(result.x[1])


def _spectral_init(fuzzy: sp.spmatrix, n_components: int = 2) -> np.ndarray | None:
    """Coordinates from the normalized-adjacency spectrum, or None when the
    graph is too small, disconnected, or the eigensolver fails."""
    n = fuzzy.shape[0]
    if n <= 3:
        return None
    if connected_components(fuzzy, directed=False, return_labels=False) > 1:
        return None
    W = sp.csr_matrix(fuzzy, dtype=np.float64)
    deg = np.asarray(W.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(deg))
    laplacian = sp.identity(n, format="csr") - inv_sqrt @ W @ inv_sqrt
    k = n_components + 1
    ncv = max(2 * k + 1, int(np.sqrt(n)))
    try:
        vals, vecs = eigsh(
            laplacian,
            k,
            which="SM",
            ncv=ncv,
            tol=1e-4,
            v0=np.ones(n),
            maxiter=n * 5,
        )
    except Exception:
        return None
    order = np.argsort(vals)
    return np.ascontiguousarray(vecs[:, order[1 : k]])


def _rescale_to_box(coords: np.ndarray, extent: float = 10.0) -> np.ndarray:
    coords = np.array(coords, dtype=np.float64)
    for d in range(coords.shape[1]):
        lo, hi = coords[:, d].min(), coords[:, d].max()
        span = hi - lo
        if span > 0:
            coords[:, d] = extent * (coords[:, d] - lo) / span
        else:
            coords[:, d] = 0.0
    return coords


def _seed_rng_state(seed: int) -> np.ndarray:
    # splitmix-style scramble; xorshift64 must not start at zero
    state = (seed * 6364136223846793005 + 1442695040888963407) % 2**64
    if state == 0:
        state = 0x9E3779B97F4A7C15
    return np.array([state], dtype=np.uint64)


def optimize_layout(
    fuzzy: sp.spmatrix,
    *,
    min_dist: float = 0.1,
    spread: float = 1.0,
    n_epochs: int = 500,
    learning_rate: float = 1.0,
    negative_sample_rate: int = 5,
    seed: int = 0,
    init: str | np.ndarray = "spectral",
) -> np.ndarray:
    """Optimize 2-D coordinates against the fuzzy graph.

    Attractive updates are scheduled per edge proportionally to its weight;
    each is paired with negative-sampled repulsive updates. The learning
    rate decays linearly and every per-coordinate step is clipped to
    GRAD_CLIP. Raises NumericError with the epoch and vertex when a
    coordinate turns non-finite.
    """
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if negative_sample_rate < 0:
        raise ValueError("negative_sample_rate must be >= 0")
    a, b = fit_curve_params(min_dist, spread)

    fuzzy = sp.coo_matrix(fuzzy)
    n = fuzzy.shape[0]
    if n == 0:
        raise DataError("cannot embed an empty graph")

    rng = np.random.RandomState(seed)
    if isinstance(init, np.ndarray):
        coords = np.array(init, dtype=np.float64)
        if coords.shape != (n, 2):
            raise ValueError(f"init coordinates must have shape ({n}, 2)")
    else:
        coords = None
        if init == "spectral":
            coords = _spectral_init(fuzzy)
            if coords is not None:
                coords = _rescale_to_box(coords)
                coords += rng.normal(scale=1e-4, size=coords.shape)
        elif init != "random":
            raise ValueError(f"unknown init {init!r}")
        if coords is None:
            coords = rng.uniform(-10.0, 10.0, size=(n, 2))
    coords = np.ascontiguousarray(_rescale_to_box(coords))

    if fuzzy.nnz == 0:
        return coords  # isolated points keep their initialization

    weights = fuzzy.data.astype(np.float64)
    keep = weights >= weights.max() / n_epochs
    weights = weights[keep]
    head = fuzzy.row[keep].astype(np.int32)
    tail = fuzzy.col[keep].astype(np.int32)

    epochs_per_sample = weights.max() / weights
    epoch_of_next_sample = epochs_per_sample.copy()
    if negative_sample_rate > 0:
        epochs_per_negative_sample = epochs_per_sample / negative_sample_rate
    else:
        epochs_per_negative_sample = np.full_like(epochs_per_sample, 1e300)
    epoch_of_next_negative_sample = epochs_per_negative_sample.copy()

    rng_state = _seed_rng_state(seed)
    for epoch in range(n_epochs):
        alpha = learning_rate * (1.0 - epoch / float(n_epochs))
        _layout.run_epoch(
            coords,
            head,
            tail,
            epochs_per_sample,
            epoch_of_next_sample,
            epochs_per_negative_sample,
            epoch_of_next_negative_sample,
            a,
            b,
            REPULSION_STRENGTH,
            alpha,
            GRAD_CLIP,
            float(epoch),
            rng_state,
        )
        if not np.all(np.isfinite(coords)):
            vertex = int(np.flatnonzero(~np.isfinite(coords).all(axis=1))[0])
            raise NumericError(
                f"layout diverged: non-finite coordinate for vertex {vertex} "
                f"at epoch {epoch}"
            )
    return coords


def embed_knn(
    knn: KnnGraph,
    *,
    min_dist: float = 0.1,
    spread: float = 1.0,
    n_epochs: int = 500,
    learning_rate: float = 1.0,
    negative_sample_rate: int = 5,
    seed: int = 0,
    init: str | np.ndarray = "spectral",
) -> np.ndarray:
    """Embed a precomputed k-NN graph (the batch-pipeline entry point)."""
    fuzzy = build_fuzzy_graph(knn)
    return optimize_layout(
        fuzzy,
        min_dist=min_dist,
        spread=spread,
        n_epochs=n_epochs,
        learning_rate=learning_rate,
        negative_sample_rate=negative_sample_rate,
        seed=seed,
        init=init,
    )


class NeighborEmbedding(BaseEstimator):
    """Project rows of a feature matrix to 2-D by cosine neighborhoods.

    sklearn-compatible transformer: ``fit(X)`` computes the exact cosine
    k-NN graph of the rows (sparse input welcome), calibrates fuzzy edge
    weights, and optimizes the layout. ``fit_transform`` returns the
    (n_samples, 2) coordinates, also available as ``embedding_``.

    Parameters mirror the batch pipeline's embed stage; ``random_state``
    is an integer seed and the single-threaded optimization makes repeated
    fits bit-identical.
    """

    def __init__(
        self,
        n_neighbors: int = 15,
        min_dist: float = 0.1,
        spread: float = 1.0,
        n_epochs: int = 500,
        learning_rate: float = 1.0,
        negative_sample_rate: int = 5,
        init: str = "spectral",
        random_state: int = 0,
        jobs: int = 1,
    ):
        self.n_neighbors = n_neighbors
        self.min_dist = min_dist
        self.spread = spread
        self.n_epochs = n_epochs
        self.learning_rate = learning_rate
        self.negative_sample_rate = negative_sample_rate
        self.init = init
        self.random_state = random_state
        self.jobs = jobs

    def fit(self, X, y=None):
        X = check_array(X, accept_sparse="csr")
        indices, distances = cosine_knn(X, self.n_neighbors, jobs=self.jobs)
        knn = KnnGraph(k=self.n_neighbors, indices=indices, distances=distances)
        self.knn_indices_ = indices
        self.knn_distances_ = distances
        self.fuzzy_graph_ = build_fuzzy_graph(knn)
        self.embedding_ = optimize_layout(
            self.fuzzy_graph_,
            min_dist=self.min_dist,
            spread=self.spread,
            n_epochs=self.n_epochs,
            learning_rate=self.learning_rate,
            negative_sample_rate=self.negative_sample_rate,
            seed=self.random_state,
            init=self.init,
        )
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_


# ---------------------------------------------------------------------------
# persistence


def save_embedding(users: list[str], coords: np.ndarray, path: str | Path) -> None:
    if len(users) != coords.shape[0]:
        raise ValueError("user list and coordinate rows disagree")
    with open(path, "w", encoding="utf-8") as handle:
        for user, (x, y) in zip(users, coords):
            handle.write(f"{user} {float(x)!r} {float(y)!r}\n")


def load_embedding(path: str | Path) -> tuple[list[str], np.ndarray]:
    users: list[str] = []
    points: list[tuple[float, float]] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}: bad embedding line {line!r}")
            users.append(parts[0])
            points.append((float(parts[1]), float(parts[2])))
    return users, np.asarray(points, dtype=np.float64)
