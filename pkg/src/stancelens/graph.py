"""Sparse user x retweeted-account matrix and its exact cosine k-NN graph.

Exact O(n^2) neighbor search is deliberate: at the target corpus scale
(tens of thousands of users) the blocked sparse products stay cheap, and
exactness keeps the downstream embedding reproducible.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .corpus import Tweet
from .errors import DataError


@dataclass
class UserRetweetMatrix:
    """Rows are users, columns are retweeted accounts, entries are counts.

    Row and column orderings are sorted and duplicate-free; rows are
    guaranteed non-zero by the build-time activity threshold.
    """

    users: list[str]
    accounts: list[str]
    counts: sp.csr_matrix

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_accounts(self) -> int:
        return len(self.accounts)


@dataclass
class KnnGraph:
    """Exact k nearest neighbors per user under distance 1 - cosine.

    ``indices[i]`` is sorted by ascending distance with ties broken by
    ascending user index; self-loops are excluded.
    """

    k: int
    indices: np.ndarray  # (n, k) int32
    distances: np.ndarray  # (n, k) float64


def build_retweet_matrix(
    tweets: Iterable[Tweet],
    min_user_retweets: int = 5,
    min_account_mentions: int = 2,
    binary: bool = False,
) -> UserRetweetMatrix:
    """Count retweets per (user, account) and apply the activity thresholds.

    Accounts retweeted by fewer than ``min_account_mentions`` distinct users
    are dropped first; users whose remaining total is below
    ``min_user_retweets`` are dropped second (single pass, in that order).
    ``binary=True`` replaces the surviving counts with 0/1 indicators; the
    thresholds are evaluated on raw counts either way.
    """
    if min_user_retweets < 1 or min_account_mentions < 1:
        raise ValueError("thresholds must be >= 1")

    pair_counts: dict[tuple[str, str], int] = {}
    account_users: dict[str, set[str]] = {}
    for tweet in tweets:
        account = tweet.retweeted_account
        if account is None:
            continue
        key = (tweet.user_id, account)
        pair_counts[key] = pair_counts.get(key, 0) + 1
        account_users.setdefault(account, set()).add(tweet.user_id)

    kept_accounts = {
        a for a, users in account_users.items() if len(users) >= min_account_mentions
    }
    user_totals: dict[str, int] = {}
    for (user, account), count in pair_counts.items():
        if account in kept_accounts:
            user_totals[user] = user_totals.get(user, 0) + count
    kept_users = {u for u, total in user_totals.items() if total >= min_user_retweets}

    if not kept_users or not kept_accounts:
        raise DataError(
            "no clusterable users: retweet matrix is empty after thresholds"
        )

    users = sorted(kept_users)
    accounts = sorted(kept_accounts)
    user_index = {u: i for i, u in enumerate(users)}
    account_index = {a: i for i, a in enumerate(accounts)}

    rows, cols, vals = [], [], []
    for (user, account), count in pair_counts.items():
        if user in kept_users and account in kept_accounts:
            rows.append(user_index[user])
            cols.append(account_index[account])
            vals.append(1 if binary else count)
    counts = sp.csr_matrix(
        (np.asarray(vals, dtype=np.int64), (rows, cols)),
        shape=(len(users), len(accounts)),
    )
    counts.sum_duplicates()
    counts.sort_indices()
    return UserRetweetMatrix(users=users, accounts=accounts, counts=counts)


def cosine_similarity(row_u, row_v) -> float:
    """dot(u, v) / (|u| |v|); raises DataError on a zero vector."""
    u = np.asarray(row_u.todense()).ravel() if sp.issparse(row_u) else np.asarray(row_u, dtype=float).ravel()
    v = np.asarray(row_v.todense()).ravel() if sp.issparse(row_v) else np.asarray(row_v, dtype=float).ravel()
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        raise DataError("cosine similarity undefined for a zero vector")
    return float(np.dot(u, v) / (norm_u * norm_v))


def _row_norms(X) -> np.ndarray:
    if sp.issparse(X):
        squares = np.asarray(X.multiply(X).sum(axis=1)).ravel()
    else:
        squares = (X * X).sum(axis=1)
    if np.any(squares == 0.0):
        bad = int(np.flatnonzero(squares == 0.0)[0])
        raise DataError(f"row {bad} is a zero vector; exclude it before k-NN")
    return np.sqrt(squares)


def _knn_block(X, norms, start, stop, k, max_distance, indices, distances):
    # gram block on the raw data: for integer counts the dot products are
    # exact in float64, so structural ties stay exact ties
    block = X[start:stop] @ X.T
    if sp.issparse(block):
        block = np.asarray(block.todense())
    dist = 1.0 - block / np.outer(norms[start:stop], norms)
    np.clip(dist, 0.0, max_distance, out=dist)
    for offset in range(stop - start):
        row = dist[offset]
        row[start + offset] = np.inf  # no self-loop
        kth = np.partition(row, k - 1)[k - 1]
        candidates = np.flatnonzero(row <= kth)
        # lexsort: primary key distance, secondary ascending index
        order = np.lexsort((candidates, row[candidates]))[:k]
        chosen = candidates[order]
        indices[start + offset] = chosen
        distances[start + offset] = row[chosen]


def cosine_knn(X, k: int, jobs: int = 1, block_size: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbors of every row of X under 1 - cosine.

    Ties are broken by ascending row index. Returns (indices, distances)
    arrays of shape (n, k). Deterministic regardless of ``jobs`` because
    every row is computed independently.
    """
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n_rows (got k={k}, n={n})")
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=np.float64)
        nonneg = X.nnz == 0 or X.data.min() >= 0
    else:
        X = np.asarray(X, dtype=np.float64)
        nonneg = np.min(X) >= 0
    norms = _row_norms(X)
    max_distance = 1.0 if nonneg else 2.0

    indices = np.empty((n, k), dtype=np.int32)
    distances = np.empty((n, k), dtype=np.float64)
    starts = list(range(0, n, block_size))
    if jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_knn_block, X, norms, s, min(s + block_size, n), k, max_distance, indices, distances)
                for s in starts
            ]
            for fut in futures:
                fut.result()
    else:
        for s in starts:
            _knn_block(X, norms, s, min(s + block_size, n), k, max_distance, indices, distances)
    return indices, distances


def knn_graph(matrix: UserRetweetMatrix, k: int, jobs: int = 1) -> KnnGraph:
    """k-NN graph of the retweet matrix under cosine distance."""
    indices, distances = cosine_knn(matrix.counts, k, jobs=jobs)
    return KnnGraph(k=k, indices=indices, distances=distances)


# ---------------------------------------------------------------------------
# persistence: triplet file + id sidecars, k-NN edge list


def _sidecar_paths(path: Path) -> tuple[Path, Path]:
    return Path(str(path) + ".users"), Path(str(path) + ".accounts")


def save_matrix(matrix: UserRetweetMatrix, path: str | Path) -> None:
    path = Path(path)
    coo = matrix.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{matrix.n_users} {matrix.n_accounts} {coo.nnz}\n")
        for i in order:
            handle.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]}\n")
    users_path, accounts_path = _sidecar_paths(path)
    users_path.write_text("\n".join(matrix.users) + "\n", encoding="utf-8")
    accounts_path.write_text("\n".join(matrix.accounts) + "\n", encoding="utf-8")


def load_matrix(path: str | Path) -> UserRetweetMatrix:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 3:
            raise DataError(f"{path}: bad matrix header")
        n_users, n_accounts, nnz = (int(x) for x in header)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.int64)
        for i in range(nnz):
            parts = handle.readline().split()
            if len(parts) != 3:
                raise DataError(f"{path}: truncated triplet section at entry {i}")
            rows[i], cols[i], vals[i] = int(parts[0]), int(parts[1]), int(parts[2])
    users_path, accounts_path = _sidecar_paths(path)
    users = users_path.read_text(encoding="utf-8").splitlines()
    accounts = accounts_path.read_text(encoding="utf-8").splitlines()
    if len(users) != n_users or len(accounts) != n_accounts:
        raise DataError(f"{path}: sidecar lengths disagree with header")
    counts = sp.csr_matrix((vals, (rows, cols)), shape=(n_users, n_accounts))
    counts.sort_indices()
    return UserRetweetMatrix(users=users, accounts=accounts, counts=counts)


def save_knn(knn: KnnGraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for user in range(knn.indices.shape[0]):
            for j in range(knn.k):
                handle.write(
                    f"{user} {int(knn.indices[user, j])} {float(knn.distances[user, j])!r}\n"
                )


def load_knn(path: str | Path) -> KnnGraph:
    rows: dict[int, list[tuple[int, float]]] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}: bad k-NN line {line!r}")
            rows.setdefault(int(parts[0]), []).append((int(parts[1]), float(parts[2])))
    if not rows:
        raise DataError(f"{path}: empty k-NN file")
    n = max(rows) + 1
    k = len(rows[0])
    indices = np.empty((n, k), dtype=np.int32)
    distances = np.empty((n, k), dtype=np.float64)
    for user in range(n):
        neighbors = rows.get(user)
        if neighbors is None or len(neighbors) != k:
            raise DataError(f"{path}: user {user} has a ragged neighbor list")
        indices[user] = [idx for idx, _ in neighbors]
        distances[user] = [d for _, d in neighbors]
    return KnnGraph(k=k, indices=indices, distances=distances)
