from __future__ import annotations

import numpy as np
import pytest

from stancelens.cluster import (
    UNCLUSTERED,
    UNCLUSTERED_LABEL,
    FlatMeanShift,
    StanceAssignment,
    assign_stances,
    estimate_bandwidth,
    label_clusters_by_seeds,
    load_assignment,
    save_assignment,
)
from stancelens.errors import DataError, NumericError
from stancelens.graph import build_retweet_matrix

from conftest import make_tweet


# ---------------------------------------------------------------------------
# bandwidth


def test_bandwidth_two_points():
    assert estimate_bandwidth([[0.0, 0.0], [2.0, 0.0]], 0.5) == 2.0


def test_bandwidth_unit_square_enumeration():
    corners = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    # oracle: all six pairwise distances, straight quantile
    dists = sorted(
        float(np.linalg.norm(corners[i] - corners[j]))
        for i in range(4)
        for j in range(i + 1, 4)
    )
    assert dists == pytest.approx([1, 1, 1, 1, np.sqrt(2), np.sqrt(2)])
    expected = float(np.quantile(dists, 0.34))
    assert estimate_bandwidth(corners, 0.34) == pytest.approx(expected)
    assert estimate_bandwidth(corners, 0.34) == pytest.approx(1.0)


def test_bandwidth_identical_points_error():
    with pytest.raises(NumericError, match="zero bandwidth"):
        estimate_bandwidth(np.zeros((5, 2)), 0.5)


def test_bandwidth_validates_inputs():
    with pytest.raises(ValueError):
        estimate_bandwidth([[0.0, 0.0]], 0.5)
    with pytest.raises(ValueError):
        estimate_bandwidth(np.zeros((3, 2)), 0.0)


def test_bandwidth_subsample_deterministic():
    rng = np.random.default_rng(0)
    points = rng.normal(size=(3000, 2))
    first = estimate_bandwidth(points, 0.2, max_points=500, seed=4)
    second = estimate_bandwidth(points, 0.2, max_points=500, seed=4)
    assert first == second


# ---------------------------------------------------------------------------
# mean shift


def _two_blobs(seed: int, n_per: int = 200, sigma: float = 0.5, centers=((0, 0), (10, 0))):
    rng = np.random.default_rng(seed)
    points = np.vstack(
        [rng.normal(loc=c, scale=sigma, size=(n_per, 2)) for c in centers]
    )
    truth = np.repeat(np.arange(len(centers)), n_per)
    return points, truth


def test_single_point_single_mode():
    model = FlatMeanShift(bandwidth=1.0).fit(np.array([[3.0, 4.0]]))
    assert model.labels_.tolist() == [0]
    assert model.cluster_centers_.tolist() == [[3.0, 4.0]]


def test_huge_bandwidth_one_mode_at_centroid():
    points, _ = _two_blobs(0, n_per=50)
    diameter = np.linalg.norm(points.max(0) - points.min(0)) + 1
    model = FlatMeanShift(bandwidth=diameter).fit(points)
    assert len(model.cluster_sizes_) == 1
    assert np.linalg.norm(model.cluster_centers_[0] - points.mean(axis=0)) < 1e-6


def test_two_blob_recovery():
    for seed in range(3):
        points, truth = _two_blobs(seed)
        model = FlatMeanShift(bandwidth=2.0).fit(points)
        assert len(model.cluster_sizes_) == 2
        for center in ((0, 0), (10, 0)):
            nearest = np.linalg.norm(model.cluster_centers_ - center, axis=1).min()
            assert nearest < 0.5
        agree = (model.labels_ == truth).mean()
        assert max(agree, 1 - agree) > 0.95


def test_two_blob_purity_suite():
    # property stand-in for near-perfect user clusters: 2000/blob, 10 seeds
    for seed in range(10):
        points, truth = _two_blobs(seed, n_per=2000)
        labels = FlatMeanShift(bandwidth=2.0).fit_predict(points)
        purity = _purity(labels, truth)
        assert purity >= 0.95


def _purity(labels, truth) -> float:
    clustered = labels != UNCLUSTERED_LABEL
    agree = 0
    for value in np.unique(labels[clustered]):
        members = truth[labels == value]
        agree += np.bincount(members).max()
    return agree / clustered.sum()


def test_permutation_invariance():
    points, _ = _two_blobs(3, n_per=80)
    rng = np.random.default_rng(5)
    perm = rng.permutation(points.shape[0])
    base = FlatMeanShift(bandwidth=2.0).fit(points)
    shuffled = FlatMeanShift(bandwidth=2.0).fit(points[perm])
    assert base.cluster_centers_.shape == shuffled.cluster_centers_.shape
    assert np.abs(base.cluster_centers_ - shuffled.cluster_centers_).max() < 1e-9
    # identical partition: labels of the permuted run, mapped back
    restored = np.empty_like(shuffled.labels_)
    restored[perm] = shuffled.labels_
    assert np.array_equal(restored, base.labels_)


def test_translation_invariance():
    points, _ = _two_blobs(4, n_per=60)
    shift = np.array([123.5, -42.25])
    base = FlatMeanShift(bandwidth=2.0).fit(points)
    moved = FlatMeanShift(bandwidth=2.0).fit(points + shift)
    assert np.abs((base.cluster_centers_ + shift) - moved.cluster_centers_).max() < 1e-9
    assert np.array_equal(base.labels_, moved.labels_)


def test_modes_inside_bounding_box():
    rng = np.random.default_rng(9)
    for _ in range(5):
        points = rng.uniform(-5, 5, size=(150, 2))
        model = FlatMeanShift(bandwidth=1.5).fit(points)
        lo, hi = points.min(axis=0), points.max(axis=0)
        assert (model.cluster_centers_ >= lo - 1e-12).all()
        assert (model.cluster_centers_ <= hi + 1e-12).all()


def test_min_cluster_fraction_relabels_small_modes():
    points = np.vstack(
        [
            np.random.default_rng(0).normal((0, 0), 0.3, size=(95, 2)),
            np.array([[50.0, 50.0], [50.1, 50.0]]),
        ]
    )
    model = FlatMeanShift(bandwidth=2.0, min_cluster_fraction=0.05).fit(points)
    assert len(model.cluster_sizes_) == 1
    assert (model.labels_[-2:] == UNCLUSTERED_LABEL).all()


def test_clusters_ordered_by_descending_size():
    points = np.vstack(
        [
            np.random.default_rng(1).normal((0, 0), 0.4, size=(60, 2)),
            np.random.default_rng(2).normal((10, 0), 0.4, size=(140, 2)),
        ]
    )
    model = FlatMeanShift(bandwidth=2.0).fit(points)
    assert model.cluster_sizes_ == sorted(model.cluster_sizes_, reverse=True)
    assert np.linalg.norm(model.cluster_centers_[0] - [10, 0]) < 0.5


# ---------------------------------------------------------------------------
# assignment + naming


def _seeded_matrix_and_assignment():
    tweets = []
    for u in range(6):
        account = "red_anchor" if u < 3 else "blue_anchor"
        for j in range(4):
            tweets.append(
                make_tweet(
                    tweet_id=f"t{u}_{j}",
                    user_id=f"user{u}",
                    text=f"RT @{account}: x",
                    retweeted_account=account,
                )
            )
    matrix = build_retweet_matrix(tweets, 1, 1)
    labels = np.array([0 if u < 3 else 1 for u in range(6)])
    assignment = StanceAssignment(
        users=matrix.users,
        labels=labels,
        modes=np.zeros((2, 2)),
        sizes=[3, 3],
    )
    return matrix, assignment


def test_label_clusters_majority_rule():
    matrix, assignment = _seeded_matrix_and_assignment()
    named = label_clusters_by_seeds(
        assignment, matrix, {"reds": ["red_anchor"], "blues": ["blue_anchor"]}
    )
    assert named.camp_names == ["reds", "blues"]
    mapping = named.user_to_camp()
    assert mapping["user0"] == "reds" and mapping["user5"] == "blues"


def test_label_clusters_missing_seed_listed():
    matrix, assignment = _seeded_matrix_and_assignment()
    with pytest.raises(DataError, match="ghost_account"):
        label_clusters_by_seeds(
            assignment, matrix, {"reds": ["ghost_account"], "blues": ["blue_anchor"]}
        )


def test_label_clusters_ambiguity():
    # every user leans red overall, so both clusters map to the same camp
    tweets = []
    for u in range(6):
        for j in range(3):
            tweets.append(
                make_tweet(
                    tweet_id=f"r{u}_{j}",
                    user_id=f"user{u}",
                    text="RT @red_anchor: x",
                    retweeted_account="red_anchor",
                )
            )
        if u >= 3:
            tweets.append(
                make_tweet(
                    tweet_id=f"b{u}",
                    user_id=f"user{u}",
                    text="RT @blue_anchor: x",
                    retweeted_account="blue_anchor",
                )
            )
    matrix = build_retweet_matrix(tweets, 1, 1)
    labels = np.array([0, 0, 0, 1, 1, 1])
    both_red = StanceAssignment(
        users=matrix.users, labels=labels, modes=np.zeros((2, 2)), sizes=[3, 3]
    )
    with pytest.raises(DataError, match="ambiguous"):
        label_clusters_by_seeds(
            both_red, matrix, {"reds": ["red_anchor"], "blues": ["blue_anchor"]}
        )


def test_label_clusters_validates_seed_structure():
    matrix, assignment = _seeded_matrix_and_assignment()
    with pytest.raises(ValueError):
        label_clusters_by_seeds(assignment, matrix, {"one": ["red_anchor"]})
    with pytest.raises(ValueError):
        label_clusters_by_seeds(
            assignment, matrix, {"a": ["red_anchor"], "b": ["red_anchor"]}
        )
    with pytest.raises(ValueError):
        label_clusters_by_seeds(assignment, matrix, {"a": [], "b": ["blue_anchor"]})


def test_label_clusters_demotes_minor_clusters():
    matrix, assignment = _seeded_matrix_and_assignment()
    labels = assignment.labels.copy()
    labels[-1] = 2  # a third small cluster
    three = StanceAssignment(
        users=assignment.users,
        labels=labels,
        modes=np.zeros((3, 2)),
        sizes=[3, 2, 1],
    )
    named = label_clusters_by_seeds(
        three, matrix, {"reds": ["red_anchor"], "blues": ["blue_anchor"]}
    )
    assert named.n_clusters == 2
    assert named.labels[-1] == UNCLUSTERED_LABEL


def test_assignment_roundtrip(tmp_path):
    matrix, assignment = _seeded_matrix_and_assignment()
    named = label_clusters_by_seeds(
        assignment, matrix, {"reds": ["red_anchor"], "blues": ["blue_anchor"]}
    )
    path = tmp_path / "assignment.txt"
    save_assignment(named, path)
    loaded = load_assignment(path)
    assert loaded == {u: named.display_label(i) for i, u in enumerate(named.users)}
    rebuilt = StanceAssignment.from_label_map(loaded, named.camp_names)
    assert rebuilt.user_to_camp() == named.user_to_camp()


def test_assign_stances_sizes_add_up():
    points, _ = _two_blobs(1, n_per=40)
    users = [f"u{i}" for i in range(points.shape[0])]
    assignment = assign_stances(users, points, bandwidth=2.0)
    assert sum(assignment.sizes) + assignment.n_unclustered == len(users)
    assert all(
        label < assignment.n_clusters for label in assignment.labels if label >= 0
    )


def test_unconverged_points_counted():
    points, _ = _two_blobs(2, n_per=50)
    model = FlatMeanShift(bandwidth=2.0, max_iterations=1, convergence_tol=1e-12).fit(
        points
    )
    assert model.n_unconverged_ > 0
    assert (model.labels_ >= 0).all()  # still assigned to nearest mode
