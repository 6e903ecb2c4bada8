from __future__ import annotations

import numpy as np
import pytest

from stancelens.corpus import parse_tweet_record, serialize_tweet
from stancelens.errors import DataError
from stancelens.graph import build_retweet_matrix
from stancelens.synth import (
    SynthParams,
    account_pools,
    clustering_purity,
    generate_corpus,
    load_ground_truth,
    write_ground_truth,
)

SMALL = SynthParams(
    users_per_camp=(40, 40),
    accounts_per_camp=(20, 20),
    crossover_probability=0.05,
    retweets_mean=10.0,
    seed=7,
)


def test_records_roundtrip_losslessly():
    tweets, _ = generate_corpus(SMALL)
    for tweet in tweets[:200]:
        assert parse_tweet_record(serialize_tweet(tweet)) == tweet


def test_ground_truth_covers_every_user():
    tweets, truth = generate_corpus(SMALL)
    assert len(truth) == 80
    assert {t.user_id for t in tweets} <= set(truth)


def test_zero_crossover_is_block_diagonal():
    params = SynthParams(
        users_per_camp=(30, 30),
        accounts_per_camp=(15, 15),
        crossover_probability=0.0,
        retweets_mean=12.0,
        seed=3,
    )
    tweets, truth = generate_corpus(params)
    pool_a, pool_b, _ = account_pools(params)
    camp_a_accounts, camp_b_accounts = set(pool_a), set(pool_b)
    for tweet in tweets:
        own = truth[tweet.user_id]
        if own == params.camp_names[0]:
            assert tweet.retweeted_account in camp_a_accounts
        else:
            assert tweet.retweeted_account in camp_b_accounts
    matrix = build_retweet_matrix(tweets, 1, 1)
    # off-diagonal blocks of the user x account matrix are empty
    a_cols = [i for i, acc in enumerate(matrix.accounts) if acc in camp_a_accounts]
    a_rows = [
        i for i, u in enumerate(matrix.users) if truth[u] == params.camp_names[0]
    ]
    dense = matrix.counts.toarray()
    mask = np.zeros_like(dense, dtype=bool)
    mask[np.ix_(a_rows, a_cols)] = True
    mask[np.ix_(sorted(set(range(len(matrix.users))) - set(a_rows)),
                sorted(set(range(len(matrix.accounts))) - set(a_cols)))] = True
    assert dense[~mask].sum() == 0


def test_same_seed_byte_identical():
    lines_a = [serialize_tweet(t) for t in generate_corpus(SMALL)[0]]
    lines_b = [serialize_tweet(t) for t in generate_corpus(SMALL)[0]]
    assert lines_a == lines_b
    other_seed = SynthParams(**{**SMALL.__dict__, "seed": 8})
    lines_c = [serialize_tweet(t) for t in generate_corpus(other_seed)[0]]
    assert lines_a != lines_c


def test_crossover_rate_within_three_standard_errors():
    p = 0.1
    params = SynthParams(
        users_per_camp=(400, 400),
        accounts_per_camp=(50, 50),
        crossover_probability=p,
        retweets_mean=20.0,
        seed=11,
    )
    tweets, truth = generate_corpus(params)
    pool_a, _, _ = account_pools(params)
    camp_a_accounts = set(pool_a)
    crossed = total = 0
    for tweet in tweets:
        own_is_a = truth[tweet.user_id] == params.camp_names[0]
        target_is_a = tweet.retweeted_account in camp_a_accounts
        total += 1
        if own_is_a != target_is_a:
            crossed += 1
    assert total >= 10_000
    se = (p * (1 - p) / total) ** 0.5
    assert abs(crossed / total - p) <= 3 * se


def test_empty_pool_with_nonzero_probability_is_error():
    with pytest.raises(DataError):
        generate_corpus(
            SynthParams(users_per_camp=(5, 5), accounts_per_camp=(5, 0))
        )
    with pytest.raises(DataError):
        generate_corpus(
            SynthParams(users_per_camp=(5, 5), shared_probability=0.2, shared_account_count=0)
        )


def test_param_validation():
    with pytest.raises(ValueError):
        SynthParams(crossover_probability=1.5).validate()
    with pytest.raises(ValueError):
        SynthParams(retweets_mean=0.0).validate()
    with pytest.raises(ValueError):
        SynthParams(camp_names=("same", "same")).validate()


def test_dates_respect_configured_window():
    tweets, _ = generate_corpus(SMALL)
    days = {t.day() for t in tweets}
    assert min(days) >= SMALL.date_start
    assert max(days) <= SMALL.date_end


def test_ground_truth_roundtrip(tmp_path):
    _, truth = generate_corpus(SMALL)
    path = tmp_path / "truth.txt"
    write_ground_truth(truth, path)
    assert load_ground_truth(path) == truth


def test_purity_metric():
    truth = {"a": "x", "b": "x", "c": "y", "d": "y"}
    labels = {"a": "c0", "b": "c0", "c": "c1", "d": "c1"}
    assert clustering_purity(labels, truth) == 1.0
    mixed = {"a": "c0", "b": "c0", "c": "c0", "d": "c1"}
    assert clustering_purity(mixed, truth) == pytest.approx(3 / 4)
    with_unclustered = {"a": "c0", "b": "UNCLUSTERED", "c": "c1", "d": "c1"}
    assert clustering_purity(with_unclustered, truth) == 1.0
