"""Synthetic polarized retweet corpora with ground-truth camp labels.

Two camps of users retweet from exclusive per-camp account pools, crossing
over to the other camp's pool with a configurable probability and into an
optional shared pool. Retweets per user follow a negative-binomial count
(heavy dispersion, like real per-user activity). Generation is
deterministic: every user gets an RNG stream derived from (seed, camp,
user index), so corpora are byte-identical under a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Tweet
from .errors import DataError

DEFAULT_TAGS_A = ("teamalpha", "alphaproud", "alphanews", "goalpha")
DEFAULT_TAGS_B = ("teambeta", "betaproud", "betanews", "gobeta")


@dataclass(frozen=True)
class SynthParams:
    users_per_camp: tuple[int, int] = (1000, 1000)
    accounts_per_camp: tuple[int, int] = (200, 200)
    shared_account_count: int = 0
    crossover_probability: float = 0.05
    shared_probability: float = 0.0
    retweets_mean: float = 20.0
    retweets_dispersion: float = 2.0
    hashtag_pools: tuple[tuple[str, ...], tuple[str, ...]] = (
        DEFAULT_TAGS_A,
        DEFAULT_TAGS_B,
    )
    date_start: date = date(2020, 3, 1)
    date_end: date = date(2020, 3, 31)
    seed: int = 0
    camp_names: tuple[str, str] = ("campA", "campB")

    def validate(self) -> None:
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ValueError("crossover_probability must lie in [0, 1]")
        if not 0.0 <= self.shared_probability <= 1.0:
            raise ValueError("shared_probability must lie in [0, 1]")
        if min(self.users_per_camp) < 0 or min(self.accounts_per_camp) < 0:
            raise ValueError("counts must be >= 0")
        if self.shared_account_count < 0:
            raise ValueError("shared_account_count must be >= 0")
        if self.retweets_mean <= 0 or self.retweets_dispersion <= 0:
            raise ValueError("retweet distribution parameters must be positive")
        if self.date_start > self.date_end:
            raise ValueError("date_start must not exceed date_end")
        if len(self.camp_names) != 2 or self.camp_names[0] == self.camp_names[1]:
            raise ValueError("two distinct camp names are required")
        for camp in (0, 1):
            if self.users_per_camp[camp] == 0:
                continue
            if self.accounts_per_camp[camp] == 0:
                raise DataError(f"camp {camp} has users but no account pool")
            if not self.hashtag_pools[camp]:
                raise DataError(f"camp {camp} has users but no hashtag pool")
            other = 1 - camp
            if self.crossover_probability > 0 and (
                self.accounts_per_camp[other] == 0 or not self.hashtag_pools[other]
            ):
                raise DataError(
                    "crossover probability is nonzero but the other camp's pools are empty"
                )
        if self.shared_probability > 0 and self.shared_account_count == 0:
            raise DataError("shared_probability is nonzero but the shared pool is empty")


def account_pools(params: SynthParams) -> tuple[list[str], list[str], list[str]]:
    pool_a = [f"acct_a{i:03d}" for i in range(params.accounts_per_camp[0])]
    pool_b = [f"acct_b{i:03d}" for i in range(params.accounts_per_camp[1])]
    shared = [f"acct_s{i:03d}" for i in range(params.shared_account_count)]
    return pool_a, pool_b, shared


def generate_corpus(params: SynthParams) -> tuple[list[Tweet], dict[str, str]]:
    """Generate (tweets, user -> camp ground truth)."""
    params.validate()
    pool_a, pool_b, shared = account_pools(params)
    pools = (pool_a, pool_b)
    epoch_start = int(
        datetime.combine(params.date_start, datetime.min.time(), timezone.utc).timestamp()
    )
    n_days = (params.date_end - params.date_start).days + 1
    nb_n = params.retweets_dispersion
    nb_p = params.retweets_dispersion / (params.retweets_dispersion + params.retweets_mean)

    tweets: list[Tweet] = []
    truth: dict[str, str] = {}
    for camp in (0, 1):
        own_accounts = pools[camp]
        other_accounts = pools[1 - camp]
        own_tags = params.hashtag_pools[camp]
        other_tags = params.hashtag_pools[1 - camp]
        for u in range(params.users_per_camp[camp]):
            user_id = f"u{camp}_{u:05d}"
            truth[user_id] = params.camp_names[camp]
            rng = np.random.default_rng([params.seed, camp, u])
            n_retweets = int(rng.negative_binomial(nb_n, nb_p))
            for j in range(n_retweets):
                if shared and rng.random() < params.shared_probability:
                    account = shared[int(rng.integers(len(shared)))]
                elif rng.random() < params.crossover_probability:
                    account = other_accounts[int(rng.integers(len(other_accounts)))]
                else:
                    account = own_accounts[int(rng.integers(len(own_accounts)))]
                if rng.random() < params.crossover_probability:
                    tag = other_tags[int(rng.integers(len(other_tags)))]
                else:
                    tag = own_tags[int(rng.integers(len(own_tags)))]
                timestamp = (
                    epoch_start
                    + int(rng.integers(n_days)) * 86400
                    + int(rng.integers(86400))
                )
                text = f"RT @{account}: #{tag} corona chatter {j}"
                tweets.append(
                    Tweet(
                        tweet_id=f"t{camp}_{u:05d}_{j:04d}",
                        user_id=user_id,
                        timestamp_utc=timestamp,
                        text=text,
                        lang="en",
                        retweeted_account=account,
                        hashtags=(tag,),
                        raw_hashtags=(tag,),
                        urls=(),
                        user_location=None,
                    )
                )
    return tweets, truth


def write_ground_truth(truth: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for user, camp in truth.items():
            handle.write(f"{user} {camp}\n")


def load_ground_truth(path: str | Path) -> dict[str, str]:
    truth: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}: bad ground-truth line {line!r}")
            truth[parts[0]] = parts[1]
    return truth


def clustering_purity(labels: Mapping[str, str], truth: Mapping[str, str]) -> float:
    """Fraction of clustered users whose cluster's majority camp is their own.

    ``labels`` maps users to cluster labels (UNCLUSTERED entries and users
    without ground truth are ignored).
    """
    from .cluster import UNCLUSTERED

    by_cluster: dict[str, list[str]] = {}
    for user, label in labels.items():
        if label == UNCLUSTERED or user not in truth:
            continue
        by_cluster.setdefault(label, []).append(truth[user])
    total = sum(len(members) for members in by_cluster.values())
    if total == 0:
        return 0.0
    agree = 0
    for members in by_cluster.values():
        best = max(set(members), key=members.count)
        agree += sum(1 for camp in members if camp == best)
    return agree / total
