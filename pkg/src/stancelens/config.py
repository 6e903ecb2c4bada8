"""Pipeline configuration: one YAML file drives every stage.

Corpus-recipe constants (keyword lists, selection sizes, date windows,
the distinctiveness threshold) live in the config file, not in code; the
shipped configs/ examples carry the standard values. Validation is
exhaustive: every problem found is reported, not just the first.
"""

from __future__ import annotations

import copy
from datetime import date, datetime
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus import FilterSpec, KeywordRule, LocationRule
from .errors import ConfigError

TERM_KINDS = ("hashtag", "account", "url")

# structural defaults only; corpus constants come from the config file
DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "jobs": 1,
    "paths": {"raw": None, "workdir": "out"},
    "filter": {"chain": [], "recipes": {}},
    "matrix": {"min_user_retweets": 5, "min_account_mentions": 2, "binary": False},
    "knn": {"k": 15},
    "embed": {
        "min_dist": 0.1,
        "spread": 1.0,
        "n_epochs": 500,
        "learning_rate": 1.0,
        "negative_sample_rate": 5,
        "init": "spectral",
    },
    "cluster": {
        "bandwidth": "auto",
        "auto_quantile": 0.1,
        "max_iterations": 300,
        "convergence_tol": 1e-4,
        "mode_merge_radius": None,
        "min_cluster_fraction": 0.01,
        "camp_seeds": {},
    },
    "valence": {
        "threshold": 0.6,
        "kinds": ["hashtag", "account", "url"],
        "dedup_per_tweet": False,
        "url_expansion": None,
    },
    "report": {
        "top_n": 100,
        "date_start": None,
        "date_end": None,
        "lexicon": None,
    },
    "synth": None,
}


def _deep_merge(base: dict, override: Mapping) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: str | Path, overrides: list[str] | None = None) -> dict:
    """Load, override, and validate a config file; raises ConfigError."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"]) from exc
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ConfigError(["config root must be a mapping"])
    cfg = _deep_merge(DEFAULTS, loaded)
    for item in overrides or []:
        apply_override(cfg, item)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def apply_override(cfg: dict, item: str) -> None:
    """Apply one ``dotted.key=value`` override; values parse as YAML."""
    if "=" not in item:
        raise ConfigError([f"override {item!r} is not of the form key=value"])
    dotted, _, raw = item.partition("=")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError([f"override value {raw!r} is not valid YAML: {exc}"]) from exc
    node = cfg
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def as_date(value) -> date | None:
    if value is None:
        return None
    if isinstance(value, datetime):
        return value.date()
    if isinstance(value, date):
        return value
    return date.fromisoformat(str(value))


def _check_date(value, where: str, problems: list[str]) -> date | None:
    try:
        return as_date(value)
    except ValueError:
        problems.append(f"{where}: {value!r} is not an ISO date")
        return None


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(cfg: Mapping) -> list[str]:
    """Every structural and range problem in the config, fail-slow."""
    problems: list[str] = []

    if not isinstance(cfg.get("seed"), int) or isinstance(cfg.get("seed"), bool):
        problems.append("seed: must be an integer")
    jobs = cfg.get("jobs")
    if not isinstance(jobs, int) or isinstance(jobs, bool) or jobs < 1:
        problems.append("jobs: must be an integer >= 1")

    paths = cfg.get("paths") or {}
    if not isinstance(paths, Mapping):
        problems.append("paths: must be a mapping")
        paths = {}
    if paths.get("workdir") in (None, ""):
        problems.append("paths.workdir: required")

    fsec = cfg.get("filter") or {}
    chain = fsec.get("chain") or []
    recipes = fsec.get("recipes") or {}
    if not isinstance(recipes, Mapping):
        problems.append("filter.recipes: must be a mapping")
        recipes = {}
    if not isinstance(chain, list):
        problems.append("filter.chain: must be a list of recipe names")
        chain = []
    for name in chain:
        if name not in recipes:
            problems.append(f"filter.chain: unknown recipe {name!r}")
    for name, recipe in recipes.items():
        _validate_recipe(name, recipe, problems)

    msec = cfg.get("matrix") or {}
    for key in ("min_user_retweets", "min_account_mentions"):
        value = msec.get(key)
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            problems.append(f"matrix.{key}: must be an integer >= 1")
    if not isinstance(msec.get("binary"), bool):
        problems.append("matrix.binary: must be a boolean")

    ksec = cfg.get("knn") or {}
    if not isinstance(ksec.get("k"), int) or ksec.get("k", 0) < 1:
        problems.append("knn.k: must be an integer >= 1")

    esec = cfg.get("embed") or {}
    if not isinstance(esec.get("n_epochs"), int) or esec.get("n_epochs", 0) < 1:
        problems.append("embed.n_epochs: must be an integer >= 1")
    min_dist, spread = esec.get("min_dist"), esec.get("spread")
    if not (_is_number(min_dist) and min_dist > 0):
        problems.append("embed.min_dist: must be a positive number")
    if not (_is_number(spread) and spread > 0):
        problems.append("embed.spread: must be a positive number")
    if _is_number(min_dist) and _is_number(spread) and min_dist > spread:
        problems.append("embed.min_dist: must not exceed embed.spread")
    if not (_is_number(esec.get("learning_rate")) and esec.get("learning_rate") > 0):
        problems.append("embed.learning_rate: must be a positive number")
    nsr = esec.get("negative_sample_rate")
    if not isinstance(nsr, int) or isinstance(nsr, bool) or nsr < 0:
        problems.append("embed.negative_sample_rate: must be an integer >= 0")
    if esec.get("init") not in ("spectral", "random"):
        problems.append("embed.init: must be 'spectral' or 'random'")

    csec = cfg.get("cluster") or {}
    bandwidth = csec.get("bandwidth")
    if bandwidth != "auto" and not (_is_number(bandwidth) and bandwidth > 0):
        problems.append("cluster.bandwidth: must be 'auto' or a positive number")
    quantile = csec.get("auto_quantile")
    if not (_is_number(quantile) and 0 < quantile < 1):
        problems.append("cluster.auto_quantile: must lie in (0, 1)")
    if not isinstance(csec.get("max_iterations"), int) or csec.get("max_iterations", 0) < 1:
        problems.append("cluster.max_iterations: must be an integer >= 1")
    if not (_is_number(csec.get("convergence_tol")) and csec.get("convergence_tol") > 0):
        problems.append("cluster.convergence_tol: must be a positive number")
    radius = csec.get("mode_merge_radius")
    if radius is not None and not (_is_number(radius) and radius > 0):
        problems.append("cluster.mode_merge_radius: must be null or a positive number")
    fraction = csec.get("min_cluster_fraction")
    if not (_is_number(fraction) and 0 <= fraction < 1):
        problems.append("cluster.min_cluster_fraction: must lie in [0, 1)")
    seeds = csec.get("camp_seeds") or {}
    if not isinstance(seeds, Mapping):
        problems.append("cluster.camp_seeds: must map camp name -> account list")
    elif seeds:
        if len(seeds) != 2:
            problems.append("cluster.camp_seeds: exactly two camps are required")
        all_accounts: list[str] = []
        for camp, accounts in seeds.items():
            if not str(camp).replace("_", "").replace("-", "").isalnum():
                problems.append(f"cluster.camp_seeds: camp name {camp!r} must be alphanumeric")
            if not isinstance(accounts, list) or not accounts:
                problems.append(f"cluster.camp_seeds.{camp}: must be a non-empty list")
            else:
                all_accounts.extend(str(a) for a in accounts)
        if len(all_accounts) != len(set(all_accounts)):
            problems.append("cluster.camp_seeds: seed lists must be disjoint")

    vsec = cfg.get("valence") or {}
    threshold = vsec.get("threshold")
    if not (_is_number(threshold) and 0 < threshold <= 1):
        problems.append("valence.threshold: must lie in (0, 1]")
    kinds = vsec.get("kinds")
    if not isinstance(kinds, list) or not kinds or any(k not in TERM_KINDS for k in kinds):
        problems.append(f"valence.kinds: must be a non-empty subset of {TERM_KINDS}")
    if not isinstance(vsec.get("dedup_per_tweet"), bool):
        problems.append("valence.dedup_per_tweet: must be a boolean")

    rsec = cfg.get("report") or {}
    if not isinstance(rsec.get("top_n"), int) or rsec.get("top_n", 0) < 1:
        problems.append("report.top_n: must be an integer >= 1")
    rstart = _check_date(rsec.get("date_start"), "report.date_start", problems)
    rend = _check_date(rsec.get("date_end"), "report.date_end", problems)
    if rstart and rend and rstart > rend:
        problems.append("report.date_start: must not exceed report.date_end")

    synth = cfg.get("synth")
    if synth is not None:
        _validate_synth(synth, problems)

    return problems


def _validate_recipe(name: str, recipe, problems: list[str]) -> None:
    where = f"filter.recipes.{name}"
    if not isinstance(recipe, Mapping):
        problems.append(f"{where}: must be a mapping")
        return
    keywords = recipe.get("keywords")
    if keywords is not None:
        if not isinstance(keywords, list) or not keywords:
            problems.append(f"{where}.keywords: must be a non-empty list when present")
        else:
            for kw in keywords:
                if isinstance(kw, str):
                    continue
                if isinstance(kw, Mapping) and isinstance(kw.get("text"), str):
                    continue
                problems.append(f"{where}.keywords: bad entry {kw!r}")
    if recipe.get("match_mode", "substring") not in ("substring", "token"):
        problems.append(f"{where}.match_mode: must be 'substring' or 'token'")
    if recipe.get("lang") is not None and not str(recipe.get("lang")):
        problems.append(f"{where}.lang: must be a non-empty tag")
    start = _check_date(recipe.get("date_start"), f"{where}.date_start", problems)
    end = _check_date(recipe.get("date_end"), f"{where}.date_end", problems)
    if start and end and start > end:
        problems.append(f"{where}.date_start: must not exceed date_end")
    for key in ("top_users", "sample_users"):
        value = recipe.get(key)
        if value is not None and (not isinstance(value, int) or value < 1):
            problems.append(f"{where}.{key}: must be an integer >= 1")
    if not isinstance(recipe.get("us_location", False), bool):
        problems.append(f"{where}.us_location: must be a boolean")


def _validate_synth(synth, problems: list[str]) -> None:
    if not isinstance(synth, Mapping):
        problems.append("synth: must be a mapping")
        return
    for key in ("users_per_camp", "accounts_per_camp"):
        value = synth.get(key)
        if not (
            isinstance(value, list)
            and len(value) == 2
            and all(isinstance(v, int) and v >= 0 for v in value)
        ):
            problems.append(f"synth.{key}: must be a list of two nonnegative integers")
    for key in ("crossover_probability", "shared_probability"):
        value = synth.get(key, 0.0)
        if not (_is_number(value) and 0 <= value <= 1):
            problems.append(f"synth.{key}: must lie in [0, 1]")
    for key in ("retweets_mean", "retweets_dispersion"):
        value = synth.get(key, 1.0)
        if not (_is_number(value) and value > 0):
            problems.append(f"synth.{key}: must be a positive number")
    start = _check_date(synth.get("date_start"), "synth.date_start", problems)
    end = _check_date(synth.get("date_end"), "synth.date_end", problems)
    if start and end and start > end:
        problems.append("synth.date_start: must not exceed date_end")
    if synth.get("output") in (None, ""):
        problems.append("synth.output: corpus output path required")
    if synth.get("ground_truth") in (None, ""):
        problems.append("synth.ground_truth: ground-truth output path required")


# ---------------------------------------------------------------------------
# typed views over validated sections


def recipe_to_spec(recipe: Mapping) -> FilterSpec:
    keywords = []
    for kw in recipe.get("keywords") or []:
        if isinstance(kw, str):
            keywords.append(KeywordRule(kw))
        else:
            keywords.append(KeywordRule(str(kw["text"]), kw.get("case_sensitive")))
    location_rules = tuple(
        LocationRule(str(rule["text"]), bool(rule.get("case_sensitive", False)))
        for rule in recipe.get("location_tokens") or []
    )
    return FilterSpec(
        keywords=tuple(keywords),
        match_mode=recipe.get("match_mode", "substring"),
        case_sensitive=bool(recipe.get("case_sensitive", False)),
        lang=recipe.get("lang"),
        date_start=as_date(recipe.get("date_start")),
        date_end=as_date(recipe.get("date_end")),
        location_rules=location_rules,
    )


def synth_params(cfg: Mapping):
    from .synth import SynthParams

    synth = cfg.get("synth") or {}
    defaults = SynthParams()
    pools = synth.get("hashtag_pools")
    return SynthParams(
        users_per_camp=tuple(synth.get("users_per_camp", defaults.users_per_camp)),
        accounts_per_camp=tuple(
            synth.get("accounts_per_camp", defaults.accounts_per_camp)
        ),
        shared_account_count=synth.get(
            "shared_account_count", defaults.shared_account_count
        ),
        crossover_probability=synth.get(
            "crossover_probability", defaults.crossover_probability
        ),
        shared_probability=synth.get("shared_probability", defaults.shared_probability),
        retweets_mean=synth.get("retweets_mean", defaults.retweets_mean),
        retweets_dispersion=synth.get(
            "retweets_dispersion", defaults.retweets_dispersion
        ),
        hashtag_pools=(
            (tuple(pools[0]), tuple(pools[1])) if pools else defaults.hashtag_pools
        ),
        date_start=as_date(synth.get("date_start")) or defaults.date_start,
        date_end=as_date(synth.get("date_end")) or defaults.date_end,
        seed=synth.get("seed", cfg.get("seed", 0)),
        camp_names=tuple(synth.get("camp_names", defaults.camp_names)),
    )
