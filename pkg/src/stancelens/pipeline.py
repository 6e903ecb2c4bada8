"""File-to-file stage orchestration with run manifests.

Stages communicate only through files under the configured workdir, so
every intermediate is inspectable and re-runnable. Each stage writes a
manifest (config hash, input/output hashes, versions, wall time) to
``<workdir>/manifests/``; a stage is skipped when its manifest still
matches the config, inputs, and outputs on disk. Manifests are run
metadata, not artifacts: the byte-identical-rerun guarantee covers
everything outside the manifests directory.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable, Mapping

from . import __version__
from .cluster import StanceAssignment, assign_stances, label_clusters_by_seeds
from .cluster import load_assignment, save_assignment, save_cluster_summary
from .config import as_date, recipe_to_spec, synth_params
from .corpus import (
    corpus_stats,
    filter_by_daterange,
    filter_by_keywords,
    filter_by_language,
    filter_by_location,
    filter_by_users,
    load_state_table,
    read_tweets,
    sample_users,
    select_top_users,
    us_location_rules,
    write_tweets,
)
from .embed import embed_knn, load_embedding, save_embedding
from .errors import DataError, StanceLensError
from .graph import build_retweet_matrix, knn_graph, load_knn, load_matrix, save_knn, save_matrix
from .report import (
    categorize_terms,
    daily_counts,
    emit_timeseries_plot,
    load_lexicon,
    top_terms_table,
    write_categories_csv,
    write_daily_csv,
    write_top_terms_csv,
)
from .synth import generate_corpus, write_ground_truth
from .valence import count_terms, distinctive_terms, write_valence_csv

STAGES = ("filter", "matrix", "knn", "embed", "cluster", "valence", "report")


@dataclass
class StageResult:
    name: str
    skipped: bool
    outputs: list[Path]
    wall_time_s: float


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(cfg: Mapping, sections: tuple[str, ...]) -> str:
    view = {name: cfg.get(name) for name in sections}
    canonical = json.dumps(view, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def workdir(cfg: Mapping) -> Path:
    return Path(cfg["paths"]["workdir"])


def camp_order(cfg: Mapping) -> list[str]:
    return list(cfg["cluster"]["camp_seeds"])


def stage_io(name: str, cfg: Mapping) -> tuple[list[Path], list[Path], tuple[str, ...]]:
    """(inputs, outputs, config sections that shape the outputs)."""
    out = workdir(cfg)
    filtered = out / "filtered.jsonl"
    matrix = out / "matrix.txt"
    matrix_side = [Path(str(matrix) + ".users"), Path(str(matrix) + ".accounts")]
    knn = out / "knn.txt"
    embedding = out / "embedding.txt"
    assignment = out / "assignment.txt"
    summary = out / "cluster_summary.json"
    camps = camp_order(cfg)

    if name == "filter":
        raw = cfg["paths"].get("raw")
        if raw in (None, ""):
            raise DataError("paths.raw is not configured")
        return [Path(raw)], [filtered, out / "filter_stats.json"], ("seed", "filter")
    if name == "matrix":
        return [filtered], [matrix, *matrix_side], ("matrix",)
    if name == "knn":
        return [matrix, *matrix_side], [knn], ("knn",)
    if name == "embed":
        return [matrix, *matrix_side, knn], [embedding], ("seed", "embed")
    if name == "cluster":
        return (
            [embedding, matrix, *matrix_side],
            [assignment, summary],
            ("seed", "cluster"),
        )
    if name == "valence":
        outputs = [
            out / f"valence_{camp}_{kind}.csv"
            for camp in camps
            for kind in cfg["valence"]["kinds"]
        ]
        return [filtered, assignment, summary], outputs, ("cluster", "valence")
    if name == "report":
        inputs = [filtered, assignment, summary]
        lexicon = cfg["report"].get("lexicon")
        if lexicon:
            inputs.append(Path(lexicon))
        outputs = [out / "daily_counts.csv", out / "daily_tweets.svg"]
        outputs += [out / f"top_terms_{camp}.csv" for camp in camps]
        if lexicon:
            outputs += [out / f"categories_{camp}.csv" for camp in camps]
        return inputs, outputs, ("cluster", "report")
    raise ValueError(f"unknown stage {name!r}")


_PRODUCERS = {
    "filtered.jsonl": "filter",
    "filter_stats.json": "filter",
    "matrix.txt": "matrix",
    "matrix.txt.users": "matrix",
    "matrix.txt.accounts": "matrix",
    "knn.txt": "knn",
    "embedding.txt": "embed",
    "assignment.txt": "cluster",
    "cluster_summary.json": "cluster",
}


def _check_inputs(name: str, inputs: list[Path]) -> None:
    for path in inputs:
        if not path.is_file():
            producer = _PRODUCERS.get(path.name)
            hint = f"; run the '{producer}' stage first" if producer else ""
            raise DataError(f"missing input {path}{hint}")


def _manifest_path(cfg: Mapping, name: str) -> Path:
    return workdir(cfg) / "manifests" / f"{name}.json"


def _can_skip(manifest_path: Path, conf_hash: str, inputs: list[Path], outputs: list[Path]) -> bool:
    if not manifest_path.is_file():
        return False
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        return False
    if manifest.get("config_hash") != conf_hash:
        return False
    recorded_inputs = manifest.get("inputs", {})
    if set(recorded_inputs) != {str(p) for p in inputs}:
        return False
    for path in inputs:
        if recorded_inputs[str(path)] != file_sha256(path):
            return False
    recorded_outputs = manifest.get("outputs", {})
    if set(recorded_outputs) != {str(p) for p in outputs}:
        return False
    for path in outputs:
        if not path.is_file() or recorded_outputs[str(path)] != file_sha256(path):
            return False
    return True


def run_stage(name: str, cfg: Mapping, force: bool = False) -> StageResult:
    """Run one stage (or skip it when its manifest still matches)."""
    inputs, outputs, sections = stage_io(name, cfg)
    _check_inputs(name, inputs)
    conf_hash = config_hash(cfg, sections)
    manifest_path = _manifest_path(cfg, name)
    if not force and _can_skip(manifest_path, conf_hash, inputs, outputs):
        return StageResult(name=name, skipped=True, outputs=outputs, wall_time_s=0.0)

    workdir(cfg).mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    _STAGE_RUNNERS[name](cfg)
    elapsed = time.perf_counter() - started

    for path in outputs:
        if not path.is_file():
            raise StanceLensError(f"stage {name} did not produce {path}")
    manifest = {
        "stage": name,
        "config_hash": conf_hash,
        "config": json.loads(
            json.dumps({s: cfg.get(s) for s in sections}, default=str)
        ),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": {str(p): file_sha256(p) for p in outputs},
        "versions": {
            "stancelens": __version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": elapsed,
    }
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return StageResult(name=name, skipped=False, outputs=outputs, wall_time_s=elapsed)


def run_pipeline(cfg: Mapping, force: bool = False) -> list[StageResult]:
    """filter -> matrix -> knn -> embed -> cluster -> valence -> report."""
    results = []
    for name in STAGES:
        try:
            results.append(run_stage(name, cfg, force=force))
        except StanceLensError as exc:
            raise type(exc)(f"{name}: {exc}") from exc
    return results


# ---------------------------------------------------------------------------
# stage bodies


def apply_recipe(tweets, recipe: Mapping, seed: int):
    spec = recipe_to_spec(recipe)
    if spec.keywords:
        tweets = filter_by_keywords(tweets, spec)
    if spec.lang:
        tweets = filter_by_language(tweets, spec.lang)
    if spec.date_start or spec.date_end:
        tweets = filter_by_daterange(
            tweets, spec.date_start or date.min, spec.date_end or date.max
        )
    if recipe.get("us_location"):
        table = load_state_table(recipe.get("state_table"))
        tweets = filter_by_location(tweets, us_location_rules(table))
    if spec.location_rules:
        tweets = filter_by_location(tweets, spec.location_rules)
    if recipe.get("top_users"):
        top = select_top_users(tweets, int(recipe["top_users"]))
        tweets = filter_by_users(tweets, top)
    if recipe.get("sample_users"):
        population = sorted({t.user_id for t in tweets})
        chosen = sample_users(population, int(recipe["sample_users"]), seed)
        tweets = filter_by_users(tweets, chosen)
    return tweets


def _run_filter(cfg: Mapping) -> None:
    out = workdir(cfg)
    tweets = list(read_tweets(cfg["paths"]["raw"]))
    stats = {"input": _stats_dict(tweets)}
    for recipe_name in cfg["filter"]["chain"]:
        recipe = cfg["filter"]["recipes"][recipe_name]
        tweets = apply_recipe(tweets, recipe, int(cfg["seed"]))
        stats[recipe_name] = _stats_dict(tweets)
    write_tweets(tweets, out / "filtered.jsonl")
    (out / "filter_stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _stats_dict(tweets) -> dict:
    stats = corpus_stats(tweets)
    return {
        "tweet_count": stats.tweet_count,
        "user_count": stats.user_count,
        "tweets_per_user_mean": stats.tweets_per_user_mean,
        "tweets_per_user_stddev": stats.tweets_per_user_stddev,
        "tweets_per_user_min": stats.tweets_per_user_min,
        "tweets_per_user_max": stats.tweets_per_user_max,
    }


def _run_matrix(cfg: Mapping) -> None:
    out = workdir(cfg)
    tweets = read_tweets(out / "filtered.jsonl")
    msec = cfg["matrix"]
    matrix = build_retweet_matrix(
        tweets,
        min_user_retweets=int(msec["min_user_retweets"]),
        min_account_mentions=int(msec["min_account_mentions"]),
        binary=bool(msec["binary"]),
    )
    save_matrix(matrix, out / "matrix.txt")


def _run_knn(cfg: Mapping) -> None:
    out = workdir(cfg)
    matrix = load_matrix(out / "matrix.txt")
    graph = knn_graph(matrix, int(cfg["knn"]["k"]), jobs=int(cfg["jobs"]))
    save_knn(graph, out / "knn.txt")


def _run_embed(cfg: Mapping) -> None:
    out = workdir(cfg)
    matrix = load_matrix(out / "matrix.txt")
    knn = load_knn(out / "knn.txt")
    esec = cfg["embed"]
    coords = embed_knn(
        knn,
        min_dist=float(esec["min_dist"]),
        spread=float(esec["spread"]),
        n_epochs=int(esec["n_epochs"]),
        learning_rate=float(esec["learning_rate"]),
        negative_sample_rate=int(esec["negative_sample_rate"]),
        seed=int(cfg["seed"]),
        init=esec["init"],
    )
    save_embedding(matrix.users, coords, out / "embedding.txt")


def _run_cluster(cfg: Mapping) -> None:
    out = workdir(cfg)
    users, coords = load_embedding(out / "embedding.txt")
    matrix = load_matrix(out / "matrix.txt")
    csec = cfg["cluster"]
    assignment = assign_stances(
        users,
        coords,
        bandwidth=csec["bandwidth"],
        auto_quantile=float(csec["auto_quantile"]),
        max_iterations=int(csec["max_iterations"]),
        convergence_tol=float(csec["convergence_tol"]),
        mode_merge_radius=csec["mode_merge_radius"],
        min_cluster_fraction=float(csec["min_cluster_fraction"]),
        seed=int(cfg["seed"]),
    )
    named = label_clusters_by_seeds(assignment, matrix, csec["camp_seeds"])
    save_assignment(named, out / "assignment.txt")
    save_cluster_summary(named, out / "cluster_summary.json")


def _load_named_assignment(cfg: Mapping) -> StanceAssignment:
    out = workdir(cfg)
    labels = load_assignment(out / "assignment.txt")
    summary = json.loads((out / "cluster_summary.json").read_text(encoding="utf-8"))
    camp_names = summary.get("camp_names")
    if not camp_names:
        raise DataError("cluster summary has no camp names; rerun the cluster stage")
    return StanceAssignment.from_label_map(labels, camp_names)


def _run_valence(cfg: Mapping) -> None:
    out = workdir(cfg)
    assignment = _load_named_assignment(cfg)
    tweets = list(read_tweets(out / "filtered.jsonl"))
    vsec = cfg["valence"]
    for kind in vsec["kinds"]:
        counts = count_terms(
            tweets, assignment, kind, dedup_per_tweet=bool(vsec["dedup_per_tweet"])
        )
        for camp in camp_order(cfg):
            entries = distinctive_terms(counts, camp, float(vsec["threshold"]))
            write_valence_csv(entries, out / f"valence_{camp}_{kind}.csv", counts)


def _run_report(cfg: Mapping) -> None:
    out = workdir(cfg)
    assignment = _load_named_assignment(cfg)
    tweets = list(read_tweets(out / "filtered.jsonl"))
    rsec = cfg["report"]

    start, end = rsec.get("date_start"), rsec.get("date_end")
    if start is None or end is None:
        camp_of = assignment.user_to_camp()
        days = sorted(t.day() for t in tweets if t.user_id in camp_of)
        if not days:
            raise DataError(
                "cannot infer the report window from an empty assigned corpus; "
                "set report.date_start and report.date_end"
            )
        start, end = start or days[0], end or days[-1]
    start, end = as_date(start), as_date(end)

    series = daily_counts(tweets, assignment, start, end)
    write_daily_csv(series, out / "daily_counts.csv")
    emit_timeseries_plot(series, out / "daily_tweets.svg")

    lexicon = load_lexicon(rsec["lexicon"]) if rsec.get("lexicon") else None
    excluded = lexicon.excluded if lexicon else frozenset()
    counts = count_terms(tweets, assignment, "hashtag")
    table = top_terms_table(counts, int(rsec["top_n"]), excluded)
    for camp in camp_order(cfg):
        write_top_terms_csv(table[camp], out / f"top_terms_{camp}.csv", counts)
        if lexicon:
            breakdown = categorize_terms(table[camp], lexicon)
            write_categories_csv(breakdown, out / f"categories_{camp}.csv")


def run_synth(cfg: Mapping) -> list[Path]:
    """Generate the configured synthetic corpus and ground truth files."""
    synth = cfg.get("synth")
    if not synth:
        raise DataError("config has no synth section")
    params = synth_params(cfg)
    tweets, truth = generate_corpus(params)
    corpus_path = Path(synth["output"])
    truth_path = Path(synth["ground_truth"])
    corpus_path.parent.mkdir(parents=True, exist_ok=True)
    truth_path.parent.mkdir(parents=True, exist_ok=True)
    write_tweets(tweets, corpus_path)
    write_ground_truth(truth, truth_path)
    return [corpus_path, truth_path]


_STAGE_RUNNERS: dict[str, Callable[[Mapping], None]] = {
    "filter": _run_filter,
    "matrix": _run_matrix,
    "knn": _run_knn,
    "embed": _run_embed,
    "cluster": _run_cluster,
    "valence": _run_valence,
    "report": _run_report,
}
