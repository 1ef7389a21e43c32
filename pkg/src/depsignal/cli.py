"""Command-line entry point: ``depsignal <subcommand> [options]``.

Every subcommand reads the shared configuration (``--config`` TOML file or
a run manifest JSON), applies dotted overrides such as ``--trend.bin_days 7``
or ``--set trend.bin_days=7``, writes its outputs through a staging
directory into ``--out`` and finishes with ``<subcommand>.manifest.json``.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import config as config_mod
from .cohort import CohortReport, build_dp_cohort, load_patterns, match_depression_signal, sample_control
from .config import PipelineConfig
from .corpus import DP, SynthSpec, UserRecord, generate_synthetic, load_corpus, save_corpus, validate_corpus
from .errors import ConfigError, DataError
from .features import StubDemographicsProvider, StubPersonalityProvider, assemble_user_features, load_lexicon, read_features_csv, write_features_csv
from .fusion import (
    build_fusion_dataset, evaluate, permutation_importance, train_fusion, write_importance_csv, write_metrics_json,
)
from .manifest import Staging, build_manifest, sha256_file, write_manifest
from .metrics import evaluate_scores
from .resources import data_path
from .scorer import (
    ChunkScore, aggregate_user, cross_fit_scores, import_external_scores, learning_curve, load_model,
    read_user_scores, save_model, score_chunks, split_users, train_baseline, write_chunk_scores, write_user_scores,
)
from .textprep import Chunk, chunk_stream_for_trend, chunk_users, load_chunks, save_chunks
from .topics import LexiconPosTagger, filter_nouns, fit_lda, topic_report, write_topic_report
from .trend import dated_scores, geo_trend, group_trend, write_series_csv

log = logging.getLogger("depsignal")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


class Run:
    """Per-invocation state: config, staging directory and recorded inputs."""

    def __init__(self, cfg: PipelineConfig, stage: Path):
        self.cfg = cfg
        self.stage = stage
        self.inputs: dict[str, str] = {}

    def input(self, path, label: str | None = None) -> Path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"input file not found: {p}")
        self.inputs[label or str(path)] = sha256_file(p)
        return p

    def out(self, name: str) -> Path:
        return self.stage / name

    def seeds(self) -> dict[str, int]:
        c = self.cfg
        return {
            "synth": c.synth.seed, "control": c.cohort.control_seed, "scorer": c.scorer.seed,
            "features": c.features.seed, "fusion": c.fusion.seed, "topics": c.topics.seed,
        }


# ---------------------------------------------------------------------------
# steps shared by the subcommands and the pipeline


def _patterns(run: Run):
    path = run.cfg.paths.patterns
    if path is None:
        run.input(data_path("patterns.json"), "packaged:patterns.json")
        return load_patterns()
    return load_patterns(run.input(path))


def _lexicon(run: Run):
    path = run.cfg.paths.lexicon
    if path is None:
        run.input(data_path("lexicon.json"), "packaged:lexicon.json")
        return load_lexicon()
    return load_lexicon(run.input(path))


def _read_corpus(run: Run, path) -> list[UserRecord]:
    users = load_corpus(run.input(path))
    report = validate_corpus(users)
    if not report.ok:
        head = "; ".join(report.violations[:5])
        raise DataError(f"{path}: {len(report.violations)} validation problems: {head}")
    return users


def step_synth(run: Run) -> list[UserRecord]:
    s = run.cfg.synth
    spec = SynthSpec(
        n_dp=s.n_dp, n_nd=s.n_nd, seed=s.seed, signal_rate_dp=s.signal_rate_dp, signal_rate_nd=s.signal_rate_nd,
        step_date=s.step_date, signal_rate_dp_after=s.signal_rate_dp_after, topic_shift_date=s.topic_shift_date,
        start_date=s.start_date, end_date=s.end_date,
    )
    try:
        users = generate_synthetic(spec)
    except ValueError as exc:
        raise ConfigError(f"synth: {exc}") from exc
    save_corpus(users, run.out("corpus.jsonl"))
    log.info("synthesized %d users", len(users))
    return users


def step_cohort(run: Run, users: Sequence[UserRecord]) -> list[UserRecord]:
    c = run.cfg.cohort
    patterns = _patterns(run)
    report = CohortReport()
    dp = build_dp_cohort(users, patterns, window_days=c.window_days, tweet_cap=c.cap, report=report)
    n_control = len(dp) if c.n_control is None else c.n_control
    nd = sample_control(users, [u.user_id for u in dp], n_control, patterns, c.control_seed, c.cap)
    report.n_nd = len(nd)
    cohort = sorted(dp + nd, key=lambda u: u.user_id)
    if not dp or not nd:
        raise DataError(f"cohort has {len(dp)} DP and {len(nd)} ND users; both groups are required")
    save_corpus(cohort, run.out("cohort.jsonl"))
    with open(run.out("cohort_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("cohort: %d DP, %d ND", len(dp), len(nd))
    return cohort


def step_chunk(run: Run, cohort: Sequence[UserRecord]) -> list[Chunk]:
    ch = run.cfg.chunking
    chunks = chunk_users(cohort, ch.target_words, ch.min_words)
    if not chunks:
        raise DataError("no user produced a chunk")
    save_chunks(chunks, run.out("chunks.jsonl"))
    return chunks


def monitoring_users(corpus: Sequence[UserRecord], cohort: Sequence[UserRecord], patterns) -> list[UserRecord]:
    """Full timelines of cohort members with their cohort label, self-report tweets removed."""
    label = {u.user_id: u.label for u in cohort}
    out = []
    for u in corpus:
        if u.user_id not in label:
            continue
        tweets = tuple(t for t in u.tweets if not match_depression_signal(t.text, patterns).matched)
        out.append(replace(u, tweets=tweets, label=label[u.user_id]))
    return out


def step_trend_chunks(run: Run, users: Sequence[UserRecord]) -> list[Chunk]:
    t = run.cfg.trend
    chunks = [
        c for u in users
        for c in chunk_stream_for_trend(u, t.start, run.cfg.chunking.target_words, end_date=t.end)
    ]
    save_chunks(chunks, run.out("trend_chunks.jsonl"))
    return chunks


def _train_kwargs(cfg: PipelineConfig) -> dict:
    s = cfg.scorer
    return {"epochs": s.epochs, "lr": s.lr, "batch_size": s.batch_size, "l2": s.l2}


def step_train(run: Run, chunks: Sequence[Chunk]):
    model = train_baseline(chunks, seed=run.cfg.scorer.seed, **_train_kwargs(run.cfg))
    save_model(model, run.out("model.bin"))
    with open(run.out("training.json"), "w", encoding="utf-8") as fh:
        json.dump(model.meta(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return model


def _write_split(path, train_ids, test_ids) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "split"])
        for uid in sorted(set(train_ids) | set(test_ids)):
            w.writerow([uid, "test" if uid in test_ids else "train"])


def _read_split(path) -> tuple[set[str], set[str]]:
    train, test = set(), set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row.get("split") not in ("train", "test"):
                raise DataError(f"{path}: split must be train or test, got {row.get('split')!r}")
            (test if row["split"] == "test" else train).add(row["user_id"])
    return train, test


def _user_labels(chunks: Sequence[Chunk]) -> dict[str, str]:
    return {c.user_id: c.label for c in chunks if c.label}


def _eval_report(scores: Sequence[ChunkScore], labels: dict[str, str]) -> dict:
    y = [labels[s.user_id] == DP for s in scores]
    chunk = evaluate_scores([s.confidence for s in scores], y)
    users = aggregate_user(scores)
    user = evaluate_scores([u.mean_confidence for u in users], [labels[u.user_id] == DP for u in users])
    return {"chunk_level": chunk.to_json(), "user_level": user.to_json(),
            "n_chunks": len(scores), "n_users": len(users)}


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def step_features(run: Run, cohort: Sequence[UserRecord]):
    lex = _lexicon(run)
    seed = run.cfg.features.seed
    pp, dp = StubPersonalityProvider(seed), StubDemographicsProvider(seed)
    vectors = [assemble_user_features(u, lex, pp, dp) for u in cohort]
    write_features_csv(vectors, run.out("features.csv"), {u.user_id: u.label for u in cohort if u.label})
    return vectors


def step_fuse(run: Run, train_scores, test_scores, features, labels) -> dict:
    from .plotting import plot_importance

    f = run.cfg.fusion
    train = build_fusion_dataset(train_scores, features, labels, f.groups)
    test = build_fusion_dataset(test_scores, features, labels, f.groups)
    model = train_fusion(train, f.algorithm, f.seed, kernel=f.kernel, n_jobs=run.cfg.run.jobs)
    report = evaluate(model, test)
    write_metrics_json(
        report, run.out("fusion_metrics.json"), algorithm=model.algorithm, groups=list(train.groups),
        columns=list(train.column_names), seed=f.seed, kernel=f.kernel, n_train=len(train), n_test=len(test),
        svm_confidence="sigmoid calibration of the margin on held-out folds" if model.algorithm == "SVM" else None,
    )
    imp = permutation_importance(model, test, repeats=f.repeats, seed=f.seed)
    write_importance_csv(imp, run.out("importance.csv"))
    plot_importance(imp, run.out("importance.png"))
    return report.to_json()


def _keep_trailing(run: Run, chunks: Sequence[Chunk]) -> list[Chunk]:
    if run.cfg.trend.trailing == "drop":
        return [c for c in chunks if not c.trailing]
    return list(chunks)


def step_trend(run: Run, scores: Sequence[ChunkScore], users: Sequence[UserRecord], groups: Sequence[str]) -> None:
    from .plotting import plot_trend

    t = run.cfg.trend
    ds = dated_scores(scores, users)
    params = dict(bin_days=t.bin_days, trim_fraction=t.trim_fraction, window=t.window, trim_scope=t.trim_scope)
    meta = {"start": t.start.isoformat(), "end": t.end.isoformat(), "trailing": t.trailing, **params}
    for group in groups:
        if group == "cohort":
            series = group_trend(ds, "cohort", t.start, t.end, **params)
            extra = {}
        else:
            states = [s for s in t.states.split(",") if s.strip()]
            res = geo_trend(users, ds, states, t.start, t.end, min_users=t.min_users, **params)
            series = res.series
            extra = {"excluded_states": res.excluded, "state_user_counts": res.user_counts, "min_users": t.min_users}
        for name, s in series.items():
            write_series_csv(s, run.out(f"trend_{group}_{name}.csv"))
        _write_json(run.out(f"trend_{group}.json"), {
            **meta, **extra, "group": group,
            "series": {k: {"bins": len(v), "scores": int(sum(v.bin_counts)), "empty_bins": int(sum(c == 0 for c in v.bin_counts))}
                       for k, v in series.items()},
        })
        if series:
            plot_trend(series, run.out(f"trend_{group}.png"), title=f"trend by {group}")


def step_topics(run: Run, chunks: Sequence[Chunk]) -> list[dict]:
    from .plotting import plot_topic_counts

    tp = run.cfg.topics
    tagger = LexiconPosTagger()
    periods = {"before": [], "after": []}
    for c in chunks:
        if c.mid_date is None:
            continue
        nouns = filter_nouns(c.tokens, tagger)
        if nouns:
            periods["before" if c.mid_date < tp.split_date else "after"].append(nouns)
    reports = []
    for period, docs in periods.items():
        if not docs:
            log.warning("topics: no documents in period %s", period)
            continue
        model = fit_lda(docs, K=tp.k, alpha=tp.alpha, beta=tp.beta, iterations=tp.iterations, seed=tp.seed)
        rep = topic_report(model, period, tp.n_keywords)
        rep["split_date"] = tp.split_date.isoformat()
        write_topic_report(rep, run.out(f"topics_{period}.json"))
        reports.append(rep)
    if not reports:
        raise DataError("no noun-bearing chunks for topic modeling")
    plot_topic_counts(reports, run.out("topics.png"))
    return reports


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(run: Run, args) -> None:
    step_synth(run)


def cmd_cohort(run: Run, args) -> None:
    path = args.corpus or run.cfg.paths.corpus
    if not path:
        raise ConfigError("cohort needs --corpus or paths.corpus")
    step_cohort(run, _read_corpus(run, path))


def cmd_chunk(run: Run, args) -> None:
    users = _read_corpus(run, args.corpus)
    if args.trend:
        step_trend_chunks(run, users)
    else:
        step_chunk(run, users)


def cmd_train(run: Run, args) -> None:
    step_train(run, load_chunks(run.input(args.chunks)))


def cmd_score(run: Run, args) -> None:
    model = load_model(run.input(args.model))
    scores = score_chunks(model, load_chunks(run.input(args.chunks)))
    write_chunk_scores(scores, run.out("chunk_scores.csv"))
    write_user_scores(aggregate_user(scores), run.out("user_scores.csv"))


def cmd_import_scores(run: Run, args) -> None:
    path = args.scores or run.cfg.paths.external_scores
    if not path:
        raise ConfigError("import-scores needs --scores or paths.external_scores")
    scores = import_external_scores(run.input(path))
    if not scores:
        raise DataError(f"{path}: no score rows")
    write_chunk_scores(scores, run.out("chunk_scores.csv"))
    write_user_scores(aggregate_user(scores), run.out("user_scores.csv"))


def cmd_features(run: Run, args) -> None:
    step_features(run, _read_corpus(run, args.corpus))


def cmd_fuse(run: Run, args) -> None:
    scores = read_user_scores(run.input(args.user_scores))
    features, labels = read_features_csv(run.input(args.features))
    if args.split:
        train_ids, test_ids = _read_split(run.input(args.split))
    else:
        ids = sorted(labels)
        rng = np.random.default_rng(run.cfg.fusion.seed)
        train_ids, test_ids = split_users(ids, [labels[u] for u in ids], run.cfg.scorer.test_fraction, rng)
    train = [s for s in scores if s.user_id in train_ids]
    test = [s for s in scores if s.user_id in test_ids]
    step_fuse(run, train, test, features, labels)


def cmd_eval(run: Run, args) -> None:
    model = load_model(run.input(args.model))
    chunks = load_chunks(run.input(args.chunks))
    labels = _user_labels(chunks)
    if len(set(labels.values())) < 2:
        raise DataError("evaluation chunks must carry both DP and ND labels")
    _write_json(run.out("eval_metrics.json"), _eval_report(score_chunks(model, chunks), labels))
    if args.learning_curve:
        from .plotting import plot_learning_curve

        users = _read_corpus(run, args.learning_curve)
        sizes = [int(s) for s in args.sizes.split(",")]
        ch = run.cfg.chunking
        rows = learning_curve(users, sizes, test_size=args.test_size, seed=run.cfg.scorer.seed,
                              target_words=ch.target_words, min_words=ch.min_words, **_train_kwargs(run.cfg))
        with open(run.out("learning_curve.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        plot_learning_curve(rows, run.out("learning_curve.png"))


def cmd_trend(run: Run, args) -> None:
    scores = import_external_scores(run.input(args.chunk_scores))
    users = _read_corpus(run, args.corpus)
    if run.cfg.trend.trailing == "drop":
        if not args.chunks:
            raise ConfigError("trend.trailing = drop needs --chunks to identify trailing chunks")
        trailing = set()
        seen: dict[str, int] = {}
        for c in load_chunks(run.input(args.chunks)):
            i = seen.get(c.user_id, 0)
            seen[c.user_id] = i + 1
            if c.trailing:
                trailing.add((c.user_id, i))
        scores = [s for s in scores if (s.user_id, s.chunk_index) not in trailing]
    step_trend(run, scores, users, [run.cfg.trend.group])


def cmd_topics(run: Run, args) -> None:
    step_topics(run, load_chunks(run.input(args.chunks)))


def cmd_pipeline(run: Run, args) -> None:
    cfg = run.cfg
    if cfg.paths.corpus:
        corpus = _read_corpus(run, cfg.paths.corpus)
    else:
        corpus = step_synth(run)
    cohort = step_cohort(run, corpus)
    chunks = step_chunk(run, cohort)
    labels = {u.user_id: u.label for u in cohort}

    rng = np.random.default_rng(cfg.scorer.seed)
    ids = sorted(labels)
    train_ids, test_ids = split_users(ids, [labels[u] for u in ids], cfg.scorer.test_fraction, rng)
    _write_split(run.out("split.csv"), train_ids, test_ids)
    train_chunks = [c for c in chunks if c.user_id in train_ids]
    test_chunks = [c for c in chunks if c.user_id in test_ids]

    monitor_users = monitoring_users(corpus, cohort, _patterns(run))
    monitor = _keep_trailing(run, step_trend_chunks(run, monitor_users))
    if cfg.paths.external_scores:
        external = import_external_scores(run.input(cfg.paths.external_scores))
        test_scores = [s for s in external if s.user_id in test_ids]
        train_user_scores = aggregate_user(s for s in external if s.user_id in train_ids)
        trend_scores = [s for s in external if s.mid_date is not None]
    else:
        model = step_train(run, train_chunks)
        test_scores = score_chunks(model, test_chunks)
        oof = cross_fit_scores(train_chunks, cfg.scorer.folds, cfg.scorer.seed, **_train_kwargs(cfg))
        train_user_scores = aggregate_user(oof)
        trend_scores = score_chunks(model, monitor)
        write_chunk_scores(oof, run.out("train_oof_chunk_scores.csv"))
    write_chunk_scores(test_scores, run.out("chunk_scores.csv"))
    test_user_scores = aggregate_user(test_scores)
    write_user_scores(sorted(train_user_scores + test_user_scores, key=lambda s: s.user_id), run.out("user_scores.csv"))
    write_chunk_scores(trend_scores, run.out("trend_chunk_scores.csv"))
    _write_json(run.out("eval_metrics.json"), _eval_report(test_scores, labels))

    vectors = step_features(run, cohort)
    features = {v.user_id: v for v in vectors}
    step_fuse(run, train_user_scores, test_user_scores, features, labels)
    step_trend(run, trend_scores, monitor_users, ["cohort", "state"])
    step_topics(run, monitor)


COMMANDS = {
    "synth": cmd_synth, "cohort": cmd_cohort, "chunk": cmd_chunk, "features": cmd_features,
    "train": cmd_train, "score": cmd_score, "import-scores": cmd_import_scores, "fuse": cmd_fuse,
    "eval": cmd_eval, "trend": cmd_trend, "topics": cmd_topics, "pipeline": cmd_pipeline,
}

# short flags documented per subcommand, mapped onto dotted config keys
SHORT_FLAGS = {
    "synth": [("--n-dp", "synth.n_dp"), ("--n-nd", "synth.n_nd"), ("--seed", "synth.seed")],
    "cohort": [("--patterns", "paths.patterns"), ("--window-days", "cohort.window_days"), ("--cap", "cohort.cap"),
               ("--control-seed", "cohort.control_seed"), ("--n-control", "cohort.n_control")],
    "chunk": [("--target", "chunking.target_words"), ("--min", "chunking.min_words"),
              ("--start", "trend.start"), ("--end", "trend.end")],
    "train": [("--seed", "scorer.seed"), ("--epochs", "scorer.epochs"), ("--lr", "scorer.lr")],
    "features": [("--lexicon", "paths.lexicon"), ("--seed", "features.seed")],
    "fuse": [("--groups", "fusion.groups"), ("--algo", "fusion.algorithm"), ("--seed", "fusion.seed"),
             ("--kernel", "fusion.kernel"), ("--repeats", "fusion.repeats")],
    "eval": [("--seed", "scorer.seed")],
    "trend": [("--group", "trend.group"), ("--bin-days", "trend.bin_days"), ("--trim", "trend.trim_fraction"),
              ("--window", "trend.window"), ("--start", "trend.start"), ("--end", "trend.end"),
              ("--trim-scope", "trend.trim_scope"), ("--trailing", "trend.trailing"),
              ("--min-users", "trend.min_users"), ("--states", "trend.states")],
    "topics": [("--k", "topics.k"), ("--split-date", "topics.split_date"), ("--seed", "topics.seed"),
               ("--iterations", "topics.iterations")],
    "pipeline": [("--corpus", "paths.corpus"), ("--external-scores", "paths.external_scores")],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="depsignal", description="Depression-signal pipeline for tweet corpora.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=(COMMANDS[name].__doc__ or "").strip() or None)
        p.add_argument("--config", help="TOML config file or a run manifest JSON")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config value")
        p.add_argument("--jobs", dest="run.jobs", default=argparse.SUPPRESS, metavar="N", help="worker count")
        if name in ("cohort",):
            p.add_argument("--corpus", help="corpus JSONL")
        if name in ("chunk", "features"):
            p.add_argument("--corpus", required=True, help="cohort JSONL")
        if name == "chunk":
            p.add_argument("--trend", action="store_true", help="trend-mode chunk stream from --start")
        if name in ("train", "score", "eval", "topics"):
            p.add_argument("--chunks", required=True, help="chunk JSONL")
        if name in ("score", "eval"):
            p.add_argument("--model", required=True, help="model file from train")
        if name == "eval":
            p.add_argument("--learning-curve", metavar="CORPUS", help="labeled corpus for a learning curve")
            p.add_argument("--sizes", default="200,500,1000", help="training sizes for the learning curve")
            p.add_argument("--test-size", type=int, default=500, help="held-out users for the learning curve")
        if name == "import-scores":
            p.add_argument("--scores", help="CSV user_id,chunk_index,confidence[,mid_date]")
        if name == "fuse":
            p.add_argument("--user-scores", required=True)
            p.add_argument("--features", required=True)
            p.add_argument("--split", help="CSV user_id,split with train/test rows")
        if name == "trend":
            p.add_argument("--chunk-scores", required=True, help="chunk scores with mid_date")
            p.add_argument("--corpus", required=True, help="labeled corpus giving cohort and state")
            p.add_argument("--chunks", help="trend chunk JSONL, needed for --trailing drop")
        for flag, key in SHORT_FLAGS.get(name, []):
            p.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=f"same as --{key}")
        group = p.add_argument_group("config overrides")
        for key, _tp in config_mod.dotted_keys():
            group.add_argument(f"--{key}", dest=key, default=argparse.SUPPRESS, metavar="VALUE", help=argparse.SUPPRESS)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = config_mod.load_config(args.config)
    overrides = [(k, v) for k, v in vars(args).items() if "." in k]
    overrides += [config_mod.parse_set_option(s) for s in args.set]
    config_mod.apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def run_command(args) -> None:
    cfg = resolve_config(args)
    out = Path(args.out)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"--out {out} is not a directory")
    with Staging(out) as stage:
        run = Run(cfg, stage)
        COMMANDS[args.command](run, args)
        outputs = {p.relative_to(stage).as_posix(): sha256_file(p) for p in sorted(stage.rglob("*")) if p.is_file()}
        manifest = build_manifest(args.command, cfg.to_json(), run.inputs, outputs, run.seeds())
        write_manifest(manifest, stage / f"{args.command}.manifest.json")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run_command(args)
    except ConfigError as exc:
        print(f"depsignal: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"depsignal: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - the exit code contract covers every other failure
        log.debug("failure", exc_info=True)
        print(f"depsignal: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
