"""Command-line entry point: ``forumhawkes {simulate,train,recommend,evaluate,analyze}``.

Options can come from flags or from a ``key = value`` file given with
``--config``; flags win.  Every command validates its options before doing
any work, so a bad invocation leaves no files behind.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import analytics, recommend
from .config import parse_list, read_kv_file
from .forumdata import CorpusError, ingest_corpus, load_preprocess_config, write_corpus
from .inference import (
    HOUR,
    GibbsSampler,
    PosteriorEstimate,
    SamplerConfig,
    write_trace_csv,
)
from .ppcore import ModelParams
from .simulator import SimConfig, SupercriticalError, planted_params, simulate_corpus, write_truth

log = logging.getLogger("forumhawkes")

EXIT_USAGE = 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------- config


def _bool(v: str) -> bool:
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


_SAMPLER_KEYS = {f.name for f in fields(SamplerConfig)}


def sampler_config(kv: dict, seed: int | None) -> SamplerConfig:
    """Build a :class:`SamplerConfig` from string options, ignoring unrelated keys."""
    opts = {}
    for key, raw in kv.items():
        if key not in _SAMPLER_KEYS:
            continue
        if key == "half_lives":
            opts[key] = tuple(parse_list(raw))
        elif key in ("collapse_rates", "narrow_parents"):
            opts[key] = _bool(raw)
        elif key in ("K", "iterations", "burn_in", "seed"):
            opts[key] = int(raw)
        else:
            opts[key] = float(raw)
    if seed is not None:
        opts["seed"] = seed
    return SamplerConfig(**opts)


SIM_DEFAULTS = {
    "learners": "200",
    "topics": "3",
    "vocabulary": "150",
    "horizon": "60",
    "half_lives": f"{4 * HOUR!r} 1 7",
    "alpha": "1.5",
    "beta": "2",
    "threads_per_day": "8.333333333333334",
    "branching": "0.95",
    "active_fraction": "0.2",
    "passive_interest": "0.005",
    "off_topic_interest": "0.02",
    "tokens_per_post": "12",
    "reply_probability": "0.9",
}


def _simulation(kv: dict, seed: int) -> SimConfig:
    opts = {**SIM_DEFAULTS, **kv}
    U = int(opts["learners"])
    if U < 1:
        raise UsageError("simulation needs at least one learner")
    horizon = float(opts["horizon"])
    if horizon <= 0:
        raise UsageError("horizon must be positive")
    if "params" in opts:
        with open(opts["params"]) as fh:
            params = ModelParams.from_dict(json.load(fh))
        params.validate()
        if params.U != U and "learners" in kv:
            raise UsageError("learners disagrees with the parameter file")
        if params.phi is None:
            raise UsageError("parameter file needs a phi matrix")
    else:
        K = int(opts["topics"])
        V = int(opts["vocabulary"])
        half = parse_list(opts["half_lives"])
        if K < 1 or V < 1:
            raise UsageError("topics and vocabulary must be positive")
        if len(half) != K:
            raise UsageError(f"need {K} half-lives, got {len(half)}")
        params = planted_params(
            U, K, V, half, float(opts["alpha"]), float(opts["beta"]),
            np.random.default_rng(seed),
            threads_per_day=float(opts["threads_per_day"]),
            branching=float(opts["branching"]),
            active_fraction=float(opts["active_fraction"]),
            passive_interest=float(opts["passive_interest"]),
            off_topic_interest=float(opts["off_topic_interest"]),
        )
    return SimConfig(
        params=params,
        horizon=horizon,
        tokens_per_post=float(opts["tokens_per_post"]),
        reply_probability=float(opts["reply_probability"]),
        seed=seed,
    )


def _load_corpus(args, kv: dict):
    if not args.input:
        raise UsageError("--input is required")
    if not Path(args.input).is_file():
        raise FileNotFoundError(f"corpus not found: {args.input}")
    pre = None
    pre_path = getattr(args, "preprocess", None) or kv.get("preprocess")
    if pre_path:
        pre = load_preprocess_config(pre_path)
    return ingest_corpus(args.input, preprocess=pre)


def _split_spec(args, kv: dict) -> recommend.SplitSpec:
    T1 = args.T1 if args.T1 is not None else kv.get("T1")
    T2 = args.T2 if args.T2 is not None else kv.get("T2")
    if T1 is None or T2 is None:
        raise UsageError("--T1 and --T2 are required")
    return recommend.SplitSpec(float(T1), float(T2))


# -------------------------------------------------------------- commands


def cmd_simulate(args, kv: dict) -> int:
    if not args.output:
        raise UsageError("--output is required")
    sim = _simulation(kv, args.seed)
    corpus, truth = simulate_corpus(sim)
    write_corpus(corpus, args.output)
    truth_path = args.truth or str(args.output) + ".truth.json"
    write_truth(truth, truth_path)
    print(f"wrote {len(corpus.threads)} threads, {corpus.n_posts} posts to {args.output}")
    return 0


def cmd_train(args, kv: dict) -> int:
    if not args.output:
        raise UsageError("--output is required")
    config = sampler_config(kv, args.seed)
    if args.iterations is not None:
        config = replace(config, iterations=args.iterations)
    if args.K is not None:
        config = replace(config, K=args.K)
    config.validate()
    corpus = _load_corpus(args, kv)
    ckpt = args.checkpoint
    if ckpt and args.resume and Path(ckpt).is_file():
        sampler = GibbsSampler.from_checkpoint(ckpt, corpus)
        log.info("resumed at iteration %d", sampler.iteration)
    else:
        sampler = GibbsSampler(corpus, config)
    est = sampler.run(checkpoint=ckpt, checkpoint_every=args.checkpoint_every)
    est.save(args.output)
    if args.trace:
        write_trace_csv(est, args.trace)
    print(f"trained K={est.K} on {len(corpus.threads)} threads; alpha={est.params.alpha:.4g} "
          f"beta={est.params.beta:.4g}")
    return 0


def cmd_recommend(args, kv: dict) -> int:
    if not args.output:
        raise UsageError("--output is required")
    spec = _split_spec(args, kv)
    config = sampler_config(kv, args.seed)
    if args.K is not None:
        config = replace(config, K=args.K)
    corpus = _load_corpus(args, kv)
    split = recommend.split_corpus(corpus, spec)
    if args.estimate:
        est = PosteriorEstimate.load(args.estimate)
    else:
        from .inference import run_gibbs

        est = run_gibbs(split.train, split.annotations, config)
    ranks = recommend.rank_all(est, split)
    recommend.write_rankings_csv(ranks, args.output, top=args.top)
    print(f"ranked {len(split.thread_ids)} threads for {len(ranks)} learners")
    return 0


def cmd_evaluate(args, kv: dict) -> int:
    if not args.output:
        raise UsageError("--output is required")
    sampler = sampler_config(kv, args.seed)
    grid = recommend.ExperimentConfig(
        T1=tuple(parse_list(kv.get("T1_grid", "30"))),
        window=tuple(parse_list(kv.get("window_grid", "7"))),
        K=tuple(parse_list(kv.get("K_grid", str(sampler.K)), int)),
        N=tuple(parse_list(kv.get("N_grid", "5"), int)),
        sampler=sampler,
    )
    if min(grid.T1) <= 0 or min(grid.window) <= 0 or min(grid.K) < 1 or min(grid.N) < 1:
        raise UsageError("grids need positive T1, window, K and N values")
    corpus = _load_corpus(args, kv)
    rows = recommend.sweep_experiment(corpus, grid, jobs=args.jobs)
    recommend.write_summary_csv(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def cmd_analyze(args, kv: dict) -> int:
    if not args.output:
        raise UsageError("--output is required")
    if not args.estimate:
        raise UsageError("--estimate is required")
    est = PosteriorEstimate.load(args.estimate)
    corpus = _load_corpus(args, kv)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    analytics.write_half_lives_csv(analytics.half_life_table(est), out / "half_lives.csv")
    levels = analytics.excitation_levels(est)
    analytics.write_excitation_csv(levels, out / "excitation.csv")
    analytics.write_weekly_csv(analytics.weekly_topic_counts(corpus, est), out / "weekly.csv")
    print(f"alpha={levels['alpha']:.4g} beta={levels['beta']:.4g} "
          f"alpha*beta={levels['alpha_beta']:.4g}; reports in {out}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "analyze": cmd_analyze,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="corpus JSONL file")
    common.add_argument("--output", help="output file (or directory for analyze)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="key = value options file")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("--preprocess", help="key = value stopword/frequency-filter options")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="forumhawkes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw a synthetic forum")
    s.add_argument("--truth", help="ground-truth JSON (default: OUTPUT.truth.json)")

    t = sub.add_parser("train", parents=[common], help="run the Gibbs sampler")
    t.add_argument("--K", type=int)
    t.add_argument("--iterations", type=int)
    t.add_argument("--trace", help="per-iteration trace CSV")
    t.add_argument("--checkpoint", help="sampler state file")
    t.add_argument("--checkpoint-every", type=int, default=10)
    t.add_argument("--resume", action="store_true", help="continue from --checkpoint if present")

    r = sub.add_parser("recommend", parents=[common], help="rank threads for every learner")
    r.add_argument("--T1", type=float)
    r.add_argument("--T2", type=float)
    r.add_argument("--K", type=int)
    r.add_argument("--estimate", help="estimate trained on the split's training corpus")
    r.add_argument("--top", type=int, help="keep only the first TOP threads per learner")

    sub.add_parser("evaluate", parents=[common], help="MAP@N sweep against baselines")

    a = sub.add_parser("analyze", parents=[common], help="half-lives, excitation, weekly counts")
    a.add_argument("--estimate", help="trained estimate JSON")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        kv = read_kv_file(args.config) if args.config else {}
        return COMMANDS[args.command](args, kv)
    except UsageError as exc:
        parser.error(str(exc))
    except SupercriticalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, CorpusError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
