"""Command-line front end.

Subcommands: generate, fit, segment, predict, eval, export-dot.  Option
values resolve as flags > config file > built-in defaults; the config
file is flat ``key = value`` lines (``#`` comments allowed) keyed by the
long option names with dashes replaced by underscores.  The environment
variable ``IMMC_OUT_DIR`` supplies the default output directory.
Diagnostics go to stderr; scores go to stdout (JSON with ``--json``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import load_fmmc, load_ngram
from .corpus import concatenate, load_corpus, load_labels, save_corpus, save_labels
from .dot import DEFAULT_ACTIVE_THRESHOLD, DEFAULT_MIN_PROB, export_dot_files
from .errors import ConfigError, ImmcError
from .evaluate import prediction_accuracy, run_report, segmentation_error
from .generator import (
    SIZES,
    generate_corpus,
    load_synthetic_spec,
    make_testcase_spec,
)
from .model import (
    Hyperparams,
    SavedModel,
    load_model,
    read_envelope,
    save_model,
)
from .sampler import fit, gibbs_iteration, segment_labels


def _parse_config(path: str | Path) -> dict:
    """Flat ``key = value`` config; values are typed as int, float, bool,
    or (optionally quoted) string."""
    cfg: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            cfg[key] = value[1:-1]
            continue
        if value.lower() in ("true", "false"):
            cfg[key] = value.lower() == "true"
            continue
        try:
            cfg[key] = int(value)
        except ValueError:
            try:
                cfg[key] = float(value)
            except ValueError:
                cfg[key] = value
    return cfg


def _load_cfg(args) -> dict:
    return _parse_config(args.config) if getattr(args, "config", None) else {}


def _opt(args, cfg: dict, name: str, default, cast=None):
    """flags > config > default, with a cast applied to config values."""
    dest = name.replace("-", "_")
    if not hasattr(args, dest) and hasattr(args, dest + "_"):
        dest += "_"  # reserved words ('lambda') get a trailing underscore
    value = getattr(args, dest, None)
    if value is None:
        value = cfg.get(name.replace("-", "_"), default)
    if value is not None and cast is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {value!r}") from exc
    return value


def _out_dir(args, cfg: dict) -> Path:
    out = _opt(args, cfg, "out", None, str)
    if out is None:
        out = os.environ.get("IMMC_OUT_DIR", ".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(human)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args, parser) -> int:
    cfg = _load_cfg(args)
    seed = _opt(args, cfg, "seed", 0, int)
    mean_seg = _opt(args, cfg, "mean-segments", 4.0, float)
    if args.spec_file:
        if args.testcase or args.size:
            parser.error("give either a spec file or --testcase/--size, not both")
        spec = load_synthetic_spec(args.spec_file)
        if args.seed is not None or "seed" in cfg:
            spec = dataclasses.replace(spec, seed=seed)
    else:
        testcase = _opt(args, cfg, "testcase", None, str)
        size = _opt(args, cfg, "size", None, str)
        if not testcase or not size:
            parser.error("either a spec file or both --testcase and --size are required")
        if size not in SIZES:
            parser.error(f"--size must be one of {', '.join(SIZES)}")
        spec = make_testcase_spec(
            testcase, size, seed=seed, mean_segments_per_sequence=mean_seg
        )
    out = _out_dir(args, cfg)
    corpus, labels = generate_corpus(spec)
    corpus_path = out / "corpus.jsonl"
    truth_path = out / "truth.jsonl"
    save_corpus(corpus, corpus_path)
    save_labels({seq.id: lab for seq, lab in zip(corpus.sequences, labels)}, truth_path)
    _note(
        f"wrote {corpus_path} and {truth_path}: "
        f"{corpus.n_events} events in {len(corpus)} sequences"
    )
    if args.json:
        print(
            json.dumps(
                {
                    "corpus": str(corpus_path),
                    "truth": str(truth_path),
                    "sequences": len(corpus),
                    "events": corpus.n_events,
                }
            )
        )
    return 0


def _fit_one(stream, h: Hyperparams, iters: int, burn_in: int):
    return fit(stream, h, iterations=iters, burn_in=burn_in)


def cmd_fit(args, parser) -> int:
    cfg = _load_cfg(args)
    iters = _opt(args, cfg, "iters", 250, int)
    burn_in = _opt(args, cfg, "burn-in", 250, int)
    if iters < 1:
        parser.error("--iters must be at least 1")
    if burn_in < 0:
        parser.error("--burn-in must be non-negative")
    L = _opt(args, cfg, "L", 20, int)
    if L < 1:
        parser.error("--L must be at least 1")
    try:
        h_base = Hyperparams(
            gamma=_opt(args, cfg, "gamma", 1.0, float),
            alpha=_opt(args, cfg, "alpha", 1.0, float),
            kappa=_opt(args, cfg, "kappa", 100.0, float),
            sigma=_opt(args, cfg, "sigma", 1.0, float),
            lam=_opt(args, cfg, "lambda", 1.0, float),
            L=L,
        )
    except ValueError as exc:
        parser.error(str(exc))
    if args.seeds:
        seeds = list(args.seeds)
    else:
        seeds = [_opt(args, cfg, "seed", 0, int)]

    corpus = load_corpus(args.corpus)
    truth = load_labels(args.truth) if args.truth else None
    stream = concatenate(corpus)
    out = _out_dir(args, cfg)
    multi = len(seeds) > 1

    # chains are independent; fan multi-seed runs out across threads
    h_per_seed = [dataclasses.replace(h_base, seed=seed) for seed in seeds]
    if multi:
        with ThreadPoolExecutor(max_workers=min(len(seeds), os.cpu_count() or 1)) as pool:
            fits = list(pool.map(lambda h: _fit_one(stream, h, iters, burn_in), h_per_seed))
    else:
        fits = [_fit_one(stream, h_per_seed[0], iters, burn_in)]

    scores = []
    for seed, h, report in zip(seeds, h_per_seed, fits):
        tag = f"_seed{seed}" if multi else ""
        saved = SavedModel(
            params=report.params,
            hyperparams=h,
            alphabet=corpus.alphabet,
            iterations_run=burn_in + iters,
            seed=seed,
        )
        model_path = out / f"model{tag}.json"
        save_model(model_path, saved)
        per_seq = segment_labels(report.latent, stream)
        seg_path = out / f"segmentation{tag}.jsonl"
        save_labels(
            {seq.id: labels for seq, (labels, _) in zip(corpus.sequences, per_seq)},
            seg_path,
        )
        score = {
            "seed": seed,
            "final_loglik": float(report.loglik_trace[-1]),
        }
        if truth is not None:
            truth_list = _aligned_truth(corpus, truth)
            seg = segmentation_error([lab for lab, _ in per_seq], truth_list)
            score["segmentation_error"] = seg.error_rate
        scores.append(score)
        if multi:
            _write_json(out / f"report{tag}.json", _seed_report(report, score))
        _note(
            f"seed {seed}: model -> {model_path}, segmentation -> {seg_path}"
            + (
                f", error {score['segmentation_error']:.4f}"
                if "segmentation_error" in score
                else ""
            )
        )

    aggregate = run_report(fits, scores)
    _write_json(out / "report.json", aggregate)
    if truth is not None:
        mean_err = aggregate["aggregate"]["segmentation_error"]["mean"]
        _emit(args, aggregate, f"mean segmentation error: {mean_err:.4f}")
    else:
        mean_ll = aggregate["aggregate"]["final_loglik"]["mean"]
        _emit(args, aggregate, f"mean final log-likelihood: {mean_ll:.2f}")
    return 0


def _aligned_truth(corpus, truth: dict) -> list[np.ndarray]:
    out = []
    for seq in corpus.sequences:
        if seq.id not in truth:
            raise ImmcError(f"truth labels missing sequence id {seq.id!r}")
        out.append(truth[seq.id])
    return out


def _seed_report(report, score: dict) -> dict:
    return {
        **score,
        "burn_in": report.burn_in,
        "iterations": report.iterations,
        "active_states": report.active_states,
        "loglik_trace": [float(v) for v in report.loglik_trace],
        "mean_iteration_seconds": float(np.mean(report.iter_seconds)),
    }


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_segment(args, parser) -> int:
    cfg = _load_cfg(args)
    seed = _opt(args, cfg, "seed", 0, int)
    saved = load_model(args.model)
    corpus = load_corpus(args.corpus).reencode(saved.alphabet)
    stream = concatenate(corpus)
    rng = np.random.default_rng(seed)
    latent, _, loglik = gibbs_iteration(stream, saved.params, saved.hyperparams, rng)
    per_seq = segment_labels(latent, stream)
    out_path = Path(args.out) if args.out else _out_dir(args, cfg) / "segmentation.jsonl"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_labels(
        {seq.id: labels for seq, (labels, _) in zip(corpus.sequences, per_seq)}, out_path
    )
    _note(f"wrote {out_path} (stream loglik {loglik:.2f})")
    if args.json:
        print(json.dumps({"segmentation": str(out_path), "loglik": loglik}))
    return 0


def _load_immc(path):
    saved = load_model(path)
    return saved, saved.alphabet


_MODEL_LOADERS = {"immc": _load_immc, "fmmc": load_fmmc, "ngram": load_ngram}


def cmd_predict(args, parser) -> int:
    cfg = _load_cfg(args)
    seed = _opt(args, cfg, "seed", 0, int)
    kind = str(read_envelope(args.model).get("model_kind", "immc"))
    if kind not in _MODEL_LOADERS:
        raise ImmcError(f"{args.model}: unsupported model kind {kind!r}")
    model, alphabet = _MODEL_LOADERS[kind](args.model)
    corpus = load_corpus(args.corpus).reencode(alphabet)
    acc = prediction_accuracy(kind, model, corpus, seed)
    _emit(args, {"model_kind": kind, "prediction_accuracy": acc}, str(acc))
    return 0


def cmd_eval(args, parser) -> int:
    cfg = _load_cfg(args)
    predicted = load_labels(args.segmentation)
    truth = load_labels(args.truth)
    pred_list = []
    true_list = []
    for seq_id, labels in predicted.items():
        if seq_id not in truth:
            raise ImmcError(f"truth labels missing sequence id {seq_id!r}")
        pred_list.append(labels)
        true_list.append(truth[seq_id])
    score = segmentation_error(pred_list, true_list)
    payload = {
        "error_rate": score.error_rate,
        "n_events": score.n_events,
        "n_mismatched": score.n_mismatched,
        "matching": {str(k): v for k, v in sorted(score.matching.items())},
        "confusion": score.confusion.tolist(),
    }
    out_path = Path(args.out) if args.out else _out_dir(args, cfg) / "score.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out_path, payload)
    _emit(args, payload, str(score.error_rate))
    return 0


def cmd_export_dot(args, parser) -> int:
    cfg = _load_cfg(args)
    min_prob = _opt(args, cfg, "min-prob", DEFAULT_MIN_PROB, float)
    threshold = _opt(args, cfg, "active-threshold", DEFAULT_ACTIVE_THRESHOLD, float)
    saved = load_model(args.model)
    out = _out_dir(args, cfg)
    paths = export_dot_files(saved, out, min_prob=min_prob, active_threshold=threshold)
    _note(f"wrote {len(paths)} graph file(s) to {out}")
    if args.json:
        print(json.dumps({"files": [str(p) for p in paths]}))
    return 0


# ---------------------------------------------------------------------------
# Parser assembly


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="immc",
        description="Segment categorical event sequences into recurring "
        "Markov-chain regimes and benchmark against Markov baselines.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic benchmark corpus")
    p.add_argument("spec_file", nargs="?", help="synthetic spec JSON (else use --testcase)")
    p.add_argument("--testcase", type=str.upper, choices=["I", "II", "III"])
    p.add_argument("--size", choices=sorted(SIZES, key=SIZES.get))
    p.add_argument("--seed", type=int)
    p.add_argument("--mean-segments", type=float, help="mean segments per sequence")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", parents=[common], help="run the sampler on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--truth", help="label sidecar; adds segmentation error to the report")
    p.add_argument("--iters", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--L", type=int, help="truncation level")
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--lambda", type=float, dest="lambda_", metavar="LAMBDA")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, nargs="+", help="run one chain per seed")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("segment", parents=[common], help="label a corpus with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (default <out-dir>/segmentation.jsonl)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("predict", parents=[common], help="held-out next-event accuracy")
    p.add_argument("--model", required=True, help="sampler, Markov-mixture, or n-gram model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="score a segmentation against truth")
    p.add_argument("--segmentation", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", help="score JSON path (default <out-dir>/score.json)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-dot", parents=[common], help="write per-super-state DOT graphs")
    p.add_argument("--model", required=True)
    p.add_argument("--min-prob", type=float, help="omit edges below this probability")
    p.add_argument("--active-threshold", type=float, help="minimum super-state weight")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ImmcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
