"""Scoring: segmentation error under optimal label matching, next-event
prediction for each model family, and multi-run report aggregation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import Corpus, cut_for_prediction
from .model import ModelParams
from .sampler import FitReport, forward_filter


@dataclass(frozen=True)
class SegmentationScore:
    error_rate: float
    confusion: np.ndarray  # (n_predicted_labels, n_true_labels) counts
    matching: dict[int, int]  # predicted label -> matched true label
    n_events: int
    n_mismatched: int


def segmentation_error(
    predicted: list[np.ndarray], truth: list[np.ndarray]
) -> SegmentationScore:
    """Fraction of events whose label disagrees with the truth after the
    best one-to-one relabeling of predicted labels.

    Label values are arbitrary ids on both sides.  The assignment runs on
    the zero-padded square confusion matrix, so surplus predicted labels
    match nothing and their events count as errors.
    """
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth must cover the same sequences")
    pred_cat = np.concatenate([np.asarray(p, dtype=np.int64) for p in predicted])
    true_cat = np.concatenate([np.asarray(t, dtype=np.int64) for t in truth])
    if pred_cat.size != true_cat.size:
        raise ValueError("predicted and truth must have matching lengths")

    pred_ids, pred_ix = np.unique(pred_cat, return_inverse=True)
    true_ids, true_ix = np.unique(true_cat, return_inverse=True)
    confusion = np.zeros((pred_ids.size, true_ids.size), dtype=np.int64)
    np.add.at(confusion, (pred_ix, true_ix), 1)

    side = max(pred_ids.size, true_ids.size)
    padded = np.zeros((side, side), dtype=np.int64)
    padded[: pred_ids.size, : true_ids.size] = confusion
    rows, cols = linear_sum_assignment(padded, maximize=True)
    agreed = int(padded[rows, cols].sum())
    matching = {
        int(pred_ids[r]): int(true_ids[c])
        for r, c in zip(rows, cols)
        if r < pred_ids.size and c < true_ids.size
    }
    n = int(pred_cat.size)
    return SegmentationScore(
        error_rate=1.0 - agreed / n,
        confusion=confusion,
        matching=matching,
        n_events=n,
        n_mismatched=n - agreed,
    )


def immc_predict_next(params: ModelParams, prefix: np.ndarray) -> int:
    """Most probable next event given a sequence prefix.

    Runs the exact filter over the prefix entered fresh at a boundary,
    takes the final super-state posterior, and scores each candidate next
    event by its posterior-averaged emission row.  The boundary code is
    excluded — this predicts the next observation, not sequence end.
    Ties break to the lowest event code.
    """
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.size == 0:
        raise ValueError("prefix must be nonempty")
    B = params.boundary
    codes = np.concatenate(([B], prefix))
    filt = forward_filter(codes, params)
    post = filt[-1]
    dist = post @ params.theta[:, prefix[-1], :B]
    return int(np.argmax(dist))


def prediction_accuracy(model_kind: str, model, test_corpus: Corpus, seed: int) -> float:
    """Fraction of held-out sequences whose next event is predicted.

    ``model_kind`` selects the predictor: ``"immc"`` (a SavedModel),
    ``"fmmc"`` (a Markov-mixture FmmcModel), or ``"ngram"``.  Each
    sequence is cut at a position drawn from its own child seed, so every
    model family sees identical prefix/target pairs for a given ``seed``.
    Sequences too short to cut (a single event) are left out of the
    denominator.
    """
    from .baselines import fmmc_predict_next, ngram_predict

    if model_kind == "immc":
        predict = lambda prefix: immc_predict_next(model.params, prefix)
    elif model_kind == "fmmc":
        predict = lambda prefix: fmmc_predict_next(model, prefix)
    elif model_kind == "ngram":
        predict = lambda prefix: ngram_predict(model, prefix)
    else:
        raise ValueError(f"unknown model kind {model_kind!r}")

    hits = 0
    total = 0
    for idx, seq in enumerate(test_corpus.sequences):
        if len(seq) < 2:
            continue
        prefix, target = cut_for_prediction(seq, seed=seed * 100003 + idx)
        total += 1
        if int(predict(prefix)) == int(target):
            hits += 1
    if total == 0:
        raise ValueError("no sequence in the test corpus is long enough to cut")
    return hits / total


def run_report(fits: list[FitReport], scores: list[dict]) -> dict:
    """Aggregate per-seed fits and score dicts into one report document.

    ``scores[i]`` holds numeric fields for run ``i`` (for example
    ``segmentation_error`` or ``prediction_accuracy``).  The aggregate
    carries mean and population standard deviation per field, plus
    wall-time statistics over all recorded iterations.
    """
    if not fits:
        raise ValueError("run_report needs at least one run")
    if len(scores) != len(fits):
        raise ValueError("one score dict per fit is required")
    keys = sorted({k for sc in scores for k, v in sc.items() if isinstance(v, (int, float))})
    aggregate = {}
    for key in keys:
        vals = np.array([sc[key] for sc in scores if key in sc], dtype=float)
        aggregate[key] = {"mean": float(vals.mean()), "stddev": float(vals.std())}
    iter_secs = np.concatenate([np.asarray(f.iter_seconds, dtype=float) for f in fits])
    return {
        "n_runs": len(fits),
        "per_run": [
            {
                **scores[i],
                "iterations": fits[i].iterations,
                "burn_in": fits[i].burn_in,
                "active_states": fits[i].active_states,
                "final_loglik": float(fits[i].loglik_trace[-1]),
                "mean_iteration_seconds": float(np.mean(fits[i].iter_seconds)),
            }
            for i in range(len(fits))
        ],
        "aggregate": aggregate,
        "iteration_seconds": {
            "mean": float(iter_secs.mean()),
            "min": float(iter_secs.min()),
            "max": float(iter_secs.max()),
        },
    }
