"""Reference models the sampler is compared against.

Two baselines: an EM-fitted finite mixture of first-order Markov chains
that clusters whole sequences (or pre-cut segments), and global order-k
Markov predictors with backoff.  Both use add-delta smoothing with the
same default delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .corpus import Alphabet, Corpus
from .errors import ModelFormatError
from .model import MODEL_FORMAT_VERSION, read_envelope

DEFAULT_SMOOTHING = 1e-3


# ---------------------------------------------------------------------------
# Finite mixture of Markov chains


@dataclass
class FmmcModel:
    """Mixture weights plus per-component entry and transition rows."""

    weights: np.ndarray  # (M,)
    entry: np.ndarray  # (M, V)
    trans: np.ndarray  # (M, V, V)
    smoothing: float = DEFAULT_SMOOTHING
    objective_trace: list[float] = field(default_factory=list)

    @property
    def M(self) -> int:
        return int(self.weights.size)

    @property
    def V(self) -> int:
        return int(self.entry.shape[1])


def _transition_counts(corpus: Corpus) -> tuple[np.ndarray, np.ndarray]:
    """Per-sequence first-event one-hots and transition count matrices."""
    V = len(corpus.alphabet.symbols)
    S = len(corpus)
    first = np.zeros((S, V))
    counts = np.zeros((S, V, V))
    for s, seq in enumerate(corpus.sequences):
        ev = seq.events
        first[s, ev[0]] = 1.0
        if ev.size > 1:
            np.add.at(counts[s], (ev[:-1], ev[1:]), 1.0)
    return first, counts


def _component_logliks(model: FmmcModel, first: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """(S, M) log-likelihood of each sequence under each component."""
    log_entry = np.log(model.entry)  # (M, V)
    log_trans = np.log(model.trans)  # (M, V, V)
    return first @ log_entry.T + np.tensordot(counts, log_trans, axes=([1, 2], [1, 2]))


def _log_weights(model: FmmcModel) -> np.ndarray:
    # a component that lost every sequence has weight 0; -inf is its score
    with np.errstate(divide="ignore"):
        return np.log(model.weights)


def fmmc_fit(
    corpus: Corpus,
    n_components: int,
    rng: np.random.Generator,
    max_iters: int = 200,
    tol: float = 1e-6,
    smoothing: float = DEFAULT_SMOOTHING,
) -> FmmcModel:
    """EM fit from a random responsibility initialization.

    The recorded objective is the smoothed (penalized) training
    log-likelihood — data log-likelihood plus the add-delta prior term —
    which EM makes non-decreasing; iteration stops when its gain drops
    below ``tol`` or after ``max_iters``.
    """
    if n_components < 1:
        raise ValueError("n_components must be positive")
    V = len(corpus.alphabet.symbols)
    first, counts = _transition_counts(corpus)
    S = first.shape[0]
    # Random responsibilities, anchored: each component starts owning one
    # random seed sequence outright while every other sequence is undecided.
    # A fully symmetric soft start would average all components toward the
    # pooled model, a fixed point EM cannot leave; the anchors give each
    # component a coherent pull from the first M-step on.
    resp = np.full((S, n_components), 1.0 / n_components)
    seeds = rng.choice(S, size=min(n_components, S), replace=False)
    for m, s in enumerate(seeds):
        resp[s] = 0.0
        resp[s, m] = 1.0
    model = FmmcModel(
        weights=np.full(n_components, 1.0 / n_components),
        entry=np.full((n_components, V), 1.0 / V),
        trans=np.full((n_components, V, V), 1.0 / V),
        smoothing=smoothing,
    )

    def m_step(resp):
        w = resp.sum(axis=0)
        model.weights = w / w.sum()
        ent = resp.T @ first + smoothing  # (M, V)
        model.entry = ent / ent.sum(axis=1, keepdims=True)
        tr = np.tensordot(resp, counts, axes=(0, 0)) + smoothing  # (M, V, V)
        model.trans = tr / tr.sum(axis=2, keepdims=True)

    def objective(ll_sm):
        data_ll = float(logsumexp(ll_sm, axis=1).sum())
        prior = smoothing * float(np.log(model.entry).sum() + np.log(model.trans).sum())
        return data_ll + prior

    m_step(resp)
    prev = -np.inf
    for _ in range(max_iters):
        ll_sm = _component_logliks(model, first, counts) + _log_weights(model)
        obj = objective(ll_sm)
        model.objective_trace.append(obj)
        if obj - prev < tol and np.isfinite(prev):
            break
        prev = obj
        log_resp = ll_sm - logsumexp(ll_sm, axis=1, keepdims=True)
        m_step(np.exp(log_resp))
    return model


def fmmc_fit_best(
    corpus: Corpus,
    n_components: int,
    rng: np.random.Generator,
    n_inits: int = 10,
    **kwargs,
) -> FmmcModel:
    """Best of several random initializations by final training objective."""
    best = None
    for _ in range(n_inits):
        model = fmmc_fit(corpus, n_components, rng, **kwargs)
        if best is None or model.objective_trace[-1] > best.objective_trace[-1]:
            best = model
    return best


def fmmc_responsibilities(model: FmmcModel, corpus: Corpus) -> np.ndarray:
    first, counts = _transition_counts(corpus)
    ll_sm = _component_logliks(model, first, counts) + _log_weights(model)
    return np.exp(ll_sm - logsumexp(ll_sm, axis=1, keepdims=True))


def fmmc_assignments(model: FmmcModel, corpus: Corpus) -> np.ndarray:
    """Hard cluster labels, ties to the lowest component index."""
    return np.argmax(fmmc_responsibilities(model, corpus), axis=1)


def fmmc_segment_given_boundaries(
    model: FmmcModel, events: np.ndarray, boundaries: np.ndarray
) -> np.ndarray:
    """Label each segment of a pre-cut sequence with its best component.

    ``boundaries`` holds segment-start offsets (the first must be 0); each
    segment is scored as a standalone sequence: mixture weight, entry at
    its first event, then its internal transitions.
    """
    events = np.asarray(events, dtype=np.int64)
    boundaries = np.asarray(boundaries, dtype=np.int64)
    if boundaries.size == 0 or boundaries[0] != 0:
        raise ValueError("boundaries must start at offset 0")
    log_w = _log_weights(model)
    log_entry = np.log(model.entry)
    log_trans = np.log(model.trans)
    edges = np.append(boundaries, events.size)
    out = np.empty(edges.size - 1, dtype=np.int64)
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        seg = events[a:b]
        score = log_w + log_entry[:, seg[0]]
        if seg.size > 1:
            score = score + log_trans[:, seg[:-1], seg[1:]].sum(axis=1)
        out[k] = int(np.argmax(score))
    return out


def fmmc_predict_next(model: FmmcModel, prefix: np.ndarray) -> int:
    """Posterior-weighted next-event distribution, highest-mass event."""
    prefix = np.asarray(prefix, dtype=np.int64)
    if prefix.size == 0:
        raise ValueError("prefix must be nonempty")
    score = _log_weights(model) + np.log(model.entry)[:, prefix[0]]
    if prefix.size > 1:
        score = score + np.log(model.trans)[:, prefix[:-1], prefix[1:]].sum(axis=1)
    post = np.exp(score - logsumexp(score))
    dist = post @ model.trans[:, prefix[-1], :]
    return int(np.argmax(dist))


def fmmc_grid_search(
    corpus: Corpus,
    candidates: list[int],
    rng: np.random.Generator,
    n_inits: int = 3,
    holdout_fraction: float = 0.1,
    **kwargs,
) -> tuple[int, FmmcModel, dict[int, float]]:
    """Pick the component count by held-out log-likelihood.

    Splits off a validation slice once, fits each candidate on the rest
    (best of ``n_inits``), and returns the candidate with the highest
    held-out data log-likelihood (ties to the smaller count), the model
    refit on the full corpus, and the per-candidate scores.
    """
    from .corpus import split_train_test

    train, held = split_train_test(corpus, holdout_fraction, int(rng.integers(2**32)))
    first, counts = _transition_counts(held)
    scores: dict[int, float] = {}
    for M in candidates:
        model = fmmc_fit_best(train, M, rng, n_inits=n_inits, **kwargs)
        ll_sm = _component_logliks(model, first, counts) + _log_weights(model)
        scores[M] = float(logsumexp(ll_sm, axis=1).sum())
    best_M = max(sorted(scores), key=lambda M: scores[M])
    final = fmmc_fit_best(corpus, best_M, rng, n_inits=n_inits, **kwargs)
    return best_M, final, scores


# ---------------------------------------------------------------------------
# Global order-k Markov predictor with backoff


@dataclass
class NgramModel:
    order: int
    n_symbols: int
    smoothing: float = DEFAULT_SMOOTHING
    tables: dict[tuple[int, ...], np.ndarray] = field(default_factory=dict)


def ngram_fit(corpus: Corpus, order: int, smoothing: float = DEFAULT_SMOOTHING) -> NgramModel:
    """Count next-event tables for histories of length 0..order.

    Histories never span sequence boundaries.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    V = len(corpus.alphabet.symbols)
    model = NgramModel(order=order, n_symbols=V, smoothing=smoothing)
    tables = model.tables
    for seq in corpus.sequences:
        ev = seq.events
        for i in range(ev.size):
            nxt = ev[i]
            for k in range(min(order, i) + 1):
                hist = tuple(ev[i - k : i].tolist())
                tab = tables.get(hist)
                if tab is None:
                    tab = tables[hist] = np.zeros(V)
                tab[nxt] += 1.0
    return model


def ngram_predict(model: NgramModel, prefix: np.ndarray) -> int:
    """Predict the next event from the longest known history suffix.

    Falls back one order at a time; the empty history always exists after
    fitting, so an unseen context degrades to the unigram choice.  Ties
    break to the lowest event code.
    """
    prefix = np.asarray(prefix, dtype=np.int64)
    for k in range(min(model.order, prefix.size), -1, -1):
        hist = tuple(prefix[prefix.size - k :].tolist())
        tab = model.tables.get(hist)
        if tab is not None:
            return int(np.argmax(tab + model.smoothing))
    raise ModelFormatError("n-gram model has no tables; was it fitted on an empty corpus?")


def ngram_distribution(model: NgramModel, prefix: np.ndarray) -> np.ndarray:
    """Smoothed next-event distribution from the longest known history."""
    prefix = np.asarray(prefix, dtype=np.int64)
    for k in range(min(model.order, prefix.size), -1, -1):
        tab = model.tables.get(tuple(prefix[prefix.size - k :].tolist()))
        if tab is not None:
            sm = tab + model.smoothing
            return sm / sm.sum()
    raise ModelFormatError("n-gram model has no tables")


# ---------------------------------------------------------------------------
# Serialization (same envelope as the sampler's model files)


def save_fmmc(path: str | Path, model: FmmcModel, alphabet: Alphabet) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": "fmmc",
        "alphabet": list(alphabet.symbols),
        "weights": model.weights.tolist(),
        "entry": model.entry.tolist(),
        "trans": model.trans.tolist(),
        "smoothing": model.smoothing,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_fmmc(path: str | Path) -> tuple[FmmcModel, Alphabet]:
    payload = read_envelope(path)
    if payload.get("model_kind") != "fmmc":
        raise ModelFormatError(f"{path}: not a Markov-mixture model file")
    model = FmmcModel(
        weights=np.asarray(payload["weights"], dtype=float),
        entry=np.asarray(payload["entry"], dtype=float),
        trans=np.asarray(payload["trans"], dtype=float),
        smoothing=float(payload["smoothing"]),
    )
    return model, Alphabet(tuple(payload["alphabet"]))


def save_ngram(path: str | Path, model: NgramModel, alphabet: Alphabet) -> None:
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "model_kind": "ngram",
        "alphabet": list(alphabet.symbols),
        "order": model.order,
        "smoothing": model.smoothing,
        "tables": [[list(h), tab.tolist()] for h, tab in sorted(model.tables.items())],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_ngram(path: str | Path) -> tuple[NgramModel, Alphabet]:
    payload = read_envelope(path)
    if payload.get("model_kind") != "ngram":
        raise ModelFormatError(f"{path}: not an n-gram model file")
    alphabet = Alphabet(tuple(payload["alphabet"]))
    model = NgramModel(
        order=int(payload["order"]),
        n_symbols=len(alphabet.symbols),
        smoothing=float(payload["smoothing"]),
        tables={tuple(h): np.asarray(tab, dtype=float) for h, tab in payload["tables"]},
    )
    return model, alphabet
