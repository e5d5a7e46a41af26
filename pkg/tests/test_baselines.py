"""Mixture-of-Markov-chains EM and global n-gram baselines."""

import numpy as np
import pytest

from immc.corpus import Alphabet, Corpus, Sequence
from immc.errors import ModelFormatError
from immc.baselines import (
    DEFAULT_SMOOTHING,
    FmmcModel,
    fmmc_assignments,
    fmmc_fit,
    fmmc_fit_best,
    fmmc_grid_search,
    fmmc_predict_next,
    fmmc_segment_given_boundaries,
    load_fmmc,
    load_ngram,
    ngram_distribution,
    ngram_fit,
    ngram_predict,
    save_fmmc,
    save_ngram,
)


def _corpus(rows, symbols):
    alphabet = Alphabet(tuple(symbols))
    seqs = [Sequence(id=f"s{i}", events=np.array(r)) for i, r in enumerate(rows)]
    return Corpus(sequences=seqs, alphabet=alphabet)


def _two_chain_corpus(n_per=20, length=30, seed=0, flip=0.99):
    """Half the sequences alternate on {0,1}, half alternate on {2,3}.

    Each chain starts at its own fixed symbol and flips nearly every step,
    so which pair of symbols a sequence lives on is the only structure
    there is to discover.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(2 * n_per):
        lo = 0 if i < n_per else 2
        walk = [lo]
        for _ in range(length - 1):
            cur = walk[-1] - lo
            walk.append(lo + 1 - cur if rng.random() < flip else walk[-1])
        rows.append(walk)
    return _corpus(rows, "abcd"), np.array([0] * n_per + [1] * n_per)


def _cycle_corpus(n_per=24, length=30, seed=0, follow=0.9):
    """Forward-cycling vs backward-cycling walks over one shared symbol set."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(2 * n_per):
        step = 1 if i < n_per else 2
        walk = [0]
        for _ in range(length - 1):
            walk.append((walk[-1] + step) % 3 if rng.random() < follow else walk[-1])
        rows.append(walk)
    return _corpus(rows, "abc")


# ---------------------------------------------------------------------------
# FMMC


def test_fmmc_single_component_is_pooled_mle():
    corpus = _corpus([[0, 1, 0, 2], [2, 2, 1]], "abc")
    model = fmmc_fit(corpus, 1, np.random.default_rng(0))
    first = np.zeros(3)
    trans = np.zeros((3, 3))
    for seq in corpus.sequences:
        first[seq.events[0]] += 1
        for a, b in zip(seq.events[:-1], seq.events[1:]):
            trans[a, b] += 1
    first += DEFAULT_SMOOTHING
    trans += DEFAULT_SMOOTHING
    np.testing.assert_allclose(model.weights, [1.0])
    np.testing.assert_allclose(model.entry[0], first / first.sum(), atol=1e-12)
    np.testing.assert_allclose(
        model.trans[0], trans / trans.sum(axis=1, keepdims=True), atol=1e-12
    )


def test_fmmc_two_components_recover_disjoint_chains():
    """Best-of-ten EM separates two disjoint-symbol chains perfectly.

    Ten outer seeds; each run's sequence assignment must match the true
    grouping exactly (up to swapping the two component ids).
    """
    corpus, truth = _two_chain_corpus()
    for seed in range(10):
        model = fmmc_fit_best(corpus, 2, np.random.default_rng(seed), n_inits=10)
        got = fmmc_assignments(model, corpus)
        direct = np.mean(got == truth)
        swapped = np.mean(got == 1 - truth)
        assert max(direct, swapped) == 1.0


def test_fmmc_objective_is_monotone():
    corpus, _ = _two_chain_corpus(n_per=8, length=12, seed=3)
    for seed in range(5):
        model = fmmc_fit(corpus, 3, np.random.default_rng(seed))
        trace = np.array(model.objective_trace)
        assert np.all(np.diff(trace) >= -1e-9)


def test_fmmc_distributions_are_valid():
    corpus, _ = _two_chain_corpus(n_per=5, length=10, seed=4)
    model = fmmc_fit(corpus, 4, np.random.default_rng(7))
    assert model.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(model.entry.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(model.trans.sum(axis=2), 1.0, atol=1e-9)
    assert np.all(model.weights >= 0)
    assert np.all(model.entry >= 0)
    assert np.all(model.trans >= 0)


def test_fmmc_single_component_ignores_sequence_order():
    corpus = _corpus([[0, 1, 0], [1, 2], [2, 0, 0, 1]], "abc")
    reversed_corpus = _corpus([[2, 0, 0, 1], [1, 2], [0, 1, 0]], "abc")
    a = fmmc_fit(corpus, 1, np.random.default_rng(0))
    b = fmmc_fit(reversed_corpus, 1, np.random.default_rng(1))
    np.testing.assert_allclose(a.entry, b.entry, atol=1e-12)
    np.testing.assert_allclose(a.trans, b.trans, atol=1e-12)


def test_fmmc_grid_search_picks_the_true_count():
    corpus = _cycle_corpus()
    best_m, model, scores = fmmc_grid_search(
        corpus, [1, 2, 4], np.random.default_rng(5), n_inits=4
    )
    assert set(scores) == {1, 2, 4}
    assert best_m == 2
    assert model.M == 2


# ---------------------------------------------------------------------------
# Segment labeling with known boundaries


def _handmade_two_component():
    # component 0 lives on symbols {0,1}, component 1 on {2,3}
    eps = 1e-9
    entry = np.full((2, 4), eps)
    entry[0, :2] = 0.5
    entry[1, 2:] = 0.5
    trans = np.full((2, 4, 4), eps)
    trans[0, :, :2] = 0.5
    trans[1, :, 2:] = 0.5
    entry /= entry.sum(axis=1, keepdims=True)
    trans /= trans.sum(axis=2, keepdims=True)
    return FmmcModel(weights=np.array([0.5, 0.5]), entry=entry, trans=trans)


def test_segment_labels_single_segment_single_component():
    model = fmmc_fit(_corpus([[0, 1, 0]], "ab"), 1, np.random.default_rng(0))
    labels = fmmc_segment_given_boundaries(model, np.array([0, 1, 1]), np.array([0]))
    assert labels.tolist() == [0]


def test_segment_labels_follow_disjoint_supports():
    model = _handmade_two_component()
    events = np.array([0, 1, 0, 2, 3, 2, 2, 1, 0])
    boundaries = np.array([0, 3, 7])
    labels = fmmc_segment_given_boundaries(model, events, boundaries)
    assert labels.tolist() == [0, 1, 0]


def test_segment_labels_commute_with_component_permutation():
    model = _handmade_two_component()
    flipped = FmmcModel(
        weights=model.weights[::-1].copy(),
        entry=model.entry[::-1].copy(),
        trans=model.trans[::-1].copy(),
    )
    events = np.array([2, 2, 3, 0, 1, 1])
    boundaries = np.array([0, 3])
    labels = fmmc_segment_given_boundaries(model, events, boundaries)
    relabeled = fmmc_segment_given_boundaries(flipped, events, boundaries)
    np.testing.assert_array_equal(relabeled, 1 - labels)


def test_segment_labels_tie_breaks_to_lowest_index():
    entry = np.full((2, 3), 1.0 / 3)
    trans = np.full((2, 3, 3), 1.0 / 3)
    model = FmmcModel(weights=np.array([0.5, 0.5]), entry=entry, trans=trans)
    labels = fmmc_segment_given_boundaries(model, np.array([0, 1, 2]), np.array([0]))
    assert labels.tolist() == [0]


def test_fmmc_predict_next_follows_transition_row():
    model = _handmade_two_component()
    assert fmmc_predict_next(model, np.array([2, 3])) in (2, 3)
    assert fmmc_predict_next(model, np.array([0])) in (0, 1)


# ---------------------------------------------------------------------------
# n-gram models


def test_ngram_learns_alternating_chain():
    corpus = _corpus([[0, 1] * 10], "ab")
    model = ngram_fit(corpus, order=1)
    assert ngram_predict(model, np.array([0])) == 1
    assert ngram_predict(model, np.array([1])) == 0


def test_ngram_unseen_history_backs_off_to_unigram():
    # symbol c only ever closes the sequence, so context (c,) is unseen
    corpus = _corpus([[0, 1, 0, 1, 2]], "abc")
    model = ngram_fit(corpus, order=1)
    assert ngram_predict(model, np.array([2])) == 0  # unigram tie a/b -> a
    assert ngram_predict(model, np.array([])) == 0


def test_ngram_order_one_matches_hand_counts():
    """Predictions against a 20-event corpus counted by hand.

    Pair counts: a->b 6, a->c 2, b->a 4, b->b 2, b->c 2, c->a 2.
    """
    row = [0, 1, 0, 2, 0, 1, 1, 0, 1, 2]
    corpus = _corpus([row, row], "abc")
    model = ngram_fit(corpus, order=1)
    assert ngram_predict(model, np.array([0])) == 1
    assert ngram_predict(model, np.array([1])) == 0
    assert ngram_predict(model, np.array([2])) == 0
    dist = ngram_distribution(model, np.array([0]))
    expected = (np.array([0.0, 6.0, 2.0]) + DEFAULT_SMOOTHING) / (
        8.0 + 3 * DEFAULT_SMOOTHING
    )
    np.testing.assert_allclose(dist, expected, atol=1e-12)


def test_ngram_longest_match_wins():
    corpus = _corpus([[0, 1, 0, 1, 0, 1]], "ab")
    model = ngram_fit(corpus, order=3)
    assert ngram_predict(model, np.array([1, 0, 1])) == 0
    assert ngram_predict(model, np.array([0, 1])) == 0


def test_ngram_distributions_are_valid():
    corpus = _corpus([[0, 1, 2, 0, 2, 1, 0]], "abc")
    model = ngram_fit(corpus, order=2)
    for prefix in ([], [0], [1, 2], [2, 2]):
        dist = ngram_distribution(model, np.array(prefix, dtype=np.int64))
        assert dist.sum() == pytest.approx(1.0)
        assert np.all(dist >= 0)


def test_ngram_rejects_bad_order():
    with pytest.raises(ValueError):
        ngram_fit(_corpus([[0, 1]], "ab"), order=-1)


# ---------------------------------------------------------------------------
# Serialization


def test_fmmc_roundtrip(tmp_path):
    corpus, _ = _two_chain_corpus(n_per=4, length=8, seed=1)
    model = fmmc_fit(corpus, 2, np.random.default_rng(2))
    path = tmp_path / "fmmc.json"
    save_fmmc(path, model, corpus.alphabet)
    loaded, alphabet = load_fmmc(path)
    assert alphabet.symbols == corpus.alphabet.symbols
    np.testing.assert_array_equal(loaded.weights, model.weights)
    np.testing.assert_array_equal(loaded.entry, model.entry)
    np.testing.assert_array_equal(loaded.trans, model.trans)


def test_ngram_roundtrip(tmp_path):
    corpus = _corpus([[0, 1, 0, 2, 1]], "abc")
    model = ngram_fit(corpus, order=2)
    path = tmp_path / "ngram.json"
    save_ngram(path, model, corpus.alphabet)
    loaded, alphabet = load_ngram(path)
    assert alphabet.symbols == ("a", "b", "c")
    assert loaded.order == 2
    for prefix in ([], [0], [0, 1], [2, 0]):
        p = np.array(prefix, dtype=np.int64)
        assert ngram_predict(loaded, p) == ngram_predict(model, p)


def test_model_kind_discriminator_enforced(tmp_path):
    corpus = _corpus([[0, 1, 0]], "ab")
    path = tmp_path / "m.json"
    save_ngram(path, ngram_fit(corpus, order=1), corpus.alphabet)
    with pytest.raises(ModelFormatError):
        load_fmmc(path)
