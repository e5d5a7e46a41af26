"""Corpus encoding, concatenation, and protocol-helper tests."""

import json

import numpy as np
import pytest

from immc.corpus import (
    Alphabet,
    ConcatenatedStream,
    Corpus,
    Sequence,
    concatenate,
    cut_for_prediction,
    load_corpus,
    load_labels,
    save_corpus,
    save_labels,
    split_stream,
    split_train_test,
)
from immc.errors import CorpusFormatError, EmptyCorpusError, EmptySequenceError


def make_corpus(seqs, n_symbols=4):
    alphabet = Alphabet(tuple(f"s{i}" for i in range(n_symbols)))
    return Corpus(alphabet, [Sequence(f"q{i}", np.array(ev)) for i, ev in enumerate(seqs)])


def test_alphabet_boundary_is_extra_code():
    a = Alphabet(("x", "y", "z"))
    assert a.boundary == 3
    assert a.size == 4
    assert a.encode("y") == 1
    assert a.decode(2) == "z"


def test_alphabet_rejects_duplicates():
    with pytest.raises(ValueError):
        Alphabet(("x", "x"))


def test_alphabet_decode_rejects_boundary_code():
    a = Alphabet(("x", "y"))
    with pytest.raises(KeyError):
        a.decode(2)


def test_sequence_must_be_nonempty():
    with pytest.raises(EmptySequenceError):
        Sequence("s", np.array([], dtype=np.int64))


def test_corpus_rejects_boundary_code_in_events():
    with pytest.raises(ValueError):
        make_corpus([[0, 4]], n_symbols=4)


def test_corpus_requires_sequences():
    with pytest.raises(EmptyCorpusError):
        Corpus(Alphabet(("x",)), [])


def test_concatenate_layout():
    # two sequences with |alphabet|=3 -> boundary code 3 wraps and separates
    corpus = make_corpus([[0, 1], [2]], n_symbols=3)
    stream = concatenate(corpus)
    assert stream.codes.tolist() == [3, 0, 1, 3, 2, 3]
    assert len(stream) == 6
    assert stream.slices == [(1, 3), (4, 5)]


def test_concatenate_single_sequence():
    stream = concatenate(make_corpus([[0]], n_symbols=1))
    assert stream.codes.tolist() == [1, 0, 1]


def test_concatenate_starts_and_ends_with_boundary():
    corpus = make_corpus([[0, 1, 2], [3, 0]], n_symbols=4)
    stream = concatenate(corpus)
    assert stream.codes[0] == stream.boundary
    assert stream.codes[-1] == stream.boundary
    assert len(stream) == corpus.n_events + len(corpus) + 1


def test_split_stream_roundtrip_random_corpus():
    """Concatenation is lossless on a random 100-sequence corpus."""
    rng = np.random.default_rng(42)
    seqs = [rng.integers(0, 5, size=rng.integers(1, 30)).tolist() for _ in range(100)]
    corpus = make_corpus(seqs, n_symbols=5)
    stream = concatenate(corpus)
    parts = split_stream(stream.codes, stream.boundary)
    assert len(parts) == len(corpus)
    for part, seq in zip(parts, corpus.sequences):
        assert np.array_equal(part, seq.events)


def test_slices_index_the_original_events():
    corpus = make_corpus([[0, 1, 2], [3], [2, 2]], n_symbols=4)
    stream = concatenate(corpus)
    for (start, stop), seq in zip(stream.slices, corpus.sequences):
        assert np.array_equal(stream.codes[start:stop], seq.events)


def test_reencode_by_symbol_name():
    corpus = make_corpus([[0, 1]], n_symbols=2)  # symbols s0, s1
    other = Alphabet(("s1", "s0", "extra"))
    re = corpus.reencode(other)
    assert re.sequences[0].events.tolist() == [1, 0]


def test_reencode_missing_symbol_raises():
    from immc.errors import AlphabetMismatchError

    corpus = make_corpus([[0, 1]], n_symbols=2)
    with pytest.raises(AlphabetMismatchError):
        corpus.reencode(Alphabet(("s0",)))


# ---------------------------------------------------------------------------
# File formats


def test_load_jsonl(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id":"a","events":["x","y","x"]}\n')
    corpus = load_corpus(path)
    assert corpus.alphabet.symbols == ("x", "y")
    assert corpus.sequences[0].events.tolist() == [0, 1, 0]


def test_load_jsonl_first_appearance_order(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id":"a","events":["x"]}\n{"id":"b","events":["y","z"]}\n')
    corpus = load_corpus(path)
    assert corpus.alphabet.symbols == ("x", "y", "z")
    assert [s.events.tolist() for s in corpus.sequences] == [[0], [1, 2]]


def test_load_jsonl_empty_events_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id":"a","events":[]}\n')
    with pytest.raises(CorpusFormatError):
        load_corpus(path)


def test_load_jsonl_bad_json_reports_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"id":"a","events":["x"]}\n{oops\n')
    with pytest.raises(CorpusFormatError) as exc:
        load_corpus(path)
    assert "2" in str(exc.value)


def test_load_empty_file_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("")
    with pytest.raises(EmptyCorpusError):
        load_corpus(path)


def test_corpus_roundtrip_jsonl(tmp_path):
    corpus = make_corpus([[0, 1, 2], [2, 0]], n_symbols=3)
    path = tmp_path / "c.jsonl"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded.alphabet.symbols == corpus.alphabet.symbols
    assert loaded.sequences == corpus.sequences


def test_corpus_roundtrip_csv(tmp_path):
    corpus = make_corpus([[0, 1], [1, 1, 0]], n_symbols=2)
    path = tmp_path / "c.csv"
    save_corpus(corpus, path)
    loaded = load_corpus(path)
    assert loaded.sequences == corpus.sequences


def test_csv_requires_header(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("wrong,columns\na,x\n")
    with pytest.raises(CorpusFormatError):
        load_corpus(path)


def test_labels_roundtrip(tmp_path):
    labels = {"a": np.array([0, 0, 1]), "b": np.array([2])}
    path = tmp_path / "t.jsonl"
    save_labels(labels, path)
    loaded = load_labels(path)
    assert set(loaded) == {"a", "b"}
    assert loaded["a"].tolist() == [0, 0, 1]
    assert loaded["b"].tolist() == [2]


def test_labels_format_guard(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text(json.dumps({"id": "a"}) + "\n")
    with pytest.raises(CorpusFormatError):
        load_labels(path)


# ---------------------------------------------------------------------------
# Evaluation protocol helpers


def test_split_sizes():
    corpus = make_corpus([[i % 3] for i in range(10)], n_symbols=3)
    train, test = split_train_test(corpus, 0.1, seed=0)
    assert (len(train), len(test)) == (9, 1)
    train, test = split_train_test(corpus, 0.9, seed=0)
    assert (len(train), len(test)) == (1, 9)


def test_split_is_deterministic_and_disjoint():
    corpus = make_corpus([[i % 4] for i in range(20)], n_symbols=4)
    a = split_train_test(corpus, 0.25, seed=7)
    b = split_train_test(corpus, 0.25, seed=7)
    assert [s.id for s in a[0].sequences] == [s.id for s in b[0].sequences]
    ids = {s.id for s in a[0].sequences} | {s.id for s in a[1].sequences}
    assert len(ids) == 20


def test_split_needs_two_sequences():
    corpus = make_corpus([[0]], n_symbols=1)
    with pytest.raises(ValueError):
        split_train_test(corpus, 0.5, seed=0)


def test_cut_forced_case():
    seq = Sequence("s", np.array([0, 1]))
    prefix, target = cut_for_prediction(seq, seed=123)
    assert prefix.tolist() == [0]
    assert target == 1


def test_cut_too_short():
    with pytest.raises(ValueError):
        cut_for_prediction(Sequence("s", np.array([0])), seed=0)


def test_cut_positions_uniform():
    """Cut position for a length-5 sequence is uniform over {1,2,3,4}.

    Binomial check: each position's frequency over 10,000 seeds should sit
    within 3 sigma of 1/4.
    """
    seq = Sequence("s", np.arange(5))
    counts = np.zeros(5, dtype=int)
    for seed in range(10_000):
        prefix, _ = cut_for_prediction(seq, seed=seed)
        counts[len(prefix)] += 1
    assert counts[0] == 0

    p = 0.25
    sigma = np.sqrt(p * (1 - p) / 10_000)
    freq = counts[1:] / 10_000
    assert np.all(np.abs(freq - p) < 3 * sigma + 1e-12)


def test_stream_dataclass_len():
    s = ConcatenatedStream(codes=np.array([2, 0, 2]), boundary=2, slices=[(1, 2)])
    assert len(s) == 3
