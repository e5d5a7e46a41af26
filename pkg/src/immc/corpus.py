"""Categorical event corpora and their flattened stream form.

A corpus is an ordered collection of event sequences over a shared finite
alphabet.  Symbols are encoded to integer codes in order of first appearance;
one extra code past the alphabet is reserved for the stream boundary marker
that separates sequences when a corpus is flattened for inference.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AlphabetMismatchError,
    CorpusFormatError,
    EmptyCorpusError,
    EmptySequenceError,
)


@dataclass(frozen=True)
class Alphabet:
    """Observation symbols in first-appearance order.

    The boundary marker is not a symbol: it lives at code ``len(symbols)``,
    so every categorical distribution over "symbol or boundary" has
    ``size`` entries.
    """

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols in alphabet")

    @property
    def boundary(self) -> int:
        return len(self.symbols)

    @property
    def size(self) -> int:
        """Number of codes including the boundary marker."""
        return len(self.symbols) + 1

    def encode(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise KeyError(f"symbol {symbol!r} not in alphabet") from None

    def decode(self, code: int) -> str:
        if not 0 <= code < len(self.symbols):
            raise KeyError(f"code {code} out of range for alphabet of size {len(self.symbols)}")
        return self.symbols[code]


@dataclass
class Sequence:
    """One event sequence: an id and its encoded events."""

    id: str
    events: np.ndarray

    def __post_init__(self):
        self.events = np.asarray(self.events, dtype=np.int64)
        if self.events.ndim != 1:
            raise ValueError("events must be one-dimensional")
        if self.events.size == 0:
            raise EmptySequenceError(f"sequence {self.id!r} has no events")

    def __len__(self) -> int:
        return int(self.events.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Sequence)
            and self.id == other.id
            and np.array_equal(self.events, other.events)
        )


@dataclass
class Corpus:
    alphabet: Alphabet
    sequences: list[Sequence] = field(default_factory=list)

    def __post_init__(self):
        if not self.sequences:
            raise EmptyCorpusError("corpus has no sequences")
        b = self.alphabet.boundary
        for seq in self.sequences:
            if seq.events.min() < 0 or seq.events.max() >= b:
                raise ValueError(
                    f"sequence {seq.id!r} contains codes outside the alphabet "
                    f"(boundary code {b} is reserved)"
                )

    def __len__(self) -> int:
        return len(self.sequences)

    @property
    def n_events(self) -> int:
        return sum(len(s) for s in self.sequences)

    def reencode(self, alphabet: Alphabet) -> "Corpus":
        """Re-express this corpus under another alphabet (by symbol name)."""
        if alphabet.symbols == self.alphabet.symbols:
            return self
        try:
            mapping = np.array(
                [alphabet.encode(s) for s in self.alphabet.symbols], dtype=np.int64
            )
        except KeyError as exc:
            raise AlphabetMismatchError(str(exc)) from exc
        return Corpus(
            alphabet=alphabet,
            sequences=[Sequence(s.id, mapping[s.events]) for s in self.sequences],
        )


@dataclass
class ConcatenatedStream:
    """A corpus flattened to one code array.

    The stream starts and ends with the boundary code and carries one
    boundary between adjacent sequences:  ``B s1 B s2 B ... B``.  Its length
    is therefore ``sum(len(s)) + len(corpus) + 1``.  ``slices`` maps each
    sequence to its (start, stop) span of event positions in ``codes``.
    """

    codes: np.ndarray
    boundary: int
    slices: list[tuple[int, int]]

    def __len__(self) -> int:
        return int(self.codes.size)


def concatenate(corpus: Corpus) -> ConcatenatedStream:
    b = corpus.alphabet.boundary
    parts = [np.array([b], dtype=np.int64)]
    slices = []
    pos = 1
    for seq in corpus.sequences:
        parts.append(seq.events)
        slices.append((pos, pos + len(seq)))
        pos += len(seq) + 1
        parts.append(np.array([b], dtype=np.int64))
    return ConcatenatedStream(codes=np.concatenate(parts), boundary=b, slices=slices)


def split_stream(codes: np.ndarray, boundary: int) -> list[np.ndarray]:
    """Invert concatenation: drop boundary codes, split at them."""
    codes = np.asarray(codes)
    out = []
    run: list[int] = []
    for c in codes:
        if c == boundary:
            if run:
                out.append(np.array(run, dtype=np.int64))
                run = []
        else:
            run.append(int(c))
    if run:
        out.append(np.array(run, dtype=np.int64))
    return out


# ---------------------------------------------------------------------------
# File formats


def load_corpus(path: str | Path, fmt: str | None = None) -> Corpus:
    """Load a corpus from JSONL ({"id", "events"} per line) or CSV (id,event).

    The alphabet is built from symbols in order of first appearance.
    """
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown corpus format {fmt!r}")

    symbols: list[str] = []
    index: dict[str, int] = {}

    def code_of(sym: str) -> int:
        if sym not in index:
            index[sym] = len(symbols)
            symbols.append(sym)
        return index[sym]

    raw: list[tuple[str, list[int]]] = []
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusFormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
                if not isinstance(rec, dict) or "id" not in rec or "events" not in rec:
                    raise CorpusFormatError('expected {"id": ..., "events": [...]}', line=lineno)
                events = rec["events"]
                if not isinstance(events, list) or not events:
                    raise CorpusFormatError(
                        f"sequence {rec['id']!r} has an empty or non-list events field",
                        line=lineno,
                    )
                raw.append((str(rec["id"]), [code_of(str(e)) for e in events]))
    else:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyCorpusError(f"{path} is empty") from None
            if [h.strip().lower() for h in header[:2]] != ["id", "event"]:
                raise CorpusFormatError("expected header 'id,event'", line=1)
            current_id: str | None = None
            events: list[int] = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) < 2:
                    raise CorpusFormatError("expected two columns id,event", line=lineno)
                sid, sym = row[0], row[1]
                if sid != current_id:
                    if current_id is not None:
                        raw.append((current_id, events))
                    current_id, events = sid, []
                events.append(code_of(sym))
            if current_id is not None:
                raw.append((current_id, events))

    if not raw:
        raise EmptyCorpusError(f"{path} contains no sequences")
    alphabet = Alphabet(tuple(symbols))
    return Corpus(alphabet, [Sequence(sid, np.array(ev, dtype=np.int64)) for sid, ev in raw])


def save_corpus(corpus: Corpus, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for seq in corpus.sequences:
                rec = {
                    "id": seq.id,
                    "events": [corpus.alphabet.decode(int(c)) for c in seq.events],
                }
                fh.write(json.dumps(rec) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "event"])
            for seq in corpus.sequences:
                for c in seq.events:
                    writer.writerow([seq.id, corpus.alphabet.decode(int(c))])
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


def load_labels(path: str | Path) -> dict[str, np.ndarray]:
    """Load a per-event integer label sidecar: {"id", "labels"} per line."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if "id" not in rec or "labels" not in rec:
                raise CorpusFormatError('expected {"id": ..., "labels": [...]}', line=lineno)
            out[str(rec["id"])] = np.asarray(rec["labels"], dtype=np.int64)
    return out


def save_labels(labels: dict[str, np.ndarray], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sid, lab in labels.items():
            fh.write(json.dumps({"id": sid, "labels": [int(x) for x in lab]}) + "\n")


# ---------------------------------------------------------------------------
# Evaluation protocol helpers


def split_train_test(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic sequence-level split.

    The test side gets ``round(test_fraction * len(corpus))`` sequences,
    clamped so both sides keep at least one.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = len(corpus)
    if n < 2:
        raise ValueError("need at least two sequences to split")
    n_test = min(n - 1, max(1, round(test_fraction * n)))
    order = np.random.default_rng(seed).permutation(n)
    test_idx = set(order[:n_test].tolist())
    train = [corpus.sequences[i] for i in range(n) if i not in test_idx]
    test = [corpus.sequences[i] for i in range(n) if i in test_idx]
    return Corpus(corpus.alphabet, train), Corpus(corpus.alphabet, test)


def cut_for_prediction(seq: Sequence, seed: int) -> tuple[np.ndarray, int]:
    """Cut a sequence for next-event prediction.

    Draws a cut position c uniformly from [1, len(seq) - 1] and returns the
    nonempty prefix ``events[:c]`` together with the ground-truth next event
    ``events[c]``.  Sequences of length < 2 cannot be cut.
    """
    if len(seq) < 2:
        raise ValueError(f"sequence {seq.id!r} is too short to cut for prediction")
    c = int(np.random.default_rng(seed).integers(1, len(seq)))
    return seq.events[:c].copy(), int(seq.events[c])
