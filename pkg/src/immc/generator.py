"""Synthetic benchmark corpora from known segment-generating processes.

A ground-truth process is a small Markov chain over a subset of the
alphabet with an entry distribution and per-state exit probabilities.
Sequences are built by gluing together segments, each sampled from one
process, so every event carries a known process label for scoring
segmentations.

Three built-in process suites cover the interesting overlap regimes:

* case I    three processes on pairwise-disjoint 4-state spaces
* case II   six processes whose state sets overlap partially
* case III  two pairs of processes, each pair sharing one 5-state space
            but with different dynamics
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Alphabet, Corpus, Sequence
from .errors import ImmcError
from .model import Hyperparams, ModelParams

SIZES = {"small": 2_500, "mid": 25_000, "large": 250_000}

_SEGMENT_STEP_LIMIT = 1_000_000


@dataclass
class GroundTruthProcess:
    """A segment generator: entry weights, transitions, implicit exits."""

    name: str
    states: np.ndarray  # alphabet codes, shape (m,)
    entry: np.ndarray  # (m,), sums to 1
    trans: np.ndarray  # (m, m), row sums <= 1; deficit is the exit probability

    # cumulative rows over [targets..., exit], built once
    _cum: np.ndarray = field(init=False, repr=False)
    _cum_entry: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.int64)
        self.entry = np.asarray(self.entry, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        m = self.states.size
        if self.entry.shape != (m,) or self.trans.shape != (m, m):
            raise ValueError(f"process {self.name!r}: inconsistent shapes")
        if np.any(self.entry < 0) or not np.isclose(self.entry.sum(), 1.0):
            raise ValueError(f"process {self.name!r}: entry weights must sum to 1")
        if np.any(self.trans < 0):
            raise ValueError(f"process {self.name!r}: negative transition probability")
        row_sums = self.trans.sum(axis=1)
        if np.any(row_sums > 1.0 + 1e-9):
            raise ValueError(f"process {self.name!r}: a row exceeds probability 1")
        if np.all(1.0 - row_sums < 1e-12):
            raise ValueError(f"process {self.name!r}: no state can exit a segment")
        self._cum = np.cumsum(np.column_stack([self.trans, 1.0 - row_sums]), axis=1)
        self._cum_entry = np.cumsum(self.entry)

    @property
    def exit_probs(self) -> np.ndarray:
        return 1.0 - self.trans.sum(axis=1)


def sample_segment(proc: GroundTruthProcess, rng: np.random.Generator) -> np.ndarray:
    """Sample one segment (a code array) by walking the process to exit."""
    s = int(np.searchsorted(proc._cum_entry, rng.random(), side="right"))
    s = min(s, proc.states.size - 1)
    out = [s]
    m = proc.states.size
    for _ in range(_SEGMENT_STEP_LIMIT):
        nxt = int(np.searchsorted(proc._cum[s], rng.random() * proc._cum[s, -1], side="right"))
        if nxt >= m:
            return proc.states[np.array(out, dtype=np.int64)]
        out.append(nxt)
        s = nxt
    raise ImmcError(
        f"process {proc.name!r} produced a segment longer than {_SEGMENT_STEP_LIMIT} steps; "
        "check its exit probabilities"
    )


@dataclass
class SyntheticSpec:
    """Everything needed to generate a labeled benchmark corpus."""

    processes: list[GroundTruthProcess]
    alphabet: Alphabet
    mixing: np.ndarray
    target_observations: int
    mean_segments_per_sequence: float = 4.0
    seed: int = 0

    def __post_init__(self):
        self.mixing = np.asarray(self.mixing, dtype=float)
        if self.mixing.shape != (len(self.processes),):
            raise ValueError("mixing length must match the number of processes")
        if np.any(self.mixing < 0) or not np.isclose(self.mixing.sum(), 1.0):
            raise ValueError("mixing weights must form a distribution")
        if self.mean_segments_per_sequence < 1.0:
            raise ValueError("mean_segments_per_sequence must be at least 1")
        if self.target_observations < 1:
            raise ValueError("target_observations must be positive")


def generate_corpus(spec: SyntheticSpec) -> tuple[Corpus, list[np.ndarray]]:
    """Generate sequences until the observation target is reached.

    Each sequence aims for ``1 + Poisson(mean - 1)`` segments with
    processes drawn from the mixing weights.  The target is checked after
    every segment, so the final sequence may close early and the total
    overshoots by less than one segment.  Returns the corpus together
    with per-sequence ground-truth process labels, one per event.
    """
    rng = np.random.default_rng(spec.seed)
    n_proc = len(spec.processes)
    sequences: list[Sequence] = []
    labels: list[np.ndarray] = []
    total = 0
    idx = 0
    while total < spec.target_observations:
        n_segments = 1 + int(rng.poisson(spec.mean_segments_per_sequence - 1.0))
        parts = []
        labs = []
        for _ in range(n_segments):
            pidx = int(rng.choice(n_proc, p=spec.mixing))
            seg = sample_segment(spec.processes[pidx], rng)
            parts.append(seg)
            labs.append(np.full(seg.size, pidx, dtype=np.int64))
            total += seg.size
            if total >= spec.target_observations:
                break
        sequences.append(Sequence(f"seq-{idx:05d}", np.concatenate(parts)))
        labels.append(np.concatenate(labs))
        idx += 1
    return Corpus(spec.alphabet, sequences), labels


def sample_from_immc(
    params: ModelParams,
    h: Hyperparams,
    n_sequences: int,
    rng: np.random.Generator,
    alphabet: Alphabet | None = None,
) -> tuple[Corpus, list[np.ndarray]]:
    """Forward-simulate the fitted model itself, one segment per sequence.

    The super state carries over between sequences through its sticky
    transition row; each sequence is one segment: an entry sub-state drawn
    from the boundary row (renormalized over real symbols so sequences are
    never empty), then sub-transitions until the exit column fires.
    Returns the corpus and the per-event super-state labels.
    """
    if n_sequences < 1:
        raise ValueError("n_sequences must be positive")
    B = params.boundary
    if alphabet is None:
        alphabet = Alphabet(tuple(f"s{i}" for i in range(B)))
    if alphabet.size != params.K:
        raise ValueError("alphabet size disagrees with the parameter shapes")
    sequences = []
    labels = []
    z = int(rng.choice(params.L, p=params.beta))
    for idx in range(n_sequences):
        if idx > 0:
            z = int(rng.choice(params.L, p=params.pi[z]))
        entry_row = params.theta[z, B, :B]
        mass = entry_row.sum()
        if mass <= 0.0:
            raise ImmcError(f"super state {z} cannot emit any symbol at segment entry")
        y = int(rng.choice(B, p=entry_row / mass))
        events = [y]
        for _ in range(_SEGMENT_STEP_LIMIT):
            nxt = int(rng.choice(params.K, p=params.theta[z, y]))
            if nxt == B:
                break
            events.append(nxt)
            y = nxt
        else:
            raise ImmcError(f"super state {z} produced a segment over {_SEGMENT_STEP_LIMIT} steps")
        sequences.append(Sequence(f"sim-{idx:05d}", np.array(events, dtype=np.int64)))
        labels.append(np.full(len(events), z, dtype=np.int64))
    return Corpus(alphabet, sequences), labels


# ---------------------------------------------------------------------------
# Built-in process suites.  Tables are (entry, {state: ({target: p}, exit_p)}),
# states named by symbol.

_CASE_TABLES: dict[str, list[tuple[str, dict[str, float], dict[str, tuple[dict[str, float], float]]]]] = {
    "I": [
        (
            "i-a",
            {"a1": 0.78, "a2": 0.03, "a3": 0.17, "a4": 0.02},
            {
                "a1": ({"a1": 0.04, "a2": 0.32, "a3": 0.60, "a4": 0.04}, 0.0),
                "a2": ({"a1": 0.15, "a2": 0.03, "a3": 0.11, "a4": 0.71}, 0.0),
                "a3": ({"a1": 0.40, "a2": 0.22, "a3": 0.08, "a4": 0.20}, 0.10),
                "a4": ({"a1": 0.68, "a2": 0.01, "a3": 0.18, "a4": 0.03}, 0.10),
            },
        ),
        (
            "i-b",
            {"b1": 0.74, "b2": 0.0, "b3": 0.25, "b4": 0.01},
            {
                "b1": ({"b1": 0.26, "b2": 0.28, "b3": 0.33, "b4": 0.13}, 0.0),
                "b2": ({"b1": 0.20, "b2": 0.57, "b3": 0.17, "b4": 0.06}, 0.0),
                "b3": ({"b1": 0.59, "b2": 0.11, "b3": 0.06, "b4": 0.15}, 0.09),
                "b4": ({"b1": 0.0, "b2": 0.09, "b3": 0.05, "b4": 0.76}, 0.10),
            },
        ),
        (
            "i-c",
            {"c1": 0.54, "c2": 0.26, "c3": 0.0, "c4": 0.20},
            {
                "c1": ({"c1": 0.56, "c2": 0.0, "c3": 0.23, "c4": 0.21}, 0.0),
                "c2": ({"c1": 0.39, "c2": 0.02, "c3": 0.38, "c4": 0.21}, 0.0),
                "c3": ({"c1": 0.52, "c2": 0.22, "c3": 0.01, "c4": 0.15}, 0.10),
                "c4": ({"c1": 0.0, "c2": 0.73, "c3": 0.12, "c4": 0.05}, 0.10),
            },
        ),
    ],
    "II": [
        (
            "ii-1",
            {"1": 0.3, "2": 0.7},
            {
                "1": ({"2": 0.9, "3": 0.1}, 0.0),
                "2": ({"1": 0.95, "3": 0.05}, 0.0),
                "3": ({"2": 0.05, "3": 0.55, "4": 0.4}, 0.0),
                "4": ({"3": 0.05, "5": 0.95}, 0.0),
                "5": ({"4": 0.4, "5": 0.4}, 0.2),
            },
        ),
        (
            "ii-2",
            {"6": 1.0},
            {
                "6": ({"6": 0.3, "7": 0.6, "8": 0.1}, 0.0),
                "7": ({"8": 1.0}, 0.0),
                "8": ({"6": 0.2, "7": 0.6}, 0.2),
            },
        ),
        (
            "ii-3",
            {"9": 1.0},
            {
                "9": ({"a": 0.6, "b": 0.4}, 0.0),
                "a": ({"9": 1.0}, 0.0),
                "b": ({"9": 0.2, "a": 0.55, "b": 0.1, "c": 0.15}, 0.0),
                "c": ({"c": 0.7}, 0.3),
            },
        ),
        (
            "ii-4",
            {"f": 1.0},
            {
                "f": ({"4": 0.85, "f": 0.15}, 0.0),
                "4": ({"c": 1.0}, 0.0),
                "c": ({"4": 0.1, "6": 0.7, "c": 0.2}, 0.0),
                "6": ({"f": 0.75, "e": 0.25}, 0.0),
                "e": ({"6": 0.15, "e": 0.25}, 0.6),
            },
        ),
        (
            "ii-5",
            {"8": 0.6, "1": 0.4},
            {
                "8": ({"a": 0.95, "d": 0.05}, 0.0),
                "1": ({"a": 0.99, "8": 0.01}, 0.0),
                "a": ({"1": 0.2, "a": 0.3, "c": 0.5}, 0.0),
                "c": ({"8": 0.65, "a": 0.35}, 0.0),
                "d": ({"c": 0.1, "d": 0.1}, 0.8),
            },
        ),
        (
            "ii-6",
            {"8": 1.0},
            {
                "8": ({"9": 0.3, "3": 0.2, "f": 0.5}, 0.0),
                "9": ({"5": 0.6, "9": 0.4}, 0.0),
                "5": ({"4": 0.6, "5": 0.4}, 0.0),
                "4": ({"3": 0.3, "5": 0.5}, 0.2),
                "f": ({"8": 1.0}, 0.0),
                "3": ({"3": 0.4, "f": 0.3, "4": 0.3}, 0.0),
            },
        ),
    ],
    "III": [
        (
            "iii-1",
            {"1": 1.0},
            {
                "1": ({"2": 0.15, "3": 0.65, "4": 0.15}, 0.05),
                "2": ({"1": 0.05, "2": 0.8, "4": 0.15}, 0.0),
                "3": ({"3": 0.5, "5": 0.5}, 0.0),
                "4": ({"2": 0.1, "3": 0.7, "5": 0.2}, 0.0),
                "5": ({"4": 1.0}, 0.0),
            },
        ),
        (
            "iii-2",
            {"1": 1.0},
            {
                "1": ({"2": 0.7, "3": 0.05, "4": 0.2}, 0.05),
                "2": ({"1": 0.2, "2": 0.05, "4": 0.75}, 0.0),
                "3": ({"3": 0.9, "5": 0.1}, 0.0),
                "4": ({"2": 0.65, "3": 0.1, "5": 0.25}, 0.0),
                "5": ({"4": 1.0}, 0.0),
            },
        ),
        (
            "iii-3",
            {"6": 1.0},
            {
                "6": ({"8": 1.0}, 0.0),
                "7": ({"9": 0.35, "a": 0.65}, 0.0),
                "8": ({"a": 0.95}, 0.05),
                "9": ({"7": 0.25, "8": 0.3, "9": 0.45}, 0.0),
                "a": ({"6": 0.4, "7": 0.6}, 0.0),
            },
        ),
        (
            "iii-4",
            {"a": 1.0},
            {
                "6": ({"7": 1.0}, 0.0),
                "7": ({"6": 0.4, "8": 0.6}, 0.0),
                "8": ({"6": 0.3, "7": 0.3, "9": 0.4}, 0.0),
                "9": ({"8": 0.35, "a": 0.6}, 0.05),
                "a": ({"8": 1.0}, 0.0),
            },
        ),
    ],
}


def _build_processes(tables) -> tuple[list[GroundTruthProcess], Alphabet]:
    symbols: list[str] = []
    for _, entry, rows in tables:
        for sym in rows:
            if sym not in symbols:
                symbols.append(sym)
        for sym in entry:
            if sym not in symbols:
                symbols.append(sym)
    alphabet = Alphabet(tuple(symbols))
    processes = []
    for name, entry, rows in tables:
        local = list(rows.keys())
        pos = {sym: i for i, sym in enumerate(local)}
        m = len(local)
        ent = np.zeros(m)
        for sym, p in entry.items():
            ent[pos[sym]] = p
        trans = np.zeros((m, m))
        for sym, (targets, _exit) in rows.items():
            for tgt, p in targets.items():
                trans[pos[sym], pos[tgt]] = p
        states = np.array([alphabet.encode(s) for s in local], dtype=np.int64)
        processes.append(GroundTruthProcess(name=name, states=states, entry=ent, trans=trans))
    return processes, alphabet


def builtin_testcase(case: str) -> tuple[list[GroundTruthProcess], Alphabet]:
    """Return the processes and alphabet of a built-in suite (I, II or III)."""
    case = case.upper()
    if case not in _CASE_TABLES:
        raise ValueError(f"unknown test case {case!r}; choose from I, II, III")
    return _build_processes(_CASE_TABLES[case])


def make_testcase_spec(
    case: str,
    size: str | int = "small",
    seed: int = 0,
    mean_segments_per_sequence: float = 4.0,
) -> SyntheticSpec:
    """A ready-to-generate spec for one built-in case with uniform mixing."""
    processes, alphabet = builtin_testcase(case)
    target = SIZES[size] if isinstance(size, str) else int(size)
    mixing = np.full(len(processes), 1.0 / len(processes))
    return SyntheticSpec(
        processes=processes,
        alphabet=alphabet,
        mixing=mixing,
        target_observations=target,
        mean_segments_per_sequence=mean_segments_per_sequence,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Spec files


def save_synthetic_spec(spec: SyntheticSpec, path: str | Path) -> None:
    doc = {
        "processes": [
            {
                "name": p.name,
                "states": [spec.alphabet.decode(int(c)) for c in p.states],
                "entry": p.entry.tolist(),
                "transitions": p.trans.tolist(),
            }
            for p in spec.processes
        ],
        "mixing": spec.mixing.tolist(),
        "target_observations": spec.target_observations,
        "mean_segments_per_sequence": spec.mean_segments_per_sequence,
        "seed": spec.seed,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_synthetic_spec(path: str | Path) -> SyntheticSpec:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    symbols: list[str] = []
    for pdoc in doc["processes"]:
        for sym in pdoc["states"]:
            if sym not in symbols:
                symbols.append(sym)
    alphabet = Alphabet(tuple(symbols))
    processes = []
    for pdoc in doc["processes"]:
        states = np.array([alphabet.encode(s) for s in pdoc["states"]], dtype=np.int64)
        processes.append(
            GroundTruthProcess(
                name=pdoc["name"],
                states=states,
                entry=np.asarray(pdoc["entry"], dtype=float),
                trans=np.asarray(pdoc["transitions"], dtype=float),
            )
        )
    return SyntheticSpec(
        processes=processes,
        alphabet=alphabet,
        mixing=np.asarray(doc["mixing"], dtype=float),
        target_observations=int(doc["target_observations"]),
        mean_segments_per_sequence=float(doc.get("mean_segments_per_sequence", 4.0)),
        seed=int(doc.get("seed", 0)),
    )
