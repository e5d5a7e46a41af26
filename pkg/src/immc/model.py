"""Parameter layer of the segmentation model.

The model couples two levels of Markov structure: a truncated chain over
``L`` latent "super states", and, inside each super state, a transition
matrix over the observation codes plus the boundary marker.  Rows are drawn
from finite Dirichlet distributions that weak-limit-approximate the
underlying stick-breaking priors; the ``kappa`` concentration biases each
super-state transition row toward self-transition, which is what makes
segments persist.

Parameter blocks (with K = alphabet size including the boundary code):

* ``beta``  (L,)      global super-state weights
* ``pi``    (L, L)    super-state transition rows, sticky toward the diagonal
* ``psi``   (L, K)    per-super-state occupancy over codes
* ``theta`` (L, K, K) per-super-state transition rows over codes; row
                      ``theta[i, boundary]`` is the segment entry
                      distribution and column ``theta[i, :, boundary]``
                      holds segment exit probabilities
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .corpus import Alphabet
from .errors import ModelFormatError, ModelVersionError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Hyperparams:
    """Concentrations and truncation level, with library-wide defaults."""

    gamma: float = 1.0
    alpha: float = 1.0
    kappa: float = 100.0
    sigma: float = 1.0
    lam: float = 1.0
    L: int = 20
    seed: int = 0

    def __post_init__(self):
        for name in ("gamma", "alpha", "sigma", "lam"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if self.L < 1:
            raise ValueError("L must be at least 1")


@dataclass
class ModelParams:
    beta: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    theta: np.ndarray

    @property
    def L(self) -> int:
        return int(self.beta.size)

    @property
    def K(self) -> int:
        return int(self.psi.shape[1])

    @property
    def boundary(self) -> int:
        return self.K - 1

    def validate(self, atol: float = 1e-8) -> None:
        L, K = self.L, self.K
        if self.pi.shape != (L, L) or self.psi.shape != (L, K) or self.theta.shape != (L, K, K):
            raise ValueError("parameter block shapes are inconsistent")
        for name, block, axis in (
            ("beta", self.beta, 0),
            ("pi", self.pi, 1),
            ("psi", self.psi, 1),
            ("theta", self.theta, 2),
        ):
            if np.any(block < -atol):
                raise ValueError(f"{name} has negative entries")
            sums = block.sum(axis=axis)
            if not np.allclose(sums, 1.0, atol=atol):
                raise ValueError(f"{name} rows do not sum to 1 (max dev {np.abs(sums - 1).max():.2e})")


@dataclass
class SufficientStats:
    """Counts gathered over one sampled latent trajectory.

    ``d[i]``       non-boundary emissions attributed to super state i
    ``G[i, k, j]`` observed k -> j sub-transitions inside super state i
                   (boundary row/column hold segment entries and exits)
    ``n[i, j]``    super-state transitions i -> j at segment changes
    """

    d: np.ndarray
    G: np.ndarray
    n: np.ndarray

    @classmethod
    def zeros(cls, L: int, K: int) -> "SufficientStats":
        return cls(
            d=np.zeros(L, dtype=np.int64),
            G=np.zeros((L, K, K), dtype=np.int64),
            n=np.zeros((L, L), dtype=np.int64),
        )


# ---------------------------------------------------------------------------
# Stick-breaking constructions (finite truncations)


def sbp1_truncated(gamma: float, L: int, rng: np.random.Generator) -> np.ndarray:
    """Degree-L stick-breaking weights with Beta(1, gamma) fractions.

    The final entry absorbs the unbroken remainder so the vector sums to
    exactly one.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if L == 1:
        return np.ones(1)
    fracs = rng.beta(1.0, gamma, size=L - 1)
    out = np.empty(L)
    remaining = 1.0
    for i, f in enumerate(fracs):
        out[i] = f * remaining
        remaining *= 1.0 - f
    out[L - 1] = remaining
    return out


def sbp2_sticky(
    alpha: float, kappa: float, beta: np.ndarray, j: int, rng: np.random.Generator
) -> np.ndarray:
    """One sticky second-level stick-breaking row.

    Breaks a stick against the base weights ``beta`` with total concentration
    ``alpha + kappa``, where the base is biased by an extra point mass
    ``kappa`` on component ``j``:  base = (alpha * beta + kappa * delta_j) /
    (alpha + kappa).  With ``kappa = 0`` this is a plain second-level
    stick-breaking draw against ``beta``.
    """
    beta = np.asarray(beta, dtype=float)
    L = beta.size
    if not 0 <= j < L:
        raise ValueError("sticky index out of range")
    conc = alpha + kappa
    base = alpha * beta / conc
    base[j] += kappa / conc
    out = np.empty(L)
    remaining_stick = 1.0
    remaining_base = 1.0
    for i in range(L - 1):
        remaining_base -= base[i]
        if remaining_base <= 0.0:
            # All base mass already consumed: the rest of the stick stays here.
            out[i] = remaining_stick
            out[i + 1 :] = 0.0
            return out
        f = rng.beta(conc * base[i], conc * remaining_base) if base[i] > 0 else 0.0
        out[i] = f * remaining_stick
        remaining_stick *= 1.0 - f
    out[L - 1] = remaining_stick
    return out


_PROB_FLOOR = 1e-50
"""Smallest probability any drawn cell may hold.

Tiny concentrations (for example ``sigma/K`` around 0.1) make the
underlying gamma draws underflow to exact float zero for a fraction of a
percent of cells.  A model with hard zeros assigns zero mass to data that
touches them and breaks the message recursions.  Flooring at 1e-50 and
renormalizing keeps every outcome representable while moving at most a
few 1e-5 of CDF mass, far below Monte Carlo resolution at the sample
sizes used anywhere in this package.
"""


def _dirichlet(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    """Dirichlet draw with a positivity floor on every component."""
    alpha = np.asarray(alpha, dtype=float)
    if np.all(alpha == 0):
        raise ValueError("all-zero Dirichlet concentration")
    x = rng.dirichlet(alpha)
    x = np.maximum(x, _PROB_FLOOR)
    return x / x.sum()


# ---------------------------------------------------------------------------
# Prior initialization and posterior resampling


def init_priors(h: Hyperparams, K: int, rng: np.random.Generator) -> ModelParams:
    """Draw parameters from the finite prior.

    Draw order is fixed (beta, then pi rows, psi rows, theta rows in
    super-state-major order) so a seeded generator reproduces the same
    initialization bit for bit.  Sub-state transition rows are seeded from
    the super state's own occupancy draw, which ties a fresh super state's
    dynamics to the symbols it favors.
    """
    L = h.L
    beta = _dirichlet(rng, np.full(L, h.gamma / L))
    pi = np.empty((L, L))
    for i in range(L):
        conc = h.alpha * beta.copy()
        conc[i] += h.kappa
        pi[i] = _dirichlet(rng, conc)
    psi = np.empty((L, K))
    for i in range(L):
        psi[i] = _dirichlet(rng, np.full(K, h.sigma / K))
    theta = np.empty((L, K, K))
    for i in range(L):
        for k in range(K):
            theta[i, k] = _dirichlet(rng, h.lam * psi[i])
    return ModelParams(beta=beta, pi=pi, psi=psi, theta=theta)


def resample_params(
    h: Hyperparams, stats: SufficientStats, rng: np.random.Generator
) -> ModelParams:
    """Draw parameters from their conditional given the counts.

    Every block is a Dirichlet with prior pseudo-counts plus observed
    counts; ``pi`` keeps the sticky ``kappa`` bonus on the diagonal and
    ``psi`` pools each super state's sub-transition targets (column sums of
    ``G``, boundary included).  Transition rows always redraw around the
    freshly drawn ``psi`` — the same hierarchical base used at
    initialization — so a state's rows are tied to one shared target
    profile.  That coupling is what breaks merged states: a table serving
    two disjoint symbol regimes cannot match a single ``psi`` profile and
    keeps paying prior mass for it, while an empty state proposes a
    coherent candidate table (all rows concentrated on one random symbol
    subset) every iteration.  Draw order matches :func:`init_priors`.
    """
    if stats.d.size != h.L:
        raise ValueError(
            f"stats truncation {stats.d.size} does not match hyperparams L={h.L}"
        )
    L = stats.d.size
    K = stats.G.shape[1]
    beta = _dirichlet(rng, h.gamma / L + stats.d)
    pi = np.empty((L, L))
    for i in range(L):
        conc = h.alpha * beta + stats.n[i]
        conc[i] += h.kappa
        pi[i] = _dirichlet(rng, conc)
    psi = np.empty((L, K))
    col_totals = stats.G.sum(axis=1)  # (L, K): targets pooled over sources
    for i in range(L):
        psi[i] = _dirichlet(rng, h.sigma / K + col_totals[i])
    theta = np.empty((L, K, K))
    for i in range(L):
        base = h.lam * psi[i]
        for k in range(K):
            theta[i, k] = _dirichlet(rng, base + stats.G[i, k])
    return ModelParams(beta=beta, pi=pi, psi=psi, theta=theta)


# ---------------------------------------------------------------------------
# Serialization


@dataclass
class SavedModel:
    params: ModelParams
    hyperparams: Hyperparams
    alphabet: Alphabet
    iterations_run: int = 0
    seed: int = 0


def _write_envelope(path: str | Path, payload: dict) -> None:
    payload = {"format_version": MODEL_FORMAT_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def read_envelope(path: str | Path) -> dict:
    """Read any model file, checking the envelope but not the kind."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise ModelFormatError(f"{path}: missing format_version")
    if payload["format_version"] != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"{path}: format_version {payload['format_version']} unsupported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    return payload


def save_model(path: str | Path, saved: SavedModel) -> None:
    """Write a fitted model as one JSON document.

    Floats go through Python's shortest-round-trip repr, so a load/save
    cycle reproduces every array bit for bit.
    """
    p = saved.params
    _write_envelope(
        path,
        {
            "model_kind": "immc",
            "hyperparams": asdict(saved.hyperparams),
            "alphabet": list(saved.alphabet.symbols),
            "beta": p.beta.tolist(),
            "pi": p.pi.tolist(),
            "psi": p.psi.tolist(),
            "theta": p.theta.tolist(),
            "seed": saved.seed,
            "iterations_run": saved.iterations_run,
        },
    )


def load_model(path: str | Path) -> SavedModel:
    payload = read_envelope(path)
    kind = payload.get("model_kind", "immc")
    if kind != "immc":
        raise ModelFormatError(f"{path}: expected an immc model, found {kind!r}")
    try:
        h = Hyperparams(**payload["hyperparams"])
        params = ModelParams(
            beta=np.asarray(payload["beta"], dtype=float),
            pi=np.asarray(payload["pi"], dtype=float),
            psi=np.asarray(payload["psi"], dtype=float),
            theta=np.asarray(payload["theta"], dtype=float),
        )
        alphabet = Alphabet(tuple(payload["alphabet"]))
        saved = SavedModel(
            params=params,
            hyperparams=h,
            alphabet=alphabet,
            iterations_run=int(payload["iterations_run"]),
            seed=int(payload["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model payload ({exc})") from exc
    params.validate(atol=1e-6)
    if params.K != alphabet.size:
        raise ModelFormatError(f"{path}: parameter shapes disagree with the alphabet")
    return saved
