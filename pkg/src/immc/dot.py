"""Graphviz export of the fitted per-super-state transition structure.

Each sufficiently weighted super state becomes its own DOT digraph:
symbol nodes, entry edges from an ``in`` point, and symbol-to-symbol
edges labeled with their probabilities.  Exit mass is not drawn — each
node's exit probability is the remainder of its drawn outgoing row.
"""

from __future__ import annotations

from pathlib import Path

from .model import SavedModel

DEFAULT_ACTIVE_THRESHOLD = 0.01
DEFAULT_MIN_PROB = 0.05


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def active_states(saved: SavedModel, threshold: float = DEFAULT_ACTIVE_THRESHOLD) -> list[int]:
    """Super states whose global weight reaches ``threshold``."""
    beta = saved.params.beta
    return [i for i in range(saved.params.L) if beta[i] >= threshold]


def state_to_dot(saved: SavedModel, state: int, min_prob: float = DEFAULT_MIN_PROB) -> str:
    """DOT text for one super state's transition graph.

    Edges below ``min_prob`` are omitted; only the entry row and the
    symbol-to-symbol block are rendered.  Ordering is deterministic, so
    identical models yield byte-identical output.
    """
    params = saved.params
    symbols = saved.alphabet.symbols
    B = params.boundary
    theta = params.theta[state]
    lines = [
        f"digraph super_state_{state} {{",
        "  rankdir=LR;",
        "  node [shape=circle];",
        f"  label={_quote(f'super state {state} (weight {params.beta[state]:.3f})')};",
    ]
    entry = [k for k in range(B) if theta[B, k] >= min_prob]
    edges = [
        (k1, k2)
        for k1 in range(B)
        for k2 in range(B)
        if theta[k1, k2] >= min_prob
    ]
    used = sorted(set(entry) | {k for e in edges for k in e})
    if entry:
        lines.append("  entry [label=\"\", shape=point];")
    for k in used:
        lines.append(f"  n{k} [label={_quote(str(symbols[k]))}];")
    for k in entry:
        lines.append(f"  entry -> n{k} [label={_quote(f'{theta[B, k]:.2f}')}];")
    for k1, k2 in edges:
        lines.append(f"  n{k1} -> n{k2} [label={_quote(f'{theta[k1, k2]:.2f}')}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot_files(
    saved: SavedModel,
    out_dir: str | Path,
    min_prob: float = DEFAULT_MIN_PROB,
    active_threshold: float = DEFAULT_ACTIVE_THRESHOLD,
) -> list[Path]:
    """Write one ``super_state_<i>.dot`` file per active super state."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in active_states(saved, active_threshold):
        path = out_dir / f"super_state_{i}.dot"
        path.write_text(state_to_dot(saved, i, min_prob), encoding="utf-8")
        paths.append(path)
    return paths
