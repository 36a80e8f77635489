"""
Tanner-graph view of a parity-check matrix and code-equivalent transformations.

Every transformation here uses row additions only, so the row space (and
with it the code, the nullspace) is preserved exactly.
"""
from typing import Dict, Iterable, List, NamedTuple, Optional

import numpy as np
from loguru import logger

from app.config import CYCLE_REMOVAL_PASSES, DEFAULT_MAX_COLUMN_WEIGHT
from app.coding.gf2 import BinMatrix


class FourCycle(NamedTuple):
    v_a: int
    v_b: int
    c_a: int
    c_b: int


class TannerGraph:
    """Bipartite graph with one variable node per column and one check node per row."""

    def __init__(self, h: BinMatrix):
        self.h = h
        self.variable_nodes = h.cols
        self.check_nodes = h.rows
        self.check_adjacency = h.check_neighbors
        self.variable_adjacency = h.var_neighbors

    @property
    def edges(self) -> List[tuple]:
        rows, cols = np.nonzero(self.h.bits)
        return list(zip(rows.tolist(), cols.tolist()))

    def variable_degree(self, i: int) -> int:
        return int(self.variable_adjacency[i].size)

    def check_degree(self, j: int) -> int:
        return int(self.check_adjacency[j].size)

    def has_edge(self, check: int, variable: int) -> bool:
        return bool(self.h.bits[check, variable])


def _overlaps(bits: np.ndarray) -> np.ndarray:
    f = bits.astype(np.float32)
    return (f @ f.T).astype(np.int64)


def _pair_cycles(overlap: np.ndarray) -> np.ndarray:
    return overlap * (overlap - 1) // 2


def count_4cycles(h: BinMatrix) -> int:
    if h.rows < 2:
        return 0
    ov = _overlaps(h.bits)
    upper = np.triu(_pair_cycles(ov), k=1)
    return int(upper.sum())


def enumerate_4cycles(h: BinMatrix) -> List[FourCycle]:
    """All 4-cycles, ordered by (c_a, c_b, v_a, v_b)."""
    cycles: List[FourCycle] = []
    if h.rows < 2:
        return cycles
    ov = _overlaps(h.bits)
    rows_a, rows_b = np.nonzero(np.triu(ov >= 2, k=1))
    for c_a, c_b in zip(rows_a.tolist(), rows_b.tolist()):
        shared = np.flatnonzero(h.bits[c_a] & h.bits[c_b]).tolist()
        for x in range(len(shared)):
            for y in range(x + 1, len(shared)):
                cycles.append(FourCycle(shared[x], shared[y], c_a, c_b))
    return cycles


def remove_4cycles(h: BinMatrix, max_passes: int = CYCLE_REMOVAL_PASSES) -> BinMatrix:
    """Greedy row-addition heuristic that lowers the number of 4-cycles.

    In each sweep every row may be replaced once by its sum with a lighter
    (or equally heavy, lower-index) row it overlaps in at least two
    positions, when that strictly lowers (4-cycle count, matrix weight).
    Stops at zero cycles, at a sweep without change, or after ``max_passes``.
    """
    total = count_4cycles(h)
    if total == 0 or max_passes <= 0:
        return h

    bits = np.array(h.bits, copy=True)
    weights = bits.sum(axis=1, dtype=np.int64)
    ov = _overlaps(bits)
    start = total

    for sweep in range(max_passes):
        changed = False
        for a in range(bits.shape[0]):
            partners = np.flatnonzero(ov[a] >= 2)
            partners = partners[partners != a]
            if partners.size == 0:
                continue
            eligible = partners[
                (weights[partners] < weights[a]) | ((weights[partners] == weights[a]) & (partners < a))
            ]
            if eligible.size == 0:
                continue

            candidates = bits[eligible] ^ bits[a]
            cand_ov = (candidates.astype(np.float32) @ bits.T.astype(np.float32)).astype(np.int64)
            cand_ov[:, a] = 0
            old_row = ov[a].copy()
            old_row[a] = 0
            delta_cycles = _pair_cycles(cand_ov).sum(axis=1) - _pair_cycles(old_row).sum()
            delta_weight = candidates.sum(axis=1, dtype=np.int64) - weights[a]

            best = int(np.lexsort((np.arange(eligible.size), delta_weight, delta_cycles))[0])
            if delta_cycles[best] > 0 or (delta_cycles[best] == 0 and delta_weight[best] >= 0):
                continue

            bits[a] = candidates[best]
            weights[a] += delta_weight[best]
            new_row = cand_ov[best]
            new_row[a] = weights[a]
            ov[a, :] = new_row
            ov[:, a] = new_row
            total += int(delta_cycles[best])
            changed = True
            if total == 0:
                break
        if total == 0 or not changed:
            break

    logger.debug(f"4-cycle removal: {start} -> {total} cycles after {sweep + 1} sweep(s)")
    return BinMatrix(bits)


class ColumnReduction(NamedTuple):
    matrix: BinMatrix
    achieved: Dict[int, int]
    shortfall: List[int]


def reduce_column_weights(
    h: BinMatrix,
    targets: Iterable[int],
    max_weight: int = DEFAULT_MAX_COLUMN_WEIGHT,
) -> ColumnReduction:
    """Bring each target column down to at most ``max_weight`` ones by row additions.

    Targets are processed in ascending order. For each, the lightest incident
    row (lowest index on ties) is added to the other incident rows until
    ``max_weight`` remain. Later targets can raise earlier ones again; the
    achieved weights are measured at the end.
    """
    targets = sorted(set(int(t) for t in targets))
    for t in targets:
        if not 0 <= t < h.cols:
            raise ValueError(f"target column {t} outside 0..{h.cols - 1}")

    bits = np.array(h.bits, copy=True)
    for t in targets:
        incident = np.flatnonzero(bits[:, t])
        if incident.size <= max_weight:
            continue
        row_weights = bits[incident].sum(axis=1)
        pivot = int(incident[np.lexsort((incident, row_weights))[0]])
        excess = incident.size - max_weight
        for r in incident:
            if excess == 0:
                break
            if r == pivot:
                continue
            bits[r] ^= bits[pivot]
            excess -= 1

    achieved = {t: int(bits[:, t].sum()) for t in targets}
    shortfall = [t for t, w in achieved.items() if w > max_weight]
    if shortfall:
        logger.debug(f"column-weight reduction left {len(shortfall)} of {len(targets)} targets above {max_weight}")
    return ColumnReduction(BinMatrix(bits), achieved, shortfall)


def equivalent_matrices(
    h: BinMatrix,
    count: int,
    rng: np.random.Generator,
    additions: Optional[int] = None,
) -> List[BinMatrix]:
    """``count`` parity-check matrices of the same code; the first one is ``h``.

    The others are obtained from ``h`` by random row additions, which keep
    the row space and so the code.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    additions = additions if additions is not None else max(1, h.rows)
    result = [h]
    for _ in range(count - 1):
        bits = np.array(h.bits, copy=True)
        if h.rows >= 2:
            for _ in range(additions):
                a, b = rng.choice(h.rows, size=2, replace=False)
                bits[a] ^= bits[b]
        result.append(BinMatrix(bits))
    return result
