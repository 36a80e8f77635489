"""
Decoders for the binary symmetric and erasure channels.

Sum-product runs in the log domain with the phi(x) = -ln tanh(x/2) check
rule; messages are clamped to ±LLR_CLAMP. A result flagged ``converged``
always satisfies the parity checks of the matrix it was decoded with.
"""
from itertools import combinations, islice
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from app.config import (
    CYCLE_REMOVAL_PASSES,
    DEFAULT_MAX_COLUMN_WEIGHT,
    DEFAULT_MAX_ITER,
    LLR_CLAMP,
    OSD_DEFAULT_ORDER,
    OSD_RELIABILITY,
    OSD_RELIABILITY_CHOICES,
)
from app.coding.channel import ChannelObservation
from app.coding.css import CssPair, coset_equal
from app.coding.gf2 import (
    BinMatrix,
    DimensionMismatch,
    as_vector,
    gf2_product,
    pack_rows,
    rank,
    row_reduce_packed,
    same_rowspace,
    solve,
    unpack_rows,
)
from app.coding.tanner import reduce_column_weights, remove_4cycles

Schedule = Literal["flooding", "serial"]

_PHI_FLOOR = 1e-12
_OSD_CHUNK = 4096
_OSD_ROW_BLOCK = 512
_COST_TOL = 1e-9


class DecoderSetupError(ValueError):
    """Raised when decoder inputs break a precondition (not on decoding failure)."""


class DecodeResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    word: Optional[np.ndarray] = None
    converged: bool
    iterations_used: int
    flavor: str
    osd_used: bool = False
    coset_success: Optional[bool] = None
    posterior: Optional[np.ndarray] = None

    @property
    def failed(self) -> bool:
        return self.word is None


class StoppingSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    variables: FrozenSet[int] = frozenset()

    def is_stopping_set(self, h: BinMatrix) -> bool:
        """Every check touching the set touches it at least twice."""
        if not self.variables:
            return True
        counts = h.bits[:, sorted(self.variables)].sum(axis=1)
        return not np.any(counts == 1)


def _check_length(h: BinMatrix, obs: ChannelObservation) -> None:
    if obs.n != h.cols:
        raise DimensionMismatch(f"observation length {obs.n} != {h.cols} columns")


def _phi(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, _PHI_FLOOR, LLR_CLAMP)
    return -np.log(np.tanh(x / 2.0))


def _check_messages(sum_phi: np.ndarray, negatives: np.ndarray,
                    own_phi: np.ndarray, own_negative: np.ndarray) -> np.ndarray:
    """Extrinsic check-to-variable messages from per-check aggregates."""
    magnitude = np.minimum(_phi(sum_phi - own_phi), LLR_CLAMP)
    odd = (negatives - own_negative.astype(np.int64)) % 2 == 1
    return np.where(odd, -magnitude, magnitude)


def _hard(llr: np.ndarray) -> np.ndarray:
    return (llr < 0).astype(np.uint8)


def _done(h: BinMatrix, word: np.ndarray, iterations: int, flavor: str, posterior: np.ndarray) -> DecodeResult:
    return DecodeResult(word=word, converged=True, iterations_used=iterations, flavor=flavor, posterior=posterior)


def sum_product_bsc(h: BinMatrix, obs: ChannelObservation, max_iter: int = DEFAULT_MAX_ITER) -> DecodeResult:
    """Flooding sum-product: all checks, then all variables, per iteration."""
    _check_length(h, obs)
    m, n = h.shape
    llr = np.clip(obs.llr.astype(np.float64), -LLR_CLAMP, LLR_CLAMP)
    hard = _hard(llr)
    if not h.syndrome(hard).any():
        return _done(h, hard, 0, "sum-product", llr)

    rows, cols = np.nonzero(h.bits)
    v2c = llr[cols]
    posterior = llr
    for iteration in range(1, max_iter + 1):
        own_phi = _phi(np.abs(v2c))
        own_negative = v2c < 0
        sum_phi = np.bincount(rows, weights=own_phi, minlength=m)
        negatives = np.bincount(rows[own_negative], minlength=m)
        c2v = _check_messages(sum_phi[rows], negatives[rows], own_phi, own_negative)

        posterior = llr + np.bincount(cols, weights=c2v, minlength=n)
        hard = _hard(posterior)
        if not h.syndrome(hard).any():
            return _done(h, hard, iteration, "sum-product", posterior)
        v2c = np.clip(posterior[cols] - c2v, -LLR_CLAMP, LLR_CLAMP)

    return DecodeResult(converged=False, iterations_used=max_iter, flavor="sum-product", posterior=posterior)


def _variable_edges(cols: np.ndarray, n: int) -> List[np.ndarray]:
    order = np.argsort(cols, kind="stable")
    counts = np.bincount(cols, minlength=n)
    return np.split(order, np.cumsum(counts)[:-1])


def bit_serial_sp(h: BinMatrix, obs: ChannelObservation, max_iter: int = DEFAULT_MAX_ITER) -> DecodeResult:
    """Shuffled sum-product: variables in ascending order, each seeing the freshest check state.

    Per-check aggregates (Σphi and sign parity) are updated as soon as a
    variable emits new messages, and rebuilt from scratch each iteration.
    """
    _check_length(h, obs)
    m, n = h.shape
    llr = np.clip(obs.llr.astype(np.float64), -LLR_CLAMP, LLR_CLAMP)
    hard = _hard(llr)
    if not h.syndrome(hard).any():
        return _done(h, hard, 0, "bit-serial", llr)

    rows, cols = np.nonzero(h.bits)
    edges_of = _variable_edges(cols, n)
    v2c = llr[cols].copy()
    c2v = np.zeros_like(v2c)
    own_phi = _phi(np.abs(v2c))
    own_negative = v2c < 0
    posterior = llr
    for iteration in range(1, max_iter + 1):
        sum_phi = np.bincount(rows, weights=own_phi, minlength=m)
        negatives = np.bincount(rows[own_negative], minlength=m)
        for v in range(n):
            e = edges_of[v]
            if e.size == 0:
                continue
            checks = rows[e]
            msg = _check_messages(sum_phi[checks], negatives[checks], own_phi[e], own_negative[e])
            c2v[e] = msg
            fresh = np.clip(llr[v] + msg.sum() - msg, -LLR_CLAMP, LLR_CLAMP)
            fresh_phi = _phi(np.abs(fresh))
            fresh_negative = fresh < 0
            sum_phi[checks] += fresh_phi - own_phi[e]
            negatives[checks] += fresh_negative.astype(np.int64) - own_negative[e].astype(np.int64)
            v2c[e] = fresh
            own_phi[e] = fresh_phi
            own_negative[e] = fresh_negative

        posterior = llr + np.bincount(cols, weights=c2v, minlength=n)
        hard = _hard(posterior)
        if not h.syndrome(hard).any():
            return _done(h, hard, iteration, "bit-serial", posterior)

    return DecodeResult(converged=False, iterations_used=max_iter, flavor="bit-serial", posterior=posterior)


def _patterns(k: int, weight: int) -> Iterable[np.ndarray]:
    it = combinations(range(k), weight)
    while True:
        chunk = list(islice(it, _OSD_CHUNK))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=np.int64)


def osd(generator: BinMatrix, obs: ChannelObservation, order: int = OSD_DEFAULT_ORDER,
        llr: Optional[np.ndarray] = None) -> np.ndarray:
    """Ordered statistics decoding of order ``order`` on the most reliable basis.

    Reliabilities come from ``llr`` when given (e.g. sum-product posteriors),
    otherwise from the channel. Candidates are the MRB re-encoding of the
    hard decision plus every flip pattern of weight <= order; the one with
    the smallest Σ|llr| over disagreements wins, earlier candidates on ties.
    """
    _check_length(generator, obs)
    if order < 0:
        raise ValueError("OSD order must be >= 0")
    k, n = generator.shape
    source = obs.llr if llr is None else np.asarray(llr, dtype=np.float64)
    reliability = np.abs(source)
    received = obs.hard_bits if llr is None else np.where(source == 0, obs.hard_bits, _hard(source))
    if k == 0:
        return np.zeros(n, dtype=np.uint8)

    perm = np.argsort(-reliability, kind="stable")
    words, pivots = row_reduce_packed(pack_rows(generator.bits[:, perm]), n)
    if len(pivots) < k:
        raise DecoderSetupError(f"generator has rank {len(pivots)} < {k} rows")
    basis = unpack_rows(words[:k], n)
    y = received[perm].astype(np.uint8)
    rel = reliability[perm]

    best = gf2_product(y[pivots][None, :], basis)[0]
    disagree = best ^ y
    best_cost = float(rel @ disagree)
    # cost(best ^ f) = best_cost + f·signed
    signed = rel * (1.0 - 2.0 * disagree)
    base_word, base_cost = best.copy(), best_cost
    dense = basis.astype(np.float64)
    single = dense @ signed

    if order >= 1:
        a = int(np.argmin(single))
        if base_cost + single[a] < best_cost - _COST_TOL:
            best, best_cost = base_word ^ basis[a], base_cost + float(single[a])

    if order >= 2 and k >= 2:
        for start in range(0, k, _OSD_ROW_BLOCK):
            stop = min(k, start + _OSD_ROW_BLOCK)
            overlap = (dense[start:stop] * signed) @ dense.T
            costs = base_cost + single[start:stop, None] + single[None, :] - 2.0 * overlap
            costs[np.arange(stop - start)[:, None] >= np.arange(k)[None, :] - start] = np.inf
            flat = int(np.argmin(costs))
            r, b = divmod(flat, k)
            if costs[r, b] < best_cost - _COST_TOL:
                best, best_cost = base_word ^ basis[start + r] ^ basis[b], float(costs[r, b])

    for weight in range(3, min(order, k) + 1):
        for chunk in _patterns(k, weight):
            flips = np.bitwise_xor.reduce(basis[chunk], axis=1)
            costs = base_cost + flips.astype(np.float64) @ signed
            i = int(np.argmin(costs))
            if costs[i] < best_cost - _COST_TOL:
                best, best_cost = base_word ^ flips[i], float(costs[i])

    out = np.empty(n, dtype=np.uint8)
    out[perm] = best
    return out


def combined_decode(
    h: BinMatrix,
    obs: ChannelObservation,
    max_iter: int = DEFAULT_MAX_ITER,
    order: int = OSD_DEFAULT_ORDER,
    schedule: Schedule = "flooding",
    reliability: str = OSD_RELIABILITY,
    cycles_removed: bool = False,
) -> DecodeResult:
    """Sum-product, then OSD on failure.

    ``flooding`` is the original combination, ``serial`` the modified one.
    ``h`` must already have gone through remove_4cycles; pass
    ``cycles_removed=True`` to confirm it.
    """
    if not cycles_removed:
        raise DecoderSetupError("combined decoding expects h preprocessed by remove_4cycles")
    if reliability not in OSD_RELIABILITY_CHOICES:
        raise DecoderSetupError(f"reliability must be one of {OSD_RELIABILITY_CHOICES}")
    if schedule == "flooding":
        sp = sum_product_bsc(h, obs, max_iter)
        flavor = "combined-original"
    elif schedule == "serial":
        sp = bit_serial_sp(h, obs, max_iter)
        flavor = "combined-modified"
    else:
        raise DecoderSetupError(f"unknown schedule {schedule!r}")

    if sp.converged:
        return sp.model_copy(update={"flavor": flavor})

    llr = sp.posterior if reliability == "posterior" else obs.llr
    logger.debug(f"{flavor}: sum-product failed after {sp.iterations_used} iterations, running OSD-{order}")
    word = osd(h.nullspace, obs, order, llr=llr)
    return DecodeResult(word=word, converged=True, iterations_used=sp.iterations_used, flavor=flavor,
                        osd_used=True, posterior=sp.posterior)


def _erasure_mask(n: int, erasures: Iterable[int]) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    idx = np.fromiter((int(e) for e in erasures), dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DimensionMismatch(f"erasure position outside 0..{n - 1}")
    mask[idx] = True
    return mask


def transform_for_erasures(h: BinMatrix, erasures: Iterable[int]) -> BinMatrix:
    """Row operations giving each erased column weight 1 where possible.

    Erased columns are taken in ascending order; each one picks the first row
    not yet used as a pivot and clears the column from every other row.
    Columns with no unused row left keep whatever weight they reach.
    """
    bits = np.array(h.bits, copy=True)
    used = np.zeros(h.rows, dtype=bool)
    for col in sorted(set(int(e) for e in erasures)):
        candidates = np.flatnonzero(bits[:, col].astype(bool) & ~used)
        if candidates.size == 0:
            continue
        pivot = int(candidates[0])
        used[pivot] = True
        others = np.flatnonzero(bits[:, col])
        others = others[others != pivot]
        bits[others] ^= bits[pivot]
    return BinMatrix(bits)


def _consistent(h: BinMatrix, known: np.ndarray, erased: np.ndarray) -> bool:
    x = known.copy()
    x[erased] = 0
    return solve(h.submatrix(np.flatnonzero(erased)), h.syndrome(x)) is not None


def bec_peeling(h: BinMatrix, erasures: Iterable[int], known_bits: np.ndarray) -> Tuple[DecodeResult, StoppingSet]:
    """Peel checks with a single erased neighbour until none remain.

    On a fixpoint with erasures left, the residual set is returned as a
    stopping set and the result is a failure.
    """
    m, n = h.shape
    known = as_vector(known_bits, n)
    erased = _erasure_mask(n, erasures)
    if not _consistent(h, known, erased):
        raise DecoderSetupError("known bits are not consistent with any codeword")

    x = known.copy()
    x[erased] = 0
    counts = h.bits[:, erased].sum(axis=1).astype(np.int64)
    partial = h.syndrome(x).copy()
    if np.any((counts == 0) & (partial == 1)):
        raise DecoderSetupError("a fully known check is unsatisfied")

    neighbours = h.var_neighbors
    queue = list(np.flatnonzero(counts == 1))
    steps = 0
    while queue:
        c = int(queue.pop())
        if counts[c] != 1:
            continue
        v = int(np.flatnonzero(h.bits[c].astype(bool) & erased)[0])
        x[v] = partial[c]
        erased[v] = False
        steps += 1
        for c2 in neighbours[v]:
            counts[c2] -= 1
            partial[c2] ^= x[v]
            if counts[c2] == 1:
                queue.append(int(c2))
            elif counts[c2] == 0 and partial[c2]:
                raise DecoderSetupError(f"check {c2} unsatisfied after peeling")

    residual = StoppingSet(variables=frozenset(np.flatnonzero(erased).tolist()))
    if residual.variables:
        return DecodeResult(converged=False, iterations_used=steps, flavor="bec-peeling"), residual
    return DecodeResult(word=x, converged=True, iterations_used=steps, flavor="bec-peeling"), residual


def bec_ml(h: BinMatrix, erasures: Iterable[int], known_bits: np.ndarray) -> DecodeResult:
    """Maximum-likelihood erasure decoding: solve h restricted to the erased columns."""
    n = h.cols
    known = as_vector(known_bits, n)
    erased = _erasure_mask(n, erasures)
    x = known.copy()
    x[erased] = 0
    columns = np.flatnonzero(erased)
    if columns.size == 0:
        if h.syndrome(x).any():
            raise DecoderSetupError("known bits are not a codeword")
        return DecodeResult(word=x, converged=True, iterations_used=0, flavor="bec-ml")

    sub = h.submatrix(columns)
    solution = solve(sub, h.syndrome(x))
    if solution is None:
        raise DecoderSetupError("known bits are not consistent with any codeword")
    if rank(sub) < columns.size:
        return DecodeResult(converged=False, iterations_used=1, flavor="bec-ml")
    x[columns] = solution
    return DecodeResult(word=x, converged=True, iterations_used=1, flavor="bec-ml")


def approximative_decode(
    pair: CssPair,
    true_error_positions: Iterable[int],
    obs: ChannelObservation,
    max_iter: int = DEFAULT_MAX_ITER,
    transmitted: Optional[np.ndarray] = None,
    cycle_passes: int = CYCLE_REMOVAL_PASSES,
) -> DecodeResult:
    """Genie-aided decoding of C2^perp, an evaluation device for the simulator only.

    The columns of h2 that carry the true errors are thinned to weight at
    most two, 4-cycles are removed, and plain flooding sum-product decodes on
    the transformed matrix. With ``transmitted`` given, coset success in
    C2^perp/C1^perp is filled in.
    """
    reduced = reduce_column_weights(pair.h2, true_error_positions, DEFAULT_MAX_COLUMN_WEIGHT)
    h = remove_4cycles(reduced.matrix, cycle_passes)
    result = sum_product_bsc(h, obs, max_iter).model_copy(update={"flavor": "approximative"})
    if transmitted is None:
        return result
    success = result.converged and coset_equal(pair, transmitted, result.word, "C2perp/C1perp")
    return result.model_copy(update={"coset_success": bool(success)})


class GeneralizedDecoder:
    """Majority vote over sum-product runs on several parity-check matrices of one code."""

    def __init__(self, h_list: Sequence[BinMatrix], cycle_passes: int = CYCLE_REMOVAL_PASSES):
        if not h_list:
            raise DecoderSetupError("need at least one parity-check matrix")
        first = h_list[0]
        for i, h in enumerate(h_list[1:], start=1):
            if not same_rowspace(first, h):
                raise DecoderSetupError(f"matrix {i} does not define the same code as matrix 0")
        self.matrices = [remove_4cycles(h, cycle_passes) for h in h_list]

    def decode(self, obs: ChannelObservation, max_iter: int = DEFAULT_MAX_ITER) -> DecodeResult:
        votes: Dict[bytes, List] = {}
        iterations = 0
        for index, h in enumerate(self.matrices):
            result = sum_product_bsc(h, obs, max_iter)
            iterations = max(iterations, result.iterations_used)
            if not result.converged:
                continue
            key = result.word.tobytes()
            if key in votes:
                votes[key][0] += 1
            else:
                votes[key] = [1, index, result.word]

        if not votes:
            return DecodeResult(converged=False, iterations_used=iterations, flavor="generalized")

        reliability = obs.reliability

        def rank_key(entry: List) -> Tuple[int, float, int]:
            count, index, word = entry
            return -count, float(reliability[word != obs.hard_bits].sum()), index

        _, _, word = min(votes.values(), key=rank_key)
        return DecodeResult(word=word, converged=True, iterations_used=iterations, flavor="generalized")


def generalized_decode(h_list: Sequence[BinMatrix], obs: ChannelObservation,
                       max_iter: int = DEFAULT_MAX_ITER, cycle_passes: int = CYCLE_REMOVAL_PASSES) -> DecodeResult:
    return GeneralizedDecoder(h_list, cycle_passes).decode(obs, max_iter)
