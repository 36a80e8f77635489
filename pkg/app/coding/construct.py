"""
Efficiently encodable irregular LDPC codes.

H = [H^(p) | H^(d)] is built from p×p blocks: the parity part is a block
upper-bidiagonal matrix with T in the corner, the data part holds the powers
P^(i·l) of the cyclic down-shift P. Zeroing data blocks with a masking matrix
W (1 keeps a block, 0 replaces it by O) gives irregular column degrees while
keeping the back-substitution encoder.
"""
from fractions import Fraction
from pathlib import Path
from typing import Dict, Optional, Protocol, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from app.config import MASKS_DIR, NEAR_REGULAR_ATTEMPTS
from app.coding.gf2 import BinMatrix, DimensionMismatch, gf2_product, rank

MASK_SHAPES: Dict[str, Tuple[int, int]] = {
    "A/0.82": (12, 56),
    "A/3-4": (17, 51),
    "A/2-3": (23, 46),
    "A/0.55": (31, 38),
    "B/0.8": (8, 29),
    "B/0.55": (40, 48),
}


class ConstructionError(ValueError):
    """Raised when construction parameters violate a named constraint."""


class _DrawRejected(ConstructionError):
    """A random draw that the near-regular builder throws away and retries."""


def is_odd_prime(p: int) -> bool:
    if p < 3 or p % 2 == 0:
        return False
    return all(p % d for d in range(3, int(p ** 0.5) + 1, 2))


def shift_matrix(p: int, power: int = 1) -> np.ndarray:
    """P^power with P the cyclic down-shift (first row ends in 1, ones below the diagonal)."""
    return np.roll(np.eye(p, dtype=np.uint8), power % p, axis=0)


def bidiagonal_matrix(p: int) -> np.ndarray:
    """T: ones on the diagonal and the superdiagonal."""
    return (np.eye(p, dtype=np.uint8) + np.eye(p, k=1, dtype=np.uint8)).astype(np.uint8)


class MaskMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: str
    w: BinMatrix

    @property
    def shape(self) -> Tuple[int, int]:
        return self.w.shape


class LdpcCode(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    h: BinMatrix
    p: int
    j: int
    k: int
    mask_id: Optional[str] = None
    mask_bits: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.p * (self.j + self.k)

    @property
    def m(self) -> int:
        return self.p * self.j

    @property
    def rate(self) -> Fraction:
        return Fraction(self.n - self.m, self.n)

    def block_present(self, i: int, l: int) -> bool:
        """Whether data block (i, l) with l in 1..k is kept."""
        return self.mask_bits is None or bool(self.mask_bits[i, l - 1])


def _check_parameters(p: int, j: int, k: int) -> None:
    if not is_odd_prime(p):
        raise ConstructionError(f"p={p} violates: p must be an odd prime")
    if j < 2:
        raise ConstructionError(f"j={j} violates: 2 <= j")
    if j > k:
        raise ConstructionError(f"j={j}, k={k} violates: j <= k")
    if k > p - 1:
        raise ConstructionError(f"k={k}, p={p} violates: k <= p-1")


def build_base(p: int, j: int, k: int) -> LdpcCode:
    _check_parameters(p, j, k)
    m, n = p * j, p * (j + k)
    h = np.zeros((m, n), dtype=np.uint8)
    eye = np.eye(p, dtype=np.uint8)

    def block(i: int, c: int) -> Tuple[slice, slice]:
        return slice(i * p, (i + 1) * p), slice(c * p, (c + 1) * p)

    # parity part: [T I O..O] / [.. I I ..] / [O..O I]
    h[block(0, 0)] = bidiagonal_matrix(p)
    for i in range(j):
        if i > 0:
            h[block(i, i)] = eye
        if i < j - 1:
            h[block(i, i + 1)] = eye

    # data part: block (i, l) = P^(i*l)
    for i in range(j):
        for l in range(1, k + 1):
            h[block(i, j + l - 1)] = shift_matrix(p, i * l)

    logger.debug(f"built base code p={p} j={j} k={k}: {m}x{n}")
    return LdpcCode(h=BinMatrix(h), p=p, j=j, k=k)


def apply_mask(code: LdpcCode, w: MaskMatrix) -> LdpcCode:
    if w.shape != (code.j, code.k):
        raise ConstructionError(f"mask {w.id} is {w.shape[0]}x{w.shape[1]}, code needs {code.j}x{code.k}")
    keep = w.w.bits.astype(bool)
    if code.mask_bits is not None:
        keep = keep & code.mask_bits.astype(bool)
    p = code.p
    h = np.array(code.h.bits, copy=True)
    for i, l0 in zip(*np.nonzero(~keep)):
        h[i * p:(i + 1) * p, code.m + l0 * p: code.m + (l0 + 1) * p] = 0
    mask_bits = keep.astype(np.uint8)
    mask_bits.setflags(write=False)
    return LdpcCode(h=BinMatrix(h), p=p, j=code.j, k=code.k, mask_id=w.id, mask_bits=mask_bits)


def mask_path(mask_id: str, masks_dir: Path = MASKS_DIR) -> Path:
    return Path(masks_dir) / f"{mask_id}.txt"


def load_mask(mask_id: str, masks_dir: Path = MASKS_DIR) -> MaskMatrix:
    if mask_id not in MASK_SHAPES:
        raise ConstructionError(f"unknown mask id {mask_id!r}; known: {', '.join(MASK_SHAPES)}")
    w = BinMatrix.from_text(mask_path(mask_id, masks_dir).read_text())
    if w.shape != MASK_SHAPES[mask_id]:
        raise ConstructionError(f"mask {mask_id} has shape {w.shape}, expected {MASK_SHAPES[mask_id]}")
    return MaskMatrix(id=mask_id, w=w)


def efficient_encode(code: LdpcCode, data: np.ndarray) -> np.ndarray:
    """Encode p·k data bits (or a batch of rows) to codewords (parity ‖ data).

    Syndrome blocks s_i = Σ_l P^(i·l) d_l are cyclic shifts; the parity
    blocks follow by back-substitution: p_{j-1} = s_{j-1},
    p_i = s_i + p_{i+1}, and finally T p_0 = s_0 + p_1 is solved as a
    suffix XOR since T is unit upper bidiagonal.
    """
    data = np.asarray(data, dtype=np.uint8)
    single = data.ndim == 1
    batch = np.atleast_2d(data)
    p, j, k = code.p, code.j, code.k
    if batch.shape[1] != p * k:
        raise DimensionMismatch(f"data length {batch.shape[1]} != p*k = {p * k}")

    blocks = batch.reshape(batch.shape[0], k, p)
    idx = np.arange(p)
    syndromes = np.zeros((batch.shape[0], j, p), dtype=np.uint8)
    for i in range(j):
        acc = syndromes[:, i, :]
        for l in range(1, k + 1):
            if not code.block_present(i, l):
                continue
            # (P^e d)_r = d_{r-e}
            acc ^= blocks[:, l - 1, (idx - i * l) % p]

    parity = np.zeros_like(syndromes)
    parity[:, j - 1] = syndromes[:, j - 1]
    for i in range(j - 2, -1, -1):
        parity[:, i] = syndromes[:, i] ^ parity[:, i + 1]
    # parity[:, 0] now holds T p_0; undo T by a suffix XOR
    parity[:, 0] = (np.cumsum(parity[:, 0, ::-1], axis=1)[:, ::-1] & 1).astype(np.uint8)

    words = np.concatenate([parity.reshape(batch.shape[0], j * p), batch], axis=1)
    return words[0] if single else words


class Encoder(Protocol):
    n: int
    k: int
    information_positions: np.ndarray

    def encode(self, messages: np.ndarray) -> np.ndarray:
        ...


class EfficientEncoder:
    """Systematic on the data columns; uses the block back-substitution."""

    def __init__(self, code: LdpcCode):
        self.code = code
        self.n = code.n
        self.k = code.n - code.m
        self.information_positions = np.arange(code.m, code.n)

    def encode(self, messages: np.ndarray) -> np.ndarray:
        return efficient_encode(self.code, messages)


class SystematicEncoder:
    """Generator-matrix encoder from Gaussian elimination; systematic on the free columns of RREF(h)."""

    def __init__(self, h: BinMatrix):
        self.h = h
        self.generator = h.nullspace
        self.n = h.cols
        self.k = self.generator.rows
        self.information_positions = h.echelon.free_columns()

    def encode(self, messages: np.ndarray) -> np.ndarray:
        messages = np.asarray(messages, dtype=np.uint8)
        if messages.shape[-1] != self.k:
            raise DimensionMismatch(f"message length {messages.shape[-1]} != dimension {self.k}")
        if messages.ndim == 1:
            return gf2_product(messages[None, :], self.generator.bits)[0]
        return gf2_product(messages, self.generator.bits)


def _row_degrees(n: int, col_weight: int, row_weight: int) -> Tuple[int, int, int]:
    """(m, base degree, rows with one extra socket) for a near-regular profile."""
    if n < 1 or col_weight < 1 or row_weight < 1:
        raise ConstructionError("n, col_weight and row_weight must be positive")
    m = max(1, round(n * col_weight / row_weight))
    if col_weight > m:
        raise ConstructionError(f"col_weight={col_weight} exceeds the {m} available rows")
    edges = n * col_weight
    base, extra = divmod(edges, m)
    top = base + (1 if extra else 0)
    if base < row_weight - 1 or top > row_weight + 1 or top > n:
        raise ConstructionError(
            f"degree sequence infeasible: n={n}, col_weight={col_weight} gives row weights "
            f"{base}..{top}, outside {row_weight}±1"
        )
    return m, base, extra


def _draw_near_regular(n: int, col_weight: int, m: int, base: int, extra: int,
                       rng: np.random.Generator) -> np.ndarray:
    degrees = np.full(m, base, dtype=np.int64)
    degrees[rng.permutation(m)[:extra]] += 1
    sockets = np.repeat(np.arange(m), degrees)
    rng.shuffle(sockets)

    for c in range(n):
        lo, hi = c * col_weight, (c + 1) * col_weight
        for pos in range(lo, hi):
            chosen = set(sockets[lo:pos].tolist())
            if sockets[pos] not in chosen:
                continue
            later = np.flatnonzero(~np.isin(sockets[hi:], list(chosen)))
            if later.size == 0:
                raise _DrawRejected(f"socket collision at column {c}")
            swap = hi + int(rng.choice(later))
            sockets[pos], sockets[swap] = sockets[swap], sockets[pos]

    h = np.zeros((m, n), dtype=np.uint8)
    h[sockets, np.repeat(np.arange(n), col_weight)] = 1
    return h


def near_regular_ldpc(n: int, col_weight: int, row_weight: int, seed: int,
                      require_full_rank: bool = False) -> BinMatrix:
    """Random matrix with every column of weight ``col_weight`` and rows within ±1 of ``row_weight``.

    Column-by-column socket assignment; a column that would repeat a row
    swaps the offending socket with a later one. Rejected draws are retried
    with a fresh stream derived from (seed, attempt).
    """
    m, base, extra = _row_degrees(n, col_weight, row_weight)
    h: Optional[np.ndarray] = None
    for attempt in Retrying(
        stop=stop_after_attempt(NEAR_REGULAR_ATTEMPTS),
        retry=retry_if_exception_type(_DrawRejected),
        reraise=True,
    ):
        with attempt:
            number = attempt.retry_state.attempt_number
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(number,)))
            draw = _draw_near_regular(n, col_weight, m, base, extra, rng)
            if require_full_rank and rank(BinMatrix(draw)) < m:
                raise _DrawRejected(f"draw {number} is rank deficient")
            h = draw
    logger.debug(f"near-regular ({col_weight},{row_weight}) code of length {n}: {m}x{n}")
    return BinMatrix(h)
