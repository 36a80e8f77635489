"""
Exact linear algebra over GF(2).

Matrices are held as read-only ``uint8`` arrays. Elimination runs on a
64-bit packed copy of the rows, so the dense high-weight matrices produced by
the CSS construction stay tractable at a few thousand rows.
"""
from functools import cached_property
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

BinVector = npt.NDArray[np.uint8]
BitsLike = Union[Sequence[int], npt.ArrayLike]

_WORD_BITS = 64
_FLOAT_EXACT_LIMIT = 1 << 24


class DimensionMismatch(ValueError):
    """Raised when operand shapes are incompatible."""


def as_vector(bits: BitsLike, length: Optional[int] = None) -> BinVector:
    """Coerce bits to a 1-D ``uint8`` {0,1} vector."""
    vec = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if vec.size and vec.max() > 1:
        raise ValueError("binary vectors may only hold 0 and 1")
    if length is not None and vec.size != length:
        raise DimensionMismatch(f"expected a vector of length {length}, got {vec.size}")
    return vec


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack the rows of a {0,1} array into little-endian 64-bit words."""
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    rows, cols = bits.shape
    nwords = max(1, -(-cols // _WORD_BITS))
    packed = np.packbits(bits, axis=1, bitorder="little")
    buf = np.zeros((rows, nwords * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    return buf.view(np.dtype("<u8"))


def unpack_rows(words: np.ndarray, cols: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype=np.dtype("<u8"))
    if words.shape[0] == 0:
        return np.zeros((0, cols), dtype=np.uint8)
    return np.unpackbits(words.view(np.uint8), axis=1, count=cols, bitorder="little")


def _column_bits(words: np.ndarray, col: int) -> np.ndarray:
    q, s = divmod(col, _WORD_BITS)
    return (words[:, q] & np.uint64(1 << s)) != 0


def row_reduce_packed(words: np.ndarray, limit: int) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form of packed rows, pivoting on columns < ``limit``.

    Pivots are chosen leftmost column first, topmost row first. Returns the
    reduced rows (all of them; rows past the rank are zero on the first
    ``limit`` columns) and the pivot columns.
    """
    w = np.array(words, dtype=np.dtype("<u8"), copy=True)
    nrows = w.shape[0]
    pivots: List[int] = []
    row = 0
    for col in range(limit):
        if row == nrows:
            break
        column = _column_bits(w, col)
        candidates = np.flatnonzero(column[row:])
        if candidates.size == 0:
            continue
        pivot = row + int(candidates[0])
        if pivot != row:
            w[[row, pivot]] = w[[pivot, row]]
            column[[row, pivot]] = column[[pivot, row]]
        column[row] = False
        hits = np.flatnonzero(column)
        if hits.size:
            # the pivot row is zero left of `col`, so only words from q on change
            q = col // _WORD_BITS
            w[hits, q:] ^= w[row, q:]
        pivots.append(col)
        row += 1
    return w, pivots


class Echelon(NamedTuple):
    """Reduced row echelon form: nonzero packed rows and their pivot columns."""

    words: np.ndarray
    pivots: Tuple[int, ...]
    cols: int

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def rows(self) -> np.ndarray:
        return unpack_rows(self.words, self.cols)

    def free_columns(self) -> np.ndarray:
        mask = np.ones(self.cols, dtype=bool)
        mask[list(self.pivots)] = False
        return np.flatnonzero(mask)

    def reduce(self, x: BinVector) -> np.ndarray:
        """Residual of ``x`` after eliminating every pivot column (packed)."""
        xw = pack_rows(x[None, :])[0]
        if not self.pivots:
            return xw
        selected = x[list(self.pivots)].astype(bool)
        if selected.any():
            xw = xw ^ np.bitwise_xor.reduce(self.words[selected], axis=0)
        return xw


class BinMatrix:
    """A matrix over GF(2) with row-major, adjacency and packed views."""

    def __init__(self, bits: BitsLike):
        arr = np.array(bits, dtype=np.uint8, copy=True)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0)
        if arr.ndim != 2:
            raise ValueError(f"a binary matrix needs two dimensions, got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("binary matrices may only hold 0 and 1")
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BinMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "BinMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def from_positions(cls, rows: int, cols: int, positions: Iterable[Tuple[int, int]]) -> "BinMatrix":
        arr = np.zeros((rows, cols), dtype=np.uint8)
        for r, c in positions:
            if not (0 <= r < rows and 0 <= c < cols):
                raise ValueError(f"position ({r}, {c}) outside a {rows}x{cols} matrix")
            if arr[r, c]:
                raise ValueError(f"duplicate position ({r}, {c})")
            arr[r, c] = 1
        return cls(arr)

    @classmethod
    def from_text(cls, text: str) -> "BinMatrix":
        """Parse the matrix text format: ``rows cols`` then one 0/1 line per row."""
        lines = [line.strip() for line in text.strip().splitlines()]
        if not lines:
            raise ValueError("empty matrix text")
        try:
            rows, cols = (int(tok) for tok in lines[0].split())
        except ValueError as e:
            raise ValueError(f"bad matrix header {lines[0]!r}") from e
        body = lines[1:]
        if len(body) != rows:
            raise ValueError(f"header announces {rows} rows, found {len(body)}")
        arr = np.zeros((rows, cols), dtype=np.uint8)
        for r, line in enumerate(body):
            if len(line) != cols or set(line) - {"0", "1"}:
                raise ValueError(f"row {r} is not a {cols}-character 0/1 string")
            arr[r] = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
        return cls(arr)

    def to_text(self) -> str:
        lines = [f"{self.rows} {self.cols}"]
        lines.extend("".join("1" if b else "0" for b in row) for row in self._bits)
        return "\n".join(lines) + "\n"

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def shape(self) -> Tuple[int, int]:
        return self._bits.shape

    @property
    def rows(self) -> int:
        return self._bits.shape[0]

    @property
    def cols(self) -> int:
        return self._bits.shape[1]

    @property
    def T(self) -> "BinMatrix":
        return BinMatrix(self._bits.T)

    @property
    def weight(self) -> int:
        return int(self._bits.sum(dtype=np.int64))

    @cached_property
    def positions(self) -> frozenset:
        r, c = np.nonzero(self._bits)
        return frozenset(zip(r.tolist(), c.tolist()))

    @cached_property
    def row_weights(self) -> np.ndarray:
        return self._bits.sum(axis=1, dtype=np.int64)

    @cached_property
    def col_weights(self) -> np.ndarray:
        return self._bits.sum(axis=0, dtype=np.int64)

    @cached_property
    def check_neighbors(self) -> List[np.ndarray]:
        return [np.flatnonzero(row) for row in self._bits]

    @cached_property
    def var_neighbors(self) -> List[np.ndarray]:
        return [np.flatnonzero(col) for col in self._bits.T]

    @cached_property
    def packed(self) -> np.ndarray:
        words = pack_rows(self._bits) if self.rows else np.zeros((0, 1), dtype=np.dtype("<u8"))
        words.setflags(write=False)
        return words

    @cached_property
    def echelon(self) -> Echelon:
        if self.rows == 0:
            return Echelon(np.zeros((0, 1), dtype=np.dtype("<u8")), (), self.cols)
        words, pivots = row_reduce_packed(self.packed, self.cols)
        return Echelon(words[: len(pivots)], tuple(pivots), self.cols)

    @cached_property
    def nullspace(self) -> "BinMatrix":
        """Basis of {x : self·xᵀ = 0} as rows, identity on the free columns."""
        ech = self.echelon
        free = ech.free_columns()
        basis = np.zeros((free.size, self.cols), dtype=np.uint8)
        basis[np.arange(free.size), free] = 1
        if ech.rank and free.size:
            basis[:, list(ech.pivots)] = ech.rows()[:, free].T
        return BinMatrix(basis)

    def row(self, i: int) -> BinVector:
        return self._bits[i]

    def column(self, i: int) -> BinVector:
        return self._bits[:, i]

    def submatrix(self, columns: Sequence[int]) -> "BinMatrix":
        return BinMatrix(self._bits[:, list(columns)])

    def syndrome(self, x: np.ndarray) -> np.ndarray:
        """``self·xᵀ`` for a vector, or one syndrome per row for a batch."""
        x = np.asarray(x, dtype=np.uint8)
        if x.shape[-1] != self.cols:
            raise DimensionMismatch(f"word length {x.shape[-1]} != {self.cols} columns")
        if x.ndim == 1:
            return gf2_product(self._bits, x[:, None])[:, 0]
        return gf2_product(x, self._bits.T)

    def is_codeword(self, x: np.ndarray) -> bool:
        return not self.syndrome(x).any()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((self.shape, self._bits.tobytes()))

    def __repr__(self) -> str:
        return f"BinMatrix({self.rows}x{self.cols}, weight={self.weight})"


def gf2_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two {0,1} arrays reduced mod 2."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if a.shape[-1] < _FLOAT_EXACT_LIMIT:
        prod = a.astype(np.float32) @ b.astype(np.float32)
        return (prod.astype(np.int64) & 1).astype(np.uint8)
    return ((a.astype(np.int64) @ b.astype(np.int64)) & 1).astype(np.uint8)


def rank(m: BinMatrix) -> int:
    return m.echelon.rank


def nullspace_basis(m: BinMatrix) -> List[BinVector]:
    return list(m.nullspace.bits)


def mat_mul(a: BinMatrix, b: BinMatrix) -> BinMatrix:
    if a.cols != b.rows:
        raise DimensionMismatch(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    return BinMatrix(gf2_product(a.bits, b.bits))


def solve(m: BinMatrix, rhs: BitsLike) -> Optional[BinVector]:
    """Any x with m·xᵀ = rhs, free variables set to 0; None when inconsistent."""
    rhs = as_vector(rhs)
    if rhs.size != m.rows:
        raise DimensionMismatch(f"rhs length {rhs.size} != {m.rows} rows")
    x = np.zeros(m.cols, dtype=np.uint8)
    if m.rows == 0:
        return x
    augmented = np.hstack([m.bits, rhs[:, None]])
    words, pivots = row_reduce_packed(pack_rows(augmented), m.cols)
    last = _column_bits(words, m.cols)
    if last[len(pivots):].any():
        return None
    x[pivots] = last[: len(pivots)]
    return x


def in_rowspace(m: BinMatrix, x: BitsLike) -> bool:
    x = as_vector(x)
    if x.size != m.cols:
        raise DimensionMismatch(f"vector length {x.size} != {m.cols} columns")
    return not m.echelon.reduce(x).any()


def same_rowspace(a: BinMatrix, b: BinMatrix) -> bool:
    """True iff a and b span the same row space (equivalently define the same code)."""
    if a.cols != b.cols:
        return False
    if rank(a) != rank(b):
        return False
    return all(in_rowspace(a, row) for row in b.echelon.rows())


def random_matrix(rows: int, cols: int, rng: np.random.Generator, density: float = 0.5) -> BinMatrix:
    return BinMatrix((rng.random((rows, cols)) < density).astype(np.uint8))
