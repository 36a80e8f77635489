"""
CSS pairs built from an arbitrary LDPC code.

Given C1 = null(h1), the rows of h1 restricted to N−M of its columns are
encoded into C1; those M codewords are the rows of h2, so C2 = rowspace(h2)
is a subcode of C1 and C2^perp = null(h2) contains C1^perp = rowspace(h1).
Keys are labels of the cosets u + C2 inside C1.
"""
from fractions import Fraction
from functools import cached_property
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel

from app.config import H1_COLUMN_ORDER, H1_COLUMN_ORDER_CHOICES
from app.coding.construct import Encoder
from app.coding.gf2 import BinMatrix, as_vector, gf2_product, in_rowspace, rank

CosetMode = Literal["C1/C2", "C2perp/C1perp"]


class CssConstructionError(ValueError):
    """Raised when a CSS pair or key map cannot be formed."""


class CssPair:
    """h1 defines C1, h2 defines C2^perp; immutable once built."""

    def __init__(self, h1: BinMatrix, h2: BinMatrix, selected_columns: Optional[np.ndarray] = None,
                 encoder: Optional[Encoder] = None):
        if h1.cols != h2.cols:
            raise CssConstructionError(f"h1 has {h1.cols} columns, h2 has {h2.cols}")
        self.h1 = h1
        self.h2 = h2
        self.encoder = encoder
        cols = np.asarray(selected_columns if selected_columns is not None else [], dtype=np.int64)
        cols.setflags(write=False)
        self.selected_columns = cols

    @property
    def n(self) -> int:
        return self.h1.cols

    @property
    def m(self) -> int:
        return self.h1.rows

    @cached_property
    def g1(self) -> BinMatrix:
        return self.h1.nullspace

    @cached_property
    def g2perp(self) -> BinMatrix:
        return self.h2.nullspace

    @cached_property
    def rank_h1(self) -> int:
        return rank(self.h1)

    @cached_property
    def rank_h2(self) -> int:
        return rank(self.h2)

    @property
    def dimension_c1(self) -> int:
        return self.n - self.rank_h1

    @property
    def css_dimension(self) -> int:
        return self.dimension_c1 - self.rank_h2

    @property
    def deficient(self) -> bool:
        return self.rank_h2 < self.m

    def header(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "rank_h1": self.rank_h1,
            "rank_h2": self.rank_h2,
            "css_dimension": self.css_dimension,
            "css_rate": str(css_rate(self)),
            "selected_columns": self.selected_columns.tolist(),
        }

    def __repr__(self) -> str:
        return f"CssPair(n={self.n}, m={self.m}, rank_h2={self.rank_h2})"


class CssReport(BaseModel):
    passed: bool
    n: int
    m: int
    rank_h2: int
    css_dimension: int
    css_rate: float
    offending_rows: List[int] = []

    def summary(self) -> str:
        status = "pass" if self.passed else f"FAIL (h2 rows not in C1: {self.offending_rows[:10]})"
        return f"{self.m}x{self.n} rank(h2)={self.rank_h2} css_rate={self.css_rate:.4f} {status}"


def select_columns(h1: BinMatrix, count: int, column_order: str = H1_COLUMN_ORDER) -> np.ndarray:
    """Indices of ``count`` columns by weight (ties by index), returned in ascending index order."""
    if column_order not in H1_COLUMN_ORDER_CHOICES:
        raise CssConstructionError(f"column order must be one of {H1_COLUMN_ORDER_CHOICES}")
    weights = h1.col_weights
    key = weights if column_order == "lightest" else -weights
    order = np.lexsort((np.arange(h1.cols), key))
    return np.sort(order[:count])


def build_css(h1: BinMatrix, encoder: Encoder, column_order: str = H1_COLUMN_ORDER) -> CssPair:
    m, n = h1.shape
    measured = rank(h1)
    if measured < m:
        raise CssConstructionError(f"h1 must have full row rank {m}, measured {measured}")
    if encoder.n != n or encoder.k != n - m:
        raise CssConstructionError(f"encoder is ({encoder.n}, {encoder.k}), C1 is ({n}, {n - m})")

    selected = select_columns(h1, n - m, column_order)
    messages = np.ascontiguousarray(h1.bits[:, selected])
    h2 = BinMatrix(encoder.encode(messages))

    bad = np.flatnonzero(gf2_product(h2.bits, h1.bits.T).any(axis=1))
    if bad.size:
        raise CssConstructionError(f"encoder output violates h1 on rows {bad[:10].tolist()}")

    pair = CssPair(h1, h2, selected, encoder)
    if pair.deficient:
        logger.warning(f"h2 is rank deficient: rank {pair.rank_h2} < {m}; css rate uses the measured rank")
    logger.info(f"built CSS pair {m}x{n}: rank(h2)={pair.rank_h2}, css rate {float(css_rate(pair)):.4f}")
    return pair


def css_rate(pair: CssPair) -> Fraction:
    return Fraction(pair.css_dimension, pair.n)


def verify_css(pair: CssPair) -> CssReport:
    product = gf2_product(pair.h2.bits, pair.h1.bits.T)
    offending = np.flatnonzero(product.any(axis=1)).tolist()
    return CssReport(
        passed=not offending,
        n=pair.n,
        m=pair.m,
        rank_h2=pair.rank_h2,
        css_dimension=pair.css_dimension,
        css_rate=float(css_rate(pair)),
        offending_rows=offending,
    )


class KeyMap:
    """Linear map K with K·uᵀ = K·u'ᵀ iff u − u' ∈ C2, for u, u' in C1."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.array(matrix, dtype=np.uint8, copy=True)
        matrix.setflags(write=False)
        self.matrix = matrix

    @property
    def key_len(self) -> int:
        return self.matrix.shape[0]

    def key(self, u: np.ndarray) -> np.ndarray:
        """Key bits of a codeword, or one key per row of a batch."""
        u = np.asarray(u, dtype=np.uint8)
        if u.ndim == 1:
            return gf2_product(self.matrix, u[:, None])[:, 0]
        return gf2_product(u, self.matrix.T)


def make_key_map(pair: CssPair) -> KeyMap:
    """Key map from an information set of C1.

    Projection onto the free columns I of RREF(h1) is a bijection on C1. In
    that coordinate space C2 projects to rowspace(h2[:, I]); with R its RREF,
    the quotient coordinates are x[F] + Σ_r x[pivot_r]·R[r, F] over the
    non-pivot set F of R.
    """
    if pair.deficient:
        raise CssConstructionError(f"key map needs rank(h2) = {pair.m}, measured {pair.rank_h2}")

    info = pair.h1.echelon.free_columns()
    projected = pair.h2.submatrix(info)
    ech = projected.echelon
    if ech.rank != pair.rank_h2:
        raise CssConstructionError("projection of h2 onto the information set lost rank")
    pivots = list(ech.pivots)
    free = ech.free_columns()

    q = np.zeros((free.size, info.size), dtype=np.uint8)
    q[np.arange(free.size), free] = 1
    if pivots and free.size:
        q[:, pivots] = ech.rows()[:, free].T

    k = np.zeros((free.size, pair.n), dtype=np.uint8)
    k[:, info] = q
    logger.debug(f"key map: {free.size} key bits from {info.size} information positions")
    return KeyMap(k)


def coset_equal(pair: CssPair, a: np.ndarray, b: np.ndarray, which: CosetMode = "C1/C2") -> bool:
    a = as_vector(a, pair.n)
    b = as_vector(b, pair.n)
    if which == "C1/C2":
        outer, inner = pair.h1, pair.h2
    elif which == "C2perp/C1perp":
        outer, inner = pair.h2, pair.h1
    else:
        raise ValueError(f"unknown quotient {which!r}")
    if not (outer.is_codeword(a) and outer.is_codeword(b)):
        raise CssConstructionError(f"{which}: both words must lie in the outer code")
    return in_rowspace(inner, a ^ b)
