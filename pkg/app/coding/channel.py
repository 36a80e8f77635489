"""Binary symmetric and erasure channel observations, and per-trial random streams."""
import math
from typing import Iterable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.config import LLR_CLAMP
from app.coding.gf2 import BinMatrix, as_vector


class ChannelObservation(BaseModel):
    """What a decoder sees: hard decisions, LLRs and (on the BEC) an erasure mask."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hard_bits: np.ndarray
    llr: np.ndarray
    erasures: Optional[np.ndarray] = None
    epsilon: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "ChannelObservation":
        if self.hard_bits.shape != self.llr.shape:
            raise ValueError("hard bits and llr must have the same length")
        if not np.all(np.isfinite(self.llr)):
            raise ValueError("llr must be finite")
        if self.erasures is not None and np.any(self.llr[self.erasures]):
            raise ValueError("erased positions must carry llr 0")
        return self

    @property
    def n(self) -> int:
        return int(self.hard_bits.size)

    @property
    def reliability(self) -> np.ndarray:
        return np.abs(self.llr)


def bsc_llr(epsilon: float) -> float:
    """LLR magnitude ln((1−ε)/ε), clamped so a noiseless channel stays finite."""
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"crossover probability {epsilon} outside [0, 0.5)")
    if epsilon == 0.0:
        return LLR_CLAMP
    return min(math.log((1.0 - epsilon) / epsilon), LLR_CLAMP)


def bsc_observation(received: np.ndarray, epsilon: float) -> ChannelObservation:
    hard = as_vector(received)
    mag = bsc_llr(epsilon)
    llr = np.where(hard == 1, -mag, mag).astype(np.float64)
    return ChannelObservation(hard_bits=hard, llr=llr, epsilon=epsilon)


def bec_observation(word: np.ndarray, erased: Iterable[int]) -> ChannelObservation:
    hard = as_vector(word).copy()
    mask = np.zeros(hard.size, dtype=bool)
    mask[list(erased)] = True
    hard[mask] = 0
    llr = np.where(hard == 1, -LLR_CLAMP, LLR_CLAMP).astype(np.float64)
    llr[mask] = 0.0
    return ChannelObservation(hard_bits=hard, llr=llr, erasures=mask)


def derive_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Independent stream for (seed, spawn_key); same inputs give the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in spawn_key)))


def sample_bsc_errors(n: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"crossover probability {epsilon} outside [0, 0.5)")
    return (rng.random(n) < epsilon).astype(np.uint8)


def error_density_split(h: BinMatrix, errors: np.ndarray) -> Tuple[int, int]:
    """(errors on low-density columns, errors on high-density columns).

    A column is high-density when its weight exceeds the median column weight.
    """
    positions = np.flatnonzero(as_vector(errors, h.cols))
    threshold = float(np.median(h.col_weights)) if h.cols else 0.0
    high = int(np.count_nonzero(h.col_weights[positions] > threshold))
    return int(positions.size) - high, high
