import numpy as np

from app.coding.channel import ChannelObservation


def all_codewords(generator: np.ndarray) -> np.ndarray:
    """Every codeword spanned by the rows of ``generator``."""
    k = generator.shape[0]
    messages = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.int64)
    return ((messages @ generator.astype(np.int64)) & 1).astype(np.uint8)


def soft_observation(llr: np.ndarray) -> ChannelObservation:
    llr = np.asarray(llr, dtype=np.float64)
    return ChannelObservation(hard_bits=(llr < 0).astype(np.uint8), llr=llr)


def soft_cost(word: np.ndarray, obs: ChannelObservation) -> float:
    return float(np.abs(obs.llr)[word != obs.hard_bits].sum())
