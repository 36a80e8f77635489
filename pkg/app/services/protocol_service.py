"""
Classical phase of BB84 over a binary symmetric channel, and Eve's information bound.

Alice holds x, Bob holds x + e. Alice announces x + u for a random codeword u
of C1; Bob decodes (x + e) − (x + u) = u + e to u'. Both keep the coset label
of their codeword modulo C2 as the key.
"""
import asyncio
import math
from typing import Callable, Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq

from app.config import (
    CYCLE_REMOVAL_PASSES,
    DEFAULT_MAX_ITER,
    OSD_DEFAULT_ORDER,
    OSD_RELIABILITY,
    TRIAL_BATCH_SIZE,
)
from app.coding.channel import ChannelObservation, bsc_observation, derive_rng, sample_bsc_errors
from app.coding.css import CssPair, KeyMap, coset_equal
from app.coding.decoders import (
    DecodeResult,
    bit_serial_sp,
    combined_decode,
    osd,
    sum_product_bsc,
)
from app.coding.gf2 import BinMatrix, gf2_product
from app.coding.tanner import remove_4cycles
from app.utils.log_sinks import add_file_sink

DecoderFn = Callable[[ChannelObservation], DecodeResult]
Flavor = Literal["sum-product", "bit-serial", "combined-original", "combined-modified", "osd",
                 "approximative", "generalized"]

# spawn-key labels of the per-run random streams
STREAM_X, STREAM_E, STREAM_U = 0, 1, 2

# Eve bounds quoted for the 712-bit key, keyed by crossover probability
REFERENCE_EVE_BOUNDS: Dict[float, float] = {0.065: 0.5936, 0.0675: 6.312}


class DecoderConfig(BaseModel):
    flavor: Flavor = "combined-modified"
    max_iter: int = Field(DEFAULT_MAX_ITER, ge=1)
    osd_order: int = Field(OSD_DEFAULT_ORDER, ge=0)
    reliability: Literal["posterior", "channel"] = OSD_RELIABILITY
    cycle_passes: int = Field(CYCLE_REMOVAL_PASSES, ge=0)
    equivalent_matrices: int = Field(3, ge=1)


def make_decoder(h: BinMatrix, cfg: DecoderConfig) -> DecoderFn:
    """Bind a decoder to a parity-check matrix; 4-cycle removal happens once here."""
    if cfg.flavor == "sum-product":
        return lambda obs: sum_product_bsc(h, obs, cfg.max_iter)
    if cfg.flavor == "bit-serial":
        return lambda obs: bit_serial_sp(h, obs, cfg.max_iter)
    if cfg.flavor in ("combined-original", "combined-modified"):
        prepared = remove_4cycles(h, cfg.cycle_passes)
        schedule = "flooding" if cfg.flavor == "combined-original" else "serial"
        return lambda obs: combined_decode(prepared, obs, cfg.max_iter, cfg.osd_order, schedule,
                                           cfg.reliability, cycles_removed=True)
    if cfg.flavor == "osd":
        generator = h.nullspace

        def decode(obs: ChannelObservation) -> DecodeResult:
            word = osd(generator, obs, cfg.osd_order)
            return DecodeResult(word=word, converged=True, iterations_used=0, flavor="osd", osd_used=True)
        return decode
    raise ValueError(f"decoder flavor {cfg.flavor!r} cannot decode from a single matrix")


class ProtocolRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    run_index: int
    epsilon: float
    x: np.ndarray
    e: np.ndarray
    u: np.ndarray
    announced: np.ndarray
    decoder_input: np.ndarray
    u_prime: Optional[np.ndarray] = None
    alice_key: np.ndarray
    bob_key: Optional[np.ndarray] = None
    agreed: bool
    failed: bool
    iterations_used: int = 0


class EveBoundInput(BaseModel):
    delta: float = Field(ge=0.0, lt=1.0)
    k: int = Field(ge=1)


def random_codeword(pair: CssPair, rng: np.random.Generator) -> np.ndarray:
    """Uniform codeword of C1 through the pair's encoder (or the C1 basis)."""
    if pair.encoder is not None:
        return pair.encoder.encode(rng.integers(0, 2, pair.encoder.k, dtype=np.uint8))
    coefficients = rng.integers(0, 2, pair.g1.rows, dtype=np.uint8)
    return gf2_product(coefficients[None, :], pair.g1.bits)[0]


def run_protocol(pair: CssPair, keymap: KeyMap, epsilon: float, decoder: Union[DecoderConfig, DecoderFn],
                 seed: int, run_index: int = 0) -> ProtocolRun:
    if not 0.0 <= epsilon < 0.5:
        raise ValueError(f"crossover probability {epsilon} outside [0, 0.5)")
    if keymap.matrix.shape[1] != pair.n:
        raise ValueError("key map does not match the pair's length")
    decode = make_decoder(pair.h1, decoder) if isinstance(decoder, DecoderConfig) else decoder

    n = pair.n
    x = derive_rng(seed, run_index, STREAM_X).integers(0, 2, n, dtype=np.uint8)
    e = sample_bsc_errors(n, epsilon, derive_rng(seed, run_index, STREAM_E))
    u = random_codeword(pair, derive_rng(seed, run_index, STREAM_U))

    announced = x ^ u
    received = x ^ e
    decoder_input = received ^ announced
    result = decode(bsc_observation(decoder_input, epsilon))

    alice_key = keymap.key(u)
    u_prime = result.word
    if u_prime is None or not pair.h1.is_codeword(u_prime):
        return ProtocolRun(run_index=run_index, epsilon=epsilon, x=x, e=e, u=u, announced=announced,
                           decoder_input=decoder_input, u_prime=u_prime, alice_key=alice_key,
                           agreed=False, failed=True, iterations_used=result.iterations_used)

    return ProtocolRun(
        run_index=run_index, epsilon=epsilon, x=x, e=e, u=u, announced=announced,
        decoder_input=decoder_input, u_prime=u_prime, alice_key=alice_key, bob_key=keymap.key(u_prime),
        agreed=coset_equal(pair, u, u_prime, "C1/C2"), failed=False, iterations_used=result.iterations_used,
    )


def binary_entropy(delta: float) -> float:
    if delta <= 0.0 or delta >= 1.0:
        return 0.0
    return -(1.0 - delta) * math.log2(1.0 - delta) - delta * math.log2(delta)


def eve_bound(bound_input: EveBoundInput) -> float:
    """h(δ) + δ·log2(2^(2k) − 1), with log2(2^(2k) − 1) = 2k + log2(1 − 2^(−2k))."""
    delta, k = bound_input.delta, bound_input.k
    if delta == 0.0:
        return 0.0
    log_states = 2 * k + math.log1p(-math.ldexp(1.0, -2 * k)) / math.log(2.0)
    return binary_entropy(delta) + delta * log_states


def implied_delta(bound: float, k: int) -> float:
    """δ whose bound equals ``bound`` on the increasing branch of the bound."""
    top = 1.0 - max(math.ldexp(1.0, -2 * k), 1e-12)
    if not 0.0 < bound < eve_bound(EveBoundInput(delta=top, k=k)):
        raise ValueError(f"bound {bound} not reachable for k={k}")
    return brentq(lambda d: eve_bound(EveBoundInput(delta=d, k=k)) - bound, 1e-300, top, xtol=1e-15)


def coset_coverage_stats(pair: CssPair, trials: Iterable[Tuple[float, np.ndarray, Optional[np.ndarray]]]) -> pd.DataFrame:
    """Coverage in C2^perp/C1^perp per crossover.

    Each trial is (crossover, transmitted, decoded or None). Coverage is the
    share of wrong but valid decodings whose difference to the transmitted
    word lies in rowspace(h1); NaN where no such decoding happened.
    """
    counts: Dict[float, List[int]] = {}
    for crossover, transmitted, decoded in trials:
        row = counts.setdefault(float(crossover), [0, 0, 0, 0])
        row[0] += 1
        if decoded is None:
            row[1] += 1
            continue
        if np.array_equal(decoded, transmitted):
            continue
        row[1] += 1
        if pair.h2.is_codeword(decoded):
            row[2] += 1
            if coset_equal(pair, transmitted, decoded, "C2perp/C1perp"):
                row[3] += 1

    records = []
    for crossover in sorted(counts):
        total, failures, wrong, covered = counts[crossover]
        records.append({
            "crossover": crossover,
            "trials": total,
            "plain_failures": failures,
            "wrong_codewords": wrong,
            "covered": covered,
            "coverage": covered / wrong if wrong else float("nan"),
        })
    return pd.DataFrame(records, columns=["crossover", "trials", "plain_failures", "wrong_codewords",
                                          "covered", "coverage"])


class ProtocolService:
    def __init__(self, batch_size: int = TRIAL_BATCH_SIZE):
        add_file_sink("protocol_service")
        self.batch_size = batch_size

    async def run_batch(self, pair: CssPair, keymap: KeyMap, epsilon: float,
                        decoder: Union[DecoderConfig, DecoderFn], seed: int, runs: int) -> List[ProtocolRun]:
        """``runs`` independent protocol runs, gathered in batches and returned in run order."""
        decode = make_decoder(pair.h1, decoder) if isinstance(decoder, DecoderConfig) else decoder
        results: List[ProtocolRun] = []
        for i in range(0, runs, self.batch_size):
            batch = range(i, min(runs, i + self.batch_size))
            tasks = [asyncio.to_thread(run_protocol, pair, keymap, epsilon, decode, seed, r) for r in batch]
            results.extend(await asyncio.gather(*tasks))
        agreed = sum(r.agreed for r in results)
        logger.info(f"protocol at ε={epsilon}: {agreed}/{runs} runs agreed on a {keymap.key_len}-bit key")
        return results

    @staticmethod
    def agreement_rate(runs: List[ProtocolRun]) -> float:
        return sum(r.agreed for r in runs) / len(runs) if runs else float("nan")
