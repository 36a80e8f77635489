"""
Monte-Carlo sweeps over catalog codes and the reports built from their CSVs.
"""
import asyncio
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.stats import binomtest
from tqdm import tqdm

from app.config import (
    CSV_SCHEMA_ID,
    H1_COLUMN_ORDER,
    H1_COLUMN_ORDER_CHOICES,
    MIN_DESK_TRIALS,
    RESULTS_DIR,
    TRIAL_BATCH_SIZE,
)
from app.coding.channel import bsc_observation, derive_rng, error_density_split, sample_bsc_errors
from app.coding.css import CssPair, coset_equal
from app.coding.decoders import DecodeResult, GeneralizedDecoder, approximative_decode
from app.coding.gf2 import gf2_product
from app.coding.tanner import equivalent_matrices
from app.services.catalog_service import CatalogService
from app.services.protocol_service import (
    REFERENCE_EVE_BOUNDS,
    DecoderConfig,
    EveBoundInput,
    eve_bound,
    implied_delta,
    make_decoder,
    random_codeword,
)
from app.utils.file_handler import FileHandler
from app.utils.log_sinks import add_file_sink

Mode = Literal["C1-plain", "C1-coset", "C2perp-plain", "C2perp-coset"]

SUMMARY_COLUMNS = ["schema_id", "code_id", "mode", "crossover", "trials", "plain_failures",
                   "coset_failures", "coverage", "mean_iters", "seed"]
TRIAL_COLUMNS = ["trial", "crossover", "error_weight", "high_density_errors", "converged",
                 "plain_success", "coset_success", "iterations", "osd_used"]

# coverage (%) in C2^perp/C1^perp for the 712-bit-key code, keyed by crossover
REFERENCE_COVERAGE_PCT: Dict[float, float] = {
    0.08: 85.8, 0.0775: 82.4, 0.075: 75.8, 0.0725: 67.5, 0.07: 61.1, 0.0675: 52.4,
}

# spawn-key labels of the per-trial random streams
STREAM_WORD, STREAM_ERRORS, STREAM_MATRICES = 0, 1, 2


class ConfigError(ValueError):
    """Invalid sweep configuration."""


class MissingSweepData(FileNotFoundError):
    """A report needs sweep results that have not been produced."""


class SweepConfig(BaseModel):
    code_id: str
    mode: Mode = "C1-coset"
    decoder: DecoderConfig = DecoderConfig()
    crossovers: List[float]
    trials: int = Field(MIN_DESK_TRIALS, ge=1)
    seed: int = 0
    column_order: str = H1_COLUMN_ORDER
    output_dir: Path = RESULTS_DIR
    per_trial: bool = False

    @model_validator(mode="before")
    @classmethod
    def _genie_decoder_default(cls, data: Any) -> Any:
        # C2perp pipelines default to the approximative decoder
        if isinstance(data, dict) and str(data.get("mode", "")).startswith("C2perp"):
            decoder = data.get("decoder")
            if decoder is None:
                data = {**data, "decoder": {"flavor": "approximative"}}
            elif isinstance(decoder, dict) and "flavor" not in decoder:
                data = {**data, "decoder": {**decoder, "flavor": "approximative"}}
        return data

    @field_validator("crossovers")
    @classmethod
    def _crossovers(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("at least one crossover probability is needed")
        for v in values:
            if not 0.0 <= v < 0.5:
                raise ValueError(f"crossover {v} outside [0, 0.5)")
        return values

    @field_validator("column_order")
    @classmethod
    def _column_order(cls, value: str) -> str:
        if value not in H1_COLUMN_ORDER_CHOICES:
            raise ValueError(f"column_order must be one of {H1_COLUMN_ORDER_CHOICES}")
        return value

    @model_validator(mode="after")
    def _decoder_fits_mode(self) -> "SweepConfig":
        c2perp = self.mode.startswith("C2perp")
        genie = self.decoder.flavor in ("approximative", "generalized")
        if c2perp != genie:
            raise ValueError(f"mode {self.mode} cannot use decoder {self.decoder.flavor}")
        return self

    @property
    def pipeline(self) -> str:
        return self.mode.split("-")[0]

    def results_path(self, mode: Optional[str] = None, suffix: str = "") -> Path:
        return self.output_dir / f"{self.code_id}_{mode or self.mode}{suffix}.csv"


class TrialRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    trial: int
    crossover: float
    error_weight: int
    high_density_errors: int
    converged: bool
    plain_success: bool
    coset_success: bool
    iterations: int
    osd_used: bool = False

    @model_validator(mode="after")
    def _success_order(self) -> "TrialRecord":
        if self.coset_success and not self.converged:
            raise ValueError("coset success requires convergence")
        if self.plain_success and not self.coset_success:
            raise ValueError("plain success implies coset success")
        return self


class SweepResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    summary: pd.DataFrame
    trials: Optional[pd.DataFrame] = None
    paths: List[Path] = []


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def sweep_config_from_sections(sections: Dict[str, Dict[str, str]]) -> SweepConfig:
    """Map ``[sweep]``, ``[decoder]`` and ``[output]`` sections onto SweepConfig."""
    if "sweep" not in sections:
        raise ConfigError("config needs a [sweep] section")
    sweep = dict(sections["sweep"])
    try:
        fields: Dict[str, Any] = {
            "code_id": sweep.pop("code_id"),
            "crossovers": [float(v) for v in sweep.pop("crossovers").replace(",", " ").split()],
        }
    except KeyError as e:
        raise ConfigError(f"[sweep] is missing {e.args[0]}") from None
    except ValueError as e:
        raise ConfigError(f"[sweep] crossovers: {e}") from None
    for key in ("mode", "trials", "seed", "column_order"):
        if key in sweep:
            fields[key] = sweep.pop(key)
    if sweep:
        raise ConfigError(f"unknown [sweep] keys: {', '.join(sorted(sweep))}")

    if "decoder" in sections:
        fields["decoder"] = dict(sections["decoder"])
    output = dict(sections.get("output", {}))
    if "dir" in output:
        fields["output_dir"] = Path(output.pop("dir"))
    if "per_trial" in output:
        try:
            fields["per_trial"] = _parse_bool(output.pop("per_trial"))
        except ValueError as e:
            raise ConfigError(f"[output] per_trial: {e}") from None
    if output:
        raise ConfigError(f"unknown [output] keys: {', '.join(sorted(output))}")

    try:
        return SweepConfig(**fields)
    except ValidationError as e:
        raise ConfigError(f"invalid sweep config: {e.errors()[0]['msg']} at {e.errors()[0]['loc']}") from None


def clopper_pearson(failures: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    ci = binomtest(failures, trials).proportion_ci(confidence_level=confidence, method="exact")
    return float(ci.low), float(ci.high)


class _SweepContext:
    """Everything a trial needs, built once per sweep and shared read-only."""

    def __init__(self, cfg: SweepConfig, pair: CssPair):
        self.cfg = cfg
        self.pair = pair
        if cfg.pipeline == "C1":
            self.h = pair.h1
            self.decode = make_decoder(pair.h1, cfg.decoder)
            self.generalized: Optional[GeneralizedDecoder] = None
        else:
            self.h = pair.h2
            self.decode = None
            self.generalized = None
            if cfg.decoder.flavor == "generalized":
                rng = derive_rng(cfg.seed, STREAM_MATRICES)
                family = equivalent_matrices(pair.h2, cfg.decoder.equivalent_matrices, rng)
                self.generalized = GeneralizedDecoder(family, cfg.decoder.cycle_passes)


class ExperimentService:
    def __init__(self, catalog: Optional[CatalogService] = None, file_handler: Optional[FileHandler] = None,
                 batch_size: int = TRIAL_BATCH_SIZE):
        add_file_sink("experiment_service")
        self.catalog = catalog or CatalogService()
        self.file_handler = file_handler or FileHandler()
        self.batch_size = batch_size

    def _transmit(self, ctx: _SweepContext, rng: np.random.Generator) -> np.ndarray:
        if ctx.cfg.pipeline == "C1":
            return random_codeword(ctx.pair, rng)
        g = ctx.pair.g2perp
        return gf2_product(rng.integers(0, 2, g.rows, dtype=np.uint8)[None, :], g.bits)[0]

    def run_trial(self, ctx: _SweepContext, point: int, trial: int, epsilon: float) -> TrialRecord:
        cfg = ctx.cfg
        word = self._transmit(ctx, derive_rng(cfg.seed, point, trial, STREAM_WORD))
        errors = sample_bsc_errors(word.size, epsilon, derive_rng(cfg.seed, point, trial, STREAM_ERRORS))
        obs = bsc_observation(word ^ errors, epsilon)
        positions = np.flatnonzero(errors)

        if cfg.pipeline == "C1":
            result: DecodeResult = ctx.decode(obs)
            quotient = "C1/C2"
        elif ctx.generalized is not None:
            result = ctx.generalized.decode(obs, cfg.decoder.max_iter)
            quotient = "C2perp/C1perp"
        else:
            result = approximative_decode(ctx.pair, positions, obs, cfg.decoder.max_iter,
                                          cycle_passes=cfg.decoder.cycle_passes)
            quotient = "C2perp/C1perp"

        converged = result.converged and result.word is not None and ctx.h.is_codeword(result.word)
        plain = converged and bool(np.array_equal(result.word, word))
        coset = plain or (converged and coset_equal(ctx.pair, word, result.word, quotient))
        _, high = error_density_split(ctx.h, errors)
        return TrialRecord(
            trial=trial,
            crossover=epsilon,
            error_weight=int(positions.size),
            high_density_errors=high,
            converged=converged,
            plain_success=plain,
            coset_success=coset,
            iterations=result.iterations_used,
            osd_used=result.osd_used,
        )

    async def _run_point(self, ctx: _SweepContext, point: int, epsilon: float) -> List[TrialRecord]:
        records: List[TrialRecord] = []
        trials = ctx.cfg.trials
        for i in range(0, trials, self.batch_size):
            batch = range(i, min(trials, i + self.batch_size))
            tasks = [asyncio.to_thread(self.run_trial, ctx, point, t, epsilon) for t in batch]
            records.extend(await asyncio.gather(*tasks))
        return sorted(records, key=lambda r: r.trial)

    @staticmethod
    def summarize(cfg: SweepConfig, epsilon: float, records: List[TrialRecord]) -> Dict[str, Any]:
        total = len(records)
        plain = sum(r.plain_success for r in records)
        coset = sum(r.coset_success for r in records)
        converged = sum(r.converged for r in records)
        wrong = converged - plain
        return {
            "schema_id": CSV_SCHEMA_ID,
            "code_id": cfg.code_id,
            "mode": cfg.mode,
            "crossover": epsilon,
            "trials": total,
            "plain_failures": total - plain,
            "coset_failures": total - coset,
            "coverage": (coset - plain) / wrong if wrong else float("nan"),
            "mean_iters": float(np.mean([r.iterations for r in records])) if records else float("nan"),
            "seed": cfg.seed,
        }

    async def run_sweep(self, cfg: SweepConfig, write: bool = True) -> SweepResult:
        """Monte-Carlo BLER per crossover; one summary row per point, optional per-trial rows."""
        pair = self.catalog.build_pair(cfg.code_id, cfg.column_order)
        ctx = _SweepContext(cfg, pair)
        logger.info(f"sweep {cfg.code_id} {cfg.mode}: {len(cfg.crossovers)} points x {cfg.trials} trials")

        summary_rows: List[Dict[str, Any]] = []
        trial_rows: List[Dict[str, Any]] = []
        for point, epsilon in enumerate(tqdm(cfg.crossovers, desc=f"{cfg.code_id} {cfg.mode}", disable=None)):
            records = await self._run_point(ctx, point, epsilon)
            row = self.summarize(cfg, epsilon, records)
            summary_rows.append(row)
            logger.info(f"ε={epsilon}: plain failures {row['plain_failures']}/{row['trials']}, "
                        f"coset failures {row['coset_failures']}/{row['trials']}")
            if cfg.per_trial:
                trial_rows.extend(r.model_dump() for r in records)

        summary = pd.DataFrame(summary_rows, columns=SUMMARY_COLUMNS)
        trials = pd.DataFrame(trial_rows, columns=TRIAL_COLUMNS) if cfg.per_trial else None
        paths: List[Path] = []
        if write:
            paths.append(await self.file_handler.save_results(summary, cfg.results_path(), SUMMARY_COLUMNS))
            if trials is not None:
                paths.append(await self.file_handler.save_results(trials, cfg.results_path(suffix="_trials"),
                                                                  TRIAL_COLUMNS))
        return SweepResult(summary=summary, trials=trials, paths=paths)

    async def _load(self, cfg: SweepConfig, mode: str) -> pd.DataFrame:
        path = cfg.results_path(mode)
        if not path.exists():
            raise MissingSweepData(f"run a {mode} sweep for {cfg.code_id} first (expected {path})")
        return await self.file_handler.read_results(path)

    async def report_eve(self, cfg: SweepConfig, key_len: int) -> pd.DataFrame:
        """Eve bound per crossover with δ = the worse coset BLER of C1 and C2^perp."""
        c1 = await self._load(cfg, "C1-coset")
        c2 = await self._load(cfg, "C2perp-coset")
        merged = c1.merge(c2, on="crossover", suffixes=("_c1", "_c2"))
        if merged.empty:
            raise MissingSweepData(f"no common crossover points between the C1 and C2perp sweeps of {cfg.code_id}")

        rows = []
        for _, r in merged.sort_values("crossover").iterrows():
            candidates = [(int(r["coset_failures_c1"]), int(r["trials_c1"])),
                          (int(r["coset_failures_c2"]), int(r["trials_c2"]))]
            failures, trials = max(candidates, key=lambda c: (c[0] / c[1], -c[1]))
            delta = failures / trials
            low, high = clopper_pearson(failures, trials)
            note = ""
            if failures == 0:
                high = min(3.0 / trials, 1.0 - 1e-12)
                note = f"no failures: < bound at δ = 3/{trials} (rule of three)"
            elif failures == trials:
                note = "saturated: all trials failed"
            row = {
                "crossover": float(r["crossover"]),
                "delta": delta,
                "delta_low": low,
                "delta_high": high,
                "bound": _bound_or_nan(delta, key_len),
                "bound_low": _bound_or_nan(low, key_len),
                "bound_high": _bound_or_nan(high, key_len),
                "reference_bound": float("nan"),
                "reference_delta": float("nan"),
                "diverges": False,
                "note": note,
            }
            reference = _lookup(REFERENCE_EVE_BOUNDS, row["crossover"])
            if reference is not None and key_len == 712:
                row["reference_bound"] = reference
                row["reference_delta"] = implied_delta(reference, key_len)
                upper = math.inf if math.isnan(row["bound_high"]) else row["bound_high"]
                row["diverges"] = not row["bound_low"] <= reference <= upper
                if row["diverges"]:
                    logger.warning(f"ε={row['crossover']}: measured bound {row['bound']:.4g} "
                                   f"vs reference {reference} (δ would be {row['reference_delta']:.3g})")
            rows.append(row)
        return pd.DataFrame(rows)

    async def coverage_table(self, cfg: SweepConfig) -> pd.DataFrame:
        """Measured coverage in C2^perp/C1^perp next to the reference table."""
        data = await self._load(cfg, cfg.mode if cfg.pipeline == "C2perp" else "C2perp-coset")
        rows = []
        for _, r in data.sort_values("crossover", ascending=False).iterrows():
            reference = _lookup(REFERENCE_COVERAGE_PCT, float(r["crossover"]))
            coverage = r["coverage"]
            rows.append({
                "crossover_pct": round(100 * float(r["crossover"]), 4),
                "coverage_pct": float("nan") if pd.isna(coverage) else 100 * float(coverage),
                "reference_pct": float("nan") if reference is None else reference,
                "trials": int(r["trials"]),
            })
        return pd.DataFrame(rows, columns=["crossover_pct", "coverage_pct", "reference_pct", "trials"])


def _bound_or_nan(delta: float, key_len: int) -> float:
    # the bound is only defined for δ < 1
    return float("nan") if delta >= 1.0 else eve_bound(EveBoundInput(delta=delta, k=key_len))


def _lookup(table: Dict[float, float], crossover: float, tol: float = 1e-9) -> Optional[float]:
    for key, value in table.items():
        if abs(key - crossover) < tol:
            return value
    return None


async def load_sweep_config(path: Path, file_handler: Optional[FileHandler] = None) -> SweepConfig:
    handler = file_handler or FileHandler()
    try:
        sections = await handler.read_config(path)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except Exception as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return sweep_config_from_sections(sections)
