import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, model_validator

from app.config import CATALOG_FILE, H1_COLUMN_ORDER, MASKS_DIR
from app.coding.construct import (
    EfficientEncoder,
    Encoder,
    LdpcCode,
    SystematicEncoder,
    apply_mask,
    build_base,
    load_mask,
    mask_path,
    near_regular_ldpc,
)
from app.coding.css import CssPair, build_css, css_rate, verify_css
from app.coding.gf2 import BinMatrix
from app.utils.log_sinks import add_file_sink

Family = Literal["appendix", "mini", "toy", "near-regular"]


class CatalogError(ValueError):
    """Unknown code id or a malformed catalog."""


class CatalogEntry(BaseModel):
    code_id: str
    family: Family
    p: Optional[int] = None
    j: Optional[int] = None
    k: Optional[int] = None
    mask_id: Optional[str] = None
    mask_sha256: Optional[str] = None
    n: Optional[int] = None
    col_weight: Optional[int] = None
    row_weight: Optional[int] = None
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _complete(self) -> "CatalogEntry":
        if self.structured:
            if None in (self.p, self.j, self.k):
                raise ValueError(f"{self.code_id}: structured codes need p, j and k")
        elif None in (self.n, self.col_weight, self.row_weight, self.seed):
            raise ValueError(f"{self.code_id}: near-regular codes need n, col_weight, row_weight and seed")
        return self

    @property
    def structured(self) -> bool:
        return self.family != "near-regular"

    @property
    def expected_shape(self) -> Tuple[int, int]:
        if self.structured:
            return self.p * self.j, self.p * (self.j + self.k)
        return round(self.n * self.col_weight / self.row_weight), self.n


class CatalogCode:
    """A catalog code with its parity-check matrix and a systematic encoder."""

    def __init__(self, entry: CatalogEntry, h: BinMatrix, encoder: Encoder, ldpc: Optional[LdpcCode] = None):
        self.entry = entry
        self.h = h
        self.encoder = encoder
        self.ldpc = ldpc

    @property
    def rate(self) -> Fraction:
        return Fraction(self.h.cols - self.h.rows, self.h.cols)


class CatalogReport(BaseModel):
    rows: List[Dict] = []
    failures: List[str] = []

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def table(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class CatalogService:
    def __init__(self, catalog_file: Path = CATALOG_FILE, masks_dir: Path = MASKS_DIR):
        add_file_sink("catalog_service")
        self.catalog_file = Path(catalog_file)
        self.masks_dir = Path(masks_dir)
        raw = json.loads(self.catalog_file.read_text())
        try:
            entries = [CatalogEntry(**item) for item in raw["codes"]]
        except (KeyError, TypeError, ValueError) as e:
            raise CatalogError(f"malformed catalog {self.catalog_file}: {e}") from e
        self.entries: Dict[str, CatalogEntry] = {e.code_id: e for e in entries}
        self._codes: Dict[str, CatalogCode] = {}
        self._pairs: Dict[Tuple[str, str], CssPair] = {}

    def entry(self, code_id: str) -> CatalogEntry:
        try:
            return self.entries[code_id]
        except KeyError:
            raise CatalogError(f"unknown code {code_id!r}; known: {', '.join(self.entries)}") from None

    def code_ids(self, families: Optional[Sequence[str]] = None) -> List[str]:
        return [cid for cid, e in self.entries.items() if families is None or e.family in families]

    def mask_checksum_ok(self, entry: CatalogEntry) -> bool:
        if entry.mask_id is None or entry.mask_sha256 is None:
            return True
        return file_sha256(mask_path(entry.mask_id, self.masks_dir)) == entry.mask_sha256

    def build_code(self, code_id: str) -> CatalogCode:
        if code_id in self._codes:
            return self._codes[code_id]
        entry = self.entry(code_id)
        if entry.structured:
            ldpc = build_base(entry.p, entry.j, entry.k)
            if entry.mask_id is not None:
                ldpc = apply_mask(ldpc, load_mask(entry.mask_id, self.masks_dir))
            code = CatalogCode(entry, ldpc.h, EfficientEncoder(ldpc), ldpc)
        else:
            h = near_regular_ldpc(entry.n, entry.col_weight, entry.row_weight, entry.seed, require_full_rank=True)
            code = CatalogCode(entry, h, SystematicEncoder(h))
        logger.info(f"built {code_id}: {code.h.rows}x{code.h.cols}, rate {code.rate}")
        self._codes[code_id] = code
        return code

    def build_pair(self, code_id: str, column_order: str = H1_COLUMN_ORDER) -> CssPair:
        key = (code_id, column_order)
        if key not in self._pairs:
            code = self.build_code(code_id)
            self._pairs[key] = build_css(code.h, code.encoder, column_order)
        return self._pairs[key]

    def verify_catalog(self, code_ids: Optional[Sequence[str]] = None, include_css: bool = True,
                       column_order: str = H1_COLUMN_ORDER) -> CatalogReport:
        """Shape, rate and mask checksum of each code; with ``include_css`` also the CSS identity."""
        report = CatalogReport()
        for code_id in code_ids or list(self.entries):
            entry = self.entry(code_id)
            row: Dict = {"code_id": code_id, "family": entry.family}
            if not self.mask_checksum_ok(entry):
                report.failures.append(f"{code_id}: mask {entry.mask_id} checksum mismatch")
                row["status"] = "checksum"
                report.rows.append(row)
                continue

            code = self.build_code(code_id)
            m, n = code.h.shape
            row.update(rows=m, cols=n, rate=f"{n - m}/{n}")
            if (m, n) != entry.expected_shape:
                report.failures.append(f"{code_id}: shape {m}x{n}, expected {entry.expected_shape}")

            if include_css:
                pair = self.build_pair(code_id, column_order)
                css = verify_css(pair)
                row.update(rank_h2=css.rank_h2, css_rate=str(css_rate(pair)))
                if not css.passed:
                    report.failures.append(f"{code_id}: h1·h2ᵀ != 0 on h2 rows {css.offending_rows[:10]}")
                full = not pair.deficient
                if full and css_rate(pair) != 2 * code.rate - 1:
                    report.failures.append(f"{code_id}: css rate {css_rate(pair)} != 2r-1")
            row["status"] = "ok" if not any(f.startswith(f"{code_id}:") for f in report.failures) else "fail"
            report.rows.append(row)

        if report.failures:
            for failure in report.failures:
                logger.warning(failure)
        else:
            logger.info(f"catalog verified: {len(report.rows)} codes")
        return report

    def verify_pair(self, pair: CssPair) -> List[str]:
        """Failures of an externally modified pair (e.g. after loading h2 from disk)."""
        css = verify_css(pair)
        if css.passed:
            return []
        return [f"h1·h2ᵀ != 0 on h2 rows {css.offending_rows[:10]}"]


def column_weight_profile(h: BinMatrix) -> Dict[int, int]:
    weights, counts = np.unique(h.col_weights, return_counts=True)
    return {int(w): int(c) for w, c in zip(weights, counts)}
