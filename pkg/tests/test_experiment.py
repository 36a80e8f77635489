import math
from pathlib import Path

import pandas as pd
import pytest

from app.config import CONFIGS_DIR
from app.services.catalog_service import CatalogService
from app.services.experiment_service import (
    REFERENCE_COVERAGE_PCT,
    SUMMARY_COLUMNS,
    TRIAL_COLUMNS,
    ConfigError,
    ExperimentService,
    MissingSweepData,
    SweepConfig,
    TrialRecord,
    clopper_pearson,
    load_sweep_config,
    sweep_config_from_sections,
)
from app.utils.file_handler import FileHandler
from tests import TEST_DATA_DIR


@pytest.fixture(scope="module")
def service():
    return ExperimentService(batch_size=16)


def toy_config(tmp_path, **overrides) -> SweepConfig:
    fields = {"code_id": "toy-5-2-3", "crossovers": [0.0, 0.05], "trials": 24, "seed": 7, "output_dir": tmp_path}
    fields.update(overrides)
    return SweepConfig(**fields)


class TestSweepConfig:
    def test_sections(self, tmp_path):
        cfg = sweep_config_from_sections({
            "sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01, 0.02 0.03", "mode": "C1-plain", "trials": "50"},
            "decoder": {"flavor": "sum-product", "max_iter": "40"},
            "output": {"dir": str(tmp_path), "per_trial": "yes"},
        })
        assert cfg.crossovers == [0.01, 0.02, 0.03]
        assert cfg.trials == 50
        assert cfg.decoder.flavor == "sum-product" and cfg.decoder.max_iter == 40
        assert cfg.per_trial
        assert cfg.results_path() == tmp_path / "toy-5-2-3_C1-plain.csv"
        assert cfg.results_path("C2perp-coset", "_trials").name == "toy-5-2-3_C2perp-coset_trials.csv"

    def test_c2perp_defaults_to_approximative(self):
        cfg = SweepConfig(code_id="toy-5-2-3", crossovers=[0.01], mode="C2perp-coset")
        assert cfg.decoder.flavor == "approximative"
        assert cfg.pipeline == "C2perp"
        cfg = SweepConfig(code_id="toy-5-2-3", crossovers=[0.01], mode="C2perp-plain", decoder={"max_iter": 10})
        assert cfg.decoder.flavor == "approximative" and cfg.decoder.max_iter == 10

    @pytest.mark.parametrize("sections", [
        {},
        {"sweep": {"crossovers": "0.01"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01 abc"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.6"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": ""}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01", "colour": "red"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01", "mode": "C3-plain"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01", "trials": "0"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01", "column_order": "random"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01", "mode": "C2perp-coset"},
         "decoder": {"flavor": "sum-product"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01"}, "decoder": {"flavor": "generalized"}},
        {"sweep": {"code_id": "toy-5-2-3", "crossovers": "0.01"}, "output": {"per_trial": "maybe"}},
    ])
    def test_invalid(self, sections):
        with pytest.raises(ConfigError):
            sweep_config_from_sections(sections)

    async def test_load_from_file(self):
        cfg = await load_sweep_config(Path(TEST_DATA_DIR) / "toy_sweep.ini")
        assert cfg.code_id == "toy-5-2-3"
        assert cfg.mode == "C1-coset"

    async def test_shipped_configs(self):
        paths = sorted(CONFIGS_DIR.glob("*.ini"))
        assert len(paths) == 13
        catalog = CatalogService()
        configs = {p.stem: await load_sweep_config(p) for p in paths}
        for cfg in configs.values():
            catalog.entry(cfg.code_id)
            assert cfg.pipeline != "C2perp" or cfg.decoder.max_iter in (256, 512)
        assert {configs[f"masked_{c}"].decoder.max_iter for c in ("A-0.82", "A-3-4", "A-2-3", "A-0.55")} == {100}
        assert configs["near_regular_combined_modified"].decoder.flavor == "combined-modified"
        assert configs["near_regular_combined_modified"].decoder.osd_order == 2
        assert configs["B-0.55_C1"].decoder.max_iter == 200
        assert configs["B-0.55_C2perp"].decoder.max_iter == 512
        # the coverage report reads the C2perp sweep's CSV
        assert configs["B-0.55_coverage"].results_path() == configs["B-0.55_C2perp"].results_path()
        assert configs["B-0.55_C1"].output_dir == configs["B-0.55_C2perp"].output_dir

    async def test_inline_comments(self, tmp_path):
        path = tmp_path / "commented.ini"
        path.write_text("[sweep]\ncode_id = toy-5-2-3   ; toy code\ncrossovers = 0.01 0.02\n"
                        "mode = C2perp-coset  ; genie decoder by default\n")
        cfg = await load_sweep_config(path)
        assert cfg.mode == "C2perp-coset"
        assert cfg.decoder.flavor == "approximative"

    async def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            await load_sweep_config(tmp_path / "absent.ini")

    def test_trial_record_ordering(self):
        with pytest.raises(ValueError):
            TrialRecord(trial=0, crossover=0.1, error_weight=1, high_density_errors=0, converged=False,
                        plain_success=False, coset_success=True, iterations=3)


class TestSweeps:
    async def test_noiseless_point_never_fails(self, service, tmp_path):
        result = await service.run_sweep(toy_config(tmp_path, crossovers=[0.0]))
        row = result.summary.iloc[0]
        assert row["plain_failures"] == 0 and row["coset_failures"] == 0
        assert row["mean_iters"] == 0
        assert math.isnan(row["coverage"])
        assert list(result.summary.columns) == SUMMARY_COLUMNS

    async def test_reproducible_csv(self, service, tmp_path):
        first = await service.run_sweep(toy_config(tmp_path / "a", per_trial=True))
        second = await service.run_sweep(toy_config(tmp_path / "b", per_trial=True))
        assert [p.name for p in first.paths] == ["toy-5-2-3_C1-coset.csv", "toy-5-2-3_C1-coset_trials.csv"]
        for a, b in zip(first.paths, second.paths):
            assert a.read_bytes() == b.read_bytes()
        assert list(first.trials.columns) == TRIAL_COLUMNS
        assert len(first.trials) == 2 * 24

    async def test_coset_failures_never_exceed_plain(self, service, tmp_path):
        cfg = toy_config(tmp_path, crossovers=[0.05, 0.1, 0.2], trials=40,
                         decoder={"flavor": "combined-original", "osd_order": 1})
        summary = (await service.run_sweep(cfg, write=False)).summary
        assert (summary["coset_failures"] <= summary["plain_failures"]).all()
        assert summary["crossover"].tolist() == [0.05, 0.1, 0.2]

    async def test_bler_grows_with_crossover(self, service, tmp_path):
        cfg = toy_config(tmp_path, mode="C1-plain", crossovers=[0.05, 0.1], trials=200, seed=17)
        summary = (await service.run_sweep(cfg, write=False)).summary
        half, full = summary.iloc[0], summary.iloc[1]
        assert full["plain_failures"] >= half["plain_failures"]
        assert full["coset_failures"] >= half["coset_failures"]

    async def test_c2perp_sweep(self, service, tmp_path):
        cfg = toy_config(tmp_path, mode="C2perp-coset", crossovers=[0.0, 0.05])
        summary = (await service.run_sweep(cfg)).summary
        assert summary.iloc[0]["coset_failures"] == 0
        assert (summary["coset_failures"] <= summary["plain_failures"]).all()
        assert cfg.results_path().exists()

    async def test_generalized_sweep(self, service, tmp_path):
        cfg = toy_config(tmp_path, mode="C2perp-plain", crossovers=[0.0],
                         decoder={"flavor": "generalized", "equivalent_matrices": 3})
        summary = (await service.run_sweep(cfg, write=False)).summary
        assert summary.iloc[0]["plain_failures"] == 0

    async def test_unknown_code(self, service, tmp_path):
        from app.services.catalog_service import CatalogError
        with pytest.raises(CatalogError):
            await service.run_sweep(toy_config(tmp_path, code_id="toy-9-9-9"))

    @pytest.mark.slow
    async def test_modified_beats_original_on_near_regular_pair(self, service, tmp_path):
        results = {}
        for flavor in ("combined-original", "combined-modified"):
            cfg = SweepConfig(code_id="nr-3-15-480", crossovers=[0.035, 0.045], trials=2000, seed=3,
                              output_dir=tmp_path, decoder={"flavor": flavor, "osd_order": 2})
            results[flavor] = (await service.run_sweep(cfg, write=False)).summary
        for original, modified in zip(results["combined-original"].itertuples(),
                                      results["combined-modified"].itertuples()):
            # both flavors see the same error patterns for a given seed
            assert modified.coset_failures <= original.coset_failures
            _, high_original = clopper_pearson(original.coset_failures, original.trials)
            _, high_modified = clopper_pearson(modified.coset_failures, modified.trials)
            assert high_modified <= high_original


class TestReports:
    async def _write(self, path, rows):
        await FileHandler().save_results(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), path, SUMMARY_COLUMNS)

    def _row(self, mode, crossover, trials, coset_failures, coverage=float("nan")):
        return {"schema_id": "x", "code_id": "toy-5-2-3", "mode": mode, "crossover": crossover, "trials": trials,
                "plain_failures": coset_failures, "coset_failures": coset_failures, "coverage": coverage,
                "mean_iters": 1.0, "seed": 0}

    async def test_eve_needs_both_sweeps(self, service, tmp_path):
        cfg = toy_config(tmp_path)
        with pytest.raises(MissingSweepData):
            await service.report_eve(cfg, 5)
        await self._write(cfg.results_path("C1-coset"), [self._row("C1-coset", 0.05, 100, 3)])
        with pytest.raises(MissingSweepData):
            await service.report_eve(cfg, 5)

    async def test_eve_report(self, service, tmp_path):
        cfg = toy_config(tmp_path)
        await self._write(cfg.results_path("C1-coset"),
                          [self._row("C1-coset", 0.05, 100, 3), self._row("C1-coset", 0.02, 100, 0)])
        await self._write(cfg.results_path("C2perp-coset"),
                          [self._row("C2perp-coset", 0.05, 200, 10), self._row("C2perp-coset", 0.02, 100, 0)])
        report = await service.report_eve(cfg, 5)
        assert report["crossover"].tolist() == [0.02, 0.05]
        zero, worst = report.iloc[0], report.iloc[1]
        assert worst["delta"] == pytest.approx(0.05)
        assert worst["delta_low"] < 0.05 < worst["delta_high"]
        assert worst["bound_low"] < worst["bound"] < worst["bound_high"]
        assert zero["delta"] == 0 and zero["bound"] == 0
        assert zero["delta_high"] == pytest.approx(0.03)
        assert "rule of three" in zero["note"]

    async def test_eve_report_all_trials_failed(self, service, tmp_path):
        cfg = toy_config(tmp_path)
        await self._write(cfg.results_path("C1-coset"), [self._row("C1-coset", 0.08, 50, 50)])
        await self._write(cfg.results_path("C2perp-coset"), [self._row("C2perp-coset", 0.08, 50, 10)])
        row = (await service.report_eve(cfg, 712)).iloc[0]
        assert row["delta"] == 1.0 and row["delta_high"] == 1.0
        assert math.isnan(row["bound"]) and math.isnan(row["bound_high"])
        assert 0.9 < row["delta_low"] < 1.0
        assert math.isfinite(row["bound_low"])
        assert row["note"] == "saturated: all trials failed"

    async def test_coverage_table(self, service, tmp_path):
        cfg = toy_config(tmp_path, mode="C2perp-coset")
        await self._write(cfg.results_path(), [
            self._row("C2perp-coset", 0.07, 1000, 40, coverage=0.6),
            self._row("C2perp-coset", 0.01, 1000, 0),
        ])
        table = await service.coverage_table(cfg)
        assert table["crossover_pct"].tolist() == [7.0, 1.0]
        assert table.iloc[0]["coverage_pct"] == pytest.approx(60.0)
        assert table.iloc[0]["reference_pct"] == REFERENCE_COVERAGE_PCT[0.07]
        assert math.isnan(table.iloc[1]["coverage_pct"]) and math.isnan(table.iloc[1]["reference_pct"])

    def test_clopper_pearson(self):
        low, high = clopper_pearson(0, 100)
        assert low == 0.0 and 0.03 < high < 0.04
        low, high = clopper_pearson(50, 100)
        assert low < 0.5 < high
