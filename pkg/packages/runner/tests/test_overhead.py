"""Tests for communication-overhead accounting"""

from fractions import Fraction

import pytest

from semcomm_common.enums import DatasetKind, TransmissionMode
from semcomm_common.exceptions import ConfigurationError
from semcomm_model.config import ModelConfig
from semcomm_runner.catalog import task_for
from semcomm_runner.overhead import (
    bytes_per_symbol,
    overhead,
    overhead_frame,
    overhead_from_lengths,
    preset_reports,
)


class TestOverhead:
    """Test suite for bytes per task instance"""

    def test_fused_is_one_row(self):
        """Test a fused image+text task sends one row of d symbols"""
        config = ModelConfig()
        spec = task_for(DatasetKind.MM_XOR, 0, config)

        report = overhead(config, spec, symbol_bits=32)

        assert report.transmitted_rows == 1
        assert report.fused_bytes == config.d * 4
        unfused = config.image.sequence_length + config.text.seq_len + 1
        assert report.unfused_rows == unfused
        assert report.ratio == Fraction(1, unfused)

    def test_concat_sends_everything(self):
        """Test concat mode transmits the unfused row count"""
        config = ModelConfig()
        spec = task_for(DatasetKind.MM_XOR, 0, config)

        report = overhead(config, spec, mode=TransmissionMode.CONCAT)

        assert report.transmitted_rows == report.unfused_rows
        assert report.ratio == 1

    def test_single_modal_has_no_saving(self):
        """Test a single-modal task sends its own rows either way"""
        report = overhead_from_lengths("img", [16], d=32)

        assert report.transmitted_rows == report.unfused_rows == 16
        assert report.fused_bytes == 16 * 32 * 4

    @pytest.mark.parametrize("bits,expected", [(8, 1), (16, 2), (32, 4)])
    def test_symbol_widths(self, bits, expected):
        """Test bytes per symbol follow the symbol bit width"""
        assert bytes_per_symbol(bits) == expected

    def test_unsupported_symbol_width(self):
        """Test other bit widths are configuration errors"""
        with pytest.raises(ConfigurationError):
            bytes_per_symbol(12)

    def test_presets(self):
        """Test the fixed workloads: 128 B fused versus 6400 B and 3968 B unfused"""
        reports = {r.task: r for r in preset_reports(d=32, symbol_bits=32)}

        assert reports["preset_vqa_like"].fused_bytes == 128
        assert reports["preset_vqa_like"].unfused_bytes == 6400
        assert reports["preset_mmimdb_like"].unfused_bytes == 3968
        assert reports["preset_mmimdb_like"].ratio == Fraction(1, 31)

    def test_frame_ratio_column(self):
        """Test the frame renders ratios as exact fractions"""
        df = overhead_frame(preset_reports())

        assert df["ratio"].tolist() == ["1/50", "1/31"]
        assert list(df.columns)[-1] == "ratio"
