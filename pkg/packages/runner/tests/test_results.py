"""Tests for CSV emission"""

import math

import pytest

from semcomm_runner.results import (
    METRIC_COLUMNS,
    MetricRow,
    async_read_bytes,
    async_write_bytes,
    emit_results,
    loss_frame,
    metrics_frame,
    render_csv,
    summary_lines,
)
from semcomm_runner.training_events import TrainingEvent


def _row(task="img", channel="AWGN", snr=0.0, value=0.5, metric="accuracy"):
    return MetricRow(task=task, channel=channel, snr_db=snr, metric_name=metric, value=value, seed=0)


class TestMetricsCsv:
    """Test suite for the metrics table"""

    def test_header_only_when_empty(self):
        """Test an empty sweep renders just the header"""
        assert render_csv(metrics_frame([])) == ",".join(METRIC_COLUMNS) + "\n"

    def test_sorted_by_task_channel_snr(self):
        """Test rows sort by task, channel, then ascending SNR"""
        rows = [_row("b", snr=6.0), _row("a", "Rayleigh", 0.0), _row("a", "AWGN", 6.0), _row("a", "AWGN", -6.0)]

        df = metrics_frame(rows)

        assert list(zip(df["task"], df["channel"], df["snr_db"])) == [
            ("a", "AWGN", -6.0),
            ("a", "AWGN", 6.0),
            ("a", "Rayleigh", 0.0),
            ("b", "AWGN", 6.0),
        ]

    def test_six_decimals_and_lf(self):
        """Test floats carry six decimals and lines end with LF only"""
        text = render_csv(metrics_frame([_row(value=2 / 3)]))

        assert text.splitlines()[1] == "img,AWGN,0.000000,accuracy,0.666667,0"
        assert "\r" not in text

    def test_infinite_psnr_capped(self):
        """Test +inf PSNR is written as the 100 dB cap"""
        text = render_csv(metrics_frame([_row(metric="psnr", value=math.inf)]))

        assert ",psnr,100.000000," in text

    def test_summary_lines(self):
        """Test one readable line per row"""
        lines = summary_lines([_row(value=0.25)])

        assert len(lines) == 1
        assert "accuracy" in lines[0] and "0.2500" in lines[0]


class TestLossCsv:
    """Test suite for the loss log"""

    def test_step_events_only(self):
        """Test bookkeeping events are left out"""
        events = [
            TrainingEvent(step=0, epoch=0, task="a", loss=1.5, snr_db=3.0, channel="AWGN"),
            TrainingEvent(event_type="epoch_end", step=1, epoch=0),
        ]

        df = loss_frame(events)

        assert len(df) == 1
        assert df.iloc[0]["loss"] == 1.5


class TestAsyncIO:
    """Test suite for async file helpers"""

    @pytest.mark.asyncio
    async def test_emit_is_byte_identical(self, tmp_path):
        """Test emitting the same rows twice produces identical files"""
        rows = [_row("b", value=0.1), _row("a", value=0.9)]

        first = await emit_results(rows, tmp_path / "one" / "metrics.csv")
        second = await emit_results(list(reversed(rows)), tmp_path / "two" / "metrics.csv")

        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.asyncio
    async def test_bytes_round_trip(self, tmp_path):
        """Test raw blobs read back unchanged"""
        path = await async_write_bytes(tmp_path / "nested" / "blob.bin", b"\x00\x01semcomm")

        assert await async_read_bytes(path) == b"\x00\x01semcomm"
