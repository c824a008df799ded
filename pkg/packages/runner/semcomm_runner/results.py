"""
CSV emission. Rows are sorted (task, channel, snr ascending), floats carry six
decimals, files are UTF-8 with LF endings.
"""

import logging
import math
from pathlib import Path
from typing import List, Sequence

import aiofiles
import pandas as pd
from pydantic import BaseModel

from semcomm_model.metrics import PSNR_CAP_DB

from .training_events import TrainingEvent

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["task", "channel", "snr_db", "metric_name", "value", "seed"]
LOSS_COLUMNS = ["step", "epoch", "task", "loss", "snr_db", "channel"]
FLOAT_FORMAT = "%.6f"


class MetricRow(BaseModel):
    task: str
    channel: str
    snr_db: float
    metric_name: str
    value: float
    seed: int


def _finite(value: float) -> float:
    # +inf only arises from zero-MSE PSNR
    return PSNR_CAP_DB if math.isinf(value) and value > 0 else value


def metrics_frame(rows: Sequence[MetricRow]) -> pd.DataFrame:
    df = pd.DataFrame([r.model_dump() for r in rows], columns=METRIC_COLUMNS)
    if df.empty:
        return df
    df["value"] = df["value"].map(_finite).astype(float)
    df["snr_db"] = df["snr_db"].astype(float)
    return df.sort_values(["task", "channel", "snr_db"], kind="mergesort").reset_index(drop=True)


def loss_frame(events: Sequence[TrainingEvent]) -> pd.DataFrame:
    records = [e.model_dump(include=set(LOSS_COLUMNS)) for e in events if e.event_type == "step"]
    return pd.DataFrame(records, columns=LOSS_COLUMNS)


def render_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


async def async_write_csv(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "w", encoding="utf-8", newline="") as f:
        await f.write(render_csv(df))
    logger.info("wrote %d rows to %s", len(df), path)
    return path


async def async_write_bytes(path: Path, blob: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    async with aiofiles.open(path, "wb") as f:
        await f.write(blob)
    return path


async def async_read_bytes(path: Path) -> bytes:
    async with aiofiles.open(path, "rb") as f:
        return await f.read()


async def emit_results(rows: Sequence[MetricRow], path: Path) -> Path:
    return await async_write_csv(metrics_frame(rows), path)


def summary_lines(rows: Sequence[MetricRow]) -> List[str]:
    df = metrics_frame(rows)
    return [
        f"{r.task:<16} {r.channel:<9} {r.snr_db:>6.1f} dB  {r.metric_name:<14} {r.value:.4f}"
        for r in df.itertuples(index=False)
    ]
