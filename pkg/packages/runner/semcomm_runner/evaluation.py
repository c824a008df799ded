"""
SNR sweeps over trained systems.

Every (task, channel kind, SNR) cell runs the full pipeline over the task's
evaluation pool with its own noise stream, derived from the run seed and the
cell coordinates, so cells can run in any order or concurrently and still
reproduce the same table.
"""

import asyncio
import logging
from typing import List, Mapping, Sequence

import numpy as np
from pydantic import Field, field_validator

from semcomm_common.base_model import BaseModel
from semcomm_common.enums import ChannelKind
from semcomm_common.exceptions import ConfigurationError
from semcomm_model.config import ChannelConfig, TaskSpec
from semcomm_model.system import SemanticCommSystem
from semcomm_model.tasks import predict, score
from semcomm_model.tensor import no_grad

from .results import MetricRow
from .synth_data import Sample

logger = logging.getLogger(__name__)

CHANNEL_ORDER = (ChannelKind.AWGN, ChannelKind.RAYLEIGH)


class EvalConfig(BaseModel):
    snr_db: List[float] = Field(default_factory=lambda: [-6.0, 0.0, 6.0, 12.0, 18.0])
    channels: List[ChannelKind] = Field(default_factory=lambda: list(CHANNEL_ORDER))
    seed: int = 0
    equalize: bool = True

    @field_validator("snr_db")
    @classmethod
    def _non_empty(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("the SNR list must not be empty")
        return value


def cell_seed(seed: int, spec: TaskSpec, kind: ChannelKind, snr_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(spec.id, CHANNEL_ORDER.index(kind), snr_index))


def evaluate_cell(
    system: SemanticCommSystem,
    spec: TaskSpec,
    samples: Sequence[Sample],
    channel: ChannelConfig,
    rng: np.random.Generator,
) -> float:
    preds, refs = [], []
    with no_grad():
        for sample in samples:
            result = system.forward(spec.id, sample.inputs, channel, rng)
            preds.append(predict(spec, result.output))
            refs.append(sample.label)
    return score(spec, preds, refs)


def _cells(system: SemanticCommSystem, datasets: Mapping[str, Sequence[Sample]], cfg: EvalConfig):
    for spec in system.registry:
        samples = datasets.get(spec.name)
        if not samples:
            raise ConfigurationError(f"task {spec.name} has no evaluation samples", field=f"datasets.{spec.name}")
        for kind in cfg.channels:
            for i, snr in enumerate(cfg.snr_db):
                channel = ChannelConfig(kind=kind, snr_db=snr, seed=cfg.seed, equalize=cfg.equalize)
                yield spec, samples, channel, cell_seed(cfg.seed, spec, kind, i)


def _row(spec: TaskSpec, channel: ChannelConfig, value: float, seed: int) -> MetricRow:
    return MetricRow(
        task=spec.name,
        channel=channel.kind.value,
        snr_db=channel.snr_db,
        metric_name=spec.metric.value,
        value=value,
        seed=seed,
    )


def evaluate(
    system: SemanticCommSystem, datasets: Mapping[str, Sequence[Sample]], cfg: EvalConfig
) -> List[MetricRow]:
    rows = []
    for spec, samples, channel, seq in _cells(system, datasets, cfg):
        value = evaluate_cell(system, spec, samples, channel, np.random.default_rng(seq))
        logger.info("%s %s %.1f dB: %s = %.4f", spec.name, channel.kind.value, channel.snr_db, spec.metric.value, value)
        rows.append(_row(spec, channel, value, cfg.seed))
    return rows


async def sweep(
    system: SemanticCommSystem, datasets: Mapping[str, Sequence[Sample]], cfg: EvalConfig
) -> List[MetricRow]:
    """Same table as `evaluate`, with cells evaluated concurrently in worker threads."""
    cells = list(_cells(system, datasets, cfg))
    values = await asyncio.gather(
        *(
            asyncio.to_thread(evaluate_cell, system, spec, samples, channel, np.random.default_rng(seq))
            for spec, samples, channel, seq in cells
        )
    )
    return [_row(spec, channel, value, cfg.seed) for (spec, _, channel, _), value in zip(cells, values)]
