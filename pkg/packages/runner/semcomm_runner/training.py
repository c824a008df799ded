"""
Joint multi-task training with one Adam optimizer per task.

Each step picks a task uniformly among those with batches left in the current
epoch, runs that task's pipeline on one batch through a training channel,
backpropagates and updates with that task's optimizer only. When every pool is
exhausted the epoch ends and all pools refill.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field, field_validator

from semcomm_common.base_model import BaseModel
from semcomm_common.enums import ChannelKind, Modality, TransmissionMode
from semcomm_common.exceptions import ConfigurationError
from semcomm_model import functional as F
from semcomm_model.config import ChannelConfig, ModelConfig, TaskSpec
from semcomm_model.optim import AdamState, adam_step
from semcomm_model.system import SemanticCommSystem, build_system
from semcomm_model.tasks import compute_loss
from semcomm_model.tensor import Tensor, backward

from .synth_data import Sample, batch
from .training_events import EventStore, TrainingEvent

logger = logging.getLogger(__name__)

DEFAULT_LR = 1e-4
SPEECH_LR = 2e-4


class TrainConfig(BaseModel):
    steps: int = Field(2000, ge=1, description="Total optimizer steps N.")
    batch_size: int = Field(16, ge=1)
    learning_rates: Dict[str, float] = Field(
        default_factory=dict, description="Per-task overrides keyed by task name."
    )
    default_lr: float = DEFAULT_LR
    speech_lr: float = SPEECH_LR
    seed: int = 0
    train_channel: ChannelKind = ChannelKind.AWGN
    train_snr_db: Optional[float] = Field(None, description="Fixed training SNR; None draws uniformly per step.")
    snr_range_db: Tuple[float, float] = (0.0, 18.0)

    @field_validator("learning_rates")
    @classmethod
    def _positive(cls, value: Dict[str, float]) -> Dict[str, float]:
        for name, lr in value.items():
            if lr <= 0:
                raise ValueError(f"learning rate for {name} must be positive")
        return value

    def lr_for(self, spec: TaskSpec) -> float:
        if spec.name in self.learning_rates:
            return self.learning_rates[spec.name]
        if spec.modalities == (Modality.SPEECH,):
            return self.speech_lr
        return self.default_lr


@dataclass
class TrainResult:
    events: EventStore
    optimizers: Dict[str, AdamState]
    steps: int = 0
    epochs: int = 0
    steps_per_epoch: List[int] = field(default_factory=list)

    def losses(self) -> List[float]:
        return [e.loss for e in self.events.list_events(event_type="step") if e.loss is not None]


def batch_loss(
    system: SemanticCommSystem,
    spec: TaskSpec,
    samples: Sequence[Sample],
    channel: ChannelConfig,
    rng: np.random.Generator,
) -> Tensor:
    """Mean task loss over one batch."""
    total: Optional[Tensor] = None
    for sample in samples:
        result = system.forward(spec.id, sample.inputs, channel, rng)
        loss = compute_loss(spec, result.output, sample.label)
        total = loss if total is None else F.add(total, loss)
    assert total is not None
    return F.scale(total, 1.0 / len(samples))


def _refill(pools: Mapping[str, List[List[Sample]]]) -> Dict[str, Deque[List[Sample]]]:
    return {name: deque(batches) for name, batches in pools.items()}


def train(
    system: SemanticCommSystem,
    datasets: Mapping[str, Sequence[Sample]],
    cfg: TrainConfig,
    events: Optional[EventStore] = None,
) -> TrainResult:
    specs = list(system.registry)
    for spec in specs:
        if not datasets.get(spec.name):
            raise ConfigurationError(f"task {spec.name} has no training samples", field=f"datasets.{spec.name}")
    pools = {spec.name: batch(datasets[spec.name], cfg.batch_size) for spec in specs}
    optimizers = {spec.name: AdamState(lr=cfg.lr_for(spec)) for spec in specs}
    events = events if events is not None else EventStore()
    result = TrainResult(events, optimizers)

    task_rng = np.random.default_rng(cfg.seed)
    channel_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
    remaining = _refill(pools)
    epoch, in_epoch = 0, 0

    for step in range(cfg.steps):
        active = [spec for spec in specs if remaining[spec.name]]
        if not active:
            events.add_event(TrainingEvent(event_type="epoch_end", step=step, epoch=epoch))
            result.steps_per_epoch.append(in_epoch)
            epoch, in_epoch = epoch + 1, 0
            remaining = _refill(pools)
            active = specs
        spec = active[int(task_rng.integers(len(active)))]
        samples = remaining[spec.name].popleft()
        snr = cfg.train_snr_db if cfg.train_snr_db is not None else float(task_rng.uniform(*cfg.snr_range_db))
        channel = ChannelConfig(kind=cfg.train_channel, snr_db=snr, seed=cfg.seed)

        loss = batch_loss(system, spec, samples, channel, channel_rng)
        leaves = backward(loss).leaves()
        adam_step(leaves, optimizers[spec.name])
        for p in leaves:
            p.grad = None

        in_epoch += 1
        events.add_event(
            TrainingEvent(
                step=step,
                epoch=epoch,
                task=spec.name,
                loss=loss.item(),
                snr_db=snr,
                channel=cfg.train_channel.value,
            )
        )
        if not remaining[spec.name]:
            events.add_event(TrainingEvent(event_type="task_exhausted", step=step, epoch=epoch, task=spec.name))
        if step % 100 == 0:
            logger.info("step %d epoch %d task %s loss %.4f", step, epoch, spec.name, loss.item())

    result.steps = cfg.steps
    result.epochs = epoch
    return result


def train_independent(
    model: ModelConfig,
    specs: Sequence[TaskSpec],
    datasets: Mapping[str, Sequence[Sample]],
    cfg: TrainConfig,
    mode: TransmissionMode = TransmissionMode.FUSED,
) -> Dict[str, Tuple[SemanticCommSystem, TrainResult]]:
    """Train every task alone on a freshly initialized model of the same architecture."""
    trained = {}
    for spec in specs:
        solo = spec.model_copy(update={"id": 0})
        system = build_system(model, [solo], cfg.seed, mode)
        trained[spec.name] = (system, train(system, {spec.name: datasets[spec.name]}, cfg))
    return trained
