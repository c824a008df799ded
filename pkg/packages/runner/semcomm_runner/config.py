"""
Experiment configuration: one JSON document describing the model, the task
registry, one dataset per task and the train/eval settings.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import orjson
from pydantic import Field, ValidationError

from semcomm_common.base_model import BaseModel
from semcomm_common.enums import DatasetKind, TransmissionMode
from semcomm_common.exceptions import ConfigurationError
from semcomm_common.settings import SemCommSettings
from semcomm_model.config import ModelConfig, TaskRegistry, TaskSpec

from .catalog import DEFAULT_KINDS, check_pairing, default_datasets, default_tasks
from .evaluation import EvalConfig
from .synth_data import DatasetSpec
from .training import TrainConfig

logger = logging.getLogger(__name__)


class ExperimentConfig(BaseModel):
    model: ModelConfig = Field(default_factory=ModelConfig)
    tasks: List[TaskSpec] = Field(default_factory=list)
    datasets: Dict[str, DatasetSpec] = Field(default_factory=dict, description="Dataset per task name.")
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    mode: TransmissionMode = TransmissionMode.FUSED
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    symbol_bits: int = 32
    output_dir: Path = Path("runs")
    seed: int = 0

    def registry(self) -> TaskRegistry:
        return TaskRegistry(self.tasks)

    def validate_consistency(self) -> None:
        """Everything the encoders, generators and registry would reject later, rejected now."""
        self.model.validate_consistency()
        if not self.tasks:
            raise ConfigurationError("no tasks registered", field="tasks")
        self.registry()
        names = {spec.name for spec in self.tasks}
        extra = sorted(set(self.datasets) - names)
        if extra:
            raise ConfigurationError(f"datasets for unregistered tasks: {extra}", field="datasets")
        for spec in self.tasks:
            dataset = self.datasets.get(spec.name)
            if dataset is None:
                raise ConfigurationError(f"task {spec.name} has no dataset", field=f"datasets.{spec.name}")
            check_pairing(spec, dataset, self.model)
            dataset.check()
        for name in self.train.learning_rates:
            if name not in names:
                raise ConfigurationError(f"learning rate given for unknown task {name!r}", field="train.learning_rates")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Re-seed the run: training, evaluation and every dataset (dataset i gets seed + i)."""
        datasets = {
            name: spec.model_copy(update={"seed": seed + i}) for i, (name, spec) in enumerate(self.datasets.items())
        }
        return self.model_copy(
            update={
                "seed": seed,
                "datasets": datasets,
                "train": self.train.model_copy(update={"seed": seed}),
                "eval": self.eval.model_copy(update={"seed": seed}),
            }
        )

    def apply_settings(self, settings: SemCommSettings) -> "ExperimentConfig":
        config = self
        if settings.seed is not None:
            logger.info("seed overridden from environment: %d", settings.seed)
            config = config.with_seed(settings.seed)
        if settings.output_dir is not None:
            config = config.model_copy(update={"output_dir": settings.output_dir})
        return config


def default_experiment(
    model: Optional[ModelConfig] = None, kinds: Sequence[DatasetKind] = DEFAULT_KINDS, seed: int = 0
) -> ExperimentConfig:
    model = model or ModelConfig()
    kinds = tuple(kinds)
    config = ExperimentConfig(
        model=model,
        tasks=default_tasks(model, kinds),
        datasets=default_datasets(model, kinds, seed),
    )
    return config.with_seed(seed)


def parse_config(raw: bytes | str) -> ExperimentConfig:
    try:
        document = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ConfigurationError(f"config is not valid JSON: {e}") from e
    try:
        config = ExperimentConfig.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(first["msg"], field=location or None) from e
    config.validate_consistency()
    return config


def load_config(path: Path) -> ExperimentConfig:
    return parse_config(Path(path).read_bytes())


def dump_config(config: ExperimentConfig) -> bytes:
    return orjson.dumps(config.model_dump(mode="json"), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)
