"""
The desk-scale task set and the dataset each task trains on.

Task ids follow registry order; a dataset kind fixes which modalities its
samples carry and what its labels look like.
"""

import math
from typing import Dict, List, Tuple

from semcomm_common.enums import DatasetKind, HeadKind, LossKind, MetricKind, Modality
from semcomm_common.exceptions import ConfigurationError
from semcomm_model.config import ModelConfig, TaskSpec

from .synth_data import DatasetSpec

# kind -> (modalities, head, loss, metric)
TASK_SHAPES: Dict[DatasetKind, Tuple[Tuple[Modality, ...], HeadKind, LossKind, MetricKind]] = {
    DatasetKind.IMG_CLASS: ((Modality.IMAGE,), HeadKind.CLASS_VEC, LossKind.CROSS_ENTROPY, MetricKind.ACCURACY),
    DatasetKind.IMG_RECON: ((Modality.IMAGE,), HeadKind.RECON_IMAGE, LossKind.MSE, MetricKind.PSNR),
    DatasetKind.TEXT_CLASS: ((Modality.TEXT,), HeadKind.CLASS_VEC, LossKind.CROSS_ENTROPY, MetricKind.ACCURACY),
    DatasetKind.TEXT_RECON: ((Modality.TEXT,), HeadKind.CLASS_SEQ, LossKind.CROSS_ENTROPY, MetricKind.BLEU),
    DatasetKind.SPEECH_REC: ((Modality.SPEECH,), HeadKind.CLASS_SEQ, LossKind.CTC, MetricKind.WORD_ACCURACY),
    DatasetKind.VIDEO_CLASS: ((Modality.VIDEO,), HeadKind.CLASS_VEC, LossKind.CROSS_ENTROPY, MetricKind.ACCURACY),
    DatasetKind.MM_XOR: ((Modality.IMAGE, Modality.TEXT), HeadKind.CLASS_VEC, LossKind.CROSS_ENTROPY, MetricKind.ACCURACY),
    DatasetKind.MM_MULTILABEL: (
        (Modality.IMAGE, Modality.TEXT),
        HeadKind.CLASS_VEC,
        LossKind.BINARY_CROSS_ENTROPY,
        MetricKind.F1,
    ),
}

DEFAULT_KINDS: Tuple[DatasetKind, ...] = tuple(TASK_SHAPES)
DEFAULT_SIZES: Dict[DatasetKind, int] = {DatasetKind.MM_XOR: 2500}


def num_outputs(kind: DatasetKind, model: ModelConfig, speech_vocab: int = 4) -> int:
    if kind in (DatasetKind.IMG_CLASS, DatasetKind.VIDEO_CLASS, DatasetKind.MM_MULTILABEL):
        return 4
    if kind in (DatasetKind.TEXT_CLASS, DatasetKind.MM_XOR):
        return 2
    if kind is DatasetKind.TEXT_RECON:
        return model.text.vocab_size
    if kind is DatasetKind.SPEECH_REC:
        return speech_vocab
    image = model.image
    return math.prod((image.channels, image.height, image.width))


def task_for(kind: DatasetKind, task_id: int, model: ModelConfig, name: str | None = None) -> TaskSpec:
    modalities, head, loss, metric = TASK_SHAPES[kind]
    image = model.image
    return TaskSpec(
        id=task_id,
        name=name or kind.value,
        modalities=modalities,
        head=head,
        loss=loss,
        metric=metric,
        num_outputs=num_outputs(kind, model),
        image_shape=(image.channels, image.height, image.width) if head is HeadKind.RECON_IMAGE else None,
    )


def dataset_for(kind: DatasetKind, model: ModelConfig, seed: int = 0, size: int | None = None) -> DatasetSpec:
    return DatasetSpec(
        kind=kind,
        size=size or DEFAULT_SIZES.get(kind, 500),
        seed=seed,
        image=model.image,
        text=model.text,
        speech=model.speech,
        video=model.video,
    )


def default_tasks(model: ModelConfig, kinds: Tuple[DatasetKind, ...] = DEFAULT_KINDS) -> List[TaskSpec]:
    return [task_for(kind, i, model) for i, kind in enumerate(kinds)]


def default_datasets(
    model: ModelConfig, kinds: Tuple[DatasetKind, ...] = DEFAULT_KINDS, seed: int = 0
) -> Dict[str, DatasetSpec]:
    return {kind.value: dataset_for(kind, model, seed + i) for i, kind in enumerate(kinds)}


def check_pairing(spec: TaskSpec, dataset: DatasetSpec, model: ModelConfig) -> None:
    """The dataset must feed exactly the task's modalities with labels its head can score."""
    modalities, head, loss, _ = TASK_SHAPES[dataset.kind]
    if tuple(spec.modalities) != modalities or spec.head is not head or spec.loss is not loss:
        raise ConfigurationError(
            f"dataset kind {dataset.kind.value} does not fit task {spec.name}", field=f"datasets.{spec.name}"
        )
    expected = num_outputs(dataset.kind, model, dataset.speech_vocab)
    if spec.num_outputs != expected:
        raise ConfigurationError(
            f"task {spec.name} declares {spec.num_outputs} outputs, dataset needs {expected}",
            field=f"tasks.{spec.name}.num_outputs",
        )
    geometry = ("image", "text", "speech", "video")
    for name in geometry:
        if getattr(dataset, name) != getattr(model, name):
            raise ConfigurationError(
                f"dataset {name} geometry differs from the model's", field=f"datasets.{spec.name}.{name}"
            )
