"""
Checkpoint persistence on top of the shared record container.

Besides one record per named parameter, a checkpoint carries two metadata
records: ``meta/step:<n>`` (training steps taken) and ``meta/config_digest:<hex>``,
which ties it to the model configuration and task set it was trained with.
Both values live in the record name, so they survive the f32 payload exactly.
"""

import hashlib
import logging
from typing import Optional, Sequence

import numpy as np
import orjson

from semcomm_common.container import CHECKPOINT_MAGIC, decode_records, encode_records, meta_record, split_meta
from semcomm_common.enums import TransmissionMode
from semcomm_common.exceptions import CheckpointError, CheckpointVersionError
from semcomm_model.config import ModelConfig, TaskSpec
from semcomm_model.system import SemanticCommSystem

logger = logging.getLogger(__name__)

DIGEST_KEY = "config_digest:"
STEP_KEY = "step:"


def config_digest(model: ModelConfig, tasks: Sequence[TaskSpec], mode: TransmissionMode) -> str:
    document = {
        "model": model.model_dump(mode="json"),
        "tasks": [spec.model_dump(mode="json") for spec in tasks],
        "mode": mode.value,
    }
    return hashlib.sha256(orjson.dumps(document, option=orjson.OPT_SORT_KEYS)).hexdigest()[:16]


def system_digest(system: SemanticCommSystem) -> str:
    return config_digest(system.config, list(system.registry), system.mode)


def save_checkpoint(system: SemanticCommSystem, step: int = 0) -> bytes:
    records = [(name, p.data) for name, p in system.named_parameters()]
    if step < 0:
        raise CheckpointError(f"step counter must be non-negative, got {step}")
    records.append(meta_record(STEP_KEY + str(step), 1.0))
    records.append(meta_record(DIGEST_KEY + system_digest(system), 1.0))
    return encode_records(records, magic=CHECKPOINT_MAGIC)


def load_checkpoint(blob: bytes, system: SemanticCommSystem, expected_digest: Optional[str] = None) -> int:
    """
    Restore parameters into `system` and return the stored step counter.
    Every check runs before the first parameter is written, so a failed load
    leaves the system untouched.
    """
    payload, meta = split_meta(decode_records(blob, magic=CHECKPOINT_MAGIC))
    digests = [key[len(DIGEST_KEY):] for key in meta if key.startswith(DIGEST_KEY)]
    expected = expected_digest or system_digest(system)
    found = digests[0] if digests else None
    if found != expected:
        raise CheckpointVersionError(expected, found, what="config digest")

    params = dict(system.named_parameters())
    unknown = sorted(set(payload) - set(params))
    if unknown:
        raise CheckpointError(f"checkpoint has unknown parameters: {unknown[:5]}")
    missing = sorted(set(params) - set(payload))
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters: {missing[:5]}")
    for name, array in payload.items():
        if array.shape != params[name].shape:
            raise CheckpointError(f"{name}: stored shape {array.shape} != model shape {params[name].shape}")

    for name, array in payload.items():
        params[name].data[...] = array.astype(np.float64)
    steps = [int(key[len(STEP_KEY):]) for key in meta if key.startswith(STEP_KEY)]
    step = steps[0] if steps else 0
    logger.info("loaded %d parameters at step %d (digest %s)", len(payload), step, found)
    return step
