import pytest

from semcomm_common.enums import DatasetKind
from semcomm_common.settings import get_settings
from semcomm_model.gradcheck import small_model_config
from semcomm_runner.config import default_experiment
from semcomm_runner.evaluation import EvalConfig
from semcomm_runner.synth_data import gen_dataset, split
from semcomm_runner.training import TrainConfig

SMALL_KINDS = (DatasetKind.IMG_CLASS, DatasetKind.MM_XOR)


@pytest.fixture(autouse=True)
def isolated_settings(monkeypatch):
    for name in ("SEMCOMM_SEED", "SEMCOMM_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def small_experiment(tmp_path):
    """Two tasks on the tiny model: 16 samples each, split 8/8."""
    config = default_experiment(small_model_config(), SMALL_KINDS, seed=3)
    datasets = {name: spec.model_copy(update={"size": 16}) for name, spec in config.datasets.items()}
    return config.model_copy(
        update={
            "datasets": datasets,
            "train_fraction": 0.5,
            "train": TrainConfig(steps=6, batch_size=4, default_lr=1e-3, seed=3),
            "eval": EvalConfig(snr_db=[0.0, 18.0], seed=3),
            "output_dir": tmp_path / "run",
        }
    )


@pytest.fixture
def pools(small_experiment):
    train_pools, eval_pools = {}, {}
    for spec in small_experiment.tasks:
        dataset = gen_dataset(small_experiment.datasets[spec.name])
        train_pools[spec.name], eval_pools[spec.name] = split(dataset, 0.5, small_experiment.seed)
    return train_pools, eval_pools
