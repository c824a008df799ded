"""Tests for joint multi-task training"""

import numpy as np
import pytest

from semcomm_common.enums import DatasetKind
from semcomm_common.exceptions import ConfigurationError
from semcomm_model.config import ChannelConfig
from semcomm_model.optim import AdamState, adam_step
from semcomm_model.system import build_system
from semcomm_model.tensor import Tensor
from semcomm_runner import training
from semcomm_runner.catalog import task_for
from semcomm_runner.training import DEFAULT_LR, SPEECH_LR, TrainConfig, TrainResult, batch_loss, train
from semcomm_runner.training_events import EventStore, TrainingEvent


def _system(config, seed=0):
    return build_system(config.model, config.tasks, seed)


def _assert_same_state(actual, expected):
    assert actual["t"] == expected["t"]
    for moment in ("m", "v"):
        assert actual[moment].keys() == expected[moment].keys()
        for key, value in expected[moment].items():
            assert np.array_equal(actual[moment][key], value), (moment, key)


class TestTrainConfig:
    """Test suite for learning-rate selection"""

    def test_speech_gets_speech_rate(self, small_experiment):
        """Test speech-only tasks default to the speech learning rate"""
        spec = task_for(DatasetKind.SPEECH_REC, 0, small_experiment.model)

        assert TrainConfig().lr_for(spec) == SPEECH_LR

    def test_override_by_name(self, small_experiment):
        """Test a per-task override wins over the defaults"""
        spec = small_experiment.tasks[0]
        cfg = TrainConfig(learning_rates={spec.name: 5e-3})

        assert cfg.lr_for(spec) == 5e-3
        assert TrainConfig().lr_for(spec) == DEFAULT_LR

    def test_non_positive_override(self):
        """Test overrides must be positive"""
        with pytest.raises(ValueError):
            TrainConfig(learning_rates={"x": 0.0})


class TestTrain:
    """Test suite for the training loop"""

    def test_deterministic(self, small_experiment, pools):
        """Test equal seeds give bit-identical loss sequences and parameters"""
        train_pools, _ = pools
        runs = []
        for _ in range(2):
            system = _system(small_experiment)
            result = train(system, train_pools, small_experiment.train)
            runs.append((result.losses(), {n: p.data.copy() for n, p in system.named_parameters()}))

        assert runs[0][0] == runs[1][0]
        for name, value in runs[0][1].items():
            assert np.array_equal(value, runs[1][1][name]), name

    def test_epoch_covers_every_batch(self, small_experiment, pools):
        """Test an epoch takes exactly one step per batch across all tasks"""
        train_pools, _ = pools
        # 8 samples per task at batch size 4: 2 batches each, 4 per epoch
        cfg = small_experiment.train.model_copy(update={"steps": 10})

        result = train(_system(small_experiment), train_pools, cfg)

        assert result.steps_per_epoch == [4, 4]
        assert result.epochs == 2
        assert len(result.events.list_events(event_type="epoch_end")) == 2
        first_epoch = [e.task for e in result.events.list_events(event_type="step") if e.epoch == 0]
        assert sorted(first_epoch) == ["img_class", "img_class", "mm_xor", "mm_xor"]

    def test_optimizers_are_isolated(self, small_experiment, pools):
        """Test a step on one task leaves the other task's optimizer untouched"""
        train_pools, _ = pools
        cfg = small_experiment.train.model_copy(update={"steps": 1})

        result = train(_system(small_experiment), train_pools, cfg)

        stepped = result.events.list_events(event_type="step")[0].task
        idle = next(name for name in result.optimizers if name != stepped)
        assert result.optimizers[stepped].t == 1
        assert result.optimizers[idle].t == 0
        assert result.optimizers[idle].m == {}

    def test_optimizer_state_depends_only_on_own_gradients(self, small_experiment, pools, monkeypatch):
        """Test each task's Adam state is untouched by other tasks' steps and replays from its own gradients alone"""
        train_pools, _ = pools
        calls = []
        states = {}

        def recording_step(params, state, grads=None):
            params = list(params)
            own = {p.name: p.grad.copy() for p in params}
            adam_step(params, state, grads)
            states[id(state)] = state
            calls.append((id(state), own, {key: s.snapshot() for key, s in states.items()}))

        monkeypatch.setattr(training, "adam_step", recording_step)
        result = train(_system(small_experiment), train_pools, small_experiment.train.model_copy(update={"steps": 8}))

        for name, state in result.optimizers.items():
            replay = AdamState(lr=state.lr)
            previous = None
            foreign_steps = 0
            for owner, grads, snapshots in calls:
                if owner == id(state):
                    params = [Tensor(np.zeros_like(g), requires_grad=True, name=key) for key, g in grads.items()]
                    adam_step(params, replay, grads)
                    _assert_same_state(snapshots[owner], replay.snapshot())
                    previous = snapshots[owner]
                elif previous is not None:
                    foreign_steps += 1
                    _assert_same_state(snapshots[id(state)], previous)
            assert replay.t == state.t > 0, name
            assert foreign_steps > 0, name

    def test_single_modal_optimizer_never_sees_fusion(self, small_experiment, pools):
        """Test the image task's moments cover no fusion parameters"""
        train_pools, _ = pools
        system = _system(small_experiment)

        result = train(system, train_pools, small_experiment.train.model_copy(update={"steps": 8}))

        fusion_names = {p.name for p in system.fusion.parameters()}
        assert fusion_names.isdisjoint(result.optimizers["img_class"].m)
        assert fusion_names & set(result.optimizers["mm_xor"].m)

    def test_grads_cleared_after_step(self, small_experiment, pools):
        """Test no gradient survives a finished step"""
        train_pools, _ = pools
        system = _system(small_experiment)

        train(system, train_pools, small_experiment.train.model_copy(update={"steps": 2}))

        assert all(p.grad is None for p in system.parameters())

    def test_fixed_snr_is_logged(self, small_experiment, pools):
        """Test a fixed training SNR is used for every step"""
        train_pools, _ = pools
        cfg = small_experiment.train.model_copy(update={"steps": 3, "train_snr_db": 9.0})

        result = train(_system(small_experiment), train_pools, cfg)

        assert {e.snr_db for e in result.events.list_events(event_type="step")} == {9.0}

    def test_missing_pool(self, small_experiment, pools):
        """Test every registered task needs training samples"""
        train_pools, _ = pools

        with pytest.raises(ConfigurationError):
            train(_system(small_experiment), {"img_class": train_pools["img_class"]}, small_experiment.train)

    def test_batch_loss_is_mean(self, small_experiment, pools):
        """Test the batch loss averages per-sample losses"""
        train_pools, _ = pools
        system = _system(small_experiment)
        spec = system.registry.get("img_class")
        channel = ChannelConfig(snr_db=300.0)
        samples = train_pools["img_class"][:2]

        both = batch_loss(system, spec, samples, channel, np.random.default_rng(0)).item()
        each = [batch_loss(system, spec, [s], channel, np.random.default_rng(0)).item() for s in samples]

        assert both == pytest.approx(sum(each) / 2, rel=1e-9)


class TestEventStore:
    """Test suite for the training event log"""

    def test_ids_and_filters(self):
        """Test ids are sequential and filters combine"""
        store = EventStore()
        store.add_event(TrainingEvent(step=0, epoch=0, task="a", loss=1.0))
        store.add_event(TrainingEvent(step=1, epoch=0, task="b", loss=2.0))
        store.add_event(TrainingEvent(event_type="epoch_end", step=2, epoch=0))

        assert len(store) == 3
        assert [e.id for e in store.list_events()] == [1, 2, 3]
        assert [e.task for e in store.list_events(event_type="step")] == ["a", "b"]
        assert store.list_events(task="b")[0].loss == 2.0
        assert store.list_events(limit=1)[0].event_type == "epoch_end"
        assert store.get_event(2).task == "b"
        assert store.get_event(99) is None

    def test_result_losses(self):
        """Test losses come from step events only"""
        store = EventStore()
        store.add_event(TrainingEvent(step=0, epoch=0, task="a", loss=0.5))
        store.add_event(TrainingEvent(event_type="task_exhausted", step=0, epoch=0, task="a"))

        assert TrainResult(store, {}).losses() == [0.5]
