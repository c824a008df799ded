"""Tests for tensors and reverse-mode differentiation"""

import numpy as np
import pytest

from semcomm_common.exceptions import ContractError
from semcomm_model import functional as F
from semcomm_model.tensor import Tape, Tensor, backward, grad_enabled, no_grad


class TestBackward:
    """Test suite for gradient accumulation"""

    def test_sum_gives_ones(self):
        """Test d sum(x)/dx is all ones"""
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)

        backward(F.sum_all(x))

        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_square_gives_2x(self):
        """Test d sum(x·x)/dx = 2x"""
        x = Tensor([[1.0, -2.0, 3.0]], requires_grad=True)

        backward(F.sum_all(F.mul(x, x)))

        np.testing.assert_allclose(x.grad, 2 * x.data)

    def test_grads_accumulate_across_calls(self):
        """Test a second backward adds to the existing gradient"""
        x = Tensor([1.0, 2.0], requires_grad=True)

        backward(F.sum_all(x))
        backward(F.sum_all(x))

        np.testing.assert_array_equal(x.grad, [2.0, 2.0])

    def test_shared_subexpression(self):
        """Test a tensor used twice receives both contributions"""
        x = Tensor([[2.0]], requires_grad=True)
        y = F.add(x, x)

        backward(F.sum_all(F.mul(y, x)))

        # d(2x·x)/dx = 4x
        np.testing.assert_allclose(x.grad, [[8.0]])

    def test_non_scalar_rejected(self):
        """Test backward refuses a non-scalar loss"""
        x = Tensor([1.0, 2.0], requires_grad=True)

        with pytest.raises(ContractError):
            backward(F.scale(x, 2.0))

    def test_constant_loss_rejected(self):
        """Test backward refuses a loss with no trainable input"""
        with pytest.raises(ContractError):
            backward(F.sum_all(Tensor([1.0, 2.0])))

    def test_deep_graph(self):
        """Test a long chain does not hit the recursion limit"""
        x = Tensor([[1.0]], requires_grad=True)
        h = x
        for _ in range(5000):
            h = F.add(h, x)

        backward(F.sum_all(h))

        np.testing.assert_allclose(x.grad, [[5001.0]])

    def test_deterministic_replay(self):
        """Test an identical forward+backward yields bit-identical gradients"""
        rng = np.random.default_rng(0)
        w0 = rng.normal(size=(4, 3))
        x = rng.normal(size=(5, 4))

        grads = []
        for _ in range(2):
            w = Tensor(w0, requires_grad=True)
            backward(F.sum_all(F.gelu(F.matmul(Tensor(x), w))))
            grads.append(w.grad.copy())

        assert np.array_equal(grads[0], grads[1])


class TestTape:
    """Test suite for tape construction"""

    def test_leaves_unique_in_first_use_order(self):
        """Test leaves lists each trainable input once"""
        a = Tensor([[1.0, 2.0]], requires_grad=True)
        b = Tensor([[3.0, 4.0]], requires_grad=True)
        loss = F.sum_all(F.add(F.mul(a, b), a))

        leaves = Tape.from_output(loss).leaves()

        assert [id(t) for t in leaves] == [id(a), id(b)]

    def test_backward_returns_tape(self):
        """Test backward hands back the replayed tape"""
        a = Tensor([[1.0]], requires_grad=True)

        tape = backward(F.sum_all(F.scale(a, 3.0)))

        assert len(tape) == 2
        assert all(node is not None for node in tape.nodes)


class TestNoGrad:
    """Test suite for graph recording control"""

    def test_no_grad_stops_recording(self):
        """Test results inside no_grad carry no creator"""
        a = Tensor([[1.0]], requires_grad=True)

        with no_grad():
            assert grad_enabled() is False
            out = F.scale(a, 2.0)

        assert out.requires_grad is False
        assert out.creator is None
        assert grad_enabled() is True

    def test_item_needs_single_element(self):
        """Test item() rejects multi-element tensors"""
        with pytest.raises(ContractError):
            Tensor([1.0, 2.0]).item()
