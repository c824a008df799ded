"""Tests for differentiable operations"""

import math

import numpy as np
import pytest

from semcomm_common.exceptions import (
    ContractError,
    DegenerateInputError,
    DimensionError,
    LookupIndexError,
    NumericError,
)
from semcomm_model import functional as F
from semcomm_model.gradcheck import check_gradients
from semcomm_model.tensor import Tensor, backward


def _param(rng, *shape):
    return Tensor(rng.uniform(-2.0, 2.0, size=shape), requires_grad=True)


class TestArithmetic:
    """Test suite for matmul and elementwise ops"""

    def test_identity_matmul(self):
        """Test I₂ × A = A"""
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])

        np.testing.assert_array_equal(F.matmul(Tensor(np.eye(2)), a).data, a.data)

    def test_selector_row(self):
        """Test [[1,0]] × [[a],[b]] = [[a]]"""
        out = F.matmul(Tensor([[1.0, 0.0]]), Tensor([[5.0], [7.0]]))

        np.testing.assert_array_equal(out.data, [[5.0]])

    def test_matmul_mismatch_names_shapes(self):
        """Test inner-extent mismatch raises a DimensionError with both shapes"""
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 3\)"):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_matmul_gradients(self, rng):
        """Test matmul gradients against central differences"""
        a, b = _param(rng, 3, 4), _param(rng, 4, 2)
        w = rng.uniform(-1, 1, size=(3, 2))

        record = check_gradients("matmul", lambda: F.sum_all(F.mul(F.matmul(a, b), Tensor(w))), [a, b])

        assert record.max_rel_err < 1e-6

    def test_identities(self, rng):
        """Test add(x, 0) = x and mul(x, 1) = x"""
        x = Tensor(rng.normal(size=(3, 4)))

        np.testing.assert_array_equal(F.add(x, Tensor(np.zeros((3, 4)))).data, x.data)
        np.testing.assert_array_equal(F.mul(x, Tensor(np.ones((3, 4)))).data, x.data)

    def test_broadcast_gradient_is_column_sum(self, rng):
        """Test the broadcast row receives the column-sum of the upstream gradient"""
        x = _param(rng, 4, 3)
        row = _param(rng, 3)
        upstream = rng.uniform(-1, 1, size=(4, 3))

        backward(F.sum_all(F.mul(F.add(x, row), Tensor(upstream))))

        np.testing.assert_allclose(row.grad, upstream.sum(axis=0))

    def test_unsupported_broadcast(self):
        """Test only row-vector broadcast is accepted"""
        with pytest.raises(DimensionError):
            F.add(Tensor(np.ones((4, 3))), Tensor(np.ones((4, 1))))

    def test_unknown_elementwise_kind(self):
        """Test an unknown elementwise kind is a contract error"""
        with pytest.raises(ContractError):
            F.elementwise("div", Tensor([1.0]), Tensor([1.0]))


class TestSoftmaxAndNorm:
    """Test suite for softmax, layer norm and GeLU"""

    def test_uniform_row(self):
        """Test [0,0,0] → thirds"""
        out = F.softmax_rows(Tensor([[0.0, 0.0, 0.0]])).data

        np.testing.assert_allclose(out, [[1 / 3, 1 / 3, 1 / 3]])

    def test_log2_offset(self):
        """Test [c, c+ln2] → [1/3, 2/3]"""
        out = F.softmax_rows(Tensor([[5.0, 5.0 + math.log(2.0)]])).data

        np.testing.assert_allclose(out, [[1 / 3, 2 / 3]], atol=1e-12)

    def test_large_entry_is_stable(self):
        """Test a 1e4 logit yields a one-hot row without overflow"""
        out = F.softmax_rows(Tensor([[0.0, 1e4, 0.0]])).data

        np.testing.assert_allclose(out, [[0.0, 1.0, 0.0]], atol=1e-12)

    def test_rows_sum_to_one(self, rng):
        """Test every row sums to 1"""
        out = F.softmax_rows(Tensor(rng.normal(scale=20.0, size=(6, 5)))).data

        np.testing.assert_allclose(out.sum(axis=1), np.ones(6), atol=1e-9)

    def test_mask(self):
        """Test masked entries get zero weight"""
        mask = np.array([[True, False, True]])

        out = F.softmax_rows(Tensor([[0.0, 9.0, 0.0]]), mask).data

        np.testing.assert_allclose(out, [[0.5, 0.0, 0.5]])

    def test_non_finite_input(self):
        """Test NaN input raises NumericError"""
        with pytest.raises(NumericError):
            F.softmax_rows(Tensor([[0.0, np.nan]]))

    def test_fully_masked_row(self):
        """Test a row with nothing unmasked is a contract error"""
        with pytest.raises(ContractError):
            F.softmax_rows(Tensor([[0.0, 1.0]]), np.array([[False, False]]))

    def test_layer_norm_constant_row(self):
        """Test a constant row maps to zeros"""
        out = F.layer_norm(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3))).data

        np.testing.assert_allclose(out, np.zeros((1, 3)), atol=1e-12)

    def test_layer_norm_two_values(self):
        """Test [1, 3] → [-1, 1] as eps → 0"""
        out = F.layer_norm(Tensor([[1.0, 3.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12).data

        np.testing.assert_allclose(out, [[-1.0, 1.0]], atol=1e-9)

    def test_layer_norm_statistics(self, rng):
        """Test pre-affine rows have mean 0 and variance 1"""
        out = F.layer_norm(Tensor(rng.normal(size=(5, 8))), Tensor(np.ones(8)), Tensor(np.zeros(8)), eps=0.0).data

        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-6)

    def test_layer_norm_single_column(self):
        """Test n < 2 columns is degenerate"""
        with pytest.raises(DegenerateInputError):
            F.layer_norm(Tensor([[1.0], [2.0]]), Tensor(np.ones(1)), Tensor(np.zeros(1)))

    def test_layer_norm_gradients(self, rng):
        """Test layer norm gradients against central differences"""
        x, gain, bias = _param(rng, 5, 8), _param(rng, 8), _param(rng, 8)
        w = rng.uniform(-1, 1, size=(5, 8))

        record = check_gradients(
            "layer_norm", lambda: F.sum_all(F.mul(F.layer_norm(x, gain, bias), Tensor(w))), [x, gain, bias]
        )

        assert record.max_rel_err < 1e-5

    def test_gelu_values(self):
        """Test gelu(0) = 0, gelu(10) ≈ 10 and gelu(1) by the tanh formula"""
        out = F.gelu(Tensor([0.0, 10.0, 1.0])).data
        expected_one = 0.5 * (1.0 + math.tanh(math.sqrt(2.0 / math.pi) * (1.0 + 0.044715)))

        assert out[0] == 0.0
        assert abs(out[1] - 10.0) < 1e-6
        assert abs(out[2] - expected_one) < 1e-12


class TestConvolutions:
    """Test suite for conv2d and causal_conv1d"""

    def test_unit_kernel_sums_channels(self, rng):
        """Test a 1×1 kernel of ones sums the input channels"""
        x = rng.normal(size=(3, 4, 4))

        out = F.conv2d(Tensor(x), Tensor(np.ones((1, 3, 1, 1)))).data

        np.testing.assert_allclose(out[0], x.sum(axis=0))

    def test_averaging_constant(self):
        """Test a 3×3 averaging kernel keeps a constant interior"""
        out = F.conv2d(Tensor(np.full((1, 6, 6), 2.5)), Tensor(np.full((1, 1, 3, 3), 1 / 9))).data

        np.testing.assert_allclose(out, np.full((1, 4, 4), 2.5))

    def test_against_loop_oracle(self, rng):
        """Test conv2d with stride and padding against nested loops"""
        x = rng.normal(size=(2, 5, 5))
        k = rng.normal(size=(3, 2, 3, 3))
        stride, pad = 2, 1
        xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
        size = (5 + 2 * pad - 3) // stride + 1
        oracle = np.zeros((3, size, size))
        for o in range(3):
            for i in range(size):
                for j in range(size):
                    patch = xp[:, i * stride : i * stride + 3, j * stride : j * stride + 3]
                    oracle[o, i, j] = np.sum(patch * k[o])

        out = F.conv2d(Tensor(x), Tensor(k), stride=stride, padding=pad).data

        np.testing.assert_allclose(out, oracle, atol=1e-12)

    def test_kernel_too_large(self):
        """Test a kernel larger than the padded input is rejected"""
        with pytest.raises(DimensionError):
            F.conv2d(Tensor(np.ones((1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))

    def test_causal_against_loop_oracle(self, rng):
        """Test causal_conv1d against an explicit left-padded loop"""
        x = rng.normal(size=(6, 2))
        k = rng.normal(size=(3, 2, 3))
        xp = np.vstack([np.zeros((2, 2)), x])
        oracle = np.array([[np.sum(xp[t : t + 3].T * k[o]) for o in range(3)] for t in range(6)])

        out = F.causal_conv1d(Tensor(x), Tensor(k)).data

        np.testing.assert_allclose(out, oracle, atol=1e-12)

    def test_causality(self, rng):
        """Test perturbing x at time t leaves earlier outputs bit-identical"""
        x = rng.normal(size=(8, 3))
        k = Tensor(rng.normal(size=(2, 3, 3)))
        before = F.causal_conv1d(Tensor(x), k).data
        x[5] += 1.0

        after = F.causal_conv1d(Tensor(x), k).data

        assert np.array_equal(before[:5], after[:5])
        assert not np.array_equal(before[5:], after[5:])

    def test_unit_width_kernel(self, rng):
        """Test kw=1 is a per-step linear map"""
        x = rng.normal(size=(4, 3))
        k = rng.normal(size=(2, 3, 1))

        out = F.causal_conv1d(Tensor(x), Tensor(k)).data

        np.testing.assert_allclose(out, x @ k[:, :, 0].T)

    def test_strided_length(self, rng):
        """Test a stride-2 layer yields ceil(T/2) rows"""
        out = F.causal_conv1d(Tensor(rng.normal(size=(7, 2))), Tensor(rng.normal(size=(4, 2, 3))), stride=2)

        assert out.shape == (4, 4)


class TestShapeOps:
    """Test suite for lookup and concatenation"""

    def test_take_rows_out_of_range(self):
        """Test an id past the table raises LookupIndexError"""
        with pytest.raises(LookupIndexError):
            F.take_rows(Tensor(np.zeros((3, 2))), [0, 3], "word table")

    def test_take_rows_repeats_accumulate(self):
        """Test repeated ids accumulate gradient on the same row"""
        table = Tensor(np.zeros((3, 2)), requires_grad=True)

        backward(F.sum_all(F.take_rows(table, [1, 1, 2])))

        np.testing.assert_array_equal(table.grad, [[0, 0], [2, 2], [1, 1]])

    def test_concat_mismatch(self):
        """Test concatenating mismatched widths fails"""
        with pytest.raises(DimensionError):
            F.concat([Tensor(np.ones((2, 3))), Tensor(np.ones((1, 4)))])

    def test_mean_rows(self):
        """Test mean_rows averages the leading axis into one row"""
        out = F.mean_rows(Tensor([[1.0, 2.0], [3.0, 6.0]])).data

        np.testing.assert_array_equal(out, [[2.0, 4.0]])
