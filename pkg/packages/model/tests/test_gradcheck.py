"""Tests for the finite-difference gradient checks"""

import numpy as np
import pytest

from semcomm_model.gradcheck import REL_TOL, op_checks, pipeline_check, relative_errors


class TestRelativeErrors:
    """Test suite for the pass criterion"""

    def test_absolute_floor(self):
        """Test tiny absolute differences count as exact"""
        errs = relative_errors(np.array([1e-9, 1.0]), np.array([0.0, 1.0 + 1e-3]))

        assert errs[0] == 0.0
        assert errs[1] == pytest.approx(1e-3 / (1.0 + 1e-3))


class TestSuites:
    """Test suite for operation and pipeline checks"""

    def test_every_operation_passes(self):
        """Test all differentiable operations agree with central differences"""
        records = op_checks(np.random.default_rng(0))

        failed = [(r.name, r.max_rel_err) for r in records if not r.passed]
        assert failed == []
        assert all(r.max_rel_err < REL_TOL for r in records)

    def test_fused_pipeline_passes(self):
        """Test the full fused pipeline passes on sampled parameter entries"""
        record = pipeline_check(np.random.default_rng(0), max_entries=2)

        assert record.passed
        assert record.entries > 0
