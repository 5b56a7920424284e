"""Tests for the gradient-check case registry."""

import numpy as np
import pytest

from lowres_pose.autodiff.gradcheck import GradcheckResult
from lowres_pose.gradchecks import GradcheckRegistry, get_case_registry


def test_builtin_groups():
    """Test every layer, head and loss has a registered case."""
    registry = get_case_registry()
    assert len(registry.list_cases("layers")) == 11
    assert len(registry.list_cases("heads")) == 6
    assert len(registry.list_cases("losses")) == 8
    assert "focal_rce" in registry.list_cases("losses")
    assert registry.get_metadata("lhr_head")["group"] == "heads"


@pytest.mark.slow
def test_run_all_passes():
    """Test four randomised repeats of every case pass."""
    results = get_case_registry().run_all(repeats=4, seed=0)
    assert len(results) == 100
    failed = [(r.name, r.max_error) for r in results if not r.passed]
    assert failed == []


def test_run_all_group_and_names():
    """Test a group filter and that results carry the case name."""
    results = get_case_registry().run_all(repeats=1, seed=1, group="heads")
    assert [r.name for r in results] == get_case_registry().list_cases("heads")
    assert all(r.passed for r in results)


def test_registry_rejects_duplicates():
    """Test a name can be registered once."""
    registry = GradcheckRegistry()

    def case(rng: np.random.Generator) -> GradcheckResult:
        return GradcheckResult(name="case")

    registry.register("case", case, {"group": "layers"})
    with pytest.raises(ValueError):
        registry.register("case", case)


def test_unknown_case():
    """Test running an unknown case raises KeyError."""
    with pytest.raises(KeyError):
        GradcheckRegistry().run("missing", np.random.default_rng(0))
