"""Shared fixtures and the acceptance-summary terminal hook."""

import numpy as np
import pytest

from layercomp.data.synth import synth_dataset
from layercomp.nets import NetConfig

# Populated by tests/test_acceptance.py via the `criterion` helper.
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, status, detail in ACCEPTANCE_RESULTS:
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(f"[{status}] {name}{suffix}")


@pytest.fixture(scope="session")
def tiny_cfg() -> NetConfig:
    """Smallest config the generators accept; fast enough for shape checks."""
    return NetConfig(image_size=32, n_classes=3, z_dim=16, base_channels=8,
                     n_blocks=2)


@pytest.fixture(scope="session")
def tiny_index():
    return synth_dataset(12, 32, 3, seed=0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)
