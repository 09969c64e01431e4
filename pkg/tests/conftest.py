from __future__ import annotations

import dataclasses
import itertools

import pytest

from swarmlink.config import ExperimentConfig, validate_config

# Socket-using tests each take a fresh base far from the default scheme so
# parallel test runs and leftover sockets cannot collide.
_port_bases = itertools.count(23000, 200)


@pytest.fixture
def port_base() -> int:
    return next(_port_bases)


@pytest.fixture
def make_config(tmp_path):
    """Config factory rooted in the test's tmp dir, validated."""

    def make(**overrides) -> ExperimentConfig:
        overrides.setdefault("output_dir", str(tmp_path / "out"))
        return validate_config(dataclasses.replace(ExperimentConfig(), **overrides))

    return make
