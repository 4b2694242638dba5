"""Shared fixtures: small graphs, seeded generators and graph state-space models."""

from __future__ import annotations

import numpy as np
import pytest

from src.core.models import Operator, TransitionMode
from src.graph import GraphFilter, build_graph, erdos_renyi
from src.ssm import StateSpaceModel


@pytest.fixture
def p3():
    """Path graph 0 - 1 - 2 with unit weights."""
    return build_graph([(0, 1), (1, 2)])


@pytest.fixture
def star4():
    """Star K_{1,3} centred on node 0."""
    return build_graph([(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def er8():
    """Connected G(8, 0.4) sample, fixed seed."""
    return erdos_renyi(8, 0.4, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def p3_model(p3):
    """Euler heat diffusion on P3 observed through a first-order filter."""
    return StateSpaceModel(
        graph=p3,
        c=0.5,
        alpha=np.array([0.6, 0.4]),
        obs_filter=GraphFilter((1.0, -0.2)),
        sigma2=0.1,
        transition_mode=TransitionMode.EULER,
        dt=1.0,
    )


@pytest.fixture
def er8_model(er8):
    """Normalized-Laplacian SSM on an 8-node graph with two hidden nodes."""
    return StateSpaceModel(
        graph=er8,
        c=0.3,
        alpha=0.5,
        obs_filter=GraphFilter((1.0, 0.4, -0.1), Operator.NORMALIZED_LAPLACIAN),
        sigma2=0.05,
        mask=(0, 1, 2, 4, 5, 7),
        operator=Operator.NORMALIZED_LAPLACIAN,
    )
