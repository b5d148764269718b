"""Shared fixtures: the mass-spring-damper setup used throughout the tests."""

import numpy as np
import pytest

from mpsc.core import MpscConfig
from mpsc.enlargement import init_trivial
from mpsc.geometry import Ellipsoid, Polytope
from mpsc.harness import bundled_config_path, load_config
from mpsc.harness.experiment import design, run_experiment
from mpsc.linsys import LinearModel, TubeGain

# published values for the mass-spring-damper example
A_TRUE = [[1.0, 0.1], [-0.3, 0.8]]
A_MODEL = [[1.0, 0.1], [-0.23, 0.78]]
B = [[0.0], [0.1]]
K_PAPER = [[-4.12, -5.32]]
P_PAPER = [[53.95, 11.47], [11.47, 14.55]]


def learning_signal(k):
    return np.array([2.0 * np.sin(0.01 * np.pi * k) + 0.5 * np.sin(0.12 * np.pi * k)])


@pytest.fixture(scope="session")
def plant():
    return LinearModel(A_TRUE, B)


@pytest.fixture(scope="session")
def model():
    return LinearModel(A_MODEL, B)


@pytest.fixture(scope="session")
def gain(model):
    return TubeGain(K_PAPER, model)


@pytest.fixture(scope="session")
def X():
    return Polytope.box([-1.0, -0.4], [1.0, 1.0])


@pytest.fixture(scope="session")
def U():
    return Polytope.box([-2.5], [2.5])


@pytest.fixture(scope="session")
def omega_paper():
    return Ellipsoid(P_PAPER)


@pytest.fixture(scope="session")
def msd_config():
    return load_config(bundled_config_path("mass_spring_damper"))


@pytest.fixture(scope="session")
def msd_design(msd_config):
    return design(msd_config)


@pytest.fixture(scope="session")
def msd_result(msd_config, msd_design):
    return run_experiment(msd_config, msd_design)


@pytest.fixture(scope="session")
def enl_config():
    return load_config(bundled_config_path("mass_spring_damper_enlargement"))


@pytest.fixture(scope="session")
def enl_result(enl_config):
    return run_experiment(enl_config)


@pytest.fixture(scope="session")
def cfg20(model, gain, msd_design, X, U):
    return MpscConfig.from_constraints(20, model, gain, msd_design.omega, X, U)


@pytest.fixture(scope="session")
def cfg_paper(model, gain, omega_paper, X, U):
    return MpscConfig.from_constraints(20, model, gain, omega_paper, X, U)


@pytest.fixture()
def trivial_terminal(msd_design, gain):
    return init_trivial(msd_design.omega, gain)
