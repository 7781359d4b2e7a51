"""Shared fixtures: small simulated panels with fixed seeds"""
import numpy as np
import pytest

from mxfar.core.types import Panel
from mxfar.models import GeneratorSpec, ModelConfig, ReferenceSpec
from mxfar.simulator import simulate


@pytest.fixture(scope="session")
def expar_result():
    spec = GeneratorSpec(kind="expar", n_subjects=4, n_time=200, burn_in=100, seed=11)
    return simulate(spec)


@pytest.fixture(scope="session")
def expar_panel(expar_result):
    return expar_result.panel


@pytest.fixture(scope="session")
def expar_config():
    return ModelConfig(p=1, reference=ReferenceSpec.from_channel(2, 2), bandwidth=1.0, grid_size=10)


@pytest.fixture(scope="session")
def expar_fit(expar_panel, expar_config):
    from mxfar.estimator import fit_mxfar
    return fit_mxfar(expar_panel, expar_config)


@pytest.fixture(scope="session")
def two_group_panel():
    spec = GeneratorSpec(kind="sigmoid", group_sizes=[3, 3], n_time=200, burn_in=100, seed=5)
    return simulate(spec).panel


@pytest.fixture
def noise_panel():
    """Gaussian white noise, N=3, k=2, T=60"""
    rng = np.random.default_rng(3)
    return Panel(values=rng.normal(size=(3, 2, 60)), group_of=np.zeros(3, dtype=int), subject_ids=("1", "2", "3"))


def write_csv(path, rows, header="subject_id,group_id,time_index,ch_1,ch_2"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path
