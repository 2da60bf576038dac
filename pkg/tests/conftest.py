import numpy as np
import pytest

from adrflat.plant import NominalParams, PlantParams, build_nominal_model


@pytest.fixture(scope="session")
def bench_plant():
    return PlantParams()


@pytest.fixture(scope="session")
def bench_nominal(bench_plant):
    nom = NominalParams.from_plant(bench_plant)
    # scalings: 0.65 * 0.1, 0.35 * 0.25, 2.65 * 100
    assert np.isclose(nom.m1n, 0.065)
    assert np.isclose(nom.m2n, 0.0875)
    assert np.isclose(nom.kn, 265.0)
    return nom


@pytest.fixture(scope="session")
def bench_model(bench_nominal):
    return build_nominal_model(bench_nominal)
