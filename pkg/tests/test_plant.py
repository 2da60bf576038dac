import math

import numpy as np
import pytest

from adrflat.plant import (
    DisturbanceSpec,
    NominalParams,
    PlantParams,
    build_nominal_model,
    mechanical_energy,
    sincos_force,
    tau_dis_from_forces,
    true_derivative,
    true_disturbance_series,
    true_plant_matrices,
)


def test_param_validation():
    with pytest.raises(ValueError):
        PlantParams(m1=0.0)
    with pytest.raises(ValueError):
        PlantParams(k=-1.0)
    with pytest.raises(ValueError):
        NominalParams(kn=0.0)
    with pytest.raises(ValueError):
        DisturbanceSpec(t_on=2.0, t_off=1.0)
    with pytest.raises(ValueError):
        DisturbanceSpec(measurement_noise_std=-1.0)


def test_nominal_model_bench_numbers(bench_nominal, bench_model):
    A, B = bench_model.A, bench_model.B
    assert A[1, 0] == pytest.approx(-4076.923, abs=1e-3 * 4076.923)
    assert A[1, 2] == pytest.approx(4076.923, abs=1e-3 * 4076.923)
    assert A[3, 0] == pytest.approx(3028.571, abs=1e-3 * 3028.571)
    assert B[1] == pytest.approx(15.3846, abs=1e-3 * 15.3846)
    assert A[0, 1] == 1.0 and A[2, 3] == 1.0
    assert B[0] == B[2] == B[3] == 0.0


def test_nominal_model_zero_stiffness_decouples():
    nom = NominalParams(m1n=0.1, m2n=0.2, b1n=0.3, b2n=0.4, kn=1e-12)
    A = build_nominal_model(nom).A
    assert abs(A[1, 2]) < 1e-9 and abs(A[3, 0]) < 1e-9


def test_nominal_model_symmetry():
    nom = NominalParams(m1n=0.2, m2n=0.2, b1n=0.5, b2n=0.5, kn=80.0)
    A = build_nominal_model(nom).A
    assert A[1, 0] == pytest.approx(-A[1, 2])
    assert abs(A[1, 0]) == pytest.approx(abs(A[3, 2]))


def test_true_derivative_equilibrium(bench_plant):
    xdot = true_derivative(bench_plant, DisturbanceSpec(), 0.0, np.zeros(4), 0.0)
    assert np.array_equal(xdot, np.zeros(4))


def test_true_derivative_unloaded_spring(bench_plant):
    # q1 = q2, zero velocity: the spring and dampers carry no force
    F = 3.0
    x = np.array([0.4, 0.0, 0.4, 0.0])
    xdot = true_derivative(bench_plant, DisturbanceSpec(), 0.0, x, F)
    assert xdot[1] == pytest.approx(F / bench_plant.m1)
    assert xdot[3] == 0.0


def test_f_ext_evaluation_oracle(bench_plant):
    # direct evaluation of the windowed product force
    f = sincos_force(25.0, 1.0, 3.0)
    spec = DisturbanceSpec(f_ext=f, t_on=2.5, t_off=10.0)
    assert spec.f_ext_series(np.array([2.75]))[0] == pytest.approx(0.0, abs=1e-12)
    want = 25.0 * math.sin(2 * math.pi * 2.6) * math.cos(6 * math.pi * 2.6)
    assert spec.f_ext_series(np.array([2.6]))[0] == pytest.approx(want, rel=1e-12)
    # -25 sin(0.2 pi) cos(0.4 pi), frozen from direct evaluation
    assert want == pytest.approx(-4.5408908000, rel=1e-9)
    # outside the window the force is off
    assert spec.f_ext_series(np.array([2.4]))[0] == 0.0
    assert spec.f_ext_series(np.array([10.01]))[0] == 0.0


def test_true_matrices_match_derivative(bench_plant):
    A, B = true_plant_matrices(bench_plant)
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = rng.normal(size=4)
        u = rng.normal()
        direct = true_derivative(bench_plant, DisturbanceSpec(), 0.0, x, u)
        assert np.allclose(A @ x + B * u, direct, atol=1e-12)


def test_energy_dissipates(bench_plant):
    # u = 0, no disturbance, damping on: energy non-increasing step to step
    A, B = true_plant_matrices(bench_plant)
    x = np.array([0.1, 0.0, -0.05, 0.2])
    dt = 1e-4
    energies = [mechanical_energy(bench_plant, x)]
    for _ in range(5000):
        k1 = A @ x
        k2 = A @ (x + dt / 2 * k1)
        k3 = A @ (x + dt / 2 * k2)
        k4 = A @ (x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        energies.append(mechanical_energy(bench_plant, x))
    e = np.array(energies)
    assert np.all(np.diff(e) <= 1e-9 * max(e[0], 1.0))


def test_disturbance_residual_identity(bench_plant, bench_nominal, bench_model):
    # logged (d1, d2) are defined so the nominal equations reproduce the true
    # accelerations exactly; verify the differential identity pointwise
    dist = DisturbanceSpec(f_ext=sincos_force(25.0, 1.0, 3.0), t_on=0.0, t_off=10.0)
    rng = np.random.default_rng(8)
    ts = rng.uniform(0.0, 10.0, size=7)
    xs = rng.normal(size=(7, 4))
    us = rng.normal(size=7)
    d = true_disturbance_series(bench_plant, bench_nominal, dist, ts, xs, us)
    tau = tau_dis_from_forces(bench_nominal, d)
    for i in range(7):
        xdot_true = true_derivative(bench_plant, dist, ts[i], xs[i], us[i])
        xdot_nominal = bench_model.A @ xs[i] + bench_model.B * us[i] - tau[i]
        assert np.allclose(xdot_true, xdot_nominal, atol=1e-9 * max(1.0, np.max(np.abs(xdot_true))))
