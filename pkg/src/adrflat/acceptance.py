"""Acceptance checks: every reproduced number and end-to-end property.

Each check is a named function returning (passed, detail). The CLI `verify`
command and the pytest acceptance module both run these, so there is a
single source of truth for the pass/fail logic and tolerances. Benchmark
runs are cached per process: several checks share the same three
full-length simulations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .controller import certify_ultimate_bound
from .errors import UnstableRun
from .flat_brunovsky import TransformedDisturbanceStack, brunovsky_control
from .flat_polymatrix import build_flat_parameterization, two_mass_poly_model
from .observer import (
    ObserverConfig,
    ObserverState,
    assemble_psi,
    tune_gains_repeated,
)
from .plant import NominalParams, PlantParams, build_nominal_model
from .polynomials import Polynomial
from .references import SineReference
from .scenario import DEFAULTS, apply_overrides, build_scenario
from .simulate import Scenario, compute_metrics, run_scenario, simulate_open_loop
from .statespace import place_poles, to_brunovsky

BENCH_POLES = (-50.0, -50.0, -60.0, -60.0)
REGULATION_POLES = (-25.0, -25.0, -30.0, -30.0)
# printed feedback gains of the benchmark study, for the informational
# convention comparison of check 04
PRINTED_K_TRACKING = np.array([714.6429, 14.3, -521.4825, -0.1349])
PRINTED_K_REGULATION = np.array([-167.7321, 7.15, 179.8047, -5.3794])


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    runtime_s: float


def _cfg_with(variant: str) -> dict:
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    cfg["controller"]["variant"] = variant
    return cfg


@lru_cache(maxsize=None)
def _bench_log(variant: str):
    """Full-length benchmark run (uncertain plant, windowed external force)."""
    sc = build_scenario(_cfg_with(variant))
    try:
        return run_scenario(sc)
    except UnstableRun as e:
        return e.log


@lru_cache(maxsize=None)
def _exact_model_log():
    """Run with nominal == true parameters and the coupling damper off."""
    cfg = _cfg_with("polymatrix_robust")
    cfg["plant"]["b12"] = 0.0
    cfg["nominal"] = {
        "m1n": cfg["plant"]["m1"],
        "m2n": cfg["plant"]["m2"],
        "b1n": cfg["plant"]["b1"],
        "b2n": cfg["plant"]["b2"],
        "kn": cfg["plant"]["k"],
    }
    return run_scenario(build_scenario(cfg))


def clear_cache() -> None:
    _bench_log.cache_clear()
    _exact_model_log.cache_clear()


# -- criterion 1 --------------------------------------------------------------


def check_dob_gain_tuning(fault: bool = False):
    """Repeated-gain tuning values and the assembled error-matrix spectrum."""
    gains = tune_gains_repeated(2, 1000.0)
    if fault:
        gains = gains * np.array([1.01, 1.0, 1.0])
    want = np.array([1e9, 3e6, 3000.0])
    if not np.array_equal(gains, want):
        return False, (
            "gain tuning invariant violated: tune_gains_repeated(2, 1000) = "
            f"{gains.tolist()} != {want.tolist()}"
        )
    model = build_nominal_model(NominalParams())
    cfg = ObserverConfig(k=2, gains=gains, model=model)
    eigs = np.linalg.eigvals(assemble_psi(cfg))
    rel = np.max(np.abs(eigs - (-1000.0)) / 1000.0)
    if rel >= 1e-3:
        return False, f"Psi spectrum invariant violated: max eigenvalue deviation {rel:.3e}"
    return True, f"gains exact; 12 Psi eigenvalues at -1000 within {rel:.2e} relative"


# -- criterion 2 --------------------------------------------------------------


def check_polynomial_disturbance_exactness():
    """Degree-k disturbances are estimated exactly (zero-error manifold)."""
    lam = 1000.0
    nom = NominalParams()
    model = build_nominal_model(nom)
    plant_exact = PlantParams(
        m1=nom.m1n, m2=nom.m2n, b1=nom.b1n, b2=nom.b2n, b12=0.0, k=nom.kn
    )
    from .plant import DisturbanceSpec

    details = []
    for k in (0, 1, 2):
        c1, c2 = 40.0, -60.0

        def make_poly(c, k=k):
            return lambda t: c * np.asarray(t, dtype=float) ** k

        dist = DisturbanceSpec(f_ud1=make_poly(c1), f_ud2=make_poly(c2))
        cfg = ObserverConfig(k=k, gains=tune_gains_repeated(k, lam), model=model)
        tau0 = np.zeros((k + 1, 4))
        tau0[k, 1] = c1 * math.factorial(k) / nom.m1n
        tau0[k, 3] = c2 * math.factorial(k) / nom.m2n
        z0 = ObserverState.exact(cfg, np.zeros(4), tau0)
        sc = Scenario(
            plant=plant_exact,
            nominal=nom,
            disturbance=dist,
            controller=None,
            dob_order=k,
            dob_bandwidth=lam,
            dt=1e-5,
            t_end=10.0 / lam,
            log_every=1,
            observer_z0=z0.z_hat,
        )
        log = run_scenario(sc)
        worst = 0.0
        for j in range(k + 1):
            for ch, c, mscale in ((1, c1, nom.m1n), (3, c2, nom.m2n)):
                true_j = (
                    c * math.factorial(k) / math.factorial(k - j)
                    * log.t ** (k - j) / mscale
                )
                err = np.abs(log.tau_hat[:, j, ch] - true_j)
                scale = max(np.max(np.abs(true_j)), 1e-12)
                worst = max(worst, float(np.max(err) / scale))
        details.append(f"k={k}: {worst:.2e}")
        if worst >= 1e-6:
            return False, f"estimation error {worst:.3e} >= 1e-6 of scale at k={k}"
    return True, "max normalized error " + ", ".join(details)


# -- criterion 3 --------------------------------------------------------------


def check_q_polynomial_reproduction():
    """Symbolic q1/q2/q3 structure on randomized nominal parameters."""
    rng = np.random.default_rng(2024)
    for trial in range(25):
        m1n = rng.uniform(0.01, 2.0)
        m2n = rng.uniform(0.01, 2.0)
        b1n = rng.uniform(0.0, 5.0)
        b2n = rng.uniform(0.0, 5.0)
        kn = rng.uniform(1.0, 500.0)
        nom = NominalParams(m1n=m1n, m2n=m2n, b1n=b1n, b2n=b2n, kn=kn)
        param = build_flat_parameterization(two_mass_poly_model(nom))
        want_q1 = Polynomial(
            [
                0.0,
                kn * (b1n + b2n),
                b1n * b2n + kn * (m1n + m2n),
                m1n * b2n + m2n * b1n,
                m1n * m2n,
            ]
        )
        if not param.q1_s.almost_equal(want_q1, tol=1e-9):
            return False, f"q1 coefficients mismatch on trial {trial}"
        if not (
            param.q2_s[0, 0].almost_equal(Polynomial([1.0]), tol=1e-12)
            and param.q2_s[0, 1].is_zero()
        ):
            return False, f"q2 != (1, 0) on trial {trial}"
        want_q3 = Polynomial([1.0, b1n / kn, m1n / kn])
        if not (
            param.q3_s[0, 0].is_zero()
            and param.q3_s[0, 1].almost_equal(want_q3, tol=1e-9)
        ):
            return False, f"q3 mismatch on trial {trial}"
    nom = NominalParams()
    param = build_flat_parameterization(two_mass_poly_model(nom))
    got = (param.q1_s.coeff(4), param.q1_s.coeff(2))
    return True, (
        f"25 randomized draws match symbolically; benchmark q1 "
        f"(s^4, s^2) = ({got[0]:.7g}, {got[1]:.6g})"
    )


# -- criterion 4 --------------------------------------------------------------


def _convention_match(K: np.ndarray, printed: np.ndarray) -> float:
    return float(np.max(np.abs(K - printed) / np.maximum(np.abs(printed), 1e-9)))


def check_pole_placement():
    """Both pole sets land where requested; printed gains compared under
    the physical and as-printed input conventions (informational)."""
    nom = NominalParams()
    model = build_nominal_model(nom)
    from .statespace import StateSpaceModel

    # as-printed convention: unsigned stiffness rows, unit input gain
    a = nom.kn / nom.m1n
    c = nom.kn / nom.m2n
    A_printed = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [a, nom.b1n / nom.m1n, a, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [c, 0.0, -c, -nom.b2n / nom.m2n],
        ]
    )
    printed_model = StateSpaceModel(A=A_printed, B=np.array([0.0, 1.0, 0.0, 0.0]))

    notes = []
    for poles, printed_K, label in (
        (REGULATION_POLES, PRINTED_K_REGULATION, "regulation"),
        (BENCH_POLES, PRINTED_K_TRACKING, "tracking"),
    ):
        K = place_poles(model, list(poles))
        A_cl = model.A - np.outer(model.B, K)
        achieved = np.linalg.eigvals(A_cl)
        worst = 0.0
        for pole in set(poles):
            count = poles.count(pole)
            idx = np.argsort(np.abs(achieved - pole))[:count]
            worst = max(worst, abs(np.mean(achieved[idx]) - pole) / abs(pole))
        if worst >= 1e-6:
            return False, f"{label} cluster-mean eigenvalue error {worst:.3e} >= 1e-6"
        want_coeffs = np.poly(np.array(poles))
        have_coeffs = np.poly(A_cl)
        poly_err = np.max(np.abs(have_coeffs - want_coeffs) / np.abs(want_coeffs))
        if poly_err >= 1e-9:
            return False, f"{label} characteristic-polynomial error {poly_err:.3e}"
        phys = _convention_match(K, printed_K)
        try:
            K_alt = place_poles(printed_model, list(poles))
            alt = _convention_match(K_alt, printed_K)
        except Exception:
            alt = np.inf
        best = "physical" if phys <= alt else "as-printed"
        notes.append(
            f"{label}: printed K matches {best} convention "
            f"(rel dev physical {phys:.1e}, as-printed {alt:.1e})"
        )
    return True, "; ".join(notes)


# -- criterion 5 --------------------------------------------------------------


def check_flat_consistency():
    """Open-loop flat feedforward reproduces the reference state, both paths."""
    nom = NominalParams()
    model = build_nominal_model(nom)
    tr = to_brunovsky(model)
    gamma = tr.T[0, 2]
    ref = SineReference(amplitude=0.1, frequency_hz=0.5)
    dt, T = 1e-5, 5.0
    n = int(round(T / dt))
    th = 0.5 * dt * np.arange(2 * n + 1)
    rs = ref.series(th, 4)

    results = []
    # canonical-form path
    ys = gamma * rs
    u_half = ys[4] - tr.a_c @ ys[:4]
    x0 = tr.from_canonical(ys[:4, 0])
    tl, xl, _ = simulate_open_loop(model, u_half, x0, dt, n, log_every=50)
    x_ref = (tr.T_inv @ ys[:4, ::100]).T
    res_b = float(np.max(np.abs(xl - x_ref[: xl.shape[0]])))
    results.append(("brunovsky", res_b))
    # polynomial-matrix path
    param = build_flat_parameterization(two_mass_poly_model(nom))
    ypm = rs / nom.kn
    u_half_pm = param.q1_s.eval_chain_series(ypm)
    pos1 = param.p1_s[0, 0].eval_chain_series(ypm)
    vel1 = param.p1_s[0, 0].eval_chain_series(ypm[1:])
    pos2 = param.p1_s[1, 0].eval_chain_series(ypm)
    vel2 = param.p1_s[1, 0].eval_chain_series(ypm[1:])
    x_ref_pm = np.stack([pos1, vel1, pos2, vel2], axis=1)
    x0_pm = x_ref_pm[0]
    tl, xl, _ = simulate_open_loop(model, u_half_pm, x0_pm, dt, n, log_every=50)
    res_p = float(np.max(np.abs(xl - x_ref_pm[::100][: xl.shape[0]])))
    results.append(("polymatrix", res_p))
    worst = max(r for _, r in results)
    detail = ", ".join(f"{name}: {r:.2e}" for name, r in results)
    if worst >= 1e-5:
        return False, f"open-loop residual too large: {detail}"
    return True, f"max residual over 5 s: {detail}"


# -- criteria 6/7: benchmark closed-loop comparisons --------------------------


def check_controller_equivalence():
    log_b = _bench_log("brunovsky_robust")
    log_p = _bench_log("polymatrix_robust")
    if log_b.unstable or log_p.unstable:
        return False, "a robust benchmark run went unstable"
    diff = float(np.max(np.abs(log_b.x[:, 2] - log_p.x[:, 2])))
    if diff >= 1e-3:
        return False, f"max |q2 difference| = {diff:.3e} >= 1e-3 m"
    return True, f"max |q2 difference| = {diff:.3e} m"


def check_robustness_ordering():
    amp = DEFAULTS["reference"]["amplitude"]
    window = (4.0, 10.0)
    rmses = {}
    for variant in ("brunovsky_robust", "polymatrix_robust", "conventional"):
        log = _bench_log(variant)
        if log.unstable and variant != "conventional":
            return False, f"{variant} run went unstable"
        try:
            rmses[variant] = compute_metrics(log, window)["rmse_tracking"]
        except Exception as e:
            return False, f"{variant}: metrics unavailable ({e})"
    robust_worst = max(rmses["brunovsky_robust"], rmses["polymatrix_robust"])
    if robust_worst >= 0.02 * amp:
        return False, (
            f"robust steady-state RMSE {robust_worst:.3e} >= 2% of amplitude {amp}"
        )
    ratio = rmses["conventional"] / robust_worst
    if ratio < 10.0:
        return False, f"conventional/robust RMSE ratio {ratio:.1f} < 10"
    return True, (
        f"robust RMSE {robust_worst:.3e} m ({100 * robust_worst / amp:.2f}% of amplitude), "
        f"conventional/robust ratio {ratio:.0f}x"
    )


# -- criterion 8 --------------------------------------------------------------


def check_force_sensing():
    log = _exact_model_log()
    sc_cfg = DEFAULTS["disturbance"]
    mask = (log.t >= sc_cfg["t_on"]) & (log.t <= sc_cfg["t_off"])
    sc = build_scenario(_cfg_with("polymatrix_robust"))
    f_true = sc.disturbance.f_ext_series(log.t)
    d2_hat = log.d_hat(0)[:, 1]
    rmse = float(np.sqrt(np.mean((d2_hat[mask] - f_true[mask]) ** 2)))
    budget = 0.02 * sc_cfg["f_ext_amplitude"]
    if rmse >= budget:
        return False, f"force reconstruction RMSE {rmse:.3e} N >= {budget:.2f} N"
    return True, f"force reconstruction RMSE {rmse:.2e} N (budget {budget:.2f} N)"


# -- criterion 9 --------------------------------------------------------------


def check_estimation_fidelity():
    """Normalized estimation RMSE of both disturbances through order 2.

    The load-force window opening at t_on kinks the true disturbance, so
    its higher derivatives do not exist there: the comparison excludes a
    10/lambda re-convergence strip after the kink (plus the initial
    transient), where the finite-difference truth is a spike no finite
    bandwidth observer could or should reproduce.
    """
    log = _bench_log("polymatrix_robust")
    lam = DEFAULTS["observer"]["bandwidth"]
    t_on = DEFAULTS["disturbance"]["t_on"]
    t_off = DEFAULTS["disturbance"]["t_off"]
    hold = 10.0 / lam
    t = log.t
    mask = (t >= 3.0 / lam) & (t <= min(t_off, t[-1]))
    mask &= ~((t > t_on - 2 * log.dt * log.log_every) & (t <= t_on + hold))
    truth = log.d_true
    worst_key, worst = None, 0.0
    details = []
    for order in range(3):
        if order > 0:
            truth = np.gradient(truth, t, axis=0)
        est = log.d_hat(order)
        for c, name in enumerate(("d1", "d2")):
            e = est[mask, c] - truth[mask, c]
            span = float(truth[mask, c].max() - truth[mask, c].min())
            nrmse = float(np.sqrt(np.mean(e**2))) / span
            details.append(f"{name}^({order})={100 * nrmse:.2f}%")
            if nrmse > worst:
                worst_key, worst = f"{name} order {order}", nrmse
    if worst >= 0.05:
        return False, f"normalized estimation RMSE {worst:.3f} ({worst_key}) >= 5%"
    return True, "NRMSE " + ", ".join(details)


# -- criterion 10 -------------------------------------------------------------


def check_ultimate_bound_certificate():
    nom = NominalParams()
    model = build_nominal_model(nom)
    K = place_poles(model, list(BENCH_POLES))
    Q = 2.0 * np.eye(4)
    details = []
    for variant in ("brunovsky_robust", "polymatrix_robust"):
        log = _bench_log(variant)
        steady = log.t >= 4.0
        est_err = np.abs(log.tau_hat[:, 0, 1] - log.tau_true[:, 1])
        delta = float(np.percentile(est_err[steady], 99))
        bound = certify_ultimate_bound(model.A, model.B, K, Q, delta)
        xi_sq = np.sum(log.xi**2, axis=1)
        V = np.einsum("ij,jk,ik->i", log.xi, bound.P, log.xi)
        Vdot = np.gradient(V, log.t)
        outside = xi_sq > bound.radius_sq
        if np.any(outside):
            rhs = bound.vdot_bound(xi_sq[outside])
            scale = np.maximum.reduce(
                [np.abs(Vdot[outside]), bound.ell * xi_sq[outside], np.full(rhs.shape, bound.phi)]
            )
            viol = np.max((Vdot[outside] - rhs) / np.maximum(scale, 1e-30))
            if viol > 1e-3:
                return False, (
                    f"{variant}: decrease inequality violated by {viol:.3e} "
                    f"relative at {int(np.sum(outside))} samples"
                )
        tail = xi_sq[steady]
        if np.max(tail) > bound.radius_sq:
            return False, (
                f"{variant}: ||xi||^2 leaves the certified ball after 4 s "
                f"({np.max(tail):.3e} > {bound.radius_sq:.3e})"
            )
        details.append(
            f"{variant}: delta={delta:.3g}, radius^2={bound.radius_sq:.3g}, "
            f"max steady ||xi||^2={np.max(tail):.3g}, outside samples={int(np.sum(outside))}"
        )
    return True, "; ".join(details)


# -- criterion 11 -------------------------------------------------------------


def check_integrator_order():
    nom = NominalParams()
    model = build_nominal_model(nom)
    tr = to_brunovsky(model)
    gamma = tr.T[0, 2]
    ref = SineReference(amplitude=0.05, frequency_hz=40.0)
    T = 2.0

    def terminal(dt):
        n = int(round(T / dt))
        th = 0.5 * dt * np.arange(2 * n + 1)
        ys = gamma * ref.series(th, 4)
        u_half = ys[4] - tr.a_c @ ys[:4]
        x0 = tr.from_canonical(ys[:4, 0])
        _, _, xf = simulate_open_loop(model, u_half, x0, dt, n, log_every=n)
        return xf

    fine = terminal(1.25e-6)
    e2 = np.linalg.norm(terminal(2e-5) - fine)
    e1 = np.linalg.norm(terminal(1e-5) - fine)
    ratio = e2 / e1
    if not (12.0 <= ratio <= 20.0):
        return False, f"Richardson ratio {ratio:.2f} outside [12, 20]"
    return True, f"Richardson ratio {ratio:.2f} (errors {e2:.2e} / {e1:.2e})"


# -- runner -------------------------------------------------------------------

CHECKS = (
    ("01_dob_gain_tuning", check_dob_gain_tuning),
    ("02_dob_polynomial_exactness", check_polynomial_disturbance_exactness),
    ("03_q_polynomial_reproduction", check_q_polynomial_reproduction),
    ("04_pole_placement", check_pole_placement),
    ("05_flat_consistency", check_flat_consistency),
    ("06_controller_equivalence", check_controller_equivalence),
    ("07_robustness_ordering", check_robustness_ordering),
    ("08_force_sensing", check_force_sensing),
    ("09_estimation_fidelity", check_estimation_fidelity),
    ("10_ultimate_bound_certificate", check_ultimate_bound_certificate),
    ("11_integrator_order", check_integrator_order),
)

RUNTIME_LIMITS = {
    "01_dob_gain_tuning": 1.0,
    "02_dob_polynomial_exactness": 10.0,
    "03_q_polynomial_reproduction": 1.0,
    "04_pole_placement": 1.0,
    "05_flat_consistency": 10.0,
    "06_controller_equivalence": 60.0,
    "07_robustness_ordering": 60.0,
    "08_force_sensing": 60.0,
    "09_estimation_fidelity": 60.0,
    "10_ultimate_bound_certificate": 60.0,
    "11_integrator_order": 30.0,
}


def run_checks(
    name_filter: Optional[str] = None,
    inject_fault: Optional[str] = None,
) -> list:
    """Run matching checks in order; fault injection corrupts check 01."""
    results = []
    for name, fn in CHECKS:
        if name_filter and name_filter not in name:
            continue
        t0 = time.time()
        try:
            if name == "01_dob_gain_tuning" and inject_fault == "dob_gain":
                passed, detail = fn(fault=True)
            else:
                passed, detail = fn()
        except Exception as e:  # a crash is a failing check, not a crash of verify
            passed, detail = False, f"exception: {type(e).__name__}: {e}"
        runtime = time.time() - t0
        limit = RUNTIME_LIMITS.get(name)
        if passed and limit is not None and runtime > limit:
            passed = False
            detail += f" [runtime {runtime:.1f}s exceeded {limit:.0f}s budget]"
        results.append(CheckResult(name=name, passed=passed, detail=detail, runtime_s=runtime))
    return results
