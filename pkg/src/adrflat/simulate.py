"""Fixed-step co-integration of plant, observer and controller.

One scenario is one deterministic run: classical RK4 on the augmented
(plant + observer) state with the control input held over each macro step.
Exogenous forces are evaluated on the half-step grid so the integrator
sees them continuously.

Two engines produce identical physics:

* ``fast``: the closed loop is linear in (state, observer state,
  reference stack), so the control law is probed for its exact linear
  coefficients once and the whole run executes inside a compiled kernel.
  Setup verifies the probed linearity against the law itself.
* ``reference``: a plain Python loop calling the module-level observer and
  control functions step by step. Slow; used for short runs and for
  validating the fast path.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .controller import ControllerSpec, ControlLaw, build_flat_machinery, make_controller
from .errors import DimensionMismatch, EmptyWindow, StepTooLarge, UnstableRun
from .observer import (
    ObserverConfig,
    ObserverState,
    extract_estimates,
    observer_derivatives,
    observer_matrices,
    tune_gains_repeated,
)
from .plant import (
    DisturbanceSpec,
    NominalParams,
    PlantParams,
    build_nominal_model,
    true_derivative,
    true_disturbance_series,
    true_plant_matrices,
    tau_dis_from_forces,
)
from .references import ConstantReference, ReferenceTrajectory
from .statespace import StateSpaceModel

try:
    from numba import njit as _numba_njit

    def _jit(f):
        return _numba_njit(cache=True)(f)

except ImportError:  # pragma: no cover - numba is a declared dependency

    def _jit(f):
        return f


BLOW_UP_LIMIT = 1e6
CSV_COLUMNS = (
    "t,q1,dq1,q2,dq2,u,q2_ref,d1_true,d2_true,d1_hat,d2_hat,"
    "d1_hat_d1,d2_hat_d1,d1_hat_d2,d2_hat_d2,xi_norm"
)


@dataclass(frozen=True)
class Scenario:
    """Complete description of one experiment."""

    plant: PlantParams = field(default_factory=PlantParams)
    nominal: NominalParams = field(default_factory=NominalParams)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    controller: Optional[ControllerSpec] = None
    reference: ReferenceTrajectory = field(default_factory=ConstantReference)
    dt: float = 1e-5
    t_end: float = 10.0
    seed: int = 0
    log_every: int = 10
    engine: str = "fast"
    x0: np.ndarray = field(default_factory=lambda: np.zeros(4))
    observer_z0: Optional[np.ndarray] = None
    dob_order: int = 2
    dob_bandwidth: float = 1000.0
    literal_observer: bool = False
    structural_zeros: bool = True
    truncate_missing: bool = False
    disturbance_channels: tuple = (1, 3)

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be > 0")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.engine not in ("fast", "reference"):
            raise ValueError("engine must be 'fast' or 'reference'")
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.shape[0] != 4:
            raise DimensionMismatch("x0 must have 4 states")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def effective_dob_order(self) -> int:
        return self.controller.dob_order if self.controller is not None else self.dob_order

    @property
    def effective_dob_bandwidth(self) -> float:
        return (
            self.controller.dob_bandwidth
            if self.controller is not None
            else self.dob_bandwidth
        )


@dataclass
class SimLog:
    """Decimated time series of one run plus the exact terminal state."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    x_ref: np.ndarray
    q2_ref: np.ndarray
    ref_stack: np.ndarray
    tau_hat: np.ndarray  # (n, k+1, 4), controller-seen estimates
    tau_true: np.ndarray  # (n, 4) state-space units
    xi: np.ndarray
    final_state: np.ndarray
    final_time: float
    dt: float
    log_every: int
    seed: int
    k: int
    nominal: NominalParams
    variant: str
    unstable: bool = False
    steps_done: int = 0

    @property
    def d_true(self) -> np.ndarray:
        """(d1, d2) in force units."""
        return np.stack(
            [self.nominal.m1n * self.tau_true[:, 1], self.nominal.m2n * self.tau_true[:, 3]],
            axis=1,
        )

    def d_hat(self, order: int) -> np.ndarray:
        """Estimated (d1, d2) derivative of the given order, force units."""
        if order > self.k:
            raise DimensionMismatch(f"order {order} exceeds observer order {self.k}")
        return np.stack(
            [
                self.nominal.m1n * self.tau_hat[:, order, 1],
                self.nominal.m2n * self.tau_hat[:, order, 3],
            ],
            axis=1,
        )

    @property
    def xi_norm(self) -> np.ndarray:
        return np.linalg.norm(self.xi, axis=1)

    def to_csv(self, path) -> None:
        n = self.t.shape[0]
        nan = np.full(n, np.nan)
        d_true = self.d_true
        cols = [
            self.t,
            self.x[:, 0],
            self.x[:, 1],
            self.x[:, 2],
            self.x[:, 3],
            self.u,
            self.q2_ref,
            d_true[:, 0],
            d_true[:, 1],
        ]
        for order in range(3):
            if order <= self.k:
                dh = self.d_hat(order)
                cols.extend([dh[:, 0], dh[:, 1]])
            else:
                cols.extend([nan, nan])
        # schema groups estimate columns pairwise per order:
        # d1_hat,d2_hat,d1_hat_d1,d2_hat_d1,d1_hat_d2,d2_hat_d2
        cols.append(self.xi_norm)
        data = np.column_stack(cols)
        buf = io.StringIO()
        np.savetxt(buf, data, fmt="%.9g", delimiter=",", header=CSV_COLUMNS, comments="")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


# -- compiled kernels --------------------------------------------------------


@_jit
def _rk4_closedloop(M, bu, cu, gu, w_rows, w_vals, eta, M_obs_x, X0, dt, n_steps,
                    log_every, blow_up):
    n = X0.shape[0]
    nw = w_rows.shape[0]
    has_noise = eta.shape[0] > 0
    nz = n - 4
    x = X0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xs = np.empty(n)
    zf = np.zeros(nz)
    n_log = n_steps // log_every + 1
    out = np.empty((n_log, n))
    out[0] = x
    logged = 1
    h2 = 0.5 * dt
    h6 = dt / 6.0
    steps_done = n_steps
    ok = True
    for i in range(n_steps):
        u = gu[i]
        for j in range(n):
            u += cu[j] * x[j]
        if has_noise:
            for j in range(4):
                u += cu[j] * eta[i, j]
            for r in range(nz):
                s = 0.0
                for j in range(4):
                    s += M_obs_x[r, j] * eta[i, j]
                zf[r] = s
        # stage 1
        for r in range(n):
            s = bu[r] * u
            for c in range(n):
                s += M[r, c] * x[c]
            k1[r] = s
        for r in range(nw):
            k1[w_rows[r]] += w_vals[r, 2 * i]
        if has_noise:
            for r in range(nz):
                k1[4 + r] += zf[r]
        for r in range(n):
            xs[r] = x[r] + h2 * k1[r]
        # stage 2
        for r in range(n):
            s = bu[r] * u
            for c in range(n):
                s += M[r, c] * xs[c]
            k2[r] = s
        for r in range(nw):
            k2[w_rows[r]] += w_vals[r, 2 * i + 1]
        if has_noise:
            for r in range(nz):
                k2[4 + r] += zf[r]
        for r in range(n):
            xs[r] = x[r] + h2 * k2[r]
        # stage 3
        for r in range(n):
            s = bu[r] * u
            for c in range(n):
                s += M[r, c] * xs[c]
            k3[r] = s
        for r in range(nw):
            k3[w_rows[r]] += w_vals[r, 2 * i + 1]
        if has_noise:
            for r in range(nz):
                k3[4 + r] += zf[r]
        for r in range(n):
            xs[r] = x[r] + dt * k3[r]
        # stage 4
        for r in range(n):
            s = bu[r] * u
            for c in range(n):
                s += M[r, c] * xs[c]
            k4[r] = s
        for r in range(nw):
            k4[w_rows[r]] += w_vals[r, 2 * i + 2]
        if has_noise:
            for r in range(nz):
                k4[4 + r] += zf[r]
        bad = False
        for r in range(n):
            x[r] = x[r] + h6 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
            # blow-up guard on physical states; auxiliary observer states
            # legitimately scale like gain * state and are only NaN-checked
            if (r < 4 and np.abs(x[r]) > blow_up) or not np.isfinite(x[r]):
                bad = True
        if (i + 1) % log_every == 0:
            out[logged] = x
            logged += 1
        if bad:
            steps_done = i + 1
            ok = False
            break
    return out, logged, steps_done, x, ok


@_jit
def _rk4_forced(M, w_rows, w_vals, X0, dt, n_steps, log_every, blow_up):
    """Linear system with continuous time-dependent forcing (no hold)."""
    n = X0.shape[0]
    nw = w_rows.shape[0]
    x = X0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    xs = np.empty(n)
    n_log = n_steps // log_every + 1
    out = np.empty((n_log, n))
    out[0] = x
    logged = 1
    h2 = 0.5 * dt
    h6 = dt / 6.0
    steps_done = n_steps
    ok = True
    for i in range(n_steps):
        for r in range(n):
            s = 0.0
            for c in range(n):
                s += M[r, c] * x[c]
            k1[r] = s
        for r in range(nw):
            k1[w_rows[r]] += w_vals[r, 2 * i]
        for r in range(n):
            xs[r] = x[r] + h2 * k1[r]
        for r in range(n):
            s = 0.0
            for c in range(n):
                s += M[r, c] * xs[c]
            k2[r] = s
        for r in range(nw):
            k2[w_rows[r]] += w_vals[r, 2 * i + 1]
        for r in range(n):
            xs[r] = x[r] + h2 * k2[r]
        for r in range(n):
            s = 0.0
            for c in range(n):
                s += M[r, c] * xs[c]
            k3[r] = s
        for r in range(nw):
            k3[w_rows[r]] += w_vals[r, 2 * i + 1]
        for r in range(n):
            xs[r] = x[r] + dt * k3[r]
        for r in range(n):
            s = 0.0
            for c in range(n):
                s += M[r, c] * xs[c]
            k4[r] = s
        for r in range(nw):
            k4[w_rows[r]] += w_vals[r, 2 * i + 2]
        bad = False
        for r in range(n):
            x[r] = x[r] + h6 * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
            if (r < 4 and np.abs(x[r]) > blow_up) or not np.isfinite(x[r]):
                bad = True
        if (i + 1) % log_every == 0:
            out[logged] = x
            logged += 1
        if bad:
            steps_done = i + 1
            ok = False
            break
    return out, logged, steps_done, x, ok


# -- law linearization -------------------------------------------------------


@dataclass(frozen=True)
class _LinearLaw:
    """Exact linear coefficients of a control law over (x, zvec, ref)."""

    cu_x: np.ndarray
    cu_z: np.ndarray
    cu_r: np.ndarray
    R_x: np.ndarray
    R_z: np.ndarray
    R_r: np.ndarray
    Xi_x: np.ndarray
    Xi_z: np.ndarray
    Xi_r: np.ndarray


def _raw_output(law: ControlLaw, obs_cfg: ObserverConfig, x, zvec, ref):
    est = extract_estimates(obs_cfg, ObserverState(zvec.reshape(obs_cfg.k + 1, -1)), x)
    return law(0.0, x, est, ref)


def _linearize_law(law: ControlLaw, obs_cfg: ObserverConfig, ref_dim: int) -> _LinearLaw:
    p = obs_cfg.p
    nz = (obs_cfg.k + 1) * p
    x0 = np.zeros(p)
    z0 = np.zeros(nz)
    r0 = np.zeros(ref_dim)
    base = _raw_output(law, obs_cfg, x0, z0, r0)
    if abs(base.u) > 1e-12 or np.max(np.abs(base.x_ref)) > 1e-12:
        raise ValueError("control law is not homogeneous; fast engine unavailable")

    def probe(x, z, r):
        return _raw_output(law, obs_cfg, x, z, r)

    cu_x = np.empty(p)
    R_x = np.empty((p, p))
    Xi_x = np.empty((p, p))
    for i in range(p):
        e = np.zeros(p)
        e[i] = 1.0
        out = probe(e, z0, r0)
        cu_x[i] = out.u
        R_x[:, i] = out.x_ref
        Xi_x[:, i] = out.xi
    cu_z = np.empty(nz)
    R_z = np.empty((p, nz))
    Xi_z = np.empty((p, nz))
    for i in range(nz):
        e = np.zeros(nz)
        e[i] = 1.0
        out = probe(x0, e, r0)
        cu_z[i] = out.u
        R_z[:, i] = out.x_ref
        Xi_z[:, i] = out.xi
    cu_r = np.empty(ref_dim)
    R_r = np.empty((p, ref_dim))
    Xi_r = np.empty((p, ref_dim))
    for i in range(ref_dim):
        e = np.zeros(ref_dim)
        e[i] = 1.0
        out = probe(x0, z0, e)
        cu_r[i] = out.u
        R_r[:, i] = out.x_ref
        Xi_r[:, i] = out.xi
    lin = _LinearLaw(cu_x, cu_z, cu_r, R_x, R_z, R_r, Xi_x, Xi_z, Xi_r)
    # verify exact linearity on a random probe
    rng = np.random.default_rng(12345)
    xr, zr, rr = rng.normal(size=p), rng.normal(size=nz), rng.normal(size=ref_dim)
    out = probe(xr, zr, rr)
    u_lin = cu_x @ xr + cu_z @ zr + cu_r @ rr
    xref_lin = R_x @ xr + R_z @ zr + R_r @ rr
    xi_lin = Xi_x @ xr + Xi_z @ zr + Xi_r @ rr
    scale = max(abs(out.u), np.max(np.abs(out.x_ref)), 1.0)
    if (
        abs(out.u - u_lin) > 1e-8 * scale
        or np.max(np.abs(out.x_ref - xref_lin)) > 1e-8 * scale
        or np.max(np.abs(out.xi - xi_lin)) > 1e-8 * scale
    ):
        raise ValueError("control law failed the linearity probe; use engine='reference'")
    return lin


# -- scenario runner ---------------------------------------------------------


def _forcing_half_grid(scenario: Scenario, t_half: np.ndarray):
    dist = scenario.disturbance
    plant = scenario.plant
    f_ext = dist.f_ext_series(t_half)
    f_ud1 = dist.f_ud1_series(t_half)
    f_ud2 = dist.f_ud2_series(t_half)
    w_rows = np.array([1, 3], dtype=np.int64)
    w_vals = np.empty((2, t_half.shape[0]))
    w_vals[0] = -f_ud1 / plant.m1
    w_vals[1] = (dist.f_ext_sign * f_ext - f_ud2) / plant.m2
    return w_rows, w_vals


def _build_run(scenario: Scenario):
    """Shared setup: model, observer, law, grids, forcing, noise."""
    k = scenario.effective_dob_order
    lam = scenario.effective_dob_bandwidth
    if scenario.dt > 0.1 * (2.0 / lam) * (1.0 + 1e-12):
        raise StepTooLarge(
            f"dt={scenario.dt:g} exceeds the stability guard 0.2/lambda_dob={0.2 / lam:g}"
        )
    model = build_nominal_model(scenario.nominal)
    obs_cfg = ObserverConfig(
        k=k,
        gains=tune_gains_repeated(k, lam),
        model=model,
        literal_form=scenario.literal_observer,
    )
    law = None
    if scenario.controller is not None:
        machinery = build_flat_machinery(
            model,
            nominal=scenario.nominal,
            dob_order=k,
            disturbance_channels=scenario.disturbance_channels,
            structural_zeros=scenario.structural_zeros,
            truncate_missing=scenario.truncate_missing,
        )
        law = make_controller(scenario.controller, model, machinery)
    n_steps = int(round(scenario.t_end / scenario.dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")
    return model, obs_cfg, law, n_steps


def run_scenario(scenario: Scenario) -> SimLog:
    """Integrate one scenario, returning the decimated log.

    Raises ``UnstableRun`` (with the partial log attached) when any
    augmented state magnitude crosses 1e6; ``StepTooLarge`` when dt is
    incompatible with the observer bandwidth.
    """
    model, obs_cfg, law, n_steps = _build_run(scenario)
    k, p = obs_cfg.k, obs_cfg.p
    nz = (k + 1) * p
    dt = scenario.dt
    t_half = 0.5 * dt * np.arange(2 * n_steps + 1)
    t_macro = t_half[0::2][:-1]
    w_rows, w_vals = _forcing_half_grid(scenario, t_half)

    rng = np.random.default_rng(scenario.seed)
    if scenario.disturbance.has_noise:
        eta = rng.normal(size=(n_steps, 4)) * scenario.disturbance.measurement_noise_std
    else:
        eta = np.zeros((0, 4))

    ref_dim = p + 1
    ref_macro = scenario.reference.series(t_macro, p)  # (p+1, n_steps)

    z0 = (
        np.zeros(nz)
        if scenario.observer_z0 is None
        else np.asarray(scenario.observer_z0, dtype=float).reshape(nz)
    )
    X0 = np.concatenate([scenario.x0, z0])

    A_true, B_true = true_plant_matrices(scenario.plant)
    M_zz, M_zx, B_zu = observer_matrices(obs_cfg)
    n_aug = 4 + nz
    M = np.zeros((n_aug, n_aug))
    M[:4, :4] = A_true
    M[4:, 4:] = M_zz
    M[4:, :4] = M_zx
    bu = np.concatenate([B_true, B_zu])

    if law is not None:
        lin = _linearize_law(law, obs_cfg, ref_dim)
        cu = np.concatenate([lin.cu_x, lin.cu_z])
        gu = lin.cu_r @ ref_macro
    else:
        lin = None
        cu = np.zeros(n_aug)
        gu = np.zeros(n_steps)

    if scenario.engine == "fast":
        X_log, n_logged, steps_done, X_final, ok = _rk4_closedloop(
            M, bu, cu, gu, w_rows, w_vals, eta, M_zx, X0, dt, n_steps,
            scenario.log_every, BLOW_UP_LIMIT,
        )
        X_log = X_log[:n_logged]
    else:
        X_log, steps_done, X_final, ok = _reference_loop(
            scenario, model, obs_cfg, law, M, bu, w_rows, w_vals, eta, X0, dt,
            n_steps, ref_macro,
        )

    log = _assemble_log(
        scenario, obs_cfg, law, lin if scenario.engine == "fast" else None,
        X_log, X_final, steps_done, eta, t_macro, ref_macro, gu,
    )
    log.steps_done = steps_done
    if not ok:
        log.unstable = True
        raise UnstableRun(
            f"state magnitude exceeded {BLOW_UP_LIMIT:g} at t={steps_done * dt:g}",
            log=log,
        )
    return log


def _reference_loop(scenario, model, obs_cfg, law, M, bu, w_rows, w_vals, eta, X0,
                    dt, n_steps, ref_macro):
    """Plain-Python engine calling module-level functions per step."""
    plant = scenario.plant
    dist = scenario.disturbance
    k, p = obs_cfg.k, obs_cfg.p
    n_aug = X0.shape[0]
    n_log = n_steps // scenario.log_every + 1
    X_log = np.empty((n_log, n_aug))
    X = X0.copy()
    X_log[0] = X
    logged = 1
    has_noise = eta.shape[0] > 0

    def rhs(t, Xv, u, eta_i):
        x = Xv[:4]
        z = Xv[4:].reshape(k + 1, p)
        x_obs = x + eta_i
        dx = true_derivative(plant, dist, t, x, u)
        dz = observer_derivatives(obs_cfg, ObserverState(z), x_obs, u)
        return np.concatenate([dx, dz.reshape(-1)])

    ok = True
    steps_done = n_steps
    for i in range(n_steps):
        t = i * dt
        eta_i = eta[i] if has_noise else np.zeros(4)
        x_meas = X[:4] + eta_i
        if law is not None:
            est = extract_estimates(obs_cfg, ObserverState(X[4:].reshape(k + 1, p)), x_meas)
            u = law(t, x_meas, est, ref_macro[:, i]).u
        else:
            u = 0.0
        k1 = rhs(t, X, u, eta_i)
        k2 = rhs(t + dt / 2, X + dt / 2 * k1, u, eta_i)
        k3 = rhs(t + dt / 2, X + dt / 2 * k2, u, eta_i)
        k4 = rhs(t + dt, X + dt * k3, u, eta_i)
        X = X + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (i + 1) % scenario.log_every == 0:
            X_log[logged] = X
            logged += 1
        if np.max(np.abs(X[:4])) > BLOW_UP_LIMIT or not np.all(np.isfinite(X)):
            steps_done = i + 1
            ok = False
            break
    return X_log[:logged], steps_done, X, ok


def _assemble_log(scenario, obs_cfg, law, lin, X_log, X_final, steps_done, eta,
                  t_macro, ref_macro, gu):
    k, p = obs_cfg.k, obs_cfg.p
    n = X_log.shape[0]
    idx = np.arange(n) * scenario.log_every
    idx = np.minimum(idx, max(steps_done - 1, 0))  # macro-grid index per logged row
    t_log = np.arange(n) * (scenario.log_every * scenario.dt)
    x_log = X_log[:, :4]
    z_log = X_log[:, 4:]
    if eta.shape[0] > 0:
        eta_log = eta[np.minimum(idx, eta.shape[0] - 1)]
    else:
        eta_log = np.zeros((n, 4))
    x_meas = x_log + eta_log
    G = obs_cfg.row_gains
    tau_hat = z_log.reshape(n, k + 1, p) - G[None, :, None] * x_meas[:, None, :]
    ref_log = ref_macro[:, np.minimum(idx, ref_macro.shape[1] - 1)]  # (p+1, n)
    if law is not None:
        if lin is not None:
            u_log = x_meas @ lin.cu_x + z_log @ lin.cu_z + ref_log.T @ lin.cu_r
            x_ref = (lin.R_x @ x_meas.T + lin.R_z @ z_log.T + lin.R_r @ ref_log).T
            xi = (lin.Xi_x @ x_meas.T + lin.Xi_z @ z_log.T + lin.Xi_r @ ref_log).T
        else:
            u_log = np.empty(n)
            x_ref = np.empty((n, 4))
            xi = np.empty((n, 4))
            for i in range(n):
                est = extract_estimates(
                    obs_cfg, ObserverState(z_log[i].reshape(k + 1, p)), x_meas[i]
                )
                out = law(t_log[i], x_meas[i], est, ref_log[:, i])
                u_log[i] = out.u
                x_ref[i] = out.x_ref
                xi[i] = out.xi
    else:
        u_log = np.zeros(n)
        x_ref = np.zeros((n, 4))
        xi = np.zeros((n, 4))
    tau_true = tau_dis_from_forces(
        scenario.nominal,
        true_disturbance_series(
            scenario.plant, scenario.nominal, scenario.disturbance, t_log, x_log, u_log
        ),
    )
    return SimLog(
        t=t_log,
        x=x_log,
        u=u_log,
        x_ref=x_ref,
        q2_ref=ref_log[0].copy(),
        ref_stack=ref_log.T.copy(),
        tau_hat=tau_hat,
        tau_true=tau_true,
        xi=xi,
        final_state=X_final,
        final_time=steps_done * scenario.dt,
        dt=scenario.dt,
        log_every=scenario.log_every,
        seed=scenario.seed,
        k=k,
        nominal=scenario.nominal,
        variant=scenario.controller.variant if scenario.controller else "none",
    )


def simulate_open_loop(
    model: StateSpaceModel,
    u_half: np.ndarray,
    x0: np.ndarray,
    dt: float,
    n_steps: int,
    log_every: int = 1,
):
    """Drive a linear model with a continuous input sampled on the half grid.

    Unlike the closed-loop runner the input is not held: RK4 stages see the
    exact u(t) at sub-step times, which keeps the integrator's full fourth
    order for convergence studies. Returns (t_log, x_log, x_final).
    """
    u_half = np.asarray(u_half, dtype=float)
    if u_half.shape[0] != 2 * n_steps + 1:
        raise DimensionMismatch("u_half must have 2*n_steps+1 samples")
    p = model.p
    rows = np.array([r for r in range(p) if model.B[r] != 0.0], dtype=np.int64)
    w_vals = np.empty((rows.shape[0], u_half.shape[0]))
    for i, r in enumerate(rows):
        w_vals[i] = model.B[r] * u_half
    X_log, n_logged, steps_done, X_final, ok = _rk4_forced(
        model.A.copy(), rows, w_vals, np.asarray(x0, dtype=float).copy(), dt,
        n_steps, log_every, BLOW_UP_LIMIT,
    )
    if not ok:
        raise UnstableRun(f"open-loop run diverged at step {steps_done}")
    t_log = np.arange(n_logged) * (log_every * dt)
    return t_log, X_log[:n_logged], X_final


def compute_metrics(log: SimLog, window: tuple) -> dict:
    """Tracking and estimation quality over a time window.

    Estimation truth for derivative orders >= 1 is obtained by central
    differences of the logged analytic disturbance series (smooth by
    construction), which keeps the check independent of the observer path.
    """
    t0, t1 = window
    if t0 > t1 or t0 < log.t[0] - 1e-12 or t1 > log.t[-1] + 1e-12:
        raise EmptyWindow(f"window [{t0}, {t1}] not inside log span [{log.t[0]}, {log.t[-1]}]")
    mask = (log.t >= t0) & (log.t <= t1)
    if not np.any(mask):
        raise EmptyWindow(f"window [{t0}, {t1}] contains no samples")
    err = log.x[:, 2] - log.q2_ref
    metrics = {
        "rmse_tracking": float(np.sqrt(np.mean(err[mask] ** 2))),
        "max_abs_err": float(np.max(np.abs(err[mask]))),
    }
    # settle time: first instant after which the error stays inside the band
    band = 0.02 * max(np.max(np.abs(log.q2_ref)), 1e-12)
    inside = np.abs(err) <= band
    settle = np.inf
    if inside[-1]:
        bad = np.where(~inside)[0]
        settle = 0.0 if bad.size == 0 else float(log.t[bad[-1] + 1])
    metrics["settle_time"] = settle

    d_true = log.d_true
    names = ("d1", "d2")
    truth = d_true
    for order in range(min(log.k, 2) + 1):
        if order > 0:
            truth = np.gradient(truth, log.t, axis=0)
        est = log.d_hat(order)
        for c, name in enumerate(names):
            e = est[mask, c] - truth[mask, c]
            rmse = float(np.sqrt(np.mean(e**2)))
            span = float(truth[mask, c].max() - truth[mask, c].min())
            rms = float(np.sqrt(np.mean(truth[mask, c] ** 2)))
            suffix = f"{name}_{order}"
            metrics[f"est_rmse_{suffix}"] = rmse
            # nrmse: normalized by the truth range; rrmse: by the truth RMS
            metrics[f"est_nrmse_{suffix}"] = rmse / span if span > 0 else np.inf
            metrics[f"est_rrmse_{suffix}"] = rmse / rms if rms > 0 else np.inf
    return metrics


def write_metrics(metrics: dict, path) -> None:
    with open(path, "w") as fh:
        for key in sorted(metrics):
            fh.write(f"{key}={metrics[key]:.9g}\n")
