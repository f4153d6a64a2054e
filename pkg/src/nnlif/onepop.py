"""Semi-implicit time stepping for the single-population model.

One step solves

    (H/dt + A - b N^n B + a^n (C + D)) u^{n+1} = H u^n / dt

with the rate-dependent diffusion a^n = a0 + a1 N^n evaluated explicitly
and the firing rate obtained in closed form from the threshold slope.
The system matrix is refactored every step; at these dimensions (<= 49)
that is negligible and keeps the code obviously correct.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assembly import GalerkinMatrices, project_initial, reconstruct
from .errors import ConfigurationError, LinearSolveError, SingularFiringRateError
from .norms import norm_grid

_RATE_DENOM_TOL = 1e-12
_NEGATIVE_RATE_TOL = -1e-12
DEFAULT_BLOWUP_THRESHOLD = 1e3

STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blow-up-detected"
STATUS_SOLVER_FAILURE = "solver-failure"


@dataclass(frozen=True)
class OnePopParams:
    """Baseline diffusion a0, rate-diffusion gain a1 and connectivity b
    (positive excitatory, negative inhibitory)."""

    a0: float
    a1: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.a0 <= 0:
            raise ValueError(f"a0 must be positive, got {self.a0}")
        if self.a1 < 0:
            raise ValueError(f"a1 must be nonnegative, got {self.a1}")


@dataclass(frozen=True)
class PopulationState:
    u_hat: np.ndarray
    t: float
    rate: float


@dataclass(frozen=True)
class DensitySnapshot:
    t: float
    grid: np.ndarray
    density: np.ndarray


@dataclass
class RunRecord:
    """Per-step time series of one run plus termination bookkeeping."""

    times: np.ndarray
    rates: np.ndarray
    masses: np.ndarray
    status: str
    snapshots: list[DensitySnapshot] = field(default_factory=list)
    negative_rate: bool = False
    blowup_time: float | None = None
    wall_time: float = 0.0
    dt: float = 0.0
    final_density: np.ndarray | None = None


def firing_rate(u_hat: np.ndarray, deriv_at_threshold: np.ndarray, params: OnePopParams) -> float:
    """Mean firing rate from the threshold slope s = sum u_k psi_k'(V_F).

    N = -a0 s / (1 + a1 s) is the unique solution of N = -(a0 + a1 N) s.
    """
    s = float(np.dot(deriv_at_threshold, u_hat))
    denom = 1.0 + params.a1 * s
    if abs(denom) < _RATE_DENOM_TOL:
        raise SingularFiringRateError(
            f"firing-rate denominator 1 + a1*s = {denom:.3e} is numerically singular"
        )
    return -params.a0 * s / denom


def system_matrix(
    matrices: GalerkinMatrices,
    drift_rate: float,
    diffusion: float,
    dt: float,
    flux_shift_implicit: bool = True,
) -> np.ndarray:
    """Left-hand operator of one semi-implicit step.

    ``drift_rate`` is the rate-proportional drift offset (b N for one
    population), ``diffusion`` the frozen diffusion coefficient.  The
    threshold-flux coupling D is folded in implicitly unless the caller
    supplies the reset inflow as an explicit source instead.
    """
    s = matrices.H / dt + matrices.A - drift_rate * matrices.B + diffusion * matrices.C
    if flux_shift_implicit:
        s = s + diffusion * matrices.D
    return s


def step(state: PopulationState, params: OnePopParams, matrices: GalerkinMatrices, dt: float) -> PopulationState:
    """Advance one time increment; raises on singular systems."""
    if dt <= 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    rate = firing_rate(state.u_hat, matrices.traces.deriv_at_threshold, params)
    diffusion = params.a0 + params.a1 * rate
    lhs = system_matrix(matrices, params.b * rate, diffusion, dt)
    rhs = matrices.H @ state.u_hat / dt
    try:
        u_next = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise LinearSolveError(f"step system singular at t={state.t:.6g}: {exc}") from exc
    t_next = state.t + dt
    rate_next = firing_rate(u_next, matrices.traces.deriv_at_threshold, params)
    return PopulationState(u_hat=u_next, t=t_next, rate=rate_next)


def _validate_times(dt: float, t_final: float, snapshot_times) -> int:
    if dt <= 0 or t_final <= 0:
        raise ConfigurationError(f"need dt > 0 and t_final > 0, got {dt}, {t_final}")
    n_steps = round(t_final / dt)
    if n_steps < 1 or abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ConfigurationError(f"dt={dt} does not divide t_final={t_final}")
    for ts in snapshot_times:
        k = round(ts / dt)
        if ts < 0 or ts > t_final or abs(k * dt - ts) > 1e-9 * max(1.0, abs(ts)):
            raise ConfigurationError(f"snapshot time {ts} is not a multiple of dt={dt}")
    return n_steps


def solve(
    p0,
    params: OnePopParams,
    matrices: GalerkinMatrices,
    dt: float,
    t_final: float,
    snapshot_times=(),
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    snapshot_grid: np.ndarray | None = None,
) -> RunRecord:
    """Run the scheme from a density callable up to t_final.

    Records (t, N, mass) at every step.  Stops early with status
    "blow-up-detected" when the rate passes the threshold or the
    coefficients go non-finite; singular systems stop the run with status
    "solver-failure" instead of raising.
    """
    basis = matrices.basis
    n_steps = _validate_times(dt, t_final, snapshot_times)
    if snapshot_grid is None:
        snapshot_grid = norm_grid(basis.domain)
    snap_lookup = {round(ts / dt): ts for ts in snapshot_times}

    u0 = project_initial(basis, matrices, p0)
    deriv_tr = matrices.traces.deriv_at_threshold
    state = PopulationState(u_hat=u0, t=0.0, rate=firing_rate(u0, deriv_tr, params))

    times = np.empty(n_steps + 1)
    rates = np.empty(n_steps + 1)
    masses = np.empty(n_steps + 1)
    snapshots: list[DensitySnapshot] = []
    status = STATUS_COMPLETED
    negative_rate = False
    blowup_time = None

    def record(n: int, st: PopulationState):
        times[n] = st.t
        rates[n] = st.rate
        masses[n] = float(np.dot(matrices.mass, st.u_hat))
        if n in snap_lookup:
            snapshots.append(
                DensitySnapshot(
                    t=snap_lookup[n],
                    grid=snapshot_grid,
                    density=reconstruct(basis, st.u_hat, snapshot_grid),
                )
            )

    record(0, state)
    last = 0
    t_start = time.perf_counter()
    for n in range(1, n_steps + 1):
        try:
            state = step(state, params, matrices, dt)
        except (SingularFiringRateError, LinearSolveError):
            status = STATUS_SOLVER_FAILURE
            break
        record(n, state)
        last = n
        if state.rate < _NEGATIVE_RATE_TOL:
            negative_rate = True
        if not np.all(np.isfinite(state.u_hat)) or state.rate > blowup_threshold:
            status = STATUS_BLOWUP
            blowup_time = state.t
            break
    wall = time.perf_counter() - t_start

    keep = last + 1
    return RunRecord(
        times=times[:keep],
        rates=rates[:keep],
        masses=masses[:keep],
        status=status,
        snapshots=snapshots,
        negative_rate=negative_rate,
        blowup_time=blowup_time,
        wall_time=wall,
        dt=dt,
    )
