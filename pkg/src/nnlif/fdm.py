"""Independent finite-difference reference solver on a truncated domain.

A deliberately different discretization family from the spectral solver:
cell-centered finite volumes on [v_min, v_threshold] with first-order
upwinded drift, centered diffusion and explicit Euler stepping.  The firing
rate is the discrete diffusive outflux through the threshold edge and is
re-injected at the reset edge, so total (density + refractory) mass is
conserved to rounding by telescoping.

Agreement between this solver and the spectral one is therefore evidence,
not tautology.  For reference duty the plain first-order scheme needs very
fine grids; :func:`fdm_reference` optionally Richardson-extrapolates a
(h, h/2) pair, which removes the leading O(h) error while staying inside
the same discretization family.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .basis import Domain
from .errors import ConfigurationError, SingularFiringRateError
from .norms import norm_grid
from .onepop import (
    DEFAULT_BLOWUP_THRESHOLD,
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    STATUS_SOLVER_FAILURE,
    DensitySnapshot,
    OnePopParams,
    RunRecord,
    _validate_times,
)
from .twopop import (
    DIFFUSION_CONSTANT,
    TwoPopParams,
    TwoPopRunRecord,
    recovery,
)

DEFAULT_V_MIN = -6.0
DEFAULT_H = 1.0 / 128.0


@dataclass(frozen=True)
class FdmGrid:
    """Uniform cell grid on [v_min, v_threshold] with the reset and threshold
    voltages aligned to cell edges."""

    domain: Domain
    v_min: float
    h: float
    n_cells: int
    i_reset: int  # cell whose left edge is the reset voltage

    @classmethod
    def build(cls, domain: Domain, v_min: float = DEFAULT_V_MIN, h: float = DEFAULT_H) -> "FdmGrid":
        if v_min >= domain.v_reset:
            raise ConfigurationError(f"v_min={v_min} must lie below the reset voltage")
        n_f = (domain.v_threshold - v_min) / h
        n_r = (domain.v_reset - v_min) / h
        if abs(n_f - round(n_f)) > 1e-9 or abs(n_r - round(n_r)) > 1e-9:
            raise ConfigurationError(
                f"grid spacing h={h} does not align v_reset and v_threshold with cell edges"
            )
        return cls(domain=domain, v_min=v_min, h=h, n_cells=round(n_f), i_reset=round(n_r))

    @property
    def centers(self) -> np.ndarray:
        return self.v_min + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def inner_edges(self) -> np.ndarray:
        return self.v_min + np.arange(1, self.n_cells) * self.h


def cfl_timestep(grid: FdmGrid, diffusion: float, rate_cap: float = 0.0, b: float = 0.0) -> float:
    """Largest stable explicit step dt <= h^2 / (2 a + |u|_max h)."""
    u_max = max(abs(grid.v_min), abs(grid.domain.v_threshold)) + abs(b) * rate_cap
    return grid.h * grid.h / (2.0 * diffusion + u_max * grid.h)


def _rate_from_slope(p_last: float, h: float, params: OnePopParams) -> float:
    """Firing rate from the discrete threshold slope: N = a(N) p_last / h."""
    g = p_last / h
    denom = 1.0 - params.a1 * g
    if abs(denom) < 1e-12:
        raise SingularFiringRateError("discrete firing-rate relation singular")
    return params.a0 * g / denom


def fdm_step(p: np.ndarray, params: OnePopParams, grid: FdmGrid, dt: float):
    """One explicit step; returns (new density, firing rate at entry)."""
    h = grid.h
    rate = _rate_from_slope(p[-1], h, params)
    diffusion = params.a0 + params.a1 * rate

    u = -grid.inner_edges + params.b * rate
    flux = np.empty(grid.n_cells + 1)
    flux[0] = 0.0  # zero-flux wall at v_min
    flux[1:-1] = np.where(u >= 0.0, u * p[:-1], u * p[1:]) - diffusion * np.diff(p) / h
    # threshold edge: absorbing value p(V_F)=0 kills the drift flux there,
    # the diffusive outflux is exactly the firing rate
    flux[-1] = diffusion * p[-1] / h

    p_new = p - (dt / h) * np.diff(flux)
    p_new[grid.i_reset] += rate * dt / h
    return p_new, rate


def _initial_cells(p0, grid: FdmGrid) -> np.ndarray:
    """Cell values of the initial density, normalized to exact unit mass."""
    p = np.asarray(p0(grid.centers), dtype=float)
    total = float(np.sum(p) * grid.h)
    if total <= 0:
        raise ConfigurationError("initial density has nonpositive mass on the grid")
    return p / total


def _to_norm_grid(p: np.ndarray, grid: FdmGrid, out_grid: np.ndarray) -> np.ndarray:
    """Interpolate cell-center values onto the comparison grid (zero outside,
    absorbing value at the threshold)."""
    xs = np.concatenate(([grid.v_min], grid.centers, [grid.domain.v_threshold]))
    ys = np.concatenate(([p[0]], p, [0.0]))
    return np.interp(out_grid, xs, ys, left=0.0, right=0.0)


def fdm_solve(
    p0,
    params: OnePopParams,
    grid: FdmGrid,
    dt: float,
    t_final: float,
    snapshot_times=(),
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    cfl_rate_cap: float = 0.0,
) -> RunRecord:
    """Explicit run recording (t, N, mass) every step, same record shape as
    the spectral solver."""
    n_steps = _validate_times(dt, t_final, snapshot_times)
    if dt > cfl_timestep(grid, params.a0 + params.a1 * cfl_rate_cap, cfl_rate_cap, params.b):
        raise ConfigurationError(
            f"dt={dt} violates the explicit stability bound for h={grid.h}"
        )
    snap_lookup = {round(ts / dt): ts for ts in snapshot_times}
    out_grid = norm_grid(grid.domain)

    p = _initial_cells(p0, grid)
    times = np.empty(n_steps + 1)
    rates = np.empty(n_steps + 1)
    masses = np.empty(n_steps + 1)
    snapshots: list[DensitySnapshot] = []
    status = STATUS_COMPLETED
    negative_rate = False
    blowup_time = None

    def record(n: int, t: float, rate: float):
        times[n] = t
        rates[n] = rate
        masses[n] = float(np.sum(p) * grid.h)
        if n in snap_lookup:
            snapshots.append(DensitySnapshot(snap_lookup[n], out_grid, _to_norm_grid(p, grid, out_grid)))

    record(0, 0.0, _rate_from_slope(p[-1], grid.h, params))
    last = 0
    t_start = time.perf_counter()
    for n in range(1, n_steps + 1):
        try:
            p, _ = fdm_step(p, params, grid, dt)
            rate = _rate_from_slope(p[-1], grid.h, params)
        except SingularFiringRateError:
            status = STATUS_SOLVER_FAILURE
            break
        record(n, n * dt, rate)
        last = n
        if rate < -1e-12:
            negative_rate = True
        if not np.all(np.isfinite(p)) or rate > blowup_threshold:
            status = STATUS_BLOWUP
            blowup_time = n * dt
            break
    wall = time.perf_counter() - t_start

    keep = last + 1
    record_out = RunRecord(
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
    record_out.final_density = _to_norm_grid(p, grid, out_grid)
    return record_out


def fdm_reference(
    p0,
    params: OnePopParams,
    domain: Domain,
    t_final: float,
    h: float = DEFAULT_H,
    v_min: float = DEFAULT_V_MIN,
    richardson: bool = True,
    dt_safety: float = 0.9,
) -> np.ndarray:
    """Reference density at t_final on the comparison grid.

    With ``richardson`` the leading O(h) upwind error is cancelled from a
    (h, h/2) pair; each run picks the largest stable step that divides
    t_final.
    """

    def run(h_run: float) -> np.ndarray:
        grid = FdmGrid.build(domain, v_min=v_min, h=h_run)
        # allow for mild rate-driven growth of drift and diffusion
        bound = dt_safety * cfl_timestep(grid, params.a0 + params.a1, 1.0, params.b)
        n_steps = int(np.ceil(t_final / bound))
        dt = t_final / n_steps
        p = _initial_cells(p0, grid)
        for _ in range(n_steps):
            p, _ = fdm_step(p, params, grid, dt)
        return _to_norm_grid(p, grid, norm_grid(domain))

    coarse = run(h)
    if not richardson:
        return coarse
    fine = run(0.5 * h)
    return 2.0 * fine - coarse


def _twopop_rates(p_e_last, p_i_last, h, a_const):
    return a_const * p_e_last / h, a_const * p_i_last / h


def fdm_solve_twopop(
    p0_e,
    p0_i,
    params: TwoPopParams,
    grid: FdmGrid,
    dt: float,
    t_final: float,
    r0_e: float = 0.0,
    r0_i: float = 0.0,
    blowup_threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    cfl_rate_cap: float = 0.0,
) -> TwoPopRunRecord:
    """Two-population variant with the same stencil per population.

    Restricted to constant diffusion (the configuration of every experiment
    that uses this oracle); the reset inflow is the recovery rate M_alpha
    and the refractory masses follow the forward-Euler balance.
    """
    if params.diffusion_mode != DIFFUSION_CONSTANT:
        raise ConfigurationError("the finite-difference oracle supports constant diffusion only")
    a_const = params.diffusion_constant
    n_steps = _validate_times(dt, t_final, ())
    lags = params.delay_lags(dt)
    drift_cap = max(abs(params.b_e_to_e) + abs(params.b_i_to_e), abs(params.b_e_to_i) + abs(params.b_i_to_i))
    u_extra = drift_cap * cfl_rate_cap + abs(params.b_e_to_i - params.b_e_to_e) * params.nu_ext
    bound = grid.h * grid.h / (2.0 * a_const + (max(abs(grid.v_min), grid.domain.v_threshold) + u_extra) * grid.h)
    if dt > bound:
        raise ConfigurationError(f"dt={dt} violates the explicit stability bound for h={grid.h}")

    h = grid.h
    p_e = _initial_cells(p0_e, grid)
    p_i = _initial_cells(p0_i, grid)
    r_e, r_i = r0_e, r0_i
    hist_e = np.empty(n_steps + 1)
    hist_i = np.empty(n_steps + 1)

    times = np.empty(n_steps + 1)
    rate_e = np.empty(n_steps + 1)
    rate_i = np.empty(n_steps + 1)
    mass_e = np.empty(n_steps + 1)
    mass_i = np.empty(n_steps + 1)
    refr_e = np.empty(n_steps + 1)
    refr_i = np.empty(n_steps + 1)
    status = STATUS_COMPLETED
    trip_e = trip_i = None

    inner = grid.inner_edges

    def one_step(p, v_drift, diffusion, m_in):
        u = -inner + v_drift
        flux = np.empty(grid.n_cells + 1)
        flux[0] = 0.0
        flux[1:-1] = np.where(u >= 0.0, u * p[:-1], u * p[1:]) - diffusion * np.diff(p) / h
        flux[-1] = diffusion * p[-1] / h
        p_new = p - (dt / h) * np.diff(flux)
        p_new[grid.i_reset] += m_in * dt / h
        return p_new

    t_start = time.perf_counter()
    last = 0
    for n in range(0, n_steps + 1):
        ne = a_const * p_e[-1] / h
        ni = a_const * p_i[-1] / h
        hist_e[n] = ne
        hist_i[n] = ni
        times[n] = n * dt
        rate_e[n] = ne
        rate_i[n] = ni
        mass_e[n] = float(np.sum(p_e) * h)
        mass_i[n] = float(np.sum(p_i) * h)
        refr_e[n] = r_e
        refr_i[n] = r_i
        last = n
        finite = np.all(np.isfinite(p_e)) and np.all(np.isfinite(p_i))
        if trip_e is None and (ne > blowup_threshold or not finite):
            trip_e = n * dt
        if trip_i is None and (ni > blowup_threshold or not finite):
            trip_i = n * dt
        if (trip_e is not None and trip_i is not None) or not finite:
            status = STATUS_BLOWUP
            break
        if n == n_steps:
            break

        ne_d_ee = hist_e[max(0, n - lags["delay_e_to_e"])]
        ni_d_ie = hist_i[max(0, n - lags["delay_i_to_e"])]
        ne_d_ei = hist_e[max(0, n - lags["delay_e_to_i"])]
        ni_d_ii = hist_i[max(0, n - lags["delay_i_to_i"])]
        v_e = params.b_e_to_e * ne_d_ee - params.b_i_to_e * ni_d_ie
        v_i = (
            params.b_e_to_i * ne_d_ei
            - params.b_i_to_i * ni_d_ii
            + (params.b_e_to_i - params.b_e_to_e) * params.nu_ext
        )
        m_e = recovery(r_e, ne, params, "e")
        m_i = recovery(r_i, ni, params, "i")
        p_e = one_step(p_e, v_e, a_const, m_e)
        p_i = one_step(p_i, v_i, a_const, m_i)
        r_e += dt * (ne - m_e)
        r_i += dt * (ni - m_i)
    wall = time.perf_counter() - t_start

    keep = last + 1
    rec = TwoPopRunRecord(
        times=times[:keep],
        rate_e=rate_e[:keep],
        rate_i=rate_i[:keep],
        mass_e=mass_e[:keep],
        mass_i=mass_i[:keep],
        refractory_e=refr_e[:keep],
        refractory_i=refr_i[:keep],
        status=status,
        trip_time_e=trip_e,
        trip_time_i=trip_i,
        wall_time=wall,
        dt=dt,
    )
    rec.final_density_e = _to_norm_grid(p_e, grid, norm_grid(grid.domain))
    rec.final_density_i = _to_norm_grid(p_i, grid, norm_grid(grid.domain))
    return rec


def fdm_reference_twopop(
    p0_e,
    p0_i,
    params: TwoPopParams,
    domain: Domain,
    t_final: float,
    h: float = DEFAULT_H,
    v_min: float = DEFAULT_V_MIN,
    richardson: bool = True,
    dt_safety: float = 0.9,
):
    """Reference densities (E, I) at t_final on the comparison grid."""

    def run(h_run: float):
        grid = FdmGrid.build(domain, v_min=v_min, h=h_run)
        a_const = params.diffusion_constant
        u_max = max(abs(grid.v_min), domain.v_threshold) + abs(params.b_e_to_i - params.b_e_to_e) * params.nu_ext
        bound = dt_safety * grid.h * grid.h / (2.0 * a_const + u_max * grid.h)
        n_steps = int(np.ceil(t_final / bound))
        dt = t_final / n_steps
        rec = fdm_solve_twopop(p0_e, p0_i, params, grid, dt, t_final)
        return rec.final_density_e, rec.final_density_i

    ce, ci = run(h)
    if not richardson:
        return ce, ci
    fe, fi = run(0.5 * h)
    return 2.0 * fe - ce, 2.0 * fi - ci
