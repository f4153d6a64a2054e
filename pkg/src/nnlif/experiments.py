"""Experiment harness: config parsing, suite runners and regime detection.

Each experiment kind reads a JSON config (schema below), runs its ladder or
grid of deterministic cells, and writes CSV tables via :mod:`records`.
Independent cells can execute in a process pool; aggregation is keyed, so
results are identical for any worker count.

Config schema (version 1)::

    {
      "schema": 1,
      "kind": "convergence-time" | "convergence-space" | "stability-grid" |
              "efficiency" | "blowup" | "twopop-regimes" | "compare-fdm",
      "domain":    {"v_reset": 1.0, "v_threshold": 2.0},          # optional
      "model":     one-population {"population": "one", "a0", "a1", "b"}
                   or two-population {"population": "two", "b_e_to_e", ...},
      "initial":   {"v0", "sigma0_sq"} or {"e": {...}, "i": {...}},
      "numerics":  {"m", "dt", "t_final", "dt_values", "m_values", ...},
      "reference": {"method": "fdm"|"self", "h", "richardson", "v_min"},
      "snapshot_times": [...],
      "blowup_threshold": ...,
      "detection": {"warmup_fraction", "steady_window_fraction",
                    "steady_fluctuation", "peak_amplitude_fraction",
                    "peak_spacing_tolerance"},
      "sweep":     {"b_e_to_e": [...]}                  # twopop-regimes only
    }

Values mirror the canonical experiment tables; every default used is echoed
into the output headers.
"""

from __future__ import annotations

import json
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .assembly import assemble, normalize_gaussian
from .basis import BasisSet, Domain
from .errors import ConfigurationError
from .fdm import FdmGrid, cfl_timestep, fdm_reference, fdm_reference_twopop, fdm_solve
from .norms import l2_distance, linf_distance, norm_grid
from .onepop import OnePopParams, solve
from .records import emit_run_record, emit_snapshot, emit_table, emit_twopop_record
from .twopop import TwoPopParams, solve_twopop

SCHEMA_VERSION = 1

EXPERIMENT_KINDS = (
    "convergence-time",
    "convergence-space",
    "stability-grid",
    "efficiency",
    "blowup",
    "twopop-regimes",
    "compare-fdm",
)

_DETECTION_DEFAULTS = {
    "warmup_fraction": 0.2,
    "steady_window_fraction": 0.2,
    "steady_fluctuation": 0.01,
    "peak_amplitude_fraction": 0.05,
    "peak_spacing_tolerance": 0.2,
}


@dataclass
class ExperimentConfig:
    kind: str
    domain: Domain
    model: dict
    initial: dict
    numerics: dict
    reference: dict
    snapshot_times: tuple
    blowup_threshold: float
    detection: dict
    sweep: dict
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def two_population(self) -> bool:
        return self.model.get("population") == "two"


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigurationError(f"unsupported config schema {raw.get('schema')!r}")
    kind = raw.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"unknown experiment kind {kind!r}")

    dom_raw = raw.get("domain", {})
    domain = Domain(
        v_reset=dom_raw.get("v_reset", 1.0),
        v_threshold=dom_raw.get("v_threshold", 2.0),
        beta=dom_raw.get("beta"),
    )
    model = dict(raw.get("model", {}))
    if model.get("population") not in ("one", "two"):
        raise ConfigurationError("model.population must be 'one' or 'two'")
    initial = dict(raw.get("initial", {}))
    numerics = dict(raw.get("numerics", {}))
    detection = {**_DETECTION_DEFAULTS, **raw.get("detection", {})}

    cfg = ExperimentConfig(
        kind=kind,
        domain=domain,
        model=model,
        initial=initial,
        numerics=numerics,
        reference=dict(raw.get("reference", {"method": "fdm", "h": 1.0 / 512.0, "richardson": True})),
        snapshot_times=tuple(raw.get("snapshot_times", ())),
        blowup_threshold=float(raw.get("blowup_threshold", 1e3)),
        detection=detection,
        sweep=dict(raw.get("sweep", {})),
        raw=raw,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    num = cfg.numerics
    dt = num.get("dt")
    t_final = num.get("t_final")
    if cfg.kind in ("convergence-time",):
        ladder = num.get("dt_values")
        if not ladder:
            raise ConfigurationError("convergence-time needs numerics.dt_values")
        if any(dtv <= 0 for dtv in ladder):
            raise ConfigurationError("dt_values must be positive")
        # equal neighbours are tolerated and yield a NaN order sentinel
        for a, b in zip(ladder[:-1], ladder[1:]):
            if b > a:
                raise ConfigurationError("dt_values must be non-increasing")
    if cfg.kind in ("convergence-space", "stability-grid"):
        if not num.get("m_values"):
            raise ConfigurationError(f"{cfg.kind} needs numerics.m_values")
    if cfg.kind == "stability-grid" and not num.get("dt_values"):
        raise ConfigurationError("stability-grid needs numerics.dt_values")
    if cfg.kind == "twopop-regimes" and not cfg.sweep.get("b_e_to_e"):
        raise ConfigurationError("twopop-regimes needs sweep.b_e_to_e")
    if dt is not None and t_final is not None:
        _check_divisible(dt, t_final, "t_final")
        for ts in cfg.snapshot_times:
            _check_divisible(dt, ts, f"snapshot time {ts}")
            if ts > t_final:
                raise ConfigurationError(f"snapshot time {ts} exceeds t_final={t_final}")
    if t_final is not None:
        for dtv in num.get("dt_values", ()):
            _check_divisible(dtv, t_final, "t_final")
    if cfg.two_population:
        for dtv in [dt] if dt is not None else []:
            _twopop_params(cfg).delay_lags(dtv)
        for dtv in num.get("dt_values", ()):
            _twopop_params(cfg).delay_lags(dtv)


def _check_divisible(dt: float, t: float, what: str) -> None:
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ConfigurationError(f"{what}={t} is not an integer multiple of dt={dt}")


def _onepop_params(cfg: ExperimentConfig) -> OnePopParams:
    m = cfg.model
    return OnePopParams(a0=m.get("a0", 1.0), a1=m.get("a1", 0.0), b=m.get("b", 0.0))


def _twopop_params(cfg: ExperimentConfig, b_e_to_e: float | None = None) -> TwoPopParams:
    m = dict(cfg.model)
    m.pop("population", None)
    if b_e_to_e is not None:
        m["b_e_to_e"] = b_e_to_e
    return TwoPopParams(**m)


def _initial_one(cfg: ExperimentConfig, domain: Domain):
    ini = cfg.initial
    return normalize_gaussian(ini.get("v0", -1.0), ini.get("sigma0_sq", 0.5), domain)


def _initial_two(cfg: ExperimentConfig, domain: Domain):
    ini = cfg.initial
    e = ini.get("e", {"v0": -1.0, "sigma0_sq": 0.5})
    i = ini.get("i", {"v0": -1.0, "sigma0_sq": 0.5})
    return (
        normalize_gaussian(e["v0"], e["sigma0_sq"], domain),
        normalize_gaussian(i["v0"], i["sigma0_sq"], domain),
    )


def _provenance(cfg: ExperimentConfig) -> dict:
    meta = {"schema": SCHEMA_VERSION, "kind": cfg.kind}
    for key, value in sorted(cfg.model.items()):
        meta[f"model.{key}"] = value
    for key, value in sorted(cfg.numerics.items()):
        meta[f"numerics.{key}"] = value
    for key, value in sorted(cfg.reference.items()):
        meta[f"reference.{key}"] = value
    meta["blowup_threshold"] = cfg.blowup_threshold
    return meta


# ---------------------------------------------------------------------------
# reference solutions


def _reference_density(cfg: ExperimentConfig, t_final: float):
    """Reference density (one population) on the comparison grid."""
    ref = cfg.reference
    if ref.get("method", "fdm") == "fdm":
        return fdm_reference(
            _initial_one(cfg, cfg.domain),
            _onepop_params(cfg),
            cfg.domain,
            t_final,
            h=ref.get("h", 1.0 / 512.0),
            v_min=ref.get("v_min", -6.0),
            richardson=ref.get("richardson", True),
        )
    # self reference: the scheme itself at dt/16 of the finest step in play
    ladder = cfg.numerics.get("dt_values") or [cfg.numerics["dt"]]
    dt_ref = ref.get("dt", min(ladder) / 16.0)
    m = cfg.numerics.get("m", 16)
    basis = BasisSet(cfg.domain, m)
    mats = assemble(basis)
    rec = solve(
        _initial_one(cfg, cfg.domain), _onepop_params(cfg), mats,
        dt=dt_ref, t_final=t_final, snapshot_times=(t_final,),
    )
    return rec.snapshots[0].density


def _reference_density_two(cfg: ExperimentConfig, t_final: float):
    ref = cfg.reference
    ic_e, ic_i = _initial_two(cfg, cfg.domain)
    if ref.get("method", "fdm") != "fdm":
        raise ConfigurationError("two-population ladders use the fdm reference")
    return fdm_reference_twopop(
        ic_e, ic_i, _twopop_params(cfg), cfg.domain, t_final,
        h=ref.get("h", 1.0 / 512.0),
        v_min=ref.get("v_min", -6.0),
        richardson=ref.get("richardson", True),
    )


# ---------------------------------------------------------------------------
# experiment cells (top level so they can cross a process boundary)


def _cell_onepop_final(raw_cfg: dict, m: int, dt: float, t_final: float):
    cfg = parse_config(raw_cfg)
    basis = BasisSet(cfg.domain, m)
    mats = assemble(basis, cfg.numerics.get("n_q"))
    rec = solve(
        _initial_one(cfg, cfg.domain), _onepop_params(cfg), mats,
        dt=dt, t_final=t_final, snapshot_times=(t_final,),
        blowup_threshold=cfg.blowup_threshold,
    )
    density = rec.snapshots[0].density if rec.snapshots else None
    return {"status": rec.status, "density": density, "wall_time": rec.wall_time}


def _cell_twopop_final(raw_cfg: dict, m: int, dt: float, t_final: float):
    cfg = parse_config(raw_cfg)
    basis = BasisSet(cfg.domain, m)
    mats = assemble(basis, cfg.numerics.get("n_q"))
    ic_e, ic_i = _initial_two(cfg, cfg.domain)
    rec = solve_twopop(
        ic_e, ic_i, _twopop_params(cfg), mats, dt=dt, t_final=t_final,
        snapshot_times=(t_final,), blowup_threshold=cfg.blowup_threshold,
    )
    return {
        "status": rec.status,
        "density_e": rec.snapshots_e[0].density if rec.snapshots_e else None,
        "density_i": rec.snapshots_i[0].density if rec.snapshots_i else None,
        "wall_time": rec.wall_time,
    }


def _cell_regime(raw_cfg: dict, b_e_to_e: float):
    cfg = parse_config(raw_cfg)
    num = cfg.numerics
    basis = BasisSet(cfg.domain, num.get("m", 16))
    mats = assemble(basis, num.get("n_q"))
    ic_e, ic_i = _initial_two(cfg, cfg.domain)
    rec = solve_twopop(
        ic_e, ic_i, _twopop_params(cfg, b_e_to_e=b_e_to_e), mats,
        dt=num["dt"], t_final=num["t_final"], blowup_threshold=cfg.blowup_threshold,
    )
    result = classify_regime(rec, **cfg.detection)
    result["b_e_to_e"] = b_e_to_e
    result["record"] = rec
    return result


def _map_cells(fn, tasks, workers: int):
    """Deterministic keyed map over cells, optionally in processes."""
    if workers <= 1:
        return [fn(*args) for args in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *args) for args in tasks]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# regime classification


def classify_regime(
    record,
    warmup_fraction: float = 0.2,
    steady_window_fraction: float = 0.2,
    steady_fluctuation: float = 0.01,
    peak_amplitude_fraction: float = 0.05,
    peak_spacing_tolerance: float = 0.2,
) -> dict:
    """Label a two-population run as blow-up, periodic, steady or ambiguous.

    Pure function of the recorded series, so labels can be recomputed
    offline from the emitted CSVs.

    * blow-up: the run tripped the rate threshold.
    * periodic: after the warm-up window, the inhibitory rate has >= 3 local
      maxima of prominence >= ``peak_amplitude_fraction`` * mean whose mean
      height exceeds the series mean by the same fraction, with successive
      peak spacings within ``peak_spacing_tolerance`` of their mean.
    * steady: both rates fluctuate by less than ``steady_fluctuation``
      (relative) over the trailing window.
    """
    if record.status == "blow-up-detected":
        return {"regime": "blow-up", "trip_time_e": record.trip_time_e,
                "trip_time_i": record.trip_time_i}
    if record.status != "completed":
        return {"regime": "ambiguous", "reason": record.status}

    t = record.times
    start = int(math.floor(warmup_fraction * (t.size - 1)))
    sig = record.rate_i[start:]
    mean = float(np.mean(sig))
    prominence = peak_amplitude_fraction * abs(mean)
    peaks, props = find_peaks(sig, prominence=prominence if prominence > 0 else None)
    periodic = False
    spacing_spread = float("nan")
    amplitude = float("nan")
    if peaks.size >= 3:
        spacings = np.diff(t[start:][peaks])
        spacing_spread = float(np.max(np.abs(spacings - spacings.mean())) / spacings.mean())
        amplitude = float(np.mean(sig[peaks]) - mean)
        periodic = spacing_spread <= peak_spacing_tolerance and amplitude >= peak_amplitude_fraction * abs(mean)
    if periodic:
        return {
            "regime": "periodic",
            "n_peaks": int(peaks.size),
            "spacing_spread": spacing_spread,
            "amplitude": amplitude,
        }

    tail = int(math.floor((1.0 - steady_window_fraction) * (t.size - 1)))
    steady = True
    fluctuations = {}
    for name, series in (("e", record.rate_e), ("i", record.rate_i)):
        window = series[tail:]
        mean_w = float(np.mean(window))
        flux = float((np.max(window) - np.min(window)) / max(abs(mean_w), 1e-300))
        fluctuations[name] = flux
        steady = steady and flux < steady_fluctuation
    if steady:
        return {"regime": "steady", "fluctuation_e": fluctuations["e"],
                "fluctuation_i": fluctuations["i"]}
    return {
        "regime": "ambiguous",
        "n_peaks": int(peaks.size),
        "spacing_spread": spacing_spread,
        "fluctuation_e": fluctuations["e"],
        "fluctuation_i": fluctuations["i"],
    }


# ---------------------------------------------------------------------------
# experiment suites


def _orders(errors):
    out = [float("nan")]
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev > 0 and cur > 0 and prev != cur:
            out.append(math.log2(prev / cur))
        else:
            out.append(float("nan"))
    return out


def run_convergence_time(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Temporal-order ladder against the configured reference."""
    num = cfg.numerics
    ladder = list(num["dt_values"])
    t_final = num["t_final"]
    m = num.get("m", 16)
    grid = norm_grid(cfg.domain)
    results: dict = {}

    if cfg.two_population:
        ref_e, ref_i = _reference_density_two(cfg, t_final)
        cells = _map_cells(_cell_twopop_final, [(cfg.raw, m, dt, t_final) for dt in ladder], workers)
        for tag, ref in (("e", ref_e), ("i", ref_i)):
            l2 = [l2_distance(c[f"density_{tag}"], ref, grid) for c in cells]
            linf = [linf_distance(c[f"density_{tag}"], ref) for c in cells]
            table = {
                "dt": ladder,
                "l2_error": l2,
                "order_l2": _orders(l2),
                "linf_error": linf,
                "order_linf": _orders(linf),
            }
            emit_table(os.path.join(out_dir, f"convergence_time_{tag}.csv"), table, _provenance(cfg))
            results[tag] = table
    else:
        ref = _reference_density(cfg, t_final)
        cells = _map_cells(_cell_onepop_final, [(cfg.raw, m, dt, t_final) for dt in ladder], workers)
        l2 = [l2_distance(c["density"], ref, grid) for c in cells]
        linf = [linf_distance(c["density"], ref) for c in cells]
        table = {
            "dt": ladder,
            "l2_error": l2,
            "order_l2": _orders(l2),
            "linf_error": linf,
            "order_linf": _orders(linf),
        }
        emit_table(os.path.join(out_dir, "convergence_time.csv"), table, _provenance(cfg))
        results["one"] = table
    return results


def run_convergence_space(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Expansion-number ladder at fixed dt; odd and even series separately."""
    num = cfg.numerics
    m_values = list(num["m_values"])
    dt = num["dt"]
    t_final = num["t_final"]
    grid = norm_grid(cfg.domain)
    ref = _reference_density(cfg, t_final)
    cells = _map_cells(_cell_onepop_final, [(cfg.raw, m, dt, t_final) for m in m_values], workers)
    errors = {m: l2_distance(c["density"], ref, grid) for m, c in zip(m_values, cells)}

    results = {}
    for parity, label in ((1, "odd"), (0, "even")):
        ms = [m for m in m_values if m % 2 == parity]
        errs = [errors[m] for m in ms]
        lns = [math.log(e) for e in errs]
        slope = float("nan")
        if len(ms) >= 2:
            slope = float(np.polyfit(np.asarray(ms, float), np.asarray(lns), 1)[0])
        emit_table(
            os.path.join(out_dir, f"convergence_space_{label}.csv"),
            {"m": ms, "l2_error": errs, "ln_l2_error": lns},
            {**_provenance(cfg), "fit_slope": slope},
        )
        results[label] = {"m": ms, "l2_error": errs, "slope": slope}
    return results


def run_stability_grid(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Full (M, dt) error matrix; per-cell failures recorded, not fatal."""
    num = cfg.numerics
    m_values = list(num["m_values"])
    dt_values = list(num["dt_values"])
    t_final = num["t_final"]
    bound = float(cfg.raw.get("bound", 0.2))
    grid = norm_grid(cfg.domain)
    ref = _reference_density(cfg, t_final)

    tasks = [(cfg.raw, m, dt, t_final) for m in m_values for dt in dt_values]
    cells = _map_cells(_cell_onepop_final, tasks, workers)

    rows_m, rows_dt, errs, statuses, flags = [], [], [], [], []
    for (raw, m, dt, tf), cell in zip(tasks, cells):
        rows_m.append(m)
        rows_dt.append(dt)
        if cell["density"] is None or cell["status"] != "completed":
            errs.append(float("nan"))
            statuses.append(cell["status"])
            flags.append(1)
        else:
            e = l2_distance(cell["density"], ref, grid)
            errs.append(e)
            statuses.append(cell["status"])
            flags.append(int(not math.isfinite(e) or e > bound))
    emit_table(
        os.path.join(out_dir, "stability_grid.csv"),
        {"m": rows_m, "dt": rows_dt, "l2_error": errs, "status": statuses, "exceeds_bound": flags},
        {**_provenance(cfg), "bound": bound},
    )
    return {"m": rows_m, "dt": rows_dt, "l2_error": errs, "flags": flags}


def run_blowup(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Blow-up study: full rate series plus density snapshots."""
    num = cfg.numerics
    m = num.get("m", 16)
    basis = BasisSet(cfg.domain, m)
    mats = assemble(basis, num.get("n_q"))
    if cfg.two_population:
        ic_e, ic_i = _initial_two(cfg, cfg.domain)
        rec = solve_twopop(
            ic_e, ic_i, _twopop_params(cfg), mats, dt=num["dt"], t_final=num["t_final"],
            snapshot_times=cfg.snapshot_times, blowup_threshold=cfg.blowup_threshold,
        )
        emit_twopop_record(os.path.join(out_dir, "blowup_run.csv"), rec, _provenance(cfg))
        for tag, snaps in (("e", rec.snapshots_e), ("i", rec.snapshots_i)):
            for snap in snaps:
                emit_snapshot(os.path.join(out_dir, f"density_{tag}_t{snap.t:g}.csv"), snap)
        return {"record": rec}
    rec = solve(
        _initial_one(cfg, cfg.domain), _onepop_params(cfg), mats,
        dt=num["dt"], t_final=num["t_final"],
        snapshot_times=cfg.snapshot_times, blowup_threshold=cfg.blowup_threshold,
    )
    emit_run_record(os.path.join(out_dir, "blowup_run.csv"), rec, _provenance(cfg))
    for snap in rec.snapshots:
        emit_snapshot(os.path.join(out_dir, f"density_t{snap.t:g}.csv"), snap)
    return {"record": rec}


def run_twopop_regimes(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Sweep the excitatory self-coupling and classify each run."""
    values = list(cfg.sweep["b_e_to_e"])
    cells = _map_cells(_cell_regime, [(cfg.raw, v) for v in values], workers)
    regimes, trips_e, trips_i = [], [], []
    for cell in cells:
        regimes.append(cell["regime"])
        trips_e.append(cell.get("trip_time_e") or float("nan"))
        trips_i.append(cell.get("trip_time_i") or float("nan"))
        emit_twopop_record(
            os.path.join(out_dir, f"regime_b{cell['b_e_to_e']:g}.csv"),
            cell["record"],
            {**_provenance(cfg), "regime": cell["regime"]},
        )
    emit_table(
        os.path.join(out_dir, "regimes.csv"),
        {"b_e_to_e": values, "regime": regimes, "trip_time_e": trips_e, "trip_time_i": trips_i},
        _provenance(cfg),
    )
    return {v: c for v, c in zip(values, cells)}


def _median_wall_time(run_once, repetitions: int = 3) -> tuple:
    times, out = [], None
    for _ in range(repetitions):
        out = run_once()
        times.append(out.wall_time)
    return statistics.median(times), out


def run_efficiency(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Error-versus-time frontier: spectral M ladder and grid h ladder, each
    against its own refined reference; loop wall times are medians of 3."""
    num = cfg.numerics
    dt = num["dt"]
    t_final = num["t_final"]
    m_values = list(num.get("m_values", [4, 8, 12, 16]))
    h_values = list(num.get("h_values", [1.0 / 32, 1.0 / 64, 1.0 / 128]))
    reps = int(num.get("repetitions", 3))
    m_ref = int(num.get("reference_m", max(m_values) + 8))
    grid = norm_grid(cfg.domain)
    params = _onepop_params(cfg)
    ic = _initial_one(cfg, cfg.domain)

    ref_basis = BasisSet(cfg.domain, m_ref)
    ref_rec = solve(ic, params, assemble(ref_basis), dt=dt, t_final=t_final, snapshot_times=(t_final,))
    spectral_ref = ref_rec.snapshots[0].density

    methods, resolutions, errors, walls = [], [], [], []
    for m in m_values:
        mats = assemble(BasisSet(cfg.domain, m))
        wall, rec = _median_wall_time(
            lambda: solve(ic, params, mats, dt=dt, t_final=t_final, snapshot_times=(t_final,)),
            reps,
        )
        methods.append("spectral")
        resolutions.append(m)
        errors.append(l2_distance(rec.snapshots[0].density, spectral_ref, grid))
        walls.append(wall)

    h_ref = min(h_values) / 2.0
    fdm_ref = fdm_reference(ic, params, cfg.domain, t_final, h=h_ref,
                            v_min=cfg.reference.get("v_min", -6.0), richardson=True)
    for h in h_values:
        fgrid = FdmGrid.build(cfg.domain, v_min=cfg.reference.get("v_min", -6.0), h=h)
        bound = 0.9 * cfl_timestep(fgrid, params.a0 + params.a1, 1.0, params.b)
        n_steps = int(np.ceil(t_final / bound))
        dt_f = t_final / n_steps
        wall, rec = _median_wall_time(
            lambda: fdm_solve(ic, params, fgrid, dt_f, t_final), reps,
        )
        methods.append("fdm")
        resolutions.append(h)
        errors.append(l2_distance(rec.final_density, fdm_ref, grid))
        walls.append(wall)

    emit_table(
        os.path.join(out_dir, "efficiency.csv"),
        {"method": methods, "resolution": resolutions, "l2_error": errors, "wall_time_s": walls},
        _provenance(cfg),
    )
    return {"method": methods, "resolution": resolutions, "l2_error": errors, "wall_time_s": walls}


def run_compare_fdm(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    """Cross-method agreement and matched-error timing comparison."""
    num = cfg.numerics
    dt = num["dt"]
    t_final = num["t_final"]
    m = num.get("m", 16)
    fdm_h = num.get("fdm_h", 1.0 / 512.0)
    reps = int(num.get("repetitions", 3))
    grid = norm_grid(cfg.domain)
    params = _onepop_params(cfg)
    ic = _initial_one(cfg, cfg.domain)
    ref = _reference_density(cfg, t_final)

    mats = assemble(BasisSet(cfg.domain, m))
    wall_s, rec_s = _median_wall_time(
        lambda: solve(ic, params, mats, dt=dt, t_final=t_final, snapshot_times=(t_final,)), reps,
    )
    p_spec = rec_s.snapshots[0].density

    fgrid = FdmGrid.build(cfg.domain, v_min=cfg.reference.get("v_min", -6.0), h=fdm_h)
    bound = 0.9 * cfl_timestep(fgrid, params.a0 + params.a1, 1.0, params.b)
    dt_f = t_final / int(np.ceil(t_final / bound))
    wall_f, rec_f = _median_wall_time(lambda: fdm_solve(ic, params, fgrid, dt_f, t_final), reps)

    table = {
        "method": ["spectral", "fdm"],
        "resolution": [m, fdm_h],
        "l2_error_vs_reference": [
            l2_distance(p_spec, ref, grid),
            l2_distance(rec_f.final_density, ref, grid),
        ],
        "cross_l2_distance": [l2_distance(p_spec, rec_f.final_density, grid)] * 2,
        "wall_time_s": [wall_s, wall_f],
    }
    emit_table(os.path.join(out_dir, "compare_fdm.csv"), table, _provenance(cfg))
    return table


RUNNERS = {
    "convergence-time": run_convergence_time,
    "convergence-space": run_convergence_space,
    "stability-grid": run_stability_grid,
    "efficiency": run_efficiency,
    "blowup": run_blowup,
    "twopop-regimes": run_twopop_regimes,
    "compare-fdm": run_compare_fdm,
}


def run_experiment(cfg: ExperimentConfig, out_dir: str, workers: int = 1) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    result = RUNNERS[cfg.kind](cfg, out_dir, workers)
    result["_elapsed_s"] = time.perf_counter() - t0
    return result
