"""Explicit time integration with strong boundary enforcement.

The integrator advances the lapse-weighted electric component ``w = fe/beta``
together with ``fb`` using the classical four-stage Runge-Kutta scheme; after
every stage the magnetic normal-leg values on the boundary are zeroed, which
is an exact orthogonal projection onto the admissible subspace.  Constraint
norms, an energy functional, and an optional causal-support leak are sampled
into a monitor series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io, mesh, system

BOUNDARY_MODES = ("project_B", "periodic_test")
MAX_CFL = 0.9
SUPPORT_TOL = 1e-12
CLOSEDNESS_TOL = 1e-12
CONTINUITY_TOL = 1e-8
CONE_HALO_CELLS = 4.0


@dataclass(frozen=True)
class EvolveConfig:
    """Integration parameters.

    Args:
        t_final: end time (must exceed the grid's initial time).
        cfl: Courant number in (0, 0.9].
        boundary_mode: ``project_B`` zeroes the magnetic normal legs on the
            boundary after every stage; ``periodic_test`` requires an
            all-periodic grid and applies no boundary handling.
        monitor_stride: steps between monitor samples.
        seed: recorded for provenance; the integrator itself is deterministic.
    """

    t_final: float
    cfl: float = 0.4
    boundary_mode: str = "project_B"
    monitor_stride: int = 1
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.cfl <= MAX_CFL:
            raise ValueError(f"cfl must lie in (0, {MAX_CFL}]: {self.cfl}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        if self.monitor_stride < 1:
            raise ValueError("monitor_stride must be at least 1")


@dataclass(frozen=True)
class SupportInfo:
    """Initial support ball and speed bound for the causal-cone monitor."""

    center: tuple
    radius: float
    c_max: float


@dataclass
class MonitorSeries:
    """Sampled diagnostics along an evolution.

    ``columns`` holds the canonical CSV table (time, rE, rB, rbdy, energy,
    cone_leak); ``cone_radius`` and ``state_max`` are retained for audits but
    not serialized.
    """

    columns: dict
    cone_radius: np.ndarray
    state_max: np.ndarray
    support: SupportInfo | None = None

    def __post_init__(self):
        times = np.asarray(self.columns["time"])
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("monitor time stamps must increase")

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.columns["time"])

    def write_csv(self, path) -> None:
        io.write_monitor_csv(path, self.columns)


@dataclass
class CheckResult:
    """One named validation check with its measured value and threshold."""

    name: str
    passed: bool
    measure: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "measure": float(self.measure),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def wave_speed_bound(grid: mesh.GridSpec, metric: mesh.MetricField, t_span, samples: int = 5) -> float:
    """Largest coordinate wave speed beta/a over a space-time probe grid."""
    t_lo, t_hi = t_span
    coords = [np.linspace(0.0, l, 9) for l in grid.lengths]
    pts = np.meshgrid(*coords, indexing="ij", sparse=True)
    c_max = 0.0
    for t in np.linspace(t_lo, t_hi, samples):
        beta = np.broadcast_to(np.asarray(metric.beta(t, *pts), dtype=float), tuple(len(c) for c in coords))
        c_max = max(c_max, float(np.max(beta)) / float(metric.conf(t)))
    return c_max


def stable_dt(grid: mesh.GridSpec, metric: mesh.MetricField, cfl: float, t_span) -> float:
    """Time step meeting the Courant bound cfl * h_min / c_max."""
    return cfl * min(grid.spacings) / wave_speed_bound(grid, metric, t_span)


def check_cfl(grid: mesh.GridSpec, metric: mesh.MetricField, cfg: EvolveConfig) -> CheckResult:
    """Named check that the grid's dt satisfies the configured Courant bound."""
    limit = stable_dt(grid, metric, cfg.cfl, (grid.t0, cfg.t_final))
    return CheckResult(
        name="cfl",
        passed=grid.dt <= limit * (1 + 1e-12),
        measure=grid.dt,
        threshold=limit,
        detail=f"dt must not exceed cfl*h_min/c_max = {limit!r}",
    )


def _boundary_layer_max(c: mesh.Cochain, margin_cells: int) -> float:
    """Largest |value| within margin_cells sites of any non-periodic face."""
    grid = c.grid
    worst = 0.0
    for s, arr in c.comps.items():
        for axis in range(grid.dim):
            if grid.periodic[axis]:
                continue
            sl_lo = [slice(None)] * grid.dim
            sl_hi = [slice(None)] * grid.dim
            sl_lo[axis] = slice(0, margin_cells)
            sl_hi[axis] = slice(arr.shape[axis] - margin_cells, None)
            worst = max(worst, float(np.abs(arr[tuple(sl_lo)]).max(initial=0.0)))
            worst = max(worst, float(np.abs(arr[tuple(sl_hi)]).max(initial=0.0)))
    return worst


def _source_rate(fn, t: float, delta: float = 1e-5):
    plus, minus = fn(t + delta), fn(t - delta)
    return (plus - minus) * (0.5 / delta)


def continuity_residuals(src: system.SourceData, metric: mesh.MetricField, t: float) -> dict:
    """Discrete continuity residual norms of the split sources at time t.

    The current pair satisfies ``(-1)^(n-k) d/dt (je/beta) = s * d(beta * hodge jb)``
    (the identity that transports the electric constraint), and the flux pair
    satisfies ``d/dt zb = d(hodge ze)`` together with ``d zb = 0``.  Residual
    norms are keyed by which identity they test; absent degrees give 0.0.
    """
    grid, k, n = src.grid, src.k, src.grid.n
    ssign = system.source_sign(n, k)
    out = {"charge": 0.0, "flux": 0.0, "flux_closed": 0.0}

    jb = src.jb(t) if src.jb is not None else mesh.zero_cochain(grid, k - 1, True)
    if k >= 2:
        spatial = mesh.d_sigma(mesh.multiply_scalar(mesh.hodge_sigma(jb, t, metric), metric.beta, t))
        if src.je is not None:
            je_rate = _source_rate(lambda tt: mesh.multiply_scalar(src.je(tt), lambda t_, *x: 1.0 / metric.beta(t_, *x), tt), t)
            charge = je_rate * float((-1) ** (n - k)) - spatial * ssign
        else:
            charge = spatial * (-ssign)
        out["charge"] = mesh.norm_sigma(charge, t, metric)

    ze = src.ze(t) if src.ze is not None else mesh.zero_cochain(grid, n - 1 - k, False)
    if k <= n - 2:
        spatial = mesh.d_sigma(mesh.hodge_sigma(ze, t, metric))
        if src.zb is not None:
            zb_rate = _source_rate(src.zb, t)
            flux = zb_rate - spatial
            zb_now = src.zb(t)
            if zb_now.degree + 1 <= grid.dim:
                out["flux_closed"] = mesh.norm_sigma(mesh.d_sigma(zb_now), t, metric)
        else:
            flux = spatial * (-1.0)
        out["flux"] = mesh.norm_sigma(flux, t, metric)
    return out


def validate_problem(
    s0: system.FieldState,
    src: system.SourceData,
    grid: mesh.GridSpec,
    metric: mesh.MetricField | None = None,
    margin_cells: int = 2,
) -> ValidationReport:
    """Check the well-posedness hypotheses on initial data and sources.

    Checks (each reported with its measured norm):
      * ``initial_support``: both components vanish within margin_cells of
        every boundary face;
      * ``source_window``: the source window starts at least two steps after
        the initial time (trivially satisfied when no sources are given);
      * ``closed_fb`` / ``closed_fe``: the magnetic component and the
        lapse-weighted electric component are coboundary-closed;
      * ``continuity_charge`` / ``continuity_flux``: split continuity
        residuals of the sources at the window midpoint;
      * ``beta_positive``: sampled lapse stays positive.
    """
    metric = metric if metric is not None else mesh.unit_metric()
    report = ValidationReport()

    sup = max(_boundary_layer_max(s0.fe, margin_cells), _boundary_layer_max(s0.fb, margin_cells))
    report.checks.append(
        CheckResult(
            "initial_support",
            sup <= SUPPORT_TOL,
            sup,
            SUPPORT_TOL,
            "initial support meets the boundary" if sup > SUPPORT_TOL else "",
        )
    )

    has_sources = any(f is not None for f in (src.je, src.jb, src.ze, src.zb))
    t_lo = src.window[0]
    window_ok = (not has_sources) or (t_lo >= grid.t0 + 2 * grid.dt)
    report.checks.append(
        CheckResult(
            "source_window",
            window_ok,
            float(t_lo) if np.isfinite(t_lo) else 0.0,
            grid.t0 + 2 * grid.dt,
            "" if window_ok else "source window must start after the initial slice",
        )
    )

    k, n = s0.k, grid.n
    if s0.fb.degree + 1 <= grid.dim:
        closed_b = mesh.norm_sigma(mesh.d_sigma(s0.fb), s0.t, metric)
    else:
        closed_b = 0.0
    report.checks.append(CheckResult("closed_fb", closed_b < CLOSEDNESS_TOL, closed_b, CLOSEDNESS_TOL))

    w = mesh.multiply_scalar(s0.fe, lambda t, *x: 1.0 / metric.beta(t, *x), s0.t)
    if w.degree + 1 <= grid.dim:
        closed_e = mesh.norm_sigma(mesh.d_sigma(w), s0.t, metric)
    else:
        closed_e = 0.0
    report.checks.append(CheckResult("closed_fe", closed_e < CLOSEDNESS_TOL, closed_e, CLOSEDNESS_TOL))

    if has_sources and np.isfinite(src.window).all():
        t_mid = 0.5 * (src.window[0] + src.window[1])
        cont = continuity_residuals(src, metric, t_mid)
    else:
        cont = {"charge": 0.0, "flux": 0.0, "flux_closed": 0.0}
    report.checks.append(
        CheckResult("continuity_charge", cont["charge"] < CONTINUITY_TOL, cont["charge"], CONTINUITY_TOL)
    )
    flux_measure = max(cont["flux"], cont["flux_closed"])
    report.checks.append(
        CheckResult("continuity_flux", flux_measure < CONTINUITY_TOL, flux_measure, CONTINUITY_TOL)
    )

    coords = [np.linspace(0.0, l, 9) for l in grid.lengths]
    pts = np.meshgrid(*coords, indexing="ij", sparse=True)
    beta_min = float(np.min(np.broadcast_to(np.asarray(metric.beta(s0.t, *pts), dtype=float), tuple(len(c) for c in coords))))
    report.checks.append(CheckResult("beta_positive", beta_min > 0.0, beta_min, 0.0))
    return report


def _project(fb: mesh.Cochain, boundary_mode: str) -> mesh.Cochain:
    if boundary_mode == "project_B" and not all(fb.grid.periodic):
        return mesh.project_normal_flux(fb)
    return fb


def _rhs(t, w, fb, src, metric, k):
    n = w.grid.n
    eps = system.eps_sign(n, k)
    rhs_e, rhs_b = system.rhs_sources(src, t, metric)
    curl_b = mesh.d_sigma(mesh.hodge_sigma(mesh.multiply_scalar(fb, metric.beta, t), t, metric))
    dw = mesh.multiply_scalar(rhs_e, metric.beta, t) + curl_b * float(-eps)
    curl_e = mesh.d_sigma(mesh.hodge_sigma(mesh.multiply_scalar(w, metric.beta, t), t, metric))
    dfb = curl_e + rhs_b
    return dw, dfb


def _rk4_step(t, w, fb, src, metric, k, dt, boundary_mode):
    fb = _project(fb, boundary_mode)
    k1w, k1b = _rhs(t, w, fb, src, metric, k)
    k2w, k2b = _rhs(
        t + dt / 2, w + k1w * (dt / 2), _project(fb + k1b * (dt / 2), boundary_mode), src, metric, k
    )
    k3w, k3b = _rhs(
        t + dt / 2, w + k2w * (dt / 2), _project(fb + k2b * (dt / 2), boundary_mode), src, metric, k
    )
    k4w, k4b = _rhs(t + dt, w + k3w * dt, _project(fb + k3b * dt, boundary_mode), src, metric, k)
    w_new = w + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0)
    fb_new = _project(fb + (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (dt / 6.0), boundary_mode)
    return w_new, fb_new


def _to_w(s: system.FieldState, metric: mesh.MetricField) -> mesh.Cochain:
    return mesh.multiply_scalar(s.fe, lambda t, *x: 1.0 / metric.beta(t, *x), s.t)


def _to_state(t, w, fb, metric, k) -> system.FieldState:
    fe = mesh.multiply_scalar(w, metric.beta, t)
    return system.FieldState(t, fe, fb, k)


def operator_matrix(
    grid: mesh.GridSpec,
    k: int,
    metric: mesh.MetricField,
    t: float = 0.0,
    boundary_mode: str = "project_B",
) -> np.ndarray:
    """Dense matrix of the semi-discrete generator at frozen time t.

    Acts on the stacked vector [w_flat, fb_flat] of the evolved variables
    (w = fe/beta); with project_B the generator is conjugated by the boundary
    projection, so its exponential propagates admissible data exactly.  Used
    as an oracle against the stepped integrator and for reference histories.
    """
    n = grid.n
    src = system.zero_sources(grid, k)
    nw = mesh.cochain_size(grid, n - k, False)
    nb = mesh.cochain_size(grid, k, True)
    size = nw + nb
    mat = np.zeros((size, size))
    for j in range(size):
        col = np.zeros(size)
        col[j] = 1.0
        w = mesh.unflatten(grid, n - k, False, col[:nw])
        fb = _project(mesh.unflatten(grid, k, True, col[nw:]), boundary_mode)
        dw, dfb = _rhs(t, w, fb, src, metric, k)
        mat[:, j] = np.concatenate([mesh.flatten(dw), mesh.flatten(_project(dfb, boundary_mode))])
    return mat


def step(
    s: system.FieldState,
    src: system.SourceData,
    metric: mesh.MetricField,
    dt: float,
    boundary_mode: str = "project_B",
) -> system.FieldState:
    """One Runge-Kutta step with per-stage boundary projection.

    Raises:
        ValueError: when dt exceeds the hard Courant bound 0.9*h_min/c_max.
    """
    grid = s.grid
    limit = stable_dt(grid, metric, MAX_CFL, (s.t, s.t + dt))
    if dt > limit * (1 + 1e-12):
        raise ValueError(f"cfl violation: dt={dt!r} exceeds {limit!r}")
    w = _to_w(s, metric)
    w_new, fb_new = _rk4_step(s.t, w, s.fb, src, metric, s.k, dt, boundary_mode)
    return _to_state(s.t + dt, w_new, fb_new, metric, s.k)


class InstabilityError(RuntimeError):
    """Raised when the state leaves float range; carries the last stable data."""

    def __init__(self, t_last: float, state_last, series):
        super().__init__(f"evolution became non-finite after t={t_last!r}")
        self.t_last = t_last
        self.state_last = state_last
        self.series = series


def energy(s: system.FieldState, metric: mesh.MetricField) -> float:
    """Quadratic diagnostic: the time-leg symbol applied to the state.

    Equal to pair(fe, fe) with weight 1/beta^2 plus pair(fb, fb); positive
    definite, and exactly the sum of squared component norms when beta = 1.
    """
    inv_b2 = lambda t, *x: 1.0 / np.asarray(metric.beta(t, *x)) ** 2
    return mesh.pair_sigma(s.fe, s.fe, s.t, metric, weight=inv_b2) + mesh.pair_sigma(
        s.fb, s.fb, s.t, metric
    )


def _cone_leak(s: system.FieldState, support: SupportInfo, t0: float) -> tuple[float, float]:
    grid = s.grid
    radius = support.radius + support.c_max * (s.t - t0) + CONE_HALO_CELLS * max(grid.spacings)
    center = np.asarray(support.center, dtype=float)
    leak = 0.0
    for c in (s.fe, s.fb):
        for comp, arr in c.comps.items():
            coords = mesh.component_coords(grid, comp, c.dual)
            pts = np.meshgrid(*coords, indexing="ij", sparse=True)
            dist2 = sum((p - center[i]) ** 2 for i, p in enumerate(pts))
            outside = np.broadcast_to(dist2, arr.shape) > radius**2
            if np.any(outside):
                leak = max(leak, float(np.abs(arr[outside]).max()))
    return leak, radius


def _state_maxabs(s: system.FieldState) -> float:
    return max(mesh.max_pointwise(s.fe), mesh.max_pointwise(s.fb))


def _monitor_row(s, src, metric, support, t0):
    r_e, r_b, r_bdy = system.constraint_residuals(s, src, metric)
    row = {
        "time": s.t,
        "rE": mesh.norm_sigma(r_e, s.t, metric) if r_e is not None else 0.0,
        "rB": mesh.norm_sigma(r_b, s.t, metric) if r_b is not None else 0.0,
        "rbdy": max(mesh.norm_sigma(c, s.t, metric) for c in r_bdy.values()) if r_bdy else 0.0,
        "energy": energy(s, metric),
    }
    if support is not None:
        leak, radius = _cone_leak(s, support, t0)
    else:
        leak, radius = 0.0, np.inf
    row["cone_leak"] = leak
    return row, radius, _state_maxabs(s)


def evolve(
    s0: system.FieldState,
    src: system.SourceData,
    metric: mesh.MetricField,
    cfg: EvolveConfig,
    support: SupportInfo | None = None,
) -> tuple[system.FieldState, MonitorSeries]:
    """Integrate from the initial state to cfg.t_final with monitoring.

    The grid's dt is used as the step (the final step is shortened to land
    exactly on t_final) and must satisfy the configured Courant bound.
    Callers are responsible for running validate_problem first; the command
    line driver does.

    Raises:
        ValueError: cfl violation or non-increasing time span.
        InstabilityError: non-finite values; carries the last stable state.
    """
    grid = s0.grid
    if not cfg.t_final > s0.t:
        raise ValueError("t_final must exceed the initial time")
    if cfg.boundary_mode == "periodic_test" and not all(grid.periodic):
        raise ValueError("periodic_test mode requires an all-periodic grid")
    cfl_res = check_cfl(grid, metric, cfg)
    if not cfl_res.passed:
        raise ValueError(f"cfl violation: {cfl_res.detail}")

    dt = grid.dt
    n_steps = int(np.ceil((cfg.t_final - s0.t) / dt - 1e-9))
    w = _to_w(s0, metric)
    fb = _project(s0.fb, cfg.boundary_mode)
    t = s0.t

    rows, radii, maxima = [], [], []
    row, radius, mx = _monitor_row(_to_state(t, w, fb, metric, s0.k), src, metric, support, s0.t)
    rows.append(row)
    radii.append(radius)
    maxima.append(mx)

    for i in range(n_steps):
        h = min(dt, cfg.t_final - t)
        w_new, fb_new = _rk4_step(t, w, fb, src, metric, s0.k, h, cfg.boundary_mode)
        t_new = cfg.t_final if i == n_steps - 1 else t + h
        state = _to_state(t_new, w_new, fb_new, metric, s0.k)
        if not (np.isfinite(mesh.max_pointwise(state.fe)) and np.isfinite(mesh.max_pointwise(state.fb))):
            series = _series_from(rows, radii, maxima, support)
            raise InstabilityError(t, _to_state(t, w, fb, metric, s0.k), series)
        w, fb, t = w_new, fb_new, t_new
        if (i + 1) % cfg.monitor_stride == 0 or i == n_steps - 1:
            row, radius, mx = _monitor_row(state, src, metric, support, s0.t)
            rows.append(row)
            radii.append(radius)
            maxima.append(mx)

    series = _series_from(rows, radii, maxima, support)
    return _to_state(t, w, fb, metric, s0.k), series


def _series_from(rows, radii, maxima, support) -> MonitorSeries:
    columns = {name: np.array([r[name] for r in rows]) for name in io.MONITOR_COLUMNS}
    return MonitorSeries(
        columns=columns,
        cone_radius=np.asarray(radii, dtype=float),
        state_max=np.asarray(maxima, dtype=float),
        support=support,
    )


@dataclass
class AuditVerdict:
    """Outcome of a monitored-series audit."""

    passed: bool
    measure: float
    threshold: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "measure": float(self.measure),
            "threshold": float(self.threshold),
            "detail": self.detail,
        }


CONE_LEAK_TOL = 1e-7


def support_audit(series: MonitorSeries, radius: float, c_max: float) -> AuditVerdict:
    """Verify the state stayed inside the causal cone of its initial support.

    Passes when every sampled leak outside radius + c_max*(t - t0) + 4h is
    below 1e-7 relative to the largest state magnitude seen.
    """
    if series.support is None:
        raise ValueError("series was not produced with a support monitor")
    if not (series.support.radius == radius and series.support.c_max == c_max):
        raise ValueError("audit parameters disagree with the monitored cone")
    scale = float(series.state_max.max())
    if scale == 0.0:
        return AuditVerdict(True, 0.0, CONE_LEAK_TOL, "zero state")
    worst = float(np.max(series.columns["cone_leak"])) / scale
    return AuditVerdict(worst < CONE_LEAK_TOL, worst, CONE_LEAK_TOL)


def constraint_propagation_audit(
    s0: system.FieldState,
    src: system.SourceData,
    metric: mesh.MetricField,
    cfg: EvolveConfig,
) -> dict:
    """Evolve and report how the constraint-violation norms transport.

    Theory predicts the residuals are advected, not amplified: their norms
    stay at the initial value up to integrator error.  The report carries the
    initial, final, and extremal norms plus relative drifts (relative to the
    initial norm when nonzero, else to the state scale).
    """
    final, series = evolve(s0, src, metric, cfg)
    out = {"t_final": final.t}
    scale = max(float(series.state_max.max()), 1e-300)
    for key in ("rE", "rB", "rbdy"):
        vals = series.columns[key]
        first, last = float(vals[0]), float(vals[-1])
        ref = max(first, scale)
        out[key] = {
            "initial": first,
            "final": last,
            "max": float(vals.max()),
            "relative_drift": abs(last - first) / ref,
        }
    out["state_scale"] = scale
    return out
