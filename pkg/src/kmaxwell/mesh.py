"""Cubical cochain complex on a box (or torus) slice with staggered families.

The slice is an axis-aligned box discretized into cells.  Two interleaved
cochain families live on it:

* the primal family (``dual=False``): a degree-k component with extent S
  is sampled at cell centers along the axes in S and at nodes (including
  the two faces) along the remaining axes;
* the dual family (``dual=True``): the staggering is reversed — nodes along
  the axes in S, centers along the rest.

Values are integral degrees of freedom: the entry of a component S at a site
approximates the integral of the form over the little k-cell spanned by the
S-axes there.  The coboundary is then pure incidence arithmetic (signed
differences, no mesh factors) and satisfies d∘d = 0 to rounding; on the dual
family the one-sided outputs at face nodes are defined to be zero, which is
exact for the flux-free boundary condition enforced by
:func:`project_normal_flux`.

The Hodge dual maps component S to its complement and swaps families; with
this staggering both live on the same index set, so the map is diagonal and
invertible, with weight ``eps(S) * a(t)^(m-2k) * prod(h_out) / prod(h_in)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import exterior


@dataclass(frozen=True)
class GridSpec:
    """Spacetime grid parameters: spatial box plus time step.

    Args:
        n: spacetime dimension (2 to 5); the slice has n-1 spatial axes.
        cells_per_axis: cells along each spatial axis (each >= 4).
        lengths: physical box size along each spatial axis.
        dt: time step used by the integrator and history containers.
        t0: initial time.
        periodic: per-axis periodicity; periodic axes have no boundary faces
            (testing mode — the physical setup is the box with boundary).
    """

    n: int
    cells_per_axis: tuple[int, ...]
    lengths: tuple[float, ...]
    dt: float
    t0: float = 0.0
    periodic: tuple[bool, ...] | None = None

    def __post_init__(self):
        if not 2 <= self.n <= 5:
            raise ValueError(f"n out of supported range [2,5]: {self.n}")
        object.__setattr__(self, "cells_per_axis", tuple(int(c) for c in self.cells_per_axis))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        m = self.n - 1
        if len(self.cells_per_axis) != m or len(self.lengths) != m:
            raise ValueError(f"expected {m} spatial axes for n={self.n}")
        if any(c < 4 for c in self.cells_per_axis):
            raise ValueError("each axis needs at least 4 cells")
        if any(v <= 0 for v in self.lengths):
            raise ValueError("axis lengths must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * m)
        else:
            object.__setattr__(self, "periodic", tuple(bool(p) for p in self.periodic))
            if len(self.periodic) != m:
                raise ValueError("periodic flags must match the spatial axes")

    @property
    def dim(self) -> int:
        """Number of spatial axes."""
        return self.n - 1

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(l / c for l, c in zip(self.lengths, self.cells_per_axis))


@dataclass
class MetricField:
    """Product metric data: lapse beta(t, x) and conformal factor a(t).

    The slice metric is ``a(t)^2`` times the flat box metric.  ``beta`` must
    broadcast over numpy coordinate arrays.  ``beta_dt`` is the analytic time
    derivative of the lapse; leaving it None declares the lapse
    time-independent (the operators never finite-difference the metric).

    Args:
        beta: callable ``beta(t, *coords) -> array`` (positive).
        conf: callable ``a(t) -> float`` (positive).
        beta_dt: optional callable with the same signature as ``beta``.
    """

    beta: Callable = lambda t, *x: 1.0
    conf: Callable = lambda t: 1.0
    beta_dt: Callable | None = None


def unit_metric() -> MetricField:
    return MetricField()


class Face(NamedTuple):
    """One boundary face of the box: spatial axis index and side (0 or 1)."""

    axis: int
    side: int


def faces(grid: GridSpec) -> list[Face]:
    """All boundary faces (periodic axes contribute none)."""
    out = []
    for axis in range(grid.dim):
        if not grid.periodic[axis]:
            out.append(Face(axis, 0))
            out.append(Face(axis, 1))
    return out


def face_grid(grid: GridSpec, face: Face) -> GridSpec:
    """The (m-1)-axis grid of one boundary face."""
    keep = [a for a in range(grid.dim) if a != face.axis]
    return GridSpec(
        n=grid.n - 1,
        cells_per_axis=tuple(grid.cells_per_axis[a] for a in keep),
        lengths=tuple(grid.lengths[a] for a in keep),
        dt=grid.dt,
        t0=grid.t0,
        periodic=tuple(grid.periodic[a] for a in keep),
    )


def subsets(grid: GridSpec, degree: int) -> tuple[tuple[int, ...], ...]:
    return exterior.basis_tuples(grid.dim, degree)


def component_shape(grid: GridSpec, subset: tuple[int, ...], dual: bool) -> tuple[int, ...]:
    shape = []
    for a in range(grid.dim):
        centers = (a in subset) != dual
        nc = grid.cells_per_axis[a]
        shape.append(nc if (centers or grid.periodic[a]) else nc + 1)
    return tuple(shape)


def component_coords(grid: GridSpec, subset: tuple[int, ...], dual: bool) -> list[np.ndarray]:
    """Per-axis sample coordinates of one component (centers or nodes)."""
    coords = []
    for a in range(grid.dim):
        h = grid.spacings[a]
        nc = grid.cells_per_axis[a]
        centers = (a in subset) != dual
        if centers:
            coords.append((np.arange(nc) + 0.5) * h)
        elif grid.periodic[a]:
            coords.append(np.arange(nc) * h)
        else:
            coords.append(np.arange(nc + 1) * h)
    return coords


def site_mesh(grid: GridSpec, subset: tuple[int, ...], dual: bool) -> list[np.ndarray]:
    """Sparse meshgrid of the component's sample sites."""
    return np.meshgrid(*component_coords(grid, subset, dual), indexing="ij", sparse=True)


def cell_measure(grid: GridSpec, subset: tuple[int, ...]) -> float:
    out = 1.0
    for a in subset:
        out *= grid.spacings[a]
    return out


@dataclass
class Cochain:
    """Discrete degree-k field: one value per k-cell of one staggered family.

    Args:
        grid: the slice grid.
        degree: form degree k, 0 <= k <= number of spatial axes.
        dual: False for the primal (electric-type) family, True for the
            dual (magnetic-type) family.
        comps: mapping extent-tuple -> ndarray in component_shape order.
    """

    grid: GridSpec
    degree: int
    dual: bool
    comps: dict[tuple[int, ...], np.ndarray]

    def __post_init__(self):
        m = self.grid.dim
        if not 0 <= self.degree <= m:
            raise ValueError(f"degree {self.degree} out of range [0, {m}]")
        want = subsets(self.grid, self.degree)
        if tuple(self.comps.keys()) != want:
            self.comps = {s: self.comps[s] for s in want}
        for s, arr in self.comps.items():
            shape = component_shape(self.grid, s, self.dual)
            if arr.shape != shape:
                raise ValueError(f"component {s}: expected shape {shape}, got {arr.shape}")

    def copy(self) -> "Cochain":
        return Cochain(self.grid, self.degree, self.dual, {s: a.copy() for s, a in self.comps.items()})

    def _check_match(self, other: "Cochain") -> None:
        if (self.grid, self.degree, self.dual) != (other.grid, other.degree, other.dual):
            raise ValueError("cochains live on different spaces")

    def __add__(self, other: "Cochain") -> "Cochain":
        self._check_match(other)
        return Cochain(
            self.grid, self.degree, self.dual,
            {s: self.comps[s] + other.comps[s] for s in self.comps},
        )

    def __sub__(self, other: "Cochain") -> "Cochain":
        self._check_match(other)
        return Cochain(
            self.grid, self.degree, self.dual,
            {s: self.comps[s] - other.comps[s] for s in self.comps},
        )

    def __mul__(self, scalar: float) -> "Cochain":
        scalar = float(scalar)
        return Cochain(self.grid, self.degree, self.dual, {s: a * scalar for s, a in self.comps.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "Cochain":
        return Cochain(self.grid, self.degree, self.dual, {s: -a for s, a in self.comps.items()})


def zero_cochain(grid: GridSpec, degree: int, dual: bool) -> Cochain:
    return Cochain(
        grid, degree, dual,
        {s: np.zeros(component_shape(grid, s, dual)) for s in subsets(grid, degree)},
    )


def random_cochain(grid: GridSpec, degree: int, dual: bool, rng: np.random.Generator) -> Cochain:
    return Cochain(
        grid, degree, dual,
        {s: rng.standard_normal(component_shape(grid, s, dual)) for s in subsets(grid, degree)},
    )


def sample_scalar(grid: GridSpec, subset: tuple[int, ...], dual: bool, fn, t: float) -> np.ndarray:
    """Evaluate a scalar callback fn(t, *coords) on one component's sites."""
    mesh = site_mesh(grid, subset, dual)
    value = np.asarray(fn(t, *mesh), dtype=float)
    shape = component_shape(grid, subset, dual)
    if value.shape != shape:
        value = np.broadcast_to(value, shape).copy()
    return value


def sample_cochain(grid: GridSpec, degree: int, dual: bool, component_fns, t: float = 0.0) -> Cochain:
    """Sample pointwise component functions into integral degrees of freedom.

    ``component_fns`` maps an extent tuple S to a callable ``f(t, *coords)``
    giving the S-component of the form; missing components are zero.  The
    stored value is the midpoint-rule integral: sample times the flat measure
    of the S-cell.

    Args:
        grid: target grid.
        degree: form degree.
        dual: target family.
        component_fns: mapping extent -> callable.
        t: time passed through to the callables.

    Returns:
        Cochain with de Rham (integral) degrees of freedom.
    """
    comps = {}
    for s in subsets(grid, degree):
        if s in component_fns:
            comps[s] = sample_scalar(grid, s, dual, component_fns[s], t) * cell_measure(grid, s)
        else:
            comps[s] = np.zeros(component_shape(grid, s, dual))
    return Cochain(grid, degree, dual, comps)


def multiply_scalar(c: Cochain, fn, t: float) -> Cochain:
    """Multiply a cochain pointwise by a scalar field sampled at its sites.

    The sites are the component sample locations, so diagonal operators
    (Hodge, lapse weights) commute with this multiplication exactly.
    """
    return Cochain(
        c.grid, c.degree, c.dual,
        {s: arr * sample_scalar(c.grid, s, c.dual, fn, t) for s, arr in c.comps.items()},
    )


def component_values(c: Cochain) -> dict[tuple[int, ...], np.ndarray]:
    """Pointwise component samples: degrees of freedom over cell measures."""
    return {s: arr / cell_measure(c.grid, s) for s, arr in c.comps.items()}


def max_pointwise(c: Cochain) -> float:
    """Sup norm of the pointwise component values."""
    return max(
        (float(np.max(np.abs(arr))) for arr in component_values(c).values()),
        default=0.0,
    )


def flatten(c: Cochain) -> np.ndarray:
    return np.concatenate([c.comps[s].ravel() for s in subsets(c.grid, c.degree)]) if c.comps else np.zeros(0)


def cochain_size(grid: GridSpec, degree: int, dual: bool) -> int:
    return sum(int(np.prod(component_shape(grid, s, dual))) for s in subsets(grid, degree))


def unflatten(grid: GridSpec, degree: int, dual: bool, vec: np.ndarray) -> Cochain:
    want = cochain_size(grid, degree, dual)
    if vec.size != want:
        raise ValueError(f"vector length {vec.size} does not match cochain size {want}")
    comps = {}
    offset = 0
    for s in subsets(grid, degree):
        shape = component_shape(grid, s, dual)
        size = int(np.prod(shape))
        comps[s] = vec[offset : offset + size].reshape(shape).astype(float, copy=True)
        offset += size
    return Cochain(grid, degree, dual, comps)


def _diff_node_to_center(arr: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return np.roll(arr, -1, axis=axis) - arr
    hi = [slice(None)] * arr.ndim
    lo = [slice(None)] * arr.ndim
    hi[axis] = slice(1, None)
    lo[axis] = slice(None, -1)
    return arr[tuple(hi)] - arr[tuple(lo)]


def _diff_center_to_node(arr: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return arr - np.roll(arr, 1, axis=axis)
    shape = list(arr.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    mid = [slice(None)] * arr.ndim
    mid[axis] = slice(1, -1)
    hi = [slice(None)] * arr.ndim
    lo = [slice(None)] * arr.ndim
    hi[axis] = slice(1, None)
    lo[axis] = slice(None, -1)
    out[tuple(mid)] = arr[tuple(hi)] - arr[tuple(lo)]
    return out


def d_sigma(c: Cochain) -> Cochain:
    """Mimetic coboundary: signed incidence differences, degree k -> k+1.

    On the primal family the differenced axis runs over nodes, so the
    stencil is complete.  On the dual family the differenced axis runs over
    centers and the outputs at the two face nodes are zero by definition
    (see the module docstring); d_sigma∘d_sigma vanishes to rounding on both
    families, and exactly on integer data.
    """
    m = c.grid.dim
    if c.degree >= m:
        raise ValueError("d_sigma: top-degree input")
    out = zero_cochain(c.grid, c.degree + 1, c.dual)
    for s, arr in c.comps.items():
        for b in range(m):
            if b in s:
                continue
            target = tuple(sorted(s + (b,)))
            sign = exterior.merge_sign((b,), s)
            if c.dual:
                diff = _diff_center_to_node(arr, b, c.grid.periodic[b])
            else:
                diff = _diff_node_to_center(arr, b, c.grid.periodic[b])
            out.comps[target] += sign * diff
    return out


def hodge_sigma(c: Cochain, t: float, metric: MetricField, orientation: int = 1) -> Cochain:
    """Diagonal Hodge dual on the slice: component S -> S^c, family swapped.

    The weight is ``eps(S) * a(t)^(m-2k) * prod(h_b, b not in S) /
    prod(h_a, a in S)`` per degree of freedom; ``orientation`` (+1 or -1)
    selects the slice orientation, used for faces with induced orientation.
    """
    m = c.grid.dim
    k = c.degree
    scale = float(metric.conf(t))
    conf_power = scale ** (m - 2 * k)
    out_comps = {}
    for s, arr in c.comps.items():
        comp = tuple(a for a in range(m) if a not in s)
        eps = exterior.complement_sign(m, s)
        factor = orientation * eps * conf_power * cell_measure(c.grid, comp) / cell_measure(c.grid, s)
        out_comps[comp] = factor * arr
    ordered = {s: out_comps[s] for s in subsets(c.grid, m - k)}
    return Cochain(c.grid, m - k, not c.dual, ordered)


def hodge_inverse_sigma(c: Cochain, t: float, metric: MetricField, orientation: int = 1) -> Cochain:
    """Inverse of hodge_sigma: hodge_inverse_sigma(hodge_sigma(c)) = c."""
    m = c.grid.dim
    sign = (-1) ** (c.degree * (m - c.degree))
    return sign * hodge_sigma(c, t, metric, orientation)


def codiff_sigma(c: Cochain, t: float, metric: MetricField) -> Cochain:
    """Codifferential ``(-1)^k * hodge^{-1} d hodge``, degree k -> k-1."""
    if c.degree < 1:
        raise ValueError("codiff_sigma: degree-0 input")
    inner = d_sigma(hodge_sigma(c, t, metric))
    return ((-1) ** c.degree) * hodge_inverse_sigma(inner, t, metric)


def _apply_trapezoid(arr: np.ndarray, c: Cochain, s: tuple[int, ...]) -> np.ndarray:
    out = arr
    for a in range(c.grid.dim):
        centers = (a in s) != c.dual
        if centers or c.grid.periodic[a]:
            continue
        w = np.ones(out.shape[a])
        w[0] = 0.5
        w[-1] = 0.5
        shape = [1] * out.ndim
        shape[a] = out.shape[a]
        out = out * w.reshape(shape)
    return out


def pair_sigma(a: Cochain, b: Cochain, t: float, metric: MetricField, weight=None) -> float:
    """Slice inner product sum over cells: symmetric, positive definite.

    Node-sampled directions get trapezoidal 1/2 end weights so that, e.g.,
    the pairing of two unit 0-cochains is exactly the box volume.  The
    optional ``weight`` is a scalar callback ``w(t, *coords)`` multiplied in
    pointwise (used for lapse-weighted pairings).

    Args:
        a: first cochain.
        b: second cochain (same grid, degree, and family).
        t: slice time (enters through the conformal factor and weight).
        metric: slice metric data.
        weight: optional scalar field callback.

    Returns:
        The pairing value as a float.
    """
    a._check_match(b)
    m = a.grid.dim
    k = a.degree
    conf_power = float(metric.conf(t)) ** (m - 2 * k)
    total = 0.0
    for s in subsets(a.grid, k):
        prod = a.comps[s] * b.comps[s]
        prod = _apply_trapezoid(prod, a, s)
        if weight is not None:
            prod = prod * sample_scalar(a.grid, s, a.dual, weight, t)
        rho = conf_power * cell_measure(a.grid, tuple(x for x in range(m) if x not in s)) / cell_measure(a.grid, s)
        total += rho * float(np.sum(prod))
    return total


def norm_sigma(c: Cochain, t: float, metric: MetricField) -> float:
    """Slice L2 norm induced by pair_sigma."""
    return float(np.sqrt(max(pair_sigma(c, c, t, metric), 0.0)))


def _face_slice(arr: np.ndarray, axis: int, side: int) -> np.ndarray:
    sl = [slice(None)] * arr.ndim
    sl[axis] = -1 if side == 1 else 0
    return arr[tuple(sl)]


def _drop_axis(subset: tuple[int, ...], axis: int) -> tuple[int, ...]:
    return tuple(a - 1 if a > axis else a for a in subset if a != axis)


def trace_pullback(c: Cochain, face: Face) -> Cochain:
    """Tangential restriction (pullback) of a primal cochain to one face.

    Components whose extent contains the face axis are annihilated; the rest
    restrict their node values on the face.  Only the primal family carries
    exact face values for its tangential components.
    """
    if c.dual:
        raise ValueError("trace_pullback: primal-family cochain required")
    if c.grid.periodic[face.axis]:
        raise ValueError("trace_pullback: periodic axis has no face")
    m = c.grid.dim
    if c.degree > m - 1:
        raise ValueError("trace_pullback: degree exceeds the face dimension")
    fg = face_grid(c.grid, face)
    out = zero_cochain(fg, c.degree, dual=False)
    for s, arr in c.comps.items():
        if face.axis in s:
            continue
        out.comps[_drop_axis(s, face.axis)] = _face_slice(arr, face.axis, face.side).copy()
    return out


def normal_contract(c: Cochain, face: Face, t: float, metric: MetricField) -> Cochain:
    """Interior product with the outward unit normal, restricted to a face.

    Only components whose extent contains the face axis contribute.  For the
    dual family those components carry exact face-node values; for the
    primal family the nearest center layer is used (first-layer proxy, one
    half cell inside).

    Args:
        c: cochain of degree >= 1.
        face: boundary face.
        t: time (the unit normal carries 1/a(t)).
        metric: slice metric data.

    Returns:
        Face cochain of degree k-1 in the same family as ``c``.
    """
    if c.degree < 1:
        raise ValueError("normal_contract: degree-0 input")
    if c.grid.periodic[face.axis]:
        raise ValueError("normal_contract: periodic axis has no face")
    side_sign = 1.0 if face.side == 1 else -1.0
    h_axis = c.grid.spacings[face.axis]
    scale = float(metric.conf(t))
    fg = face_grid(c.grid, face)
    out = zero_cochain(fg, c.degree - 1, dual=c.dual)
    for s, arr in c.comps.items():
        if face.axis not in s:
            continue
        pos = s.index(face.axis)
        factor = side_sign * ((-1.0) ** pos) / (scale * h_axis)
        out.comps[_drop_axis(s, face.axis)] = factor * _face_slice(arr, face.axis, face.side)
    return out


def induced_orientation(face: Face) -> int:
    """Orientation sign of a face under the outward-normal-first convention."""
    sign = (-1) ** face.axis
    return sign if face.side == 1 else -sign


def project_normal_flux(c: Cochain) -> Cochain:
    """Zero the face-node values of every normal-leg component (dual family).

    This is the orthogonal projection onto the flux-free boundary subspace:
    the affected degrees of freedom sit exactly on the faces, so the
    projection is idempotent and commutes with the interior dynamics.
    """
    if not c.dual:
        raise ValueError("project_normal_flux: dual-family cochain required")
    out = c.copy()
    for axis in range(c.grid.dim):
        if c.grid.periodic[axis]:
            continue
        for s, arr in out.comps.items():
            if axis not in s:
                continue
            lo = [slice(None)] * arr.ndim
            hi = [slice(None)] * arr.ndim
            lo[axis] = 0
            hi[axis] = -1
            arr[tuple(lo)] = 0.0
            arr[tuple(hi)] = 0.0
    return out


def normal_flux_maxabs(c: Cochain) -> float:
    """Largest face-node normal-leg value of a dual cochain (0 when projected)."""
    if not c.dual:
        raise ValueError("normal_flux_maxabs: dual-family cochain required")
    worst = 0.0
    for axis in range(c.grid.dim):
        if c.grid.periodic[axis]:
            continue
        for s, arr in c.comps.items():
            if axis not in s:
                continue
            for side in (0, 1):
                worst = max(worst, float(np.max(np.abs(_face_slice(arr, axis, side)), initial=0.0)))
    return worst


def boundary_pairing(a: Cochain, b: Cochain, t: float, metric: MetricField) -> float:
    """Sum over faces of <trace_pullback(a), normal_contract(b)> on the face.

    This is the boundary term of the discrete summation-by-parts identity
    ``<d a, b> - <a, codiff b> = boundary_pairing(a, b)`` for primal a of
    degree k-1 and primal b of degree k.
    """
    total = 0.0
    for face in faces(a.grid):
        ta = trace_pullback(a, face)
        nb = normal_contract(b, face, t, metric)
        total += pair_sigma(ta, nb, t, metric)
    return total
