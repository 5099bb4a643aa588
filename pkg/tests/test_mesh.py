"""Tests for the staggered cubical cochain complex.

Oracles:
  * coboundary signs: Green's theorem — on sampled exact edge integrals the
    degree-2 output must equal the hand-computed circulation of each cell;
  * Hodge weights: cross-validation against the independently tested fiber
    algebra (constant cochains are single fibers);
  * incidence examples and boundary slices: frozen by hand below.
"""

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kmaxwell import exterior, mesh
from kmaxwell.tolerances import FIBER_MATCH_TOL, SBP_TOL

RNG_SEED = 481207
ROUNDING_TOL = 1e-13


def box_grid(cells, lengths=None, periodic=None, dt=0.05):
    cells = tuple(cells)
    if lengths is None:
        lengths = tuple(float(c) for c in cells)
    return mesh.GridSpec(
        n=len(cells) + 1, cells_per_axis=cells, lengths=lengths, dt=dt, periodic=periodic
    )


class TestGridSpec:
    def test_spacings_and_dim(self):
        g = box_grid((4, 8), lengths=(1.0, 2.0))
        assert g.dim == 2
        np.testing.assert_allclose(g.spacings, (0.25, 0.25))

    def test_n_out_of_range(self):
        with pytest.raises(ValueError, match=r"n out of supported range \[2,5\]"):
            mesh.GridSpec(n=7, cells_per_axis=(4,) * 6, lengths=(1.0,) * 6, dt=0.1)
        with pytest.raises(ValueError, match=r"n out of supported range \[2,5\]"):
            mesh.GridSpec(n=1, cells_per_axis=(), lengths=(), dt=0.1)

    def test_bad_axis_counts(self):
        with pytest.raises(ValueError, match="spatial axes"):
            mesh.GridSpec(n=3, cells_per_axis=(4,), lengths=(1.0, 1.0), dt=0.1)

    def test_too_few_cells(self):
        with pytest.raises(ValueError, match="at least 4 cells"):
            box_grid((4, 3))

    def test_bad_dt_and_lengths(self):
        with pytest.raises(ValueError, match="dt"):
            box_grid((4, 4), dt=0.0)
        with pytest.raises(ValueError, match="positive"):
            box_grid((4, 4), lengths=(1.0, -1.0))

    def test_bad_periodic_flags(self):
        with pytest.raises(ValueError, match="periodic"):
            box_grid((4, 4), periodic=(True,))


class TestCochainBasics:
    def test_component_shapes_primal_vs_dual(self):
        g = box_grid((4, 6))
        # primal: centers along extent axes, nodes along the rest
        assert mesh.component_shape(g, (0,), dual=False) == (4, 7)
        assert mesh.component_shape(g, (1,), dual=False) == (5, 6)
        # dual: reversed staggering
        assert mesh.component_shape(g, (0,), dual=True) == (5, 6)
        assert mesh.component_shape(g, (0, 1), dual=True) == (5, 7)

    def test_periodic_axes_have_no_face_nodes(self):
        g = box_grid((4, 6), periodic=(True, False))
        assert mesh.component_shape(g, (1,), dual=False) == (4, 6)
        assert mesh.component_shape(g, (0,), dual=True) == (4, 6)

    def test_shape_validation(self):
        g = box_grid((4, 4))
        comps = {s: np.zeros(mesh.component_shape(g, s, False)) for s in mesh.subsets(g, 1)}
        comps[(0,)] = np.zeros((4, 4))
        with pytest.raises(ValueError, match="expected shape"):
            mesh.Cochain(g, 1, False, comps)

    def test_degree_range(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="degree"):
            mesh.zero_cochain(g, 3, False)

    def test_arithmetic(self):
        g = box_grid((4, 4))
        rng = np.random.default_rng(RNG_SEED)
        a = mesh.random_cochain(g, 1, False, rng)
        b = mesh.random_cochain(g, 1, False, rng)
        c = 2.0 * a + b - a
        np.testing.assert_allclose(c.comps[(0,)], a.comps[(0,)] + b.comps[(0,)])
        d = -a
        np.testing.assert_allclose((a + d).comps[(1,)], 0.0, atol=0.0)

    def test_arithmetic_mismatch(self):
        g = box_grid((4, 4))
        rng = np.random.default_rng(RNG_SEED)
        a = mesh.random_cochain(g, 1, False, rng)
        b = mesh.random_cochain(g, 1, True, rng)
        with pytest.raises(ValueError, match="different spaces"):
            _ = a + b

    def test_flatten_roundtrip(self):
        g = box_grid((4, 5))
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 1, True, rng)
        vec = mesh.flatten(c)
        back = mesh.unflatten(g, 1, True, vec)
        for s in mesh.subsets(g, 1):
            np.testing.assert_array_equal(back.comps[s], c.comps[s])
        with pytest.raises(ValueError, match="length"):
            mesh.unflatten(g, 1, True, vec[:-1])


class TestCoboundary:
    def test_constant_scalar_has_zero_gradient(self):
        g = box_grid((4, 4))
        c = mesh.Cochain(g, 0, False, {(): np.full((5, 5), 3.7)})
        dc = mesh.d_sigma(c)
        for arr in dc.comps.values():
            np.testing.assert_array_equal(arr, 0.0)

    def test_line_grid_hand_differences(self):
        # node values 0,1,4,9,16 -> edge differences 1,3,5,7
        g = box_grid((4,))
        c = mesh.Cochain(g, 0, False, {(): np.array([0.0, 1.0, 4.0, 9.0, 16.0])})
        np.testing.assert_array_equal(mesh.d_sigma(c).comps[(0,)], [1.0, 3.0, 5.0, 7.0])

    def test_line_grid_periodic_wraps(self):
        g = box_grid((4,), periodic=(True,))
        c = mesh.Cochain(g, 0, False, {(): np.array([0.0, 1.0, 4.0, 9.0])})
        np.testing.assert_array_equal(mesh.d_sigma(c).comps[(0,)], [1.0, 3.0, 5.0, -9.0])

    def test_single_edge_curl_signs(self):
        # unit flux on one axis-0 edge at interior node line j=2:
        # the two cells sharing it see opposite circulations.
        g = box_grid((4, 4))
        c = mesh.zero_cochain(g, 1, False)
        c.comps[(0,)][1, 2] = 1.0
        dc = mesh.d_sigma(c).comps[(0, 1)]
        expected = np.zeros((4, 4))
        expected[1, 1] = -1.0
        expected[1, 2] = 1.0
        np.testing.assert_array_equal(dc, expected)

    def test_curl_matches_green_theorem(self):
        # Sample exact edge integrals of P dx + Q dy; the coboundary of the
        # result must equal the circulation integral around each cell, which
        # Green's theorem gives in closed form from the antiderivatives.
        g = box_grid((4, 5), lengths=(1.3, 0.9))
        x = np.arange(5) * g.spacings[0]
        y = np.arange(6) * g.spacings[1]

        f0ant = lambda u: -0.5 * np.cos(2.0 * u + 0.3)   # antiderivative of sin(2u+0.3)
        g0 = lambda v: v * v + 1.0
        f1 = lambda u: np.cos(1.7 * u)
        g1ant = lambda v: np.sin(v) / 1.0

        c = mesh.zero_cochain(g, 1, False)
        c.comps[(0,)] = (f0ant(x[1:]) - f0ant(x[:-1]))[:, None] * g0(y)[None, :]
        c.comps[(1,)] = f1(x)[:, None] * (g1ant(y[1:]) - g1ant(y[:-1]))[None, :]

        circulation = (
            (f0ant(x[1:]) - f0ant(x[:-1]))[:, None] * (g0(y[:-1]) - g0(y[1:]))[None, :]
            + (f1(x[1:]) - f1(x[:-1]))[:, None] * (g1ant(y[1:]) - g1ant(y[:-1]))[None, :]
        )
        np.testing.assert_allclose(mesh.d_sigma(c).comps[(0, 1)], circulation, rtol=0, atol=1e-14)

    @pytest.mark.parametrize("dual", [False, True])
    @pytest.mark.parametrize("cells,periodic", [((4, 4, 4), None), ((4, 6), (True, False))])
    def test_dd_is_zero(self, cells, periodic, dual):
        g = box_grid(cells, periodic=periodic)
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 0, dual, rng)
        ddc = mesh.d_sigma(mesh.d_sigma(c))
        for arr in ddc.comps.values():
            np.testing.assert_allclose(arr, 0.0, atol=ROUNDING_TOL)

    def test_dd_bit_zero_on_integer_data(self):
        # integer-valued data incurs no rounding, so the signed sums of
        # equal terms cancel bit-exactly
        g = box_grid((4, 4, 4))
        rng = np.random.default_rng(RNG_SEED)
        for dual in (False, True):
            c = mesh.zero_cochain(g, 1, dual)
            for s in c.comps:
                c.comps[s] = rng.integers(-50, 50, c.comps[s].shape).astype(float)
            ddc = mesh.d_sigma(mesh.d_sigma(c))
            for arr in ddc.comps.values():
                np.testing.assert_array_equal(arr, 0.0)

    def test_top_degree_raises(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="top-degree"):
            mesh.d_sigma(mesh.zero_cochain(g, 2, False))

    def test_coboundary_preserves_flux_free_subspace(self):
        # on flux-free dual data the face rule keeps the coboundary flux-free:
        # every face-node output term is a difference of exact zeros
        g = box_grid((4, 5, 4))
        rng = np.random.default_rng(RNG_SEED)
        for k in (0, 1, 2):
            c = mesh.project_normal_flux(mesh.random_cochain(g, k, True, rng))
            assert mesh.normal_flux_maxabs(mesh.d_sigma(c)) == 0.0


class TestHodge:
    def test_unit_cells_scalar_to_top(self):
        g = box_grid((4, 4))  # unit cells: lengths default to cell counts
        ones = mesh.Cochain(g, 0, False, {(): np.ones((5, 5))})
        top = mesh.hodge_sigma(ones, 0.0, mesh.unit_metric())
        assert top.dual and top.degree == 2
        np.testing.assert_array_equal(top.comps[(0, 1)], np.ones((5, 5)))

    def test_conformal_weight_vanishes_mid_degree(self):
        # 1-cochains on a 2-axis slice scale as a^(m-2k) = a^0
        g = box_grid((4, 4), lengths=(2.0, 3.0))
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 1, False, rng)
        m1 = mesh.unit_metric()
        m2 = mesh.MetricField(conf=lambda t: 2.0)
        a1 = mesh.hodge_sigma(c, 0.0, m1)
        a2 = mesh.hodge_sigma(c, 0.0, m2)
        for s in a1.comps:
            np.testing.assert_array_equal(a1.comps[s], a2.comps[s])

    @pytest.mark.parametrize("m", [2, 3, 4])
    def test_fiber_cross_validation(self, m):
        # constant cochains are single fibers: pointwise Hodge values must
        # match the fiber algebra with metric diag(a^2) exactly
        rng = np.random.default_rng(RNG_SEED + m)
        cells = tuple(rng.integers(4, 7) for _ in range(m))
        lengths = tuple(float(v) for v in rng.uniform(0.5, 2.0, m))
        g = box_grid(cells, lengths=lengths)
        a = float(rng.uniform(0.5, 2.0))
        metric = mesh.MetricField(conf=lambda t: a)
        fiber_g = exterior.Metric(diag=np.full(m, a * a))
        for k in range(m + 1):
            vals = rng.standard_normal(exterior.space_dim(m, k))
            form = exterior.Form(m, k, vals)
            comps = {
                s: np.full(mesh.component_shape(g, s, False), vals[i] * mesh.cell_measure(g, s))
                for i, s in enumerate(mesh.subsets(g, k))
            }
            c = mesh.Cochain(g, k, False, comps)
            star_vals = mesh.component_values(mesh.hodge_sigma(c, 0.0, metric))
            want = exterior.hodge(form, fiber_g)
            for i, s in enumerate(mesh.subsets(g, m - k)):
                np.testing.assert_allclose(
                    star_vals[s], want.comps[i], rtol=FIBER_MATCH_TOL, atol=FIBER_MATCH_TOL
                )

    def test_double_hodge_sign_and_inverse(self):
        g = box_grid((4, 5, 6), lengths=(1.0, 0.7, 1.9))
        rng = np.random.default_rng(RNG_SEED)
        metric = mesh.MetricField(conf=lambda t: 1.4)
        for k in range(4):
            for dual in (False, True):
                c = mesh.random_cochain(g, k, dual, rng)
                sign = (-1.0) ** (k * (3 - k))
                twice = mesh.hodge_sigma(mesh.hodge_sigma(c, 0.3, metric), 0.3, metric)
                back = mesh.hodge_inverse_sigma(mesh.hodge_sigma(c, 0.3, metric), 0.3, metric)
                for s in c.comps:
                    np.testing.assert_allclose(twice.comps[s], sign * c.comps[s], rtol=1e-14)
                    np.testing.assert_allclose(back.comps[s], c.comps[s], rtol=1e-14)


class TestCodifferential:
    def test_degree_zero_raises(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="degree-0"):
            mesh.codiff_sigma(mesh.zero_cochain(g, 0, False), 0.0, mesh.unit_metric())

    def test_codiff_squared_vanishes(self):
        g = box_grid((4, 4, 5))
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 2, False, rng)
        m = mesh.MetricField(conf=lambda t: 0.8)
        dd = mesh.codiff_sigma(mesh.codiff_sigma(c, 0.1, m), 0.1, m)
        for arr in dd.comps.values():
            np.testing.assert_allclose(arr, 0.0, atol=ROUNDING_TOL)

    def test_codiff_of_uniform_top_cochain(self):
        g = box_grid((4, 4))
        top = mesh.Cochain(
            g, 2, False, {(0, 1): np.full(mesh.component_shape(g, (0, 1), False), 2.5)}
        )
        out = mesh.codiff_sigma(top, 0.0, mesh.unit_metric())
        for arr in out.comps.values():
            np.testing.assert_array_equal(arr, 0.0)

    @pytest.mark.parametrize("cells,k", [((8, 8), 1), ((8, 8), 2), ((4, 5, 4), 2)])
    def test_summation_by_parts(self, cells, k):
        # <d a, b> - <a, codiff b> equals the boundary trace/normal pairing
        g = box_grid(cells, lengths=tuple(0.9 + 0.2 * i for i in range(len(cells))))
        rng = np.random.default_rng(RNG_SEED + k)
        metric = mesh.MetricField(conf=lambda t: 1.3)
        a = mesh.random_cochain(g, k - 1, False, rng)
        b = mesh.random_cochain(g, k, False, rng)
        t = 0.2
        lhs = mesh.pair_sigma(mesh.d_sigma(a), b, t, metric) - mesh.pair_sigma(
            a, mesh.codiff_sigma(b, t, metric), t, metric
        )
        rhs = mesh.boundary_pairing(a, b, t, metric)
        scale = max(1.0, abs(lhs), abs(rhs))
        assert abs(lhs - rhs) <= SBP_TOL * scale

    def test_summation_by_parts_periodic_has_no_boundary(self):
        g = box_grid((8, 8), periodic=(True, True))
        rng = np.random.default_rng(RNG_SEED)
        metric = mesh.unit_metric()
        a = mesh.random_cochain(g, 0, False, rng)
        b = mesh.random_cochain(g, 1, False, rng)
        lhs = mesh.pair_sigma(mesh.d_sigma(a), b, 0.0, metric)
        rhs = mesh.pair_sigma(a, mesh.codiff_sigma(b, 0.0, metric), 0.0, metric)
        assert abs(lhs - rhs) <= SBP_TOL * max(1.0, abs(lhs))


class TestPairing:
    def test_unit_scalar_pairing_is_box_volume(self):
        g = box_grid((4, 8), lengths=(1.25, 2.0))
        ones = mesh.Cochain(g, 0, False, {(): np.ones((5, 9))})
        vol = mesh.pair_sigma(ones, ones, 0.0, mesh.unit_metric())
        assert vol == pytest.approx(2.5, abs=1e-14)

    def test_unit_scalar_pairing_periodic(self):
        g = box_grid((4, 8), lengths=(1.25, 2.0), periodic=(True, True))
        ones = mesh.Cochain(g, 0, False, {(): np.ones((4, 8))})
        assert mesh.pair_sigma(ones, ones, 0.0, mesh.unit_metric()) == pytest.approx(2.5, abs=1e-14)

    def test_conformal_scaling_on_scalars(self):
        g = box_grid((4, 4, 4))
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 0, False, rng)
        base = mesh.pair_sigma(c, c, 0.0, mesh.unit_metric())
        doubled = mesh.pair_sigma(c, c, 0.0, mesh.MetricField(conf=lambda t: 2.0))
        assert doubled == pytest.approx((2.0 ** 3) * base, rel=1e-14)

    def test_symmetric_positive_definite(self):
        g = box_grid((4, 5))
        rng = np.random.default_rng(RNG_SEED)
        metric = mesh.MetricField(conf=lambda t: 1.1)
        a = mesh.random_cochain(g, 1, True, rng)
        b = mesh.random_cochain(g, 1, True, rng)
        assert mesh.pair_sigma(a, b, 0.0, metric) == pytest.approx(
            mesh.pair_sigma(b, a, 0.0, metric), rel=1e-14
        )
        assert mesh.pair_sigma(a, a, 0.0, metric) > 0.0
        z = mesh.zero_cochain(g, 1, True)
        assert mesh.pair_sigma(z, z, 0.0, metric) == 0.0

    def test_degree_mismatch_raises(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="different spaces"):
            mesh.pair_sigma(
                mesh.zero_cochain(g, 0, False), mesh.zero_cochain(g, 1, False), 0.0, mesh.unit_metric()
            )

    def test_weight_field(self):
        # weighted scalar pairing = trapezoid sum of w(x) against the values
        g = box_grid((4,), lengths=(2.0,))
        c = mesh.Cochain(g, 0, False, {(): np.ones(5)})
        w = lambda t, x: x + t
        got = mesh.pair_sigma(c, c, 1.0, mesh.unit_metric(), weight=w)
        x = np.arange(5) * 0.5
        want = 0.5 * np.sum(np.array([0.5, 1, 1, 1, 0.5]) * (x + 1.0))
        assert got == pytest.approx(want, rel=1e-14)

    @seed(RNG_SEED)
    @settings(max_examples=30, deadline=None)
    @given(
        data=arrays(
            np.float64,
            (4, 5),
            elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False),
        ),
        k=st.integers(0, 2),
        conf=st.floats(0.5, 2.0, allow_nan=False),
    )
    def test_hodge_is_a_pairing_isometry(self, data, k, conf):
        g = box_grid((4, 4), lengths=(1.1, 0.8))
        rng = np.random.default_rng(int(abs(data.sum()) * 1e6) % 2**32)
        metric = mesh.MetricField(conf=lambda t: conf)
        a = mesh.random_cochain(g, k, False, rng)
        b = mesh.random_cochain(g, k, False, rng)
        plain = mesh.pair_sigma(a, b, 0.0, metric)
        starred = mesh.pair_sigma(
            mesh.hodge_sigma(a, 0.0, metric), mesh.hodge_sigma(b, 0.0, metric), 0.0, metric
        )
        np.testing.assert_allclose(starred, plain, rtol=1e-12, atol=1e-12)


class TestBoundaryOperators:
    def test_faces_enumeration(self):
        g = box_grid((4, 4), periodic=(True, False))
        assert mesh.faces(g) == [mesh.Face(1, 0), mesh.Face(1, 1)]

    def test_face_grid_drops_axis(self):
        g = box_grid((4, 6, 8), lengths=(1.0, 2.0, 3.0))
        fg = mesh.face_grid(g, mesh.Face(1, 0))
        assert fg.cells_per_axis == (4, 8)
        assert fg.lengths == (1.0, 3.0)
        assert fg.n == 3

    def test_face_grid_of_line_is_unsupported(self):
        g = box_grid((4,))
        with pytest.raises(ValueError, match=r"n out of supported range \[2,5\]"):
            mesh.face_grid(g, mesh.Face(0, 0))

    def test_trace_keeps_tangential_slice(self):
        g = box_grid((4, 4))
        c = mesh.zero_cochain(g, 1, False)
        c.comps[(1,)] = np.arange(20.0).reshape(5, 4)
        east = mesh.trace_pullback(c, mesh.Face(0, 1))
        np.testing.assert_array_equal(east.comps[(0,)], np.arange(16.0, 20.0))
        west = mesh.trace_pullback(c, mesh.Face(0, 0))
        np.testing.assert_array_equal(west.comps[(0,)], np.arange(0.0, 4.0))

    def test_trace_kills_normal_leg(self):
        g = box_grid((4, 4))
        for face in mesh.faces(g):
            c = mesh.zero_cochain(g, 1, False)
            c.comps[(face.axis,)][:] = 7.0
            tc = mesh.trace_pullback(c, face)
            for arr in tc.comps.values():
                np.testing.assert_array_equal(arr, 0.0)

    def test_trace_rejects_dual_and_periodic(self):
        g = box_grid((4, 4), periodic=(True, False))
        with pytest.raises(ValueError, match="primal"):
            mesh.trace_pullback(mesh.zero_cochain(g, 1, True), mesh.Face(1, 0))
        with pytest.raises(ValueError, match="periodic"):
            mesh.trace_pullback(mesh.zero_cochain(g, 1, False), mesh.Face(0, 0))

    def test_normal_contract_kills_tangential(self):
        g = box_grid((4, 4))
        c = mesh.zero_cochain(g, 1, True)
        c.comps[(1,)][:] = 3.0
        out = mesh.normal_contract(c, mesh.Face(0, 1), 0.0, mesh.unit_metric())
        for arr in out.comps.values():
            np.testing.assert_array_equal(arr, 0.0)

    def test_normal_contract_unit_entries(self):
        # unit-cell grid, unit metric: a normal-leg indicator contracts to ones
        g = box_grid((4, 4))
        c = mesh.zero_cochain(g, 1, True)
        c.comps[(0,)][-1, :] = 1.0
        out = mesh.normal_contract(c, mesh.Face(0, 1), 0.0, mesh.unit_metric())
        np.testing.assert_array_equal(out.comps[()], np.ones(4))

    def test_normal_contract_degree_zero_raises(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="degree-0"):
            mesh.normal_contract(mesh.zero_cochain(g, 0, True), mesh.Face(0, 0), 0.0, mesh.unit_metric())

    @pytest.mark.parametrize("cells,lengths", [((4, 5), (1.2, 0.7)), ((4, 4, 5), (1.0, 1.4, 0.6))])
    def test_duality_with_hodge_trace(self, cells, lengths):
        # face-hodge(n . c) = trace(hodge c) with the induced face orientation
        g = box_grid(cells, lengths=lengths)
        rng = np.random.default_rng(RNG_SEED)
        metric = mesh.MetricField(conf=lambda t: 1.7)
        t = 0.4
        for k in range(1, g.dim + 1):
            c = mesh.random_cochain(g, k, True, rng)
            star_c = mesh.hodge_sigma(c, t, metric)
            for face in mesh.faces(g):
                lhs = mesh.hodge_sigma(
                    mesh.normal_contract(c, face, t, metric),
                    t,
                    metric,
                    orientation=mesh.induced_orientation(face),
                )
                rhs = mesh.trace_pullback(star_c, face)
                for s in rhs.comps:
                    np.testing.assert_allclose(
                        lhs.comps[s], rhs.comps[s], rtol=FIBER_MATCH_TOL, atol=FIBER_MATCH_TOL
                    )

    def test_projection_zeroes_normal_flux_and_is_idempotent(self):
        g = box_grid((4, 5, 4))
        rng = np.random.default_rng(RNG_SEED)
        c = mesh.random_cochain(g, 2, True, rng)
        assert mesh.normal_flux_maxabs(c) > 0.0
        p = mesh.project_normal_flux(c)
        assert mesh.normal_flux_maxabs(p) == 0.0
        pp = mesh.project_normal_flux(p)
        for s in p.comps:
            np.testing.assert_array_equal(pp.comps[s], p.comps[s])
        # interior values untouched
        np.testing.assert_array_equal(p.comps[(0, 1)][1:-1, 1:-1, :], c.comps[(0, 1)][1:-1, 1:-1, :])

    def test_projection_requires_dual(self):
        g = box_grid((4, 4))
        with pytest.raises(ValueError, match="dual"):
            mesh.project_normal_flux(mesh.zero_cochain(g, 1, False))


class TestSampling:
    def test_sample_scalar_coordinates(self):
        g = box_grid((4, 4), lengths=(1.0, 2.0))
        vals = mesh.sample_scalar(g, (0,), False, lambda t, x, y: x + 10 * y + t, 0.5)
        # axis 0 centers at 0.125+0.25i, axis 1 nodes at 0.5j
        assert vals[0, 0] == pytest.approx(0.125 + 0.5)
        assert vals[3, 4] == pytest.approx(0.875 + 20.0 + 0.5)

    def test_sample_cochain_applies_cell_measure(self):
        g = box_grid((4, 4), lengths=(1.0, 2.0))
        c = mesh.sample_cochain(g, 1, False, {(0,): lambda t, x, y: 1.0})
        np.testing.assert_allclose(c.comps[(0,)], 0.25)
        np.testing.assert_array_equal(c.comps[(1,)], 0.0)

    def test_max_pointwise_uses_values_not_dofs(self):
        g = box_grid((4, 4), lengths=(0.5, 0.5))
        c = mesh.sample_cochain(g, 2, False, {(0, 1): lambda t, x, y: 3.0})
        assert mesh.max_pointwise(c) == pytest.approx(3.0)
