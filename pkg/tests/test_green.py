"""Tests for one-sided/causal solution operators and the cutoff pairing."""

import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st

from kmaxwell import green, manufactured, mesh, system

DT = 0.005
FINE_DT = 0.0025
DEFECT_TOL = 5e-3
SKEW_TOL = 1e-9
EXACT_TOL = 1e-12
PIN_RTOL = 1e-6

# Frozen reference values for the fixed seeds below; every pipeline that
# produces them is deterministic, so drift signals a behavior change.
RIGHT_INVERSE_16 = 2.343268e-3
RIGHT_INVERSE_FRAC = 0.5968
SEQUENCE_DEFECTS = (6.688899534047e-4, 1.042452189431e-3, 2.830730130629e-3)
FORWARD_RESIDUAL = 3.144412679176e-3
SIGMA_01 = 5.579560890932e-1
SIGMA_23 = -7.374913405715e-1
SIGMA_CAUSAL_TORUS = 1.884290913e-2
VARSIGMA_TORUS = 1.884313544e-2
FALSIFICATION_MAX = 2.789996494794e-2

METRIC = mesh.unit_metric()


def box_grid(cells=16, dt=DT):
    return mesh.GridSpec(n=3, cells_per_axis=(cells, cells), lengths=(1.0, 1.0), dt=dt)


def torus_grid(cells=16, dt=DT):
    return mesh.GridSpec(
        n=3, cells_per_axis=(cells, cells), lengths=(1.0, 1.0), dt=dt, periodic=(True, True)
    )


def bundle_norm(bundle):
    return float(np.sqrt(sum(h.norm(METRIC) ** 2 for h in bundle.values())))


def history_equal(a, b):
    np.testing.assert_array_equal(a.fe, b.fe)
    np.testing.assert_array_equal(a.fb, b.fb)


def source_rows(sh):
    return {name: rows for name, rows, _, _ in sh._families() if rows is not None}


@functools.lru_cache(maxsize=None)
def torus_bundles():
    g = torus_grid()
    return g, tuple(green.random_solution_bundle(g, METRIC, 120, seed=i) for i in range(5))


@functools.lru_cache(maxsize=None)
def forward_setup():
    g = box_grid(dt=FINE_DT)
    a = green.random_potential(g, 2, METRIC, 240, seed=5)
    probes = tuple(
        green.causal(
            green.random_source_pair(g, 1, METRIC, (0.1, 0.4), np.random.default_rng(100 + sd)),
            g,
            METRIC,
            t_final=float(a.times[-1]),
        )
        for sd in range(10)
    )
    report = green.degeneracy_forward_check(a, g, METRIC, probes)
    return g, a, probes, report


@functools.lru_cache(maxsize=None)
def causal_reference():
    g = box_grid()
    pair = green.random_source_pair(g, 1, METRIC, (0.1, 0.4), np.random.default_rng(40))
    return g, pair, green.causal(pair, g, METRIC, t_start=0.0, t_final=0.5)


def scaled_pair(sp, factor):
    kw = {}
    for name in ("je", "jb", "ze", "zb", "je_rate", "zb_rate"):
        fn = getattr(sp, name)
        if fn is not None:
            kw[name] = (lambda f: lambda t: factor * f(t))(fn)
    return green.SourcePair(grid=sp.grid, k=sp.k, window=sp.window, metric=sp.metric, **kw)


class TestCutoffProfile:
    def test_endpoints_and_plateau(self):
        chi = green.CutoffProfile(0.3, 0.1)
        assert chi.value(0.24) == 0.0
        assert chi.value(0.36) == 1.0
        assert chi.value(0.3) == pytest.approx(0.5)
        assert chi.rate(0.2) == 0.0
        assert chi.rate(0.4) == 0.0

    def test_rate_matches_value_derivative(self):
        chi = green.CutoffProfile(0.3, 0.1, exponent=5)
        ts = np.linspace(0.26, 0.34, 17)
        h = 1e-6
        fd = (chi.value(ts + h) - chi.value(ts - h)) / (2 * h)
        np.testing.assert_allclose(chi.rate(ts), fd, rtol=0.0, atol=1e-6)

    def test_exponent_catalogue(self):
        for expo in (1, 3, 5):
            green.CutoffProfile(0.0, 1.0, exponent=expo)
        with pytest.raises(ValueError, match="exponent"):
            green.CutoffProfile(0.0, 1.0, exponent=2)
        with pytest.raises(ValueError, match="width"):
            green.CutoffProfile(0.0, 0.0)

    @settings(max_examples=40, deadline=None)
    @seed(2024)
    @given(
        t1=st.floats(-2.0, 2.0, allow_nan=False),
        t2=st.floats(-2.0, 2.0, allow_nan=False),
        expo=st.sampled_from([1, 3, 5]),
    )
    def test_monotone(self, t1, t2, expo):
        chi = green.CutoffProfile(0.0, 0.5, exponent=expo)
        lo, hi = min(t1, t2), max(t1, t2)
        assert chi.value(lo) <= chi.value(hi) + 1e-15


class TestWindowProfile:
    def test_support_and_plateau(self):
        p = green.WindowProfile(0.1, 0.4, ramp=0.1)
        assert p.value(0.05) == 0.0
        assert p.value(0.45) == 0.0
        assert p.value(0.25) == 1.0
        assert p.rate(0.05) == 0.0

    def test_rate_matches_value_derivative(self):
        p = green.WindowProfile(0.1, 0.4, ramp=0.1)
        ts = np.linspace(0.08, 0.42, 35)
        h = 1e-6
        fd = (p.value(ts + h) - p.value(ts - h)) / (2 * h)
        np.testing.assert_allclose(p.rate(ts), fd, rtol=0.0, atol=1e-5)

    def test_default_ramp_is_a_third(self):
        p = green.WindowProfile(0.0, 0.3)
        assert p.ramp == pytest.approx(0.1)

    def test_validation(self):
        with pytest.raises(ValueError, match="length"):
            green.WindowProfile(0.4, 0.1)
        with pytest.raises(ValueError, match="ramp"):
            green.WindowProfile(0.0, 0.2, ramp=0.3)


class TestHistory:
    def test_shape_validation(self):
        g = box_grid(cells=4)
        times = DT * np.arange(3)
        fe = np.zeros((3, mesh.cochain_size(g, 2, False)))
        fb = np.zeros((3, mesh.cochain_size(g, 1, True)))
        green.History(g, 1, times, fe, fb)
        with pytest.raises(ValueError, match="shape"):
            green.History(g, 1, times, fe[:, :-1], fb)
        with pytest.raises(ValueError, match="two slices"):
            green.History(g, 1, times[:1], fe[:1], fb[:1])
        with pytest.raises(ValueError, match="uniform"):
            green.History(g, 1, np.array([0.0, 0.1, 0.15]), fe, fb)

    def test_algebra(self):
        _, _, c = causal_reference()
        history_equal(2.0 * c, c + c)
        history_equal(-c, c * -1.0)
        d = c - c
        assert d.maxabs() == 0.0
        r = c.restrict(3, 10)
        assert len(r.times) == 7
        assert r.times[0] == pytest.approx(c.times[3])

    def test_mismatch_errors(self):
        g, _, c = causal_reference()
        other = green.History(g, 2, c.times, np.zeros((len(c.times), mesh.cochain_size(g, 1, False))), np.zeros((len(c.times), mesh.cochain_size(g, 2, True))))
        with pytest.raises(ValueError, match="degrees"):
            c + other
        shifted = green.History(g, 1, c.times + 1.0, c.fe, c.fb)
        with pytest.raises(ValueError, match="time samples"):
            c + shifted

    def test_norm_and_maxabs_zero(self):
        g = box_grid(cells=4)
        times = DT * np.arange(4)
        h = green.History(
            g,
            1,
            times,
            np.zeros((4, mesh.cochain_size(g, 2, False))),
            np.zeros((4, mesh.cochain_size(g, 1, True))),
        )
        assert h.norm(METRIC) == 0.0
        assert h.maxabs() == 0.0


class TestSourcePair:
    def test_rate_callables_required(self):
        g = box_grid()
        je = lambda t: mesh.zero_cochain(g, 2, False)
        with pytest.raises(ValueError, match="je_rate"):
            green.SourcePair(grid=g, k=2, window=(0.1, 0.4), je=je, metric=METRIC)
        zb = lambda t: mesh.zero_cochain(g, 2, True)
        with pytest.raises(ValueError, match="zb_rate"):
            green.SourcePair(grid=g, k=1, window=(0.1, 0.4), zb=zb, metric=METRIC)

    def test_window_validation(self):
        g = box_grid()
        with pytest.raises(ValueError, match="window"):
            green.SourcePair(grid=g, k=1, window=(0.4, 0.1), metric=METRIC)

    def test_declaration_rejects_charge_violation(self):
        g = box_grid()
        prof = manufactured.bump_profile((0.5, 0.5), 0.2)
        jb0 = mesh.zero_cochain(g, 1, True)
        for s in jb0.comps:
            jb0.comps[s] = mesh.sample_scalar(g, s, True, prof, 0.0) * mesh.cell_measure(g, s)
        with pytest.raises(ValueError, match="admissibility"):
            green.SourcePair(grid=g, k=2, window=(0.1, 0.4), jb=lambda t: jb0, metric=METRIC)

    def test_random_pair_legs_by_degree(self):
        g = box_grid()
        p1 = green.random_source_pair(g, 1, METRIC, (0.1, 0.4), np.random.default_rng(0))
        assert p1.je is None and p1.jb is not None and p1.ze is not None and p1.zb is not None
        p2 = green.random_source_pair(g, 2, METRIC, (0.1, 0.4), np.random.default_rng(0))
        assert p2.je is not None and p2.zb is None
        alpha_only = green.random_source_pair(
            g, 2, METRIC, (0.1, 0.4), np.random.default_rng(0), with_zeta=False
        )
        assert alpha_only.ze is None

    def test_random_pair_requires_static_metric(self):
        g = box_grid()
        drifting = mesh.MetricField(
            beta=lambda t, *x: 1.0 + 0.1 * t,
            conf=lambda t: 1.0,
            beta_dt=lambda t, *x: 0.1,
        )
        with pytest.raises(ValueError, match="lapse"):
            green.random_source_pair(g, 1, drifting, (0.1, 0.4), np.random.default_rng(0))
        breathing = mesh.MetricField(beta=lambda t, *x: 1.0, conf=lambda t: 1.0 + 0.1 * t)
        with pytest.raises(ValueError, match="conformal"):
            green.random_source_pair(g, 1, breathing, (0.1, 0.4), np.random.default_rng(0))

    def test_harmonic_requires_torus(self):
        g = box_grid()
        with pytest.raises(ValueError, match="periodic"):
            green.random_source_pair(
                g, 1, METRIC, (0.1, 0.4), np.random.default_rng(0), with_harmonic=True
            )

    def test_harmonic_requires_uniform_lapse(self):
        g = torus_grid()
        tilted = mesh.MetricField(beta=lambda t, *x: 1.0 + 0.2 * x[0], conf=lambda t: 1.0)
        with pytest.raises(ValueError, match="uniform lapse"):
            green.random_source_pair(
                g, 2, tilted, (0.1, 0.4), np.random.default_rng(0), with_harmonic=True
            )


class TestOneSidedSolves:
    def test_zero_sources_give_zero_history(self):
        g = box_grid()
        sp = green.SourcePair(grid=g, k=1, window=(0.1, 0.4), metric=METRIC)
        h = green.g_plus(sp, g, METRIC, t_start=0.0, t_final=0.5)
        assert not np.any(h.fe) and not np.any(h.fb)

    def test_support_is_bit_exact(self):
        g, pair, _ = causal_reference()
        fwd = green.g_plus(pair, g, METRIC, t_start=0.0, t_final=0.5)
        # one-dt margin: a float time landing epsilon inside the window edge
        # samples the profile's flat tail, so test strictly-outside slices
        before = fwd.times <= pair.window[0] - DT + 1e-12
        assert np.count_nonzero(before) >= 2
        assert not np.any(fwd.fe[before]) and not np.any(fwd.fb[before])
        assert np.any(fwd.fe[~before])
        bwd = green.g_minus(pair, g, METRIC, t_start=0.0, t_final=0.5)
        after = bwd.times >= pair.window[1] + DT - 1e-12
        assert np.count_nonzero(after) >= 2
        assert not np.any(bwd.fe[after]) and not np.any(bwd.fb[after])
        assert np.any(bwd.fe[~after])

    def test_window_margin_enforced(self):
        g = box_grid()
        sp = green.SourcePair(grid=g, k=1, window=(0.005, 0.3), metric=METRIC)
        with pytest.raises(ValueError, match="touches"):
            green.g_plus(sp, g, METRIC, t_start=0.0, t_final=0.4)

    def test_budgets_and_cfl(self):
        g = box_grid()
        sp = green.SourcePair(grid=g, k=1, window=(0.1, 0.4), metric=METRIC)
        with pytest.raises(ValueError, match="budget"):
            green.g_plus(sp, g, METRIC, t_start=0.0, t_final=600 * DT)
        wide = box_grid(cells=128)
        spw = green.SourcePair(grid=wide, k=1, window=(0.1, 0.4), metric=METRIC)
        with pytest.raises(ValueError, match="budget"):
            green.g_plus(spw, wide, METRIC, t_start=0.0, t_final=0.5)
        coarse = box_grid(dt=0.2)  # far above the 0.9*h/c Courant bound
        spc = green.SourcePair(grid=coarse, k=1, window=(0.45, 0.6), metric=METRIC)
        with pytest.raises(ValueError, match="cfl"):
            green.g_plus(spc, coarse, METRIC, t_start=0.0, t_final=1.0)

    def test_mismatched_grid_rejected(self):
        g = box_grid()
        other = box_grid(cells=12)
        sp = green.SourcePair(grid=g, k=1, window=(0.1, 0.4), metric=METRIC)
        with pytest.raises(ValueError, match="different grid"):
            green.g_plus(sp, other, METRIC, t_start=0.0, t_final=0.5)

    def test_determinism(self):
        g, pair, _ = causal_reference()
        a = green.g_plus(pair, g, METRIC, t_start=0.0, t_final=0.5)
        b = green.g_plus(pair, g, METRIC, t_start=0.0, t_final=0.5)
        history_equal(a, b)


class TestCausal:
    def test_scaling_is_exact(self):
        g, pair, c = causal_reference()
        c2 = green.causal(scaled_pair(pair, 2.0), g, METRIC, t_start=0.0, t_final=0.5)
        history_equal(c2, 2.0 * c)

    def test_additivity(self):
        g, pair, c = causal_reference()
        other = green.random_source_pair(g, 1, METRIC, (0.12, 0.38), np.random.default_rng(41))
        c_other = green.causal(other, g, METRIC, t_start=0.0, t_final=0.5)
        combined = green.SourcePair(
            grid=g,
            k=1,
            window=(0.1, 0.4),
            metric=METRIC,
            jb=lambda t: pair.jb(t) + other.jb(t),
            ze=lambda t: pair.ze(t) + other.ze(t),
            zb=lambda t: pair.zb(t) + other.zb(t),
            zb_rate=lambda t: pair.zb_rate(t) + other.zb_rate(t),
        )
        c_sum = green.causal(combined, g, METRIC, t_start=0.0, t_final=0.5)
        diff = c_sum - (c + c_other)
        assert diff.maxabs() <= 1e-13 * c_sum.maxabs()

    def test_time_mirror_symmetry(self):
        # for a window symmetric about t_m with even magnetic current and
        # odd flux source, reflecting time and flipping fb maps the causal
        # solution to itself; the discrete forward/backward marches mirror
        # each other exactly, so the residual sits at roundoff
        _, _, c = causal_reference()
        scale = c.maxabs()
        assert np.max(np.abs(c.fe - c.fe[::-1])) <= EXACT_TOL * scale
        assert np.max(np.abs(c.fb + c.fb[::-1])) <= EXACT_TOL * scale

    def test_zero_source_history_stays_zero(self):
        g = box_grid(cells=8)
        times = DT * np.arange(41)
        zero = green.History(
            g,
            2,
            times,
            np.zeros((41, mesh.cochain_size(g, 1, False))),
            np.zeros((41, mesh.cochain_size(g, 2, True))),
        )
        src = green.apply_operator(zero, METRIC)
        assert src.norm(METRIC) == 0.0
        out = green.causal(src, g, METRIC, t_start=0.0, t_final=float(times[-1]))
        assert not np.any(out.fe) and not np.any(out.fb)


class TestRightInverse:
    def test_defect_and_halving(self):
        d = {}
        for cells, dtv in ((16, DT), (32, DT / np.sqrt(2.0))):
            g = box_grid(cells=cells, dt=dtv)
            steps = int(round(0.6 / dtv))
            times = dtv * np.arange(steps + 1)
            omega = green.random_compact_history(
                g, 2, METRIC, times, (0.1, 0.5), np.random.default_rng(11)
            )
            d[cells] = green.right_inverse_check(omega, g, METRIC)["defect"]
        assert d[16] < DEFECT_TOL
        assert d[16] == pytest.approx(RIGHT_INVERSE_16, rel=1e-5)
        frac = d[32] / d[16]
        assert 0.35 <= frac <= 0.65
        assert frac == pytest.approx(RIGHT_INVERSE_FRAC, rel=1e-3)

    def test_zero_omega(self):
        g = box_grid(cells=8)
        times = DT * np.arange(41)
        omega = green.History(
            g,
            2,
            times,
            np.zeros((41, mesh.cochain_size(g, 1, False))),
            np.zeros((41, mesh.cochain_size(g, 2, True))),
        )
        assert green.right_inverse_check(omega, g, METRIC)["defect"] == 0.0

    def test_boundary_violation_rejected(self):
        g = box_grid(cells=8)
        times = DT * np.arange(41)
        omega = green.History(
            g,
            2,
            times,
            np.zeros((41, mesh.cochain_size(g, 1, False))),
            np.ones((41, mesh.cochain_size(g, 2, True))),
        )
        with pytest.raises(ValueError, match="boundary condition"):
            green.right_inverse_check(omega, g, METRIC)


class TestExactSequence:
    def test_frozen_defects(self):
        g = box_grid(dt=FINE_DT)
        rep = green.exact_sequence_suite(g, METRIC, trials=3, seed=0)
        for key, pinned in zip(("defect_a", "defect_b", "defect_c"), SEQUENCE_DEFECTS):
            assert rep[key] < DEFECT_TOL
            assert rep[key] == pytest.approx(pinned, rel=PIN_RTOL)
        assert rep["trials"] == 3
        assert all(len(v) == 3 for v in rep["per_trial"].values())

    def test_defects_converge_second_order(self):
        coarse = green.exact_sequence_suite(box_grid(16, 0.004), METRIC, trials=1, seed=0)
        fine = green.exact_sequence_suite(box_grid(32, 0.002), METRIC, trials=1, seed=0)
        for key in ("defect_a", "defect_b"):
            ratio = coarse[key] / fine[key]
            assert 2.6 <= ratio <= 5.4

    def test_full_cutoff_degenerates_to_right_inverse(self):
        # chi == 1 over the support makes the future part the whole field:
        # its cutoff sources equal the plain operator image bit for bit, the
        # past part is bit-zero, and the reconstruction defect is exactly
        # the right-inverse defect
        g = box_grid()
        times = DT * np.arange(121)
        omega = green.random_compact_history(
            g, 2, METRIC, times, (0.15, 0.45), np.random.default_rng(7)
        )
        chi = green.CutoffProfile(0.05, 0.04)
        fut = green.cutoff_sources(omega, chi, METRIC)
        direct = green.apply_operator(omega, METRIC)
        fut_rows = source_rows(fut)
        for name, rows in source_rows(direct).items():
            np.testing.assert_array_equal(fut_rows[name], rows)
        past = green.cutoff_sources(omega, chi, METRIC, complement=True)
        assert all(not np.any(rows) for rows in source_rows(past).values())
        lead = green.g_plus(fut, g, METRIC, t_start=0.0, t_final=0.61)
        defect = (lead.restrict(0, 121) - omega).norm(METRIC) / omega.norm(METRIC)
        ri = green.right_inverse_check(omega, g, METRIC)["defect"]
        assert defect == pytest.approx(ri, rel=EXACT_TOL)
        assert defect < DEFECT_TOL


class TestPresymplectic:
    def test_skew_and_cutoff_independence_on_ten_pairs(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        wide = green.CutoffProfile(0.3, 20 * DT)
        shifted = green.CutoffProfile(0.35, 10 * DT)
        rels = []
        for i, j in itertools.combinations(range(5), 2):
            v = green.presymplectic(bundles[i], bundles[j], chi, g, METRIC)
            vr = green.presymplectic(bundles[j], bundles[i], chi, g, METRIC)
            assert abs(v + vr) <= SKEW_TOL * abs(v)
            for other in (wide, shifted):
                vo = green.presymplectic(bundles[i], bundles[j], other, g, METRIC)
                assert abs(vo - v) <= SKEW_TOL * abs(v)
            rels.append(abs(v) / (bundle_norm(bundles[i]) * bundle_norm(bundles[j])))
        assert min(rels) > 1e-3

    def test_frozen_values(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        v01 = green.presymplectic(bundles[0], bundles[1], chi, g, METRIC)
        v23 = green.presymplectic(bundles[2], bundles[3], chi, g, METRIC)
        assert v01 == pytest.approx(SIGMA_01, rel=1e-8)
        assert v23 == pytest.approx(SIGMA_23, rel=1e-8)

    def test_self_pairing_vanishes(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        assert green.presymplectic(bundles[0], bundles[0], chi, g, METRIC) == 0.0

    def test_single_degree_bundles_decouple(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        one = {2: bundles[0][2]}
        two = {2: bundles[1][2]}
        assert green.presymplectic(one, two, chi, g, METRIC) == 0.0

    def test_bilinear_scaling_exact(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        v = green.presymplectic(bundles[0], bundles[1], chi, g, METRIC)
        doubled = {k: 2.0 * h for k, h in bundles[0].items()}
        assert green.presymplectic(doubled, bundles[1], chi, g, METRIC) == pytest.approx(
            2.0 * v, rel=EXACT_TOL
        )

    def test_box_solutions_pair_to_machine_zero(self):
        # on a box every homogeneous solution built from coboundary data is
        # invisible to the pairing; the nonzero values above need the torus
        g = box_grid()
        b0 = green.random_solution_bundle(g, METRIC, 120, seed=0)
        b1 = green.random_solution_bundle(g, METRIC, 120, seed=1)
        chi = green.CutoffProfile(0.3, 10 * DT)
        v = green.presymplectic(b0, b1, chi, g, METRIC)
        assert abs(v) <= 1e-10 * bundle_norm(b0) * bundle_norm(b1)

    def test_cutoff_ramp_must_fit(self):
        g, bundles = torus_bundles()
        with pytest.raises(ValueError, match="ramp"):
            green.presymplectic(
                bundles[0], bundles[1], green.CutoffProfile(0.0, 0.1), g, METRIC
            )

    def test_bundle_validation(self):
        g, bundles = torus_bundles()
        chi = green.CutoffProfile(0.3, 10 * DT)
        h2 = bundles[0][2]
        with pytest.raises(ValueError, match="does not match"):
            green.presymplectic({1: h2}, bundles[1], chi, g, METRIC)
        with pytest.raises(ValueError, match="duplicate degree"):
            green.presymplectic([h2, h2], bundles[1], chi, g, METRIC)
        short = {k: h.restrict(0, 100) for k, h in bundles[0].items()}
        with pytest.raises(ValueError, match="time samples"):
            green.presymplectic(short, bundles[1], chi, g, METRIC)
        other = box_grid(cells=12)
        b = green.random_solution_bundle(other, METRIC, 120, seed=0)
        with pytest.raises(ValueError, match="grids"):
            green.presymplectic(b, bundles[1], chi, g, METRIC)


class TestSourceForm:
    def test_zero_second_source(self):
        g = torus_grid()
        src1 = green.random_source_pair(g, 2, METRIC, (0.1, 0.35), np.random.default_rng(31))
        empty = green.SourcePair(grid=g, k=1, window=(0.15, 0.4), metric=METRIC)
        assert green.presymplectic_source_form(src1, empty, g, METRIC, t_final=0.6) == 0.0

    def test_agreement_with_causal_pairing_on_torus(self):
        g = torus_grid()
        src1 = green.random_source_pair(
            g, 2, METRIC, (0.1, 0.35), np.random.default_rng(31), with_harmonic=True
        )
        src2 = green.random_source_pair(
            g, 1, METRIC, (0.15, 0.4), np.random.default_rng(32), with_harmonic=True
        )
        s1 = green.causal(src1, g, METRIC, t_final=0.6)
        s2 = green.causal(src2, g, METRIC, t_final=0.6)
        chi = green.CutoffProfile(0.3, 10 * DT)
        sig = green.presymplectic({2: s1}, {1: s2}, chi, g, METRIC)
        varsigma = green.presymplectic_source_form(src1, src2, g, METRIC, t_final=0.6)
        assert sig == pytest.approx(SIGMA_CAUSAL_TORUS, rel=1e-8)
        assert varsigma == pytest.approx(VARSIGMA_TORUS, rel=1e-8)
        assert abs(sig - varsigma) <= DEFECT_TOL * abs(sig)

    def test_agreement_on_box_is_scale_relative(self):
        # the box pairing is degenerate, so both sides sit at the
        # discretization floor; agreement is measured against the solution
        # norms rather than the (vanishing) value
        g = box_grid()
        src1 = green.random_source_pair(g, 2, METRIC, (0.1, 0.35), np.random.default_rng(31))
        src2 = green.random_source_pair(g, 1, METRIC, (0.15, 0.4), np.random.default_rng(32))
        s1 = green.causal(src1, g, METRIC, t_final=0.6)
        s2 = green.causal(src2, g, METRIC, t_final=0.6)
        chi = green.CutoffProfile(0.3, 10 * DT)
        sig = green.presymplectic({2: s1}, {1: s2}, chi, g, METRIC)
        varsigma = green.presymplectic_source_form(src1, src2, g, METRIC, t_final=0.6)
        scale = s1.norm(METRIC) * s2.norm(METRIC)
        assert abs(sig) <= 1e-12 * scale
        assert abs(sig - varsigma) <= DEFECT_TOL * scale

    def test_bilinearity_is_exact(self):
        g = torus_grid()
        src1 = green.random_source_pair(
            g, 2, METRIC, (0.1, 0.35), np.random.default_rng(31), with_harmonic=True
        )
        src2 = green.random_source_pair(
            g, 1, METRIC, (0.15, 0.4), np.random.default_rng(32), with_harmonic=True
        )
        v = green.presymplectic_source_form(src1, src2, g, METRIC, t_final=0.6)
        v1 = green.presymplectic_source_form(scaled_pair(src1, 2.0), src2, g, METRIC, t_final=0.6)
        v2 = green.presymplectic_source_form(src1, scaled_pair(src2, 2.0), g, METRIC, t_final=0.6)
        assert v1 == pytest.approx(2.0 * v, rel=EXACT_TOL)
        assert v2 == pytest.approx(2.0 * v, rel=EXACT_TOL)


class TestDegeneracy:
    def test_forward_check_passes(self):
        _, _, _, report = forward_setup()
        assert report["field_residual"] < DEFECT_TOL
        assert report["field_residual"] == pytest.approx(FORWARD_RESIDUAL, rel=PIN_RTOL)
        assert len(report["values"]) == 10
        assert report["max_relative"] < 1e-12

    def test_zero_potential(self):
        g, a, probes, _ = forward_setup()
        zero = green.History(g, 1, a.times, np.zeros_like(a.fe), np.zeros_like(a.fb))
        report = green.degeneracy_forward_check(zero, g, METRIC, probes[:2])
        assert report["field_residual"] == 0.0
        assert report["values"] == [0.0, 0.0]

    def test_solution_gate_trips(self):
        g, a, probes, _ = forward_setup()
        with pytest.raises(ValueError, match="solution tolerance"):
            green.degeneracy_forward_check(a, g, METRIC, probes[:1], solution_tol=1e-12)

    def test_probe_must_cover_field_times(self):
        g, a, _, _ = forward_setup()
        pair = green.random_source_pair(g, 1, METRIC, (0.1, 0.2), np.random.default_rng(100))
        short = green.causal(pair, g, METRIC, t_final=0.3)
        with pytest.raises(ValueError, match="does not cover"):
            green.degeneracy_forward_check(a, g, METRIC, [short])

    def test_falsification_detects_non_exact_content(self):
        # constant modes on the torus are genuine solutions that are not
        # differentials; pairing them against causal fields with permanent
        # constant tails must clear the tolerance the exact fields satisfied
        g = torus_grid()
        chi = green.CutoffProfile(0.3, 10 * DT)
        field = green.random_solution_bundle(g, METRIC, 120, seed=77, degrees=(2,))[2]
        rels = []
        for sd in range(3):
            pair = green.random_source_pair(
                g, 1, METRIC, (0.1, 0.4), np.random.default_rng(200 + sd), with_harmonic=True
            )
            probe = green.causal(pair, g, METRIC, t_final=float(field.times[-1]))
            v = green.presymplectic({1: probe}, {2: field}, chi, g, METRIC)
            rels.append(abs(v) / (probe.norm(METRIC) * field.norm(METRIC)))
        assert max(rels) > DEFECT_TOL
        assert max(rels) == pytest.approx(FALSIFICATION_MAX, rel=PIN_RTOL)

    def test_random_potential_degree_range(self):
        g = box_grid()
        with pytest.raises(ValueError, match="range"):
            green.random_potential(g, 1, METRIC, 40)
        with pytest.raises(ValueError, match="range"):
            green.random_potential(g, 3, METRIC, 40)

    def test_history_differential_degree_cap(self):
        g, bundles = torus_bundles()
        with pytest.raises(ValueError, match="degree"):
            green.history_differential(bundles[0][2], METRIC)
