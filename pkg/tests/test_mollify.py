"""Mollifier kernels, shrinking-grid convolution, regularized graph domains,
and the mollified-sign certificate sweep."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers_poly import Poly3
from levicheck.fields import Grid3, ParameterError, Regularity, ScalarField3, StencilError
from levicheck.levi import delta_tau_fields, tau_fields
from levicheck.mollify import (
    BumpKernel,
    HypothesisError,
    UnderResolvedKernelError,
    bump_profile,
    convolve3,
    default_delta_sweep,
    kernel_profile_constants,
    kink_plane_mask,
    make_kernel,
    mollified_sign_certificate,
    regularized_defining,
    staircase_deficit_fields,
    staircase_sweep_case,
    zero_sheet_distance,
)

# frozen from an independent radial quadrature of exp(-1/(1-r^2)) over the
# unit ball: normalization and single-axis second moment of the unit kernel
PROFILE_NORM = 2.2671167396083267
PROFILE_M2 = 0.11169565399086731


def cube_grid(h, n, origin=0.0):
    return Grid3((origin, origin, origin), h, (n, n, n))


def smooth_field(grid, fn):
    return ScalarField3.from_function(grid, fn, Regularity("smooth"))


class TestKernelProfile:
    def test_profile_constants_match_frozen_quadrature(self):
        c, m2 = kernel_profile_constants()
        assert c == pytest.approx(PROFILE_NORM, abs=1e-10)
        assert m2 == pytest.approx(PROFILE_M2, abs=1e-10)

    def test_axis_moment_below_isotropy_bound(self):
        # three equal axis moments must sum to the radial moment < 1
        _, m2 = kernel_profile_constants()
        assert 0.0 < 3.0 * m2 < 1.0

    def test_bump_profile_shape(self):
        r = np.linspace(0.0, 1.5, 31)
        vals = bump_profile(r)
        assert vals[0] == pytest.approx(math.exp(-1.0), abs=1e-15)
        assert np.all(vals[r >= 1.0] == 0.0)
        inside = vals[r < 1.0]
        assert np.all(np.diff(inside) < 0.0)
        assert bump_profile(-0.5) == bump_profile(0.5)

    def test_discrete_mass_is_one(self):
        ker = make_kernel(0.1, 1.0 / 128.0)
        assert ker.mass() == pytest.approx(1.0, abs=1e-13)

    def test_discrete_moment_tracks_continuum(self):
        ker = make_kernel(0.1, 1.0 / 128.0)  # R = 12
        assert ker.axis_second_moment() == pytest.approx(
            ker.continuum_second_moment(), rel=1e-3
        )

    def test_under_resolved_and_bad_parameters(self):
        with pytest.raises(UnderResolvedKernelError):
            make_kernel(0.01, 1.0 / 64.0)
        with pytest.raises(ParameterError):
            make_kernel(0.0, 1.0 / 64.0)
        with pytest.raises(ParameterError):
            make_kernel(0.1, -1.0)

    def test_margin_exceeds_cell_radius(self):
        ker = make_kernel(5.0 / 64.0, 1.0 / 64.0)
        assert ker.cell_radius == 5
        assert ker.margin == 6

    @given(cells=st.integers(min_value=2, max_value=9))
    @settings(max_examples=9, deadline=None)
    def test_weights_symmetric_under_flips(self, cells):
        ker = make_kernel(cells / 64.0, 1.0 / 64.0)
        w = ker.weights
        for axis in range(3):
            assert np.array_equal(w, np.flip(w, axis=axis))
        assert np.array_equal(w, np.transpose(w, (1, 2, 0)))


class TestConvolve3:
    def test_constant_fixed_point(self):
        v = smooth_field(cube_grid(1.0 / 32.0, 25), lambda a, b, c: 0.0 * a + 0.7)
        mol = convolve3(v, 3.0 / 32.0)
        assert mol.sup_distance_to_base() <= 1e-13

    def test_affine_fixed_point(self):
        v = smooth_field(
            cube_grid(1.0 / 32.0, 25), lambda a, b, c: 0.3 * a - 1.2 * b + 0.5 * c
        )
        mol = convolve3(v, 3.0 / 32.0)
        assert mol.sup_distance_to_base() <= 1e-12

    def test_quadratic_shift_is_discrete_axis_moment(self):
        # (xi1 + s)^2 averaged over the symmetric kernel adds exactly the
        # discrete second moment, independently of the node
        v = smooth_field(cube_grid(1.0 / 32.0, 25), lambda a, b, c: a * a)
        mol = convolve3(v, 4.0 / 32.0)
        shift = mol.field.values - mol.base_window()
        assert np.max(np.abs(shift - mol.kernel.axis_second_moment())) <= 1e-13

    def test_direct_and_fft_agree(self):
        v = smooth_field(
            cube_grid(1.0 / 24.0, 29),
            lambda a, b, c: np.sin(2.0 * a) + np.cos(b + c) + a * b * c,
        )
        d = convolve3(v, 4.0 / 24.0, method="direct")
        f = convolve3(v, 4.0 / 24.0, method="fft")
        assert d.field.grid == f.field.grid
        assert np.max(np.abs(d.field.values - f.field.values)) <= 1e-12

    def test_unknown_method_rejected(self):
        v = smooth_field(cube_grid(1.0 / 16.0, 17), lambda a, b, c: a)
        with pytest.raises(ParameterError):
            convolve3(v, 0.2, method="spectral")

    def test_output_nodes_beyond_delta(self):
        h = 1.0 / 32.0
        v = smooth_field(cube_grid(h, 33), lambda a, b, c: a + b * c)
        delta = 5.0 * h
        mol = convolve3(v, delta)
        sub = mol.field.grid
        assert sub.extents == tuple(n - 2 * mol.margin for n in v.grid.extents)
        for k in range(3):
            lo = sub.origin[k] - v.grid.origin[k]
            hi = (
                v.grid.origin[k]
                + h * (v.grid.extents[k] - 1)
                - (sub.origin[k] + h * (sub.extents[k] - 1))
            )
            assert lo > delta and hi > delta

    def test_stencil_error_when_kernel_swallows_grid(self):
        v = smooth_field(cube_grid(1.0 / 16.0, 17), lambda a, b, c: a)
        with pytest.raises(StencilError):
            convolve3(v, 0.5)

    def test_jensen_on_axis_convex_field(self):
        v = smooth_field(
            cube_grid(1.0 / 24.0, 29, origin=-0.5),
            lambda a, b, c: a * a + b**4 + np.cosh(c),
        )
        mol = convolve3(v, 3.0 / 24.0)
        assert np.min(mol.field.values - mol.base_window()) >= -1e-12

    @given(
        a=st.floats(min_value=0.1, max_value=2.0),
        b=st.floats(min_value=0.1, max_value=2.0),
        cells=st.integers(min_value=2, max_value=4),
    )
    @settings(max_examples=10, deadline=None)
    def test_jensen_property(self, a, b, cells):
        v = smooth_field(
            cube_grid(1.0 / 16.0, 21, origin=-0.6),
            lambda x, y, z: a * x * x + b * y * y + (a + b) * z**4,
        )
        mol = convolve3(v, cells / 16.0)
        assert np.min(mol.field.values - mol.base_window()) >= -1e-11

    def test_sup_distance_bounded_by_lipschitz_radius(self):
        grid = cube_grid(1.0 / 32.0, 33)
        v = smooth_field(grid, lambda a, b, c: np.sin(2.0 * a) + 0.5 * np.cos(b + c))
        delta = 4.0 / 32.0
        mol = convolve3(v, delta)
        lip = 2.0 + 0.5 * math.sqrt(2.0)  # sup |grad| over the cube
        assert mol.sup_distance_to_base() <= lip * delta

    def test_mass_preserved_over_sub_box(self):
        grid = cube_grid(1.0 / 40.0, 41)
        v = smooth_field(grid, lambda a, b, c: np.sin(2.0 * a) + 0.5 * np.cos(b + c))
        h = grid.spacing
        delta = 4.0 * h
        mol = convolve3(v, delta)
        box = (slice(5, 16), slice(5, 16), slice(5, 16))
        lip = 2.0 + 0.5 * math.sqrt(2.0)
        measure = 11.0**3 * h**3
        gap = abs(
            float(np.sum(mol.field.values[box])) * h**3
            - float(np.sum(mol.base_window()[box])) * h**3
        )
        assert gap <= lip * delta * measure

    @given(
        c200=st.floats(min_value=-1.5, max_value=1.5),
        c020=st.floats(min_value=-1.5, max_value=1.5),
        c111=st.floats(min_value=-1.5, max_value=1.5),
        c210=st.floats(min_value=-1.0, max_value=1.0),
        c003=st.floats(min_value=-1.0, max_value=1.0),
        t1r=st.floats(min_value=-1.0, max_value=1.0),
        t1i=st.floats(min_value=-1.0, max_value=1.0),
        cells=st.integers(min_value=3, max_value=5),
    )
    @settings(max_examples=10, deadline=None)
    def test_frozen_tau_commutation(self, c200, c020, c111, c210, c003, t1r, t1i, cells):
        # for constant coefficients the operator passes through the kernel sum
        h = 1.0 / 24.0
        n = 25
        poly = Poly3(
            {(2, 0, 0): c200, (0, 2, 0): c020, (1, 1, 1): c111, (2, 1, 0): c210, (0, 0, 3): c003}
        )
        grid = cube_grid(h, n)
        v = smooth_field(grid, poly)
        tau1 = np.full(grid.shape, t1r + 1j * t1i)
        tau2 = np.full(grid.shape, 0.5 + 0.0j)
        raw = delta_tau_fields(v, tau1, tau2)
        inner_grid = Grid3(tuple(o + h for o in grid.origin), h, (n - 2, n - 2, n - 2))
        raw_field = ScalarField3(inner_grid, raw[1:-1, 1:-1, 1:-1], Regularity("smooth"))

        delta = cells * h
        lhs_full = convolve3(v, delta)
        m = lhs_full.margin
        lhs = delta_tau_fields(
            lhs_full.field,
            np.full(lhs_full.field.grid.shape, t1r + 1j * t1i),
            np.full(lhs_full.field.grid.shape, 0.5 + 0.0j),
        )[1:-1, 1:-1, 1:-1]
        rhs = convolve3(raw_field, delta).field.values
        scale = 1.0 + float(np.nanmax(np.abs(raw)))
        assert np.max(np.abs(lhs - rhs)) <= 1e-9 * scale


class TestDeltaSweep:
    def test_default_runs_16h_to_2h(self):
        h = 1.0 / 128.0
        sweep = default_delta_sweep(h)
        assert len(sweep) == 7
        assert sweep[0] == pytest.approx(16.0 * h)
        assert sweep[-1] == pytest.approx(2.0 * h)
        assert all(a > b for a, b in zip(sweep, sweep[1:]))

    def test_wide_base_runs_32h_to_4h(self):
        h = 1.0 / 128.0
        sweep = default_delta_sweep(h, base_cells=32)
        assert sweep[0] == pytest.approx(32.0 * h)
        assert sweep[-1] == pytest.approx(4.0 * h)

    def test_rejects_degenerate_requests(self):
        with pytest.raises(ParameterError):
            default_delta_sweep(1.0 / 64.0, count=1)
        with pytest.raises(ParameterError):
            default_delta_sweep(1.0 / 64.0, base_cells=1)


class TestKinkMask:
    def test_diagonal_plane_mask(self):
        grid = cube_grid(1.0 / 8.0, 9)
        mask = kink_plane_mask(grid, [("xi1+xi2", 0.5)], width_cells=0.5)
        x1, x2, _ = grid.mesh()
        assert np.array_equal(mask, np.abs(x1 + x2 - 0.5) <= 0.5 / 8.0)

    def test_unknown_plane_spec(self):
        grid = cube_grid(1.0 / 8.0, 9)
        with pytest.raises(ParameterError):
            kink_plane_mask(grid, [("xi1*xi2", 0.0)])


def quadratic_case(h=1.0 / 32.0, n=41):
    """v = -|z2|^2 with a polynomial phi; -Delta_tau v = |tau2|^2 = 1/4."""
    grid = cube_grid(h, n)
    v = smooth_field(grid, lambda a, b, c: -(b * b + c * c))
    phi = smooth_field(grid, lambda a, b, c: -0.8 * b + 0.1 * b * b - 0.05 * c * c)
    return v, phi


class TestCertificateBasics:
    def test_quarter_floor_for_pure_z2_square(self):
        v, phi = quadratic_case()
        rep = mollified_sign_certificate(v, phi, alpha=0.9, p=6.0, epsilon=1e-2)
        assert rep.passed
        for m in rep.m_values:
            assert m == pytest.approx(0.25, abs=1e-10)
        assert rep.hypothesis_min == pytest.approx(0.25, abs=1e-10)

    def test_smooth_case_converges_to_raw_minimum(self):
        grid = cube_grid(1.0 / 32.0, 41)
        v = smooth_field(grid, lambda a, b, c: -(b * b + c * c) - 0.1 * np.sin(a + b))
        phi = smooth_field(grid, lambda a, b, c: -0.5 * b)
        tau1, tau2 = tau_fields(phi)
        raw = -delta_tau_fields(v, tau1, tau2)
        raw_min = float(np.nanmin(raw))
        assert raw_min > 0.0
        rep = mollified_sign_certificate(v, phi, alpha=0.9, p=6.0, epsilon=1e-2)
        assert rep.passed
        gaps = [abs(m - raw_min) for m in rep.m_values]
        assert gaps[-1] <= 5e-3
        assert gaps[-1] <= gaps[0]

    def test_report_json_schema(self):
        v, phi = quadratic_case()
        rep = mollified_sign_certificate(v, phi, alpha=0.9, p=6.0, epsilon=1e-2)
        payload = json.loads(rep.to_json())
        assert set(payload) == {
            "epsilon",
            "alpha",
            "p",
            "deltas",
            "m_values",
            "fitted_slope",
            "pass",
        }
        assert payload["pass"] is True
        assert len(payload["deltas"]) == len(payload["m_values"]) == 7
        assert rep.to_json() == mollified_sign_certificate(
            v, phi, alpha=0.9, p=6.0, epsilon=1e-2
        ).to_json()

    def test_parameter_preconditions(self):
        v, phi = quadratic_case()
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, phi, alpha=0.9, p=2.0, epsilon=1e-2)
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, phi, alpha=0.4, p=6.0, epsilon=1e-2)
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, phi, alpha=0.9, p=6.0, epsilon=-1.0)
        small = smooth_field(cube_grid(1.0 / 16.0, 17), lambda a, b, c: a)
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, small, alpha=0.9, p=6.0, epsilon=1e-2)

    def test_phi_tag_gate(self):
        v, phi = quadratic_case()
        lip = ScalarField3(phi.grid, phi.values, Regularity("lipschitz"))
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, lip, alpha=0.9, p=6.0, epsilon=1e-2)
        low = ScalarField3(
            phi.grid, phi.values, Regularity("c1alpha", alpha=0.4, constant=1.0)
        )
        with pytest.raises(ParameterError):
            mollified_sign_certificate(v, low, alpha=0.9, p=6.0, epsilon=1e-2)

    def test_sweep_rejects_under_resolved_deltas(self):
        v, phi = quadratic_case()
        with pytest.raises(UnderResolvedKernelError):
            mollified_sign_certificate(
                v, phi, alpha=0.9, p=6.0, epsilon=1e-2, deltas=(0.1, v.grid.spacing)
            )

    def test_hidden_convex_kink_raises(self):
        grid = cube_grid(1.0 / 32.0, 41)
        x2 = grid.mesh()[1]
        vals = -(x2 - 0.6) ** 2 - grid.mesh()[2] ** 2 + 0.5 * np.abs(x2 - 0.625)
        v = ScalarField3(grid, vals, Regularity("c11", constant=4.0))
        phi = smooth_field(grid, lambda a, b, c: -0.5 * b)
        with pytest.raises(HypothesisError):
            mollified_sign_certificate(v, phi, alpha=0.9, p=6.0, epsilon=1e-2)

    def test_declared_kink_defect_grows_through_sweep(self):
        # declaring the kink lets construction pass, but its distributional
        # negative mass comes back at size ~1/delta once mollified
        grid = cube_grid(1.0 / 32.0, 41)
        x2 = grid.mesh()[1]
        vals = -(x2 - 0.6) ** 2 - grid.mesh()[2] ** 2 + 0.5 * np.abs(x2 - 0.625)
        v = ScalarField3(grid, vals, Regularity("c11", constant=4.0))
        phi = smooth_field(grid, lambda a, b, c: -0.5 * b)
        rep = mollified_sign_certificate(
            v, phi, alpha=0.9, p=6.0, epsilon=1e-2, kink_planes=[("xi2", 0.625)]
        )
        assert not rep.passed
        # wide kernels dilute the spike below the +1/4 smooth floor; the
        # defect takes over as delta shrinks
        assert all(m < -1e-3 for m in rep.m_values[-3:])
        assert min(rep.m_values) == rep.m_values[-1] < -0.3
        assert rep.m_values[-1] < rep.m_values[-2] < rep.m_values[-3]


@pytest.fixture(scope="module")
def shipped_case():
    return staircase_sweep_case()


@pytest.fixture(scope="module")
def shipped_report(shipped_case):
    case = shipped_case
    return mollified_sign_certificate(
        case.v, case.phi, alpha=0.9, p=6.0, epsilon=1e-2, deltas=case.delta_sweep()
    )


class TestStaircaseCase:
    def test_node_identity_against_plateau_model(self, shipped_case):
        case = shipped_case
        tau1, tau2 = tau_fields(case.phi)
        cert = -delta_tau_fields(case.v, tau1, tau2)
        n1, n2, n3 = case.v.grid.extents
        h = case.v.grid.spacing
        mid = case.v.values[:, :, n3 // 2] / case.scale
        road_dd = np.full((n1, n2), np.nan)
        road_dd[1:-1, :] = (mid[2:, :] - 2.0 * mid[1:-1, :] + mid[:-2, :]) / h**2
        model = (case.scale / 16.0) * (1.0 + case.ghat_values[None, :] ** 2) * (
            1.0 - road_dd
        )
        gap = np.abs(cert[:, :, n3 // 2] - model)
        assert np.nanmax(gap) <= 5e-13

    def test_certificate_nonnegative_and_tight(self, shipped_case):
        case = shipped_case
        tau1, tau2 = tau_fields(case.phi)
        cert = -delta_tau_fields(case.v, tau1, tau2)
        finite = np.isfinite(cert)
        assert float(cert[finite].min()) >= -1e-12
        # tight on the plateau slab: u = xi1 + xi2 inside road_top
        x1, x2, _ = case.v.grid.mesh()
        slab = (x1 + x2 >= case.road_top[0] + 2 * case.v.grid.spacing) & (
            x1 + x2 <= case.road_top[1] - 2 * case.v.grid.spacing
        )
        sel = slab & finite
        assert sel.any()
        assert float(np.max(np.abs(cert[sel]))) <= 1e-12

    def test_tau_components_are_the_box_average(self, shipped_case):
        case = shipped_case
        tau1, tau2 = tau_fields(case.phi)
        inner = np.s_[1:-1, 1:-1, 1:-1]
        assert np.max(np.abs(tau2[inner] - 0.5)) == 0.0
        assert np.max(np.abs(tau1[inner].imag)) == 0.0
        ghat_grid = np.broadcast_to(case.ghat_values[None, :, None], case.v.grid.shape)
        assert np.max(np.abs(tau1[inner].real - ghat_grid[inner] / 4.0)) <= 1e-13

    def test_deficit_profile_bounds(self, shipped_case):
        case = shipped_case
        assert case.g_sup == 2.0
        assert np.all(case.deficit > 0.0)
        assert np.all(case.deficit <= case.g_sup**2 - 1.0 + 1e-12)
        assert np.all(case.ghat_values >= 1.0 - 1e-12)
        assert np.all(case.ghat_values <= case.g_sup + 1e-12)

    def test_declared_gradient_holder_class_is_honest(self, shipped_case):
        case = shipped_case
        reg = case.phi.regularity
        assert reg.tag == "c1alpha"
        assert reg.alpha == 0.9
        h = case.v.grid.spacing
        g = case.g_values
        for lag in (1, 2, 5, 17, 40, 77, 128):
            if lag >= len(g):
                continue
            gaps = np.abs(g[lag:] - g[:-lag])
            assert float(gaps.max()) <= reg.constant * (lag * h) ** reg.alpha * (1.0 + 1e-12)

    def test_sweep_matches_slab_restricted_1d_oracle(self, shipped_case, shipped_report):
        case, rep = shipped_case, shipped_report
        h = case.v.grid.spacing
        n1, n2, _ = case.v.grid.extents
        a1, b1 = case.road_top
        for d, m in zip(rep.deltas, rep.m_values):
            ker = make_kernel(d, h)
            w1 = ker.weights.sum(axis=(0, 2))
            margin = ker.margin
            resp = np.convolve(case.deficit, w1[::-1], mode="same") - case.deficit
            ok = np.zeros(n2, dtype=bool)
            for j in range(margin, n2 - margin):
                lo = max(margin, math.ceil((a1 + (margin + 1) * h - j * h) / h))
                hi = min(n1 - 1 - margin, math.floor((b1 - (margin + 1) * h - j * h) / h))
                ok[j] = lo <= hi
            pred = -(case.scale / 16.0) * float(resp[ok].max())
            assert m == pytest.approx(pred, abs=1e-10)

    def test_sweep_minima_negative_but_above_epsilon(self, shipped_report):
        rep = shipped_report
        assert rep.passed
        for m in rep.m_values:
            assert -1e-2 <= m <= -1e-4

    def test_fitted_slope_near_target_rate(self, shipped_report):
        assert shipped_report.rate_target == pytest.approx(0.4)
        assert abs(shipped_report.fitted_slope - 0.4) <= 0.2
        # regression pin on the frozen constants
        assert shipped_report.fitted_slope == pytest.approx(0.4884, abs=2e-2)

    def test_report_is_deterministic(self, shipped_case, shipped_report):
        case = shipped_case
        again = mollified_sign_certificate(
            case.v, case.phi, alpha=0.9, p=6.0, epsilon=1e-2, deltas=case.delta_sweep()
        )
        assert again.to_json() == shipped_report.to_json()

    def test_case_rejects_tiny_grid(self):
        with pytest.raises(ParameterError):
            staircase_deficit_fields(spacing=1.0 / 4.0)


class TestRegularizedDefining:
    def test_budget_and_window_checks(self):
        phi = smooth_field(cube_grid(1.0 / 64.0, 65), lambda a, b, c: 0.1 * b)
        with pytest.raises(ParameterError):
            regularized_defining(phi, epsilon=0.01, delta=0.02)
        with pytest.raises(ParameterError):
            regularized_defining(phi, epsilon=0.05, delta=0.01, p=2.0)
        with pytest.raises(ParameterError):
            regularized_defining(phi, epsilon=0.05, delta=0.01, alpha=0.3)
        with pytest.raises(ParameterError):
            regularized_defining(phi, epsilon=-0.1, delta=0.0)

    def test_monotonicity_guard(self):
        phi = smooth_field(cube_grid(1.0 / 16.0, 17), lambda a, b, c: 30.0 * b)
        with pytest.raises(ParameterError, match="monotone"):
            regularized_defining(phi, epsilon=0.5, delta=0.0)

    def test_spec_scale_deltas_need_finer_grids(self):
        # delta = 0.005 spans less than two cells at h = 1/128
        phi = smooth_field(cube_grid(1.0 / 128.0, 129), lambda a, b, c: 0.1 * b)
        with pytest.raises(UnderResolvedKernelError):
            regularized_defining(phi, epsilon=0.05, delta=0.005)

    def test_containment_violation_reported(self):
        # a steep convex cone is lifted by smoothing faster than the eps
        # padding can absorb
        phi = smooth_field(
            cube_grid(1.0 / 64.0, 65), lambda a, b, c: 10.0 * np.abs(b - 0.5)
        )
        with pytest.raises(ParameterError, match="containment"):
            regularized_defining(phi, epsilon=0.05, delta=0.05)

    def test_exact_path_closure_values(self):
        grid = cube_grid(1.0 / 32.0, 33)
        phi = smooth_field(grid, lambda a, b, c: 0.1 * b * b + 0.05 * a * c)
        eps = 0.05
        params = regularized_defining(phi, epsilon=eps, delta=0.0)
        assert params.margin_cells == 0
        assert params.smoothed is phi
        assert params.defining.name == "regularized_graph"
        # probe at the grid node xi = (0.5, 0.5, 0.5), x1 = 0.2
        z1 = 0.2 + 0.5j
        z2 = 0.5 + 0.5j
        wd = params.reference.data(z1, z2)
        expected_rho = (
            0.2 - (0.1 * 0.25 + 0.05 * 0.25) + eps * (abs(z1) ** 2 + abs(z2) ** 2) + eps
        )
        assert wd.rho == pytest.approx(expected_rho, abs=1e-12)
        assert wd.rz1 == pytest.approx(
            0.5 * (1.0 + 1j * (0.05 * 0.5)) + eps * np.conjugate(z1), abs=1e-9
        )
        assert wd.rz1z1b == pytest.approx(eps, abs=1e-9)

    def test_rate_bound_flag(self):
        phi = smooth_field(cube_grid(1.0 / 128.0, 129), lambda a, b, c: 0.1 * b)
        eps = 0.25
        rate = eps ** (1.0 / (0.9 - 0.5))
        near = regularized_defining(phi, epsilon=eps, delta=rate)
        assert near.rate_delta == pytest.approx(rate)
        assert near.within_rate_bound
        wide = regularized_defining(phi, epsilon=eps, delta=2.0 * rate)
        assert not wide.within_rate_bound

    def test_zero_sheet_tracks_graph_through_sweep(self):
        grid = cube_grid(1.0 / 128.0, 129, origin=-0.5)
        phi = smooth_field(
            grid, lambda a, b, c: 0.3 * np.sin(2.0 * a) * np.cos(b) + 0.1 * c
        )
        lip = 0.3 * 2.0 + 0.3 + 0.1
        sups = []
        for eps in (0.2, 0.16, 0.13):
            params = regularized_defining(phi, epsilon=eps, delta=eps * eps)
            d = zero_sheet_distance(params, phi)
            bound = lip * eps * eps + eps * (1.0 + 0.4**2 + 0.75 + 0.7**2)
            assert d <= bound
            sups.append(d)
        assert sups[0] > sups[1] > sups[2]
