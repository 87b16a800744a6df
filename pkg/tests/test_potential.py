"""Tests for the Cantor-set / Green-potential chain.

Frozen oracle values: contraction ratios evaluate 4^(-1/alpha) directly;
box counts of the aligned construction are exact powers of four; the
single-atom potential is -log|z| in closed form; flux recovery and growth
constants are pinned from an independent run of the same deterministic
pipeline and guarded here against drift.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from levicheck.fields import DiscField, DomainError, ParameterError
from levicheck.potential import (
    AmbiguousCellError,
    AtomicMeasure,
    box_dimension,
    build_square_cantor,
    contraction_ratio,
    disc_mass_recovery,
    frostman_certificate,
    frostman_measure,
    graph_set_points,
    green_kernel,
    green_potential,
    laplacian_mass_recovery,
    potential_field,
    rectangle_flux_mass,
    zygmund_domain,
    zygmund_seminorm,
)
from levicheck.staircase import subharmonicity_scan

A_THREE_HALVES = 0.3968502629920499
U5_AT_ZERO = 0.9919134445786028
GRAPH_SLOPE_PIN = 1.9000366685595318
GROWTH_CONSTANTS = {4: 1.1328125, 5: 1.13671875, 6: 1.138671875}


@pytest.fixture(scope="module")
def gen5():
    square_set = build_square_cantor(1.0, 5)
    measure = frostman_measure(square_set)
    return square_set, measure, green_potential(measure)


@pytest.fixture(scope="module")
def gen4_field():
    measure = frostman_measure(build_square_cantor(1.0, 4))
    return potential_field(green_potential(measure), 1.0, 1.0 / 512.0)


@pytest.fixture(scope="module")
def cantor_scan():
    domain = zygmund_domain(1.0, 4, spacing=1.0 / 256.0)
    return domain, subharmonicity_scan(domain)


class TestContractionRatio:
    def test_alpha_one_is_exact_quarter(self):
        assert contraction_ratio(1.0) == 0.25

    def test_alpha_three_halves(self):
        a = contraction_ratio(1.5)
        assert abs(a - 0.39685) <= 1e-5
        assert abs(a - A_THREE_HALVES) <= 1e-12

    @pytest.mark.parametrize("alpha", [0.0, -0.3, 2.0, 2.5])
    def test_out_of_range_alpha_rejected(self, alpha):
        with pytest.raises(ParameterError, match="alpha"):
            contraction_ratio(alpha)


class TestSquareCantor:
    def test_square_count_is_four_to_the_n(self):
        for n in (1, 2, 3, 4):
            assert len(build_square_cantor(1.0, n).squares) == 4**n

    def test_side_ratio_exact_across_generations(self):
        a = contraction_ratio(1.3)
        prev = build_square_cantor(1.3, 1)
        for n in (2, 3, 4):
            cur = build_square_cantor(1.3, n)
            assert abs(cur.side / prev.side - a) <= 1e-15
            prev = cur

    def test_contained_in_closed_half_disc(self):
        sc = build_square_cantor(1.9, 4)
        corners = np.asarray(sc.squares)
        for dx in (0.0, sc.side):
            for dy in (0.0, sc.side):
                r = np.hypot(corners[:, 0] + dx, corners[:, 1] + dy)
                assert r.max() <= 0.5 + 1e-12

    def test_centered_at_origin(self):
        c = build_square_cantor(0.8, 3).centers()
        lo = c.min(axis=0)
        hi = c.max(axis=0)
        assert np.abs(lo + hi).max() <= 1e-12

    def test_squares_pairwise_disjoint(self):
        sc = build_square_cantor(1.7, 3)
        c = np.asarray(sc.squares)
        gap_x = np.abs(c[:, None, 0] - c[None, :, 0])
        gap_y = np.abs(c[:, None, 1] - c[None, :, 1])
        sep = np.maximum(gap_x, gap_y)
        np.fill_diagonal(sep, np.inf)
        assert sep.min() > sc.side

    def test_generation_and_budget_guards(self):
        with pytest.raises(ParameterError, match="generation"):
            build_square_cantor(1.0, 0)
        with pytest.raises(ParameterError, match="budget"):
            build_square_cantor(1.0, 11)

    def test_json_round_trip(self):
        sc = build_square_cantor(1.0, 2)
        payload = json.loads(sc.to_json())
        assert payload["generation"] == 2
        assert len(payload["squares"]) == 16
        assert payload["side"] == sc.side


class TestAtomicMeasure:
    def test_total_mass_exactly_one(self, gen5):
        _, measure, _ = gen5
        assert measure.total_mass() == 1.0

    def test_atom_masses_are_four_to_minus_n(self, gen5):
        _, measure, _ = gen5
        assert np.all(measure.masses == 4.0**-5)

    def test_refinement_restricted_mass_exact(self):
        for n in (1, 2, 3):
            parent = build_square_cantor(1.0, n)
            child = frostman_measure(build_square_cantor(1.0, n + 1))
            x, y = parent.squares[0]
            assert child.box_mass(x, y, parent.side) == 4.0**-n

    def test_full_diameter_disc_carries_all_mass(self, gen5):
        square_set, measure, _ = gen5
        r = square_set.diameter()
        assert measure.disc_mass(0.0, r) == 1.0
        assert measure.disc_mass(0.0, r) / r**1.0 <= r**-1.0

    def test_invalid_measures_rejected(self):
        with pytest.raises(ParameterError, match="atom"):
            AtomicMeasure(generation=0, atoms=())
        with pytest.raises(ParameterError, match="positive"):
            AtomicMeasure(generation=0, atoms=((0j, -1.0), (0.1 + 0j, 2.0)))
        with pytest.raises(ParameterError, match="mass"):
            AtomicMeasure(generation=1, atoms=((0j, 0.5), (0.1 + 0j, 0.6)))

    def test_json_lists_atoms(self, gen5):
        _, measure, _ = gen5
        payload = json.loads(measure.to_json())
        assert payload["generation"] == 5
        assert len(payload["atoms"]) == 4**5


class TestGreenKernel:
    def test_symmetry_on_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            rz, tz, rw, tw = rng.random(4)
            z = 0.95 * rz * np.exp(2j * math.pi * tz)
            w = 0.95 * rw * np.exp(2j * math.pi * tw)
            assert abs(green_kernel(z, w) - green_kernel(w, z)) <= 1e-12

    @given(
        st.floats(0.0, 0.9),
        st.floats(0.0, 1.0),
        st.floats(0.0, 0.9),
        st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_inside_disc(self, rz, tz, rw, tw):
        z = rz * np.exp(2j * math.pi * tz)
        w = rw * np.exp(2j * math.pi * tw)
        if abs(z - w) > 0:
            assert green_kernel(z, w) >= -1e-12

    def test_atom_hit_is_flagged_infinite(self):
        assert math.isinf(green_kernel(0.3 + 0.1j, 0.3 + 0.1j))

    def test_pole_outside_disc_raises(self):
        with pytest.raises(DomainError, match="pole"):
            green_kernel(2.0 + 0j, 0.5 + 0j)


class TestGreenPotential:
    def test_single_atom_closed_form(self):
        u = green_potential(AtomicMeasure(generation=0, atoms=((0j, 1.0),)))
        assert abs(u(0.5 + 0j) - math.log(2.0)) <= 1e-12
        rng = np.random.default_rng(1)
        for _ in range(20):
            z = 0.9 * rng.random() * np.exp(2j * math.pi * rng.random())
            if abs(z) > 1e-6:
                assert abs(u(z) + math.log(abs(z))) <= 1e-12

    def test_atom_hit_returns_flagged_infinity(self, gen5):
        _, measure, potential = gen5
        assert math.isinf(potential(measure.atoms[7][0]))

    def test_outside_disc_rejected(self, gen5):
        _, _, potential = gen5
        with pytest.raises(DomainError, match="disc"):
            potential(1.5 + 0j)

    def test_boundary_vanishing_512_samples(self, gen5):
        _, _, potential = gen5
        theta = 2.0 * math.pi * np.arange(512) / 512
        vals = potential.grid_values(np.cos(theta), np.sin(theta))
        assert np.abs(vals).max() <= 1e-10

    def test_value_at_origin_matches_direct_sum(self, gen5):
        _, measure, potential = gen5
        oracle = -math.fsum(m * math.log(abs(w)) for w, m in measure.atoms)
        val = potential(0j)
        assert val > 0.0
        assert abs(val - oracle) <= 1e-12
        assert abs(val - U5_AT_ZERO) <= 1e-12

    def test_nonnegative_on_grid(self, gen5):
        _, _, potential = gen5
        field = potential_field(potential, 1.0, 1.0 / 128.0)
        inside = field.values[field.inside]
        assert np.nanmin(inside) >= -1e-12


class TestMassRecovery:
    def test_disc_radius_09_recovers_total_mass(self, gen5):
        _, _, potential = gen5
        recovered = disc_mass_recovery(potential, 0.9)
        assert abs(recovered - 1.0) <= 0.02
        assert abs(recovered - 1.0) <= 1e-5

    def test_empty_cell_recovers_zero(self, gen5):
        _, _, potential = gen5
        probe = laplacian_mass_recovery(potential, (0.61, 0.0, 0.05))
        assert probe.expected == 0.0
        assert abs(probe.recovered) <= 1e-3

    def test_single_atom_cell_within_tolerance(self, gen5):
        _, measure, potential = gen5
        locs = measure.locations
        pts = np.column_stack([locs.real, locs.imag])
        gap = cKDTree(pts).query(pts, k=2)[0][:, 1].min()
        w = locs[0]
        side = 0.8 * gap
        probe = laplacian_mass_recovery(
            potential, (w.real - side / 2, w.imag - side / 2, side)
        )
        assert probe.expected == 4.0**-5
        assert probe.rel_error <= 0.05
        assert probe.rel_error <= 1e-3

    def test_top_cluster_cells_within_five_percent(self, gen5):
        _, _, potential = gen5
        pad = 0.01
        side1 = 0.7 * 0.25
        for cx in (-0.35, 0.35 - side1):
            for cy in (-0.35, 0.35 - side1):
                probe = laplacian_mass_recovery(
                    potential, (cx - pad, cy - pad, side1 + 2 * pad)
                )
                assert probe.expected == 0.25
                assert probe.rel_error <= 0.05

    def test_atom_on_boundary_is_ambiguous_until_shifted(self, gen5):
        _, measure, potential = gen5
        w = measure.locations[0]
        side = 1e-3
        with pytest.raises(AmbiguousCellError, match="shift"):
            laplacian_mass_recovery(
                potential, (w.real - side, w.imag - side / 2, side)
            )
        probe = laplacian_mass_recovery(
            potential, (w.real - side / 2, w.imag - side / 2, side)
        )
        assert probe.expected == 4.0**-5
        assert probe.rel_error <= 0.05

    def test_cell_preconditions(self, gen5):
        _, _, potential = gen5
        with pytest.raises(ParameterError, match="positive"):
            laplacian_mass_recovery(potential, (0.0, 0.0, -0.1))
        with pytest.raises(ParameterError, match="inside the circle"):
            laplacian_mass_recovery(potential, (0.7, 0.0, 0.25))
        with pytest.raises(ParameterError, match="fd step"):
            laplacian_mass_recovery(potential, (0.0, 0.0, 0.1), fd_step=0.05)

    def test_flux_additive_over_adjacent_cells(self, gen5):
        _, _, potential = gen5
        x0, y0, s = 0.01, 0.03, 0.11
        left = laplacian_mass_recovery(potential, (x0, y0, s), fd_step=s / 64)
        right = laplacian_mass_recovery(potential, (x0 + s, y0, s), fd_step=s / 64)
        union = rectangle_flux_mass(
            potential, x0, y0, 2 * s, s, samples_x=512, samples_y=256, fd_step=s / 64
        )
        assert abs(left.recovered + right.recovered - union) <= 1e-10


class TestFrostmanCertificate:
    def test_constants_pinned_and_stable(self):
        consts = {}
        for n in (4, 5, 6):
            cert = frostman_certificate(
                frostman_measure(build_square_cantor(1.0, n)), 1.0
            )
            assert cert.constant == GROWTH_CONSTANTS[n]
            consts[n] = cert.constant
        assert 0.5 <= consts[5] / consts[4] <= 2.0
        assert 0.5 <= consts[6] / consts[5] <= 2.0

    def test_json_schema(self):
        cert = frostman_certificate(
            frostman_measure(build_square_cantor(1.0, 3)), 1.0
        )
        payload = json.loads(cert.to_json())
        assert set(payload) == {"alpha", "n", "C", "samples"}
        assert payload["n"] == 3
        assert payload["C"] == cert.constant

    def test_alpha_guard(self, gen5):
        _, measure, _ = gen5
        with pytest.raises(ParameterError, match="alpha"):
            frostman_certificate(measure, 2.5)


class TestBoxDimension:
    def test_planar_alpha_one_slope_exact(self):
        sc = build_square_cantor(1.0, 8)
        scales = [0.7 * 0.25**k for k in range(1, 7)]
        reg = box_dimension(sc.centers(), scales)
        assert reg.counts == (4, 16, 64, 256, 1024, 4096)
        assert abs(reg.slope - 1.0) <= 1e-9
        assert abs(reg.slope - 1.0) <= 0.1

    def test_planar_alpha_half_slope(self):
        sc = build_square_cantor(0.5, 8)
        a = sc.ratio
        reg = box_dimension(sc.centers(), [0.7 * a**k for k in range(1, 6)])
        assert abs(reg.slope - 0.5) <= 1e-9

    def test_parameter_guards(self):
        pts = np.zeros((10, 2))
        with pytest.raises(ParameterError, match="5 scales"):
            box_dimension(pts, [0.5, 0.25, 0.125, 0.0625])
        with pytest.raises(ParameterError, match="positive"):
            box_dimension(pts, [0.5, 0.25, 0.125, 0.0625, 0.0])
        with pytest.raises(ParameterError, match="nonempty"):
            box_dimension(np.zeros((0, 2)), [0.5, 0.25, 0.125, 0.0625, 0.03125])

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=20, deadline=None)
    def test_counts_nonincreasing_in_scale(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.random((64, 2))
        scales = [2.0**-k for k in range(1, 7)]
        reg = box_dimension(pts, scales)
        assert all(a <= b for a, b in zip(reg.counts, reg.counts[1:]))


class TestGraphSet:
    def test_point_cloud_shape_and_radii(self, gen5):
        square_set, _, potential = gen5
        pts = graph_set_points(square_set, potential, n_angles=16)
        assert pts.shape == (4**5 * 16, 4)
        assert np.isfinite(pts).all()
        r = np.hypot(pts[:, 2], pts[:, 3])
        assert r.min() > 0.0
        assert r.max() < 1.0

    def test_graph_dimension_near_one_plus_alpha(self, gen5):
        square_set, _, potential = gen5
        pts = graph_set_points(square_set, potential, n_angles=1024)
        reg = box_dimension(pts, [2.0**-k for k in range(3, 9)])
        assert abs(reg.slope - 2.0) <= 0.15
        assert abs(reg.slope - GRAPH_SLOPE_PIN) <= 2e-2


class TestZygmundSeminorm:
    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_quadratic_attains_max_at_largest_offset(self, alpha):
        field = DiscField.from_function(1.0, 1.0 / 256.0, lambda x, y: x * x + y * y)
        m = zygmund_seminorm(field, alpha, budget=2000)
        top = 2.0 * 0.1 ** (2.0 - alpha)
        assert m <= top * 1.02
        assert m >= 2.0 * 0.09 ** (2.0 - alpha)

    def test_affine_field_has_zero_seminorm(self):
        field = DiscField.from_function(
            1.0, 1.0 / 256.0, lambda x, y: 0.3 * x - 0.7 * y + 0.1
        )
        assert zygmund_seminorm(field, 1.0, budget=2000) <= 1e-10

    def test_green_potential_stable_under_budget_doubling(self, gen4_field):
        m1 = zygmund_seminorm(gen4_field, 1.0, budget=4000)
        m2 = zygmund_seminorm(gen4_field, 1.0, budget=8000)
        assert math.isfinite(m1) and m1 > 0.0
        assert 1.0 / 1.2 <= m2 / m1 <= 1.2

    def test_parameter_guards(self, gen4_field):
        with pytest.raises(ParameterError, match="alpha"):
            zygmund_seminorm(gen4_field, 2.0, budget=10)
        with pytest.raises(ParameterError, match="budget"):
            zygmund_seminorm(gen4_field, 1.0, budget=0)
        coarse = DiscField.from_function(1.0, 0.2, lambda x, y: x * y)
        with pytest.raises(ParameterError, match="coarse"):
            zygmund_seminorm(coarse, 1.0, budget=10)


class TestZygmundDomain:
    def test_metadata_and_cap_formula(self, cantor_scan):
        domain, _ = cantor_scan
        assert domain.kind == "cantor"
        assert domain.params["generation"] == 4
        assert domain.params["atoms"] == 256
        pot = green_potential(frostman_measure(build_square_cantor(1.0, 4)))
        xs = domain.cap.axis()
        i, j = 300, 350
        ref = 0.5 * math.log(1.0 - (xs[i] ** 2 + xs[j] ** 2)) - pot(
            complex(xs[i], xs[j])
        )
        assert abs(domain.cap.values[i, j] - ref) <= 1e-12

    def test_violations_localized_near_squares(self, cantor_scan):
        domain, scan = cantor_scan
        h = domain.cap.spacing
        viol = np.argwhere(scan.violating)
        assert len(viol) > 0
        xs = domain.cap.axis()
        sq = build_square_cantor(1.0, 4)
        centers = sq.centers()
        dist = np.empty(len(viol))
        for k, (i, j) in enumerate(viol):
            ddx = np.maximum(
                np.maximum(centers[:, 0] - xs[i], xs[i] - (centers[:, 0] + sq.side)),
                0.0,
            )
            ddy = np.maximum(
                np.maximum(centers[:, 1] - xs[j], xs[j] - (centers[:, 1] + sq.side)),
                0.0,
            )
            dist[k] = np.hypot(ddx, ddy).min()
        assert dist.max() <= 4.5 * h
        assert dist.max() <= 0.1

    def test_far_field_is_strictly_superharmonic(self, cantor_scan):
        domain, scan = cantor_scan
        locs = frostman_measure(build_square_cantor(1.0, 4)).locations
        gx, gy = domain.cap.meshes()
        dist = (
            cKDTree(np.column_stack([locs.real, locs.imag]))
            .query(np.column_stack([gx.ravel(), gy.ravel()]))[0]
            .reshape(gx.shape)
        )
        far = scan.scanned & (dist > 0.1)
        assert not np.any(scan.violating & far)
        assert np.nanmax(scan.laplacian[far]) <= -2.0 + 1e-2

    def test_violating_set_shrinks_with_alpha(self):
        counts = []
        for alpha in (1.0, 0.5, 0.25):
            scan = subharmonicity_scan(zygmund_domain(alpha, 3, spacing=1.0 / 256.0))
            counts.append(int(scan.violating.sum()))
        assert counts[0] > counts[1] > counts[2] > 0
