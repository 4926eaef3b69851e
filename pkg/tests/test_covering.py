import math

import numpy as np
import pytest

import oracles
from heatgraph import graph
from heatgraph.covering import (
    converse_counterexample_report,
    cyclic_cover,
    diag_sheet_check,
    fiber_sum_residual,
    fiber_sums,
    identity_cover,
    lambda0_compare,
    line_over_cycle,
    mass_deficit_compare,
    product_cover,
    validate_covering,
)
from heatgraph.graph import GraphOracle, ball_truncation
from heatgraph.heat import dirichlet_heat_kernel, heat_kernel


def closed_kernel(g, t):
    d = ball_truncation(g, g.root, len(g.vertices))
    return d, dirichlet_heat_kernel(d, t)


class TestConstructors:
    def test_line_over_cycle(self):
        c = line_over_cycle(3)
        assert c.project(7) == 1
        assert c.fiber(0, 6) == [-6, -3, 0, 3, 6]
        assert math.isinf(c.sheets) and not c.finite_sheets

    def test_cyclic(self):
        c = cyclic_cover(9, 3)
        assert c.sheets == 3
        assert c.fiber(1, 9) == [1, 4, 7]

    def test_cyclic_divisibility(self):
        with pytest.raises(ValueError):
            cyclic_cover(6, 4)

    def test_small_k(self):
        with pytest.raises(ValueError):
            line_over_cycle(2)

    def test_product(self):
        c = product_cover(cyclic_cover(9, 3), cyclic_cover(9, 3))
        assert c.sheets == 9
        assert c.project((4, 8)) == (1, 2)
        assert len(c.fiber((0, 0), 20)) == 9

    def test_identity_factors(self):
        c = product_cover(graph.cycle(4), graph.cycle(5))
        assert c.sheets == 1
        assert c.project((2, 3)) == (2, 3)
        assert validate_covering(c, 3).ok

    def test_product_arity(self):
        c = product_cover(cyclic_cover(9, 3), graph.cycle(4))
        with pytest.raises(ValueError):
            c.project((1, 2, 3))

    def test_product_needs_two(self):
        with pytest.raises(ValueError):
            product_cover(cyclic_cover(9, 3))


class TestValidate:
    @pytest.mark.parametrize(
        "c",
        [line_over_cycle(3), cyclic_cover(9, 3), cyclic_cover(12, 3, b="1+r", m="2^-r"), line_over_cycle(4, m="r+1")],
        ids=["Z/C3", "C9/C3", "C12/C3-weighted", "Z/C4-weighted"],
    )
    def test_clean(self, c):
        rep = validate_covering(c, 6)
        assert rep.ok, rep.violations
        assert rep.checked > 0

    def test_tampered_weight(self):
        c = line_over_cycle(3)
        good = c.cover

        def neighbors(n):
            out = list(good.neighbors(n))
            if n in (4, 5):
                out = [(y, 2.5 if {n, y} == {4, 5} else w) for y, w in out]
            return out

        rep = validate_covering(c.with_cover(GraphOracle(0, neighbors, good.measure)), 6)
        assert not rep.ok
        assert any(v.startswith("weight") and "4" in v for v in rep.violations)

    def test_tampered_measure(self):
        c = cyclic_cover(9, 3)
        bad = graph.cycle(9, 1.0, lambda j: 2.0 if j == 5 else 1.0)
        rep = validate_covering(c.with_cover(bad), 4)
        assert any(v.startswith("measure") for v in rep.violations)

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            validate_covering(line_over_cycle(3), 0)


class TestFiberSums:
    @pytest.mark.parametrize("t", [0.1, 1.0])
    def test_c9_over_c3(self, t):
        c = cyclic_cover(9, 3)
        for y in range(3):
            rep = fiber_sum_residual(c, 0, y, t)
            assert rep.estimate.value == pytest.approx(oracles.cycle_kernel(3, t, 0, y), abs=1e-12)
            assert abs(rep.residual) < 1e-10

    def test_z_over_c3(self):
        c = line_over_cycle(3)
        radii = list(range(0, 21))
        _, vals = fiber_sums(c, 0, 0, 1.0, radii)
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        target = oracles.cycle_kernel(3, 1.0, 0, 0)
        assert abs(vals[-1] - target) < 1e-6
        # each partial sum lies below the unrestricted lattice sums over the same fiber points
        ref = oracles.z_fiber_partial_sums(1.0, 3, 20)
        assert all(v <= r + 1e-12 for v, r in zip(vals, ref))
        assert abs(ref[-1] - target) < 1e-12

    def test_zero_time(self):
        for c in (cyclic_cover(9, 3, m="r+1"), line_over_cycle(3, m="r+2")):
            for y in range(3):
                _, vals = fiber_sums(c, 1, y, 0.0, [4, 8])
                expected = 1 / c.base.measure(1) if y == 1 else 0.0
                assert vals == pytest.approx([expected] * len(vals), abs=1e-14)

    def test_partial_sums_bounded(self):
        c = line_over_cycle(3, b="1+r", m="1/(r+1)")
        for y in range(3):
            _, vals = fiber_sums(c, 0, y, 0.5, [2, 6, 10, 14])
            assert max(vals) <= 1 / c.base.measure(y) + 1e-12

    def test_deck_invariance(self):
        c = line_over_cycle(3)
        for y in range(3):
            _, a = fiber_sums(c, 0, y, 1.0, [20])
            _, b = fiber_sums(c, 0, y, 1.0, [20], basepoint=3)
            assert abs(a[0] - b[0]) < 1e-10

    def test_basepoint_must_lie_over_x(self):
        with pytest.raises(ValueError):
            fiber_sums(line_over_cycle(3), 0, 0, 1.0, [4], basepoint=1)

    def test_torus(self):
        c = product_cover(cyclic_cover(9, 3), cyclic_cover(9, 3))
        rep = fiber_sum_residual(c, (0, 0), (1, 2), 1.0)
        expected = oracles.cycle_kernel(3, 1.0, 0, 1) * oracles.cycle_kernel(3, 1.0, 0, 2)
        assert rep.estimate.value == pytest.approx(expected, abs=1e-12)
        assert abs(rep.residual) < 1e-10


class TestDomination:
    def test_cover_kernel_below_base(self):
        c = cyclic_cover(12, 3, b="1+r", m="1/(r+1)")
        _, Pc = closed_kernel(c.cover, 0.7)
        dc = ball_truncation(c.cover, 0, 12)
        db, Pb = closed_kernel(c.base, 0.7)
        for u in range(12):
            for v in range(12):
                base = Pb[db.index[c.project(u)], db.index[c.project(v)]]
                assert Pc[dc.index[u], dc.index[v]] <= base + 1e-12

    def test_coarea_identity(self):
        c = cyclic_cover(12, 3, b="2+r", m="1+r^2")
        rng = np.random.default_rng(3)
        phi = {y: float(rng.standard_normal()) for y in range(3)}
        dc, Pc = closed_kernel(c.cover, 0.9)
        x = c.lift(1)
        col = Pc[:, dc.index[x]]
        lhs = 0.0
        for y in range(3):
            q = sum(col[dc.index[p]] for p in c.fiber(y, 12, x))
            lhs += q * phi[y] * c.base.measure(y)
        rhs = sum(col[dc.index[v]] * phi[c.project(v)] * c.cover.measure(v) for v in range(12))
        assert lhs == pytest.approx(rhs, abs=1e-14)


class TestSheets:
    @pytest.mark.parametrize("t", [0.25, 1.0, 4.0])
    def test_c9(self, t):
        assert diag_sheet_check(cyclic_cover(9, 3), 0, t) >= -1e-10

    def test_c12(self):
        assert diag_sheet_check(cyclic_cover(12, 3), 1, 0.5) >= -1e-10

    def test_exact_value(self):
        expected = 3 * oracles.cycle_kernel(9, 1.0, 0, 0) - oracles.cycle_kernel(3, 1.0, 0, 0)
        assert diag_sheet_check(cyclic_cover(9, 3), 0, 1.0) == pytest.approx(expected, abs=1e-12)

    def test_identity(self):
        assert diag_sheet_check(identity_cover(graph.cycle(5)), 0, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_infinite_rejected(self):
        with pytest.raises(ValueError):
            diag_sheet_check(line_over_cycle(3), 0, 1.0)


class TestLambda0:
    def test_finite(self):
        cmp = lambda0_compare(cyclic_cover(9, 3))
        assert abs(cmp.gap) < 1e-12
        assert cmp.holds(finite_sheets=True)

    def test_weighted_finite(self):
        cmp = lambda0_compare(cyclic_cover(12, 3, b="1+r", m="1/(r+1)"))
        assert abs(cmp.gap) < 1e-8
        assert cmp.holds(finite_sheets=True)

    def test_z_over_c3(self):
        cmp = lambda0_compare(line_over_cycle(3), R=16)
        assert abs(cmp.base.value) < 1e-12
        assert min(cmp.cover.values) >= -1e-10
        assert cmp.holds()
        assert cmp.cover.values == sorted(cmp.cover.values, reverse=True)
        assert cmp.cover.value == pytest.approx(oracles.path_dirichlet_lambda0(16), abs=1e-12)

    def test_small_R(self):
        with pytest.raises(ValueError):
            lambda0_compare(line_over_cycle(3), R=1)


class TestMass:
    def test_finite(self):
        cmp = mass_deficit_compare(cyclic_cover(9, 3), 0, 1.0, R=8)
        assert max(map(abs, cmp.base_deficit + cmp.cover_deficit)) < 1e-12

    def test_z_over_c3(self):
        cmp = mass_deficit_compare(line_over_cycle(3), 0, 1.0, R=20)
        assert cmp.difference < 1e-6
        assert cmp.cover_deficit == sorted(cmp.cover_deficit, reverse=True)

    def test_si_product(self):
        c = product_cover(graph.birth_death("4^r", "1"), line_over_cycle(3))
        cmp = mass_deficit_compare(c, (0, 0), 1.0, R=20)
        assert cmp.difference < 1e-3
        assert min(cmp.base_deficit[-1], cmp.cover_deficit[-1]) > 1e-3

    def test_positive_time(self):
        with pytest.raises(ValueError):
            mass_deficit_compare(line_over_cycle(3), 0, 0.0)


def test_converse_report():
    rep = converse_counterexample_report()
    assert all(rep.verdicts.values()), rep.verdicts
    # sum_r sum_{k>r} 4^-k = sum_r 4^-r / 3 over r >= 1 = 4/9
    assert rep.tail_sum == pytest.approx(4 / 9, rel=1e-12)
    assert rep.cover_capacity.value > 0.05
    assert rep.certificate_inf > 0.5


def test_cover_kernel_matches_base_on_one_sheet():
    g = graph.birth_death("r+1", "1")
    c = identity_cover(g)
    rep = fiber_sum_residual(c, 0, 2, 1.0, R=16)
    assert abs(rep.estimate.value - heat_kernel(g, 0, 2, 1.0, Rmax=16).value) < 1e-12
