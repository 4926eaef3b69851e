import math

import numpy as np
import pytest

import oracles
from heatgraph import graph
from heatgraph.feller import (
    birth_death_nonfeller,
    certificate_v,
    comparison_w,
    geodesic_ray,
    series_inner_degree,
    series_nonfeller,
    uniform_feller_probe,
)
from heatgraph.series import CONVERGES, DIVERGES, INCONCLUSIVE, classify_tail

FACTORIAL = graph.birth_death("1/fact(r)^2", "1/fact(r)^2")
CHAIN = graph.birth_death("r+1", "1")


class TestClassifier:
    @pytest.mark.parametrize("p,verdict", [(0.5, DIVERGES), (1.0, DIVERGES), (1.1, INCONCLUSIVE), (2.0, CONVERGES)])
    def test_power_laws(self, p, verdict):
        terms = [r**-p for r in range(1, 81)]
        assert classify_tail(terms, range(1, 81)).verdict == verdict

    def test_exponential(self):
        assert classify_tail([0.5**r for r in range(1, 60)]).verdict == CONVERGES
        assert classify_tail([1.1**r for r in range(1, 60)]).verdict == DIVERGES


class TestSeries:
    def test_chain_inner(self):
        rep = series_inner_degree(CHAIN, 0, 60)
        assert rep.terms[:3] == [1.0, 0.5, pytest.approx(1 / 3)]
        assert rep.verdict == DIVERGES

    def test_factorial_inner(self):
        rep = series_inner_degree(FACTORIAL, 0, 50)
        assert rep.terms[4] == pytest.approx(1 / 25, rel=1e-12)
        assert rep.verdict == CONVERGES

    def test_z_inner(self):
        rep = series_inner_degree(graph.line(), 0, 30)
        assert set(rep.terms) == {1.0}
        assert rep.verdict == DIVERGES

    def test_finite_graph(self):
        rep = series_inner_degree(graph.cycle(5), 0, 10)
        assert rep.verdict == DIVERGES and "empty" in rep.note

    def test_factorial_nonfeller(self):
        rep = series_nonfeller(FACTORIAL, 0, 50)
        for r in (3, 7, 12):
            assert rep.terms[r - 1] == pytest.approx(2 / r**2, rel=1e-10)
        assert rep.verdict == CONVERGES

    def test_z_nonfeller(self):
        rep = series_nonfeller(graph.line(), 0, 30)
        assert set(rep.terms) == {2.0} and rep.verdict == DIVERGES

    def test_chain_nonfeller(self):
        rep = series_nonfeller(CHAIN, 0, 40)
        assert rep.terms[4] == pytest.approx(7 / 5)
        assert rep.verdict == DIVERGES

    def test_partial_sums(self):
        rep = series_inner_degree(CHAIN, 0, 20)
        assert np.allclose(np.cumsum(rep.terms), rep.partial_sums)

    def test_scale_invariance(self):
        scaled = graph.birth_death("7*(r+1)", "7")
        for fn in (series_inner_degree, series_nonfeller):
            assert fn(scaled, 0, 40).verdict == fn(CHAIN, 0, 40).verdict

    def test_bad_window(self):
        with pytest.raises(ValueError):
            series_inner_degree(CHAIN, 0, 1)


class TestCertificates:
    def test_telescoping(self):
        rep = certificate_v(lambda i: i, -1.0, 99)
        assert rep.values[0] == 1.0
        assert rep.values[9] == pytest.approx(0.1)
        for r in (1, 50, 99):
            assert rep.values[r] == pytest.approx(oracles.telescoping_v(r), rel=1e-12)
        assert rep.vanishing

    def test_recursion(self):
        D = [i * i + 0.5 for i in range(1, 31)]
        rep = certificate_v(D, -0.7, 30)
        for r in range(30):
            assert rep.values[r + 1] / rep.values[r] == pytest.approx(D[r] / (D[r] + 0.7), rel=1e-14)

    def test_non_vanishing(self):
        rep = certificate_v(lambda i: i * i, -1.0, 99)
        assert not rep.vanishing and rep.values[-1] > 0.25

    def test_checked_on_chain(self):
        rep = certificate_v(lambda i: i, -1.0, 40, graph=CHAIN, x0=0)
        assert rep.checked == 40 and rep.holds

    def test_lambda_sign(self):
        with pytest.raises(ValueError):
            certificate_v(lambda i: i, 0.0, 10)

    def test_w_factorial(self):
        D = lambda i: i * i + 1  # d_-(i) + d_+(i) with b = m
        rep = comparison_w(D, lambda i: i * i, -1.0, 1.0, 50)
        assert rep.values[0] == 1.0
        for r in (1, 10, 50):
            assert rep.values[r] == pytest.approx(oracles.factorial_w(r), rel=1e-12)
        assert rep.bounded_below and rep.epsilon > 0.1

    def test_w_z(self):
        rep = comparison_w(lambda i: 2.0, lambda i: 1.0, -1.0, 1.0, 30)
        assert rep.values[5] == pytest.approx(3.0**-5)
        assert not rep.bounded_below

    def test_w_below_v(self):
        # the lower comparison never exceeds the upper certificate on the factorial family
        v = certificate_v(lambda i: i * i, -1.0, 50).values
        w = comparison_w(lambda i: i * i + 1, lambda i: i * i, -1.0, 1.0, 50).values
        assert all(a <= b + 1e-15 for a, b in zip(w, v))

    def test_w_errors(self):
        with pytest.raises(ValueError):
            comparison_w(lambda i: 2.0, lambda i: 1.0, 1.0, 1.0, 5)
        with pytest.raises(ValueError):
            comparison_w(lambda i: 2.0, lambda i: 1.0, -1.0, 0.0, 5)


class TestBirthDeath:
    def test_exact_kappa_style(self):
        rep = birth_death_nonfeller(b="1", m="2^-r")
        assert rep.verdict == "non-Feller-suspected"

    def test_half_line(self):
        rep = birth_death_nonfeller(b="1", m="1")
        assert math.isinf(rep.tail_series.terms[0])
        assert rep.verdict == "fails"

    def test_factorial(self):
        assert birth_death_nonfeller(FACTORIAL, Rmax=30).verdict == "non-Feller-suspected"

    def test_requires_chain(self):
        with pytest.raises(TypeError):
            birth_death_nonfeller(graph.line())


class TestProbe:
    def test_z(self):
        probe = uniform_feller_probe(graph.line(), 0, 1.0, n_times=16, Rmax=24)
        assert probe.decreasing
        assert probe.rows[10].max_p < 1e-6
        assert probe.max_comparison_residual <= 1e-10

    def test_zero_time_column(self):
        probe = uniform_feller_probe(graph.line(), 0, 1.0, n_times=5, Rmax=12)
        assert probe.times[0] == 0.0

    def test_c3_comparison(self):
        probe = uniform_feller_probe(graph.cycle(3), 0, 1.0, n_times=16, Rmax=4)
        assert probe.max_comparison_residual <= 1e-10

    def test_ray(self):
        ray = geodesic_ray(graph.lattice(2), (0, 0), 5)
        assert len(ray) == 6
        assert all(graph.graph_distance(graph.lattice(2), (0, 0), y) == r for r, y in enumerate(ray))
