from itertools import combinations

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from formflow.core import expr as ex
from formflow.core.errors import DegreeError, DimensionMismatchError, UnsupportedDegreeError
from formflow.core.forms import (Connection, DifferentialForm, basis, commutator_1form, exact_one_form,
                                 exterior_derivative, is_closed, permutation_sign, wedge)
from formflow.core.grid import Grid
from formflow.tests.strategies import COORDS, forms, gammas, points, tame

XY = ("x", "y")
XYZ = ("x", "y", "z")


def one_form(coords, **components):
    return DifferentialForm.from_components(coords, components)


def at(e, **point):
    return ex.evaluate(e, point)


class TestDifferentialForm:
    def test_degree_outside_dimension(self):
        with pytest.raises(DegreeError):
            DifferentialForm(XY, 3)

    def test_indices_must_increase(self):
        with pytest.raises(DegreeError):
            DifferentialForm(XY, 2, {(1, 0): "x"})

    def test_repeated_coordinates(self):
        with pytest.raises(DimensionMismatchError):
            DifferentialForm(("x", "x"), 1)

    def test_zero_coefficients_are_dropped(self):
        f = DifferentialForm(XY, 1, {(0,): 0.0, (1,): "x"})
        assert f.components() == [((1,), ex.Var("x"))]

    def test_coefficient_on_any_ordering(self):
        f = DifferentialForm(XYZ, 2, {(0, 2): "y"})
        assert f.coefficient(("z", "x")) == ex.neg(ex.Var("y"))
        assert f.coefficient((0, 0)) == ex.ZERO

    def test_forms_on_different_coordinates_do_not_add(self):
        with pytest.raises(DimensionMismatchError):
            basis(XY, "x") + basis(("x", "z"), "x")

    def test_permutation_sign(self):
        assert permutation_sign((0, 1, 2)) == 1
        assert permutation_sign((1, 0, 2)) == -1
        assert permutation_sign((2, 0, 1)) == 1
        assert permutation_sign((1, 1)) == 0


class TestWedge:
    def test_antisymmetry_of_basis(self):
        assert wedge(basis(XY, "x"), basis(XY, "y")).coefficient((0, 1)) == ex.ONE
        assert at(wedge(basis(XY, "y"), basis(XY, "x")).coefficient((0, 1))) == -1.0

    def test_sign_bookkeeping(self):
        f = wedge(one_form(XY, y="x"), one_form(XY, x="y"))
        assert at(f.coefficient((0, 1)), x=2.0, y=3.0) == -6.0

    def test_degree_overflow(self):
        with pytest.raises(DegreeError):
            wedge(DifferentialForm(XY, 2, {(0, 1): 1.0}), basis(XY, "x"))

    def test_one_form_squares_to_zero(self):
        theta = one_form(XYZ, x="y", y="z^2", z="x*y")
        square = wedge(theta, theta)
        for _, coefficient in square.components():
            assert ex.evaluate(coefficient, {"x": 0.3, "y": 1.2, "z": -0.5}) == 0.0


class TestExteriorDerivative:
    def test_product_rule(self):
        df = exterior_derivative(one_form(XY, y="x"))
        assert df.degree == 2
        assert df.coefficient((0, 1)) == ex.ONE

    def test_y_dx(self):
        df = exterior_derivative(one_form(XY, x="y"))
        assert at(df.coefficient((0, 1))) == -1.0

    def test_connection_only_for_one_forms(self):
        conn = Connection(XYZ, {(0, 0, 1): 1.0})
        two_form = DifferentialForm(XYZ, 2, {(0, 1): "z"})
        with pytest.raises(UnsupportedDegreeError):
            exterior_derivative(two_form, conn)

    def test_top_degree_has_no_derivative(self):
        with pytest.raises(DegreeError):
            exterior_derivative(DifferentialForm(XY, 2, {(0, 1): "x"}))

    def test_two_form_in_three_dimensions(self):
        # d(x dy^dz + y dz^dx + z dx^dy) = 3 dx^dy^dz
        f = DifferentialForm(XYZ, 2, {(1, 2): "x", (0, 2): "-y", (0, 1): "z"})
        df = exterior_derivative(f)
        assert at(df.coefficient((0, 1, 2))) == 3.0


def _coefficients_are_tame(point, *forms_):
    return tame(point, *(c for f in forms_ for _, c in f.components()))


def assert_same_form(left, right, point, tol=1e-8):
    assert (left.coords, left.degree) == (right.coords, right.degree)
    for index in combinations(range(left.dim), left.degree):
        expected = ex.evaluate(right.coefficient(index), point)
        assert ex.evaluate(left.coefficient(index), point) == pytest.approx(expected, rel=tol, abs=tol)


degrees = st.integers(min_value=0, max_value=2)


class TestLaws:
    @settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.data(), points)
    def test_d_of_d_vanishes(self, data, point):
        f = data.draw(degrees.flatmap(forms))
        assume(_coefficients_are_tame(point, f))
        ddf = exterior_derivative(exterior_derivative(f))
        assert ddf.degree == f.degree + 2
        assert_same_form(ddf, DifferentialForm.zero(COORDS, f.degree + 2), point)

    @settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.data(), points)
    def test_graded_anticommutativity(self, data, point):
        p, q = data.draw(degrees), data.draw(degrees)
        a, b = data.draw(forms(p)), data.draw(forms(q))
        assume(_coefficients_are_tame(point, a, b))
        sign = (-1) ** (p * q)
        assert_same_form(wedge(a, b), wedge(b, a).scale(float(sign)), point)

    @settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.data(), points)
    def test_leibniz_rule(self, data, point):
        p = data.draw(degrees)
        q = data.draw(st.integers(min_value=0, max_value=min(2, 3 - p)))
        a, b = data.draw(forms(p)), data.draw(forms(q))
        assume(_coefficients_are_tame(point, a, b))
        left = exterior_derivative(wedge(a, b))
        right = wedge(exterior_derivative(a), b) + wedge(a, exterior_derivative(b)).scale(float((-1) ** p))
        assert_same_form(left, right, point)

    @settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(forms(1), gammas, points)
    def test_commutator_matches_the_derivative_under_torsion(self, theta, gamma, point):
        assume(_coefficients_are_tame(point, theta) and tame(point, *gamma.values()))
        conn = Connection.from_coefficients(COORDS, gamma)
        field_ = commutator_1form(theta, conn)
        dtheta = exterior_derivative(theta, conn)
        theta_at = [ex.evaluate(theta.coefficient((s,)), point) for s in range(4)]

        def gamma_at(s, a, b):
            return ex.evaluate(gamma[(s, a, b)], point) if (s, a, b) in gamma else 0.0

        for a, b in combinations(range(4), 2):
            expected = (ex.evaluate(ex.differentiate(theta.coefficient((b,)), COORDS[a]), point)
                        - ex.evaluate(ex.differentiate(theta.coefficient((a,)), COORDS[b]), point))
            expected += sum((gamma_at(s, b, a) - gamma_at(s, a, b)) * theta_at[s] for s in range(4))
            total = ex.evaluate(field_.total(a, b), point)
            assert total == pytest.approx(expected, rel=1e-9, abs=1e-9)
            assert ex.evaluate(dtheta.coefficient((a, b)), point) == pytest.approx(total, rel=1e-12, abs=1e-12)


class TestCommutator:
    def test_exact_form_has_zero_commutator(self):
        field_ = commutator_1form(exact_one_form(XY, "x*y"))
        assert field_.total(0, 1) == ex.ZERO

    def test_y_dx(self):
        field_ = commutator_1form(one_form(XY, x="y"))
        assert at(field_.coefficient_term(0, 1)) == -1.0
        assert at(field_.coefficient_term(1, 0)) == 1.0

    def test_zero_coefficients_annihilate_torsion(self):
        conn = Connection(XY, {(0, 0, 1): 1.0, (1, 0, 1): 1.0})
        field_ = commutator_1form(DifferentialForm.zero(XY, 1), conn)
        assert field_.connection_term(0, 1) == ex.ZERO

    def test_connection_term(self):
        conn = Connection(XY, {("x", "x", "y"): "2"})
        field_ = commutator_1form(one_form(XY, x="y"), conn)
        assert at(field_.connection_term(0, 1), y=3.0) == 6.0
        assert at(field_.total(0, 1), y=3.0) == 5.0

    def test_connection_from_full_coefficients(self):
        conn = Connection.from_coefficients(XY, {(0, 1, 0): "x"})
        assert conn.torsion(0, 0, 1) == ex.Var("x")
        assert conn.torsion(0, 1, 0) == ex.neg(ex.Var("x"))

    def test_connection_keys_are_normalized(self):
        conn = Connection(XY, {(0, 1, 0): 1.0})
        assert at(conn.torsion(0, 0, 1)) == -1.0

    def test_requires_one_form(self):
        with pytest.raises(DegreeError):
            commutator_1form(DifferentialForm.scalar(XY, "x"))


class TestIsClosed:
    def setup_method(self):
        self.grid = Grid.uniform({"x": (-1.0, 1.0), "y": (-1.0, 1.0)}, count=20)

    def test_exact_form(self):
        report = is_closed(exact_one_form(XY, "sin(x)*y"), grid=self.grid)
        assert report.closed
        assert report.max_residual < 1e-12

    def test_y_dx(self):
        report = is_closed(one_form(XY, x="y"), grid=self.grid)
        assert not report.closed
        assert report.max_residual == pytest.approx(1.0)
        assert report.worst_point == {"x": -1.0, "y": -1.0}

    def test_default_grid(self):
        report = is_closed(one_form(XY, x="y"))
        assert report.to_dict()["maxResidual"] == pytest.approx(1.0)

    def test_top_degree_is_closed(self):
        assert is_closed(DifferentialForm(XY, 2, {(0, 1): "x*y"})).closed

    def test_domain_violations_are_skipped(self):
        report = is_closed(one_form(XY, x="y*ln(x)"), grid=Grid.from_spec("x=0:1:3,y=0:1:3"))
        assert report.skipped_points == 3
        assert report.max_residual == pytest.approx(np.log(2.0))

    def test_every_point_skipped_is_not_closed(self):
        report = is_closed(one_form(XY, x="y*ln(x)"), grid=Grid.from_spec("x=-2:-1:3,y=0:1:3"))
        assert not report.closed
        assert report.max_residual is None

    def test_report_keys(self):
        data = is_closed(one_form(XY, x="y"), grid=self.grid).to_dict()
        assert set(data) == {"degree", "dim", "closed", "maxResidual", "worstPoint", "skippedPoints"}
        assert np.isfinite(data["maxResidual"])
