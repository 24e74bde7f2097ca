import json
import math

import numpy as np
import pytest

from geomquant.expr import (
    Call,
    Const,
    HBAR,
    PhaseSpace,
    Pow,
    Sym,
    max_rel_residual,
    parse,
    random_points,
    random_polynomial,
    simplify,
)
from geomquant.mech import VectorFieldExpr
from geomquant.prequant import (
    ConnectionForm,
    QuadratureSpec,
    angular_mode,
    assemble_matrix,
    commutator_residual,
    covariant_derivative,
    curvature_check,
    gauge_phase,
    gauss_hermite_grid,
    harmonic_oscillator,
    inner_product,
    omega_of,
    prequantum_ho_spectrum,
    prequantum_operator,
)

from helpers import max_abs


def random_field(space, rng, degree=2, terms=2):
    return VectorFieldExpr(tuple(
        random_polynomial(space, rng, degree=degree, terms=terms)
        for _ in range(space.dim)))


@pytest.fixture
def theta(space1):
    return ConnectionForm.tautological(space1)


@pytest.fixture
def theta_tilde(space1):
    return ConnectionForm.symmetrized(space1)


class TestConnectionForm:
    def test_presets_satisfy_d_theta_equals_omega(self, space2, rng):
        for preset in (ConnectionForm.tautological(space2),
                       ConnectionForm.symmetrized(space2)):
            assert preset.curvature_residuals(space2, rng) < 1e-9

    def test_corrupted_potential_fails(self, space1, rng):
        bad = ConnectionForm((parse("2*p1", space1), Const(0)))
        assert bad.curvature_residuals(space1, rng) > 1e-2

    def test_tautological_evaluates_momenta(self, space1, rng):
        th = ConnectionForm.tautological(space1)
        dx = VectorFieldExpr((Const(1), Const(0)))
        dp = VectorFieldExpr((Const(0), Const(1)))
        assert th.of(dx) == Sym("p1")
        assert th.of(dp) == Const(0)


class TestCovariantDerivative:
    def test_vertical_direction_is_plain_derivative(self, space1, theta, rng):
        dp = VectorFieldExpr((Const(0), Const(1)))
        s = parse("x^2*p + sin(x)", space1)
        got = covariant_derivative(theta, dp, s, space1)
        pts = random_points(space1, rng, 40)
        assert max_rel_residual(got, parse("x^2 + 0*p", space1), space1, pts) < 1e-12

    def test_horizontal_on_unit_section(self, space1, theta, rng):
        dx = VectorFieldExpr((Const(1), Const(0)))
        got = covariant_derivative(theta, dx, Const(1), space1)
        want = simplify(Const(-1j) * Pow(HBAR, -1) * Sym("p1"))
        pts = random_points(space1, rng, 40)
        assert max_rel_residual(got, want, space1, pts) < 1e-12

    def test_leibniz_rule(self, space1, theta, rng):
        pts = random_points(space1, rng, 50)
        for _ in range(10):
            X = random_field(space1, rng)
            f = random_polynomial(space1, rng, degree=3, terms=2)
            s = random_polynomial(space1, rng, degree=3, terms=2)
            lhs = covariant_derivative(theta, X, simplify(f * s), space1)
            rhs = simplify(X.apply(f, space1) * s
                           + f * covariant_derivative(theta, X, s, space1))
            assert max_rel_residual(lhs, rhs, space1, pts) < 1e-9


class TestCurvature:
    def test_coordinate_fields_unit_section(self, space1, theta):
        dx = VectorFieldExpr((Const(1), Const(0)))
        dp = VectorFieldExpr((Const(0), Const(1)))
        res = curvature_check(theta, dx, dp, Const(1), space1)
        assert res == Const(0)
        # the commutator itself is +(i/hbar) s: Omega(d_x, d_p) = -1 in the
        # dp ^ dx orientation
        comm = simplify(
            covariant_derivative(theta, dx, covariant_derivative(theta, dp, Const(1), space1), space1)
            - covariant_derivative(theta, dp, covariant_derivative(theta, dx, Const(1), space1), space1))
        assert comm == simplify(Const(1j) * Pow(HBAR, -1))

    def test_omega_orientation(self, space1):
        dx = VectorFieldExpr((Const(1), Const(0)))
        dp = VectorFieldExpr((Const(0), Const(1)))
        assert omega_of(dx, dp, space1) == Const(-1)

    def test_equal_fields_vanish(self, space1, theta, rng):
        X = random_field(space1, rng)
        s = random_polynomial(space1, rng)
        res = curvature_check(theta, X, X, s, space1)
        assert max_abs(res, space1, random_points(space1, rng, 30)) < 1e-10

    def test_random_triples_both_presets(self, space1, rng):
        pts = random_points(space1, rng, 50)
        for preset in (ConnectionForm.tautological(space1),
                       ConnectionForm.symmetrized(space1)):
            for _ in range(15):
                X, Y = random_field(space1, rng), random_field(space1, rng)
                s = random_polynomial(space1, rng, degree=2, terms=2)
                res = curvature_check(preset, X, Y, s, space1)
                assert max_abs(res, space1, pts) < 1e-8

    def test_identities_hold_for_several_degrees_of_freedom(self, rng):
        # the symbolic side is not restricted to n = 1
        for n in (2, 3):
            sp = PhaseSpace(n, hbar=0.5)
            theta = ConnectionForm.tautological(sp)
            pts = random_points(sp, rng, 30)
            for _ in range(4):
                X, Y = random_field(sp, rng), random_field(sp, rng)
                s = random_polynomial(sp, rng, degree=2, terms=2)
                assert max_abs(curvature_check(theta, X, Y, s, sp), sp, pts) < 1e-8
                f = random_polynomial(sp, rng, degree=3, terms=2)
                g = random_polynomial(sp, rng, degree=3, terms=2)
                assert max_abs(commutator_residual(f, g, s, theta, sp), sp, pts) < 1e-7


class TestPrequantumOperator:
    def test_identity_on_constants(self, space1, theta, rng):
        Q1 = prequantum_operator(Const(1), theta, space1)
        s = parse("x^3*p - sin(p)", space1)
        assert max_rel_residual(Q1(s), s, space1, random_points(space1, rng, 30)) < 1e-12

    def test_oscillator_is_rotation_generator(self, space1, theta_tilde, rng):
        Q = prequantum_operator(harmonic_oscillator(space1), theta_tilde, space1)
        s = parse("x^2 + x*p", space1)
        want = simplify(Const(-1j) * HBAR * (
            Sym("p1") * parse("2*x + p", space1)
            - Sym("x1") * parse("x", space1)))
        assert max_rel_residual(Q(s), want, space1, random_points(space1, rng, 30)) < 1e-12

    def test_position_operator_in_tautological_gauge(self, space1, theta, rng):
        # Q(x) s = x s + i hbar d_p s
        Q = prequantum_operator(Sym("x1"), theta, space1)
        s = parse("exp(x*p/4)", space1)
        from geomquant.expr import derivative
        want = simplify(Sym("x1") * s + Const(1j) * HBAR * derivative(s, "p1"))
        assert max_rel_residual(Q(s), want, space1, random_points(space1, rng, 30)) < 1e-12

    def test_linearity(self, space1, theta, rng):
        f = random_polynomial(space1, rng)
        g = random_polynomial(space1, rng)
        s = random_polynomial(space1, rng)
        a, b = 2.5, -1.25
        combo = prequantum_operator(simplify(Const(a) * f + Const(b) * g), theta, space1)
        lhs = combo(s)
        rhs = simplify(Const(a) * prequantum_operator(f, theta, space1)(s)
                       + Const(b) * prequantum_operator(g, theta, space1)(s))
        assert max_rel_residual(lhs, rhs, space1, random_points(space1, rng, 30)) < 1e-10


class TestCommutator:
    def test_canonical_pair_settles_the_sign(self, space1, theta, rng):
        # [Q(x), Q(p)] = +i hbar id, so -(i/hbar)[Q(x), Q(p)] = Q({x, p}) = id
        Qx = prequantum_operator(Sym("x1"), theta, space1)
        Qp = prequantum_operator(Sym("p1"), theta, space1)
        s = parse("exp(x*p/3) + x^2", space1)
        comm = simplify(Qx(Qp(s)) - Qp(Qx(s)))
        pts = random_points(space1, rng, 40)
        assert max_rel_residual(comm, simplify(Const(1j) * HBAR * s), space1, pts) < 1e-12
        res = commutator_residual(Sym("x1"), Sym("p1"), s, theta, space1)
        assert max_abs(res, space1, pts) < 1e-10
        # the opposite sign misses by 2 Q({f,g}) s: not a tolerance artifact
        wrong = simplify(Const(1j) * Pow(HBAR, -1) * comm - s)
        assert max_abs(wrong, space1, pts) > 1.0

    def test_equal_observables_commute(self, space1, theta, rng):
        f = random_polynomial(space1, rng)
        s = random_polynomial(space1, rng)
        res = commutator_residual(f, f, s, theta, space1)
        assert max_abs(res, space1, random_points(space1, rng, 30)) < 1e-9

    def test_random_pairs(self, space1, theta, rng):
        pts = random_points(space1, rng, 50)
        for _ in range(15):
            f = random_polynomial(space1, rng, degree=3, terms=2)
            g = random_polynomial(space1, rng, degree=3, terms=2)
            s = random_polynomial(space1, rng, degree=2, terms=2)
            res = commutator_residual(f, g, s, theta, space1)
            assert max_abs(res, space1, pts) < 1e-7


class TestGaugeCovariance:
    def test_multiplier_intertwines_the_gauges(self, space1, rng):
        # theta~ = theta + d phi with phi = -(1/2) x.p, so
        # Q^tilde(f)(e^{(i/hbar) phi} s) = e^{(i/hbar) phi} Q^theta(f)(s)
        theta = ConnectionForm.tautological(space1)
        tilde = ConnectionForm.symmetrized(space1)
        mult = Call("exp", simplify(Const(1j) * Pow(HBAR, -1) * gauge_phase(space1)))
        pts = random_points(space1, rng, 40)
        for _ in range(8):
            f = random_polynomial(space1, rng, degree=3, terms=2)
            s = random_polynomial(space1, rng, degree=2, terms=2)
            lhs = prequantum_operator(f, tilde, space1)(simplify(mult * s))
            rhs = simplify(mult * prequantum_operator(f, theta, space1)(s))
            assert max_rel_residual(lhs, rhs, space1, pts) < 1e-7


class TestSpectrum:
    def test_zero_mode(self, space1):
        pairs = dict((label, v) for v, label in prequantum_ho_spectrum(1, space1))
        assert pairs["n=0"] == pytest.approx(0.0, abs=1e-12)
        assert pairs["n=1"] == pytest.approx(1.0, abs=1e-12)
        assert pairs["n=-1"] == pytest.approx(-1.0, abs=1e-12)

    def test_hbar_scaling(self):
        sp = PhaseSpace(1, hbar=2.0)
        pairs = dict((label, v) for v, label in prequantum_ho_spectrum(5, sp))
        assert pairs["n=5"] == pytest.approx(10.0, abs=1e-9)

    def test_unbounded_below(self, space1):
        values = [v for v, _ in prequantum_ho_spectrum(5, space1)]
        assert min(values) < 0
        assert values == sorted(values)
        assert np.allclose(values, np.arange(-5, 6), atol=1e-9)


class TestAssembleMatrix:
    def _angular_onb(self, space, n_range, nodes=48):
        quad = QuadratureSpec(nodes=nodes, scale=math.sqrt(2.0 * space.hbar))
        modes = [angular_mode(n, space) for n in n_range]
        norms = [math.sqrt(inner_product(m, m, space, quad).real) for m in modes]
        onb = [simplify(Const(1.0 / nk) * m) for nk, m in zip(norms, modes)]
        return onb, quad

    def test_identity_operator(self, space1):
        onb, quad = self._angular_onb(space1, range(-2, 3))
        top = assemble_matrix(lambda s: s, onb, quad, space1)
        assert np.max(np.abs(top.matrix - np.eye(5))) < 1e-8

    def test_oscillator_is_diagonal_on_angular_modes(self, space1):
        onb, quad = self._angular_onb(space1, range(-3, 4))
        Q = prequantum_operator(harmonic_oscillator(space1),
                                ConnectionForm.symmetrized(space1), space1)
        top = assemble_matrix(Q, onb, quad, space1,
                              labels=[f"n={n}" for n in range(-3, 4)])
        assert np.max(np.abs(top.matrix - np.diag(np.arange(-3, 4.0)))) < 1e-6
        assert np.max(np.abs(top.matrix - top.matrix.conj().T)) < 1e-6

    def test_position_operator_tridiagonal(self, space1):
        # oscillator eigenfunctions in x times a fixed Gaussian in p:
        # Q(x) reproduces the square-root ladder profile of x-matrix elements
        x, p = Sym("x1"), Sym("p1")
        gauss_x = Call("exp", parse("-x^2/2", space1))
        gauss_p = Call("exp", parse("-p^2/2", space1))
        hermites = [parse("1", space1), parse("2*x", space1),
                    parse("4*x^2 - 2", space1), parse("8*x^3 - 12*x", space1)]
        basis = []
        for k, hk in enumerate(hermites):
            norm = math.pi ** -0.5 * (2.0 ** k * math.factorial(k)) ** -0.5
            basis.append(simplify(Const(norm) * hk * gauss_x * gauss_p))
        quad = QuadratureSpec(nodes=64, scale=1.0)
        Q = prequantum_operator(x, ConnectionForm.tautological(space1), space1)
        top = assemble_matrix(Q, basis, quad, space1)
        want = np.zeros((4, 4))
        for k in range(3):
            want[k, k + 1] = want[k + 1, k] = math.sqrt((k + 1) / 2.0)
        assert np.max(np.abs(top.matrix - want)) < 1e-8
        # independent brute-force check of one entry
        xs = np.linspace(-10, 10, 4001)
        h0 = math.pi ** -0.25 * np.exp(-xs ** 2 / 2)
        h1 = math.pi ** -0.25 * math.sqrt(2.0) * xs * np.exp(-xs ** 2 / 2)
        brute = np.trapezoid(h0 * xs * h1, xs)
        assert top.matrix[0, 1].real == pytest.approx(brute, abs=1e-8)

    def test_formal_symmetry_for_real_observables(self, space1, rng):
        onb, quad = self._angular_onb(space1, range(-2, 3))
        f = parse("x^2 + x*p + p^2", space1)
        Q = prequantum_operator(f, ConnectionForm.symmetrized(space1), space1)
        top = assemble_matrix(Q, onb, quad, space1)
        assert np.max(np.abs(top.matrix - top.matrix.conj().T)) < 1e-6

    def test_rejects_non_orthonormal_basis(self, space1):
        quad = QuadratureSpec(nodes=32, scale=math.sqrt(2.0))
        modes = [angular_mode(n, space1) for n in (0, 1)]
        with pytest.raises(ValueError, match="orthonormal"):
            assemble_matrix(lambda s: s, modes, quad, space1)

    def test_json_round_trip_and_sorted_eigenvalues(self, space1):
        onb, quad = self._angular_onb(space1, range(-2, 3))
        Q = prequantum_operator(harmonic_oscillator(space1),
                                ConnectionForm.symmetrized(space1), space1)
        top = assemble_matrix(Q, onb, quad, space1,
                              labels=[f"n={n}" for n in range(-2, 3)])
        payload = json.loads(top.to_json())
        assert payload["basis_labels"] == ["n=-2", "n=-1", "n=0", "n=1", "n=2"]
        assert np.allclose(payload["matrix_re"], top.matrix.real)
        eigs = top.eigenvalues()
        assert np.all(np.diff(eigs.real) >= -1e-12)
        assert np.allclose(eigs.real, [-2, -1, 0, 1, 2], atol=1e-6)


class TestQuadrature:
    def test_grid_integrates_gaussian(self, space1):
        quad = QuadratureSpec(nodes=32, scale=1.0)
        pts, w = gauss_hermite_grid(space1, quad)
        vals = np.exp(-(pts[0] ** 2 + pts[1] ** 2))
        assert np.sum(w * vals) == pytest.approx(np.pi, rel=1e-12)

    def test_requires_single_degree_of_freedom(self, space2):
        with pytest.raises(ValueError):
            gauss_hermite_grid(space2, QuadratureSpec())
