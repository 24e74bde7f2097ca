"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.  Sign-sensitive identities are asserted in the orientation that the
canonical (x, p) case forces under the conventions fixed in geomquant.mech;
each such test also pins the settlement itself, so a silent sign flip in
the library would fail loudly here.
"""

import math
import time

import numpy as np

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
from geomquant import mech, polarize, prequant, symplin

from helpers import field_residual, max_abs


def report(name: str, ok: bool, detail: str = ""):
    line = f"{name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def spaces_cycle(rng, max_n=3):
    return PhaseSpace(int(rng.integers(1, max_n + 1)))


def test_ac01_poisson_algebra_suite():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = {"antisymmetry": 0.0, "bilinearity": 0.0, "leibniz": 0.0, "jacobi": 0.0}
    for _ in range(200):
        sp = spaces_cycle(rng)
        pts = random_points(sp, rng, 100)
        f = random_polynomial(sp, rng, degree=4, terms=3)
        g = random_polynomial(sp, rng, degree=4, terms=3)
        h = random_polynomial(sp, rng, degree=4, terms=3)
        fg = mech.poisson_bracket(f, g, sp)
        worst["antisymmetry"] = max(worst["antisymmetry"], max_rel_residual(
            fg, simplify(Const(-1) * mech.poisson_bracket(g, f, sp)), sp, pts))
        a, b = 2.0, -3.0
        lin_l = mech.poisson_bracket(simplify(Const(a) * f + Const(b) * g), h, sp)
        lin_r = simplify(Const(a) * mech.poisson_bracket(f, h, sp)
                         + Const(b) * mech.poisson_bracket(g, h, sp))
        worst["bilinearity"] = max(worst["bilinearity"],
                                   max_rel_residual(lin_l, lin_r, sp, pts))
        lei_l = mech.poisson_bracket(f, simplify(g * h), sp)
        lei_r = simplify(mech.poisson_bracket(f, g, sp) * h
                         + mech.poisson_bracket(f, h, sp) * g)
        worst["leibniz"] = max(worst["leibniz"], max_rel_residual(lei_l, lei_r, sp, pts))
        jac_l = mech.poisson_bracket(f, mech.poisson_bracket(g, h, sp), sp)
        jac_r = simplify(mech.poisson_bracket(fg, h, sp)
                         + mech.poisson_bracket(g, mech.poisson_bracket(f, h, sp), sp))
        worst["jacobi"] = max(worst["jacobi"], max_rel_residual(jac_l, jac_r, sp, pts))
    elapsed = time.perf_counter() - start
    ok = all(v < 1e-8 for v in worst.values()) and elapsed < 30.0
    report("AC-01 poisson algebra (200 triples)", ok,
           f"max residual {max(worst.values()):.2e}, {elapsed:.1f}s")


def test_ac02_canonical_brackets_are_symbolic():
    ok = True
    for n in (1, 2, 3):
        sp = PhaseSpace(n)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                br = mech.poisson_bracket(Sym(f"x{i}"), Sym(f"p{j}"), sp)
                ok = ok and isinstance(br, Const) and br.value == (1 if i == j else 0)
                ok = ok and mech.poisson_bracket(Sym(f"x{i}"), Sym(f"x{j}"), sp) == Const(0)
                ok = ok and mech.poisson_bracket(Sym(f"p{i}"), Sym(f"p{j}"), sp) == Const(0)
    report("AC-02 {x^i, p_j} = delta_ij symbolically", ok)


def test_ac03_vector_field_bracket_correspondence():
    # Under Eq.-style bracket plus the Hamilton-flow field convention, the
    # correspondence f -> X_f REVERSES Lie brackets: X_{{f,g}} = [X_g, X_f].
    # The (x^2, p^2) pair pins the orientation: only one order can hold.
    rng = np.random.default_rng(103)
    sp1 = PhaseSpace(1)
    f0, g0 = parse("x^2", sp1), parse("p^2", sp1)
    pts1 = random_points(sp1, rng, 20)
    pinned = field_residual(
        mech.hamiltonian_vector_field(mech.poisson_bracket(f0, g0, sp1), sp1),
        mech.lie_bracket(mech.hamiltonian_vector_field(g0, sp1),
                         mech.hamiltonian_vector_field(f0, sp1), sp1),
        sp1, pts1)
    flipped = field_residual(
        mech.hamiltonian_vector_field(mech.poisson_bracket(f0, g0, sp1), sp1),
        mech.lie_bracket(mech.hamiltonian_vector_field(f0, sp1),
                         mech.hamiltonian_vector_field(g0, sp1), sp1),
        sp1, pts1)
    worst = 0.0
    for _ in range(100):
        sp = spaces_cycle(rng)
        pts = random_points(sp, rng, 30)
        f = random_polynomial(sp, rng, degree=3, terms=2)
        g = random_polynomial(sp, rng, degree=3, terms=2)
        lhs = mech.hamiltonian_vector_field(mech.poisson_bracket(f, g, sp), sp)
        rhs = mech.lie_bracket(mech.hamiltonian_vector_field(g, sp),
                               mech.hamiltonian_vector_field(f, sp), sp)
        worst = max(worst, field_residual(lhs, rhs, sp, pts))
    ok = worst < 1e-8 and pinned < 1e-12 and flipped > 1.0
    report("AC-03 X_{{f,g}} = [X_g, X_f] (100 pairs)", ok,
           f"residual {worst:.2e}; flipped-order control {flipped:.1f}")


def test_ac04_closed_form_flows():
    sp = PhaseSpace(1)
    free = mech.flow(parse("p^2/(2*m)", sp), sp, [0.0, 1.0], 1.0, 1e-3)
    free_err = abs(free.states[-1][0] - 1.0)

    H_osc = parse("p^2/2 + x^2/2", sp)
    osc = mech.flow(H_osc, sp, [1.0, 0.0], 2 * math.pi, 1e-3)
    osc_err = float(np.max(np.abs(osc.states[-1] - [1.0, 0.0])))

    g = 9.8
    grav = mech.flow(parse("p^2/(2*m) + m*g*x", sp), sp, [0.5, 2.0], 1.0, 1e-3,
                     params={"g": g})
    grav_err = abs(grav.states[-1][0] - (0.5 + 2.0 - 0.5 * g))

    # quadratic Hamiltonians are exactly conserved by the midpoint rule, so
    # the convergence order is measured on a quartic oscillator
    H4 = parse("p^2/2 + x^4/4", sp)
    drifts = [mech.flow(H4, sp, [1.0, 0.0], 5.0, dt).energy_drift(H4, sp)
              for dt in (0.02, 0.01)]
    order = math.log2(drifts[0] / drifts[1])

    ok = (free_err < 1e-10 and osc_err < 1e-5 and grav_err < 1e-8
          and 1.8 <= order <= 2.2)
    report("AC-04 closed-form flows", ok,
           f"free {free_err:.1e}, osc {osc_err:.1e}, grav {grav_err:.1e}, "
           f"order {order:.2f}")


def test_ac05_travel_time():
    sp = PhaseSpace(1)
    t_free = mech.travel_time(parse("0", sp), 2.0, 0.0, 3.0, 2.0)
    free_err = abs(t_free - 3.0 * math.sqrt(2.0 / (2.0 * 2.0)))

    t_lin = mech.travel_time(parse("x", sp), 2.0, 0.0, 2.0, 1.0)
    lin_err = abs(t_lin - math.sqrt(2.0 * 1.0 * (2.0 - 0.0)))

    flagged = False
    try:
        mech.travel_time(parse("2 - (2-x)^4", sp), 2.0, 0.0, 2.0, 1.0)
    except mech.DivergentIntegralError:
        flagged = True

    ok = free_err < 1e-6 * t_free and lin_err < 1e-5 * t_lin and flagged
    report("AC-05 travel time", ok,
           f"free {free_err:.1e}, linear {lin_err:.1e}, flat flagged {flagged}")


def test_ac06_liouville():
    rng = np.random.default_rng(106)
    worst = 0.0
    for _ in range(100):
        sp = spaces_cycle(rng)
        pts = random_points(sp, rng, 50)
        f = random_polynomial(sp, rng, degree=4, terms=3)
        worst = max(worst, max_abs(mech.liouville_divergence(f, sp), sp, pts))
    sp = PhaseSpace(1)
    step = mech.flow_step_map(parse("p^2/2 + x^4/4", sp), sp, 0.01, tol=1e-14)
    s0 = np.array([0.7, 0.3])
    eps = 1e-5
    J = np.zeros((2, 2))
    for k in range(2):
        d = np.zeros(2)
        d[k] = eps
        J[:, k] = (step(s0 + d) - step(s0 - d)) / (2 * eps)
    det_err = abs(float(np.linalg.det(J)) - 1.0)
    ok = worst < 1e-8 and det_err < 1e-6
    report("AC-06 Liouville", ok, f"div {worst:.1e}, det-1 {det_err:.1e}")


def _random_field(sp, rng):
    return mech.VectorFieldExpr(tuple(
        random_polynomial(sp, rng, degree=2, terms=2) for _ in range(sp.dim)))


def test_ac07_curvature_identity():
    rng = np.random.default_rng(107)
    sp = PhaseSpace(1)
    pts = random_points(sp, rng, 50)
    worst = 0.0
    for preset in (prequant.ConnectionForm.tautological(sp),
                   prequant.ConnectionForm.symmetrized(sp)):
        for _ in range(100):
            X, Y = _random_field(sp, rng), _random_field(sp, rng)
            s = random_polynomial(sp, rng, degree=2, terms=2)
            res = prequant.curvature_check(preset, X, Y, s, sp)
            worst = max(worst, max_abs(res, sp, pts))
    bad = prequant.ConnectionForm((parse("2*p1", sp), Const(0)))
    dx = mech.VectorFieldExpr((Const(1), Const(0)))
    dp = mech.VectorFieldExpr((Const(0), Const(1)))
    control = max_abs(prequant.curvature_check(bad, dx, dp, Const(1), sp), sp, pts)
    ok = worst < 1e-8 and control > 1e-2
    report("AC-07 curvature identity (both presets)", ok,
           f"residual {worst:.2e}, corrupted-theta control {control:.2e}")


def test_ac08_prequantum_commutator():
    # the canonical pair settles the sign: [Q(x), Q(p)] = +i hbar id, hence
    # -(i/hbar)[Q(f), Q(g)] = Q({f,g}) is the identity that holds here
    rng = np.random.default_rng(108)
    sp = PhaseSpace(1)
    theta = prequant.ConnectionForm.tautological(sp)
    pts = random_points(sp, rng, 50)
    worst = 0.0
    for _ in range(100):
        f = random_polynomial(sp, rng, degree=3, terms=2)
        g = random_polynomial(sp, rng, degree=3, terms=2)
        s = random_polynomial(sp, rng, degree=2, terms=2)
        res = prequant.commutator_residual(f, g, s, theta, sp)
        worst = max(worst, max_abs(res, sp, pts))
    Qx = prequant.prequantum_operator(Sym("x1"), theta, sp)
    Qp = prequant.prequantum_operator(Sym("p1"), theta, sp)
    s = parse("exp(x*p/3) + x^2", sp)
    comm = simplify(Qx(Qp(s)) - Qp(Qx(s)))
    canonical = max_rel_residual(comm, simplify(Const(1j) * HBAR * s), sp, pts)
    ok = worst < 1e-7 and canonical < 1e-10
    report("AC-08 -(i/hbar)[Q(f),Q(g)] = Q({f,g}) (100 pairs)", ok,
           f"residual {worst:.2e}; [Q(x),Q(p)] = +i hbar id to {canonical:.1e}")


def test_ac09_prequantum_oscillator_spectrum():
    sp = PhaseSpace(1)
    pairs = prequant.prequantum_ho_spectrum(5, sp, np.random.default_rng(109),
                                            ratio_tol=1e-9)
    values = np.array([v for v, _ in pairs])
    dev = float(np.max(np.abs(values - np.arange(-5, 6))))
    ok = dev < 1e-9 and values.min() < 0
    report("AC-09 prequantum oscillator spectrum n*hbar, n in -5..5", ok,
           f"lattice deviation {dev:.1e}, min {values.min():.0f}")


def test_ac10_bargmann_space():
    G = polarize.bargmann_gram(10, 1.0)
    d = np.diag(G).real
    off_ok = bool(np.all(np.abs(G - np.diag(np.diag(G)))
                         <= 1e-6 * np.sqrt(np.outer(d, d))))
    worst = 0.0
    for hbar in (0.5, 1.0, 2.0):
        worst = max(worst, polarize.bargmann_vs_prequant_crosscheck(5, hbar))
    basis = polarize.bargmann_basis(5, 1.0)
    onb = basis.normalized_elements()
    sp = PhaseSpace(1)
    Q = prequant.prequantum_operator(prequant.harmonic_oscillator(sp),
                                     prequant.ConnectionForm.symmetrized(sp), sp)
    quad = prequant.QuadratureSpec(nodes=64, scale=math.sqrt(2.0))
    top = prequant.assemble_matrix(Q, onb, quad, sp)
    min_eig = float(np.min(top.eigenvalues().real))
    ok = off_ok and worst < 1e-5 and min_eig >= -1e-5
    report("AC-10 Bargmann gram + diag(k hbar) + nonnegativity", ok,
           f"diag dev {worst:.1e}, min eig {min_eig:.1e}")


def test_ac11_polarized_subspace_lemma():
    rng = np.random.default_rng(111)
    sp = PhaseSpace(1)
    theta = prequant.ConnectionForm.tautological(sp)
    res = {}
    # position family psi(x), momentum family e^{(i/hbar) x p} psi(p),
    # holomorphic family e^{-p^2/2hbar} z^k; counterexamples alongside
    res["pos"] = polarize.membership_residual(
        parse("exp(-x^2/2)*(x^3 + 1)", sp), "pos", theta, sp, rng)
    res["pos_counter"] = polarize.membership_residual(
        parse("x*p", sp), "pos", theta, sp, rng)
    phase = Call("exp", simplify(Const(1j) * Pow(HBAR, -1) * Sym("x1") * Sym("p1")))
    res["mom"] = polarize.membership_residual(
        simplify(phase * parse("exp(-p^2/2)", sp)), "mom", theta, sp, rng)
    res["mom_counter"] = polarize.membership_residual(
        parse("exp(-p^2/2)", sp), "mom", theta, sp, rng)
    z = simplify(Sym("x1") - Const(1j) * Sym("p1"))
    zbar = simplify(Sym("x1") + Const(1j) * Sym("p1"))
    res["hol"] = polarize.membership_residual(
        simplify(parse("exp(-p^2/(2*hbar))", sp) * Pow(z, 3)), "hol", theta, sp, rng)
    res["hol_counter"] = polarize.membership_residual(
        simplify(parse("exp(-p^2/(2*hbar))", sp) * zbar), "hol", theta, sp, rng)
    # closure under linear combinations
    combo = simplify(Const(2.0) * parse("exp(-x^2/2)", sp)
                     - Const(1.5) * parse("x^4", sp))
    res["pos_combination"] = polarize.membership_residual(combo, "pos", theta, sp, rng)
    families = all(res[k] < 1e-8 for k in ("pos", "mom", "hol", "pos_combination"))
    counters = all(res[k] > 1e-2 for k in ("pos_counter", "mom_counter", "hol_counter"))
    ok = families and counters
    report("AC-11 polarized subspace characterizations", ok,
           f"family max {max(res[k] for k in ('pos', 'mom', 'hol')):.1e}, "
           f"counter min {min(res[k] for k in ('pos_counter', 'mom_counter', 'hol_counter')):.1e}")


def test_ac12_polarization_checker():
    rng = np.random.default_rng(112)
    sp = PhaseSpace(2)
    vert = polarize.polarization_check(polarize.vertical_distribution(sp), sp, rng)
    holo = polarize.polarization_check(polarize.holomorphic_distribution(sp), sp, rng)
    bad = polarize.polarization_check(polarize.Distribution((
        mech.VectorFieldExpr((Const(1), Const(0), Const(0), Const(0))),
        mech.VectorFieldExpr((Const(0), Const(0), Sym("x1"), Const(1))),
    )), sp, rng)
    ok = (vert.involutive and vert.lagrangian
          and holo.involutive and holo.lagrangian and holo.const_intersection
          and not bad.involutive)
    report("AC-12 polarization checker", ok,
           f"vertical {vert}, dz {holo}, control involutive={bad.involutive}")


def test_ac13_symplectic_linear_algebra():
    rng = np.random.default_rng(113)
    import scipy.linalg as sla

    darboux_worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 6))  # 2n <= 10
        while True:
            A = rng.normal(size=(2 * n, 2 * n))
            M = A - A.T
            if abs(np.linalg.det(M)) > 1e-6:
                break
        form = symplin.SymplecticForm(M)
        E, F = symplin.darboux_basis(form)
        darboux_worst = max(
            darboux_worst,
            float(np.max(np.abs(E.T @ M @ E))),
            float(np.max(np.abs(F.T @ M @ F))),
            float(np.max(np.abs(E.T @ M @ F - np.eye(n)))))

    perp_worst = 0.0
    for _ in range(25):
        n = int(rng.integers(1, 5))
        while True:
            A = rng.normal(size=(2 * n, 2 * n))
            M = A - A.T
            if abs(np.linalg.det(M)) > 1e-6:
                break
        form = symplin.SymplecticForm(M)
        k = int(rng.integers(1, 2 * n))
        Y = symplin.Subspace(rng.normal(size=(2 * n, k)))
        Z = symplin.symplectic_complement(form, symplin.symplectic_complement(form, Y))
        perp_worst = max(perp_worst, Y.distance(Z))

    round_trip_worst = 0.0
    n = 3
    form = symplin.standard_form(n)
    for _ in range(20):
        S = rng.normal(size=(2 * n, 2 * n))
        S = sla.expm(form.matrix @ (S + S.T) * 0.25)
        J = symplin.ComplexStructure(
            S @ symplin.standard_complex_structure(n).matrix @ np.linalg.inv(S))
        compat, pos = symplin.check_compatible_positive(form, J)
        assert compat and pos
        FJ = symplin.plus_i_eigenspace(J)
        assert symplin.hermitian_form_on_F(form, FJ).positive_definite
        J2 = symplin.complex_structure_from_subspace(FJ)
        round_trip_worst = max(round_trip_worst,
                               float(np.max(np.abs(J2.matrix - J.matrix))))

    ok = darboux_worst < 1e-9 and perp_worst < 1e-8 and round_trip_worst < 1e-9
    report("AC-13 symplectic linear algebra", ok,
           f"darboux {darboux_worst:.1e}, perp {perp_worst:.1e}, "
           f"J round-trip {round_trip_worst:.1e}")


def test_ac14_half_form_pairing():
    rng = np.random.default_rng(114)
    sp = PhaseSpace(1)
    a = polarize.HalfFormSection(
        base=Const(1),
        coeff=simplify(Const(math.pi ** -0.25) * parse("exp(-x^2/2)", sp)))
    norm_err = abs(polarize.halfform_inner_product(a, a) - 1.0)

    b = polarize.HalfFormSection(base=Const(1),
                                 coeff=simplify(parse("x*exp(-x^2/2)", sp)))
    odd = abs(polarize.halfform_inner_product(a, b))

    xs = np.linspace(-10.0, 10.0, 20001)
    ident_worst = 0.0
    for _ in range(10):
        c1 = rng.normal(size=3)
        c2 = rng.normal(size=3)
        p1 = simplify(Const(float(c1[0])) + Const(float(c1[1])) * Sym("x1")
                      + Const(float(c1[2])) * Pow(Sym("x1"), 2))
        p2 = simplify(Const(float(c2[0])) + Const(float(c2[1])) * Sym("x1")
                      + Const(float(c2[2])) * Pow(Sym("x1"), 2))
        s1 = polarize.HalfFormSection(base=p1, coeff=parse("exp(-x^2/2)", sp))
        s2 = polarize.HalfFormSection(base=p2, coeff=parse("exp(-x^2/2)", sp))
        got = polarize.halfform_inner_product(s1, s2).real
        v1 = np.polyval(c1[::-1], xs)
        v2 = np.polyval(c2[::-1], xs)
        brute = float(np.trapezoid(v1 * v2 * np.exp(-xs ** 2), xs))
        ident_worst = max(ident_worst, abs(got - brute) / (1.0 + abs(brute)))

    ok = norm_err < 1e-8 and odd < 1e-10 and ident_worst < 1e-6
    report("AC-14 half-form pairing = L2(R)", ok,
           f"norm {norm_err:.1e}, odd {odd:.1e}, L2 ident {ident_worst:.1e}")
