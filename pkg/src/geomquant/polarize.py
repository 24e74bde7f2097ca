"""Polarized subspaces and quantum Hilbert spaces.

Covers membership in the position / momentum / holomorphic subspaces cut
out by covariantly-constant directions, polarization checks for
distributions, the Bargmann space of holomorphic sections with its
harmonic-oscillator spectrum k*hbar, and the half-form inner product that
identifies the vertically polarized Hilbert space with L2(R^n).

Complex coordinates follow z_j = x^j - i p_j, with
d/dz_j = (d/dx^j + i d/dp_j)/2 and d/dzbar_j = (d/dx^j - i d/dp_j)/2.
Holomorphic sections are e^{-p^2/2hbar} F(z) in the tautological gauge and
e^{-|z|^2/4hbar} F(z) in the symmetrized gauge (the Gaussian weight is in
|z|^2 = x^2 + p^2; the two families differ exactly by the gauge multiplier
e^{-(i/2hbar) x.p}).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .expr import (
    Add,
    Call,
    Const,
    DomainError,
    Expr,
    HBAR,
    Mul,
    PhaseSpace,
    Pow,
    Sym,
    derivative,
    evaluate,
    random_points,
    simplify,
)
from .mech import DivergentIntegralError, VectorFieldExpr, lie_bracket
from .prequant import (
    ConnectionForm,
    QuadratureSpec,
    assemble_matrix,
    harmonic_oscillator,
    inner_product,
    omega_of,
    prequantum_operator,
)

__all__ = [
    "Distribution",
    "PolarizationReport",
    "PolarizedSection",
    "BargmannBasis",
    "HalfFormSection",
    "membership_residual",
    "vertical_distribution",
    "holomorphic_distribution",
    "polarization_check",
    "leaf_projection",
    "bargmann_basis",
    "bargmann_element",
    "bargmann_gram",
    "bargmann_ho_apply",
    "bargmann_vs_prequant_crosscheck",
    "halfform_inner_product",
    "polarized_kp_check",
    "pos_norm_p_divergence",
]

_RANK_RTOL = 1e-10


# ---------------------------------------------------------------------------
# membership in V^pos / V^mom / V^hol

def _directions(which: str, space: PhaseSpace) -> list[VectorFieldExpr]:
    n = space.n
    dirs = []
    for j in range(n):
        comps = [Const(0)] * (2 * n)
        if which == "pos":
            comps[n + j] = Const(1)
        elif which == "mom":
            comps[j] = Const(1)
        elif which == "hol":
            comps[j] = Const(Fraction(1, 2))
            comps[n + j] = Const(-0.5j)
        else:
            raise ValueError("which must be one of pos|mom|hol")
        dirs.append(VectorFieldExpr(tuple(comps)))
    return dirs


def membership_residual(phi: Expr, which: str, theta: ConnectionForm, space: PhaseSpace,
                        rng: np.random.Generator | None = None,
                        n_points: int = 100, box: float = 2.0) -> float:
    """Max over directions and sample points of |nabla phi| / (1 + |phi|).

    Below 1e-8 means phi belongs to the requested polarized subspace.
    """
    from .prequant import covariant_derivative

    rng = rng or np.random.default_rng(0)
    pts = random_points(space, rng, n_points, box)
    phi_v = np.abs(np.broadcast_to(
        np.asarray(evaluate(phi, space, pts), dtype=complex), pts.shape[1:]))
    worst = 0.0
    for X in _directions(which, space):
        nabla = covariant_derivative(theta, X, phi, space)
        nv = np.abs(np.broadcast_to(
            np.asarray(evaluate(nabla, space, pts), dtype=complex), pts.shape[1:]))
        worst = max(worst, float(np.max(nv / (1.0 + phi_v))))
    return worst


@dataclass(frozen=True)
class PolarizedSection:
    """A section tagged with the polarization it is claimed to live in."""

    carrier: Expr
    tag: str  # pos | mom | hol
    hol_factor: Expr | None = None

    def validate(self, theta: ConnectionForm, space: PhaseSpace,
                 rng: np.random.Generator | None = None, tol: float = 1e-8) -> float:
        r = membership_residual(self.carrier, self.tag, theta, space, rng)
        if r >= tol:
            raise ValueError(f"section is not {self.tag}-polarized (residual {r:.2e})")
        return r


# ---------------------------------------------------------------------------
# distributions and polarizations

@dataclass(frozen=True)
class Distribution:
    """A constant-rank family of directions spanned by vector fields."""

    generators: tuple[VectorFieldExpr, ...]
    is_complex: bool = False

    def __post_init__(self):
        if not self.generators:
            raise ValueError("a distribution needs at least one generator")
        dims = {g.dim for g in self.generators}
        if len(dims) != 1:
            raise ValueError("generators live on different spaces")

    @property
    def rank(self) -> int:
        return len(self.generators)

    def values_at(self, space: PhaseSpace, points) -> np.ndarray:
        """Generator matrix per point: shape (npoints, 2n, rank)."""
        pts = np.asarray(points)
        cols = [g.values(space, pts).astype(complex) for g in self.generators]
        return np.stack(cols, axis=-1).transpose(1, 0, 2)


def vertical_distribution(space: PhaseSpace) -> Distribution:
    """span{d/dp_1 .. d/dp_n}."""
    gens = []
    for j in range(space.n):
        comps = [Const(0)] * space.dim
        comps[space.n + j] = Const(1)
        gens.append(VectorFieldExpr(tuple(comps)))
    return Distribution(tuple(gens), is_complex=False)


def holomorphic_distribution(space: PhaseSpace) -> Distribution:
    """span{d/dz_1 .. d/dz_n} with d/dz_j = (d/dx^j + i d/dp_j)/2."""
    gens = []
    for j in range(space.n):
        comps = [Const(0)] * space.dim
        comps[j] = Const(Fraction(1, 2))
        comps[space.n + j] = Const(0.5j)
        gens.append(VectorFieldExpr(tuple(comps)))
    return Distribution(tuple(gens), is_complex=True)


@dataclass(frozen=True)
class PolarizationReport:
    involutive: bool
    lagrangian: bool
    const_intersection: bool


def polarization_check(D: Distribution, space: PhaseSpace,
                       rng: np.random.Generator | None = None,
                       n_points: int = 100, box: float = 1.5,
                       tol: float = 1e-8) -> PolarizationReport:
    """Involutivity, Lagrangian-ness and constancy of dim(D n conj D).

    Involutivity is tested pointwise: each pairwise Lie bracket must lie in
    the span of the generators, by least squares.  Rank deficiency at a
    sample point is an error.
    """
    rng = rng or np.random.default_rng(0)
    pts = random_points(space, rng, n_points, box)
    G = D.values_at(space, pts)  # (npts, 2n, k)
    k = D.rank
    n = space.n

    for m in range(G.shape[0]):
        s = np.linalg.svd(G[m], compute_uv=False)
        if s[-1] <= _RANK_RTOL * s[0]:
            raise ValueError(f"generators are rank-deficient at sample point {m}")

    involutive = True
    for a in range(k):
        for b in range(a + 1, k):
            br = lie_bracket(D.generators[a], D.generators[b], space)
            bv = br.values(space, pts).astype(complex)  # (2n, npts)
            for m in range(G.shape[0]):
                sol, res, *_ = np.linalg.lstsq(G[m], bv[:, m], rcond=None)
                r = float(np.linalg.norm(G[m] @ sol - bv[:, m]))
                if r > tol * (1.0 + float(np.linalg.norm(bv[:, m]))):
                    involutive = False
                    break
            if not involutive:
                break
        if not involutive:
            break

    lagrangian = k == n
    if lagrangian:
        for a in range(k):
            for b in range(a, k):
                w = omega_of(D.generators[a], D.generators[b], space)
                wv = np.atleast_1d(np.asarray(evaluate(w, space, pts), dtype=complex))
                if float(np.max(np.abs(wv))) > tol:
                    lagrangian = False
                    break
            if not lagrangian:
                break

    dims = set()
    for m in range(G.shape[0]):
        stacked = np.concatenate([G[m], G[m].conj()], axis=1)
        s = np.linalg.svd(stacked, compute_uv=False)
        rank = int(np.sum(s > _RANK_RTOL * s[0]))
        dims.add(2 * k - rank)
    const_intersection = len(dims) == 1

    return PolarizationReport(involutive=involutive, lagrangian=lagrangian,
                              const_intersection=const_intersection)


def leaf_projection(preset: str, point) -> float:
    """Quotient label of a point under one of the three leaf presets.

    cotangent: fibers of T*R over R, label x;  horizontal: label p;
    radial: circles around the origin in R^2 minus the origin, label x^2+p^2.
    Two points get equal labels iff they lie on the same leaf.
    """
    pt = np.asarray(point, dtype=float)
    if pt.shape != (2,):
        raise ValueError("leaf presets are defined on 2-dimensional phase space")
    x, p = float(pt[0]), float(pt[1])
    if preset == "cotangent":
        return x
    if preset == "horizontal":
        return p
    if preset == "radial":
        if x == 0.0 and p == 0.0:
            raise ValueError("the radial preset is undefined at the origin")
        return x * x + p * p
    raise ValueError("preset must be one of cotangent|horizontal|radial")


# ---------------------------------------------------------------------------
# Bargmann space

def _z_expr() -> Expr:
    return simplify(Sym("x1") - Const(1j) * Sym("p1"))


def bargmann_element(k: int, gauge: str) -> Expr:
    """psi_k: z^k against the gauge's Gaussian weight (n = 1)."""
    x, p = Sym("x1"), Sym("p1")
    z = _z_expr()
    if gauge == "theta-tilde":
        weight = Call("exp", simplify(
            Mul((Const(Fraction(-1, 4)), Pow(HBAR, Fraction(-1)),
                 Add((Pow(x, Fraction(2)), Pow(p, Fraction(2))))))))
    elif gauge == "theta":
        weight = simplify(
            Call("exp", simplify(Mul((Const(Fraction(-1, 4)), Pow(HBAR, Fraction(-1)),
                                      Pow(z, Fraction(2))))))
            * Call("exp", simplify(Mul((Const(Fraction(-1, 2)), Pow(HBAR, Fraction(-1)),
                                        Pow(p, Fraction(2)))))))
    else:
        raise ValueError("gauge must be theta or theta-tilde")
    return simplify(Mul((Pow(z, Fraction(k)), weight))) if k else weight


@dataclass(frozen=True)
class BargmannBasis:
    hbar: float
    K: int
    gauge: str
    elements: tuple[Expr, ...]
    gram: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.gram)
        d = np.diag(G).real
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ValueError("Gram diagonal must be strictly positive and finite")
        off = np.abs(G - np.diag(np.diag(G)))
        bound = 1e-6 * np.sqrt(np.outer(d, d))
        if np.any(off > bound):
            raise ValueError("Gram matrix is not diagonal to relative 1e-6")

    def normalized_elements(self) -> tuple[Expr, ...]:
        d = np.sqrt(np.diag(self.gram).real)
        return tuple(simplify(Const(1.0 / nk) * e) for nk, e in zip(d, self.elements))


def bargmann_gram(K: int, hbar: float, gauge: str = "theta-tilde",
                  nodes: int = 64) -> np.ndarray:
    """Gram matrix of psi_0..psi_K under the plain phase-space inner product."""
    if K > 40:
        raise ValueError("K <= 40 keeps the quadrature within float range")
    if K < 0:
        raise ValueError("K must be >= 0")
    space = PhaseSpace(1, hbar=hbar)
    quad = QuadratureSpec(nodes=nodes, scale=float(np.sqrt(2.0 * hbar)))
    elems = [bargmann_element(k, gauge) for k in range(K + 1)]
    G = np.empty((K + 1, K + 1), dtype=complex)
    for a in range(K + 1):
        for b in range(a, K + 1):
            v = inner_product(elems[a], elems[b], space, quad)
            G[a, b] = v
            G[b, a] = np.conj(v)
    if not np.all(np.isfinite(G)):
        raise OverflowError("quadrature overflowed; reduce K")
    return G


def bargmann_basis(K: int, hbar: float, gauge: str = "theta-tilde",
                   nodes: int = 64) -> BargmannBasis:
    G = bargmann_gram(K, hbar, gauge, nodes)
    elems = tuple(bargmann_element(k, gauge) for k in range(K + 1))
    return BargmannBasis(hbar=hbar, K=K, gauge=gauge, elements=elems, gram=G)


def bargmann_ho_apply(F: Expr, hbar: float) -> Expr:
    """Action of the prequantum oscillator on the holomorphic factor:
    F(z) -> hbar z dF/dz, so monomials z^k are eigenvectors with value k*hbar."""
    return simplify(Mul((Const(hbar), Sym("z"), derivative(F, "z"))))


def bargmann_vs_prequant_crosscheck(K: int, hbar: float, nodes: int = 64) -> float:
    """Assemble Q(H) on the normalized psi_k and compare with diag(k*hbar).

    Returns the max entrywise discrepancy; small values demonstrate that the
    oscillator is diagonal and nonnegative on the Bargmann space.
    """
    if K > 20:
        raise ValueError("K <= 20 for the cross-check")
    space = PhaseSpace(1, hbar=hbar)
    basis = bargmann_basis(K, hbar, gauge="theta-tilde", nodes=nodes)
    onb = basis.normalized_elements()
    theta_tilde = ConnectionForm.symmetrized(space)
    Q = prequantum_operator(harmonic_oscillator(space), theta_tilde, space)
    quad = QuadratureSpec(nodes=nodes, scale=float(np.sqrt(2.0 * hbar)))
    op = assemble_matrix(Q, onb, quad, space,
                         labels=tuple(f"psi{k}" for k in range(K + 1)),
                         domain_note="Bargmann modes, symmetrized gauge")
    target = np.diag([hbar * k for k in range(K + 1)]).astype(complex)
    return float(np.max(np.abs(op.matrix - target)))


# ---------------------------------------------------------------------------
# half-form sections over the vertical polarization

@dataclass(frozen=True)
class HalfFormSection:
    """A pair (section, half-form coefficient), both functions of x only."""

    base: Expr
    coeff: Expr

    def check_p_independent(self, space: PhaseSpace,
                            rng: np.random.Generator | None = None,
                            tol: float = 1e-10) -> None:
        rng = rng or np.random.default_rng(0)
        pts = random_points(space, rng, 50, 2.0)
        for e in (self.base, self.coeff):
            for j in range(1, space.n + 1):
                d = derivative(e, f"p{j}")
                v = np.atleast_1d(np.asarray(evaluate(d, space, pts), dtype=complex))
                if float(np.max(np.abs(v))) > tol:
                    raise ValueError("half-form data must not depend on p")


def halfform_inner_product(a: HalfFormSection, b: HalfFormSection, hbar: float = 1.0,
                           nodes: int = 64, scale: float = 1.0) -> complex:
    """<a, b> = integral over R of conj(s_a f_a) s_b f_b dx (n = 1).

    This is the pairing that identifies the vertically polarized half-form
    space with L2(R).  A growing tail (integrand increasing at x = +-5, 10,
    20 times the scale) raises DivergentIntegralError.
    """
    space = PhaseSpace(1, hbar=hbar)
    integrand = simplify(Mul((a.base, a.coeff)))
    other = simplify(Mul((b.base, b.coeff)))

    def value(xs):
        pts = np.vstack([xs, np.zeros_like(xs)])
        av = np.broadcast_to(np.asarray(evaluate(integrand, space, pts), dtype=complex), xs.shape)
        bv = np.broadcast_to(np.asarray(evaluate(other, space, pts), dtype=complex), xs.shape)
        return np.conj(av) * bv

    tails = []
    with np.errstate(over="ignore"):
        for L in (5.0, 10.0, 20.0):
            try:
                tails.append(float(np.max(np.abs(value(np.array([-L * scale, L * scale]))))))
            except DomainError:
                raise DivergentIntegralError(
                    "integrand overflows along the tails") from None
    if tails[0] < tails[1] < tails[2]:
        raise DivergentIntegralError("integrand grows along the tails")

    t, w = np.polynomial.hermite.hermgauss(nodes)
    xs = scale * t
    eff = w * np.exp(t * t) * scale
    return complex(np.sum(eff * value(xs)))


def polarized_kp_check(f: Expr, space: PhaseSpace,
                       rng: np.random.Generator | None = None,
                       tol: float = 1e-10) -> bool:
    """True iff the top-form coefficient f(x, p) is constant along the fibers,
    i.e. every d f / dp_j vanishes at the sample points."""
    rng = rng or np.random.default_rng(0)
    pts = random_points(space, rng, 100, 2.0)
    for j in range(1, space.n + 1):
        d = derivative(f, f"p{j}")
        v = np.atleast_1d(np.asarray(evaluate(d, space, pts), dtype=complex))
        fv = np.atleast_1d(np.asarray(evaluate(f, space, pts), dtype=complex))
        if float(np.max(np.abs(v))) > tol * (1.0 + float(np.max(np.abs(fv)))):
            return False
    return True


def pos_norm_p_divergence(phi: Expr, space: PhaseSpace, x_slice: float = 0.7,
                          radii: tuple[float, ...] = (10.0, 20.0, 40.0),
                          nodes: int = 4001) -> bool:
    """Flag that the naive squared norm of a position section diverges.

    Integrates |phi|^2 over p in [-R, R] along a fixed x-slice for doubling
    R; growth beyond 1.5x per doubling means there is no finite L2 norm, so
    the naive position Hilbert space collapses to {0}.
    """
    vals = []
    for R in radii:
        ps = np.linspace(-R, R, nodes)
        pts = np.vstack([np.full_like(ps, x_slice), ps])
        v = np.broadcast_to(np.asarray(evaluate(phi, space, pts), dtype=complex), ps.shape)
        vals.append(float(np.trapezoid(np.abs(v) ** 2, ps)))
    return all(nxt > 1.5 * prev for prev, nxt in zip(vals, vals[1:]))
