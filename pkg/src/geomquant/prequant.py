"""Prequantization on T*R^n with the trivial line bundle.

The connection along a vector field X is nabla_X = X - (i/hbar) theta(X),
for a potential 1-form theta with d theta = Omega = sum_j dp_j ^ dx^j,
and the prequantum operator is Q(f) = -i hbar nabla_{X_f} + f.

Sign dictionary under the conventions fixed in :mod:`geomquant.mech`
(all of it verified numerically in the test suite; only one sign can hold
per bracket convention, and the (x, p) case settles it):

    [nabla_X, nabla_Y] = nabla_[X,Y] - (i/hbar) Omega(X, Y)
    -(i/hbar) [Q(f), Q(g)] = Q({f,g})
    [Q(x^k), Q(p_k)] = +i hbar id

where Omega(d_x, d_p) = -1 per the dp ^ dx orientation, so the commutator
[nabla_{d_x}, nabla_{d_p}] is +i/hbar times the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .expr import (
    Add,
    Call,
    Const,
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
from .mech import VectorFieldExpr, hamiltonian_vector_field, lie_bracket

__all__ = [
    "SectionFn",
    "ConnectionForm",
    "TruncatedOperator",
    "QuadratureSpec",
    "PrequantumOperator",
    "omega_of",
    "covariant_derivative",
    "curvature_check",
    "prequantum_operator",
    "commutator_residual",
    "prequantum_ho_spectrum",
    "gauss_hermite_grid",
    "inner_product",
    "assemble_matrix",
    "gauge_phase",
    "harmonic_oscillator",
    "angular_mode",
]

SectionFn = Expr

_MINUS_I_OVER_HBAR = Mul((Const(-1j), Pow(HBAR, Fraction(-1))))
_I_OVER_HBAR = Mul((Const(1j), Pow(HBAR, Fraction(-1))))


@dataclass(frozen=True)
class ConnectionForm:
    """A 1-form sum_j (a_j dx^j + b_j dp_j) with symbolic coefficients.

    components are ordered (a_1..a_n, b_1..b_n), matching the coordinate
    order of the space.
    """

    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) % 2 != 0 or not self.components:
            raise ValueError("a 1-form on phase space needs 2n components")

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def tautological(cls, space: PhaseSpace) -> "ConnectionForm":
        """theta = sum_j p_j dx^j."""
        a = tuple(Sym(f"p{j}") for j in range(1, space.n + 1))
        b = tuple(Const(0) for _ in range(space.n))
        return cls(a + b)

    @classmethod
    def symmetrized(cls, space: PhaseSpace) -> "ConnectionForm":
        """theta~ = (1/2) sum_j (p_j dx^j - x^j dp_j)."""
        half = Const(Fraction(1, 2))
        a = tuple(simplify(Mul((half, Sym(f"p{j}")))) for j in range(1, space.n + 1))
        b = tuple(simplify(Mul((Const(Fraction(-1, 2)), Sym(f"x{j}"))))
                  for j in range(1, space.n + 1))
        return cls(a + b)

    def of(self, X: VectorFieldExpr) -> Expr:
        """theta(X) as an expression."""
        if X.dim != self.dim:
            raise ValueError("dimension mismatch between form and vector field")
        return simplify(Add(tuple(Mul((c, x)) for c, x in zip(self.components, X.components))))

    def curvature_residuals(self, space: PhaseSpace, rng: np.random.Generator,
                            n_points: int = 50, box: float = 2.0) -> float:
        """Max residual of the coefficient identities stating d theta = Omega:
        d(a_j)/dp_k - d(b_k)/dx^j = delta_jk and the x-x / p-p antisymmetrized
        derivatives vanish."""
        n = space.n
        a = self.components[:n]
        b = self.components[n:]
        pts = random_points(space, rng, n_points, box)
        worst = 0.0

        def resid(e):
            vals = np.atleast_1d(np.asarray(evaluate(e, space, pts)))
            return float(np.max(np.abs(vals)))

        for j in range(n):
            for k in range(n):
                mixed = simplify(derivative(a[j], f"p{k+1}") - derivative(b[k], f"x{j+1}")
                                 - Const(1 if j == k else 0))
                worst = max(worst, resid(mixed))
                xx = simplify(derivative(a[j], f"x{k+1}") - derivative(a[k], f"x{j+1}"))
                pp = simplify(derivative(b[j], f"p{k+1}") - derivative(b[k], f"p{j+1}"))
                worst = max(worst, resid(xx), resid(pp))
        return worst


def omega_of(X: VectorFieldExpr, Y: VectorFieldExpr, space: PhaseSpace) -> Expr:
    """Omega(X,Y) for Omega = sum_j dp_j ^ dx^j, as an expression."""
    n = space.n
    terms = []
    for j in range(n):
        terms.append(Mul((X.components[n + j], Y.components[j])))
        terms.append(Mul((Const(-1), Y.components[n + j], X.components[j])))
    return simplify(Add(tuple(terms)))


def covariant_derivative(theta: ConnectionForm, X: VectorFieldExpr, s: SectionFn,
                         space: PhaseSpace) -> SectionFn:
    """nabla_X s = X(s) - (i/hbar) theta(X) s."""
    return simplify(Add((
        X.apply(s, space),
        Mul((_MINUS_I_OVER_HBAR, theta.of(X), s)),
    )))


def curvature_check(theta: ConnectionForm, X: VectorFieldExpr, Y: VectorFieldExpr,
                    s: SectionFn, space: PhaseSpace) -> SectionFn:
    """Residual of [nabla_X, nabla_Y]s = nabla_[X,Y]s - (i/hbar) Omega(X,Y)s.

    Identically zero whenever d theta = Omega; a corrupted potential leaves
    a nonzero multiple of s.
    """
    nXnY = covariant_derivative(theta, X, covariant_derivative(theta, Y, s, space), space)
    nYnX = covariant_derivative(theta, Y, covariant_derivative(theta, X, s, space), space)
    nbr = covariant_derivative(theta, lie_bracket(X, Y, space), s, space)
    omega_term = Mul((_I_OVER_HBAR, omega_of(X, Y, space), s))
    return simplify(Add((nXnY, Mul((Const(-1), nYnX)), Mul((Const(-1), nbr)), omega_term)))


@dataclass(frozen=True)
class PrequantumOperator:
    """Q(f) = -i hbar nabla_{X_f} + f, acting on sections symbolically."""

    f: Expr
    theta: ConnectionForm
    space: PhaseSpace
    field: VectorFieldExpr = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "field", hamiltonian_vector_field(self.f, self.space))

    def __call__(self, s: SectionFn) -> SectionFn:
        nabla = covariant_derivative(self.theta, self.field, s, self.space)
        return simplify(Add((
            Mul((Const(-1j), HBAR, nabla)),
            Mul((self.f, s)),
        )))


def prequantum_operator(f: Expr, theta: ConnectionForm, space: PhaseSpace) -> PrequantumOperator:
    return PrequantumOperator(f=f, theta=theta, space=space)


def commutator_residual(f: Expr, g: Expr, s: SectionFn, theta: ConnectionForm,
                        space: PhaseSpace) -> SectionFn:
    """Residual of -(i/hbar)[Q(f), Q(g)]s = Q({f,g})s.

    The minus sign is the one the (x, p) case forces under the fixed bracket
    convention: [Q(x), Q(p)] = +i hbar id while {x, p} = 1.
    """
    from .mech import poisson_bracket

    Qf = prequantum_operator(f, theta, space)
    Qg = prequantum_operator(g, theta, space)
    Qbr = prequantum_operator(poisson_bracket(f, g, space), theta, space)
    comm = Add((Qf(Qg(s)), Mul((Const(-1), Qg(Qf(s))))))
    return simplify(Add((
        Mul((_MINUS_I_OVER_HBAR, comm)),
        Mul((Const(-1), Qbr(s))),
    )))


# ---------------------------------------------------------------------------
# the harmonic-oscillator spectral pathology

def harmonic_oscillator(space: PhaseSpace) -> Expr:
    """H = (1/2) sum_j (p_j^2 + x_j^2)."""
    terms = []
    for j in range(1, space.n + 1):
        terms.append(Pow(Sym(f"x{j}"), Fraction(2)))
        terms.append(Pow(Sym(f"p{j}"), Fraction(2)))
    return simplify(Mul((Const(Fraction(1, 2)), Add(tuple(terms)))))


I_UNIT = Const(1j)


def angular_mode(n_angular: int, space: PhaseSpace) -> Expr:
    """The section z^n e^{-r^2/(4 hbar)} (conjugate power for negative n).

    In polar coordinates this is f(r) e^{i n phi} with the angle oriented so
    that Q(H) has eigenvalue n*hbar on it; n ranges over all of Z, which is
    what makes the prequantum oscillator unbounded below.
    """
    if space.n != 1:
        raise ValueError("angular modes are a 1-degree-of-freedom construction")
    x, p = Sym("x1"), Sym("p1")
    z = x - I_UNIT * p
    zbar = x + I_UNIT * p
    radial = Call("exp", simplify(
        Mul((Const(Fraction(-1, 4)), Pow(HBAR, Fraction(-1)),
             Add((Pow(x, Fraction(2)), Pow(p, Fraction(2))))))
    ))
    angular = Pow(z, Fraction(n_angular)) if n_angular >= 0 else Pow(zbar, Fraction(-n_angular))
    return simplify(Mul((angular, radial)))


def prequantum_ho_spectrum(n_modes: int, space: PhaseSpace,
                           rng: np.random.Generator | None = None,
                           n_points: int = 20, box: float = 1.5,
                           ratio_tol: float = 1e-9) -> list[tuple[float, str]]:
    """Eigenvalues n*hbar of Q(H) on the angular modes, n in -n_modes..n_modes.

    Each eigenvalue is confirmed by the pointwise ratio Q(H)mode / mode at
    random sample points; negative entries demonstrate that Q(H) is not
    bounded below on the prequantum space.
    """
    if n_modes < 0:
        raise ValueError("n_modes must be >= 0")
    rng = rng or np.random.default_rng(0)
    theta = ConnectionForm.symmetrized(space)
    Q = prequantum_operator(harmonic_oscillator(space), theta, space)
    pts = random_points(space, rng, n_points, box)
    out = []
    for n in range(-n_modes, n_modes + 1):
        mode = angular_mode(n, space)
        image = Q(mode)
        mv = np.atleast_1d(np.asarray(evaluate(mode, space, pts), dtype=complex))
        iv = np.atleast_1d(np.asarray(evaluate(image, space, pts), dtype=complex))
        ratios = iv / mv
        eig = complex(np.mean(ratios))
        spread = float(np.max(np.abs(ratios - eig)))
        if spread > ratio_tol * (1.0 + abs(eig)):
            raise ArithmeticError(f"mode n={n} is not an eigenvector (spread {spread:.2e})")
        if abs(eig.imag) > ratio_tol * (1.0 + abs(eig)):
            raise ArithmeticError(f"mode n={n} has a non-real eigenvalue {eig}")
        out.append((eig.real, f"n={n}"))
    out.sort(key=lambda t: t[0])
    return out


# ---------------------------------------------------------------------------
# finite truncations

@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Hermite quadrature over phase space (n = 1 numerics).

    ``scale`` substitutes y = scale * t per axis, so sections decaying like
    exp(-y^2 / scale^2) are integrated exactly against polynomials.
    """

    nodes: int = 64
    scale: float = 1.0

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("need at least 2 nodes per axis")
        if not self.scale > 0:
            raise ValueError("scale must be positive")


def gauss_hermite_grid(space: PhaseSpace, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (2n, N) and weights (N,) for integrating over R^{2n}."""
    if space.n != 1:
        raise ValueError("tensor quadrature is implemented for n = 1 numerics")
    t, w = np.polynomial.hermite.hermgauss(quad.nodes)
    eff = w * np.exp(t * t) * quad.scale  # plain dy weights after y = scale*t
    y = quad.scale * t
    X, P = np.meshgrid(y, y, indexing="ij")
    WX, WP = np.meshgrid(eff, eff, indexing="ij")
    pts = np.vstack([X.ravel(), P.ravel()])
    return pts, (WX * WP).ravel()


def inner_product(a: SectionFn, b: SectionFn, space: PhaseSpace,
                  quad: QuadratureSpec) -> complex:
    """<a, b> = integral of conj(a) b over phase space, by quadrature."""
    pts, w = gauss_hermite_grid(space, quad)
    av = np.broadcast_to(np.asarray(evaluate(a, space, pts), dtype=complex), w.shape)
    bv = np.broadcast_to(np.asarray(evaluate(b, space, pts), dtype=complex), w.shape)
    return complex(np.sum(w * np.conj(av) * bv))


@dataclass(frozen=True)
class TruncatedOperator:
    """A dense matrix avatar of an operator on a finite ordered basis."""

    basis_labels: tuple[str, ...]
    matrix: np.ndarray
    domain_note: str
    gram: np.ndarray | None = None

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", M)
        if M.shape != (len(self.basis_labels),) * 2:
            raise ValueError("matrix shape must match the basis")
        if not np.all(np.isfinite(M)):
            raise ValueError("matrix entries must be finite")

    def eigenvalues(self) -> np.ndarray:
        if self.gram is None:
            vals = np.linalg.eigvals(self.matrix)
        else:
            vals = np.linalg.eigvals(np.linalg.solve(self.gram, self.matrix))
        order = np.lexsort((vals.imag, vals.real))
        return vals[order]

    def to_json(self) -> str:
        return json.dumps(
            {
                "basis_labels": list(self.basis_labels),
                "matrix_re": self.matrix.real.tolist(),
                "matrix_im": self.matrix.imag.tolist(),
            },
            sort_keys=True,
        )


def assemble_matrix(op: Callable[[SectionFn], SectionFn], basis: Sequence[SectionFn],
                    quad: QuadratureSpec, space: PhaseSpace,
                    gram: np.ndarray | None = None,
                    labels: Sequence[str] | None = None,
                    domain_note: str = "L2(R^2, dx dp)",
                    ortho_tol: float = 1e-6) -> TruncatedOperator:
    """M_kl = <b_k, op(b_l)> by quadrature.

    The basis must be numerically orthonormal under the quadrature to
    ``ortho_tol`` unless a Gram matrix is supplied.
    """
    pts, w = gauss_hermite_grid(space, quad)
    vals = np.array([
        np.broadcast_to(np.asarray(evaluate(b, space, pts), dtype=complex), w.shape)
        for b in basis
    ])
    G = (vals.conj() * w) @ vals.T
    mineig = float(np.min(np.linalg.eigvalsh(0.5 * (G + G.conj().T))))
    if mineig <= 1e-12 * float(np.max(np.abs(G))):
        raise ValueError("basis is not linearly independent under this quadrature")
    if gram is None:
        if float(np.max(np.abs(G - np.eye(len(basis))))) > ortho_tol:
            raise ValueError(
                "basis is not orthonormal under this quadrature; supply its Gram matrix"
            )
    op_vals = np.array([
        np.broadcast_to(np.asarray(evaluate(op(b), space, pts), dtype=complex), w.shape)
        for b in basis
    ])
    M = (vals.conj() * w) @ op_vals.T
    if labels is None:
        labels = tuple(f"b{k}" for k in range(len(basis)))
    return TruncatedOperator(
        basis_labels=tuple(labels),
        matrix=M,
        domain_note=domain_note,
        gram=None if gram is None else np.asarray(gram, dtype=complex),
    )


def gauge_phase(space: PhaseSpace) -> Expr:
    """The function phi with theta~ = theta + d phi, namely -(1/2) sum x^j p_j."""
    terms = [Mul((Sym(f"x{j}"), Sym(f"p{j}"))) for j in range(1, space.n + 1)]
    return simplify(Mul((Const(Fraction(-1, 2)), Add(tuple(terms)))))
