"""Hamiltonian mechanics on T*R^n: brackets, vector fields, flows, diagnostics.

Conventions, fixed once and verified numerically throughout the test suite:

    {f,g} = sum_j (df/dx^j dg/dp_j - dg/dx^j df/dp_j)
    X_f   = (df/dp_1 .. df/dp_n, -df/dx^1 .. -df/dx^n)

so that the flow of X_H integrates Hamilton's equations, df/dt = {f,H}
along the flow, and X_H = p d_x - x d_p for the harmonic oscillator.
Under this pair of choices the bracket/vector-field dictionary reads

    {f,g} = X_g(f) = -X_f(g),      X_{{f,g}} = [X_g, X_f],

i.e. f -> X_f is an anti-homomorphism of Lie algebras.  Only one global
sign can hold per convention; these are the ones the (x, p) case settles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from io import StringIO
from typing import Callable

import numpy as np

from .expr import (
    Add,
    Const,
    Expr,
    Mul,
    NonFiniteError,
    PhaseSpace,
    derivative,
    evaluate,
    is_real_valued,
    simplify,
)

__all__ = [
    "VectorFieldExpr",
    "Trajectory",
    "poisson_bracket",
    "hamiltonian_vector_field",
    "lie_bracket",
    "divergence",
    "liouville_divergence",
    "check_conserved",
    "flow",
    "flow_step_map",
    "travel_time",
    "IntegrationError",
    "EnergyNotAboveError",
    "DivergentIntegralError",
]


class IntegrationError(Exception):
    pass


class EnergyNotAboveError(ValueError):
    pass


class DivergentIntegralError(ArithmeticError):
    pass


@dataclass(frozen=True)
class VectorFieldExpr:
    """A vector field with symbolic components, ordered (d/dx^1..d/dx^n, d/dp_1..d/dp_n)."""

    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) % 2 != 0 or not self.components:
            raise ValueError("a phase-space vector field needs 2n components")

    @property
    def dim(self) -> int:
        return len(self.components)

    def apply(self, f: Expr, space: PhaseSpace) -> Expr:
        """Directional derivative X(f) = sum_k X_k df/dq_k."""
        if self.dim != space.dim:
            raise ValueError("vector field dimension does not match the space")
        terms = [
            Mul((comp, derivative(f, name)))
            for comp, name in zip(self.components, space.coordinates)
        ]
        return simplify(Add(tuple(terms)))

    def values(self, space: PhaseSpace, points, params=None) -> np.ndarray:
        """Component values at a batch of points, shape (2n, npoints)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] != space.dim:
            pts = pts.T
        rows = [np.broadcast_to(np.asarray(evaluate(c, space, pts, params)), pts.shape[1:])
                for c in self.components]
        return np.array(rows)


def poisson_bracket(f: Expr, g: Expr, space: PhaseSpace) -> Expr:
    """{f,g} = sum_j (df/dx^j dg/dp_j - dg/dx^j df/dp_j), simplified."""
    terms = []
    for j in range(1, space.n + 1):
        xj, pj = f"x{j}", f"p{j}"
        terms.append(Mul((derivative(f, xj), derivative(g, pj))))
        terms.append(Mul((Const(-1), derivative(g, xj), derivative(f, pj))))
    return simplify(Add(tuple(terms)))


def hamiltonian_vector_field(f: Expr, space: PhaseSpace) -> VectorFieldExpr:
    """X_f = (df/dp_1..df/dp_n, -df/dx^1..-df/dx^n)."""
    dx = [derivative(f, f"x{j}") for j in range(1, space.n + 1)]
    dp = [derivative(f, f"p{j}") for j in range(1, space.n + 1)]
    comps = tuple(dp) + tuple(simplify(Mul((Const(-1), d))) for d in dx)
    return VectorFieldExpr(comps)


def lie_bracket(X: VectorFieldExpr, Y: VectorFieldExpr, space: PhaseSpace) -> VectorFieldExpr:
    """[X,Y] with components X(Y_k) - Y(X_k)."""
    if X.dim != Y.dim:
        raise ValueError("vector fields live on spaces of different dimension")
    comps = tuple(
        simplify(Add((X.apply(Yk, space), Mul((Const(-1), Y.apply(Xk, space))))))
        for Xk, Yk in zip(X.components, Y.components)
    )
    return VectorFieldExpr(comps)


def divergence(X: VectorFieldExpr, space: PhaseSpace) -> Expr:
    terms = [derivative(c, name) for c, name in zip(X.components, space.coordinates)]
    return simplify(Add(tuple(terms)))


def liouville_divergence(f: Expr, space: PhaseSpace) -> Expr:
    """div X_f; vanishes identically by equality of mixed partials."""
    return divergence(hamiltonian_vector_field(f, space), space)


def check_conserved(f: Expr, H: Expr, space: PhaseSpace) -> Expr:
    """df/dt along the flow of H, as the symbolic bracket {f,H}.

    f is conserved iff the returned expression vanishes (test numerically
    at sample points; the simplifier is not canonical).
    """
    return poisson_bracket(f, H, space)


# ---------------------------------------------------------------------------
# flows

@dataclass(frozen=True)
class Trajectory:
    """A discrete integral curve of a Hamiltonian system."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), 2n)
    integrator: str
    dt: float
    hamiltonian: str

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("states must be finite")

    def energies(self, H: Expr, space: PhaseSpace, params=None) -> np.ndarray:
        return np.asarray(evaluate(H, space, self.states.T, params), dtype=float)

    def energy_drift(self, H: Expr, space: PhaseSpace, params=None) -> float:
        en = self.energies(H, space, params)
        return float(np.max(np.abs(en - en[0])))

    def to_csv(self) -> str:
        n = self.states.shape[1] // 2
        out = StringIO()
        header = ["t"] + [f"x{j}" for j in range(1, n + 1)] + [f"p{j}" for j in range(1, n + 1)]
        out.write(",".join(header) + "\n")
        for t, row in zip(self.times, self.states):
            out.write(",".join(repr(float(v)) for v in [t, *row]) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "integrator": self.integrator,
                "dt": self.dt,
                "hamiltonian": self.hamiltonian,
                "times": [float(t) for t in self.times],
                "states": [[float(v) for v in row] for row in self.states],
            },
            sort_keys=True,
        )


def _hamiltonian_rhs(H: Expr, space: PhaseSpace, params) -> Callable[[np.ndarray], np.ndarray]:
    n = space.n
    dHdx = [derivative(H, f"x{j}") for j in range(1, n + 1)]
    dHdp = [derivative(H, f"p{j}") for j in range(1, n + 1)]

    def rhs(state: np.ndarray) -> np.ndarray:
        out = np.empty(2 * n)
        for j in range(n):
            out[j] = evaluate(dHdp[j], space, state, params)
            out[n + j] = -evaluate(dHdx[j], space, state, params)
        return out

    return rhs


def _midpoint_step(rhs, state, dt, tol, max_iter):
    try:
        mid = state + 0.5 * dt * rhs(state)
        for _ in range(max_iter):
            nxt = state + 0.5 * dt * rhs(mid)
            if np.max(np.abs(nxt - mid)) <= tol:
                return 2.0 * nxt - state
            mid = nxt
    except NonFiniteError as exc:
        raise IntegrationError(f"implicit midpoint iterate diverged (dt={dt})") from exc
    raise IntegrationError(
        f"implicit midpoint solve did not converge in {max_iter} iterations (dt={dt})"
    )


def flow_step_map(H: Expr, space: PhaseSpace, dt: float, params=None,
                  tol: float = 1e-12, max_iter: int = 50):
    """The one-step implicit-midpoint map state -> state, as a callable."""
    rhs = _hamiltonian_rhs(H, space, params)
    return lambda state: _midpoint_step(rhs, np.asarray(state, dtype=float), dt, tol, max_iter)


def flow(H: Expr, space: PhaseSpace, state0, t_end: float, dt: float,
         params=None, tol: float = 1e-12, max_iter: int = 50) -> Trajectory:
    """Integrate Hamilton's equations with the implicit midpoint rule.

    Symplectic and second order; exact (up to the solver tolerance) for
    quadratic Hamiltonians.  The last step is shortened so the trajectory
    lands exactly on t_end.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    state0 = np.asarray(state0, dtype=float)
    if state0.shape != (space.dim,):
        raise ValueError(f"state0 must have {space.dim} components")
    probe = evaluate(H, space, state0, params)
    if isinstance(probe, complex):
        raise ValueError("the Hamiltonian must be real-valued")

    rhs = _hamiltonian_rhs(H, space, params)
    n_full = int(np.floor(t_end / dt + 1e-12))
    times = [0.0]
    states = [state0]
    state = state0
    for k in range(n_full):
        state = _midpoint_step(rhs, state, dt, tol, max_iter)
        times.append((k + 1) * dt)
        states.append(state)
    if times[-1] < t_end - 1e-12 * max(1.0, t_end):
        state = _midpoint_step(rhs, state, t_end - times[-1], tol, max_iter)
        times.append(t_end)
        states.append(state)
    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        integrator="implicit-midpoint",
        dt=dt,
        hamiltonian=str(H),
    )


# ---------------------------------------------------------------------------
# travel time t = int_x0^x1 sqrt(m / (2 (E0 - V(y)))) dy

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)


def _panel_gl(f, a, b):
    y = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
    vals = f(y)
    return 0.5 * (b - a) * float(np.dot(_GL_WEIGHTS, vals)), float(np.max(np.abs(vals)))


def _adaptive_gl(f, a, b, tol, max_panels=600):
    """Adaptive Gauss-Legendre on [a,b].

    Splitting stops on the tolerance, on a depth cap of 30, when refinement
    no longer shrinks the discrepancy (round-off noise floor, e.g. from
    cancellation in the integrand), or when the panel budget runs out.
    """
    total = 0.0
    budget = max_panels
    stack = [(a, b, tol, 0, np.inf)]
    while stack:
        a0, b0, t0, depth, parent_diff = stack.pop()
        whole, m1 = _panel_gl(f, a0, b0)
        mid = 0.5 * (a0 + b0)
        left, m2 = _panel_gl(f, a0, mid)
        right, m3 = _panel_gl(f, mid, b0)
        budget -= 3
        if max(m1, m2, m3) > 1e12:
            raise DivergentIntegralError("integrand exceeds 1e12 on a quadrature panel")
        diff = abs(left + right - whole)
        stagnant = diff > 0.25 * parent_diff
        if (diff <= t0 * (1.0 + abs(left + right)) or depth >= 30
                or stagnant or budget <= 0):
            total += left + right
        else:
            stack.append((a0, mid, t0 / 1.4, depth + 1, diff))
            stack.append((mid, b0, t0 / 1.4, depth + 1, diff))
    return total


def travel_time(V: Expr, E0: float, x0: float, x1: float, mass: float,
                rel_tol: float = 1e-9, max_levels: int = 80) -> float:
    """Time for a particle of energy E0 to move from x0 to x1 under potential V.

    V is an expression in the single position coordinate.  The integrand has
    an integrable inverse-square-root singularity when E0 = V(x1) with
    V'(x1) != 0; when the turning point is flat the integral diverges and
    DivergentIntegralError is raised.  Geometric panel refinement toward x1
    resolves the endpoint; each panel is integrated adaptively.
    """
    if x1 == x0:
        return 0.0
    if x1 < x0:
        raise ValueError("travel_time expects x0 < x1")
    space = PhaseSpace(1, mass=mass)
    probe = np.vstack([np.linspace(x0, 0.5 * (x0 + x1), 7), np.zeros(7)])
    if not is_real_valued(V, space, probe):
        raise ValueError("the potential must be real-valued")

    def integrand(y):
        y = np.asarray(y, dtype=float)
        pts = np.vstack([y, np.zeros_like(y)])
        v = np.broadcast_to(np.asarray(evaluate(V, space, pts), dtype=float), y.shape)
        gap = E0 - v
        if np.any(gap <= 0.0):
            worst = float(np.min(gap))
            if worst < -1e-9 * (1.0 + abs(E0)):
                bad = float(y[np.argmin(gap)])
                raise EnergyNotAboveError(f"E0 <= V at y={bad!r}")
            # E0 - V underflows approaching the turning point: the slowdown
            # is critical and the travel time cannot be finite
            raise DivergentIntegralError(
                "E0 - V vanishes to round-off before reaching x1"
            )
        return np.sqrt(mass / (2.0 * gap))

    length = x1 - x0
    scale = abs(x1) + length
    total = 0.0
    contributions = []
    for level in range(max_levels):
        width = length * 0.5 ** (level + 1)
        a = x1 - length * 0.5 ** level
        b = x1 - width
        c = _adaptive_gl(integrand, a, b, rel_tol)
        contributions.append(c)
        total += c
        if level == 0:
            continue
        ratio = c / contributions[-2] if contributions[-2] else 0.0
        if level >= 30 and ratio >= 0.95:
            raise DivergentIntegralError(
                "panel contributions do not decay toward the turning point"
            )
        converged = level >= 3 and c <= rel_tol * abs(total)
        width_floor = width < 1e-13 * scale
        if (converged or width_floor) and ratio < 0.95:
            # remaining levels form a near-geometric series
            total += c * ratio / (1.0 - ratio) if 0 < ratio < 1 else 0.0
            return total
    raise DivergentIntegralError(
        f"panel refinement did not converge after {max_levels} levels"
    )
