"""Symplectic linear algebra on R^{2n} and its complexification.

Dense matrices throughout; rank and containment decisions use singular
values with a relative threshold of 1e-10, which is robust at desk scale
(2n <= 20).  Subspaces are compared through orthogonal projectors, never
through particular bases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SymplecticForm",
    "ComplexStructure",
    "Subspace",
    "HermitianForm",
    "standard_form",
    "standard_complex_structure",
    "phase_space_form",
    "phase_space_complex_structure",
    "darboux_basis",
    "symplectic_complement",
    "classify_subspace",
    "check_compatible_positive",
    "plus_i_eigenspace",
    "hermitian_form_on_F",
    "complex_structure_from_subspace",
    "DegenerateFormError",
]

_RANK_RTOL = 1e-10


class DegenerateFormError(ValueError):
    pass


@dataclass(frozen=True)
class SymplecticForm:
    """An antisymmetric nondegenerate bilinear form, Omega(u,v) = u^T M v."""

    matrix: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", M)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2 != 0 or M.shape[0] == 0:
            raise ValueError("a symplectic form needs a square matrix of even dimension")
        if not np.array_equal(M, -M.T):
            raise ValueError("matrix must be exactly antisymmetric as stored")
        if abs(np.linalg.det(M)) <= 1e-10:
            raise DegenerateFormError("form is degenerate: |det| <= 1e-10")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def value(self, u, v):
        """Omega(u, v); complex vectors use the complex-bilinear extension."""
        return np.asarray(u).T @ self.matrix @ np.asarray(v)


@dataclass(frozen=True)
class ComplexStructure:
    """A linear map J with J^2 = -id."""

    matrix: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", J)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ValueError("J must be square")
        if np.max(np.abs(J @ J + np.eye(J.shape[0]))) > 1e-10:
            raise ValueError("J^2 + id exceeds the 1e-10 tolerance")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class Subspace:
    """A subspace given by a basis matrix of full column rank (columns = basis)."""

    basis: np.ndarray

    def __post_init__(self):
        B = np.asarray(self.basis)
        if B.ndim != 2 or B.shape[1] == 0:
            raise ValueError("basis must be a nonempty 2-d array of column vectors")
        object.__setattr__(self, "basis", B)
        s = np.linalg.svd(B, compute_uv=False)
        if s[-1] <= _RANK_RTOL * s[0]:
            raise ValueError("basis vectors are not linearly independent")

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        q, _ = np.linalg.qr(self.basis)
        return q @ q.conj().T

    def contains(self, other: "Subspace", tol: float = 1e-8) -> bool:
        P = self.projector()
        resid = other.basis - P @ other.basis
        return float(np.max(np.abs(resid))) <= tol * (1.0 + float(np.max(np.abs(other.basis))))

    def distance(self, other: "Subspace") -> float:
        """Operator-norm distance between orthogonal projectors."""
        return float(np.linalg.norm(self.projector() - other.projector(), 2))


@dataclass(frozen=True)
class HermitianForm:
    """h(u,v) = u*^T matrix v on a chosen basis of an n-dim complex subspace."""

    matrix: np.ndarray
    positive_definite: bool

    def __post_init__(self):
        h = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", h)
        if np.max(np.abs(h - h.conj().T)) > 1e-10:
            raise ValueError("matrix is not Hermitian to 1e-10")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def standard_form(n: int) -> SymplecticForm:
    """The Darboux block form with Omega(e_i, f_j) = delta_ij on R^{2n}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    M = np.zeros((2 * n, 2 * n))
    M[:n, n:] = np.eye(n)
    M[n:, :n] = -np.eye(n)
    return SymplecticForm(M)


def standard_complex_structure(n: int) -> ComplexStructure:
    """J with J e_j = f_j, J f_j = -e_j: compatible positive for standard_form."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return ComplexStructure(J)


def phase_space_form(n: int) -> SymplecticForm:
    """The coordinate form of sum_j dp_j ^ dx^j on (x_1..x_n, p_1..p_n)."""
    return SymplecticForm(-standard_form(n).matrix)


def phase_space_complex_structure(n: int) -> ComplexStructure:
    """The coordinate J on T*R^n (J d_x = -d_p, J d_p = d_x); compatible
    positive for phase_space_form, with Omega(., J.) the standard inner
    product."""
    return ComplexStructure(-standard_complex_structure(n).matrix)


def darboux_basis(form: SymplecticForm) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic Gram-Schmidt: returns (E, F) with columns e_1..e_n, f_1..f_n
    satisfying Omega(e_i,e_j) = Omega(f_i,f_j) = 0 and Omega(e_i,f_j) = delta_ij.

    Pivots on the largest available |Omega(v,w)| for numerical stability.
    """
    M = form.matrix
    dim = form.dim
    C = np.eye(dim)
    es, fs = [], []
    while C.shape[1] > 0:
        W = C.T @ M @ C
        i, j = np.unravel_index(np.argmax(np.abs(W)), W.shape)
        piv = W[i, j]
        if abs(piv) <= _RANK_RTOL * max(1.0, float(np.max(np.abs(M)))):
            raise DegenerateFormError("form is degenerate on the remaining complement")
        e = C[:, i]
        f = C[:, j] / piv
        es.append(e)
        fs.append(f)
        others = np.delete(C, [i, j], axis=1)
        if others.shape[1] == 0:
            break
        # symplectic projection: u -> u - Omega(e,u) f + Omega(f,u) e
        oe = e @ M @ others
        of = f @ M @ others
        U = others - np.outer(f, oe) + np.outer(e, of)
        # re-extract an orthonormal basis of the projected span
        q, s, _ = np.linalg.svd(U, full_matrices=False)
        keep = s > _RANK_RTOL * s[0]
        C = q[:, keep]
    return np.column_stack(es), np.column_stack(fs)


def symplectic_complement(form: SymplecticForm, Y: Subspace) -> Subspace:
    """Y^perp = {v : Omega(v, y) = 0 for all y in Y}."""
    A = (form.matrix @ Y.basis).T  # rows a_i with a_i . v = Omega(v, y_i) (up to sign)
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > _RANK_RTOL * s[0])) if s.size else 0
    null = vt[rank:].conj().T
    if null.shape[1] == 0:
        raise ValueError("the symplectic complement is trivial; no basis to return")
    return Subspace(null)


def _complement_or_none(form: SymplecticForm, Y: Subspace):
    try:
        return symplectic_complement(form, Y)
    except ValueError:
        return None


def classify_subspace(form: SymplecticForm, Y: Subspace) -> str:
    """One of isotropic / coisotropic / lagrangian / symplectic / none."""
    n = form.dim // 2
    perp = _complement_or_none(form, Y)
    if perp is None:
        # Y^perp = {0}: Y is the full space
        return "symplectic"
    isotropic = perp.contains(Y)
    coisotropic = Y.contains(perp)
    if isotropic and Y.dim == n:
        return "lagrangian"
    if isotropic:
        return "isotropic"
    stacked = np.column_stack([Y.basis, perp.basis])
    s = np.linalg.svd(stacked, compute_uv=False)
    trivial_intersection = int(np.sum(s > _RANK_RTOL * s[0])) == Y.dim + perp.dim
    if trivial_intersection:
        return "symplectic"
    if coisotropic:
        return "coisotropic"
    return "none"


def check_compatible_positive(form: SymplecticForm, J: ComplexStructure) -> tuple[bool, bool]:
    """(compatible, positive): Omega(J.,J.) = Omega and Omega(.,J.) > 0."""
    if form.dim != J.dim:
        raise ValueError("dimension mismatch")
    M, Jm = form.matrix, J.matrix
    compatible = float(np.max(np.abs(Jm.T @ M @ Jm - M))) <= 1e-9
    G = M @ Jm
    Gs = 0.5 * (G + G.T)
    sym_resid = float(np.max(np.abs(G - G.T)))
    positive = sym_resid <= 1e-8 * (1.0 + float(np.max(np.abs(G)))) and \
        float(np.min(np.linalg.eigvalsh(Gs))) > 1e-9
    return compatible, positive


def plus_i_eigenspace(J: ComplexStructure) -> Subspace:
    """F_J, the +i eigenspace of J inside the complexification; dim n."""
    dim = J.dim
    W = np.eye(dim) - 1j * J.matrix  # columns v - i J v all lie in F_J
    q, s, _ = np.linalg.svd(W, full_matrices=False)
    keep = s > _RANK_RTOL * s[0]
    basis = q[:, keep]
    if basis.shape[1] != dim // 2:
        raise ValueError("unexpected +i eigenspace dimension")
    return Subspace(basis)


def hermitian_form_on_F(form: SymplecticForm, F: Subspace) -> HermitianForm:
    """h(u,v) = -i Omega(u, conj(v)) on a Lagrangian F with V^C = F + conj(F).

    Hermitian because Omega is real bilinear; positive-definite exactly when
    F comes from a compatible positive complex structure.
    """
    B = np.asarray(F.basis, dtype=complex)
    M = form.matrix
    n = form.dim // 2
    if F.dim != n:
        raise ValueError("F must have half the complex dimension")
    lag_resid = float(np.max(np.abs(B.T @ M @ B)))
    if lag_resid > 1e-8 * (1.0 + float(np.max(np.abs(B))) ** 2):
        raise ValueError("F is not Lagrangian for this form")
    stacked = np.column_stack([B, B.conj()])
    s = np.linalg.svd(stacked, compute_uv=False)
    if int(np.sum(s > _RANK_RTOL * s[0])) != form.dim:
        raise ValueError("F meets conj(F): V^C != F + conj(F)")
    h = -1j * (B.T @ M @ B.conj())
    h = 0.5 * (h + h.conj().T)  # scrub round-off asymmetry
    positive = float(np.min(np.linalg.eigvalsh(h))) > 1e-9
    return HermitianForm(matrix=h, positive_definite=positive)


def complex_structure_from_subspace(F: Subspace) -> ComplexStructure:
    """The real J with +i eigenspace F and -i eigenspace conj(F)."""
    B = np.asarray(F.basis, dtype=complex)
    dim = F.ambient_dim
    S = np.column_stack([B, B.conj()])
    D = np.diag([1j] * F.dim + [-1j] * F.dim)
    J = S @ D @ np.linalg.inv(S)
    if float(np.max(np.abs(J.imag))) > 1e-8 * (1.0 + float(np.max(np.abs(J.real)))):
        raise ValueError("reconstructed J is not real: F + conj(F) is not a real splitting")
    return ComplexStructure(J.real)
