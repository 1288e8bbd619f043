"""Symplectic (Bogoliubov) diagonalization with zero-mode completion.

A quadratic bosonic form ``H_ph = [[h, g], [g, h]]`` on the doubled space
``(b, b^dag)`` is brought to normal form on the symplectic space defined by
``Sigma = diag(1, -1)``.  Nonzero modes come in (omega, -omega) pairs with
Sigma-normalized eigenvectors ``x = (u, -v)``; each zero eigenvalue is
defective and is completed by a conjugate pair of vectors (p, q) describing
an effective free particle with mass-like constant m_tilde.

Because every form built in this package satisfies ``h - g = diag(Omega)``
with ``Omega > 0``, the non-normal eigenproblem for ``Sigma H_ph`` reduces
exactly to the Hermitian problem ``Omega^(1/2) (h+g) Omega^(1/2)`` whose
eigenvalues are ``omega^2``.  This sidesteps the numerically fragile general
complex eigensolver; the general solver is kept as a cross-check in the test
suite.  Degenerate modes come out Sigma-orthogonal automatically because the
Hermitian eigenbasis is orthonormal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .chain import Hessian
from .errors import (
    BareInstabilityError,
    DynamicalInstabilityError,
    InternalConsistencyError,
    ZeroModeToleranceError,
)

_EPS = np.finfo(float).eps


@dataclass
class QuadraticForm:
    """Coupling matrices of a quadratic bosonic Hamiltonian.

    ``h`` and ``g`` are D x D Hermitian (real symmetric for real-space
    forms); ``h - g`` must equal ``diag(omega_bare)`` exactly, which encodes
    h = delta*Omega + g.  ``e0`` is the scalar classical offset.
    """

    h: np.ndarray
    g: np.ndarray
    omega_bare: np.ndarray
    e0: float = 0.0

    @property
    def dimension(self) -> int:
        return len(self.omega_bare)

    def full_matrix(self) -> np.ndarray:
        """The 2D x 2D coupling matrix [[h, g], [g, h]]."""
        return np.block([[self.h, self.g], [self.g, self.h]])

    def validate(self, tol: float = 1e-10) -> None:
        scale = max(1.0, float(np.max(np.abs(self.h))))
        if np.max(np.abs(self.h - self.h.conj().T)) > tol * scale:
            raise ValueError("h is not Hermitian")
        if np.max(np.abs(self.g - self.g.conj().T)) > tol * scale:
            raise ValueError("g is not Hermitian")
        if np.max(np.abs(self.h - self.g - np.diag(self.omega_bare))) > tol * scale:
            raise ValueError("h - g does not equal diag(omega_bare)")


def sigma_matrix(dim: int) -> np.ndarray:
    """Sigma = diag(1_D, -1_D) defining the symplectic pseudo-norm."""
    return np.diag(np.concatenate([np.ones(dim), -np.ones(dim)]))


def build_quadratic_form(hessian: Hessian | np.ndarray, omega_bare: np.ndarray,
                         e0: float = 0.0) -> QuadraticForm:
    """Quadratic form of a Hessian in the local-oscillator ladder basis.

    ``g = (1 - delta) V / (2 sqrt(Omega Omega'))`` and ``h = diag(Omega) + g``
    (units m_I = 1).  ``omega_bare`` is per flat index; every entry must be
    positive, otherwise the system is unstable at the single-site level.
    """
    mat = hessian.matrix if isinstance(hessian, Hessian) else np.asarray(hessian)
    omega_bare = np.asarray(omega_bare, dtype=float)
    if np.any(omega_bare <= 0.0):
        raise BareInstabilityError(
            f"bare frequencies must be positive (min {omega_bare.min():.6g})"
        )
    denom = 2.0 * np.sqrt(np.outer(omega_bare, omega_bare))
    g = mat / denom
    np.fill_diagonal(g, 0.0)
    h = g + np.diag(omega_bare)
    return QuadraticForm(h, g, omega_bare, e0)


class Stability(enum.Enum):
    STABLE = "stable"
    # A positive-norm eigenvector with negative real eigenvalue cannot occur
    # while h - g = diag(Omega) > 0 holds, but the classification is kept for
    # forms flagged by callers.
    THERMO_UNSTABLE = "thermo-unstable"
    DYN_UNSTABLE = "dyn-unstable"


@dataclass
class BogoliubovMode:
    """One phonon mode: frequency and Sigma-normalized (u, v) amplitudes."""

    omega: float
    u: np.ndarray
    v: np.ndarray
    label: object = None

    def x_vector(self) -> np.ndarray:
        return np.concatenate([self.u, -self.v])

    def y_vector(self) -> np.ndarray:
        """Negative-norm partner at -omega within the same block."""
        return np.concatenate([-self.v, self.u])

    def sigma_norm(self) -> float:
        return float(np.vdot(self.u, self.u).real - np.vdot(self.v, self.v).real)


@dataclass
class ZeroModePair:
    """Conjugate (p, q) completion of one defective zero eigenvalue.

    p = (u0, -u0*) annihilated by Sigma H; q solves
    Sigma H q = -(i/m_tilde) p with (q|p) = i.  Normalization: p^dag p equals
    the ion number, q^dag q its inverse, making m_tilde extensive.
    """

    p: np.ndarray
    q: np.ndarray
    m_tilde: float
    label: str = "zero"

    @property
    def u0(self) -> np.ndarray:
        return self.p[: len(self.p) // 2]

    @property
    def v0(self) -> np.ndarray:
        # q = -i (v0, v0*)
        return 1j * self.q[: len(self.q) // 2]


@dataclass
class NormalForm:
    """Result of a symplectic diagonalization."""

    modes: list[BogoliubovMode]
    zero_pairs: list[ZeroModePair]
    dimension: int
    stability: Stability
    form: QuadraticForm = field(repr=False)

    @property
    def zero_point_shift(self) -> float:
        return 0.5 * sum(m.omega for m in self.modes)

    def frequencies(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])


def _kernel_vectors(k_mat: np.ndarray, phi_cols: np.ndarray, s: np.ndarray,
                    axis_map: np.ndarray | None) -> list[np.ndarray]:
    """Orthonormal real kernel vectors of K = h + g, split by axis support.

    The physical zero patterns (rigid x translation, staggered z rotation)
    are axis-pure, so projecting the numerically mixed kernel basis onto the
    per-axis index subsets separates degenerate pairs without an explicit
    symmetry catalogue.  Falls back to plain orthonormalization when the
    projections are not themselves kernel vectors.
    """
    raw = s[:, None] * phi_cols  # kernel of K, unnormalized
    if np.iscomplexobj(raw):
        if np.max(np.abs(raw.imag)) > 1e-8 * np.max(np.abs(raw)):
            raise ZeroModeToleranceError(
                "zero modes of a genuinely complex block are unsupported; "
                "they only arise in real (k = 0) blocks for this system"
            )
        raw = raw.real
    k_scale = max(np.max(np.abs(k_mat)), 1.0)
    candidates: list[np.ndarray] = []
    if axis_map is not None:
        for axis in (0, 1, 2):
            sel = axis_map == axis
            for col in raw.T:
                part = np.where(sel, col, 0.0)
                norm = np.linalg.norm(part)
                if norm < 1e-8:
                    continue
                part = part / norm
                if np.linalg.norm(k_mat @ part) < 1e-7 * k_scale:
                    candidates.append(part)
    if len(candidates) < raw.shape[1]:
        candidates = [c for c in raw.T]
    basis: list[np.ndarray] = []
    for cand in candidates:
        vec = cand.astype(float)
        for prev in basis:
            vec = vec - prev * (prev @ vec)
        norm = np.linalg.norm(vec)
        if norm > 1e-6:
            basis.append(vec / norm)
    if len(basis) != raw.shape[1]:
        raise ZeroModeToleranceError(
            f"found {len(basis)} independent kernel vectors for "
            f"{raw.shape[1]} zero eigenvalues; adjust tol_zero"
        )
    return basis


def _zero_label(w: np.ndarray, axis_map: np.ndarray | None) -> str:
    if axis_map is None:
        return "zero"
    weights = [float(np.sum(w[axis_map == a] ** 2)) for a in (0, 1, 2)]
    return "longitudinal" if int(np.argmax(weights)) == 0 else "radial"


def symplectic_diagonalize(form: QuadraticForm, tol: float = 1e-10,
                           tol_zero: float = 1e-8,
                           axis_map: np.ndarray | None = None,
                           p_norm: float | None = None) -> NormalForm:
    """Full normal form of a quadratic bosonic coupling matrix.

    Parameters
    ----------
    form : QuadraticForm
        Must satisfy the type invariants (``form.validate``).
    tol : float
        Certification tolerance for internal identities.
    tol_zero : float
        Frequencies below ``tol_zero * max(omega_bare)`` classify as zero
        modes.  Detection happens on omega^2 with a machine-epsilon floor:
        a defective zero pair splits as sqrt(perturbation) under roundoff,
        so the floor guards against misclassifying exact Goldstone modes.
    axis_map : ndarray, optional
        Axis label (0, 1, 2) per flat index; enables symmetry separation and
        longitudinal/radial labelling of degenerate zero pairs.
    p_norm : float, optional
        Target p^dag p for zero pairs (the ion number for chain problems).
        Defaults to the block dimension.

    Raises
    ------
    DynamicalInstabilityError
        If any squared frequency is negative beyond tolerance; the error
        carries the offending imaginary frequencies.
    """
    form.validate(tol)
    omega_bare = form.omega_bare
    dim = form.dimension
    s = np.sqrt(omega_bare)
    k_mat = form.h + form.g
    m_mat = s[:, None] * k_mat * s[None, :]
    lam, phi = np.linalg.eigh(m_mat)

    omega_scale = float(np.max(omega_bare))
    # a defective zero pair splits as sqrt(roundoff) under assembly noise, so
    # the omega^2 threshold needs a generous machine floor; it stays several
    # orders below any physical soft mode
    lam_floor = 4096.0 * _EPS * max(float(np.max(np.abs(lam))), omega_scale**2)
    lam_tol = max((tol_zero * omega_scale) ** 2, lam_floor)
    if lam[0] < -lam_tol:
        bad = np.sqrt(-lam[lam < -lam_tol])
        raise DynamicalInstabilityError(
            f"dynamically unstable: {bad.size} imaginary mode frequencies "
            f"(largest {bad.max():.6g} i)",
            frequencies=[1j * b for b in bad],
        )

    zero_sel = np.abs(lam) <= lam_tol
    modes: list[BogoliubovMode] = []
    for i in np.where(~zero_sel)[0]:
        omega = float(np.sqrt(lam[i]))
        phi_hat = phi[:, i]
        u = (s * phi_hat + omega * phi_hat / s) / (2.0 * np.sqrt(omega))
        v = (omega * phi_hat / s - s * phi_hat) / (2.0 * np.sqrt(omega))
        j = int(np.argmax(np.abs(u)))
        phase = u[j] / abs(u[j])
        u = u * np.conj(phase)
        v = v * np.conj(phase)
        modes.append(BogoliubovMode(omega, u, v))

    zero_pairs: list[ZeroModePair] = []
    n_zero = int(np.sum(zero_sel))
    if n_zero:
        target = float(p_norm) if p_norm is not None else float(dim)
        c = np.sqrt(target / 2.0)
        for w in _kernel_vectors(k_mat, phi[:, zero_sel], s, axis_map):
            u0 = 1j * c * w
            p = np.concatenate([u0, u0])  # (u0, -u0*) with u0 purely imaginary
            mu = 2.0 * c * c * float(np.sum(w * w / omega_bare))
            q_top = c * (w / omega_bare) / mu
            q = np.concatenate([q_top, -q_top]).astype(complex)
            overlap = np.vdot(q, sigma_apply(p))
            if abs(overlap - 1j) > 1e-9:
                raise InternalConsistencyError(
                    f"zero-pair scalar product (q|p) = {overlap}, expected i"
                )
            zero_pairs.append(ZeroModePair(p, q, mu, _zero_label(w, axis_map)))

    modes.sort(key=lambda m: m.omega)
    return NormalForm(modes, zero_pairs, dim, Stability.STABLE, form)


def sigma_apply(vec: np.ndarray) -> np.ndarray:
    """Apply Sigma = diag(1, -1) without materializing the matrix."""
    dim = len(vec) // 2
    out = vec.copy()
    out[dim:] *= -1.0
    return out


def eigen_residual(form: QuadraticForm, mode: BogoliubovMode) -> float:
    """|| Sigma H x - omega x ||_max for one mode."""
    h_full = form.full_matrix()
    x = mode.x_vector()
    sx = sigma_apply(h_full @ x)
    return float(np.max(np.abs(sx - mode.omega * x)))


def completeness_residual(nf: NormalForm) -> float:
    """Max-norm deviation of the resolved identity on the doubled space.

    Checks ``sum_m (x x^dag - y y^dag) Sigma + i sum_n (q p^dag - p q^dag)
    Sigma = 1``; a small residual certifies that modes plus zero pairs span
    all degrees of freedom.
    """
    dim = nf.dimension
    total = np.zeros((2 * dim, 2 * dim), dtype=complex)
    for m in nf.modes:
        x = m.x_vector()
        y = m.y_vector()
        total += np.outer(x, x.conj()) - np.outer(y, y.conj())
    for zp in nf.zero_pairs:
        total += 1j * (np.outer(zp.q, zp.p.conj()) - np.outer(zp.p, zp.q.conj()))
    total[:, dim:] *= -1.0  # right-multiply by Sigma
    return float(np.max(np.abs(total - np.eye(2 * dim))))


def assemble_W(nf: NormalForm, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Transformation matrix W = [x.., i p.., y.., i q..] and its inverse.

    The inverse is obtained without numerical inversion as
    ``W^-1 = Sigma_tilde W^dag Sigma`` where ``Sigma_tilde = W^dag Sigma W``
    is Hermitian and unitary (squares to the identity).
    """
    dim = nf.dimension
    n_m, n_z = len(nf.modes), len(nf.zero_pairs)
    if n_m + n_z != dim:
        raise InternalConsistencyError(
            f"mode count {n_m} + zero pairs {n_z} != dimension {dim}"
        )
    cols = (
        [m.x_vector() for m in nf.modes]
        + [1j * zp.p for zp in nf.zero_pairs]
        + [m.y_vector() for m in nf.modes]
        + [1j * zp.q for zp in nf.zero_pairs]
    )
    w = np.column_stack(cols)
    sigma_tilde = np.zeros((2 * dim, 2 * dim), dtype=complex)
    sigma_tilde[:n_m, :n_m] = np.eye(n_m)
    sigma_tilde[dim : dim + n_m, dim : dim + n_m] = -np.eye(n_m)
    sigma_tilde[n_m : n_m + n_z, dim + n_m :] = -1j * np.eye(n_z)
    sigma_tilde[dim + n_m :, n_m : n_m + n_z] = 1j * np.eye(n_z)
    w_dag_sigma = w.conj().T.copy()
    w_dag_sigma[:, dim:] *= -1.0
    w_inv = sigma_tilde @ w_dag_sigma
    residual = float(np.max(np.abs(w @ w_inv - np.eye(2 * dim))))
    if residual > tol:
        raise InternalConsistencyError(f"||W W^-1 - 1|| = {residual:.3e} > {tol:.1e}")
    return w, w_inv


def zero_point_shift(nf: NormalForm) -> float:
    """Zero-point energy shift (1/2) sum_m omega_m, in omega_I."""
    return nf.zero_point_shift
