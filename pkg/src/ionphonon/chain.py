"""Ion-chain geometry, classical zigzag equilibrium and harmonic expansion.

Units throughout: ``m_I = omega_I = d = 1`` (ion mass, transverse trap
frequency along y, inter-ion spacing).  Lengths are in units of ``d``,
frequencies in ``omega_I``, Hessian elements in ``m_I omega_I**2``, and the
classical potential per ion in ``E_d = lambda**2 omega_I / 2``.

Two boundary conventions are supported.  ``Boundary.RING`` is a physical
N-ion ring where every pair interacts once through the shorter of the two
paths around the ring.  ``Boundary.BULK`` is the infinite chain sampled with
N sites: couplings are image sums over the infinite lattice (exact Hurwitz
zeta folding in the linear phase, certified truncation in the zigzag phase),
so Bloch frequencies at the discrete quasi-momenta coincide with the
thermodynamic-limit dispersion.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import zeta

from .errors import (
    BareInstabilityError,
    BracketingError,
    ConvergenceError,
    PhysicsError,
)

ZETA3 = float(zeta(3.0))

# Maximum |axial offset| kept in bulk-mode lattice sums.  The equilibrium
# condition and the Hessian must share this truncation: the staggered
# rotational pattern is an exact zero mode only if both use the same pair set.
BULK_OFFSET_CUTOFF = 100_000


class Boundary(enum.Enum):
    """Boundary convention for lattice sums."""

    RING = "ring"
    BULK = "bulk"


@dataclass(frozen=True)
class ChainConfig:
    """Dimensionless parameters that fully specify the chain.

    Parameters
    ----------
    kappa : float
        Coulomb coupling; ratio of the electrostatic energy of two charges
        at spacing d to the transverse trap energy at excursion d.
    alpha : float
        Radial anisotropy of the trap; the z curvature is ``alpha`` in units
        of the y curvature (alpha = 1 is the O(2)-symmetric case).
    lam : float
        Length-scale ratio ``d * sqrt(m_I omega_I)`` (the parameter usually
        written lambda); sets the quantum scale of position fluctuations.
    n_ions : int
        Even number of ions, at least 4.
    boundary : Boundary
        Lattice-sum convention, see module docstring.
    """

    kappa: float
    alpha: float = 1.0
    lam: float = 50.0
    n_ions: int = 64
    boundary: Boundary = Boundary.RING

    def __post_init__(self):
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.lam > 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        n = self.n_ions
        if n < 4 or n % 2 != 0:
            raise ValueError(f"n_ions must be even and >= 4, got {n}")

    @property
    def e_d(self) -> float:
        """Natural energy scale E_d in units of omega_I (= lambda^2 / 2)."""
        return 0.5 * self.lam**2


@dataclass
class Equilibrium:
    """Classical equilibrium: zigzag amplitude and explicit ion positions."""

    delta0: float
    positions: np.ndarray  # (N, 3), units of d

    @property
    def is_zigzag(self) -> bool:
        return self.delta0 > 0.0


@dataclass
class Hessian:
    """Second derivatives of the potential at equilibrium, units m_I omega_I^2.

    Flat index convention: ``(l, nu) -> 3 * l + nu`` with nu in (x, y, z).
    """

    matrix: np.ndarray  # (3N, 3N) real symmetric
    n_ions: int

    @staticmethod
    def flat_index(l: int, nu: int) -> int:
        return 3 * l + nu

    @property
    def axis_map(self) -> np.ndarray:
        """Axis label (0=x, 1=y, 2=z) of every flat index."""
        return np.tile(np.arange(3), self.n_ions)


def equilibrium_positions(config: ChainConfig, delta0: float) -> np.ndarray:
    """Positions l*e_x + delta0*(-1)^l*e_y for l = 0..N-1."""
    n = config.n_ions
    pos = np.zeros((n, 3))
    pos[:, 0] = np.arange(n, dtype=float)
    pos[:, 1] = delta0 * (-1.0) ** np.arange(n)
    return pos


# ---------------------------------------------------------------------------
# pair geometry


def pair_dyadic(dx: np.ndarray, dy: np.ndarray, kappa: float) -> np.ndarray:
    """Off-diagonal 3x3 Coulomb Hessian blocks for separations (dx, dy, 0).

    Returns ``d^2 phi / dR_l dR_l'`` for the pair potential
    ``phi = kappa / (2 r)``, shape (n, 3, 3), units m_I omega_I^2.  The
    same-site contribution of each pair is the negative of this block.
    """
    dx = np.asarray(dx, dtype=float)
    dy = np.broadcast_to(np.asarray(dy, dtype=float), dx.shape)
    r2 = dx * dx + dy * dy
    if np.any(r2 < 1e-18):
        raise PhysicsError("overlapping equilibrium positions: singular geometry")
    inv_r5 = r2 ** -2.5
    pref = -0.5 * kappa * inv_r5
    blocks = np.zeros(dx.shape + (3, 3))
    blocks[..., 0, 0] = pref * (3.0 * dx * dx - r2)
    blocks[..., 1, 1] = pref * (3.0 * dy * dy - r2)
    blocks[..., 2, 2] = pref * (-r2)
    blocks[..., 0, 1] = pref * (3.0 * dx * dy)
    blocks[..., 1, 0] = blocks[..., 0, 1]
    return blocks


def _flip_y(blocks: np.ndarray) -> np.ndarray:
    """Conjugate blocks by diag(1, -1, 1): sublattice mirror y -> -y."""
    out = blocks.copy()
    out[..., 0, 1] *= -1.0
    out[..., 1, 0] *= -1.0
    out[..., 1, 2] *= -1.0
    out[..., 2, 1] *= -1.0
    return out


def _signed_min_image(offsets: np.ndarray, n: int) -> np.ndarray:
    """Map integer offsets to the signed minimal-image representative."""
    return (offsets + n // 2) % n - n // 2


def _bulk_images(n: int, cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """All nonzero lattice offsets |m| <= cutoff that are not multiples of N.

    Returns (m, base) with base = m mod N in 1..N-1.  Self-image offsets
    (multiples of N) cancel identically out of the folded matrix and are
    dropped.
    """
    m = np.arange(-cutoff, cutoff + 1)
    m = m[m != 0]
    base = np.mod(m, n)
    keep = base != 0
    return m[keep], base[keep]


def _hurwitz_folded_coeff(n: int) -> np.ndarray:
    """Exact image sums sum_i |o + i N|^-3 for o = 1..N-1 (linear phase)."""
    o = np.arange(1, n)
    q = o / n
    return (zeta(3.0, q) + zeta(3.0, 1.0 - q)) / n**3


def _offset_blocks(config: ChainConfig, delta0: float) -> np.ndarray:
    """Coupling blocks B[o, c] between ions (l + o) and l, c = parity of l.

    o runs over 1..N-1.  RING: minimal-image pair, once.  BULK: image-folded
    over the infinite chain.  Shape (N-1, 2, 3, 3).
    """
    n, kappa = config.n_ions, config.kappa
    out = np.zeros((n - 1, 2, 3, 3))
    if config.boundary is Boundary.RING:
        o = np.arange(1, n)
        dx = _signed_min_image(o, n).astype(float)
        dy0 = np.where(o % 2 == 1, -2.0 * delta0, 0.0)
        out[:, 0] = pair_dyadic(dx, dy0, kappa)
        # the antipodal separation direction is ambiguous on a ring; average
        # both branches, which cancels the odd-in-dx (xy) element
        out[n // 2 - 1, 0, 0, 1] = 0.0
        out[n // 2 - 1, 0, 1, 0] = 0.0
    elif delta0 == 0.0:
        # linear bulk: pure power law, exact Hurwitz-zeta folding
        coeff = _hurwitz_folded_coeff(n)
        out[:, 0, 0, 0] = -kappa * coeff
        out[:, 0, 1, 1] = 0.5 * kappa * coeff
        out[:, 0, 2, 2] = 0.5 * kappa * coeff
    else:
        m, base = _bulk_images(n, BULK_OFFSET_CUTOFF)
        dy0 = np.where(m % 2 != 0, -2.0 * delta0, 0.0)
        blocks = pair_dyadic(m.astype(float), dy0, kappa)
        np.add.at(out[:, 0], base - 1, blocks)
    out[:, 1] = _flip_y(out[:, 0])
    return out


def _onsite_diagonal(config: ChainConfig, delta0: float) -> np.ndarray:
    """On-site 3x3 curvature block (parity independent), units m_I omega_I^2.

    Assembled as trap - sum(pair blocks) so that rigid translations cost
    exactly zero at any truncation.
    """
    blocks = _offset_blocks(config, delta0)
    trap = np.diag([0.0, 1.0, config.alpha])
    return trap - blocks[:, 0].sum(axis=0)


# ---------------------------------------------------------------------------
# classical potential and equilibrium


def _odd_neighbor_sum(delta: float, config: ChainConfig, power: float) -> float:
    """sum over odd axial offsets o of (o^2 + 4 delta^2)^(-power/2), one term
    per ordered neighbor of a fixed ion."""
    if config.boundary is Boundary.RING:
        o = np.arange(1, config.n_ions)
        o = o[o % 2 == 1]
        m = np.minimum(o, config.n_ions - o).astype(float)
        return float(np.sum((m * m + 4.0 * delta * delta) ** (-0.5 * power)))
    o = np.arange(1, BULK_OFFSET_CUTOFF + 1, 2, dtype=float)
    return 2.0 * float(np.sum((o * o + 4.0 * delta * delta) ** (-0.5 * power)))


def zigzag_root_gap(delta: float, config: ChainConfig) -> float:
    """G(delta) with dV/d(delta) = 2 delta G(delta); the zigzag root solves G=0.

    Differentiating the classical potential gives
    ``G = 1 - 2 kappa sum_j (4 delta^2 + (2j-1)^2)^(-3/2)`` (the factor 2 is
    fixed by consistency with kappa_c = 4 / (7 zeta(3)) and with transverse
    mode softening at the zone edge).
    """
    return 1.0 - config.kappa * _odd_neighbor_sum(delta, config, 3.0)


def classical_potential(delta_tilde: float, config: ChainConfig) -> float:
    """Classical potential per ion, in units of E_d.

    RING: the full trap + Coulomb energy per ion of the N-ion ring
    (each unordered pair counted once, minimal-image distances; the
    antipodal pair therefore enters with weight 1/2 per ion).

    BULK: the Coulomb energy per ion diverges in the thermodynamic limit, so
    the finite, delta-dependent difference ``V(delta) - V(0)`` per ion is
    returned, with a certified truncation tail below 1e-12.
    """
    if delta_tilde < 0.0:
        raise ValueError("delta_tilde must be non-negative")
    d2 = delta_tilde * delta_tilde
    if config.boundary is Boundary.RING:
        n = config.n_ions
        o = np.arange(1, n)
        m = np.minimum(o, n - o).astype(float)
        r = np.where(o % 2 == 1, np.sqrt(m * m + 4.0 * d2), m)
        return d2 + 0.5 * config.kappa * float(np.sum(1.0 / r))
    if delta_tilde == 0.0:
        return 0.0
    tol = 1e-12
    j_hi = int(np.sqrt(config.kappa * d2 / (2.0 * tol))) + 2
    if j_hi > 20_000_000:
        tail = config.kappa * d2 / (2.0 * (20_000_000 - 1) ** 2)
        raise ConvergenceError(
            f"classical potential tail bound {tail:.3e} exceeds tol {tol:.1e} "
            f"at the offset cap"
        )
    o = np.arange(1, 2 * j_hi, 2, dtype=float)
    series = 1.0 / np.sqrt(o * o + 4.0 * d2) - 1.0 / o
    return d2 + config.kappa * float(np.sum(series))


def solve_delta0(config: ChainConfig, tol: float = 1e-12) -> Equilibrium:
    """Solve the classical zigzag equilibrium.

    Returns delta0 = 0 when the derivative has no positive root (kappa at or
    below the classical transition) and otherwise the largest root of
    dV/d(delta) = 0, which is the global minimizer.  The residual
    |dV/d(delta)| at the returned point is below ``tol``.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    gap0 = zigzag_root_gap(0.0, config)
    if gap0 >= 0.0:
        return Equilibrium(0.0, equilibrium_positions(config, 0.0))
    lo, hi = 0.0, 1.0
    while zigzag_root_gap(hi, config) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 64.0:
            raise BracketingError(
                f"no sign change of dV/d(delta) on (0, {hi}]", interval=(0.0, hi)
            )
    delta0 = brentq(zigzag_root_gap, lo, hi, args=(config,), xtol=1e-15, rtol=8.9e-16)
    residual = abs(2.0 * delta0 * zigzag_root_gap(delta0, config))
    if residual >= tol:
        raise ConvergenceError(f"equilibrium residual {residual:.3e} >= tol {tol:.1e}")
    return Equilibrium(float(delta0), equilibrium_positions(config, float(delta0)))


def critical_kappa_classical(config: ChainConfig) -> float:
    """kappa at which the zigzag root first appears, for this boundary."""
    return 1.0 / _odd_neighbor_sum(0.0, config, 3.0)


# ---------------------------------------------------------------------------
# harmonic expansion


def bare_frequencies(config: ChainConfig, eq: Equilibrium) -> np.ndarray:
    """Bare local oscillator frequencies (Omega_x, Omega_y, Omega_z) in omega_I.

    Translational symmetry makes these site independent.  In the linear bulk
    limit the closed forms ``Omega_x = sqrt(2 kappa zeta(3))`` and
    ``Omega_y/z = sqrt(alpha_y/z - kappa zeta(3))`` are returned exactly.
    """
    if config.boundary is Boundary.BULK and eq.delta0 == 0.0:
        arg = np.array(
            [
                2.0 * config.kappa * ZETA3,
                1.0 - config.kappa * ZETA3,
                config.alpha - config.kappa * ZETA3,
            ]
        )
    else:
        arg = np.diag(_onsite_diagonal(config, eq.delta0)).copy()
    if np.any(arg <= 0.0):
        bad = "xyz"[int(np.argmin(arg))]
        raise BareInstabilityError(
            f"bare Omega_{bad}^2 = {arg.min():.6g} <= 0 at kappa = {config.kappa}; "
            f"the linear-phase single-site bound is kappa_tilde_c = 1/zeta(3) "
            f"= {1.0 / ZETA3:.6f}"
        )
    return np.sqrt(arg)


def build_hessian(config: ChainConfig, eq: Equilibrium) -> Hessian:
    """Assemble the real symmetric 3N x 3N Hessian at the given equilibrium.

    Pairwise Coulomb dyadics plus diagonal trap curvature; on-site blocks are
    accumulated from the same pair set as the off-site blocks, so rigid
    translations are exact zero modes at machine precision.
    """
    n = config.n_ions
    blocks = _offset_blocks(config, eq.delta0)
    trap = np.diag([0.0, 1.0, config.alpha])
    mat = np.zeros((3 * n, 3 * n))
    cols = np.arange(n)
    parity = cols % 2
    for o in range(1, n):
        rows = (cols + o) % n
        for c in (0, 1):
            sel = parity == c
            b = blocks[o - 1, c]
            for a in range(3):
                for bax in range(3):
                    mat[3 * rows[sel] + a, 3 * cols[sel] + bax] += b[a, bax]
    onsite = {c: trap - blocks[:, c].sum(axis=0) for c in (0, 1)}
    for c in (0, 1):
        sel = np.where(parity == c)[0]
        for a in range(3):
            for bax in range(3):
                mat[3 * sel + a, 3 * sel + bax] += onsite[c][a, bax]
    mat = 0.5 * (mat + mat.T)
    return Hessian(mat, n)


def equilibrium_residual(config: ChainConfig, eq: Equilibrium) -> float:
    """Max-norm of the classical gradient at ``eq`` (units m_I omega_I^2 d).

    Used as a gate before Hessian construction: the harmonic expansion is
    only valid where the first-order term vanishes.
    """
    n, kappa = config.n_ions, config.kappa
    delta0 = eq.delta0
    grad = np.zeros((n, 2))  # x and y components; z vanishes identically
    if config.boundary is Boundary.RING:
        offsets = _signed_min_image(np.arange(1, n), n)
        bases = np.arange(1, n)
    else:
        offsets, bases = _bulk_images(n, BULK_OFFSET_CUTOFF)
    for c in (0, 1):
        # (dx, dy) points from the reference ion (parity c) to each neighbor;
        # the Coulomb gradient at the reference ion is +(kappa/2) (dx,dy)/r^3
        dy = np.where(bases % 2 != 0, -2.0 * delta0 * (-1.0) ** c, 0.0)
        dx = offsets.astype(float)
        if config.boundary is Boundary.RING:
            dx = np.where(np.abs(offsets) == n // 2, 0.0, dx)  # antipodal split
        r2 = offsets.astype(float) ** 2 + dy * dy
        r3 = r2**1.5
        grad[c::2, 0] = 0.5 * kappa * np.sum(dx / r3)
        grad[c::2, 1] = 0.5 * kappa * np.sum(dy / r3) + delta0 * (-1.0) ** c
    return float(np.max(np.abs(grad)))


def omega_from_hessian(hess: Hessian) -> np.ndarray:
    """Per-(l, nu) bare frequencies from the Hessian diagonal, shape (3N,)."""
    diag = np.diag(hess.matrix)
    if np.any(diag <= 0.0):
        raise BareInstabilityError(
            f"Hessian diagonal has non-positive entries (min {diag.min():.6g})"
        )
    return np.sqrt(diag)
