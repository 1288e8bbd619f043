"""Quasi-momentum block structure of the chain.

Linear phase: per-(k, axis) scalar blocks with closed-form couplings built
on Li3(e^{-ik d}); zigzag phase: two-ion unit cells with 6 x 6 (h, g)
blocks per k in the reduced Brillouin zone ``[-pi/2d, pi/2d)``, which
decouple into an in-plane (x, y) and an out-of-plane (z) sector.

Axis convention (fixed throughout the package): the zigzag displacement is
along y, so the in-plane sector is {x, y} and the gapless helical motion is
along z.  Block basis ordering: (s=0,x), (s=1,x), (s=0,y), (s=1,y),
(s=0,z), (s=1,z); the reduced-zone cell length is ``2d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import bernoulli

from .chain import (
    BULK_OFFSET_CUTOFF,
    ZETA3,
    Boundary,
    ChainConfig,
    Equilibrium,
    pair_dyadic,
    solve_delta0,
)
from .errors import (
    BareInstabilityError,
    ConvergenceError,
    DynamicalInstabilityError,
    PhysicsError,
)
from .symplectic import BogoliubovMode, QuadraticForm, symplectic_diagonalize

AXES = {"x": 0, "y": 1, "z": 2}
AXIS_NAMES = "xyz"

# axis label of each entry in the 6-dimensional cell basis
CELL_AXIS_MAP = np.array([0, 0, 1, 1, 2, 2])


def _cell_index(s: int, axis: int) -> int:
    return 2 * axis + s


# ---------------------------------------------------------------------------
# polylogarithm


def _li3_series_coefficients(n_terms: int = 72) -> np.ndarray:
    """Coefficients zeta(3 - j) / j! of the expansion of Li3(e^mu) around mu=0.

    j = 2 is excluded (it carries the logarithmic term).  Negative-argument
    zeta values come from Bernoulli numbers, zeta(-n) = -B_{n+1} / (n+1).
    """
    coeff = np.zeros(n_terms)
    coeff[0] = ZETA3
    coeff[1] = np.pi**2 / 6.0
    bern = bernoulli(n_terms)
    factorials = np.cumprod(np.concatenate([[1.0], np.arange(1.0, n_terms)]))
    coeff[3] = -0.5 / factorials[3]  # zeta(0) = -1/2
    for j in range(4, n_terms):
        n = j - 3
        zeta_neg = -bern[n + 1] / (n + 1)  # zero for even n
        coeff[j] = zeta_neg / factorials[j]
    return coeff


_LI3_COEFF = _li3_series_coefficients()


def polylog3(theta):
    """Li3(e^{-i theta}) for theta in [-pi, pi], to better than 1e-12.

    Uses the expansion of Li3(e^mu) in mu = -i*theta, whose only non-analytic
    piece is the explicit (3/2 - ln(-mu)) mu^2 / 2 term; the remaining series
    converges geometrically on the closed zone.  The imaginary part equals
    the Bernoulli-polynomial closed form -(pi^2 th/6 - pi th^2/4 + th^3/12)
    (odd-extended), which is exercised by the test suite.
    """
    theta_arr = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta_arr) > np.pi + 1e-12):
        raise ValueError("theta must lie in [-pi, pi]")
    scalar = theta_arr.ndim == 0
    th = np.atleast_1d(theta_arr).astype(float)
    mu = -1j * th
    out = np.zeros(th.shape, dtype=complex)
    power = np.ones_like(mu)
    for c in _LI3_COEFF:
        if c != 0.0:
            out += c * power
        power = power * mu
    nonzero = th != 0.0
    log_term = np.zeros_like(mu)
    # ln(-mu) = ln(i theta) = ln|theta| + i (pi/2) sign(theta)
    log_term[nonzero] = np.log(np.abs(th[nonzero])) + 0.5j * np.pi * np.sign(th[nonzero])
    out[nonzero] += (1.5 - log_term[nonzero]) * mu[nonzero] ** 2 / 2.0
    return out[0] if scalar else out


def critical_kappa() -> float:
    """Classical zigzag transition coupling, 4 / (7 zeta(3)).

    Equals the root of ``1 - kappa (zeta(3) - Re Li3(-1)) = 0`` through the
    identity zeta(3) - Li3(-1) = 7 zeta(3) / 4.
    """
    return 4.0 / (7.0 * ZETA3)


def bare_critical_kappa() -> float:
    """Single-site bound 1/zeta(3) where the bare Omega_y turns imaginary."""
    return 1.0 / ZETA3


def _bare_omega_linear(nu: str, kappa: float, alpha: float = 1.0) -> float:
    trap = {"x": None, "y": 1.0, "z": alpha}[nu]
    if nu == "x":
        return float(np.sqrt(2.0 * kappa * ZETA3))
    arg = trap - kappa * ZETA3
    if arg <= 0.0:
        raise BareInstabilityError(
            f"Omega_{nu} imaginary at kappa = {kappa} (bound 1/zeta(3) scaled)"
        )
    return float(np.sqrt(arg))


def coupling_f(k, nu: str, kappa: float, omega_bare: float):
    """Linear-chain coupling f_nu(k) in omega_I, thermodynamic limit.

    f_x = -(kappa / Omega_x) Re Li3(e^{-ik d}) and
    f_{y/z} = +(kappa / 2 Omega_{y/z}) Re Li3(e^{-ik d}).  These follow from
    summing the lattice couplings over both directions of the chain and are
    pinned by the finite-N lattice-sum oracle; at k = 0 they reduce to
    f_x = -Omega_x / 2 (the translational sum rule).
    """
    re_li3 = np.real(polylog3(np.asarray(k, dtype=float)))
    if nu == "x":
        return -kappa * re_li3 / omega_bare
    if nu in ("y", "z"):
        return 0.5 * kappa * re_li3 / omega_bare
    raise ValueError(f"unknown axis {nu!r}")


def dispersion_linear(k, nu: str, kappa: float, alpha: float = 1.0):
    """Closed-form linear-chain dispersion omega_nu(k) in omega_I.

    omega_x = sqrt(2 kappa [zeta(3) - Re Li3]) and
    omega_y/z = sqrt(alpha_y/z - kappa [zeta(3) - Re Li3]).
    """
    k_arr = np.asarray(k, dtype=float)
    re_li3 = np.real(polylog3(k_arr))
    gap = ZETA3 - re_li3
    if nu == "x":
        arg = 2.0 * kappa * gap
    elif nu in ("y", "z"):
        arg = (1.0 if nu == "y" else alpha) - kappa * gap
    else:
        raise ValueError(f"unknown axis {nu!r}")
    arg = np.asarray(arg)
    if np.any(arg < -1e-14):
        bad = np.atleast_1d(k_arr)[np.atleast_1d(arg) < -1e-14]
        raise DynamicalInstabilityError(
            f"omega_{nu}(k)^2 < 0 at k = {bad[:3]}...: linear chain unstable "
            f"towards zigzag formation at this kappa"
        )
    omega = np.sqrt(np.clip(arg, 0.0, None))
    return float(omega) if np.isscalar(k) or k_arr.ndim == 0 else omega


def mode_vectors_linear(k: float, nu: str, kappa: float, alpha: float = 1.0):
    """Sigma-normalized (u, v) of the 1 x 1 linear-chain block at (k, nu).

    u = sqrt((Omega+f)/2w + 1/2), |v| = sqrt((Omega+f)/2w - 1/2); v carries
    the sign of f(k), the convention the generic diagonalizer produces.
    """
    omega_nu = _bare_omega_linear(nu, kappa, alpha)
    f = coupling_f(k, nu, kappa, omega_nu)
    omega = dispersion_linear(k, nu, kappa, alpha)
    if omega < 1e-12 * omega_nu:
        raise PhysicsError(
            f"(k={k}, {nu}) is a zero mode; use the zero-subspace path"
        )
    a = omega_nu + f
    u = np.sqrt(a / (2.0 * omega) + 0.5)
    v = np.sign(f) * np.sqrt(max(a / (2.0 * omega) - 0.5, 0.0))
    return float(u), float(v)


def softening_kappa_c(tol: float = 1e-12) -> float:
    """kappa_c recovered by bisecting the transverse zone-edge softening."""
    gap = ZETA3 - float(np.real(polylog3(np.pi)))

    def edge_omega_sq(kappa: float) -> float:
        return 1.0 - kappa * gap

    return float(brentq(edge_omega_sq, 0.1, 0.8, xtol=tol, rtol=8.9e-16))


# ---------------------------------------------------------------------------
# zigzag unit-cell couplings


@dataclass
class BlochBlock:
    """Per-k coupling block of the two-ion-cell description."""

    k: float
    form: QuadraticForm


class CellCouplings:
    """Lattice-summed couplings between two-ion unit cells.

    Precomputes, for every cell separation p, the raw 6 x 6 Hessian coupling
    ``F[p][(s,nu),(s',nu')]`` between cell p and cell 0 (units m_I omega_I^2)
    together with the on-site blocks, sharing the pair set (and hence the
    truncation) with the equilibrium condition so that the translational and
    helical zero modes of the k = 0 block vanish at machine precision.
    """

    def __init__(self, config: ChainConfig, eq: Equilibrium):
        self.config = config
        self.eq = eq
        n = config.n_ions
        self.n_cells = n // 2
        self.cell_length = 2.0  # in units of d
        delta0 = eq.delta0
        kappa = config.kappa

        if config.boundary is Boundary.RING:
            p_vals = np.arange(self.n_cells)
        else:
            # certified truncation: neglected couplings beyond the cutoff sum
            # to at most ~2 kappa / R^2 per element
            tail_bound = 2.0 * kappa / BULK_OFFSET_CUTOFF**2
            if tail_bound > 1e-9:
                raise ConvergenceError(
                    f"lattice-sum tail bound {tail_bound:.2e} exceeds 1e-9 at "
                    f"offset cutoff {BULK_OFFSET_CUTOFF}; kappa = {kappa} is too "
                    f"large for the bulk coupling tables"
                )
            half = BULK_OFFSET_CUTOFF // 2 + 1
            p_vals = np.arange(-half, half + 1)
        self.p_vals = p_vals
        f_table = np.zeros((len(p_vals), 6, 6))
        onsite = {0: np.diag([0.0, 1.0, config.alpha]), 1: np.diag([0.0, 1.0, config.alpha])}

        for s in (0, 1):
            for sp in (0, 1):
                dx_raw = self.cell_length * p_vals + (s - sp)
                if config.boundary is Boundary.RING:
                    dx = (dx_raw + n // 2) % n - n // 2
                    keep = np.abs(dx) > 0.5
                else:
                    dx = dx_raw
                    keep = (np.abs(dx) > 0.5) & (np.abs(dx) <= BULK_OFFSET_CUTOFF)
                dy = delta0 * ((-1.0) ** s - (-1.0) ** sp)
                blocks = pair_dyadic(dx[keep], dy, kappa)
                if config.boundary is Boundary.RING:
                    anti = np.abs(dx[keep]) == n // 2
                    blocks[anti, 0, 1] = 0.0  # antipodal direction ambiguity
                    blocks[anti, 1, 0] = 0.0
                rows = [_cell_index(s, a) for a in range(3)]
                cols = [_cell_index(sp, a) for a in range(3)]
                f_table[np.ix_(np.where(keep)[0], rows, cols)] += blocks
                # on-site curvature of the column ion accumulates -sum(pairs)
                onsite[sp] = onsite[sp] - blocks.sum(axis=0)

        self.f_table = f_table
        self.onsite = onsite
        omega_sq = np.zeros(6)
        raw_onsite = np.zeros((6, 6))
        for sp in (0, 1):
            for a in range(3):
                omega_sq[_cell_index(sp, a)] = onsite[sp][a, a]
                for b in range(3):
                    if a != b:
                        raw_onsite[_cell_index(sp, a), _cell_index(sp, b)] = onsite[sp][a, b]
        if np.any(omega_sq <= 0.0):
            raise BareInstabilityError(
                f"cell on-site curvature not positive definite: {omega_sq}"
            )
        self.omega_bare = np.sqrt(omega_sq)
        self.raw_onsite_offdiag = raw_onsite

    def raw_coupling(self, k: float | np.ndarray) -> np.ndarray:
        """sum_p F[p] e^{-i a k p} plus on-site cross terms; shape (..., 6, 6)."""
        k_arr = np.atleast_1d(np.asarray(k, dtype=float))
        out = np.zeros((len(k_arr), 6, 6), dtype=complex)
        chunk = 4096
        for start in range(0, len(self.p_vals), chunk):
            p_chunk = self.p_vals[start : start + chunk]
            phases = np.exp(-1j * self.cell_length * np.outer(k_arr, p_chunk))
            out += np.tensordot(phases, self.f_table[start : start + chunk], axes=(1, 0))
        out += self.raw_onsite_offdiag[None, :, :]
        return out

    def allowed_momenta(self) -> np.ndarray:
        """Sorted discrete momenta of the finite ring, in [-pi/2d, pi/2d)."""
        n = self.config.n_ions
        k = (2.0 * np.pi * np.arange(self.n_cells) / n + np.pi / 2.0) % np.pi \
            - np.pi / 2.0
        return np.sort(k)

    def block(self, k: float) -> BlochBlock:
        if self.config.boundary is Boundary.RING:
            allowed = self.allowed_momenta()
            if np.min(np.abs(allowed - k)) > 1e-9:
                raise ValueError(
                    f"k = {k} is not an allowed momentum of the {self.config.n_ions}-ion "
                    f"ring; use CellCouplings.allowed_momenta() or bulk boundaries"
                )
        raw = self.raw_coupling(k)[0]
        denom = 2.0 * np.sqrt(np.outer(self.omega_bare, self.omega_bare))
        g = raw / denom
        if abs(k) < 1e-12 or abs(abs(k) - np.pi / self.cell_length) < 1e-12:
            g = g.real.astype(float)  # self-paired momenta have real blocks
        h = g + np.diag(self.omega_bare)
        form = QuadraticForm(h, g, self.omega_bare)
        herm = np.max(np.abs(g - g.conj().T))
        if herm > 1e-9 * max(1.0, np.max(np.abs(g))):
            raise PhysicsError(f"Bloch block at k={k} not Hermitian ({herm:.2e})")
        # out-of-plane sector must decouple exactly
        z_rows = [_cell_index(s, 2) for s in (0, 1)]
        xy_rows = [_cell_index(s, a) for a in range(2) for s in (0, 1)]
        cross = np.max(np.abs(g[np.ix_(z_rows, xy_rows)]))
        if cross > 1e-10 * max(1.0, np.max(np.abs(g))):
            raise PhysicsError(f"z sector couples to the zigzag plane ({cross:.2e})")
        return BlochBlock(k, form)


def build_bloch_block_zigzag(k: float, config: ChainConfig,
                             eq: Equilibrium | None = None) -> BlochBlock:
    """One 6 x 6 (h, g) coupling block at quasi-momentum k (units 1/d).

    Works for any equilibrium, including delta0 = 0, where it describes the
    linear chain folded into the reduced zone.
    """
    if eq is None:
        eq = solve_delta0(config)
    return CellCouplings(config, eq).block(k)


def reduced_zone_grid(n_k: int, include_edge: bool = True) -> np.ndarray:
    """n_k momenta spanning the reduced zone [-pi/2d, pi/2d)."""
    edge = np.pi / 2.0
    if include_edge:
        return np.linspace(-edge, edge, n_k, endpoint=False)
    step = 2.0 * edge / n_k
    return -edge + (np.arange(n_k) + 0.5) * step


@dataclass
class DispersionTable:
    """Tracked mode branches over a momentum grid (six per k).

    Zero-mode slots (gapless branches at k = 0 in the zigzag phase) carry
    omega = 0 and NaN mixing angle / collectivity; their (p, q, m_tilde)
    data lives in ``zero_pairs``.
    """

    k: np.ndarray
    omega: np.ndarray          # (n_k, 6)
    theta_xy: np.ndarray       # (n_k, 6) spatial mixing angle
    collectivity: np.ndarray   # (n_k, 6)
    is_zero: np.ndarray        # (n_k, 6) bool
    modes: list                # per k: list of BogoliubovMode in branch order (None at zero slots)
    zero_pairs: list           # ZeroModePair objects found on the grid (k = 0)
    config: ChainConfig = None
    delta0: float = 0.0
    warnings: list = field(default_factory=list)


def mixing_angle(mode: BogoliubovMode) -> float:
    """Spatial mixing angle in [0, pi/2] of a cell-basis mode.

    arctan of the y weight over the x weight summed over sublattices, using
    the Sigma-weights |u|^2 - |v|^2 (= the polarization weights of the
    underlying classical eigenvector, non-negative per component).  With
    these weights the in-plane complementarity theta + theta' = pi/2 of
    paired modes is exact; the naive particle-plus-hole weight violates it
    at the percent level.  NaN for pure out-of-plane modes.
    """
    w = np.abs(mode.u) ** 2 - np.abs(mode.v) ** 2
    w_x = float(w[0] + w[1])
    w_y = float(w[2] + w[3])
    if w_x + w_y < 1e-14:
        return float("nan")
    return float(np.arctan2(w_y, w_x))


def collectivity(mode: BogoliubovMode) -> float:
    """|v| / |u|: particle-hole hybridization weight, in [0, 1) when stable."""
    return float(np.linalg.norm(mode.v) / np.linalg.norm(mode.u))


def _sigma_overlap(x_a: np.ndarray, x_b: np.ndarray) -> float:
    dim = len(x_a) // 2
    prod = np.vdot(x_a[:dim], x_b[:dim]) - np.vdot(x_a[dim:], x_b[dim:])
    return abs(prod)


def dispersion_zigzag(k_grid: np.ndarray, config: ChainConfig,
                      eq: Equilibrium | None = None,
                      tol_zero: float = 1e-8) -> DispersionTable:
    """Diagonalize the cell blocks on a momentum grid and track branches.

    Branches are continued in k by greedy maximal Sigma-overlap of the
    eigenvectors between neighboring grid points (ambiguous assignments with
    overlap below 0.5 are recorded as warnings).  At k = 0 in the zigzag
    phase the two gapless directions appear as zero pairs and fill the
    remaining branch slots with omega = 0.
    """
    if eq is None:
        eq = solve_delta0(config)
    couplings = CellCouplings(config, eq)
    n_k = len(k_grid)
    omega = np.zeros((n_k, 6))
    theta = np.full((n_k, 6), np.nan)
    coll = np.full((n_k, 6), np.nan)
    is_zero = np.zeros((n_k, 6), dtype=bool)
    mode_rows: list[list] = []
    zero_pairs: list = []
    warn_records: list = []

    prev_vectors: list[np.ndarray | None] = [None] * 6
    for i, k in enumerate(k_grid):
        block = couplings.block(float(k))
        nf = symplectic_diagonalize(
            block.form, tol_zero=tol_zero, axis_map=CELL_AXIS_MAP,
            p_norm=config.n_ions,
        )
        slots: list = [None] * 6
        entries = list(nf.modes)
        if nf.zero_pairs:
            zero_pairs.extend(nf.zero_pairs)
        if prev_vectors[0] is None:
            for rank, idx in enumerate(np.argsort([m.omega for m in entries])):
                slots[rank] = entries[idx]
        else:
            available = list(range(len(entries)))
            overlaps = np.zeros((6, len(entries)))
            for b in range(6):
                if prev_vectors[b] is None:
                    continue
                for j, m in enumerate(entries):
                    overlaps[b, j] = _sigma_overlap(prev_vectors[b], m.x_vector())
            assigned_modes: set = set()
            pairs = []
            flat = [(-overlaps[b, j], b, j) for b in range(6) for j in available
                    if prev_vectors[b] is not None]
            flat.sort()
            used_b: set = set()
            for neg, b, j in flat:
                if b in used_b or j in assigned_modes:
                    continue
                used_b.add(b)
                assigned_modes.add(j)
                pairs.append((b, j, -neg))
                if len(assigned_modes) == len(entries):
                    break
            for b, j, ov in pairs:
                slots[b] = entries[j]
                if ov < 0.5:
                    warn_records.append((float(k), b, ov))
            remaining = [j for j in range(len(entries)) if j not in assigned_modes]
            empty = [b for b in range(6) if slots[b] is None]
            for b, j in zip(empty, remaining):
                slots[b] = entries[j]
        zero_slots = [b for b in range(6) if slots[b] is None]
        for b in zero_slots:
            is_zero[i, b] = True
        for b in range(6):
            m = slots[b]
            if m is None:
                continue
            omega[i, b] = m.omega
            theta[i, b] = mixing_angle(m)
            coll[i, b] = collectivity(m)
            prev_vectors[b] = m.x_vector()
        mode_rows.append(slots)

    return DispersionTable(
        np.asarray(k_grid, dtype=float), omega, theta, coll, is_zero,
        mode_rows, zero_pairs, config, eq.delta0, warn_records,
    )


# ---------------------------------------------------------------------------
# Fourier diagonality of distance kernels


def verify_f_diagonality(n: int, f) -> float:
    """Max |f_{m,m'}|, m != m', of the Fourier-transformed distance kernel.

    ``f`` may be a callable on PBC separations or an array of length n with
    f[0] = 0 and f[p] = f[n-p]; translational symmetry makes the transform
    exactly diagonal, which this evaluates numerically.
    """
    if n % 2 != 0:
        raise ValueError("n must be even")
    p = np.arange(n)
    if callable(f):
        dist = np.minimum(p, n - p)
        f_arr = np.array([f(int(d)) if d > 0 else 0.0 for d in dist])
    else:
        f_arr = np.asarray(f, dtype=float)
        if abs(f_arr[0]) > 0 or not np.allclose(f_arr[1:], f_arr[1:][::-1]):
            raise ValueError("kernel must satisfy f(0) = 0 and f(p) = f(N-p)")
    l_idx = np.arange(n)
    kernel = f_arr[(l_idx[:, None] - l_idx[None, :]) % n]
    kernel = kernel * np.exp(1j * np.pi * (l_idx[:, None] - l_idx[None, :]))
    phase = np.exp(2j * np.pi * np.outer(l_idx, np.arange(n)) / n)
    f_mat = phase.conj().T @ kernel @ phase / n
    off = f_mat - np.diag(np.diag(f_mat))
    return float(np.max(np.abs(off)))


def f_diagonal(n: int, f) -> np.ndarray:
    """Diagonal entries f_m of the same transform (single-sum form)."""
    p = np.arange(n)
    if callable(f):
        dist = np.minimum(p, n - p)
        f_arr = np.array([f(int(d)) if d > 0 else 0.0 for d in dist])
    else:
        f_arr = np.asarray(f, dtype=float)
    m = np.arange(n)
    phases = np.exp(1j * np.pi * p[None, :] - 2j * np.pi * np.outer(m, p) / n)
    return (phases * f_arr[None, :]).sum(axis=1)
