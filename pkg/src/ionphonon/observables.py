"""Physical observables evaluated from the phonon normal form.

All position correlators and susceptibilities are reported in units of d^2
(and d^2/omega_I), which introduces an explicit 1/lambda^2 quantum scale:
``delta R / d = (b + b^dag) / (lambda sqrt(2 Omega/omega_I))``.  Energies and
frequencies stay in omega_I with k_B = 1.

Mode data comes from the two-ion-cell Bloch description on a momentum grid:
the exact discrete ring momenta for ``Boundary.RING`` and a midpoint
quadrature of the reduced zone (k = 0 excluded) for ``Boundary.BULK``, where
gapless branches are integrable or detectably divergent.  All ladder
averages close over each block's own amplitudes (the negative-norm
directions of block k are exactly the -k creation operators), so every sum
is invariant under the arbitrary per-mode phases; time reversal is used only
to fill the -k grid points by conjugation instead of re-diagonalizing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .bloch import CELL_AXIS_MAP, CellCouplings, _cell_index
from .chain import Boundary, ChainConfig, Equilibrium, solve_delta0
from .errors import (
    DivergenceError,
    InternalConsistencyError,
    NoOrderParameterError,
    ResolutionWarning,
)
from .freeparticle import (
    FreeParticleSector,
    build_sectors,
    q_variance,
    thermal_energy_and_heat,
    thermal_p_squared,
)
from .symplectic import symplectic_diagonalize

AXES = {"x": 0, "y": 1, "z": 2}


def _bose(omega: np.ndarray, temperature: float) -> np.ndarray:
    """Bose-Einstein occupation, safe at T = 0 and for large omega/T."""
    if temperature <= 0.0:
        return np.zeros_like(omega)
    x = np.clip(omega / temperature, 1e-12, 700.0)
    return 1.0 / np.expm1(x)


class PhononField:
    """Modes of the cell description on a momentum grid, ready for k sums."""

    def __init__(self, config: ChainConfig, eq: Equilibrium | None = None,
                 n_k: int | None = None, tol_zero: float = 1e-8):
        if eq is None:
            eq = solve_delta0(config)
        self.config = config
        self.eq = eq
        self.couplings = CellCouplings(config, eq)
        n_cells = config.n_ions // 2
        if config.boundary is Boundary.RING:
            k = (2.0 * np.pi * np.arange(n_cells) / config.n_ions + np.pi / 2.0) \
                % np.pi - np.pi / 2.0
            self.weights = np.full(n_cells, 1.0 / n_cells)
        else:
            if n_k is None:
                n_k = 512
            step = np.pi / n_k
            k = -np.pi / 2.0 + (np.arange(n_k) + 0.5) * step
            self.weights = np.full(n_k, 1.0 / n_k)
        order = np.argsort(k)
        self.k = k[order]
        self.weights = self.weights[order]
        n_pts = len(self.k)

        self.omega = np.zeros((n_pts, 6))
        self.mask = np.zeros((n_pts, 6), dtype=bool)
        self.u = np.zeros((n_pts, 6, 6), dtype=complex)
        self.v = np.zeros((n_pts, 6, 6), dtype=complex)
        self.zero_pairs = []

        # diagonalize k >= 0 (and the self-paired edge), mirror to -k by
        # conjugation so that u(-k) = u(k)* holds across the grid
        mirror: dict[int, int] = {}
        for i, kv in enumerate(self.k):
            if kv >= -1e-12 or abs(kv + np.pi / 2.0) < 1e-12:
                continue
            j = int(np.argmin(np.abs(self.k + kv)))
            if abs(self.k[j] + kv) < 1e-9:
                mirror[i] = j
        for i, kv in enumerate(self.k):
            if i in mirror:
                continue
            nf = symplectic_diagonalize(
                self.couplings.block(float(kv)).form, tol_zero=tol_zero,
                axis_map=CELL_AXIS_MAP, p_norm=config.n_ions,
            )
            for g, mode in enumerate(nf.modes):
                self.omega[i, g] = mode.omega
                self.u[i, g] = mode.u
                self.v[i, g] = mode.v
                self.mask[i, g] = True
            if nf.zero_pairs:
                self.zero_pairs = list(nf.zero_pairs)
        for i, j in mirror.items():
            self.omega[i] = self.omega[j]
            self.mask[i] = self.mask[j]
            self.u[i] = self.u[j].conj()
            self.v[i] = self.v[j].conj()

        self._sectors: list[FreeParticleSector] | None = None

    @property
    def n_cells(self) -> int:
        return self.config.n_ions // 2

    def sectors(self) -> list[FreeParticleSector]:
        if self._sectors is None:
            nf0 = _NFShim(self.zero_pairs) if self.zero_pairs else None
            self._sectors = build_sectors(self.config, self.eq, nf0=nf0,
                                          omega_bare=self.couplings.omega_bare)
        return self._sectors

    def mode_count(self) -> int:
        return int(self.mask.sum())

    def min_gap(self) -> float:
        return float(self.omega[self.mask].min()) if self.mask.any() else 0.0


class _NFShim:
    """Minimal zero-pair carrier for build_sectors."""

    def __init__(self, zero_pairs):
        self.zero_pairs = zero_pairs


@dataclass
class CorrelatorRequest:
    """Specification of one spatial correlator <dR_{j,s,nu} dR_{j',s',nu'}>."""

    delta_j: int
    s: int = 0
    sp: int = 0
    nu: str = "y"
    nup: str = "y"
    temperature: float = 0.0
    include_radial_zero_mode: bool = True
    include_longitudinal_zero_mode: bool = False

    def __post_init__(self):
        if self.delta_j < 0:
            raise ValueError("delta_j must be >= 0 (symmetry covers negatives)")
        if self.s not in (0, 1) or self.sp not in (0, 1):
            raise ValueError("sublattices must be 0 or 1")
        if self.nu not in AXES or self.nup not in AXES:
            raise ValueError("axes must be one of x, y, z")
        if self.temperature < 0.0:
            raise ValueError("temperature must be non-negative")


def pair_correlators_k(field: PhononField, k: float, kp: float, s: int, sp: int,
                       nu: str, nup: str, temperature: float,
                       include_radial_zero_mode: bool = True,
                       include_longitudinal_zero_mode: bool = False):
    """The four ladder correlators <a^dag a>, <a a^dag>, <a^dag a^dag>, <a a>.

    Normal terms require k' = k, anomalous ones k' = -k; all other pairings
    vanish because thermal states are diagonal in the phonon numbers.  At
    k = k' = 0 the enabled free-particle sectors contribute their <Q^2> and
    <P^2> moments with the phase-fixed (p, q) sign structure.
    """
    if temperature < 0.0:
        raise ValueError("temperature must be non-negative")
    i = _cell_index(s, AXES[nu])
    j = _cell_index(sp, AXES[nup])
    ki = int(np.argmin(np.abs(field.k - k)))
    kj = int(np.argmin(np.abs(field.k - kp)))
    if abs(field.k[ki] - k) > 1e-9 or abs(field.k[kj] - kp) > 1e-9:
        raise ValueError("momenta must lie on the field grid")
    ada = aad = adad = aa = 0.0 + 0.0j
    n = _bose(field.omega[ki], temperature) * field.mask[ki]
    u_i, v_i = field.u[ki, :, i], field.v[ki, :, i]
    if ki == kj:
        u_j, v_j = field.u[kj, :, j], field.v[kj, :, j]
        ada += np.sum(np.conj(u_i) * u_j * n + np.conj(v_i) * v_j * (n + 1.0))
        aad += np.sum(u_i * np.conj(u_j) * (n + 1.0) + v_i * np.conj(v_j) * n)
    # anomalous pairing: k' = -k modulo a reciprocal lattice vector, which
    # also covers the self-paired zone edge.  Within block k the negative-norm
    # (swap of x) directions are exactly the -k creation operators, so the
    # anomalous averages close over block-k amplitudes alone and are
    # invariant under each mode's arbitrary phase.
    ksum = field.k[ki] + field.k[kj]
    mirrored = abs((ksum + np.pi / 2.0) % np.pi - np.pi / 2.0) < 1e-9
    if mirrored:
        u_j, v_j = field.u[ki, :, j], field.v[ki, :, j]
        adad += -np.sum(np.conj(u_i) * v_j * n + np.conj(v_i) * u_j * (n + 1.0))
        aa += -np.sum(u_i * np.conj(v_j) * (n + 1.0) + v_i * np.conj(u_j) * n)
    if abs(k) < 1e-12 and abs(kp) < 1e-12:
        for sector in _enabled_sectors(field, include_radial_zero_mode,
                                       include_longitudinal_zero_mode):
            zp = sector.pair
            u0_i, u0_j = zp.u0[i], zp.u0[j]
            v0_i, v0_j = zp.v0[i], zp.v0[j]
            q2 = q_variance(sector)
            p2 = thermal_p_squared(sector, temperature,
                                   m_cut=max(400, _p2_cut(sector, temperature)))
            ada += np.conj(u0_i) * u0_j * q2 + np.conj(v0_i) * v0_j * p2
            aad += u0_i * np.conj(u0_j) * q2 + v0_i * np.conj(v0_j) * p2
            adad += -np.conj(u0_i) * np.conj(u0_j) * q2 \
                + np.conj(v0_i) * np.conj(v0_j) * p2
            aa += -u0_i * u0_j * q2 + v0_i * v0_j * p2
    return complex(ada), complex(aad), complex(adad), complex(aa)


def _p2_cut(sector: FreeParticleSector, temperature: float) -> int:
    if temperature <= 0.0:
        return 400
    return int(np.ceil(np.sqrt(36.0 * temperature / sector.level_unit))) + 1


def _enabled_sectors(field: PhononField, radial: bool, longitudinal: bool):
    out = []
    for sector in field.sectors():
        if sector.label == "radial" and radial:
            out.append(sector)
        elif sector.label == "longitudinal" and longitudinal:
            if field.config.boundary is Boundary.BULK:
                raise DivergenceError(
                    "the longitudinal zero-mode offset diverges with N in the "
                    "thermodynamic limit; use a finite ring"
                )
            out.append(sector)
    return out


def _correlator_from_field(field: PhononField, req: CorrelatorRequest) -> float:
    i = _cell_index(req.s, AXES[req.nu])
    j = _cell_index(req.sp, AXES[req.nup])
    omega_i = field.couplings.omega_bare[i]
    omega_j = field.couplings.omega_bare[j]
    lam = field.config.lam
    pref = 1.0 / (2.0 * lam**2 * np.sqrt(omega_i * omega_j))

    # combine the normal (k' = k) and anomalous (k' = -k) ladder averages of
    # one block: C = sum_k e^{-iak dj} conj(n u_i - (n+1) v_i) (u_j - v_j)
    #                 + e^{+iak dj} ((n+1) u_i - n v_i) conj(u_j - v_j);
    # each gamma term is invariant under the mode's arbitrary phase
    n = _bose(field.omega, req.temperature) * field.mask
    u_i, v_i = field.u[:, :, i], field.v[:, :, i]
    u_j, v_j = field.u[:, :, j], field.v[:, :, j]
    a_i = np.conj(n * u_i - (n + 1.0) * v_i)
    b_j = (u_j - v_j) * field.mask
    c_i = (n + 1.0) * u_i - n * v_i
    phase = np.exp(-1j * field.couplings.cell_length * field.k * req.delta_j)
    term_minus = np.sum(a_i * b_j, axis=1) * phase
    term_plus = np.sum(c_i * np.conj(b_j), axis=1) * np.conj(phase)
    total = np.sum(field.weights * (term_minus + term_plus))

    for sector in _enabled_sectors(field, req.include_radial_zero_mode,
                                   req.include_longitudinal_zero_mode):
        zp = sector.pair
        q2 = q_variance(sector)
        # the <P^2> terms carry 4 Re(v0) Re(v0') = 0: positions decouple from P
        coeff = 4.0 * np.imag(zp.u0[i]) * np.imag(zp.u0[j])
        total += coeff * q2 / field.n_cells
    value = pref * total
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise InternalConsistencyError(f"correlator not real: {value}")
    return float(value.real)


def spatial_correlator(req: CorrelatorRequest, config: ChainConfig,
                       eq: Equilibrium | None = None,
                       field: PhononField | None = None,
                       n_k: int = 512) -> float:
    """Spatial correlator <dR_{j,s,nu} dR_{j+dj,s',nu'}> in units of d^2.

    ``delta_j`` counts two-ion unit cells.  With ring boundaries the exact
    discrete momentum sum is used (always finite); in bulk mode the zone
    integral is checked against a doubled grid and raises DivergenceError
    when a gapless branch makes the correlator log-divergent.
    """
    if field is not None:
        return _correlator_from_field(field, req)
    if eq is None:
        eq = solve_delta0(config)
    if config.boundary is Boundary.RING:
        return _correlator_from_field(PhononField(config, eq), req)
    coarse = _correlator_from_field(PhononField(config, eq, n_k=n_k), req)
    fine = _correlator_from_field(PhononField(config, eq, n_k=2 * n_k), req)
    # convergent integrands settle to <~1e-9 under grid doubling while a
    # log-divergent one keeps absorbing ~ln(2) x (branch weight) per doubling
    if abs(fine - coarse) > max(1e-7, 1e-4 * abs(fine)):
        branch = _gapless_branch_name(config, eq)
        raise DivergenceError(
            f"thermodynamic-limit correlator does not converge "
            f"(grid doubling moved it by {abs(fine - coarse):.3e}); the "
            f"gapless {branch} branch makes it log-divergent -- use a finite "
            f"ring (PeriodicRing) instead"
        )
    return fine


def _gapless_branch_name(config: ChainConfig, eq: Equilibrium) -> str:
    names = ["axial sound"]
    if eq.is_zigzag and abs(config.alpha - 1.0) < 1e-12:
        names.append("helical")
    return " / ".join(names)


# ---------------------------------------------------------------------------
# thermodynamics and response


def _einstein_heat(omega: np.ndarray, temperature: float) -> np.ndarray:
    x = omega / temperature
    out = np.zeros_like(omega)
    small = x < 40.0
    xs = x[small]
    out[small] = xs**2 * np.exp(xs) / np.expm1(xs) ** 2
    frozen = (~small) & (x < 700.0)
    out[frozen] = x[frozen] ** 2 * np.exp(-x[frozen])
    return out


def heat_capacity(temperature: float, config: ChainConfig,
                  eq: Equilibrium | None = None,
                  field: PhononField | None = None) -> float:
    """Specific heat capacity c = C/N per ion (k_B = 1).

    Sum of Einstein terms (omega/T)^2 e^{omega/T} / (e^{omega/T} - 1)^2 over
    the mode grid, plus the free-particle sectors for a finite ring (their
    term is the exact fluctuation form of dE/dT; the relative weight
    vanishes as N grows).  Approaches the Dulong-Petit value c = 3 at high
    temperature.
    """
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    if field is None:
        field = PhononField(config, eq)
    gap = field.min_gap()
    if config.boundary is Boundary.RING and temperature < gap / 50.0:
        warnings.warn(
            f"T = {temperature} is far below the smallest resolvable mode "
            f"({gap:.3g}) on this k grid",
            ResolutionWarning,
        )
    per_mode = _einstein_heat(field.omega[field.mask], temperature)
    if config.boundary is Boundary.RING:
        c = float(per_mode.sum())
        for sector in field.sectors():
            c += thermal_energy_and_heat(sector, temperature)[1]
        return c / config.n_ions
    # bulk: intensive zone average, free-particle weight vanishes
    weights = np.repeat(field.weights[:, None], 6, axis=1)[field.mask]
    return 0.5 * float(np.sum(weights * per_mode))


@dataclass
class SusceptibilityResult:
    """Local linear response chi(omega) of one ion coordinate, T = 0."""

    omega: float
    chi: complex
    component: tuple[str, int]
    eta: float


def susceptibility(omega_grid: np.ndarray, component: tuple[str, int],
                   config: ChainConfig, eq: Equilibrium | None = None,
                   eta: float = 1e-2,
                   field: PhononField | None = None) -> list[SusceptibilityResult]:
    """Local dynamical susceptibility chi(omega) at T = 0, units d^2/omega_I.

    chi(omega) = (1 / (2 lam^2 Omega_nu N_c)) sum_{k,gamma} |u - v|^2
    [1/(omega + w + i eta) - 1/(omega - w + i eta)] evaluated at the driven
    component (nu, s); |u - v|^2 is the squared position matrix element in
    local-oscillator units (= Omega_nu / omega for the decoupled branches,
    giving the exact static compliance).  The sign convention is the response
    of the coordinate to the driving force: below the phonon band the ion
    moves in phase (chi real positive) and above it in antiphase, so arg chi
    steps from 0 to +-pi across the band.
    """
    nu, s = component
    if nu not in AXES or s not in (0, 1):
        raise ValueError(f"component must be (x|y|z, 0|1), got {component}")
    if not eta > 0.0:
        raise ValueError("eta must be positive")
    if field is None:
        field = PhononField(config, eq)
    i = _cell_index(s, AXES[nu])
    weight = np.abs(field.u[:, :, i] - field.v[:, :, i]) ** 2 * field.mask
    pref = field.weights[:, None] * weight / (
        2.0 * field.config.lam**2 * field.couplings.omega_bare[i]
    )
    omega_grid = np.asarray(omega_grid, dtype=float)
    out = []
    w = field.omega
    for om in omega_grid:
        terms = 1.0 / (om + w + 1j * eta) - 1.0 / (om - w + 1j * eta)
        chi = complex(np.sum(pref * terms * field.mask))
        out.append(SusceptibilityResult(float(om), chi, (nu, s), eta))
    return out


def phase_shift(result: SusceptibilityResult) -> float:
    """Phase lag arg chi between the driven coordinate and the force."""
    return float(np.angle(result.chi))


def correlation_energy(config: ChainConfig, eq: Equilibrium | None = None,
                       field: PhononField | None = None) -> float:
    """Ground-state correlation energy reduction per ion, in omega_I.

    dE0/N = (1/2N) (sum_m omega_m - sum_{l,nu} Omega_{l,nu}): the optimal
    zero-mean product state pays the sum of local ground-state energies
    (all inter-site quadratic cross terms average to zero there), while the
    correlated ground state pays the mode sum, with zero-mode directions
    contributing nothing.  Always <= 0 (Schur-Horn majorization of omega^2
    against the bare diagonal), with a kink at the structural transition.
    """
    if field is None:
        field = PhononField(config, eq)
    bare = float(np.sum(field.couplings.omega_bare))
    if config.boundary is Boundary.RING:
        total = float(field.omega[field.mask].sum())
        return 0.5 * (total - field.n_cells * bare) / config.n_ions
    weights = np.repeat(field.weights[:, None], 6, axis=1)[field.mask]
    avg_modes = float(np.sum(weights * field.omega[field.mask]))
    return 0.25 * (avg_modes - bare)


def ginzburg_parameter(config: ChainConfig, eq: Equilibrium | None = None,
                       n_list=(50, 100, 200, 400)) -> list[tuple[int, float]]:
    """Same-site helical-axis variance over the squared zigzag circumference.

    Evaluated on finite rings of the requested sizes; grows with ln N
    because the gapless helical branch contributes a 1/omega_k sum.  Requires
    a zigzag order parameter (kappa above the transition).
    """
    if eq is None:
        eq = solve_delta0(config)
    if not eq.is_zigzag:
        raise NoOrderParameterError(
            f"kappa = {config.kappa} is at or below the transition: "
            f"no zigzag order parameter"
        )
    out = []
    for n in n_list:
        cfg_n = replace(config, n_ions=int(n), boundary=Boundary.RING)
        eq_n = solve_delta0(cfg_n)
        req = CorrelatorRequest(0, 0, 0, "z", "z", 0.0)
        value = spatial_correlator(req, cfg_n, eq_n)
        out.append((int(n), value / (2.0 * np.pi * eq_n.delta0) ** 2))
    return out
