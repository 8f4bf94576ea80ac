"""System, bath, and loss-rate definitions for the seven-site FMO monomer.

Basis convention for the 9-level system: index 0 is the electronic ground
state, indices 1..7 are the pigment sites BChl1..BChl7, index 8 is the
reaction center. The ground state and the reaction center are decoupled in
the Hamiltonian; they are reached only through the Markovian loss channels.

The tabulated site energies are used as the total site energies. A uniform
reorganization shift of all seven diagonals can be requested instead
(``reorg_shift_cm1``); because the shift is the same for every site it has
no effect on any observable and is provided purely for bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .units import KB_CM1_PER_K, rate_to_wavenumber

# Seven-site Hamiltonian in the site basis (cm^-1). Diagonal entries are the
# site energies, off-diagonal entries the inter-site couplings fitted to
# measured absorption spectra of the monomer.
FMO_SITE_HAMILTONIAN_CM1 = np.array(
    [
        [12410.0,   -87.7,     5.5,    -5.9,     6.7,   -13.7,    -9.9],
        [  -87.7, 12530.0,    30.8,     8.2,     0.7,    11.8,     4.3],
        [    5.5,    30.8, 12210.0,   -53.5,    -2.2,    -9.6,     6.0],
        [   -5.9,     8.2,   -53.5, 12320.0,   -70.7,   -17.0,   -63.3],
        [    6.7,     0.7,    -2.2,   -70.7, 12480.0,    81.1,    -1.3],
        [  -13.7,    11.8,    -9.6,   -17.0,    81.1, 12630.0,    39.7],
        [   -9.9,     4.3,     6.0,   -63.3,    -1.3,    39.7, 12440.0],
    ]
)

#: site labels (1-based) whose population leaks into the reaction center
FMO_TRAP_SITES = (3, 4)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ExcitonSystem:
    """An excitonic system plus the basis bookkeeping the solvers need.

    ``h_cm1`` is the full real-symmetric Hamiltonian over ``dimension``
    levels. ``site_indices`` lists the basis positions of the pigment sites
    in site-label order. ``ground_index``/``rc_index`` mark the radiative
    sink and the trapping sink (``None`` when absent, e.g. for bare test
    systems). ``trap_sites`` are 1-based site labels coupled to the RC.

    Instances are immutable and safe to share across workers.
    """

    h_cm1: np.ndarray
    site_indices: tuple[int, ...]
    ground_index: Optional[int] = None
    rc_index: Optional[int] = None
    trap_sites: tuple[int, ...] = ()

    def __post_init__(self):
        h = np.asarray(self.h_cm1, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("Hamiltonian must be a square matrix")
        if not np.array_equal(h, h.T):
            raise ValueError("Hamiltonian must be symmetric")
        object.__setattr__(self, "h_cm1", _frozen(h))
        object.__setattr__(self, "site_indices", tuple(int(i) for i in self.site_indices))
        object.__setattr__(self, "trap_sites", tuple(int(s) for s in self.trap_sites))
        for s in self.trap_sites:
            if not 1 <= s <= len(self.site_indices):
                raise ValueError(f"trap site label {s} out of range")

    @property
    def dimension(self) -> int:
        return self.h_cm1.shape[0]

    @property
    def site_count(self) -> int:
        return len(self.site_indices)

    def site_block(self) -> np.ndarray:
        """The Hamiltonian restricted to the pigment sites."""
        idx = np.asarray(self.site_indices)
        return self.h_cm1[np.ix_(idx, idx)]

    def site_basis_index(self, site_label: int) -> int:
        """Basis position of a 1-based site label."""
        if not 1 <= site_label <= self.site_count:
            raise ValueError(f"site label must be in 1..{self.site_count}, got {site_label}")
        return self.site_indices[site_label - 1]


@dataclass(frozen=True)
class BathParams:
    """Drude-Lorentz bath: reorganization energy, correlation rate, temperature.

    All seven sites couple to statistically identical, uncorrelated baths.
    ``gamma_fs1`` is the inverse correlation time of the bath in fs^-1;
    use :meth:`from_timescale` to configure it via the correlation time.
    """

    lam_cm1: float
    gamma_fs1: float
    temperature_k: float

    def __post_init__(self):
        if self.lam_cm1 < 0:
            raise ValueError("reorganization energy must be >= 0")
        if self.gamma_fs1 <= 0:
            raise ValueError("bath correlation rate must be > 0")
        if self.temperature_k <= 0:
            raise ValueError("temperature must be > 0")

    @classmethod
    def from_timescale(cls, lam_cm1: float, gamma_inv_fs: float, temperature_k: float) -> "BathParams":
        """Build from the bath correlation time gamma^-1 in fs."""
        if gamma_inv_fs <= 0:
            raise ValueError("bath correlation time must be > 0")
        return cls(lam_cm1=lam_cm1, gamma_fs1=1.0 / gamma_inv_fs, temperature_k=temperature_k)

    @property
    def gamma_cm1(self) -> float:
        """Bath correlation rate expressed as a wavenumber."""
        return rate_to_wavenumber(self.gamma_fs1)


@dataclass(frozen=True)
class MarkovRates:
    """Markovian loss rates: trapping to the RC and radiative decay, in fs^-1."""

    gamma_rc_fs1: float
    gamma_phot_fs1: float

    def __post_init__(self):
        if self.gamma_rc_fs1 < 0 or self.gamma_phot_fs1 < 0:
            raise ValueError("loss rates must be >= 0")

    @classmethod
    def from_inverse_ps(cls, rc_inv_ps: float = 2.5, phot_inv_ps: float = 250.0) -> "MarkovRates":
        """Build from inverse rates in ps (defaults: 2.5 ps trapping, 250 ps decay)."""
        rc = 0.0 if rc_inv_ps == 0 else 1.0 / (1000.0 * rc_inv_ps)
        phot = 0.0 if phot_inv_ps == 0 else 1.0 / (1000.0 * phot_inv_ps)
        return cls(gamma_rc_fs1=rc, gamma_phot_fs1=phot)

    @classmethod
    def none(cls) -> "MarkovRates":
        """No loss channels (isolated complex)."""
        return cls(0.0, 0.0)


def build_fmo_system(
    delta_e_cm1: float = 0.0,
    e_rc_cm1: float = 0.0,
    reorg_shift_cm1: float = 0.0,
) -> ExcitonSystem:
    """Construct the 9-level FMO system.

    ``delta_e_cm1`` is added to the site energies of BChl3 and BChl4 (the
    trap-coupled sites). ``e_rc_cm1`` sets the RC level; it defaults to 0
    and, since the RC is only reached dissipatively, has no effect on the
    dynamics. ``reorg_shift_cm1`` adds a uniform shift to all seven site
    energies (see module docstring).
    """
    h = np.zeros((9, 9))
    block = FMO_SITE_HAMILTONIAN_CM1.copy()
    block[np.diag_indices(7)] += reorg_shift_cm1
    for s in FMO_TRAP_SITES:
        block[s - 1, s - 1] += delta_e_cm1
    h[1:8, 1:8] = block
    h[8, 8] = e_rc_cm1
    return ExcitonSystem(
        h_cm1=h,
        site_indices=tuple(range(1, 8)),
        ground_index=0,
        rc_index=8,
        trap_sites=FMO_TRAP_SITES,
    )


def spectral_density(omega_cm1, bath: BathParams):
    """Drude-Lorentz spectral density J(omega) in cm^-1.

    Odd in omega; peaks at omega = gamma with value lambda. Accepts scalars
    or arrays.
    """
    omega = np.asarray(omega_cm1, dtype=float)
    g = bath.gamma_cm1
    out = 2.0 * bath.lam_cm1 * omega * g / (omega * omega + g * g)
    return out if out.ndim else float(out)


def gibbs_state(system: ExcitonSystem, temperature_k: float) -> np.ndarray:
    """Thermal state exp(-beta H)/Z over the pigment-site block.

    Computed by eigendecomposition of the site block; returns a real
    symmetric, unit-trace, positive semidefinite site_count x site_count
    matrix in the site basis.
    """
    if temperature_k <= 0:
        raise ValueError("temperature must be > 0")
    h = system.site_block()
    energies, vecs = np.linalg.eigh(h)
    beta = 1.0 / (KB_CM1_PER_K * temperature_k)
    # shift by the ground eigenvalue so the exponentials stay in range
    weights = np.exp(-beta * (energies - energies[0]))
    weights /= weights.sum()
    return (vecs * weights) @ vecs.T
