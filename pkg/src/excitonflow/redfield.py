"""Secular Born-Markov reference solver in the exciton eigenbasis.

The phonon coupling is expanded to second order and the rotating-wave
(secular) approximation applied in the eigenbasis of the site block. Site
projectors decompose into transition operators V_m(w) between eigenstate
pairs with energy gap w; each enters a Lindblad dissipator weighted by the
spectral-density rate at that gap. The Lamb-type level renormalization is
omitted. The Markovian loss channels are added exactly as in the hierarchy
solver so that comparisons between the two isolate the phonon treatment.

Transition frequencies within ``freq_tol_cm1`` of each other are grouped
into one frequency class for the secular sum (the 7-site system has no
exact degeneracies, so with the default 0.01 cm^-1 tolerance each class is
a single transition and the class of zero gaps collects the pure-dephasing
projectors).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .heom import ConvergenceFailure, PropagationConfig, PropagationDiverged, _loss_channels
from .model import BathParams, ExcitonSystem, MarkovRates, spectral_density
from .observables import Trajectory
from .units import ANGFREQ_RAD_FS, KB_CM1_PER_K


@dataclass(frozen=True)
class ExcitonEigenbasis:
    """Eigendecomposition of the site block.

    ``coeffs[m, M]`` is the amplitude of site m in eigenstate M; energies
    ascend. ``frequencies()`` returns all pairwise energy gaps E_M - E_N.
    """

    energies_cm1: np.ndarray
    coeffs: np.ndarray

    def frequencies(self) -> np.ndarray:
        e = self.energies_cm1
        return (e[:, None] - e[None, :]).reshape(-1)


def exciton_eigenbasis(system: ExcitonSystem) -> ExcitonEigenbasis:
    energies, vecs = np.linalg.eigh(system.site_block())
    return ExcitonEigenbasis(energies_cm1=energies, coeffs=vecs)


def bose_occupation(omega_cm1: float, temperature_k: float) -> float:
    """Thermal phonon occupation of a mode at omega (cm^-1)."""
    x = omega_cm1 / (KB_CM1_PER_K * temperature_k)
    return 1.0 / np.expm1(x)


def decoherence_rate(omega_cm1: float, bath: BathParams) -> float:
    """Secular phonon rate at a transition frequency, in fs^-1.

    Absorption side (w > 0) carries the occupation n(w), emission side
    (w < 0) carries n + 1, and the zero-frequency rate is the classical
    limit 2 pi kB T dJ/dw|_0. Detailed balance holds by construction.
    """
    w = float(omega_cm1)
    if w == 0.0:
        slope = 2.0 * bath.lam_cm1 / bath.gamma_cm1  # dJ/dw at w = 0
        return 2.0 * np.pi * KB_CM1_PER_K * bath.temperature_k * slope * ANGFREQ_RAD_FS
    if w > 0:
        return 2.0 * np.pi * spectral_density(w, bath) \
            * bose_occupation(w, bath.temperature_k) * ANGFREQ_RAD_FS
    return 2.0 * np.pi * spectral_density(-w, bath) \
        * (bose_occupation(-w, bath.temperature_k) + 1.0) * ANGFREQ_RAD_FS


def _group_frequencies(values: np.ndarray, tol: float) -> list[list[int]]:
    """Cluster sorted positions whose values lie within tol of a neighbor."""
    order = np.argsort(values)
    groups = [[order[0]]]
    for idx in order[1:]:
        if values[idx] - values[groups[-1][-1]] <= tol:
            groups[-1].append(idx)
        else:
            groups.append([idx])
    return groups


def phonon_dissipator_terms(system: ExcitonSystem, bath: BathParams,
                            freq_tol_cm1: float = 0.01) -> list[tuple[float, np.ndarray]]:
    """(rate_fs1, V) pairs of the secular phonon dissipators, in the full basis."""
    basis = exciton_eigenbasis(system)
    n = system.site_count
    d = system.dimension

    # embed eigenvectors into the full basis
    full_vecs = np.zeros((d, n))
    for m, full_idx in enumerate(system.site_indices):
        full_vecs[full_idx, :] = basis.coeffs[m, :]

    pairs = [(M, N) for M in range(n) for N in range(n)]
    gaps = np.array([basis.energies_cm1[M] - basis.energies_cm1[N] for M, N in pairs])
    terms = []
    for group in _group_frequencies(gaps, freq_tol_cm1):
        omega = float(np.mean(gaps[group]))
        rate = decoherence_rate(omega, bath)
        if rate == 0.0:
            continue
        for m in range(n):
            v = np.zeros((d, d))
            for gi in group:
                M, N = pairs[gi]
                v += basis.coeffs[m, M] * basis.coeffs[m, N] \
                    * np.outer(full_vecs[:, M], full_vecs[:, N])
            terms.append((rate, v))
    return terms


def _dissipator_superop(v: np.ndarray, rate: float) -> np.ndarray:
    """rate * D(V) as a superoperator on row-major vectorized matrices."""
    d = v.shape[0]
    eye = np.eye(d)
    vdv = v.conj().T @ v
    return rate * (np.kron(v, v.conj())
                   - 0.5 * np.kron(vdv, eye)
                   - 0.5 * np.kron(eye, vdv.T))


def build_generator(system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
                    freq_tol_cm1: float = 0.01) -> np.ndarray:
    """Full time-local generator (d^2 x d^2) on row-major vectorized states."""
    d = system.dimension
    eye = np.eye(d)
    h = system.h_cm1
    gen = -1j * ANGFREQ_RAD_FS * (np.kron(h, eye) - np.kron(eye, h.T))
    gen = gen.astype(complex)
    if bath.lam_cm1 > 0:
        for rate, v in phonon_dissipator_terms(system, bath, freq_tol_cm1):
            gen += _dissipator_superop(v, rate)
    for rate, src, dst in _loss_channels(system, rates):
        v = np.zeros((d, d))
        v[dst, src] = 1.0
        gen += _dissipator_superop(v, rate)
    return gen


def propagate_redfield(system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
                       config: PropagationConfig, initial_site: int = 1,
                       method: str = "expm", freq_tol_cm1: float = 0.01) -> Trajectory:
    """Propagate under the secular generator with the shared stop policies.

    method='expm' applies the matrix exponential of the constant generator
    per step (preferred); method='rk4' is the classical RK4 fallback and
    agrees with the exponential to integrator accuracy. Always double
    precision.
    """
    d = system.dimension
    idx = system.site_basis_index(initial_site)
    rho = np.zeros((d, d), dtype=complex)
    rho[idx, idx] = 1.0
    return _propagate_generator(system, build_generator(system, bath, rates, freq_tol_cm1),
                                config, rho, method)


def _propagate_generator(system: ExcitonSystem, gen: np.ndarray,
                         config: PropagationConfig, rho0: np.ndarray,
                         method: str = "expm") -> Trajectory:
    d = system.dimension
    dt = config.dt_fs
    vec = np.asarray(rho0, dtype=complex).reshape(-1).copy()
    if method == "expm":
        stepper = scipy.linalg.expm(gen * dt)
        def advance(y):
            return stepper @ y
    elif method == "rk4":
        def advance(y):
            k1 = gen @ y
            k2 = gen @ (y + 0.5 * dt * k1)
            k3 = gen @ (y + 0.5 * dt * k2)
            k4 = gen @ (y + dt * k3)
            return y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    else:
        raise ValueError("method must be 'expm' or 'rk4'")

    site_idx = list(system.site_indices)
    times = [0.0]
    pops = [np.real(vec.reshape(d, d).diagonal()).copy()]
    mats = [vec.reshape(d, d).copy()] if config.record_matrices else None
    step = 0
    stop_reason = None
    while True:
        t = step * dt
        rho = vec.reshape(d, d)
        if config.t_end_fs is not None and t >= config.t_end_fs - 1e-9:
            stop_reason = "t_end"
            break
        if config.residual is not None and \
                float(np.real(rho.diagonal())[site_idx].sum()) <= config.residual:
            stop_reason = "residual"
            break
        if config.t_end_fs is None and t >= config.hard_cap_fs:
            raise ConvergenceFailure(
                f"residual policy not reached within the {config.hard_cap_fs} fs cap")
        vec = advance(vec)
        step += 1
        if np.max(np.abs(vec)) > config.blowup_norm:
            raise PropagationDiverged(f"state norm exceeded bound at t = {step * dt} fs")
        if step % config.record_stride == 0:
            times.append(step * dt)
            pops.append(np.real(vec.reshape(d, d).diagonal()).copy())
            if mats is not None:
                mats.append(vec.reshape(d, d).copy())
    if step % config.record_stride != 0:
        times.append(step * dt)
        pops.append(np.real(vec.reshape(d, d).diagonal()).copy())
        if mats is not None:
            mats.append(vec.reshape(d, d).copy())

    return Trajectory(
        times_fs=np.array(times),
        populations=np.array(pops),
        site_indices=system.site_indices,
        ground_index=system.ground_index,
        rc_index=system.rc_index,
        stop_reason=stop_reason,
        final_rho=vec.reshape(d, d).copy(),
        residual_threshold=config.residual,
        matrices=None if mats is None else np.array(mats),
    )
