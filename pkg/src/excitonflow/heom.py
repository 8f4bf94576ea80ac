"""Hybrid propagator: hierarchical phonon memory plus Markovian loss channels.

The reduced density matrix sigma^(0) is propagated together with a truncated
set of auxiliary matrices sigma^(n), one per multi-index n = (n_1..n_N). For
each index at position k the generator reads

    d/dt sigma^n = -i [H, sigma^n] + L_markov(sigma^n)
                   - (sum_m n_m gamma) sigma^n
                   + sum_m i [P_m, sigma^(n, m+)]
                   + sum_m n_m theta_m(sigma^(n, m-))

with P_m the projector on site m, raise links beyond the truncation tier
contributing zero, and the Markovian channels (radiative decay to the ground
state, trapping of the trap-coupled sites into the RC) acting on every tier.
The lower coupling encodes the high-temperature bath memory

    theta_m(s) = i * a * [P_m, s] + b * {P_m, s},
    a = 2 * lam * kB*T * ANGFREQ^2    (fs^-2)
    b = lam * ANGFREQ * gamma         (fs^-2)

which corresponds to the single-exponential bath correlation function
(2 lam kB T - i lam gamma) * ANGFREQ^2-scaled * exp(-gamma t). Valid in the
high-temperature regime; no low-temperature correction terms are included,
so thermalization degrades below roughly 100 K.

Time stepping is classical fixed-step RK4. Stability requires
dt * (n_max * gamma + site-block spectral spread in rad/fs) well inside the
RK4 stability region (|z| < 2.8); with the bundled 7-site system, dt = 2.5 fs
is safe up to n_max ~ 16 for gamma^-1 = 166 fs. The fast path propagates the
site block only and integrates the two sink populations alongside, which is
exact because the sinks are decoupled in H and never feed back.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _kernels
from .hierarchy import HierarchyGraph, enumerate_hierarchy
from .model import BathParams, ExcitonSystem, MarkovRates
from .observables import Trajectory, trapping_time
from .units import ANGFREQ_RAD_FS, KB_CM1_PER_K


class PropagationDiverged(RuntimeError):
    """A matrix norm exceeded the blow-up bound during time stepping."""


class ConvergenceFailure(RuntimeError):
    """A stop policy or truncation search did not converge within its cap."""


@dataclass(frozen=True)
class PropagationConfig:
    """Time stepping and stop policy.

    The run ends at ``t_end_fs`` when set, or when the population remaining
    in the site manifold drops to ``residual`` (then ``hard_cap_fs`` bounds
    the run; exceeding it raises :class:`ConvergenceFailure`). Samples are
    recorded every ``record_stride`` steps. ``precision`` selects the state
    dtype ('double' -> complex128, 'single' -> complex64).
    """

    dt_fs: float = 2.5
    n_max: int = 8
    t_end_fs: Optional[float] = None
    residual: Optional[float] = 1e-5
    hard_cap_fs: float = 200_000.0
    record_stride: int = 1
    precision: str = "double"
    record_matrices: bool = False
    blowup_norm: float = 1e6

    def __post_init__(self):
        if self.dt_fs <= 0:
            raise ValueError("dt must be > 0")
        if self.n_max < 0:
            raise ValueError("n_max must be >= 0")
        if self.record_stride < 1:
            raise ValueError("record stride must be >= 1")
        if self.precision not in ("double", "single"):
            raise ValueError("precision must be 'double' or 'single'")
        if self.t_end_fs is None and self.residual is None:
            raise ValueError("need a stop policy: t_end_fs or residual")
        if self.t_end_fs is not None and self.t_end_fs < 0:
            raise ValueError("t_end_fs must be >= 0")

    @property
    def dtype(self):
        return np.complex128 if self.precision == "double" else np.complex64


@dataclass
class HierarchyState:
    """Full hierarchy state: one complex matrix per multi-index position.

    ``sigma[0]`` is the physical reduced density matrix; all auxiliaries
    start at zero.
    """

    sigma: np.ndarray
    time_fs: float = 0.0

    @classmethod
    def initial(cls, graph: HierarchyGraph, system: ExcitonSystem, rho0: np.ndarray,
                dtype=np.complex128) -> "HierarchyState":
        d = system.dimension
        sigma = np.zeros((graph.n_tot, d, d), dtype=dtype)
        sigma[0] = np.asarray(rho0, dtype=dtype)
        return cls(sigma=sigma, time_fs=0.0)

    @property
    def rho(self) -> np.ndarray:
        return self.sigma[0]


def _loss_channels(system: ExcitonSystem, rates: MarkovRates):
    """Collapse channels as (rate_fs1, src_index, dst_index) triples."""
    channels = []
    if rates.gamma_phot_fs1 > 0:
        if system.ground_index is None:
            raise ValueError("radiative decay requires a ground state in the basis")
        for idx in system.site_indices:
            channels.append((rates.gamma_phot_fs1, idx, system.ground_index))
    if rates.gamma_rc_fs1 > 0:
        if system.rc_index is None or not system.trap_sites:
            raise ValueError("trapping requires an RC state and trap sites")
        for label in system.trap_sites:
            channels.append((rates.gamma_rc_fs1, system.site_basis_index(label), system.rc_index))
    return channels


def lindblad_markov(rho: np.ndarray, system: ExcitonSystem, rates: MarkovRates) -> np.ndarray:
    """Markovian loss generator applied to a density matrix.

    Sum of dissipators D(V) r = V r V+ - (V+V r + r V+V)/2 over the
    radiative channels |ground><site m| and the trapping channels
    |RC><site m| for the trap-coupled sites. Traceless, Hermiticity
    preserving.
    """
    out = np.zeros_like(rho, dtype=complex)
    for rate, b, a in _loss_channels(system, rates):
        out[a, a] += rate * rho[b, b]
        out[b, :] -= 0.5 * rate * rho[b, :]
        out[:, b] -= 0.5 * rate * rho[:, b]
    return out


def bath_backaction(system: ExcitonSystem, site_label: int, sigma: np.ndarray,
                    bath: BathParams) -> np.ndarray:
    """Lower-coupling memory operator theta for one site.

    i*a*[P, sigma] + b*{P, sigma} with P the site projector and a, b the
    fluctuation/dissipation coefficients of the exponential bath kernel.
    """
    a, b = bath_coefficients(bath)
    idx = system.site_basis_index(site_label)
    out = np.zeros_like(sigma, dtype=complex)
    out[idx, :] += (b + 1j * a) * sigma[idx, :]
    out[:, idx] += (b - 1j * a) * sigma[:, idx]
    return out


def bath_coefficients(bath: BathParams) -> tuple[float, float]:
    """(a, b) in fs^-2: commutator and anticommutator weights of theta."""
    a = 2.0 * bath.lam_cm1 * KB_CM1_PER_K * bath.temperature_k * ANGFREQ_RAD_FS ** 2
    b = bath.lam_cm1 * ANGFREQ_RAD_FS * bath.gamma_fs1
    return a, b


def heom_rhs(state: HierarchyState, graph: HierarchyGraph, system: ExcitonSystem,
             bath: BathParams, rates: MarkovRates) -> np.ndarray:
    """Time derivative of the full hierarchy state (reference implementation).

    Dense and dimension-generic; the production path used by
    :func:`propagate` runs the equivalent compiled kernel.
    """
    h = system.h_cm1 * ANGFREQ_RAD_FS
    sigma = state.sigma
    out = np.empty_like(sigma, dtype=complex)
    for k in range(graph.n_tot):
        s = sigma[k]
        acc = -1j * (h @ s - s @ h)
        acc += lindblad_markov(s, system, rates)
        acc -= graph.tiers[k] * bath.gamma_fs1 * s
        for m in range(1, system.site_count + 1):
            idx = system.site_basis_index(m)
            p = graph.plus[k, m - 1]
            if p >= 0:
                sp = sigma[p]
                up = np.zeros_like(s, dtype=complex)
                up[idx, :] += 1j * sp[idx, :]
                up[:, idx] -= 1j * sp[:, idx]
                acc += up
            q = graph.minus[k, m - 1]
            if q >= 0:
                n_m = graph.indices[k, m - 1]
                acc += n_m * bath_backaction(system, m, sigma[q], bath)
        out[k] = acc
    return out


def rk4_step(state: HierarchyState, graph: HierarchyGraph, system: ExcitonSystem,
             bath: BathParams, rates: MarkovRates, dt_fs: float,
             blowup_norm: float = 1e6) -> HierarchyState:
    """One classical RK4 step of the reference right-hand side."""
    s = state.sigma
    k1 = heom_rhs(state, graph, system, bath, rates)
    k2 = heom_rhs(HierarchyState(s + 0.5 * dt_fs * k1), graph, system, bath, rates)
    k3 = heom_rhs(HierarchyState(s + 0.5 * dt_fs * k2), graph, system, bath, rates)
    k4 = heom_rhs(HierarchyState(s + dt_fs * k3), graph, system, bath, rates)
    new = s + (dt_fs / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    if np.max(np.abs(new)) > blowup_norm:
        raise PropagationDiverged(f"matrix norm exceeded {blowup_norm:g} at t = {state.time_fs + dt_fs} fs")
    return HierarchyState(sigma=new, time_fs=state.time_fs + dt_fs)


@lru_cache(maxsize=8)
def _graph(n_sites: int, n_max: int) -> HierarchyGraph:
    return enumerate_hierarchy(n_sites, n_max)


class _BlockPropagator:
    """Compiled-kernel propagation over the coherently coupled block.

    Sink states (ground, RC) are decoupled in H and only receive population,
    so the hierarchy is propagated on the remaining block and the sink
    populations are integrated alongside with the same RK4 stage weights.
    """

    def __init__(self, system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
                 graph: HierarchyGraph, dtype):
        self.system = system
        self.graph = graph
        self.dtype = dtype
        rdtype = np.float64 if dtype == np.complex128 else np.float32

        h = system.h_cm1
        sinks = [i for i in (system.ground_index, system.rc_index) if i is not None]
        for s in sinks:
            row = np.delete(h[s, :], s)
            if np.any(row != 0.0):
                raise ValueError("sink states must be decoupled in the Hamiltonian")
        self.sinks = sinks
        self.block = [i for i in range(system.dimension) if i not in sinks]
        pos_of = {full: blk for blk, full in enumerate(self.block)}
        h_block = h[np.ix_(self.block, self.block)].astype(float)
        # uniform diagonal shift is invisible to the commutator dynamics but
        # keeps single-precision phases well conditioned
        h_block -= np.mean(np.diag(h_block)) * np.eye(len(self.block))
        self.h_block = np.ascontiguousarray(h_block * ANGFREQ_RAD_FS, dtype=rdtype)
        self.site_pos = np.array([pos_of[i] for i in system.site_indices], dtype=np.int32)
        site_of = np.full(len(self.block), -1, dtype=np.int32)
        for slot, pos in enumerate(self.site_pos):
            site_of[pos] = slot
        self.site_of = site_of

        channels = _loss_channels(system, rates)
        decay = np.zeros(len(self.block), dtype=rdtype)
        sink_terms = {s: [] for s in sinks}
        for rate, src, dst in channels:
            decay[pos_of[src]] += rate
            sink_terms[dst].append((rate, pos_of[src]))
        self.decay = decay
        self.sink_terms = [sink_terms[s] for s in sinks]

        a, b = bath_coefficients(bath)
        self.a = float(a)
        self.b = float(b)
        self.nvec = np.ascontiguousarray(graph.indices, dtype=rdtype)
        self.tier_damp = np.ascontiguousarray(graph.tiers * bath.gamma_fs1, dtype=rdtype)

    def rhs(self, out: np.ndarray, sig: np.ndarray) -> None:
        _kernels.hierarchy_rhs_kernel(
            out, sig, self.h_block, self.site_of, self.graph.plus, self.graph.minus,
            self.nvec, self.tier_damp, self.a, self.b, self.decay)

    def sink_rates(self, sig0: np.ndarray) -> list[float]:
        return [sum(rate * sig0[p, p].real for rate, p in terms) for terms in self.sink_terms]


def propagate_from(system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
                   config: PropagationConfig, rho0: np.ndarray) -> Trajectory:
    """Propagate an arbitrary (block-supported) initial density matrix.

    ``rho0`` may carry population on the sink diagonals but no coherence
    between sinks and the rest of the basis.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    d = system.dimension
    if rho0.shape != (d, d):
        raise ValueError(f"initial state must be {d}x{d}")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-12):
        raise ValueError("initial state must be Hermitian")

    graph = _graph(system.site_count, config.n_max)
    ops = _BlockPropagator(system, bath, rates, graph, config.dtype)
    for s in ops.sinks:
        off = [(s, j) for j in range(d) if j != s]
        if any(rho0[i, j] != 0 for i, j in off):
            raise ValueError("initial state must not carry sink coherences")

    block = ops.block
    db = len(block)
    n_tot = graph.n_tot
    sig = np.zeros((n_tot, db, db), dtype=config.dtype)
    sig[0] = rho0[np.ix_(block, block)]
    sink_pops = [float(rho0[s, s].real) for s in ops.sinks]

    k1 = np.empty_like(sig)
    k2 = np.empty_like(sig)
    k3 = np.empty_like(sig)
    k4 = np.empty_like(sig)
    tmp = np.empty_like(sig)
    flat = lambda arr: arr.reshape(-1)

    dt = config.dt_fs
    stride = config.record_stride
    blow2 = config.blowup_norm ** 2
    site_blk = ops.site_pos

    times = []
    pops = []
    mats = [] if config.record_matrices else None

    def populations() -> np.ndarray:
        vec = np.zeros(d)
        bd = np.real(np.diagonal(sig[0]))
        for blk, full in enumerate(block):
            vec[full] = bd[blk]
        for s_idx, s in enumerate(ops.sinks):
            vec[s] = sink_pops[s_idx]
        return vec

    def full_rho() -> np.ndarray:
        r = np.zeros((d, d), dtype=complex)
        r[np.ix_(block, block)] = sig[0]
        for s_idx, s in enumerate(ops.sinks):
            r[s, s] = sink_pops[s_idx]
        return r

    def record(t):
        times.append(t)
        pops.append(populations())
        if mats is not None:
            mats.append(full_rho())

    def system_population() -> float:
        return float(np.real(np.diagonal(sig[0]))[site_blk].sum())

    record(0.0)
    step = 0
    stop_reason = None
    while True:
        t = step * dt
        if config.t_end_fs is not None and t >= config.t_end_fs - 1e-9:
            stop_reason = "t_end"
            break
        if config.residual is not None and system_population() <= config.residual:
            stop_reason = "residual"
            break
        if config.t_end_fs is None and t >= config.hard_cap_fs:
            raise ConvergenceFailure(
                f"residual policy not reached within the {config.hard_cap_fs} fs cap")

        ops.rhs(k1, sig)
        r1 = ops.sink_rates(sig[0])
        _kernels.add_scaled(flat(tmp), flat(sig), flat(k1), 0.5 * dt)
        ops.rhs(k2, tmp)
        r2 = ops.sink_rates(tmp[0])
        _kernels.add_scaled(flat(tmp), flat(sig), flat(k2), 0.5 * dt)
        ops.rhs(k3, tmp)
        r3 = ops.sink_rates(tmp[0])
        _kernels.add_scaled(flat(tmp), flat(sig), flat(k3), dt)
        ops.rhs(k4, tmp)
        r4 = ops.sink_rates(tmp[0])
        _kernels.rk4_update(flat(sig), flat(k1), flat(k2), flat(k3), flat(k4), dt / 6.0)
        for i in range(len(sink_pops)):
            sink_pops[i] += (dt / 6.0) * (r1[i] + 2.0 * (r2[i] + r3[i]) + r4[i])
        step += 1

        if _kernels.max_abs2(flat(sig[0])) > blow2 or (
                step % 25 == 0 and _kernels.max_abs2(flat(sig)) > blow2):
            raise PropagationDiverged(
                f"matrix norm exceeded {config.blowup_norm:g} at t = {step * dt} fs")
        if step % stride == 0:
            record(step * dt)

    if step % stride != 0:
        record(step * dt)

    return Trajectory(
        times_fs=np.array(times),
        populations=np.array(pops),
        site_indices=system.site_indices,
        ground_index=system.ground_index,
        rc_index=system.rc_index,
        stop_reason=stop_reason,
        final_rho=full_rho(),
        residual_threshold=config.residual,
        matrices=None if mats is None else np.array(mats),
    )


def propagate(system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
              config: PropagationConfig, initial_site: int = 1) -> Trajectory:
    """Propagate from a single initially excited site.

    The initial condition is the projector on ``initial_site`` with all
    auxiliaries zero (factorized system-bath initial state).
    """
    idx = system.site_basis_index(initial_site)
    rho0 = np.zeros((system.dimension, system.dimension), dtype=complex)
    rho0[idx, idx] = 1.0
    return propagate_from(system, bath, rates, config, rho0)


def auto_truncate(system: ExcitonSystem, bath: BathParams, rates: MarkovRates,
                  config: PropagationConfig, initial_site: int = 1,
                  tol_ps: float = 0.02, start_n: int = 2, n_cap: int = 20
                  ) -> tuple[int, Trajectory]:
    """Raise the truncation tier until the trapping time stops moving.

    Runs consecutive truncations with identical dt and stop policy and
    returns the first (n, trajectory) whose trapping time agrees with the
    n+1 run within ``tol_ps``. Raises :class:`ConvergenceFailure` beyond
    ``n_cap``.
    """
    if tol_ps <= 0:
        raise ValueError("tolerance must be > 0")
    n = 0 if bath.lam_cm1 == 0 else max(0, start_n)
    prev = propagate(system, bath, rates, replace(config, n_max=n), initial_site)
    prev_t = trapping_time(prev)
    while n < n_cap:
        cur = propagate(system, bath, rates, replace(config, n_max=n + 1), initial_site)
        cur_t = trapping_time(cur)
        if abs(cur_t - prev_t) <= tol_ps:
            return n, prev
        n += 1
        prev, prev_t = cur, cur_t
    raise ConvergenceFailure(
        f"trapping time not converged to {tol_ps} ps by n_max = {n_cap}")
