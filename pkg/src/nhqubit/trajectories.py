"""Quantum-jump Monte Carlo unraveling with post-selection bookkeeping.

A trajectory follows the standard first-order scheme: at each step of size
dt the jump probability of channel a is dt * <psi|L_a^dag L_a|psi>; one
uniform decides jump-versus-drift and picks the channel; a jump collapses
the state onto L_a|psi> (renormalized), otherwise the state advances with
1 - i dt H_eff, H_eff = H0 - (i/2) sum L_a^dag L_a, and is renormalized.
A shot is post-selected iff no detectable jump occurred; undetectable
backflow jumps may occur in post-selected shots.

Jump operators are restricted to the transition form sqrt(rate)|t><s|,
which covers every channel of the ion model and its reductions.

Reproducibility: shot i of an ensemble draws from a PCG64 stream seeded by
SeedSequence(master_seed, spawn_key=(..., i)), a counter-based split, so
results are independent of chunking and worker count.  The stepping kernel
is a compiled extension when available (see `backend_name`); the
pure-python fallback is bit-identical.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import lindblad, qubit
from .errors import EmptyEnsembleError, InvalidArgumentError

if os.environ.get("NHQUBIT_BACKEND", "").lower() == "python":
    from . import _jumppy as _kernel

    _BACKEND = "python"
else:
    try:
        from . import _jumpcore as _kernel

        _BACKEND = "cython"
    except ImportError:
        from . import _jumppy as _kernel

        _BACKEND = "python"


def backend_name() -> str:
    """Which stepping kernel is active: "cython" or "python"."""
    return _BACKEND


#: Uniforms are drawn in blocks of this many steps (early-exiting shots
#: then skip most of the generation cost).  Fixed, so results never depend
#: on it... changing it would change how many uniforms a shot consumes.
_BLOCK = 256
_JUMP_CAP = 4096
_CHUNK = 512  # shots per worker task


@dataclass(frozen=True)
class JumpChannel:
    """Transition-type jump operator sqrt(rate) |target><source|."""

    name: str
    source: int
    target: int
    rate: float
    detectable: bool


@dataclass(frozen=True, eq=False)
class JumpModel:
    """Hamiltonian plus jump channels defining one unraveling."""

    h0: np.ndarray
    channels: tuple[JumpChannel, ...]
    labels: tuple[str, ...]
    up: int = 0
    down: int = 1

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def max_rate(self) -> float:
        rates = [float(np.max(np.abs(self.h0)))] + [c.rate for c in self.channels]
        return max(rates)

    def dt_bound(self) -> float:
        """Largest step honouring the first-order accuracy contract."""
        return 0.01 / self.max_rate()

    def h_eff(self) -> np.ndarray:
        h = self.h0.astype(complex).copy()
        for c in self.channels:
            h[c.source, c.source] -= 0.5j * c.rate
        return h

    def jump_operator(self, c: JumpChannel) -> np.ndarray:
        op = np.zeros((self.dim, self.dim), dtype=complex)
        op[c.target, c.source] = math.sqrt(c.rate)
        return op

    def lindbladian(self) -> np.ndarray:
        """Vectorized generator of the unconditioned (ensemble) evolution."""
        return lindblad.lindbladian(
            self.h0, [self.jump_operator(c) for c in self.channels]
        )

    @classmethod
    def effective(cls, p: qubit.NHParams) -> "JumpModel":
        """Three-level realization (|up>, |down>, |g>) of the two-level dynamics.

        A single detectable channel of rate 4*gamma reproduces
        H = J sigma_x + i gamma sigma_z on post-selection.
        """
        h = np.zeros((3, 3), dtype=complex)
        h[0, 1] = h[1, 0] = p.j
        channels = ()
        if p.gamma > 0:
            channels = (
                JumpChannel(
                    "to_g", 1, 2, lindblad.LINDBLAD_RATE_FACTOR * p.gamma, True
                ),
            )
        return cls(h0=h, channels=channels, labels=("up", "down", "g"))

    @classmethod
    def from_ion(cls, p: lindblad.IonParams) -> "JumpModel":
        """Full four-level model (|up>, |down>, |A>, |g>)."""
        channels = []
        for name, rate, target, detectable in (
            ("to_g", p.gamma_g, lindblad.G, True),
            ("to_D3", p.gamma_d3, lindblad.G, True),
            ("back_up", p.gamma_up, lindblad.UP, False),
            ("back_down", p.gamma_down, lindblad.DOWN, False),
        ):
            if rate > 0:
                channels.append(JumpChannel(name, lindblad.A, target, rate, detectable))
        return cls(
            h0=lindblad.ion_hamiltonian(p),
            channels=tuple(channels),
            labels=("up", "down", "A", "g"),
        )

    @classmethod
    def reduced_from_ion(cls, p: lindblad.IonParams) -> "JumpModel":
        """Adiabatically eliminated three-level model keeping the backflow.

        The total rate out of |down> is 4 * J_A^2 / total_width, split over
        the channels by the branching fractions, so the no-jump dynamics
        match `effective(p.effective_nh())` exactly and the undetectable
        backflow recycles population inside the qubit manifold.
        """
        total = p.total_width
        if total <= 0:
            return cls.effective(qubit.NHParams(p.j, 0.0))
        out_rate = lindblad.LINDBLAD_RATE_FACTOR * p.j_a**2 / total
        h = np.zeros((3, 3), dtype=complex)
        h[0, 1] = h[1, 0] = p.j
        channels = []
        for name, width, target, detectable in (
            ("to_g", p.gamma_g, 2, True),
            ("to_D3", p.gamma_d3, 2, True),
            ("back_up", p.gamma_up, 0, False),
            ("back_down", p.gamma_down, 1, False),
        ):
            if width > 0:
                channels.append(
                    JumpChannel(name, 1, target, out_rate * width / total, detectable)
                )
        return cls(h0=h, channels=tuple(channels), labels=("up", "down", "g"))


@dataclass(frozen=True)
class TrajectoryRecord:
    """Outcome of a single unraveled shot."""

    seed: int
    jumps: tuple[tuple[float, str], ...]
    post_selected: bool
    final_state: np.ndarray


@dataclass(frozen=True)
class EnsembleEstimate:
    """Post-selected measurement statistics of one ensemble."""

    n_shots: int
    n_selected: int
    basis: str
    fraction_selected: float
    fraction_err: float
    p_down: float | None = None
    p_down_err: float | None = None
    p_minus: float | None = None
    p_minus_err: float | None = None


class _Prep:
    """Arrays precomputed once per (model, segment duration, dt)."""

    __slots__ = (
        "dim",
        "n_steps",
        "dt",
        "are",
        "aim",
        "src",
        "tgt",
        "pcoef",
        "det",
        "absorbing",
    )

    def __init__(self, model: JumpModel, duration: float, dt_req: float):
        self.dim = model.dim
        if duration < 0:
            raise InvalidArgumentError("segment duration must be >= 0")
        if duration == 0:
            self.n_steps = 0
            self.dt = dt_req
        else:
            self.n_steps = max(1, math.ceil(duration / dt_req - 1e-12))
            self.dt = duration / self.n_steps
        a = np.eye(self.dim, dtype=complex) - 1j * self.dt * model.h_eff()
        self.are = np.ascontiguousarray(a.real.ravel())
        self.aim = np.ascontiguousarray(a.imag.ravel())
        self.src = np.array([c.source for c in model.channels], dtype=np.int64)
        self.tgt = np.array([c.target for c in model.channels], dtype=np.int64)
        self.pcoef = np.array([self.dt * c.rate for c in model.channels])
        self.det = np.array([c.detectable for c in model.channels], dtype=np.uint8)
        sources = {c.source for c in model.channels}
        absorbing = []
        for lvl in range(self.dim):
            coupled = np.any(np.abs(model.h0[:, lvl]) > 0)
            absorbing.append(not coupled and lvl not in sources)
        self.absorbing = np.array(absorbing, dtype=np.uint8)


def _resolve_dt(model: JumpModel, dt: float | None) -> float:
    bound = model.dt_bound()
    if dt is None:
        return bound
    if dt <= 0 or dt > bound * (1 + 1e-12):
        raise InvalidArgumentError(
            f"dt = {dt} violates the accuracy contract dt <= {bound:.3g}"
        )
    return dt


class _ShotBuffers:
    """Reusable per-worker scratch space."""

    def __init__(self, dim: int):
        self.sre = np.empty(dim)
        self.sim = np.empty(dim)
        self.stat = np.zeros(3, dtype=np.int64)
        self.jtimes = np.empty(_JUMP_CAP)
        self.jchans = np.empty(_JUMP_CAP, dtype=np.int64)
        self.ublock = np.empty(_BLOCK)


def _run_segment(prep: _Prep, buf: _ShotBuffers, t0: float, rng) -> None:
    """Advance buf's state through one segment; stat reflects jumps so far."""
    done = 0
    while done < prep.n_steps and not buf.stat[2]:
        n = min(_BLOCK, prep.n_steps - done)
        u = buf.ublock[:n]
        rng.random(out=u)
        used = _kernel.run_steps(
            prep.are,
            prep.aim,
            prep.dim,
            prep.src,
            prep.tgt,
            prep.pcoef,
            prep.det,
            prep.absorbing,
            buf.sre,
            buf.sim,
            t0,
            prep.dt,
            done,
            n,
            u,
            buf.jtimes,
            buf.jchans,
            buf.stat,
        )
        if used < 0:
            raise RuntimeError("jump log overflow (more than %d jumps)" % _JUMP_CAP)
        done += used


def _init_shot(buf: _ShotBuffers, psi0: np.ndarray) -> None:
    buf.sre[:] = psi0.real
    buf.sim[:] = psi0.imag
    buf.stat[:] = (0, 1, 0)


def _shot_rng(master_seed: int, *key: int):
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss))


def _measure_down(buf: _ShotBuffers, up: int, down: int, rng) -> bool | None:
    """Project onto the qubit manifold, then Born-draw the z outcome."""
    qu = buf.sre[up] * buf.sre[up] + buf.sim[up] * buf.sim[up]
    qd = buf.sre[down] * buf.sre[down] + buf.sim[down] * buf.sim[down]
    tot = qu + qd
    if tot <= 0.0:
        return None
    return bool(rng.random() < qd / tot)


def _measure_minus(buf: _ShotBuffers, up: int, down: int, rng) -> bool | None:
    """pi/2 rotation mapping |-> onto |up>, then a z readout."""
    ur = buf.sre[up] - buf.sre[down]
    ui = buf.sim[up] - buf.sim[down]
    dr = buf.sre[up] + buf.sre[down]
    di = buf.sim[up] + buf.sim[down]
    num = ur * ur + ui * ui
    tot = num + dr * dr + di * di
    if tot <= 0.0:
        return None
    return bool(rng.random() < num / tot)


def run_trajectory(
    model: JumpModel, psi0, t_final: float, dt: float | None = None, seed: int = 0
) -> TrajectoryRecord:
    """Simulate one shot; deterministic given (seed, dt)."""
    dt = _resolve_dt(model, dt)
    prep = _Prep(model, t_final, dt)
    psi = lindblad._embed_qubit_state(psi0, model.dim)
    buf = _ShotBuffers(model.dim)
    _init_shot(buf, psi)
    rng = _shot_rng(seed)
    _run_segment(prep, buf, 0.0, rng)
    names = [c.name for c in model.channels]
    jumps = tuple(
        (float(buf.jtimes[k]), names[int(buf.jchans[k])]) for k in range(buf.stat[0])
    )
    return TrajectoryRecord(
        seed=seed,
        jumps=jumps,
        post_selected=bool(buf.stat[1]),
        final_state=buf.sre + 1j * buf.sim,
    )


def _pool_map(fn, n_items: int, workers: int | None):
    """Map fn over range(n_items), returning results in index order."""
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or n_items <= 1:
        return [fn(i) for i in range(n_items)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_items)))


def estimate(
    model: JumpModel,
    psi0,
    basis: str,
    t: float,
    n_shots: int,
    seed: int,
    dt: float | None = None,
    workers: int | None = None,
    seed_prefix: tuple[int, ...] = (),
) -> EnsembleEstimate:
    """Monte Carlo estimate of post-selected populations at time t.

    Shot i draws from spawn_key (*seed_prefix, i); results are bit-exact
    for fixed (seed, n_shots, dt) at any worker count.
    """
    if n_shots < 1:
        raise InvalidArgumentError("n_shots must be >= 1")
    if basis not in ("z", "x"):
        raise InvalidArgumentError(f"basis must be 'z' or 'x', got {basis!r}")
    dt = _resolve_dt(model, dt)
    prep = _Prep(model, t, dt)
    psi = lindblad._embed_qubit_state(psi0, model.dim)

    n_chunks = math.ceil(n_shots / _CHUNK)

    def chunk(ci: int) -> tuple[int, int]:
        buf = _ShotBuffers(model.dim)
        n_sel = 0
        n_hit = 0
        for i in range(ci * _CHUNK, min((ci + 1) * _CHUNK, n_shots)):
            rng = _shot_rng(seed, *seed_prefix, i)
            _init_shot(buf, psi)
            _run_segment(prep, buf, 0.0, rng)
            if not buf.stat[1]:
                continue
            if basis == "z":
                hit = _measure_down(buf, model.up, model.down, rng)
            else:
                hit = _measure_minus(buf, model.up, model.down, rng)
            if hit is None:
                continue
            n_sel += 1
            n_hit += int(hit)
        return n_sel, n_hit

    parts = _pool_map(chunk, n_chunks, workers)
    n_sel = sum(p[0] for p in parts)
    n_hit = sum(p[1] for p in parts)

    frac = n_sel / n_shots
    frac_err = math.sqrt(frac * (1 - frac) / n_shots)
    if n_sel == 0:
        raise EmptyEnsembleError(
            f"0 of {n_shots} shots passed post-selection", fraction_selected=0.0
        )
    p_hat = n_hit / n_sel
    err = math.sqrt(p_hat * (1 - p_hat) / n_sel)
    if basis == "z":
        return EnsembleEstimate(
            n_shots, n_sel, basis, frac, frac_err, p_down=p_hat, p_down_err=err
        )
    return EnsembleEstimate(
        n_shots, n_sel, basis, frac, frac_err, p_minus=p_hat, p_minus_err=err
    )


@dataclass(frozen=True)
class BackflowReport:
    """Paired-seed difference of post-selected p_down with/without backflow."""

    grid: np.ndarray
    p_down_backflow: np.ndarray
    p_down_clean: np.ndarray
    deviation: np.ndarray = field(init=False, default=None)
    sigma: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(
            self, "deviation", np.abs(self.p_down_backflow - self.p_down_clean)
        )


def backflow_deviation(
    p: lindblad.IonParams,
    grid,
    n_shots: int,
    seed: int,
    dt: float | None = None,
    workers: int | None = None,
) -> BackflowReport:
    """Difference between post-selected p_down with and without backflow.

    Both arms use the reduced (adiabatically eliminated) model with the
    same total decay rate, so paired seeds give identical trajectories up
    to the first jump that lands in a backflow channel.
    """
    if not p.has_backflow:
        raise InvalidArgumentError("ion parameters carry no backflow channels")
    model_bf = JumpModel.reduced_from_ion(p)
    model_clean = JumpModel.effective(p.effective_nh())
    grid = np.asarray(grid, dtype=float)
    pd_bf = np.empty(len(grid))
    pd_cl = np.empty(len(grid))
    sig = np.empty(len(grid))
    for k, t in enumerate(grid):
        e_bf = estimate(
            model_bf, qubit.DOWN, "z", t, n_shots, seed, dt, workers, seed_prefix=(k,)
        )
        e_cl = estimate(
            model_clean, qubit.DOWN, "z", t, n_shots, seed, dt, workers, seed_prefix=(k,)
        )
        pd_bf[k] = e_bf.p_down
        pd_cl[k] = e_cl.p_down
        sig[k] = math.hypot(e_bf.p_down_err, e_cl.p_down_err)
    return BackflowReport(
        grid=grid, p_down_backflow=pd_bf, p_down_clean=pd_cl, sigma=sig
    )
