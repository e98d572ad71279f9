"""Four-level ion model, its three-level reduction, and no-jump conditioning.

The ion has levels (|up>, |down>, |A>, |g>): a Rabi drive J couples the
qubit pair, a second drive J_A couples |down> to the short-lived |A>, and
spontaneous emission empties |A> into |g> at gamma_g (detectable), into a
second detectable sink at gamma_d3, and back into the qubit manifold at
gamma_up/gamma_down (the undetectable backflow).

With gamma_g >> J_A the |A> level can be adiabatically eliminated: the
dynamics reduce to a three-level system whose single dissipator
sqrt(4 gamma) |g><down| (gamma = J_A^2/gamma_g) reproduces, conditioned on
no jump, the two-level non-Hermitian Hamiltonian J sigma_x + i gamma
sigma_z up to a uniform decay e^{-gamma t}.  The factor 4 is fixed by that
equivalence: a dissipator rate R gives the state |down> an amplitude decay
R/2, while the traceless i gamma sigma_z form carries gamma = R/4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import linalg, qubit
from .errors import InvalidArgumentError, PostSelectionUnderflowError

logger = logging.getLogger(__name__)

# Branching fractions out of |A>: detectable decay to |g>, undetectable
# backflow to the qubit manifold, detectable decay to the second sink.
BRANCH_G = 0.935
BRANCH_BACKFLOW = 0.0587
BRANCH_D3 = 0.0063

#: Dissipator rate on |down> that realizes a given gamma of the two-level form.
LINDBLAD_RATE_FACTOR = 4.0

# Basis indices.
UP, DOWN, A, G = 0, 1, 2, 3
G3 = 2  # |g> in the three-level basis (|up>, |down>, |g>)


@dataclass(frozen=True)
class IonParams:
    """Drive and decay rates of the four-level model (all >= 0, units of J)."""

    j: float
    j_a: float
    gamma_g: float
    gamma_up: float = 0.0
    gamma_down: float = 0.0
    gamma_d3: float = 0.0

    def __post_init__(self):
        for name in ("j", "j_a", "gamma_g", "gamma_up", "gamma_down", "gamma_d3"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{name} must be finite and >= 0, got {v}")
        if self.j <= 0:
            raise InvalidArgumentError("J must be > 0")

    @property
    def total_width(self) -> float:
        """Total decay rate out of |A>."""
        return self.gamma_g + self.gamma_up + self.gamma_down + self.gamma_d3

    @property
    def has_backflow(self) -> bool:
        return self.gamma_up > 0 or self.gamma_down > 0

    def effective_nh(self) -> qubit.NHParams:
        """Two-level parameters after adiabatic elimination of |A>."""
        return qubit.NHParams(self.j, self.j_a**2 / self.total_width)

    def without_backflow(self) -> "IonParams":
        return replace(self, gamma_up=0.0, gamma_down=0.0)

    @classmethod
    def with_default_branching(cls, j: float, j_a: float, gamma_g: float) -> "IonParams":
        """Backflow and sink rates from gamma_g via the measured branching ratios."""
        total = gamma_g / BRANCH_G
        half_backflow = 0.5 * BRANCH_BACKFLOW * total
        return cls(
            j=j,
            j_a=j_a,
            gamma_g=gamma_g,
            gamma_up=half_backflow,
            gamma_down=half_backflow,
            gamma_d3=BRANCH_D3 * total,
        )

    @classmethod
    def for_effective_gamma(
        cls, j: float, gamma: float, ratio: float, backflow: bool = False
    ) -> "IonParams":
        """Choose J_A and gamma_g realizing a target two-level gamma.

        `ratio` fixes the separation of scales gamma_g / J_A.  The target is
        gamma = J_A^2 / total_width, so with backflow the drive compensates
        for the extra 6.5% width.
        """
        if ratio <= 0 or gamma < 0:
            raise InvalidArgumentError("need ratio > 0 and gamma >= 0")
        width_scale = BRANCH_G if backflow else 1.0
        j_a = gamma * ratio / width_scale
        gamma_g = ratio * j_a
        if backflow:
            return cls.with_default_branching(j, j_a, gamma_g)
        return cls(j=j, j_a=j_a, gamma_g=gamma_g)


def effective_gamma(j_a: float, gamma_g: float) -> float:
    """gamma = J_A^2 / gamma_g from adiabatic elimination of |A>."""
    if gamma_g <= 0:
        raise InvalidArgumentError(f"gamma_g must be > 0, got {gamma_g}")
    return j_a**2 / gamma_g


def ion_hamiltonian(p: IonParams) -> np.ndarray:
    """H0 = J(|up><down| + h.c.) + J_A(|down><A| + h.c.)."""
    h = np.zeros((4, 4), dtype=complex)
    h[UP, DOWN] = h[DOWN, UP] = p.j
    h[DOWN, A] = h[A, DOWN] = p.j_a
    return h


def ion_jump_ops(p: IonParams) -> list[tuple[str, np.ndarray, bool]]:
    """(name, operator, detectable) for every nonzero decay channel of |A>."""
    ops = []
    for name, rate, target, detectable in (
        ("to_g", p.gamma_g, G, True),
        ("to_D3", p.gamma_d3, G, True),
        ("back_up", p.gamma_up, UP, False),
        ("back_down", p.gamma_down, DOWN, False),
    ):
        if rate > 0:
            op = np.zeros((4, 4), dtype=complex)
            op[target, A] = math.sqrt(rate)
            ops.append((name, op, detectable))
    return ops


def lindbladian(h: np.ndarray, jump_ops) -> np.ndarray:
    """Vectorized generator -i[H, .] + sum_a D[L_a] in column-stacking convention."""
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    eye = np.eye(d)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in jump_ops:
        op = np.asarray(op, dtype=complex)
        ldl = op.conj().T @ op
        sup = sup + np.kron(op.conj(), op)
        sup = sup - 0.5 * (np.kron(eye, ldl) + np.kron(ldl.T, eye))
    return sup


def build_lindbladian_4(p: IonParams) -> np.ndarray:
    """16x16 vectorized Lindbladian of the four-level model."""
    return lindbladian(ion_hamiltonian(p), [op for _, op, _ in ion_jump_ops(p)])


def build_lindbladian_3(j: float, gamma: float) -> np.ndarray:
    """9x9 vectorized Lindbladian of the reduced model on (|up>, |down>, |g>).

    The single dissipator sqrt(4 gamma)|g><down| makes the no-jump qubit
    dynamics equal to those of J sigma_x + i gamma sigma_z.
    """
    if j <= 0 or gamma < 0:
        raise InvalidArgumentError("need J > 0 and gamma >= 0")
    h = np.zeros((3, 3), dtype=complex)
    h[UP, DOWN] = h[DOWN, UP] = j
    op = np.zeros((3, 3), dtype=complex)
    op[G3, DOWN] = math.sqrt(LINDBLAD_RATE_FACTOR * gamma)
    return lindbladian(h, [op])


def evolve_density(sup: np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    """rho(t) = devec(e^{L t} vec(rho0)), with the Hermitian part enforced."""
    sup = np.asarray(sup, dtype=complex)
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if rho0.shape != (d, d) or sup.shape != (d * d, d * d):
        raise InvalidArgumentError(
            f"dimension mismatch: rho {rho0.shape} vs superoperator {sup.shape}"
        )
    rho = linalg.devectorize(linalg.expm(sup, t) @ linalg.vectorize(rho0))
    dev = linalg.frobenius(rho - rho.conj().T)
    if dev > 1e-8 * max(1.0, linalg.frobenius(rho)):
        logger.warning("hermiticity deviation %.3e after evolving to t=%g", dev, t)
    return 0.5 * (rho + rho.conj().T)


def conditional_qubit_populations(rho: np.ndarray) -> tuple[float, float]:
    """(p_up, p_down) conditioned on the qubit manifold (basis order up, down, ...)."""
    pu = rho[UP, UP].real
    pd = rho[DOWN, DOWN].real
    tot = pu + pd
    if tot <= 0:
        raise PostSelectionUnderflowError("no population left in the qubit manifold")
    return pu / tot, pd / tot


def _embed_qubit_state(psi, dim: int) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape == (dim,):
        return psi
    if psi.shape == (2,):
        out = np.zeros(dim, dtype=complex)
        out[:2] = psi
        return out
    raise InvalidArgumentError(f"cannot embed state of shape {psi.shape} in dim {dim}")


def no_jump_conditional(params, psi0, t: float) -> tuple[np.ndarray, float]:
    """Conditional no-jump evolution and its survival probability.

    `params` is either NHParams (two-level: H_eff = H - i gamma, survival
    e^{-2 gamma t} ||G psi||^2) or IonParams (four-level: H_eff = H0 -
    (i/2) sum L^dag L over all channels).  Returns the renormalized state
    and ||psi_tilde||^2.
    """
    if isinstance(params, qubit.NHParams):
        h_eff = qubit.hamiltonian(params) - 1j * params.gamma * qubit.ID2
        dim = 2
    elif isinstance(params, IonParams):
        h_eff = ion_hamiltonian(params).astype(complex)
        for _, op, _ in ion_jump_ops(params):
            h_eff = h_eff - 0.5j * (op.conj().T @ op)
        dim = 4
    else:
        raise InvalidArgumentError(f"unsupported parameter type {type(params)!r}")
    psi0 = _embed_qubit_state(psi0, dim)
    out = linalg.expm(-1j * h_eff, t) @ psi0
    survival = float(np.vdot(out, out).real)
    if survival < 1e-150:
        raise PostSelectionUnderflowError(f"survival probability {survival} underflowed")
    return out / math.sqrt(survival), survival


@dataclass(frozen=True)
class ModelComparison:
    """Post-selected p_down across the three model levels on a common grid."""

    grid: np.ndarray
    p_down_nh: np.ndarray
    p_down_3: np.ndarray
    p_down_4: np.ndarray

    @property
    def max_dev_4_vs_2(self) -> float:
        return float(np.max(np.abs(self.p_down_4 - self.p_down_nh)))

    @property
    def mean_dev_4_vs_2(self) -> float:
        return float(np.mean(np.abs(self.p_down_4 - self.p_down_nh)))

    @property
    def max_dev_3_vs_2(self) -> float:
        return float(np.max(np.abs(self.p_down_3 - self.p_down_nh)))

    @property
    def mean_dev_3_vs_2(self) -> float:
        return float(np.mean(np.abs(self.p_down_3 - self.p_down_nh)))

    @property
    def max_dev_4_vs_3(self) -> float:
        return float(np.max(np.abs(self.p_down_4 - self.p_down_3)))


def compare_models(p: IonParams, psi0, grid) -> ModelComparison:
    """Post-selected qubit p_down from the 4-level, 3-level, and 2-level models.

    Conditioning a density matrix on the qubit manifold equals post-selection
    on no detectable jump here because |g> is absorbing.  Deviations shrink
    as gamma_g / J_A grows (adiabatic elimination).
    """
    if p.gamma_g < 10 * p.j_a:
        raise InvalidArgumentError("compare_models expects gamma_g >= 10 * J_A")
    nh = p.effective_nh()
    grid = np.asarray(grid, dtype=float)

    psi4 = _embed_qubit_state(psi0, 4)
    psi3 = _embed_qubit_state(psi0, 3)
    rho4_0 = np.outer(psi4, psi4.conj())
    rho3_0 = np.outer(psi3, psi3.conj())
    sup4 = build_lindbladian_4(p)
    sup3 = build_lindbladian_3(nh.j, nh.gamma)

    p2 = np.empty(len(grid))
    p3 = np.empty(len(grid))
    p4 = np.empty(len(grid))
    for k, t in enumerate(grid):
        psi_t = qubit.evolve(nh, np.asarray(psi0).reshape(-1)[:2], t)
        p2[k] = abs(psi_t[1]) ** 2
        _, p3[k] = conditional_qubit_populations(evolve_density(sup3, rho3_0, t))
        _, p4[k] = conditional_qubit_populations(evolve_density(sup4, rho4_0, t))
    return ModelComparison(grid=grid, p_down_nh=p2, p_down_3=p3, p_down_4=p4)
