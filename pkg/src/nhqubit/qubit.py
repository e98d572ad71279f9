"""PT-symmetric two-level Hamiltonian and its post-selected evolution.

The qubit Hamiltonian is H = J sigma_x + i gamma sigma_z (hbar = 1) with
eigenvalues +-Delta, Delta = sqrt(J^2 - gamma^2).  For gamma < J the
spectrum is real (PT-symmetric phase), for gamma > J purely imaginary
(PT-broken phase); the regimes meet at the exceptional point gamma = J
where the matrix becomes defective.

Post-selection keeps the state normalized, so the evolved state is
G(t) psi / ||G(t) psi|| with the non-unitary propagator

    G(t) = cos(Delta t) 1 - i H sin(Delta t)/Delta,     det G(t) = 1.

The population-transfer difference

    DeltaP(t) = P_gamma - P_J = sin^2(Delta t)

is real in both phases and changes sign at the exceptional point, which
makes its short-time sign a single-shot phase diagnostic; |Delta| follows
from a parabolic fit to DeltaP(t) at short times.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    FitError,
    InvalidArgumentError,
    OverflowGuardError,
    PostSelectionUnderflowError,
)

ID2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Basis order (|up>, |down>).
UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / math.sqrt(2)

#: |Delta| below EP_DELTA_TOL * J classifies as the exceptional point.
EP_DELTA_TOL = 2e-6
#: |Delta * t| below this switches sin(Delta t)/Delta to its Taylor form.
_SINC_SWITCH = 1e-6
#: Hyperbolic arguments beyond this overflow double precision.
_OVERFLOW_ARG = 700.0


class Phase(enum.Enum):
    PT_SYMMETRIC = "symmetric"
    EXCEPTIONAL_POINT = "exceptional-point"
    PT_BROKEN = "broken"


@dataclass(frozen=True)
class NHParams:
    """Coupling rate J > 0 and non-Hermiticity rate gamma >= 0 (units rad/time)."""

    j: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.j) and self.j > 0):
            raise InvalidArgumentError(f"J must be finite and > 0, got {self.j}")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise InvalidArgumentError(f"gamma must be finite and >= 0, got {self.gamma}")

    @property
    def delta_squared(self) -> float:
        """J^2 - gamma^2, computed cancellation-free near the EP."""
        return (self.j - self.gamma) * (self.j + self.gamma)

    @property
    def delta(self) -> complex:
        """Principal branch: real >= 0 for gamma <= J, positive imaginary beyond."""
        d2 = self.delta_squared
        if d2 >= 0:
            return complex(math.sqrt(d2), 0.0)
        return complex(0.0, math.sqrt(-d2))

    def spectral(self) -> "SpectralData":
        d = self.delta
        mag = abs(d)
        if mag < EP_DELTA_TOL * self.j:
            return SpectralData(d, Phase.EXCEPTIONAL_POINT, math.inf)
        phase = Phase.PT_SYMMETRIC if d.real > 0 else Phase.PT_BROKEN
        return SpectralData(d, phase, 2.0 * math.pi / mag)


@dataclass(frozen=True)
class SpectralData:
    delta: complex
    phase: Phase
    period: float


def bloch_state(theta: float, phi: float) -> np.ndarray:
    """(cos(theta/2), e^{i phi} sin(theta/2)); theta=0 is |up>, theta=pi is |down>."""
    return np.array([math.cos(theta / 2), np.exp(1j * phi) * math.sin(theta / 2)])


def hamiltonian(p: NHParams) -> np.ndarray:
    """H = J sigma_x + i gamma sigma_z."""
    return p.j * SIGMA_X + 1j * p.gamma * SIGMA_Z


def trig_factors(p: NHParams, t: float) -> tuple[float, float]:
    """cos(Delta t) and sin(Delta t)/Delta as real numbers, valid in all phases.

    Near the EP the second factor smoothly approaches t.  Raises
    OverflowGuardError when the hyperbolic argument would exceed ~700.
    """
    if not math.isfinite(t):
        raise InvalidArgumentError("non-finite time")
    d2 = p.delta_squared
    x2 = d2 * t * t  # (Delta t)^2, signed
    if abs(x2) < _SINC_SWITCH * _SINC_SWITCH:
        c = 1.0 - x2 / 2.0 + x2 * x2 / 24.0
        s = t * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
        return c, s
    if d2 > 0:
        d = math.sqrt(d2)
        return math.cos(d * t), math.sin(d * t) / d
    w = math.sqrt(-d2)
    if w * abs(t) > _OVERFLOW_ARG:
        raise OverflowGuardError(
            f"|Delta|*t = {w * abs(t):.1f} > {_OVERFLOW_ARG:.0f}: "
            "post-selection probability underflows"
        )
    return math.cosh(w * t), math.sinh(w * t) / w


def propagator(p: NHParams, t: float) -> np.ndarray:
    """Non-unitary propagator G(t); unitary for gamma = 0, det G(t) = 1 always."""
    c, s = trig_factors(p, t)
    return c * ID2 - 1j * s * hamiltonian(p)


def _as_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.shape != (2,):
        raise InvalidArgumentError(f"expected a 2-component state, got shape {psi.shape}")
    n = np.linalg.norm(psi)
    if not 1 - 1e-6 < n < 1 + 1e-6:
        raise InvalidArgumentError(f"state norm {n} is not 1")
    return psi / n


def evolve(p: NHParams, psi0, t: float) -> np.ndarray:
    """Post-selected evolution: G(t) psi0, exactly renormalized.

    Relative accuracy degrades for states exponentially close to the decaying
    eigenstate deep in the broken phase (the growing component is amplified
    by e^{2|Delta|t} before normalization).
    """
    psi0 = _as_state(psi0)
    out = propagator(p, t) @ psi0
    n = np.linalg.norm(out)
    if n < 1e-150:
        raise PostSelectionUnderflowError(f"||G(t) psi|| = {n} underflowed")
    return out / n


def population_transfers(p: NHParams, t: float) -> tuple[float, float, float]:
    """(P_gamma, P_J, DeltaP) at time t.

    P_gamma = |<down|G|up>|^2 = (J sin(Delta t)/Delta)^2 and
    P_J = |<-|G|+>|^2 = (gamma sin(Delta t)/Delta)^2; the difference equals
    sin^2(Delta t), negative in the broken phase.
    """
    _, s = trig_factors(p, t)
    p_gamma = (p.j * s) ** 2
    p_j = (p.gamma * s) ** 2
    return p_gamma, p_j, p_gamma - p_j


def reconstruct_transfers(
    p: NHParams,
    t: float,
    fraction_up: float,
    p_down: float,
    fraction_plus: float,
    p_minus: float,
) -> tuple[float, float]:
    """Population transfers from the four measured quantities.

    P_gamma = e^{2 gamma t} F_up(t) p_down(t) and
    P_J = e^{2 gamma t} F_plus(t) p_minus(t), where F_* are the
    successful-post-selection fractions for the two preparations.
    """
    for name, v in (
        ("fraction_up", fraction_up),
        ("p_down", p_down),
        ("fraction_plus", fraction_plus),
        ("p_minus", p_minus),
    ):
        if not 0.0 <= v <= 1.0:
            raise InvalidArgumentError(f"{name} = {v} outside [0, 1]")
    boost = math.exp(2.0 * p.gamma * t)
    return boost * fraction_up * p_down, boost * fraction_plus * p_minus


@dataclass(frozen=True)
class DeltaFit:
    """|Delta| and the phase sign from a parabolic fit to DeltaP(t)."""

    abs_delta: float
    sign: int


def fit_delta(samples) -> DeltaFit:
    """Least-squares fit of DeltaP(t) ~ sign * Delta^2 t^2.

    The model has no constant or linear term because DeltaP(0) = 0 and
    DeltaP'(0) = 0 analytically.  Needs at least 4 samples taken at short
    times |Delta| t <~ 0.2 for sub-percent accuracy.
    """
    pts = [(float(t), float(y)) for t, y in samples]
    if len(pts) < 4:
        raise FitError(f"need at least 4 samples, got {len(pts)}")
    t = np.array([q[0] for q in pts])
    y = np.array([q[1] for q in pts])
    t4 = float(np.sum(t**4))
    if t4 <= 0.0:
        raise FitError("degenerate design matrix (all sample times are zero)")
    coef = float(np.sum(t * t * y)) / t4
    return DeltaFit(abs_delta=math.sqrt(abs(coef)), sign=1 if coef >= 0 else -1)
