"""Single-qubit states, measurements, and entropy helpers.

All measurement bases live in the X-Z plane of the Bloch sphere and are
addressed by a single angle ``phi`` in radians: the basis vector for
outcome 0 is ``cos(phi/2)|0> + sin(phi/2)|1>``, so ``phi = 0`` is the
computational (Z) basis and ``phi = pi/2`` is the Hadamard (X) basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

Bit = int
BasisAngle = float

_ENTROPY_BISECTION_TOL = 1e-12
_ENTROPY_BISECTION_MAX_ITER = 200


@dataclass(frozen=True)
class PureState:
    """A normalized single-qubit state given by its amplitudes on |0>, |1>."""

    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        norm = abs(self.amp0) ** 2 + abs(self.amp1) ** 2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized: |amp|^2 = {norm}")

    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def density(self) -> np.ndarray:
        v = self.vector()
        return np.outer(v, v.conj())


def basis_vector(angle: BasisAngle, outcome: Bit) -> PureState:
    """Basis state for the X-Z plane basis at `angle` and the given outcome.

    Outcome 0 maps to cos(phi/2)|0> + sin(phi/2)|1>; outcome 1 to the
    orthogonal vector sin(phi/2)|0> - cos(phi/2)|1>.
    """
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    if outcome == 0:
        return PureState(c, s)
    return PureState(s, -c)


def bb84_state(basis: Bit, value: Bit) -> PureState:
    """One of the four BB84 states: basis 0 is Z, basis 1 is X."""
    if basis not in (0, 1):
        raise ValueError("basis must be 0 or 1")
    return basis_vector(basis * math.pi / 2.0, value)


def bb84_state_index(basis: Bit, value: Bit) -> int:
    """Flat index in {0,1,2,3} for the state with the given basis and value."""
    return 2 * basis + value


def outcome_probability(state: PureState, angle: BasisAngle, outcome: Bit) -> float:
    """Born probability of `outcome` when measuring `state` at `angle`."""
    probe = basis_vector(angle, outcome)
    amp = probe.amp0.conjugate() * state.amp0 + probe.amp1.conjugate() * state.amp1
    return float(abs(amp) ** 2)


def measure_in_basis(state: PureState, angle: BasisAngle, rng: np.random.Generator) -> Bit:
    """Sample a measurement outcome of `state` in the basis at `angle`."""
    p0 = outcome_probability(state, angle, 0)
    return 0 if rng.random() < p0 else 1


class SealedQubit:
    """A quantum payload in flight.

    Holds a state description that honest handling code must not inspect;
    the only way to extract information is a single destructive measurement.
    """

    def __init__(self, state: PureState) -> None:
        self.__state = state
        self.__consumed = False

    def measure(self, angle: BasisAngle, rng: np.random.Generator) -> Bit:
        if self.__consumed:
            raise RuntimeError("qubit already measured")
        self.__consumed = True
        return measure_in_basis(self.__state, angle, rng)

    @property
    def consumed(self) -> bool:
        return self.__consumed


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Trace distance (1/2)||rho - sigma||_1 between two density matrices."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrices must share a square shape")
    eigs = np.linalg.eigvalsh(rho - sigma)
    return float(0.5 * np.sum(np.abs(eigs)))


def trace_distance_pure(psi: PureState, phi: PureState) -> float:
    """Trace distance between two pure states, sqrt(1 - |<psi|phi>|^2)."""
    overlap = psi.amp0.conjugate() * phi.amp0 + psi.amp1.conjugate() * phi.amp1
    # guard against |overlap| marginally above 1 from rounding
    val = max(0.0, 1.0 - min(1.0, abs(overlap) ** 2))
    return math.sqrt(val)


def binary_entropy(x):
    """Binary entropy h_b(x) = -x log2 x - (1-x) log2 (1-x), elementwise."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)):
        raise ValueError("binary entropy argument must lie in [0, 1]")
    out = np.zeros_like(arr)
    interior = (arr > 0) & (arr < 1)
    xi = arr[interior]
    out[interior] = -xi * np.log2(xi) - (1 - xi) * np.log2(1 - xi)
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(out)
    return out


def binary_entropy_inv(y: float) -> float:
    """Inverse of h_b on [0, 1/2], by bisection to 1e-12.

    Returns the unique x in [0, 1/2] with h_b(x) = y.
    """
    if not 0.0 <= y <= 1.0:
        raise ValueError("entropy value must lie in [0, 1]")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(_ENTROPY_BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _ENTROPY_BISECTION_TOL:
            break
    return 0.5 * (lo + hi)
