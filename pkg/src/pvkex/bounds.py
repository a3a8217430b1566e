"""Closed-form security quantities for the composed protocols.

Everything here is arithmetic on configured parameters: composition
bounds for the two exchanges and the authenticated-message transfer, net
sizes for strategy discretization, the classical-rounding size, the
guaranteed failure fraction of any memory-bounded rounding, the
partition error bound with an independent enumeration oracle, and a
threshold optimizer that consumes externally supplied trace-distance
tables.

Probability-valued bounds come back as a `BoundResult` carrying both the
clamped value and the raw formula value, since the formulas can exceed
one and callers sizing parameters need the raw number.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (CoverageError, InfeasibleParametersError,
                     ValidationError)
from .msgauth import robustness_bound_msg_auth, soundness_bound_msg_auth
from .quantum import binary_entropy_inv

# slack for ceilings of logs whose argument sits on a power of two up to
# float rounding (12/delta ratios routinely do)
CEIL_LOG2_SLACK = 1e-9


@dataclass(frozen=True)
class BoundResult:
    value: float
    raw: float

    def __float__(self) -> float:
        return self.value


def _clamped(raw: float) -> BoundResult:
    return BoundResult(value=min(1.0, max(0.0, raw)), raw=raw)


def _check_prob(value: float, name: str) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1]")


def _ceil_log2(value: float) -> int:
    if value <= 0.0:
        raise ValidationError("log argument must be positive")
    return int(math.ceil(math.log2(value) - CEIL_LOG2_SLACK))


def _half_key_runs(l_k: int) -> int:
    return (l_k + 1) // 2


@dataclass(frozen=True)
class SecurityParams:
    epsQkd: float = 0.0
    epsQpv: float = 0.0
    epsRobQkd: float = 0.0
    epsRobQpv: float = 0.0
    deltaHash: float = 0.0
    lT: int = 16
    lK: int = 2
    lC: int = 0

    def validate(self) -> None:
        for name in ("epsQkd", "epsQpv", "epsRobQkd", "epsRobQpv",
                     "deltaHash"):
            _check_prob(getattr(self, name), name)
        if self.lT < 1 or self.lK < 1 or self.lC < 0:
            raise ValidationError("lT and lK must be >= 1, lC >= 0")


def one_way_auth_security(eps_qkd: float, l_t: int, eps_qpv: float,
                          variant: str = "reciprocal") -> BoundResult:
    """Security of the one-way authenticated exchange.

    The hash term comes in two published forms: `reciprocal` charges
    1/l_t for a tag of length l_t, `exponential` charges 2^-l_t.  Both
    are exposed; neither is reinterpreted.
    """
    _check_prob(eps_qkd, "eps_qkd")
    _check_prob(eps_qpv, "eps_qpv")
    if l_t < 1:
        raise ValidationError("l_t must be at least 1")
    if variant == "reciprocal":
        hash_term = 1.0 / l_t
    elif variant == "exponential":
        hash_term = 2.0 ** (-l_t)
    else:
        raise ValidationError("variant must be 'reciprocal' or 'exponential'")
    return _clamped(eps_qkd + hash_term + eps_qpv)


def msg_auth_security(l_k: int, eps_qpv: float, delta: float) -> BoundResult:
    """Delegates to the authenticated-message module's bound."""
    value = soundness_bound_msg_auth(l_k, eps_qpv, delta)
    raw = delta + 2 * _half_key_runs(l_k) * eps_qpv
    return BoundResult(value=value, raw=raw)


def msg_auth_robustness(l_k: int, eps_rob: float) -> BoundResult:
    value = robustness_bound_msg_auth(l_k, eps_rob)
    raw = (_half_key_runs(l_k) + 2) * eps_rob
    return BoundResult(value=value, raw=raw)


def credential_security(params: SecurityParams) -> BoundResult:
    """Security of the credential exchange: twice the key-agreement and
    hash-family terms plus one per-run term for every transfer run and
    both closing directions."""
    params.validate()
    raw = (2.0 * params.epsQkd + 2.0 * params.deltaHash
           + (4 * _half_key_runs(params.lK) + 2) * params.epsQpv)
    return _clamped(raw)


def credential_robustness(params: SecurityParams) -> BoundResult:
    params.validate()
    raw = (params.epsRobQkd
           + (_half_key_runs(params.lK) + 3) * params.epsRobQpv)
    return _clamped(raw)


@dataclass(frozen=True)
class NetSizes:
    """Base-2 log sizes of the covering nets: shared strategy states and
    the two flanking parties' operation nets."""

    log2StateNet: float
    log2OpNetA: float
    log2OpNetB: float


def net_sizes(q: int, delta: float) -> NetSizes:
    if q < 0:
        raise ValidationError("q must be nonnegative")
    if delta <= 0.0:
        raise ValidationError("delta must be positive")
    factor = math.log2(1.0 + 2.0 / delta)
    return NetSizes(log2StateNet=2.0 ** (4 * q + 1) * factor,
                    log2OpNetA=2.0 ** (6 * q + 7) * factor,
                    log2OpNetB=2.0 ** (6 * q + 4) * factor)


def classical_rounding_size(q: int, delta_tilde: float) -> int:
    """Number of input pairs a bounded-memory strategy can serve per
    rounding, as an exact integer."""
    if q < 0:
        raise ValidationError("q must be nonnegative")
    if not 0.0 < delta_tilde <= 1.0:
        raise ValidationError("delta_tilde must be in (0, 1]")
    return (1 << (6 * q + 7)) * (_ceil_log2(1.0 + 12.0 / delta_tilde) + 1)


def alpha_fraction(alpha: float, n_bits: int,
                   convention: str = "squared") -> float:
    """Normalize a tail exponent to a fraction of the input space.

    `squared` divides by 4^n (the form the failure-fraction formula
    takes); `linear` divides by 2^n (the form the published operating
    points quote).  Both are accepted, neither is reinterpreted.
    """
    if alpha < 0 or n_bits < 1:
        raise ValidationError("alpha must be >= 0 and n_bits >= 1")
    if convention == "squared":
        return alpha / 4.0 ** n_bits
    if convention == "linear":
        return alpha / 2.0 ** n_bits
    raise ValidationError("convention must be 'squared' or 'linear'")


def rounding_failure_fraction(q0: float, delta_tilde: float,
                              alpha_frac: float) -> float:
    """Fraction of input pairs on which any memory-bounded strategy must
    miss the rounding, via the inverse binary entropy.

    Raises InfeasibleParametersError when the memory budget is too large
    for the requested separation (entropy argument below zero).
    """
    if not 0.0 < delta_tilde <= 1.0:
        raise ValidationError("delta_tilde must be in (0, 1]")
    if alpha_frac < 0.0:
        raise ValidationError("alpha_frac must be nonnegative")
    budget = 2.0 ** (9.0 - 6.0 * q0) * (_ceil_log2(1.0 + 12.0 / delta_tilde)
                                        + 1)
    argument = 1.0 - budget - alpha_frac
    if argument < 0.0:
        raise InfeasibleParametersError(
            f"entropy argument {argument:.6g} < 0; raise q0 or delta_tilde")
    return binary_entropy_inv(argument)


def partition_error_lower_bound(eta_r: float, eta_thres: float,
                                eps_thres: float, eta: float,
                                nu: float) -> float:
    """Closed form of the partition program: error mass any sub-strategy
    with transmission eta_r must produce, floored at zero."""
    for name, v in (("eta_r", eta_r), ("eps_thres", eps_thres),
                    ("eta", eta), ("nu", nu)):
        _check_prob(v, name)
    if not 0.0 <= eta_thres < 1.0:
        raise ValidationError("eta_thres must be in [0, 1)")
    ratio = (eta_r - eta_thres) / (1.0 - eta_thres)
    return max(eps_thres * eta * (ratio - 1.0 + nu), 0.0)


def partition_error_oracle(eta_r: float, eta_thres: float, eps_thres: float,
                           eta: float, nu: float,
                           grid_step: float = 1e-3) -> float:
    """Independent check of the closed form by feasible-set enumeration.

    Minimizes the penalized mass over the constraint simplex: four
    nonnegative fractions summing to one, the pass-and-respond fraction
    capped at 1-nu, and pass fractions jointly covering the transmission
    ratio.  The fourth fraction only ever adds penalty with its mass
    absorbable by the unconstrained slot, so it is pinned at zero; for
    each gridded first fraction the third is taken at its exact
    feasibility boundary, with the cap value snapped into the grid.
    """
    for name, v in (("eta_r", eta_r), ("eps_thres", eps_thres),
                    ("eta", eta), ("nu", nu)):
        _check_prob(v, name)
    if not 0.0 <= eta_thres < 1.0:
        raise ValidationError("eta_thres must be in [0, 1)")
    if grid_step <= 0.0:
        raise ValidationError("grid_step must be positive")
    ratio = (eta_r - eta_thres) / (1.0 - eta_thres)
    assert ratio <= 1.0 + 1e-12, "constraint set empty for valid inputs"
    cap = 1.0 - nu
    candidates = np.append(np.arange(0.0, cap + grid_step / 2, grid_step),
                           cap)
    best = math.inf
    for l1 in candidates:
        if l1 > cap + 1e-15:
            continue
        l3 = max(0.0, ratio - l1)
        if l1 + l3 > 1.0 + 1e-12:
            continue
        best = min(best, l3 * eps_thres * eta)
    assert best < math.inf
    return best


@dataclass(frozen=True)
class PartitionParams:
    eta: float
    etaThres: float
    epsThres: float
    nu: float
    q: int = 0
    q0: float = 0.0
    alphaFrac: float = 0.0
    deltaTilde: float = 1.0

    def validate(self) -> None:
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError("eta must be in (0, 1]")
        if not 0.0 <= self.etaThres <= self.eta or self.etaThres >= 1.0:
            raise ValidationError("etaThres must be in [0, eta] and < 1")
        _check_prob(self.epsThres, "epsThres")
        if not 0.0 <= self.nu <= 0.5:
            raise ValidationError("nu must be in [0, 0.5]")
        if self.q < 0:
            raise ValidationError("q must be nonnegative")
        if not 0.0 < self.deltaTilde <= 1.0:
            raise ValidationError("deltaTilde must be in (0, 1]")
        if self.alphaFrac < 0.0:
            raise ValidationError("alphaFrac must be nonnegative")


def conditioned_error_value(eta: float, eta_thres: float, eps_thres: float,
                            nu: float, alpha: float | None = None) -> float:
    """Numeric core of the detection-conditioned error bound; permits
    the full nu range so degenerate corners can be evaluated."""
    _check_prob(eta, "eta")
    _check_prob(eps_thres, "eps_thres")
    _check_prob(nu, "nu")
    if not 0.0 <= eta_thres < 1.0:
        raise ValidationError("eta_thres must be in [0, 1)")
    factor = 1.0 if alpha is None else 1.0 - 2.0 ** (-alpha)
    ratio = (eta - eta_thres) / (1.0 - eta_thres)
    return max(factor * (ratio - 1.0 + nu) * eps_thres, 0.0)


def conditioned_error_lower_bound(params: PartitionParams, *,
                                  alpha: float | None = None,
                                  n_bits: int | None = None) -> float:
    """Error rate conditioned on detection that the partition guarantees.

    The tail exponent comes either directly via `alpha` or from the
    configured fraction and an input width `n_bits`; with neither the
    guarantee factor is taken as one.
    """
    params.validate()
    if alpha is None and n_bits is not None:
        alpha = params.alphaFrac * 4.0 ** n_bits
    return conditioned_error_value(params.eta, params.etaThres,
                                   params.epsThres, params.nu, alpha)


class DeltaTildeTable:
    """Rectangular grid of separation lower bounds, indexed by the error
    budget and transmission-threshold pair.

    Ingest enforces value range, grid completeness, and that separation
    never improves as the error budget grows.  Off-grid queries take the
    minimum of the enclosing corner values by default, so a reported
    bound never exceeds what the table supports; bilinear interpolation
    is available where conservatism is not needed.
    """

    def __init__(self, eps_values, eta_values, values, meta: dict | None = None):
        self.epsValues = np.asarray(eps_values, dtype=float)
        self.etaValues = np.asarray(eta_values, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.meta = dict(meta or {})
        self.validate()

    def validate(self) -> None:
        if self.epsValues.ndim != 1 or self.etaValues.ndim != 1:
            raise ValidationError("axis arrays must be one-dimensional")
        if self.values.shape != (len(self.epsValues), len(self.etaValues)):
            raise ValidationError("value grid shape mismatch")
        if len(self.epsValues) == 0:
            raise ValidationError("table must not be empty")
        if (np.any(np.diff(self.epsValues) <= 0)
                or np.any(np.diff(self.etaValues) <= 0)):
            raise ValidationError("axis values must be strictly increasing")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValidationError("separation values must lie in [0, 1]")
        if np.any(np.diff(self.values, axis=0) > 1e-12):
            raise ValidationError(
                "separation must be nonincreasing in the error budget")

    @classmethod
    def from_entries(cls, entries, meta: dict | None = None) -> "DeltaTildeTable":
        eps_values = sorted({float(e["eps_tilde"]) for e in entries})
        eta_values = sorted({float(e["eta_tilde"]) for e in entries})
        grid = np.full((len(eps_values), len(eta_values)), np.nan)
        ei = {v: i for i, v in enumerate(eps_values)}
        hj = {v: j for j, v in enumerate(eta_values)}
        for e in entries:
            i, j = ei[float(e["eps_tilde"])], hj[float(e["eta_tilde"])]
            if not np.isnan(grid[i, j]):
                raise ValidationError("duplicate grid entry")
            grid[i, j] = float(e["delta_tilde"])
        if np.any(np.isnan(grid)):
            raise ValidationError("grid must cover the full rectangle")
        return cls(eps_values, eta_values, grid, meta)

    @classmethod
    def from_json(cls, source) -> "DeltaTildeTable":
        if isinstance(source, dict):
            doc = source
        else:
            with open(source, encoding="utf-8") as fh:
                doc = json.load(fh)
        if "grid" not in doc:
            raise ValidationError("table document needs a 'grid' list")
        return cls.from_entries(doc["grid"], doc.get("meta", {}))

    def to_json(self) -> dict:
        grid = [{"eps_tilde": float(self.epsValues[i]),
                 "eta_tilde": float(self.etaValues[j]),
                 "delta_tilde": float(self.values[i, j])}
                for i in range(len(self.epsValues))
                for j in range(len(self.etaValues))]
        return {"meta": dict(self.meta), "grid": grid}

    def _bracket(self, axis: np.ndarray, x: float, label: str):
        if x < axis[0] - 1e-12 or x > axis[-1] + 1e-12:
            raise CoverageError(
                f"{label}={x:.6g} outside table range "
                f"[{axis[0]:.6g}, {axis[-1]:.6g}]")
        x = min(max(x, axis[0]), axis[-1])
        hi = int(np.searchsorted(axis, x, side="left"))
        if hi < len(axis) and axis[hi] == x:
            return hi, hi, 0.0
        lo = hi - 1
        frac = (x - axis[lo]) / (axis[hi] - axis[lo])
        return lo, hi, frac

    def lookup(self, eps_tilde: float, eta_tilde: float,
               mode: str = "conservative") -> float:
        i0, i1, fe = self._bracket(self.epsValues, eps_tilde, "eps_tilde")
        j0, j1, fh = self._bracket(self.etaValues, eta_tilde, "eta_tilde")
        corners = self.values[[i0, i0, i1, i1], [j0, j1, j0, j1]]
        if mode == "conservative":
            return float(corners.min())
        if mode == "bilinear":
            top = corners[0] * (1 - fh) + corners[1] * fh
            bot = corners[2] * (1 - fh) + corners[3] * fh
            return float(top * (1 - fe) + bot * fe)
        raise ValidationError("mode must be 'conservative' or 'bilinear'")


@dataclass
class ThresholdOptimum:
    bestEpsLB: float
    bestEtaThres: float | None
    bestEpsThres: float | None
    feasiblePoints: int
    gridPoints: int

    @property
    def infeasible(self) -> bool:
        return self.feasiblePoints == 0

    def export_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["infeasible"] = self.infeasible
        return out


def default_eta_thres_grid(eta: float) -> np.ndarray:
    return np.arange(0.0, eta + 1e-12, 0.01)


def default_eps_thres_grid() -> np.ndarray:
    return np.logspace(math.log10(1e-4), math.log10(0.5), 50)


def optimize_thresholds(eta: float, q0: float, alpha_frac: float,
                        table: DeltaTildeTable, *,
                        eta_thres_values=None, eps_thres_values=None,
                        alpha: float | None = None) -> ThresholdOptimum:
    """Grid search for the threshold pair maximizing the conditioned
    error bound, with the separation looked up conservatively per point.

    Infeasible points (memory budget too large for the looked-up
    separation) are skipped; an all-infeasible sweep comes back flagged
    with a zero bound.
    """
    _check_prob(eta, "eta")
    if eta == 0.0:
        raise ValidationError("eta must be positive")
    etas = (default_eta_thres_grid(eta) if eta_thres_values is None
            else np.asarray(eta_thres_values, dtype=float))
    epss = (default_eps_thres_grid() if eps_thres_values is None
            else np.asarray(eps_thres_values, dtype=float))
    best = ThresholdOptimum(bestEpsLB=0.0, bestEtaThres=None,
                            bestEpsThres=None, feasiblePoints=0,
                            gridPoints=0)
    for eta_t in etas:
        if eta_t >= 1.0 or eta_t > eta + 1e-12:
            continue
        for eps_t in epss:
            best.gridPoints += 1
            delta_tilde = table.lookup(eps_t * eta, eta_t)
            try:
                nu = rounding_failure_fraction(q0, delta_tilde, alpha_frac)
            except InfeasibleParametersError:
                continue
            best.feasiblePoints += 1
            value = conditioned_error_value(eta, float(eta_t), float(eps_t),
                                            nu, alpha)
            if value > best.bestEpsLB:
                best.bestEpsLB = value
                best.bestEtaThres = float(eta_t)
                best.bestEpsThres = float(eps_t)
    return best


def threshold_curves(eta_values, q0_values, alpha_frac: float,
                     table: DeltaTildeTable, **kwargs) -> list[dict]:
    """Optimizer sweep over transmission values for each memory offset;
    one row per (q0, eta) pair, ready for CSV emission."""
    rows = []
    for q0 in q0_values:
        for eta in eta_values:
            opt = optimize_thresholds(float(eta), float(q0), alpha_frac,
                                      table, **kwargs)
            rows.append({"q0": float(q0), "eta": float(eta),
                         "eps_lb": opt.bestEpsLB,
                         "eta_thres": opt.bestEtaThres,
                         "eps_thres": opt.bestEpsThres,
                         "infeasible": opt.infeasible})
    return rows


def manifest() -> list[dict]:
    """Every closed-form quantity this module evaluates."""
    return [
        {"name": "one_way_auth_security",
         "form": "eps_qkd + hash_term(l_t) + eps_qpv",
         "notes": "hash_term: reciprocal 1/l_t or exponential 2^-l_t"},
        {"name": "msg_auth_security",
         "form": "delta + 2*ceil(l_k/2)*eps_qpv"},
        {"name": "msg_auth_robustness",
         "form": "(ceil(l_k/2) + 2)*eps_rob"},
        {"name": "credential_security",
         "form": "2*eps_qkd + 2*delta + (4*ceil(l_k/2) + 2)*eps_qpv"},
        {"name": "credential_robustness",
         "form": "eps_rob_qkd + (ceil(l_k/2) + 3)*eps_rob_qpv"},
        {"name": "net_sizes",
         "form": "2^(4q+1), 2^(6q+7), 2^(6q+4) times log2(1 + 2/delta)"},
        {"name": "classical_rounding_size",
         "form": "2^(6q+7) * (ceil(log2(1 + 12/delta_tilde)) + 1)"},
        {"name": "rounding_failure_fraction",
         "form": "binary_entropy_inv(1 - 2^(9-6*q0)*(ceil(log2(1+12/dt))+1)"
                 " - alpha_frac)"},
        {"name": "partition_error_lower_bound",
         "form": "max(eps_thres*eta*((eta_r-eta_thres)/(1-eta_thres)-1+nu),"
                 " 0)",
         "notes": "cross-checked by partition_error_oracle enumeration"},
        {"name": "conditioned_error_lower_bound",
         "form": "(1-2^-alpha)*((eta-eta_thres)/(1-eta_thres)-1+nu)"
                 "*eps_thres"},
        {"name": "optimize_thresholds",
         "form": "grid argmax of conditioned_error_lower_bound over"
                 " (eta_thres, eps_thres) with table-supplied separation"},
    ]
