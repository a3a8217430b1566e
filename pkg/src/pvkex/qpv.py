"""Position-verification rounds: single-basis and multi-basis engines.

Two execution paths cover different needs. The statistical engine
(`run_qpv_single`, `run_qpv_multibasis`) runs large round counts with the
prover logically at P, which is where error rates, transmission, and
deviation statistics live. The spacetime engine (`run_qpv_spacetime`,
`run_relay_attack_spacetime`) routes every challenge and response through
the causal event queue, which is where timing soundness lives.

A round sends two random strings x, y and one qubit so all three meet the
prover at an agreed time; the measurement basis is the seeded public
function of (x, y), and both verifiers must receive the same outcome bit
inside the timing window.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PvkexError, ValidationError
from .quantum import SealedQubit, basis_vector, bb84_state, outcome_probability
from .spacetime import Agent, Simulation, default_topology, timing_check

LOSS = -1  # response symbol for "no detection"


class UndefinedRateError(PvkexError):
    """Conditional error rate requested with zero detections."""


@dataclass(frozen=True)
class QpvConfig:
    nBits: int = 16
    rounds: int = 1000
    eta: float = 1.0
    errorThreshold: float = 0.05
    deviationThreshold: float = 0.05
    numBases: int = 2
    tDelta: float = 0.1
    deltaT: float = 10.0
    functionSeed: int = 0
    quantumSpeedFraction: float = 1.0
    verifierSeparation: float = 1.0

    def validate(self) -> None:
        if self.nBits < 1:
            raise ValidationError("nBits must be at least 1")
        if self.rounds < 1:
            raise ValidationError("rounds must be at least 1")
        if not 0 < self.eta <= 1:
            raise ValidationError("eta must lie in (0, 1]")
        if not 0 <= self.errorThreshold < 1:
            raise ValidationError("errorThreshold must lie in [0, 1)")
        if not 0 <= self.deviationThreshold < 1:
            raise ValidationError("deviationThreshold must lie in [0, 1)")
        if self.numBases < 2:
            raise ValidationError("numBases must be at least 2")
        if self.tDelta < 0:
            raise ValidationError("tDelta must be nonnegative")
        if not 0 < self.quantumSpeedFraction <= 1:
            raise ValidationError("quantumSpeedFraction must lie in (0, 1]")
        if self.verifierSeparation <= 0:
            raise ValidationError("verifierSeparation must be positive")
        # runs must not overlap: a run lasts one challenge-response light trip
        run_span = 2 * self.verifierSeparation + self.tDelta
        if self.deltaT <= run_span:
            raise ValidationError(
                f"deltaT must exceed the single-run duration {run_span}")


def basis_angles(num_bases: int) -> np.ndarray:
    """Measurement angles interpolating Z to X across the X-Z plane.

    Two bases give the BB84 pair {Z, X}; three add the intermediate
    (X+Z)/sqrt(2) direction, and so on.
    """
    if num_bases < 2:
        raise ValidationError("need at least two bases")
    return np.linspace(0.0, math.pi / 2.0, num_bases)


def basis_function(seed: int, x, y, num_bases: int) -> int:
    """Seeded pseudorandom public map (x, y) -> basis index in [0, numBases)."""
    xb = bytes(bytearray(int(b) for b in x))
    yb = bytes(bytearray(int(b) for b in y))
    if len(xb) != len(yb):
        raise ValidationError("x and y must have equal length")
    h = hashlib.blake2b(
        len(xb).to_bytes(4, "big") + xb + yb,
        key=int(seed).to_bytes(8, "big", signed=False), digest_size=8)
    return int.from_bytes(h.digest(), "big") % num_bases


# -- prover strategies --------------------------------------------------------

@dataclass(frozen=True)
class Honest:
    """Measures in the announced basis; loses each round with prob 1-eta."""


@dataclass(frozen=True)
class Absent:
    """Never responds."""


@dataclass(frozen=True)
class AbstractPass:
    """Whole-run pass forced with probability epsQpv, else guaranteed fail.

    Stand-in for an arbitrary attack of known success probability, used by
    the composition experiments.
    """

    epsQpv: float

    def __post_init__(self):
        if not 0 <= self.epsQpv <= 1:
            raise ValidationError("epsQpv must lie in [0, 1]")


@dataclass(frozen=True)
class BasisGuess:
    """Measures in a uniformly guessed basis and post-selects on a match."""


@dataclass(frozen=True)
class FixedBasis:
    """Measures every round at one fixed angle and always answers."""

    angle: float


@dataclass
class RoundContext:
    """What a custom strategy sees in one round."""

    x: np.ndarray
    y: np.ndarray
    theta: int
    basisAngle: float
    qubit: SealedQubit
    roundIndex: int


# -- results ------------------------------------------------------------------

@dataclass
class QpvStats:
    counts: np.ndarray        # (3, 4, numBases): outcome {0,1,loss} x state x basis
    stateBasisCounts: np.ndarray  # (4, numBases)
    detections: int
    errors: int
    roundsRun: int
    timingFails: int = 0
    mismatchFails: int = 0

    @property
    def transmission(self) -> float:
        return self.detections / self.roundsRun if self.roundsRun else 0.0


@dataclass
class QpvRoundRecord:
    x: str
    y: str
    theta: int
    preparedState: int
    zSent: Optional[int]
    response1: int
    response2: int
    arrival1: float
    arrival2: float
    verdict: str


@dataclass
class QpvResult:
    stats: QpvStats
    records: list
    verdict: str
    deviations: Optional[np.ndarray] = None
    deltaTotal: Optional[float] = None
    flaggedCells: Optional[list] = None

    def summary(self) -> dict:
        s = self.stats
        out = {
            "rounds": s.roundsRun,
            "detections": s.detections,
            "errors": s.errors,
            "transmission": s.transmission,
            "conditionalError": (s.errors / s.detections) if s.detections else None,
            "timingFails": s.timingFails,
            "mismatchFails": s.mismatchFails,
            "verdict": self.verdict,
        }
        if self.deviations is not None:
            out["deviations"] = np.asarray(self.deviations).tolist()
            out["deltaTotal"] = self.deltaTotal
            out["flaggedCells"] = [list(map(int, c)) for c in self.flaggedCells]
        return out


def conditional_error_rate(stats: QpvStats) -> float:
    """errors / detections; undefined when nothing was detected."""
    if stats.detections == 0:
        raise UndefinedRateError("no detections; conditional error undefined")
    return stats.errors / stats.detections


# -- statistical engine -------------------------------------------------------

def _outcome_prob_table(angles: np.ndarray) -> np.ndarray:
    """p0[s, b] = Born probability of outcome 0 for BB84 state s at angle b."""
    table = np.zeros((4, len(angles)))
    for s in range(4):
        state = bb84_state(s // 2, s % 2)
        for b, angle in enumerate(angles):
            table[s, b] = outcome_probability(state, float(angle), 0)
    return table


def _draw_challenges(config: QpvConfig, rng: np.random.Generator):
    n = config.rounds
    xs = rng.integers(0, 2, size=(n, config.nBits), dtype=np.uint8)
    ys = rng.integers(0, 2, size=(n, config.nBits), dtype=np.uint8)
    key = int(config.functionSeed).to_bytes(8, "big", signed=False)
    # uint8 tobytes() is one byte per bit, the same layout basis_function
    # hashes, so the loop below agrees with it bit for bit
    length_prefix = config.nBits.to_bytes(4, "big")
    thetas = np.empty(n, dtype=np.int64)
    for i in range(n):
        h = hashlib.blake2b(length_prefix + xs[i].tobytes() + ys[i].tobytes(),
                            key=key, digest_size=8)
        thetas[i] = int.from_bytes(h.digest(), "big") % config.numBases
    return xs, ys, thetas


def run_qpv_single(config: QpvConfig, strategy, seed: int = 0,
                   keep_records: bool = False) -> QpvResult:
    """Single-basis verification: state basis equals the announced basis.

    The verdict fails on any timing or response mismatch, on an end-of-run
    conditional error rate strictly above errorThreshold, or when nothing
    at all was detected.
    """
    config.validate()
    if config.numBases != 2:
        raise ValidationError("single-basis mode requires numBases=2")
    return _run_statistical(config, strategy, seed, keep_records,
                            multi_basis=False)


def run_qpv_multibasis(config: QpvConfig, strategy, seed: int = 0,
                       keep_records: bool = False,
                       weights: Optional[np.ndarray] = None) -> QpvResult:
    """Multi-basis verification with deviation statistics.

    States are drawn uniformly from the four BB84 states while the
    measurement basis ranges over `numBases` directions; the verdict
    compares the mean absolute deviation of observed outcome frequencies
    from eta-scaled Born probabilities against deviationThreshold.
    """
    config.validate()
    return _run_statistical(config, strategy, seed, keep_records,
                            multi_basis=True, weights=weights)


def _run_statistical(config: QpvConfig, strategy, seed: int,
                     keep_records: bool, multi_basis: bool,
                     weights: Optional[np.ndarray] = None) -> QpvResult:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n_rounds = config.rounds
    angles = basis_angles(config.numBases)
    p0 = _outcome_prob_table(angles)
    xs, ys, thetas = _draw_challenges(config, rng)

    if multi_basis:
        states = rng.integers(0, 4, size=n_rounds)
        z_sent = np.full(n_rounds, -1)
    else:
        z_bits = rng.integers(0, 2, size=n_rounds)
        states = 2 * thetas + z_bits
        z_sent = z_bits

    counts = np.zeros((3, 4, config.numBases), dtype=np.int64)
    records: list[QpvRoundRecord] = []
    detections = errors = timing_fails = mismatch_fails = 0

    forced_pass = None
    if isinstance(strategy, AbstractPass):
        forced_pass = bool(rng.random() < strategy.epsQpv)

    u_detect = rng.random(n_rounds)
    u_outcome = rng.random(n_rounds)
    guesses = rng.integers(0, config.numBases, size=n_rounds)

    fixed_p0 = None
    if isinstance(strategy, FixedBasis):
        fixed_p0 = [outcome_probability(bb84_state(s // 2, s % 2),
                                        strategy.angle, 0) for s in range(4)]

    d = config.verifierSeparation
    for i in range(n_rounds):
        theta = int(thetas[i])
        s = int(states[i])
        r1 = r2 = LOSS
        if isinstance(strategy, Honest):
            if u_detect[i] < config.eta:
                outcome = 0 if u_outcome[i] < p0[s, theta] else 1
                r1 = r2 = outcome
        elif isinstance(strategy, Absent):
            pass
        elif isinstance(strategy, AbstractPass):
            if forced_pass:
                outcome = (0 if u_outcome[i] < p0[s, theta] else 1) \
                    if multi_basis else int(z_sent[i])
                r1 = r2 = outcome
        elif isinstance(strategy, BasisGuess):
            guess = int(guesses[i])
            outcome = 0 if u_outcome[i] < p0[s, guess] else 1
            if guess == theta:
                r1 = r2 = outcome
        elif isinstance(strategy, FixedBasis):
            outcome = 0 if u_outcome[i] < fixed_p0[s] else 1
            r1 = r2 = outcome
        else:
            qubit = SealedQubit(bb84_state(s // 2, s % 2))
            ctx = RoundContext(x=xs[i], y=ys[i], theta=theta,
                               basisAngle=float(angles[theta]), qubit=qubit,
                               roundIndex=i)
            r1, r2 = strategy.respond(ctx, rng)

        verdict = "ok"
        if r1 == LOSS and r2 == LOSS:
            verdict = "loss"
            counts[2, s, theta] += 1
        elif r1 != r2:
            verdict = "mismatchFail"
            mismatch_fails += 1
        else:
            counts[r1, s, theta] += 1
            detections += 1
            if not multi_basis and r1 != z_sent[i]:
                errors += 1
                verdict = "error"
        if keep_records:
            records.append(QpvRoundRecord(
                x="".join(map(str, xs[i])), y="".join(map(str, ys[i])),
                theta=theta, preparedState=s,
                zSent=None if multi_basis else int(z_sent[i]),
                response1=r1, response2=r2,
                arrival1=d, arrival2=d, verdict=verdict))

    stats = QpvStats(counts=counts, stateBasisCounts=counts.sum(axis=0),
                     detections=detections, errors=errors,
                     roundsRun=n_rounds, timingFails=timing_fails,
                     mismatchFails=mismatch_fails)

    if multi_basis:
        deviations, flagged = compute_deviations(stats, config.eta, p0)
        delta_total = deviation_total(deviations, weights)
        fail = (mismatch_fails > 0 or timing_fails > 0
                or delta_total > config.deviationThreshold)
        return QpvResult(stats=stats, records=records,
                         verdict="fail" if fail else "pass",
                         deviations=deviations, deltaTotal=delta_total,
                         flaggedCells=flagged)

    fail = mismatch_fails > 0 or timing_fails > 0 or detections == 0
    if detections and errors / detections > config.errorThreshold:
        fail = True
    return QpvResult(stats=stats, records=records,
                     verdict="fail" if fail else "pass")


def compute_deviations(stats: QpvStats, eta: float,
                       p0: np.ndarray) -> tuple[np.ndarray, list]:
    """Per-cell |N_zst/N_st - eta p(z|s,theta)| for outcomes z in {0,1}.

    Cells with no rounds at all are scored at the full Born term and
    reported in the flagged list.
    """
    n_states, n_bases = stats.stateBasisCounts.shape
    deviations = np.zeros((2, n_states, n_bases))
    flagged = []
    for s in range(n_states):
        for b in range(n_bases):
            total = stats.stateBasisCounts[s, b]
            for z in (0, 1):
                born = eta * (p0[s, b] if z == 0 else 1.0 - p0[s, b])
                if total == 0:
                    deviations[z, s, b] = born
                    if (s, b) not in flagged:
                        flagged.append((s, b))
                else:
                    deviations[z, s, b] = abs(stats.counts[z, s, b] / total - born)
    return deviations, flagged


def deviation_total(deviations: np.ndarray,
                    weights: Optional[np.ndarray] = None) -> float:
    """Mean deviation over all (z, s, theta) cells, optionally weighted."""
    dev = np.asarray(deviations, dtype=float)
    if weights is None:
        return float(dev.mean())
    w = np.asarray(weights, dtype=float)
    if w.shape != dev.shape:
        raise ValidationError("weights must match the deviation tensor shape")
    if w.sum() <= 0:
        raise ValidationError("weights must have positive mass")
    return float((dev * w).sum() / w.sum())


# -- spacetime engine ---------------------------------------------------------

def run_qpv_spacetime(config: QpvConfig, strategy, seed: int = 0,
                      start_time: float = 0.0) -> tuple[QpvResult, Simulation]:
    """Run single-basis rounds through the causal event queue.

    Challenges and the qubit are timed to meet the prover agent; verifier 1
    checks arrival times of both responses against the timing window. Only
    at-P strategies are meaningful here; use `run_relay_attack_spacetime`
    for off-P behavior.
    """
    config.validate()
    if config.numBases != 2:
        raise ValidationError("spacetime engine runs the single-basis protocol")
    sim = Simulation(default_topology(config.verifierSeparation), seed=seed)
    d = config.verifierSeparation
    rng_v = sim.rng["V1"]
    rng_p = sim.rng["P"]

    rounds = []
    for i in range(config.rounds):
        t_p = start_time + d + i * config.deltaT
        x = rng_v.integers(0, 2, size=config.nBits, dtype=np.uint8)
        y = rng_v.integers(0, 2, size=config.nBits, dtype=np.uint8)
        theta = basis_function(config.functionSeed, x, y, 2)
        z = int(rng_v.integers(0, 2))
        qubit = SealedQubit(bb84_state(theta, z))
        rounds.append({"x": x, "y": y, "theta": theta, "z": z, "t_p": t_p,
                       "resp": {}, "arrivals": {}})
        sim.send_signal("V1", "P",
                        sim.departure_time_for_arrival("V1", "P", t_p),
                        payload={"round": i, "field": "x", "bits": x})
        sim.send_signal("V2", "P",
                        sim.departure_time_for_arrival("V2", "P", t_p),
                        payload={"round": i, "field": "y", "bits": y})
        sim.send_signal(
            "V1", "P",
            sim.departure_time_for_arrival("V1", "P", t_p,
                                           config.quantumSpeedFraction),
            payload={"round": i, "field": "qubit", "qubit": qubit},
            speed_fraction=config.quantumSpeedFraction, kind="quantum")

    inbox: dict[int, dict] = {}

    def prover_handler(s: Simulation, agent: Agent, rec) -> None:
        info = rec.payload
        slot = inbox.setdefault(info["round"], {})
        slot[info["field"]] = info.get("bits", info.get("qubit"))
        if len(slot) == 3:
            rnd = rounds[info["round"]]
            theta = basis_function(config.functionSeed, slot["x"], slot["y"], 2)
            angle = float(basis_angles(2)[theta])
            if isinstance(strategy, Honest):
                if rng_p.random() < config.eta:
                    outcome = slot["qubit"].measure(angle, rng_p)
                else:
                    outcome = LOSS
            elif isinstance(strategy, Absent):
                return
            else:
                ctx = RoundContext(x=slot["x"], y=slot["y"], theta=theta,
                                   basisAngle=angle, qubit=slot["qubit"],
                                   roundIndex=info["round"])
                outcome1, outcome2 = strategy.respond(ctx, rng_p)
                s.send_signal("P", "V1", s.now,
                              payload={"round": info["round"], "bit": outcome1})
                s.send_signal("P", "V2", s.now,
                              payload={"round": info["round"], "bit": outcome2})
                return
            s.send_signal("P", "V1", s.now,
                          payload={"round": info["round"], "bit": outcome})
            s.send_signal("P", "V2", s.now,
                          payload={"round": info["round"], "bit": outcome})

    def verifier_handler(s: Simulation, agent: Agent, rec) -> None:
        info = rec.payload
        rnd = rounds[info["round"]]
        which = 1 if agent.id == "V1" else 2
        rnd["resp"][which] = info["bit"]
        rnd["arrivals"][which] = rec.arriveTime

    sim.run_until_quiescent({"P": prover_handler,
                             "V1": verifier_handler, "V2": verifier_handler})

    counts = np.zeros((3, 4, 2), dtype=np.int64)
    detections = errors = timing_fails = mismatch_fails = 0
    records = []
    for i, rnd in enumerate(rounds):
        s_idx = 2 * rnd["theta"] + rnd["z"]
        r1 = rnd["resp"].get(1, LOSS)
        r2 = rnd["resp"].get(2, LOSS)
        a1 = rnd["arrivals"].get(1, math.inf)
        a2 = rnd["arrivals"].get(2, math.inf)
        verdict = "ok"
        if r1 == LOSS and r2 == LOSS:
            verdict = "loss"
            counts[2, s_idx, rnd["theta"]] += 1
        else:
            ok1 = timing_check(a1, rnd["t_p"], d, config.tDelta)
            ok2 = timing_check(a2, rnd["t_p"], d, config.tDelta)
            if not (ok1 and ok2):
                verdict = "timingFail"
                timing_fails += 1
            elif r1 != r2:
                verdict = "mismatchFail"
                mismatch_fails += 1
            else:
                counts[r1, s_idx, rnd["theta"]] += 1
                detections += 1
                if r1 != rnd["z"]:
                    errors += 1
                    verdict = "error"
        records.append(QpvRoundRecord(
            x="".join(map(str, rnd["x"])), y="".join(map(str, rnd["y"])),
            theta=rnd["theta"], preparedState=s_idx, zSent=rnd["z"],
            response1=r1, response2=r2, arrival1=a1, arrival2=a2,
            verdict=verdict))

    stats = QpvStats(counts=counts, stateBasisCounts=counts.sum(axis=0),
                     detections=detections, errors=errors,
                     roundsRun=config.rounds, timingFails=timing_fails,
                     mismatchFails=mismatch_fails)
    fail = mismatch_fails > 0 or timing_fails > 0 or detections == 0
    if detections and errors / detections > config.errorThreshold:
        fail = True
    return QpvResult(stats=stats, records=records,
                     verdict="fail" if fail else "pass"), sim


def run_relay_attack_spacetime(config: QpvConfig, offset: float,
                               seed: int = 0) -> list[tuple[bool, bool]]:
    """Relay scenario: an off-P pair forwards challenges and answers late.

    One adversary sits at -offset and forwards verifier 1's string to a
    partner at +offset, who answers both verifiers as soon as it knows both
    strings. Returns per-round (timingOk to V1, timingOk to V2); with
    tDelta below 2*offset the pair can never satisfy both.
    """
    config.validate()
    if not 0 < offset < config.verifierSeparation:
        raise ValidationError("offset must place adversaries strictly "
                              "between a verifier and P")
    d = config.verifierSeparation
    agents = [Agent("V1", -d, "verifier1"), Agent("V2", +d, "verifier2"),
              Agent("A1", -offset, "adversary"), Agent("A2", +offset, "adversary")]
    sim = Simulation(agents, seed=seed)
    rounds = []
    for i in range(config.rounds):
        t_p = d + i * config.deltaT
        rounds.append({"t_p": t_p, "arrivals": {}})
        sim.send_signal("V1", "A1",
                        sim.departure_time_for_arrival("V1", "A1",
                                                       t_p - offset),
                        payload={"round": i, "field": "x"})
        sim.send_signal("V2", "A2",
                        sim.departure_time_for_arrival("V2", "A2",
                                                       t_p - offset),
                        payload={"round": i, "field": "y"})

    partner_state: dict[int, set] = {}

    def a1_handler(s: Simulation, agent: Agent, rec) -> None:
        s.send_signal("A1", "A2", s.now,
                      payload={"round": rec.payload["round"], "field": "x"})

    def a2_handler(s: Simulation, agent: Agent, rec) -> None:
        i = rec.payload["round"]
        have = partner_state.setdefault(i, set())
        have.add(rec.payload["field"])
        if have == {"x", "y"}:
            guess = int(s.rng["A2"].integers(0, 2))
            s.send_signal("A2", "V1", s.now, payload={"round": i, "bit": guess})
            s.send_signal("A2", "V2", s.now, payload={"round": i, "bit": guess})

    def verifier_handler(s: Simulation, agent: Agent, rec) -> None:
        i = rec.payload["round"]
        rounds[i]["arrivals"][agent.id] = rec.arriveTime

    sim.run_until_quiescent({"A1": a1_handler, "A2": a2_handler,
                             "V1": verifier_handler, "V2": verifier_handler})

    results = []
    for rnd in rounds:
        a1 = rnd["arrivals"].get("V1", math.inf)
        a2 = rnd["arrivals"].get("V2", math.inf)
        results.append((timing_check(a1, rnd["t_p"], d, config.tDelta),
                        timing_check(a2, rnd["t_p"], d, config.tDelta)))
    return results
