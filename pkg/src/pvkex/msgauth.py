"""Authenticated message transfer carried by position-verified runs.

The sender tags the message with a keyed hash, encodes the hash key as a
constant-weight codeword, and then participates in one verification run
per codeword bit: honestly when the bit is one, not at all when it is
zero.  The receiver reconstructs the bit vector from the per-run
verdicts, applies the tampering check (both endpoint bits set, total
weight exact), decodes the key and recomputes the tag.

Runs can be executed in two modes.  Abstract mode draws each run's
verdict from per-run pass/fail probabilities, which is what the
composition experiments need.  Simulated mode plays a full round batch
of the position-verification protocol per codeword bit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .authcodes import (CodecParams, HashFamilyParams, decode, encode,
                        hash_tag)
from .errors import MalformedCodewordError, ValidationError
from .qpv import Absent, Honest, QpvConfig, run_qpv_single
from .spacetime import C


def _check_bits(value: str, label: str) -> str:
    if not isinstance(value, str) or any(ch not in "01" for ch in value):
        raise ValidationError(f"{label} must be a bit string")
    return value


@dataclass(frozen=True)
class NoTamper:
    """Channel delivers every run and the message-tag pair faithfully."""


@dataclass(frozen=True)
class FlipOneToZero:
    """Jam the runs at the given 1-based indices so they fail.

    Turning passes into failures is always possible for a channel
    adversary; the point of the weight check is that this alone is
    detectable.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        if any(i < 1 for i in self.indices):
            raise ValidationError("run indices are 1-based")


@dataclass(frozen=True)
class FlipZeroToOne:
    """Try to pass the runs at the given indices without the sender.

    Each attempt on a run the sender sits out succeeds independently
    with probability `perRunPassProb`.  Because a bare 0-to-1 flip would
    raise the total weight, the adversary also jams one passing interior
    one-run per successful flip, keeping the weight at its expected
    value.  This is the strongest weight-preserving behaviour available
    to this kind; attempts on runs the sender participates in are no-ops.
    """

    indices: tuple[int, ...]
    perRunPassProb: float

    def __post_init__(self):
        if any(i < 1 for i in self.indices):
            raise ValidationError("run indices are 1-based")
        if not 0.0 <= self.perRunPassProb <= 1.0:
            raise ValidationError("perRunPassProb must be in [0, 1]")


@dataclass(frozen=True)
class Desync:
    """Shift the run schedule by whole slots of the run spacing.

    With shift +1 the receiver's slot i carries the sender's run i-1, so
    the first slot has no sender behind it; with shift -1 the last slot
    is uncovered.  Uncovered slots pass only if the adversary forces
    them, each attempt succeeding with probability `perRunPassProb`.
    """

    shift: int
    perRunPassProb: float = 0.0

    def __post_init__(self):
        if self.shift == 0:
            raise ValidationError("shift must be a nonzero slot count")
        if not 0.0 <= self.perRunPassProb <= 1.0:
            raise ValidationError("perRunPassProb must be in [0, 1]")


@dataclass(frozen=True)
class DelayMsgTag:
    """Withhold the genuine message-tag pair and deliver a substitute.

    The runs themselves are relayed honestly; the substitute pair must
    be chosen before the runs reveal anything about the key.
    """

    substituteMessage: str
    substituteTag: str


MsgAdversary = NoTamper | FlipOneToZero | FlipZeroToOne | Desync | DelayMsgTag


def qpv_run_duration(qpv: QpvConfig) -> float:
    """Wall-clock span of one full run batch, first challenge departure
    to last admissible response arrival."""
    return (2.0 * qpv.verifierSeparation / C
            + (qpv.rounds - 1) * qpv.deltaT + qpv.tDelta)


@dataclass(frozen=True)
class MsgAuthConfig:
    hashParams: HashFamilyParams
    codecParams: CodecParams
    qpvConfig: QpvConfig
    deltaT: float = 1000.0
    tStart: float = 0.0
    runMode: str = "abstract"
    epsRobPerRun: float = 0.0

    def validate(self) -> None:
        if self.hashParams.keyBits != self.codecParams.keyBits:
            raise ValidationError("hash key length and codec key length differ")
        if self.runMode not in ("abstract", "simulated"):
            raise ValidationError("runMode must be 'abstract' or 'simulated'")
        if not 0.0 <= self.epsRobPerRun <= 1.0:
            raise ValidationError("epsRobPerRun must be in [0, 1]")
        # run spacing must exceed the duration of a single run; abstract
        # runs are instantaneous draws, so any positive spacing works
        if self.runMode == "simulated":
            self.qpvConfig.validate()
            if self.deltaT <= qpv_run_duration(self.qpvConfig):
                raise ValidationError(
                    "deltaT must exceed the duration of one run batch")
        elif self.deltaT <= 0.0:
            raise ValidationError("deltaT must be positive")

    def run_times(self) -> list[float]:
        n = self.codecParams.codeLength
        return [self.tStart + i * self.deltaT for i in range(n)]


@dataclass
class MsgAuthOutcome:
    """Receiver-side record of one protocol execution.

    `decodedKey` is set when the tampering check passes and the codeword
    ranks inside the key space; a weight-valid word can still rank past
    the key space (`decodeFailed`), which counts as an authentication
    failure.
    """

    message: str
    tag: str
    senderKey: str
    cHat: str
    tamperCheckPass: bool
    decodedKey: str | None
    decodeFailed: bool
    receivedMessage: str
    receivedTag: str
    authPass: bool

    def accepted(self) -> bool:
        return self.tamperCheckPass and self.authPass

    def key_mismatch_accept(self) -> bool:
        """Tampering check passed but the key that came through is not
        the sender's (including rank-overflow decode failures)."""
        return self.tamperCheckPass and (self.decodeFailed
                                         or self.decodedKey != self.senderKey)

    def events(self) -> dict[str, bool]:
        return {"tamperCheck": self.tamperCheckPass,
                "msgTagMatch": self.authPass}

    def export_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["events"] = self.events()
        return out


def _base_verdicts(config: MsgAuthConfig, codeword: str, u_rob: np.ndarray,
                   run_seeds) -> list[bool]:
    """Per-run verdicts with an honest channel."""
    verdicts = []
    for j, bit in enumerate(codeword):
        if config.runMode == "abstract":
            if bit == "1":
                verdicts.append(bool(u_rob[j] >= config.epsRobPerRun))
            else:
                verdicts.append(False)
        else:
            strategy = Honest() if bit == "1" else Absent()
            result = run_qpv_single(config.qpvConfig, strategy,
                                    seed=run_seeds[j])
            verdicts.append(result.verdict == "pass")
    return verdicts


def send_authenticated(config: MsgAuthConfig, message: str,
                       adversary: MsgAdversary = NoTamper(), *,
                       seed: int = 0, key: str | None = None) -> MsgAuthOutcome:
    """Execute the full send-tag-transfer-check flow once.

    `key` fixes the sender's hash key instead of drawing it, which the
    exhaustive small-parameter experiments rely on.
    """
    config.validate()
    params = config.hashParams
    _check_bits(message, "message")
    if len(message) > params.messageBits:
        raise ValidationError(
            f"message must be at most {params.messageBits} bits")

    ss = np.random.SeedSequence(seed)
    key_ss, run_ss = ss.spawn(2)
    rng = np.random.default_rng(key_ss)
    length = config.codecParams.codeLength

    if key is None:
        key = "".join("01"[b] for b in rng.integers(0, 2, size=params.keyBits))
    else:
        _check_bits(key, "key")
        if len(key) != params.keyBits:
            raise ValidationError(f"key must be {params.keyBits} bits")

    tag = hash_tag(params, key, message)
    codeword = encode(config.codecParams, key)
    # one robustness draw and one forcing draw per slot, drawn up front
    # so the stream does not depend on the adversary's branch structure
    u = rng.random((length, 2))
    run_seeds = ([int(s.generate_state(1)[0]) for s in run_ss.spawn(length)]
                 if config.runMode == "simulated" else [0] * length)

    verdicts = _base_verdicts(config, codeword, u[:, 0], run_seeds)
    received_message, received_tag = message, tag

    if isinstance(adversary, FlipOneToZero):
        for i in adversary.indices:
            if i <= length:
                verdicts[i - 1] = False
    elif isinstance(adversary, FlipZeroToOne):
        forced = 0
        for i in adversary.indices:
            j = i - 1
            if i <= length and codeword[j] == "0" and not verdicts[j]:
                if u[j, 1] < adversary.perRunPassProb:
                    verdicts[j] = True
                    forced += 1
        # weight repair: jam one passing interior one-run per forced pass
        for j in range(length - 2, 0, -1):
            if forced == 0:
                break
            if codeword[j] == "1" and verdicts[j]:
                verdicts[j] = False
                forced -= 1
    elif isinstance(adversary, Desync):
        shifted = []
        for i in range(length):
            j = i - adversary.shift
            if 0 <= j < length:
                shifted.append(verdicts[j])
            else:
                shifted.append(bool(u[i, 1] < adversary.perRunPassProb))
        verdicts = shifted
    elif isinstance(adversary, DelayMsgTag):
        received_message = _check_bits(adversary.substituteMessage,
                                       "substituteMessage")
        if len(received_message) > params.messageBits:
            raise ValidationError("substituteMessage too long")
        received_tag = _check_bits(adversary.substituteTag, "substituteTag")
        if len(received_tag) != params.tagBits:
            raise ValidationError(f"substituteTag must be {params.tagBits} bits")
    elif not isinstance(adversary, NoTamper):
        raise ValidationError(f"unknown adversary {adversary!r}")

    c_hat = "".join("1" if v else "0" for v in verdicts)
    tamper_pass = (c_hat[0] == "1" and c_hat[-1] == "1"
                   and c_hat.count("1") == config.codecParams.codewordWeight)
    decoded: str | None = None
    decode_failed = False
    if tamper_pass:
        try:
            decoded = decode(config.codecParams, c_hat)
        except MalformedCodewordError:
            decode_failed = True
    auth_pass = (tamper_pass and not decode_failed
                 and hash_tag(params, decoded, received_message) == received_tag)

    return MsgAuthOutcome(message=message, tag=tag, senderKey=key,
                          cHat=c_hat, tamperCheckPass=tamper_pass,
                          decodedKey=decoded, decodeFailed=decode_failed,
                          receivedMessage=received_message,
                          receivedTag=received_tag, authPass=auth_pass)


@dataclass
class MsgAuthAggregate:
    trials: int
    tamperCheckPasses: int
    accepts: int
    keyMismatchAccepts: int
    decodeFailures: int
    aborts: int

    def rate(self, count: int) -> float:
        return count / self.trials

    def export_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["abortRate"] = self.rate(self.aborts)
        out["acceptRate"] = self.rate(self.accepts)
        out["tamperCheckPassRate"] = self.rate(self.tamperCheckPasses)
        out["keyMismatchAcceptRate"] = self.rate(self.keyMismatchAccepts)
        return out


def run_msg_auth_trials(config: MsgAuthConfig, message: str,
                        adversary: MsgAdversary, trials: int,
                        seed: int = 0, key: str | None = None) -> MsgAuthAggregate:
    """Independent repetitions with per-trial seeds derived from `seed`."""
    if trials < 1:
        raise ValidationError("trials must be positive")
    trial_seeds = np.random.SeedSequence(seed).generate_state(trials,
                                                              dtype=np.uint64)
    agg = MsgAuthAggregate(trials=trials, tamperCheckPasses=0, accepts=0,
                           keyMismatchAccepts=0, decodeFailures=0, aborts=0)
    for t in range(trials):
        out = send_authenticated(config, message, adversary,
                                 seed=int(trial_seeds[t]), key=key)
        agg.tamperCheckPasses += out.tamperCheckPass
        agg.accepts += out.accepted()
        agg.keyMismatchAccepts += out.key_mismatch_accept()
        agg.decodeFailures += out.decodeFailed
        agg.aborts += not out.accepted()
    return agg


def soundness_bound_msg_auth(l_k: int, eps_qpv: float, delta: float) -> float:
    """Acceptance probability of a forged message: hash-family bound plus
    twice half the key length times the per-run pass bound, clamped."""
    if l_k < 1:
        raise ValidationError("l_k must be at least 1")
    if not 0.0 <= eps_qpv <= 1.0 or not 0.0 <= delta <= 1.0:
        raise ValidationError("eps_qpv and delta must be in [0, 1]")
    return min(1.0, delta + 2 * ((l_k + 1) // 2) * eps_qpv)


def robustness_bound_msg_auth(l_k: int, eps_rob: float) -> float:
    """Honest abort probability: half the key length plus two runs, each
    failing with probability at most eps_rob, clamped."""
    if l_k < 1:
        raise ValidationError("l_k must be at least 1")
    if not 0.0 <= eps_rob <= 1.0:
        raise ValidationError("eps_rob must be in [0, 1]")
    return min(1.0, (((l_k + 1) // 2) + 2) * eps_rob)
