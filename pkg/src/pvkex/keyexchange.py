"""Toy key-agreement sub-protocol and the two composed exchanges.

The quantum layer is a desk-scale two-basis prepare-and-measure link:
random bits and bases on both ends, channel flips with a configured
probability, sifting on matching bases, an error estimate on a disclosed
sample, interactive parity reconciliation, a digest comparison, and a
convolution-based key compression.  Security against a quantum channel
adversary is a configured label here, not something the simulation
establishes; what the simulation does establish are the classical event
probabilities the composed protocols are judged by.

Two compositions are provided.  The one-way-authenticated exchange
assumes tamper-proof delivery from the first party and defers
authentication of the second party's messages to a single keyed hash.
The credential exchange drops that assumption: the hash key itself
travels through the authenticated-message machinery, and the final
position-verification run is the second party's credential.

Only the second party's classical messages are tamperable, matching the
catalogued adversaries.  Tampering is applied to the transported copy;
the receiver recomputes her sifting view, error estimate, and digest
comparison from what she received.  The reconciliation dialogue itself
is simulated on the true data: a corrupted dialogue surfaces in the
digest comparison and the transcript hash either way, and those are the
only effects the catalogued experiments measure.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .authcodes import HashFamilyParams, encode, hash_tag
from .errors import ValidationError
from .msgauth import (DelayMsgTag, MsgAuthConfig, MsgAuthOutcome,
                      send_authenticated)
from .qpv import Absent, Honest, QpvConfig, run_qpv_single
from .quantum import binary_entropy

VERIFY_DIGEST_BITS = 64


@dataclass(frozen=True)
class QkdConfig:
    signalCount: int = 1000
    channelQber: float = 0.0
    peSampleFraction: float = 0.1
    peThreshold: float = 0.05
    ecPasses: int = 3
    paOutputBits: int | None = None
    epsQkdLabel: float = 1e-9

    def validate(self, statistics: bool = False) -> None:
        if self.signalCount < 8:
            raise ValidationError("signalCount must be at least 8")
        if statistics and self.signalCount < 1000:
            raise ValidationError(
                "statistics paths need signalCount >= 1000")
        if not 0.0 <= self.channelQber <= 0.5:
            raise ValidationError("channelQber must be in [0, 0.5]")
        if not 0.0 < self.peSampleFraction < 1.0:
            raise ValidationError("peSampleFraction must be in (0, 1)")
        if not 0.0 < self.peThreshold < 0.5:
            raise ValidationError("peThreshold must be in (0, 0.5)")
        if self.ecPasses < 1:
            raise ValidationError("ecPasses must be at least 1")
        if self.paOutputBits is not None and self.paOutputBits < 0:
            raise ValidationError("paOutputBits must be nonnegative")
        if not 0.0 <= self.epsQkdLabel <= 1.0:
            raise ValidationError("epsQkdLabel must be in [0, 1]")


# channel adversaries, catalogued kinds only

@dataclass(frozen=True)
class CleanChannel:
    """Everything is delivered faithfully."""


@dataclass(frozen=True)
class TamperBobMessages:
    """Flip the given bit positions of the second party's transported
    classical messages.  Negative indices count from the end."""

    flipIndices: tuple[int, ...]

    def __post_init__(self):
        if not self.flipIndices:
            raise ValidationError("flipIndices must not be empty")


@dataclass(frozen=True)
class TamperTag:
    """Flip bits of the message tag in transit (credential flow only)."""

    flipIndices: tuple[int, ...] = (0,)


@dataclass(frozen=True)
class BlockFinalQpv:
    """Jam the closing position-verification run."""


@dataclass(frozen=True)
class ImpersonateAtWrongPosition:
    """Garble the tag so the second party drops out, then try to pass
    the closing run from off position with the given probability."""

    epsQpv: float

    def __post_init__(self):
        if not 0.0 <= self.epsQpv <= 1.0:
            raise ValidationError("epsQpv must be in [0, 1]")


ChannelAdversary = (CleanChannel | TamperBobMessages | TamperTag
                    | BlockFinalQpv | ImpersonateAtWrongPosition)


def _bits_str(arr) -> str:
    return "".join("01"[int(b)] for b in arr)


def _digest_bits(bits: np.ndarray, salt: bytes) -> str:
    payload = np.packbits(bits.astype(np.uint8)).tobytes()
    h = hashlib.blake2b(payload, digest_size=VERIFY_DIGEST_BITS // 8,
                        key=salt)
    return bin(int.from_bytes(h.digest(), "big"))[2:].zfill(VERIFY_DIGEST_BITS)


def _parity(bits: np.ndarray) -> int:
    return int(np.bitwise_xor.reduce(bits)) if len(bits) else 0


def _cascade(alice: np.ndarray, bob: np.ndarray, qber_est: float,
             passes: int, rng: np.random.Generator):
    """Interactive parity reconciliation, correcting `bob` toward `alice`.

    Fixed number of passes with doubling shuffled blocks; odd blocks are
    binary-searched, and every fix re-checks the blocks of other passes
    that contain the flipped position.  Returns the corrected copy, the
    number of disclosed parity bits, and both transcript halves (the
    reference side's parity stream and the corrected side's
    mismatch/direction stream).
    """
    n = len(alice)
    bob = bob.copy()
    if n == 0:
        return bob, 0, "", ""
    block0 = max(4, min(n, int(np.ceil(0.73 / max(qber_est, 1e-3)))))
    leak = 0
    msg_a: list[str] = []
    msg_b: list[str] = []
    partitions: list[list[np.ndarray]] = []
    ref_parities: list[list[int]] = []
    block_of: list[np.ndarray] = []

    def block_parity_ok(p: int, j: int) -> bool:
        return _parity(bob[partitions[p][j]]) == ref_parities[p][j]

    def search_and_fix(p: int, j: int) -> int:
        nonlocal leak
        blk = partitions[p][j]
        while len(blk) > 1:
            half = len(blk) // 2
            left = blk[:half]
            pa = _parity(alice[left])
            leak += 1
            msg_a.append("01"[pa])
            mismatch_left = _parity(bob[left]) != pa
            msg_b.append("01"[mismatch_left])
            blk = left if mismatch_left else blk[half:]
        bob[blk[0]] ^= 1
        return int(blk[0])

    for p in range(passes):
        size = min(n, block0 << p)
        perm = np.arange(n) if p == 0 else rng.permutation(n)
        blocks = [perm[i:i + size] for i in range(0, n, size)]
        partitions.append(blocks)
        owner = np.empty(n, dtype=np.int64)
        for j, blk in enumerate(blocks):
            owner[blk] = j
        block_of.append(owner)
        pars = []
        for blk in blocks:
            pa = _parity(alice[blk])
            pars.append(pa)
            leak += 1
            msg_a.append("01"[pa])
        ref_parities.append(pars)
        pending = set()
        for j in range(len(blocks)):
            ok = block_parity_ok(p, j)
            msg_b.append("01"[not ok])
            if not ok:
                pending.add((p, j))
        while pending:
            pp, jj = min(pending)
            pending.discard((pp, jj))
            if block_parity_ok(pp, jj):
                continue
            fixed = search_and_fix(pp, jj)
            # ripple the fix through every pass built so far
            for q in range(len(partitions)):
                bq = int(block_of[q][fixed])
                if not block_parity_ok(q, bq):
                    pending.add((q, bq))
    return bob, leak, "".join(msg_a), "".join(msg_b)


@dataclass
class QkdRun:
    """One execution of the toy key-agreement sub-protocol.

    `messageBob` is the second party's transcript half as sent;
    `messageBobReceived` is the copy after channel tampering.  The
    idealized indicators are the same checks evaluated on the untampered
    copy.
    """

    siftedCount: int
    messageAlice: str
    messageBob: str
    messageBobReceived: str
    peSampleSize: int
    peRateAlice: float
    peRateBob: float
    peAcceptAlice: bool
    peAcceptBob: bool
    peAcceptAliceIdeal: bool
    peAcceptBobIdeal: bool
    leakBits: int
    verificationAlice: bool
    verificationBob: bool
    correctedEqual: bool
    keyAlice: str | None
    keyBob: str | None

    def export_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_toy_qkd(config: QkdConfig, seed: int = 0,
                tamper_indices: tuple[int, ...] | None = None) -> QkdRun:
    config.validate()
    ss = np.random.SeedSequence(seed)
    q_ss, sample_ss, ec_ss, ver_ss, pa_ss = ss.spawn(5)
    rng = np.random.default_rng(q_ss)
    n = config.signalCount

    a_bits = rng.integers(0, 2, n, dtype=np.int8)
    a_bases = rng.integers(0, 2, n, dtype=np.int8)
    b_bases = rng.integers(0, 2, n, dtype=np.int8)
    flips = rng.random(n) < config.channelQber
    scrambled = rng.integers(0, 2, n, dtype=np.int8)
    b_bits = np.where(a_bases == b_bases, a_bits ^ flips, scrambled)

    def sample_indices(length: int) -> np.ndarray:
        m = max(1, round(config.peSampleFraction * length))
        gen = np.random.default_rng(sample_ss)
        return np.sort(gen.choice(length, size=min(m, length), replace=False))

    def side(received_bases: np.ndarray):
        """Sift, sample, and remainder as seen against the given copy of
        the second party's basis announcement."""
        pos = np.flatnonzero(a_bases == received_bases)
        return pos

    pos_true = side(b_bases)
    sift_a = a_bits[pos_true]
    sift_b = b_bits[pos_true]
    n_sift = len(sift_a)
    if n_sift < 4:
        raise ValidationError("too few sifted signals; raise signalCount")

    idx = sample_indices(n_sift)
    m = len(idx)
    sample_a = sift_a[idx]
    sample_b = sift_b[idx]
    keep = np.ones(n_sift, dtype=bool)
    keep[idx] = False
    rem_a = sift_a[keep]
    rem_b = sift_b[keep]

    rate_true = float(np.mean(sample_a ^ sample_b))
    pe_bob = rate_true <= config.peThreshold
    qber_est = max(rate_true, 0.0)

    corrected_b, leak, ec_msg_a, ec_msg_b = _cascade(
        rem_a, rem_b, qber_est, config.ecPasses,
        np.random.default_rng(ec_ss))
    salt = np.random.default_rng(ver_ss).bytes(16)
    digest_a = _digest_bits(rem_a, salt)
    digest_b = _digest_bits(corrected_b, salt)
    leak += VERIFY_DIGEST_BITS
    ver_bob = digest_a == digest_b
    corrected_equal = bool(np.array_equal(rem_a, corrected_b))

    if config.paOutputBits is not None:
        out_bits = min(config.paOutputBits, len(rem_a))
    else:
        rate_cap = 1.0 - 2.0 * float(binary_entropy(config.peThreshold))
        out_bits = max(0, int(np.floor(len(rem_a) * rate_cap)) - leak)
    conv_seed = np.random.default_rng(pa_ss)
    r = conv_seed.integers(0, 2, max(1, len(rem_a) + out_bits - 1),
                           dtype=np.int8)

    def compress(bits: np.ndarray) -> str:
        if out_bits == 0 or len(bits) == 0:
            return ""
        full = np.convolve(bits.astype(np.int64), r.astype(np.int64)) % 2
        return _bits_str(full[len(bits) - 1:len(bits) - 1 + out_bits])

    key_a = compress(rem_a)
    key_b = compress(corrected_b)

    msg_a = (_bits_str(a_bases) + _bits_str(sample_a) + ec_msg_a + digest_a)
    msg_b = (_bits_str(b_bases) + _bits_str(sample_b) + ec_msg_b + digest_b)

    received = msg_b
    if tamper_indices:
        chars = list(msg_b)
        for i in tamper_indices:
            chars[i] = "01"[chars[i] == "0"]
        received = "".join(chars)

    # receiver-side recomputation from the transported copy
    rb_bases = np.frombuffer(received[:n].encode(), dtype=np.uint8) - ord("0")
    pos_alice = side(rb_bases.astype(np.int8))
    if np.array_equal(pos_alice, pos_true):
        recv_sample = np.frombuffer(received[n:n + m].encode(),
                                    dtype=np.uint8) - ord("0")
        rate_alice = float(np.mean(sample_a ^ recv_sample))
        recv_digest = received[len(received) - VERIFY_DIGEST_BITS:]
        ver_alice = digest_a == recv_digest
    else:
        # sifting views diverged: her sample and digest comparisons run
        # against misaligned data, which can only end in an abort
        rate_alice = 1.0
        ver_alice = False
    pe_alice = rate_alice <= config.peThreshold

    return QkdRun(siftedCount=n_sift, messageAlice=msg_a, messageBob=msg_b,
                  messageBobReceived=received, peSampleSize=m,
                  peRateAlice=rate_alice, peRateBob=rate_true,
                  peAcceptAlice=pe_alice, peAcceptBob=pe_bob,
                  peAcceptAliceIdeal=pe_bob, peAcceptBobIdeal=pe_bob,
                  leakBits=leak, verificationAlice=ver_alice,
                  verificationBob=ver_bob, correctedEqual=corrected_equal,
                  keyAlice=key_a, keyBob=key_b)


@dataclass
class Indicators:
    peAcceptAlice: bool
    peAcceptBob: bool
    peAcceptAliceIdeal: bool
    peAcceptBobIdeal: bool
    messagesIntact: bool
    hashMatched: bool
    tagMatched: bool
    qpvAccepted: bool
    verificationAlice: bool
    verificationBob: bool
    correctedKeysEqual: bool

    def export_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ExchangeOutcome:
    keyA: str | None
    keyB: str | None
    indicators: Indicators
    transcriptDigest: str

    def check_invariants(self) -> None:
        ind = self.indicators
        if self.keyA is not None:
            assert ind.qpvAccepted and ind.peAcceptAlice
        if self.keyB is not None:
            assert ind.peAcceptBob and (ind.hashMatched or ind.tagMatched)

    def export_dict(self) -> dict:
        return {"keyA": self.keyA, "keyB": self.keyB,
                "indicators": self.indicators.export_dict(),
                "transcriptDigest": self.transcriptDigest}


def _transcript_digest(*parts: str) -> str:
    h = hashlib.blake2b(digest_size=16)
    for p in parts:
        h.update(p.encode())
        h.update(b"|")
    return h.hexdigest()


def _final_qpv(qpv: QpvConfig, participates: bool, abstract: bool,
               eps_rob: float, force_prob: float, blocked: bool,
               rng: np.random.Generator, seed: int) -> bool:
    """Closing credential run.  The participant plays honestly; an
    absent participant passes only via an off-position force attempt."""
    if blocked:
        return False
    if abstract:
        if participates:
            return bool(rng.random() >= eps_rob)
        return bool(rng.random() < force_prob)
    strategy = Honest() if participates else Absent()
    result = run_qpv_single(qpv, strategy, seed=seed)
    if not participates and force_prob > 0.0 and result.verdict == "fail":
        return bool(rng.random() < force_prob)
    return result.verdict == "pass"


def run_protocol1(qkd: QkdConfig, qpv: QpvConfig, hash_params: HashFamilyParams,
                  adversary: ChannelAdversary = CleanChannel(), *,
                  seed: int = 0, eps_qpv_force: float = 0.0,
                  abstract_qpv: bool = False,
                  eps_rob_qpv: float = 0.0) -> ExchangeOutcome:
    """One-way authenticated exchange: the first party's messages are
    tamper-proof by assumption, and her single keyed hash of the second
    party's transcript decides his participation in the closing run."""
    if not isinstance(adversary, (CleanChannel, TamperBobMessages)):
        raise ValidationError(
            "the one-way authenticated flow catalogues only clean and "
            "message-tampering adversaries")
    ss = np.random.SeedSequence(seed)
    qkd_ss, key_ss, qpv_ss = ss.spawn(3)
    tamper = (adversary.flipIndices
              if isinstance(adversary, TamperBobMessages) else None)
    run = run_toy_qkd(qkd, seed=int(qkd_ss.generate_state(1)[0]),
                      tamper_indices=tamper)

    if len(run.messageBob) > hash_params.messageBits:
        raise ValidationError("hash messageBits too small for transcript")
    rng = np.random.default_rng(key_ss)
    hash_key = _bits_str(rng.integers(0, 2, hash_params.keyBits))
    sent_hash = hash_tag(hash_params, hash_key, run.messageBobReceived)
    hash_ok = hash_tag(hash_params, hash_key, run.messageBob) == sent_hash

    participates = hash_ok
    qpv_ok = _final_qpv(qpv, participates, abstract_qpv, eps_rob_qpv,
                        eps_qpv_force, blocked=False, rng=rng,
                        seed=int(qpv_ss.generate_state(1)[0]))

    ind = Indicators(peAcceptAlice=run.peAcceptAlice,
                     peAcceptBob=run.peAcceptBob,
                     peAcceptAliceIdeal=run.peAcceptAliceIdeal,
                     peAcceptBobIdeal=run.peAcceptBobIdeal,
                     messagesIntact=run.messageBobReceived == run.messageBob,
                     hashMatched=hash_ok, tagMatched=False,
                     qpvAccepted=qpv_ok,
                     verificationAlice=run.verificationAlice,
                     verificationBob=run.verificationBob,
                     correctedKeysEqual=run.correctedEqual)
    key_a = (run.keyAlice if qpv_ok and run.peAcceptAlice
             and run.verificationAlice else None)
    key_b = (run.keyBob if hash_ok and run.peAcceptBob
             and run.verificationBob else None)
    out = ExchangeOutcome(keyA=key_a, keyB=key_b, indicators=ind,
                          transcriptDigest=_transcript_digest(
                              run.messageAlice, run.messageBobReceived,
                              sent_hash))
    out.check_invariants()
    return out


def run_protocol3(qkd: QkdConfig, msg_auth: MsgAuthConfig, qpv: QpvConfig,
                  adversary: ChannelAdversary = CleanChannel(), *,
                  seed: int = 0) -> ExchangeOutcome:
    """Credential exchange with no pre-shared authentication.

    The tag key travels through the authenticated-message machinery; a
    failed error estimate on the first party's side turns the tag into a
    uniform decoy and removes her from the key-transfer runs.  The
    second party's credential is the closing run, played only when his
    own checks pass.
    """
    ss = np.random.SeedSequence(seed)
    qkd_ss, auth_ss, transfer_ss, qpv_ss = ss.spawn(4)
    tamper = (adversary.flipIndices
              if isinstance(adversary, TamperBobMessages) else None)
    run = run_toy_qkd(qkd, seed=int(qkd_ss.generate_state(1)[0]),
                      tamper_indices=tamper)
    params = msg_auth.hashParams
    codec = msg_auth.codecParams
    msg_alice_view = run.messageAlice + run.messageBobReceived
    msg_bob_view = run.messageAlice + run.messageBob
    if len(msg_alice_view) > params.messageBits:
        raise ValidationError("hash messageBits too small for transcript")

    rng = np.random.default_rng(auth_ss)
    auth_seed = int(transfer_ss.generate_state(1)[0])
    if run.peAcceptAlice and run.verificationAlice:
        key = _bits_str(rng.integers(0, 2, params.keyBits))
        true_tag = hash_tag(params, key, msg_alice_view)
        delivered = true_tag
        if isinstance(adversary, (TamperTag, ImpersonateAtWrongPosition)):
            flips = (adversary.flipIndices
                     if isinstance(adversary, TamperTag) else (0,))
            chars = list(delivered)
            for i in flips:
                chars[i] = "01"[chars[i] == "0"]
            delivered = "".join(chars)
        transfer = send_authenticated(
            msg_auth, msg_alice_view,
            DelayMsgTag(substituteMessage=msg_bob_view,
                        substituteTag=delivered),
            seed=auth_seed, key=key)
    else:
        # decoy: uniform tag, no participation, every run reads absent
        decoy = _bits_str(rng.integers(0, 2, params.tagBits))
        transfer = MsgAuthOutcome(
            message=msg_alice_view, tag=decoy, senderKey="",
            cHat="0" * codec.codeLength, tamperCheckPass=False,
            decodedKey=None, decodeFailed=False,
            receivedMessage=msg_bob_view, receivedTag=decoy, authPass=False)

    accept_bob = transfer.accepted()
    participates = (accept_bob and run.peAcceptBob and run.verificationBob)
    abstract = msg_auth.runMode == "abstract"
    force = (adversary.epsQpv
             if isinstance(adversary, ImpersonateAtWrongPosition) else 0.0)
    qpv_ok = _final_qpv(qpv, participates, abstract, msg_auth.epsRobPerRun,
                        force, blocked=isinstance(adversary, BlockFinalQpv),
                        rng=rng, seed=int(qpv_ss.generate_state(1)[0]))

    ind = Indicators(peAcceptAlice=run.peAcceptAlice,
                     peAcceptBob=run.peAcceptBob,
                     peAcceptAliceIdeal=run.peAcceptAliceIdeal,
                     peAcceptBobIdeal=run.peAcceptBobIdeal,
                     messagesIntact=run.messageBobReceived == run.messageBob,
                     hashMatched=False, tagMatched=accept_bob,
                     qpvAccepted=qpv_ok,
                     verificationAlice=run.verificationAlice,
                     verificationBob=run.verificationBob,
                     correctedKeysEqual=run.correctedEqual)
    key_a = (run.keyAlice if qpv_ok and run.peAcceptAlice
             and run.verificationAlice else None)
    key_b = (run.keyBob if accept_bob and run.peAcceptBob
             and run.verificationBob else None)
    out = ExchangeOutcome(keyA=key_a, keyB=key_b, indicators=ind,
                          transcriptDigest=_transcript_digest(
                              run.messageAlice, run.messageBobReceived,
                              transfer.receivedTag, transfer.cHat))
    out.check_invariants()
    return out


@dataclass
class ExchangeAggregate:
    trials: int
    counts: dict[str, int] = field(default_factory=dict)

    def add(self, outcome: ExchangeOutcome) -> None:
        flags = outcome.indicators.export_dict()
        flags["keyAPresent"] = outcome.keyA is not None
        flags["keyBPresent"] = outcome.keyB is not None
        flags["keyAWithoutKeyB"] = (outcome.keyA is not None
                                    and outcome.keyB is None)
        flags["bothKeysNonNull"] = (outcome.keyA is not None
                                    and outcome.keyB is not None)
        flags["keysEqual"] = (outcome.keyA is not None
                              and outcome.keyA == outcome.keyB)
        flags["aborted"] = outcome.keyA is None or outcome.keyB is None
        for name, value in flags.items():
            self.counts[name] = self.counts.get(name, 0) + bool(value)

    def rate(self, name: str) -> float:
        return self.counts.get(name, 0) / self.trials

    def export_rows(self) -> list[tuple[str, int, float]]:
        return [(name, cnt, cnt / self.trials)
                for name, cnt in sorted(self.counts.items())]


def run_exchange_trials(runner, trials: int, seed: int = 0,
                        collect=None) -> ExchangeAggregate:
    """Seeded independent repetitions of a protocol closure.

    `runner` maps a seed to an ExchangeOutcome; `collect`, when given,
    receives every outcome (the event experiments hang extra counters
    off it)."""
    if trials < 1:
        raise ValidationError("trials must be positive")
    seeds = np.random.SeedSequence(seed).generate_state(trials,
                                                        dtype=np.uint64)
    agg = ExchangeAggregate(trials=trials)
    for t in range(trials):
        outcome = runner(int(seeds[t]))
        agg.add(outcome)
        if collect is not None:
            collect(outcome)
    return agg
