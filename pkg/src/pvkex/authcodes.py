"""Short-key almost strongly 2-universal hashing and a constant-weight codec.

The hash family is a polynomial-evaluation construction over GF(2^t) for a
t-bit tag: the key splits into two halves (k1, k2), the message splits into
t-bit blocks m_1..m_l, and the tag is k2 + sum_i m_i * k1^i evaluated in the
field. Key halves longer than t bits are reduced into the field by polynomial
reduction, which maps them uniformly onto field elements. The collision
guarantee is stated for messages of a common length, which is how every
protocol in this package uses the family (fixed-length transcripts).

The codec maps an l_K-bit key injectively onto codewords of length 2*l_C+2
whose first and last bits are 1 and whose interior is a weight-l_C bitmask,
via the combinatorial number system (colexicographic subset ranking).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import MalformedCodewordError, ValidationError

# Minimal-integer irreducible polynomial over GF(2) per degree; bit i is the
# coefficient of x^i (degree 8 is the familiar 0x11B).
MINIMAL_IRREDUCIBLE = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11B,
    9: 0x203, 10: 0x409, 11: 0x805, 12: 0x1009, 13: 0x201B, 14: 0x4021,
    15: 0x8003, 16: 0x1002B, 17: 0x20009, 18: 0x40009, 19: 0x80027,
    20: 0x100009, 21: 0x200005, 22: 0x400003, 23: 0x800021, 24: 0x100001B,
    25: 0x2000009, 26: 0x400001B, 27: 0x8000027, 28: 0x10000003,
    29: 0x20000005, 30: 0x40000003, 31: 0x80000009, 32: 0x10000008D,
    33: 0x20000004B, 34: 0x40000001B, 35: 0x800000005, 36: 0x1000000035,
    37: 0x200000003F, 38: 0x4000000063, 39: 0x8000000011, 40: 0x10000000039,
    41: 0x20000000009, 42: 0x40000000027, 43: 0x80000000059,
    44: 0x100000000021, 45: 0x20000000001B, 46: 0x400000000003,
    47: 0x800000000021, 48: 0x100000000002D, 49: 0x2000000000071,
    50: 0x400000000001D, 51: 0x800000000004B, 52: 0x10000000000009,
    53: 0x20000000000047, 54: 0x4000000000007D, 55: 0x80000000000047,
    56: 0x100000000000095, 57: 0x200000000000011, 58: 0x400000000000063,
    59: 0x80000000000007B, 60: 0x1000000000000003, 61: 0x2000000000000027,
    62: 0x4000000000000069, 63: 0x8000000000000003, 64: 0x1000000000000001B,
}

# exp/log tables are built lazily for fields up to this degree
_TABLE_MAX_DEGREE = 16


def bits_to_int(bits) -> int:
    """Big-endian bits (string or 0/1 sequence) to an integer."""
    value = 0
    for b in bits:
        bit = int(b)
        if bit not in (0, 1):
            raise ValidationError(f"not a bit: {b!r}")
        value = (value << 1) | bit
    return value


def int_to_bits(value: int, width: int) -> str:
    """Integer to a big-endian bit string of exactly `width` characters."""
    if value < 0 or value >> width:
        raise ValidationError(f"value {value} does not fit in {width} bits")
    return format(value, f"0{width}b") if width else ""


class GF2m:
    """Arithmetic in GF(2^m) with a fixed embedded reduction polynomial."""

    def __init__(self, degree: int):
        if degree not in MINIMAL_IRREDUCIBLE:
            raise ValidationError(f"no embedded field polynomial for degree {degree}")
        self.degree = degree
        self.poly = MINIMAL_IRREDUCIBLE[degree]
        self.order = 1 << degree
        self._exp = None
        self._log = None
        if degree <= _TABLE_MAX_DEGREE:
            self._build_tables()

    def reduce(self, value: int) -> int:
        """Reduce an arbitrary nonnegative integer polynomial into the field."""
        deg = self.degree
        while value.bit_length() > deg:
            shift = value.bit_length() - deg - 1
            value ^= self.poly << shift
        return value

    def _mul_raw(self, a: int, b: int) -> int:
        # carry-less multiply then reduce
        acc = 0
        while b:
            if b & 1:
                acc ^= a
            b >>= 1
            a <<= 1
        return self.reduce(acc)

    def _build_tables(self) -> None:
        # find a multiplicative generator, then tabulate its powers
        group = self.order - 1
        factors = _prime_factors(group)
        g = 2 % self.order
        while True:
            if g != 0 and all(self._pow_raw(g, group // p) != 1 for p in factors):
                break
            g += 1
        exp = np.zeros(2 * group, dtype=np.int64)
        log = np.zeros(self.order, dtype=np.int64)
        acc = 1
        for i in range(group):
            exp[i] = acc
            log[acc] = i
            acc = self._mul_raw(acc, g)
        exp[group:] = exp[:group]
        self._exp, self._log = exp, log

    def _pow_raw(self, base: int, e: int) -> int:
        result = 1
        base = self.reduce(base)
        while e:
            if e & 1:
                result = self._mul_raw(result, base)
            base = self._mul_raw(base, base)
            e >>= 1
        return result

    def add(self, a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if self._exp is not None:
            if a == 0 or b == 0:
                return 0
            return int(self._exp[self._log[a] + self._log[b]])
        return self._mul_raw(a, b)

    def pow(self, base: int, e: int) -> int:
        if e < 0:
            raise ValidationError("negative exponent")
        if self._exp is not None:
            if base == 0:
                return 0 if e else 1
            return int(self._exp[(int(self._log[base]) * e) % (self.order - 1)])
        return self._pow_raw(base, e)

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self.pow(a, self.order - 2)


@lru_cache(maxsize=None)
def _field(degree: int) -> GF2m:
    return GF2m(degree)


@lru_cache(maxsize=None)
def _prime_factors(n: int) -> tuple:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1 if d == 2 else 2
    if n > 1:
        out.append(n)
    return tuple(out)


@dataclass(frozen=True)
class HashFamilyParams:
    """Sizing of the almost strongly 2-universal family for n-bit messages."""

    messageBits: int
    tagBits: int
    keyBits: int
    delta: float

    @property
    def halfKeyBits(self) -> int:
        return self.keyBits // 2


def hash_family_params(n: int, l_t: int) -> HashFamilyParams:
    """Key length and collision parameter for n-bit messages, l_t-bit tags.

    l_K = 2*floor(l_T + log2(n / l_T) + 1) and delta = 2^(-l_T + 1).
    """
    if l_t < 1 or n < l_t:
        raise ValidationError("need n >= l_t >= 1")
    # floor(l_t + log2(n/l_t) + 1) = floor(log2(n * 2^(l_t+1) / l_t)), exactly
    half = ((n << (l_t + 1)) // l_t).bit_length() - 1
    return HashFamilyParams(messageBits=n, tagBits=l_t, keyBits=2 * half,
                            delta=2.0 ** (-l_t + 1))


def _message_blocks(message_value: int, bit_len: int, l_t: int) -> list[int]:
    # split into big-endian l_t-bit blocks; a ragged tail is padded with a
    # single 1 bit then zeros (lengths are fixed per protocol use, so padding
    # only ever completes the final block)
    if bit_len % l_t:
        pad = l_t - (bit_len % l_t)
        message_value = (message_value << pad) | (1 << (pad - 1))
        bit_len += pad
    blocks = []
    n_blocks = bit_len // l_t
    mask = (1 << l_t) - 1
    for i in range(n_blocks):
        shift = (n_blocks - 1 - i) * l_t
        blocks.append((message_value >> shift) & mask)
    return blocks


def hash_tag(params: HashFamilyParams, key, message) -> str:
    """Tag = k2 + sum_i m_i * k1^i in GF(2^tagBits), as a bit string.

    `key` must be keyBits long; `message` at most messageBits long. Both are
    big-endian bit strings (or 0/1 sequences).
    """
    key_bits = key if isinstance(key, str) else "".join(str(int(b)) for b in key)
    msg_bits = message if isinstance(message, str) else "".join(str(int(b)) for b in message)
    if len(key_bits) != params.keyBits:
        raise ValidationError(f"key must be {params.keyBits} bits")
    if len(msg_bits) > params.messageBits:
        raise ValidationError("oversized message")
    field = _field(params.tagBits)
    half = params.halfKeyBits
    k1 = field.reduce(bits_to_int(key_bits[:half]))
    k2 = field.reduce(bits_to_int(key_bits[half:]))
    # Horner evaluation of sum m_i k1^i = (..((m_l k1 + m_{l-1}) k1 ..) + m_1) k1
    acc = 0
    for block in reversed(_message_blocks(bits_to_int(msg_bits), len(msg_bits), params.tagBits)):
        acc = field.mul(field.add(acc, block), k1)
    return int_to_bits(field.add(k2, acc), params.tagBits)


def tag_value(params: HashFamilyParams, key_value: int, message_value: int,
              message_bits: int) -> int:
    """Integer-valued fast path of `hash_tag` for hot Monte-Carlo loops."""
    field = _field(params.tagBits)
    half = params.halfKeyBits
    k1 = field.reduce(key_value >> half)
    k2 = field.reduce(key_value & ((1 << half) - 1))
    acc = 0
    for block in reversed(_message_blocks(message_value, message_bits, params.tagBits)):
        acc = field.mul(field.add(acc, block), k1)
    return field.add(k2, acc)


@dataclass(frozen=True)
class CodecParams:
    """Sizing of the constant-weight codeword for an l_K-bit key."""

    keyBits: int
    halfLength: int

    @property
    def codeLength(self) -> int:
        return 2 * self.halfLength + 2

    @property
    def interiorWeight(self) -> int:
        return self.halfLength

    @property
    def codewordWeight(self) -> int:
        return self.halfLength + 2


def codec_params(l_k: int) -> CodecParams:
    """Smallest l_C with binomial(2*l_C, l_C) > 2^l_K.

    Note: the asymptotic estimate l_C <= ceil(l_K/2)+1 fails already at
    l_K = 8 (C(10,5) = 252 <= 256), so no such cap is enforced here.
    """
    if l_k < 1:
        raise ValidationError("key length must be at least 1")
    target = 1 << l_k
    l_c = 1
    while math.comb(2 * l_c, l_c) <= target:
        l_c += 1
    return CodecParams(keyBits=l_k, halfLength=l_c)


def colex_rank(subset: tuple[int, ...]) -> int:
    """Colexicographic rank of a sorted tuple of distinct 1-based positions."""
    rank = 0
    for i, s in enumerate(sorted(subset), start=1):
        rank += math.comb(s - 1, i)
    return rank


def colex_unrank(rank: int, k: int) -> tuple[int, ...]:
    """Inverse of `colex_rank` for subsets of size k (1-based positions)."""
    out = []
    remaining = rank
    for i in range(k, 0, -1):
        # largest c with C(c, i) <= remaining; element is c+1
        c = i - 1
        while math.comb(c + 1, i) <= remaining:
            c += 1
        out.append(c + 1)
        remaining -= math.comb(c, i)
    return tuple(sorted(out))


def encode(params: CodecParams, key) -> str:
    """Codeword for a key: unranked interior mask framed by endpoint 1 bits."""
    key_bits = key if isinstance(key, str) else "".join(str(int(b)) for b in key)
    if len(key_bits) != params.keyBits:
        raise ValidationError(f"key must be {params.keyBits} bits")
    value = bits_to_int(key_bits)
    l_c = params.halfLength
    if value >= math.comb(2 * l_c, l_c):
        raise ValidationError("key value exceeds the codeword rank space")
    subset = colex_unrank(value, l_c)
    interior = ["0"] * (2 * l_c)
    for pos in subset:
        interior[pos - 1] = "1"
    return "1" + "".join(interior) + "1"


def decode(params: CodecParams, codeword) -> str:
    """Key for a codeword; rejects anything violating the codeword shape."""
    cw = codeword if isinstance(codeword, str) else "".join(str(int(b)) for b in codeword)
    if len(cw) != params.codeLength:
        raise MalformedCodewordError(f"codeword must be {params.codeLength} bits")
    if any(c not in "01" for c in cw):
        raise MalformedCodewordError("codeword must be binary")
    if cw[0] != "1" or cw[-1] != "1":
        raise MalformedCodewordError("endpoint bits must be 1")
    interior = cw[1:-1]
    if interior.count("1") != params.interiorWeight:
        raise MalformedCodewordError(
            f"interior weight must be {params.interiorWeight}")
    subset = tuple(i + 1 for i, c in enumerate(interior) if c == "1")
    value = colex_rank(subset)
    if value >> params.keyBits:
        raise MalformedCodewordError("codeword rank exceeds the key space")
    return int_to_bits(value, params.keyBits)
