"""Identity <-> bit-array coding with an optional systematic Reed-Solomon layer.

Bit layout
----------
A codeword is a tuple of 0/1 ints, index 0 being signaling account 1.
When RS redundancy is enabled the bits are grouped into contiguous r-bit
symbols; the most significant bit of each symbol sits at the lowest account
index. Payload symbols come first, parity symbols follow.

The RS code works over GF(2^r) with generator alpha = 2, first consecutive
root alpha^0, and generator polynomial g(x) = prod_{i<K} (x - alpha^i). The
code is shortened: n = payload_symbols + K must not exceed 2^r - 1.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

Codeword = tuple[int, ...]

# Primitive polynomials (with the x^r term) for the supported symbol sizes.
PRIMITIVE_POLYS = {2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x89, 8: 0x11D}

REGISTRY_FORMAT_VERSION = 1


class CodecError(ValueError):
    pass


class DuplicateIdentity(CodecError):
    pass


class CapacityExceeded(CodecError):
    pass


class GeometryMismatch(CodecError):
    pass


class DetectedUncorrectable(CodecError):
    """More symbol errors than the code can fix, but the damage was detected."""


def derive_payload_bits(n_targets: int) -> int:
    """Smallest m with 2**m >= n_targets."""
    if n_targets < 1:
        raise ValueError(f"n_targets must be >= 1, got {n_targets}")
    return (n_targets - 1).bit_length()


@dataclass(frozen=True)
class CodeConfig:
    n_targets: int
    payload_bits: int
    rs_symbol_bits: int = 4
    rs_redundant_symbols: int = 0

    def __post_init__(self) -> None:
        if self.n_targets < 0 or self.payload_bits < 0:
            raise GeometryMismatch("counts must be non-negative")
        if self.rs_redundant_symbols < 0:
            raise GeometryMismatch("rs_redundant_symbols must be non-negative")
        if self.rs_symbol_bits < 1:
            raise GeometryMismatch("rs_symbol_bits must be positive")
        if 2**self.payload_bits < self.n_targets:
            raise CapacityExceeded(
                f"{self.payload_bits} bits cannot address {self.n_targets} targets"
            )
        if self.rs_redundant_symbols:
            r = self.rs_symbol_bits
            if r not in PRIMITIVE_POLYS:
                raise GeometryMismatch(f"unsupported RS symbol size r={r}")
            if self.payload_bits % r:
                raise GeometryMismatch(
                    f"payload_bits={self.payload_bits} not divisible by r={r}"
                )
            if self.total_symbols > 2**r - 1:
                raise GeometryMismatch(
                    f"{self.total_symbols} symbols exceed RS length limit {2**r - 1}"
                )

    @classmethod
    def for_targets(
        cls, n_targets: int, rs_symbol_bits: int = 4, rs_redundant_symbols: int = 0
    ) -> "CodeConfig":
        """Derive the minimal payload width, padded to whole symbols when RS is on."""
        m = derive_payload_bits(n_targets) if n_targets else 0
        if rs_redundant_symbols and m % rs_symbol_bits:
            m += rs_symbol_bits - m % rs_symbol_bits
        return cls(n_targets, m, rs_symbol_bits, rs_redundant_symbols)

    @property
    def parity_bits(self) -> int:
        return self.rs_symbol_bits * self.rs_redundant_symbols

    @property
    def total_bits(self) -> int:
        return self.payload_bits + self.parity_bits

    @property
    def payload_symbols(self) -> int:
        return self.payload_bits // self.rs_symbol_bits

    @property
    def total_symbols(self) -> int:
        return self.payload_symbols + self.rs_redundant_symbols

    @property
    def correctable_symbols(self) -> int:
        return self.rs_redundant_symbols // 2


# --------------------------------------------------------------------------
# GF(2^r)
# --------------------------------------------------------------------------


class GaloisField:
    def __init__(self, r: int):
        if r not in PRIMITIVE_POLYS:
            raise GeometryMismatch(f"unsupported field GF(2^{r})")
        self.r = r
        self.order = (1 << r) - 1
        self.exp = [0] * (2 * self.order)
        self.log = [0] * (1 << r)
        x = 1
        for i in range(self.order):
            self.exp[i] = x
            self.log[x] = i
            x <<= 1
            if x >> r:
                x ^= PRIMITIVE_POLYS[r]
        for i in range(self.order, 2 * self.order):
            self.exp[i] = self.exp[i - self.order]

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF")
        if a == 0:
            return 0
        return self.exp[(self.log[a] - self.log[b]) % self.order]

    def pow_alpha(self, e: int) -> int:
        return self.exp[e % self.order]

    def poly_eval_low(self, poly: Sequence[int], x: int) -> int:
        """Evaluate a lowest-degree-first polynomial."""
        y = 0
        for c in reversed(poly):
            y = self.mul(y, x) ^ c
        return y

    def poly_eval_high(self, poly: Sequence[int], x: int) -> int:
        """Evaluate a highest-degree-first polynomial."""
        y = 0
        for c in poly:
            y = self.mul(y, x) ^ c
        return y


@lru_cache(maxsize=None)
def _field(r: int) -> GaloisField:
    return GaloisField(r)


@lru_cache(maxsize=None)
def _generator_poly(r: int, n_sym: int) -> tuple[int, ...]:
    # highest-degree first, monic
    gf = _field(r)
    g = [1]
    for i in range(n_sym):
        root = gf.pow_alpha(i)
        out = g + [0]
        for j, c in enumerate(g):
            out[j + 1] ^= gf.mul(c, root)
        g = out
    return tuple(g)


def bits_to_symbols(bits: Sequence[int], r: int) -> list[int]:
    out = []
    for i in range(0, len(bits), r):
        v = 0
        for b in bits[i : i + r]:
            v = (v << 1) | b
        out.append(v)
    return out


def symbols_to_bits(symbols: Iterable[int], r: int) -> Codeword:
    out: list[int] = []
    for s in symbols:
        out.extend((s >> (r - 1 - i)) & 1 for i in range(r))
    return tuple(out)


def int_to_bits(value: int, width: int) -> Codeword:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


def bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def str_to_bits(text: str) -> Codeword:
    if any(c not in "01" for c in text):
        raise ValueError(f"not a bit string: {text!r}")
    return tuple(int(c) for c in text)


def _check_bits(bits: Sequence[int]) -> None:
    if any(b not in (0, 1) for b in bits):
        raise GeometryMismatch("codeword entries must be 0 or 1")


def rs_encode(payload: Sequence[int], config: CodeConfig) -> Codeword:
    """Append RS parity to a payload; the payload stays as the prefix."""
    if len(payload) != config.payload_bits:
        raise GeometryMismatch(
            f"payload has {len(payload)} bits, expected {config.payload_bits}"
        )
    _check_bits(payload)
    payload = tuple(payload)
    if not config.rs_redundant_symbols:
        return payload
    r, n_sym = config.rs_symbol_bits, config.rs_redundant_symbols
    gf = _field(r)
    gen = _generator_poly(r, n_sym)
    msg = bits_to_symbols(payload, r)
    rem = msg + [0] * n_sym
    for i in range(len(msg)):
        coef = rem[i]
        if coef:
            for j in range(1, len(gen)):
                rem[i + j] ^= gf.mul(gen[j], coef)
    return payload + symbols_to_bits(rem[len(msg) :], r)


@dataclass(frozen=True)
class DecodeOutcome:
    payload: Codeword
    corrected_symbols: int


def rs_syndromes(received: Sequence[int], config: CodeConfig) -> list[int]:
    gf = _field(config.rs_symbol_bits)
    symbols = bits_to_symbols(received, config.rs_symbol_bits)
    return [
        gf.poly_eval_high(symbols, gf.pow_alpha(i))
        for i in range(config.rs_redundant_symbols)
    ]


def _berlekamp_massey(gf: GaloisField, synd: Sequence[int]) -> list[int]:
    # error locator, lowest degree first
    c, b = [1], [1]
    big_l, m, last = 0, 1, 1
    for n, s in enumerate(synd):
        d = s
        for i in range(1, big_l + 1):
            if i < len(c):
                d ^= gf.mul(c[i], synd[n - i])
        if d == 0:
            m += 1
            continue
        coef = gf.div(d, last)
        shifted = [0] * m + [gf.mul(coef, x) for x in b]
        new_c = c + [0] * max(0, len(shifted) - len(c))
        for i, x in enumerate(shifted):
            new_c[i] ^= x
        if 2 * big_l <= n:
            b, big_l, last, m = c, n + 1 - big_l, d, 1
        else:
            m += 1
        c = new_c
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if len(c) - 1 != big_l:
        raise DetectedUncorrectable("locator degree does not match error count")
    return c


def rs_decode(received: Sequence[int], config: CodeConfig) -> DecodeOutcome:
    """Correct up to floor(K/2) symbol errors.

    Raises DetectedUncorrectable when the syndrome pattern cannot be explained
    by a correctable error set inside the (shortened) codeword.
    """
    if len(received) != config.total_bits:
        raise GeometryMismatch(
            f"received {len(received)} bits, expected {config.total_bits}"
        )
    _check_bits(received)
    received = tuple(received)
    m = config.payload_bits
    if not config.rs_redundant_symbols:
        return DecodeOutcome(received[:m], 0)

    r = config.rs_symbol_bits
    gf = _field(r)
    synd = rs_syndromes(received, config)
    if not any(synd):
        return DecodeOutcome(received[:m], 0)

    locator = _berlekamp_massey(gf, synd)
    n_err = len(locator) - 1
    if n_err > config.correctable_symbols:
        raise DetectedUncorrectable(f"{n_err} symbol errors exceed the bound")

    n = config.total_symbols
    # Chien search over every field position; roots beyond n are detected.
    positions = []
    for p in range(gf.order):
        if gf.poly_eval_low(locator, gf.pow_alpha(-p)) == 0:
            positions.append(p)
    if len(positions) != n_err or any(p >= n for p in positions):
        raise DetectedUncorrectable("error locations fall outside the codeword")

    # Forney (first consecutive root alpha^0): Y = X * Omega(X^-1) / Lambda'(X^-1)
    omega = [0] * config.rs_redundant_symbols
    for i, s in enumerate(synd):
        for j, lam in enumerate(locator):
            if i + j < len(omega):
                omega[i + j] ^= gf.mul(s, lam)
    deriv = [locator[i] if i % 2 else 0 for i in range(1, len(locator))]

    symbols = bits_to_symbols(received, r)
    for p in positions:
        x = gf.pow_alpha(p)
        x_inv = gf.pow_alpha(-p)
        denom = gf.poly_eval_low(deriv, x_inv)
        if denom == 0:
            raise DetectedUncorrectable("degenerate error evaluator")
        magnitude = gf.mul(x, gf.div(gf.poly_eval_low(omega, x_inv), denom))
        symbols[n - 1 - p] ^= magnitude

    corrected = symbols_to_bits(symbols, r)
    if any(rs_syndromes(corrected, config)):
        raise DetectedUncorrectable("residual syndrome after correction")
    return DecodeOutcome(corrected[:m], n_err)


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


class TargetRegistry:
    """Bijection between target identities and payload codewords."""

    def __init__(
        self,
        config: CodeConfig,
        entries: Mapping[str, Sequence[int]],
        shuffle_seed: int | None = None,
    ):
        self.config = config
        self.shuffle_seed = shuffle_seed
        self._by_identity: dict[str, Codeword] = {}
        self._by_codeword: dict[Codeword, str] = {}
        for identity, bits in entries.items():
            _validate_identity(identity)
            word = tuple(bits)
            if len(word) != config.payload_bits:
                raise GeometryMismatch(
                    f"{identity!r} has {len(word)} bits, expected {config.payload_bits}"
                )
            _check_bits(word)
            if word in self._by_codeword:
                raise DuplicateIdentity(
                    f"{identity!r} and {self._by_codeword[word]!r} share codeword "
                    f"{bits_to_str(word)}"
                )
            self._by_identity[identity] = word
            self._by_codeword[word] = identity
        if len(self._by_identity) > 2**config.payload_bits:
            raise CapacityExceeded("more identities than codewords")
        self._encoded: dict[str, Codeword] = {}

    def __len__(self) -> int:
        return len(self._by_identity)

    def __iter__(self) -> Iterator[str]:
        return iter(self._by_identity)

    def __contains__(self, identity: object) -> bool:
        return identity in self._by_identity

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TargetRegistry):
            return NotImplemented
        return (
            self.config == other.config
            and self.shuffle_seed == other.shuffle_seed
            and list(self._by_identity.items()) == list(other._by_identity.items())
        )

    @property
    def identities(self) -> list[str]:
        return list(self._by_identity)

    def codeword(self, identity: str) -> Codeword:
        return self._by_identity[identity]

    def encoded(self, identity: str) -> Codeword:
        """RS-encoded codeword, i.e. the blocking pattern over signaling accounts."""
        if identity not in self._encoded:
            self._encoded[identity] = rs_encode(self._by_identity[identity], self.config)
        return self._encoded[identity]

    def lookup(self, payload: Sequence[int]) -> str | None:
        return self._by_codeword.get(tuple(payload))

    def items(self) -> Iterator[tuple[str, Codeword]]:
        return iter(self._by_identity.items())

    # -- text format -------------------------------------------------------

    def to_text(self) -> str:
        c = self.config
        seed = "-" if self.shuffle_seed is None else str(self.shuffle_seed)
        lines = [
            "# blockleak target registry",
            f"version\t{REGISTRY_FORMAT_VERSION}",
            f"n_targets\t{c.n_targets}",
            f"payload_bits\t{c.payload_bits}",
            f"rs_symbol_bits\t{c.rs_symbol_bits}",
            f"rs_redundant_symbols\t{c.rs_redundant_symbols}",
            f"shuffle_seed\t{seed}",
            "---",
        ]
        lines += [f"{ident}\t{bits_to_str(w)}" for ident, w in self.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TargetRegistry":
        header: dict[str, str] = {}
        entries: dict[str, Codeword] = {}
        in_body = False
        for lineno, raw in enumerate(text.splitlines(), 1):
            if not raw or (raw.startswith("#") and not in_body):
                continue
            if raw == "---":
                in_body = True
                continue
            key, sep, value = raw.rpartition("\t")
            if not sep:
                raise ValueError(f"line {lineno}: expected a tab-separated record")
            if in_body:
                if key in entries:
                    raise DuplicateIdentity(f"line {lineno}: {key!r} listed twice")
                entries[key] = str_to_bits(value)
            else:
                header[key] = value
        if int(header.get("version", -1)) != REGISTRY_FORMAT_VERSION:
            raise ValueError(f"unsupported registry version {header.get('version')}")
        config = CodeConfig(
            int(header["n_targets"]),
            int(header["payload_bits"]),
            int(header["rs_symbol_bits"]),
            int(header["rs_redundant_symbols"]),
        )
        seed = header.get("shuffle_seed", "-")
        return cls(config, entries, None if seed == "-" else int(seed))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TargetRegistry":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _validate_identity(identity: str) -> None:
    if not identity or any(c in identity for c in "\t\r\n"):
        raise ValueError(f"identity must be non-empty without tabs/newlines: {identity!r}")


def assign_codewords(
    identities: Sequence[str],
    config: CodeConfig,
    shuffle_seed: int | None = None,
) -> TargetRegistry:
    """Identity i gets the binary form of i, or of a seeded draw from [0, 2^m)."""
    dups = [x for x, count in Counter(identities).items() if count > 1]
    if dups:
        raise DuplicateIdentity(f"{dups[0]!r} appears more than once")
    space = 2**config.payload_bits
    if len(identities) > space:
        raise CapacityExceeded(
            f"{len(identities)} identities exceed 2^{config.payload_bits} codewords"
        )
    if shuffle_seed is None:
        values: Sequence[int] = range(len(identities))
    else:
        values = random.Random(shuffle_seed).sample(range(space), len(identities))
    entries = {
        ident: int_to_bits(v, config.payload_bits) for ident, v in zip(identities, values)
    }
    return TargetRegistry(config, entries, shuffle_seed)


def decode_user(payload: Sequence[int], registry: TargetRegistry) -> str | None:
    """Identity holding this payload, or None if the codeword is unassigned."""
    if len(payload) != registry.config.payload_bits:
        raise GeometryMismatch(
            f"payload has {len(payload)} bits, expected {registry.config.payload_bits}"
        )
    return registry.lookup(payload)
