"""The CECRT cipher: permutation stage followed by CRT confusion.

Encryption permutes the plain elements with the chaos-derived vector W,
then maps each block of k permuted elements, read as residues, to the
unique integer below n = n_1*...*n_k with those residues. Decryption
reduces each cipher element modulo every modulus and undoes W.
"""

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Sequence

from .crt import CrtBasis, build_basis
from .errors import (
    DivergenceError,
    ExhaustedError,
    HeaderMismatchError,
    LengthNotMultipleError,
    NotCoprimeError,
    RangeViolationError,
)
from .keystream import ChaosParams, derive_permutation, iterate_chaos

MIN_MODULUS = 256
DEFAULT_ELEMENT_BITS = 8

# Key configuration shipped with the analyzed scheme; also the base point
# for keygen's seeded perturbation.
REFERENCE_MODULI = (311, 313, 317, 293)
REFERENCE_CHAOS = ChaosParams(0.0394, 0.001, -0.95, -1.3, -0.45, 2.4, 1.05)


@dataclass(frozen=True)
class SecretKey:
    """Ordered coprime moduli plus the chaos configuration deriving W."""

    moduli: tuple[int, ...]
    chaos: ChaosParams

    def __post_init__(self):
        object.__setattr__(self, "moduli", tuple(int(m) for m in self.moduli))
        if len(self.moduli) < 2:
            raise ValueError("need at least two moduli")
        for m in self.moduli:
            if m < MIN_MODULUS:
                raise ValueError(f"modulus {m} < {MIN_MODULUS}")
        for i in range(len(self.moduli)):
            for j in range(i + 1, len(self.moduli)):
                g = gcd(self.moduli[i], self.moduli[j])
                if g > 1:
                    raise NotCoprimeError(i, j, g)

    @property
    def block_size(self) -> int:
        return len(self.moduli)


@dataclass(frozen=True)
class Ciphertext:
    """Cipher elements plus the container header (L, k, element width)."""

    elements: tuple[int, ...]
    length: int
    block_size: int
    width_bytes: int


def ceil_log2(n: int) -> int:
    """Smallest b with 2**b >= n, for n >= 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()


def element_width_bytes(n: int) -> int:
    """Fixed serialization width for cipher elements in [0, n)."""
    return (ceil_log2(n) + 7) // 8


@lru_cache(maxsize=64)
def key_basis(moduli: tuple[int, ...]) -> CrtBasis:
    return build_basis(moduli)


def keygen(
    k: int,
    bit_range: tuple[int, int] = (9, 12),
    seed: int = 0,
    max_attempts: int = 10**6,
) -> SecretKey:
    """Sample k pairwise-coprime moduli and a perturbed chaos configuration.

    bit_range = (lo, hi) selects moduli whose bit lengths lie in [lo, hi],
    i.e. values in [2**(lo-1), 2**hi). lo must be at least 9 so every
    modulus clears the scheme's floor of 256. Each draw conflicting with an
    already-accepted modulus is rejected and redrawn; ExhaustedError is
    raised after max_attempts draws.

    Only the initial condition of the chaos map is perturbed (control
    parameters keep their known-bounded values); the candidate is test-run
    for a few thousand steps and redrawn if it diverges.
    """
    lo, hi = bit_range
    if k < 2:
        raise ValueError("k must be >= 2")
    if lo < 9:
        raise ValueError("bit_range low end must be >= 9 so moduli are >= 256")
    if hi < lo:
        raise ValueError("bit_range high end below low end")
    rng = random.Random(seed)
    low, high = 1 << (lo - 1), 1 << hi
    moduli: list[int] = []
    attempts = 0
    while len(moduli) < k:
        attempts += 1
        if attempts > max_attempts:
            raise ExhaustedError(
                f"no coprime candidate after {max_attempts} draws (have {len(moduli)}/{k})"
            )
        candidate = rng.randrange(low, high)
        if all(gcd(candidate, m) == 1 for m in moduli):
            moduli.append(candidate)
    for _ in range(64):
        chaos = ChaosParams(
            REFERENCE_CHAOS.x0 + rng.uniform(-0.02, 0.02),
            REFERENCE_CHAOS.y0 + rng.uniform(-0.02, 0.02),
            REFERENCE_CHAOS.a1,
            REFERENCE_CHAOS.a2,
            REFERENCE_CHAOS.b1,
            REFERENCE_CHAOS.b2,
            REFERENCE_CHAOS.b3,
        )
        try:
            iterate_chaos(chaos, count=2048)
        except DivergenceError:
            continue
        return SecretKey(tuple(moduli), chaos)
    raise ExhaustedError("no bounded chaos configuration found")


def _check_elements(elements: Sequence[int], element_bits: int, moduli: Sequence[int]):
    limit = 1 << element_bits
    if limit > min(moduli):
        raise ValueError(
            f"{element_bits}-bit elements do not fit below the smallest modulus "
            f"{min(moduli)}; the scheme is undefined for this configuration"
        )
    for i, p in enumerate(elements):
        if not 0 <= p < limit:
            raise RangeViolationError(f"element {p} at position {i} outside [0, {limit})")


def encrypt(
    key: SecretKey,
    plaintext: Sequence[int],
    element_bits: int = DEFAULT_ELEMENT_BITS,
) -> Ciphertext:
    """Permute, then confuse each block of k elements into one integer below n."""
    k = key.block_size
    length = len(plaintext)
    if length == 0 or length % k != 0:
        raise LengthNotMultipleError(f"plaintext length {length} not a positive multiple of k={k}")
    _check_elements(plaintext, element_bits, key.moduli)
    basis = key_basis(key.moduli)
    w = derive_permutation(key.chaos, length)
    permuted = [plaintext[i] for i in w.forward]
    coeffs = [e * c for e, c in zip(basis.inverses, basis.cofactors)]
    n = basis.product
    out = []
    for j in range(0, length, k):
        acc = 0
        for s in range(k):
            acc += coeffs[s] * permuted[j + s]
        out.append(acc % n)
    return Ciphertext(tuple(out), length, k, element_width_bytes(n))


def decrypt(key: SecretKey, ciphertext: Ciphertext) -> list[int]:
    """Reduce each cipher element modulo every modulus, then undo W.

    Total for any element values: an element at or above n still reduces,
    it just cannot have come from a faithful encryption under this key.
    """
    k = key.block_size
    if ciphertext.block_size != k:
        raise HeaderMismatchError(
            f"ciphertext block size {ciphertext.block_size} != key block size {k}"
        )
    length = ciphertext.length
    if length % k != 0 or len(ciphertext.elements) * k != length:
        raise HeaderMismatchError(
            f"header length {length} inconsistent with {len(ciphertext.elements)} elements of k={k}"
        )
    moduli = key.moduli
    h = [0] * length
    idx = 0
    for c in ciphertext.elements:
        for m in moduli:
            h[idx] = c % m
            idx += 1
    w = derive_permutation(key.chaos, length)
    return [h[i] for i in w.inverse]


def expansion_ratio(
    key: SecretKey, element_bits: int = DEFAULT_ELEMENT_BITS
) -> tuple[Fraction, Fraction]:
    """Cipher-element bit size over plain-block bit size, with its lower bound.

    The numerator is the per-slot rendering size sum(ceil(log2 n_i)); the
    second value returned is the bound 1 - (k-1)/sum(ceil(log2 n_i)) that
    the ratio always strictly exceeds. A ratio above 1 means the claimed
    compression actually expands the data.
    """
    k = key.block_size
    slot_bits = sum(ceil_log2(m) for m in key.moduli)
    ratio = Fraction(slot_bits, k * element_bits)
    bound = 1 - Fraction(k - 1, slot_bits)
    return ratio, bound
