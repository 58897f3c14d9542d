"""Chosen-plaintext recovery of an equivalent CECRT key.

The attack runs in three stages against an encryption oracle:

1. Query one random binary plaintext. Complementary residue patterns make
   the value n + 1 the mode of the pairwise sums of distinct cipher
   values, which pins the modulus product n.
2. From the same ciphertext, pool gcd(c-1, n), gcd(c, n) and
   n // gcd(c-1, n) over all blocks. Every pool element is a subset
   product of the true moduli; a greedy smallest-first coprime selection,
   refined by a gcd/quotient closure, isolates the unordered modulus set.
3. Query ceil(log2(L) / l) plaintexts whose elements spell out each
   position index in base-2^l digits. Inverting the confusion with the
   recovered moduli in ascending order reads off an equivalent
   permutation; the unknown within-block order cancels.

The recovered (n, modulus set, equivalent inverse permutation) decrypts
exactly like the true key. Total queries: 1 + ceil(log2(L) / l), plus any
counted retries when the histogram mode is ambiguous.
"""

import random
import shlex
import subprocess
import time
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from math import gcd, prod
from typing import Optional, Sequence

from .cipher import Ciphertext, SecretKey, ceil_log2, encrypt
from .crt import CrtBasis, build_basis
from .errors import (
    AmbiguousModeError,
    FormatError,
    HeaderMismatchError,
    InsufficientInformationError,
    OracleProtocolError,
    ValidationFailedError,
)
from .keystream import PermutationVector

DEFAULT_DENSITY = 0.5
DEFAULT_RETRIES = 3
_CLOSURE_MAX_ROUNDS = 64
_MAX_DISTINCT_VALUES = 4096


# -- oracle ports -------------------------------------------------------------


class EncryptionOracle:
    """Chosen-plaintext port: elements in, ciphertext out, one query at a time.

    Implementations must be deterministic (identical queries return
    identical ciphertexts). The counter increments exactly once per query;
    callers running concurrently must serialize access themselves.
    """

    def __init__(self):
        self.query_count = 0

    def query(self, plaintext: Sequence[int]) -> Ciphertext:
        self.query_count += 1
        return self._encrypt(plaintext)

    def _encrypt(self, plaintext: Sequence[int]) -> Ciphertext:
        raise NotImplementedError


class InProcessOracle(EncryptionOracle):
    """Oracle bound directly to the reference cipher under a fixed key."""

    def __init__(self, key: SecretKey, element_bits: int = 8):
        super().__init__()
        self.key = key
        self.element_bits = element_bits

    def _encrypt(self, plaintext: Sequence[int]) -> Ciphertext:
        return encrypt(self.key, plaintext, self.element_bits)


class SubprocessOracle(EncryptionOracle):
    """Oracle that shells out to an external encryptor per query.

    The plaintext goes to the child's stdin as raw bytes (one element per
    byte) and the ciphertext container is read back from its stdout. A
    nonzero exit status, undecodable output, or a length mismatch raises
    OracleProtocolError.
    """

    def __init__(self, command):
        super().__init__()
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)

    def _encrypt(self, plaintext: Sequence[int]) -> Ciphertext:
        from .formats import parse_ciphertext

        if any(not 0 <= p <= 0xFF for p in plaintext):
            raise OracleProtocolError("subprocess oracle carries one element per byte")
        try:
            proc = subprocess.run(
                self.argv, input=bytes(plaintext), capture_output=True, check=False
            )
        except OSError as exc:
            raise OracleProtocolError(f"cannot run oracle command: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode(errors="replace").strip()[-200:]
            raise OracleProtocolError(
                f"oracle exited with status {proc.returncode}: {tail}"
            )
        try:
            ct = parse_ciphertext(proc.stdout)
        except FormatError as exc:
            raise OracleProtocolError(f"oracle output unreadable: {exc}") from exc
        return ct


def _check_oracle_shape(ct: Ciphertext, length: int) -> None:
    if ct.length != length:
        raise OracleProtocolError(
            f"oracle answered for length {ct.length}, expected {length}"
        )
    if ct.block_size < 1 or ct.length % ct.block_size != 0:
        raise OracleProtocolError(f"oracle block size {ct.block_size} inconsistent")
    if len(ct.elements) * ct.block_size != ct.length:
        raise OracleProtocolError("oracle element count inconsistent with header")


# -- recovered-key types -------------------------------------------------------


@dataclass(frozen=True)
class SumMultiset:
    """Distinct cipher values and the histogram of their pairwise sums."""

    values: tuple[int, ...]
    sums: dict[int, int]

    @property
    def fallback_lower_bound(self) -> int:
        """max(cipher values) + 1: a lower bound on n, not n itself."""
        return self.values[-1] + 1

    def modes(self) -> tuple[int, tuple[int, ...]]:
        """Highest frequency and the sum values attaining it."""
        if not self.sums:
            return 0, ()
        top = max(self.sums.values())
        return top, tuple(sorted(v for v, f in self.sums.items() if f == top))


@dataclass(frozen=True)
class EquivalentKey:
    """Attacker's substitute key: n, ascending moduli, equivalent inverse W.

    w_inverse.forward is the map applied after inverse confusion; it
    absorbs the unknown within-block modulus order, so decryption matches
    the true key exactly even though the original order stays unknown.
    """

    n: int
    moduli_set: tuple[int, ...]
    basis: CrtBasis
    w_inverse: PermutationVector

    @classmethod
    def assemble(cls, n: int, moduli: Sequence[int], w_inverse: PermutationVector):
        mods = tuple(sorted(int(m) for m in moduli))
        for m in mods:
            if m < 256:
                raise ValueError(f"recovered modulus {m} below the scheme floor of 256")
        basis = build_basis(mods)
        if basis.product != n:
            raise ValueError(f"moduli product {basis.product} != n = {n}")
        return cls(n, mods, basis, w_inverse)


@dataclass
class AttackReport:
    """Bookkeeping for one attack run, for logs and the CLI report."""

    length: int = 0
    element_bits: int = 8
    queries: int = 0
    retries_used: int = 0
    low_confidence: bool = False
    n: int = 0
    moduli: tuple[int, ...] = ()
    fallback_lower_bound: int = 0
    stage_seconds: dict = field(default_factory=dict)


# -- stage 1: the modulus product ---------------------------------------------


def binary_plaintext(length: int, density: float = DEFAULT_DENSITY, rng=None) -> list[int]:
    """Independent 0/1 elements, each 1 with the given probability."""
    rng = rng if rng is not None else random.Random()
    return [1 if rng.random() < density else 0 for _ in range(length)]


def pairwise_sum_histogram(values: Sequence[int]) -> SumMultiset:
    """Distinct values plus frequencies of all sums of unordered distinct pairs."""
    distinct = tuple(sorted(set(values)))
    sums = Counter(a + b for a, b in combinations(distinct, 2))
    return SumMultiset(distinct, dict(sums))


def _modulus_from_sums(summ: SumMultiset) -> int:
    """Mode of the pairwise sums, minus one, validated against the values.

    A candidate only survives if every observed cipher element is below
    it; for small block sizes the histogram is flat and this filter is
    what singles out the one consistent candidate.
    """
    if len(summ.values) < 2:
        raise AmbiguousModeError(())
    top, modes = summ.modes()
    max_c = summ.values[-1]
    valid = [v for v in modes if v - 1 > max_c]
    if len(valid) == 1:
        return valid[0] - 1
    if len(modes) == 1:
        raise ValidationFailedError(
            f"histogram mode {modes[0]} implies n = {modes[0] - 1} "
            f"but a cipher element {max_c} was observed at or above it"
        )
    raise AmbiguousModeError(valid if valid else modes)


def recover_n(
    oracle: EncryptionOracle,
    length: int,
    k_hint: Optional[int] = None,
    *,
    density: float = DEFAULT_DENSITY,
    retries: int = DEFAULT_RETRIES,
    rng=None,
) -> tuple[int, SumMultiset]:
    """Recover n = n_1*...*n_k with one random binary chosen plaintext.

    Ambiguous histogram modes trigger fresh queries (each counted) up to
    `retries` times before AmbiguousModeError propagates. The returned
    SumMultiset exposes fallback_lower_bound = max(C) + 1, which is only a
    lower bound on n and must be verified independently before use.
    """
    rng = rng if rng is not None else random.Random()
    last_exc: Exception = AmbiguousModeError(())
    for _ in range(retries + 1):
        ct = oracle.query(binary_plaintext(length, density, rng))
        _check_oracle_shape(ct, length)
        summ = pairwise_sum_histogram(ct.elements)
        limit = (1 << k_hint) if k_hint is not None else _MAX_DISTINCT_VALUES
        if len(summ.values) > limit:
            raise ValidationFailedError(
                f"{len(summ.values)} distinct cipher values exceed {limit}; "
                "the oracle does not look like a CECRT binary encryption"
            )
        try:
            return _modulus_from_sums(summ), summ
        except AmbiguousModeError as exc:
            last_exc = exc
    raise last_exc


# -- stage 2: the unordered modulus set -----------------------------------------


def _gcd_pool(elements: Sequence[int], n: int) -> set[int]:
    pool: set[int] = set()
    for c in elements:
        g1 = gcd(abs(c - 1), n)
        pool.add(g1)
        pool.add(gcd(c, n))
        pool.add(n // g1)
    pool.discard(1)
    return pool


def _greedy_coprime(pool: set[int]) -> list[int]:
    chosen: list[int] = []
    for v in sorted(pool):
        if all(gcd(v, c) == 1 for c in chosen):
            chosen.append(v)
    return chosen


def moduli_from_binary(
    elements: Sequence[int], n: int, k_hint: Optional[int] = None
) -> tuple[int, ...]:
    """Extract the modulus set from the ciphertext of a binary plaintext.

    Pools gcd(c-1, n), gcd(c, n), n // gcd(c-1, n) over all blocks, then
    alternates greedy smallest-first coprime selection with a closure that
    adds nontrivial pairwise gcds and exact quotients. Success requires
    the selection to multiply out to n (and to match k_hint when given);
    otherwise InsufficientInformationError is raised once the pool stops
    growing.
    """
    pool = _gcd_pool(elements, n)
    if len(pool) > _MAX_DISTINCT_VALUES:
        raise InsufficientInformationError(
            f"{len(pool)} distinct divisors pooled; the ciphertext does not "
            "look like a CECRT encryption of a binary plaintext"
        )
    for _ in range(_CLOSURE_MAX_ROUNDS):
        chosen = _greedy_coprime(pool)
        if (
            len(chosen) >= 2
            and prod(chosen) == n
            and (k_hint is None or len(chosen) == k_hint)
        ):
            return tuple(chosen)
        fresh: set[int] = set()
        ordered = sorted(pool)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                g = gcd(a, b)
                if g > 1:
                    fresh.add(g)
                if b % a == 0:
                    fresh.add(b // a)
        fresh.discard(1)
        if fresh <= pool:
            break
        pool |= fresh
    raise InsufficientInformationError(
        "gcd closure stalled before isolating the modulus set; "
        "retry with a denser or different binary chosen plaintext"
    )


def recover_moduli_set(
    oracle: EncryptionOracle,
    n: int,
    length: int,
    *,
    density: float = DEFAULT_DENSITY,
    rng=None,
) -> list[int]:
    """Query one binary plaintext and extract the modulus set, ascending."""
    rng = rng if rng is not None else random.Random()
    ct = oracle.query(binary_plaintext(length, density, rng))
    _check_oracle_shape(ct, length)
    return list(moduli_from_binary(ct.elements, n, k_hint=ct.block_size))


def recover_moduli_set_differential(
    oracle: EncryptionOracle,
    n: int,
    length: int,
    *,
    density: float = DEFAULT_DENSITY,
    rng=None,
) -> list[int]:
    """Modulus-set recovery from a plaintext pair whose difference is binary.

    Costs two queries instead of one; the per-block difference modulo n
    equals the ciphertext the binary difference pattern would produce, so
    the same extraction applies.
    """
    rng = rng if rng is not None else random.Random()
    base = [rng.randrange(255) for _ in range(length)]
    delta = binary_plaintext(length, density, rng)
    ct_a = oracle.query(base)
    ct_b = oracle.query([p + d for p, d in zip(base, delta)])
    _check_oracle_shape(ct_a, length)
    _check_oracle_shape(ct_b, length)
    diffs = [(b - a) % n for a, b in zip(ct_a.elements, ct_b.elements)]
    return list(moduli_from_binary(diffs, n, k_hint=ct_a.block_size))


# -- stage 3: the equivalent permutation ----------------------------------------


def digit_query_count(length: int, element_bits: int) -> int:
    """ceil(log2(length) / element_bits): plaintexts needed to spell indices."""
    if length < 2:
        return 1
    return (ceil_log2(length) + element_bits - 1) // element_bits


def digit_plaintext(length: int, digit: int, element_bits: int) -> list[int]:
    """Plaintext whose element i is digit `digit` of i in base 2**element_bits."""
    mask = (1 << element_bits) - 1
    shift = element_bits * digit
    return [(i >> shift) & mask for i in range(length)]


def recover_permutation(
    oracle: EncryptionOracle,
    n: int,
    moduli_set: Sequence[int],
    length: int,
    element_bits: int = 8,
) -> PermutationVector:
    """Read off the equivalent inverse permutation from digit-plane queries.

    Each queried plaintext carries one base-2^l digit of every position
    index. Inverse confusion under the ascending modulus order recovers
    those digits in permuted positions; reassembling them yields a map
    that must be a bijection (NotBijectiveError otherwise, which signals a
    wrong n or modulus set). The returned vector's forward direction is
    the equivalent inverse permutation used after inverse confusion.
    """
    mods = sorted(moduli_set)
    k = len(mods)
    if length % k != 0:
        raise ValidationFailedError(f"length {length} not a multiple of k={k}")
    if any((1 << element_bits) > m for m in mods):
        raise ValidationFailedError(
            f"{element_bits}-bit digits would be truncated by modulus {min(mods)}"
        )
    queries = digit_query_count(length, element_bits)
    assembled = [0] * length
    for digit in range(queries):
        ct = oracle.query(digit_plaintext(length, digit, element_bits))
        _check_oracle_shape(ct, length)
        if ct.block_size != k:
            raise ValidationFailedError(
                f"oracle block size {ct.block_size} != recovered k {k}"
            )
        shift = element_bits * digit
        idx = 0
        for c in ct.elements:
            for m in mods:
                assembled[idx] += (c % m) << shift
                idx += 1
    equivalent_forward = PermutationVector.from_forward(assembled)
    return PermutationVector(equivalent_forward.inverse, equivalent_forward.forward)


# -- full pipeline ---------------------------------------------------------------


def equivalent_decrypt(ek: EquivalentKey, ciphertext: Ciphertext) -> list[int]:
    """Decrypt with the recovered key: inverse confusion, then equivalent W."""
    k = len(ek.moduli_set)
    length = len(ek.w_inverse)
    if ciphertext.block_size != k:
        raise HeaderMismatchError(
            f"ciphertext block size {ciphertext.block_size} != recovered k {k}"
        )
    if ciphertext.length != length or len(ciphertext.elements) * k != length:
        raise HeaderMismatchError(
            f"ciphertext length {ciphertext.length} does not match the recovered "
            f"permutation over {length} positions"
        )
    h = [0] * length
    idx = 0
    for c in ciphertext.elements:
        for m in ek.moduli_set:
            h[idx] = c % m
            idx += 1
    return [h[i] for i in ek.w_inverse.forward]


def run_attack(
    oracle: EncryptionOracle,
    length: int,
    element_bits: int = 8,
    *,
    density: float = DEFAULT_DENSITY,
    retries: int = DEFAULT_RETRIES,
    differential: bool = False,
    rng=None,
) -> tuple[EquivalentKey, AttackReport]:
    """Run all three stages and self-check the result; returns key + report.

    Stage 1 retries with fresh binary plaintexts (each counted) when the
    histogram mode is unusable; if it never settles, max(C) + 1 is tried
    as a LOW-CONFIDENCE guess and kept only when the gcd closure confirms
    it as an exact product. With differential=True the modulus set is
    recovered from a plaintext pair whose difference is binary, costing
    two extra queries. The assembled key must reproduce the stage-1
    chosen plaintext before it is returned.
    """
    if retries < 0:
        raise ValueError("retries must be >= 0")
    rng = rng if rng is not None else random.Random()
    report = AttackReport(length=length, element_bits=element_bits)
    queries_before = oracle.query_count
    t0 = time.perf_counter()

    n = None
    last_exc: Optional[Exception] = None
    binary_pt: list[int] = []
    binary_ct: Optional[Ciphertext] = None
    for attempt in range(retries + 1):
        binary_pt = binary_plaintext(length, density, rng)
        binary_ct = oracle.query(binary_pt)
        _check_oracle_shape(binary_ct, length)
        limit = min(1 << binary_ct.block_size, _MAX_DISTINCT_VALUES)
        if len(set(binary_ct.elements)) > limit:
            raise ValidationFailedError(
                f"more than {limit} distinct cipher values for a binary "
                "plaintext; the oracle does not look like a CECRT encryption"
            )
        summ = pairwise_sum_histogram(binary_ct.elements)
        report.fallback_lower_bound = summ.fallback_lower_bound
        try:
            n = _modulus_from_sums(summ)
            report.retries_used = attempt
            break
        except (AmbiguousModeError, ValidationFailedError) as exc:
            last_exc = exc
            report.retries_used = attempt
    t1 = time.perf_counter()
    report.stage_seconds["modulus"] = t1 - t0

    assert binary_ct is not None
    if n is not None and differential:
        moduli = tuple(
            recover_moduli_set_differential(
                oracle, n, length, density=density, rng=rng
            )
        )
    elif n is not None:
        moduli = moduli_from_binary(binary_ct.elements, n, k_hint=binary_ct.block_size)
    else:
        guess = report.fallback_lower_bound
        try:
            moduli = moduli_from_binary(
                binary_ct.elements, guess, k_hint=binary_ct.block_size
            )
        except InsufficientInformationError:
            raise last_exc from None
        n = guess
        report.low_confidence = True
    t2 = time.perf_counter()
    report.stage_seconds["moduli_set"] = t2 - t1

    if length % len(moduli) != 0:
        raise ValidationFailedError(
            f"recovered k = {len(moduli)} does not divide the length {length}"
        )
    w_inverse = recover_permutation(oracle, n, moduli, length, element_bits)
    try:
        ek = EquivalentKey.assemble(n, moduli, w_inverse)
    except ValueError as exc:
        raise ValidationFailedError(str(exc)) from exc
    if equivalent_decrypt(ek, binary_ct) != binary_pt:
        raise ValidationFailedError(
            "equivalent key failed to reproduce the stage-1 chosen plaintext"
        )
    t3 = time.perf_counter()
    report.stage_seconds["permutation"] = t3 - t2
    report.stage_seconds["total"] = t3 - t0
    report.queries = oracle.query_count - queries_before
    report.n = n
    report.moduli = tuple(moduli)
    return ek, report


def full_attack(
    oracle: EncryptionOracle,
    length: int,
    element_bits: int = 8,
    *,
    density: float = DEFAULT_DENSITY,
    retries: int = DEFAULT_RETRIES,
    differential: bool = False,
    rng=None,
) -> EquivalentKey:
    """Recover an equivalent key with 1 + ceil(log2(length)/l) oracle queries.

    differential=True swaps in the plaintext-pair modulus recovery and
    adds two queries.
    """
    ek, _ = run_attack(
        oracle,
        length,
        element_bits,
        density=density,
        retries=retries,
        differential=differential,
        rng=rng,
    )
    return ek
