"""Defect metrics for the CECRT scheme.

Everything here quantifies a structural weakness: the expansion ratio of
the claimed compression, the constant-difference insensitivity, the cost
of perturbing a single modulus, and the vanishing probability that random
integers are pairwise coprime at all.
"""

import csv
import random
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Optional, Sequence

from .attack import SumMultiset, pairwise_sum_histogram
from .cipher import Ciphertext, SecretKey, encrypt, expansion_ratio, key_basis
from .errors import NotCoprimeError
from .keystream import derive_permutation


def bhat_histogram(ciphertext: Ciphertext) -> SumMultiset:
    """Pairwise-sum histogram of the distinct cipher values.

    Meaningful for ciphertexts of binary plaintexts, where the mode is
    n + 1. Cost grows with the square of the distinct-value count.
    """
    return pairwise_sum_histogram(ciphertext.elements)


def write_bhat_csv(summ: SumMultiset, path) -> None:
    """Rows (sum_value, frequency) sorted by frequency descending, then value."""
    rows = sorted(summ.sums.items(), key=lambda kv: (-kv[1], kv[0]))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sum_value", "frequency"])
        for value, freq in rows:
            writer.writerow([value, freq])


def sensitivity_demo(
    key: SecretKey, plaintext: Sequence[int], d: int, element_bits: int = 8
) -> list[tuple[int, int]]:
    """Per-block cipher difference between P and P + d, elementwise.

    Returns (block index, difference mod n) pairs; for CECRT every
    difference equals d mod n, the opposite of avalanche behavior.
    Raises RangeViolationError when some p + d leaves the element range.
    """
    shifted = [p + d for p in plaintext]
    ct_base = encrypt(key, plaintext, element_bits)
    ct_shift = encrypt(key, shifted, element_bits)
    n = key_basis(key.moduli).product
    return [
        (j, (cs - cb) % n)
        for j, (cb, cs) in enumerate(zip(ct_base.elements, ct_shift.elements))
    ]


def sieve_primes(limit: int) -> list[int]:
    """Primes up to and including limit, by Eratosthenes."""
    if limit < 2:
        return []
    flags = bytearray([1]) * (limit + 1)
    flags[0] = flags[1] = 0
    for p in range(2, int(limit**0.5) + 1):
        if flags[p]:
            flags[p * p :: p] = bytearray(len(range(p * p, limit + 1, p)))
    return [i for i in range(2, limit + 1) if flags[i]]


def coprime_probability(k: int, prime_limit: int = 10**6) -> float:
    """Probability that k random integers are pairwise coprime.

    Truncated Euler product over primes p <= prime_limit of
    (1 - 1/p)^(k-1) * (1 + (k-1)/p). The tail beyond 1e6 is far below the
    three decimals anyone quotes.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if prime_limit < 2:
        raise ValueError("prime_limit must be >= 2")
    product = 1.0
    for p in sieve_primes(prime_limit):
        product *= (1.0 - 1.0 / p) ** (k - 1) * (1.0 + (k - 1) / p)
    return product


def key_sensitivity_demo(
    key: SecretKey,
    index: int,
    plaintext: Sequence[int],
    delta: int,
    element_bits: int = 8,
) -> float:
    """Fraction of plain elements ruined by perturbing one modulus.

    Encrypts under the true key, then decrypts with moduli[index] replaced
    by moduli[index] + delta (the permutation part stays correct). Only
    positions served by the perturbed slot can break, so the fraction
    never exceeds 1/k; a key change this cheap should wreck everything.
    """
    moduli = list(key.moduli)
    if not 0 <= index < len(moduli):
        raise ValueError(f"index {index} out of range")
    perturbed = moduli[index] + delta
    if perturbed < 2:
        raise ValueError(f"perturbed modulus {perturbed} < 2")
    for j, m in enumerate(moduli):
        if j != index:
            g = gcd(perturbed, m)
            if g > 1:
                raise NotCoprimeError(index, j, g)
    ct = encrypt(key, plaintext, element_bits)
    moduli[index] = perturbed
    k = len(moduli)
    length = ct.length
    h = [0] * length
    idx = 0
    for c in ct.elements:
        for m in moduli:
            h[idx] = c % m
            idx += 1
    w = derive_permutation(key.chaos, length)
    recovered = [h[i] for i in w.inverse]
    mismatches = sum(1 for a, b in zip(recovered, plaintext) if a != b)
    return mismatches / length


@dataclass(frozen=True)
class DefectReport:
    """Summary of the measured defects for one key."""

    expansion_ratio: Fraction
    ratio_lower_bound: Fraction
    sensitivity_cases: tuple[tuple[int, bool], ...]
    constant_plaintext_constant_ciphertext: bool
    a_k_estimate: float

    def __post_init__(self):
        if not self.expansion_ratio > self.ratio_lower_bound:
            raise ValueError(
                f"expansion ratio {self.expansion_ratio} does not exceed "
                f"its lower bound {self.ratio_lower_bound}"
            )


def build_defect_report(
    key: SecretKey,
    plaintext: Optional[Sequence[int]] = None,
    deltas: Sequence[int] = (1, 7),
    prime_limit: int = 10**6,
    length: int = 4096,
    seed: int = 0,
) -> DefectReport:
    """Measure every defect on one key; generates a plaintext if none given."""
    k = key.block_size
    if plaintext is None:
        usable = length - length % k
        headroom = max((d for d in deltas if d > 0), default=0)
        rng = random.Random(seed)
        plaintext = [rng.randrange(256 - headroom) for _ in range(usable)]
    n = key_basis(key.moduli).product
    cases = []
    for d in deltas:
        diffs = sensitivity_demo(key, plaintext, d)
        cases.append((d, all(v == d % n for _, v in diffs)))

    block_len = len(plaintext)
    constant = encrypt(key, [5] * block_len)
    zeros = encrypt(key, [0] * block_len)
    constant_ok = all(c == 5 for c in constant.elements) and all(
        c == 0 for c in zeros.elements
    )

    ratio, bound = expansion_ratio(key)
    return DefectReport(
        expansion_ratio=ratio,
        ratio_lower_bound=bound,
        sensitivity_cases=tuple(cases),
        constant_plaintext_constant_ciphertext=constant_ok,
        a_k_estimate=coprime_probability(k, prime_limit),
    )


def render_defect_report(report: DefectReport) -> str:
    """Plain-text summary block."""
    lines = [
        "CECRT defect report",
        "-------------------",
        f"expansion ratio        : {report.expansion_ratio} "
        f"(= {float(report.expansion_ratio):.4f}; >1 means the 'compression' expands)",
        f"ratio lower bound      : {report.ratio_lower_bound} "
        f"(= {float(report.ratio_lower_bound):.4f})",
        "constant-difference    : "
        + ", ".join(
            f"d={d} {'uniform' if ok else 'NOT uniform'}"
            for d, ok in report.sensitivity_cases
        ),
        f"constant->constant     : {report.constant_plaintext_constant_ciphertext} "
        "(fixed plaintexts map to fixed ciphertexts; zero maps to zero)",
        f"pairwise-coprime prob  : {report.a_k_estimate:.6g} "
        "(chance a random modulus tuple of this size is even usable)",
    ]
    return "\n".join(lines)
