"""Exact integer arithmetic for Chinese-remainder reconstruction.

Everything here works on arbitrary-precision Python ints; a basis built
once is immutable and safe to share across threads.
"""

from dataclasses import dataclass
from math import gcd, prod
from typing import Iterable, Sequence

from .errors import (
    BadIndexError,
    EmptyModuliError,
    LengthMismatchError,
    NotCoprimeError,
    NotInvertibleError,
)

__all__ = [
    "CrtBasis",
    "build_basis",
    "crt_solve",
    "crt_split",
    "subset_gcd_identity",
    "gcd",
    "egcd",
    "mod_inverse",
]


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, s, t) with s*a + t*b = g = gcd(a, b)."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def mod_inverse(a: int, m: int) -> int:
    """Inverse of a modulo m in [0, m). Raises NotInvertibleError if gcd(a, m) != 1."""
    if m == 0:
        raise NotInvertibleError("modulus must be nonzero")
    g, s, _ = egcd(a % m, m)
    if g != 1:
        raise NotInvertibleError(f"{a} has no inverse modulo {m} (gcd={g})")
    return s % m


@dataclass(frozen=True)
class CrtBasis:
    """Coprime moduli with the precomputed reconstruction coefficients.

    cofactors[i] is product // moduli[i]; inverses[i] is the least
    nonnegative e with e * cofactors[i] = 1 (mod moduli[i]).
    """

    moduli: tuple[int, ...]
    cofactors: tuple[int, ...]
    inverses: tuple[int, ...]
    product: int

    def __len__(self) -> int:
        return len(self.moduli)


def build_basis(moduli: Sequence[int]) -> CrtBasis:
    """Validate the moduli and precompute the reconstruction coefficients.

    Raises EmptyModuliError on an empty list, ValueError on a modulus < 2,
    and NotCoprimeError(i, j, g) on the first pair sharing a factor g > 1.
    """
    mods = tuple(int(m) for m in moduli)
    if not mods:
        raise EmptyModuliError("at least one modulus required")
    for m in mods:
        if m < 2:
            raise ValueError(f"modulus {m} < 2")
    for i in range(len(mods)):
        for j in range(i + 1, len(mods)):
            g = gcd(mods[i], mods[j])
            if g > 1:
                raise NotCoprimeError(i, j, g)
    m = prod(mods)
    cofactors = tuple(m // mi for mi in mods)
    inverses = tuple(mod_inverse(c, mi) for c, mi in zip(cofactors, mods))
    return CrtBasis(mods, cofactors, inverses, m)


def crt_solve(basis: CrtBasis, remainders: Sequence[int]) -> int:
    """The unique x in [0, product) with x = remainders[i] (mod moduli[i])."""
    if len(remainders) != len(basis.moduli):
        raise LengthMismatchError(
            f"{len(remainders)} remainders for {len(basis.moduli)} moduli"
        )
    acc = 0
    for e, c, q, mi in zip(basis.inverses, basis.cofactors, remainders, basis.moduli):
        acc += e * c * (q % mi)
    return acc % basis.product


def crt_split(basis: CrtBasis, x: int) -> tuple[int, ...]:
    """Residues of x under each modulus; inverse of crt_solve on [0, product)."""
    return tuple(x % mi for mi in basis.moduli)


def subset_gcd_identity(basis: CrtBasis, subset: Iterable[int]) -> tuple[int, int]:
    """gcd fingerprint of a partial coefficient sum.

    For S a set of 0-based basis indices and sigma the sum of
    inverses[i] * cofactors[i] over S, returns

        (gcd(sigma - 1, product), gcd(sigma, product)).

    The first component equals the product of the selected moduli and the
    second is divisible by the product of the unselected ones; this is the
    leverage that lets a binary chosen plaintext leak the modulus set.
    """
    idx = tuple(subset)
    if not idx:
        raise BadIndexError("subset must be nonempty")
    if len(set(idx)) != len(idx):
        raise BadIndexError(f"subset {idx} repeats an index")
    for i in idx:
        if not 0 <= i < len(basis.moduli):
            raise BadIndexError(f"index {i} out of range for {len(basis.moduli)} moduli")
    sigma = sum(basis.inverses[i] * basis.cofactors[i] for i in idx)
    return gcd(sigma - 1, basis.product), gcd(sigma, basis.product)
