"""Chaotic sequence generation and the sort-comparison permutation.

The two-dimensional map

    x' = a1*x + a2*y
    y' = b1 + b2*x^2 + b3*y

is iterated in IEEE-754 binary64 with a pinned evaluation order
(t1 = a1*x; t2 = a2*y; x' = t1 + t2; s1 = x*x; s2 = b2*s1; s3 = b1 + s2;
y' = s3 + b3*y, never fused). Sort-based permutations amplify one-ulp
differences into entirely different keystreams, so the order is part of
the contract: two runs anywhere must produce bit-identical sequences.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import isfinite
from typing import Sequence

from .errors import DivergenceError, NotBijectiveError

DEFAULT_BURN_IN = 500
DIVERGENCE_BOUND = 1e10


@dataclass(frozen=True)
class ChaosParams:
    """Initial condition (x0, y0) and control parameters of the 2D map."""

    x0: float
    y0: float
    a1: float
    a2: float
    b1: float
    b2: float
    b3: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isfinite(value):
                raise ValueError(f"chaos parameter {name} is not finite: {value!r}")

    def as_tuple(self) -> tuple[float, ...]:
        return (self.x0, self.y0, self.a1, self.a2, self.b1, self.b2, self.b3)


@dataclass(frozen=True)
class PermutationVector:
    """A bijection on {0..L-1} together with its inverse."""

    forward: tuple[int, ...]
    inverse: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.forward)

    @classmethod
    def from_forward(cls, forward: Sequence[int]) -> "PermutationVector":
        forward = tuple(forward)
        inverse = invert_permutation(forward)
        return cls(forward, inverse)


def invert_permutation(forward: Sequence[int]) -> tuple[int, ...]:
    """Inverse index list; raises NotBijectiveError if forward is not a bijection."""
    n = len(forward)
    inverse = [-1] * n
    for i, f in enumerate(forward):
        if not 0 <= f < n or inverse[f] != -1:
            raise NotBijectiveError(f"value {f} at position {i} breaks bijectivity")
        inverse[f] = i
    return tuple(inverse)


def iterate_chaos(
    params: ChaosParams, count: int, burn_in: int = DEFAULT_BURN_IN
) -> tuple[list[float], list[float]]:
    """Run the map burn_in + count times and keep the last count states.

    The initial condition itself is never emitted. Raises
    DivergenceError(step) the first time a state is non-finite or exceeds
    1e10 in magnitude; step is the 0-based update index counted from the
    start of the burn-in.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    x = params.x0
    y = params.y0
    a1, a2 = params.a1, params.a2
    b1, b2, b3 = params.b1, params.b2, params.b3
    xs: list[float] = []
    ys: list[float] = []
    for step in range(burn_in + count):
        t1 = a1 * x
        t2 = a2 * y
        x_next = t1 + t2
        s1 = x * x
        s2 = b2 * s1
        s3 = b1 + s2
        y_next = s3 + b3 * y
        x, y = x_next, y_next
        if (
            not isfinite(x)
            or not isfinite(y)
            or abs(x) > DIVERGENCE_BOUND
            or abs(y) > DIVERGENCE_BOUND
        ):
            raise DivergenceError(step, x, y)
        if step >= burn_in:
            xs.append(x)
            ys.append(y)
    return xs, ys


def rank_permutation(seq: Sequence[float]) -> list[int]:
    """u with u[i] = original index of the (i+1)-th smallest element.

    Ties are broken by the smaller original index (stable sort).
    """
    if len(seq) < 1:
        raise ValueError("sequence must be nonempty")
    return sorted(range(len(seq)), key=seq.__getitem__)


def compose_w(u: Sequence[int], v: Sequence[int]) -> PermutationVector:
    """The relation vector w(i) = v(u(i)) with its precomputed inverse."""
    if len(u) != len(v):
        raise NotBijectiveError(f"length mismatch: {len(u)} vs {len(v)}")
    invert_permutation(u)
    invert_permutation(v)
    return PermutationVector.from_forward(tuple(v[ui] for ui in u))


@lru_cache(maxsize=8)
def derive_permutation(
    params: ChaosParams, length: int, burn_in: int = DEFAULT_BURN_IN
) -> PermutationVector:
    """Full pipeline: iterate, rank both coordinate sequences, compose.

    Cached on (params, length, burn_in); the result is immutable, so the
    cache is a pure speedup and never changes observable behavior.
    """
    xs, ys = iterate_chaos(params, length, burn_in)
    u = rank_permutation(xs)
    v = rank_permutation(ys)
    return compose_w(u, v)
