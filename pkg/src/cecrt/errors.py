"""Exception hierarchy shared by all cecrt modules."""


class CecrtError(Exception):
    """Base class for every error raised by this package."""


class EmptyModuliError(CecrtError):
    """A modulus list was empty where at least one modulus is required."""


class NotCoprimeError(CecrtError):
    """Two moduli share a nontrivial factor."""

    def __init__(self, i: int, j: int, g: int):
        super().__init__(f"moduli at positions {i} and {j} share factor {g}")
        self.i = i
        self.j = j
        self.g = g


class LengthMismatchError(CecrtError):
    """Remainder count does not match the modulus count."""


class BadIndexError(CecrtError):
    """A subset refers to indices outside the basis, or repeats one."""


class NotInvertibleError(CecrtError):
    """No modular inverse exists (operand shares a factor with the modulus)."""


class DivergenceError(CecrtError):
    """The chaotic iteration left the tracked numeric range."""

    def __init__(self, step: int, x: float, y: float):
        super().__init__(f"chaotic state diverged at step {step}: x={x!r}, y={y!r}")
        self.step = step


class NotBijectiveError(CecrtError):
    """An index sequence expected to be a permutation is not one."""


class LengthNotMultipleError(CecrtError):
    """Plaintext length is not a multiple of the block size."""


class HeaderMismatchError(CecrtError):
    """Ciphertext header is inconsistent with the key or its own payload."""


class ExhaustedError(CecrtError):
    """Rejection sampling gave up before finding a coprime modulus set."""


class AmbiguousModeError(CecrtError):
    """The pairwise-sum histogram has no usable mode."""

    def __init__(self, candidates):
        super().__init__(
            "pairwise-sum histogram mode is ambiguous; candidates: "
            f"{sorted(candidates)[:8]}{'...' if len(candidates) > 8 else ''}"
        )
        self.candidates = tuple(candidates)


class ValidationFailedError(CecrtError):
    """A recovered value failed its consistency check against observations."""


class InsufficientInformationError(CecrtError):
    """The gcd closure stalled before isolating the full modulus set."""


class RangeViolationError(CecrtError):
    """An element left its declared value range."""


class OracleProtocolError(CecrtError):
    """The external encryption oracle violated the wire protocol."""


class FormatError(CecrtError):
    """A key, ciphertext, or equivalent-key file is malformed."""
