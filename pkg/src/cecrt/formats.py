"""On-disk formats: key file, ciphertext container, equivalent-key file.

Key and equivalent-key files are line-oriented UTF-8 text; the ciphertext
container is binary with fixed-width big-endian elements. None of the
formats stores the modulus product itself.
"""

from pathlib import Path
from typing import Union

from .cipher import Ciphertext, SecretKey
from .errors import CecrtError, FormatError
from .keystream import ChaosParams, PermutationVector

PathLike = Union[str, Path]

CIPHERTEXT_MAGIC = b"CECR"
CIPHERTEXT_VERSION = 1


# -- key file ---------------------------------------------------------------
# line 1: k followed by k decimal moduli
# line 2: x0 y0 a1 a2 b1 b2 b3 (shortest round-trip decimals)
# '#' starts a comment; blank lines are ignored.


def dump_key(key: SecretKey) -> str:
    moduli = " ".join(str(m) for m in key.moduli)
    chaos = " ".join(repr(v) for v in key.chaos.as_tuple())
    return f"{key.block_size} {moduli}\n{chaos}\n"


def parse_key(text: str) -> SecretKey:
    lines = _content_lines(text)
    if len(lines) != 2:
        raise FormatError(f"key file needs exactly 2 content lines, found {len(lines)}")
    try:
        head = [int(tok) for tok in lines[0].split()]
        chaos_vals = [float(tok) for tok in lines[1].split()]
    except ValueError as exc:
        raise FormatError(f"key file has a malformed number: {exc}") from None
    if not head:
        raise FormatError("key file line 1 is empty")
    k, moduli = head[0], head[1:]
    if len(moduli) != k:
        raise FormatError(f"key file announces k={k} but lists {len(moduli)} moduli")
    if len(chaos_vals) != 7:
        raise FormatError(f"key file needs 7 chaos values, found {len(chaos_vals)}")
    try:
        return SecretKey(tuple(moduli), ChaosParams(*chaos_vals))
    except (ValueError, CecrtError) as exc:
        raise FormatError(f"key file rejected: {exc}") from exc


def save_key(key: SecretKey, path: PathLike) -> None:
    Path(path).write_text(dump_key(key), encoding="utf-8")


def load_key(path: PathLike) -> SecretKey:
    return parse_key(Path(path).read_text(encoding="utf-8"))


def _content_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


# -- ciphertext container ----------------------------------------------------
# magic 'CECR', version 0x01, L (8-byte BE), k (2-byte BE), width_bytes
# (1 byte), then L/k elements of width_bytes each, big-endian.


def dump_ciphertext(ct: Ciphertext) -> bytes:
    if ct.block_size < 1 or ct.block_size > 0xFFFF:
        raise FormatError(f"block size {ct.block_size} not representable")
    if ct.length % ct.block_size != 0 or len(ct.elements) * ct.block_size != ct.length:
        raise FormatError("ciphertext header inconsistent with element count")
    head = (
        CIPHERTEXT_MAGIC
        + bytes([CIPHERTEXT_VERSION])
        + ct.length.to_bytes(8, "big")
        + ct.block_size.to_bytes(2, "big")
        + bytes([ct.width_bytes])
    )
    limit = 1 << (8 * ct.width_bytes)
    for c in ct.elements:
        if not 0 <= c < limit:
            raise FormatError(f"element {c} does not fit in {ct.width_bytes} bytes")
    body = b"".join(c.to_bytes(ct.width_bytes, "big") for c in ct.elements)
    return head + body


def parse_ciphertext(data: bytes) -> Ciphertext:
    if len(data) < 16:
        raise FormatError("ciphertext truncated before header end")
    if data[:4] != CIPHERTEXT_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    if data[4] != CIPHERTEXT_VERSION:
        raise FormatError(f"unsupported version {data[4]}")
    length = int.from_bytes(data[5:13], "big")
    k = int.from_bytes(data[13:15], "big")
    width = data[15]
    if k == 0 or width == 0:
        raise FormatError("zero block size or element width")
    if length % k != 0:
        raise FormatError(f"length {length} not a multiple of block size {k}")
    count = length // k
    body = data[16:]
    if len(body) != count * width:
        raise FormatError(
            f"payload is {len(body)} bytes, expected {count}*{width}"
        )
    elements = tuple(
        int.from_bytes(body[i * width : (i + 1) * width], "big") for i in range(count)
    )
    return Ciphertext(elements, length, k, width)


def save_ciphertext(ct: Ciphertext, path: PathLike) -> None:
    Path(path).write_bytes(dump_ciphertext(ct))


def load_ciphertext(path: PathLike) -> Ciphertext:
    return parse_ciphertext(Path(path).read_bytes())


# -- equivalent key file -------------------------------------------------------
# line 1: n; line 2: ascending moduli; line 3: L; then the equivalent
# inverse permutation as 0-based decimal indices, 16 per line.


def dump_equivalent_key(ek) -> str:
    lines = [str(ek.n), " ".join(str(m) for m in ek.moduli_set), str(len(ek.w_inverse))]
    fwd = ek.w_inverse.forward
    for i in range(0, len(fwd), 16):
        lines.append(" ".join(str(v) for v in fwd[i : i + 16]))
    return "\n".join(lines) + "\n"


def parse_equivalent_key(text: str):
    from .attack import EquivalentKey  # deferred to avoid an import cycle

    lines = _content_lines(text)
    if len(lines) < 3:
        raise FormatError("equivalent key file needs n, moduli, and L lines")
    try:
        n = int(lines[0])
        moduli = tuple(int(tok) for tok in lines[1].split())
        length = int(lines[2])
        indices = [int(tok) for line in lines[3:] for tok in line.split()]
    except ValueError as exc:
        raise FormatError(f"equivalent key file has a malformed number: {exc}") from None
    if len(indices) != length:
        raise FormatError(f"expected {length} permutation entries, found {len(indices)}")
    try:
        return EquivalentKey.assemble(n, moduli, PermutationVector.from_forward(indices))
    except Exception as exc:
        raise FormatError(f"equivalent key rejected: {exc}") from exc


def save_equivalent_key(ek, path: PathLike) -> None:
    Path(path).write_text(dump_equivalent_key(ek), encoding="utf-8")


def load_equivalent_key(path: PathLike):
    return parse_equivalent_key(Path(path).read_text(encoding="utf-8"))
