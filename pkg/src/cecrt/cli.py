"""Command-line front end: keygen, encrypt, decrypt, attack, analyze.

Exit codes: 0 success, 1 usage, 2 data validation, 3 oracle/protocol
failure, 4 attack failure.
"""

import argparse
import random
import sys
from pathlib import Path

from . import analysis, attack, cipher, formats
from .errors import (
    AmbiguousModeError,
    DivergenceError,
    EmptyModuliError,
    ExhaustedError,
    FormatError,
    HeaderMismatchError,
    InsufficientInformationError,
    LengthNotMultipleError,
    NotBijectiveError,
    NotCoprimeError,
    OracleProtocolError,
    RangeViolationError,
    ValidationFailedError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ORACLE = 3
EXIT_ATTACK = 4

_DATA_ERRORS = (
    FormatError,
    LengthNotMultipleError,
    RangeViolationError,
    HeaderMismatchError,
    NotCoprimeError,
    EmptyModuliError,
    DivergenceError,
    ExhaustedError,
    ValueError,
    OSError,
)
_ATTACK_ERRORS = (
    AmbiguousModeError,
    InsufficientInformationError,
    ValidationFailedError,
    NotBijectiveError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_bytes(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_bytes(path: str, data: bytes) -> None:
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _bit_range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise ValueError("expected LO:HI")
    return int(lo), int(hi)


def cmd_keygen(args) -> int:
    key = cipher.keygen(args.k, args.bits, seed=args.seed)
    _write_text(args.out, formats.dump_key(key))
    if args.out != "-":
        print(f"wrote key with k={args.k}, moduli {' '.join(map(str, key.moduli))} to {args.out}")
    return EXIT_OK


def cmd_encrypt(args) -> int:
    key = formats.load_key(args.key)
    data = _read_bytes(args.input)
    ct = cipher.encrypt(key, data, args.element_bits)
    _write_bytes(args.out, formats.dump_ciphertext(ct))
    return EXIT_OK


def cmd_decrypt(args) -> int:
    ct = formats.parse_ciphertext(_read_bytes(args.input))
    if args.equivalent_key:
        ek = formats.load_equivalent_key(args.equivalent_key)
        if any(c >= ek.n for c in ct.elements):
            print(
                "warning: cipher elements at or above n; reducing modulo the moduli anyway",
                file=sys.stderr,
            )
        plain = attack.equivalent_decrypt(ek, ct)
    else:
        key = formats.load_key(args.key)
        n = cipher.key_basis(key.moduli).product
        if any(c >= n for c in ct.elements):
            print(
                "warning: cipher elements at or above n; reducing modulo the moduli anyway",
                file=sys.stderr,
            )
        plain = cipher.decrypt(key, ct)
    _write_bytes(args.out, bytes(plain))
    return EXIT_OK


def cmd_attack(args) -> int:
    if args.key:
        oracle = attack.InProcessOracle(formats.load_key(args.key), args.element_bits)
    else:
        oracle = attack.SubprocessOracle(args.oracle_cmd)
    rng = random.Random(args.seed)
    ek, report = attack.run_attack(
        oracle,
        args.length,
        args.element_bits,
        density=args.density,
        retries=args.retries,
        rng=rng,
    )
    formats.save_equivalent_key(ek, args.out)

    print(
        f"Recovered an equivalent key in {report.stage_seconds['total']:.2f} s "
        f"using {report.queries} oracle queries."
    )
    print(f"  n      = {report.n}")
    print(f"  moduli = {' '.join(map(str, report.moduli))}")
    print(f"  k      = {len(report.moduli)}")
    if report.low_confidence:
        print("  NOTE: n came from the max(C)+1 fallback (LOW-CONFIDENCE), "
              "verified by the gcd closure.")
    print(f"  equivalent key written to {args.out}")
    print()
    print(f"n={report.n}")
    print("moduli=" + ",".join(map(str, report.moduli)))
    print(f"k={len(report.moduli)}")
    print(f"length={report.length}")
    print(f"element_bits={report.element_bits}")
    print(f"queries={report.queries}")
    print(f"retries={report.retries_used}")
    print(f"low_confidence={int(report.low_confidence)}")
    print(f"fallback_lower_bound={report.fallback_lower_bound}")
    for stage, seconds in report.stage_seconds.items():
        print(f"stage_{stage}_seconds={seconds:.6f}")
    print(f"out={args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    did_anything = False
    if args.bhat:
        did_anything = True
        ct = formats.parse_ciphertext(_read_bytes(args.bhat))
        distinct = len(set(ct.elements))
        if distinct > 4096:
            raise ValueError(
                f"{distinct} distinct cipher values would make the pairwise-sum "
                "histogram enormous; feed the ciphertext of a binary plaintext"
            )
        summ = analysis.bhat_histogram(ct)
        out = args.out if args.out != "-" else "bhat.csv"
        analysis.write_bhat_csv(summ, out)
        figure_path = str(Path(out).with_suffix(".png"))
        from .figures import render_bhat_figure

        render_bhat_figure(summ, figure_path, title="pairwise-sum distribution")
        top, modes = summ.modes()
        print(f"wrote {out} and {figure_path}")
        if len(summ.values) < 2:
            print(
                "note: fewer than two distinct cipher values; a constant "
                "plaintext gives an empty pairwise-sum histogram",
                file=sys.stderr,
            )
        print(f"bhat_rows={len(summ.sums)}")
        print(f"bhat_mode={modes[0] if modes else ''}")
        print(f"bhat_mode_frequency={top}")
        if len(modes) == 1:
            print(f"bhat_mode_minus_1={modes[0] - 1}")
    if args.ak is not None:
        did_anything = True
        value = analysis.coprime_probability(args.ak, args.prime_limit)
        print(
            f"probability that {args.ak} random integers are pairwise coprime "
            f"(primes to {args.prime_limit}): {value:.6g}"
        )
        print(f"a_k={value!r}")
    if args.expansion:
        did_anything = True
        key = formats.load_key(args.expansion)
        ratio, bound = cipher.expansion_ratio(key, args.element_bits)
        print(
            f"expansion ratio {ratio} (= {float(ratio):.4f}), "
            f"always above the bound {bound} (= {float(bound):.4f})"
        )
        print(f"expansion_ratio={ratio}")
        print(f"expansion_ratio_bound={bound}")
    if args.defects:
        did_anything = True
        key = formats.load_key(args.defects)
        report = analysis.build_defect_report(
            key,
            length=args.length,
            prime_limit=args.prime_limit,
            seed=args.seed if args.seed is not None else 0,
        )
        print(analysis.render_defect_report(report))
        print()
        print(f"expansion_ratio={report.expansion_ratio}")
        print(f"expansion_ratio_bound={report.ratio_lower_bound}")
        for d, ok in report.sensitivity_cases:
            print(f"sensitivity_d{d}_uniform={int(ok)}")
        print(f"constant_maps_to_constant={int(report.constant_plaintext_constant_ciphertext)}")
        print(f"a_k={report.a_k_estimate!r}")
    if not did_anything:
        raise _UsageError("analyze needs at least one of --bhat/--ak/--expansion/--defects")
    return EXIT_OK


class _UsageError(Exception):
    pass


def build_parser() -> _Parser:
    parser = _Parser(prog="cecrt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate a key file")
    p.add_argument("-k", type=int, required=True, help="block size (number of moduli)")
    p.add_argument(
        "--bits",
        type=_bit_range,
        default=(9, 12),
        help="modulus bit-length range LO:HI (default 9:12)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default="-", help="key file path, or - for stdout")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("encrypt", help="encrypt raw bytes (row-major gray image)")
    p.add_argument("input", help="plaintext file, or - for stdin")
    p.add_argument("out", nargs="?", default="-", help="ciphertext file, or - for stdout")
    p.add_argument("--key", required=True)
    p.add_argument("--element-bits", type=int, default=8)
    p.set_defaults(func=cmd_encrypt)

    p = sub.add_parser("decrypt", help="decrypt a ciphertext container")
    p.add_argument("input", help="ciphertext file, or - for stdin")
    p.add_argument("out", nargs="?", default="-", help="plaintext file, or - for stdout")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--key")
    group.add_argument("--equivalent-key", help="equivalent key file recovered by attack")
    p.set_defaults(func=cmd_decrypt)

    p = sub.add_parser("attack", help="recover an equivalent key from an oracle")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--key", help="attack this key file via an in-process oracle")
    group.add_argument(
        "--oracle-cmd",
        help="attack an external command: plaintext bytes on stdin, container on stdout",
    )
    p.add_argument("--length", type=int, required=True, help="plaintext length L")
    p.add_argument("--element-bits", type=int, default=8)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("-o", "--out", default="equivalent_key.txt")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("analyze", help="defect metrics, CSV, and figures")
    p.add_argument("--bhat", help="ciphertext file for the pairwise-sum histogram")
    p.add_argument("--ak", type=int, help="pairwise-coprimality probability for k")
    p.add_argument("--expansion", help="key file for the expansion ratio")
    p.add_argument("--defects", help="key file for the full defect report")
    p.add_argument("--prime-limit", type=int, default=10**6)
    p.add_argument("--element-bits", type=int, default=8)
    p.add_argument("--length", type=int, default=4096, help="plaintext length for --defects")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--out", default="bhat.csv", help="CSV path for --bhat")
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"cecrt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleProtocolError as exc:
        print(f"cecrt: oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except _ATTACK_ERRORS as exc:
        print(f"cecrt: attack failed: {exc}", file=sys.stderr)
        return EXIT_ATTACK
    except _DATA_ERRORS as exc:
        print(f"cecrt: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
