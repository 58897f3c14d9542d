import random
import sys
from math import gcd, prod

import pytest

from cecrt.attack import (
    EncryptionOracle,
    EquivalentKey,
    InProcessOracle,
    SubprocessOracle,
    binary_plaintext,
    digit_plaintext,
    digit_query_count,
    equivalent_decrypt,
    full_attack,
    moduli_from_binary,
    pairwise_sum_histogram,
    recover_moduli_set,
    recover_moduli_set_differential,
    recover_n,
    recover_permutation,
    run_attack,
)
from cecrt.cipher import (
    REFERENCE_CHAOS,
    REFERENCE_MODULI,
    Ciphertext,
    SecretKey,
    element_width_bytes,
    encrypt,
    keygen,
)
from cecrt.crt import build_basis, crt_solve
from cecrt.errors import (
    AmbiguousModeError,
    InsufficientInformationError,
    NotBijectiveError,
    OracleProtocolError,
)
from cecrt.formats import save_key
from cecrt.keystream import derive_permutation


class ToyOracle(EncryptionOracle):
    """Identity-permutation CRT cipher over arbitrary (even tiny) moduli."""

    def __init__(self, moduli):
        super().__init__()
        self.basis = build_basis(moduli)
        self.k = len(moduli)

    def _encrypt(self, plaintext):
        assert len(plaintext) % self.k == 0
        elements = tuple(
            crt_solve(self.basis, plaintext[j : j + self.k])
            for j in range(0, len(plaintext), self.k)
        )
        return Ciphertext(
            elements, len(plaintext), self.k, element_width_bytes(self.basis.product)
        )


@pytest.fixture(scope="module")
def reference_key():
    return SecretKey(REFERENCE_MODULI, REFERENCE_CHAOS)


class TestOracles:
    def test_counter_increments_once_per_query(self, reference_key):
        oracle = InProcessOracle(reference_key)
        assert oracle.query_count == 0
        oracle.query([0] * 8)
        oracle.query([1] * 8)
        assert oracle.query_count == 2

    def test_deterministic(self, reference_key):
        oracle = InProcessOracle(reference_key)
        pt = binary_plaintext(64, rng=random.Random(0))
        assert oracle.query(pt) == oracle.query(pt)

    def test_subprocess_matches_in_process(self, reference_key, tmp_path):
        key_path = tmp_path / "key.txt"
        save_key(reference_key, key_path)
        sub = SubprocessOracle(
            [sys.executable, "-m", "cecrt", "encrypt", "--key", str(key_path), "-", "-"]
        )
        local = InProcessOracle(reference_key)
        pt = binary_plaintext(64, rng=random.Random(1))
        assert sub.query(pt) == local.query(pt)

    def test_subprocess_nonzero_exit(self):
        oracle = SubprocessOracle("false")
        with pytest.raises(OracleProtocolError):
            oracle.query([0] * 4)

    def test_subprocess_garbage_output(self):
        oracle = SubprocessOracle("echo not-a-container")
        with pytest.raises(OracleProtocolError):
            oracle.query([0] * 4)

    def test_subprocess_inconsistent_length_detected(self, reference_key, tmp_path):
        # this oracle ignores stdin and always encrypts a fixed 32-byte file
        key_path = tmp_path / "key.txt"
        save_key(reference_key, key_path)
        fixed = tmp_path / "fixed.bin"
        fixed.write_bytes(bytes(32))
        oracle = SubprocessOracle(
            [sys.executable, "-m", "cecrt", "encrypt", "--key", str(key_path), str(fixed), "-"]
        )
        with pytest.raises(OracleProtocolError):
            recover_n(oracle, 64, rng=random.Random(0))


class TestRecoverN:
    def test_toy_basis_full_pattern_coverage(self):
        oracle = ToyOracle((3, 5, 7))
        n, summ = recover_n(oracle, 240, rng=random.Random(0))
        assert n == 105
        top, modes = summ.modes()
        assert modes == (106,)
        assert top == 3  # the 2^(k-1) - 1 complementary pairs

    def test_reference_key(self, reference_key):
        oracle = InProcessOracle(reference_key)
        n, summ = recover_n(oracle, 4096, k_hint=4, rng=random.Random(1))
        assert n == 9041315183
        assert len(summ.values) <= 16
        assert summ.fallback_lower_bound <= n

    def test_all_zero_plaintext_is_ambiguous_and_retries_count(self, reference_key):
        oracle = InProcessOracle(reference_key)
        with pytest.raises(AmbiguousModeError):
            recover_n(oracle, 64, density=0.0, retries=2, rng=random.Random(2))
        assert oracle.query_count == 3  # initial try plus two counted retries

    def test_k2_flat_histogram_resolved_by_validation(self):
        key = keygen(2, (9, 12), seed=31)
        oracle = InProcessOracle(key)
        n, _ = recover_n(oracle, 2048, rng=random.Random(3))
        assert n == prod(key.moduli)
        assert oracle.query_count == 1

    def test_unique_but_invalid_mode_is_validation_failure(self):
        from cecrt.attack import SumMultiset, _modulus_from_sums
        from cecrt.errors import ValidationFailedError

        # unique mode 12 implies n = 11, but 11 itself was observed
        summ = SumMultiset((1, 11), {12: 1})
        with pytest.raises(ValidationFailedError):
            _modulus_from_sums(summ)


class TestRecoverModuliSet:
    def test_toy_basis(self):
        oracle = ToyOracle((3, 5, 7))
        assert recover_moduli_set(oracle, 105, 240, rng=random.Random(4)) == [3, 5, 7]

    def test_all_ones_is_insufficient(self):
        with pytest.raises(InsufficientInformationError):
            moduli_from_binary([1] * 64, 105, k_hint=3)

    def test_closure_splits_merged_products(self):
        # pool missing every singleton: only pairwise products present
        n = 3 * 5 * 7
        pool_elements = []
        basis = build_basis((3, 5, 7))
        # craft cipher elements whose patterns are exactly the 2-subsets
        for pattern in ((1, 1, 0), (1, 0, 1), (0, 1, 1)):
            pool_elements.append(crt_solve(basis, pattern))
        assert moduli_from_binary(pool_elements, n, k_hint=3) == (3, 5, 7)

    def test_per_block_gcds_are_subset_products(self, reference_key):
        rng = random.Random(5)
        length = 1024
        pt = binary_plaintext(length, rng=rng)
        ct = encrypt(reference_key, pt)
        basis = build_basis(reference_key.moduli)
        n = basis.product
        w = derive_permutation(reference_key.chaos, length)
        k = reference_key.block_size
        for j, c in enumerate(ct.elements):
            pattern = [pt[w.forward[j * k + i]] for i in range(k)]
            selected = prod(
                m for m, bit in zip(reference_key.moduli, pattern) if bit == 1
            )
            assert gcd(abs(c - 1), n) == selected
            assert gcd(c, n) % (n // selected) == 0

    def test_reference_key_recovered_by_first_search_step(self, reference_key):
        from cecrt.attack import _gcd_pool, _greedy_coprime

        oracle = InProcessOracle(reference_key)
        ct = oracle.query(binary_plaintext(4096, rng=random.Random(20)))
        pool = _gcd_pool(ct.elements, 9041315183)
        # the pool already contains pairwise products such as 311 * 313
        assert 97343 in pool
        # and the very first greedy pass isolates the modulus set
        first_pass = _greedy_coprime(pool)
        assert first_pass == [293, 311, 313, 317]
        assert prod(first_pass) == 9041315183

    def test_differential_variant_matches_direct(self):
        key = keygen(3, (9, 12), seed=41)
        oracle = InProcessOracle(key)
        n = prod(key.moduli)
        direct = recover_moduli_set(oracle, n, 3072, rng=random.Random(6))
        differential = recover_moduli_set_differential(
            oracle, n, 3072, rng=random.Random(7)
        )
        assert direct == differential == sorted(key.moduli)


class TestRecoverPermutation:
    def test_digit_query_count(self):
        assert digit_query_count(512 * 512, 8) == 3
        assert digit_query_count(256, 8) == 1
        assert digit_query_count(8, 8) == 1
        assert digit_query_count(3072, 8) == 2
        assert digit_query_count(2, 8) == 1

    def test_digit_plaintext_values(self):
        pt = digit_plaintext(600, 1, 8)
        assert pt[0] == 0
        assert pt[255] == 0
        assert pt[256] == 1
        assert pt[511] == 1
        assert pt[512] == 2

    def test_single_query_at_256(self, reference_key):
        oracle = InProcessOracle(reference_key)
        w_inv = recover_permutation(oracle, 9041315183, REFERENCE_MODULI, 256)
        assert oracle.query_count == 1
        true_w = derive_permutation(reference_key.chaos, 256)
        # equivalent inverse followed by inverse confusion must invert encrypt
        rng = random.Random(8)
        pt = [rng.randrange(256) for _ in range(256)]
        ek = EquivalentKey.assemble(9041315183, REFERENCE_MODULI, w_inv)
        assert equivalent_decrypt(ek, encrypt(reference_key, pt)) == pt
        assert sorted(w_inv.forward) == list(range(256))
        assert len(true_w) == 256

    def test_small_key_pipeline_hundred_messages(self):
        key = SecretKey((257, 263), REFERENCE_CHAOS)
        oracle = InProcessOracle(key)
        n = 257 * 263
        w_inv = recover_permutation(oracle, n, key.moduli, 8)
        ek = EquivalentKey.assemble(n, key.moduli, w_inv)
        rng = random.Random(9)
        for _ in range(100):
            pt = [rng.randrange(256) for _ in range(8)]
            assert equivalent_decrypt(ek, encrypt(key, pt)) == pt

    def test_wrong_moduli_raise_not_bijective(self, reference_key):
        oracle = InProcessOracle(reference_key)
        with pytest.raises(NotBijectiveError):
            recover_permutation(oracle, 311 * 313 * 317 * 307, (311, 313, 317, 307), 256)


class TestFullAttack:
    def test_query_complexity_exact(self, reference_key):
        oracle = InProcessOracle(reference_key)
        ek = full_attack(oracle, 4096, rng=random.Random(10))
        assert oracle.query_count == 1 + digit_query_count(4096, 8) == 3
        assert ek.n == 9041315183
        assert ek.moduli_set == (293, 311, 313, 317)

    def test_report_contents(self, reference_key):
        oracle = InProcessOracle(reference_key)
        ek, report = run_attack(oracle, 4096, rng=random.Random(11))
        assert report.queries == 3
        assert report.retries_used == 0
        assert not report.low_confidence
        assert report.n == ek.n
        assert report.moduli == ek.moduli_set
        assert set(report.stage_seconds) == {"modulus", "moduli_set", "permutation", "total"}
        assert report.fallback_lower_bound <= ek.n

    def test_differential_flag_costs_two_extra_queries(self, reference_key):
        oracle = InProcessOracle(reference_key)
        ek = full_attack(oracle, 4096, differential=True, rng=random.Random(18))
        assert ek.moduli_set == (293, 311, 313, 317)
        assert oracle.query_count == 3 + 2

    def test_twenty_random_keys_exact(self):
        rng = random.Random(12)
        for trial in range(20):
            k = 2 + trial % 3
            key = keygen(k, (9, 12), seed=300 + trial)
            oracle = InProcessOracle(key)
            ek = full_attack(oracle, 3072, rng=rng)
            assert ek.n == prod(key.moduli)
            assert ek.moduli_set == tuple(sorted(key.moduli))

    def test_zero_density_fails_with_attack_error(self, reference_key):
        oracle = InProcessOracle(reference_key)
        with pytest.raises(AmbiguousModeError):
            full_attack(oracle, 64, density=0.0, retries=2, rng=random.Random(13))

    def test_single_block_length_is_defined_but_starved(self, reference_key):
        oracle = InProcessOracle(reference_key)
        with pytest.raises((InsufficientInformationError, AmbiguousModeError)):
            full_attack(oracle, 4, rng=random.Random(14))


class TestEquivalentDecrypt:
    def test_cross_key_ciphertext_decrypts_to_garbage_without_error(self):
        key_a = keygen(3, (9, 12), seed=51)
        key_b = keygen(3, (9, 12), seed=52)
        ek = full_attack(InProcessOracle(key_a), 768, rng=random.Random(15))
        rng = random.Random(16)
        pt = [rng.randrange(256) for _ in range(768)]
        ct_b = encrypt(key_b, pt)
        out = equivalent_decrypt(ek, ct_b)
        assert out != pt

    def test_zero_ciphertext(self, reference_key):
        ek = full_attack(InProcessOracle(reference_key), 256, rng=random.Random(17))
        ct = encrypt(reference_key, [0] * 256)
        assert equivalent_decrypt(ek, ct) == [0] * 256

    def test_header_mismatch_rejected(self, reference_key):
        from cecrt.errors import HeaderMismatchError

        ek = full_attack(InProcessOracle(reference_key), 256, rng=random.Random(19))
        wrong_length = encrypt(reference_key, [0] * 512)
        with pytest.raises(HeaderMismatchError):
            equivalent_decrypt(ek, wrong_length)
        ct = encrypt(reference_key, [0] * 256)
        hacked = Ciphertext(ct.elements, ct.length, 5, ct.width_bytes)
        with pytest.raises(HeaderMismatchError):
            equivalent_decrypt(ek, hacked)


class TestSumHistogram:
    def test_distinct_value_bound(self, reference_key):
        pt = binary_plaintext(2048, rng=random.Random(18))
        ct = encrypt(reference_key, pt)
        summ = pairwise_sum_histogram(ct.elements)
        assert len(summ.values) <= 2**4
        pairs = len(summ.values) * (len(summ.values) - 1) // 2
        assert sum(summ.sums.values()) == pairs

    def test_single_pair(self):
        summ = pairwise_sum_histogram([7, 11, 7])
        assert summ.values == (7, 11)
        assert summ.sums == {18: 1}
