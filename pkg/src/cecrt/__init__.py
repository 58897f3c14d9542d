"""cecrt: reference implementation and chosen-plaintext break of CECRT.

CECRT permutes plaintext positions with a chaos-derived vector and then
fuses each block of k elements into one integer via Chinese-remainder
reconstruction. The attack half of this package recovers an equivalent
key (modulus product, unordered modulus set, equivalent permutation) from
1 + ceil(log2(L)/l) chosen plaintexts and decrypts exactly.
"""

from .analysis import (
    DefectReport,
    bhat_histogram,
    build_defect_report,
    coprime_probability,
    key_sensitivity_demo,
    render_defect_report,
    sensitivity_demo,
    write_bhat_csv,
)
from .attack import (
    AttackReport,
    EncryptionOracle,
    EquivalentKey,
    InProcessOracle,
    SubprocessOracle,
    SumMultiset,
    binary_plaintext,
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
from .cipher import (
    Ciphertext,
    REFERENCE_CHAOS,
    REFERENCE_MODULI,
    SecretKey,
    decrypt,
    encrypt,
    expansion_ratio,
    keygen,
)
from .crt import CrtBasis, build_basis, crt_solve, crt_split, egcd, gcd, mod_inverse, subset_gcd_identity
from .keystream import (
    ChaosParams,
    PermutationVector,
    compose_w,
    derive_permutation,
    iterate_chaos,
    rank_permutation,
)

__version__ = "0.1.0"
