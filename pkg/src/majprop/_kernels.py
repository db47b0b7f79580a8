"""Vectorized bit-level kernels on uint64 monomial keys.

A Majorana monomial on ``n_modes`` fermionic modes is encoded as an integer
whose bit ``k`` flags the presence of the Majorana factor ``m_{k+1}`` (bits
are 0-indexed, operators 1-indexed; factors are kept in ascending index
order with a canonical phase prefactor that is never stored).  All hot loops
operate on numpy ``uint64`` arrays of such keys, which caps supported
systems at 32 modes (64 Majorana bits) -- plenty for the intended problem
sizes and checked at the API boundary.

Everything in here is branch-free numpy on arrays; the scalar reference
implementations live in :mod:`majprop.monomials` and the two are
cross-checked in the test suite.
"""

from __future__ import annotations

import numpy as np

# Bit 2j selects the odd Majorana m_{2j+1} of mode j+1, bit 2j+1 the even
# one; this mask picks out the odd (first-of-mode) positions.
ODD_SITE_MASK = np.uint64(0x5555555555555555)

MAX_MODES = 32


def popcount(keys: np.ndarray) -> np.ndarray:
    """Number of Majorana factors in each key (monomial degree)."""
    return np.bitwise_count(keys)


def mode_support(keys: np.ndarray) -> np.ndarray:
    """Mask of modes touched by each key, folded onto the odd bit positions."""
    k = keys.astype(np.uint64, copy=False)
    return (k | (k >> np.uint64(1))) & ODD_SITE_MASK


def generalized_length(keys: np.ndarray) -> np.ndarray:
    """Number of distinct modes each monomial acts on."""
    return np.bitwise_count(mode_support(keys))


def is_paired(keys: np.ndarray) -> np.ndarray:
    """True where a key only contains complete mode pairs m_{2j-1}m_{2j}."""
    k = keys.astype(np.uint64, copy=False)
    return ((k ^ (k >> np.uint64(1))) & ODD_SITE_MASK) == 0


def phase_exponent(degree: np.ndarray) -> np.ndarray:
    """Canonical phase exponent r = d(d-1)/2 (mod 4) for degree-d monomials."""
    d = degree.astype(np.int64, copy=False)
    return (d * (d - 1) // 2) % 4


def swap_parity_with(gamma: int, keys: np.ndarray) -> np.ndarray:
    """Parity of the factor reordering in the product M_gamma * M_key.

    Interleaving the (sorted) factors of ``gamma`` to the left of those of
    each ``key`` into one sorted word costs one transposition per pair
    (i in gamma, j in key) with i > j; this returns that count mod 2 as a
    0/1 int array.
    """
    k = keys.astype(np.uint64, copy=False)
    total = np.zeros(k.shape, dtype=np.uint64)
    g = int(gamma)
    while g:
        low = g & (g - 1)           # clear lowest set bit
        i = (g ^ low).bit_length() - 1
        total += np.bitwise_count(k & np.uint64((1 << i) - 1))
        g = low
    return (total & np.uint64(1)).astype(np.int64)


def anticommutes_with(gamma: int, keys: np.ndarray) -> np.ndarray:
    """Boolean mask of keys whose monomial anticommutes with M_gamma.

    Two monomials commute iff |a|*|b| - |a & b| is even.
    """
    k = keys.astype(np.uint64, copy=False)
    g = np.uint64(gamma)
    ga = int(np.bitwise_count(g))
    nu = np.bitwise_count(k).astype(np.int64)
    shared = np.bitwise_count(k & g).astype(np.int64)
    return ((ga * nu - shared) & 1) == 1


def product_sign_with(gamma: int, keys: np.ndarray) -> np.ndarray:
    """Sign of the anticommuting branch i*M_gamma*M_key = sign * M_{gamma^key}.

    For anticommuting pairs the product phase i^{r_a + r_b - r_{a^b}} *
    (-1)^s is purely imaginary, so multiplying by the explicit ``i`` of the
    rotation branch leaves a real sign; this returns that +/-1 as float64.
    Only meaningful where :func:`anticommutes_with` is True.
    """
    k = keys.astype(np.uint64, copy=False)
    g = np.uint64(gamma)
    da = int(np.bitwise_count(g))
    db = np.bitwise_count(k).astype(np.int64)
    dxor = np.bitwise_count(k ^ g).astype(np.int64)
    r = (da * (da - 1) // 2 + db * (db - 1) // 2 - dxor * (dxor - 1) // 2) % 4
    # r is 1 or 3 (mod 4) on the anticommuting set: i * i^1 = -1, i * i^3 = +1.
    sign = np.where(r % 4 == 1, -1.0, 1.0)
    parity = swap_parity_with(gamma, k)
    return np.where(parity == 1, -sign, sign)


def paired_eigenvalues(keys: np.ndarray, occupation: int) -> np.ndarray:
    """Eigenvalue of each fully paired monomial on a Fock basis state.

    A paired key with k mode pairs equals (-1)^k times the product of the
    number-like operators -i*m_{2j-1}m_{2j} = 1 - 2n_j over its support, so
    its eigenvalue on ``|occupation>`` is (-1)^(k + occupied pairs).  Only
    meaningful where :func:`is_paired` is True.
    """
    k = keys.astype(np.uint64, copy=False)
    pairs = np.bitwise_count(k).astype(np.int64) >> 1
    occ_mask = np.uint64(_expand_occupation(int(occupation)))
    hits = np.bitwise_count(k & occ_mask).astype(np.int64) >> 1
    return np.where((pairs + hits) & 1 == 1, -1.0, 1.0)


def _expand_occupation(occupation: int) -> int:
    """Spread mode occupation bits onto both Majorana bit positions."""
    out = 0
    j = 0
    occ = occupation
    while occ:
        if occ & 1:
            out |= 3 << (2 * j)
        occ >>= 1
        j += 1
    return out


def sort_canonical(keys: np.ndarray, coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort key/coefficient arrays by key, merging duplicate keys by summation."""
    uniq, inverse = np.unique(keys, return_inverse=True)
    merged = np.zeros(uniq.shape, dtype=np.float64)
    np.add.at(merged, inverse, coeffs)
    return uniq, merged
