"""Second-quantized Hamiltonians in the Majorana monomial basis.

The ladder operators expand as a_p = (m_{2p-1} + i m_{2p})/2 and its
adjoint with the opposite sign, so every one- and two-body integral term
becomes a short real combination of even monomials of length at most four.
Spin orbitals map to modes either interleaved (alpha odd, beta even; the
default, keeping each spatial orbital's pair of modes adjacent) or blocked
(all alpha first).
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping, Sequence

import numpy as np

from .integrals import IntegralTensors
from .monomials import _phase_exponent, _swap_parity
from .operators import SparseOperator

__all__ = [
    "build_majorana_hamiltonian",
    "spin_orbital_mode",
    "ladder_product",
    "accumulate_ladder_term",
    "assemble_operator",
]

_PRUNE = 1e-14


def spin_orbital_mode(p: int, sector: str, n_spatial: int, ordering: str = "interleaved") -> int:
    """1-based mode index of spatial orbital p with the given spin."""
    if not 1 <= p <= n_spatial:
        raise ValueError(f"spatial orbital {p} outside 1..{n_spatial}")
    if ordering == "interleaved":
        return 2 * p - 1 if sector == "alpha" else 2 * p
    if ordering == "blocked":
        return p if sector == "alpha" else n_spatial + p
    raise ValueError(f"unknown spin-orbital ordering {ordering!r}")


def _mul_bits(a: int, b: int, phase: complex) -> tuple[int, complex]:
    """Multiply canonical monomials given as bitmasks, tracking the phase."""
    da = bin(a).count("1")
    db = bin(b).count("1")
    out = a ^ b
    r = _phase_exponent(da) + _phase_exponent(db) - _phase_exponent(bin(out).count("1"))
    phase = phase * (1j) ** (r % 4)
    if _swap_parity(a, b):
        phase = -phase
    return out, phase


def _ladder_expansion(mode: int, dagger: bool) -> dict[int, complex]:
    odd_bit = 1 << (2 * mode - 2)
    even_bit = 1 << (2 * mode - 1)
    imag = -0.5j if dagger else 0.5j
    return {odd_bit: 0.5, even_bit: imag}


def _combine(
    left: Mapping[int, complex], right: Mapping[int, complex]
) -> dict[int, complex]:
    out: dict[int, complex] = defaultdict(complex)
    for bits_a, ca in left.items():
        for bits_b, cb in right.items():
            bits, phase = _mul_bits(bits_a, bits_b, ca * cb)
            out[bits] += phase
    return dict(out)


def ladder_product(ops: Sequence[tuple[int, bool]]) -> dict[int, complex]:
    """Majorana expansion of a product of ladder operators.

    ``ops`` lists (mode, is_creation) factors in operator order (leftmost
    first).  Returns a map from monomial bitmask to complex coefficient.
    """
    acc: dict[int, complex] = {0: 1.0}
    for mode, dagger in ops:
        acc = _combine(acc, _ladder_expansion(mode, dagger))
    return acc


def accumulate_ladder_term(
    acc: dict[int, complex],
    coeff: complex,
    ops: Sequence[tuple[int, bool]],
) -> None:
    """Add coeff * (ladder-operator product) into a monomial accumulator."""
    for bits, phase in ladder_product(ops).items():
        acc[bits] += coeff * phase


def assemble_operator(
    acc: Mapping[int, complex], n_modes: int, prune: float = _PRUNE
) -> SparseOperator:
    """Finalize an accumulator into a real SparseOperator.

    Hermitian combinations of ladder terms always cancel their imaginary
    parts on the canonical monomial basis; a residual above roundoff means
    the accumulated operator was not Hermitian.
    """
    if acc:
        scale = max(1.0, max(abs(v) for v in acc.values()))
        worst = max(abs(v.imag) for v in acc.values())
        if worst > 1e-10 * scale:
            raise ValueError(
                f"non-Hermitian accumulation: imaginary residue {worst:.3e}"
            )
    keys = []
    coeffs = []
    for bits, value in acc.items():
        if abs(value.real) > prune:
            keys.append(bits)
            coeffs.append(value.real)
    return SparseOperator.from_arrays(
        n_modes, np.array(keys, dtype=np.uint64), np.array(coeffs, dtype=np.float64)
    )


def build_majorana_hamiltonian(
    t: IntegralTensors, ordering: str = "interleaved"
) -> SparseOperator:
    """Expand H = E_core + sum h_pq a+_p a_q + 1/2 sum (ij|kl) a+ a+ a a.

    The two-electron part uses the chemist-ordered integrals directly:
    (ij|kl) couples the electron-1 density a+_{i s1} a_{j s1} with the
    electron-2 density a+_{k s2} a_{l s2} over all spin-sector pairs.  The
    result contains the identity plus even monomials of length 2 and 4
    only, with real coefficients.
    """
    n = t.n_spatial
    n_modes = 2 * n
    acc: dict[int, complex] = defaultdict(complex)
    acc[0] += t.core_energy

    pair_cache: dict[tuple[int, int], dict[int, complex]] = {}

    def _density(mode_i: int, mode_j: int) -> dict[int, complex]:
        key = (mode_i, mode_j)
        if key not in pair_cache:
            pair_cache[key] = ladder_product([(mode_i, True), (mode_j, False)])
        return pair_cache[key]

    for sector in ("alpha", "beta"):
        h1 = t.h1_block(sector)
        for p in range(1, n + 1):
            for q in range(1, n + 1):
                v = h1[p - 1, q - 1]
                if abs(v) < 1e-16:
                    continue
                mp = spin_orbital_mode(p, sector, n, ordering)
                mq = spin_orbital_mode(q, sector, n, ordering)
                for bits, phase in _density(mp, mq).items():
                    acc[bits] += v * phase

    # 1/2 (ij|kl) a+_{i s1} a+_{k s2} a_{l s2} a_{j s1}
    #   = 1/2 (ij|kl) [ (a+_{i s1} a_{j s1})(a+_{k s2} a_{l s2})
    #                   - delta_{jk} delta_{s1 s2} a+_{i s1} a_{l s2} ]
    for s1, s2, pair in (
        ("alpha", "alpha", "aa"),
        ("alpha", "beta", "ab"),
        ("beta", "alpha", "ba"),
        ("beta", "beta", "bb"),
    ):
        h2 = t.h2_block(pair)
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                mi = spin_orbital_mode(i, s1, n, ordering)
                mj = spin_orbital_mode(j, s1, n, ordering)
                left = _density(mi, mj)
                for k in range(1, n + 1):
                    for l in range(1, n + 1):
                        v = h2[i - 1, j - 1, k - 1, l - 1]
                        if abs(v) < 1e-16:
                            continue
                        mk = spin_orbital_mode(k, s2, n, ordering)
                        ml = spin_orbital_mode(l, s2, n, ordering)
                        for bits, phase in _combine(left, _density(mk, ml)).items():
                            acc[bits] += 0.5 * v * phase
                        if s1 == s2 and j == k:
                            for bits, phase in _density(mi, ml).items():
                                acc[bits] -= 0.5 * v * phase

    return assemble_operator(acc, n_modes)
