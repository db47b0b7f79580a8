"""Sparse real-coefficient operators in the Majorana monomial basis.

Hermitian fermionic operators expand as H = sum_nu c_nu M_nu with real
coefficients, because every canonically phased monomial is itself Hermitian.
The expansion is stored column-wise: one sorted, duplicate-free uint64 key
array and one float64 coefficient array.  Keeping the keys sorted makes
merges deterministic and lets the propagation engine work on raw arrays
without per-term Python objects.

The trace inner product Tr[M_nu M_mu] = 2^N delta_{nu,mu} makes the stored
coefficients exactly the (normalized) trace coordinates of the operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import _kernels
from .monomials import MajoranaMonomial

__all__ = ["SparseOperator"]

_COEFF_FMT = "%.17g"


@dataclass
class SparseOperator:
    """A real linear combination of Majorana monomials on ``n_modes`` modes.

    ``keys`` must be sorted and unique; use :meth:`from_terms` or
    :meth:`from_arrays` instead of the raw constructor unless both
    invariants already hold.
    """

    n_modes: int
    keys: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint64))
    coeffs: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __post_init__(self) -> None:
        if not 1 <= self.n_modes <= _kernels.MAX_MODES:
            raise ValueError(
                f"n_modes must be in [1, {_kernels.MAX_MODES}], got {self.n_modes}"
            )
        self.keys = np.asarray(self.keys, dtype=np.uint64)
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.keys.shape != self.coeffs.shape:
            raise ValueError("keys and coeffs must have matching shapes")

    # ---- constructors -----------------------------------------------------

    @classmethod
    def from_arrays(
        cls, n_modes: int, keys: np.ndarray, coeffs: np.ndarray
    ) -> "SparseOperator":
        """Build from unsorted/duplicated arrays, merging repeated keys."""
        keys = np.asarray(keys, dtype=np.uint64)
        coeffs = np.asarray(coeffs, dtype=np.float64)
        if keys.size:
            keys, coeffs = _kernels.sort_canonical(keys, coeffs)
        return cls(n_modes=n_modes, keys=keys, coeffs=coeffs)

    @classmethod
    def from_terms(
        cls,
        n_modes: int,
        terms: Iterable[tuple[MajoranaMonomial | int, float]],
    ) -> "SparseOperator":
        """Build from (monomial, coefficient) pairs; duplicates are summed."""
        keys = []
        coeffs = []
        for mono, c in terms:
            bits = mono.bits if isinstance(mono, MajoranaMonomial) else int(mono)
            if bits >> (2 * n_modes):
                raise ValueError(f"key {bits:#x} does not fit in {2 * n_modes} sites")
            keys.append(bits)
            coeffs.append(float(c))
        return cls.from_arrays(
            n_modes, np.array(keys, dtype=np.uint64), np.array(coeffs)
        )

    @classmethod
    def identity(cls, n_modes: int, coeff: float = 1.0) -> "SparseOperator":
        return cls(
            n_modes=n_modes,
            keys=np.array([0], dtype=np.uint64),
            coeffs=np.array([coeff]),
        )

    @classmethod
    def zero(cls, n_modes: int) -> "SparseOperator":
        return cls(n_modes=n_modes)

    # ---- basic queries ----------------------------------------------------

    def __len__(self) -> int:
        return int(self.keys.size)

    def __iter__(self) -> Iterator[tuple[MajoranaMonomial, float]]:
        for k, c in zip(self.keys.tolist(), self.coeffs.tolist()):
            yield MajoranaMonomial(int(k), self.n_modes), c

    def coefficient(self, mono: MajoranaMonomial | int) -> float:
        """Coefficient of one monomial (0.0 if absent)."""
        bits = mono.bits if isinstance(mono, MajoranaMonomial) else int(mono)
        pos = np.searchsorted(self.keys, np.uint64(bits))
        if pos < self.keys.size and self.keys[pos] == np.uint64(bits):
            return float(self.coeffs[pos])
        return 0.0

    def max_degree(self) -> int:
        if not self.keys.size:
            return 0
        return int(_kernels.popcount(self.keys).max())

    def norm1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def norm2(self) -> float:
        return float(math.sqrt(np.dot(self.coeffs, self.coeffs)))

    # ---- arithmetic -------------------------------------------------------

    def scaled(self, factor: float) -> "SparseOperator":
        return SparseOperator(self.n_modes, self.keys.copy(), self.coeffs * factor)

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if other.n_modes != self.n_modes:
            raise ValueError("operators live on different mode counts")
        return SparseOperator.from_arrays(
            self.n_modes,
            np.concatenate([self.keys, other.keys]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return self + other.scaled(-1.0)

    def drop_small(self, eps: float = 1e-15) -> "SparseOperator":
        """Remove terms with |coefficient| < eps (numerical hygiene)."""
        keep = np.abs(self.coeffs) >= eps
        return SparseOperator(self.n_modes, self.keys[keep], self.coeffs[keep])

    def copy(self) -> "SparseOperator":
        return SparseOperator(self.n_modes, self.keys.copy(), self.coeffs.copy())

    # ---- serialization ----------------------------------------------------

    def to_text(self) -> str:
        """Render as a header line ``N=<modes>`` plus one ``hex<TAB>coeff`` line per term."""
        width = (2 * self.n_modes + 3) // 4
        lines = [f"N={self.n_modes}"]
        for k, c in zip(self.keys.tolist(), self.coeffs.tolist()):
            lines.append(f"0x{int(k):0{width}x}\t{_COEFF_FMT % c}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SparseOperator":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("N="):
            raise ValueError("operator text must start with an N=<modes> line")
        n_modes = int(lines[0][2:])
        keys = []
        coeffs = []
        for ln in lines[1:]:
            hexpart, _, coeffpart = ln.partition("\t")
            if not coeffpart:
                # tolerate whitespace-separated variants
                hexpart, _, coeffpart = ln.partition(" ")
            keys.append(int(hexpart, 16))
            coeffs.append(float(coeffpart))
        return cls.from_arrays(
            n_modes, np.array(keys, dtype=np.uint64), np.array(coeffs)
        )

    def __repr__(self) -> str:
        return f"SparseOperator(n_modes={self.n_modes}, terms={len(self)})"
