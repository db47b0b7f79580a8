"""Candidate gate pools, orbit-equivalence reduction, and selection scoring.

The pool holds spin-preserving occupied-to-virtual excitations in Majorana
form: each single excitation becomes a composite of two commuting length-2
rotations sharing one angle, and each double excitation is represented by a
single length-4 monomial (all monomials acting once per mode with the same
odd-site parity move a Fock state along the same orbit, so one
representative per excitation suffices).

Two scoring schemes are provided.  Gradient scores read the derivative at
theta = 0 straight off the evolved operator via a commutator formula.  GGF
(greedy gradient-free) scores fit the exact single-angle landscape -- a
sinusoid for a single-monomial gate, a second-harmonic trigonometric
polynomial for a composite -- from a handful of surrogate evaluations, and
report the achievable energy improvement together with the minimizing
angle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import _kernels
from .engine import Gate
from .operators import SparseOperator
from .surrogate import SurrogateGraph, _forward, extend_surrogate

__all__ = [
    "Pool",
    "PoolCandidate",
    "SelectionScore",
    "build_majoranic_pool",
    "reduce_pool_equivalence",
    "score_pool_gradient",
    "fit_sinusoid",
    "fit_second_harmonic",
    "score_pool_ggf",
    "single_excitation_monomials",
    "trim_pool",
    "is_refresh_iteration",
    "score_rows",
]

_FLAT_AMPLITUDE = 1e-14  # below this the landscape is treated as constant


def _mode_bits(mode: int) -> tuple[int, int]:
    """(odd-site bit, even-site bit) for a 1-based mode index."""
    return 1 << (2 * (mode - 1)), 1 << (2 * (mode - 1) + 1)


def single_excitation_monomials(mode_p: int, mode_q: int) -> tuple[int, int]:
    """The two commuting length-2 generators of exp(theta (a+_p a_q - a+_q a_p)).

    For the low-to-high orientation (exciting the lower mode into the
    higher) both rotations take the shared angle with gate sign -1;
    reversing the orientation flips the shared sign.
    """
    if mode_p == mode_q:
        raise ValueError("single excitation needs two distinct modes")
    lo, hi = sorted((mode_p, mode_q))
    odd_lo, even_lo = _mode_bits(lo)
    odd_hi, even_hi = _mode_bits(hi)
    return odd_lo | odd_hi, even_lo | even_hi


def _double_representative(modes: Sequence[int]) -> int:
    """One length-4 monomial from the double-excitation orbit class.

    The fermionic expansion keeps monomials with an odd number of odd-site
    factors; we pick odd sites everywhere except the highest mode.
    """
    ordered = sorted(modes)
    bits = 0
    for mode in ordered[:-1]:
        bits |= _mode_bits(mode)[0]
    bits |= _mode_bits(ordered[-1])[1]
    return bits


@dataclass(frozen=True)
class PoolCandidate:
    """One pool entry: generator bit patterns sharing a single angle."""

    generators: tuple[int, ...]
    signs: tuple[int, ...]
    label: str

    def __post_init__(self) -> None:
        if len(self.generators) != len(self.signs):
            raise ValueError("generators and signs must align")
        for bits in self.generators:
            degree = int(bin(bits).count("1"))
            if degree not in (2, 4):
                raise ValueError(f"pool generators must have length 2 or 4, got {degree}")

    @property
    def is_composite(self) -> bool:
        return len(self.generators) > 1

    def gates(self, slot: int) -> list[Gate]:
        return [
            Gate(bits, slot=slot, sign=sign, label=self.label)
            for bits, sign in zip(self.generators, self.signs)
        ]


@dataclass
class Pool:
    n_modes: int
    candidates: list[PoolCandidate] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.candidates)

    def describe(self) -> dict:
        singles = sum(1 for c in self.candidates if c.is_composite)
        return {
            "n_modes": self.n_modes,
            "singles": singles,
            "doubles": len(self.candidates) - singles,
            "total": len(self.candidates),
        }


@dataclass(frozen=True)
class SelectionScore:
    """Candidate ranking entry: |gradient| or GGF improvement (<= 0)."""

    index: int
    score: float
    theta_star: float | None = None


def _per_sector(value: int | tuple[int, int]) -> tuple[int, int]:
    if isinstance(value, tuple):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def build_majoranic_pool(
    n_spatial: int,
    n_occupied: int | tuple[int, int],
    n_virtual: int | tuple[int, int] | None = None,
    constraints: str = "spin-preserving",
) -> Pool:
    """Spin-preserving occupied-to-virtual singles and doubles.

    Occupied orbitals are 1..o per sector (energy order), virtuals the rest.
    Counts: 2ov singles, 2 C(o,2) C(v,2) same-spin doubles, (ov)^2
    opposite-spin doubles.
    """
    if constraints != "spin-preserving":
        raise ValueError(f"unknown pool constraints {constraints!r}")
    occ = _per_sector(n_occupied)
    virt = _per_sector(n_virtual) if n_virtual is not None else tuple(
        n_spatial - o for o in occ
    )
    for o, v in zip(occ, virt):
        if o < 0 or v < 0 or o + v != n_spatial:
            raise ValueError(
                f"occupied + virtual must equal n_spatial per sector, "
                f"got {o}+{v} != {n_spatial}"
            )

    # interleaved layout: spatial p -> modes 2p-1 (alpha) and 2p (beta)
    def mode(p: int, sector: int) -> int:
        return 2 * p - 1 + sector

    candidates: list[PoolCandidate] = []
    sector_names = ("a", "b")
    for s, name in enumerate(sector_names):
        for q in range(1, occ[s] + 1):
            for p in range(occ[s] + 1, n_spatial + 1):
                a, b = single_excitation_monomials(mode(q, s), mode(p, s))
                candidates.append(
                    PoolCandidate((a, b), (-1, -1), f"s {name} {q}->{p}")
                )
    for s, name in enumerate(sector_names):
        for q1, q2 in itertools.combinations(range(1, occ[s] + 1), 2):
            for p1, p2 in itertools.combinations(
                range(occ[s] + 1, n_spatial + 1), 2
            ):
                bits = _double_representative(
                    [mode(q1, s), mode(q2, s), mode(p1, s), mode(p2, s)]
                )
                candidates.append(
                    PoolCandidate(
                        (bits,), (1,), f"d {name}{name} {q1},{q2}->{p1},{p2}"
                    )
                )
    for qa in range(1, occ[0] + 1):
        for pa in range(occ[0] + 1, n_spatial + 1):
            for qb in range(1, occ[1] + 1):
                for pb in range(occ[1] + 1, n_spatial + 1):
                    bits = _double_representative(
                        [mode(qa, 0), mode(pa, 0), mode(qb, 1), mode(pb, 1)]
                    )
                    candidates.append(
                        PoolCandidate((bits,), (1,), f"d ab {qa},{qb}->{pa},{pb}")
                    )
    if len(set(c.generators for c in candidates)) != len(candidates):
        raise ValueError("pool construction produced duplicate candidates")
    return Pool(n_modes=2 * n_spatial, candidates=candidates)


def _orbit_key(bits: int) -> tuple[int, int] | None:
    """Equivalence-class key for one-Majorana-per-mode even monomials.

    Plain int arithmetic: pool bookkeeping must work beyond the 32-mode
    propagation ceiling, where bitmasks outgrow uint64.
    """
    degree = bin(bits).count("1")
    odd_mask = int("5" * -(-bits.bit_length() // 4), 16) if bits else 0
    support = (bits & odd_mask) | ((bits >> 1) & odd_mask)
    if bin(support).count("1") != degree:
        return None
    odd_sites = bin(bits & odd_mask).count("1")
    return support, odd_sites % 2


def reduce_pool_equivalence(pool: Pool) -> Pool:
    """Keep one representative per Fock-orbit class of single-monomial gates.

    Valid when gates act directly on a Fock state (Heisenberg front
    placement): swapping which Majorana touches each mode only changes the
    rotation angle's sign.  Composites and monomials acting twice on a mode
    pass through untouched.
    """
    seen: set = set()
    kept: list[PoolCandidate] = []
    for cand in pool.candidates:
        if cand.is_composite:
            key = ("composite", cand.generators, cand.signs)
        else:
            orbit = _orbit_key(cand.generators[0])
            key = ("monomial", cand.generators[0]) if orbit is None else orbit
        if key in seen:
            continue
        seen.add(key)
        kept.append(cand)
    return Pool(n_modes=pool.n_modes, candidates=kept)


# ---- gradient scoring -------------------------------------------------------


def _monomial_gradient_heisenberg(
    gamma: int, evolved: SparseOperator, occupation: int
) -> float:
    """dE/dtheta at 0 for a front gate: sum over anticommuting evolved terms
    whose partner monomial is Fock-diagonal."""
    keys = evolved.keys
    anti = _kernels.anticommutes_with(gamma, keys)
    if not anti.any():
        return 0.0
    partners = keys[anti] ^ np.uint64(gamma)
    paired = _kernels.is_paired(partners)
    if not paired.any():
        return 0.0
    signs = _kernels.product_sign_with(gamma, keys[anti][paired])
    eigs = _kernels.paired_eigenvalues(partners[paired], occupation)
    return float(np.sum(signs * evolved.coeffs[anti][paired] * eigs))


def _monomial_gradient_schrodinger(
    gamma: int, state: SparseOperator, hamiltonian: SparseOperator
) -> float:
    keys = hamiltonian.keys
    anti = _kernels.anticommutes_with(gamma, keys)
    if not anti.any():
        return 0.0
    partners = keys[anti] ^ np.uint64(gamma)
    pos = np.searchsorted(state.keys, partners)
    pos_c = np.minimum(pos, max(len(state) - 1, 0))
    hit = (state.keys[pos_c] == partners) if len(state) else np.zeros(
        partners.shape, bool
    )
    if not hit.any():
        return 0.0
    signs = _kernels.product_sign_with(gamma, keys[anti][hit])
    weights = hamiltonian.coeffs[anti][hit] * state.coeffs[pos_c[hit]]
    return float(2.0**hamiltonian.n_modes * np.sum(signs * weights))


def score_pool_gradient(
    pool: Pool,
    evolved: SparseOperator,
    *,
    picture: str = "heisenberg",
    occupation: int | None = None,
    hamiltonian: SparseOperator | None = None,
    indices: Sequence[int] | None = None,
) -> list[SelectionScore]:
    """|dE/dtheta| at theta = 0 for each candidate against the evolved context.

    Heisenberg mode takes the circuit-evolved operator plus the reference
    occupation; Schrodinger mode takes the evolved state expansion plus the
    bare Hamiltonian.  Composite candidates sum their members' signed
    derivatives before taking the magnitude.
    """
    if picture == "heisenberg":
        if occupation is None:
            raise ValueError("Heisenberg gradient scoring needs an occupation")

        def member(gamma: int) -> float:
            return _monomial_gradient_heisenberg(gamma, evolved, occupation)

    elif picture == "schrodinger":
        if hamiltonian is None:
            raise ValueError("Schrodinger gradient scoring needs the Hamiltonian")

        def member(gamma: int) -> float:
            return _monomial_gradient_schrodinger(gamma, evolved, hamiltonian)

    else:
        raise ValueError(f"unknown picture {picture!r}")

    chosen = range(len(pool.candidates)) if indices is None else indices
    out = []
    for idx in chosen:
        cand = pool.candidates[idx]
        total = sum(
            sign * member(bits)
            for bits, sign in zip(cand.generators, cand.signs)
        )
        out.append(SelectionScore(index=idx, score=abs(total)))
    return out


# ---- GGF scoring ------------------------------------------------------------


def _wrap_angle(theta: float) -> float:
    return math.remainder(theta, 2.0 * math.pi)


def fit_sinusoid(e0: float, ep: float, em: float) -> tuple[float, float]:
    """(improvement, theta*) of A sin(theta+B)+C from values at {0, +-pi/2}."""
    c = 0.5 * (ep + em)
    a_sin_b = e0 - c
    a_cos_b = 0.5 * (ep - em)
    amplitude = math.hypot(a_sin_b, a_cos_b)
    if amplitude < _FLAT_AMPLITUDE:
        return 0.0, 0.0
    phase = math.atan2(a_sin_b, a_cos_b)
    improvement = c - amplitude - e0
    return min(improvement, 0.0), _wrap_angle(-0.5 * math.pi - phase)


def fit_second_harmonic(evals: dict[float, float]) -> tuple[float, float]:
    """Exact minimum of a0 + a1 cos t + b1 sin t + a2 cos 2t + b2 sin 2t.

    Five samples determine the coefficients; stationary angles are roots of
    a quartic in z = e^{it} on the unit circle.
    """
    thetas = list(evals)
    rows = [
        [1.0, math.cos(t), math.sin(t), math.cos(2 * t), math.sin(2 * t)]
        for t in thetas
    ]
    a0, a1, b1, a2, b2 = np.linalg.solve(
        np.array(rows), np.array([evals[t] for t in thetas])
    )
    if max(abs(a1), abs(b1), abs(a2), abs(b2)) < _FLAT_AMPLITUDE:
        return 0.0, 0.0
    c1, c2 = a1 - 1j * b1, a2 - 1j * b2
    roots = np.roots([2 * c2, c1, 0.0, -np.conj(c1), -2 * np.conj(c2)])
    angles = [float(np.angle(z)) for z in roots if abs(abs(z) - 1.0) < 1e-6]
    angles.append(0.0)

    def value(t: float) -> float:
        return float(
            a0
            + a1 * math.cos(t)
            + b1 * math.sin(t)
            + a2 * math.cos(2 * t)
            + b2 * math.sin(2 * t)
        )

    best = min(angles, key=value)
    improvement = value(best) - value(0.0)
    return min(improvement, 0.0), _wrap_angle(best)


def _candidate_energies(
    graph: SurrogateGraph,
    v_final: np.ndarray,
    params: np.ndarray,
    cand: PoolCandidate,
    where: str,
    thetas: Sequence[float],
) -> dict[float, float]:
    slot = params.size
    extended = graph
    for gate in cand.gates(slot):
        extended = extend_surrogate(extended, gate, where)
    # natural-end extensions reuse the base graph's step objects verbatim
    incremental = all(
        a is b for a, b in zip(extended.steps, graph.steps)
    ) and len(extended.steps) > len(graph.steps)
    values = {}
    for theta in thetas:
        full = np.append(params, theta)
        if incremental:
            v = v_final
            for step in extended.steps[len(graph.steps) :]:
                t = full[step.slot]
                out = np.zeros(step.n_out)
                out[step.copy_dst] = v[step.copy_src]
                out[step.cos_dst] = math.cos(t) * v[step.cos_src]
                if step.sin_src.size:
                    out[step.sin_dst] += (step.sin_w * math.sin(t)) * v[step.sin_src]
                v = out
            values[theta] = float(np.dot(v, extended.sink))
        else:
            v, _ = _forward(extended, full, keep_layers=False)
            values[theta] = float(np.dot(v, extended.sink))
    return values


def score_pool_ggf(
    pool: Pool,
    graph: SurrogateGraph,
    params: np.ndarray,
    where: Literal["front", "back"] = "front",
    indices: Sequence[int] | None = None,
) -> list[SelectionScore]:
    """Exact achievable improvement and optimal angle per candidate.

    Single-monomial gates produce an A sin(theta+B)+C landscape, pinned by
    three evaluations at {0, +-pi/2}.  Composites (two rotations sharing the
    angle) produce harmonics up to 2, pinned by five evaluations.  All
    improvements are <= 0; a flat landscape scores 0 with theta* = 0.
    """
    params = np.asarray(params, dtype=np.float64)
    half_pi = 0.5 * math.pi
    v_final, _ = _forward(graph, params, keep_layers=False)
    e0 = float(np.dot(v_final, graph.sink))
    chosen = range(len(pool.candidates)) if indices is None else indices
    out = []
    for idx in chosen:
        cand = pool.candidates[idx]
        if cand.is_composite:
            probe = (half_pi, -half_pi, 0.5 * half_pi, -0.5 * half_pi)
            evals = _candidate_energies(graph, v_final, params, cand, where, probe)
            evals[0.0] = e0
            improvement, theta_star = fit_second_harmonic(evals)
        else:
            evals = _candidate_energies(
                graph, v_final, params, cand, where, (half_pi, -half_pi)
            )
            improvement, theta_star = fit_sinusoid(
                e0, evals[half_pi], evals[-half_pi]
            )
        out.append(SelectionScore(index=idx, score=improvement, theta_star=theta_star))
    return out


# ---- trimming ---------------------------------------------------------------


def is_refresh_iteration(iteration: int, kappa: int | None) -> bool:
    """Full-pool rescoring happens at iteration 1 and every kappa-th one."""
    if iteration == 1 or kappa is None:
        return iteration == 1
    return iteration % kappa == 0


def rank_candidates(
    scores: Sequence[SelectionScore], larger_is_better: bool = True
) -> list[SelectionScore]:
    """Best-first ordering with lowest-index tie-breaking."""
    sign = -1.0 if larger_is_better else 1.0
    return sorted(scores, key=lambda s: (sign * s.score, s.index))


def trim_pool(
    scores: Sequence[SelectionScore],
    tau_keep: int,
    kappa: int | None,
    iteration: int,
    larger_is_better: bool = True,
) -> list[int]:
    """Active candidate indices for the coming iterations.

    At refresh iterations the top tau_keep of the (full-pool) scores are
    retained; in between, the already-trimmed set passes through unchanged.
    A tau_keep at or above the pool size makes trimming a no-op.
    """
    if tau_keep < 1:
        raise ValueError("tau_keep must be at least 1")
    if not is_refresh_iteration(iteration, kappa):
        return sorted(s.index for s in scores)
    ranked = rank_candidates(scores, larger_is_better)
    return sorted(s.index for s in ranked[:tau_keep])


def score_rows(
    iteration: int,
    scores: Sequence[SelectionScore],
    larger_is_better: bool = True,
) -> list[tuple[int, int, float, int]]:
    """(iteration, candidate id, score, rank) rows for CSV dumps."""
    ranked = rank_candidates(scores, larger_is_better)
    rank_of = {s.index: r + 1 for r, s in enumerate(ranked)}
    return [(iteration, s.index, s.score, rank_of[s.index]) for s in scores]
