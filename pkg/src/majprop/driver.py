"""The adaptive outer loop: grow a fermionic circuit towards the ground state.

The ansatz keeps a fixed layout: reference determinant, then the adaptively
grown gate body, then a block of single-excitation "active rotations" that
stays outermost.  Each iteration scores the candidate pool (gradient
magnitude, greedy improvement, or a mixture on the trimming schedule), picks
the best candidate, places its gates at the configured end of the body with
a fresh shared angle, and reoptimizes every parameter with L-BFGS-B on the
surrogate graph.  The recorded energy can never increase: new gates start
at an angle whose energy is at or below the previous optimum, and the
optimizer never returns anything worse than its starting point.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field, fields
from typing import IO, Sequence

import numpy as np
import scipy.optimize

from . import _kernels
from .engine import (
    FermionicCircuit,
    Gate,
    TruncationPolicy,
    expand_fock_projector,
    propagate,
)
from .hamiltonian import build_majorana_hamiltonian, spin_orbital_mode
from .integrals import IntegralTensors, aufbau_occupation, dress_integrals
from .operators import SparseOperator
from .pool import (
    Pool,
    SelectionScore,
    build_majoranic_pool,
    fit_second_harmonic,
    fit_sinusoid,
    is_refresh_iteration,
    rank_candidates,
    reduce_pool_equivalence,
    score_pool_ggf,
    score_pool_gradient,
    trim_pool,
)
from .surrogate import (
    SurrogateGraph,
    _forward,
    build_surrogate,
    eval_energy,
    eval_energy_and_gradient,
    extend_surrogate,
)

__all__ = [
    "AdaptResult",
    "MemoryBudgetError",
    "OptimizationError",
    "RunConfig",
    "Trajectory",
    "TrajectoryRow",
    "decompose_single_excitation",
    "init_active_rotations",
    "load_circuit_json",
    "optimize_parameters",
    "run_adapt_vmpe",
]


class OptimizationError(RuntimeError):
    """The surrogate energy went non-finite during optimization."""


class MemoryBudgetError(RuntimeError):
    """A propagation layer outgrew the configured monomial budget."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


# ---- circuit building blocks --------------------------------------------------


def decompose_single_excitation(
    p: int,
    q: int,
    sector: str,
    n_spatial: int,
    slot: int,
    label: str | None = None,
    ordering: str = "interleaved",
) -> list[Gate]:
    """Two commuting rotations implementing exp(theta (a+_p a_q - a+_q a_p)).

    ``p`` and ``q`` are 1-based spatial orbitals in one spin sector; both
    gates share ``slot`` so a single angle drives the excitation.  The gate
    sign absorbs the orientation: exciting the lower mode into the higher
    carries sign -1 under the exp(-i sign*theta/2 M) gate convention.
    """
    if p == q:
        raise ValueError("single excitation requires two distinct orbitals")
    from .pool import single_excitation_monomials

    mode_p = spin_orbital_mode(p, sector, n_spatial, ordering)
    mode_q = spin_orbital_mode(q, sector, n_spatial, ordering)
    a, b = single_excitation_monomials(mode_p, mode_q)
    sign = -1 if mode_p > mode_q else 1
    text = label if label is not None else f"x {sector[0]} {q}->{p}"
    return [
        Gate(a, slot=slot, sign=sign, label=text),
        Gate(b, slot=slot, sign=sign, label=text),
    ]


def init_active_rotations(
    n_spatial: int,
    sharing: str = "restricted",
    ordering: str = "interleaved",
) -> tuple[list[Gate], int, list[tuple[int, int, str, int]]]:
    """The outermost orbital-rotation block, all angles starting at zero.

    One rotation per spatial pair q < q' per spin sector.  Restricted
    sharing ties the alpha and beta angles of a pair to one parameter slot;
    unrestricted gives each sector its own.  Returns (gates, slot count,
    rotation spec) where the spec rows (p, q, sector, slot) are what the
    integral-dressing transform consumes.
    """
    if sharing not in ("restricted", "unrestricted"):
        raise ValueError(f"unknown rotation sharing {sharing!r}")
    gates: list[Gate] = []
    spec: list[tuple[int, int, str, int]] = []
    n_slots = 0
    for q, qp in ((a, b) for a in range(1, n_spatial + 1) for b in range(a + 1, n_spatial + 1)):
        pair_slot = n_slots
        for sector in ("alpha", "beta"):
            slot = pair_slot if sharing == "restricted" else n_slots
            if sharing == "unrestricted":
                n_slots += 1
            gates.extend(
                decompose_single_excitation(
                    q, qp, sector, n_spatial, slot,
                    label=f"r {sector[0]} {q}<->{qp}",
                    ordering=ordering,
                )
            )
            spec.append((q, qp, sector, slot))
        if sharing == "restricted":
            n_slots += 1
    return gates, n_slots, spec


# ---- parameter optimization ----------------------------------------------------


def optimize_parameters(
    graph: SurrogateGraph,
    theta0: np.ndarray,
    gtol: float = 1e-7,
    maxfun: int = 200,
) -> tuple[np.ndarray, float]:
    """Minimize the surrogate energy with L-BFGS-B and analytic gradients.

    Returns the best point seen during the run, which is never worse than
    the starting point (the first evaluation happens at ``theta0``).
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.size == 0:
        return theta0, eval_energy(graph, theta0)
    best_f = math.inf
    best_x = theta0.copy()

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal best_f, best_x
        energy, grad = eval_energy_and_gradient(graph, x)
        if not math.isfinite(energy) or not np.all(np.isfinite(grad)):
            raise OptimizationError(
                f"non-finite surrogate energy {energy!r} during optimization"
            )
        if energy < best_f:
            best_f, best_x = energy, x.copy()
        return energy, grad

    scipy.optimize.minimize(
        objective,
        theta0,
        jac=True,
        method="L-BFGS-B",
        options={"gtol": gtol, "maxfun": maxfun},
    )
    return best_x, float(best_f)


# ---- run records ----------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryRow:
    iteration: int
    energy: float
    gate: str
    theta_hash: str
    wall_time_s: float
    pool_evaluated: int
    live_monomials: int


_CSV_COLUMNS = (
    "iteration",
    "energy",
    "gate",
    "theta_hash",
    "wall_time_s",
    "pool_evaluated",
    "live_monomials",
)


@dataclass
class Trajectory:
    rows: list[TrajectoryRow] = field(default_factory=list)

    def append(self, row: TrajectoryRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rows])

    @property
    def final_energy(self) -> float:
        return self.rows[-1].energy

    def to_csv(self, target: str | IO[str]) -> None:
        import csv

        def _write(handle: IO[str]) -> None:
            writer = csv.writer(handle)
            writer.writerow(_CSV_COLUMNS)
            for r in self.rows:
                writer.writerow(
                    [
                        r.iteration,
                        repr(r.energy),
                        r.gate,
                        r.theta_hash,
                        repr(r.wall_time_s),
                        r.pool_evaluated,
                        r.live_monomials,
                    ]
                )

        if isinstance(target, str):
            with open(target, "w", newline="") as handle:
                _write(handle)
        else:
            _write(target)


def _theta_hash(theta: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(theta).tobytes()).hexdigest()[:16]


# ---- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything the adaptive loop needs beyond the integrals themselves."""

    max_iterations: int = 30
    cutoff: int | None = 6
    picture: str = "heisenberg"
    placement: str | None = None  # defaults to front (Heisenberg) / back (Schrodinger)
    selection: str = "ggf"  # gradient | ggf | mixed
    pool_constraints: str = "spin-preserving"
    reduce_pool: bool = True
    trim_tau: int | None = None
    trim_kappa: int = 25
    opt_gtol: float = 1e-7
    opt_maxfun: int = 200
    gate_init: str | None = None  # zero | ggf_theta_star; None follows the scorer
    rotation_sharing: str = "restricted"
    improvement_floor: float = 1e-9
    generalized_length_cutoff: int | None = None
    paired_accept: bool | None = None
    max_live_monomials: int | None = None

    @property
    def resolved_placement(self) -> str:
        if self.placement is not None:
            return self.placement
        return "front" if self.picture == "heisenberg" else "back"

    def resolved_gate_init(self, used_gradient_scores: bool) -> str:
        if self.gate_init is not None:
            return self.gate_init
        return "zero" if used_gradient_scores else "ggf_theta_star"

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(
            length_cutoff=self.cutoff,
            generalized_length_cutoff=self.generalized_length_cutoff,
            paired_accept=self.paired_accept,
        )

    def validate(self, hamiltonian_max_length: int) -> None:
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.cutoff is not None:
            if self.cutoff % 2 or self.cutoff < hamiltonian_max_length:
                raise ValueError(
                    f"cutoff must be even and at least the longest Hamiltonian "
                    f"monomial ({hamiltonian_max_length}), got {self.cutoff}"
                )
        if self.picture not in ("heisenberg", "schrodinger"):
            raise ValueError(f"unknown picture {self.picture!r}")
        if self.placement not in (None, "front", "back"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.selection not in ("gradient", "ggf", "mixed"):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.trim_tau is not None and self.trim_tau < 1:
            raise ValueError("trim_tau must be at least 1")
        if self.trim_kappa < 1:
            raise ValueError("trim_kappa must be at least 1")
        if self.gate_init not in (None, "zero", "ggf_theta_star"):
            raise ValueError(f"unknown gate_init {self.gate_init!r}")
        if self.rotation_sharing not in ("restricted", "unrestricted"):
            raise ValueError(f"unknown rotation sharing {self.rotation_sharing!r}")
        if self.improvement_floor <= 0:
            raise ValueError("improvement_floor must be positive")
        if self.opt_maxfun < 1:
            raise ValueError("opt_maxfun must be at least 1")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)


# ---- results ----------------------------------------------------------------------


@dataclass
class AdaptResult:
    energy: float
    params: np.ndarray
    circuit: FermionicCircuit
    occupation: int
    trajectory: Trajectory
    graph: SurrogateGraph
    hamiltonian: SparseOperator
    pool: Pool
    rotation_spec: list[tuple[int, int, str, int]]
    tensors: IntegralTensors
    config: RunConfig

    def circuit_json(self) -> str:
        payload = json.loads(self.circuit.to_json())
        payload["hf_occupation"] = int(self.occupation)
        return json.dumps(payload, indent=2)

    def dressed_tensors(self) -> IntegralTensors:
        """Integrals with the final active rotations folded in."""
        rotations = [
            (p, q, float(self.params[slot]), sector)
            for p, q, sector, slot in self.rotation_spec
        ]
        return dress_integrals(self.tensors, rotations)


def load_circuit_json(text: str) -> tuple[FermionicCircuit, int]:
    payload = json.loads(text)
    occupation = int(payload.pop("hf_occupation"))
    return FermionicCircuit.from_json(json.dumps(payload)), occupation


# ---- scoring dispatch ---------------------------------------------------------------


def _projector_budget(cutoff: int | None, n_modes: int) -> int | None:
    return None if cutoff is None else min(cutoff // 2, n_modes)


def _gradient_scores(
    pool: Pool,
    indices: Sequence[int],
    placement: str,
    picture: str,
    graph: SurrogateGraph,
    theta: np.ndarray,
    hamiltonian: SparseOperator,
    circuit: FermionicCircuit,
    n_body: int,
    occupation: int,
    policy: TruncationPolicy,
) -> list[SelectionScore]:
    """Derivative magnitudes at theta=0 for a gate at the configured spot.

    A front gate touches the reference state directly, so its derivative
    reads off the fully evolved observable.  A back gate sits between the
    body and the active rotations: the state evolved through the body meets
    the Hamiltonian conjugated through the rotations alone.
    """
    n_modes = hamiltonian.n_modes
    if placement == "front":
        if picture == "heisenberg":
            coeffs, _ = _forward(graph, theta, keep_layers=False)
            evolved = SparseOperator(n_modes, graph.final_keys, coeffs)
        else:
            evolved = propagate(hamiltonian, circuit, "heisenberg", policy, params=theta)
        return score_pool_gradient(pool, evolved, occupation=occupation, indices=indices)
    body = FermionicCircuit(n_modes, list(circuit.gates[:n_body]), theta)
    rotations = FermionicCircuit(n_modes, list(circuit.gates[n_body:]), theta)
    h_rot = propagate(hamiltonian, rotations, "heisenberg", policy, params=theta)
    state = expand_fock_projector(
        occupation, n_modes, _projector_budget(policy.length_cutoff, n_modes)
    )
    state = propagate(state, body, "schrodinger", policy, params=theta)
    return score_pool_gradient(
        pool, state, picture="schrodinger", hamiltonian=h_rot, indices=indices
    )


def _ggf_scores(
    pool: Pool,
    indices: Sequence[int],
    placement: str,
    picture: str,
    graph: SurrogateGraph,
    theta: np.ndarray,
    hamiltonian: SparseOperator,
    circuit: FermionicCircuit,
    n_body: int,
    occupation: int,
    policy: TruncationPolicy,
) -> list[SelectionScore]:
    """Greedy improvement scores, inserting candidates at the body's end.

    Front placement matches the surrogate's own front extension, so the
    pool scorer handles it (incrementally when the picture makes the front
    the natural end).  Back placement must keep the active rotations
    outermost, so each candidate is spliced in before them and the graph
    rebuilt.
    """
    if placement == "front":
        return list(score_pool_ggf(pool, graph, theta, "front", indices))
    half_pi = 0.5 * math.pi
    e0 = eval_energy(graph, theta)
    out = []
    for idx in indices:
        cand = pool.candidates[idx]
        trial = circuit.copy()
        trial.params = np.append(theta, 0.0)
        trial.gates[n_body:n_body] = cand.gates(slot=theta.size)
        trial_graph = build_surrogate(
            hamiltonian, trial, occupation, policy, picture
        )
        if cand.is_composite:
            probes = (half_pi, -half_pi, 0.5 * half_pi, -0.5 * half_pi)
            evals = {
                t: eval_energy(trial_graph, np.append(theta, t)) for t in probes
            }
            evals[0.0] = e0  # a zero-angle gate is an exact identity on the eval
            improvement, theta_star = fit_second_harmonic(evals)
        else:
            ep = eval_energy(trial_graph, np.append(theta, half_pi))
            em = eval_energy(trial_graph, np.append(theta, -half_pi))
            improvement, theta_star = fit_sinusoid(e0, ep, em)
        out.append(SelectionScore(index=idx, score=improvement, theta_star=theta_star))
    return out


# ---- the outer loop ---------------------------------------------------------------


def _check_budget(
    graph: SurrogateGraph, config: RunConfig, trajectory: Trajectory | None
) -> None:
    if config.max_live_monomials is None:
        return
    widest = graph.stats()["max_layer"]
    if widest > config.max_live_monomials:
        raise MemoryBudgetError(
            f"propagation layer holds {widest} monomials, over the budget of "
            f"{config.max_live_monomials}",
            trajectory,
        )


def run_adapt_vmpe(tensors: IntegralTensors, config: RunConfig) -> AdaptResult:
    """Grow and optimize an adaptive circuit for the given integrals.

    Iteration 0 optimizes the active rotations alone; each later iteration
    appends the best-scoring pool candidate at the configured end of the
    body and reoptimizes everything.  The loop stops after max_iterations,
    or as soon as the selected candidate's achievable improvement falls
    under the floor.
    """
    hamiltonian = build_majorana_hamiltonian(tensors)
    max_len = (
        int(_kernels.popcount(hamiltonian.keys).max()) if len(hamiltonian) else 0
    )
    config.validate(max_len)
    n_spatial = tensors.n_spatial
    n_modes = 2 * n_spatial
    occupation = aufbau_occupation(tensors.n_electrons)
    occ_alpha = bin(occupation & 0x5555555555555555).count("1")
    occ_beta = bin(occupation & 0xAAAAAAAAAAAAAAAA).count("1")
    pool = build_majoranic_pool(
        n_spatial, (occ_alpha, occ_beta), constraints=config.pool_constraints
    )
    placement = config.resolved_placement
    if config.reduce_pool and placement == "front":
        # new gates act directly on the reference state there, where whole
        # equivalence classes move it identically
        pool = reduce_pool_equivalence(pool)
    policy = config.policy()
    picture = config.picture
    fast_path = picture == "heisenberg" and placement == "front"

    rot_gates, n_rot_slots, rotation_spec = init_active_rotations(
        n_spatial, config.rotation_sharing
    )
    circuit = FermionicCircuit(n_modes, list(rot_gates), np.zeros(n_rot_slots))
    n_body = 0
    graph = build_surrogate(hamiltonian, circuit, occupation, policy, picture)
    _check_budget(graph, config, None)

    trajectory = Trajectory()
    tic = time.perf_counter()
    theta, energy = optimize_parameters(
        graph, np.zeros(n_rot_slots), config.opt_gtol, config.opt_maxfun
    )
    trajectory.append(
        TrajectoryRow(
            iteration=0,
            energy=energy,
            gate="baseline",
            theta_hash=_theta_hash(theta),
            wall_time_s=time.perf_counter() - tic,
            pool_evaluated=0,
            live_monomials=int(graph.final_keys.size),
        )
    )

    active = list(range(len(pool)))
    for iteration in range(1, config.max_iterations + 1):
        tic = time.perf_counter()
        refresh = is_refresh_iteration(iteration, config.trim_kappa)
        full_pool = refresh or config.trim_tau is None
        indices = list(range(len(pool))) if full_pool else active
        if not indices:
            break
        use_gradient = config.selection == "gradient" or (
            config.selection == "mixed" and refresh
        )
        scorer = _gradient_scores if use_gradient else _ggf_scores
        scores = scorer(
            pool, indices, placement, picture, graph, theta,
            hamiltonian, circuit, n_body, occupation, policy,
        )
        if config.trim_tau is not None:
            active = trim_pool(
                scores, config.trim_tau, config.trim_kappa, iteration,
                larger_is_better=use_gradient,
            )
        best = rank_candidates(scores, larger_is_better=use_gradient)[0]
        if use_gradient:
            ggf_best = _ggf_scores(
                pool, [best.index], placement, picture, graph, theta,
                hamiltonian, circuit, n_body, occupation, policy,
            )[0]
        else:
            ggf_best = best
        if abs(ggf_best.score) < config.improvement_floor:
            break

        candidate = pool.candidates[best.index]
        init_angle = (
            ggf_best.theta_star
            if config.resolved_gate_init(use_gradient) == "ggf_theta_star"
            else 0.0
        )
        slot = theta.size
        gates = candidate.gates(slot)
        if fast_path:
            for gate in gates:
                graph = extend_surrogate(graph, gate, "front")
            circuit = graph.circuit
        else:
            circuit = circuit.copy()
            circuit.params = np.append(circuit.params, 0.0)
            position = 0 if placement == "front" else n_body
            circuit.gates[position:position] = gates
            graph = build_surrogate(hamiltonian, circuit, occupation, policy, picture)
        n_body += len(gates)
        _check_budget(graph, config, trajectory)

        theta, energy = optimize_parameters(
            graph, np.append(theta, init_angle), config.opt_gtol, config.opt_maxfun
        )
        trajectory.append(
            TrajectoryRow(
                iteration=iteration,
                energy=energy,
                gate=candidate.label,
                theta_hash=_theta_hash(theta),
                wall_time_s=time.perf_counter() - tic,
                pool_evaluated=len(indices),
                live_monomials=int(graph.final_keys.size),
            )
        )

    circuit = circuit.copy()
    circuit.params = theta.copy()
    return AdaptResult(
        energy=energy,
        params=theta,
        circuit=circuit,
        occupation=occupation,
        trajectory=trajectory,
        graph=graph,
        hamiltonian=hamiltonian,
        pool=pool,
        rotation_spec=rotation_spec,
        tensors=tensors,
        config=config,
    )
