"""Pool construction, orbit reduction, and both selection scorers."""

import math

import numpy as np
import pytest
import scipy.linalg

import majprop.instances as inst
from majprop import TruncationPolicy, expectation
from majprop.engine import (
    FermionicCircuit,
    expand_fock_projector,
    propagate,
)
from majprop.hamiltonian import ladder_product
from majprop.monomials import MajoranaMonomial
from majprop.operators import SparseOperator
from majprop.oracle import dense_monomial
from majprop.pool import (
    Pool,
    PoolCandidate,
    SelectionScore,
    build_majoranic_pool,
    is_refresh_iteration,
    rank_candidates,
    reduce_pool_equivalence,
    score_pool_ggf,
    score_pool_gradient,
    score_rows,
    single_excitation_monomials,
    trim_pool,
)
from majprop.surrogate import build_surrogate, eval_energy, extend_surrogate

N = 8
OCC = 0b00001111


def _empty_circuit(n_modes=N):
    return FermionicCircuit(n_modes, [], np.zeros(0))


def _extended_energy(h, circuit, theta, cand, angle, where, policy=None,
                     picture="heisenberg", occ=OCC):
    """Brute-force E(angle) with the candidate placed at one circuit end."""
    trial = circuit.copy()
    trial.params = np.append(theta, angle)
    gates = cand.gates(slot=theta.size)
    if where == "front":
        trial.insert_front(gates)
    else:
        trial.append_back(gates)
    return expectation(h, trial, occ, policy, picture, params=trial.params)


# ---- construction -----------------------------------------------------------


def test_pool_counts_at_reference_scale():
    pool = build_majoranic_pool(20, 10)
    assert pool.describe() == {
        "n_modes": 40,
        "singles": 200,
        "doubles": 14050,
        "total": 14250,
    }


def test_pool_counts_minimal():
    pool = build_majoranic_pool(2, 1)
    info = pool.describe()
    assert (info["singles"], info["doubles"], info["total"]) == (2, 1, 3)
    # the lone double excites both electrons of spatial 1 into spatial 2:
    # odd sites on modes 1..3, even site on mode 4
    double = [c for c in pool.candidates if not c.is_composite][0]
    assert double.generators == (0b10010101,)


def test_pool_empty_without_occupied_orbitals():
    assert len(build_majoranic_pool(3, 0)) == 0


def test_pool_sector_resolved_counts():
    pool = build_majoranic_pool(4, (2, 1))
    info = pool.describe()
    assert info["singles"] == 2 * 2 + 1 * 3
    # one aa pair (C(2,2)C(2,2)), no bb pairs, 4*3 opposite-spin
    assert info["doubles"] == 1 + 12
    labels = [c.label for c in pool.candidates]
    assert len(set(labels)) == len(labels)


def test_pool_rejects_bad_inputs():
    with pytest.raises(ValueError, match="n_spatial"):
        build_majoranic_pool(4, 3, n_virtual=3)
    with pytest.raises(ValueError, match="constraints"):
        build_majoranic_pool(4, 2, constraints="anything-goes")
    with pytest.raises(ValueError, match="align"):
        PoolCandidate((0b0101,), (1, 1), "bad")
    with pytest.raises(ValueError, match="length 2 or 4"):
        PoolCandidate((0b111111,), (1,), "six sites")


def test_single_excitation_monomial_bits():
    odd, even = single_excitation_monomials(1, 2)
    assert (odd, even) == (0b0101, 0b1010)
    assert single_excitation_monomials(2, 1) == (odd, even)
    with pytest.raises(ValueError, match="distinct"):
        single_excitation_monomials(3, 3)


def test_single_excitation_pair_equals_ladder_exponential(rng):
    """exp(theta (a+_p a_q - a+_q a_p)) splits into two commuting rotations."""
    n = 4
    for _ in range(6):
        p, q = map(int, rng.choice(np.arange(1, n + 1), size=2, replace=False))
        lo, hi = sorted((p, q))
        theta = float(rng.uniform(-np.pi, np.pi))
        gen = {}
        for bits, coeff in ladder_product([(hi, True), (lo, False)]).items():
            gen[bits] = gen.get(bits, 0.0) + coeff
        for bits, coeff in ladder_product([(lo, True), (hi, False)]).items():
            gen[bits] = gen.get(bits, 0.0) - coeff
        g_dense = sum(
            coeff * dense_monomial(MajoranaMonomial(bits, n))
            for bits, coeff in gen.items()
        )
        direct = scipy.linalg.expm(theta * g_dense)
        # gate sign -1 on both rotations: exp(-i (-theta)/2 M_a) exp(-i (-theta)/2 M_b)
        a, b = single_excitation_monomials(lo, hi)
        split = scipy.linalg.expm(
            0.5j * theta * dense_monomial(MajoranaMonomial(a, n))
        ) @ scipy.linalg.expm(0.5j * theta * dense_monomial(MajoranaMonomial(b, n)))
        assert np.allclose(direct, split, atol=1e-12)
    # the pool stores exactly that convention
    single = build_majoranic_pool(2, 1).candidates[0]
    assert single.signs == (-1, -1)


def test_double_representative_lies_in_the_fermionic_expansion():
    """a+a+aa - h.c. expands over one-per-mode monomials with an odd number
    of odd sites; the pool representative is one of them."""
    n = 4
    modes = [1, 2, 3, 4]
    gen = {}
    for bits, coeff in ladder_product(
        [(3, True), (4, True), (2, False), (1, False)]
    ).items():
        gen[bits] = gen.get(bits, 0.0) + coeff
    for bits, coeff in ladder_product(
        [(1, True), (2, True), (4, False), (3, False)]
    ).items():
        gen[bits] = gen.get(bits, 0.0) - coeff
    survivors = {b for b, c in gen.items() if abs(c) > 1e-14}
    assert len(survivors) == 8
    odd_mask = 0b01010101
    for bits in survivors:
        assert bin(bits).count("1") == 4
        assert bin(bits & odd_mask).count("1") % 2 == 1
        assert abs(gen[bits].real) < 1e-14  # anti-Hermitian generator
    from majprop.pool import _double_representative

    assert _double_representative(modes) in survivors


# ---- orbit-equivalence reduction ---------------------------------------------


def _one_per_mode_variants(modes):
    out = []
    for pick in range(2 ** len(modes)):
        bits = 0
        for j, mode in enumerate(modes):
            site = 2 * (mode - 1) + ((pick >> j) & 1)
            bits |= 1 << site
        out.append(bits)
    return out


def test_reduction_keeps_one_representative_per_parity_class():
    variants = _one_per_mode_variants([1, 2, 3, 4])
    assert len(variants) == 16
    cands = [
        PoolCandidate((bits,), (1,), f"v{i}") for i, bits in enumerate(variants)
    ]
    reduced = reduce_pool_equivalence(Pool(N, cands))
    assert len(reduced) == 2
    # first occurrence of each parity wins: all-odd (v0) and one-even (v1)
    assert [c.label for c in reduced.candidates] == ["v0", "v1"]


def test_reduction_passes_composites_and_repeated_modes_through():
    a, b = single_excitation_monomials(1, 3)
    comp1 = PoolCandidate((a, b), (1, 1), "c1")
    comp2 = PoolCandidate((a, b), (1, -1), "c2")
    paired = PoolCandidate((0b1111,), (1,), "two sites on two modes")
    pool = Pool(N, [comp1, comp2, paired, comp1])
    reduced = reduce_pool_equivalence(pool)
    assert [c.label for c in reduced.candidates] == ["c1", "c2", "two sites on two modes"]


def test_orbit_members_share_the_energy_improvement(rng):
    """All same-parity one-per-mode monomials move a Fock state identically
    up to the rotation direction, so their GGF scores coincide."""
    h = inst.random_molecular_hamiltonian(N, rng)
    variants = _one_per_mode_variants([1, 2, 5, 7])
    pool = Pool(N, [PoolCandidate((b,), (1,), f"v{i}") for i, b in enumerate(variants)])
    for occupation in (0b00001111, 0b01100101):
        graph = build_surrogate(h, _empty_circuit(), occupation)
        scores = score_pool_ggf(pool, graph, np.zeros(0), where="front")
        by_parity = {0: [], 1: []}
        odd_mask = 0b01010101
        for cand, s in zip(pool.candidates, scores):
            parity = bin(cand.generators[0] & odd_mask).count("1") % 2
            by_parity[parity].append(s)
        for members in by_parity.values():
            assert len(members) == 8
            ref = members[0]
            for s in members[1:]:
                assert s.score == pytest.approx(ref.score, abs=1e-10)
                assert abs(s.theta_star) == pytest.approx(
                    abs(ref.theta_star), abs=1e-10
                )


# ---- gradient scoring ---------------------------------------------------------


def test_gradient_score_is_the_derivative_heisenberg(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 5, rng)
    theta = rng.uniform(-1.0, 1.0, circuit.n_slots)
    evolved = propagate(h, circuit, "heisenberg", params=theta)
    pool = build_majoranic_pool(4, 2)
    scores = score_pool_gradient(pool, evolved, occupation=OCC)
    step = 1e-5
    for idx in (0, 3, 8, 9, 14, 25):
        plus = _extended_energy(h, circuit, theta, pool.candidates[idx], step, "front")
        minus = _extended_energy(h, circuit, theta, pool.candidates[idx], -step, "front")
        fd = (plus - minus) / (2 * step)
        assert scores[idx].score == pytest.approx(abs(fd), rel=1e-6, abs=1e-9)


def test_gradient_score_is_the_derivative_schrodinger(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 5, rng)
    theta = rng.uniform(-1.0, 1.0, circuit.n_slots)
    state = propagate(
        expand_fock_projector(OCC, N), circuit, "schrodinger", params=theta
    )
    pool = build_majoranic_pool(4, 2)
    scores = score_pool_gradient(
        pool, state, picture="schrodinger", hamiltonian=h
    )
    step = 1e-5
    for idx in (0, 3, 8, 9, 14, 25):
        plus = _extended_energy(
            h, circuit, theta, pool.candidates[idx], step, "back",
            picture="schrodinger",
        )
        minus = _extended_energy(
            h, circuit, theta, pool.candidates[idx], -step, "back",
            picture="schrodinger",
        )
        fd = (plus - minus) / (2 * step)
        assert scores[idx].score == pytest.approx(abs(fd), rel=1e-6, abs=1e-9)


def test_gradient_score_zero_for_commuting_generator():
    gamma = 0b01010101  # anticommutes with nothing even
    evolved = SparseOperator.from_arrays(
        N, np.array([0, gamma], dtype=np.uint64), np.array([0.3, 0.7])
    )
    pool = Pool(N, [PoolCandidate((int(gamma),), (1,), "self")])
    scores = score_pool_gradient(pool, evolved, occupation=OCC)
    assert scores[0].score == 0.0
    scores = score_pool_gradient(
        pool, evolved, picture="schrodinger", hamiltonian=evolved
    )
    assert scores[0].score == 0.0


def test_gradient_score_requires_matching_context(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    pool = build_majoranic_pool(4, 2)
    with pytest.raises(ValueError, match="occupation"):
        score_pool_gradient(pool, h)
    with pytest.raises(ValueError, match="Hamiltonian"):
        score_pool_gradient(pool, h, picture="schrodinger")
    with pytest.raises(ValueError, match="picture"):
        score_pool_gradient(pool, h, picture="liouville", occupation=OCC)


def test_gradient_scoring_respects_index_subset(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    pool = build_majoranic_pool(4, 2)
    full = score_pool_gradient(pool, h, occupation=OCC)
    part = score_pool_gradient(pool, h, occupation=OCC, indices=[2, 7, 11])
    assert [s.index for s in part] == [2, 7, 11]
    for s in part:
        assert s.score == full[s.index].score


# ---- GGF scoring --------------------------------------------------------------


def test_ggf_single_monomial_landscape_is_a_sinusoid(rng):
    """Even on a truncated graph the single-gate landscape is exactly
    A sin(theta+B) + C, so the three-point fit reproduces every angle."""
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 8, rng)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    policy = TruncationPolicy(length_cutoff=4)
    graph = build_surrogate(h, circuit, OCC, policy)
    cand = PoolCandidate((int(inst.random_monomial_bits(N, 4, rng)),), (1,), "probe")
    pool = Pool(N, [cand])
    (score,) = score_pool_ggf(pool, graph, theta, where="front")

    e0 = eval_energy(graph, theta)
    ep = _extended_energy(h, circuit, theta, cand, np.pi / 2, "front", policy)
    em = _extended_energy(h, circuit, theta, cand, -np.pi / 2, "front", policy)
    c = 0.5 * (ep + em)
    a_sin, a_cos = e0 - c, 0.5 * (ep - em)
    for _ in range(10):
        t = float(rng.uniform(-np.pi, np.pi))
        fitted = c + a_sin * math.cos(t) + a_cos * math.sin(t)
        brute = _extended_energy(h, circuit, theta, cand, t, "front", policy)
        assert fitted == pytest.approx(brute, abs=1e-10)

    at_star = _extended_energy(h, circuit, theta, cand, score.theta_star, "front", policy)
    assert at_star == pytest.approx(e0 + score.score, abs=1e-10)
    grid = [
        _extended_energy(h, circuit, theta, cand, t, "front", policy)
        for t in np.linspace(-np.pi, np.pi, 201)
    ]
    assert at_star <= min(grid) + 1e-12
    assert score.score <= 0.0


def test_ggf_composite_landscape_has_two_harmonics(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 6, rng)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    policy = TruncationPolicy(length_cutoff=4)
    graph = build_surrogate(h, circuit, OCC, policy)
    a, b = single_excitation_monomials(2, 4)
    cand = PoolCandidate((a, b), (1, 1), "single excitation")
    pool = Pool(N, [cand])
    (score,) = score_pool_ggf(pool, graph, theta, where="front")

    # pin the five harmonic coefficients from five brute-force energies
    probes = [0.0, np.pi / 2, -np.pi / 2, np.pi / 4, -np.pi / 4]
    rows = [
        [1.0, math.cos(t), math.sin(t), math.cos(2 * t), math.sin(2 * t)]
        for t in probes
    ]
    vals = [
        _extended_energy(h, circuit, theta, cand, t, "front", policy) for t in probes
    ]
    coeff = np.linalg.solve(np.array(rows), np.array(vals))
    for _ in range(10):
        t = float(rng.uniform(-np.pi, np.pi))
        fitted = float(
            coeff @ [1.0, math.cos(t), math.sin(t), math.cos(2 * t), math.sin(2 * t)]
        )
        brute = _extended_energy(h, circuit, theta, cand, t, "front", policy)
        assert fitted == pytest.approx(brute, abs=1e-10)

    e0 = eval_energy(graph, theta)
    at_star = _extended_energy(h, circuit, theta, cand, score.theta_star, "front", policy)
    assert at_star == pytest.approx(e0 + score.score, abs=1e-10)
    grid = [
        _extended_energy(h, circuit, theta, cand, t, "front", policy)
        for t in np.linspace(-np.pi, np.pi, 2001)
    ]
    assert at_star <= min(grid) + 1e-10


def test_ggf_flat_landscape_scores_zero():
    h = SparseOperator.from_arrays(
        N, np.array([0b1111], dtype=np.uint64), np.array([0.5])
    )
    graph = build_surrogate(h, _empty_circuit(), OCC)
    pool = Pool(N, [PoolCandidate((0b1111,), (1,), "commutes")])
    (score,) = score_pool_ggf(pool, graph, np.zeros(0))
    assert score.score == 0.0
    assert score.theta_star == 0.0


def test_ggf_back_placement_on_schrodinger_graph(rng):
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 4, rng)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    policy = TruncationPolicy(length_cutoff=6)
    graph = build_surrogate(h, circuit, OCC, policy, "schrodinger")
    a, b = single_excitation_monomials(1, 3)
    pool = Pool(
        N,
        [
            PoolCandidate((a, b), (1, 1), "pair"),
            PoolCandidate((int(inst.random_monomial_bits(N, 4, rng)),), (1,), "mono"),
        ],
    )
    for score, cand in zip(
        score_pool_ggf(pool, graph, theta, where="back"), pool.candidates
    ):
        e0 = eval_energy(graph, theta)
        at_star = _extended_energy(
            h, circuit, theta, cand, score.theta_star, "back", policy, "schrodinger"
        )
        assert at_star == pytest.approx(e0 + score.score, abs=1e-10)
        assert score.score <= 0.0


def test_ggf_rebuild_placement_matches_brute_force(rng):
    """Scoring at the non-natural end (Heisenberg + back) goes through the
    full-rebuild path and must agree with independent propagation."""
    h = inst.random_molecular_hamiltonian(N, rng)
    circuit = inst.random_circuit(N, 5, rng)
    theta = rng.uniform(-np.pi, np.pi, circuit.n_slots)
    policy = TruncationPolicy(length_cutoff=4)
    graph = build_surrogate(h, circuit, OCC, policy, "heisenberg")
    a, b = single_excitation_monomials(2, 5)
    pool = Pool(
        N,
        [
            PoolCandidate((int(inst.random_monomial_bits(N, 4, rng)),), (1,), "mono"),
            PoolCandidate((a, b), (-1, -1), "pair"),
        ],
    )
    e0 = eval_energy(graph, theta)
    for score, cand in zip(
        score_pool_ggf(pool, graph, theta, where="back"), pool.candidates
    ):
        at_star = _extended_energy(
            h, circuit, theta, cand, score.theta_star, "back", policy
        )
        assert at_star == pytest.approx(e0 + score.score, abs=1e-10)
        probe = _extended_energy(h, circuit, theta, cand, 0.8, "back", policy)
        assert probe >= e0 + score.score - 1e-10


# ---- trimming and ranking ------------------------------------------------------


def test_refresh_schedule():
    assert is_refresh_iteration(1, None)
    assert not is_refresh_iteration(2, None)
    assert [it for it in range(1, 10) if is_refresh_iteration(it, 3)] == [1, 3, 6, 9]
    assert all(is_refresh_iteration(it, 1) for it in range(1, 5))


def test_rank_candidates_breaks_ties_by_index():
    scores = [
        SelectionScore(0, 0.5),
        SelectionScore(1, 0.9),
        SelectionScore(2, 0.9),
        SelectionScore(3, 0.1),
    ]
    assert [s.index for s in rank_candidates(scores)] == [1, 2, 0, 3]
    neg = [SelectionScore(s.index, -s.score) for s in scores]
    assert [s.index for s in rank_candidates(neg, larger_is_better=False)] == [
        1, 2, 0, 3,
    ]


def test_trim_pool_semantics():
    scores = [
        SelectionScore(0, 0.5),
        SelectionScore(1, 0.9),
        SelectionScore(2, 0.9),
        SelectionScore(3, 0.1),
    ]
    assert trim_pool(scores, 2, kappa=5, iteration=1) == [1, 2]
    # between refreshes the active set passes through untouched
    assert trim_pool(scores[1:3], 2, kappa=5, iteration=3) == [1, 2]
    # tau at or above the pool size keeps everything
    assert trim_pool(scores, 10, kappa=5, iteration=5) == [0, 1, 2, 3]
    with pytest.raises(ValueError, match="tau_keep"):
        trim_pool(scores, 0, kappa=5, iteration=1)


def test_score_rows_carry_ranks():
    scores = [SelectionScore(4, 0.1), SelectionScore(7, 0.9)]
    rows = score_rows(3, scores)
    assert rows == [(3, 4, 0.1, 2), (3, 7, 0.9, 1)]
