"""Lagrangian systems: two-form assembly, saddle solve, integration."""

import math
import random

import numpy as np
import pytest

from kahlermech.dynamics import (
    InconsistentConstraints,
    LagrangianSystem,
    NonHolomorphicLagrangian,
    PhaseState,
    SemispraySolution,
    SingularKahlerMatrix,
    Trajectory,
    TrajectorySample,
    assemble_kahler_matrix,
    build_standard_lagrangian,
    diagnostics,
    el_residual,
    energy,
    energy_differential,
    integrate,
    solve_semispray,
)
from kahlermech.exterior import contract, one_form, vector
from kahlermech.expressions import (
    Conj,
    Mul,
    Num,
    Re,
    Sym,
    diff,
    evaluate,
    make_point,
    parse_expression,
)
import desksuite
from fdtools import expr_evaluator, fd_kahler_matrix


def _system(text: str, m: int = 1, constraints=(), labels=None) -> LagrangianSystem:
    return LagrangianSystem(m, parse_expression(text, m), constraints, labels)


# ------------------------------------------------------------- construction


def test_holomorphy_gate_rejects_conjugation():
    for text_expr in (
        Mul(Conj(Sym("z", 1)), Sym("w", 1)),
        Re(Sym("z", 1)),
    ):
        with pytest.raises(NonHolomorphicLagrangian) as info:
            LagrangianSystem(1, text_expr)
        assert info.value.subtree is not None


def test_symbol_range_is_validated():
    with pytest.raises(ValueError):
        LagrangianSystem(1, Mul(Sym("z", 2), Sym("w", 1)))


def test_constraint_count_limit():
    L = parse_expression("z1*w1", 1)
    dz1 = one_form([1.0], [0.0])
    dw1 = one_form([0.0], [1.0])
    # r = 2m - 1 = 1 is the most a single pair admits.
    LagrangianSystem(1, L, [dz1])
    with pytest.raises(ValueError):
        LagrangianSystem(1, L, [dz1, dw1])
    with pytest.raises(ValueError):
        LagrangianSystem(1, L, [dz1], labels=["a", "b"])


def test_build_standard_lagrangian():
    L = build_standard_lagrangian([2.0, 1.0], parse_expression("z1^2 + z2^2", 2))
    point = make_point((1.0, 2.0), (3.0, 0.5))
    # m1/2 w1^2 + m2/2 w2^2 - (z1^2 + z2^2)
    assert abs(evaluate(L, point) - (9.0 + 0.125 - 5.0)) < 1e-14
    with pytest.raises(ValueError):
        build_standard_lagrangian([])
    with pytest.raises(ValueError):
        build_standard_lagrangian([-1.0])
    with pytest.raises(ValueError):
        build_standard_lagrangian([1.0], parse_expression("w1^2", 1))
    with pytest.raises(ValueError):
        build_standard_lagrangian([1.0], parse_expression("z2", 2))


# ------------------------------------------------------------ two-form shape


def test_kahler_matrix_of_bilinear_pair():
    system = desksuite.build("bilinear_pair")
    K = assemble_kahler_matrix(system, desksuite.initial_state(desksuite.BY_NAME["bilinear_pair"])).as_matrix()
    assert np.array_equal(K, np.array([[0.0, 2j], [-2j, 0.0]]))


def test_kahler_matrix_cross_block_is_twice_the_hessian():
    system = desksuite.build("coupled_pairs")
    state = desksuite.initial_state(desksuite.BY_NAME["coupled_pairs"])
    K = assemble_kahler_matrix(system, state).as_matrix(state.point())
    H = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert np.allclose(K[:2, 2:], 2j * H, atol=1e-15)
    assert np.allclose(K[2:, :2], -2j * H, atol=1e-15)
    assert np.max(np.abs(K[:2, :2])) == 0.0
    assert np.max(np.abs(K[2:, 2:])) == 0.0


def test_kahler_matrix_tracks_the_state():
    system = desksuite.build("saturating_pair")
    z, w = (0.5 + 0.2j,), (0.4 - 0.1j,)
    state = PhaseState(0.0, z, w)
    K = assemble_kahler_matrix(system, state).as_matrix(state.point())
    u = z[0] * w[0]
    assert abs(K[0, 1] - 2j * (1 + 2 * u)) < 1e-14


def test_kahler_matrix_matches_nested_differences():
    rng = np.random.default_rng(12)
    for name in ("saturating_pair", "exponential_pair", "coupled_pairs"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        fn = expr_evaluator(parse_expression(entry.lagrangian, entry.m))
        for state in desksuite.sample_states(entry, 3, seed=31):
            K = assemble_kahler_matrix(system, state).as_matrix(state.point())
            K_fd = fd_kahler_matrix(fn, state.z, state.w)
            scale = max(1.0, float(np.max(np.abs(K_fd))))
            assert np.max(np.abs(K - K_fd)) <= 1e-6 * scale


def test_degenerate_lagrangians_have_zero_two_form():
    for name in ("degenerate_quadratic", "standard_oscillator"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        state = desksuite.initial_state(entry)
        K = assemble_kahler_matrix(system, state).as_matrix(state.point())
        assert np.max(np.abs(K)) == 0.0


# ------------------------------------------------------------------- energy


def test_energy_against_hand_value():
    system = _system("z1*w1")
    state = PhaseState(0.0, (1.0,), (2.0,))
    xi = vector([2.0], [0.0])
    assert energy(system, state, xi) == -2.0 + 4.0j


def test_energy_of_solved_bilinear_field():
    system = desksuite.build("bilinear_pair")
    z, w = (1.0 + 0.5j,), (2.0 - 1.0j,)
    state = PhaseState(0.0, z, w)
    sol = solve_semispray(system, state)
    # Solved flow is z -> iz, w -> -iw, whose energy is -3 z w.
    assert abs(energy(system, state, sol.xi) - (-3.0 * z[0] * w[0])) < 1e-13


def test_energy_differential_matches_contraction_when_unconstrained():
    for name in ("bilinear_pair", "saturating_pair", "exponential_pair"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        for state in desksuite.sample_states(entry, 4, seed=77):
            sol = solve_semispray(system, state)
            point = state.point()
            lhs = contract(system.kahler_form, sol.xi).coefficient_vector(point)
            rhs = energy_differential(system, state, sol.xi).coefficient_vector(point)
            assert np.max(np.abs(lhs - rhs)) < 1e-11


# -------------------------------------------------------------------- solve


def test_solve_bilinear_rotation():
    system = desksuite.build("bilinear_pair")
    z, w = (0.8 + 0.3j,), (0.5 - 0.4j,)
    sol = solve_semispray(system, PhaseState(0.0, z, w))
    assert abs(sol.xi.hol[0] - 1j * z[0]) < 1e-14
    assert abs(sol.xi.fib[0] - (-1j) * w[0]) < 1e-14
    assert sol.multipliers == ()
    assert sol.residual_symplectic < 1e-14
    assert sol.residual_constraints == 0.0


def test_solve_shifted_rotation():
    system = desksuite.build("shifted_pair")
    z, w = (0.5 - 0.6j,), (-0.2 + 0.7j,)
    sol = solve_semispray(system, PhaseState(0.0, z, w))
    # Affine terms displace the rotation centres: z -> i(z - 1/5), w -> -i(w + 3/10).
    assert abs(sol.xi.hol[0] - 1j * (z[0] - 0.2)) < 1e-14
    assert abs(sol.xi.fib[0] - (-1j) * (w[0] + 0.3)) < 1e-14


def test_solve_with_constraint_against_hand_value():
    system = _system(
        "z1*w1 + (1/2)*w1^2",
        constraints=[one_form([1.0], [0.0])],
        labels=["freeze"],
    )
    sol = solve_semispray(system, PhaseState(0.0, (1.0 + 1.0j,), (2.0,)))
    assert abs(sol.xi.hol[0]) < 1e-13
    assert abs(sol.xi.fib[0] - (-1.0 + 3.0j)) < 1e-13
    assert abs(sol.multipliers[0] - (5.0 + 1.0j)) < 1e-13
    assert sol.residual_constraints < 1e-14


def test_solve_exchange_constraints_are_inactive_on_the_matched_flow():
    # The exchange forms annihilate the unconstrained rotation, so the
    # multipliers vanish and the field is the same as without constraints.
    system = desksuite.build("exchange_constrained")
    entry = desksuite.BY_NAME["exchange_constrained"]
    state = desksuite.initial_state(entry)
    sol = solve_semispray(system, state)
    for i in range(2):
        assert abs(sol.xi.hol[i] - 1j * state.z[i]) < 1e-13
        assert abs(sol.xi.fib[i] + 1j * state.w[i]) < 1e-13
    assert max(abs(lam) for lam in sol.multipliers) < 1e-13


def test_solve_reports_semispray_defect():
    system = desksuite.build("bilinear_pair")
    z, w = (1.0,), (2.0,)
    sol = solve_semispray(system, PhaseState(0.0, z, w))
    # Defect |i z - w| measures how far the state is from second-order form.
    assert abs(sol.semispray_defect - abs(1j * z[0] - w[0])) < 1e-14


def test_degenerate_quadratic_raises_singular():
    system = desksuite.build("degenerate_quadratic")
    state = desksuite.initial_state(desksuite.BY_NAME["degenerate_quadratic"])
    with pytest.raises(SingularKahlerMatrix) as info:
        solve_semispray(system, state)
    assert info.value.state is state
    assert info.value.condition_estimate >= 0.0


def test_standard_oscillator_raises_singular():
    system = desksuite.build("standard_oscillator")
    with pytest.raises(SingularKahlerMatrix):
        solve_semispray(system, PhaseState(0.0, (1.0,), (0.0,)))


def test_exponential_pair_singular_point():
    # exp(z w) degenerates exactly where 1 + z w = 0.
    system = desksuite.build("exponential_pair")
    with pytest.raises(SingularKahlerMatrix):
        solve_semispray(system, PhaseState(0.0, (1.0,), (-1.0,)))


def test_bilinear_with_position_constraint_is_inconsistent():
    # B = 0 leaves no way to enforce dz1 = 0: the saddle system is
    # structurally rank deficient even though the two-form is regular.
    system = _system("z1*w1", constraints=[one_form([1.0], [0.0])])
    with pytest.raises(InconsistentConstraints) as info:
        solve_semispray(system, PhaseState(0.0, (1.0,), (2.0,)))
    assert info.value.condition_estimate >= 0.0


def test_duplicated_constraints_are_inconsistent():
    # A single dz1 constraint is solvable here thanks to the w1^2 coupling;
    # listing it twice makes the saddle system rank deficient.
    text = "z1*w1 + z2*w2 + (1/2)*w1^2"
    dz1 = one_form([1.0, 0.0], [0.0, 0.0])
    state = PhaseState(0.0, (1.0, 0.5), (2.0, 0.25))
    solvable = _system(text, m=2, constraints=[dz1])
    assert solve_semispray(solvable, state).residual_constraints < 1e-13
    system = _system(text, m=2, constraints=[dz1, dz1])
    with pytest.raises(InconsistentConstraints):
        solve_semispray(system, state)


def test_exchange_saddle_degenerates_on_the_matching_locus():
    # The constrained system loses rank where z1 w1 = z2 w2.
    system = desksuite.build("exchange_constrained")
    state = PhaseState(0.0, (1.0, 1.0), (0.5, 0.5))
    with pytest.raises(InconsistentConstraints):
        solve_semispray(system, state)


# ------------------------------------------------------------- EL residuals


def _reference_residual(system, state, xi_hol, xi_fib, lams):
    """Constrained complex Euler-Lagrange residuals recomputed from the
    symbolic first and second derivatives, independent of the solver's
    internal assembly."""
    m = system.m
    L = system.lagrangian
    zs = [Sym("z", i) for i in range(1, m + 1)]
    ws = [Sym("w", i) for i in range(1, m + 1)]
    point = state.point()

    def d(e, s):
        return evaluate(diff(e, s), point)

    Lz = [d(L, s) for s in zs]
    Lw = [d(L, s) for s in ws]
    A = [[d(diff(L, zi), zj) for zj in zs] for zi in zs]
    H = [[d(diff(L, zi), wj) for wj in ws] for zi in zs]
    B = [[d(diff(L, wi), wj) for wj in ws] for wi in ws]
    if system.r:
        W = system._W_eval(state.z, state.w)
    res = []
    for j in range(m):
        value = Lz[j] - 1j * (
            sum(A[j][k] * xi_hol[k] for k in range(m))
            + sum(H[j][k] * xi_fib[k] for k in range(m))
        )
        if system.r:
            value -= sum(lams[a] * W[j, a] for a in range(system.r))
        res.append(value)
    for j in range(m):
        value = Lw[j] + 1j * (
            sum(H[k][j] * xi_hol[k] for k in range(m))
            + sum(B[j][k] * xi_fib[k] for k in range(m))
        )
        if system.r:
            value -= sum(lams[a] * W[m + j, a] for a in range(system.r))
        res.append(value)
    return res


def test_el_residual_matches_reference_at_arbitrary_fields():
    rng = random.Random(21)
    for name in ("bilinear_pair", "saturating_pair", "exchange_constrained"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        for state in desksuite.sample_states(entry, 3, seed=5):
            m = entry.m
            hol = [complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(m)]
            fib = [complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(m)]
            lams = tuple(
                complex(rng.uniform(-1, 1), rng.uniform(-1, 1)) for _ in range(entry.r)
            )
            fake = SemispraySolution(vector(hol, fib), lams, 0.0, 0.0, 0.0)
            got = el_residual(system, state, fake)
            ref = _reference_residual(system, state, hol, fib, lams)
            assert len(got) == 2 * m
            for g, r in zip(got, ref):
                assert abs(g - r) < 1e-12


def test_el_residual_vanishes_on_solutions():
    for name in ("bilinear_pair", "coupled_pairs", "exchange_constrained"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        for state in desksuite.sample_states(entry, 5, seed=15):
            sol = solve_semispray(system, state)
            assert max(abs(v) for v in el_residual(system, state, sol)) < 1e-11


def test_el_residual_of_the_zero_field():
    # With xi = 0 and no multipliers the residuals reduce to the bare
    # gradient (L_z, L_w).
    system = _system("z1*w1")
    state = PhaseState(0.0, (1.5 + 0.5j,), (-0.3 + 2.0j,))
    still = SemispraySolution(vector([0.0], [0.0]), (), 0.0, 0.0, 0.0)
    res = el_residual(system, state, still)
    assert abs(res[0] - state.w[0]) < 1e-15
    assert abs(res[1] - state.z[0]) < 1e-15


# -------------------------------------------------------------- integration


def test_integrate_sample_counts_and_times():
    system = desksuite.build("bilinear_pair")
    s0 = PhaseState(0.0, (1.0,), (0.5,))
    tr = integrate(system, s0, 1.0, 0.1)
    assert tr.status == "completed"
    assert len(tr.samples) == 11
    assert abs(tr.samples[-1].state.t - 1.0) < 1e-9
    short = integrate(system, s0, 0.35, 0.1)
    assert len(short.samples) == 4
    assert abs(short.samples[-1].state.t - 0.3) < 1e-9


def test_integrate_rejects_bad_steps():
    system = desksuite.build("bilinear_pair")
    s0 = PhaseState(0.0, (1.0,), (0.5,))
    with pytest.raises(ValueError):
        integrate(system, s0, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(system, s0, -1.0, 0.1)


def test_integrate_conserves_energy_on_the_bench():
    for name in ("bilinear_pair", "coupled_pairs", "exponential_pair"):
        entry = desksuite.BY_NAME[name]
        system = desksuite.build(name)
        tr = integrate(system, desksuite.initial_state(entry), 2.0, 0.01)
        report = diagnostics(tr)
        assert report.status == "completed"
        assert report.max_energy_drift < 1e-9
        assert report.max_symplectic_residual < 1e-12


def test_integrate_order_window():
    system = desksuite.build("bilinear_pair")
    s0 = desksuite.initial_state(desksuite.BY_NAME["bilinear_pair"])
    coarse, fine = desksuite.RATIO_STEPS
    drift = {}
    for dt in (coarse, fine):
        drift[dt] = diagnostics(integrate(system, s0, 5.0, dt)).max_energy_drift
    ratio = drift[coarse] / drift[fine]
    assert 8.0 <= ratio <= 32.0


def test_integrate_reports_solver_failure_at_start():
    system = desksuite.build("degenerate_quadratic")
    entry = desksuite.BY_NAME["degenerate_quadratic"]
    tr = integrate(system, desksuite.initial_state(entry), 1.0, 0.1)
    assert tr.status == "solver_failure"
    assert tr.failure_kind == "SingularKahlerMatrix"
    assert tr.failure_time == 0.0
    assert tr.samples == []
    report = diagnostics(tr)
    assert report.status == "solver_failure"
    assert report.samples == 0
    assert report.failure_kind == "SingularKahlerMatrix"


def test_integrate_reports_non_finite_states():
    system = desksuite.build("bilinear_pair")
    s0 = PhaseState(0.0, (math.inf,), (0.5,))
    tr = integrate(system, s0, 1.0, 0.1)
    assert tr.status == "non_finite"
    assert tr.failure_kind == "NonFiniteState"
    assert tr.samples == []


def test_integrate_preserves_constraints():
    entry = desksuite.BY_NAME["exchange_constrained"]
    system = desksuite.build("exchange_constrained")
    tr = integrate(system, desksuite.initial_state(entry), 2.0, 0.01)
    report = diagnostics(tr)
    assert report.status == "completed"
    assert report.max_constraint_residual < 1e-12


def test_diagnostics_reports_injected_drift():
    system = desksuite.build("bilinear_pair")
    entry = desksuite.BY_NAME["bilinear_pair"]
    tr = integrate(system, desksuite.initial_state(entry), 1.0, 0.1)
    corrupted = list(tr.samples)
    sample = corrupted[5]
    corrupted[5] = TrajectorySample(sample.state, sample.solution, sample.energy + 1.0)
    report = diagnostics(Trajectory(corrupted, tr.dt, tr.status, None, None))
    assert report.max_energy_drift >= 1.0


def test_phase_state_helpers():
    state = PhaseState(0.5, (1.0 + 1.0j,), (2.0,))
    assert state.m == 1
    assert state.is_finite()
    point = state.point()
    assert point[Sym("z", 1)] == 1.0 + 1.0j
    assert point[Sym("w", 1)] == 2.0
    assert not PhaseState(0.0, (math.nan,), (0.0,)).is_finite()
