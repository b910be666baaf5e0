"""Second-order dynamics from a Lagrangian on the flat complex chart.

A Lagrangian L(z, w) induces a two-form Phi_L = -d(d_J L) whose only
generically nonzero entries couple dz_i with dw_j, an energy function

    E_L = i w_eff^i dL/dz_i - i conj-part - L

evaluated with the solved field, and a linear saddle problem for the
semispray components (xi, xibar) together with the constraint multipliers.
The solver enforces

    i_xi Phi_L = dE_L + lambda^a omega_a,     omega_a(xi) = 0,

where dE_L is differentiated with the field components held frozen and the
xi-dependence then moved to the left-hand side.  Degeneracy of Phi_L and
rank deficiency of the full saddle matrix are reported through distinct
error types so that a structurally meaningless Lagrangian is never
confused with an unsatisfiable constraint configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import linalg
from .expressions import (
    Conj,
    EvalDomainError,
    Expr,
    Im,
    Num,
    Pow,
    Re,
    Sym,
    compile_expr,
    diff,
    make_point,
    simplify,
)
from .exterior import (
    OneForm,
    TwoForm,
    VectorField,
    exterior_derivative,
    vertical_d,
)


class NonHolomorphicLagrangian(Exception):
    """The Lagrangian applies conj/re/im to dynamical symbols."""

    def __init__(self, subtree: Expr):
        super().__init__(
            f"conj/re/im of a dynamical symbol is not allowed in a Lagrangian: {subtree}"
        )
        self.subtree = subtree


class SingularKahlerMatrix(Exception):
    """Phi_L is rank deficient at the requested state (degenerate Lagrangian)."""

    def __init__(self, state: "PhaseState", condition_estimate: float):
        super().__init__(
            f"Kaehler coefficient matrix is singular at t={state.t:g}"
            f" (condition estimate {condition_estimate:.3e})"
        )
        self.state = state
        self.condition_estimate = condition_estimate


class InconsistentConstraints(Exception):
    """The saddle system is rank deficient: constraints cannot be satisfied
    with a unique multiplier at this state."""

    def __init__(self, state: "PhaseState", condition_estimate: float):
        super().__init__(
            f"constraint saddle system is rank deficient at t={state.t:g}"
            f" (condition estimate {condition_estimate:.3e})"
        )
        self.state = state
        self.condition_estimate = condition_estimate


@dataclass(frozen=True)
class PhaseState:
    """A point of the phase chart at time t."""

    t: float
    z: Tuple[complex, ...]
    w: Tuple[complex, ...]

    def __post_init__(self):
        if len(self.z) != len(self.w):
            raise ValueError("position and velocity tuples must have equal length")
        object.__setattr__(self, "z", tuple(complex(c) for c in self.z))
        object.__setattr__(self, "w", tuple(complex(c) for c in self.w))

    @property
    def m(self) -> int:
        return len(self.z)

    def point(self) -> Dict[Sym, complex]:
        return make_point(self.z, self.w)

    def is_finite(self) -> bool:
        return all(
            math.isfinite(c.real) and math.isfinite(c.imag)
            for c in (*self.z, *self.w)
        )


def _walk(e: Expr):
    yield e
    for a in e.args:
        yield from _walk(a)


def _assert_holomorphic(e: Expr) -> None:
    for node in _walk(e):
        if isinstance(node, (Conj, Re, Im)) and node.contains_symbol():
            raise NonHolomorphicLagrangian(node)


def _max_symbol_index(e: Expr) -> int:
    return max((n.index for n in _walk(e) if isinstance(n, Sym)), default=0)


class _CompiledMatrix:
    """Evaluates a matrix of expressions at (z, w); constants are prefilled."""

    def __init__(self, shape: Tuple[int, int]):
        self._base = np.zeros(shape, dtype=complex)
        self._fns: List[Tuple[int, int, Callable]] = []

    def set(self, i: int, j: int, e: Expr) -> None:
        if isinstance(e, Num):
            self._base[i, j] = e.value
        else:
            self._fns.append((i, j, compile_expr(e)))

    def __call__(self, z: Tuple[complex, ...], w: Tuple[complex, ...]) -> np.ndarray:
        out = self._base.copy()
        for i, j, fn in self._fns:
            out[i, j] = fn(z, w)
        return out


class _CompiledAntisym:
    """Upper-triangle compiled entries, mirrored with exact negation."""

    def __init__(self, n: int):
        self._base = np.zeros((n, n), dtype=complex)
        self._fns: List[Tuple[int, int, Callable]] = []

    def set_upper(self, p: int, q: int, e: Expr) -> None:
        if isinstance(e, Num):
            self._base[p, q] = e.value
            self._base[q, p] = -e.value
        else:
            self._fns.append((p, q, compile_expr(e)))

    def __call__(self, z, w) -> np.ndarray:
        out = self._base.copy()
        for p, q, fn in self._fns:
            v = fn(z, w)
            out[p, q] = v
            out[q, p] = -v
        return out


class LagrangianSystem:
    """A Lagrangian with optional linear velocity constraints.

    Second derivatives, the symbolic two-form Phi_L and all constraint
    coefficients are differentiated once at construction and compiled, so
    per-state assembly is a handful of closed-form evaluations.
    """

    def __init__(
        self,
        m: int,
        lagrangian: Expr,
        constraints: Sequence[OneForm] = (),
        labels: Optional[Sequence[str]] = None,
    ):
        if m < 1:
            raise ValueError(f"dimension m must be >= 1, got {m}")
        _assert_holomorphic(lagrangian)
        if _max_symbol_index(lagrangian) > m:
            raise ValueError("Lagrangian uses a symbol index beyond the declared dimension")
        constraints = tuple(constraints)
        for omega in constraints:
            if omega.m != m:
                raise ValueError("constraint form dimension does not match the system")
        if len(constraints) > 2 * m - 1:
            raise ValueError(
                f"at most 2m-1={2 * m - 1} constraints are allowed, got {len(constraints)}"
            )
        self.m = m
        self.lagrangian = lagrangian
        self.constraints = constraints
        if labels is None:
            self.labels = tuple(f"omega{a}" for a in range(1, len(constraints) + 1))
        else:
            if len(labels) != len(constraints):
                raise ValueError(
                    f"got {len(labels)} labels for {len(constraints)} constraints"
                )
            self.labels = tuple(labels)

        zs = [Sym("z", i) for i in range(1, m + 1)]
        ws = [Sym("w", i) for i in range(1, m + 1)]
        self._Lz = [simplify(diff(lagrangian, s)) for s in zs]
        self._Lw = [simplify(diff(lagrangian, s)) for s in ws]
        # Second-derivative blocks: A[i][j] = L_{z_i z_j}, H[i][j] = L_{z_i w_j},
        # B[i][j] = L_{w_i w_j}.
        self._A = [[simplify(diff(self._Lz[i], zs[j])) for j in range(m)] for i in range(m)]
        self._H = [[simplify(diff(self._Lz[i], ws[j])) for j in range(m)] for i in range(m)]
        self._B = [[simplify(diff(self._Lw[i], ws[j])) for j in range(m)] for i in range(m)]

        # Phi_L assembled through the exterior layer: Phi_L = -d(d_J L).
        self.kahler_form: TwoForm = exterior_derivative(vertical_d(lagrangian, m)).scaled(-1)

        n = 2 * m
        self._phi_eval = _CompiledAntisym(n)
        for p in range(n):
            for q in range(p + 1, n):
                entry = self.kahler_form.entry(p, q)
                self._phi_eval.set_upper(p, q, entry if isinstance(entry, Expr) else Num(entry))

        self._dL_eval = _CompiledMatrix((n, 1))
        for i in range(m):
            self._dL_eval.set(i, 0, self._Lz[i])
            self._dL_eval.set(m + i, 0, self._Lw[i])

        self._hess_eval = _CompiledMatrix((n, n))
        for i in range(m):
            for j in range(m):
                self._hess_eval.set(i, j, self._A[i][j])
                self._hess_eval.set(i, m + j, self._H[i][j])
                self._hess_eval.set(m + i, m + j, self._B[i][j])
                # The (w, z) block mirrors L_{z_j w_i} for completeness.
                self._hess_eval.set(m + i, j, self._H[j][i])

        r = len(constraints)
        self._W_eval = _CompiledMatrix((n, r))
        for a, omega in enumerate(constraints):
            for p, c in enumerate(omega.coefficients):
                self._W_eval.set(p, a, c if isinstance(c, Expr) else Num(c))

        self._L_fn = compile_expr(lagrangian)

    @property
    def r(self) -> int:
        return len(self.constraints)

    # -- per-state assembly -------------------------------------------------

    def _blocks_at(self, state: PhaseState):
        """(K, A, H, B, dL, W) evaluated at the state."""
        z, w = state.z, state.w
        K = self._phi_eval(z, w)
        hess = self._hess_eval(z, w)
        m = self.m
        A = hess[:m, :m]
        H = hess[:m, m:]
        B = hess[m:, m:]
        dL = self._dL_eval(z, w)[:, 0]
        W = self._W_eval(z, w)
        return K, A, H, B, dL, W

    def _frozen_energy_coefficient(self, A, H, B) -> np.ndarray:
        """Matrix M with dE_L = M xi - dL when the field is held frozen."""
        return np.block([
            [1j * A.T, -1j * H],
            [1j * H.T, -1j * B.T],
        ])

    def saddle_system(self, state: PhaseState):
        """Assembled saddle data at the state.

        Returns (K, ME, dL, W, saddle, rhs): K alone decides Lagrangian
        degeneracy, the bordered saddle decides constraint consistency.
        """
        K, A, H, B, dL, W = self._blocks_at(state)
        ME = self._frozen_energy_coefficient(A, H, B)
        n, r = 2 * self.m, self.r
        saddle = np.zeros((n + r, n + r), dtype=complex)
        saddle[:n, :n] = K.T - ME
        if r:
            saddle[:n, n:] = -W
            saddle[n:, :n] = W.T
        rhs = np.concatenate([-dL, np.zeros(r, dtype=complex)])
        return K, ME, dL, W, saddle, rhs

    def _solution_from(self, state: PhaseState, K, W, ME, dL, vec) -> "SemispraySolution":
        m, r = self.m, self.r
        xiv = vec[: 2 * m]
        lams = tuple(complex(v) for v in vec[2 * m:])
        xi = VectorField(tuple(complex(v) for v in xiv[:m]), tuple(complex(v) for v in xiv[m:]))
        lhs = K.T @ xiv
        dE = ME @ xiv - dL
        lam_term = W @ np.asarray(lams) if r else 0.0
        res_sym = float(np.max(np.abs(lhs - dE - lam_term)))
        res_con = float(np.max(np.abs(W.T @ xiv))) if r else 0.0
        defect = float(max(abs(xi.hol[i] - state.w[i]) for i in range(m)))
        return SemispraySolution(xi, lams, res_sym, res_con, defect)


@dataclass(frozen=True)
class SemispraySolution:
    """Solved field components, multipliers, and pointwise residuals."""

    xi: VectorField
    multipliers: Tuple[complex, ...]
    residual_symplectic: float
    residual_constraints: float
    semispray_defect: float


@dataclass(frozen=True)
class TrajectorySample:
    state: PhaseState
    solution: SemispraySolution
    energy: complex


@dataclass
class Trajectory:
    samples: List[TrajectorySample]
    dt: float
    status: str  # "completed" | "solver_failure" | "non_finite"
    failure_time: Optional[float] = None
    failure_kind: Optional[str] = None


@dataclass(frozen=True)
class DiagnosticsReport:
    status: str
    samples: int
    max_energy_drift: float
    mean_energy_drift: float
    max_constraint_residual: float
    max_symplectic_residual: float
    max_semispray_defect: float
    failure_time: Optional[float] = None
    failure_kind: Optional[str] = None


def build_standard_lagrangian(masses: Sequence[float], potential: Optional[Expr] = None) -> Expr:
    """Kinetic-minus-potential Lagrangian: sum_i m_i/2 w_i^2 - P(z).

    ``potential`` may only involve position symbols.  Note that the result
    has no z-w cross derivatives, so its two-form is singular: it is the
    canonical degenerate example, useful for the classical comparison layer
    but not integrable by the semispray solver.
    """
    m = len(masses)
    if m < 1:
        raise ValueError("need at least one mass")
    for value in masses:
        if not value > 0:
            raise ValueError(f"masses must be positive, got {value}")
    terms: Expr = Num(0)
    for i, mass in enumerate(masses, start=1):
        terms = terms + Num(0.5 * mass) * Pow(Sym("w", i), 2)
    if potential is not None:
        for node in _walk(potential):
            if isinstance(node, Sym) and node.kind == "w":
                raise ValueError("potential must depend on position symbols only")
        if _max_symbol_index(potential) > m:
            raise ValueError("potential uses a symbol index beyond the dimension")
        terms = terms - potential
    return simplify(terms)


def assemble_kahler_matrix(system: LagrangianSystem, state: PhaseState) -> TwoForm:
    """Phi_L evaluated at the state, exactly antisymmetric."""
    z, w = state.z, state.w
    return TwoForm.from_matrix(system._phi_eval(z, w))


def energy(system: LagrangianSystem, state: PhaseState, xi: VectorField) -> complex:
    """E_L at the state with the supplied field components."""
    if xi.m != system.m:
        raise ValueError("field dimension does not match the system")
    z, w = state.z, state.w
    dL = system._dL_eval(z, w)[:, 0]
    m = system.m
    total = 0j
    for i in range(m):
        total += 1j * xi.hol[i] * dL[i] - 1j * xi.fib[i] * dL[m + i]
    return total - system._L_fn(z, w)


def energy_differential(system: LagrangianSystem, state: PhaseState, xi: VectorField) -> OneForm:
    """dE_L at the state with the field components held frozen."""
    if xi.m != system.m:
        raise ValueError("field dimension does not match the system")
    K, A, H, B, dL, W = system._blocks_at(state)
    ME = system._frozen_energy_coefficient(A, H, B)
    xiv = np.asarray(xi.components)
    coeffs = ME @ xiv - dL
    m = system.m
    return OneForm(tuple(coeffs[:m]), tuple(coeffs[m:]))


def solve_semispray(system: LagrangianSystem, state: PhaseState) -> SemispraySolution:
    """Solve the constrained equalization problem at one state."""
    if state.m != system.m:
        raise ValueError("state dimension does not match the system")
    K, ME, dL, W, saddle, rhs = system.saddle_system(state)
    try:
        linalg.assert_nonsingular(K)
    except linalg.SingularMatrixError as err:
        raise SingularKahlerMatrix(state, err.condition_estimate) from None
    try:
        vec = linalg.solve(saddle, rhs)
    except linalg.SingularMatrixError as err:
        raise InconsistentConstraints(state, err.condition_estimate) from None
    return system._solution_from(state, K, W, ME, dL, vec)


def el_residual(
    system: LagrangianSystem,
    state: PhaseState,
    solution: SemispraySolution,
) -> Tuple[complex, ...]:
    """Constrained Euler-Lagrange residuals at a state.

    The time derivative of the momenta is expanded by the chain rule along
    the supplied field, so the residuals are algebraic in (state, xi,
    multipliers).  Component order is (z-equations, w-equations); with no
    constraints the w-entries coincide with the unconstrained equations and
    the z-entries with their negatives.
    """
    m = system.m
    K, A, H, B, dL, W = system._blocks_at(state)
    xiv = np.asarray(solution.xi.components)
    xih, xif = xiv[:m], xiv[m:]
    lams = np.asarray(solution.multipliers)
    out: List[complex] = []
    for j in range(m):
        dt_Lz = A[j, :] @ xih + H[j, :] @ xif
        value = dL[j] - 1j * dt_Lz
        if system.r:
            value -= lams @ W[j, :]
        out.append(complex(value))
    for j in range(m):
        dt_Lw = H[:, j] @ xih + B[j, :] @ xif
        value = dL[m + j] + 1j * dt_Lw
        if system.r:
            value -= lams @ W[m + j, :]
        out.append(complex(value))
    return tuple(out)


def _advance(state: PhaseState, xi: VectorField, h: float) -> PhaseState:
    return PhaseState(
        state.t + h,
        tuple(z + h * k for z, k in zip(state.z, xi.hol)),
        tuple(w + h * k for w, k in zip(state.w, xi.fib)),
    )


def _rk4_combine(state: PhaseState, ks: Sequence[VectorField], dt: float) -> PhaseState:
    k1, k2, k3, k4 = ks
    sixth = dt / 6.0
    z = tuple(
        z0 + sixth * (a + 2 * b + 2 * c + d)
        for z0, a, b, c, d in zip(state.z, k1.hol, k2.hol, k3.hol, k4.hol)
    )
    w = tuple(
        w0 + sixth * (a + 2 * b + 2 * c + d)
        for w0, a, b, c, d in zip(state.w, k1.fib, k2.fib, k3.fib, k4.fib)
    )
    return PhaseState(state.t + dt, z, w)


_SOLVER_ERRORS = (SingularKahlerMatrix, InconsistentConstraints, EvalDomainError)


def integrate(system: LagrangianSystem, s0: PhaseState, t1: float, dt: float) -> Trajectory:
    """Fixed-step RK4 over [0, t1], re-solving the saddle at every stage.

    The returned trajectory has floor(t1/dt) + 1 samples when integration
    completes; each sample records the state, the stage-one solve (field,
    multipliers and residuals) and the energy with the solved field.  On a
    solver failure or a non-finite state the partial trajectory is returned
    with the failure time and kind recorded instead of raising.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t1 < 0:
        raise ValueError("t1 must be nonnegative")
    n_steps = int(math.floor(t1 / dt + 1e-9))
    samples: List[TrajectorySample] = []
    state = s0
    for step in range(n_steps + 1):
        if not state.is_finite():
            return Trajectory(samples, dt, "non_finite", state.t, "NonFiniteState")
        try:
            sol = solve_semispray(system, state)
        except _SOLVER_ERRORS as err:
            return Trajectory(samples, dt, "solver_failure", state.t, type(err).__name__)
        samples.append(TrajectorySample(state, sol, energy(system, state, sol.xi)))
        if step == n_steps:
            break
        try:
            k1 = sol.xi
            k2 = solve_semispray(system, _advance(state, k1, dt / 2)).xi
            k3 = solve_semispray(system, _advance(state, k2, dt / 2)).xi
            k4 = solve_semispray(system, _advance(state, k3, dt)).xi
        except _SOLVER_ERRORS as err:
            failed_at = getattr(err, "state", None)
            t_fail = failed_at.t if failed_at is not None else state.t
            return Trajectory(samples, dt, "solver_failure", t_fail, type(err).__name__)
        state = _rk4_combine(state, (k1, k2, k3, k4), dt)
    return Trajectory(samples, dt, "completed")


def diagnostics(trajectory: Trajectory) -> DiagnosticsReport:
    """Drift and residual summary over a trajectory."""
    samples = trajectory.samples
    if not samples:
        return DiagnosticsReport(
            trajectory.status, 0, 0.0, 0.0, 0.0, 0.0, 0.0,
            trajectory.failure_time, trajectory.failure_kind,
        )
    e0 = samples[0].energy
    drifts = [abs(s.energy - e0) for s in samples]
    return DiagnosticsReport(
        status=trajectory.status,
        samples=len(samples),
        max_energy_drift=float(max(drifts)),
        mean_energy_drift=float(sum(drifts) / len(drifts)),
        max_constraint_residual=float(max(s.solution.residual_constraints for s in samples)),
        max_symplectic_residual=float(max(s.solution.residual_symplectic for s in samples)),
        max_semispray_defect=float(max(s.solution.semispray_defect for s in samples)),
        failure_time=trajectory.failure_time,
        failure_kind=trajectory.failure_kind,
    )
