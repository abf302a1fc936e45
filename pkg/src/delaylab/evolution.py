"""Time evolution of u'(t) = A u(t) + Phi(u_t) by two independent routes.

The first route is the method of steps: a classical 4-stage explicit
Runge-Kutta sweep where delayed values come from piecewise-linear
interpolation of the already-computed trajectory.  The second route is
the semigroup construction: the unperturbed block action (flowed head,
injected head plus shifted history) composed with the iterated Volterra
terms whose sum is the perturbation series of the full evolution.  Both
produce the same states up to discretisation error, which the test suite
asserts; ``mild_residual`` checks the integrated form of the equation
directly on a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import BlowUpError, BudgetError, PreconditionError
from .functional import (
    CantorKernel,
    DelayFunctional,
    DensityKernel,
    DiscreteDelays,
    apply,
    cantor_grid_weights,
)
from .history import (
    COMPAT_TOL,
    DelayState,
    HistoryGrid,
    history_injection,
    interp_uniform,
    nilpotent_shift,
    segment,
    state_norm,
)

#: Abort threshold for the explicit integrator.
BLOWUP_GUARD = 1e12

#: Work cap for the Volterra iteration, in term count times quadrature nodes.
VOLTERRA_BUDGET = 4_000_000


@dataclass
class SpatialOperator:
    """The instantaneous operator A as an n x n matrix.

    ``kind`` tags matrices with analytic structure ("scalar", "diagonal",
    "laplacian1d", or plain "matrix"); when ``eigenvalues`` are supplied
    they must match the matrix spectrum to 1e-8.  Exponentials use the
    symmetric or diagonalisable eigendecomposition when well conditioned
    and scaling-and-squaring otherwise.
    """

    matrix: np.ndarray
    kind: str = "matrix"
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        self.matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("spatial operator must be a square matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("spatial operator has non-finite entries")
        if self.eigenvalues is not None:
            self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex)
            got = np.sort_complex(np.linalg.eigvals(self.matrix))
            tagged = np.sort_complex(self.eigenvalues)
            scale = 1.0 + np.abs(tagged).max() if tagged.size else 1.0
            if len(got) != len(tagged) or np.abs(got - tagged).max() > 1e-8 * scale:
                raise ValueError("tagged eigenvalues do not match the matrix spectrum")
        self._fact = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def spectrum(self) -> np.ndarray:
        if self.eigenvalues is not None:
            return self.eigenvalues
        return np.linalg.eigvals(self.matrix)

    def _factorization(self):
        if self._fact is None:
            a = self.matrix
            if self.n == 1:
                self._fact = ("scalar", float(a[0, 0]))
            elif np.allclose(a, a.T, atol=1e-12 * (1.0 + np.abs(a).max())):
                w, q = np.linalg.eigh(a)
                self._fact = ("sym", w, q)
            else:
                w, v = np.linalg.eig(a)
                if np.linalg.cond(v) < 1e8:
                    self._fact = ("diag", w, v, np.linalg.inv(v))
                else:
                    self._fact = ("dense",)
        return self._fact

    def propagate(self, x: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Rows of exp(t A) x for each requested t."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        times = np.atleast_1d(np.asarray(times, dtype=float))
        fact = self._factorization()
        if fact[0] == "scalar":
            return np.exp(fact[1] * times)[:, None] * x
        if fact[0] == "sym":
            w, q = fact[1], fact[2]
            coeff = q.T @ x
            return (np.exp(np.outer(times, w)) * coeff) @ q.T
        if fact[0] == "diag":
            w, v, vinv = fact[1], fact[2], fact[3]
            coeff = vinv @ x
            return np.real((np.exp(np.outer(times, w)) * coeff) @ v.T)
        return np.array([scipy.linalg.expm(t * self.matrix) @ x for t in times])

    def expm(self, t: float) -> np.ndarray:
        fact = self._factorization()
        if fact[0] == "scalar":
            return np.array([[np.exp(fact[1] * t)]])
        if fact[0] == "sym":
            w, q = fact[1], fact[2]
            return (q * np.exp(t * w)) @ q.T
        if fact[0] == "diag":
            w, v, vinv = fact[1], fact[2], fact[3]
            return np.real((v * np.exp(t * w)) @ vinv)
        return scipy.linalg.expm(t * self.matrix)

    def min_singular(self, lam: complex) -> float:
        """Smallest singular value of (lam - A); 1/norm of the resolvent."""
        shifted = lam * np.eye(self.n) - self.matrix
        return float(np.linalg.svd(shifted, compute_uv=False)[-1])


def scalar_operator(a: float) -> SpatialOperator:
    return SpatialOperator(np.array([[float(a)]]), kind="scalar", eigenvalues=np.array([a], dtype=complex))


def diagonal_operator(eigs) -> SpatialOperator:
    eigs = np.atleast_1d(np.asarray(eigs, dtype=float))
    return SpatialOperator(np.diag(eigs), kind="diagonal", eigenvalues=eigs.astype(complex))


@dataclass
class SystemModel:
    """One delay equation: the pair (A, Phi) plus the exponent p."""

    A: SpatialOperator
    phi: DelayFunctional
    p: float = 2.0

    def __post_init__(self):
        if not (1.0 <= self.p < np.inf):
            raise ValueError(f"exponent must satisfy 1 <= p < inf, got {self.p}")
        if self.phi.dim is not None and self.phi.dim != self.A.n:
            raise ValueError(
                f"functional dimension {self.phi.dim} does not match operator dimension {self.A.n}"
            )

    @property
    def n(self) -> int:
        return self.A.n

    def char_matrix(self, lam: complex) -> np.ndarray:
        from .functional import char_matrix

        return char_matrix(self.phi, lam, dim=self.n)

    def default_dt(self) -> float:
        # Explicit stepping limit for the diffusive case: dt <= h^2/4.
        if self.A.kind == "laplacian1d":
            h = 1.0 / (self.n + 1)
            raw = min(1e-3, h * h / 4.0)
            return 1.0 / np.ceil(1.0 / raw)
        return 1e-3


@dataclass
class Trajectory:
    """Solution samples at t_j = -1 + j dt; the first 1/dt + 1 rows are
    the initial history.  ``m`` and ``p`` set the grid used by ``segment``."""

    values: np.ndarray
    dt: float
    m: int = 64
    p: float = 2.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        inv = 1.0 / self.dt
        if abs(inv - round(inv)) > 1e-6:
            raise ValueError("1/dt must be an integer so the unit delay is grid aligned")
        if len(self.values) < round(inv) + 1:
            raise ValueError("trajectory must cover at least the initial history [-1, 0]")

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return -1.0 + np.arange(len(self.values)) * self.dt

    @property
    def t_end(self) -> float:
        return -1.0 + (len(self.values) - 1) * self.dt

    @property
    def history_rows(self) -> int:
        return round(1.0 / self.dt) + 1

    def value_at(self, t) -> np.ndarray:
        q = np.atleast_1d(np.asarray(t, dtype=float))
        if q.size and (q.min() < -1.0 - 1e-9 or q.max() > self.t_end + 1e-9):
            raise PreconditionError(
                f"trajectory queried at t outside coverage [-1, {self.t_end:.6g}]"
            )
        out = interp_uniform(self.values, -1.0, self.dt, q)
        return out[0] if np.isscalar(t) else out


# ---------------------------------------------------------------------------
# Method of steps
# ---------------------------------------------------------------------------


def _fold_instantaneous(model: SystemModel):
    """Move any point mass of Phi at delay 0 into the matrix term.

    Returns (A_eff, reduced functional or None); kernels have no atoms so
    only discrete delays are affected.
    """
    a_eff = model.A.matrix.copy()
    phi = model.phi
    if isinstance(phi, DiscreteDelays) and phi.dim is not None:
        at_zero = phi.delays >= -1e-12
        if at_zero.any():
            a_eff = a_eff + phi.matrices[at_zero].sum(axis=0)
            if at_zero.all():
                return a_eff, None
            phi = DiscreteDelays(phi.matrices[~at_zero], phi.delays[~at_zero])
    if isinstance(phi, DiscreteDelays) and phi.dim is None:
        return a_eff, None
    if isinstance(phi, CantorKernel) and phi.c == 0.0:
        return a_eff, None
    return a_eff, phi


def _delay_term(phi: DelayFunctional, m: int):
    """Lookup offsets in [-1, 0) and a reducer turning the delayed values
    into the functional's contribution; avoids building grid objects in
    the integrator's inner loop."""
    if isinstance(phi, DiscreteDelays):
        if phi.dim is None:

            def reduce_empty(vals):
                return np.zeros(vals.shape[1])

            return np.array([-1.0]), reduce_empty
        mats = phi.matrices

        def reduce_discrete(vals):
            return np.einsum("kij,kj->i", mats, vals)

        return phi.delays, reduce_discrete
    if isinstance(phi, CantorKernel):
        offsets = -1.0 + np.arange(m + 1) / m
        w = phi.c * cantor_grid_weights(m, phi.depth)

        def reduce_cantor(vals):
            return w @ vals

        return offsets, reduce_cantor
    if isinstance(phi, DensityKernel):
        offsets = phi.nodes
        w = np.full(phi.m + 1, 1.0 / phi.m)
        w[0] *= 0.5
        w[-1] *= 0.5
        weighted = w[:, None, None] * phi.samples

        def reduce_density(vals):
            return np.einsum("lij,lj->i", weighted, vals)

        return offsets, reduce_density
    raise TypeError(f"unknown functional variant: {type(phi).__name__}")


def solve_steps(model: SystemModel, init: DelayState, T: float, dt: float | None = None) -> Trajectory:
    """Advance the equation by the method of steps with RK4 stages.

    The initial state must satisfy the compatibility condition f(0) = x
    within COMPAT_TOL and 1/dt must be an integer.  Delayed values at
    stage times are read from the piecewise-linear interpolant of the
    already-computed nodes (queries past the frontier extrapolate from
    the last interval).  Any point mass of Phi at delay 0 is folded into
    A before stepping.  Aborts with BlowUpError when the solution norm
    exceeds 1e12.
    """
    if T <= 0:
        raise PreconditionError("horizon T must be positive")
    if dt is None:
        dt = model.default_dt()
    inv = 1.0 / dt
    hist_steps = round(inv)
    if abs(inv - hist_steps) > 1e-6:
        raise PreconditionError(f"1/dt must be an integer, got dt={dt}")
    if init.n != model.n:
        raise ValueError("initial state dimension does not match the model")
    if not init.is_compatible():
        raise PreconditionError(
            f"initial state violates f(0) = x (defect {init.compat_defect():.3e} > {COMPAT_TOL})"
        )
    steps = int(np.ceil(T / dt - 1e-9))
    total = hist_steps + steps + 1
    n = model.n
    vals = np.empty((total, n))
    tgrid = -1.0 + np.arange(hist_steps + 1) * dt
    vals[: hist_steps + 1] = init.history.value_at(tgrid)
    vals[hist_steps] = init.head

    a_eff, phi_red = _fold_instantaneous(model)
    term = _delay_term(phi_red, init.history.m) if phi_red is not None else None

    half = 0.5 * dt
    sixth = dt / 6.0
    if term is not None:
        offsets, reduce_fn = term

        def rhs(s, y, cap):
            # delayed values from nodes computed so far; queries past the
            # frontier extrapolate from the last interval
            pos = (s + offsets + 1.0) * inv
            idx = np.minimum(pos.astype(int), cap)
            frac = (pos - idx)[:, None]
            delayed = vals[idx] * (1.0 - frac) + vals[idx + 1] * frac
            return a_eff @ y + reduce_fn(delayed)

    for j in range(hist_steps, total - 1):
        t = -1.0 + j * dt
        u = vals[j]

        if term is None:
            k1 = a_eff @ u
            k2 = a_eff @ (u + half * k1)
            k3 = a_eff @ (u + half * k2)
            k4 = a_eff @ (u + dt * k3)
        else:
            cap = j - 1
            k1 = rhs(t, u, cap)
            k2 = rhs(t + half, u + half * k1, cap)
            k3 = rhs(t + half, u + half * k2, cap)
            k4 = rhs(t + dt, u + dt * k3, cap)

        new = u + sixth * (k1 + 2.0 * (k2 + k3) + k4)
        if not np.all(np.isfinite(new)) or np.linalg.norm(new) > BLOWUP_GUARD:
            raise BlowUpError(
                f"solution norm exceeded {BLOWUP_GUARD:.0e} at t = {t + dt:.6g}; aborting"
            )
        vals[j + 1] = new

    return Trajectory(vals, dt, m=init.history.m, p=model.p)


def mild_residual(model: SystemModel, traj: Trajectory, t: float) -> float:
    """Defect of the integrated equation at time t.

    Evaluates ||u(t) - x - A * int_0^t u - Phi(int_0^t u_s ds)|| with
    trapezoid quadrature on the trajectory grid; the inner integral of
    the segments is a history-grid-valued quantity.  Requires t to be a
    grid node within the coverage.
    """
    if t < -1e-12 or t > traj.t_end + 1e-9:
        raise PreconditionError(f"residual time {t} outside trajectory coverage")
    hist_rows = traj.history_rows - 1
    jt = (t + 1.0) / traj.dt
    if abs(jt - round(jt)) > 1e-6:
        raise PreconditionError("residual time must be a trajectory grid node")
    jt = round(jt)
    x = traj.values[hist_rows]
    u_t = traj.values[jt]
    count = jt - hist_rows + 1
    if count < 2:
        return float(np.linalg.norm(u_t - x))
    w = np.full(count, traj.dt)
    w[0] *= 0.5
    w[-1] *= 0.5
    rows = traj.values[hist_rows : jt + 1]
    int_u = w @ rows
    s_nodes = traj.times[hist_rows : jt + 1]
    sigma = -1.0 + np.arange(traj.m + 1) / traj.m
    seg_integral = np.empty((traj.m + 1, traj.n))
    for l, s_off in enumerate(sigma):
        seg_integral[l] = w @ traj.value_at(s_nodes + s_off)
    g = HistoryGrid(seg_integral, traj.p)
    resid = u_t - x - model.A.matrix @ int_u - apply(model.phi, g)
    return float(np.linalg.norm(resid))


# ---------------------------------------------------------------------------
# Semigroup route
# ---------------------------------------------------------------------------


def t0_action(A: SpatialOperator, t: float, s: DelayState) -> DelayState:
    """Unperturbed block action: (exp(tA) x, S_t x + T_0(t) f) evaluated
    literally from the injection and shift building blocks."""
    if t < 0:
        raise PreconditionError("time must be nonnegative")
    if t == 0:
        return s.copy()
    head = A.propagate(s.head, np.array([t]))[0]
    hist = history_injection(t, s.head, A, m=s.history.m, p=s.history.p) + nilpotent_shift(
        t, s.history
    )
    return DelayState(head, hist)


def semigroup_action(model: SystemModel, t: float, s: DelayState, dt: float | None = None) -> DelayState:
    """Full evolution (u(t), u_t) obtained from the method of steps."""
    if t < 0:
        raise PreconditionError("time must be nonnegative")
    if t == 0:
        hist = s.history.copy()
        hist.samples[-1] = s.head
        return DelayState(s.head.copy(), hist)
    traj = solve_steps(model, s, t, dt)
    return DelayState(traj.value_at(t), segment(traj, t))


def _segment_of_rows(rows: np.ndarray, dt: float, t: float, m: int, p: float) -> HistoryGrid:
    nodes = t + (-1.0 + np.arange(m + 1) / m)
    return HistoryGrid(interp_uniform(rows, -1.0, dt, nodes), p)


def volterra_terms(model: SystemModel, N: int, t: float, s: DelayState, dt: float | None = None) -> list[DelayState]:
    """Iterated Volterra terms W_0(t) s, ..., W_N(t) s.

    W_0 is the unperturbed block action and W_k(t) s = int_0^t
    T_0(t - r) B W_{k-1}(r) s dr with B(x, f) = (Phi(f), 0), discretised
    by composite trapezoid with the trajectory step.  The integrals are
    accumulated through the exact one-step propagator exp(dt A), which
    evaluates the same quadrature sums without re-nesting them.
    """
    if t < 0:
        raise PreconditionError("time must be nonnegative")
    if N < 0:
        raise ValueError("term count must be nonnegative")
    if dt is None:
        dt = model.default_dt()
    inv = 1.0 / dt
    hist_steps = round(inv)
    if abs(inv - hist_steps) > 1e-6:
        raise PreconditionError(f"1/dt must be an integer, got dt={dt}")
    r_steps = round(t / dt)
    if abs(t - r_steps * dt) > 1e-9:
        raise PreconditionError("t must be a multiple of dt for the Volterra quadrature")
    if (N + 1) * max(r_steps, 1) > VOLTERRA_BUDGET:
        raise BudgetError(
            f"Volterra work {(N + 1) * r_steps} exceeds budget {VOLTERRA_BUDGET}"
        )
    n = model.n
    m = s.history.m
    total = hist_steps + r_steps + 1
    tgrid = -1.0 + np.arange(total) * dt

    rows = np.empty((total, n))
    rows[: hist_steps + 1] = s.history.value_at(tgrid[: hist_steps + 1])
    rows[hist_steps] = s.head
    if r_steps > 0:
        rows[hist_steps + 1 :] = model.A.propagate(s.head, tgrid[hist_steps + 1 :])

    terms = [t0_action(model.A, t, s)]
    if N == 0:
        return terms

    offsets, reduce_fn = _delay_term(model.phi, m)
    e1 = model.A.expm(dt)
    theta = tgrid[hist_steps:]

    for _ in range(1, N + 1):
        v = np.empty((r_steps + 1, n))
        for j in range(r_steps + 1):
            delayed = interp_uniform(rows, -1.0, dt, theta[j] + offsets)
            v[j] = reduce_fn(delayed)
        new_rows = np.zeros((total, n))
        acc = np.zeros(n)
        for j in range(1, r_steps + 1):
            acc = e1 @ (acc + 0.5 * dt * v[j - 1]) + 0.5 * dt * v[j]
            new_rows[hist_steps + j] = acc
        terms.append(DelayState(new_rows[-1].copy(), _segment_of_rows(new_rows, dt, t, m, s.history.p)))
        rows = new_rows
    return terms


def volterra_apply(model: SystemModel, k: int, t: float, s: DelayState, dt: float | None = None) -> DelayState:
    """The k-th iterated Volterra term (k >= 1)."""
    if k < 1:
        raise ValueError("term index must be >= 1")
    return volterra_terms(model, k, t, s, dt)[k]


class DysonResult(NamedTuple):
    """Truncated perturbation series with its truncation indicator."""

    state: DelayState
    last_term_norm: float
    term_norms: tuple[float, ...]


def dyson_phillips(model: SystemModel, t: float, s: DelayState, N: int, dt: float | None = None) -> DysonResult:
    """Partial sum of the perturbation series up to the N-th Volterra term.

    The norm of the final term is reported as a truncation indicator.
    """
    terms = volterra_terms(model, N, t, s, dt)
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    norms = tuple(state_norm(term) for term in terms)
    return DysonResult(total, norms[-1], norms)
