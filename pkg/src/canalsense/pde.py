"""Implicit upwind space-time discretization of the characteristic system.

The whole trajectory is one unknown vector xi of length 2*(Nt+1)*Nx,
time-major, with layout [xi1(1..Nx), xi2(1..Nx)] inside each time block.
The operator admits an affine decomposition A(mu) = sum_q theta_q A_q
with mu-independent sparse patterns A_q, and is block lower-bidiagonal in
time, so a full solve is Nt sequential solves with one shared factorized
step matrix.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .channel import (BoundaryCoefficients, Equilibrium, NominalConfig,
                      PhysicalParams, boundary_coefficients,
                      compute_equilibrium, from_characteristic)
from .errors import ConfigurationError, NumericalError

THETA_NAMES = ("one", "inv_dt", "lambda1_dx", "lambda2_dx",
               "gamma", "delta", "w0", "wL")
RHS_NAMES = ("xi1_ic", "xi2_ic", "bc_upstream", "bc_downstream")


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid: Nx points in space, Nt steps in time."""

    Nx: int
    Nt: int
    dx: float
    dt: float
    L: float
    T_star: float

    def __post_init__(self):
        if self.Nx < 2 or self.Nt < 1:
            raise ConfigurationError(
                f"grid needs Nx >= 2 and Nt >= 1 (got Nx={self.Nx}, Nt={self.Nt})")
        if abs(self.Nx * self.dx - self.L) > 1e-12 * max(1.0, self.L):
            raise ConfigurationError("dx * Nx must equal L")
        if abs(self.Nt * self.dt - self.T_star) > 1e-12 * max(1.0, self.T_star):
            raise ConfigurationError("dt * Nt must equal T_star")

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.Nt + 1) * self.Nx

    @property
    def block_size(self) -> int:
        return 2 * self.Nx

    def index(self, component: int, i: int, k: int) -> int:
        """Flat index of xi_component at space point i (1-based) and step k."""
        return self.block_size * k + self.Nx * (component - 1) + (i - 1)


def build_grid(L, T_star, dx, dt) -> Grid:
    """Grid from physical extents and step sizes; steps must divide exactly.

    Raises
    ------
    ConfigurationError
        If dx does not divide L (or dt does not divide T_star) within a
        1e-9 relative tolerance.
    """
    for name, total, step in (("dx", L, dx), ("dt", T_star, dt)):
        if step <= 0 or total <= 0:
            raise ConfigurationError(f"{name} and its extent must be positive")
        count = round(total / step)
        if count < 1 or abs(count * step - total) > 1e-9 * total:
            raise ConfigurationError(
                f"{name}={step} does not divide its extent {total}")
    return Grid(Nx=round(L / dx), Nt=round(T_star / dt), dx=float(dx),
                dt=float(dt), L=float(L), T_star=float(T_star))


def _pattern(grid: Grid, rows, cols, vals) -> sp.csr_matrix:
    n = grid.n_unknowns
    return sp.csr_matrix(
        (np.asarray(vals, dtype=float),
         (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
        shape=(n, n))


@functools.lru_cache(maxsize=8)
def operator_patterns(grid: Grid) -> tuple:
    """The eight mu-independent sparse stencil patterns, ordered as THETA_NAMES."""
    Nx, Nt = grid.Nx, grid.Nt
    idx = grid.index
    steps = range(1, Nt + 1)

    # constant part: step-0 pins plus the unit diagonal of both BC rows
    rows, cols = [], []
    for j in (1, 2):
        for i in range(1, Nx + 1):
            rows.append(idx(j, i, 0))
            cols.append(idx(j, i, 0))
    for k in steps:
        rows += [idx(1, 1, k), idx(2, Nx, k)]
        cols += [idx(1, 1, k), idx(2, Nx, k)]
    pat_one = _pattern(grid, rows, cols, np.ones(len(rows)))

    # time derivative on interior rows: +diag, -previous step
    rows, cols, vals = [], [], []
    for k in steps:
        for i in range(2, Nx + 1):
            r = idx(1, i, k)
            rows += [r, r]
            cols += [idx(1, i, k), idx(1, i, k - 1)]
            vals += [1.0, -1.0]
        for i in range(1, Nx):
            r = idx(2, i, k)
            rows += [r, r]
            cols += [idx(2, i, k), idx(2, i, k - 1)]
            vals += [1.0, -1.0]
    pat_dt = _pattern(grid, rows, cols, vals)

    # upwind transport of xi1 (inflow at i=1)
    rows, cols, vals = [], [], []
    for k in steps:
        for i in range(2, Nx + 1):
            r = idx(1, i, k)
            rows += [r, r]
            cols += [idx(1, i, k), idx(1, i - 1, k)]
            vals += [1.0, -1.0]
    pat_l1 = _pattern(grid, rows, cols, vals)

    # upwind transport of xi2 (inflow at i=Nx)
    rows, cols, vals = [], [], []
    for k in steps:
        for i in range(1, Nx):
            r = idx(2, i, k)
            rows += [r, r]
            cols += [idx(2, i, k), idx(2, i + 1, k)]
            vals += [1.0, -1.0]
    pat_l2 = _pattern(grid, rows, cols, vals)

    # source coupling: gamma multiplies xi1, delta multiplies xi2, in both rows
    rows_g, cols_g, rows_d, cols_d = [], [], [], []
    for k in steps:
        for i in range(2, Nx + 1):
            r = idx(1, i, k)
            rows_g.append(r)
            cols_g.append(idx(1, i, k))
            rows_d.append(r)
            cols_d.append(idx(2, i, k))
        for i in range(1, Nx):
            r = idx(2, i, k)
            rows_g.append(r)
            cols_g.append(idx(1, i, k))
            rows_d.append(r)
            cols_d.append(idx(2, i, k))
    pat_gamma = _pattern(grid, rows_g, cols_g, np.ones(len(rows_g)))
    pat_delta = _pattern(grid, rows_d, cols_d, np.ones(len(rows_d)))

    # boundary-weight parts: row becomes (1 - w0, w0) and (-wL, 1 + wL)
    rows, cols, vals = [], [], []
    for k in steps:
        r = idx(1, 1, k)
        rows += [r, r]
        cols += [idx(1, 1, k), idx(2, 1, k)]
        vals += [-1.0, 1.0]
    pat_w0 = _pattern(grid, rows, cols, vals)

    rows, cols, vals = [], [], []
    for k in steps:
        r = idx(2, Nx, k)
        rows += [r, r]
        cols += [idx(1, Nx, k), idx(2, Nx, k)]
        vals += [-1.0, 1.0]
    pat_wL = _pattern(grid, rows, cols, vals)

    return (pat_one, pat_dt, pat_l1, pat_l2, pat_gamma, pat_delta,
            pat_w0, pat_wL)


@functools.lru_cache(maxsize=8)
def rhs_patterns(grid: Grid) -> tuple:
    """Unit right-hand-side vectors, ordered as RHS_NAMES."""
    Nx, Nt = grid.Nx, grid.Nt
    idx = grid.index
    n = grid.n_unknowns
    e_ic1 = np.zeros(n)
    e_ic2 = np.zeros(n)
    for i in range(1, Nx + 1):
        e_ic1[idx(1, i, 0)] = 1.0
        e_ic2[idx(2, i, 0)] = 1.0
    e_up = np.zeros(n)
    e_dn = np.zeros(n)
    for k in range(1, Nt + 1):
        e_up[idx(1, 1, k)] = 1.0
        e_dn[idx(2, Nx, k)] = 1.0
    return e_ic1, e_ic2, e_up, e_dn


def theta_values(eq: Equilibrium, bc: BoundaryCoefficients, grid: Grid) -> np.ndarray:
    """Affine operator coefficients, last axis ordered as THETA_NAMES.

    Works elementwise: scalar inputs give shape (8,), batched equilibrium
    and boundary data give shape (n, 8).
    """
    parts = np.broadcast_arrays(
        1.0, 1.0 / grid.dt,
        np.asarray(eq.lambda_1) / grid.dx, np.asarray(eq.lambda_2) / grid.dx,
        eq.gamma, eq.delta, bc.w0, bc.wL)
    return np.stack([np.asarray(p, dtype=float) for p in parts], axis=-1)


def rhs_values(xi1_0, xi2_0, bc: BoundaryCoefficients) -> np.ndarray:
    """Affine right-hand-side coefficients, last axis ordered as RHS_NAMES."""
    parts = np.broadcast_arrays(xi1_0, xi2_0, bc.A_coef, bc.C_coef)
    return np.stack([np.asarray(p, dtype=float) for p in parts], axis=-1)


@dataclass(frozen=True)
class SpaceTimeSystem:
    """Affine assembly A(mu) xi = b(mu) for one parameter realization."""

    grid: Grid
    thetas: np.ndarray
    rhs_coeffs: np.ndarray

    def matrix(self) -> sp.csr_matrix:
        patterns = operator_patterns(self.grid)
        acc = self.thetas[0] * patterns[0]
        for theta, pattern in zip(self.thetas[1:], patterns[1:]):
            acc = acc + theta * pattern
        return acc.tocsr()

    def rhs(self) -> np.ndarray:
        vectors = rhs_patterns(self.grid)
        out = np.zeros(self.grid.n_unknowns)
        for coeff, vec in zip(self.rhs_coeffs, vectors):
            out += coeff * vec
        return out


@dataclass(frozen=True)
class StateTrajectory:
    """Flat space-time state vector plus its grid."""

    xi: np.ndarray
    grid: Grid

    def component(self, component: int, k: int) -> np.ndarray:
        """xi1 (component=1) or xi2 (component=2) profile at time step k."""
        g = self.grid
        start = g.index(component, 1, k)
        return self.xi[start:start + g.Nx]

    def step_norms(self) -> np.ndarray:
        """Euclidean norm of the spatial state at each time step."""
        blocks = self.xi.reshape(self.grid.Nt + 1, self.grid.block_size)
        return np.linalg.norm(blocks, axis=1)


def assemble(eq: Equilibrium, bc: BoundaryCoefficients, grid: Grid,
             xi1_0: float, xi2_0: float) -> SpaceTimeSystem:
    """Affine assembly of the implicit upwind system.

    Interior rows advance each characteristic with its upwind stencil and
    the source coupling; the row at i=1 carries the upstream boundary
    relation (inflow side of +lambda_1), the row at i=Nx the downstream
    one (inflow side of -lambda_2); step-0 rows pin the constant initial
    condition.
    """
    return SpaceTimeSystem(grid=grid,
                           thetas=theta_values(eq, bc, grid),
                           rhs_coeffs=rhs_values(xi1_0, xi2_0, bc))


def assemble_direct(eq: Equilibrium, bc: BoundaryCoefficients, grid: Grid,
                    xi1_0: float, xi2_0: float):
    """Entry-by-entry reference assembly, bypassing the affine decomposition.

    Returns (A, b).  Kept deliberately independent of :func:`assemble` so
    the two routes can be checked against each other.
    """
    Nx, Nt, dx, dt = grid.Nx, grid.Nt, grid.dx, grid.dt
    idx = grid.index
    n = grid.n_unknowns
    A = sp.lil_matrix((n, n))
    b = np.zeros(n)

    for i in range(1, Nx + 1):
        A[idx(1, i, 0), idx(1, i, 0)] = 1.0
        b[idx(1, i, 0)] = xi1_0
        A[idx(2, i, 0), idx(2, i, 0)] = 1.0
        b[idx(2, i, 0)] = xi2_0

    for k in range(1, Nt + 1):
        for i in range(2, Nx + 1):
            r = idx(1, i, k)
            A[r, idx(1, i, k)] = 1.0 / dt + eq.lambda_1 / dx + eq.gamma
            A[r, idx(1, i - 1, k)] = -eq.lambda_1 / dx
            A[r, idx(2, i, k)] = eq.delta
            A[r, idx(1, i, k - 1)] = -1.0 / dt
        r = idx(1, 1, k)
        A[r, idx(1, 1, k)] = 1.0 - bc.w0
        A[r, idx(2, 1, k)] = bc.w0
        b[r] = bc.A_coef
        for i in range(1, Nx):
            r = idx(2, i, k)
            A[r, idx(2, i, k)] = 1.0 / dt + eq.lambda_2 / dx + eq.delta
            A[r, idx(2, i + 1, k)] = -eq.lambda_2 / dx
            A[r, idx(1, i, k)] = eq.gamma
            A[r, idx(2, i, k - 1)] = -1.0 / dt
        r = idx(2, Nx, k)
        A[r, idx(1, Nx, k)] = -bc.wL
        A[r, idx(2, Nx, k)] = 1.0 + bc.wL
        b[r] = bc.C_coef

    return A.tocsr(), b


def solve_full(system: SpaceTimeSystem) -> StateTrajectory:
    """March the space-time system one time block at a time.

    The step matrix is identical for every step, so it is factorized once
    and reused for the Nt back-substitutions.  The result matches the
    monolithic solve of A(mu) xi = b(mu) to solver accuracy.
    """
    grid = system.grid
    s = grid.block_size
    A = system.matrix()
    b = system.rhs()
    step_matrix = A[s:2 * s, s:2 * s].tocsc()
    coupling = A[s:2 * s, :s].tocsr()

    xi = np.empty(grid.n_unknowns)
    xi[:s] = b[:s]
    try:
        lu = splu(step_matrix)
    except RuntimeError as exc:
        raise NumericalError(f"singular step matrix at time step 1: {exc}") from exc
    for k in range(1, grid.Nt + 1):
        rhs = b[k * s:(k + 1) * s] - coupling @ xi[(k - 1) * s:k * s]
        xi_k = lu.solve(rhs)
        if not np.all(np.isfinite(xi_k)):
            raise NumericalError(f"non-finite solution at time step {k}")
        xi[k * s:(k + 1) * s] = xi_k
    return StateTrajectory(xi=xi, grid=grid)


def discrete_output(trajectory: StateTrajectory) -> float:
    """Square root of the summed squares of both characteristics over all
    grid points and all time steps (no grid-size normalization)."""
    return float(np.linalg.norm(trajectory.xi))


def evaluate(mu: PhysicalParams, cfg: NominalConfig, grid: Grid) -> float:
    """To-be-controlled output of the full model at one parameter vector."""
    eq = compute_equilibrium(mu.S_b, mu.C, mu.B, cfg.Q_star, cfg.g)
    bc = boundary_coefficients(mu, cfg)
    system = assemble(eq, bc, grid, mu.xi1_0, mu.xi2_0)
    return discrete_output(solve_full(system))


def solve_for(mu: PhysicalParams, cfg: NominalConfig, grid: Grid) -> StateTrajectory:
    """Full trajectory at one parameter vector (same pipeline as evaluate)."""
    eq = compute_equilibrium(mu.S_b, mu.C, mu.B, cfg.Q_star, cfg.g)
    bc = boundary_coefficients(mu, cfg)
    return solve_full(assemble(eq, bc, grid, mu.xi1_0, mu.xi2_0))


def write_trajectory_csv(path, trajectory: StateTrajectory, H_star: float,
                         g: float) -> None:
    """Dump the trajectory as `t,x,xi1,xi2,h,v` rows, one per (step, point).

    Depth and velocity deviations are recovered through the inverse
    characteristic map with the true equilibrium depth.  x runs from 0
    (upstream boundary row) in steps of dx.
    """
    grid = trajectory.grid
    with open(path, "w", newline="") as fh:
        fh.write("t,x,xi1,xi2,h,v\n")
        for k in range(grid.Nt + 1):
            xi1 = trajectory.component(1, k)
            xi2 = trajectory.component(2, k)
            h, v = from_characteristic(xi1, xi2, H_star, g)
            t = k * grid.dt
            for i in range(grid.Nx):
                fh.write(f"{t:.17g},{i * grid.dx:.17g},{xi1[i]:.17g},"
                         f"{xi2[i]:.17g},{h[i]:.17g},{v[i]:.17g}\n")
