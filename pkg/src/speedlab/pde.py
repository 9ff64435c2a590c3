"""Finite-difference time stepping on the periodic cell and the truncated line.

Scheme, used uniformly by every consumer in the package:

* transport d u_xx - g u_x: backward Euler with upwinded advection, so each
  step solves an M-matrix system and is order preserving for any dt;
* zero-order term h u in the linear solvers: exponential factor exp(dt*h)
  applied nodewise after the transport solve;
* nonlinear reaction on the truncated line: explicit factor (1 + dt*rate)
  with rates sampled at the old time level.

The exponential split keeps spatially uniform linear problems exact (a
constant potential h produces exactly exp(h*omega) per period) and makes
the potential-shift identity lambda(h + c) = lambda(h) + c hold to
roundoff, which the eigensolver contracts rely on.  The explicit line
reaction carries a first-order bias opposite to the implicit transport's,
and the two cancel in the front speed at the KPP minimizer.  Coefficients
are sampled at the implicit time level t_{n+1}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .coeffs import CoefficientField
from .errors import BlowupError, NonEllipticError, SingularSolve

_DENSE_N = 4  # cyclic systems this small are solved densely


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------

@dataclass
class CellState:
    """Node values on the periodic cell [0, ell), with a time stamp."""

    values: np.ndarray
    t: float
    ell: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("cell state needs a 1-d array of >= 2 nodes")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("cell state contains non-finite values")

    @property
    def nx(self):
        return self.values.size

    @property
    def x(self):
        return np.arange(self.nx) * (self.ell / self.nx)


@dataclass
class LineState:
    """Per-species node values on [x_lo, x_hi] with zero-flux boundaries."""

    values: np.ndarray  # shape (ncomp, N+1)
    t: float
    x_lo: float
    x_hi: float
    boundary: str = "neumann"

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not self.x_lo < self.x_hi:
            raise ValueError("need x_lo < x_hi")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("line state contains non-finite values")

    @property
    def n_nodes(self):
        return self.values.shape[1]

    @property
    def dx(self):
        return (self.x_hi - self.x_lo) / (self.n_nodes - 1)

    @property
    def x(self):
        return self.x_lo + np.arange(self.n_nodes) * self.dx


# ---------------------------------------------------------------------------
# Transport matrices and solves
# ---------------------------------------------------------------------------

def _transport_entries(d_row, g_row, dx):
    """Stencil entries of T = d dxx - g dx with upwinded advection.

    Returns (lower, diag, upper): lower[i] multiplies u_{i-1}, upper[i]
    multiplies u_{i+1}.  Row sums are zero, so constants are stationary.
    """
    d_row = np.asarray(d_row, dtype=float)
    g_row = np.asarray(g_row, dtype=float)
    if np.any(d_row <= 0):
        raise NonEllipticError("diffusion coefficient <= 0 sampled on the grid")
    gp = np.maximum(g_row, 0.0)
    gm = np.minimum(g_row, 0.0)
    lower = d_row / dx**2 + gp / dx
    upper = d_row / dx**2 - gm / dx
    return lower, -(lower + upper), upper


def implicit_transport_banded(d_row, g_row, dx, dt, geometry):
    """Banded form of M = I - dt*T plus cyclic corners when periodic.

    geometry: "cell" (periodic wrap) or "line" (zero-flux, symmetric ghost).
    Returns (ab, corner_top_right, corner_bottom_left); corners are 0.0 for
    the line.  ab is in scipy solve_banded layout for (1, 1) bands.
    """
    lower, diag, upper = _transport_entries(d_row, g_row, dx)
    n = len(diag)
    ab = np.zeros((3, n))
    ab[1, :] = 1.0 - dt * diag
    ab[0, 1:] = -dt * upper[:-1]
    ab[2, :-1] = -dt * lower[1:]
    if geometry == "cell":
        return ab, -dt * lower[0], -dt * upper[-1]
    if geometry == "line":
        # zero-flux: ghost nodes mirror the first interior neighbour
        ab[0, 1] = -dt * (upper[0] + lower[0])
        ab[2, -2] = -dt * (lower[-1] + upper[-1])
        return ab, 0.0, 0.0
    raise ValueError(f"unknown geometry {geometry!r}")


def transport_step_matrix_dense(d_row, g_row, dx, dt, geometry):
    """Dense M = I - dt*T, for inspection and M-matrix verification."""
    ab, c_tr, c_bl = implicit_transport_banded(d_row, g_row, dx, dt, geometry)
    n = ab.shape[1]
    m = np.zeros((n, n))
    m[np.arange(n), np.arange(n)] = ab[1]
    m[np.arange(n - 1), np.arange(1, n)] = ab[0, 1:]
    m[np.arange(1, n), np.arange(n - 1)] = ab[2, :-1]
    if geometry == "cell":
        m[0, -1] += c_tr
        m[-1, 0] += c_bl
    return m


def _solve_line(ab, rhs):
    try:
        return solve_banded((1, 1), ab, rhs, check_finite=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise SingularSolve(str(exc)) from exc


def _solve_cyclic(ab, corner_tr, corner_bl, rhs):
    """Sherman-Morrison solve of the cyclic tridiagonal system."""
    n = ab.shape[1]
    gamma = -ab[1, 0]
    b_mod = ab.copy()
    b_mod[1, 0] -= gamma
    b_mod[1, -1] -= corner_tr * corner_bl / gamma
    u = np.zeros(n)
    u[0] = gamma
    u[-1] = corner_bl
    rhs2 = np.asarray(rhs, dtype=float)
    single = rhs2.ndim == 1
    if single:
        rhs2 = rhs2[:, None]
    stacked = np.concatenate([rhs2, u[:, None]], axis=1)
    sol = _solve_line(b_mod, stacked)
    y, q = sol[:, :-1], sol[:, -1]
    vy = y[0, :] + (corner_tr / gamma) * y[-1, :]
    vq = q[0] + (corner_tr / gamma) * q[-1]
    denom = 1.0 + vq
    if abs(denom) < 1e-300:
        raise SingularSolve("cyclic correction is singular")
    x = y - np.outer(q, vy / denom)
    return x[:, 0] if single else x


def _solve_cell_dense(d_row, g_row, dx, dt, rhs):
    m = transport_step_matrix_dense(d_row, g_row, dx, dt, "cell")
    try:
        return np.linalg.solve(m, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSolve(str(exc)) from exc


def solve_cell_transport(d_row, g_row, dx, dt, rhs):
    """Solve (I - dt*T) u = rhs on the periodic cell (single or multi RHS)."""
    n = np.asarray(rhs).shape[0]
    if n <= _DENSE_N:
        return _solve_cell_dense(d_row, g_row, dx, dt, rhs)
    ab, c_tr, c_bl = implicit_transport_banded(d_row, g_row, dx, dt, "cell")
    return _solve_cyclic(ab, c_tr, c_bl, rhs)


def solve_line_transport(d_row, g_row, dx, dt, rhs):
    """Solve (I - dt*T) u = rhs on the line with zero-flux ends."""
    ab, _, _ = implicit_transport_banded(d_row, g_row, dx, dt, "line")
    return _solve_line(ab, rhs)


# ---------------------------------------------------------------------------
# Generic scalar stepping (coefficients as fields or callables)
# ---------------------------------------------------------------------------

def _coef_at(c, t, x):
    if isinstance(c, CoefficientField):
        return c.evaluate(t, x)
    if callable(c):
        return np.broadcast_to(np.asarray(c(t, x), dtype=float), np.shape(x)).astype(float)
    return np.full(np.shape(x), float(c))


def step_scalar_linear(state, d, g, h, dt):
    """One implicit step of u_t = d u_xx - g u_x + h u.

    Transport is backward Euler with upwinding (sampled at t + dt); the
    zero-order term acts as the exact nodewise factor exp(dt*h).  The step
    maps nonnegative input to nonnegative output unconditionally.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    t_new = state.t + dt
    if isinstance(state, CellState):
        x = state.x
        dx = state.ell / state.nx
        d_row = _coef_at(d, t_new, x)
        g_row = _coef_at(g, t_new, x)
        h_row = _coef_at(h, t_new, x)
        w = solve_cell_transport(d_row, g_row, dx, dt, state.values)
        return CellState(np.exp(dt * h_row) * w, t_new, state.ell)
    if isinstance(state, LineState):
        if state.values.shape[0] != 1:
            raise ValueError("scalar step needs a single-component line state")
        x = state.x
        d_row = _coef_at(d, t_new, x)
        g_row = _coef_at(g, t_new, x)
        h_row = _coef_at(h, t_new, x)
        w = solve_line_transport(d_row, g_row, state.dx, dt, state.values[0])
        return LineState((np.exp(dt * h_row) * w)[None, :], t_new, state.x_lo, state.x_hi)
    raise TypeError("state must be a CellState or LineState")


def period_map(u0, d, g, h, steps_per_period, omega=None):
    """Compose step_scalar_linear over one period; linear in u0."""
    if steps_per_period < 1:
        raise ValueError("steps_per_period must be >= 1")
    if omega is None:
        for c in (d, g, h):
            if isinstance(c, CoefficientField):
                omega = c.omega
                break
        else:
            raise ValueError("omega must be given when no coefficient is a field")
    dt = omega / steps_per_period
    state = u0
    for _ in range(steps_per_period):
        state = step_scalar_linear(state, d, g, h, dt)
    return state


# ---------------------------------------------------------------------------
# Fast linear period map on the cell (row-sampled coefficients)
# ---------------------------------------------------------------------------

class CellPeriodMap:
    """Linear period map of one tilted scalar problem on the field grid.

    Steps dt = omega/nt, one per coefficient row; step j -> j+1 samples all
    coefficients at row (j+1) mod nt.  The growth factor exp(dt*h) is applied
    after the transport solve; the logistic orbit solver uses the identical
    split, which makes converged orbits exact discrete eigenfunctions of the
    map built from their own potential.
    """

    def __init__(self, d: CoefficientField, g, h, shift_mean=True):
        for other in (g, h):
            if not d.same_grid(other):
                raise ValueError("period map fields must share one grid")
        if d.min() <= 0.0:
            raise NonEllipticError("diffusion field must be strictly positive")
        self.nt, self.nx = d.nt, d.nx
        self.omega, self.ell = d.omega, d.ell
        self.dt = d.dt
        self.dx = d.dx
        self._d = d.values
        self._g = g.values
        self._h = h.values
        # factoring out the mean potential keeps the map at unit scale; the
        # potential-shift identity is exact for this scheme, so no accuracy
        # is lost and huge tilts cannot overflow
        self.shift = float(h.values.mean()) if shift_mean else 0.0
        self._growth = np.exp(self.dt * (h.values - self.shift))
        self._matrix = None
        self._solvers = [None] * self.nt

    def _step_rows(self):
        return [(j + 1) % self.nt for j in range(self.nt)]

    def _row_solver(self, r):
        """Cached transport solver for row r (Sherman-Morrison data prebuilt)."""
        if self._solvers[r] is None:
            if self.nx <= _DENSE_N:
                inv = np.linalg.inv(transport_step_matrix_dense(
                    self._d[r], self._g[r], self.dx, self.dt, "cell"))
                self._solvers[r] = lambda rhs, inv=inv: inv @ rhs
            else:
                ab, c_tr, c_bl = implicit_transport_banded(
                    self._d[r], self._g[r], self.dx, self.dt, "cell")
                gamma = -ab[1, 0]
                ab_mod = ab.copy()
                ab_mod[1, 0] -= gamma
                ab_mod[1, -1] -= c_tr * c_bl / gamma
                u = np.zeros(self.nx)
                u[0] = gamma
                u[-1] = c_bl
                q = _solve_line(ab_mod, u)
                vq = q[0] + (c_tr / gamma) * q[-1]

                def solver(rhs, ab_mod=ab_mod, q=q, vq=vq, w=c_tr / gamma):
                    y = _solve_line(ab_mod, rhs)
                    vy = y[0] + w * y[-1]
                    if y.ndim == 1:
                        return y - q * (vy / (1.0 + vq))
                    return y - np.outer(q, vy / (1.0 + vq))

                self._solvers[r] = solver
        return self._solvers[r]

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        for r in self._step_rows():
            v = self._growth[r] * self._row_solver(r)(v)
        return v

    def apply_with_source(self, v, source_steps):
        """March v with additive forcing: w <- E*S*w + dt*source_steps[j].

        source_steps has one row per step j = 0..nt-1, evaluated at the
        arrival time of that step (t_{j+1}).
        """
        v = np.asarray(v, dtype=float)
        f = np.asarray(source_steps, dtype=float)
        for j, r in enumerate(self._step_rows()):
            v = self._growth[r] * self._row_solver(r)(v) + self.dt * f[j]
        return v

    def snapshots(self, v0):
        """All intermediate states: out[j] at t_j, j = 0..nt."""
        out = np.empty((self.nt + 1, self.nx))
        v = np.asarray(v0, dtype=float)
        out[0] = v
        for j, r in enumerate(self._step_rows()):
            v = self._growth[r] * self._row_solver(r)(v)
            out[j + 1] = v
        return out

    def snapshots_with_source(self, v0, source_steps):
        """Forced marching with all intermediate states retained."""
        out = np.empty((self.nt + 1, self.nx))
        v = np.asarray(v0, dtype=float)
        out[0] = v
        f = np.asarray(source_steps, dtype=float)
        for j, r in enumerate(self._step_rows()):
            v = self._growth[r] * self._row_solver(r)(v) + self.dt * f[j]
            out[j + 1] = v
        return out

    def _time_independent(self):
        return (np.all(self._d == self._d[0]) and np.all(self._g == self._g[0])
                and np.all(self._h == self._h[0]))

    def matrix(self):
        """Dense monodromy matrix (the map applied to identity columns)."""
        if self._matrix is None:
            if self._time_independent():
                # every step shares one matrix; binary powering is exact
                one = self._growth[0][:, None] * self._row_solver(0)(np.eye(self.nx))
                self._matrix = np.linalg.matrix_power(one, self.nt)
            else:
                k = np.eye(self.nx)
                for r in self._step_rows():
                    k = self._growth[r][:, None] * self._row_solver(r)(k)
                self._matrix = k
        return self._matrix


# ---------------------------------------------------------------------------
# Nonlinear two-species evolution on the truncated line
# ---------------------------------------------------------------------------

class LineSystemEvolver:
    """IMEX evolution of the competition system or its cooperative transform.

    Transport is implicit per species; the reaction advances explicitly
    through the nodewise factor (1 + dt * rate) with rates sampled at the
    old time level (plus an explicit additive source for the cooperative
    second component).  The explicit reaction and implicit transport carry
    opposite first-order biases that cancel in the front speed at the KPP
    minimizer, where the two exponents coincide.  The reaction Lipschitz
    number dt*L is tracked and must stay below 1 for the step to be order
    preserving and positivity preserving.
    """

    def __init__(self, sys, x_lo, x_hi, form, u2_star=None, upper_guard=None):
        if form not in ("competitive", "cooperative"):
            raise ValueError("form must be 'competitive' or 'cooperative'")
        self.form = form
        self.sys = sys
        self.omega = sys.omega
        self.nt = sys.nt
        self.dt = sys.omega / sys.nt
        self.dx = sys.ell / sys.nx
        n_cells = (x_hi - x_lo) / self.dx
        if abs(n_cells - round(n_cells)) > 1e-9 or abs(x_lo / self.dx - round(x_lo / self.dx)) > 1e-9:
            raise ValueError("domain ends must sit on the coefficient grid")
        self.x_lo, self.x_hi = x_lo, x_hi
        self.n_nodes = int(round(n_cells)) + 1
        self.x = x_lo + np.arange(self.n_nodes) * self.dx
        self._offsets = np.round(self.x / self.dx).astype(int) % sys.nx
        if form == "cooperative":
            if u2_star is None:
                raise ValueError("cooperative form needs the u2* orbit")
            self._u2s = u2_star.snapshots
        else:
            self._u2s = None
        bmax = max(sys.b1.max(), sys.b2.max())
        amin = min(sys.a11.min(), sys.a22.min())
        if amin <= 0:
            raise ValueError("a11 and a22 must be strictly positive")
        self.state_bound = bmax / amin
        self.guard = upper_guard if upper_guard is not None else 10.0 * self.state_bound
        amax = max(sys.a11.max(), sys.a12.max(), sys.a21.max(), sys.a22.max())
        self.reaction_lipschitz = abs(bmax) + 3.0 * amax * self.state_bound
        if self.dt * self.reaction_lipschitz >= 1.0:
            raise ValueError(
                f"dt*Lipschitz = {self.dt * self.reaction_lipschitz:.3f} >= 1; refine nt")

    def _tile(self, f, r):
        return f.values[r % self.nt][self._offsets]

    def _react(self, v, j):
        r = j % self.nt
        s = self.sys
        dt = self.dt
        if self.form == "competitive":
            u1, u2 = v
            rate1 = self._tile(s.b1, r) - self._tile(s.a11, r) * u1 - self._tile(s.a12, r) * u2
            rate2 = self._tile(s.b2, r) - self._tile(s.a21, r) * u1 - self._tile(s.a22, r) * u2
            return np.stack([u1 * (1.0 + dt * rate1), u2 * (1.0 + dt * rate2)])
        v1, v2 = v
        u2s = self._u2s[r][self._offsets]
        a12 = self._tile(s.a12, r)
        a22 = self._tile(s.a22, r)
        rate1 = self._tile(s.b1, r) - a12 * u2s - self._tile(s.a11, r) * v1 + a12 * v2
        rate2 = self._tile(s.b2, r) - 2.0 * a22 * u2s + a22 * v2
        source2 = self._tile(s.a21, r) * v1 * (u2s - v2)
        new1 = v1 * (1.0 + dt * rate1)
        new2 = v2 * (1.0 + dt * rate2) + dt * source2
        return np.stack([new1, new2])

    def _transport(self, v, j):
        r = (j + 1) % self.nt
        s = self.sys
        out = np.empty_like(v)
        for i, (df, gf) in enumerate(((s.d1, s.g1), (s.d2, s.g2))):
            out[i] = solve_line_transport(
                self._tile(df, r), self._tile(gf, r), self.dx, self.dt, v[i])
        return out

    def step(self, v, j):
        """Advance from step index j to j+1 (t = j*dt to (j+1)*dt)."""
        v = self._transport(self._react(v, j), j)
        np.maximum(v, 0.0, out=v)
        m = v.max()
        if not np.isfinite(m) or m > self.guard:
            raise BlowupError(f"state exceeded guard {self.guard:.3g} at step {j}")
        return v

    def run(self, v, j0, n_steps):
        for j in range(j0, j0 + n_steps):
            v = self.step(v, j)
        return v

    def period(self, v, period_index=0):
        """Advance one full period starting at t = period_index*omega."""
        return self.run(v, period_index * self.nt, self.nt)


def evolve_system(state: LineState, sys, form, t0, t1, u2_star=None) -> LineState:
    """Evolve the two-species system on the line from t0 to t1.

    t0 and t1 must sit on the time grid omega/nt.  The competitive and
    cooperative forms are related by v1 = u1, v2 = u2* - u2 up to the
    discretization error of the split scheme.
    """
    if t1 <= t0:
        raise ValueError("need t1 > t0")
    dt = sys.omega / sys.nt
    j0 = t0 / dt
    steps = (t1 - t0) / dt
    if abs(j0 - round(j0)) > 1e-9 or abs(steps - round(steps)) > 1e-9:
        raise ValueError("t0 and t1 must be multiples of omega/nt")
    if form == "cooperative" and u2_star is None:
        u2_star = sys.u2_star()
    ev = LineSystemEvolver(sys, state.x_lo, state.x_hi, form, u2_star=u2_star)
    if state.values.shape[0] != 2:
        raise ValueError("system state needs two components")
    if state.n_nodes != ev.n_nodes:
        raise ValueError("state grid does not match the coefficient grid")
    vals = ev.run(state.values.copy(), int(round(j0)), int(round(steps)))
    return LineState(vals, t1, state.x_lo, state.x_hi)


def dump_snapshot_csv(path, state: LineState, labels=("u1", "u2")):
    """Write one line state as CSV rows t, x, <labels...>."""
    with open(path, "w") as fh:
        fh.write("t,x," + ",".join(labels) + "\n")
        for k in range(state.n_nodes):
            cols = ",".join(repr(float(state.values[i, k])) for i in range(state.values.shape[0]))
            fh.write(f"{state.t!r},{state.x[k]!r},{cols}\n")
