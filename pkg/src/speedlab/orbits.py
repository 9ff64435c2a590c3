"""Semi-trivial periodic orbits of the scalar periodic logistic equation.

For u_t = d u_xx - g u_x + u (c - e u), the sign of the principal eigenvalue
lambda(d, g, c) decides extinction versus a unique positive periodic orbit
that attracts all positive initial data.  The orbit is found by marching the
period map to its attractor from an explicit constant supersolution.

The nonlinear step matches the linear eigensolver split exactly: transport
solve first, then the nodewise growth factor exp(dt*(c - e*u_new)) with the
rate taken implicitly at the new value (a scalar Lambert-W solve per node).
A converged orbit is therefore an exact discrete eigenfunction, eigenvalue
zero, of the period map with potential c - e*u*.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from . import eigen
from .coeffs import CoefficientField
from .errors import NoConvergence
from .pde import CellPeriodMap, _transport_entries, solve_cell_transport

CYCLE_TOL = 1e-8
PERIOD_CAP = 2000
SUPPORT_FRACTION = 0.10  # e must be positive on at least this share of nodes


@dataclass
class PeriodicOrbit:
    """A time-space periodic solution over one period cell.

    snapshots[j] is the state at t_j = j*omega/nt; closure_gap is
    |u(omega, .) - u(0, .)|_inf of the converged cycle.
    """

    snapshots: np.ndarray
    omega: float
    ell: float
    extinct: bool
    residual: float
    closure_gap: float
    periods_marched: int
    lam: float

    @property
    def nt(self):
        return self.snapshots.shape[0]

    @property
    def nx(self):
        return self.snapshots.shape[1]

    def as_field(self) -> CoefficientField:
        return CoefficientField(self.omega, self.ell, self.snapshots, None)

    def min(self):
        return float(self.snapshots.min())

    def max(self):
        return float(self.snapshots.max())


def _nonlinear_period(d, g, c, e, u0):
    """One period of the logistic equation; returns (snapshots, u_end)."""
    nt, nx = d.nt, d.nx
    dt, dx = d.dt, d.dx
    snaps = np.empty((nt, nx))
    u = u0
    for j in range(nt):
        snaps[j] = u
        r = (j + 1) % nt
        w = solve_cell_transport(d.values[r], g.values[r], dx, dt, u)
        a = dt * e.values[r]
        arg = a * w * np.exp(dt * c.values[r])
        u = np.where(a > 0.0,
                     np.real(lambertw(arg)) / np.where(a > 0.0, a, 1.0),
                     w * np.exp(dt * c.values[r]))
    return snaps, u


def logistic_orbit(d, g, c, e, start_value=None) -> PeriodicOrbit:
    """Compute the attracting periodic orbit of u_t = d u_xx - g u_x + u(c - e u).

    Returns the extinct zero orbit when lambda(d, g, c) <= 0; otherwise
    marches from the constant supersolution max(c)/min(e | e > 0) until the
    period-to-period sup change drops below CYCLE_TOL (cap PERIOD_CAP).
    """
    for other in (g, c, e):
        if not d.same_grid(other):
            raise ValueError("orbit fields must share one grid")
    if e.min() < 0.0 or e.max() <= 0.0:
        raise ValueError("need e >= 0 and e not identically zero")
    positive_share = np.mean(e.values > 0.0)
    if positive_share < SUPPORT_FRACTION:
        raise ValueError(
            f"e is positive on only {positive_share:.1%} of nodes; "
            f"the orbit solver requires at least {SUPPORT_FRACTION:.0%}")

    growth = eigen.principal_eigen(d, g, c)
    if growth.lam <= 0.0:
        zeros = np.zeros_like(d.values)
        return PeriodicOrbit(snapshots=zeros, omega=d.omega, ell=d.ell, extinct=True,
                             residual=0.0, closure_gap=0.0, periods_marched=0,
                             lam=growth.lam)

    if start_value is None:
        start_value = c.max() / float(e.values[e.values > 0.0].min())
    u = np.full(d.nx, float(start_value))
    gap = np.inf
    for period in range(1, PERIOD_CAP + 1):
        snaps, u_end = _nonlinear_period(d, g, c, e, u)
        gap = float(np.max(np.abs(u_end - u)))
        u = u_end
        if gap < CYCLE_TOL:
            break
    else:
        raise NoConvergence("orbit cycle gap did not close", iterations=PERIOD_CAP,
                            residual=gap)

    snaps, u_end = _nonlinear_period(d, g, c, e, u)
    closure = float(np.max(np.abs(u_end - snaps[0])))
    orbit = PeriodicOrbit(snapshots=snaps, omega=d.omega, ell=d.ell, extinct=False,
                          residual=0.0, closure_gap=closure, periods_marched=period,
                          lam=growth.lam)
    orbit.residual = orbit_residual(orbit, d, g, c, e)
    return orbit


def orbit_residual(orbit: PeriodicOrbit, d, g, c, e) -> float:
    """A-posteriori certificate: discrete PDE residual plus the closure gap.

    The residual evaluates (u^{j+1}-u^j)/dt - T u^{j+1} - (c - e u^{j+1}) u^{j+1}
    at every step with coefficients at the implicit level, in the sup norm.
    """
    if orbit.extinct:
        raise ValueError("residual is defined for non-extinct orbits only")
    nt, nx = orbit.nt, orbit.nx
    dt, dx = d.dt, d.dx
    snaps = orbit.snapshots
    worst = 0.0
    for j in range(nt):
        r = (j + 1) % nt
        u_new = snaps[r]
        u_old = snaps[j]
        lower, diag, upper = _transport_entries(d.values[r], g.values[r], dx)
        tu = (lower * np.roll(u_new, 1) + diag * u_new + upper * np.roll(u_new, -1))
        h = c.values[r] - e.values[r] * u_new
        res = (u_new - u_old) / dt - tu - h * u_new
        worst = max(worst, float(np.max(np.abs(res))))
    return worst + orbit.closure_gap


def growth_potential(orbit: PeriodicOrbit, c, e) -> CoefficientField:
    """The linearization potential c - e*u* as a field on the orbit grid."""
    return CoefficientField(orbit.omega, orbit.ell,
                            c.values - e.values * orbit.snapshots, None)


def orbit_period_map(orbit: PeriodicOrbit, d, g, c, e) -> CellPeriodMap:
    """Linear period map at the orbit, potential c - e*u* (eigenvalue ~ 0)."""
    return CellPeriodMap(d, g, growth_potential(orbit, c, e))


def dump_orbit_csv(path, orbit: PeriodicOrbit):
    """CSV dump: t, x, u_star."""
    dt = orbit.omega / orbit.nt
    dx = orbit.ell / orbit.nx
    with open(path, "w") as fh:
        fh.write("t,x,u_star\n")
        for j in range(orbit.nt):
            for k in range(orbit.nx):
                fh.write(f"{j * dt!r},{k * dx!r},{orbit.snapshots[j, k]!r}\n")
