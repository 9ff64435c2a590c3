"""Discretized profile recursion bracketing the nonlinear spreading speeds.

The recursion iterates R[a] = max(floor/n, shift_{-c omega}(period_map(a)))
on non-increasing two-component profiles over a truncated line, starting
from a compactly supported ramp.  The limit's behaviour at the right end
classifies each candidate speed c: profiles that refill to the carrying
level mean c is below the slow edge c*, profiles that vanish mean c is
above the fast edge cbar.  Bisection on c turns the classifications into
brackets for both critical speeds without ever linearizing.

Fractional shifts use linear interpolation followed by a pool-adjacent-
violators projection back onto non-increasing profiles, which restores the
monotonicity invariant the comparison argument needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import InconsistentClassification, NotMonostable, ShiftOutOfRange
from .pde import LineSystemEvolver

DEFAULT_CAP = 300
DEFAULT_BISECTION_STEPS = 8
SUP_CHANGE_TOL = 1e-6
MONOTONE_TOL = 1e-9
BETA_BAND = 0.05   # "beta" when within 5% of the plateau estimate
ZERO_BAND = 0.01   # "zero" when below 1% of the plateau estimate

_RANK = {"beta": 2, "intermediate": 1, "zero": 0}


@dataclass
class Profile:
    """Two-component non-increasing profile on [-A, A]."""

    x: np.ndarray
    values: np.ndarray  # shape (2, N+1)
    beta_est: np.ndarray

    @property
    def half_width(self):
        return float(self.x[-1])

    @property
    def n_nodes(self):
        return self.x.size

    def value_at(self, xq):
        return np.array([np.interp(xq, self.x, self.values[i]) for i in range(2)])

    def copy(self):
        return Profile(self.x, self.values.copy(), self.beta_est)


@dataclass
class RecursionResult:
    profile: Profile
    iterations: int
    converged: bool
    cap_reached: bool
    sup_change: float
    early_beta_exit: bool = False
    ignited: bool = False
    front_history: list = dc_field(default_factory=list)


@dataclass
class SpeedBracket:
    """Bracket [c_lo, c_hi] for one critical speed, with the tested trace."""

    c_lo: float
    c_hi: float
    open_below: bool = False
    open_above: bool = False
    trace: list = dc_field(default_factory=list)
    profiles: dict = dc_field(default_factory=dict)

    @property
    def width(self):
        return self.c_hi - self.c_lo

    def contains(self, c):
        return self.c_lo <= c <= self.c_hi


def pava_nonincreasing(y):
    """L2 projection onto non-increasing sequences (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    if np.all(np.diff(y) <= 0.0):  # typical case: already monotone
        return y.copy()
    n = y.size
    means = np.empty(n)
    counts = np.empty(n, dtype=int)
    m = 0
    for v in y:
        means[m] = v
        counts[m] = 1
        m += 1
        # merge while the tail violates the non-increasing order
        while m > 1 and means[m - 2] < means[m - 1]:
            total = means[m - 2] * counts[m - 2] + means[m - 1] * counts[m - 1]
            counts[m - 2] += counts[m - 1]
            means[m - 2] = total / counts[m - 2]
            m -= 1
    return np.repeat(means[:m], counts[:m])


def _ramp(beta_est, x, half_width):
    """Smooth non-increasing ramp: 0.5*beta for x <= -A/2, zero for x >= 0."""
    shape = np.zeros_like(x)
    shape[x <= -half_width / 2] = 1.0
    mid = (x > -half_width / 2) & (x < 0)
    # cosine ramp: 1 at -A/2, 0 at 0
    shape[mid] = 0.5 * (1.0 + np.cos(np.pi * (x[mid] + half_width / 2) / (half_width / 2)))
    return 0.5 * np.outer(np.asarray(beta_est, dtype=float), shape)


def init_profile(beta_est, A, N) -> Profile:
    """Initial profile: plateau 0.5*beta left of -A/2, exactly zero for x >= 0."""
    beta_est = np.asarray(beta_est, dtype=float)
    if np.any(beta_est <= 0):
        raise ValueError("plateau estimates must be positive")
    if N < 200:
        raise ValueError("need N >= 200 profile nodes")
    x = np.linspace(-A, A, N + 1)
    return Profile(x=x, values=_ramp(beta_est, x, A), beta_est=beta_est)


def _shift_left(x, values, shift, ell):
    """Sample values at x + shift by linear interpolation.

    Queries beyond the right end continue the profile geometrically at the
    decay rate measured over [A-4L, A-2L], clear of the zone the zero-flux
    wall flattens (exact for an exponential tail, a constant extension when
    the profile has levelled off).  A constant extension measured at the
    wall would feed the undrained wall value back in every iteration, and
    the growing tail would spuriously ignite the right end.  Queries beyond
    the left end take the plateau value.
    """
    dx = x[1] - x[0]
    k_b = max(1, x.size - 1 - int(round(2.0 * ell / dx)))
    k_a = max(0, x.size - 1 - int(round(4.0 * ell / dx)))
    span = k_b - k_a
    out = np.empty_like(values)
    for i in range(values.shape[0]):
        v = values[i]
        q = x + shift
        out[i] = np.interp(q, x, v)
        beyond = q > x[-1]
        if beyond.any():
            tail = 0.0
            if v[-1] > 0.0 and v[k_a] > 0.0 and span > 0:
                ratio = min((v[k_b] / v[k_a]) ** (1.0 / span), 1.0)
                tail = v[-1] * ratio ** ((q[beyond] - x[-1]) / dx)
            out[i][beyond] = tail
    return out


def apply_R(p: Profile, c, n_index, sys, u2_star=None, evolver=None, floor=None) -> Profile:
    """One recursion step: evolve one period, shift by c*omega, clamp, floor.

    The profile is evolved under the cooperative nonlinear period map on the
    truncated line, translated so the frame moves with speed c, projected
    back onto non-increasing profiles, clipped into [0, beta], and finally
    maxed with (1/n_index) times the initial ramp.
    """
    if n_index < 1:
        raise ValueError("n_index must be >= 1")
    A = p.half_width
    shift = c * sys.omega
    if abs(shift) > A / 4.0:
        raise ShiftOutOfRange(f"|c*omega| = {abs(shift):.3g} exceeds A/4 = {A / 4:.3g}")
    if evolver is None:
        if u2_star is None:
            u2_star = sys.u2_star()
        evolver = LineSystemEvolver(sys, -A, A, "cooperative", u2_star=u2_star)
    if floor is None:
        floor = _ramp(p.beta_est, p.x, A)

    evolved = evolver.period(p.values.copy())
    shifted = _shift_left(p.x, evolved, shift, sys.ell)
    clamped = np.stack([pava_nonincreasing(shifted[i]) for i in range(2)])
    np.clip(clamped, 0.0, p.beta_est[:, None], out=clamped)
    new_values = np.maximum(clamped, floor / float(n_index))
    return Profile(x=p.x, values=new_values, beta_est=p.beta_est)


def _front_position(profile: Profile, level):
    """Rightmost crossing of component 1 below `level` (linear interpolation)."""
    v = profile.values[0]
    x = profile.x
    above = v >= level
    if not above.any():
        return float(x[0])
    k = int(np.max(np.nonzero(above)))
    if k == x.size - 1:
        return float(x[-1])
    frac = (v[k] - level) / max(v[k] - v[k + 1], 1e-300)
    return float(x[k] + frac * (x[k + 1] - x[k]))


def _tail_rate_estimate(sys, u2_star):
    """Linearized invasion tail rate sqrt(growth/diffusion).

    Decay rate of the radiation ceiling.  This is the neutral choice: an
    exponential envelope spreads at lambda(mu)/mu, which is minimal (equal
    to the linear front speed) exactly at the true tail rate, so the
    ceiling neither outruns nor holds back the genuine front.  A shallower
    ceiling would itself invade faster than the front; a much steeper one
    would clip legitimate tail mass.
    """
    from . import eigen
    pot = sys.b1 - sys.a12 * u2_star.as_field()
    growth = eigen.principal_eigen(sys.d1, sys.g1, pot).lam
    if growth <= 0:
        return None
    return float(np.sqrt(growth / sys.d1.values.mean()))


def recursion_limit(c, n_index, sys, cap=DEFAULT_CAP, A=None, N=None,
                    u2_star=None, beta_est=None, profile=None,
                    stop_probe=None, envelope_mu=None) -> RecursionResult:
    """Iterate the recursion until the sup change drops below 1e-6 or cap.

    The iteration is nondecreasing in the step count (asserted nodewise each
    step), so the limit exists; hitting the cap returns the last profile
    with a warning flag instead of raising.  stop_probe, when given as
    (x_station, level), ends the run early once component 1 exceeds `level`
    at the station, which is sound for lower-bound classification because
    the iterates only grow.

    Truncation guard: on a finite domain the zero-flux wall accumulates the
    growing tail of the floor-pinned profile, and the vacuum between front
    and wall eventually ignites no matter how large A is (on the infinite
    line that mass radiates away).  Each iterate is therefore clipped under
    the radiation ceiling beta * exp(-mu_env * (x - front - 4L)), a moving
    envelope far shallower than any admissible tail, which caps the wall
    charge without touching the front dynamics and preserves the exact
    monotonicity of the iteration.  Should ignition still occur the run
    stops flagged `ignited` and classification falls back on the recorded
    front drift instead of the contaminated station value.
    """
    if u2_star is None:
        u2_star = sys.u2_star()
    if profile is None:
        if beta_est is None:
            u1_star = sys.u1_star()
            beta_est = np.array([u1_star.snapshots[0].max(), u2_star.snapshots[0].max()])
        if A is None:
            A = max(10.0 * sys.ell, 12.0 * sys.ell)
        if N is None:
            N = int(round(2 * A * sys.nx / sys.ell))  # profile nodes on the solver grid
        profile = init_profile(beta_est, A, N)
    if envelope_mu is None:
        envelope_mu = _tail_rate_estimate(sys, u2_star)
    A = profile.half_width
    evolver = LineSystemEvolver(sys, -A, A, "cooperative", u2_star=u2_star)
    floor = _ramp(profile.beta_est, profile.x, A)
    beta1 = float(profile.beta_est[0])
    front_level = 0.4 * beta1

    def apply_ceiling(prof):
        if envelope_mu is None:
            return
        anchor = _front_position(prof, front_level) + 4.0 * sys.ell
        decay = np.exp(-envelope_mu * np.maximum(prof.x - anchor, 0.0))
        np.minimum(prof.values, prof.beta_est[:, None] * decay[None, :],
                   out=prof.values)

    current = profile
    apply_ceiling(current)
    sup_change = np.inf
    early = False
    ignited = False
    iterations = 0
    fronts = []
    for m in range(1, cap + 1):
        new = apply_R(current, c, n_index, sys, u2_star=u2_star,
                      evolver=evolver, floor=floor)
        apply_ceiling(new)
        # nondecreasing in m up to the truncated-tail tolerance; the iterate
        # is NOT clipped against its predecessor, a ratchet would keep every
        # boundary-inflated tail value alive and ignite the right end
        worst_drop = float(np.max(current.values - new.values))
        if worst_drop > max(MONOTONE_TOL, 1e-7 * float(profile.beta_est.max())):
            raise RuntimeError(f"recursion lost monotonicity by {worst_drop:.3g}")
        sup_change = float(np.max(np.abs(new.values - current.values)))
        current = new
        iterations = m
        front = _front_position(current, front_level)
        fronts.append(front)
        if current.values[0, -1] > 0.05 * beta1 and front < A - 6.0 * sys.ell:
            ignited = True
            break
        if stop_probe is not None:
            x_station, level = stop_probe
            if current.value_at(x_station)[0] >= level:
                early = True
                break
        if sup_change < SUP_CHANGE_TOL:
            break
    converged = (sup_change < SUP_CHANGE_TOL or early) and not ignited
    return RecursionResult(profile=current, iterations=iterations, converged=converged,
                           cap_reached=not converged and not ignited and iterations >= cap,
                           sup_change=sup_change, early_beta_exit=early,
                           ignited=ignited, front_history=fronts)


def classify_profile(result: RecursionResult, sys, station=None, drift_tol=None):
    """Classify a recursion run by species 1 at the station x = A - 2L.

    Clean runs use the station value: beta within 5% of the plateau, zero
    below 1%, intermediate otherwise.  Ignited runs cannot trust the station
    value; they are classified beta only when the recorded front drift
    certifies a steady advance (sound, since the measured drift of the
    monotone iteration underestimates the limiting speed), and never zero.
    """
    p = result.profile
    if station is None:
        station = p.half_width - 2.0 * sys.ell
    if drift_tol is None:
        drift_tol = 0.01 * sys.ell
    value = float(p.value_at(station)[0])
    beta1 = float(p.beta_est[0])
    left = float(p.value_at(-p.half_width + 2.0 * sys.ell)[0])
    if result.early_beta_exit:
        return "beta", value, left
    if result.ignited:
        fronts = result.front_history
        skip = max(5, len(fronts) // 4)
        if len(fronts) - skip >= 5:
            drift = float(np.median(np.diff(fronts[skip:])))
        else:
            drift = 0.0
        return ("beta" if drift >= drift_tol else "intermediate"), value, left
    if value >= (1.0 - BETA_BAND) * beta1:
        cls = "beta"
    elif value < ZERO_BAND * beta1:
        cls = "zero"
    else:
        cls = "intermediate"
    return cls, value, left


def bracket_speeds(sys, c_grid_or_bisection, n_index=1, cap=DEFAULT_CAP,
                   A=None, N=None, skip_checks=False, keep_profiles=False):
    """Bracket the slow and fast critical speeds by classifying candidate c.

    c_grid_or_bisection is either an explicit iterable of speeds to classify
    or a tuple (c_lo, c_hi, steps) driving two bisections on the shared
    classification cache: the beta/not-beta transition brackets the slow
    edge, the positive/zero transition brackets the fast edge.  A
    classification trace that is non-monotone along c raises
    InconsistentClassification.
    """
    if not skip_checks:
        _check_monostable(sys)
    u2_star = sys.u2_star()
    u1_star = sys.u1_star()
    beta_est = np.array([u1_star.snapshots[0].max(), u2_star.snapshots[0].max()])

    if isinstance(c_grid_or_bisection, tuple) and len(c_grid_or_bisection) == 3:
        c_lo, c_hi, steps = c_grid_or_bisection
        grid_mode = False
    else:
        cs = sorted(float(c) for c in c_grid_or_bisection)
        c_lo, c_hi, steps = cs[0], cs[-1], 0
        grid_mode = True

    if A is None:
        A = max(12.0 * sys.ell, 4.0 * abs(c_hi) * sys.omega + 2.0 * sys.ell)
        A = ceil_to_multiple(A, sys.ell)
    if N is None:
        N = max(200, int(round(2 * A * sys.nx / sys.ell)))
    base = init_profile(beta_est, A, N)
    station = A - 2.0 * sys.ell
    drift_tol = max(1e-4, 0.25 * (c_hi - c_lo) / 2 ** max(steps, 1) * sys.omega)
    envelope_mu = _tail_rate_estimate(sys, u2_star)

    cache = {}
    profiles = {}

    def classify(c):
        if c not in cache:
            res = recursion_limit(c, n_index, sys, cap=cap, u2_star=u2_star,
                                  profile=base.copy(), envelope_mu=envelope_mu,
                                  stop_probe=(station, (1.0 - BETA_BAND) * beta_est[0]))
            cache[c] = classify_profile(res, sys, station, drift_tol=drift_tol)
            if keep_profiles:
                profiles[c] = (res.profile, res.iterations)
        return cache[c][0]

    if grid_mode:
        for c in cs:
            classify(c)
    else:
        lo_cls = classify(c_lo)
        hi_cls = classify(c_hi)
        # beta/not-beta transition
        if lo_cls == "beta" and hi_cls != "beta":
            lo, hi = c_lo, c_hi
            for _ in range(steps):
                mid = 0.5 * (lo + hi)
                if classify(mid) == "beta":
                    lo = mid
                else:
                    hi = mid
        # positive/zero transition
        if lo_cls != "zero" and hi_cls == "zero":
            lo, hi = c_lo, c_hi
            for _ in range(steps):
                mid = 0.5 * (lo + hi)
                if classify(mid) == "zero":
                    hi = mid
                else:
                    lo = mid

    trace = sorted((c, *cache[c]) for c in cache)
    ranks = [_RANK[t[1]] for t in trace]
    if any(r2 > r1 for r1, r2 in zip(ranks, ranks[1:])):
        raise InconsistentClassification(
            "classification is non-monotone along c", trace=trace)

    betas = [c for c, cls, *_ in trace if cls == "beta"]
    not_betas = [c for c, cls, *_ in trace if cls != "beta"]
    zeros = [c for c, cls, *_ in trace if cls == "zero"]
    not_zeros = [c for c, cls, *_ in trace if cls != "zero"]

    cstar = SpeedBracket(
        c_lo=max(betas) if betas else -np.inf,
        c_hi=min(not_betas) if not_betas else np.inf,
        open_below=not betas, open_above=not not_betas, trace=trace,
        profiles=profiles)
    cbar = SpeedBracket(
        c_lo=max(not_zeros) if not_zeros else -np.inf,
        c_hi=min(zeros) if zeros else np.inf,
        open_below=not not_zeros, open_above=not zeros, trace=trace,
        profiles=profiles)
    return cstar, cbar


def ceil_to_multiple(value, unit):
    return unit * math.ceil(value / unit - 1e-12)


def _check_monostable(sys):
    from . import eigen
    lam2 = eigen.principal_eigen(sys.d2, sys.g2, sys.b2).lam
    lam1 = eigen.principal_eigen(sys.d1, sys.g1, sys.b1).lam
    if min(lam1, lam2) <= 0:
        raise NotMonostable("bracket precondition fails: H1 margin <= 0")
    pot = sys.b1 - sys.a12 * sys.u2_star().as_field()
    h2 = eigen.principal_eigen(sys.d1, sys.g1, pot).lam
    if h2 <= 0:
        raise NotMonostable("bracket precondition fails: H2 margin <= 0")


def dump_profile_csv(path, profile: Profile, iteration):
    """CSV dump: x, v1, v2, iteration."""
    with open(path, "w") as fh:
        fh.write("x,v1,v2,iteration\n")
        for k in range(profile.n_nodes):
            fh.write(f"{profile.x[k]!r},{profile.values[0, k]!r},"
                     f"{profile.values[1, k]!r},{iteration}\n")


def dump_bracket_trace_csv(path, trace):
    """CSV dump: c, classification, right_end_value, left_plateau."""
    with open(path, "w") as fh:
        fh.write("c,classification,right_end_value,left_plateau\n")
        for c, cls, right, left in trace:
            fh.write(f"{c!r},{cls},{right!r},{left!r}\n")
