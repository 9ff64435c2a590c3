"""Spreading-speed formulas and the full certificate machinery.

Rightward speeds come from minimizing mu -> lambda(mu)/mu over mu > 0,
where lambda(mu) is the principal eigenvalue of the mu-tilted problem;
leftward speeds use the change of variable x -> -x.  The linearized speed
of the coupled system at the invaded state is produced the same way from
the potential b1 - a12*u2star, and the coupled positive eigenfunction
needed for the determinacy ratio test is built by a contractive series in
the second component.

Certificates: H1, H2 (instability eigenvalues), H3 via the envelope
sufficient condition (three-valued, never "fail"), H4, H5 (speed
compatibility), D1, D2 (linear determinacy), P1, P2 (time-periodic
x-independent sufficient set), and the shared-growth symmetric-media
condition M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import eigen, orbits
from .coeffs import CoefficientField, build_field, mean_and_symmetry, reflect_x, refine_field
from .errors import D1Violated, NoConvergence, NoInteriorMinimum, NonEllipticError, NotMonostable
from .pde import CellPeriodMap

MU_RANGE = (1e-3, 20.0)
MU_REL_TOL = 1e-6
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

FIELD_NAMES = ("d1", "d2", "g1", "g2", "b1", "b2", "a11", "a12", "a21", "a22")


# ---------------------------------------------------------------------------
# System specification
# ---------------------------------------------------------------------------

@dataclass
class SystemSpec:
    """Coefficient fields of the two-species competition model on one grid."""

    d1: CoefficientField
    d2: CoefficientField
    g1: CoefficientField
    g2: CoefficientField
    b1: CoefficientField
    b2: CoefficientField
    a11: CoefficientField
    a12: CoefficientField
    a21: CoefficientField
    a22: CoefficientField
    _orbit_cache: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        ref = self.d1
        for name in FIELD_NAMES:
            f = getattr(self, name)
            if not ref.same_grid(f):
                raise ValueError(f"field {name} is not on the shared grid")
        for name in ("d1", "d2"):
            if getattr(self, name).min() <= 0.0:
                raise NonEllipticError(f"{name} must be strictly positive")
        for name in ("a11", "a22"):
            if getattr(self, name).min() <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("a12", "a21"):
            if getattr(self, name).min() < 0.0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def omega(self):
        return self.d1.omega

    @property
    def ell(self):
        return self.d1.ell

    @property
    def nt(self):
        return self.d1.nt

    @property
    def nx(self):
        return self.d1.nx

    def fields(self):
        return {name: getattr(self, name) for name in FIELD_NAMES}

    @classmethod
    def from_expressions(cls, exprs: dict, omega, ell, nt, nx):
        missing = [n for n in FIELD_NAMES if n not in exprs]
        if missing:
            raise ValueError(f"missing coefficient expressions: {missing}")
        built = {n: build_field(str(exprs[n]), omega, ell, nt, nx) for n in FIELD_NAMES}
        return cls(**built)

    def refined(self, factor=2):
        """The same system sampled on a grid refined by `factor`."""
        built = {n: refine_field(getattr(self, n), factor) for n in FIELD_NAMES}
        return SystemSpec(**built)

    def u1_star(self) -> orbits.PeriodicOrbit:
        """Species-1 alone periodic orbit (cached)."""
        if "u1" not in self._orbit_cache:
            self._orbit_cache["u1"] = orbits.logistic_orbit(self.d1, self.g1, self.b1, self.a11)
        return self._orbit_cache["u1"]

    def u2_star(self) -> orbits.PeriodicOrbit:
        """Species-2 alone periodic orbit (cached)."""
        if "u2" not in self._orbit_cache:
            self._orbit_cache["u2"] = orbits.logistic_orbit(self.d2, self.g2, self.b2, self.a22)
        return self._orbit_cache["u2"]

    def symmetric_media(self) -> bool:
        """True when every coefficient is even in x except g1, g2 odd in x."""
        for name in FIELD_NAMES:
            _, rep = mean_and_symmetry(getattr(self, name))
            if name in ("g1", "g2"):
                if not rep.odd_in_x:
                    return False
            elif not rep.even_in_x:
                return False
        return True

    def state_bound(self):
        return max(self.b1.max(), self.b2.max()) / min(self.a11.min(), self.a22.min())


def reflected_scalar_coefficients(d, g, b):
    """Coefficients of the x -> -x transformed scalar equation."""
    return reflect_x(d), -1.0 * reflect_x(g), reflect_x(b)


# ---------------------------------------------------------------------------
# Speed minimization
# ---------------------------------------------------------------------------

@dataclass
class MinimizeResult:
    c_star: float
    mu0: float
    evaluations: int
    mu_lo: float
    mu_hi: float


def minimize_speed(lambda_eval, mu_range=MU_RANGE, rel_tol=MU_REL_TOL) -> MinimizeResult:
    """Golden-section minimization of mu -> lambda(mu)/mu on (0, mu_max].

    Requires an interior minimum, verified by the slope signs at both ends;
    a monotone profile raises NoInteriorMinimum with the endpoint data, since
    the infimum then sits on the boundary and the formula regime fails.
    """
    lo, hi = mu_range
    if not 0 < lo < hi:
        raise ValueError("mu_range must satisfy 0 < lo < hi")
    cache = {}

    def f(mu):
        if mu not in cache:
            cache[mu] = lambda_eval(mu) / mu
        return cache[mu]

    probe_lo = lo * (1.0 + 1e-2)
    probe_hi = hi * (1.0 - 1e-2)
    data = {"mu_lo": lo, "f_lo": f(lo), "mu_hi": hi, "f_hi": f(hi)}
    if f(probe_lo) >= f(lo):
        raise NoInteriorMinimum("lambda(mu)/mu is nondecreasing at the lower end", data)
    if f(hi) <= f(probe_hi):
        raise NoInteriorMinimum("lambda(mu)/mu is nonincreasing at the upper end", data)

    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rel_tol * b:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    mid = 0.5 * (a + b)
    f(mid)
    mu0, c_star = min(((mu, val) for mu, val in cache.items() if a <= mu <= b),
                      key=lambda item: item[1])
    return MinimizeResult(c_star=c_star, mu0=mu0, evaluations=len(cache),
                          mu_lo=lo, mu_hi=hi)


def _lambda_curve(d, g, m):
    def ev(mu):
        return eigen.lambda_of_mu(d, g, m, mu).lam
    return ev


@dataclass
class KppSpeeds:
    c_right: float
    c_left: float
    mu_right: float
    mu_left: float
    lam0: float
    refined: bool = False


def scalar_kpp_speeds(d, g, b, mu_range=MU_RANGE, refine=False) -> KppSpeeds:
    """Rightward and leftward KPP spreading speeds of one scalar equation.

    c_right = inf_{mu>0} lambda_b(mu)/mu from the tilted eigenvalue family;
    c_left uses the reflected coefficients.  With refine=True the speeds are
    Richardson-extrapolated across one grid doubling (expression-backed
    fields only).
    """
    lam0 = eigen.principal_eigen(d, g, b).lam
    if lam0 <= 0.0:
        raise NotMonostable(f"lambda(d,g,b) = {lam0:.6g} <= 0")

    def both(df, gf, bf):
        right = minimize_speed(_lambda_curve(df, gf, bf), mu_range)
        rd, rg, rb = reflected_scalar_coefficients(df, gf, bf)
        left = minimize_speed(_lambda_curve(rd, rg, rb), mu_range)
        return right, left

    right, left = both(d, g, b)
    if not refine:
        return KppSpeeds(right.c_star, left.c_star, right.mu0, left.mu0, lam0)
    d2f, g2f, b2f = refine_field(d), refine_field(g), refine_field(b)
    right_f, left_f = both(d2f, g2f, b2f)
    return KppSpeeds(2.0 * right_f.c_star - right.c_star,
                     2.0 * left_f.c_star - left.c_star,
                     right_f.mu0, left_f.mu0, lam0, refined=True)


@dataclass
class C0Result:
    c0: float
    mu0: float
    lambda0_at_mu0: float
    h2_margin: float
    refined: bool = False
    c0_base: float | None = None
    discretization_estimate: float | None = None


def linear_speed_c0(sys: SystemSpec, u2_star=None, mu_range=MU_RANGE, refine=False) -> C0Result:
    """Linearized speed c0 = inf_{mu>0} lambda0(mu)/mu at the invaded state.

    lambda0 is the tilted eigenvalue with potential b1 - a12*u2star.  The
    positivity of lambda0(0) (the H2 margin) is a precondition; refine=True
    recomputes the whole pipeline, orbit included, on a doubled grid and
    extrapolates c0.
    """
    if u2_star is None:
        u2_star = sys.u2_star()

    def compute(s, orbit):
        pot = s.b1 - s.a12 * orbit.as_field()
        margin = eigen.principal_eigen(s.d1, s.g1, pot).lam
        if margin <= 0.0:
            raise NotMonostable(f"lambda(d1,g1,b1-a12*u2) = {margin:.6g} <= 0")
        res = minimize_speed(_lambda_curve(s.d1, s.g1, pot), mu_range)
        return res, margin

    res, margin = compute(sys, u2_star)
    if not refine:
        return C0Result(res.c_star, res.mu0, res.c_star * res.mu0, margin)
    sys_f = sys.refined()
    res_f, _ = compute(sys_f, sys_f.u2_star())
    c0 = 2.0 * res_f.c_star - res.c_star
    return C0Result(c0, res_f.mu0, c0 * res_f.mu0, margin, refined=True,
                    c0_base=res.c_star,
                    discretization_estimate=2.0 * abs(res_f.c_star - res.c_star))


# ---------------------------------------------------------------------------
# Coupled eigenfunction (determinacy ratio test)
# ---------------------------------------------------------------------------

@dataclass
class CoupledEigenfunction:
    """Positive periodic eigenfunction (phi1, phi2) of the coupled tilted system.

    phi1 is sup-normalized to 1; phi2 carries the scale induced by phi1
    through the coupling, so the ratio field phi1/phi2 is normalization
    free.  residual is the sup-norm defect of one coupled period-map
    application against rho1 = e^{lambda0 omega}.
    """

    phi1: np.ndarray
    phi2: np.ndarray
    mu0: float
    lambda0: float
    lambdabar: float
    rho1: float
    residual: float
    degenerate: bool
    series_terms: int

    def ratio_field(self):
        if self.degenerate:
            raise ValueError("ratio undefined for a degenerate (zero) phi2")
        return self.phi1 / self.phi2


NEUMANN_TRUNCATION = 1e-12
NEUMANN_CAP = 200_000


def coupled_eigenfunction(sys: SystemSpec, u2_star, mu0, phi1_scale=1.0) -> CoupledEigenfunction:
    """Build (phi1*, phi2*) for the coupled eigenproblem at the tilt mu0.

    phi1 solves the decoupled first equation; phi2 solves
    (rho1 - K2) phi2 = F by the geometric series sum_k rho1^{-k} K2^{k-1} F,
    truncated when a term's sup norm falls below 1e-12.  Convergence is
    guaranteed by D1 (rho(K2) < rho1), otherwise D1Violated is raised.
    The snapshots are then reconstructed along the period by marching with
    the coupling source, so the pair is an exact discrete eigenpair.
    """
    u2f = u2_star.as_field()
    pot1 = sys.b1 - sys.a12 * u2f
    eig1 = eigen.lambda_of_mu(sys.d1, sys.g1, pot1, mu0)
    lam0 = eig1.lam
    rho1 = math.exp(lam0 * sys.omega)

    drift2, _ = eigen.tilted_coefficients(sys.d2, sys.g2, sys.b2, mu0)
    pot2 = sys.d2 * (mu0 * mu0) + sys.g2 * mu0 + sys.b2 - 2.0 * sys.a22 * u2f
    map2 = CellPeriodMap(sys.d2, drift2, pot2, shift_mean=False)
    eig2 = eigen.principal_of_map(map2)
    lambar = eig2.lam
    if lambar >= lam0:
        raise D1Violated(
            f"lambdabar({mu0:.6g}) = {lambar:.6g} >= lambda0 = {lam0:.6g}; series diverges")

    nt, nx = sys.nt, sys.nx
    phi1 = eig1.eigenfunction * phi1_scale
    # running (non-normalized) first component at the arrival time of step j
    powers = np.exp(lam0 * map2.dt * np.arange(1, nt + 1))
    rows = [(j + 1) % nt for j in range(nt)]
    psi1_arrival = powers[:, None] * phi1[rows]
    coupling = np.array([sys.a21.values[r] * u2f.values[r] for r in rows])
    source = coupling * psi1_arrival

    forcing = map2.apply_with_source(np.zeros(nx), source)
    if np.max(np.abs(forcing)) < 1e-300:
        return CoupledEigenfunction(phi1=phi1, phi2=np.zeros((nt, nx)), mu0=mu0,
                                    lambda0=lam0, lambdabar=lambar, rho1=rho1,
                                    residual=float(eig1.residual), degenerate=True,
                                    series_terms=0)

    k2 = map2.matrix()
    term = forcing / rho1
    phi2_start = term.copy()
    terms = 1
    while np.max(np.abs(term)) >= NEUMANN_TRUNCATION:
        term = (k2 @ term) / rho1
        phi2_start += term
        terms += 1
        if terms > NEUMANN_CAP:
            raise NoConvergence("coupling series did not truncate", iterations=terms)

    raw2 = map2.snapshots_with_source(phi2_start, source)
    scale = np.exp(-lam0 * map2.dt * np.arange(nt))
    phi2 = raw2[:-1] * scale[:, None]

    resid2 = float(np.max(np.abs(raw2[-1] - rho1 * phi2_start)))
    denom = max(np.max(np.abs(phi2_start)), 1e-300)
    residual = max(float(eig1.residual), resid2 / denom)
    return CoupledEigenfunction(phi1=phi1, phi2=phi2, mu0=mu0, lambda0=lam0,
                                lambdabar=lambar, rho1=rho1, residual=residual,
                                degenerate=False, series_terms=terms)



# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass
class Certificate:
    name: str
    verdict: str  # pass | pass(sufficient) | fail | inconclusive | not-applicable
    margin: float | None
    details: dict = dc_field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict.startswith("pass")

    def to_dict(self):
        return {"verdict": self.verdict, "margin": self.margin, "details": self.details}


@dataclass
class HypothesisReport:
    certificates: dict

    def __getitem__(self, name):
        return self.certificates[name]

    def passed(self, name):
        return self.certificates[name].passed


def _prop_c_margins(sys: SystemSpec):
    """Envelope margins of the coexistence-exclusion sufficient condition."""
    dt = sys.omega / sys.nt
    b1_lo = sys.b1.values.min(axis=1)
    b2_hi = sys.b2.values.max(axis=1)
    ratio1 = np.max(sys.a12.values.max(axis=1) / sys.a22.values.min(axis=1))
    ratio2 = np.max(sys.a21.values.min(axis=1) / sys.a11.values.max(axis=1))
    i1 = float(np.sum(b1_lo) * dt)
    j2 = float(np.sum(b2_hi) * dt)
    return i1 - ratio1 * j2, ratio2 * i1 - j2, {"int_b1_lo": i1, "int_b2_hi": j2,
                                                "max_a12_over_a22": ratio1,
                                                "max_a21_over_a11": ratio2}


def check_hypotheses(sys: SystemSpec, u2_star=None, mu_range=MU_RANGE) -> HypothesisReport:
    """Evaluate H1-H5 plus the envelope condition and the shared-growth test.

    H3 is undecidable numerically in general, so only the sufficient
    envelope condition is evaluated and the verdict is three-valued:
    pass(sufficient) or inconclusive, never fail.
    """
    certs = {}

    lam1 = eigen.principal_eigen(sys.d1, sys.g1, sys.b1)
    lam2 = eigen.principal_eigen(sys.d2, sys.g2, sys.b2)
    h1_margin = min(lam1.lam, lam2.lam)
    certs["H1"] = Certificate(
        "H1", "pass" if h1_margin > 0 else "fail", h1_margin,
        {"lambda_species1": lam1.lam, "lambda_species2": lam2.lam,
         "residuals": [lam1.residual, lam2.residual]})

    if u2_star is None and lam2.lam > 0:
        u2_star = sys.u2_star()
    if lam2.lam <= 0:
        certs["H2"] = Certificate("H2", "not-applicable", None,
                                  {"note": "species 2 is extinct, no invaded state"})
    else:
        pot = sys.b1 - sys.a12 * u2_star.as_field()
        h2 = eigen.principal_eigen(sys.d1, sys.g1, pot)
        certs["H2"] = Certificate("H2", "pass" if h2.lam > 0 else "fail", h2.lam,
                                  {"lambda": h2.lam, "residual": h2.residual})

    m1, m2, detail = _prop_c_margins(sys)
    prop_c_ok = m1 > 0 and m2 >= 0
    certs["PropC"] = Certificate("PropC", "pass" if prop_c_ok else "fail",
                                 min(m1, m2), detail)
    certs["H3"] = Certificate("H3", "pass(sufficient)" if prop_c_ok else "inconclusive",
                              min(m1, m2), {"via": "envelope sufficient condition"})

    symmetric = sys.symmetric_media()
    c1p = c2m = None
    if h1_margin > 0:
        try:
            sp1 = scalar_kpp_speeds(sys.d1, sys.g1, sys.b1, mu_range)
            sp2 = scalar_kpp_speeds(sys.d2, sys.g2, sys.b2, mu_range)
            c1p, c2m = sp1.c_right, sp2.c_left
            certs["H4"] = Certificate("H4", "pass" if c1p + c2m > 0 else "fail",
                                      c1p + c2m, {"c1_plus": c1p, "c2_minus": c2m,
                                                  "symmetric_media": symmetric})
        except NoInteriorMinimum as exc:
            certs["H4"] = Certificate("H4", "inconclusive", None,
                                      {"reason": str(exc), **exc.endpoint_data})
    else:
        certs["H4"] = Certificate("H4", "not-applicable", None,
                                  {"note": "H1 fails, single-species speeds undefined"})

    if lam2.lam > 0 and c1p is not None:
        pot2 = sys.b2 - sys.a22 * u2_star.as_field()
        lam2_zero = eigen.principal_eigen(sys.d2, sys.g2, pot2).lam
        details = {"lambda2_at_0": lam2_zero, "symmetric_media": symmetric}
        if abs(lam2_zero) > 1e-6:
            certs["H5"] = Certificate("H5", "inconclusive", None, {
                **details, "note": "orbit eigenvalue identity failed, slope unreliable"})
        else:
            eps = (1e-2, 1e-3)
            vals = [eigen.lambda_of_mu(sys.d2, sys.g2, pot2, e).lam / e for e in eps]
            slope = (10.0 * vals[1] - vals[0]) / 9.0
            details.update({"slope": slope, "lambda2_over_mu": dict(zip(eps, vals))})
            margin = c1p - slope
            if symmetric:
                verdict = "pass"
                details["note"] = "symmetric media, slope vanishes structurally"
            else:
                verdict = "pass" if margin >= 0 else "fail"
            certs["H5"] = Certificate("H5", verdict, margin, details)
    else:
        certs["H5"] = Certificate("H5", "not-applicable", None,
                                  {"note": "requires species-2 orbit and c1_plus"})

    certs["M"] = _condition_m(sys)
    return HypothesisReport(certs)


def _condition_m(sys: SystemSpec) -> Certificate:
    """Shared-growth condition: equal growth fields, unit interactions,
    growth even and non-trivial in x with nonnegative mean."""
    tol = 1e-9
    shape_ok = (np.max(np.abs(sys.b1.values - sys.b2.values)) <= tol
                and all(np.max(np.abs(getattr(sys, n).values - 1.0)) <= tol
                        for n in ("a11", "a12", "a21", "a22"))
                and np.max(np.abs(sys.g1.values)) <= tol
                and np.max(np.abs(sys.g2.values)) <= tol)
    if not shape_ok:
        return Certificate("M", "not-applicable", None,
                           {"note": "system is not of the shared-growth unit-interaction form"})
    mean, rep = mean_and_symmetry(sys.b1)
    nontrivial = not rep.x_independent
    ok = nontrivial and rep.even_in_x and mean >= 0.0
    return Certificate("M", "pass" if ok else "fail", mean,
                       {"even_in_x": rep.even_in_x, "x_dependent": nontrivial, "mean": mean})


@dataclass
class CertificateReport:
    certificates: dict
    linearly_determinate: bool
    summary: str

    def __getitem__(self, name):
        return self.certificates[name]


def _p_conditions(sys: SystemSpec) -> tuple[Certificate, Certificate]:
    """P1/P2 sufficient set for the x-independent, drift-free normalized model."""
    tol = 1e-9
    x_indep = all(mean_and_symmetry(getattr(sys, n))[1].x_independent for n in FIELD_NAMES)
    d1_unit = np.max(np.abs(sys.d1.values - 1.0)) <= tol
    d2_const = np.max(sys.d2.values) - np.min(sys.d2.values) <= tol
    no_drift = np.max(np.abs(sys.g1.values)) <= tol and np.max(np.abs(sys.g2.values)) <= tol
    if not (x_indep and d1_unit and d2_const and no_drift):
        na = Certificate("P1", "not-applicable", None,
                         {"note": "requires x-independent coefficients, d1 = 1, no drift"})
        return na, Certificate("P2", na.verdict, None, na.details)

    b1bar = float(sys.b1.values.mean())
    b2bar = float(sys.b2.values.mean())
    r12 = float(np.max(sys.a12.values / sys.a22.values))
    r21 = float(np.max(sys.a21.values / sys.a11.values))
    m1 = b1bar - r12 * b2bar
    m2 = r21 * b1bar - b2bar
    p1_ok = (m1 > 0) and (b2bar > 0) and (m2 >= 0)
    p1 = Certificate("P1", "pass" if p1_ok else "fail", min(m1, m2),
                     {"b1_mean": b1bar, "b2_mean": b2bar,
                      "max_a12_over_a22": r12, "max_a21_over_a11": r21})

    d = float(sys.d2.values.mean())
    u1 = sys.u1_star()
    u2 = sys.u2_star()
    if u1.extinct or u2.extinct:
        return p1, Certificate("P2", "not-applicable", None,
                               {"note": "needs both single-species orbits"})
    a = sys.a11.values * u1.snapshots - sys.a12.values * u2.snapshots
    b = sys.a21.values * u1.snapshots - sys.a22.values * u2.snapshots
    md = 1.0 - d
    mab = float(np.min(a - b))
    mb = float(np.min(b))
    p2_ok = (d > 0) and (md >= 0) and (mab >= -1e-10) and (mb >= -1e-10)
    p2 = Certificate("P2", "pass" if p2_ok else "fail", min(md, mab, mb),
                     {"d": d, "min_first_minus_second": mab, "min_second": mb})
    return p1, p2


def check_linear_determinacy(sys: SystemSpec, u2_star, mu0, phi1, phi2,
                             lambda0=None, lambdabar=None) -> CertificateReport:
    """Evaluate D1, D2 margins and the P1/P2 sufficient set.

    D1 margin: lambda0(mu0) - lambdabar(mu0).  D2 margin: minimum over the
    period cell of phi1/phi2 - max(a12/a11, a22/a21).  The report declares
    linear determinacy (sufficient conditions met) iff both are positive.
    """
    u2f = u2_star.as_field()
    if lambda0 is None:
        lambda0 = eigen.lambda_of_mu(sys.d1, sys.g1, sys.b1 - sys.a12 * u2f, mu0).lam
    if lambdabar is None:
        drift2, _ = eigen.tilted_coefficients(sys.d2, sys.g2, sys.b2, mu0)
        pot2 = sys.d2 * (mu0 * mu0) + sys.g2 * mu0 + sys.b2 - 2.0 * sys.a22 * u2f
        lambdabar = eigen.principal_of_map(CellPeriodMap(sys.d2, drift2, pot2)).lam

    certs = {}
    d1_margin = lambda0 - lambdabar
    certs["D1"] = Certificate("D1", "pass" if d1_margin > 0 else "fail", d1_margin,
                              {"lambda0": lambda0, "lambdabar": lambdabar, "mu0": mu0})

    phi2 = np.asarray(phi2, dtype=float)
    if np.all(phi2 <= 0.0) or sys.a21.min() <= 0.0:
        certs["D2"] = Certificate("D2", "not-applicable", None,
                                  {"note": "degenerate second component or zero coupling"})
    else:
        ratio = np.asarray(phi1, dtype=float) / phi2
        bound = np.maximum(sys.a12.values / sys.a11.values,
                           sys.a22.values / sys.a21.values)
        d2_margin = float(np.min(ratio - bound))
        certs["D2"] = Certificate("D2", "pass" if d2_margin > 0 else "fail", d2_margin,
                                  {"min_ratio": float(ratio.min()),
                                   "max_bound": float(bound.max())})

    p1, p2 = _p_conditions(sys)
    certs["P1"], certs["P2"] = p1, p2

    determinate = certs["D1"].passed and certs["D2"].passed
    summary = ("linearly determinate (sufficient conditions met)" if determinate
               else "linear determinacy not certified")
    return CertificateReport(certs, determinate, summary)


# ---------------------------------------------------------------------------
# Aggregate report
# ---------------------------------------------------------------------------

@dataclass
class SpeedReport:
    c0_plus: float | None
    mu0: float | None
    c1_plus: float | None
    c2_minus: float | None
    lambda0_at_mu0: float | None
    lambdabar_at_mu0: float | None
    certificates: dict
    linearly_determinate: bool
    notes: list

    def to_dict(self):
        return {
            "c0_plus": self.c0_plus,
            "mu0": self.mu0,
            "c1_plus": self.c1_plus,
            "c2_minus": self.c2_minus,
            "lambda0_at_mu0": self.lambda0_at_mu0,
            "lambdabar_at_mu0": self.lambdabar_at_mu0,
            "certificates": {k: v.to_dict() for k, v in sorted(self.certificates.items())},
            "linearly_determinate": self.linearly_determinate,
            "notes": self.notes,
        }


def compute_speed_report(sys: SystemSpec, refine=False, mu_range=MU_RANGE) -> SpeedReport:
    """Full pipeline: orbits, speeds, coupled eigenfunction, all certificates."""
    notes = []
    hyp = check_hypotheses(sys, mu_range=mu_range)
    certs = dict(hyp.certificates)
    c1_plus = certs["H4"].details.get("c1_plus")
    c2_minus = certs["H4"].details.get("c2_minus")

    c0 = mu0 = lam0 = lambar = None
    determinate = False
    if certs["H1"].passed and certs["H2"].passed:
        u2 = sys.u2_star()
        res = linear_speed_c0(sys, u2, mu_range=mu_range, refine=refine)
        c0, mu0, lam0 = res.c0, res.mu0, res.lambda0_at_mu0
        if res.refined:
            notes.append(f"c0 Richardson-refined; discretization estimate "
                         f"{res.discretization_estimate:.3g}")
        try:
            pair = coupled_eigenfunction(sys, u2, mu0)
            lambar = pair.lambdabar
            det = check_linear_determinacy(sys, u2, mu0, pair.phi1, pair.phi2,
                                           lambda0=pair.lambda0, lambdabar=pair.lambdabar)
            if pair.degenerate:
                notes.append("coupled eigenfunction degenerates (zero coupling)")
        except D1Violated as exc:
            notes.append(f"D1 violated: {exc}")
            det = check_linear_determinacy(sys, u2, mu0, np.ones((sys.nt, sys.nx)),
                                           np.zeros((sys.nt, sys.nx)), lambda0=lam0)
            lambar = det["D1"].details["lambdabar"]
        certs.update(det.certificates)
        determinate = det.linearly_determinate
    else:
        notes.append("H1/H2 not satisfied, linearized speed undefined")
        p1, p2 = _p_conditions(sys)
        certs["P1"], certs["P2"] = p1, p2

    return SpeedReport(c0_plus=c0, mu0=mu0, c1_plus=c1_plus, c2_minus=c2_minus,
                       lambda0_at_mu0=lam0, lambdabar_at_mu0=lambar,
                       certificates=certs, linearly_determinate=determinate,
                       notes=notes)
