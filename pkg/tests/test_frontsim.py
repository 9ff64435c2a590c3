import numpy as np
import pytest

from speedlab import fit_speed, front_position, run_front, spreading_verdict
from speedlab.errors import DomainTooSmall, NoCrossing, TooFewPoints
from speedlab.frontsim import FrontTrace
from speedlab.pde import LineState

from conftest import make_system


@pytest.fixture(scope="module")
def fisher_coarse():
    return make_system(nt=100, nx=32, b1="1", d2="1", a12="0", a21="0")


@pytest.fixture(scope="module")
def fisher_run(fisher_coarse):
    # long enough for the logarithmic front-formation transient to decay
    # below the 5% verdict band
    sys = fisher_coarse
    return sys, run_front(sys, sys.u1_star(), sys.u2_star(), 92.0, 40,
                          c_estimate=2.0, keep_every=10)


def _unit_orbit(sys):
    return sys.u1_star()


def test_front_position_synthetic_step(fisher_coarse):
    u1 = _unit_orbit(fisher_coarse)  # constant level 1
    x = np.linspace(-8.0, 8.0, 513)
    vals = np.vstack([(x <= 3.25).astype(float), np.zeros_like(x)])
    st = LineState(vals, 0.0, -8.0, 8.0)
    pos = front_position(st, u1)
    assert abs(pos - 3.25) <= (16.0 / 512) + 1e-9


def test_front_position_no_crossing(fisher_coarse):
    u1 = _unit_orbit(fisher_coarse)
    x = np.linspace(-4.0, 4.0, 257)
    st = LineState(np.zeros((2, 257)), 0.0, -4.0, 4.0)
    with pytest.raises(NoCrossing):
        front_position(st, u1)
    st_full = LineState(np.vstack([np.ones(257), np.zeros(257)]), 0.0, -4.0, 4.0)
    with pytest.raises(NoCrossing):
        front_position(st_full, u1)


def test_front_position_normalization_removes_period_wobble():
    sys = make_system(nt=100, nx=64, b1="1 + 0.5*cos(2*pi*x)", d2="1",
                      a12="0", a21="0")
    u1 = sys.u1_star()
    x = np.linspace(-8.0, 8.0, 16 * 64 + 1)
    dx = x[1] - x[0]
    level = u1.snapshots[0][np.round(x / dx).astype(int) % 64]
    raw_level = 0.5 * u1.snapshots[0].max()
    raw_positions, norm_positions = [], []
    for x0 in np.linspace(2.0, 3.0, 9)[:-1]:
        v1 = level / (1.0 + np.exp((x - x0) / 0.25))
        st = LineState(np.vstack([v1, np.zeros_like(v1)]), 0.0, -8.0, 8.0)
        norm_positions.append(front_position(st, u1) - x0)
        above = v1 >= raw_level
        raw_positions.append(float(x[np.max(np.nonzero(above))]) - x0)
    assert np.ptp(norm_positions) < 0.2
    assert np.ptp(norm_positions) < np.ptp(raw_positions)


def test_fit_speed_exact_line():
    t = np.arange(1.0, 31.0)
    trace = FrontTrace(times=list(t), positions=list(2.0 * t))
    fit = fit_speed(trace)
    assert fit.speed == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.ci_halfwidth < 1e-10


def test_fit_speed_with_periodic_wobble():
    t = np.arange(60) * 0.25 + 0.125
    x = 2.0 * t + 0.1 * np.sin(2.0 * np.pi * t)
    trace = FrontTrace(times=list(t), positions=list(x))
    fit = fit_speed(trace)
    # independent oracle for the same least-squares line
    drop = int(np.ceil(0.3 * len(t)))
    slope_oracle = np.polyfit(t[drop:], x[drop:], 1)[0]
    assert fit.speed == pytest.approx(slope_oracle, abs=1e-12)
    assert abs(fit.speed - 2.0) <= 0.02
    assert fit.r2 > 0.999


def test_fit_speed_too_few_points():
    trace = FrontTrace(times=[1.0, 2.0, 3.0, 4.0, 5.0],
                       positions=[2.0, 4.0, 6.0, 8.0, 10.0])
    with pytest.raises(TooFewPoints):
        fit_speed(trace)


def test_run_front_rejects_small_domain(fisher_coarse):
    sys = fisher_coarse
    with pytest.raises(DomainTooSmall):
        run_front(sys, sys.u1_star(), sys.u2_star(), 15.0, 12, c_estimate=2.0)


def test_run_front_empty_species(fisher_coarse):
    sys = fisher_coarse
    u1, u2 = sys.u1_star(), sys.u2_star()
    empty = FrontTrace(times=[], positions=[], empty=True)
    verdict = spreading_verdict(sys, empty, None, u1, u2)
    assert verdict.verdict == "inconclusive"


def test_fisher_front_speed_and_verdict(fisher_run):
    sys, trace = fisher_run
    fit = fit_speed(trace)
    assert fit.speed == pytest.approx(2.0, rel=0.05)

    class Report:
        c0_plus = 2.0

    verdict = spreading_verdict(sys, trace, Report())
    assert verdict.verdict == "pass"
    assert verdict.tail_front < 0.01
    assert verdict.tail_back < 0.05
    assert verdict.relative_gap < 0.05
    assert len(trace.snapshots) == 4  # kept every 10 periods


def test_threshold_invariance_of_measured_speed(fisher_run):
    sys, trace = fisher_run
    u1 = sys.u1_star()
    fits = {}
    for thr in (0.2, 0.5, 0.8):
        positions = []
        for state in trace.snapshots + [trace.final_state]:
            positions.append(front_position(state, u1, threshold=thr))
        fits[thr] = positions
    base = fit_speed(trace)
    allowance = base.ci_halfwidth + 0.3 * sys.ell / sys.omega
    # front offsets at different thresholds stay parallel: translate at one speed
    for thr, positions in fits.items():
        offsets = np.array(positions) - np.array(
            [front_position(s, u1, threshold=0.5) for s in trace.snapshots + [trace.final_state]])
        assert np.ptp(offsets) <= allowance + 0.1


def test_doubling_domain_leaves_fit_unchanged(fisher_coarse, fisher_run):
    # finite-domain control: widening the truncation does not move the fit
    sys, trace = fisher_run
    wide = run_front(sys, sys.u1_star(), sys.u2_star(), 184.0, 40, c_estimate=2.0)
    f1 = fit_speed(trace)
    f2 = fit_speed(wide)
    assert abs(f1.speed - f2.speed) <= f1.ci_halfwidth + 1e-6


def test_aborted_run_is_flagged_and_inconclusive(fisher_coarse):
    # underestimated speed passes the precondition but hits the guard zone
    sys = fisher_coarse
    u1, u2 = sys.u1_star(), sys.u2_star()
    trace = run_front(sys, u1, u2, 36.0, 22, c_estimate=1.1)
    assert trace.aborted
    assert trace.n_points < 22
    verdict = spreading_verdict(sys, trace, None, u1, u2)
    assert verdict.verdict == "inconclusive"
