"""Integrator tests: accuracy, order, dense output, events, termination."""

import math

import pytest

from blowflow.odeint import OdeProblem, Solution, integrate


def test_exponential_decay_accuracy():
    p = OdeProblem(1, lambda x, y: [-y[0]], [1.0], (0.0, 1.0))
    s = integrate(p, rtol=1e-12, atol=1e-14)
    assert s.status == "end"
    assert abs(s.y[-1][0] - math.exp(-1.0)) < 1e-10


def test_oscillator_energy_drift():
    p = OdeProblem(2, lambda x, y: [y[1], -y[0]], [1.0, 0.0], (0.0, 20.0 * math.pi))
    s = integrate(p, rtol=1e-10, atol=1e-12)
    energy = 0.5 * (s.y[-1][0] ** 2 + s.y[-1][1] ** 2)
    assert abs(energy - 0.5) < 1e-8


def test_observed_order_at_least_four():
    # fixed step size via max_step with tolerances slack enough to accept
    errs = []
    for h in (0.2, 0.1, 0.05, 0.025):
        p = OdeProblem(1, lambda x, y: [y[0] * math.cos(x)], [1.0], (0.0, 4.0))
        s = integrate(p, rtol=10.0, atol=10.0, max_step=h, first_step=h)
        errs.append(abs(s.y[-1][0] - math.exp(math.sin(4.0))))
    orders = [math.log(a / b) / math.log(2.0) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 4.0


def test_dense_output_within_ten_times_tolerance():
    rtol, atol = 1e-9, 1e-12
    p = OdeProblem(1, lambda x, y: [y[0] * math.cos(x)], [1.0], (0.0, 6.0))
    s = integrate(p, rtol=rtol, atol=atol)
    for i in range(len(s.x) - 1):
        for th in (0.2, 0.5, 0.8):
            xq = s.x[i] + th * (s.x[i + 1] - s.x[i])
            want = math.exp(math.sin(xq))
            assert abs(s(xq)[0] - want) <= 10.0 * (atol + rtol * abs(want))


def test_dense_output_exact_at_nodes():
    p = OdeProblem(2, lambda x, y: [y[1], -y[0]], [0.3, 1.0], (0.0, 7.0))
    s = integrate(p, rtol=1e-9, atol=1e-12)
    for i in (0, len(s.x) // 2, len(s.x) - 1):
        assert s(s.x[i]) == s.y[i]


def test_event_linear_crossing():
    p = OdeProblem(1, lambda x, y: [-1.0], [1.0], (0.0, 2.0))
    s = integrate(p, rtol=1e-10, atol=1e-12, events=[lambda x, y: y[0] - 0.5])
    assert s.status == "event"
    assert s.event_index == 0
    assert abs(s.event_x - 0.5) < 1e-12
    assert s.x[-1] == s.event_x


def test_event_rising_crossing_and_multiple_events():
    p = OdeProblem(2, lambda x, y: [y[1], -y[0]], [0.0, 1.0], (0.0, 10.0))
    # sin(x): first event is y0 - 0.5 rising at pi/6; second would be at pi/2
    s = integrate(
        p,
        rtol=1e-11,
        atol=1e-13,
        events=[lambda x, y: y[0] - math.sin(math.pi / 2), lambda x, y: y[0] - 0.5],
    )
    assert s.status == "event"
    assert s.event_index == 1
    assert abs(s.event_x - math.pi / 6) < 1e-9


def test_divergence_detected():
    p = OdeProblem(1, lambda x, y: [y[0] ** 2], [1.0], (0.0, 2.0))
    s = integrate(p, rtol=1e-8, atol=1e-10)
    assert s.status == "divergence"
    assert abs(s.x[-1] - 1.0) < 0.01
    assert abs(s.y[-1][0]) > 1e8


def test_step_underflow_on_nonsmooth_rhs():
    # integrable singularity at x = 1: y stays bounded but the controller
    # cannot pass the kink, so the step collapses to the floor
    p = OdeProblem(
        1, lambda x, y: [1.0 / math.sqrt(abs(1.0 - x) + 1e-300)], [0.0], (0.0, 2.0)
    )
    s = integrate(p, rtol=1e-10, atol=1e-12)
    assert s.status == "step_underflow"
    assert abs(s.x[-1] - 1.0) < 1e-6


def test_backward_integration_and_dense():
    p = OdeProblem(1, lambda x, y: [-y[0]], [1.0], (1.0, 0.0))
    s = integrate(p, rtol=1e-12, atol=1e-14)
    assert s.status == "end"
    assert abs(s.y[-1][0] - math.e) < 1e-11
    assert abs(s(0.5)[0] - math.exp(0.5)) < 1e-11


def test_bit_identical_determinism():
    def run():
        p = OdeProblem(
            2, lambda x, y: [y[1], -math.sin(y[0])], [1.0, 0.3], (0.0, 10.0)
        )
        return integrate(p, rtol=1e-10, atol=1e-12)

    a, b = run(), run()
    assert a.x == b.x
    assert a.y == b.y
    assert a.f == b.f


def test_max_step_callable():
    caps = []

    def cap(x):
        caps.append(x)
        return 0.05

    p = OdeProblem(1, lambda x, y: [-y[0]], [1.0], (0.0, 1.0))
    s = integrate(p, rtol=1e-6, atol=1e-9, max_step=cap)
    assert max(b - a for a, b in zip(s.x, s.x[1:])) <= 0.05 + 1e-15
    assert caps  # the callable was actually consulted


def test_problem_validation():
    with pytest.raises(ValueError):
        OdeProblem(2, lambda x, y: y, [1.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        OdeProblem(1, lambda x, y: y, [1.0], (1.0, 1.0))


def test_interpolation_outside_range_raises():
    p = OdeProblem(1, lambda x, y: [-y[0]], [1.0], (0.0, 1.0))
    s = integrate(p, rtol=1e-8, atol=1e-10)
    with pytest.raises(ValueError):
        s(1.5)


def test_derivative_interpolation():
    p = OdeProblem(2, lambda x, y: [y[1], -y[0]], [0.0, 1.0], (0.0, 3.0))
    s = integrate(p, rtol=1e-10, atol=1e-12)
    for xq in (0.37, 1.1, 2.9):
        dy = s.derivative(xq)
        assert abs(dy[0] - math.cos(xq)) < 1e-8
        assert abs(dy[1] + math.sin(xq)) < 1e-8
