import csv
import io
import math

import numpy as np
import pytest

from lognls import ell, s_of_t, solve_tau, tau_asymptotic
from lognls.dispersion import write_knots_csv
from lognls.errors import DomainError, InvalidParameterError


def test_initial_conditions():
    traj = solve_tau(1.0, 10.0)
    assert traj(0.0) == (1.0, 0.0)
    assert traj.tau_ddot(0.0) == pytest.approx(2.0)


def test_first_integral_holds_between_knots(tau_1e6):
    ts = np.geomspace(1e-3, 1e6, 997)
    defect = tau_1e6.first_integral_defect(ts)
    assert np.max(defect) < 1e-8


def test_monotone_and_convex(tau_1e6):
    assert np.all(np.diff(tau_1e6.tau) > 0)
    assert np.all(np.diff(tau_1e6.tau_dot) > 0)


def test_vectorised_call(tau_1e6):
    ts = np.array([1.0, 10.0, 100.0])
    tau, tau_dot = tau_1e6(ts)
    assert tau.shape == (3,)
    assert tau[1] == pytest.approx(tau_1e6(10.0)[0])


def test_out_of_range_raises():
    traj = solve_tau(1.0, 5.0)
    with pytest.raises(DomainError):
        traj(6.0)
    with pytest.raises(DomainError):
        traj(-1.0)


@pytest.mark.parametrize("kwargs", [dict(lam=0.0, t_end=1.0), dict(lam=-1.0, t_end=1.0),
                                    dict(lam=1.0, t_end=0.0), dict(lam=1.0, t_end=1.0, rel_tol=1e-2)])
def test_invalid_arguments(kwargs):
    with pytest.raises(InvalidParameterError):
        solve_tau(**kwargs)


def test_ell_and_asymptotics():
    assert ell(math.e**math.e) == pytest.approx(1 / math.e)
    with pytest.raises(DomainError):
        ell(2.0)
    tau, tau_dot = tau_asymptotic(1e4, 1.0)
    assert tau == pytest.approx(2e4 * math.sqrt(math.log(1e4)))
    assert tau_dot == pytest.approx(2 * math.sqrt(math.log(1e4)))
    with pytest.raises(InvalidParameterError):
        tau_asymptotic(1e4, 0.0)


def test_s_of_t(tau_1e6):
    _, tau_dot = tau_1e6(100.0)
    assert s_of_t(tau_1e6, 100.0) == pytest.approx(0.5 * math.log(tau_dot))
    with pytest.raises(DomainError):
        s_of_t(tau_1e6, 0.0)
    with pytest.raises(DomainError):
        s_of_t(tau_1e6, 2e6)


def test_s_grows_like_quarter_lnln(tau_1e6):
    # exactly s = ln 2 / 2 + lnln(tau) / 4; the ratio to lnln(t) / 4 tends to 1
    # only very slowly because of the additive ln 2 / 2
    t = 1e6
    s = s_of_t(tau_1e6, t)
    tau, _ = tau_1e6(t)
    assert s == pytest.approx(0.5 * math.log(2.0) + 0.25 * math.log(math.log(tau)), rel=1e-10)
    assert 1.0 < s / (0.25 * math.log(math.log(t))) < 2.0


def test_knots_csv_roundtrip(tau_1e6):
    buf = io.StringIO()
    write_knots_csv(buf, tau_1e6)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows[0] == ["t", "tau", "tau_dot", "first_integral_defect"]
    assert len(rows) - 1 == tau_1e6.t.size
    assert float(rows[-1][1]) == tau_1e6.tau[-1]
