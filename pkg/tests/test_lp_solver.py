import numpy as np
import pytest

from switchguard.lp_solver import (EQ, LE, LinearProgram, LpNumericalError, format_lp,
                                   solve)
from util import random_box_lp, vertex_minimum


def test_minimize_above_lower_bound():
    lp = LinearProgram(1, np.array([1.0]), bounds=[(1.0, None)])
    sol = solve(lp)
    assert sol.status == "optimal"
    assert np.isclose(sol.objective, 1.0, atol=1e-12)
    assert np.isclose(sol.values[0], 1.0, atol=1e-12)


def test_minimize_with_inequality_row():
    # minimize x subject to -x <= -1 (i.e. x >= 1), x free
    lp = LinearProgram(1, np.array([1.0]))
    lp.add(np.array([-1.0]), LE, -1.0)
    sol = solve(lp)
    assert sol.status == "optimal"
    assert np.isclose(sol.objective, 1.0, atol=1e-9)


def test_infeasible_box():
    lp = LinearProgram(1, np.array([0.0]), bounds=[(0.0, None)])
    lp.add(np.array([1.0]), LE, -1.0)
    assert solve(lp).status == "infeasible"


def test_unbounded():
    lp = LinearProgram(1, np.array([-1.0]), bounds=[(0.0, None)])
    assert solve(lp).status == "unbounded"


def test_equality_and_free_variables():
    # min x + y s.t. x + y = 2, x - y = 0 -> x = y = 1
    lp = LinearProgram(2, np.array([1.0, 1.0]))
    lp.add(np.array([1.0, 1.0]), EQ, 2.0)
    lp.add(np.array([1.0, -1.0]), EQ, 0.0)
    sol = solve(lp)
    assert sol.status == "optimal"
    assert np.allclose(sol.values, [1.0, 1.0], atol=1e-9)


def test_upper_bounds():
    lp = LinearProgram(1, np.array([-1.0]), bounds=[(0.0, 2.5)])
    sol = solve(lp)
    assert sol.status == "optimal"
    assert np.isclose(sol.values[0], 2.5, atol=1e-9)


def test_random_lps_match_vertex_enumeration():
    rng = np.random.default_rng(42)
    checked = 0
    for trial in range(100):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(2, 9))
        c, A, b, lo, hi, G, h = random_box_lp(rng, n, m)
        status, oracle = vertex_minimum(c, G, h)
        assert status == "optimal"
        lp = LinearProgram(n, c, bounds=[(lo[j], hi[j]) for j in range(n)])
        for i in range(m):
            lp.add(A[i], LE, b[i])
        sol = solve(lp)
        assert sol.status == "optimal"
        assert np.isclose(sol.objective, oracle, atol=1e-6), (trial, sol.objective, oracle)
        checked += 1
    assert checked == 100


def test_constructed_infeasible_instances():
    rng = np.random.default_rng(43)
    for _ in range(10):
        n = int(rng.integers(2, 5))
        c, A, b, lo, hi, G, h = random_box_lp(rng, n, 3)
        lp = LinearProgram(n, c, bounds=[(lo[j], hi[j]) for j in range(n)])
        for i in range(3):
            lp.add(A[i], LE, b[i])
        # contradictory pair: e_0 . x <= lo_0 - 1 while x_0 >= lo_0
        row = np.zeros(n)
        row[0] = 1.0
        lp.add(row, LE, lo[0] - 1.0)
        assert solve(lp).status == "infeasible"


def test_feasibility_certificate():
    rng = np.random.default_rng(44)
    for _ in range(25):
        n = int(rng.integers(2, 6))
        m = int(rng.integers(2, 7))
        c, A, b, lo, hi, G, h = random_box_lp(rng, n, m)
        lp = LinearProgram(n, c, bounds=[(lo[j], hi[j]) for j in range(n)])
        for i in range(m):
            lp.add(A[i], LE, b[i])
        sol = solve(lp)
        assert sol.status == "optimal"
        x = sol.values
        assert np.all(A @ x <= b + 1e-7)
        assert np.all(x >= lo - 1e-7)
        assert np.all(x <= hi + 1e-7)
        assert np.isclose(float(c @ x), sol.objective, atol=1e-9)


def test_determinism_bit_for_bit():
    rng = np.random.default_rng(45)
    c, A, b, lo, hi, G, h = random_box_lp(rng, 4, 5)

    def fresh():
        lp = LinearProgram(4, c.copy(), bounds=[(lo[j], hi[j]) for j in range(4)])
        for i in range(5):
            lp.add(A[i].copy(), LE, float(b[i]))
        return solve(lp)

    s1, s2 = fresh(), fresh()
    assert s1.values.tobytes() == s2.values.tobytes()
    assert s1.objective == s2.objective


def test_duality_spot_check():
    rng = np.random.default_rng(46)
    for _ in range(15):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(2, 6))
        c, A, b, lo, hi, G, h = random_box_lp(rng, n, m)
        primal = LinearProgram(n, c)
        for i in range(G.shape[0]):
            primal.add(G[i], LE, h[i])
        vp = solve(primal)
        assert vp.status == "optimal"
        # dual of min c.x s.t. Gx <= h: min h.y s.t. G'y = -c, y >= 0; value = -primal
        rows_d = G.shape[0]
        dual = LinearProgram(rows_d, h, bounds=[(0.0, None)] * rows_d)
        for j in range(n):
            dual.add(G[:, j], EQ, -c[j])
        vd = solve(dual)
        assert vd.status == "optimal"
        assert np.isclose(vp.objective, -vd.objective, atol=1e-6)


def test_malformed_inputs_rejected():
    with pytest.raises(ValueError):
        LinearProgram(2, np.array([1.0]))
    lp = LinearProgram(2, np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        lp.add(np.array([1.0]), LE, 0.0)
    with pytest.raises(ValueError):
        lp.add(np.array([1.0, 0.0]), ">=", 0.0)
    with pytest.raises(ValueError):
        LinearProgram(1, np.array([1.0]), constraints=[(np.array([1.0]), LE, np.inf)])


def test_numerical_error_is_distinct_type():
    assert issubclass(LpNumericalError, RuntimeError)
    assert not issubclass(LpNumericalError, ValueError)


def test_format_lp_text():
    lp = LinearProgram(2, np.array([1.0, -2.0]), bounds=[(0.0, None), (None, None)])
    lp.add(np.array([1.0, 1.0]), LE, 3.0)
    lp.add(np.array([1.0, -1.0]), EQ, 1.0)
    text = format_lp(lp, name="toy")
    assert "Minimize" in text and "Subject To" in text and "Bounds" in text
    assert "<= 3" in text and "= 1" in text
