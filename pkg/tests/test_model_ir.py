import itertools
import shutil

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xfcs.model_ir import SolverConfig, SolverError, solve, with_sos2_binaries
from xfcs.model_ir.backends import SOLVER_ENV
from xfcs.model_ir.lp_format import export_lp, parse_cbc_solution
from xfcs.model_ir.model import BINARY, Model, ModelError, Solution, check_solution, sos2_adjacent
from xfcs.model_ir.expr import quicksum

CBC = shutil.which("cbc")
BACKENDS = [
    SolverConfig(),
    pytest.param(
        SolverConfig(backend="command", executable=CBC),
        marks=pytest.mark.skipif(CBC is None, reason="cbc executable not installed"),
    ),
]


class TestBuilding:
    def test_binary_bounds_clipped(self):
        m = Model()
        u = m.add_var("u", BINARY, -3, 7)
        assert m.bounds(u) == (0.0, 1.0)

    def test_handles_distinct(self):
        m = Model()
        vs = [m.add_var(f"x{i}") for i in range(10)]
        assert len({v.index for v in vs}) == 10

    def test_errors(self):
        m = Model()
        m.add_var("x")
        with pytest.raises(ModelError):
            m.add_var("x")
        with pytest.raises(ModelError):
            m.add_var("y", lb=2, ub=1)
        with pytest.raises(ModelError):
            m.add_sos2([m.var("x")])
        other = Model()
        a, b = other.add_var("a"), other.add_var("b")
        with pytest.raises(ModelError):
            m.add_constr(a + b <= 1, "foreign")

    def test_expression_algebra(self):
        m = Model()
        x, y = m.add_var("x"), m.add_var("y")
        e = 2 * x - (y - 3) / 2 + quicksum([x, y])
        assert e.terms == {x.index: 3.0, y.index: 0.5}
        assert e.const == 1.5


def _sos_model():
    m = Model("sos")
    lam = [m.add_var(f"l{k}", ub=1) for k in range(3)]
    m.add_sos2(lam, [0, 50, 100])
    m.add_constr(quicksum(lam) == 1, "convex")
    # maximise the interpolated value of a non-concave curve
    m.minimize(-(0 * lam[0] + 1 * lam[1] + 3 * lam[2]) + 0 * lam[0])
    return m, lam


class TestExport:
    def test_byte_stable(self):
        a, _ = _sos_model()
        b, _ = _sos_model()
        assert export_lp(a) == export_lp(b)

    def test_empty_model(self):
        m = Model("empty")
        m.add_var("x", ub=4)
        m.minimize(m.var("x"))
        text = export_lp(m)
        assert "Minimize" in text and "Bounds" in text and "End" in text
        assert "S2" not in text

    def test_sos2_section(self):
        m, _ = _sos_model()
        text = export_lp(m)
        assert "SOS" in text and "S2::" in text

    def test_parse_cbc_solution(self):
        m = Model()
        x, y = m.add_var("x"), m.add_var("y")
        m.minimize(x + y)
        sol = parse_cbc_solution("Optimal - objective value 3.5\n0 x 1.5 0\n1 y 2 0\n", m)
        assert sol.status == "optimal" and sol.objective == 3.5
        assert np.array_equal(sol.values, [1.5, 2.0])


@pytest.mark.parametrize("config", BACKENDS)
class TestSolve:
    def test_lower_bound(self, config):
        m = Model()
        x = m.add_var("x")
        m.add_constr(x >= 3, "c")
        m.minimize(x)
        sol = solve(m, config)
        assert sol.is_optimal and sol.objective == pytest.approx(3.0)

    def test_infeasible(self, config):
        m = Model()
        x = m.add_var("x")
        m.add_constr(x >= 3, "lo")
        m.add_constr(x <= 2, "hi")
        m.minimize(x)
        assert solve(m, config).status == "infeasible"

    def test_fixed_variable_acts_as_parameter(self, config):
        m = Model()
        x, p = m.add_var("x"), m.add_var("p", lb=2.5, ub=2.5)
        m.add_constr(x - p >= 0, "c")
        m.minimize(x)
        assert solve(m, config).objective == pytest.approx(2.5)

    def test_knapsack_matches_enumeration(self, config):
        w, v, cap = [4, 3, 2], [10, 7, 4], 6
        m = Model()
        z = [m.add_var(f"z{i}", BINARY) for i in range(3)]
        m.add_constr(quicksum(wi * zi for wi, zi in zip(w, z)) <= cap, "cap")
        m.minimize(-quicksum(vi * zi for vi, zi in zip(v, z)))
        best = max(
            sum(vi for vi, s in zip(v, pick) if s)
            for pick in itertools.product((0, 1), repeat=3)
            if sum(wi for wi, s in zip(w, pick) if s) <= cap
        )
        sol = solve(m, config)
        assert -sol.objective == pytest.approx(best)
        assert check_solution(m, sol).ok

    def test_sos2_cuts_off_nonadjacent(self, config):
        m, lam = _sos_model()
        # without SOS2 the LP would pick l0 = l2 = 0.5 to reach the midpoint
        m.add_constr(50 * lam[1] + 100 * lam[2] == 50, "mid")
        sol = solve(m, config)
        vals = sol.value(np.array([v.index for v in lam]))
        assert sos2_adjacent(vals)
        assert -sol.objective == pytest.approx(1.0)


def test_sos2_adjacency_rule():
    assert sos2_adjacent([0.4, 0.6, 0.0])
    assert sos2_adjacent([0.0, 1.0, 0.0])
    assert not sos2_adjacent([0.5, 0.0, 0.5])
    assert not sos2_adjacent([0.2, 0.3, 0.5])


def test_segment_reformulation_needs_bounds():
    m = Model()
    a, b = m.add_var("a"), m.add_var("b")
    m.add_sos2([a, b])
    with pytest.raises(SolverError, match="finite"):
        with_sos2_binaries(m)


def test_check_flags_violations():
    m = Model()
    x = m.add_var("x", ub=1)
    u = m.add_var("u", BINARY)
    m.add_constr(x + u <= 1, "c")
    bad = Solution("optimal", 0.0, np.array([1.0, 0.5]))
    chk = check_solution(m, bad)
    assert not chk.ok and chk.max_integrality == pytest.approx(0.5)
    assert chk.max_residual == pytest.approx(0.5)


def test_missing_executable_raises(monkeypatch):
    monkeypatch.setenv(SOLVER_ENV, "/nonexistent/solver")
    cfg = SolverConfig.from_env()
    assert cfg.backend == "command"
    m = Model()
    x = m.add_var("x")
    m.minimize(x)
    with pytest.raises(SolverError):
        solve(m, cfg)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 9), st.integers(0, 20)), min_size=1, max_size=6), st.integers(0, 25))
def test_random_knapsacks(items, cap):
    m = Model()
    z = [m.add_var(f"z{i}", BINARY) for i in range(len(items))]
    m.add_constr(quicksum(w * zi for (w, _), zi in zip(items, z)) <= cap, "cap")
    m.minimize(-quicksum(v * zi for (_, v), zi in zip(items, z)))
    best = 0
    for pick in itertools.product((0, 1), repeat=len(items)):
        if sum(w for (w, _), s in zip(items, pick) if s) <= cap:
            best = max(best, sum(v for (_, v), s in zip(items, pick) if s))
    assert -solve(m).objective == pytest.approx(best, abs=1e-6)
