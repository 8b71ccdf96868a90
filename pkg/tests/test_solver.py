import random
import sys
import textwrap

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_config, random_small_log
from ilpminer.discovery import prepare
from ilpminer.ilpmodel import DiscoveryConfig, arcs_of, build_model
from ilpminer.loglib import EventLog
from ilpminer.solver import (
    EXTERNAL_SOLVER_ENV,
    LpRelaxation,
    SolveLimits,
    SolverError,
    brute_force_solve,
    lp_relax_solve,
    parse_solution_file,
    solve,
)

EPS = 1e-7


def setup(lg, cfg=None):
    p = prepare(lg)
    m = build_model(p.measures, p.log.start, p.log.end, cfg, tasks=p.log.alphabet)
    return p, m


def named(p, arcs):
    return {(p.log.alphabet[i], p.log.alphabet[j]) for i, j in arcs}


@pytest.mark.parametrize("backend", ["highs", "bnb"])
def test_sequence_example(seq_log, backend):
    p, m = setup(seq_log)
    sol = solve(m, backend=backend)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(20 / 11 - 2 * EPS, abs=1e-9)
    assert named(p, arcs_of(m, sol.assignment)) == {("s", "a"), ("a", "e")}


@pytest.mark.parametrize("backend", ["highs", "bnb"])
def test_concurrency_example(conc_log, backend):
    p, m = setup(conc_log)
    sol = solve(m, backend=backend)
    assert sol.objective_value == pytest.approx(4 * 10 / 11 - 4 * EPS, abs=1e-9)
    assert named(p, arcs_of(m, sol.assignment)) == {("s", "a"), ("s", "b"), ("a", "e"), ("b", "e")}


@pytest.mark.parametrize("fixture", ["seq_log", "conc_log"])
def test_brute_force_matches_examples(fixture, request):
    p, m = setup(request.getfixturevalue(fixture))
    ref, arcs = brute_force_solve(p.measures, p.log.start, p.log.end)
    sol = solve(m)
    assert ref.objective_value == pytest.approx(sol.objective_value, abs=1e-9)
    assert arcs == arcs_of(m, sol.assignment)


@pytest.mark.parametrize("backend", ["highs", "bnb"])
def test_infeasible_degree_cap(seq_log, backend):
    _, m = setup(seq_log, DiscoveryConfig(max_inputs=0))
    assert solve(m, backend=backend).status.value == "infeasible"


def test_brute_force_infeasible_and_cap(seq_log):
    p = prepare(seq_log)
    sol, arcs = brute_force_solve(p.measures, p.log.start, p.log.end, DiscoveryConfig(max_inputs=0))
    assert sol.status.value == "infeasible" and not arcs
    big = prepare(EventLog.from_sequences([list("sabcdefe")]))
    with pytest.raises(SolverError):
        brute_force_solve(big.measures, big.log.start, big.log.end)


def test_two_tasks_single_graph():
    p = prepare(EventLog.from_sequences([["s", "e"]]))
    sol, arcs = brute_force_solve(p.measures, p.log.start, p.log.end)
    assert named(p, arcs) == {("s", "e")}


def test_unavoidable_punishment():
    # a's only possible neighbours are s and e, both with d = 1/2 < 0.9
    p, m = setup(EventLog.from_sequences([["s", "a", "e"]]), DiscoveryConfig(dep_thresh=0.9))
    big_m = 10 * (9 + 3)
    expected = 0.5 + 0.5 - 2 * big_m * (1 - 0.5) - 2 * EPS
    sol = solve(m)
    ref, _ = brute_force_solve(p.measures, p.log.start, p.log.end, DiscoveryConfig(dep_thresh=0.9))
    assert sol.objective_value == pytest.approx(expected, abs=1e-9)
    assert ref.objective_value == pytest.approx(expected, abs=1e-9)


def test_root_integral_terminates_at_root(seq_log):
    _, m = setup(seq_log)
    assert solve(m, backend="bnb").stats.nodes == 1


def test_lp_infeasible_rows():
    relax = LpRelaxation(np.array([1.0]), sp.csr_matrix([[1.0], [1.0]]), np.array([-np.inf, 1.0]),
                         np.array([0.0, np.inf]))
    assert relax.solve(np.array([0.0]), np.array([5.0])).status == "infeasible"


def test_relaxation_bounds_and_determinism():
    rng = random.Random(11)
    for _ in range(30):
        lg = random_small_log(rng)
        cfg = random_config(rng)
        p, m = setup(lg, cfg)
        sol = solve(m)
        lp = lp_relax_solve(m)
        if sol.optimal:
            assert lp.bound >= sol.objective_value - 1e-6
            again = solve(m)
            assert np.array_equal(again.assignment, sol.assignment)
        else:
            ref, _ = brute_force_solve(p.measures, p.log.start, p.log.end, cfg)
            assert not ref.optimal


def test_bnb_agrees_with_highs():
    rng = random.Random(5)
    for _ in range(15):
        lg = random_small_log(rng)
        cfg = random_config(rng)
        _, m = setup(lg, cfg)
        a, b = solve(m), solve(m, backend="bnb")
        assert a.status == b.status
        if a.optimal:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)
            assert b.bound >= b.objective_value - 1e-9


def test_limits():
    with pytest.raises(ValueError):
        SolveLimits(time_limit=-1)
    lg = EventLog.from_sequences([list("sabcde"), list("sacbde"), list("sbdace")] * 3)
    _, m = setup(lg)
    sol = solve(m, SolveLimits(node_limit=1), backend="bnb")
    assert sol.status.value in ("limit_reached", "optimal")


def test_parse_solution_file():
    vals = parse_solution_file("# header\nE_0_1 1\nu_2 3.0\n\\ comment\n0 x_1_2 1 0\n")
    assert vals == {"E_0_1": 1.0, "u_2": 3.0, "x_1_2": 1.0}


FAKE_SOLVER = textwrap.dedent("""
    import sys, highspy
    lp, out = sys.argv[1], sys.argv[2]
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(lp)
    h.run()
    if h.getModelStatus() != highspy.HighsModelStatus.kOptimal:
        open(out, "w").close()
        sys.exit(0)
    names = [h.getColName(k)[1] for k in range(h.getNumCol())]
    with open(out, "w") as fh:
        for name, v in zip(names, h.getSolution().col_value):
            fh.write(f"{name} {v}\\n")
""")


def test_external_solver(tmp_path, monkeypatch, seq_log):
    pytest.importorskip("highspy")
    script = tmp_path / "fake_solver.py"
    script.write_text(FAKE_SOLVER)
    monkeypatch.setenv(EXTERNAL_SOLVER_ENV, f"{sys.executable} {script}")
    p, m = setup(seq_log)
    sol = solve(m)
    assert sol.optimal
    assert sol.objective_value == pytest.approx(20 / 11, abs=1e-6)
    _, m0 = setup(seq_log, DiscoveryConfig(max_inputs=0))
    assert solve(m0).status.value == "infeasible"


def test_external_solver_answer_is_rechecked(tmp_path, monkeypatch, seq_log):
    script = tmp_path / "liar.py"
    script.write_text("import sys\nopen(sys.argv[2], 'w').write('E_0_2 1\\n')\n")
    monkeypatch.setenv(EXTERNAL_SOLVER_ENV, f"{sys.executable} {script}")
    _, m = setup(seq_log)
    with pytest.raises(SolverError, match="violates"):
        solve(m)


def test_unknown_backend(seq_log):
    _, m = setup(seq_log)
    with pytest.raises(ValueError):
        solve(m, backend="nope")
