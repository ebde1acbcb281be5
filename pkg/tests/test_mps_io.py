import json
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cornerpush.instance_gen import FAMILIES, GenSpec, generate
from cornerpush.lp_model import EQ, GE, LE, Iterate, LinearProgram
from cornerpush.mps_io import (MPSFormatError, SolutionFile, dumps_json, format_mps, loads_json,
                               lp_from_dict, lp_to_dict, parse_mps, read_json, read_model,
                               read_mps, read_solution, write_json, write_mps, write_solution)
from cornerpush.pdhg import solve_pdhg

MINIMAL = """\
NAME          TINY
ROWS
 N  OBJ
 L  C1
COLUMNS
    X         OBJ       2.5   C1        3.0
RHS
    RHS       C1        6.0
ENDATA
"""

RANGED = """\
NAME          RNGTEST
ROWS
 N  COST
 L  LIM1
 G  LIM2
 E  MYEQN
 E  MYEQ2
COLUMNS
    X1        COST         1.0   LIM1         1.0
    X1        LIM2         1.0
    X2        COST         2.0   LIM1         1.0
    X2        MYEQN       -1.0
    X3        COST        -1.0   MYEQN        1.0
    X3        MYEQ2        1.0
RHS
    RHS       COST        -3.5
    RHS       LIM1         4.0   LIM2         1.0
    RHS       MYEQN        7.0   MYEQ2        2.0
RANGES
    RNG       LIM1         2.5   LIM2         3.0
    RNG       MYEQN       -2.0   MYEQ2        1.5
BOUNDS
 UP BND       X1           4.0
 MI BND       X2
 UP BND       X2           1.0
 FR BND       X3
ENDATA
"""

# row intervals, column bounds and objective offset of RANGED as read by HiGHS
RANGED_ROWS = {"LIM1": (1.5, 4.0), "LIM2": (1.0, 4.0), "MYEQN": (5.0, 7.0), "MYEQ2": (2.0, 3.5)}
RANGED_LB = [0.0, -np.inf, -np.inf]
RANGED_UB = [4.0, 1.0, np.inf]
RANGED_OFFSET = 3.5


def row_intervals(lp):
    """Merge each row with its ``_rng`` partner into one ``[lo, hi]`` interval."""
    out = {}
    for i, name in enumerate(lp.row_names):
        base = name[:-4] if name.endswith("_rng") else name
        lo, hi = out.get(base, (-np.inf, np.inf))
        s, v = lp.row_sense[i], lp.b[i]
        if s in (GE, EQ):
            lo = max(lo, v)
        if s in (LE, EQ):
            hi = min(hi, v)
        out[base] = (lo, hi)
    return out


def mps_with(body_rows="", body_cols="", body_rhs="", body_bounds="", rows=" N  OBJ\n L  R1\n"):
    return (f"NAME T\nROWS\n{rows}{body_rows}COLUMNS\n{body_cols}RHS\n{body_rhs}"
            f"BOUNDS\n{body_bounds}ENDATA\n")


class TestRead:
    def test_minimal(self, tmp_path):
        path = tmp_path / "tiny.mps"
        path.write_text(MINIMAL)
        lp = read_mps(path)
        assert (lp.num_rows, lp.num_cols) == (1, 1)
        assert lp.A.toarray().tolist() == [[3.0]]
        assert lp.c.tolist() == [2.5] and lp.b.tolist() == [6.0]
        assert lp.row_sense.tolist() == [LE]
        assert lp.lb.tolist() == [0.0] and lp.ub.tolist() == [np.inf]
        assert lp.name == "TINY" and lp.col_names == ("X",) and lp.row_names == ("C1",)

    def test_ranges_match_reference(self):
        lp = parse_mps(RANGED)
        got = row_intervals(lp)
        assert got == RANGED_ROWS
        assert lp.lb.tolist() == RANGED_LB
        assert lp.ub.tolist() == RANGED_UB
        assert lp.obj_constant == RANGED_OFFSET
        assert lp.c.tolist() == [1.0, 2.0, -1.0]

    def test_ranges_against_highs(self, tmp_path):
        highspy = pytest.importorskip("highspy")
        path = tmp_path / "ranged.mps"
        path.write_text(RANGED)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(str(path))
        ref = h.getLp()
        ours = parse_mps(RANGED)
        got = row_intervals(ours)
        for name, lo, hi in zip(ref.row_names_, ref.row_lower_, ref.row_upper_):
            assert got[name] == (lo, hi)
        np.testing.assert_array_equal(ours.lb, ref.col_lower_)
        np.testing.assert_array_equal(ours.ub, ref.col_upper_)
        np.testing.assert_array_equal(ours.c, ref.col_cost_)
        assert ours.obj_constant == ref.offset_

    def test_bound_codes(self):
        text = mps_with(body_cols="    A OBJ 1 R1 1\n    B OBJ 1 R1 1\n    C OBJ 1 R1 1\n"
                                  "    D OBJ 1 R1 1\n    E OBJ 1 R1 1\n",
                        body_rhs="    RHS R1 1\n",
                        body_bounds=" FR BND A\n MI BND B\n PL BND C\n LO BND C -2\n"
                                    " FX BND D 3\n UP BND E -1\n")
        lp = parse_mps(text)
        assert lp.lb.tolist() == [-np.inf, -np.inf, -2.0, 3.0, -np.inf]
        assert lp.ub.tolist() == [np.inf, np.inf, np.inf, 3.0, -1.0]

    def test_negative_upper_bound_warns(self, caplog):
        text = mps_with(body_cols="    E OBJ 1 R1 1\n", body_rhs="    RHS R1 1\n",
                        body_bounds=" UP BND E -1\n")
        with caplog.at_level(logging.WARNING, logger="cornerpush.mps_io"):
            parse_mps(text)
        assert "negative upper bound" in caplog.text

    def test_objsense_max(self):
        text = "NAME M\nOBJSENSE\n    MAX\n" + MINIMAL.split("\n", 1)[1]
        lp = parse_mps(text)
        assert lp.maximize
        assert lp.c.tolist() == [-2.5]
        assert lp.user_objective(np.array([2.0])) == pytest.approx(5.0)

    def test_comments_and_blank_lines(self):
        text = MINIMAL.replace("ROWS\n", "* a comment\n\nROWS\n")
        assert parse_mps(text).equals(parse_mps(MINIMAL))

    @pytest.mark.parametrize("text,needle,line", [
        (mps_with(body_cols="    X OBJ 1 R1 1\n    X R1 2\n"), "duplicate", 7),
        (mps_with(body_cols="    X OBJ 1 R9 1\n"), "unknown row", 6),
        (mps_with(body_cols="    X OBJ 1\n", body_bounds=" UP BND Y 1\n"), "unknown column", 9),
        (mps_with(body_cols="    X OBJ 1\n", body_bounds=" BV BND X\n"), "integer", 9),
        (mps_with(body_cols="    M1 'MARKER' 'INTORG'\n"), "integer", 6),
        (mps_with(body_cols="    X OBJ abc\n"), "number", 6),
        (mps_with(rows=" N  OBJ\n Q  R1\n"), "row type", 4),
    ])
    def test_errors_carry_line_numbers(self, text, needle, line):
        with pytest.raises(MPSFormatError, match=needle) as info:
            parse_mps(text)
        assert info.value.lineno == line
        assert f"line {line}" in str(info.value)

    def test_missing_endata(self):
        with pytest.raises(MPSFormatError, match="ENDATA"):
            parse_mps(MINIMAL.replace("ENDATA\n", ""))


class TestRoundTrip:
    @given(st.sampled_from(FAMILIES), st.integers(2, 20), st.integers(0, 2**31 - 1),
           st.sampled_from([0.0, 0.8]))
    @settings(max_examples=40)
    def test_generated_instances(self, family, m, seed, knob):
        lp = generate(GenSpec(family, m, degeneracy_knob=knob, seed=seed, density=0.4))
        back = parse_mps(format_mps(lp))
        assert back.equals(lp, names=lp.row_names is not None)
        assert back.c.tobytes() == lp.c.tobytes()
        assert back.A.toarray().tobytes() == lp.A.toarray().tobytes()

    def test_ranged_model(self):
        lp = parse_mps(RANGED)
        assert parse_mps(format_mps(lp)).equals(lp)

    def test_max_and_constant(self):
        lp = parse_mps("NAME M\nOBJSENSE\n    MAX\n" + RANGED.split("\n", 1)[1])
        back = parse_mps(format_mps(lp))
        assert back.equals(lp) and back.maximize and back.obj_constant == lp.obj_constant

    def test_infinite_bounds_json(self, tmp_path):
        lp = LinearProgram.from_dense([[1.0, 1.0]], [1.0], [1.0, 1.0],
                                      lb=[-np.inf, 0.0], ub=[np.inf, np.inf])
        d = lp_to_dict(lp)
        assert d["format_version"] == 1
        assert d["lb"][0] == "-inf" and d["ub"][0] == "inf"
        json.dumps(d, allow_nan=False)
        assert lp_from_dict(d).equals(lp)
        write_json(lp, tmp_path / "m.json")
        assert read_json(tmp_path / "m.json").equals(lp)

    def test_file_helpers(self, tmp_path):
        lp = generate(GenSpec("random_sparse", 6, 14, seed=1, density=0.4))
        write_mps(lp, tmp_path / "a.mps")
        write_json(lp, tmp_path / "a.json")
        assert read_model(tmp_path / "a.mps").equals(lp, names=False)
        assert read_model(tmp_path / "a.json").equals(lp)
        assert loads_json(dumps_json(lp)).equals(lp)

    def test_unknown_version(self):
        d = lp_to_dict(LinearProgram.from_dense([[1.0]], [1.0], [1.0]))
        d["format_version"] = 99
        with pytest.raises(ValueError, match="format_version"):
            lp_from_dict(d)


class TestSolutionFile:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        for k in range(100):
            m = int(rng.integers(1, 12))
            lp = generate(GenSpec("random_sparse", m, m + int(rng.integers(0, 12)),
                                  seed=k, density=0.5))
            it = Iterate(rng.standard_normal(lp.num_cols) * 10.0 ** rng.integers(-8, 8),
                         rng.standard_normal(lp.num_rows) / 3.0,
                         rng.standard_normal(lp.num_cols) * 1e-13)
            sol = SolutionFile.from_iterate(lp, it, status="Converged", iterations={"pdhg": k})
            path = tmp_path / f"s{k}.json"
            write_solution(sol, path)
            back = read_solution(path, lp).to_iterate(lp)
            assert back.x.tobytes() == it.x.tobytes()
            assert back.y.tobytes() == it.y.tobytes()
            assert back.z.tobytes() == it.z.tobytes()

    def test_metadata(self, tmp_path):
        lp = generate(GenSpec("random_dense", 4, 9, 0.0, seed=0))
        res = solve_pdhg(lp)
        sol = SolutionFile.from_iterate(lp, res.iterate, status=res.status.value,
                                        iterations={"pdhg": res.iterations}, phase_times={"pdhg": 0.5},
                                        metadata={"seed": 0})
        write_solution(sol, tmp_path / "s.json")
        back = read_solution(tmp_path / "s.json")
        assert back.status == "Converged" and back.iterations == {"pdhg": res.iterations}
        assert back.phase_times == {"pdhg": 0.5} and back.metadata == {"seed": 0}

    def test_unknown_name_rejected(self, tmp_path):
        lp = LinearProgram.from_dense([[1.0]], [1.0], [1.0])
        sol = SolutionFile.from_iterate(lp, Iterate(np.ones(1), np.ones(1), np.zeros(1)))
        sol.x["ghost"] = 1.0
        with pytest.raises(ValueError, match="ghost"):
            sol.to_iterate(lp)

    def test_missing_name_rejected(self):
        lp = LinearProgram.from_dense([[1.0, 1.0]], [1.0], [1.0, 1.0])
        sol = SolutionFile.from_iterate(lp, Iterate(np.ones(2), np.ones(1), np.zeros(2)))
        del sol.x["C1"]
        with pytest.raises(ValueError):
            sol.to_iterate(lp)
