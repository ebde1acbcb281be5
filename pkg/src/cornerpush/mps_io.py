"""MPS and JSON readers/writers for models and solutions.

MPS input is free format (whitespace separated tokens), which also covers
fixed-format files whose names contain no spaces. Ranged rows become a pair
of one-sided rows: the original row keeps its name and the second row is
appended at the end as ``<name>_rng``. Integer markers and integer bound
types are rejected.

JSON files carry ``format_version`` and a ``kind`` (``"lp"`` or
``"solution"``). Infinite values are stored as the strings ``"inf"`` and
``"-inf"``; all other floats round-trip bitwise.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .lp_model import EQ, GE, LE, Iterate, LinearProgram, default_names

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
PathLike = Union[str, os.PathLike]


class MPSFormatError(ValueError):
    """Malformed MPS input; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno is not None else message)


def _float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MPSFormatError(f"expected a number, got {tok!r}", lineno) from None


def parse_mps(text: str) -> LinearProgram:
    """Parse MPS source text."""
    name = ""
    section = None
    maximize = False
    obj_row = None
    row_names: list[str] = []
    row_sense: list[str] = []
    row_index: dict[str, int] = {}
    free_rows: set[str] = set()
    col_names: list[str] = []
    col_index: dict[str, int] = {}
    entries: dict[tuple[int, int], float] = {}
    cost: dict[int, float] = {}
    rhs: dict[int, float] = {}
    ranges: dict[int, float] = {}
    obj_constant = 0.0
    lb: dict[int, float] = {}
    ub: dict[int, float] = {}
    lb_set: set[int] = set()
    seen_bounds: set[tuple[str, int]] = set()
    ended = False

    def lookup_row(tok, lineno):
        if tok == obj_row:
            return -1
        if tok in free_rows:
            return None
        if tok not in row_index:
            raise MPSFormatError(f"unknown row {tok!r}", lineno)
        return row_index[tok]

    def lookup_col(tok, lineno):
        if tok not in col_index:
            raise MPSFormatError(f"unknown column {tok!r}", lineno)
        return col_index[tok]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        toks = line.split()
        if not raw[0].isspace():
            head = toks[0].upper()
            if head == "NAME":
                name = " ".join(toks[1:])
                section = "NAME"
                continue
            if head == "OBJSENSE":
                section = "OBJSENSE"
                if len(toks) > 1:
                    maximize = _objsense(toks[1], lineno)
                continue
            if head in ("ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS"):
                if len(toks) != 1:
                    raise MPSFormatError(f"unexpected tokens after {head}", lineno)
                section = head
                continue
            if head == "ENDATA":
                ended = True
                break
            if head in ("SOS", "QUADOBJ", "QMATRIX", "QSECTION", "QCMATRIX"):
                raise MPSFormatError(f"unsupported section {head}", lineno)
            raise MPSFormatError(f"unknown section {toks[0]!r}", lineno)

        if section is None or section == "NAME":
            raise MPSFormatError("data line outside of a section", lineno)
        if section == "OBJSENSE":
            maximize = _objsense(toks[0], lineno)
        elif section == "ROWS":
            if len(toks) != 2:
                raise MPSFormatError("ROWS entries need a type and a name", lineno)
            kind, rname = toks[0].upper(), toks[1]
            if rname in row_index or rname == obj_row or rname in free_rows:
                raise MPSFormatError(f"duplicate row {rname!r}", lineno)
            if kind == "N":
                if obj_row is None:
                    obj_row = rname
                else:
                    free_rows.add(rname)
            elif kind in (LE, GE, EQ):
                row_index[rname] = len(row_names)
                row_names.append(rname)
                row_sense.append(kind)
            else:
                raise MPSFormatError(f"unknown row type {toks[0]!r}", lineno)
        elif section == "COLUMNS":
            if any(t.upper() == "'MARKER'" for t in toks):
                raise MPSFormatError("integer markers are not supported (LP only)", lineno)
            if len(toks) not in (3, 5):
                raise MPSFormatError("COLUMNS entries need a column and 1 or 2 row/value pairs",
                                     lineno)
            cname = toks[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
            j = col_index[cname]
            for rtok, vtok in zip(toks[1::2], toks[2::2]):
                i = lookup_row(rtok, lineno)
                val = _float(vtok, lineno)
                if i is None:
                    continue
                if (i, j) in entries or (i == -1 and j in cost):
                    raise MPSFormatError(f"duplicate entry for column {cname!r} row {rtok!r}",
                                         lineno)
                if i == -1:
                    cost[j] = val
                else:
                    entries[(i, j)] = val
        elif section in ("RHS", "RANGES"):
            pairs = toks[1:] if len(toks) in (3, 5) else toks
            if len(pairs) not in (2, 4):
                raise MPSFormatError(f"malformed {section} entry", lineno)
            target = rhs if section == "RHS" else ranges
            for rtok, vtok in zip(pairs[::2], pairs[1::2]):
                i = lookup_row(rtok, lineno)
                val = _float(vtok, lineno)
                if i is None:
                    continue
                if i == -1:
                    if section == "RANGES":
                        raise MPSFormatError("RANGES on the objective row", lineno)
                    obj_constant = -val
                    continue
                if i in target:
                    raise MPSFormatError(f"duplicate {section} entry for row {rtok!r}", lineno)
                target[i] = val
        elif section == "BOUNDS":
            kind = toks[0].upper()
            if kind in ("BV", "LI", "UI", "SC", "SI"):
                raise MPSFormatError(f"integer bound type {kind} is not supported (LP only)",
                                     lineno)
            if kind in ("FR", "MI", "PL"):
                if len(toks) not in (2, 3, 4):
                    raise MPSFormatError("malformed BOUNDS entry", lineno)
                ctok = toks[2] if len(toks) >= 3 else toks[1]
                val = None
            elif kind in ("UP", "LO", "FX"):
                if len(toks) == 4:
                    ctok, vtok = toks[2], toks[3]
                elif len(toks) == 3:
                    ctok, vtok = toks[1], toks[2]
                else:
                    raise MPSFormatError("malformed BOUNDS entry", lineno)
                val = _float(vtok, lineno)
            else:
                raise MPSFormatError(f"unknown bound type {toks[0]!r}", lineno)
            j = lookup_col(ctok, lineno)
            if (kind, j) in seen_bounds:
                raise MPSFormatError(f"duplicate {kind} bound for column {ctok!r}", lineno)
            seen_bounds.add((kind, j))
            if kind == "UP":
                ub[j] = val
                if val < 0 and j not in lb_set and lb.get(j, 0.0) == 0.0:
                    # conventional MPS behaviour for a negative UP with a default lower bound
                    logger.warning("line %d: negative upper bound on %s, lower bound set to -inf",
                                   lineno, ctok)
                    lb[j] = -np.inf
            elif kind == "LO":
                lb[j] = val
                lb_set.add(j)
            elif kind == "FX":
                lb[j] = ub[j] = val
                lb_set.add(j)
            elif kind == "FR":
                lb[j], ub[j] = -np.inf, np.inf
                lb_set.add(j)
            elif kind == "MI":
                lb[j] = -np.inf
                lb_set.add(j)
            else:
                ub[j] = np.inf
    if not ended:
        raise MPSFormatError("missing ENDATA")
    if obj_row is None:
        raise MPSFormatError("no objective (N) row")

    m, n = len(row_names), len(col_names)
    b = np.zeros(m)
    for i, v in rhs.items():
        b[i] = v
    sense = list(row_sense)
    rows = [i for (i, _) in entries]
    cols = [j for (_, j) in entries]
    vals = list(entries.values())
    extra_names, extra_sense, extra_b = [], [], []
    by_row: dict[int, list] = {i: [] for i in ranges}
    for (i, j), v in entries.items():
        if i in by_row:
            by_row[i].append((j, v))
    for i in sorted(ranges):
        r = ranges[i]
        if sense[i] == EQ and r == 0.0:
            continue
        if sense[i] == LE:
            lo, hi = b[i] - abs(r), b[i]
        elif sense[i] == GE:
            lo, hi = b[i], b[i] + abs(r)
        else:
            lo, hi = (b[i], b[i] + r) if r > 0 else (b[i] + r, b[i])
        k = m + len(extra_names)
        if sense[i] == LE:
            extra_sense.append(GE)
            extra_b.append(lo)
        else:
            sense[i], b[i] = GE, lo
            extra_sense.append(LE)
            extra_b.append(hi)
        extra_names.append(f"{row_names[i]}_rng")
        for j, v in by_row[i]:
            rows.append(k)
            cols.append(j)
            vals.append(v)
    mm = m + len(extra_names)
    A = sp.csc_matrix((vals, (rows, cols)), shape=(mm, n))
    lbv = np.zeros(n)
    ubv = np.full(n, np.inf)
    for j, v in lb.items():
        lbv[j] = v
    for j, v in ub.items():
        ubv[j] = v
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    if maximize:
        c, obj_constant = -c, -obj_constant
    bad = np.flatnonzero(lbv > ubv)
    if bad.size:
        raise MPSFormatError(f"column {col_names[bad[0]]!r} has lower bound above upper bound")
    return LinearProgram(
        A=A,
        b=np.concatenate([b, extra_b]),
        c=c,
        row_sense=np.array(sense + extra_sense, dtype="<U1"),
        lb=lbv,
        ub=ubv,
        obj_constant=obj_constant,
        row_names=tuple(row_names + extra_names),
        col_names=tuple(col_names),
        name=name,
        maximize=maximize,
    )


def _objsense(tok: str, lineno: int) -> bool:
    t = tok.upper()
    if t in ("MAX", "MAXIMIZE"):
        return True
    if t in ("MIN", "MINIMIZE"):
        return False
    raise MPSFormatError(f"unknown objective sense {tok!r}", lineno)


def read_mps(path: PathLike) -> LinearProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_mps(fh.read())


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _check_token(s: str, what: str):
    if not s or any(ch.isspace() for ch in s):
        raise ValueError(f"{what} name {s!r} cannot be written to free MPS")


def format_mps(lp: LinearProgram) -> str:
    """Free-format MPS text for ``lp`` (17 significant digits)."""
    rnames = default_names(lp.row_names, "R", lp.num_rows)
    cnames = default_names(lp.col_names, "C", lp.num_cols)
    for s in rnames:
        _check_token(s, "row")
    for s in cnames:
        _check_token(s, "column")
    obj = "OBJ"
    taken = set(rnames)
    while obj in taken:
        obj += "_"
    sign = -1.0 if lp.maximize else 1.0
    c = sign * lp.c
    out = [f"NAME {lp.name}".rstrip()]
    if lp.maximize:
        out += ["OBJSENSE", "    MAX"]
    out.append("ROWS")
    out.append(f" N  {obj}")
    for s, nm in zip(lp.row_sense, rnames):
        out.append(f" {s}  {nm}")
    out.append("COLUMNS")
    A = lp.A
    for j, cn in enumerate(cnames):
        start, end = A.indptr[j], A.indptr[j + 1]
        if c[j] != 0.0 or start == end:
            out.append(f"    {cn}  {obj}  {_fmt(c[j])}")
        for k in range(start, end):
            out.append(f"    {cn}  {rnames[A.indices[k]]}  {_fmt(A.data[k])}")
    out.append("RHS")
    const = sign * lp.obj_constant
    if const != 0.0:
        out.append(f"    RHS  {obj}  {_fmt(-const)}")
    for i, nm in enumerate(rnames):
        if lp.b[i] != 0.0:
            out.append(f"    RHS  {nm}  {_fmt(lp.b[i])}")
    out.append("BOUNDS")
    for j, cn in enumerate(cnames):
        lo, hi = lp.lb[j], lp.ub[j]
        if lo == hi:
            out.append(f" FX BND  {cn}  {_fmt(lo)}")
            continue
        if lo == -np.inf and hi == np.inf:
            out.append(f" FR BND  {cn}")
            continue
        if lo == -np.inf:
            out.append(f" MI BND  {cn}")
        elif lo != 0.0 or np.signbit(lo) or (hi < 0):
            # explicit LO keeps a negative UP from resetting the lower bound
            out.append(f" LO BND  {cn}  {_fmt(lo)}")
        if hi != np.inf:
            out.append(f" UP BND  {cn}  {_fmt(hi)}")
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def write_mps(lp: LinearProgram, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_mps(lp))


# JSON


def _enc(v) -> Union[float, str]:
    v = float(v)
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    if v != v:
        raise ValueError("NaN cannot be serialized")
    return v


def _dec(v) -> float:
    if isinstance(v, str):
        if v in ("inf", "-inf"):
            return float(v)
        raise ValueError(f"unexpected string value {v!r}")
    return float(v)


def _vec(values) -> list:
    return [_enc(v) for v in values]


def _unvec(values) -> np.ndarray:
    return np.array([_dec(v) for v in values], dtype=float)


def lp_to_dict(lp: LinearProgram) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "lp",
        "name": lp.name,
        "maximize": bool(lp.maximize),
        "obj_constant": _enc(lp.obj_constant),
        "num_rows": lp.num_rows,
        "num_cols": lp.num_cols,
        "row_names": None if lp.row_names is None else list(lp.row_names),
        "col_names": None if lp.col_names is None else list(lp.col_names),
        "row_sense": "".join(lp.row_sense.tolist()),
        "b": _vec(lp.b),
        "c": _vec(lp.c),
        "lb": _vec(lp.lb),
        "ub": _vec(lp.ub),
        "A": {
            "format": "csc",
            "indptr": lp.A.indptr.tolist(),
            "indices": lp.A.indices.tolist(),
            "data": _vec(lp.A.data),
        },
    }


def _check_version(d: dict, kind: str):
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
    if d.get("kind") != kind:
        raise ValueError(f"expected kind {kind!r}, got {d.get('kind')!r}")


def lp_from_dict(d: dict) -> LinearProgram:
    _check_version(d, "lp")
    m, n = int(d["num_rows"]), int(d["num_cols"])
    Ad = d["A"]
    if Ad.get("format") != "csc":
        raise ValueError("matrix must be stored as csc")
    A = sp.csc_matrix((_unvec(Ad["data"]), np.array(Ad["indices"], dtype=np.int32),
                       np.array(Ad["indptr"], dtype=np.int32)), shape=(m, n))
    sense = d["row_sense"]
    return LinearProgram(
        A=A,
        b=_unvec(d["b"]),
        c=_unvec(d["c"]),
        row_sense=np.array(list(sense), dtype="<U1"),
        lb=_unvec(d["lb"]),
        ub=_unvec(d["ub"]),
        obj_constant=_dec(d.get("obj_constant", 0.0)),
        row_names=None if d.get("row_names") is None else tuple(d["row_names"]),
        col_names=None if d.get("col_names") is None else tuple(d["col_names"]),
        name=d.get("name", ""),
        maximize=bool(d.get("maximize", False)),
    )


@dataclass
class SolutionFile:
    """Named solution vectors plus solver metadata."""

    x: dict
    y: dict
    z: dict
    status: str = ""
    iterations: dict = field(default_factory=dict)
    phase_times: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_iterate(cls, lp: LinearProgram, it: Iterate, status: str = "",
                     iterations: Optional[dict] = None, phase_times: Optional[dict] = None,
                     metadata: Optional[dict] = None) -> "SolutionFile":
        rn = default_names(lp.row_names, "R", lp.num_rows)
        cn = default_names(lp.col_names, "C", lp.num_cols)
        return cls(
            x=dict(zip(cn, map(float, it.x))),
            y=dict(zip(rn, map(float, it.y))),
            z=dict(zip(cn, map(float, it.z))),
            status=str(status),
            iterations=dict(iterations or {}),
            phase_times=dict(phase_times or {}),
            metadata=dict(metadata or {}),
        )

    def to_iterate(self, lp: LinearProgram) -> Iterate:
        """Vectors in model order; every name must exist and every entry be present."""
        rn = default_names(lp.row_names, "R", lp.num_rows)
        cn = default_names(lp.col_names, "C", lp.num_cols)

        def gather(d, names, what):
            unknown = set(d) - set(names)
            if unknown:
                raise ValueError(f"solution names unknown {what}: {sorted(unknown)[:5]}")
            missing = [nm for nm in names if nm not in d]
            if missing:
                raise ValueError(f"solution is missing {what}: {missing[:5]}")
            return np.array([d[nm] for nm in names], dtype=float)

        return Iterate(gather(self.x, cn, "columns"), gather(self.y, rn, "rows"),
                       gather(self.z, cn, "columns"))

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "solution",
            "status": self.status,
            "iterations": self.iterations,
            "phase_times": self.phase_times,
            "metadata": self.metadata,
            "x": {k: _enc(v) for k, v in self.x.items()},
            "y": {k: _enc(v) for k, v in self.y.items()},
            "z": {k: _enc(v) for k, v in self.z.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionFile":
        _check_version(d, "solution")
        return cls(
            x={k: _dec(v) for k, v in d["x"].items()},
            y={k: _dec(v) for k, v in d["y"].items()},
            z={k: _dec(v) for k, v in d["z"].items()},
            status=d.get("status", ""),
            iterations=dict(d.get("iterations", {})),
            phase_times=dict(d.get("phase_times", {})),
            metadata=dict(d.get("metadata", {})),
        )


def dumps_json(obj: Union[LinearProgram, SolutionFile]) -> str:
    d = lp_to_dict(obj) if isinstance(obj, LinearProgram) else obj.to_dict()
    return json.dumps(d, allow_nan=False, ensure_ascii=False) + "\n"


def loads_json(text: str) -> Union[LinearProgram, SolutionFile]:
    d = json.loads(text)
    if not isinstance(d, dict):
        raise ValueError("top-level JSON value must be an object")
    if d.get("kind") == "solution":
        return SolutionFile.from_dict(d)
    return lp_from_dict(d)


def write_json(obj: Union[LinearProgram, SolutionFile], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_json(obj))


def read_json(path: PathLike) -> Union[LinearProgram, SolutionFile]:
    with open(path, encoding="utf-8") as fh:
        return loads_json(fh.read())


def write_solution(sol: SolutionFile, path: PathLike) -> None:
    write_json(sol, path)


def read_solution(path: PathLike, lp: Optional[LinearProgram] = None) -> SolutionFile:
    """Load a solution file; with ``lp`` given, every name is checked against it."""
    sol = read_json(path)
    if not isinstance(sol, SolutionFile):
        raise ValueError(f"{path} does not hold a solution")
    if lp is not None:
        sol.to_iterate(lp)
    return sol


def read_model(path: PathLike) -> LinearProgram:
    """Read ``.mps`` or ``.json`` by extension."""
    p = str(path)
    if p.lower().endswith(".json"):
        lp = read_json(p)
        if not isinstance(lp, LinearProgram):
            raise ValueError(f"{p} holds a solution, not a model")
        return lp
    return read_mps(p)
