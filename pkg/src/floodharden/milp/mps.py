"""Fixed-format MPS export and re-import.

Names are cut to the 8 characters fixed format allows; clashes get a numeric
suffix (``abcdefg1``, ``abcdefg2`` ...) in model order, so exports are stable.
Objective constants are written as the negated right-hand side of the
objective row, the convention CPLEX, HiGHS and GLPK share.
"""

from __future__ import annotations

import math
import re
from typing import Iterable

from .model import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, LinExpr, MilpModel

OBJ_ROW = "OBJ"
_ROW_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_REL = {v: k for k, v in _ROW_CODE.items()}


def short_names(names: Iterable[str], reserved: Iterable[str] = ()) -> dict[str, str]:
    """Map each name to a unique whitespace-free name of at most 8 characters."""
    taken = set(reserved)
    out = {}
    for name in names:
        base = re.sub(r"\s", "_", name) or "_"
        cand = base[:8]
        n = 0
        while cand in taken:
            n += 1
            suffix = str(n)
            cand = base[: 8 - len(suffix)] + suffix
        taken.add(cand)
        out[name] = cand
    return out


def _num(v: float) -> str:
    v = float(v)
    if v == 0:
        return "0"
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    text = repr(v)
    if len(text) <= 12:
        return text
    for digits in range(12, 0, -1):
        text = f"{v:.{digits}g}"
        if len(text) <= 12:
            return text
    raise ValueError(f"cannot format {v} in 12 characters")


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    text = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}   {f5:<8}  {f6:>12}"
    return text.rstrip()


def export_mps(model: MilpModel) -> bytes:
    vnames = short_names(model.var_names)
    rnames = short_names([c.name for c in model.constraints], reserved=[OBJ_ROW])
    lines = [f"NAME          {short_names([model.name])[model.name]}", "ROWS", _line("N", OBJ_ROW)]
    for con in model.constraints:
        lines.append(_line(_ROW_CODE[con.relation], rnames[con.name]))

    column_entries: dict[str, list[tuple[str, float]]] = {v.name: [] for v in model.variables}
    for name, coef in model.objective.items():
        column_entries[name].append((OBJ_ROW, coef))
    for con in model.constraints:
        for name, coef in con.coefs.items():
            column_entries[name].append((rnames[con.name], coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for v in model.variables:
        if v.is_integer != in_int:
            tag = "'INTORG'" if v.is_integer else "'INTEND'"
            lines.append(_line("", f"MARKER{marker:02d}"[:8], "'MARKER'", "", tag))
            marker += 1
            in_int = v.is_integer
        entries = column_entries[v.name] or [(OBJ_ROW, 0.0)]
        for row, coef in entries:
            lines.append(_line("", vnames[v.name], row, _num(coef)))
    if in_int:
        lines.append(_line("", f"MARKER{marker:02d}"[:8], "'MARKER'", "", "'INTEND'"))

    lines.append("RHS")
    if model.objective_constant:
        lines.append(_line("", "RHS", OBJ_ROW, _num(-model.objective_constant)))
    for con in model.constraints:
        if con.rhs:
            lines.append(_line("", "RHS", rnames[con.name], _num(con.rhs)))

    lines.append("BOUNDS")
    for v in model.variables:
        name = vnames[v.name]
        lo, hi = v.lb, v.ub
        if v.kind == BINARY and lo == 0 and hi == 1:
            lines.append(_line("BV", "BND", name))
            continue
        if lo == hi:
            lines.append(_line("FX", "BND", name, _num(lo)))
            continue
        if lo == -math.inf and hi == math.inf:
            lines.append(_line("FR", "BND", name))
            continue
        if lo == -math.inf:
            lines.append(_line("MI", "BND", name))
        elif lo != 0 or hi < 0:
            lines.append(_line("LO", "BND", name, _num(lo)))
        if hi != math.inf:
            lines.append(_line("UP", "BND", name, _num(hi)))
        elif v.is_integer:
            lines.append(_line("PL", "BND", name))
    lines.append("ENDATA")
    return ("\n".join(lines) + "\n").encode("ascii")


def read_mps(data: bytes | str) -> MilpModel:
    """Parse MPS written by :func:`export_mps` (or any free/fixed MPS without RANGES)."""
    if isinstance(data, bytes):
        data = data.decode("ascii")
    model = MilpModel()
    section = None
    obj_row = None
    rows: dict[str, str] = {}
    row_order: list[str] = []
    coefs: dict[str, dict[str, float]] = {}
    objective: dict[str, float] = {}
    rhs: dict[str, float] = {}
    columns: dict[str, str] = {}
    col_order: list[str] = []
    bounds: dict[str, list[float]] = {}
    integer = False
    obj_constant = 0.0

    for raw in data.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "NAME":
                model.name = head[1] if len(head) > 1 else "model"
            if section == "ENDATA":
                break
            if section == "RANGES":
                raise ValueError("RANGES section is not supported")
            continue
        tok = raw.split()
        if section == "ROWS":
            code, name = tok
            if code == "N":
                if obj_row is None:
                    obj_row = name
                continue
            rows[name] = _CODE_REL[code]
            row_order.append(name)
            coefs[name] = {}
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                integer = tok[2] == "'INTORG'"
                continue
            col = tok[0]
            if col not in columns:
                columns[col] = INTEGER if integer else CONTINUOUS
                col_order.append(col)
                bounds[col] = [0.0, math.inf]
            for row, val in zip(tok[1::2], tok[2::2]):
                if row == obj_row:
                    objective[col] = objective.get(col, 0.0) + float(val)
                elif row in coefs:
                    coefs[row][col] = coefs[row].get(col, 0.0) + float(val)
        elif section == "RHS":
            pairs = tok[1:] if len(tok) % 2 == 1 else tok
            for row, val in zip(pairs[0::2], pairs[1::2]):
                if row == obj_row:
                    obj_constant = -float(val)
                else:
                    rhs[row] = float(val)
        elif section == "BOUNDS":
            kind, name = tok[0], tok[2]
            val = float(tok[3]) if len(tok) > 3 else None
            b = bounds[name]
            if kind == "UP":
                b[1] = val
            elif kind in ("LO", "LI"):
                b[0] = val
            elif kind == "UI":
                b[1] = val
                columns[name] = INTEGER
            elif kind == "FX":
                b[0] = b[1] = val
            elif kind == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif kind == "MI":
                b[0] = -math.inf
            elif kind == "PL":
                b[1] = math.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                columns[name] = BINARY
            else:
                raise ValueError(f"unsupported bound type {kind}")

    for col in col_order:
        kind = columns[col]
        lo, hi = bounds[col]
        if kind == INTEGER and lo == 0 and hi == 1:
            kind = BINARY
        model.add_var(col, lo, hi, kind)
    for row in row_order:
        model.add_constraint(row, LinExpr(coefs[row]), rows[row], rhs.get(row, 0.0))
    model.set_objective(LinExpr(objective) + obj_constant)
    return model

