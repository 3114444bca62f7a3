#!/usr/bin/env python3
"""Solve an exported LP file with scipy's HiGHS interface.

usage: scipy_milp.py MODEL.lp SOLUTION.txt [TIME_LIMIT_SECONDS]

Reads the subset of CPLEX-LP written by the exporter (Minimize, Subject To,
Bounds, Binaries, End) and writes `status`, `objective` and `name value` lines.
"""

import math
import sys

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

SECTIONS = {"minimize", "subject", "bounds", "binaries", "end"}


def number(tok):
    if tok in ("inf", "+inf"):
        return math.inf
    if tok == "-inf":
        return -math.inf
    return float(tok)


def is_number(tok):
    try:
        number(tok)
        return True
    except ValueError:
        return False


def parse_expr(tokens):
    """Linear terms from tokens like `2 x - y + 0.5 z`; returns (terms, constant)."""
    terms = []
    const = 0.0
    sign = 1.0
    coef = None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = -1.0 if tok == "-" else 1.0
            continue
        if is_number(tok):
            if coef is not None:
                const += sign * coef
                sign = 1.0
            coef = number(tok)
            continue
        if tok.startswith("-"):
            sign, tok = -sign, tok[1:]
        terms.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return terms, const


def parse_lp(text):
    section = None
    chunks = {"minimize": [], "subject": [], "bounds": [], "binaries": []}
    for line in text.splitlines():
        head = line.strip().split(" ")[0].lower() if line.strip() else ""
        if not line.startswith(" ") and head in SECTIONS:
            section = head
            continue
        chunks[section].append(line)

    def statements(lines):
        # wrapped lines continue the statement above
        out = []
        for line in lines:
            if line.startswith("  ") and out:
                out[-1] += " " + line.strip()
            else:
                out.append(line.strip())
        return [s for s in out if s]

    obj_tokens = " ".join(chunks["minimize"]).split()
    obj_terms, obj_const = parse_expr(obj_tokens[1:])
    rows = []
    for s in statements(chunks["subject"]):
        name, body = s.split(":", 1)
        toks = body.split()
        op = next(i for i, t in enumerate(toks) if t in ("<=", ">=", "="))
        terms, _ = parse_expr(toks[:op])
        rows.append((name, terms, toks[op], number(toks[op + 1])))
    bounds = {}
    for s in statements(chunks["bounds"]):
        toks = s.split()
        if len(toks) == 5:
            bounds[toks[2]] = (number(toks[0]), number(toks[4]))
        elif toks[1] == "=":
            bounds[toks[0]] = (number(toks[2]),) * 2
        elif toks[1] == "free":
            bounds[toks[0]] = (-math.inf, math.inf)
        else:
            bounds[toks[0]] = (number(toks[2]), math.inf)
    binaries = " ".join(chunks["binaries"]).split()
    return obj_terms, obj_const, rows, bounds, binaries


def main():
    lp_path, sol_path = sys.argv[1], sys.argv[2]
    limit = float(sys.argv[3]) if len(sys.argv) > 3 else None
    with open(lp_path) as f:
        obj_terms, obj_const, rows, bounds, binaries = parse_lp(f.read())
    names = []
    index = {}
    for n in [t for t, _ in obj_terms] + [t for r in rows for t, _ in r[1]] + list(bounds) + binaries:
        if n not in index:
            index[n] = len(names)
            names.append(n)
    nv = len(names)
    c = np.zeros(nv)
    for n, a in obj_terms:
        c[index[n]] += a
    lo = np.zeros(nv)
    hi = np.full(nv, math.inf)
    integrality = np.zeros(nv)
    for n in binaries:
        hi[index[n]] = 1.0
        integrality[index[n]] = 1
    for n, (l, u) in bounds.items():
        lo[index[n]], hi[index[n]] = l, u
    constraints = []
    if rows:
        a = lil_matrix((len(rows), nv))
        rlo = np.full(len(rows), -math.inf)
        rhi = np.full(len(rows), math.inf)
        for i, (_, terms, op, rhs) in enumerate(rows):
            for n, v in terms:
                a[i, index[n]] += v
            if op in ("<=", "="):
                rhi[i] = rhs
            if op in (">=", "="):
                rlo[i] = rhs
        constraints.append(LinearConstraint(a.tocsr(), rlo, rhi))
    options = {"time_limit": limit} if limit else {}
    res = milp(c, constraints=constraints, integrality=integrality, bounds=Bounds(lo, hi), options=options)
    with open(sol_path, "w") as out:
        if res.status == 0:
            out.write("status optimal\n")
        elif res.status == 2:
            out.write("status infeasible\n")
            return
        elif res.x is not None:
            out.write("status time_limit\n")
        else:
            out.write("status unknown\n")
            return
        out.write(f"objective {float(res.fun) + obj_const!r}\n")
        for n, v in zip(names, res.x):
            out.write(f"{n} {float(v)!r}\n")


if __name__ == "__main__":
    main()
