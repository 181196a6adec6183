"""Independent cold-start LPAC model of the 5-bus fixture solved with HiGHS.

Usage: python3 lpac_case5_oracle.py [path/to/case5.m]
Prints the optimal objective for (cos tangents, circle cuts, cost segments)
settings used by the unit tests.
"""
import math
import re
import sys

import numpy as np
from scipy.optimize import linprog


def matrix(text, name):
    body = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S).group(1)
    rows = []
    for line in body.split(";"):
        line = line.split("%")[0].strip()
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def build(path, n_cos, n_circ, n_seg):
    text = open(path).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.]+)", text).group(1))
    bus = matrix(text, "bus")
    gen = matrix(text, "gen")
    br = matrix(text, "branch")
    cost = matrix(text, "gencost")
    ids = [int(b[0]) for b in bus]
    idx = {i: k for k, i in enumerate(ids)}
    nb, ne, ng = len(bus), len(br), len(gen)
    slack = [k for k, b in enumerate(bus) if int(b[1]) == 3][0]

    names = []
    lo, hi, c = [], [], []

    def var(name, l, u, cc=0.0):
        names.append(name)
        lo.append(l)
        hi.append(u)
        c.append(cc)
        return len(names) - 1

    v = [var("v%d" % i, b[12] - 1, b[11] - 1) for i, b in enumerate(bus)]
    th = [var("t%d" % i, 0 if i == slack else None, 0 if i == slack else None) for i in range(nb)]
    lim = []
    for row in br:
        a = [abs(row[11]), abs(row[12])]
        a = [x for x in a if 0 < x < 360]
        lim.append(min(math.radians(min(a)) if a else math.pi / 3, math.pi / 2))
    phi = [var("phi%d" % e, math.cos(lim[e]), 1.0) for e in range(ne)]
    fl = [[var("f%d_%d" % (e, q), None, None) for q in range(4)] for e in range(ne)]
    pg = [var("pg%d" % g, gen[g][9] / base, gen[g][8] / base) for g in range(ng)]
    qg = [var("qg%d" % g, gen[g][4] / base, gen[g][3] / base) for g in range(ng)]
    tc = [var("c%d" % g, None, None, 1.0) for g in range(ng)]

    A_eq, b_eq, A_ub, b_ub = [], [], [], []

    def row(terms):
        r = np.zeros(len(names))
        for j, a in terms:
            r[j] += a
        return r

    for e, rw in enumerate(br):
        y = 1.0 / complex(rw[2], rw[3])
        g, b = y.real, y.imag
        bc = rw[4] / 2
        j, k = idx[int(rw[0])], idx[int(rw[1])]
        for (p, q, a, o) in ((fl[e][0], fl[e][1], j, k), (fl[e][2], fl[e][3], k, j)):
            # p = g - g*phi - b*(ta - to)
            A_eq.append(row([(p, 1), (phi[e], g), (th[a], b), (th[o], -b)]))
            b_eq.append(g)
            # q = -b(1 + va - vo) - g(ta - to) + b*phi - bc(1 + 2 va)
            A_eq.append(row([(q, 1), (v[a], b + 2 * bc), (v[o], -b), (th[a], g), (th[o], -g),
                             (phi[e], -b)]))
            b_eq.append(-b - bc)
    for i, b in enumerate(bus):
        gs, bs = b[4] / base, b[5] / base
        pt, qt = [], []
        for gi, gr in enumerate(gen):
            if idx[int(gr[0])] == i:
                pt.append((pg[gi], 1))
                qt.append((qg[gi], 1))
        for e, rw in enumerate(br):
            if idx[int(rw[0])] == i:
                pt.append((fl[e][0], -1))
                qt.append((fl[e][1], -1))
            if idx[int(rw[1])] == i:
                pt.append((fl[e][2], -1))
                qt.append((fl[e][3], -1))
        pt.append((v[i], -2 * gs))
        qt.append((v[i], 2 * bs))
        A_eq.append(row(pt))
        b_eq.append(b[2] / base + gs)
        A_eq.append(row(qt))
        b_eq.append(b[3] / base - bs)
    for e, rw in enumerate(br):
        j, k = idx[int(rw[0])], idx[int(rw[1])]
        for t in np.linspace(-lim[e], lim[e], n_cos):
            s = math.sin(t)
            A_ub.append(row([(phi[e], 1), (th[j], s), (th[k], -s)]))
            b_ub.append(math.cos(t) + t * s)
        A_ub.append(row([(th[j], 1), (th[k], -1)]))
        b_ub.append(lim[e])
        A_ub.append(row([(th[j], -1), (th[k], 1)]))
        b_ub.append(lim[e])
        smax = rw[5] / base
        if smax > 0:
            for cidx in range(n_circ):
                a = 2 * math.pi * cidx / n_circ
                for (p, q) in ((fl[e][0], fl[e][1]), (fl[e][2], fl[e][3])):
                    A_ub.append(row([(p, math.cos(a)), (q, math.sin(a))]))
                    b_ub.append(smax * math.cos(math.pi / n_circ))
    for gi, cr in enumerate(cost):
        n = int(cr[3])
        coef = cr[4:4 + n]
        c2, c1, c0 = ([0.0] * (3 - n) + coef)[-3:]
        c2, c1 = c2 * base * base, c1 * base
        f = lambda p: (c2 * p + c1) * p + c0
        pmin, pmax = lo[pg[gi]], hi[pg[gi]]
        pieces = 1 if c2 == 0 or pmin == pmax else n_seg
        w = (pmax - pmin) / pieces
        for s in range(pieces):
            a = pmin + s * w
            slope = c1 + 2 * c2 * a if pieces == 1 else (f(a + w) - f(a)) / w
            # t >= f(a) + slope (p - a)
            A_ub.append(row([(tc[gi], -1), (pg[gi], slope)]))
            b_ub.append(-(f(a) - slope * a))
    res = linprog(c, A_ub=np.array(A_ub), b_ub=b_ub, A_eq=np.array(A_eq), b_eq=b_eq,
                  bounds=list(zip(lo, hi)), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0, res.message
    return res


if __name__ == "__main__":
    path = sys.argv[1] if len(sys.argv) > 1 else "data/case5.m"
    for cfg in ((9, 8, 6), (3, 8, 6), (5, 8, 6), (17, 8, 6), (9, 4, 2)):
        res = build(path, *cfg)
        print(cfg, "%.12f" % res.fun)
