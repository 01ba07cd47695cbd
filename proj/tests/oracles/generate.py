#!/usr/bin/env python3
"""Builds the test fixtures and freezes reference values computed by brute force.

Everything here is written from the estimator definitions directly: assignments
are enumerated by hand, outcomes realized by hand, estimators evaluated on each
assignment.  Nothing is shared with the C++ library.

    python3 tests/oracles/generate.py          # rewrite tests/fixtures
"""
import itertools
import math
import os
import random

import numpy as np

HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures")


def r6(v):
    return float(f"{v:.6f}")


class Fixture:
    """regions: list of dicts with id, sites [(id, x, y)], people [(id, x, y, y0, covs)]
    tau[(person_id, site_id)] = effect; design dict; rule additive|nearest."""

    def __init__(self, name, design, rule="additive"):
        self.name = name
        self.design = design
        self.rule = rule
        self.regions = []
        self.tau = {}
        self.person_covs = []
        self.site_covs = []

    def add_region(self, rid, sites, people):
        self.regions.append({"id": rid, "sites": sites, "people": people})

    # geometry -----------------------------------------------------------
    @staticmethod
    def dist(a, b):
        return math.hypot(a[1] - b[1], a[2] - b[2])

    # design -------------------------------------------------------------
    def J(self):
        return len(self.regions)

    def region_pi(self, j):
        d = self.design
        if d["across"] == "cr":
            return d["Jt"] / self.J()
        if d["across"] == "bernoulli":
            return d["pi"][j]
        q = 1.0
        for p in d["within"][j][1]:
            q *= 1.0 - p
        return 1.0 - q

    def site_prob(self, j, s):
        law = self.design["within"][j]
        if law[0] == "single":
            return self.region_pi(j) * law[1][s]
        if law[0] == "fixed_k":
            return self.region_pi(j) * law[2] / law[1]
        return law[1][s]

    def region_options(self, j):
        """[(W, xi tuple, prob given treated-or-not choice)] for treated and control."""
        law = self.design["within"][j]
        n = len(self.regions[j]["sites"])
        if law[0] == "single":
            return [(s,) for s in range(n)], [law[1][s] for s in range(n)]
        if law[0] == "fixed_k":
            combos = list(itertools.combinations(range(n), law[2]))
            return combos, [1.0 / len(combos)] * len(combos)
        raise ValueError

    def assignments(self):
        d = self.design
        J = self.J()
        out = []
        if d["across"] == "independent":
            per = []
            for j in range(J):
                pis = d["within"][j][1]
                opts = []
                for bits in itertools.product([0, 1], repeat=len(pis)):
                    p = 1.0
                    for b, q in zip(bits, pis):
                        p *= q if b else 1.0 - q
                    xi = tuple(s for s, b in enumerate(bits) if b)
                    opts.append((xi, p))
                per.append(opts)
            for combo in itertools.product(*per):
                prob = 1.0
                xis = []
                for xi, p in combo:
                    prob *= p
                    xis.append(xi)
                if prob > 0:
                    out.append((tuple(1 if xi else 0 for xi in xis), tuple(xis), prob))
            return out
        if d["across"] == "cr":
            W_list = []
            for treated in itertools.combinations(range(J), d["Jt"]):
                W_list.append((tuple(1 if j in treated else 0 for j in range(J)), 1.0 / math.comb(J, d["Jt"])))
        else:
            W_list = []
            for bits in itertools.product([0, 1], repeat=J):
                p = 1.0
                for j, b in enumerate(bits):
                    p *= d["pi"][j] if b else 1.0 - d["pi"][j]
                if p > 0:
                    W_list.append((bits, p))
        for W, pw in W_list:
            per = []
            for j in range(J):
                if W[j]:
                    xis, ps = self.region_options(j)
                    per.append(list(zip(xis, ps)))
                else:
                    per.append([((), 1.0)])
            for combo in itertools.product(*per):
                prob = pw
                for _, p in combo:
                    prob *= p
                if prob > 0:
                    out.append((W, tuple(x for x, _ in combo), prob))
        return out

    # outcomes -----------------------------------------------------------
    def outcome(self, j, person, xi):
        y = person[3]
        sites = self.regions[j]["sites"]
        if not xi:
            return y
        if self.rule == "additive":
            return y + sum(self.tau.get((person[0], sites[s][0]), 0.0) for s in xi)
        best = min(xi, key=lambda s: (self.dist(sites[s], person), s))
        return y + self.tau.get((person[0], sites[best][0]), 0.0)

    def pairs(self):
        for j, reg in enumerate(self.regions):
            for s, site in enumerate(reg["sites"]):
                for person in reg["people"]:
                    yield j, s, site, person, self.dist(site, person)

    # files --------------------------------------------------------------
    def write(self):
        root = os.path.join(OUT, self.name)
        os.makedirs(root, exist_ok=True)
        d = self.design
        chosen = getattr(self, "chosen", None)
        for a in ([] if chosen else self.assignments()):
            if 0 < sum(1 for xi in a[1] if xi) and (d["across"] == "independent" or 0 in a[0]):
                if d["across"] != "independent" or any(len(xi) < len(r["sites"]) for xi, r in zip(a[1], self.regions)):
                    chosen = a
                    break
        with open(os.path.join(root, "locations.csv"), "w") as f:
            indep = d["across"] == "independent"
            head = "id,region,x,y,treated," + ("pi" if indep else "g")
            if self.site_covs:
                head += "," + ",".join(self.site_covs)
            f.write(head + "\n")
            for j, reg in enumerate(self.regions):
                law = d["within"][j]
                for s, site in enumerate(reg["sites"]):
                    if law[0] == "single":
                        g = law[1][s]
                    elif law[0] == "independent":
                        g = law[1][s]
                    else:
                        g = law[2] / law[1]
                    flag = "1" if s in chosen[1][j] else "0"
                    row = [site[0], reg["id"], repr(site[1]), repr(site[2]), flag, repr(g)]
                    row += [repr(v) for v in (site[3] if len(site) > 3 else [])]
                    f.write(",".join(row) + "\n")
        with open(os.path.join(root, "individuals.csv"), "w") as f:
            head = "id,region,x,y,outcome"
            if self.person_covs:
                head += "," + ",".join(self.person_covs)
            f.write(head + "\n")
            for reg in self.regions:
                for p in reg["people"]:
                    row = [p[0], reg["id"], repr(p[1]), repr(p[2]), repr(p[3])] + [repr(v) for v in p[4]]
                    f.write(",".join(row) + "\n")
        with open(os.path.join(root, "potential.csv"), "w") as f:
            f.write("individual,location,value\n")
            for reg in self.regions:
                for p in reg["people"]:
                    f.write(f"{p[0]},-,{p[3]!r}\n")
                    for site in reg["sites"]:
                        t = self.tau.get((p[0], site[0]), 0.0)
                        if t != 0.0:
                            f.write(f"{p[0]},{site[0]},{t!r}\n")
        with open(os.path.join(root, "design.cfg"), "w") as f:
            if d["across"] == "cr":
                f.write(f"design = completely_randomized\ntreated_regions = {d['Jt']}\n")
            elif d["across"] == "bernoulli":
                f.write("design = bernoulli\n")
                for j, reg in enumerate(self.regions):
                    f.write(f"pi.{reg['id']} = {d['pi'][j]!r}\n")
                f.write(f"pi = {d['pi'][0]!r}\n")
            else:
                f.write("design = independent\n")
            kinds = {law[0] for law in d["within"]}
            if "fixed_k" in kinds:
                f.write(f"within = fixed_k\nk = {d['within'][0][2]}\n")
            f.write(f"combination = {self.rule}\n")


# --------------------------------------------------------------------------
# estimators written from their definitions

def in_closed(d, c, h):
    return c - h <= d <= c + h


def in_half_open(d, lo, hi, first):
    return (lo <= d <= hi) if first else (lo < d <= hi)


def weight_table(fx, c, h, kind):
    w = {}
    counts = {}
    for j, s, site, person, d in fx.pairs():
        if in_closed(d, c, h):
            counts[(j, s)] = counts.get((j, s), 0) + 1
    for j, s, site, person, d in fx.pairs():
        if not in_closed(d, c, h):
            continue
        p = fx.site_prob(j, s)
        w[(j, s, person[0])] = p if kind == "att" else p / counts[(j, s)]
    return w


def people_index(fx):
    return {(j, p[0]): p for j, reg in enumerate(fx.regions) for p in reg["people"]}


def estimand(fx, w):
    idx = people_index(fx)
    num = den = 0.0
    for (j, s, pid), wt in w.items():
        num += wt * fx.tau.get((pid, fx.regions[j]["sites"][s][0]), 0.0)
        den += wt
    return num / den


def observed(fx, a):
    W, xis, _ = a
    y = {}
    for j, reg in enumerate(fx.regions):
        for p in reg["people"]:
            y[(j, p[0])] = fx.outcome(j, p, xis[j])
    return y


def feasible(fx, w, a):
    W, xis, _ = a
    y = observed(fx, a)
    tn = td = cn = cd = 0.0
    for (j, s, pid), wt in w.items():
        yi = y[(j, pid)]
        if s in xis[j]:
            it = 1.0 / fx.site_prob(j, s)
            tn += it * wt * yi
            td += it * wt
        if not W[j]:
            ic = 1.0 / (1.0 - fx.region_pi(j))
            cn += ic * wt * yi
            cd += ic * wt
    if td == 0 or cd == 0:
        return None
    return tn / td - cn / cd


def demeaned(fx, w, a):
    W, xis, _ = a
    y = observed(fx, a)
    N = sum(w.values())
    mt = sum(wt * (fx.outcome(j, people_index(fx)[(j, pid)], (s,))) for (j, s, pid), wt in w.items()) / N
    mc = sum(wt * people_index(fx)[(j, pid)][3] for (j, s, pid), wt in w.items()) / N
    acc = 0.0
    for (j, s, pid), wt in w.items():
        yi = y[(j, pid)]
        if s in xis[j]:
            acc += wt * (yi - mt) / fx.site_prob(j, s)
        if not W[j]:
            acc -= wt * (yi - mc) / (1.0 - fx.region_pi(j))
    return (mt - mc) + acc / N


def moments(fx, est):
    m0 = m1 = m2 = 0.0
    excl = 0.0
    for a in fx.assignments():
        v = est(a)
        if v is None:
            excl += a[2]
            continue
        m0 += a[2]
        m1 += a[2] * v
        m2 += a[2] * v * v
    mean = m1 / m0
    return mean, m2 / m0 - mean * mean, excl


def moments_two_pass(fx, est):
    vals = []
    for a in fx.assignments():
        v = est(a)
        if v is not None:
            vals.append((a[2], v))
    mass = sum(p for p, _ in vals)
    if mass == 0:
        return float("nan"), float("nan"), 1.0
    mean = sum(p * v for p, v in vals) / mass
    var = sum(p * (v - mean) ** 2 for p, v in vals) / mass
    return mean, var, 1.0 - mass


# --------------------------------------------------------------------------
# fixtures

def family_fixture(name, J, m, across, seed, Jt=None, pis=None, anchored=False):
    rng = random.Random(seed)
    gsets = {1: [1.0], 2: [0.4, 0.6], 3: [0.2, 0.3, 0.5]}
    within = [("single", gsets[m][:]) for _ in range(J)]
    design = {"across": across, "within": within}
    if across == "cr":
        design["Jt"] = Jt
    else:
        design["pi"] = pis
    fx = Fixture(name, design)
    for j in range(J):
        rid = f"R{j + 1}"
        sites = [(f"{rid}_L{s + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2))) for s in range(m)]
        people = []
        for i in range(rng.randint(4, 6)):
            people.append((f"{rid}_I{i + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2)), r6(rng.gauss(1.0, 1.0)), []))
        if anchored:
            # one individual at each distance band of every location
            for site in sites:
                for d in (0.4, 1.4):
                    ang = rng.uniform(0, 2 * math.pi)
                    people.append((f"{rid}_I{len(people) + 1}", r6(site[1] + d * math.cos(ang)),
                                   r6(site[2] + d * math.sin(ang)), r6(rng.gauss(1.0, 1.0)), []))
        fx.add_region(rid, sites, people)
        for site in sites:
            for p in people:
                d = Fixture.dist(site, p)
                if d <= 2.5:
                    fx.tau[(p[0], site[0])] = r6((2.5 - d) * (0.5 + rng.random()))
    return fx


FAMILY_BINS = [(0.5, 0.5), (1.5, 0.5)]


def family():
    specs = [
        ("fam_j2_m1_cr", 2, 1, "cr", 11, 1, None),
        ("fam_j2_m2_cr", 2, 2, "cr", 12, 1, None),
        ("fam_j3_m3_cr", 3, 3, "cr", 13, 1, None),
        ("fam_j3_m2_cr", 3, 2, "cr", 14, 2, None),
        ("fam_j4_m2_cr", 4, 2, "cr", 15, 2, None),
        ("fam_j4_m3_cr", 4, 3, "cr", 16, 2, None),
        ("fam_j2_m2_bern", 2, 2, "bernoulli", 21, None, [0.3, 0.6]),
        ("fam_j3_m1_bern", 3, 1, "bernoulli", 22, None, [0.5, 0.4, 0.7]),
        ("fam_j3_m3_bern", 3, 3, "bernoulli", 23, None, [0.5, 0.5, 0.5]),
        ("fam_j4_m2_bern", 4, 2, "bernoulli", 24, None, [0.25, 0.5, 0.6, 0.4]),
    ]
    return [family_fixture(*s) for s in specs]


def conservative_fixtures():
    out = []
    for name, J, m, Jt, seed in [("cons_j4_m1", 4, 1, 2, 31), ("cons_j4_m2", 4, 2, 2, 32), ("cons_j4_m3", 4, 3, 2, 33),
                                  ("cons_j5_m2", 5, 2, 2, 34), ("cons_j6_m1", 6, 1, 3, 35)]:
        out.append(family_fixture(name, J, m, "cr", seed, Jt=Jt, anchored=True))
    # heterogeneous effects: strong region-to-region differences
    fx = family_fixture("cons_het", 4, 2, "cr", 36, Jt=2, anchored=True)
    scale = {"R1": 0.2, "R2": 3.0, "R3": 1.0, "R4": 5.0}
    for key in list(fx.tau):
        fx.tau[key] = r6(fx.tau[key] * scale[key[1].split("_")[0]])
    out.append(fx)
    return out


def equal_count_fixture():
    rng = random.Random(41)
    design = {"across": "cr", "Jt": 2, "within": [("single", [0.3, 0.7]) for _ in range(4)]}
    fx = Fixture("equal_counts", design)
    for j in range(4):
        rid = f"R{j + 1}"
        sites = [(f"{rid}_L1", 0.0, 0.0), (f"{rid}_L2", 6.0, 0.0)]
        people = []
        k = 0
        for sx in (0.0, 6.0):
            for d in (0.2, 0.5, 0.9):
                ang = rng.uniform(0, 2 * math.pi)
                k += 1
                people.append((f"{rid}_I{k}", r6(sx + d * math.cos(ang)), r6(d * math.sin(ang)), r6(rng.gauss(2, 1)), []))
            for d in (1.3, 1.7):
                ang = rng.uniform(-0.5, 0.5) + (math.pi if sx == 0.0 else 0.0)
                k += 1
                people.append((f"{rid}_I{k}", r6(sx + d * math.cos(ang)), r6(d * math.sin(ang)), r6(rng.gauss(2, 1)), []))
        for _ in range(2):
            k += 1
            people.append((f"{rid}_I{k}", r6(3.0 + rng.uniform(-0.3, 0.3)), r6(3.0 + rng.uniform(0, 1)), r6(rng.gauss(2, 1)), []))
        fx.add_region(rid, sites, people)
        for site in sites:
            for p in people:
                d = Fixture.dist(site, p)
                if d <= 2.0:
                    fx.tau[(p[0], site[0])] = r6((2.0 - d) * (1 + j) * (0.5 + rng.random()))
    return fx


def figure3_fixture():
    design = {"across": "cr", "Jt": 2, "within": [("single", [1.0]) for _ in range(4)]}
    fx = Fixture("figure3", design)
    spec = [("A1", 1, 10, 10.0, 8.0), ("A2", 1, 10, 10.0, 8.0), ("B1", 10, 1, 2.0, 1.0), ("B2", 10, 1, 2.0, 1.0)]
    for rid, ns, nl, ts, tl in spec:
        site = (f"{rid}_L1", 0.0, 0.0)
        people = []
        for i in range(ns + nl):
            d = 0.5 if i < ns else 1.5
            ang = 2 * math.pi * i / (ns + nl)
            people.append((f"{rid}_I{i + 1}", d * math.cos(ang), d * math.sin(ang), 0.0, []))
        fx.add_region(rid, [site], people)
        for i, p in enumerate(people):
            fx.tau[(p[0], site[0])] = ts if i < ns else tl
    return fx


def choose2_fixture(rule):
    rng = random.Random(51)
    design = {"across": "cr", "Jt": 1, "within": [("fixed_k", 3, 2) for _ in range(2)]}
    fx = Fixture(f"choose2_{rule}", design, rule)
    for j in range(2):
        rid = f"R{j + 1}"
        sites = [(f"{rid}_L{s + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2))) for s in range(3)]
        people = [(f"{rid}_I{i + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2)), r6(rng.gauss(1, 1)), []) for i in range(6)]
        fx.add_region(rid, sites, people)
        for site in sites:
            for p in people:
                d = Fixture.dist(site, p)
                if d <= 1.5:
                    fx.tau[(p[0], site[0])] = r6((1.5 - d) * (0.7 + 0.6 * rng.random()))
    return fx


def bernoulli3_fixture(rule):
    rng = random.Random(61)
    pi = 0.4
    design = {"across": "independent", "within": [("independent", [pi, pi, pi])]}
    fx = Fixture(f"bern3_{rule}", design, rule)
    fx.person_covs = ["x1"]
    fx.site_covs = ["z1"]
    centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    sites = [(f"R1_L{s + 1}", c[0], c[1], [r6(rng.gauss(0, 1))]) for s, c in enumerate(centers)]
    people = []
    k = 0
    for c in centers:
        for d in (0.2, 0.5, 0.8, 1.3, 1.7):
            ang = rng.uniform(0, 2 * math.pi)
            k += 1
            people.append((f"R1_I{k}", r6(c[0] + d * math.cos(ang)), r6(c[1] + d * math.sin(ang)), r6(rng.gauss(1, 1)),
                           [r6(rng.gauss(0, 1))]))
    fx.add_region("R1", sites, people)
    for site in sites:
        for p in people:
            d = Fixture.dist(site, p)
            if d <= 2.5:
                fx.tau[(p[0], site[0])] = r6((3.0 - d) * (0.5 + rng.random()))
    return fx


def observational_fixture():
    """Two regions, eight locations each; realization follows a logistic model in z1."""
    rng = random.Random(111)
    regions = []
    pis = []
    xis = []
    for j in range(2):
        rid = f"R{j + 1}"
        sites, p_j, xi = [], [], []
        for s in range(8):
            z = r6(rng.gauss(0, 1))
            p = r6(1 / (1 + math.exp(-(0.2 + 0.9 * z))))
            sites.append((f"{rid}_L{s + 1}", r6(rng.uniform(0, 4)), r6(rng.uniform(0, 4)), [z]))
            p_j.append(p)
            if rng.random() < p:
                xi.append(s)
        regions.append((rid, sites))
        pis.append(p_j)
        xis.append(tuple(xi))
    fx = Fixture("observational", {"across": "independent", "within": [("independent", p) for p in pis]})
    fx.person_covs = ["x1"]
    fx.site_covs = ["z1"]
    for rid, sites in regions:
        people = [(f"{rid}_I{i + 1}", r6(rng.uniform(0, 4)), r6(rng.uniform(0, 4)), r6(rng.gauss(1, 1)),
                   [r6(rng.gauss(0, 1))]) for i in range(40)]
        fx.add_region(rid, sites, people)
        for site in sites:
            for p in people:
                d = Fixture.dist(site, p)
                if d <= 1.0:
                    fx.tau[(p[0], site[0])] = r6(1.0 - d)
    fx.chosen = (tuple(1 if xi else 0 for xi in xis), tuple(xis), 1.0)
    return fx


def size_het_fixture():
    rng = random.Random(71)
    design = {"across": "cr", "Jt": 2, "within": [("single", [1.0]) for _ in range(4)]}
    fx = Fixture("size_het", design)
    for j, n in enumerate([2, 5, 30, 60]):
        rid = f"R{j + 1}"
        site = (f"{rid}_L1", 0.0, 0.0)
        people = []
        for i in range(n):
            d = rng.uniform(0.05, 3.0)
            ang = rng.uniform(0, 2 * math.pi)
            people.append((f"{rid}_I{i + 1}", r6(d * math.cos(ang)), r6(d * math.sin(ang)), r6(5 + rng.gauss(0, 1)), []))
        fx.add_region(rid, [site], people)
    return fx


def permutation_fixture():
    rng = random.Random(81)
    design = {"across": "cr", "Jt": 2, "within": [("single", [0.5, 0.5]) for _ in range(4)]}
    fx = Fixture("perm_null", design)
    for j in range(4):
        rid = f"R{j + 1}"
        sites = [(f"{rid}_L{s + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2))) for s in range(2)]
        people = [(f"{rid}_I{i + 1}", r6(rng.uniform(0, 2)), r6(rng.uniform(0, 2)), r6(rng.gauss(0, 1)), []) for i in range(8)]
        fx.add_region(rid, sites, people)
    return fx


# --------------------------------------------------------------------------
# interference estimators

def additive_unit(fx, j, s, person, a):
    W, xis, _ = a
    law = fx.design["within"][j]
    y = fx.outcome(j, person, xis[j])
    if law[0] == "independent":
        p = law[1][s]
        return y / p if s in xis[j] else -y / (1 - p)
    n, k = law[1], law[2]
    pi = fx.region_pi(j)
    c = (k - 1) / k
    v = 0.0
    if s in xis[j]:
        v += y / (pi * k / n)
    if W[j] and s not in xis[j]:
        v -= c * y / (pi * (1 - k / n))
    if not W[j]:
        v -= (1 - c) * y / (1 - pi)
    return v


def nearest_prob(fx, j, s, person):
    sites = fx.regions[j]["sites"]
    ds = Fixture.dist(sites[s], person)
    law = fx.design["within"][j]
    # brute force over the region's own law
    total = 0.0
    if law[0] == "fixed_k":
        combos = list(itertools.combinations(range(law[1]), law[2]))
        for xi in combos:
            if s in xi and all(Fixture.dist(sites[o], person) >= ds for o in xi):
                total += fx.region_pi(j) / len(combos)
        return total
    pis = law[1]
    for bits in itertools.product([0, 1], repeat=len(pis)):
        xi = [o for o, b in enumerate(bits) if b]
        if s in xi and all(Fixture.dist(sites[o], person) >= ds for o in xi):
            p = 1.0
            for b, q in zip(bits, pis):
                p *= q if b else 1 - q
            total += p
    return total


def nearest_unit(fx, j, s, person, a, P):
    W, xis, _ = a
    sites = fx.regions[j]["sites"]
    y = fx.outcome(j, person, xis[j])
    ds = Fixture.dist(sites[s], person)
    v = 0.0
    if s in xis[j] and all(Fixture.dist(sites[o], person) >= ds for o in xis[j]):
        v += y / P
    if not W[j]:
        v -= y / (1 - fx.region_pi(j))
    return v


def single_region(fx, c, h, a, probs=None):
    W, xis, _ = a
    tw = ty = cw = cy = 0.0
    for j, s, site, person, d in fx.pairs():
        if not in_closed(d, c, h):
            continue
        y = fx.outcome(j, person, xis[j])
        p = fx.site_prob(j, s) if probs is None else probs[s]
        if s in xis[j]:
            tw += 1
            ty += y
        else:
            r = p / (1 - p)
            cw += r
            cy += r * y
    if tw == 0 or cw == 0:
        return None
    return ty / tw - cy / cw


# --------------------------------------------------------------------------
# aggregate

def aatt1(fx, a):
    W, xis, _ = a
    tw = ty = cw = cy = 0.0
    for j, reg in enumerate(fx.regions):
        tot = sum(fx.outcome(j, p, xis[j]) for p in reg["people"])
        pi = fx.region_pi(j)
        if W[j]:
            tw += 1
            ty += tot
        else:
            v = pi / (1 - pi)
            cw += v
            cy += v * tot
    return ty / tw - cy / cw


def aatt2(fx, edges, a):
    total = 0.0
    W, xis, _ = a
    for k in range(len(edges) - 1):
        lo, hi, first = edges[k], edges[k + 1], k == 0
        num = den = 0.0
        w = {}
        for j, s, site, person, d in fx.pairs():
            p = fx.site_prob(j, s)
            if in_half_open(d, lo, hi, first):
                w[(j, s, person[0])] = p
                num += p
        den = sum(fx.site_prob(j, s) for j, reg in enumerate(fx.regions) for s in range(len(reg["sites"])))
        nbar = num / den
        if nbar == 0:
            continue
        idx = people_index(fx)
        tn = td = cn = cd = 0.0
        for (j, s, pid), wt in w.items():
            y = fx.outcome(j, idx[(j, pid)], xis[j])
            if s in xis[j]:
                tn += wt * y / fx.site_prob(j, s)
                td += wt / fx.site_prob(j, s)
            if not W[j]:
                cn += wt * y / (1 - fx.region_pi(j))
                cd += wt / (1 - fx.region_pi(j))
        if td == 0 or cd == 0:
            return None
        total += nbar * (tn / td - cn / cd)
    return total


def aatt_estimand(fx):
    num = den = 0.0
    for j, reg in enumerate(fx.regions):
        for s, site in enumerate(reg["sites"]):
            p = fx.site_prob(j, s)
            num += p * sum(fx.tau.get((p_[0], site[0]), 0.0) for p_ in reg["people"])
            den += p
    return num / den


# --------------------------------------------------------------------------

def write_rows(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(x if isinstance(x, str) else repr(float(x)) for x in r) + "\n")


def grid_search_logistic(X, y):
    """Multi-resolution exhaustive grid search: 0.1 over [-4, 4]^3, then 0.01 and
    0.001 grids on boxes of half-width 20 steps around the incumbent."""
    A = np.column_stack([np.ones(len(y)), X])

    def loglik(B):
        eta = A @ B.T
        return (y[:, None] * eta - np.logaddexp(0, eta)).sum(axis=0)

    center = np.zeros(3)
    for step, half in [(0.1, 40), (0.01, 20), (0.001, 20)]:
        ticks = np.arange(-half, half + 1) * step
        g = np.stack(np.meshgrid(center[0] + ticks, center[1] + ticks, center[2] + ticks, indexing="ij"), -1).reshape(-1, 3)
        best = None
        for chunk in np.array_split(g, max(1, len(g) // 20000)):
            ll = loglik(chunk)
            i = int(np.argmax(ll))
            if best is None or ll[i] > best[0]:
                best = (ll[i], chunk[i])
        center = best[1]
    return center, best[0]


def main():
    os.makedirs(os.path.join(OUT, "frozen"), exist_ok=True)
    frozen = os.path.join(OUT, "frozen")

    # family and conservative fixtures: estimand, demeaned and feasible moments
    rows = []
    for fx in family() + conservative_fixtures():
        fx.write()
        for c, h in FAMILY_BINS:
            for kind in ("att", "att_eq"):
                w = weight_table(fx, c, h, kind)
                tau = estimand(fx, w)
                dm, dv, _ = moments_two_pass(fx, lambda a: demeaned(fx, w, a))
                fm, fv, fe = moments_two_pass(fx, lambda a: feasible(fx, w, a))
                rows.append([fx.name, repr(c), repr(h), kind, tau, dm, dv, fm, fv, fe])
    write_rows(os.path.join(frozen, "family_moments.csv"),
               ["fixture", "center", "h", "weights", "estimand", "demeaned_mean", "demeaned_variance",
                "feasible_mean", "feasible_variance", "feasible_excluded"], rows)

    # equal counts
    fx = equal_count_fixture()
    fx.write()
    rows = []
    for c, h in [(0.5, 0.5)]:
        w = weight_table(fx, c, h, "att")
        for a in fx.assignments():
            rows.append([fx.name, "|".join(",".join(map(str, x)) for x in a[1]), feasible(fx, w, a), demeaned(fx, w, a)])
    write_rows(os.path.join(frozen, "equal_counts.csv"), ["fixture", "xi", "feasible", "demeaned"], rows)
    edges = [0.0, 1.0, 2.0]
    m, v, e = moments_two_pass(fx, lambda a: aatt2(fx, edges, a))
    aggregate_rows = [[fx.name, aatt_estimand(fx), m, v, e]]

    fx = size_het_fixture()
    fx.write()
    m2, v2, _ = moments_two_pass(fx, lambda a: aatt2(fx, [0.0, 0.5, 1.0], a))
    m1, v1, _ = moments_two_pass(fx, lambda a: aatt1(fx, a))
    aggregate_rows.append([fx.name + "_aatt2", aatt_estimand(fx), m2, v2, 0.0])
    aggregate_rows.append([fx.name + "_aatt1", aatt_estimand(fx), m1, v1, 0.0])
    write_rows(os.path.join(frozen, "aggregate.csv"), ["fixture", "estimand", "mean", "variance", "excluded"],
               aggregate_rows)

    # figure 3: the assignment treating A1 and B1
    fx = figure3_fixture()
    fx.write()
    a = ((1, 0, 1, 0), ((0,), (), (0,), ()), 1.0)
    rows = []
    for c in (0.5, 1.5):
        for kind in ("att", "att_eq"):
            rows.append([repr(c), kind, feasible(fx, weight_table(fx, c, 0.25, kind), a)])
    write_rows(os.path.join(frozen, "figure3.csv"), ["center", "weights", "estimate"], rows)

    # interference
    rows = []
    for fx in (choose2_fixture("additive"), choose2_fixture("nearest"), bernoulli3_fixture("additive"),
               bernoulli3_fixture("nearest")):
        fx.write()
        for c, h in [(0.5, 0.5), (1.5, 0.5)]:
            w = weight_table(fx, c, h, "att")
            if fx.rule == "additive":
                num = den = 0.0
                for (j, s, pid), wt in w.items():
                    num += wt * fx.tau.get((pid, fx.regions[j]["sites"][s][0]), 0.0)
                    den += wt
                idx = people_index(fx)

                def est(a, w=w):
                    return sum(wt * additive_unit(fx, j, s, idx[(j, pid)], a) for (j, s, pid), wt in w.items()) / sum(w.values())

                m, v, e = moments_two_pass(fx, est)
                rows.append([fx.name, "additive", repr(c), repr(h), num / den, m, v, e])
            idx = people_index(fx)
            ident = {}
            for (j, s, pid), wt in w.items():
                P = nearest_prob(fx, j, s, idx[(j, pid)])
                if P > 0:
                    ident[(j, s, pid)] = (wt, P)
            if fx.rule == "nearest":
                num = sum(wt * fx.tau.get((pid, fx.regions[j]["sites"][s][0]), 0.0) for (j, s, pid), (wt, P) in ident.items())
                den = sum(wt for wt, P in ident.values())

                def est(a, ident=ident):
                    return sum(wt * nearest_unit(fx, j, s, idx[(j, pid)], a, P)
                               for (j, s, pid), (wt, P) in ident.items()) / den

                m, v, e = moments_two_pass(fx, est)
                rows.append([fx.name, "nearest", repr(c), repr(h), num / den, m, v, e])
            if fx.design["across"] == "independent" and fx.rule == "additive":
                tau = estimand(fx, w)
                m, v, e = moments_two_pass(fx, lambda a: single_region(fx, c, h, a))
                rows.append([fx.name, "single_region", repr(c), repr(h), tau, m, v, e])
    write_rows(os.path.join(frozen, "interference.csv"),
               ["fixture", "estimator", "center", "h", "estimand", "mean", "variance", "excluded"], rows)

    fx = permutation_fixture()
    fx.write()
    observational_fixture().write()

    # parametric: two regression fixtures written directly
    rng = random.Random(91)
    for name, noise in (("param_noiseless", 0.0), ("param_noisy", 0.3)):
        root = os.path.join(OUT, name)
        os.makedirs(root, exist_ok=True)
        treated = [0, 2, 3]
        with open(os.path.join(root, "locations.csv"), "w") as f:
            f.write("id,region,x,y,treated,g\n")
            for j in range(6):
                f.write(f"R{j + 1}_L1,R{j + 1},0.0,0.0,{1 if j in treated else 0},1.0\n")
        rows_i = []
        X, Y = [], []
        for j in range(6):
            for i in range(30):
                d = r6(rng.uniform(0.0, 3.0))
                tau = (2.0 - d) if d <= 2.0 else 0.0
                base = 3.0 + ((-0.5 + 0.25 * d) if d <= 2.0 else 0.0)
                y = base + (tau if j in treated else 0.0)
                if noise:
                    y = r6(y + noise * rng.gauss(0, 1))
                rows_i.append(f"R{j + 1}_I{i + 1},R{j + 1},{d!r},0.0,{y!r}\n")
                W = 1.0 if j in treated else 0.0
                ind = 1.0 if d <= 2.0 else 0.0
                X.append([1.0, W * (d - 2.0) * ind, W * (d * d - 4.0) * ind, ind, d * ind])
                Y.append(y)
        with open(os.path.join(root, "individuals.csv"), "w") as f:
            f.write("id,region,x,y,outcome\n")
            f.writelines(rows_i)
        with open(os.path.join(root, "design.cfg"), "w") as f:
            f.write("design = completely_randomized\ntreated_regions = 3\n")
        X, Y = np.array(X), np.array(Y)
        beta, *_ = np.linalg.lstsq(X, Y, rcond=None)
        # tau_AATT = (1/J) sum_i sum_k beta_k (lambda_k(d_i) - lambda_k(dmax)) 1{d_i <= dmax} over all regions
        ind = X[:, 3]
        d = X[:, 4]
        m1 = ((d - 2.0) * ind).sum() / 6.0
        m2 = ((d * d - 4.0) * ind).sum() / 6.0
        write_rows(os.path.join(frozen, f"{name}.csv"), ["term", "value"],
                   [["alpha0", beta[0]], ["beta1", beta[1]], ["beta2", beta[2]], ["gamma0", beta[3]],
                    ["gamma1", beta[4]], ["aatt", beta[1] * m1 + beta[2] * m2]])

    # logistic grid-search oracle
    rng = random.Random(101)
    root = os.path.join(OUT, "logistic")
    os.makedirs(root, exist_ok=True)
    Z, y = [], []
    for _ in range(60):
        z1, z2 = r6(rng.gauss(0, 1)), r6(rng.gauss(0, 1))
        p = 1 / (1 + math.exp(-(-0.3 + 0.8 * z1 - 0.5 * z2)))
        Z.append([z1, z2])
        y.append(1 if rng.random() < p else 0)
    with open(os.path.join(root, "logistic.csv"), "w") as f:
        f.write("z1,z2,y\n")
        for (z1, z2), v in zip(Z, y):
            f.write(f"{z1!r},{z2!r},{v}\n")
    coef, ll = grid_search_logistic(np.array(Z), np.array(y, dtype=float))
    write_rows(os.path.join(frozen, "logistic.csv"), ["term", "value"],
               [["intercept", coef[0]], ["z1", coef[1]], ["z2", coef[2]], ["loglik", ll]])

    # numeric anchors
    write_rows(os.path.join(frozen, "anchors.csv"), ["name", "value"], [
        ["asinh_1", math.asinh(1.0)],
        ["sinh_relative", (math.sinh(2.9) - math.sinh(2.4)) / math.sinh(2.4)],
        ["gc_4071", 2 * 3958.8 * math.asin(math.sqrt(math.cos(math.radians(40.71)) ** 2 * math.sin(math.radians(0.005)) ** 2))],
        ["gc_2576", 2 * 3958.8 * math.asin(math.sqrt(math.cos(math.radians(25.76)) ** 2 * math.sin(math.radians(0.005)) ** 2))],
    ])


if __name__ == "__main__":
    main()
