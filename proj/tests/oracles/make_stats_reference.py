#!/usr/bin/env python3
"""Writes stats_reference.json: scipy results on 50 random datasets per test.

Dunn's test is computed directly from the mid-rank definition since scipy
has no implementation.
"""

import json
import sys
from pathlib import Path

import numpy as np
from scipy import stats

COUNT = 50


def groups_for(rng, k_lo=3, k_hi=6, n_lo=4, n_hi=15, ties=False):
    k = int(rng.integers(k_lo, k_hi + 1))
    out = []
    for _ in range(k):
        n = int(rng.integers(n_lo, n_hi + 1))
        v = rng.normal(rng.normal(0.7, 0.05), rng.uniform(0.01, 0.08), n)
        if ties:
            v = np.round(v, 2)
        out.append(v)
    return out


def dunn(groups):
    values = np.concatenate(groups)
    ranks = stats.rankdata(values)
    n_total = len(values)
    _, counts = np.unique(values, return_counts=True)
    tie = np.sum(counts**3 - counts) / (12.0 * (n_total - 1))
    var = n_total * (n_total + 1) / 12.0 - tie
    means, start = [], 0
    for g in groups:
        means.append(ranks[start:start + len(g)].mean())
        start += len(g)
    k = len(groups)
    m = k * (k - 1) / 2
    p = np.ones((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            se = np.sqrt(var * (1.0 / len(groups[i]) + 1.0 / len(groups[j])))
            z = abs(means[i] - means[j]) / se
            p[i, j] = p[j, i] = min(1.0, m * 2.0 * stats.norm.sf(z))
    return p


def main():
    rng = np.random.default_rng(20240607)
    ref = {"shapiro_wilk": [], "mann_whitney_u": [], "anova": [], "kruskal_wallis": [],
           "tukey_hsd": [], "dunn": []}

    for i in range(COUNT):
        n = int(rng.integers(3, 200))
        kind = i % 3
        if kind == 0:
            x = rng.normal(size=n)
        elif kind == 1:
            x = rng.exponential(size=n)
        else:
            x = rng.uniform(size=n)
        r = stats.shapiro(x)
        ref["shapiro_wilk"].append({"x": x.tolist(), "w": float(r.statistic),
                                    "p": float(r.pvalue)})

    for i in range(COUNT):
        if i < COUNT // 2:
            a = rng.normal(size=int(rng.integers(2, 8)))
            b = rng.normal(0.5, 1.0, size=int(rng.integers(2, 12)))
            r = stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
        else:
            a = np.round(rng.normal(size=int(rng.integers(8, 40))), 1)
            b = np.round(rng.normal(0.3, 1.0, size=int(rng.integers(8, 40))), 1)
            r = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                                   use_continuity=True)
        ref["mann_whitney_u"].append({"a": a.tolist(), "b": b.tolist(), "u": float(r.statistic),
                                      "p": float(r.pvalue)})

    for i in range(COUNT):
        g = groups_for(rng)
        r = stats.f_oneway(*g)
        ref["anova"].append({"groups": [x.tolist() for x in g], "f": float(r.statistic),
                             "p": float(r.pvalue)})

    for i in range(COUNT):
        g = groups_for(rng, ties=i % 2 == 0)
        r = stats.kruskal(*g)
        ref["kruskal_wallis"].append({"groups": [x.tolist() for x in g], "h": float(r.statistic),
                                      "p": float(r.pvalue)})

    for i in range(COUNT):
        g = groups_for(rng, k_hi=7)
        r = stats.tukey_hsd(*g)
        ref["tukey_hsd"].append({"groups": [x.tolist() for x in g], "p": r.pvalue.tolist()})

    for i in range(COUNT):
        g = groups_for(rng, k_hi=8, ties=i % 2 == 0)
        ref["dunn"].append({"groups": [x.tolist() for x in g], "p": dunn(g).tolist()})

    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).with_name(
        "stats_reference.json")
    out.write_text(json.dumps(ref, indent=1) + "\n")


if __name__ == "__main__":
    main()
