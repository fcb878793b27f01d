"""Straight-loop reference implementations used by the tests.

Everything here is plain Python over lists so it shares no code with the
vectorized kernels it checks.
"""
import math


def rows(G):
    return [[float(x) for x in row] for row in G]


def prefix_sq_norms(G):
    G = rows(G)
    d = len(G[0]) if G else 0
    acc = [0.0] * d
    out = []
    for row in G:
        acc = [a + g * g for a, g in zip(acc, row)]
        out.append([math.sqrt(a) for a in acc])
    return out


def lemma4_terms(G):
    G = rows(G)
    d = len(G[0])
    acc = [0.0] * d
    tot = [0.0] * d
    for row in G:
        for i, g in enumerate(row):
            acc[i] += g * g
            s = math.sqrt(acc[i])
            if s > 0:
                tot[i] += g * g / s
    return tot


def lemma103_terms(G):
    G = rows(G)
    tot = [0.0] * len(G[0])
    for t, row in enumerate(G, start=1):
        for i, g in enumerate(row):
            tot[i] += math.sqrt(g * g / t)
    return tot


def adam_moments(G, beta1, beta2, lam=1.0):
    G = rows(G)
    d = len(G[0])
    m = [0.0] * d
    v = [0.0] * d
    mh, vh = [], []
    for t, row in enumerate(G, start=1):
        b1t = beta1 * lam ** (t - 1)
        m = [b1t * a + (1 - b1t) * g for a, g in zip(m, row)]
        v = [beta2 * a + (1 - beta2) * g * g for a, g in zip(v, row)]
        c1 = 1 - beta1 ** t
        c2 = 1 - beta2 ** t
        mh.append([a / c1 if c1 else 0.0 for a in m])
        vh.append([a / c2 if c2 else 0.0 for a in v])
    return mh, vh


def lemma104_terms(G, beta1, beta2):
    mh, vh = adam_moments(G, beta1, beta2)
    tot = [0.0] * len(mh[0])
    for t, (mrow, vrow) in enumerate(zip(mh, vh), start=1):
        for i, (a, b) in enumerate(zip(mrow, vrow)):
            if b > 0:
                tot[i] += a * a / math.sqrt(t * b)
    return tot


def column_norms(G):
    G = rows(G)
    return [math.sqrt(sum(row[i] ** 2 for row in G)) for i in range(len(G[0]))]


def regret(losses, jstar):
    out, acc = [], 0.0
    for j in losses:
        acc += j - jstar
        out.append(acc)
    return out


def jacobi_eigenvalues(A, sweeps=100):
    """Cyclic Jacobi rotations on a small symmetric matrix."""
    n = len(A)
    a = [list(map(float, r)) for r in A]
    for _ in range(sweeps):
        off = sum(a[i][j] ** 2 for i in range(n) for j in range(n) if i != j)
        if off < 1e-30:
            break
        for p in range(n):
            for q in range(p + 1, n):
                if abs(a[p][q]) < 1e-300:
                    continue
                theta = (a[q][q] - a[p][p]) / (2 * a[p][q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1))
                c = 1 / math.sqrt(t * t + 1)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
    return sorted(a[i][i] for i in range(n))
