"""Reference implementations written from the formulas, independent of the package code.

They trade speed for obviousness: plain loops, math.fsum, no shared helpers.
"""
import math


def percept_activation(salience, cc):
    if cc <= 2:
        return float(salience)
    return salience * math.log(2) / math.log(cc)


def base_level(initial, decay, presentations, now):
    terms = []
    for t in presentations:
        age = now - t
        if age < 1:
            age = 1
        terms.append(math.exp(-decay * math.log(age)))
    return initial + math.fsum(terms)


def slipnet_step(nodes, links, k, threshold, ceiling, clamped=()):
    """One spread: every node gains (k - L) per link to a node that was active beforehand."""
    active = [n for n in nodes if nodes[n] > threshold]
    out = {}
    for n in nodes:
        gain = []
        for a, b, length in links:
            if a == n and b in active:
                gain.append(k - length)
            elif b == n and a in active:
                gain.append(k - length)
        v = nodes[n] + math.fsum(gain)
        out[n] = min(ceiling, max(0.0, v))
    for n in clamped:
        out[n] = ceiling
    return out


def utility(prev, reward, n, alpha=0.2, k=0.35):
    return prev + alpha * (reward - prev) + 1.0 / math.exp(n / k)


def activation_terms(services, wm, goals, protected, params, prev, executable):
    """Per-service (AW, AG, TG, BW, FW, total) from the definitions.

    ``services`` is a list of (id, pre, add, delete) with set-valued lists.
    ``params`` is (theta, pi, phi, gamma, delta).
    """
    _, _, phi, gamma, delta = params
    m, x, u = {}, {}, {}
    for _, pre, add, dele in services:
        for j in pre:
            m[j] = m.get(j, 0) + 1
        for j in add:
            x[j] = x.get(j, 0) + 1
        for j in dele:
            u[j] = u.get(j, 0) + 1
    out = {}
    for sid, pre, add, dele in services:
        aw = math.fsum(phi / (m[j] * len(pre)) for j in sorted(pre) if j in wm)
        ag = math.fsum(gamma / (x[j] * len(add)) for j in sorted(add) if j in goals)
        tg = math.fsum(delta / (u[j] * len(dele)) for j in sorted(dele) if j in protected)
        bw_terms, fw_terms = [], []
        for oid, opre, oadd, _ in services:
            a = prev.get(oid, 0.0)
            if oid == sid or a == 0 or not add:
                continue
            if oid in executable:
                # an executable predecessor pushes energy toward services it enables
                for j in sorted(oadd):
                    if j in pre and j not in wm:
                        fw_terms.append(a * (phi / gamma) / (x[j] * len(add)))
            else:
                # a waiting successor pulls energy from services that would enable it
                for j in sorted(add):
                    if j in opre and j not in wm:
                        bw_terms.append(a / (x[j] * len(add)))
        bw, fw = math.fsum(bw_terms), math.fsum(fw_terms)
        total = max(0.0, prev.get(sid, 0.0) + aw + ag - tg + bw + fw)
        out[sid] = (aw, ag, tg, bw, fw, total)
    return out


def rel_close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=tol, abs_tol=tol)
