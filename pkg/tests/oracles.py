"""Independent reference implementations shared by the unit and acceptance tests."""

import itertools
import math

import numpy as np

from excitable.synapse import apply_impulse, decay


def closed_form_s(s0, impulses, alpha, tau, grid, eps=1e-11):
    """Right-continuous flow-and-jump solution evaluated on ``grid``, plus left limits at impulses.

    An impulse within ``eps`` after a grid point counts as coinciding with it.
    """
    out, lefts = np.empty(grid.size), []
    s, t_last, k = s0, 0.0, 0
    imp = list(impulses)
    for i, t in enumerate(grid):
        while k < len(imp) and imp[k] <= t + eps:
            left = decay(s, imp[k] - t_last, tau)
            lefts.append(left)
            s, t_last, k = apply_impulse(left, alpha), imp[k], k + 1
        out[i] = decay(s, t - t_last, tau)
    while k < len(imp):
        left = decay(s, imp[k] - t_last, tau)
        lefts.append(left)
        s, t_last, k = apply_impulse(left, alpha), imp[k], k + 1
    return out, np.array(lefts)


def brute_force_dwell(times, n0, tau_a, margin):
    """Direct scan of half-open windows (a, b] with a just below or at an impulse and b at an impulse.

    Returns None when the verdict sits within ``margin`` of the boundary.
    """
    times = np.asarray(times)
    eps = 1e-12
    starts = np.concatenate([times - eps, times])
    worst = -math.inf
    for a, b in itertools.product(starts, times):
        if b <= a:
            continue
        n = np.count_nonzero((times > a) & (times <= b))
        worst = max(worst, n - n0 - (b - a) / tau_a)
    if abs(worst) < margin:
        return None
    return worst <= 0


def brute_force_min_tau_a(times, n0):
    best = math.inf
    for i, j in itertools.combinations_with_replacement(range(len(times)), 2):
        n = j - i + 1
        if n > n0:
            best = min(best, (times[j] - times[i]) / (n - n0))
    return best


def scan_oracle(t, v, v_low, v_high, tau_e):
    """Exhaustive interval scan.

    Every maximal run of samples strictly above ``v_high`` that is closed by a
    later sample is a candidate. A candidate counts only if it is the first or
    some sample at or below ``v_low`` lies between it and the previous
    candidate that counted; then it yields an event if it lasts ``tau_e``.
    """
    n = len(v)
    runs = []
    for i in range(n):
        for j in range(i, n - 1):
            inside = all(v[k] > v_high for k in range(i, j + 1))
            if not inside:
                break
            if (i == 0 or v[i - 1] <= v_high) and v[j + 1] <= v_high:
                runs.append((i, j))
    events, last_end = [], None
    for i, j in runs:
        if last_end is not None and not any(v[k] <= v_low for k in range(last_end + 1, i)):
            continue
        last_end = j
        if t[j] - t[i] >= tau_e:
            seg = list(v[i:j + 1])
            events.append(t[i + seg.index(max(seg))])
    return events
