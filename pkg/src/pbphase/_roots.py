"""Bracketing root finder for monotone functions with possibly open domains."""

import math
import sys

from scipy.optimize import brentq

from .errors import NoSolutionError

_MAX_EXPAND = 400


def _sign(v):
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _default_gap(bound):
    return 1e-13 * (1.0 + abs(bound))


def monotone_root(fn, bracket_hint, tol=1e-14, domain=(-math.inf, math.inf),
                  boundary_gap=None):
    """Root of a strictly monotone ``fn`` on the open interval ``domain``.

    The hint is grown geometrically until it brackets a sign change.  Towards
    an infinite end the width doubles; towards a finite end the distance to
    the end shrinks by a factor of eight, so the end itself is never
    evaluated.  ``fn`` may return +-inf (for example past a divergence);
    only finite values are handed to Brent's method.

    Raises NoSolutionError carrying the edge values when the search reaches
    an end of the domain without a sign change.
    """
    lo_dom, hi_dom = domain
    a, b = sorted(float(v) for v in bracket_hint)
    if boundary_gap is None:
        boundary_gap = _default_gap

    def clip(x):
        if math.isfinite(lo_dom) and x <= lo_dom:
            x = lo_dom + 0.5 * min(1.0, hi_dom - lo_dom)
        if math.isfinite(hi_dom) and x >= hi_dom:
            x = hi_dom - 0.5 * min(1.0, hi_dom - lo_dom)
        return x

    a, b = clip(a), clip(b)
    if a == b:
        b = clip(a + 1.0)
        if a == b:
            a = clip(b - 1.0)
        a, b = sorted((a, b))
    fa, fb = fn(a), fn(b)
    if math.isnan(fa) or math.isnan(fb):
        raise ValueError("fn returned nan inside its domain")

    def step_left(x, width):
        if math.isfinite(lo_dom):
            if x - lo_dom <= boundary_gap(lo_dom):
                return None
            return lo_dom + (x - lo_dom) / 8.0
        return x - width

    def step_right(x, width):
        if math.isfinite(hi_dom):
            if hi_dom - x <= boundary_gap(hi_dom):
                return None
            return hi_dom - (hi_dom - x) / 8.0
        return x + width

    width = max(b - a, 1.0)
    for _ in range(_MAX_EXPAND):
        sa, sb = _sign(fa), _sign(fb)
        if sa == 0:
            return a
        if sb == 0:
            return b
        if sa != sb:
            break
        if fa == fb:
            # direction unknown; widen both ways
            left, right = step_left(a, width), step_right(b, width)
            if left is None and right is None:
                raise NoSolutionError("no sign change inside the domain",
                                      boundary_values=(fa, fb))
            if left is not None:
                a, fa = left, fn(left)
            if right is not None:
                b, fb = right, fn(right)
        else:
            increasing = fb > fa
            go_right = (sa < 0) == increasing
            if go_right:
                nxt = step_right(b, width)
                if nxt is None:
                    raise NoSolutionError("no sign change before the upper end of the domain",
                                          boundary_values=(fa, fb))
                a, fa = b, fb
                b, fb = nxt, fn(nxt)
            else:
                nxt = step_left(a, width)
                if nxt is None:
                    raise NoSolutionError("no sign change before the lower end of the domain",
                                          boundary_values=(fa, fb))
                b, fb = a, fa
                a, fa = nxt, fn(nxt)
        width *= 2.0
    else:
        raise NoSolutionError("bracket expansion budget exhausted", boundary_values=(fa, fb))

    # bisect until both ends are finite so Brent's interpolation is safe
    while not (math.isfinite(fa) and math.isfinite(fb)):
        m = 0.5 * (a + b)
        if m == a or m == b:
            return m
        fm = fn(m)
        if _sign(fm) == 0:
            return m
        if _sign(fm) == _sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm

    return brentq(fn, a, b, xtol=tol, rtol=4 * sys.float_info.epsilon, maxiter=500)
