"""Golden-section maximisation used as the numeric check on closed forms."""
import math

from .errors import InvalidInputError

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI2 = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def golden_section_max(f, a, b, rtol=1e-10):
    """Locate the maximum of a unimodal ``f`` on ``[a, b]``.

    The interval is shrunk until its width is at most ``rtol`` times the
    initial width. Returns ``(x, f(x))`` at the midpoint of the final
    interval.
    """
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidInputError("bracket endpoints must be finite")
    a, b = min(a, b), max(a, b)
    h = b - a
    if h == 0:
        return a, f(a)
    tol = rtol * h
    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(n):
        if yc > yd:
            b, d, yd = d, c, yc
            h *= INV_PHI
            c = a + INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= INV_PHI
            d = a + INV_PHI * h
            yd = f(d)
    x = c if yc > yd else d
    fx = yc if yc > yd else yd
    return x, fx


def numeric_mav(profit_fn, bracket, rtol=1e-10):
    """Maximise a trade-size -> profit function over ``bracket``.

    Returns ``(dx_max, mav)``. When the lower end of the bracket does at
    least as well as the interior optimum (flat or decreasing profit), the
    lower end is returned, so a constant-zero profit gives ``(lo, 0)``.
    """
    lo, hi = bracket
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise InvalidInputError("bracket endpoints must be finite")
    x, fx = golden_section_max(profit_fn, lo, hi, rtol)
    f_lo = profit_fn(lo)
    if f_lo >= fx:
        return lo, f_lo
    return x, fx


def expand_bracket(profit_fn, start, lo=0.0, limit=None, max_doublings=200):
    """Double ``start`` until profit turns negative or ``limit`` is reached.

    Gives an upper bracket end for profit functions that are positive near
    zero and eventually decrease without bound.
    """
    hi = start
    for _ in range(max_doublings):
        if limit is not None and hi >= limit:
            return limit
        if profit_fn(hi) < profit_fn(lo):
            return hi
        hi *= 2.0
    raise InvalidInputError("could not bracket the maximum")
