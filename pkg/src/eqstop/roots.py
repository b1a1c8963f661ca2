"""Bracketing + bisection for strictly decreasing scalar equations.

The smooth-pasting equations solved in this package are strictly decreasing
with a positive value near 0 and a negative limit at infinity, so guaranteed
bisection (no derivatives) is the method of choice.  The bracket search
carries diagnostics: when no sign change can be found the caller gets an
error naming the structural assumption that most plausibly failed.
"""

from __future__ import annotations

from typing import Callable

__all__ = ["SolveError", "solve_decreasing"]


class SolveError(RuntimeError):
    """No root could be bracketed; message carries the diagnostic."""


def solve_decreasing(
    q: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    ceiling: float = 1e12,
    floor: float = 1e-300,
    rel_tol: float = 1e-12,
    max_iter: int = 200,
    diagnostic: str = "",
) -> float:
    """Root of a strictly decreasing q with q(lo) > 0 > q(hi).

    The bracket is grown geometrically: hi doubles while q(hi) > 0 (up to
    ceiling), lo shrinks by 10 while q(lo) < 0 (down to floor).  Bisection
    then runs to rel_tol (or max_iter, which at 200 is machine precision).
    """
    if not (0 < lo < hi):
        raise ValueError("need 0 < lo < hi")
    q_lo = q(lo)
    while q_lo < 0.0:
        lo /= 10.0
        if lo < floor:
            raise SolveError(
                "no positive start for the pasting equation (q < 0 down to "
                f"{floor:g}); likely f(0) < rK fails. {diagnostic}".strip()
            )
        q_lo = q(lo)
    q_hi = q(hi)
    while q_hi > 0.0:
        hi *= 2.0
        if hi > ceiling:
            raise SolveError(
                "no sign change of the pasting equation up to the bracket "
                f"ceiling {ceiling:g}; never stopping appears optimal "
                "(x*f_x(x) -> inf likely fails). " + diagnostic
            )
        q_hi = q(hi)
    if q_lo == 0.0:
        return lo
    if q_hi == 0.0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rel_tol * max(abs(mid), 1e-300):
            return mid
        q_mid = q(mid)
        if q_mid > 0.0:
            lo = mid
        elif q_mid < 0.0:
            hi = mid
        else:
            return mid
    return 0.5 * (lo + hi)
