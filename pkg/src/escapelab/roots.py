"""Root finding for decreasing pressure-type functions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class Root:
    value: float
    residual: float
    degenerate: bool = False
    iterations: int = 0

    def __float__(self) -> float:
        return self.value


def decreasing_root(
    f: Callable[[float], float],
    fprime: Callable[[float], float] | None,
    lo: float,
    hi: float,
    tol: float = 1e-13,
    newton_width: float = 0.1,
    max_iter: int = 200,
) -> Root:
    """Root of a strictly decreasing ``f`` on ``[lo, hi]``.

    Bisection until the bracket is narrower than ``newton_width``, then
    Newton steps kept inside the bracket.  Stops when ``|f| <= tol``.
    """
    flo, fhi = f(lo), f(hi)
    if flo < 0 or fhi > 0:
        raise BracketError(f"no sign change on [{lo}, {hi}]: f = {flo:.3e}, {fhi:.3e}")
    if flo == 0:
        return Root(lo, 0.0)
    if fhi == 0:
        return Root(hi, 0.0)
    it = 0
    while hi - lo > newton_width and it < max_iter:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        it += 1
        if abs(fm) <= tol:
            return Root(mid, abs(fm), iterations=it)
        lo, hi = (mid, hi) if fm > 0 else (lo, mid)
    x = 0.5 * (lo + hi)
    fx = f(x)
    while it < max_iter:
        it += 1
        if abs(fx) <= tol:
            return Root(x, abs(fx), iterations=it)
        if fx > 0:
            lo = x
        else:
            hi = x
        step = None
        if fprime is not None:
            d = fprime(x)
            if d < 0:
                step = x - fx / d
        if step is None or not lo < step < hi:
            step = 0.5 * (lo + hi)
        if hi - lo < 1e-16 * max(1.0, abs(x)):
            return Root(x, abs(fx), iterations=it)
        x = step
        fx = f(x)
    return Root(x, abs(fx), iterations=it)
