"""Adaptive Gauss-Legendre quadrature."""

import math
from typing import Callable, Iterable, List, Tuple

import numpy as np


class ToleranceNotReached(ArithmeticError):
    """Raised when a panel cannot be refined to the requested tolerance."""

    def __init__(self, lo: float, hi: float, achieved: float):
        self.lo = lo
        self.hi = hi
        self.achieved = achieved
        super().__init__(f"panel [{lo!r}, {hi!r}] stuck at error estimate {achieved:.3e}")


class AdaptiveGaussLegendre:
    """Adaptive Gauss-Legendre integration on a finite interval.

    Each panel is integrated once as a whole and once as two halves; the
    difference is the error estimate. Panels whose estimate exceeds
    max(abs_tol, rel_tol * |value|) are bisected.

    Args:
        order: Number of Gauss-Legendre nodes per panel
        abs_tol: Absolute tolerance per panel
        rel_tol: Relative tolerance per panel
        max_depth: Maximum number of bisections of the initial panel
    """

    def __init__(self, order: int = 10, abs_tol: float = 1e-12, rel_tol: float = 1e-13, max_depth: int = 60):
        if order < 2:
            raise ValueError(f"order must be >= 2, got {order}")
        self.order = order
        self.abs_tol = abs_tol
        self.rel_tol = rel_tol
        self.max_depth = max_depth
        self.nodes, self.weights = np.polynomial.legendre.leggauss(order)
        self.evaluations = 0

    def _panel(self, fun: Callable, lo: float, hi: float) -> float:
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        values = np.asarray(fun(mid + half * self.nodes), dtype=float)
        self.evaluations += self.order
        return half * float(np.dot(self.weights, values))

    def _refine(self, fun: Callable, lo: float, hi: float) -> Tuple[float, float]:
        """Integrate one panel; returns (value, error estimate)."""
        accepted: List[float] = []
        worst = 0.0
        stack = [(lo, hi, self._panel(fun, lo, hi), 0)]
        while stack:
            a, b, coarse, depth = stack.pop()
            m = 0.5 * (a + b)
            left = self._panel(fun, a, m)
            right = self._panel(fun, m, b)
            fine = left + right
            error = abs(fine - coarse)
            if error <= max(self.abs_tol, self.rel_tol * abs(fine)):
                accepted.append(fine)
                worst = max(worst, error)
                continue
            if depth >= self.max_depth or m <= a or m >= b:
                raise ToleranceNotReached(a, b, error)
            stack.append((m, b, right, depth + 1))
            stack.append((a, m, left, depth + 1))
        return math.fsum(accepted), worst

    def integrate(self, fun: Callable, lo: float, hi: float, breakpoints: Iterable[float] = ()) -> float:
        """Integrate fun over [lo, hi].

        Args:
            fun: Vectorized integrand taking and returning numpy arrays
            lo: Lower bound
            hi: Upper bound
            breakpoints: Points where fun is not smooth; panels start there

        Returns:
            The integral, negated when hi < lo
        """
        return self.integrate_with_error(fun, lo, hi, breakpoints)[0]

    def integrate_with_error(
        self, fun: Callable, lo: float, hi: float, breakpoints: Iterable[float] = ()
    ) -> Tuple[float, float]:
        if hi == lo:
            return 0.0, 0.0
        sign = 1.0
        if hi < lo:
            lo, hi, sign = hi, lo, -1.0
        cuts = sorted({lo, hi, *(p for p in breakpoints if lo < p < hi)})
        pieces = []
        worst = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            value, error = self._refine(fun, a, b)
            pieces.append(value)
            worst = max(worst, error)
        return sign * math.fsum(pieces), worst
