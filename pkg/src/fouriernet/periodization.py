"""Turning a function on [0, 1] into a smoothly periodic one, and measuring it.

The pipeline: a boundary correction g = f + sum_j (f^(j)(1) - f^(j)(0)) q_j
built from two-point Hermite polynomials, then the fold

    f~(x) = g(2x)      for x < 1/2,
    f~(x) = f(2x - 1)   for x >= 1/2,

whose second half reproduces f exactly and whose junctions at 1/2 and across
the wrap match derivatives up to order s-1. Fourier coefficients of the fold
feed the synthesis networks; truncated_series_eval is the scalar ground truth
they are tested against.

The q_j satisfy q_j^(k)(0) = delta_jk and q_j^(k)(1) = -delta_jk. A one-sided
variant (zero conditions at 1) leaves the fold discontinuous at 1/2 whenever
f(0) != f(1); the two-point conditions are the minimal repair that makes both
junctions smooth at once.

All quadrature is composite 8-point Gauss-Legendre on uniform panels with
registered kink abscissae inserted as extra panel edges, and every public
integral is re-done on twice the panels; disagreement beyond tolerance is an
error, not a warning.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, perm

import numpy as np

__all__ = [
    "SobolevSignal",
    "HermiteBasis",
    "FourierCoeffs",
    "hermite_basis",
    "periodize",
    "fold",
    "fourier_coeffs",
    "operator_T",
    "truncated_series_eval",
    "hs_norm",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


class SobolevSignal:
    """A function on [0, 1] with derivative access and known kink locations.

    `derivatives` lists analytic derivative evaluators starting at order 1;
    orders beyond the list fall back to central finite differences of the
    highest analytic one (step 1e-5, stencil shifted inward at the ends).
    `kinks` are abscissae where smoothness degrades; quadrature splits there.
    """

    def __init__(self, f, derivatives=(), smoothness: int = 1, kinks=(),
                 fd_step: float = 1e-5):
        if smoothness < 1:
            raise ValueError("smoothness must be >= 1")
        self._f = f
        self._derivatives = tuple(derivatives)
        self.smoothness = int(smoothness)
        self.kinks = tuple(sorted(float(c) for c in kinks))
        self.fd_step = float(fd_step)

    def __call__(self, x):
        return np.asarray(self._f(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, order: int):
        """Evaluator of the order-th derivative (0 means the function itself)."""
        if order < 0:
            raise ValueError("derivative order must be >= 0")
        if order == 0:
            return self.__call__
        if order <= len(self._derivatives):
            fn = self._derivatives[order - 1]
            return lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float)
        base = self.derivative(len(self._derivatives))
        return _fd_derivative(base, order - len(self._derivatives), self.fd_step)


def _fd_derivative(fn, order: int, step: float):
    coeff = np.array([(-1.0) ** (order - i) * comb(order, i)
                      for i in range(order + 1)])

    def deriv(x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        # center the stencil, sliding it inward where it would leave [0, 1]
        start = np.clip(x - 0.5 * order * step, 0.0, 1.0 - order * step)
        pts = start[:, None] + np.arange(order + 1) * step
        vals = np.asarray(fn(pts.ravel()), dtype=float).reshape(pts.shape)
        out = (vals @ coeff) / step ** order
        return out[0] if scalar else out

    return deriv


@dataclass(frozen=True)
class BernsteinPoly:
    """Polynomial in the Bernstein basis on [0, 1], de Casteljau evaluation.

    The monomial form of the degree-15 two-point Hermite polynomials has
    coefficients past 3e5 and loses eight digits at the endpoints; Bernstein
    coefficients stay order one and evaluation is a chain of convex
    combinations, so endpoint conditions survive at full precision.
    """

    coef: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coef) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        layers = np.broadcast_to(
            self.coef.reshape((-1,) + (1,) * x.ndim),
            self.coef.shape + x.shape).copy()
        for _ in range(self.degree):
            layers = layers[:-1] * (1.0 - x) + layers[1:] * x
        return layers[0]

    def deriv(self, order: int = 1) -> "BernsteinPoly":
        c = self.coef
        for _ in range(order):
            if len(c) == 1:
                c = np.zeros(1)
                break
            c = (len(c) - 1) * np.diff(c)
        return BernsteinPoly(c)


@dataclass(frozen=True)
class HermiteBasis:
    s: int
    polynomials: tuple


def hermite_basis(s: int) -> HermiteBasis:
    """Polynomials q_j, deg <= 2s-1, with q_j^(k)(0)=delta_jk, q_j^(k)(1)=-delta_jk.

    In the Bernstein basis of degree n = 2s-1 the derivative at 0 of order k
    involves coefficients b_0..b_k only (perm(n,k) times the k-th forward
    difference), and at 1 the mirror indices, so the conditions split into
    two triangular solves; no general linear system is needed. The realized
    conditions are still re-checked numerically afterwards.
    """
    if not 1 <= s <= 8:
        raise ValueError("smoothness out of the supported range 1..8")
    n = 2 * s - 1
    polys = []
    for j in range(s):
        # exact rational recursion; only the final coefficients get rounded
        b = [Fraction(0)] * (n + 1)
        for k in range(s):
            target = Fraction(1 if j == k else 0, perm(n, k))
            acc = sum((-1) ** (k - i) * comb(k, i) * b[i] for i in range(k))
            b[k] = target - acc
            target = Fraction(-1 if j == k else 0, perm(n, k))
            acc = sum((-1) ** (k - i) * comb(k, i) * b[n - k + i]
                      for i in range(1, k + 1))
            b[n - k] = (-1) ** k * (target - acc)
        polys.append(BernsteinPoly(np.array([float(v) for v in b])))
    residual = 0.0
    for j, q in enumerate(polys):
        for k in range(s):
            dq = q.deriv(k) if k else q
            want = 1.0 if j == k else 0.0
            residual = max(residual, abs(float(dq(0.0)) - want),
                           abs(float(dq(1.0)) + want))
    if residual > 1e-8:
        raise ArithmeticError(f"Hermite conditions realized to {residual:.2e} "
                              "only; construction is not trustworthy")
    return HermiteBasis(s, tuple(polys))


def periodize(f: SobolevSignal, basis: HermiteBasis | None = None) -> SobolevSignal:
    """g = f + sum_j (f^(j)(1) - f^(j)(0)) q_j, which swaps f's boundary data.

    g^(k)(0) = f^(k)(1) and g^(k)(1) = f^(k)(0) for k < s, so gluing g ahead
    of f (each on half the domain) meets smoothly at both junctions.
    """
    if basis is None:
        basis = hermite_basis(f.smoothness)
    jumps = [float(f.derivative(j)(1.0) - f.derivative(j)(0.0))
             for j in range(basis.s)]

    def correction(d: int):
        polys = [p.deriv(d) if d else p for p in basis.polynomials]

        def term(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for jump, p in zip(jumps, polys):
                out += jump * p(x)
            return out

        return term

    def shifted(d: int):
        fd = f.derivative(d)
        corr = correction(d)
        return lambda x: fd(x) + corr(x)

    return SobolevSignal(shifted(0),
                         [shifted(d) for d in range(1, f.smoothness + 1)],
                         f.smoothness, f.kinks, f.fd_step)


def fold(f: SobolevSignal, basis: HermiteBasis | None = None) -> SobolevSignal:
    """The doubled signal: corrected g squeezed into [0, 1/2), f into [1/2, 1].

    Taking the f branch at x >= 1/2 (closed on the right half) makes
    fold(f)((x+1)/2) reproduce f(x) bit-exactly: for x in [0, 1] both
    (x+1)/2 and 2*((x+1)/2) - 1 = x round to nothing.
    """
    g = periodize(f, basis)

    def branchwise(d: int):
        scale = 2.0 ** d
        left = g.derivative(d)
        right = f.derivative(d)

        def ev(x):
            x = np.asarray(x, dtype=float)
            on_right = x >= 0.5
            lx = np.clip(2.0 * x, 0.0, 1.0)
            rx = np.clip(2.0 * x - 1.0, 0.0, 1.0)
            return scale * np.where(on_right, right(rx), left(lx))

        return ev

    kinks = {0.5}
    kinks.update(c / 2.0 for c in f.kinks)
    kinks.update((c + 1.0) / 2.0 for c in f.kinks)
    return SobolevSignal(branchwise(0),
                         [branchwise(d) for d in range(1, f.smoothness + 1)],
                         f.smoothness, sorted(kinks), f.fd_step)


@dataclass(frozen=True)
class FourierCoeffs:
    """Modes z_{-m}..z_m of a periodic signal, lowest frequency first."""

    m: int
    z: np.ndarray

    def __post_init__(self):
        if len(self.z) != 2 * self.m + 1:
            raise ValueError(f"expected {2 * self.m + 1} modes, got {len(self.z)}")

    def truncated(self, m: int) -> "FourierCoeffs":
        """Drop modes beyond +-m (m <= self.m)."""
        if not 1 <= m <= self.m:
            raise ValueError(f"cannot truncate {self.m} modes to {m}")
        return FourierCoeffs(m, self.z[self.m - m: self.m + m + 1])


def _panel_points(panels: int, kinks) -> tuple:
    edges = np.linspace(0.0, 1.0, panels + 1)
    interior = [c for c in kinks if 0.0 < c < 1.0]
    if interior:
        edges = np.unique(np.concatenate([edges, interior]))
    half = 0.5 * np.diff(edges)
    mid = edges[:-1] + half
    x = mid[:, None] + half[:, None] * _GL_NODES
    w = half[:, None] * _GL_WEIGHTS
    return x.ravel(), w.ravel()


def _coeff_pass(g, m: int, panels: int) -> np.ndarray:
    x, w = _panel_points(panels, getattr(g, "kinks", ()))
    wv = w * g(x)
    out = np.empty(2 * m + 1, dtype=complex)
    modes = np.arange(-m, m + 1)
    for lo in range(0, len(modes), 128):
        band = modes[lo: lo + 128]
        out[lo: lo + 128] = np.exp(-2j * np.pi * np.outer(band, x)) @ wv
    return out


def fourier_coeffs(g, m: int, quad_level: int | None = None,
                   tol: float = 1e-9) -> FourierCoeffs:
    """Modes of g on [0, 1] by panel quadrature, verified by panel doubling.

    quad_level is the uniform panel count before kink edges are added;
    the default 2*max(64, 8m) keeps 16 panels per period of the fastest
    integrand. The coefficients from the doubled pass are returned.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if quad_level is None:
        quad_level = 2 * max(64, 8 * m)
    elif quad_level < max(16, 2 * m):
        raise ValueError(f"quad_level {quad_level} is below the safe floor "
                         f"{max(16, 2 * m)} for m={m}")
    coarse = _coeff_pass(g, m, quad_level)
    fine = _coeff_pass(g, m, 2 * quad_level)
    drift = np.abs(fine - coarse).max()
    if drift > tol:
        raise ArithmeticError(
            f"coefficient quadrature did not settle: doubling {quad_level} "
            f"panels moved a mode by {drift:.3e} (tolerance {tol:.1e})")
    return FourierCoeffs(m, fine)


def operator_T(f: SobolevSignal, m: int, quad_level: int | None = None,
               tol: float = 1e-9) -> FourierCoeffs:
    """Modes of the fold of f; the analysis half of the approximation pipeline."""
    return fourier_coeffs(fold(f), m, quad_level, tol)


def truncated_series_eval(coeffs, x):
    """Direct summation sum_kappa z_kappa e^{2 pi i kappa x}; scalar oracle."""
    if isinstance(coeffs, FourierCoeffs):
        z = coeffs.z
    else:
        z = np.asarray(coeffs, dtype=complex)
        if z.ndim != 1 or len(z) % 2 == 0:
            raise ValueError("expected an odd-length mode vector")
    m = (len(z) - 1) // 2
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    phases = np.exp(2j * np.pi * np.outer(np.atleast_1d(x), np.arange(-m, m + 1)))
    out = phases @ z
    return out[0] if scalar else out


def hs_norm(f: SobolevSignal, s: int, resolution: int = 256,
            tol: float = 1e-6, check: bool = True) -> float:
    """sqrt(sum_{d<=s} integral |f^(d)|^2) by panel quadrature.

    With check=True (the default) the value must survive panel doubling to
    relative tolerance tol, else this raises; signals on the boundary of H^s
    (square-integrability of f^(s) just failing) are caught by that check.
    check=False skips the doubling and returns the fixed-resolution surrogate,
    which is finite for any integrand that stays finite at the panel nodes.
    """
    if s < 0:
        raise ValueError("s must be >= 0")
    derivs = [f.derivative(d) for d in range(s + 1)]

    def one_pass(panels: int) -> float:
        x, w = _panel_points(panels, f.kinks)
        total = 0.0
        for d in derivs:
            total += float(w @ np.square(d(x)))
        return float(np.sqrt(total))

    coarse = one_pass(resolution)
    if not check:
        return coarse
    fine = one_pass(2 * resolution)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise ArithmeticError(
            f"norm quadrature did not settle at resolution {resolution}: "
            f"{coarse:.9e} -> {fine:.9e}; the order-{s} derivative may not "
            "be square-integrable")
    return fine
