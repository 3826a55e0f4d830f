"""Simple and general least-squares regression with model linearization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .adjust import DesignSystem, solve_normal, weights_from_sigmas
from .errors import DegenerateInput, DomainError, RankDeficient, SingularNormalMatrix


@dataclass(frozen=True)
class PointSample:
    x: float
    y: float


@dataclass(frozen=True)
class LineFit:
    """Straight-line fit y = a + b*x with its standard error of estimate."""

    intercept_a: float
    gradient_b: float
    std_error_estimate: float
    n: int


@dataclass
class BasisFit:
    """General linear fit over basis columns; residual sum is weighted (v'Wv)."""

    coefficients: np.ndarray
    residual_sum_squares: float


def _as_samples(samples: Iterable) -> list[PointSample]:
    out = []
    for s in samples:
        if isinstance(s, PointSample):
            out.append(s)
        else:
            x, y = s
            out.append(PointSample(float(x), float(y)))
    for s in out:
        if not (math.isfinite(s.x) and math.isfinite(s.y)):
            raise DegenerateInput(f"non-finite sample ({s.x}, {s.y})")
    return out


def fit_simple_line(samples: Iterable) -> LineFit:
    """Closed-form least-squares line through (x, y) samples.

    gradient b = sum((y - My)(x - Mx)) / sum((x - Mx)^2), intercept
    a = My - b*Mx.  The standard error of estimate is
    sqrt(Sr / (n - 2)) with Sr the residual sum of squares; with exactly
    two samples the line interpolates and the error is reported as 0.
    """
    pts = _as_samples(samples)
    n = len(pts)
    if n < 2:
        raise DegenerateInput(f"need at least 2 samples, got {n}")
    mx = sum(p.x for p in pts) / n
    my = sum(p.y for p in pts) / n
    sxx = sum((p.x - mx) ** 2 for p in pts)
    if sxx == 0.0:
        raise DegenerateInput("all x values equal (vertical line)")
    sxy = sum((p.y - my) * (p.x - mx) for p in pts)
    b = sxy / sxx
    a = my - b * mx
    if n >= 3:
        sr = sum((p.y - (a + b * p.x)) ** 2 for p in pts)
        std_error = math.sqrt(sr / (n - 2))
    else:
        std_error = 0.0
    return LineFit(intercept_a=a, gradient_b=b, std_error_estimate=std_error, n=n)


def linearize_fit(model_kind: str, samples: Iterable) -> tuple[float, float]:
    """Fit an exponential or power model by transforming to a straight line.

    exponential: y = alpha * exp(beta * x), fitted as ln y = ln alpha + beta*x.
    power: y = alpha * x**beta, fitted as log10 y = log10 alpha + beta*log10 x.
    Returns (alpha, beta) re-exponentiated in the matching base.
    """
    pts = _as_samples(samples)
    if model_kind == "exponential":
        for p in pts:
            if p.y <= 0.0:
                raise DomainError(f"exponential model needs y > 0, got y={p.y}")
        line = fit_simple_line([(p.x, math.log(p.y)) for p in pts])
        return math.exp(line.intercept_a), line.gradient_b
    if model_kind == "power":
        for p in pts:
            if p.x <= 0.0 or p.y <= 0.0:
                raise DomainError(
                    f"power model needs x, y > 0, got ({p.x}, {p.y})"
                )
        line = fit_simple_line(
            [(math.log10(p.x), math.log10(p.y)) for p in pts]
        )
        return 10.0**line.intercept_a, line.gradient_b
    raise ValueError(f"model_kind must be 'exponential' or 'power', got {model_kind!r}")


def fit_basis(basis_values, y: Sequence[float],
              weights: Sequence[float] | None = None) -> BasisFit:
    """Weighted least-squares fit of y over precomputed basis columns.

    `basis_values` is an n x (m+1) matrix of basis functions evaluated at
    the sample points.  Minimizes sum w_i * (y_i - sum_j b_j x_ij)^2.
    """
    a = np.asarray(basis_values, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    rhs = np.asarray(y, dtype=float)
    n, m_plus_1 = a.shape
    if rhs.shape != (n,):
        raise DegenerateInput(f"y must have {n} entries, got {rhs.shape}")
    if n < m_plus_1:
        raise DegenerateInput(f"{m_plus_1} coefficients need at least that many observations, got {n}")
    if weights is None:
        w_sigmas = np.ones(n)
    else:
        w_arr = np.asarray(weights, dtype=float)
        if w_arr.shape != (n,):
            raise DegenerateInput(f"weights must have {n} entries")
        if np.any(w_arr <= 0.0):
            raise DegenerateInput("weights must be positive")
        w_sigmas = 1.0 / np.sqrt(w_arr)

    system = DesignSystem(
        a_matrix=a,
        b_vector=rhs,
        w_matrix=weights_from_sigmas(w_sigmas),
        tags=[f"obs{i}" for i in range(n)],
    )
    try:
        coeffs = solve_normal(system)
    except SingularNormalMatrix as exc:
        raise RankDeficient(f"basis matrix is rank deficient: {exc}") from exc
    v = a @ coeffs - rhs
    rss = float(v @ system.w_matrix @ v)
    return BasisFit(coefficients=coeffs, residual_sum_squares=rss)
