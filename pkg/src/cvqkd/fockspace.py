"""Occupation-number combinatorics for uniformly mixed multimode states.

A rotationally invariant n-mode state is a mixture of uniform p-photon
states: every way of placing p photons into n modes is equally likely, so
the relevant distributions live on integer compositions. This module
provides exact enumeration and uniform sampling of those compositions, the
closed-form integrals behind the coherent-state threshold operator and
their independent identities, the thermal single-mode projection tail, and
the exact max-occupation probability used to cross-check the union bound
in :mod:`cvqkd.tailbounds`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gammaln

from .specfun import log_reg_upper_gamma_int, log_sum, reg_upper_gamma

__all__ = [
    "ENUMERATION_GUARD",
    "EnumerationSizeError",
    "CompositionKind",
    "CompositionDistribution",
    "FockCoefficients",
    "JFormsReport",
    "OperatorCoefficientReport",
    "composition_count",
    "enumerate_compositions",
    "sample_composition",
    "closed_form_I",
    "closed_form_J",
    "closed_form_J_forms",
    "t_coefficients",
    "verify_operator_inequality",
    "thermal_tail",
    "exact_max_tail",
]

#: Largest number of occupation vectors that exact enumeration will build.
ENUMERATION_GUARD = 10**7


class EnumerationSizeError(ValueError):
    """Raised when an exact enumeration would exceed the desk-scale guard."""


class CompositionKind(str, Enum):
    EXACT_ENUMERATION = "exact_enumeration"
    SAMPLED = "sampled"


def composition_count(n: int, p: int) -> int:
    """Number of ways to place p photons into n modes: C(n+p-1, p)."""
    if n < 1 or p < 0:
        raise ValueError(f"composition_count requires n >= 1 and p >= 0, got ({n}, {p})")
    return math.comb(n + p - 1, p)


@dataclass
class CompositionDistribution:
    """Occupation-number data for the uniform p-photon state on n modes.

    ``data`` holds one occupation vector per row. For exact enumerations the
    rows are all C(n+p-1, p) compositions; for sampled data they are draws
    from the uniform distribution over those compositions.
    """

    modes: int
    photons: int
    kind: CompositionKind
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[1] != self.modes:
            raise ValueError(
                f"occupation data must be (count, {self.modes}), got shape {self.data.shape}"
            )
        if np.any(self.data < 0):
            raise ValueError("occupation numbers must be nonnegative")
        if not np.all(self.data.sum(axis=1) == self.photons):
            raise ValueError(f"every occupation vector must sum to {self.photons}")
        if self.kind is CompositionKind.EXACT_ENUMERATION:
            expected = composition_count(self.modes, self.photons)
            if self.data.shape[0] != expected:
                raise ValueError(
                    f"exact enumeration must hold {expected} vectors, got {self.data.shape[0]}"
                )


def enumerate_compositions(n: int, p: int) -> CompositionDistribution:
    """All occupation vectors of p photons in n modes, first mode largest
    first (descending lexicographic), e.g. (2, 2) -> (2,0), (1,1), (0,2)."""
    total = composition_count(n, p)
    if total > ENUMERATION_GUARD:
        raise EnumerationSizeError(
            f"C({n + p - 1}, {p}) = {total} compositions exceeds the guard of {ENUMERATION_GUARD}"
        )
    out = np.empty((total, n), dtype=np.int64)
    row = 0

    def fill(prefix: list[int], remaining: int, slots: int) -> None:
        nonlocal row
        if slots == 1:
            out[row, : len(prefix)] = prefix
            out[row, len(prefix)] = remaining
            row += 1
            return
        for first in range(remaining, -1, -1):
            fill(prefix + [first], remaining - first, slots - 1)

    fill([], p, n)
    return CompositionDistribution(n, p, CompositionKind.EXACT_ENUMERATION, out)


def sample_composition(n: int, p: int, rng: np.random.Generator, size: int | None = None):
    """Uniform draw(s) from the compositions of p photons into n modes.

    Stars and bars: choose the n-1 bar positions uniformly among the
    n+p-1 slots; the gaps are the occupations. Returns shape (n,) for
    ``size=None`` and (size, n) otherwise.
    """
    if n < 1 or p < 0:
        raise ValueError(f"sample_composition requires n >= 1 and p >= 0, got ({n}, {p})")
    single = size is None
    count = 1 if single else int(size)
    if count < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if n == 1:
        occ = np.full((count, 1), p, dtype=np.int64)
    else:
        slots = n + p - 1
        # Uniform (n-1)-subset of the slots per row.
        keys = rng.random((count, slots))
        bars = np.sort(np.argpartition(keys, n - 2, axis=1)[:, : n - 1], axis=1)
        padded = np.empty((count, n + 1), dtype=np.int64)
        padded[:, 0] = -1
        padded[:, 1:-1] = bars
        padded[:, -1] = slots
        occ = np.diff(padded, axis=1) - 1
    return occ[0] if single else occ


def closed_form_I(n: int, a: float) -> float:
    """Probability that n independent Exp(1) variables sum to at least a:

        I_n(a) = e^{-a} sum_{k=0}^{n-1} a^k / k!  =  Q(n, a)

    evaluated through the log-scale survival sum (independent of the
    continued-fraction route in :func:`cvqkd.specfun.reg_upper_gamma`).
    """
    if n < 1:
        raise ValueError(f"closed_form_I requires n >= 1, got {n}")
    if a < 0:
        raise ValueError(f"closed_form_I requires a >= 0, got {a}")
    return math.exp(log_reg_upper_gamma_int(int(n), float(a)))


def closed_form_J(n: int, k: int, a: float) -> float:
    """Weighted tail integral over the simplex complement:

        J_n(k, a) = int_{y_i >= 0, sum y_i >= a} (y_1^k / k!) e^{-sum y} dy

    The integrand is the joint density of one Gamma(k+1) and n-1 Exp(1)
    variables, so the integral equals the survival function of their sum,
    a Gamma(n+k) variable: J_n(k, a) = Q(n + k, a). This is the
    authoritative value; see :func:`closed_form_J_forms` for the discrepancy
    report against the off-by-one textbook form.
    """
    if n < 1 or k < 0:
        raise ValueError(f"closed_form_J requires n >= 1 and k >= 0, got ({n}, {k})")
    if a < 0:
        raise ValueError(f"closed_form_J requires a >= 0, got {a}")
    return reg_upper_gamma(n + k, a)


@dataclass(frozen=True)
class JFormsReport:
    """Both evaluations of J_n(k, a): the gamma-identity value and the
    printed closed form Q(k+1,a) + e^{-a} sum_{m=k+1}^{k+n} a^m/m!,
    which works out to Q(n+k+1, a) and fails the k=0 consistency check
    J_n(0, a) = I_n(a)."""

    defining_form: float
    printed_form: float

    @property
    def gap(self) -> float:
        return self.printed_form - self.defining_form


def closed_form_J_forms(n: int, k: int, a: float) -> JFormsReport:
    """Evaluate J_n(k, a) both ways and report them side by side."""
    defining = closed_form_J(n, k, a)
    if a == 0.0:
        printed = 1.0
    else:
        m = np.arange(k + 1, k + n + 1, dtype=float)
        series = math.exp(log_sum(m * math.log(a) - gammaln(m + 1.0)) - a)
        printed = reg_upper_gamma(k + 1, a) + series
    return JFormsReport(defining_form=defining, printed_form=printed)


@dataclass
class FockCoefficients:
    """Eigenvalues q_k of the total-energy threshold operator on the
    total-photon-number sectors: q_k = J_n(k, n*d0) = Q(n + k, n*d0)."""

    n: int
    d0: float
    q: np.ndarray

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        if np.any(self.q < 0.0) or np.any(self.q > 1.0):
            raise ValueError("threshold coefficients must lie in [0, 1]")
        if np.any(np.diff(self.q) < -1e-12):
            raise ValueError("threshold coefficients must be nondecreasing in k")


def t_coefficients(n: int, d0: float, k_max: int) -> FockCoefficients:
    """Coefficients q_k for k = 0..k_max of the coherent-state threshold
    operator at total energy n*d0."""
    if n < 1:
        raise ValueError(f"t_coefficients requires n >= 1, got {n}")
    if d0 < 0:
        raise ValueError(f"t_coefficients requires d0 >= 0, got {d0}")
    if k_max < math.ceil(n * d0 - 1e-9) + 1:
        raise ValueError(
            f"k_max={k_max} must reach at least ceil(n*d0)+1 = {math.ceil(n * d0 - 1e-9) + 1}"
        )
    ks = np.arange(k_max + 1, dtype=float)
    q = reg_upper_gamma(n + ks, float(n * d0))
    return FockCoefficients(n=n, d0=d0, q=np.clip(q, 0.0, 1.0))


@dataclass(frozen=True)
class OperatorCoefficientReport:
    """Outcome of the coefficient-level check that the photon-number
    threshold projector is dominated by twice the energy threshold
    operator: q_k >= 1/2 for every sector k above n*d0."""

    passed: bool
    min_margin: float
    k_start: int
    k_max: int
    monotone: bool
    violations: tuple[int, ...]


def verify_operator_inequality(n: int, d0: float, k_max: int) -> OperatorCoefficientReport:
    """Check q_k >= 1/2 on every integer sector k in [n*d0 + 1, k_max] and
    that the q_k are nondecreasing.

    Both operators are diagonal in the total-photon-number decomposition,
    so this scalar sweep is equivalent to the operator statement. Returns
    the minimum margin 2 q_k - 1 over the swept range.
    """
    coeffs = t_coefficients(n, d0, k_max)
    k_start = math.ceil(n * d0 - 1e-9) + 1
    swept = coeffs.q[k_start:]
    margins = 2.0 * swept - 1.0
    violations = tuple(int(k_start + i) for i in np.nonzero(margins <= 0.0)[0])
    monotone = bool(np.all(np.diff(coeffs.q) >= -1e-12))
    return OperatorCoefficientReport(
        passed=(not violations) and monotone,
        min_margin=float(margins.min()),
        k_start=k_start,
        k_max=k_max,
        monotone=monotone,
        violations=violations,
    )


def thermal_tail(lam: float, d: float) -> float:
    """Probability that a thermal mode with mean photon number lam holds at
    least d photons: (lam / (1 + lam))^d."""
    if lam <= 0:
        raise ValueError(f"thermal_tail requires lam > 0, got {lam}")
    if d < 1:
        raise ValueError(f"thermal_tail requires d >= 1, got {d}")
    return math.exp(d * (math.log(lam) - math.log1p(lam)))


def exact_max_tail(n: int, p: int, m: int) -> float:
    """Exact Pr[max occupation >= m] for the uniform p-photon state on n
    modes, by enumeration (subject to the same guard as
    :func:`enumerate_compositions`)."""
    if m > p:
        return 0.0
    if m <= 0:
        return 1.0
    dist = enumerate_compositions(n, p)
    hits = int(np.count_nonzero(dist.data.max(axis=1) >= m))
    return hits / dist.data.shape[0]
