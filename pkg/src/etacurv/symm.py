"""Elementary symmetric functions, cone tests and operator coefficients.

Everything the solver needs from the algebra of the k-th elementary
symmetric function sigma_k and of the concave operator G = sigma_k^(1/k):
values, first and second derivatives in the eigenvalue arguments, the
summed coefficients F^ii = sum_{j != i} G^jj, and membership tests for the
admissible cone (sigma_1 > 0, ..., sigma_k > 0).

All public entry points are pure functions; the *_batch helpers operate on
arrays of eigenvalue vectors (shape (N, n)) and are used by the field-level
solvers.
"""

import math
from collections import namedtuple
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConeViolationError

__all__ = [
    "SpectrumVector",
    "OperatorCoefficients",
    "EtaSpectrum",
    "sigma",
    "sigma_excl",
    "sigma_brute",
    "gamma_k_contains",
    "operator_coefficients",
    "eta_spectrum_from_kappa",
]

# Relative tie tolerance for the divided-difference pair coefficient.
PAIR_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class SpectrumVector:
    """An ordered list of n real eigenvalues plus the equation order k."""

    values: np.ndarray
    k: int

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("need a 1-d eigenvalue vector with n >= 2")
        if not 1 <= self.k <= vals.size:
            raise ValueError(f"order k={self.k} outside [1, {vals.size}]")

    @property
    def n(self):
        return self.values.size


def elem_sym_all(values):
    """All sigma_0..sigma_n of a vector, by the one-pass recurrence.

    Adding entries one at a time keeps the cost O(n^2) and avoids the
    exponential subset sum; exact in exact arithmetic.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    e = np.zeros(n + 1)
    e[0] = 1.0
    for j, x in enumerate(values):
        top = min(j + 1, n)
        for m in range(top, 0, -1):
            e[m] += x * e[m - 1]
    return e


def elem_sym_all_batch(lam):
    """sigma_0..sigma_n along the last axis of an (N, n) array."""
    lam = np.asarray(lam, dtype=float)
    npts, n = lam.shape
    e = np.zeros((npts, n + 1))
    e[:, 0] = 1.0
    for j in range(n):
        x = lam[:, j]
        top = min(j + 1, n)
        for m in range(top, 0, -1):
            e[:, m] += x * e[:, m - 1]
    return e


def sigma_brute(values, m):
    """sigma_m by explicit subset enumeration. Test oracle only."""
    values = [float(v) for v in values]
    if not 0 <= m <= len(values):
        raise ValueError(f"m={m} outside [0, {len(values)}]")
    if m == 0:
        return 1.0
    return float(sum(math.prod(c) for c in combinations(values, m)))


def sigma(lam, m):
    """sigma_m of a spectrum vector (production recurrence path)."""
    if not 0 <= m <= lam.n:
        raise ValueError(f"m={m} outside [0, {lam.n}]")
    return float(elem_sym_all(lam.values)[m])


def sigma_excl(lam, m, i):
    """sigma_m of the vector with entry i removed."""
    if not 0 <= i < lam.n:
        raise ValueError(f"index i={i} outside [0, {lam.n})")
    if not 0 <= m <= lam.n - 1:
        raise ValueError(f"m={m} outside [0, {lam.n - 1}]")
    reduced = np.delete(lam.values, i)
    return float(elem_sym_all(reduced)[m])


def sigma_excl_all(values, m):
    """sigma_m(values | i) for every i, as an array of length n."""
    values = np.asarray(values, dtype=float)
    n = values.size
    return np.array(
        [elem_sym_all(np.delete(values, i))[m] for i in range(n)]
    )


def sigma_excl_batch(lam, m):
    """sigma_m(lam | i) per row and per excluded index; shape (N, n)."""
    lam = np.asarray(lam, dtype=float)
    npts, n = lam.shape
    out = np.empty((npts, n))
    for i in range(n):
        reduced = np.delete(lam, i, axis=1)
        out[:, i] = elem_sym_all_batch(reduced)[:, m]
    return out


def gamma_k_contains(lam, margin=0.0):
    """True iff sigma_j(lam) > margin for all j = 1..k.

    The cone is open, so membership uses strict positivity with zero
    tolerance by default; callers needing a safety band pass ``margin``.
    """
    e = elem_sym_all(lam.values)
    return bool(np.all(e[1 : lam.k + 1] > margin))


def gamma_k_contains_batch(lam, k, margin=0.0):
    """Vectorized cone membership.

    Returns (ok, first_fail) where ``first_fail[p]`` is the smallest j with
    sigma_j <= margin at row p (0 where ok).
    """
    e = elem_sym_all_batch(lam)
    bad = e[:, 1 : k + 1] <= margin
    ok = ~bad.any(axis=1)
    first_fail = np.where(ok, 0, bad.argmax(axis=1) + 1)
    return ok, first_fail


def require_cone_batch(lam, k, node_ids=None):
    """Raise ConeViolationError identifying the first offending row."""
    ok, first_fail = gamma_k_contains_batch(lam, k)
    if ok.all():
        return
    p = int(np.argmin(ok))
    j = int(first_fail[p])
    value = float(elem_sym_all_batch(lam[p : p + 1])[0, j])
    node = p if node_ids is None else node_ids[p]
    raise ConeViolationError(j, value, node=node)


EtaSpectrum = namedtuple("EtaSpectrum", ["values", "permutation"])


def eta_spectrum_from_kappa(kappa):
    """Spectrum of the first Newton transformation from curvatures.

    lambda_i = (sum_j kappa_j) - kappa_i, returned sorted ascending along
    with the permutation (sorted position -> original index) so geometric
    quantities can be mapped back to principal directions.
    """
    kappa = np.asarray(kappa, dtype=float)
    lam = kappa.sum() - kappa
    perm = np.argsort(lam, kind="stable")
    return EtaSpectrum(values=lam[perm], permutation=perm)


def sigma_k_grad_kappa_batch(mu, k):
    """d sigma_k(mu(kappa)) / d kappa_i with mu_j = H - kappa_j.

    Equals sum_{j != i} sigma_{k-1}(mu | j); shape (N, n). Used by the
    analytic Jacobian assembly of both pipelines.
    """
    s = sigma_excl_batch(mu, k - 1)
    return s.sum(axis=1, keepdims=True) - s


@dataclass(frozen=True)
class OperatorCoefficients:
    """Value and derivatives of G = sigma_k^(1/k) at one eigenvalue vector.

    ``hessian`` is the matrix of second partials of G in the eigenvalue
    arguments; ``pair_second(i, j)`` gives the off-diagonal matrix second
    derivative G^{ij,ji} via the divided-difference formula with the
    analytic limit at ties.
    """

    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    f_coeffs: np.ndarray
    lam: np.ndarray = field(repr=False)

    def pair_second(self, i, j):
        if i == j:
            raise ValueError("pair coefficient needs i != j")
        li, lj = self.lam[i], self.lam[j]
        if abs(li - lj) < PAIR_TIE_RTOL * (1.0 + abs(li) + abs(lj)):
            # Removable singularity: the limit of the divided difference.
            return self.hessian[i, i] - self.hessian[i, j]
        return (self.gradient[i] - self.gradient[j]) / (li - lj)


def operator_coefficients(lam):
    """G, G^ii, the eigenvalue Hessian of G, and F^ii at lam in the cone.

    G^ii = (1/k) sigma_k^(1/k - 1) sigma_{k-1}(lam | i); the Hessian uses
    sigma_{k-2}(lam | ij) for the off-diagonal second partials of sigma_k.
    Raises ConeViolationError outside the open cone.
    """
    vals, k, n = lam.values, lam.k, lam.n
    e = elem_sym_all(vals)
    for j in range(1, k + 1):
        if not e[j] > 0.0:
            raise ConeViolationError(j, float(e[j]))
    sk = e[k]
    p = 1.0 / k
    value = sk**p

    s1 = sigma_excl_all(vals, k - 1)
    gradient = p * sk ** (p - 1.0) * s1

    # Second partials of sigma_k: 0 on the diagonal, sigma_{k-2}(lam|ij) off.
    sk_hess = np.zeros((n, n))
    if k >= 2:
        for i in range(n):
            reduced_i = np.delete(vals, i)
            s2 = sigma_excl_all(reduced_i, k - 2)
            sk_hess[i, np.arange(n) != i] = s2
    hessian = (
        p * (p - 1.0) * sk ** (p - 2.0) * np.outer(s1, s1)
        + p * sk ** (p - 1.0) * sk_hess
    )

    f_coeffs = gradient.sum() - gradient
    return OperatorCoefficients(
        value=float(value),
        gradient=gradient,
        hessian=hessian,
        f_coeffs=f_coeffs,
        lam=vals.copy(),
    )
