"""Marginal and conditional independence tests with p-value output.

Three interchangeable methods share one result type. The parametric pair
(Fisher z on Pearson or Spearman correlations) gives closed-form normal
p-values; the nonparametric alternative residualizes with k-nearest-
neighbor regression and permutes a distance-correlation statistic.

Constant inputs are reported as independent (p = 1) with a flag instead
of raising: datasets with collapsed noise legitimately produce constant
columns, and a constant is independent of everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from scipy.stats import norm, rankdata

from ._streams import ROLE_PERMUTATION, substream


class TestMethod(str, Enum):
    # Keeps pytest from collecting this Test-prefixed name when imported
    # into test modules.
    __test__ = False

    FISHER_Z = "fisher-z"
    SPEARMAN_Z = "spearman-z"
    RESIDUAL_PERMUTATION = "residual-perm"


FLAG_ZERO_VARIANCE = "zero_variance"
FLAG_NUMERICAL_DEGENERACY = "numerical_degeneracy"

_DEGENERACY_EPS = 1e-12

# Minimum sample counts per (conditional?, parametric?).
_MIN_N = {
    (False, True): 8,
    (False, False): 20,
    (True, True): 10,
    (True, False): 30,
}


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    method: TestMethod
    n: int
    n_permutations: int = 0
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0,1]")


def _as_vector(name: str, values) -> NDArray[np.float64]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_lengths(conditional: bool, method: TestMethod, *arrays) -> int:
    n = arrays[0].shape[0]
    if any(a.shape[0] != n for a in arrays):
        raise ValueError("all inputs must have equal length")
    minimum = _MIN_N[(conditional, method is not TestMethod.RESIDUAL_PERMUTATION)]
    if n < minimum:
        raise InsufficientSamples(f"need at least {minimum} samples for this test, got {n}")
    return n


def _is_constant(v: NDArray[np.float64]) -> bool:
    return bool(np.all(v == v[0]))


def _pearson(a: NDArray[np.float64], b: NDArray[np.float64]) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    denom = math.sqrt(float(np.dot(ac, ac))) * math.sqrt(float(np.dot(bc, bc)))
    r = float(np.dot(ac, bc)) / denom
    return min(1.0, max(-1.0, r))


def _fisher_p(r: float, dof: float, method: TestMethod, n: int, flags=()) -> CITestResult:
    if abs(r) >= 1.0:
        return CITestResult(math.copysign(math.inf, r), 0.0, method, n, 0, tuple(flags))
    stat = math.sqrt(dof) * math.atanh(r)
    p = float(2.0 * norm.sf(abs(stat)))
    return CITestResult(stat, min(1.0, p), method, n, 0, tuple(flags))


def _centered_distances(v: NDArray[np.float64]) -> NDArray[np.float64]:
    d = np.abs(v[:, None] - v[None, :])
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def _canonical_sides(
    a: NDArray[np.float64], b: NDArray[np.float64]
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Order the pair so both argument orders run the identical computation.

    The second element of the returned pair is the one the permutation
    loop shuffles; picking it by byte comparison makes the permutation
    test exactly symmetric in its arguments.
    """
    if a.tobytes() <= b.tobytes():
        return a, b
    return b, a


def _dcor_permutation(
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    method: TestMethod,
    n_permutations: int,
    seed: int,
    flags: tuple[str, ...] = (),
) -> CITestResult:
    a, b = _canonical_sides(a, b)
    n = a.shape[0]
    ca = _centered_distances(a)
    cb = _centered_distances(b)
    dxx = float((ca * ca).mean())
    dyy = float((cb * cb).mean())
    if dxx <= 0.0 or dyy <= 0.0:
        return CITestResult(
            0.0, 1.0, method, n, n_permutations, flags + (FLAG_NUMERICAL_DEGENERACY,)
        )
    scale = math.sqrt(dxx * dyy)
    observed_cov = float((ca * cb).mean())
    statistic = math.sqrt(max(observed_cov, 0.0) / scale)
    rng = substream(seed, ROLE_PERMUTATION)
    exceed = 0
    for _ in range(n_permutations):
        perm = rng.permutation(n)
        if float((ca * cb[np.ix_(perm, perm)]).mean()) >= observed_cov:
            exceed += 1
    p = (exceed + 1) / (n_permutations + 1)
    return CITestResult(statistic, p, method, n, n_permutations, flags)


def _knn_residuals(
    target: NDArray[np.float64], z: NDArray[np.float64], k: int
) -> NDArray[np.float64]:
    # Stable argsort breaks distance ties by lower index.
    order = np.argsort(np.abs(z[:, None] - z[None, :]), axis=1, kind="stable")
    return target - target[order[:, :k]].mean(axis=1)


def marginal_independence_test(
    x,
    y,
    method: TestMethod = TestMethod.FISHER_Z,
    *,
    n_permutations: int = 200,
    seed: int = 0,
) -> CITestResult:
    """Test whether x and y are independent; higher p means less evidence
    against independence."""
    xv = _as_vector("x", x)
    yv = _as_vector("y", y)
    n = _check_lengths(False, method, xv, yv)
    if _is_constant(xv) or _is_constant(yv):
        return CITestResult(0.0, 1.0, method, n, 0, (FLAG_ZERO_VARIANCE,))
    if method is TestMethod.RESIDUAL_PERMUTATION:
        if n_permutations < 1:
            raise ValueError("n_permutations must be positive")
        return _dcor_permutation(xv, yv, method, n_permutations, seed)
    if method is TestMethod.SPEARMAN_Z:
        xv, yv = rankdata(xv), rankdata(yv)
    return _fisher_p(_pearson(xv, yv), n - 3, method, n)


def conditional_independence_test(
    x,
    y,
    z,
    method: TestMethod = TestMethod.FISHER_Z,
    *,
    n_permutations: int = 200,
    seed: int = 0,
) -> CITestResult:
    """Test whether x and y are independent given the scalar conditioner z."""
    xv = _as_vector("x", x)
    yv = _as_vector("y", y)
    zv = _as_vector("z", z)
    n = _check_lengths(True, method, xv, yv, zv)
    if _is_constant(xv) or _is_constant(yv) or _is_constant(zv):
        return CITestResult(0.0, 1.0, method, n, 0, (FLAG_ZERO_VARIANCE,))
    if method is TestMethod.RESIDUAL_PERMUTATION:
        if n_permutations < 1:
            raise ValueError("n_permutations must be positive")
        k = math.ceil(math.sqrt(n))
        rx = _knn_residuals(xv, zv, k)
        ry = _knn_residuals(yv, zv, k)
        return _dcor_permutation(rx, ry, method, n_permutations, seed)
    if method is TestMethod.SPEARMAN_Z:
        xv, yv, zv = rankdata(xv), rankdata(yv), rankdata(zv)
    r_xy = _pearson(xv, yv)
    r_xz = _pearson(xv, zv)
    r_yz = _pearson(yv, zv)
    vx = 1.0 - r_xz * r_xz
    vy = 1.0 - r_yz * r_yz
    if vx < _DEGENERACY_EPS or vy < _DEGENERACY_EPS:
        return CITestResult(0.0, 1.0, method, n, 0, (FLAG_NUMERICAL_DEGENERACY,))
    partial = (r_xy - r_xz * r_yz) / math.sqrt(vx * vy)
    partial = min(1.0, max(-1.0, partial))
    return _fisher_p(partial, n - 4, method, n)
