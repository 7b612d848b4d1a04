"""Bivariate structure identification from multi-environment data.

The procedure takes two samples per environment, stacks them into one row
(x1, y1, x2, y2) per environment, and runs three independence tests across
environments:

    x_to_y      y1 independent of x2 given x1
    y_to_x      x1 independent of y2 given y1
    independent x1 independent of y1

Each candidate structure implies its test's null, so the structure whose
test produced the highest p-value is returned. The significance level is
recorded for reporting but plays no role in the decision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ._streams import mix64
from .citest import (
    CITestResult,
    InsufficientSamples,
    TestMethod,
    conditional_independence_test,
    marginal_independence_test,
)
from .dgp import CausalStructure, MultiEnvDataset

MIN_ENVIRONMENTS = 20


class InsufficientEnvironments(ValueError):
    pass


@dataclass(frozen=True)
class PairedTable:
    """One row per environment: first sample's (x, y) then second sample's."""

    rows: NDArray[np.float64]  # shape (E, 4)

    @property
    def x1(self) -> NDArray[np.float64]:
        return self.rows[:, 0]

    @property
    def y1(self) -> NDArray[np.float64]:
        return self.rows[:, 1]

    @property
    def x2(self) -> NDArray[np.float64]:
        return self.rows[:, 2]

    @property
    def y2(self) -> NDArray[np.float64]:
        return self.rows[:, 3]

    @property
    def n_environments(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class DiscoveryDecision:
    structure: CausalStructure
    p_x_to_y: float
    p_y_to_x: float
    p_independent: float
    alpha: float
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "p_x_to_y": self.p_x_to_y,
            "p_y_to_x": self.p_y_to_x,
            "p_independent": self.p_independent,
            "alpha": self.alpha,
        }


def build_cross_sample_pairs(dataset: MultiEnvDataset) -> PairedTable:
    """Stack the first two samples of every environment into one table.

    Extra samples beyond the first two are ignored.
    """
    rows = np.empty((dataset.n_environments, 4))
    for e, env in enumerate(dataset.environments):
        if env.n_samples < 2:
            raise InsufficientSamples(
                f"environment {e} has {env.n_samples} sample(s); need at least 2"
            )
        rows[e, 0] = env.samples[0, 0]
        rows[e, 1] = env.samples[0, 1]
        rows[e, 2] = env.samples[1, 0]
        rows[e, 3] = env.samples[1, 1]
    return PairedTable(rows)


def _decide(
    p_x_to_y: float, p_y_to_x: float, p_independent: float
) -> CausalStructure:
    # Fixed priority breaks exact ties deterministically.
    ordered = (
        (p_x_to_y, CausalStructure.X_TO_Y),
        (p_y_to_x, CausalStructure.Y_TO_X),
        (p_independent, CausalStructure.INDEPENDENT),
    )
    best = max(p for p, _ in ordered)
    for p, structure in ordered:
        if p == best:
            return structure
    raise AssertionError("unreachable")


def discover_structure(
    dataset: MultiEnvDataset,
    test_method: TestMethod = TestMethod.FISHER_Z,
    alpha: float = 0.05,
    *,
    n_permutations: int = 200,
) -> DiscoveryDecision:
    if dataset.n_environments < MIN_ENVIRONMENTS:
        raise InsufficientEnvironments(
            f"need at least {MIN_ENVIRONMENTS} environments, got {dataset.n_environments}"
        )
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly between 0 and 1")
    pairs = build_cross_sample_pairs(dataset)
    results: list[tuple[str, CITestResult]] = []

    res_x_to_y = conditional_independence_test(
        pairs.y1,
        pairs.x2,
        pairs.x1,
        test_method,
        n_permutations=n_permutations,
        seed=mix64(dataset.seed, 0),
    )
    results.append(("x_to_y", res_x_to_y))
    res_y_to_x = conditional_independence_test(
        pairs.x1,
        pairs.y2,
        pairs.y1,
        test_method,
        n_permutations=n_permutations,
        seed=mix64(dataset.seed, 1),
    )
    results.append(("y_to_x", res_y_to_x))
    res_independent = marginal_independence_test(
        pairs.x1,
        pairs.y1,
        test_method,
        n_permutations=n_permutations,
        seed=mix64(dataset.seed, 2),
    )
    results.append(("independent", res_independent))

    flags = tuple(f"{name}:{flag}" for name, res in results for flag in res.flags)
    return DiscoveryDecision(
        structure=_decide(res_x_to_y.p_value, res_y_to_x.p_value, res_independent.p_value),
        p_x_to_y=res_x_to_y.p_value,
        p_y_to_x=res_y_to_x.p_value,
        p_independent=res_independent.p_value,
        alpha=alpha,
        flags=flags,
    )


_BASELINE_CHOICES = (
    CausalStructure.X_TO_Y,
    CausalStructure.Y_TO_X,
    CausalStructure.INDEPENDENT,
)


def random_baseline(rng: np.random.Generator) -> CausalStructure:
    """Uniform draw over the three structures; the chance-level reference."""
    return _BASELINE_CHOICES[int(rng.integers(3))]
