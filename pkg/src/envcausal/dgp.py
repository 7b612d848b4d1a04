"""Exchangeable multi-environment bivariate data generation.

Each environment carries latent parameters (theta for the cause marginal,
a psi bundle for the mechanism) and emits paired (x, y) samples from a
unit-triangular structural model with Laplace noise:

    cause   = s_c,            s_c ~ Laplace(theta, noise_scale)
    effect  = c * cause + s_e + c * theta^2 * [nonlinear]
              with s_e ~ Laplace(psi_loc, noise_scale)

The variability regime decides which parameter block is redrawn per
environment and which is pinned (a delta prior). With collapse_noise the
pinned side's noise loses its spread entirely: the noise variable is set
exactly to its location parameter, producing the degenerate datasets that
the conditional-independence tests must flag rather than mishandle.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from ._streams import (
    ROLE_CAUSE_NOISE,
    ROLE_CAUSE_PARAMS,
    ROLE_MECH_NOISE,
    ROLE_MECH_PARAMS,
    ROLE_STRUCTURE,
    sample_laplace,
    substream,
)


class CausalStructure(str, Enum):
    X_TO_Y = "x_to_y"
    Y_TO_X = "y_to_x"
    INDEPENDENT = "independent"


class VariabilityRegime(str, Enum):
    FULL_EXCHANGEABLE = "full_exchangeable"
    CAUSE_VARIABILITY = "cause_variability"
    MECHANISM_VARIABILITY = "mechanism_variability"
    IID = "iid"


class InvalidConfig(ValueError):
    pass


class DegenerateDensity(ValueError):
    pass


class DataFormatError(ValueError):
    """Malformed dataset file; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class DeFinettiParams:
    """Per-environment latent parameters.

    theta: cause Laplace location. psi_loc: effect-noise Laplace location.
    psi_coef: cause-to-effect coupling (off-diagonal of the triangular
    coupling matrix), zero for independent structures. psi_nonlinear:
    whether this environment adds the quadratic coupling term.
    """

    theta: float
    psi_loc: float
    psi_coef: float
    psi_nonlinear: bool


@dataclass(frozen=True)
class EnvironmentData:
    """Samples of one environment, rows = within-environment sample index."""

    samples: NDArray[np.float64]  # shape (n, 2), columns x then y

    @property
    def x(self) -> NDArray[np.float64]:
        return self.samples[:, 0]

    @property
    def y(self) -> NDArray[np.float64]:
        return self.samples[:, 1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class MultiEnvDataset:
    environments: tuple[EnvironmentData, ...]
    truth: CausalStructure
    regime: VariabilityRegime
    params: tuple[DeFinettiParams, ...]
    seed: int
    noise_scale: float = 1.0
    collapse_noise: bool = False

    def __post_init__(self):
        if len(self.environments) != len(self.params) or not self.environments:
            raise InvalidConfig("environments and params must align and be non-empty")

    @property
    def n_environments(self) -> int:
        return len(self.environments)


@dataclass(frozen=True)
class DGPConfig:
    n_environments: int
    regime: VariabilityRegime
    structure: Union[CausalStructure, Literal["random"]]
    samples_per_env: int = 2
    noise_scale: float = 1.0
    collapse_noise: bool = False
    coef_magnitude_range: tuple[float, float] = (0.5, 2.0)

    def validate(self) -> None:
        if self.n_environments <= 0:
            raise InvalidConfig("n_environments must be positive")
        if self.samples_per_env <= 0:
            raise InvalidConfig("samples_per_env must be positive")
        if self.noise_scale <= 0:
            raise InvalidConfig("noise_scale must be positive")
        lo, hi = self.coef_magnitude_range
        if not (0 < lo <= hi):
            raise InvalidConfig("coef_magnitude_range must satisfy 0 < low <= high")
        if self.structure != "random" and not isinstance(self.structure, CausalStructure):
            raise InvalidConfig("structure must be a CausalStructure or 'random'")


def _draw_psi_bundle(config: DGPConfig, structure: CausalStructure, rng) -> tuple[float, float, bool]:
    lo, hi = config.coef_magnitude_range
    psi_loc = float(rng.uniform(-1.0, 1.0))
    sign = 1.0 if rng.random() < 0.5 else -1.0
    magnitude = float(rng.uniform(lo, hi))
    nonlinear = bool(rng.random() < 0.5)
    coef = 0.0 if structure is CausalStructure.INDEPENDENT else sign * magnitude
    return psi_loc, coef, nonlinear


def sample_definetti_params(
    config: DGPConfig, structure: CausalStructure, rng: np.random.Generator
) -> tuple[DeFinettiParams, ...]:
    """Draw one parameter tuple per environment under the regime's priors.

    Theta draws and psi-bundle draws come from two child streams spawned
    from ``rng``, so the two blocks cannot interleave: changing how many
    psi values are consumed leaves every theta untouched.
    """
    config.validate()
    cause_rng, mech_rng = rng.spawn(2)
    e = config.n_environments
    regime = config.regime

    cause_varies = regime in (VariabilityRegime.FULL_EXCHANGEABLE, VariabilityRegime.CAUSE_VARIABILITY)
    mech_varies = regime in (VariabilityRegime.FULL_EXCHANGEABLE, VariabilityRegime.MECHANISM_VARIABILITY)

    thetas = [float(cause_rng.uniform(-1.0, 1.0)) for _ in range(e if cause_varies else 1)]
    psis = [_draw_psi_bundle(config, structure, mech_rng) for _ in range(e if mech_varies else 1)]

    out = []
    for i in range(e):
        theta = thetas[i if cause_varies else 0]
        psi_loc, coef, nonlinear = psis[i if mech_varies else 0]
        out.append(DeFinettiParams(theta, psi_loc, coef, nonlinear))
    return tuple(out)


def _resolve_structure(config: DGPConfig, seed: int) -> CausalStructure:
    if config.structure != "random":
        return config.structure
    rng = substream(seed, ROLE_STRUCTURE)
    choices = (CausalStructure.X_TO_Y, CausalStructure.Y_TO_X, CausalStructure.INDEPENDENT)
    return choices[int(rng.integers(3))]


def _delta_sides(regime: VariabilityRegime) -> tuple[bool, bool]:
    """(cause side pinned, mechanism side pinned) for the regime."""
    cause_pinned = regime in (VariabilityRegime.MECHANISM_VARIABILITY, VariabilityRegime.IID)
    mech_pinned = regime in (VariabilityRegime.CAUSE_VARIABILITY, VariabilityRegime.IID)
    return cause_pinned, mech_pinned


def _generate_environment(
    config: DGPConfig, structure: CausalStructure, p: DeFinettiParams, seed: int, env_index: int
) -> EnvironmentData:
    n = config.samples_per_env
    b = config.noise_scale
    cause_pinned, mech_pinned = _delta_sides(config.regime)

    if config.collapse_noise and cause_pinned:
        s_c = np.full(n, p.theta)
    else:
        s_c = sample_laplace(substream(seed, ROLE_CAUSE_NOISE, env_index), p.theta, b, size=n)
    if config.collapse_noise and mech_pinned:
        s_e = np.full(n, p.psi_loc)
    else:
        s_e = sample_laplace(substream(seed, ROLE_MECH_NOISE, env_index), p.psi_loc, b, size=n)

    nl = p.psi_coef * p.theta * p.theta if p.psi_nonlinear else 0.0
    if structure is CausalStructure.X_TO_Y:
        x, y = s_c, p.psi_coef * s_c + s_e + nl
    elif structure is CausalStructure.Y_TO_X:
        y, x = s_c, p.psi_coef * s_c + s_e + nl
    else:
        x, y = s_c, s_e
    return EnvironmentData(np.column_stack([x, y]))


def simulate_with_params(
    config: DGPConfig,
    structure: CausalStructure,
    params: Sequence[DeFinettiParams],
    seed: int,
) -> MultiEnvDataset:
    """Generate observations for explicitly supplied parameters.

    Lower half of :func:`simulate_dataset`; lets tests pin coefficients
    or nonlinearity in ways the sampling priors never would.
    """
    config.validate()
    if len(params) != config.n_environments:
        raise InvalidConfig("params length must equal n_environments")
    envs = tuple(
        _generate_environment(config, structure, p, seed, e) for e, p in enumerate(params)
    )
    return MultiEnvDataset(
        environments=envs,
        truth=structure,
        regime=config.regime,
        params=tuple(params),
        seed=seed,
        noise_scale=config.noise_scale,
        collapse_noise=config.collapse_noise,
    )


def simulate_dataset(config: DGPConfig, seed: int) -> MultiEnvDataset:
    config.validate()
    structure = _resolve_structure(config, seed)
    param_rng = substream(seed, ROLE_CAUSE_PARAMS, ROLE_MECH_PARAMS)
    params = sample_definetti_params(config, structure, param_rng)
    return simulate_with_params(config, structure, params, seed)


def _laplace_logpdf(value, loc, scale) -> NDArray[np.float64]:
    return -np.abs(np.asarray(value) - loc) / scale - math.log(2.0 * scale)


def joint_log_density(dataset: MultiEnvDataset) -> float:
    """Exact log-density of all observations given the recorded parameters.

    The unit-triangular coupling has determinant 1, so recovering the two
    noise values per observation and summing their Laplace log-densities
    is the whole computation.
    """
    if dataset.collapse_noise:
        raise DegenerateDensity("collapsed noise has no density")
    b = dataset.noise_scale
    if b <= 0:
        raise DegenerateDensity("noise_scale must be positive for a density")
    total = 0.0
    for env, p in zip(dataset.environments, dataset.params):
        x, y = env.x, env.y
        nl = p.psi_coef * p.theta * p.theta if p.psi_nonlinear else 0.0
        if dataset.truth is CausalStructure.X_TO_Y:
            s_c, s_e = x, y - p.psi_coef * x - nl
        elif dataset.truth is CausalStructure.Y_TO_X:
            s_c, s_e = y, x - p.psi_coef * y - nl
        else:
            s_c, s_e = x, y
        total += float(np.sum(_laplace_logpdf(s_c, p.theta, b)))
        total += float(np.sum(_laplace_logpdf(s_e, p.psi_loc, b)))
    return total


# ---------------------------------------------------------------------------
# Persistence: dataset CSV plus truth JSON sidecar.

_CSV_HEADER = ["env", "sample", "x", "y"]


def write_dataset_csv(dataset: MultiEnvDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_HEADER)
        for e, env in enumerate(dataset.environments):
            for s in range(env.n_samples):
                writer.writerow([e, s, f"{env.samples[s, 0]:.17g}", f"{env.samples[s, 1]:.17g}"])


def write_truth_json(dataset: MultiEnvDataset, path: str | Path) -> None:
    payload = {
        "structure": dataset.truth.value,
        "regime": dataset.regime.value,
        "seed": dataset.seed,
        "noise_scale": dataset.noise_scale,
        "collapse_noise": dataset.collapse_noise,
        "params": [
            {
                "theta": p.theta,
                "psi_loc": p.psi_loc,
                "psi_coef": p.psi_coef,
                "psi_nonlinear": p.psi_nonlinear,
            }
            for p in dataset.params
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2))


def read_environments_csv(path: str | Path) -> tuple[EnvironmentData, ...]:
    """Parse a dataset CSV into per-environment sample tables.

    Errors name the offending 1-based line so the CLI can report it.
    """
    rows: dict[int, list[tuple[int, float, float]]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty dataset file", line=1)
        if [h.strip() for h in header] != _CSV_HEADER:
            raise DataFormatError(f"expected header {','.join(_CSV_HEADER)}", line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(f"expected 4 columns, got {len(row)}", line=line_no)
            try:
                e, s = int(row[0]), int(row[1])
                x, y = float(row[2]), float(row[3])
            except ValueError:
                raise DataFormatError(f"unparseable row {row!r}", line=line_no)
            if e < 0 or s < 0 or not (math.isfinite(x) and math.isfinite(y)):
                raise DataFormatError(f"invalid values in row {row!r}", line=line_no)
            rows.setdefault(e, []).append((s, x, y))
    if not rows:
        raise DataFormatError("dataset contains no rows", line=2)
    if sorted(rows) != list(range(len(rows))):
        raise DataFormatError("environment indices must be 0-based and contiguous")
    envs = []
    for e in range(len(rows)):
        samples = sorted(rows[e])
        if [s for s, _, _ in samples] != list(range(len(samples))):
            raise DataFormatError(f"sample indices in environment {e} must be 0-based and contiguous")
        envs.append(EnvironmentData(np.array([[x, y] for _, x, y in samples])))
    return tuple(envs)


def read_dataset(csv_path: str | Path, truth_path: str | Path) -> MultiEnvDataset:
    envs = read_environments_csv(csv_path)
    try:
        payload = json.loads(Path(truth_path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"truth sidecar is not valid JSON: {exc}")
    try:
        params = tuple(
            DeFinettiParams(
                theta=float(p["theta"]),
                psi_loc=float(p["psi_loc"]),
                psi_coef=float(p["psi_coef"]),
                psi_nonlinear=bool(p["psi_nonlinear"]),
            )
            for p in payload["params"]
        )
        dataset = MultiEnvDataset(
            environments=envs,
            truth=CausalStructure(payload["structure"]),
            regime=VariabilityRegime(payload["regime"]),
            params=params,
            seed=int(payload["seed"]),
            noise_scale=float(payload.get("noise_scale", 1.0)),
            collapse_noise=bool(payload.get("collapse_noise", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"truth sidecar malformed: {exc}")
    if len(params) != len(envs):
        raise DataFormatError("truth sidecar params do not match environment count")
    return dataset
