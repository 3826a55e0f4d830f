"""System assembly and iterative weighted least-squares solution.

The linearized model is v = A*x - b with diagonal weight matrix
W = sigma0^2 * C^-1.  Corrections solve the normal equations
A'WA x = A'Wb; after convergence the a-posteriori variance of unit
weight is sigma0^2 = v'Wv / (n - m) and the parameter covariance is
sigma0^2 * (A'WA)^-1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import equations
from .equations import Coordinates, StationIndex
from .errors import (
    CoincidentStations,
    DimensionMismatch,
    MissingProvisional,
    NoFreeStations,
    NonpositiveSigma,
    NotConverged,
    SingularNormalMatrix,
    UnreachableStation,
)

if TYPE_CHECKING:
    from .control import StationClassification
    from .fieldbook import DataSet

PIVOT_RTOL = 1e-12  # singularity threshold relative to the largest diagonal


@dataclass
class DesignSystem:
    """Dense coefficient matrix, right-hand side, weights and column map."""

    a_matrix: np.ndarray  # n x m
    b_vector: np.ndarray  # n
    w_matrix: np.ndarray  # n x n, diagonal
    index: StationIndex | None = None
    tags: list[str] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)

    @property
    def observation_count(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.a_matrix.shape[1]

    @property
    def redundancy(self) -> int:
        return self.observation_count - self.parameter_count


@dataclass
class CofactorMatrix:
    """Inverse of the weight matrix: Q W = I."""

    q_matrix: np.ndarray


@dataclass
class AdjustmentOptions:
    tolerance: float = 1e-6  # metres, on the largest coordinate correction
    max_iterations: int = 10


@dataclass
class AdjustmentResult:
    """Converged corrections, coordinates and statistics of one adjustment.

    `coordinates` holds every station: adjusted values for free stations
    and the pass-through control values for fixed ones.  `unit_variance`
    and `covariance` are None when the redundancy is zero.
    """

    corrections: np.ndarray
    coordinates: dict[str, Coordinates]
    residuals: np.ndarray
    unit_variance: float | None
    covariance: np.ndarray | None
    iterations: int
    converged: bool
    redundancy: int
    index: StationIndex
    tags: list[str] = field(default_factory=list)
    kinds: list[str] = field(default_factory=list)
    weights: np.ndarray | None = None
    iteration_log: list[float] = field(default_factory=list)
    fixed: set[str] = field(default_factory=set)

    def coordinate_sigmas(self, station: str) -> tuple[float, float] | None:
        """(sigma_E, sigma_N) of an adjusted station, None without covariance."""
        if self.covariance is None or station not in self.index.index_of:
            return None
        i = self.index.index_of[station]
        var_e = self.covariance[2 * i - 2, 2 * i - 2]
        var_n = self.covariance[2 * i - 1, 2 * i - 1]
        return math.sqrt(max(var_e, 0.0)), math.sqrt(max(var_n, 0.0))


def weights_from_sigmas(sigmas, sigma0_sq: float = 1.0) -> np.ndarray:
    """Diagonal weight matrix w_i = sigma0^2 / sigma_i^2 (uncorrelated observations)."""
    sig = np.asarray(sigmas, dtype=float)
    if sigma0_sq <= 0.0:
        raise NonpositiveSigma(f"sigma0^2 must be positive, got {sigma0_sq}")
    if np.any(sig <= 0.0):
        raise NonpositiveSigma("all observation sigmas must be positive")
    return np.diag(sigma0_sq / sig**2)


def cofactor(w_matrix: np.ndarray) -> CofactorMatrix:
    """Cofactor of a diagonal weight matrix (elementwise inversion)."""
    diag = np.diag(w_matrix)
    if np.any(diag <= 0.0):
        raise NonpositiveSigma("weight diagonal must be positive")
    return CofactorMatrix(q_matrix=np.diag(1.0 / diag))


def propagate_covariance(a: np.ndarray, c_x: np.ndarray) -> np.ndarray:
    """Linear covariance propagation C_y = A C_x A', symmetrized against round-off."""
    a = np.asarray(a, dtype=float)
    c_x = np.asarray(c_x, dtype=float)
    if a.ndim != 2 or c_x.ndim != 2 or c_x.shape[0] != c_x.shape[1]:
        raise DimensionMismatch("A must be 2-D and C_x square")
    if a.shape[1] != c_x.shape[0]:
        raise DimensionMismatch(
            f"A is {a.shape[0]}x{a.shape[1]} but C_x is {c_x.shape[0]}x{c_x.shape[1]}"
        )
    c_y = a @ c_x @ a.T
    return 0.5 * (c_y + c_y.T)


def _near_null_stations(n_mat: np.ndarray, index: StationIndex | None) -> list[str]:
    if index is None or not index.order:
        return []
    try:
        _, vecs = np.linalg.eigh(n_mat)
    except np.linalg.LinAlgError:
        return []
    null_vec = vecs[:, 0]
    weight_by_station = {
        name: math.hypot(null_vec[2 * i - 2], null_vec[2 * i - 1])
        for name, i in index.index_of.items()
    }
    top = max(weight_by_station.values())
    if top == 0.0:
        return []
    return sorted(s for s, w in weight_by_station.items() if w > 0.5 * top)


def normal_equations(system: DesignSystem) -> tuple[np.ndarray, np.ndarray]:
    """Normal matrix A'WA and right-hand side A'Wb."""
    a = system.a_matrix
    w = system.w_matrix
    return a.T @ w @ a, a.T @ w @ system.b_vector


def solve_normal(system: DesignSystem) -> np.ndarray:
    """Solve A'WA x = A'Wb by symmetric positive-definite factorization.

    Raises SingularNormalMatrix (naming the stations dominating the
    near-null space when a column map is present) if the network carries
    no datum or the configuration is defective.
    """
    n_mat, rhs = normal_equations(system)
    if n_mat.size == 0:
        raise SingularNormalMatrix("system has no unknowns")
    diag = np.diag(n_mat)
    largest = float(np.max(diag))
    if largest <= 0.0 or np.min(diag) < PIVOT_RTOL * largest:
        raise SingularNormalMatrix(
            "normal matrix is singular", _near_null_stations(n_mat, system.index)
        )
    try:
        factor = cho_factor(n_mat)
    except np.linalg.LinAlgError:
        raise SingularNormalMatrix(
            "normal matrix factorization failed",
            _near_null_stations(n_mat, system.index),
        ) from None
    # the factor's squared diagonal holds the elimination pivots; a pivot
    # collapsing relative to the largest marks numerical rank deficiency
    pivots = np.diag(factor[0]) ** 2
    if np.min(pivots) < PIVOT_RTOL * np.max(pivots):
        raise SingularNormalMatrix(
            "normal matrix is numerically singular",
            _near_null_stations(n_mat, system.index),
        )
    return cho_solve(factor, rhs)


def residuals(system: DesignSystem, x: np.ndarray) -> np.ndarray:
    """Residual vector v = A x - b."""
    return system.a_matrix @ x - system.b_vector


def form_equations(dataset: "DataSet", classification: "StationClassification",
                   provisionals: Mapping[str, Coordinates],
                   sigma0_sq: float = 1.0) -> DesignSystem:
    """Assemble one equation row per observation, in observation order.

    `provisionals` must cover every station (fixed stations at their
    control values).  Columns follow the sorted free-station index.
    """
    if not classification.free:
        raise NoFreeStations("every station in the dataset is fixed")
    for station in sorted(dataset.stations):
        if station not in provisionals:
            raise MissingProvisional(f"station {station!r} has no coordinates")

    index = StationIndex.from_free(classification.free)
    n = len(dataset.observations)
    m = index.parameter_count
    a = np.zeros((n, m))
    b = np.zeros(n)
    sigmas = np.zeros(n)
    tags: list[str] = []
    kinds: list[str] = []

    for i, obs in enumerate(dataset.observations):
        if obs.kind == "angle":
            row = equations.angle_row(obs, provisionals, index, sigma0_sq)
        else:
            row = equations.distance_row(obs, provisionals, index, sigma0_sq)
        for col, coef in row.entries.items():
            a[i, col - 1] = coef
        b[i] = row.rhs
        sigmas[i] = obs.sigma
        tags.append(row.tag)
        kinds.append(row.kind)

    return DesignSystem(
        a_matrix=a,
        b_vector=b,
        w_matrix=weights_from_sigmas(sigmas, sigma0_sq),
        index=index,
        tags=tags,
        kinds=kinds,
    )


def _intersect_circles(c1: Coordinates, r1: float, c2: Coordinates,
                       r2: float) -> list[Coordinates]:
    d = equations.distance(c1, c2)
    if d == 0.0:
        return []
    a = (r1**2 - r2**2 + d**2) / (2.0 * d)
    h_sq = r1**2 - a**2
    if h_sq < 0.0:
        if h_sq < -(1e-6 * max(r1, 1.0)) ** 2:
            return []
        h_sq = 0.0
    h = math.sqrt(h_sq)
    ux = (c2.easting - c1.easting) / d
    uy = (c2.northing - c1.northing) / d
    px = c1.easting + a * ux
    py = c1.northing + a * uy
    return [
        Coordinates(px + h * uy, py - h * ux),
        Coordinates(px - h * uy, py + h * ux),
    ]


def provisional_coordinates(dataset: "DataSet",
                            fixed_coords: Mapping[str, Coordinates]) -> dict[str, Coordinates]:
    """Propagate approximate coordinates to every free station.

    Sweeps the observation list, fixing stations by polar pairs: a known
    vertex with a known backsight gives the foresight bearing from the
    observed angle, and a distance on that leg places the target.  A
    station whose own setup sights two known targets with measured
    distances is placed by circle intersection, disambiguated by the
    observed angle.  Raises UnreachableStation when the sweeps stall.
    """
    coords: dict[str, Coordinates] = dict(fixed_coords)

    leg_length: dict[tuple[str, str], float] = {}
    for obs in dataset.observations:
        if obs.kind != "distance":
            continue
        key = tuple(sorted((obs.at, obs.from_target)))
        leg_length.setdefault(key, obs.value)

    def length_of(u: str, v: str) -> float | None:
        return leg_length.get(tuple(sorted((u, v))))

    def place_polar(origin: str, theta: float, target: str) -> bool:
        length = length_of(origin, target)
        if length is None:
            return False
        base = coords[origin]
        coords[target] = Coordinates(
            base.easting + length * math.sin(theta),
            base.northing + length * math.cos(theta),
        )
        return True

    angle_obs = dataset.angles()
    progress = True
    while progress:
        progress = False
        for obs in angle_obs:
            at, back, fore = obs.at, obs.from_target, obs.to_target
            if at in coords:
                if back in coords and fore not in coords:
                    try:
                        theta = equations.bearing(coords[at], coords[back]) + obs.value
                    except CoincidentStations:
                        continue
                    progress |= place_polar(at, theta, fore)
                elif fore in coords and back not in coords:
                    try:
                        theta = equations.bearing(coords[at], coords[fore]) - obs.value
                    except CoincidentStations:
                        continue
                    progress |= place_polar(at, theta, back)
            elif back in coords and fore in coords:
                # instrument station sighting two known targets: circle
                # intersection, resolved by the observed angle
                l_back = length_of(at, back)
                l_fore = length_of(at, fore)
                if l_back is None or l_fore is None:
                    continue
                best: Coordinates | None = None
                best_err = math.inf
                for cand in _intersect_circles(coords[back], l_back,
                                               coords[fore], l_fore):
                    try:
                        implied = equations.normalize_angle(
                            equations.bearing(cand, coords[fore])
                            - equations.bearing(cand, coords[back])
                        )
                    except CoincidentStations:
                        continue
                    err = abs(equations.normalize_signed(implied - obs.value))
                    if err < best_err:
                        best_err = err
                        best = cand
                if best is not None and best_err < math.radians(1.0):
                    coords[at] = best
                    progress = True

    unreached = sorted(dataset.stations - set(coords))
    if unreached:
        raise UnreachableStation(unreached)
    return coords


def iterate_adjustment(dataset: "DataSet", classification: "StationClassification",
                       control_coords: Mapping[str, Coordinates],
                       options: AdjustmentOptions | None = None,
                       provisionals: Mapping[str, Coordinates] | None = None) -> AdjustmentResult:
    """Run the full iterative adjustment.

    Parameters
    ----------
    dataset : DataSet
        Compiled observations.
    classification : StationClassification
        Fixed/free split of the dataset's stations.
    control_coords : mapping
        Coordinates for (at least) the fixed stations.
    options : AdjustmentOptions, optional
        Convergence tolerance (metres) and iteration cap.
    provisionals : mapping, optional
        Starting coordinates; computed by propagation when omitted.
        Fixed stations are always pinned to their control values.

    Raises NotConverged (carrying the last result) at the iteration cap.
    """
    opts = options or AdjustmentOptions()
    fixed_coords = {}
    for station in classification.fixed:
        if station not in control_coords:
            raise MissingProvisional(f"fixed station {station!r} has no control coordinates")
        fixed_coords[station] = control_coords[station]

    if provisionals is None:
        coords = provisional_coordinates(dataset, fixed_coords)
    else:
        coords = dict(provisionals)
        coords.update(fixed_coords)

    system = None
    x = None
    converged = False
    iterations = 0
    log: list[float] = []
    for _ in range(opts.max_iterations):
        system = form_equations(dataset, classification, coords)
        x = solve_normal(system)
        iterations += 1
        for station, i in system.index.index_of.items():
            base = coords[station]
            coords[station] = Coordinates(
                base.easting + x[2 * i - 2], base.northing + x[2 * i - 1]
            )
        largest = float(np.max(np.abs(x))) if x.size else 0.0
        log.append(largest)
        if largest < opts.tolerance:
            converged = True
            break

    v = residuals(system, x)
    n_mat, _ = normal_equations(system)
    redundancy = system.redundancy
    if redundancy > 0:
        w = system.w_matrix
        unit_variance = float(v @ w @ v) / redundancy
        factor = cho_factor(n_mat)
        covariance = unit_variance * cho_solve(factor, np.eye(n_mat.shape[0]))
        covariance = 0.5 * (covariance + covariance.T)
    else:
        unit_variance = None
        covariance = None

    result = AdjustmentResult(
        corrections=x,
        coordinates=coords,
        residuals=v,
        unit_variance=unit_variance,
        covariance=covariance,
        iterations=iterations,
        converged=converged,
        redundancy=redundancy,
        index=system.index,
        tags=list(system.tags),
        kinds=list(system.kinds),
        weights=np.diag(system.w_matrix).copy(),
        iteration_log=log,
        fixed=set(classification.fixed),
    )
    if not converged:
        raise NotConverged(result, iterations)
    return result
