"""End-to-end computation of the discrete inf-sup constant for one pairing.

beta_n is the square root of the smallest Schur eigenvalue on the zero-mean
pressure subspace; with deflation disabled the trivial constant mode shows
up as sigma_0 = 0 and beta_n is taken from sigma_1 instead.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .fem import (
    BoundaryCondition,
    Continuity,
    DofMap,
    ElementSpace,
    assemble_system,
    build_dof_map,
)
from .geometry import Mesh, ParentMap, element_sizes
from .spectral import (
    GenEigResult,
    SchurOperator,
    SolverOptions,
    factorize_spd,
    smallest_generalized_eigs,
)

__all__ = [
    "BetaResult",
    "DimensionZeroError",
    "PairConfig",
    "UscReport",
    "compute_beta",
    "csv_header",
    "eigenfunction_export",
    "schur_spectrum",
    "usc_check",
]


class DimensionZeroError(ValueError):
    """The (deflated) pressure space is zero-dimensional."""


@dataclass(frozen=True)
class PairConfig:
    """Velocity/pressure pairing on one mesh (or a nested mesh pair).

    The velocity space must be C0 with zero trace (used componentwise for
    the two velocity components); the pressure space carries no boundary
    condition and its zero-mean constraint is enforced by deflation.
    """

    velocity_space: ElementSpace
    pressure_space: ElementSpace
    velocity_mesh: Mesh
    pressure_mesh: Mesh | None = None
    parent_map: ParentMap | None = None
    deflate_constants: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        vs, ps = self.velocity_space, self.pressure_space
        if vs.continuity is not Continuity.C0 or vs.bc is not BoundaryCondition.ZERO_TRACE:
            raise ValueError("velocity space must be C0 with zero trace")
        if ps.bc is not BoundaryCondition.NONE:
            raise ValueError("pressure space carries no boundary condition")
        if self.pressure_mesh is not None and self.parent_map is None:
            raise ValueError("separate pressure mesh requires a parent map")

    def hash(self) -> str:
        payload = {
            "velocity": _space_key(self.velocity_space),
            "pressure": _space_key(self.pressure_space),
            "vmesh": _mesh_digest(self.velocity_mesh),
            "pmesh": _mesh_digest(self.pressure_mesh) if self.pressure_mesh is not None else None,
            "deflate": self.deflate_constants,
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _space_key(space: ElementSpace):
    return [space.family.value, space.degree, space.continuity.value, space.bc.value]


def _mesh_digest(mesh: Mesh) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.points).tobytes())
    h.update(np.ascontiguousarray(mesh.elements).tobytes())
    return h.hexdigest()[:12]


@dataclass(frozen=True)
class BetaResult:
    """Computed inf-sup constant with the leading Schur eigenvalues."""

    beta: float
    sigmas: np.ndarray
    eigenfunction: np.ndarray = field(repr=False)
    n_velocity: int
    n_pressure: int
    max_diameter_velocity: float
    min_inradius_pressure: float
    residual_max: float
    method: str
    config_hash: str
    dof_p: DofMap = field(repr=False)

    def csv_row(self, k: int) -> str:
        sig = list(self.sigmas[:k]) + [float("nan")] * max(0, k - len(self.sigmas))
        cells = [
            self.config_hash,
            str(self.n_velocity),
            str(self.n_pressure),
            f"{self.max_diameter_velocity:.17g}",
            f"{self.min_inradius_pressure:.17g}",
            f"{self.beta:.17g}",
            *[f"{s:.17g}" for s in sig],
            f"{self.residual_max:.17g}",
        ]
        return ",".join(cells)


def csv_header(k: int) -> str:
    sig = [f"sigma_{j + 1}" for j in range(k)]
    return ",".join(
        [
            "config_hash",
            "n_velocity",
            "n_pressure",
            "max_diameter_velocity",
            "min_inradius_pressure",
            "beta",
            *sig,
            "residual_max",
        ]
    )


def _solve_config(config: PairConfig, k: int) -> tuple[GenEigResult, dict]:
    dof_v = build_dof_map(config.velocity_mesh, config.velocity_space)
    pressure_mesh = config.pressure_mesh or config.velocity_mesh
    dof_p = build_dof_map(pressure_mesh, config.pressure_space)
    if dof_v.n_global == 0:
        raise DimensionZeroError("velocity space is empty (all dofs on the boundary)")
    deflated_dim = dof_p.n_global - (1 if config.deflate_constants else 0)
    if deflated_dim < 1:
        raise DimensionZeroError("pressure space is zero-dimensional after deflation")
    system = assemble_system(dof_v, dof_p, parent_map=config.parent_map)
    op = SchurOperator(system.B, factorize_spd(system.A))
    k_eff = min(k, deflated_dim)
    result = smallest_generalized_eigs(
        op,
        system.Mp,
        k_eff,
        deflate=system.m if config.deflate_constants else None,
        options=config.solver,
    )
    meta = {
        "dof_v": dof_v,
        "dof_p": dof_p,
        "system": system,
        "n_velocity": system.A.shape[0],
        "n_pressure": dof_p.n_global,
    }
    return result, meta


def compute_beta(config: PairConfig, k: int = 6) -> BetaResult:
    """Assemble the pairing and return beta_n plus the k smallest eigenvalues.

    With deflation (default), beta_n^2 is the smallest returned eigenvalue;
    without it, sigma_0 = 0 is reported first and beta_n^2 is sigma_1.
    """
    result, meta = _solve_config(config, k if config.deflate_constants else max(k, 2))
    sigmas = result.values
    if config.deflate_constants:
        lead = sigmas[0]
        eigenfunction = result.vectors[:, 0]
    else:
        lead = sigmas[1]
        eigenfunction = result.vectors[:, 1]
    beta = float(np.sqrt(max(lead, 0.0)))
    diam_v, _ = element_sizes(config.velocity_mesh)
    _, inr_p = element_sizes(config.pressure_mesh or config.velocity_mesh)
    return BetaResult(
        beta=beta,
        sigmas=sigmas,
        eigenfunction=eigenfunction,
        n_velocity=meta["n_velocity"],
        n_pressure=meta["n_pressure"],
        max_diameter_velocity=diam_v,
        min_inradius_pressure=inr_p,
        residual_max=float(result.residuals.max()),
        method=result.method,
        config_hash=config.hash(),
        dof_p=meta["dof_p"],
    )


def schur_spectrum(config: PairConfig, k: int = 6) -> np.ndarray:
    """The k smallest Schur eigenvalues for the pairing, ascending."""
    result, _ = _solve_config(config, k)
    return result.values


@dataclass(frozen=True)
class UscReport:
    passed: bool
    beta: float
    reference: float
    slack: float

    def __str__(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (
            f"usc-check {verdict}: beta={self.beta:.6g} "
            f"<= {self.reference:.6g} + {self.slack:.3g}"
        )


def usc_check(config: PairConfig, beta_ref: float, slack: float) -> UscReport:
    """Upper semi-continuity check: computed beta_n must not exceed the
    continuous reference by more than `slack`."""
    result = compute_beta(config, k=2 if config.deflate_constants else 3)
    return UscReport(
        passed=bool(result.beta <= beta_ref + slack),
        beta=result.beta,
        reference=float(beta_ref),
        slack=float(slack),
    )


def eigenfunction_export(result: BetaResult, path) -> None:
    """CSV of the leading pressure eigenfunction with dof geometry."""
    if result.eigenfunction is None:
        raise ValueError("result carries no eigenfunction")
    q = result.eigenfunction
    dof = result.dof_p
    with open(path, "w", newline="\n") as f:
        f.write("element,local_node,global_dof,x,y,coefficient\n")
        for e in range(dof.element_dofs.shape[0]):
            for loc in range(dof.n_local):
                g = dof.element_dofs[e, loc]
                if g < 0:
                    continue
                x, y = dof.dof_points[g]
                f.write(
                    f"{e},{loc},{g},{x:.17g},{y:.17g},{q[g]:.17g}\n"
                )
