"""Built-in benchmark problems, their specs, and crack-path diagnostics.

Two dynamic fracture benchmarks ship with the package: a displacement-
controlled shear test of a notched square plate (internally generated
slit mesh) and a traction-loaded rectangular plate whose crack branches
(mesh read from a packaged Gmsh file with a rounded notch).  Probe
coordinates for points P/Q/C and segments AB/CD are read off the source
figures, not stated numerically there; the values pinned here are the
package's documented choices.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .constitutive import MaterialParams
from .driver import CoupledProblem, SchemeConfig, Simulation, TimeControls
from .gmsh_io import read_gmsh
from .mesh import Mesh, generate_notched_square, graded_points, promote_q4_to_q9
from .momentum import DirichletBC, NewmarkParams, TractionBC
from .probes import LineProbe, PointProbe, ReactionProbe

__all__ = [
    "BenchmarkSpec",
    "Ramp",
    "shear_plate_spec",
    "branching_plate_spec",
    "build_simulation",
    "crack_points",
    "hausdorff_distance",
    "SHEAR_LEVELS",
]

# Fine-band element sizes (mm) per named resolution of the shear plate.
SHEAR_LEVELS = {"tiny": 0.02, "coarse": 0.01, "medium": 0.005,
                "paper": 0.0025}


@dataclass(frozen=True)
class Ramp:
    """Linear ramp to a plateau: value v0 * t / t_rise, capped at v0."""

    v0: float
    t_rise: float

    def __call__(self, t: float) -> float:
        return self.v0 * min(t / self.t_rise, 1.0)

    def integral(self, t: float) -> float:
        """Time integral (e.g. displacement of a velocity ramp)."""
        if t <= self.t_rise:
            return 0.5 * self.v0 * t * t / self.t_rise
        return self.v0 * (t - 0.5 * self.t_rise)


@dataclass
class BenchmarkSpec:
    """Serializable description of one benchmark run.

    Material values are the published tables; ``mesh_level`` selects a
    resolution, ``t_final`` may extend past the published window (the load
    plateau simply continues) for coarse-mesh studies.
    """

    name: str
    scheme: str = "CDG_Q9"
    beta_s2: float = 20e-5
    lambda0: float = 1.0
    mesh_level: str = "coarse"
    material: dict = field(default_factory=dict)
    newmark_beta: float = 0.3025
    newmark_gamma: float = 0.6
    dt_initial: float = 1e-8
    dt_min: float = 1e-13
    dt_max: float = 2.5e-7
    t_final: float = 65e-6
    adaptive: bool = True
    output_every: int = 5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkSpec":
        return cls(**data)

    def material_params(self) -> MaterialParams:
        m = self.material
        return MaterialParams(
            e_young=m["young"], nu=m["poisson"], rho0=m["density"],
            gc=m["gc"], l0=m["l0"], eta0=m["eta0"])

    def scheme_config(self) -> SchemeConfig:
        return SchemeConfig(
            scheme=self.scheme, beta_s2=self.beta_s2, lambda0=self.lambda0,
            newmark=NewmarkParams(self.newmark_beta, self.newmark_gamma))

    def time_controls(self) -> TimeControls:
        return TimeControls(
            dt_initial=self.dt_initial, t_final=self.t_final,
            dt_min=self.dt_min, dt_max=self.dt_max, adaptive=self.adaptive)


def shear_plate_spec(scheme: str = "CDG_Q9", mesh_level: str = "coarse",
                     beta_s2: float = 20e-5, **overrides) -> BenchmarkSpec:
    """Displacement-controlled shear of a notched square plate.

    1 mm square, plane strain, zero-width slit from the left edge to the
    center; the bottom is fully fixed, the other three sides slide
    horizontally, and the top edge drives a velocity ramp (260 mm/s after
    25 us).  Material: stainless-steel-like table with Gc = 2.7 mJ/mm^2
    and l0 = 3.75e-3 mm.
    """
    spec = BenchmarkSpec(
        name="shear_plate", scheme=scheme, beta_s2=beta_s2,
        mesh_level=mesh_level,
        material=dict(young=210.0e3, poisson=0.3, density=8.0e-9,
                      gc=2.7, l0=3.75e-3, eta0=1.0e-6),
        dt_initial=1e-8, dt_max=2.5e-7, t_final=65e-6, adaptive=True)
    return replace(spec, **overrides) if overrides else spec


def branching_plate_spec(scheme: str = "CDG_Q9", mesh_level: str = "coarse",
                         beta_s2: float = 5e-2, **overrides) -> BenchmarkSpec:
    """Traction-driven crack branching in a notched rectangular plate.

    40 x 100 mm plate with a 1 mm wide slot ending in a rounded tip of
    radius 0.5 mm at (50, 0); 1 MPa tension ramps on the top and bottom
    edges within 1 us and holds.  Constant time stepping.
    """
    spec = BenchmarkSpec(
        name="branching_plate", scheme=scheme, beta_s2=beta_s2,
        mesh_level=mesh_level,
        material=dict(young=32.0e3, poisson=0.2, density=2.45e-9,
                      gc=3.0e-3, l0=0.125, eta0=1.0e-6),
        dt_initial=5e-8, dt_max=5e-8, dt_min=1e-13,
        t_final=95e-6, adaptive=False)
    return replace(spec, **overrides) if overrides else spec


def _shear_plate_mesh(h_fine: float) -> Mesh:
    h_far = max(4.0 * h_fine, 0.03)
    x = graded_points([(0.0, 0.42, h_far, h_fine),
                       (0.42, 0.5, h_fine, h_fine),
                       (0.5, 1.0, h_fine, h_fine)])
    y = graded_points([(0.0, 0.5, h_fine, h_fine),
                       (0.5, 0.56, h_fine, h_fine),
                       (0.56, 1.0, h_fine, h_far)])
    return generate_notched_square(1.0, 0.5, 0.5, x_coords=x, y_coords=y)


def _branching_plate_mesh(level: str) -> Mesh:
    ref = importlib.resources.files("pfx4").joinpath(
        f"data/branching_{level}.msh")
    with importlib.resources.as_file(ref) as path:
        if not path.exists():
            raise FileNotFoundError(
                f"no packaged mesh for level {level!r}; generate it with "
                "tools/make_branching_mesh.py")
        return read_gmsh(path)


def build_problem(spec: BenchmarkSpec):
    """Build (CoupledProblem, probes) for a benchmark spec."""
    mat = spec.material_params()
    if spec.name == "shear_plate":
        h_fine = SHEAR_LEVELS[spec.mesh_level]
        mesh = _shear_plate_mesh(h_fine)
        ramp = Ramp(260.0, 25e-6)
        dirichlet = [
            DirichletBC(mesh.node_sets["bottom"], 0, 0.0),
            DirichletBC(mesh.node_sets["bottom"], 1, 0.0),
            DirichletBC(mesh.node_sets["left"], 1, 0.0),
            DirichletBC(mesh.node_sets["right"], 1, 0.0),
            DirichletBC(mesh.node_sets["top"], 1, 0.0),
            DirichletBC(mesh.node_sets["top"], 0, ramp.integral),
        ]
        problem = CoupledProblem(
            mesh_q4=mesh, material=mat, dirichlet=dirichlet,
            pf_d2_set="outer", name="shear_plate")
        probes = [
            PointProbe("d_at_P", (0.5, 0.5), "d"),
            PointProbe("top_displacement", (0.5, 1.0), "ux"),
            ReactionProbe("reaction_x", "top", 0),
            # segment AB crosses the expected crack corridor (figure-derived)
            LineProbe("line_AB", (0.75, 0.0), (0.75, 0.55), 220, "d"),
        ]
        return problem, probes
    if spec.name == "branching_plate":
        mesh = _branching_plate_mesh(spec.mesh_level)
        ramp = Ramp(1.0, 1e-6)
        tractions = [
            TractionBC("top", lambda t: (0.0, ramp(t))),
            TractionBC("bottom", lambda t: (0.0, -ramp(t))),
        ]
        mesh.side_sets["all_boundary"] = mesh.boundary_faces()
        problem = CoupledProblem(
            mesh_q4=mesh, material=mat, dirichlet=[], tractions=tractions,
            pf_d2_set="all_boundary", name="branching_plate")
        probes = [
            PointProbe("d_at_C", (50.0, 0.0), "d"),
            PointProbe("u_at_Q", (100.0, 20.0), "umag"),
            # segment CD runs from the notch tip to the right edge
            LineProbe("line_CD", (50.0, 0.0), (100.0, 0.0), 400, "d"),
        ]
        return problem, probes
    raise ValueError(f"unknown benchmark {spec.name!r}")


def build_simulation(spec: BenchmarkSpec):
    """Build a ready-to-run Simulation plus its probe list."""
    problem, probes = build_problem(spec)
    sim = Simulation(problem, spec.scheme_config(), spec.time_controls())
    return sim, probes


def crack_points(mesh: Mesh, d: np.ndarray, threshold: float = 0.95):
    """Coordinates of nodes inside the fully damaged band (d >= threshold)."""
    return mesh.nodes[d >= threshold]


def hausdorff_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point clouds."""
    from scipy.spatial import cKDTree

    if len(a) == 0 or len(b) == 0:
        return float("inf")
    da = cKDTree(b).query(a)[0].max()
    db = cKDTree(a).query(b)[0].max()
    return float(max(da, db))
