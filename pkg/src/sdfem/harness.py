"""End-to-end studies: Green-function scaling, coercivity sampling, k sweeps.

Every study is a pure function of its configuration (meshes are rebuilt
per row, the random generator is seeded), so reruns produce byte-identical
CSV files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import FEFunction, StabilizationConfig, assemble_system
from .mesh import Region, ShishkinMesh, build_mesh, classify_point, transition_params
from .norms import element_energy_sq
from .problem import ProblemSpec, make_problem
from .solver import SystemSolver
from .weight import LemmaQuantities, lemma_quantities, make_weight_spec

DEFAULT_K_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
LEMMA4_THRESHOLD = 0.25
LEMMA6_THRESHOLD = 1.0 / 16.0
COERCIVITY_THRESHOLD = 0.5 - 1e-10

SCALING_COLUMNS = ("N", "epsilon", "k", "region", "enorm_sq", "wnorm_sq", "bound", "ratio")
LEMMA_COLUMNS = ("N", "epsilon", "k", "sigma_x", "sigma_y", "a_w", "point_val",
                 "defect", "wnorm_sq", "enorm_sq", "lemma4_ratio", "lemma6_ratio")


@dataclass(frozen=True)
class StudyConfig:
    """Inputs of the study pipelines; fixing it fixes every output byte."""

    epsilons: tuple[float, ...] = (1e-4,)
    ns: tuple[int, ...] = (12, 24, 48, 96)
    k: float = 16.0
    k_grid: tuple[float, ...] = DEFAULT_K_GRID
    c_star: float = 0.25
    b: float = 1.0
    c: float = 1.0
    beta: float = 1.0
    problem: str = "constant-f"
    placement: str = "center-omega-s"   # or "mid-omega-x" or "node:I,J"
    quad_degree: int = 6
    seed: int = 0
    trials: int = 200
    strict: bool = True
    out_dir: Path | None = None

    def stabilization(self) -> StabilizationConfig:
        return StabilizationConfig(self.c_star)

    def make_problem(self, epsilon: float) -> ProblemSpec:
        return make_problem(self.problem, epsilon, b=self.b, c=self.c, beta=self.beta)


def place_star(mesh: ShishkinMesh, placement: str) -> tuple[int, int]:
    """Resolve a star-placement policy to interior node indices (i, j).

    center-omega-s picks the node nearest (1/2, 1/2); mid-omega-x the node
    nearest (1 - lambda_x/2, 1/2); node:I,J is explicit.
    """
    if placement == "center-omega-s":
        target = (0.5, 0.5)
    elif placement == "mid-omega-x":
        target = (1.0 - mesh.transition.lambda_x / 2.0, 0.5)
    elif placement.startswith("node:"):
        i, j = (int(v) for v in placement[5:].split(","))
        if mesh.boundary_mask[mesh.node_id(i, j)]:
            raise ValueError(f"explicit star node ({i}, {j}) is on the boundary")
        return i, j
    else:
        raise ValueError(f"unknown star placement {placement!r}")
    i = int(np.argmin(np.abs(mesh.x_coords - target[0])))
    j = int(np.argmin(np.abs(mesh.y_coords - target[1])))
    i = min(max(i, 1), mesh.n - 1)
    j = min(max(j, 1), mesh.n - 1)
    return i, j


def _green_setup(config: StudyConfig, epsilon: float, n: int):
    tp = transition_params(epsilon, config.beta, n, strict=config.strict)
    mesh = build_mesh(n, tp)
    problem = config.make_problem(epsilon)
    system = assemble_system(mesh, problem, config.stabilization())
    return mesh, problem, SystemSolver(system)


def _lemma_row(config: StudyConfig, mesh, problem, solver, k: float) -> dict:
    i, j = place_star(mesh, config.placement)
    star = (float(mesh.x_coords[i]), float(mesh.y_coords[j]))
    G, _ = solver.green(mesh.node_id(i, j))
    spec = make_weight_spec(star, problem.epsilon, mesh.n, k, strict=config.strict)
    q = lemma_quantities(G, spec, mesh, problem, config.stabilization(),
                         config.quad_degree)
    region = classify_point(mesh.transition, *star)
    return {"N": mesh.n, "epsilon": problem.epsilon, "k": k,
            "sigma_x": spec.sigma_x, "sigma_y": spec.sigma_y,
            "region": region, "star": star, "quantities": q}


def bound_for_region(region: Region, n: int, sigma_x: float) -> float:
    """Theorem bound scale: N^2 sigma_x in the smooth region, N ln N in the
    outflow layer; no bound is stated elsewhere."""
    if region == Region.S:
        return float(n * n * sigma_x)
    if region == Region.X:
        return float(n * np.log(n))
    return float("nan")


@dataclass(frozen=True)
class ScalingRow:
    n: int
    epsilon: float
    k: float
    region: Region
    enorm_sq: float
    wnorm_sq: float
    bound: float
    ratio: float

    @property
    def theorem_margin(self) -> float:
        return 8.0 * self.wnorm_sq - self.enorm_sq


def green_scaling_study(config: StudyConfig) -> list[ScalingRow]:
    """Energy norms of the Green function across the (epsilon, N) grid.

    Per-row failures are reported on stderr-like stdout and skipped, so a
    sweep survives individual bad configurations.
    """
    rows: list[ScalingRow] = []
    for epsilon in config.epsilons:
        for n in config.ns:
            try:
                mesh, problem, solver = _green_setup(config, epsilon, n)
                data = _lemma_row(config, mesh, problem, solver, config.k)
            except Exception as exc:  # row isolation by design
                print(f"scaling row (epsilon={epsilon}, N={n}) failed: {exc}")
                continue
            q: LemmaQuantities = data["quantities"]
            bound = bound_for_region(data["region"], n, data["sigma_x"])
            rows.append(ScalingRow(
                n=n, epsilon=epsilon, k=config.k, region=data["region"],
                enorm_sq=q.energy_norm_sq, wnorm_sq=q.weighted_norm_sq,
                bound=bound, ratio=q.energy_norm_sq / bound,
            ))
    return rows


@dataclass(frozen=True)
class LemmaSweepRow:
    n: int
    epsilon: float
    k: float
    sigma_x: float
    sigma_y: float
    quantities: LemmaQuantities


@dataclass(frozen=True)
class LemmaSweepResult:
    rows: tuple[LemmaSweepRow, ...]
    k0: float | None

    def row_at(self, k: float) -> LemmaSweepRow:
        for row in self.rows:
            if row.k == k:
                return row
        raise KeyError(f"no sweep row at k={k}")


def lemma_k_sweep(config: StudyConfig, epsilon: float | None = None,
                  n: int | None = None) -> LemmaSweepResult:
    """Sweep k and locate the smallest grid point from which the quarter
    bound on a_sd(omega^{-1}G, G) and the 1/16 defect bound both hold."""
    epsilon = config.epsilons[0] if epsilon is None else epsilon
    n = config.ns[0] if n is None else n
    mesh, problem, solver = _green_setup(config, epsilon, n)
    rows = []
    for k in config.k_grid:
        data = _lemma_row(config, mesh, problem, solver, k)
        rows.append(LemmaSweepRow(n=n, epsilon=epsilon, k=k,
                                  sigma_x=data["sigma_x"], sigma_y=data["sigma_y"],
                                  quantities=data["quantities"]))
    k0 = None
    for idx in range(len(rows)):
        tail = rows[idx:]
        if all(r.quantities.lemma4_ratio >= LEMMA4_THRESHOLD
               and r.quantities.lemma6_ratio <= LEMMA6_THRESHOLD for r in tail):
            k0 = rows[idx].k
            break
    return LemmaSweepResult(rows=tuple(rows), k0=k0)


@dataclass(frozen=True)
class CoercivityReport:
    min_ratio: float
    per_case: dict[tuple[float, int], float]
    trials: int

    @property
    def passed(self) -> bool:
        return self.min_ratio >= COERCIVITY_THRESHOLD


def coercivity_check(config: StudyConfig) -> CoercivityReport:
    """Minimum of a_sd(v, v)/|||v|||^2 over seeded random interior vectors.

    Meshes are built non-strictly so that mildly perturbed cases (capped
    transition parameters) can be sampled too; coercivity does not depend
    on the layer-resolving regime.
    """
    rng = np.random.default_rng(config.seed)
    cases = [(eps, n) for eps in config.epsilons for n in config.ns]
    per_trial = max(1, -(-config.trials // len(cases)))
    per_case: dict[tuple[float, int], float] = {}
    cfg = config.stabilization()
    for eps, n in cases:
        tp = transition_params(eps, config.beta, n, strict=False)
        mesh = build_mesh(n, tp)
        problem = config.make_problem(eps)
        system = assemble_system(mesh, problem, cfg)
        worst = np.inf
        for _ in range(per_trial):
            v = rng.standard_normal(system.dimension)
            fv = FEFunction.from_interior(mesh, v)
            num = float(v @ (system.matrix @ v))
            den = float(element_energy_sq(fv, problem, cfg).sum())
            worst = min(worst, num / den)
        per_case[(eps, n)] = worst
    return CoercivityReport(
        min_ratio=min(per_case.values()), per_case=per_case,
        trials=per_trial * len(cases),
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, Region):
        return value.label
    return str(value)


def write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in columns])
    return path


def scaling_rows_as_dicts(rows: list[ScalingRow]) -> list[dict]:
    return [{"N": r.n, "epsilon": r.epsilon, "k": r.k, "region": r.region,
             "enorm_sq": r.enorm_sq, "wnorm_sq": r.wnorm_sq,
             "bound": r.bound, "ratio": r.ratio} for r in rows]


def lemma_rows_as_dicts(rows) -> list[dict]:
    out = []
    for r in rows:
        q = r.quantities
        out.append({"N": r.n, "epsilon": r.epsilon, "k": r.k,
                    "sigma_x": r.sigma_x, "sigma_y": r.sigma_y,
                    "a_w": q.a_w, "point_val": q.point_val, "defect": q.defect,
                    "wnorm_sq": q.weighted_norm_sq, "enorm_sq": q.energy_norm_sq,
                    "lemma4_ratio": q.lemma4_ratio, "lemma6_ratio": q.lemma6_ratio})
    return out


def emit_plot(csv_path, x_column: str, y_column: str, log_flags: str = "",
              out_path=None):
    """Scatter/line plot of two CSV columns into a self-contained SVG.

    log_flags is any subset of "xy".  An empty table produces an empty-axes
    SVG and still succeeds.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or x_column not in reader.fieldnames \
                or y_column not in reader.fieldnames:
            raise ValueError(
                f"columns ({x_column!r}, {y_column!r}) not found in {csv_path.name}; "
                f"available: {reader.fieldnames}"
            )
        xs, ys = [], []
        for row in reader:
            xs.append(float(row[x_column]))
            ys.append(float(row[y_column]))

    out_path = Path(out_path) if out_path else csv_path.with_suffix(f".{y_column}.svg")
    fig, ax = plt.subplots(figsize=(5.0, 3.75))
    if xs:
        order = np.argsort(xs)
        ax.plot(np.asarray(xs)[order], np.asarray(ys)[order], "o-")
    if "x" in log_flags:
        ax.set_xscale("log")
    if "y" in log_flags:
        ax.set_yscale("log")
    ax.set_xlabel(x_column)
    ax.set_ylabel(y_column)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path
