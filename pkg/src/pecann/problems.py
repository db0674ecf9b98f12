"""Benchmark problem definitions: domains, residuals, samplers, references.

Each builder returns a :class:`ProblemSpec` bundling collocation blocks,
an objective term, constraint terms, training defaults, and evaluation
helpers.  Residual callables are written against the jet protocol
(``jet.value``, ``jet.d1``, ``jet.d2`` with shapes ``(N, m)``, ``(N, d,
m)``, ``(N, d, m)``) and work identically on taped variables during
training and plain arrays during evaluation.

Forward problems use the PDE residual as the objective and all known
conditions (boundary, initial, interface flux, periodicity) as equality
constraints.  Inverse problems flip the roles: the data misfit over
sensor measurements is the objective and the PDE with its known
conditions enters as constraints.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .alm import Block, Term
from .exceptions import ConfigurationError
from .metrics import l_inf, mae, rel_l2, rms_standard
from .network import forward_value, init_network
from .sampling import (
    PointSet,
    boundary_trace,
    fixed_points,
    periodic_faces,
    sobol_box,
    uniform_box,
)

__all__ = [
    "ProblemSpec",
    "ExperimentDefaults",
    "NoisyDataset",
    "make_noisy",
    "load_ghia_table",
    "read_reference_csv",
    "composite_heat",
    "wave",
    "convection",
    "lid_driven_cavity",
    "inverse_boundary",
    "inverse_source",
    "mixing_fronts",
    "build_problem",
    "available_problems",
]


@dataclass(frozen=True)
class ExperimentDefaults:
    """Reference training configuration used when the caller sets nothing."""

    layer_sizes: tuple
    epochs: int
    lbfgs_max_iterations: int
    eval_grid: tuple


@dataclass(frozen=True)
class ProblemSpec:
    """A complete training problem plus its evaluation protocol."""

    name: str
    description: str
    coordinates: tuple
    field_names: tuple
    bounds: tuple
    blocks: tuple
    objective: Term
    constraints: tuple
    defaults: ExperimentDefaults
    exact: object = None  # callable(coords (N, d)) -> (N, m), when known
    evaluate: object = None  # callable(model, grid_shape) -> metrics dict
    solution_table: object = None  # callable(model, grid_shape) -> (cols, array)

    def init_model(self, seed, layer_sizes=None):
        return init_network(layer_sizes or self.defaults.layer_sizes, seed)


@dataclass(frozen=True)
class NoisyDataset:
    """Clean targets alongside their noise-corrupted measurements."""

    clean: np.ndarray
    noisy: np.ndarray
    fraction: float


def make_noisy(values, fraction, seed):
    """Add zero-mean Gaussian noise scaled to the sample spread.

    The noise standard deviation is ``fraction`` times the sample standard
    deviation of ``values``; a zero fraction returns the values untouched.
    """
    values = np.asarray(values, dtype=np.float64)
    if fraction < 0.0:
        raise ConfigurationError("noise fraction must be >= 0")
    if fraction == 0.0:
        return NoisyDataset(values.copy(), values.copy(), 0.0)
    if values.size < 2:
        raise ConfigurationError(
            "need at least two values for a noise scale (stddev undefined)"
        )
    scale = fraction * np.std(values, ddof=1)
    rng = np.random.default_rng(seed)
    noisy = values + rng.normal(0.0, scale, size=values.shape)
    return NoisyDataset(values.copy(), noisy, float(fraction))


def load_ghia_table(re, component):
    """Vendored lid-driven-cavity centerline benchmark (17-point tables).

    ``component`` is ``u`` (vertical centerline, coord = y) or ``v``
    (horizontal centerline, coord = x).  Returns (coords, values).
    """
    if component not in ("u", "v"):
        raise ConfigurationError("component must be 'u' or 'v'")
    if int(re) not in (100, 400, 1000):
        raise ConfigurationError(f"no benchmark table for Re={re}")
    name = f"ghia_{component}_re{int(re)}.csv"
    path = resources.files("pecann").joinpath("data", name)
    rows = np.loadtxt(str(path), delimiter=",", skiprows=1)
    return rows[:, 0], rows[:, 1]


def read_reference_csv(path):
    """Read a high-fidelity velocity file with header ``x,y,u,v``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["x", "y", "u", "v"]:
            raise ConfigurationError(
                f"reference CSV must have header x,y,u,v, got {header}"
            )
        rows = np.array([[float(v) for v in row] for row in reader])
    if rows.size == 0:
        raise ConfigurationError("reference CSV holds no data rows")
    return rows[:, :2], rows[:, 2:]


def _seedseq(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _spawn(seed, k):
    return _seedseq(seed).spawn(k)


def _stack_faces(parts, columns):
    return PointSet(np.vstack([p.coords for p in parts]), columns)


def _grid(bounds, shape):
    axes = [np.linspace(lo, hi, int(n)) for (lo, hi), n in zip(bounds, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _field_metrics(pred, exact, field_names):
    out = {}
    for j, name in enumerate(field_names):
        out[f"rel_l2_{name}"] = rel_l2(pred[:, j], exact[:, j])
        out[f"mae_{name}"] = mae(pred[:, j], exact[:, j])
        out[f"l_inf_{name}"] = l_inf(pred[:, j], exact[:, j])
        out[f"rms_standard_{name}"] = rms_standard(pred[:, j], exact[:, j])
    return out


def _make_grid_evaluator(bounds, field_names, exact):
    def evaluate(model, grid_shape):
        coords = _grid(bounds, grid_shape)
        pred = forward_value(model, coords)
        return _field_metrics(pred, exact(coords), field_names)

    return evaluate


def _make_solution_table(bounds, coordinates, field_names, exact):
    def table(model, grid_shape):
        coords = _grid(bounds, grid_shape)
        pred = forward_value(model, coords)
        columns = list(coordinates)
        parts = [coords]
        for j, name in enumerate(field_names):
            columns.append(f"{name}_pred")
            parts.append(pred[:, j : j + 1])
        if exact is not None:
            ex = exact(coords)
            for j, name in enumerate(field_names):
                columns.append(f"{name}_exact")
                parts.append(ex[:, j : j + 1])
        return tuple(columns), np.hstack(parts)

    return table


# ---------------------------------------------------------------------------
# composite heat conduction (two materials, forward, interface flux)
# ---------------------------------------------------------------------------

_HEAT_BOUNDS = ((-1.0, 1.0), (0.0, 2.0))


def _heat_kappa(x):
    return np.where(x < 0.0, 1.0, 3.0 * np.pi)


def _heat_source(coords):
    x, t = coords[:, 0], coords[:, 1]
    left = np.sin(3.0 * np.pi * x) * (1.0 + 9.0 * np.pi ** 2 * t)
    return np.where(x < 0.0, left, x)


def _heat_exact(coords):
    x, t = coords[:, 0], coords[:, 1]
    u = np.where(x < 0.0, np.sin(3.0 * np.pi * x) * t, t * x)
    sigma = np.where(
        x < 0.0, 3.0 * np.pi * t * np.cos(3.0 * np.pi * x), 3.0 * np.pi * t
    )
    return np.column_stack([u, sigma])


def composite_heat(n_interior=10000, n_boundary=5000, n_initial=5000):
    """Heat conduction through two perfectly bonded materials.

    Fields ``(u, sigma)`` on x in [-1, 1], t in [0, 2] with conductivity 1
    for x < 0 and 3*pi for x > 0.  The first-order system keeps the flux
    ``sigma = kappa * u_x`` as a separate network output, so the interface
    conditions (continuity of u and sigma at x = 0) hold by construction
    and the network never differentiates across the material jump.
    """
    columns = ("x", "t")
    on_interface = lambda c: c[:, 0] == 0.0

    def boundary_sampler(seed):
        s0, s1 = _spawn(seed, 2)
        return _stack_faces(
            [boundary_trace(_HEAT_BOUNDS, 0, -1.0, n_boundary, s0, columns),
             boundary_trace(_HEAT_BOUNDS, 0, 1.0, n_boundary, s1, columns)],
            columns,
        )

    blocks = (
        Block("interior", lambda seed: uniform_box(
            _HEAT_BOUNDS, n_interior, seed, exclude=on_interface,
            columns=columns)),
        Block("boundary", boundary_sampler),
        Block("initial", lambda seed: boundary_trace(
            _HEAT_BOUNDS, 1, 0.0, n_initial, seed, columns)),
    )

    objective = Term(
        name="physics",
        block="interior",
        order=1,
        residual=lambda jet, pts, aux:
            jet.d1[:, 1, 0] - jet.d1[:, 0, 1] - aux["source"],
        prepare=lambda pts, seed: {"source": _heat_source(pts)},
    )
    constraints = (
        Term(
            name="flux",
            block="interior",
            order=1,
            residual=lambda jet, pts, aux:
                jet.value[:, 1] - aux["kappa"] * jet.d1[:, 0, 0],
            prepare=lambda pts, seed: {"kappa": _heat_kappa(pts[:, 0])},
        ),
        Term(
            name="boundary",
            block="boundary",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
            prepare=lambda pts, seed: {"target": _heat_exact(pts)[:, 0]},
        ),
        Term(
            name="initial",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0],
        ),
    )
    fields = ("u", "sigma")
    return ProblemSpec(
        name="composite_heat",
        description="two-material heat conduction with interface flux",
        coordinates=columns,
        field_names=fields,
        bounds=_HEAT_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults((2, 30, 30, 30, 2), 5000, 5, (256, 101)),
        exact=_heat_exact,
        evaluate=_make_grid_evaluator(_HEAT_BOUNDS, fields, _heat_exact),
        solution_table=_make_solution_table(
            _HEAT_BOUNDS, columns, fields, _heat_exact),
    )


# ---------------------------------------------------------------------------
# 1-d wave equation (forward, second order in space and time)
# ---------------------------------------------------------------------------

_WAVE_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


def _wave_exact(coords):
    x, t = coords[:, 0], coords[:, 1]
    u = (
        np.sin(np.pi * x) * np.cos(2.0 * np.pi * t)
        + 0.5 * np.sin(4.0 * np.pi * x) * np.cos(8.0 * np.pi * t)
    )
    return u[:, None]


def wave(n_interior=300, n_boundary=300, n_initial=300):
    """Wave equation ``u_tt = 4 u_xx`` with fixed ends and a two-mode start.

    Boundary values, initial displacement and initial velocity are three
    separately weighted constraint groups.
    """
    columns = ("x", "t")

    def boundary_sampler(seed):
        s0, s1 = _spawn(seed, 2)
        half = n_boundary // 2
        return _stack_faces(
            [boundary_trace(_WAVE_BOUNDS, 0, 0.0, half, s0, columns),
             boundary_trace(_WAVE_BOUNDS, 0, 1.0, n_boundary - half, s1,
                            columns)],
            columns,
        )

    blocks = (
        Block("interior", lambda seed: uniform_box(
            _WAVE_BOUNDS, n_interior, seed, columns=columns)),
        Block("boundary", boundary_sampler),
        Block("initial", lambda seed: boundary_trace(
            _WAVE_BOUNDS, 1, 0.0, n_initial, seed, columns)),
    )
    objective = Term(
        name="physics",
        block="interior",
        order=2,
        residual=lambda jet, pts, aux:
            jet.d2[:, 1, 0] - 4.0 * jet.d2[:, 0, 0],
    )
    constraints = (
        Term(
            name="boundary",
            block="boundary",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0],
        ),
        Term(
            name="initial_value",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
            prepare=lambda pts, seed: {
                "target": np.sin(np.pi * pts[:, 0])
                + 0.5 * np.sin(4.0 * np.pi * pts[:, 0])
            },
        ),
        Term(
            name="initial_velocity",
            block="initial",
            order=1,
            residual=lambda jet, pts, aux: jet.d1[:, 1, 0],
        ),
    )
    return ProblemSpec(
        name="wave",
        description="1-d wave equation with two standing modes",
        coordinates=columns,
        field_names=("u",),
        bounds=_WAVE_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults((2, 50, 1), 10000, 20, (256, 101)),
        exact=_wave_exact,
        evaluate=_make_grid_evaluator(_WAVE_BOUNDS, ("u",), _wave_exact),
        solution_table=_make_solution_table(
            _WAVE_BOUNDS, columns, ("u",), _wave_exact),
    )


# ---------------------------------------------------------------------------
# linear convection (forward, periodic, resampled collocation)
# ---------------------------------------------------------------------------

_CONVECTION_BOUNDS = ((0.0, 2.0 * np.pi), (0.0, 1.0))
_CONVECTION_SPEED = 40.0


def _convection_exact(coords):
    x, t = coords[:, 0], coords[:, 1]
    return np.sin(x - _CONVECTION_SPEED * t)[:, None]


def convection(n_interior=512, n_boundary=512, n_initial=512):
    """Linear convection at speed 40 with periodic ends.

    All three sample sets are redrawn every epoch; the periodicity
    constraint matches paired samples on the two ends.
    """
    columns = ("x", "t")
    blocks = (
        Block("interior", lambda seed: uniform_box(
            _CONVECTION_BOUNDS, n_interior, seed, columns=columns),
            resample=True),
        Block("periodic", lambda seed: periodic_faces(
            _CONVECTION_BOUNDS, 0, n_boundary, seed, columns=columns),
            resample=True),
        Block("initial", lambda seed: boundary_trace(
            _CONVECTION_BOUNDS, 1, 0.0, n_initial, seed, columns),
            resample=True),
    )
    objective = Term(
        name="physics",
        block="interior",
        order=1,
        residual=lambda jet, pts, aux:
            jet.d1[:, 1, 0] + _CONVECTION_SPEED * jet.d1[:, 0, 0],
    )
    constraints = (
        Term(
            name="periodic",
            block="periodic",
            order=0,
            residual=lambda jet, pts, aux:
                jet.value[: aux["pairs"], 0] - jet.value[aux["pairs"] :, 0],
            prepare=lambda pts, seed: {"pairs": len(pts) // 2},
        ),
        Term(
            name="initial",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
            prepare=lambda pts, seed: {"target": np.sin(pts[:, 0])},
        ),
    )
    return ProblemSpec(
        name="convection",
        description="linear convection, speed 40, periodic domain",
        coordinates=columns,
        field_names=("u",),
        bounds=_CONVECTION_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults(
            (2, 50, 50, 50, 50, 1), 5000, 20, (256, 101)),
        exact=_convection_exact,
        evaluate=_make_grid_evaluator(
            _CONVECTION_BOUNDS, ("u",), _convection_exact),
        solution_table=_make_solution_table(
            _CONVECTION_BOUNDS, columns, ("u",), _convection_exact),
    )


# ---------------------------------------------------------------------------
# lid-driven cavity (forward, steady incompressible Navier-Stokes)
# ---------------------------------------------------------------------------

_CAVITY_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


def _cavity_momentum(jet, pts, aux):
    inv_re = aux["inv_re"]
    u = jet.value[:, 0]
    v = jet.value[:, 1]
    fx = (
        u * jet.d1[:, 0, 0] + v * jet.d1[:, 1, 0] + jet.d1[:, 0, 2]
        - inv_re * (jet.d2[:, 0, 0] + jet.d2[:, 1, 0])
    )
    fy = (
        u * jet.d1[:, 0, 1] + v * jet.d1[:, 1, 1] + jet.d1[:, 1, 2]
        - inv_re * (jet.d2[:, 0, 1] + jet.d2[:, 1, 1])
    )
    return (fx, fy)


def lid_driven_cavity(re=100, n_interior=10000, n_wall=64, n_lid=64,
                      data_csv=None, n_data=100):
    """Steady lid-driven cavity flow at Reynolds number ``re``.

    Outputs ``(u, v, p)``.  The momentum residual is the objective;
    continuity, the no-slip walls, the moving lid (which takes precedence
    at the upper corners) and a single pressure anchor are constraints.
    An optional reference CSV (``x,y,u,v``) adds ``n_data`` randomly
    chosen interior velocity samples as one more constraint group, which
    the higher-Re cases need to converge to the benchmark solution.
    """
    columns = ("x", "y")

    def wall_sampler(seed):
        seeds = _spawn(seed, 3)
        faces = [
            boundary_trace(_CAVITY_BOUNDS, 0, 0.0, n_wall, seeds[0], columns),
            boundary_trace(_CAVITY_BOUNDS, 0, 1.0, n_wall, seeds[1], columns),
            boundary_trace(_CAVITY_BOUNDS, 1, 0.0, n_wall, seeds[2], columns),
        ]
        return _stack_faces(faces, columns)

    blocks = [
        Block("interior", lambda seed: uniform_box(
            _CAVITY_BOUNDS, n_interior, seed, columns=columns)),
        Block("walls", wall_sampler),
        Block("lid", lambda seed: boundary_trace(
            _CAVITY_BOUNDS, 1, 1.0, n_lid, seed, columns)),
        Block("anchor", lambda seed: fixed_points([[0.5, 0.0]], columns)),
    ]
    constraints = [
        Term(
            name="continuity",
            block="interior",
            order=1,
            residual=lambda jet, pts, aux: jet.d1[:, 0, 0] + jet.d1[:, 1, 1],
        ),
        Term(
            name="walls",
            block="walls",
            order=0,
            residual=lambda jet, pts, aux: (jet.value[:, 0], jet.value[:, 1]),
        ),
        Term(
            name="lid",
            block="lid",
            order=0,
            residual=lambda jet, pts, aux:
                (jet.value[:, 0] - 1.0, jet.value[:, 1]),
        ),
        Term(
            name="pressure_anchor",
            block="anchor",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 2],
        ),
    ]
    if data_csv is not None:
        coords_all, values_all = read_reference_csv(data_csv)

        def data_sampler(seed):
            rng = np.random.default_rng(seed)
            take = min(n_data, len(coords_all))
            idx = rng.choice(len(coords_all), size=take, replace=False)
            return PointSet(coords_all[idx], columns)

        def data_prepare(pts, seed):
            # match selected coordinates back to their file rows
            lookup = {tuple(c): i for i, c in enumerate(coords_all)}
            idx = np.array([lookup[tuple(c)] for c in pts])
            return {"target": values_all[idx]}

        blocks.append(Block("data", data_sampler))
        constraints.append(Term(
            name="data",
            block="data",
            order=0,
            residual=lambda jet, pts, aux: (
                jet.value[:, 0] - aux["target"][:, 0],
                jet.value[:, 1] - aux["target"][:, 1],
            ),
            prepare=data_prepare,
        ))

    objective = Term(
        name="momentum",
        block="interior",
        order=2,
        residual=_cavity_momentum,
        prepare=lambda pts, seed: {"inv_re": 1.0 / float(re)},
    )

    u_coord, u_ref = load_ghia_table(re, "u") if re in (100, 400, 1000) else (None, None)
    v_coord, v_ref = load_ghia_table(re, "v") if re in (100, 400, 1000) else (None, None)

    def evaluate(model, grid_shape):
        out = {}
        if u_ref is None:
            return out
        u_pts = np.column_stack([np.full_like(u_coord, 0.5), u_coord])
        v_pts = np.column_stack([v_coord, np.full_like(v_coord, 0.5)])
        u_pred = forward_value(model, u_pts)[:, 0]
        v_pred = forward_value(model, v_pts)[:, 1]
        out["rms_centerline_u"] = rms_standard(u_pred, u_ref)
        out["rms_centerline_v"] = rms_standard(v_pred, v_ref)
        out["rms_centerline"] = rms_standard(
            np.concatenate([u_pred, v_pred]), np.concatenate([u_ref, v_ref])
        )
        return out

    fields = ("u", "v", "p")
    return ProblemSpec(
        name=f"cavity_re{int(re)}",
        description=f"lid-driven cavity, Re={int(re)}",
        coordinates=columns,
        field_names=fields,
        bounds=_CAVITY_BOUNDS,
        blocks=tuple(blocks),
        objective=objective,
        constraints=tuple(constraints),
        defaults=ExperimentDefaults(
            (2, 30, 30, 30, 30, 3), 2000, 20, (257, 257)),
        exact=None,
        evaluate=evaluate,
        solution_table=_make_solution_table(
            _CAVITY_BOUNDS, columns, fields, None),
    )


# ---------------------------------------------------------------------------
# inverse problem: recover a withheld boundary from sparse noisy sensors
# ---------------------------------------------------------------------------

_INVB_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


def _invb_exact(coords):
    x, t = coords[:, 0], coords[:, 1]
    return (np.cos(np.pi * x) * np.exp(-np.pi ** 2 * t))[:, None]


def inverse_boundary(n_sensor=128, n_interior=512, n_boundary=64,
                     n_initial=64, noise_fraction=0.1):
    """Heat equation with the x=0 boundary withheld.

    Noisy interior sensor lines at x = 0.2 and x = 0.6 drive the data
    misfit objective; the diffusion residual, the known x=1 boundary and
    the initial profile are constraints.  Evaluation reports how well the
    trained network reproduces the withheld boundary trace u(0, t).
    """
    columns = ("x", "t")

    def sensor_sampler(seed):
        s0, s1 = _spawn(seed, 2)
        lines = []
        for x_line, s in ((0.2, s0), (0.6, s1)):
            t = np.random.default_rng(s).uniform(0.0, 1.0, n_sensor)
            lines.append(np.column_stack([np.full(n_sensor, x_line), t]))
        return PointSet(np.vstack(lines), columns)

    blocks = (
        Block("sensors", sensor_sampler),
        Block("interior", lambda seed: uniform_box(
            _INVB_BOUNDS, n_interior, seed, columns=columns)),
        Block("boundary", lambda seed: boundary_trace(
            _INVB_BOUNDS, 0, 1.0, n_boundary, seed, columns)),
        Block("initial", lambda seed: boundary_trace(
            _INVB_BOUNDS, 1, 0.0, n_initial, seed, columns)),
    )
    objective = Term(
        name="data",
        block="sensors",
        order=0,
        residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
        prepare=lambda pts, seed: {
            "target": make_noisy(
                _invb_exact(pts)[:, 0], noise_fraction, seed).noisy
        },
    )
    constraints = (
        Term(
            name="physics",
            block="interior",
            order=2,
            residual=lambda jet, pts, aux: jet.d1[:, 1, 0] - jet.d2[:, 0, 0],
        ),
        Term(
            name="boundary",
            block="boundary",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
            prepare=lambda pts, seed: {"target": _invb_exact(pts)[:, 0]},
        ),
        Term(
            name="initial",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux:
                jet.value[:, 0] - np.cos(np.pi * pts[:, 0]),
        ),
    )

    base_eval = _make_grid_evaluator(_INVB_BOUNDS, ("u",), _invb_exact)

    def evaluate(model, grid_shape):
        out = base_eval(model, grid_shape)
        t = np.linspace(0.0, 1.0, 256)
        trace = np.column_stack([np.zeros_like(t), t])
        pred = forward_value(model, trace)[:, 0]
        out["rel_l2_boundary"] = rel_l2(pred, np.exp(-np.pi ** 2 * t))
        return out

    return ProblemSpec(
        name="inverse_boundary",
        description="recover a withheld boundary from noisy sensors",
        coordinates=columns,
        field_names=("u",),
        bounds=_INVB_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults((2, 30, 30, 30, 1), 5000, 20, (256, 101)),
        exact=_invb_exact,
        evaluate=evaluate,
        solution_table=_make_solution_table(
            _INVB_BOUNDS, columns, ("u",), _invb_exact),
    )


# ---------------------------------------------------------------------------
# inverse problem: recover a distributed source term
# ---------------------------------------------------------------------------

_INVS_BOUNDS = ((0.0, 1.0), (0.0, 1.0))


def _invs_exact(coords):
    x, t = coords[:, 0], coords[:, 1]
    sx = np.sin(np.pi * x)
    u = (1.0 + t * t) * sx
    s = 2.0 * t * sx + np.pi ** 2 * (1.0 + t * t) * sx
    return np.column_stack([u, s])


def inverse_source(n_measure=512, n_interior=4096, n_boundary=128,
                   n_initial=128, noise_fraction=0.1):
    """Heat equation with an unknown distributed source.

    The network outputs ``(u, s)`` jointly; noisy field measurements of u
    form the objective while the forced diffusion residual couples s to u.
    """
    columns = ("x", "t")

    def boundary_sampler(seed):
        s0, s1 = _spawn(seed, 2)
        return _stack_faces(
            [boundary_trace(_INVS_BOUNDS, 0, 0.0, n_boundary, s0, columns),
             boundary_trace(_INVS_BOUNDS, 0, 1.0, n_boundary, s1, columns)],
            columns,
        )

    blocks = (
        Block("measurements", lambda seed: uniform_box(
            _INVS_BOUNDS, n_measure, seed, columns=columns)),
        Block("interior", lambda seed: uniform_box(
            _INVS_BOUNDS, n_interior, seed, columns=columns)),
        Block("boundary", boundary_sampler),
        Block("initial", lambda seed: boundary_trace(
            _INVS_BOUNDS, 1, 0.0, n_initial, seed, columns)),
    )
    objective = Term(
        name="data",
        block="measurements",
        order=0,
        residual=lambda jet, pts, aux: jet.value[:, 0] - aux["target"],
        prepare=lambda pts, seed: {
            "target": make_noisy(
                _invs_exact(pts)[:, 0], noise_fraction, seed).noisy
        },
    )
    constraints = (
        Term(
            name="physics",
            block="interior",
            order=2,
            residual=lambda jet, pts, aux:
                jet.d1[:, 1, 0] - jet.d2[:, 0, 0] - jet.value[:, 1],
        ),
        Term(
            name="boundary",
            block="boundary",
            order=0,
            residual=lambda jet, pts, aux: jet.value[:, 0],
        ),
        Term(
            name="initial",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux:
                jet.value[:, 0] - np.sin(np.pi * pts[:, 0]),
        ),
    )
    fields = ("u", "s")
    return ProblemSpec(
        name="inverse_source",
        description="recover a distributed heat source from noisy data",
        coordinates=columns,
        field_names=fields,
        bounds=_INVS_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults((2, 30, 30, 30, 2), 5000, 20, (256, 101)),
        exact=_invs_exact,
        evaluate=_make_grid_evaluator(_INVS_BOUNDS, fields, _invs_exact),
        solution_table=_make_solution_table(
            _INVS_BOUNDS, columns, fields, _invs_exact),
    )


# ---------------------------------------------------------------------------
# passive scalar mixing in a steady vortex (forward, 2+1 dimensional)
# ---------------------------------------------------------------------------

_MIXING_BOUNDS = ((-4.0, 4.0), (-4.0, 4.0), (0.0, 4.0))
_NU_T_MAX = 0.385
_MIXING_T_FINAL = 4.0


def _mixing_omega(x, y):
    r = np.sqrt(x * x + y * y)
    nu_t = (1.0 / np.cosh(r)) ** 2 * np.tanh(r)
    safe = np.where(r > 1e-12, r, 1.0)
    return np.where(r > 1e-12, nu_t / (safe * _NU_T_MAX), 1.0 / _NU_T_MAX)


def _mixing_velocity(coords):
    x, y = coords[:, 0], coords[:, 1]
    omega = _mixing_omega(x, y)
    return -omega * y, omega * x


def _mixing_exact(coords):
    x, y, t = coords[:, 0], coords[:, 1], coords[:, 2]
    omega = _mixing_omega(x, y)
    xi = -np.tanh(
        0.5 * y * np.cos(omega * t) - 0.5 * x * np.sin(omega * t)
    )
    return xi[:, None]


def mixing_fronts(n_interior=10000, n_face=512, n_initial=512):
    """Passive scalar stirred by a steady vortex (zero-flux side walls).

    Interior collocation uses the Sobol sequence (the vortex center,
    where the angular velocity formula degenerates, is excluded); each of
    the four side faces contributes zero-normal-gradient points.
    """
    columns = ("x", "y", "t")
    at_center = lambda c: (c[:, 0] == 0.0) & (c[:, 1] == 0.0)

    def face_sampler(seed):
        seeds = _spawn(seed, 4)
        spec = [(0, -4.0), (0, 4.0), (1, -4.0), (1, 4.0)]
        faces = [
            boundary_trace(_MIXING_BOUNDS, axis, value, n_face, s, columns)
            for (axis, value), s in zip(spec, seeds)
        ]
        return _stack_faces(faces, columns)

    def initial_sampler(seed):
        rng = np.random.default_rng(seed)
        xy = rng.uniform(-4.0, 4.0, size=(n_initial, 2))
        return PointSet(np.column_stack([xy, np.zeros(n_initial)]), columns)

    blocks = (
        Block("interior", lambda seed: sobol_box(
            _MIXING_BOUNDS, n_interior, exclude=at_center, columns=columns)),
        Block("faces", face_sampler),
        Block("initial", initial_sampler),
    )

    objective = Term(
        name="physics",
        block="interior",
        order=1,
        residual=lambda jet, pts, aux:
            jet.d1[:, 2, 0] + aux["u"] * jet.d1[:, 0, 0]
            + aux["v"] * jet.d1[:, 1, 0],
        prepare=lambda pts, seed: dict(
            zip(("u", "v"), _mixing_velocity(pts))),
    )
    constraints = (
        Term(
            name="flux",
            block="faces",
            order=1,
            residual=lambda jet, pts, aux:
                jet.d1[aux["rows"], aux["axis"], 0],
            # faces stack x-low, x-high, y-low, y-high; normal axis by row
            prepare=lambda pts, seed: {
                "rows": np.arange(len(pts)),
                "axis": np.repeat(np.array([0, 0, 1, 1], dtype=np.intp),
                                  len(pts) // 4),
            },
        ),
        Term(
            name="initial",
            block="initial",
            order=0,
            residual=lambda jet, pts, aux:
                jet.value[:, 0] + np.tanh(0.5 * pts[:, 1]),
        ),
    )

    def evaluate(model, grid_shape):
        n = int(grid_shape[0])
        coords = _grid(_MIXING_BOUNDS[:2], (n, n))
        coords = np.column_stack([
            coords, np.full(len(coords), _MIXING_T_FINAL)
        ])
        pred = forward_value(model, coords)
        exact = _mixing_exact(coords)
        return _field_metrics(pred, exact, ("xi",))

    def solution_table(model, grid_shape):
        n = int(grid_shape[0])
        coords = _grid(_MIXING_BOUNDS[:2], (n, n))
        coords = np.column_stack([
            coords, np.full(len(coords), _MIXING_T_FINAL)
        ])
        pred = forward_value(model, coords)
        exact = _mixing_exact(coords)
        return ("x", "y", "t", "xi_pred", "xi_exact"), np.hstack(
            [coords, pred, exact]
        )

    return ProblemSpec(
        name="mixing_fronts",
        description="passive scalar mixing in a steady vortex",
        coordinates=columns,
        field_names=("xi",),
        bounds=_MIXING_BOUNDS,
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        defaults=ExperimentDefaults(
            (3, 30, 30, 30, 30, 1), 5000, 20, (64, 64)),
        exact=_mixing_exact,
        evaluate=evaluate,
        solution_table=solution_table,
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_BUILDERS = {
    "composite_heat": composite_heat,
    "wave": wave,
    "convection": convection,
    "cavity_re100": lambda **kw: lid_driven_cavity(re=100, **kw),
    "cavity_re400": lambda **kw: lid_driven_cavity(re=400, **kw),
    "cavity_re1000": lambda **kw: lid_driven_cavity(re=1000, **kw),
    "inverse_boundary": inverse_boundary,
    "inverse_source": inverse_source,
    "mixing_fronts": mixing_fronts,
}


def available_problems():
    """Registered problem names, stable order."""
    return tuple(_BUILDERS)


def build_problem(name, **overrides):
    """Instantiate a registered problem, applying point-count overrides."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem '{name}'; available: "
            + ", ".join(available_problems())
        ) from None
    return builder(**overrides)
