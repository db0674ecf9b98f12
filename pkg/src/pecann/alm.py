"""Augmented Lagrangian training with adaptive penalty updates.

A training problem is an objective term plus equality-constraint groups

    L(theta; lambda, mu) = J(theta)
        + sum_i lambda_i C_i(theta) + 0.5 * sum_i mu_i C_i(theta)^2

minimized over the network parameters by short L-BFGS bursts (the primal
step), after which the multipliers follow the dual ascent rule
``lambda_i <- lambda_i + mu_i C_i`` under one of three penalty schedules:

* ``mpu``: one shared penalty grown by ``beta`` every epoch up to ``mu_max``.
* ``cpu``: the shared penalty grows only in epochs where the constraint
  norm failed to decrease; otherwise the multipliers advance.
* ``apu``: each constraint keeps an RMS-filtered square of its own history
  and takes ``mu_i = gamma / (sqrt(vbar_i) + eps)``, so persistently large
  constraints get small penalties and vice versa, per epoch and per group.

Constraint groups reduce a per-point map ``phi`` of the residual either to
its sample mean (``expectation`` mode, one multiplier per group) or keep it
per collocation point (``pointwise`` mode, one multiplier per point).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Var
from .exceptions import ConfigurationError, EvaluationError, TrainingAborted
from .lbfgs import LbfgsConfig, LbfgsState, minimize
from .sampling import PointSet

__all__ = [
    "AlmConfig",
    "Block",
    "Term",
    "ConstraintGroup",
    "TrainerState",
    "TrainResult",
    "MetricsRecord",
    "assemble_lagrangian",
    "dual_update_mpu",
    "dual_update_cpu",
    "dual_update_apu",
    "train",
    "export_multiplier_distribution",
    "write_metrics_csv",
]

STRATEGIES = ("mpu", "cpu", "apu")
MODES = ("expectation", "pointwise")
PHI = ("quadratic", "identity")


@dataclass
class AlmConfig:
    """Trainer settings; defaults follow the adaptive (apu) schedule."""

    strategy: str = "apu"
    epochs: int = 100
    constraint_mode: str = "expectation"
    lambda0: float = None  # per-strategy default when None (cpu: 0, else 1)
    mu0: float = 1.0
    penalty_growth: float = 2.0  # beta, mpu/cpu
    mu_max: float = 1e4  # mpu/cpu safeguard
    gamma: float = 1e-2  # apu penalty scale
    smoothing: float = 0.99  # apu running-average factor
    stability_eps: float = 1e-8  # apu division guard
    batch_size: int = None

    def validate(self):
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(
                f"unknown strategy '{self.strategy}', choose from {STRATEGIES}"
            )
        if self.constraint_mode not in MODES:
            raise ConfigurationError(
                f"unknown constraint mode '{self.constraint_mode}', "
                f"choose from {MODES}"
            )
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if self.mu0 <= 0.0:
            raise ConfigurationError("mu0 must be positive")
        if self.penalty_growth <= 1.0:
            raise ConfigurationError("penalty_growth must exceed 1")
        if self.mu_max <= 0.0:
            raise ConfigurationError("mu_max must be positive")
        if self.gamma <= 0.0:
            raise ConfigurationError("gamma must be positive")
        if not 0.0 <= self.smoothing <= 1.0:
            raise ConfigurationError("smoothing must lie in [0, 1]")
        if self.stability_eps <= 0.0:
            raise ConfigurationError("stability_eps must be positive")
        if self.batch_size is not None:
            if self.batch_size < 1:
                raise ConfigurationError("batch_size must be >= 1")
            if self.constraint_mode == "pointwise":
                raise ConfigurationError(
                    "mini-batching is only supported in expectation mode "
                    "(pointwise multipliers are tied to fixed points)"
                )
        return self

    def initial_lambda(self):
        if self.lambda0 is not None:
            return float(self.lambda0)
        return 0.0 if self.strategy == "cpu" else 1.0


@dataclass(frozen=True)
class Block:
    """Named collocation-point source shared by one or more terms."""

    name: str
    sampler: object  # callable(seed) -> PointSet
    resample: bool = False


@dataclass(frozen=True)
class Term:
    """One residual map evaluated on a block's points.

    ``residual(jet, coords, aux)`` returns per-point values of shape (N,),
    (N, k), or a tuple of (N,) components; ``jet`` is the block's
    :class:`~pecann.network.JetBatch` (or the bound graph itself for
    blockless parameter terms).  ``phi`` maps the residual to the
    constrained quantity per point: ``quadratic`` squares and sums
    components, ``identity`` keeps the signed scalar.  ``prepare(coords,
    seed)``, when given, builds the term's auxiliary data (targets,
    coefficients, synthetic measurement noise) after each (re)sampling.
    """

    name: str
    residual: object
    block: str = None
    order: int = 0
    prepare: object = None
    phi: str = "quadratic"

    def __post_init__(self):
        if self.phi not in PHI:
            raise ConfigurationError(
                f"unknown phi '{self.phi}', choose from {PHI}"
            )
        if self.order not in (0, 1, 2):
            raise ConfigurationError("term order must be 0, 1 or 2")


@dataclass
class ConstraintGroup:
    """A term plus its multiplier state."""

    term: Term
    mode: str
    lam: object = 1.0
    mu: object = 1.0
    vbar: object = 0.0

    @property
    def name(self):
        return self.term.name


@dataclass
class TrainerState:
    """Mutable cross-epoch state: schedules, curvature memory, history."""

    epoch: int = 0
    eta: float = np.inf  # cpu constraint-norm watermark
    mu_shared: float = 1.0  # mpu/cpu shared penalty
    lbfgs_state: LbfgsState = field(default_factory=LbfgsState)
    history: list = field(default_factory=list)


@dataclass(frozen=True)
class MetricsRecord:
    """Per-epoch scalars: objective, constraint levels, multiplier levels.

    Pointwise groups are summarized by the l2 norm of the constraint
    vector and the means of the multiplier/penalty vectors.
    """

    epoch: int
    objective: float
    constraints: dict
    lambdas: dict
    mus: dict


@dataclass
class TrainResult:
    model: object
    theta: np.ndarray
    groups: list
    state: TrainerState

    @property
    def history(self):
        return self.state.history


def _phi_rows(residual, phi):
    """Reduce a (), (N,), (N, k) or tuple residual to one value per point."""
    if isinstance(residual, (tuple, list)):
        if phi == "identity":
            raise ConfigurationError(
                "identity phi needs a scalar residual per point"
            )
        total = None
        for component in residual:
            sq = component ** 2
            total = sq if total is None else total + sq
        return total
    shape = residual.shape
    if len(shape) <= 1:
        return residual ** 2 if phi == "quadratic" else residual
    if len(shape) == 2:
        if phi == "identity":
            raise ConfigurationError(
                "identity phi needs a scalar residual per point"
            )
        return (residual ** 2).sum(axis=1)
    raise ConfigurationError(f"residual must be (N,) or (N, k), got {shape}")


def reduce_term(term, jet, coords, aux, mode):
    """Evaluate a term to its constrained quantity.

    Returns a scalar (expectation mode) or an (N,) vector (pointwise).
    Works identically on taped Vars and plain ndarrays.
    """
    rows = _phi_rows(term.residual(jet, coords, aux), term.phi)
    return rows.mean() if mode == "expectation" else rows


def assemble_lagrangian(objective, constraints, groups):
    """Augmented Lagrangian value from an objective and constraint values.

    ``constraints[i]`` is the evaluated ``C_i`` of ``groups[i]`` (scalar or
    per-point vector, Var or ndarray); multipliers come from the groups.
    """
    total = objective
    for group, c in zip(groups, constraints):
        if np.isscalar(group.lam) or np.ndim(group.lam) == 0:
            total = total + group.lam * c + 0.5 * group.mu * c * c
        else:
            total = total + (group.lam * c).sum() + 0.5 * (group.mu * c * c).sum()
    return total


def dual_update_mpu(groups, c_values, state, config):
    """Monotonic schedule: multiplier step, then grow the shared penalty."""
    for group, c in zip(groups, c_values):
        group.lam = group.lam + state.mu_shared * c
    state.mu_shared = min(
        config.penalty_growth * state.mu_shared, config.mu_max
    )
    for group in groups:
        group.mu = _match_shape(state.mu_shared, group.lam)
    return groups


def dual_update_cpu(groups, c_values, state, config):
    """Conditional schedule: advance multipliers only on norm decrease."""
    total = 0.0
    for c in c_values:
        total += float(np.sum(np.square(c)))
    norm = float(np.sqrt(total))
    if norm < state.eta:
        for group, c in zip(groups, c_values):
            group.lam = group.lam + state.mu_shared * c
    else:
        state.mu_shared = min(
            config.penalty_growth * state.mu_shared, config.mu_max
        )
    state.eta = norm
    for group in groups:
        group.mu = _match_shape(state.mu_shared, group.lam)
    return groups


def dual_update_apu(groups, c_values, state, config):
    """Adaptive schedule: per-group penalties from an RMS constraint filter."""
    alpha = config.smoothing
    for group, c in zip(groups, c_values):
        group.vbar = alpha * group.vbar + (1.0 - alpha) * np.square(c)
        group.mu = config.gamma / (np.sqrt(group.vbar) + config.stability_eps)
        group.lam = group.lam + group.mu * c
    return groups


_DUAL_UPDATES = {
    "mpu": dual_update_mpu,
    "cpu": dual_update_cpu,
    "apu": dual_update_apu,
}


def _match_shape(scalar, like):
    if np.isscalar(like) or np.ndim(like) == 0:
        return scalar
    return np.full_like(like, scalar)


def export_multiplier_distribution(groups):
    """Per-point multiplier vectors by group name (pointwise groups only)."""
    out = {}
    for group in groups:
        if group.mode != "pointwise":
            raise ConfigurationError(
                f"group '{group.name}' holds an expectation-mode multiplier; "
                "distributions exist only in pointwise mode"
            )
        out[group.name] = np.array(group.lam, dtype=np.float64)
    return out


def write_metrics_csv(records, path):
    """One row per epoch: epoch, J, C_<name>..., lambda_<name>..., mu_<name>..."""
    records = list(records)
    if not records:
        raise ConfigurationError("no metrics records to write")
    names = list(records[0].constraints)
    header = (
        ["epoch", "J"]
        + [f"C_{n}" for n in names]
        + [f"lambda_{n}" for n in names]
        + [f"mu_{n}" for n in names]
    )
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for rec in records:
            row = [str(rec.epoch), _fmt(rec.objective)]
            row += [_fmt(rec.constraints[n]) for n in names]
            row += [_fmt(rec.lambdas[n]) for n in names]
            row += [_fmt(rec.mus[n]) for n in names]
            fh.write(",".join(row) + "\n")


def _fmt(x):
    return f"{x:.16e}"


def _block_seed(seed, epoch, index):
    return np.random.SeedSequence([int(seed), int(epoch), int(index)])


def _prepare_seed(seed, epoch, index, term_index):
    return np.random.SeedSequence(
        [int(seed), int(epoch), int(index), 1 + int(term_index)]
    )


def _summary(value):
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(value)
    return float(np.mean(value))


def _constraint_level(value):
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(value)
    return float(np.linalg.norm(value))


class _Session:
    """Book-keeping for one train() call: points, aux, loss closures."""

    def __init__(self, problem, model, alm_config, seed):
        self.problem = problem
        self.model = model
        self.config = alm_config
        self.seed = seed
        self.blocks = {b.name: b for b in problem.blocks}
        self.terms = [problem.objective] + list(problem.constraints)
        for term in self.terms:
            if term.block is not None and term.block not in self.blocks:
                raise ConfigurationError(
                    f"term '{term.name}' references unknown block '{term.block}'"
                )
        self.orders = {}
        for term in self.terms:
            if term.block is not None:
                prev = self.orders.get(term.block, 0)
                self.orders[term.block] = max(prev, term.order)
        self.points = {}
        self.aux = {}
        self.bad_term = None
        self.sample_all(epoch=0)

    def sample_all(self, epoch):
        order = list(self.blocks.values())
        for i, block in enumerate(order):
            if epoch > 0 and not block.resample:
                continue
            ps = block.sampler(_block_seed(self.seed, epoch, i))
            if not isinstance(ps, PointSet):
                ps = PointSet(np.asarray(ps), tuple(
                    f"x{j}" for j in range(np.asarray(ps).shape[1])
                ))
            self.points[block.name] = ps
            for j, term in enumerate(self.terms):
                if term.block == block.name:
                    self.aux[term.name] = (
                        term.prepare(ps.coords, _prepare_seed(
                            self.seed, epoch, i, j))
                        if term.prepare else None
                    )
        for j, term in enumerate(self.terms):  # blockless terms, prepared once
            if term.block is None and term.name not in self.aux:
                self.aux[term.name] = (
                    term.prepare(None, _prepare_seed(self.seed, 0, 65535, j))
                    if term.prepare else None
                )

    def batch_indices(self, epoch):
        """Aligned per-block chunks; every point appears once per epoch."""
        size = self.config.batch_size
        counts = {name: ps.n for name, ps in self.points.items()}
        if size is None or not counts:
            return [None]
        k = max(1, int(np.ceil(max(counts.values()) / size)))
        if k == 1:
            return [None]
        rng = np.random.default_rng(
            np.random.SeedSequence([int(self.seed), int(epoch), 104729])
        )
        split = {}
        for name, n in counts.items():
            if n < k:
                split[name] = [None] * k  # tiny blocks ride along whole
            else:
                split[name] = np.array_split(rng.permutation(n), k)
        return [
            {name: split[name][j] for name in counts} for j in range(k)
        ]

    def coords_for(self, batch):
        if batch is None:
            return {name: ps.coords for name, ps in self.points.items()}
        out = {}
        for name, ps in self.points.items():
            idx = batch[name]
            out[name] = ps.coords if idx is None else ps.coords[idx]
        return out

    def evaluate(self, graph, coords_by_block):
        """Objective value and constraint values at the bound graph."""
        jets = {}
        for name, order in self.orders.items():
            jets[name] = graph.jet(coords_by_block[name], order=order)
        values = []
        for term in self.terms:
            if term.block is None:
                jet, coords = graph, None
            else:
                jet, coords = jets[term.block], coords_by_block[term.block]
            value = reduce_term(
                term, jet, coords, self.aux[term.name], self.mode_of(term)
            )
            raw = value.value if isinstance(value, Var) else value
            if not np.all(np.isfinite(raw)):
                self.bad_term = term.name
                return None, None
            values.append(value)
        return values[0], values[1:]

    def mode_of(self, term):
        if term is self.terms[0] or term.block is None:
            # the objective is always a sample mean; parameter-space terms
            # have no point cloud to distribute multipliers over
            return "expectation"
        return self.config.constraint_mode

    def make_loss(self, groups, coords_by_block):
        model = self.model

        def fun(theta):
            tape = Tape()
            try:
                graph = model.bind(tape, theta)
                objective, constraints = self.evaluate(graph, coords_by_block)
                if objective is None:
                    return np.nan, np.zeros_like(theta)
                loss = assemble_lagrangian(objective, constraints, groups)
                tape.backward(loss)
                return float(loss.value), graph.gradient()
            finally:
                tape.release()

        return fun

    def constraint_values(self, theta, coords_by_block):
        tape = Tape()
        try:
            graph = self.model.bind(tape, theta)
            objective, constraints = self.evaluate(graph, coords_by_block)
            if objective is None:
                return None, None
            j_value = float(objective.value)
            c_values = [np.array(c.value) for c in constraints]
            return j_value, c_values
        finally:
            tape.release()


def train(problem, model, alm_config=None, lbfgs_config=None, seed=0):
    """Train ``model`` on ``problem`` and return a :class:`TrainResult`.

    ``problem`` provides ``blocks``, ``objective`` and ``constraints``
    (see :class:`Block` / :class:`Term`).  Deterministic for a fixed seed.
    Raises :class:`TrainingAborted` (with partial history attached) if any
    term goes non-finite at an accepted iterate.
    """
    config = (alm_config or AlmConfig()).validate()
    lbfgs_config = (lbfgs_config or LbfgsConfig()).validate()
    session = _Session(problem, model, config, seed)

    lam0 = config.initial_lambda()
    if config.constraint_mode == "pointwise":
        # residual row counts can differ from block point counts (paired
        # samples, component sums), so size multipliers from an evaluation
        _, c0 = session.constraint_values(
            model.parameter_vector(), session.coords_for(None)
        )
        if c0 is None:
            exc = TrainingAborted(
                0, session.bad_term or "objective", config.strategy
            )
            exc.history = []
            raise exc
        rows = {
            term.name: int(np.size(c))
            for term, c in zip(problem.constraints, c0)
        }
    groups = []
    for term in problem.constraints:
        if config.constraint_mode == "pointwise" and term.block is not None:
            n = rows[term.name]
            groups.append(ConstraintGroup(
                term, "pointwise",
                lam=np.full(n, lam0), mu=np.full(n, config.mu0),
                vbar=np.zeros(n),
            ))
        else:
            groups.append(ConstraintGroup(
                term, mode_for(config, term),
                lam=lam0, mu=config.mu0, vbar=0.0,
            ))

    state = TrainerState(mu_shared=config.mu0)
    update = _DUAL_UPDATES[config.strategy]
    theta = model.parameter_vector()

    for epoch in range(1, config.epochs + 1):
        state.epoch = epoch
        session.sample_all(epoch)
        last_coords = None
        for batch in session.batch_indices(epoch):
            coords = session.coords_for(batch)
            last_coords = coords
            fun = session.make_loss(groups, coords)
            try:
                result = minimize(fun, theta, lbfgs_config, state.lbfgs_state)
            except EvaluationError:
                exc = TrainingAborted(
                    epoch, session.bad_term or "objective", config.strategy
                )
                exc.history = list(state.history)
                raise exc from None
            theta = result.theta
            state.lbfgs_state = result.state

        j_value, c_values = session.constraint_values(theta, last_coords)
        if j_value is None:
            exc = TrainingAborted(
                epoch, session.bad_term or "objective", config.strategy
            )
            exc.history = list(state.history)
            raise exc
        update(groups, c_values, state, config)
        state.history.append(MetricsRecord(
            epoch=epoch,
            objective=j_value,
            constraints={
                g.name: _constraint_level(c)
                for g, c in zip(groups, c_values)
            },
            lambdas={g.name: _summary(g.lam) for g in groups},
            mus={g.name: _summary(g.mu) for g in groups},
        ))

    return TrainResult(
        model=model.with_parameters(theta),
        theta=theta,
        groups=groups,
        state=state,
    )


def mode_for(config, term):
    if term.block is None:
        # parameter-space terms have no point cloud to distribute over
        return "expectation"
    return config.constraint_mode


def initial_metrics(problem, model, alm_config=None, seed=0):
    """Epoch-0 record (objective and constraints at the initial parameters)."""
    config = (alm_config or AlmConfig()).validate()
    session = _Session(problem, model, config, seed)
    theta = model.parameter_vector()
    coords = {name: ps.coords for name, ps in session.points.items()}
    j_value, c_values = session.constraint_values(theta, coords)
    if j_value is None:
        raise TrainingAborted(0, session.bad_term or "objective", config.strategy)
    lam0 = config.initial_lambda()
    names = [t.name for t in problem.constraints]
    return MetricsRecord(
        epoch=0,
        objective=j_value,
        constraints={n: _constraint_level(c) for n, c in zip(names, c_values)},
        lambdas={n: lam0 for n in names},
        mus={n: config.mu0 for n in names},
    )
