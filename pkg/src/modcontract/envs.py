"""Plants and closed-loop simulation.

A plant owns its physical state and knows how to express it in latent
coordinates ``y`` for its current regime.  :class:`ClosedLoop` wires a plant
to a policy bank through the auxiliary transforms::

    z = T_y (y - y_d),   a = bank(z, integral of z),   u = T_a a

Control is held constant over each integration step.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import Diverged
from .latent import (GainSet, LatentModel, composite_apply, lti_model,
                     solve_composite_gains)
from .numerics import DEFAULT_BOUND, DEFAULT_DT, Trajectory, rk4_step, time_grid
from .policy import PolicyBank, PolicyState, set_flips
from .transform import TransformPair, build_transforms


# -- latent-only plant ------------------------------------------------------

class LatentPlant:
    """The latent model itself is the plant: state is ``y``."""

    regimes = ("nominal",)

    def __init__(self, model: LatentModel, y_target=None):
        self.model_ = model
        self.dim = model.dim_y
        self.y_target = np.zeros(self.dim) if y_target is None else np.asarray(y_target, dtype=float)
        self.error_weights = np.ones(self.dim)

    def deriv(self, t, state, u):
        return self.model_.f(state, u, t)

    def regime(self, state) -> str:
        return "nominal"

    def latent(self, state, regime=None):
        return state

    def model(self, regime: str) -> LatentModel:
        return self.model_

    def target(self, regime: str):
        return self.y_target

    def tracking_error(self, state):
        return self.y_target - state


# -- second-order tracking error -------------------------------------------

class SecondOrderPlant:
    """``Lambda_d e'' + Kd e' + Kp e + u = 0`` with state ``[e, e']``.

    The latent coordinate is the composite variable ``y = K1 e + K2 e'``
    obtained from :func:`solve_composite_gains`, whose latent model is the
    diagonal LTI system.
    """

    regimes = ("nominal",)

    def __init__(self, gains: GainSet, branch: str = "plus"):
        self.gains = gains
        self.composite, self.lti = solve_composite_gains(gains, branch)
        self.model_ = lti_model(self.lti)
        self.dim = gains.dim
        self.error_weights = np.ones(self.dim)

    def split(self, state):
        return state[:self.dim], state[self.dim:]

    def deriv(self, t, state, u):
        e, ed = self.split(state)
        g = self.gains
        edd = -(g.kd * ed + g.kp * e + np.asarray(u, dtype=float)) / g.lambda_d
        return np.concatenate([ed, edd])

    def regime(self, state) -> str:
        return "nominal"

    def latent(self, state, regime=None):
        e, ed = self.split(state)
        return composite_apply(self.composite, e, ed)

    def model(self, regime: str) -> LatentModel:
        return self.model_

    def target(self, regime: str):
        return np.zeros(self.dim)

    def tracking_error(self, state):
        return self.split(state)[0].copy()

    def simulate_open_loop(self, u_fn: Callable, e0, edot0, horizon: float, dt: float = DEFAULT_DT,
                           bound: float = DEFAULT_BOUND):
        """Integrate under an explicit input ``u_fn(t)``.

        Returns ``(trajectory of [e, e'], y samples, u samples)``.
        """
        t = time_grid(0.0, horizon, dt)
        s = np.concatenate([np.asarray(e0, dtype=float), np.asarray(edot0, dtype=float)])
        states = np.empty((t.size, s.size))
        states[0] = s
        for k in range(t.size - 1):
            s = rk4_step(lambda tt, ss: self.deriv(tt, ss, u_fn(tt)), t[k], s, t[k + 1] - t[k])
            if not np.all(np.isfinite(s)) or np.linalg.norm(s) > bound:
                raise Diverged("second-order state diverged", t=t[k + 1])
            states[k + 1] = s
        ys = np.array([self.latent(x) for x in states])
        us = np.array([np.asarray(u_fn(tt), dtype=float) for tt in t])
        return Trajectory(t, states), ys, us


def second_order_env(g: GainSet, branch: str = "plus") -> SecondOrderPlant:
    return SecondOrderPlant(g, branch)


# -- peg touch --------------------------------------------------------------

@dataclass(frozen=True)
class PegParams:
    """Planar peg pushed onto the surface ``g(x) = k1s sin x + k2s cos x``."""

    tau_x: float = 0.0437
    tau_z: float = 0.01
    k_sur: float = 10.0
    k1s: float = 0.0
    k2s: float = 0.0
    x_range: tuple = (1.0, 3.0)
    z_range: tuple = (-3.0, 1.0)
    x_d: float = 2.0
    f_d: float = -0.1

    def __post_init__(self):
        if not (self.tau_x > 0 and self.tau_z > 0):
            raise ValueError("time constants must be positive")
        if self.k_sur <= 0:
            raise ValueError("surface stiffness must be positive")

    def g(self, x):
        return self.k1s * np.sin(x) + self.k2s * np.cos(x)

    def dg(self, x):
        return self.k1s * np.cos(x) - self.k2s * np.sin(x)

    def force(self, x, z):
        return self.k_sur * min(z - self.g(x), 0.0)

    @property
    def z_d(self) -> float:
        """Height at which the contact law produces ``f_d`` at ``x_d``."""
        return float(self.g(self.x_d) + self.f_d / self.k_sur)


@dataclass(frozen=True)
class PegSampling:
    """Episode distribution for the peg task."""

    k_sur: tuple = (1.0, 31.0)
    k1s: tuple = (-0.01, 0.01)
    k2s: tuple = (-0.01, 0.01)
    x_d: tuple = (1.2, 2.8)
    f_d: tuple = (-0.3, -0.05)
    x0: tuple = (1.0, 3.0)
    z0: tuple = (0.1, 1.0)
    tau_x: float = 0.0437
    tau_z: float = 0.01

    def sample(self, rng: np.random.Generator):
        p = PegParams(tau_x=self.tau_x, tau_z=self.tau_z,
                      k_sur=rng.uniform(*self.k_sur), k1s=rng.uniform(*self.k1s), k2s=rng.uniform(*self.k2s),
                      x_d=rng.uniform(*self.x_d), f_d=rng.uniform(*self.f_d))
        state0 = np.array([rng.uniform(*self.x0), rng.uniform(*self.z0)])
        return p, state0


def peg_latent_model(p: PegParams, regime: str = "contact") -> LatentModel:
    """Latent model of the peg.

    In contact the latent state is ``[x, f]``; ``jac_y`` is the usual
    approximation that folds the surface term into a gain on ``x``.  In free
    flight the latent state is ``[x, z]`` and the dynamics are two decoupled
    first-order lags.
    """
    tx, tz, K = p.tau_x, p.tau_z, p.k_sur
    if regime == "free":
        jy = np.diag([-1.0 / tx, -1.0 / tz])
        ju = np.diag([1.0 / tx, 1.0 / tz])

        def f(y, u, t=0.0):
            return np.array([(-y[0] + u[0]) / tx, (-y[1] + u[1]) / tz])

        return LatentModel(2, 2, f, lambda y, u, t=0.0: jy.copy(), lambda y, u, t=0.0: ju.copy(), "peg-free")
    if regime != "contact":
        raise ValueError(f"unknown peg regime {regime!r}")

    def f(y, u, t=0.0):
        x, fc = y[0], y[1]
        dg = p.dg(x)
        return np.array([
            -x / tx + u[0] / tx,
            (K / tx * dg * x - K / tz * p.g(x)) - fc / tz - K / tx * dg * u[0] + K / tz * u[1],
        ])

    def jac_y(y, u, t=0.0):
        # x is kept inside the operating box so g(x)/x stays bounded
        x = float(np.clip(y[0], *p.x_range))
        return np.array([[-1.0 / tx, 0.0],
                         [K / tx * p.dg(x) - K / tz * p.g(x) / x, -1.0 / tz]])

    def jac_u(y, u, t=0.0):
        return np.array([[1.0 / tx, 0.0],
                         [-K / tx * p.dg(y[0]), K / tz]])

    return LatentModel(2, 2, f, jac_y, jac_u, "peg-contact")


@dataclass(frozen=True)
class PegState:
    x: float
    z: float
    regime: str


def peg_tracking_error(s: PegState, p: PegParams) -> np.ndarray:
    f = p.force(s.x, s.z) if s.regime == "contact" else 0.0
    return np.array([p.x_d - s.x, p.f_d - f])


class PegPlant:
    """Peg with first-order lags in ``x`` and ``z`` and a penalty contact force."""

    regimes = ("free", "contact")

    def __init__(self, params: PegParams, force_weight: float = 1.0):
        self.p = params
        self.dim = 2
        self.error_weights = np.array([1.0, force_weight])
        self._models = {r: peg_latent_model(params, r) for r in self.regimes}

    def deriv(self, t, state, u):
        return np.array([(-state[0] + u[0]) / self.p.tau_x, (-state[1] + u[1]) / self.p.tau_z])

    def regime(self, state) -> str:
        return "contact" if state[1] - self.p.g(state[0]) <= 0.0 else "free"

    def peg_state(self, state) -> PegState:
        return PegState(float(state[0]), float(state[1]), self.regime(state))

    def latent(self, state, regime=None):
        regime = regime or self.regime(state)
        if regime == "contact":
            return np.array([state[0], self.p.force(state[0], state[1])])
        return np.array([state[0], state[1]])

    def model(self, regime: str) -> LatentModel:
        return self._models[regime]

    def target(self, regime: str):
        if regime == "contact":
            return np.array([self.p.x_d, self.p.f_d])
        return np.array([self.p.x_d, self.p.z_d])

    def tracking_error(self, state):
        return peg_tracking_error(self.peg_state(state), self.p)


# -- closed loop ------------------------------------------------------------

@dataclass(frozen=True)
class StepRecord:
    t: float
    y: np.ndarray
    z: np.ndarray
    a: np.ndarray
    u: np.ndarray
    regime: str
    c1: np.ndarray
    c2: np.ndarray
    error: np.ndarray


@dataclass
class LoopState:
    """Mutable per-episode bookkeeping: transform cache and flipped banks."""

    state: np.ndarray
    ps: PolicyState
    t: float = 0.0
    regime: Optional[str] = None
    transforms: dict = field(default_factory=dict)
    banks: dict = field(default_factory=dict)
    transform_updates: int = 0


@dataclass
class Rollout:
    t: np.ndarray
    states: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a: np.ndarray
    u: np.ndarray
    regime: list
    c1: np.ndarray
    c2: np.ndarray
    error: np.ndarray
    reward: float
    diverged: bool
    transform_updates: int

    def to_rows(self):
        """Rows for the trajectory CSV: t, y*, z*, a*, u*, regime, c1*, c2*."""
        for k in range(len(self.t)):
            yield [self.t[k], *self.y[k], *self.z[k], *self.a[k], *self.u[k], self.regime[k],
                   *self.c1[k], *self.c2[k]]

    def header(self):
        n = self.y.shape[1]
        cols = ["t"]
        for name in ("y", "z", "a", "u"):
            cols += [f"{name}{i}" for i in range(n)]
        cols.append("regime")
        cols += [f"c1_{i}" for i in range(n)] + [f"c2_{i}" for i in range(n)]
        return cols


class ClosedLoop:
    """Plant + policy bank + auxiliary transforms.

    Parameters
    ----------
    plant : LatentPlant, SecondOrderPlant or PegPlant
    bank : PolicyBank or None
        ``None`` applies zero control.
    dt : float
        Integration and control period.
    disturbance : callable, optional
        ``d(t, state)`` added to the plant state derivative.
    transform_update : {"regime", "step"}
        Recompute transforms on regime change only, or at every step.
    refresh_flips : bool
        Re-derive output flips from ``R`` whenever transforms change.
    """

    def __init__(self, plant, bank: Optional[PolicyBank] = None, dt: float = DEFAULT_DT,
                 disturbance: Optional[Callable] = None, transform_update: str = "regime",
                 refresh_flips: bool = True, bound: float = DEFAULT_BOUND, record_margins: bool = True):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if transform_update not in ("regime", "step"):
            raise ValueError("transform_update must be 'regime' or 'step'")
        self.plant = plant
        self.bank = bank
        self.dt = dt
        self.disturbance = disturbance
        self.transform_update = transform_update
        self.refresh_flips = refresh_flips
        self.bound = bound
        self.record_margins = record_margins

    def with_disturbance(self, disturbance) -> "ClosedLoop":
        return ClosedLoop(self.plant, self.bank, self.dt, disturbance, self.transform_update,
                          self.refresh_flips, self.bound, self.record_margins)

    def start(self, state0) -> LoopState:
        return LoopState(state=np.array(state0, dtype=float), ps=PolicyState.zeros(self.plant.dim))

    def transforms_at(self, state, regime: str) -> TransformPair:
        y = self.plant.latent(state, regime)
        return build_transforms(self.plant.model(regime), y, np.zeros(self.plant.dim))

    def _refresh(self, ls: LoopState, regime: str):
        tp = self.transforms_at(ls.state, regime)
        ls.transforms[regime] = tp
        ls.transform_updates += 1
        if self.bank is not None:
            ls.banks[regime] = (set_flips(self.bank, tp.r_diag, tp.lambda_diag)
                                if self.refresh_flips else self.bank)

    def step(self, ls: LoopState, h: Optional[float] = None) -> StepRecord:
        """Advance ``ls`` by one control period in place and return the record of its start."""
        h = self.dt if h is None else h
        if not h > 0:
            raise ValueError("step size must be positive")
        plant = self.plant
        regime = plant.regime(ls.state)
        if self.transform_update == "step" or regime not in ls.transforms:
            self._refresh(ls, regime)
        ls.regime = regime
        tp = ls.transforms[regime]
        y = plant.latent(ls.state, regime)
        z = tp.T_y @ (y - plant.target(regime))
        n = plant.dim
        if self.bank is None:
            a = np.zeros(n)
            d1 = d2 = np.zeros(n)
        else:
            bank = ls.banks[regime]
            a = bank.forward(z, ls.ps)
        u = tp.T_a @ a
        if self.bank is not None and not self.record_margins:
            c1 = c2 = np.full(n, np.nan)
        else:
            if self.bank is not None:
                d1, d2 = ls.banks[regime].jacobian_diag(z, ls.ps)
            rdiag = np.diag(tp.R)
            c1 = d1 * rdiag + np.diag(tp.Lambda)
            c2 = d2 * rdiag
        rec = StepRecord(ls.t, y, z, a, u, regime, c1, c2, plant.tracking_error(ls.state))

        dist = self.disturbance
        if dist is None:
            deriv = lambda t, s: plant.deriv(t, s, u)  # noqa: E731
        else:
            deriv = lambda t, s: plant.deriv(t, s, u) + dist(t, s)  # noqa: E731
        new = rk4_step(deriv, ls.t, ls.state, h)
        norm = np.linalg.norm(new)
        if not np.isfinite(norm) or norm > self.bound:
            raise Diverged(f"state norm {norm:.3g} exceeded {self.bound:.3g}", t=ls.t + h)
        ls.state = new
        ls.ps = ls.ps.advance(z, h)
        ls.t = ls.t + h
        return rec

    def rollout(self, state0, horizon: float) -> Rollout:
        """Simulate ``horizon`` seconds; divergence is recorded, not raised.

        The reward is ``-sum dt * sum_i w_i |e_i|`` over steps, ``-inf`` on
        divergence.
        """
        grid = time_grid(0.0, horizon, self.dt)
        ls = self.start(state0)
        recs, states = [], [ls.state.copy()]
        diverged = False
        reward = 0.0
        w = self.plant.error_weights
        for k in range(grid.size - 1):
            h = grid[k + 1] - grid[k]
            ls.t = grid[k]
            try:
                rec = self.step(ls, h)
            except Diverged:
                diverged = True
                break
            recs.append(rec)
            states.append(ls.state.copy())
            reward -= h * float(np.sum(w * np.abs(rec.error)))
        if not diverged:
            # closing sample at t = horizon
            regime = self.plant.regime(ls.state)
            if regime not in ls.transforms:
                self._refresh(ls, regime)
            tp = ls.transforms[regime]
            y = self.plant.latent(ls.state, regime)
            z = tp.T_y @ (y - self.plant.target(regime))
            n = self.plant.dim
            a = ls.banks[regime].forward(z, ls.ps) if self.bank is not None else np.zeros(n)
            nan = np.full(n, np.nan)
            recs.append(StepRecord(grid[-1], y, z, a, tp.T_a @ a, regime, nan, nan,
                                   self.plant.tracking_error(ls.state)))
        else:
            reward = -np.inf
        return Rollout(
            t=np.array([r.t for r in recs]),
            states=np.array(states[:len(recs)]),
            y=np.array([r.y for r in recs]),
            z=np.array([r.z for r in recs]),
            a=np.array([r.a for r in recs]),
            u=np.array([r.u for r in recs]),
            regime=[r.regime for r in recs],
            c1=np.array([r.c1 for r in recs]),
            c2=np.array([r.c2 for r in recs]),
            error=np.array([r.error for r in recs]),
            reward=float(reward),
            diverged=diverged,
            transform_updates=ls.transform_updates,
        )

    def simulate(self, state0, horizon: float, disturbance=None) -> Trajectory:
        """Latent trajectory for the verifier; raises :class:`Diverged`."""
        loop = self if disturbance is None else self.with_disturbance(disturbance)
        grid = time_grid(0.0, horizon, self.dt)
        ls = loop.start(state0)
        ys = np.empty((grid.size, self.plant.dim))
        ys[0] = self.plant.latent(ls.state)
        for k in range(grid.size - 1):
            ls.t = grid[k]
            loop.step(ls, grid[k + 1] - grid[k])
            ys[k + 1] = self.plant.latent(ls.state)
        return Trajectory(grid, ys)


def step(loop: ClosedLoop, ls: LoopState, dt: Optional[float] = None) -> StepRecord:
    return loop.step(ls, dt)


def rollout(loop: ClosedLoop, state0, horizon: float) -> Rollout:
    return loop.rollout(state0, horizon)


# -- tasks: episode factories for training and evaluation ------------------

class PegTask:
    """Randomized peg-touch episodes."""

    def __init__(self, sampling: PegSampling = PegSampling(), dt: float = 5e-4, horizon: float = 1.5,
                 force_weight: float = 1.0, transform_update: str = "regime"):
        self.sampling = sampling
        self.dt = dt
        self.horizon = horizon
        self.force_weight = force_weight
        self.transform_update = transform_update
        self.dim = 2

    def nominal_params(self) -> PegParams:
        s = self.sampling
        mid = lambda r: 0.5 * (r[0] + r[1])  # noqa: E731
        return PegParams(tau_x=s.tau_x, tau_z=s.tau_z, k_sur=mid(s.k_sur), k1s=mid(s.k1s), k2s=mid(s.k2s),
                         x_d=mid(s.x_d), f_d=mid(s.f_d))

    def loop(self, bank, params: PegParams, record_margins: bool = True) -> ClosedLoop:
        return ClosedLoop(PegPlant(params, self.force_weight), bank, dt=self.dt,
                          transform_update=self.transform_update, record_margins=record_margins)

    def rollout(self, bank, rng: np.random.Generator, record_margins: bool = False) -> Rollout:
        params, state0 = self.sampling.sample(rng)
        return self.loop(bank, params, record_margins).rollout(state0, self.horizon)

    def reference_transforms(self) -> TransformPair:
        p = self.nominal_params()
        return build_transforms(peg_latent_model(p, "contact"), np.array([p.x_d, p.f_d]), np.zeros(2))


class LatentTask:
    """Episodes of a latent model started uniformly inside a box."""

    def __init__(self, model: LatentModel, y0_box=(-1.0, 1.0), dt: float = DEFAULT_DT, horizon: float = 2.0):
        self.model = model
        self.y0_box = y0_box
        self.dt = dt
        self.horizon = horizon
        self.dim = model.dim_y

    def loop(self, bank, record_margins: bool = True) -> ClosedLoop:
        return ClosedLoop(LatentPlant(self.model), bank, dt=self.dt, record_margins=record_margins)

    def rollout(self, bank, rng: np.random.Generator, record_margins: bool = False) -> Rollout:
        y0 = rng.uniform(*self.y0_box, size=self.dim)
        return self.loop(bank, record_margins).rollout(y0, self.horizon)

    def reference_transforms(self) -> TransformPair:
        return build_transforms(self.model, np.zeros(self.dim), np.zeros(self.dim))


class SecondOrderTask:
    """Episodes of the second-order tracking error with random ``(e, e')`` starts."""

    def __init__(self, gains: GainSet, branch: str = "plus", e0_box=(-1.0, 1.0), dt: float = DEFAULT_DT,
                 horizon: float = 2.0):
        self.gains = gains
        self.branch = branch
        self.e0_box = e0_box
        self.dt = dt
        self.horizon = horizon
        self.dim = gains.dim

    def loop(self, bank, record_margins: bool = True) -> ClosedLoop:
        return ClosedLoop(SecondOrderPlant(self.gains, self.branch), bank, dt=self.dt,
                          record_margins=record_margins)

    def rollout(self, bank, rng: np.random.Generator, record_margins: bool = False) -> Rollout:
        s0 = np.concatenate([rng.uniform(*self.e0_box, size=self.dim), np.zeros(self.dim)])
        return self.loop(bank, record_margins).rollout(s0, self.horizon)

    def reference_transforms(self) -> TransformPair:
        plant = SecondOrderPlant(self.gains, self.branch)
        return build_transforms(plant.model_, np.zeros(self.dim), np.zeros(self.dim))
