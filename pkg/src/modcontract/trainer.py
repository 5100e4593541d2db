"""Evolution-strategies training of policy banks and stability statistics.

Training uses antithetic Gaussian perturbations of the flat parameter vector,
centered-rank fitness shaping and common random episodes within an
iteration.  Constrained runs are projected onto their sign pattern and have
their output flips re-derived after every update.
"""

import csv
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .policy import PolicyBank, PolicyState, project, set_flips

DEFAULT_SIGN_CHANGES = 20
DEFAULT_DEADBAND = 1e-6
# Q4/Q3 mean-amplitude ratio above which the envelope counts as non-decaying;
# below 1 so that partial periods of a steady sampled sine still qualify.
ENVELOPE_RATIO = 0.9


@dataclass(frozen=True)
class TrainConfig:
    population: int = 16
    sigma: float = 0.02
    step_size: float = 0.005
    iterations: int = 20
    episodes_per_eval: int = 2
    seed: int = 0
    constrained: bool = True
    probe_points: int = 32

    def __post_init__(self):
        if self.population < 2 or self.population % 2:
            raise ConfigError(f"population must be even and >= 2, got {self.population}")
        if not (self.sigma > 0 and self.step_size > 0):
            raise ConfigError("sigma and step_size must be positive")
        if self.iterations < 0 or self.episodes_per_eval < 1 or self.probe_points < 1:
            raise ConfigError("iterations >= 0, episodes_per_eval >= 1 and probe_points >= 1 required")


@dataclass
class TrainLog:
    iteration: list = field(default_factory=list)
    mean_return: list = field(default_factory=list)
    best_return: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    min_margin: list = field(default_factory=list)
    diverged: list = field(default_factory=list)

    columns = ("iteration", "mean_return", "best_return", "violations", "min_margin", "diverged")

    def append(self, **row):
        for k in self.columns:
            getattr(self, k).append(row[k])

    def rows(self):
        return [list(r) for r in zip(*(getattr(self, k) for k in self.columns))]

    def __len__(self) -> int:
        return len(self.iteration)


def centered_ranks(x) -> np.ndarray:
    """Ranks mapped linearly onto ``[-0.5, 0.5]``; ties broken by index."""
    x = np.asarray(x, dtype=float)
    if x.size == 1:
        return np.zeros(1)
    ranks = np.empty(x.size)
    ranks[np.argsort(x, kind="stable")] = np.arange(x.size)
    return ranks / (x.size - 1) - 0.5


def finite_scores(scores) -> np.ndarray:
    """Replace ``-inf`` by the worst finite score minus one standard deviation."""
    s = np.asarray(scores, dtype=float).copy()
    ok = np.isfinite(s)
    if not ok.any():
        return np.zeros_like(s)
    fin = s[ok]
    s[~ok] = fin.min() - (fin.std() if fin.size > 1 else 1.0)
    return s


def es_gradient(score: Callable, theta, sigma: float, population: int, rng: np.random.Generator):
    """Antithetic ES estimate of the ascent direction of ``score`` at ``theta``.

    Returns the shaped gradient estimate and the raw member scores, ordered
    ``[+eps_0, -eps_0, +eps_1, -eps_1, ...]``.
    """
    theta = np.asarray(theta, dtype=float)
    if population % 2:
        raise ValueError("population must be even")
    eps = rng.standard_normal((population // 2, theta.size))
    noise = np.empty((population, theta.size))
    noise[0::2] = eps
    noise[1::2] = -eps
    scores = np.array([score(theta + sigma * e) for e in noise])
    w = centered_ranks(finite_scores(scores))
    return w @ noise / (population * sigma), scores


def _reference(task):
    tp = task.reference_transforms()
    return tp.r_diag, tp.lambda_diag


def _probe(cfg: TrainConfig, dim: int):
    rng = np.random.default_rng([cfg.seed, 1])
    z = rng.uniform(-1.0, 1.0, size=(cfg.probe_points, dim))
    s2 = rng.uniform(-1.0, 1.0, size=(cfg.probe_points, dim))
    return z, s2


def min_margin(bank: PolicyBank, task, z_pts, s2_pts) -> float:
    """``min(-c1, -c2)`` over probe points under the task's reference transforms."""
    tp = task.reference_transforms()
    lam, r = tp.lambda_diag, tp.r_diag
    worst = np.inf
    for z, s2 in zip(z_pts, s2_pts):
        d1, d2 = bank.jacobian_diag(z, PolicyState(s2, 0.0))
        worst = min(worst, float(np.min(-(d1 * r + lam))), float(np.min(-(d2 * r))))
    return worst


def _constrain(bank: PolicyBank, ref) -> PolicyBank:
    return set_flips(project(bank), *ref)


def episode_return(bank: PolicyBank, task, seeds) -> tuple:
    """Mean reward over the episodes seeded by ``seeds`` and the diverged count."""
    total, div = 0.0, 0
    for s in seeds:
        ro = task.rollout(bank, np.random.default_rng(int(s)))
        if ro.diverged:
            return -np.inf, div + 1
        total += ro.reward
    return total / len(seeds), div


def train(task, bank0: PolicyBank, cfg: TrainConfig, callback: Optional[Callable] = None):
    """Optimize ``bank0`` on ``task`` with antithetic ES.

    ``task`` provides ``rollout(bank, rng)``, ``reference_transforms()`` and
    ``dim``.  Members of a constrained run are projected before they are
    scored, so no unconstrained policy is ever simulated.

    Returns
    -------
    (PolicyBank, TrainLog)
    """
    rng = np.random.default_rng(cfg.seed)
    ref = _reference(task)
    bank = _constrain(bank0, ref) if cfg.constrained else bank0
    theta = bank.flat()
    z_pts, s2_pts = _probe(cfg, bank.dim)
    log = TrainLog()

    for it in range(cfg.iterations):
        seeds = rng.integers(0, 2**31 - 1, size=cfg.episodes_per_eval)
        div = [0]

        def score(th):
            member = bank.with_flat(th)
            if cfg.constrained:
                member = _constrain(member, ref)
            r, d = episode_return(member, task, seeds)
            div[0] += d
            return r

        grad, scores = es_gradient(score, theta, cfg.sigma, cfg.population, rng)
        bank = bank.with_flat(theta + cfg.step_size * grad)
        if cfg.constrained:
            bank = _constrain(bank, ref)
        theta = bank.flat()
        fin = scores[np.isfinite(scores)]
        log.append(iteration=it,
                   mean_return=float(fin.mean()) if fin.size else -np.inf,
                   best_return=float(scores.max()),
                   violations=bank.violations() if cfg.constrained else 0,
                   min_margin=min_margin(bank, task, z_pts, s2_pts),
                   diverged=div[0])
        if callback is not None:
            callback(it, bank, log)
    return bank, log


def write_log_csv(log: TrainLog, path, fmt=repr):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log.columns)
        for row in log.rows():
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])


# -- stability statistics ---------------------------------------------------

def sign_changes(e, deadband: float = DEFAULT_DEADBAND) -> int:
    """Sign changes of a scalar signal, ignoring samples with ``|e| <= deadband``."""
    e = np.asarray(e, dtype=float)
    s = np.sign(e[np.abs(e) > deadband])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def is_oscillating(t, e, threshold: int = DEFAULT_SIGN_CHANGES, deadband: float = DEFAULT_DEADBAND) -> bool:
    """More than ``threshold`` sign changes in the final half and a non-decaying envelope.

    ``e`` may be a vector signal (rows are samples); any oscillating
    component makes the trajectory oscillating.
    """
    t = np.asarray(t, dtype=float)
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    t0, t1 = t[0], t[-1]
    span = t1 - t0
    half = t >= t0 + 0.5 * span
    q3 = half & (t < t0 + 0.75 * span)
    q4 = t >= t0 + 0.75 * span
    for k in range(e.shape[1]):
        ek = e[:, k]
        if sign_changes(ek[half], deadband) <= threshold:
            continue
        if q3.any() and q4.any() and np.mean(np.abs(ek[q4])) >= ENVELOPE_RATIO * np.mean(np.abs(ek[q3])):
            return True
    return False


def is_drifting(e) -> bool:
    """Final error norm larger than the initial one."""
    e = np.asarray(e, dtype=float)
    if e.ndim == 1:
        e = e[:, None]
    return bool(np.linalg.norm(e[-1]) > np.linalg.norm(e[0]))


@dataclass(frozen=True)
class EvalStats:
    mean_return: float
    frac_diverged: float
    frac_oscillating: float
    frac_drifting: float
    episodes: int
    returns: tuple = ()

    @property
    def frac_unstable(self) -> float:
        return self.frac_diverged + self.frac_oscillating + self.frac_drifting

    def to_dict(self) -> dict:
        d = asdict(self)
        d["returns"] = list(self.returns)
        return d


def classify(rollout, threshold: int = DEFAULT_SIGN_CHANGES) -> str:
    """One of ``diverged``, ``oscillating``, ``drifting`` or ``stable``."""
    if rollout.diverged:
        return "diverged"
    if is_oscillating(rollout.t, rollout.error, threshold):
        return "oscillating"
    if is_drifting(rollout.error):
        return "drifting"
    return "stable"


def evaluate(bank: PolicyBank, task, episodes: int, seed: int,
             threshold: int = DEFAULT_SIGN_CHANGES) -> EvalStats:
    """Roll ``bank`` out on ``episodes`` seeded episodes and classify each one.

    Categories are exclusive; a diverged episode is not also counted as
    oscillating or drifting.
    """
    if episodes < 1:
        raise ValueError("episodes must be positive")
    ss = np.random.SeedSequence(seed).spawn(episodes)
    counts = {"diverged": 0, "oscillating": 0, "drifting": 0, "stable": 0}
    returns = []
    for s in ss:
        ro = task.rollout(bank, np.random.default_rng(s))
        counts[classify(ro, threshold)] += 1
        returns.append(ro.reward)
    r = np.array(returns)
    fin = r[np.isfinite(r)]
    return EvalStats(mean_return=float(fin.mean()) if fin.size else -np.inf,
                     frac_diverged=counts["diverged"] / episodes,
                     frac_oscillating=counts["oscillating"] / episodes,
                     frac_drifting=counts["drifting"] / episodes,
                     episodes=episodes, returns=tuple(float(x) for x in r))
