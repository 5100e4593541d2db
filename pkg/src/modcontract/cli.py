"""Command-line entry point: ``modcontract {verify,rollout,train,sweep}``.

Exit codes: 0 success, 1 a check failed or a rollout diverged, 2 bad
config, arguments or input files.
"""

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, load_config, with_overrides
from .envs import (ClosedLoop, LatentPlant, LatentTask, PegPlant, PegSampling, PegTask, SecondOrderPlant,
                   SecondOrderTask)
from .errors import ConfigError, Diverged, ModContractError
from .latent import GainSet, LatentLTI, lti_model
from .policy import PolicyBank, PolicyState, init_bank, set_flips
from .trainer import TrainConfig, classify, evaluate, train, write_log_csv
from .transform import assemble_blocks, build_transforms, check_combination
from .verifier import (char_roots, default_robustness_scale, empirical_contraction, margin_values,
                       robustness_check, theorem1_lambda_max)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_PARAMS = ("k_sur", "tau_x", "tau_z")
PEG_OUTPUT_SCALE = (0.5, 4.0)
PEG_INTEGRAL_GAIN = (10.0, 5.0)
PEG_GAIN_CAP = (2.5, 40.0)


class UsageError(Exception):
    pass


def fmt(v) -> str:
    """17 significant digits for floats; everything else via ``str``."""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


# -- construction -----------------------------------------------------------

def build_task(cfg: ExperimentConfig):
    e = cfg.env
    if e.kind == "peg":
        s = PegSampling(k_sur=tuple(e.k_sur), k1s=tuple(e.k1s), k2s=tuple(e.k2s), x_d=tuple(e.x_d),
                        f_d=tuple(e.f_d), x0=tuple(e.x0), z0=tuple(e.z0), tau_x=e.tau_x, tau_z=e.tau_z)
        return PegTask(s, dt=e.dt, horizon=e.horizon, force_weight=e.force_weight,
                       transform_update=e.transform_update)
    if e.kind == "lti":
        return LatentTask(lti_model(LatentLTI(e.a, e.b)), y0_box=tuple(e.y0_box), dt=e.dt, horizon=e.horizon)
    try:
        gains = GainSet(e.lambda_d, e.kp, e.kd)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return SecondOrderTask(gains, e.branch, e0_box=tuple(e.e0_box), dt=e.dt, horizon=e.horizon)


def build_bank(cfg: ExperimentConfig, dim: int):
    p = cfg.policy
    if p.zero:
        return None
    peg = cfg.env.kind == "peg"
    scale = p.output_scale if p.output_scale is not None else (PEG_OUTPUT_SCALE if peg else None)
    gain = p.integral_gain if p.integral_gain is not None else (PEG_INTEGRAL_GAIN if peg else None)
    cap = p.gain_cap if p.gain_cap is not None else (PEG_GAIN_CAP if peg and p.constrained else None)
    for name, v in (("output_scale", scale), ("integral_gain", gain), ("gain_cap", cap)):
        if v is not None and len(v) != dim:
            raise ConfigError(f"policy.{name} needs {dim} entries")
    rng = np.random.default_rng([cfg.seed, 0])
    try:
        return init_bank(rng, dim, hidden=tuple(p.hidden), constrained=p.constrained, output_scale=scale,
                         integral_gain=gain, gain_cap=cap, weight_range=tuple(p.weight_range), bias_scale=p.bias_scale,
                         floor=p.floor)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_bank(path) -> PolicyBank:
    try:
        with open(path) as fh:
            return PolicyBank.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"cannot load policy {path}: {exc}") from exc


def save_bank(bank: PolicyBank, path):
    with open(path, "w") as fh:
        json.dump(bank.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def make_loop(task, bank, cfg: ExperimentConfig, rng):
    """Closed loop and initial state of one randomized episode."""
    refresh = cfg.policy.flips
    if isinstance(task, PegTask):
        params, s0 = task.sampling.sample(rng)
        loop = task.loop(bank, params)
    elif isinstance(task, LatentTask):
        s0 = rng.uniform(*task.y0_box, size=task.dim)
        loop = task.loop(bank)
    else:
        s0 = np.concatenate([rng.uniform(*task.e0_box, size=task.dim), np.zeros(task.dim)])
        loop = task.loop(bank)
    loop.refresh_flips = refresh
    return loop, s0


def _nominal_plant(task):
    if isinstance(task, PegTask):
        return PegPlant(task.nominal_params(), task.force_weight)
    if isinstance(task, LatentTask):
        return LatentPlant(task.model)
    return SecondOrderPlant(task.gains, task.branch)


def _sample_state(task, cfg: ExperimentConfig, rng):
    """Plant and state for one verification sample."""
    if isinstance(task, PegTask):
        params, s0 = task.sampling.sample(rng)
        s0[1] = rng.uniform(*cfg.verify.z_box)
        return PegPlant(params, task.force_weight), s0
    if isinstance(task, LatentTask):
        return LatentPlant(task.model), rng.uniform(*task.y0_box, size=task.dim)
    return (SecondOrderPlant(task.gains, task.branch),
            rng.uniform(*task.e0_box, size=2 * task.dim))


def _start_state(task, rng):
    if isinstance(task, PegTask):
        return task.sampling.sample(rng)[1]
    if isinstance(task, LatentTask):
        return rng.uniform(*task.y0_box, size=task.dim)
    return np.concatenate([rng.uniform(*task.e0_box, size=task.dim), np.zeros(task.dim)])


# -- verification ------------------------------------------------------------

@dataclass
class Counters:
    samples: int = 0
    transform_builds: int = 0
    rk4_steps: int = 0
    rollouts: int = 0

    def as_dict(self):
        return dict(samples=self.samples, transform_builds=self.transform_builds,
                    rk4_steps=self.rk4_steps, rollouts=self.rollouts)


@dataclass
class SampleResult:
    regime: str
    c1: np.ndarray
    c2: np.ndarray
    root_max: np.ndarray
    hier_ratio: float
    thm1_gap: float


def verify_samples(task, bank, cfg: ExperimentConfig, counters: Counters, rng):
    """Analytic checks at randomly sampled states; one :class:`SampleResult` each."""
    v = cfg.verify
    out = []
    for _ in range(v.samples):
        plant, state = _sample_state(task, cfg, rng)
        regime = plant.regime(state)
        y = plant.latent(state, regime)
        tp = build_transforms(plant.model(regime), y, np.zeros(plant.dim))
        counters.transform_builds += 1
        counters.samples += 1
        z = tp.T_y @ (y - plant.target(regime))
        s2 = rng.uniform(*v.s2_box, size=plant.dim)
        if bank is None:
            d1 = d2 = np.zeros(plant.dim)
        else:
            b = set_flips(bank, tp.r_diag, tp.lambda_diag) if cfg.policy.flips else bank
            d1, d2 = b.jacobian_diag(z, PolicyState(s2, 0.0))
        sys_ = assemble_blocks(tp, d1, d2)
        c1, c2 = margin_values(sys_)
        roots = np.array([char_roots(tp.lambda_diag[i], tp.r_diag[i], d1[i], d2[i]).max_real
                          for i in range(plant.dim)])
        comb = check_combination(sys_)
        scale = max(1.0, float(np.max(np.abs(sys_.F1))))
        thm = theorem1_lambda_max(sys_.F1, sys_.F2, v.beta)
        out.append(SampleResult(regime, c1, c2, roots, comb.max_violation / scale,
                                thm.lambda_max_f1 - thm.threshold))
    return out


def _check(name, ok, worst, threshold, **extra):
    return dict(name=name, **{"pass": bool(ok)}, worst_value=worst, threshold=threshold, **extra)


def run_verify(cfg: ExperimentConfig, bank, counters: Counters):
    """All enabled checks.  Returns ``(report, sample_rows, sample_header)``."""
    task = build_task(cfg)
    v = cfg.verify
    enabled = set(v.checks)
    rng = np.random.default_rng([cfg.seed, 2])
    samples = verify_samples(task, bank, cfg, counters, rng)
    n = task.dim
    c1 = np.array([s.c1 for s in samples])
    c2 = np.array([s.c2 for s in samples])
    roots = np.array([s.root_max for s in samples])
    checks = []
    if "margins" in enabled:
        limit = 0.0 - v.alpha
        worst = float(max(c1.max(), c2.max()))
        bad = (c1 >= limit) | (c2 >= limit)
        failing = [{"sample": int(k), "dim": int(i)} for k, i in zip(*np.nonzero(bad))]
        checks.append(_check("margins", worst < limit, worst, limit,
                             worst_c1=float(c1.max()), worst_c2=float(c2.max()),
                             failing_dims=sorted(set(int(i) for i in np.nonzero(bad)[1])),
                             failures=failing[:50], failure_count=len(failing)))
    if "char_roots" in enabled:
        worst = float(roots.max())
        checks.append(_check("char_roots", worst < 0.0, worst, 0.0))
    if "hierarchical" in enabled:
        worst = float(max(s.hier_ratio for s in samples))
        checks.append(_check("hierarchical", worst <= 1e-8, worst, 1e-8))
    if "theorem1" in enabled:
        worst = float(max(s.thm1_gap for s in samples))
        checks.append(_check("theorem1", worst < 0.0, worst, 0.0))

    plant = _nominal_plant(task)
    loop = ClosedLoop(plant, bank, dt=task.dt, refresh_flips=cfg.policy.flips,
                      transform_update=getattr(task, "transform_update", "regime"), record_margins=False)
    horizon = v.contraction_horizon or task.horizon
    steps_per_run = int(np.ceil(horizon / task.dt - 1e-9))

    def simulate(y0, h, disturbance=None):
        counters.rk4_steps += steps_per_run
        counters.rollouts += 1
        return loop.simulate(y0, h, disturbance)

    if "empirical_contraction" in enabled:
        srng = np.random.default_rng([cfg.seed, 3])
        pairs = [(_start_state(task, srng), _start_state(task, srng)) for _ in range(v.pairs)]
        try:
            fit = empirical_contraction(simulate, pairs, horizon)
            checks.append(_check("empirical_contraction", fit.beta_hat >= v.beta / 2, fit.beta_hat, v.beta / 2,
                                 r2=fit.r2, pair_count=fit.pair_count))
        except (Diverged, ValueError) as exc:
            checks.append(_check("empirical_contraction", False, None, v.beta / 2, error=str(exc)))
    if "robustness" in enabled:
        srng = np.random.default_rng([cfg.seed, 4])
        y0 = _start_state(task, srng)
        dvec = np.zeros(y0.size)
        dvec[0] = v.d_bar
        tp_ref = task.reference_transforms()
        try:
            rb = robustness_check(simulate, y0, lambda t, s: dvec, v.d_bar, v.beta, horizon,
                                  scale=default_robustness_scale(tp_ref), slack=v.robustness_slack)
            checks.append(_check("robustness", rb.ok, rb.observed_steady, rb.ball_radius * (1 + rb.slack)))
        except Diverged as exc:
            checks.append(_check("robustness", False, None, None, error=str(exc)))

    report = {
        "config_digest": cfg.digest(),
        "checks": checks,
        "transforms": task.reference_transforms().summary(),
        "timing": counters.as_dict(),
    }
    header = (["sample", "regime"] + [f"c1_{i}" for i in range(n)] + [f"c2_{i}" for i in range(n)]
              + [f"root_max_{i}" for i in range(n)])
    rows = [[k, s.regime, *s.c1, *s.c2, *s.root_max] for k, s in enumerate(samples)]
    return report, rows, header


def all_pass(report) -> bool:
    return all(c["pass"] for c in report["checks"])


# -- plotting ----------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_panels(panels, width=720, panel_height=220) -> str:
    """Stacked line plots.  ``panels`` is a list of ``(title, t, {label: values})``."""
    m = 50
    height = panel_height * len(panels)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    for p, (title, t, series) in enumerate(panels):
        top = p * panel_height
        x0, x1 = m, width - 20
        y0, y1 = top + 30, top + panel_height - 30
        t = np.asarray(t, dtype=float)
        vals = np.concatenate([np.asarray(v, dtype=float) for v in series.values()]) if series else np.zeros(1)
        vals = vals[np.isfinite(vals)]
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        if hi - lo < 1e-12:
            lo, hi = lo - 1.0, hi + 1.0
        tlo, thi = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0
        sx = lambda x: x0 + (x - tlo) / (thi - tlo) * (x1 - x0)  # noqa: E731
        sy = lambda y: y1 - (y - lo) / (hi - lo) * (y1 - y0)  # noqa: E731
        out.append(f'<text x="{x0}" y="{top + 18}" font-family="sans-serif" font-size="13">{title}</text>')
        out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="black"/>')
        for val, yy in ((hi, y0), (lo, y1)):
            out.append(f'<text x="{x0 - 4}" y="{yy + 4:.1f}" font-family="sans-serif" font-size="10" '
                       f'text-anchor="end">{val:.3g}</text>')
        out.append(f'<text x="{x1}" y="{y1 + 14}" font-family="sans-serif" font-size="10" '
                   f'text-anchor="end">t = {thi:.3g} s</text>')
        if lo < 0 < hi:
            out.append(f'<line x1="{x0}" y1="{sy(0):.2f}" x2="{x1}" y2="{sy(0):.2f}" stroke="#bbb"/>')
        stride = max(1, t.size // 1000)
        for k, (label, v) in enumerate(series.items()):
            v = np.asarray(v, dtype=float)
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t[::stride], v[::stride]) if np.isfinite(b))
            c = _COLORS[k % len(_COLORS)]
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.2" points="{pts}"/>')
            out.append(f'<text x="{x1 - 5}" y="{y0 + 14 + 13 * k}" font-family="sans-serif" font-size="11" '
                       f'text-anchor="end" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def rollout_panels(ro, peg: bool):
    errs = {f"e{i}": ro.error[:, i] for i in range(ro.error.shape[1])}
    panels = [("tracking error", ro.t, errs)]
    if peg:
        force = np.array([y[1] if r == "contact" else 0.0 for y, r in zip(ro.y, ro.regime)])
        panels.append(("contact force", ro.t, {"f": force}))
    return panels


# -- subcommands ---------------------------------------------------------------

def _out(cfg: ExperimentConfig, *parts):
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, *parts)


def _bank_for(cfg, task, policy_path):
    if policy_path:
        if not os.path.exists(policy_path):
            raise UsageError(f"policy file {policy_path} does not exist")
        bank = load_bank(policy_path)
        if bank.dim != task.dim:
            raise UsageError(f"policy has {bank.dim} networks, env needs {task.dim}")
        return bank
    return build_bank(cfg, task.dim)


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    task = build_task(cfg)
    bank = _bank_for(cfg, task, args.policy)
    t0 = time.perf_counter()
    report, rows, header = run_verify(cfg, bank, Counters())
    if args.wall_clock:
        report["timing"]["wall_seconds"] = time.perf_counter() - t0
    write_json(_out(cfg, "verify_report.json"), report)
    write_csv(_out(cfg, "verify_samples.csv"), header, rows)
    for c in report["checks"]:
        print(f"{c['name']:<22} {'PASS' if c['pass'] else 'FAIL'}  worst={c['worst_value']}  "
              f"threshold={c['threshold']}")
    return EXIT_OK if all_pass(report) else EXIT_FAIL


def cmd_rollout(cfg: ExperimentConfig, args) -> int:
    task = build_task(cfg)
    bank = _bank_for(cfg, task, args.policy)
    loop, s0 = make_loop(task, bank, cfg, np.random.default_rng([cfg.seed, 1]))
    ro = loop.rollout(s0, task.horizon)
    traj = args.traj or _out(cfg, "trajectory.csv")
    if os.path.dirname(traj):
        os.makedirs(os.path.dirname(traj), exist_ok=True)
    write_csv(traj, ro.header(), ro.to_rows())
    if args.plot:
        with open(args.plot, "w") as fh:
            fh.write(svg_panels(rollout_panels(ro, isinstance(task, PegTask))))
    summary = {"config_digest": cfg.digest(), "diverged": ro.diverged, "reward": ro.reward,
               "steps": len(ro.t), "transform_updates": ro.transform_updates}
    write_json(_out(cfg, "rollout_summary.json"), summary)
    print(f"rollout: {len(ro.t)} samples, reward={ro.reward!r}, diverged={ro.diverged}")
    return EXIT_FAIL if ro.diverged else EXIT_OK


def cmd_train(cfg: ExperimentConfig, args) -> int:
    task = build_task(cfg)
    t = cfg.train
    constrained = cfg.policy.constrained if t.constrained is None else t.constrained
    tc = TrainConfig(population=t.population, sigma=t.sigma, step_size=t.step_size, iterations=t.iterations,
                     episodes_per_eval=t.episodes_per_eval, seed=cfg.seed, constrained=constrained)
    bank0 = _bank_for(cfg, task, args.policy)
    if bank0 is None:
        raise ConfigError("cannot train the zero policy")
    bank, log = train(task, bank0, tc)
    write_log_csv(log, _out(cfg, "train_log.csv"), fmt=fmt)
    save_bank(bank, _out(cfg, "bank.json"))
    stats = evaluate(bank, task, t.eval_episodes, cfg.seed, threshold=t.sign_changes)
    write_json(_out(cfg, "train_eval.json"), {"config_digest": cfg.digest(), "constrained": constrained,
                                             "stability": stats.to_dict(),
                                             "total_violations": int(sum(log.violations))})
    print(f"train: {len(log)} iterations, final mean return "
          f"{log.mean_return[-1] if len(log) else float('nan')!r}, violations {sum(log.violations)}")
    print(f"eval: diverged {stats.frac_diverged}, oscillating {stats.frac_oscillating}, "
          f"drifting {stats.frac_drifting}")
    if constrained and any(log.violations):
        return EXIT_FAIL
    return EXIT_OK


def sweep_config(cfg: ExperimentConfig, param: str, value: float) -> ExperimentConfig:
    env = cfg.env.model_dump(mode="json")
    env[param] = [value, value] if param == "k_sur" else value
    return with_overrides(cfg, env=env)


def histogram_rows(groups, bins: int = 10):
    """Shared-bin histograms of the per-group samples: ``value, lo, hi, count``."""
    allv = np.concatenate([g for _, g in groups]) if groups else np.zeros(0)
    allv = allv[np.isfinite(allv)]
    if allv.size == 0:
        return []
    lo, hi = float(allv.min()), float(allv.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    rows = []
    for value, g in groups:
        counts, _ = np.histogram(g[np.isfinite(g)], bins=edges)
        rows += [[value, edges[k], edges[k + 1], int(counts[k])] for k in range(bins)]
    return rows


def cmd_sweep(cfg: ExperimentConfig, args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise UsageError(f"unknown sweep parameter {args.param!r}; choose from {list(SWEEP_PARAMS)}")
    if cfg.env.kind != "peg":
        raise UsageError(f"sweep parameter {args.param!r} needs the peg env")
    try:
        values = [float(s) for s in args.values.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    if not values:
        raise UsageError("--values is empty")
    base_task = build_task(cfg)
    bank = _bank_for(cfg, base_task, args.policy)
    rows, groups, passes = [], [], 0
    analytic = [c for c in cfg.verify.checks if c in ("margins", "char_roots", "hierarchical", "theorem1")]
    for value in values:
        vcfg = sweep_config(cfg, args.param, value)
        vcfg = with_overrides(vcfg, verify={**vcfg.verify.model_dump(mode="json"), "checks": analytic})
        report, _, _ = run_verify(vcfg, bank, Counters())
        ok = all_pass(report)
        passes += ok
        task = build_task(vcfg)
        erng = np.random.default_rng([cfg.seed, 5])
        final_err, rewards, kinds = [], [], []
        for _ in range(cfg.train.eval_episodes):
            loop, s0 = make_loop(task, bank, vcfg, erng)
            ro = loop.rollout(s0, task.horizon)
            kinds.append(classify(ro, cfg.train.sign_changes))
            rewards.append(ro.reward)
            final_err.append(float(np.linalg.norm(ro.error[-1])) if not ro.diverged else np.inf)
        final_err = np.array(final_err)
        frac = {k: kinds.count(k) / len(kinds) for k in ("diverged", "oscillating", "drifting")}
        fin = np.array(rewards)[np.isfinite(rewards)]
        mean_return = float(fin.mean()) if fin.size else -np.inf
        groups.append((value, final_err))
        worst = {c["name"]: c["worst_value"] for c in report["checks"]}
        rows.append([value, int(ok), worst.get("margins", np.nan), worst.get("char_roots", np.nan),
                     mean_return, frac["diverged"], frac["oscillating"], frac["drifting"],
                     float(np.mean(final_err))])
    write_csv(_out(cfg, "sweep.csv"),
              [args.param, "pass", "worst_margin", "worst_root", "mean_return", "frac_diverged",
               "frac_oscillating", "frac_drifting", "mean_final_error"], rows)
    write_csv(_out(cfg, "sweep_hist.csv"), [args.param, "bin_lo", "bin_hi", "count"], histogram_rows(groups))
    rate = passes / len(values)
    write_json(_out(cfg, "sweep_summary.json"), {"config_digest": cfg.digest(), "param": args.param,
                                                 "values": values, "pass_rate": rate})
    print(f"sweep {args.param}: pass rate {passes}/{len(values)}")
    return EXIT_OK if passes == len(values) else EXIT_FAIL


COMMANDS = {"verify": cmd_verify, "rollout": cmd_rollout, "train": cmd_train, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modcontract", description="Contraction-constrained policy experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="experiment config (JSON)")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--out-dir", default=None, help="override the config output directory")
        sp.add_argument("--policy", default=None, help="serialized policy bank (JSON)")
        return sp

    v = common(sub.add_parser("verify", help="run the stability checks"))
    v.add_argument("--wall-clock", action="store_true", help="add wall-clock seconds to the report")
    r = common(sub.add_parser("rollout", help="simulate one episode"))
    r.add_argument("--traj", default=None, help="trajectory CSV path")
    r.add_argument("--plot", default=None, help="SVG plot path")
    common(sub.add_parser("train", help="ES training"))
    s = common(sub.add_parser("sweep", help="verify and evaluate over a parameter grid"))
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--values", required=True, help="comma-separated values")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        cfg = with_overrides(cfg, seed=args.seed, out_dir=args.out_dir)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
