"""``qjump-sim`` command line: scenario runner and built-in verification.

    qjump-sim run <config-file> [--key value ...]
    qjump-sim verify [--only N ...]

Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 truncation overflow.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import analysis, engine
from .errors import ConfigError, NumericalError, TruncationOverflowError
from .io import ScenarioConfig, load_config, parse_config_text, write_output
from .model import ICKind, InitialCondition, ModelParams, make_initial_state
from .state import ReducedState
from .trajectories import (RNG_ALGORITHM, default_trajectory_dt, default_window, mean_over_trajectories,
                           simulate_ensemble, simulate_trajectory, synthesize_current,
                           telegraph_stats)

log = logging.getLogger("qjump")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_TRUNCATION = 0, 2, 3, 4


@dataclass
class ScenarioResult:
    meta: dict[str, Any]
    columns: list[str]
    data: list[np.ndarray]
    summary: list[str] = field(default_factory=list)


def _default_t_end(cfg: ScenarioConfig) -> float:
    p = cfg.params
    if cfg.t_end is not None:
        return cfg.t_end
    if cfg.scenario == "gaussian_check":
        return 100.0 / p.d1
    if p.omega0 > 0.0 and p.d1 > 0.0:
        return 5.0 * max(p.zeno_time, 1.0 / p.omega0)
    return 10.0


def _grid(t_end: float, sample_dt: float | None, default_points: int) -> np.ndarray:
    if sample_dt is None:
        return np.linspace(0.0, t_end, default_points + 1)
    n = max(1, int(round(t_end / sample_dt)))
    return np.arange(n + 1) * (t_end / n)


def _reduced_initial(ic: InitialCondition) -> ReducedState:
    s11, _, s12 = ic.block()
    return ReducedState(s11=s11, s12=s12)


def _scenario_reduced(cfg, t_end, dt):
    p = cfg.params
    times = _grid(t_end, cfg.sample_dt, 200)
    hist = engine.reduced_history(_reduced_initial(cfg.ic), p, times, dt)
    cur = engine.mean_current(hist, p)
    s12 = np.array([s.s12 for s in hist])
    return ScenarioResult(
        {}, ["t", "sigma11", "re_sigma12", "im_sigma12", "current"],
        [times, np.array([s.s11 for s in hist]), s12.real, s12.imag, cur.current])


def _scenario_n_resolved(cfg, t_end, dt):
    p = cfg.params
    times = _grid(t_end, cfg.sample_dt, 50)
    hist = engine.evolve_history(make_initial_state(cfg.ic, cfg.ic.n0), p, times, dt)
    n_max = hist[-1].n_max
    cols = {k: [] for k in ("t", "n", "p", "sigma11_n", "sigma22_n", "re_sigma12_n",
                            "im_sigma12_n")}
    for state in hist:
        st = state.grown(n_max)
        cols["t"].append(np.full(n_max + 1, st.t))
        cols["n"].append(np.arange(n_max + 1))
        cols["p"].append(st.s11 + st.s22)
        cols["sigma11_n"].append(st.s11)
        cols["sigma22_n"].append(st.s22)
        cols["re_sigma12_n"].append(st.s12.real)
        cols["im_sigma12_n"].append(st.s12.imag)
    data = [np.concatenate(v) for v in cols.values()]
    return ScenarioResult({"n_max": n_max, "leaked": hist[-1].leaked}, list(cols), data)


def _window(cfg: ScenarioConfig, t_end: float) -> float:
    if cfg.window is not None:
        return cfg.window
    w = default_window(cfg.params)
    if w is None or w >= t_end:
        raise ConfigError("no default current window fits; set 'window'")
    return w


def _scenario_trajectory(cfg, t_end, dt):
    window = _window(cfg, t_end)
    traj = simulate_trajectory(cfg.ic, cfg.params, t_end, dt, cfg.master_seed,
                               sample_dt=cfg.sample_dt, window=window)
    t, current = synthesize_current(traj, window)
    k = t.size
    meta = {"window": window, "n_jumps": traj.n_jumps}
    return ScenarioResult(meta, ["t", "current", "sigma11_cond", "n_cum"],
                          [t, current, traj.cond_s11[:k], traj.n_cum[:k]])


def _scenario_ensemble(cfg, t_end, dt, workers=None):
    p = cfg.params
    window = _window(cfg, t_end)
    ens = simulate_ensemble(cfg.ic, p, t_end, dt, cfg.n_traj, cfg.master_seed,
                            sample_dt=cfg.sample_dt, window=window, workers=workers)
    cur = mean_over_trajectories(ens, window)
    k = cur.t.size
    cond = np.array([tr.cond_s11[:k] for tr in ens])
    hist = engine.reduced_history(_reduced_initial(cfg.ic), p, cur.t, dt)
    master = np.array([s.s11 for s in hist])
    meta: dict[str, Any] = {"window": window}
    summary = []
    probe = cfg.probe_time if cfg.probe_time is not None else (
        p.zeno_time / 4.0 if math.isfinite(p.zeno_time) else t_end / 2.0)
    if cfg.n_traj >= 1000 and p.d1 > 0.0:
        stats = telegraph_stats(ens, p, probe, window=window)
        meta.update(probe_time=probe, p_high=stats.p_high, high_fraction=stats.high_fraction)
        summary.append(f"telegraph: P(high at t={probe:.4g}) = {stats.p_high:.4f}, "
                       f"high_fraction = {stats.high_fraction:.4f}")
    return ScenarioResult(
        meta,
        ["t", "mean_current", "sem_current", "nocollapse_current", "mean_sigma11_cond",
         "sigma11_master"],
        [cur.t, cur.mean, cur.sem, p.d1 * master, cond.mean(axis=0), master], summary)


def _scenario_zeno_sweep(cfg, dt_user):
    w = cfg.params.omega0
    if w <= 0.0:
        raise ConfigError("zeno_sweep needs omega0 > 0")
    ratios = cfg.ratios or (8.0, 16.0, 32.0)
    rows = []
    for r in ratios:
        p = ModelParams(omega0=w, epsilon=0.0, d1=r * w)
        times = np.linspace(0.0, 5.0 * p.zeno_time, 501)
        hist = engine.reduced_history(ReducedState(1.0), p, times, dt_user or p.stable_dt())
        fit = analysis.fit_zeno_time(hist, p)
        rows.append((p.d1, fit.t0_fit, fit.t0_formula, fit.ratio, fit.residual))
    data = [np.array(c) for c in zip(*rows)]
    summary = [f"D1={d:g}  t0_fit={tf:.6g}  t0_formula={tm:.6g}  ratio={q:.4f}"
               for d, tf, tm, q, _ in rows]
    ok = all(0.8 <= q <= 1.2 for q in data[3])
    summary.append("zeno_sweep " + ("PASS" if ok else "FAIL"))
    return ScenarioResult({"ratios_pass": ok}, ["d1", "t0_fit", "t0_formula", "ratio",
                                                "residual"], data, summary)


def _scenario_gaussian_check(cfg, t_end, dt):
    p = ModelParams(omega0=0.0, epsilon=cfg.params.epsilon, d1=cfg.params.d1)
    if p.d1 <= 0.0:
        raise ConfigError("gaussian_check needs d1 > 0")
    final = engine.evolve(make_initial_state(InitialCondition(ICKind.LEFT_LOCALIZED), 0),
                          p, t_end, dt)
    pe = engine.counting_distribution(final).p
    n_max = pe.size - 1
    pg = analysis.gaussian_lattice(n_max, t_end, p.d1)
    pp = analysis.poisson_pmf(n_max, p.d1 * t_end)
    tv_g = analysis.total_variation(pe, pg)
    tv_p = analysis.total_variation(pe, pp)
    ok = tv_g < 0.03 and tv_p < 1e-6
    line = (f"gaussian_check D1t={p.d1 * t_end:g} tv_gaussian={tv_g:.3e} "
            f"tv_poisson={tv_p:.3e} {'PASS' if ok else 'FAIL'}")
    return ScenarioResult({"tv_gaussian": tv_g, "tv_poisson": tv_p, "pass": ok},
                          ["n", "p_engine", "p_gaussian", "p_poisson"],
                          [np.arange(n_max + 1), pe, pg, pp], [line])


def _scenario_steady_check(cfg, dt_user):
    w, e = cfg.params.omega0, cfg.params.epsilon
    if w <= 0.0:
        raise ConfigError("steady_check needs omega0 > 0")
    ratios = cfg.ratios or (4.0, 16.0, 64.0)
    rows = []
    for r in ratios:
        p = ModelParams(omega0=w, epsilon=e, d1=r * w)
        final = analysis.steady_state(p, _reduced_initial(cfg.ic), dt=dt_user)
        dev = max(abs(final.s11 - 0.5), abs(final.s12))
        rows.append((p.d1, w, e, final.t, final.s11, final.s12.real, final.s12.imag, dev,
                     analysis.reduced_derivative(final, p)))
    data = [np.array(c) for c in zip(*rows)]
    summary = [f"D1={row[0]:g} eps={row[2]:g} deviation={row[7]:.3e} |dsigma/dt|={row[8]:.3e}"
               for row in rows]
    return ScenarioResult({}, ["d1", "omega0", "epsilon", "t", "sigma11", "re_sigma12",
                               "im_sigma12", "deviation", "derivative"], data, summary)


def run_scenario(cfg: ScenarioConfig, *, workers: int | None = None) -> ScenarioResult:
    """Compute a scenario without touching the filesystem."""
    t_end = _default_t_end(cfg)
    p = cfg.params
    if cfg.dt is not None:
        dt = cfg.dt
    elif cfg.scenario in ("trajectory", "ensemble"):
        dt = default_trajectory_dt(p)
    else:
        dt = p.stable_dt()
    if cfg.scenario == "reduced":
        res = _scenario_reduced(cfg, t_end, dt)
    elif cfg.scenario == "n_resolved":
        res = _scenario_n_resolved(cfg, t_end, dt)
    elif cfg.scenario == "trajectory":
        res = _scenario_trajectory(cfg, t_end, dt)
    elif cfg.scenario == "ensemble":
        res = _scenario_ensemble(cfg, t_end, dt, workers)
    elif cfg.scenario == "zeno_sweep":
        res = _scenario_zeno_sweep(cfg, cfg.dt)
    elif cfg.scenario == "gaussian_check":
        res = _scenario_gaussian_check(cfg, t_end, dt)
    else:
        res = _scenario_steady_check(cfg, cfg.dt)
    meta = cfg.metadata()
    if cfg.scenario not in ("zeno_sweep", "steady_check"):
        meta.setdefault("t_end", t_end)
        meta.setdefault("dt", dt)
    meta["rng"] = RNG_ALGORITHM if cfg.scenario in ("trajectory", "ensemble") else "none"
    meta.update(res.meta)
    meta["version"] = __version__
    res.meta = meta
    return res


def run(cfg: ScenarioConfig) -> int:
    """Run a scenario, write its output file and return the exit status."""
    try:
        res = run_scenario(cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except TruncationOverflowError as exc:
        log.error("truncation overflow: %s", exc)
        return EXIT_TRUNCATION
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    try:
        write_output(cfg.output_path, cfg.format, res.meta, res.columns, res.data)
    except OSError as exc:
        log.error("config error: cannot write %s: %s", cfg.output_path, exc)
        return EXIT_CONFIG
    for line in res.summary:
        print(line)
    return EXIT_OK


def parse_overrides(tokens: Sequence[str]) -> dict[str, str]:
    """``--key value`` / ``--key=value`` pairs; dashes in keys become underscores."""
    out: dict[str, str] = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for {tok}") from None
        out[key.replace("-", "_")] = value
    return out


def _cmd_run(args) -> int:
    try:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        raw = parse_config_text(text)
        raw.update(parse_overrides(args.overrides))
        cfg = load_config(raw)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return run(cfg)


def _cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(only=args.only)
    for r in results:
        print(r.line())
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return EXIT_OK if n_pass == len(results) else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="qjump-sim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario from a key=value config file")
    p_run.add_argument("config")
    p_run.add_argument("overrides", nargs=argparse.REMAINDER,
                       help="--key value pairs overriding the config file")
    p_ver = sub.add_parser("verify", help="run the acceptance criteria")
    p_ver.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
