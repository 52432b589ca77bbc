"""Declarative experiment sweeps: INI config in, CSV rows out.

Config grammar
--------------
An INI file with three sections::

    [experiment]
    type = pareto            ; gain_ss | gain_sa_sm | pareto | sumrate_vs_power | sumrate_vs_K
    seed = 0
    output = pareto.csv      ; optional, relative to the config file

    [scenario]               ; any ScenarioConfig field; powers in dBm
    P_max_dbm = 20
    target_x = 10            ; sensing target position
    target_y = -6

    [sweep]                  ; whitespace-separated lists
    segments = 15 30
    gamma_sen_dbm = -60 -55 -50

Keys not listed in :data:`SCENARIO_KEYS` / :data:`SWEEP_KEYS` are rejected.
Thresholds and noise powers given in dBm are converted with
``10**((x - 30)/10)``; a sensing threshold in dBm is read as a linear SNR of
that many "watts", which matches how the budgets are stated.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .core_model import Position3D, Protocol, ScenarioConfig, SwanLayout, dbm_to_watt
from .multiuser import TdmaProblem, solve_sa_multi, solve_sm_multi, solve_ss_multi
from .pareto import pareto_fronts
from .placement import SearchConfig
from .sensing_limits import gain_ss_closed, gain_ss_oracle, sa_gain_centered, sm_gain_centered

log = logging.getLogger(__name__)

__all__ = [
    "EXPERIMENT_TYPES",
    "ConfigError",
    "ExperimentConfig",
    "default_scenario",
    "default_config_text",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_rows",
    "rows_to_csv",
]

EXPERIMENT_TYPES = ("gain_ss", "gain_sa_sm", "pareto", "sumrate_vs_power", "sumrate_vs_K")
DEFAULT_TARGET = Position3D(10.0, -6.0, 0.0)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def default_scenario() -> ScenarioConfig:
    """28 GHz, n_eff 1.4, 0.08 dB/m, 20 dBm budget, -90 dBm noise, unit
    reflection, 3 m height, waveguides at y = +5 / -5 m, 20 m x 20 m area,
    half-wavelength minimum spacing."""
    return ScenarioConfig(
        carrier_freq_hz=28e9, n_eff=1.4, kappa_db_per_m=0.08, d=3.0,
        y_t=5.0, y_r=-5.0, D_x=20.0, D_y=20.0,
        P_max=float(dbm_to_watt(20.0)), sigma_c_sq=float(dbm_to_watt(-90.0)),
        sigma_s_sq=float(dbm_to_watt(-90.0)), alpha=1.0, delta_min=None,
    )


# key -> (ScenarioConfig field, converter)
SCENARIO_KEYS: Dict[str, tuple] = {
    "carrier_freq_hz": ("carrier_freq_hz", float),
    "n_eff": ("n_eff", float),
    "kappa_db_per_m": ("kappa_db_per_m", float),
    "d": ("d", float),
    "y_t": ("y_t", float),
    "y_r": ("y_r", float),
    "D_x": ("D_x", float),
    "D_y": ("D_y", float),
    "P_max_dbm": ("P_max", lambda s: float(dbm_to_watt(float(s)))),
    "sigma_c_dbm": ("sigma_c_sq", lambda s: float(dbm_to_watt(float(s)))),
    "sigma_s_dbm": ("sigma_s_sq", lambda s: float(dbm_to_watt(float(s)))),
    "alpha": ("alpha", float),
    "delta_min": ("delta_min", float),
    "target_x": (None, float),
    "target_y": (None, float),
}

SWEEP_KEYS = {
    "segments": int, "D_x": float, "gamma_sen_dbm": float, "P_max_dbm": float, "K": int,
    "protocols": str, "target_x": float, "cu_x": float, "cu_y": float,
    "grid_step": float, "eps_step": float, "max_iters": int, "rel_tol": float,
    "oracle_samples": int, "gamma_com": float, "n_draws": int,
}

_SINGLE = {"cu_x", "cu_y", "grid_step", "eps_step", "max_iters", "rel_tol",
           "oracle_samples", "gamma_com", "n_draws"}

_REQUIRED = {
    "gain_ss": ("D_x", "segments"),
    "gain_sa_sm": ("D_x", "segments"),
    "pareto": ("segments", "gamma_sen_dbm"),
    "sumrate_vs_power": ("segments", "P_max_dbm", "gamma_sen_dbm", "K"),
    "sumrate_vs_K": ("segments", "K", "gamma_sen_dbm"),
}

_DEFAULT_SWEEP = {
    "protocols": ["SS", "SA", "SM"], "cu_x": [30.0], "cu_y": [0.0], "grid_step": [1e-2],
    "eps_step": [0.1], "max_iters": [50], "rel_tol": [1e-4], "oracle_samples": [1_000_000],
    "gamma_com": [1.5], "n_draws": [1],
}


@dataclass
class ExperimentConfig:
    experiment: str
    scenario: ScenarioConfig
    target: Position3D
    sweep: Dict[str, list]
    seed: int = 0
    output_path: Optional[str] = None
    unscaled_floors: bool = False
    raw_text: str = field(default="", repr=False)

    def one(self, key):
        return self.sweep[key][0]

    @property
    def search(self) -> SearchConfig:
        return SearchConfig(grid_step=self.one("grid_step"), max_iters=self.one("max_iters"),
                            rel_tol=self.one("rel_tol"))


def parse_config(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keep key case (D_x, K)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    unknown_sections = set(cp.sections()) - {"experiment", "scenario", "sweep"}
    if unknown_sections:
        raise ConfigError(f"unknown sections: {sorted(unknown_sections)}")
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = dict(cp["experiment"])
    etype = exp.pop("type", None)
    if etype not in EXPERIMENT_TYPES:
        raise ConfigError(f"unknown experiment type {etype!r}; expected one of {EXPERIMENT_TYPES}")
    try:
        seed = int(exp.pop("seed", "0"))
    except ValueError:
        raise ConfigError("seed must be an integer") from None
    output = exp.pop("output", None)
    literal = exp.pop("unscaled_floors", "false").strip().lower() in ("1", "true", "yes")
    if exp:
        raise ConfigError(f"unknown [experiment] keys: {sorted(exp)}")
    if output and base_dir is not None and not os.path.isabs(output):
        output = str(base_dir / output)

    fields, target = {}, {"x": DEFAULT_TARGET.x, "y": DEFAULT_TARGET.y}
    if cp.has_section("scenario"):
        for key, value in cp["scenario"].items():
            if key not in SCENARIO_KEYS:
                raise ConfigError(f"unknown scenario key {key!r} (powers take a _dbm suffix)")
            name, conv = SCENARIO_KEYS[key]
            try:
                v = conv(value)
            except ValueError:
                raise ConfigError(f"invalid value for {key}: {value!r}") from None
            if not math.isfinite(v):
                raise ConfigError(f"invalid value for {key}: {value!r}")
            if name is None:
                target[key[-1]] = v
            else:
                fields[name] = v
    fields.setdefault("delta_min", None)  # re-derive from the carrier
    try:
        scenario = default_scenario().with_(**fields)
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None

    sweep = {k: list(v) for k, v in _DEFAULT_SWEEP.items()}
    if cp.has_section("sweep"):
        for key, value in cp["sweep"].items():
            if key not in SWEEP_KEYS:
                raise ConfigError(f"unknown sweep key {key!r}")
            try:
                vals = [SWEEP_KEYS[key](t) for t in value.split()]
            except ValueError:
                raise ConfigError(f"invalid values for {key}: {value!r}") from None
            if not vals:
                raise ConfigError(f"sweep axis {key} is empty")
            if key in _SINGLE and len(vals) != 1:
                raise ConfigError(f"{key} takes a single value")
            sweep[key] = vals
    for key in _REQUIRED[etype]:
        if key not in sweep:
            raise ConfigError(f"experiment {etype} needs sweep axis {key!r}")
    if any(p not in ("SS", "SA", "SM") for p in sweep["protocols"]):
        raise ConfigError("protocols must be drawn from SS SA SM")
    if any(n < 1 for n in sweep.get("segments", [1])) or any(k < 1 for k in sweep.get("K", [1])):
        raise ConfigError("segment counts and K must be positive")
    if etype == "pareto" and sorted(sweep["gamma_sen_dbm"]) != sweep["gamma_sen_dbm"]:
        raise ConfigError("gamma_sen_dbm must be ascending")
    try:
        SearchConfig(grid_step=sweep["grid_step"][0], max_iters=sweep["max_iters"][0],
                     rel_tol=sweep["rel_tol"][0])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(etype, scenario, Position3D(target["x"], target["y"], 0.0), sweep,
                            seed, output, literal, text)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, path.parent)


def default_config_text(experiment: str = "pareto") -> str:
    """A runnable config with the default scenario for ``experiment``."""
    if experiment not in EXPERIMENT_TYPES:
        raise ConfigError(f"unknown experiment type {experiment!r}")
    sweeps = {
        "gain_ss": "D_x = 50 200\nsegments = 1 2 4 8 16 32 64\noracle_samples = 1000000\n",
        "gain_sa_sm": "D_x = 50 200\nsegments = 1 3 5 7 9 11 15 21 31 41 51 61\n",
        "pareto": ("segments = 15 30\ntarget_x = 5 25\ncu_x = 30\ncu_y = 0\n"
                   "gamma_sen_dbm = -36 -33 -30 -27 -24 -21 -18 -15 -12 -9 -6 -3\n"
                   "protocols = SS SA SM\ngrid_step = 0.01\n"),
        "sumrate_vs_power": ("segments = 15 30\nK = 3\ngamma_sen_dbm = -50\ngamma_com = 1.5\n"
                             "P_max_dbm = -20 -12 -4 4 12 20\nn_draws = 1\ngrid_step = 0.01\n"),
        "sumrate_vs_K": ("segments = 15 30\nK = 1 2 3 4 5\ngamma_sen_dbm = -50\ngamma_com = 1.5\n"
                         "n_draws = 1\ngrid_step = 0.01\n"),
    }
    scen = "D_x = 50\n" if experiment == "pareto" else ""
    return (f"[experiment]\ntype = {experiment}\nseed = 0\n\n"
            "[scenario]\ncarrier_freq_hz = 28e9\nn_eff = 1.4\nkappa_db_per_m = 0.08\nd = 3\n"
            "y_t = 5\ny_r = -5\n" + scen + "P_max_dbm = 20\nsigma_c_dbm = -90\nsigma_s_dbm = -90\n"
            "alpha = 1\ntarget_x = 10\ntarget_y = -6\n\n[sweep]\n" + sweeps[experiment])


# -- row producers ------------------------------------------------------------
# Each returns a list of zero-argument tasks; each task returns a list of rows.

def _tasks_gain_ss(ec: ExperimentConfig):
    cfg, n_samp = ec.scenario, ec.one("oracle_samples")

    def task(i, D, n):
        closed = gain_ss_closed(cfg, D, n, n)
        orc = gain_ss_oracle(cfg, D, n, n, n_samples=n_samp,
                             seed=np.random.SeedSequence([ec.seed, i]))
        return [{"D_x": D, "N": n, "M": n, "eta_closed": closed.eta, "eta_oracle": orc.eta,
                 "oracle_std_error": orc.std_error, "eta_asymptotic": closed.eta_asymptotic,
                 "gain_swan": closed.gain_swan, "gain_pass": closed.gain_pass}]

    pts = [(D, n) for D in ec.sweep["D_x"] for n in ec.sweep["segments"]]
    return [lambda i=i, D=D, n=n: task(i, D, n) for i, (D, n) in enumerate(pts)]


def _tasks_gain_sa_sm(ec: ExperimentConfig):
    cfg = ec.scenario
    st = Position3D(ec.target.x, ec.target.y)
    dt, dr = cfg.delta_tx(st), cfg.delta_rx(st)

    def task(D, n):
        rows = []
        for proto, fn, approx in ((Protocol.SA, sa_gain_centered, "sinh_approx"),
                                  (Protocol.SM, sm_gain_centered, "atan_approx")):
            ex = fn(cfg, D, n, n, dt, dr, mode="exact_sum", allow_even=True)
            ap = fn(cfg, D, n, n, dt, dr, mode=approx)
            rows.append({"protocol": proto.value, "D_x": D, "N": n, "M": n,
                         "eta_exact": ex.eta, "eta_approx": ap.eta,
                         "eta_asymptotic": ex.eta_asymptotic,
                         "rel_diff": abs(ap.eta - ex.eta) / ex.eta,
                         "gamma_swan_exact": ex.gain_swan, "gamma_pass": ex.gain_pass})
        return rows

    return [lambda D=D, n=n: task(D, n) for D in ec.sweep["D_x"] for n in ec.sweep["segments"]]


def _tasks_pareto(ec: ExperimentConfig):
    cfg = ec.scenario
    cu = Position3D(ec.one("cu_x"), ec.one("cu_y"))
    thresholds = [float(dbm_to_watt(g)) for g in ec.sweep["gamma_sen_dbm"]]
    xs_list = ec.sweep.get("target_x", [ec.target.x])

    def task(xs, n):
        st = Position3D(xs, ec.target.y)
        layouts = (SwanLayout.uniform(n, cfg.D_x), SwanLayout.uniform(n, cfg.D_x))
        fronts = pareto_fronts(cfg, cu, st, thresholds, layouts, ec.search,
                               protocols=ec.sweep["protocols"])
        rows = []
        for proto, pts in fronts.items():
            for g_dbm, pt in zip(ec.sweep["gamma_sen_dbm"], pts):
                rows.append({"target_x": xs, "segments": n, "protocol": proto.value,
                             "gamma_sen_dbm": g_dbm, "gamma_sen": pt.gamma_sen_threshold,
                             "feasible": int(pt.feasible),
                             "rate": pt.achieved_rate if pt.feasible else 0.0,
                             "gamma_s": pt.achieved_gamma_s if pt.feasible else 0.0,
                             "closed_form_rate": ("" if pt.closed_form_rate is None
                                                  else pt.closed_form_rate)})
        return rows

    return [lambda xs=xs, n=n: task(xs, n) for xs in xs_list for n in ec.sweep["segments"]]


def draw_users(cfg: ScenarioConfig, n: int, seed: int, draw: int) -> List[Position3D]:
    """``n`` users uniform over ``[0, D_x] x [-D_y/2, D_y/2]``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, draw])))
    xy = rng.uniform([0.0, -cfg.D_y / 2], [cfg.D_x, cfg.D_y / 2], size=(n, 2))
    return [Position3D(float(x), float(y)) for x, y in xy]


def _multi_solve(cfg, proto, prob, layouts, sc, eps_step, init):
    if proto == "SS":
        return solve_ss_multi(cfg, prob, layouts, sc)
    if proto == "SA":
        return solve_sa_multi(cfg, prob, layouts, sc, init_tx=init)
    return solve_sm_multi(cfg, prob, layouts, sc, eps_step, init_tx=init)


def _multi_rows(cfg, proto_order, make_prob, axis_vals, axis_name, layouts, sc, eps_step,
                extra, warm):
    """Solve along one axis for each protocol; SA solutions seed SM and, when
    ``warm``, each point seeds the next one on the axis."""
    rows, sa_sols = [], {}
    for proto in proto_order:
        prev = None
        for j, v in enumerate(axis_vals):
            prob = make_prob(v)
            init = []
            if warm and prev is not None:
                init.append(prev)
            if proto == "SM" and j in sa_sols:
                init.append(sa_sols[j])
            sol = _multi_solve(cfg, proto, prob, layouts, sc, eps_step, init or None)
            if proto == "SA":
                sa_sols[j] = sol
            prev = sol
            rows.append({**extra, "protocol": proto, axis_name: v,
                         "feasible": int(sol.feasible), "sum_rate": sol.sum_rate,
                         "total_power": float(np.sum(sol.per_slot_power))})
    return rows


def _ordered_protocols(ps):
    return [p for p in ("SS", "SA", "SM") if p in ps]


def _tasks_multi(ec: ExperimentConfig, by_power: bool):
    cfg, sc = ec.scenario, ec.search
    st = Position3D(ec.target.x, ec.target.y)
    eps_step, gcom = ec.one("eps_step"), ec.one("gamma_com")
    protos = _ordered_protocols(ec.sweep["protocols"])
    tasks = []
    for n in ec.sweep["segments"]:
        layouts = (SwanLayout.uniform(n, cfg.D_x), SwanLayout.uniform(n, cfg.D_x))
        for draw in range(ec.one("n_draws")):
            for g_dbm in ec.sweep["gamma_sen_dbm"]:
                G = float(dbm_to_watt(g_dbm))
                if by_power:
                    for K in ec.sweep["K"]:
                        cus = draw_users(cfg, K, ec.seed, draw)
                        make = (lambda p, cus=cus, G=G: TdmaProblem(
                            cus, st, G, gcom, float(dbm_to_watt(p)), ec.unscaled_floors))
                        extra = {"segments": n, "draw": draw, "gamma_sen_dbm": g_dbm, "K": K}
                        tasks.append(lambda make=make, extra=extra, layouts=layouts: _multi_rows(
                            cfg, protos, make, sorted(ec.sweep["P_max_dbm"]), "P_max_dbm",
                            layouts, sc, eps_step, extra, warm=True))
                else:
                    Ks = sorted(ec.sweep["K"])
                    cus = draw_users(cfg, max(Ks), ec.seed, draw)
                    make = (lambda K, cus=cus, G=G: TdmaProblem(
                        cus[:K], st, G, gcom, cfg.P_max, ec.unscaled_floors))
                    extra = {"segments": n, "draw": draw, "gamma_sen_dbm": g_dbm}
                    tasks.append(lambda make=make, extra=extra, layouts=layouts, Ks=Ks: _multi_rows(
                        cfg, protos, make, Ks, "K", layouts, sc, eps_step, extra, warm=False))
    return tasks


_TASKS: Dict[str, Callable] = {
    "gain_ss": _tasks_gain_ss,
    "gain_sa_sm": _tasks_gain_sa_sm,
    "pareto": _tasks_pareto,
    "sumrate_vs_power": lambda ec: _tasks_multi(ec, True),
    "sumrate_vs_K": lambda ec: _tasks_multi(ec, False),
}


def run_rows(ec: ExperimentConfig, threads: int = 1) -> List[dict]:
    """All sweep rows, in sweep order regardless of ``threads``."""
    tasks = _TASKS[ec.experiment](ec)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda t: t(), tasks))
    else:
        chunks = [t() for t in tasks]
    return [row for chunk in chunks for row in chunk]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % v
    return str(v)


def rows_to_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    header = list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if list(r) != header:
            raise RuntimeError("inconsistent row schema")
        w.writerow([_fmt(r[k]) for k in header])
    return buf.getvalue()


def run_experiment(ec: ExperimentConfig, out_path=None, threads: int = 1) -> Path:
    """Run the sweep, write the CSV and a ``.manifest.json`` sidecar."""
    out = Path(out_path or ec.output_path or f"{ec.experiment}.csv")
    parent = out.parent if str(out.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise ConfigError(f"output directory is not writable: {parent}")
    t0 = time.perf_counter()
    text = rows_to_csv(run_rows(ec, threads))
    out.write_text(text)
    manifest = {
        "config_sha256": hashlib.sha256(ec.raw_text.encode()).hexdigest(),
        "experiment": ec.experiment, "seed": ec.seed, "version": __version__,
        "unscaled_floors": ec.unscaled_floors,
        "wall_time_s": round(time.perf_counter() - t0, 3), "rows": text.count("\n") - 1,
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out
