"""Experiment harness: configuration, dispatch, parallel replicas, output.

Experiments are described by a JSON-serializable configuration and
return flat dictionaries of results.  Replica-based experiments are
parallelized over fixed blocks of replica indices; every replica owns a
counter-based random stream keyed by (seed, experiment, replica), so the
results are identical for any thread count.
"""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .billiard2d import ConvexDomain, check_integral_geometry, \
    jacobian_identity_defect
from .limitproc import EdgeFlow, branching_probability, hitting_time
from .model1d import FlatModelSpec, PhasePoint, build_graph
from .regularize import (BranchingResult, aligned_eps, sensitive_three_well,
                         simulate_with_dyn_noise, simulate_with_init_noise,
                         strip_ratio, wilson_interval)
from .rngs import replica_blocks, substream
from .sim1d import simulate_flat
from .walk import stopping_parity, uniform_sampler

__all__ = ["ExperimentConfig", "run_experiment", "ks_distance",
           "wilson_interval", "write_results"]


def ks_distance(samples, cdf):
    """sup |empirical CDF - cdf| for sorted or unsorted samples."""
    xs = np.sort(np.asarray(samples, float))
    n = xs.size
    F = np.asarray([cdf(x) for x in xs], float) if callable(cdf) else cdf(xs)
    grid = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(F - grid)), np.max(np.abs(F - (grid - 1.0 / n)))))


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 0
    replicas: int = 0
    params: dict = field(default_factory=dict)
    expect: list = field(default_factory=list)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            raw = json.load(fh)
        return cls(**raw)

    def to_dict(self):
        return {"experiment": self.experiment, "seed": self.seed,
                "replicas": self.replicas, "params": self.params,
                "expect": self.expect}


def _flat_spec(params):
    return FlatModelSpec(tuple(params["wall_positions"]),
                         tuple(params.get("wall_heights", ())),
                         tuple(params["restitution"]))


def _x0(params):
    return PhasePoint(params["q0"], params["p0"])


# ---------------------------------------------------------------------------
# experiment implementations

def _exp_averaging_flat(cfg):
    p = cfg.params
    spec = _flat_spec(p)
    graph = build_graph(spec)
    eps = p["eps"]
    horizon = p.get("horizon", 2.0)
    r = simulate_flat(spec, _x0(p), eps, horizon=horizon,
                      stop_at_well=False, graph=graph)
    H0 = 0.5 * p["p0"] ** 2
    K0 = r.slow_path.K[0]
    flow = EdgeFlow(spec, K0, graph)
    v = graph.vertex_below(K0)
    out = {"eps": eps, "H0": H0, "n_collisions": len(r.log),
           "final_well": r.final_well, "status": r.status}
    if v is not None:
        t0 = flow.hitting_time(H0, v.energy)
        ts = np.linspace(0.0, 0.9 * t0, 500)
        sup = float(np.max(np.abs(r.slow_path.energy_at(ts)
                                  - flow.energy(ts, H0))))
        idx = np.argmax(r.slow_path.H <= v.energy)
        out.update({
            "t0": t0,
            "sup_dev": sup,
            "t_hit": float(r.slow_path.times[idx]) if idx else None,
            "p_left": branching_probability(spec, v, graph),
        })
    return out


def _branching_summary(res: BranchingResult, wells=(1, 2), z=3.0):
    out = {"n_replicas": res.n_replicas}
    for w in wells:
        lo, hi = res.interval(w, z)
        out[f"count_{w}"] = res.count(w)
        out[f"freq_{w}"] = res.frequency(w)
        out[f"ci_{w}"] = [lo, hi]
    return out


def _init_block(args):
    p, seed, n, block = args
    spec = _flat_spec(p)
    res = simulate_with_init_noise(spec, _x0(p), p["eps"], p["delta"], n,
                                   seed, replicas=block)
    return list(block), res.wells[list(block)].tolist()


def _dyn_block(args):
    p, seed, n, block = args
    spec = _flat_spec(p)
    res = simulate_with_dyn_noise(spec, _x0(p), p["eps"], p["delta"],
                                  p["noise_law"], n, seed, replicas=block)
    return list(block), res.wells[list(block)].tolist()


def _disk_branch_block(args):
    p, seed, n, block = args
    out = []
    empty = np.zeros(0)
    for rep in block:
        rep_seed = int(substream(seed, "billiard-branching", rep)
                       .integers(2**31 - 1))
        _, region, status = _fast.disk_run(
            rep_seed, p.get("s0", 0.3), p.get("theta0", 1.0), p["H0"],
            p["eps"], p["c_left"], p["c_right"], p["threshold"], 0.0,
            np.inf, p.get("a_const", 1.0), p.get("noise_h", 5e-3),
            p.get("noise_duration", 0.2), empty, empty)
        out.append(region if status == _fast.DISK_THRESHOLD else -1)
    return list(block), out


def _run_blocks(worker, cfg, n_workers):
    n = cfg.replicas
    blocks = replica_blocks(n)
    args = [(cfg.params, cfg.seed, n, list(b)) for b in blocks]
    wells = np.full(n, -1, dtype=np.int64)
    if n_workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as ex:
            results = list(ex.map(worker, args))
    else:
        results = [worker(a) for a in args]
    for idx, vals in results:
        wells[idx] = vals
    return BranchingResult(wells, n)


def _exp_branching_init(cfg, n_workers=1):
    res = _run_blocks(_init_block, cfg, n_workers)
    wells = cfg.params.get("report_wells", [1, 2])
    return _branching_summary(res, wells)


def _exp_branching_dyn(cfg, n_workers=1):
    res = _run_blocks(_dyn_block, cfg, n_workers)
    wells = cfg.params.get("report_wells", [1, 2])
    return _branching_summary(res, wells)


def _exp_sensitivity(cfg, n_workers=1):
    """Conditional well frequencies of the three-well system at aligned eps."""
    p = cfg.params
    spec = sensitive_three_well(p.get("c_left", 2.0), p.get("c", 1.0),
                                p.get("h_high", 1.0), p.get("h_low", 0.6))
    out = {}
    for label, nu in (("a", p["nu_a"]), ("b", p["nu_b"])):
        eps = aligned_eps(spec, nu)
        sub = ExperimentConfig(cfg.experiment, cfg.seed, cfg.replicas, {
            "wall_positions": list(spec.wall_positions),
            "wall_heights": list(spec.wall_heights),
            "restitution": list(spec.restitution),
            "q0": p.get("q0", 0.5), "p0": p.get("p0", 1.8),
            "eps": eps, "delta": p["delta"],
        })
        if p.get("noise", "init") == "dyn":
            sub.params["noise_law"] = p["noise_law"]
            res = _run_blocks(_dyn_block, sub, n_workers)
        else:
            res = _run_blocks(_init_block, sub, n_workers)
        out[f"eps_{label}"] = eps
        out[f"nu_{label}"] = nu
        out[f"counts_{label}"] = [res.count(w) for w in (1, 2, 3)]
        out[f"cond_freq_2_{label}"] = res.conditional_frequency(2, (2, 3))
    out["swing"] = abs(out["cond_freq_2_a"] - out["cond_freq_2_b"])
    return out


def _exp_walk_parity(cfg, n_workers=1):
    p = cfg.params
    xi = uniform_sampler(*p["xi_law"])
    eta = uniform_sampler(*p["eta_law"])
    rng = substream(cfg.seed, "walk-parity")
    res = stopping_parity(xi, eta, p["threshold"], cfg.replicas, rng)
    mean_xi = 0.5 * sum(p["xi_law"])
    mean_eta = 0.5 * sum(p["eta_law"])
    lo, hi = wilson_interval(res.n_even, res.n_walks)
    return {"p_even": res.p_even, "n_even": res.n_even,
            "mean_steps": res.mean_steps,
            "limit": mean_eta / (mean_xi + mean_eta),
            "ci": [lo, hi]}


def _exp_strip_ratio(cfg, n_workers=1):
    p = cfg.params
    spec = _flat_spec(p)
    return {"ratio": strip_ratio(spec, p["eps"],
                                 first_wall=p.get("first_wall", 0),
                                 n_pairs=p.get("n_pairs", 50))}


def _exp_billiard_decay(cfg, n_workers=1):
    p = cfg.params
    H0, eps = p["H0"], p["eps"]
    cap = int(np.ceil(H0 / (eps * min(p.get("c_left", 1.0),
                                      p.get("c_right", 1.0))))) + 10
    rec_t = np.zeros(cap)
    rec_H = np.zeros(cap)
    seed = int(substream(cfg.seed, "billiard-decay").integers(2**31 - 1))
    n, _, status = _fast.disk_run(
        seed, p.get("s0", 0.3), p.get("theta0", 1.0), H0, eps,
        p.get("c_left", 1.0), p.get("c_right", 1.0), -1.0,
        p.get("stop_energy", 0.02 * H0), np.inf, p.get("a_const", 1.0),
        p.get("noise_h", 1e-3), p.get("noise_duration", -1.0), rec_t, rec_H)
    ts, Hs = rec_t[:n], rec_H[:n]
    # mean loss rate under the invariant measure: d sqrt(H) / dt is constant
    c_mean = 0.5 * (p.get("c_left", 1.0) + p.get("c_right", 1.0))
    k = c_mean * np.sqrt(2.0) / np.pi
    H_closed = np.maximum(np.sqrt(H0) - k * ts, 0.0) ** 2
    floor = p.get("compare_above", 0.05 * H0)
    mask = Hs > floor
    rel = float(np.max(np.abs(Hs[mask] - H_closed[mask])) / H0)
    return {"n_collisions": int(n), "status": int(status),
            "max_rel_dev": rel, "H_final": float(Hs[-1])}


def _exp_billiard_branching(cfg, n_workers=1):
    res = _run_blocks(_disk_branch_block, cfg, n_workers)
    p = cfg.params
    out = _branching_summary(res, (1, 2))
    out["limit"] = p["c_left"] / (p["c_left"] + p["c_right"])
    return out


def _exp_liouville(cfg, n_workers=1):
    p = cfg.params
    n = cfg.replicas
    out_s = np.zeros(n)
    out_th = np.zeros(n)
    seed = int(substream(cfg.seed, "liouville-check").integers(2**31 - 1))
    _fast.disk_chain_thetas(seed, p.get("s0", 0.3), p.get("theta0", 1.0),
                            n, p.get("noise_duration", 0.05),
                            p.get("noise_h", 1e-3), p.get("a_const", 1.0),
                            out_s, out_th)
    burn = p.get("burn_in", 1000)
    ks_th = ks_distance(out_th[burn:], lambda x: 0.5 * (1.0 - np.cos(x)))
    ks_s = ks_distance(out_s[burn:], lambda x: x / (2.0 * np.pi))
    dom = ConvexDomain.ellipse(p.get("a", 1.5), p.get("b", 1.0))
    defects = [abs(jacobian_identity_defect(dom, s, th))
               for s, th in p.get("jacobian_points",
                                  [[0.3, 0.7], [2.0, 1.2], [5.0, 2.5]])]
    return {"ks_theta": ks_th, "ks_s": ks_s,
            "max_jacobian_defect": float(max(defects))}


def _exp_integral_geometry(cfg, n_workers=1):
    p = cfg.params
    if p.get("kind", "circle") == "circle":
        dom = ConvexDomain.circle(p.get("R", 1.0))
    else:
        dom = ConvexDomain.ellipse(p["a"], p["b"])
    mass, chord = check_integral_geometry(dom, p.get("n_s", 400),
                                          p.get("n_theta", 200))
    return {
        "mass": mass, "chord_integral": chord,
        "mass_rel_err": abs(mass / (2.0 * dom.perimeter) - 1.0),
        "chord_rel_err": abs(chord / (2.0 * np.pi * dom.area) - 1.0),
    }


_EXPERIMENTS = {
    "averaging-1d": lambda cfg, n_workers=1: _exp_averaging_flat(cfg),
    "branching-init": _exp_branching_init,
    "branching-dyn": _exp_branching_dyn,
    "sensitivity": _exp_sensitivity,
    "walk-parity": _exp_walk_parity,
    "strip-ratio": _exp_strip_ratio,
    "billiard-decay": _exp_billiard_decay,
    "billiard-branching": _exp_billiard_branching,
    "liouville-check": _exp_liouville,
    "integral-geometry": _exp_integral_geometry,
}


def run_experiment(cfg: ExperimentConfig, n_workers=1):
    """Dispatch an experiment; returns a JSON-serializable result dict."""
    try:
        fn = _EXPERIMENTS[cfg.experiment]
    except KeyError:
        raise ValueError(f"unknown experiment {cfg.experiment!r}; known: "
                         f"{sorted(_EXPERIMENTS)}") from None
    result = fn(cfg, n_workers=n_workers)
    return {"config": cfg.to_dict(), "results": _jsonable(result)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def check_expectations(report):
    """Evaluate the config's `expect` entries against the results.

    Each entry: {"key": ..., "target": x, "atol": d} or
    {"key": ..., "max": x} / {"key": ..., "min": x}.  Returns a list of
    (key, ok, value) triples.
    """
    out = []
    results = report["results"]
    for e in report["config"].get("expect", []):
        val = results[e["key"]]
        if "target" in e:
            ok = abs(val - e["target"]) <= e["atol"]
        elif "max" in e:
            ok = val <= e["max"]
        else:
            ok = val >= e["min"]
        out.append((e["key"], bool(ok), val))
    return out


def write_results(report, out_dir):
    """Write the report as sorted JSON plus a flat CSV of scalar results."""
    os.makedirs(out_dir, exist_ok=True)
    name = report["config"]["experiment"]
    with open(os.path.join(out_dir, f"{name}.json"), "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for k in sorted(report["results"]):
            v = report["results"][k]
            if np.isscalar(v) or v is None:
                w.writerow([k, v])
