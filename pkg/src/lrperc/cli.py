"""Batch experiment runner: ``lrperc <kind> --config FILE [--seed S] [--threads N] [--out DIR]``.

Configs are flat ``key = value`` text files (``#`` starts a comment).  Lists
are comma separated; point lists use ``;`` between points.  Unknown keys are
rejected.  Every run writes its artifacts to a temporary directory next to
``out`` and renames it into place only after all files are complete.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from ._threads import get_threads, set_threads
from .errors import ConfigError, LRPercError, PoleError
from .kernel import Kernel, Norm

KINDS = (
    "sample", "two-point", "kpoint", "volume-tail", "moments", "gyration", "mr", "beta-c",
    "subcritical", "russo", "gladkov-check", "geometry", "mobius-check",
)
SERIES_KINDS = {"two-point", "kpoint", "volume-tail", "moments", "gyration", "mr"}
EXIT_IO = 8


# --------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "two-point"
    # kernel
    d: int = 1
    alpha: float = 0.6
    norm: str = "euclidean"
    nearest_neighbour: bool = False
    beta: object = 0.0  # float or "critical"
    beta_factor: float = 1.0
    r_cut: float = math.inf
    # box and sampling
    L: int = 1024
    boundary: str = "free"
    coupled: bool = True
    samples: int = 1000
    seed: int = 0
    threads: int = 0
    out: str = "lrperc-out"
    # estimator parameters
    lags: tuple = ()
    tuples: tuple = ()
    n_grid: tuple = ()
    p_list: tuple = (1.0, 2.0)
    r_list: tuple = ()
    p: float = 2.0
    policy: str = "cutoff"
    beta_list: tuple = ()
    check_doubling: bool = True
    r: float = 16.0
    step: float = 0.0
    sphere_weight: float = 0.5
    fit_window: tuple = ()
    # critical point
    sizes: tuple = (4096, 8192, 16384)
    bracket: tuple = (1.0, 2.5)
    tolerance: float = 0.002
    critical_samples: int = 2000
    beta_c_file: str = ""
    # oracle / geometry
    n_graphs: int = 100
    max_vertices: int = 7
    max_edges: int = 14
    max_subset: int = 5
    points: tuple = ()
    points_file: str = ""
    sweep_max_n: int = 8
    n_pairs: int = 1000
    max_generators: int = 6
    max_set: int = 7


_LIST_INT = {"lags", "n_grid", "sizes"}
_LIST_FLOAT = {"p_list", "r_list", "beta_list", "bracket", "fit_window"}


def _field_types():
    return {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_float(s: str) -> float:
    return float(s.strip())


def _parse_int(s: str) -> int:
    s = s.strip()
    return int(s, 0) if s.lower().startswith("0x") else int(s)


def _split(s: str, sep: str):
    return [t for t in (x.strip() for x in s.split(sep)) if t]


def _parse_value(key: str, raw: str):
    kind = _field_types()[key]
    raw = raw.strip()
    if key == "beta":
        return "critical" if raw.lower() == "critical" else _parse_float(raw)
    if key in _LIST_INT:
        return tuple(_parse_int(t) for t in _split(raw, ","))
    if key in _LIST_FLOAT:
        return tuple(_parse_float(t) for t in _split(raw, ","))
    if key == "tuples":
        # tuples separated by ';', points by ',', coordinates by ':'
        return tuple(
            tuple(tuple(_parse_int(c) for c in pt.split(":")) for pt in _split(tup, ","))
            for tup in _split(raw, ";")
        )
    if key == "points":
        # rows separated by ';', coordinates by ','
        return tuple(tuple(_parse_float(c) for c in _split(row, ",")) for row in _split(raw, ";"))
    if kind == "bool":
        return _parse_bool(raw)
    if kind == "int":
        return _parse_int(raw)
    if kind == "float":
        return _parse_float(raw)
    return raw


def _format_value(key: str, value) -> str:
    if key == "tuples":
        return "; ".join(",".join(":".join(str(c) for c in pt) for pt in tup) for tup in value)
    if key == "points":
        return "; ".join(",".join(repr(float(c)) for c in row) for row in value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) and value > 0 else repr(value)
    return str(value)


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted)."""
    known = _field_types()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    cfg = dataclasses.replace(base or ExperimentConfig(), **values)
    validate(cfg)
    return cfg


def serialize_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{f.name} = {_format_value(f.name, getattr(cfg, f.name))}\n" for f in fields(cfg))


def validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    if cfg.norm not in {n.value for n in Norm}:
        raise ConfigError(f"unknown norm {cfg.norm!r}")
    if cfg.boundary not in ("free", "torus"):
        raise ConfigError(f"unknown boundary {cfg.boundary!r}")
    if cfg.d < 1 or cfg.L < 1 or cfg.samples < 1:
        raise ConfigError("d, L and samples must be positive")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.threads < 0:
        raise ConfigError("threads must be >= 0 (0 keeps the default)")
    if cfg.beta != "critical" and not (isinstance(cfg.beta, float) and cfg.beta >= 0):
        raise ConfigError(f"beta must be >= 0 or 'critical', got {cfg.beta!r}")
    if cfg.policy not in ("cutoff", "full"):
        raise ConfigError(f"unknown policy {cfg.policy!r}")
    if cfg.fit_window and len(cfg.fit_window) != 2:
        raise ConfigError("fit_window takes two values")
    if len(cfg.bracket) != 2:
        raise ConfigError("bracket takes two values")


def load_config(path: str | os.PathLike, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


# --------------------------------------------------------------------------
# running


@dataclass
class _Artifacts:
    files: dict = field(default_factory=dict)  # name -> text
    records: list = field(default_factory=list)  # metadata records
    plots: list = field(default_factory=list)  # (name, series, ylabel)
    extra: dict = field(default_factory=dict)

    def series(self, name, s, ylabel, plot=True):
        self.files[name] = s.to_csv()
        self.records.append({"record": "table", "file": name, **s.meta})
        if plot:
            self.plots.append((name.replace(".csv", ".svg"), s, ylabel))


def _kernel(cfg: ExperimentConfig) -> Kernel:
    return Kernel(d=cfg.d, alpha=cfg.alpha, norm_base=Norm(cfg.norm), nearest_neighbour=cfg.nearest_neighbour)


def _critical_point(cfg, k, art: _Artifacts):
    from .estimators import CriticalPoint, locate_beta_c

    if cfg.beta_c_file:
        try:
            cp = CriticalPoint.from_json(Path(cfg.beta_c_file).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read beta-c artifact {cfg.beta_c_file}: {exc}") from None
        art.extra["beta_c_source"] = str(cfg.beta_c_file)
    else:
        cp = locate_beta_c(k, cfg.sizes, cfg.bracket, cfg.tolerance, cfg.critical_samples, cfg.seed,
                           cfg.boundary)
        art.files["beta_c.json"] = cp.to_json() + "\n"
        art.extra["beta_c_source"] = "located"
    art.extra["beta_c"] = cp.beta_hat
    art.extra["beta_c_uncertainty"] = cp.uncertainty
    return cp


def _beta(cfg, k, art):
    if cfg.beta == "critical":
        cp = _critical_point(cfg, k, art)
        return cfg.beta_factor * cp.beta_hat, cp
    return cfg.beta_factor * cfg.beta, None


def _require(cfg, name):
    if not getattr(cfg, name):
        raise ConfigError(f"experiment {cfg.kind!r} needs '{name}'")
    return getattr(cfg, name)


def _run_sample(cfg, k, art):
    import io

    from .sampler import BoxSpec, cluster_queries, dump_configuration, sample_configuration

    beta, _ = _beta(cfg, k, art)
    box = BoxSpec(cfg.d, cfg.L, cfg.boundary)
    c = sample_configuration(k, beta, cfg.r_cut, box, cfg.seed, coupled=cfg.coupled)
    buf = io.StringIO()
    dump_configuration(c, buf)
    art.files["edges.txt"] = buf.getvalue()
    q = cluster_queries(c, cfg.r)
    hist = sorted(q["histogram"].items())
    art.files["clusters.csv"] = "size,count\n" + "".join(f"{s},{n}\n" for s, n in hist)
    sizes = c.cluster_sizes
    rows = [
        ("open_edge_count", c.open_edge_count),
        ("merged_count", c.merged_count),
        ("n_clusters", len(sizes)),
        ("largest_cluster", int(sizes[0])),
        ("origin_cluster", q["cluster_of"]),
        (f"max_cluster_in_ball_r={cfg.r!r}", q["max_cluster_in_ball"]),
    ]
    art.files["summary.csv"] = "quantity,value\n" + "".join(f"{a},{b}\n" for a, b in rows)
    art.records.append({"record": "table", "file": "summary.csv", "estimator": "sample", "beta": beta,
                        "L": cfg.L, "seed": cfg.seed})


def _run_two_point(cfg, k, art):
    from .estimators import centered_pairs, estimate_two_point

    beta, _ = _beta(cfg, k, art)
    pairs = centered_pairs(_require(cfg, "lags"), cfg.d)
    s = estimate_two_point(k, beta, cfg.r_cut, pairs, cfg.L, cfg.samples, cfg.seed, cfg.boundary, cfg.coupled)
    art.series("two_point.csv", s, "P(x <-> y)")


def _run_kpoint(cfg, k, art):
    from .estimators import estimate_kpoint

    beta, _ = _beta(cfg, k, art)
    s = estimate_kpoint(k, beta, cfg.r_cut, _require(cfg, "tuples"), cfg.L, cfg.samples, cfg.seed,
                        cfg.boundary, cfg.coupled)
    art.series("kpoint.csv", s, "tau_k")


def _run_volume_tail(cfg, k, art):
    from .estimators import estimate_volume_tail, volume_cap

    beta, _ = _beta(cfg, k, art)
    grid = cfg.n_grid or tuple(np.unique(np.geomspace(1, math.floor(volume_cap(k, cfg.L)), 30).astype(int)))
    s = estimate_volume_tail(k, beta, cfg.r_cut, grid, cfg.L, cfg.samples, cfg.seed, cfg.boundary, cfg.coupled)
    art.series("volume_tail.csv", s, "P(|K| >= n)")


def _run_moments(cfg, k, art):
    from .estimators import estimate_ball_moments

    beta, _ = _beta(cfg, k, art)
    out = estimate_ball_moments(k, beta, cfg.r_cut, cfg.p_list, _require(cfg, "r_list"), cfg.L, cfg.samples,
                                cfg.seed, cfg.boundary, cfg.coupled)
    for p, s in out.items():
        art.series(f"moments_p{p:g}.csv", s, f"E|K cap B_r|^{p:g}")


def _run_gyration(cfg, k, art):
    from .estimators import estimate_gyration

    beta, _ = _beta(cfg, k, art)
    s = estimate_gyration(k, beta, cfg.r_cut, cfg.p, _require(cfg, "r_list"), cfg.L, cfg.samples, cfg.seed,
                          cfg.boundary, cfg.coupled)
    art.series("gyration.csv", s, f"xi_{cfg.p:g}")


def _run_mr(cfg, k, art):
    from .estimators import estimate_Mr

    beta, _ = _beta(cfg, k, art)
    s = estimate_Mr(k, beta, cfg.policy, _require(cfg, "r_list"), cfg.L, cfg.samples, cfg.seed,
                    cfg.boundary, cfg.coupled)
    art.series("mr.csv", s, "M_r" if cfg.policy == "cutoff" else "M_r*")


def _run_beta_c(cfg, k, art):
    from .estimators import SeriesEstimate, locate_beta_c

    cp = locate_beta_c(k, cfg.sizes, cfg.bracket, cfg.tolerance, cfg.critical_samples, cfg.seed, cfg.boundary)
    art.files["beta_c.json"] = cp.to_json() + "\n"
    s = SeriesEstimate(np.array(cp.sizes[:-1], dtype=float), np.array(cp.crossings),
                       np.array(cp.crossing_errors), cfg.critical_samples,
                       {"estimator": "beta_c_crossings", "method": cp.method, "beta_hat": cp.beta_hat,
                        "uncertainty": cp.uncertainty, "sizes": list(cp.sizes), "seed": cfg.seed})
    art.series("crossings.csv", s, "crossing", plot=False)


def _run_subcritical(cfg, k, art):
    from .estimators import estimate_susceptibility_family, subcritical_two_point_ratio

    factors = _require(cfg, "beta_list")
    cp = _critical_point(cfg, k, art) if cfg.beta == "critical" else None
    betas = [f * cp.beta_hat for f in factors] if cp else list(factors)
    pts = estimate_susceptibility_family(k, betas, cfg.L, cfg.samples, cfg.seed,
                                         beta_c=cp,
                                         check_doubling=cfg.check_doubling, boundary=cfg.boundary,
                                         coupled=cfg.coupled)
    cols = [f.name for f in fields(pts[0])]
    art.files["susceptibility.csv"] = ",".join(cols) + "\n" + "".join(
        ",".join(repr(float(getattr(p, c))) for c in cols) + "\n" for p in pts)
    art.records.append({"record": "table", "file": "susceptibility.csv", "estimator": "susceptibility",
                        "betas": betas, "L": cfg.L, "samples": cfg.samples, "seed": cfg.seed})
    if cfg.lags:
        for i, pt in enumerate(pts):
            if pt.beta == 0:
                continue  # the ratio is 0/0
            s = subcritical_two_point_ratio(k, pt.beta, pt.chi, pt.chi_err, cfg.lags, cfg.L, cfg.samples,
                                            cfg.seed, cfg.boundary)
            art.series(f"two_point_ratio_{i}.csv", s, "P / (beta chi^2 J)", plot=False)


def _run_russo(cfg, k, art):
    from .estimators import russo_rate_check

    beta, _ = _beta(cfg, k, art)
    res = russo_rate_check(k, beta, cfg.r, cfg.L, cfg.samples, cfg.seed, step=cfg.step or None,
                           boundary=cfg.boundary, sphere_weight=cfg.sphere_weight)
    art.files["russo.csv"] = "r,step,lhs,rhs,sigma,z\n" + ",".join(
        repr(float(v)) for v in (res.r, res.step, res.lhs, res.rhs, res.sigma, res.z)) + "\n"
    art.records.append({"record": "table", "file": "russo.csv", "estimator": "russo", "beta": beta,
                        "L": cfg.L, "samples": cfg.samples, "seed": cfg.seed})


def gladkov_suite(n_graphs, max_vertices, max_edges, max_subset, seed, tol=1e-12):
    """Run every oracle inequality on random graphs; returns rows of
    ``(check, subset_size, n_checked, min_margin, violations)``."""
    import itertools

    from .oracle import _Tau, check_gladkov3, check_gladkov_higher, check_tree_graph, random_graph

    rng = np.random.default_rng(seed)
    stats: dict = {}

    def add(name, size, margin):
        n, lo, bad = stats.get((name, size), (0, math.inf, 0))
        stats[(name, size)] = (n + 1, min(lo, margin), bad + (margin < -tol))

    for _ in range(n_graphs):
        n = int(rng.integers(3, max_vertices + 1))
        m = int(rng.integers(0, min(max_edges, n * (n - 1) // 2) + 1))
        g = random_graph(rng, n, m)
        tau = _Tau(g)
        for size in range(3, min(max_subset, n) + 1):
            for A in itertools.combinations(range(n), size):
                if size == 3:
                    add("gladkov3", 3, check_gladkov3(g, *A, _tau=tau))
                    add("tree_graph", 3, check_tree_graph(g, *A, _tau=tau))
                add("gladkov_higher", size, check_gladkov_higher(g, A, _tau=tau))
                add("gladkov_singleton", size, check_gladkov_higher(g, A, variant="singleton", _tau=tau))
    return [(name, size, *v) for (name, size), v in sorted(stats.items())]


def _run_gladkov(cfg, k, art):
    rows = gladkov_suite(cfg.n_graphs, cfg.max_vertices, cfg.max_edges, cfg.max_subset, cfg.seed)
    art.files["gladkov.csv"] = "check,subset_size,n_checked,min_margin,violations\n" + "".join(
        f"{c},{s},{n},{lo!r},{bad}\n" for c, s, n, lo, bad in rows)
    art.records.append({"record": "table", "file": "gladkov.csv", "estimator": "gladkov-check",
                        "n_graphs": cfg.n_graphs, "seed": cfg.seed})
    art.extra["violations"] = sum(r[4] for r in rows)


def _points(cfg):
    if cfg.points_file:
        try:
            rows = [r for r in Path(cfg.points_file).read_text().splitlines() if r.strip() and not r.startswith("#")]
        except OSError as exc:
            raise ConfigError(f"cannot read points file: {exc}") from None
        return np.array([[float(c) for c in r.split(",")] for r in rows])
    return np.array(_require(cfg, "points"), dtype=float)


def _run_geometry(cfg, k, art):
    from .geometry import (PointSet, S_partition, diameter, greedy_order, spread_exact, spread_greedy,
                           sweep_exact, sweep_greedy)

    A = PointSet(_points(cfg))
    rows = [("diameter", diameter(A), "")]
    val, edges = spread_exact(A)
    rows.append(("spread", val, ";".join(f"{i}-{j}" for i, j in edges)))
    rows.append(("spread_greedy", spread_greedy(A), "-".join(map(str, greedy_order(A)[0]))))
    if len(A) <= cfg.sweep_max_n:
        val, tree = sweep_exact(A, cfg.sweep_max_n)
        rows.append(("sweep", val, tree.encode()))
    rows.append(("sweep_greedy", sweep_greedy(A), ""))
    val, parts = S_partition(A)
    rows.append(("S", val, "|".join(",".join(map(str, p)) for p in parts) if parts else ""))
    art.files["geometry.csv"] = "functional,value,optimizer\n" + "".join(
        f"{name},{v!r},{enc}\n" for name, v, enc in rows)
    art.records.append({"record": "table", "file": "geometry.csv", "estimator": "geometry", "n_points": len(A)})


def mobius_trials(n_pairs, max_generators, max_set, d, seed):
    """Covariance residuals of ``S`` under random Mobius words; poles are redrawn."""
    from .geometry import PointSet, S_value, mobius_apply, mobius_jacobian, random_mobius

    rng = np.random.default_rng(seed)
    rows = []
    while len(rows) < n_pairs:
        n = int(rng.integers(2, max_set + 1))
        g = int(rng.integers(1, max_generators + 1))
        m = random_mobius(rng, d, g)
        A = PointSet(rng.normal(size=(n, d)))
        try:
            image = np.array([mobius_apply(m, a) for a in A.points])
            jac = np.array([mobius_jacobian(m, a) for a in A.points])
        except PoleError:
            continue
        if len(np.unique(image, axis=0)) < n:
            continue
        s, s_img = S_value(A), S_value(image)
        pred = s * float(np.prod(jac ** (1.0 / d)))
        rows.append((len(rows), n, g, s, s_img, pred, abs(s_img - pred) / pred))
    return rows


def _run_mobius(cfg, k, art):
    rows = mobius_trials(cfg.n_pairs, cfg.max_generators, cfg.max_set, cfg.d, cfg.seed)
    art.files["mobius.csv"] = "trial,set_size,n_generators,S,S_image,S_predicted,rel_error\n" + "".join(
        f"{t},{n},{g},{a!r},{b!r},{c!r},{e!r}\n" for t, n, g, a, b, c, e in rows)
    art.records.append({"record": "table", "file": "mobius.csv", "estimator": "mobius-check",
                        "n_pairs": cfg.n_pairs, "seed": cfg.seed})
    art.extra["max_rel_error"] = max(r[-1] for r in rows)


_HANDLERS = {
    "sample": _run_sample,
    "two-point": _run_two_point,
    "kpoint": _run_kpoint,
    "volume-tail": _run_volume_tail,
    "moments": _run_moments,
    "gyration": _run_gyration,
    "mr": _run_mr,
    "beta-c": _run_beta_c,
    "subcritical": _run_subcritical,
    "russo": _run_russo,
    "gladkov-check": _run_gladkov,
    "geometry": _run_geometry,
    "mobius-check": _run_mobius,
}


def _plot(path: Path, s, ylabel: str, window) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .errors import WindowError
    from .estimators import fit_power_law

    matplotlib.rcParams["svg.hashsalt"] = "lrperc"
    pos = s.mean > 0
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.errorbar(s.abscissa[pos], s.mean[pos], yerr=s.stderr[pos], fmt="o", ms=3, capsize=2)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_ylabel(ylabel)
    ax.set_xlabel("abscissa")
    try:
        sel = s.select(pos if not window else pos & (s.abscissa >= window[0]) & (s.abscissa <= window[1]))
        fit = fit_power_law(sel, n_boot=200, seed=0)
        x = np.geomspace(*fit.window, 50)
        ax.plot(x, fit.amplitude * x**fit.exponent, "-", lw=1)
        ax.set_title(f"slope {fit.exponent:.3f} [{fit.ci_low:.3f}, {fit.ci_high:.3f}]", fontsize=9)
    except WindowError:
        ax.set_title("no fit (fewer than 5 positive points)", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _promote(tmp: Path, out: Path) -> None:
    old = None
    if out.exists():
        old = out.with_name(f".{out.name}.old-{os.getpid()}")
        os.replace(out, old)
    os.replace(tmp, out)
    if old is not None:
        shutil.rmtree(old, ignore_errors=True)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one experiment and atomically publish its artifact directory; returns the manifest."""
    validate(cfg)
    t0 = time.perf_counter()
    if cfg.threads:
        set_threads(cfg.threads)
    k = _kernel(cfg)
    out = Path(cfg.out).resolve()
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.tmp-", dir=out.parent))
    try:
        art = _Artifacts()
        _HANDLERS[cfg.kind](cfg, k, art)
        for name, text in art.files.items():
            (tmp / name).write_text(text)
        for name, s, ylabel in art.plots:
            _plot(tmp / name, s, ylabel, cfg.fit_window)
        (tmp / "config.txt").write_text(serialize_config(cfg))
        run = {
            "record": "run",
            "kind": cfg.kind,
            "code_version": __version__,
            "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
            "threads": get_threads(),
            "wall_time_s": time.perf_counter() - t0,
            **art.extra,
        }
        from .estimators.series import jsonable

        lines = [json.dumps(jsonable(run), sort_keys=True)]
        lines += [json.dumps(jsonable(r), sort_keys=True) for r in art.records]
        (tmp / "metadata.jsonl").write_text("\n".join(lines) + "\n")
        files = {p.name: _sha256(p) for p in sorted(tmp.iterdir())}
        manifest = {"kind": cfg.kind, "code_version": __version__, "files": files, "output": str(out)}
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        _promote(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return manifest


# --------------------------------------------------------------------------
# command line


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=lambda s: int(s, 0), help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="kernel threads; never changes outputs")
    common.add_argument("--out", help="output directory (replaced atomically)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p = argparse.ArgumentParser(prog="lrperc", description="Long-range percolation experiments.")
    p.add_argument("--version", action="version", version=f"lrperc {__version__}")
    sub = p.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        sub.add_parser(kind, parents=[common], help=f"run a {kind} experiment")
    return p


def resolve_config(args) -> ExperimentConfig:
    text = ""
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    cfg = parse_config(text)
    for item in args.set:
        try:
            cfg = parse_config(item, base=cfg)
        except ConfigError as exc:
            raise ConfigError(f"--set {item!r}: {str(exc).split(': ', 1)[-1]}") from None
    if args.config and "kind" in {ln.split("=", 1)[0].strip() for ln in text.splitlines() if "=" in ln}:
        if cfg.kind != args.kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}")
    over = {"kind": args.kind}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.threads is not None:
        over["threads"] = args.threads
    if args.out is not None:
        over["out"] = args.out
    cfg = dataclasses.replace(cfg, **over)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.print_config:
            sys.stdout.write(serialize_config(cfg))
            return 0
        manifest = run_experiment(cfg)
    except LRPercError as exc:
        print(f"lrperc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"lrperc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
