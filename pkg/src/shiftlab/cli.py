"""``shiftlab`` experiment runner.

``shiftlab run <config.json | preset> [--out DIR] [--max-k N] [--tol X]`` runs
the checks and witness constructions a JSON config describes and writes
``report.json``, one CSV per check and one SVG per recorded quantity.
``shiftlab list-presets`` lists the bundled configs.

Exit codes: 0 if every check is satisfied, 2 if any is not, 1 on error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import constructions as cons
from . import criteria as crit
from . import cstar
from .core import BasisWindow, CompactOp, UnitaryOp, identity, inverse, op_norm, projection_P
from .errors import ConfigError, ConstructionFailedError, HorizonExceededError, ShiftlabError
from .module_space import IndexRange, ModuleVector, from_json
from .report import CriterionReport
from .shift import ShiftOperator, WeightFamily

EXIT_OK, EXIT_ERROR, EXIT_NOT_SATISFIED = 0, 1, 2

SHIFT_CHECKS = ("dense_hypercyclicity", "pointwise_sufficient", "chaos", "avg_transitivity",
                "necessary_periodic_T", "necessary_periodic_S")
PHI_CHECKS = ("hc_criterion_phi", "pointwise_multiplier")
PHI_FAMILIES = ("phi-commutative", "phi-compact")


# ---------------------------------------------------------------- config parsing


def _get(d: dict, key: str, kind=None, default=...):
    if key not in d:
        if default is ...:
            raise ConfigError(f"missing required field {key!r}")
        return default
    v = d[key]
    if v is None and default is None:
        return v
    if kind is not None and (not isinstance(v, kind) or isinstance(v, bool) and kind is not bool):
        raise ConfigError(f"field {key!r} has the wrong type: {v!r}")
    return v


def _matrix(spec, window: BasisWindow, base: Path) -> CompactOp:
    """A number (scalar times I), ``{"re", "im"}`` arrays, or ``{"file": path}`` holding those."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return identity(window) * float(spec)
    if not isinstance(spec, dict):
        raise ConfigError(f"cannot read a matrix from {spec!r}")
    if "file" in spec:
        spec = json.loads(_resolve(base, spec["file"]).read_text())
    try:
        a = np.asarray(spec["re"], dtype=float) + 1j * np.asarray(spec.get("im", 0.0), dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad matrix entry: {exc}") from exc
    if a.shape != (window.dim, window.dim):
        raise ConfigError(f"matrix has shape {a.shape}, window needs {(window.dim, window.dim)}")
    return CompactOp(window, a)


def _resolve(base: Path, name: str) -> Path:
    p = Path(name)
    p = p if p.is_absolute() else base / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {p}")
    return p


def _schedule(spec: dict, max_k: int | None) -> crit.PowerSchedule:
    kind = _get(spec, "type", str)
    n = _get(spec, "max_k", int, crit.DEFAULT_MAX_K)
    if kind == "explicit":
        sched = crit.PowerSchedule(tuple(_get(spec, "t", list)))
    elif kind == "arithmetic":
        sched = crit.PowerSchedule.arithmetic(_get(spec, "start", int, 1), _get(spec, "step", int, 1), n)
    elif kind == "geometric":
        sched = crit.PowerSchedule.geometric(_get(spec, "start", int, 1), _get(spec, "ratio", (int, float), 2.0), n)
    else:
        raise ConfigError(f"unknown schedule type {kind!r}")
    if max_k is not None:
        sched = crit.PowerSchedule(sched.t, max_k)
    return sched


def _unitary(spec: dict | None, window: BasisWindow, rng: np.random.Generator) -> UnitaryOp:
    spec = spec or {"type": "identity"}
    kind = _get(spec, "type", str)
    if kind == "identity":
        return UnitaryOp.identity(window)
    if kind == "diagonal-phase":
        theta = spec.get("theta")
        theta = rng.uniform(0, 2 * math.pi, window.dim) if theta is None else theta
        return UnitaryOp.phases(window, theta)
    if kind == "permutation":
        return UnitaryOp.permutation(window, _get(spec, "perm", list))
    if kind == "shift":
        return UnitaryOp.shift(window, _get(spec, "s", int))
    if kind == "random":
        return UnitaryOp.random(window, rng)
    raise ConfigError(f"unknown unitary type {kind!r}")


def _translation_params(spec: dict) -> cons.TranslationWeightParams:
    preset = _get(spec, "preset", str, "constant-by-sign")
    eps = _get(spec, "eps", (int, float))
    r = _get(spec, "r", (int, float), 1.0)
    if preset == "constant-by-sign":
        return cons.TranslationWeightParams.constant_by_sign(eps, r)
    if preset == "step":
        return cons.TranslationWeightParams.step(eps, r)
    if preset == "plateau":
        return cons.TranslationWeightParams.plateau(eps, r, _get(spec, "width", (int, float), 4.0),
                                                    _get(spec, "height", (int, float), None))
    if preset == "array":
        return cons.TranslationWeightParams.array(eps, _get(spec, "values_pos", list),
                                                  _get(spec, "values_neg", list, None), r)
    raise ConfigError(f"unknown translation preset {preset!r}")


def _membership(spec) -> callable:
    """Index subsequence as an explicit list or ``{"every": p}`` (multiples of p)."""
    if isinstance(spec, list):
        members = {int(v) for v in spec}
        return lambda j: j in members
    if isinstance(spec, dict) and "every" in spec:
        p = int(spec["every"])
        if p < 1:
            raise ConfigError("'every' must be positive")
        return lambda j: j % p == 0
    raise ConfigError(f"cannot read an index subsequence from {spec!r}")


def _custom_family(spec: dict, window: BasisWindow, base: Path) -> WeightFamily:
    mats = [_matrix(s, window, base) for s in _get(spec, "matrices", list)]
    if not mats:
        raise ConfigError("custom-matrix-list needs at least one matrix")
    offset = _get(spec, "offset", int, 0)
    M = max(op_norm(a) for a in mats)
    M_inv = max(op_norm(inverse(a)) for a in mats)

    def provider(j):
        return mats[min(max(j - offset, 0), len(mats) - 1)]

    return WeightFamily(window, provider, M, M_inv, name="custom-matrix-list")


def _family(spec: dict, window: BasisWindow, base: Path, grid: cons.GridModel) -> WeightFamily:
    kind = _get(spec, "type", str)
    if kind == "salas":
        return cons.salas_weights(window, _get(spec, "lambda", (int, float)))
    if kind == "translation":
        return cons.translation_weights(grid, _translation_params(spec))
    if kind == "mixed":
        return cons.mixed_translation_weights(
            grid, _translation_params(spec), _membership(_get(spec, "n_k")), _membership(_get(spec, "n_i")),
            _get(spec, "mult_pos", (int, float)), _get(spec, "mult_neg", (int, float)))
    if kind == "custom-matrix-list":
        return _custom_family(spec, window, base)
    raise ConfigError(f"unknown family type {kind!r}")


def _provider(spec: dict | None, window: BasisWindow, m: int, grid: cons.GridModel, base: Path):
    spec = spec or {"type": "constant-P_m"}
    kind = _get(spec, "type", str)
    pm = _get(spec, "m", int, m)
    if kind == "cutoff":
        return cons.cutoff_provider(window, pm, grid)
    if kind == "constant-P_m":
        return crit.ApproximantProvider.constant(window, pm)
    if kind == "custom":
        d = _matrix(_get(spec, "D"), window, base)
        g = _matrix(spec["G"], window, base) if "G" in spec else d
        return crit.ApproximantProvider(lambda j, k: (d, g), name="custom")
    raise ConfigError(f"unknown provider type {kind!r}")


def _vector(spec, window: BasisWindow, J: int, m: int, base: Path, seed: int) -> ModuleVector:
    """Dense-class vector from ``{"seed": s}`` or ``{"file": path}`` (module-vector JSON)."""
    spec = spec or {"seed": seed}
    if "file" in spec:
        x = from_json(_resolve(base, spec["file"]).read_text())
        if x.window != window:
            raise ConfigError("module vector file uses a different window")
        return x
    rng = np.random.default_rng(_get(spec, "seed", int))
    p = projection_P(window, m)
    d = window.dim
    coeffs = {}
    for j in IndexRange(J):
        c = p @ CompactOp(window, rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
        coeffs[j] = c * (1.0 / op_norm(c))
    return ModuleVector(window, coeffs)


@dataclass
class Experiment:
    config: dict
    base: Path
    max_k: int | None = None
    tol: float | None = None

    def __post_init__(self):
        c = self.config
        if not isinstance(c, dict):
            raise ConfigError("config must be a JSON object")
        self.seed = _get(c, "seed", int, 0)
        self.rng = np.random.default_rng(self.seed)
        self.tol_ = self.tol if self.tol is not None else _get(c, "tol", (int, float), crit.DEFAULT_TOL)
        if not self.tol_ > 0:
            raise ConfigError("tol must be positive")
        self.family_spec = _get(c, "family", dict)
        self.kind = _get(self.family_spec, "type", str)
        self.sched = _schedule(_get(c, "schedule", dict), self.max_k)
        self.checks = _get(c, "checks", list)
        allowed = PHI_CHECKS if self.kind in PHI_FAMILIES else SHIFT_CHECKS
        for name in self.checks:
            if name not in allowed:
                raise ConfigError(f"check {name!r} is not available for family {self.kind!r}")
        if self.kind in PHI_FAMILIES:
            self._setup_phi()
        else:
            self._setup_shift()

    # -- weighted shifts on the module
    def _setup_shift(self):
        c = self.config
        self.window = BasisWindow(_get(c, "m_max", int))
        grid_spec = _get(c, "grid", dict, {})
        self.grid = cons.GridModel.for_window(self.window, _get(grid_spec, "h", (int, float), 1.0))
        self.J = _get(c, "J", int, 0)
        self.m = _get(c, "m", int, 0)
        self.series_cutoff = _get(c, "series_cutoff", int, 8)
        self.family = _family(self.family_spec, self.window, self.base, self.grid)
        self.op = ShiftOperator(self.family, _unitary(c.get("unitary"), self.window, self.rng))
        self.prov = _provider(c.get("provider"), self.window, self.m, self.grid, self.base)
        self.witnesses = _get(c, "witnesses", list, [])

    def _run_shift_check(self, name: str) -> CriterionReport:
        op, sched, tol = self.op, self.sched, self.tol_
        if name == "dense_hypercyclicity":
            return crit.check_dense_hypercyclicity(op, sched, self.prov, self.J, self.m, tol)
        if name == "pointwise_sufficient":
            vecs = [self.window.basis_vector(i) for i in range(-self.m, self.m + 1)]
            return crit.check_pointwise_sufficient(op, sched, crit.TestVectorSets.uniform(self.J, vecs), self.J, tol)
        if name == "chaos":
            return crit.check_chaos(op, sched, self.prov, self.J, self.m, tol, self.series_cutoff)
        if name == "avg_transitivity":
            return crit.check_avg_transitivity(op, sched, self.prov, self.J, self.m, tol)
        fn = crit.check_necessary_periodic_T if name == "necessary_periodic_T" else crit.check_necessary_periodic_S
        return fn(self.family, sched, self.J, tol, self.m if self.family.truncated else None)

    def _run_witness(self, spec: dict) -> dict:
        kind = _get(spec, "type", str)
        x = _vector(spec.get("x"), self.window, self.J, self.m, self.base, self.seed + 1)
        y = _vector(spec.get("y"), self.window, self.J, self.m, self.base, self.seed + 2)
        ts = _get(spec, "t", list, list(self.sched.t))
        out = []
        for t in ts:
            if kind == "transitivity":
                _, diag = cons.build_transitivity_witness(self.op, x, y, self.prov, t, self.J, self.m)
            elif kind == "avg":
                _, diag = cons.build_avg_witness(self.op, x, y, self.prov, t, self.J, self.m)
            elif kind == "periodic":
                _, diag = cons.build_periodic_point(self.op, y, self.prov, t, self.J, self.m,
                                                    self.series_cutoff, self.tol_)
                diag = {k: v for k, v in diag.items() if k != "supports"}
            else:
                raise ConfigError(f"unknown witness type {kind!r}")
            out.append(diag)
        return {"type": kind, "sweep": out}

    # -- the C*-algebraic shift
    def _setup_phi(self):
        c, f = self.config, self.family_spec
        self.alpha = _get(f, "alpha", int, 0)
        if self.kind == "phi-commutative":
            ctx, phi = cstar.commutative_context(_get(f, "window_size", int, 201), _get(f, "alpha_step", int, 1))
            b = _get(f, "b", dict, {"negative": 2.0, "nonnegative": 0.5})
            self.ps = cstar.PhiShift(ctx, phi, cstar.ZFunction.by_sign(_get(b, "negative", (int, float)),
                                                                        _get(b, "nonnegative", (int, float))))
            radii = _get(f, "omega_radii", list, [self.alpha])
            self.omega = [ctx.approx_unit(int(r)) for r in radii]
        else:
            window = BasisWindow(_get(c, "m_max", int))
            U = _unitary(c.get("unitary"), window, self.rng)
            w = _get(f, "W", dict)
            if _get(w, "type", str) == "salas-shift":
                W = cons.salas_shift_matrix(window, _get(w, "lambda", (int, float)))
            else:
                W = _matrix(w, window, self.base)
            self.ps = cstar.compact_phi_shift(window, W, U, _get(f, "horizon", int, None))
            self.omega = [self.ps.ctx.approx_unit(m) for m in _get(f, "omega_m", list, [self.alpha])]
        self.witnesses = []

    def _run_phi_check(self, name: str) -> CriterionReport:
        if name == "hc_criterion_phi":
            prov = cstar.corollary_provider(self.ps, self.alpha, self.omega, self.omega)
            return cstar.check_hc_criterion_phi(self.ps, self.alpha, self.sched, prov, self.tol_)
        return cstar.check_pointwise_multiplier(self.ps, self.omega, self.omega, self.sched, self.tol_)

    def run_check(self, name: str) -> tuple[CriterionReport, float]:
        t0 = time.perf_counter()
        rep = self._run_phi_check(name) if self.kind in PHI_FAMILIES else self._run_shift_check(name)
        return rep, time.perf_counter() - t0


# ---------------------------------------------------------------- outputs


def _slug(s: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", s).strip("_")


def render_svg(title: str, series: dict, width: int = 640, height: int = 400) -> str:
    """Line plot of ``{label: (t, values)}`` with a log10 y axis; zeros are dropped."""
    pad_l, pad_r, pad_t, pad_b = 70, 150, 40, 50
    pts = {}
    for label, (t, v) in series.items():
        keep = [(float(a), math.log10(b)) for a, b in zip(t, v) if b > 0]
        if keep:
            pts[label] = keep
    xs = [p[0] for ps in pts.values() for p in ps] or [0.0, 1.0]
    ys = [p[1] for ps in pts.values() for p in ps] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(x):
        return pad_l + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return pad_t + (y1 - y) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    step = max(1, (y1 - y0) // 8)
    for e in range(y0, y1 + 1, step):
        y = sy(e)
        out.append(f'<line x1="{pad_l}" y1="{y:.1f}" x2="{pad_l + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{pad_l - 5}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for x in (x0, (x0 + x1) / 2, x1):
        out.append(f'<text x="{sx(x):.1f}" y="{pad_t + ph + 15}" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">t_k</text>')
    out.append(f'<text x="15" y="{pad_t + ph / 2:.1f}" transform="rotate(-90 15 {pad_t + ph / 2:.1f})" '
               f'text-anchor="middle">log10 value</text>')
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
    for i, (label, ps) in enumerate(sorted(pts.items())):
        col = colors[i % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in ps)
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{coords}"/>')
        ly = pad_t + 14 * i + 10
        out.append(f'<line x1="{pad_l + pw + 10}" y1="{ly}" x2="{pad_l + pw + 30}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{pad_l + pw + 35}" y="{ly + 4}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _write_outputs(out: Path, reports: dict):
    out.mkdir(parents=True, exist_ok=True)
    for name, rep in reports.items():
        (out / f"{_slug(name)}.csv").write_text(rep.to_csv())
        for q in rep.quantities():
            series = {f"j={j}": (rep.t_values(q, j), rep.series(q, j)) for j in rep.js()
                      if len(rep.series(q, j))}
            (out / f"{_slug(name)}__{_slug(q)}.svg").write_text(render_svg(f"{name}: {q}", series))


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------- presets


def _preset_dir():
    return resources.files("shiftlab") / "presets"


def presets() -> dict:
    """Bundled configs keyed by name, in alphabetical order."""
    out = {}
    for entry in sorted(_preset_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = entry
    return out


def list_presets(stream=None) -> list:
    stream = stream or sys.stdout
    names = []
    for name, entry in presets().items():
        desc = json.loads(entry.read_text()).get("description", "")
        print(f"{name:<22} {desc}", file=stream)
        names.append(name)
    return names


def load_config(target: str) -> tuple[dict, Path]:
    p = Path(target)
    if p.exists():
        text, base = p.read_text(), p.resolve().parent
    else:
        table = presets()
        name = target[:-5] if target.endswith(".json") else target
        if name not in table:
            raise ConfigError(f"no such config file or preset: {target}")
        text, base = table[name].read_text(), Path.cwd()
    try:
        return json.loads(text), base
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config JSON: {exc}") from exc


# ---------------------------------------------------------------- entry points


def _threads(n_checks: int) -> int:
    raw = os.environ.get("SHIFTLAB_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise ConfigError(f"SHIFTLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, min(cap, n_checks))


def run(target: str, out: str | Path | None = None, max_k: int | None = None, tol: float | None = None) -> dict:
    """Run a config or preset; returns the report document (also written to ``out``)."""
    config, base = load_config(target)
    exp = Experiment(config, base, max_k, tol)
    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=_threads(len(exp.checks))) as pool:
        results = list(pool.map(exp.run_check, exp.checks))
    reports = {name: rep for name, (rep, _) in zip(exp.checks, results)}
    witnesses = [exp._run_witness(w) for w in exp.witnesses]
    doc = {
        "config": config,
        "overrides": {"max_k": max_k, "tol": tol},
        "checks": {name: rep.to_dict() for name, rep in reports.items()},
        "witnesses": witnesses,
        "timings": {**{name: dt for name, (_, dt) in zip(exp.checks, results)},
                    "total": time.perf_counter() - t0},
    }
    all_ok = all(r.satisfied for r in reports.values())
    doc["exit_code"] = EXIT_OK if all_ok else EXIT_NOT_SATISFIED
    if out is not None:
        out = Path(out)
        _write_outputs(out, reports)
        (out / "report.json").write_text(json.dumps(doc, indent=2, default=_json_default) + "\n")
    return doc


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="shiftlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a config file or bundled preset")
    r.add_argument("config", help="path to a JSON config, or the name of a bundled preset")
    r.add_argument("--out", default=None, help="output directory (default: shiftlab-out/<name>)")
    r.add_argument("--max-k", type=int, default=None, help="truncate every schedule to its first MAX_K entries")
    r.add_argument("--tol", type=float, default=None, help="override the verdict tolerance")
    sub.add_parser("list-presets", help="list bundled example configs")
    args = ap.parse_args(argv)

    if args.command == "list-presets":
        list_presets()
        return EXIT_OK
    out = args.out or os.path.join("shiftlab-out", _slug(Path(args.config).stem))
    try:
        doc = run(args.config, out, args.max_k, args.tol)
    except ConfigError as exc:
        print(f"shiftlab: config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except HorizonExceededError as exc:
        print(f"shiftlab: horizon exceeded: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ConstructionFailedError as exc:
        print(f"shiftlab: construction failed: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ShiftlabError as exc:
        print(f"shiftlab: invalid input: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for name, rep in doc["checks"].items():
        print(f"{name}: {rep['verdict']} (first_k={rep['first_k']}, horizon={rep['horizon']})")
    print(f"reports written to {out}")
    return doc["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
