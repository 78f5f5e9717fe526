"""Command line front end: scenario files, subcommands, CSV and SVG output.

    riveq <solve|verify|sweep|transition|slopes|envelope|admissibility>
          --config PATH [--out DIR] [--mu-grid lo:hi:n] [--levels L]

Scenario files are INI style ([system], [loading], [run], [output]); see
the files under configs/ for complete examples. Exit status: 0 on success,
2 on validation failures (bad config, failed checks), 3 on numerical ones.
"""

import argparse
import configparser
import csv
import io
import math
import sys as _sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigParseError, FileIOError, RiveqError, ValidationError
from .envelopes import build_envelope
from .evolution import (
    TIE_RULES,
    Partition,
    _plateau_spans,
    extract_limit,
    ims_solve,
    solve_monotone,
    validate_ve,
)
from .numerics import coercive_bracket
from .slopes import slopes_batch
from .system import (
    Dissipation,
    EnergyDensity,
    Loading,
    PowerLaw,
    RISystem,
    ViscousCorrection,
    check_admissibility,
)
from .transitions import build_optimal_transition, certify_optimal, transition_cost

COMMANDS = ("solve", "verify", "sweep", "transition", "slopes", "envelope", "admissibility")
SLIDING_TOL = 1e-12


# ---------------------------------------------------------------------------
# configuration

def _floats(text, key):
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigParseError(f"{key}: expected numbers, got {text!r}") from None


def _pieces(section, prefix, key):
    """Numbered entries ``<prefix>1 = lo hi : c0, c1, ...`` in order."""
    found = []
    for name, text in section.items():
        if name.startswith(prefix) and name[len(prefix):].isdigit():
            if ":" not in text:
                raise ConfigParseError(f"{name}: expected 'lo hi : coefficients'")
            span, coeffs = text.split(":", 1)
            lohi = _floats(span, name)
            if len(lohi) != 2:
                raise ConfigParseError(f"{name}: expected two interval ends before ':'")
            found.append((int(name[len(prefix):]), (lohi[0], lohi[1]), _floats(coeffs, name)))
    if not found:
        raise ConfigParseError(f"{key} needs entries {prefix}1, {prefix}2, ...")
    return [(span, c) for _, span, c in sorted(found)]


class _Section:
    def __init__(self, cp, name):
        self.name = name
        self.data = dict(cp[name]) if cp.has_section(name) else {}

    def get(self, key, default=None):
        return self.data.get(key, default)

    def has(self, key):
        return key in self.data

    def items(self):
        return self.data.items()

    def float(self, key, default=None, positive=False):
        if key not in self.data:
            if default is None:
                raise ConfigParseError(f"[{self.name}] is missing {key!r}")
            return default
        try:
            v = float(self.data[key])
        except ValueError:
            raise ConfigParseError(f"[{self.name}] {key}: not a number: {self.data[key]!r}") from None
        if not math.isfinite(v):
            raise ConfigParseError(f"[{self.name}] {key} must be finite")
        if positive and not v > 0:
            raise ConfigParseError(f"[{self.name}] {key} must be positive")
        return v

    def int(self, key, default=None, minimum=1):
        v = self.float(key, None if default is None else float(default))
        if v != int(v) or v < minimum:
            raise ConfigParseError(f"[{self.name}] {key} must be an integer >= {minimum}")
        return int(v)

    def bool(self, key, default=False):
        if key not in self.data:
            return default
        v = self.data[key].strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ConfigParseError(f"[{self.name}] {key}: expected a boolean, got {v!r}")


def _energy(sec):
    kind = sec.get("energy", "quartic")
    bound = sec.float("bound", 1e3, positive=True)
    if kind == "quartic":
        return EnergyDensity.quartic_double_well(sec.float("scale", 1.0, positive=True), bound)
    if kind == "polynomial":
        if not sec.has("coefficients"):
            raise ConfigParseError("[system] polynomial energy needs 'coefficients'")
        return EnergyDensity.polynomial(_floats(sec.get("coefficients"), "coefficients"), bound)
    if kind == "composite":
        return EnergyDensity.composite(_pieces(sec, "piece", "composite energy"), bound)
    raise ConfigParseError(f"[system] unknown energy kind {kind!r}")


def _loading(sec, interval):
    kind = sec.get("kind", "linear")
    if kind == "linear":
        return Loading.linear(sec.float("slope", 1.0), sec.float("intercept", 0.0), interval)
    if kind == "sine":
        return Loading.sine(sec.float("amplitude", 1.0), sec.float("frequency", 1.0),
                            sec.float("phase", 0.0), interval)
    if kind == "piecewise":
        return Loading.piecewise_c1(_pieces(sec, "segment", "piecewise loading"))
    raise ConfigParseError(f"[loading] unknown kind {kind!r}")


def _viscous(sec):
    kind = sec.get("delta", "none")
    if kind == "none":
        return ViscousCorrection.none()
    if kind == "quadratic":
        return ViscousCorrection.quadratic(sec.float("mu"))
    if kind == "power":
        return ViscousCorrection.convex_of_psi(
            PowerLaw(sec.float("delta_coefficient", positive=True), sec.float("delta_exponent")))
    raise ConfigParseError(f"[system] unknown delta kind {kind!r}")


@dataclass
class ScenarioConfig:
    system: RISystem
    run: _Section
    output: _Section
    name: str
    source: str = ""
    extras: dict = field(default_factory=dict)

    def with_mu(self, mu):
        d = ViscousCorrection.none() if mu == 0 else ViscousCorrection.quadratic(mu)
        return self.system.with_delta(d)


def _interval(sec):
    text = sec.get("interval")
    if text is None:
        raise ConfigParseError("[loading] is missing 'interval'")
    iv = _floats(text, "interval")
    if len(iv) != 2:
        raise ConfigParseError("[loading] interval needs two numbers")
    return tuple(iv)


def parse_config(text, name="scenario"):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigParseError(f"cannot parse config: {exc}") from None
    for sec in ("system", "loading"):
        if not cp.has_section(sec):
            raise ConfigParseError(f"config needs a [{sec}] section")
    ssec, lsec = _Section(cp, "system"), _Section(cp, "loading")
    try:
        ell = _loading(lsec, _interval(lsec) if lsec.get("kind", "linear") != "piecewise" else (0, 1))
        system = RISystem(_energy(ssec), ell,
                          Dissipation(ssec.float("alpha_plus", positive=True),
                                      ssec.float("alpha_minus", positive=True)),
                          _viscous(ssec))
    except ConfigParseError:
        raise
    except ValidationError as exc:
        raise ConfigParseError(f"config does not describe a valid system: {exc}") from None
    run, out = _Section(cp, "run"), _Section(cp, "output")
    tie = run.get("tie_rule", "nearest")
    if tie not in TIE_RULES:
        raise ConfigParseError(f"[run] tie_rule must be one of {TIE_RULES}")
    for key in ("cauchy_tol", "balance_tol", "chain_tol"):
        if run.has(key):
            run.float(key, positive=True)
    return ScenarioConfig(system, run, out, name, text)


def load_config(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileIOError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, p.stem)


# ---------------------------------------------------------------------------
# output helpers

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.15g}"


def write_csv(path, command, cfg, columns, rows, notes=(), trailer=()):
    buf = io.StringIO()
    buf.write(f"# riveq {command}: {cfg.name}\n")
    buf.write(f"# {cfg.system.convention()}\n")
    buf.write(f"# columns: {', '.join(columns)}\n")
    for n in notes:
        buf.write(f"# {n}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    for n in trailer:
        buf.write(f"# {n}\n")
    _write(path, buf.getvalue())


def _write(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    except OSError as exc:
        raise FileIOError(f"cannot write {path}: {exc}") from None


COLORS = ("#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d35400")


def write_svg(path, series, title="", xlabel="", ylabel="", width=640, height=420):
    """Minimal line plot. ``series`` holds (label, [polyline, ...]) where a
    polyline is an (xs, ys) pair; a label starting with '!' draws dashed."""
    pts = [(x, y) for _, lines in series for xs, ys in lines for x, y in zip(xs, ys)
           if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    L, R, T, B = 70, 20, 40, 50

    def X(x):
        return L + (x - x0) / (x1 - x0) * (width - L - R)

    def Y(y):
        return height - B - (y - y0) / (y1 - y0) * (height - T - B)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{width - L - R}" height="{height - T - B}" '
           'fill="none" stroke="#444"/>',
           f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
           f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">{xlabel}</text>',
           f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 16 {height / 2:.1f})">{ylabel}</text>']
    for v, anchor, x, y in ((x0, "start", L, height - B + 16), (x1, "end", width - R, height - B + 16)):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.4g}</text>')
    for v, y in ((y0, height - B), (y1, T + 10)):
        out.append(f'<text x="{L - 6}" y="{y}" text-anchor="end" font-size="11">{v:.4g}</text>')
    legend_y = T + 16
    for k, (label, lines) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        dash = ' stroke-dasharray="5,4"' if label.startswith("!") else ""
        for xs_, ys_ in lines:
            coords = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in zip(xs_, ys_)
                              if math.isfinite(x) and math.isfinite(y))
            if coords:
                out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                           f'stroke-width="1.6"{dash}/>')
        name = label.lstrip("!")
        if name:
            out.append(f'<text x="{width - R - 8}" y="{legend_y}" text-anchor="end" '
                       f'font-size="12" fill="{color}">{name}</text>')
            legend_y += 15
    out.append("</svg>")
    _write(path, "\n".join(out) + "\n")


def _thin(n, cap):
    if n <= cap:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, cap).round().astype(int))


# ---------------------------------------------------------------------------
# subcommands

def _solve_curve(cfg, levels=None, system=None, transitions=True):
    sys = system or cfg.system
    run = cfg.run
    u0 = run.float("u0")
    method = run.get("method", "auto")
    if method == "auto":
        method = "monotone" if sys.ell.is_monotone() != 0 else "limit"
    if method == "monotone":
        return solve_monotone(sys, u0, samples=run.int("samples", 1025, minimum=2),
                              attach_transitions=transitions)
    if method == "limit":
        return extract_limit(sys, u0, levels=levels or run.int("levels", 3, minimum=3),
                             n0=run.int("n0", 1024), tie_rule=run.get("tie_rule", "nearest"),
                             cauchy_tol=run.float("cauchy_tol", 1e-2, positive=True),
                             attach_transitions=transitions)
    if method == "discrete":
        a, b = sys.interval
        d = ims_solve(sys, Partition.uniform(a, b, run.int("steps", 1024)), u0,
                      run.get("tie_rule", "nearest"))
        return d.to_curve("linear")
    raise ConfigParseError(f"[run] unknown method {method!r}")


def _curve_rows(sys, curve, cap):
    ts, _ = curve.samples()
    times = np.unique(ts)
    jt = {j.t for j in curve.jumps}
    idx = _thin(times.size, cap)
    times = np.union1d(times[idx], np.array(sorted(jt)))
    u = np.array([curve.value(t) for t in times])
    ul = np.array([curve.left_limit(t) for t in times])
    ur = np.array([curve.right_limit(t) for t in times])
    ell = np.asarray(sys.ell.value(times), dtype=float) + 0.0 * times
    wir = slopes_batch(sys, u, "ir")
    wsl = slopes_batch(sys, u, "sl")
    m_ir = sys.psi.alpha_plus - (ell - wir)
    m_sl = ell - wsl + sys.psi.alpha_minus
    stable = np.minimum(m_ir, m_sl) >= -1e-8
    return [(t, a, b, c, s, mi, ms) for t, a, b, c, s, mi, ms in zip(times, u, ul, ur, stable, m_ir, m_sl)]


def _curve_plots(out, stem, sys, curve, svg):
    if not svg:
        return
    lines = [(s.times, s.values) for s in curve.segments]
    jumps = [([j.t, j.t], [j.u_left, j.u_right]) for j in curve.jumps]
    write_svg(out / f"{stem}_u.svg", [("u(t)", lines), ("!jumps", jumps)],
              f"{stem}: u(t)", "t", "u")
    lev = [(np.asarray(sys.ell.value(s.times), dtype=float) + 0.0 * s.times, s.values)
           for s in curve.segments]
    jl = [([float(sys.ell.value(j.t))] * 2, [j.u_left, j.u_right]) for j in curve.jumps]
    write_svg(out / f"{stem}_phase.svg", [("u vs l(t)", lev), ("!jumps", jl)],
              f"{stem}: loading vs state", "l(t)", "u")


def cmd_solve(cfg, out, args):
    curve = _solve_curve(cfg, args.levels)
    rows = _curve_rows(cfg.system, curve, cfg.output.int("max_rows", 4000, minimum=2))
    notes = [f"jumps: {len(curve.jumps)}"] + [
        f"jump t={j.t:.15g} u_left={j.u_left:.15g} u={j.u:.15g} u_right={j.u_right:.15g}"
        for j in curve.jumps]
    write_csv(out / "solve.csv", "solve", cfg,
              ["t", "u", "u_left", "u_right", "stable", "margin_ir", "margin_sl"], rows, notes)
    _curve_plots(out, "solve", cfg.system, curve, cfg.output.bool("svg", True))
    return 0


def cmd_verify(cfg, out, args):
    curve = _solve_curve(cfg, args.levels)
    rep = validate_ve(cfg.system, curve, balance_tol=cfg.run.float("balance_tol", 1e-5, positive=True))
    b = rep.balance
    write_csv(out / "balance.csv", "verify", cfg,
              ["var_psi", "jump_increment", "work_integral", "defect"],
              [(b.var_psi, b.jump_increment, b.work_integral, b.defect)],
              [f"passed: {int(rep.passed)}"])
    checks = [("a_stability", rep.stability_ok, rep.stability_worst),
              ("b_equation", rep.equation_ok, rep.equation_worst),
              ("c_jump_conditions", rep.jump_conditions_ok, ""),
              ("d_jump_identity", rep.jump_identity_ok, rep.jump_identity_worst),
              ("e_energy_balance", rep.balance_ok, b.defect)]
    write_csv(out / "verify.csv", "verify", cfg, ["check", "passed", "worst"], checks,
              trailer=[f"violation: {v}" for v in rep.violations])
    _curve_plots(out, "verify", cfg.system, curve, cfg.output.bool("svg", True))
    return 0 if rep.passed else 2


def _parse_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigParseError(f"mu grid must look like lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigParseError(f"mu grid must look like lo:hi:n, got {text!r}") from None
    if n < 1 or lo < 0 or hi < lo:
        raise ConfigParseError("mu grid needs 0 <= lo <= hi and n >= 1")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def _sweep_one(system, u0, samples):
    c = solve_monotone(system, u0, samples=samples, attach_transitions=False)
    return c, [(j.t, j.u_left, j.u_right) for j in c.jumps if j.u_left != j.u_right]


def cmd_sweep(cfg, out, args):
    grid = _parse_grid(args.mu_grid or cfg.run.get("mu_grid", "0:1:11"))
    u0 = cfg.run.float("u0")
    samples = cfg.run.int("samples", 513, minimum=2)
    systems = [cfg.with_mu(float(m)) for m in grid]
    workers = cfg.run.int("workers", 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_one, systems, [u0] * len(systems), [samples] * len(systems)))
    else:
        results = [_sweep_one(s, u0, samples) for s in systems]
    rows = []
    sgn = cfg.system.ell.is_monotone()
    for k, (mu, s, (curve, jumps)) in enumerate(zip(grid, systems, results)):
        rows_k = _curve_rows(s, curve, cfg.output.int("max_rows", 2000, minimum=2))
        write_csv(out / f"sweep_mu_{k:03d}.csv", "sweep", replace_cfg(cfg, s),
                  ["t", "u", "u_left", "u_right", "stable", "margin_ir", "margin_sl"], rows_k,
                  [f"mu: {mu:.15g}"])
        if jumps:
            t, ul, ur = jumps[0]
            thr = float(s.ell.value(t)) - s.psi.alpha_plus if sgn > 0 else float(s.ell.value(t)) + s.psi.alpha_minus
            rows.append((mu, thr, t, ul, ur, len(jumps)))
        else:
            rows.append((mu, None, None, None, None, 0))
    write_csv(out / "sweep.csv", "sweep", cfg,
              ["mu", "trigger_level", "t_jump", "u_left", "u_right", "jumps"], rows,
              ["each row replaces delta by (mu/2)*(v-u)^2 with that row's mu (delta=0 at mu=0)",
               "trigger_level: threshold l - a_plus (or l + a_minus) at the first jump"])
    if cfg.output.bool("svg", True):
        pts = [(r[0], r[1]) for r in rows if r[1] is not None]
        write_svg(out / "sweep.svg", [("trigger level", [([p[0] for p in pts], [p[1] for p in pts])])],
                  "jump trigger level vs mu", "mu", "threshold at the jump")
    return 0


def replace_cfg(cfg, system):
    return ScenarioConfig(system, cfg.run, cfg.output, cfg.name, cfg.source)


def cmd_transition(cfg, out, args):
    sys, run = cfg.system, cfg.run
    t, um, up = run.float("t"), run.float("u_minus"), run.float("u_plus")
    tr = build_optimal_transition(sys, t, um, up, cross_check=run.bool("cross_check", True),
                                  chain_tol=run.float("chain_tol", 1e-9, positive=True))
    pts = np.asarray(tr.points)
    res = np.asarray(tr.residuals)
    psi_inc = np.concatenate([[0.0], sys.psi(np.diff(pts))]) if pts.size > 1 else np.zeros(1)
    d_inc = np.zeros(pts.size)
    for k, kind in enumerate(tr.gap_kinds, start=1):
        if kind == "hole":
            d_inc[k] = float(sys.delta.value(pts[k - 1], pts[k], sys.psi))
    rows = []
    for k in range(pts.size):
        regime = "sliding" if res[k] <= SLIDING_TOL * (1 + abs(float(sys.energy(t, pts[k])))) else "viscous"
        rows.append((k, pts[k], res[k], tr.gap_kinds[k - 1] if k else "", psi_inc[k], d_inc[k], regime))
    cost = transition_cost(sys, tr)
    cert = certify_optimal(sys, tr, recompute=run.bool("recompute", False))
    trailer = [f"cost var_psi={cost.var_psi:.15g} c_delta={cost.c_delta:.15g} "
               f"res_sum={cost.res_sum:.15g} total={cost.total:.15g} "
               f"energy_drop={cert.energy_drop:.15g} certified={int(cert.certified)}",
               f"cases: {' '.join(tr.meta.get('cases', ()))}"]
    write_csv(out / "transition.csv", "transition", cfg,
              ["index", "point", "residual", "gap_kind", "psi_inc", "delta_inc", "regime"], rows,
              [f"t={t:.15g} u_minus={um:.15g} u_plus={up:.15g}"], trailer)
    if cfg.output.bool("svg", True):
        E = np.asarray(sys.energy(t, pts), dtype=float)
        slide = res <= SLIDING_TOL * (1 + np.abs(E))
        write_svg(out / "transition.svg",
                  [("energy along the transition", [(pts, E)]),
                   ("!sliding points", [(pts[slide], E[slide])])],
                  "transition: energy at the points", "state", "E(t, state)")
    return 0 if cert.certified else 2


def cmd_slopes(cfg, out, args):
    sys = cfg.system
    lo, hi, n = _grid3(cfg, sys)
    u = np.linspace(lo, hi, n)
    wp = sys.W.deriv(u)
    wir = slopes_batch(sys, u, "ir")
    wsl = slopes_batch(sys, u, "sl")
    write_csv(out / "slopes.csv", "slopes", cfg, ["u", "w_prime", "w_ir", "w_sl"],
              list(zip(u, wp, wir, wsl)))
    if cfg.output.bool("svg", True):
        write_svg(out / "slopes.svg", [("W'", [(u, wp)]), ("W'_ir", [(u, wir)]), ("W'_sl", [(u, wsl)])],
                  "corrected one-sided slopes", "u", "slope")
    return 0


def _grid3(cfg, sys):
    if cfg.run.has("grid"):
        g = _floats(cfg.run.get("grid"), "grid")
        if len(g) != 3 or g[2] < 2 or g[1] <= g[0]:
            raise ConfigParseError("[run] grid needs 'lo, hi, n' with lo < hi and n >= 2")
        return g[0], g[1], int(g[2])
    lo, hi = coercive_bracket(sys, 0.0)
    return lo, hi, 401


def cmd_envelope(cfg, out, args):
    sys = cfg.system
    u0 = cfg.run.float("u0")
    side = cfg.run.get("envelope_side", "auto")
    if side == "auto":
        side = "lower" if sys.ell.is_monotone() < 0 else "upper"
    if side not in ("upper", "lower"):
        raise ConfigParseError("[run] envelope_side must be upper, lower or auto")
    env = build_envelope(sys, u0, "upper_of_ir" if side == "upper" else "lower_of_sl")
    idx = _thin(env.grid.size, cfg.output.int("max_rows", 4000, minimum=2))
    rows = list(zip(env.grid[idx], env.slope[idx], env.values[idx]))
    notes = [f"base point: {u0:.15g} side: {side}"] + [
        f"plateau level={lv:.15g} from={a:.15g} to={b:.15g}" for lv, a, b in _plateau_spans(env)]
    write_csv(out / "envelope.csv", "envelope", cfg, ["u", "slope", "envelope"], rows, notes)
    if cfg.output.bool("svg", True):
        write_svg(out / "envelope.svg", [("slope", [(env.grid, env.slope)]),
                                         ("envelope", [(env.grid, env.values)])],
                  f"monotone envelope ({side})", "u", "level")
    return 0


def cmd_admissibility(cfg, out, args):
    rep = check_admissibility(cfg.system, cfg.run.int("samples", 100, minimum=10), raise_on_failure=False)
    r = rep.delta1_ratios
    write_csv(out / "admissibility.csv", "admissibility", cfg,
              ["kind", "delta1_pass", "delta2_pass", "delta2_min_gap", "ratio_1e-2", "ratio_1e-4",
               "ratio_1e-6", "vacuous", "passed"],
              [(rep.kind, rep.delta1_pass, rep.delta2_pass, rep.delta2_min_gap, r[1e-2], r[1e-4], r[1e-6],
                rep.vacuous, rep.passed)], [rep.note] if rep.note else ())
    return 0 if rep.passed else 2


HANDLERS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "transition": cmd_transition,
            "slopes": cmd_slopes, "envelope": cmd_envelope, "admissibility": cmd_admissibility}


def run_scenario(config, command, out=None, mu_grid=None, levels=None):
    """Run one subcommand on a parsed config (or a path); returns the exit status."""
    if not isinstance(config, ScenarioConfig):
        config = load_config(config)
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}")
    out_dir = Path(out or config.output.get("dir", "riveq-out"))
    args = argparse.Namespace(mu_grid=mu_grid, levels=levels)
    return HANDLERS[command](config, out_dir, args)


def build_parser():
    p = argparse.ArgumentParser(prog="riveq", description="Rate-independent evolutions with viscous corrections.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="scenario file (INI style)")
    p.add_argument("--out", help="output directory (default: [output] dir or ./riveq-out)")
    p.add_argument("--mu-grid", help="lo:hi:n grid of mu values for sweep")
    p.add_argument("--levels", type=int, help="refinement levels for the limit extraction (>= 3)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.levels is not None and args.levels < 3:
            raise ValidationError("--levels must be >= 3")
        return run_scenario(args.config, args.command, args.out, args.mu_grid, args.levels)
    except RiveqError as exc:
        print(f"riveq: {exc.code}: {exc}", file=_sys.stderr)
        return exc.exit_status
    except OSError as exc:
        print(f"riveq: file-io: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
