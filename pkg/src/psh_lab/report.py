"""Run configuration, verification reports and the suites driven by the CLI.

A configuration is one JSON document::

    {
      "model":  {"n": 2, "k": 0, "r": 0.5, "D": 0.5, "C0": 0.0},
      "suites": ["lemmas", "counterexample", "constants", "curves"],
      "grids":  {"lemmas": {"points": 10000}, "constants": {"N": 16}, ...},
      "seed":   0,
      "output": {"dir": "out"}
    }

Every key is optional; unknown keys are rejected at every level.  Reports
are plain JSON without timestamps, so equal configs give identical bytes.
"""

from __future__ import annotations

import copy
import hashlib
import importlib.resources
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import construction, curves, jets, levi, model
from .model import ModelParams

SUITES = ("lemmas", "counterexample", "constants", "curves")
AD_STEP = 1e-4  # finite-difference step of the AD cross-check

CURVE_FACTORIES = {
    "sector": lambda R: curves.make_sector_inclusion(R),
    "z^(1/2)": lambda R: curves.make_power_curve(1, 1.0, R),
    "z^(3/2)": lambda R: curves.make_power_curve(3, 1.0, R),
    "z^2": lambda R: curves.make_power_curve(4, 1.0, R, domain=curves.quarter_disk(R)),
    "cubic": lambda R: curves.make_reflected_polynomial([0.0, 1.0, 0.0, 0.2], R, name="cubic"),
}

DEFAULT_GRIDS = {
    "lemmas": {"points": 10000, "pairs": None, "variety_points": 100, "off_margin": 0.1, "ad_points": 200},
    "counterexample": {"cutoff": "exp", "n_x": 64, "n_r": 9, "n_theta": 16, "slice_only": False},
    "constants": {"N": 16, "n_theta": 8, "r_values": [0.4, 0.2, 0.1, 0.05]},
    "curves": {
        "family": list(CURVE_FACTORIES),
        "R": 1.0,
        "s_values": [0.05, 0.025, 0.0125],
        "b_radius": 0.1,
        "K_cap": 2.0,
        "t_count": 20,
        "D": None,
        "C0": None,
        "sector_oracle_s": 0.02,
    },
}

_MODEL_KEYS = ("n", "k", "r", "D", "C0", "s")
_TOP_KEYS = ("model", "suites", "grids", "seed", "output")
_OUTPUT_KEYS = ("dir", "csv")


class ConfigError(ValueError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


def _reject_unknown(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(extra)}")


@dataclass
class RunConfig:
    model: ModelParams
    suites: list
    grids: dict
    seed: int = 0
    output: dict = field(default_factory=dict)
    raw_model: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _reject_unknown(d, _TOP_KEYS, "config")
        m = d.get("model", {})
        _reject_unknown(m, _MODEL_KEYS, "model")
        m = {"n": 2, "k": 0, **m}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                params = ModelParams(**m)
        except (ValueError, TypeError, Warning) as e:
            raise ConfigError(f"model: {e}") from None
        suites = d.get("suites", list(SUITES))
        if not isinstance(suites, list) or any(s not in SUITES for s in suites):
            raise ConfigError(f"suites: expected a list drawn from {', '.join(SUITES)}")
        grids = copy.deepcopy(DEFAULT_GRIDS)
        g_in = d.get("grids", {})
        _reject_unknown(g_in, SUITES, "grids")
        for name, over in g_in.items():
            _reject_unknown(over, DEFAULT_GRIDS[name], f"grids.{name}")
            grids[name].update(over)
        _validate_grids(grids)
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed: expected a non-negative integer")
        out = d.get("output", {})
        _reject_unknown(out, _OUTPUT_KEYS, "output")
        return cls(params, list(suites), grids, seed, dict(out), dict(m))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from None
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "model": self.raw_model,
            "suites": self.suites,
            "grids": self.grids,
            "seed": self.seed,
            "output": self.output,
        }

    def hash(self) -> str:
        """Digest of everything that affects results (not the output paths)."""
        d = self.to_dict()
        del d["output"]
        blob = json.dumps(_plain(d), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _validate_grids(g):
    lem = g["lemmas"]
    if not isinstance(lem["points"], int) or lem["points"] < 1:
        raise ConfigError("grids.lemmas.points: expected a positive integer")
    if not isinstance(lem["ad_points"], int) or lem["ad_points"] < 1:
        raise ConfigError("grids.lemmas.ad_points: expected a positive integer")
    if lem["pairs"] is not None:
        ok = isinstance(lem["pairs"], list) and all(
            isinstance(p, list) and len(p) == 2 and 0 <= p[1] <= p[0] and p[0] >= 1 for p in lem["pairs"]
        )
        if not ok:
            raise ConfigError("grids.lemmas.pairs: expected [[n, k], ...] with 0 <= k <= n")
    ce = g["counterexample"]
    if ce["cutoff"] not in model.CUTOFFS:
        raise ConfigError(f"grids.counterexample.cutoff: expected one of {', '.join(model.CUTOFFS)}")
    cu = g["curves"]
    if not isinstance(cu["family"], list) or not cu["family"]:
        raise ConfigError("grids.curves.family: the curve family is empty")
    unknown = [c for c in cu["family"] if c not in CURVE_FACTORIES]
    if unknown:
        raise ConfigError(f"grids.curves.family: unknown curve(s) {', '.join(unknown)}")
    if not cu["s_values"] or any(not s > 0 for s in cu["s_values"]):
        raise ConfigError("grids.curves.s_values: expected positive values")
    if not cu["t_count"] >= 2:
        raise ConfigError("grids.curves.t_count: expected at least 2")
    co = g["constants"]
    if not co["r_values"] or any(not r > 0 for r in co["r_values"]):
        raise ConfigError("grids.constants.r_values: expected positive radii")


# ---------------------------------------------------------------------------
# Reports


def _plain(x):
    """JSON-ready copy: numpy scalars and arrays to Python, non-finite floats
    to strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


@dataclass
class Check:
    name: str
    status: str  # pass | fail | flagged
    value: object = None
    threshold: object = None
    witness: object = None
    note: str = ""
    hard: bool = True

    def line(self) -> str:
        v = _plain(self.value)
        vs = f"{v:.3e}" if isinstance(v, float) else str(v)
        extra = f" (threshold {_plain(self.threshold)})" if self.threshold is not None else ""
        note = f" [{self.note}]" if self.note else ""
        return f"{self.status.upper():7s} {self.name}: {vs}{extra}{note}"


def hard_check(name, ok, value, threshold=None, witness=None, note=""):
    return Check(name, "pass" if ok else "fail", value, threshold, witness, note, True)


def soft_check(name, value, note="", witness=None):
    return Check(name, "flagged", value, None, witness, note, False)


@dataclass
class VerificationReport:
    suite: str
    checks: list = field(default_factory=list)
    constants: Optional[dict] = None
    data: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def add(self, check: Check, log=None):
        if any(c.name == check.name for c in self.checks):
            raise ValueError(f"duplicate check {check.name!r} in suite {self.suite}")
        self.checks.append(check)
        if log is not None:
            log(check.line())
        return check

    @property
    def status(self) -> str:
        return "fail" if any(c.hard and c.status == "fail" for c in self.checks) else "pass"

    def to_dict(self) -> dict:
        return _plain(
            {
                "suite": self.suite,
                "status": self.status,
                "checks": [
                    {
                        "name": c.name,
                        "status": c.status,
                        "hard": c.hard,
                        "value": c.value,
                        "threshold": c.threshold,
                        "witness": c.witness,
                        "note": c.note,
                    }
                    for c in self.checks
                ],
                "constants": self.constants,
                "data": self.data,
                "provenance": self.provenance,
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _provenance(cfg: RunConfig, suite: str) -> dict:
    return {"config_hash": cfg.hash(), "seed": cfg.seed, "grids": cfg.grids[suite]}


def load_baselines() -> dict:
    res = importlib.resources.files("psh_lab").joinpath("data/baselines.json")
    return json.loads(res.read_text())


def baseline_key(n, k, N, n_theta) -> str:
    return f"n{n}k{k}_N{N}_T{n_theta}"


# ---------------------------------------------------------------------------
# Suites


def run_lemmas(cfg: RunConfig, log=None) -> VerificationReport:
    g = cfg.grids["lemmas"]
    rep = VerificationReport("lemmas", provenance=_provenance(cfg, "lemmas"))
    pairs = g["pairs"] or [[cfg.model.n, cfg.model.k]]
    npts = g["points"]
    nv = min(g["variety_points"], npts)
    for n, k in pairs:
        rng = np.random.default_rng([cfg.seed, n, k])
        tag = f"n{n}k{k}"
        pts = levi.random_points(n, k, npts, rng)
        m0 = levi.verify_lemma_M0(pts, n, k)
        rep.add(hard_check(f"{tag}.levi_eigenstructure", m0.max_residual <= 1e-8, m0.max_residual, 1e-8, m0.worst_point()), log)
        m1 = levi.verify_lemma_M1(pts, n, k)
        rep.add(hard_check(f"{tag}.gradient_eigenstructure", m1.max_residual <= 1e-8, m1.max_residual, 1e-8, m1.worst_point()), log)
        rank = float(np.max(m1.extra["rank_residual"]))
        rep.add(hard_check(f"{tag}.gradient_rank_le_2", rank <= 1e-8, rank, 1e-8), log)
        ident = levi.verify_ddcf2(pts, n, k)
        rep.add(hard_check(f"{tag}.product_identity", float(ident.max()) <= 1e-8, float(ident.max()), 1e-8, pts[int(ident.argmax())]), log)
        on_v = levi.sample_variety_V(n, k, nv, rng)
        vres = float(np.max(on_v.residuals))
        rep.add(hard_check(f"{tag}.variety_samples", vres <= 1e-10, vres, 1e-10), log)
        off_v = levi.sample_off_V(n, k, nv, g["off_margin"], rng)
        sp = levi.verify_strict_psh_prod(n, k, pts[: min(npts, 1000)], on_v, off_v)
        rep.add(hard_check(f"{tag}.sqrt_product_weakly_psh", sp.min_eig_sqrt >= -1e-9, sp.min_eig_sqrt, -1e-9), log)
        rep.add(hard_check(f"{tag}.product_weakly_psh", sp.min_eig_prod_grid >= -1e-9, sp.min_eig_prod_grid, -1e-9), log)
        rep.add(hard_check(f"{tag}.product_degenerate_on_V", sp.max_small_eig_on_V <= 1e-8, sp.max_small_eig_on_V, 1e-8), log)
        rep.add(
            hard_check(f"{tag}.product_positive_off_V", sp.min_eig_off_V > 0, sp.min_eig_off_V, 0.0, sp.witness_off_V),
            log,
        )
        params = ModelParams(n=n, k=k, r=cfg.model.r, D=cfg.model.D, C0=cfg.model.C0)
        n_ad = min(npts, g["ad_points"])
        worst, where_ = 0.0, None
        for f in model.model_fields(params).values():
            p_ad = model.smooth_sample(f, params, n_ad, rng, step=AD_STEP)
            gap = jets.hessian_agreement(f, p_ad, AD_STEP)
            if gap.max() > worst:
                worst, where_ = float(gap.max()), f.name
        rep.add(hard_check(f"{tag}.ad_matches_fd", worst <= 1e-6, worst, 1e-6, note=f"worst field {where_}"), log)
    return rep


def run_counterexample(cfg: RunConfig, log=None) -> VerificationReport:
    g = cfg.grids["counterexample"]
    rep = VerificationReport("counterexample", provenance=_provenance(cfg, "counterexample"))
    cut = model.CUTOFFS[g["cutoff"]]()
    res = levi.counterexample_scan(cut, n_x=g["n_x"], n_r=g["n_r"], n_theta=g["n_theta"])
    rep.data = {
        "cutoff": res.cutoff,
        "min_eig": res.min_eig,
        "witness": res.witness,
        "slice_min_eig": res.slice_min_eig,
        "deficiency_min": res.deficiency_min,
        "deficiency_t": res.deficiency_t,
    }
    # only the exponential cutoff carries a negativity claim; others are recorded
    make = hard_check if g["cutoff"] == "exp" else None
    checks = []
    if not g["slice_only"]:
        checks.append(("negative_levi_eigenvalue", res.negative_found, res.min_eig, -1e-6, res.witness))
    checks.append(("negative_on_slice_y1_0_y2_1", res.slice_min_eig <= -1e-6, res.slice_min_eig, -1e-6, None))
    checks.append(("deficiency_negative", res.deficiency_negative, res.deficiency_min, 0.0, [res.deficiency_t]))
    for name, ok, val, thr, wit in checks:
        if make is not None:
            rep.add(make(name, ok, val, thr, wit), log)
        else:
            rep.add(soft_check(name, val, note=f"cutoff {g['cutoff']}: observed {'negative' if ok else 'non-negative'}", witness=wit), log)
    return rep


def _within(value, base, rel=0.10):
    if base == 0:
        return value == 0
    return abs(value - base) <= rel * abs(base)


def run_constants(cfg: RunConfig, log=None) -> VerificationReport:
    g = cfg.grids["constants"]
    n, k, r = cfg.model.n, cfg.model.k, cfg.model.r
    N, T = g["N"], g["n_theta"]
    rep = VerificationReport("constants", provenance=_provenance(cfg, "constants"))
    ds = construction.search_D(n, k, N=N, n_theta=T)
    rep.add(hard_check("D_star_at_least_1e-2", ds.D_star >= 1e-2, ds.D_star, 1e-2), log)
    rep.add(hard_check("D_feasible_below", ds.monotone, ds.monotone), log)
    rng = np.random.default_rng([cfg.seed, n, k])
    pts = levi.random_points(n, k, 100, rng, scale=0.3)
    scal = max(float(np.max(construction.verify_beta_scaling(pts, rr, n, k))) for rr in (0.3, 0.1, 0.03))
    rep.add(hard_check("beta_scaling_residual", scal <= 1e-9, scal, 1e-9), log)
    D = ds.D_star / 2
    table, c1p = {}, {}
    for rr in g["r_values"]:
        cs = construction.search_C0(rr, D, n, k, N=N, n_theta=T)
        table[rr] = cs.C0_star
        c1p[rr] = construction.verify_metric_domination_sqrt_model(rr, D, cs.C0_star, n, k, N=N, n_theta=T)[0]
    vals = np.array(list(table.values()))
    feasible = bool(np.all(np.isfinite(vals)))
    rep.add(hard_check("C0_feasible_below_cap", feasible, float(np.max(vals)), 1e3), log)
    ratio = float(vals.max() / vals.min()) if feasible and vals.min() > 0 else (1.0 if np.all(vals == 0) else math.inf)
    rep.add(hard_check("C0_ratio_over_r", ratio < 2.0, ratio, 2.0), log)
    cv = np.array(list(c1p.values()))
    c1_ratio = float(cv.max() / cv.min()) if cv.min() > 0 else math.inf
    rep.add(hard_check("C1prime_ratio_over_r", c1_ratio < 2.0, c1_ratio, 2.0), log)
    C0 = construction.search_C0(r, D, n, k, N=N, n_theta=T).C0_star if r not in table else table[r]
    params = cfg.model.with_(D=D, C0=2 * C0)
    est = construction.verify_duval_conditions(params, N=N, n_theta=T, seed=cfg.seed)
    for name, ok in est.conditions.items():
        note = "vacuous: U lies inside B" if name in est.vacuous else ""
        rep.add(hard_check(f"duval.{name}", ok, ok, note=note, witness=est.witnesses.get(name)), log)
    finite = all(math.isfinite(v) for v in (est.C1, est.C2, est.A1))
    rep.add(hard_check("constants_finite", finite, [est.C1, est.C2, est.A1]), log)
    base = load_baselines().get(baseline_key(n, k, N, T))
    got = {"D_star": ds.D_star, "C0_star": C0, "C1": est.C1, "C2": est.C2, "A1": est.A1}
    if base is None or abs(base.get("r", r) - r) > 1e-12:
        rep.add(soft_check("baseline", None, note="no pinned baseline for this model and grid"), log)
    else:
        for key, v in got.items():
            rep.add(hard_check(f"baseline.{key}", _within(v, base[key]), v, base[key], note="10% tolerance"), log)
    rep.constants = {
        "D_star": ds.D_star,
        "D_schedule": ds.schedule,
        "C0_star_by_r": {str(k_): v for k_, v in table.items()},
        "C1prime_by_r": {str(k_): v for k_, v in c1p.items()},
        "recommended": {"D": D, "C0": 2 * C0, "r": r},
        "estimates": est.to_dict(),
    }
    return rep


CSV_HEADER = "curve,s,length,area,K,monotonic"


def curve_params(cfg: RunConfig, log=None) -> ModelParams:
    """n = 1, k = 0 model for the curve suite; D and C0 default to the
    recommended pair (D_star / 2, 2 C0_star)."""
    g = cfg.grids["curves"]
    cg = cfg.grids["constants"]
    r = cfg.model.r
    D, C0 = g["D"], g["C0"]
    if D is None:
        D = construction.search_D(1, 0, N=cg["N"], n_theta=cg["n_theta"]).D_star / 2
    if C0 is None:
        C0 = 2 * construction.search_C0(r, D, 1, 0, N=cg["N"], n_theta=cg["n_theta"]).C0_star
    try:
        return ModelParams(n=1, k=0, r=r, D=D, C0=C0)
    except ValueError as e:
        raise ConfigError(f"grids.curves: {e}") from None


def run_curves(cfg: RunConfig, log=None):
    """Returns the report and the CSV text."""
    g = cfg.grids["curves"]
    rep = VerificationReport("curves", provenance=_provenance(cfg, "curves"))
    fam = [CURVE_FACTORIES[name](g["R"]) for name in g["family"]]
    for c in fam:
        cr = curves.cauchy_riemann_residual(c)
        br = curves.boundary_residual(c)
        rep.add(hard_check(f"{c.name}.holomorphic", cr <= 1e-10, cr, 1e-10), log)
        rep.add(hard_check(f"{c.name}.boundary_labels", br <= 1e-10, br, 1e-10), log)
    table = curves.estimate_K(fam, g["s_values"], g["b_radius"])
    for row in table.rows:
        if row.flagged:
            rep.add(soft_check(f"{row.curve}.K(s={row.s:g})", row.K, note="image misses U_s"), log)
        else:
            rep.add(hard_check(f"{row.curve}.K(s={row.s:g})", row.K <= g["K_cap"], row.K, g["K_cap"]), log)
    for name, d in table.drift.items():
        rep.add(hard_check(f"{name}.K_drift", d < 0.10, d, 0.10), log)
    if "sector" in g["family"]:
        so = g["sector_oracle_s"]
        sec = [c for c in fam if c.name == "sector"]
        k_or = curves.estimate_K(sec, [so], g["b_radius"]).rows[0].K
        exact = so * 2 * (g["R"] - g["b_radius"]) / _sector_U_area(so, g["R"])
        rep.add(hard_check(f"sector.K_oracle(s={so:g})", abs(k_or - exact) <= 0.01, k_or, exact), log)
    params = curve_params(cfg, log)
    tg = curves.default_t_grid(params, g["t_count"])
    mono = {}
    for c in fam:
        m = curves.verify_monotonicity(c, params, tg)
        mono[c.name] = m.passed
        rep.add(hard_check(f"{c.name}.monotone_area_ratio", m.passed, m.worst_drop, 1e-6), log)
    rep.data = {
        "K_sup": table.sup,
        "params": {"r": params.r, "D": params.D, "C0": params.C0},
        "t_grid": tg,
    }
    lines = [CSV_HEADER]
    for row in table.rows:
        lines.append(
            f"{row.curve},{row.s!r},{row.length!r},{row.area!r},{row.K!r},{str(mono[row.curve]).lower()}"
        )
    return rep, "\n".join(lines) + "\n"


def _sector_U_area(s, R=1.0):
    """Area of the quarter disk of radius R within distance s of its two
    straight edges: 2 int_0^s sqrt(R^2 - x^2) dx - s^2."""
    strip = s * math.sqrt(R * R - s * s) + R * R * math.asin(s / R)
    return strip - s * s
