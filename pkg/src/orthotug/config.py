"""Run configuration: one JSON document fully determines a run.

Validation happens before any work starts and failures name the offending
key path.  ``RunConfig`` round-trips through ``to_dict``/``from_dict``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .dpp import Problem
from .field import BoundarySpec
from .geometry import DomainSpec

STRATEGY_KINDS = ("greedy_max", "greedy_min", "pull_toward", "uniform_random")
SWEEP_AXES = ("epsilon", "h", "M", "K", "p")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key path."""


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing")
    return d[key]


def _num(value, path: str, *, t=float, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    out = t(value)
    if positive and out <= 0:
        raise ConfigError(f"{path}: must be positive")
    return out


def _point(value, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError(f"{path}: expected a coordinate list")
    return [_num(c, f"{path}[{i}]") for i, c in enumerate(value)]


@dataclass
class StrategyConfig:
    kind: str
    field: str = "lower"            # greedy strategies: which solved field
    target: list[float] | None = None

    @classmethod
    def parse(cls, raw, path: str) -> "StrategyConfig":
        if isinstance(raw, str):
            raw = {"kind": raw}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: expected a strategy name or object")
        kind = _req(raw, "kind", path)
        if kind not in STRATEGY_KINDS:
            raise ConfigError(f"{path}.kind: unknown strategy '{kind}'")
        fld = raw.get("field", "lower")
        if fld not in ("lower", "upper"):
            raise ConfigError(f"{path}.field: must be 'lower' or 'upper'")
        target = None
        if kind == "pull_toward":
            target = _point(_req(raw, "target", path), f"{path}.target")
        return cls(kind=kind, field=fld, target=target)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("greedy_max", "greedy_min"):
            out["field"] = self.field
        if self.target is not None:
            out["target"] = list(self.target)
        return out


@dataclass
class RunConfig:
    # problem
    p: float | None
    alpha_zero: bool
    n: int
    epsilon: float
    domain: dict
    boundary: dict
    # numerics
    h: float | None
    M: int | None
    K: int
    tol: float
    max_iter: int
    # game
    N: int
    seed: int
    cap: int
    strategy_I: StrategyConfig
    strategy_II: StrategyConfig
    start_points: list[list[float]]
    workers: int
    record_trajectories: int
    # verify
    verify_trials: int
    verify_points: list[list[float]] | None
    verify_N: int
    negative_controls: bool
    # sweep
    sweep_axis: str
    sweep_values: list[float]
    # output
    out_dir: str
    figures: bool
    quiet: bool = dc_field(default=False)

    # -- parsing ----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: expected a JSON object")
        prob = _req(raw, "problem", "config")
        if not isinstance(prob, dict):
            raise ConfigError("problem: expected an object")
        alpha_zero = bool(prob.get("alpha_zero", False))
        p = prob.get("p")
        if p is not None:
            p = _num(p, "problem.p")
            if p <= 1:
                raise ConfigError("problem.p: must exceed 1")
        elif not alpha_zero:
            raise ConfigError("problem.p: missing (or set problem.alpha_zero)")
        n = int(_num(_req(prob, "n", "problem"), "problem.n", t=int))
        if n < 2:
            raise ConfigError("problem.n: must be at least 2")
        epsilon = _num(_req(prob, "epsilon", "problem"), "problem.epsilon", positive=True)
        domain = cls._parse_domain(_req(prob, "domain", "problem"), n)
        boundary = cls._parse_boundary(_req(prob, "boundary", "problem"), n)

        num = raw.get("numerics", {})
        h = num.get("h")
        if h is not None:
            h = _num(h, "numerics.h", positive=True)
            if h > epsilon / 4 + 1e-12 * epsilon:
                raise ConfigError("numerics.h: must not exceed epsilon/4")
        M = num.get("M")
        if M is not None:
            M = int(_num(M, "numerics.M", t=int))
            if M % 2 or M < 2 * n:
                raise ConfigError("numerics.M: must be even and at least 2n")
        K = int(_num(num.get("K", 8), "numerics.K", t=int))
        if K < 2:
            raise ConfigError("numerics.K: must be at least 2")
        tol = _num(num.get("tol", 1e-7), "numerics.tol", positive=True)
        max_iter = int(_num(num.get("max_iter", 100_000), "numerics.max_iter",
                            t=int, positive=True))

        game = raw.get("game", {})
        N = int(_num(game.get("N", 10_000), "game.N", t=int))
        if N < 100:
            raise ConfigError("game.N: must be at least 100")
        seed = int(_num(game.get("seed", 0), "game.seed", t=int))
        if seed < 0:
            raise ConfigError("game.seed: must be nonnegative")
        cap = int(_num(game.get("cap", 10**6), "game.cap", t=int, positive=True))
        strategy_I = StrategyConfig.parse(game.get("strategy_I", "greedy_max"),
                                          "game.strategy_I")
        strategy_II = StrategyConfig.parse(game.get("strategy_II", "greedy_min"),
                                           "game.strategy_II")
        raw_pts = game.get("start_points", [[0.0] * n])
        if not isinstance(raw_pts, list) or not raw_pts:
            raise ConfigError("game.start_points: expected a nonempty list")
        start_points = [_point(pt, f"game.start_points[{i}]")
                        for i, pt in enumerate(raw_pts)]
        workers = int(_num(game.get("workers", 1), "game.workers", t=int, positive=True))
        record = int(_num(game.get("record_trajectories", 0),
                          "game.record_trajectories", t=int))
        if record < 0:
            raise ConfigError("game.record_trajectories: must be nonnegative")

        ver = raw.get("verify", {})
        verify_trials = int(_num(ver.get("trials", 100), "verify.trials",
                                 t=int, positive=True))
        vp = ver.get("points")
        verify_points = None
        if vp is not None:
            verify_points = [_point(pt, f"verify.points[{i}]") for i, pt in enumerate(vp)]
        verify_N = int(_num(ver.get("N", 5000), "verify.N", t=int))
        if verify_N < 100:
            raise ConfigError("verify.N: must be at least 100")
        negative_controls = bool(ver.get("negative_controls", False))

        sweep = raw.get("sweep", {})
        sweep_axis = sweep.get("axis", "epsilon")
        if sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: must be one of {SWEEP_AXES}")
        sweep_values = sweep.get("values", [])
        if not isinstance(sweep_values, list):
            raise ConfigError("sweep.values: expected a list")
        sweep_values = [_num(v, f"sweep.values[{i}]") for i, v in enumerate(sweep_values)]

        out = raw.get("output", {})
        out_dir = out.get("dir", "out")
        figures = bool(out.get("figures", True))
        quiet = bool(out.get("quiet", False))

        return cls(p=p, alpha_zero=alpha_zero, n=n, epsilon=epsilon, domain=domain,
                   boundary=boundary, h=h, M=M, K=K, tol=tol, max_iter=max_iter,
                   N=N, seed=seed, cap=cap, strategy_I=strategy_I,
                   strategy_II=strategy_II, start_points=start_points,
                   workers=workers, record_trajectories=record,
                   verify_trials=verify_trials, verify_points=verify_points,
                   verify_N=verify_N, negative_controls=negative_controls,
                   sweep_axis=sweep_axis, sweep_values=sweep_values,
                   out_dir=out_dir, figures=figures, quiet=quiet)

    @staticmethod
    def _parse_domain(raw: dict, n: int) -> dict:
        if not isinstance(raw, dict):
            raise ConfigError("problem.domain: expected an object")
        shape = _req(raw, "shape", "problem.domain")
        if shape == "ball":
            center = _point(_req(raw, "center", "problem.domain"), "problem.domain.center")
            radius = _num(_req(raw, "radius", "problem.domain"),
                          "problem.domain.radius", positive=True)
            out = {"shape": "ball", "center": center, "radius": radius}
        elif shape == "box":
            lo = _point(_req(raw, "lo", "problem.domain"), "problem.domain.lo")
            hi = _point(_req(raw, "hi", "problem.domain"), "problem.domain.hi")
            if not all(a < b for a, b in zip(lo, hi)):
                raise ConfigError("problem.domain: needs lo < hi per axis")
            out = {"shape": "box", "lo": lo, "hi": hi}
        elif shape == "annulus":
            center = _point(_req(raw, "center", "problem.domain"), "problem.domain.center")
            r_inner = _num(_req(raw, "r_inner", "problem.domain"),
                           "problem.domain.r_inner", positive=True)
            r_outer = _num(_req(raw, "r_outer", "problem.domain"),
                           "problem.domain.r_outer", positive=True)
            if r_inner >= r_outer:
                raise ConfigError("problem.domain.r_inner: must be below r_outer")
            out = {"shape": "annulus", "center": center,
                   "r_inner": r_inner, "r_outer": r_outer}
        else:
            raise ConfigError(f"problem.domain.shape: unknown shape '{shape}'")
        pts = out.get("center") or out.get("lo")
        if len(pts) != n:
            raise ConfigError("problem.domain: dimension does not match problem.n")
        return out

    @staticmethod
    def _parse_boundary(raw: dict, n: int) -> dict:
        if not isinstance(raw, dict):
            raise ConfigError("problem.boundary: expected an object")
        family = _req(raw, "family", "problem.boundary")
        if family == "affine":
            a = _point(_req(raw, "a", "problem.boundary"), "problem.boundary.a")
            if len(a) != n:
                raise ConfigError("problem.boundary.a: dimension mismatch")
            return {"family": "affine", "a": a,
                    "b": _num(raw.get("b", 0.0), "problem.boundary.b")}
        if family == "constant":
            return {"family": "constant",
                    "value": _num(_req(raw, "value", "problem.boundary"),
                                  "problem.boundary.value")}
        if family == "quadratic":
            return {"family": "quadratic",
                    "center": _point(raw.get("center", [0.0] * n),
                                     "problem.boundary.center"),
                    "scale": _num(raw.get("scale", 1.0), "problem.boundary.scale")}
        if family == "radial_pharmonic":
            pp = _num(_req(raw, "p", "problem.boundary"), "problem.boundary.p")
            if pp <= 1:
                raise ConfigError("problem.boundary.p: must exceed 1")
            return {"family": "radial_pharmonic", "p": pp,
                    "center": _point(raw.get("center", [0.0] * n),
                                     "problem.boundary.center")}
        if family == "cone":
            return {"family": "cone",
                    "vertex": _point(_req(raw, "vertex", "problem.boundary"),
                                     "problem.boundary.vertex")}
        raise ConfigError(f"problem.boundary.family: unknown family '{family}'")

    # -- construction ------------------------------------------------------

    def build_domain(self) -> DomainSpec:
        d = self.domain
        if d["shape"] == "ball":
            return DomainSpec.ball(d["center"], d["radius"])
        if d["shape"] == "box":
            return DomainSpec.box(d["lo"], d["hi"])
        return DomainSpec.annulus(d["center"], d["r_inner"], d["r_outer"])

    def build_boundary(self) -> BoundarySpec:
        b = self.boundary
        if b["family"] == "affine":
            return BoundarySpec.affine(b["a"], b["b"])
        if b["family"] == "constant":
            return BoundarySpec.constant(b["value"], n=self.n)
        if b["family"] == "quadratic":
            return BoundarySpec.quadratic(b["center"], b["scale"])
        if b["family"] == "radial_pharmonic":
            return BoundarySpec.radial_pharmonic(b["p"], b["center"])
        return BoundarySpec.cone(b["vertex"])

    def build_problem(self, epsilon=None, h=None, M=None, K=None, p=None) -> Problem:
        eps = self.epsilon if epsilon is None else float(epsilon)
        step = self.h if h is None else float(h)
        if h is None and self.h is None:
            step = None  # per-problem default epsilon/8
        try:
            return Problem(domain=self.build_domain(), boundary=self.build_boundary(),
                           epsilon=eps, n=self.n,
                           p=(self.p if p is None else float(p)),
                           alpha_zero=self.alpha_zero,
                           M=(self.M if M is None else int(M)),
                           K=(self.K if K is None else int(K)), h=step)
        except ValueError as err:
            raise ConfigError(f"problem: {err}") from err

    # -- round trip ---------------------------------------------------------

    def to_dict(self) -> dict:
        prob = {"alpha_zero": self.alpha_zero, "n": self.n, "epsilon": self.epsilon,
                "domain": self.domain, "boundary": self.boundary}
        if self.p is not None:
            prob["p"] = self.p
        return {
            "problem": prob,
            "numerics": {"h": self.h, "M": self.M, "K": self.K, "tol": self.tol,
                         "max_iter": self.max_iter},
            "game": {"N": self.N, "seed": self.seed, "cap": self.cap,
                     "strategy_I": self.strategy_I.to_dict(),
                     "strategy_II": self.strategy_II.to_dict(),
                     "start_points": [list(p) for p in self.start_points],
                     "workers": self.workers,
                     "record_trajectories": self.record_trajectories},
            "verify": {"trials": self.verify_trials,
                       "points": self.verify_points,
                       "N": self.verify_N,
                       "negative_controls": self.negative_controls},
            "sweep": {"axis": self.sweep_axis, "values": list(self.sweep_values)},
            "output": {"dir": self.out_dir, "figures": self.figures,
                       "quiet": self.quiet},
        }


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config: file not found: {path}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config: invalid JSON ({err})") from err
    return RunConfig.from_dict(raw)


def interior_probe_points(config: RunConfig, count: int = 3) -> list[list[float]]:
    """Default interior points for game-based checks when none are given."""
    domain = config.build_domain()
    if domain.kind == "ball":
        center = np.asarray(domain.center)
        offsets = [0.0, 0.4, -0.35]
        pts = [center + off * domain.radius * np.eye(config.n)[0] for off in offsets]
    elif domain.kind == "annulus":
        center = np.asarray(domain.center)
        mid = 0.5 * (domain.r_inner + domain.r_outer)
        pts = [center + mid * np.eye(config.n)[i % config.n] for i in range(count)]
    else:
        lo = np.asarray(domain.lo)
        hi = np.asarray(domain.hi)
        mid = 0.5 * (lo + hi)
        pts = [mid, mid + 0.2 * (hi - mid), mid - 0.25 * (hi - mid)]
    return [[float(c) for c in p] for p in pts[:count]]
