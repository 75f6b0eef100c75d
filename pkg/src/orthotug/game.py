"""Tug-of-war with orthogonal noise as a seeded stochastic state machine.

One turn: a fair coin picks whose declared move vector is used; with
probability alpha the token moves by that vector, with probability beta by
a uniform draw from the orthogonal disk of radius epsilon.  Landing in the
outer strip stops the game; landing in the inner strip stops it with
probability ``1 - dist/epsilon``.  Each turn consumes three logical draws
from the step stream -- coin, move kind, and a displacement/termination
block of n scalars -- whether or not every scalar ends up used, so
trajectories are reproducible and auditable.

Playouts are vectorized across games.  Every run owns counter-derived
Philox streams (step, player one, player two), so results are independent
of batching and of the worker count, bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .dpp import Problem, direction_values_batch
from .field import ScalarField
from .geometry import (
    DirectionSet,
    DiskRule,
    DomainViolation,
    Region,
    classify_region,
    delta_from_sd,
    norm_rows,
    orthonormal_complement,
)

STEP_LANE = 0
PLAYER_I_LANE = 1
PLAYER_II_LANE = 2

MAX_TRUNCATION_FRACTION = 1e-3
DEFAULT_CAP = 10**6


class GameStatus(IntEnum):
    RUNNING = 0
    ENDED_INNER_STRIP = 1
    ENDED_OUTER_STRIP = 2


STATUS_NAMES = {
    GameStatus.RUNNING: "running",
    GameStatus.ENDED_INNER_STRIP: "ended_inner_strip",
    GameStatus.ENDED_OUTER_STRIP: "ended_outer_strip",
}


@dataclass(frozen=True)
class GameState:
    position: np.ndarray
    turn: int
    status: GameStatus


@dataclass
class Trajectory:
    """Full audit of one playout: positions, coin outcomes, move kinds."""

    positions: np.ndarray          # (turns + 1, n)
    coins: list[str]               # "I" / "II" per turn
    move_kinds: list[str]          # "tug" / "noise" per turn
    status: GameStatus
    truncated: bool
    payoff: float | None

    @property
    def turns(self) -> int:
        return len(self.coins)


@dataclass(frozen=True)
class Strategy:
    """Position-only strategy; the returned move always belongs to the
    direction set of the problem being played."""

    kind: str
    field: ScalarField | None = None
    target: tuple[float, ...] | None = None

    @classmethod
    def greedy_max(cls, field: ScalarField) -> "Strategy":
        return cls(kind="greedy_max", field=field)

    @classmethod
    def greedy_min(cls, field: ScalarField) -> "Strategy":
        return cls(kind="greedy_min", field=field)

    @classmethod
    def pull_toward(cls, target) -> "Strategy":
        return cls(kind="pull_toward",
                   target=tuple(float(c) for c in np.atleast_1d(target)))

    @classmethod
    def uniform_random(cls) -> "Strategy":
        return cls(kind="uniform_random")

    @property
    def needs_rng(self) -> bool:
        return self.kind == "uniform_random"


def philox_stream(seed: int, run_index: int, lane: int) -> np.random.Generator:
    """Counter-derived stream: key = (seed, 0), counter = (0, 0, lane, run)."""
    bitgen = np.random.Philox(key=[int(seed), 0], counter=[0, 0, int(lane), int(run_index)])
    return np.random.Generator(bitgen)


def greedy_move(field, x, mode: str, dirs: DirectionSet, rules: list[DiskRule],
                problem: Problem) -> np.ndarray:
    """Best (or worst) direction for the current field; ties take the
    lowest index."""
    x = np.asarray(x, dtype=np.float64)
    W = direction_values_batch(field, x[None, :], dirs, rules,
                               problem.alpha, problem.beta)[0]
    j = int(np.argmax(W)) if mode == "max" else int(np.argmin(W))
    return dirs.vectors[j]


def _pull_indices(target: np.ndarray, X: np.ndarray, dirs: DirectionSet) -> np.ndarray:
    diff = target[None, :] - X
    M = len(dirs)
    dots = np.empty((X.shape[0], M))
    for j in range(M):
        v = dirs.vectors[j]
        acc = diff[:, 0] * v[0]
        for i in range(1, X.shape[1]):
            acc = acc + diff[:, i] * v[i]
        dots[:, j] = acc
    return np.argmax(dots, axis=1)


def _strategy_indices(strategy: Strategy, X: np.ndarray, run_ids: np.ndarray,
                      problem: Problem, dirs: DirectionSet, rules: list[DiskRule],
                      lane_gens: dict[int, np.random.Generator] | None) -> np.ndarray:
    if strategy.kind == "greedy_max":
        W = direction_values_batch(strategy.field, X, dirs, rules,
                                   problem.alpha, problem.beta)
        return np.argmax(W, axis=1)
    if strategy.kind == "greedy_min":
        W = direction_values_batch(strategy.field, X, dirs, rules,
                                   problem.alpha, problem.beta)
        return np.argmin(W, axis=1)
    if strategy.kind == "pull_toward":
        return _pull_indices(np.asarray(strategy.target), X, dirs)
    if strategy.kind == "uniform_random":
        return np.asarray([int(lane_gens[int(i)].integers(len(dirs))) for i in run_ids],
                          dtype=np.int64)
    raise ValueError(f"unknown strategy kind: {strategy.kind}")


def _displace(X: np.ndarray, V: np.ndarray, bases: np.ndarray, tug: np.ndarray,
              blocks: np.ndarray, epsilon: float, n: int) -> np.ndarray:
    """New positions from the chosen vectors and the per-turn draw blocks."""
    if n == 2:
        t = (2.0 * blocks[:, 2] - 1.0) * epsilon
        noise = t[:, None] * bases[:, 0, :]
    else:
        r = epsilon * np.sqrt(blocks[:, 2])
        theta = (2.0 * math.pi) * blocks[:, 3]
        noise = r[:, None] * (np.cos(theta)[:, None] * bases[:, 0, :]
                              + np.sin(theta)[:, None] * bases[:, 1, :])
    return X + np.where(tug[:, None], V, noise)


def _land(Xnew: np.ndarray, term_u: np.ndarray, problem: Problem
          ) -> tuple[np.ndarray, np.ndarray]:
    """Statuses after landing: outer strip stops, inner strip stops with
    probability one minus the scaled distance."""
    sd = problem.domain.signed_distance_batch(Xnew)
    outer = sd > 0.0
    inner = (~outer) & (sd >= -problem.epsilon)
    delta = delta_from_sd(sd, problem.epsilon)
    ended_inner = inner & (term_u < delta)
    status = np.full(Xnew.shape[0], int(GameStatus.RUNNING), dtype=np.uint8)
    status[ended_inner] = int(GameStatus.ENDED_INNER_STRIP)
    status[outer] = int(GameStatus.ENDED_OUTER_STRIP)
    return status, sd


def step(state: GameState, v_I, v_II, problem: Problem,
         rng: np.random.Generator) -> GameState:
    """Advance one turn.  Consumes the fixed three-draw layout: coin,
    move kind, and the displacement/termination block of n scalars."""
    if state.status != GameStatus.RUNNING:
        raise ValueError("cannot step a terminated game")
    n = problem.n
    block = rng.random(2 + n)
    v = np.asarray(v_I if block[0] < 0.5 else v_II, dtype=np.float64)
    tug = block[1] < problem.alpha
    basis = orthonormal_complement(v)
    Xnew = _displace(state.position[None, :], v[None, :], basis[None, :, :],
                     np.asarray([tug]), block[None, :], problem.epsilon, n)
    status, _ = _land(Xnew, np.asarray([block[1 + n]]), problem)
    return GameState(position=Xnew[0], turn=state.turn + 1,
                     status=GameStatus(int(status[0])))


@dataclass
class BatchResult:
    payoffs: np.ndarray     # NaN for truncated runs
    turns: np.ndarray
    statuses: np.ndarray
    truncated: np.ndarray
    coins: list[list[str]] | None = None
    kinds: list[list[str]] | None = None
    positions: list[np.ndarray] | None = None
    trans_run: np.ndarray | None = None
    trans_turn: np.ndarray | None = None
    trans_prev: np.ndarray | None = None
    trans_next: np.ndarray | None = None


def play_batch(x0, S_I: Strategy, S_II: Strategy, problem: Problem, seed: int,
               n_runs: int, cap: int, run_offset: int = 0,
               record_transitions: bool = False, record_audit: bool = False,
               dirs: DirectionSet | None = None,
               rules: list[DiskRule] | None = None) -> BatchResult:
    """Vectorized playouts; run ``run_offset + i`` uses its own streams, so
    any partition of the runs reproduces the same per-run results."""
    if cap < 1:
        raise ValueError("cap must be at least 1")
    x0 = np.asarray(x0, dtype=np.float64)
    n = problem.n
    if dirs is None or rules is None:
        dirs, rules = problem.move_kit()
    complements = np.stack([orthonormal_complement(v) for v in dirs.vectors])

    region = classify_region(problem.domain, problem.epsilon, x0)
    if region == Region.OUTSIDE:
        raise DomainViolation("starting point outside the thickened domain")

    run_ids = np.arange(run_offset, run_offset + n_runs, dtype=np.int64)
    positions = np.tile(x0, (n_runs, 1))
    turns = np.zeros(n_runs, dtype=np.int64)
    statuses = np.full(n_runs, int(GameStatus.RUNNING), dtype=np.uint8)
    payoffs = np.full(n_runs, np.nan)
    truncated = np.zeros(n_runs, dtype=bool)

    audit_coins = [[] for _ in range(n_runs)] if record_audit else None
    audit_kinds = [[] for _ in range(n_runs)] if record_audit else None
    audit_pos = [[x0.copy()] for _ in range(n_runs)] if record_audit else None
    tr_run, tr_turn, tr_prev, tr_next = [], [], [], []

    if region == Region.OUTER_STRIP:
        statuses[:] = int(GameStatus.ENDED_OUTER_STRIP)
        payoffs[:] = problem.boundary.evaluate_batch(positions)
        return _finish_batch(payoffs, turns, statuses, truncated, audit_coins,
                             audit_kinds, audit_pos, tr_run, tr_turn, tr_prev,
                             tr_next, record_transitions, n)

    step_gens = {int(r): philox_stream(seed, int(r), STEP_LANE) for r in run_ids}
    lane_I = {int(r): philox_stream(seed, int(r), PLAYER_I_LANE) for r in run_ids} \
        if S_I.needs_rng else None
    lane_II = {int(r): philox_stream(seed, int(r), PLAYER_II_LANE) for r in run_ids} \
        if S_II.needs_rng else None

    active = np.arange(n_runs)
    if region == Region.INNER_STRIP:
        # the start already sits in the stopping strip: one pre-check draw
        sd0 = float(problem.domain.signed_distance_batch(x0[None, :])[0])
        delta0 = float(delta_from_sd(np.asarray([sd0]), problem.epsilon)[0])
        u0 = np.asarray([step_gens[int(r)].random() for r in run_ids])
        stopped = u0 < delta0
        statuses[stopped] = int(GameStatus.ENDED_INNER_STRIP)
        payoffs[stopped] = problem.boundary.evaluate_batch(positions[stopped])
        active = active[~stopped]

    t = 0
    while len(active) and t < cap:
        X = positions[active]
        gids = run_ids[active]
        idx_I = _strategy_indices(S_I, X, gids, problem, dirs, rules, lane_I)
        idx_II = _strategy_indices(S_II, X, gids, problem, dirs, rules, lane_II)
        blocks = np.empty((len(active), 2 + n))
        for a, r in enumerate(gids):
            blocks[a] = step_gens[int(r)].random(2 + n)
        coin_I = blocks[:, 0] < 0.5
        chosen = np.where(coin_I, idx_I, idx_II)
        V = dirs.vectors[chosen]
        tug = blocks[:, 1] < problem.alpha
        Xnew = _displace(X, V, complements[chosen], tug, blocks, problem.epsilon, n)
        status_new, _ = _land(Xnew, blocks[:, 1 + n], problem)

        positions[active] = Xnew
        turns[active] = t + 1
        if record_transitions:
            tr_run.append(gids.copy())
            tr_turn.append(np.full(len(active), t, dtype=np.int64))
            tr_prev.append(X.copy())
            tr_next.append(Xnew.copy())
        if record_audit:
            for a, i in enumerate(active):
                audit_coins[i].append("I" if coin_I[a] else "II")
                audit_kinds[i].append("tug" if tug[a] else "noise")
                audit_pos[i].append(Xnew[a].copy())

        ended = status_new != int(GameStatus.RUNNING)
        if np.any(ended):
            eidx = active[ended]
            statuses[eidx] = status_new[ended]
            payoffs[eidx] = problem.boundary.evaluate_batch(Xnew[ended])
        active = active[~ended]
        t += 1

    if len(active):
        truncated[active] = True
        turns[active] = cap
    return _finish_batch(payoffs, turns, statuses, truncated, audit_coins,
                         audit_kinds, audit_pos, tr_run, tr_turn, tr_prev,
                         tr_next, record_transitions, n)


def _finish_batch(payoffs, turns, statuses, truncated, coins, kinds, pos,
                  tr_run, tr_turn, tr_prev, tr_next, record_transitions, n):
    res = BatchResult(payoffs=payoffs, turns=turns, statuses=statuses,
                      truncated=truncated)
    if coins is not None:
        res.coins = coins
        res.kinds = kinds
        res.positions = [np.asarray(p) for p in pos]
    if record_transitions:
        if tr_run:
            res.trans_run = np.concatenate(tr_run)
            res.trans_turn = np.concatenate(tr_turn)
            res.trans_prev = np.concatenate(tr_prev)
            res.trans_next = np.concatenate(tr_next)
        else:
            res.trans_run = np.empty(0, dtype=np.int64)
            res.trans_turn = np.empty(0, dtype=np.int64)
            res.trans_prev = np.empty((0, n))
            res.trans_next = np.empty((0, n))
    return res


def play(x0, S_I: Strategy, S_II: Strategy, problem: Problem, seed: int,
         cap: int = DEFAULT_CAP, run_index: int = 0) -> Trajectory:
    """One audited playout.  A start in the outer strip returns a zero-turn
    trajectory with the boundary payoff; hitting the cap sets the explicit
    truncation flag instead of inventing a payoff."""
    res = play_batch(x0, S_I, S_II, problem, seed, 1, cap, run_offset=run_index,
                     record_audit=True)
    payoff = None if res.truncated[0] else float(res.payoffs[0])
    return Trajectory(positions=res.positions[0], coins=res.coins[0],
                      move_kinds=res.kinds[0], status=GameStatus(int(res.statuses[0])),
                      truncated=bool(res.truncated[0]), payoff=payoff)


# ---------------------------------------------------------------------------
# Monte Carlo aggregation
# ---------------------------------------------------------------------------

def _chunk_worker(payload) -> BatchResult:
    (x0, S_I, S_II, problem, seed, cap, a, b, record_transitions) = payload
    return play_batch(x0, S_I, S_II, problem, seed, b - a, cap, run_offset=a,
                      record_transitions=record_transitions)


def _run_chunks(x0, S_I, S_II, problem, seed, N, cap, workers,
                record_transitions=False) -> list[BatchResult]:
    bounds = np.linspace(0, N, max(int(workers), 1) + 1).astype(int)
    payloads = [(np.asarray(x0, dtype=np.float64), S_I, S_II, problem, int(seed),
                 int(cap), int(a), int(b), record_transitions)
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if workers <= 1:
        return [_chunk_worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(_chunk_worker, payloads))


@dataclass
class ValueEstimate:
    mean: float
    std_error: float
    ci95: float
    n_runs: int
    n_truncated: int

    @property
    def truncation_fraction(self) -> float:
        return self.n_truncated / self.n_runs

    @property
    def ok(self) -> bool:
        return self.truncation_fraction <= MAX_TRUNCATION_FRACTION


def estimate_value(x0, S_I: Strategy, S_II: Strategy, problem: Problem, N: int,
                   seed: int, cap: int = DEFAULT_CAP, workers: int = 1) -> ValueEstimate:
    """Monte Carlo estimate of the expected payoff from ``x0``.

    Per-run seeds come from (seed, run index) by the Philox counter scheme;
    aggregation uses exact compensated sums in run order, so any worker
    count reproduces the sequential statistics bit for bit.  Truncated runs
    are excluded from the mean and reported; an estimate with truncation
    fraction above ``1e-3`` is flagged as failed via ``ok``.
    """
    if N < 100:
        raise ValueError("need at least 100 runs")
    chunks = _run_chunks(x0, S_I, S_II, problem, seed, N, cap, workers)
    payoffs = np.concatenate([c.payoffs for c in chunks])
    truncated = np.concatenate([c.truncated for c in chunks])
    valid = payoffs[~truncated]
    n_valid = len(valid)
    if n_valid == 0:
        return ValueEstimate(mean=float("nan"), std_error=float("nan"),
                             ci95=float("nan"), n_runs=N, n_truncated=int(truncated.sum()))
    mean = math.fsum(valid.tolist()) / n_valid
    if n_valid > 1:
        var = math.fsum(((v - mean) ** 2 for v in valid.tolist())) / (n_valid - 1)
    else:
        var = 0.0
    se = math.sqrt(var / n_valid)
    return ValueEstimate(mean=mean, std_error=se, ci95=1.96 * se, n_runs=N,
                         n_truncated=int(truncated.sum()))


def bounding_radius(domain, x0) -> float:
    """Radius of the smallest ball about ``x0`` containing the domain."""
    x0 = np.asarray(x0, dtype=np.float64)
    if domain.kind == "ball":
        return float(norm_rows(x0 - np.asarray(domain.center))[()]) + domain.radius
    if domain.kind == "annulus":
        return float(norm_rows(x0 - np.asarray(domain.center))[()]) + domain.r_outer
    corners = np.array(np.meshgrid(*zip(domain.lo, domain.hi), indexing="ij"))
    corners = corners.reshape(len(domain.lo), -1).T
    return float(np.max(norm_rows(corners - x0)))


def block_turn_bound(r: float, epsilon: float) -> int:
    """Turn-block length after which each block ends the game with some
    fixed positive probability: ceil(16 r^2 / eps^2)."""
    return int(math.ceil(16.0 * r * r / (epsilon * epsilon)))


@dataclass
class SurvivalTable:
    j_tilde: int
    blocks: list[int]          # m = 1..10
    survival: list[float]      # fraction still running after m * j_tilde turns
    theta_hat: float           # fitted geometric decay rate per block
    n_runs: int
    n_truncated: int
    cap: int


def exit_time_stats(x0, S_I: Strategy, S_II: Strategy, problem: Problem, N: int,
                    seed: int, cap: int = DEFAULT_CAP, workers: int = 1) -> SurvivalTable:
    """Empirical survival over turn blocks of length ceil(16 r^2 / eps^2)."""
    if N < 100:
        raise ValueError("need at least 100 runs")
    r = bounding_radius(problem.domain, x0)
    j_tilde = block_turn_bound(r, problem.epsilon)
    chunks = _run_chunks(x0, S_I, S_II, problem, seed, N, cap, workers)
    turns = np.concatenate([c.turns for c in chunks])
    truncated = np.concatenate([c.truncated for c in chunks])
    blocks = list(range(1, 11))
    survival = [float(np.count_nonzero(turns > m * j_tilde)) / N for m in blocks]
    ratios = [1.0 - survival[m] / survival[m - 1]
              for m in range(1, len(survival)) if survival[m - 1] > 0.0]
    theta = math.fsum(ratios) / len(ratios) if ratios else 1.0
    return SurvivalTable(j_tilde=j_tilde, blocks=blocks, survival=survival,
                         theta_hat=theta, n_runs=N, n_truncated=int(truncated.sum()),
                         cap=cap)


@dataclass
class TransitionSample:
    """Position pairs (x_k, x_{k+1}) pooled over playouts, in canonical
    (run, turn) order so statistics do not depend on batching."""

    run: np.ndarray
    turn: np.ndarray
    prev: np.ndarray
    next: np.ndarray
    n_runs: int
    n_truncated: int


def collect_transitions(x0, S_I: Strategy, S_II: Strategy, problem: Problem,
                        N: int, seed: int, cap: int = DEFAULT_CAP,
                        workers: int = 1) -> TransitionSample:
    chunks = _run_chunks(x0, S_I, S_II, problem, seed, N, cap, workers,
                         record_transitions=True)
    run = np.concatenate([c.trans_run for c in chunks])
    turn = np.concatenate([c.trans_turn for c in chunks])
    prev = np.concatenate([c.trans_prev for c in chunks])
    nxt = np.concatenate([c.trans_next for c in chunks])
    order = np.lexsort((turn, run))
    truncated = np.concatenate([c.truncated for c in chunks])
    return TransitionSample(run=run[order], turn=turn[order], prev=prev[order],
                            next=nxt[order], n_runs=N,
                            n_truncated=int(truncated.sum()))
