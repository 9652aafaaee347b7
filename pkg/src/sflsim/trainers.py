"""Sequential and parallel federated training loops.

Both loops share one randomness discipline: round r's client schedule comes
from the master seed's ("schedule", r) stream and the noise of the client in
slot s of round r from ("noise", r, s).  A sequential and a parallel run
with the same seed therefore visit the same schedules and draw the same
noise, making A/B comparisons paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .objectives import MultiDimInstance, QuadraticClient, sample_stochastic_gradient
from .rng import StreamFamily

__all__ = [
    "TrainingConfig",
    "RunRecord",
    "DivergenceError",
    "sample_round_schedule",
    "local_sgd",
    "run_sfl",
    "run_pfl",
]

_DIVERGENCE_CAP = 1e100


class DivergenceError(RuntimeError):
    """An iterate left the finite range; carries the failing location."""

    def __init__(self, step: int, round_index: int | None = None, slot: int | None = None):
        self.step = step
        self.round_index = round_index
        self.slot = slot
        where = f"step {step}"
        if slot is not None:
            where = f"slot {slot}, {where}"
        if round_index is not None:
            where = f"round {round_index}, {where}"
        super().__init__(f"iterate diverged at {where}")


@dataclass(frozen=True)
class TrainingConfig:
    """All run parameters.  Effective learning rates are derived, never
    stored: eta*M*K for sequential rounds, eta*K for parallel ones."""

    rounds: int
    clients: int
    local_steps: int
    client_lr: float
    participants: Optional[int] = None  # None -> all clients every round
    server_lr: float = 1.0
    clip: Optional[float] = None
    batch: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.clients < 1:
            raise ValueError("clients must be >= 1")
        if self.local_steps < 0:
            raise ValueError("local_steps must be >= 0")
        if self.client_lr <= 0:
            raise ValueError("client_lr must be > 0")
        if self.server_lr < 0:
            raise ValueError("server_lr must be >= 0")
        S = self.participants
        if S is not None and not 1 <= S <= self.clients:
            raise ValueError(f"participants must be in 1..{self.clients}, got {S}")
        if self.clip is not None and self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.batch is not None and self.batch < 1:
            raise ValueError("batch must be >= 1")

    @property
    def num_participants(self) -> int:
        return self.clients if self.participants is None else self.participants

    @property
    def eff_lr_sfl(self) -> float:
        return self.client_lr * self.clients * self.local_steps

    @property
    def eff_lr_pfl(self) -> float:
        return self.client_lr * self.local_steps


@dataclass
class RunRecord:
    """Trajectory and per-round metrics of one run.

    ``xs`` has R+1 entries including the initial point (fewer if the run
    diverged and was truncated).  ``values``/``grad_sq`` track the global
    objective and squared gradient norm along the trajectory.
    """

    xs: np.ndarray
    schedules: tuple[tuple[int, ...], ...]
    values: np.ndarray
    grad_sq: np.ndarray
    diverged: bool = False
    divergence_at: Optional[dict] = None
    notes: tuple[str, ...] = ()

    @property
    def final_x(self):
        return self.xs[-1]

    def uniform_average(self):
        """Plain average of the recorded global iterates."""
        return np.mean(self.xs, axis=0)

    def geometric_average(self, mu: float, eff_lr: float):
        """Average weighted by w_r = (1 - mu*eff_lr/2)^-(r+1)."""
        rate = 1.0 - mu * eff_lr / 2.0
        if not 0.0 < rate < 1.0:
            raise ValueError("geometric weights need 0 < mu*eff_lr/2 < 1")
        r = np.arange(len(self.xs))
        w = rate ** -(r + 1.0)
        w /= w.sum()
        if self.xs.ndim == 1:
            return float(np.dot(w, self.xs))
        return w @ self.xs

    def distances(self, x_star) -> np.ndarray:
        diff = self.xs - np.asarray(x_star)
        if diff.ndim == 1:
            return np.abs(diff)
        return np.linalg.norm(diff, axis=1)


def sample_round_schedule(M: int, S: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Uniform ordered sample of S distinct client indices from 0..M-1
    (a full permutation when S = M)."""
    if not 1 <= S <= M:
        raise ValueError(f"need 1 <= S <= M, got S={S}, M={M}")
    return tuple(int(i) for i in rng.permutation(M)[:S])


def _check_finite(x, step: int):
    if isinstance(x, float):
        if math.isnan(x) or not -_DIVERGENCE_CAP <= x <= _DIVERGENCE_CAP:
            raise DivergenceError(step)
        return
    arr = np.asarray(x)
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > _DIVERGENCE_CAP):
        raise DivergenceError(step)


def local_sgd(
    client,
    x0,
    K: int,
    eta: float,
    clip: Optional[float] = None,
    rng: Optional[np.random.Generator] = None,
) -> object:
    """K stochastic-gradient steps on one client from x0.

    Each step optionally rescales the sampled gradient to norm <= clip
    before applying it.  K = 0 returns x0 unchanged.
    """
    x = x0
    for k in range(K):
        g = sample_stochastic_gradient(client, x, rng)
        if clip is not None:
            norm = abs(g) if np.ndim(g) == 0 else float(np.linalg.norm(g))
            if norm > clip:
                g = g * (clip / norm)
        x = x - eta * g
        _check_finite(x, k)
    return x


def _resolve_problem(clients, x0):
    if isinstance(clients, MultiDimInstance):
        inst = clients
        if x0 is None:
            x0 = inst.init
        # One-dimensional instances run on their scalar clients directly.
        clients = list(inst.per_dim[0]) if inst.dims == 1 else inst.clients
    elif x0 is None:
        raise ValueError("x0 is required when clients is a plain list")
    clients = list(clients)
    # One-dimensional quadratic clients run on plain floats; everything
    # else on (d,) vectors.
    if all(isinstance(c, QuadraticClient) for c in clients):
        if np.ndim(x0) != 0:
            x0 = np.asarray(x0, dtype=float).reshape(())
        return clients, float(x0)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    return clients, x


def _finish(xs, schedules, clients, diverged, divergence_at, notes):
    from .objectives import global_gradient, global_value

    traj = np.asarray(xs)
    values = np.array([global_value(clients, x) for x in xs])
    grad_sq = np.empty(len(xs))
    for i, x in enumerate(xs):
        g = global_gradient(clients, x)
        grad_sq[i] = g * g if np.ndim(g) == 0 else float(np.dot(g, g))
    return RunRecord(
        xs=traj,
        schedules=tuple(schedules),
        values=values,
        grad_sq=grad_sq,
        diverged=diverged,
        divergence_at=divergence_at,
        notes=tuple(notes),
    )


def _run(method: str, cfg: TrainingConfig, clients, x0, schedules):
    clients, x = _resolve_problem(clients, x0)
    if len(clients) != cfg.clients:
        raise ValueError(f"cfg.clients={cfg.clients} but {len(clients)} clients supplied")
    S = cfg.num_participants
    streams = StreamFamily(cfg.seed)
    notes = []
    if cfg.server_lr != 1.0 and S < cfg.clients:
        notes.append("server_lr combined with partial participation: outside proven theory")

    xs = [x]
    used_schedules = []
    diverged = False
    divergence_at = None
    for r in range(cfg.rounds):
        if schedules is not None:
            order = tuple(schedules[r])
            if len(order) != S:
                raise ValueError(f"forced schedule for round {r} must list {S} clients")
        else:
            order = sample_round_schedule(cfg.clients, S, streams.schedule(r))
        used_schedules.append(order)
        try:
            if method == "SFL":
                y = x
                for slot, m in enumerate(order):
                    rng = streams.noise(r, slot) if clients[m].needs_rng else None
                    try:
                        y = local_sgd(clients[m], y, cfg.local_steps, cfg.client_lr, cfg.clip, rng)
                    except DivergenceError as e:
                        raise DivergenceError(e.step, r, slot) from None
            else:
                outs = []
                for slot, m in enumerate(order):
                    rng = streams.noise(r, slot) if clients[m].needs_rng else None
                    try:
                        outs.append(
                            local_sgd(clients[m], x, cfg.local_steps, cfg.client_lr, cfg.clip, rng)
                        )
                    except DivergenceError as e:
                        raise DivergenceError(e.step, r, slot) from None
                y = outs[0] if len(outs) == 1 else sum(outs) / len(outs)
            if cfg.server_lr == 1.0:
                x = y
            else:
                x = x - cfg.server_lr * (x - y)
            _check_finite(x, -1)
        except DivergenceError as e:
            diverged = True
            divergence_at = {"round": r, "slot": e.slot, "step": e.step}
            break
        xs.append(x)
    return _finish(xs, used_schedules, clients, diverged, divergence_at, notes)


def run_sfl(cfg: TrainingConfig, clients, x0=None, schedules: Optional[Sequence] = None) -> RunRecord:
    """Sequential rounds: the sampled clients run local SGD in order, each
    starting from the previous client's output; the server then moves the
    global point by server_lr times the round's displacement (server_lr = 1
    adopts the last client's parameters directly).

    ``schedules`` forces the per-round client orders (used by exhaustive
    enumeration oracles); by default they are sampled from the seed's
    schedule streams.
    """
    return _run("SFL", cfg, clients, x0, schedules)


def run_pfl(cfg: TrainingConfig, clients, x0=None, schedules: Optional[Sequence] = None) -> RunRecord:
    """Parallel rounds: every sampled client runs local SGD from the round's
    starting point; the server averages their outputs and moves by
    server_lr times the displacement."""
    return _run("PFL", cfg, clients, x0, schedules)
