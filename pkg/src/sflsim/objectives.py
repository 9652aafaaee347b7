"""Client objective families: piecewise quadratics, logistic losses, and
the multi-dimensional adversarial compositions used to certify lower
bounds, together with their exact gradients and heterogeneity statistics.

Piecewise quadratics are stored in the normal form

    F(x) = (1/2) * a(x) * x^2 + b * x,   a(x) = curv_neg if x < 0 else curv_pos,

so an objective written as ``c * x^2`` carries curvature ``a = 2c``.  At
x = 0 the x >= 0 branch applies, keeping the gradient map single-valued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

__all__ = [
    "QuadraticClient",
    "LogisticClient",
    "MultiDimClient",
    "MultiDimInstance",
    "SmoothnessProfile",
    "HeterogeneityProfile",
    "ClientObjective",
    "eval_value",
    "eval_gradient",
    "sample_stochastic_gradient",
    "build_quadratic_group",
    "build_hard_instance",
    "heterogeneity_stats",
    "smoothness_stats",
    "global_value",
    "global_gradient",
]

# Initialization scale constants of the two-slope adversarial rows: the mean
# iterate of a run started at init_scale * sigma / (lam1 * sqrt(N) * R) (noise
# row) or init_scale * zeta / (lam1 * sqrt(M) * R) (heterogeneity row) never
# drops below its start in the corresponding learning-rate window.
TWO_SLOPE_INIT_SCALE_NOISE = 1.0 / 8160800.0
TWO_SLOPE_INIT_SCALE_HET = 1.0 / 81608000.0

# Curvature ratio between the two slopes of the adversarial rows.
TWO_SLOPE_RATIO = 1010.0


class ObjectiveError(ValueError):
    """Contract violation on an objective operation."""


@dataclass(frozen=True)
class QuadraticClient:
    """One-dimensional convex piecewise quadratic with optional sign noise.

    Value (1/2)*a(x)*x^2 + b*x; gradient a(x)*x + b.  A stochastic sample's
    gradient is a(x)*x + b + noise_sigma*tau with tau drawn uniformly from
    {+1, -1}, so its expectation equals the deterministic gradient.
    """

    curv_neg: float
    curv_pos: float
    linear: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.curv_neg < 0 or self.curv_pos < 0:
            raise ObjectiveError("curvatures must be nonnegative (convex client)")
        if self.noise_sigma < 0:
            raise ObjectiveError("noise_sigma must be nonnegative")

    def curvature(self, x: float) -> float:
        return self.curv_neg if x < 0 else self.curv_pos

    def value(self, x: float) -> float:
        x = _as_scalar(x)
        return 0.5 * self.curvature(x) * x * x + self.linear * x

    def gradient(self, x: float) -> float:
        x = _as_scalar(x)
        return self.curvature(x) * x + self.linear

    def stochastic_gradient(self, x: float, rng: np.random.Generator | None) -> float:
        g = self.gradient(x)
        if self.noise_sigma == 0.0:
            return g
        if rng is None:
            raise ObjectiveError("noisy client requires an rng stream")
        tau = 1.0 if rng.integers(0, 2) == 1 else -1.0
        return g + self.noise_sigma * tau

    @property
    def needs_rng(self) -> bool:
        return self.noise_sigma != 0.0

    @property
    def dim(self) -> int:
        return 1


@dataclass(frozen=True)
class LogisticClient:
    """Binary logistic loss over one client shard, with L2 regularization.

    Value is the shard average of -(b*log h(a.x) + (1-b)*log(1-h(a.x)))
    plus (reg/2)*||x||^2, h being the sigmoid.  Mini-batch gradients average
    ``batch`` samples drawn with replacement; with replace=False and batch
    covering the shard the full shard gradient is returned exactly.
    """

    features: np.ndarray  # (n, dim) dense shard matrix
    labels: np.ndarray  # (n,) in {0, 1}
    reg: float = 0.0
    batch: Optional[int] = None  # None -> full shard
    replace: bool = True

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ObjectiveError("features must be a (n, dim) matrix")
        if len(self.labels) != self.features.shape[0]:
            raise ObjectiveError("labels/features length mismatch")
        if self.features.shape[0] == 0:
            raise ObjectiveError("empty shard")
        if self.reg < 0:
            raise ObjectiveError("reg must be nonnegative")
        if self.batch is not None and self.batch < 1:
            raise ObjectiveError("batch must be positive")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def needs_rng(self) -> bool:
        return not (self.batch is None or (not self.replace and self.batch >= len(self.labels)))

    def value(self, x: np.ndarray) -> float:
        x = _as_vector(x, self.dim)
        z = self.features @ x
        # -log h(z) = log(1+e^{-z}) and -log(1-h(z)) = log(1+e^{z}), stably:
        loss = np.logaddexp(0.0, np.where(self.labels == 1, -z, z))
        return float(np.mean(loss) + 0.5 * self.reg * np.dot(x, x))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = _as_vector(x, self.dim)
        return self._gradient_on(x, self.features, self.labels)

    def _gradient_on(self, x, feats, labels) -> np.ndarray:
        z = feats @ x
        h = 1.0 / (1.0 + np.exp(-z))
        return feats.T @ (h - labels) / len(labels) + self.reg * x

    def stochastic_gradient(self, x: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
        x = _as_vector(x, self.dim)
        n = len(self.labels)
        if not self.needs_rng:
            return self._gradient_on(x, self.features, self.labels)
        if rng is None:
            raise ObjectiveError("mini-batch client requires an rng stream")
        idx = rng.integers(0, n, size=self.batch)
        return self._gradient_on(x, self.features[idx], self.labels[idx])


@dataclass(frozen=True)
class MultiDimClient:
    """A d-dimensional client whose coordinates evolve independently.

    Value is the sum of the per-dimension values; gradient and stochastic
    gradient apply coordinate-wise (one independent noise draw per noisy
    coordinate per call).
    """

    parts: tuple[QuadraticClient, ...]

    @property
    def dim(self) -> int:
        return len(self.parts)

    @property
    def needs_rng(self) -> bool:
        return any(p.needs_rng for p in self.parts)

    def value(self, x: np.ndarray) -> float:
        x = _as_vector(x, self.dim)
        return float(sum(p.value(x[i]) for i, p in enumerate(self.parts)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = _as_vector(x, self.dim)
        return np.array([p.gradient(x[i]) for i, p in enumerate(self.parts)])

    def stochastic_gradient(self, x: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
        x = _as_vector(x, self.dim)
        return np.array([p.stochastic_gradient(x[i], rng) for i, p in enumerate(self.parts)])


@dataclass(frozen=True)
class MultiDimInstance:
    """M clients over d independent dimensions plus an initialization point.

    ``per_dim[d]`` lists the M one-dimensional clients of dimension d; every
    dimension must name the same number of clients.  The global objective is
    the sum over dimensions of the per-dimension client mean.
    """

    per_dim: tuple[tuple[QuadraticClient, ...], ...]
    init: np.ndarray

    def __post_init__(self):
        ms = {len(dim_clients) for dim_clients in self.per_dim}
        if len(ms) != 1:
            raise ObjectiveError("all dimensions must have the same number of clients")
        if len(self.init) != len(self.per_dim):
            raise ObjectiveError("init length must equal the number of dimensions")

    @property
    def dims(self) -> int:
        return len(self.per_dim)

    @property
    def num_clients(self) -> int:
        return len(self.per_dim[0])

    @property
    def clients(self) -> list[MultiDimClient]:
        return [
            MultiDimClient(tuple(self.per_dim[d][m] for d in range(self.dims)))
            for m in range(self.num_clients)
        ]

    def value(self, x: np.ndarray) -> float:
        return global_value(self.clients, x)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return global_gradient(self.clients, x)


ClientObjective = Union[QuadraticClient, LogisticClient, MultiDimClient]


@dataclass(frozen=True)
class SmoothnessProfile:
    """Smoothness constant L, strong convexity mu, condition number L/mu."""

    L: float
    mu: float
    kappa: Optional[float] = None


@dataclass(frozen=True)
class HeterogeneityProfile:
    """Disagreement statistics of a client family.

    ``zeta_star`` is sqrt((1/M) * sum_m ||grad F_m(x*)||^2).  ``zeta`` and
    ``beta`` bound the mean squared gradient disagreement everywhere;
    ``zeta_hat`` is the worst-case single-client disagreement.  ``delta``
    bounds the per-client Hessian deviation and ``hessian_lip`` the
    curvature jump of the global objective across x = 0.  Fields with no
    closed form on the given family are None.
    """

    sigma: Optional[float] = None
    sigma_star: Optional[float] = None
    zeta_star: Optional[float] = None
    zeta: Optional[float] = None
    beta: Optional[float] = None
    zeta_hat: Optional[float] = None
    delta: Optional[float] = None
    hessian_lip: Optional[float] = None


# ---------------------------------------------------------------------------
# dispatching operations


def _as_scalar(x) -> float:
    if isinstance(x, float):
        return x
    if np.ndim(x) == 0:
        return float(x)
    arr = np.asarray(x, dtype=float)
    if arr.shape == (1,):
        return float(arr[0])
    raise ObjectiveError(f"expected a scalar point, got shape {np.shape(x)}")


def _as_vector(x, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (dim,):
        raise ObjectiveError(f"expected a point of dimension {dim}, got shape {arr.shape}")
    return arr


def eval_value(obj, x) -> float:
    """Exact objective value of a client or multi-dim instance at x."""
    return obj.value(x)


def eval_gradient(obj, x):
    """Exact (full) gradient of a client or multi-dim instance at x."""
    return obj.gradient(x)


def sample_stochastic_gradient(obj, x, rng: np.random.Generator | None):
    """One stochastic gradient draw; expectation equals eval_gradient."""
    return obj.stochastic_gradient(x, rng)


def global_value(clients: Sequence, x) -> float:
    """Mean client value: the global objective."""
    return float(sum(eval_value(c, x) for c in clients)) / len(clients)


def global_gradient(clients: Sequence, x):
    """Mean client gradient: the global objective's gradient."""
    grads = [eval_gradient(c, x) for c in clients]
    if np.ndim(grads[0]) == 0:
        return float(sum(grads)) / len(clients)
    return np.mean(np.asarray(grads), axis=0)


# ---------------------------------------------------------------------------
# benchmark families


# Ten two-client piecewise-quadratic groups, as (curv_neg, curv_pos, linear)
# triples.  Groups 1-5 use linear terms +-1, groups 6-10 the same curvatures
# with +-10 (raising the optimum-gradient disagreement tenfold).
_GROUP_CURVATURES = {
    1: ((1.0, 1.0), (1.0, 1.0)),
    2: ((1.5, 1.5), (0.5, 0.5)),
    3: ((2.0, 2.0), (0.0, 0.0)),
    4: ((1.5, 1.0), (1.5, 1.0)),
    5: ((2.0, 1.0), (2.0, 1.0)),
}


def build_quadratic_group(group_id: int) -> list[QuadraticClient]:
    """Two-client benchmark group ``group_id`` in 1..10 (deterministic)."""
    if group_id not in range(1, 11):
        raise ObjectiveError(f"group id must be in 1..10, got {group_id}")
    base = (group_id - 1) % 5 + 1
    b = 1.0 if group_id <= 5 else 10.0
    (a1n, a1p), (a2n, a2p) = _GROUP_CURVATURES[base]
    return [
        QuadraticClient(a1n, a1p, +b),
        QuadraticClient(a2n, a2p, -b),
    ]


def _require(params: dict, names: Sequence[str], regime: str) -> list[float]:
    missing = [n for n in names if params.get(n) is None]
    if missing:
        raise ObjectiveError(f"regime '{regime}' requires parameters {missing}")
    return [float(params[n]) for n in names]


def _noise_dim(regime: str, params: dict, M: int, K: int, R: int) -> tuple[list[QuadraticClient], float]:
    """One dimension of the stochasticity construction: M identical clients."""
    N = M * K
    if regime == "tiny-lr":
        lam, sigma = _require(params, ["lam", "sigma"], regime)
        client = QuadraticClient(2 * lam, 2 * lam, 0.0, 0.0)
        init = sigma / lam
    elif regime == "two-slope":
        lam0, lam1, sigma = _require(params, ["lam0", "lam1", "sigma"], regime)
        lam = lam0 / TWO_SLOPE_RATIO
        client = QuadraticClient(lam0, lam, 0.0, sigma)
        init = TWO_SLOPE_INIT_SCALE_NOISE * sigma / (lam1 * math.sqrt(N) * R)
    elif regime == "mid-lr":
        lam, sigma = _require(params, ["lam", "sigma"], regime)
        client = QuadraticClient(lam, lam, 0.0, sigma)
        init = 0.0
    elif regime == "huge-lr":
        lam, sigma = _require(params, ["lam", "sigma"], regime)
        client = QuadraticClient(2 * lam, 2 * lam, 0.0, 0.0)
        init = sigma / lam
    else:
        raise ObjectiveError(f"unknown stochastic regime '{regime}'")
    return [client] * M, init


def _het_dim(regime: str, params: dict, M: int, R: int) -> tuple[list[QuadraticClient], float]:
    """One dimension of the heterogeneity construction: +-zeta split clients."""
    if regime in ("two-slope", "mid-lr", "large-lr") and M % 2 != 0:
        raise ObjectiveError(f"regime '{regime}' splits clients in half: M must be even, got {M}")
    if regime == "tiny-lr":
        lam, zeta = _require(params, ["lam", "zeta"], regime)
        return [QuadraticClient(2 * lam, 2 * lam, 0.0)] * M, zeta / lam
    if regime == "two-slope":
        lam0, lam1, zeta = _require(params, ["lam0", "lam1", "zeta"], regime)
        lam = lam0 / TWO_SLOPE_RATIO
        clients = [
            QuadraticClient(lam0, lam, +zeta if m < M // 2 else -zeta) for m in range(M)
        ]
        return clients, TWO_SLOPE_INIT_SCALE_HET * zeta / (lam1 * math.sqrt(M) * R)
    if regime in ("mid-lr", "large-lr"):
        lam, zeta = _require(params, ["lam", "zeta"], regime)
        clients = [QuadraticClient(lam, lam, +zeta if m < M // 2 else -zeta) for m in range(M)]
        return clients, 0.0
    if regime == "huge-lr":
        lam, zeta = _require(params, ["lam", "zeta"], regime)
        return [QuadraticClient(2 * lam, 2 * lam, 0.0)] * M, zeta / lam
    raise ObjectiveError(f"unknown heterogeneity regime '{regime}'")


def build_hard_instance(kind: str, regime: str = "", params: dict | None = None) -> MultiDimInstance:
    """Adversarial instance certifying a convergence floor.

    kind="stochastic": one dimension of M identical (optionally noisy)
    clients, from the named learning-rate regime (tiny-lr, two-slope,
    mid-lr, huge-lr).  kind="heterogeneity": one dimension of clients split
    +-zeta (tiny-lr, two-slope, mid-lr, large-lr, huge-lr).
    kind="composite-sc": the 9-dimensional strongly convex stack covering
    every regime of both families at once, with curvature mu on the slow
    dimensions and 1010*mu on the fast ones.

    params supplies lam / lam0 / lam1 / sigma / zeta / mu plus M, K, R.
    """
    params = dict(params or {})
    M = int(params.get("M", 0))
    K = int(params.get("K", 1))
    R = int(params.get("R", 1))
    if M < 1 or K < 1 or R < 1:
        raise ObjectiveError("params must include M >= 1, K >= 1, R >= 1")

    if kind == "stochastic":
        clients, init = _noise_dim(regime, params, M, K, R)
        return MultiDimInstance((tuple(clients),), np.array([init]))
    if kind == "heterogeneity":
        clients, init = _het_dim(regime, params, M, R)
        return MultiDimInstance((tuple(clients),), np.array([init]))
    if kind == "composite-sc":
        mu, sigma, zeta = _require(params, ["mu", "sigma", "zeta"], kind)
        if M < 4 or M % 2 != 0:
            raise ObjectiveError("composite instance requires even M >= 4")
        fast = TWO_SLOPE_RATIO * mu
        noise_rows = [
            ("tiny-lr", {"lam": mu, "sigma": sigma}),
            ("two-slope", {"lam0": fast, "lam1": mu, "sigma": sigma}),
            ("mid-lr", {"lam": fast, "sigma": sigma}),
            ("huge-lr", {"lam": fast, "sigma": sigma}),
        ]
        het_rows = [
            ("tiny-lr", {"lam": mu, "zeta": zeta}),
            ("two-slope", {"lam0": fast, "lam1": mu, "zeta": zeta}),
            ("mid-lr", {"lam": fast, "zeta": zeta}),
            ("large-lr", {"lam": fast, "zeta": zeta}),
            ("huge-lr", {"lam": fast, "zeta": zeta}),
        ]
        dims: list[tuple[QuadraticClient, ...]] = []
        init: list[float] = []
        for reg_name, p in noise_rows:
            clients, x0 = _noise_dim(reg_name, p, M, K, R)
            dims.append(tuple(clients))
            # The slow-contraction dimensions keep the full sigma/mu (resp.
            # zeta/mu) displacement regardless of the row's own curvature.
            init.append(sigma / mu if reg_name in ("tiny-lr", "huge-lr") else x0)
        for reg_name, p in het_rows:
            clients, x0 = _het_dim(reg_name, p, M, R)
            dims.append(tuple(clients))
            init.append(zeta / mu if reg_name in ("tiny-lr", "huge-lr") else x0)
        return MultiDimInstance(tuple(dims), np.array(init))
    raise ObjectiveError(f"unknown hard-instance kind '{kind}'")


# ---------------------------------------------------------------------------
# family statistics


def _quadratic_parts(clients: Sequence) -> Optional[list[list[QuadraticClient]]]:
    """Per-client per-dimension quadratic pieces, or None if not quadratic."""
    parts: list[list[QuadraticClient]] = []
    for c in clients:
        if isinstance(c, QuadraticClient):
            parts.append([c])
        elif isinstance(c, MultiDimClient):
            parts.append(list(c.parts))
        else:
            return None
    if len({len(p) for p in parts}) != 1:
        return None
    return parts


def smoothness_stats(clients: Sequence | MultiDimInstance) -> SmoothnessProfile:
    """Exact L and mu of a piecewise-quadratic client family.

    L is the largest branch curvature over clients and dimensions; mu the
    smallest.  kappa = L/mu is present only when mu > 0.
    """
    if isinstance(clients, MultiDimInstance):
        clients = clients.clients
    parts = _quadratic_parts(clients)
    if parts is None:
        raise ObjectiveError("smoothness_stats requires piecewise-quadratic clients")
    curvs = [a for row in parts for p in row for a in (p.curv_neg, p.curv_pos)]
    L, mu = max(curvs), min(curvs)
    return SmoothnessProfile(L=L, mu=mu, kappa=(L / mu if mu > 0 else None))


def heterogeneity_stats(clients: Sequence | MultiDimInstance, x_star) -> HeterogeneityProfile:
    """Closed-form disagreement statistics of a client family at its optimum.

    Verifies that x_star is a global minimizer (||grad F(x_star)|| <= 1e-9)
    before computing anything.  zeta/beta/zeta_hat have a closed form only
    when all clients share the curvature profile within each dimension
    (then beta = 0); Hessian statistics only for quadratic families.
    """
    if isinstance(clients, MultiDimInstance):
        clients = clients.clients
    clients = list(clients)
    M = len(clients)
    g_star = global_gradient(clients, x_star)
    residual = abs(g_star) if np.ndim(g_star) == 0 else float(np.linalg.norm(g_star))
    if residual > 1e-9:
        raise ObjectiveError(
            f"x_star is not a minimizer: ||grad F(x_star)|| = {residual:.3e} > 1e-9"
        )

    zeta_star_sq = 0.0
    for c in clients:
        g = eval_gradient(c, x_star)
        zeta_star_sq += float(np.dot(np.atleast_1d(g), np.atleast_1d(g)))
    zeta_star = math.sqrt(zeta_star_sq / M)

    parts = _quadratic_parts(clients)
    if parts is None:
        return _logistic_hetero(clients, x_star, zeta_star)

    dims = len(parts[0])
    # Hessian deviation: per dimension and branch, max client distance from
    # the branch-mean curvature; Hessian jump: branch-mean gap across 0.
    delta = 0.0
    hessian_lip = 0.0
    for d in range(dims):
        for branch in ("curv_neg", "curv_pos"):
            vals = [getattr(parts[m][d], branch) for m in range(M)]
            mean = sum(vals) / M
            delta = max(delta, max(abs(v - mean) for v in vals))
        mean_neg = sum(parts[m][d].curv_neg for m in range(M)) / M
        mean_pos = sum(parts[m][d].curv_pos for m in range(M)) / M
        hessian_lip = max(hessian_lip, abs(mean_pos - mean_neg))

    # Everywhere-valid disagreement bound: available exactly (with beta = 0)
    # iff the clients of every dimension share both branch curvatures, making
    # grad F_m - grad F a constant vector of linear-term offsets.
    shared_curvature = all(
        len({(parts[m][d].curv_neg, parts[m][d].curv_pos) for m in range(M)}) == 1
        for d in range(dims)
    )
    zeta = beta = zeta_hat = None
    if shared_curvature:
        offsets = np.array(
            [[parts[m][d].linear for d in range(dims)] for m in range(M)]
        )
        offsets -= offsets.mean(axis=0)
        per_client_sq = (offsets**2).sum(axis=1)
        zeta = math.sqrt(float(per_client_sq.mean()))
        beta = 0.0
        zeta_hat = math.sqrt(float(per_client_sq.max()))

    sigma_sq = max(sum(p.noise_sigma**2 for p in parts[m]) for m in range(M))
    sigma = math.sqrt(sigma_sq)
    return HeterogeneityProfile(
        sigma=sigma,
        sigma_star=sigma,
        zeta_star=zeta_star,
        zeta=zeta,
        beta=beta,
        zeta_hat=zeta_hat,
        delta=delta,
        hessian_lip=hessian_lip,
    )


def _logistic_hetero(clients, x_star, zeta_star: float) -> HeterogeneityProfile:
    """Finite-shard statistics: only zeta_star and the in-shard sample
    variance at the optimum have an exact form."""
    sigma_star_sq = 0.0
    for c in clients:
        if not isinstance(c, LogisticClient):
            return HeterogeneityProfile(zeta_star=zeta_star)
        x = _as_vector(x_star, c.dim)
        full = c.gradient(x)
        dev_sq = 0.0
        for i in range(len(c.labels)):
            gi = c._gradient_on(x, c.features[i : i + 1], c.labels[i : i + 1])
            dev_sq += float(np.dot(gi - full, gi - full))
        sigma_star_sq = max(sigma_star_sq, dev_sq / len(c.labels))
    return HeterogeneityProfile(sigma_star=math.sqrt(sigma_star_sq), zeta_star=zeta_star)
