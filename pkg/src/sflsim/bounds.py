"""Closed-form convergence-rate evaluators for sequential (SFL) and
parallel (PFL) federated training.

Two constant conventions coexist and every result records which one it
uses: ``exact-paper`` keeps the displayed numerical constants of the
non-asymptotic upper bound (9/2, 12, 18, ...); ``unit-constant`` evaluates
every order-notation rate with proportionality constants set to one and
polylogarithmic factors suppressed.  Unit-constant results preserve all
parameter scalings, which is what the comparison and crossover checks
exercise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

__all__ = [
    "BoundParams",
    "BoundResult",
    "BoundPreconditionError",
    "sfl_upper_bound",
    "tuned_rate_sfl",
    "pfl_upper_bound",
    "sfl_lower_bound",
    "partial_participation_bound",
    "two_lr_bound",
]

KAPPA_GAP_NOTE = "matches the tuned upper bound only up to a factor of kappa"
POLYLOG_NOTE = "polylogarithmic factors suppressed"


class BoundPreconditionError(ValueError):
    """A rate was requested outside its validity conditions."""


@dataclass(frozen=True)
class BoundParams:
    """Everything a rate formula can consume.

    D = ||x^(0) - x*|| (convex cases), A = F(x^(0)) - F* (non-convex case);
    eff_lr is the effective learning rate (eta*M*K sequential, eta*K
    parallel); gamma the server learning rate.
    """

    mu: float = 0.0
    L: float = 1.0
    sigma: float = 0.0
    zeta_star: float = 0.0
    zeta: float = 0.0
    beta: float = 0.0
    zeta_hat: float = 0.0
    D: float = 0.0
    A: float = 0.0
    M: int = 1
    K: int = 1
    R: int = 1
    S: Optional[int] = None
    eff_lr: Optional[float] = None
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("mu", "L", "sigma", "zeta_star", "zeta", "beta", "zeta_hat", "D", "A"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("M", "K", "R"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.S is not None and not 1 <= self.S <= self.M:
            raise ValueError(f"S must be in 1..{self.M}")

    @property
    def kappa(self) -> float:
        if self.mu <= 0:
            raise BoundPreconditionError("kappa requires mu > 0")
        return self.L / self.mu


@dataclass(frozen=True)
class BoundResult:
    total: float
    terms: dict[str, float]
    formula_id: str
    constants_mode: str
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for name, value in self.terms.items():
            if value < 0:
                raise ValueError(f"term {name} is negative: {value}")
        if not math.isclose(self.total, sum(self.terms.values()), rel_tol=1e-12, abs_tol=0.0):
            raise ValueError("total must equal the sum of the terms")


def _result(formula_id: str, mode: str, notes=(), **terms: float) -> BoundResult:
    terms = {k: float(v) for k, v in terms.items() if v is not None}
    return BoundResult(
        total=sum(terms.values()),
        terms=terms,
        formula_id=formula_id,
        constants_mode=mode,
        notes=tuple(notes),
    )


_TERM_KEYS = {
    "optimization": "optimization",
    "stoch1": "stochasticity-1",
    "stoch2": "stochasticity-2",
    "het": "heterogeneity",
    "part": "participation",
}


def _named(**terms):
    return {_TERM_KEYS[k]: v for k, v in terms.items()}


def sfl_upper_bound(case: str, p: BoundParams) -> BoundResult:
    """Non-asymptotic sequential upper bound at an explicit effective
    learning rate, with exact displayed constants.

    strongly-convex (needs eff_lr <= 1/(6L) and R >= 6*kappa):
        (9/2) mu D^2 exp(-mu*eff_lr*R/2) + 12 eff_lr sigma^2/(MK)
        + 18 L eff_lr^2 sigma^2/(MK) + 18 L eff_lr^2 zeta_star^2/M
    convex: the same error terms under 3 D^2/(eff_lr R).
    non-convex (needs eff_lr <= 1/(6L(1+beta^2/M))):
        10 A/(eff_lr R) + 20 L eff_lr sigma^2/(MK)
        + (75/4) L^2 eff_lr^2 sigma^2/(MK) + (75/4) L^2 eff_lr^2 zeta^2/M
    """
    if p.eff_lr is None:
        raise BoundPreconditionError("sfl_upper_bound requires eff_lr")
    lr = p.eff_lr
    M, K, R, L = p.M, p.K, p.R, p.L
    if case in ("strongly-convex", "convex"):
        if lr > 1.0 / (6.0 * L):
            raise BoundPreconditionError("requires eff_lr <= 1/(6L)")
    elif case == "non-convex":
        cap = 1.0 / (6.0 * L * (1.0 + p.beta**2 / M))
        if lr > cap:
            raise BoundPreconditionError("requires eff_lr <= 1/(6L(1+beta^2/M))")
    else:
        raise ValueError(f"unknown case '{case}'")

    if case == "strongly-convex":
        if p.mu <= 0:
            raise BoundPreconditionError("strongly-convex case requires mu > 0")
        if R < 6 * p.kappa:
            raise BoundPreconditionError("requires R >= 6*kappa")
        terms = _named(
            optimization=4.5 * p.mu * p.D**2 * math.exp(-p.mu * lr * R / 2.0),
            stoch1=12.0 * lr * p.sigma**2 / (M * K),
            stoch2=18.0 * L * lr**2 * p.sigma**2 / (M * K),
            het=18.0 * L * lr**2 * p.zeta_star**2 / M,
        )
    elif case == "convex":
        terms = _named(
            optimization=3.0 * p.D**2 / (lr * R),
            stoch1=12.0 * lr * p.sigma**2 / (M * K),
            stoch2=18.0 * L * lr**2 * p.sigma**2 / (M * K),
            het=18.0 * L * lr**2 * p.zeta_star**2 / M,
        )
    else:
        terms = _named(
            optimization=10.0 * p.A / (lr * R),
            stoch1=20.0 * L * lr * p.sigma**2 / (M * K),
            stoch2=75.0 / 4.0 * L**2 * lr**2 * p.sigma**2 / (M * K),
            het=75.0 / 4.0 * L**2 * lr**2 * p.zeta**2 / M,
        )
    return _result(f"sfl-upper-{case}", "exact-paper", **terms)


def _sfl_tuned_terms(case: str, p: BoundParams, gamma: float = 1.0) -> dict[str, float]:
    M, K, R, L = p.M, p.K, p.R, p.L
    g23 = gamma ** (2.0 / 3.0)
    if case == "strongly-convex":
        mu = p.mu
        return _named(
            stoch1=p.sigma**2 / (mu * M * K * R),
            stoch2=L * p.sigma**2 / (mu**2 * M * K * R**2),
            het=L * p.zeta_star**2 / (mu**2 * M * R**2),
            optimization=mu * p.D**2 * math.exp(-mu * R / L),
        )
    if case == "convex":
        return _named(
            stoch1=p.sigma * p.D / math.sqrt(M * K * R),
            stoch2=(L * p.sigma**2 * p.D**4) ** (1.0 / 3.0) / ((M * K) ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L * p.zeta_star**2 * p.D**4) ** (1.0 / 3.0) / (M ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            optimization=L * p.D**2 / R,
        )
    if case == "non-convex":
        return _named(
            stoch1=math.sqrt(L * p.sigma**2 * p.A) / math.sqrt(M * K * R),
            stoch2=(L**2 * p.sigma**2 * p.A**2) ** (1.0 / 3.0)
            / (g23 * (M * K) ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L**2 * p.zeta**2 * p.A**2) ** (1.0 / 3.0)
            / (g23 * M ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            optimization=L * p.A * (1.0 + p.beta**2 / M) / R,
        )
    raise ValueError(f"unknown case '{case}'")


def tuned_rate_sfl(case: str, p: BoundParams) -> tuple[float, BoundResult]:
    """Efficient effective learning rate and the resulting tuned sequential
    rate, unit constants.

    The learning rate is the minimum of the case's candidate expressions:
      strongly-convex: min{1/L, 1/(mu R)}
      convex:      min{1/L, D/sqrt(c1 R), (D^2/(c2 R^2))^(1/3)}
                   with c1 = sigma^2/(MK), c2 = L sigma^2/(MK) + L zeta_star^2/M
      non-convex:  min{1/(L(1+beta^2/M)), sqrt(A/(c1 R)), (A/(c2 R^2))^(1/3)}
                   with c1 = L sigma^2/(MK), c2 = L^2 sigma^2/(MK) + L^2 zeta^2/M
    Vanishing c1/c2 drop their candidate.
    """
    M, K, R, L = p.M, p.K, p.R, p.L
    if case == "strongly-convex":
        if p.mu <= 0:
            raise BoundPreconditionError("strongly-convex tuning requires mu > 0")
        lr = min(1.0 / L, 1.0 / (p.mu * R))
    elif case == "convex":
        c1 = p.sigma**2 / (M * K)
        c2 = L * p.sigma**2 / (M * K) + L * p.zeta_star**2 / M
        candidates = [1.0 / L]
        if c1 > 0:
            candidates.append(p.D / math.sqrt(c1 * R))
        if c2 > 0:
            candidates.append((p.D**2 / (c2 * R**2)) ** (1.0 / 3.0))
        lr = min(candidates)
    elif case == "non-convex":
        c1 = L * p.sigma**2 / (M * K)
        c2 = L**2 * p.sigma**2 / (M * K) + L**2 * p.zeta**2 / M
        candidates = [1.0 / (L * (1.0 + p.beta**2 / M))]
        if c1 > 0:
            candidates.append(math.sqrt(p.A / (c1 * R)))
        if c2 > 0:
            candidates.append((p.A / (c2 * R**2)) ** (1.0 / 3.0))
        lr = min(candidates)
    else:
        raise ValueError(f"unknown case '{case}'")
    notes = (POLYLOG_NOTE,) if case == "strongly-convex" else ()
    result = _result(f"sfl-tuned-{case}", "unit-constant", notes, **_sfl_tuned_terms(case, p))
    return lr, result


_PFL_ROWS = {
    ("strongly-convex", "opt-heterogeneity"),
    ("strongly-convex", "max-heterogeneity"),
    ("convex", "opt-heterogeneity"),
    ("convex", "max-heterogeneity"),
    ("non-convex", "opt-heterogeneity"),
}


def pfl_upper_bound(case: str, assumption: str, p: BoundParams) -> BoundResult:
    """Tuned parallel upper bound, unit constants.

    Under optimum heterogeneity (zeta_star; zeta for the non-convex case):
      sc: sigma^2/(mu MKR) + L sigma^2/(mu^2 K R^2) + L zeta_star^2/(mu^2 R^2)
          + mu D^2 exp(-mu R/L)
      c:  sigma D/sqrt(MKR) + (L sigma^2 D^4)^(1/3)/(K^(1/3) R^(2/3))
          + (L zeta_star^2 D^4)^(1/3)/R^(2/3) + L D^2/R
      nc: (L sigma^2 A)^(1/2)/sqrt(MKR) + (L^2 sigma^2 A^2)^(1/3)/(K^(1/3) R^(2/3))
          + (L^2 zeta^2 A^2)^(1/3)/R^(2/3) + L A/R

    Under worst-case heterogeneity (zeta_hat) the heterogeneity terms use
    zeta_hat and the optimization terms improve to exp(-mu K R/L) (sc) and
    L D^2/(K R) (convex); no non-convex row exists.
    """
    if (case, assumption) not in _PFL_ROWS:
        raise BoundPreconditionError(f"no rate for case={case!r}, assumption={assumption!r}")
    M, K, R, L = p.M, p.K, p.R, p.L
    if case == "strongly-convex":
        if p.mu <= 0:
            raise BoundPreconditionError("strongly-convex case requires mu > 0")
        mu = p.mu
        het = p.zeta_star if assumption == "opt-heterogeneity" else p.zeta_hat
        exponent = R if assumption == "opt-heterogeneity" else K * R
        terms = _named(
            stoch1=p.sigma**2 / (mu * M * K * R),
            stoch2=L * p.sigma**2 / (mu**2 * K * R**2),
            het=L * het**2 / (mu**2 * R**2),
            optimization=mu * p.D**2 * math.exp(-mu * exponent / L),
        )
    elif case == "convex":
        het = p.zeta_star if assumption == "opt-heterogeneity" else p.zeta_hat
        opt = L * p.D**2 / R if assumption == "opt-heterogeneity" else L * p.D**2 / (K * R)
        terms = _named(
            stoch1=p.sigma * p.D / math.sqrt(M * K * R),
            stoch2=(L * p.sigma**2 * p.D**4) ** (1.0 / 3.0) / (K ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L * het**2 * p.D**4) ** (1.0 / 3.0) / R ** (2.0 / 3.0),
            optimization=opt,
        )
    else:
        terms = _named(
            stoch1=math.sqrt(L * p.sigma**2 * p.A) / math.sqrt(M * K * R),
            stoch2=(L**2 * p.sigma**2 * p.A**2) ** (1.0 / 3.0) / (K ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L**2 * p.zeta**2 * p.A**2) ** (1.0 / 3.0) / R ** (2.0 / 3.0),
            optimization=L * p.A / R,
        )
    notes = (POLYLOG_NOTE,) if case == "strongly-convex" else ()
    return _result(f"pfl-{case}-{assumption}", "unit-constant", notes, **terms)


def sfl_lower_bound(variant: str, p: BoundParams) -> BoundResult:
    """Sequential lower bounds on adversarial instances, unit constants.

    any-lr (any learning rate; M >= 4):
        sigma^2/(mu MKR) + zeta^2/(mu M R^2)
    small-lr-sc (learning rates <= 1/(101 L M K); kappa >= 1010,
    R >= kappa/1010):
        sigma^2/(mu MKR) + L sigma^2/(mu^2 MKR^2) + L zeta^2/(mu^2 M R^2)
    small-lr-gc (R >= 51^3 * max of the active scale ratios):
        sigma D/sqrt(MKR) + (L sigma^2 D^4)^(1/3)/((MK)^(1/3) R^(2/3))
        + (L zeta^2 D^4)^(1/3)/(M^(1/3) R^(2/3))
    """
    M, K, R, L = p.M, p.K, p.R, p.L
    if variant == "any-lr":
        if M < 4:
            raise BoundPreconditionError("requires M >= 4")
        if p.mu <= 0:
            raise BoundPreconditionError("requires mu > 0")
        terms = _named(
            stoch1=p.sigma**2 / (p.mu * M * K * R),
            het=p.zeta**2 / (p.mu * M * R**2),
        )
        return _result("sfl-lower-any-lr", "unit-constant", (KAPPA_GAP_NOTE,), **terms)
    if variant == "small-lr-sc":
        if M < 4:
            raise BoundPreconditionError("requires M >= 4")
        if p.mu <= 0 or p.kappa < 1010:
            raise BoundPreconditionError("requires kappa >= 1010")
        if R < p.kappa / 1010.0:
            raise BoundPreconditionError("requires R >= kappa/1010")
        mu = p.mu
        terms = _named(
            stoch1=p.sigma**2 / (mu * M * K * R),
            stoch2=L * p.sigma**2 / (mu**2 * M * K * R**2),
            het=L * p.zeta**2 / (mu**2 * M * R**2),
        )
        return _result("sfl-lower-small-lr-sc", "unit-constant", **terms)
    if variant == "small-lr-gc":
        if M < 4:
            raise BoundPreconditionError("requires M >= 4")
        ratios = []
        if p.sigma > 0:
            ratios += [
                p.sigma / (L * math.sqrt(M * K) * p.D),
                L**2 * M * K * p.D**2 / p.sigma**2,
            ]
        if p.zeta > 0:
            ratios += [
                p.zeta / (L * math.sqrt(M) * p.D),
                L**2 * M * p.D**2 / p.zeta**2,
            ]
        if ratios and R < 51**3 * max(ratios):
            raise BoundPreconditionError("requires R >= 51^3 * max scale ratio")
        terms = _named(
            stoch1=p.sigma * p.D / math.sqrt(M * K * R),
            stoch2=(L * p.sigma**2 * p.D**4) ** (1.0 / 3.0)
            / ((M * K) ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L * p.zeta**2 * p.D**4) ** (1.0 / 3.0) / (M ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
        )
        return _result("sfl-lower-small-lr-gc", "unit-constant", **terms)
    raise ValueError(f"unknown variant '{variant}'")


def partial_participation_bound(method: str, p: BoundParams) -> BoundResult:
    """Strongly convex rates when S of M clients train per round, unit
    constants.  Both methods pay the sampling term
    zeta_star^2/(mu R) * (M-S)/(S(M-1)); the sequential method keeps its
    1/S advantage on the second-order error terms.
    """
    if method not in ("SFL", "PFL"):
        raise ValueError(f"unknown method '{method}'")
    if p.S is None:
        raise BoundPreconditionError("partial participation requires S")
    if p.mu <= 0:
        raise BoundPreconditionError("requires mu > 0")
    S, M, K, R, L, mu = p.S, p.M, p.K, p.R, p.L, p.mu
    sampling = 0.0
    if S < M:
        sampling = (p.zeta_star**2 / (mu * R)) * (M - S) / (S * (M - 1))
    scale = S if method == "SFL" else 1
    terms = _named(
        stoch1=p.sigma**2 / (mu * S * K * R),
        part=sampling,
        stoch2=L * p.sigma**2 / (mu**2 * scale * K * R**2),
        het=L * p.zeta_star**2 / (mu**2 * scale * R**2),
        optimization=mu * p.D**2 * math.exp(-mu * R / L),
    )
    notes = (POLYLOG_NOTE, "hidden constants of the S < M case are not pinned by theory")
    return _result(f"{method.lower()}-partial-participation", "unit-constant", notes, **terms)


def two_lr_bound(method: str, p: BoundParams) -> BoundResult:
    """Tuned non-convex rates with a server learning rate gamma >= 1 on top
    of the client rate, unit constants.  gamma = 1 coincides termwise with
    the single-rate tuned results.
    """
    if method not in ("SFL", "PFL"):
        raise ValueError(f"unknown method '{method}'")
    if p.gamma < 1.0:
        raise BoundPreconditionError("requires gamma >= 1")
    M, K, R, L = p.M, p.K, p.R, p.L
    g23 = p.gamma ** (2.0 / 3.0)
    if method == "SFL":
        terms = _sfl_tuned_terms("non-convex", p, gamma=p.gamma)
    else:
        terms = _named(
            stoch1=math.sqrt(L * p.sigma**2 * p.A) / math.sqrt(M * K * R),
            stoch2=(L**2 * p.sigma**2 * p.A**2) ** (1.0 / 3.0)
            / (g23 * K ** (1.0 / 3.0) * R ** (2.0 / 3.0)),
            het=(L**2 * p.zeta**2 * p.A**2) ** (1.0 / 3.0) / (g23 * R ** (2.0 / 3.0)),
            optimization=L * p.A * (1.0 + p.beta**2) / R,
        )
    return _result(f"{method.lower()}-two-lr-non-convex", "unit-constant", **terms)
