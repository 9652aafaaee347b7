"""Exact combinatorial oracles for the shuffling-noise machinery.

Covers the absolute partial sums of i.i.d. signs, the partial sums
A_{m,k} = tau_1 + ... + tau_{m-1} + (k/K) * tau_m of a balanced random
sign permutation (expectation and sign probabilities, enumerated exactly
over all balanced arrangements), the monotone mixing profile T(d) of the
per-round contraction, and the second-moment recursion of the +-zeta
mid-learning-rate instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

__all__ = [
    "PermStats",
    "RecursionInput",
    "exact_abs_partial_sum_iid",
    "exact_perm_stats",
    "t_function",
    "second_moment_recursion",
]

MAX_IID_N = 24
MAX_PERM_M = 12


@dataclass(frozen=True)
class PermStats:
    """Exact statistics of A_{m,k} over balanced sign permutations."""

    M: int
    K: int
    m: int
    k: int
    a_k: float
    exp_abs: float
    prob_pos: float
    prob_zero: float
    prob_neg: float


@dataclass(frozen=True)
class RecursionInput:
    """Parameters of the squared-iterate recursion; requires 0 < lam*eta < 1
    and even M."""

    lam: float
    eta: float
    M: int
    K: int
    zeta: float
    x0_sq: float
    R: int

    def __post_init__(self):
        d = self.lam * self.eta
        if not 0.0 < d < 1.0:
            raise ValueError(f"recursion needs 0 < lam*eta < 1, got {d}")
        if self.M < 2 or self.M % 2 != 0:
            raise ValueError("M must be an even integer >= 2")
        if self.K < 1 or self.R < 1:
            raise ValueError("K and R must be >= 1")
        if self.x0_sq < 0:
            raise ValueError("x0_sq must be >= 0")

    @property
    def d(self) -> float:
        return self.lam * self.eta

    @property
    def t(self) -> float:
        return 1.0 - (1.0 - self.d) ** self.K


def exact_abs_partial_sum_iid(n: int) -> float:
    """E|tau_1 + ... + tau_n| for i.i.d. uniform +-1 signs, exactly.

    Enumerates the binomial distribution of the sign count; n is capped at
    24 to keep the computation exact and instant.
    """
    if not 0 <= n <= MAX_IID_N:
        raise ValueError(f"exact evaluation supports 0 <= n <= {MAX_IID_N}, got {n}")
    total = Fraction(0)
    for j in range(n + 1):  # j positive signs -> sum = 2j - n
        total += Fraction(math.comb(n, j), 2**n) * abs(2 * j - n)
    return float(total)


def exact_perm_stats(M: int, K: int, m: int, k: int) -> PermStats:
    """Exact E|A_{m,k}| and sign probabilities of A_{m,k} by enumerating all
    C(M, M/2) balanced arrangements of M/2 +1's and M/2 -1's.

    Valid for 1 <= m <= M+1 (m = M+1 only with k = 0, where the full sum is
    identically zero) and 0 <= k <= K-1.
    """
    if M % 2 != 0 or M < 2:
        raise ValueError("M must be an even integer >= 2")
    if M > MAX_PERM_M:
        raise ValueError(f"exhaustive enumeration supports M <= {MAX_PERM_M}, got {M}")
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 0 <= k <= K - 1:
        raise ValueError(f"k must satisfy 0 <= k <= K-1 = {K - 1}, got {k}")
    if not 1 <= m <= M + 1:
        raise ValueError(f"m must be in 1..{M + 1}, got {m}")
    if m == M + 1 and k != 0:
        raise ValueError("m = M+1 is only defined with k = 0")

    a_k = Fraction(k, K)
    total = math.comb(M, M // 2)
    exp_abs = Fraction(0)
    pos = zero = neg = 0
    for plus_positions in combinations(range(M), M // 2):
        plus = set(plus_positions)
        head = sum(1 if i in plus else -1 for i in range(m - 1))
        if m <= M:
            a = head + a_k * (1 if (m - 1) in plus else -1)
        else:
            a = Fraction(head)  # full balanced sum: always zero
        exp_abs += abs(a)
        if a > 0:
            pos += 1
        elif a < 0:
            neg += 1
        else:
            zero += 1
    return PermStats(
        M=M,
        K=K,
        m=m,
        k=k,
        a_k=float(a_k),
        exp_abs=float(exp_abs / total),
        prob_pos=float(Fraction(pos, total)),
        prob_zero=float(Fraction(zero, total)),
        prob_neg=float(Fraction(neg, total)),
    )


def t_function(d: float, M: int, K: int) -> float:
    """Mixing profile of one sequential round at contraction factor 1-d:

        T(d) = 1 + (1-d)^(M*K)
               - (1/M) * (1 + (1-d)^K) / (1 - (1-d)^K) * (1 - (1-d)^(M*K)),

    strictly increasing on 0 < d < 1 for M >= 2, K >= 1.
    """
    if not 0.0 < d < 1.0:
        raise ValueError(f"t_function needs 0 < d < 1, got {d}")
    if M < 2 or K < 1:
        raise ValueError("need M >= 2 and K >= 1")
    q = (1.0 - d) ** K
    qM = (1.0 - d) ** (M * K)
    return 1.0 + qM - (1.0 / M) * (1.0 + q) / (1.0 - q) * (1.0 - qM)


def second_moment_recursion(inp: RecursionInput) -> float:
    """E[(x^(R))^2] for sequential rounds on the +-zeta equal-curvature
    instance, iterating

        E[(x^(r))^2] = (1-d)^(2MK) * E[(x^(r-1))^2]
                       + eta^2 zeta^2 * M/(M-1) * (1/d^2)
                         * (1-(1-d)^K)/(1+(1-d)^K) * (1-(1-d)^(MK)) * T(d)

    from x0_sq, with d = lam*eta.
    """
    d = inp.d
    q = (1.0 - d) ** inp.K
    qM = (1.0 - d) ** (inp.M * inp.K)
    noise = (
        inp.eta**2
        * inp.zeta**2
        * (inp.M / (inp.M - 1))
        * (1.0 / d**2)
        * ((1.0 - q) / (1.0 + q))
        * (1.0 - qM)
        * t_function(d, inp.M, inp.K)
    )
    contraction = qM**2
    second_moment = inp.x0_sq
    for _ in range(inp.R):
        second_moment = contraction * second_moment + noise
    return second_moment
