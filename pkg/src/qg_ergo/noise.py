"""
Covariance of the additive forcing and checks of the ergodicity hypotheses.

The forcing is diagonal in the Dirichlet eigenbasis: mode ``k`` (linear
order, see :mod:`qg_ergo.spectral`) receives an independent Brownian motion
with amplitude ``alpha_k``. Everything below is closed form in the
``alpha_k`` and the eigenvalues ``lambda_k = -nu pi^2 (m^2 + n^2)``.

Asymptotic statements use the lattice bound ``|lambda_k| >= 4 pi nu k``: the
first ``k`` modes all lie in the quarter disc of radius ``sqrt(m_k^2 + n_k^2)``,
which holds at most ``pi (m_k^2 + n_k^2) / 4`` lattice points.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral
from .errors import DomainError

__all__ = [
    "NoiseSpec",
    "SummabilityResult",
    "ImageConditionResult",
    "ConditionReport",
    "abs_eigenvalues",
    "check_summability",
    "trace_Q",
    "trace_Q_tail",
    "hs_integral",
    "hs_tail",
    "hs_integrand",
    "check_image_condition",
    "theorem_conditions",
    "IMAGE_TEST_TIMES",
]

LAWS = ("power", "table", "zero")
IMAGE_TEST_TIMES = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class NoiseSpec:
    """
    Amplitude rule for the forcing modes.

    ``law="power"`` gives ``alpha_k = c k^(-p)``; ``law="table"`` takes
    ``alpha_k`` from ``table`` (zero past its end); ``law="zero"`` switches
    the forcing off. ``gamma`` is the exponent of the summability test.
    """

    law: str
    N: int
    gamma: float = 0.5
    c: float = 1.0
    p: float = 0.5
    table: tuple = ()

    def __post_init__(self):
        if self.law not in LAWS:
            raise DomainError(f"unknown noise law {self.law!r}; expected one of {LAWS}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"truncation N must be a positive integer, got {self.N}")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must satisfy 0 < gamma < 1, got {self.gamma}")
        if self.law == "power" and self.c < 0:
            raise DomainError(f"power-law prefactor c must be >= 0, got {self.c}")
        if self.law == "table":
            object.__setattr__(self, "table", tuple(float(a) for a in self.table))
            if len(self.table) > self.N * self.N:
                raise DomainError(
                    f"amplitude table has {len(self.table)} entries, truncation holds {self.N ** 2}"
                )
            if any(not np.isfinite(a) or a < 0 for a in self.table):
                raise DomainError("amplitude table entries must be finite and >= 0")

    @classmethod
    def power(cls, N, c=1.0, p=0.5, gamma=0.5):
        return cls("power", N, gamma=gamma, c=c, p=p)

    @classmethod
    def from_table(cls, N, table, gamma=0.5):
        return cls("table", N, gamma=gamma, table=tuple(table))

    @classmethod
    def zero(cls, N, gamma=0.5):
        return cls("zero", N, gamma=gamma)

    @property
    def K(self):
        return self.N * self.N

    @property
    def is_zero(self):
        """No mode is forced: the dynamics is deterministic."""
        return not np.any(self.alphas())

    def alphas(self):
        """Amplitudes ``alpha_1..alpha_K`` in linear-index order."""
        if self.law == "zero":
            return np.zeros(self.K)
        if self.law == "table":
            out = np.zeros(self.K)
            out[: len(self.table)] = self.table
            return out
        k = np.arange(1, self.K + 1, dtype=float)
        return self.c * k ** (-self.p)

    def alpha_grid(self):
        """Amplitudes laid out on the ``(N, N)`` coefficient table."""
        return self.alphas()[spectral.linear_index(self.N) - 1]

    def scaled(self, factor):
        """The same rule with every amplitude multiplied by ``factor``."""
        if self.law == "zero":
            return self
        if self.law == "table":
            return NoiseSpec.from_table(self.N, [factor * a for a in self.table], self.gamma)
        return NoiseSpec.power(self.N, c=factor * self.c, p=self.p, gamma=self.gamma)

    def to_dict(self):
        d = {"law": self.law, "gamma": self.gamma}
        if self.law == "power":
            d.update(c=self.c, p=self.p)
        elif self.law == "table":
            d["table"] = list(self.table)
        return d


def abs_eigenvalues(N, nu):
    """``|lambda_k|`` for k = 1..N^2 in linear-index order."""
    ms, ns = spectral.mode_order(N)
    if not nu > 0:
        raise DomainError(f"viscosity must be positive, got {nu}")
    return nu * np.pi**2 * (ms * ms + ns * ns).astype(float)


def _integral_tail(K, exponent):
    # integral_K^inf x^-s dx; bounds sum_{k > K} k^-s for s > 1.
    if exponent <= 1:
        return np.inf
    return K ** (1.0 - exponent) / (exponent - 1.0)


@dataclass
class SummabilityResult:
    admissible: bool
    partial_sum: float
    tail_bound: float
    exponent: float = None
    reason: str = ""


def check_summability(spec, nu):
    """
    Decide whether ``sum_k alpha_k^2 / |lambda_k|^(1 - gamma)`` is finite.

    Power laws are decided by the exponent test on ``k^-(2p + 1 - gamma)``;
    tables and the zero law are finite sums.
    """
    lam = abs_eigenvalues(spec.N, nu)
    a = spec.alphas()
    partial = float(np.sum(a**2 / lam ** (1.0 - spec.gamma)))
    if spec.law != "power" or spec.c == 0:
        return SummabilityResult(True, partial, 0.0, None, "finite amplitude table")
    s = 2.0 * spec.p + 1.0 - spec.gamma
    tail = spec.c**2 * (4 * np.pi * nu) ** (spec.gamma - 1.0) * _integral_tail(spec.K, s)
    if s > 1:
        reason = f"summand decays like k^-{s:g}, exponent > 1"
    else:
        reason = f"summand decays like k^-{s:g}, exponent <= 1: series diverges"
    return SummabilityResult(bool(s > 1), partial, float(tail), s, reason)


def trace_Q(spec):
    """``sum alpha_k^2`` over the truncation."""
    return float(np.sum(spec.alphas() ** 2))


def trace_Q_tail(spec):
    """Integral-test bound on ``sum_{k > K} alpha_k^2`` (zero for finite tables)."""
    if spec.law != "power" or spec.c == 0:
        return 0.0
    return float(spec.c**2 * _integral_tail(spec.K, 2.0 * spec.p))


def hs_integral(spec, nu):
    """
    ``int_0^inf ||S(r) sqrt(Q)||_HS^2 dr`` over the truncation.

    For the diagonal semigroup the integrand is ``sum alpha_k^2 exp(2 lambda_k r)``
    and the time integral is ``sum alpha_k^2 / (2 |lambda_k|)``.
    """
    return float(np.sum(spec.alphas() ** 2 / (2.0 * abs_eigenvalues(spec.N, nu))))


def hs_tail(spec, nu):
    if spec.law != "power" or spec.c == 0:
        return 0.0
    return float(spec.c**2 / (8 * np.pi * nu) * _integral_tail(spec.K, 2.0 * spec.p + 1.0))


def hs_integrand(spec, nu, r):
    """``||S(r) sqrt(Q)||_HS^2`` at time(s) ``r``."""
    lam = abs_eigenvalues(spec.N, nu)
    a2 = spec.alphas() ** 2
    r = np.asarray(r, dtype=float)
    return np.sum(a2 * np.exp(-2.0 * np.multiply.outer(r, lam)), axis=-1)


@dataclass
class ImageConditionResult:
    passed: bool
    t: float
    max_ratio: float
    trend: str
    ratios: np.ndarray = field(repr=False)
    reason: str = ""


def _shell_max(values, lam):
    # ties in |lambda| are ordered by (m, n), not by amplitude; compare shells
    _, start = np.unique(lam, return_index=True)
    return np.maximum.reduceat(values, start)


def check_image_condition(spec, nu, t):
    """
    Ratio test for ``Image S(t) within Image Q_t^(1/2)``.

    ``Q_t`` is diagonal with ``q_k = alpha_k^2 (1 - exp(2 lambda_k t)) / (2 |lambda_k|)``,
    so the inclusion holds iff ``exp(lambda_k t) / sqrt(q_k)`` stays bounded.
    Within a finite truncation the check is that no mode is unforced and the
    ratio does not grow over the upper half of the eigenvalue shells.
    """
    if not t > 0:
        raise DomainError(f"image condition needs t > 0, got {t}")
    lam = abs_eigenvalues(spec.N, nu)
    a = spec.alphas()
    with np.errstate(divide="ignore", invalid="ignore"):
        q = a**2 * (-np.expm1(-2.0 * lam * t)) / (2.0 * lam)
        ratios = np.exp(-lam * t) / np.sqrt(q)
    if np.any(a == 0):
        first = int(np.argmax(a == 0)) + 1
        return ImageConditionResult(
            False, t, np.inf, "unbounded", ratios, f"mode k={first} is unforced (alpha_k = 0)"
        )
    per_shell = _shell_max(ratios, lam)
    tail = per_shell[len(per_shell) // 2 :]
    grows = np.any(np.diff(tail) > 1e-12 * np.maximum(tail[:-1], 1e-300))
    trend = "increasing" if grows else "decreasing"
    passed = trend == "decreasing"
    reason = "ratio non-increasing over the upper eigenvalue shells" if passed else (
        "ratio grows with k; inclusion not supported by the truncation"
    )
    return ImageConditionResult(passed, t, float(np.max(ratios)), trend, ratios, reason)


@dataclass
class ConditionReport:
    """Per-hypothesis verdicts; ``overall`` needs (i), (ii) and (iii)."""

    nu: float
    noise: dict
    summability: SummabilityResult
    trace_Q: float
    trace_Q_tail: float
    hs_integral: float
    hs_tail: float
    hs_truncated_finite: bool
    condition_i: bool
    condition_i_reason: str
    image: list
    condition_ii: bool
    worst_ratio: float
    condition_iii: bool
    condition_iii_reason: str

    @property
    def overall(self):
        return self.condition_i and self.condition_ii and self.condition_iii

    @property
    def failed(self):
        names = ("(i)", "(ii)", "(iii)")
        flags = (self.condition_i, self.condition_ii, self.condition_iii)
        return [n for n, ok in zip(names, flags) if not ok]

    @property
    def root_failures(self):
        """``failed`` without (ii) when (iii) fails: a zero amplitude breaks both."""
        out = self.failed
        if "(iii)" in out and "(ii)" in out:
            out.remove("(ii)")
        return out

    def to_dict(self):
        summ = asdict(self.summability)
        return {
            "nu": self.nu,
            "noise": self.noise,
            "summability": {
                "admissible": summ["admissible"],
                "partial_sum": summ["partial_sum"],
                "tail_bound": _finite_or_none(summ["tail_bound"]),
                "exponent": summ["exponent"],
                "reason": summ["reason"],
            },
            "trace_Q": self.trace_Q,
            "trace_Q_tail": _finite_or_none(self.trace_Q_tail),
            "hs_integral": self.hs_integral,
            "hs_tail": _finite_or_none(self.hs_tail),
            "condition_i": {
                "passed": self.condition_i,
                "truncated_finite": self.hs_truncated_finite,
                "reason": self.condition_i_reason,
            },
            "condition_ii": {
                "passed": self.condition_ii,
                "worst_ratio": _finite_or_none(self.worst_ratio),
                "per_time": [
                    {
                        "t": r.t,
                        "passed": r.passed,
                        "max_ratio": _finite_or_none(r.max_ratio),
                        "trend": r.trend,
                        "reason": r.reason,
                    }
                    for r in self.image
                ],
            },
            "condition_iii": {"passed": self.condition_iii, "reason": self.condition_iii_reason},
            "overall": "admissible" if self.overall else "inadmissible",
            "failed": self.failed,
            "root_failures": self.root_failures,
        }


def _finite_or_none(x):
    return float(x) if x is not None and np.isfinite(x) else None


def theorem_conditions(spec, nu, times=IMAGE_TEST_TIMES):
    """Evaluate the three uniqueness hypotheses (and summability) for ``spec``."""
    summ = check_summability(spec, nu)
    hs = hs_integral(spec, nu)
    tail = hs_tail(spec, nu)
    truncated_finite = bool(np.isfinite(hs))
    if not truncated_finite:
        cond_i, reason_i = False, "truncated integral is not finite"
    elif np.isfinite(tail):
        cond_i, reason_i = True, "finite; tail beyond truncation converges"
    else:
        cond_i, reason_i = False, "finite in truncation, but the tail sum diverges"

    image = [check_image_condition(spec, nu, t) for t in times]
    cond_ii = all(r.passed for r in image)
    worst = max(r.max_ratio for r in image)

    a = spec.alphas()
    if np.all(a > 0):
        cond_iii, reason_iii = True, "all modes forced: ker Q = {0}"
    else:
        k = int(np.argmax(a == 0)) + 1
        cond_iii, reason_iii = False, f"alpha_{k} = 0: Q has a nontrivial kernel"

    return ConditionReport(
        nu=nu,
        noise=spec.to_dict(),
        summability=summ,
        trace_Q=trace_Q(spec),
        trace_Q_tail=trace_Q_tail(spec),
        hs_integral=hs,
        hs_tail=tail,
        hs_truncated_finite=truncated_finite,
        condition_i=cond_i,
        condition_i_reason=reason_i,
        image=image,
        condition_ii=cond_ii,
        worst_ratio=worst,
        condition_iii=cond_iii,
        condition_iii_reason=reason_iii,
    )
