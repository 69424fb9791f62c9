"""Time-success-ratio calculus for leakage-resilient stream ciphers.

A simulator cost model t_h = t * A * eps^-alpha + B * eps^-beta turns a weak
PRF with 2^k keys (security s = 2^k eps for every eps) into a stream cipher
leaking lambda bits per round. The cipher is 2^k' secure when every attacker
of size s' succeeds with probability at most s' / 2^k'. All hidden constants
default to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameter, NoPositiveSecurity

NEG_INF = -math.inf


@dataclass(frozen=True)
class SimulatorCostModel:
    """t_h = t * A * eps^-alpha + B * eps^-beta, with A and B given by their base-2 logs.

    ``A_log2`` and ``B_log2`` are affine in the leakage lambda:
    log2 A = A_lambda * lambda + A_const (likewise for B). ``B_lambda = None``
    means B = 0.
    """

    label: str
    A_lambda: float
    alpha: float
    B_lambda: Optional[float] = None
    beta: float = 0.0
    A_const: float = 0.0
    B_const: float = 0.0
    technique: str = ""

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidParameter("cost exponents must be nonnegative")

    @classmethod
    def from_log2(cls, A_log2: float, alpha: float, B_log2: Optional[float] = None, beta: float = 0.0,
                  label: str = "custom") -> "SimulatorCostModel":
        """A model with fixed A = 2^A_log2 and B = 2^B_log2 (B = 0 when omitted)."""
        return cls(label, 0.0, alpha, None if B_log2 is None else 0.0, beta, A_log2,
                   0.0 if B_log2 is None else B_log2)

    def A_log2(self, lam: float) -> float:
        return self.A_lambda * lam + self.A_const

    def B_log2(self, lam: float) -> float:
        return NEG_INF if self.B_lambda is None else self.B_lambda * lam + self.B_const

    @property
    def has_B(self) -> bool:
        return self.B_lambda is not None

    def formula(self) -> str:
        """Simulator size as text, e.g. ``s*2^(2λ)*ε^-4``."""
        text = f"s*{_power(self.A_lambda, self.A_const)}*ε^-{_num(self.alpha)}"
        if self.has_B:
            text += f" + {_power(self.B_lambda, self.B_const)}*ε^-{_num(self.beta)}"
        return text

    def closed_form(self, k: float, lam: float) -> Optional[float]:
        """k' = (k - lambda - log2 A) / (2 + alpha) when B = 0, else None."""
        if self.has_B:
            return None
        return (k - lam - self.A_log2(lam)) / (2.0 + self.alpha)


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


def _power(per_lambda: float, const: float) -> str:
    if per_lambda == 0 and const == 0:
        return "1"
    coeff = "" if per_lambda == 1 else _num(per_lambda)
    body = f"{coeff}λ" if per_lambda else ""
    if const:
        body = f"{body}+{_num(const)}" if body else _num(const)
    return f"2^({body})"


DEFAULT_MODELS = (
    SimulatorCostModel("linf-minmax", 4.0, 4.0, technique="min-max with L_inf approximation"),
    SimulatorCostModel("boosting", 1.0, 2.0, B_lambda=1.0, beta=4.0, technique="boosting"),
    SimulatorCostModel("lp-minmax", 2.0, 4.0, technique="min-max with L_p approximation"),
)

CLOSED_FORMS = {
    "linf-minmax": ("k/6 - 5λ/6", lambda k, lam: k / 6 - 5 * lam / 6),
    "boosting": ("k/6 - λ/3", lambda k, lam: k / 6 - lam / 3),
    "lp-minmax": ("k/6 - λ/2", lambda k, lam: k / 6 - lam / 2),
}


def default_closed_form(label: str, k: float, lam: float) -> float:
    """The published-style closed form for one of the default models."""
    return CLOSED_FORMS[label][1](k, lam)


@dataclass(frozen=True)
class CipherSecurity:
    k_prime: float
    eps_prime: float
    s_prime: float
    k: float
    lam: float
    q: float
    model: SimulatorCostModel

    @property
    def inputs(self) -> tuple:
        return (self.k, self.lam, self.q, self.model)


def transform_cipher_params(k: float, lam: float, q: float, eps: float, model: SimulatorCostModel,
                            *, eps_constant: float = 1.0, s_constant: float = 1.0):
    """Cipher (eps', s') from a weak PRF broken with probability eps by size s = 2^k eps.

    eps' = q sqrt(2^lambda eps) and s' = s eps'^alpha / A - B eps'^(alpha - beta) / A.
    Returns (eps', s') as floats; s' may be nonpositive when the B term dominates.
    """
    if not (k > 0 and lam >= 0 and q > 0 and 0 < eps < 1):
        raise InvalidParameter("need k > 0, lambda >= 0, q > 0 and eps in (0, 1)")
    log_eps = math.log2(eps)
    log_eps_prime = math.log2(eps_constant * q) + 0.5 * (lam + log_eps)
    log_s = k + log_eps
    a = model.A_log2(lam)
    main = math.log2(s_constant) + log_s + model.alpha * log_eps_prime - a
    s_prime = 2.0 ** main
    if model.has_B:
        s_prime -= 2.0 ** (model.B_log2(lam) + (model.alpha - model.beta) * log_eps_prime - a)
    return 2.0 ** log_eps_prime, s_prime


def security_margin(k: float, lam: float, k_prime: float, model: SimulatorCostModel) -> float:
    """log2 of 2^k 2^(-2k' - lambda) minus log2 of A 2^(alpha k') + B 2^(beta k')."""
    rhs = model.A_log2(lam) + model.alpha * k_prime
    if model.has_B:
        rhs = float(np.logaddexp2(rhs, model.B_log2(lam) + model.beta * k_prime))
    return (k - 2.0 * k_prime - lam) - rhs


def solve_security_bits(k: float, lam: float, model: SimulatorCostModel, *, resolution: float = 1e-6,
                        allow_negative: bool = False) -> float:
    """The largest k' >= 0 with 2^k 2^(-2k' - lambda) > A 2^(alpha k') + B 2^(beta k').

    The margin falls strictly in k', so bisection finds the crossing; the
    returned value satisfies the inequality and sits within ``resolution``
    of the supremum. ``allow_negative`` drops the k' >= 0 floor and returns
    the crossing even when it is negative (no actual security).
    """
    if not k > lam:
        raise InvalidParameter("need k > lambda")
    lo, hi = 0.0, float(k)
    if security_margin(k, lam, 0.0, model) <= 0.0:
        if not allow_negative:
            raise NoPositiveSecurity(f"no k' >= 0 is secure for k = {k}, lambda = {lam} under {model.label}")
        lo, hi = -float(k), 0.0
        while security_margin(k, lam, lo, model) <= 0.0:
            lo *= 2.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if security_margin(k, lam, mid, model) > 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def cipher_security(k: float, lam: float, model: SimulatorCostModel, q: float = 1.0) -> CipherSecurity:
    """Security in the worst-case attacker profile eps' = 2^-k', s' = 1."""
    k_prime = solve_security_bits(k, lam, model)
    return CipherSecurity(k_prime, 2.0 ** -k_prime, 1.0, k, lam, q, model)


@dataclass(frozen=True)
class TableRow:
    label: str
    technique: str
    formula: str
    k_prime: Optional[float]
    closed_form: Optional[float]
    closed_form_text: str


def emit_comparison_table(k: float, lam: float, models: Optional[Sequence[SimulatorCostModel]] = None) -> list:
    """One row per model: label, simulator size formula, solved k' (None when nothing is secure)."""
    models = DEFAULT_MODELS if models is None else tuple(models)
    if not models:
        raise InvalidParameter("the comparison needs at least one model")
    rows = []
    for model in models:
        try:
            k_prime = solve_security_bits(k, lam, model)
        except NoPositiveSecurity:
            k_prime = None
        rows.append(TableRow(model.label, model.technique, model.formula(), k_prime,
                             model.closed_form(k, lam), CLOSED_FORMS.get(model.label, ("",))[0]))
    return rows
