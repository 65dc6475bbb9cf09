"""Hyperprior energies f, induced image penalties g_x, and the gamma/omega rules.

Every supported image prior is a Gaussian scale mixture: p(x) is represented
variationally through a scalar energy f over the mixing variance gamma,

    g_x(x) = min_{gamma >= 0}  x^2/gamma + log(gamma) + f(gamma),
    p(x)   = exp(-g_x(x)/2).

The solver only ever needs the derivative of g_x through the two scalar rules

    gamma_update(sigma) = 2*sigma / g_x'(sigma)      (variance statistic)
    omega_update(sigma) = g_x'(sigma) / (2*sigma)    (its reciprocal, E[1/gamma])

which are implemented in closed form per variant below.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "Jeffreys",
    "Affine",
    "GeneralizedGaussian",
    "FiniteGSM",
    "PriorSpec",
    "SIGMA2_FLOOR",
    "gx_eval",
    "f_eval",
    "gamma_update",
    "omega_update",
    "finite_gsm_omega",
    "prior_from_string",
]

# Floor applied to sigma^2 before omega updates: exact zeros would otherwise
# produce infinite weights, and zeroed pixels are re-activated only through
# the data term.
SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class Jeffreys:
    """Constant f(gamma) = b; induces g_x(x) = 2 log|x| + b."""

    b: float = 0.0


@dataclass(frozen=True)
class Affine:
    """f(gamma) = a*gamma + b with slope a >= 0."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError(f"affine slope must be >= 0, got {self.a}")


@dataclass(frozen=True)
class GeneralizedGaussian:
    """g_x(x) = 2|x|^p directly, 0 < p <= 1; f has no elementary closed form.

    f_eval still works through the variational identity: with the optimal
    coupling sigma(gamma) = (p*gamma)^(1/(2-p)),
    f(gamma) = 2 sigma^p - sigma^2/gamma - log(gamma).
    """

    p: float = 0.8

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"exponent p must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class FiniteGSM:
    """Finite Gaussian scale mixture with weights pi_j and variances gbar_j."""

    weights: tuple
    variances: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        if w.ndim != 1 or v.shape != w.shape:
            raise ValueError("weights and variances must be 1D of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must form a probability vector")
        if np.any(v <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "variances", tuple(v))


PriorSpec = Union[Jeffreys, Affine, GeneralizedGaussian, FiniteGSM]


def _affine_gamma_star(a: float, x2):
    """argmin_gamma x^2/gamma + log(gamma) + a*gamma, stable for a -> 0."""
    if a == 0.0:
        return x2
    return 2.0 * x2 / (1.0 + np.sqrt(1.0 + 4.0 * a * x2))


def gx_eval(prior: PriorSpec, x):
    """Image penalty g_x(x); -inf at x = 0 for the improper variants."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    if isinstance(prior, Jeffreys):
        with np.errstate(divide="ignore"):
            out = 2.0 * np.log(ax) + prior.b
    elif isinstance(prior, Affine):
        x2 = ax**2
        g = _affine_gamma_star(prior.a, x2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(g > 0, x2 / np.where(g > 0, g, 1.0), np.inf)
            out = ratio + np.log(g) + prior.a * g + prior.b
        out = np.where(x2 == 0, -np.inf, out)
    elif isinstance(prior, GeneralizedGaussian):
        out = 2.0 * ax**prior.p
    elif isinstance(prior, FiniteGSM):
        w = np.asarray(prior.weights)
        v = np.asarray(prior.variances)
        # -2 log sum_j pi_j N(x; 0, gbar_j)
        logs = -0.5 * np.log(2.0 * np.pi * v) - ax[..., None] ** 2 / (2.0 * v)
        out = -2.0 * logsumexp(logs, axis=-1, b=w)
    else:
        raise TypeError(f"unsupported prior {prior!r}")
    return out if out.ndim else float(out)


def f_eval(prior: PriorSpec, gamma):
    """Hyperprior energy f(gamma) for the variants with a usable closed form."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if np.any(gamma < 0):
        raise ValueError("gamma must be nonnegative")
    if isinstance(prior, Jeffreys):
        out = np.full(gamma.shape, prior.b)
    elif isinstance(prior, Affine):
        out = prior.a * gamma + prior.b
    elif isinstance(prior, GeneralizedGaussian):
        p = prior.p
        with np.errstate(divide="ignore"):
            s2 = (p * gamma) ** (2.0 / (2.0 - p))
            out = np.where(
                gamma > 0,
                2.0 * s2 ** (p / 2.0) - s2 / np.where(gamma > 0, gamma, 1.0) - np.log(gamma),
                np.inf,
            )
    else:
        raise TypeError(f"no closed-form f for {type(prior).__name__}")
    return out if out.ndim else float(out)


def finite_gsm_omega(prior: FiniteGSM, sigma):
    """Posterior-mean E[1/gamma] under a finite mixture at observation scale sigma.

    Component weights are proportional to pi_j * gbar_j^(-1/2) * exp(-sigma^2/(2 gbar_j));
    equals omega_update on the same mixture (the two rules are formally equivalent).
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    w = np.asarray(prior.weights)
    v = np.asarray(prior.variances)
    loglik = -0.5 * np.log(v) - sigma[..., None] ** 2 / (2.0 * v)
    loglik += np.log(np.where(w > 0, w, np.finfo(float).tiny))
    loglik -= logsumexp(loglik, axis=-1, keepdims=True)
    out = np.sum(np.exp(loglik) / v, axis=-1)
    return out if out.ndim else float(out)


def gamma_update(prior: PriorSpec, sigma):
    """Variance statistic 2*sigma/g_x'(sigma), exactly 0 at sigma = 0."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    if isinstance(prior, Jeffreys):
        val = safe**2
    elif isinstance(prior, Affine):
        val = _affine_gamma_star(prior.a, safe**2)
    elif isinstance(prior, GeneralizedGaussian):
        val = safe ** (2.0 - prior.p) / prior.p
    elif isinstance(prior, FiniteGSM):
        val = 1.0 / finite_gsm_omega(prior, safe)
    else:
        raise TypeError(f"unsupported prior {prior!r}")
    out = np.where(pos, val, 0.0)
    return out if out.ndim else float(out)


def omega_update(prior: PriorSpec, sigma):
    """Weight statistic g_x'(sigma)/(2*sigma) with the sigma^2 floor applied."""
    sigma = np.asarray(sigma, dtype=np.float64)
    sigma = np.sqrt(np.maximum(sigma**2, SIGMA2_FLOOR))
    if isinstance(prior, Jeffreys):
        out = sigma**-2.0
    elif isinstance(prior, Affine):
        out = 1.0 / _affine_gamma_star(prior.a, sigma**2)
    elif isinstance(prior, GeneralizedGaussian):
        out = prior.p * sigma ** (prior.p - 2.0)
    elif isinstance(prior, FiniteGSM):
        out = np.asarray(finite_gsm_omega(prior, sigma))
    else:
        raise TypeError(f"unsupported prior {prior!r}")
    return out if out.ndim else float(out)


def prior_from_string(text: str) -> PriorSpec:
    """Parse CLI shorthand: 'jeffreys', 'affine:a,b', or 'gg:p'."""
    name, _, params = text.partition(":")
    name = name.strip().lower()
    if name == "jeffreys":
        if params:
            raise ValueError("jeffreys takes no parameters")
        return Jeffreys()
    if name == "affine":
        parts = [float(v) for v in params.split(",")] if params else []
        if len(parts) == 1:
            return Affine(a=parts[0])
        if len(parts) == 2:
            return Affine(a=parts[0], b=parts[1])
        raise ValueError("affine prior expects 'affine:a' or 'affine:a,b'")
    if name == "gg":
        if not params:
            raise ValueError("gg prior expects 'gg:p'")
        return GeneralizedGaussian(p=float(params))
    raise ValueError(f"unknown prior {text!r}")
