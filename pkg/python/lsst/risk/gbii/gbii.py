# This file is part of risk_gbii.
#
# Developed for the LSST Data Management System.
# This product includes software developed by the LSST Project
# (https://www.lsst.org).
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""The four-parameter GBII distribution.

Density (``p > 0`` canonical form)::

    f(y) = p / (B(nu, tau) y) * (y/mu)^(p nu) / (1 + (y/mu)^p)^(nu + tau)

All evaluations go through ``z = p (log y - log mu)`` so that the extreme
shapes met in practice (p in the hundreds, tau in the millions) neither
overflow nor lose the upper tail.
"""

__all__ = ["GbiiParams", "SUBFAMILIES", "makeSubfamily", "gbiiLogPdf", "gbiiPdf", "gbiiCdf",
           "gbiiSf", "gbiiQuantile", "gbiiMode", "gbiiMoment", "gbiiIncompleteMoment",
           "gbiiSample"]

import numpy as np
import scipy.special

from .exceptions import DomainError, MomentExistenceError, UnknownFamilyError
from .specialFunctions import invRegIncBeta, logBeta

# Slot rules of the nested subfamilies.  A float fixes the slot, a slot
# name ties it to that (free) slot.
SUBFAMILIES = {
    "GBII": {},
    "BII": {"p": 1.0},
    "Burr": {"nu": 1.0},
    "InverseBurr": {"tau": 1.0},
    "GLMGA": {"tau": 0.5},
    "InverseGLMGA": {"nu": 0.5},
    "Paralogistic": {"nu": 1.0, "tau": "p"},
    "InverseParalogistic": {"nu": "p", "tau": 1.0},
}

_SLOTS = ("p", "mu", "nu", "tau")

# Strict-inequality slack for moment existence.
_MOMENT_SLACK = 1.0e-12


class GbiiParams:
    """Parameters of one GBII component.

    A negative ``p`` is accepted and mapped to the canonical positive form
    through ``GBII(y; -p, mu, tau, nu) = GBII(y; p, mu, nu, tau)``.

    Parameters
    ----------
    p : `float`
        Nonzero scale/shape parameter.
    mu : `float` or `numpy.ndarray`
        Positive location parameter; an array gives one location per
        observation.
    nu, tau : `float`
        Positive shape parameters.
    family : `str`, optional
        Subfamily tag, one of the keys of `SUBFAMILIES`.
    fixed : iterable of `str`, optional
        Slots held fixed (or tied) by the subfamily.

    Raises
    ------
    DomainError
        Raised if a parameter is outside its domain.
    """
    def __init__(self, p, mu, nu, tau, family="GBII", fixed=()):
        p = float(p)
        nu = float(nu)
        tau = float(tau)
        mu = np.asarray(mu, dtype=float)
        if p == 0.0 or not np.isfinite(p):
            raise DomainError(f"GBII scale parameter p must be finite and nonzero; got {p}.")
        if not np.all(mu > 0) or not np.all(np.isfinite(mu)):
            raise DomainError(f"GBII location mu must be positive; got {mu}.")
        if not nu > 0 or not tau > 0 or not np.isfinite(nu) or not np.isfinite(tau):
            raise DomainError(f"GBII shapes must be positive; got nu={nu}, tau={tau}.")
        fixed = frozenset(fixed)
        if p < 0:
            p, nu, tau = -p, tau, nu
            swap = {"nu": "tau", "tau": "nu"}
            fixed = frozenset(swap.get(slot, slot) for slot in fixed)
        self.p = p
        self.mu = float(mu) if mu.ndim == 0 else mu
        self.nu = nu
        self.tau = tau
        self.family = family
        self.fixed = fixed

    def __repr__(self):
        return (f"GbiiParams(p={self.p!r}, mu={self.mu!r}, nu={self.nu!r}, tau={self.tau!r}, "
                f"family={self.family!r})")

    def __eq__(self, other):
        if not isinstance(other, GbiiParams):
            return False
        return (self.p == other.p and self.nu == other.nu and self.tau == other.tau
                and np.array_equal(self.mu, other.mu) and self.family == other.family
                and self.fixed == other.fixed)

    def withMu(self, mu):
        """Copy of these parameters with a different location."""
        return GbiiParams(self.p, mu, self.nu, self.tau, family=self.family, fixed=self.fixed)

    @property
    def freeSlots(self):
        return tuple(slot for slot in _SLOTS if slot not in self.fixed)


def makeSubfamily(name, **free):
    """Construct a nested subfamily member.

    Parameters
    ----------
    name : `str`
        One of ``BII``, ``Burr``, ``InverseBurr``, ``GLMGA``,
        ``InverseGLMGA``, ``Paralogistic``, ``InverseParalogistic`` (or
        ``GBII`` for the unrestricted family).
    **free
        Values of the free slots; exactly the slots the subfamily leaves free.

    Returns
    -------
    params : `GbiiParams`
        Embedded parameters with the fixed slots flagged.

    Raises
    ------
    UnknownFamilyError
        Raised for an unknown name.
    DomainError
        Raised if the free slots do not match the subfamily.
    """
    try:
        rules = SUBFAMILIES[name]
    except KeyError:
        raise UnknownFamilyError(f"Unknown GBII subfamily '{name}'; "
                                 f"expected one of {sorted(SUBFAMILIES)}.") from None
    expected = set(_SLOTS) - set(rules)
    if set(free) != expected:
        raise DomainError(f"Subfamily {name} takes parameters {sorted(expected)}; got {sorted(free)}.")
    values = dict(free)
    for slot, rule in rules.items():
        values[slot] = values[rule] if isinstance(rule, str) else rule
    return GbiiParams(values["p"], values["mu"], values["nu"], values["tau"],
                      family=name, fixed=rules.keys())


def _checkPositive(y):
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        raise DomainError(f"GBII argument must be positive; got {y}.")
    return y


def _result(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def _logistic(y, params):
    return params.p*(np.log(y) - np.log(params.mu))


def _betaCdfLogistic(a, b, z):
    """I_{a,b}(expit(z)), taking the complement branch when z > 0."""
    z = np.asarray(z, dtype=float)
    return np.where(z <= 0, scipy.special.betainc(a, b, scipy.special.expit(z)),
                    scipy.special.betaincc(b, a, scipy.special.expit(-z)))


def _betaSfLogistic(a, b, z):
    z = np.asarray(z, dtype=float)
    return np.where(z <= 0, scipy.special.betaincc(a, b, scipy.special.expit(z)),
                    scipy.special.betainc(b, a, scipy.special.expit(-z)))


def gbiiLogPdf(y, params):
    """Natural log of the GBII density.

    Raises
    ------
    DomainError
        Raised if any ``y <= 0``.
    """
    y = _checkPositive(y)
    z = _logistic(y, params)
    value = (np.log(params.p) - logBeta(params.nu, params.tau) - np.log(y)
             + params.nu*z - (params.nu + params.tau)*np.logaddexp(0.0, z))
    return _result(value)


def gbiiPdf(y, params):
    """GBII density.

    Parameters
    ----------
    y : `float` or `numpy.ndarray`
        Positive evaluation point(s).
    params : `GbiiParams`
        Distribution parameters.

    Returns
    -------
    density : `float` or `numpy.ndarray`
        Density value(s).
    """
    return _result(np.exp(gbiiLogPdf(y, params)))


def gbiiCdf(y, params):
    """GBII distribution function ``I_{nu,tau}[(y/mu)^p / (1 + (y/mu)^p)]``."""
    y = _checkPositive(y)
    return _result(_betaCdfLogistic(params.nu, params.tau, _logistic(y, params)))


def gbiiSf(y, params):
    """GBII survival function ``1 - F(y)``."""
    y = _checkPositive(y)
    return _result(_betaSfLogistic(params.nu, params.tau, _logistic(y, params)))


def gbiiQuantile(q, params, upper=False):
    """GBII quantile function.

    Parameters
    ----------
    q : `float` or `numpy.ndarray`
        Probability level(s) in (0, 1).
    params : `GbiiParams`
        Distribution parameters.
    upper : `bool`, optional
        If `True`, ``q`` is an exceedance probability ``1 - F(y)``, which
        keeps full precision deep in the tail.

    Returns
    -------
    y : `float` or `numpy.ndarray`
        ``mu [x / (1 - x)]^(1/p)`` with ``x = I^{-1}_{nu,tau}(F)``.

    Raises
    ------
    DomainError
        Raised if ``q`` is not in (0, 1).
    """
    q = np.asarray(q, dtype=float)
    if not np.all((q > 0) & (q < 1)):
        raise DomainError(f"Quantile level must lie in (0, 1); got {q}.")
    q, mu = np.broadcast_arrays(q, np.asarray(params.mu, dtype=float))
    scalar = q.ndim == 0
    q = np.atleast_1d(q).astype(float)
    mu = np.atleast_1d(mu).astype(float)
    below = 1.0 - q if upper else q
    above = q if upper else 1.0 - q

    logRatio = np.empty_like(q)
    lowerBranch = below <= 0.5
    if np.any(lowerBranch):
        x = invRegIncBeta(below[lowerBranch], params.nu, params.tau)
        logRatio[lowerBranch] = np.log(x) - np.log1p(-x)
    if np.any(~lowerBranch):
        w = invRegIncBeta(above[~lowerBranch], params.tau, params.nu)
        logRatio[~lowerBranch] = np.log1p(-w) - np.log(w)
    y = mu*np.exp(logRatio/params.p)
    return float(y[0]) if scalar else y


def gbiiMode(params):
    """Mode ``mu ((p nu - 1)/(p tau + 1))^(1/p)``, or zero when ``p nu <= 1``."""
    p, nu, tau = params.p, params.nu, params.tau
    if p*nu <= 1.0:
        return _result(np.zeros_like(np.asarray(params.mu, dtype=float)))
    return _result(params.mu*((p*nu - 1.0)/(p*tau + 1.0))**(1.0/p))


def _checkMoment(h, params):
    p, nu, tau = params.p, params.nu, params.tau
    if not (-p*nu + _MOMENT_SLACK < h < p*tau - _MOMENT_SLACK):
        raise MomentExistenceError(f"Moment of order {h} does not exist: needs "
                                   f"{-p*nu:.6g} < h < {p*tau:.6g}.")


def gbiiMoment(h, params):
    """Moment ``E[Y^h] = mu^h B(nu + h/p, tau - h/p) / B(nu, tau)``.

    Raises
    ------
    MomentExistenceError
        Raised unless ``-p nu < h < p tau``.
    """
    _checkMoment(h, params)
    p, nu, tau = params.p, params.nu, params.tau
    return _result(np.asarray(params.mu, dtype=float)**h
                   * np.exp(logBeta(nu + h/p, tau - h/p) - logBeta(nu, tau)))


def gbiiIncompleteMoment(h, s, side, params):
    """Conditional moment below or above a point.

    Parameters
    ----------
    h : `float`
        Moment order.
    s : `float` or `numpy.ndarray`
        Positive truncation point(s).
    side : `str`
        ``"below"`` for ``E[Y^h | Y <= s]``, ``"above"`` for
        ``E[Y^h | Y > s]``.
    params : `GbiiParams`
        Distribution parameters.

    Returns
    -------
    value : `float` or `numpy.ndarray`
        The conditional moment.

    Raises
    ------
    MomentExistenceError
        Raised unless ``-p nu < h < p tau``.
    DomainError
        Raised on a non-positive ``s`` or an unknown ``side``.
    """
    if side not in ("below", "above"):
        raise DomainError(f"side must be 'below' or 'above'; got {side!r}.")
    s = _checkPositive(s)
    full = gbiiMoment(h, params)
    p, nu, tau = params.p, params.nu, params.tau
    z = _logistic(s, params)
    if side == "below":
        ratio = _betaCdfLogistic(nu + h/p, tau - h/p, z)/_betaCdfLogistic(nu, tau, z)
    else:
        ratio = _betaSfLogistic(nu + h/p, tau - h/p, z)/_betaSfLogistic(nu, tau, z)
    return _result(full*ratio)


def gbiiSample(n, params, seed=None):
    """Draw ``n`` GBII variates by inversion.

    Parameters
    ----------
    n : `int`
        Number of draws.
    params : `GbiiParams`
        Distribution parameters (scalar ``mu`` or one per draw).
    seed : `int`, optional
        Seed for `numpy.random.RandomState`.

    Returns
    -------
    sample : `numpy.ndarray`
        The draws.
    """
    rng = np.random.RandomState(seed)
    q = rng.uniform(np.finfo(float).tiny, 1.0, size=n)
    return np.atleast_1d(gbiiQuantile(q, params))
