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
"""Mode-matched composite GBII distribution.

The head component (p1, mu1, nu1, tau1) is truncated above the threshold
``u`` and the tail component (p2, mu2, nu2, tau2) below it.  ``u`` is the
common mode of both components, which fixes ``mu1`` given the other
parameters, and continuity at ``u`` fixes the mixing weight ``r``.
Writing ``omega = I1 + phi J2`` with ``I1 = F1(u)``, ``J2 = 1 - F2(u)`` and
``phi = f1(u)/f2(u)``::

    f(y) = f1(y)/omega          for y <= u
    f(y) = phi f2(y)/omega      for y >  u

so that ``r = I1/omega`` and ``1 - r = phi J2/omega``.
"""

__all__ = ["CompositeParams", "ImpliedQuantities", "ROSTER", "deriveImplied", "compositeLogPdf",
           "compositePdf", "compositeCdf", "compositeSf", "compositeMoment", "compositeSample",
           "compositeVar", "compositeTvar", "logModeDensityFactor"]

import numpy as np
import scipy.integrate
import scipy.special

from .exceptions import ConstraintError, DomainError, MomentExistenceError, UnknownFamilyError
from .gbii import (SUBFAMILIES, GbiiParams, _betaCdfLogistic, gbiiCdf, gbiiIncompleteMoment, gbiiLogPdf,
                   gbiiMoment, gbiiPdf, gbiiQuantile, gbiiSf)
from .specialFunctions import logBeta

# Composite models as (head, tail) subfamily pairs.  The "G" tail holds the
# nu slot at 1/2, which is InverseGLMGA in the subfamily table.
ROSTER = {
    "ComGBII": ("GBII", "GBII"),
    "GBIIG": ("GBII", "InverseGLMGA"),
    "BIIG": ("BII", "InverseGLMGA"),
    "BG": ("Burr", "InverseGLMGA"),
    "IBG": ("InverseBurr", "InverseGLMGA"),
    "PG": ("Paralogistic", "InverseGLMGA"),
    "IPG": ("InverseParalogistic", "InverseGLMGA"),
}


def _canonical(p, nu, tau):
    if p < 0:
        return -p, tau, nu
    return p, nu, tau


class CompositeParams:
    """The seven composite parameters.

    Parameters
    ----------
    mu2 : `float` or `numpy.ndarray`
        Tail location; an array gives one location per observation.
    p1, p2 : `float`
        Head and tail scale parameters (negative values are canonicalised).
    nu1, nu2, tau1, tau2 : `float`
        Head and tail shapes.
    headFamily, tailFamily : `str`, optional
        Subfamily tags of the components.

    Raises
    ------
    DomainError
        Raised on non-positive locations or shapes.
    ConstraintError
        Raised if ``p1 nu1 <= 1`` or ``p2 nu2 <= 1`` (a component has no
        interior mode).
    """
    def __init__(self, mu2, p1, p2, nu1, nu2, tau1, tau2, headFamily="GBII", tailFamily="GBII"):
        for tag in (headFamily, tailFamily):
            if tag not in SUBFAMILIES:
                raise UnknownFamilyError(f"Unknown component family '{tag}'.")
        p1, nu1, tau1 = _canonical(float(p1), float(nu1), float(tau1))
        p2, nu2, tau2 = _canonical(float(p2), float(nu2), float(tau2))
        mu2 = np.asarray(mu2, dtype=float)
        if not np.all(mu2 > 0) or not np.all(np.isfinite(mu2)):
            raise DomainError(f"Tail location mu2 must be positive and finite; got {mu2}.")
        shapes = np.array([p1, p2, nu1, nu2, tau1, tau2])
        if not np.all(shapes > 0) or not np.all(np.isfinite(shapes)):
            raise DomainError(f"Composite shapes must be positive and finite; got {shapes}.")
        if p1*nu1 <= 1.0:
            raise ConstraintError(f"Head mode does not exist: p1*nu1 = {p1*nu1:.6g} <= 1.")
        if p2*nu2 <= 1.0:
            raise ConstraintError(f"Tail mode does not exist: p2*nu2 = {p2*nu2:.6g} <= 1.")
        self.mu2 = float(mu2) if mu2.ndim == 0 else mu2
        self.p1, self.p2 = p1, p2
        self.nu1, self.nu2 = nu1, nu2
        self.tau1, self.tau2 = tau1, tau2
        self.headFamily = headFamily
        self.tailFamily = tailFamily

    @classmethod
    def fromAlpha(cls, mu2, alpha, headFamily="GBII", tailFamily="GBII"):
        """Build from ``alpha = log(p1, p2, tau1, tau2, nu1, nu2)``."""
        p1, p2, tau1, tau2, nu1, nu2 = np.exp(np.asarray(alpha, dtype=float))
        return cls(mu2, p1, p2, nu1, nu2, tau1, tau2, headFamily=headFamily, tailFamily=tailFamily)

    @property
    def alpha(self):
        return np.log([self.p1, self.p2, self.tau1, self.tau2, self.nu1, self.nu2])

    def withMu2(self, mu2):
        return CompositeParams(mu2, self.p1, self.p2, self.nu1, self.nu2, self.tau1, self.tau2,
                               headFamily=self.headFamily, tailFamily=self.tailFamily)

    def head(self, mu1):
        return GbiiParams(self.p1, mu1, self.nu1, self.tau1, family=self.headFamily,
                          fixed=SUBFAMILIES[self.headFamily].keys())

    def tail(self):
        return GbiiParams(self.p2, self.mu2, self.nu2, self.tau2, family=self.tailFamily,
                          fixed=SUBFAMILIES[self.tailFamily].keys())

    def __repr__(self):
        return (f"CompositeParams(mu2={self.mu2!r}, p1={self.p1!r}, p2={self.p2!r}, nu1={self.nu1!r}, "
                f"nu2={self.nu2!r}, tau1={self.tau1!r}, tau2={self.tau2!r}, "
                f"headFamily={self.headFamily!r}, tailFamily={self.tailFamily!r})")

    @classmethod
    def fromRoster(cls, name, mu2, **shapes):
        """Build a roster model from its free shapes.

        Missing slots are filled from the subfamily rules of the head and
        tail components.
        """
        try:
            head, tail = ROSTER[name]
        except KeyError:
            raise UnknownFamilyError(f"Unknown composite model '{name}'; "
                                     f"expected one of {sorted(ROSTER)}.") from None
        values = dict(shapes)
        for suffix, family in (("1", head), ("2", tail)):
            for slot, rule in SUBFAMILIES[family].items():
                values[slot + suffix] = values[rule + suffix] if isinstance(rule, str) else rule
        return cls(mu2, values["p1"], values["p2"], values["nu1"], values["nu2"],
                   values["tau1"], values["tau2"], headFamily=head, tailFamily=tail)


class ImpliedQuantities:
    """Quantities implied by mode matching.

    Attributes
    ----------
    mu1 : `float` or `numpy.ndarray`
        Head location.
    u : `float` or `numpy.ndarray`
        Threshold, the common mode of both components.
    r : `float`
        Head probability mass.
    phi : `float`
        Ratio of head to tail density at the threshold.
    """
    def __init__(self, mu1, u, r, phi, logOmega, logPhi, logI1, logJ2, pi1, pi2, oneMinusR):
        self.mu1 = mu1
        self.u = u
        self.r = r
        self.phi = phi
        self.logOmega = logOmega
        self.logPhi = logPhi
        self.logI1 = logI1
        self.logJ2 = logJ2
        self.pi1 = pi1
        self.pi2 = pi2
        self.oneMinusR = oneMinusR

    def __repr__(self):
        return f"ImpliedQuantities(mu1={self.mu1!r}, u={self.u!r}, r={self.r!r}, phi={self.phi!r})"


def logModeDensityFactor(p, nu, tau):
    """``log(u f(u))`` of a GBII component evaluated at its own mode.

    Equal to ``log p - log B(nu, tau) + nu log(p nu - 1)
    + tau log(p tau + 1) - (nu + tau) log(p (nu + tau))``; independent of
    the location.
    """
    return (np.log(p) - logBeta(nu, tau) + nu*np.log(p*nu - 1.0) + tau*np.log(p*tau + 1.0)
            - (nu + tau)*np.log(p*(nu + tau)))


def deriveImplied(params):
    """Solve the mode-matching system for ``mu1``, ``u``, ``r`` and ``phi``.

    Parameters
    ----------
    params : `CompositeParams`
        Composite parameters (the constraints are checked on construction).

    Returns
    -------
    implied : `ImpliedQuantities`
        The implied quantities.
    """
    p1, p2 = params.p1, params.p2
    nu1, nu2, tau1, tau2 = params.nu1, params.nu2, params.tau1, params.tau2
    logG1 = np.log(p1*nu1 - 1.0) - np.log(p1*tau1 + 1.0)
    logG2 = np.log(p2*nu2 - 1.0) - np.log(p2*tau2 + 1.0)
    logMu2 = np.log(params.mu2)
    u = np.exp(logMu2 + logG2/p2)
    mu1 = np.exp(logMu2 + logG2/p2 - logG1/p1)

    pi1 = (p1*nu1 - 1.0)/(p1*nu1 + p1*tau1)
    pi2 = (p2*nu2 - 1.0)/(p2*nu2 + p2*tau2)
    logI1 = np.log(scipy.special.betainc(nu1, tau1, pi1))
    logJ2 = np.log(scipy.special.betaincc(nu2, tau2, pi2))
    logPhi = logModeDensityFactor(p1, nu1, tau1) - logModeDensityFactor(p2, nu2, tau2)
    logOmega = np.logaddexp(logI1, logPhi + logJ2)

    def _value(x):
        x = np.asarray(x, dtype=float)
        return float(x) if x.ndim == 0 else x

    return ImpliedQuantities(mu1=_value(mu1), u=_value(u), r=float(np.exp(logI1 - logOmega)),
                             phi=float(np.exp(logPhi)), logOmega=float(logOmega),
                             logPhi=float(logPhi), logI1=float(logI1), logJ2=float(logJ2),
                             pi1=float(pi1), pi2=float(pi2),
                             oneMinusR=float(np.exp(logPhi + logJ2 - logOmega)))


def _prepare(y, params, implied):
    y = np.asarray(y, dtype=float)
    if not np.all(y > 0):
        raise DomainError(f"Composite argument must be positive; got {y}.")
    if implied is None:
        implied = deriveImplied(params)
    return y, implied


def _result(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def compositeLogPdf(y, params, implied=None):
    """Log density of the composite distribution.

    Points with ``y == u`` belong to the head.
    """
    y, implied = _prepare(y, params, implied)
    logHead = gbiiLogPdf(y, params.head(implied.mu1)) - implied.logOmega
    logTail = implied.logPhi - implied.logOmega + gbiiLogPdf(y, params.tail())
    return _result(np.where(y <= implied.u, logHead, logTail))


def compositePdf(y, params, implied=None):
    """Composite density ``r f1/F1(u)`` below ``u`` and ``(1-r) f2/(1-F2(u))`` above.

    Parameters
    ----------
    y : `float` or `numpy.ndarray`
        Positive evaluation point(s).
    params : `CompositeParams`
        Composite parameters.
    implied : `ImpliedQuantities`, optional
        Precomputed implied quantities.

    Returns
    -------
    density : `float` or `numpy.ndarray`
        Density value(s).
    """
    return _result(np.exp(compositeLogPdf(y, params, implied)))


def compositeCdf(y, params, implied=None):
    """Composite distribution function; equals ``r`` at the threshold."""
    y, implied = _prepare(y, params, implied)
    head = gbiiCdf(y, params.head(implied.mu1))*np.exp(-implied.logOmega)
    tail = 1.0 - np.exp(implied.logPhi - implied.logOmega)*gbiiSf(y, params.tail())
    value = np.where(y <= implied.u, head, tail)
    return _result(np.where(y == implied.u, implied.r, value))


def compositeSf(y, params, implied=None):
    """Composite survival function, accurate in the far tail."""
    y, implied = _prepare(y, params, implied)
    head = 1.0 - gbiiCdf(y, params.head(implied.mu1))*np.exp(-implied.logOmega)
    tail = np.exp(implied.logPhi - implied.logOmega)*gbiiSf(y, params.tail())
    value = np.where(y <= implied.u, head, tail)
    return _result(np.where(y == implied.u, implied.oneMinusR, value))


def compositeMoment(h, params, implied=None):
    """Moment ``E[Y^h]`` of the composite distribution.

    Parameters
    ----------
    h : `float`
        Moment order.
    params : `CompositeParams`
        Composite parameters.
    implied : `ImpliedQuantities`, optional
        Precomputed implied quantities.

    Returns
    -------
    moment : `float` or `numpy.ndarray`
        ``r E1[Y^h | Y <= u] + (1 - r) E2[Y^h | Y > u]``.

    Raises
    ------
    MomentExistenceError
        Raised unless ``h`` lies inside both components' existence ranges.
    """
    if implied is None:
        implied = deriveImplied(params)
    head = params.head(implied.mu1)
    tail = params.tail()
    headTerm = gbiiIncompleteMoment(h, implied.u, "below", head)
    tailTerm = gbiiIncompleteMoment(h, implied.u, "above", tail)
    return _result(implied.r*headTerm + implied.oneMinusR*tailTerm)


def _checkLevel(q):
    q = np.asarray(q, dtype=float)
    if not np.all((q > 0) & (q < 1)):
        raise DomainError(f"Risk level must lie in (0, 1); got {q}.")
    return q


def compositeVar(q, params, implied=None):
    """Value-at-risk, the composite quantile function.

    Levels ``q <= r`` invert the head at ``z1 = q I1 / r = q omega``; levels
    ``q > r`` invert the tail from its exceedance probability
    ``(1 - q) omega / phi``.

    Parameters
    ----------
    q : `float` or `numpy.ndarray`
        Level(s) in (0, 1).
    params : `CompositeParams`
        Composite parameters; an array ``mu2`` broadcasts against ``q``.
    implied : `ImpliedQuantities`, optional
        Precomputed implied quantities.

    Returns
    -------
    var : `float` or `numpy.ndarray`
        Quantile(s); ``q == r`` maps to ``u``.
    """
    q = _checkLevel(q)
    if implied is None:
        implied = deriveImplied(params)
    q, mu1, mu2, u = np.broadcast_arrays(q, np.asarray(implied.mu1, dtype=float),
                                         np.asarray(params.mu2, dtype=float),
                                         np.asarray(implied.u, dtype=float))
    scalar = q.ndim == 0
    q, mu1, mu2, u = (np.atleast_1d(v).astype(float) for v in (q, mu1, mu2, u))

    result = np.empty_like(q)
    headBranch = q <= implied.r
    if np.any(headBranch):
        level = np.minimum(q[headBranch]*np.exp(implied.logOmega), np.nextafter(1.0, 0.0))
        result[headBranch] = gbiiQuantile(level, params.head(mu1[headBranch]))
    if np.any(~headBranch):
        exceed = np.exp(np.log1p(-q[~headBranch]) + implied.logOmega - implied.logPhi)
        result[~headBranch] = gbiiQuantile(exceed, params.withMu2(mu2[~headBranch]).tail(),
                                           upper=True)
    result = np.where(q == implied.r, u, result)
    return float(result[0]) if scalar else result


def _headPartialMean(lower, upper, head):
    """``E1[Y 1{lower < Y <= upper}]`` for the head component."""
    p, nu, tau = head.p, head.nu, head.tau
    if p*tau > 1.0:
        full = gbiiMoment(1.0, head)
        zLower = p*(np.log(lower) - np.log(head.mu))
        zUpper = p*(np.log(upper) - np.log(head.mu))
        a, b = nu + 1.0/p, tau - 1.0/p
        return full*(_betaCdfLogistic(a, b, zUpper) - _betaCdfLogistic(a, b, zLower))
    # Untruncated head mean is infinite; integrate the bounded piece.
    lower, upper, mu = np.broadcast_arrays(lower, upper, np.asarray(head.mu, dtype=float))
    out = np.empty(lower.shape)
    for index in np.ndindex(lower.shape):
        component = head.withMu(float(mu[index]))
        out[index], _ = scipy.integrate.quad(lambda y: y*gbiiPdf(y, component),
                                             float(lower[index]), float(upper[index]),
                                             epsabs=0.0, epsrel=1.0e-10, limit=200)
    return out


def compositeTvar(q, params, implied=None):
    """Tail value-at-risk ``E[Y | Y > VaR_q]``.

    Computed from incomplete moments: above the threshold the conditional
    tail mean of the tail component; at or below it the head mass between
    ``VaR_q`` and ``u`` plus the whole tail contribution, divided by
    ``1 - q``.

    Raises
    ------
    MomentExistenceError
        Raised if ``p2 tau2 <= 1``; the tail mean then diverges for every level.
    """
    q = _checkLevel(q)
    if implied is None:
        implied = deriveImplied(params)
    tail = params.tail()
    if params.p2*params.tau2 <= 1.0 + 1.0e-12:
        raise MomentExistenceError(f"TVaR does not exist: p2*tau2 = {params.p2*params.tau2:.6g} <= 1.")
    var = np.asarray(compositeVar(q, params, implied), dtype=float)
    q, var, mu1, mu2, u = np.broadcast_arrays(q, var, np.asarray(implied.mu1, dtype=float),
                                              np.asarray(params.mu2, dtype=float),
                                              np.asarray(implied.u, dtype=float))
    scalar = q.ndim == 0
    q, var, mu1, mu2, u = (np.atleast_1d(v).astype(float) for v in (q, var, mu1, mu2, u))

    result = np.empty_like(q)
    tailBranch = q > implied.r
    if np.any(tailBranch):
        component = params.withMu2(mu2[tailBranch]).tail()
        result[tailBranch] = gbiiIncompleteMoment(1.0, var[tailBranch], "above", component)
    if np.any(~tailBranch):
        head = params.head(mu1[~tailBranch])
        component = params.withMu2(mu2[~tailBranch]).tail()
        headPart = _headPartialMean(var[~tailBranch], u[~tailBranch], head)
        tailPart = gbiiMoment(1.0, component)*_sfAtMode(tail)
        mass = np.exp(-implied.logOmega)*headPart + np.exp(implied.logPhi - implied.logOmega)*tailPart
        result[~tailBranch] = mass/(1.0 - q[~tailBranch])
    return float(result[0]) if scalar else result


def _sfAtMode(tail):
    """``1 - I_{nu2 + 1/p2, tau2 - 1/p2}(pi2)``, the first-moment tail factor."""
    p, nu, tau = tail.p, tail.nu, tail.tau
    pi2 = (p*nu - 1.0)/(p*nu + p*tau)
    return scipy.special.betaincc(nu + 1.0/p, tau - 1.0/p, pi2)


def compositeSample(n, params, implied=None, seed=None):
    """Draw from the composite distribution by inversion.

    Parameters
    ----------
    n : `int`
        Number of draws; must match the length of an array ``mu2``.
    params : `CompositeParams`
        Composite parameters.
    implied : `ImpliedQuantities`, optional
        Precomputed implied quantities.
    seed : `int`, optional
        Seed for `numpy.random.RandomState`.

    Returns
    -------
    sample : `numpy.ndarray`
        ``n`` positive draws; uniforms ``q <= r`` land in ``(0, u]``.
    """
    if n < 1:
        raise DomainError(f"Sample size must be at least 1; got {n}.")
    mu2 = np.asarray(params.mu2, dtype=float)
    if mu2.ndim > 0 and mu2.size != n:
        raise DomainError(f"Per-draw locations ({mu2.size}) do not match the sample size {n}.")
    rng = np.random.RandomState(seed)
    q = rng.uniform(np.finfo(float).tiny, 1.0, size=n)
    return np.atleast_1d(compositeVar(q, params, implied))
