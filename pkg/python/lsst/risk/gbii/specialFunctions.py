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
"""Special functions shared by the GBII, composite and regression code.

Thin, validated wrappers around `scipy.special` plus the pieces scipy does
not provide: a polished inverse of the regularized incomplete beta, the
regularized hypergeometric function 3F2 by truncated series, and the
derivatives of the log regularized incomplete beta with respect to its
shape arguments.
"""

__all__ = ["SeriesControl", "logBeta", "regIncBeta", "regIncBetaComplement", "invRegIncBeta",
           "digamma", "regHyp3F2", "logIncBetaGradient"]

import numpy as np
import scipy.special

import lsst.pex.config as pexConfig
from lsst.utils.logging import getLogger

from .exceptions import ConvergenceError, DomainError

_LOG = getLogger(__name__.partition(".")[2])

# Ratio of the largest partial-sum term to the result above which the
# alternating series has lost too many digits to be trusted.
_CANCELLATION_LIMIT = 1.0e8


class SeriesControl(pexConfig.Config):
    """Truncation control for the 3F2 series."""
    relTol = pexConfig.Field(
        dtype=float,
        default=1.0e-12,
        doc="Relative size of the last retained term at which the series stops.",
        check=lambda x: x > 0,
    )
    maxTerms = pexConfig.Field(
        dtype=int,
        default=10000,
        doc="Maximum number of series terms before a convergence error is raised.",
        check=lambda x: x >= 1,
    )


def _asResult(value):
    """Return a python float for 0-d input, the array otherwise."""
    value = np.asarray(value, dtype=float)
    if value.ndim == 0:
        return float(value)
    return value


def _checkShapes(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not np.all(a > 0) or not np.all(b > 0):
        raise DomainError(f"Beta shape arguments must be positive; got a={a}, b={b}.")
    return a, b


def logBeta(a, b):
    """Logarithm of the beta function.

    Parameters
    ----------
    a, b : `float` or `numpy.ndarray`
        Positive shape arguments.

    Returns
    -------
    value : `float` or `numpy.ndarray`
        ``ln Gamma(a) + ln Gamma(b) - ln Gamma(a+b)``.

    Raises
    ------
    DomainError
        Raised if any argument is not strictly positive.
    """
    a, b = _checkShapes(a, b)
    return _asResult(scipy.special.betaln(a, b))


def _checkUnitInterval(x, closed=True):
    x = np.asarray(x, dtype=float)
    if closed:
        valid = np.all((x >= 0.0) & (x <= 1.0))
    else:
        valid = np.all((x > 0.0) & (x < 1.0))
    if not valid:
        bounds = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"Argument must lie in {bounds}; got {x}.")
    return x


def regIncBeta(x, a, b):
    """Regularized incomplete beta function I_{a,b}(x).

    Parameters
    ----------
    x : `float` or `numpy.ndarray`
        Evaluation point(s) in [0, 1].
    a, b : `float` or `numpy.ndarray`
        Positive shape arguments.

    Returns
    -------
    value : `float` or `numpy.ndarray`
        The Beta(a, b) distribution function at ``x``.

    Raises
    ------
    DomainError
        Raised on out-of-range arguments.
    """
    x = _checkUnitInterval(x)
    a, b = _checkShapes(a, b)
    return _asResult(scipy.special.betainc(a, b, x))


def regIncBetaComplement(x, a, b):
    """Upper tail ``1 - I_{a,b}(x)``, accurate when I is close to one."""
    x = _checkUnitInterval(x)
    a, b = _checkShapes(a, b)
    return _asResult(scipy.special.betaincc(a, b, x))


def invRegIncBeta(q, a, b, tol=1.0e-12, maxIter=200):
    """Inverse of the regularized incomplete beta function.

    The scipy inverse is used as the starting point and polished by Newton
    steps safeguarded with bisection on a bracket that starts as [0, 1].

    Parameters
    ----------
    q : `float` or `numpy.ndarray`
        Probability level(s) in the open interval (0, 1).
    a, b : `float` or `numpy.ndarray`
        Positive shape arguments.
    tol : `float`, optional
        Absolute tolerance on ``I_{a,b}(x) - q``.
    maxIter : `int`, optional
        Maximum number of Newton/bisection iterations.

    Returns
    -------
    x : `float` or `numpy.ndarray`
        Point(s) with ``I_{a,b}(x) = q``.

    Raises
    ------
    DomainError
        Raised if ``q`` is not in (0, 1) or a shape is not positive.
    ConvergenceError
        Raised if the iteration stalls away from the target.
    """
    q = _checkUnitInterval(q, closed=False)
    a, b = _checkShapes(a, b)
    q, a, b = (np.array(v, dtype=float) for v in np.broadcast_arrays(q, a, b))
    scalar = q.ndim == 0
    q, a, b = np.atleast_1d(q), np.atleast_1d(a), np.atleast_1d(b)

    logB = scipy.special.betaln(a, b)
    x = scipy.special.betaincinv(a, b, q)
    lo = np.zeros_like(x)
    hi = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    residual = np.full(x.shape, np.inf)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(maxIter):
            residual = scipy.special.betainc(a, b, x) - q
            active &= np.abs(residual) > tol
            if not np.any(active):
                break
            lo = np.where(active & (residual < 0), x, lo)
            hi = np.where(active & (residual > 0), x, hi)
            logDensity = (a - 1.0)*np.log(x) + (b - 1.0)*np.log1p(-x) - logB
            newX = x - residual/np.exp(logDensity)
            outside = ~np.isfinite(newX) | (newX <= lo) | (newX >= hi)
            newX = np.where(outside, 0.5*(lo + hi), newX)
            stalled = active & (newX == x)
            x = np.where(active, newX, x)
            # No representable point closer to the target.
            active &= ~stalled
        else:
            active &= np.abs(residual) > tol

    if np.any(active) or np.any(np.abs(residual) > np.sqrt(tol)):
        bad = np.argmax(np.abs(residual))
        raise ConvergenceError(f"Inverse incomplete beta did not converge for q={q[bad]}, "
                               f"a={a[bad]}, b={b[bad]}: residual {residual[bad]:.3g}.")
    return float(x[0]) if scalar else x


def digamma(x):
    """Digamma function psi(x) for positive ``x``.

    Raises
    ------
    DomainError
        Raised if any ``x <= 0``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(x > 0):
        raise DomainError(f"Digamma argument must be positive; got {x}.")
    return _asResult(scipy.special.digamma(x))


def _hyp3F2Sum(a1, a2, a3, b1, b2, z, control):
    """Unregularized 3F2 partial sum, stopped under ``control``."""
    total = 1.0
    term = 1.0
    peak = 1.0
    for k in range(control.maxTerms):
        ratio = (a1 + k)*(a2 + k)*(a3 + k)*z/((b1 + k)*(b2 + k)*(k + 1.0))
        term *= ratio
        total += term
        peak = max(peak, abs(term))
        if term == 0.0:
            break
        if abs(ratio) < 1.0 and abs(term) <= control.relTol*abs(total)*(1.0 - abs(ratio)):
            break
    else:
        raise ConvergenceError(f"3F2({a1}, {a2}, {a3}; {b1}, {b2}; {z}) not converged "
                               f"after {control.maxTerms} terms.")
    if peak > _CANCELLATION_LIMIT*abs(total):
        raise ConvergenceError(f"3F2({a1}, {a2}, {a3}; {b1}, {b2}; {z}) lost precision to "
                               "cancellation.")
    return total


def regHyp3F2(a1, a2, a3, b1, b2, z, control=None):
    """Regularized generalized hypergeometric function 3F2~.

    Parameters
    ----------
    a1, a2, a3 : `float`
        Numerator parameters.
    b1, b2 : `float`
        Denominator parameters; must not be non-positive integers.
    z : `float`
        Argument in [0, 1).
    control : `SeriesControl`, optional
        Truncation control; the defaults are used if not supplied.

    Returns
    -------
    value : `float`
        ``sum_k (a1)_k (a2)_k (a3)_k z^k / (Gamma(b1+k) Gamma(b2+k) k!)``.

    Raises
    ------
    DomainError
        Raised on an invalid ``z`` or denominator parameter.
    ConvergenceError
        Raised if the series is not converged within ``control.maxTerms``.
    """
    if control is None:
        control = SeriesControl()
    if not 0.0 <= z < 1.0:
        raise DomainError(f"3F2 argument must lie in [0, 1); got {z}.")
    for bb in (b1, b2):
        if bb <= 0 and float(bb).is_integer():
            raise DomainError(f"3F2 denominator parameter {bb} is a non-positive integer.")
    total = _hyp3F2Sum(a1, a2, a3, b1, b2, z, control)
    sign = scipy.special.gammasgn(b1)*scipy.special.gammasgn(b2)
    return float(sign*total*np.exp(-scipy.special.gammaln(b1) - scipy.special.gammaln(b2)))


def _combine(first, second):
    """Sum two terms, refusing results dominated by cancellation."""
    total = first + second
    if max(abs(first), abs(second)) > _CANCELLATION_LIMIT*abs(total):
        raise ConvergenceError("Incomplete beta derivative lost precision to cancellation.")
    return total


def _logIncBeta(z, a, b, upper):
    if upper:
        return np.log(scipy.special.betaincc(a, b, z))
    return np.log(scipy.special.betainc(a, b, z))


def _finiteDifference(z, a, b, upper, wrt):
    if wrt == "a":
        h = 1.0e-6*a
        return (_logIncBeta(z, a + h, b, upper) - _logIncBeta(z, a - h, b, upper))/(2.0*h)
    h = 1.0e-6*b
    return (_logIncBeta(z, a, b + h, upper) - _logIncBeta(z, a, b - h, upper))/(2.0*h)


def logIncBetaGradient(z, a, b, upper=False, control=None):
    """Partial derivatives of ``log I_z(a, b)``.

    With ``upper`` the derivatives are those of ``log(1 - I_z(a, b))``.
    The shape derivatives at fixed ``z`` use the 3F2 representation and
    fall back to central differences when that series does not converge.

    Parameters
    ----------
    z : `float`
        Evaluation point in (0, 1).
    a, b : `float`
        Positive shape arguments.
    upper : `bool`, optional
        Differentiate the upper tail instead of the distribution function.
    control : `SeriesControl`, optional
        Truncation control for the series.

    Returns
    -------
    dA, dB, dZ : `float`
        Derivatives with respect to ``a``, ``b`` and ``z``.
    """
    if control is None:
        control = SeriesControl()
    if not 0.0 < z < 1.0:
        raise DomainError(f"Incomplete beta gradient needs z in (0, 1); got {z}.")
    a, b = float(a), float(b)
    logI = np.log(scipy.special.betainc(a, b, z))
    logJ = np.log(scipy.special.betaincc(a, b, z))
    logTarget = logJ if upper else logI
    logDensity = (a - 1.0)*np.log(z) + (b - 1.0)*np.log1p(-z) - scipy.special.betaln(a, b)
    dZ = np.exp(logDensity - logTarget)
    if upper:
        dZ = -dZ

    psiSum = scipy.special.digamma(a + b)
    try:
        seriesA = _hyp3F2Sum(a, a, 1.0 - b, a + 1.0, a + 1.0, z, control)
        logPrefA = (scipy.special.gammaln(a) + scipy.special.gammaln(a + b) - scipy.special.gammaln(b)
                    - 2.0*scipy.special.gammaln(a + 1.0) + a*np.log(z))
        direct = psiSum - scipy.special.digamma(a) + np.log(z)
        if upper:
            dA = _combine(-np.exp(logI - logJ)*direct, np.exp(logPrefA - logJ)*seriesA)
        else:
            dA = _combine(direct, -np.exp(logPrefA - logI)*seriesA)
    except ConvergenceError as e:
        _LOG.debug("Falling back to finite differences in a (a=%g, b=%g, z=%g): %s", a, b, z, e)
        dA = _finiteDifference(z, a, b, upper, "a")

    try:
        seriesB = _hyp3F2Sum(b, b, 1.0 - a, b + 1.0, b + 1.0, 1.0 - z, control)
        logPrefB = (scipy.special.gammaln(b) + scipy.special.gammaln(a + b) - scipy.special.gammaln(a)
                    - 2.0*scipy.special.gammaln(b + 1.0) + b*np.log1p(-z))
        direct = psiSum - scipy.special.digamma(b) + np.log1p(-z)
        if upper:
            dB = _combine(direct, -np.exp(logPrefB - logJ)*seriesB)
        else:
            dB = _combine(-np.exp(logJ - logI)*direct, np.exp(logPrefB - logI)*seriesB)
    except ConvergenceError as e:
        _LOG.debug("Falling back to finite differences in b (a=%g, b=%g, z=%g): %s", a, b, z, e)
        dB = _finiteDifference(z, a, b, upper, "b")

    return float(dA), float(dB), float(dZ)
