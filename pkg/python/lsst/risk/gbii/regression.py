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
"""Composite GBII regression with a varying threshold.

The tail location follows a log link, ``log mu2(x) = x^T beta``; the six
shapes enter through ``alpha = log(p1, p2, tau1, tau2, nu1, nu2)``.  Mode
matching then gives every observation its own head location ``mu1(x)`` and
threshold ``u(x)``, both proportional to ``mu2(x)``.

With head/tail assignments held fixed the log-likelihood is::

    l = -n log(omega) + n_tail log(phi) + sum_head log f1(y_i) + sum_tail log f2(y_i)

where ``omega`` and ``phi`` depend on the shapes only.
"""

__all__ = ["ALPHA_NAMES", "ShapeLayout", "CompositeGbiiLikelihood", "location", "threshold",
           "conditionalMoment", "logLikelihood", "gradLogLikelihood", "observationFits",
           "standardErrors", "parameterTable", "predictVar", "predictTvar", "RegressionModel",
           "FitReport", "CompositeGbiiRegressionConfig", "CompositeGbiiRegressionTask"]

import numpy as np
import scipy.special
import scipy.stats
from astropy.table import Table

import lsst.pex.config as pexConfig
import lsst.pipe.base as pipeBase

from .composite import (ROSTER, CompositeParams, compositeMoment, compositeTvar, compositeVar,
                        deriveImplied, logModeDensityFactor)
from .exceptions import (ConstraintError, DimensionError, DomainError, NonFiniteError,
                         RankDeficientError, SampleSizeError, SingularHessianError,
                         UnknownFamilyError)
from .fitProduct import FitProduct, fromBuiltin
from .gbii import SUBFAMILIES, gbiiLogPdf
from .solver import AugmentedLagrangianTask, ConstrainedProblem
from .specialFunctions import SeriesControl, logIncBetaGradient

ALPHA_NAMES = ("p1", "p2", "tau1", "tau2", "nu1", "nu2")

# Condition number of the observed information above which it is not inverted.
_MAX_CONDITION = 1.0e14


def _slotOf(name):
    return name[:-1], name[-1]


class ShapeLayout:
    """Map between the free shape parameters and the full ``alpha`` vector.

    Fixed subfamily slots contribute a constant ``log(value)``; tied slots
    (``tau = p`` or ``nu = p``) repeat the column of the slot they follow.
    ``alpha = matrix @ free + offset``.

    Parameters
    ----------
    headFamily, tailFamily : `str`
        Component subfamily tags.
    """
    def __init__(self, headFamily="GBII", tailFamily="GBII"):
        for tag in (headFamily, tailFamily):
            if tag not in SUBFAMILIES:
                raise UnknownFamilyError(f"Unknown component family '{tag}'.")
        self.headFamily = headFamily
        self.tailFamily = tailFamily

        rules = {"1": SUBFAMILIES[headFamily], "2": SUBFAMILIES[tailFamily]}
        self.freeNames = [name for name in ALPHA_NAMES if _slotOf(name)[0] not in rules[_slotOf(name)[1]]]
        self.freeIndices = np.array([ALPHA_NAMES.index(name) for name in self.freeNames], dtype=int)
        self.matrix = np.zeros((len(ALPHA_NAMES), len(self.freeNames)))
        self.offset = np.zeros(len(ALPHA_NAMES))
        self.fixed = {}
        for row, name in enumerate(ALPHA_NAMES):
            slot, component = _slotOf(name)
            rule = rules[component].get(slot)
            if rule is None:
                self.matrix[row, self.freeNames.index(name)] = 1.0
            elif isinstance(rule, str):
                owner = rule + component
                self.matrix[row, self.freeNames.index(owner)] = 1.0
                self.fixed[name] = owner
            else:
                self.offset[row] = np.log(rule)
                self.fixed[name] = float(rule)

    @classmethod
    def fromRoster(cls, family):
        try:
            head, tail = ROSTER[family]
        except KeyError:
            raise UnknownFamilyError(f"Unknown composite model '{family}'; "
                                     f"expected one of {sorted(ROSTER)}.") from None
        return cls(head, tail)

    @property
    def nFree(self):
        return len(self.freeNames)

    def toAlpha(self, free):
        return self.matrix @ np.asarray(free, dtype=float) + self.offset

    def fromAlpha(self, alpha):
        return np.asarray(alpha, dtype=float)[self.freeIndices]

    def chain(self, gradAlpha):
        """Gradient with respect to the free shapes from one in ``alpha``."""
        return self.matrix.T @ gradAlpha

    def constraintRows(self):
        """Rows of ``alpha`` summed by the two mode constraints: (p1, nu1) and (p2, nu2)."""
        return ((0, 4), (1, 5))

    def initialFree(self, alpha):
        """Project a starting ``alpha`` onto the layout, keeping it strictly feasible.

        A component with ``p nu < 1.2`` after fixing slots is moved to
        ``p nu = 2.4`` through its free ``p`` (or ``nu``) column.

        Raises
        ------
        ConstraintError
            Raised if neither ``p`` nor ``nu`` of an infeasible component is free.
        """
        free = self.fromAlpha(alpha)
        for rows in self.constraintRows():
            full = self.toAlpha(free)
            total = full[rows[0]] + full[rows[1]]
            if total >= np.log(1.2):
                continue
            weights = self.matrix[rows[0]] + self.matrix[rows[1]]
            columns = np.flatnonzero(weights)
            if columns.size == 0:
                raise ConstraintError(f"Slots {ALPHA_NAMES[rows[0]]} and {ALPHA_NAMES[rows[1]]} are "
                                      f"both fixed with product {np.exp(total):.6g} <= 1.")
            column = columns[0]
            free[column] += (np.log(2.4) - total)/weights[column]
        return free


def _asDesign(x, beta):
    beta = np.asarray(beta, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != beta.size:
        raise DimensionError(f"Covariate vector has {x.shape[-1]} entries but beta has {beta.size}.")
    return x, beta


def location(x, beta):
    """Tail location ``exp(x^T beta)``.

    Parameters
    ----------
    x : `numpy.ndarray`
        Covariate vector, or a design matrix with one row per observation.
    beta : `numpy.ndarray`
        Coefficients.

    Returns
    -------
    mu2 : `float` or `numpy.ndarray`
        Location(s).

    Raises
    ------
    DimensionError
        Raised if ``x`` and ``beta`` disagree in length.
    """
    x, beta = _asDesign(x, beta)
    value = np.exp(x @ beta)
    return float(value) if np.ndim(value) == 0 else value


def _compositeAt(x, beta, alpha, family="ComGBII"):
    try:
        head, tail = ROSTER[family]
    except KeyError:
        raise UnknownFamilyError(f"Unknown composite model '{family}'.") from None
    return CompositeParams.fromAlpha(location(x, beta), alpha, headFamily=head, tailFamily=tail)


def _familyAlpha(alpha, family):
    """Full ``alpha`` of a roster model from its free shapes or a full vector.

    Fixed and tied slots always come from the family's layout.
    """
    layout = ShapeLayout.fromRoster(family)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == layout.nFree:
        return layout.toAlpha(alpha)
    if alpha.size == len(ALPHA_NAMES):
        return layout.toAlpha(layout.fromAlpha(alpha))
    raise DimensionError(f"{family} takes {layout.nFree} free shapes or a full alpha of "
                         f"{len(ALPHA_NAMES)}; got {alpha.size}.")


def threshold(x, beta, alpha, family="ComGBII"):
    """Per-observation threshold ``mu2(x) ((p2 nu2 - 1)/(p2 tau2 + 1))^(1/p2)``.

    ``alpha`` is either the free shapes of ``family`` or a full
    ``log(p1, p2, tau1, tau2, nu1, nu2)``.

    Raises
    ------
    ConstraintError
        Raised if ``p2 nu2 <= 1`` (or ``p1 nu1 <= 1``).
    """
    return deriveImplied(_compositeAt(x, beta, _familyAlpha(alpha, family), family)).u


def conditionalMoment(h, x, beta, alpha, family="ComGBII"):
    """``E[Y^h | x]``, a shape-only factor times ``exp(x^T beta)^h``.

    ``alpha`` is read as in `threshold`.
    """
    params = _compositeAt(x, beta, _familyAlpha(alpha, family), family)
    return compositeMoment(h, params, deriveImplied(params))


def _prepare(response, design, beta, alpha, family):
    response = np.asarray(response, dtype=float)
    design = np.atleast_2d(np.asarray(design, dtype=float))
    if design.shape[0] != response.size:
        raise DimensionError(f"Design has {design.shape[0]} rows but there are {response.size} responses.")
    if not np.all(response > 0):
        raise DomainError("Responses must be positive.")
    params = _compositeAt(design, beta, alpha, family)
    return response, design, params, deriveImplied(params)


def logLikelihood(response, design, beta, alpha, family="ComGBII", headMask=None):
    """Log-likelihood of the composite GBII regression.

    Parameters
    ----------
    response : `numpy.ndarray`
        Positive losses.
    design : `numpy.ndarray`
        Design matrix, one row per loss.
    beta : `numpy.ndarray`
        Coefficients of the log tail location.
    alpha : `numpy.ndarray`
        ``log(p1, p2, tau1, tau2, nu1, nu2)``.
    family : `str`, optional
        Roster name; only tags the components.
    headMask : `numpy.ndarray` [`bool`], optional
        Frozen head assignments; defaults to ``y <= u(x)``.

    Returns
    -------
    loglik : `float`
        The log-likelihood.

    Raises
    ------
    ConstraintError
        Raised if a mode constraint fails.
    NonFiniteError
        Raised if the value is not finite.
    """
    response, design, params, implied = _prepare(response, design, beta, alpha, family)
    mask = response <= implied.u if headMask is None else np.asarray(headMask, dtype=bool)
    mu1 = np.broadcast_to(implied.mu1, response.shape)
    headTerms = gbiiLogPdf(response[mask], params.head(mu1[mask])) if np.any(mask) else np.zeros(0)
    tail = params.withMu2(np.atleast_1d(params.mu2)[~mask]) if np.any(~mask) else None
    tailTerms = gbiiLogPdf(response[~mask], tail.tail()) if tail is not None else np.zeros(0)
    nTail = int(np.sum(~mask))
    value = (-response.size*implied.logOmega + nTail*implied.logPhi
             + np.sum(headTerms) + np.sum(tailTerms))
    if not np.isfinite(value):
        raise NonFiniteError(f"Log-likelihood is not finite ({value}) at beta={beta}, alpha={alpha}.")
    return float(value)


def _componentScores(y, logMu, p, nu, tau):
    """Derivatives of log f_GBII in (p, nu, tau) and in log mu, per observation."""
    t = np.log(y) - logMu
    z = p*t
    slope = nu - (nu + tau)*scipy.special.expit(z)
    psiSum = scipy.special.digamma(nu + tau)
    dp = 1.0/p + t*slope
    dnu = psiSum - scipy.special.digamma(nu) - np.logaddexp(0.0, -z)
    dtau = psiSum - scipy.special.digamma(tau) - np.logaddexp(0.0, z)
    return np.array([dp.sum(), dnu.sum(), dtau.sum()]), -p*slope


def _modeDensityFactorGradient(p, nu, tau):
    psiSum = scipy.special.digamma(nu + tau)
    dp = 1.0/p + (nu + tau)/(p*(p*nu - 1.0)*(p*tau + 1.0))
    dnu = psiSum - scipy.special.digamma(nu) + np.log((p*nu - 1.0)/(p*(nu + tau))) + 1.0/(p*nu - 1.0)
    dtau = psiSum - scipy.special.digamma(tau) + np.log((p*tau + 1.0)/(p*(nu + tau))) - 1.0/(p*tau + 1.0)
    return np.array([dp, dnu, dtau])


def _modeMassGradient(p, nu, tau, upper, control):
    """Gradient in (p, nu, tau) of log F(u), or log(1 - F(u)) with ``upper``."""
    total = nu + tau
    pi = (p*nu - 1.0)/(p*total)
    dA, dB, dZ = logIncBetaGradient(pi, nu, tau, upper=upper, control=control)
    dPi = np.array([1.0/(p*p*total), (p*tau + 1.0)/(p*total**2), -(p*nu - 1.0)/(p*total**2)])
    return np.array([0.0, dA, dB]) + dZ*dPi


def _modeLocationGradient(p, nu, tau):
    """Gradient in (p, nu, tau) of ``log((p nu - 1)/(p tau + 1))/p``."""
    logG = np.log(p*nu - 1.0) - np.log(p*tau + 1.0)
    dp = -logG/p**2 + (nu/(p*nu - 1.0) - tau/(p*tau + 1.0))/p
    return np.array([dp, 1.0/(p*nu - 1.0), -1.0/(p*tau + 1.0)])


def gradLogLikelihood(response, design, beta, alpha, family="ComGBII", headMask=None, control=None):
    """Analytic gradient of `logLikelihood` with head assignments held fixed.

    Parameters
    ----------
    response, design, beta, alpha, family, headMask
        As for `logLikelihood`.
    control : `SeriesControl`, optional
        Series control for the incomplete beta derivatives.

    Returns
    -------
    gradient : `numpy.ndarray`
        Derivatives with respect to ``(beta, alpha)``, length ``len(beta) + 6``.
    """
    response, design, params, implied = _prepare(response, design, beta, alpha, family)
    mask = response <= implied.u if headMask is None else np.asarray(headMask, dtype=bool)
    n = response.size
    nTail = int(np.sum(~mask))
    p1, nu1, tau1 = params.p1, params.nu1, params.tau1
    p2, nu2, tau2 = params.p2, params.nu2, params.tau2

    logMu2 = design @ np.asarray(beta, dtype=float)
    logMu1 = np.log(np.broadcast_to(implied.mu1, response.shape))
    headSums, headLoc = _componentScores(response[mask], logMu1[mask], p1, nu1, tau1)
    tailSums, tailLoc = _componentScores(response[~mask], logMu2[~mask], p2, nu2, tau2)
    gradBeta = design[mask].T @ headLoc + design[~mask].T @ tailLoc

    dL1 = _modeDensityFactorGradient(p1, nu1, tau1)
    dL2 = _modeDensityFactorGradient(p2, nu2, tau2)
    dLogI1 = _modeMassGradient(p1, nu1, tau1, False, control)
    dLogJ2 = _modeMassGradient(p2, nu2, tau2, True, control)
    r, oneMinusR = implied.r, implied.oneMinusR
    # log mu1 = log mu2 + m2 - m1, so head locations move with every shape.
    headShift = headLoc.sum()
    gradHead = (-n*(r*dLogI1 + oneMinusR*dL1) + nTail*dL1 + headSums
                - headShift*_modeLocationGradient(p1, nu1, tau1))
    gradTail = (-n*oneMinusR*(dLogJ2 - dL2) - nTail*dL2 + tailSums
                + headShift*_modeLocationGradient(p2, nu2, tau2))

    # (p, nu, tau) per component to alpha order (p1, p2, tau1, tau2, nu1, nu2).
    gradShape = np.array([gradHead[0], gradTail[0], gradHead[2], gradTail[2], gradHead[1], gradTail[1]])
    gradAlpha = np.exp(np.asarray(alpha, dtype=float))*gradShape
    gradient = np.concatenate([gradBeta, gradAlpha])
    if not np.all(np.isfinite(gradient)):
        raise NonFiniteError(f"Log-likelihood gradient is not finite at beta={beta}, alpha={alpha}.")
    return gradient


class CompositeGbiiLikelihood(ConstrainedProblem):
    """Negative log-likelihood with the two mode constraints.

    The parameter vector is ``theta = (beta, free shapes)``.  Head
    assignments are frozen by `updateState` and reused until the next call.

    Parameters
    ----------
    response : `numpy.ndarray`
        Positive losses.
    design : `numpy.ndarray`
        Design matrix.
    layout : `ShapeLayout`
        Free/fixed shape layout.
    family : `str`
        Roster name.
    epsilon1, epsilon2 : `float`
        Slack of ``log(p1 nu1) >= epsilon1`` and ``log(p2 nu2) >= epsilon2``.
    control : `SeriesControl`, optional
        Series control for the gradient.
    """
    def __init__(self, response, design, layout, family="ComGBII", epsilon1=1.0e-5, epsilon2=1.0e-5,
                 control=None):
        self.response = np.asarray(response, dtype=float)
        self.design = np.atleast_2d(np.asarray(design, dtype=float))
        self.layout = layout
        self.family = family
        self.epsilon = np.array([epsilon1, epsilon2])
        self.control = control
        self.nBeta = self.design.shape[1]
        self.headMask = None

    def split(self, theta):
        """Return ``(beta, alpha)`` for a parameter vector."""
        theta = np.asarray(theta, dtype=float)
        return theta[:self.nBeta], self.layout.toAlpha(theta[self.nBeta:])

    def objective(self, theta):
        beta, alpha = self.split(theta)
        try:
            return -logLikelihood(self.response, self.design, beta, alpha, self.family, self.headMask)
        except (ConstraintError, DomainError, NonFiniteError):
            return np.inf

    def gradient(self, theta):
        beta, alpha = self.split(theta)
        full = gradLogLikelihood(self.response, self.design, beta, alpha, self.family, self.headMask,
                                 self.control)
        return -np.concatenate([full[:self.nBeta], self.layout.chain(full[self.nBeta:])])

    def constraints(self, theta):
        _, alpha = self.split(theta)
        return np.array([self.epsilon[k] - (alpha[i] + alpha[j])
                         for k, (i, j) in enumerate(self.layout.constraintRows())])

    def constraintJacobian(self, theta):
        jacobian = np.zeros((2, self.nBeta + self.layout.nFree))
        for k, (i, j) in enumerate(self.layout.constraintRows()):
            jacobian[k, self.nBeta:] = -(self.layout.matrix[i] + self.layout.matrix[j])
        return jacobian

    def updateState(self, theta):
        beta, alpha = self.split(theta)
        try:
            u = threshold(self.design, beta, alpha, self.family)
        except (ConstraintError, DomainError):
            return False
        mask = self.response <= u
        changed = self.headMask is None or not np.array_equal(mask, self.headMask)
        self.headMask = mask
        return changed

    def resetState(self):
        self.headMask = None


def _numericHessian(problem, theta, step):
    nParams = theta.size
    hessian = np.empty((nParams, nParams))
    for i in range(nParams):
        h = step*max(1.0, abs(theta[i]))
        shift = np.zeros(nParams)
        shift[i] = h
        hessian[i] = (problem.gradient(theta + shift) - problem.gradient(theta - shift))/(2.0*h)
    return 0.5*(hessian + hessian.T)


def standardErrors(model, response, design, step=1.0e-5, control=None):
    """Covariance of the free parameters from the observed information.

    The information matrix is the central-difference Jacobian of the
    analytic gradient of the negative log-likelihood, with head assignments
    frozen at the estimate.

    Parameters
    ----------
    model : `RegressionModel`
        Fitted model.
    response : `numpy.ndarray`
        Losses used in the fit.
    design : `numpy.ndarray`
        Design matrix used in the fit.
    step : `float`, optional
        Relative difference step.
    control : `SeriesControl`, optional
        Series control for the gradient.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``covariance``, ``stdErr`` and ``conditionNumber``.

    Raises
    ------
    SingularHessianError
        Raised if the information matrix is ill-conditioned or its inverse
        has a non-positive diagonal.
    """
    problem = CompositeGbiiLikelihood(response, design, model.layout, model.family,
                                      model.epsilon1, model.epsilon2, control)
    theta = model.theta
    problem.updateState(theta)
    information = _numericHessian(problem, theta, step)
    conditionNumber = float(np.linalg.cond(information))
    if not np.isfinite(conditionNumber) or conditionNumber > _MAX_CONDITION:
        raise SingularHessianError(f"Observed information is singular (condition number "
                                   f"{conditionNumber:.3g}).", conditionNumber)
    covariance = np.linalg.inv(information)
    variance = np.diag(covariance)
    if np.any(variance <= 0):
        bad = [model.freeNames[i] for i in np.flatnonzero(variance <= 0)]
        raise SingularHessianError(f"Non-positive variance for {bad}; the estimate is not an interior "
                                   "maximum.", conditionNumber)
    return pipeBase.Struct(covariance=covariance, stdErr=np.sqrt(variance),
                           conditionNumber=conditionNumber)


def _deltaJacobian(function, theta, step):
    columns = []
    for i in range(theta.size):
        h = step*max(1.0, abs(theta[i]))
        shift = np.zeros(theta.size)
        shift[i] = h
        columns.append((np.asarray(function(theta + shift)) - np.asarray(function(theta - shift)))/(2.0*h))
    return np.column_stack(columns)


def _row(name, scale, estimate, stdErr):
    estimate = float(estimate)
    if stdErr is None or not np.isfinite(stdErr):
        return {"name": name, "scale": scale, "estimate": estimate, "stdErr": None,
                "zValue": None, "pValue": None}
    zValue = estimate/stdErr
    return {"name": name, "scale": scale, "estimate": estimate, "stdErr": float(stdErr),
            "zValue": float(zValue), "pValue": float(2.0*scipy.stats.norm.sf(abs(zValue)))}


def parameterTable(model, reference=None, step=1.0e-6):
    """Estimation table with delta-method errors.

    Rows are the coefficients, the natural-scale shapes (fixed slots with
    no error, tied slots with the error of the slot they follow), ``mu2``
    for an intercept-only model, and the implied ``mu1``, ``u`` and ``r``
    at ``reference``.

    Parameters
    ----------
    model : `RegressionModel`
        Fitted model; without a covariance every error is `None`.
    reference : `numpy.ndarray`, optional
        Covariate vector at which ``mu1`` and ``u`` are reported; defaults
        to the intercept alone.
    step : `float`, optional
        Relative step of the delta-method Jacobian.

    Returns
    -------
    rows : `list` [`dict`]
        One dictionary per row with ``name``, ``scale``, ``estimate``,
        ``stdErr``, ``zValue`` and ``pValue``.
    """
    nBeta = model.beta.size
    if reference is None:
        reference = np.zeros(nBeta)
        reference[0] = 1.0
    covariance = model.covariance
    stdErr = (np.sqrt(np.diag(covariance)) if covariance is not None
              else np.full(model.theta.size, np.nan))
    rows = [_row(name, "coefficient", value, se)
            for name, value, se in zip(model.covariateNames, model.beta, stdErr[:nBeta])]

    shapeErr = dict(zip(model.layout.freeNames, stdErr[nBeta:]))
    for index, name in enumerate(ALPHA_NAMES):
        value = np.exp(model.alpha[index])
        rule = model.layout.fixed.get(name)
        if isinstance(rule, float):
            rows.append(_row(name, "fixed", value, None))
        else:
            rows.append(_row(name, "natural", value, value*shapeErr[rule or name]))

    def _implied(theta):
        beta = theta[:nBeta]
        alpha = model.layout.toAlpha(theta[nBeta:])
        implied = deriveImplied(_compositeAt(reference, beta, alpha, model.family))
        return np.array([location(reference, beta), implied.mu1, implied.u, implied.r])

    values = _implied(model.theta)
    impliedErr = np.full(values.size, np.nan)
    if covariance is not None:
        try:
            jacobian = _deltaJacobian(_implied, model.theta, step)
            impliedErr = np.sqrt(np.maximum(np.diag(jacobian @ covariance @ jacobian.T), 0.0))
        except (ConstraintError, DomainError):
            # Estimate on the constraint boundary.
            pass
    names = ["mu2", "mu1", "u", "r"]
    for k, name in enumerate(names):
        if name == "mu2" and not model.interceptOnly:
            continue
        rows.append(_row(name, "implied", values[k], impliedErr[k]))
    return rows


def observationFits(model, design, response):
    """Per-observation tail location, threshold and component.

    Returns
    -------
    table : `astropy.table.Table`
        Columns ``mu2``, ``u`` and ``component`` (``head`` or ``tail``);
        the metadata holds the threshold range.
    """
    params = model.params(design)
    implied = deriveImplied(params)
    mu2 = np.atleast_1d(params.mu2)
    u = np.broadcast_to(implied.u, mu2.shape)
    response = np.asarray(response, dtype=float)
    component = np.where(response <= u, "head", "tail")
    table = Table({"mu2": mu2, "u": np.array(u), "component": component})
    table.meta = {"U_MIN": float(np.min(u)), "U_MAX": float(np.max(u)),
                  "N_TAIL": int(np.sum(component == "tail"))}
    return table


def predictVar(model, x, q):
    """Value-at-risk of the fitted model at covariates ``x`` and level ``q``."""
    params = model.params(x)
    return compositeVar(q, params, deriveImplied(params))


def predictTvar(model, x, q):
    """Tail value-at-risk of the fitted model at covariates ``x`` and level ``q``."""
    params = model.params(x)
    return compositeTvar(q, params, deriveImplied(params))


class RegressionModel(FitProduct):
    """A fitted composite GBII regression.

    Parameters
    ----------
    family : `str`
        Roster name of the composite model.
    covariateNames : `list` [`str`]
        Names of the design columns, intercept first.
    beta : `numpy.ndarray`
        Coefficients of ``log mu2``.
    alpha : `numpy.ndarray`
        ``log(p1, p2, tau1, tau2, nu1, nu2)``, fixed slots included.
    covariance : `numpy.ndarray`, optional
        Covariance of ``(beta, free shapes)``.
    """
    _PRODUCT_TYPE = "COMPOSITE_GBII_MODEL"
    _SCHEMA = "Composite GBII regression"
    _VERSION = 1.0

    def __init__(self, family="ComGBII", covariateNames=None, beta=None, alpha=None, covariance=None,
                 nll=np.nan, converged=False, status="unknown", nObs=0, epsilon1=1.0e-5,
                 epsilon2=1.0e-5, config=None, **kwargs):
        self.family = family
        self.layout = ShapeLayout.fromRoster(family)
        self.beta = np.atleast_1d(np.asarray(beta if beta is not None else [0.0], dtype=float))
        self.covariateNames = (list(covariateNames) if covariateNames is not None
                               else [f"x{i}" for i in range(self.beta.size)])
        if len(self.covariateNames) != self.beta.size:
            raise DimensionError(f"{len(self.covariateNames)} covariate names for {self.beta.size} "
                                 "coefficients.")
        self.alpha = (np.asarray(alpha, dtype=float) if alpha is not None
                      else self.layout.toAlpha(self.layout.initialFree(np.zeros(6))))
        self.covariance = None if covariance is None else np.asarray(covariance, dtype=float)
        self.nll = float(nll)
        self.converged = bool(converged)
        self.status = status
        self.nObs = int(nObs)
        self.epsilon1 = float(epsilon1)
        self.epsilon2 = float(epsilon2)
        self.config = dict(config) if config else {}
        super().__init__(**kwargs)
        self.requiredAttributes.update(["family", "covariateNames", "beta", "alpha", "covariance",
                                        "nll", "converged", "status", "nObs"])

    @property
    def freeNames(self):
        return self.covariateNames + self.layout.freeNames

    @property
    def theta(self):
        return np.concatenate([self.beta, self.layout.fromAlpha(self.alpha)])

    @property
    def nFree(self):
        return self.theta.size

    @property
    def interceptOnly(self):
        return self.beta.size == 1

    def params(self, x):
        """Composite parameters at covariate vector(s) ``x``."""
        return _compositeAt(x, self.beta, self.alpha, self.family)

    def location(self, x):
        return location(x, self.beta)

    def threshold(self, x):
        return threshold(x, self.beta, self.alpha, self.family)

    @classmethod
    def fromDict(cls, dictionary):
        """Construct a model from a dictionary of properties.

        Raises
        ------
        RuntimeError
            Raised if the dictionary holds a different product.
        """
        cls._checkProductType(dictionary)
        covariance = dictionary.get("covariance")
        model = cls(family=dictionary["family"],
                    covariateNames=dictionary["covariateNames"],
                    beta=dictionary["beta"],
                    alpha=dictionary["alpha"],
                    covariance=(np.array([[fromBuiltin(v) for v in row] for row in covariance])
                                if covariance is not None else None),
                    nll=fromBuiltin(dictionary.get("nll")),
                    converged=dictionary.get("converged", False),
                    status=dictionary.get("status", "unknown"),
                    nObs=dictionary.get("nObs", 0),
                    epsilon1=dictionary.get("epsilon", [1.0e-5, 1.0e-5])[0],
                    epsilon2=dictionary.get("epsilon", [1.0e-5, 1.0e-5])[1],
                    config=dictionary.get("config"))
        model.setMetadata(dictionary.get("metadata", {}))
        return model

    def toDict(self):
        """Return a dictionary that round-trips through `fromDict`."""
        self.updateMetadata()
        return {"metadata": self.getMetadata(),
                "family": self.family,
                "headFamily": self.layout.headFamily,
                "tailFamily": self.layout.tailFamily,
                "covariateNames": list(self.covariateNames),
                "beta": self.beta,
                "alpha": self.alpha,
                "alphaNames": list(ALPHA_NAMES),
                "freeParameters": self.freeNames,
                "fixedSlots": dict(self.layout.fixed),
                "covariance": self.covariance,
                "nll": self.nll,
                "converged": self.converged,
                "status": self.status,
                "nObs": self.nObs,
                "epsilon": [self.epsilon1, self.epsilon2],
                "config": self.config}

    @classmethod
    def fromTable(cls, tableList):
        table = tableList[0]
        meta = dict(table.meta)
        names = [str(name) for name in table["NAME"]]
        values = np.array(table["VALUE"], dtype=float)
        nBeta = int(meta["N_BETA"])
        inDict = {"metadata": meta.get("metadata", {}),
                  "family": meta["FAMILY"],
                  "covariateNames": names[:nBeta],
                  "beta": values[:nBeta],
                  "alpha": values[nBeta:],
                  "covariance": meta.get("COVARIANCE"),
                  "nll": meta.get("NLL"),
                  "converged": meta.get("CONVERGED", False),
                  "status": meta.get("STATUS", "unknown"),
                  "nObs": meta.get("N_OBS", 0),
                  "epsilon": meta.get("EPSILON", [1.0e-5, 1.0e-5])}
        return cls.fromDict(inDict)

    def toTable(self):
        self.updateMetadata()
        table = Table({"NAME": self.covariateNames + list(ALPHA_NAMES),
                       "VALUE": np.concatenate([self.beta, self.alpha])})
        covariance = self.covariance.tolist() if self.covariance is not None else None
        table.meta = {"metadata": self.getMetadata(), "FAMILY": self.family, "N_BETA": self.beta.size,
                      "COVARIANCE": covariance, "NLL": self.nll, "CONVERGED": self.converged,
                      "STATUS": self.status, "N_OBS": self.nObs,
                      "EPSILON": [self.epsilon1, self.epsilon2]}
        return [table]


class FitReport(FitProduct):
    """Summary of one regression fit: estimates, information criteria and the solver trace."""
    _PRODUCT_TYPE = "COMPOSITE_GBII_FIT_REPORT"
    _SCHEMA = "Composite GBII fit report"
    _VERSION = 1.0

    def __init__(self, family="ComGBII", estimates=None, nll=np.nan, aic=np.nan, bic=np.nan, nFree=0,
                 nObs=0, converged=False, status="unknown", nOuter=0, trace=None, thresholdMin=np.nan,
                 thresholdMax=np.nan, conditionNumber=np.nan, **kwargs):
        self.family = family
        self.estimates = list(estimates) if estimates else []
        self.nll = float(nll)
        self.aic = float(aic)
        self.bic = float(bic)
        self.nFree = int(nFree)
        self.nObs = int(nObs)
        self.converged = bool(converged)
        self.status = status
        self.nOuter = int(nOuter)
        self.trace = list(trace) if trace else []
        self.thresholdMin = float(thresholdMin)
        self.thresholdMax = float(thresholdMax)
        self.conditionNumber = float(conditionNumber)
        super().__init__(**kwargs)
        self.requiredAttributes.update(["family", "estimates", "nll", "aic", "bic", "nFree", "nObs",
                                        "converged", "status", "nOuter"])

    @classmethod
    def fromDict(cls, dictionary):
        cls._checkProductType(dictionary)
        report = cls(family=dictionary["family"],
                     estimates=dictionary.get("estimates"),
                     nll=fromBuiltin(dictionary.get("nll")),
                     aic=fromBuiltin(dictionary.get("aic")),
                     bic=fromBuiltin(dictionary.get("bic")),
                     nFree=dictionary.get("nFree", 0),
                     nObs=dictionary.get("nObs", 0),
                     converged=dictionary.get("converged", False),
                     status=dictionary.get("status", "unknown"),
                     nOuter=dictionary.get("nOuter", 0),
                     trace=dictionary.get("trace"),
                     thresholdMin=fromBuiltin(dictionary.get("thresholdMin")),
                     thresholdMax=fromBuiltin(dictionary.get("thresholdMax")),
                     conditionNumber=fromBuiltin(dictionary.get("conditionNumber")))
        report.setMetadata(dictionary.get("metadata", {}))
        return report

    def toDict(self):
        self.updateMetadata()
        return {"metadata": self.getMetadata(), "family": self.family, "estimates": self.estimates,
                "nll": self.nll, "aic": self.aic, "bic": self.bic, "nFree": self.nFree,
                "nObs": self.nObs, "converged": self.converged, "status": self.status,
                "nOuter": self.nOuter, "trace": self.trace, "thresholdMin": self.thresholdMin,
                "thresholdMax": self.thresholdMax, "conditionNumber": self.conditionNumber}

    @classmethod
    def fromTable(cls, tableList):
        table = tableList[0]
        meta = dict(table.meta)
        estimates = [{"name": str(row["name"]), "scale": str(row["scale"]),
                      **{key: (None if np.ma.is_masked(row[key]) or not np.isfinite(row[key])
                               else float(row[key]))
                         for key in ("estimate", "stdErr", "zValue", "pValue")}}
                     for row in table]
        inDict = dict(meta)
        inDict["estimates"] = estimates
        return cls.fromDict(inDict)

    def toTable(self):
        """Estimates as one table; the scalar summaries travel in the metadata."""
        self.updateMetadata()
        columns = {key: [row[key] for row in self.estimates] for key in ("name", "scale")}
        for key in ("estimate", "stdErr", "zValue", "pValue"):
            columns[key] = np.array([fromBuiltin(row[key]) for row in self.estimates], dtype=float)
        table = Table(columns)
        summary = self.toDict()
        summary.pop("estimates")
        summary.pop("trace")
        table.meta = summary
        return [table]

    def traceTable(self):
        """Solver trace as an `astropy.table.Table`."""
        if not self.trace:
            return Table()
        return Table({key: [record.get(key) for record in self.trace] for key in self.trace[0]})


class CompositeGbiiRegressionConfig(pexConfig.Config):
    """Configuration for fitting a composite GBII regression."""
    family = pexConfig.ChoiceField(
        dtype=str,
        default="ComGBII",
        doc="Composite model to fit.",
        allowed={
            "ComGBII": "GBII head and GBII tail.",
            "GBIIG": "GBII head, tail with nu2 = 1/2.",
            "BIIG": "Beta-II head, tail with nu2 = 1/2.",
            "BG": "Burr head, tail with nu2 = 1/2.",
            "IBG": "Inverse Burr head, tail with nu2 = 1/2.",
            "PG": "Paralogistic head, tail with nu2 = 1/2.",
            "IPG": "Inverse paralogistic head, tail with nu2 = 1/2.",
        },
    )
    epsilon1 = pexConfig.Field(
        dtype=float,
        default=1.0e-5,
        doc="Slack of the head mode constraint log(p1) + log(nu1) >= epsilon1.",
        check=lambda x: x > 0,
    )
    epsilon2 = pexConfig.Field(
        dtype=float,
        default=1.0e-5,
        doc="Slack of the tail mode constraint log(p2) + log(nu2) >= epsilon2.",
        check=lambda x: x > 0,
    )
    initialAlpha = pexConfig.ListField(
        dtype=float,
        default=[float(v) for v in np.log([2.0, 2.0, 1.5, 1.5, 1.2, 1.2])],
        doc="Starting log(p1, p2, tau1, tau2, nu1, nu2); fixed slots are overridden.",
        length=6,
    )
    solver = pexConfig.ConfigurableField(
        target=AugmentedLagrangianTask,
        doc="Constrained maximum-likelihood solver.",
    )
    series = pexConfig.ConfigField(
        dtype=SeriesControl,
        doc="Series control for the incomplete beta derivatives.",
    )
    seed = pexConfig.Field(
        dtype=int,
        default=0,
        doc="Seed of the restart jitter.",
    )
    doStandardErrors = pexConfig.Field(
        dtype=bool,
        default=True,
        doc="Compute the covariance from the observed information?",
    )
    hessianStep = pexConfig.RangeField(
        dtype=float,
        default=1.0e-5,
        min=0.0,
        inclusiveMin=False,
        doc="Relative central-difference step of the observed information.",
    )

    def setDefaults(self):
        super().setDefaults()
        self.solver.restarts = 5


class CompositeGbiiRegressionTask(pipeBase.Task):
    """Fit a composite GBII regression by constrained maximum likelihood.

    Coefficients start from ordinary least squares of ``log y`` on the
    design, the shapes from ``config.initialAlpha`` moved into the strictly
    feasible region.
    """
    ConfigClass = CompositeGbiiRegressionConfig
    _DefaultName = "compositeGbiiRegression"

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.makeSubtask("solver")

    def run(self, response, design, covariateNames=None, initialBeta=None, initialAlpha=None):
        """Fit the model.

        Parameters
        ----------
        response : `numpy.ndarray`
            Positive losses.
        design : `numpy.ndarray`
            Design matrix, intercept column first.
        covariateNames : `list` [`str`], optional
            Column names of the design.
        initialBeta, initialAlpha : `numpy.ndarray`, optional
            Warm start replacing the least-squares coefficients and
            ``config.initialAlpha``.

        Returns
        -------
        result : `lsst.pipe.base.Struct`
            Result struct with components:

            - ``model`` : fitted model (`RegressionModel`).
            - ``report`` : estimates and diagnostics (`FitReport`).
            - ``observations`` : per-observation fits (`astropy.table.Table`).
            - ``converged`` : solver convergence flag (`bool`).

        Raises
        ------
        SampleSizeError
            Raised unless there are more observations than ``len(beta) + 6``.
        RankDeficientError
            Raised if the design matrix is rank deficient.
        DomainError
            Raised on non-positive responses.
        """
        from .diagnostics import aicBic

        config = self.config
        response = np.asarray(response, dtype=float)
        design = np.asarray(design, dtype=float)
        if design.ndim == 1:
            design = design[:, np.newaxis]
        if design.shape[0] != response.size:
            raise DimensionError(f"Design has {design.shape[0]} rows for {response.size} responses.")
        nObs, nBeta = design.shape
        if nObs <= nBeta + 6:
            raise SampleSizeError(f"Need more than {nBeta + 6} observations for {nBeta} coefficients; "
                                  f"got {nObs}.")
        if not np.all(response > 0) or not np.all(np.isfinite(response)):
            raise DomainError("Responses must be positive and finite.")
        rank = np.linalg.matrix_rank(design)
        if rank < nBeta:
            raise RankDeficientError(f"Design matrix has rank {rank} < {nBeta} columns.")
        if covariateNames is None:
            covariateNames = ["intercept"] + [f"x{i}" for i in range(1, nBeta)]

        layout = ShapeLayout.fromRoster(config.family)
        if initialBeta is None:
            initialBeta, *_ = np.linalg.lstsq(design, np.log(response), rcond=None)
        if initialAlpha is None:
            initialAlpha = config.initialAlpha
        theta0 = np.concatenate([np.asarray(initialBeta, dtype=float), layout.initialFree(initialAlpha)])
        problem = CompositeGbiiLikelihood(response, design, layout, config.family, config.epsilon1,
                                          config.epsilon2, config.series)
        self.log.info("Fitting %s to %d losses with %d coefficients and %d free shapes.",
                      config.family, nObs, nBeta, layout.nFree)
        solution = self.solver.run(problem, theta0, seed=config.seed)
        if not solution.converged:
            self.log.warning("Solver did not converge for %s (%s after %d outer iterations); "
                             "reporting the best iterate.", config.family, solution.status, solution.nOuter)

        beta, alpha = problem.split(solution.theta)
        nll = -logLikelihood(response, design, beta, alpha, config.family)
        model = RegressionModel(family=config.family, covariateNames=covariateNames, beta=beta,
                                alpha=alpha, nll=nll, converged=solution.converged,
                                status=solution.status, nObs=nObs, epsilon1=config.epsilon1,
                                epsilon2=config.epsilon2, config=config.toDict())

        conditionNumber = np.nan
        if config.doStandardErrors:
            try:
                errors = standardErrors(model, response, design, step=config.hessianStep,
                                        control=config.series)
                model.covariance = errors.covariance
                conditionNumber = errors.conditionNumber
            except (SingularHessianError, ConstraintError, NonFiniteError) as e:
                self.log.warning("Standard errors unavailable for %s: %s", config.family, e)

        observations = observationFits(model, design, response)
        criteria = aicBic(nll, model.nFree, nObs)
        report = FitReport(family=config.family, estimates=parameterTable(model), nll=nll,
                           aic=criteria.aic, bic=criteria.bic, nFree=model.nFree, nObs=nObs,
                           converged=solution.converged, status=solution.status,
                           nOuter=solution.nOuter, trace=solution.trace,
                           thresholdMin=observations.meta["U_MIN"],
                           thresholdMax=observations.meta["U_MAX"], conditionNumber=conditionNumber)
        self.log.info("%s: NLL %.4f, AIC %.4f, BIC %.4f, status %s.", config.family, nll, criteria.aic,
                      criteria.bic, solution.status)
        return pipeBase.Struct(model=model, report=report, observations=observations,
                               converged=solution.converged)
