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
"""Augmented Lagrangian solver for inequality-constrained minimisation.

The problem is ``min f(theta)`` subject to ``h_k(theta) <= 0``.  Each outer
iteration minimises::

    L_rho(theta) = f(theta) + sum_k lambda_k h_k(theta) + (rho/2) sum_k max(0, h_k(theta))^2

with a limited-memory BFGS inner solver, then updates the multipliers
``lambda_k <- max(0, lambda_k + m rho h_k)`` and the penalty
``rho <- c rho``.
"""

__all__ = ["ConstrainedProblem", "SolverState", "AugmentedLagrangianConfig",
           "AugmentedLagrangianTask", "augmentedObjective", "augmentedGradient",
           "minimizeLbfgs", "solve"]

import abc
import collections

import numpy as np

import lsst.pex.config as pexConfig
import lsst.pipe.base as pipeBase

from .exceptions import ConstraintError, ConvergenceError

# Relative size of objective changes treated as rounding by the line search.
_ROUNDING = 1.0e-12


class ConstrainedProblem(abc.ABC):
    """Interface of a problem handed to `AugmentedLagrangianTask`.

    ``objective`` may return ``inf`` outside its domain; the inner line
    search then backtracks.
    """

    @abc.abstractmethod
    def objective(self, theta):
        """Objective to minimise."""
        raise NotImplementedError

    @abc.abstractmethod
    def gradient(self, theta):
        """Gradient of `objective`."""
        raise NotImplementedError

    @abc.abstractmethod
    def constraints(self, theta):
        """Constraint values ``h(theta)``; feasible where all are <= 0."""
        raise NotImplementedError

    @abc.abstractmethod
    def constraintJacobian(self, theta):
        """Jacobian of `constraints`, shape (n_constraints, n_parameters)."""
        raise NotImplementedError

    def updateState(self, theta):
        """Refresh any state frozen for the next inner solve.

        Returns
        -------
        changed : `bool`
            `True` if the frozen state differs from the previous one; the
            solver does not declare convergence in that iteration.
        """
        return False

    def resetState(self):
        """Forget frozen state before a new start."""
        pass


class SolverState:
    """Multipliers, penalty and iterate of the outer loop."""
    def __init__(self, lambdas, rho, iterate, gradNorm=np.inf):
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.rho = float(rho)
        self.iterate = np.asarray(iterate, dtype=float)
        self.gradNorm = float(gradNorm)

    def toRecord(self, outer, objective, maxViolation, innerStatus, innerIterations):
        """Structured trace record of one outer iteration."""
        record = {"iteration": outer, "objective": float(objective), "gradNorm": self.gradNorm,
                  "maxViolation": float(maxViolation), "rho": self.rho,
                  "innerStatus": innerStatus, "innerIterations": int(innerIterations)}
        for index, value in enumerate(self.lambdas):
            record[f"lambda{index + 1}"] = float(value)
        return record

    def updateMultipliers(self, h, factor=1.0):
        """Step the multipliers, ``lambda <- max(0, lambda + factor*rho*h)``.

        Parameters
        ----------
        h : array-like
            Constraint values at the inner solution.
        factor : `float`, optional
            Step in units of the current penalty.

        Returns
        -------
        lambdas : `numpy.ndarray`
            The new multipliers, also stored on the state.
        """
        self.lambdas = np.maximum(0.0, self.lambdas + factor*self.rho*np.asarray(h, dtype=float))
        return self.lambdas


def _gradientTolerance(tol, value, relative):
    return tol*max(1.0, abs(value)) if relative else tol


def augmentedObjective(theta, lambdas, rho, problem):
    """Augmented Lagrangian ``L_rho`` at ``theta``.

    Parameters
    ----------
    theta : `numpy.ndarray`
        Parameter vector.
    lambdas : `numpy.ndarray`
        Non-negative multipliers, one per constraint.
    rho : `float`
        Penalty parameter.
    problem : `ConstrainedProblem`
        The problem.

    Returns
    -------
    value : `float`
        ``f + lambda.h + (rho/2) |max(0, h)|^2``.
    """
    value = problem.objective(theta)
    if not np.isfinite(value):
        return np.inf
    h = np.asarray(problem.constraints(theta), dtype=float)
    return float(value + np.dot(lambdas, h) + 0.5*rho*np.sum(np.maximum(0.0, h)**2))


def augmentedGradient(theta, lambdas, rho, problem):
    """Gradient of `augmentedObjective` with respect to ``theta``."""
    h = np.asarray(problem.constraints(theta), dtype=float)
    jacobian = np.atleast_2d(problem.constraintJacobian(theta))
    return problem.gradient(theta) + jacobian.T @ (lambdas + rho*np.maximum(0.0, h))


def _twoLoop(gradient, sHistory, yHistory):
    q = gradient.copy()
    alphas = []
    for s, y in zip(reversed(sHistory), reversed(yHistory)):
        rhoK = 1.0/np.dot(y, s)
        a = rhoK*np.dot(s, q)
        alphas.append((rhoK, a))
        q -= a*y
    if sHistory:
        s, y = sHistory[-1], yHistory[-1]
        q *= np.dot(s, y)/np.dot(y, y)
    for (s, y), (rhoK, a) in zip(zip(sHistory, yHistory), reversed(alphas)):
        b = rhoK*np.dot(y, q)
        q += (a - b)*s
    return q


def minimizeLbfgs(fun, grad, x0, tol=1.0e-8, maxIter=500, historySize=10, relative=False):
    """Limited-memory BFGS with Armijo backtracking.

    Non-finite trial values are rejected by the line search, so ``fun`` may
    return ``inf`` outside its domain.  Once function differences are lost
    in rounding, a trial step is also accepted if it leaves ``fun`` within
    rounding of the current value and reduces the gradient norm.

    Parameters
    ----------
    fun, grad : callable
        Objective and its gradient.
    x0 : `numpy.ndarray`
        Starting point; ``fun(x0)`` must be finite.
    tol : `float`, optional
        Stop when ``|grad| <= tol``.
    maxIter : `int`, optional
        Iteration cap.
    historySize : `int`, optional
        Number of correction pairs kept.
    relative : `bool`, optional
        Scale ``tol`` by ``max(1, |fun|)``.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``x``, ``fun``, ``grad``, ``nIter`` and ``status`` (one of
        ``converged``, ``linesearch``, ``maxiter``).

    Raises
    ------
    ConvergenceError
        Raised if the objective is not finite at ``x0``.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    if not np.isfinite(f):
        raise ConvergenceError(f"Inner solver started at a non-finite objective ({f}) at {x}.")
    g = grad(x)
    sHistory = collections.deque(maxlen=historySize)
    yHistory = collections.deque(maxlen=historySize)
    status = "maxiter"
    nIter = 0
    for nIter in range(maxIter):
        gNorm = np.linalg.norm(g)
        if gNorm <= _gradientTolerance(tol, f, relative):
            status = "converged"
            break
        direction = -_twoLoop(g, sHistory, yHistory)
        slope = np.dot(g, direction)
        if not slope < 0:
            sHistory.clear()
            yHistory.clear()
            direction = -g
            slope = -gNorm**2
        step = 1.0 if sHistory else min(1.0, 1.0/gNorm)
        gNew = None
        for _ in range(60):
            xNew = x + step*direction
            fNew = fun(xNew)
            if np.isfinite(fNew):
                if fNew <= f + 1.0e-4*step*slope:
                    gNew = grad(xNew)
                    break
                if fNew <= f + _ROUNDING*max(1.0, abs(f)):
                    gTrial = grad(xNew)
                    if np.linalg.norm(gTrial) < gNorm:
                        gNew = gTrial
                        break
            step *= 0.5
        if gNew is None:
            status = "linesearch"
            break
        s = xNew - x
        y = gNew - g
        if np.dot(s, y) > 1.0e-12*np.linalg.norm(s)*np.linalg.norm(y):
            sHistory.append(s)
            yHistory.append(y)
        x, f, g = xNew, fNew, gNew
    else:
        nIter = maxIter
    return pipeBase.Struct(x=x, fun=float(f), grad=g, nIter=nIter, status=status)


class AugmentedLagrangianConfig(pexConfig.Config):
    """Configuration for the augmented Lagrangian solver."""
    rho0 = pexConfig.RangeField(
        dtype=float,
        default=1.0,
        min=0.0,
        inclusiveMin=False,
        doc="Initial penalty parameter.",
    )
    penaltyFactor = pexConfig.RangeField(
        dtype=float,
        default=10.0,
        min=1.0,
        inclusiveMin=False,
        doc="Factor by which the penalty grows after every outer iteration.",
    )
    multiplierFactor = pexConfig.RangeField(
        dtype=float,
        default=1.0,
        min=0.0,
        inclusiveMin=False,
        doc="Multiplier step in units of the penalty: lambda <- max(0, lambda + m*rho*h). "
            "1 is the first-order update for the (rho/2)*max(0,h)^2 penalty; 2 is the step "
            "written for a rho*max(0,h)^2 penalty and overshoots with this one.",
    )
    epsilon = pexConfig.RangeField(
        dtype=float,
        default=1.0e-6,
        min=0.0,
        inclusiveMin=False,
        doc="Outer stationarity tolerance on |grad L_rho|.",
    )
    relativeTolerance = pexConfig.Field(
        dtype=bool,
        default=False,
        doc="Scale epsilon and innerTol by max(1, |objective|) instead of using them as absolute "
            "bounds on the gradient norm.",
    )
    feasibilityTol = pexConfig.Field(
        dtype=float,
        default=1.0e-6,
        doc="Largest constraint value accepted at convergence.",
        check=lambda x: x >= 0,
    )
    maxOuter = pexConfig.Field(
        dtype=int,
        default=20,
        doc="Maximum number of outer iterations.",
        check=lambda x: x >= 1,
    )
    innerTol = pexConfig.Field(
        dtype=float,
        default=1.0e-8,
        doc="Inner solver tolerance on the gradient norm.",
        check=lambda x: x > 0,
    )
    innerMax = pexConfig.Field(
        dtype=int,
        default=500,
        doc="Maximum number of inner iterations per outer iteration.",
        check=lambda x: x >= 1,
    )
    historySize = pexConfig.Field(
        dtype=int,
        default=10,
        doc="Number of correction pairs kept by the inner L-BFGS solver.",
        check=lambda x: x >= 1,
    )
    restarts = pexConfig.Field(
        dtype=int,
        default=0,
        doc="Number of additional jittered starts; the best objective is kept.",
        check=lambda x: x >= 0,
    )
    jitterScale = pexConfig.Field(
        dtype=float,
        default=0.1,
        doc="Standard deviation of the Gaussian jitter applied to restart points.",
        check=lambda x: x > 0,
    )
    requireFeasibleStart = pexConfig.Field(
        dtype=bool,
        default=True,
        doc="Refuse starting points that violate a constraint; if False the penalty pulls "
            "an infeasible start back into the feasible region.",
    )


class AugmentedLagrangianTask(pipeBase.Task):
    """Minimise a `ConstrainedProblem` by the augmented Lagrangian method.

    Notes
    -----
    The outer loop stops once the gradient of ``L_rho`` at the current
    multipliers is below ``epsilon``, every constraint is within
    ``feasibilityTol`` and the state the problem froze for the last inner
    solve still holds at its solution.  Restarts draw their jitter from a
    `numpy.random.RandomState` seeded by the caller, so identical inputs
    give identical traces.
    """
    ConfigClass = AugmentedLagrangianConfig
    _DefaultName = "augmentedLagrangian"

    def run(self, problem, theta0, seed=0):
        """Solve the problem.

        Parameters
        ----------
        problem : `ConstrainedProblem`
            Problem to solve.
        theta0 : `numpy.ndarray`
            Starting point; must be strictly feasible unless
            ``config.requireFeasibleStart`` is `False`.
        seed : `int`, optional
            Seed for the restart jitter.

        Returns
        -------
        result : `lsst.pipe.base.Struct`
            Result struct with components:

            - ``theta`` : best iterate (`numpy.ndarray`).
            - ``lambdas`` : final multipliers (`numpy.ndarray`).
            - ``rho`` : final penalty (`float`).
            - ``objective`` : objective at ``theta`` (`float`).
            - ``converged`` : convergence flag (`bool`).
            - ``status`` : ``converged`` or ``maxouter`` (`str`).
            - ``nOuter`` : outer iterations of the kept start (`int`).
            - ``trace`` : per-iteration records of the kept start (`list` [`dict`]).
            - ``start`` : index of the kept start (`int`).

        Raises
        ------
        ConstraintError
            Raised if ``theta0`` is not strictly feasible and
            ``config.requireFeasibleStart`` is set.
        """
        theta0 = np.asarray(theta0, dtype=float)
        if np.max(problem.constraints(theta0)) >= 0:
            if self.config.requireFeasibleStart:
                raise ConstraintError(f"Starting point is not strictly feasible: "
                                      f"h = {problem.constraints(theta0)}.")
            self.log.warning("Starting from an infeasible point: h = %s.", problem.constraints(theta0))
        starts = [theta0] + self._jitteredStarts(problem, theta0, seed)

        best = None
        for index, start in enumerate(starts):
            try:
                result = self._solveFrom(problem, start)
            except ConvergenceError as e:
                self.log.warning("Start %d failed: %s", index, e)
                continue
            result.start = index
            self.log.debug("Start %d: objective %.10g, status %s after %d outer iterations.",
                           index, result.objective, result.status, result.nOuter)
            if best is None or self._isBetter(result, best):
                best = result
        if best is None:
            raise ConvergenceError(f"All {len(starts)} starts of the augmented Lagrangian solver failed.")
        self.log.info("Augmented Lagrangian solve: objective %.10g, status %s (start %d of %d).",
                      best.objective, best.status, best.start, len(starts))
        return best

    @staticmethod
    def _isBetter(candidate, incumbent):
        if candidate.converged != incumbent.converged:
            return candidate.converged
        return candidate.objective < incumbent.objective

    def _jitteredStarts(self, problem, theta0, seed):
        rng = np.random.RandomState(seed)
        starts = []
        for _ in range(self.config.restarts):
            for _ in range(100):
                candidate = theta0 + rng.normal(0.0, self.config.jitterScale, size=theta0.size)
                if (np.max(problem.constraints(candidate)) < 0
                        and np.isfinite(problem.objective(candidate))):
                    starts.append(candidate)
                    break
            else:
                self.log.warning("Could not draw a feasible jittered start; skipping one restart.")
        return starts

    def _solveFrom(self, problem, theta):
        config = self.config
        problem.resetState()
        nConstraints = np.size(problem.constraints(theta))
        state = SolverState(np.zeros(nConstraints), config.rho0, theta)
        trace = []
        converged = False
        outer = 0
        problem.updateState(state.iterate)
        for outer in range(1, config.maxOuter + 1):
            lambdas, rho = state.lambdas.copy(), state.rho
            inner = minimizeLbfgs(lambda t: augmentedObjective(t, lambdas, rho, problem),
                                  lambda t: augmentedGradient(t, lambdas, rho, problem),
                                  state.iterate, tol=config.innerTol, maxIter=config.innerMax,
                                  historySize=config.historySize, relative=config.relativeTolerance)
            state.iterate = inner.x
            h = np.asarray(problem.constraints(state.iterate), dtype=float)
            state.gradNorm = float(np.linalg.norm(augmentedGradient(state.iterate, lambdas, rho,
                                                                    problem)))
            objective = problem.objective(state.iterate)
            trace.append(state.toRecord(outer, objective, np.max(h), inner.status, inner.nIter))
            self.log.debug("Outer %d: objective %.10g, |grad| %.3g, max h %.3g, rho %.3g, inner %s.",
                           outer, objective, state.gradNorm, np.max(h), rho, inner.status)

            state.updateMultipliers(h, config.multiplierFactor)
            stationary = state.gradNorm <= _gradientTolerance(config.epsilon, objective,
                                                              config.relativeTolerance)
            # The state frozen for this inner solve must still hold at its solution.
            changed = problem.updateState(state.iterate)
            if stationary and np.max(h) <= config.feasibilityTol and not changed:
                converged = True
                break
            state.rho = rho*config.penaltyFactor

        return pipeBase.Struct(theta=state.iterate, lambdas=state.lambdas, rho=state.rho,
                               objective=float(problem.objective(state.iterate)),
                               converged=converged, status="converged" if converged else "maxouter",
                               nOuter=outer, trace=trace, start=0)


def solve(problem, theta0, config=None, seed=0):
    """Solve ``problem`` with a freshly configured `AugmentedLagrangianTask`."""
    return AugmentedLagrangianTask(config=config).run(problem, theta0, seed=seed)
