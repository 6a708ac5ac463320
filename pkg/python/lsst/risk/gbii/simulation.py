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
"""Monte-Carlo study of the composite GBII regression estimator."""

__all__ = ["CompositeSimulationConfig", "CompositeSimulationTask", "boxplotSummary"]

import numpy as np
from astropy.table import Table
from joblib import Parallel, delayed

import lsst.pex.config as pexConfig
import lsst.pipe.base as pipeBase
from lsst.utils.logging import getLogger

from .diagnostics import aicBic, glmBaseline
from .exceptions import CompGbiiError
from .lossData import designMatrix, simulateCompositeRegression, simulateMixture
from .regression import CompositeGbiiRegressionTask

_LOG = getLogger(__name__.partition(".")[2])


def _estimateNames(nBeta):
    return [f"beta{i}" for i in range(nBeta)] + [f"alpha{j}" for j in range(1, 7)]


def _replicate(config, index, seed):
    """Simulate and fit one data set; module level for joblib."""
    nBeta = len(config.beta) if config.design == "composite" else len(config.betaBody)
    row = {"replicate": index, "seed": seed, "status": "failed", "nll": np.nan}
    row.update({name: np.nan for name in _estimateNames(nBeta)})
    if config.design == "mixture":
        row.update({"aic": np.nan, "bic": np.nan, "gammaAic": np.nan, "gammaBic": np.nan,
                    "inverseGaussianAic": np.nan, "inverseGaussianBic": np.nan})
    try:
        if config.design == "composite":
            dataset = simulateCompositeRegression(config.nObs, config.beta, config.alpha,
                                                  family=config.fit.family, seed=seed)
        else:
            dataset = simulateMixture(config.nObs, config.nTail, config.betaBody, config.phiBody,
                                      config.betaLocation, config.betaScale, config.xi, seed=seed)
        design = designMatrix(dataset)
        task = CompositeGbiiRegressionTask(config=config.fit.value)
        warm = config.design == "composite" and config.warmStart
        result = task.run(dataset.response, design.matrix, covariateNames=design.names,
                          initialBeta=config.beta if warm else None,
                          initialAlpha=config.alpha if warm else None)
    except CompGbiiError as e:
        _LOG.warning("Replicate %d failed: %s", index, e)
        return row

    model = result.model
    row["status"] = model.status
    row["nll"] = model.nll
    row.update(dict(zip(_estimateNames(nBeta), np.concatenate([model.beta, model.alpha]))))
    if config.design == "mixture":
        criteria = aicBic(model.nll, model.nFree, dataset.n)
        row["aic"], row["bic"] = criteria.aic, criteria.bic
        for family, prefix in (("gamma", "gamma"), ("inverse_gaussian", "inverseGaussian")):
            try:
                baseline = glmBaseline(dataset.response, design.matrix, family)
            except Exception as e:
                _LOG.warning("Replicate %d: %s GLM failed: %s", index, family, e)
                continue
            row[prefix + "Aic"], row[prefix + "Bic"] = baseline.aic, baseline.bic
    return row


def boxplotSummary(values, truth=np.nan):
    """Median, quartiles, 1.5 IQR whiskers and the count beyond them.

    Parameters
    ----------
    values : `numpy.ndarray`
        Replicate estimates; NaN entries (failed replicates) are ignored.
    truth : `float`, optional
        True value, reported alongside.

    Returns
    -------
    summary : `dict`
        Keys ``n``, ``truth``, ``mean``, ``median``, ``q1``, ``q3``,
        ``whiskerLow``, ``whiskerHigh`` and ``nOutside``.
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    if values.size == 0:
        return {"n": 0, "truth": float(truth), "mean": np.nan, "median": np.nan, "q1": np.nan,
                "q3": np.nan, "whiskerLow": np.nan, "whiskerHigh": np.nan, "nOutside": 0}
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5*iqr) & (values <= q3 + 1.5*iqr)]
    return {"n": int(values.size), "truth": float(truth), "mean": float(np.mean(values)),
            "median": float(median), "q1": float(q1), "q3": float(q3),
            "whiskerLow": float(np.min(inside)), "whiskerHigh": float(np.max(inside)),
            "nOutside": int(values.size - inside.size)}


class CompositeSimulationConfig(pexConfig.Config):
    """Configuration of the simulation study."""
    design = pexConfig.ChoiceField(
        dtype=str,
        default="composite",
        doc="Data-generating process.",
        allowed={
            "composite": "Composite GBII regression with standard-normal covariates.",
            "mixture": "Gamma body and generalized Pareto tail sharing the covariates.",
        },
    )
    nObs = pexConfig.Field(
        dtype=int,
        default=2000,
        doc="Observations per replicate.",
        check=lambda x: x >= 10,
    )
    nTail = pexConfig.Field(
        dtype=int,
        default=200,
        doc="Generalized Pareto observations per replicate (mixture design).",
        check=lambda x: x >= 0,
    )
    nReplicates = pexConfig.Field(
        dtype=int,
        default=100,
        doc="Number of simulated data sets.",
        check=lambda x: x >= 1,
    )
    beta = pexConfig.ListField(
        dtype=float,
        default=[2.0, 0.5, 0.2],
        doc="True coefficients of log mu2 (composite design).",
    )
    alpha = pexConfig.ListField(
        dtype=float,
        default=[float(v) for v in np.log([1.5, 1.0, 2.0, 1.5, 2.0, 1.5])],
        doc="True log(p1, p2, tau1, tau2, nu1, nu2) (composite design).",
        length=6,
    )
    warmStart = pexConfig.Field(
        dtype=bool,
        default=False,
        doc="Start each composite-design fit at the true parameters instead of the "
            "least-squares start of the fit task?",
    )
    betaBody = pexConfig.ListField(
        dtype=float,
        default=[2.0, 2.0, 1.5],
        doc="Coefficients of the log Gamma mean (mixture design).",
    )
    phiBody = pexConfig.Field(
        dtype=float,
        default=1.5,
        doc="Gamma dispersion (mixture design).",
        check=lambda x: x > 0,
    )
    betaLocation = pexConfig.ListField(
        dtype=float,
        default=[1.0, 0.5, 0.5],
        doc="Coefficients of the log generalized Pareto location (mixture design).",
    )
    betaScale = pexConfig.ListField(
        dtype=float,
        default=[3.0, 0.5, 1.0],
        doc="Coefficients of the log generalized Pareto scale (mixture design).",
    )
    xi = pexConfig.Field(
        dtype=float,
        default=1.5,
        doc="Generalized Pareto shape (mixture design).",
    )
    rngSeed = pexConfig.Field(
        dtype=int,
        default=20000913,
        doc="Seed from which the replicate seeds are drawn.",
    )
    numThreads = pexConfig.Field(
        dtype=int,
        default=1,
        doc="Number of joblib workers.",
        check=lambda x: x >= 1,
    )
    fit = pexConfig.ConfigurableField(
        target=CompositeGbiiRegressionTask,
        doc="Fit of each replicate.",
    )

    def setDefaults(self):
        super().setDefaults()
        self.fit.doStandardErrors = False

    def validate(self):
        super().validate()
        if self.design == "mixture" and self.nTail >= self.nObs:
            raise ValueError(f"nTail ({self.nTail}) must be smaller than nObs ({self.nObs}).")
        if self.design == "mixture" and not (len(self.betaBody) == len(self.betaLocation)
                                             == len(self.betaScale)):
            raise ValueError("Mixture coefficient lists must have equal lengths.")


class CompositeSimulationTask(pipeBase.Task):
    """Repeat simulate-and-fit over seeded replicates.

    Replicate seeds are drawn from ``rngSeed`` up front and the results are
    gathered in replicate order, so the tables do not depend on
    ``numThreads``.
    """
    ConfigClass = CompositeSimulationConfig
    _DefaultName = "compositeSimulation"

    def run(self):
        """Run the study.

        Returns
        -------
        result : `lsst.pipe.base.Struct`
            Result struct with components:

            - ``estimates`` : one row per replicate (`astropy.table.Table`).
            - ``summary`` : boxplot statistics per parameter
              (`astropy.table.Table`).
            - ``nFailed`` : replicates whose simulation or fit failed (`int`).
        """
        config = self.config
        seeds = np.random.RandomState(config.rngSeed).randint(0, 2**31 - 1, size=config.nReplicates)
        self.log.info("Running %d %s-design replicates of %d observations.", config.nReplicates,
                      config.design, config.nObs)
        rows = Parallel(n_jobs=config.numThreads)(
            delayed(_replicate)(config, index, int(seed)) for index, seed in enumerate(seeds)
        )
        estimates = Table({key: [row[key] for row in rows] for key in rows[0]})
        nFailed = int(np.sum(estimates["status"] == "failed"))
        if nFailed:
            self.log.warning("%d of %d replicates failed.", nFailed, config.nReplicates)

        nBeta = len(config.beta) if config.design == "composite" else len(config.betaBody)
        names = _estimateNames(nBeta)
        truth = (list(config.beta) + list(config.alpha) if config.design == "composite"
                 else [np.nan]*len(names))
        summaryRows = [dict(parameter=name, **boxplotSummary(estimates[name], value))
                       for name, value in zip(names, truth)]
        summary = Table({key: [row[key] for row in summaryRows] for key in summaryRows[0]})
        return pipeBase.Struct(estimates=estimates, summary=summary, nFailed=nFailed)
