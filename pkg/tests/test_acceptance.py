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
"""End-to-end properties of the estimator on simulated data.

Monte-Carlo studies run only when ``RISK_GBII_LONG_TESTS`` is set.
"""
import os
import unittest

import numpy as np
import scipy.stats

import lsst.utils.tests

from lsst.risk.gbii import (CompositeGbiiRegressionTask, CompositeParams, CompositeSimulationTask,
                            compositeSample, deriveImplied, designMatrix, glmBaseline,
                            gradLogLikelihood, logLikelihood, pitValues, RegressionModel,
                            simulateCompositeRegression, simulateMixture, threshold)

LONG_TESTS = bool(os.environ.get("RISK_GBII_LONG_TESTS"))


class BaselineComparisonTestCase(lsst.utils.tests.TestCase):
    """Composite regression against a Gamma GLM on heavy-tailed mixture data."""

    def testMixture(self):
        dataset = simulateMixture(2000, 200, seed=20240101)
        design = designMatrix(dataset)
        config = CompositeGbiiRegressionTask.ConfigClass()
        config.solver.restarts = 0
        config.doStandardErrors = False
        report = CompositeGbiiRegressionTask(config=config).run(dataset.response, design.matrix,
                                                                covariateNames=design.names).report
        gamma = glmBaseline(dataset.response, design.matrix, "gamma")
        self.assertLess(report.aic, gamma.aic - 100.0)
        self.assertLess(report.bic, gamma.bic - 100.0)


class PropertyTestCase(lsst.utils.tests.TestCase):
    """Calibration of the distribution and accuracy of the analytic gradient."""

    def testPitUniformity(self):
        model = RegressionModel(family="ComGBII", covariateNames=["intercept"], beta=[np.log(2.0)],
                                alpha=np.log([1.5, 2.0, 2.5, 1.5, 1.5, 1.5]))
        params = model.params(np.ones(1))
        sample = compositeSample(10000, params, deriveImplied(params), seed=17)
        cdf, _ = pitValues(model, sample)
        self.assertGreater(scipy.stats.kstest(cdf, "uniform").pvalue, 0.01)

    def testGradientConfigurations(self):
        rng = np.random.RandomState(99)
        for _ in range(20):
            shapes = rng.uniform(1.2, 3.0, size=6)
            alpha = np.log(shapes)
            beta = rng.normal(0.0, 0.5, size=2)
            design = np.column_stack([np.ones(30), rng.standard_normal(30)])
            params = CompositeParams.fromAlpha(np.exp(design @ beta), alpha)
            response = compositeSample(30, params, deriveImplied(params), seed=rng.randint(0, 2**31 - 1))
            mask = response <= threshold(design, beta, alpha)
            theta = np.concatenate([beta, alpha])

            analytic = gradLogLikelihood(response, design, beta, alpha, headMask=mask)
            numeric = np.zeros(theta.size)
            for i in range(theta.size):
                step = np.zeros(theta.size)
                step[i] = 1e-6
                numeric[i] = (logLikelihood(response, design, (theta + step)[:2], (theta + step)[2:],
                                            headMask=mask)
                              - logLikelihood(response, design, (theta - step)[:2], (theta - step)[2:],
                                              headMask=mask))/2e-6
            self.assertFloatsAlmostEqual(analytic, numeric, rtol=1e-5, atol=1e-4)


@unittest.skipUnless(LONG_TESTS, "set RISK_GBII_LONG_TESTS for Monte-Carlo studies")
class MonteCarloTestCase(lsst.utils.tests.TestCase):
    """Sampling behaviour of the estimator."""

    def testSimulationStudy(self):
        config = CompositeSimulationTask.ConfigClass()
        config.nReplicates = 100
        config.numThreads = 4
        summary = CompositeSimulationTask(config=config).run().summary
        median = dict(zip(summary["parameter"], summary["median"]))
        self.assertTrue(0.45 <= median["beta1"] <= 0.55)
        self.assertTrue(0.15 <= median["beta2"] <= 0.25)
        for index in (1, 2, 4, 6):
            self.assertFloatsAlmostEqual(median[f"alpha{index}"], config.alpha[index - 1], atol=0.15)

    def testSelfConsistency(self):
        beta = np.array([2.0, 0.5, 0.2])
        alpha = np.log([1.5, 1.0, 2.0, 1.5, 2.0, 1.5])
        dataset = simulateCompositeRegression(50000, beta, alpha, seed=2718)
        design = designMatrix(dataset)
        model = CompositeGbiiRegressionTask().run(dataset.response, design.matrix).model
        stdErr = np.sqrt(np.diag(model.covariance))
        truth = np.concatenate([beta, alpha])
        self.assertTrue(np.all(np.abs(model.theta - truth) < 3*stdErr))

    def testWaldCoverage(self):
        beta = np.array([1.0, 0.5])
        alpha = np.log([3.0, 2.5, 2.0, 1.5, 1.0, 0.5])
        config = CompositeGbiiRegressionTask.ConfigClass()
        config.family = "BG"
        task = CompositeGbiiRegressionTask(config=config)
        covered = []
        for seed in range(200):
            dataset = simulateCompositeRegression(500, beta, alpha, family="BG", seed=seed)
            design = designMatrix(dataset)
            model = task.run(dataset.response, design.matrix).model
            if model.covariance is None:
                continue
            covered.append(abs(model.beta[1] - beta[1]) <= 1.96*np.sqrt(model.covariance[1, 1]))
        self.assertGreater(len(covered), 180)
        self.assertTrue(0.90 <= np.mean(covered) <= 0.98)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
