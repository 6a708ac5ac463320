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
"""Reproduction of the Danish fire-loss analysis.

The data are not distributed with the package; export the 2492 losses to a
one-column CSV with header ``loss`` and point ``RISK_GBII_DANISH_CSV`` at
it.  The bootstrap and full-roster checks also need ``RISK_GBII_LONG_TESTS``.
"""
import os
import unittest

import numpy as np

import lsst.utils.tests

from lsst.risk.gbii import (ROSTER, CompositeGbiiRegressionTask, GoodnessOfFitTask, compareRisk,
                            compositeTvar, compositeVar, modelSelectionTable, readCsv, readSchema,
                            summaryStatistics)

DANISH_CSV = os.environ.get("RISK_GBII_DANISH_CSV")
LONG_TESTS = bool(os.environ.get("RISK_GBII_LONG_TESTS"))
SCHEMA_FILE = os.path.join(os.path.dirname(__file__), os.pardir, "schemas", "danish.yaml")


def fitDanish(losses, family):
    config = CompositeGbiiRegressionTask.ConfigClass()
    config.family = family
    return CompositeGbiiRegressionTask(config=config).run(losses, np.ones((losses.size, 1)),
                                                          covariateNames=["intercept"])


@unittest.skipUnless(DANISH_CSV, "requires-danish-csv: set RISK_GBII_DANISH_CSV")
class DanishBgTestCase(lsst.utils.tests.TestCase):
    """Intercept-only BG fit of the Danish losses."""

    @classmethod
    def setUpClass(cls):
        cls.losses = readCsv(DANISH_CSV, readSchema(SCHEMA_FILE)).response
        cls.result = fitDanish(cls.losses, "BG")

    def testSummary(self):
        summary = summaryStatistics(self.losses)
        self.assertEqual(summary["n"], 2492)
        self.assertFloatsAlmostEqual(summary["min"], 0.3134, atol=5e-5)
        self.assertFloatsAlmostEqual(summary["mean"], 3.0630, atol=5e-5)
        self.assertFloatsAlmostEqual(summary["sd"], 7.9767, atol=5e-5)

    def testEstimates(self):
        model = self.result.model
        report = self.result.report
        self.assertFloatsAlmostEqual(model.nll, 3813.94, atol=0.5)
        self.assertFloatsAlmostEqual(report.aic, 7637.88, atol=1.0)
        self.assertFloatsAlmostEqual(report.bic, 7666.98, atol=1.0)
        estimates = np.concatenate([np.exp(model.beta), np.exp(model.alpha[:4])])
        self.assertFloatsAlmostEqual(estimates, np.array([1.03, 16.19, 5.12, 1146.7, 0.28]), rtol=0.05)
        self.assertFloatsAlmostEqual(np.exp(model.alpha[4:]), np.array([1.0, 0.5]), rtol=1e-14)

    def testRisk(self):
        params = self.result.model.params(np.ones(1))
        self.assertFloatsAlmostEqual(compositeVar(0.95, params), 8.28, atol=0.05)
        self.assertFloatsAlmostEqual(compositeVar(0.99, params), 25.74, atol=0.3)
        self.assertFloatsAlmostEqual(compositeTvar(0.95, params), 28.04, atol=0.5)
        self.assertFloatsAlmostEqual(compositeTvar(0.99, params), 87.16, atol=2.0)

        comparisons = compareRisk(self.result.model, self.losses, levels=(0.95, 0.99))
        self.assertFloatsAlmostEqual(comparisons[0].empiricalVar, 8.41, rtol=0.02)
        self.assertFloatsAlmostEqual(comparisons[1].empiricalVar, 24.61, rtol=0.02)
        self.assertFloatsAlmostEqual(comparisons[0].varDiffPct, -1.48, atol=0.5)

    @unittest.skipUnless(LONG_TESTS, "set RISK_GBII_LONG_TESTS for the bootstrap")
    def testGoodnessOfFit(self):
        config = GoodnessOfFitTask.ConfigClass()
        config.fastMode = True
        config.numThreads = 4
        report = GoodnessOfFitTask(config=config).run(self.result.model, self.losses).report
        self.assertFloatsAlmostEqual(report.ks, 0.014, atol=0.002)
        self.assertFloatsAlmostEqual(report.cvm, 0.081, atol=0.01)
        self.assertFloatsAlmostEqual(report.ad, 0.725, atol=0.05)
        self.assertFloatsAlmostEqual(np.array([report.pKs, report.pCvm, report.pAd]),
                                     np.array([0.92, 0.84, 0.85]), atol=0.1)
        self.assertGreaterEqual(report.qqCorrelation, 0.996)


@unittest.skipUnless(DANISH_CSV and LONG_TESTS, "requires-danish-csv and RISK_GBII_LONG_TESTS")
class DanishRosterTestCase(lsst.utils.tests.TestCase):
    """All seven composite models on the Danish losses."""

    def testRoster(self):
        losses = readCsv(DANISH_CSV, readSchema(SCHEMA_FILE)).response
        models = {family: fitDanish(losses, family).model for family in ROSTER}
        table = modelSelectionTable([(name, model.nFree, model.nll) for name, model in models.items()],
                                    losses.size)
        self.assertEqual(list(table["model"][:2]), ["BG", "GBIIG"])
        self.assertFloatsAlmostEqual(models["ComGBII"].nll, 3814.22, atol=1.0)
        self.assertFloatsAlmostEqual(models["GBIIG"].nll, 3813.89, atol=1.0)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
