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
import os
import tempfile
import unittest

import numpy as np
import scipy.special
import scipy.stats

import lsst.utils.tests

from lsst.risk.gbii import (REFERENCE_COMPETITORS, DimensionError, DomainError, GofReport,
                            GoodnessOfFitTask, InsufficientTailError, RegressionModel, SampleSizeError,
                            aicBic, compareRisk, compositeSample, compositeVar, deriveImplied,
                            empiricalRisk, glmBaseline, modelSelectionTable, mseQ, mseTable,
                            pitStatistics, pitValues, qqData, quantileResiduals, riskGrid, writeQqSvg)

BG_ALPHA = np.log([3.0, 2.5, 2.0, 1.5, 1.0, 0.5])


def makeModel(alpha=BG_ALPHA, mu2=2.0):
    return RegressionModel(family="BG", covariateNames=["intercept"], beta=[np.log(mu2)], alpha=alpha,
                           nll=100.0, converged=True, status="converged", nObs=100)


class CriteriaTestCase(lsst.utils.tests.TestCase):
    """Information criteria and model-selection tables."""

    def testAicBic(self):
        criteria = aicBic(3813.94, 5, 2492)
        self.assertFloatsAlmostEqual(criteria.aic, 7637.88, atol=1e-9)
        self.assertFloatsAlmostEqual(criteria.bic, 7666.98, atol=5e-3)
        criteria = aicBic(12.5, 0, 10)
        self.assertEqual(criteria.aic, 25.0)
        self.assertEqual(criteria.bic, 25.0)
        with self.assertRaises(DomainError):
            aicBic(1.0, -1, 10)
        with self.assertRaises(DomainError):
            aicBic(1.0, 2, 0)

    def testModelSelectionTable(self):
        table = modelSelectionTable([("A", 5, 3813.94), ("B", 2, 3900.0), ("C", 8, 3810.0)], 2492)
        self.assertEqual(list(table["model"]), ["C", "A", "B"])
        self.assertEqual(list(table["aicRank"]), [1, 2, 3])
        self.assertEqual(list(table["bicRank"]), [2, 1, 3])

        rows = [(name, entry["nParams"], entry["nll"]) for name, entry in REFERENCE_COMPETITORS.items()]
        table = modelSelectionTable(rows + [("ComGBII", 8, 3813.0)], 2492)
        self.assertEqual(len(table), len(REFERENCE_COMPETITORS) + 1)
        self.assertEqual(table["model"][0], "IBB")

    def testPublishedSelectionTable(self):
        # (model, Npars, NLL, AIC, AIC rank, BIC, BIC rank) of the Danish roster.
        published = [
            ("ComGBII", 7, 3814.22, 7642.44, 4, 7683.19, 11),
            ("GBIIG", 6, 3813.89, 7639.79, 2, 7674.71, 8),
            ("BIIG", 5, 3849.71, 7709.41, 12, 7738.52, 13),
            ("BG", 5, 3813.94, 7637.88, 1, 7666.98, 1),
            ("IBG", 5, 3817.91, 7645.81, 8, 7674.92, 10),
            ("PG", 4, 3818.06, 7644.12, 6, 7667.40, 2),
            ("IPG", 4, 3851.67, 7711.34, 13, 7734.62, 12),
        ]
        published += [(name, entry["nParams"], entry["nll"], *rest) for (name, entry), rest in zip(
            REFERENCE_COMPETITORS.items(),
            [(7648.02, 9, 7671.30, 3), (7648.28, 10, 7671.56, 4), (7642.68, 5, 7671.79, 5),
             (7649.87, 11, 7673.15, 6), (7644.14, 7, 7673.25, 7), (7639.99, 3, 7674.92, 9)])]
        table = modelSelectionTable([row[:3] for row in published], 2492)
        rows = {name: (aic, aicRank, bic, bicRank) for name, aic, bic, aicRank, bicRank in
                zip(table["model"], table["aic"], table["bic"], table["aicRank"], table["bicRank"])}
        for name, _, _, aic, aicRank, bic, bicRank in published:
            self.assertFloatsAlmostEqual(rows[name][0], aic, atol=1e-9)
            self.assertEqual(rows[name][1], aicRank)
            self.assertFloatsAlmostEqual(rows[name][2], bic, atol=1e-2)
            # IBG and IBB tie at the printed precision.
            if name not in ("IBG", "IBB"):
                self.assertEqual(rows[name][3], bicRank)

    def testGlmBaseline(self):
        rng = np.random.RandomState(8)
        x = rng.standard_normal(3000)
        design = np.column_stack([np.ones(x.size), x])
        mean = np.exp(1.0 + 0.5*x)
        response = rng.gamma(2.0, mean/2.0)
        result = glmBaseline(response, design, "gamma")
        self.assertEqual(result.nParams, 3)
        self.assertFloatsAlmostEqual(result.params, np.array([1.0, 0.5]), atol=0.05)
        self.assertFloatsAlmostEqual(result.aic, 2*result.nll + 6, rtol=1e-12)
        inverse = glmBaseline(response, design, "inverse_gaussian")
        self.assertGreater(inverse.nll, result.nll)
        with self.assertRaises(DomainError):
            glmBaseline(response, design, "poisson")


class ResidualTestCase(lsst.utils.tests.TestCase):
    """PIT values, quantile residuals and the EDF statistics."""

    def setUp(self):
        self.model = makeModel()
        self.params = self.model.params(np.ones(1))
        self.implied = deriveImplied(self.params)

    def testPit(self):
        median = compositeVar(0.5, self.params, self.implied)
        cdf, sf = pitValues(self.model, [median, self.implied.u])
        self.assertFloatsAlmostEqual(cdf, np.array([0.5, self.implied.r]), rtol=1e-9)
        self.assertFloatsAlmostEqual(cdf + sf, np.ones(2), rtol=1e-14)

        residuals = quantileResiduals(self.model, [median, self.implied.u])
        self.assertFloatsAlmostEqual(residuals[0], 0.0, atol=1e-9)
        self.assertFloatsAlmostEqual(residuals[1], scipy.special.ndtri(self.implied.r), rtol=1e-9)

        self.assertEqual(quantileResiduals(self.model, [1.0e30])[0], 8.0)
        with self.assertRaises(DimensionError):
            pitValues(RegressionModel(family="BG", beta=[0.0, 1.0]), [1.0])

    def testStatistics(self):
        result = pitStatistics([0.5])
        self.assertFloatsAlmostEqual(result.ks, 0.5, rtol=1e-15)
        self.assertFloatsAlmostEqual(result.ad, -1.0 + 2.0*np.log(2.0), rtol=1e-14)
        self.assertFloatsAlmostEqual(result.cvm, 1.0/12.0, rtol=1e-14)

        z = np.random.RandomState(3).uniform(size=200)
        result = pitStatistics(z)
        self.assertFloatsAlmostEqual(result.ks, scipy.stats.kstest(z, "uniform").statistic, rtol=1e-12)
        self.assertFloatsAlmostEqual(result.cvm, scipy.stats.cramervonmises(z, "uniform").statistic,
                                     rtol=1e-10)
        zs = np.sort(z)
        i = np.arange(1, 201)
        ad = -200 - np.mean((2*i - 1)*(np.log(zs) + np.log1p(-zs[::-1])))
        self.assertFloatsAlmostEqual(result.ad, ad, rtol=1e-10)

        self.assertEqual(pitStatistics([0.0, 0.5]).ad, np.inf)
        with self.assertRaises(SampleSizeError):
            pitStatistics([])

    def testQq(self):
        qq = qqData(self.model, [1.0, 3.0])
        self.assertFloatsAlmostEqual(qq.correlation, 1.0, rtol=1e-12)
        sample = compositeSample(500, self.params, self.implied, seed=5)
        qq = qqData(self.model, sample)
        self.assertFloatsAlmostEqual(qq.theoretical, -qq.theoretical[::-1], atol=1e-12)
        self.assertGreater(qq.correlation, 0.98)
        with tempfile.TemporaryDirectory() as directory:
            filename = writeQqSvg(qq, os.path.join(directory, "qq.svg"), title="BG")
            with open(filename) as f:
                self.assertIn("<svg", f.read())


class RiskTestCase(lsst.utils.tests.TestCase):
    """Empirical and model risk measures and the predictive MSE."""

    def testEmpiricalRisk(self):
        losses = np.arange(1.0, 11.0)
        result = empiricalRisk(losses, 0.9)
        self.assertFloatsAlmostEqual(result.var, 9.1, rtol=1e-14)
        self.assertEqual(result.tvar, 10.0)
        result = empiricalRisk(np.full(5, 3.0), 0.5)
        self.assertEqual(result.var, 3.0)
        self.assertEqual(result.tvar, 3.0)
        with self.assertRaises(InsufficientTailError):
            empiricalRisk(losses, 0.95, method="higher")
        with self.assertRaises(SampleSizeError):
            empiricalRisk([1.0], 0.5)
        with self.assertRaises(DomainError):
            empiricalRisk(losses, 1.0)

    def testCompareRisk(self):
        model = makeModel()
        params = model.params(np.ones(1))
        losses = compositeSample(20000, params, deriveImplied(params), seed=9)
        comparisons = compareRisk(model, losses, levels=(0.5, 0.95))
        self.assertEqual([c.level for c in comparisons], [0.5, 0.95])
        for comparison in comparisons:
            self.assertLess(abs(comparison.varDiffPct), 5.0)
            self.assertGreater(comparison.modelTvar, comparison.modelVar)
            self.assertEqual(set(comparison.toDict()),
                             {"level", "empiricalVar", "modelVar", "varDiffPct", "empiricalTvar",
                              "modelTvar", "tvarDiffPct"})

        heavy = makeModel(alpha=np.log([3.0, 2.5, 2.0, 0.3, 1.0, 0.5]))
        self.assertEqual(compareRisk(heavy, losses, levels=(0.9,))[0].modelTvar, np.inf)
        with self.assertRaises(DimensionError):
            compareRisk(RegressionModel(family="BG", beta=[0.0, 1.0]), losses)

    def testRiskGrid(self):
        heavy = makeModel(alpha=np.log([3.0, 2.5, 2.0, 0.3, 1.0, 0.5]))
        table = riskGrid([("BG", 100.0, makeModel()), ("heavy", 101.0, heavy)], levels=(0.95, 0.99))
        self.assertEqual(len(table), 4)
        self.assertLess(table["var"][0], table["var"][1])
        self.assertTrue(np.isinf(table["tvar"][2]))
        self.assertEqual(set(table["source"]), {"fitted"})

    def testRiskGridReference(self):
        nDanish = 2492
        table = riskGrid([("BG", 100.0, makeModel())], levels=(0.9, 0.95, 0.99),
                         reference=REFERENCE_COMPETITORS, nObs=nDanish)
        # Published risk exists at 0.95 and 0.99 only.
        self.assertEqual(len(table), 3 + 2*len(REFERENCE_COMPETITORS))
        self.assertEqual(list(table["model"][:3]), ["BG"]*3)
        self.assertTrue(np.all(np.diff(np.array(table["bic"])) >= 0))

        reference = table[table["source"] == "reference"]
        self.assertEqual(set(reference["model"]), set(REFERENCE_COMPETITORS))
        wiw = reference[reference["model"] == "WIW"]
        self.assertFloatsAlmostEqual(np.array(wiw["bic"]), np.full(2, 7671.30), atol=1e-2)
        self.assertFloatsAlmostEqual(np.array(wiw["var"]), np.array([8.02, 22.77]), rtol=0)
        self.assertFloatsAlmostEqual(np.array(wiw["tvar"]), np.array([22.64, 63.86]), rtol=0)
        ibb = reference[(reference["model"] == "IBB") & (reference["level"] == 0.99)]
        self.assertEqual(ibb["var"][0], 25.13)
        self.assertEqual(ibb["tvar"][0], 82.15)
        for entry in REFERENCE_COMPETITORS.values():
            for level in (0.95, 0.99):
                self.assertGreaterEqual(entry["tvar"][level], entry["var"][level])

        with self.assertRaises(ValueError):
            riskGrid([], reference=REFERENCE_COMPETITORS)

    def testMse(self):
        model = makeModel()
        response = np.array([1.0, 2.0, 5.0])
        var = compositeVar(0.4, model.params(np.ones(1)))
        self.assertFloatsAlmostEqual(mseQ(model, response, None, 0.4), np.sum((response - var)**2),
                                     rtol=1e-12)
        self.assertEqual(mseQ(model, [], None, 0.4), 0.0)
        design = np.ones((3, 1))
        table = mseTable(model, {"in-sample": (response, design), "out-of-sample": (response[:1],
                                                                                      design[:1])})
        self.assertEqual(len(table), 10)
        self.assertFloatsAlmostEqual(np.array(table["mseScaled"]), np.array(table["mse"])*1e-8, rtol=1e-15)


class GoodnessOfFitTestCase(lsst.utils.tests.TestCase):
    """Parametric-bootstrap goodness of fit."""

    def testReportPersistence(self):
        report = GofReport(family="BG", ks=0.02, ad=np.inf, cvm=0.1, pKs=0.5, pAd=0.0, pCvm=0.25,
                           qqCorrelation=0.998, nBoot=200, nFailed=1, seed=4)
        with tempfile.TemporaryDirectory() as directory:
            for extension in (".json", ".yaml", ".ecsv"):
                filename = report.writeText(os.path.join(directory, "gof" + extension))
                self.assertEqual(GofReport.readText(filename), report)

    def testSingleReplicate(self):
        model = makeModel()
        params = model.params(np.ones(1))
        losses = compositeSample(300, params, deriveImplied(params), seed=2)
        config = GoodnessOfFitTask.ConfigClass()
        config.nBoot = 1
        config.seed = 11
        result = GoodnessOfFitTask(config=config).run(model, losses)
        report = result.report
        self.assertEqual(report.nBoot, 1)
        self.assertEqual(len(result.replicates), 1)
        if report.nFailed:
            self.assertTrue(np.isnan(report.pKs))
        else:
            for value in (report.pKs, report.pAd, report.pCvm):
                self.assertIn(value, (0.0, 1.0))
        self.assertGreater(report.qqCorrelation, 0.9)

    def testFastMode(self):
        config = GoodnessOfFitTask.ConfigClass()
        config.fastMode = True
        config.fastNBoot = 2
        model = makeModel()
        params = model.params(np.ones(1))
        losses = compositeSample(200, params, deriveImplied(params), seed=6)
        result = GoodnessOfFitTask(config=config).run(model, losses)
        self.assertEqual(result.report.nBoot, 2)
        with self.assertRaises(DimensionError):
            GoodnessOfFitTask(config=config).run(RegressionModel(family="BG", beta=[0.0, 1.0]), losses)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
