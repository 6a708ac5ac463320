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
import unittest

import numpy as np

import lsst.utils.tests

from lsst.risk.gbii import CompositeSimulationTask, boxplotSummary


class BoxplotSummaryTestCase(lsst.utils.tests.TestCase):
    """Boxplot statistics of replicate estimates."""

    def testSummary(self):
        summary = boxplotSummary([1.0, 2.0, 3.0, 4.0, 100.0, np.nan], truth=2.0)
        self.assertEqual(summary["n"], 5)
        self.assertEqual(summary["truth"], 2.0)
        self.assertEqual((summary["q1"], summary["median"], summary["q3"]), (2.0, 3.0, 4.0))
        self.assertEqual((summary["whiskerLow"], summary["whiskerHigh"]), (1.0, 4.0))
        self.assertEqual(summary["nOutside"], 1)
        self.assertFloatsAlmostEqual(summary["mean"], 22.0, rtol=1e-15)

    def testEmpty(self):
        summary = boxplotSummary([np.nan, np.nan])
        self.assertEqual(summary["n"], 0)
        self.assertTrue(np.isnan(summary["median"]))


class SimulationStudyTestCase(lsst.utils.tests.TestCase):
    """Seeded simulate-and-fit replicates."""

    def makeConfig(self, **overrides):
        config = CompositeSimulationTask.ConfigClass()
        config.nObs = 300
        config.nReplicates = 2
        config.beta = [1.0, 0.5]
        config.rngSeed = 5
        config.fit.solver.restarts = 1
        for name, value in overrides.items():
            setattr(config, name, value)
        config.validate()
        return config

    def testComposite(self):
        self.assertFalse(CompositeSimulationTask.ConfigClass().warmStart)
        self.assertEqual(CompositeSimulationTask.ConfigClass().fit.solver.restarts, 5)
        result = CompositeSimulationTask(config=self.makeConfig()).run()
        estimates = result.estimates
        self.assertEqual(len(estimates), 2)
        self.assertEqual(list(estimates["replicate"]), [0, 1])
        self.assertEqual(result.nFailed, int(np.sum(estimates["status"] == "failed")))

        summary = result.summary
        self.assertEqual(list(summary["parameter"]), ["beta0", "beta1", "alpha1", "alpha2", "alpha3",
                                                      "alpha4", "alpha5", "alpha6"])
        self.assertFloatsAlmostEqual(np.array(summary["truth"][:2]), np.array([1.0, 0.5]), rtol=0)

        threaded = CompositeSimulationTask(config=self.makeConfig(numThreads=2)).run()
        self.assertEqual(list(threaded.estimates["seed"]), list(estimates["seed"]))
        for name in ("nll", "beta0", "beta1"):
            self.assertFloatsAlmostEqual(np.array(threaded.estimates[name]), np.array(estimates[name]),
                                         rtol=1e-12)

    def testMixture(self):
        config = self.makeConfig(design="mixture", nTail=30, nReplicates=1)
        result = CompositeSimulationTask(config=config).run()
        for name in ("aic", "bic", "gammaAic", "gammaBic", "inverseGaussianAic", "inverseGaussianBic"):
            self.assertIn(name, result.estimates.colnames)
        self.assertEqual(len(result.summary), 3 + 6)
        self.assertTrue(np.all(np.isnan(np.array(result.summary["truth"], dtype=float))))

        with self.assertRaises(ValueError):
            self.makeConfig(design="mixture", nTail=300)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
