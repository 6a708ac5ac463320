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
import json
import os
import tempfile
import unittest

import numpy as np
from astropy.table import Table

import lsst.utils.tests

from lsst.risk.gbii import RegressionModel, simulateCompositeRegression, writeCsv
from lsst.risk.gbii.cmdLine import EXIT_INPUT, EXIT_NONCONVERGENCE, EXIT_OK, main, makeParser

BG_ALPHA = np.log([3.0, 2.5, 2.0, 1.5, 1.0, 0.5])


class CommandLineTestCase(lsst.utils.tests.TestCase):
    """Subcommands, artifacts and exit codes."""

    def setUp(self):
        self.directory = tempfile.mkdtemp()
        self.out = os.path.join(self.directory, "out")
        dataset = simulateCompositeRegression(400, [1.0, 0.5], BG_ALPHA, family="BG", seed=21)
        self.data = writeCsv(dataset, os.path.join(self.directory, "losses.csv"))
        self.config = os.path.join(self.directory, "overrides.json")
        with open(self.config, "w") as f:
            json.dump({"solver": {"restarts": 0}}, f)

    def runCommand(self, command, *extra):
        return main([command, "--data", self.data, "--out", self.out, "--config", self.config,
                     "--family", "BG", "--log-level", "WARNING", *extra])

    def testParser(self):
        args = makeParser().parse_args(["risk", "--data", "a.csv", "--levels", "0.9,0.99"])
        self.assertEqual(args.levels, [0.9, 0.99])
        self.assertEqual(args.out, ".")
        with self.assertRaises(SystemExit):
            makeParser().parse_args(["fit", "--family", "Lognormal"])
        with self.assertRaises(SystemExit):
            makeParser().parse_args(["risk", "--levels", "0.9,1.5"])

    def testInputErrors(self):
        missing = os.path.join(self.directory, "missing.csv")
        self.assertEqual(main(["fit", "--data", missing, "--out", self.out]), EXIT_INPUT)
        small = os.path.join(self.directory, "small.csv")
        with open(small, "w") as f:
            f.write("loss\n1.0\n2.0\n3.0\n4.0\n5.0\n")
        self.assertEqual(main(["fit", "--data", small, "--out", self.out, "--log-level", "ERROR"]),
                         EXIT_INPUT)
        self.assertEqual(main(["risk", "--data", self.data, "--out", self.out]), EXIT_INPUT)

    def testRegressionFit(self):
        code = self.runCommand("fit", "--formula", "loss ~ x1")
        self.assertIn(code, (EXIT_OK, EXIT_NONCONVERGENCE))
        for name in ("model.json", "fit_report.json", "fit_table.csv", "trace.csv", "observations.csv"):
            self.assertTrue(os.path.exists(os.path.join(self.out, name)), name)
        model = RegressionModel.readText(os.path.join(self.out, "model.json"))
        self.assertEqual(model.covariateNames, ["intercept", "x1"])
        self.assertEqual(model.family, "BG")
        observations = Table.read(os.path.join(self.out, "observations.csv"), format="ascii.csv")
        self.assertEqual(len(observations), 400)

        code = self.runCommand("predict", "--formula", "loss ~ x1", "--levels", "0.5,0.9")
        self.assertEqual(code, EXIT_OK)
        predictions = Table.read(os.path.join(self.out, "predict.csv"), format="ascii.csv")
        self.assertIn("var0.9", predictions.colnames)
        self.assertTrue(np.all(predictions["var0.9"] > predictions["var0.5"]))
        mse = Table.read(os.path.join(self.out, "mse.csv"), format="ascii.csv")
        self.assertEqual(len(mse), 2)

        # Risk comparisons need a distribution fit.
        self.assertEqual(self.runCommand("risk", "--formula", "loss ~ x1"), EXIT_INPUT)

    def testDistributionFit(self):
        code = self.runCommand("fit", "--formula", "loss ~ 1")
        self.assertIn(code, (EXIT_OK, EXIT_NONCONVERGENCE))
        code = self.runCommand("risk", "--formula", "loss ~ 1", "--levels", "0.9,0.95")
        self.assertEqual(code, EXIT_OK)
        risk = Table.read(os.path.join(self.out, "risk.csv"), format="ascii.csv")
        self.assertEqual(list(risk["level"]), [0.9, 0.95])
        grid = Table.read(os.path.join(self.out, "risk_grid.csv"), format="ascii.csv")
        self.assertEqual(len(grid), 2)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
