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
import math
import os
import tempfile
import unittest

import numpy as np

import lsst.utils.tests

from lsst.risk.gbii import GofReport, RegressionModel
from lsst.risk.gbii.fitProduct import fromBuiltin, toBuiltin


class FitProductCases(lsst.utils.tests.TestCase):
    """Test the common persistence of fit products.
    """
    def setUp(self):
        self.model = RegressionModel(family="GBIIG", covariateNames=["intercept", "age"],
                                     beta=[7.5, 0.01], alpha=np.log([1.5, 2.0, 2.5, 1.5, 1.5, 1.5]),
                                     covariance=np.diag([0.1, 0.01, 0.2, 0.2, 0.3, 0.3, 0.4]),
                                     nll=1234.5, converged=True, status="converged", nObs=500)
        self.directory = tempfile.mkdtemp()

    def runText(self, textType):
        usedFilename = self.model.writeText(os.path.join(self.directory, "model" + textType))
        fromText = RegressionModel.readText(usedFilename)
        self.assertEqual(self.model, fromText)
        return fromText

    def test_Text(self):
        self.runText(".json")
        self.runText(".yaml")
        fromText = self.runText(".ecsv")

        fromText.updateMetadata(setDate=True)
        self.assertNotEqual(self.model, fromText)

    def test_NoCovariance(self):
        self.model.covariance = None
        self.runText(".json")
        self.runText(".ecsv")

    def test_Mismatch(self):
        other = RegressionModel(family="GBIIG", covariateNames=["intercept", "age"], beta=[7.5, 0.02],
                                alpha=self.model.alpha, nll=1234.5)
        self.assertNotEqual(self.model, other)
        self.assertNotEqual(self.model, GofReport())

    def test_BadFiles(self):
        filename = GofReport(family="BG").writeText(os.path.join(self.directory, "gof.json"))
        with self.assertRaises(RuntimeError):
            RegressionModel.readText(filename)
        with self.assertRaises(RuntimeError):
            self.model.writeText(os.path.join(self.directory, "model.fits"))
        with self.assertRaises(RuntimeError):
            RegressionModel.readText(os.path.join(self.directory, "model.txt"))

    def test_Builtin(self):
        value = toBuiltin({"a": np.array([1.0, np.nan]), "b": np.int64(3), "c": np.bool_(True),
                           "d": (np.float32(0.5),)})
        self.assertEqual(value, {"a": [1.0, None], "b": 3, "c": True, "d": [0.5]})
        self.assertIsInstance(value["b"], int)
        self.assertTrue(math.isnan(fromBuiltin(None)))
        self.assertEqual(fromBuiltin(2.5), 2.5)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
