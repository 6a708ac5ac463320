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

import mpmath
import numpy as np

import lsst.utils.tests

from lsst.risk.gbii import (ConvergenceError, DomainError, SeriesControl, digamma, invRegIncBeta,
                            logBeta, logIncBetaGradient, regHyp3F2, regIncBeta, regIncBetaComplement)


def betaOracle(x, a, b):
    return float(mpmath.betainc(a, b, 0, x, regularized=True))


class SpecialFunctionsTestCase(lsst.utils.tests.TestCase):
    """Special functions against closed forms and mpmath."""

    def setUp(self):
        mpmath.mp.dps = 30

    def testLogBeta(self):
        self.assertEqual(logBeta(1.0, 1.0), 0.0)
        self.assertFloatsAlmostEqual(logBeta(2.0, 3.0), np.log(1.0/12.0), rtol=1e-14)
        # Shapes from a heavy-tailed fit; lgamma differences must stay finite.
        value = logBeta(1.0, 1146.7)
        self.assertFloatsAlmostEqual(value, float(mpmath.log(mpmath.beta(1, 1146.7))), rtol=1e-12)
        values = logBeta(np.array([1.0, 2.0]), np.array([1.0, 3.0]))
        self.assertFloatsAlmostEqual(values, np.array([0.0, np.log(1.0/12.0)]), atol=1e-14)

    def testLogBetaDomain(self):
        with self.assertRaises(DomainError):
            logBeta(0.0, 1.0)
        with self.assertRaises(DomainError):
            logBeta(1.0, -2.0)

    def testRegIncBeta(self):
        self.assertFloatsAlmostEqual(regIncBeta(0.3, 1.0, 1.0), 0.3, rtol=1e-14)
        self.assertFloatsAlmostEqual(regIncBeta(0.5, 2.0, 2.0), 0.5, rtol=1e-14)
        self.assertFloatsAlmostEqual(regIncBeta(0.25, 3.0, 1.5), betaOracle(0.25, 3.0, 1.5), rtol=1e-10)
        self.assertEqual(regIncBeta(0.0, 2.0, 3.0), 0.0)
        self.assertEqual(regIncBeta(1.0, 2.0, 3.0), 1.0)
        for x, a, b in [(0.1, 0.5, 0.28), (0.9, 16.0, 1146.7), (1e-4, 1.0, 1146.7)]:
            self.assertFloatsAlmostEqual(regIncBeta(x, a, b), betaOracle(x, a, b), rtol=1e-9, atol=1e-300)

    def testRegIncBetaComplement(self):
        x, a, b = 0.999, 2.0, 30.0
        oracle = float(1 - mpmath.betainc(a, b, 0, x, regularized=True))
        self.assertFloatsAlmostEqual(regIncBetaComplement(x, a, b), oracle, rtol=1e-8)
        self.assertFloatsAlmostEqual(regIncBeta(0.4, 2.5, 1.5) + regIncBetaComplement(0.4, 2.5, 1.5), 1.0,
                                     rtol=1e-14)

    def testRegIncBetaDomain(self):
        with self.assertRaises(DomainError):
            regIncBeta(1.5, 1.0, 1.0)
        with self.assertRaises(DomainError):
            regIncBeta(0.5, 0.0, 1.0)

    def testInvRegIncBeta(self):
        self.assertFloatsAlmostEqual(invRegIncBeta(0.5, 1.0, 1.0), 0.5, rtol=1e-12)
        x = invRegIncBeta(0.9, 2.0, 5.0)
        self.assertFloatsAlmostEqual(betaOracle(x, 2.0, 5.0), 0.9, atol=1e-10)
        levels = np.array([1e-10, 0.01, 0.5, 0.99, 1.0 - 1e-10])
        for a, b in [(0.5, 0.28), (1.0, 1146.7), (16.0, 0.5)]:
            xs = invRegIncBeta(levels, a, b)
            self.assertTrue(np.all(np.diff(xs) >= 0))
            self.assertFloatsAlmostEqual(regIncBeta(xs, a, b), levels, rtol=1e-8, atol=1e-12)

    def testInvRegIncBetaDomain(self):
        for q in (0.0, 1.0, -0.1):
            with self.assertRaises(DomainError):
                invRegIncBeta(q, 1.0, 1.0)

    def testDigamma(self):
        eulerGamma = 0.5772156649015329
        self.assertFloatsAlmostEqual(digamma(1.0), -eulerGamma, rtol=1e-12)
        self.assertFloatsAlmostEqual(digamma(2.0), 1.0 - eulerGamma, rtol=1e-12)
        for x in (0.1, 1.0, 10.0):
            self.assertFloatsAlmostEqual(digamma(x + 1.0) - digamma(x) - 1.0/x, 0.0, atol=1e-12)
        with self.assertRaises(DomainError):
            digamma(0.0)

    def testRegHyp3F2(self):
        gammaInv = float(1/(mpmath.gamma(2)*mpmath.gamma(3.5)))
        self.assertFloatsAlmostEqual(regHyp3F2(1.0, 2.0, 3.0, 2.0, 3.5, 0.0), gammaInv, rtol=1e-14)
        self.assertFloatsAlmostEqual(regHyp3F2(1.0, 2.0, 0.0, 2.0, 3.5, 0.7), gammaInv, rtol=1e-14)
        oracle = float(mpmath.hyp3f2(1, 1, 0.5, 2, 2, 0.3))
        self.assertFloatsAlmostEqual(regHyp3F2(1.0, 1.0, 0.5, 2.0, 2.0, 0.3), oracle, rtol=1e-10)

    def testRegHyp3F2Controls(self):
        with self.assertRaises(DomainError):
            regHyp3F2(1.0, 1.0, 1.0, 2.0, 2.0, 1.0)
        with self.assertRaises(DomainError):
            regHyp3F2(1.0, 1.0, 1.0, -1.0, 2.0, 0.5)
        control = SeriesControl()
        control.maxTerms = 3
        with self.assertRaises(ConvergenceError):
            regHyp3F2(1.0, 1.0, 0.5, 2.0, 2.0, 0.99, control=control)

    def testLogIncBetaGradient(self):
        def logI(z, a, b, upper):
            value = mpmath.betainc(a, b, 0, z, regularized=True)
            return mpmath.log(1 - value) if upper else mpmath.log(value)

        for z, a, b in [(0.3, 1.5, 2.5), (0.8, 0.5, 0.28), (0.05, 3.0, 1.2)]:
            for upper in (False, True):
                dA, dB, dZ = logIncBetaGradient(z, a, b, upper=upper)
                self.assertFloatsAlmostEqual(dA, float(mpmath.diff(lambda t: logI(z, t, b, upper), a)),
                                             rtol=1e-6)
                self.assertFloatsAlmostEqual(dB, float(mpmath.diff(lambda t: logI(z, a, t, upper), b)),
                                             rtol=1e-6)
                self.assertFloatsAlmostEqual(dZ, float(mpmath.diff(lambda t: logI(t, a, b, upper), z)),
                                             rtol=1e-6)
        with self.assertRaises(DomainError):
            logIncBetaGradient(1.0, 1.0, 1.0)


class MemoryTester(lsst.utils.tests.MemoryTestCase):
    pass


def setup_module(module):
    lsst.utils.tests.init()


if __name__ == "__main__":
    import sys
    setup_module(sys.modules[__name__])
    unittest.main()
