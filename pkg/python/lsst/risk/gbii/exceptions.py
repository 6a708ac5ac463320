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

__all__ = ["CompGbiiError", "DomainError", "ConvergenceError", "MomentExistenceError",
           "ConstraintError", "NonFiniteError", "DimensionError", "RankDeficientError",
           "SampleSizeError", "SingularHessianError", "InsufficientTailError", "DataError",
           "UnknownFamilyError"]


class CompGbiiError(Exception):
    """Base class for errors raised by risk_gbii."""
    pass


class DomainError(CompGbiiError, ValueError):
    """An argument lies outside the domain of a function."""
    pass


class ConvergenceError(CompGbiiError, RuntimeError):
    """An iteration or series did not reach its tolerance."""
    pass


class MomentExistenceError(CompGbiiError, ValueError):
    """A requested moment does not exist for the given shapes."""
    pass


class ConstraintError(CompGbiiError, ValueError):
    """Mode-existence constraint p*nu > 1 is violated."""
    pass


class NonFiniteError(CompGbiiError, ArithmeticError):
    """A likelihood term overflowed or became undefined."""
    pass


class DimensionError(CompGbiiError, ValueError):
    """Covariate vector and coefficient vector lengths differ."""
    pass


class RankDeficientError(CompGbiiError, ValueError):
    """The design matrix does not have full column rank."""
    pass


class SampleSizeError(CompGbiiError, ValueError):
    """Too few observations for the number of parameters."""
    pass


class SingularHessianError(CompGbiiError, RuntimeError):
    """The observed information matrix cannot be inverted.

    Parameters
    ----------
    message : `str`
        Description of the failure.
    conditionNumber : `float`
        Condition number of the observed information matrix.
    """
    def __init__(self, message, conditionNumber):
        super().__init__(f"{message} (condition number {conditionNumber:.3g})")
        self.conditionNumber = conditionNumber


class InsufficientTailError(CompGbiiError, ValueError):
    """No observations lie above the empirical VaR."""
    pass


class DataError(CompGbiiError, ValueError):
    """An input table is malformed.

    Parameters
    ----------
    message : `str`
        Description of the failure.
    row : `int`, optional
        One-based data row (header excluded) of the offending cell.
    column : `str`, optional
        Name of the offending column.
    """
    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class UnknownFamilyError(CompGbiiError, ValueError):
    """A subfamily or roster name is not recognised."""
    pass
