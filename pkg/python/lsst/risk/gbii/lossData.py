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
"""Loss datasets: CSV and schema input, categorical encoding, design
matrices, train/test splits and simulated data sets.
"""

__all__ = ["Dataset", "DesignMatrix", "MEDICAL_SCHEMA", "readSchema", "readCsv", "writeCsv",
           "parseFormula", "designMatrix", "split", "summaryStatistics", "simulateMixture",
           "simulateCompositeRegression", "simulateMedicalClaims"]

import json
import math
import os.path
import tomllib

import numpy as np
import scipy.stats
import yaml
from astropy.io import ascii
from astropy.table import Table

from lsst.utils.logging import getLogger

from .composite import ROSTER, CompositeParams, compositeSample, deriveImplied
from .exceptions import DataError, DomainError

_LOG = getLogger(__name__.partition(".")[2])

# Covariates of the inpatient-claims example; the first declared level of a
# categorical is its reference.
MEDICAL_SCHEMA = {
    "response": "loss",
    "covariates": [
        {"name": "Gender", "type": "categorical", "levels": ["Male", "Female"]},
        {"name": "Age", "type": "numeric"},
        {"name": "SSCoverage", "type": "categorical", "levels": ["0", "1"]},
        {"name": "HospitalDays", "type": "numeric"},
        {"name": "ClaimType", "type": "categorical", "levels": ["MTD", "MTA", "Other"]},
    ],
    "family": "ComGBII",
    "split": {"ratio": 0.6, "seed": 1},
}


class Dataset:
    """Positive losses with named covariate columns.

    Parameters
    ----------
    response : `numpy.ndarray`
        Positive losses.
    columns : `dict` [`str`, `numpy.ndarray`], optional
        Covariate columns, numeric or string-valued.
    types : `dict` [`str`, `str`], optional
        ``numeric`` or ``categorical`` per column; inferred from the dtype
        when missing.
    levels : `dict` [`str`, `list`], optional
        Declared levels of categorical columns, reference first.
    responseName : `str`, optional
        Name of the response column.

    Raises
    ------
    DataError
        Raised on a non-positive response or a column of the wrong length.
    """
    def __init__(self, response, columns=None, types=None, levels=None, responseName="loss"):
        self.response = np.asarray(response, dtype=float)
        bad = np.flatnonzero(~(self.response > 0) | ~np.isfinite(self.response))
        if bad.size:
            raise DataError(f"Response must be positive and finite; got {self.response[bad[0]]}",
                            row=int(bad[0]) + 1, column=responseName)
        self.responseName = responseName
        self.columns = {}
        self.types = {}
        for name, values in (columns or {}).items():
            values = np.asarray(values)
            if values.shape != self.response.shape:
                raise DataError(f"Column has {values.size} values for {self.n} responses", column=name)
            kind = (types or {}).get(name)
            if kind is None:
                kind = "numeric" if np.issubdtype(values.dtype, np.number) else "categorical"
            if kind not in ("numeric", "categorical"):
                raise DataError(f"Unknown column type '{kind}'", column=name)
            self.columns[name] = values.astype(float) if kind == "numeric" else values.astype(str)
            self.types[name] = kind
        self.levels = {name: [str(level) for level in declared]
                       for name, declared in (levels or {}).items()}

    @property
    def n(self):
        return self.response.size

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return False
        return (self.responseName == other.responseName
                and np.array_equal(self.response, other.response)
                and self.types == other.types
                and set(self.columns) == set(other.columns)
                and all(np.array_equal(self.columns[name], other.columns[name]) for name in self.columns))

    def subset(self, indices):
        """Dataset restricted to the given row indices."""
        indices = np.asarray(indices, dtype=int)
        columns = {name: values[indices] for name, values in self.columns.items()}
        return Dataset(self.response[indices], columns,
                       types=self.types, levels=self.levels, responseName=self.responseName)


class DesignMatrix:
    """Design matrix with a leading intercept column.

    Attributes
    ----------
    matrix : `numpy.ndarray`
        ``n x (k + 1)`` matrix.
    names : `list` [`str`]
        Column names, ``intercept`` first.
    encoding : `dict` [`str`, `dict`]
        Per categorical covariate, the map from non-reference level to
        column name.
    """
    def __init__(self, matrix, names, encoding=None):
        self.matrix = np.asarray(matrix, dtype=float)
        self.names = list(names)
        self.encoding = dict(encoding or {})

    @property
    def shape(self):
        return self.matrix.shape

    def rows(self, indices):
        return DesignMatrix(self.matrix[np.asarray(indices, dtype=int)], self.names, self.encoding)


def readSchema(filename):
    """Read a dataset schema from JSON, YAML or TOML.

    The schema names the ``response`` and lists ``covariates`` as
    ``{name, type[, levels]}``; optional keys ``family``, ``formula``,
    ``split`` and ``solver`` are passed through.

    Raises
    ------
    DataError
        Raised for an unknown extension or a schema without a response.
    """
    lower = filename.lower()
    if lower.endswith(".json"):
        with open(filename, "r") as f:
            schema = json.load(f)
    elif lower.endswith((".yaml", ".yml")):
        with open(filename, "r") as f:
            schema = yaml.safe_load(f)
    elif lower.endswith(".toml"):
        with open(filename, "rb") as f:
            schema = tomllib.load(f)
    else:
        raise DataError(f"Unknown schema extension: {filename}")
    if not isinstance(schema, dict) or "response" not in schema:
        raise DataError(f"Schema {filename} does not name a response column")
    schema.setdefault("covariates", [])
    for entry in schema["covariates"]:
        if "name" not in entry:
            raise DataError(f"Covariate entry without a name in {filename}: {entry}")
        entry.setdefault("type", "numeric")
    return schema


def _parseNumber(value, row, column):
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise DataError(f"Cannot parse '{value}' as a number", row=row, column=column) from None
    return number


def readCsv(filename, schema):
    """Read a comma-separated loss file.

    Parameters
    ----------
    filename : `str`
        CSV file with a header row.
    schema : `dict`
        Schema as returned by `readSchema`.

    Returns
    -------
    dataset : `Dataset`
        The parsed dataset.

    Raises
    ------
    DataError
        Raised for a missing file or column, an empty or unparsable cell,
        or a non-positive response; rows are counted from 1 after the header.
    """
    if not os.path.exists(filename):
        raise DataError(f"Data file {filename} does not exist")
    try:
        table = ascii.read(filename, format="csv", guess=False)
    except Exception as e:
        raise DataError(f"Cannot read {filename} as CSV: {e}") from e

    responseName = schema["response"]
    wanted = [responseName] + [entry["name"] for entry in schema.get("covariates", [])]
    for name in wanted:
        if name not in table.colnames:
            raise DataError(f"Missing column in {filename}", column=name)
        column = table[name]
        if hasattr(column, "mask") and np.any(column.mask):
            row = int(np.flatnonzero(column.mask)[0]) + 1
            raise DataError("Empty cell", row=row, column=name)

    response = np.array([_parseNumber(value, row, responseName)
                         for row, value in enumerate(table[responseName], start=1)])
    bad = np.flatnonzero(~(response > 0))
    if bad.size:
        raise DataError(f"Response must be positive; got {response[bad[0]]}", row=int(bad[0]) + 1,
                        column=responseName)

    columns = {}
    types = {}
    levels = {}
    for entry in schema.get("covariates", []):
        name = entry["name"]
        types[name] = entry["type"]
        if entry["type"] == "numeric":
            columns[name] = np.array([_parseNumber(value, row, name)
                                      for row, value in enumerate(table[name], start=1)])
        elif entry["type"] == "categorical":
            columns[name] = np.array([str(value) for value in table[name]])
            if "levels" in entry:
                levels[name] = [str(level) for level in entry["levels"]]
                unknown = np.flatnonzero(~np.isin(columns[name], levels[name]))
                if unknown.size:
                    raise DataError(f"Undeclared level '{columns[name][unknown[0]]}'",
                                    row=int(unknown[0]) + 1, column=name)
        else:
            raise DataError(f"Unknown covariate type '{entry['type']}'", column=name)
    _LOG.info("Read %d losses with %d covariates from %s.", response.size, len(columns), filename)
    return Dataset(response, columns, types=types, levels=levels, responseName=responseName)


def writeCsv(dataset, filename):
    """Write a dataset as CSV with the response first."""
    table = Table()
    table[dataset.responseName] = dataset.response
    for name, values in dataset.columns.items():
        table[name] = values
    table.write(filename, format="ascii.csv", overwrite=True)
    return filename


def parseFormula(formula):
    """Split ``"loss ~ a + b"`` into ``("loss", ["a", "b"])``; ``~ 1`` means no covariates."""
    if formula.count("~") != 1:
        raise DataError(f"Formula must contain exactly one '~': {formula!r}")
    left, right = (part.strip() for part in formula.split("~"))
    if not left:
        raise DataError(f"Formula has no response: {formula!r}")
    terms = [term.strip() for term in right.split("+")]
    if any(not term for term in terms):
        raise DataError(f"Empty term in formula: {formula!r}")
    return left, [term for term in terms if term not in ("1", "0")]


def _referenceOrder(dataset, name):
    observed = sorted(set(dataset.columns[name].tolist()))
    declared = dataset.levels.get(name)
    if declared:
        return declared + [level for level in observed if level not in declared]
    return observed


def designMatrix(dataset, covariates=None):
    """Build the design matrix of a dataset.

    Numeric covariates pass through; a categorical covariate becomes one
    indicator column ``name_level`` per non-reference level.  The reference
    is the first declared level, or the lexicographically first observed
    level when none are declared.

    Parameters
    ----------
    dataset : `Dataset`
        Input data.
    covariates : `list` [`str`] or `str`, optional
        Covariate names, or a formula ``"loss ~ a + b"``; all columns by
        default.

    Returns
    -------
    design : `DesignMatrix`
        Design with the intercept first.

    Raises
    ------
    DataError
        Raised for an unknown covariate.
    """
    if isinstance(covariates, str):
        _, covariates = parseFormula(covariates)
    if covariates is None:
        covariates = list(dataset.columns)

    blocks = [np.ones(dataset.n)]
    names = ["intercept"]
    encoding = {}
    for name in covariates:
        if name not in dataset.columns:
            raise DataError(f"Unknown covariate '{name}'", column=name)
        values = dataset.columns[name]
        if dataset.types[name] == "numeric":
            blocks.append(values.astype(float))
            names.append(name)
            continue
        order = _referenceOrder(dataset, name)
        encoding[name] = {}
        for level in order[1:]:
            column = f"{name}_{level}"
            blocks.append((values == level).astype(float))
            names.append(column)
            encoding[name][level] = column

    matrix = np.column_stack(blocks)
    for index in range(1, matrix.shape[1]):
        if np.ptp(matrix[:, index]) == 0:
            _LOG.warning("Design column %s is constant; the design is rank deficient.", names[index])
    return DesignMatrix(matrix, names, encoding)


def split(dataset, ratio, seed=0):
    """Random train/test partition.

    The training set has ``ceil(ratio n)`` rows; both parts keep the
    original row order.

    Returns
    -------
    train, test : `Dataset`
        The two parts.
    trainIndex, testIndex : `numpy.ndarray`
        Row indices of the parts.
    """
    if not 0.0 < ratio < 1.0:
        raise DomainError(f"Split ratio must lie in (0, 1); got {ratio}.")
    nTrain = math.ceil(ratio*dataset.n)
    permutation = np.random.RandomState(seed).permutation(dataset.n)
    trainIndex = np.sort(permutation[:nTrain])
    testIndex = np.sort(permutation[nTrain:])
    return dataset.subset(trainIndex), dataset.subset(testIndex), trainIndex, testIndex


def summaryStatistics(losses):
    """Minimum, mean, standard deviation, median and maximum of the losses."""
    losses = losses.response if isinstance(losses, Dataset) else np.asarray(losses, dtype=float)
    return {"n": int(losses.size), "min": float(np.min(losses)), "mean": float(np.mean(losses)),
            "sd": float(np.std(losses, ddof=1)), "median": float(np.median(losses)),
            "max": float(np.max(losses))}


def simulateMixture(n=2000, nTail=200, betaBody=(2.0, 2.0, 1.5), phiBody=1.5, betaLocation=(1.0, 0.5, 0.5),
                    betaScale=(3.0, 0.5, 1.0), xi=1.5, seed=None):
    """Gamma body plus generalized Pareto tail with shared covariates.

    The first ``n - nTail`` losses are Gamma with mean ``exp(x^T betaBody)``
    and dispersion ``phiBody``; the rest are generalized Pareto with
    location ``exp(x^T betaLocation)``, scale ``exp(x^T betaScale)`` and
    shape ``xi``.  Covariates are independent standard normals.

    Returns
    -------
    dataset : `Dataset`
        Columns ``x1 .. xk``.
    """
    if not 0 <= nTail < n:
        raise DomainError(f"Need 0 <= nTail < n; got nTail={nTail}, n={n}.")
    betaBody, betaLocation, betaScale = (np.asarray(b, dtype=float)
                                         for b in (betaBody, betaLocation, betaScale))
    if not betaBody.size == betaLocation.size == betaScale.size:
        raise DomainError("Body, location and scale coefficients must have the same length.")
    rng = np.random.RandomState(seed)
    covariates = rng.standard_normal((n, betaBody.size - 1))
    design = np.column_stack([np.ones(n), covariates])

    nBody = n - nTail
    mean = np.exp(design[:nBody] @ betaBody)
    body = rng.gamma(shape=1.0/phiBody, scale=mean*phiBody)
    tail = scipy.stats.genpareto.rvs(c=xi, loc=np.exp(design[nBody:] @ betaLocation),
                                     scale=np.exp(design[nBody:] @ betaScale), random_state=rng)
    columns = {f"x{i}": covariates[:, i - 1] for i in range(1, betaBody.size)}
    return Dataset(np.concatenate([body, tail]), columns)


def simulateCompositeRegression(n, beta, alpha, family="ComGBII", seed=None):
    """Losses from a composite GBII regression with standard-normal covariates.

    Returns
    -------
    dataset : `Dataset`
        Columns ``x1 .. xk`` for ``k = len(beta) - 1``.
    """
    beta = np.asarray(beta, dtype=float)
    rng = np.random.RandomState(seed)
    covariates = rng.standard_normal((n, beta.size - 1))
    design = np.column_stack([np.ones(n), covariates])
    head, tail = ROSTER[family]
    params = CompositeParams.fromAlpha(np.exp(design @ beta), alpha, headFamily=head, tailFamily=tail)
    response = compositeSample(n, params, deriveImplied(params), seed=rng.randint(0, 2**31 - 1))
    columns = {f"x{i}": covariates[:, i - 1] for i in range(1, beta.size)}
    return Dataset(response, columns)


def simulateMedicalClaims(n=1000, seed=None,
                          beta=(8.0, -0.03, 0.01, 0.3, 0.05, 0.4, -0.2),
                          alpha=tuple(np.log([1.5, 2.0, 2.0, 1.5, 1.5, 1.5])), family="ComGBII"):
    """Synthetic inpatient claims following `MEDICAL_SCHEMA`.

    Coefficients are ordered as the columns of the design matrix:
    intercept, Gender_Female, Age, SSCoverage_1, HospitalDays,
    ClaimType_MTA, ClaimType_Other.
    """
    rng = np.random.RandomState(seed)
    columns = {
        "Gender": rng.choice(["Male", "Female"], size=n),
        "Age": rng.randint(18, 90, size=n).astype(float),
        "SSCoverage": rng.choice(["0", "1"], size=n, p=[0.4, 0.6]),
        "HospitalDays": np.minimum(rng.poisson(6.0, size=n), 184).astype(float),
        "ClaimType": rng.choice(["MTD", "MTA", "Other"], size=n, p=[0.5, 0.3, 0.2]),
    }
    types = {entry["name"]: entry["type"] for entry in MEDICAL_SCHEMA["covariates"]}
    levels = {entry["name"]: entry["levels"] for entry in MEDICAL_SCHEMA["covariates"] if "levels" in entry}
    placeholder = Dataset(np.ones(n), columns, types=types, levels=levels)
    design = designMatrix(placeholder)
    head, tail = ROSTER[family]
    params = CompositeParams.fromAlpha(np.exp(design.matrix @ np.asarray(beta, dtype=float)), alpha,
                                       headFamily=head, tailFamily=tail)
    response = compositeSample(n, params, deriveImplied(params), seed=rng.randint(0, 2**31 - 1))
    return Dataset(response, columns, types=types, levels=levels, responseName=MEDICAL_SCHEMA["response"])
