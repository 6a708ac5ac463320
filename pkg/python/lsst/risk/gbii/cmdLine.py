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
"""Command-line driver: ``compGbii.py {fit,simulate,gof,risk,predict,report}``.

Exit codes: 0 success, 1 input error, 2 numerical non-convergence (artifacts
are still written), 3 internal error.
"""

__all__ = ["main", "makeParser", "EXIT_OK", "EXIT_INPUT", "EXIT_NONCONVERGENCE", "EXIT_INTERNAL"]

import argparse
import json
import logging
import os
import sys
import tomllib

import numpy as np
from astropy.table import Table

import lsst.pex.config as pexConfig
from lsst.utils.logging import getLogger

from .composite import ROSTER
from .diagnostics import (REFERENCE_COMPETITORS, GoodnessOfFitConfig, GoodnessOfFitTask, aicBic,
                          compareRisk, mseTable, modelSelectionTable, riskGrid, writeQqSvg)
from .exceptions import (ConvergenceError, DataError, DimensionError, DomainError, InsufficientTailError,
                         MomentExistenceError, RankDeficientError, SampleSizeError, UnknownFamilyError)
from .lossData import designMatrix, parseFormula, readCsv, readSchema, split
from .regression import (CompositeGbiiRegressionConfig, CompositeGbiiRegressionTask, RegressionModel,
                         predictVar)
from .simulation import CompositeSimulationConfig, CompositeSimulationTask

_LOG = getLogger(__name__.partition(".")[2])

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGENCE = 2
EXIT_INTERNAL = 3

_INPUT_ERRORS = (DataError, DomainError, SampleSizeError, RankDeficientError, UnknownFamilyError,
                 DimensionError, InsufficientTailError, MomentExistenceError, FileNotFoundError,
                 pexConfig.FieldValidationError)

_FIT_EPILOG = """artifacts:
  model.json        family, covariate names, beta, alpha, covariance, status
  fit_report.json   estimates, NLL/AIC/BIC, threshold range, solver trace
  fit_table.csv     name, scale, estimate, stdErr, zValue, pValue
  trace.csv         iteration, objective, gradNorm, maxViolation, rho,
                    innerStatus, innerIterations, lambda1, lambda2
  observations.csv  mu2, u, component (head|tail) per row
"""

_SIMULATE_EPILOG = """artifacts:
  estimates.csv  replicate, seed, status, nll, beta0.., alpha1..alpha6
                 (mixture design adds aic, bic and the Gamma and
                 inverse-Gaussian GLM aic/bic)
  summary.csv    parameter, n, truth, mean, median, q1, q3, whiskerLow,
                 whiskerHigh, nOutside
"""

_GOF_EPILOG = """artifacts:
  gof.json  ks, ad, cvm, pKs, pAd, pCvm, qqCorrelation, nBoot, nFailed, seed
  qq.csv    theoretical, empirical
  qq.svg    QQ plot of the quantile residuals
"""

_RISK_EPILOG = """artifacts:
  risk.csv       level, empiricalVar, modelVar, varDiffPct, empiricalTvar,
                 modelTvar, tvarDiffPct
  risk_grid.csv  model, bic, level, var, tvar, source
"""

_PREDICT_EPILOG = """artifacts:
  predict.csv  row, partition, loss, var<level> per level
  mse.csv      partition, level, mse, mseScaled (mse * 1e-8)
"""

_REPORT_EPILOG = """artifacts:
  selection.csv  model, nParams, nll, aic, bic, aicRank, bicRank, status
  risk_grid.csv  model, bic, level, var, tvar, source
"""


def _levels(text):
    try:
        levels = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated numbers; got {text!r}")
    if not levels or any(not 0.0 < level < 1.0 for level in levels):
        raise argparse.ArgumentTypeError(f"levels must lie in (0, 1); got {text!r}")
    return levels


def makeParser():
    """Build the argument parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="CSV file of losses (header row required).")
    common.add_argument("--schema", help="JSON, YAML or TOML schema naming the response and covariates.")
    common.add_argument("--formula", help='Model formula, e.g. "loss ~ Gender + Age" or "loss ~ 1".')
    common.add_argument("--family", choices=sorted(ROSTER), help="Composite model (default ComGBII).")
    common.add_argument("--out", default=".", help="Output directory.")
    common.add_argument("--seed", type=int, help="Random seed.")
    common.add_argument("--threads", type=int, help="Worker count for replicates (default 1).")
    common.add_argument("--config", help="TOML or JSON file whose keys override the flags.")
    common.add_argument("--log-level", dest="logLevel", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level.")

    parser = argparse.ArgumentParser(prog="compGbii.py",
                                     description="Composite GBII regression for insurance losses.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    raw = argparse.RawDescriptionHelpFormatter

    subparsers.add_parser("fit", parents=[common], epilog=_FIT_EPILOG, formatter_class=raw,
                          help="Fit a composite GBII regression.")

    simulate = subparsers.add_parser("simulate", parents=[common], epilog=_SIMULATE_EPILOG,
                                     formatter_class=raw, help="Run the Monte-Carlo study.")
    simulate.add_argument("--replicates", type=int, help="Number of replicates (default 100).")
    simulate.add_argument("--design", choices=["composite", "mixture"], default="composite",
                          help="Data-generating process.")
    simulate.add_argument("--n", type=int, dest="nObs", help="Observations per replicate (default 2000).")

    gof = subparsers.add_parser("gof", parents=[common], epilog=_GOF_EPILOG, formatter_class=raw,
                                help="Bootstrap goodness-of-fit tests of an intercept-only fit.")
    gof.add_argument("--model", help="Fitted model JSON (default <out>/model.json).")
    gof.add_argument("--boot", type=int, help="Bootstrap replicates (default 2000).")
    gof.add_argument("--fast", action="store_true", help="Use 200 replicates.")

    risk = subparsers.add_parser("risk", parents=[common], epilog=_RISK_EPILOG, formatter_class=raw,
                                 help="Compare model and empirical VaR/TVaR.")
    risk.add_argument("--model", help="Fitted model JSON (default <out>/model.json).")
    risk.add_argument("--levels", type=_levels, help="Comma-separated levels (default 0.95,0.99).")

    predict = subparsers.add_parser("predict", parents=[common], epilog=_PREDICT_EPILOG,
                                    formatter_class=raw, help="Per-row VaR predictions and MSE.")
    predict.add_argument("--model", help="Fitted model JSON (default <out>/model.json).")
    predict.add_argument("--levels", type=_levels,
                         help="Comma-separated levels (default 0.2,0.4,0.5,0.6,0.8).")

    report = subparsers.add_parser("report", parents=[common], epilog=_REPORT_EPILOG,
                                   formatter_class=raw, help="Fit the whole roster and rank it.")
    report.add_argument("--levels", type=_levels, help="Comma-separated levels (default 0.95,0.99).")
    report.add_argument("--reference", action="store_true",
                        help="Add the published two-component competitors as reference rows.")
    return parser


def _loadConfigFile(filename):
    if filename.lower().endswith(".toml"):
        with open(filename, "rb") as f:
            return tomllib.load(f)
    with open(filename, "r") as f:
        return json.load(f)


def _applyOverrides(args):
    """Merge ``--config`` into ``args`` and return the schema it carries, if any."""
    if not args.config:
        return None
    overrides = _loadConfigFile(args.config)
    mapping = {"family": "family", "formula": "formula", "seed": "seed", "threads": "threads",
               "boot": "boot", "levels": "levels", "replicates": "replicates", "data": "data",
               "model": "model"}
    for key, attr in mapping.items():
        if key in overrides:
            setattr(args, attr, overrides[key])
    family = overrides.get("family")
    if isinstance(family, dict):
        matches = [name for name, pair in ROSTER.items() if pair == (family.get("head"), family.get("tail"))]
        if not matches:
            raise UnknownFamilyError(f"No composite model with components {family}.")
        args.family = matches[0]
    args.solverOverrides = overrides.get("solver", {})
    args.splitOverride = overrides.get("split")
    if "response" in overrides:
        overrides.setdefault("covariates", [])
        return overrides
    return None


def _schemaFor(args, configSchema):
    if configSchema is not None:
        return configSchema
    if args.schema:
        return readSchema(args.schema)
    response, covariates = parseFormula(args.formula) if args.formula else ("loss", [])
    return {"response": response, "covariates": [{"name": name, "type": "numeric"} for name in covariates]}


def _loadData(args, schema):
    if not args.data:
        raise DataError("--data is required for this command")
    dataset = readCsv(args.data, schema)
    covariates = args.formula if args.formula else schema.get("formula")
    design = designMatrix(dataset, covariates)
    return dataset, design


def _regressionConfig(args):
    config = CompositeGbiiRegressionConfig()
    config.family = args.family or "ComGBII"
    if args.seed is not None:
        config.seed = args.seed
    for key, value in getattr(args, "solverOverrides", {}).items():
        setattr(config.solver, key, value)
    config.validate()
    return config


def _writeTable(table, out, name):
    path = os.path.join(out, name)
    table.write(path, format="ascii.csv", overwrite=True)
    _LOG.info("Wrote %s.", path)
    return path


def _loadModel(args):
    path = args.model or os.path.join(args.out, "model.json")
    if not os.path.exists(path):
        raise DataError(f"Model file {path} does not exist; run 'fit' first")
    return RegressionModel.readText(path)


def _cmdFit(args, schema):
    dataset, design = _loadData(args, schema)
    task = CompositeGbiiRegressionTask(config=_regressionConfig(args))
    result = task.run(dataset.response, design.matrix, covariateNames=design.names)
    result.model.writeText(os.path.join(args.out, "model.json"))
    result.report.writeText(os.path.join(args.out, "fit_report.json"))
    _writeTable(result.report.toTable()[0], args.out, "fit_table.csv")
    _writeTable(result.report.traceTable(), args.out, "trace.csv")
    _writeTable(result.observations, args.out, "observations.csv")
    return EXIT_OK if result.converged else EXIT_NONCONVERGENCE


def _cmdSimulate(args, schema):
    config = CompositeSimulationConfig()
    config.design = args.design
    if args.replicates is not None:
        config.nReplicates = args.replicates
    if args.nObs is not None:
        config.nObs = args.nObs
    if args.seed is not None:
        config.rngSeed = args.seed
    if args.threads is not None:
        config.numThreads = args.threads
    if args.family:
        config.fit.family = args.family
    for key, value in getattr(args, "solverOverrides", {}).items():
        setattr(config.fit.solver, key, value)
    config.validate()
    result = CompositeSimulationTask(config=config).run()
    _writeTable(result.estimates, args.out, "estimates.csv")
    _writeTable(result.summary, args.out, "summary.csv")
    return EXIT_OK


def _cmdGof(args, schema):
    model = _loadModel(args)
    dataset = readCsv(args.data, schema) if args.data else None
    if dataset is None:
        raise DataError("--data is required for gof")
    config = GoodnessOfFitConfig()
    if args.boot is not None:
        config.nBoot = args.boot
    config.fastMode = args.fast
    if args.seed is not None:
        config.seed = args.seed
    if args.threads is not None:
        config.numThreads = args.threads
    config.refit.family = model.family
    config.validate()
    result = GoodnessOfFitTask(config=config).run(model, dataset.response)
    result.report.writeText(os.path.join(args.out, "gof.json"))
    _writeTable(Table({"theoretical": result.qq.theoretical, "empirical": result.qq.empirical}),
                args.out, "qq.csv")
    writeQqSvg(result.qq, os.path.join(args.out, "qq.svg"), title=f"{model.family}: R = "
               f"{result.qq.correlation:.4f}")
    return EXIT_OK


def _cmdRisk(args, schema):
    model = _loadModel(args)
    if not args.data:
        raise DataError("--data is required for risk")
    dataset = readCsv(args.data, schema)
    levels = args.levels or [0.95, 0.99]
    comparisons = compareRisk(model, dataset.response, levels)
    rows = [comparison.toDict() for comparison in comparisons]
    _writeTable(Table({key: [row[key] for row in rows] for key in rows[0]}), args.out, "risk.csv")
    bic = aicBic(model.nll, model.nFree, model.nObs).bic
    _writeTable(riskGrid([(model.family, bic, model)], levels), args.out, "risk_grid.csv")
    return EXIT_OK


def _cmdPredict(args, schema):
    model = _loadModel(args)
    dataset, design = _loadData(args, schema)
    if design.names != model.covariateNames:
        raise DataError(f"Design columns {design.names} do not match the model's {model.covariateNames}")
    levels = args.levels or [0.2, 0.4, 0.5, 0.6, 0.8]
    splitConfig = getattr(args, "splitOverride", None) or schema.get("split")
    if splitConfig:
        _, _, trainIndex, testIndex = split(dataset, splitConfig["ratio"], splitConfig.get("seed", 0))
        partitions = {"in-sample": trainIndex, "out-of-sample": testIndex}
    else:
        partitions = {"all": np.arange(dataset.n)}

    partitionLabel = np.empty(dataset.n, dtype=object)
    for name, index in partitions.items():
        partitionLabel[index] = name
    predictions = Table({"row": np.arange(1, dataset.n + 1), "partition": partitionLabel.astype(str),
                         "loss": dataset.response})
    for level in levels:
        predictions[f"var{level:g}"] = np.atleast_1d(predictVar(model, design.matrix, level))
    _writeTable(predictions, args.out, "predict.csv")
    table = mseTable(model, {name: (dataset.response[index], design.matrix[index])
                             for name, index in partitions.items()}, levels)
    _writeTable(table, args.out, "mse.csv")
    return EXIT_OK


def _cmdReport(args, schema):
    dataset, design = _loadData(args, schema)
    levels = args.levels or [0.95, 0.99]
    results = []
    statuses = {}
    gridEntries = []
    code = EXIT_OK
    for family in ROSTER:
        args.family = family
        task = CompositeGbiiRegressionTask(config=_regressionConfig(args))
        try:
            result = task.run(dataset.response, design.matrix, covariateNames=design.names)
        except ConvergenceError as e:
            _LOG.warning("Fit of %s failed: %s", family, e)
            statuses[family] = "failed"
            code = EXIT_NONCONVERGENCE
            continue
        model = result.model
        results.append((family, model.nFree, model.nll))
        statuses[family] = model.status
        if not result.converged:
            code = EXIT_NONCONVERGENCE
        if model.interceptOnly:
            gridEntries.append((family, result.report.bic, model))
    if args.reference:
        for name, entry in REFERENCE_COMPETITORS.items():
            results.append((name, entry["nParams"], entry["nll"]))
            statuses[name] = "reference"
    if not results:
        return EXIT_NONCONVERGENCE
    table = modelSelectionTable(results, dataset.n)
    table["status"] = [statuses[name] for name in table["model"]]
    _writeTable(table, args.out, "selection.csv")
    reference = REFERENCE_COMPETITORS if args.reference else None
    if gridEntries or reference:
        _writeTable(riskGrid(gridEntries, levels, reference=reference, nObs=dataset.n), args.out,
                    "risk_grid.csv")
    return code


_COMMANDS = {"fit": _cmdFit, "simulate": _cmdSimulate, "gof": _cmdGof, "risk": _cmdRisk,
             "predict": _cmdPredict, "report": _cmdReport}


def main(argv=None):
    """Run one subcommand and return its exit code."""
    parser = makeParser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.logLevel),
                        format="%(levelname)s %(name)s: %(message)s")
    args.solverOverrides = {}
    args.splitOverride = None
    try:
        configSchema = _applyOverrides(args)
        schema = _schemaFor(args, configSchema)
        os.makedirs(args.out, exist_ok=True)
        return _COMMANDS[args.command](args, schema)
    except _INPUT_ERRORS as e:
        _LOG.error("%s", e)
        return EXIT_INPUT
    except ConvergenceError as e:
        _LOG.error("Numerical non-convergence: %s", e)
        return EXIT_NONCONVERGENCE
    except Exception:
        _LOG.exception("Internal error in %s.", args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
