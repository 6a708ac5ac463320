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
"""Model selection, residual diagnostics, bootstrap goodness of fit and
risk-measure comparisons for fitted composite GBII models.
"""

__all__ = ["REFERENCE_COMPETITORS", "aicBic", "pitValues", "quantileResiduals", "pitStatistics",
           "qqData", "empiricalRisk", "RiskComparison", "compareRisk", "mseQ", "mseTable",
           "glmBaseline", "modelSelectionTable", "riskGrid", "writeQqSvg", "GofReport",
           "GoodnessOfFitConfig", "GoodnessOfFitTask"]

import copy

import numpy as np
import scipy.special
import statsmodels.api as sm
from astropy.table import Table
from joblib import Parallel, delayed

import lsst.pex.config as pexConfig
import lsst.pipe.base as pipeBase
from lsst.utils.logging import getLogger

from .composite import compositeCdf, compositeSample, compositeSf, compositeTvar, compositeVar, deriveImplied
from .exceptions import (CompGbiiError, DimensionError, DomainError, InsufficientTailError,
                         MomentExistenceError, SampleSizeError)
from .fitProduct import FitProduct, fromBuiltin
from .regression import CompositeGbiiRegressionTask, RegressionModel, predictVar

_LOG = getLogger(__name__.partition(".")[2])

# Quantile residuals are clamped to this many standard deviations.
_RESIDUAL_LIMIT = 8.0

# Printed number of parameters, NLL, VaR and TVaR (keyed by level) of the
# competing two-component models fitted to the Danish fire losses; reference
# rows only.
REFERENCE_COMPETITORS = {
    "WIW": {"nParams": 4, "nll": 3820.01,
            "var": {0.95: 8.02, 0.99: 22.77}, "tvar": {0.95: 22.64, 0.99: 63.86}},
    "PIW": {"nParams": 4, "nll": 3820.14,
            "var": {0.95: 8.02, 0.99: 22.79}, "tvar": {0.95: 22.67, 0.99: 64.00}},
    "IBW": {"nParams": 5, "nll": 3816.34,
            "var": {0.95: 8.01, 0.99: 22.73}, "tvar": {0.95: 22.59, 0.99: 63.67}},
    "WIP": {"nParams": 4, "nll": 3820.93,
            "var": {0.95: 8.03, 0.99: 22.64}, "tvar": {0.95: 22.38, 0.99: 62.65}},
    "IBIP": {"nParams": 5, "nll": 3817.07,
             "var": {0.95: 8.03, 0.99: 22.65}, "tvar": {0.95: 22.39, 0.99: 62.69}},
    "IBB": {"nParams": 6, "nll": 3814.00,
            "var": {0.95: 8.22, 0.99: 25.13}, "tvar": {0.95: 26.88, 0.99: 82.15}},
}


def aicBic(nll, m, n):
    """Information criteria.

    Parameters
    ----------
    nll : `float`
        Negative log-likelihood.
    m : `int`
        Number of estimated parameters.
    n : `int`
        Sample size.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``aic = 2 nll + 2 m`` and ``bic = 2 nll + m log(n)``.
    """
    if m < 0 or n < 1:
        raise DomainError(f"Need m >= 0 and n >= 1; got m={m}, n={n}.")
    return pipeBase.Struct(aic=2.0*nll + 2.0*m, bic=2.0*nll + m*np.log(n))


def _tableFromRows(rows, names):
    return Table({name: [row[name] for row in rows] for name in names})


def _design(model, response, design):
    response = np.atleast_1d(np.asarray(response, dtype=float))
    if design is None:
        if not model.interceptOnly:
            raise DimensionError("A design matrix is required for a model with covariates.")
        design = np.ones((response.size, 1))
    design = np.asarray(design, dtype=float)
    if design.ndim == 1:
        design = design[:, np.newaxis]
    return response, design


def pitValues(model, response, design=None):
    """Probability integral transform ``F(y_i)`` and its complement ``1 - F(y_i)``.

    Parameters
    ----------
    model : `lsst.risk.gbii.RegressionModel`
        Fitted model.
    response : `numpy.ndarray`
        Losses.
    design : `numpy.ndarray`, optional
        Design matrix; defaults to an intercept column.

    Returns
    -------
    cdf, sf : `numpy.ndarray`
        Distribution and survival function at every loss.
    """
    response, design = _design(model, response, design)
    params = model.params(design)
    implied = deriveImplied(params)
    return (np.atleast_1d(compositeCdf(response, params, implied)),
            np.atleast_1d(compositeSf(response, params, implied)))


def quantileResiduals(model, response, design=None):
    """Normal scores ``Phi^{-1}(F(y_i))`` of the losses.

    The upper half is computed from the survival function so residuals in
    the far tail keep their precision.  Residuals beyond +/-8 (``F``
    numerically 0 or 1) are clamped and reported in the log.
    """
    cdf, sf = pitValues(model, response, design)
    residuals = np.where(cdf <= 0.5, scipy.special.ndtri(cdf), -scipy.special.ndtri(sf))
    clamp = ~np.isfinite(residuals) | (np.abs(residuals) > _RESIDUAL_LIMIT)
    if np.any(clamp):
        _LOG.warning("Clamped %d quantile residuals with F numerically 0 or 1 to +/-%g.",
                     np.sum(clamp), _RESIDUAL_LIMIT)
        residuals = np.clip(np.nan_to_num(residuals, nan=0.0, posinf=_RESIDUAL_LIMIT,
                                          neginf=-_RESIDUAL_LIMIT), -_RESIDUAL_LIMIT, _RESIDUAL_LIMIT)
    return residuals


def pitStatistics(cdf, sf=None):
    """Kolmogorov-Smirnov, Anderson-Darling and Cramer-von Mises statistics.

    Parameters
    ----------
    cdf : `numpy.ndarray`
        PIT values ``z_i = F(y_i)``.
    sf : `numpy.ndarray`, optional
        ``1 - z_i`` computed directly; defaults to ``1 - cdf``.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``ks``, ``ad`` and ``cvm``.  ``ad`` is ``inf`` when some ``z_i``
        is 0 or 1.
    """
    cdf = np.atleast_1d(np.asarray(cdf, dtype=float))
    sf = 1.0 - cdf if sf is None else np.atleast_1d(np.asarray(sf, dtype=float))
    n = cdf.size
    if n < 1:
        raise SampleSizeError("Goodness-of-fit statistics need at least one value.")
    order = np.argsort(cdf, kind="stable")
    z = cdf[order]
    upper = sf[order][::-1]
    i = np.arange(1, n + 1)

    ks = max(np.max(i/n - z), np.max(z - (i - 1)/n))
    with np.errstate(divide="ignore"):
        terms = (2*i - 1)*(np.log(z) + np.log(upper))
    ad = np.inf if not np.all(np.isfinite(terms)) else -n - np.sum(terms)/n
    cvm = np.sum((z - (2*i - 1)/(2.0*n))**2) + 1.0/(12.0*n)
    return pipeBase.Struct(ks=float(ks), ad=float(ad), cvm=float(cvm))


def _qqFromResiduals(residuals):
    empirical = np.sort(np.asarray(residuals, dtype=float))
    n = empirical.size
    theoretical = scipy.special.ndtri((np.arange(1, n + 1) - 0.5)/n)
    correlation = float(np.corrcoef(theoretical, empirical)[0, 1]) if n > 1 else np.nan
    return pipeBase.Struct(theoretical=theoretical, empirical=empirical, correlation=correlation)


def qqData(model, response, design=None):
    """Normal QQ pairs of the quantile residuals.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``theoretical`` (``Phi^{-1}((i - 0.5)/n)``), ``empirical`` (sorted
        residuals) and their Pearson ``correlation``.
    """
    return _qqFromResiduals(quantileResiduals(model, response, design))


def empiricalRisk(losses, q, method="linear"):
    """Empirical VaR and TVaR.

    Parameters
    ----------
    losses : `numpy.ndarray`
        Observed losses, at least two.
    q : `float`
        Level in (0, 1).
    method : `str`, optional
        Quantile rule passed to `numpy.quantile`; ``linear`` interpolates
        the order statistics.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``var`` and ``tvar``, the mean of the losses strictly above ``var``.

    Raises
    ------
    InsufficientTailError
        Raised if no loss exceeds ``var`` in a non-constant sample.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.size < 2:
        raise SampleSizeError(f"Empirical risk needs at least two losses; got {losses.size}.")
    if not 0.0 < q < 1.0:
        raise DomainError(f"Risk level must lie in (0, 1); got {q}.")
    var = float(np.quantile(losses, q, method=method))
    tail = losses[losses > var]
    if tail.size == 0:
        if np.ptp(losses) == 0:
            return pipeBase.Struct(var=var, tvar=var)
        raise InsufficientTailError(f"No losses above the empirical VaR {var:.6g} at level {q}.")
    return pipeBase.Struct(var=var, tvar=float(np.mean(tail)))


class RiskComparison:
    """Empirical against model VaR and TVaR at one level."""
    def __init__(self, level, empiricalVar, modelVar, empiricalTvar, modelTvar):
        self.level = float(level)
        self.empiricalVar = float(empiricalVar)
        self.modelVar = float(modelVar)
        self.empiricalTvar = float(empiricalTvar)
        self.modelTvar = float(modelTvar)

    @staticmethod
    def _diffPct(model, empirical):
        return 100.0*(model - empirical)/empirical

    @property
    def varDiffPct(self):
        return self._diffPct(self.modelVar, self.empiricalVar)

    @property
    def tvarDiffPct(self):
        return self._diffPct(self.modelTvar, self.empiricalTvar)

    def toDict(self):
        return {"level": self.level, "empiricalVar": self.empiricalVar, "modelVar": self.modelVar,
                "varDiffPct": self.varDiffPct, "empiricalTvar": self.empiricalTvar,
                "modelTvar": self.modelTvar, "tvarDiffPct": self.tvarDiffPct}

    def __repr__(self):
        return (f"RiskComparison(level={self.level}, var={self.modelVar:.4g} vs {self.empiricalVar:.4g}, "
                f"tvar={self.modelTvar:.4g} vs {self.empiricalTvar:.4g})")


def compareRisk(model, losses, levels=(0.95, 0.99)):
    """Compare an intercept-only model's VaR/TVaR with the empirical ones.

    A model whose tail mean does not exist reports ``inf`` TVaR.

    Returns
    -------
    comparisons : `list` [`RiskComparison`]
        One entry per level.
    """
    if not model.interceptOnly:
        raise DimensionError("Risk comparison needs an intercept-only (distribution) fit.")
    params = model.params(np.ones(1))
    implied = deriveImplied(params)
    comparisons = []
    for level in levels:
        empirical = empiricalRisk(losses, level)
        try:
            modelTvar = compositeTvar(level, params, implied)
        except MomentExistenceError as e:
            _LOG.warning("Model TVaR at level %g does not exist: %s", level, e)
            modelTvar = np.inf
        comparisons.append(RiskComparison(level, empirical.var, compositeVar(level, params, implied),
                                          empirical.tvar, modelTvar))
    return comparisons


def mseQ(model, response, design, q):
    """Sum of squared differences between losses and their predicted VaR at level ``q``."""
    response, design = _design(model, response, design)
    if response.size == 0:
        return 0.0
    prediction = np.atleast_1d(predictVar(model, design, q))
    return float(np.sum((response - prediction)**2))


def mseTable(model, partitions, levels=(0.2, 0.4, 0.5, 0.6, 0.8)):
    """Predictive MSE over partitions and levels.

    Parameters
    ----------
    model : `lsst.risk.gbii.RegressionModel`
        Fitted model.
    partitions : `dict` [`str`, `tuple`]
        Partition name to ``(response, design)``, e.g. ``in-sample`` and
        ``out-of-sample``.
    levels : `tuple` [`float`], optional
        Quantile levels.

    Returns
    -------
    table : `astropy.table.Table`
        Columns ``partition``, ``level``, ``mse`` and ``mseScaled`` (MSE
        times 1e-8).
    """
    rows = []
    for name, (response, design) in partitions.items():
        for level in levels:
            mse = mseQ(model, response, design, level)
            rows.append({"partition": name, "level": float(level), "mse": mse, "mseScaled": mse*1.0e-8})
    return _tableFromRows(rows, ("partition", "level", "mse", "mseScaled"))


def glmBaseline(response, design, family="gamma"):
    """Fit a log-link Gamma or inverse-Gaussian GLM as a comparison model.

    Parameters
    ----------
    response : `numpy.ndarray`
        Positive losses.
    design : `numpy.ndarray`
        Design matrix with intercept column.
    family : `str`, optional
        ``gamma`` or ``inverse_gaussian``.

    Returns
    -------
    result : `lsst.pipe.base.Struct`
        ``family``, ``params``, ``nll``, ``nParams`` (coefficients plus
        dispersion), ``aic`` and ``bic``.
    """
    families = {"gamma": sm.families.Gamma, "inverse_gaussian": sm.families.InverseGaussian}
    try:
        familyClass = families[family]
    except KeyError:
        raise DomainError(f"Unknown GLM family '{family}'; expected one of {sorted(families)}.") from None
    response = np.asarray(response, dtype=float)
    design = np.asarray(design, dtype=float)
    result = sm.GLM(response, design, family=familyClass(link=sm.families.links.Log())).fit()
    nll = -float(result.llf)
    nParams = design.shape[1] + 1
    criteria = aicBic(nll, nParams, response.size)
    return pipeBase.Struct(family=family, params=np.asarray(result.params), nll=nll, nParams=nParams,
                           aic=criteria.aic, bic=criteria.bic)


def modelSelectionTable(results, n):
    """Rank models by AIC and BIC.

    Parameters
    ----------
    results : iterable of (`str`, `int`, `float`)
        ``(name, number of parameters, NLL)`` per model.
    n : `int`
        Sample size.

    Returns
    -------
    table : `astropy.table.Table`
        Columns ``model``, ``nParams``, ``nll``, ``aic``, ``bic``,
        ``aicRank`` and ``bicRank``, sorted by AIC.
    """
    rows = []
    for name, nParams, nll in results:
        criteria = aicBic(nll, nParams, n)
        rows.append({"model": name, "nParams": int(nParams), "nll": float(nll), "aic": criteria.aic,
                     "bic": criteria.bic})
    table = _tableFromRows(rows, ("model", "nParams", "nll", "aic", "bic"))
    for column in ("aic", "bic"):
        ranks = np.empty(len(table), dtype=int)
        ranks[np.argsort(table[column], kind="stable")] = np.arange(1, len(table) + 1)
        table[column + "Rank"] = ranks
    table.sort("aic")
    return table


def riskGrid(entries, levels=(0.95, 0.99), reference=None, nObs=None):
    """Rows of (model, BIC, level, VaR, TVaR) behind a BIC-against-risk map.

    Parameters
    ----------
    entries : iterable of (`str`, `float`, `RegressionModel`)
        ``(name, BIC, intercept-only model)``.
    levels : `tuple` [`float`], optional
        Risk levels.
    reference : `dict`, optional
        Published models in the layout of `REFERENCE_COMPETITORS`; their
        printed VaR and TVaR are added at the requested levels they carry.
    nObs : `int`, optional
        Sample size the reference models were fitted to, for their BIC.
        Required with ``reference``.

    Returns
    -------
    table : `astropy.table.Table`
        Columns ``model``, ``bic``, ``level``, ``var``, ``tvar`` and
        ``source`` (``fitted`` or ``reference``), sorted by BIC.

    Raises
    ------
    ValueError
        Raised if ``reference`` is given without ``nObs``.
    """
    rows = []
    for name, bic, model in entries:
        params = model.params(np.ones(1))
        implied = deriveImplied(params)
        for level in levels:
            try:
                tvar = compositeTvar(level, params, implied)
            except MomentExistenceError:
                tvar = np.inf
            rows.append({"model": name, "bic": float(bic), "level": float(level),
                         "var": compositeVar(level, params, implied), "tvar": float(tvar),
                         "source": "fitted"})
    if reference:
        if nObs is None:
            raise ValueError("nObs is required to place reference models by BIC.")
        for name, entry in reference.items():
            bic = aicBic(entry["nll"], entry["nParams"], nObs).bic
            for level in levels:
                level = float(level)
                if level not in entry["var"]:
                    _LOG.warning("No published risk for %s at level %g; skipped.", name, level)
                    continue
                rows.append({"model": name, "bic": float(bic), "level": level,
                             "var": float(entry["var"][level]), "tvar": float(entry["tvar"][level]),
                             "source": "reference"})
    rows.sort(key=lambda row: row["bic"])
    return _tableFromRows(rows, ("model", "bic", "level", "var", "tvar", "source"))


def writeQqSvg(qq, filename, title=None):
    """Write a normal QQ plot of quantile residuals as SVG.

    Parameters
    ----------
    qq : `lsst.pipe.base.Struct`
        Output of `qqData`.
    filename : `str`
        Output path.
    title : `str`, optional
        Plot title.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plot

    with matplotlib.rc_context({"svg.hashsalt": "risk_gbii"}):
        figure, axes = plot.subplots(figsize=(5, 5))
        axes.scatter(qq.theoretical, qq.empirical, s=6, color="k")
        low = min(np.min(qq.theoretical), np.min(qq.empirical))
        high = max(np.max(qq.theoretical), np.max(qq.empirical))
        axes.plot([low, high], [low, high], color="r", linewidth=1)
        axes.set_xlabel("Theoretical quantiles")
        axes.set_ylabel("Quantile residuals")
        axes.set_title(title if title else f"R = {qq.correlation:.4f}")
        figure.savefig(filename, format="svg", metadata={"Date": None})
        plot.close(figure)
    return filename


class GofReport(FitProduct):
    """Goodness-of-fit statistics with parametric-bootstrap p-values."""
    _PRODUCT_TYPE = "COMPOSITE_GBII_GOF"
    _SCHEMA = "Composite GBII goodness of fit"
    _VERSION = 1.0

    _FIELDS = ("family", "ks", "ad", "cvm", "pKs", "pAd", "pCvm", "qqCorrelation", "nBoot", "nFailed",
               "seed")

    def __init__(self, family="ComGBII", ks=np.nan, ad=np.nan, cvm=np.nan, pKs=np.nan, pAd=np.nan,
                 pCvm=np.nan, qqCorrelation=np.nan, nBoot=0, nFailed=0, seed=0, **kwargs):
        self.family = family
        self.ks = float(ks)
        self.ad = float(ad)
        self.cvm = float(cvm)
        self.pKs = float(pKs)
        self.pAd = float(pAd)
        self.pCvm = float(pCvm)
        self.qqCorrelation = float(qqCorrelation)
        self.nBoot = int(nBoot)
        self.nFailed = int(nFailed)
        self.seed = int(seed)
        super().__init__(**kwargs)
        self.requiredAttributes.update(self._FIELDS)

    def __eq__(self, other):
        if not isinstance(other, self.__class__):
            return False
        for name in self._FIELDS:
            mine, theirs = getattr(self, name), getattr(other, name)
            if isinstance(mine, float) and np.isnan(mine) and np.isnan(theirs):
                continue
            if mine != theirs:
                return False
        return self.getMetadata() == other.getMetadata()

    @classmethod
    def fromDict(cls, dictionary):
        cls._checkProductType(dictionary)
        # JSON has no infinity; an infinite AD statistic is written as a string.
        values = {name: dictionary.get(name) for name in cls._FIELDS}
        for name in ("ks", "ad", "cvm", "pKs", "pAd", "pCvm", "qqCorrelation"):
            value = values[name]
            values[name] = float(value) if isinstance(value, str) else fromBuiltin(value)
        report = cls(**values)
        report.setMetadata(dictionary.get("metadata", {}))
        return report

    def toDict(self):
        self.updateMetadata()
        outDict = {"metadata": self.getMetadata()}
        for name in self._FIELDS:
            value = getattr(self, name)
            outDict[name] = str(value) if isinstance(value, float) and np.isinf(value) else value
        return outDict

    @classmethod
    def fromTable(cls, tableList):
        table = tableList[0]
        inDict = {"metadata": table.meta.get("metadata", {})}
        for row in table:
            inDict[str(row["name"])] = row["value"]
        for name in ("family",):
            inDict[name] = table.meta.get(name.upper())
        for name in ("nBoot", "nFailed", "seed"):
            inDict[name] = int(table.meta.get(name.upper(), 0))
        return cls.fromDict(inDict)

    def toTable(self):
        """Statistic/p-value rows in the layout of a goodness-of-fit table."""
        self.updateMetadata()
        names = ("ks", "ad", "cvm", "pKs", "pAd", "pCvm", "qqCorrelation")
        table = Table({"name": list(names), "value": [getattr(self, name) for name in names]})
        table.meta = {"metadata": self.getMetadata(), "FAMILY": self.family, "NBOOT": self.nBoot,
                      "NFAILED": self.nFailed, "SEED": self.seed}
        return [table]


def _bootstrapReplicate(refitConfig, modelDict, nObs, seed):
    """Simulate from the fitted model, refit from the estimate and return its statistics.

    Module level so that joblib can dispatch it to worker processes.
    Returns `None` when the refit fails.
    """
    model = RegressionModel.fromDict(modelDict)
    params = model.params(np.ones(1))
    try:
        sample = compositeSample(nObs, params, deriveImplied(params), seed=seed)
        task = CompositeGbiiRegressionTask(config=refitConfig)
        refit = task.run(sample, np.ones((nObs, 1)), covariateNames=model.covariateNames,
                         initialBeta=model.beta, initialAlpha=model.alpha)
        cdf, sf = pitValues(refit.model, sample)
        statistics = pitStatistics(cdf, sf)
    except CompGbiiError as e:
        _LOG.warning("Bootstrap replicate with seed %d failed: %s", seed, e)
        return None
    return (statistics.ks, statistics.ad, statistics.cvm)


class GoodnessOfFitConfig(pexConfig.Config):
    """Configuration for the parametric-bootstrap goodness-of-fit tests."""
    nBoot = pexConfig.Field(
        dtype=int,
        default=2000,
        doc="Number of bootstrap replicates.",
        check=lambda x: x >= 1,
    )
    fastMode = pexConfig.Field(
        dtype=bool,
        default=False,
        doc="Use fastNBoot replicates instead of nBoot.",
    )
    fastNBoot = pexConfig.Field(
        dtype=int,
        default=200,
        doc="Number of bootstrap replicates in fast mode.",
        check=lambda x: x >= 1,
    )
    numThreads = pexConfig.Field(
        dtype=int,
        default=1,
        doc="Number of joblib workers for the replicates.",
        check=lambda x: x >= 1,
    )
    seed = pexConfig.Field(
        dtype=int,
        default=20230101,
        doc="Seed from which the replicate seeds are drawn.",
    )
    refit = pexConfig.ConfigurableField(
        target=CompositeGbiiRegressionTask,
        doc="Refit of each bootstrap sample; the family always follows the tested model.",
    )

    def setDefaults(self):
        super().setDefaults()
        self.refit.doStandardErrors = False
        self.refit.solver.restarts = 0


class GoodnessOfFitTask(pipeBase.Task):
    """Kolmogorov-Smirnov, Anderson-Darling and Cramer-von Mises tests with
    parametric-bootstrap p-values.

    Each replicate draws a sample of the observed size from the fitted
    model, refits it starting from the fitted parameters, and recomputes the
    three statistics.  A p-value is the fraction of successful replicates
    whose statistic strictly exceeds the observed one; failed refits are
    counted and excluded.
    """
    ConfigClass = GoodnessOfFitConfig
    _DefaultName = "goodnessOfFit"

    def run(self, model, losses):
        """Test an intercept-only fit.

        Parameters
        ----------
        model : `lsst.risk.gbii.RegressionModel`
            Intercept-only fit to ``losses``.
        losses : `numpy.ndarray`
            The observed losses.

        Returns
        -------
        result : `lsst.pipe.base.Struct`
            Result struct with components:

            - ``report`` : statistics and p-values (`GofReport`).
            - ``qq`` : QQ pairs and correlation (`lsst.pipe.base.Struct`).
            - ``replicates`` : per-replicate statistics, NaN for failures
              (`astropy.table.Table`).
        """
        if not model.interceptOnly:
            raise DimensionError("Goodness-of-fit tests apply to intercept-only (distribution) fits.")
        losses = np.asarray(losses, dtype=float)
        nBoot = self.config.fastNBoot if self.config.fastMode else self.config.nBoot

        cdf, sf = pitValues(model, losses)
        observed = pitStatistics(cdf, sf)
        qq = _qqFromResiduals(quantileResiduals(model, losses))
        self.log.info("Observed KS %.4f, AD %.4f, CvM %.4f, QQ R %.4f; running %d bootstrap replicates.",
                      observed.ks, observed.ad, observed.cvm, qq.correlation, nBoot)

        refitConfig = copy.deepcopy(self.config.refit.value)
        refitConfig.family = model.family
        seeds = np.random.RandomState(self.config.seed).randint(0, 2**31 - 1, size=nBoot)
        modelDict = model.toDict()
        results = Parallel(n_jobs=self.config.numThreads)(
            delayed(_bootstrapReplicate)(refitConfig, modelDict, losses.size, int(seed))
            for seed in seeds
        )
        statistics = np.array([result if result is not None else (np.nan, np.nan, np.nan)
                               for result in results], dtype=float).reshape(nBoot, 3)
        good = ~np.any(np.isnan(statistics), axis=1)
        nFailed = int(np.sum(~good))
        if nFailed:
            self.log.warning("%d of %d bootstrap refits failed; p-values use the remaining %d.",
                             nFailed, nBoot, nBoot - nFailed)

        pValues = []
        for column, value in enumerate((observed.ks, observed.ad, observed.cvm)):
            successful = statistics[good, column]
            pValues.append(float(np.mean(successful > value)) if successful.size else np.nan)

        report = GofReport(family=model.family, ks=observed.ks, ad=observed.ad, cvm=observed.cvm,
                           pKs=pValues[0], pAd=pValues[1], pCvm=pValues[2],
                           qqCorrelation=qq.correlation, nBoot=nBoot, nFailed=nFailed,
                           seed=self.config.seed)
        replicates = Table({"seed": seeds, "ks": statistics[:, 0], "ad": statistics[:, 1],
                            "cvm": statistics[:, 2]})
        return pipeBase.Struct(report=report, qq=qq, replicates=replicates)
