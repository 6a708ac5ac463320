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
import abc
import copy
import datetime
import json
import math
import os.path

import numpy as np
import yaml
from astropy.table import Table

from lsst.utils.logging import getLogger


__all__ = ["FitProduct", "toBuiltin", "fromBuiltin"]


def toBuiltin(value):
    """Convert numpy containers and scalars to plain python values.

    NaN becomes `None` so the output is strict JSON.
    """
    if isinstance(value, dict):
        return {str(key): toBuiltin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [toBuiltin(item) for item in value]
    if isinstance(value, np.ndarray):
        return toBuiltin(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return None if math.isnan(value) else value
    return value


def fromBuiltin(value):
    """Inverse of `toBuiltin` for numeric fields: `None` becomes NaN."""
    if value is None:
        return math.nan
    return value


class FitProduct(abc.ABC):
    """Generic persisted result of a fit.

    Subclasses implement `toDict`, `fromDict`, `toTable` and `fromTable`,
    which lets the base class read and write the product as JSON, YAML or
    ECSV.

    Parameters
    ----------
    log : `logging.Logger`, optional
        Log for messages.
    """
    _PRODUCT_TYPE = 'generic'
    _SCHEMA = 'NO SCHEMA'
    _VERSION = 0

    def __init__(self, log=None, **kwargs):
        self.setMetadata({})

        self.requiredAttributes = set(['_PRODUCT_TYPE', '_SCHEMA', '_VERSION', '_metadata'])

        self.log = log if log else getLogger(__name__.partition(".")[2])
        self.updateMetadata(setDate=False)

    def __str__(self):
        return f"{self.__class__.__name__}(productType={self._PRODUCT_TYPE})"

    def __eq__(self, other):
        """Product equivalence.

        Subclasses register the attributes that matter in
        ``requiredAttributes``; numpy arrays compare elementwise with NaN
        equal to NaN.
        """
        if not isinstance(other, self.__class__):
            return False

        for attr in self._requiredAttributes:
            mine, theirs = getattr(self, attr), getattr(other, attr)
            if isinstance(mine, np.ndarray) or isinstance(theirs, np.ndarray):
                if mine is None or theirs is None:
                    return False
                mine, theirs = np.asarray(mine), np.asarray(theirs)
                if mine.shape != theirs.shape or not np.allclose(mine, theirs, rtol=1e-12, atol=0.0,
                                                                  equal_nan=True):
                    return False
            elif mine != theirs:
                return False

        return True

    @property
    def requiredAttributes(self):
        return self._requiredAttributes

    @requiredAttributes.setter
    def requiredAttributes(self, value):
        self._requiredAttributes = value

    def getMetadata(self):
        """Retrieve metadata associated with this product.

        Returns
        -------
        meta : `dict`
            Metadata; changes made by the caller are written to external
            files.
        """
        return self._metadata

    def setMetadata(self, metadata):
        """Store a copy of the supplied metadata with this product.

        Parameters
        ----------
        metadata : `dict`
            Metadata to associate with the product.  Will be copied and
            overwrite existing metadata.
        """
        if metadata is not None:
            self._metadata = copy.copy(dict(metadata))

        self._metadata["PRODUCT_TYPE"] = self._PRODUCT_TYPE
        self._metadata[self._PRODUCT_TYPE + "_SCHEMA"] = self._SCHEMA
        self._metadata[self._PRODUCT_TYPE + "_VERSION"] = self._VERSION

    def updateMetadata(self, setDate=False, **kwargs):
        """Update metadata keywords with new values.

        Parameters
        ----------
        setDate : `bool`, optional
            Record the current datetime as FIT_DATE.  Off by default so that
            repeated runs write identical files.
        kwargs : `dict` or `collections.abc.Mapping`, optional
            Set of key=value pairs to assign to the metadata.
        """
        mdSupplemental = dict()

        if setDate:
            date = datetime.datetime.now()
            mdSupplemental['FIT_DATE'] = date.isoformat()

        mdSupplemental.update(kwargs)
        self._metadata.update(toBuiltin(mdSupplemental))

    @classmethod
    def readText(cls, filename):
        """Read a product from a json/yaml/ecsv file.

        Parameters
        ----------
        filename : `str`
            Name of the file containing the product.

        Returns
        -------
        product : `FitProduct`
            The product.

        Raises
        ------
        RuntimeError :
            Raised if the filename does not end in ".json", ".yaml" or ".ecsv".
        """
        lower = filename.lower()
        if lower.endswith(".ecsv"):
            data = Table.read(filename, format='ascii.ecsv')
            return cls.fromTable([data])
        elif lower.endswith(".yaml"):
            with open(filename, 'r') as f:
                data = yaml.safe_load(f)
            return cls.fromDict(data)
        elif lower.endswith(".json"):
            with open(filename, 'r') as f:
                data = json.load(f)
            return cls.fromDict(data)
        else:
            raise RuntimeError(f"Unknown filename extension: {filename}")

    def writeText(self, filename, format='auto'):
        """Write the product to a text file.

        Parameters
        ----------
        filename : `str`
            Name of the file to write.
        format : `str`
            Format to write the file as.  Supported values are:
                ``"auto"`` : Determine filetype from filename.
                ``"json"`` : Write as json.
                ``"yaml"`` : Write as yaml.
                ``"ecsv"`` : Write as ecsv.

        Returns
        -------
        used : `str`
            The name of the file used to write the data.  This may
            differ from the input if the format is explicitly chosen.

        Raises
        ------
        RuntimeError :
            Raised if filename does not end in a known extension, or
            if all information cannot be written.
        """
        lower = filename.lower()
        path, ext = os.path.splitext(filename)
        if format == 'json' or (format == 'auto' and lower.endswith(".json")):
            filename = path + ".json"
            with open(filename, 'w') as f:
                json.dump(toBuiltin(self.toDict()), f, indent=2, sort_keys=True)
                f.write("\n")
        elif format == 'yaml' or (format == 'auto' and lower.endswith(".yaml")):
            filename = path + ".yaml"
            with open(filename, 'w') as f:
                yaml.safe_dump(toBuiltin(self.toDict()), f, sort_keys=True)
        elif format == 'ecsv' or (format == 'auto' and lower.endswith(".ecsv")):
            tableList = self.toTable()
            if len(tableList) > 1:
                # ECSV doesn't support multiple tables per file, so we
                # can only write the first table.
                raise RuntimeError(f"Unable to persist {len(tableList)} tables in ECSV format.")

            table = tableList[0]
            filename = path + ".ecsv"
            table.write(filename, format="ascii.ecsv", overwrite=True)
        else:
            raise RuntimeError(f"Attempt to write to a file {filename} "
                               "that does not end in '.json', '.yaml' or '.ecsv'")

        return filename

    @classmethod
    def fromDict(cls, dictionary):
        """Construct a product from a dictionary of properties.

        Parameters
        ----------
        dictionary : `dict`
            Dictionary of properties.

        Returns
        -------
        product : `FitProduct`
            Constructed product.

        Raises
        ------
        NotImplementedError :
            Raised if not implemented.
        """
        raise NotImplementedError("Must be implemented by subclass.")

    def toDict(self):
        """Return a dictionary containing the product properties.

        The dictionary should be able to be round-tripped through
        `fromDict`.

        Returns
        -------
        dictionary : `dict`
            Dictionary of properties.
        """
        raise NotImplementedError("Must be implemented by subclass.")

    @classmethod
    def fromTable(cls, tableList):
        """Construct a product from a list of tables.

        Parameters
        ----------
        tableList : `list` [`astropy.table.Table`]
            List of tables of properties.

        Returns
        -------
        product : `FitProduct`
            Constructed product.
        """
        raise NotImplementedError("Must be implemented by subclass.")

    def toTable(self):
        """Return a list of tables containing the product properties.

        Returns
        -------
        tableList : `list` [`astropy.table.Table`]
            List of tables of properties.
        """
        raise NotImplementedError("Must be implemented by subclass.")

    @classmethod
    def _checkProductType(cls, dictionary):
        """Raise if a dictionary was written by a different product type."""
        productType = dictionary.get('metadata', {}).get('PRODUCT_TYPE', cls._PRODUCT_TYPE)
        if productType != cls._PRODUCT_TYPE:
            raise RuntimeError(f"Incorrect product type supplied.  Expected {cls._PRODUCT_TYPE}, "
                               f"found {productType}")
