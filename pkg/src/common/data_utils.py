# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import hashlib
import json
import os
import warnings

import h5py
import numpy as np

from .errors import InvalidParameterError
from .logging import logger

CODE_VERSION = "1.0.0"
FLOAT_FORMAT = "%.17g"


def content_hash(*arrays):
    """SHA-256 of the float64 little-endian bytes of the given arrays.

    Args:
        *arrays (array_like): arrays hashed in order

    Returns:
        str: hex digest
    """
    digest = hashlib.sha256()
    for array in arrays:
        data = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
        digest.update(data.tobytes())
    return digest.hexdigest()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, "value") and hasattr(value, "name"):
        return value.value
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_json(path, payload):
    """Write a JSON document, creating the parent directory if needed."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w") as f:
        json.dump(_jsonable(payload), f, indent=2, sort_keys=True)
    logger.info(f"Wrote {path}")


def read_json(path):
    with open(path, "r") as f:
        return json.load(f)


def write_result_file(path, columns, metadata=None):
    """Write a result table as CSV with a JSON header line.

    The first comment line carries the metadata together with the column
    names, the code version and the content hash of the data block.

    Args:
        path (str): output file
        columns (dict): maps column names to equal-length 1-D arrays
        metadata (dict, optional): configuration echo and units.
            Defaults to None.

    Returns:
        dict: the header that was written
    """
    names = list(columns)
    if not names:
        raise InvalidParameterError("a result file needs at least one column")
    data = np.column_stack([np.asarray(columns[name], dtype=float)
                            for name in names])
    header = dict(metadata or {})
    header["columns"] = names
    header["code_version"] = CODE_VERSION
    header["sha256"] = content_hash(data)

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",",
               header=json.dumps(_jsonable(header), sort_keys=True),
               comments="# ")
    logger.info(f"Wrote {data.shape[0]} rows to {path}")
    return header


def read_result_file(path):
    """Read a result table written by `write_result_file`.

    Args:
        path (str): input file

    Returns:
        tuple: dict of column arrays and the header dict
    """
    with open(path, "r") as f:
        first = f.readline()
    if not first.startswith("#"):
        raise InvalidParameterError(f"{path} has no result header")
    header = json.loads(first.lstrip("#").strip())
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    names = header.get("columns", [])
    if data.shape[1] != len(names):
        raise InvalidParameterError(
            f"{path} has {data.shape[1]} columns, header lists {len(names)}")
    if content_hash(data) != header.get("sha256"):
        warnings.warn(f"Content hash of {path} does not match its header.")
    return {name: data[:, i] for i, name in enumerate(names)}, header


def save_checkpoint(path, results, metadata=None):
    """Atomically store per-trajectory results in an HDF5 file.

    Args:
        path (str): checkpoint file
        results (dict): maps trajectory index to a dict of arrays
        metadata (dict, optional): stored as a JSON attribute.
            Defaults to None.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    tmp_path = path + ".tmp"
    with h5py.File(tmp_path, "w") as f:
        f.attrs["metadata"] = json.dumps(_jsonable(metadata or {}),
                                         sort_keys=True)
        group = f.create_group("trajectories")
        for index, arrays in results.items():
            sub = group.create_group(str(index))
            for name, value in arrays.items():
                sub.create_dataset(name, data=np.asarray(value))
    os.replace(tmp_path, path)


def load_checkpoint(path):
    """Read a checkpoint written by `save_checkpoint`.

    Returns:
        tuple: dict of per-trajectory results and the metadata dict; both
            empty when the file does not exist.
    """
    if not os.path.exists(path):
        return {}, {}
    try:
        f = h5py.File(path, "r")
    except OSError:
        logger.info(f"OSError: Unable to open checkpoint {path}")
        return {}, {}
    with f:
        metadata = json.loads(f.attrs.get("metadata", "{}"))
        results = {}
        for index, sub in f["trajectories"].items():
            results[int(index)] = {name: sub[name][()] for name in sub}
    return results, metadata
