# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

import time

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from common.data_utils import load_checkpoint, save_checkpoint
from common.errors import DegenerateJumpError, InvalidParameterError
from common.logging import logger


class Timer:
    def __enter__(self):
        self.start = time.time()
        return self

    def __exit__(self, *args):
        self.end = time.time()
        self.interval = self.end - self.start


def chunks(indices, size):
    """Split a list of indices into consecutive pieces of at most `size`."""
    return [indices[i:i + size] for i in range(0, len(indices), size)]


def _run_indexed(worker, payload, index):
    try:
        return worker(payload, index)
    except DegenerateJumpError as err:
        raise err.with_context(trajectory=index)


def run_ensemble(worker, payload, n_traj, workers=1, checkpoint_path=None,
                 checkpoint_every=16, resume=False, metadata=None):
    """Run `worker(payload, i)` for i = 0..n_traj-1 across joblib workers.

    Every worker returns a dict of arrays for one trajectory. Chunks of
    `checkpoint_every` trajectories run in parallel; after each chunk the
    completed results are written to an HDF5 checkpoint. Results are ordered
    by trajectory index, so reductions do not depend on the worker count.

    Args:
        worker (callable): picklable top-level function
        payload: picklable argument passed to every call
        n_traj (int): ensemble size
        workers (int, optional): joblib n_jobs. Defaults to 1.
        checkpoint_path (str, optional): HDF5 checkpoint file.
            Defaults to None, which disables checkpointing.
        checkpoint_every (int, optional): trajectories per chunk.
            Defaults to 16.
        resume (bool, optional): continue from an existing checkpoint.
            Defaults to False.
        metadata (dict, optional): identifies the run; a checkpoint written
            with different metadata is refused. Defaults to None.

    Returns:
        list: per-trajectory result dicts in index order
    """
    if n_traj < 1:
        raise InvalidParameterError(f"n_traj must be positive, got {n_traj}")
    metadata = metadata or {}
    results = {}
    if resume and checkpoint_path is not None:
        results, stored = load_checkpoint(checkpoint_path)
        if results and stored != metadata:
            raise InvalidParameterError(
                f"checkpoint {checkpoint_path} belongs to a different run")
        results = {i: r for i, r in results.items() if i < n_traj}
        logger.info(f"Resuming with {len(results)} completed trajectories")

    pending = [i for i in range(n_traj) if i not in results]
    with tqdm(total=n_traj, initial=n_traj - len(pending),
              desc="Trajectories") as progress:
        for chunk in chunks(pending, checkpoint_every):
            with Timer() as timer:
                outputs = Parallel(n_jobs=workers)(
                    delayed(_run_indexed)(worker, payload, index)
                    for index in chunk)
            results.update(zip(chunk, outputs))
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, results, metadata)
            progress.update(len(chunk))
            logger.info(f"Completed {len(results)} / {n_traj} trajectories - "
                        f"chunk time: {timer.interval:.2f}s")

    return [results[i] for i in range(n_traj)]


def stack_results(results, name):
    """Stack one named array across trajectories, shape (n_traj, ...)."""
    return np.stack([np.asarray(result[name]) for result in results])
