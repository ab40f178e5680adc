# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#

from __future__ import absolute_import

import logging
import os

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

logging.basicConfig(
    format=LOG_FORMAT,
    level=logging.INFO,
    datefmt=DATE_FORMAT)
logger = logging.getLogger("monitored_fermions")
logger.setLevel(logging.INFO)


def add_file_handler(output_dir, filename="run.log"):
    """Mirror the log of a run into a file next to its results.

    Args:
        output_dir (str): directory that receives the log file
        filename (str, optional): name of the log file. Defaults to "run.log".

    Returns:
        logging.FileHandler: the attached handler, so callers can remove it
    """
    os.makedirs(output_dir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(output_dir, filename), mode="a")
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    logger.addHandler(handler)
    return handler
