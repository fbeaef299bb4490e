# Copyright (C) 2024-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

import os
from typing import Optional

from dotenv import load_dotenv

# If there is an .env, load it
load_dotenv()

VERSION: str = "0.1.0"
DEBUG: bool = os.environ.get("DEBUG", "").lower() == "true"
# Sentry
SENTRY_DSN: Optional[str] = os.getenv("SENTRY_DSN")
SERVER_NAME: Optional[str] = os.getenv("SERVER_NAME")

# Resampling defaults (overridden by CLI flags)
DEFAULT_PERMS: int = int(os.environ.get("METAEVAL_PERMS", "1000"))
DEFAULT_RESAMPLES: int = int(os.environ.get("METAEVAL_RESAMPLES", "1000"))
DEFAULT_TRIALS: int = int(os.environ.get("METAEVAL_TRIALS", "1000"))
DEFAULT_ALPHA: float = float(os.environ.get("METAEVAL_ALPHA", "0.05"))
DEFAULT_SEED: int = int(os.environ.get("METAEVAL_SEED", "0"))
DEFAULT_THREADS: int = int(os.environ.get("METAEVAL_THREADS", "1"))

# Evaluation-set layout
HUMAN_FILE = "humans.tsv"
METRICS_DIR = "metrics"
META_FILE = "meta.json"
SEGMENT_COLUMN = "segment_id"
MISSING_VALUE = "NA"

# Enumeration bounds for the exact oracles
MAX_EXACT_SEGMENTS = 24
MAX_EXACT_SYSTEMS = 16
