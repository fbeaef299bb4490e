# Copyright (C) 2020-2025, Pyronear.

# This program is licensed under the Apache License 2.0.
# See LICENSE or go to <https://www.apache.org/licenses/LICENSE-2.0> for full license details.

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import logging_config

import config as cfg
from commands import COMMANDS
from components.reports import FORMATS, write_report
from utils.meta_metrics import META_CHOICES

__all__ = ["RunConfig", "run"]

logger = logging_config.configure_logging(cfg.DEBUG, cfg.SENTRY_DSN, __name__)

# Commands that can run on generated data when no --evalset is given
SYNTHETIC_COMMANDS = ("oracle-check", "benchmark")
# Plot-ready commands default to CSV
CSV_COMMANDS = ("stability", "ci")


@dataclass
class RunConfig:
    command: str
    evalset: Optional[str] = None
    meta: str = "both"
    perms: int = cfg.DEFAULT_PERMS
    resamples: int = cfg.DEFAULT_RESAMPLES
    trials: int = cfg.DEFAULT_TRIALS
    alpha: float = cfg.DEFAULT_ALPHA
    seed: int = cfg.DEFAULT_SEED
    format: Optional[str] = None
    breakdown: bool = False
    threads: int = cfg.DEFAULT_THREADS
    output: Optional[str] = None
    k: List[int] = field(default_factory=list)
    sample_sizes: List[int] = field(default_factory=list)
    metrics: Optional[List[str]] = None
    tolerance: float = 0.03
    instances: int = 50
    systems: int = 15
    segments: int = 1500

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command '{self.command}', expected one of {sorted(COMMANDS)}")
        if self.evalset is None and self.command not in SYNTHETIC_COMMANDS:
            raise ValueError(f"--evalset is required for '{self.command}'")
        if self.meta not in (*META_CHOICES, "both"):
            raise ValueError(f"--meta must be one of spa, pa, both, got '{self.meta}'")
        for flag in ("perms", "resamples", "trials", "threads", "instances"):
            if getattr(self, flag) < 1:
                raise ValueError(f"--{flag} must be >= 1, got {getattr(self, flag)}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"--alpha must lie in (0, 1), got {self.alpha}")
        if self.seed < 0:
            raise ValueError(f"--seed must be non-negative, got {self.seed}")
        if self.format is None:
            self.format = "csv" if self.command in CSV_COMMANDS else "tsv"
        if self.format not in FORMATS:
            raise ValueError(f"--format must be one of {', '.join(FORMATS)}, got '{self.format}'")
        if self.tolerance <= 0:
            raise ValueError(f"--tolerance must be positive, got {self.tolerance}")
        if self.systems < 2 or self.segments < 1:
            raise ValueError("--systems must be >= 2 and --segments >= 1")

    @property
    def metas(self) -> Tuple[str, ...]:
        return META_CHOICES if self.meta == "both" else (self.meta,)

    def metadata(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "evalset": Path(self.evalset).name if self.evalset is not None else "synthetic",
            "seed": self.seed,
            "perms": self.perms,
            "resamples": self.resamples,
            "trials": self.trials,
            "alpha": self.alpha,
            "version": cfg.VERSION,
        }


def run(config: RunConfig) -> int:
    """
    Runs one command and writes its report.

    Args:
        config: validated run configuration

    Returns:
        int: process exit code, 0 on full success
    """
    logger.info("Running '%s' on %s (seed=%d, perms=%d)", config.command, config.evalset, config.seed, config.perms)
    report = COMMANDS[config.command](config)
    write_report(report, config.format or "tsv", config.output)
    if not report.ok:
        logger.error("'%s' finished with failed checks", config.command)
        return 1
    return 0
