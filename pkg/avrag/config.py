"""
Run configuration defaults.

Every management command takes its argparse defaults from RunConfig so that
help text, code and reports agree. Nothing here is read from the environment.
"""
from dataclasses import dataclass, field
from typing import Tuple

SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class RunConfig:
    tau_s: float = 0.5
    gamma: float = 20.0
    penalty: str = "sine"
    lam: float = 5.0
    k: int = 6
    m: int = 75
    dedupe_iou: float = 0.7
    recall_ks: Tuple[int, ...] = (1, 3, 5)
    recall_denominator: str = "capped"
    agent_threshold: float = 0.5
    agent_max_windows: int = 3
    cider_variant: str = "cider-d"
    iou_thresholds: Tuple[float, ...] = field(default=(0.3, 0.5, 0.7))
    workers: int = 1

    @property
    def recall_ks_text(self):
        return ",".join(str(k) for k in self.recall_ks)


DEFAULTS = RunConfig()
