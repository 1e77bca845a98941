"""Harnesses that measure decay rates, comparison constants and scaling exponents."""

from .common import DecayReport, SweepReport, loglog_fit
from .comparison import run_comparison
from .decay import run_caloric_decay
from .hoelder import run_hoelder_transfer
from .intrinsic_bmo import run_intrinsic_bmo
from .main_bmo import run_main_bmo

EXPERIMENTS = {
    "caloric_decay": run_caloric_decay,
    "comparison": run_comparison,
    "main_bmo": run_main_bmo,
    "intrinsic_bmo": run_intrinsic_bmo,
    "hoelder_transfer": run_hoelder_transfer,
}

__all__ = [
    "DecayReport",
    "EXPERIMENTS",
    "SweepReport",
    "loglog_fit",
    "run_caloric_decay",
    "run_comparison",
    "run_hoelder_transfer",
    "run_intrinsic_bmo",
    "run_main_bmo",
]
