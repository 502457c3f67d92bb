"""Configuration settings for the sub-linear expectation toolkit."""

import os
from typing import Optional

import psutil


def _default_threads() -> int:
    return psutil.cpu_count(logical=True) or 1


class Config:
    """Configuration settings for the application."""

    # Parallelism
    THREADS: int = int(os.getenv("SLLN_THREADS", str(_default_threads())))

    # Exact engine caps
    DP_CELL_CAP: int = int(os.getenv("SLLN_DP_CELL_CAP", str(2 ** 22)))
    DP_STATE_CAP: int = int(os.getenv("SLLN_DP_STATE_CAP", "2000000"))
    ORACLE_STRATEGY_CAP: int = int(os.getenv("SLLN_ORACLE_STRATEGY_CAP", str(10 ** 7)))
    ORACLE_BATCH: int = int(os.getenv("SLLN_ORACLE_BATCH", "4096"))

    # Simulation
    SIM_CHUNK: int = int(os.getenv("SLLN_SIM_CHUNK", "65536"))

    # Output and logging
    OUTPUT_DIR: str = os.getenv("SLLN_OUTPUT_DIR", os.path.join(os.getcwd(), "slln-out"))
    LOG_LEVEL: str = os.getenv("SLLN_LOG_LEVEL", "WARNING")
    LOG_FILE: Optional[str] = os.getenv("SLLN_LOG_FILE")

    # Tolerances
    EXACT_TOL: float = float(os.getenv("SLLN_EXACT_TOL", "1e-10"))
    AXIOM_TOL: float = float(os.getenv("SLLN_AXIOM_TOL", "1e-12"))
    EVENT_TOL: float = float(os.getenv("SLLN_EVENT_TOL", "1e-12"))
    EPSILON: float = float(os.getenv("SLLN_EPSILON", "0.05"))
    COVERAGE_RESOLUTION: float = float(os.getenv("SLLN_COVERAGE_RESOLUTION", "0.02"))
    DECAY_RATIO: float = float(os.getenv("SLLN_DECAY_RATIO", "0.75"))
    DIVERGENCE_RATIO: float = float(os.getenv("SLLN_DIVERGENCE_RATIO", "0.9"))
    QUADRATURE_RATIO: float = float(os.getenv("SLLN_QUADRATURE_RATIO", "0.9"))
    SERIES_RATIO: float = float(os.getenv("SLLN_SERIES_RATIO", "0.9"))
    EXCESS_RATIO: float = float(os.getenv("SLLN_EXCESS_RATIO", "0.9"))

    @classmethod
    def get_threads(cls) -> int:
        """Get the cap on internal parallelism (at least one worker)."""
        return max(1, cls.THREADS)

    @classmethod
    def get_output_dir(cls) -> str:
        """Get the default directory for CSV artifacts."""
        return cls.OUTPUT_DIR

    @classmethod
    def get_dp_cell_cap(cls) -> int:
        """Get the largest payoff table the full-history DP will build."""
        return cls.DP_CELL_CAP

    @classmethod
    def get_dp_state_cap(cls) -> int:
        """Get the total state budget of the compressed DP."""
        return cls.DP_STATE_CAP

    @classmethod
    def get_oracle_strategy_cap(cls) -> int:
        """Get the largest strategy space the oracle will enumerate."""
        return cls.ORACLE_STRATEGY_CAP


# Global config instance
config = Config()
