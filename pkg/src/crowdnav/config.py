"""Configuration management for the crowdnav application."""

import os
from pathlib import Path
from typing import Optional
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PACKAGE_DIR = Path(__file__).parent


class AppConfig:
    """Application configuration."""

    def __init__(self) -> None:
        self.log_level = os.getenv('CROWDNAV_LOG_LEVEL', 'INFO')
        self.debug = os.getenv('CROWDNAV_DEBUG', 'false').lower() == 'true'
        self.output_dir = Path(os.getenv('CROWDNAV_OUTPUT_DIR', 'data/runs'))
        self.scenario_dir = Path(
            os.getenv('CROWDNAV_SCENARIO_DIR', str(PACKAGE_DIR / 'scenarios'))
        )


class RunConfig:
    """Episode and experiment run configuration."""

    def __init__(self) -> None:
        self.workers = int(os.getenv('CROWDNAV_WORKERS', '1'))
        self.step_limit = int(os.getenv('CROWDNAV_STEP_LIMIT', '600'))
        self.planning_budget_s = float(os.getenv('CROWDNAV_PLANNING_BUDGET_S', '0.5'))
        cap = os.getenv('CROWDNAV_ITERATION_CAP')
        self.iteration_cap: Optional[int] = int(cap) if cap else None

    @property
    def deterministic(self) -> bool:
        """Runs are reproducible only when search is bounded by iterations, not time."""
        return self.iteration_cap is not None


# Global configuration instances
app_config = AppConfig()
run_config = RunConfig()
