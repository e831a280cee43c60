"""Global settings for the locality checker.

Values come from the environment, optionally through a `.env` file in the
project root. Per-run settings (setup, model, script) live in the run
configuration file instead; see src/runconfig.py.
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load .env from project root
PROJECT_ROOT = Path(__file__).parent.parent
load_dotenv(PROJECT_ROOT / '.env')


class Config:
    # Project paths
    PROJECT_ROOT = PROJECT_ROOT
    OUTPUT_DIR = Path(os.getenv('CHECK_OUTPUT_DIR', PROJECT_ROOT / 'output'))

    # Probabilities at or below this are "null" (the world is not physically possible)
    NULL_TOLERANCE = float(os.getenv('CHECK_NULL_TOLERANCE', '1e-9'))
    # Linear-algebra identities (norms, idempotence, trace conservation)
    NUMERIC_TOLERANCE = float(os.getenv('CHECK_NUMERIC_TOLERANCE', '1e-12'))

    # Enumeration bounds
    WORLD_CAPACITY = int(os.getenv('CHECK_WORLD_CAPACITY', str(2 ** 20)))
    CANDIDATE_CAPACITY = int(os.getenv('CHECK_CANDIDATE_CAPACITY', str(2 ** 20)))

    # Random formulas per fuzz check
    FUZZ_TRIALS = int(os.getenv('CHECK_FUZZ_TRIALS', '1000'))

    @classmethod
    def init_dirs(cls):
        """Create the export directory."""
        cls.OUTPUT_DIR.mkdir(parents=True, exist_ok=True)

    @classmethod
    def validate(cls):
        """Validate tolerances and capacities."""
        positive = ['NULL_TOLERANCE', 'NUMERIC_TOLERANCE', 'WORLD_CAPACITY',
                    'CANDIDATE_CAPACITY', 'FUZZ_TRIALS']
        bad = [f for f in positive if not getattr(cls, f) > 0]

        if bad:
            raise ValueError(f"Configuration values must be positive: {', '.join(bad)}")

        return True
