import os
from dotenv import load_dotenv
from pathlib import Path

load_dotenv()

# Base paths
BASE_DIR = Path(__file__).resolve().parent.parent
DATA_DIR = Path(__file__).resolve().parent / "data"
MASKS_DIR = DATA_DIR / "masks"
CATALOG_FILE = Path(os.getenv("CATALOG_FILE", str(DATA_DIR / "catalog.json")))
LOGS_DIR = Path(os.getenv("LOGS_DIR", str(BASE_DIR / "logs")))
RESULTS_DIR = Path(os.getenv("RESULTS_DIR", str(BASE_DIR / "results")))
CONFIGS_DIR = BASE_DIR / "configs"

# Create necessary directories
LOGS_DIR.mkdir(exist_ok=True)
RESULTS_DIR.mkdir(exist_ok=True)

# Decoder Settings
LLR_CLAMP = float(os.getenv("LLR_CLAMP", "30.0"))
DEFAULT_MAX_ITER = int(os.getenv("DEFAULT_MAX_ITER", "100"))
OSD_DEFAULT_ORDER = int(os.getenv("OSD_DEFAULT_ORDER", "2"))
OSD_RELIABILITY = os.getenv("OSD_RELIABILITY", "posterior")

# Tanner graph transformations
CYCLE_REMOVAL_PASSES = int(os.getenv("CYCLE_REMOVAL_PASSES", "50"))
DEFAULT_MAX_COLUMN_WEIGHT = int(os.getenv("DEFAULT_MAX_COLUMN_WEIGHT", "2"))

# CSS construction: which end of the column-weight order forms H1'
H1_COLUMN_ORDER = os.getenv("H1_COLUMN_ORDER", "lightest")

# Harness Settings
TRIAL_BATCH_SIZE = int(os.getenv("TRIAL_BATCH_SIZE", "32"))
MIN_DESK_TRIALS = int(os.getenv("MIN_DESK_TRIALS", "500"))
CSV_SCHEMA_ID = "cssldpc-sweep-v1"
NEAR_REGULAR_ATTEMPTS = int(os.getenv("NEAR_REGULAR_ATTEMPTS", "50"))

# Logging Configuration
LOG_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}"
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_ROTATION = os.getenv("LOG_ROTATION", "500 MB")

OSD_RELIABILITY_CHOICES = ("posterior", "channel")
H1_COLUMN_ORDER_CHOICES = ("lightest", "heaviest")


def validate_config():
    """Validate that all numeric and enumerated settings are in range."""
    problems = []
    if LLR_CLAMP <= 0:
        problems.append("LLR_CLAMP must be positive")
    if DEFAULT_MAX_ITER < 1:
        problems.append("DEFAULT_MAX_ITER must be >= 1")
    if OSD_DEFAULT_ORDER < 0:
        problems.append("OSD_DEFAULT_ORDER must be >= 0")
    if OSD_RELIABILITY not in OSD_RELIABILITY_CHOICES:
        problems.append(f"OSD_RELIABILITY must be one of {OSD_RELIABILITY_CHOICES}")
    if CYCLE_REMOVAL_PASSES < 0:
        problems.append("CYCLE_REMOVAL_PASSES must be >= 0")
    if DEFAULT_MAX_COLUMN_WEIGHT < 1:
        problems.append("DEFAULT_MAX_COLUMN_WEIGHT must be >= 1")
    if H1_COLUMN_ORDER not in H1_COLUMN_ORDER_CHOICES:
        problems.append(f"H1_COLUMN_ORDER must be one of {H1_COLUMN_ORDER_CHOICES}")
    if TRIAL_BATCH_SIZE < 1:
        problems.append("TRIAL_BATCH_SIZE must be >= 1")
    if NEAR_REGULAR_ATTEMPTS < 1:
        problems.append("NEAR_REGULAR_ATTEMPTS must be >= 1")

    if problems:
        raise ValueError(f"Invalid configuration: {'; '.join(problems)}")

# Validate configuration on import
validate_config()
