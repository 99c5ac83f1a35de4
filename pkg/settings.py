# bpire/settings.py
import os

from dotenv import load_dotenv

load_dotenv()

APP_NAME = "bpire"
APP_VERSION = "0.1.0"

DEFAULT_SEED = int(os.getenv("BPIRE_SEED", "1"))
DEFAULT_WORKERS = int(os.getenv("BPIRE_WORKERS", "1"))
KERNEL_BUDGET = int(float(os.getenv("BPIRE_KERNEL_BUDGET", "2e7")))
OUT_DIR = os.getenv("BPIRE_OUT_DIR", "out")
LOG_LEVEL = os.getenv("BPIRE_LOG_LEVEL", "INFO").upper()
PROGRESS = os.getenv("BPIRE_PROGRESS", "0").lower() in ("1", "true", "yes", "on")

if DEFAULT_WORKERS < 1:
    raise ValueError("BPIRE_WORKERS must be at least 1.")

# numeric tolerances
TABLE_NORMALIZATION_TOL = 1e-9
THETA_RTOL = 1e-10
INTERMEDIATE_TOL = 1e-9
WEAK_ROOT_TOL = 1e-12
LATTICE_TOL = 1e-9
LATTICE_MAX_DENOMINATOR = 10**6
A3_EPSILON = 0.1
CASE3_BAND = 1e-4
CASE2_MARGIN = 1e-6
ROOT_RTOL = 1e-9
ROOT_MAX_N = 2000
MEAN_ZERO_TOL = 1e-10

# monte carlo
MIN_MC_SAMPLES = 100
MIN_UNCENSORED = 100
MC_BATCH = 1 << 16
INDIVIDUAL_SUM_LIMIT = 10**4
TRAJECTORY_CAP = 10**4
LADDER_CAP = 10**6
RENEWAL_BLOCK_CELLS = 1 << 18
HORIZON_BATCH = 64
POPULATION_LIMIT = 2**62
