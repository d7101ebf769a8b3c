import os
import logging
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

APP_ROOT = Path(__file__).resolve().parents[1]


def _optional_int(name: str):
	value = os.getenv(name)
	if value is None or value.strip() == "":
		return None
	return int(value)


def _float_list(name: str, default: str):
	raw = os.getenv(name, default)
	return [float(item) for item in raw.split(",") if item.strip()]


# Parallelism (benchmark cells and selection grid cells)
HDDC_THREADS = max(int(os.getenv("HDDC_THREADS", str(os.cpu_count() or 1))), 1)

# Output locations
OUTPUT_DIR = Path(os.getenv("HDDC_OUTPUT_DIR", str(APP_ROOT / "Output")))
AUDIT_LOG_DIR = os.getenv("HDDC_AUDIT_LOG_DIR") or None
LOG_LEVEL = os.getenv("HDDC_LOG_LEVEL", "INFO").upper()

# Linear algebra: the Gram path is taken when ceil(sum of weights) < threshold (None means p)
GRAM_THRESHOLD = _optional_int("HDDC_GRAM_THRESHOLD")

# EM defaults
MAX_ITERS = int(os.getenv("HDDC_MAX_ITERS", "500"))
REL_TOL = float(os.getenv("HDDC_REL_TOL", "1e-7"))
INNER_MAX_ITERS = int(os.getenv("HDDC_INNER_MAX_ITERS", "100"))
INNER_TOL = float(os.getenv("HDDC_INNER_TOL", "1e-8"))
MIN_COMPONENT_FRACTION = float(os.getenv("HDDC_MIN_COMPONENT_FRACTION", "1e-6"))
B_FLOOR = float(os.getenv("HDDC_B_FLOOR", "1e-10"))
RIDGE_SCALE = float(os.getenv("HDDC_RIDGE_SCALE", "1e-6"))
N_RESTARTS = max(int(os.getenv("HDDC_N_RESTARTS", "10")), 1)
INIT_KIND = os.getenv("HDDC_INIT_KIND", "kmeans").lower()
KMEANS_ITERS = int(os.getenv("HDDC_KMEANS_ITERS", "10"))
DEFAULT_SEED = int(os.getenv("HDDC_SEED", "0"))

# Hyper-parameter selection
THRESHOLD_GRID = _float_list("HDDC_THRESHOLD_GRID", "0.001,0.005,0.01,0.05,0.1,0.2,0.3")
MAX_COMMON_DIM = int(os.getenv("HDDC_MAX_COMMON_DIM", "15"))

# Benchmarks
BENCHMARK_REPLICATIONS = max(int(os.getenv("HDDC_BENCHMARK_REPLICATIONS", "10")), 1)
BENCHMARK_RESTARTS = max(int(os.getenv("HDDC_BENCHMARK_RESTARTS", "5")), 1)
BENCHMARK_THRESHOLD = float(os.getenv("HDDC_BENCHMARK_THRESHOLD", "0.2"))
CRABS_RESTARTS = max(int(os.getenv("HDDC_CRABS_RESTARTS", "20")), 1)

# Bundled fixture
CRABS_PATH = Path(os.getenv("HDDC_CRABS_PATH", str(APP_ROOT / "data" / "crabs.csv")))

MODEL_FILE_VERSION = 1

if INIT_KIND not in ("kmeans", "random"):
	logging.warning(f"HDDC_INIT_KIND={INIT_KIND} is not recognised; falling back to kmeans")
	INIT_KIND = "kmeans"
