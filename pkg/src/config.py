"""
Configuration for the Kac walk numerical laboratory.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Base directory for the project
BASE_DIR = os.path.dirname(os.path.dirname(__file__))

# Data directory
DATA_DIR = os.path.join(BASE_DIR, "data")

# Local SQLite DB path (log-partition cache and run registry)
DB_PATH = os.environ.get("KAC_DB_PATH") or os.path.join(DATA_DIR, "kaclab.sqlite")

# Default artifact directory for CLI runs
OUTPUT_DIR = os.environ.get("KAC_OUTPUT_DIR") or os.path.join(BASE_DIR, "runs")

# Default velocity grid
DEFAULT_V_MAX = float(os.environ.get("KAC_V_MAX", "10.0"))
DEFAULT_N_POINTS = int(os.environ.get("KAC_N_POINTS", "1025"))

# Angular nodes for collision integrals and pair quadrature
THETA_NODES = int(os.environ.get("KAC_THETA_NODES", "256"))

# Log-partition tables: radial nodes and split-angle Gauss-Legendre nodes
RADIAL_NODES = int(os.environ.get("KAC_RADIAL_NODES", "2048"))
SPLIT_NODES = int(os.environ.get("KAC_SPLIT_NODES", "512"))

# Gauss-Legendre nodes for the marginal and pair-radius integrals
CHI_NODES = int(os.environ.get("KAC_CHI_NODES", "512"))
PAIR_RADIUS_NODES = int(os.environ.get("KAC_PAIR_RADIUS_NODES", "256"))

# Cache TTL in days
CACHE_TTL_DAYS = int(os.environ.get("KAC_CACHE_TTL_DAYS", "30"))

# Logging
LOG_LEVEL = os.environ.get("KAC_LOG_LEVEL") or "INFO"

# Ensemble workers (results never depend on this)
WORKERS = int(os.environ.get("KAC_WORKERS", "1"))

# Numerical tolerances
TOL_MASS = 1e-10
DENSITY_FLOOR = 1e-300

# Config schema version accepted by the CLI
SCHEMA_VERSION = 1
