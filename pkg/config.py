"""ViscoFrac Configuration Module: global settings and numerical defaults for the viscoelastic crack simulator."""

import logging
import os
from typing import Any, Dict

# Try to load dotenv, fallback to plain environment
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    def load_dotenv():
        pass

# ==================== LOGGING ====================

LOG_LEVEL = os.getenv("VISCOFRAC_LOG_LEVEL", "WARNING")  # DEBUG, INFO, WARNING, ERROR
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# ==================== OUTPUT ====================

OUTPUT_DIR = os.getenv("VISCOFRAC_OUTPUT_DIR", "runs")
LEDGER_FILE = "ledger.csv"
SUMMARY_FILE = "summary.json"
EQUIVALENCE_FILE = "equivalence.json"
CONVERGENCE_FILE = "convergence.csv"

# ==================== SOLVER ====================

SOLVER = os.getenv("VISCOFRAC_SOLVER", "direct")  # direct | cg
CG_RTOL = float(os.getenv("VISCOFRAC_CG_RTOL", "1e-12"))
SYMMETRY_TOL = float(os.getenv("VISCOFRAC_SYMMETRY_TOL", "1e-12"))

# ==================== CHECKS ====================

BALANCE_RTOL = float(os.getenv("VISCOFRAC_BALANCE_RTOL", "1e-9"))  # per-step discrete balance
SLACK_TOL = float(os.getenv("VISCOFRAC_SLACK_TOL", "1e-8"))  # continuous-style inequality
SLACK_TAU_FACTOR = float(os.getenv("VISCOFRAC_SLACK_TAU_FACTOR", "0.0"))  # C_quad in tol = SLACK_TOL + C_quad * tau
EQUIVALENCE_RTOL = float(os.getenv("VISCOFRAC_EQUIVALENCE_RTOL", "5e-2"))
UONLY_MAX_STEPS = int(os.getenv("VISCOFRAC_UONLY_MAX_STEPS", "512"))

# ==================== DATA ====================

HISTORY_WINDOW = float(os.getenv("VISCOFRAC_HISTORY_WINDOW", "20"))  # in units of beta
ORACLE_STEP = float(os.getenv("VISCOFRAC_ORACLE_STEP", "1e-4"))  # relative to T
GAUSS_SUBINTERVALS = int(os.getenv("VISCOFRAC_GAUSS_SUBINTERVALS", "2"))

# ==================== CONCURRENCY ====================

THREADS = int(os.getenv("VISCOFRAC_THREADS", "1"))  # never changes results

# ==================== IDENTIFICATION ====================

APP_NAME = "ViscoFrac"
APP_VERSION = "1.0.0"
FORMAT_VERSION = 1


def setup_logging(level: str = None) -> None:
    """Configure the root logger once; later calls only adjust the level."""
    level = (level or LOG_LEVEL).upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        level = "WARNING"
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(level=level, format=LOG_FORMAT)
    root.setLevel(level)


def validate_config() -> Dict[str, Any]:
    """Validate configuration and return status."""
    status = {
        'valid': True,
        'warnings': [],
        'errors': []
    }

    if SOLVER not in ("direct", "cg"):
        status['errors'].append(f"VISCOFRAC_SOLVER must be 'direct' or 'cg', got '{SOLVER}'")
    if not 0 < CG_RTOL < 1e-6:
        status['warnings'].append(f"CG tolerance {CG_RTOL:g} is loose; the balance check needs tight solves")
    if BALANCE_RTOL <= 0 or SLACK_TOL < 0:
        status['errors'].append("check tolerances must be positive")
    if UONLY_MAX_STEPS < 2:
        status['errors'].append("VISCOFRAC_UONLY_MAX_STEPS must be at least 2")
    if HISTORY_WINDOW <= 0:
        status['errors'].append("VISCOFRAC_HISTORY_WINDOW must be positive")
    if THREADS < 1:
        status['errors'].append("VISCOFRAC_THREADS must be at least 1")
    if LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
        status['warnings'].append(f"unknown log level '{LOG_LEVEL}', using WARNING")

    status['valid'] = not status['errors']
    return status
