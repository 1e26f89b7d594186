import os
import sys
import yaml
import logging
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from app.core.exception import AppException

logger = logging.getLogger(__name__)

load_dotenv()

DEFAULT_PARAMS_PATH = Path(__file__).resolve().parents[2] / "config" / "params.yaml"


def resolve_params_path(params_path: Optional[str] = None) -> str:
    """Explicit argument, then ``MARKETGRAPH_PARAMS``, then the bundled file."""
    if params_path:
        return str(params_path)
    return os.getenv("MARKETGRAPH_PARAMS") or str(DEFAULT_PARAMS_PATH)


@lru_cache(maxsize=8)
def _read(params_path: str) -> dict:
    if not os.path.exists(params_path):
        logger.error("Configuration file not found: %s", params_path)
        raise FileNotFoundError(f"Configuration file not found: {params_path}")

    try:
        with open(params_path, "r", encoding="utf-8") as file:
            params = yaml.safe_load(file)
        if not params:
            logger.warning("YAML file %s is empty.", params_path)
            return {}
        logger.debug("Parameters retrieved successfully from %s", params_path)
        return params

    except yaml.YAMLError as e:
        logger.error("YAML parsing error in file %s: %s", params_path, e)
        raise

    except Exception as e:
        logger.error("Unexpected error while reading YAML file %s: %s", params_path, e)
        raise AppException(e, sys)


def load_params(params_path: Optional[str] = None) -> dict:
    """
    Load configuration parameters from a YAML file.

    Args:
        params_path (str, optional): Path to the YAML file. Falls back to the
            ``MARKETGRAPH_PARAMS`` environment variable, then ``config/params.yaml``.

    Returns:
        dict: Parsed YAML content (a fresh copy per call).

    Raises:
        FileNotFoundError: If the YAML file does not exist.
        yaml.YAMLError: If the YAML is malformed.
        AppException: For all other unexpected errors.
    """
    return dict(_read(resolve_params_path(params_path)))


def get_seed(default: int = 0) -> int:
    """Monte-Carlo seed from ``MARKETGRAPH_SEED``."""
    raw = os.getenv("MARKETGRAPH_SEED")
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring non-integer MARKETGRAPH_SEED=%r", raw)
        return default
