"""
JSON Support for configs, thresholds and run records

Handles JSON loading with line-precise diagnostics, canonical serialization
and content hashing.
"""

import hashlib
import json
import logging
import math
import re
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..core.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class JSONValidator:
    """JSON validation and parsing"""

    @staticmethod
    def load_json_file(filepath: Union[str, Path]) -> Tuple[Dict[str, Any], str]:
        """Load a JSON object from file, returning (data, raw text)"""
        filepath = Path(filepath)

        if not filepath.exists():
            raise ConfigurationError(f"JSON file not found: {filepath}")

        try:
            text = filepath.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigurationError(f"Failed to read {filepath}: {e}")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Invalid JSON: {e.msg}", line=e.lineno, source=str(filepath))
        if not isinstance(data, dict):
            raise ConfigurationError("JSON must be an object", line=1, source=str(filepath))
        logger.info(f"Loaded JSON from {filepath}")
        return data, text

    @staticmethod
    def find_key_line(text: Optional[str], key: str) -> Optional[int]:
        """1-based line of the first `"key":` occurrence, if any"""
        if not text:
            return None
        pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
        for lineno, line in enumerate(text.splitlines(), start=1):
            if pattern.search(line):
                return lineno
        return None


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to plain JSON types"""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return obj


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, compact separators"""
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_canonical_json(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
