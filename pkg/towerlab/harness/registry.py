"""
Append-only run registry

Every record is its own JSON file under the registry root, created with
exclusive mode so an existing record is never overwritten. Writes go through
one lock per registry.
"""

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

from ..core.exceptions import RegistryError
from ..utils.constants import DEFAULT_REGISTRY_DIR, REGISTRY_ENV
from ..utils.json_support import sha256_canonical_json, to_jsonable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunRecord:
    """Config echo, input hash, timestamps, payload and verdicts of one run"""
    kind: str
    config: Dict[str, Any]
    input_hash: str
    started: str
    finished: str
    payload: Dict[str, Any]
    verdicts: Dict[str, bool]
    thresholds: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def record_id(self) -> str:
        stamp = self.started.replace("-", "").replace(":", "").replace(".", "")
        return f"{stamp}-{self.kind}-{self.input_hash[:12]}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "config": self.config,
            "input_hash": self.input_hash,
            "started": self.started,
            "finished": self.finished,
            "payload": self.payload,
            "verdicts": self.verdicts,
            "thresholds": self.thresholds,
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunRecord':
        try:
            return cls(kind=data["kind"], config=data["config"], input_hash=data["input_hash"],
                       started=data["started"], finished=data["finished"],
                       payload=data["payload"], verdicts=data["verdicts"],
                       thresholds=data.get("thresholds", {}))
        except KeyError as e:
            raise RegistryError(f"Record is missing field {e}")


def input_hash(config: Dict[str, Any]) -> str:
    """Content hash of a config echo; stable under re-serialization"""
    return sha256_canonical_json(config)


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class Registry:
    """Directory of immutable RunRecord files"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self._lock = threading.Lock()
        self._logger = logging.getLogger(self.__class__.__name__)

    @classmethod
    def from_env(cls) -> 'Registry':
        return cls(os.environ.get(REGISTRY_ENV, DEFAULT_REGISTRY_DIR))

    def write(self, record: RunRecord) -> Path:
        """Persist a record as a new file; never replaces an existing one"""
        text = json.dumps(to_jsonable(record.to_dict()), indent=2, sort_keys=True)
        with self._lock:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise RegistryError(f"Cannot create registry {self.root}: {e}")
            base = record.record_id
            for attempt in range(1000):
                name = base if attempt == 0 else f"{base}-{attempt}"
                path = self.root / f"{name}.json"
                try:
                    with open(path, "x", encoding="utf-8") as fh:
                        fh.write(text)
                except FileExistsError:
                    continue
                except OSError as e:
                    raise RegistryError(f"Failed to write {path}: {e}")
                self._logger.info(f"💾 Recorded {record.kind} run as {path.name}")
                return path
        raise RegistryError(f"No free record name for {base}")

    def paths(self) -> List[Path]:
        if not self.root.exists():
            return []
        return sorted(self.root.glob("*.json"))

    def records(self) -> Iterator[RunRecord]:
        for path in self.paths():
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                self._logger.warning(f"Skipping unreadable record {path.name}: {e}")
                continue
            yield RunRecord.from_dict(data)

    def select(self, kind: Optional[str] = None, k: Optional[int] = None,
               verdict: Optional[str] = None) -> List[RunRecord]:
        """Records matching every given filter; verdict is 'pass' or 'fail'"""
        selected = []
        for record in self.records():
            if kind is not None and record.kind != kind:
                continue
            if k is not None and record.config.get("k") != k:
                continue
            if verdict is not None and record.passed != (verdict == "pass"):
                continue
            selected.append(record)
        return selected
