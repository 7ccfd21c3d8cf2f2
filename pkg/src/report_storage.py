"""
Flat-file storage adapter for experiment reports.
Keys map to JSON files under a report directory; CSV summaries sit next to them.
"""

import csv
import fnmatch
import io
import json
import os
import threading
from typing import Any, Dict, List, Optional, Sequence
import logging

from .settings import get_settings

logger = logging.getLogger(__name__)

CSV_SCHEMA_HEADER = "# schema: sampling-discretization-report v1"


class ReportStorage:
    """Directory-backed storage for report documents."""

    def __init__(self, report_dir: Optional[str] = None, in_memory: bool = False):
        """Use report_dir, or SAMPLING_REPORT_DIR when none is given."""
        self.report_dir = report_dir or get_settings().report_dir
        self._backend = MemoryStorage() if in_memory else None
        self._backend_lock = threading.Lock()

    def _get_backend(self):
        """Create the report directory on first use, falling back to memory if it is unusable."""
        if self._backend is None:
            with self._backend_lock:
                if self._backend is None:  # Double-check after acquiring lock
                    try:
                        os.makedirs(self.report_dir, exist_ok=True)
                        if not os.access(self.report_dir, os.W_OK):
                            raise PermissionError(f"{self.report_dir} is not writable")
                        self._backend = DirectoryBackend(self.report_dir)
                        logger.info(f"Writing reports to {os.path.abspath(self.report_dir)}")
                    except OSError as e:
                        logger.error(f"Cannot use report directory {self.report_dir}: {e}")
                        self._backend = MemoryStorage()
                        logger.warning("Using in-memory report storage (reports will not persist)")
        return self._backend

    @property
    def persistent(self) -> bool:
        return isinstance(self._get_backend(), DirectoryBackend)

    def path_for(self, name: str) -> Optional[str]:
        backend = self._get_backend()
        return backend.path(name) if isinstance(backend, DirectoryBackend) else None

    def set_json(self, key: str, value: Any) -> bool:
        """Store a JSON-serializable object under key (written as key.json)."""
        try:
            serialized = json.dumps(value, default=self._json_serializer, indent=2, sort_keys=True)
            return self._get_backend().set(f"{key}.json", serialized)
        except Exception as e:
            logger.error(f"Error setting key {key}: {e}")
            return False

    def get_json(self, key: str) -> Optional[Any]:
        try:
            serialized = self._get_backend().get(f"{key}.json")
            if serialized is None:
                return None
            return json.loads(serialized)
        except Exception as e:
            logger.error(f"Error getting key {key}: {e}")
            return None

    def write_csv(self, name: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> bool:
        """Write a CSV file with the schema comment line first; rows must already be strings."""
        buffer = io.StringIO()
        buffer.write(CSV_SCHEMA_HEADER + "\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        try:
            return self._get_backend().set(name, buffer.getvalue())
        except Exception as e:
            logger.error(f"Error writing {name}: {e}")
            return False

    def read_text(self, name: str) -> Optional[str]:
        return self._get_backend().get(name)

    def delete(self, key: str) -> bool:
        try:
            return bool(self._get_backend().delete(f"{key}.json"))
        except Exception as e:
            logger.error(f"Error deleting key {key}: {e}")
            return False

    def keys(self, pattern: str = "*") -> List[str]:
        """Keys of stored JSON documents matching a glob pattern."""
        try:
            names = self._get_backend().keys(f"{pattern}.json")
            return sorted(name[:-len(".json")] for name in names)
        except Exception as e:
            logger.error(f"Error getting keys with pattern {pattern}: {e}")
            return []

    def exists(self, key: str) -> bool:
        try:
            return bool(self._get_backend().exists(f"{key}.json"))
        except Exception as e:
            logger.error(f"Error checking existence of key {key}: {e}")
            return False

    def _json_serializer(self, obj):
        """Custom JSON serializer for special objects."""
        if hasattr(obj, 'model_dump'):  # Pydantic models
            return obj.model_dump(mode="json")
        if hasattr(obj, 'to_payload'):
            return obj.to_payload()
        if hasattr(obj, 'tolist'):  # numpy arrays and scalars
            return obj.tolist()
        return str(obj)


class DirectoryBackend:
    """One file per name inside a directory."""

    def __init__(self, root: str):
        self.root = root
        self.lock = threading.Lock()

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def set(self, name: str, value: str) -> bool:
        with self.lock:
            with open(self.path(name), "w", encoding="utf-8", newline="") as f:
                f.write(value)
            return True

    def get(self, name: str) -> Optional[str]:
        with self.lock:
            try:
                with open(self.path(name), "r", encoding="utf-8", newline="") as f:
                    return f.read()
            except FileNotFoundError:
                return None

    def delete(self, name: str) -> int:
        with self.lock:
            try:
                os.remove(self.path(name))
                return 1
            except FileNotFoundError:
                return 0

    def keys(self, pattern: str = "*") -> List[str]:
        with self.lock:
            return [n for n in os.listdir(self.root) if fnmatch.fnmatch(n, pattern)]

    def exists(self, name: str) -> int:
        return 1 if os.path.exists(self.path(name)) else 0


class MemoryStorage:
    """In-memory fallback when the report directory cannot be used."""

    def __init__(self):
        self.data: Dict[str, str] = {}
        self.lock = threading.Lock()

    def set(self, name: str, value: str) -> bool:
        with self.lock:
            self.data[name] = value
            return True

    def get(self, name: str) -> Optional[str]:
        with self.lock:
            return self.data.get(name)

    def delete(self, name: str) -> int:
        with self.lock:
            if name in self.data:
                del self.data[name]
                return 1
            return 0

    def keys(self, pattern: str = "*") -> List[str]:
        with self.lock:
            return [k for k in self.data if fnmatch.fnmatch(k, pattern)]

    def exists(self, name: str) -> int:
        with self.lock:
            return 1 if name in self.data else 0
