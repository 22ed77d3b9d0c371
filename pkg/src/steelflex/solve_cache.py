"""TTL cache of perfect-information storage trajectories."""
import hashlib
import json
import logging
import os
from datetime import datetime, timedelta
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


def cache_key(*parts: str) -> str:
    """Stable key from the hashed inputs of a solve."""
    digest = hashlib.sha256()
    for part in parts:
        digest.update(part.encode("utf-8"))
        digest.update(b"\0")
    return digest.hexdigest()


class SolveCache:
    def __init__(self, cache_file: str, ttl_days: int = 7):
        self.cache_file = cache_file
        self.ttl_days = ttl_days
        self.cache = self._load_cache()

    def _load_cache(self) -> Dict:
        if os.path.exists(self.cache_file):
            try:
                with open(self.cache_file, "r", encoding="utf-8") as f:
                    cache_data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Ignoring unreadable cache {self.cache_file}: {e}")
                return {}
            self._clean_expired_entries(cache_data)
            return cache_data
        return {}

    def _expired(self, value: Dict) -> bool:
        timestamp = datetime.fromisoformat(value["timestamp"])
        return datetime.now() - timestamp > timedelta(days=self.ttl_days)

    def _clean_expired_entries(self, cache_data: Dict):
        expired_keys = [k for k, v in cache_data.items() if isinstance(v, dict) and "timestamp" in v and self._expired(v)]
        for key in expired_keys:
            del cache_data[key]

    def save(self):
        directory = os.path.dirname(self.cache_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.cache_file, "w", encoding="utf-8") as f:
            json.dump(self.cache, f, indent=2, sort_keys=True)

    def get(self, key: str) -> Optional[Any]:
        """Cached value, or None when missing or expired."""
        value = self.cache.get(key)
        if not isinstance(value, dict) or "timestamp" not in value:
            return None
        if self._expired(value):
            return None
        return value["data"]

    def set(self, key: str, value: Any):
        self.cache[key] = {"data": value, "timestamp": datetime.now().isoformat()}
        self.save()

    def clear(self):
        self.cache = {}
        self.save()
