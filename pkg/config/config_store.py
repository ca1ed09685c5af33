# read and write JSON config files with thread safety and atomic replacement

import copy
import json
import os
import threading
from datetime import datetime

_FILE_LOCK = threading.Lock()


def _ts():
    return datetime.now().strftime("%Y-%m-%d %H:%M:%S")


def read_json(path):
    with _FILE_LOCK:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)


def write_json(path, data, touch_last_update=False):
    if touch_last_update and isinstance(data, dict):
        data["last_update"] = _ts()
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    with _FILE_LOCK:
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        os.replace(tmp, path)


def merge_sections(defaults, overrides):
    """Section-wise merge: dict sections are updated key by key, anything else is replaced."""
    merged = copy.deepcopy(defaults)
    for key, value in (overrides or {}).items():
        if key == "last_update":
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged
