import hashlib
import json
import logging
import math
import os
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np
from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def derive_seed(master_seed: int, index: int) -> int:
    """Splitmix64 finalizer applied to (master_seed, index).

    Every replicate, run or tree gets its own substream seed, so results do not
    depend on execution order or on how work is split across threads.
    """
    z = (int(master_seed) + (int(index) + 1) * GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def spawn_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, index))


def parallel_map(func: Callable, items: Iterable, threads: Optional[int] = None) -> List:
    """Ordered map over items, run on a thread pool when threads > 1"""
    items = list(items)
    if threads is None:
        threads = os.cpu_count() or 1
    n_jobs = min(int(threads), len(items))
    if n_jobs <= 1:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs, prefer="threads")(delayed(func)(item) for item in items)


def file_digest(file_path: str) -> str:
    """SHA-256 of a file's bytes"""
    sha = hashlib.sha256()
    with open(file_path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            sha.update(chunk)
    return sha.hexdigest()


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def array_digest(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values).tobytes()).hexdigest()


def format_real(value: float) -> str:
    """Reals are written with 17 significant digits; non-finite values become null"""
    if not math.isfinite(value):
        return "null"
    return format(value, ".17g")


def _is_scalar(value) -> bool:
    return value is None or isinstance(value, (bool, int, float, str, np.generic))


def _encode(obj, indent: int, depth: int) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    inner = " " * (indent * (depth + 1))
    outer = " " * (indent * depth)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(key), ensure_ascii=False)}: {_encode(value, indent, depth + 1)}"
                 for key, value in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + outer + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(_is_scalar(item) for item in obj):
            return "[" + ", ".join(_encode(item, indent, depth + 1) for item in obj) + "]"
        items = [f"{inner}{_encode(item, indent, depth + 1)}" for item in obj]
        return "[\n" + ",\n".join(items) + "\n" + outer + "]"
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def dumps_json(obj, indent: int = 2) -> str:
    """Deterministic JSON text with 17-significant-digit reals"""
    return _encode(obj, indent, 0) + "\n"


def write_json(file_path: str, obj) -> str:
    directory = os.path.dirname(file_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_json(obj))
    return file_path


def validate_file_upload(file_path: str, allowed_extensions: Optional[List[str]] = None,
                         max_size: int = 256 * 1024 * 1024) -> Dict:
    """Validate an input file before parsing"""
    if not os.path.exists(file_path):
        return {'valid': False, 'error': 'File does not exist'}

    if allowed_extensions:
        file_extension = os.path.splitext(file_path)[1].lower()
        if file_extension not in allowed_extensions:
            return {
                'valid': False,
                'error': f'Invalid file type. Allowed: {", ".join(allowed_extensions)}'
            }

    file_size = os.path.getsize(file_path)
    if file_size > max_size:
        return {
            'valid': False,
            'error': f'File too large. Max size: {format_file_size(max_size)}'
        }

    return {'valid': True, 'file_size': file_size}


def save_uploaded_file(uploaded_file, upload_dir: str) -> str:
    """Save an uploaded file under a content-addressed name"""
    os.makedirs(upload_dir, exist_ok=True)
    content = uploaded_file.file.read()
    digest = hashlib.sha256(content).hexdigest()[:16]
    filename = f"{digest}_{sanitize_filename(uploaded_file.filename or 'upload')}"
    filepath = os.path.join(upload_dir, filename)
    with open(filepath, 'wb') as buffer:
        buffer.write(content)
    return filepath


def format_file_size(size_bytes: int) -> str:
    """Format file size in human readable format"""
    if size_bytes == 0:
        return "0B"

    size_names = ["B", "KB", "MB", "GB"]
    size = float(size_bytes)
    i = 0
    while size >= 1024 and i < len(size_names) - 1:
        size /= 1024.0
        i += 1

    return f"{size:.1f}{size_names[i]}"


def sanitize_filename(filename: str) -> str:
    """Sanitize filename for safe storage"""
    unsafe_chars = '<>:"/\\|?* '
    for char in unsafe_chars:
        filename = filename.replace(char, '_')

    if len(filename) > 100:
        name, ext = os.path.splitext(filename)
        filename = name[:100 - len(ext)] + ext

    return filename

