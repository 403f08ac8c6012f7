# DOC: Generic utils

import os
import json
import random
import tempfile

import numpy as np
import torch

from clfa.common.errors import io_error



# REGION: [Path utils]

def normpath(pathname):
    """ normpath - normalizes the path to use forward slashes """
    if not pathname:
        return ""
    return os.path.normpath(str(pathname).replace("\\", "/")).replace("\\", "/")

def juststem(pathname):
    """ juststem - returns the file name without the extension """
    pathname = os.path.basename(normpath(pathname))
    root, _ = os.path.splitext(pathname)
    return root

def justext(pathname):
    """ justext - returns the file extension without the dot """
    pathname = os.path.basename(normpath(pathname))
    _, ext = os.path.splitext(pathname)
    return ext.lstrip(".")

# ENDREGION: [Path utils]



# REGION: [Atomic file writes]

def atomic_write(path, write_fn):
    """
    Write a file through a temporary sibling and rename it into place.

    Args:
        path: Destination file.
        write_fn: Callable receiving the temporary path; it must fully write the file.

    Raises:
        ClfaError: IO error when writing or renaming fails. The partial temp file is removed.
    """
    path = normpath(path)
    directory = os.path.dirname(path) or "."
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp_path = tempfile.mkstemp(prefix=".tmp_", suffix="_" + os.path.basename(path), dir=directory)
        os.close(fd)
    except OSError as e:
        raise io_error(f"Cannot write {path}: {e}", path=path)
    try:
        write_fn(tmp_path)
        os.replace(tmp_path, path)
    except OSError as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise io_error(f"Cannot write {path}: {e}", path=path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def append_jsonl(path, record: dict):
    try:
        with open(path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")
    except OSError as e:
        raise io_error(f"Cannot append to {path}: {e}", path=str(path))


def read_jsonl(path) -> list[dict]:
    if not os.path.exists(path):
        return []
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]

# ENDREGION: [Atomic file writes]



# REGION: [Seeding]

def seed_everything(seed: int, single_thread: bool = False):
    """Seed python, numpy and torch global generators. Single-thread mode makes CPU runs bitwise reproducible."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    if single_thread:
        torch.set_num_threads(1)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def make_torch_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator

# ENDREGION: [Seeding]
