"""Flat key=value configuration with namespaced keys.

Precedence: command-line override > config file > built-in default.
Unknown keys are rejected; every command logs its fully resolved config
next to its primary output.
"""

from __future__ import annotations

import os
import tempfile

from .errors import BadConfig

DEFAULTS: dict[str, object] = {
    "encoder.hidden_dim": 128,
    "encoder.n_layers": 2,
    "encoder.seed": 0,
    "encoder.max_vocab": 8192,
    "encoder.max_len": 256,
    "index.n_centroids": 64,
    "index.n_probe": 4,
    "train.tau": 0.01,
    "train.batch_size": 8,
    "train.epochs": 1,
    "train.learning_rate": 0.0007,
    "train.k_q": 4,
    "train.k_p": 4,
    "train.seed": 42,
    "train.negatives_per_query": 15,
    "eval.cutoff": 1000,
    "eval.metric": "mrr@10",
    "bench.warmup_runs": 5,
    "bench.timed_runs": 20,
}


def _coerce(key: str, value: str):
    default = DEFAULTS[key]
    try:
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes")
        return type(default)(value)
    except ValueError:
        raise BadConfig(f"bad value for {key}: {value!r}") from None


def load_config(path: str | None, overrides: list[str] | None = None) -> dict:
    resolved = dict(DEFAULTS)
    if path:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise BadConfig(f"{path}:{lineno}: expected key=value")
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in DEFAULTS:
                    raise BadConfig(f"{path}:{lineno}: unknown key {key!r}")
                resolved[key] = _coerce(key, value)
    for item in overrides or []:
        if "=" not in item:
            raise BadConfig(f"override must be key=value: {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in DEFAULTS:
            raise BadConfig(f"unknown key {key!r}")
        resolved[key] = _coerce(key, value)
    return resolved


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_config_log(out_path, config: dict) -> None:
    lines = [f"{k}={config[k]}" for k in sorted(config)]
    atomic_write_text(str(out_path) + ".config.log", "\n".join(lines) + "\n")
