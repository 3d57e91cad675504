"""Flat ``key = value`` run configuration with includes and shipped presets.

``include = NAME`` pulls in a shipped preset (see :func:`preset_names`) or a
file path relative to the including file.  Keys are applied in order, so
anything after an include overrides it.  The dimension keys ``n_c``,
``variance`` and ``pairs`` are mutually exclusive, and setting one clears
the others, which lets ``--variance 0.99`` override a preset's ``n_c``.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

from .nn import MlpSpec, TrainConfig, parse_hidden

DIM_KEYS = ("n_c", "variance", "pairs")

DEFAULTS: dict[str, str] = {
    "graph": "unweighted",
    "layers": "1",
    "transform": "identity",
    "method": "tc",
    "M": "100",
    "seed": "0",
    "restrict_to_lcc": "false",
    "hidden": "[]",
    "head": "softmax",
    "step_size": "0.001",
    "batch_size": "256",
    "max_epochs": "100",
    "patience": "10",
    "eval_every": "0",
    "threads": "1",
    "out": "run",
    "diag.mode": "sampled",
    "diag.k_sets": "10",
    "diag.n_leading": "7",
    "diag.layer": "0",
}

KNOWN_KEYS = set(DEFAULTS) | set(DIM_KEYS) | {
    "edges", "features", "categories", "n_categories", "labels", "splits", "n_classes",
    "embeddings", "model", "diag.samples", "diag.tolerance", "diag.seed", "preset",
}

PATH_KEYS = ("edges", "features", "categories", "labels", "splits", "embeddings", "model")


class ConfigError(ValueError):
    pass


def preset_names() -> list[str]:
    root = resources.files("graphcoords") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def _preset_text(name: str) -> str | None:
    res = resources.files("graphcoords") / "presets" / f"{name}.cfg"
    return res.read_text(encoding="utf-8") if res.is_file() else None


def _set(cfg: dict[str, str], key: str, value: str) -> None:
    if key not in KNOWN_KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    if key in DIM_KEYS:
        for other in DIM_KEYS:
            cfg.pop(other, None)
    cfg[key] = value


def _parse(text: str, origin: str, base: Path | None, cfg: dict[str, str], depth: int) -> None:
    if depth > 16:
        raise ConfigError("include nesting too deep")
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip() if not line.lstrip().startswith("#") else ""
        if not s:
            continue
        key, sep, value = s.partition("=")
        if not sep:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = key.strip(), value.strip()
        if key == "include":
            _include(value, base, cfg, depth + 1)
            continue
        if key in PATH_KEYS and base is not None and value and not os.path.isabs(value):
            value = str(base / value)
        _set(cfg, key, value)


def _include(ref: str, base: Path | None, cfg: dict[str, str], depth: int) -> None:
    text = _preset_text(ref)
    if text is not None:
        _parse(text, f"preset:{ref}", None, cfg, depth)
        return
    path = Path(ref)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise ConfigError(f"include {ref!r}: no such preset or file")
    _parse(path.read_text(encoding="utf-8"), str(path), path.parent, cfg, depth)


def load_config(path: str | os.PathLike | None = None, preset: str | None = None,
                overrides: Iterable[tuple[str, str]] = ()) -> "RunConfig":
    """Defaults, then ``preset``, then the file at ``path``, then ``overrides``."""
    cfg: dict[str, str] = {}
    for k, v in DEFAULTS.items():
        _set(cfg, k, v)
    if preset:
        _include(preset, None, cfg, 1)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {path} not found")
        _parse(p.read_text(encoding="utf-8"), str(p), p.parent, cfg, 1)
    for k, v in overrides:
        _set(cfg, k, str(v))
    return RunConfig(cfg)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


@dataclass
class RunConfig:
    raw: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.raw.get(key, default)

    def require(self, key: str) -> str:
        v = self.raw.get(key)
        if not v:
            raise ConfigError(f"missing required config key {key!r}")
        return v

    def int(self, key: str, default: int | None = None) -> int | None:
        v = self.raw.get(key)
        if v is None or v == "":
            return default
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {v!r}") from None

    def float(self, key: str, default: float | None = None) -> float | None:
        v = self.raw.get(key)
        if v is None or v == "":
            return default
        try:
            return float(v)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {v!r}") from None

    def bool(self, key: str, default: bool = False) -> bool:
        v = self.raw.get(key)
        return default if v is None or v == "" else _bool(v)

    @property
    def seed(self) -> int:
        return self.int("seed", 0)

    @property
    def threads(self) -> int:
        return max(1, self.int("threads", 1))

    @property
    def n_layers(self) -> int:
        return self.int("layers", 1) if self.get("graph") == "multilayer" else 1

    def dims(self) -> dict:
        """The active dimension setting as ``{"n_c": ...}``, ``{"variance": ...}`` or ``{"pairs": ...}``."""
        present = [k for k in DIM_KEYS if k in self.raw]
        if len(present) > 1:
            raise ConfigError(f"dimension keys are mutually exclusive: {present}")
        method = self.get("method")
        if method not in ("tc", "dvc"):
            raise ConfigError(f"method must be tc or dvc, got {method!r}")
        if method == "tc":
            if "n_c" in present:
                return {"n_c": self.int("n_c")}
            if "variance" in present:
                p = self.float("variance")
                if not 0 < p < 1:
                    raise ConfigError("variance must lie in (0, 1)")
                return {"variance": p}
            raise ConfigError("tc needs n_c or variance")
        if "n_c" in present or "variance" in present:
            raise ConfigError("dvc takes 'pairs', not n_c/variance")
        return {"pairs": self.int("pairs")}

    def validate(self, need: Iterable[str] = (), dims: bool = True) -> None:
        for key in need:
            self.require(key)
        for key in PATH_KEYS:
            v = self.raw.get(key)
            if v and key != "model" and not os.path.exists(v):
                raise ConfigError(f"{key}: path {v} does not exist")
        if self.get("graph") not in ("unweighted", "weighted", "multilayer"):
            raise ConfigError("graph must be unweighted, weighted or multilayer")
        if self.get("transform") not in ("identity", "one_minus"):
            raise ConfigError("transform must be identity or one_minus")
        if self.get("head") not in ("softmax", "sigmoid"):
            raise ConfigError("head must be softmax or sigmoid")
        if dims:
            self.dims()

    def mlp_spec(self, input_dim: int, output_dim: int) -> MlpSpec:
        try:
            return MlpSpec(input_dim, parse_hidden(self.get("hidden", "")), output_dim, self.get("head"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                seed=self.seed,
                step_size=self.float("step_size"),
                batch_size=self.int("batch_size"),
                max_epochs=self.int("max_epochs"),
                patience=self.int("patience"),
                eval_every=self.int("eval_every"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def canonical(self) -> str:
        return "".join(f"{k} = {self.raw[k]}\n" for k in sorted(self.raw))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def as_dict(self) -> Mapping[str, str]:
        return dict(self.raw)
