"""Run configuration: defaults, file loading, schema validation and hashing.

A config is a plain JSON object with ``model``, ``experiment``, ``rng`` and
``output`` sections.  TOML files are read and converted to the same form.
The config hash is the SHA-256 of the canonical serialization (sorted keys,
no whitespace).
"""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("tail-rates", "typical-height", "concentration", "hitting-time", "correlation-decay",
               "appendix-tail")
RUN_KINDS = ("simulate",) + EXPERIMENTS

# experiment parameters filled in when absent
PARAM_DEFAULTS = {
    "simulate": {"n_sweeps": 1000, "snapshot_every": 100, "start": "zero", "n_replicas": 1},
    "tail-rates": {"h_list": [1, 2, 3], "M": 64, "n_samples": 10000, "burn_in": 500, "method": "ratio",
                   "tail_mode": "free"},
    "typical-height": {"M": None, "n_samples": 10000, "burn_in": 500, "method": "ratio", "tail_mode": "free",
                       "ci_policy": "point"},
    "concentration": {"K": 2, "n_samples": 200, "burn_in": 2000, "thin": 10, "epsilon": 0.2, "H": None,
                      "agreement_tol": 0.02},
    "hitting-time": {"a": 0.5, "L_list": [4, 6, 8], "n_seeds": 32, "T_max": 10 ** 7, "target": "omega",
                     "start": "zero", "fraction": None, "min_level": 1, "H": None, "delta": 0.1,
                     "nu_burn_in": 1000, "ci_policy": "point"},
    "correlation-decay": {"M": 64, "separations": [0, 1, 2, 3, 4, 6, 8], "n_samples": 2000, "burn_in": 500,
                          "thin": 2, "level": 1},
    "appendix-tail": {"proxy_side": 4},
}

MODEL_DEFAULTS = {"n_plus": None, "bc": {"kind": "const", "value": 0}, "bond_double_count": False}

# model mode used when a config does not name one
KIND_MODES = {"simulate": "floor_ceiling", "concentration": "floor", "hitting-time": "floor_ceiling",
              "appendix-tail": "floor_ceiling", "tail-rates": "free", "typical-height": "free",
              "correlation-decay": "free"}


class ConfigError(ValueError):
    """Invalid configuration; ``diagnostics`` lists ``(location, message)`` pairs."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(f"{loc}: {msg}" for loc, msg in self.diagnostics))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def load_schema(name: str) -> dict:
    return json.loads(resources.files("psos.schemas").joinpath(f"{name}.schema.json").read_text("utf-8"))


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line or line.strip().startswith(f"{key} ") or line.strip().startswith(f"{key}="):
            return i
    return None


def read_config_file(path: str | Path) -> tuple[dict, str]:
    """Parse a JSON or TOML config file; returns the object and the raw text."""
    path = Path(path)
    text = path.read_text("utf-8")
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(text), text
        return json.loads(text), text
    except json.JSONDecodeError as e:
        raise ConfigError([(f"{path}:{e.lineno}:{e.colno}", e.msg)]) from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError([(str(path), str(e))]) from None


def validate(cfg: dict, text: str | None = None, source: str = "config") -> None:
    """Schema check; raises :class:`ConfigError` naming each offending field (and line when known)."""
    validator = jsonschema.Draft202012Validator(load_schema("config"))
    diags = []
    for err in sorted(validator.iter_errors(cfg), key=lambda e: [str(p) for p in e.absolute_path]):
        path = [str(p) for p in err.absolute_path]
        if err.validator == "required":
            missing = err.message.split("'")[1]
            path = path + [missing]
            msg = f"missing required field '{'.'.join(path)}'"
        else:
            msg = err.message
        loc = ".".join(path) or "<root>"
        line = _line_of(text, path[-1]) if (text and path and err.validator != "required") else None
        diags.append((f"{source}:{line}:{loc}" if line else f"{source}:{loc}", msg))
    if diags:
        raise ConfigError(diags)


def resolve(cfg: dict) -> dict:
    """Fill defaults into a (schema-valid) config; the result is what gets hashed."""
    out = copy.deepcopy(cfg)
    model = out["model"]
    model.setdefault("mode", KIND_MODES[out["experiment"]["name"]])
    model["p"], model["beta"] = float(model["p"]), float(model["beta"])
    for k, v in MODEL_DEFAULTS.items():
        model.setdefault(k, copy.deepcopy(v))
    exp = out["experiment"]
    params = exp.setdefault("params", {})
    for k, v in PARAM_DEFAULTS[exp["name"]].items():
        params.setdefault(k, copy.deepcopy(v))
    out["rng"].setdefault("scheme", "philox-seedsequence")
    output = out.setdefault("output", {})
    output.setdefault("timestamps", False)
    return out


def merge(base: dict, override: dict) -> dict:
    """Recursive dict merge; ``None`` values in ``override`` are ignored."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def build_config(file_path: str | None, overrides: dict, name: str) -> dict:
    """Config from an optional file plus CLI overrides, validated and resolved."""
    text, base, source = None, {}, "arguments"
    if file_path:
        base, text = read_config_file(file_path)
        source = str(file_path)
        if not isinstance(base, dict):
            raise ConfigError([(source, "top level must be an object")])
    cfg = merge(base, overrides)
    cfg.setdefault("experiment", {}).setdefault("name", name)
    if cfg["experiment"]["name"] != name:
        raise ConfigError([(f"{source}:experiment.name",
                            f"config is for '{cfg['experiment']['name']}', not '{name}'")])
    cfg.setdefault("rng", {}).setdefault("seed", 0)
    validate(cfg, text, source)
    cfg = resolve(cfg)
    validate(cfg, None, source)
    return cfg
