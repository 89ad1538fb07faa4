"""Structured run configuration: JSON schema, validation, content hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .model import VarSpec
from .sampler import McmcConfig, PriorConfig

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.field_path = path


def _get(cfg, path, expected=None, required=True, default=None):
    node = cfg
    walked = []
    for part in path.split("."):
        walked.append(part)
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(".".join(walked), "missing required field")
            return default
        node = node[part]
    if expected is not None and not isinstance(node, expected):
        names = (
            expected.__name__ if isinstance(expected, type)
            else "/".join(t.__name__ for t in expected)
        )
        raise ConfigError(path, f"expected {names}, got {type(node).__name__}")
    return node


class RunConfig:
    """Parsed and validated run configuration.

    See README for the documented schema. The raw dictionary stays
    available as `.raw`; `.content_hash()` returns the sha256 of the
    canonical JSON rendering, which `config.lock` records so that reruns
    can prove they used identical settings.
    """

    def __init__(self, raw: dict, base_dir: Path = Path(".")):
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        self.raw = raw
        self.base_dir = Path(base_dir)
        self.output_dir = self.base_dir / _get(raw, "output_dir", str)
        self.seed = _get(raw, "seed", int, required=False, default=0)

    # --- sections -------------------------------------------------------

    def data_section(self):
        path = _get(self.raw, "data.path", str)
        variables = _get(self.raw, "data.variables", list, required=False)
        transforms = _get(self.raw, "data.transforms", dict, required=False, default={})
        for v, code in transforms.items():
            if code not in ("log-difference", "level"):
                raise ConfigError(f"data.transforms.{v}", f"unknown transform {code!r}")
        default = _get(
            self.raw, "data.default_transform", str, required=False,
            default="log-difference",
        )
        return self.base_dir / path, variables, transforms, default

    def var_spec(self, n_series: int) -> VarSpec:
        p = _get(self.raw, "model.p", int)
        intercept = _get(self.raw, "model.intercept", bool, required=False, default=True)
        if p < 1:
            raise ConfigError("model.p", "lag order must be >= 1")
        return VarSpec(M=n_series, p=p, intercept=intercept)

    def _prior(self, section, default_family):
        node = _get(self.raw, section, dict, required=False, default=None)
        if node is None:
            return PriorConfig(family=default_family)
        family = _get(node, "family", str, required=False, default=default_family)
        if family.upper() not in ("R2D2", "DL", "SSVS", "HM", "HN", "FLAT"):
            raise ConfigError(f"{section}.family", f"unknown family {family!r}")
        grouping = _get(node, "grouping", str, required=False, default="global")
        if grouping not in ("global", "semi-global", "semi-global-local"):
            raise ConfigError(f"{section}.grouping", f"unknown grouping {grouping!r}")
        options = _get(node, "options", dict, required=False, default={})
        return PriorConfig(family=family, grouping=grouping, options=options)

    def phi_prior(self) -> PriorConfig:
        return self._prior("prior_phi", "R2D2")

    def l_prior(self) -> PriorConfig:
        cfg = self._prior("prior_l", "R2D2")
        if cfg.family.upper() == "HM":
            raise ConfigError(
                "prior_l.family",
                "the lag-structured family does not apply to the factor; use HN",
            )
        return cfg

    def mcmc(self, seed_override=None) -> McmcConfig:
        node = _get(self.raw, "mcmc", dict, required=False, default={})
        seed = seed_override if seed_override is not None else node.get("seed", self.seed)
        try:
            return McmcConfig(
                draws=node.get("draws", 10_000),
                burnin=node.get("burnin", 5_000),
                thin=node.get("thin", 10),
                seed=int(seed),
            )
        except ValueError as exc:
            raise ConfigError("mcmc", str(exc)) from exc

    def forecast_section(self):
        node = _get(self.raw, "forecast", dict)
        return node

    def content_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def write_lock(self) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        lock = self.output_dir / "config.lock"
        canon = json.dumps(self.raw, sort_keys=True, indent=2)
        lock.write_text(f"sha256:{self.content_hash()}\n{canon}\n")
        return lock


def load_config(path, base_dir=None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    return RunConfig(raw, base_dir=base_dir if base_dir is not None else path.parent)
