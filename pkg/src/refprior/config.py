"""Run configuration files: a flat INI-style key-value format with sections.

Unknown sections or keys are rejected.  Paths are resolved relative to the
config file's directory.  ``resolved_text`` renders the configuration back
out with every default filled in, so a run directory always embeds enough
to replay the run exactly.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .family import (
    ConstraintSpec,
    ParametricFamily,
    bernoulli_family,
    load_matrix_family,
    negative_binomial_family,
    normal_family,
    poisson_family,
)
from .ba_mcmc import McmcConfig

_FAMILY_DEFAULTS = {
    # name: (theta_lo, theta_hi)
    "bernoulli": (0.0, 1.0),
    "negative_binomial": (0.1, 1.0),
    "poisson": (0.0, 5.0),
    "normal": (-15.0, 15.0),
    "custom": (None, None),
}

# Section -> key -> (type tag, default).  A default of ... means required
# when the section is used; None means optional with no default.
_SCHEMA = {
    "family": {
        "name": ("str", ...),
        "trials": ("int", 1),
        "theta_lo": ("float", None),
        "theta_hi": ("float", None),
        "truncation_tol": ("float", 1e-10),
        "successes": ("int", 5),
        "sigma": ("float", 1.0),
        "bins": ("int", 256),
        "matrix_file": ("path", None),
    },
    "constraint": {
        "expense": ("str", "theta_squared"),
        "multiplier": ("float", ...),
        "budget": ("float", None),
    },
    "grid": {
        "points": ("int", 201),
        "values": ("floats", None),
        "lo": ("float", None),
        "hi": ("float", None),
    },
    "capacity": {
        "tol": ("float", 1e-8),
        "max_iter": ("int", 10_000),
    },
    "mcmc": {
        "iterations": ("int", ...),
        "n0": ("int", 500),
        "growth": ("int", 20),
        "mh_steps": ("int", 10_000),
        "proposal_halfwidth": ("float", None),
        "burn_in_fraction": ("float", 0.2),
        "thinning": ("int", None),
        "seed": ("int", 0),
        "smoothing_floor": ("float", 1e-12),
        "hist_bins": ("int", 100),
        "hist_every": ("int", 1),
        "common_randomness": ("bool", False),
        "compute_oracle": ("bool", False),
        "oracle_grid_points": ("int", 201),
    },
    "verify": {
        "n_steps": ("int", 5),
        "epsilon": ("float", 0.05),
        "alpha": ("float", 0.05),
        "replications": ("int", 500),
        "lipschitz_trials": ("int", 200),
        "beta_inflation": ("float", 1.1),
        "beta_override": ("float", None),
        "max_samples": ("int", 10_000_000),
        "seed": ("int", 0),
    },
    "output": {
        "dir": ("path", None),
        "figures": ("bool", True),
    },
}

_REQUIRED_SECTIONS = {
    "capacity": ("family", "grid", "capacity"),
    "refprior": ("family", "mcmc"),
    "ks-verify": ("family", "grid", "verify"),
    "jeffreys": ("family", "grid"),
}


def _parse_value(tag: str, raw: str, base: Path):
    raw = raw.strip()
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if tag == "floats":
            return [float(tok) for tok in raw.replace(",", " ").split()]
        if tag == "path":
            return (base / raw).resolve()
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r} as {tag}") from exc


@dataclass
class RunSpec:
    """Fully resolved configuration: one dict of parsed values per section."""

    command: str
    sections: dict
    config_path: Path

    def get(self, section: str, key: str):
        return self.sections[section][key]


def load_config(path, command: str) -> RunSpec:
    """Parse and validate a config file for the given command."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#",), interpolation=None
    )
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    if command not in _REQUIRED_SECTIONS:
        raise ConfigError(f"unknown command {command!r}")
    allowed = set(_REQUIRED_SECTIONS[command]) | {"output", "constraint"}
    base = path.parent

    sections: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        if section not in allowed:
            raise ConfigError(
                f"{path}: section [{section}] does not apply to {command!r}"
            )
        schema = _SCHEMA[section]
        values = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            tag, _ = schema[key]
            values[key] = _parse_value(tag, raw, base)
        sections[section] = values

    for section in _REQUIRED_SECTIONS[command]:
        if section not in sections:
            raise ConfigError(f"{path}: missing required section [{section}]")

    # Fill defaults and check for required keys.
    for section, values in sections.items():
        for key, (tag, default) in _SCHEMA[section].items():
            if key in values:
                continue
            if default is ...:
                raise ConfigError(
                    f"{path}: [{section}] is missing required key {key!r}"
                )
            values[key] = default
    sections.setdefault("output", {"dir": None, "figures": True})
    return RunSpec(command=command, sections=sections, config_path=path)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build_family(spec: RunSpec) -> ParametricFamily:
    fam = spec.sections["family"]
    name = fam["name"]
    if name not in _FAMILY_DEFAULTS:
        raise ConfigError(f"unknown family {name!r}")
    default_lo, default_hi = _FAMILY_DEFAULTS[name]
    lo = fam["theta_lo"] if fam["theta_lo"] is not None else default_lo
    hi = fam["theta_hi"] if fam["theta_hi"] is not None else default_hi
    trials = fam["trials"]
    try:
        if name == "bernoulli":
            if (lo, hi) != (0.0, 1.0):
                raise ConfigError("bernoulli family is defined on [0, 1]")
            return bernoulli_family(trials=trials)
        if name == "negative_binomial":
            return negative_binomial_family(
                successes=fam["successes"],
                theta_lo=lo,
                theta_hi=hi,
                trials=trials,
                truncation_tol=fam["truncation_tol"],
            )
        if name == "poisson":
            return poisson_family(
                rate_lo=lo,
                rate_hi=hi,
                trials=trials,
                truncation_tol=fam["truncation_tol"],
            )
        if name == "normal":
            return normal_family(
                mean_lo=lo,
                mean_hi=hi,
                sigma=fam["sigma"],
                trials=trials,
                bins=fam["bins"],
            )
        if fam["matrix_file"] is None:
            raise ConfigError("custom family requires matrix_file")
        if trials != 1:
            raise ConfigError("custom matrix channels do not support trials > 1")
        return load_matrix_family(fam["matrix_file"])
    except (ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build family {name!r}: {exc}") from exc


def build_constraint(spec: RunSpec) -> ConstraintSpec | None:
    if "constraint" not in spec.sections:
        return None
    block = spec.sections["constraint"]
    if block["expense"] != "theta_squared":
        raise ConfigError(f"unknown expense {block['expense']!r}")
    return ConstraintSpec(
        multiplier=block["multiplier"],
        budget=block["budget"],
        name=block["expense"],
    )


def build_grid(spec: RunSpec, family: ParametricFamily) -> np.ndarray:
    block = spec.sections["grid"]
    if block["values"] is not None:
        grid = np.asarray(block["values"], dtype=float)
    else:
        lo = block["lo"] if block["lo"] is not None else family.theta_lo
        hi = block["hi"] if block["hi"] is not None else family.theta_hi
        grid = np.linspace(lo, hi, block["points"])
    if grid.size == 0 or (grid.size > 1 and not np.all(np.diff(grid) > 0)):
        raise ConfigError("grid values must be strictly increasing")
    if grid[0] < family.theta_lo or grid[-1] > family.theta_hi:
        raise ConfigError("grid extends outside the family parameter domain")
    return grid


def build_mcmc_config(
    spec: RunSpec,
    family: ParametricFamily,
    seed_override: int | None = None,
) -> McmcConfig:
    block = spec.sections["mcmc"]
    seed = seed_override if seed_override is not None else block["seed"]
    try:
        return McmcConfig(
            family=family,
            iterations=block["iterations"],
            n0=block["n0"],
            growth=block["growth"],
            mh_steps=block["mh_steps"],
            proposal_halfwidth=block["proposal_halfwidth"],
            burn_in_fraction=block["burn_in_fraction"],
            thinning=block["thinning"],
            seed=seed,
            smoothing_floor=block["smoothing_floor"],
            constraint=build_constraint(spec),
            common_randomness=block["common_randomness"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def resolved_text(spec: RunSpec, overrides: dict | None = None) -> str:
    """Render the fully resolved configuration (defaults filled, overrides
    applied) as INI text suitable for replaying the run."""
    merged = {s: dict(v) for s, v in spec.sections.items()}
    for (section, key), value in (overrides or {}).items():
        merged.setdefault(section, {})[key] = value
    lines = [f"# resolved configuration for command: {spec.command}"]
    for section in sorted(merged):
        lines.append(f"[{section}]")
        for key in sorted(merged[section]):
            value = merged[section][key]
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, (list, tuple, np.ndarray)):
                value = ", ".join(f"{v:.17g}" for v in value)
            elif isinstance(value, float):
                value = f"{value:.17g}"
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
