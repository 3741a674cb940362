"""Run-configuration files: a strict TOML subset, documented in README.

Supported syntax: ``[section]`` / ``[section.sub]`` headers, ``key = value``
pairs with string, integer, float, boolean or flat-array values, and ``#``
comments.  That covers the whole run-configuration schema; anything else
is rejected loudly rather than half-parsed.
"""

from __future__ import annotations

import re

from .bench import BenchmarkSpec, branching_plate_spec, shear_plate_spec

__all__ = ["loads", "load_file", "dumps", "spec_from_config",
           "spec_to_config", "ConfigError"]


class ConfigError(ValueError):
    """Malformed configuration file or unknown schema entries."""


_BARE_KEY = re.compile(r"^[A-Za-z0-9_-]+$")


def _parse_scalar(text: str):
    text = text.strip()
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    if text == "true":
        return True
    if text == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {text!r}") from exc


def loads(text: str) -> dict:
    """Parse configuration text into nested dictionaries."""
    root: dict = {}
    table = root
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed table header")
            path = line[1:-1].strip()
            table = root
            for part in path.split("."):
                if not _BARE_KEY.match(part):
                    raise ConfigError(f"line {lineno}: bad table name {part!r}")
                table = table.setdefault(part, {})
                if not isinstance(table, dict):
                    raise ConfigError(f"line {lineno}: {part!r} is not a table")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _BARE_KEY.match(key):
            raise ConfigError(f"line {lineno}: bad key {key!r}")
        value = value.strip()
        if value.startswith("["):
            if not value.endswith("]"):
                raise ConfigError(f"line {lineno}: arrays must be one line")
            inner = value[1:-1].strip()
            table[key] = ([] if not inner else
                          [_parse_scalar(v) for v in inner.split(",")])
        else:
            table[key] = _parse_scalar(value)
    return root


def load_file(path) -> dict:
    with open(path) as fh:
        return loads(fh.read())


def _format_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dumps(data: dict) -> str:
    """Serialize nested dictionaries in the same subset (round-trips)."""
    lines: list[str] = []

    def emit(table: dict, prefix: str):
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        subs = {k: v for k, v in table.items() if isinstance(v, dict)}
        if prefix and scalars:
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            if isinstance(v, list):
                lines.append(
                    f"{k} = [" + ", ".join(_format_scalar(x) for x in v) + "]")
            else:
                lines.append(f"{k} = {_format_scalar(v)}")
        if scalars:
            lines.append("")
        for k, v in subs.items():
            emit(v, f"{prefix}.{k}" if prefix else k)

    emit(data, "")
    return "\n".join(lines).rstrip() + "\n"


def spec_from_config(data: dict) -> BenchmarkSpec:
    """Build a BenchmarkSpec from a parsed configuration tree.

    Schema: ``[problem] benchmark, mesh_level``; ``[scheme] kind, beta_s2,
    lambda0``; ``[newmark] beta, gamma``; ``[time] dt_initial, dt_min,
    dt_max, t_final, adaptive``; ``[material] young, poisson, density, gc,
    l0, eta0`` (optional; defaults to the published table); ``[output]
    every``.
    """
    problem = data.get("problem", {})
    name = problem.get("benchmark")
    if name == "shear_plate":
        spec = shear_plate_spec(mesh_level=problem.get("mesh_level", "coarse"))
    elif name == "branching_plate":
        spec = branching_plate_spec(
            mesh_level=problem.get("mesh_level", "coarse"))
    else:
        raise ConfigError(f"unknown or missing benchmark name {name!r}")
    scheme = data.get("scheme", {})
    nm = data.get("newmark", {})
    tm = data.get("time", {})
    out = data.get("output", {})
    fields = dict(
        scheme=scheme.get("kind", spec.scheme),
        beta_s2=scheme.get("beta_s2", spec.beta_s2),
        lambda0=scheme.get("lambda0", spec.lambda0),
        newmark_beta=nm.get("beta", spec.newmark_beta),
        newmark_gamma=nm.get("gamma", spec.newmark_gamma),
        dt_initial=tm.get("dt_initial", spec.dt_initial),
        dt_min=tm.get("dt_min", spec.dt_min),
        dt_max=tm.get("dt_max", spec.dt_max),
        t_final=tm.get("t_final", spec.t_final),
        adaptive=tm.get("adaptive", spec.adaptive),
        output_every=out.get("every", spec.output_every),
    )
    if "material" in data:
        m = dict(spec.material)
        m.update(data["material"])
        fields["material"] = m
    return BenchmarkSpec(name=spec.name,
                         mesh_level=problem.get("mesh_level", "coarse"),
                         material=fields.pop("material", spec.material),
                         **fields)


def spec_to_config(spec: BenchmarkSpec) -> dict:
    """Inverse of :func:`spec_from_config` (round-trips a spec)."""
    return {
        "problem": {"benchmark": spec.name, "mesh_level": spec.mesh_level},
        "scheme": {"kind": spec.scheme, "beta_s2": spec.beta_s2,
                   "lambda0": spec.lambda0},
        "newmark": {"beta": spec.newmark_beta, "gamma": spec.newmark_gamma},
        "time": {"dt_initial": spec.dt_initial, "dt_min": spec.dt_min,
                 "dt_max": spec.dt_max, "t_final": spec.t_final,
                 "adaptive": spec.adaptive},
        "material": dict(spec.material),
        "output": {"every": spec.output_every},
    }
