"""Material cards: strict JSON description of scalar and isotropic materials.

Scalar card::

    {"C0": 1.0, "modes": [{"C": 1.0, "lambda": 2.0}]}
    {"C0": 1.0, "measure": {"lambda0": 0.0, "atoms": [[2.0, 1.0]]}}

Isotropic card (``bulk`` may be omitted when ``incompressible`` is true)::

    {"bulk": {"C0": ..., "modes": [...]}, "shear": {...}, "incompressible": false}

Unknown keys are rejected and every problem found is reported at once.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import ConfigurationError, DomainError
from .material import (
    ElasticModuli,
    IsotropicKernel,
    IsotropicMaterial,
    IsotropicModuli,
    Material,
    PronyMode,
    ScalarKernel,
    ScalarMaterial,
)
from .spectra import measure_from_dict

_SCALAR_KEYS = {"C0", "modes", "measure"}
_ISO_KEYS = {"bulk", "shear", "incompressible"}


def _number(value, where: str, problems: list[str], positive: bool = True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        problems.append(f"{where} must be a finite number, got {value!r}")
        return None
    if positive and not value > 0:
        problems.append(f"{where} must be > 0, got {value!r}")
        return None
    return float(value)


def _scalar_part(data, where: str, problems: list[str]):
    if not isinstance(data, dict):
        problems.append(f"{where} must be an object")
        return None
    unknown = set(data) - _SCALAR_KEYS
    if unknown:
        problems.append(f"{where}: unknown keys {sorted(unknown)}")
    if "C0" not in data:
        problems.append(f"{where}: missing C0")
        c0 = None
    else:
        c0 = _number(data["C0"], f"{where}.C0", problems)
    if "modes" in data and "measure" in data:
        problems.append(f"{where}: give either modes or measure, not both")
        return None
    kernel = None
    if "measure" in data:
        try:
            kernel = ScalarKernel.from_measure(measure_from_dict(data["measure"]))
        except ConfigurationError as exc:
            problems.extend(f"{where}.measure: {p}" for p in exc.problems or [str(exc)])
    else:
        modes = data.get("modes", [])
        if not isinstance(modes, list):
            problems.append(f"{where}.modes must be a list")
            modes = []
        parsed = []
        for i, mode in enumerate(modes):
            at = f"{where}.modes[{i}]"
            if not isinstance(mode, dict):
                problems.append(f"{at} must be an object with C and lambda")
                continue
            extra = set(mode) - {"C", "lambda"}
            if extra:
                problems.append(f"{at}: unknown keys {sorted(extra)}")
            missing = {"C", "lambda"} - set(mode)
            if missing:
                problems.append(f"{at}: missing {sorted(missing)}")
                continue
            c = _number(mode["C"], f"{at}.C", problems)
            lam = _number(mode["lambda"], f"{at}.lambda", problems)
            if c is not None and lam is not None:
                parsed.append(PronyMode(c, lam))
        kernel = ScalarKernel(tuple(parsed))
    if c0 is None or kernel is None:
        return None
    return kernel, ElasticModuli.for_kernel(kernel, c0)


def material_from_dict(data) -> Material:
    """Build a material from a parsed card, aggregating every validation problem."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigurationError("material card must be a JSON object")
    if set(data) & _ISO_KEYS:
        unknown = set(data) - _ISO_KEYS
        if unknown:
            problems.append(f"unknown keys {sorted(unknown)} in isotropic card")
        inc = data.get("incompressible", False)
        if not isinstance(inc, bool):
            problems.append("incompressible must be true or false")
            inc = False
        if "shear" not in data:
            problems.append("isotropic card needs a shear part")
        shear = _scalar_part(data.get("shear"), "shear", problems) if "shear" in data else None
        bulk = None
        if inc:
            if "bulk" in data:
                problems.append("an incompressible card must not carry a bulk part")
        elif "bulk" not in data:
            problems.append("a compressible isotropic card needs a bulk part")
        else:
            bulk = _scalar_part(data["bulk"], "bulk", problems)
        if problems:
            raise ConfigurationError("invalid material card", problems=problems)
        bulk_kernel = bulk[0] if bulk else ScalarKernel.zero()
        kernel = IsotropicKernel(bulk_kernel, shear[0], inc)
        moduli = IsotropicModuli(bulk[1] if bulk else None, shear[1], inc)
        return IsotropicMaterial(kernel, moduli)
    part = _scalar_part(data, "material", problems)
    if problems:
        raise ConfigurationError("invalid material card", problems=problems)
    return ScalarMaterial(*part)


def _scalar_to_dict(kernel: ScalarKernel, moduli: ElasticModuli) -> dict:
    out: dict = {"C0": moduli.equilibrium}
    if kernel.measure is not None:
        out["measure"] = kernel.measure.to_dict()
    else:
        out["modes"] = [{"C": m.stiffness, "lambda": m.rate} for m in kernel.modes]
    return out


def material_to_dict(material: Material) -> dict:
    if isinstance(material, ScalarMaterial):
        return _scalar_to_dict(material.kernel, material.moduli)
    if isinstance(material, IsotropicMaterial):
        k, m = material.kernel, material.moduli
        out: dict = {"shear": _scalar_to_dict(k.shear, m.shear), "incompressible": k.incompressible}
        if not k.incompressible:
            out["bulk"] = _scalar_to_dict(k.bulk, m.bulk)
        return out
    raise TypeError(f"unsupported material {type(material).__name__}")


def load_material(path) -> Material:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read material card {path}", problems=[str(exc)]) from exc
    try:
        return material_from_dict(data)
    except DomainError as exc:
        raise ConfigurationError(f"invalid material card {path}", problems=[str(exc)]) from exc
