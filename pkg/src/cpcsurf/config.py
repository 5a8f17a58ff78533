"""Numerical tolerances shared by the analysis and construction code.

Every field can be overridden through an environment variable named
``CPCSURF_TOL_<FIELD>`` (upper case), e.g. ``CPCSURF_TOL_TAU_DIR=1e-7``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

ENV_PREFIX = "CPCSURF_TOL_"


@dataclass(frozen=True)
class Tolerances:
    rank: float = 1e-10  # scaled by (mean edge length)^2
    unit: float = 1e-9
    num: float = 1e-9
    tau_dir: float = 1e-8
    tau_cpc: float = 1e-8
    tau_zero: float = 1e-12
    tau_merge: float = 1e-6  # scaled by mean edge length
    tau_solve: float = 1e-12
    bond: float = 1e-8  # relative spread allowed for "constant bond length"
    residual_floor: float = 1.0  # lower bound on the principal-residual denominator (unit-normal scale)

    def replace(self, **changes: float) -> "Tolerances":
        return dataclasses.replace(self, **changes)


def from_env(environ: dict[str, str] | None = None) -> Tolerances:
    environ = os.environ if environ is None else environ
    changes = {}
    for field in dataclasses.fields(Tolerances):
        key = ENV_PREFIX + field.name.upper()
        if key in environ:
            changes[field.name] = float(environ[key])
    return Tolerances(**changes)


DEFAULT = from_env()
