"""Instance configuration: one TOML document per instance.

Example::

    name = "two-items"
    seed = 0
    out = "out"

    [density]
    kind = "uniform_box"          # or "exponential_product"
    bounds = [1.0, 1.0]           # exponential: rates = [2, 1], truncation = [8, 8]

    [allocation]
    vertices = [[0, 0], [1, 0], [0, 1]]
    deterministic = false         # true: S is exactly the vertex list

    [menu]
    allocations = [[1, 0], [0, 1]]
    initial_prices = [0.5, 0.5]
    outside_option = true         # add the zero option at price zero
    # prices = [0.57, 0.57]       # fixed prices: skip calibration

    [grid]
    resolutions = [32, 64, 128]   # certificate ladder
    calibration = [64, 128]       # extrapolation pair
    # dual_measure = "diagonal-fusion"   # dominating measure for the dual

    [tolerances]
    certify = 0.02                # gap as a fraction of revenue
    calibrate = 1e-10
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import tomli

from .allocation import AllocationSet
from .density import DensitySpec
from .errors import InputError


@dataclass(frozen=True)
class InstanceConfig:
    name: str
    density: DensitySpec
    S: AllocationSet
    shape: np.ndarray
    initial_prices: np.ndarray
    outside_option: bool = True
    prices: np.ndarray | None = None
    resolutions: tuple = (32, 64, 128)
    calibration: tuple = (64, 128)
    tol: float = 0.02
    calibrate_tol: float = 1e-10
    seed: int = 0
    out: str = "out"
    reference: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    dual_measure: str | None = None

    def __post_init__(self):
        shape = np.atleast_2d(np.asarray(self.shape, dtype=float))
        init = np.asarray(self.initial_prices, dtype=float).ravel()
        if shape.shape[1] != self.S.dim or self.S.dim != self.density.dim:
            raise InputError("density, allocation set and menu differ in dimension")
        if init.size != shape.shape[0]:
            raise InputError("one initial price per menu allocation is required")
        for name in ("resolutions", "calibration"):
            res = tuple(int(r) for r in getattr(self, name))
            if not res or list(res) != sorted(set(res)) or res[0] < 1:
                raise InputError(f"{name} must be strictly ascending positive integers")
            object.__setattr__(self, name, res)
        if not (self.tol > 0 and self.calibrate_tol > 0):
            raise InputError("tolerances must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "initial_prices", init)
        if self.prices is not None:
            p = np.asarray(self.prices, dtype=float).ravel()
            if p.size != shape.shape[0]:
                raise InputError("one price per menu allocation is required")
            object.__setattr__(self, "prices", p)

    def with_overrides(self, **kw) -> "InstanceConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _density(d: dict) -> DensitySpec:
    kind = d.get("kind")
    if kind == "uniform_box":
        return DensitySpec.uniform(d["bounds"])
    if kind == "exponential_product":
        return DensitySpec.exponential(d["rates"], d["truncation"])
    raise InputError(f"unsupported density kind {kind!r} in config")


def from_dict(d: dict, name: str = "config") -> InstanceConfig:
    try:
        dens = _density(d["density"])
        alloc = d["allocation"]
        S = AllocationSet(alloc["vertices"], hull=not alloc.get("deterministic", False))
        menu = d["menu"]
        grid = d.get("grid", {})
        tols = d.get("tolerances", {})
        return InstanceConfig(
            name=d.get("name", name),
            density=dens,
            S=S,
            shape=menu["allocations"],
            initial_prices=menu.get("initial_prices", menu.get("prices")),
            outside_option=menu.get("outside_option", True),
            prices=menu.get("prices"),
            resolutions=tuple(grid.get("resolutions", (32, 64, 128))),
            calibration=tuple(grid.get("calibration", (64, 128))),
            tol=float(tols.get("certify", 0.02)),
            calibrate_tol=float(tols.get("calibrate", 1e-10)),
            seed=int(d.get("seed", 0)),
            out=str(d.get("out", "out")),
            dual_measure=grid.get("dual_measure"),
        )
    except InputError:
        raise
    except KeyError as exc:
        raise InputError(f"config is missing {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise InputError(f"malformed config: {exc}") from exc


def load_config(path) -> InstanceConfig:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from exc
    return from_dict(data, name=str(path))
