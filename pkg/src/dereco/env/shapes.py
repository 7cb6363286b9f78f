"""Transportable object shapes, the catalog file, and object sampling.

The catalog JSON shipped with the package is the single source of truth for
shape geometry: each entry is {name, vertices [[x,y]...], grasp_points
[[x,y],[x,y]], seen}. Vertices are meters in the object frame; grasp point
0 is assigned to robot 0 and grasp point 1 to robot 1. Dimensions are
approximate desk-scale stand-ins within 0.1-0.6 m bounding boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..config import ConfigError, ContractError

MASS_RANGE = (0.2, 1.0)
FRICTION_RANGE = (0.5, 1.0)


@dataclass
class ShapeDef:
    name: str
    vertices: list[tuple[float, float]]
    grasp_points: list[tuple[float, float]]
    seen: bool


@dataclass
class ObjectSpec:
    """One concrete object: shape identity plus sampled physical properties.

    ``one_hot`` spans the catalog the object was sampled from; objects built
    outside a catalog (e.g. unseen shapes during evaluation against a policy
    trained on the seen set) carry an all-zero one_hot.
    """

    name: str
    shape_id: int
    one_hot: np.ndarray
    vertices: np.ndarray
    grasp_points: np.ndarray
    mass: float
    friction: float
    seen: bool = True

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "shape_id": self.shape_id,
            "one_hot": self.one_hot.tolist(),
            "mass": self.mass,
            "friction": self.friction,
            "seen": self.seen,
        }


_CATALOG_CACHE: list[ShapeDef] | None = None


def load_catalog(path: str | None = None) -> list[ShapeDef]:
    """All shapes from the catalog file (packaged data unless a path is given)."""
    global _CATALOG_CACHE
    if path is None and _CATALOG_CACHE is not None:
        return list(_CATALOG_CACHE)
    if path is None:
        raw = resources.files("dereco.env").joinpath("data/catalog.json").read_text()
    else:
        with open(path) as fh:
            raw = fh.read()
    entries = json.loads(raw)
    shapes = [
        ShapeDef(
            name=e["name"],
            vertices=[tuple(v) for v in e["vertices"]],
            grasp_points=[tuple(g) for g in e["grasp_points"]],
            seen=bool(e["seen"]),
        )
        for e in entries
    ]
    if path is None:
        _CATALOG_CACHE = list(shapes)
    return shapes


def seen_shapes(path: str | None = None) -> list[ShapeDef]:
    return [s for s in load_catalog(path) if s.seen]


def unseen_shapes(path: str | None = None) -> list[ShapeDef]:
    return [s for s in load_catalog(path) if not s.seen]


def shapes_by_name(names: list[str], path: str | None = None) -> list[ShapeDef]:
    table = {s.name: s for s in load_catalog(path)}
    missing = [n for n in names if n not in table]
    if missing:
        raise ConfigError(f"unknown shape names: {missing}")
    return [table[n] for n in names]


def make_object(
    shape: ShapeDef,
    catalog: list[ShapeDef],
    mass: float,
    friction: float,
) -> ObjectSpec:
    """Build an ObjectSpec for ``shape``, one-hot encoded over ``catalog``.

    A shape outside the catalog gets an all-zero one_hot and shape_id -1.
    """
    names = [s.name for s in catalog]
    one_hot = np.zeros(len(catalog))
    if shape.name in names:
        idx = names.index(shape.name)
        one_hot[idx] = 1.0
    else:
        idx = -1
    return ObjectSpec(
        name=shape.name,
        shape_id=idx,
        one_hot=one_hot,
        vertices=np.asarray(shape.vertices, dtype=np.float64),
        grasp_points=np.asarray(shape.grasp_points, dtype=np.float64),
        mass=float(mass),
        friction=float(friction),
        seen=shape.seen,
    )


def sample_object(
    rng: np.random.Generator,
    catalog: list[ShapeDef],
    mass_range: tuple[float, float] = MASS_RANGE,
    friction_range: tuple[float, float] = FRICTION_RANGE,
) -> ObjectSpec:
    """Uniform shape from ``catalog``, mass and friction uniform in range."""
    if not catalog:
        raise ConfigError("cannot sample from an empty shape catalog")
    idx = int(rng.integers(len(catalog)))
    mass = float(rng.uniform(*mass_range))
    friction = float(rng.uniform(*friction_range))
    return make_object(catalog[idx], catalog, mass, friction)


def privileged_vector(
    obj: ObjectSpec,
    catalog_size: int,
    mass_range: tuple[float, float] = MASS_RANGE,
    friction_range: tuple[float, float] = FRICTION_RANGE,
) -> np.ndarray:
    """Training-side object descriptor: [one_hot, mass_norm, friction_norm].

    Physical scalars are mapped linearly onto [0, 1] over the training
    ranges. Width is catalog_size + 2.
    """
    if obj.one_hot.shape[0] != catalog_size:
        raise ContractError(
            f"object one_hot width {obj.one_hot.shape[0]} does not match "
            f"catalog size {catalog_size}"
        )
    mass_span = mass_range[1] - mass_range[0]
    fric_span = friction_range[1] - friction_range[0]
    mass_norm = (obj.mass - mass_range[0]) / mass_span if mass_span > 0 else 0.0
    fric_norm = (
        (obj.friction - friction_range[0]) / fric_span if fric_span > 0 else 0.0
    )
    return np.concatenate([obj.one_hot, [mass_norm, fric_norm]])
