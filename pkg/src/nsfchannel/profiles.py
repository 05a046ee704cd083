"""Named analytic data profiles for run configurations.

A profile is a short string like ``"cosine(amplitude=0.5)"`` naming a
one-parameter shape.  Face data evaluate the shape on the face's
tangential coordinate with the face span as the period reference, so the
walls see ``cos(pi x1 / l)`` and the channel ends ``cos(pi x2)``.  The
body force accepts ``zero`` and ``constant`` with a per-component value.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Profile", "ProfileError", "parse_profile", "face_values",
           "volume_vector_values"]

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$", re.DOTALL)

_KNOWN = {
    "zero": (),
    "constant": ("value",),
    "cosine": ("amplitude",),
}


class ProfileError(ValueError):
    """Malformed or unknown profile string."""


@dataclass(frozen=True)
class Profile:
    name: str
    args: dict = field(default_factory=dict)

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.args.items())
        return f"{self.name}({inner})" if inner else self.name


def parse_profile(text: str) -> Profile:
    m = _CALL.match(text)
    if not m:
        raise ProfileError(f"cannot parse profile {text!r}")
    name, argtext = m.group(1), m.group(2)
    if name not in _KNOWN:
        raise ProfileError(
            f"unknown profile {name!r}; known: {', '.join(sorted(_KNOWN))}")
    args: dict = {}
    if argtext and argtext.strip():
        for part in argtext.split(","):
            if "=" not in part:
                raise ProfileError(
                    f"profile arguments must be key=value, got {part!r}")
            key, val = part.split("=", 1)
            key = key.strip()
            try:
                args[key] = ast.literal_eval(val.strip())
            except (ValueError, SyntaxError) as exc:
                raise ProfileError(
                    f"bad value for {key!r} in {text!r}: {exc}") from exc
    expected = _KNOWN[name]
    if set(args) != set(expected):
        raise ProfileError(
            f"profile {name!r} takes exactly {expected}, got {tuple(args)}")
    return Profile(name, args)


def _evaluate(profile: Profile, x: np.ndarray, span: float) -> np.ndarray:
    if profile.name == "zero":
        return np.zeros_like(x)
    if profile.name == "constant":
        return np.full_like(x, float(profile.args["value"]))
    if profile.name == "cosine":
        return float(profile.args["amplitude"]) * np.cos(np.pi * x / span)
    raise ProfileError(f"unknown profile {profile.name!r}")


def face_values(profile: Profile, grid, face) -> np.ndarray:
    """Profile evaluated on the tangential coordinate of one face."""
    f = grid.face(face) if isinstance(face, str) else face
    coords = grid.face_coords(f)
    if f.axis == 0:
        x, span = coords[-1], 1.0
    else:
        x, span = coords[0], grid.channel.length
    return _evaluate(profile, np.asarray(x, dtype=float), span)


def volume_vector_values(profile: Profile, grid) -> np.ndarray:
    """Body-force field from a profile: ``zero`` or ``constant`` whose
    value may be a scalar (applied streamwise) or one entry per axis."""
    shape = (grid.dim,) + grid.shape
    if profile.name == "zero":
        return np.zeros(shape)
    if profile.name == "constant":
        value = profile.args["value"]
        if np.isscalar(value):
            value = [value] + [0.0] * (grid.dim - 1)
        value = np.asarray(value, dtype=float)
        if value.shape != (grid.dim,):
            raise ProfileError(
                f"body-force constant needs {grid.dim} components, "
                f"got shape {value.shape}")
        return np.broadcast_to(value[(...,) + (None,) * grid.dim],
                               shape).copy()
    raise ProfileError(
        f"body force supports zero/constant profiles, not {profile.name!r}")
