"""Model files: a JSON container with a format version and a payload checksum.

Floats are written with ``repr`` precision, so a loaded model reproduces the
saved parameters bit for bit.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .geo import GeoPoint
from .model.density import MixtureDensity
from .model.estimator import CandidateSet, FeatureDensities, GeoModel
from .model.temporal import TemporalModel

FORMAT = "geoloc-model"
VERSION = 1


class ModelFileError(ValueError):
    pass


class ChecksumError(ModelFileError):
    pass


class UnsupportedVersion(ModelFileError):
    pass


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def model_to_dict(m: GeoModel) -> dict:
    d = m.densities
    return {
        "modalities": list(m.modalities),
        "vocab": d.vocab,
        "prior": {k: d.prior[k] for k in d.vocab},
        "support": {k: d.support.get(k, 0) for k in d.vocab},
        "densities": {k: (None if d.densities.get(k) is None else d.densities[k].to_dict()) for k in d.vocab},
        "candidates": {"points": [p.to_tuple() for p in m.candidates.points],
                       "weights": m.candidates.weights.tolist()},
        "fallback": m.fallback.to_tuple(),
        "temporal": None if m.temporal is None else m.temporal.to_dict(),
    }


def model_from_dict(p: dict) -> GeoModel:
    dens = {k: (None if v is None else MixtureDensity.from_dict(v)) for k, v in p["densities"].items()}
    fd = FeatureDensities(densities=dens, prior=dict(p["prior"]), support=dict(p.get("support", {})))
    cands = CandidateSet([GeoPoint(*pt) for pt in p["candidates"]["points"]],
                         np.array(p["candidates"]["weights"], dtype=float))
    temporal = None if p["temporal"] is None else TemporalModel.from_dict(p["temporal"])
    return GeoModel(densities=fd, candidates=cands, fallback=GeoPoint(*p["fallback"]), temporal=temporal,
                    modalities=tuple(p["modalities"]))


def save_model(m: GeoModel, path: str) -> None:
    payload = model_to_dict(m)
    body = _canonical(payload)
    container = {"format": FORMAT, "version": VERSION,
                 "checksum": hashlib.sha256(body).hexdigest(), "payload": payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(container, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_model(path: str) -> GeoModel:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read()
    try:
        container = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ChecksumError(f"{path}: checksum error (file is corrupt or truncated: {e})") from None
    if not isinstance(container, dict) or container.get("format") != FORMAT:
        raise ModelFileError(f"{path}: not a {FORMAT} file")
    if container.get("version") != VERSION:
        raise UnsupportedVersion(f"unsupported model version {container.get('version')!r} (expected {VERSION})")
    payload = container.get("payload")
    if not isinstance(payload, dict) or \
            hashlib.sha256(_canonical(payload)).hexdigest() != container.get("checksum"):
        raise ChecksumError(f"{path}: checksum error")
    return model_from_dict(payload)
