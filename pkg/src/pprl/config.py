"""Linkage configuration: field groups, banding shape, protocol options.

Both parties must run from byte-identical settings; the handshake compares
digests of the two configuration halves (hash parameters and field-group
layout) and aborts on any mismatch rather than risking a silently empty
intersection.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import yaml

from .lsh import LshParams
from .records import FieldGroupSpec


class Variant(Enum):
    BASE = "base"
    MUTUAL = "mutual"
    COUNT = "count"
    REVEALING = "revealing"


@dataclass(frozen=True)
class LinkageConfig:
    specs: tuple[FieldGroupSpec, ...]
    params: LshParams
    variant: Variant = Variant.BASE
    jaccard_threshold: float = 0.5
    exact_jaccard: bool = False

    def __post_init__(self) -> None:
        if not self.specs:
            raise ValueError("at least one field group is required")
        if not 0.0 < self.jaccard_threshold < 1.0:
            raise ValueError("jaccard_threshold must be in (0, 1)")
        if self.exact_jaccard and self.variant is Variant.COUNT:
            raise ValueError(
                "exact_jaccard needs per-match handles; the count variant has none"
            )

    def params_digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(b"pprl/params/v1\x00")
        h.update(self.params.bands.to_bytes(4, "big"))
        h.update(self.params.rows.to_bytes(4, "big"))
        h.update(self.params.seed)
        return h.digest()

    def spec_digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(b"pprl/groups/v1\x00")
        for spec in self.specs:
            h.update(spec.name.encode("utf-8") + b"\x00")
            h.update(b"\x1f".join(m.encode("utf-8") for m in spec.members) + b"\x00")
            h.update(spec.shingle_len.to_bytes(4, "big"))
            h.update(spec.weight.to_bytes(4, "big"))
        return h.digest()


def load_config(path: str) -> LinkageConfig:
    """Parse a YAML config file. See configs/synthetic.yaml for the shape."""
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> LinkageConfig:
    try:
        lsh_raw = raw["lsh"]
        groups_raw = raw["groups"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"config missing section: {exc}") from exc

    seed_hex = str(lsh_raw["seed"])
    try:
        seed = bytes.fromhex(seed_hex)
    except ValueError as exc:
        raise ValueError("lsh.seed must be hex") from exc
    params = LshParams(
        bands=int(lsh_raw["bands"]), rows=int(lsh_raw["rows"]), seed=seed
    )

    specs = tuple(
        FieldGroupSpec(
            name=str(g["name"]),
            members=tuple(str(m) for m in g["fields"]),
            shingle_len=int(g["shingle_len"]),
            weight=int(g.get("weight", 1)),
        )
        for g in groups_raw
    )

    proto = raw.get("protocol", {}) or {}
    return LinkageConfig(
        specs=specs,
        params=params,
        variant=Variant(proto.get("variant", "base")),
        jaccard_threshold=float(proto.get("jaccard_threshold", 0.5)),
        exact_jaccard=bool(proto.get("exact_jaccard", False)),
    )


def save_config(cfg: LinkageConfig, path: str) -> None:
    doc = {
        "lsh": {
            "bands": cfg.params.bands,
            "rows": cfg.params.rows,
            "seed": cfg.params.seed.hex(),
        },
        "groups": [
            {
                "name": s.name,
                "fields": list(s.members),
                "shingle_len": s.shingle_len,
                "weight": s.weight,
            }
            for s in cfg.specs
        ],
        "protocol": {
            "variant": cfg.variant.value,
            "jaccard_threshold": cfg.jaccard_threshold,
            "exact_jaccard": cfg.exact_jaccard,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)
