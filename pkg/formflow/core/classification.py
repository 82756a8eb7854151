"""Lookup over the (p, k, n) table of interactions and the particles they create.

p is the degree of the evolutionary form (how many balance laws interact), k
the degree of the closed form it generates, n the dimension of the column.
The interaction depends on k alone and the pseudostructure carrying the
closed form has dimension n + 1 - k.
"""
import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .errors import ConfigError
from .schema import SchemaValidator

logger = logging.getLogger(__name__)

TABLE_PATH = Path(__file__).resolve().parent.parent / "data" / "classification_table.json"


@dataclass(frozen=True)
class ClassificationEntry:
    p: int
    k: int
    n: int
    interaction: str
    particle_label: str
    material_particle: str
    sources: Tuple[str, ...] = ()
    uncertain: bool = False
    reading: str = ""

    @property
    def pseudostructure_dim(self) -> int:
        return self.n + 1 - self.k

    def to_dict(self) -> Dict:
        return {
            "p": self.p,
            "k": self.k,
            "n": self.n,
            "interaction": self.interaction,
            "particleLabel": self.particle_label,
            "pseudostructureDim": self.pseudostructure_dim,
            "materialParticle": self.material_particle,
            "sources": list(self.sources),
            "uncertain": self.uncertain,
            "reading": self.reading,
        }


@dataclass(frozen=True)
class OutOfTable:
    p: object
    k: object
    n: object
    reason: str

    def to_dict(self) -> Dict:
        return {"outOfTable": True, "p": self.p, "k": self.k, "n": self.n, "reason": self.reason}


Classification = Union[ClassificationEntry, OutOfTable]


class ClassificationTable:
    def __init__(self, document: Dict):
        self.version = document["version"]
        self.material_row_label = document["materialRowLabel"]
        self.interactions = {int(k): v for k, v in document["interactions"].items()}
        self.columns = {c["p"]: c for c in document["columns"]}
        entries = []
        seen = set()
        for cell in document["cells"]:
            p, k = cell["p"], cell["k"]
            if (p, k) in seen:
                raise ConfigError(f"classification table repeats cell p={p}, k={k}")
            if k > p or p not in self.columns:
                raise ConfigError(f"classification cell p={p}, k={k} lies outside the table")
            seen.add((p, k))
            column = self.columns[p]
            labels = [cell["particle"], column["materialParticle"]] + list(cell["sources"])
            entries.append(ClassificationEntry(
                p=p,
                k=k,
                n=column["n"],
                interaction=self.interactions[k],
                particle_label=cell["particle"],
                material_particle=column["materialParticle"],
                sources=tuple(cell["sources"]),
                uncertain=any("?" in label for label in labels),
                reading=cell.get("reading", ""),
            ))
        self.entries: List[ClassificationEntry] = sorted(entries, key=lambda e: (-e.k, e.p))
        self._index = {(e.p, e.k): e for e in self.entries}

    @classmethod
    def load(cls, path: Optional[str] = None) -> 'ClassificationTable':
        with open(path or TABLE_PATH, "r", encoding="utf-8") as f:
            document = json.load(f)
        validator = SchemaValidator()
        validator.require(document, validator.packaged_schema("classification_table"), "classification table")
        return cls(document)

    def classify(self, p: int, k: int, n: Optional[int] = None) -> Classification:
        values = (p, k) if n is None else (p, k, n)
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
            return OutOfTable(p, k, n, "p, k and n must be integers")
        if not 0 <= p <= 3 or not 0 <= k <= 3:
            return OutOfTable(p, k, n, "p and k range over 0..3")
        if k > p:
            return OutOfTable(p, k, n, "a degree-p form generates closed forms of degree k <= p only")
        entry = self._index.get((p, k))
        if entry is None:
            return OutOfTable(p, k, n, "cell is empty in the table")
        if n is not None and n != entry.n:
            return OutOfTable(p, k, n, f"column p={p} has dimension n={entry.n}")
        return entry

    def enumerate_cycle(self) -> List[ClassificationEntry]:
        return list(self.entries)


@lru_cache(maxsize=1)
def default_table() -> ClassificationTable:
    return ClassificationTable.load()


def classify(p: int, k: int, n: Optional[int] = None) -> Classification:
    return default_table().classify(p, k, n)


def enumerate_cycle() -> List[ClassificationEntry]:
    return default_table().enumerate_cycle()
