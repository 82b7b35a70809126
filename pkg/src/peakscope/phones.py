"""Surface-label reduction to a 39-phone set plus manner classes.

The shipped table folds the usual 61 surface labels down to 39, with stop
closures going to their associated stop and the pause-like labels to
silence. A mapping is three columns of TSV: surface, reduced, manner.
"""

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

MANNERS = (
    "vowel", "semivowel", "stop", "nasal", "fricative", "affricate",
    "flap", "silence",
)

_DEFAULT_RESOURCE = "phone_map_39.tsv"


@dataclass(frozen=True)
class PhoneMapping:
    to_reduced: dict = field(default_factory=dict)
    to_manner: dict = field(default_factory=dict)  # keyed by reduced label
    identity: bool = False

    def reduce(self, label):
        if self.identity:
            return label
        try:
            return self.to_reduced[label]
        except KeyError:
            raise ValueError(f"unknown phone label: {label!r}") from None

    def manner(self, label):
        """Manner class for a surface or already-reduced label."""
        if self.identity:
            return label
        reduced = self.to_reduced.get(label, label)
        try:
            return self.to_manner[reduced]
        except KeyError:
            raise ValueError(f"unknown phone label: {label!r}") from None

    def reduced_labels(self):
        return tuple(sorted(set(self.to_reduced.values())))

    def manner_labels(self):
        return tuple(sorted(set(self.to_manner.values())))


def parse_mapping(text):
    to_reduced = {}
    to_manner = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"line {lineno}: expected 3 tab-separated fields")
        surface, reduced, manner = fields
        if surface in to_reduced:
            raise ValueError(f"line {lineno}: duplicate surface label {surface!r}")
        if reduced in to_manner and to_manner[reduced] != manner:
            raise ValueError(
                f"line {lineno}: reduced label {reduced!r} has conflicting manners"
            )
        to_reduced[surface] = reduced
        to_manner[reduced] = manner
    if not to_reduced:
        raise ValueError("empty phone mapping")
    return PhoneMapping(to_reduced=to_reduced, to_manner=to_manner)


def from_file(path):
    path = Path(path)
    try:
        return parse_mapping(path.read_text())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def load_default():
    text = resources.files("peakscope.data").joinpath(_DEFAULT_RESOURCE).read_text()
    return parse_mapping(text)


def identity_mapping():
    """Pass-through mapping for corpora whose tiers carry arbitrary labels."""
    return PhoneMapping(identity=True)
