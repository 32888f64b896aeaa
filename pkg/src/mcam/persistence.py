"""Dataset ingestion, signature/result files and key=value configuration.

Dataset layout::

    root/<camera_id>/<person_id>/<track_id>/<frame>.{png,jpg}
    root/<camera_id>/<person_id>/<frame>.{png,jpg}      # single track "0"

Signature files are JSON Lines: a header object followed by one record per
signature, so a damaged record can be reported by its index.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .exceptions import (
    ConfigMismatch,
    CorruptRecord,
    DecodeError,
    EmptyDataset,
    McamError,
    MissingRoot,
    VersionMismatch,
)
from .features import FeatureChannel
from .imaging import PersonTrack
from .mixture import AppearanceMixture, McamSignature

log = logging.getLogger(__name__)

SIGNATURE_FORMAT = "mcam-signatures"
RESULTS_FORMAT = "mcam-results"
FORMAT_VERSION = 1
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
DATASET_ROOT_ENV = "MCAM_DATASET_ROOT"


def natural_key(name):
    """Sort key that orders embedded integers numerically (frame_2 < frame_10)."""
    return [int(tok) if tok.isdigit() else tok.lower() for tok in re.split(r"(\d+)", str(name))]


@dataclass
class TrackEntry:
    camera_id: str
    person_id: str
    track_id: str
    frames: list

    @property
    def key(self):
        return f"{self.camera_id}/{self.person_id}/{self.track_id}"

    @property
    def n_frames(self):
        return len(self.frames)


@dataclass
class DatasetIndex:
    root: Path
    entries: list
    warnings: list = field(default_factory=list)

    def summary(self):
        cams = sorted({e.camera_id for e in self.entries}, key=natural_key)
        persons = {e.person_id for e in self.entries}
        frames = sum(e.n_frames for e in self.entries)
        return {
            "root": str(self.root),
            "cameras": cams,
            "persons": len(persons),
            "tracks": len(self.entries),
            "frames": frames,
            "warnings": len(self.warnings),
        }


def resolve_dataset_root(root=None):
    """Environment override wins over the given path."""
    env = os.environ.get(DATASET_ROOT_ENV)
    return Path(env) if env else Path(root) if root is not None else None


def _is_image(p):
    return p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES


def _decodes(path):
    try:
        with Image.open(path) as im:
            im.verify()
        with Image.open(path) as im:
            im.load()
        return True
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError):
        return False


def _sorted_dirs(path):
    return sorted((p for p in path.iterdir() if p.is_dir()), key=lambda p: natural_key(p.name))


def ingest_dataset(root):
    """Index every track under ``root``; undecodable frames are skipped."""
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"dataset root {str(root)!r} does not exist")
    entries, warnings = [], []

    def add(cam, person, track, files):
        good = []
        for f in sorted(files, key=lambda p: natural_key(p.name)):
            if _decodes(f):
                good.append(f)
            else:
                warnings.append(f"undecodable frame skipped: {f}")
        if good:
            entries.append(TrackEntry(cam, person, track, good))
        else:
            warnings.append(f"track without decodable frames skipped: {cam}/{person}/{track}")

    for cam_dir in _sorted_dirs(root):
        for person_dir in _sorted_dirs(cam_dir):
            direct = [p for p in person_dir.iterdir() if _is_image(p)]
            if direct:
                add(cam_dir.name, person_dir.name, "0", direct)
            for track_dir in _sorted_dirs(person_dir):
                add(cam_dir.name, person_dir.name, track_dir.name,
                    [p for p in track_dir.iterdir() if _is_image(p)])
    for w in warnings:
        log.warning(w)
    if not entries:
        raise EmptyDataset(f"no tracks found under {str(root)!r}")
    return DatasetIndex(root, entries, warnings)


def load_frame(path):
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise DecodeError(f"cannot decode {path}: {e}") from None


def load_track(entry):
    return PersonTrack(
        track_id=entry.key,
        camera_id=entry.camera_id,
        person_id=entry.person_id,
        frames=[load_frame(f) for f in entry.frames],
    )


def write_dataset(tracks, root):
    """Write tracks as PNG frames in the dataset layout."""
    root = Path(root)
    for t in tracks:
        parts = str(t.track_id).split("/")
        track_name = parts[-1] if len(parts) == 3 else str(t.track_id).replace("/", "_")
        d = root / str(t.camera_id) / str(t.person_id) / track_name
        d.mkdir(parents=True, exist_ok=True)
        for n, frame in enumerate(t.frames):
            Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(d / f"frame_{n}.png")
    return root


# -- signatures --------------------------------------------------------------


def _mixture_record(m):
    return {
        "priors": m.priors.tolist(),
        "means": m.means.tolist(),
        "variances": m.variances.tolist(),
    }


def signature_record(sig):
    return {
        "track_id": sig.track_id,
        "camera_id": sig.camera_id,
        "person_id": sig.person_id,
        "n_frames": sig.n_frames,
        "mixtures": {c.value: _mixture_record(m) for c, m in sig.mixtures.items()},
    }


def signature_from_record(rec):
    mixtures = {}
    for name, m in rec["mixtures"].items():
        c = FeatureChannel.parse(name)
        mixtures[c] = AppearanceMixture(
            c,
            np.asarray(m["priors"], dtype=np.float64),
            np.asarray(m["means"], dtype=np.float64),
            np.asarray(m["variances"], dtype=np.float64),
        ).validate()
    if not mixtures:
        raise McamError("signature has no mixtures")
    n = rec["n_frames"]
    if not isinstance(n, int) or n < 1:
        raise McamError(f"invalid n_frames {n!r}")
    return McamSignature(
        track_id=str(rec["track_id"]),
        camera_id=str(rec["camera_id"]),
        n_frames=n,
        mixtures=mixtures,
        person_id=None if rec.get("person_id") is None else str(rec["person_id"]),
    )


def save_signatures(path, signatures, config_hash=None):
    """Write signatures as JSON Lines; floats use shortest round-trip repr."""
    sigs = list(signatures)
    header = {
        "format": SIGNATURE_FORMAT,
        "version": FORMAT_VERSION,
        "config_hash": config_hash,
        "count": len(sigs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for s in sigs:
            fh.write(json.dumps(signature_record(s), sort_keys=True, allow_nan=False) + "\n")


def _parse_line(line, index):
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise CorruptRecord(f"record {index}: {e}", index) from None


def load_signatures(path, expected_hash=None):
    """Read a signature file, validating the header and every record.

    Returns ``(signatures, header)``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().split("\n") if ln.strip()]
    except UnicodeDecodeError as e:
        raise CorruptRecord(f"not UTF-8 text: {e}", None) from None
    if not lines:
        raise CorruptRecord("empty signature file", None)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise CorruptRecord("unreadable header", None) from None
    if not isinstance(header, dict) or header.get("format") != SIGNATURE_FORMAT:
        raise CorruptRecord("not a signature file", None)
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"file version {header.get('version')!r}, expected {FORMAT_VERSION}")
    if expected_hash is not None and header.get("config_hash") != expected_hash:
        raise ConfigMismatch(
            f"signatures built with config {header.get('config_hash')!r}, expected {expected_hash!r}"
        )
    sigs = []
    for i, line in enumerate(lines[1:]):
        rec = _parse_line(line, i)
        try:
            sigs.append(signature_from_record(rec))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise CorruptRecord(f"record {i}: {e}", i) from None
    count = header.get("count")
    if count is not None and count != len(sigs):
        raise CorruptRecord(f"expected {count} records, found {len(sigs)}", len(sigs))
    return sigs, header


# -- results -----------------------------------------------------------------


def _finite_list(a):
    return [None if not math.isfinite(v) else v for v in np.asarray(a, dtype=float).ravel()]


def save_results(path, payload):
    """Write a results document (similarity matrix, rankings, curves) as JSON."""
    doc = {"format": RESULTS_FORMAT, "version": FORMAT_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_results(path):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise CorruptRecord(f"unreadable results file: {e}", None) from None
    if not isinstance(doc, dict) or doc.get("format") != RESULTS_FORMAT:
        raise CorruptRecord("not a results file", None)
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"file version {doc.get('version')!r}, expected {FORMAT_VERSION}")
    return doc


# -- configuration -----------------------------------------------------------


def load_config(path):
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise McamError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise McamError(f"{path}:{lineno}: empty key")
            out[key] = value
    return out
