"""
Model archive persistence.

The archive is the JSON dump of a ForestArchive. It carries no timestamps,
so identical forests produce byte-identical files, and its SHA-256 is the
provenance key of every downstream report.
"""

import hashlib
import json
from pathlib import Path
from typing import Optional, Tuple, Union

from pydantic import ValidationError

from ..models.forest import ARCHIVE_FORMAT, ARCHIVE_VERSION, ForestArchive
from ..models.tables import ValidatedDataset
from ..utils.audit import AuditLogger
from ..utils.errors import DataMismatch, InvalidConfig


def archive_bytes(forest: ForestArchive) -> bytes:
    return forest.model_dump_json().encode("utf-8")


def content_digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def save_archive(forest: ForestArchive, path: Union[str, Path],
                 audit_logger: Optional[AuditLogger] = None) -> str:
    """Write the archive and return its hash"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = archive_bytes(forest)
    path.write_bytes(payload)
    digest = content_digest(payload)
    if audit_logger is not None:
        audit_logger.log_archive(str(path), digest, written=True)
    return digest


def load_archive(path: Union[str, Path],
                 audit_logger: Optional[AuditLogger] = None) -> Tuple[ForestArchive, str]:
    """Read an archive, checking its header, and return it with its hash"""
    path = Path(path)
    if not path.exists():
        raise InvalidConfig(f"model archive {path} does not exist")
    payload = path.read_bytes()
    try:
        header = json.loads(payload)
    except json.JSONDecodeError as e:
        raise InvalidConfig(f"model archive {path} is not valid JSON") from e
    if header.get("format") != ARCHIVE_FORMAT:
        raise InvalidConfig(f"{path} is not a {ARCHIVE_FORMAT} file")
    if header.get("version", 0) > ARCHIVE_VERSION:
        raise InvalidConfig(f"archive version {header.get('version')} is newer than {ARCHIVE_VERSION}")
    try:
        forest = ForestArchive.model_validate(header)
    except ValidationError as e:
        raise InvalidConfig(f"model archive {path} is malformed: {e}") from e
    digest = content_digest(payload)
    if audit_logger is not None:
        audit_logger.log_archive(str(path), digest, written=False)
    return forest, digest


def check_training_data(forest: ForestArchive, dataset: ValidatedDataset) -> None:
    """Raise DataMismatch unless the dataset is the one the forest was grown on"""
    if dataset.content_hash() != forest.data_hash:
        raise DataMismatch("training data differs from the data the model was grown on")
