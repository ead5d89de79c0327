"""
In-memory provenance registry for forest artifacts.
"""

from __future__ import annotations

import json
import uuid
from typing import Dict, List, Optional, Iterable

from .. import __version__
from ..models.versioning import VersionRecord, VersionedArtifactType


class VersionRegistry:
    """Registry of produced artifacts, indexed by archive hash and type"""

    def __init__(self):
        self._records: Dict[str, VersionRecord] = {}
        self._archive_index: Dict[str, List[str]] = {}
        self._type_index: Dict[VersionedArtifactType, List[str]] = {}

    def register(
        self,
        artifact_id: str,
        artifact_type: VersionedArtifactType,
        archive_hash: Optional[str] = None,
        metadata: Optional[dict] = None,
        notes: Optional[str] = None,
    ) -> VersionRecord:
        record_id = f"ver_{uuid.uuid4().hex[:10]}"
        record = VersionRecord(
            record_id=record_id,
            artifact_id=artifact_id,
            artifact_type=artifact_type,
            archive_hash=archive_hash,
            model_version=__version__,
            metadata=metadata or {},
            notes=notes,
        )
        self._records[record_id] = record
        if archive_hash is not None:
            self._archive_index.setdefault(archive_hash, []).append(record_id)
        self._type_index.setdefault(artifact_type, []).append(record_id)
        return record

    def get(self, record_id: str) -> Optional[VersionRecord]:
        return self._records.get(record_id)

    def list_by_archive(self, archive_hash: str) -> List[VersionRecord]:
        return [self._records[rid] for rid in self._archive_index.get(archive_hash, [])]

    def list_by_type(self, artifact_type: VersionedArtifactType) -> List[VersionRecord]:
        return [self._records[rid] for rid in self._type_index.get(artifact_type, [])]

    def all_records(self) -> Iterable[VersionRecord]:
        return self._records.values()

    def export(self) -> str:
        """JSON list of all records in registration order"""
        return json.dumps([record.model_dump(mode="json") for record in self._records.values()], indent=2)
