"""
Run Audit Logging for LongiForest

Provides an in-memory audit trail for ingestion, forest growth, evaluation
and importance runs. Engines append records; the CLI exports the trail as
JSON next to its outputs.
"""

import json
from datetime import datetime, timezone
from typing import Dict, Any, List, Optional
from enum import Enum
from pydantic import BaseModel


class AuditAction(str, Enum):
    """Audit action types"""
    DATASET_INGESTED = "dataset_ingested"
    DATASET_VALIDATED = "dataset_validated"
    VALIDATION_FAILED = "validation_failed"
    TREE_GROWN = "tree_grown"
    FOREST_GROWN = "forest_grown"
    CANDIDATE_SKIPPED = "candidate_skipped"
    DEGENERATE_WEIGHTS = "degenerate_weights"
    NEVER_OOB = "never_oob"
    OOB_ERROR_COMPUTED = "oob_error_computed"
    PREDICTION_COMPUTED = "prediction_computed"
    IMPORTANCE_COMPUTED = "importance_computed"
    DEPTH_ADVICE = "depth_advice"
    MTRY_TUNED = "mtry_tuned"
    SIMULATION_GENERATED = "simulation_generated"
    ARCHIVE_WRITTEN = "archive_written"
    ARCHIVE_LOADED = "archive_loaded"
    PROCESSING_FAILED = "processing_failed"


class AuditSeverity(str, Enum):
    """Audit severity levels"""
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


class AuditRecord(BaseModel):
    """Immutable audit record"""
    audit_id: str
    timestamp: datetime
    action: AuditAction
    severity: AuditSeverity
    tree_index: Optional[int] = None
    node_id: Optional[int] = None
    predictor: Optional[str] = None
    archive_hash: Optional[str] = None
    message: str
    details: Optional[Dict[str, Any]] = None
    processing_time_ms: Optional[int] = None
    error_code: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for storage"""
        return {
            **self.model_dump(),
            "timestamp": self.timestamp.isoformat(),
            "action": self.action.value,
            "severity": self.severity.value
        }


class AuditLogger:
    """Append-only audit logger for forest runs"""

    def __init__(self):
        self._audit_trail: List[AuditRecord] = []
        self._counter = 0

    def generate_audit_id(self, prefix: str = "audit") -> str:
        """Generate unique audit ID"""
        timestamp = datetime.now(timezone.utc).strftime("%Y%m%d%H%M%S")
        self._counter += 1
        return f"{prefix}_{timestamp}_{self._counter:06d}"

    def _append(self, prefix: str, action: AuditAction, severity: AuditSeverity,
                message: str, **fields: Any) -> AuditRecord:
        record = AuditRecord(
            audit_id=self.generate_audit_id(prefix),
            timestamp=datetime.now(timezone.utc),
            action=action,
            severity=severity,
            message=message,
            **fields
        )
        self._audit_trail.append(record)
        return record

    def log_dataset_ingested(self, table: str, n_subjects: int, n_rows: int, n_dropped: int = 0) -> AuditRecord:
        """Log a table ingestion"""
        severity = AuditSeverity.WARNING if n_dropped else AuditSeverity.INFO
        return self._append(
            "ing", AuditAction.DATASET_INGESTED, severity,
            f"{table} table ingested: {n_rows} rows, {n_subjects} subjects, {n_dropped} rows dropped",
            details={"table": table, "n_subjects": n_subjects, "n_rows": n_rows, "n_dropped": n_dropped}
        )

    def log_dataset_validated(self, validation_result: bool, errors: Optional[List[str]] = None,
                              warnings: Optional[List[str]] = None,
                              details: Optional[Dict[str, Any]] = None) -> AuditRecord:
        """Log dataset validation result"""
        severity = AuditSeverity.INFO if validation_result else AuditSeverity.ERROR
        action = AuditAction.DATASET_VALIDATED if validation_result else AuditAction.VALIDATION_FAILED
        payload = dict(details or {})
        if errors:
            payload["validation_errors"] = errors
        if warnings:
            payload["validation_warnings"] = warnings
        return self._append(
            "val", action, severity,
            f"Dataset validation {'passed' if validation_result else 'failed'}",
            details=payload or None
        )

    def log_tree_grown(self, tree_index: int, n_leaves: int, depth: int,
                       skipped_candidates: int, processing_time_ms: int) -> AuditRecord:
        """Log growth of a single tree"""
        return self._append(
            "tree", AuditAction.TREE_GROWN, AuditSeverity.INFO,
            f"Tree {tree_index} grown with {n_leaves} leaves",
            tree_index=tree_index,
            details={"n_leaves": n_leaves, "depth": depth, "skipped_candidates": skipped_candidates},
            processing_time_ms=processing_time_ms
        )

    def log_forest_grown(self, ntree: int, mtry: int, n_jobs: int, processing_time_ms: int) -> AuditRecord:
        """Log growth of a forest"""
        return self._append(
            "forest", AuditAction.FOREST_GROWN, AuditSeverity.INFO,
            f"Forest of {ntree} trees grown",
            details={"ntree": ntree, "mtry": mtry, "n_jobs": n_jobs},
            processing_time_ms=processing_time_ms
        )

    def log_candidate_skipped(self, tree_index: int, node_id: int, predictor: str, reason: str) -> AuditRecord:
        """Log a longitudinal candidate dropped at a node"""
        return self._append(
            "skip", AuditAction.CANDIDATE_SKIPPED, AuditSeverity.WARNING,
            f"Candidate {predictor} skipped at node {node_id}: {reason}",
            tree_index=tree_index, node_id=node_id, predictor=predictor,
            error_code=reason
        )

    def log_degenerate_weights(self, count: int, context: str) -> AuditRecord:
        """Log IPCW weights set to zero"""
        return self._append(
            "ipcw", AuditAction.DEGENERATE_WEIGHTS, AuditSeverity.WARNING,
            f"{count} censoring weights were degenerate during {context}",
            details={"count": count, "context": context}
        )

    def log_never_oob(self, count: int) -> AuditRecord:
        """Log subjects excluded from OOB evaluation"""
        return self._append(
            "oob", AuditAction.NEVER_OOB, AuditSeverity.WARNING,
            f"{count} subjects were never out-of-bag and are excluded",
            details={"count": count}
        )

    def log_oob_error(self, outcome_type: str, error: float, n_subjects: int,
                      processing_time_ms: int, archive_hash: Optional[str] = None) -> AuditRecord:
        """Log an OOB error computation"""
        return self._append(
            "oob", AuditAction.OOB_ERROR_COMPUTED, AuditSeverity.INFO,
            f"OOB error {error:.6f} over {n_subjects} subjects",
            archive_hash=archive_hash,
            details={"outcome_type": outcome_type, "error": error, "n_subjects": n_subjects},
            processing_time_ms=processing_time_ms
        )

    def log_prediction(self, n_subjects: int, landmark: Optional[float], processing_time_ms: int) -> AuditRecord:
        """Log new-subject prediction"""
        return self._append(
            "pred", AuditAction.PREDICTION_COMPUTED, AuditSeverity.INFO,
            f"Predictions computed for {n_subjects} subjects",
            details={"n_subjects": n_subjects, "landmark": landmark},
            processing_time_ms=processing_time_ms
        )

    def log_importance(self, kind: str, n_items: int, seed: int, processing_time_ms: int) -> AuditRecord:
        """Log an importance computation"""
        return self._append(
            "imp", AuditAction.IMPORTANCE_COMPUTED, AuditSeverity.INFO,
            f"{kind} computed for {n_items} items",
            details={"kind": kind, "n_items": n_items, "seed": seed},
            processing_time_ms=processing_time_ms
        )

    def log_depth_advice(self, mtry: int, n_predictors: int) -> AuditRecord:
        """Log the minimal depth mtry advice"""
        return self._append(
            "depth", AuditAction.DEPTH_ADVICE, AuditSeverity.WARNING,
            f"Minimal depth computed with mtry={mtry} < {n_predictors} predictors",
            details={"mtry": mtry, "n_predictors": n_predictors}
        )

    def log_mtry_tuned(self, grid: List[int], best_mtry: int, processing_time_ms: int) -> AuditRecord:
        """Log an mtry tuning run"""
        return self._append(
            "tune", AuditAction.MTRY_TUNED, AuditSeverity.INFO,
            f"mtry tuned over {len(grid)} values, best {best_mtry}",
            details={"grid": grid, "best_mtry": best_mtry},
            processing_time_ms=processing_time_ms
        )

    def log_simulation(self, n_subjects: int, n_markers: int, seed: int) -> AuditRecord:
        """Log synthetic data generation"""
        return self._append(
            "sim", AuditAction.SIMULATION_GENERATED, AuditSeverity.INFO,
            f"Simulated {n_subjects} subjects with {n_markers} markers",
            details={"n_subjects": n_subjects, "n_markers": n_markers, "seed": seed}
        )

    def log_archive(self, path: str, archive_hash: str, written: bool) -> AuditRecord:
        """Log archive persistence"""
        action = AuditAction.ARCHIVE_WRITTEN if written else AuditAction.ARCHIVE_LOADED
        return self._append(
            "arch", action, AuditSeverity.INFO,
            f"Archive {'written to' if written else 'loaded from'} {path}",
            archive_hash=archive_hash,
            details={"path": path}
        )

    def log_processing_error(self, error: Exception, processing_time_ms: int = 0) -> AuditRecord:
        """Log processing error"""
        return self._append(
            "err", AuditAction.PROCESSING_FAILED, AuditSeverity.ERROR,
            f"Processing failed: {str(error)}",
            details={"error_type": type(error).__name__},
            error_code=type(error).__name__,
            processing_time_ms=processing_time_ms
        )

    def get_audit_trail(self,
                        action: Optional[AuditAction] = None,
                        severity: Optional[AuditSeverity] = None,
                        tree_index: Optional[int] = None,
                        limit: Optional[int] = None) -> List[AuditRecord]:
        """Get filtered audit trail"""
        filtered_trail = self._audit_trail

        if action:
            filtered_trail = [r for r in filtered_trail if r.action == action]
        if severity:
            filtered_trail = [r for r in filtered_trail if r.severity == severity]
        if tree_index is not None:
            filtered_trail = [r for r in filtered_trail if r.tree_index == tree_index]

        if limit:
            filtered_trail = filtered_trail[-limit:]

        return filtered_trail

    def export_audit_trail(self, format: str = "json") -> str:
        """Export audit trail in specified format"""
        if format.lower() == "json":
            return json.dumps([record.to_dict() for record in self._audit_trail], indent=2)
        else:
            raise ValueError(f"Unsupported export format: {format}")

    def get_audit_statistics(self) -> Dict[str, Any]:
        """Get audit trail statistics"""
        total_records = len(self._audit_trail)
        if total_records == 0:
            return {"total_records": 0}

        error_count = len([r for r in self._audit_trail if r.severity == AuditSeverity.ERROR])
        warning_count = len([r for r in self._audit_trail if r.severity == AuditSeverity.WARNING])

        action_counts: Dict[str, int] = {}
        for record in self._audit_trail:
            action_counts[record.action.value] = action_counts.get(record.action.value, 0) + 1

        return {
            "total_records": total_records,
            "error_count": error_count,
            "warning_count": warning_count,
            "action_counts": action_counts,
            "trees_grown": action_counts.get(AuditAction.TREE_GROWN.value, 0),
            "total_processing_time_ms": sum(r.processing_time_ms or 0 for r in self._audit_trail)
        }
