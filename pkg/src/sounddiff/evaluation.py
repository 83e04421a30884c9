"""Per-machine-ID ROC-AUC evaluation of anomaly scores.

AUC uses the Mann-Whitney formulation: the probability that a random
anomalous score exceeds a random normal score, ties counted half. It is
therefore invariant under any strictly increasing transform of the scores
and never depends on the decision threshold.
"""
from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Optional, Sequence

from .anomaly import ScoringConfig, anomaly_score
from .errors import InvalidInput
from .store import EmbeddingStore


def roc_auc(normal_scores: Sequence[float], anomalous_scores: Sequence[float]) -> float:
    """Pairwise win rate of anomalous over normal scores (0.5 per tie)."""
    normals = [float(s) for s in normal_scores]
    anomalies = [float(s) for s in anomalous_scores]
    if not normals or not anomalies:
        raise InvalidInput("roc_auc needs at least one score on each side")
    for s in normals + anomalies:
        if not math.isfinite(s):
            raise InvalidInput(f"roc_auc scores must be finite, got {s}")
    normals.sort()
    wins = 0.0
    for a in anomalies:
        lo = bisect_left(normals, a)
        hi = bisect_right(normals, a)
        wins += lo + 0.5 * (hi - lo)
    return wins / (len(anomalies) * len(normals))


@dataclass(frozen=True)
class RocResult:
    machine_type: str
    machine_id: str
    auc: float
    n_normal: int
    n_anomalous: int
    config_echo: dict


@dataclass(frozen=True)
class TypeAverage:
    """Unweighted mean AUC over the evaluated IDs of one machine type."""

    machine_type: str
    auc: float
    n_normal: int
    n_anomalous: int
    n_ids: int


@dataclass(frozen=True)
class SkippedMachine:
    machine_type: str
    machine_id: str
    reason: str


@dataclass(frozen=True)
class EvaluationReport:
    results: tuple[RocResult, ...]
    averages: tuple[TypeAverage, ...]
    skips: tuple[SkippedMachine, ...]
    config_echo: dict


def _machine_pairs(*stores: EmbeddingStore) -> list[tuple[str, str]]:
    pairs = set()
    for store in stores:
        for r in store.records:
            pairs.add((r.machine_type, r.machine_id))
    return sorted(pairs)


def evaluate_machine(
    train: EmbeddingStore,
    test: EmbeddingStore,
    config: ScoringConfig = ScoringConfig(),
    provider_note: Optional[str] = None,
) -> EvaluationReport:
    """AUC per (machine_type, machine_id) plus per-type unweighted averages.

    Each ID's test samples are scored only against that ID's normal training
    records. IDs lacking train or test coverage are reported as skipped,
    never silently dropped.
    """
    echo = config.echo()
    if provider_note:
        echo["provider"] = provider_note
    results: list[RocResult] = []
    skips: list[SkippedMachine] = []

    for machine_type, machine_id in _machine_pairs(train, test):
        refs = train.filter(
            machine_type=machine_type, machine_id=machine_id,
            split="train", label="normal",
        )
        probe = test.filter(
            machine_type=machine_type, machine_id=machine_id, split="test"
        )
        if len(refs) < config.k:
            skips.append(SkippedMachine(
                machine_type, machine_id,
                f"insufficient training records: have {len(refs)}, need k={config.k}",
            ))
            continue
        if len(probe) == 0:
            skips.append(SkippedMachine(machine_type, machine_id, "no test records"))
            continue
        normal_scores = []
        anomalous_scores = []
        for rec in probe.records:
            score = anomaly_score(rec.embedding, refs, config, sample_id=rec.sample_id).score
            if rec.label == "normal":
                normal_scores.append(score)
            elif rec.label == "anomalous":
                anomalous_scores.append(score)
        if not normal_scores:
            skips.append(SkippedMachine(machine_type, machine_id, "test split has no normal records"))
            continue
        if not anomalous_scores:
            skips.append(SkippedMachine(machine_type, machine_id, "test split has no anomalous records"))
            continue
        results.append(RocResult(
            machine_type=machine_type,
            machine_id=machine_id,
            auc=roc_auc(normal_scores, anomalous_scores),
            n_normal=len(normal_scores),
            n_anomalous=len(anomalous_scores),
            config_echo=dict(echo),
        ))

    averages = []
    for machine_type in sorted({r.machine_type for r in results}):
        of_type = [r for r in results if r.machine_type == machine_type]
        averages.append(TypeAverage(
            machine_type=machine_type,
            auc=sum(r.auc for r in of_type) / len(of_type),
            n_normal=sum(r.n_normal for r in of_type),
            n_anomalous=sum(r.n_anomalous for r in of_type),
            n_ids=len(of_type),
        ))
    return EvaluationReport(
        results=tuple(results),
        averages=tuple(averages),
        skips=tuple(skips),
        config_echo=echo,
    )


REPORT_HEADER = "machine_type,machine_id,auc_percent,n_normal,n_anomalous"


def format_report_csv(report: EvaluationReport) -> str:
    """Table-style CSV: per-ID rows grouped by type, Average row per type.

    Config echo and skip reasons ride along as '#' comment lines so the
    numbers stay auditable without breaking the column layout.
    """
    echo = " ".join(f"{k}={v}" for k, v in report.config_echo.items())
    lines = [f"# config: {echo}", REPORT_HEADER]
    for machine_type in sorted({r.machine_type for r in report.results}):
        for r in report.results:
            if r.machine_type != machine_type:
                continue
            lines.append(
                f"{r.machine_type},{r.machine_id},{r.auc * 100:.2f},"
                f"{r.n_normal},{r.n_anomalous}"
            )
        for avg in report.averages:
            if avg.machine_type == machine_type:
                lines.append(
                    f"{avg.machine_type},Average,{avg.auc * 100:.2f},"
                    f"{avg.n_normal},{avg.n_anomalous}"
                )
    for skip in report.skips:
        lines.append(
            f"# skipped: machine_type={skip.machine_type} "
            f"machine_id={skip.machine_id} reason={skip.reason}"
        )
    return "\n".join(lines) + "\n"
