"""JSONL comment corpus ingestion."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Iterator

from .extract import Comment

log = logging.getLogger(__name__)

REQUIRED = ("user", "body", "subreddit", "created_utc", "parent_kind", "submission_id")
PARENT_KINDS = ("submission", "comment")


class RecordError(ValueError):
    pass


@dataclass
class IngestReport:
    lines: int = 0
    records: int = 0
    skipped: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def comment_id(rec: dict) -> str:
    """The record's ``id`` or, when absent, a stable hash of its content."""
    if rec.get("id"):
        return str(rec["id"])
    key = "\x1f".join(str(rec[k]) for k in REQUIRED)
    return "h" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


def parse_record(rec: dict) -> Comment:
    if not isinstance(rec, dict):
        raise RecordError("record is not an object")
    missing = [k for k in REQUIRED if rec.get(k) in (None, "") and k != "body"]
    if "body" not in rec or rec["body"] is None:
        missing.append("body")
    if missing:
        raise RecordError(f"missing field(s): {', '.join(sorted(missing))}")
    ts = rec["created_utc"]
    if isinstance(ts, bool):
        raise RecordError("created_utc is not an integer")
    try:
        ts_int = int(ts) if isinstance(ts, int) or (isinstance(ts, str) and ts.strip().isdigit()) else None
        if ts_int is None and isinstance(ts, float) and ts.is_integer():
            ts_int = int(ts)
    except ValueError:
        ts_int = None
    if ts_int is None or ts_int <= 0:
        raise RecordError(f"created_utc {ts!r} is not positive integer seconds")
    kind = rec["parent_kind"]
    if kind not in PARENT_KINDS:
        raise RecordError(f"parent_kind {kind!r} not in {PARENT_KINDS}")
    return Comment(user=str(rec["user"]), body=str(rec["body"]), subreddit=str(rec["subreddit"]),
                   created_utc=ts_int, is_reply=kind == "comment",
                   submission_id=str(rec["submission_id"]), id=comment_id(rec))


def ingest(path: str, report: IngestReport | None = None, sidecar: str | None = None) -> Iterator[Comment]:
    """Stream validated comments; malformed lines are skipped and counted.

    With ``sidecar`` set, one ``<line>\\t<reason>`` row per skipped line is
    written there.
    """
    report = report if report is not None else IngestReport()
    side = open(sidecar, "w", encoding="utf-8") if sidecar else None
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                report.lines += 1
                if not line.strip():
                    report.skipped += 1
                    continue
                try:
                    c = parse_record(json.loads(line))
                except (json.JSONDecodeError, RecordError, ValueError) as e:
                    report.skipped += 1
                    report.errors.append((lineno, str(e)))
                    log.debug("%s:%d skipped: %s", path, lineno, e)
                    if side:
                        side.write(f"{lineno}\t{e}\n")
                    continue
                report.records += 1
                yield c
    finally:
        if side:
            side.close()
    if report.skipped:
        log.warning("%s: skipped %d malformed line(s)", path, report.skipped)


def load_comments(path: str, report: IngestReport | None = None, sidecar: str | None = None) -> list[Comment]:
    return list(ingest(path, report, sidecar))


def comment_record(c: Comment) -> dict:
    return {"id": c.id, "user": c.user, "body": c.body, "subreddit": c.subreddit,
            "created_utc": c.created_utc, "parent_kind": "comment" if c.is_reply else "submission",
            "submission_id": c.submission_id}


def group_by_user(comments) -> dict[str, list[Comment]]:
    out: dict[str, list[Comment]] = {}
    for c in comments:
        out.setdefault(c.user, []).append(c)
    return out
