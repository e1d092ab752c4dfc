"""
运行日志 - 记录实验与命令各阶段的事件
"""

from collections import Counter
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from core.io.artifacts import write_json


class StageEvent(Enum):
    """事件类型"""
    STAGE_STARTED = "stage_started"
    STAGE_COMPLETED = "stage_completed"
    STAGE_FAILED = "stage_failed"
    POINTS_SKIPPED = "points_skipped"
    BUDGET_EXHAUSTED = "budget_exhausted"
    ARTIFACT_WRITTEN = "artifact_written"
    WARNING = "warning"


@dataclass
class JournalEntry:
    """一条运行记录"""
    entry_id: str
    run: str
    stage: str
    event: StageEvent
    timestamp: datetime
    description: str
    details: Dict[str, Any] = field(default_factory=dict)
    radius: Optional[int] = None
    status: str = "success"  # success, failed, skipped

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["event"] = self.event.value
        data["timestamp"] = self.timestamp.isoformat()
        return data


class RunJournal:
    """有界的内存运行日志"""

    def __init__(self, run: str = "run", max_entries: int = 1000):
        self.run = run
        self.entries: List[JournalEntry] = []
        self.max_entries = max_entries
        self._counter = 0

    def record(
        self,
        stage: str,
        event: StageEvent,
        description: str,
        details: Optional[Dict[str, Any]] = None,
        radius: Optional[int] = None,
        status: str = "success",
    ) -> str:
        """
        记录一个事件

        Args:
            stage: 阶段名 (bfs, discrepancy, fit, ...)
            event: 事件类型
            description: 描述
            details: 详细信息
            radius: 相关半径
            status: 状态

        Returns:
            记录ID
        """
        self._counter += 1
        entry_id = f"{self.run}_{self._counter}"
        self.entries.append(
            JournalEntry(
                entry_id=entry_id,
                run=self.run,
                stage=stage,
                event=event,
                timestamp=datetime.now(timezone.utc),
                description=description,
                details=details or {},
                radius=radius,
                status=status,
            )
        )

        # 限制记录数量
        if len(self.entries) > self.max_entries:
            self.entries = self.entries[-self.max_entries:]

        return entry_id

    def get_entries(
        self,
        stage: Optional[str] = None,
        event: Optional[StageEvent] = None,
        radius: Optional[int] = None,
        limit: int = 100,
    ) -> List[JournalEntry]:
        """按条件筛选, 保持记录顺序"""
        filtered = self.entries
        if stage:
            filtered = [e for e in filtered if e.stage == stage]
        if event:
            filtered = [e for e in filtered if e.event == event]
        if radius is not None:
            filtered = [e for e in filtered if e.radius == radius]
        return filtered[:limit]

    def failures(self) -> List[JournalEntry]:
        return [e for e in self.entries if e.event == StageEvent.STAGE_FAILED or e.status == "failed"]

    def stats(self) -> Dict[str, Any]:
        by_stage = Counter(e.stage for e in self.entries)
        by_event = Counter(e.event.value for e in self.entries)
        by_status = Counter(e.status for e in self.entries)
        return {
            "total_entries": len(self.entries),
            "by_stage": dict(by_stage),
            "by_event": dict(by_event),
            "by_status": dict(by_status),
            "failures": len(self.failures()),
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run": self.run,
            "stats": self.stats(),
            "entries": [e.to_dict() for e in self.entries],
        }

    def export(self, path: Union[str, Path], header: Optional[Dict[str, Any]] = None) -> Path:
        """导出为 JSON"""
        data = self.to_dict()
        if header is not None:
            data["header"] = header
        return write_json(path, data)
