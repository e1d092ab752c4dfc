"""
结果文件 - JSON/CSV 写出与可复现性头部
"""

import dataclasses
import hashlib
import json
import platform
from datetime import date, datetime, timezone
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd
import scipy

from app import __version__
from app.constants import CSV_COMMENT_PREFIX


class ArtifactJSONEncoder(json.JSONEncoder):
    """自定义JSON编码器，处理 numpy、分数、枚举、数据类和日期"""

    def default(self, obj: Any) -> Any:
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, Fraction):
            return obj.numerator if obj.denominator == 1 else float(obj)
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, (datetime, date)):
            return obj.isoformat()
        if isinstance(obj, Path):
            return str(obj)
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return dataclasses.asdict(obj)
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return super().default(obj)


def dumps(data: Any) -> str:
    """规范 JSON: 键排序、两格缩进"""
    return json.dumps(data, cls=ArtifactJSONEncoder, indent=2, ensure_ascii=False, sort_keys=True)


def config_digest(config: Any) -> str:
    """配置摘要 (sha256 of canonical JSON)"""
    canonical = json.dumps(config, cls=ArtifactJSONEncoder, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def reproducibility_header(
    command: str,
    seed: int,
    config: Any,
    timestamp: Optional[datetime] = None,
) -> Dict[str, Any]:
    """
    可复现性头部

    Args:
        command: 子命令名
        seed: 随机种子
        config: 解析后的运行配置 (可 JSON 化)
        timestamp: 时间戳, 缺省为当前 UTC 时间

    Returns:
        头部字典; 只有 timestamp 依赖运行时刻
    """
    return {
        "tool": "nilpotent-cone-lab",
        "version": __version__,
        "command": command,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": seed,
        "config_digest": config_digest(config),
        "timestamp": (timestamp or datetime.now(timezone.utc)).isoformat(),
    }


def write_json(path: Union[str, Path], data: Any) -> Path:
    """写 JSON; 先备份旧文件, 失败时恢复"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    backup_path = path.with_suffix(path.suffix + ".bak")
    if path.exists():
        path.replace(backup_path)

    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(dumps(data))
            f.write("\n")
        if backup_path.exists():
            backup_path.unlink()
    except Exception:
        if backup_path.exists():
            backup_path.replace(path)
        raise
    return path


def write_frame(
    path: Union[str, Path],
    frame: pd.DataFrame,
    header: Optional[Dict[str, Any]] = None,
) -> Path:
    """写 CSV; 头部以 '# key: value' 注释行写在最前"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        for key, value in sorted((header or {}).items()):
            f.write(f"{CSV_COMMENT_PREFIX}{key}: {value}\n")
        frame.to_csv(f, index=False, float_format="%.12g")
    return path


def read_frame(path: Union[str, Path]) -> pd.DataFrame:
    """读回 write_frame 写出的 CSV"""
    return pd.read_csv(path, comment=CSV_COMMENT_PREFIX.strip())
