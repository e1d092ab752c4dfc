"""
启动脚本 - 运行 Nilpotent Cone Lab 命令行
"""

import os
import sys
from pathlib import Path


def check_environment() -> bool:
    """检查数值依赖"""
    missing = []
    for module in ("numpy", "scipy", "sympy", "pandas", "pydantic", "structlog"):
        try:
            __import__(module)
        except ImportError:
            missing.append(module)
    if missing:
        print(f"⚠️ 缺少依赖: {', '.join(missing)}", file=sys.stderr)
        print("💡 请先安装: pip install -r requirements.txt", file=sys.stderr)
        return False
    return True


def main() -> int:
    """转发参数给 app.main"""
    project_root = Path(__file__).parent
    os.chdir(project_root)
    sys.path.insert(0, str(project_root))

    if not check_environment():
        return 1

    from app.main import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
