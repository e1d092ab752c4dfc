#!/usr/bin/env python3
"""
测试运行脚本 - 运行项目的所有测试
"""

import os
import subprocess
import sys
from pathlib import Path


def _project_root() -> Path:
    root = Path(__file__).parent.parent
    os.chdir(root)
    return root


def run_tests(include_slow: bool = False) -> bool:
    """运行所有测试; 默认跳过 slow 标记"""
    _project_root()

    print("🧪 运行 Nilpotent Cone Lab 测试套件")
    print("=" * 50)

    command = [sys.executable, "-m", "pytest", "tests/", "-v", "--tb=short", "--color=yes"]
    if not include_slow:
        command += ["-m", "not slow"]

    try:
        result = subprocess.run(command, capture_output=True, text=True)
    except FileNotFoundError:
        print("❌ 无法运行pytest")
        return False

    print(result.stdout)
    if result.stderr:
        print("警告信息:")
        print(result.stderr)

    if result.returncode == 0:
        print("\n🎉 所有测试通过！")
        return True
    print(f"\n❌ 测试失败 (退出代码: {result.returncode})")
    return False


def run_specific_tests(test_pattern: str) -> bool:
    """运行特定的测试"""
    _project_root()
    print(f"🔍 运行匹配 '{test_pattern}' 的测试...")
    result = subprocess.run(
        [sys.executable, "-m", "pytest", f"tests/{test_pattern}", "-v"], capture_output=True, text=True
    )
    print(result.stdout)
    if result.stderr:
        print(result.stderr)
    return result.returncode == 0


def show_test_coverage() -> None:
    """显示测试覆盖率 (需要 pytest-cov)"""
    _project_root()
    print("📊 计算测试覆盖率...")
    result = subprocess.run(
        [sys.executable, "-m", "pytest", "tests/", "-m", "not slow",
         "--cov=core", "--cov=app", "--cov-report=term", "--cov-report=html"],
        capture_output=True,
        text=True,
    )
    print(result.stdout)
    if result.returncode == 0:
        print("📄 HTML覆盖率报告已生成: htmlcov/index.html")
    else:
        print(f"⚠️ 覆盖率分析失败: {result.stderr}")


def main() -> None:
    """主函数"""
    if len(sys.argv) > 1:
        if sys.argv[1] == "--coverage":
            show_test_coverage()
        elif sys.argv[1] == "--slow":
            sys.exit(0 if run_tests(include_slow=True) else 1)
        elif sys.argv[1] == "--help":
            print("测试运行选项:")
            print("  python scripts/run_tests.py             # 运行所有非 slow 测试")
            print("  python scripts/run_tests.py --slow      # 包括 slow 验收测试")
            print("  python scripts/run_tests.py --coverage  # 运行测试并生成覆盖率报告")
            print("  python scripts/run_tests.py unit/lattice # 运行特定测试目录或文件")
        else:
            sys.exit(0 if run_specific_tests(sys.argv[1]) else 1)
    else:
        success = run_tests()
        if success:
            print("\n💡 提示:")
            print("  运行验收测试: python scripts/run_tests.py --slow")
            print("  运行特定测试: python scripts/run_tests.py unit/control")
        sys.exit(0 if success else 1)


if __name__ == "__main__":
    main()
