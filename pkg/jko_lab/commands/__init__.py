"""
文件名: __init__.py
描述: 命令行子命令包入口。
主要功能:
    - 暴露子命令模块。
依赖: 无
"""

# ============================================
# region 包导出
# ============================================

__all__ = []

# endregion
# ============================================
