"""
文件名: __init__.py
描述: JKO 格式求解与核验工具包标记文件。
主要功能:
    - 暴露包命名空间。
依赖: 无
"""

# ============================================
# region 包导出
# ============================================

__all__ = []

# endregion
# ============================================
