"""
文件名: __init__.py
描述: 数值服务层包入口。
主要功能:
    - 暴露服务模块。
依赖: 无
"""

# ============================================
# region 包导出
# ============================================

__all__ = []

# endregion
# ============================================
