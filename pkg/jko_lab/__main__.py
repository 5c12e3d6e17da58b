"""
文件名: __main__.py
描述: 支持 `python -m jko_lab`。
依赖: 无
"""

import sys

from .main import main

if __name__ == "__main__":
    sys.exit(main())
