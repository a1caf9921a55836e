"""
stabrw - 安定化子回路と ZX 図の書き換えエンジン
"""
__version__ = "0.1.0"
