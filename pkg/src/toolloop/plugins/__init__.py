"""Concrete tool plugins: calculator, sql, search, shell, code interpreter, finish."""

from .base import ToolPlugin, ToolResult, extract_tag

__all__ = ["ToolPlugin", "ToolResult", "extract_tag"]
