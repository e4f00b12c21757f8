"""Pydantic models for run configuration, reports and error lines"""

__all__ = []
