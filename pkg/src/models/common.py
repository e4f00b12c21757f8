"""
Common Pydantic models

Machine-readable error line printed by the CLI on failure.
"""

from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

try:
    from ..errors import TradmemError
except ImportError:
    from errors import TradmemError


class ErrorLine(BaseModel):
    """
    Categorized error emitted as one JSON line on stderr
    """
    error: str = Field(..., description="Error message")
    code: str = Field(..., description="Error category (e.g., SchemaViolation)")
    details: Optional[Dict[str, Any]] = Field(None, description="Additional error details")

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "error": "Config file not found: runs/desk.json",
                    "code": "ConfigError",
                    "details": {"path": "runs/desk.json"}
                }
            ]
        }
    }

    @classmethod
    def from_error(cls, error: TradmemError) -> "ErrorLine":
        return cls(error=error.message, code=error.category, details=error.details or None)

    def to_line(self) -> str:
        return self.model_dump_json(exclude_none=True)
