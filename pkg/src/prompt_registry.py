"""
Prompt Registry for versioned prompt templates
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

try:
    from .errors import ConfigError
except ImportError:
    from errors import ConfigError

logger = logging.getLogger(__name__)

PROMPTS_DIR_ENV = "TRADMEM_PROMPTS_DIR"
DEFAULT_PROMPTS_DIR = Path(__file__).resolve().parent.parent / "prompts"


@dataclass(frozen=True)
class PromptTemplate:
    """One versioned prompt template"""
    name: str
    phase: str
    version: str
    description: str
    system: str
    template: str

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PromptTemplate":
        known_fields = {"name", "phase", "version", "description", "system", "template"}
        return cls(**{k: str(v) for k, v in data.items() if k in known_fields})

    def render(self, values: Dict[str, str]) -> Dict[str, str]:
        """
        Expand both parts of the template

        Returns:
            {"system": ..., "user": ...}
        """
        try:
            return {
                "system": self.system.format_map(values).strip(),
                "user": self.template.format_map(values).strip(),
            }
        except KeyError as e:
            raise ConfigError(f"Prompt {self.name} references unknown field {e}")


class PromptRegistry:
    """
    Loads prompt templates from a directory of YAML files
    """

    REQUIRED_FIELDS = ["name", "phase", "version", "system", "template"]

    def __init__(self):
        self.prompts: Dict[str, PromptTemplate] = {}
        logger.debug("Prompt Registry initialized")

    def load_definition(self, file_path: Path) -> PromptTemplate:
        """
        Load one template file

        Raises:
            ConfigError: If the file is missing or incomplete
        """
        path = Path(file_path)
        if not path.exists():
            raise ConfigError(f"Prompt definition not found: {file_path}")

        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}

        missing = [name for name in self.REQUIRED_FIELDS if name not in data]
        if missing:
            raise ConfigError(f"{path.name}: missing required fields {missing}")

        prompt = PromptTemplate.from_dict({"description": "", **data})
        self.prompts[prompt.name] = prompt
        logger.debug(f"Loaded prompt: {prompt.name} v{prompt.version}")
        return prompt

    def load_definitions(self, directory: Optional[Path] = None) -> "PromptRegistry":
        """Load every *.yaml template in a directory"""
        dir_path = Path(directory or os.environ.get(PROMPTS_DIR_ENV) or DEFAULT_PROMPTS_DIR)
        if not dir_path.exists():
            raise ConfigError(f"Prompt directory not found: {dir_path}")

        for yaml_file in sorted(dir_path.glob("*.yaml")):
            self.load_definition(yaml_file)

        logger.info(f"Loaded {len(self.prompts)} prompt templates from {dir_path}")
        return self

    def get(self, name: str) -> PromptTemplate:
        prompt = self.prompts.get(name)
        if prompt is None:
            raise ConfigError(f"Unknown prompt template: {name}")
        return prompt

    def list_prompts(self) -> List[str]:
        return sorted(self.prompts)


_default_registry: Optional[PromptRegistry] = None


def default_registry() -> PromptRegistry:
    """Registry loaded once from the default prompt directory"""
    global _default_registry
    if _default_registry is None:
        _default_registry = PromptRegistry().load_definitions()
    return _default_registry
