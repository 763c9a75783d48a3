"""
Base Scenario Interface
=======================

All built-in scenarios inherit from this base class and implement the required methods.
"""

import copy
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

from scenario_config import ScenarioConfig, parse_config_dict


def merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Recursive dict update; nested tables are merged, everything else replaced."""
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


class BaseScenario(ABC):
    """
    Base class for all built-in scenarios.

    Subclasses set `scenario_name` and implement:
    - build()
    - get_scenario_description()
    """

    scenario_name: str = ""

    def __init__(self, params: Optional[Dict] = None):
        """
        Args:
            params: nested overrides merged into the scenario mapping,
                    e.g. {'steps': 256, 'geometry': {'nx': 32}}
        """
        self.params = params or {}
        self.name = self.get_scenario_name()
        self.description = self.get_scenario_description()

    @abstractmethod
    def build(self) -> Dict[str, Any]:
        """
        Return the scenario as the mapping its TOML file would parse to:

            {'name': ..., 'mode': ..., 'T': ..., 'steps': ..., 'beta': ...,
             'geometry': {...}, 'crack': {...}, 'materials': {...}, 'data': {...}}
        """

    def get_scenario_name(self) -> str:
        """Return the name of the scenario."""
        return self.scenario_name

    @abstractmethod
    def get_scenario_description(self) -> str:
        """Return a description of the scenario."""

    def to_dict(self) -> Dict[str, Any]:
        raw = merge(self.build(), self.params)
        raw.setdefault("name", self.name)
        return raw

    def config(self) -> ScenarioConfig:
        """Validated ScenarioConfig with the overrides applied."""
        return parse_config_dict(self.to_dict(), source=f"builtin:{self.name}")
