"""
Scenario Loader
===============

Discovers built-in scenarios in the scenarios/ directory and resolves CLI
arguments that are either a scenario name or a TOML file path.
"""

import importlib
import inspect
import logging
import os
from typing import Dict, List, Type

from errors import ConfigurationError
from scenario_config import ScenarioConfig, parse_config
from scenarios.base_scenario import BaseScenario

logger = logging.getLogger(__name__)

SCENARIOS_DIR = os.path.dirname(os.path.abspath(__file__))


class ScenarioLoader:
    """Loads and manages built-in scenarios."""

    def __init__(self, scenarios_dir: str = SCENARIOS_DIR):
        self.scenarios_dir = scenarios_dir
        self.loaded_scenarios: Dict[str, Type[BaseScenario]] = {}

    def load_all_scenarios(self) -> Dict[str, Type[BaseScenario]]:
        """
        Import every module of the scenarios directory and collect its BaseScenario subclasses.

        Returns:
            Dictionary mapping scenario names to scenario classes
        """
        self.loaded_scenarios.clear()
        if not os.path.isdir(self.scenarios_dir):
            return {}

        for filename in sorted(os.listdir(self.scenarios_dir)):
            if not filename.endswith('.py') or filename.startswith('_'):
                continue
            module_name = filename[:-3]
            try:
                module = importlib.import_module(f"scenarios.{module_name}")
            except ImportError as e:
                logger.warning("Failed to load scenarios from %s: %s", filename, e)
                continue
            for _, obj in inspect.getmembers(module, inspect.isclass):
                if issubclass(obj, BaseScenario) and not inspect.isabstract(obj):
                    self.loaded_scenarios[obj.scenario_name] = obj

        logger.debug("Loaded %d built-in scenarios", len(self.loaded_scenarios))
        return self.loaded_scenarios

    def get_scenario(self, name: str, params: Dict = None) -> BaseScenario:
        if not self.loaded_scenarios:
            self.load_all_scenarios()
        if name not in self.loaded_scenarios:
            raise ConfigurationError(f"Scenario '{name}' not found. Available: {sorted(self.loaded_scenarios)}",
                                     key="scenario")
        return self.loaded_scenarios[name](params)

    def list_available_scenarios(self) -> List[Dict[str, str]]:
        """Name and description of every built-in scenario, sorted by name."""
        if not self.loaded_scenarios:
            self.load_all_scenarios()
        return [{'name': name, 'description': cls().get_scenario_description()}
                for name, cls in sorted(self.loaded_scenarios.items())]

    def resolve(self, name_or_path: str, params: Dict = None) -> ScenarioConfig:
        """A TOML file path when one exists, otherwise a built-in scenario name."""
        if os.path.isfile(name_or_path):
            if params:
                raise ConfigurationError("overrides apply to built-in scenarios only", key="scenario")
            return parse_config(name_or_path)
        return self.get_scenario(name_or_path, params).config()
