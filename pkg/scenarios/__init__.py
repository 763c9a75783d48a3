"""
ViscoFrac Scenario Library
==========================

Built-in scenarios live as Python files under scenarios/. Each one derives
from BaseScenario and returns the same mapping a TOML scenario file would
parse to, so built-ins and files share one validation path.
"""

from .base_scenario import BaseScenario
from .scenario_loader import ScenarioLoader

__all__ = ['BaseScenario', 'ScenarioLoader']
