"""
Tests for scenario files and the built-in scenario registry.
"""

import os
import sys
import textwrap

import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ConfigurationError
from problem import build_problem
from scenario_config import parse_config, parse_config_dict
from scenarios import BaseScenario, ScenarioLoader

PLATE = textwrap.dedent("""\
    name = "plate"
    mode = "antiplane"
    T = 1.0
    steps = 8
    beta = 0.5

    [geometry]
    nx = 4
    ny = 4
    dirichlet_sides = ["bottom", "top"]

    [crack]
    points = [[0.0, 0.5], [0.25, 0.5], [0.5, 0.5]]

    [crack.front]
    times = [0.0, 1.0]
    lengths = [0.0, 0.5]

    [materials]
    A = {lambda = 0.0, mu = 1.0}
    B = {mu = 0.5}

    [data]
    f = "sin(pi*x)*t"
    u1 = "x*(1-x)"

    [checks]
    u_only = false
""")


@pytest.fixture
def plate_file(tmp_path):
    path = tmp_path / "plate.toml"
    path.write_text(PLATE)
    return path


class TestScenarioFile:
    def test_parse(self, plate_file):
        cfg = parse_config(str(plate_file))
        assert cfg.name == "plate"
        assert cfg.steps == 8
        assert cfg.geometry.dirichlet_sides == ["bottom", "top"]
        assert cfg.crack.front_lengths == [0.0, 0.5]
        assert cfg.materials.B == {"mu": 0.5}
        assert cfg.output.snapshot_times == [1.0]
        assert not cfg.checks.active("u_only")
        assert cfg.checks.active("balance")
        assert cfg.source == str(plate_file)

    def test_problem_from_file(self, plate_file):
        problem = build_problem(parse_config(str(plate_file)))
        assert problem.crack.n_pairs == 1
        assert problem.space(0.0).released == 0
        assert problem.space(1.0).released == 1
        assert problem.u1.shape == (problem.mesh.n_nodes,)

    def test_missing_beta_names_key(self, tmp_path):
        path = tmp_path / "nobeta.toml"
        path.write_text(PLATE.replace("beta = 0.5\n", ""))
        with pytest.raises(ConfigurationError) as exc:
            parse_config(str(path))
        assert exc.value.key == "beta"
        assert exc.value.line is not None

    def test_bad_value_line(self, tmp_path):
        path = tmp_path / "negative.toml"
        path.write_text(PLATE.replace("beta = 0.5", "beta = -1.0"))
        with pytest.raises(ConfigurationError) as exc:
            parse_config(str(path))
        assert exc.value.line == 5
        assert "beta" in str(exc.value)

    def test_missing_file_reference(self, tmp_path):
        path = tmp_path / "table.toml"
        path.write_text(PLATE.replace('A = {lambda = 0.0, mu = 1.0}\nB = {mu = 0.5}', 'table = "tensors.txt"'))
        with pytest.raises(ConfigurationError) as exc:
            parse_config(str(path))
        assert exc.value.key == "materials.table"

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("beta = = 1\n")
        with pytest.raises(ConfigurationError):
            parse_config(str(path))

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            parse_config(str(tmp_path / "absent.toml"))


class TestScenarioDict:
    def base(self, **overrides):
        raw = {"T": 1.0, "steps": 4, "beta": 1.0, "geometry": {"nx": 2, "ny": 2},
               "materials": {"A": {"mu": 1.0}, "B": {"mu": 1.0}}}
        raw.update(overrides)
        return raw

    def test_defaults(self):
        cfg = parse_config_dict(self.base())
        assert cfg.mode == "antiplane"
        assert cfg.solver.method in ("direct", "cg")
        assert set(cfg.geometry.dirichlet_sides) == {"bottom", "right", "top", "left"}

    @pytest.mark.parametrize("overrides,key", [
        ({"steps": 1}, "steps"),
        ({"mode": "axisymmetric"}, "mode"),
        ({"T": 0.0}, "T"),
        ({"solver": {"method": "qr"}}, "solver.method"),
        ({"output": {"snapshot_times": [2.0]}}, "output.snapshot_times"),
        ({"crack": {"front": {"times": [0.0, 1.0]}}}, "crack.front.lengths"),
        ({"geometry": {"nx": 2}}, "geometry.ny"),
    ])
    def test_rejected(self, overrides, key):
        with pytest.raises(ConfigurationError) as exc:
            parse_config_dict(self.base(**overrides))
        assert exc.value.key == key

    def test_traction_needs_a_free_side(self):
        with pytest.raises(ConfigurationError):
            parse_config_dict(self.base(data={"N": 1.0}))
        cfg = parse_config_dict(self.base(data={"N": 1.0}, geometry={"nx": 2, "ny": 2,
                                                                     "dirichlet_sides": ["bottom"]}))
        assert cfg.data.N == 1.0


class TestScenarioLoader:
    def test_builtins(self):
        names = [entry["name"] for entry in ScenarioLoader().list_available_scenarios()]
        for name in ("zero", "static", "single_dof", "smooth_uncracked", "cracked_plate",
                     "planar_elastic_crack", "past_history_demo"):
            assert name in names
        assert names == sorted(names)

    def test_every_builtin_builds(self):
        loader = ScenarioLoader()
        for name, cls in loader.load_all_scenarios().items():
            assert issubclass(cls, BaseScenario)
            problem = build_problem(loader.get_scenario(name).config())
            assert problem.name == name

    def test_overrides(self):
        cfg = ScenarioLoader().get_scenario("smooth_uncracked", {"steps": 8, "geometry": {"nx": 2}}).config()
        assert cfg.steps == 8
        assert cfg.geometry.nx == 2
        assert cfg.geometry.ny == 8
        assert cfg.source == "builtin:smooth_uncracked"

    def test_unknown_scenario(self):
        with pytest.raises(ConfigurationError):
            ScenarioLoader().get_scenario("nonexistent")

    def test_resolve_file_or_name(self, plate_file):
        loader = ScenarioLoader()
        assert loader.resolve(str(plate_file)).name == "plate"
        assert loader.resolve("zero").name == "zero"
        with pytest.raises(ConfigurationError):
            loader.resolve(str(plate_file), {"steps": 4})
