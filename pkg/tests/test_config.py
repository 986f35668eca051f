import json

import pytest

from polystrand.config import RunConfig, config_from_dict, load_config
from polystrand.errors import ConfigError, ValidationError


def _base(**over):
    d = {
        "mode": "simulate-reduced",
        "grid": {"n_s": 32, "length": 1.0},
        "integrator": {"cfl": 0.25, "t_end": 0.25},
        "physics": {"I": [1, 2, 3], "J": [[2, 0, 0], [0, 1, 0], [0, 0, 1]], "e": 1.0, "chi": [0, 0, 1]},
        "initial": {"kind": "twist", "parameters": {"amplitude": 0.3}, "seed": 0},
        "outputs": {"directory": "out", "snapshot_stride": 2},
    }
    for key, val in over.items():
        section, _, field = key.partition("__")
        if field:
            d[section][field] = val
        else:
            d[section] = val
    return d


def test_defaults_and_roundtrip():
    cfg = config_from_dict(_base())
    grid = cfg.build_grid()
    icfg = cfg.build_integrator(grid)
    assert icfg.dt == pytest.approx(0.25 / 32)
    assert cfg.build_params().J.matrix[0, 0] == 2.0
    assert config_from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(_base()))
    assert isinstance(load_config(path), RunConfig)


@pytest.mark.parametrize(
    "data",
    [
        [1, 2],
        _base(mode="fly"),
        _base(extra={}),
        _base(grid__cells=3),
        _base(grid=[32]),
        _base(grid__n_s=32.5),
        _base(grid__n_s=True),
        _base(integrator__t_end="1"),
        _base(integrator__cfl=None),
        _base(integrator__dt="0.1"),
        _base(initial__kind="vortex"),
        _base(initial__parameters={"amplitude": 0.3, "phase": 1.0}),
        _base(physics__I=["a", "b", "c"]),
        _base(convergence={"n_s": "32,64"}),
    ],
)
def test_config_errors(data):
    with pytest.raises(ConfigError):
        config_from_dict(data)


def test_unreadable_or_invalid_json(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


@pytest.mark.parametrize(
    "data",
    [
        _base(physics__I=[1, -2, 3]),
        _base(physics__J=[[1, 1, 0], [0, 1, 0], [0, 0, 1]]),
        _base(grid__n_s=4),
        _base(integrator__cfl=0.75),
        _base(integrator__fd_order=6),
        _base(outputs__snapshot_stride=3),
    ],
)
def test_validation_errors(data):
    cfg = config_from_dict(data)
    with pytest.raises(ValidationError):
        grid = cfg.build_grid()
        cfg.build_params()
        cfg.build_integrator(grid)
