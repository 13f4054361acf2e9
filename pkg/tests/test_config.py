from importlib import resources

import pytest

from koopman_inertia.config import (
    RunConfig,
    load_config,
    parse_config,
    parse_sweep,
    parse_trip,
    render_manifest,
)
from koopman_inertia.errors import ConfigError
from koopman_inertia.grid_model import CASE_I, CASE_II


def test_defaults_reproduce_case_i():
    cfg = RunConfig().validate()
    assert cfg.scenario() == CASE_I
    assert cfg.period == pytest.approx(1 / 60)
    assert cfg.window == 10.0
    assert cfg.windows == (2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    assert cfg.network == "ieee39"


def test_case_ii_preset():
    sc = RunConfig(case="ii").scenario()
    assert sc == CASE_II
    assert (sc.bus, sc.trip, sc.cycles) == (23, (22, 23), 15)


def test_scenario_overrides():
    sc = RunConfig(bus=4, trip="4-5", cycles=6).scenario()
    assert (sc.bus, sc.trip, sc.cycles) == (4, (4, 5), 6)


def test_parse_helpers():
    assert parse_trip("16-17") == (16, 17)
    assert parse_trip(" 22 - 23") == (22, 23)
    for bad in ("16", "a-b", "1-2-3"):
        with pytest.raises(ConfigError):
            parse_trip(bad)
    assert parse_sweep("2:12:2") == (2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    assert parse_sweep("0.5:1.0:0.1") == pytest.approx((0.5, 0.6, 0.7, 0.8, 0.9, 1.0))
    for bad in ("2:12", "0:4:1", "5:4:1", "1:2:0", "x:y:z"):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


@pytest.mark.parametrize("field,value", [
    ("t_end", 0.0), ("dt", -1e-3), ("sample_hz", 0.0), ("window", 0.0), ("loading", 0.0),
    ("order", 0), ("stride", 0), ("jobs", 0), ("keep", 0), ("cycles", 0.0),
    ("case", "iii"), ("network", "missing.net"),
])
def test_validation_errors(field, value):
    with pytest.raises(ConfigError):
        RunConfig(**{field: value}).validate()


def test_parse_config_text(tmp_path):
    text = """
    # study setup
    fault.case = ii
    kmd.order = 40      # upper bound
    kmd.energy_eps = 1e-6
    estimate.leave_one_out = true
    output.dir = out
    """
    cfg = parse_config(text)
    assert cfg.case == "ii" and cfg.order == 40 and cfg.leave_one_out is True
    assert cfg.energy_eps == 1e-6
    s = cfg.settings()
    assert s.energy_eps == 1e-6 and s.keep is None


@pytest.mark.parametrize("text", [
    "kmd.orders = 4",
    "kmd.order 4",
    "kmd.order = four",
    "estimate.leave_one_out = maybe",
    "integration.dt = none",
    "integration.t_end = -1",
])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_network_path_relative_to_config(tmp_path):
    net_file = tmp_path / "grid.net"
    net_file.write_text(resources.files("koopman_inertia.data").joinpath("ieee39.net").read_text())
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("network.source = grid.net\n")
    cfg = load_config(cfg_file)
    assert cfg.network_path() == net_file
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_manifest_round_trip():
    cfg = RunConfig(case="ii", order=50, energy_eps=1e-7, keep=None, sweep="4:8:2",
                    leave_one_out=True, jobs=3, dt=1 / 2400)
    text = render_manifest(cfg)
    again = parse_config(text)
    assert again == cfg
    assert render_manifest(again) == text
    assert "integration.dt = 0.0004166666666666667" in text
    assert "kmd.keep = none" in text
