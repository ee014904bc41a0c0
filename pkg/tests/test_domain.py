"""Configuration invariants, aging envelope checks and JSON round trips."""

import json

import numpy as np
import pytest

from besslife.domain import (AgingModel, ConfigError, PlantState,
                             config_from_dict, config_to_dict,
                             config_violations, dumps_config, load_config,
                             save_config, soh_at_eol, validate_config)
from helpers import (make_aging, make_battery, make_config, make_economic,
                     make_horizon, make_thermal)


def test_baseline_config_is_valid():
    assert config_violations(make_config()) == []


def test_validate_returns_config_unchanged():
    cfg = make_config()
    assert validate_config(cfg) is cfg


def test_efficiency_must_be_in_unit_interval():
    cfg = make_config(battery=make_battery(eta_chg=1.2))
    msgs = config_violations(cfg)
    assert any("efficiency out of (0,1]" in m and "eta_chg" in m for m in msgs)
    cfg = make_config(battery=make_battery(eta_dis=0.0))
    assert any("eta_dis" in m for m in config_violations(cfg))


def test_multiple_violations_are_collected():
    cfg = make_config(battery=make_battery(eta_chg=2.0, e_nom=-1.0),
                      horizon=make_horizon(dt_hours=0.7))
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert len(err.value.violations) >= 3


def test_soh_at_eol():
    assert soh_at_eol(make_battery(q_eol=0.20)) == pytest.approx(0.80)
    assert soh_at_eol(make_battery(soh_initial=0.95, q_eol=0.20)) == pytest.approx(0.75)


def test_empty_plane_set_rejected():
    cfg = make_config(aging=make_aging(cal_planes=()))
    assert any("cal_planes: plane set empty" in m for m in config_violations(cfg))


def test_negative_envelope_rejected_but_negative_single_plane_ok():
    # a plane that is negative somewhere is fine as long as the max of all
    # planes stays non-negative on the admissible box
    ok = make_config(aging=make_aging(
        cal_planes=((1e-6, -2e-6, 0.0), (0.0, 1e-6, 0.0))))
    assert config_violations(ok) == []

    bad = make_config(aging=make_aging(cal_planes=((-1e-6, 0.0, 0.0),)))
    msgs = config_violations(bad)
    assert any("cal_planes: envelope negative" in m for m in msgs)

    bad_cyc = make_config(aging=make_aging(cyc_chg_planes=((1e-5, -1e-4),)))
    msgs = config_violations(bad_cyc)
    assert any("cyc_chg_planes: envelope negative" in m for m in msgs)


def test_thermal_stability_guard():
    cfg = make_config(thermal=make_thermal(k_t=10.0, alpha_t=1.0))
    assert any("unstable" in m for m in config_violations(cfg))


def test_dt_must_divide_day():
    cfg = make_config(horizon=make_horizon(dt_hours=0.7))
    assert any("divide 24" in m for m in config_violations(cfg))
    # 0.25, 0.5, 1, 2 all fine
    for dt in (0.25, 0.5, 1.0, 2.0):
        assert config_violations(make_config(horizon=make_horizon(dt_hours=dt))) == []


def test_window_must_cover_commit():
    cfg = make_config(horizon=make_horizon(window_days=1, commit_days=3))
    assert any("window_days >= commit_days" in m for m in config_violations(cfg))


def test_horizon_step_counts():
    hz = make_horizon(dt_hours=0.25, window_days=7, commit_days=1)
    assert hz.steps_per_day == 96
    assert hz.window_steps == 672
    assert hz.commit_steps == 96
    assert make_horizon(dt_hours=2.0).steps_per_day == 12


def test_power_limits_scale_with_capacity():
    b = make_battery(e_nom=2000.0, c_rate_max_chg=0.25, c_rate_max_dis=1.0)
    assert b.p_max_chg == pytest.approx(500.0)
    assert b.p_max_dis == pytest.approx(2000.0)


def test_fade_helpers_take_arrays():
    ag = make_aging()
    c = np.array([0.0, 0.25, 0.5])
    fade = ag.cyc_chg_fade(c)
    manual = np.maximum(0.0 + 1e-5 * c, -5e-6 + 3e-5 * c)
    assert np.allclose(fade, manual)
    soc = np.array([0.0, 0.5, 1.0])
    t = np.array([15.0, 25.0, 35.0])
    fade = ag.cal_fade(soc, t)
    manual = np.maximum(3e-7 + 3e-7 * soc + 1.2e-8 * t,
                        1e-7 + 8e-7 * soc + 1e-8 * t)
    assert np.allclose(fade, manual)
    assert float(ag.cal_fade(0.5, 25.0)) > 0


def test_fec_throughput_values():
    cfg = make_config(aging=make_aging(fec_throughput="discharge_only"))
    assert config_violations(cfg) == []
    cfg = make_config(aging=make_aging(fec_throughput="half"))
    assert any("fec_throughput" in m for m in config_violations(cfg))


def test_plant_state_copy_is_independent():
    s = PlantState(e_batt=500.0, soh=1.0, temp=25.0)
    c = s.copy()
    c.soh = 0.9
    c.day_index = 7
    assert s.soh == 1.0 and s.day_index == 0


class TestJsonRoundTrip:
    def test_serialize_parse_serialize_is_byte_identical(self):
        cfg = make_config()
        text = dumps_config(cfg)
        again = config_from_dict(json.loads(text))
        assert dumps_config(again) == text
        assert again == cfg

    def test_file_round_trip(self, tmp_path):
        cfg = make_config(economic=make_economic(adaptive=True, interest_rate=0.05))
        path = tmp_path / "cfg.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_unknown_section_and_key_rejected(self):
        data = config_to_dict(make_config())
        data["market"] = {}
        with pytest.raises(ConfigError, match="unknown section 'market'"):
            config_from_dict(data)
        data = config_to_dict(make_config())
        data["battery"]["colour"] = "blue"
        with pytest.raises(ConfigError, match="unknown key 'colour'"):
            config_from_dict(data)

    def test_missing_section_and_required_key_rejected(self):
        data = config_to_dict(make_config())
        del data["thermal"]
        with pytest.raises(ConfigError, match="missing section 'thermal'"):
            config_from_dict(data)
        data = config_to_dict(make_config())
        del data["battery"]["e_nom"]
        with pytest.raises(ConfigError, match="missing required key"):
            config_from_dict(data)

    def test_type_errors_are_reported_per_field(self):
        data = config_to_dict(make_config())
        data["economic"]["adaptive"] = "yes"
        data["battery"]["e_nom"] = "plenty"
        with pytest.raises(ConfigError) as err:
            config_from_dict(data)
        text = str(err.value)
        assert "economic.adaptive" in text and "battery.e_nom" in text

    def test_plane_width_enforced(self):
        data = config_to_dict(make_config())
        data["aging"]["cal_planes"] = [[1e-7, 2e-7]]
        with pytest.raises(ConfigError, match="3 coefficients"):
            config_from_dict(data)

    def test_malformed_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="malformed JSON"):
            load_config(path)

    def test_invalid_values_fail_validation_on_load(self):
        data = config_to_dict(make_config())
        data["battery"]["eta_chg"] = 1.5
        with pytest.raises(ConfigError, match="efficiency"):
            config_from_dict(data)


def test_aging_model_defaults_round_trip():
    ag = AgingModel(k_cyc_dis=0.0, cyc_chg_planes=((0.0, 0.0),),
                    cal_planes=((0.0, 0.0, 0.0),))
    assert ag.fec_throughput == "total"
