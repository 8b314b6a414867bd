import pytest

from lrthr.config import (
    ConfigurationError,
    ScenarioConfig,
    apply_overrides,
    desk_scale,
    from_dict,
    load_config,
    save_config,
)


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    cfg = load_config(path)
    assert cfg == ScenarioConfig()
    assert cfg.protocol.weights == (0.1, 0.8, 0.1)
    assert cfg.estimators.alpha == 0.6 and cfg.estimators.window == 30
    assert cfg.deadlines[0] == 0.1 and cfg.deadlines[-1] == 0.7 and len(cfg.deadlines) == 13


def test_weights_must_sum_to_one(tmp_path):
    path = tmp_path / "w.yaml"
    path.write_text("traffic:\n  sources: 4\nprotocol:\n  weights: [0.2, 0.8, 0.2]\n")
    with pytest.raises(ConfigurationError, match=r"w.yaml:4: protocol.weights: A\+B\+C must equal 1.*1.2"):
        load_config(path)


def test_unknown_key_names_its_line(tmp_path):
    path = tmp_path / "u.yaml"
    path.write_text("deadline: 0.4\nchannel:\n  bandwith: 4800\n")
    with pytest.raises(ConfigurationError, match=r"u.yaml:3: channel.bandwith: unknown key"):
        load_config(path)


def test_bad_yaml_reports_location(tmp_path):
    path = tmp_path / "b.yaml"
    path.write_text("deadline: 0.4\nchannel: [\n")
    with pytest.raises(ConfigurationError, match="not valid YAML"):
        load_config(path)


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_config("/nonexistent/cfg.yaml")


def test_round_trip_keeps_deadline_list(tmp_path):
    cfg = desk_scale().replace(deadlines=[0.1, 0.25, 0.7], protocol__policy="thvr")
    save_config(cfg, tmp_path / "c.yaml")
    again = load_config(tmp_path / "c.yaml")
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_overrides():
    cfg = apply_overrides(ScenarioConfig(), ["channel.max_retries=5", "protocol.weights=[0.2, 0.6, 0.2]",
                                             "topology.void_free=false", "deadlines=0.2,0.3"])
    assert cfg.channel.max_retries == 5
    assert cfg.protocol.weights == (0.2, 0.6, 0.2)
    assert cfg.topology.void_free is False
    assert cfg.deadlines == [0.2, 0.3]
    with pytest.raises(ConfigurationError, match="not key=value"):
        apply_overrides(cfg, ["deadline"])
    with pytest.raises(ConfigurationError, match="unknown key"):
        apply_overrides(cfg, ["nope.x=1"])
    with pytest.raises(ConfigurationError, match="section"):
        apply_overrides(cfg, ["channel=1"])


@pytest.mark.parametrize("data, key", [
    ({"protocol": {"policy": "gpsr"}}, "protocol.policy"),
    ({"estimators": {"alpha": 1.5}}, "estimators.alpha"),
    ({"traffic": {"rate": 0}}, "traffic.rate"),
    ({"topology": {"count": 5}}, "traffic.sources"),
    ({"channel": {"feedback": "telepathy"}}, "channel.feedback"),
    ({"channel": {"max_retries": 2.5}}, "channel.max_retries"),
    ({"seeds": 0}, "seeds"),
])
def test_validation_names_the_field(data, key):
    with pytest.raises(ConfigurationError, match=key.replace(".", r"\.")):
        from_dict(data)


def test_replace_does_not_mutate():
    base = ScenarioConfig()
    other = base.replace(traffic__sources=4)
    assert base.traffic.sources == 10 and other.traffic.sources == 4
    assert base.digest() != other.digest()


def test_desk_scale_keeps_density():
    cfg = desk_scale()
    full = ScenarioConfig()
    w, h = cfg.topology.field
    W, H = full.topology.field
    assert cfg.topology.count / (w * h) == pytest.approx(full.topology.count / (W * H))
    assert cfg.seeds >= 20
