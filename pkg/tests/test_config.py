import json

import pytest

from sslt.config import ConfigError, PipelineConfig, from_dict, load_config, merge, to_dict


def test_defaults_round_trip():
    cfg = PipelineConfig()
    assert from_dict(json.loads(json.dumps(to_dict(cfg)))) == from_dict({})
    assert cfg.geometry.expand_factor == 1.5 and cfg.geometry.min_size == 96 and cfg.geometry.salient_size == 32
    assert cfg.train.iterations == 300 and cfg.saliency.candidates == 10


@pytest.mark.parametrize("data,path", [
    ({"train": {"iterations": "many"}}, "train.iterations"),
    ({"train": {"iterations": 0}}, "train.iterations"),
    ({"geometry": {"bogus": 1}}, "geometry.bogus"),
    ({"tracker": {"scale_pool": [1.0, "x"]}}, "tracker.scale_pool[1]"),
    ({"saliency": {"binarize_mode": "other"}}, "saliency.binarize_mode"),
    ({"salient_policy": "most"}, "salient_policy"),
    ({"geometry": 3}, "geometry"),
    ({"seed": True}, "seed"),
])
def test_schema_errors_name_field(data, path):
    with pytest.raises(ConfigError) as exc:
        from_dict(data)
    assert exc.value.path == path


def test_merge_dotted():
    out = merge({"train": {"iterations": 5}}, {"train.learning_rate": 0.1, "seed": 3})
    assert out == {"train": {"iterations": 5, "learning_rate": 0.1}, "seed": 3}


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"seed": 4, "geometry": {"min_size": 64}}')
    cfg = load_config(p)
    assert cfg.seed == 4 and cfg.geometry.min_size == 64.0
    p.write_text("{nope")
    with pytest.raises(ConfigError):
        load_config(p)
