import datetime as dt

import pytest

from advalstm.config import (
    RunConfig,
    config_as_dict,
    dump_config,
    load_config,
    parse_config_text,
)
from advalstm.errors import ConfigError


GOOD = """
# comment line
data.path = prices
out.dir = out

data.lag = 7
split.train_end = 2020-02-01
split.val_end = 2020-03-01
split.test_end = 2020-04-01
label.pos_threshold = 0.01
label.neg_threshold = -0.01
model.hidden_size = 8
model.map_size = 8
train.mode = adversarial
train.l2 = 0.001
train.adv_weight = 0.5
train.adv_scale = 0.05
train.seed = 11
grid.lags = 2, 3, 7
grid.l2_coefs = 0.1,1.0
"""


class TestParse:
    def test_values_and_comments(self):
        config = parse_config_text(GOOD)
        assert config.data_path == "prices"
        assert config.lag == 7
        assert config.train_end == dt.date(2020, 2, 1)
        assert config.mode == "adversarial"
        assert config.seed == 11
        assert config.grid_lags == (2, 3, 7)
        assert config.grid_l2_coefs == (0.1, 1.0)

    def test_defaults(self):
        config = parse_config_text("")
        assert config.lag == 5
        assert config.batch_size == 1024
        assert config.epochs == 150
        assert config.patience == 20
        assert config.attack_scale is None

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config_text("train.learningrate = 0.1")

    def test_line_number_in_error(self):
        with pytest.raises(ConfigError, match=":3"):
            parse_config_text("\n\ndata.lag = not_a_number")

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("data.lag 5")

    def test_bad_mode(self):
        with pytest.raises(ConfigError, match="train.mode"):
            parse_config_text("train.mode = chaotic")

    def test_bad_date(self):
        with pytest.raises(ConfigError, match="YYYY-MM-DD"):
            parse_config_text("split.train_end = 02/01/2020")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.cfg")


class TestValidation:
    def test_downstream_invariants_rejected_upfront(self):
        with pytest.raises(ConfigError):
            parse_config_text("train.learning_rate = 0")
        with pytest.raises(ConfigError):
            parse_config_text("train.batch_size = 0")
        with pytest.raises(ConfigError):
            parse_config_text("model.hidden_size = 0")
        with pytest.raises(ConfigError):
            parse_config_text("data.min_coverage = 1.5")
        with pytest.raises(ConfigError):
            parse_config_text("label.pos_threshold = -0.1\n" + SPLITS)
        with pytest.raises(ConfigError):
            parse_config_text("baseline.mom_window = 1")
        with pytest.raises(ConfigError):
            parse_config_text("grid.lags = ")

    def test_split_order_checked_when_present(self):
        text = (
            "split.train_end = 2020-03-01\n"
            "split.val_end = 2020-02-01\n"
            "split.test_end = 2020-04-01\n"
        )
        with pytest.raises(ConfigError, match="increasing"):
            parse_config_text(text)

    def test_split_required_for_split_spec(self):
        config = parse_config_text("data.lag = 3")
        with pytest.raises(ConfigError, match="required"):
            config.split_spec()


SPLITS = (
    "split.train_end = 2020-02-01\n"
    "split.val_end = 2020-03-01\n"
    "split.test_end = 2020-04-01\n"
)


class TestRoundTrip:
    def test_dump_then_parse_is_identity(self):
        config = parse_config_text(GOOD)
        again = parse_config_text(dump_config(config))
        assert again == config

    def test_dict_view_uses_config_keys(self):
        d = config_as_dict(RunConfig())
        assert d["data.lag"] == 5
        assert d["train.mode"] == "normal"
        assert "grid.lags" in d
