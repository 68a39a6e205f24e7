import pytest

from hybridopt.config import ConfigError, RunConfig, format_config, load_config, parse_config


def test_defaults():
    c = RunConfig()
    assert (c.problem, c.h_target, c.k_shape, c.k_homog, c.k_final_homog) == (
        "annulus_twostate", 0.1, 400, 1, 30)


def test_parse_with_comments():
    c = parse_config("# run\nh_target = 0.2  # coarse\nk_shape=5\ndump_fields = no\n")
    assert c.h_target == 0.2 and c.k_shape == 5 and c.dump_fields is False


def test_round_trip():
    c = RunConfig(h_target=0.25, k_shape=7, out_dir="x y")
    assert parse_config(format_config(c)) == c


@pytest.mark.parametrize("text", [
    "bogus = 1", "k_shape = 1\nk_shape = 2", "k_shape", "k_shape = 1.5",
    "dump_fields = maybe", "k_homog = 0", "tau0 = -1", "volume_tol = 0.5",
    "h_target = 0", "k_shape = -1", "reinit_every = 0",
])
def test_rejects_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_replace_validates():
    with pytest.raises(ConfigError):
        RunConfig().replace(k_homog=0)
