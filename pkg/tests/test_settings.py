import pytest

from doctree.common import SettingsError
from doctree.settings import DEFAULTS, load_config_file, merge_settings, resolve_train_settings


def write_config(tmp_path, text):
    path = tmp_path / "train.env"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfigFile:
    def test_values_are_typed(self, tmp_path):
        path = write_config(tmp_path, "GAMMA=0.3\niterations=40\n# comment\nbackend=inline\n")
        assert load_config_file(path) == {"gamma": 0.3, "iterations": 40, "backend": "inline"}

    def test_unknown_key(self, tmp_path):
        path = write_config(tmp_path, "temperature=2\n")
        with pytest.raises(ValueError, match="unknown setting"):
            load_config_file(path)

    def test_unparsable_value(self, tmp_path):
        path = write_config(tmp_path, "iterations=many\n")
        with pytest.raises(ValueError, match="invalid value"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="does not exist"):
            load_config_file(tmp_path / "absent.env")


class TestPrecedence:
    def test_defaults(self):
        settings = resolve_train_settings({})
        assert settings.hyperparameters.gamma == 0.95
        assert settings.gibbs.iterations == 5000
        assert settings.gibbs.burn_in == 2000
        assert settings.gibbs.lag == 20
        assert settings.parallel.workers == 1

    def test_flag_beats_preset_beats_file(self, tmp_path):
        path = write_config(tmp_path, "gamma=0.3\neta=0.2\n")

        assert merge_settings({}, path)["gamma"] == 0.3
        assert merge_settings({}, path, "deep")["gamma"] == 0.05
        merged = merge_settings({"gamma": 0.4, "eta": None}, path, "deep")
        assert merged["gamma"] == 0.4
        assert merged["eta"] == 0.2

    def test_unrelated_overrides_are_ignored(self):
        merged = merge_settings({"graph": "graph.json", "seed": 3})
        assert "graph" not in merged
        assert merged["seed"] == 3
        assert set(merged) == set(DEFAULTS)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            merge_settings({}, preset="medium")

    def test_invalid_schedule_from_file(self, tmp_path):
        path = write_config(tmp_path, "iterations=10\nburn_in=10\n")
        with pytest.raises(ValueError):
            resolve_train_settings({}, path)

    def test_invalid_backend(self):
        with pytest.raises(ValueError, match="backend"):
            resolve_train_settings({"backend": "threads"})

    def test_as_dict_for_manifests(self):
        settings = resolve_train_settings({"iterations": 10, "burn_in": 2, "lag": 2, "workers": 3})
        assert settings.as_dict() == {
            "gamma": 0.95,
            "eta": 0.1,
            "alpha": 1.0,
            "iterations": 10,
            "burn_in": 2,
            "lag": 2,
            "seed": 0,
            "top_words": 7,
            "workers": 3,
            "backend": "process",
        }


def test_invalid_values_are_settings_errors(tmp_path):
    path = write_config(tmp_path, "gamma=1.5\n")
    with pytest.raises(SettingsError, match="gamma"):
        resolve_train_settings({}, path)
