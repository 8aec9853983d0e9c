import json
import math
import os

import numpy as np
import pytest

from btlbounds.core import settings
from btlbounds.core.errors import ConfigError
from btlbounds.core.storage import (
    details_path_for,
    format_value,
    load_json,
    render_csv,
    resolve_output_path,
    write_details,
    write_plot_script,
)
from btlbounds.models.models import Norm


class TestFormatting:
    @pytest.mark.parametrize(
        "value,text",
        [
            (3, "3"),
            (np.int64(7), "7"),
            (0.1, "0.10000000000000001"),
            (math.nan, "nan"),
            (True, "true"),
            (np.bool_(False), "false"),
            (Norm.L1, "L1"),
            (None, ""),
            ("star", "star"),
        ],
    )
    def test_format_value(self, value, text):
        assert format_value(value) == text

    def test_floats_survive_text(self):
        value = 1.0 / 3.0
        assert float(format_value(value)) == value

    def test_render_csv(self):
        text = render_csv(["n", "bcrb"], [(10, 0.5), (100, 0.25)])
        assert text == "n,bcrb\n10,0.5\n100,0.25\n"


class TestPaths:
    def test_details_path(self):
        assert details_path_for(os.path.join("out", "run.csv")) == os.path.join("out", "Details_run.json")

    def test_resolve_output_path(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path / "results"))
        assert resolve_output_path(None) is None
        assert resolve_output_path(os.path.join("here", "x.csv")) == os.path.join("here", "x.csv")
        assert resolve_output_path("x.csv") == os.path.join(str(tmp_path / "results"), "x.csv")
        assert (tmp_path / "results").is_dir()


class TestFiles:
    def test_details_are_pretty_json(self, tmp_path):
        path = write_details(str(tmp_path / "run.csv"), {"seed": np.int64(4), "norm": Norm.L2, "grid": np.arange(2)})
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        assert payload["seed"] == 4 and payload["norm"] == "L2" and payload["grid"] == [0, 1]
        assert "package_version" in payload

    def test_plot_script_skips_unknown_columns(self, tmp_path):
        path = write_plot_script(str(tmp_path / "run.csv"), "n", ["bcrb", "missing"], ["n", "it_bound", "bcrb"])
        with open(path, encoding="utf-8") as f:
            script = f.read()
        assert "using 1:3" in script
        assert "missing" not in script
        assert script.index("set terminal") < script.index("set output")

    def test_load_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"k": 4}', encoding="utf-8")
        assert load_json(str(path)) == {"k": 4}

    def test_load_json_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_json(str(tmp_path / "absent.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_json(str(broken))
