import math
import os
from pathlib import Path

import numpy as np
import pytest

import conelab

CONFIGS = Path(os.environ.get("CONELAB_CONFIGS", Path(__file__).resolve().parents[2] / "configs"))

DISK = """
[domain]
dim = 2
[operator]
lambda0 = 1e-6
g = x
[analysis]
h = 0.1
cone_samples = 2000
"""


def test_config_round_trip():
    cfg = conelab.Config.load(str(CONFIGS / "slit.cfg"))
    again = conelab.Config.from_text(cfg.to_text())
    assert again == cfg
    assert again.hash() == cfg.hash()
    assert len(cfg.hash()) == 16


def test_missing_lambda0_warns():
    cfg = conelab.Config.from_text("[domain]\ndim = 2\n")
    assert any("lambda0" in w for w in cfg.warnings)


def test_parse_error_names_token():
    with pytest.raises(conelab.ValidationError, match=r"line 3.*'\^'"):
        conelab.Config.from_text("[domain]\ndim = 2\nconstraint = x^^2 > 0\n")


def test_linear_data_is_reproduced():
    sol = conelab.solve_fem(conelab.Config.from_text(DISK))
    assert sol["vertices"].shape[1] == 2
    assert sol["triangles"].shape[1] == 3
    np.testing.assert_allclose(sol["values"], sol["vertices"][:, 0], atol=1e-8)
    np.testing.assert_allclose(sol["gradients"][:, 0], 1.0, atol=1e-6)
    # Integral of |grad u|^2 = 1 over the (polygonal) unit disk.
    assert sol["energy"] == pytest.approx(math.pi, rel=0.02)


def test_smooth_boundary_point_holds():
    rep = conelab.check_cone(conelab.Config.from_text(DISK), [1.0, 0.0])
    assert rep["holds"]
    assert rep["clause1"] == pytest.approx(math.pi, rel=0.05)


def test_disk_is_unbounded():
    prof = conelab.estimate_p(conelab.Config.from_text(DISK), [0.2, 0.1])
    assert prof["p_star"] is None
    assert len(prof["slopes"]) == 25


def test_shell_walk_on_spheres():
    cfg = conelab.Config.load(str(CONFIGS / "shell.cfg"))
    cfg.walkers = 4000
    res = conelab.wos_estimate(cfg, [[0.75, 0.0, 0.0]])
    assert abs(res[0]["value"] - 1 / 0.75) <= 4 * res[0]["std_error"]


def test_run_command_is_deterministic(tmp_path):
    cfg = conelab.Config.from_text(DISK)
    cfg.points = [[1.0, 0.0]]
    cfg.out_dir = str(tmp_path)
    a = conelab.run_command("check-cone", cfg, write=True)
    b = conelab.run_command("check-cone", cfg)
    assert a["files"] == b["files"]
    text = (tmp_path / "check_cone.csv").read_text()
    assert text.startswith("# config-hash: " + cfg.hash())
    assert "t,clause1,clause2,alpha,holds,confidence" in text
    assert "check-cone" in conelab.commands


def test_three_dimensional_source_is_rejected():
    cfg = conelab.Config.from_text("[domain]\ndim = 3\n[operator]\nf = 1\n")
    with pytest.raises(conelab.ValidationError, match="volume source unsupported in 3D"):
        conelab.run_command("solve", cfg)
