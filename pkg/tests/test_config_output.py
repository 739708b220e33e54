import numpy as np
import pytest

from ttsfv.config import ConfigError, RunConfig, from_dict, load_config
from ttsfv.output import emit_outputs, read_json, read_table, write_field, write_table
from ttsfv.stats import StatField

TOML = """
scenario = "burgers-beta"
mode = "run"
seed = 7
output = "out/burgers"

[mesh]
cells = 256
stochastic_cells = 32

[solver]
epsilon_tt = 9e-4
max_rank = [16, 8]
integrator = "SSP33"

[study]
grids = [32, 64]
norm = "L2"
"""


def test_load_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(TOML)
    cfg = load_config(p)
    assert cfg.scenario == "burgers-beta" and cfg.seed == 7
    assert cfg.mesh.cells == 256
    assert cfg.solver.max_rank == [16, 8]
    assert cfg.study.grids == [32, 64] and cfg.study.norm == "L2"
    assert cfg.study.repeats == 3
    assert from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("text", [
    'scenaro = "advection"',
    '[solver]\nepsilon = 1e-3',
    '[mesh]\ncells = -4',
    '[solver]\ncfl = 1.5',
    'mode = "plot"',
    '[study]\nnorm = "H1"',
    'mesh = 3',
    'scenario = ',
])
def test_bad_config_rejected(tmp_path, text):
    p = tmp_path / "bad.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_defaults_validate():
    assert RunConfig().validate().mode == "run"


def test_table_reingest_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    data = rng.standard_normal((6, 3)) * 10.0 ** rng.integers(-300, 300, (6, 3))
    path = write_table(tmp_path / "t.csv", ["a", "b", "c"], data.tolist())
    header, back = read_table(path)
    assert header == ["a", "b", "c"]
    assert np.array_equal(back, data)


def test_field_rows_per_cell(tmp_path):
    x = np.array([0.125, 0.375, 0.625, 0.875])
    f = StatField("u", [x], np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 0.1, 0.2, 0.3]), 0.5)
    path = write_field(tmp_path / "u.csv", f)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 5
    assert lines[0] == "x,expectation,std"
    header, back = read_table(path)
    assert np.array_equal(back[:, 0], x) and np.array_equal(back[:, 2], f.std)


def test_field_2d_layout(tmp_path):
    c = [np.array([0.25, 0.75]), np.array([0.1, 0.3, 0.5])]
    mean = np.arange(6.0).reshape(2, 3)
    path = write_field(tmp_path / "f.csv", StatField("rho", c, mean, 0 * mean, 0.0))
    header, back = read_table(path)
    assert header == ["x", "y", "expectation", "std"]
    assert back[4].tolist() == [0.75, 0.3, 4.0, 0.0]


def test_metadata_roundtrip(tmp_path):
    f = StatField("u", [np.array([0.5])], np.array([1.0]), np.array([0.0]), 0.25)
    cfg = RunConfig().to_dict()
    paths = emit_outputs(tmp_path, "demo", [f], config=cfg, extra={"note": np.float64(1.5)})
    meta = read_json(paths[-1])
    assert meta["config"] == cfg
    assert meta["time"] == 0.25 and meta["note"] == 1.5
