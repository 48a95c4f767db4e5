import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from lcdecay import tensor
from lcdecay.cli_io import cli
from lcdecay.cli_io.config import (ConfigError, RunConfig, dump_config, load_config,
                                   parse_config, random_smooth_q, solenoidal_blob,
                                   synthesize_initial_data)
from lcdecay.cli_io.simulate import resume, run, step_count
from lcdecay.diagnostics import read_csv
from lcdecay.potentials import verify_hypotheses
from lcdecay.spectral import PeriodicGrid, read_checkpoint

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example.yaml"

SMALL = """
grid: {n: 16, L: 6.283185307179586}
time: {dt: 0.01, T: 0.2, record_interval: 5}
model: {a: 1.0, b: 0.0, c: 1.0}
init: {u_kind: taylor_green, q_kind: random_smooth, amplitude_u: 0.1, amplitude_q: 0.1, seed: 2}
"""


def small_cfg(tmp_path, **sections):
    cfg = parse_config(SMALL)
    cfg.output.csv_path = str(tmp_path / "d.csv")
    for sec, kv in sections.items():
        setattr(cfg, sec, replace(getattr(cfg, sec), **kv))
    return cfg


def write_cfg(tmp_path, cfg, name="c.yaml"):
    p = tmp_path / name
    p.write_text(dump_config(cfg))
    return str(p)


def test_example_config_parses():
    cfg = load_config(EXAMPLE)
    assert cfg.grid.n == 32 and cfg.time.dt == 1e-3 and cfg.model.b == 0.5
    assert cfg.init.seed == 7 and cfg.flow.tol is None


def test_defaults_and_string_floats():
    cfg = parse_config("")
    assert cfg == RunConfig()
    cfg = parse_config("time: {dt: 1e-3}\nflow: {tol: 1e-8}")
    assert cfg.time.dt == 1e-3 and cfg.flow.tol == 1e-8


@pytest.mark.parametrize("text, fragment", [
    ("grid: {n: 12}", "grid.n: power of two"),
    ("grid: {n: 4}", "grid.n: power of two"),
    ("time: {dt: -0.1}", "time.dt: must be > 0"),
    ("time: {T: -1}", "time.T: must be >= 0"),
    ("grid: {m: 3}", "grid.m: unknown key"),
    ("mesh: {n: 8}", "mesh: unknown section"),
    ("model: {linearized: 1}", "model.linearized: expected true/false"),
    ("init: {q_kind: sphere}", "init.q_kind: one of"),
    ("analysis: {beta: 0.7}", "analysis.beta: must lie in [0, 1/2]"),
    ("analysis: {fit_window: [3, 1]}", "analysis.fit_window"),
    ("time: {dt: .nan}", "time.dt: must be finite"),
    ("[1, 2", "invalid YAML"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert any(fragment in v for v in exc.value.violations)


def test_config_reports_every_violation():
    with pytest.raises(ConfigError) as exc:
        parse_config("grid: {n: 12, L: 0}\ntime: {dt: 0}")
    assert len(exc.value.violations) == 3


def test_config_round_trip():
    cfg = load_config(EXAMPLE)
    cfg.analysis.fit_window = [1.0, 5.0]
    cfg.output.checkpoint_path = "ck.bin"
    assert parse_config(dump_config(cfg)) == cfg


def test_zero_kinds_give_zero_state():
    cfg = parse_config("grid: {n: 8}\ninit: {u_kind: zero, q_kind: zero}")
    s = synthesize_initial_data(cfg, cfg.make_grid())
    assert np.all(s.u.data == 0.0) and np.all(s.q.data == 0.0) and s.t == 0.0


def test_solenoidal_blob_is_divergence_free():
    g = PeriodicGrid(32, 10.0)
    u = solenoidal_blob(g, 1.0, 1.5)
    div = g.inverse(g.div_hat(g.forward(u)))
    l2 = math.sqrt(g.integrate(np.sum(u * u, axis=0)))
    assert math.sqrt(g.integrate(div * div)) <= 1e-10 * l2
    assert np.max(np.abs(np.mean(u, axis=(1, 2, 3)))) < 1e-15


def test_random_smooth_q_sup_and_seed():
    g = PeriodicGrid(16, 5.0)
    a = random_smooth_q(g, 0.3, 1.0, np.random.default_rng(5))
    b = random_smooth_q(g, 0.3, 1.0, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
    assert math.sqrt(np.max(tensor.norm2(a))) == pytest.approx(0.3, rel=1e-14)
    assert np.all(random_smooth_q(g, 0.0, 1.0, np.random.default_rng(5)) == 0.0)


def test_amplitude_above_r2_rejected():
    cfg = parse_config("grid: {n: 8}\ninit: {q_kind: gaussian_blob, amplitude_q: 100.0}")
    rep = verify_hypotheses(cfg.potential())
    with pytest.raises(ConfigError):
        synthesize_initial_data(cfg, cfg.make_grid(), rep)


def test_step_count():
    assert step_count(1.0, 0.1) == 10
    assert step_count(1.05, 0.1) == 11
    assert step_count(0.0, 0.1) == 0


def test_run_records_and_files(tmp_path):
    cfg = small_cfg(tmp_path)
    res = run(cfg)
    assert [r.t for r in res.reports] == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])
    rows = read_csv(cfg.output.csv_path)
    assert len(rows) == 5
    assert Path(cfg.output.csv_path + ".meta.json").exists()
    assert res.metadata["theorem_scope"] == "inside theorem scope"


def test_zero_horizon_records_initial_only(tmp_path):
    cfg = small_cfg(tmp_path, time={"T": 0.0})
    res = run(cfg, write_files=False)
    assert len(res.reports) == 1 and res.steps == 0


def test_fixed_seed_reproducible_checkpoints(tmp_path):
    paths = []
    for i in range(2):
        p = tmp_path / f"ck{i}.bin"
        cfg = small_cfg(tmp_path, output={"checkpoint_path": str(p), "checkpoint_interval": 10,
                                          "csv_path": str(tmp_path / f"d{i}.csv")})
        run(cfg)
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_resume_matches_uninterrupted_run(tmp_path):
    ck = {"checkpoint_interval": 10}
    full = small_cfg(tmp_path, output=dict(ck, checkpoint_path=str(tmp_path / "full.bin")))
    ref = run(full, write_files=True)
    half = small_cfg(tmp_path, time={"T": 0.1},
                     output=dict(ck, checkpoint_path=str(tmp_path / "half.bin"),
                                 csv_path=str(tmp_path / "half.csv")))
    run(half)
    _, t, _, _ = read_checkpoint(tmp_path / "half.bin")
    assert t == pytest.approx(0.1)
    cont = small_cfg(tmp_path, output=dict(ck, checkpoint_path=str(tmp_path / "cont.bin"),
                                           csv_path=str(tmp_path / "cont.csv")))
    res = resume(tmp_path / "half.bin", cont)
    assert res.metadata["resumed_step"] == 10
    assert [r.row() for r in res.reports] == [r.row() for r in ref.reports[2:]]
    np.testing.assert_array_equal(res.state.u.data, ref.state.u.data)
    np.testing.assert_array_equal(res.state.q.data, ref.state.q.data)


def test_resume_rejects_grid_mismatch(tmp_path):
    cfg = small_cfg(tmp_path, time={"T": 0.1},
                    output={"checkpoint_path": str(tmp_path / "a.bin"), "checkpoint_interval": 10})
    run(cfg)
    other = small_cfg(tmp_path, grid={"n": 8})
    with pytest.raises(ValueError):
        resume(tmp_path / "a.bin", other)


def test_cli_run(tmp_path):
    cfg = small_cfg(tmp_path)
    out = io.StringIO()
    csv = str(tmp_path / "cli.csv")
    assert cli.main(["run", write_cfg(tmp_path, cfg), "--csv", csv], out) == cli.EXIT_OK
    text = out.getvalue()
    assert f"csv={csv}" in text and "records=5" in text
    assert len(read_csv(csv)) >= 2


def test_cli_verify(tmp_path):
    out = io.StringIO()
    cfg = small_cfg(tmp_path)
    assert cli.main(["verify", write_cfg(tmp_path, cfg)], out) == cli.EXIT_OK
    text = out.getvalue()
    assert "i6_ok=true" in text and "i7_ok=true" in text
    bad = small_cfg(tmp_path, model={"a": -1.0})
    out = io.StringIO()
    assert cli.main(["verify", write_cfg(tmp_path, bad, "bad.yaml")], out) == cli.EXIT_INVALID
    assert "i6_ok=false" in out.getvalue()


def test_cli_flow_and_oracle(tmp_path):
    cfg = small_cfg(tmp_path, init={"u_kind": "zero", "q_kind": "gaussian_blob",
                                    "amplitude_q": 0.2, "width": 1.0},
                    flow={"dt": 0.1, "max_iter": 50, "tol": None},
                    analysis={"oracle_horizon": 100.0})
    path = write_cfg(tmp_path, cfg)
    out = io.StringIO()
    assert cli.main(["flow", path], out) == cli.EXIT_OK
    assert "converged=" in out.getvalue()
    out = io.StringIO()
    assert cli.main(["oracle", path], out) == cli.EXIT_OK
    assert "cascade_exponent[3]=1.5" in out.getvalue()
    assert "certified_exponent" in out.getvalue()


def test_cli_invalid_inputs(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("grid: {n: 12}\n")
    assert cli.main(["run", str(p)], io.StringIO()) == cli.EXIT_INVALID
    assert "grid.n" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.yaml")], io.StringIO()) == cli.EXIT_INVALID
    good = write_cfg(tmp_path, small_cfg(tmp_path))
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"junk")
    assert cli.main(["resume", str(junk), good], io.StringIO()) == cli.EXIT_INVALID
    assert cli.main(["--threads", "0", "run", good], io.StringIO()) == cli.EXIT_INVALID


def test_cli_numerical_failure(tmp_path):
    cfg = small_cfg(tmp_path, time={"dt": 1.0, "T": 200.0, "record_interval": 50},
                    model={"a": 1.0, "b": 0.0, "c": 1.0},
                    init={"u_kind": "taylor_green", "amplitude_u": 1e6})
    assert cli.main(["run", write_cfg(tmp_path, cfg)], io.StringIO()) == cli.EXIT_NUMERICAL
