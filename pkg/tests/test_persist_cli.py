import json

import numpy as np
import pytest
from click.testing import CliRunner

from kfphom import persist
from kfphom.cells import build_correctors
from kfphom.cli import main, regularity_radii
from kfphom.persist import CacheInvalid, ConfigError, RunConfig


@pytest.fixture
def cos_cfg():
    return RunConfig(potential=[[[1], 1.0]], cuts=[8, 16], order=3)


def test_config_round_trip(tmp_path, cos_cfg):
    cos_cfg.save(tmp_path / "c.json")
    back = RunConfig.load(tmp_path / "c.json")
    assert back == cos_cfg
    assert back.hash() == cos_cfg.hash()


def test_empty_config_gives_defaults(tmp_path):
    (tmp_path / "e.json").write_text("")
    assert RunConfig.load(tmp_path / "e.json") == RunConfig()


@pytest.mark.parametrize("bad", [
    {"potential": [[[1], "1+2j"]]},
    {"friction": [[-1.0]]},
    {"friction": [[1.0, 0.0], [0.0, 1.0]]},
    {"cuts": [0, 4]},
    {"unknown_key": 1},
    {"potential": [[[9], 1.0]], "cuts": [4, 8]},
    {"potential": [[[1, 0], 1.0]]},
])
def test_invalid_configs(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_corrector_hash_ignores_mc_settings(cos_cfg):
    other = RunConfig(**{**cos_cfg.to_dict(), "n_traj": 7, "seed": 3})
    assert other.hash(other.corrector_key()) == cos_cfg.hash(cos_cfg.corrector_key())
    assert other.hash() != cos_cfg.hash()


def test_cache_round_trip_is_exact(tmp_path, cos_cfg):
    pot, a = cos_cfg.potential_obj(), cos_cfg.friction_obj()
    cset = build_correctors(pot, a, 3, cos_cfg.cuts)
    h = cos_cfg.hash(cos_cfg.corrector_key())
    path = tmp_path / "c.kfpc"
    persist.save_correctors(path, cset, h)
    back = persist.load_correctors(path, pot, a, config_hash=h)
    for alpha, f in cset.phi.items():
        np.testing.assert_array_equal(back.phi[alpha].coeffs, f.coeffs)
    assert back.abar_alpha == cset.abar_alpha
    assert back.abar[0, 0] == cset.abar[0, 0]


def test_cache_detects_corruption(tmp_path, cos_cfg):
    pot, a = cos_cfg.potential_obj(), cos_cfg.friction_obj()
    cset = build_correctors(pot, a, 1, cos_cfg.cuts)
    h = cos_cfg.hash(cos_cfg.corrector_key())
    blob = bytearray(persist.encode_correctors(cset, h))
    blob[100] ^= 0x10
    with pytest.raises(CacheInvalid):
        persist.decode_correctors(bytes(blob), pot, a)
    with pytest.raises(CacheInvalid):
        persist.decode_correctors(bytes(blob[:40]), pot, a)
    with pytest.raises(CacheInvalid):
        persist.decode_correctors(persist.encode_correctors(cset, h), pot, a, config_hash=b"\0" * 32)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    persist.atomic_write(tmp_path / "x.bin", b"abc")
    persist.atomic_write(tmp_path / "x.bin", b"def")
    assert (tmp_path / "x.bin").read_bytes() == b"def"
    assert [p.name for p in tmp_path.iterdir()] == ["x.bin"]


def test_regularity_radii():
    assert regularity_radii(0, 256) == list(range(8, 33, 2))


# ---------------------------------------------------------------- CLI


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def invoke(*args, cfg=None):
        argv = list(args)
        if cfg is not None:
            path = tmp_path / "cfg.json"
            path.write_text(json.dumps(cfg))
            argv += ["--config", str(path)]
        argv += ["--out", str(tmp_path / "out")]
        return runner.invoke(main, argv, catch_exceptions=False)

    invoke.out = tmp_path / "out"
    return invoke


FREE = {"dim": 1, "cuts": [2, 8], "order": 2}


def test_cli_effdiff_free(run):
    res = run("effdiff", cfg=FREE)
    assert res.exit_code == 0
    assert json.loads(res.output) == {"a_eff": [[1.0]]}
    meta = json.loads((run.out / "effdiff.json").read_text())
    assert "config_hash" in meta and "versions" in meta


def test_cli_correctors_cache_hit_and_corruption(run, tmp_path):
    first = run("correctors", cfg=FREE)
    assert json.loads(first.output)["cache_hit"] is False
    second = run("correctors", cfg=FREE)
    assert json.loads(second.output)["cache_hit"] is True
    cache = next((tmp_path / "cache").glob("*.kfpc"))
    blob = bytearray(cache.read_bytes())
    blob[-20] ^= 1
    cache.write_bytes(bytes(blob))
    bad = CliRunner().invoke(main, ["correctors", "--config", str(tmp_path / "cfg.json"), "--out", str(run.out)])
    assert bad.exit_code == 1 and "invalid" in bad.output
    fixed = run("correctors", "--force", cfg=FREE)
    assert fixed.exit_code == 0
    assert (run.out / "correctors.csv").read_text().startswith("alpha,order,abar_alpha,residual")


def test_cli_rejects_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"friction": [[0.0]]}))
    res = CliRunner().invoke(main, ["effdiff", "--config", str(path)])
    assert res.exit_code == 1 and "invalid config" in res.output


def test_cli_mc_is_deterministic_across_threads(run):
    cfg = {**FREE, "n_traj": 3000, "T": 8.0}
    a = run("mc", "--snapshots", "8", "--seed", "5", cfg=cfg)
    table_a = (run.out / "mc.csv").read_text()
    b = run("mc", "--snapshots", "8", "--seed", "5", "--threads", "2", cfg=cfg)
    assert a.exit_code == 0 and a.output == b.output
    assert table_a == (run.out / "mc.csv").read_text()
    c = run("mc", "--snapshots", "8", "--seed", "6", cfg=cfg)
    assert c.output != a.output


def test_cli_mc_reports_step_error(run):
    res = CliRunner().invoke(main, ["mc", "--config", _write(run, {**FREE, "dt": 0.5, "T": 1.0}),
                                    "--out", str(run.out)])
    assert res.exit_code == 1 and "exceeds" in res.output


def _write(run, cfg):
    path = run.out.parent / "cfg2.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_cli_homog_allow_noise(run):
    cfg = {"dim": 1, "potential": [[[1], 1.0]], "cuts": [8, 16], "n_traj": 2000, "times": [4.0, 8.0],
           "t0s": [0.0]}
    res = run("homog", "--allow-noise", cfg=cfg)
    assert res.exit_code == 0
    assert (run.out / "homog.csv").exists()
    assert set(json.loads(res.output)) >= {"abar", "mc_abar"}


def test_cli_regularity_2d(run):
    cfg = {"dim": 2, "potential": [[[1, 0], 0.6], [[0, 1], 0.4]], "cuts": [4, 8], "m": [0], "R": 128}
    res = run("regularity", cfg=cfg)
    assert res.exit_code == 0
    rows = json.loads(res.output)["rows"]
    assert rows[0][0] == 0 and rows[0][4] == 1


@pytest.mark.slow
def test_cli_poly_selftest(run):
    res = run("poly-selftest")
    assert res.exit_code == 0, res.output
    assert res.output.count("PASS") == 5
