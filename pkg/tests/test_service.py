"""Service endpoints: request validation, error categories, happy paths."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from hrtfmeas.io.wavio import write_wav
from hrtfmeas.service.app import create_app

TOY_CONFIG = {
    "sources": 1, "taps": 48, "velocities_deg_per_s": [600.0],
    "methods": ["nlms_pseq"], "iterations": 1,
    "frame_len": 600, "lookback": 600, "lookahead": 600,
    "sphere": {"source_distance": 0.3, "ref_taps": 96,
               "synthesis_fft_size": 512, "support_taps": 48,
               "support_fade_taps": 12, "truncation_tail": 1e-3}}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"


def test_synthesize_inline(client):
    resp = client.post("/v1/synthesize-hrtf",
                       json={"angles": [0.0, 90.0, 180.0]})
    assert resp.status_code == 200
    body = resp.json()
    assert body["taps"] == 315
    assert len(body["responses"]) == 3
    peak90 = int(np.argmax(np.abs(body["responses"][1])))
    assert abs(peak90 - 105) <= 2


def test_synthesize_needs_angles_or_grid(client):
    resp = client.post("/v1/synthesize-hrtf", json={})
    assert resp.status_code == 400
    assert resp.json()["category"] == "validation"


def test_unknown_config_key_rejected(client, tmp_path):
    resp = client.post("/v1/experiment",
                       json={"config": {"tapps": 48},
                             "out_dir": str(tmp_path), "dry_run": True})
    assert resp.status_code == 400
    body = resp.json()
    assert body["category"] == "validation"
    assert "tapps" in body["detail"]


def test_experiment_dry_run(client, tmp_path):
    resp = client.post("/v1/experiment",
                       json={"config": TOY_CONFIG,
                             "out_dir": str(tmp_path / "exp"),
                             "dry_run": True})
    assert resp.status_code == 200
    body = resp.json()
    assert body["dry_run"] is True
    assert (tmp_path / "exp" / "plan.csv").exists()


def test_simulate_identify_evaluate_chain(client, tmp_path):
    sim_dir = tmp_path / "sim"
    resp = client.post("/v1/simulate",
                       json={"config": TOY_CONFIG,
                             "velocity_deg_per_s": 600.0,
                             "out_dir": str(sim_dir)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["achieved_snr_db"] == pytest.approx(60.0, abs=0.5)

    est = tmp_path / "est.hrirset"
    resp = client.post("/v1/identify",
                       json={"config": TOY_CONFIG, "method": "nlms_pseq",
                             "mic": str(sim_dir / "mic.wav"),
                             "excitation": str(sim_dir / "excitation.wav"),
                             "angles": str(sim_dir / "angle.csv"),
                             "out": str(est)})
    assert resp.status_code == 200, resp.text
    assert est.exists()

    resp = client.post("/v1/evaluate",
                       json={"estimates": str(est),
                             "out_dir": str(tmp_path / "eval")})
    assert resp.status_code == 200, resp.text
    body = resp.json()
    assert body["d_avg_db"] < -15.0
    assert body["d_avg_shifted_db"] < body["d_avg_db"]


def test_identify_missing_file_is_io_error(client, tmp_path):
    resp = client.post("/v1/identify",
                       json={"config": TOY_CONFIG, "method": "nlms_pseq",
                             "mic": str(tmp_path / "nothing.wav"),
                             "regen": {"kind": "pseq", "taps": 48,
                                       "channels": 1, "seed": 0},
                             "out": str(tmp_path / "x.hrirset")})
    assert resp.status_code == 500
    assert resp.json()["category"] == "io"


def test_ingest_validation_category(client, tmp_path):
    mic = tmp_path / "m.wav"
    exc = tmp_path / "e.wav"
    write_wav(mic, np.ones((1, 16)), 24000.0)
    write_wav(exc, np.ones((1, 16)), 48000.0)
    resp = client.post("/v1/ingest",
                       json={"mic": str(mic), "excitation": str(exc)})
    assert resp.status_code == 400
    assert "sample rate mismatch" in resp.json()["detail"]


def test_numerical_failure_category(client, tmp_path):
    # measurement noise so small the innovation variance underflows to a
    # non-positive value after the first step is impossible to build via the
    # config (sigma > 0 enforced); instead evaluate an archive with a
    # corrupted angle track to hit the validation side, then force numerical
    # failure by an EM run on a degenerate two-sample window
    sim_dir = tmp_path / "sim"
    client.post("/v1/simulate",
                json={"config": TOY_CONFIG, "velocity_deg_per_s": 600.0,
                      "out_dir": str(sim_dir)})
    cfg = dict(TOY_CONFIG)
    cfg["init"] = {"process_noise_scale": -1.0, "measurement_noise": 1e-12,
                   "initial_cov_scale": 1e-12}
    resp = client.post("/v1/identify",
                       json={"config": cfg, "method": "proposed",
                             "mic": str(sim_dir / "mic.wav"),
                             "excitation": str(sim_dir / "excitation.wav"),
                             "out": str(tmp_path / "bad.hrirset")})
    assert resp.status_code == 422, resp.text
    assert resp.json()["category"] == "numerical"
