import base64

import pytest
from fastapi.testclient import TestClient

from mmsynth.cli import main
from mmsynth.service import create_app


@pytest.fixture(scope="module")
def client(mini_run):
    ckpt, _, _ = mini_run
    app = create_app(str(ckpt))
    with TestClient(app) as c:
        yield c


def test_503_before_model_load():
    app = create_app(None)
    with TestClient(app) as c:
        assert c.get("/schema").status_code == 503
        assert c.post("/synthesize", json={"attributes": {}}).status_code == 503


def test_schema_stable(client):
    a = client.get("/schema")
    b = client.get("/schema")
    assert a.status_code == 200
    assert a.json() == b.json()
    body = a.json()
    assert body["attributes"] == ["round", "large", "bright"]
    assert body["modalities"] == ["color", "sketch", "thermal"]
    assert body["max_resolution"] == 8
    assert body["model_hash"]


def test_synthesize_deterministic_for_seed(client):
    req = {"attributes": {"round": 1, "large": -1, "bright": 1}, "seed": 7}
    a = client.post("/synthesize", json=req).json()
    b = client.post("/synthesize", json=req).json()
    assert a == b
    assert set(a["images"]) == {"color", "sketch", "thermal"}
    assert a["seed"] == 7


def test_synthesize_echoes_replayable_seed(client):
    req = {"attributes": {"round": 1}}
    a = client.post("/synthesize", json=req).json()
    replay = client.post(
        "/synthesize", json={"attributes": {"round": 1}, "seed": a["seed"]}
    ).json()
    assert replay["images"] == a["images"]
    # unspecified attributes default to the neutral midpoint and are echoed
    assert a["attributes"] == {"round": 1.0, "large": 0.0, "bright": 0.0}


def test_synthesize_modality_subset(client):
    req = {"attributes": {}, "seed": 1, "modalities": ["sketch"]}
    body = client.post("/synthesize", json=req).json()
    assert list(body["images"]) == ["sketch"]


def test_synthesize_error_codes(client):
    assert (
        client.post("/synthesize", json={"attributes": {"nope": 1}, "seed": 0}).status_code
        == 400
    )
    assert (
        client.post("/synthesize", json={"attributes": {"round": 5.0}, "seed": 0}).status_code
        == 400
    )
    assert (
        client.post(
            "/synthesize", json={"attributes": {}, "seed": 0, "modalities": ["depth"]}
        ).status_code
        == 400
    )
    assert (
        client.post(
            "/synthesize", json={"attributes": {}, "seed": 0, "resolution": 16}
        ).status_code
        == 422
    )


def test_synthesize_reduced_resolution(client):
    body = client.post(
        "/synthesize", json={"attributes": {}, "seed": 2, "resolution": 4}
    )
    assert body.status_code == 200
    png = base64.b64decode(body.json()["images"]["color"])
    from PIL import Image
    import io

    img = Image.open(io.BytesIO(png))
    assert img.size == (4, 4)


def test_interpolate_endpoints_match_direct_synthesis(client):
    base = {"attributes": {"round": -1, "large": 1, "bright": 1}, "seed": 11}
    target = {"attributes": {"round": 1, "large": 1, "bright": 1}, "seed": 11}
    sweep = client.post(
        "/interpolate", json={"from": base, "to": target, "steps": 2}
    ).json()
    assert len(sweep["frames"]) == 2
    direct_from = client.post("/synthesize", json=base).json()
    direct_to = client.post("/synthesize", json=target).json()
    assert sweep["frames"][0]["images"] == direct_from["images"]
    assert sweep["frames"][-1]["images"] == direct_to["images"]
    assert sweep["frames"][0]["seed"] == 11


def test_interpolate_identical_codes(client):
    code = {"attributes": {"round": 1}, "seed": 3}
    sweep = client.post(
        "/interpolate", json={"from": code, "to": code, "steps": 4}
    ).json()
    first = sweep["frames"][0]["images"]
    assert all(f["images"] == first for f in sweep["frames"])


def test_interpolate_step_bounds(client):
    code = {"attributes": {}, "seed": 0}
    for steps in (1, 34):
        r = client.post("/interpolate", json={"from": code, "to": code, "steps": steps})
        assert r.status_code == 400


def test_interpolate_matches_cli_sweep_bit_for_bit(client, mini_run, tmp_path):
    ckpt, _, _ = mini_run
    out = tmp_path / "sweep"
    rc = main(
        [
            "sweep",
            "--checkpoint",
            str(ckpt),
            "--flip",
            "round",
            "--steps",
            "5",
            "--seed",
            "3",
            "--attributes",
            "round=-1",
            "large=1",
            "bright=-1",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    base_attrs = {"round": -1, "large": 1, "bright": -1}
    flipped = dict(base_attrs, round=1)
    sweep = client.post(
        "/interpolate",
        json={
            "from": {"attributes": base_attrs, "seed": 3},
            "to": {"attributes": flipped, "seed": 3},
            "steps": 5,
        },
    ).json()
    for k, frame in enumerate(sweep["frames"]):
        for name in ("color", "sketch", "thermal"):
            file_bytes = (out / f"frame_{k:02d}_{name}.png").read_bytes()
            assert base64.b64decode(frame["images"][name]) == file_bytes
