import numpy as np
import pytest
from PIL import Image

from mmsynth.codec import ModalityCode
from mmsynth.data import (
    DatasetManifest,
    ManifestRecord,
    SynthSpec,
    generate_synth_dataset,
    load_manifest,
    manifest_text,
    preprocess,
    render_instance,
    sample_batch,
    write_manifest,
)
from mmsynth.errors import DataError, SchemaError, ValidationError
from mmsynth.images import save_png, to_uint8


def small_dataset(tmp_path, samples=12, seed=0, resolution=16):
    spec = SynthSpec(resolution=resolution, samples_per_modality=samples, seed=seed)
    return generate_synth_dataset(spec, tmp_path / "data")


def test_manifest_roundtrip(tmp_path):
    m = small_dataset(tmp_path)
    text1 = manifest_text(m)
    p2 = tmp_path / "copy.txt"
    write_manifest(m, p2)
    m2 = load_manifest(p2)
    assert manifest_text(m2) == text1
    assert m2.modalities == m.modalities
    assert m2.schema.names == m.schema.names
    for name in m.modalities:
        assert [r.path for r in m2.records[name]] == [r.path for r in m.records[name]]
        for a, b in zip(m2.records[name], m.records[name]):
            assert np.array_equal(a.attributes, b.attributes)


def test_manifest_allows_unequal_modalities(tmp_path):
    text = "\n".join(
        [
            "[modalities]",
            "color",
            "sketch",
            "[attributes]",
            "round",
            "[records]",
        ]
        + [f"color img{i}.png 1" for i in range(4)]
        + [f"sketch img{i}.png -1" for i in range(2)]
    )
    p = tmp_path / "m.txt"
    p.write_text(text + "\n")
    m = load_manifest(p)
    assert m.counts() == {"color": 4, "sketch": 2}


def test_manifest_rejects_wrong_attribute_count(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text(
        "[modalities]\ncolor\n[attributes]\na\nb\nc\nd\ne\n[records]\ncolor x.png 1 1 1 1\n"
    )
    with pytest.raises(SchemaError):
        load_manifest(p)


def test_manifest_rejects_unknown_modality(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("[modalities]\ncolor\n[attributes]\na\n[records]\nthermal x.png 1\n")
    with pytest.raises(DataError):
        load_manifest(p)


def test_manifest_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_manifest(tmp_path / "nope.txt")


def test_preprocess_affine_map(tmp_path):
    for value, expected in ((255, 1.0), (0, -1.0)):
        img = np.full((8, 8, 3), value, dtype=np.uint8)
        p = tmp_path / f"v{value}.png"
        Image.fromarray(img).save(p)
        out = preprocess(p, 8)
        assert out.shape == (3, 8, 8)
        assert np.allclose(out, expected)
    # mid-gray is within one quantization step of zero
    Image.fromarray(np.full((8, 8, 3), 128, dtype=np.uint8)).save(tmp_path / "g.png")
    assert np.abs(preprocess(tmp_path / "g.png", 8)).max() <= 1.0 / 127.5


def test_preprocess_replicates_grayscale(tmp_path):
    img = np.arange(64, dtype=np.uint8).reshape(8, 8)
    p = tmp_path / "gray.png"
    Image.fromarray(img, mode="L").save(p)
    out = preprocess(p, 8)
    assert np.array_equal(out[0], out[1])
    assert np.array_equal(out[1], out[2])


def test_preprocess_downscales_checkerboard_to_uniform(tmp_path):
    yy, xx = np.mgrid[0:256, 0:256]
    board = ((xx + yy) % 2 * 255).astype(np.uint8)
    p = tmp_path / "board.png"
    Image.fromarray(np.stack([board] * 3, axis=2)).save(p)
    out = preprocess(p, 4)
    assert np.abs(out).max() < 1e-2


def test_preprocess_idempotent_at_target_resolution(tmp_path):
    m = small_dataset(tmp_path, samples=2)
    rec = m.records["color"][0]
    once = preprocess(m.root / rec.path, 16)
    save_png(once, tmp_path / "again.png")
    twice = preprocess(tmp_path / "again.png", 16)
    # identical after one quantization cycle
    assert np.array_equal(to_uint8(once), to_uint8(twice))


def test_preprocess_rejects_undecodable(tmp_path):
    p = tmp_path / "bad.png"
    p.write_bytes(b"not a png")
    with pytest.raises(DataError):
        preprocess(p, 8)


def test_sample_batch_labels_and_shapes(tmp_path):
    m = small_dataset(tmp_path)
    rng = np.random.default_rng(0)
    images, labels = sample_batch(m, ModalityCode(1, 3), 16, rng, 16)
    assert images.shape == (16, 3, 16, 16)
    assert labels.shape == (16, 6)
    assert np.all(labels[:, 3:] == np.array([0.0, 1.0, 0.0]))
    assert np.all(np.abs(labels[:, :3]) == 1.0)


def test_sample_batch_single_record_modality(tmp_path):
    m = small_dataset(tmp_path, samples=1)
    rng = np.random.default_rng(0)
    images, labels = sample_batch(m, 0, 5, rng, 16)
    assert np.array_equal(images[0], images[1])
    assert np.array_equal(labels[0], labels[1])


def test_sample_batch_empty_modality(tmp_path):
    m = small_dataset(tmp_path, samples=2)
    m.records["sketch"] = []
    with pytest.raises(DataError):
        sample_batch(m, 1, 4, np.random.default_rng(0), 16)


def test_sample_batch_frequencies_match_dataset(tmp_path):
    m = small_dataset(tmp_path, samples=200)
    rng = np.random.default_rng(1)
    recs = m.records["color"]
    data_freq = np.mean([r.attributes for r in recs], axis=0)
    _, labels = sample_batch(m, 0, 10_000, rng, 8)
    draw_freq = labels[:, :3].mean(axis=0)
    assert np.abs(draw_freq - data_freq).max() < 0.03 * 2  # +-3% of the +-1 range


def test_synth_dataset_deterministic(tmp_path):
    spec = SynthSpec(resolution=16, samples_per_modality=3, seed=5)
    m1 = generate_synth_dataset(spec, tmp_path / "a")
    m2 = generate_synth_dataset(spec, tmp_path / "b")
    assert manifest_text(m1) == manifest_text(m2)
    for name in m1.modalities:
        for r1, r2 in zip(m1.records[name], m2.records[name]):
            assert (m1.root / r1.path).read_bytes() == (m2.root / r2.path).read_bytes()


def test_render_modalities_share_geometry_exactly():
    rng = np.random.default_rng(3)
    out = render_instance(np.array([1.0, 1.0, 1.0]), rng, 32)
    mask = out["mask"]
    assert mask.any()
    # circle, large, bright: foreground must be brighter than background
    color = out["color"]
    assert color[:, mask].mean() > color[:, ~mask].mean()
    # sketch edges hug the mask boundary: edge pixels within 1px of the mask outline
    sketch = out["sketch"][0]
    edge = sketch > sketch.min() + 1e-6
    grown = np.pad(mask, 1)
    neighborhood = np.zeros_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            neighborhood |= grown[1 + dy : 33 + dy, 1 + dx : 33 + dx]
    assert np.all(~edge | neighborhood)
    # identical geometry across modalities: recompute IoU of foreground masks
    # (the thermal blue channel carries the scene intensity directly)
    thermal_fg = out["thermal"][2] > out["thermal"][2].min() + 1e-6
    inter = (mask & thermal_fg).sum()
    union = (mask | thermal_fg).sum()
    assert inter / union == 1.0


def test_render_respects_shape_attribute():
    rng1 = np.random.default_rng(10)
    rng2 = np.random.default_rng(10)
    circle = render_instance(np.array([1.0, 1.0, 1.0]), rng1, 32)["mask"]
    square = render_instance(np.array([-1.0, 1.0, 1.0]), rng2, 32)["mask"]
    assert circle.sum() != square.sum() or not np.array_equal(circle, square)
    # squares have straight edges: row widths constant in the middle band
    rows = np.where(square.any(axis=1))[0]
    widths = square[rows].sum(axis=1)
    assert len(set(widths.tolist())) == 1


def test_render_size_and_brightness_monotone():
    big = render_instance(np.array([1.0, 1.0, 1.0]), np.random.default_rng(0), 32)
    small = render_instance(np.array([1.0, -1.0, 1.0]), np.random.default_rng(0), 32)
    assert big["mask"].sum() > small["mask"].sum()
    bright = render_instance(np.array([1.0, 1.0, 1.0]), np.random.default_rng(0), 32)
    dark = render_instance(np.array([1.0, 1.0, -1.0]), np.random.default_rng(0), 32)
    bm, dm = bright["mask"], dark["mask"]
    assert bright["color"][:, bm].mean() > dark["color"][:, dm].mean()


def test_synth_spec_validation():
    with pytest.raises(ValidationError):
        SynthSpec(c=4)
    with pytest.raises(ValidationError):
        SynthSpec(d_a=2)
    with pytest.raises(ValidationError):
        SynthSpec(resolution=4)
