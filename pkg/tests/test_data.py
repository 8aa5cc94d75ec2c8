import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from swinauth.data.manifest import (
    PaintingRecord,
    label_counts,
    load_patch,
    prepare_cache,
    read_cache_index,
    read_manifest,
    write_manifest,
)
from swinauth.data.patches import extract_patches, grid_exponent, load_image, patch_count
from swinauth.data.plan import (
    REFINED_FULL,
    STANDARD_FULL,
    ExperimentPlan,
    PartitionTargets,
    assign_weights,
    build_plan,
    proportional_targets,
)
from swinauth.data.resample import cubic_kernel, resample_batch, resample_bicubic
from swinauth.errors import IngestionError, PlanningError, UsageError


@pytest.mark.parametrize(
    "side, p", [(1, 0), (400, 0), (512, 0), (513, 1), (600, 1), (1024, 1), (1025, 2), (1200, 2), (5000, 2)]
)
def test_grid_exponent(side, p):
    assert grid_exponent(side) == p


def test_grid_exponent_rejects_zero():
    with pytest.raises(ValueError):
        grid_exponent(0)


@pytest.mark.parametrize("side, count", [(400, 1), (600, 5), (1200, 17)])
def test_sub_image_counts(side, count, rng):
    img = rng.random((side, side + 11, 3)).astype(np.float32)
    patches = extract_patches(img)
    assert len(patches) == count == patch_count(grid_exponent(side))
    assert [p.kind for p in patches].count("center_crop") == 1
    assert patches[-1].kind == "center_crop"
    for p in patches:
        assert p.pixels.shape == (256, 256, 3)
        assert p.pixels.min() >= 0.0 and p.pixels.max() <= 1.0


def test_patch_geometry_square():
    patches = extract_patches(np.zeros((1024, 1024, 3), np.float32), p=1)
    assert [p.box for p in patches[:4]] == [(0, 0, 512, 512), (0, 512, 512, 512), (512, 0, 512, 512), (512, 512, 512, 512)]
    assert patches[4].box == (0, 0, 1024, 1024)


def test_center_crop_of_wide_image():
    patches = extract_patches(np.zeros((1024, 2048, 3), np.float32), p=0)
    assert patches[0].box == (0, 512, 1024, 1024)


def test_constant_image_gives_constant_patches():
    patches = extract_patches(np.full((700, 900, 3), 0.3, np.float32))
    for p in patches:
        np.testing.assert_allclose(p.pixels, 0.3, atol=1e-6)


def test_catmull_rom_kernel_values():
    np.testing.assert_allclose(cubic_kernel([0, 1, 2, 3]), [1, 0, 0, 0])
    # a = -0.5 at x = 0.5: (a+2)/8 - (a+3)/4 + 1
    assert cubic_kernel(0.5) == pytest.approx(1.5 / 8 - 2.5 / 4 + 1)
    assert cubic_kernel(1.5) == pytest.approx(-0.5 * 3.375 + 2.5 * 2.25 - 4 * 1.5 + 2)


def _direct_resample_1d(values, n_out):
    """Evaluate the stretched kernel tap by tap, clamping taps to the edge."""
    n_in = len(values)
    scale = n_in / n_out
    stretch = max(scale, 1.0)
    out = []
    for o in range(n_out):
        centre = (o + 0.5) * scale - 0.5
        acc = norm = 0.0
        for t in range(-20, n_in + 20):
            k = float(cubic_kernel((t - centre) / stretch))
            acc += k * values[min(max(t, 0), n_in - 1)]
            norm += k
        out.append(acc / norm)
    return np.array(out)


def test_ramp_4x4_to_2x2_matches_direct_kernel_sums():
    img = np.arange(16, dtype=np.float64).reshape(4, 4) / 15.0
    rows = np.stack([_direct_resample_1d(img[:, j], 2) for j in range(4)], axis=1)
    want = np.stack([_direct_resample_1d(rows[i], 2) for i in range(2)])
    np.testing.assert_allclose(resample_bicubic(img, 2, 2), want, atol=1e-12)


def test_resample_upscale_matches_direct(rng):
    v = rng.random(5)
    got = resample_bicubic(v[:, None], 9, 1)[:, 0]
    np.testing.assert_allclose(got, _direct_resample_1d(v, 9), atol=1e-12)


def test_resample_identity_and_constant(rng):
    img = rng.random((13, 17, 3)).astype(np.float32)
    np.testing.assert_allclose(resample_bicubic(img, 13, 17), img, atol=1e-6)
    const = np.full((256, 256, 3), 0.42)
    np.testing.assert_allclose(resample_bicubic(const, 224, 224), 0.42, atol=1e-12)


def test_resample_batch_equals_per_image(rng):
    batch = rng.random((3, 20, 24, 3))
    one = np.stack([resample_bicubic(im, 7, 9) for im in batch])
    np.testing.assert_allclose(resample_batch(batch, 7, 9), one, atol=1e-12)


# -- manifest and cache -----------------------------------------------------------


def _write_png(path, h, w, value=128):
    Image.fromarray(np.full((h, w, 3), value, np.uint8)).save(path)


def test_manifest_roundtrip(tmp_path):
    records = [PaintingRecord("a1", "a1.png", "authentic"), PaintingRecord("i1", "i1.png", "imitation", "After X")]
    write_manifest(tmp_path / "m.csv", records)
    back = read_manifest(tmp_path / "m.csv")
    assert [r.painting_id for r in back] == ["a1", "i1"]
    assert back[1].note == "After X"
    assert back[0].path == str(tmp_path / "a1.png")
    assert label_counts(back) == {"authentic": 1, "imitation": 1, "proxy": 0}


@pytest.mark.parametrize(
    "body, message",
    [
        ("painting_id,path,label,note\na,x.png,fake,\n", "label"),
        ("painting_id,path,label,note\na,x.png,authentic,\na,y.png,proxy,\n", "duplicate"),
        ("id,path,label\n", "header"),
        ("painting_id,path,label,note\n../a,x.png,authentic,\n", "invalid painting id"),
        ("painting_id,path,label,note\na,,authentic,\n", "missing image path"),
    ],
)
def test_manifest_errors(tmp_path, body, message):
    (tmp_path / "m.csv").write_text(body)
    with pytest.raises(IngestionError, match=message):
        read_manifest(tmp_path / "m.csv")


def test_manifest_tab_delimited(tmp_path):
    (tmp_path / "m.tsv").write_text("painting_id\tpath\tlabel\tnote\nq\tq.png\tPROXY\t\n")
    assert read_manifest(tmp_path / "m.tsv")[0].label == "proxy"


def test_unreadable_image_names_path(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(IngestionError, match="bad.png"):
        load_image(bad)


def test_prepare_cache(tmp_path):
    _write_png(tmp_path / "a.png", 400, 500)
    _write_png(tmp_path / "b.png", 600, 700, value=255)
    (tmp_path / "c.png").write_bytes(b"junk")
    records = [
        PaintingRecord("a", str(tmp_path / "a.png"), "authentic"),
        PaintingRecord("b", str(tmp_path / "b.png"), "imitation"),
        PaintingRecord("c", str(tmp_path / "c.png"), "proxy"),
    ]
    summary = prepare_cache(records, tmp_path / "cache")
    assert summary["paintings"] == 2 and summary["patches"] == 6
    assert summary["patches_per_class"] == {"authentic": 1, "imitation": 5, "proxy": 0}
    assert len(summary["failures"]) == 1 and "c.png" in summary["failures"][0][0]
    index = read_cache_index(tmp_path / "cache")
    assert [(r.painting_id, r.patch_index, r.kind) for r in index][:2] == [("a", 0, "center_crop"), ("b", 0, "grid")]
    px = load_patch(tmp_path / "cache", index[-1])
    assert px.shape == (256, 256, 3) and px.max() == 1.0
    with pytest.raises(UsageError):
        prepare_cache(records, tmp_path / "cache")
    prepare_cache(records[:1], tmp_path / "cache", force=True)
    assert len(read_cache_index(tmp_path / "cache")) == 1


def test_missing_cache_index(tmp_path):
    with pytest.raises(IngestionError, match="prepare"):
        read_cache_index(tmp_path)


# -- plans ------------------------------------------------------------------------


def _records(n_auth, n_im, n_proxy=0):
    recs = [PaintingRecord(f"a{i:04d}", "x", "authentic") for i in range(n_auth)]
    recs += [PaintingRecord(f"i{i:04d}", "x", "imitation") for i in range(n_im)]
    recs += [PaintingRecord(f"p{i:04d}", "x", "proxy") for i in range(n_proxy)]
    return recs


def test_full_scale_presets():
    assert STANDARD_FULL == PartitionTargets((520, 78, 73), (523, 65, 65))
    assert REFINED_FULL == PartitionTargets((87, 20, 30), (87, 20, 30))


def test_standard_full_scale_plan():
    plan = build_plan(_records(700, 100, 600), STANDARD_FULL, n=2, master_seed=1)
    for split in plan.splits:
        auth = [p for p in split.training if plan.labels[p] == "authentic"]
        assert len(auth) == 520 and len(split.training) == 1043
        assert len(split.validation) == 78 + 65 and len(split.test) == 73 + 65


def test_refined_full_scale_plan():
    plan = build_plan(_records(200, 137), REFINED_FULL, n=1, mode="refined")
    assert [len(getattr(plan.splits[0], k)) for k in ("training", "validation", "test")] == [174, 40, 60]


def test_plan_needs_enough_paintings():
    with pytest.raises(PlanningError, match="need 671"):
        build_plan(_records(670, 100, 600), STANDARD_FULL)


def test_refined_rejects_proxies():
    with pytest.raises(PlanningError):
        build_plan(_records(10, 10, 1), PartitionTargets((5, 1, 1), (5, 1, 1)), mode="refined")


def test_balance_slack():
    with pytest.raises(PlanningError, match="unbalanced"):
        build_plan(_records(50, 50), PartitionTargets((40, 2, 2), (20, 2, 2)))
    build_plan(_records(50, 50), PartitionTargets((40, 2, 2), (20, 2, 2)), balance_slack=20)


def test_plan_determinism():
    recs = _records(60, 40, 20)
    t = proportional_targets(recs, "standard")
    a = build_plan(recs, t, n=5, master_seed=3).to_json()
    assert a == build_plan(recs, t, n=5, master_seed=3).to_json()
    assert a != build_plan(recs, t, n=5, master_seed=4).to_json()
    back = ExperimentPlan.from_json(a)
    assert back.to_json() == a


@given(st.integers(0, 2**31), st.integers(12, 60), st.integers(12, 60))
def test_painting_integrity(seed, n_auth, n_con):
    recs = _records(n_auth, n_con // 2, n_con - n_con // 2)
    plan = build_plan(recs, proportional_targets(recs, "standard"), n=3, master_seed=seed)
    for split in plan.splits:
        sets = [set(split.training), set(split.validation), set(split.test)]
        assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
        auth_train = sum(plan.labels[p] == "authentic" for p in split.training)
        assert abs(auth_train - (len(split.training) - auth_train)) <= 5


def test_proportional_targets_balanced():
    t = proportional_targets(_records(300, 100, 100), "standard")
    assert t.authentic[0] == t.contrast[0]
    assert sum(t.contrast) == 200


def test_weights():
    plan = build_plan(_records(10, 6, 6), PartitionTargets((8, 1, 1), (8, 2, 2)))
    assign_weights(plan, "standard")
    assert {plan.labels[p]: w for p, w in plan.weights.items()} == {"authentic": 1.0, "imitation": 10.0, "proxy": 1.0}
    assign_weights(plan, "refined")
    assert set(plan.weights.values()) == {1.0}
    assert json.loads(plan.to_json())["weights"]
