import numpy as np
import pytest
import torch

from srnet.data import (BundleDataset, UsageError, compose_motion,
                        load_dataset_index)


def uniform_motion(h, w, du, dv, valid=1.0):
    m = np.zeros((h, w, 3), np.float32)
    m[..., 0] = du
    m[..., 1] = dv
    m[..., 2] = valid
    return m


class TestIndex:
    def test_records_and_splits(self, tiny_dataset):
        records = load_dataset_index(tiny_dataset)
        assert len(records) == 6
        assert {r.split for r in records} <= {"train", "val", "test"}
        assert sum(r.split == "train" for r in records) == 5
        assert sum(r.split == "val" for r in records) == 1
        for r in records:
            assert r.hr_resolution == tuple(4 * x for x in r.lr_resolution)


class TestComposeMotion:
    def test_single_field_passthrough(self):
        m = uniform_motion(4, 5, 0.5, -0.25)
        out = compose_motion([m])
        assert np.allclose(out, m)

    def test_uniform_fields_add(self):
        a = uniform_motion(6, 6, 1.0, 0.0)
        b = uniform_motion(6, 6, 0.5, 0.25)
        out = compose_motion([a, b])
        inner = out[1:-1, 1:-2]  # taps near the border leave the raster
        assert np.allclose(inner[..., 0], 1.5, atol=1e-6)
        assert np.allclose(inner[..., 1], 0.25, atol=1e-6)
        assert np.all(inner[..., 2] == 1.0)

    def test_invalid_intermediate_invalidates_chain(self):
        a = uniform_motion(4, 4, 1.0, 0.0)
        b = uniform_motion(4, 4, 0.0, 0.0, valid=0.0)
        out = compose_motion([a, b])
        assert np.all(out[..., 2] == 0.0)
        assert np.all(out[..., :2] == 0.0)

    def test_out_of_bounds_hop_invalid(self):
        a = uniform_motion(4, 4, 100.0, 0.0)
        b = uniform_motion(4, 4, 0.0, 0.0)
        out = compose_motion([a, b])
        assert np.all(out[..., 2] == 0.0)


class TestBundles:
    def test_channel_counts(self, tiny_dataset):
        with_extra = BundleDataset(tiny_dataset, "train", 1, True)
        without = BundleDataset(tiny_dataset, "train", 1, False)
        b8 = with_extra.bundle(0)
        b4 = without.bundle(0)
        assert b8.frames.shape == (2, 8, 16, 16)
        assert b4.frames.shape == (2, 4, 16, 16)
        assert b8.motions.shape == (1, 2, 16, 16)
        assert b8.validity.shape == (1, 1, 16, 16)
        assert b8.hr.shape == (3, 64, 64)

    def test_only_frames_with_enough_history(self, tiny_dataset):
        for n_prev in (1, 2, 3):
            ds = BundleDataset(tiny_dataset, "train", n_prev, True)
            assert len(ds) == 5 * (6 - n_prev)
            assert all(t >= n_prev for _si, t in ds.samples)

    def test_crop_alignment(self, tiny_dataset, rng):
        ds = BundleDataset(tiny_dataset, "train", 1, True)
        b = ds.bundle(3, crop=8, rng=rng)
        assert b.frames.shape[-2:] == (8, 8)
        assert b.hr.shape[-2:] == (32, 32)

    def test_center_crop_is_deterministic(self, tiny_dataset):
        ds = BundleDataset(tiny_dataset, "train", 1, True)
        a = ds.bundle(2, crop=8)
        b = ds.bundle(2, crop=8)
        assert torch.equal(a.frames, b.frames)
        assert torch.equal(a.hr, b.hr)

    def test_crop_windows_match_full_frame(self, tiny_dataset):
        ds = BundleDataset(tiny_dataset, "train", 1, True)
        full = ds.bundle(1)
        crop = ds.bundle(1, crop=8)  # centered: offset (16-8)//2 = 4
        assert torch.equal(crop.frames, full.frames[..., 4:12, 4:12])
        assert torch.equal(crop.hr, full.hr[..., 16:48, 16:48])

    def test_empty_split_is_usage_error(self, tiny_dataset):
        with pytest.raises(UsageError):
            BundleDataset(tiny_dataset, "test", 1, True)  # 6 seqs -> test empty

    def test_oversized_crop_rejected(self, tiny_dataset):
        ds = BundleDataset(tiny_dataset, "train", 1, True)
        with pytest.raises(UsageError):
            ds.bundle(0, crop=32)

    def test_missing_tensor_names_file(self, tiny_dataset):
        ds = BundleDataset(tiny_dataset, "train", 1, True)
        ds.sequences[0].record.frames[1]["lr_color"] = "gone.vsrt"
        ds.sequences[0]._cache.clear()
        with pytest.raises(FileNotFoundError, match="gone.vsrt"):
            ds.bundle(0)
