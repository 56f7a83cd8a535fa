import logging

import numpy as np
import pytest

from wavepad.data import (DataError, Dataset, load_dataset, parse_size, read_image, read_pgm,
                          resize_bilinear, save_dataset, split_dataset, synth_dataset, write_pgm)
from wavepad.wavelet import HAAR, dwt2d


class TestPGM:
    def test_round_trip_8bit(self, tmp_path, rng):
        q = rng.integers(0, 256, (5, 7))
        write_pgm(tmp_path / "a.pgm", q / 255.0)
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm") * 255, q)

    def test_round_trip_16bit(self, tmp_path, rng):
        q = rng.integers(0, 65536, (4, 3))
        write_pgm(tmp_path / "a.pgm", q / 65535.0, maxval=65535)
        np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm") * 65535, q, atol=1e-9)

    def test_ascii_with_comments(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n# made by hand\n3 2\n# max\n4\n0 1 2\n3 4 4\n")
        np.testing.assert_allclose(read_pgm(tmp_path / "a.pgm"), [[0, .25, .5], [.75, 1, 1]])

    def test_white_is_one(self, tmp_path):
        (tmp_path / "w.pgm").write_bytes(b"P5\n2 2\n255\n" + bytes([255] * 4))
        np.testing.assert_array_equal(read_image(tmp_path / "w.pgm"), np.ones((2, 2)))

    @pytest.mark.parametrize("blob", [b"P6\n1 1\n255\n\x00\x00\x00", b"P5\n4 4\n255\n\x00",
                                      b"P5\n0 4\n255\n", b"P5\nx y\n255\n", b"P5"])
    def test_malformed(self, tmp_path, blob):
        (tmp_path / "bad.pgm").write_bytes(blob)
        with pytest.raises(DataError):
            read_pgm(tmp_path / "bad.pgm")

    def test_write_rejects_rank3(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "a.pgm", np.zeros((2, 2, 3)))


class TestResize:
    def test_constant_stays_constant(self):
        out = resize_bilinear(np.full((480, 640), 0.3), (240, 320))
        assert out.shape == (240, 320)
        np.testing.assert_allclose(out, 0.3, atol=1e-15)

    def test_linear_ramp_is_exact(self):
        h, w = 9, 13
        yy, xx = np.mgrid[0:h, 0:w]
        img = 0.5 * yy / (h - 1) + 0.25 * xx / (w - 1)
        out = resize_bilinear(img, (5, 7))
        oy, ox = np.mgrid[0:5, 0:7]
        np.testing.assert_allclose(out, 0.5 * oy / 4 + 0.25 * ox / 6, atol=1e-14)

    def test_corners_preserved(self, rng):
        img = rng.random((6, 8))
        out = resize_bilinear(img, (11, 3))
        for (a, b), (c, d) in [((0, 0), (0, 0)), ((0, -1), (0, -1)), ((-1, 0), (-1, 0)), ((-1, -1), (-1, -1))]:
            assert out[a, b] == pytest.approx(img[c, d])


class TestLoadDataset:
    def make_tree(self, root, n_real=3, n_fake=2):
        for name, n in (("real", n_real), ("fake", n_fake)):
            (root / name).mkdir(parents=True)
            for i in range(n):
                write_pgm(root / name / f"{i}.pgm", np.full((4, 4), i / 10))

    def test_labels_and_order(self, tmp_path):
        self.make_tree(tmp_path)
        ds = load_dataset(tmp_path)
        assert ds.class_names == ["real", "fake"]
        np.testing.assert_array_equal(ds.labels, [0, 0, 0, 1, 1])
        assert ds.images.shape == (5, 4, 4) and ds.skipped == 0

    def test_unreadable_files_skipped_and_counted(self, tmp_path, caplog):
        self.make_tree(tmp_path)
        (tmp_path / "fake" / "broken.pgm").write_bytes(b"garbage")
        (tmp_path / "real" / "notes.txt").write_text("ignored: not an image suffix")
        with caplog.at_level(logging.WARNING):
            ds = load_dataset(tmp_path)
        assert ds.skipped == 1 and len(ds) == 5
        assert "broken.pgm" in caplog.text

    def test_resize_on_load(self, tmp_path):
        self.make_tree(tmp_path)
        write_pgm(tmp_path / "real" / "big.pgm", np.zeros((8, 6)))
        with pytest.raises(DataError, match="differ in size"):
            load_dataset(tmp_path)
        assert load_dataset(tmp_path, resize_to=(4, 4)).images.shape == (6, 4, 4)

    def test_empty_class_is_an_error(self, tmp_path):
        self.make_tree(tmp_path)
        (tmp_path / "mask").mkdir()
        with pytest.raises(DataError, match="no readable"):
            load_dataset(tmp_path)

    def test_extra_classes_sorted_after_binary(self, tmp_path):
        self.make_tree(tmp_path)
        for name in ("zoo", "mask"):
            (tmp_path / name).mkdir()
            write_pgm(tmp_path / name / "a.pgm", np.zeros((4, 4)))
        assert load_dataset(tmp_path).class_names == ["real", "fake", "mask", "zoo"]

    def test_missing_root(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope")


class TestSplit:
    def test_stratified_disjoint_and_deterministic(self):
        ds = synth_dataset(20, (16, 16), seed=0)
        a = split_dataset(ds, seed=3).splits
        parts = [set(a[k].tolist()) for k in ("train", "val", "test")]
        assert set().union(*parts) == set(range(40)) and sum(map(len, parts)) == 40
        for k in ("val", "test"):
            assert np.sum(ds.labels[a[k]] == 0) == np.sum(ds.labels[a[k]] == 1) == 3
        b = split_dataset(synth_dataset(20, (16, 16), seed=0), seed=3).splits
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_missing_split(self):
        with pytest.raises(DataError, match="split_dataset"):
            synth_dataset(2, (16, 16)).subset("val")


class TestSynth:
    def test_counts_range_and_determinism(self):
        a = synth_dataset(5, (32, 16), seed=4)
        b = synth_dataset(5, (32, 16), seed=4)
        assert a.images.shape == (10, 32, 16)
        np.testing.assert_array_equal(a.labels, [0] * 5 + [1] * 5)
        assert a.images.tobytes() == b.images.tobytes()
        assert a.images.min() >= 0 and a.images.max() <= 1
        assert synth_dataset(5, (32, 16), seed=5).images.tobytes() != a.images.tobytes()

    @pytest.mark.parametrize("size", [(8, 8), (30, 32)])
    def test_bad_size(self, size):
        with pytest.raises(ValueError):
            synth_dataset(2, size)

    def test_fakes_carry_more_diagonal_detail(self):
        for seed in range(20):
            ds = synth_dataset(8, (32, 32), seed=seed)
            hh = np.array([np.mean(dwt2d(im, HAAR).hh ** 2) for im in ds.images])
            assert hh[ds.labels == 1].min() > 2 * hh[ds.labels == 0].max(), seed

    def test_save_and_reload(self, tmp_path):
        ds = synth_dataset(3, (16, 16), seed=1)
        paths = save_dataset(ds, tmp_path)
        assert len(paths) == 6 and paths[0].name == "real_0000.pgm"
        back = load_dataset(tmp_path)
        np.testing.assert_array_equal(back.labels, ds.labels)
        assert np.abs(back.images - ds.images).max() <= 0.5 / 255 + 1e-12


def test_parse_size():
    assert parse_size("64x48") == (64, 48)
    assert parse_size(" 8 X 8 ") == (8, 8)
    with pytest.raises(ValueError):
        parse_size("64")


def test_dataset_validation():
    with pytest.raises(DataError):
        Dataset(np.zeros((2, 4, 4)), np.array([0]), ["a", "b"])
    with pytest.raises(DataError):
        Dataset(np.zeros((1, 4, 4)), np.array([2]), ["a", "b"])
