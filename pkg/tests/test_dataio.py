import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from ngc_generative_coding.dataio import (
    BadMagicError,
    DimensionOverflowError,
    TruncatedPayloadError,
    binarize,
    build_mask,
    load_dataset,
    load_idx,
    minibatch_iterator,
    one_hot,
    read_pgm,
    right_half_mask,
    split_train_val,
    write_pgm_grid,
    DatasetSplit,
)

from tests.helpers import write_idx


class TempDirTestCase(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class TestLoadIdx(TempDirTestCase):

    def test_image_tensor(self):
        payload = bytes(range(8))
        path = self.tmp / "images.idx"
        path.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">III", 2, 2, 2) + payload)
        array, dims = load_idx(path)
        self.assertEqual(dims, (2, 2, 2))
        assert_array_equal(array, np.arange(8).reshape(2, 2, 2))

    def test_label_vector(self):
        path = write_idx(self.tmp / "labels.idx", [3, 1, 4])
        array, dims = load_idx(path)
        self.assertEqual(dims, (3,))
        assert_array_equal(array, [3, 1, 4])

    def test_gzip(self):
        data = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
        array, _ = load_idx(write_idx(self.tmp / "images.idx.gz", data, compress=True))
        assert_array_equal(array, data)

    def test_bad_magic(self):
        path = self.tmp / "bad.idx"
        path.write_bytes(bytes([1, 0, 8, 1]) + struct.pack(">I", 1) + b"\x00")
        with self.assertRaises(BadMagicError):
            load_idx(path)
        path.write_bytes(bytes([0, 0, 0x0D, 1]) + struct.pack(">I", 1) + b"\x00" * 4)
        with self.assertRaises(BadMagicError):
            load_idx(path)

    def test_truncated(self):
        path = self.tmp / "short.idx"
        path.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">III", 2, 2, 2) + bytes(7))
        with self.assertRaises(TruncatedPayloadError):
            load_idx(path)
        path.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">I", 2))
        with self.assertRaises(TruncatedPayloadError):
            load_idx(path)

    def test_dimension_overflow(self):
        path = self.tmp / "huge.idx"
        path.write_bytes(bytes([0, 0, 8, 3]) + struct.pack(">III", 2 ** 12, 2 ** 12, 2 ** 12))
        with self.assertRaises(DimensionOverflowError):
            load_idx(path)


class TestBinarize(unittest.TestCase):

    def test_extremes_and_boundary(self):
        assert_array_equal(binarize(np.array([0, 255, 127, 128])), [0.0, 1.0, 0.0, 1.0])

    def test_idempotent_on_binary_bytes(self):
        once = binarize(np.array([0, 255, 255, 0]))
        assert_array_equal(binarize(once * 255), once)

    def test_inclusive_flag(self):
        self.assertEqual(binarize(np.array([51]), threshold=0.2, inclusive=True)[0], 1.0)
        self.assertEqual(binarize(np.array([51]), threshold=0.2, inclusive=False)[0], 0.0)

    def test_one_hot(self):
        Y = one_hot([2, 0, 1, 2])
        assert_array_equal(Y.sum(axis=0), np.ones(4))
        assert_array_equal(np.argmax(Y, axis=0), [2, 0, 1, 2])
        self.assertEqual(one_hot([0, 1], n_classes=10).shape, (10, 2))


class TestLoadDataset(TempDirTestCase):

    def test_idx_with_labels(self):
        images = np.zeros((5, 2, 2), dtype=np.uint8)
        images[:, 0, 0] = 200
        write_idx(self.tmp / "x.idx", images)
        write_idx(self.tmp / "y.idx", [0, 1, 2, 1, 0])
        split = load_dataset(self.tmp / "x.idx", self.tmp / "y.idx", limit=4)
        self.assertEqual(split.X.shape, (4, 4))
        assert_array_equal(split.X[0], np.ones(4))
        assert_array_equal(split.X[1:], np.zeros((3, 4)))
        self.assertEqual(split.Y.shape, (3, 4))
        self.assertEqual(split.names["limit"], 4)

    def test_label_count_mismatch(self):
        write_idx(self.tmp / "x.idx", np.zeros((3, 2, 2)))
        write_idx(self.tmp / "y.idx", [0, 1])
        with self.assertRaises(ValueError):
            load_dataset(self.tmp / "x.idx", self.tmp / "y.idx")

    def test_csv(self):
        path = self.tmp / "data.csv"
        path.write_text("label,p0,p1,p2,p3\n1,255,0,0,255\n0,0,128,127,0\n")
        split = load_dataset(path)
        assert_array_equal(split.X, [[1, 0], [0, 1], [0, 0], [1, 0]])
        assert_array_equal(np.argmax(split.Y, axis=0), [1, 0])


class TestSplitting(unittest.TestCase):

    def setUp(self):
        self.split = DatasetSplit(X=np.arange(20, dtype=float).reshape(1, 20))

    def test_no_validation(self):
        train, val = split_train_val(self.split, 0, seed=0)
        assert_array_equal(train.X, self.split.X)
        self.assertEqual(val.n_records, 0)

    def test_disjoint_exhaustive(self):
        train, val = split_train_val(self.split, 6, seed=1)
        self.assertEqual(train.n_records + val.n_records, 20)
        self.assertFalse(set(train.X[0]) & set(val.X[0]))
        again_train, again_val = split_train_val(self.split, 6, seed=1)
        assert_array_equal(val.X, again_val.X)

    def test_too_many_validation_records(self):
        with self.assertRaises(ValueError):
            split_train_val(self.split, 20, seed=0)

    def test_batch_sizes(self):
        small = DatasetSplit(X=np.zeros((1, 5)))
        sizes = [idx.size for idx, _ in minibatch_iterator(small, 2, seed=0, epoch=1)]
        self.assertEqual(sizes, [2, 2, 1])

    def test_full_batch(self):
        batches = list(minibatch_iterator(self.split, 20, seed=0, epoch=1))
        self.assertEqual(len(batches), 1)
        self.assertEqual(sorted(batches[0][0].tolist()), list(range(20)))

    def test_epochs_reshuffle(self):
        orders = []
        for epoch in (1, 2):
            idx = np.concatenate([i for i, _ in minibatch_iterator(self.split, 3, seed=0, epoch=epoch)])
            self.assertEqual(sorted(idx.tolist()), list(range(20)))
            orders.append(idx)
        self.assertFalse(np.array_equal(orders[0], orders[1]))

    def test_batch_columns_match_indices(self):
        for idx, Xb in minibatch_iterator(self.split, 4, seed=2, epoch=0):
            assert_array_equal(Xb, self.split.X[:, idx])

    def test_bad_batch_size(self):
        with self.assertRaises(ValueError):
            list(minibatch_iterator(self.split, 0, seed=0, epoch=0))


class TestMasks(unittest.TestCase):

    def test_right_half(self):
        mask = right_half_mask(16, 3)
        self.assertEqual(mask.M.shape, (16, 3))
        image = mask.M[:, 1].reshape(4, 4)
        assert_array_equal(image[:, :2], np.ones((4, 2)))
        assert_array_equal(image[:, 2:], np.zeros((4, 2)))

    def test_all_ones_and_custom(self):
        assert_array_equal(build_mask("all-ones", 4, 2).M, np.ones((4, 2)))
        custom = build_mask("custom", 4, 2, custom=[1, 0, 0, 1])
        assert_array_equal(custom.M[:, 1], [1, 0, 0, 1])
        with self.assertRaises(ValueError):
            build_mask("custom", 4, 2, custom=[1, 2, 0, 1])
        with self.assertRaises(ValueError):
            build_mask("custom", 4, 2)
        with self.assertRaises(ValueError):
            build_mask("left-half", 4, 2)

    def test_non_square(self):
        with self.assertRaises(ValueError):
            right_half_mask(15, 1)


class TestPgm(TempDirTestCase):

    def test_black_tile(self):
        path = write_pgm_grid(np.zeros((9, 1)), 1, 1, self.tmp / "one.pgm")
        assert_array_equal(read_pgm(path), np.zeros((3, 3), dtype=np.uint8))
        self.assertTrue(path.read_bytes().startswith(b"P5\n3 3\n255\n"))

    def test_grid_order(self):
        levels = [0.0, 0.25, 0.75, 1.0]
        images = np.vstack([np.full(4, v) for v in levels]).T
        canvas = read_pgm(write_pgm_grid(images, 2, 2, self.tmp / "grid.pgm"))
        self.assertEqual(canvas.shape, (4, 4))
        tiles = [canvas[:2, :2], canvas[:2, 2:], canvas[2:, :2], canvas[2:, 2:]]
        self.assertEqual([int(t.mean()) for t in tiles], [0, 64, 191, 255])

    def test_errors(self):
        with self.assertRaises(ValueError):
            write_pgm_grid(np.zeros((4, 5)), 2, 2, self.tmp / "x.pgm")
        with self.assertRaises(ValueError):
            write_pgm_grid(np.zeros((5, 1)), 1, 1, self.tmp / "x.pgm")


if __name__ == "__main__":
    unittest.main()
