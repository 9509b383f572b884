import logging
import os
import tempfile
import unittest
from pathlib import Path

from ngc_generative_coding.config import load_run_config
from ngc_generative_coding.constants import MNIST_DIR_ENV
from ngc_generative_coding.evaluation import bce
from ngc_generative_coding.model import init_params
from ngc_generative_coding.runner import (
    cmd_classify,
    cmd_complete,
    cmd_eval,
    cmd_train,
    load_split,
    settle_dataset,
)

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk_mnist.json"
STEMS = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


# Plain or gzipped IDX file under the MNIST directory.
def find_idx(root, stem):
    for name in (stem, stem + ".gz"):
        if (root / name).exists():
            return str(root / name)
    raise unittest.SkipTest(f"{stem} not found under {root}")


@unittest.skipUnless(os.environ.get(MNIST_DIR_ENV), f"set {MNIST_DIR_ENV} to run the MNIST tests")
class TestDeskScaleMnist(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        logging.disable(logging.INFO)
        cls._tmp = tempfile.TemporaryDirectory()
        root = Path(os.environ[MNIST_DIR_ENV])
        cls.config = load_run_config(CONFIG)
        for field_name, stem in STEMS.items():
            setattr(cls.config.data, field_name, find_idx(root, stem))
        cls.config.output_dir = cls._tmp.name
        test = load_split(cls.config, "test")
        untrained = init_params(cls.config.model)
        cls.initial_bce = bce(test.X, settle_dataset(untrained, test.X, 200).reconstruction)
        cmd_train(cls.config, quiet=True)
        cls.report = cmd_eval(cls.config)

    @classmethod
    def tearDownClass(cls):
        logging.disable(logging.NOTSET)
        cls._tmp.cleanup()

    def test_reconstruction(self):
        self.assertLessEqual(self.report.bce, 100.0)
        self.assertLessEqual(self.report.bce, self.initial_bce - 50.0)

    def test_sparsity(self):
        rho = self.report.sparsity
        self.assertTrue(all(r <= 0.35 for r in rho), rho)
        self.assertLessEqual(rho[-1], rho[0])

    def test_latent_probe_beats_pixels(self):
        err, pixel_err = cmd_classify(self.config)
        self.assertLessEqual(err, pixel_err - 2.0)

    def test_completion_beats_mean_fill(self):
        mmse, baseline = cmd_complete(self.config, mask_kind="right-half")
        self.assertLess(mmse, baseline)


if __name__ == "__main__":
    unittest.main()
