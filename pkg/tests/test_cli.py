#!/usr/bin/env python3
"""
Unit tests for the command-line controller and overlay rendering
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import unittest
import tempfile
import contextlib
import io
from unittest import mock

import cv2
import numpy as np
import pandas as pd
import yaml

from src.dataset import list_sequences, load_sequence
from src.errors import ConfigError
from src.main import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_OK,
    AffordanceController,
    build_parser,
    center_crop_square,
    main,
    split_counts,
)
from src.sequence import PALETTE, AffordanceTaxonomy
from src.utils.config import RUN_ROOT_ENV, RunConfig
from src.visualizer import Visualizer, palette_table, render_overlay

SLOW = os.environ.get("AFFORDANCE_SLOW_TESTS") == "1"


def write_config(directory: str, data_root: str) -> str:
    settings = {
        'model': {'input_size': [8, 8], 'base_width': 1},
        'training': {'epochs': 1, 'batch_size': 2, 'checkpoint_every': 1},
        'data': {'root': data_root, 'frames_per_sequence': 4, 'frame_size': [32, 32], 'synth_count': 4},
        'flow': {'pyramid_levels': 1, 'patch_size': 3, 'search_radius': 2},
        'logging': {'level': 'WARNING'},
    }
    path = os.path.join(directory, "config.yaml")
    with open(path, "w") as f:
        yaml.safe_dump(settings, f)
    return path


def quiet_main(argv):
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return main(argv)


class TestHelpers(unittest.TestCase):
    """Test split sizes and cropping"""

    def test_split_counts(self):
        self.assertEqual(split_counts(10, 0.8), (8, 2))
        self.assertEqual(split_counts(1201, 962 / 1201), (962, 239))
        self.assertEqual(split_counts(3, 1.0), (3, 0))
        self.assertEqual(split_counts(7, 0.5), (4, 3))

    def test_center_crop_square(self):
        image = np.arange(6 * 10).reshape(6, 10)
        crop = center_crop_square(image)
        self.assertEqual(crop.shape, (6, 6))
        np.testing.assert_array_equal(crop, image[:, 2:8])
        colour = np.zeros((9, 4, 3))
        self.assertEqual(center_crop_square(colour).shape, (4, 4, 3))


class TestParser(unittest.TestCase):
    """Test argument parsing"""

    def test_usage_error_exits_with_config_code(self):
        with contextlib.redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as ctx:
                build_parser().parse_args(['eval'])
        self.assertEqual(ctx.exception.code, EXIT_CONFIG)

    def test_overrides_are_collected(self):
        args = build_parser().parse_args(['--set', 'training.epochs=3', '--set', 'model.base_width=2',
                                          'train', '--variant', 'rgbd'])
        self.assertEqual(args.overrides, ['training.epochs=3', 'model.base_width=2'])
        self.assertEqual(args.variant, 'rgbd')


class TestRunConfig(unittest.TestCase):
    """Test configuration loading, overrides and variants"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = write_config(self.tmp.name, os.path.join(self.tmp.name, "data"))

    def test_load_and_override(self):
        config = RunConfig.from_file(self.path)
        self.assertEqual(config.model.input_size, (8, 8))
        config.apply_overrides(['training.learning_rate=0.001', 'flow.space=metric'])
        self.assertEqual(config.training.learning_rate, 0.001)
        self.assertEqual(config.flow.space, 'metric')
        config.check()

    def test_unknown_fields(self):
        config = RunConfig(self.path)
        with self.assertRaises(ConfigError):
            config.apply_overrides(['training.momentum=0.5'])
        with self.assertRaises(ConfigError):
            config.apply_overrides(['epochs'])

    def test_variants(self):
        config = RunConfig(self.path)
        config.apply_variant('rgb-attn-2dflow')
        self.assertEqual((config.model.use_depth, config.model.use_flow_stream, config.model.flow_dim),
                         (False, True, '2d'))
        with self.assertRaises(ConfigError):
            config.apply_variant('rgbd-3dflow')

    def test_invalid_values_are_listed(self):
        config = RunConfig(self.path)
        config.apply_overrides(['model.input_size=[10, 10]', 'training.batch_size=0'])
        with self.assertRaises(ConfigError) as ctx:
            config.check()
        self.assertIn('input_size', str(ctx.exception))
        self.assertIn('batch_size', str(ctx.exception))

    def test_save_round_trip(self):
        config = RunConfig(self.path)
        config.apply_variant('rgbd-attn')
        copy_path = os.path.join(self.tmp.name, "copy.yaml")
        config.save_to_file(copy_path)
        restored = RunConfig(copy_path)
        self.assertEqual(restored.to_dict(), config.to_dict())

    def test_run_root_from_environment(self):
        with mock.patch.dict(os.environ, {RUN_ROOT_ENV: self.tmp.name}):
            self.assertEqual(RunConfig().run_root, self.tmp.name)


class TestSynth(unittest.TestCase):
    """Test dataset synthesis through the controller"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.config = RunConfig(write_config(self.tmp.name, os.path.join(self.tmp.name, "data")))
        self.controller = AffordanceController(self.config)

    def synth(self, out_dir, count=10, seed=0):
        with contextlib.redirect_stdout(io.StringIO()):
            return self.controller.cmd_synth(count, out_dir, seed, 0.8)

    def test_split_and_loadable(self):
        out_dir = os.path.join(self.tmp.name, "a")
        written = self.synth(out_dir)
        self.assertEqual(len(written), 10)
        self.assertEqual(len(list_sequences(out_dir, "train")), 8)
        self.assertEqual(len(list_sequences(out_dir, "val")), 2)
        for path in written:
            sequence = load_sequence(path)
            self.assertEqual(len(sequence), 4)
            self.assertEqual(sequence.affordance_mask.shape, (32, 32))

    def test_same_seed_gives_identical_bytes(self):
        first = self.synth(os.path.join(self.tmp.name, "a"), count=3, seed=5)
        second = self.synth(os.path.join(self.tmp.name, "b"), count=3, seed=5)
        for path_a, path_b in zip(first, second):
            for name in ("mask.png", os.path.join("rgb", "0002.png"), os.path.join("depth", "0003.png")):
                with open(os.path.join(path_a, name), "rb") as fa, open(os.path.join(path_b, name), "rb") as fb:
                    self.assertEqual(fa.read(), fb.read())

    def test_flow_rerun_writes_nothing(self):
        out_dir = os.path.join(self.tmp.name, "a")
        self.synth(out_dir, count=2)
        with contextlib.redirect_stdout(io.StringIO()) as first:
            self.assertEqual(self.controller.cmd_flow(out_dir), 0)
        with contextlib.redirect_stdout(io.StringIO()) as second:
            self.controller.cmd_flow(out_dir)
        self.assertNotIn("written: 0 ", first.getvalue())
        self.assertIn("written: 0 ", second.getvalue())

    def test_long_loops_report_progress(self):
        out_dir = os.path.join(self.tmp.name, "a")
        with mock.patch("src.main.tqdm", side_effect=lambda items, **kwargs: items) as bar:
            self.synth(out_dir, count=2)
            with contextlib.redirect_stdout(io.StringIO()):
                self.controller.cmd_flow(out_dir)
        self.assertEqual([c.kwargs['desc'] for c in bar.call_args_list], ["Synthesizing", "Caching flow"])


class TestExitCodes(unittest.TestCase):
    """Test error to exit-code mapping"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.data_root = os.path.join(self.tmp.name, "data")
        self.config_path = write_config(self.tmp.name, self.data_root)
        patcher = mock.patch.dict(os.environ, {RUN_ROOT_ENV: os.path.join(self.tmp.name, "runs")})
        patcher.start()
        self.addCleanup(patcher.stop)

    def test_missing_config_file(self):
        missing = os.path.join(self.tmp.name, "absent.yaml")
        self.assertEqual(quiet_main(['--config', missing, 'flow']), EXIT_CONFIG)

    def test_bad_override(self):
        self.assertEqual(quiet_main(['--config', self.config_path, '--set', 'model.depth=1', 'flow']), EXIT_CONFIG)

    def test_unknown_variant(self):
        self.assertEqual(quiet_main(['--config', self.config_path, 'train', '--variant', 'flow-only']),
                         EXIT_CONFIG)

    def test_missing_checkpoint(self):
        checkpoint = os.path.join(self.tmp.name, "absent.ckpt")
        self.assertEqual(quiet_main(['--config', self.config_path, 'eval', '--checkpoint', checkpoint]), EXIT_DATA)

    def test_flow_on_empty_directory(self):
        os.makedirs(self.data_root)
        self.assertEqual(quiet_main(['--config', self.config_path, 'flow']), EXIT_DATA)

    def test_train_without_dataset_creates_no_run(self):
        self.assertEqual(quiet_main(['--config', self.config_path, 'train']), EXIT_DATA)
        self.assertFalse(os.path.exists(os.path.join(self.tmp.name, "runs")))

    def test_synth_succeeds(self):
        self.assertEqual(quiet_main(['--config', self.config_path, 'synth', '--count', '2']), EXIT_OK)
        self.assertEqual(len(list_sequences(self.data_root, "train")), 2)


@unittest.skipUnless(SLOW, "set AFFORDANCE_SLOW_TESTS=1 to run the end-to-end pipeline")
class TestEndToEnd(unittest.TestCase):
    """Synthesize, cache flow, train, evaluate and infer on a tiny setup"""

    def test_pipeline(self):
        with tempfile.TemporaryDirectory() as tmp:
            data_root = os.path.join(tmp, "data")
            config_path = write_config(tmp, data_root)
            with mock.patch.dict(os.environ, {RUN_ROOT_ENV: os.path.join(tmp, "runs")}):
                self.assertEqual(quiet_main(['--config', config_path, 'synth', '--count', '5']), EXIT_OK)
                self.assertEqual(quiet_main(['--config', config_path, 'flow']), EXIT_OK)
                self.assertEqual(quiet_main(['--config', config_path, 'train', '--run-name', 'tiny']), EXIT_OK)
                checkpoint = os.path.join(tmp, "runs", "tiny", "checkpoint.ckpt")
                self.assertTrue(os.path.exists(checkpoint))

                report_path = os.path.join(tmp, "report.json")
                self.assertEqual(quiet_main(['--config', config_path, 'eval', '--checkpoint', checkpoint,
                                             '--out', report_path]), EXIT_OK)
                self.assertTrue(os.path.exists(report_path))

                out_dir = os.path.join(tmp, "infer")
                sequence_dir = list_sequences(data_root, "val")[0]
                self.assertEqual(quiet_main(['--config', config_path, 'infer', '--checkpoint', checkpoint,
                                             '--input', sequence_dir, '--threshold', '1.0',
                                             '--out', out_dir]), EXIT_OK)
                labels = cv2.imread(os.path.join(out_dir, "labels.png"), cv2.IMREAD_UNCHANGED)
                self.assertEqual(labels.shape, (8, 8))
                self.assertTrue(np.all(labels == 0))


class TestOverlay(unittest.TestCase):
    """Test the palette and overlay blending"""

    def test_palette_table(self):
        table = palette_table()
        self.assertEqual(table.shape, (AffordanceTaxonomy.num_classes(), 3))
        np.testing.assert_array_equal(table[0], [0, 0, 0])
        self.assertEqual(tuple(table[AffordanceTaxonomy.class_index('grasp')]), (144, 238, 144))
        self.assertEqual(len({tuple(row) for row in table[1:]}), len(PALETTE))

    def test_background_is_untouched(self):
        image = np.random.default_rng(0).random((3, 6, 6))
        labels = np.zeros((6, 6), dtype=np.int64)
        untouched = render_overlay(image, labels)
        labels[2, 3] = AffordanceTaxonomy.class_index('cut')
        painted = render_overlay(image, labels)
        mask = labels == 0
        np.testing.assert_array_equal(painted[mask], untouched[mask])
        self.assertFalse(np.array_equal(painted[2, 3], untouched[2, 3]))

    def test_full_alpha_paints_palette_colour(self):
        image = np.zeros((3, 4, 4))
        labels = np.full((4, 4), AffordanceTaxonomy.class_index('hammer'))
        overlay = render_overlay(image, labels, alpha=1.0)
        self.assertTrue(np.all(overlay == np.array(PALETTE['hammer'], dtype=np.uint8)))

    def test_extent_mismatch(self):
        with self.assertRaises(ValueError):
            render_overlay(np.zeros((3, 4, 4)), np.zeros((4, 5), dtype=np.int64))

    def test_narrow_images_stay_channel_first(self):
        for width in (3, 4):
            with self.subTest(width=width):
                image = np.zeros((3, 5, width))
                image[0] = 1.0
                labels = np.zeros((5, width), dtype=np.int64)
                labels[0, 0] = AffordanceTaxonomy.class_index('hammer')
                overlay = render_overlay(image, labels, alpha=1.0)
                self.assertEqual(overlay.shape, (5, width, 3))
                np.testing.assert_array_equal(overlay[0, 0], PALETTE['hammer'])
                np.testing.assert_array_equal(overlay[4, width - 1], [255, 0, 0])

    def test_rejects_images_without_channels(self):
        with self.assertRaises(ValueError):
            render_overlay(np.zeros((4, 4)), np.zeros((4, 4), dtype=np.int64))


class TestFigures(unittest.TestCase):
    """Test figure files are written"""

    def test_attention_and_variant_figures(self):
        with tempfile.TemporaryDirectory() as tmp:
            visualizer = Visualizer(tmp)
            attention = np.full((1, 3, 3), 1 / 9)
            path = visualizer.plot_attention(attention, np.zeros((3, 24, 24)))
            self.assertTrue(os.path.exists(path))
            summary = pd.DataFrame({"mean_iou": [0.4, 0.6], "mean_f1": [0.5, 0.7], "weighted_f1": [0.5, 0.8]},
                                   index=pd.Index(["rgb", "rgbd"], name="variant"))
            path = visualizer.plot_variant_comparison(summary)
            self.assertTrue(path.endswith("variant_comparison.png"))
            self.assertTrue(os.path.exists(path))


if __name__ == '__main__':
    unittest.main()
