#!/usr/bin/env python3
"""
Unit tests for scene flow estimation and colorization
"""

import sys
import os
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import unittest
import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.ndimage import gaussian_filter

from src.errors import ShapeError
from src.flow import (
    ZERO_MOTION_VALUE,
    CameraIntrinsics,
    FlowField,
    SceneFlowEstimator,
    backproject_depth,
    colorize_flow,
    estimate_scene_flow,
    flatten_to_2d,
    to_model_input,
    zero_motion_image,
)
from src.dataset import kept_frame_indices
from src.sequence import AffordanceTaxonomy, RgbdFrame
from src.sequence_generator import SequenceGenerator, SequenceSpec
from src.utils.config import FlowConfig


def textured_frame(seed: int = 0, size: int = 40, depth: float = 0.5) -> RgbdFrame:
    rng = np.random.default_rng(seed)
    texture = gaussian_filter(rng.random((size, size)), 1.5)
    texture = (texture - texture.min()) / (texture.max() - texture.min())
    rgb = np.stack([texture, texture, texture])
    return RgbdFrame(rgb, np.full((1, size, size), depth))


def shifted(frame: RgbdFrame, dx: int, dy: int, depth: float) -> RgbdFrame:
    """The same texture moved by (dx, dy) pixels"""
    rgb = np.roll(frame.rgb, shift=(dy, dx), axis=(1, 2))
    return RgbdFrame(rgb, np.full(frame.depth.shape, depth))


INTERIOR = (slice(12, 28), slice(12, 28))


class TestSceneFlow(unittest.TestCase):
    """Test the block-matching estimator"""

    def setUp(self):
        self.prev = textured_frame()
        self.intrinsics = CameraIntrinsics(58.0, 58.0, 19.5, 19.5)

    def test_recovers_integer_translation(self):
        for dx, dy in ((2, 1), (-1, 3), (0, 0)):
            with self.subTest(dx=dx, dy=dy):
                nxt = shifted(self.prev, dx, dy, 0.5)
                field = estimate_scene_flow(self.prev, nxt, self.intrinsics, levels=2, patch=5, radius=4)
                np.testing.assert_allclose(field.vectors[0][INTERIOR], dx, atol=1e-9)
                np.testing.assert_allclose(field.vectors[1][INTERIOR], dy, atol=1e-9)

    def test_depth_change(self):
        nxt = shifted(self.prev, 1, 0, 0.6)
        field = estimate_scene_flow(self.prev, nxt, self.intrinsics, levels=2, patch=5, radius=4)
        np.testing.assert_allclose(field.vectors[2][INTERIOR], 0.1, atol=1e-9)

    def test_invalid_depth_gives_zero_motion(self):
        nxt = shifted(self.prev, 2, 0, 0.5)
        self.prev.depth[0, 15:20, 15:20] = 0.0
        field = estimate_scene_flow(self.prev, nxt, self.intrinsics, levels=2, patch=5, radius=4)
        np.testing.assert_array_equal(field.vectors[:, 15:20, 15:20], 0.0)
        self.assertTrue(np.all(field.vectors[0, 22:26, 22:26] == 2.0))

    def test_mismatched_extents(self):
        with self.assertRaises(ShapeError):
            estimate_scene_flow(self.prev, textured_frame(size=32), self.intrinsics)

    def test_estimator_image_modes(self):
        nxt = shifted(self.prev, 1, 1, 0.55)
        config = FlowConfig(pyramid_levels=2, patch_size=5, search_radius=3)
        image = SceneFlowEstimator(config, "3d").flow_image(self.prev, nxt)
        flat = SceneFlowEstimator(config, "2d").flow_image(self.prev, nxt)
        self.assertEqual(image.dtype, np.uint8)
        self.assertEqual(image.shape, (3, 40, 40))
        np.testing.assert_array_equal(flat[:2], image[:2])
        self.assertTrue(np.all(flat[2] == ZERO_MOTION_VALUE))

    def test_metric_space(self):
        nxt = shifted(self.prev, 0, 0, 0.7)
        config = FlowConfig(pyramid_levels=2, patch_size=5, search_radius=3, space="metric")
        field = SceneFlowEstimator(config).estimate(self.prev, nxt)
        np.testing.assert_allclose(field.vectors[2][INTERIOR], 0.2, atol=1e-9)


def square_scene(dx: int = 0, dy: int = 0, size: int = 64, side: int = 20, corner: int = 22) -> RgbdFrame:
    """A textured square on a flat grey background, moved by (dx, dy)"""
    rng = np.random.default_rng(3)
    texture = gaussian_filter(rng.random((side, side)), 1.0)
    texture = (texture - texture.min()) / np.ptp(texture)
    intensity = np.full((size, size), 0.4)
    intensity[corner + dy:corner + dy + side, corner + dx:corner + dx + side] = texture
    return RgbdFrame(np.stack([intensity] * 3), np.full((1, size, size), 0.5))


def square_interior(dx: int = 0, dy: int = 0, side: int = 20, corner: int = 22, margin: int = 3):
    return (slice(corner + dy + margin, corner + dy + side - margin),
            slice(corner + dx + margin, corner + dx + side - margin))


class TestTranslatedSquare(unittest.TestCase):
    """Test the estimator at its default settings on an object moving over a flat background"""

    def setUp(self):
        self.intrinsics = CameraIntrinsics(58.0, 58.0, 31.5, 31.5)

    def median_motion(self, prev: RgbdFrame, nxt: RgbdFrame, region) -> np.ndarray:
        field = estimate_scene_flow(prev, nxt, self.intrinsics)
        return np.array([np.median(field.vectors[0][region]), np.median(field.vectors[1][region])])

    def test_diagonal_and_large_translations(self):
        for dx, dy in ((2, 1), (2, 2), (-2, 1), (-3, -3), (6, -5)):
            with self.subTest(dx=dx, dy=dy):
                motion = self.median_motion(square_scene(), square_scene(dx, dy), square_interior())
                np.testing.assert_allclose(motion, [dx, dy], atol=0.25)

    def test_reverse_flow_is_the_negation(self):
        for dx, dy in ((2, 1), (-1, 3), (5, 2)):
            with self.subTest(dx=dx, dy=dy):
                prev, nxt = square_scene(), square_scene(dx, dy)
                forward = self.median_motion(prev, nxt, square_interior())
                backward = self.median_motion(nxt, prev, square_interior(dx, dy))
                np.testing.assert_allclose(forward + backward, 0.0, atol=0.5)
                np.testing.assert_allclose(forward, [dx, dy], atol=0.5)

    def test_flat_background_stays_still(self):
        field = estimate_scene_flow(square_scene(), square_scene(2, 2), self.intrinsics)
        np.testing.assert_array_equal(field.vectors[:2, :10, :], 0.0)


class TestGeneratedSequenceFlow(unittest.TestCase):
    """Test the estimator recovers the hand motion of generated sequences"""

    def test_hand_motion_is_recovered(self):
        estimator = SceneFlowEstimator(FlowConfig())
        errors = []
        for affordance in AffordanceTaxonomy.affordances():
            for seed in (0, 1):
                generator = SequenceGenerator(SequenceSpec(affordance), seed)
                sequence = generator.generate()
                height, width = sequence.frames[0].size
                ys, xs = np.mgrid[0:height, 0:width]
                kept = kept_frame_indices(len(sequence), 30, 10)
                for previous, index in zip(kept, kept[1:]):
                    y0, x0, _ = generator.hand_track[previous]
                    y1, x1, _ = generator.hand_track[index]
                    truth_x, truth_y = x1 - x0, y1 - y0
                    if np.hypot(truth_x, truth_y) < 1.0:
                        continue
                    inside = ((xs >= 4) & (xs < width - 4) & (ys >= 4) & (ys < height - 4)
                              & (xs + truth_x >= 4) & (xs + truth_x < width - 4)
                              & (ys + truth_y >= 4) & (ys + truth_y < height - 4))
                    region = generator.hand_masks[previous] & inside
                    if region.sum() < 10:
                        continue
                    field = estimator.estimate(sequence.frames[previous], sequence.frames[index])
                    error = np.hypot(field.vectors[0][region] - truth_x, field.vectors[1][region] - truth_y)
                    errors.append(np.median(error))
        self.assertGreaterEqual(len(errors), 20)
        self.assertGreaterEqual(np.mean(np.array(errors) <= 1.0), 0.8)


class TestCameraGeometry(unittest.TestCase):
    """Test intrinsics and back-projection"""

    def test_rejects_non_positive_focal_length(self):
        with self.assertRaises(ValueError):
            CameraIntrinsics(0.0, 58.0, 10.0, 10.0)

    def test_default_principal_point(self):
        intrinsics = CameraIntrinsics.from_config(FlowConfig(), (48, 64))
        self.assertEqual((intrinsics.cx, intrinsics.cy), (31.5, 23.5))

    def test_backprojection(self):
        intrinsics = CameraIntrinsics(2.0, 4.0, 1.0, 1.0)
        points = backproject_depth(np.full((3, 3), 2.0), intrinsics)
        self.assertEqual(points.shape, (3, 3, 3))
        self.assertAlmostEqual(points[0, 1, 2], 1.0)
        self.assertAlmostEqual(points[1, 2, 1], 0.5)
        self.assertTrue(np.all(points[2] == 2.0))

    def test_metric_displacement_of_pure_depth_change(self):
        intrinsics = CameraIntrinsics(1.0, 1.0, 0.0, 0.0)
        vectors = np.zeros((3, 2, 2))
        vectors[2] = 0.5
        metric = FlowField(vectors).to_metric(np.ones((2, 2)), intrinsics)
        np.testing.assert_allclose(metric.vectors[0], [[0.0, 0.5], [0.0, 0.5]])
        np.testing.assert_allclose(metric.vectors[2], 0.5)

    def test_field_validation(self):
        with self.assertRaises(ShapeError):
            FlowField(np.zeros((2, 4, 4)))
        with self.assertRaises(ValueError):
            FlowField(np.full((3, 2, 2), np.nan))


class TestColorization(unittest.TestCase):
    """Test mapping flow fields to 8-bit images"""

    def test_constant_field_is_zero_motion(self):
        image = colorize_flow(FlowField(np.zeros((3, 4, 5))))
        np.testing.assert_array_equal(image, zero_motion_image(4, 5))

    def test_axes_normalized_independently(self):
        vectors = np.zeros((3, 1, 3))
        vectors[0, 0] = [-2.0, 0.0, 2.0]
        vectors[1, 0] = [5.0, 6.0, 7.0]
        image = colorize_flow(FlowField(vectors))
        np.testing.assert_array_equal(image[0, 0], [0, 128, 255])
        np.testing.assert_array_equal(image[1, 0], [0, 128, 255])
        np.testing.assert_array_equal(image[2, 0], [128, 128, 128])

    def test_flatten_keeps_input(self):
        image = np.arange(12, dtype=np.uint8).reshape(3, 2, 2)
        flat = flatten_to_2d(image)
        self.assertTrue(np.all(flat[2] == ZERO_MOTION_VALUE))
        np.testing.assert_array_equal(image[2], [[8, 9], [10, 11]])

    def test_model_input_scaling(self):
        np.testing.assert_allclose(to_model_input(zero_motion_image(1, 1)), 128 / 255)

    def test_scaling_by_a_power_of_two_is_exact(self):
        vectors = np.random.default_rng(4).normal(size=(3, 5, 6))
        np.testing.assert_array_equal(colorize_flow(FlowField(4.0 * vectors)), colorize_flow(FlowField(vectors)))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 4, 4), elements=st.integers(-50, 50).map(float)),
           st.floats(0.1, 10.0), st.floats(-20.0, 20.0))
    def test_positive_affine_rescaling_keeps_the_image(self, vectors, scale, shift):
        image = colorize_flow(FlowField(vectors)).astype(np.int64)
        rescaled = colorize_flow(FlowField(scale * vectors + shift)).astype(np.int64)
        self.assertLessEqual(np.max(np.abs(image - rescaled)), 1)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, (3, 4, 4), elements=st.floats(-50, 50, allow_nan=False)))
    def test_every_axis_spans_the_byte_range(self, vectors):
        image = colorize_flow(FlowField(vectors))
        for axis in range(3):
            if np.ptp(vectors[axis]) == 0:
                self.assertTrue(np.all(image[axis] == ZERO_MOTION_VALUE))
            else:
                self.assertEqual(image[axis].min(), 0)
                self.assertEqual(image[axis].max(), 255)


if __name__ == '__main__':
    unittest.main()
