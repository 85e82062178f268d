import numpy as np
import pytest
import torch
from torch import nn

from camsteer.errors import WorkbenchError
from camsteer.gradcam import (
    Heatmap,
    cam_resolution,
    grad_cam,
    normalize_heatmap,
    render_overlay,
    upsample,
)
from camsteer.models import ModelConfig, MultiLabelModel, build_model


class OneConvToy(nn.Module):
    """Identity 1x1 conv followed by GAP and a unit linear head.

    The CAM weight alpha is 1/(h*w) for every channel, so the raw heatmap is
    the input image scaled by a constant: normalized values equal the
    min-max normalized image exactly.
    """

    def __init__(self):
        super().__init__()
        conv = nn.Conv2d(1, 1, 1, bias=False)
        with torch.no_grad():
            conv.weight.fill_(1.0)
        self.cam_layer = nn.Sequential(conv)
        self.head = nn.Linear(1, 1, bias=False)
        with torch.no_grad():
            self.head.weight.fill_(1.0)

    def forward(self, x):
        a = self.cam_layer(x)
        return self.head(a.mean(dim=(2, 3)))


def toy_model():
    config = ModelConfig(backbone="small_cnn", num_labels=1, input_size=32)
    return MultiLabelModel(module=OneConvToy(), config=config, round_index=0)


class TestNormalizeHeatmap:
    def test_two_by_two(self):
        values, degenerate = normalize_heatmap([[0, 1], [2, 3]])
        assert np.allclose(values, [[0, 1 / 3], [2 / 3, 1]])
        assert not degenerate

    def test_constant_map_degenerate(self):
        values, degenerate = normalize_heatmap([[5.0, 5.0]])
        assert np.array_equal(values, [[0.0, 0.0]])
        assert degenerate

    def test_random_map_hits_zero_and_one(self):
        rng = np.random.RandomState(2)
        values, degenerate = normalize_heatmap(rng.rand(7, 7) * 10 + 3)
        assert not degenerate
        assert values.min() == 0.0
        assert values.max() == 1.0

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            normalize_heatmap([[0.0, np.inf]])


class TestGradCam:
    def test_closed_form_on_one_conv_toy(self):
        model = toy_model()
        rng = np.random.RandomState(0)
        image = rng.uniform(0.1, 0.3, size=(32, 32)).astype(np.float32)
        image[10:16, 20:26] = 1.0  # bright patch
        hm = grad_cam(model, image, 0)
        # alpha = 1/(h*w) > 0, so values == minmax(image)
        expected, _ = normalize_heatmap(image.astype(np.float64))
        assert np.allclose(hm.values, expected, atol=1e-6)
        r, c = np.unravel_index(np.argmax(hm.values), hm.values.shape)
        assert 10 <= r < 16 and 20 <= c < 26
        assert not hm.degenerate

    def test_zeroed_head_row_gives_degenerate_zero_map(self):
        model = build_model(ModelConfig(backbone="small_cnn", num_labels=2, input_size=64), seed=0)
        with torch.no_grad():
            model.module.head.weight[1].zero_()
            model.module.head.bias[1] = 0.3  # constant logit, zero gradient
        hm = grad_cam(model, np.random.RandomState(1).rand(64, 64).astype(np.float32), 1)
        assert hm.degenerate
        assert np.array_equal(hm.raw, np.zeros_like(hm.raw))
        assert np.array_equal(hm.values, np.zeros_like(hm.values))

    def test_values_in_unit_interval_raw_nonnegative(self):
        model = build_model(ModelConfig(backbone="small_cnn", num_labels=3, input_size=64), seed=5)
        hm = grad_cam(model, np.random.RandomState(3).rand(64, 64).astype(np.float32), 2)
        assert (hm.raw >= 0).all()
        assert hm.values.min() >= 0.0 and hm.values.max() <= 1.0

    def test_positive_logit_scaling_preserves_values(self):
        model = build_model(ModelConfig(backbone="small_cnn", num_labels=2, input_size=64), seed=7)
        image = np.random.RandomState(4).rand(64, 64).astype(np.float32)
        before = grad_cam(model, image, 0)
        with torch.no_grad():
            model.module.head.weight[0] *= 3.0
            model.module.head.bias[0] *= 3.0
        after = grad_cam(model, image, 0)
        assert np.allclose(after.values, before.values, atol=1e-6)
        assert np.argmax(after.values) == np.argmax(before.values)

    def test_label_out_of_range(self):
        model = toy_model()
        with pytest.raises(ValueError, match="out of range"):
            grad_cam(model, np.zeros((32, 32), dtype=np.float32), 5)

    def test_missing_conv_layer_rejected(self):
        config = ModelConfig(backbone="small_cnn", num_labels=1, input_size=32)
        model = MultiLabelModel(module=nn.Linear(4, 1), config=config)
        with pytest.raises(WorkbenchError, match="convolutional"):
            grad_cam(model, np.zeros((32, 32), dtype=np.float32), 0)

    def test_cam_resolution(self):
        model = build_model(ModelConfig(backbone="small_cnn", num_labels=2, input_size=64))
        assert cam_resolution(model) == (16, 16)
        assert cam_resolution(toy_model()) == (32, 32)

    def test_round_index_recorded(self):
        model = toy_model()
        model.round_index = 4
        hm = grad_cam(model, np.random.RandomState(0).rand(32, 32).astype(np.float32) + 0.001, 0,
                      image_id="im-1")
        assert hm.round_index == 4
        assert hm.image_id == "im-1"


class TestRenderOverlay:
    def test_zero_heatmap_reproduces_image(self):
        rng = np.random.RandomState(0)
        image = rng.randint(0, 256, size=(32, 32), dtype=np.uint8)
        hm = Heatmap(values=np.zeros((32, 32)), raw=np.zeros((32, 32)), degenerate=True)
        out = render_overlay(image, hm)
        assert out.shape == (32, 32, 3)
        assert np.array_equal(out, np.stack([image] * 3, axis=-1))

    def test_delta_heatmap_single_hotspot(self):
        image = np.full((16, 16), 100, dtype=np.uint8)
        values = np.zeros((16, 16))
        values[8, 8] = 1.0
        hm = Heatmap(values=values, raw=values)
        out = render_overlay(image, hm)
        changed = np.any(out != np.stack([image] * 3, axis=-1), axis=2)
        assert changed[8, 8]
        assert changed.sum() == 1

    def test_display_resolution(self):
        image = np.zeros((16, 16), dtype=np.uint8)
        values = np.random.RandomState(1).rand(4, 4)
        hm = Heatmap(values=values, raw=values)
        out = render_overlay(image, hm, display_size=64)
        assert out.shape == (64, 64, 3)

    def test_upsample_shape(self):
        up = upsample(np.random.RandomState(0).rand(4, 4), (16, 16))
        assert up.shape == (16, 16)
