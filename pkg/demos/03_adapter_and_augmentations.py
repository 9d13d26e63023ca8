# The grayscale adapter and the augmentations
# ===========================================
#
# A single-channel 448x448 input is mapped to the 224x224x3 tensor a
# pretrained backbone expects by one extra convolution that copies the
# kernel size (and, where possible, the stride) of the backbone's first
# layer.

import tempfile
from pathlib import Path

import numpy as np

from modelaug.imaging import (ConvSpec, adapter_spec_for, center_crop, conv_forward, flip_horizontal,
                              resize_to, rotate, scale, translate)
from modelaug.pnm import read_pnm, write_pnm

first_layers = {"resnet-like": ConvSpec(7, 2, 3, 3, 64),
                "inception-like": ConvSpec(3, 2, 0, 3, 32),
                "vgg-like": ConvSpec(3, 1, 1, 3, 64)}
for name, layer in first_layers.items():
    a = adapter_spec_for(layer)
    note = " (stride forced to 2)" if a.stride_overridden else ""
    print(f"{name:15s} kernel={a.kernel_size} stride={a.stride} padding={a.padding}{note}")

xray = np.random.default_rng(0).random((1024, 1024, 1))
crop = center_crop(xray, 850)
net_input = resize_to(crop, 448, 448)
out = conv_forward(net_input, adapter_spec_for(first_layers["resnet-like"]))
print("1024 -> crop", crop.shape, "-> resize", net_input.shape, "-> adapter", out.shape)

# augmentations on a small test card
card = np.zeros((32, 32, 1))
card[8:12, 4:28] = 1.0
card[12:28, 20:24] = 1.0
views = {"rotate+7": rotate(card, 7), "rotate-7": rotate(card, -7), "flip": flip_horizontal(card),
         "scale1.1": scale(card, 1.1), "shift(3,-2)": translate(card, 3, -2)}
outdir = Path(tempfile.mkdtemp(prefix="modelaug-aug-"))
for name, img in views.items():
    write_pnm(outdir / f"{name}.pgm", img)
    back = read_pnm(outdir / f"{name}.pgm")
    print(f"{name:12s} mass={img.sum():7.2f}  stored 8-bit, max error {np.abs(back - np.clip(img, 0, 1)).max():.4f}")
print("images written to", outdir)
