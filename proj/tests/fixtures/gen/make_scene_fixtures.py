# Copyright 2026 The pxattack Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Synthetic scene dataset and the toy CNN trained on it.

Each 32x32 image shows one filled shape (disc, square, triangle or plus)
over a two-colour background split; the label is the shape. Writes
scenes/img_XXX.png, scenes/manifest.csv (1-based labels), scenes/cnn.toy
and scenes/cnn_golden.json (float64 reference probabilities for the first
images, from a numpy forward pass over the written weights file). Run from tests/fixtures: python3 gen/make_scene_fixtures.py
"""

import json

import numpy as np
import torch
from PIL import Image

SIZE = 32
CLASSES = 4
TEST_IMAGES = 120


def shape_mask(kind, cy, cx, r):
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] + 0.5
    dy, dx = yy - cy, xx - cx
    if kind == 0:
        return dy * dy + dx * dx <= r * r
    if kind == 1:
        return (np.abs(dy) <= r * 0.85) & (np.abs(dx) <= r * 0.85)
    if kind == 2:
        return (dy <= r * 0.8) & (dy >= -r) & (np.abs(dx) <= (dy + r) * 0.6)
    arm = r * 0.35
    return ((np.abs(dy) <= arm) & (np.abs(dx) <= r)) | ((np.abs(dx) <= arm) & (np.abs(dy) <= r))


def scene(rng, kind):
    img = np.empty((SIZE, SIZE, 3))
    a, b = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
    angle = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] + 0.5
    side = (np.cos(angle) * (yy - SIZE / 2) + np.sin(angle) * (xx - SIZE / 2)) > rng.uniform(-8, 8)
    img[:] = np.where(side[..., None], a, b)
    r = rng.uniform(6, 10)
    cy, cx = rng.uniform(r, SIZE - r, 2)
    fg = rng.uniform(0, 1, 3)
    while min(np.abs(fg - a).sum(), np.abs(fg - b).sum()) < 0.6:
        fg = rng.uniform(0, 1, 3)
    img[shape_mask(kind, cy, cx, r)] = fg
    img += rng.normal(0, 0.03, img.shape)
    return np.clip(np.round(img * 255), 0, 255).astype(np.uint8)


def batch(rng, n):
    labels = rng.integers(0, CLASSES, n)
    images = np.stack([scene(rng, k) for k in labels])
    return images, labels


class Net(torch.nn.Module):
    def __init__(self):
        super().__init__()
        self.c1 = torch.nn.Conv2d(3, 8, 4, stride=2, padding=1)
        self.c2 = torch.nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.fc = torch.nn.Linear(16 * 8 * 8, CLASSES)

    def forward(self, x):
        x = torch.relu(self.c1(x))
        x = torch.relu(self.c2(x))
        return self.fc(x.flatten(1))


def to_tensor(images):
    return torch.tensor(images, dtype=torch.float32).permute(0, 3, 1, 2) / 255.0


def train(rng):
    torch.manual_seed(0)
    net = Net()
    opt = torch.optim.Adam(net.parameters(), lr=2e-3)
    for step in range(4000):
        images, labels = batch(rng, 64)
        loss = torch.nn.functional.cross_entropy(net(to_tensor(images)), torch.tensor(labels))
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 500 == 0:
            print("step", step, "loss", loss.item())
    return net


def export(net, path):
    c1w = net.c1.weight.detach().numpy().transpose(0, 2, 3, 1)  # [out,k,k,in]
    c2w = net.c2.weight.detach().numpy().transpose(0, 2, 3, 1)
    # torch flattens CHW; the toy format flattens HWC.
    fcw = net.fc.weight.detach().numpy().reshape(CLASSES, 16, 8, 8).transpose(0, 2, 3, 1).reshape(CLASSES, -1)
    tensors = [c1w, net.c1.bias.detach().numpy(), c2w, net.c2.bias.detach().numpy(), fcw,
               net.fc.bias.detach().numpy()]
    header = {
        "kind": "cnn",
        "shapes": [list(t.shape) for t in tensors],
        "Y": CLASSES,
        "input": [SIZE, SIZE, 3],
        "layers": [{"op": "conv", "stride": 2, "pad": 1}, {"op": "relu"},
                   {"op": "conv", "stride": 2, "pad": 1}, {"op": "relu"}, {"op": "dense"}],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, separators=(",", ":")).encode() + b"\n")
        for t in tensors:
            f.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def main():
    rng = np.random.default_rng(2026)
    net = train(rng)
    export(net, "scenes/cnn.toy")

    test_rng = np.random.default_rng(7)
    images, labels = batch(test_rng, TEST_IMAGES)
    with open("scenes/manifest.csv", "w") as m:
        m.write("path,label\n")
        for i, (img, lab) in enumerate(zip(images, labels)):
            name = "img_%03d.png" % i
            Image.fromarray(img, "RGB").save("scenes/" + name)
            m.write("%s,%d\n" % (name, lab + 1))

    probs = numpy_forward("scenes/cnn.toy", images[:5].astype(np.float64) / 255.0)
    with torch.no_grad():
        acc = float((net(to_tensor(images)).argmax(1).numpy() == labels).mean())
    print("fixture accuracy", acc)
    write_golden(probs)


def numpy_forward(path, images):
    """Float64 forward pass straight from the toy weights file."""
    raw = open(path, "rb").read()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    flat = np.frombuffer(raw[nl + 1:], dtype="<f4").astype(np.float64)
    tensors, at = [], 0
    for shape in header["shapes"]:
        n = int(np.prod(shape))
        tensors.append(flat[at:at + n].reshape(shape))
        at += n
    out = []
    for x in images:
        act, t = x, 0
        for op in header["layers"]:
            if op["op"] == "conv":
                w, b = tensors[t], tensors[t + 1]
                t += 2
                s, p, k = op["stride"], op["pad"], w.shape[1]
                padded = np.pad(act, ((p, p), (p, p), (0, 0)))
                oh = (padded.shape[0] - k) // s + 1
                ow = (padded.shape[1] - k) // s + 1
                res = np.empty((oh, ow, w.shape[0]))
                for i in range(oh):
                    for j in range(ow):
                        patch = padded[i * s:i * s + k, j * s:j * s + k, :]
                        res[i, j] = np.tensordot(w, patch, axes=([1, 2, 3], [0, 1, 2])) + b
                act = res
            elif op["op"] == "relu":
                act = np.maximum(act, 0.0)
            elif op["op"] == "dense":
                act = tensors[t] @ act.ravel() + tensors[t + 1]
                t += 2
        e = np.exp(act - act.max())
        out.append(e / e.sum())
    return np.array(out)


def write_golden(probs):
    with open("scenes/cnn_golden.json", "w") as f:
        json.dump({"images": ["img_%03d.png" % i for i in range(len(probs))],
                   "probs": [[float(p) for p in row] for row in probs]}, f, indent=1)
        f.write("\n")

if __name__ == "__main__":
    main()
