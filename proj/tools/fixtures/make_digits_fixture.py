#!/usr/bin/env python3
"""Regenerates the bundled toy-LeNet test fixtures.

Trains a LeNet-5-shaped CNN on scikit-learn's bundled 8x8 handwritten digits
and writes, into the output directory:

  digits-train-images.idx / digits-train-labels.idx   (IDX, big-endian)
  digits-test-images.idx  / digits-test-labels.idx
  toy_lenet.lsnm          (LSNM v1 model file)
  toy_lenet.fixture       (LSNF reference-logit fixture, 32 held-out inputs)

Pixels are quantised to u8 (v * 255 / 16, rounded) before training so the
network sees exactly what the C++ IDX loader produces (u8 / 255).

Usage: make_digits_fixture.py OUT_DIR [--seed 0]
"""
import argparse
import os
import struct

import numpy as np
import torch
import torch.nn as nn
from sklearn.datasets import load_digits

KIND_CONV, KIND_DENSE, KIND_RELU, KIND_MAXPOOL, KIND_AVGPOOL, KIND_FLATTEN, KIND_SOFTMAX = range(1, 8)


def write_idx_images(path, images):
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, h, w))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


class ToyLeNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(1, 8, 3, stride=1, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=1, padding=1)
        self.fc1 = nn.Linear(64, 64)
        self.fc2 = nn.Linear(64, 32)
        self.fc3 = nn.Linear(32, 10)

    def forward(self, x):
        x = torch.max_pool2d(torch.relu(self.conv1(x)), 2, 2)
        x = torch.max_pool2d(torch.relu(self.conv2(x)), 2, 2)
        x = torch.flatten(x, 1)
        x = torch.relu(self.fc1(x))
        x = torch.relu(self.fc2(x))
        return self.fc3(x)


def layer_record(kind, in_shape, params, blobs):
    vals = [len(in_shape), *in_shape, *params]
    out = struct.pack("<B", kind)
    out += struct.pack("<I", len(vals)) + struct.pack("<%dI" % len(vals), *vals)
    data = np.concatenate([b.detach().cpu().numpy().astype("<f4").ravel() for b in blobs]) if blobs else np.zeros(0, "<f4")
    out += struct.pack("<Q", data.nbytes) + data.tobytes()
    return out


def export_lsnm(path, m):
    layers = [
        layer_record(KIND_CONV, (1, 8, 8), (8, 3, 3, 1, 1, 1, 1), [m.conv1.weight, m.conv1.bias]),
        layer_record(KIND_RELU, (8, 8, 8), (), []),
        layer_record(KIND_MAXPOOL, (8, 8, 8), (2, 2, 2, 2), []),
        layer_record(KIND_CONV, (8, 4, 4), (16, 3, 3, 1, 1, 1, 1), [m.conv2.weight, m.conv2.bias]),
        layer_record(KIND_RELU, (16, 4, 4), (), []),
        layer_record(KIND_MAXPOOL, (16, 4, 4), (2, 2, 2, 2), []),
        layer_record(KIND_FLATTEN, (16, 2, 2), (), []),
        layer_record(KIND_DENSE, (64,), (64,), [m.fc1.weight, m.fc1.bias]),
        layer_record(KIND_RELU, (64,), (), []),
        layer_record(KIND_DENSE, (64,), (32,), [m.fc2.weight, m.fc2.bias]),
        layer_record(KIND_RELU, (32,), (), []),
        layer_record(KIND_DENSE, (32,), (10,), [m.fc3.weight, m.fc3.bias]),
    ]
    with open(path, "wb") as f:
        f.write(b"LSNM" + struct.pack("<HH", 1, len(layers)))
        for rec in layers:
            f.write(rec)


def export_fixture(path, inputs, labels, logits):
    n = inputs.shape[0]
    with open(path, "wb") as f:
        f.write(b"LSNF" + struct.pack("<III", n, 10, 3) + struct.pack("<3I", 1, 8, 8))
        for i in range(n):
            f.write(inputs[i].astype("<f4").tobytes())
            f.write(struct.pack("<I", int(labels[i])))
            f.write(logits[i].astype("<f4").tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    digits = load_digits()
    pixels = np.rint(digits.images * 255.0 / 16.0).astype(np.uint8)
    labels = digits.target.astype(np.uint8)
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(labels))
    train_idx, test_idx = order[:1297], order[1297:]

    write_idx_images(os.path.join(args.out_dir, "digits-train-images.idx"), pixels[train_idx])
    write_idx_labels(os.path.join(args.out_dir, "digits-train-labels.idx"), labels[train_idx])
    write_idx_images(os.path.join(args.out_dir, "digits-test-images.idx"), pixels[test_idx])
    write_idx_labels(os.path.join(args.out_dir, "digits-test-labels.idx"), labels[test_idx])

    torch.manual_seed(args.seed)
    torch.use_deterministic_algorithms(True)
    x_all = torch.tensor(pixels.astype(np.float32) / np.float32(255.0)).unsqueeze(1)
    y_all = torch.tensor(labels.astype(np.int64))
    xtr, ytr = x_all[train_idx], y_all[train_idx]
    xte, yte = x_all[test_idx], y_all[test_idx]

    model = ToyLeNet()
    opt = torch.optim.Adam(model.parameters(), lr=3e-3, weight_decay=1e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=100)
    loss_fn = nn.CrossEntropyLoss()
    gen = torch.Generator().manual_seed(args.seed)
    for epoch in range(100):
        perm = torch.randperm(len(ytr), generator=gen)
        model.train()
        for i in range(0, len(ytr), 32):
            idx = perm[i:i + 32]
            opt.zero_grad()
            loss = loss_fn(model(xtr[idx]), ytr[idx])
            loss.backward()
            opt.step()
        sched.step()
    model.eval()
    with torch.no_grad():
        acc = (model(xte).argmax(1) == yte).float().mean().item()
    print(f"test accuracy: {acc * 100:.2f}% on {len(yte)} inputs")
    if acc < 0.97:
        raise SystemExit("accuracy below 97%, refusing to export")

    export_lsnm(os.path.join(args.out_dir, "toy_lenet.lsnm"), model)
    pick = np.random.default_rng(args.seed + 1).choice(len(test_idx), 32, replace=False)
    with torch.no_grad():
        ref_logits = model(xte[pick]).numpy()
    export_fixture(os.path.join(args.out_dir, "toy_lenet.fixture"), xte[pick].numpy().reshape(32, -1),
                   yte[pick].numpy(), ref_logits)


if __name__ == "__main__":
    main()
