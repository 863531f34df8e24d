"""Network definitions: a small convolutional classifier and a conditional
generator/discriminator pair for 28x28 grayscale images.

The class code (one-hot projected to a learned latent of dimension 50) is
concatenated with the generator noise and additionally injected at each
hidden layer of both networks through learned linear transformations added
to the non-linearity input.
"""

from __future__ import annotations

import torch
import torch.nn as nn


class ConvClassifier(nn.Module):
    """Two conv + two dense layers; forward returns logits."""

    def __init__(self, n_classes: int):
        super().__init__()
        self.n_classes = n_classes
        self.conv1 = nn.Conv2d(1, 32, 3, padding=1)
        self.conv2 = nn.Conv2d(32, 64, 3, padding=1)
        self.pool = nn.MaxPool2d(2)
        self.fc1 = nn.Linear(64 * 7 * 7, 128)
        self.fc2 = nn.Linear(128, n_classes)
        self.act = nn.ReLU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.pool(self.act(self.conv1(x)))
        h = self.pool(self.act(self.conv2(h)))
        h = self.act(self.fc1(h.flatten(1)))
        return self.fc2(h)


class Generator(nn.Module):
    def __init__(self, n_classes: int, noise_dim: int = 100, code_dim: int = 50):
        super().__init__()
        self.n_classes = n_classes
        self.noise_dim = noise_dim
        self.embed = nn.Linear(n_classes, code_dim, bias=False)
        self.fc = nn.Linear(noise_dim + code_dim, 128 * 7 * 7)
        self.inject_fc = nn.Linear(code_dim, 128 * 7 * 7, bias=False)
        self.bn0 = nn.BatchNorm2d(128)
        self.up1 = nn.ConvTranspose2d(128, 64, 4, stride=2, padding=1)
        self.inject1 = nn.Linear(code_dim, 64, bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.up2 = nn.ConvTranspose2d(64, 1, 4, stride=2, padding=1)
        self.act = nn.ReLU()

    def forward(self, z: torch.Tensor, c_onehot: torch.Tensor) -> torch.Tensor:
        code = self.embed(c_onehot)
        h = self.fc(torch.cat([z, code], dim=1)) + self.inject_fc(code)
        h = self.act(self.bn0(h.view(-1, 128, 7, 7)))
        h = self.up1(h) + self.inject1(code)[:, :, None, None]
        h = self.act(self.bn1(h))
        return torch.tanh(self.up2(h))


class Discriminator(nn.Module):
    def __init__(self, n_classes: int, code_dim: int = 50):
        super().__init__()
        self.n_classes = n_classes
        self.embed = nn.Linear(n_classes, code_dim, bias=False)
        self.conv1 = nn.Conv2d(1, 64, 4, stride=2, padding=1)
        self.inject1 = nn.Linear(code_dim, 64, bias=False)
        self.conv2 = nn.Conv2d(64, 128, 4, stride=2, padding=1)
        self.inject2 = nn.Linear(code_dim, 128, bias=False)
        self.bn = nn.BatchNorm2d(128)
        self.fc = nn.Linear(128 * 7 * 7, 1)
        self.inject_fc = nn.Linear(code_dim, 1, bias=False)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x: torch.Tensor, c_onehot: torch.Tensor) -> torch.Tensor:
        code = self.embed(c_onehot)
        h = self.act(self.conv1(x) + self.inject1(code)[:, :, None, None])
        h = self.act(self.bn(self.conv2(h) + self.inject2(code)[:, :, None, None]))
        return self.fc(h.flatten(1)) + self.inject_fc(code)
