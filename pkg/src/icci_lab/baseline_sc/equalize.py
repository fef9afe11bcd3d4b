"""Channel equalization: a pilot-trained linear FFE and the CDAN neural
equalizer (121-symbol window -> FC(60) -> PReLU -> FC(121) -> PReLU -> FC(1)).

Both take the received stream plus the known sent symbols for the pilot
region at the head of the stream, and return the equalized full stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn


def _centered_windows(received: np.ndarray, n_taps: int) -> np.ndarray:
    """(L, n_taps) matrix of zero-padded windows centered on each symbol."""
    half = n_taps // 2
    padded = np.concatenate([np.zeros(half), received, np.zeros(half)])
    return np.lib.stride_tricks.sliding_window_view(padded, n_taps)


def ffe_equalize(received: np.ndarray, pilot_sent: np.ndarray, n_taps: int = 61,
                 step: float = 1e-3, passes: int = 20) -> np.ndarray:
    """LMS-trained FIR equalizer: train on pilots, then filter the full stream."""
    received = np.asarray(received, dtype=np.float64).ravel()
    pilot_sent = np.asarray(pilot_sent, dtype=np.float64).ravel()
    if n_taps % 2 == 0:
        raise ValueError("tap count must be odd (center-aligned equalizer)")
    if pilot_sent.size < n_taps:
        raise ValueError(f"{pilot_sent.size} pilots < {n_taps} taps")
    windows = _centered_windows(received, n_taps)
    taps = np.zeros(n_taps)
    for _ in range(passes):
        for t in range(pilot_sent.size):
            x = windows[t]
            err = pilot_sent[t] - taps @ x
            taps += 2.0 * step * err * x
    return windows @ taps


@dataclass
class CdanConfig:
    window: int = 121
    hidden1: int = 60
    hidden2: int = 121
    pilots_fraction: float = 0.05
    epochs: int = 300
    lr: float = 1e-3
    seed: int = 0


class _CdanNet(nn.Module):
    def __init__(self, cfg: CdanConfig):
        super().__init__()
        self.layers = nn.Sequential(
            nn.Linear(cfg.window, cfg.hidden1),
            nn.PReLU(),
            nn.Linear(cfg.hidden1, cfg.hidden2),
            nn.PReLU(),
            nn.Linear(cfg.hidden2, 1),
        )

    def forward(self, x):
        return self.layers(x).squeeze(-1)


def cdan_windows(received: np.ndarray, window: int = 121) -> np.ndarray:
    """Window extraction contract: s_n sits at index window//2."""
    return _centered_windows(np.asarray(received, dtype=np.float64).ravel(), window)


def cdan_equalize(received: np.ndarray, pilot_sent: np.ndarray,
                  cfg: CdanConfig | None = None) -> np.ndarray:
    """Train the CDAN on the pilot head of the stream, then apply it frozen."""
    cfg = cfg or CdanConfig()
    received = np.asarray(received, dtype=np.float64).ravel()
    pilot_sent = np.asarray(pilot_sent, dtype=np.float64).ravel()
    if received.size < cfg.window:
        raise ValueError(f"stream of {received.size} symbols shorter than the "
                         f"{cfg.window}-symbol window")
    windows = cdan_windows(received, cfg.window).astype(np.float32)

    torch.manual_seed(cfg.seed)
    net = _CdanNet(cfg)
    opt = torch.optim.Adam(net.parameters(), lr=cfg.lr)
    x_pilot = torch.from_numpy(windows[: pilot_sent.size])
    y_pilot = torch.from_numpy(pilot_sent.astype(np.float32))
    for _ in range(cfg.epochs):
        opt.zero_grad()
        loss = torch.mean((net(x_pilot) - y_pilot) ** 2)
        loss.backward()
        opt.step()

    net.eval()
    with torch.no_grad():
        out = net(torch.from_numpy(windows)).numpy()
    return out.astype(np.float64)
