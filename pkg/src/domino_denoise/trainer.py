"""Semi-blind-spot training with domino-tiling validation and halting.

One run is a sequential state machine over iterations:

    train_step       masked forward on the noisy image, BCE on P u P0, Adam
    validation_step  masked forward on one filled image, per-epoch aggregate
    epoch_close      per-pixel error trend q_t, smoothed s_t, halting verdict

Randomness comes from named substreams of one seed, so every component
(masks, validation parity, random fills, init) is reproducible on its own.
"""

from __future__ import annotations

import math
import time
import warnings
import zlib
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .imaging import Image, psnr
from .nnet import AdamState, Network, adam_step, bce_logit_grad, bce_loss, init_network
from .tiling import FILLS, Parity, crop, pad_to_even, pixel_domino_pair

MODES = ("domino-denoise", "n2f-domino")
FILL_CHOICES = ("domino", "avg", "rand", "best")
HALF_WINDOW = 7


class NumericalError(RuntimeError):
    """Raised when the training loss stops being finite."""


def substream(seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Independent generator for component `name` at step `index`."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()), index))
    return np.random.default_rng(ss)


def subseed(seed: int, name: str) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _floor_count(rate: float, n: int) -> int:
    # guard against 0.2 * 10000 landing a hair below an integer
    return int(math.floor(round(rate * n, 9)))


# ----------------------------------------------------------------------
# masking
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MaskPlan:
    mask_rate: float = 0.20
    leak_rate: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.mask_rate < 1.0:
            raise ValueError(f"mask_rate must be in (0, 1), got {self.mask_rate}")
        if not 0.0 <= self.leak_rate < 1.0:
            raise ValueError(f"leak_rate must be in [0, 1), got {self.leak_rate}")

    def sizes(self, n: int) -> tuple[int, int]:
        """(|P|, |P0|) for an image of n pixels."""
        hidden = _floor_count(self.mask_rate, n)
        return hidden, _floor_count(self.leak_rate, n - hidden)


def _hide(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    n = int(np.prod(shape))
    flat = np.ones(n)
    flat[rng.choice(n, _floor_count(rate, n), replace=False)] = 0.0
    return flat.reshape(shape)


def sample_masks(shape, plan: MaskPlan, iteration: int):
    """(input_mask, loss_mask) for one iteration.

    input_mask is float with 0 on the hidden set P; loss_mask is boolean and
    selects P plus the leak set P0 drawn from the visible pixels.
    """
    shape = tuple(shape)
    n = int(np.prod(shape))
    n_hidden, n_leak = plan.sizes(n)
    rng = substream(plan.seed, "masks", iteration)
    order = rng.permutation(n)
    hidden = order[:n_hidden]
    leak = rng.choice(order[n_hidden:], n_leak, replace=False) if n_leak else order[:0]
    input_mask = np.ones(n)
    input_mask[hidden] = 0.0
    loss_mask = np.zeros(n, dtype=bool)
    loss_mask[hidden] = True
    loss_mask[leak] = True
    return input_mask.reshape(shape), loss_mask.reshape(shape)


# ----------------------------------------------------------------------
# aggregation and halting
# ----------------------------------------------------------------------

@dataclass
class Aggregator:
    """Per-pixel running mean of network outputs."""

    shape: tuple
    scope: str = "cumulative"
    sum: np.ndarray = field(init=False)
    count: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.scope not in ("cumulative", "per-epoch"):
            raise ValueError(f"unknown aggregator scope {self.scope!r}")
        self.reset()

    def reset(self) -> None:
        self.sum = np.zeros(self.shape)
        self.count = np.zeros(self.shape, dtype=np.int64)

    def push(self, values: np.ndarray, where: np.ndarray) -> None:
        where = np.asarray(where, dtype=bool)
        np.add(self.sum, values, out=self.sum, where=where)
        self.count += where

    @property
    def resolved(self) -> np.ndarray:
        return self.count > 0

    def average(self) -> np.ndarray:
        """Mean at resolved pixels, NaN where nothing has been observed."""
        out = np.full(self.shape, np.nan)
        ok = self.resolved
        out[ok] = self.sum[ok] / self.count[ok]
        return out


class HaltingMonitor:
    """Centered rolling mean of q with a no-new-minimum patience rule.

    s for epoch t averages q over t-7..t+7, so it is known only at epoch
    t+7. Once `patience` consecutive s values fail to set a strict new
    minimum, the monitor halts and reports the epoch that achieved it.
    """

    def __init__(self, patience: int, half_window: int = HALF_WINDOW):
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.patience = patience
        self.half_window = half_window
        self.q_epochs: list[int] = []
        self.q: list[float] = []
        self.s_epochs: list[int] = []
        self.s: list[float] = []
        self.best_s: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.stale = 0
        self.halted = False

    @property
    def width(self) -> int:
        return 2 * self.half_window + 1

    def push(self, epoch: int, q: float) -> Optional[int]:
        """Record q for `epoch`; return the best epoch when halting fires."""
        if self.halted:
            raise RuntimeError("monitor already halted")
        self.q_epochs.append(epoch)
        self.q.append(float(q))
        if len(self.q) < self.width:
            return None
        s = math.fsum(self.q[-self.width:]) / self.width
        center = self.q_epochs[-self.half_window - 1]
        self.s.append(s)
        self.s_epochs.append(center)
        if self.best_s is None or s < self.best_s:
            self.best_s, self.best_epoch, self.stale = s, center, 0
        else:
            self.stale += 1
        if self.stale >= self.patience:
            self.halted = True
            return self.best_epoch
        return None


# ----------------------------------------------------------------------
# run configuration and state
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DenoiseConfig:
    epoch_len: int = 500
    patience: int = 30
    max_iterations: int = 100_000
    channels: int = 48
    seed: int = 0
    mode: str = "domino-denoise"
    n2f_check_interval: int = 250
    n_layers: int = 12
    lr: float = 1e-4
    fill: str = "domino"

    def __post_init__(self):
        for name in ("epoch_len", "patience", "max_iterations", "channels", "n2f_check_interval", "n_layers"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.fill not in FILL_CHOICES:
            raise ValueError(f"fill must be one of {FILL_CHOICES}, got {self.fill!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")


@dataclass
class TrainState:
    net: Network
    adam: AdamState
    plan: MaskPlan
    seed: int
    output: Aggregator
    validation: tuple  # (even-input aggregator, odd-input aggregator)
    monitor: HaltingMonitor
    snapshot_limit: int
    iteration: int = 0
    epoch: int = 0
    last_loss: float = float("nan")
    prev_err: Optional[np.ndarray] = None
    prev_ok: Optional[np.ndarray] = None
    snapshots: OrderedDict = field(default_factory=OrderedDict)
    halted: bool = False
    best_epoch: Optional[int] = None

    @classmethod
    def create(cls, shape, cfg: DenoiseConfig) -> "TrainState":
        shape = tuple(shape)
        net = init_network(subseed(cfg.seed, "init"), cfg.channels, cfg.n_layers)
        return cls(
            net=net,
            adam=AdamState(lr=cfg.lr),
            plan=MaskPlan(seed=cfg.seed),
            seed=cfg.seed,
            output=Aggregator(shape, "cumulative"),
            validation=(Aggregator(shape, "per-epoch"), Aggregator(shape, "per-epoch")),
            monitor=HaltingMonitor(cfg.patience),
            snapshot_limit=cfg.patience + HALF_WINDOW + 1,
        )


def _fit(net: Network, adam: AdamState, x, mask, target, loss_mask) -> tuple[np.ndarray, float]:
    out = net.forward(x, mask)[0]
    loss = bce_loss(out, target, loss_mask)
    if not math.isfinite(loss):
        raise NumericalError(f"non-finite training loss {loss}")
    grads = net.backward(bce_logit_grad(out, target, loss_mask))
    if not all(np.all(np.isfinite(g)) for g in grads):
        raise NumericalError("non-finite gradient")
    adam_step(net.parameters(), grads, adam)
    return out, loss


def train_step(state: TrainState, img: np.ndarray, masks) -> TrainState:
    """One masked forward/backward/Adam step; visible outputs feed the aggregate."""
    input_mask, loss_mask = masks
    img = np.asarray(img, dtype=np.float64)
    out, state.last_loss = _fit(state.net, state.adam, img * input_mask, input_mask, img, loss_mask)
    state.output.push(out, input_mask > 0)
    state.iteration += 1
    return state


def validation_step(state: TrainState, even_filled, odd_filled, iteration: int) -> TrainState:
    """Forward one randomly chosen filled image under a fresh mask."""
    parity = int(substream(state.seed, "parity", iteration).integers(2))
    src = np.asarray(even_filled if parity == Parity.EVEN.value else odd_filled, dtype=np.float64)
    mask = _hide(src.shape, state.plan.mask_rate, substream(state.seed, "validation", iteration))
    out = state.net.forward(src * mask, mask)[0]
    state.validation[parity].push(out, mask > 0)
    return state


def _parity_errors(state: TrainState, even_filled, odd_filled):
    # even-kept input predicts the odd-kept image and vice versa
    err = np.stack([
        (state.validation[0].average() - odd_filled) ** 2,
        (state.validation[1].average() - even_filled) ** 2,
    ])
    ok = np.stack([state.validation[0].resolved, state.validation[1].resolved])
    return err, ok


def epoch_close(state: TrainState, even_filled, odd_filled) -> Optional[int]:
    """Close the current epoch; return the selected epoch if halting fired."""
    err, ok = _parity_errors(state, even_filled, odd_filled)
    verdict = None
    if state.prev_err is not None:
        both = ok & state.prev_ok
        if both.any():
            q = float(np.count_nonzero(err[both] > state.prev_err[both]) / np.count_nonzero(both))
        else:
            q = state.monitor.q[-1] if state.monitor.q else 0.0
        verdict = state.monitor.push(state.epoch, q)
    state.prev_err, state.prev_ok = err, ok
    for agg in state.validation:
        agg.reset()

    state.snapshots[state.epoch] = (state.output.sum.copy(), state.output.count.copy())
    while len(state.snapshots) > state.snapshot_limit:
        state.snapshots.popitem(last=False)
    if verdict is not None:
        state.halted = True
        state.best_epoch = verdict
    state.epoch += 1
    return verdict


# ----------------------------------------------------------------------
# drivers
# ----------------------------------------------------------------------

def select_snapshot(state: TrainState):
    """(epoch, sum, count) of the cumulative aggregate to return.

    The s-minimising epoch when it is still buffered (always the case after
    halting), else the live aggregate with epoch None.
    """
    chosen = state.best_epoch if state.halted else state.monitor.best_epoch
    if chosen is not None and chosen in state.snapshots:
        agg_sum, agg_count = state.snapshots[chosen]
        return chosen, agg_sum, agg_count
    return None, state.output.sum, state.output.count


def filled_pair(img: np.ndarray, fill: str = "domino", seed: int = 0):
    """(even_filled, odd_filled) for an even-sized image under a fill strategy."""
    if fill == "domino":
        return pixel_domino_pair(img)
    if fill not in FILLS:
        raise ValueError(f"unknown fill {fill!r}")
    if fill == "rand":
        even = FILLS[fill](img, Parity.EVEN, seed=subseed(seed, "rand-fill-even"))
        odd = FILLS[fill](img, Parity.ODD, seed=subseed(seed, "rand-fill-odd"))
        return even, odd
    return FILLS[fill](img, Parity.EVEN), FILLS[fill](img, Parity.ODD)


def _finish(avg_sum, avg_count, noisy):
    ok = avg_count > 0
    out = np.where(ok, avg_sum / np.maximum(avg_count, 1), noisy)
    unresolved = int(np.count_nonzero(~ok))
    if unresolved:
        warnings.warn(f"{unresolved} pixels never observed; copied from the noisy input")
    return np.clip(out, 0.0, 1.0), unresolved


def _as_data(img) -> np.ndarray:
    return np.asarray(img.data if isinstance(img, Image) else img, dtype=np.float64)


def denoise(img, cfg: DenoiseConfig = DenoiseConfig()):
    """Denoise one image; returns (Image, report dict)."""
    if cfg.mode == "n2f-domino":
        return n2f_domino_denoise(img, cfg)
    start = time.perf_counter()
    noisy = _as_data(img)
    padded, info = pad_to_even(noisy)
    even_filled, odd_filled = filled_pair(padded, cfg.fill, cfg.seed)
    state = TrainState.create(padded.shape, cfg)

    for it in range(cfg.max_iterations):
        train_step(state, padded, sample_masks(padded.shape, state.plan, it))
        validation_step(state, even_filled, odd_filled, it)
        if (it + 1) % cfg.epoch_len == 0 and epoch_close(state, even_filled, odd_filled) is not None:
            break

    mon = state.monitor
    chosen, agg_sum, agg_count = select_snapshot(state)
    out, unresolved = _finish(crop(agg_sum, info), crop(agg_count, info), noisy)
    report = {
        "mode": cfg.mode,
        "fill": cfg.fill,
        "iterations": state.iteration,
        "epochs": state.epoch,
        "halted": state.halted,
        "halting_epoch": state.epoch - 1 if state.halted else None,
        "best_epoch": chosen,
        "q": list(mon.q),
        "s": list(mon.s),
        "s_first_epoch": mon.s_epochs[0] if mon.s_epochs else None,
        "final_loss": state.last_loss,
        "unresolved_pixels": unresolved,
        "psnr_vs_input": psnr(out, noisy),
        "wall_time_s": time.perf_counter() - start,
    }
    return Image(out), report


def n2f_domino_denoise(img, cfg: DenoiseConfig):
    """Two-image training set (even_filled <-> odd_filled) with f(x) ~ x validation."""
    if cfg.mode != "n2f-domino":
        raise ValueError("n2f_domino_denoise requires mode 'n2f-domino'")
    start = time.perf_counter()
    noisy = _as_data(img)
    padded, info = pad_to_even(noisy)
    even_filled, odd_filled = filled_pair(padded, cfg.fill, cfg.seed)
    net = init_network(subseed(cfg.seed, "init"), cfg.channels, cfg.n_layers)
    adam = AdamState(lr=cfg.lr)
    ones = np.ones(padded.shape)
    everywhere = np.ones(padded.shape, dtype=bool)
    pairs = ((even_filled, odd_filled), (odd_filled, even_filled))

    losses: list[float] = []
    best_loss, best_check, best_out, stale = math.inf, None, None, 0
    iterations = 0
    last_loss = float("nan")
    for it in range(cfg.max_iterations):
        src, dst = pairs[it % 2]
        _, last_loss = _fit(net, adam, src, ones, dst, everywhere)
        iterations += 1
        if iterations % cfg.n2f_check_interval:
            continue
        pred = net.forward(padded, ones)[0]
        val = float(np.mean((pred - padded) ** 2))
        losses.append(val)
        if val < best_loss:
            best_loss, best_check, best_out, stale = val, len(losses) - 1, pred, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    halted = stale >= cfg.patience
    if best_out is None:
        best_out = net.forward(padded, ones)[0]
    out = np.clip(crop(best_out, info), 0.0, 1.0)
    report = {
        "mode": cfg.mode,
        "fill": cfg.fill,
        "iterations": iterations,
        "epochs": len(losses),
        "halted": halted,
        "halting_epoch": len(losses) - 1 if halted else None,
        "best_epoch": best_check,
        "q": [],
        "s": [],
        "validation_mse": losses,
        "final_loss": last_loss,
        "unresolved_pixels": 0,
        "psnr_vs_input": psnr(out, noisy),
        "wall_time_s": time.perf_counter() - start,
    }
    return Image(out), report
