"""Throughput benchmark and MSE comparison of the integer and learned filters."""

from __future__ import annotations

import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import COMPONENT_NAMES
from .errors import InputError
from .interpf import check_geometry, filter_arrays, filter_records, max_sample
from .mlp import MlpModel, build_inputs, denormalize_output, forward_batch, learned_filter_arrays, mac_count

# integer multiplies per pixel in the traditional filter: two per blend, two in the output
TRADITIONAL_MULS_PER_PIXEL = 6


@dataclass
class FilterTiming:
    name: str
    pixels: int
    wall_ns: int
    macs_per_pixel: int

    @property
    def ns_per_pixel(self) -> float:
        return self.wall_ns / self.pixels

    @property
    def pixels_per_second(self) -> float:
        return self.pixels * 1e9 / self.wall_ns


@dataclass
class BenchReport:
    width: int
    height: int
    blocks: int
    iterations: int
    timings: list[FilterTiming] = field(default_factory=list)
    machine: str = ""

    def timing(self, name: str) -> FilterTiming:
        return next(t for t in self.timings if t.name == name)

    @property
    def ratio(self) -> float:
        """Learned over traditional ns/pixel."""
        return self.timing("learned").ns_per_pixel / self.timing("traditional").ns_per_pixel

    def to_dict(self) -> dict:
        d = asdict(self)
        for t, src in zip(d["timings"], self.timings):
            t["ns_per_pixel"] = src.ns_per_pixel
            t["pixels_per_second"] = src.pixels_per_second
        d["learned_over_traditional"] = self.ratio
        return d

    def format(self) -> str:
        lines = [f"geometry {self.width}x{self.height}, {self.blocks} blocks, "
                 f"{self.iterations} iterations ({self.machine})"]
        for t in self.timings:
            lines.append(
                f"{t.name:12s} pixels={t.pixels} ns/pixel={t.ns_per_pixel:.2f} "
                f"Mpix/s={t.pixels_per_second / 1e6:.2f} MACs/pixel={t.macs_per_pixel}"
            )
        lines.append(f"learned/traditional = {self.ratio:.2f}x")
        return "\n".join(lines)


def machine_note() -> str:
    return f"{platform.machine()} {platform.python_implementation()} {platform.python_version()} numpy {np.__version__}"


def random_contexts(n: int, width: int, height: int, bit_depth: int, seed: int):
    rng = np.random.default_rng(seed)
    hi = max_sample(bit_depth) + 1
    return (
        rng.integers(0, hi, size=(n, height, width), dtype=np.int32),
        rng.integers(0, hi, size=(n, width + 1), dtype=np.int32),
        rng.integers(0, hi, size=(n, height + 1), dtype=np.int32),
    )


def _time(fn, iterations: int, warmup: int) -> int:
    for _ in range(warmup):
        fn()
    start = time.perf_counter_ns()
    for _ in range(iterations):
        fn()
    return max(time.perf_counter_ns() - start, 1)


def run_bench(
    model: MlpModel,
    width: int = 16,
    height: int = 16,
    iterations: int = 20,
    blocks: int = 256,
    warmup: int = 2,
    seed: int = 0,
) -> BenchReport:
    """Time both filters on the same batch of random contexts.

    Model loading is not part of the measurement; ``warmup`` passes run
    first and are discarded.
    """
    if iterations < 1 or blocks < 1 or warmup < 0:
        raise InputError("iterations and blocks must be >= 1, warmup >= 0")
    check_geometry(width, height)
    pred, top, left = random_contexts(blocks, width, height, model.bit_depth, seed)
    pixels = iterations * blocks * width * height
    report = BenchReport(width, height, blocks, iterations, machine=machine_note())
    t_ns = _time(lambda: filter_arrays(pred, top, left), iterations, warmup)
    report.timings.append(FilterTiming("traditional", pixels, t_ns, TRADITIONAL_MULS_PER_PIXEL))
    l_ns = _time(lambda: learned_filter_arrays(model, pred, top, left), iterations, warmup)
    report.timings.append(FilterTiming("learned", pixels, l_ns, mac_count(model)))
    return report


@dataclass
class CompareReport:
    dataset: str
    records: int
    mse_prediction: float
    mse_traditional: float
    mse_learned: float
    per_component: dict = field(default_factory=dict)

    def format(self) -> str:
        lines = [
            f"dataset {self.dataset} ({self.records} records)",
            f"{'':10s} {'prediction':>12s} {'traditional':>12s} {'learned':>12s}",
            f"{'all':10s} {self.mse_prediction:12.4f} {self.mse_traditional:12.4f} {self.mse_learned:12.4f}",
        ]
        for name, (a, b, c, n) in self.per_component.items():
            lines.append(f"{name + f' ({n})':10s} {a:12.4f} {b:12.4f} {c:12.4f}")
        return "\n".join(lines)


def traditional_on_records(records: np.ndarray) -> np.ndarray:
    r = records
    return filter_records(r["r1"], r["r2"], r["r3"], r["r4"], r["p"], r["x"], r["y"], r["w"], r["h"])


def learned_on_records(model: MlpModel, records: np.ndarray) -> np.ndarray:
    r = records
    inputs = build_inputs(model.scheme, r["r1"], r["r2"], r["r3"], r["r4"], r["p"], r["x"], r["y"],
                          model.normalization)
    return denormalize_output(forward_batch(model, inputs), model.normalization, model.bit_depth)


def _mse(a: np.ndarray, g: np.ndarray) -> float:
    diff = a.astype(np.float64) - g
    return float(np.mean(diff * diff)) if diff.size else 0.0


def compare(model: MlpModel, records: np.ndarray, dataset_id: str = "") -> CompareReport:
    """MSE against the original samples for raw prediction and both filters."""
    if records.size == 0:
        raise InputError("no records to compare")
    g = records["g"].astype(np.float64)
    pred = records["p"]
    trad = traditional_on_records(records)
    learned = learned_on_records(model, records)
    report = CompareReport(dataset_id, int(records.size), _mse(pred, g), _mse(trad, g), _mse(learned, g))
    for i, name in enumerate(COMPONENT_NAMES):
        sel = records["component"] == i
        if sel.any():
            report.per_component[name] = (
                _mse(pred[sel], g[sel]), _mse(trad[sel], g[sel]), _mse(learned[sel], g[sel]),
                int(sel.sum()),
            )
    return report
