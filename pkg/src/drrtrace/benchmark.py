"""Render timing across DRR sizes, methods, and kernel backends.

Timing wraps the render call only (monotonic clock); ray-set construction
is included, file I/O never is.  The detector's physical size stays fixed
while the pixel count varies, so per-ray work is comparable across sizes.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from ._kernels import available_backends
from .geometry import DetectorSpec
from .gradients import render_with_gradient
from .raytrace import render, render_iterative


@dataclass
class BenchResult:
    size: int
    method: str
    backend: str
    repeats: int
    mean_s: float
    stdev_s: float


def _time_call(fn, repeats: int):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.mean(times), statistics.stdev(times) if len(times) > 1 else 0.0


def run_benchmark(volume, pose, sizes, repeats: int = 20, field_mm: float | None = None,
                  backends=None, include_gradient: bool = True) -> list[BenchResult]:
    """Time vectorized/iterative/gradient renders for each size and backend."""
    if backends is None:
        backends = available_backends()
    if field_mm is None:
        field_mm = 2.0 * max(volume.extent)
    results = []
    for size in sizes:
        pitch = field_mm / size
        spec = DetectorSpec.for_volume(volume, size, size, (pitch, pitch))
        for backend in backends:
            mean, stdev = _time_call(lambda: render(volume, pose, spec, backend=backend),
                                     repeats)
            results.append(BenchResult(size, "vectorized", backend, repeats, mean, stdev))
            mean, stdev = _time_call(
                lambda: render_iterative(volume, pose, spec, backend=backend), repeats)
            results.append(BenchResult(size, "iterative", backend, repeats, mean, stdev))
            if include_gradient:
                mean, stdev = _time_call(
                    lambda: render_with_gradient(volume, pose, spec, backend=backend),
                    repeats)
                results.append(BenchResult(size, "gradient", backend, repeats, mean, stdev))
    return results


def format_table(results: list[BenchResult]) -> str:
    lines = [f"{'size':>6} {'method':>12} {'backend':>8} {'mean':>12} {'stdev':>12}"]
    for r in results:
        lines.append(f"{r.size:>6} {r.method:>12} {r.backend:>8} "
                     f"{r.mean_s * 1e3:>10.3f}ms {r.stdev_s * 1e3:>10.3f}ms")
    return "\n".join(lines)
