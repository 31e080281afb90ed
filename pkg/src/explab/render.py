"""Tiled rasterization of parameter-plane classes and dynamical-plane escape times."""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from explab import _kernels as K
from explab._parallel import resolve_threads, run_all
from explab.classify import ClassifySettings, CycleNotFound, detect_attracting_cycle
from explab.orbit import EscapePolicy, Param

TILE = 64

# dynamical-plane pixel kinds
DYN_BOUNDED = 0
DYN_ESCAPED = 1
DYN_BASIN = 2


@dataclass(frozen=True)
class ViewRect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("rectangle must satisfy re_min < re_max and im_min < im_max")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")

    def pixel_value(self, x: int, y: int) -> complex:
        """Center of pixel (x, y); (0, 0) is the top-left corner."""
        dx = (self.re_max - self.re_min) / self.width
        dy = (self.im_max - self.im_min) / self.height
        return complex(self.re_min + (x + 0.5) * dx, self.im_max - (y + 0.5) * dy)

    def grid(self, x0: int = 0, x1: int | None = None, y0: int = 0, y1: int | None = None
             ) -> np.ndarray:
        x1 = self.width if x1 is None else x1
        y1 = self.height if y1 is None else y1
        dx = (self.re_max - self.re_min) / self.width
        dy = (self.im_max - self.im_min) / self.height
        re = self.re_min + (np.arange(x0, x1) + 0.5) * dx
        im = self.im_max - (np.arange(y0, y1) + 0.5) * dy
        return re[None, :] + 1j * im[:, None]

    def tiles(self, size: int = TILE) -> list[tuple[int, int, int, int]]:
        return [(x, min(x + size, self.width), y, min(y + size, self.height))
                for y in range(0, self.height, size) for x in range(0, self.width, size)]

    def to_json(self) -> dict:
        return {"re_min": self.re_min, "re_max": self.re_max, "im_min": self.im_min,
                "im_max": self.im_max, "width": self.width, "height": self.height}


@dataclass(frozen=True)
class ImageBuffer:
    width: int
    height: int
    pixels: bytes = field(repr=False)

    def __post_init__(self):
        if len(self.pixels) != 3 * self.width * self.height:
            raise ValueError("pixel buffer length must be 3 * width * height")

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        i = 3 * (y * self.width + x)
        return tuple(self.pixels[i:i + 3])

    @classmethod
    def from_array(cls, rgb: np.ndarray) -> "ImageBuffer":
        h, w, _ = rgb.shape
        return cls(w, h, np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def _default_cycle_colors() -> tuple[tuple[int, int, int], ...]:
    return ((230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
            (145, 30, 180), (70, 240, 240), (240, 50, 230), (210, 245, 60), (250, 190, 212),
            (0, 128, 128), (170, 110, 40))


@dataclass(frozen=True)
class Palette:
    cycle_colors: tuple[tuple[int, int, int], ...] = field(default_factory=_default_cycle_colors)
    escape_lo: tuple[int, int, int] = (20, 20, 90)
    escape_hi: tuple[int, int, int] = (255, 255, 200)
    escape_span: int = 40
    candidate: tuple[int, int, int] = (255, 255, 255)
    undecided: tuple[int, int, int] = (0, 0, 0)

    def attracting_color(self, period: int) -> tuple[int, int, int]:
        return self.cycle_colors[period % len(self.cycle_colors)]

    def escape_color(self, index: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in self._escape_table()[min(index, self.escape_span)])

    def _escape_table(self) -> np.ndarray:
        t = np.linspace(0.0, 1.0, self.escape_span + 1)[:, None]
        lo = np.array(self.escape_lo, float)
        hi = np.array(self.escape_hi, float)
        return np.rint(hi + (lo - hi) * np.sqrt(t)).astype(np.uint8)

    def class_color(self, tag: int, period: int, escape_index: int) -> tuple[int, int, int]:
        if tag == K.TAG_ATTRACTING:
            return self.attracting_color(period)
        if tag == K.TAG_ESCAPING:
            return self.escape_color(escape_index)
        if tag == K.TAG_CANDIDATE:
            return self.candidate
        return self.undecided

    def colorize(self, tags: np.ndarray, periods: np.ndarray, esc: np.ndarray) -> np.ndarray:
        out = np.zeros(tags.shape + (3,), np.uint8)
        cyc = np.array(self.cycle_colors, np.uint8)
        att = tags == K.TAG_ATTRACTING
        out[att] = cyc[periods[att] % len(cyc)]
        es = tags == K.TAG_ESCAPING
        out[es] = self._escape_table()[np.minimum(esc[es], self.escape_span)]
        out[tags == K.TAG_CANDIDATE] = self.candidate
        out[tags == K.TAG_UNDECIDED] = self.undecided
        return out


@dataclass
class ClassGrid:
    tags: np.ndarray
    periods: np.ndarray
    escape_index: np.ndarray


def classify_grid(rect: ViewRect, settings: ClassifySettings, threads: int | None = None,
                  tile: int = TILE) -> ClassGrid:
    """Per-pixel classification over 64x64 tiles; each tile writes a disjoint block."""
    tags = np.empty((rect.height, rect.width), np.int8)
    periods = np.empty((rect.height, rect.width), np.int32)
    esc = np.empty((rect.height, rect.width), np.int32)
    thr, budget, delta, ctol, mp, rtol, margin, nit = settings.kernel_args()

    def work(x0, x1, y0, y1):
        lams = rect.grid(x0, x1, y0, y1).ravel()
        n = lams.size
        t = np.empty(n, np.int8)
        p = np.empty(n, np.int32)
        e = np.empty(n, np.int32)
        h = np.empty(n, np.bool_)
        K.classify_many(lams, thr, budget, delta, ctol, mp, rtol, margin, nit, 0.0, 0.0,
                        t, p, e, h)
        shape = (y1 - y0, x1 - x0)
        tags[y0:y1, x0:x1] = t.reshape(shape)
        periods[y0:y1, x0:x1] = p.reshape(shape)
        esc[y0:y1, x0:x1] = e.reshape(shape)

    run_all([lambda b=b: work(*b) for b in rect.tiles(tile)], threads)
    return ClassGrid(tags, periods, esc)


def render_parameter_plane(rect: ViewRect, policy: EscapePolicy | None = None,
                           delta: float = 1.0, palette: Palette | None = None,
                           threads: int | None = None, tile: int = TILE) -> ImageBuffer:
    """Color each pixel-center lambda by its class; lambda = 0 is Undecided."""
    settings = ClassifySettings(policy or EscapePolicy(max_iter=200), delta)
    grid = classify_grid(rect, settings, threads, tile)
    rgb = (palette or Palette()).colorize(grid.tags, grid.periods, grid.escape_index)
    return ImageBuffer.from_array(rgb)


@njit(cache=True, nogil=True)
def _dyn_kernel(lam, zs, threshold, max_iter, cycle, tol, kinds, iters):
    lam_abs = abs(lam)
    lam_arg = math.atan2(lam.imag, lam.real)
    tol2 = tol * tol
    for i in range(zs.shape[0]):
        z = zs[i]
        kind = DYN_BOUNDED
        count = max_iter
        for k in range(max_iter + 1):
            hit = False
            for j in range(cycle.shape[0]):
                d = z - cycle[j]
                if d.real * d.real + d.imag * d.imag < tol2:
                    hit = True
                    break
            if hit:
                kind = DYN_BASIN
                count = k
                break
            if k == max_iter:
                break
            w, esc = K.polar_step(lam_abs, lam_arg, z, threshold)
            if esc:
                kind = DYN_ESCAPED
                count = k + 1
                break
            z = w
        kinds[i] = kind
        iters[i] = count


def escape_grid(lam: Param | complex, rect: ViewRect, policy: EscapePolicy | None = None,
                threads: int | None = None, tile: int = TILE, basin_tol: float = 1e-6):
    """(kinds, iterations, cycle points) for each pixel-center z.

    The cycle points are those of the attracting cycle of lam, when one is found.
    """
    lam = Param.coerce(lam)
    policy = policy or EscapePolicy(max_iter=200)
    try:
        info = detect_attracting_cycle(lam, policy)
        cyc = [info.point]
        for _ in range(info.period - 1):
            cyc.append(K.step(lam.value, cyc[-1], K.EVAL_LIMIT)[0])
        cycle = np.array(cyc, np.complex128)
    except CycleNotFound:
        cycle = np.empty(0, np.complex128)
    kinds = np.empty((rect.height, rect.width), np.int8)
    iters = np.empty((rect.height, rect.width), np.int32)

    def work(x0, x1, y0, y1):
        zs = rect.grid(x0, x1, y0, y1).ravel()
        k = np.empty(zs.size, np.int8)
        it = np.empty(zs.size, np.int32)
        _dyn_kernel(lam.value, zs, policy.re_threshold, policy.max_iter, cycle, basin_tol, k, it)
        shape = (y1 - y0, x1 - x0)
        kinds[y0:y1, x0:x1] = k.reshape(shape)
        iters[y0:y1, x0:x1] = it.reshape(shape)

    run_all([lambda b=b: work(*b) for b in rect.tiles(tile)], threads)
    return kinds, iters, cycle


def render_dynamical_plane(lam: Param | complex, rect: ViewRect,
                           policy: EscapePolicy | None = None, palette: Palette | None = None,
                           threads: int | None = None, tile: int = TILE) -> ImageBuffer:
    """Escape-time coloring; basin pixels are shaded by the steps needed to reach the cycle."""
    palette = palette or Palette()
    kinds, iters, _ = escape_grid(lam, rect, policy, threads, tile)
    table = palette._escape_table()
    rgb = np.zeros(kinds.shape + (3,), np.uint8)
    es = kinds == DYN_ESCAPED
    rgb[es] = table[np.minimum(iters[es], palette.escape_span)]
    bs = kinds == DYN_BASIN
    base = np.array(palette.attracting_color(1), float)
    shade = 1.0 / (1.0 + 0.05 * iters[bs])[:, None]
    rgb[bs] = np.rint(base * (0.4 + 0.6 * shade)).astype(np.uint8)
    rgb[kinds == DYN_BOUNDED] = palette.undecided
    return ImageBuffer.from_array(rgb)


def ppm_bytes(image: ImageBuffer) -> bytes:
    return b"P6\n%d %d\n255\n" % (image.width, image.height) + image.pixels


def write_ppm(image: ImageBuffer, path: str | Path) -> None:
    """Binary P6; written to a temporary file in the target directory, then renamed."""
    write_atomic(path, ppm_bytes(image))


def write_atomic(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".",
                               prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
