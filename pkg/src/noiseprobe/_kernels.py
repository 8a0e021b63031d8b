"""Hot numeric kernels with two interchangeable implementations.

Every kernel exists twice: a scalar-loop form compiled with numba's @njit,
and a vectorized pure-numpy form.  The active path is chosen at import time
by the ``NOISEPROBE_NUMBA`` environment variable ("0"/"false"/"off" selects
the numpy path; anything else, or unset, selects numba when importable).

Both forms accumulate floating-point contributions in the same order, so
they produce bit-identical outputs; ``benchmarks/bench_kernels.py`` times
them against each other and asserts exact agreement.
"""

from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("NOISEPROBE_NUMBA", "1").strip().lower()
NUMBA_REQUESTED = _env not in ("0", "false", "off", "no")

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

USING_NUMBA = NUMBA_REQUESTED and NUMBA_AVAILABLE


# --------------------------------------------------------------------------
# scalar-loop forms (njit sources; also runnable as plain Python)

def _restore_pass_loop(vals, flags, r0, rmax):
    """One restoration pass: replace flagged samples by the inverse-distance
    weighted average of unflagged same-channel neighbors, growing the window
    from radius r0 up to rmax until any valid neighbor is found.

    Reads only the previous-pass buffers; samples left unresolved stay
    flagged for the next pass.
    """
    h, w, c = vals.shape
    new_vals = vals.copy()
    new_flags = flags.copy()
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                if not flags[y, x, ch]:
                    continue
                for r in range(r0, rmax + 1):
                    num = 0.0
                    den = 0.0
                    for dy in range(-r, r + 1):
                        yy = y + dy
                        if yy < 0 or yy >= h:
                            continue
                        for dx in range(-r, r + 1):
                            if dy == 0 and dx == 0:
                                continue
                            xx = x + dx
                            if xx < 0 or xx >= w:
                                continue
                            if flags[yy, xx, ch]:
                                continue
                            wgt = 1.0 / math.sqrt(dy * dy + dx * dx)
                            num += wgt * vals[yy, xx, ch]
                            den += wgt
                    if den > 0.0:
                        new_vals[y, x, ch] = math.floor(num / den + 0.5)
                        new_flags[y, x, ch] = False
                        break
    return new_vals, new_flags


def _conv_lines_loop(lines, kernel):
    """Convolve each row of *lines* with *kernel*, replicating edge samples."""
    n, m = lines.shape
    taps = kernel.shape[0]
    r = (taps - 1) // 2
    out = np.empty_like(lines)
    for i in range(n):
        for x in range(m):
            acc = 0.0
            for t in range(taps):
                idx = x + t - r
                if idx < 0:
                    idx = 0
                elif idx >= m:
                    idx = m - 1
                acc += kernel[t] * lines[i, idx]
            out[i, x] = acc
    return out


def _box_axis0_loop(src, starts, counts, weights, cell):
    """Box-average resampling along axis 0 using a precomputed tap table."""
    bins = starts.shape[0]
    _, m, c = src.shape
    out = np.empty((bins, m, c), dtype=np.float64)
    for i in range(bins):
        for x in range(m):
            for ch in range(c):
                acc = 0.0
                for t in range(counts[i]):
                    acc += weights[i, t] * src[starts[i] + t, x, ch]
                out[i, x, ch] = acc / cell
    return out


# --------------------------------------------------------------------------
# vectorized pure-numpy forms
#
# Per output element these perform the same multiply/add sequence as the
# loop forms (invalid contributions add exactly 0.0), keeping bit equality.

def _restore_pass_numpy(vals, flags, r0, rmax):
    h, w, _ = vals.shape
    new_vals = vals.copy()
    new_flags = flags.copy()
    pending = flags.copy()
    valid = ~flags
    vv = np.where(valid, vals, 0.0)
    vf = valid.astype(np.float64)
    for r in range(int(r0), int(rmax) + 1):
        if not pending.any():
            break
        num = np.zeros_like(vals)
        den = np.zeros_like(vals)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                if dy == 0 and dx == 0:
                    continue
                ys, ye = max(0, -dy), min(h, h - dy)
                xs, xe = max(0, -dx), min(w, w - dx)
                if ye <= ys or xe <= xs:
                    continue  # offset larger than the image; no overlap
                wgt = 1.0 / math.sqrt(dy * dy + dx * dx)
                num[ys:ye, xs:xe] += wgt * vv[ys + dy : ye + dy, xs + dx : xe + dx]
                den[ys:ye, xs:xe] += wgt * vf[ys + dy : ye + dy, xs + dx : xe + dx]
        resolved = pending & (den > 0.0)
        if resolved.any():
            new_vals[resolved] = np.floor(num[resolved] / den[resolved] + 0.5)
            new_flags[resolved] = False
            pending &= ~resolved
    return new_vals, new_flags


def _conv_lines_numpy(lines, kernel):
    n, m = lines.shape
    r = (kernel.shape[0] - 1) // 2
    padded = np.pad(lines, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(lines)
    for t in range(kernel.shape[0]):
        out += kernel[t] * padded[:, t : t + m]
    return out


def _box_axis0_numpy(src, starts, counts, weights, cell):
    bins = starts.shape[0]
    out = np.zeros((bins, src.shape[1], src.shape[2]), dtype=np.float64)
    for i in range(bins):
        for t in range(counts[i]):
            out[i] += weights[i, t] * src[starts[i] + t]
    return out / cell


# --------------------------------------------------------------------------
# path selection

if NUMBA_AVAILABLE:
    _restore_pass_njit = njit(cache=True)(_restore_pass_loop)
    _conv_lines_njit = njit(cache=True)(_conv_lines_loop)
    _box_axis0_njit = njit(cache=True)(_box_axis0_loop)
else:
    _restore_pass_njit = None
    _conv_lines_njit = None
    _box_axis0_njit = None

if USING_NUMBA:
    restore_pass = _restore_pass_njit
    conv_lines = _conv_lines_njit
    box_axis0 = _box_axis0_njit
else:
    restore_pass = _restore_pass_numpy
    conv_lines = _conv_lines_numpy
    box_axis0 = _box_axis0_numpy
