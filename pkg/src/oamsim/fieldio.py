"""Field dumps: 16-bit PGM intensity images and complex CSV."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .fieldgrid import ComplexField, GridSpec


def _header(grid: GridSpec) -> str:
    return (f"nx={grid.nx} ny={grid.ny} dx={grid.dx!r} dy={grid.dy!r} "
            f"wavelength={grid.wavelength!r}")


def _parse_header(line: str) -> GridSpec:
    kv = dict(tok.split("=") for tok in line.strip().lstrip("#").split())
    return GridSpec(int(kv["nx"]), int(kv["ny"]), float(kv["dx"]), float(kv["dy"]),
                    float(kv["wavelength"]))


def write_pgm(path, image: np.ndarray, grid: GridSpec | None = None) -> Path:
    """Binary 16-bit PGM scaled to the image maximum; row-major, big-endian."""
    path = Path(path)
    img = np.asarray(image, dtype=float)
    peak = img.max()
    scaled = np.zeros_like(img) if peak <= 0 else img / peak
    data = np.round(scaled * 65535).astype(">u2")
    ny, nx = img.shape
    comment = f"# {_header(grid)}\n" if grid is not None else ""
    with open(path, "wb") as fh:
        fh.write(f"P5\n{comment}{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(data.tobytes())
    return path


def read_pgm(path) -> tuple[np.ndarray, GridSpec | None]:
    raw = Path(path).read_bytes()
    lines, pos, grid = [], 0, None
    while len(lines) < 3:
        end = raw.index(b"\n", pos)
        line = raw[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            grid = _parse_header(line)
        else:
            lines.append(line)
    if lines[0] != "P5":
        raise ValueError("not a binary PGM")
    nx, ny = (int(v) for v in lines[1].split())
    data = np.frombuffer(raw[pos:pos + 2 * nx * ny], dtype=">u2").reshape(ny, nx)
    return data.astype(float) / int(lines[2]), grid


def write_field_csv(path, f: ComplexField) -> Path:
    """One ``re,im`` pair per line in row-major order after a ``#`` header."""
    path = Path(path)
    flat = f.amplitude.ravel()
    with open(path, "w") as fh:
        fh.write(f"# {_header(f.grid)}\n")
        for v in flat:
            fh.write(f"{float(v.real)!r},{float(v.imag)!r}\n")
    return path


def read_field_csv(path) -> ComplexField:
    with open(path) as fh:
        grid = _parse_header(fh.readline())
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    amp = (data[:, 0] + 1j * data[:, 1]).reshape(grid.ny, grid.nx)
    return ComplexField(grid, amp)
