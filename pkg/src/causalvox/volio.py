"""File formats: BVOL volumes, stimulus text files, map CSVs, PGM slices.

A BVOL1 volume is an ASCII header of one field per line:

    BVOL1
    dims <nx> <ny> <nz>
    timepoints <T>
    tr_seconds <float>
    endian little
    data

immediately followed by exactly nx*ny*nz*T little-endian IEEE-754 32-bit
floats, voxel-major then time (each voxel's full series is contiguous, voxels
in row-major order).  Stimulus files are plain text, one "0" or "1" per line,
with an optional "# tr=<seconds>" comment.  All emission uses repr() floats
and fixed field orders, so output is locale-independent and byte-reproducible.
"""

import csv

import numpy as np

from .core import StimulusTrain, VoxelGrid
from .errors import FileFormatError, InvalidParameterError

_BVOL_MAGIC = "BVOL1"


def write_volume(path, grid: VoxelGrid) -> None:
    """Write a grid as a BVOL1 file (values stored as float32)."""
    nx, ny, nz = grid.dims
    header = (
        f"{_BVOL_MAGIC}\n"
        f"dims {nx} {ny} {nz}\n"
        f"timepoints {grid.n_timepoints}\n"
        f"tr_seconds {grid.tr_seconds!r}\n"
        "endian little\n"
        "data\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def quantized(grid: VoxelGrid) -> VoxelGrid:
    """The grid with every value rounded to its float32 representation.

    Volumes store float32, so a quantized grid round-trips through
    write_volume/read_volume bit-exactly.
    """
    return VoxelGrid(
        dims=grid.dims,
        values=grid.values.astype(np.float32).astype(np.float64),
        tr_seconds=grid.tr_seconds,
    )


def _read_header_line(fh, expect: str | None = None) -> str:
    raw = fh.readline()
    if not raw.endswith(b"\n"):
        raise FileFormatError("truncated volume header")
    try:
        line = raw[:-1].decode("ascii")
    except UnicodeDecodeError as exc:
        raise FileFormatError(f"non-ASCII volume header: {exc}") from None
    if expect is not None:
        parts = line.split()
        if not parts or parts[0] != expect:
            raise FileFormatError(f"expected header field {expect!r}, got {line!r}")
    return line


def read_volume(path) -> VoxelGrid:
    """Parse a BVOL1 file back into a VoxelGrid.

    Raises FileFormatError on a bad magic, malformed header fields, or a
    payload whose byte length is not exactly nx*ny*nz*T*4.
    """
    with open(path, "rb") as fh:
        magic = _read_header_line(fh)
        if magic != _BVOL_MAGIC:
            raise FileFormatError(f"bad magic {magic!r}; expected {_BVOL_MAGIC!r}")
        try:
            dims = tuple(int(v) for v in _read_header_line(fh, "dims").split()[1:])
            timepoints = int(_read_header_line(fh, "timepoints").split()[1])
            tr_seconds = float(_read_header_line(fh, "tr_seconds").split()[1])
        except (IndexError, ValueError) as exc:
            raise FileFormatError(f"malformed volume header: {exc}") from None
        if len(dims) != 3:
            raise FileFormatError(f"dims needs three values, got {dims}")
        endian = _read_header_line(fh, "endian")
        if endian.split()[1:] != ["little"]:
            raise FileFormatError(f"unsupported endian declaration {endian!r}")
        _read_header_line(fh, "data")
        payload = fh.read()
    n_vox = dims[0] * dims[1] * dims[2]
    expected = n_vox * timepoints * 4
    if n_vox <= 0 or timepoints <= 0:
        raise FileFormatError(f"non-positive dims/timepoints: {dims}, {timepoints}")
    if len(payload) != expected:
        raise FileFormatError(
            f"payload is {len(payload)} bytes; expected exactly {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n_vox, timepoints)
    try:
        return VoxelGrid(dims=dims, values=values.astype(np.float64), tr_seconds=tr_seconds)
    except InvalidParameterError as exc:
        raise FileFormatError(f"volume payload invalid: {exc}") from None


def write_stimulus(path, stim: StimulusTrain) -> None:
    lines = [f"# tr={stim.tr_seconds!r}\n"]
    lines.extend(f"{int(s)}\n" for s in stim.samples)
    with open(path, "w", newline="\n") as fh:
        fh.writelines(lines)


def read_stimulus(path) -> tuple[np.ndarray, float | None]:
    """Read a stimulus file; returns (samples, tr or None when undeclared)."""
    tr = None
    samples = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("tr="):
                    try:
                        tr = float(body[3:])
                    except ValueError:
                        raise FileFormatError(
                            f"{path}:{lineno}: bad tr declaration {line!r}"
                        ) from None
                continue
            if line not in ("0", "1"):
                raise FileFormatError(
                    f"{path}:{lineno}: stimulus samples must be 0 or 1, got {line!r}"
                )
            samples.append(int(line))
    if not samples:
        raise FileFormatError(f"{path}: no stimulus samples")
    return np.array(samples, dtype=np.float64), tr


MAP_CSV_FIELDS = ("x", "y", "z", "statistic", "p_value", "active")


def write_map_csv(path, results, dims: tuple[int, int, int]) -> None:
    """Write one row per voxel in row-major order: x,y,z,statistic,p_value,active."""
    nx, ny, nz = dims
    if len(results) != nx * ny * nz:
        raise InvalidParameterError(
            f"{len(results)} results for dims {dims} ({nx * ny * nz} voxels)"
        )
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(MAP_CSV_FIELDS) + "\n")
        index = 0
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    r = results[index]
                    fh.write(
                        f"{x},{y},{z},{r.statistic!r},{r.p_value!r},{int(r.active)}\n"
                    )
                    index += 1


def read_map_csv(path) -> list[dict]:
    """Read a map CSV into dicts with x, y, z, statistic, p_value, active."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MAP_CSV_FIELDS:
            raise FileFormatError(
                f"{path}: expected columns {','.join(MAP_CSV_FIELDS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append(
                    {
                        "x": int(row["x"]),
                        "y": int(row["y"]),
                        "z": int(row["z"]),
                        "statistic": float(row["statistic"]),
                        "p_value": float(row["p_value"]),
                        "active": bool(int(row["active"])),
                    }
                )
            except (TypeError, ValueError) as exc:
                raise FileFormatError(f"{path}:{lineno}: bad map row: {exc}") from None
    if not rows:
        raise FileFormatError(f"{path}: no map rows")
    return rows


def write_slice_pgms(prefix, results, dims: tuple[int, int, int]) -> list[str]:
    """Write one 8-bit binary PGM per axial slice, |statistic| scaled to 0-255.

    Scaling uses the maximum magnitude over the whole map so slices share one
    intensity scale.  Returns the written paths.
    """
    nx, ny, nz = dims
    mags = np.abs(np.array([r.statistic for r in results])).reshape(nx, ny, nz)
    peak = mags.max()
    scaled = (
        np.zeros_like(mags, dtype=np.uint8)
        if peak == 0.0
        else np.floor(255.0 * mags / peak + 0.5).astype(np.uint8)
    )
    paths = []
    for z in range(nz):
        path = f"{prefix}_z{z:03d}.pgm"
        # pixel (column x, row y) -> transpose the (x, y) slice
        image = scaled[:, :, z].T
        with open(path, "wb") as fh:
            fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
            fh.write(image.tobytes())
        paths.append(path)
    return paths


def write_truth_csv(path, truth, dims: tuple[int, int, int]) -> None:
    nx, ny, nz = dims
    flat = np.asarray(truth, dtype=bool).reshape(-1)
    if flat.size != nx * ny * nz:
        raise InvalidParameterError(f"{flat.size} truth entries for dims {dims}")
    with open(path, "w", newline="\n") as fh:
        fh.write("x,y,z,active\n")
        index = 0
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    fh.write(f"{x},{y},{z},{int(flat[index])}\n")
                    index += 1
