"""Legacy ASCII VTK (UNSTRUCTURED_GRID) reader and writer for triangle meshes."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping

import numpy as np


class VTKFormatError(ValueError):
    pass


def _fmt(values) -> str:
    return "\n".join("%.17g" % v for v in np.asarray(values, dtype=float).ravel())


def write_vtk(path, vertices, triangles, point_data: Mapping[str, np.ndarray] | None = None,
              cell_data: Mapping[str, np.ndarray] | None = None, title: str = "hybridopt") -> None:
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    n, t = len(vertices), len(triangles)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " "), "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += ["%.17g %.17g 0" % (x, y) for x, y in vertices]
    lines.append(f"CELLS {t} {4 * t}")
    lines += [f"3 {a} {b} {c}" for a, b, c in triangles]
    lines.append(f"CELL_TYPES {t}")
    lines += ["5"] * t
    for kind, count, data in (("POINT_DATA", n, point_data), ("CELL_DATA", t, cell_data)):
        if not data:
            continue
        lines.append(f"{kind} {count}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float).ravel()
            if len(values) != count:
                raise ValueError(f"{name}: expected {count} values, got {len(values)}")
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk(path):
    """Return (title, vertices, triangles, point_data, cell_data)."""
    tokens_lines = Path(path).read_text().splitlines()
    if len(tokens_lines) < 4 or not tokens_lines[0].startswith("# vtk DataFile"):
        raise VTKFormatError("not a legacy VTK file")
    title = tokens_lines[1]
    if tokens_lines[2].strip() != "ASCII":
        raise VTKFormatError("only ASCII files are supported")
    if tokens_lines[3].strip() != "DATASET UNSTRUCTURED_GRID":
        raise VTKFormatError("only UNSTRUCTURED_GRID datasets are supported")
    tok = " ".join(tokens_lines[4:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        out = tok[pos:pos + k]
        if len(out) < k:
            raise VTKFormatError("unexpected end of file")
        pos += k
        return out

    vertices = triangles = None
    point_data: dict[str, np.ndarray] = {}
    cell_data: dict[str, np.ndarray] = {}
    target = None
    count = 0
    while pos < len(tok):
        key = take(1)[0]
        if key == "POINTS":
            n = int(take(2)[0])
            vertices = np.array(take(3 * n), dtype=float).reshape(n, 3)[:, :2]
        elif key == "CELLS":
            t, size = (int(v) for v in take(2))
            raw = np.array(take(size), dtype=np.int64).reshape(t, -1)
            if raw.shape[1] != 4 or np.any(raw[:, 0] != 3):
                raise VTKFormatError("only triangle cells are supported")
            triangles = raw[:, 1:]
        elif key == "CELL_TYPES":
            t = int(take(1)[0])
            types = np.array(take(t), dtype=int)
            if np.any(types != 5):
                raise VTKFormatError("only VTK_TRIANGLE (5) cells are supported")
        elif key in ("POINT_DATA", "CELL_DATA"):
            count = int(take(1)[0])
            target = point_data if key == "POINT_DATA" else cell_data
        elif key == "SCALARS":
            name, _, ncomp = take(3)
            if take(2)[0] != "LOOKUP_TABLE":
                raise VTKFormatError("expected LOOKUP_TABLE")
            if target is None:
                raise VTKFormatError("SCALARS outside a data section")
            target[name] = np.array(take(count * int(ncomp)), dtype=float)
        else:
            raise VTKFormatError(f"unsupported keyword {key!r}")
    if vertices is None or triangles is None:
        raise VTKFormatError("missing POINTS or CELLS")
    return title, vertices, triangles, point_data, cell_data
