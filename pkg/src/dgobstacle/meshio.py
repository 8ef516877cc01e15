"""Mesh export: legacy VTK and a line-oriented text format."""
import numpy as np

from .mesh import Mesh


def write_vtk(path, mesh, cell_data=None, title="dgobstacle mesh"):
    """Write an ASCII legacy-VTK unstructured grid of triangles (cell type 5)."""
    nv, nt = mesh.n_vertices, mesh.n_elements
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} 0.0\n")
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.elements:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        if cell_data:
            fh.write(f"CELL_DATA {nt}\n")
            for name, values in cell_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(values, dtype=float):
                    fh.write(f"{float(v)!r}\n")


def read_vtk(path):
    """Parse points, triangles and cell types back from :func:`write_vtk` output."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    it = iter(tokens)
    points = cells = types = None
    for line in it:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "POINTS":
            n = int(parts[1])
            points = np.array([[float(t) for t in next(it).split()] for _ in range(n)])
        elif parts[0] == "CELLS":
            n, size = int(parts[1]), int(parts[2])
            rows = [[int(t) for t in next(it).split()] for _ in range(n)]
            if sum(len(r) for r in rows) != size:
                raise ValueError("CELLS size field does not match the cell list")
            cells = rows
        elif parts[0] == "CELL_TYPES":
            n = int(parts[1])
            types = np.array([int(next(it)) for _ in range(n)])
    return points, cells, types


def dumps_text(mesh):
    """Line-oriented text format used for golden files."""
    lines = ["vertices:"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.vertices]
    lines.append("elements:")
    lines += [f"{a} {b} {c} {r} {g}" for (a, b, c), r, g in
              zip(mesh.elements, mesh.ref_edge, mesh.generation)]
    return "\n".join(lines) + "\n"


def loads_text(text, bounds=None):
    verts, elems, section = [], [], None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line in ("vertices:", "elements:"):
            section = line[:-1]
            continue
        parts = line.split()
        if section == "vertices":
            verts.append([float(p) for p in parts])
        elif section == "elements":
            elems.append([int(p) for p in parts])
        else:
            raise ValueError(f"data outside a section: {line!r}")
    e = np.array(elems, dtype=np.int64).reshape(-1, 5)
    return Mesh(np.array(verts, dtype=float).reshape(-1, 2), e[:, :3].copy(), e[:, 3].copy(),
                e[:, 4].copy(), bounds)
