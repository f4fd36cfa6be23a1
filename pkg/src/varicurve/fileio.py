"""ASCII file formats: point clouds (.vc), OFF meshes, and field CSVs.

Point-cloud format, whitespace separated, locale independent:

    # varicurve n=<n> d=<d> N=<N>
    x_1 ... x_n  mass  b_11 ... b_1n  ...  b_d1 ... b_dn

one record per point, the b rows being an orthonormal tangent basis
(row-major).  All floats print with 17 significant digits, so a write/read
round trip reproduces every value bit for bit.
"""

from __future__ import annotations

import re

import numpy as np

from .errors import ParseError
from .geometry import CurvatureField, PointCloudVarifold, TriMesh, VolumetricVarifold

_HEADER_RE = re.compile(r"#\s*varicurve\s+n=(\d+)\s+d=(\d+)\s+N=(\d+)\s*$")
_VOL_HEADER_RE = re.compile(r"#\s*varicurve-vol\s+n=(\d+)\s+d=(\d+)\s+K=(\d+)\s*$")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _basis_rows(cloud: PointCloudVarifold, i: int) -> np.ndarray:
    return cloud.tangent_basis(i)


def write_cloud(path, cloud: PointCloudVarifold) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# varicurve n={cloud.n} d={cloud.d} N={len(cloud)}\n")
        for i in range(len(cloud)):
            row = list(cloud.points[i]) + [cloud.masses[i]]
            row += list(_basis_rows(cloud, i).ravel())
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_cloud(path) -> PointCloudVarifold:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty file", line=1)
    match = _HEADER_RE.match(lines[0].strip())
    if not match:
        raise ParseError("expected header '# varicurve n=<n> d=<d> N=<N>'", line=1)
    n, d, count = (int(g) for g in match.groups())
    if not 1 <= d < n:
        raise ParseError(f"invalid dimensions n={n} d={d}", line=1)
    width = n + 1 + d * n
    records = []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split()
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, found {len(fields)}", line=lineno)
        try:
            records.append(([float(v) for v in fields], lineno))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if len(records) != count:
        raise ParseError(f"header promised {count} records, found {len(records)}",
                         line=len(lines))
    data = np.array([r for r, _ in records])
    points = data[:, :n]
    masses = data[:, n]
    bases = data[:, n + 1:].reshape(count, d, n)
    gram = np.einsum("nki,nli->nkl", bases, bases)
    bad = np.flatnonzero(np.max(np.abs(gram - np.eye(d)), axis=(1, 2)) > 1e-8)
    if bad.size:
        raise ParseError("tangent basis rows are not orthonormal",
                         line=records[bad[0]][1])
    if np.any(masses <= 0):
        bad = int(np.flatnonzero(masses <= 0)[0])
        raise ParseError("mass must be positive", line=records[bad][1])
    planes = np.einsum("nki,nkj->nij", bases, bases)
    return PointCloudVarifold(points, masses, planes, d, bases=bases, validate=False)


def write_volumetric(path, vol: VolumetricVarifold) -> None:
    """Companion cell format: lo corner, hi corner, mass, basis rows."""
    from .geometry import projector_basis

    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# varicurve-vol n={vol.n} d={vol.d} K={len(vol)}\n")
        for k in range(len(vol)):
            basis = projector_basis(vol.planes[k], vol.d)
            row = list(vol.cells_lo[k]) + list(vol.cells_hi[k]) + [vol.masses[k]]
            row += list(basis.ravel())
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def read_volumetric(path) -> VolumetricVarifold:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    if not lines:
        raise ParseError("empty file", line=1)
    match = _VOL_HEADER_RE.match(lines[0].strip())
    if not match:
        raise ParseError("expected header '# varicurve-vol n=<n> d=<d> K=<K>'", line=1)
    n, d, count = (int(g) for g in match.groups())
    width = 2 * n + 1 + d * n
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        fields = text.split()
        if len(fields) != width:
            raise ParseError(f"expected {width} fields, found {len(fields)}", line=lineno)
        try:
            rows.append([float(v) for v in fields])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    if len(rows) != count:
        raise ParseError(f"header promised {count} records, found {len(rows)}",
                         line=len(lines))
    data = np.array(rows)
    lo, hi = data[:, :n], data[:, n:2 * n]
    masses = data[:, 2 * n]
    bases = data[:, 2 * n + 1:].reshape(count, d, n)
    planes = np.einsum("nki,nkj->nij", bases, bases)
    return VolumetricVarifold(lo, hi, masses, planes, d, validate=False)


def read_off(path) -> TriMesh:
    """ASCII OFF triangle mesh reader."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.readlines()
    content = [(i + 1, ln.strip()) for i, ln in enumerate(lines)
               if ln.strip() and not ln.strip().startswith("#")]
    if not content:
        raise ParseError("empty file", line=1)
    lineno, first = content[0]
    if first != "OFF":
        raise ParseError("expected 'OFF' header", line=lineno)
    if len(content) < 2:
        raise ParseError("missing counts line", line=lineno)
    lineno, counts = content[1]
    parts = counts.split()
    if len(parts) < 2:
        raise ParseError("counts line needs at least vertex and face counts", line=lineno)
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("counts must be integers", line=lineno) from None
    body = content[2:]
    if len(body) < nv + nf:
        raise ParseError(f"expected {nv} vertices and {nf} faces", line=len(lines))
    verts = []
    for lineno, text in body[:nv]:
        fields = text.split()
        if len(fields) < 3:
            raise ParseError("vertex needs 3 coordinates", line=lineno)
        try:
            verts.append([float(v) for v in fields[:3]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    faces = []
    for lineno, text in body[nv:nv + nf]:
        fields = text.split()
        try:
            arity = int(fields[0])
        except (ValueError, IndexError):
            raise ParseError("face line must start with its vertex count", line=lineno) from None
        if arity != 3 or len(fields) < 4:
            raise ParseError("only triangle faces are supported", line=lineno)
        try:
            faces.append([int(v) for v in fields[1:4]])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
    try:
        return TriMesh(np.array(verts), np.array(faces))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def write_off(path, mesh: TriMesh) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(" ".join(_fmt(x) for x in v) + "\n")
        for f in mesh.faces:
            fh.write("3 " + " ".join(str(int(i)) for i in f) + "\n")


def write_field_csv(path, points, field: CurvatureField) -> None:
    """Per-point CSV: index, coordinates, vector components, modulus, valid."""
    points = np.atleast_2d(points)
    n = points.shape[1]
    coord_names = ["x", "y", "z"][:n] if n <= 3 else [f"x{k}" for k in range(n)]
    comp_names = [f"H_{c}" for c in coord_names]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("index," + ",".join(coord_names) + "," + ",".join(comp_names)
                 + ",H_norm,valid\n")
        for i in range(len(points)):
            row = [str(i)]
            row += [_fmt(v) for v in points[i]]
            row += [_fmt(v) for v in field.vectors[i]]
            row += [_fmt(field.magnitudes[i]), str(int(field.valid[i]))]
            fh.write(",".join(row) + "\n")
