"""
Structured extruded hexahedral meshes of the reference rod G.

Coordinates are the stretched variables y; the mesh does not depend on the
thickness parameter. A 2D section template (tensor grid on the unit square,
tensor grid on the bounding box of piecewise rectangles, or a five-block
O-grid on the unit disc) is mapped to every longitudinal station and
consecutive stations are joined into 8-node hexes.

Hex node order: the section quad (q0, q1, q2, q3), counterclockwise in the
(y2, y3) plane, at the lower station, then the same quad at the upper station.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import CrossSectionProfile, Kind


class MeshError(ValueError):
    pass


class Tag(IntEnum):
    GAMMA0 = 0
    GAMMA1 = 1
    LATERAL = 2


_HEX_FACES = np.array([(0, 1, 2, 3), (4, 5, 6, 7), (0, 1, 5, 4),
                       (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)])

# local node -> (a, b, c) corner of [0,1]^3; a runs along y1
_QUAD_CORNERS = np.array([(0, 0), (1, 0), (1, 1), (0, 1)], dtype=float)
HEX_CORNERS = np.array([(a, b, c) for a in (0, 1) for (b, c) in _QUAD_CORNERS], dtype=float)

_G = 0.5 / math.sqrt(3.0)
GAUSS2 = np.array([0.5 - _G, 0.5 + _G])


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Extruded hexahedral mesh with boundary tags and per-layer section data."""

    nodes: np.ndarray                # (N, 3)
    hexes: np.ndarray                # (E, 8)
    faces: np.ndarray                # (F, 4) boundary faces
    tags: np.ndarray                 # (F,) Tag values
    layers: np.ndarray               # (n1 + 1,) station coordinates
    section_nodes: int               # nodes in the section template
    node_layer: np.ndarray           # (N,) layer index of each node
    layer_sections: list = field(repr=False)   # per layer: (node ids, section weights)
    profile: CrossSectionProfile | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_hexes(self) -> int:
        return len(self.hexes)

    def tagged_nodes(self, *tags: Tag) -> np.ndarray:
        sel = np.isin(self.tags, [int(t) for t in tags])
        return np.unique(self.faces[sel])

    def count_faces(self, tag: Tag) -> int:
        return int(np.count_nonzero(self.tags == int(tag)))


def longitudinal_grid(profile: CrossSectionProfile, n: int) -> np.ndarray:
    """Stations on [l0, l1] with ``n`` cells, uniform within each breakpoint segment."""
    if n < 2:
        raise MeshError("need at least 2 longitudinal cells")
    pts = np.array((profile.l0,) + tuple(profile.breakpoints) + (profile.l1,))
    seg = np.diff(pts)
    if np.any(seg < 2.0 * profile.length / n - 1e-12):
        raise MeshError(f"breakpoint spacing {seg.min():g} is finer than 2/{n} of the "
                        f"interval; increase the number of longitudinal cells")
    counts = _allocate(seg, n)
    grid = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(pts, pts[1:], counts)]
    return np.concatenate(grid + [pts[-1:]])


def _allocate(lengths: np.ndarray, n: int) -> np.ndarray:
    """Split ``n`` cells proportionally to ``lengths`` (largest remainder, >= 1 each)."""
    ideal = n * lengths / lengths.sum()
    counts = np.maximum(np.floor(ideal).astype(int), 1)
    while counts.sum() < n:
        counts[np.argmax(ideal - counts)] += 1
    while counts.sum() > n:
        cand = np.where(counts > 1)[0]
        counts[cand[np.argmin((ideal - counts)[cand])]] -= 1
    return counts


def _tensor_quads(nx: int, ny: int) -> np.ndarray:
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    q = np.stack([idx[:-1, :-1], idx[:-1, 1:], idx[1:, 1:], idx[1:, :-1]], axis=-1)
    return q.reshape(-1, 4)


def _unit_square_template(n_sec: int):
    s = np.linspace(0.0, 1.0, n_sec + 1)
    S, T = np.meshgrid(s, s)
    return np.column_stack([S.ravel(), T.ravel()]), _tensor_quads(n_sec, n_sec)


def _graded_lines(edges: np.ndarray, n: int) -> np.ndarray:
    if n < len(edges) - 1:
        raise MeshError(f"n_sec={n} cannot resolve {len(edges) - 1} section intervals")
    counts = _allocate(np.diff(edges), n)
    parts = [np.linspace(a, b, c + 1)[:-1] for a, b, c in zip(edges, edges[1:], counts)]
    return np.concatenate(parts + [edges[-1:]])


def _piecewise_template(profile: CrossSectionProfile, n_sec: int):
    rects = np.asarray(profile.params["rects"])
    e2 = np.unique(np.concatenate([-rects[:, 0], rects[:, 1]]))
    e3 = np.unique(np.concatenate([-rects[:, 2], rects[:, 3]]))
    g2, g3 = _graded_lines(e2, n_sec), _graded_lines(e3, n_sec)
    Y2, Y3 = np.meshgrid(g2, g3)
    pts = np.column_stack([Y2.ravel(), Y3.ravel()])
    quads = _tensor_quads(len(g2) - 1, len(g3) - 1)
    centers = pts[quads].mean(axis=1)
    masks = [(centers[:, 0] > -r[0]) & (centers[:, 0] < r[1]) &
             (centers[:, 1] > -r[2]) & (centers[:, 1] < r[3]) for r in rects]
    return pts, quads, masks


def disc_template(n_sec: int, core: float = 0.5):
    """Five-block O-grid of the unit disc, rescaled so its polygonal area is pi.

    The central square has ``m = max(1, n_sec // 2)`` cells per side; each of
    the four outer blocks has ``m`` tangential and ``m`` radial cells.
    """
    m = max(1, n_sec // 2)
    pts, quads = [], []

    def add_block(P):
        off = sum(len(p) for p in pts)
        ny, nx = P.shape[0] - 1, P.shape[1] - 1
        pts.append(P.reshape(-1, 2))
        quads.append(_tensor_quads(nx, ny) + off)

    u = np.linspace(-core, core, m + 1)
    U, V = np.meshgrid(u, u)
    add_block(np.stack([U, V], axis=-1))
    t = np.linspace(-1.0, 1.0, m + 1)
    rho = np.linspace(0.0, 1.0, m + 1)
    sq = np.column_stack([np.full_like(t, core), core * t])
    phi = t * math.pi / 4
    circ = np.column_stack([np.cos(phi), np.sin(phi)])
    block = (1 - rho)[:, None, None] * sq[None] + rho[:, None, None] * circ[None]
    for k in range(4):
        c, s = math.cos(k * math.pi / 2), math.sin(k * math.pi / 2)
        rot = np.array([[c, -s], [s, c]])
        add_block(block @ rot.T)
    P = np.concatenate(pts)
    Q = np.concatenate(quads)
    key = np.round(P, 12)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    P = P[first[order]]
    Q = remap[inv.ravel()][Q]
    x, y = P[Q, 0], P[Q, 1]
    area = 0.5 * (x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y).sum(axis=1)
    Q[area < 0] = Q[area < 0][:, ::-1]
    P = P * math.sqrt(math.pi / np.abs(area).sum())
    return P, Q


def _section_points(profile: CrossSectionProfile, template: np.ndarray, layers: np.ndarray):
    """Physical (y2, y3) of template nodes at every station, shape (n_layers, n_tpl, 2)."""
    if profile.kind is Kind.REVOLUTION:
        r = profile.radius(layers)
        return r[:, None, None] * template[None]
    if profile.kind is Kind.PIECEWISE_RECTS:
        return np.broadcast_to(template, (len(layers),) + template.shape)
    h1, h2, h3, h4 = profile.heights(layers)
    s, t = template[:, 0], template[:, 1]
    y2 = -h1[:, None] + s[None] * (h1 + h2)[:, None]
    y3 = -h3[:, None] + t[None] * (h3 + h4)[:, None]
    return np.stack([y2, y3], axis=-1)


def quad_weights(pts: np.ndarray, quads: np.ndarray, n_nodes: int) -> np.ndarray:
    """Integrals of the bilinear hat functions over a quad mesh (section mass row sums)."""
    w = np.zeros(n_nodes)
    X = pts[quads]                                            # (Q, 4, 2)
    for a in GAUSS2:
        for b in GAUSS2:
            N = np.array([(1 - a) * (1 - b), a * (1 - b), a * b, (1 - a) * b])
            dNa = np.array([-(1 - b), 1 - b, b, -b])
            dNb = np.array([-(1 - a), -a, a, 1 - a])
            J = np.stack([dNa @ X, dNb @ X], axis=-1)         # (Q, 2, 2)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            np.add.at(w, quads, 0.25 * det[:, None] * N[None])
    return w


def extrude_mesh(profile: CrossSectionProfile, n1: int, n_sec: int) -> HexMesh:
    """Mesh G with ``n1`` longitudinal cells and an ``n_sec``-resolution section."""
    if n_sec < 2:
        raise MeshError("n_sec must be >= 2")
    layers = longitudinal_grid(profile, n1)
    if profile.kind is Kind.PIECEWISE_RECTS:
        template, quads, masks = _piecewise_template(profile, n_sec)
    elif profile.kind is Kind.REVOLUTION:
        template, quads = disc_template(n_sec)
        masks = [np.ones(len(quads), bool)]
    else:
        template, quads = _unit_square_template(n_sec)
        masks = [np.ones(len(quads), bool)]
    nt = len(template)
    sec = _section_points(profile, template, layers)
    nodes = np.concatenate([np.column_stack([np.full(nt, y1), sec[j]])
                            for j, y1 in enumerate(layers)])
    node_layer = np.repeat(np.arange(len(layers)), nt)

    mids = 0.5 * (layers[:-1] + layers[1:])
    cell_seg = profile.segment_of(mids) if profile.breakpoints else np.zeros(n1, int)
    hexes = []
    for c in range(n1):
        q = quads[masks[cell_seg[c]]]
        hexes.append(np.hstack([q + c * nt, q + (c + 1) * nt]))
    hexes = np.concatenate(hexes)

    layer_seg = profile.segment_of(layers) if profile.breakpoints else np.zeros(len(layers), int)
    layer_quads = [quads[masks[s]] + j * nt for j, s in enumerate(layer_seg)]

    used = np.unique(hexes)
    if len(used) != len(nodes):
        remap = -np.ones(len(nodes), dtype=int)
        remap[used] = np.arange(len(used))
        hexes = remap[hexes]
        layer_quads = [remap[q] for q in layer_quads]
        nodes, node_layer = nodes[used], node_layer[used]

    layer_sections = []
    for q in layer_quads:
        ids = np.unique(q)
        local = np.searchsorted(ids, q)
        w = quad_weights(nodes[ids, 1:], local, len(ids))
        layer_sections.append((ids, w))

    faces, tags = _boundary_faces(hexes, nodes, profile.l0, profile.l1)
    mesh = HexMesh(nodes=nodes, hexes=hexes, faces=faces, tags=tags, layers=layers,
                   section_nodes=nt, node_layer=node_layer, layer_sections=layer_sections,
                   profile=profile)
    _, det, _ = hex_jacobians(mesh)
    if np.any(det <= 0):
        raise MeshError("non-positive hex Jacobian")
    return mesh


def _boundary_faces(hexes, nodes, l0, l1):
    allf = hexes[:, _HEX_FACES].reshape(-1, 4)
    key = np.sort(allf, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    faces = allf[cnt[inv.ravel()] == 1]
    y1 = nodes[faces, 0]
    tags = np.full(len(faces), int(Tag.LATERAL))
    tags[np.all(y1 == l0, axis=1)] = int(Tag.GAMMA0)
    tags[np.all(y1 == l1, axis=1)] = int(Tag.GAMMA1)
    return faces, tags


def shape_functions(a: float, b: float, c: float):
    """Trilinear shape values (8,) and reference gradients (8, 3) at (a, b, c) in [0,1]^3."""
    A = np.where(HEX_CORNERS == 1, [a, b, c], 1 - np.array([a, b, c]))
    dA = np.where(HEX_CORNERS == 1, 1.0, -1.0)
    N = A.prod(axis=1)
    dN = np.column_stack([dA[:, 0] * A[:, 1] * A[:, 2],
                          A[:, 0] * dA[:, 1] * A[:, 2],
                          A[:, 0] * A[:, 1] * dA[:, 2]])
    return N, dN


def gauss_points():
    """2x2x2 Gauss rule on [0,1]^3: list of ((a, b, c), weight)."""
    return [((a, b, c), 0.125) for a in GAUSS2 for b in GAUSS2 for c in GAUSS2]


def hex_jacobians(mesh: HexMesh):
    """Jacobians (E, 8q, 3, 3), determinants (E, 8q) and the reference data per point."""
    X = mesh.nodes[mesh.hexes]                                # (E, 8, 3)
    ref = [shape_functions(*p) for p, _ in gauss_points()]
    dN = np.stack([r[1] for r in ref])                        # (8q, 8, 3)
    J = np.einsum("enx,qnr->eqxr", X, dN)
    det = np.linalg.det(J)
    return J, det, ref


def mesh_volume(mesh: HexMesh) -> float:
    _, det, _ = hex_jacobians(mesh)
    return float(det.sum() * 0.125)


def write_mesh(mesh: HexMesh, path) -> None:
    """Plain-text dump: counts header, node lines, hex lines, tagged face lines."""
    with open(path, "w") as fh:
        fh.write(f"# thinrod hex mesh\n{mesh.n_nodes} {mesh.n_hexes} {len(mesh.faces)}\n")
        for i, (a, b, c) in enumerate(mesh.nodes):
            fh.write(f"{i} {a:.17g} {b:.17g} {c:.17g}\n")
        for i, h in enumerate(mesh.hexes):
            fh.write(f"{i} " + " ".join(map(str, h)) + "\n")
        for f, t in zip(mesh.faces, mesh.tags):
            fh.write(f"{Tag(t).name} " + " ".join(map(str, f)) + "\n")


def read_mesh_counts(path) -> tuple[int, int, int]:
    with open(path) as fh:
        fh.readline()
        n, e, f = (int(v) for v in fh.readline().split())
    return n, e, f
