#!/usr/bin/env python3
"""
Mesh - Simplicial meshes in 1D and 2D with bisection hierarchy

Features:
- Interval and rectangle mesh generators
- Midpoint (1D) and newest-vertex (2D) bisection with conforming closure
- One-level coarsening by inverse bisection
- Point location with deterministic lowest-id tie-break
- Geometry needed by the residual estimators (diameters, faces, normals)

Meshes are immutable: refine() and coarsen() return new meshes.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import PointOutsideDomain

logger = logging.getLogger(__name__)

# barycentric slack when deciding containment
BARY_TOL = 1e-12
# points this far outside (relative to diam(Omega)) are rejected
OUTSIDE_TOL = 1e-10
DIRICHLET = 1


@dataclass(frozen=True)
class ElementLocation:
    """Containing element and barycentric coordinates of a point."""
    element_id: int
    barycentric: Tuple[float, ...]


@dataclass(frozen=True)
class InteriorFaces:
    """Faces shared by two elements, oriented from lower to higher element id."""
    elements: np.ndarray   # (nf, 2), elements[:, 0] < elements[:, 1]
    vertices: np.ndarray   # (nf, d)
    measure: np.ndarray    # |e|; 1 in 1D (point faces)
    diameter: np.ndarray   # h_e
    normal: np.ndarray     # (nf, d) unit normal from elements[:, 0] to elements[:, 1]


@dataclass(frozen=True)
class CoarseningPatch:
    """Sibling group around a removable bisection vertex."""
    vertex: int
    elements: Tuple[int, ...]
    parents: Tuple[Tuple[int, ...], ...]
    generation: int


def _readonly(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Conforming simplicial mesh.

    2D elements are stored as (newest, a, b); the refinement edge is (a, b).
    1D elements are stored as (left, right).
    """
    vertices: np.ndarray
    elements: np.ndarray
    vertex_parents: Optional[np.ndarray] = None
    generation: Optional[np.ndarray] = None
    skipped_coarsen_marks: int = 0

    def __post_init__(self):
        vertices = np.asarray(self.vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        elements = np.asarray(self.elements, dtype=np.int64)
        if vertices.shape[1] not in (1, 2):
            raise ValueError(f"only 1D and 2D meshes are supported, got dimension {vertices.shape[1]}")
        if elements.ndim != 2 or elements.shape[1] != vertices.shape[1] + 1:
            raise ValueError("elements must have dimension+1 vertices each")
        parents = self.vertex_parents
        if parents is None:
            parents = -np.ones((len(vertices), 2), dtype=np.int64)
        generation = self.generation
        if generation is None:
            generation = np.zeros(len(elements), dtype=np.int64)
        object.__setattr__(self, 'vertices', _readonly(vertices, float))
        object.__setattr__(self, 'elements', _readonly(elements, np.int64))
        object.__setattr__(self, 'vertex_parents', _readonly(parents, np.int64))
        object.__setattr__(self, 'generation', _readonly(generation, np.int64))
        if np.any(self.signed_measures <= 0.0):
            bad = np.flatnonzero(self.signed_measures <= 0.0)
            raise ValueError(f"elements {bad[:5].tolist()} are not positively oriented")

    # ------------------------------------------------------------------
    # basic geometry
    # ------------------------------------------------------------------
    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_elements(self) -> int:
        return len(self.elements)

    @cached_property
    def signed_measures(self) -> np.ndarray:
        p = self.vertices[self.elements]
        if self.dimension == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def measures(self) -> np.ndarray:
        return self.signed_measures

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        """(ne, 3) lengths of the edge opposite each local vertex (2D only)."""
        p = self.vertices[self.elements]
        return np.stack([
            np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
            np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
        ], axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        """Element diameters h_tau."""
        if self.dimension == 1:
            return self.measures.copy()
        return self.edge_lengths.max(axis=1)

    @cached_property
    def inradii(self) -> np.ndarray:
        if self.dimension == 1:
            return 0.5 * self.measures
        return 2.0 * self.measures / self.edge_lengths.sum(axis=1)

    def shape_regularity(self) -> float:
        """max over elements of h_tau / inradius."""
        return float(np.max(self.diameters / self.inradii))

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    @cached_property
    def bounding_box(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def domain_measure(self) -> float:
        return float(self.measures.sum())

    @property
    def diameter(self) -> float:
        lower, upper = self.bounding_box
        return float(np.linalg.norm(upper - lower))

    @property
    def element_diameters(self) -> np.ndarray:
        return self.diameters

    @property
    def face_diameters(self) -> np.ndarray:
        return self.interior_faces.diameter

    # ------------------------------------------------------------------
    # topology
    # ------------------------------------------------------------------
    @cached_property
    def _face_table(self):
        """Local faces (face j is opposite local vertex j) and their global ids."""
        d = self.dimension
        columns = [[c for c in range(d + 1) if c != j] for j in range(d + 1)]
        local = np.stack([self.elements[:, cols] for cols in columns], axis=1)  # (ne, d+1, d)
        keys = np.sort(local.reshape(-1, d), axis=1)
        unique, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
        return unique, inverse.reshape(-1), counts

    @cached_property
    def interior_faces(self) -> InteriorFaces:
        unique, inverse, counts = self._face_table
        d = self.dimension
        owners = np.repeat(np.arange(self.num_elements), d + 1)
        order = np.argsort(inverse, kind='stable')
        sorted_faces = inverse[order]
        sorted_owners = owners[order]
        interior_ids = np.flatnonzero(counts == 2)
        starts = np.searchsorted(sorted_faces, interior_ids)
        pair = np.stack([sorted_owners[starts], sorted_owners[starts + 1]], axis=1)
        pair.sort(axis=1)
        face_vertices = unique[interior_ids]

        c_low = self.centroids[pair[:, 0]]
        c_high = self.centroids[pair[:, 1]]
        if d == 1:
            measure = np.ones(len(pair))
            diameter = 0.5 * (self.measures[pair[:, 0]] + self.measures[pair[:, 1]])
            normal = np.sign(c_high - c_low)
        else:
            tangent = self.vertices[face_vertices[:, 1]] - self.vertices[face_vertices[:, 0]]
            measure = np.linalg.norm(tangent, axis=1)
            diameter = measure.copy()
            normal = np.stack([tangent[:, 1], -tangent[:, 0]], axis=1) / measure[:, None]
            flip = np.einsum('ij,ij->i', normal, c_high - c_low) < 0.0
            normal[flip] *= -1.0
        return InteriorFaces(
            elements=_readonly(pair, np.int64),
            vertices=_readonly(face_vertices, np.int64),
            measure=_readonly(measure, float),
            diameter=_readonly(diameter, float),
            normal=_readonly(normal, float),
        )

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        unique, _, counts = self._face_table
        return _readonly(unique[counts == 1], np.int64)

    @property
    def boundary_markers(self) -> np.ndarray:
        return np.full(len(self.boundary_faces), DIRICHLET, dtype=np.int64)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return _readonly(np.unique(self.boundary_faces), np.int64)

    @cached_property
    def _vertex_star(self):
        flat = self.elements.reshape(-1)
        order = np.argsort(flat, kind='stable')
        owners = order // (self.dimension + 1)
        offsets = np.searchsorted(flat[order], np.arange(self.num_vertices + 1))
        return owners, offsets

    def vertex_elements(self, vertex: int) -> np.ndarray:
        """Ids of the elements containing a vertex, ascending."""
        owners, offsets = self._vertex_star
        return np.sort(owners[offsets[vertex]:offsets[vertex + 1]])

    def is_conforming(self) -> bool:
        """Every face is shared by at most two elements and no vertex hangs on a face."""
        _, _, counts = self._face_table
        if np.any(counts > 2):
            return False
        # a hanging vertex shows up as a boundary face lying inside the domain
        lower, upper = self.bounding_box
        tol = 1e-12 * max(1.0, self.diameter)
        mids = self.vertices[self.boundary_faces].mean(axis=1)
        on_box = np.any((np.abs(mids - lower) <= tol) | (np.abs(mids - upper) <= tol), axis=1)
        return bool(np.all(on_box))

    # ------------------------------------------------------------------
    # point location
    # ------------------------------------------------------------------
    @cached_property
    def _inverse_maps(self) -> np.ndarray:
        p = self.vertices[self.elements]
        basis = np.stack([p[:, j + 1] - p[:, 0] for j in range(self.dimension)], axis=2)
        return np.linalg.inv(basis)

    def barycentric(self, element_ids, points) -> np.ndarray:
        """Barycentric coordinates of points (n, d) in elements (n,)."""
        element_ids = np.asarray(element_ids, dtype=np.int64)
        points = np.asarray(points, dtype=float).reshape(len(element_ids), self.dimension)
        origin = self.vertices[self.elements[element_ids, 0]]
        local = np.einsum('nij,nj->ni', self._inverse_maps[element_ids], points - origin)
        return np.concatenate([1.0 - local.sum(axis=1, keepdims=True), local], axis=1)

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def locate(self, point) -> ElementLocation:
        point = np.asarray(point, dtype=float).reshape(1, self.dimension)
        ids, bary = self.locate_points(point)
        return ElementLocation(int(ids[0]), tuple(float(b) for b in bary[0]))

    def locate_points(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Vectorized point location.

        Returns element ids (n,) and barycentric coordinates (n, d+1).
        Points on shared faces resolve to the lowest element id.
        """
        points = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        n = len(points)
        ids = np.empty(n, dtype=np.int64)
        bary = np.empty((n, self.dimension + 1))
        if n == 0:
            return ids, bary

        k = min(self.num_elements, 8 if self.dimension == 2 else 3)
        _, candidates = self._centroid_tree.query(points, k=k)
        candidates = np.asarray(candidates).reshape(n, k)
        cand_bary = self.barycentric(candidates.reshape(-1), np.repeat(points, k, axis=0))
        cand_bary = cand_bary.reshape(n, k, self.dimension + 1)
        worst = cand_bary.min(axis=2)
        best = np.argmax(worst, axis=1)
        rows = np.arange(n)
        ids[:] = candidates[rows, best]
        bary[:] = cand_bary[rows, best]

        # strictly interior points have a unique owner; the rest need care
        for i in np.flatnonzero(worst[rows, best] < BARY_TOL):
            ids[i], bary[i] = self._locate_slow(points[i], int(ids[i]), bary[i])
        return ids, bary

    def _locate_slow(self, point, guess: int, guess_bary):
        if guess_bary.min() < -BARY_TOL:
            everything = np.arange(self.num_elements)
            all_bary = self.barycentric(everything, np.repeat(point[None, :], self.num_elements, axis=0))
            worst = all_bary.min(axis=1)
            guess = int(np.argmax(worst))
            guess_bary = all_bary[guess]
            if worst[guess] < -BARY_TOL:
                corners = self.vertices[self.elements[guess]]
                clipped = np.clip(guess_bary, 0.0, None)
                clipped /= clipped.sum()
                distance = float(np.linalg.norm(point - clipped @ corners))
                if distance > OUTSIDE_TOL * max(self.diameter, 1e-300):
                    raise PointOutsideDomain(point, distance)
                return guess, clipped

        # on a face or at a vertex: every owner shares the dominant vertex
        vertex = int(self.elements[guess, int(np.argmax(guess_bary))])
        star = self.vertex_elements(vertex)
        star_bary = self.barycentric(star, np.repeat(point[None, :], len(star), axis=0))
        inside = star_bary.min(axis=1) >= -BARY_TOL
        if not np.any(inside):
            return guess, guess_bary
        j = int(np.flatnonzero(inside)[0])
        return int(star[j]), star_bary[j]

    # ------------------------------------------------------------------
    # hierarchy
    # ------------------------------------------------------------------
    def coarsening_patches(self) -> List[CoarseningPatch]:
        """Sibling groups that inverse bisection can merge, one per removable vertex."""
        patches = []
        for vertex in np.flatnonzero(self.vertex_parents[:, 0] >= 0):
            patch = self._patch_around(int(vertex))
            if patch is not None:
                patches.append(patch)
        return patches

    def _patch_around(self, vertex: int) -> Optional[CoarseningPatch]:
        star = self.vertex_elements(vertex)
        parent_edge = set(self.vertex_parents[vertex].tolist())
        generation = int(self.generation[star].max()) if len(star) else 0

        if self.dimension == 1:
            if len(star) != 2:
                return None
            left, right = sorted(star, key=lambda e: self.centroids[e, 0])
            a, m1 = self.elements[left]
            m2, b = self.elements[right]
            if m1 != vertex or m2 != vertex or {int(a), int(b)} != parent_edge:
                return None
            return CoarseningPatch(vertex, tuple(int(e) for e in star), ((int(a), int(b)),), generation)

        if len(star) not in (2, 4) or np.any(self.elements[star, 0] != vertex):
            return None
        remaining = {int(e) for e in star}
        parents = []
        while remaining:
            first = min(remaining)
            _, x, y = (int(v) for v in self.elements[first])
            match = None
            for e in sorted(remaining - {first}):
                _, u, w = (int(v) for v in self.elements[e])
                # children of (p, a, b) are (m, p, a) and (m, b, p)
                if w == x and {y, u} == parent_edge:
                    match = e, (x, y, u)
                    break
                if u == y and {x, w} == parent_edge:
                    match = e, (y, w, x)
                    break
            if match is None:
                return None
            sibling, parent = match
            parents.append(parent)
            remaining -= {first, sibling}
        return CoarseningPatch(vertex, tuple(int(e) for e in star), tuple(parents), generation)


# ----------------------------------------------------------------------
# constructors
# ----------------------------------------------------------------------
def interval_mesh(a: float, b: float, n: int) -> Mesh:
    """Uniform mesh of [a, b] with n intervals."""
    if n < 1 or not b > a:
        raise ValueError("interval mesh needs n >= 1 and b > a")
    x = np.linspace(a, b, n + 1)
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    return Mesh(x[:, None], elements)


def rectangle_mesh(lower, upper, nx: int, ny: int) -> Mesh:
    """
    Uniform triangulation of a rectangle, each cell cut along its
    main diagonal. The diagonal is the refinement edge of both halves.
    """
    (x0, y0), (x1, y1) = lower, upper
    if nx < 1 or ny < 1 or not (x1 > x0 and y1 > y0):
        raise ValueError("rectangle mesh needs nx, ny >= 1 and a non-empty box")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.stack([X.ravel(), Y.ravel()], axis=1)

    def index(i, j):
        return j * (nx + 1) + i

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    i, j = i.ravel(), j.ravel()
    sw, se, ne_, nw = index(i, j), index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)
    lower_tri = np.stack([se, ne_, sw], axis=1)
    upper_tri = np.stack([nw, sw, ne_], axis=1)
    elements = np.empty((2 * len(i), 3), dtype=np.int64)
    elements[0::2] = lower_tri
    elements[1::2] = upper_tri
    return Mesh(vertices, elements)


def box_mesh(lower, upper, resolution: int) -> Mesh:
    """Interval or rectangle mesh with `resolution` cells per side."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if len(lower) == 1:
        return interval_mesh(lower[0], upper[0], resolution)
    return rectangle_mesh(lower, upper, resolution, resolution)


# ----------------------------------------------------------------------
# refinement
# ----------------------------------------------------------------------
def refine(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Bisect every marked element (plus the closure needed for conformity)."""
    marked = np.unique(np.fromiter((int(e) for e in marked), dtype=np.int64))
    if len(marked) == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_elements:
        raise IndexError("marked element id out of range")
    if mesh.dimension == 1:
        refined = _refine_1d(mesh, marked)
    else:
        refined = _refine_2d(mesh, marked)
    logger.debug("refined %d marked elements: %d -> %d elements",
                 len(marked), mesh.num_elements, refined.num_elements)
    return refined


def _refine_1d(mesh: Mesh, marked: np.ndarray) -> Mesh:
    split = np.zeros(mesh.num_elements, dtype=bool)
    split[marked] = True
    left, right = mesh.elements[split, 0], mesh.elements[split, 1]
    midpoints = 0.5 * (mesh.vertices[left] + mesh.vertices[right])
    new_ids = mesh.num_vertices + np.arange(len(left))
    vertices = np.concatenate([mesh.vertices, midpoints])
    parents = np.concatenate([mesh.vertex_parents, np.stack([left, right], axis=1)])
    elements = np.concatenate([
        mesh.elements[~split],
        np.stack([left, new_ids], axis=1),
        np.stack([new_ids, right], axis=1),
    ])
    child_gen = mesh.generation[split] + 1
    generation = np.concatenate([mesh.generation[~split], child_gen, child_gen])
    return Mesh(vertices, elements, parents, generation)


def _edge_keys(a, b, base):
    return np.minimum(a, b) * base + np.maximum(a, b)


def _refine_2d(mesh: Mesh, marked: np.ndarray) -> Mesh:
    elements = mesh.elements
    # larger than any midpoint id this call can create
    base = mesh.num_vertices + 3 * mesh.num_elements + 1
    ref_keys = _edge_keys(elements[:, 1], elements[:, 2], base)
    other_keys = np.stack([
        _edge_keys(elements[:, 0], elements[:, 1], base),
        _edge_keys(elements[:, 2], elements[:, 0], base),
    ], axis=1)

    marked_edges = set(ref_keys[marked].tolist())
    # closure: an element with any marked edge must bisect its refinement edge
    while True:
        touched = np.isin(other_keys, list(marked_edges)).any(axis=1)
        missing = touched & ~np.isin(ref_keys, list(marked_edges))
        if not np.any(missing):
            break
        marked_edges.update(ref_keys[missing].tolist())

    edge_list = np.array(sorted(marked_edges), dtype=np.int64)
    a, b = edge_list // base, edge_list % base
    midpoint_ids = mesh.num_vertices + np.arange(len(edge_list))
    vertices = np.concatenate([mesh.vertices, 0.5 * (mesh.vertices[a] + mesh.vertices[b])])
    parents = np.concatenate([mesh.vertex_parents, np.stack([a, b], axis=1)])

    current = elements.copy()
    generation = mesh.generation.copy()
    while True:
        keys = _edge_keys(current[:, 1], current[:, 2], base)
        pos = np.searchsorted(edge_list, keys)
        pos = np.minimum(pos, len(edge_list) - 1)
        split = edge_list[pos] == keys
        if not np.any(split):
            break
        m = midpoint_ids[pos[split]]
        p, x, y = current[split, 0], current[split, 1], current[split, 2]
        child_gen = generation[split] + 1
        current = np.concatenate([
            current[~split],
            np.stack([m, p, x], axis=1),
            np.stack([m, y, p], axis=1),
        ])
        generation = np.concatenate([generation[~split], child_gen, child_gen])
    return Mesh(vertices, current, parents, generation)


# ----------------------------------------------------------------------
# coarsening
# ----------------------------------------------------------------------
def coarsen(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """
    Merge every sibling group whose elements are all marked (one level).

    Marks that do not complete an eligible group are skipped; their number
    is stored on the returned mesh as ``skipped_coarsen_marks``.
    """
    marked_set = {int(e) for e in marked}
    if not marked_set:
        return mesh
    chosen = [p for p in mesh.coarsening_patches() if marked_set.issuperset(p.elements)]
    merged_elements = set()
    for patch in chosen:
        merged_elements.update(patch.elements)
    skipped = len(marked_set - merged_elements)
    if skipped:
        logger.debug("coarsen: %d marks not part of a complete sibling group", skipped)
    if not chosen:
        return Mesh(mesh.vertices, mesh.elements, mesh.vertex_parents, mesh.generation,
                    skipped_coarsen_marks=skipped)

    keep = np.ones(mesh.num_elements, dtype=bool)
    keep[list(merged_elements)] = False
    parent_rows, parent_gen = [], []
    for patch in chosen:
        for parent in patch.parents:
            parent_rows.append(parent)
            parent_gen.append(max(patch.generation - 1, 0))
    elements = np.concatenate([mesh.elements[keep], np.array(parent_rows, dtype=np.int64)])
    generation = np.concatenate([mesh.generation[keep], np.array(parent_gen, dtype=np.int64)])

    removed = np.array(sorted(p.vertex for p in chosen), dtype=np.int64)
    alive = np.ones(mesh.num_vertices, dtype=bool)
    alive[removed] = False
    renumber = -np.ones(mesh.num_vertices, dtype=np.int64)
    renumber[alive] = np.arange(alive.sum())
    parents = mesh.vertex_parents[alive]
    parents = np.where(parents >= 0, renumber[np.maximum(parents, 0)], -1)
    coarse = Mesh(mesh.vertices[alive], renumber[elements], parents, generation,
                  skipped_coarsen_marks=skipped)
    logger.debug("coarsened %d patches: %d -> %d elements",
                 len(chosen), mesh.num_elements, coarse.num_elements)
    return coarse
