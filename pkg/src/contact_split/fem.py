"""Small-strain linear elasticity on structured Q1 meshes and contact pairings.

Degrees of freedom are numbered node-major (``node * dim + component``);
several bodies are stacked with per-body offsets.  Dirichlet conditions are
eliminated, and their lifting enters the load vector, so the returned
stiffness is the reduced SPD matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .exceptions import MismatchedInterfaces, NoProjection

__all__ = [
    "StructuredMesh",
    "Material",
    "Body",
    "DofMap",
    "box_mesh",
    "graded_coordinates",
    "elasticity_matrix",
    "element_stiffness",
    "assemble_full",
    "assemble_system",
    "assemble_stiffness",
    "boundary_traction",
    "build_pairing_node_to_node",
    "build_pairing_node_to_surface",
    "parabolic_gap_profile",
    "boundary_faces",
]

_G = 1.0 / np.sqrt(3.0)
_REF_2D = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
_REF_3D = np.array([[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
                    [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]], dtype=float)


@dataclass
class StructuredMesh:
    """Tensor-product mesh of Q1 quadrilaterals (2D) or hexahedra (3D).

    ``axes`` keeps the 1D coordinate arrays; node ``(i, j[, k])`` has index
    ``i + nx * (j + ny * k)``.
    """

    dim: int
    coords: np.ndarray
    elements: np.ndarray
    axes: tuple
    node_sets: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_dof(self):
        return self.n_nodes * self.dim

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    def node_index(self, *ijk):
        nx = len(self.axes[0])
        if self.dim == 2:
            i, j = ijk
            return i + nx * j
        ny = len(self.axes[1])
        i, j, k = ijk
        return i + nx * (j + ny * k)

    def translated(self, shift):
        shift = np.asarray(shift, dtype=float)
        axes = tuple(np.asarray(a) + s for a, s in zip(self.axes, shift))
        return StructuredMesh(self.dim, self.coords + shift, self.elements.copy(), axes,
                              {k: v.copy() for k, v in self.node_sets.items()})


@dataclass(frozen=True)
class Material:
    E: float
    nu: float

    def __post_init__(self):
        if not self.E > 0:
            raise ValueError("Young's modulus must be positive")
        if not -1.0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (-1, 0.5)")


def box_mesh(*axes):
    """Structured mesh on the tensor grid given by 2 or 3 coordinate arrays.

    Node sets ``xmin``, ``xmax``, ``ymin``, ``ymax`` (and ``zmin``, ``zmax``)
    hold the boundary nodes.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    dim = len(axes)
    if dim not in (2, 3):
        raise ValueError("box_mesh needs 2 or 3 coordinate arrays")
    for a in axes:
        if a.size < 2 or np.any(np.diff(a) <= 0):
            raise ValueError("coordinate arrays must be strictly increasing with at least 2 entries")
    grids = np.meshgrid(*axes, indexing="ij")
    # node index i + nx*(j + ny*k): flatten with x fastest
    coords = np.stack([g.transpose().ravel() for g in grids], axis=1)
    shape = tuple(a.size for a in axes)
    idx = np.arange(np.prod(shape)).reshape(shape[::-1])
    if dim == 2:
        n00 = idx[:-1, :-1].ravel()
        n10 = idx[:-1, 1:].ravel()
        n11 = idx[1:, 1:].ravel()
        n01 = idx[1:, :-1].ravel()
        elements = np.stack([n00, n10, n11, n01], axis=1)
        names = (("xmin", idx[:, 0]), ("xmax", idx[:, -1]), ("ymin", idx[0, :]), ("ymax", idx[-1, :]))
    else:
        c = [idx[:-1, :-1, :-1], idx[:-1, :-1, 1:], idx[:-1, 1:, 1:], idx[:-1, 1:, :-1],
             idx[1:, :-1, :-1], idx[1:, :-1, 1:], idx[1:, 1:, 1:], idx[1:, 1:, :-1]]
        elements = np.stack([a.ravel() for a in c], axis=1)
        names = (("xmin", idx[:, :, 0]), ("xmax", idx[:, :, -1]), ("ymin", idx[:, 0, :]),
                 ("ymax", idx[:, -1, :]), ("zmin", idx[0, :, :]), ("zmax", idx[-1, :, :]))
    node_sets = {name: np.sort(np.asarray(nodes).ravel()) for name, nodes in names}
    return StructuredMesh(dim, coords, elements, axes, node_sets)


def graded_coordinates(start, fine_end, end, n_fine, growth=1.5, max_coarse=None):
    """1D coordinates: `n_fine` uniform cells on ``[start, fine_end]`` followed
    by cells growing geometrically (ratio `growth`) up to `end`."""
    fine = np.linspace(start, fine_end, n_fine + 1)
    if end <= fine_end:
        return fine
    h = (fine_end - start) / n_fine
    pts = [fine_end]
    while True:
        h *= growth
        if max_coarse is not None:
            h = min(h, max_coarse)
        nxt = pts[-1] + h
        if nxt >= end - 0.5 * h:
            pts.append(end)
            break
        pts.append(nxt)
    return np.concatenate([fine, pts[1:]])


def elasticity_matrix(mat, dim):
    """Isotropic elasticity in Voigt form; plane strain in 2D."""
    E, nu = mat.E, mat.nu
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    if dim == 2:
        return np.array([[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]])
    C = np.zeros((6, 6))
    C[:3, :3] = lam
    C[np.arange(3), np.arange(3)] = lam + 2 * mu
    C[np.arange(3, 6), np.arange(3, 6)] = mu
    return C


def _shape_gradients(dim):
    ref = _REF_2D if dim == 2 else _REF_3D
    gps = np.array(np.meshgrid(*([[-_G, _G]] * dim), indexing="ij")).reshape(dim, -1).T
    grads = []
    for xi in gps:
        # d/dxi_d of prod_k (1 + ref_k xi_k)/2
        factors = 0.5 * (1.0 + ref * xi)
        g = np.empty_like(ref)
        for d in range(dim):
            others = np.prod(np.delete(factors, d, axis=1), axis=1)
            g[:, d] = 0.5 * ref[:, d] * others
        grads.append(g)
    weights = np.ones(len(gps))
    return np.array(grads), weights


def _strain_matrix(dNdx, dim):
    # dNdx: (E, nen, dim) -> (E, nvoigt, nen*dim)
    E, nen, _ = dNdx.shape
    if dim == 2:
        Bm = np.zeros((E, 3, nen * 2))
        Bm[:, 0, 0::2] = dNdx[:, :, 0]
        Bm[:, 1, 1::2] = dNdx[:, :, 1]
        Bm[:, 2, 0::2] = dNdx[:, :, 1]
        Bm[:, 2, 1::2] = dNdx[:, :, 0]
        return Bm
    Bm = np.zeros((E, 6, nen * 3))
    for d in range(3):
        Bm[:, d, d::3] = dNdx[:, :, d]
    Bm[:, 3, 1::3] = dNdx[:, :, 2]
    Bm[:, 3, 2::3] = dNdx[:, :, 1]
    Bm[:, 4, 0::3] = dNdx[:, :, 2]
    Bm[:, 4, 2::3] = dNdx[:, :, 0]
    Bm[:, 5, 0::3] = dNdx[:, :, 1]
    Bm[:, 5, 1::3] = dNdx[:, :, 0]
    return Bm


def element_stiffness(X, mat):
    """Stiffness of Q1 elements with nodal coordinates `X` of shape
    ``(n_elements, nen, dim)`` (or a single ``(nen, dim)`` element)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    dim = X.shape[2]
    C = elasticity_matrix(mat, dim)
    grads, weights = _shape_gradients(dim)
    nen = X.shape[1]
    Ke = np.zeros((X.shape[0], nen * dim, nen * dim))
    for dN, w in zip(grads, weights):
        J = np.einsum("ead,aj->edj", X, dN)
        detJ = np.linalg.det(J)
        if np.any(detJ <= 0):
            raise ValueError("non-positive element Jacobian")
        invJ = np.linalg.inv(J)
        dNdx = np.einsum("aj,eji->eai", dN, invJ)
        Bm = _strain_matrix(dNdx, dim)
        Ke += np.einsum("evi,vw,ewj->eij", Bm, C, Bm) * (detJ * w)[:, None, None]
    return Ke[0] if single else Ke


def assemble_full(mesh, mat, thickness=1.0):
    """Unreduced stiffness matrix of one mesh (singular: rigid modes kept).

    In 2D `thickness` is the out-of-plane depth of the plane-strain slice.
    """
    dim = mesh.dim
    X = mesh.coords[mesh.elements]
    Ke = element_stiffness(X, mat)
    if dim == 2:
        Ke = Ke * thickness
    dofs = (mesh.elements[:, :, None] * dim + np.arange(dim)).reshape(len(mesh.elements), -1)
    rows = np.broadcast_to(dofs[:, :, None], Ke.shape).ravel()
    cols = np.broadcast_to(dofs[:, None, :], Ke.shape).ravel()
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(mesh.n_dof, mesh.n_dof))
    K = 0.5 * (K + K.T)
    K.sort_indices()
    return K.tocsr()


def boundary_faces(mesh, side):
    """Boundary facets (segments in 2D, quads in 3D) on a box side such as
    ``"ymax"``, as node-index arrays oriented consistently."""
    shape = mesh.shape
    axis = "xyz".index(side[0])
    pos = 0 if side.endswith("min") else shape[axis] - 1
    if mesh.dim == 2:
        other = 1 - axis
        faces = []
        for t in range(shape[other] - 1):
            a = [0, 0]
            b = [0, 0]
            a[axis] = b[axis] = pos
            a[other], b[other] = t, t + 1
            faces.append((mesh.node_index(*a), mesh.node_index(*b)))
        return np.array(faces, dtype=np.intp)
    o1, o2 = [d for d in range(3) if d != axis]
    faces = []
    for t in range(shape[o2] - 1):
        for s in range(shape[o1] - 1):
            quad = []
            for ds, dt in ((0, 0), (1, 0), (1, 1), (0, 1)):
                ijk = [0, 0, 0]
                ijk[axis], ijk[o1], ijk[o2] = pos, s + ds, t + dt
                quad.append(mesh.node_index(*ijk))
            faces.append(quad)
    return np.array(faces, dtype=np.intp)


def _facet_area_weights(mesh, faces):
    # lumped (nodal) share of each facet's area, exact for constant traction on Q1
    nodal = np.zeros(mesh.n_nodes)
    X = mesh.coords[faces]
    if mesh.dim == 2:
        length = np.linalg.norm(X[:, 1] - X[:, 0], axis=1)
        np.add.at(nodal, faces[:, 0], 0.5 * length)
        np.add.at(nodal, faces[:, 1], 0.5 * length)
    else:
        # rectangular facets of a tensor grid
        e1 = np.linalg.norm(X[:, 1] - X[:, 0], axis=1)
        e2 = np.linalg.norm(X[:, 3] - X[:, 0], axis=1)
        for a in range(4):
            np.add.at(nodal, faces[:, a], 0.25 * e1 * e2)
    return nodal


def boundary_traction(mesh, side, traction, thickness=1.0):
    """Consistent nodal forces (full dof vector) of a uniform traction vector
    applied on a box side (per `thickness` of depth in 2D)."""
    traction = np.asarray(traction, dtype=float)
    nodal = _facet_area_weights(mesh, boundary_faces(mesh, side))
    if mesh.dim == 2:
        nodal = nodal * thickness
    return (nodal[:, None] * traction[None, :]).ravel()


@dataclass
class Body:
    """A meshed elastic body with its boundary conditions.

    ``dirichlet`` is a list of ``(nodes, components, value)`` entries, where
    `value` is a scalar or an array broadcast over ``(nodes, components)``.
    ``loads`` is an optional full nodal force vector of length ``mesh.n_dof``.
    ``thickness`` is the slice depth of 2D bodies (ignored in 3D).
    """

    mesh: StructuredMesh
    material: Material
    dirichlet: list = field(default_factory=list)
    loads: np.ndarray | None = None
    name: str = ""
    thickness: float = 1.0


@dataclass
class DofMap:
    """Map between full (all nodes, all bodies) and free (reduced) dofs."""

    n_full: int
    free: np.ndarray
    fixed: np.ndarray
    fixed_values: np.ndarray
    offsets: tuple
    dims: tuple

    def __post_init__(self):
        self.full_to_free = np.full(self.n_full, -1, dtype=np.intp)
        self.full_to_free[self.free] = np.arange(self.free.size)

    @property
    def n_free(self):
        return self.free.size

    def dof(self, body, node, comp):
        """Full dof index of a component of a node of a body."""
        return self.offsets[body] + node * self.dims[body] + comp

    def expand(self, U_free):
        U = np.zeros(self.n_full)
        U[self.free] = U_free
        U[self.fixed] = self.fixed_values
        return U

    def reduce_pairing(self, B_full, D):
        """Restrict a pairing on full dofs to free dofs, moving prescribed
        displacements into the gaps."""
        B_full = sp.csr_matrix(B_full)
        D = np.asarray(D, dtype=float) - B_full[:, self.fixed] @ self.fixed_values
        B = B_full[:, self.free].tocsr()
        B.eliminate_zeros()
        B.sort_indices()
        return B, D


def _collect_dirichlet(body, offset):
    dim = body.mesh.dim
    prescribed = {}
    for nodes, comps, value in body.dirichlet:
        nodes = np.atleast_1d(np.asarray(nodes, dtype=np.intp))
        comps = np.atleast_1d(np.asarray(comps, dtype=np.intp))
        vals = np.broadcast_to(np.asarray(value, dtype=float), (nodes.size, comps.size))
        for a, n in enumerate(nodes):
            for b, c in enumerate(comps):
                prescribed[offset + n * dim + c] = vals[a, b]
    return prescribed


def assemble_system(bodies):
    """Assemble several bodies into one reduced system.

    Returns ``(K, F_ext, dof_map)`` where ``K`` is block diagonal by body on
    the free dofs and ``F_ext`` contains nodal loads minus Dirichlet lifting.
    """
    blocks, loads, prescribed, offsets, dims = [], [], {}, [], []
    offset = 0
    for body in bodies:
        blocks.append(assemble_full(body.mesh, body.material, body.thickness))
        f = np.zeros(body.mesh.n_dof) if body.loads is None else np.asarray(body.loads, dtype=float)
        if f.shape != (body.mesh.n_dof,):
            raise ValueError(f"loads of body {body.name!r} must have length {body.mesh.n_dof}")
        loads.append(f)
        prescribed.update(_collect_dirichlet(body, offset))
        offsets.append(offset)
        dims.append(body.mesh.dim)
        offset += body.mesh.n_dof
    K_full = sp.block_diag(blocks, format="csr")
    F_full = np.concatenate(loads)
    fixed = np.array(sorted(prescribed), dtype=np.intp)
    fixed_values = np.array([prescribed[d] for d in fixed], dtype=float)
    free = np.setdiff1d(np.arange(offset), fixed)
    dof_map = DofMap(offset, free, fixed, fixed_values, tuple(offsets), tuple(dims))
    K = K_full[free][:, free].tocsr()
    F = F_full[free] - K_full[free][:, fixed] @ fixed_values
    K.sort_indices()
    return K, F, dof_map


def assemble_stiffness(mesh, mat, dirichlet, loads=None):
    """Reduced stiffness, load vector and dof map of a single body."""
    return assemble_system([Body(mesh, mat, list(dirichlet), loads)])


def _unit(normal):
    n = np.asarray(normal, dtype=float)
    return n / np.linalg.norm(n)


def _tangent_basis(n):
    dim = n.size
    if dim == 1:
        return np.zeros((0, 1))
    # orthonormal complement of n
    q, _ = np.linalg.qr(np.column_stack([n, np.eye(dim)]))
    return q[:, 1:dim].T


def build_pairing_node_to_node(coords_a, dofs_a, coords_b, dofs_b, normal, n_dof, tol=1e-9):
    """Pair nodes of side A with nodes of side B at the same tangential position.

    Parameters
    ----------
    coords_a, coords_b : (m, dim) arrays
        Node coordinates of the two sides.
    dofs_a, dofs_b : (m, dim) integer arrays
        Global dof indices of the displacement components of those nodes.
    normal : vector
        Fixed contact normal pointing from A towards B.
    n_dof : int
        Number of columns of the pairing matrix.

    Returns
    -------
    B : csr_matrix (m, n_dof)
        Row ``j`` is ``n`` on node ``a_j`` and ``-n`` on its partner, so
        ``(B U)_j`` is the approach of the two nodes along the normal.
    D : ndarray
        Initial normal gaps ``(x_b - x_a) . n``.
    order : ndarray
        Index into side B of the partner of every A node.
    """
    coords_a = np.atleast_2d(np.asarray(coords_a, dtype=float))
    coords_b = np.atleast_2d(np.asarray(coords_b, dtype=float))
    dofs_a = np.atleast_2d(np.asarray(dofs_a, dtype=np.intp))
    dofs_b = np.atleast_2d(np.asarray(dofs_b, dtype=np.intp))
    if coords_a.shape[0] != coords_b.shape[0]:
        raise MismatchedInterfaces(f"{coords_a.shape[0]} nodes on side A, {coords_b.shape[0]} on side B")
    n = _unit(normal)
    T = _tangent_basis(n)
    m = coords_a.shape[0]
    if T.shape[0]:
        tree = cKDTree(coords_b @ T.T)
        dist, order = tree.query(coords_a @ T.T)
        if np.any(dist > tol) or np.unique(order).size != m:
            raise MismatchedInterfaces("interface nodes do not match in the tangential plane")
    else:
        order = np.arange(m)
    rows, cols, vals = [], [], []
    for j in range(m):
        for d in range(n.size):
            if n[d] != 0.0:
                rows += [j, j]
                cols += [dofs_a[j, d], dofs_b[order[j], d]]
                vals += [n[d], -n[d]]
    B = sp.csr_matrix((vals, (rows, cols)), shape=(m, n_dof))
    B.sum_duplicates()
    B.sort_indices()
    D = (coords_b[order] - coords_a) @ n
    return B, D, order


def _face_shape(xi):
    # Q1 (3D facets) or P1 segment (2D facets) shape functions on [-1, 1]^k
    if xi.size == 1:
        s = xi[0]
        return np.array([0.5 * (1 - s), 0.5 * (1 + s)])
    s, t = xi
    return 0.25 * np.array([(1 - s) * (1 - t), (1 + s) * (1 - t), (1 + s) * (1 + t), (1 - s) * (1 + t)])


def _face_shape_grad(xi):
    if xi.size == 1:
        return np.array([[-0.5], [0.5]])
    s, t = xi
    return 0.25 * np.array([[-(1 - t), -(1 - s)], [(1 - t), -(1 + s)], [(1 + t), (1 + s)], [-(1 + t), (1 - s)]])


def _invert_face(Y, y, tol=1e-12, max_iter=30):
    # Newton inversion of the facet map in tangential coordinates
    k = Y.shape[1]
    xi = np.zeros(k)
    for _ in range(max_iter):
        r = _face_shape(xi) @ Y - y
        J = Y.T @ _face_shape_grad(xi)
        step = np.linalg.solve(J, r)
        xi -= step
        if np.linalg.norm(step) < tol:
            break
    return xi


def build_pairing_node_to_surface(slave_coords, slave_dofs, master_coords, master_dofs, master_faces,
                                  normal, n_dof, tol=1e-9):
    """Pair each slave node with the master facet it projects onto along `normal`.

    Master facets are segments (2D) or bilinear quads (3D) given as rows of
    local node indices into `master_coords` / `master_dofs`.  Row ``j`` holds
    ``n`` on the slave node and ``-w_a n`` on the master facet nodes, where
    ``w_a`` are the facet shape functions at the projection point (they sum
    to 1).  The normal points from the slave side towards the master side.

    Returns ``(B, D, faces)`` with ``faces[j]`` the facet used by row ``j``.
    """
    slave_coords = np.atleast_2d(np.asarray(slave_coords, dtype=float))
    master_coords = np.atleast_2d(np.asarray(master_coords, dtype=float))
    slave_dofs = np.atleast_2d(np.asarray(slave_dofs, dtype=np.intp))
    master_dofs = np.atleast_2d(np.asarray(master_dofs, dtype=np.intp))
    master_faces = np.atleast_2d(np.asarray(master_faces, dtype=np.intp))
    n = _unit(normal)
    T = _tangent_basis(n)
    Yfaces = master_coords[master_faces] @ T.T  # (nf, nodes_per_face, dim-1)
    lo = Yfaces.min(axis=1) - tol
    hi = Yfaces.max(axis=1) + tol
    rows, cols, vals = [], [], []
    D = np.empty(slave_coords.shape[0])
    used = np.empty(slave_coords.shape[0], dtype=np.intp)
    for j, x in enumerate(slave_coords):
        y = T @ x
        cand = np.flatnonzero(np.all((y >= lo) & (y <= hi), axis=1))
        for f in cand:
            xi = _invert_face(Yfaces[f], y)
            if np.all(np.abs(xi) <= 1.0 + 1e-9):
                break
        else:
            raise NoProjection(f"slave node {j} at {x} does not project onto any master facet")
        w = _face_shape(np.clip(xi, -1.0, 1.0))
        face = master_faces[f]
        used[j] = f
        x_master = w @ master_coords[face]
        D[j] = (x_master - x) @ n
        for d in range(n.size):
            if n[d] == 0.0:
                continue
            rows.append(j)
            cols.append(slave_dofs[j, d])
            vals.append(n[d])
            for a, node in enumerate(face):
                if w[a] != 0.0:
                    rows.append(j)
                    cols.append(master_dofs[node, d])
                    vals.append(-w[a] * n[d])
    B = sp.csr_matrix((vals, (rows, cols)), shape=(slave_coords.shape[0], n_dof))
    B.sum_duplicates()
    B.sort_indices()
    return B, D, used


def parabolic_gap_profile(R, points, center=None, g_min=0.0):
    """Initial gap ``r^2 / (2R) + g_min`` of a sphere (cylinder in 2D) of
    radius `R`, with ``r`` the in-plane distance of `points` to `center`."""
    if not R > 0:
        raise ValueError("radius must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.zeros(pts.shape[1]) if center is None else np.asarray(center, dtype=float)
    r2 = np.sum((pts - c) ** 2, axis=1)
    return r2 / (2.0 * R) + g_min
