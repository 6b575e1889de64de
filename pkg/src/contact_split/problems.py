"""Generators for the desk-scale problem portfolio.

* :func:`gen_spring_chain`: serial springs against a rigid obstacle, with a
  closed-form solution stored in the metadata.
* :func:`gen_hertz`: two stacked elastic blocks pressed together, the curved
  indenter replaced by a parabolic initial gap.
* :func:`gen_multibody`: a row of blocks on a common base, coupled to the base
  through parabolic gaps and to each other through matching side faces.
* :func:`gen_random`: tiny random instances for oracle comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import fem
from .problem import ContactProblem

__all__ = [
    "HertzGeometry",
    "gen_spring_chain",
    "gen_hertz",
    "gen_multibody",
    "gen_random",
    "HERTZ_DEFAULTS",
]

HERTZ_DEFAULTS = dict(R=2e-2, E1=2.1e11, nu1=0.3, E2=2.1e9, nu2=0.3, u_D=3e-4, g_min=0.0)


def gen_spring_chain(n=1, k=1.0, f=1.0, d=1.0):
    """`n` equal springs of stiffness `k` in series, fixed at the origin and
    pulled by `f` at the free end, which may not move past ``u_n = d``.

    The chain acts on the end node like one spring of stiffness ``k / n``, so
    the unconstrained end displacement is ``f n / k``.  If it exceeds `d` the
    obstacle carries ``lam* = f - (k / n) d`` and ``u_n* = d``; otherwise
    ``lam* = 0``.  Interior nodes then follow ``u_i* = (f - lam*) i / k``.
    """
    if n < 1:
        raise ValueError("need at least one spring")
    if not k > 0:
        raise ValueError("spring stiffness must be positive")
    main = np.full(n, 2.0 * k)
    main[-1] = k
    off = np.full(n - 1, -k)
    K = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    F = np.zeros(n)
    F[-1] = f
    B = sp.csr_matrix(([1.0], ([0], [n - 1])), shape=(1, n))
    lam_star = max(0.0, f - k * d / n)
    u_end = (f - lam_star) * n / k
    meta = {
        "generator": "spring_chain",
        "n": n,
        "k": float(k),
        "f": float(f),
        "d": float(d),
        "lambda_star": float(lam_star),
        "u_end_star": float(u_end),
        "closed_form": "lambda* = max(0, f - (k/n) d); u_i* = (f - lambda*) i / k",
    }
    return ContactProblem(K, B, np.array([float(d)]), F, labels=("obstacle",), meta=meta)


@dataclass(frozen=True)
class HertzGeometry:
    """Interface description of a Hertz-type problem.

    ``points`` holds the in-plane coordinates of the paired nodes (relative
    to the contact center), ``areas`` their tributary areas (lengths in 2D)
    on the modelled part, and ``symmetry`` the factor from the modelled part
    to the full contact (4 for a quarter model, 1 otherwise).
    """

    dim: int
    points: np.ndarray
    areas: np.ndarray
    symmetry: int
    R: float
    E1: float
    nu1: float
    E2: float
    nu2: float

    @property
    def radii(self):
        return np.linalg.norm(self.points, axis=1)

    def resultant(self, lam):
        """Total normal force carried by the full contact."""
        return self.symmetry * float(np.sum(lam))

    def pressure(self, lam):
        """Nodal pressures from lumped tributary areas."""
        return np.asarray(lam) / self.areas

    def contact_radius(self, lam):
        """Radius of the disc (half-width in 2D) with the same area as the
        loaded nodes' tributary patches."""
        loaded = np.asarray(lam) > 0
        area = self.symmetry * float(self.areas[loaded].sum())
        if self.dim == 2:
            return 0.5 * area
        return float(np.sqrt(area / np.pi))


def _tributary(axis_coords, lo, hi):
    # lumped 1D tributary lengths of nodes on [lo, hi]
    x = axis_coords[(axis_coords >= lo - 1e-15) & (axis_coords <= hi + 1e-15)]
    w = np.zeros_like(x)
    h = np.diff(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return x, w


def gen_hertz(dim=2, refinement=16, R=HERTZ_DEFAULTS["R"], E1=HERTZ_DEFAULTS["E1"], nu1=HERTZ_DEFAULTS["nu1"],
              E2=HERTZ_DEFAULTS["E2"], nu2=HERTZ_DEFAULTS["nu2"], u_D=HERTZ_DEFAULTS["u_D"],
              g_min=HERTZ_DEFAULTS["g_min"], zone=4e-3, width=2e-2, height=2e-2, growth=1.5, scale=1,
              thickness=1e-3):
    """Two stacked blocks pressed together through a parabolic initial gap.

    The lower block (``E1, nu1``) is clamped at its base; the upper block
    (``E2, nu2``) has its top face moved down by `u_D`.  Matching interface
    nodes inside the contact zone (half-width `zone`) are paired node to node
    with ``D = r^2 / (2R) + g_min``.

    In 2D (plane strain) the full section ``[-width, width]`` is modelled and
    ``refinement`` uniform elements span ``[-zone, zone]``, giving
    ``refinement + 1`` pairs.  In 3D a quarter model on ``[0, width]^2`` with
    symmetry conditions is used and ``refinement // 2`` elements span
    ``[0, zone]`` in each in-plane direction (so `refinement` counts elements
    across the full zone diameter).  The 2D slice is `thickness` deep, which
    keeps stiffness (and so the useful range of rho and k_N) comparable to
    the 3D model.

    Returns
    -------
    problem : ContactProblem
    geometry : HertzGeometry
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    refinement = int(refinement * scale)
    if refinement < 4:
        raise ValueError("refinement must be at least 4")
    h = 2.0 * zone / refinement
    # vertical grading starts at the in-plane fine size
    z_fine = max(2, refinement // 8)
    z_lo = -fem.graded_coordinates(0.0, z_fine * h, height, z_fine, growth)[::-1]
    z_hi = fem.graded_coordinates(0.0, z_fine * h, height, z_fine, growth)
    if dim == 2:
        half = fem.graded_coordinates(0.0, zone, width, refinement // 2, growth)
        x = np.concatenate([-half[:0:-1], half])
        lower = fem.box_mesh(x, z_lo)
        upper = fem.box_mesh(x, z_hi)
        top_lower, bottom_upper = "ymax", "ymin"
        vert = 1
        sym = 1
    else:
        x = fem.graded_coordinates(0.0, zone, width, refinement // 2, growth)
        lower = fem.box_mesh(x, x, z_lo)
        upper = fem.box_mesh(x, x, z_hi)
        top_lower, bottom_upper = "zmax", "zmin"
        vert = 2
        sym = 4
    all_c = np.arange(dim)
    bot = "ymin" if dim == 2 else "zmin"
    top = "ymax" if dim == 2 else "zmax"
    lower_bc = [(lower.node_sets[bot], all_c, 0.0)]
    top_vals = np.zeros(dim)
    top_vals[vert] = -u_D
    upper_bc = [(upper.node_sets[top], all_c, top_vals)]
    if dim == 3:
        for mesh, bc in ((lower, lower_bc), (upper, upper_bc)):
            bc.append((mesh.node_sets["xmin"], 0, 0.0))
            bc.append((mesh.node_sets["ymin"], 1, 0.0))
    t = thickness if dim == 2 else 1.0
    bodies = [fem.Body(lower, fem.Material(E1, nu1), lower_bc, name="lower", thickness=t),
              fem.Body(upper, fem.Material(E2, nu2), upper_bc, name="upper", thickness=t)]
    K, F, dof_map = fem.assemble_system(bodies)

    tol = 1e-12 * width
    inplane = [d for d in range(dim) if d != vert]

    def zone_nodes(mesh, side):
        nodes = mesh.node_sets[side]
        c = mesh.coords[nodes][:, inplane]
        inside = np.all(np.abs(c) <= zone + tol, axis=1)
        return nodes[inside]

    na = zone_nodes(lower, top_lower)
    nb = zone_nodes(upper, bottom_upper)
    dofs_a = dof_map.dof(0, na[:, None], all_c[None, :])
    dofs_b = dof_map.dof(1, nb[:, None], all_c[None, :])
    normal = np.zeros(dim)
    normal[vert] = 1.0
    B_full, D_geo, order = fem.build_pairing_node_to_node(
        lower.coords[na], dofs_a, upper.coords[nb], dofs_b, normal, dof_map.n_full)
    pts = lower.coords[na][:, inplane]
    D = D_geo + fem.parabolic_gap_profile(R, pts, g_min=g_min)
    B, D = dof_map.reduce_pairing(B_full, D)

    # tributary areas of the paired nodes
    if dim == 2:
        xs, w = _tributary(x, -zone, zone)
        lookup = dict(zip(np.round(xs / h).astype(int), w * t))
        areas = np.array([lookup[int(round(p[0] / h))] for p in pts])
    else:
        xs, w = _tributary(x, 0.0, zone)
        lookup = dict(zip(np.round(xs / h).astype(int), w))
        areas = np.array([lookup[int(round(p[0] / h))] * lookup[int(round(p[1] / h))] for p in pts])

    labels = tuple(f"hertz:{j}" for j in range(B.shape[0]))
    meta = {
        "generator": "hertz",
        "dim": dim,
        "refinement": refinement,
        "R": float(R),
        "E1": float(E1), "nu1": float(nu1), "E2": float(E2), "nu2": float(nu2),
        "u_D": float(u_D),
        "g_min": float(g_min),
        "zone": float(zone),
        "symmetry": sym,
        "thickness": float(t),
    }
    problem = ContactProblem(K, B, D, F, labels=labels, meta=meta)
    geometry = HertzGeometry(dim, pts, areas, sym, float(R), float(E1), float(nu1), float(E2), float(nu2))
    return problem, geometry


def gen_multibody(n_bodies=3, dim=2, nx=8, ny=8, body_width=1e-2, body_height=1e-2, base_height=1e-2,
                  R=2e-2, E_body=2.1e9, nu_body=0.3, E_base=2.1e11, nu_base=0.3, u_D=4e-3, g_min=1e-3,
                  zone=None):
    """A row of `n_bodies` identical blocks pressed onto a common base.

    Each block touches the base through node-to-node pairs with a parabolic
    gap centred under the block (minimum `g_min`) and touches its neighbours
    through its side faces with zero initial gap.  Block tops are moved down
    by `u_D` and the base is clamped at its bottom.  In 3D the blocks are
    ``body_width`` deep and `nx` elements cover that depth too.

    Returns a single :class:`ContactProblem` whose stiffness is block diagonal
    by body (base first); labels are ``base<i>:<j>`` and ``side<i>-<i+1>:<j>``.
    """
    if n_bodies < 1:
        raise ValueError("need at least one body")
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if zone is None:
        zone = 0.25 * body_width
    vert = dim - 1
    all_c = np.arange(dim)
    x_body = np.linspace(0.0, body_width, nx + 1)
    y_body = np.linspace(0.0, body_height, ny + 1)
    x_base = np.concatenate([x_body] + [x_body[1:] + i * body_width for i in range(1, n_bodies)])
    y_base = np.linspace(-base_height, 0.0, ny + 1)
    if dim == 2:
        base = fem.box_mesh(x_base, y_base)
        blocks = [fem.box_mesh(x_body + i * body_width, y_body) for i in range(n_bodies)]
    else:
        base = fem.box_mesh(x_base, x_body, y_base)
        blocks = [fem.box_mesh(x_body + i * body_width, x_body, y_body) for i in range(n_bodies)]
    bot = "ymin" if dim == 2 else "zmin"
    top = "ymax" if dim == 2 else "zmax"
    bodies = [fem.Body(base, fem.Material(E_base, nu_base), [(base.node_sets[bot], all_c, 0.0)], name="base")]
    top_vals = np.zeros(dim)
    top_vals[vert] = -u_D
    for i, mesh in enumerate(blocks):
        bodies.append(fem.Body(mesh, fem.Material(E_body, nu_body), [(mesh.node_sets[top], all_c, top_vals)],
                               name=f"body{i}"))
    K, F, dof_map = fem.assemble_system(bodies)

    tol = 1e-9 * body_width
    inplane = [d for d in range(dim) if d != vert]
    rows_B, rows_D, labels = [], [], []
    normal = np.zeros(dim)
    normal[vert] = 1.0
    for i, mesh in enumerate(blocks):
        center = np.full(dim - 1, 0.5 * body_width)
        center[0] += i * body_width
        nb = mesh.node_sets[bot]
        inside = np.linalg.norm(mesh.coords[nb][:, inplane] - center, ord=np.inf, axis=1) <= zone + tol
        nb = nb[inside]
        cand = base.node_sets[top]
        dist = np.abs(base.coords[cand][:, inplane] - center).max(axis=1)
        na = cand[dist <= zone + tol]
        B_i, D_i, order = fem.build_pairing_node_to_node(
            base.coords[na], dof_map.dof(0, na[:, None], all_c[None, :]),
            mesh.coords[nb], dof_map.dof(i + 1, nb[:, None], all_c[None, :]), normal, dof_map.n_full)
        D_i = D_i + fem.parabolic_gap_profile(R, base.coords[na][:, inplane], center=center, g_min=g_min)
        rows_B.append(B_i)
        rows_D.append(D_i)
        labels += [f"base{i}:{j}" for j in range(len(na))]
    side_normal = np.zeros(dim)
    side_normal[0] = 1.0
    for i in range(n_bodies - 1):
        left, right = blocks[i], blocks[i + 1]
        na, nb = left.node_sets["xmax"], right.node_sets["xmin"]
        B_i, D_i, _ = fem.build_pairing_node_to_node(
            left.coords[na], dof_map.dof(i + 1, na[:, None], all_c[None, :]),
            right.coords[nb], dof_map.dof(i + 2, nb[:, None], all_c[None, :]), side_normal, dof_map.n_full)
        rows_B.append(B_i)
        rows_D.append(D_i)
        labels += [f"side{i}-{i + 1}:{j}" for j in range(len(na))]
    B_full = sp.vstack(rows_B, format="csr")
    B, D = dof_map.reduce_pairing(B_full, np.concatenate(rows_D))
    # pairs whose dofs are all prescribed carry no unknowns; drop them
    keep = np.diff(B.indptr) > 0
    B, D = B[keep], D[keep]
    labels = tuple(l for l, k in zip(labels, keep) if k)
    meta = {
        "generator": "multibody",
        "n_bodies": n_bodies,
        "dim": dim,
        "R": float(R),
        "u_D": float(u_D),
        "g_min": float(g_min),
        "n_body_pairs": int(sum(l.startswith("base") for l in labels)),
        "n_side_pairs": int(sum(l.startswith("side") for l in labels)),
    }
    return ContactProblem(K, B, D, F, labels=labels, meta=meta)


def gen_random(n_dof=8, n_pairs=4, seed=42, active_fraction=0.5):
    """Small random feasible instance.

    ``K = Q diag(s) Q^T`` with eigenvalues in ``[1, 4]``; ``B`` has unit rows;
    ``D >= 0`` so that ``U = 0`` is feasible, and the load pushes roughly
    `active_fraction` of the pairs into contact.
    """
    if n_pairs > n_dof:
        raise ValueError("need n_pairs <= n_dof")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n_dof, n_dof)))
    K = (Q * rng.uniform(1.0, 4.0, n_dof)) @ Q.T
    K = 0.5 * (K + K.T)
    Bd = rng.standard_normal((n_pairs, n_dof))
    Bd /= np.linalg.norm(Bd, axis=1, keepdims=True)
    D = rng.uniform(0.0, 1.0, n_pairs)
    # push along chosen constraint normals so those pairs want to penetrate
    push = rng.uniform(size=n_pairs) < active_fraction
    push[rng.integers(n_pairs)] = True
    target = np.where(push, D + rng.uniform(0.2, 1.0, n_pairs), -rng.uniform(0.0, 0.5, n_pairs))
    U_free = np.linalg.lstsq(Bd, target, rcond=None)[0]
    F = K @ U_free
    meta = {"generator": "random", "seed": int(seed)}
    return ContactProblem(sp.csr_matrix(K), sp.csr_matrix(Bd), D, F,
                          labels=tuple(f"r{j}" for j in range(n_pairs)), meta=meta)
