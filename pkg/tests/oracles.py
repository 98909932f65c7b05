"""Independent reference computations used only by the tests.

Nothing here imports the solver code paths it is used to check.
"""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def horizontal_offsets(theta, dtheta, radius, forward):
    """Integer spatial offsets whose direction lies within dtheta/2 of theta.

    For the reversible model the opposite direction is accepted too.
    """
    out = []
    for a in range(-radius, radius + 1):
        for b in range(-radius, radius + 1):
            if (a, b) == (0, 0) or a * a + b * b > radius * radius:
                continue
            phi = np.arctan2(b, a)
            if abs(_wrap(phi - theta)) <= dtheta / 2 + 1e-9:
                out.append((a, b))
            elif not forward and abs(_wrap(phi - theta - np.pi)) <= dtheta / 2 + 1e-9:
                out.append((a, b))
    # keep only primitive offsets so long edges do not shadow short ones
    prim = [o for o in out if np.gcd(abs(o[0]), abs(o[1])) == 1]
    return prim


def refine_cost(cost, r):
    """Trilinear upsampling by an integer factor (periodic in theta)."""
    from scipy.ndimage import map_coordinates
    nx, ny, nt = cost.shape
    X, Y, T = np.meshgrid(np.arange((nx - 1) * r + 1) / r, np.arange((ny - 1) * r + 1) / r,
                          np.arange(nt * r) / r, indexing="ij")
    ext = np.concatenate([cost, cost[:, :, :1]], axis=2)
    return map_coordinates(ext, [X, Y, T], order=1)


def eikonal_dijkstra(cost, source_index, xi, forward=False, radius=6, nsamp=8, refine=1):
    """Shortest paths on a voxel graph approximating the F0 / F0+ metric.

    Angular edges cost C dtheta.  Spatial edges follow near-horizontal
    directions and cost xi |offset| times the mean cost along the segment.
    With ``refine`` > 1 the graph lives on a lattice that much finer, and the
    result is sampled back at the original nodes.  Returns distances with the
    grid's shape.
    """
    if refine > 1:
        fine = eikonal_dijkstra(refine_cost(cost, refine), tuple(refine * np.asarray(source_index)),
                                xi / refine, forward, radius, nsamp, 1)
        return fine[::refine, ::refine, ::refine]
    nx, ny, nt = cost.shape
    dth = 2 * np.pi / nt
    idx = np.arange(nx * ny * nt).reshape(nx, ny, nt)
    rows, cols, vals = [], [], []
    # angular edges, both ways
    for k in range(nt):
        kp = (k + 1) % nt
        w = dth * 0.5 * (cost[:, :, k] + cost[:, :, kp])
        rows += [idx[:, :, k].ravel(), idx[:, :, kp].ravel()]
        cols += [idx[:, :, kp].ravel(), idx[:, :, k].ravel()]
        vals += [w.ravel(), w.ravel()]
    ts = (np.arange(nsamp) + 0.5) / nsamp
    for k in range(nt):
        for a, b in horizontal_offsets(k * dth, dth, radius, forward):
            i0 = np.arange(max(0, -a), min(nx, nx - a))
            j0 = np.arange(max(0, -b), min(ny, ny - b))
            if len(i0) == 0 or len(j0) == 0:
                continue
            I, J = np.meshgrid(i0, j0, indexing="ij")
            # mean cost along the segment, bilinear samples on layer k
            acc = np.zeros(I.shape)
            layer = cost[:, :, k]
            for t in ts:
                x, y = I + t * a, J + t * b
                x0 = np.minimum(np.floor(x).astype(int), nx - 2)
                y0 = np.minimum(np.floor(y).astype(int), ny - 2)
                fx, fy = x - x0, y - y0
                acc += ((1 - fx) * (1 - fy) * layer[x0, y0] + fx * (1 - fy) * layer[x0 + 1, y0]
                        + (1 - fx) * fy * layer[x0, y0 + 1] + fx * fy * layer[x0 + 1, y0 + 1])
            w = xi * np.hypot(a, b) * acc / nsamp
            rows.append(idx[I, J, k].ravel())
            cols.append(idx[I + a, J + b, k].ravel())
            vals.append(w.ravel())
    A = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(idx.size, idx.size)).tocsr()
    d = dijkstra(A, directed=True, indices=int(idx[source_index]))
    return d.reshape(nx, ny, nt)


def riemannian_ball_dijkstra(g, half_width, ntheta, sub=4, radius=1.0):
    """Nodes of a (2h+1)^2 x ntheta stencil within Riemannian distance `radius` of the identity.

    Dijkstra on a fine lattice (spatial step 1/sub, angular step dtheta/sub)
    with 26-neighbour edges weighted by the left-invariant metric evaluated
    at the edge midpoint.
    """
    h = half_width
    dth = 2 * np.pi / ntheta
    xs = np.arange(-h * sub - sub, h * sub + sub + 1) / sub
    kmax = ntheta // 2
    ts = np.arange(-kmax * sub, kmax * sub + 1) * dth / sub
    nx, nt = len(xs), len(ts)
    idx = np.arange(nx * nx * nt).reshape(nx, nx, nt)
    rows, cols, vals = [], [], []
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                if (di, dj, dk) == (0, 0, 0):
                    continue
                sl_a = [slice(max(0, -d), n - max(0, d)) for d, n in ((di, nx), (dj, nx), (dk, nt))]
                sl_b = [slice(max(0, d), n - max(0, -d)) for d, n in ((di, nx), (dj, nx), (dk, nt))]
                a = idx[tuple(sl_a)]
                b = idx[tuple(sl_b)]
                tm = ts[sl_a[2]] + 0.5 * dk * dth / sub
                ddx, ddy, ddt = di / sub, dj / sub, dk * dth / sub
                w1 = np.cos(tm) * ddx + np.sin(tm) * ddy
                w2 = -np.sin(tm) * ddx + np.cos(tm) * ddy
                w = np.sqrt(g[0] * w1**2 + g[1] * w2**2 + g[2] * ddt**2)
                w = np.broadcast_to(w[None, None, :], a.shape)
                rows.append(a.ravel())
                cols.append(b.ravel())
                vals.append(w.ravel())
    A = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                   shape=(idx.size, idx.size)).tocsr()
    c = (nx // 2, nx // 2, nt // 2)
    d = dijkstra(A, directed=True, indices=int(idx[c])).reshape(nx, nx, nt)
    # sample the stencil nodes
    out = np.zeros((2 * h + 1, 2 * h + 1, ntheta), bool)
    for i in range(-h, h + 1):
        for j in range(-h, h + 1):
            for k in range(ntheta):
                kk = k if k <= kmax else k - ntheta
                out[i + h, j + h, k] = d[c[0] + i * sub, c[1] + j * sub, c[2] + kk * sub] <= radius
    return out


def brute_masd_hausdorff(a, b):
    """Mean symmetric surface distance and Hausdorff distance by brute force."""
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    dab, dba = d.min(1), d.min(0)
    return 0.5 * (dab.mean() + dba.mean()), max(dab.max(), dba.max())
