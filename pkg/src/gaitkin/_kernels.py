"""Hot numeric kernels with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``GAITKIN_DISABLE_NUMBA`` is
unset (or ``0``). Setting ``GAITKIN_DISABLE_NUMBA=1`` before import selects the
vectorized numpy implementations. Both paths are always importable under
explicit names (``*_jit`` / ``*_numpy``) so they can be cross-checked.

Kernels:
    undistort_normalized   radial (k1, k2) inversion by Newton on the radius
    triangulate_batch      weighted DLT + one Gauss-Newton step, many points
    chain_kinematics       forward kinematics and analytic Jacobian of a
                           tree of 3-axis joints, many frames
"""

import os

import numpy as np

_flag = os.environ.get("GAITKIN_DISABLE_NUMBA", "0").strip().lower()
_DISABLED = _flag not in ("", "0", "false", "no")

try:
    from numba import njit
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _DISABLED

DEG = np.pi / 180.0

UNDISTORT_MAX_ITER = 20
# triangulate_batch status codes
OK, INSUFFICIENT, DEGENERATE = 0, 1, 2


def _identity_jit(fn):
    return fn


_jit = njit(cache=True, nogil=True) if HAS_NUMBA else _identity_jit


# ---------------------------------------------------------------------------
# undistortion
# ---------------------------------------------------------------------------


def undistort_normalized_numpy(xy, k1, k2, tol=1e-14):
    """Invert ``r_d = r (1 + k1 r^2 + k2 r^4)`` for each normalized point.

    Returns ``(xy_undistorted, converged)``.
    """
    xy = np.asarray(xy, dtype=float)
    rd = np.hypot(xy[..., 0], xy[..., 1])
    r = rd.copy()
    done = rd == 0.0
    ok = np.ones(rd.shape, dtype=bool)
    for _ in range(UNDISTORT_MAX_ITER):
        if done.all():
            break
        r2 = r * r
        f = r * (1.0 + k1 * r2 + k2 * r2 * r2) - rd
        fp = 1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
        bad = (fp <= 0.0) & ~done
        ok &= ~bad
        step = np.where(done | bad, 0.0, f / np.where(fp == 0.0, 1.0, fp))
        r = r - step
        done |= (np.abs(step) <= tol * np.maximum(1.0, r)) | bad
    ok &= done
    scale = np.where(rd > 0.0, r / np.where(rd > 0.0, rd, 1.0), 1.0)
    return xy * scale[..., None], ok


def _undistort_loop(xy, k1, k2, tol):
    n = xy.shape[0]
    out = np.empty_like(xy)
    ok = np.ones(n, dtype=np.bool_)
    for i in range(n):
        rd = np.sqrt(xy[i, 0] ** 2 + xy[i, 1] ** 2)
        if rd == 0.0:
            out[i, 0] = xy[i, 0]
            out[i, 1] = xy[i, 1]
            continue
        r = rd
        conv = False
        for _ in range(UNDISTORT_MAX_ITER):
            r2 = r * r
            f = r * (1.0 + k1 * r2 + k2 * r2 * r2) - rd
            fp = 1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
            if fp <= 0.0:
                break
            step = f / fp
            r -= step
            if abs(step) <= tol * max(1.0, r):
                conv = True
                break
        ok[i] = conv
        s = r / rd
        out[i, 0] = xy[i, 0] * s
        out[i, 1] = xy[i, 1] * s
    return out, ok


_undistort_loop_jit = _jit(_undistort_loop)


def undistort_normalized_jit(xy, k1, k2, tol=1e-14):
    xy = np.ascontiguousarray(xy, dtype=np.float64)
    shape = xy.shape
    out, ok = _undistort_loop_jit(xy.reshape(-1, 2), float(k1), float(k2), float(tol))
    return out.reshape(shape), ok.reshape(shape[:-1])


# ---------------------------------------------------------------------------
# triangulation
# ---------------------------------------------------------------------------


def _normalized_projections(R, t):
    C = R.shape[0]
    P = np.empty((C, 3, 4))
    P[:, :, :3] = R
    P[:, :, 3] = t
    return P


def _project_with_jac_numpy(X, K, dist, R, t):
    """Pixel projections ``(N, C, 2)``, Jacobians ``(N, C, 2, 3)``, depths ``(N, C)``."""
    Xc = np.einsum("cij,nj->nci", R, X) + t[None]
    z = Xc[..., 2]
    zs = np.where(np.abs(z) > 1e-300, z, 1e-300)
    x = Xc[..., 0] / zs
    y = Xc[..., 1] / zs
    r2 = x * x + y * y
    k1 = dist[:, 0][None]
    k2 = dist[:, 1][None]
    d = 1.0 + k1 * r2 + k2 * r2 * r2
    dd = 2.0 * k1 + 4.0 * k2 * r2  # d(d)/d(r2) * 2
    xd = x * d
    yd = y * d
    fx = K[:, 0, 0][None]
    sk = K[:, 0, 1][None]
    cx = K[:, 0, 2][None]
    fy = K[:, 1, 1][None]
    cy = K[:, 1, 2][None]
    u = fx * xd + sk * yd + cx
    v = fy * yd + cy

    # d(xd, yd)/d(x, y)
    a11 = d + x * dd * x
    a12 = x * dd * y
    a21 = y * dd * x
    a22 = d + y * dd * y
    # d(u, v)/d(x, y)
    b11 = fx * a11 + sk * a21
    b12 = fx * a12 + sk * a22
    b21 = fy * a21
    b22 = fy * a22
    # d(x, y)/d(Xc)
    iz = 1.0 / zs
    Jn = np.zeros(x.shape + (2, 3))
    Jn[..., 0, 0] = b11 * iz
    Jn[..., 0, 1] = b12 * iz
    Jn[..., 0, 2] = -(b11 * x + b12 * y) * iz
    Jn[..., 1, 0] = b21 * iz
    Jn[..., 1, 1] = b22 * iz
    Jn[..., 1, 2] = -(b21 * x + b22 * y) * iz
    J = np.einsum("ncij,cjk->ncik", Jn, R)
    return np.stack([u, v], axis=-1), J, z


def _sanitize(xy, uv, w):
    # unused views may carry NaN; zero them so they cannot leak through 0 * nan
    keep = (w > 0.0)[..., None]
    xy = np.where(keep, np.asarray(xy, dtype=np.float64), 0.0)
    uv = np.where(keep, np.asarray(uv, dtype=np.float64), 0.0)
    return xy, uv


def triangulate_batch_numpy(xy, uv, w, K, dist, R, t, degenerate_ratio=1e-10):
    """Triangulate N points seen by C cameras.

    xy: ``(N, C, 2)`` undistorted normalized image coordinates
    uv: ``(N, C, 2)`` observed pixels (for the refinement and RMS)
    w:  ``(N, C)`` weights, 0 for unused views

    Returns ``(X (N,3), rms (N,), n_used (N,), status (N,))``.
    """
    w = np.asarray(w, dtype=float)
    xy, uv = _sanitize(xy, uv, w)
    N, C = w.shape
    P = _normalized_projections(R, t)
    used = w > 0.0
    n_used = used.sum(axis=1)

    A = np.empty((N, 2 * C, 4))
    A[:, 0::2, :] = w[..., None] * (xy[..., 0, None] * P[None, :, 2, :] - P[None, :, 0, :])
    A[:, 1::2, :] = w[..., None] * (xy[..., 1, None] * P[None, :, 2, :] - P[None, :, 1, :])
    # each point's system scaled to unit norm; homogeneous so the solution is unchanged
    norms = np.sqrt((A * A).sum(axis=(1, 2)))
    A /= np.where(norms > 0, norms, 1.0)[:, None, None]
    _, s, Vt = np.linalg.svd(A)
    Xh = Vt[:, -1, :]
    smax = np.where(s[:, 0] > 0, s[:, 0], 1.0)
    degenerate = (s[:, 2] / smax < degenerate_ratio) | (
        np.abs(Xh[:, 3]) <= degenerate_ratio * np.abs(Xh[:, :3]).max(axis=1)
    )
    Xh3 = np.where(np.abs(Xh[:, 3:4]) > 0, Xh[:, 3:4], 1.0)
    X = Xh[:, :3] / Xh3

    status = np.full(N, OK, dtype=np.int64)
    status[degenerate] = DEGENERATE
    status[n_used < 2] = INSUFFICIENT

    # one Gauss-Newton step on the weighted pixel reprojection error
    proj, J, _ = _project_with_jac_numpy(X, K, dist, R, t)
    res = proj - uv
    w2 = (w * w)[..., None, None]
    H = np.einsum("ncik,ncil->nkl", J * w2, J)
    g = np.einsum("ncik,nci->nk", J * w2, res)
    good = status == OK
    Hs = np.where(good[:, None, None], H, np.eye(3)[None])
    delta = np.linalg.solve(Hs, -g[..., None])[..., 0]
    delta[~good] = 0.0
    X_new = X + delta

    cost_old = ((w * w) * (res * res).sum(axis=-1)).sum(axis=1)
    proj_new, _, depth_new = _project_with_jac_numpy(X_new, K, dist, R, t)
    res_new = proj_new - uv
    cost_new = ((w * w) * (res_new * res_new).sum(axis=-1)).sum(axis=1)
    in_front = np.where(used, depth_new > 0, True).all(axis=1)
    take = good & np.isfinite(cost_new) & (cost_new <= cost_old) & in_front
    X = np.where(take[:, None], X_new, X)
    res = np.where(take[:, None, None], res_new, res)

    sq = np.where(used, (res * res).sum(axis=-1), 0.0).sum(axis=1)
    rms = np.sqrt(sq / np.maximum(n_used, 1))
    bad = status != OK
    X[bad] = np.nan
    rms[bad] = np.nan
    return X, rms, n_used, status


def _project_jac_one(X, K, k1, k2, R, t, J):
    xc0 = R[0, 0] * X[0] + R[0, 1] * X[1] + R[0, 2] * X[2] + t[0]
    xc1 = R[1, 0] * X[0] + R[1, 1] * X[1] + R[1, 2] * X[2] + t[1]
    z = R[2, 0] * X[0] + R[2, 1] * X[1] + R[2, 2] * X[2] + t[2]
    zs = z if abs(z) > 1e-300 else 1e-300
    x = xc0 / zs
    y = xc1 / zs
    r2 = x * x + y * y
    d = 1.0 + k1 * r2 + k2 * r2 * r2
    dd = 2.0 * k1 + 4.0 * k2 * r2
    fx = K[0, 0]
    sk = K[0, 1]
    fy = K[1, 1]
    u = fx * x * d + sk * y * d + K[0, 2]
    v = fy * y * d + K[1, 2]
    a11 = d + x * dd * x
    a12 = x * dd * y
    a21 = y * dd * x
    a22 = d + y * dd * y
    b11 = fx * a11 + sk * a21
    b12 = fx * a12 + sk * a22
    b21 = fy * a21
    b22 = fy * a22
    iz = 1.0 / zs
    n00 = b11 * iz
    n01 = b12 * iz
    n02 = -(b11 * x + b12 * y) * iz
    n10 = b21 * iz
    n11 = b22 * iz
    n12 = -(b21 * x + b22 * y) * iz
    for k in range(3):
        J[0, k] = n00 * R[0, k] + n01 * R[1, k] + n02 * R[2, k]
        J[1, k] = n10 * R[0, k] + n11 * R[1, k] + n12 * R[2, k]
    return u, v, z


_project_jac_one = _jit(_project_jac_one)


def _triangulate_loop(xy, uv, w, K, dist, R, t, degenerate_ratio):
    N, C = w.shape
    X_out = np.full((N, 3), np.nan)
    rms_out = np.full(N, np.nan)
    n_out = np.zeros(N, dtype=np.int64)
    st_out = np.zeros(N, dtype=np.int64)
    A = np.empty((2 * C, 4))
    J = np.empty((2, 3))
    res = np.empty((C, 2))
    X = np.empty(3)
    Xn = np.empty(3)
    for n in range(N):
        cnt = 0
        for c in range(C):
            if w[n, c] > 0.0:
                cnt += 1
        n_out[n] = cnt
        if cnt < 2:
            st_out[n] = INSUFFICIENT
            continue
        for c in range(C):
            wc = w[n, c]
            for k in range(4):
                p0 = R[c, 0, k] if k < 3 else t[c, 0]
                p1 = R[c, 1, k] if k < 3 else t[c, 1]
                p2 = R[c, 2, k] if k < 3 else t[c, 2]
                A[2 * c, k] = wc * (xy[n, c, 0] * p2 - p0)
                A[2 * c + 1, k] = wc * (xy[n, c, 1] * p2 - p1)
        nrm = np.sqrt(np.sum(A * A))
        if nrm > 0.0:
            A /= nrm
        _, s, Vt = np.linalg.svd(A)
        smax = s[0] if s[0] > 0.0 else 1.0
        xh3 = Vt[3, 3]
        amax = max(abs(Vt[3, 0]), abs(Vt[3, 1]), abs(Vt[3, 2]))
        if s[2] / smax < degenerate_ratio or abs(xh3) <= degenerate_ratio * amax:
            st_out[n] = DEGENERATE
            continue
        for k in range(3):
            X[k] = Vt[3, k] / xh3

        H = np.zeros((3, 3))
        g = np.zeros(3)
        cost_old = 0.0
        for c in range(C):
            wc = w[n, c]
            u, v, _z = _project_jac_one(X, K[c], dist[c, 0], dist[c, 1], R[c], t[c], J)
            r0 = u - uv[n, c, 0]
            r1 = v - uv[n, c, 1]
            res[c, 0] = r0
            res[c, 1] = r1
            ww = wc * wc
            cost_old += ww * (r0 * r0 + r1 * r1)
            for a in range(3):
                g[a] += ww * (J[0, a] * r0 + J[1, a] * r1)
                for b in range(3):
                    H[a, b] += ww * (J[0, a] * J[0, b] + J[1, a] * J[1, b])
        delta = np.linalg.solve(H, -g)
        for k in range(3):
            Xn[k] = X[k] + delta[k]
        cost_new = 0.0
        front = True
        sq_new = 0.0
        for c in range(C):
            wc = w[n, c]
            u, v, z = _project_jac_one(Xn, K[c], dist[c, 0], dist[c, 1], R[c], t[c], J)
            r0 = u - uv[n, c, 0]
            r1 = v - uv[n, c, 1]
            cost_new += wc * wc * (r0 * r0 + r1 * r1)
            if wc > 0.0:
                sq_new += r0 * r0 + r1 * r1
                if z <= 0.0:
                    front = False
        if np.isfinite(cost_new) and cost_new <= cost_old and front:
            for k in range(3):
                X[k] = Xn[k]
            sq = sq_new
        else:
            sq = 0.0
            for c in range(C):
                if w[n, c] > 0.0:
                    sq += res[c, 0] * res[c, 0] + res[c, 1] * res[c, 1]
        for k in range(3):
            X_out[n, k] = X[k]
        rms_out[n] = np.sqrt(sq / cnt)
    return X_out, rms_out, n_out, st_out


_triangulate_loop_jit = _jit(_triangulate_loop)


def triangulate_batch_jit(xy, uv, w, K, dist, R, t, degenerate_ratio=1e-10):
    f = np.ascontiguousarray
    w = f(w, dtype=np.float64)
    xy, uv = _sanitize(xy, uv, w)
    return _triangulate_loop_jit(
        f(xy), f(uv), w,
        f(K, dtype=np.float64), f(dist, dtype=np.float64), f(R, dtype=np.float64),
        f(t, dtype=np.float64), float(degenerate_ratio),
    )


# ---------------------------------------------------------------------------
# kinematic chain
# ---------------------------------------------------------------------------
#
# Tree encoding (segments topologically ordered, parent index < child index):
#   parent      (S,)    int, -1 for the root
#   offset      (S, 3)  joint origin in the parent frame, meters
#   axis        (S, 3)  int in {0, 1, 2}: body-fixed rotation sequence
#   sign        (S, 3)  +1/-1 applied to each rotation
#   coord       (S, 3)  int coordinate index, -1 for an unused slot
#   root_trans  (3,)    coordinate indices of the root translation
#   mseg        (M,)    segment of each marker
#   moff        (M, 3)  marker offset in its segment frame, meters
# Rotational coordinates are degrees, translations meters.


def _rot_numpy(axis, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    o = np.zeros_like(angle)
    i = np.ones_like(angle)
    if axis == 0:
        m = [[i, o, o], [o, c, -s], [o, s, c]]
    elif axis == 1:
        m = [[c, o, s], [o, i, o], [-s, o, c]]
    else:
        m = [[c, -s, o], [s, c, o], [o, o, i]]
    return np.moveaxis(np.array(m), (0, 1), (-2, -1))


def chain_kinematics_numpy(q, parent, offset, axis, sign, coord, root_trans,
                           mseg, moff, with_jacobian=True):
    """Marker positions ``(F, M, 3)`` and Jacobian ``(F, M, 3, n)`` for poses ``q (F, n)``."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    F, n = q.shape
    S = len(parent)
    M = len(mseg)
    segR = np.empty((S, F, 3, 3))
    segp = np.empty((S, F, 3))
    # per rotational dof: world axis (F,3), pivot (F,3)
    dof_axis = np.zeros((S, 3, F, 3))
    dof_pivot = np.zeros((S, 3, F, 3))
    eye = np.broadcast_to(np.eye(3), (F, 3, 3))
    for s_ in range(S):
        p = parent[s_]
        if p < 0:
            Rcur = eye.copy()
            origin = q[:, list(root_trans)] + offset[s_][None]
        else:
            Rcur = segR[p].copy()
            origin = segp[p] + np.einsum("fij,j->fi", segR[p], offset[s_])
        for k in range(3):
            c = coord[s_, k]
            if c < 0:
                continue
            ax = axis[s_, k]
            dof_axis[s_, k] = sign[s_, k] * Rcur[:, :, ax]
            dof_pivot[s_, k] = origin
            Rcur = Rcur @ _rot_numpy(ax, sign[s_, k] * q[:, c] * DEG)
        segR[s_] = Rcur
        segp[s_] = origin

    pos = np.empty((F, M, 3))
    for m in range(M):
        s_ = mseg[m]
        pos[:, m] = segp[s_] + np.einsum("fij,j->fi", segR[s_], moff[m])
    if not with_jacobian:
        return pos, None

    jac = np.zeros((F, M, 3, n))
    for m in range(M):
        for i in range(3):
            jac[:, m, i, root_trans[i]] = 1.0
        s_ = mseg[m]
        while s_ >= 0:
            for k in range(3):
                c = coord[s_, k]
                if c >= 0:
                    jac[:, m, :, c] = np.cross(dof_axis[s_, k], pos[:, m] - dof_pivot[s_, k]) * DEG
            s_ = parent[s_]
    return pos, jac


def _chain_loop(q, parent, offset, axis, sign, coord, root_trans, mseg, moff,
                with_jacobian):
    F, n = q.shape
    S = parent.shape[0]
    M = mseg.shape[0]
    pos = np.empty((F, M, 3))
    jac = np.zeros((F if with_jacobian else 0, M, 3, n))
    segR = np.empty((S, 3, 3))
    segp = np.empty((S, 3))
    dax = np.zeros((S, 3, 3))
    dpv = np.zeros((S, 3, 3))
    Rcur = np.empty((3, 3))
    Rn = np.empty((3, 3))
    for f in range(F):
        for s_ in range(S):
            p = parent[s_]
            if p < 0:
                for i in range(3):
                    for j in range(3):
                        Rcur[i, j] = 1.0 if i == j else 0.0
                    segp[s_, i] = q[f, root_trans[i]] + offset[s_, i]
            else:
                for i in range(3):
                    acc = segp[p, i]
                    for j in range(3):
                        Rcur[i, j] = segR[p, i, j]
                        acc += segR[p, i, j] * offset[s_, j]
                    segp[s_, i] = acc
            for k in range(3):
                c = coord[s_, k]
                if c < 0:
                    continue
                ax = axis[s_, k]
                sg = sign[s_, k]
                for i in range(3):
                    dax[s_, k, i] = sg * Rcur[i, ax]
                    dpv[s_, k, i] = segp[s_, i]
                th = sg * q[f, c] * (np.pi / 180.0)
                cs = np.cos(th)
                sn = np.sin(th)
                # Rn = Rcur @ rot(ax, th); only the two columns orthogonal to ax change
                a1 = (ax + 1) % 3
                a2 = (ax + 2) % 3
                for i in range(3):
                    Rn[i, ax] = Rcur[i, ax]
                    Rn[i, a1] = cs * Rcur[i, a1] + sn * Rcur[i, a2]
                    Rn[i, a2] = -sn * Rcur[i, a1] + cs * Rcur[i, a2]
                for i in range(3):
                    for j in range(3):
                        Rcur[i, j] = Rn[i, j]
            for i in range(3):
                for j in range(3):
                    segR[s_, i, j] = Rcur[i, j]
        for m in range(M):
            s_ = mseg[m]
            for i in range(3):
                acc = segp[s_, i]
                for j in range(3):
                    acc += segR[s_, i, j] * moff[m, j]
                pos[f, m, i] = acc
            if not with_jacobian:
                continue
            for i in range(3):
                jac[f, m, i, root_trans[i]] = 1.0
            s_ = mseg[m]
            while s_ >= 0:
                for k in range(3):
                    c = coord[s_, k]
                    if c < 0:
                        continue
                    rx = pos[f, m, 0] - dpv[s_, k, 0]
                    ry = pos[f, m, 1] - dpv[s_, k, 1]
                    rz = pos[f, m, 2] - dpv[s_, k, 2]
                    ax0 = dax[s_, k, 0]
                    ax1 = dax[s_, k, 1]
                    ax2 = dax[s_, k, 2]
                    d2r = np.pi / 180.0
                    jac[f, m, 0, c] = (ax1 * rz - ax2 * ry) * d2r
                    jac[f, m, 1, c] = (ax2 * rx - ax0 * rz) * d2r
                    jac[f, m, 2, c] = (ax0 * ry - ax1 * rx) * d2r
                s_ = parent[s_]
    return pos, jac


_chain_loop_jit = _jit(_chain_loop)


def chain_kinematics_jit(q, parent, offset, axis, sign, coord, root_trans,
                         mseg, moff, with_jacobian=True):
    q = np.ascontiguousarray(np.atleast_2d(q), dtype=np.float64)
    pos, jac = _chain_loop_jit(
        q, np.ascontiguousarray(parent, dtype=np.int64),
        np.ascontiguousarray(offset, dtype=np.float64),
        np.ascontiguousarray(axis, dtype=np.int64),
        np.ascontiguousarray(sign, dtype=np.float64),
        np.ascontiguousarray(coord, dtype=np.int64),
        np.ascontiguousarray(root_trans, dtype=np.int64),
        np.ascontiguousarray(mseg, dtype=np.int64),
        np.ascontiguousarray(moff, dtype=np.float64),
        bool(with_jacobian),
    )
    return pos, (jac if with_jacobian else None)


if USE_NUMBA:
    undistort_normalized = undistort_normalized_jit
    triangulate_batch = triangulate_batch_jit
    chain_kinematics = chain_kinematics_jit
else:
    undistort_normalized = undistort_normalized_numpy
    triangulate_batch = triangulate_batch_numpy
    chain_kinematics = chain_kinematics_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
