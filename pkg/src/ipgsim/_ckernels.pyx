# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled iLQR kernels; same interface and math as ``_pykernels``.

The unicycle Jacobians are identity plus four entries per agent in ``A`` and two
in ``B``, so the Riccati step works on that sparsity directly instead of doing
dense products.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, hypot, fmax, fmin

cnp.import_array()

BACKEND = "cython"
cdef double EPS = 1e-12


cdef inline double hinge(double x) nogil:
    return x if x > 0.0 else 0.0


cdef inline void rect_sd(double px, double py, double[:] rect,
                         double* sd, double* gx, double* gy) nogil:
    cdef double x0 = rect[0], y0 = rect[1], x1 = rect[2], y1 = rect[3]
    cdef double dx = fmax(x0 - px, px - x1)
    cdef double dy = fmax(y0 - py, py - y1)
    cdef double sx = -1.0 if x0 - px >= px - x1 else 1.0
    cdef double sy = -1.0 if y0 - py >= py - y1 else 1.0
    cdef double ox, oy, d
    if dx > 0.0 or dy > 0.0:
        ox = fmax(dx, 0.0)
        oy = fmax(dy, 0.0)
        d = hypot(ox, oy)
        sd[0] = d
        if d <= EPS:
            d = 1.0
        gx[0] = sx * ox / d
        gy[0] = sy * oy / d
    elif dx >= dy:
        sd[0] = dx
        gx[0] = sx
        gy[0] = 0.0
    else:
        sd[0] = dy
        gx[0] = 0.0
        gy[0] = sy


cdef class Kernel:
    cdef public object p
    cdef public int N, n, m
    cdef double Ts, w_obs, w_box, contact, w_contact
    cdef double[:, :] goal, Q, R, pair_w, d_safe, circles, rects, u_lo, u_hi
    cdef double[:] B, v_lo, v_hi, ws, mover_ds, mover_w
    cdef double[:, :, :] movers
    cdef bint has_ws

    def __init__(self, packed):
        self.p = packed
        self.N = packed.goal.shape[0]
        self.n = 4 * self.N
        self.m = 2 * self.N
        self.Ts = packed.Ts
        self.w_obs = packed.w_obs
        self.w_box = packed.w_box
        self.contact = packed.contact
        self.w_contact = packed.w_contact
        self.goal = packed.goal
        self.Q = packed.Q
        self.R = packed.R
        self.pair_w = packed.pair_w
        self.d_safe = packed.d_safe
        self.circles = packed.circles
        self.rects = packed.rects
        self.u_lo = packed.u_lo
        self.u_hi = packed.u_hi
        self.B = packed.B
        self.v_lo = packed.v_lo
        self.v_hi = packed.v_hi
        self.has_ws = packed.workspace.shape[0] == 4
        self.ws = packed.workspace if self.has_ws else np.zeros(4)
        self.movers = packed.movers
        self.mover_ds = packed.mover_ds
        self.mover_w = packed.mover_w

    # -- dynamics ----------------------------------------------------------

    cdef inline void _step(self, const double[:] x, const double[:] u, double[:] out) nogil:
        cdef int i, r
        cdef double th, v, Ts = self.Ts
        for i in range(self.N):
            r = 4 * i
            th = x[r + 2]
            v = x[r + 3]
            out[r] = x[r] + Ts * v * cos(th)
            out[r + 1] = x[r + 1] + Ts * v * sin(th)
            out[r + 2] = th + Ts * u[2 * i + 1]
            out[r + 3] = fmin(fmax(v + Ts * u[2 * i], self.v_lo[i]), self.v_hi[i])

    def rollout(self, x0, U):
        cdef const double[:, :] Uv = np.ascontiguousarray(U, dtype=float)
        cdef int T = Uv.shape[0], k
        xs_arr = np.empty((T + 1, self.n))
        cdef double[:, :] xs = xs_arr
        cdef const double[:] x0v = np.ascontiguousarray(x0, dtype=float)
        xs[0, :] = x0v
        for k in range(T):
            self._step(xs[k], Uv[k], xs[k + 1])
        return xs_arr

    def linearize(self, xs, U):
        cdef const double[:, :] X = np.ascontiguousarray(xs, dtype=float)
        cdef int T = U.shape[0], t, i, r
        A_arr = np.zeros((T, self.n, self.n))
        B_arr = np.zeros((T, self.n, self.m))
        cdef double[:, :, :] A = A_arr
        cdef double[:, :, :] Bm = B_arr
        cdef double Ts = self.Ts, s, c, v
        for t in range(T):
            for r in range(self.n):
                A[t, r, r] = 1.0
            for i in range(self.N):
                r = 4 * i
                s = sin(X[t, r + 2])
                c = cos(X[t, r + 2])
                v = X[t, r + 3]
                A[t, r, r + 2] = -Ts * v * s
                A[t, r, r + 3] = Ts * c
                A[t, r + 1, r + 2] = Ts * v * c
                A[t, r + 1, r + 3] = Ts * s
                Bm[t, r + 2, 2 * i + 1] = Ts
                Bm[t, r + 3, 2 * i] = Ts
        return A_arr, B_arr

    # -- cost --------------------------------------------------------------

    cdef double _terms(self, const double[:, :] xs, const double[:, :] U, bint derivs,
                       double[:, :] lx, double[:, :] lu, double[:, :, :] lxx,
                       double[:, :, :] luu) nogil:
        """Potential value; when ``derivs`` accumulate into zeroed derivative buffers."""
        cdef int N = self.N, T = U.shape[0]
        cdef int t, i, j, a, b, q, r, rj
        cdef double total = 0.0, e, uu, v, px, py, dx, dy, d, res, w, gx, gy, sd
        cdef double hw, ex, ey, up, dn, ds, dd, wb = self.w_box, lo, hi, val
        cdef int layer
        for t in range(T + 1):
            for i in range(N):
                r = 4 * i
                for a in range(4):
                    e = xs[t, r + a] - self.goal[i, a]
                    total += self.Q[i, a] * e * e
                    if derivs:
                        lx[t, r + a] += 2.0 * self.Q[i, a] * e
                        lxx[t, r + a, r + a] += 2.0 * self.Q[i, a]
        for t in range(T):
            for i in range(N):
                r = 4 * i
                for b in range(2):
                    uu = U[t, 2 * i + b]
                    total += self.R[i, b] * uu * uu
                    up = hinge(uu - self.u_hi[i, b])
                    dn = hinge(self.u_lo[i, b] - uu)
                    total += wb * (up * up + dn * dn)
                    if derivs:
                        lu[t, 2 * i + b] += 2.0 * self.R[i, b] * uu + 2.0 * wb * (up - dn)
                        luu[t, 2 * i + b, 2 * i + b] += 2.0 * self.R[i, b]
                        if up > 0.0 or dn > 0.0:
                            luu[t, 2 * i + b, 2 * i + b] += 2.0 * wb
                v = xs[t, r + 3]
                if v < 0.0:
                    total += -v * self.B[i]
                    if derivs:
                        lx[t, r + 3] += -self.B[i]
                up = hinge(v - self.v_hi[i])
                dn = hinge(self.v_lo[i] - v)
                total += wb * (up * up + dn * dn)
                if derivs and (up > 0.0 or dn > 0.0):
                    lx[t, r + 3] += 2.0 * wb * (up - dn)
                    lxx[t, r + 3, r + 3] += 2.0 * wb
                px = xs[t, r]
                py = xs[t, r + 1]
                if self.has_ws:
                    for a in range(2):
                        val = xs[t, r + a]
                        lo = self.ws[a]
                        hi = self.ws[a + 2]
                        up = hinge(val - hi)
                        dn = hinge(lo - val)
                        total += wb * (up * up + dn * dn)
                        if derivs and (up > 0.0 or dn > 0.0):
                            lx[t, r + a] += 2.0 * wb * (up - dn)
                            lxx[t, r + a, r + a] += 2.0 * wb
                # point hinges: obstacles (static) and movers (predicted)
                for q in range(self.circles.shape[0] + self.rects.shape[0] + self.movers.shape[1]):
                    if q < self.circles.shape[0]:
                        dx = px - self.circles[q, 0]
                        dy = py - self.circles[q, 1]
                        d = hypot(dx, dy)
                        res = self.circles[q, 3] - (d - self.circles[q, 2])
                        w = self.w_obs
                        if d <= EPS:
                            d = 1.0
                        gx = dx / d
                        gy = dy / d
                    elif q < self.circles.shape[0] + self.rects.shape[0]:
                        j = q - self.circles.shape[0]
                        rect_sd(px, py, self.rects[j], &sd, &gx, &gy)
                        res = self.rects[j, 4] - sd
                        w = self.w_obs
                    else:
                        j = q - self.circles.shape[0] - self.rects.shape[0]
                        dx = px - self.movers[t, j, 0]
                        dy = py - self.movers[t, j, 1]
                        d = hypot(dx, dy)
                        res = self.mover_ds[j] - d
                        w = self.mover_w[j]
                        if d <= EPS:
                            d = 1.0
                        gx = dx / d
                        gy = dy / d
                    if res > 0.0:
                        total += w * res * res
                        if derivs:
                            lx[t, r] += -2.0 * w * res * gx
                            lx[t, r + 1] += -2.0 * w * res * gy
                            hw = 2.0 * w
                            lxx[t, r, r] += hw * gx * gx
                            lxx[t, r, r + 1] += hw * gx * gy
                            lxx[t, r + 1, r] += hw * gx * gy
                            lxx[t, r + 1, r + 1] += hw * gy * gy
            for i in range(N):
                r = 4 * i
                for j in range(i + 1, N):
                    rj = 4 * j
                    dx = xs[t, r] - xs[t, rj]
                    dy = xs[t, r + 1] - xs[t, rj + 1]
                    d = hypot(dx, dy)
                    # comfort term at d_safe, then the stiff contact term
                    for layer in range(2):
                        if layer == 0:
                            ds = self.d_safe[i, j]
                            w = self.pair_w[i, j]
                        else:
                            ds = self.contact
                            w = self.w_contact
                        if d < ds and w > 0.0:
                            res = d - ds
                            total += w * res * res
                            if derivs:
                                dd = d if d > EPS else 1.0
                                ex = dx / dd
                                ey = dy / dd
                                gx = 2.0 * w * res * ex
                                gy = 2.0 * w * res * ey
                                lx[t, r] += gx
                                lx[t, r + 1] += gy
                                lx[t, rj] -= gx
                                lx[t, rj + 1] -= gy
                                hw = 2.0 * w
                                for a in range(2):
                                    for b in range(2):
                                        val = hw * (ex if a == 0 else ey) * (ex if b == 0 else ey)
                                        lxx[t, r + a, r + b] += val
                                        lxx[t, rj + a, rj + b] += val
                                        lxx[t, r + a, rj + b] -= val
                                        lxx[t, rj + a, r + b] -= val
        return total

    def cost(self, xs, U):
        cdef const double[:, :] X = np.ascontiguousarray(xs, dtype=float)
        cdef const double[:, :] Uv = np.ascontiguousarray(U, dtype=float)
        cdef double[:, :] d2 = np.zeros((1, 1))
        cdef double[:, :, :] d3 = np.zeros((1, 1, 1))
        return self._terms(X, Uv, False, d2, d2, d3, d3)

    def quadratize(self, xs, U):
        cdef const double[:, :] X = np.ascontiguousarray(xs, dtype=float)
        cdef const double[:, :] Uv = np.ascontiguousarray(U, dtype=float)
        cdef int T = Uv.shape[0]
        lx = np.zeros((T + 1, self.n))
        lu = np.zeros((T, self.m))
        lxx = np.zeros((T + 1, self.n, self.n))
        luu = np.zeros((T, self.m, self.m))
        lux = np.zeros((T, self.m, self.n))
        self._terms(X, Uv, True, lx, lu, lxx, luu)
        return lx, lu, lxx, luu, lux

    # -- iLQR passes ---------------------------------------------------------

    def backward(self, xs, U, double reg):
        """Riccati recursion; returns ``(k, K, dV)`` or ``None`` if Q_uu + reg*I is not PD.

        Controls sitting on their bound with the gradient pointing outward are
        held: their feedforward and feedback gains are zero.
        """
        cdef const double[:, :] X = np.ascontiguousarray(xs, dtype=float)
        cdef const double[:, :] Uv = np.ascontiguousarray(U, dtype=float)
        cdef int T = Uv.shape[0], n = self.n, m = self.m, N = self.N
        lx_a, lu_a, lxx_a, luu_a, lux_a = self.quadratize(X, Uv)
        cdef double[:, :] lx = lx_a
        cdef double[:, :] lu = lu_a
        cdef double[:, :, :] lxx = lxx_a
        cdef double[:, :, :] luu = luu_a
        ks_a = np.zeros((T, m))
        Ks_a = np.zeros((T, m, n))
        cdef double[:, :] ks = ks_a
        cdef double[:, :, :] Ks = Ks_a
        cdef double[:] Vx = np.array(lx_a[T])
        cdef double[:, :] Vxx = np.array(lxx_a[T])
        cdef double[:] Qx = np.zeros(n)
        cdef double[:] Qu = np.zeros(m)
        cdef double[:, :] M = np.zeros((n, n))
        cdef double[:, :] Qxx = np.zeros((n, n))
        cdef double[:, :] Quu = np.zeros((m, m))
        cdef double[:, :] L = np.zeros((m, m))
        cdef double[:, :] Qux = np.zeros((m, n))
        cdef double[:, :] QuuK = np.zeros((m, n))
        cdef double[:] e02 = np.zeros(N)
        cdef double[:] e03 = np.zeros(N)
        cdef double[:] e12 = np.zeros(N)
        cdef double[:] e13 = np.zeros(N)
        cdef double[:] tmp = np.zeros(m)
        cdef int[:] held = np.zeros(m, dtype=np.intc)
        cdef double dV0 = 0.0, dV1 = 0.0, Ts = self.Ts, acc
        cdef int t, i, r, a, b, c, rc, rd
        cdef bint ok = True
        with nogil:
            for t in range(T - 1, -1, -1):
                for i in range(N):
                    r = 4 * i
                    e02[i] = -Ts * X[t, r + 3] * sin(X[t, r + 2])
                    e03[i] = Ts * cos(X[t, r + 2])
                    e12[i] = Ts * X[t, r + 3] * cos(X[t, r + 2])
                    e13[i] = Ts * sin(X[t, r + 2])
                # Qx = lx + A^T Vx
                for a in range(n):
                    Qx[a] = lx[t, a] + Vx[a]
                for i in range(N):
                    r = 4 * i
                    Qx[r + 2] += e02[i] * Vx[r] + e12[i] * Vx[r + 1]
                    Qx[r + 3] += e03[i] * Vx[r] + e13[i] * Vx[r + 1]
                # Qu = lu + B^T Vx ; row(2i) = 4i+3, row(2i+1) = 4i+2
                for i in range(N):
                    Qu[2 * i] = lu[t, 2 * i] + Ts * Vx[4 * i + 3]
                    Qu[2 * i + 1] = lu[t, 2 * i + 1] + Ts * Vx[4 * i + 2]
                # M = Vxx A
                for a in range(n):
                    for b in range(n):
                        M[a, b] = Vxx[a, b]
                for i in range(N):
                    r = 4 * i
                    for a in range(n):
                        M[a, r + 2] += Vxx[a, r] * e02[i] + Vxx[a, r + 1] * e12[i]
                        M[a, r + 3] += Vxx[a, r] * e03[i] + Vxx[a, r + 1] * e13[i]
                # Qxx = lxx + A^T M
                for a in range(n):
                    for b in range(n):
                        Qxx[a, b] = lxx[t, a, b] + M[a, b]
                for i in range(N):
                    r = 4 * i
                    for b in range(n):
                        Qxx[r + 2, b] += e02[i] * M[r, b] + e12[i] * M[r + 1, b]
                        Qxx[r + 3, b] += e03[i] * M[r, b] + e13[i] * M[r + 1, b]
                # Quu = luu + B^T Vxx B ; Qux = B^T M  (lux is identically zero)
                for c in range(m):
                    rc = 4 * (c // 2) + (3 if c % 2 == 0 else 2)
                    for b in range(m):
                        rd = 4 * (b // 2) + (3 if b % 2 == 0 else 2)
                        Quu[c, b] = luu[t, c, b] + Ts * Ts * Vxx[rc, rd]
                    for b in range(n):
                        Qux[c, b] = Ts * M[rc, b]
                # controls on a bound that the gradient pushes outward stay put
                for a in range(m):
                    held[a] = ((Uv[t, a] >= self.u_hi[a // 2, a % 2] and Qu[a] < 0.0)
                               or (Uv[t, a] <= self.u_lo[a // 2, a % 2] and Qu[a] > 0.0))
                # Cholesky of Quu + reg I over the free controls (unit rows for held ones)
                for a in range(m):
                    for b in range(a + 1):
                        if held[a] or held[b]:
                            acc = 1.0 if a == b else 0.0
                        else:
                            acc = Quu[a, b] + (reg if a == b else 0.0)
                        for c in range(b):
                            acc -= L[a, c] * L[b, c]
                        if a == b:
                            if acc <= 0.0:
                                ok = False
                                break
                            L[a, a] = sqrt(acc)
                        else:
                            L[a, b] = acc / L[b, b]
                    if not ok:
                        break
                if not ok:
                    break
                # k = -(L L^T)^{-1} Qu, K = -(L L^T)^{-1} Qux
                for b in range(n + 1):
                    for a in range(m):
                        if held[a]:
                            acc = 0.0
                        else:
                            acc = Qu[a] if b == n else Qux[a, b]
                        for c in range(a):
                            acc -= L[a, c] * tmp[c]
                        tmp[a] = acc / L[a, a]
                    for a in range(m - 1, -1, -1):
                        acc = tmp[a]
                        for c in range(a + 1, m):
                            acc -= L[c, a] * tmp[c]
                        tmp[a] = acc / L[a, a]
                    for a in range(m):
                        if b == n:
                            ks[t, a] = -tmp[a]
                        else:
                            Ks[t, a, b] = -tmp[a]
                # expected decrease, using the unregularized Quu
                for a in range(m):
                    acc = 0.0
                    for c in range(m):
                        acc += Quu[a, c] * ks[t, c]
                    tmp[a] = acc
                    dV0 += ks[t, a] * Qu[a]
                    dV1 += 0.5 * ks[t, a] * acc
                # Vx = Qx + K^T (Quu k) + K^T Qu + Qux^T k
                for b in range(n):
                    acc = Qx[b]
                    for a in range(m):
                        acc += Ks[t, a, b] * (tmp[a] + Qu[a]) + Qux[a, b] * ks[t, a]
                    Vx[b] = acc
                # Vxx = Qxx + K^T Quu K + K^T Qux + Qux^T K
                for a in range(m):
                    for b in range(n):
                        acc = 0.0
                        for c in range(m):
                            acc += Quu[a, c] * Ks[t, c, b]
                        QuuK[a, b] = acc
                for a in range(n):
                    for b in range(a, n):
                        acc = Qxx[a, b]
                        for c in range(m):
                            acc += Ks[t, c, a] * (QuuK[c, b] + Qux[c, b]) + Qux[c, a] * Ks[t, c, b]
                        Vxx[a, b] = acc
                for a in range(n):
                    for b in range(a):
                        Vxx[a, b] = Vxx[b, a]
        if not ok:
            return None
        return ks_a, Ks_a, np.array([dV0, dV1])

    def forward(self, xs, U, ks, Ks, double alpha):
        """Closed-loop rollout of the updated policy; controls are clamped to the input box."""
        cdef const double[:, :] X = np.ascontiguousarray(xs, dtype=float)
        cdef const double[:, :] Uv = np.ascontiguousarray(U, dtype=float)
        cdef const double[:, :] k = np.ascontiguousarray(ks, dtype=float)
        cdef const double[:, :, :] K = np.ascontiguousarray(Ks, dtype=float)
        cdef int T = Uv.shape[0], n = self.n, m = self.m, t, a, b
        xn_a = np.empty((T + 1, n))
        un_a = np.empty((T, m))
        cdef double[:, :] xn = xn_a
        cdef double[:, :] un = un_a
        cdef double acc
        xn[0, :] = X[0, :]
        for t in range(T):
            for a in range(m):
                acc = Uv[t, a] + alpha * k[t, a]
                for b in range(n):
                    acc += K[t, a, b] * (xn[t, b] - X[t, b])
                un[t, a] = fmin(fmax(acc, self.u_lo[a // 2, a % 2]), self.u_hi[a // 2, a % 2])
            self._step(xn[t], un[t], xn[t + 1])
        return xn_a, un_a
