"""Pure numpy implementation of the iLQR kernels.

Mirrors the compiled ``_ckernels`` extension call for call. Joint states are
flat ``4N`` vectors and joint controls flat ``2N`` vectors; trajectories are
``(T + 1, 4N)`` and ``(T, 2N)``.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"
_EPS = 1e-12


def _hinge(x):
    return np.where(x > 0.0, x, 0.0)


def _rect_sd(px, py, rect):
    """Signed distance to a rectangle and its gradient, vectorized over points."""
    x0, y0, x1, y1 = rect[:4]
    dx = np.maximum(x0 - px, px - x1)
    dy = np.maximum(y0 - py, py - y1)
    sx = np.where(x0 - px >= px - x1, -1.0, 1.0)
    sy = np.where(y0 - py >= py - y1, -1.0, 1.0)
    ox, oy = np.maximum(dx, 0.0), np.maximum(dy, 0.0)
    dist_out = np.hypot(ox, oy)
    outside = (dx > 0.0) | (dy > 0.0)
    safe = np.where(dist_out > _EPS, dist_out, 1.0)
    gx_out, gy_out = sx * ox / safe, sy * oy / safe
    along_x = dx >= dy
    gx_in = np.where(along_x, sx, 0.0)
    gy_in = np.where(along_x, 0.0, sy)
    sd = np.where(outside, dist_out, np.maximum(dx, dy))
    return sd, np.where(outside, gx_out, gx_in), np.where(outside, gy_out, gy_in)


class Kernel:
    def __init__(self, packed):
        self.p = packed
        self.N = packed.goal.shape[0]
        self.n = 4 * self.N
        self.m = 2 * self.N

    # -- dynamics ----------------------------------------------------------

    def _step(self, x, u, out):
        # scalar libm calls keep this bit-identical to dynamics.step
        p = self.p
        Ts = p.Ts
        for i in range(self.N):
            r, c = 4 * i, 2 * i
            th, v = x[r + 2], x[r + 3]
            out[r] = x[r] + Ts * v * math.cos(th)
            out[r + 1] = x[r + 1] + Ts * v * math.sin(th)
            out[r + 2] = th + Ts * u[c + 1]
            out[r + 3] = min(max(v + Ts * u[c], p.v_lo[i]), p.v_hi[i])

    def rollout(self, x0, U):
        T = U.shape[0]
        xs = np.empty((T + 1, self.n))
        xs[0] = x0
        for k in range(T):
            self._step(xs[k], U[k], xs[k + 1])
        return xs

    def linearize(self, xs, U):
        T = U.shape[0]
        Ts = self.p.Ts
        A = np.zeros((T, self.n, self.n))
        Bm = np.zeros((T, self.n, self.m))
        idx = np.arange(self.n)
        A[:, idx, idx] = 1.0
        X = xs[:T].reshape(T, self.N, 4)
        for i in range(self.N):
            s, c = np.sin(X[:, i, 2]), np.cos(X[:, i, 2])
            v = X[:, i, 3]
            r = 4 * i
            A[:, r, r + 2] = -Ts * v * s
            A[:, r, r + 3] = Ts * c
            A[:, r + 1, r + 2] = Ts * v * c
            A[:, r + 1, r + 3] = Ts * s
            Bm[:, r + 2, 2 * i + 1] = Ts
            Bm[:, r + 3, 2 * i] = Ts
        return A, Bm

    # -- cost --------------------------------------------------------------

    def _terms(self, xs, U, derivs: bool):
        """Evaluate the potential, optionally with gradients and Gauss-Newton Hessians."""
        p = self.p
        N, T = self.N, U.shape[0]
        X = xs.reshape(T + 1, N, 4)
        Uu = U.reshape(T, N, 2)
        Xs = X[:T]
        total = 0.0
        if derivs:
            lx = np.zeros((T + 1, N, 4))
            lu = np.zeros((T, N, 2))
            lxx = np.zeros((T + 1, self.n, self.n))
            luu = np.zeros((T, self.m, self.m))
            lux = np.zeros((T, self.m, self.n))
            # block views: hessian entry (agent i, comp a) x (agent j, comp b)
            H = lxx.reshape(T + 1, N, 4, N, 4)

        # goal tracking, stage and terminal
        e = X - p.goal
        total += float(np.sum(p.Q * e * e) + np.sum(p.R * Uu * Uu))
        if derivs:
            lx += 2.0 * p.Q * e
            lu += 2.0 * p.R * Uu
            for i in range(N):
                for a in range(4):
                    H[:, i, a, i, a] += 2.0 * p.Q[i, a]
                for b in range(2):
                    luu[:, 2 * i + b, 2 * i + b] += 2.0 * p.R[i, b]

        # reversing
        v = Xs[:, :, 3]
        neg = v < 0.0
        total += float(np.sum(np.where(neg, -v * p.B, 0.0)))
        if derivs:
            lx[:T, :, 3] += np.where(neg, -p.B, 0.0)

        px, py = Xs[:, :, 0], Xs[:, :, 1]

        def point_hinge(res, gx, gy, w):
            # cost w * res^2 where res = margin - sd > 0; grad of sd is (gx, gy)
            nonlocal total
            act = res > 0.0
            r = np.where(act, res, 0.0)
            total += float(np.sum(w * r * r))
            if derivs:
                lx[:T, :, 0] += -2.0 * w * r * gx
                lx[:T, :, 1] += -2.0 * w * r * gy
                hw = np.where(act, 2.0 * w, 0.0)
                for i in range(N):
                    H[:T, i, 0, i, 0] += hw[:, i] * gx[:, i] * gx[:, i]
                    H[:T, i, 0, i, 1] += hw[:, i] * gx[:, i] * gy[:, i]
                    H[:T, i, 1, i, 0] += hw[:, i] * gx[:, i] * gy[:, i]
                    H[:T, i, 1, i, 1] += hw[:, i] * gy[:, i] * gy[:, i]

        for cx, cy, rad, margin in p.circles:
            dx, dy = px - cx, py - cy
            d = np.hypot(dx, dy)
            safe = np.where(d > _EPS, d, 1.0)
            point_hinge(margin - (d - rad), dx / safe, dy / safe, p.w_obs)
        for rect in p.rects:
            sd, gx, gy = _rect_sd(px, py, rect)
            point_hinge(rect[4] - sd, gx, gy, p.w_obs)

        # moving obstacles (predicted positions of agents outside the game)
        for q in range(p.movers.shape[1]):
            dx = px - p.movers[:T, q, 0][:, None]
            dy = py - p.movers[:T, q, 1][:, None]
            d = np.hypot(dx, dy)
            safe = np.where(d > _EPS, d, 1.0)
            point_hinge(p.mover_ds[q] - d, dx / safe, dy / safe, p.mover_w[q])

        # box penalties on states and inputs
        wb = p.w_box

        def box(val, lo, hi):
            up, dn = _hinge(val - hi), _hinge(lo - val)
            c = wb * (up * up + dn * dn)
            g = 2.0 * wb * (up - dn)
            h = np.where((up > 0.0) | (dn > 0.0), 2.0 * wb, 0.0)
            return float(np.sum(c)), g, h

        c, g, h = box(v, p.v_lo, p.v_hi)
        total += c
        if derivs:
            lx[:T, :, 3] += g
            for i in range(N):
                H[:T, i, 3, i, 3] += h[:, i]
        c, g, h = box(Uu, p.u_lo, p.u_hi)
        total += c
        if derivs:
            lu += g
            for i in range(N):
                for b in range(2):
                    luu[:, 2 * i + b, 2 * i + b] += h[:, i, b]
        if p.workspace.size:
            for comp, lo, hi in ((0, p.workspace[0], p.workspace[2]), (1, p.workspace[1], p.workspace[3])):
                c, g, h = box(Xs[:, :, comp], lo, hi)
                total += c
                if derivs:
                    lx[:T, :, comp] += g
                    for i in range(N):
                        H[:T, i, comp, i, comp] += h[:, i]

        # pairwise collision avoidance, each pair once
        for i in range(N):
            for j in range(i + 1, N):
                dx = Xs[:, i, 0] - Xs[:, j, 0]
                dy = Xs[:, i, 1] - Xs[:, j, 1]
                d = np.hypot(dx, dy)
                # comfort term at d_safe, then the stiff contact term
                for ds, w in ((p.d_safe[i, j], p.pair_w[i, j]), (p.contact, p.w_contact)):
                    act = (d < ds) & (w > 0.0)
                    r = np.where(act, d - ds, 0.0)
                    total += float(np.sum(w * r * r))
                    if derivs:
                        safe = np.where(d > _EPS, d, 1.0)
                        ex, ey = dx / safe, dy / safe
                        gx, gy = 2.0 * w * r * ex, 2.0 * w * r * ey
                        lx[:T, i, 0] += gx
                        lx[:T, i, 1] += gy
                        lx[:T, j, 0] -= gx
                        lx[:T, j, 1] -= gy
                        hw = np.where(act, 2.0 * w, 0.0)
                        blk = np.stack([np.stack([ex * ex, ex * ey], -1),
                                        np.stack([ex * ey, ey * ey], -1)], -2) * hw[:, None, None]
                        H[:T, i, :2, i, :2] += blk
                        H[:T, j, :2, j, :2] += blk
                        H[:T, i, :2, j, :2] -= blk
                        H[:T, j, :2, i, :2] -= blk

        if not derivs:
            return total
        return total, lx.reshape(T + 1, self.n), lu.reshape(T, self.m), lxx, luu, lux

    def cost(self, xs, U):
        return self._terms(xs, U, False)

    def quadratize(self, xs, U):
        return self._terms(xs, U, True)[1:]

    # -- iLQR passes ---------------------------------------------------------

    def backward(self, xs, U, reg):
        """Riccati recursion; returns ``(k, K, dV)`` or ``None`` if Q_uu + reg*I is not PD.

        Controls sitting on their bound with the gradient pointing outward are
        held: their feedforward and feedback gains are zero.
        """
        T = U.shape[0]
        lx, lu, lxx, luu, lux = self.quadratize(xs, U)
        A, Bm = self.linearize(xs, U)
        Vx = lx[T].copy()
        Vxx = lxx[T].copy()
        ks = np.zeros((T, self.m))
        Ks = np.zeros((T, self.m, self.n))
        dV = np.zeros(2)
        eye = np.eye(self.m)
        lo, hi = self.p.u_lo.reshape(-1), self.p.u_hi.reshape(-1)
        for t in range(T - 1, -1, -1):
            At, Bt = A[t], Bm[t]
            Qx = lx[t] + At.T @ Vx
            Qu = lu[t] + Bt.T @ Vx
            VA = Vxx @ At
            Qxx = lxx[t] + At.T @ VA
            Quu = luu[t] + Bt.T @ Vxx @ Bt
            Qux = lux[t] + Bt.T @ VA
            # controls on a bound that the gradient pushes outward stay put
            u = U[t]
            held = ((u >= hi) & (Qu < 0.0)) | ((u <= lo) & (Qu > 0.0))
            H = Quu + reg * eye
            H[held, :] = 0.0
            H[:, held] = 0.0
            H[held, held] = 1.0
            rhs = np.column_stack([Qu, Qux])
            rhs[held] = 0.0
            try:
                L = np.linalg.cholesky(H)
            except np.linalg.LinAlgError:
                return None
            sol = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
            k = -sol[:, 0]
            K = -sol[:, 1:]
            ks[t], Ks[t] = k, K
            dV[0] += k @ Qu
            dV[1] += 0.5 * k @ Quu @ k
            Vx = Qx + K.T @ Quu @ k + K.T @ Qu + Qux.T @ k
            Vxx = Qxx + K.T @ Quu @ K + K.T @ Qux + Qux.T @ K
            Vxx = 0.5 * (Vxx + Vxx.T)
        return ks, Ks, dV

    def forward(self, xs, U, ks, Ks, alpha):
        """Closed-loop rollout of the updated policy; controls are clamped to the input box."""
        p = self.p
        T = U.shape[0]
        lo, hi = p.u_lo.reshape(-1), p.u_hi.reshape(-1)
        xn = np.empty_like(xs)
        un = np.empty_like(U)
        xn[0] = xs[0]
        for t in range(T):
            u = U[t] + alpha * ks[t] + Ks[t] @ (xn[t] - xs[t])
            un[t] = np.minimum(np.maximum(u, lo), hi)
            self._step(xn[t], un[t], xn[t + 1])
        return xn, un
