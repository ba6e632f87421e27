"""Hot numeric kernels, numba-compiled by default (see _accel).

All functions are array-in/array-out with no Python objects so the same code
runs under either backend.  Actions are described by parallel arrays:

    feats      (m, d)  action feature vectors
    kind       (m,)    channel code: 0 = gaussian, 1 = bernoulli-logistic
    zeta       (m,)    dispersion scale of the action's channel
    kappa_den  (m,)    2 * (1 + S * rho * M) * zeta, the curvature discount
                       applied to information-matrix weights

Observation history enters only through per-action sufficient statistics
(counts and observation sums): records sharing an action share a feature
vector, so every loss/information quantity aggregates exactly by action.
"""

import math

import numpy as np

from ._accel import njit, prange

SING_EIG_FLOOR = 1e-10   # below this smallest eigenvalue a matrix is singular
RIDGE_EIG_FLOOR = 1e-8   # conditioning ridge applies in (SING, RIDGE]
RIDGE = 1e-12


@njit(cache=True)
def glm_b(kind: int, eta: float) -> float:
    if kind == 0:
        return 0.5 * eta * eta
    if eta > 0.0:
        return eta + math.log1p(math.exp(-eta))
    return math.log1p(math.exp(eta))


@njit(cache=True)
def glm_mu(kind: int, eta: float) -> float:
    if kind == 0:
        return eta
    if eta >= 0.0:
        return 1.0 / (1.0 + math.exp(-eta))
    t = math.exp(eta)
    return t / (1.0 + t)


@njit(cache=True)
def glm_mu_prime(kind: int, eta: float) -> float:
    if kind == 0:
        return 1.0
    s = glm_mu(1, eta)
    return s * (1.0 - s)


@njit(cache=True)
def project_ball(theta, S):
    norm = 0.0
    for r in range(theta.shape[0]):
        norm += theta[r] * theta[r]
    norm = math.sqrt(norm)
    out = theta.copy()
    if norm > S:
        scale = S / norm
        for r in range(out.shape[0]):
            out[r] *= scale
    return out


@njit(cache=True)
def loss_value(feats, kind, zeta, counts, z_sum, theta):
    m, d = feats.shape
    total = 0.0
    for a in range(m):
        if counts[a] == 0.0 and z_sum[a] == 0.0:
            continue
        eta = 0.0
        for r in range(d):
            eta += feats[a, r] * theta[r]
        total += (counts[a] * glm_b(kind[a], eta) - z_sum[a] * eta) / zeta[a]
    return total


@njit(cache=True)
def loss_gradient(feats, kind, zeta, counts, z_sum, theta):
    m, d = feats.shape
    g = np.zeros(d)
    for a in range(m):
        if counts[a] == 0.0 and z_sum[a] == 0.0:
            continue
        eta = 0.0
        for r in range(d):
            eta += feats[a, r] * theta[r]
        coef = (counts[a] * glm_mu(kind[a], eta) - z_sum[a]) / zeta[a]
        for r in range(d):
            g[r] += coef * feats[a, r]
    return g


@njit(cache=True)
def weighted_info(feats, kind, denom, weights, theta):
    """sum_a weights_a * mu'(x_a' theta) / denom_a * x_a x_a'.

    With denom = kappa_den this is the discounted information matrix; with
    denom = zeta it is the loss Hessian.
    """
    m, d = feats.shape
    A = np.zeros((d, d))
    for a in range(m):
        w = weights[a]
        if w == 0.0:
            continue
        eta = 0.0
        for r in range(d):
            eta += feats[a, r] * theta[r]
        c = w * glm_mu_prime(kind[a], eta) / denom[a]
        for r in range(d):
            fr = c * feats[a, r]
            for s in range(r, d):
                A[r, s] += fr * feats[a, s]
    for r in range(d):
        for s in range(r + 1, d):
            A[s, r] = A[r, s]
    return A


@njit(cache=True)
def mle_solve(feats, kind, zeta, counts, z_sum, S, theta0, tol, max_iter):
    """Projected gradient descent on the ball, spectral (BB) initial step with
    Armijo halving.  Returns (theta, residual, iterations) where residual is
    the projected-gradient optimality measure || theta - proj(theta - grad) ||
    at unit reference step.
    """
    theta = project_ball(theta0.astype(np.float64), S)
    d = theta.shape[0]
    f = loss_value(feats, kind, zeta, counts, z_sum, theta)
    g = loss_gradient(feats, kind, zeta, counts, z_sum, theta)
    alpha = 1.0
    iters = 0
    for it in range(max_iter):
        iters = it
        step_ref = project_ball(theta - g, S)
        res = 0.0
        for r in range(d):
            diff = theta[r] - step_ref[r]
            res += diff * diff
        res = math.sqrt(res)
        if res <= tol:
            return theta, res, iters
        step = alpha
        accepted = False
        cand = theta
        f_cand = f
        for _ in range(60):
            cand = project_ball(theta - step * g, S)
            f_cand = loss_value(feats, kind, zeta, counts, z_sum, cand)
            slope = 0.0
            for r in range(d):
                slope += g[r] * (cand[r] - theta[r])
            if f_cand <= f + 1e-4 * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        g_new = loss_gradient(feats, kind, zeta, counts, z_sum, cand)
        ss = 0.0
        sy = 0.0
        for r in range(d):
            s_r = cand[r] - theta[r]
            y_r = g_new[r] - g[r]
            ss += s_r * s_r
            sy += s_r * y_r
        theta = cand
        f = f_cand
        g = g_new
        if sy > 1e-300:
            alpha = ss / sy
            if alpha < 1e-10:
                alpha = 1e-10
            elif alpha > 1e10:
                alpha = 1e10
        else:
            alpha = 1.0
    step_ref = project_ball(theta - g, S)
    res = 0.0
    for r in range(d):
        diff = theta[r] - step_ref[r]
        res += diff * diff
    return theta, math.sqrt(res), iters


@njit(cache=True)
def inv_quad_forms(A, dirs):
    """(identified, values) with values_j = dirs_j' A^{-1} dirs_j.

    Singular A (smallest eigenvalue <= SING_EIG_FLOOR) gives identified =
    False; eigenvalues in the conditioning band get a tiny ridge.
    """
    d = A.shape[0]
    evals = np.linalg.eigh(A)[0]
    n = dirs.shape[0]
    vals = np.zeros(n)
    if evals[0] <= SING_EIG_FLOOR:
        return False, vals
    B = A.copy()
    if evals[0] <= RIDGE_EIG_FLOOR:
        for r in range(d):
            B[r, r] += RIDGE
    sol = np.linalg.solve(B, dirs.T.copy())
    for j in range(n):
        q = 0.0
        for r in range(d):
            q += dirs[j, r] * sol[r, j]
        vals[j] = max(q, 0.0)
    return True, vals


@njit(cache=True)
def certificate_values(A, theta, dirs, beta):
    """(identified, values) with values_j = dirs_j' theta - sqrt(beta * q_j),
    the exact minimum of dirs_j' x over the ellipsoid of radius sqrt(beta)."""
    ok, quads = inv_quad_forms(A, dirs)
    n = dirs.shape[0]
    vals = np.zeros(n)
    if not ok:
        return False, vals
    for j in range(n):
        dot = 0.0
        for r in range(theta.shape[0]):
            dot += dirs[j, r] * theta[r]
        vals[j] = dot - math.sqrt(beta * quads[j])
    return True, vals


@njit(cache=True)
def fw_minimax(feats, coefs, dirs, w0, k0, max_iter, rel_tol):
    """Frank-Wolfe for min_w max_j dirs_j' A(w)^{-1} dirs_j over the simplex,
    A(w) = sum_a w_a coefs_a x_a x_a'.

    Each step evaluates the active (worst) direction g, scores every action by
    coefs_a * (g' A^{-1} x_a)^2 and moves toward the best-scoring vertex with
    step 2 / (k0 + k + 2).  The returned iterate is the best one seen.  The
    reported gap max_score - phi upper-bounds phi(w) - phi* (FW linearization
    of the active component), so gap <= rel_tol * phi certifies convergence.

    Returns (w_best, phi_best, gap_at_stop, iterations, converged).
    """
    m, d = feats.shape
    nd = dirs.shape[0]
    w = w0.copy()
    w_best = w0.copy()
    phi_best = np.inf
    gap = np.inf
    converged = False
    iters = 0
    for k in range(max_iter):
        iters = k + 1
        A = np.zeros((d, d))
        for a in range(m):
            c = w[a] * coefs[a]
            if c == 0.0:
                continue
            for r in range(d):
                fr = c * feats[a, r]
                for s in range(r, d):
                    A[r, s] += fr * feats[a, s]
        for r in range(d):
            for s in range(r + 1, d):
                A[s, r] = A[r, s]
        ok, quads = inv_quad_forms(A, dirs)
        if not ok:
            break
        phi = -np.inf
        for j in range(nd):
            if quads[j] > phi:
                phi = quads[j]
        jstar = 0
        for j in range(nd):
            if quads[j] >= phi * (1.0 - 1e-10):
                jstar = j
                break
        if phi < phi_best:
            phi_best = phi
            for a in range(m):
                w_best[a] = w[a]
        evals = np.linalg.eigh(A)[0]
        B = A
        if evals[0] <= RIDGE_EIG_FLOOR:
            B = A.copy()
            for r in range(d):
                B[r, r] += RIDGE
        u = np.linalg.solve(B, dirs[jstar].copy())
        best_score = -1.0
        astar = 0
        for a in range(m):
            t = 0.0
            for r in range(d):
                t += feats[a, r] * u[r]
            sc = coefs[a] * t * t
            if sc > best_score:
                best_score = sc
                astar = a
        gap = best_score - phi
        if gap <= rel_tol * phi:
            converged = True
            break
        gamma = 2.0 / (k0 + k + 2.0)
        total = 0.0
        for a in range(m):
            w[a] *= 1.0 - gamma
            if a == astar:
                w[a] += gamma
            total += w[a]
        for a in range(m):
            w[a] /= total
    return w_best, phi_best, gap, iters, converged


@njit(cache=True)
def tracking_deviation(target_mass_per_round):
    """Simulate the pure tracking rule (no forced exploration) against a
    per-round target sequence and return max_t max_a |N_a(t) - W_a(t)|."""
    T, m = target_mass_per_round.shape
    N = np.zeros(m)
    W = np.zeros(m)
    dev = 0.0
    for t in range(T):
        pick = 0
        best = N[0] - W[0]
        for a in range(1, m):
            v = N[a] - W[a]
            if v < best:
                best = v
                pick = a
        for a in range(m):
            W[a] += target_mass_per_round[t, a]
        N[pick] += 1.0
        for a in range(m):
            v = abs(N[a] - W[a])
            if v > dev:
                dev = v
    return dev


@njit(cache=True, parallel=True)
def grid_min_phi_d2(outers, coefs, dirs, G):
    """Minimum of max_j dirs_j' A(w)^{-1} dirs_j over the mesh-1/G simplex
    grid, d = 2.  outers rows are (xx, xy, yy) per action.  Evaluates integer
    compositions and rescales by G at the end.  Singular points are skipped.
    """
    m = outers.shape[0]
    nd = dirs.shape[0]
    bests = np.full(G + 1, np.inf)
    for c0 in prange(G + 1):
        mm = m - 1
        c = np.zeros(mm, dtype=np.int64)
        rem = G - c0
        c[0] = rem
        local = np.inf
        while True:
            a00 = c0 * coefs[0] * outers[0, 0]
            a01 = c0 * coefs[0] * outers[0, 1]
            a11 = c0 * coefs[0] * outers[0, 2]
            for j in range(mm):
                wj = c[j] * coefs[j + 1]
                a00 += wj * outers[j + 1, 0]
                a01 += wj * outers[j + 1, 1]
                a11 += wj * outers[j + 1, 2]
            det = a00 * a11 - a01 * a01
            tr = a00 + a11
            if det > 1e-13 * tr * tr:
                phi = 0.0
                for r in range(nd):
                    g0 = dirs[r, 0]
                    g1 = dirs[r, 1]
                    v = (a11 * g0 * g0 - 2.0 * a01 * g0 * g1 + a00 * g1 * g1) / det
                    if v > phi:
                        phi = v
                if phi < local:
                    local = phi
            if mm == 0 or c[mm - 1] == rem:
                break
            k = mm - 2
            while c[k] == 0:
                k -= 1
            c[k] -= 1
            s = 1
            for q in range(k + 1, mm):
                s += c[q]
                c[q] = 0
            c[k + 1] = s
        bests[c0] = local
    return bests.min() * G


@njit(cache=True, parallel=True)
def grid_min_phi_d3(outers, coefs, dirs, G):
    """Same as grid_min_phi_d2 for d = 3; outers rows are the upper triangle
    (a00, a01, a02, a11, a12, a22)."""
    m = outers.shape[0]
    nd = dirs.shape[0]
    bests = np.full(G + 1, np.inf)
    for c0 in prange(G + 1):
        mm = m - 1
        c = np.zeros(mm, dtype=np.int64)
        rem = G - c0
        c[0] = rem
        local = np.inf
        while True:
            a00 = c0 * coefs[0] * outers[0, 0]
            a01 = c0 * coefs[0] * outers[0, 1]
            a02 = c0 * coefs[0] * outers[0, 2]
            a11 = c0 * coefs[0] * outers[0, 3]
            a12 = c0 * coefs[0] * outers[0, 4]
            a22 = c0 * coefs[0] * outers[0, 5]
            for j in range(mm):
                wj = c[j] * coefs[j + 1]
                a00 += wj * outers[j + 1, 0]
                a01 += wj * outers[j + 1, 1]
                a02 += wj * outers[j + 1, 2]
                a11 += wj * outers[j + 1, 3]
                a12 += wj * outers[j + 1, 4]
                a22 += wj * outers[j + 1, 5]
            m00 = a11 * a22 - a12 * a12
            m01 = a01 * a22 - a02 * a12
            m02 = a01 * a12 - a02 * a11
            det = a00 * m00 - a01 * m01 + a02 * m02
            tr = a00 + a11 + a22
            if det > 1e-13 * tr * tr * tr:
                m11 = a00 * a22 - a02 * a02
                m12 = a00 * a12 - a01 * a02
                m22 = a00 * a11 - a01 * a01
                phi = 0.0
                for r in range(nd):
                    g0 = dirs[r, 0]
                    g1 = dirs[r, 1]
                    g2 = dirs[r, 2]
                    v = (
                        g0 * (m00 * g0 - m01 * g1 + m02 * g2)
                        + g1 * (-m01 * g0 + m11 * g1 - m12 * g2)
                        + g2 * (m02 * g0 - m12 * g1 + m22 * g2)
                    ) / det
                    if v > phi:
                        phi = v
                if phi < local:
                    local = phi
            if mm == 0 or c[mm - 1] == rem:
                break
            k = mm - 2
            while c[k] == 0:
                k -= 1
            c[k] -= 1
            s = 1
            for q in range(k + 1, mm):
                s += c[q]
                c[q] = 0
            c[k + 1] = s
        bests[c0] = local
    return bests.min() * G
