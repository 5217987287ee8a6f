"""Hot numeric kernels, each with a numba loop version and a numpy version.

The public names at the bottom of the module point at whichever backend
:mod:`planpace._jit` selected. Both variants are importable under their
``*_nb`` / ``*_np`` names so tests and the benchmark can compare them.
"""

from __future__ import annotations

import numpy as np

from ._jit import JIT_ENABLED, njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_ARM_MUL = np.uint64(0xD1B54A32D192ED03)
_CH_MUL = np.uint64(0x8CB92BA72F3D8DD7)
_SEED_XOR = np.uint64(0x5851F42D4C957F2D)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------- projection


def project_l1_ball_np(point, radius):
    z = np.maximum(np.asarray(point, dtype=np.float64), 0.0)
    if z.sum() <= radius:
        return z
    u = np.sort(z)[::-1]
    css = np.cumsum(u)
    j = np.arange(1, u.size + 1)
    # stable descending sort; equal values need no special casing
    k = np.nonzero(u - (css - radius) / j > 0)[0][-1]
    theta = (css[k] - radius) / (k + 1)
    return np.maximum(z - theta, 0.0)


@njit
def project_l1_ball_nb(point, radius):
    n = point.shape[0]
    z = np.empty(n)
    total = 0.0
    for i in range(n):
        v = point[i]
        if v < 0.0:
            v = 0.0
        z[i] = v
        total += v
    if total <= radius:
        return z
    u = np.sort(z)[::-1]
    css = 0.0
    theta = 0.0
    for i in range(n):
        css += u[i]
        cand = (css - radius) / (i + 1)
        if u[i] - cand > 0.0:
            theta = cand
    for i in range(n):
        v = z[i] - theta
        z[i] = v if v > 0.0 else 0.0
    return z


# ------------------------------------------------------------------ softmax


def softmax_np(logw):
    w = np.exp(logw - logw.max())
    return w / w.sum()


@njit
def softmax_nb(logw):
    n = logw.shape[0]
    mx = logw[0]
    for i in range(1, n):
        if logw[i] > mx:
            mx = logw[i]
    out = np.empty(n)
    s = 0.0
    for i in range(n):
        out[i] = np.exp(logw[i] - mx)
        s += out[i]
    for i in range(n):
        out[i] /= s
    return out


# ----------------------------------------------------------------- sampling


def sample_index_np(probs, u):
    cs = np.cumsum(probs)
    k = int(np.searchsorted(cs, u * cs[-1], side="right"))
    if k >= probs.size:
        k = int(np.nonzero(probs > 0)[0][-1])
    return k


@njit
def sample_index_nb(probs, u):
    n = probs.shape[0]
    total = 0.0
    for i in range(n):
        total += probs[i]
    target = u * total
    acc = 0.0
    for i in range(n):
        acc += probs[i]
        if acc > target:
            return i
    for i in range(n - 1, -1, -1):
        if probs[i] > 0.0:
            return i
    return n - 1


# ------------------------------------------------------------ best response


def best_response_np(f, c, lam):
    return int(np.argmax(f - c @ lam))


@njit
def best_response_nb(f, c, lam):
    K, m = c.shape
    best = 0
    best_score = -np.inf
    for k in range(K):
        s = f[k]
        for i in range(m):
            s -= lam[i] * c[k, i]
        if s > best_score:
            best_score = s
            best = k
    return best


# ------------------------------------------------------ counter-based uniforms


def _mix_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def uniform_block_np(seed, T, K, C, t0=0):
    """Uniforms in [0, 1) for rounds t0+1..t0+T, arms 0..K-1, channels 0..C-1."""
    with np.errstate(over="ignore"):
        s = _mix_np(np.array([seed], dtype=np.uint64) ^ _SEED_XOR)
        t = np.arange(t0 + 1, t0 + T + 1, dtype=np.uint64)[:, None, None]
        k = np.arange(1, K + 1, dtype=np.uint64)[None, :, None]
        ch = np.arange(1, C + 1, dtype=np.uint64)[None, None, :]
        h = _mix_np(s + t * _GOLDEN)
        h = _mix_np(h + k * _ARM_MUL)
        h = _mix_np(h + ch * _CH_MUL)
    return (h >> _S11).astype(np.float64) * _INV53


@njit
def _mix_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit
def uniform_block_nb(seed, T, K, C, t0=0):
    out = np.empty((T, K, C))
    s = _mix_nb(np.uint64(seed) ^ _SEED_XOR)
    for t in range(T):
        ht = _mix_nb(s + np.uint64(t0 + t + 1) * _GOLDEN)
        for k in range(K):
            hk = _mix_nb(ht + np.uint64(k + 1) * _ARM_MUL)
            for c in range(C):
                h = _mix_nb(hk + np.uint64(c + 1) * _CH_MUL)
                out[t, k, c] = np.float64(h >> _S11) * _INV53
    return out


# -------------------------------------------------------------------- pivot


def pivot_np(tab, r, c):
    prow = tab[r] / tab[r, c]
    col = tab[:, c].copy()
    tab -= np.outer(col, prow)
    tab[r] = prow


@njit
def pivot_nb(tab, r, c):
    rows, cols = tab.shape
    p = tab[r, c]
    for j in range(cols):
        tab[r, j] /= p
    for i in range(rows):
        if i == r:
            continue
        f = tab[i, c]
        if f != 0.0:
            for j in range(cols):
                tab[i, j] -= f * tab[r, j]


# ---------------------------------------------------------- grid brute force


def grid_max_np(A, b, E, e, c, h, upper, eq_tol):
    n = c.shape[0]
    axis = np.arange(int(round(upper / h)) + 1) * h
    best = -np.inf
    best_x = np.zeros(n)
    if n == 1:
        chunks = [axis[:, None]]
    else:
        rest = np.stack(np.meshgrid(*([axis] * (n - 1)), indexing="ij"), -1).reshape(-1, n - 1)
        chunks = (np.column_stack([np.full(rest.shape[0], x0), rest]) for x0 in axis)
    for pts in chunks:
        ok = np.ones(pts.shape[0], dtype=bool)
        if A.shape[0]:
            ok &= np.all(pts @ A.T <= b + 1e-12, axis=1)
        if E.shape[0]:
            ok &= np.all(np.abs(pts @ E.T - e) <= eq_tol, axis=1)
        if not ok.any():
            continue
        vals = np.where(ok, pts @ c, -np.inf)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best = vals[i]
            best_x = pts[i].copy()
    return best, best_x


@njit
def grid_max_nb(A, b, E, e, c, h, upper, eq_tol):
    n = c.shape[0]
    N = int(round(upper / h)) + 1
    total = N**n
    p = A.shape[0]
    q = E.shape[0]
    best = -np.inf
    best_x = np.zeros(n)
    x = np.zeros(n)
    for idx in range(total):
        rem = idx
        for j in range(n - 1, -1, -1):
            x[j] = (rem % N) * h
            rem //= N
        ok = True
        for r in range(p):
            s = 0.0
            for j in range(n):
                s += A[r, j] * x[j]
            if s > b[r] + 1e-12:
                ok = False
                break
        if ok:
            for r in range(q):
                s = 0.0
                for j in range(n):
                    s += E[r, j] * x[j]
                if abs(s - e[r]) > eq_tol:
                    ok = False
                    break
        if ok:
            v = 0.0
            for j in range(n):
                v += c[j] * x[j]
            if v > best:
                best = v
                best_x[:] = x
    return best, best_x


# ------------------------------------------------------- whole ORA round loop


@njit
def ora_euclid_loop_nb(F, C, plan, mask, budget, radius, G, fixed_eta):
    """Dual learner with projected gradient ascent, all T rounds in one call.

    Mirrors the Python loop in :func:`planpace.algorithms.run_ora` step for
    step. ``fixed_eta <= 0`` selects ``radius / (G sqrt(t))``.
    """
    T, K = F.shape
    m = C.shape[2]
    arms = np.zeros(T, dtype=np.int64)
    best = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T)
    costs = np.zeros((T, m))
    remaining = np.zeros((T, m))
    lambdas = np.zeros((T, m))
    forced = np.zeros(T, dtype=np.bool_)
    lam = np.zeros(m)
    rem = np.full(m, budget)
    step = np.empty(m)
    upd = 0
    for k in range(T):
        for i in range(m):
            lambdas[k, i] = lam[i]
        if mask[k]:
            forced[k] = True
            for i in range(m):
                remaining[k, i] = rem[i]
            continue
        arm = best_response_nb(F[k], C[k], lam)
        best[k] = arm
        low = False
        for i in range(m):
            if rem[i] < 1.0:
                low = True
        if low:
            forced[k] = True
        else:
            arms[k] = arm
            rewards[k] = F[k, arm]
            for i in range(m):
                costs[k, i] = C[k, arm, i]
                rem[i] = rem[i] - C[k, arm, i]
        for i in range(m):
            remaining[k, i] = rem[i]
        upd += 1
        eta = fixed_eta if fixed_eta > 0.0 else radius / (G * np.sqrt(upd))
        for i in range(m):
            step[i] = lam[i] + eta * (C[k, arm, i] - plan[i, k])
        lam = project_l1_ball_nb(step, radius)
    return arms, best, rewards, costs, remaining, lambdas, forced


def uniform_block(seed, T, K, C, t0=0):
    """Counter-based uniforms; ``seed`` may be any integer in [0, 2**64)."""
    impl = uniform_block_nb if JIT_ENABLED else uniform_block_np
    return impl(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), int(T), int(K), int(C), int(t0))


if JIT_ENABLED:
    project_l1_ball = project_l1_ball_nb
    softmax = softmax_nb
    sample_index = sample_index_nb
    best_response = best_response_nb
    pivot = pivot_nb
    grid_max = grid_max_nb
else:
    project_l1_ball = project_l1_ball_np
    softmax = softmax_np
    sample_index = sample_index_np
    best_response = best_response_np
    pivot = pivot_np
    grid_max = grid_max_np
