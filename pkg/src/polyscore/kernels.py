"""Hot inner loops, each in a numba flavour (``*_nb``) and a numpy flavour
(``*_np``). The public names at the bottom pick one according to
:mod:`polyscore._accel`.

Both flavours compute the same arithmetic; they agree to rounding, not
bitwise (numba fuses loops that numpy evaluates as separate ufunc passes).
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Log-posterior frame average
# ---------------------------------------------------------------------------


def _frame_log_mean_np(values, lo, hi, col, eps):
    seg = values[lo:hi, col]
    return float(np.mean(np.log(np.maximum(seg, eps))))


@njit
def _frame_log_mean_nb(values, lo, hi, col, eps):
    acc = 0.0
    for t in range(lo, hi):
        p = values[t, col]
        if p < eps:
            p = eps
        acc += math.log(p)
    return acc / (hi - lo)


# ---------------------------------------------------------------------------
# LSTM pointwise step (gate order i, f, g, o)
# ---------------------------------------------------------------------------


def _sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _lstm_step_fwd_np(z, c_prev, h_prev, mask):
    """Gate nonlinearities plus the masked state update.

    ``z`` is the (B, 4H) pre-activation. Where ``mask`` is 0 the previous
    state is carried through unchanged. Returns
    ``(h, c, gates, tanh_c)`` with ``gates`` the (B, 4H) activations.
    """
    H = c_prev.shape[1]
    gates = np.empty_like(z)
    gates[:, : 2 * H] = _sigmoid(z[:, : 2 * H])
    gates[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
    gates[:, 3 * H :] = _sigmoid(z[:, 3 * H :])
    i = gates[:, :H]
    f = gates[:, H : 2 * H]
    g = gates[:, 2 * H : 3 * H]
    o = gates[:, 3 * H :]
    c_new = f * c_prev + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    m = mask[:, None]
    c = m * c_new + (1.0 - m) * c_prev
    h = m * h_new + (1.0 - m) * h_prev
    return h, c, gates, tanh_c


@njit
def _sig_scalar(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@njit
def _lstm_step_fwd_nb(z, c_prev, h_prev, mask):
    B, H = c_prev.shape
    gates = np.empty_like(z)
    tanh_c = np.empty_like(c_prev)
    h = np.empty_like(h_prev)
    c = np.empty_like(c_prev)
    for b in range(B):
        m = mask[b]
        for j in range(H):
            i = _sig_scalar(z[b, j])
            f = _sig_scalar(z[b, H + j])
            g = math.tanh(z[b, 2 * H + j])
            o = _sig_scalar(z[b, 3 * H + j])
            gates[b, j] = i
            gates[b, H + j] = f
            gates[b, 2 * H + j] = g
            gates[b, 3 * H + j] = o
            cn = f * c_prev[b, j] + i * g
            tc = math.tanh(cn)
            tanh_c[b, j] = tc
            c[b, j] = m * cn + (1.0 - m) * c_prev[b, j]
            h[b, j] = m * (o * tc) + (1.0 - m) * h_prev[b, j]
    return h, c, gates, tanh_c


def _lstm_step_bwd_np(dh, dc, gates, tanh_c, c_prev, mask):
    """Reverse of the pointwise step.

    ``dh``/``dc`` are gradients w.r.t. the masked outputs ``h``/``c``.
    Returns ``(dz, dh_carry, dc_prev)`` where ``dh_carry`` is the part of
    the gradient flowing to ``h_prev`` through the mask only (the recurrent
    matmul term is added by the caller).
    """
    H = c_prev.shape[1]
    m = mask[:, None]
    i = gates[:, :H]
    f = gates[:, H : 2 * H]
    g = gates[:, 2 * H : 3 * H]
    o = gates[:, 3 * H :]
    dh_new = m * dh
    dc_new = m * dc + dh_new * o * (1.0 - tanh_c * tanh_c)
    dz = np.empty_like(gates)
    dz[:, :H] = dc_new * g * i * (1.0 - i)
    dz[:, H : 2 * H] = dc_new * c_prev * f * (1.0 - f)
    dz[:, 2 * H : 3 * H] = dc_new * i * (1.0 - g * g)
    dz[:, 3 * H :] = dh_new * tanh_c * o * (1.0 - o)
    dc_prev = dc_new * f + (1.0 - m) * dc
    dh_carry = (1.0 - m) * dh
    return dz, dh_carry, dc_prev


@njit
def _lstm_step_bwd_nb(dh, dc, gates, tanh_c, c_prev, mask):
    B, H = c_prev.shape
    dz = np.empty_like(gates)
    dh_carry = np.empty_like(dh)
    dc_prev = np.empty_like(dc)
    for b in range(B):
        m = mask[b]
        for j in range(H):
            i = gates[b, j]
            f = gates[b, H + j]
            g = gates[b, 2 * H + j]
            o = gates[b, 3 * H + j]
            tc = tanh_c[b, j]
            dhn = m * dh[b, j]
            dcn = m * dc[b, j] + dhn * o * (1.0 - tc * tc)
            dz[b, j] = dcn * g * i * (1.0 - i)
            dz[b, H + j] = dcn * c_prev[b, j] * f * (1.0 - f)
            dz[b, 2 * H + j] = dcn * i * (1.0 - g * g)
            dz[b, 3 * H + j] = dhn * tc * o * (1.0 - o)
            dc_prev[b, j] = dcn * f + (1.0 - m) * dc[b, j]
            dh_carry[b, j] = (1.0 - m) * dh[b, j]
    return dz, dh_carry, dc_prev


# ---------------------------------------------------------------------------
# Skip-gram with negative sampling, one pass over pre-drawn pairs
# ---------------------------------------------------------------------------


def _sgns_pass_np(W, C, centers, contexts, negatives, lr0, lr1, offset, total):
    """In-place SGD over ``(centers[j], contexts[j])`` pairs.

    ``negatives`` is (n_pairs, K); a negative equal to the positive context
    is skipped. The learning rate decays linearly from ``lr0`` to ``lr1``
    over ``total`` pairs, of which ``offset`` were consumed earlier.
    Returns the summed negative log-likelihood of the pass.
    """
    loss = 0.0
    for j in range(centers.shape[0]):
        lr = lr0 - (lr0 - lr1) * (offset + j) / total
        w = W[centers[j]]
        neu = np.zeros_like(w)
        pos = contexts[j]
        for q, tgt in enumerate((pos, *negatives[j])):
            if q > 0 and tgt == pos:
                continue
            dot = min(max(float(w @ C[tgt]), -30.0), 30.0)
            s = 1.0 / (1.0 + math.exp(-dot))
            if q == 0:
                loss -= math.log(max(s, 1e-12))
            else:
                loss -= math.log(max(1.0 - s, 1e-12))
            gq = ((1.0 if q == 0 else 0.0) - s) * lr
            neu += gq * C[tgt]
            C[tgt] += gq * w
        W[centers[j]] += neu
    return loss


@njit
def _sgns_pass_nb(W, C, centers, contexts, negatives, lr0, lr1, offset, total):
    D = W.shape[1]
    K = negatives.shape[1]
    neu = np.empty(D)
    loss = 0.0
    for j in range(centers.shape[0]):
        lr = lr0 - (lr0 - lr1) * (offset + j) / total
        cw = centers[j]
        for d in range(D):
            neu[d] = 0.0
        for q in range(K + 1):
            if q == 0:
                tgt = contexts[j]
                label = 1.0
            else:
                tgt = negatives[j, q - 1]
                if tgt == contexts[j]:
                    continue
                label = 0.0
            dot = 0.0
            for d in range(D):
                dot += W[cw, d] * C[tgt, d]
            dot = min(max(dot, -30.0), 30.0)
            s = 1.0 / (1.0 + math.exp(-dot))
            if q == 0:
                loss -= math.log(max(s, 1e-12))
            else:
                loss -= math.log(max(1.0 - s, 1e-12))
            gq = (label - s) * lr
            for d in range(D):
                neu[d] += gq * C[tgt, d]
                C[tgt, d] += gq * W[cw, d]
        for d in range(D):
            W[cw, d] += neu[d]
    return loss


if USE_NUMBA:
    frame_log_mean = _frame_log_mean_nb
    lstm_step_fwd = _lstm_step_fwd_nb
    lstm_step_bwd = _lstm_step_bwd_nb
    sgns_pass = _sgns_pass_nb
else:
    frame_log_mean = _frame_log_mean_np
    lstm_step_fwd = _lstm_step_fwd_np
    lstm_step_bwd = _lstm_step_bwd_np
    sgns_pass = _sgns_pass_np
