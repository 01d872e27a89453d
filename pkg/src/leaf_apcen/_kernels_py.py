"""Pure-numpy implementations of the sequential hot loops.

These mirror ``_kernels_c.pyx`` argument for argument. Arrays are float64
and batched: energies are ``(B, T, N)``. The controller weights are passed
positionally in declared order::

    Wf_ih, Wf_hh, bf_ih, bf_hh, Wb_ih, Wb_hh, bb_ih, bb_hh, W1, b1, W2, b2

GRU gate blocks are stacked (reset, update, candidate) along the rows; the
reset gate multiplies the hidden state before the candidate's recurrent
matrix product.
"""

import numpy as np

TINY = 1e-12
# output logits are clamped so the sigmoid stays strictly inside (0, 1)
LOGIT_CLAMP = 30.0


def _sigmoid(x):
    with np.errstate(over="ignore"):  # exp overflow gives the correct limit 0
        return 1.0 / (1.0 + np.exp(-x))


# -- EMA smoother --------------------------------------------------------------


def ema_forward(E, s, M_init):
    """``M[t] = s*E[t] + (1 - s)*M[t-1]`` with ``M[-1] = M_init``."""
    B, T, N = E.shape
    M = np.empty_like(E)
    prev = M_init
    for t in range(T):
        prev = s * E[:, t] + (1.0 - s) * prev
        M[:, t] = prev
    return M


def ema_backward(E, s, M_init, M, gM):
    """Returns ``(gE, gs, gM_init)``; ``gs`` is summed over the batch."""
    B, T, N = E.shape
    gE = np.empty_like(E)
    gs = np.zeros(N)
    G = np.zeros((B, N))
    for t in range(T - 1, -1, -1):
        G = gM[:, t] + (1.0 - s) * G
        gE[:, t] = s * G
        prev = M[:, t - 1] if t > 0 else M_init
        gs += np.sum(G * (E[:, t] - prev), axis=0)
    return gE, gs, (1.0 - s) * G


# -- APCEN controller loop ---------------------------------------------------


def _gru_step(gi, h, W_hh, b_hh, H):
    gh_rz = h @ W_hh[: 2 * H].T + b_hh[: 2 * H]
    r = _sigmoid(gi[:, :H] + gh_rz[:, :H])
    z = _sigmoid(gi[:, H : 2 * H] + gh_rz[:, H:])
    rh = r * h
    n = np.tanh(gi[:, 2 * H :] + rh @ W_hh[2 * H :].T + b_hh[2 * H :])
    return (1.0 - z) * n + z * h, r, z, n


def _frame_forward(u, weights, H, per_channel, record):
    Wf_ih, Wf_hh, bf_ih, bf_hh, Wb_ih, Wb_hh, bb_ih, bb_hh, W1, b1, W2, b2 = weights
    B, N, _ = u.shape
    gi_f = u @ Wf_ih.T + bf_ih
    gi_b = u @ Wb_ih.T + bb_ih
    c = np.empty((B, N, 2 * H))
    tape = {}
    if record:
        for key in ("hf", "rf", "zf", "nf", "hb", "rb", "zb", "nb"):
            tape[key] = np.empty((B, N, H))
    h = np.zeros((B, H))
    for i in range(N):
        if record:
            tape["hf"][:, i] = h
        h, r, z, n = _gru_step(gi_f[:, i], h, Wf_hh, bf_hh, H)
        c[:, i, :H] = h
        if record:
            tape["rf"][:, i], tape["zf"][:, i], tape["nf"][:, i] = r, z, n
    h = np.zeros((B, H))
    for i in range(N - 1, -1, -1):
        if record:
            tape["hb"][:, i] = h
        h, r, z, n = _gru_step(gi_b[:, i], h, Wb_hh, bb_hh, H)
        c[:, i, H:] = h
        if record:
            tape["rb"][:, i], tape["zb"][:, i], tape["nb"][:, i] = r, z, n

    mlp_in = c if per_channel else c.mean(axis=1)
    a1 = mlp_in @ W1.T + b1
    h1 = np.maximum(a1, 0.0)
    sig = _sigmoid(np.clip(h1 @ W2.T + b2, -LOGIT_CLAMP, LOGIT_CLAMP))
    if not per_channel:
        sig = np.broadcast_to(sig[:, None, :], (B, N, 2))
    if record:
        tape.update(u=u, c=c, mlp_in=mlp_in, a1=a1, h1=h1, sig=sig)
    return sig, tape


def apcen_forward(E, weights, s0, eps, gamma_min, gamma_range, per_channel, record=False):
    """Run the controller + SimpPCEN loop. Returns ``(X, alpha, gamma[, tapes])``."""
    E = np.asarray(E, dtype=np.float64)
    B, T, N = E.shape
    H = weights[1].shape[1]
    X = np.zeros((B, T, N))
    alpha = np.empty((B, T, N))
    gamma = np.empty((B, T, N))
    tapes = []
    x_prev = np.zeros((B, N))
    m_prev = E[:, 0].copy()
    for t in range(T):
        e = E[:, t]
        u = np.stack([e, x_prev], axis=-1)
        sig, tape = _frame_forward(u, weights, H, per_channel, record)
        a = sig[..., 0]
        g = gamma_min + gamma_range * sig[..., 1]
        m = s0 * e + (1.0 - s0) * m_prev
        log_e = np.log(np.maximum(e, TINY))
        log_m = np.log(m + eps) if eps > 0 else np.log(np.maximum(m, TINY))
        x = np.where(e > 0, np.exp(g * log_e - a * log_m), 0.0)
        alpha[:, t], gamma[:, t], X[:, t] = a, g, x
        if record:
            tape.update(x=x, log_e=log_e, log_m=log_m, positive=e > 0)
            tapes.append(tape)
        x_prev, m_prev = x, m
    if record:
        return X, alpha, gamma, tapes
    return X, alpha, gamma


def _gru_step_back(gh, x, hprev, r, z, n, W_ih, W_hh, H, acc, prefix):
    """Backprop one GRU step. Accumulates weight grads in ``acc``; returns (gh_prev, gx)."""
    gn = gh * (1.0 - z)
    gz = gh * (hprev - n)
    gh_prev = gh * z
    an = gn * (1.0 - n * n)
    rh = r * hprev
    grh = an @ W_hh[2 * H :]
    gr = grh * hprev
    gh_prev += grh * r
    ar = gr * r * (1.0 - r)
    az = gz * z * (1.0 - z)
    arz = np.concatenate([ar, az], axis=-1)
    gh_prev += arz @ W_hh[: 2 * H]
    a_all = np.concatenate([arz, an], axis=-1)
    gx = a_all @ W_ih
    acc[prefix + "W_ih"] += a_all.T @ x
    acc[prefix + "b_ih"] += a_all.sum(axis=0)
    acc[prefix + "W_hh"][: 2 * H] += arz.T @ hprev
    acc[prefix + "W_hh"][2 * H :] += an.T @ rh
    acc[prefix + "b_hh"] += a_all.sum(axis=0)
    return gh_prev, gx


def apcen_backward(E, weights, s0, eps, gamma_min, gamma_range, per_channel, gX, window=0):
    """Reverse-mode gradients of ``sum(gX * X)`` w.r.t. the controller weights.

    The forward pass is recomputed with a tape. ``window`` > 0 cuts the
    cross-frame path (through the buffered previous output) at every frame
    index divisible by ``window``; 0 means full backpropagation through time.
    Returns the 12 weight gradients in declared order.
    """
    E = np.asarray(E, dtype=np.float64)
    B, T, N = E.shape
    Wf_ih, Wf_hh, bf_ih, bf_hh, Wb_ih, Wb_hh, bb_ih, bb_hh, W1, b1, W2, b2 = weights
    H = Wf_hh.shape[1]
    _, _, _, tapes = apcen_forward(
        E, weights, s0, eps, gamma_min, gamma_range, per_channel, record=True
    )
    names = ["f.W_ih", "f.W_hh", "f.b_ih", "f.b_hh", "b.W_ih", "b.W_hh", "b.b_ih", "b.b_hh"]
    acc = {k: np.zeros_like(w) for k, w in zip(names, weights[:8])}
    gW1, gb1 = np.zeros_like(W1), np.zeros_like(b1)
    gW2, gb2 = np.zeros_like(W2), np.zeros_like(b2)

    carry = np.zeros((B, N))
    for t in range(T - 1, -1, -1):
        tp = tapes[t]
        gx_t = gX[:, t] + carry
        gx_t = np.where(tp["positive"], gx_t * tp["x"], 0.0)
        g_gamma = gx_t * tp["log_e"]
        g_alpha = -gx_t * tp["log_m"]
        sig = tp["sig"]
        go = np.stack(
            [
                g_alpha * sig[..., 0] * (1.0 - sig[..., 0]),
                g_gamma * gamma_range * sig[..., 1] * (1.0 - sig[..., 1]),
            ],
            axis=-1,
        )
        if per_channel:
            go_flat = go.reshape(B * N, 2)
            h1 = tp["h1"].reshape(B * N, -1)
            a1 = tp["a1"].reshape(B * N, -1)
            mlp_in = tp["mlp_in"].reshape(B * N, -1)
        else:
            go_flat = go.sum(axis=1)
            h1, a1, mlp_in = tp["h1"], tp["a1"], tp["mlp_in"]
        gW2 += go_flat.T @ h1
        gb2 += go_flat.sum(axis=0)
        ga1 = (go_flat @ W2) * (a1 > 0)
        gW1 += ga1.T @ mlp_in
        gb1 += ga1.sum(axis=0)
        g_in = ga1 @ W1
        if per_channel:
            gc = g_in.reshape(B, N, 2 * H)
        else:
            gc = np.broadcast_to(g_in[:, None, :] / N, (B, N, 2 * H))

        u = tp["u"]
        gu = np.zeros((B, N, 2))
        gh = np.zeros((B, H))
        for i in range(N - 1, -1, -1):
            gh = gh + gc[:, i, :H]
            gh, gxi = _gru_step_back(
                gh, u[:, i], tp["hf"][:, i], tp["rf"][:, i], tp["zf"][:, i], tp["nf"][:, i],
                Wf_ih, Wf_hh, H, acc, "f.",
            )
            gu[:, i] += gxi
        gh = np.zeros((B, H))
        for i in range(N):
            gh = gh + gc[:, i, H:]
            gh, gxi = _gru_step_back(
                gh, u[:, i], tp["hb"][:, i], tp["rb"][:, i], tp["zb"][:, i], tp["nb"][:, i],
                Wb_ih, Wb_hh, H, acc, "b.",
            )
            gu[:, i] += gxi

        if window > 0 and t % window == 0:
            carry = np.zeros((B, N))
        else:
            carry = gu[..., 1]

    return tuple(acc[k] for k in names) + (gW1, gb1, gW2, gb2)
