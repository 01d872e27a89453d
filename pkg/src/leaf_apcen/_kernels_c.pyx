# cython: language_level=3
"""Compiled hot loops; same signatures and semantics as ``_kernels_py``.

The controller loop advances small chunks of clips in lock step so that
the GRU and MLP products become BLAS matrix-matrix calls.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, tanh
from libc.string cimport memset, memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef double TINY = 1e-12
cdef double LOGIT_CLAMP = 30.0


cdef inline double sigm(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def ema_forward(const double[:, :, ::1] E, s, const double[:, ::1] M_init):
    cdef Py_ssize_t B = E.shape[0], T = E.shape[1], N = E.shape[2]
    cdef double[::1] sv = np.array(np.broadcast_to(s, (N,)), dtype=np.float64)
    out = np.empty((B, T, N))
    cdef double[:, :, ::1] M = out
    cdef Py_ssize_t b, t, i
    cdef double prev
    with nogil:
        for b in range(B):
            for i in range(N):
                prev = M_init[b, i]
                for t in range(T):
                    prev = sv[i] * E[b, t, i] + (1.0 - sv[i]) * prev
                    M[b, t, i] = prev
    return out


def ema_backward(const double[:, :, ::1] E, s, const double[:, ::1] M_init,
                 const double[:, :, ::1] M, const double[:, :, ::1] gM):
    cdef Py_ssize_t B = E.shape[0], T = E.shape[1], N = E.shape[2]
    cdef double[::1] sv = np.array(np.broadcast_to(s, (N,)), dtype=np.float64)
    gE_arr = np.empty((B, T, N))
    gs_arr = np.zeros(N)
    gMi_arr = np.empty((B, N))
    cdef double[:, :, ::1] gE = gE_arr
    cdef double[::1] gs = gs_arr
    cdef double[:, ::1] gMi = gMi_arr
    cdef Py_ssize_t b, t, i
    cdef double G, prev
    with nogil:
        for b in range(B):
            for i in range(N):
                G = 0.0
                for t in range(T - 1, -1, -1):
                    G = gM[b, t, i] + (1.0 - sv[i]) * G
                    gE[b, t, i] = sv[i] * G
                    prev = M[b, t - 1, i] if t > 0 else M_init[b, i]
                    gs[i] += G * (E[b, t, i] - prev)
                gMi[b, i] = (1.0 - sv[i]) * G
    return gE_arr, gs_arr, gMi_arr


# -- APCEN loop ----------------------------------------------------------------
#
# Clips are advanced in chunks of CHUNK so that every GRU step is a small
# matrix-matrix product. Buffers are row-major with the chunk index b just
# outside the feature axis:
#   c     [t][i][b][2H]    per-channel GRU outputs (forward half, backward half)
#   r/z/n [t][d][i][b][H]  gate activations, d = 0 forward, 1 backward direction
#   a1    [t][i][b][MH]    MLP pre-activations (per-frame mode: [t][b][MH])
#   sig   [t][i][b][2]     sigmoid outputs     (per-frame mode: [t][b][2])

cdef enum:
    CHUNK = 8  # keep the literal step of the chunk loops in sync


cdef inline void mm(int M, int Nn, int K, double alpha, const double* A, int lda, bint ta,
                    const double* B, int ldb, bint tb, double beta, double* C, int ldc) noexcept nogil:
    """Row-major C = alpha * op(A) @ op(B) + beta * C."""
    cdef char ca = b'T' if ta else b'N'
    cdef char cb = b'T' if tb else b'N'
    dgemm(&cb, &ca, &Nn, &M, &K, &alpha, <double*> B, &ldb, <double*> A, &lda, &beta, C, &ldc)


cdef class _Net:
    cdef public object keep
    cdef int H, MH, D, per_channel
    cdef const double* Wih[2]
    cdef const double* Whh[2]
    cdef const double* WihT[2]
    cdef const double* WhhT[2]
    cdef const double* bsum[2]
    cdef const double* W1
    cdef const double* b1
    cdef const double* W2
    cdef const double* b2


cdef const double* _ptr(object arr):
    cdef const double[::1] view = arr.reshape(-1)
    return &view[0]


cdef _Net _make_net(weights, bint per_channel):
    if len(weights) != 12:
        raise ValueError("expected 12 controller weight arrays")
    ws = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
    if ws[0].shape[1] != 2:
        raise ValueError("compiled kernel supports the channel-axis controller (input dim 2) only")
    cdef _Net net = _Net()
    net.H = ws[1].shape[1]
    net.MH = ws[8].shape[0]
    net.D = 2 * net.H
    net.per_channel = per_channel
    keep = list(ws)
    cdef int d
    for d in range(2):
        W_ih = ws[4 * d]
        W_hh = ws[4 * d + 1]
        bsum = ws[4 * d + 2] + ws[4 * d + 3]
        WihT = np.ascontiguousarray(W_ih.T)
        WhhT = np.ascontiguousarray(W_hh.T)
        # reset is applied to h before the candidate product, so b_hh folds in everywhere
        keep += [WihT, WhhT, bsum]
        net.Wih[d] = _ptr(W_ih)
        net.Whh[d] = _ptr(W_hh)
        net.WihT[d] = _ptr(WihT)
        net.WhhT[d] = _ptr(WhhT)
        net.bsum[d] = _ptr(bsum)
    net.W1 = _ptr(ws[8]); net.b1 = _ptr(ws[9]); net.W2 = _ptr(ws[10]); net.b2 = _ptr(ws[11])
    net.keep = keep
    return net


cdef void _gru_fwd(_Net net, int d, int nb, const double* x0, const double* x1,
                   const double* hp, int ldh, double* hout, int ldo,
                   double* r, double* z, double* n, double* tmp, double* rh) noexcept nogil:
    """One GRU step for ``nb`` clips; ``hp`` NULL means a zero previous state."""
    cdef int H = net.H, H2 = 2 * H, H3 = 3 * H
    cdef int b, j
    cdef const double* WihT = net.WihT[d]
    cdef const double* bsum = net.bsum[d]
    cdef double* row
    cdef double h
    for b in range(nb):
        row = tmp + b * H3
        for j in range(H3):
            row[j] = bsum[j] + WihT[j] * x0[b] + WihT[H3 + j] * x1[b]
    if hp != NULL:
        mm(nb, H2, H, 1.0, hp, ldh, False, net.WhhT[d], H3, False, 1.0, tmp, H3)
    for b in range(nb):
        row = tmp + b * H3
        for j in range(H2):
            row[j] = 1.0 / (1.0 + exp(-row[j]))
        for j in range(H):
            r[b * H + j] = row[j]
            z[b * H + j] = row[H + j]
            rh[b * H + j] = row[j] * (hp[b * ldh + j] if hp != NULL else 0.0)
    if hp != NULL:
        mm(nb, H, H, 1.0, rh, H, False, net.WhhT[d] + H2, H3, False, 1.0, tmp + H2, H3)
    for b in range(nb):
        row = tmp + b * H3 + H2
        for j in range(H):
            row[j] = tanh(row[j])
        for j in range(H):
            h = hp[b * ldh + j] if hp != NULL else 0.0
            n[b * H + j] = row[j]
            hout[b * ldo + j] = (1.0 - z[b * H + j]) * row[j] + z[b * H + j] * h


cdef void _gru_bwd(_Net net, int d, int nb, double* gh, const double* x0, const double* x1,
                   const double* hp, int ldh, const double* r, const double* z, const double* n,
                   double* gWih, double* gWhh, double* gbih, double* gbhh,
                   double* a, double* ghp, double* grh, double* rh, double* gx1) noexcept nogil:
    """Backprop one GRU step. ``gh`` (nb, H) is replaced by the gradient w.r.t. the
    previous state; ``gx1`` receives the gradient w.r.t. the second input feature."""
    cdef int H = net.H, H2 = 2 * H, H3 = 3 * H
    cdef int b, j
    cdef double g, hv, aj, s0, s1, sb
    cdef const double* Wih = net.Wih[d]
    cdef double* arow
    for b in range(nb):
        arow = a + b * H3
        for j in range(H):
            g = gh[b * H + j]
            hv = hp[b * ldh + j] if hp != NULL else 0.0
            arow[H2 + j] = g * (1.0 - z[b * H + j]) * (1.0 - n[b * H + j] * n[b * H + j])
            arow[H + j] = g * (hv - n[b * H + j]) * z[b * H + j] * (1.0 - z[b * H + j])
            ghp[b * H + j] = g * z[b * H + j]
            arow[j] = 0.0
    if hp != NULL:
        mm(nb, H, H, 1.0, a + H2, H3, False, net.Whh[d] + H2 * H, H, False, 0.0, grh, H)
        for b in range(nb):
            arow = a + b * H3
            for j in range(H):
                hv = hp[b * ldh + j]
                ghp[b * H + j] += grh[b * H + j] * r[b * H + j]
                arow[j] = grh[b * H + j] * hv * r[b * H + j] * (1.0 - r[b * H + j])
                rh[b * H + j] = r[b * H + j] * hv
        mm(nb, H, H2, 1.0, a, H3, False, net.Whh[d], H, False, 1.0, ghp, H)
        mm(H2, H, nb, 1.0, a, H3, True, hp, ldh, False, 1.0, gWhh, H)
        mm(H, H, nb, 1.0, a + H2, H3, True, rh, H, False, 1.0, gWhh + H2 * H, H)
    for j in range(H3):
        s0 = 0.0
        s1 = 0.0
        sb = 0.0
        for b in range(nb):
            aj = a[b * H3 + j]
            s0 += aj * x0[b]
            s1 += aj * x1[b]
            sb += aj
        gWih[2 * j] += s0
        gWih[2 * j + 1] += s1
        gbih[j] += sb
        gbhh[j] += sb
    for b in range(nb):
        g = 0.0
        for j in range(H3):
            g += a[b * H3 + j] * Wih[2 * j + 1]
        gx1[b] = g
    memcpy(gh, ghp, nb * H * sizeof(double))


cdef class _Tape:
    """Buffers for one chunk; ``frames`` is T when recording, else 1."""
    cdef public object keep
    cdef double* c
    cdef double* r
    cdef double* z
    cdef double* n
    cdef double* a1
    cdef double* sig
    cdef double* tmp
    cdef double* rh
    cdef double* x0
    cdef double* x1
    cdef double* xprev
    cdef double* mprev
    cdef double* cbar

    def __init__(self, int frames, int N, int H, int MH, bint per_channel):
        cdef int n_mlp = N if per_channel else 1
        sizes = [frames * N * CHUNK * 2 * H, frames * 2 * N * CHUNK * H,
                 frames * 2 * N * CHUNK * H, frames * 2 * N * CHUNK * H,
                 frames * n_mlp * CHUNK * MH, frames * n_mlp * CHUNK * 2,
                 CHUNK * 3 * H, CHUNK * H, CHUNK, CHUNK, CHUNK * N, CHUNK * N,
                 CHUNK * 2 * H]
        self.keep = [np.zeros(max(k, 1)) for k in sizes]
        self.c = <double*> _ptr(self.keep[0]); self.r = <double*> _ptr(self.keep[1])
        self.z = <double*> _ptr(self.keep[2]); self.n = <double*> _ptr(self.keep[3])
        self.a1 = <double*> _ptr(self.keep[4]); self.sig = <double*> _ptr(self.keep[5])
        self.tmp = <double*> _ptr(self.keep[6]); self.rh = <double*> _ptr(self.keep[7])
        self.x0 = <double*> _ptr(self.keep[8]); self.x1 = <double*> _ptr(self.keep[9])
        self.xprev = <double*> _ptr(self.keep[10]); self.mprev = <double*> _ptr(self.keep[11])
        self.cbar = <double*> _ptr(self.keep[12])


cdef void _chunk_forward(_Net net, _Tape tp, const double* E, int b0, int nb, int T, int N,
                         double s0, double eps, double gmin, double grange,
                         double* X, double* alpha, double* gamma, double* Mout,
                         bint record) noexcept nogil:
    """Forward pass for clips b0..b0+nb-1; outputs indexed like E: (B, T, N)."""
    cdef int H = net.H, MH = net.MH, D = net.D
    cdef int t, i, b, k, m, d, idx, n_rows
    cdef int step = 2 * N * CHUNK * H
    cdef double e, mval, av, gv, x, log_e, log_m, o0, o1, hm
    cdef double* c
    cdef double* r
    cdef double* z
    cdef double* n
    cdef double* a1
    cdef double* sig
    cdef double* hp
    cdef double* row
    for b in range(nb):
        for i in range(N):
            tp.xprev[b * N + i] = 0.0
            tp.mprev[b * N + i] = E[(b0 + b) * T * N + i]
    for t in range(T):
        c = tp.c + (t * N * CHUNK * D if record else 0)
        r = tp.r + (t * step if record else 0)
        z = tp.z + (t * step if record else 0)
        n = tp.n + (t * step if record else 0)
        for d in range(2):
            for k in range(N):
                i = k if d == 0 else N - 1 - k
                for b in range(nb):
                    tp.x0[b] = E[((b0 + b) * T + t) * N + i]
                    tp.x1[b] = tp.xprev[b * N + i]
                if k == 0:
                    hp = NULL
                else:
                    hp = c + ((i - 1) if d == 0 else (i + 1)) * CHUNK * D + d * H
                idx = (d * N + i) * CHUNK * H
                _gru_fwd(net, d, nb, tp.x0, tp.x1, hp, D, c + i * CHUNK * D + d * H, D,
                         r + idx, z + idx, n + idx, tp.tmp, tp.rh)
        if net.per_channel:
            a1 = tp.a1 + (t * N * CHUNK * MH if record else 0)
            sig = tp.sig + (t * N * CHUNK * 2 if record else 0)
            if nb == CHUNK:
                mm(N * CHUNK, MH, D, 1.0, c, D, False, net.W1, D, True, 0.0, a1, MH)
            else:
                for i in range(N):
                    mm(nb, MH, D, 1.0, c + i * CHUNK * D, D, False, net.W1, D, True, 0.0,
                       a1 + i * CHUNK * MH, MH)
            n_rows = N * CHUNK
        else:
            a1 = tp.a1 + (t * CHUNK * MH if record else 0)
            sig = tp.sig + (t * CHUNK * 2 if record else 0)
            for b in range(nb):
                for k in range(D):
                    tp.cbar[b * D + k] = 0.0
                for i in range(N):
                    row = c + (i * CHUNK + b) * D
                    for k in range(D):
                        tp.cbar[b * D + k] += row[k]
                for k in range(D):
                    tp.cbar[b * D + k] /= N
            mm(nb, MH, D, 1.0, tp.cbar, D, False, net.W1, D, True, 0.0, a1, MH)
            n_rows = CHUNK
        for idx in range(n_rows):
            if idx % CHUNK >= nb:
                continue
            row = a1 + idx * MH
            o0 = net.b2[0]
            o1 = net.b2[1]
            for m in range(MH):
                row[m] += net.b1[m]
                hm = row[m] if row[m] > 0.0 else 0.0
                o0 += net.W2[m] * hm
                o1 += net.W2[MH + m] * hm
            o0 = min(max(o0, -LOGIT_CLAMP), LOGIT_CLAMP)
            o1 = min(max(o1, -LOGIT_CLAMP), LOGIT_CLAMP)
            sig[2 * idx] = 1.0 / (1.0 + exp(-o0))
            sig[2 * idx + 1] = 1.0 / (1.0 + exp(-o1))
        for b in range(nb):
            for i in range(N):
                idx = (i * CHUNK + b) if net.per_channel else b
                av = sig[2 * idx]
                gv = gmin + grange * sig[2 * idx + 1]
                e = E[((b0 + b) * T + t) * N + i]
                mval = s0 * e + (1.0 - s0) * tp.mprev[b * N + i]
                if e > 0.0:
                    log_e = log(e)
                    log_m = log(mval + eps) if eps > 0.0 else log(mval if mval > TINY else TINY)
                    x = exp(gv * log_e - av * log_m)
                else:
                    x = 0.0
                k = ((b0 + b) * T + t) * N + i
                X[k] = x
                alpha[k] = av
                gamma[k] = gv
                if Mout != NULL:
                    Mout[k] = mval
                tp.xprev[b * N + i] = x
                tp.mprev[b * N + i] = mval


def apcen_forward(E, weights, double s0, double eps, double gamma_min, double gamma_range,
                  bint per_channel, record=False):
    if record:
        raise ValueError("the compiled kernel does not expose its tape")
    cdef const double[:, :, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef int B = Ev.shape[0], T = Ev.shape[1], N = Ev.shape[2]
    X_arr = np.zeros((B, T, N))
    alpha_arr = np.empty((B, T, N))
    gamma_arr = np.empty((B, T, N))
    if T == 0 or B == 0:
        return X_arr, alpha_arr, gamma_arr
    cdef _Net net = _make_net(weights, per_channel)
    cdef _Tape tp = _Tape(1, N, net.H, net.MH, per_channel)
    cdef double* Xp = <double*> _ptr(X_arr)
    cdef double* ap = <double*> _ptr(alpha_arr)
    cdef double* gp = <double*> _ptr(gamma_arr)
    cdef int b0
    with nogil:
        for b0 in range(0, B, 8):
            _chunk_forward(net, tp, &Ev[0, 0, 0], b0, min(CHUNK, B - b0), T, N, s0, eps,
                           gamma_min, gamma_range, Xp, ap, gp, NULL, False)
    return X_arr, alpha_arr, gamma_arr


def apcen_backward(E, weights, double s0, double eps, double gamma_min, double gamma_range,
                   bint per_channel, gX, int window=0):
    cdef const double[:, :, ::1] Ev = np.ascontiguousarray(E, dtype=np.float64)
    cdef const double[:, :, ::1] gXv = np.ascontiguousarray(gX, dtype=np.float64)
    cdef int B = Ev.shape[0], T = Ev.shape[1], N = Ev.shape[2]
    grads = [np.zeros(np.shape(w)) for w in weights]
    if T == 0 or B == 0:
        return tuple(grads)
    cdef _Net net = _make_net(weights, per_channel)
    cdef int H = net.H, MH = net.MH, D = net.D
    cdef _Tape tp = _Tape(T, N, H, MH, per_channel)
    cdef double* gWih[2]
    cdef double* gWhh[2]
    cdef double* gbih[2]
    cdef double* gbhh[2]
    cdef int d
    for d in range(2):
        gWih[d] = <double*> _ptr(grads[4 * d])
        gWhh[d] = <double*> _ptr(grads[4 * d + 1])
        gbih[d] = <double*> _ptr(grads[4 * d + 2])
        gbhh[d] = <double*> _ptr(grads[4 * d + 3])
    cdef double* gW1 = <double*> _ptr(grads[8])
    cdef double* gb1 = <double*> _ptr(grads[9])
    cdef double* gW2 = <double*> _ptr(grads[10])
    cdef double* gb2 = <double*> _ptr(grads[11])

    Xa = np.zeros((B, T, N)); aa = np.empty((B, T, N)); ga = np.empty((B, T, N))
    cdef double* Xp = <double*> _ptr(Xa)
    cdef double* ap = <double*> _ptr(aa)
    cdef double* gp = <double*> _ptr(ga)
    Ma = np.empty((B, T, N))
    cdef double* Mp = <double*> _ptr(Ma)
    n_mlp_rows = N * CHUNK if per_channel else CHUNK
    bufs = [np.zeros(max(k, 1)) for k in (
        CHUNK * N, CHUNK * 2 * n_mlp_rows, n_mlp_rows * MH, N * CHUNK * D, CHUNK * D,
        CHUNK * 3 * H, CHUNK * H, CHUNK * H, CHUNK * H, CHUNK * H, CHUNK, CHUNK, CHUNK, CHUNK * N)]
    cdef double* carry = <double*> _ptr(bufs[0])
    cdef double* go = <double*> _ptr(bufs[1])
    cdef double* ga1 = <double*> _ptr(bufs[2])
    cdef double* gc = <double*> _ptr(bufs[3])
    cdef double* gcbar = <double*> _ptr(bufs[4])
    cdef double* a = <double*> _ptr(bufs[5])
    cdef double* ghp = <double*> _ptr(bufs[6])
    cdef double* grh = <double*> _ptr(bufs[7])
    cdef double* rh = <double*> _ptr(bufs[8])
    cdef double* gh = <double*> _ptr(bufs[9])
    cdef double* x0 = <double*> _ptr(bufs[10])
    cdef double* x1 = <double*> _ptr(bufs[11])
    cdef double* gx1 = <double*> _ptr(bufs[12])
    cdef double* gu = <double*> _ptr(bufs[13])

    cdef int b0, nb, t, i, k, b, m, idx, n_rows, step = 2 * N * CHUNK * H
    cdef double e, g, sa, sg, mval, log_e, log_m, acc0, acc1
    cdef double* c
    cdef double* sig
    cdef double* a1
    cdef double* hp
    cdef double* row
    cdef const double* Eb = &Ev[0, 0, 0]
    with nogil:
        for b0 in range(0, B, 8):
            nb = min(CHUNK, B - b0)
            _chunk_forward(net, tp, Eb, b0, nb, T, N, s0, eps, gamma_min, gamma_range,
                           Xp, ap, gp, Mp, True)
            n_rows = N * CHUNK if per_channel else CHUNK
            for k in range(CHUNK * N):
                carry[k] = 0.0
            for t in range(T - 1, -1, -1):
                c = tp.c + t * N * CHUNK * D
                if per_channel:
                    sig = tp.sig + t * N * CHUNK * 2
                    a1 = tp.a1 + t * N * CHUNK * MH
                else:
                    sig = tp.sig + t * CHUNK * 2
                    a1 = tp.a1 + t * CHUNK * MH
                for k in range(2 * n_rows):
                    go[k] = 0.0
                for b in range(nb):
                    for i in range(N):
                        k = ((b0 + b) * T + t) * N + i
                        e = Eb[k]
                        idx = (i * CHUNK + b) if per_channel else b
                        sa = sig[2 * idx]
                        sg = sig[2 * idx + 1]
                        if e > 0.0:
                            mval = Mp[k]
                            log_e = log(e)
                            log_m = log(mval + eps) if eps > 0.0 else log(mval if mval > TINY else TINY)
                            g = (gXv[b0 + b, t, i] + carry[b * N + i]) * Xp[k]
                            go[2 * idx] += -g * log_m * sa * (1.0 - sa)
                            go[2 * idx + 1] += g * log_e * gamma_range * sg * (1.0 - sg)
                # MLP backward
                for idx in range(n_rows):
                    if idx % CHUNK >= nb:
                        for m in range(MH):
                            ga1[idx * MH + m] = 0.0
                        continue
                    row = a1 + idx * MH
                    acc0 = go[2 * idx]
                    acc1 = go[2 * idx + 1]
                    gb2[0] += acc0
                    gb2[1] += acc1
                    for m in range(MH):
                        if row[m] > 0.0:
                            gW2[m] += acc0 * row[m]
                            gW2[MH + m] += acc1 * row[m]
                            g = acc0 * net.W2[m] + acc1 * net.W2[MH + m]
                        else:
                            g = 0.0
                        ga1[idx * MH + m] = g
                        gb1[m] += g
                if per_channel:
                    mm(MH, D, n_rows, 1.0, ga1, MH, True, c, D, False, 1.0, gW1, D)
                    mm(n_rows, D, MH, 1.0, ga1, MH, False, net.W1, D, False, 0.0, gc, D)
                else:
                    for b in range(nb):
                        for k in range(D):
                            gcbar[b * D + k] = 0.0
                        for i in range(N):
                            row = c + (i * CHUNK + b) * D
                            for k in range(D):
                                gcbar[b * D + k] += row[k]
                        for k in range(D):
                            gcbar[b * D + k] /= N
                    mm(MH, D, nb, 1.0, ga1, MH, True, gcbar, D, False, 1.0, gW1, D)
                    mm(nb, D, MH, 1.0, ga1, MH, False, net.W1, D, False, 0.0, gcbar, D)
                    for i in range(N):
                        for b in range(nb):
                            for k in range(D):
                                gc[(i * CHUNK + b) * D + k] = gcbar[b * D + k] / N
                # GRU backward, each direction walked opposite to its forward order
                for k in range(CHUNK * N):
                    gu[k] = 0.0
                for d in range(2):
                    for k in range(nb * H):
                        gh[k] = 0.0
                    for k in range(N - 1, -1, -1):
                        i = k if d == 0 else N - 1 - k
                        for b in range(nb):
                            row = gc + (i * CHUNK + b) * D + d * H
                            for m in range(H):
                                gh[b * H + m] += row[m]
                            x0[b] = Eb[((b0 + b) * T + t) * N + i]
                            x1[b] = Xp[((b0 + b) * T + t - 1) * N + i] if t > 0 else 0.0
                        if k == 0:
                            hp = NULL
                        else:
                            hp = c + ((i - 1) if d == 0 else (i + 1)) * CHUNK * D + d * H
                        idx = t * step + (d * N + i) * CHUNK * H
                        _gru_bwd(net, d, nb, gh, x0, x1, hp, D, tp.r + idx, tp.z + idx,
                                 tp.n + idx, gWih[d], gWhh[d], gbih[d], gbhh[d],
                                 a, ghp, grh, rh, gx1)
                        for b in range(nb):
                            gu[b * N + i] += gx1[b]
                for k in range(nb * N):
                    carry[k] = 0.0 if (window > 0 and t % window == 0) else gu[k]
    return tuple(grads)


