"""Dormand–Prince 5(4) integration with a terminal event on y[0] crossing zero from above.

The right-hand side is a numba-compiled function ``rhs(t, y, params, out)``;
passing a different compiled function (e.g. a harmonic oscillator in tests)
gives a separate specialization.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# status codes
EVENT = 0
NO_RETURN = 1
BLOW_UP = 2
DEGENERATE = 3
STEP_UNDERFLOW = 4

STATUS_NAMES = {
    EVENT: "ok",
    NO_RETURN: "NoReturn",
    BLOW_UP: "BlowUp",
    DEGENERATE: "DegenerateState",
    STEP_UNDERFLOW: "StepUnderflow",
}

APPROACH_FRACTION = 0.2
APPROACH_STOP = 1e-10

A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th and embedded 4th order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40


@njit(cache=True, nogil=True, error_model="numpy")
def _step(rhs, t, y, h, params, k1, ynew, err):
    """One DP5(4) step of size h from (t, y) given k1 = rhs(t, y); fills ynew and err."""
    n = y.size
    tmp = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    for i in range(n):
        tmp[i] = y[i] + h * A21 * k1[i]
    rhs(t + h / 5, tmp, params, k2)
    for i in range(n):
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs(t + 3 * h / 10, tmp, params, k3)
    for i in range(n):
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs(t + 4 * h / 5, tmp, params, k4)
    for i in range(n):
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs(t + 8 * h / 9, tmp, params, k5)
    for i in range(n):
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs(t + h, tmp, params, k6)
    for i in range(n):
        ynew[i] = y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    rhs(t + h, ynew, params, k7)
    for i in range(n):
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])


@njit(cache=True, nogil=True, error_model="numpy")
def _err_norm(y, ynew, err, rtol, atol):
    acc = 0.0
    for i in range(y.size):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        acc += (err[i] / sc) ** 2
    return np.sqrt(acc / y.size)


@njit(cache=True, nogil=True, error_model="numpy")
def _locate_event(rhs, t, y, h, params):
    """Root of tau -> [step(t, y, tau)]_0 on (0, h]: bisection, then Newton polish."""
    n = y.size
    k1 = np.empty(n)
    rhs(t, y, params, k1)
    yt = np.empty(n)
    err = np.empty(n)
    lo, hi = 0.0, h
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _step(rhs, t, y, mid, params, k1, yt, err)
        if yt[0] > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(t)):
            break
    tau = 0.5 * (lo + hi)
    for _ in range(8):
        _step(rhs, t, y, tau, params, k1, yt, err)
        if yt[1] == 0.0:
            break
        dtau = -yt[0] / yt[1]
        tau += dtau
        if abs(dtau) < 1e-16 * max(1.0, t + tau):
            break
    _step(rhs, t, y, tau, params, k1, yt, err)
    return t + tau, yt


@njit(cache=True, nogil=True, error_model="numpy")
def integrate_to_zero(rhs, t0, y0, params, t_max, rtol, atol, blowup, h0,
                      rec_t, rec_y, rec_h):
    """Integrate until y[0] crosses zero from above.

    Returns (status, t_end, y_end, n_rec).  Accepted steps are recorded into
    ``rec_t``/``rec_y``/``rec_h`` while there is room (pass zero-length
    arrays to skip recording).
    """
    n = y0.size
    y = y0.copy()
    t = t0
    h = h0
    k1 = np.empty(n)
    ynew = np.empty(n)
    err = np.empty(n)
    n_rec = 0
    cap = rec_t.size
    rhs(t, y, params, k1)
    f_peak = abs(y[0])
    for _ in range(10_000_000):
        if t >= t_max:
            return NO_RETURN, t, y, n_rec
        if h > t_max - t:
            h = t_max - t
        # geometric approach to the zero of f: the rhs is singular there, so
        # no RK stage may get near it; the last sliver is a Taylor step
        if y[1] < 0.0:
            if y[0] > APPROACH_STOP * f_peak:
                h = min(h, APPROACH_FRACTION * y[0] / -y[1])
            else:
                tau = y[0] / -y[1]
                tau = tau - 0.5 * k1[1] * tau * tau / y[1]
                y_ev = np.empty(n)
                for i in range(n):
                    y_ev[i] = y[i] + tau * k1[i]
                y_ev[0] = 0.0
                if n_rec < cap:
                    rec_t[n_rec] = t
                    rec_h[n_rec] = tau
                    for i in range(n):
                        rec_y[n_rec, i] = y[i]
                    n_rec += 1
                return EVENT, t + tau, y_ev, n_rec
        if h < 1e-14 * max(1.0, abs(t)):
            return STEP_UNDERFLOW, t, y, n_rec
        _step(rhs, t, y, h, params, k1, ynew, err)
        bad = False
        for i in range(n):
            if not np.isfinite(ynew[i]):
                bad = True
        en = _err_norm(y, ynew, err, rtol, atol) if not bad else 1e10
        if en > 1.0:
            h *= max(0.2, 0.9 * en ** -0.2)
            continue
        if ynew[0] <= 0.0 and y[0] > 0.0:
            if n_rec < cap:
                rec_t[n_rec] = t
                rec_h[n_rec] = h
                for i in range(n):
                    rec_y[n_rec, i] = y[i]
                n_rec += 1
            t_ev, y_ev = _locate_event(rhs, t, y, h, params)
            return EVENT, t_ev, y_ev, n_rec
        if ynew.size > 2 and ynew[2] <= 0.0:
            return DEGENERATE, t, y, n_rec
        norm = 0.0
        for i in range(n):
            norm = max(norm, abs(ynew[i]))
        if norm > blowup:
            return BLOW_UP, t, y, n_rec
        if n_rec < cap:
            rec_t[n_rec] = t
            rec_h[n_rec] = h
            for i in range(n):
                rec_y[n_rec, i] = y[i]
            n_rec += 1
        t = t + h
        for i in range(n):
            y[i] = ynew[i]
        f_peak = max(f_peak, abs(y[0]))
        rhs(t, y, params, k1)
        factor = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        h *= factor
    return STEP_UNDERFLOW, t, y, n_rec


@njit(cache=True, nogil=True, error_model="numpy")
def sample_from_record(rhs, rec_t, rec_y, rec_h, n_rec, params, t_out):
    """Evaluate the recorded trajectory at ``t_out`` by one partial RK step from the enclosing accepted step."""
    n = rec_y.shape[1]
    out = np.empty((t_out.size, n))
    k1 = np.empty(n)
    yt = np.empty(n)
    err = np.empty(n)
    j = 0
    for i in range(t_out.size):
        tt = t_out[i]
        while j + 1 < n_rec and rec_t[j + 1] <= tt:
            j += 1
        y = rec_y[j].copy()
        rhs(rec_t[j], y, params, k1)
        _step(rhs, rec_t[j], y, tt - rec_t[j], params, k1, yt, err)
        for c in range(n):
            out[i, c] = yt[c]
    return out


@njit(cache=True, nogil=True, error_model="numpy")
def harmonic_rhs(t, y, params, out):
    """f'' = -f, g'' = 0: the test hook used to check the event machinery."""
    out[0] = y[1]
    out[1] = -y[0]
    out[2] = y[3]
    out[3] = 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def gauduchon_rhs(t, y, params, out):
    """First-order form of the Gauduchon system; params = (n, eps, s, C)."""
    n = params[0]
    eps = params[1]
    s = params[2]
    C = params[3]
    f = y[0]
    fp = y[1]
    g = y[2]
    gp = y[3]
    P = s * s * f * f / (4.0 * g**4)
    Q = fp * gp / (f * g)
    gpp = g * (Q - P) - g * C * C * f * f / (2.0 * (n - 1.0))
    fpp = f * (-(2.0 * n - 3.0) * gpp / g + 2.0 * P + Q - 2.0 * eps / (g * g)
               + (2.0 * n - 3.0) * gp * gp / (g * g))
    out[0] = fp
    out[1] = fpp
    out[2] = gp
    out[3] = gpp
