"""Hot numeric loops shared by the simulation engine and the estimator.

Every function here is written in scalar/loop style so it runs identically
under numba's nopython mode and as plain Python (see `_backend.maybe_jit`).
State that must persist across calls travels in small float64/int64 arrays;
layouts are documented next to the helpers that own them.

Conventions baked into the closed-loop step (`run_segment`):

* Loop wiring follows the reconfiguration-interface port assignment
  [loop_in; loop_out] = M [ctrl_in; ctrl_out], i.e. the wrapper transforms
  the controller's ports into the loop-facing ports.  With M = I this
  reduces exactly (operation by operation) to the nominal feedback loop
  e = r - u_c, plant input e, controller input y.
* Inputs are held constant across integrator substeps (zero-order hold),
  and time-varying fault parameters (delay, swap flag, cubic-spring alpha)
  are frozen at the step's start time.
* The plant-input delay reads the commanded-input history with linear
  interpolation; queries before t=0 return 0 (zero initial rest) and
  sub-step delays clamp to the most recent stored sample.
"""

import numpy as np

from ._backend import maybe_jit

# verdict codes (must match passivity.DetectionVerdict)
V_NOMINAL = 0
V_RHO_LOW = 1
V_NU_LOW = 2
V_BOTH_LOW = 3
V_INDETERMINATE = 4

# run_segment exit statuses
S_DONE = 0
S_DIVERGED = 1
S_RECONFIG = 2

# plant kinds
P_LTI = 0
P_EX2 = 1
P_EX3 = 2

# fault kinds
F_NONE = 0
F_DELAY = 1
F_SWAP = 2
F_SOFTEN = 3

# reference kinds
R_STEP = 0
R_SQUARE = 1
R_SINE = 2

# integrator methods
M_RK4 = 0
M_EULER = 1

# estimator state slots: [I_ey, c_ey, I_yy, c_yy, I_ee, c_ee,
#                         prev_e, prev_y, have_prev, t_last, signal_fault,
#                         warmup_epoch]
# warmup_epoch is the time of the last integral reset; detection stays
# indeterminate until warmup seconds of fresh data have accumulated past it.
EST_SLOTS = 12


@maybe_jit
def kahan_add(acc, i, inc):
    """Compensated add of ``inc`` into the (sum, comp) pair at acc[i], acc[i+1]."""
    y = inc - acc[i + 1]
    t = acc[i] + y
    acc[i + 1] = (t - acc[i]) - y
    acc[i] = t


@maybe_jit
def dot1(c, x):
    acc = 0.0
    for i in range(x.shape[0]):
        acc += c[i] * x[i]
    return acc


@maybe_jit
def est_update(est, win, win_meta, window, e, y, dt):
    """Advance the running supply integrals by one trapezoid step.

    ``win`` is a ring buffer of per-step increments (inc_ey, inc_yy, inc_ee,
    t_end) used only when ``window > 0``; contributions older than
    t - window are subtracted so the integrals cover a moving window.
    Non-finite samples freeze the estimator and set the signal-fault flag.
    """
    if not (np.isfinite(e) and np.isfinite(y)):
        est[10] = 1.0
        return
    if est[10] != 0.0:
        return
    if est[8] == 0.0:
        est[6] = e
        est[7] = y
        est[8] = 1.0
        return
    inc_ey = 0.5 * dt * (est[6] * est[7] + e * y)
    inc_yy = 0.5 * dt * (est[7] * est[7] + y * y)
    inc_ee = 0.5 * dt * (est[6] * est[6] + e * e)
    kahan_add(est, 0, inc_ey)
    kahan_add(est, 2, inc_yy)
    kahan_add(est, 4, inc_ee)
    est[9] += dt
    est[6] = e
    est[7] = y
    if window > 0.0:
        cap = win.shape[0]
        head = win_meta[0]
        count = win_meta[1]
        idx = (head + count) % cap
        win[idx, 0] = inc_ey
        win[idx, 1] = inc_yy
        win[idx, 2] = inc_ee
        win[idx, 3] = est[9]
        count += 1
        # evict increments strictly older than t - window (quarter-step slack
        # absorbs float drift in the accumulated time)
        while count > 0 and (est[9] - win[head, 3]) > window + 0.25 * dt:
            kahan_add(est, 0, -win[head, 0])
            kahan_add(est, 2, -win[head, 1])
            kahan_add(est, 4, -win[head, 2])
            head = (head + 1) % cap
            count -= 1
        win_meta[0] = head
        win_meta[1] = count


@maybe_jit
def est_ratios(est, eps_den):
    """(rho_bar, nu_bar); NaN encodes an undefined ratio (tiny denominator)."""
    rho = np.nan
    nu = np.nan
    if est[2] > eps_den:
        rho = est[0] / est[2]
    if est[4] > eps_den:
        nu = est[0] / est[4]
    return rho, nu


@maybe_jit
def detect_code(rho, nu, rho0, nu0, t, warmup):
    if t < warmup or np.isnan(rho) or np.isnan(nu):
        return V_INDETERMINATE
    rho_low = rho < rho0
    nu_low = nu < nu0
    if rho_low and nu_low:
        return V_BOTH_LOW
    if rho_low:
        return V_RHO_LOW
    if nu_low:
        return V_NU_LOW
    return V_NOMINAL


@maybe_jit
def supply_integral(u, y, dt, eps, delta):
    """Trapezoid integral of (1+eps*delta) u y - delta y^2 - eps u^2."""
    c = 1.0 + eps * delta
    s = 0.0
    comp = 0.0
    prev = c * u[0] * y[0] - delta * y[0] * y[0] - eps * u[0] * u[0]
    for k in range(1, u.shape[0]):
        cur = c * u[k] * y[k] - delta * y[k] * y[k] - eps * u[k] * u[k]
        inc = 0.5 * dt * (prev + cur)
        yk = inc - comp
        t = s + yk
        comp = (t - s) - yk
        s = t
        prev = cur
    return s


@maybe_jit
def ref_value(kind, amp, period, offset, t):
    if kind == R_STEP:
        return offset + amp
    if kind == R_SQUARE:
        ph = t % period
        if ph < 0.5 * period:
            return offset + amp
        return offset - amp
    return offset + amp * np.sin(2.0 * np.pi * t / period)


@maybe_jit
def delay_at(fault_kind, t0, t1, mag, t):
    if fault_kind != F_DELAY:
        return 0.0
    if t < t0:
        return 0.0
    if t >= t1:
        return mag
    return mag * (t - t0) / (t1 - t0)


@maybe_jit
def alpha_at(fault_kind, t0, t1, mag, t):
    if fault_kind != F_SOFTEN:
        return 0.0
    if t < t0:
        return 0.0
    if t >= t1:
        return mag
    return mag * (t - t0) / (t1 - t0)


@maybe_jit
def swap_active(fault_kind, t0, mag, t):
    return fault_kind == F_SWAP and mag != 0.0 and t >= t0


@maybe_jit
def delayed_read_hist(ehist, k_written, dt, tq):
    """Linear interpolation of the input history at query time ``tq``."""
    if k_written <= 0 or tq < 0.0:
        return 0.0
    pos = tq / dt
    i = int(np.floor(pos))
    if i >= k_written - 1:
        return ehist[k_written - 1]
    frac = pos - i
    return ehist[i] * (1.0 - frac) + ehist[i + 1] * frac


@maybe_jit
def plant_deriv(kind, Ap, Bp, x, u, swapped, alpha, msd, udd, out):
    if kind == P_EX2:
        out[0] = -x[0] - 2.0 * x[1] + 2.0 * u
        if swapped:
            out[1] = x[0] - 0.5 * x[1] * x[1]
        else:
            out[1] = x[0]
    elif kind == P_EX3:
        # z = (y-u, dy/dt-du/dt); Newton on the absolute acceleration gives
        # dz2/dt = -(c z2 + k z1 + alpha z1^3)/m - u_ddot
        out[0] = x[1]
        out[1] = -(msd[1] * x[1] + msd[2] * x[0] + alpha * x[0] * x[0] * x[0]) / msd[0] - udd
    else:
        for i in range(x.shape[0]):
            acc = Bp[i] * u
            for j in range(x.shape[0]):
                acc += Ap[i, j] * x[j]
            out[i] = acc


@maybe_jit
def advance_state(kind, Ap, Bp, x, u, swapped, alpha, msd, udd, dt, method,
                  k1, k2, k3, k4, xt):
    """One fixed step (classical RK4 or explicit Euler) with input held."""
    n = x.shape[0]
    plant_deriv(kind, Ap, Bp, x, u, swapped, alpha, msd, udd, k1)
    if method == M_EULER:
        for i in range(n):
            x[i] = x[i] + dt * k1[i]
        return
    for i in range(n):
        xt[i] = x[i] + 0.5 * dt * k1[i]
    plant_deriv(kind, Ap, Bp, xt, u, swapped, alpha, msd, udd, k2)
    for i in range(n):
        xt[i] = x[i] + 0.5 * dt * k2[i]
    plant_deriv(kind, Ap, Bp, xt, u, swapped, alpha, msd, udd, k3)
    for i in range(n):
        xt[i] = x[i] + dt * k3[i]
    plant_deriv(kind, Ap, Bp, xt, u, swapped, alpha, msd, udd, k4)
    for i in range(n):
        x[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@maybe_jit
def loop_signals(pout, cout, Dp, Dc, m11, m12, m21, m22, r, tau, ehist, k, dt):
    """Solve the per-step loop algebra; returns (y, v, w, u, e, e_d).

    pout/cout are the state-driven output parts C_p x_p and C_c x_c.  With a
    positive input delay the plant's port value comes from the history, so
    the remaining algebra is explicit; at zero delay the feedthrough loop is
    solved in closed form.  v and w are the controller's input and output.
    """
    d1 = m11 + m12 * Dc
    d2 = m21 + m22 * Dc
    if tau > 0.0:
        e_d = delayed_read_hist(ehist, k, dt, k * dt - tau)
        y = pout + Dp * e_d
        v = (y - m12 * cout) / d1
        w = cout + Dc * v
        u = m21 * v + m22 * w
        e = r - u
    else:
        den = 1.0 + Dp * d2 / d1
        y = (pout + Dp * (r - m22 * cout + d2 * m12 * cout / d1)) / den
        v = (y - m12 * cout) / d1
        w = cout + Dc * v
        u = m21 * v + m22 * w
        e = r - u
        e_d = e
    return y, v, w, u, e, e_d


@maybe_jit
def run_segment(k0, n_steps, dt, method,
                plant_kind, Ap, Bp, Cp, Dp, msd,
                fault_kind, f_t0, f_t1, f_mag,
                Ac, Bc, Cc, Dc,
                mvec,
                ref_kind, ref_amp, ref_period, ref_offset,
                est, win, win_meta, window, eps_den,
                rho0, nu0, warmup,
                wm, mitigation, div_threshold,
                xp, xc, ehist,
                log_r, log_e, log_y, log_u, log_rho, log_nu,
                log_verdict, log_m, log_div,
                kp1, kp2, kp3, kp4, xpt,
                kc1, kc2, kc3, kc4, xct):
    """Run the closed loop from step ``k0`` until done/divergence/reconfig.

    Returns (status, k_next).  On S_RECONFIG the row k_next-1 holds the
    estimates that fired; states, history and logs are complete through that
    row, so the caller can install a new wrapper and resume at k_next.
    On S_DIVERGED the last logged row is flagged and the run is truncated.
    """
    k = k0
    m11 = mvec[0]
    m12 = mvec[1]
    m21 = mvec[2]
    m22 = mvec[3]
    while k < n_steps:
        t = k * dt
        r = ref_value(ref_kind, ref_amp, ref_period, ref_offset, t)
        tau = delay_at(fault_kind, f_t0, f_t1, f_mag, t)
        pout = dot1(Cp, xp)
        cout = dot1(Cc, xc)
        y, v, w, u, e, e_d = loop_signals(pout, cout, Dp, Dc,
                                          m11, m12, m21, m22,
                                          r, tau, ehist, k, dt)

        log_r[k] = r
        log_e[k] = e
        log_y[k] = y
        log_u[k] = u

        est_update(est, win, win_meta, window, e, y, dt)
        rho, nu = est_ratios(est, eps_den)
        verdict = detect_code(rho, nu, rho0, nu0, est[9] - est[11], warmup)
        log_rho[k] = rho
        log_nu[k] = nu
        log_verdict[k] = verdict
        log_m[k, 0] = m11
        log_m[k, 1] = m12
        log_m[k, 2] = m21
        log_m[k, 3] = m22
        log_div[k] = 0

        swapped = swap_active(fault_kind, f_t0, f_mag, t)
        alpha = alpha_at(fault_kind, f_t0, f_t1, f_mag, t)
        udd = 0.0
        if plant_kind == P_EX3:
            em1 = ehist[k - 1] if k >= 1 else 0.0
            em2 = ehist[k - 2] if k >= 2 else 0.0
            udd = (e - 2.0 * em1 + em2) / (dt * dt)
        advance_state(plant_kind, Ap, Bp, xp, e_d, swapped, alpha, msd, udd,
                      dt, method, kp1, kp2, kp3, kp4, xpt)
        advance_state(P_LTI, Ac, Bc, xc, v, False, 0.0, msd, 0.0,
                      dt, method, kc1, kc2, kc3, kc4, xct)
        ehist[k] = e
        k += 1

        bad = not (np.isfinite(e) and np.isfinite(y) and np.isfinite(u))
        nrm = 0.0
        for i in range(xp.shape[0]):
            a = abs(xp[i])
            if not np.isfinite(a):
                bad = True
            elif a > nrm:
                nrm = a
        for i in range(xc.shape[0]):
            a = abs(xc[i])
            if not np.isfinite(a):
                bad = True
            elif a > nrm:
                nrm = a
        if bad or nrm > div_threshold:
            log_div[k - 1] = 1
            return S_DIVERGED, k

        if mitigation == 1 and verdict != V_NOMINAL and verdict != V_INDETERMINATE:
            fire = False
            if verdict == V_RHO_LOW and rho < wm[0]:
                fire = True
            elif verdict == V_NU_LOW and nu < wm[1]:
                fire = True
            elif verdict == V_BOTH_LOW and (rho < wm[0] or nu < wm[1]):
                fire = True
            if fire:
                return S_RECONFIG, k
    return S_DONE, n_steps


@maybe_jit
def lti_rollout(Phi, Gam, C, D, u_seq, x, xt, y_out):
    """Drive x+ = Phi x + Gam u, y = C x + D u over an input sequence.

    Phi/Gam are the one-step propagators of the fixed-step integrator with
    held input, so this matches stepping the continuous system sample by
    sample.
    """
    n = x.shape[0]
    for k in range(u_seq.shape[0]):
        uk = u_seq[k]
        acc = D * uk
        for i in range(n):
            acc += C[i] * x[i]
        y_out[k] = acc
        for i in range(n):
            s = Gam[i] * uk
            for j in range(n):
                s += Phi[i, j] * x[j]
            xt[i] = s
        for i in range(n):
            x[i] = xt[i]


@maybe_jit
def wrapped_probe_rollout(Ac, Bc, Cc, Dc, m11, m12, m21, m22,
                          p_seq, dt, method, xc, q_out,
                          k1, k2, k3, k4, xt, msd_dummy):
    """Feed a probe into the wrapped controller's loop-facing input port.

    Port relation [p; q] = M [v; w] with w the controller response to v:
    per step, v = (p - m12 C_c x_c) / (m11 + m12 D_c), then q = m21 v + m22 w.
    """
    d1 = m11 + m12 * Dc
    for k in range(p_seq.shape[0]):
        p = p_seq[k]
        cout = dot1(Cc, xc)
        v = (p - m12 * cout) / d1
        w = cout + Dc * v
        q_out[k] = m21 * v + m22 * w
        advance_state(P_LTI, Ac, Bc, xc, v, False, 0.0, msd_dummy, 0.0,
                      dt, method, k1, k2, k3, k4, xt)


@maybe_jit
def est_rollout(est, win, win_meta, window, e_seq, y_seq, dt, eps_den,
                rho_out, nu_out):
    """Feed a whole (e, y) trace through the estimator, logging both ratios."""
    for k in range(e_seq.shape[0]):
        est_update(est, win, win_meta, window, e_seq[k], y_seq[k], dt)
        rho, nu = est_ratios(est, eps_den)
        rho_out[k] = rho
        nu_out[k] = nu
