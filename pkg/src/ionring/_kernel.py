"""Compiled inner loop of the MD integrator."""

import math

import numpy as np
from numba import njit

OK = 0
NONFINITE = 1
COINCIDENT = 2
COARSE_STEP = 3

FIELD_OFF = 0
FIELD_PSEUDO = 1
FIELD_FULL = 2


@njit(cache=True)
def _cpow(re, im, n):
    """(re + i im)**n for small non-negative integer n."""
    a, b = 1.0, 0.0
    for _ in range(n):
        a, b = a * re - b * im, a * im + b * re
    return a, b


@njit(cache=True)
def accelerations(pos, t, out, trap, mode, static_on, kc_over_m):
    """Fill out with accelerations; returns a status code.

    trap = [k, V0, Omega, r0, omega_z, q/m, pseudo_C/m]
    """
    n = pos.shape[0]
    k = int(trap[0])
    v0, omega, r0, wz = trap[1], trap[2], trap[3], trap[4]
    q_over_m, pc_over_m = trap[5], trap[6]
    wz2 = wz * wz
    for i in range(n):
        x, y, z = pos[i, 0], pos[i, 1], pos[i, 2]
        ax = 0.0
        ay = 0.0
        az = 0.0
        if mode == FIELD_FULL:
            # -q grad[(V0/2) cos(Omega t) Re(w^k)] / r0^k
            re, im = _cpow(x, y, k - 1)
            g = -q_over_m * 0.5 * v0 * k * math.cos(omega * t) / r0 ** k
            ax += g * re
            ay -= g * im
        elif mode == FIELD_PSEUDO:
            rho2 = x * x + y * y
            g = -(2 * k - 2) * pc_over_m * rho2 ** (k - 2)
            ax += g * x
            ay += g * y
        if static_on:
            ax += 0.5 * wz2 * x
            ay += 0.5 * wz2 * y
            az -= wz2 * z
        out[i, 0] = ax
        out[i, 1] = ay
        out[i, 2] = az
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[i, 0] - pos[j, 0]
            dy = pos[i, 1] - pos[j, 1]
            dz = pos[i, 2] - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            if r2 == 0.0:
                return COINCIDENT
            s = kc_over_m / (r2 * math.sqrt(r2))
            out[i, 0] += s * dx
            out[i, 1] += s * dy
            out[i, 2] += s * dz
            out[j, 0] -= s * dx
            out[j, 1] -= s * dy
            out[j, 2] -= s * dz
    return OK


@njit(cache=True)
def scatter(vel, i, beams, cool, rnd, dt):
    """Stochastic photon scattering for ion i from every beam; returns a status code.

    cool = [detuning, gamma, s_beam, k_cool, recoil_velocity]
    rnd[b] = (u_scatter, u_cos_theta, u_phi)
    """
    det, gamma, s, kc, vrec = cool[0], cool[1], cool[2], cool[3], cool[4]
    for b in range(beams.shape[0]):
        kv = kc * (beams[b, 0] * vel[i, 0] + beams[b, 1] * vel[i, 1] + beams[b, 2] * vel[i, 2])
        x = 2.0 * (det - kv) / gamma
        p = 0.5 * gamma * s / (1.0 + s + x * x) * abs(dt)
        if p > 0.1:
            return COARSE_STEP
        if rnd[b, 0] < p:
            ct = 2.0 * rnd[b, 1] - 1.0
            st = math.sqrt(max(0.0, 1.0 - ct * ct))
            ph = 2.0 * math.pi * rnd[b, 2]
            vel[i, 0] += vrec * (beams[b, 0] + st * math.cos(ph))
            vel[i, 1] += vrec * (beams[b, 1] + st * math.sin(ph))
            vel[i, 2] += vrec * (beams[b, 2] + ct)
    return OK


@njit(cache=True)
def advance(pos, vel, t, dt, n_steps, trap, mode, static_on, kc_over_m,
            cooling_on, beams, cool, rnd,
            block, block_pos, block_vel, block_v2, block_t,
            raw_stride, raw_pos, raw_vel, raw_t):
    """Drift-kick-drift steps with the force taken at the step midpoint.

    Positions/velocities are updated in place. Every ``block`` steps the
    block means of position, velocity and squared velocity are stored.
    Returns (status, steps_done, t).
    """
    n = pos.shape[0]
    acc = np.empty_like(pos)
    sum_p = np.zeros_like(pos)
    sum_v = np.zeros_like(pos)
    sum_v2 = np.zeros_like(pos)
    sum_t = 0.0
    nb = 0
    nr = 0
    half = 0.5 * dt
    for step in range(n_steps):
        for i in range(n):
            for c in range(3):
                pos[i, c] += half * vel[i, c]
        status = accelerations(pos, t + half, acc, trap, mode, static_on, kc_over_m)
        if status != OK:
            return status, step, t
        for i in range(n):
            for c in range(3):
                vel[i, c] += dt * acc[i, c]
                pos[i, c] += half * vel[i, c]
        t += dt
        if cooling_on:
            for i in range(n):
                status = scatter(vel, i, beams, cool, rnd[step, i], dt)
                if status != OK:
                    return status, step, t
        for i in range(n):
            for c in range(3):
                if not (math.isfinite(pos[i, c]) and math.isfinite(vel[i, c])):
                    return NONFINITE, step, t
        if block > 0:
            for i in range(n):
                for c in range(3):
                    sum_p[i, c] += pos[i, c]
                    sum_v[i, c] += vel[i, c]
                    sum_v2[i, c] += vel[i, c] * vel[i, c]
            sum_t += t
            if (step + 1) % block == 0:
                for i in range(n):
                    for c in range(3):
                        block_pos[nb, i, c] = sum_p[i, c] / block
                        block_vel[nb, i, c] = sum_v[i, c] / block
                        block_v2[nb, i, c] = sum_v2[i, c] / block
                        sum_p[i, c] = 0.0
                        sum_v[i, c] = 0.0
                        sum_v2[i, c] = 0.0
                block_t[nb] = sum_t / block
                sum_t = 0.0
                nb += 1
        if raw_stride > 0 and (step + 1) % raw_stride == 0:
            for i in range(n):
                for c in range(3):
                    raw_pos[nr, i, c] = pos[i, c]
                    raw_vel[nr, i, c] = vel[i, c]
            raw_t[nr] = t
            nr += 1
    return OK, n_steps, t
