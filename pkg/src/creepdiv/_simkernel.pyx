# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernel for the refracted jump-diffusion.

Mirrors ``_simkernel_py.simulate_paths`` step for step; both draw every random
number from the same counter-based hash so the two agree path by path.
"""
from libc.math cimport sqrt, log, cos, sin, exp, expm1, INFINITY, NAN
from libc.stdint cimport uint64_t, int64_t, int8_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.1102230246251565e-16
cdef double BRIDGE_CUTOFF = 38.0

cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)

cdef inline double uniform(uint64_t key, uint64_t stream, uint64_t idx) noexcept nogil:
    cdef uint64_t r = mix64(key ^ mix64(((idx << 3) | stream) + GOLDEN))
    return (<double>(r >> 11) + 0.5) * INV_2_53


cdef inline double _bridge_hit_time(double a, double v, double h, double sigma,
                                   uint64_t key, uint64_t k, double acc) noexcept nogil:
    # Time at which a Brownian bridge from a > 0 to +-v, known to touch 0, first does so.
    # After a time change the hitting time is inverse Gaussian with mean a/(h v) and
    # shape a^2/(h sigma)^2; sampled with the Michael-Schucany-Haas transform.
    cdef double lam = a * a / (h * h * sigma * sigma)
    cdef double z = sqrt(-2.0 * log(uniform(key, 6, k))) * cos(TWO_PI * uniform(key, 7, k))
    cdef double y = z * z, r, x
    if y == 0.0:
        return h * a / (a + v)
    r = sqrt(1.0 + 4.0 * a * v / (h * sigma * sigma * y))
    x = 4.0 * lam / (y * (1.0 + r) * (1.0 + r))
    if acc * x * h * v > (1.0 - acc) * a:
        x = a * a / (h * h * v * v * x)
    return h * (x * h) / (1.0 + x * h)


cdef inline void _finish_creep(double div, bint pay, double rate, double q, double s, double tau,
                               double* div_out, double* creep_out, int8_t* cls_out) noexcept nogil:
    # dividends stop at the ruin time inside the step
    if pay:
        div += rate * (-expm1(-q * s) / q)
    div_out[0] = div
    creep_out[0] = exp(-q * tau)
    cls_out[0] = 1


cdef void run_path(double x0, double b, double c, double sigma, double delta, double q,
                   const double[::1] phase_cdf, const double[::1] phase_rate, double lam_total,
                   double dt, double t_max, uint64_t key, bint bridge,
                   double* div_out, double* creep_out, double* tau_out, int8_t* cls_out) noexcept nogil:
    cdef double u = x0, t = 0.0, div = 0.0, t_next, t_end, h, drift, z, u2, rad = 0.0, ang = 0.0, pc, jump, w
    cdef double e_dt = -expm1(-q * dt) / q, d_dt = exp(-q * dt), sq_dt = sqrt(dt), disc = 1.0
    cdef uint64_t k = 0, j = 0
    cdef int nph = phase_cdf.shape[0], i
    cdef bint jump_now, pay

    if u <= 0.0:
        div_out[0] = 0.0
        creep_out[0] = 1.0
        tau_out[0] = 0.0
        cls_out[0] = 1
        return
    t_next = -log(uniform(key, 3, 0)) / lam_total if lam_total > 0.0 else INFINITY
    while True:
        t_end = t + dt
        jump_now = False
        if t_next <= t_end:
            t_end = t_next
            jump_now = True
        if t_end > t_max:
            t_end = t_max
            jump_now = False
        h = t_end - t
        drift = c - delta if u > b else c
        if k & 1:
            z = rad * sin(ang)
        else:
            rad = sqrt(-2.0 * log(uniform(key, 0, k >> 1)))
            ang = TWO_PI * uniform(key, 1, k >> 1)
            z = rad * cos(ang)
        pay = u > b
        if h == dt:
            u2 = u + drift * h + sigma * sq_dt * z
        else:
            u2 = u + drift * h + sigma * sqrt(h) * z
        if u2 <= 0.0:
            w = _bridge_hit_time(u, -u2, h, sigma, key, k, uniform(key, 2, k))
            tau_out[0] = t + w
            _finish_creep(div, pay, delta * disc, q, w, tau_out[0], div_out, creep_out, cls_out)
            return
        if bridge:
            w = 2.0 * u * u2 / (sigma * sigma * h)
            if w < BRIDGE_CUTOFF:
                pc = exp(-w)
                w = uniform(key, 2, k)
                if w < pc:
                    w = _bridge_hit_time(u, u2, h, sigma, key, k, w / pc)
                    tau_out[0] = t + w
                    _finish_creep(div, pay, delta * disc, q, w, tau_out[0], div_out, creep_out, cls_out)
                    return
        if pay:
            div += delta * disc * (e_dt if h == dt else -expm1(-q * h) / q)
        k += 1
        disc = disc * d_dt if h == dt else disc * exp(-q * h)
        t = t_end
        u = u2
        if jump_now:
            w = uniform(key, 4, j)
            i = 0
            while i < nph - 1 and w > phase_cdf[i]:
                i += 1
            jump = -log(uniform(key, 5, j)) / phase_rate[i]
            u -= jump
            j += 1
            if u < 0.0:
                tau_out[0] = t
                creep_out[0] = 0.0
                cls_out[0] = 2
                div_out[0] = div
                return
            t_next += -log(uniform(key, 3, j)) / lam_total
        if t >= t_max:
            tau_out[0] = NAN
            creep_out[0] = 0.0
            cls_out[0] = 0
            div_out[0] = div
            return


def path_key(uint64_t seed, uint64_t path_id):
    return mix64(mix64(seed) ^ ((path_id + 1) * GOLDEN))


def simulate_paths(double x0, double b, double c, double sigma, double delta, double q,
                   const double[::1] phase_cdf, const double[::1] phase_rate, double lam_total,
                   double dt, double t_max, uint64_t seed, int64_t first_path, bint bridge,
                   double[::1] div_out, double[::1] creep_out, double[::1] tau_out, int8_t[::1] cls_out):
    """Simulate paths ``first_path .. first_path + len(div_out) - 1``, writing per-path results."""
    cdef Py_ssize_t n = div_out.shape[0], i
    cdef uint64_t skey = mix64(seed), key
    with nogil:
        for i in range(n):
            key = mix64(skey ^ ((<uint64_t>(first_path + i) + 1) * GOLDEN))
            run_path(x0, b, c, sigma, delta, q, phase_cdf, phase_rate, lam_total, dt, t_max,
                     key, bridge, &div_out[i], &creep_out[i], &tau_out[i], &cls_out[i])
