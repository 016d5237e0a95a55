# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled interval kernels; see ``_pykernels`` for the reference twin."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline int _sib(int j, int n_phys) noexcept nogil:
    return j + n_phys if j < n_phys else j - n_phys


def core_costs(double[::1] usage, int n_physical, double alpha1, double alpha2,
               double alpha3, double beta):
    cdef int n_cores = 2 * n_physical
    out_arr = np.empty(n_cores, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef int j, sib
    cdef double c
    for j in range(n_cores):
        sib = _sib(j, n_physical)
        c = usage[j]
        if c > 0.0:
            out[j] = alpha1 + beta * c
        elif usage[sib] > 0.0:
            out[j] = alpha2
        else:
            out[j] = alpha3
    return out_arr


def evaluate_vectors(masks, eff_demand, demand, link, noise, double smt_share,
                     double noise_sigma, double sharpness, double met_rtol,
                     double alpha1, double alpha2, double alpha3, double beta):
    cdef const cnp.uint8_t[:, ::1] m = np.ascontiguousarray(masks, dtype=np.uint8)
    cdef const double[::1] deff = np.ascontiguousarray(eff_demand, dtype=np.float64)
    cdef const double[:, ::1] dem = np.ascontiguousarray(demand, dtype=np.float64)
    cdef const double[:, ::1] lnk = np.ascontiguousarray(link, dtype=np.float64)
    cdef const double[::1] xi = np.ascontiguousarray(noise, dtype=np.float64)
    cdef int n_rows = m.shape[0]
    cdef int n_cores = m.shape[1]
    cdef int n_phys = n_cores // 2
    cdef int n_vbs = dem.shape[0]

    usage_arr = np.zeros((n_rows, n_cores), dtype=np.float64)
    served_arr = np.zeros((n_rows, n_vbs, 2), dtype=np.float64)
    met_arr = np.zeros(n_rows, dtype=np.uint8)
    energy_arr = np.zeros(n_rows, dtype=np.float64)
    reward_arr = np.zeros(n_rows, dtype=np.float64)
    cdef double[:, ::1] usage = usage_arr
    cdef double[:, :, ::1] served = served_arr
    cdef cnp.uint8_t[::1] met = met_arr
    cdef double[::1] energy = energy_arr
    cdef double[::1] reward = reward_arr

    cdef int k, j, i, s, sib, ok
    cdef double cap, d_eff, u, phi, c, factor, d, lim, t, total, e

    with nogil:
        for k in range(n_rows):
            cap = 0.0
            for j in range(n_cores):
                if m[k, j]:
                    sib = _sib(j, n_phys)
                    if m[k, sib]:
                        cap += smt_share
                    else:
                        cap += 1.0
            d_eff = deff[k]
            if d_eff > 0.0:
                u = d_eff / cap
                if u > 1.0:
                    u = 1.0
                phi = cap / d_eff
            else:
                u = 0.0
                phi = 1.0
            for j in range(n_cores):
                if m[k, j]:
                    c = u * (1.0 + noise_sigma * xi[j])
                    if c < 0.0:
                        c = 0.0
                    elif c > 1.0:
                        c = 1.0
                    usage[k, j] = c
            if phi >= 1.0:
                factor = 1.0
            else:
                factor = 1.0 - sharpness * (1.0 - phi)
                if factor < 0.0:
                    factor = 0.0
            ok = 1
            for i in range(n_vbs):
                for s in range(2):
                    d = dem[i, s]
                    lim = lnk[i, s]
                    t = (d if d < lim else lim) * factor
                    served[k, i, s] = t
                    if t < d * (1.0 - met_rtol):
                        ok = 0
            met[k] = ok
            total = 0.0
            for j in range(n_cores):
                sib = _sib(j, n_phys)
                c = usage[k, j]
                if c > 0.0:
                    total += alpha1 + beta * c
                elif usage[k, sib] > 0.0:
                    total += alpha2
                else:
                    total += alpha3
            e = total / n_cores
            energy[k] = e
            reward[k] = -e if ok else -1.0
    return usage_arr, served_arr, met_arr, energy_arr, reward_arr
