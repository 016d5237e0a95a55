"""Pure-Python interval kernels.

Reference twin of ``_ckernels.pyx``; both evaluate the same arithmetic in the
same order so results agree to rounding.
"""
import numpy as np


def core_costs(usage, n_physical, alpha1, alpha2, alpha3, beta):
    n_cores = 2 * n_physical
    out = np.empty(n_cores, dtype=np.float64)
    for j in range(n_cores):
        sib = j + n_physical if j < n_physical else j - n_physical
        c = float(usage[j])
        if c > 0.0:
            out[j] = alpha1 + beta * c
        elif usage[sib] > 0.0:
            out[j] = alpha2
        else:
            out[j] = alpha3
    return out


def evaluate_vectors(masks, eff_demand, demand, link, noise, smt_share, noise_sigma,
                     sharpness, met_rtol, alpha1, alpha2, alpha3, beta):
    """Evaluate one decision interval under each activation mask.

    Returns ``(usage, served, met, energy, reward)`` with shapes
    ``(K, C)``, ``(K, n, 2)``, ``(K,)``, ``(K,)``, ``(K,)``.
    """
    masks = np.asarray(masks, dtype=np.uint8)
    n_rows, n_cores = masks.shape
    n_phys = n_cores // 2
    n_vbs = demand.shape[0]
    usage = np.zeros((n_rows, n_cores), dtype=np.float64)
    served = np.zeros((n_rows, n_vbs, 2), dtype=np.float64)
    met = np.zeros(n_rows, dtype=np.uint8)
    energy = np.zeros(n_rows, dtype=np.float64)
    reward = np.zeros(n_rows, dtype=np.float64)

    for k in range(n_rows):
        m = masks[k]
        cap = 0.0
        for j in range(n_cores):
            if m[j]:
                sib = j + n_phys if j < n_phys else j - n_phys
                cap += smt_share if m[sib] else 1.0
        d_eff = float(eff_demand[k])
        if d_eff > 0.0:
            u = d_eff / cap
            if u > 1.0:
                u = 1.0
            phi = cap / d_eff
        else:
            u = 0.0
            phi = 1.0
        for j in range(n_cores):
            if m[j]:
                c = u * (1.0 + noise_sigma * noise[j])
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
                dem = demand[i, s]
                lim = link[i, s]
                t = (dem if dem < lim else lim) * factor
                served[k, i, s] = t
                if t < dem * (1.0 - met_rtol):
                    ok = 0
        met[k] = ok
        total = 0.0
        for j in range(n_cores):
            sib = j + n_phys if j < n_phys else j - n_phys
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
    return usage, served, met, energy, reward
