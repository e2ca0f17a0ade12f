"""Pure-numpy versions of the compiled phasor sums in ``_kernels.pyx``."""
import numpy as np

_CHUNK_ELEMS = 1 << 21


def phasor_sum(z, coef, dk):
    z = np.ascontiguousarray(z, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    dk = np.ascontiguousarray(dk, dtype=float)
    out = np.empty(dk.size, dtype=complex)
    step = max(1, _CHUNK_ELEMS // max(z.size, 1))
    for s in range(0, dk.size, step):
        out[s:s + step] = np.exp(1j * np.outer(dk[s:s + step], z)) @ coef
    return out


def phasor_sum_uniform(z, coef, dk0, ddk, n):
    return phasor_sum(z, coef, dk0 + ddk * np.arange(n))
