"""Pure-numpy ADMM iteration kernel (fallback for the compiled one).

Both kernels implement the same operator-splitting iteration on the scaled
problem

    min 1/2 x'Px + q'x   s.t.   lo <= Ax <= up,

given the Cholesky factor ``L`` (lower, Fortran order) of
P + sigma*I + A' diag(rho) A.  One call advances ``n_iter`` iterations and
returns the new iterates plus the last-iteration increments (used by the
caller for infeasibility detection).
"""
import numpy as np
from scipy.linalg.lapack import dpotrs

KERNEL_NAME = "numpy"


def admm_batch(L, A, At, q, lo, up, rho, rho_inv, sigma, alpha, x, z, y, n_iter):
    """Run ``n_iter`` ADMM iterations; returns (x, z, y, dx, dy)."""
    dx = np.zeros_like(x)
    dy = np.zeros_like(y)
    for _ in range(n_iter):
        rhs = sigma * x - q + At @ (rho * z - y)
        xt, info = dpotrs(L, rhs, lower=1)
        if info != 0:  # pragma: no cover - factor is checked at prepare time
            raise np.linalg.LinAlgError("dpotrs failed with info=%d" % info)
        zt = A @ xt
        x_new = alpha * xt + (1.0 - alpha) * x
        ztmp = alpha * zt + (1.0 - alpha) * z + rho_inv * y
        z_new = np.clip(ztmp, lo, up)
        y_new = rho * (ztmp - z_new)
        np.subtract(x_new, x, out=dx)
        np.subtract(y_new, y, out=dy)
        x, z, y = x_new, z_new, y_new
    return x, z, y, dx, dy
