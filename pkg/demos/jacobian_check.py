# python3 demos/jacobian_check.py
#
# Analytic vs finite-difference Jacobian of the pooling block, and how the
# finite-difference error scales with the step.

import numpy as np

from dancerecal.pooling import (
    init_params,
    jacobian_relative_error,
    pooling_jacobian_analytic,
    pooling_jacobian_fd,
)


def run():
    params = init_params(42)
    pair = np.random.default_rng(42).normal(size=(2, 126))
    J = pooling_jacobian_analytic(pair, params)
    print(f"Jacobian shape {J.shape}, |J|max = {np.abs(J).max():.3f}")
    # layer norm couples every input entry, so the Jacobian is dense
    print(f"nonzeros per row: {np.count_nonzero(J, axis=1).mean():.0f} of {J.shape[1]}\n")

    print(f"{'eps':>8} {'max abs err':>12} {'rel err':>10}")
    for eps in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7):
        N = pooling_jacobian_fd(pair, params, eps)
        print(f"{eps:>8.0e} {np.abs(N - J).max():>12.2e} {jacobian_relative_error(J, N):>10.2e}")
    # truncation error falls as eps^2 until roundoff (~1e-16 / eps) takes over


if __name__ == "__main__":
    run()
