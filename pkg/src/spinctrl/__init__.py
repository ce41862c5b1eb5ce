"""Control of spin-1 condensate dynamics: exact simulators, PPO, baselines."""

import os

# All matrices in this package are tiny (dims <= a few hundred); threaded
# BLAS only adds synchronization cost and must be pinned before numpy loads.
# Respect any limits the user already set.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
