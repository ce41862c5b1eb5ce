import os

# Pin BLAS threading before numpy loads anywhere (spinctrl does the same);
# keeps small-matrix math fast and runs bit-reproducible.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
