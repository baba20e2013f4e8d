"""Compact pooling approximates the bilinear kernel.

Two random descriptor grids are pooled exactly and with both compact methods.
The inner product of the compact features is an unbiased estimate of the
exact second-order kernel, and its error shrinks as the dimension grows.
"""

import numpy as np

from compact_bilinear import LocalDescriptorGrid, bilinear_pool, exact_kernel, gen_rm, gen_ts, rm_pool, ts_pool

rng = np.random.default_rng(0)
c, h, w = 32, 4, 4
x = LocalDescriptorGrid(np.abs(rng.normal(size=(1, h, w, c))))
y = LocalDescriptorGrid(np.abs(rng.normal(size=(1, h, w, c))))

exact = exact_kernel(x, y)
print(f"exact kernel           {exact:.2f}")
print(f"<B(x), B(y)>           {bilinear_pool(x).data[0] @ bilinear_pool(y).data[0]:.2f}")

# Average the estimate over a handful of projections to show the spread.
for d in (64, 256, 1024, 4096):
    for name, gen, fn in (("rm", gen_rm, rm_pool), ("ts", gen_ts, ts_pool)):
        est = []
        for seed in range(20):
            p = gen(c, d, seed)
            est.append(fn(x, p).data[0] @ fn(y, p).data[0])
        rel = np.abs(np.array(est) - exact) / exact
        print(f"{name} d={d:5d}  median relative error {np.median(rel):.4f}")
