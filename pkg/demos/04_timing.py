"""Forward/backward cost and parameter memory of the three pooling methods."""

from compact_bilinear import gen_rm, gen_ts
from compact_bilinear.experiments import bench

c, h, w = 256, 13, 13
print(f"c={c}, {h}x{w} grid, median of 7 reps")
for method, d in (("bilinear", None), ("rm", 4096), ("ts", 4096), ("ts", 8192)):
    r = bench(method, c, d, h, w, reps=7)
    print(f"{method:8s} d={r.d:6d}  forward {r.forward_s * 1e3:7.2f} ms  backward {r.backward_s * 1e3:7.2f} ms")

print(f"rm parameters at d=4096: {gen_rm(c, 4096, 0).nbytes() / 2**20:.1f} MiB")
print(f"ts parameters at d=4096: {gen_ts(c, 4096, 0).nbytes() / 2**10:.1f} KiB")
