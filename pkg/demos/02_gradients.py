"""Hand-written backward passes agree with finite differences."""

from compact_bilinear.gradcheck import METHODS, PASS_THRESHOLD, run_gradcheck

for method in METHODS:
    errs = run_gradcheck(method, c=8, d=16, seed=0)
    for name, err in errs.items():
        status = "PASS" if err < PASS_THRESHOLD else "FAIL"
        print(f"{method:12s} {name:4s} max rel err {err:.2e}  {status}")
