"""The finite-difference harness: every op, the composed objective, and a
demonstration that a corrupted gradient rule is caught.

Run:  python demos/06_gradient_checking.py
"""

from trimodal.gradcheck import run_all

print("== quick pass over every op plus the end-to-end objective ==")
report = run_all(seed=0, instances=2)
worst_ops = sorted(report["ops"].items(), key=lambda kv: -kv[1])[:5]
print(f"pass: {report['pass']}  worst rel err: {report['worst']:.2e} "
      f"(tolerance {report['tolerance']})")
print("largest per-op errors:")
for name, err in worst_ops:
    print(f"  {name:<20} {err:.2e}")
print(f"  {'end-to-end':<20} {report['end_to_end']:.2e}")

print("\n== sabotage: scale matmul's backward by 1.02 ==")
bad = run_all(seed=0, instances=1, corrupt=("matmul", 1.02))
print(f"pass: {bad['pass']}  matmul error jumps to {bad['ops']['matmul']:.2e}")
print(f"unrelated op stays clean, e.g. relu: {bad['ops']['relu']:.2e}")

print("\nThe CLI form (exit code 1 on failure):  trimodal gradcheck --seed 0")
