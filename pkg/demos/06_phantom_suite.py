"""All methods on the ten-implant suite, reported by implant size.

Run: python demos/06_phantom_suite.py  (about ten seconds)
"""
from dudomar import group_report
from dudomar.suite import run_suite

results = run_suite()
methods = list(results[0].images)
for method in methods:
    rows = group_report([(r.metal_size, *r.scores()[method]) for r in results], groups=2)
    cells = "  ".join(f"{row.psnr:5.2f}/{row.ssim:.3f}" for row in rows)
    print(f"{method:9s} {cells}")
print("columns:", ", ".join(row.label for row in rows))
