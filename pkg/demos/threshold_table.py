"""Critical gamma for the uniform-convergence condition over a small grid of (lambda, k).

Run with ``python3 demos/threshold_table.py``.
"""

from gmcsim.criteria import ThresholdInput, critical_gamma, threshold_report

print(f"{'lambda':>6} {'k':>3} {'gamma_c':>9}")
for lam in (0.5, 1.0, 2.0):
    for k in (1, 2, 4):
        if k <= lam / 2:
            continue
        print(f"{lam:6.2f} {k:3d} {critical_gamma(lam, k, 2.0):9.5f}")

# one full report: alpha1 = 1, lambda = min(1, 2 * 0.5) = 1, k = 2
rep = threshold_report(ThresholdInput(1.0, 1.0, 0.5, 2, 0.25))
print("\nmcond at gamma 0.25:", rep["mcond"], f"(margin {rep['margin']:.4f})")
