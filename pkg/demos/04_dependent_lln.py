"""Law of large numbers for dependent identically distributed sequences.

Each path is a single draw of the long joint law; running averages of the
coordinate statistics converge to the marginal mean even though the steps
are dependent.  The fourth-moment tail bound decays like 1/k^2, so its
series is summable, which is the quantitative content behind almost-sure
convergence; the script checks the bound empirically and sums the series.
"""

from dgeo import lln

cfg = lln.SimConfig(q=1.5, d=1, v=(2.0,), k_max=10_000, reps=100, seed=42,
                    eps_grid=(0.25, 0.5, 1.0))

# --- running averages ---------------------------------------------------------
report = lln.run_lln(cfg)
print("median |average - 2| per checkpoint:")
for k, m in zip(report.k_schedule, report.median_deviation(0)):
    print(f"  k = {k:>6d}: {m:.5f}")

# --- tail bounds vs empirical exceedance ----------------------------------------
cfg500 = lln.SimConfig(q=1.5, d=1, v=(0.0,), k_max=1000, reps=500, seed=7,
                       eps_grid=(0.25, 0.5, 1.0))
table = lln.verify_bounds(cfg500)
print("\nexceedance vs bound (500 reps):")
for row in table.rows:
    print(f"  k={row.k:>5d} eps={row.eps:4.2f} freq={row.exceedance:6.3f} "
          f"bound={row.bound:9.3e} pass={row.passed}")
print("all cells pass:", table.all_pass)

# --- the Borel-Cantelli step ------------------------------------------------------
summ = lln.borel_cantelli_summability(cfg, eps=0.5)
print("\npartial sums of the bound series (eps = 0.5):")
for k, s in zip(summ.checkpoints, summ.partial_sums):
    print(f"  up to k = {k:>6d}: {s:.6f}")
print("terms * k^2 stay bounded:", summ.terms_times_k2[-1])
print("relative change over the last decade:", summ.final_relative_change)

# --- the independent baseline ------------------------------------------------------
cfg_g = lln.SimConfig(q=1.0, d=1, v=(2.0,), k_max=10_000, reps=100, seed=42)
report_g = lln.run_lln(cfg_g)
print("\nGaussian baseline medians (q = 1, i.i.d.):",
      [float(f"{m:.5f}") for m in report_g.median_deviation(0)])
