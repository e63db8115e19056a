import math

import numpy as np
import pytest

from conftest import tan_quad
from dgeo.errors import DomainError
from dgeo import lln
from dgeo import qgauss as qg


def cfg_15(**kw):
    base = dict(q=1.5, d=1, v=(0.0,), k_max=1000, reps=100, seed=11)
    base.update(kw)
    return lln.SimConfig(**base)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(DomainError):
        lln.SimConfig(q=3.5, d=1, v=(0.0,))
    with pytest.raises(DomainError):
        lln.SimConfig(q=1.5, d=1, v=(0.0, 1.0))
    with pytest.raises(DomainError):
        lln.SimConfig(q=1.5, d=1, v=(0.0,), reps=0)


def test_schedule_is_log_spaced():
    assert cfg_15(k_max=10_000).k_schedule() == [10, 100, 1000, 10000]
    assert cfg_15(k_max=2500).k_schedule() == [10, 100, 1000, 2500]
    assert cfg_15(k_max=5).k_schedule() == [5]


# ---------------------------------------------------------------------------
# run_lln
# ---------------------------------------------------------------------------


def test_reproducibility_bitwise():
    cfg = cfg_15()
    a = lln.run_lln(cfg)
    b = lln.run_lln(cfg)
    assert np.array_equal(a.averages, b.averages)
    assert a.averages_csv() == b.averages_csv()


def test_seed_changes_output():
    a = lln.run_lln(cfg_15(seed=1))
    b = lln.run_lln(cfg_15(seed=2))
    assert not np.array_equal(a.averages, b.averages)


def test_gaussian_baseline_classical_lln():
    cfg = lln.SimConfig(q=1.0, d=1, v=(0.0,), k_max=10_000, reps=100, seed=5)
    rep = lln.run_lln(cfg)
    sigma = math.sqrt(qg.central_second(qg.repetition(cfg.params(), 1), 0, 0))
    within = np.sum(rep.deviations[:, -1, 0] <= 4 * sigma / math.sqrt(cfg.k_max))
    assert within >= 95


def test_median_deviation_nonincreasing():
    cfg = lln.SimConfig(q=1.5, d=1, v=(2.0,), k_max=10_000, reps=100, seed=42)
    rep = lln.run_lln(cfg)
    med = rep.median_deviation(0)
    ks = rep.k_schedule
    idx = [ks.index(k) for k in (100, 1000, 10000)]
    vals = med[idx]
    assert vals[0] >= vals[1] >= vals[2]


def test_target_zero_for_centered_law():
    rep = lln.run_lln(cfg_15(v=(0.0,)))
    assert rep.targets[0] == 0.0


def test_prefix_law_moments():
    # first coordinate of the long joint behaves like the k=1 law
    cfg = cfg_15(k_max=100, reps=2000, seed=3)
    law = qg.repetition(cfg.params(), cfg.k_max)
    first = qg.sample_joint(law, cfg.reps, seed=17)[:, 0, 0]
    var = qg.central_second(qg.repetition(cfg.params(), 1), 0, 0)
    se_mean = math.sqrt(var / cfg.reps)
    assert abs(first.mean()) <= 4 * se_mean
    c4 = qg.central_fourth(qg.repetition(cfg.params(), 1), 0, 0, 0, 0)
    se_var = math.sqrt((c4 - var ** 2) / cfg.reps)
    assert abs(first.var() - var) <= 4 * se_var


def test_q1_machinery_reduces_to_iid_gaussian():
    # with q = 1 the path sampler consumes the stream exactly like a plain
    # i.i.d. Gaussian draw (no mixing variable), so outputs coincide
    cfg = lln.SimConfig(q=1.0, d=1, v=(0.3,), k_max=50, reps=1, seed=21)
    law = qg.repetition(cfg.params(), cfg.k_max)
    child = np.random.SeedSequence(cfg.seed).spawn(cfg.reps)[0]
    path = qg.sample_joint(law, 1, np.random.default_rng(child))[0]
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
    sigma = math.sqrt(1.0 / (2.0 * law.beta_k))
    direct = 0.3 + sigma * rng.standard_normal((cfg.k_max, 1))
    assert np.allclose(path, direct, rtol=0, atol=1e-15)


def test_exceedance_frequencies_in_unit_interval():
    rep = lln.run_lln(cfg_15(reps=100, k_max=100))
    for eps in (0.01, 0.5, 10.0):
        freqs = rep.exceedance(eps)
        assert np.all((freqs >= 0) & (freqs <= 1))
    assert np.all(rep.exceedance(10.0) == 0.0)


def test_trace_variant_statistics():
    cfg = lln.SimConfig(q=1.2, d=2, v=(0.5, -0.5), variant="trace_d",
                        k_max=100, reps=100, seed=9)
    rep = lln.run_lln(cfg)
    assert rep.stat_labels == ["F1", "F2", "F11", "F12", "F22"]
    law1 = qg.repetition(cfg.params(), 1)
    assert rep.targets[2] == pytest.approx(0.25 + qg.central_second(law1, 0, 0))
    assert rep.targets[3] == pytest.approx(-0.25 + qg.central_second(law1, 0, 1))


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def test_bound_scaling_in_eps():
    cfg = cfg_15()
    b1 = lln.chebyshev_bounds(cfg, 100, 0.5)
    b2 = lln.chebyshev_bounds(cfg, 100, 0.25)
    assert b2.bound_F / b1.bound_F == pytest.approx(16.0, rel=1e-12)
    assert b2.bound_FF / b1.bound_FF == pytest.approx(4.0, rel=1e-12)


def test_bound_F_decays_like_k_minus_2():
    cfg = cfg_15()
    b1 = lln.chebyshev_bounds(cfg, 10_000, 0.5).bound_F
    b2 = lln.chebyshev_bounds(cfg, 100_000, 0.5).bound_F
    assert b1 / b2 == pytest.approx(100.0, rel=1e-2)


def test_bound_moments_match_quadrature_recomputation():
    # recompute the two fourth-moment ingredients by direct quadrature
    cfg = cfg_15()
    law1 = qg.repetition(cfg.params(), 1)
    law2 = qg.repetition(cfg.params(), 2)
    ey4 = tan_quad(lambda x: x ** 4 * qg.joint_density(law1, np.array([[[x]]]))[0])
    from scipy import integrate
    ey22, _ = integrate.dblquad(
        lambda u1, u2: math.tan(u1) ** 2 * math.tan(u2) ** 2
        * qg.joint_density(law2, np.array([[[math.tan(u1)], [math.tan(u2)]]]))[0]
        / math.cos(u1) ** 2 / math.cos(u2) ** 2,
        -math.pi / 2, math.pi / 2, -math.pi / 2, math.pi / 2, epsabs=1e-11)
    k, eps = 100, 0.5
    oracle = ey4 / (k ** 3 * eps ** 4) + 3 * (k - 1) * ey22 / (k ** 3 * eps ** 4)
    b = lln.chebyshev_bounds(cfg, k, eps).bound_F
    assert b == pytest.approx(oracle, rel=1e-6)


def test_bound_FF_vanishing_cross_term_at_q1():
    cfg = lln.SimConfig(q=1.0, d=1, v=(0.0,), k_max=100, reps=100, seed=0)
    law2 = qg.repetition(cfg.params(), 2)
    assert qg.fij_pair_moments(law2)[1] == pytest.approx(0.0, abs=1e-14)


def test_wilson_interval_basic():
    lo, hi = lln.wilson_interval(0, 500)
    assert lo == 0.0
    assert 0 < hi < 0.02
    lo, hi = lln.wilson_interval(250, 500)
    assert lo < 0.5 < hi


# ---------------------------------------------------------------------------
# verify_bounds
# ---------------------------------------------------------------------------


def test_verify_bounds_all_pass():
    cfg = lln.SimConfig(q=1.5, d=1, v=(0.0,), k_max=1000, reps=500, seed=7,
                        eps_grid=(0.25, 0.5, 1.0))
    table = lln.verify_bounds(cfg)
    assert table.all_pass
    ks = {r.k for r in table.rows}
    assert ks == {10, 100, 1000}


def test_verify_bounds_trivial_pass_when_bound_capped():
    cfg = cfg_15(reps=100, eps_grid=(0.01,), k_max=10)
    table = lln.verify_bounds(cfg)
    assert all(r.bound == 1.0 for r in table.rows)
    assert table.all_pass


def test_verify_bounds_gaussian_baseline():
    cfg = lln.SimConfig(q=1.0, d=1, v=(0.0,), k_max=1000, reps=200, seed=13,
                        eps_grid=(0.25, 0.5))
    assert lln.verify_bounds(cfg).all_pass


def test_verify_bounds_requires_enough_reps():
    with pytest.raises(DomainError):
        lln.verify_bounds(cfg_15(reps=99))


def test_trace_variant_rows_carry_note():
    cfg = lln.SimConfig(q=1.2, d=2, v=(0.0, 0.0), variant="trace_d",
                        k_max=100, reps=100, seed=2, eps_grid=(0.5,))
    table = lln.verify_bounds(cfg)
    notes = {r.stat: r.note for r in table.rows}
    assert notes["F1"] == ""
    assert "no almost-sure guarantee" in notes["F11"]


def test_bound_table_csv_shape():
    cfg = cfg_15(reps=100, eps_grid=(0.5,))
    table = lln.verify_bounds(cfg)
    csv = table.to_csv()
    assert csv.splitlines()[0].startswith("k,eps,stat")
    assert len(csv.splitlines()) == len(table.rows) + 1


# ---------------------------------------------------------------------------
# summability
# ---------------------------------------------------------------------------


def test_summability_terms_decay_like_k2():
    s = lln.borel_cantelli_summability(cfg_15(), 0.5)
    assert np.all(np.isfinite(s.terms_times_k2))
    spread = np.max(s.terms_times_k2[1:]) - np.min(s.terms_times_k2[1:])
    assert spread <= 0.05 * np.max(s.terms_times_k2)


def test_summability_partial_sums_converge():
    s = lln.borel_cantelli_summability(cfg_15(), 0.5, k_terms=100_000)
    assert s.final_relative_change <= 1e-3
    assert np.all(np.diff(s.partial_sums) >= 0)


def test_summability_monotone_in_eps():
    s_small = lln.borel_cantelli_summability(cfg_15(), 0.5)
    s_big = lln.borel_cantelli_summability(cfg_15(), 1.0)
    assert np.all(s_big.partial_sums < s_small.partial_sums)
