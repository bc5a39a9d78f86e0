import dataclasses
import math

import numpy as np
import pytest

from srsp.diagnostics import (
    RECORD_FIELDS,
    DiagnosticsRecord,
    conservation_report,
    gronwall_envelope,
    lipschitz_quotient,
    norm_equivalence_bounds,
    probe_lipschitz,
    record,
    relative_drift,
    verify_kinetic_bound,
    verify_norm_equivalence,
)
from srsp.ensemble import Ensemble, energy, mode_state, random_ensemble
from srsp.integrator import StepParams, run
from srsp.spectral import DomainSpec

DOM = DomainSpec((1.0,), (16,), 2)
BOX3 = DomainSpec((1.0, 0.8, 1.3), (4, 4, 4), 2)


class TestRecord:
    def test_fields(self):
        rec = record(mode_state(DOM, [1]), 0.5)
        assert tuple(f.name for f in dataclasses.fields(rec)) == RECORD_FIELDS
        assert rec.t == 0.5
        assert rec.mass == pytest.approx(1.0, abs=1e-15)
        assert rec.h1 == pytest.approx(math.pi, rel=1e-15)
        assert rec.energy_Tm == pytest.approx(energy(mode_state(DOM, [1]), "Tm"), rel=1e-15)
        assert rec.gram_defect <= 1e-15
        assert rec.density_min >= 0
        assert len(rec.as_row()) == len(RECORD_FIELDS)

    def test_deterministic_in_time_label(self):
        e = random_ensemble(DOM, 3, seed=5)
        a, b = record(e, 0.0), record(e, 7.0)
        assert dataclasses.replace(a, t=7.0) == b

    def test_uncoupled_energy_has_no_field_term(self):
        e = mode_state(DOM, [1], coupling=False)
        rec = record(e, 0.0)
        assert rec.potential_energy > 0
        assert rec.energy_Tm == pytest.approx(math.sqrt(math.pi ** 2 + 1) - 1, rel=1e-14)


class TestNormEquivalence:
    @pytest.mark.parametrize("dom", [DOM, BOX3])
    def test_no_violations(self, dom):
        rep = verify_norm_equivalence(dom, seed=1, trials=100)
        assert rep.passed, rep.summary()
        assert 1 <= rep.worst["min_ratio_h12"] and rep.worst["max_ratio_h12"] <= rep.bounds["bound_h12"] * (1 + 1e-12)

    def test_lowest_mode_attains(self):
        rep = verify_norm_equivalence(DomainSpec((1.0,), (8,), 2), trials=1)
        assert rep.worst["lowest_mode_ratio_h12"] == pytest.approx(math.sqrt(1 + 1 / math.pi), abs=1e-12)

    def test_bounds_in_3d(self):
        cp = sum((math.pi / L) ** 2 for L in BOX3.L)
        b_half, b_one = norm_equivalence_bounds(BOX3)
        assert b_half == pytest.approx(math.sqrt(1 + 1 / math.sqrt(cp)))
        assert b_one == pytest.approx(math.sqrt(1 + 1 / cp))

    def test_summary_mentions_seed_on_failure(self):
        rep = verify_norm_equivalence(DOM, seed=9, trials=2)
        rep.violations = 1
        assert "seed=9" in rep.summary()

    def test_trials_validated(self):
        with pytest.raises(ValueError):
            verify_norm_equivalence(DOM, trials=0)


class TestKineticBound:
    @pytest.mark.parametrize("m", [0.1, 1.0, 10.0])
    def test_holds(self, m):
        rep = verify_kinetic_bound(BOX3, m, seed=2, trials=100)
        assert rep.passed, rep.summary()
        assert rep.worst["max_ratio"] <= 1

    def test_massless_is_tight(self):
        rep = verify_kinetic_bound(DOM, 0.0, seed=0, trials=5)
        assert rep.worst["max_ratio"] == pytest.approx(1.0, abs=1e-12)


class TestLipschitz:
    def test_identical_pair(self):
        e = random_ensemble(DOM, 2, seed=3)
        assert lipschitz_quotient(e, e) == 0.0

    def test_zero_partner_is_scale_free(self):
        e = random_ensemble(DOM, 2, seed=3)
        zero = e.with_psi(np.zeros_like(e.psi))
        q = lipschitz_quotient(e, zero)
        assert lipschitz_quotient(e.scaled(7.0), zero) == pytest.approx(q, rel=1e-10)

    def test_scaling_law(self):
        rep = probe_lipschitz(DOM, seed=0, trials=10)
        assert set(rep.scaling_errors) == {2.0, 10.0}
        assert max(rep.scaling_errors.values()) <= 1e-10

    def test_sample_constant_stable(self):
        a = probe_lipschitz(DOM, seed=0, trials=100)
        b = probe_lipschitz(DOM, seed=1, trials=100)
        assert np.all(np.isfinite(a.quotients)) and a.max_quotient > 0
        assert abs(a.max_quotient / b.max_quotient - 1) <= 0.2
        assert "max_quotient" in a.summary()


class TestConservation:
    def test_relative_drift(self):
        assert relative_drift([2.0, 2.0, 2.0]) == 0.0
        assert relative_drift([2.0, 2.2, 1.9]) == pytest.approx(0.1)
        assert relative_drift([0.0, 1e-3]) == 1e-3

    def test_gronwall_envelope(self):
        t = np.linspace(0, 1, 11)
        slope, intercept = gronwall_envelope(t, np.exp(0.3 * t + 0.1))
        assert slope == pytest.approx(0.3)
        assert intercept == pytest.approx(0.1)

    def test_constant_records(self):
        rec = record(random_ensemble(DOM, 2, seed=0), 0.0)
        recs = [dataclasses.replace(rec, t=float(i)) for i in range(5)]
        rep = conservation_report(recs)
        assert all(v == 0 for v in rep.drifts.values())
        assert rep.gronwall_slope == pytest.approx(0.0, abs=1e-14)
        assert len(rep.lines()) == 6

    def test_free_run(self):
        recs = []
        run(random_ensemble(DOM, 2, seed=0, coupling=False), StepParams(1e-2, 100, cadence=10), recs.append)
        rep = conservation_report(recs)
        assert rep.drifts["mass"] <= 1e-13
        assert rep.drifts["energy_Tm"] <= 1e-12
        assert rep.conserved_energy == "Tm"
        assert rep.max_gram_defect <= 1e-13

    def test_needs_two_records(self):
        with pytest.raises(ValueError):
            conservation_report([])
        with pytest.raises(ValueError):
            conservation_report([record(mode_state(DOM, [1]), 0.0)])

    def test_zero_state(self):
        e = Ensemble(DOM, [1.0], np.zeros(DOM.grid_shape))
        rep = conservation_report([record(e, 0.0), record(e, 1.0)])
        assert rep.drifts["mass"] == 0.0

    def test_record_type(self):
        assert isinstance(record(mode_state(DOM, [2]), 0.0), DiagnosticsRecord)
