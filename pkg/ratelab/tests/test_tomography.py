"""Tests for sampling, maximum-likelihood estimation and consistency runs."""

import numpy as np
import pytest

from ratelab.channels import ParameterSlice, sample_distribution
from ratelab.errors import DomainError
from ratelab.oneway import eve_ambiguity
from ratelab.tomography import (
    MODES,
    SampleSet,
    consistency_report,
    draw_samples,
    estimated_ambiguity,
    eta_hat,
    linear_model,
    log_likelihood,
    ml_estimate,
    moment_estimate,
    slice_violation,
)


def exact_samples(choi, protocol, m=1e6):
    return SampleSet(protocol=protocol, counts=m * sample_distribution(choi, protocol))


class TestDrawSamples:
    def test_deterministic(self, rotated):
        a = draw_samples(rotated, "sixstate", 500, 7)
        b = draw_samples(rotated, "sixstate", 500, 7)
        c = draw_samples(rotated, "sixstate", 500, 8)
        assert np.array_equal(a.counts, b.counts)
        assert not np.array_equal(a.counts, c.counts)
        assert a.m == 500

    def test_identity_never_disagrees(self, identity):
        for seed in (1, 2, 3):
            samples = draw_samples(identity, "bb84", 2000, seed)
            assert samples.count(0, "z", 1, "z") == 0
            assert samples.count(1, "x", 0, "x") == 0

    def test_rejects_empty(self, identity):
        with pytest.raises(DomainError):
            draw_samples(identity, "bb84", 0, 1)

    def test_rejects_negative_counts(self):
        counts = np.zeros(16)
        counts[0] = -1
        with pytest.raises(DomainError):
            SampleSet("bb84", counts)


class TestSampleFiles:
    def test_csv_round_trip(self, tmp_path, depolarizing):
        samples = draw_samples(depolarizing, "sixstate", 300, 11)
        path = tmp_path / "samples.csv"
        samples.to_csv(str(path))
        again = SampleSet.from_csv(str(path))
        assert again.protocol == "sixstate"
        assert np.array_equal(again.counts, samples.counts)
        assert path.read_text().splitlines()[0] == "x,basisA,y,basisB,count"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(DomainError):
            SampleSet.from_csv(str(path))

    def test_bad_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,basisA,y,basisB,count\n0,z,2,z,5\n")
        with pytest.raises(DomainError):
            SampleSet.from_csv(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DomainError):
            SampleSet.from_csv(str(tmp_path / "nope.csv"))


class TestLinearModel:
    @pytest.mark.parametrize("mode", sorted(MODES))
    def test_probabilities_normalised(self, rng, mode):
        model = linear_model(mode)
        theta = rng.uniform(-0.3, 0.3, size=len(model.keys))
        assert model.probabilities(theta).sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("mode", sorted(MODES))
    def test_matches_channel(self, rotated, mode):
        protocol, kind = MODES[mode]
        model = linear_model(mode)
        theta = ParameterSlice.of(kind, rotated).observed
        folded = model.fold @ sample_distribution(rotated, protocol).ravel()
        assert np.allclose(model.probabilities(theta), folded, atol=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            linear_model("quantum-guess")

    def test_slice_violation(self):
        assert slice_violation("degraded-gamma", [0.8, 0.8, 0.8]) == 0.0
        assert slice_violation("degraded-gamma", [1.0, 1.0, -1.0]) > 0
        assert slice_violation("degraded-upsilon", [0.5, 0.5]) == 0.0


class TestMaximumLikelihood:
    @pytest.mark.parametrize("mode,fixture", [
        ("full-sixstate", "depolarizing"),
        ("bb84-omega", "rotated"),
        ("degraded-gamma", "depolarizing"),
        ("degraded-upsilon", "rotated"),
    ])
    def test_exact_counts_recover_truth(self, request, mode, fixture):
        choi = request.getfixturevalue(fixture)
        protocol, kind = MODES[mode]
        report = ml_estimate(exact_samples(choi, protocol), mode)
        truth = ParameterSlice.of(kind, choi).observed
        assert report.theta == pytest.approx(truth, abs=1e-6)
        assert report.log_likelihood >= report.initial_log_likelihood

    def test_moment_estimate_exact(self, rotated):
        theta = moment_estimate(exact_samples(rotated, "sixstate"), "full-sixstate")
        assert theta == pytest.approx(ParameterSlice.of("full", rotated).observed, abs=1e-9)

    def test_sampled_error_rate(self, depolarizing):
        samples = draw_samples(depolarizing, "sixstate", 100_000, 42)
        report = ml_estimate(samples, "degraded-gamma")
        e_hat = (1 - report.params["Rzz"]) / 2
        assert abs(e_hat - 0.1) < 0.01

    def test_likelihood_improves(self, amplitude_damping):
        samples = draw_samples(amplitude_damping, "bb84", 5000, 3)
        report = ml_estimate(samples, "bb84-omega")
        assert report.log_likelihood >= report.initial_log_likelihood
        assert report.log_likelihood == pytest.approx(log_likelihood(samples, "bb84-omega", report.theta))
        assert slice_violation("bb84-omega", report.theta) <= 1e-9

    def test_mode_protocol_mismatch(self, depolarizing):
        samples = draw_samples(depolarizing, "bb84", 100, 1)
        with pytest.raises(DomainError):
            ml_estimate(samples, "full-sixstate")

    def test_report_dict(self, depolarizing):
        report = ml_estimate(exact_samples(depolarizing, "sixstate"), "degraded-gamma")
        data = report.to_dict()
        assert data["mode"] == "degraded-gamma"
        assert set(data["estimate"]) == {"Rzz", "Rxx", "Ryy"}


class TestAmbiguityEstimates:
    def test_plug_in(self, depolarizing):
        report = ml_estimate(exact_samples(depolarizing, "sixstate"), "full-sixstate")
        assert estimated_ambiguity(report) == pytest.approx(eve_ambiguity(depolarizing), abs=1e-5)

    def test_eta(self, depolarizing):
        report = ml_estimate(exact_samples(depolarizing, "sixstate"), "degraded-gamma")
        small = eta_hat(report, 1e-3)
        assert 0.0 <= small < 0.05
        assert eta_hat(report, 0.05) >= 0.0

    def test_eta_rejects_alpha(self, depolarizing):
        report = ml_estimate(exact_samples(depolarizing, "sixstate"), "degraded-gamma")
        with pytest.raises(DomainError):
            eta_hat(report, 0.0)


class TestConsistency:
    def test_large_samples_succeed(self, depolarizing):
        rows = consistency_report(depolarizing, "degraded-gamma", 0.2, [20_000], trials=3, seed=5)
        assert len(rows) == 1
        assert rows[0].m == 20_000
        assert rows[0].failures == 0
        assert rows[0].mu_hat == 0.0

    def test_threads_match_serial(self, depolarizing):
        serial = consistency_report(depolarizing, "degraded-gamma", 0.05, [200], trials=4, seed=9)
        threaded = consistency_report(depolarizing, "degraded-gamma", 0.05, [200], trials=4, seed=9, threads=2)
        assert serial == threaded

    def test_rejects_bad_arguments(self, depolarizing):
        with pytest.raises(DomainError):
            consistency_report(depolarizing, "degraded-gamma", 0.1, [100], trials=0, seed=1)
        with pytest.raises(DomainError):
            consistency_report(depolarizing, "degraded-gamma", 0.0, [100], trials=1, seed=1)
