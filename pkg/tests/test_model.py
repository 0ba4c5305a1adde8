"""Core-model unit and property tests.

Frozen expected values were computed independently with a 50-digit mpmath
script before the implementation existed.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threepath.model import (
    ALL_COMBINATIONS,
    PAIR_AB,
    PAIR_AC,
    PAIR_BC,
    TRIPLE_ABC,
    DegenerateNormalizationError,
    DetectorModel,
    InterferometerConfig,
    InverseRangeError,
    PathSet,
    PhasePlateGeometry,
    PhasePoint,
    SaturationError,
    SumRuleInputs,
    combination_rates,
    delta,
    detector_forward,
    detector_inverse,
    epsilon,
    incident_rate,
    kappa,
    plate_angle_to_phase,
)

# frozen by the independent high-precision oracle
R_ABC_FIG = 27592.89651145993          # (sqrt(2080)+sqrt(5760)+sqrt(1990))^2
F_1E6 = 955368.9090122278              # forward(1e6) at tau=47ns, R0=284
F_DARK = 283.99620921859935            # forward(0) at tau=47ns, R0=284
PLATE_PHI_01 = 23.607802639730005      # theta=0.1 rad, d=0.9mm, 800nm, n=1/1.5
PLATE_PHI_002 = 0.94255110265135084    # theta=0.02 rad, same geometry

rates = st.floats(0.0, 1e6)
phases = st.floats(0.0, 2 * math.pi, exclude_max=True)
visibilities = st.floats(0.0, 1.0)


def configs(vis=st.just(1.0)):
    return st.builds(
        InterferometerConfig,
        rate_a=rates, rate_b=rates, rate_c=rates,
        phase=st.builds(PhasePoint, phi_a=phases, phi_c=phases),
        visibility_ab=vis, visibility_ac=vis, visibility_bc=vis,
    )


class TestPathSet:
    def test_exactly_eight_distinct_values(self):
        assert len(ALL_COMBINATIONS) == 8
        assert len(set(ALL_COMBINATIONS)) == 8
        assert PathSet.NONE in ALL_COMBINATIONS

    def test_labels_round_trip(self):
        for paths in ALL_COMBINATIONS:
            assert PathSet.from_label(paths.label) == paths
        assert PathSet.from_label("CAB") == TRIPLE_ABC
        assert (PathSet.A | PathSet.C).label == "AC"
        assert PathSet.NONE.label == "none"

    def test_bad_label_rejected(self):
        with pytest.raises(ValueError):
            PathSet.from_label("AD")

    def test_singles(self):
        assert TRIPLE_ABC.singles() == (PathSet.A, PathSet.B, PathSet.C)
        assert PathSet.NONE.singles() == ()


class TestValidation:
    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            InterferometerConfig(rate_a=-1.0, rate_b=0.0, rate_c=0.0)

    def test_nonfinite_rate_rejected(self):
        with pytest.raises(ValueError):
            InterferometerConfig(rate_a=math.inf, rate_b=0.0, rate_c=0.0)

    def test_visibility_range(self):
        with pytest.raises(ValueError):
            InterferometerConfig(1.0, 1.0, 1.0, visibility_ab=1.5)

    def test_detector_ranges(self):
        with pytest.raises(ValueError):
            DetectorModel(dead_time=-1e-9)
        with pytest.raises(ValueError):
            DetectorModel(efficiency=0.0)
        with pytest.raises(ValueError):
            DetectorModel(efficiency=1.2)

    def test_sum_rule_inputs_shape(self):
        with pytest.raises(ValueError):
            SumRuleInputs((1.0,) * 7)
        with pytest.raises(ValueError):
            SumRuleInputs((1.0,) * 7 + (-1.0,))
        with pytest.raises(ValueError):
            SumRuleInputs.from_mapping({PathSet.NONE: 0.0})

    def test_plate_geometry(self):
        with pytest.raises(ValueError):
            PhasePlateGeometry(thickness=0.0, wavelength=800e-9)
        with pytest.raises(ValueError):
            PhasePlateGeometry(thickness=1e-3, wavelength=800e-9,
                               n_air=1.5, n_glass=1.0)


class TestIncidentRate:
    def test_empty_set_is_zero(self, fig_config):
        assert incident_rate(fig_config, PathSet.NONE) == 0.0

    def test_destructive_two_path(self):
        config = InterferometerConfig(1.0, 1.0, 0.0, phase=PhasePoint(phi_a=math.pi))
        assert incident_rate(config, PAIR_AB) == pytest.approx(0.0, abs=1e-12)

    def test_three_path_constructive_value(self, fig_config):
        got = incident_rate(fig_config, TRIPLE_ABC)
        assert got == pytest.approx(R_ABC_FIG, rel=1e-12)

    @given(config=configs())
    def test_matches_written_out_formulas(self, config):
        a, b, c = config.rate_a, config.rate_b, config.rate_c
        pa, pc = config.phase.phi_a, config.phase.phi_c
        r_ab = a + b + 2 * math.sqrt(a * b) * math.cos(pa)
        r_abc = (a + b + c
                 + 2 * math.sqrt(a * b) * math.cos(pa)
                 + 2 * math.sqrt(a * c) * math.cos(pa - pc)
                 + 2 * math.sqrt(b * c) * math.cos(-pc))
        assert incident_rate(config, PAIR_AB) == pytest.approx(r_ab, rel=1e-12, abs=1e-9)
        assert incident_rate(config, TRIPLE_ABC) == pytest.approx(r_abc, rel=1e-12, abs=1e-9)

    @given(config=configs(vis=visibilities))
    def test_rates_never_negative(self, config):
        for paths in ALL_COMBINATIONS:
            assert incident_rate(config, paths) >= -1e-9

    @given(config=configs(vis=visibilities))
    def test_two_pi_periodic(self, config):
        shifted = InterferometerConfig(
            config.rate_a, config.rate_b, config.rate_c,
            phase=PhasePoint(config.phase.phi_a + 2 * math.pi,
                             config.phase.phi_c - 2 * math.pi),
            visibility_ab=config.visibility_ab,
            visibility_ac=config.visibility_ac,
            visibility_bc=config.visibility_bc,
        )
        for paths in ALL_COMBINATIONS:
            # exact up to the float rounding of phi + 2pi itself
            assert incident_rate(shifted, paths) == pytest.approx(
                incident_rate(config, paths), rel=1e-12, abs=1e-7)


class TestDetectorTransfer:
    def test_linear_limit(self):
        model = DetectorModel(dead_time=0.0, dark_rate=100.0, efficiency=0.5)
        assert detector_forward(2000.0, model) == 0.5 * 2000.0 + 100.0

    def test_forward_frozen_values(self, apd):
        assert detector_forward(1e6, apd) == pytest.approx(F_1E6, rel=1e-12)
        assert detector_forward(0.0, apd) == pytest.approx(F_DARK, rel=1e-12)

    def test_inverse_frozen_value(self, apd):
        assert detector_inverse(F_1E6, apd) == pytest.approx(1e6, rel=1e-12)

    @given(r=st.floats(0.0, 0.9 / 47e-9))
    def test_round_trip(self, r):
        model = DetectorModel(dead_time=47e-9, dark_rate=284.0)
        assert detector_inverse(detector_forward(r, model), model) == pytest.approx(
            r, rel=1e-9, abs=1e-6)

    @given(r=st.floats(0.0, 1e12), tau=st.floats(1e-12, 1e-3),
           r0=st.floats(0.0, 1e4))
    def test_saturation_bound(self, r, tau, r0):
        model = DetectorModel(dead_time=tau, dark_rate=r0)
        assert detector_forward(r, model) < 1.0 / tau

    @given(r1=st.floats(0.0, 1e7), r2=st.floats(0.0, 1e7))
    def test_monotone(self, r1, r2):
        model = DetectorModel(dead_time=47e-9, dark_rate=284.0)
        lo, hi = sorted((r1, r2))
        assert detector_forward(lo, model) <= detector_forward(hi, model)

    def test_inverse_saturation_error(self, apd):
        with pytest.raises(SaturationError):
            detector_inverse(1.0 / 47e-9, apd)
        with pytest.raises(SaturationError):
            detector_inverse(2.0 / 47e-9, apd)

    def test_inverse_below_dark_floor(self, apd):
        with pytest.raises(InverseRangeError):
            detector_inverse(100.0, apd)

    def test_inverse_at_dark_floor_is_zero(self, apd):
        assert detector_inverse(detector_forward(0.0, apd), apd) == 0.0

    def test_inverse_linear_detector(self):
        model = DetectorModel(dead_time=0.0, dark_rate=50.0)
        assert detector_inverse(150.0, model) == pytest.approx(100.0, rel=1e-12)
        with pytest.raises(InverseRangeError):
            detector_inverse(10.0, model)


def _detected_inputs(config, model):
    return SumRuleInputs.from_mapping({
        paths: detector_forward(rate, model)
        for paths, rate in combination_rates(config).items()
    })


class TestSumRuleStatistics:
    def test_constant_rates_cancel(self):
        inputs = SumRuleInputs((123.25,) * 8)
        assert epsilon(inputs) == 0.0
        assert delta(inputs) == 0.0
        with pytest.raises(DegenerateNormalizationError):
            kappa(inputs)

    @given(config=configs())
    def test_born_nullity_linear_detector(self, config):
        inputs = SumRuleInputs.from_mapping(combination_rates(config))
        scale = max(inputs.rate(TRIPLE_ABC), 1.0)
        assert abs(epsilon(inputs)) <= 1e-10 * scale

    @given(config=configs(vis=visibilities))
    def test_visibility_independence(self, config):
        inputs = SumRuleInputs.from_mapping(combination_rates(config))
        scale = max(sum(inputs.rates), 1.0)
        assert abs(epsilon(inputs)) <= 1e-10 * scale

    @given(base=st.lists(st.integers(0, 10**9), min_size=8, max_size=8),
           c=st.integers(0, 10**9))
    def test_background_cancellation_exact_on_integers(self, base, c):
        # integer-valued doubles keep the signed sum exact, so the analytic
        # cancellation is visible bitwise
        inputs = SumRuleInputs(tuple(float(v) for v in base))
        shifted = SumRuleInputs(tuple(float(v + c) for v in base))
        assert epsilon(shifted) == epsilon(inputs)

    @given(config=configs(), c=st.floats(0.0, 1e6))
    def test_background_cancellation_float(self, config, c):
        inputs = SumRuleInputs.from_mapping(combination_rates(config))
        shifted = SumRuleInputs(tuple(r + c for r in inputs.rates))
        scale = max(sum(inputs.rates), c, 1.0)
        assert abs(epsilon(shifted) - epsilon(inputs)) <= 1e-10 * scale

    def test_delta_constructive_closed_form(self, fig_config):
        inputs = SumRuleInputs.from_mapping(combination_rates(fig_config))
        a, b, c = 2080.0, 5760.0, 1990.0
        expected = 2 * (math.sqrt(a * b) + math.sqrt(a * c) + math.sqrt(b * c))
        assert delta(inputs) == pytest.approx(expected, rel=1e-12)

    def test_delta_zero_for_incoherent_paths(self, fig_config):
        config = InterferometerConfig(
            fig_config.rate_a, fig_config.rate_b, fig_config.rate_c,
            visibility_ab=0.0, visibility_ac=0.0, visibility_bc=0.0)
        inputs = SumRuleInputs.from_mapping(combination_rates(config))
        assert delta(inputs) == pytest.approx(0.0, abs=1e-9)

    def test_born_kappa_zero_linear_detector(self, fig_config):
        inputs = SumRuleInputs.from_mapping(combination_rates(fig_config))
        assert abs(kappa(inputs)) < 1e-12

    def test_dead_time_makes_epsilon_negative_at_maximum(self, fig_config, apd):
        # concave response at the all-constructive point
        inputs = _detected_inputs(fig_config, apd)
        assert epsilon(inputs) < 0.0
        assert kappa(inputs) < 0.0

    @settings(max_examples=40)
    @given(config=configs(), scale=st.floats(1.0, 50.0))
    def test_concavity_sign_at_constructive_point(self, config, scale):
        boosted = InterferometerConfig(
            scale * config.rate_a, scale * config.rate_b, scale * config.rate_c,
            phase=PhasePoint(0.0, 0.0))
        model = DetectorModel(dead_time=47e-9, dark_rate=284.0)
        inputs = _detected_inputs(boosted, model)
        assert epsilon(inputs) <= 1e-9


class TestPlatePhase:
    GEOM = PhasePlateGeometry(thickness=0.9e-3, wavelength=800e-9,
                              n_air=1.0, n_glass=1.5)

    def test_normal_incidence_is_exactly_zero(self):
        assert plate_angle_to_phase(0.0, self.GEOM) == 0.0

    def test_frozen_values(self):
        assert plate_angle_to_phase(0.1, self.GEOM) == pytest.approx(
            PLATE_PHI_01, rel=1e-12)
        # the bracket cancels ~5 digits at small angles, so double precision
        # cannot reach 1e-12 relative here
        assert plate_angle_to_phase(0.02, self.GEOM) == pytest.approx(
            PLATE_PHI_002, rel=1e-9)

    @given(theta=st.floats(-1.4, 1.4))
    def test_even_in_angle(self, theta):
        assert plate_angle_to_phase(theta, self.GEOM) == pytest.approx(
            plate_angle_to_phase(-theta, self.GEOM), rel=1e-12, abs=1e-9)

    @given(theta=st.floats(-0.5, 0.5), offset=st.floats(-0.5, 0.5))
    def test_offset_shifts_the_angle(self, theta, offset):
        geom = PhasePlateGeometry(thickness=0.9e-3, wavelength=800e-9,
                                  n_air=1.0, n_glass=1.5,
                                  zero_angle_offset=offset)
        assert plate_angle_to_phase(theta, geom) == pytest.approx(
            plate_angle_to_phase(theta + offset, self.GEOM), rel=1e-12, abs=1e-9)

    @given(theta=st.floats(-1.5, 1.5))
    def test_monotone_in_magnitude(self, theta):
        # phase grows away from normal incidence
        phi = plate_angle_to_phase(theta, self.GEOM)
        assert phi >= 0.0
