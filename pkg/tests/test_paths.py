"""Unit tests for count paths and the adaptation transform."""

import io
import math

import numpy as np
import pytest

from marcox.errors import ValidationError
from marcox.paths import (
    CountPath,
    ModelParams,
    adapt_path,
    load_path,
    read_events_csv,
    tune_w,
    write_events_csv,
)
from marcox.intensity import PolyIntensity

from _oracles import piecewise_linear_integral, step_path_integral


def scaled_integral_path(x_star, w):
    """Reference for the transform input: xt(t) = w * int_0^t x*(s) ds."""
    return lambda t: w * step_path_integral(x_star.jumps, t)


def random_path(rng, max_events=12):
    T = rng.uniform(0.5, 3.0)
    m = int(rng.integers(1, max_events + 1))
    times = np.sort(rng.uniform(0.0, T, size=m))
    times = times[times > 0]
    times = np.unique(times)
    return CountPath(T=T, jumps=times)


class TestLoadPath:
    def test_sorts_ascending(self):
        x = load_path([0.5, 0.2], 1.0)
        np.testing.assert_allclose(x.jumps, [0.2, 0.5])

    def test_empty(self):
        assert load_path([], 1.0).count == 0

    def test_duplicate_rejected(self):
        with pytest.raises(ValidationError, match="duplicate event time"):
            load_path([0.5, 0.5], 1.0)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            load_path([1.5], 1.0)
        with pytest.raises(ValidationError):
            load_path([0.0], 1.0)
        with pytest.raises(ValidationError):
            load_path([-0.2], 1.0)

    def test_boundary_jump_allowed(self):
        assert load_path([1.0], 1.0).count == 1

    def test_value_right_continuous(self):
        x = load_path([0.25, 0.75], 1.0)
        assert x.value(0.25) == 1
        assert x.value(0.2499999) == 0
        assert x.value(1.0) == 2

    def test_step_integral_matches_oracle(self):
        x = load_path([0.25, 0.75], 1.0)
        assert x.integral(0.9) == pytest.approx(step_path_integral(x.jumps, 0.9), abs=1e-12)


class TestModelParams:
    def test_rejects_negative_baseline(self):
        with pytest.raises(ValidationError):
            ModelParams(beta0=-1.0, w=1.0, gamma=PolyIntensity((1.0,)))

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValidationError):
            ModelParams(beta0=0.0, w=0.0, gamma=PolyIntensity((1.0,)))

    def test_validate_checks_gamma_support(self):
        params = ModelParams(beta0=0.0, w=1.0, gamma=PolyIntensity((0.1, -1.0)))
        with pytest.raises(ValidationError):
            params.validate(1.0)


class TestAdaptPath:
    def test_single_jump_hand_computed(self):
        """x* jumps at 0.5 with T=1, w=2: the scaled integral is 2 (t-0.5)+,
        reaching 1 at t=1; area matching on [0, 1] puts the jump at 0.75."""
        x_star = load_path([0.5], 1.0)
        adapted = adapt_path(x_star, 2.0)
        np.testing.assert_allclose(adapted.jumps, [0.75], atol=1e-12)

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            adapt_path(load_path([], 1.0), 1.0)

    def test_tiny_scale_rejected(self):
        with pytest.raises(ValidationError, match="no events"):
            adapt_path(load_path([0.5], 1.0), 1e-6)

    def test_level_and_area_match_at_crossings(self):
        """x(t_i) = i and the adapted area equals the scaled-integral area at
        every crossing, checked against a brute-force integration oracle."""
        rng = np.random.default_rng(21)
        for _ in range(20):
            x_star = random_path(rng)
            w = rng.uniform(0.5, 4.0) * x_star.count / max(
                step_path_integral(x_star.jumps, x_star.T), 1e-9
            )
            try:
                adapted = adapt_path(x_star, w)
            except ValidationError:
                continue
            xt = scaled_integral_path(x_star, w)
            for i in range(1, adapted.count + 1):
                # crossing time of level i, recovered by bisection on xt
                lo, hi = 0.0, x_star.T
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    if xt(mid) >= i:
                        hi = mid
                    else:
                        lo = mid
                t_i = hi
                assert adapted.value(t_i) == i
                area_adapted = adapted.integral(t_i)
                area_ref = piecewise_linear_integral(xt, x_star.jumps, 0.0, t_i)
                assert area_adapted == pytest.approx(area_ref, abs=1e-10)

    def test_jumps_strictly_increasing(self):
        rng = np.random.default_rng(33)
        for _ in range(30):
            x_star = random_path(rng)
            adapted = adapt_path(x_star, tune_w(x_star))
            assert np.all(np.diff(adapted.jumps) > 0)
            assert adapted.jumps[0] > 0
            assert adapted.jumps[-1] <= x_star.T

    def test_commutes_with_time_rescaling(self):
        """Scaling times and T by s and w by 1/s rescales the output by s."""
        rng = np.random.default_rng(55)
        for _ in range(10):
            x_star = random_path(rng)
            w = tune_w(x_star)
            s = rng.uniform(0.3, 4.0)
            scaled = CountPath(T=x_star.T * s, jumps=x_star.jumps * s)
            base = adapt_path(x_star, w)
            resc = adapt_path(scaled, w / s)
            np.testing.assert_allclose(resc.jumps, base.jumps * s, rtol=1e-10, atol=1e-10)


class TestTuneW:
    def test_single_jump_formula(self):
        """One jump at 0.5, T=1: step area is 0.5, so w is 2 (nudged up)."""
        x_star = load_path([0.5], 1.0)
        w = tune_w(x_star)
        assert w == pytest.approx(2.0, rel=1e-8)
        assert adapt_path(x_star, w).count == 1

    def test_two_jump_area(self):
        """Jumps at 0.25 and 0.75, T=1: area = 1*0.5 + 2*0.25 = 1.0, w = 2.

        Verified against the brute-force step-area oracle.
        """
        x_star = load_path([0.25, 0.75], 1.0)
        assert step_path_integral(x_star.jumps, 1.0) == pytest.approx(1.0, abs=1e-12)
        w = tune_w(x_star)
        assert w == pytest.approx(2.0, rel=1e-8)
        assert adapt_path(x_star, w).count == 2

    def test_event_count_preserved_on_random_paths(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            x_star = random_path(rng)
            adapted = adapt_path(x_star, tune_w(x_star))
            assert adapted.count == x_star.count


class TestEventCsv:
    def test_roundtrip(self):
        buf = io.StringIO()
        write_events_csv(buf, [0.25, 0.5], comments=["seed=7"])
        buf.seek(0)
        assert read_events_csv(buf) == [0.25, 0.5]

    def test_header_and_comments_skipped(self):
        buf = io.StringIO("# anything\ntime\n0.125\n0.25\n")
        assert read_events_csv(buf) == [0.125, 0.25]

    def test_bad_line_reported(self):
        with pytest.raises(ValidationError, match="line 2"):
            read_events_csv(io.StringIO("time\nnot-a-number\n"))
