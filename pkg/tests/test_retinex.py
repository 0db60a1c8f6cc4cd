import numpy as np
import pytest

from aquaclear import (
    ImageF,
    MsrConfig,
    ParameterError,
    illumination_estimate,
    msr_enhance,
    msr_normalize,
    msr_raw,
)

from oracles import msr_raw_reference


class TestMsrConfig:
    def test_defaults(self):
        cfg = MsrConfig()
        assert cfg.scales == (15.0, 80.0, 250.0)
        assert cfg.epsilon == pytest.approx(1.0 / 255.0)

    def test_rejects_empty_scales(self):
        with pytest.raises(ParameterError):
            MsrConfig(scales=())

    def test_rejects_nonpositive_scale(self):
        with pytest.raises(ParameterError):
            MsrConfig(scales=(80.0, -1.0))

    def test_rejects_bad_percentiles(self):
        with pytest.raises(ParameterError):
            MsrConfig(low_percentile=60.0, high_percentile=40.0)


class TestMsrRaw:
    def test_uniform_image_is_exactly_zero(self):
        for level in (0.1, 0.5, 0.93):
            img = ImageF(np.full((3, 24, 24), level))
            raw = msr_raw(img)
            assert np.all(raw.data == 0.0), f"level {level} leaked nonzero response"

    def test_single_scale_equals_log_ratio(self, make_image):
        img = make_image(height=12, width=14)
        cfg = MsrConfig(scales=(5.0,))
        raw = msr_raw(img, cfg)
        smoothed = illumination_estimate(img, 5.0)
        expected = np.log(img.data + cfg.epsilon) - np.log(smoothed.data + cfg.epsilon)
        assert np.array_equal(raw.data, expected)

    def test_multi_scale_is_mean_of_single_scales(self, make_image):
        img = make_image(height=10, width=10)
        scales = (2.0, 6.0, 11.0)
        multi = msr_raw(img, MsrConfig(scales=scales))
        singles = [msr_raw(img, MsrConfig(scales=(s,))).data for s in scales]
        assert np.allclose(multi.data, np.mean(singles, axis=0), atol=1e-15)

    def test_matches_brute_force(self, rng):
        img = rng.random((3, 9, 11))
        cfg = MsrConfig(scales=(1.5, 3.0))
        ours = msr_raw(ImageF(img), cfg)
        ref = msr_raw_reference(img, cfg.scales, cfg.epsilon)
        assert np.allclose(ours.data, ref, atol=1e-12)

    def test_global_gain_invariance_with_coscaled_epsilon(self, make_image):
        """Scaling the image and epsilon together shifts nothing: the log
        ratio cancels the gain."""
        img = make_image(height=16, width=16)
        gain = 3.7
        base = msr_raw(img, MsrConfig(epsilon=1.0 / 255.0))
        scaled = msr_raw(ImageF(img.data * gain), MsrConfig(epsilon=gain / 255.0))
        assert np.allclose(base.data, scaled.data, atol=1e-9)

    def test_rejects_negative_samples(self):
        img = ImageF(np.full((1, 4, 4), -0.25))
        with pytest.raises(ParameterError):
            msr_raw(img)


class TestMsrNormalize:
    def test_output_in_unit_range(self, make_image):
        out = msr_normalize(msr_raw(make_image(height=20, width=20)))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_constant_channel_maps_to_half(self):
        raw = ImageF(np.zeros((3, 8, 8)))
        out = msr_normalize(raw)
        assert np.all(out.data == 0.5)

    def test_percentile_stretch_saturates_tails(self, rng):
        # values beyond the 1%/99% points clip to the range ends
        raw = ImageF(rng.normal(size=(1, 50, 50)))
        out = msr_normalize(raw)
        assert (out.data == 0.0).any() and (out.data == 1.0).any()

    def test_monotone_within_channel(self, rng):
        raw_vals = rng.normal(size=(1, 10, 10))
        out = msr_normalize(ImageF(raw_vals)).data[0].ravel()
        order = np.argsort(raw_vals[0].ravel())
        assert np.all(np.diff(out[order]) >= -1e-15)


class TestMsrEnhance:
    def test_composition(self, make_image):
        img = make_image(height=14, width=14)
        cfg = MsrConfig(scales=(4.0, 9.0))
        assert np.array_equal(msr_enhance(img, cfg).data, msr_normalize(msr_raw(img, cfg), cfg).data)

    def test_uniform_in_half_out(self):
        img = ImageF(np.full((3, 12, 12), 0.3))
        assert np.all(msr_enhance(img).data == 0.5)

    def test_lifts_foggy_colorfulness(self):
        # a veiled ramp should come out more spread than it went in
        ramp = np.linspace(0.2, 0.5, 32 * 32).reshape(32, 32)
        img = ImageF(np.stack([ramp * 0.6 + 0.3, ramp * 0.8 + 0.15, ramp * 0.9 + 0.1]))
        out = msr_enhance(img, MsrConfig(scales=(5.0, 15.0)))
        assert out.data.std() > img.data.std()
