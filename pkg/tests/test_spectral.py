"""Tests for spectra, single-bin synthesis and band masks (spectral.py)."""

import numpy as np
import pytest


class TestSpectrum:
    """Test suite for the Spectrum container."""

    def test_bins_for_length(self):
        """A length-n spectrum should hold n/2 + 1 bins."""
        from fredf import spectral

        s = spectral.rdft(np.zeros((192, 1)))

        assert s.bins == 97
        assert s.coeffs.shape == (97, 1)

    def test_wrong_bin_count_raises(self):
        """Coefficients must match the declared length."""
        from fredf import spectral
        from fredf.errors import ShapeError

        with pytest.raises(ShapeError):
            spectral.Spectrum.from_complex(np.zeros((4, 1)), 8)

    def test_one_dimensional_series_raises(self):
        """rdft needs a (n, F) series."""
        from fredf import spectral
        from fredf.errors import ShapeError

        with pytest.raises(ShapeError):
            spectral.rdft(np.zeros(8))

    @pytest.mark.parametrize("n", [4, 8, 96, 192, 816])
    def test_round_trip(self, n):
        """irdft(rdft(x)) should reproduce x."""
        from fredf import spectral

        x = np.random.default_rng(n).standard_normal((3, n, 2))

        assert np.max(np.abs(spectral.irdft(spectral.rdft(x)) - x)) < 1e-10


class TestSingleBin:
    """Test suite for decouple() and single_bin_inverse()."""

    def test_closed_form_matches_masked_inverse(self):
        """single_bin_inverse should equal irdft of the decoupled bin."""
        from fredf import spectral

        rng = np.random.default_rng(1)
        z = rng.standard_normal((7, 3)) + 1j * rng.standard_normal((7, 3))
        s = spectral.Spectrum.from_complex(z, 12)

        for m in range(s.bins):
            np.testing.assert_allclose(
                spectral.single_bin_inverse(s, m),
                spectral.irdft(spectral.decouple(s, m)),
                atol=1e-12,
            )

    def test_single_bins_sum_to_series(self):
        """Summing every single-bin series should give the full inverse."""
        from fredf import spectral

        x = np.random.default_rng(2).standard_normal((10, 2))
        s = spectral.rdft(x)
        parts = sum(spectral.single_bin_inverse(s, m) for m in range(s.bins))

        np.testing.assert_allclose(parts, x, atol=1e-12)

    def test_decomposition_over_random_spectra(self):
        """Single-bin series sum to irdft(s) for arbitrary complex spectra."""
        from fredf import spectral

        rng = np.random.default_rng(7)
        for _ in range(50):
            n = 2 * int(rng.integers(2, 40))
            k = n // 2 + 1
            z = rng.standard_normal((k, 2)) + 1j * rng.standard_normal((k, 2))
            s = spectral.Spectrum.from_complex(z, n)
            parts = sum(
                spectral.single_bin_inverse(s, m) for m in range(s.bins)
            )
            assert np.max(np.abs(parts - spectral.irdft(s))) < 1e-11

    def test_decoupled_bin_keeps_only_that_bin(self):
        """decouple() should zero every other bin."""
        from fredf import spectral

        s = spectral.rdft(np.random.default_rng(3).standard_normal((8, 1)))
        only = spectral.decouple(s, 2).to_complex()

        assert only[2, 0] == s.to_complex()[2, 0]
        assert np.count_nonzero(only) <= 1

    def test_bin_out_of_range(self):
        """Bins outside [0, K) should raise PartitionError."""
        from fredf import spectral
        from fredf.errors import PartitionError

        s = spectral.rdft(np.zeros((8, 1)))

        with pytest.raises(PartitionError):
            spectral.decouple(s, 5)
        with pytest.raises(PartitionError):
            spectral.single_bin_inverse(s, -1)


class TestBands:
    """Test suite for band_partition / band_zero / band_energy."""

    def test_partition_covers_every_bin_once(self):
        """Low, mid and high should tile [0, K) in order."""
        from fredf import spectral

        for bins in (3, 4, 5, 49, 97, 193):
            low, mid, high = spectral.band_partition(bins)
            assert low.lo == 0
            assert low.hi == mid.lo
            assert mid.hi == high.lo
            assert high.hi == bins
            assert len(low) == len(mid) == bins // 3

    def test_leftover_bins_go_high(self):
        """Remainder bins should be assigned to the high band."""
        from fredf import spectral

        low, mid, high = spectral.band_partition(49)

        assert (len(low), len(mid), len(high)) == (16, 16, 17)

    def test_too_few_bins(self):
        """Partitioning fewer than 3 bins should raise PartitionError."""
        from fredf import spectral
        from fredf.errors import PartitionError

        with pytest.raises(PartitionError):
            spectral.band_partition(2)

    def test_named_band_unknown(self):
        """Unknown band names should raise PartitionError."""
        from fredf import spectral
        from fredf.errors import PartitionError

        with pytest.raises(PartitionError):
            spectral.named_band("ultra", 49)

    def test_band_zero_removes_only_that_band(self):
        """band_zero should clear its bins and leave the rest untouched."""
        from fredf import spectral

        x = np.random.default_rng(4).standard_normal((96, 2))
        s = spectral.rdft(x)
        mid = spectral.named_band("mid", s.bins)
        masked = spectral.band_zero(s, mid)

        assert spectral.band_energy(masked, mid) == 0.0
        low = spectral.named_band("low", s.bins)
        assert spectral.band_energy(masked, low) == pytest.approx(
            spectral.band_energy(s, low)
        )

    def test_zeroing_low_band_removes_mean(self):
        """The DC bin belongs to the low band."""
        from fredf import spectral

        x = np.random.default_rng(5).standard_normal((48, 1)) + 3.0
        s = spectral.rdft(x)
        low = spectral.named_band("low", s.bins)
        out = spectral.irdft(spectral.band_zero(s, low))

        assert abs(out.mean()) < 1e-12

    def test_band_outside_spectrum(self):
        """A band past the last bin should be rejected."""
        from fredf import spectral
        from fredf.errors import PartitionError

        s = spectral.rdft(np.zeros((8, 1)))

        with pytest.raises(PartitionError):
            spectral.band_zero(s, spectral.BandSpec(3, 9))
