//! Critical-band layout.

/// Bumped whenever the band table below changes.
pub const BARK_TABLE_VERSION: u32 = 1;

/// Upper edges of the 25 classic critical bands, lower edge of band 1 is 0 Hz.
/// The last band is open-ended.
pub const CRITICAL_BAND_UPPER_EDGES_HZ: [f64; 25] = [
    100.0,
    200.0,
    300.0,
    400.0,
    510.0,
    630.0,
    770.0,
    920.0,
    1080.0,
    1270.0,
    1480.0,
    1720.0,
    2000.0,
    2320.0,
    2700.0,
    3150.0,
    3700.0,
    4400.0,
    5300.0,
    6400.0,
    7700.0,
    9500.0,
    12000.0,
    15500.0,
    f64::INFINITY,
];

/// FFT bins `[start, end)` that fall into one critical band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticalBand {
    /// 1-based band number.
    pub number: usize,
    pub start: usize,
    pub end: usize,
}

impl CriticalBand {
    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

/// Maps bins `0..fft_len/2` onto the first `n_bands` critical bands, dropping
/// bands with no bin below Nyquist.
pub fn band_layout(fft_len: usize, sample_rate: u32, n_bands: usize) -> Vec<CriticalBand> {
    let n_bins = fft_len / 2;
    let bin_hz = sample_rate as f64 / fft_len as f64;
    let mut bands = Vec::new();
    let mut start = 0;
    for (b, &upper) in CRITICAL_BAND_UPPER_EDGES_HZ
        .iter()
        .take(n_bands)
        .enumerate()
    {
        let mut end = start;
        while end < n_bins && (end as f64) * bin_hz < upper {
            end += 1;
        }
        if end > start {
            bands.push(CriticalBand {
                number: b + 1,
                start,
                end,
            });
        }
        start = end;
    }
    bands
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_bins_below_nyquist() {
        let bands = band_layout(2048, 16_000, 25);
        // 7700 Hz edge is the last one below 8 kHz
        assert_eq!(bands.len(), 22);
        assert_eq!(bands[0].start, 0);
        assert_eq!(bands.last().unwrap().end, 1024);
        for w in bands.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        // band 1 holds 0..100 Hz at 7.8125 Hz spacing
        assert_eq!(bands[0].width(), 13);
    }

    #[test]
    fn fewer_bands_truncate_spectrum() {
        let bands = band_layout(2048, 16_000, 10);
        assert_eq!(bands.len(), 10);
        assert!(bands.last().unwrap().end < 1024);
    }
}
