use super::stream::TimestampStream;
use crate::error::{Error, Result};

/// Delays of detections after the most recent sync pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayHistogram {
    pub bin_edges_ns: Vec<f64>,
    pub counts: Vec<u64>,
    pub sync_period_ns: f64,
}

impl DecayHistogram {
    pub fn bin_width_ns(&self) -> f64 {
        self.bin_edges_ns[1] - self.bin_edges_ns[0]
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histograms `(t - sync_offset) mod sync_period` over bins of `bin_width_ns`
/// covering one period.
pub fn tcspc_histogram(
    detections: &TimestampStream,
    sync_period_ns: f64,
    sync_offset_ns: f64,
    bin_width_ns: f64,
) -> Result<DecayHistogram> {
    if !(sync_period_ns > 0.0 && bin_width_ns > 0.0 && bin_width_ns <= sync_period_ns) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < bin width ({bin_width_ns} ns) <= sync period ({sync_period_ns} ns)"
        )));
    }
    let bins = (sync_period_ns / bin_width_ns).ceil() as usize;
    let edges: Vec<f64> = (0..=bins).map(|k| (k as f64 * bin_width_ns).min(sync_period_ns)).collect();
    let mut counts = vec![0u64; bins];
    for &t in &detections.times_ns {
        let delay = (t - sync_offset_ns).rem_euclid(sync_period_ns);
        let k = ((delay / bin_width_ns) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(DecayHistogram {
        bin_edges_ns: edges,
        counts,
        sync_period_ns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeFit {
    pub lifetime_ns: f64,
    pub lifetime_std_err: f64,
    pub amplitude: f64,
    pub bins_used: usize,
}

/// Weighted least squares on `ln(counts)` over bins whose centres lie in
/// `[start_ns, end_ns]`; each bin is weighted by its count, the inverse
/// variance of `ln N` for Poisson `N`. Empty bins are skipped.
pub fn fit_tail_lifetime(hist: &DecayHistogram, start_ns: f64, end_ns: f64) -> Result<LifetimeFit> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut used = 0;
    for (k, &c) in hist.counts.iter().enumerate() {
        let x = 0.5 * (hist.bin_edges_ns[k] + hist.bin_edges_ns[k + 1]);
        if c == 0 || x < start_ns || x > end_ns {
            continue;
        }
        let w = c as f64;
        let y = w.ln();
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
        used += 1;
    }
    if used < 3 {
        return Err(Error::FitFailed { residual_norm: f64::NAN });
    }
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sy - slope * sx) / sw;
    if !(slope < 0.0) {
        return Err(Error::FitFailed { residual_norm: slope });
    }
    let slope_se = (sw / det).sqrt();
    Ok(LifetimeFit {
        lifetime_ns: -1.0 / slope,
        lifetime_std_err: slope_se / (slope * slope),
        amplitude: intercept.exp(),
        bins_used: used,
    })
}
