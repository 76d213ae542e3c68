use rand::Rng;

use super::rng::stream_rng;
use super::stream::TimestampStream;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationMode {
    /// Every start-stop pair within the window.
    #[default]
    Full,
    /// Only the first stop after each start, as in start-stop TCSPC hardware.
    FirstStop,
}

/// Histogram of delays `t2 - t1`, with one bin centred on zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_edges_ns: Vec<f64>,
    pub counts: Vec<u64>,
    /// Expected counts per bin for uncorrelated streams.
    pub normalization: f64,
    pub g2_estimate: Vec<f64>,
    /// False when a stream was empty and the normalization is a placeholder.
    pub valid: bool,
}

impl CorrelationHistogram {
    pub fn bin_width_ns(&self) -> f64 {
        self.bin_edges_ns[1] - self.bin_edges_ns[0]
    }

    pub fn bin_centers_ns(&self) -> Vec<f64> {
        self.bin_edges_ns.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Poisson standard error of each `g2_estimate`, from the expected count
    /// `expected[i] * normalization`.
    pub fn std_errors(&self, expected_g2: &[f64]) -> Vec<f64> {
        expected_g2
            .iter()
            .map(|g| (g.max(0.0) * self.normalization).sqrt() / self.normalization)
            .collect()
    }

    /// Bin-wise sum of two histograms with identical binning.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.bin_edges_ns != other.bin_edges_ns {
            return Err(Error::InvalidParameter("cannot merge histograms with different bins".into()));
        }
        let counts: Vec<u64> = self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect();
        let normalization = self.normalization + other.normalization;
        Ok(Self {
            bin_edges_ns: self.bin_edges_ns.clone(),
            g2_estimate: counts.iter().map(|&c| c as f64 / normalization).collect(),
            counts,
            normalization,
            valid: self.valid && other.valid,
        })
    }
}

/// Edges `(k - 1/2) w` for `k = -n..=n+1`, with `n` the number of whole bins
/// fitting in `window` on each side of the central one.
pub fn symmetric_bin_edges(bin_width_ns: f64, window_ns: f64) -> Result<Vec<f64>> {
    if !(bin_width_ns > 0.0) {
        return Err(Error::InvalidParameter(format!("bin width {bin_width_ns} ns must be > 0")));
    }
    if !(window_ns >= bin_width_ns) {
        return Err(Error::InvalidParameter(format!(
            "window {window_ns} ns must be at least one bin width"
        )));
    }
    let n = (window_ns / bin_width_ns - 0.5 + 1e-9).floor() as i64;
    Ok((-n..=n + 1).map(|k| (k as f64 - 0.5) * bin_width_ns).collect())
}

fn bin_index(delay: f64, lo: f64, width: f64, bins: usize) -> Option<usize> {
    let k = ((delay - lo) / width).floor();
    (k >= 0.0 && (k as usize) < bins).then_some(k as usize)
}

/// Cross-correlation of a start stream with a stop stream.
pub fn hbt_correlate(
    start: &TimestampStream,
    stop: &TimestampStream,
    bin_width_ns: f64,
    window_ns: f64,
    mode: CorrelationMode,
) -> Result<CorrelationHistogram> {
    correlate(&start.times_ns, &stop.times_ns, start.duration_ns.min(stop.duration_ns), bin_width_ns, window_ns, mode, false)
}

/// Autocorrelation of one stream; zero-lag self pairs are excluded.
pub fn autocorrelate(
    stream: &TimestampStream,
    bin_width_ns: f64,
    window_ns: f64,
) -> Result<CorrelationHistogram> {
    correlate(&stream.times_ns, &stream.times_ns, stream.duration_ns, bin_width_ns, window_ns, CorrelationMode::Full, true)
}

fn correlate(
    t1: &[f64],
    t2: &[f64],
    duration: f64,
    bin_width: f64,
    window: f64,
    mode: CorrelationMode,
    auto: bool,
) -> Result<CorrelationHistogram> {
    let edges = symmetric_bin_edges(bin_width, window)?;
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0u64; bins];
    let mut first = 0usize;
    for (i, &a) in t1.iter().enumerate() {
        while first < t2.len() && t2[first] - a < lo {
            first += 1;
        }
        let mut j = first;
        while j < t2.len() && t2[j] - a < hi {
            if !(auto && i == j) {
                let d = t2[j] - a;
                if mode == CorrelationMode::FirstStop {
                    if d > 0.0 || (d == 0.0 && !auto) {
                        if let Some(k) = bin_index(d, lo, bin_width, bins) {
                            counts[k] += 1;
                        }
                        break;
                    }
                } else if let Some(k) = bin_index(d, lo, bin_width, bins) {
                    counts[k] += 1;
                }
            }
            j += 1;
        }
    }
    let (n1, n2) = (t1.len() as f64, t2.len() as f64);
    let pairs = if auto { n1 * (n1 - 1.0) } else { n1 * n2 };
    let valid = pairs > 0.0 && duration > 0.0;
    let normalization = if valid {
        pairs * bin_width / duration
    } else {
        bin_width / duration.max(bin_width)
    };
    Ok(CorrelationHistogram {
        bin_edges_ns: edges,
        g2_estimate: counts.iter().map(|&c| c as f64 / normalization).collect(),
        counts,
        normalization,
        valid,
    })
}

/// Routes each event to the first output with probability `p_first`.
pub fn split_beamsplitter(
    stream: &TimestampStream,
    p_first: f64,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    if !(0.0..=1.0).contains(&p_first) {
        return Err(Error::InvalidParameter(format!("split ratio {p_first} must be in [0, 1]")));
    }
    let mut rng = stream_rng(seed, "beamsplitter");
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for &t in &stream.times_ns {
        if rng.random::<f64>() < p_first {
            a.push(t);
        } else {
            b.push(t);
        }
    }
    Ok((
        TimestampStream::new(a, stream.duration_ns, seed, format!("{}.1", stream.label))?,
        TimestampStream::new(b, stream.duration_ns, seed, format!("{}.2", stream.label))?,
    ))
}
