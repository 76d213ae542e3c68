use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Sorted event times of one channel over `[0, duration_ns]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    pub times_ns: Vec<f64>,
    pub duration_ns: f64,
    pub seed: u64,
    pub label: String,
}

impl TimestampStream {
    pub fn new(times_ns: Vec<f64>, duration_ns: f64, seed: u64, label: impl Into<String>) -> Result<Self> {
        if !(duration_ns >= 0.0 && duration_ns.is_finite()) {
            return Err(Error::InvalidParameter(format!("stream duration {duration_ns} ns must be finite and >= 0")));
        }
        if let Some(w) = times_ns.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(format!(
                "stream times must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        if let (Some(&first), Some(&last)) = (times_ns.first(), times_ns.last()) {
            if first < 0.0 || last > duration_ns {
                return Err(Error::InvalidParameter(format!(
                    "stream times must lie in [0, {duration_ns}] ns"
                )));
            }
        }
        Ok(Self {
            times_ns,
            duration_ns,
            seed,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.times_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_ns.is_empty()
    }

    pub fn rate_cps(&self) -> f64 {
        if self.duration_ns > 0.0 {
            self.times_ns.len() as f64 / self.duration_ns * 1e9
        } else {
            0.0
        }
    }

    /// Superposition of two streams; coincident times are kept once.
    pub fn merge(&self, other: &Self, label: impl Into<String>) -> Self {
        let (a, b) = (&self.times_ns, &other.times_ns);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let next = if j == b.len() || (i < a.len() && a[i] <= b[j]) {
                i += 1;
                a[i - 1]
            } else {
                j += 1;
                b[j - 1]
            };
            if out.last() != Some(&next) {
                out.push(next);
            }
        }
        Self {
            times_ns: out,
            duration_ns: self.duration_ns.max(other.duration_ns),
            seed: self.seed,
            label: label.into(),
        }
    }

    /// One decimal value per line, preceded by `#` header lines.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.times_ns.len() * 20 + 64);
        let _ = writeln!(s, "# duration_ns = {:?}", self.duration_ns);
        let _ = writeln!(s, "# seed = {}", self.seed);
        let _ = writeln!(s, "# label = {}", self.label);
        for t in &self.times_ns {
            let _ = writeln!(s, "{t:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut duration = None;
        let mut seed = 0;
        let mut label = String::new();
        let mut times = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let parse_err = |message: String| Error::Parse { line: i + 1, message };
            if let Some(header) = line.strip_prefix('#') {
                if let Some((key, value)) = header.split_once('=') {
                    let value = value.trim();
                    match key.trim() {
                        "duration_ns" => {
                            duration = Some(value.parse().map_err(|_| parse_err(format!("bad duration {value:?}")))?)
                        }
                        "seed" => seed = value.parse().map_err(|_| parse_err(format!("bad seed {value:?}")))?,
                        "label" => label = value.to_string(),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            times.push(line.parse().map_err(|_| parse_err(format!("bad timestamp {line:?}")))?);
        }
        let duration = duration.or_else(|| times.last().copied()).unwrap_or(0.0);
        Self::new(times, duration, seed, label)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(TimestampStream::new(vec![1.0, 1.0], 5.0, 0, "x").is_err());
        assert!(TimestampStream::new(vec![1.0, 6.0], 5.0, 0, "x").is_err());
        assert!(TimestampStream::new(vec![-1.0], 5.0, 0, "x").is_err());
    }

    #[test]
    fn merge_counts_add() {
        let a = TimestampStream::new(vec![1.0, 3.0, 5.0], 10.0, 1, "a").unwrap();
        let b = TimestampStream::new(vec![2.0, 4.0], 10.0, 2, "b").unwrap();
        let m = a.merge(&b, "m");
        assert_eq!(m.times_ns, [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m.len(), a.len() + b.len());
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let s = TimestampStream::new(vec![0.1, 1.0 / 3.0, 2.5e9 + 0.7], 3e9, 42, "det1").unwrap();
        let back = TimestampStream::from_text(&s.to_text()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parse_error_names_line() {
        match TimestampStream::from_text("# seed = 1\n1.0\nfoo\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
