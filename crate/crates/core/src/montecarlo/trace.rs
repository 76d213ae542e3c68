use crate::error::{Error, Result};
use crate::numeric;

/// Detector current sampled at regular times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CurrentTrace {
    pub sample_times_ns: Vec<f64>,
    pub current_ua: Vec<f64>,
    pub fitted: Option<ExpFit>,
}

impl CurrentTrace {
    pub fn len(&self) -> usize {
        self.sample_times_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times_ns.is_empty()
    }

    /// Sample mean; equals the time average for uniform sampling.
    pub fn mean_current(&self) -> f64 {
        self.current_ua.iter().sum::<f64>() / self.current_ua.len() as f64
    }

    /// Fits the samples in `[start_ns, end_ns]`, with time measured from
    /// `start_ns`, and stores the result.
    pub fn fit_segment(&mut self, start_ns: f64, end_ns: f64) -> Result<ExpFit> {
        let (t, y): (Vec<f64>, Vec<f64>) = self
            .sample_times_ns
            .iter()
            .zip(&self.current_ua)
            .filter(|(&t, _)| t >= start_ns && t <= end_ns)
            .map(|(&t, &y)| (t - start_ns, y))
            .unzip();
        let fit = effective_current_fit(&t, &y)?;
        self.fitted = Some(fit);
        Ok(fit)
    }
}

/// `U(t) = u_offset + u0_amplitude * exp(-t / tau_fit_ns)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub u_offset: f64,
    pub u0_amplitude: f64,
    pub tau_fit_ns: f64,
    pub residual_norm: f64,
    /// Amplitude is zero or the time constant is not identifiable from the
    /// data; `tau_fit_ns` is then NaN.
    pub degenerate: bool,
}

impl ExpFit {
    pub fn eval(&self, t_ns: f64) -> f64 {
        if self.degenerate {
            self.u_offset
        } else {
            self.u_offset + self.u0_amplitude * (-t_ns / self.tau_fit_ns).exp()
        }
    }
}

/// Best `(offset, amplitude)` for a fixed time constant and its residual sum
/// of squares.
fn linear_part(t: &[f64], y: &[f64], tau: f64) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mut se, mut see, mut sy, mut sey) = (0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let e = (-ti / tau).exp();
        se += e;
        see += e * e;
        sy += yi;
        sey += e * yi;
    }
    let det = n * see - se * se;
    if det.abs() <= 1e-14 * n * see {
        let u = sy / n;
        let rss = y.iter().map(|v| (v - u).powi(2)).sum();
        return (u, 0.0, rss);
    }
    let u = (see * sy - se * sey) / det;
    let a = (n * sey - se * sy) / det;
    let rss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| (yi - u - a * (-ti / tau).exp()).powi(2))
        .sum();
    (u, a, rss)
}

/// Least-squares fit of `U + U0 exp(-t / tau)`.
///
/// The time constant is located by a logarithmic scan and golden-section
/// refinement with the linear parameters eliminated, then all three
/// parameters are polished by Gauss-Newton.
pub fn effective_current_fit(t_ns: &[f64], current_ua: &[f64]) -> Result<ExpFit> {
    if t_ns.len() != current_ua.len() {
        return Err(Error::InvalidParameter("trace times and values differ in length".into()));
    }
    if t_ns.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "fit needs at least 10 samples, got {}",
            t_ns.len()
        )));
    }
    let (min, max) = current_ua
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(min.is_finite() && max.is_finite()) {
        return Err(Error::FitFailed { residual_norm: f64::NAN });
    }
    let n = current_ua.len() as f64;
    let mean = current_ua.iter().sum::<f64>() / n;
    let flat = ExpFit {
        u_offset: mean,
        u0_amplitude: 0.0,
        tau_fit_ns: f64::NAN,
        residual_norm: current_ua.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt(),
        degenerate: true,
    };
    if max - min <= 1e-12 * max.abs().max(min.abs()).max(f64::MIN_POSITIVE) {
        return Ok(flat);
    }

    let t0 = t_ns.iter().copied().fold(f64::INFINITY, f64::min);
    let span = t_ns.iter().copied().fold(f64::NEG_INFINITY, f64::max) - t0;
    let s: Vec<f64> = t_ns.iter().map(|t| t - t0).collect();
    let (lo, hi) = ((span * 1e-3).ln(), (span * 1e2).ln());
    let steps = 400;
    let rss_at = |log_tau: f64| linear_part(&s, current_ua, log_tau.exp()).2;
    let (best, _) = (0..=steps)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            (k, rss_at(x))
        })
        .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc });
    if best == 0 || best == steps {
        return Ok(flat);
    }
    let h = (hi - lo) / steps as f64;
    let log_tau = numeric::golden_min(rss_at, lo + (best - 1) as f64 * h, lo + (best + 1) as f64 * h, 1e-12);
    let mut tau = log_tau.exp();
    let (mut u, mut a, mut rss) = linear_part(&s, current_ua, tau);

    for _ in 0..50 {
        // Normal equations for (u, a, tau).
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&ti, &yi) in s.iter().zip(current_ua) {
            let e = (-ti / tau).exp();
            let r = yi - u - a * e;
            let j = [1.0, e, a * e * ti / (tau * tau)];
            for p in 0..3 {
                jtr[p] += j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let Some(delta) = solve3(jtj, jtr) else { break };
        let (nu, na, ntau) = (u + delta[0], a + delta[1], tau + delta[2]);
        if !(ntau > 0.0) {
            break;
        }
        let nrss: f64 = s
            .iter()
            .zip(current_ua)
            .map(|(&ti, &yi)| (yi - nu - na * (-ti / ntau).exp()).powi(2))
            .sum();
        if !(nrss <= rss) {
            break;
        }
        let done = (ntau - tau).abs() <= 1e-15 * tau;
        (u, a, tau, rss) = (nu, na, ntau, nrss);
        if done {
            break;
        }
    }
    if !rss.is_finite() {
        return Err(Error::FitFailed { residual_norm: rss.sqrt() });
    }
    let amplitude = a * (t0 / tau).exp();
    let degenerate = a.abs() <= 1e-9 * (max - min).max(mean.abs()) || span < 2.0 * tau;
    Ok(ExpFit {
        u_offset: u,
        u0_amplitude: amplitude,
        tau_fit_ns: if degenerate { f64::NAN } else { tau },
        residual_norm: rss.sqrt(),
        degenerate,
    })
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        *slot = det(&mc) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_exponential() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let y: Vec<f64> = t.iter().map(|&t| 18.0 * (-t / 2.33).exp()).collect();
        let fit = effective_current_fit(&t, &y).unwrap();
        assert!(!fit.degenerate);
        assert!(fit.u_offset.abs() < 1e-6 * 18.0);
        assert!((fit.u0_amplitude / 18.0 - 1.0).abs() < 1e-6);
        assert!((fit.tau_fit_ns / 2.33 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_rising_current() {
        let t: Vec<f64> = (0..100).map(|i| 3.0 + i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|&t| 24.0 - 24.0 * (-t / 2.33).exp()).collect();
        let fit = effective_current_fit(&t, &y).unwrap();
        assert!((fit.u_offset / 24.0 - 1.0).abs() < 1e-6);
        assert!((fit.u0_amplitude / -24.0 - 1.0).abs() < 1e-6);
        assert!((fit.tau_fit_ns / 2.33 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn flat_trace_is_degenerate() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let fit = effective_current_fit(&t, &[7.5; 50]).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.u0_amplitude, 0.0);
        assert!(fit.tau_fit_ns.is_nan());
        assert_eq!(fit.u_offset, 7.5);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(effective_current_fit(&[0.0, 1.0], &[1.0, 2.0]).is_err());
    }
}
