//! Event-driven detector simulation.
//!
//! Photons are walked in time order. A photon arriving `s` after the last
//! firing is detected with probability `nu(I_w (1 - exp(-s / tau)))`, or never
//! inside the dead time. Dark counts form an independent Poisson stream that
//! fires the detector whenever it is not dead.
//!
//! Under current stabilization the supply sees an exponential moving average
//! of the detector current (time constant `feedback_tau_ns`) and integrates
//! the error against the set point into `I_w`. The run is declared latched if
//! `I_w` is driven up to `I_c`.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use super::rng::stream_rng;
use super::sources::{PhotonSource, PoissonSource, StreamSource};
use super::stream::TimestampStream;
use super::trace::CurrentTrace;
use crate::detector::{BiasRegime, DetectorParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    /// End of the run; may be infinite when `max_detections` is set.
    pub duration_ns: f64,
    pub max_detections: Option<u64>,
    pub feedback_tau_ns: f64,
    /// Spacing of current samples; `None` records no trace.
    pub trace_interval_ns: Option<f64>,
    pub trace_max_samples: usize,
    /// Keep detection timestamps. Statistics are accumulated regardless.
    pub record_detections: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            duration_ns: f64::INFINITY,
            max_detections: None,
            feedback_tau_ns: 1000.0,
            trace_interval_ns: None,
            trace_max_samples: 1_000_000,
            record_detections: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub detections: u64,
    pub simulated_ns: f64,
    /// Inverse mean interval between consecutive (pre-jitter) detections.
    pub count_rate_cps: f64,
    pub count_rate_std_err: f64,
    pub mean_interval_ns: f64,
    pub mean_interval_std_err: f64,
    /// Time-averaged current between the first and last detection.
    pub mean_current_ua: f64,
    pub mean_current_std_err: f64,
    pub final_operating_current_ua: f64,
    pub latched: bool,
    pub feedback_tau_ns: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRun {
    /// Detection times after jitter, sorted.
    pub detections: TimestampStream,
    pub trace: CurrentTrace,
    pub stats: RunStats,
}

#[derive(Default)]
struct IntervalSums {
    n: f64,
    l: f64,
    l2: f64,
    q: f64,
    q2: f64,
    ql: f64,
}

impl IntervalSums {
    fn push(&mut self, l: f64, q: f64) {
        self.n += 1.0;
        self.l += l;
        self.l2 += l * l;
        self.q += q;
        self.q2 += q * q;
        self.ql += q * l;
    }
}

struct Engine<'p> {
    params: &'p DetectorParams,
    i_w: f64,
    t_last: Option<f64>,
    cursor: f64,
    interval_charge: f64,
    // Feedback.
    target: Option<f64>,
    feedback_tau: f64,
    window: f64,
    next_feedback: f64,
    window_charge: f64,
    ema: f64,
    latched: bool,
    // Trace.
    trace: CurrentTrace,
    trace_dt: f64,
    next_sample: f64,
    trace_max: usize,
}

impl Engine<'_> {
    fn current(&self, t: f64) -> f64 {
        match self.t_last {
            None => self.i_w,
            Some(l) => -self.i_w * (-(t - l) / self.params.tau_ns).exp_m1(),
        }
    }

    fn charge(&self, a: f64, b: f64) -> f64 {
        match self.t_last {
            None => self.i_w * (b - a),
            Some(l) => {
                let tau = self.params.tau_ns;
                self.i_w * ((b - a) - tau * ((-(a - l) / tau).exp() - (-(b - l) / tau).exp()))
            }
        }
    }

    fn advance(&mut self, to: f64) {
        while self.cursor < to && !self.latched {
            let next = to.min(self.next_feedback).min(self.next_sample);
            let q = self.charge(self.cursor, next);
            self.interval_charge += q;
            self.window_charge += q;
            self.cursor = next;
            if next == self.next_sample {
                self.trace.sample_times_ns.push(next);
                self.trace.current_ua.push(self.current(next));
                self.next_sample = if self.trace.len() >= self.trace_max {
                    f64::INFINITY
                } else {
                    self.trace.len() as f64 * self.trace_dt
                };
            }
            if next == self.next_feedback {
                self.feedback_step();
            }
        }
    }

    fn feedback_step(&mut self) {
        let target = self.target.expect("feedback only under current stabilization");
        let average = self.window_charge / self.window;
        self.window_charge = 0.0;
        self.ema += (average - self.ema) * -(-self.window / self.feedback_tau).exp_m1();
        self.i_w += self.window / (2.0 * self.feedback_tau) * (target - self.ema);
        let ic = self.params.critical_current_ua;
        if self.i_w >= ic {
            self.i_w = ic;
            self.latched = true;
        }
        self.i_w = self.i_w.max(1e-6 * ic);
        self.next_feedback += self.window;
    }
}

/// Runs the detector on an arbitrary photon source.
pub fn run_detector(
    source: &mut dyn PhotonSource,
    params: &DetectorParams,
    regime: BiasRegime,
    opts: &SimOptions,
    seed: u64,
) -> Result<DetectorRun> {
    params.validate()?;
    regime.validate(params)?;
    if !(opts.duration_ns > 0.0) || (opts.duration_ns.is_infinite() && opts.max_detections.is_none()) {
        return Err(Error::InvalidParameter(
            "run needs a finite positive duration or a detection limit".into(),
        ));
    }
    if !(opts.feedback_tau_ns > 0.0) {
        return Err(Error::InvalidParameter("feedback time constant must be > 0".into()));
    }
    if let Some(dt) = opts.trace_interval_ns {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("trace interval must be > 0".into()));
        }
    }

    let (i_w, target) = match regime {
        BiasRegime::VoltageStabilized { operating_current_ua } => (operating_current_ua, None),
        BiasRegime::CurrentStabilized { mean_current_ua } => (mean_current_ua, Some(mean_current_ua)),
    };
    let max_current = if target.is_some() { params.critical_current_ua } else { i_w };
    let bound = source.efficiency_bound();
    if params.efficiency_at(max_current) > bound * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "source is pre-thinned to efficiency {bound}, below the detector's {}",
            params.efficiency_at(max_current)
        )));
    }

    let window = opts.feedback_tau_ns / 16.0;
    let mut eng = Engine {
        params,
        i_w,
        t_last: None,
        cursor: 0.0,
        interval_charge: 0.0,
        target,
        feedback_tau: opts.feedback_tau_ns,
        window,
        next_feedback: if target.is_some() { window } else { f64::INFINITY },
        window_charge: 0.0,
        ema: i_w,
        latched: false,
        trace: CurrentTrace::default(),
        trace_dt: opts.trace_interval_ns.unwrap_or(f64::INFINITY),
        next_sample: if opts.trace_interval_ns.is_some() && opts.trace_max_samples > 0 {
            0.0
        } else {
            f64::INFINITY
        },
        trace_max: opts.trace_max_samples,
    };

    let mut accept_rng = stream_rng(seed, "detector.accept");
    let mut dark_rng = stream_rng(seed, "detector.dark");
    let dark = (params.dark_rate_cps > 0.0).then(|| Exp::new(params.dark_rate_cps * 1e-9).expect("positive rate"));
    let mut next_dark = dark.as_ref().map_or(f64::INFINITY, |d| d.sample(&mut dark_rng));
    let mut pending = source.next_photon();

    let mut fires: Vec<f64> = Vec::new();
    let mut count = 0u64;
    let mut sums = IntervalSums::default();
    let end = opts.duration_ns;

    loop {
        let photon_t = pending.unwrap_or(f64::INFINITY);
        let is_dark = next_dark < photon_t;
        let t = photon_t.min(next_dark);
        if t > end || t.is_infinite() {
            if end.is_finite() {
                eng.advance(end);
            }
            break;
        }
        eng.advance(t);
        if eng.latched {
            break;
        }
        if is_dark {
            next_dark += dark.as_ref().expect("dark stream").sample(&mut dark_rng);
        } else {
            pending = None;
        }

        let live = eng.t_last.is_none_or(|l| t - l >= params.dead_time_ns);
        let fired = live
            && (is_dark || {
                let nu = params.efficiency_at(eng.current(t));
                nu > 0.0 && accept_rng.random::<f64>() * bound < nu
            });
        if fired {
            if let Some(l) = eng.t_last {
                sums.push(t - l, eng.interval_charge);
            }
            eng.interval_charge = 0.0;
            eng.t_last = Some(t);
            count += 1;
            if opts.record_detections {
                fires.push(t);
            }
            source.skip_until(t + params.dead_time_ns);
            if opts.max_detections.is_some_and(|m| count >= m) {
                break;
            }
        }
        if pending.is_none() {
            pending = source.next_photon();
        }
    }

    let simulated = eng.cursor;
    let detections = jittered(&fires, params.jitter_sigma_ns, simulated, seed)?;

    let n = sums.n;
    let mean_l = sums.l / n;
    let var_l = (sums.l2 - n * mean_l * mean_l) / (n - 1.0);
    let se_l = (var_l.max(0.0) / n).sqrt();
    let ratio = sums.q / sums.l;
    let resid = sums.q2 - 2.0 * ratio * sums.ql + ratio * ratio * sums.l2;
    let se_ratio = (resid.max(0.0) / (n * (n - 1.0))).sqrt() / mean_l;
    let (rate, se_rate) = if n >= 1.0 {
        let r = 1e9 / mean_l;
        (r, r * se_l / mean_l)
    } else {
        (params.dark_rate_cps.min(count as f64 / simulated * 1e9), f64::NAN)
    };

    Ok(DetectorRun {
        detections,
        trace: eng.trace,
        stats: RunStats {
            detections: count,
            simulated_ns: simulated,
            count_rate_cps: if eng.latched { params.dark_rate_cps } else { rate },
            count_rate_std_err: se_rate,
            mean_interval_ns: mean_l,
            mean_interval_std_err: se_l,
            mean_current_ua: ratio,
            mean_current_std_err: se_ratio,
            final_operating_current_ua: eng.i_w,
            latched: eng.latched,
            feedback_tau_ns: target.map(|_| opts.feedback_tau_ns),
        },
    })
}

/// Adds Gaussian timing noise, keeps times inside `[0, duration]`, re-sorts.
fn jittered(fires: &[f64], sigma: f64, duration: f64, seed: u64) -> Result<TimestampStream> {
    let mut times: Vec<f64> = if sigma > 0.0 {
        let mut rng = stream_rng(seed, "detector.jitter");
        fires
            .iter()
            .map(|&t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                t + sigma * z
            })
            .filter(|&t| (0.0..=duration).contains(&t))
            .collect()
    } else {
        fires.to_vec()
    };
    times.sort_by(f64::total_cmp);
    times.dedup();
    TimestampStream::new(times, duration, seed, "detector")
}

/// Runs the detector over a recorded photon stream for its whole duration.
pub fn simulate_detector(
    photons: &TimestampStream,
    params: &DetectorParams,
    regime: BiasRegime,
    seed: u64,
) -> Result<DetectorRun> {
    let opts = SimOptions {
        duration_ns: photons.duration_ns,
        ..Default::default()
    };
    let mut src = StreamSource::new(photons);
    run_detector(&mut src, params, regime, &opts, seed)
}

/// Detector under Poisson illumination of `n_in_cps`, drawing photons already
/// thinned by the largest efficiency the detector can reach.
pub fn simulate_poisson_detector(
    n_in_cps: f64,
    params: &DetectorParams,
    regime: BiasRegime,
    opts: &SimOptions,
    seed: u64,
) -> Result<DetectorRun> {
    let max_current = match regime {
        BiasRegime::VoltageStabilized { operating_current_ua } => operating_current_ua,
        BiasRegime::CurrentStabilized { .. } => params.critical_current_ua,
    };
    let bound = params.efficiency_at(max_current).clamp(f64::MIN_POSITIVE, 1.0);
    let mut src = PoissonSource::thinned(n_in_cps, bound, opts.duration_ns, seed, "photons")?;
    run_detector(&mut src, params, regime, opts, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::EfficiencyCurve;
    use crate::montecarlo::sources::simulate_poisson;

    fn transparent() -> DetectorParams {
        DetectorParams {
            critical_current_ua: 29.0,
            tau_ns: 1e-9,
            dead_time_ns: 0.0,
            efficiency: EfficiencyCurve::Constant(1.0),
            jitter_sigma_ns: 0.0,
            dark_rate_cps: 0.0,
        }
    }

    fn voltage(i: f64) -> BiasRegime {
        BiasRegime::VoltageStabilized { operating_current_ua: i }
    }

    #[test]
    fn transparent_detector_passes_every_photon() {
        let photons = simulate_poisson(1e8, 1e5, 1).unwrap();
        let run = simulate_detector(&photons, &transparent(), voltage(20.0), 2).unwrap();
        assert_eq!(run.detections.times_ns, photons.times_ns);
    }

    #[test]
    fn dead_time_blocks_close_photon() {
        let photons = TimestampStream::new(vec![10.0, 11.0, 20.0], 30.0, 0, "p").unwrap();
        let params = DetectorParams {
            dead_time_ns: 3.0,
            ..transparent()
        };
        let run = simulate_detector(&photons, &params, voltage(20.0), 0).unwrap();
        assert_eq!(run.detections.times_ns, [10.0, 20.0]);
    }

    #[test]
    fn no_two_detections_inside_dead_time() {
        let params = DetectorParams {
            jitter_sigma_ns: 0.0,
            dark_rate_cps: 1e6,
            ..DetectorParams::paper_default()
        };
        let opts = SimOptions {
            duration_ns: 1e6,
            ..Default::default()
        };
        let run = simulate_poisson_detector(5e9, &params, voltage(0.9 * 29.0), &opts, 4).unwrap();
        assert!(run.detections.len() > 1000);
        assert!(run.detections.times_ns.windows(2).all(|w| w[1] - w[0] >= 3.0));
    }

    #[test]
    fn runs_are_bit_identical_per_seed() {
        let params = DetectorParams::paper_default();
        let opts = SimOptions {
            duration_ns: 2e5,
            trace_interval_ns: Some(1.0),
            ..Default::default()
        };
        let a = simulate_poisson_detector(1e9, &params, voltage(24.0), &opts, 9).unwrap();
        let b = simulate_poisson_detector(1e9, &params, voltage(24.0), &opts, 9).unwrap();
        assert_eq!(a, b);
        let c = simulate_poisson_detector(1e9, &params, voltage(24.0), &opts, 10).unwrap();
        assert_ne!(a.detections, c.detections);
    }

    #[test]
    fn trace_current_stays_within_operating_current() {
        let params = DetectorParams::paper_default();
        let opts = SimOptions {
            duration_ns: 1e4,
            trace_interval_ns: Some(0.1),
            ..Default::default()
        };
        let run = simulate_poisson_detector(1e9, &params, voltage(25.0), &opts, 3).unwrap();
        assert!(run.trace.current_ua.iter().all(|&i| (0.0..=25.0).contains(&i)));
        assert_eq!(run.trace.len(), 100_001);
    }

    #[test]
    fn constant_efficiency_thinning_is_poisson() {
        let params = DetectorParams {
            efficiency: EfficiencyCurve::Constant(0.3),
            ..transparent()
        };
        let photons = simulate_poisson(1e8, 1e8, 5).unwrap();
        let run = simulate_detector(&photons, &params, voltage(20.0), 6).unwrap();
        let window = 1e4;
        let bins = (1e8 / window) as usize;
        let mut counts = vec![0f64; bins];
        for &t in &run.detections.times_ns {
            counts[((t / window) as usize).min(bins - 1)] += 1.0;
        }
        let mean = counts.iter().sum::<f64>() / bins as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (bins as f64 - 1.0);
        assert!((mean - 0.3 * 1e8 * window * 1e-9).abs() < 3.0 * (mean / bins as f64).sqrt() * 1.5);
        let dispersion = var / mean;
        let se = (2.0 / (bins as f64 - 1.0)).sqrt();
        assert!((dispersion - 1.0).abs() < 3.0 * se, "index of dispersion {dispersion}");
    }

    #[test]
    fn current_feedback_tracks_set_point() {
        let params = DetectorParams::paper_default();
        let opts = SimOptions {
            duration_ns: 4e5,
            ..Default::default()
        };
        let target = 0.62 * 29.0;
        let run = simulate_poisson_detector(
            1e8,
            &params,
            BiasRegime::CurrentStabilized { mean_current_ua: target },
            &opts,
            8,
        )
        .unwrap();
        assert!(!run.stats.latched);
        assert!((run.stats.mean_current_ua - target).abs() < 0.01 * target);
        assert!(run.stats.final_operating_current_ua > target);
    }

    #[test]
    fn current_feedback_latches_without_fixed_point() {
        let params = DetectorParams::paper_default();
        let opts = SimOptions {
            duration_ns: 2e5,
            ..Default::default()
        };
        let run = simulate_poisson_detector(
            1e11,
            &params,
            BiasRegime::CurrentStabilized {
                mean_current_ua: 0.62 * 29.0,
            },
            &opts,
            8,
        )
        .unwrap();
        assert!(run.stats.latched);
        assert_eq!(run.stats.count_rate_cps, params.dark_rate_cps);
    }
}
