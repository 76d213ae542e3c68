//! Side-by-side runs of the analytic models and the Monte Carlo simulator.

use rayon::prelude::*;

use crate::detector::{
    self, BiasRegime, DetectorParams, EfficiencyCurve, FiringOptions, FixedPointOptions, OperatingPoint,
};
use crate::error::Result;
use crate::montecarlo::rng::derive_seed;
use crate::montecarlo::{
    self, hbt_correlate, simulate_poisson_detector, CorrelationMode, EmitterSource, ExpFit, PulsedEmitterParams,
    PulsedEmitterSource, SimOptions,
};
use crate::photon_stats::{
    g2_forward_background, g2_ideal_curve, jitter_convolve, symmetric_grid, ChannelRates, EmitterParams,
    JitterModel,
};

#[derive(Debug, Clone, PartialEq)]
pub struct CountRateCheck {
    pub operating_current_ua: f64,
    pub input_rate_cps: f64,
    pub analytic_cps: f64,
    pub mc_cps: f64,
    pub mc_std_err: f64,
    pub analytic_mean_current_ua: f64,
    pub mc_mean_current_ua: f64,
    pub mc_mean_current_std_err: f64,
    pub detections: u64,
}

impl CountRateCheck {
    pub fn rate_rel_err(&self) -> f64 {
        (self.mc_cps - self.analytic_cps).abs() / self.analytic_cps
    }

    pub fn rate_z(&self) -> f64 {
        (self.mc_cps - self.analytic_cps).abs() / self.mc_std_err
    }

    pub fn current_rel_err(&self) -> f64 {
        (self.mc_mean_current_ua - self.analytic_mean_current_ua).abs() / self.analytic_mean_current_ua
    }

    pub fn current_z(&self) -> f64 {
        (self.mc_mean_current_ua - self.analytic_mean_current_ua).abs() / self.mc_mean_current_std_err
    }
}

/// Analytic and simulated count rate and mean current at fixed operating
/// currents, `detections` simulated firings per point, points in parallel.
pub fn count_rate_checks(
    points: &[(f64, f64)],
    params: &DetectorParams,
    detections: u64,
    seed: u64,
) -> Result<Vec<CountRateCheck>> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, &(i_w, n_in))| {
            let dist = detector::firing_distribution(i_w, n_in, params, &FiringOptions::default())?;
            let opts = SimOptions {
                max_detections: Some(detections + 1),
                record_detections: false,
                ..Default::default()
            };
            let regime = BiasRegime::VoltageStabilized {
                operating_current_ua: i_w,
            };
            let run = simulate_poisson_detector(n_in, params, regime, &opts, derive_seed(seed, "count-rate", k as u64))?;
            Ok(CountRateCheck {
                operating_current_ua: i_w,
                input_rate_cps: n_in,
                analytic_cps: detector::count_rate(&dist, params.dark_rate_cps),
                mc_cps: run.stats.count_rate_cps,
                mc_std_err: run.stats.count_rate_std_err,
                analytic_mean_current_ua: dist.mean_current_ua,
                mc_mean_current_ua: run.stats.mean_current_ua,
                mc_mean_current_std_err: run.stats.mean_current_std_err,
                detections: run.stats.detections,
            })
        })
        .collect()
}

/// Grid of `(I_w, N_in)` points covering low flux to saturation.
pub fn default_count_rate_points(params: &DetectorParams) -> Vec<(f64, f64)> {
    let ic = params.critical_current_ua;
    let mut pts = Vec::new();
    for frac in [0.72, 0.8, 0.9, 0.97] {
        for n_in in [1e4, 1e6, 1e8, 1e9, 1e10, 1e11] {
            pts.push((frac * ic, n_in));
        }
    }
    pts
}

/// Two-level emitter observed through a 50/50 beamsplitter and two identical
/// detectors with constant efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct HbtScenario {
    pub lifetime_ns: f64,
    pub excitation_rate_per_ns: f64,
    /// Fraction of emitted photons reaching the beamsplitter.
    pub collection_efficiency: f64,
    pub qe: f64,
    pub jitter_fwhm_ns: f64,
    pub dark_cps: f64,
    pub dead_time_ns: f64,
    pub duration_ns: f64,
    pub bin_width_ns: f64,
    pub window_ns: f64,
}

impl HbtScenario {
    /// 3 ns lifetime at R = gamma / 10; SSPD pair with QE 0.2, 62 ps jitter,
    /// 0.1 cps dark counts and 3 ns dead time; about 1 Mcps per detector.
    pub fn sspd_reference() -> Self {
        Self {
            lifetime_ns: 3.0,
            excitation_rate_per_ns: 1.0 / 30.0,
            collection_efficiency: 0.33,
            qe: 0.2,
            jitter_fwhm_ns: 0.062,
            dark_cps: 0.1,
            dead_time_ns: 3.0,
            duration_ns: 3e9,
            bin_width_ns: 1.0,
            window_ns: 30.5,
        }
    }

    fn emitter(&self) -> Result<EmitterParams> {
        EmitterParams::from_lifetime(
            self.lifetime_ns,
            self.excitation_rate_per_ns,
            self.collection_efficiency * self.qe,
        )
    }

    fn detector(&self) -> DetectorParams {
        DetectorParams {
            critical_current_ua: 29.0,
            tau_ns: 1e-6,
            dead_time_ns: self.dead_time_ns,
            // Photon losses are already in the emitter yield.
            efficiency: EfficiencyCurve::Constant(1.0),
            jitter_sigma_ns: JitterModel::from_fwhm_ns(self.jitter_fwhm_ns).sigma_ns,
            dark_rate_cps: self.dark_cps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtBin {
    pub center_ns: f64,
    pub counts: u64,
    pub mc_g2: f64,
    pub analytic_g2: f64,
    pub std_err: f64,
}

impl HbtBin {
    pub fn z(&self) -> f64 {
        (self.mc_g2 - self.analytic_g2) / self.std_err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtCheck {
    pub bins: Vec<HbtBin>,
    pub coincidences: u64,
    pub rates: ChannelRates,
}

impl HbtCheck {
    pub fn max_abs_z(&self) -> f64 {
        self.bins.iter().map(|b| b.z().abs()).fold(0.0, f64::max)
    }
}

/// Analytic measured `g2` averaged over each bin: ideal curve, background,
/// jitter, then bin averaging on a fine grid.
pub fn analytic_binned_g2(
    emitter: &EmitterParams,
    rates: &ChannelRates,
    jitter: &JitterModel,
    bin_edges_ns: &[f64],
) -> Result<Vec<f64>> {
    let reach = bin_edges_ns[0].abs().max(bin_edges_ns[bin_edges_ns.len() - 1].abs());
    let width = 1.0 / emitter.total_rate_per_ns();
    let spacing = if jitter.sigma_ns > 0.0 {
        (jitter.sigma_ns / 8.0).min(width / 100.0)
    } else {
        width / 100.0
    };
    let grid = symmetric_grid(reach + 8.0 * jitter.sigma_ns + spacing, spacing)?;
    let measured = g2_forward_background(&g2_ideal_curve(&grid, emitter)?, rates)?;
    let curve = jitter_convolve(&measured, jitter)?;
    Ok(bin_edges_ns
        .windows(2)
        .map(|w| {
            let sub = 200;
            let h = (w[1] - w[0]) / sub as f64;
            (0..sub).map(|k| curve.value_at(w[0] + (k as f64 + 0.5) * h)).sum::<f64>() / sub as f64
        })
        .collect())
}

pub fn hbt_check(s: &HbtScenario, seed: u64) -> Result<HbtCheck> {
    let emitter = s.emitter()?;
    let det = s.detector();
    let mut source = EmitterSource::new(&emitter, s.duration_ns, seed, "hbt.emitter")?;
    let photons = montecarlo::sources::collect(&mut source, s.duration_ns, seed, "hbt.emitter")?;
    let (a, b) = montecarlo::split_beamsplitter(&photons, 0.5, derive_seed(seed, "hbt.split", 0))?;
    let regime = BiasRegime::VoltageStabilized {
        operating_current_ua: 0.9 * det.critical_current_ua,
    };
    let (d1, d2) = rayon::join(
        || montecarlo::simulate_detector(&a, &det, regime, derive_seed(seed, "hbt.detector", 1)),
        || montecarlo::simulate_detector(&b, &det, regime, derive_seed(seed, "hbt.detector", 2)),
    );
    let (d1, d2) = (d1?, d2?);
    let hist = hbt_correlate(&d1.detections, &d2.detections, s.bin_width_ns, s.window_ns, CorrelationMode::Full)?;

    let signal = |d: &montecarlo::DetectorRun| (d.detections.rate_cps() - s.dark_cps).max(0.0);
    let rates = ChannelRates::new([signal(&d1), signal(&d2)], [s.dark_cps, s.dark_cps])?;
    let sigma = det.jitter_sigma_ns;
    let jitter = JitterModel::combined(sigma, sigma);
    let analytic = analytic_binned_g2(&emitter, &rates, &jitter, &hist.bin_edges_ns)?;
    let errors = hist.std_errors(&analytic);
    let bins = hist
        .bin_centers_ns()
        .into_iter()
        .enumerate()
        .map(|(k, c)| HbtBin {
            center_ns: c,
            counts: hist.counts[k],
            mc_g2: hist.g2_estimate[k],
            analytic_g2: analytic[k],
            std_err: errors[k],
        })
        .collect();
    Ok(HbtCheck {
        bins,
        coincidences: hist.total_counts(),
        rates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcspcScenario {
    pub lifetime_ns: f64,
    pub sync_period_ns: f64,
    /// Detected photons per excitation pulse.
    pub photons_per_pulse: f64,
    pub jitter_fwhm_ns: f64,
    pub dead_time_ns: f64,
    pub target_counts: u64,
    pub bin_width_ns: f64,
    pub fit_start_ns: f64,
    pub fit_end_ns: f64,
}

impl TcspcScenario {
    pub fn reference(lifetime_ns: f64) -> Self {
        Self {
            lifetime_ns,
            sync_period_ns: 200.0,
            photons_per_pulse: 0.02,
            jitter_fwhm_ns: 0.0,
            dead_time_ns: 3.0,
            target_counts: 200_000,
            bin_width_ns: 0.5,
            fit_start_ns: 2.0,
            fit_end_ns: 6.0 * lifetime_ns,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TcspcCheck {
    pub histogram: montecarlo::DecayHistogram,
    pub fit: montecarlo::LifetimeFit,
}

impl TcspcCheck {
    pub fn rel_err(&self, lifetime_ns: f64) -> f64 {
        (self.fit.lifetime_ns - lifetime_ns).abs() / lifetime_ns
    }
}

pub fn tcspc_check(s: &TcspcScenario, seed: u64) -> Result<TcspcCheck> {
    let pulses = s.target_counts as f64 / s.photons_per_pulse;
    let duration = pulses * s.sync_period_ns;
    let params = PulsedEmitterParams {
        period_ns: s.sync_period_ns,
        excitation_probability: 1.0,
        lifetime_ns: s.lifetime_ns,
        radiative_yield: s.photons_per_pulse,
    };
    let det = DetectorParams {
        critical_current_ua: 29.0,
        tau_ns: 1e-6,
        dead_time_ns: s.dead_time_ns,
        efficiency: EfficiencyCurve::Constant(1.0),
        jitter_sigma_ns: JitterModel::from_fwhm_ns(s.jitter_fwhm_ns).sigma_ns,
        dark_rate_cps: 0.0,
    };
    let mut source = PulsedEmitterSource::new(&params, duration, seed, "tcspc.emitter")?;
    let opts = SimOptions {
        duration_ns: duration,
        ..Default::default()
    };
    let regime = BiasRegime::VoltageStabilized {
        operating_current_ua: 0.9 * det.critical_current_ua,
    };
    let run = montecarlo::run_detector(&mut source, &det, regime, &opts, derive_seed(seed, "tcspc.detector", 0))?;
    let histogram = montecarlo::tcspc_histogram(&run.detections, s.sync_period_ns, 0.0, s.bin_width_ns)?;
    let fit = montecarlo::fit_tail_lifetime(&histogram, s.fit_start_ns, s.fit_end_ns)?;
    Ok(TcspcCheck { histogram, fit })
}

/// High-rate operating point under current stabilization and the detector
/// current simulated there.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceCheck {
    pub input_rate_cps: f64,
    pub operating_point: OperatingPoint,
    pub analytic_mean_current_ua: f64,
    pub mc_trace_mean_ua: f64,
    pub mc_count_rate_cps: f64,
    /// Fit of the longest recorded recovery segment.
    pub segment_fit: ExpFit,
}

/// Finds the input rate at which a detector stabilized at `bias_frac * I_c`
/// counts at `target_cps`, then simulates it at the resulting operating
/// current and compares the sampled current with the analytic mean.
pub fn trace_check(
    params: &DetectorParams,
    bias_frac: f64,
    target_cps: f64,
    duration_ns: f64,
    seed: u64,
) -> Result<TraceCheck> {
    let (n_in, point) = detector::operating_point_for_count_rate(
        bias_frac * params.critical_current_ua,
        target_cps,
        params,
        &FixedPointOptions::default(),
    )?;
    let i_w = point.operating_current_ua.expect("non-latched by construction");
    let analytic_mean = detector::mean_current_at(i_w, n_in, params, &FiringOptions::default())?;
    let opts = SimOptions {
        duration_ns,
        trace_interval_ns: Some(0.01),
        trace_max_samples: usize::MAX,
        ..Default::default()
    };
    let mut run = simulate_poisson_detector(
        n_in,
        params,
        BiasRegime::VoltageStabilized {
            operating_current_ua: i_w,
        },
        &opts,
        seed,
    )?;
    // Longest gap between successive pre-jitter firings, read off the trace
    // as the stretch between two zero-current samples.
    let zeros: Vec<f64> = run
        .trace
        .sample_times_ns
        .iter()
        .zip(&run.trace.current_ua)
        .zip(run.trace.current_ua.iter().skip(1))
        .filter(|((_, &now), &next)| next < now)
        .map(|((&t, _), _)| t)
        .collect();
    let (start, end) = zeros
        .windows(2)
        .map(|w| (w[0], w[1]))
        .fold((0.0, 0.0), |best, (a, b)| if b - a > best.1 - best.0 { (a, b) } else { best });
    let dt = 0.01;
    let segment_fit = run.trace.fit_segment(start + dt, end)?;
    Ok(TraceCheck {
        input_rate_cps: n_in,
        operating_point: point,
        analytic_mean_current_ua: analytic_mean,
        mc_trace_mean_ua: run.trace.mean_current(),
        mc_count_rate_cps: run.stats.count_rate_cps,
        segment_fit,
    })
}
