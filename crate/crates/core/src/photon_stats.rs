//! Second-order correlation of a two-level emitter under incoherent pumping,
//! as seen through a pair of imperfect detectors.
//!
//! Rates in this module are per nanosecond for emitter dynamics and counts per
//! second for detector channels.

use rayon::prelude::*;

use crate::detector::FWHM_PER_SIGMA;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    /// Pumping rate `R`, per ns.
    pub excitation_rate_per_ns: f64,
    /// Spontaneous decay rate `gamma`, per ns.
    pub decay_rate_per_ns: f64,
    /// Fraction of decays that yield a photon in the collected band.
    pub radiative_yield: f64,
}

impl EmitterParams {
    pub fn new(excitation_rate_per_ns: f64, decay_rate_per_ns: f64, radiative_yield: f64) -> Result<Self> {
        let e = Self {
            excitation_rate_per_ns,
            decay_rate_per_ns,
            radiative_yield,
        };
        e.validate()?;
        Ok(e)
    }

    /// Emitter with the given excited-state lifetime and pumping rate.
    pub fn from_lifetime(lifetime_ns: f64, excitation_rate_per_ns: f64, radiative_yield: f64) -> Result<Self> {
        if !(lifetime_ns > 0.0) {
            return Err(Error::InvalidParameter(format!("lifetime {lifetime_ns} ns must be > 0")));
        }
        Self::new(excitation_rate_per_ns, 1.0 / lifetime_ns, radiative_yield)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.excitation_rate_per_ns >= 0.0 && self.excitation_rate_per_ns.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "excitation rate {} /ns must be >= 0",
                self.excitation_rate_per_ns
            )));
        }
        if !(self.decay_rate_per_ns > 0.0 && self.decay_rate_per_ns.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "decay rate {} /ns must be > 0",
                self.decay_rate_per_ns
            )));
        }
        if !(self.radiative_yield > 0.0 && self.radiative_yield <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "radiative yield {} must be in (0, 1]",
                self.radiative_yield
            )));
        }
        Ok(())
    }

    /// `R + gamma`, the inverse width of the antibunching dip.
    pub fn total_rate_per_ns(&self) -> f64 {
        self.excitation_rate_per_ns + self.decay_rate_per_ns
    }

    pub fn steady_state_population(&self) -> f64 {
        self.excitation_rate_per_ns / self.total_rate_per_ns()
    }

    /// Mean rate of collected-band photons, cps.
    pub fn emission_rate_cps(&self) -> f64 {
        self.radiative_yield * self.decay_rate_per_ns * self.steady_state_population() * 1e9
    }
}

/// Mean rates on the two detectors of an HBT setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRates {
    pub signal_cps: [f64; 2],
    /// Background plus dark counts.
    pub noise_cps: [f64; 2],
}

impl ChannelRates {
    pub fn new(signal_cps: [f64; 2], noise_cps: [f64; 2]) -> Result<Self> {
        for v in signal_cps.iter().chain(&noise_cps) {
            if !(*v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("channel rate {v} cps must be >= 0")));
            }
        }
        Ok(Self { signal_cps, noise_cps })
    }

    /// Equal split of a total signal and total noise between both channels.
    pub fn balanced(total_signal_cps: f64, total_noise_cps: f64) -> Result<Self> {
        let s = 0.5 * total_signal_cps;
        let n = 0.5 * total_noise_cps;
        Self::new([s, s], [n, n])
    }

    pub fn total_cps(&self, channel: usize) -> f64 {
        self.signal_cps[channel] + self.noise_cps[channel]
    }

    /// `S1 S2 / (I1 I2)`: the weight of the true correlation in the measured one.
    pub fn signal_fraction(&self) -> Result<f64> {
        for ch in 0..2 {
            if self.total_cps(ch) <= 0.0 {
                return Err(Error::ZeroTotalRate { channel: ch + 1 });
            }
        }
        Ok(self.signal_cps[0] * self.signal_cps[1] / (self.total_cps(0) * self.total_cps(1)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Curve {
    pub tau_grid_ns: Vec<f64>,
    pub values: Vec<f64>,
    /// Combined jitter already applied to `values`.
    pub jitter_sigma_ns: f64,
    /// Channel rates already folded into `values`, if any.
    pub rates: Option<ChannelRates>,
}

impl G2Curve {
    pub fn new(tau_grid_ns: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if tau_grid_ns.len() != values.len() || tau_grid_ns.is_empty() {
            return Err(Error::InvalidParameter("g2 grid and values must have equal non-zero length".into()));
        }
        if tau_grid_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("g2 grid must be strictly increasing".into()));
        }
        Ok(Self {
            tau_grid_ns,
            values,
            jitter_sigma_ns: 0.0,
            rates: None,
        })
    }

    /// Value at `tau_ns` by linear interpolation; edge values outside the grid.
    pub fn value_at(&self, tau_ns: f64) -> f64 {
        let g = &self.tau_grid_ns;
        let i = g.partition_point(|&t| t <= tau_ns);
        if i == 0 {
            return self.values[0];
        }
        if i == g.len() {
            return self.values[g.len() - 1];
        }
        let w = (tau_ns - g[i - 1]) / (g[i] - g[i - 1]);
        self.values[i - 1] + w * (self.values[i] - self.values[i - 1])
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            tau_grid_ns: self.tau_grid_ns.clone(),
            values,
            jitter_sigma_ns: self.jitter_sigma_ns,
            rates: self.rates,
        }
    }
}

/// Gaussian timing uncertainty of a start-stop delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterModel {
    pub sigma_ns: f64,
}

impl JitterModel {
    pub fn none() -> Self {
        Self { sigma_ns: 0.0 }
    }

    pub fn from_fwhm_ns(fwhm_ns: f64) -> Self {
        Self {
            sigma_ns: fwhm_ns / FWHM_PER_SIGMA,
        }
    }

    /// Delay error of two independent detectors.
    pub fn combined(sigma1_ns: f64, sigma2_ns: f64) -> Self {
        Self {
            sigma_ns: sigma1_ns.hypot(sigma2_ns),
        }
    }

    pub fn fwhm_ns(&self) -> f64 {
        self.sigma_ns * FWHM_PER_SIGMA
    }
}

/// Excited-state population a time `t_ns` after an emission.
pub fn excited_population(t_ns: f64, emitter: &EmitterParams) -> Result<f64> {
    if !(t_ns >= 0.0) {
        return Err(Error::Domain(format!("time since emission {t_ns} ns must be >= 0")));
    }
    let k = emitter.total_rate_per_ns();
    Ok(-emitter.steady_state_population() * (-t_ns * k).exp_m1())
}

/// `1 - exp(-|tau| (R + gamma))`.
pub fn g2_ideal(tau_ns: f64, emitter: &EmitterParams) -> f64 {
    -(-tau_ns.abs() * emitter.total_rate_per_ns()).exp_m1()
}

pub fn g2_ideal_curve(tau_grid_ns: &[f64], emitter: &EmitterParams) -> Result<G2Curve> {
    emitter.validate()?;
    G2Curve::new(
        tau_grid_ns.to_vec(),
        tau_grid_ns.iter().map(|&t| g2_ideal(t, emitter)).collect(),
    )
}

/// `{k h : k = -n..=n}` with `n = ceil(half_span / spacing)`. Exactly symmetric.
pub fn symmetric_grid(half_span_ns: f64, spacing_ns: f64) -> Result<Vec<f64>> {
    if !(spacing_ns > 0.0 && half_span_ns >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {spacing_ns} ns must be > 0 and half span {half_span_ns} ns >= 0"
        )));
    }
    let n = (half_span_ns / spacing_ns).ceil() as i64;
    Ok((-n..=n).map(|k| k as f64 * spacing_ns).collect())
}

/// Measured correlation when uncorrelated noise adds to the signal:
/// `(g S1 S2 + N1 N2 + N1 S2 + N2 S1) / (I1 I2) = 1 + (g - 1) S1 S2 / (I1 I2)`.
pub fn g2_forward_background(g2_true: &G2Curve, rates: &ChannelRates) -> Result<G2Curve> {
    let rho = rates.signal_fraction()?;
    let values = if rho == 1.0 {
        g2_true.values.clone()
    } else {
        g2_true.values.iter().map(|&g| 1.0 + (g - 1.0) * rho).collect()
    };
    let mut out = g2_true.with_values(values);
    out.rates = Some(*rates);
    Ok(out)
}

/// Exact inverse of [`g2_forward_background`].
pub fn g2_compensate_background(g2_measured: &G2Curve, rates: &ChannelRates) -> Result<G2Curve> {
    for ch in 0..2 {
        if !(rates.signal_cps[ch] > 0.0) {
            return Err(Error::NoSignal {
                channel: ch + 1,
                signal_cps: rates.signal_cps[ch],
            });
        }
    }
    let rho = rates.signal_fraction()?;
    let values = if rho == 1.0 {
        g2_measured.values.clone()
    } else {
        g2_measured.values.iter().map(|&g| 1.0 + (g - 1.0) / rho).collect()
    };
    let mut out = g2_measured.with_values(values);
    out.rates = None;
    Ok(out)
}

/// Normalized discrete Gaussian on a uniform grid, truncated at six sigma.
fn gaussian_kernel(sigma: f64, spacing: f64) -> Vec<f64> {
    let half = (6.0 * sigma / spacing).ceil() as i64;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|k| {
            let x = k as f64 * spacing / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let mass: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= mass);
    kernel
}

/// Convolves with the jitter Gaussian. The grid must be uniform with spacing
/// at most `sigma / 4`; values beyond the grid are taken equal to the edge
/// values.
pub fn jitter_convolve(curve: &G2Curve, jitter: &JitterModel) -> Result<G2Curve> {
    let sigma = jitter.sigma_ns;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("jitter sigma {sigma} ns must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(curve.clone());
    }
    let grid = &curve.tau_grid_ns;
    if grid.len() < 2 {
        return Err(Error::GridTooCoarse {
            spacing_ns: f64::INFINITY,
            required_ns: sigma / 4.0,
        });
    }
    let h = (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64;
    if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::InvalidParameter("jitter convolution needs a uniform grid".into()));
    }
    if h > sigma / 4.0 * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse {
            spacing_ns: h,
            required_ns: sigma / 4.0,
        });
    }

    let kernel = gaussian_kernel(sigma, h);
    let half = (kernel.len() / 2) as i64;
    let n = curve.values.len() as i64;
    let v = &curve.values;
    let values = (0..n)
        .into_par_iter()
        .map(|i| {
            // Pair symmetric taps so even inputs stay exactly even.
            let at = |j: i64| v[j.clamp(0, n - 1) as usize];
            let mut acc = kernel[half as usize] * at(i);
            for k in (1..=half).rev() {
                acc += kernel[(half + k) as usize] * (at(i - k) + at(i + k));
            }
            acc
        })
        .collect();
    let mut out = curve.with_values(values);
    out.jitter_sigma_ns = curve.jitter_sigma_ns.hypot(sigma);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorScenario {
    pub name: String,
    pub qe: f64,
    /// Dark counts per detector.
    pub dark_cps: f64,
    /// Jitter of one detector; the pair combines in quadrature.
    pub jitter_sigma_ns: f64,
}

/// Light reaching the detectors. Both rates are counts at `reference_qe` and
/// scale linearly with detector QE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    /// Emitter counts summed over both detectors.
    pub signal_cps: f64,
    /// Stray-light counts summed over both detectors.
    pub background_cps: f64,
    pub reference_qe: f64,
}

impl Scene {
    pub fn snr(&self) -> f64 {
        self.signal_cps / self.background_cps
    }

    pub fn channel_rates(&self, scenario: &DetectorScenario) -> Result<ChannelRates> {
        if !(self.reference_qe > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "reference QE {} must be > 0",
                self.reference_qe
            )));
        }
        let scale = scenario.qe / self.reference_qe;
        let s = 0.5 * self.signal_cps * scale;
        let n = 0.5 * self.background_cps * scale + scenario.dark_cps;
        ChannelRates::new([s, s], [n, n])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    /// Pumping rate held fixed across lifetimes, per ns.
    pub excitation_rate_per_ns: f64,
    /// Grid spacing as a fraction of the combined jitter sigma.
    pub spacing_per_sigma: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            // R / gamma = 0.1 at a 3 ns lifetime.
            excitation_rate_per_ns: 1.0 / 30.0,
            spacing_per_sigma: 0.125,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lifetime_ns: f64,
    pub scenario: String,
    pub g2_zero: f64,
}

/// Measured `g2(0)` after background and jitter, per lifetime and detector.
pub fn g2_zero_at(lifetime_ns: f64, scenario: &DetectorScenario, scene: &Scene, opts: &SweepOptions) -> Result<f64> {
    if !(scenario.qe > 0.0 && scenario.qe <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "scenario {}: QE {} must be in (0, 1]",
            scenario.name, scenario.qe
        )));
    }
    if !(scenario.dark_cps >= 0.0 && scenario.jitter_sigma_ns >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scenario {}: dark rate and jitter must be >= 0",
            scenario.name
        )));
    }
    let emitter = EmitterParams::from_lifetime(lifetime_ns, opts.excitation_rate_per_ns, 1.0)?;
    let rates = scene.channel_rates(scenario)?;
    let jitter = JitterModel::combined(scenario.jitter_sigma_ns, scenario.jitter_sigma_ns);
    if jitter.sigma_ns == 0.0 {
        let ideal = G2Curve::new(vec![0.0], vec![g2_ideal(0.0, &emitter)])?;
        return Ok(g2_forward_background(&ideal, &rates)?.values[0]);
    }
    let width = 1.0 / emitter.total_rate_per_ns();
    let spacing = (jitter.sigma_ns * opts.spacing_per_sigma).min(width / 50.0);
    let grid = symmetric_grid(7.0 * jitter.sigma_ns, spacing)?;
    let measured = g2_forward_background(&g2_ideal_curve(&grid, &emitter)?, &rates)?;
    let convolved = jitter_convolve(&measured, &jitter)?;
    Ok(convolved.values[grid.len() / 2])
}

/// One row per `(lifetime, scenario)`, lifetimes outermost, input order kept.
pub fn g2_zero_sweep(
    lifetimes_ns: &[f64],
    scenarios: &[DetectorScenario],
    scene: &Scene,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if scenarios.is_empty() {
        return Err(Error::InvalidParameter("at least one detector scenario is required".into()));
    }
    if let Some(bad) = lifetimes_ns.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::InvalidParameter(format!("lifetime {bad} ns must be > 0")));
    }
    let pairs: Vec<(f64, &DetectorScenario)> = lifetimes_ns
        .iter()
        .flat_map(|&l| scenarios.iter().map(move |s| (l, s)))
        .collect();
    pairs
        .par_iter()
        .map(|&(lifetime_ns, s)| {
            Ok(SweepRow {
                lifetime_ns,
                scenario: s.name.clone(),
                g2_zero: g2_zero_at(lifetime_ns, s, scene, opts)?,
            })
        })
        .collect()
}
