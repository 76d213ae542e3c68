//! Counting dynamics of a current-biased superconducting nanowire.
//!
//! After each firing the bias current recovers as `I(t) = I_w (1 - exp(-t/tau))`
//! and the detector is blind for a hard dead time. The waiting time to the next
//! firing under a photon flux `N_in` has survival
//! `S(t) = exp(-N_in * integral_0^t nu(I(s)) ds)`, density `p(t) = -S'(t)`.
//! Count rate is the inverse mean waiting time and the mean current is the
//! time average of `I(t)` over the waiting-time distribution.
//!
//! Under current stabilization the supply holds the *mean* current fixed, so
//! the operating current `I_w` is the solution of `mean_current(I_w) = I_bar0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{self, OdeOptions, Step};

/// FWHM of a Gaussian divided by its standard deviation, `2 sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Detection efficiency as a function of bias current.
#[derive(Debug, Clone, PartialEq)]
pub enum EfficiencyCurve {
    /// Logistic in `I / I_c`, shifted and rescaled so that `nu(0) = 0` and
    /// `nu -> nu_max` at large current:
    /// `nu = nu_max (s(x) - s(0)) / (1 - s(0))`, `s(x) = 1 / (1 + exp(-(x - center) / width))`.
    Sigmoid {
        nu_max: f64,
        center_frac: f64,
        width_frac: f64,
    },
    /// Piecewise-linear `(current_ua, efficiency)` samples, clamped at both ends.
    Tabulated { samples: Vec<(f64, f64)> },
    /// Current-independent efficiency.
    Constant(f64),
}

impl EfficiencyCurve {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Sigmoid {
                nu_max,
                center_frac,
                width_frac,
            } => {
                if !(*nu_max > 0.0 && *nu_max <= 1.0) {
                    return Err(Error::InvalidParameter(format!("nu_max {nu_max} must be in (0, 1]")));
                }
                if !(*center_frac > 0.0 && *center_frac < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "sigmoid center {center_frac} must be in (0, 1)"
                    )));
                }
                if !(*width_frac > 0.0) {
                    return Err(Error::InvalidParameter(format!("sigmoid width {width_frac} must be > 0")));
                }
            }
            Self::Tabulated { samples } => {
                if samples.len() < 2 {
                    return Err(Error::InvalidParameter("efficiency table needs >= 2 samples".into()));
                }
                for (i, &(current, nu)) in samples.iter().enumerate() {
                    if !(0.0..=1.0).contains(&nu) {
                        return Err(Error::InvalidParameter(format!("efficiency {nu} outside [0, 1]")));
                    }
                    if i > 0 {
                        let (prev_i, prev_nu) = samples[i - 1];
                        if current <= prev_i {
                            return Err(Error::InvalidParameter(
                                "efficiency table currents must be strictly increasing".into(),
                            ));
                        }
                        if nu < prev_nu {
                            return Err(Error::InvalidParameter(
                                "efficiency must be non-decreasing in current".into(),
                            ));
                        }
                    }
                }
            }
            Self::Constant(nu) => {
                if !(0.0..=1.0).contains(nu) {
                    return Err(Error::InvalidParameter(format!("efficiency {nu} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    pub fn efficiency(&self, current_ua: f64, critical_current_ua: f64) -> f64 {
        match self {
            Self::Sigmoid {
                nu_max,
                center_frac,
                width_frac,
            } => {
                let x = (current_ua / critical_current_ua).max(0.0);
                let s = |x: f64| 1.0 / (1.0 + (-(x - center_frac) / width_frac).exp());
                let s0 = s(0.0);
                nu_max * ((s(x) - s0) / (1.0 - s0)).max(0.0)
            }
            Self::Tabulated { samples } => {
                let first = samples[0];
                let last = samples[samples.len() - 1];
                if current_ua <= first.0 {
                    return first.1;
                }
                if current_ua >= last.0 {
                    return last.1;
                }
                let i = samples.partition_point(|s| s.0 <= current_ua) - 1;
                let (i0, n0) = samples[i];
                let (i1, n1) = samples[i + 1];
                n0 + (current_ua - i0) / (i1 - i0) * (n1 - n0)
            }
            Self::Constant(nu) => *nu,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorParams {
    pub critical_current_ua: f64,
    /// Current recovery time constant.
    pub tau_ns: f64,
    /// Hard zero-efficiency window after each firing.
    pub dead_time_ns: f64,
    pub efficiency: EfficiencyCurve,
    pub jitter_sigma_ns: f64,
    pub dark_rate_cps: f64,
}

impl DetectorParams {
    /// I_c = 29 uA, dead time 3 ns, 62 ps FWHM jitter, 0.1 cps dark rate,
    /// tau = 2.33 ns and a logistic efficiency saturating at 0.20 near 0.8 I_c.
    pub fn paper_default() -> Self {
        Self {
            critical_current_ua: 29.0,
            tau_ns: 2.33,
            dead_time_ns: 3.0,
            efficiency: EfficiencyCurve::Sigmoid {
                nu_max: 0.20,
                center_frac: 0.70,
                width_frac: 0.025,
            },
            jitter_sigma_ns: 0.062 / FWHM_PER_SIGMA,
            dark_rate_cps: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be > 0")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be >= 0")))
            }
        };
        positive("critical current", self.critical_current_ua)?;
        positive("tau", self.tau_ns)?;
        non_negative("dead time", self.dead_time_ns)?;
        non_negative("jitter sigma", self.jitter_sigma_ns)?;
        non_negative("dark rate", self.dark_rate_cps)?;
        self.efficiency.validate()
    }

    pub fn efficiency_at(&self, current_ua: f64) -> f64 {
        self.efficiency.efficiency(current_ua, self.critical_current_ua)
    }

    /// Efficiency at time `t_ns` after a firing at operating current `i_w_ua`,
    /// zero inside the dead time.
    pub fn efficiency_after_fire(&self, i_w_ua: f64, t_ns: f64) -> f64 {
        if t_ns < self.dead_time_ns {
            0.0
        } else {
            self.efficiency_at(recovering_current(i_w_ua, t_ns, self.tau_ns))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasRegime {
    /// Supply holds the time-averaged detector current at `mean_current_ua`.
    CurrentStabilized { mean_current_ua: f64 },
    /// Supply holds the operating current itself.
    VoltageStabilized { operating_current_ua: f64 },
}

impl BiasRegime {
    pub fn validate(&self, params: &DetectorParams) -> Result<()> {
        let (name, value) = match *self {
            Self::CurrentStabilized { mean_current_ua } => ("stabilized mean current", mean_current_ua),
            Self::VoltageStabilized { operating_current_ua } => ("operating current", operating_current_ua),
        };
        if value > 0.0 && value < params.critical_current_ua {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "{name} {value} uA must lie in (0, I_c = {} uA)",
                params.critical_current_ua
            )))
        }
    }
}

fn recovering_current(i_w_ua: f64, t_ns: f64, tau_ns: f64) -> f64 {
    -i_w_ua * (-t_ns / tau_ns).exp_m1()
}

/// `integral_0^t I(s) ds` for the recovering current.
fn recovered_charge(i_w_ua: f64, t_ns: f64, tau_ns: f64) -> f64 {
    i_w_ua * (t_ns + tau_ns * (-t_ns / tau_ns).exp_m1())
}

/// Detector current `t_ns` after a firing: `I_w (1 - exp(-t / tau))`.
pub fn current_after_fire(i_w_ua: f64, t_ns: f64, tau_ns: f64) -> Result<f64> {
    if !(t_ns >= 0.0) {
        return Err(Error::Domain(format!("time since firing {t_ns} ns must be >= 0")));
    }
    if !(tau_ns > 0.0) {
        return Err(Error::Domain(format!("tau {tau_ns} ns must be > 0")));
    }
    Ok(recovering_current(i_w_ua, t_ns, tau_ns))
}

/// Mean current for strictly periodic firing with period `period_ns`:
/// `I_w (1 + (tau / T)(exp(-T / tau) - 1))`.
pub fn periodic_mean_current(i_w_ua: f64, period_ns: f64, tau_ns: f64) -> f64 {
    recovered_charge(i_w_ua, period_ns, tau_ns) / period_ns
}

#[derive(Debug, Clone, Copy)]
pub struct FiringOptions {
    pub rtol: f64,
    /// Upper bound on the integrator step; `None` lets it adapt freely.
    pub max_step_ns: Option<f64>,
}

impl Default for FiringOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            max_step_ns: None,
        }
    }
}

/// Waiting-time law between consecutive firings.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringDistribution {
    pub operating_current_ua: f64,
    pub input_rate_cps: f64,
    pub dead_time_ns: f64,
    pub time_grid_ns: Vec<f64>,
    /// Firing density `p(t)` per ns (right limit at grid points).
    pub density_per_ns: Vec<f64>,
    /// Probability of not having fired by `t`.
    pub survival: Vec<f64>,
    pub mean_interval_ns: f64,
    pub mean_current_ua: f64,
}

impl FiringDistribution {
    /// Builds a distribution from an explicit density sampled on `time_grid_ns`
    /// (trapezoid rule). Intended for degenerate or externally measured laws.
    pub fn from_density(
        time_grid_ns: Vec<f64>,
        density_per_ns: Vec<f64>,
        operating_current_ua: f64,
        tau_ns: f64,
    ) -> Result<Self> {
        if time_grid_ns.len() != density_per_ns.len() || time_grid_ns.len() < 2 {
            return Err(Error::InvalidParameter("grid and density must have equal length >= 2".into()));
        }
        if time_grid_ns.windows(2).any(|w| w[1] <= w[0]) || time_grid_ns[0] < 0.0 {
            return Err(Error::InvalidParameter("time grid must be increasing and >= 0".into()));
        }
        let mut survival = Vec::with_capacity(time_grid_ns.len());
        let mut cumulative = 0.0;
        let mut mass = 0.0;
        let mut first_moment = 0.0;
        let mut charge = 0.0;
        survival.push(1.0);
        for i in 1..time_grid_ns.len() {
            let (t0, t1) = (time_grid_ns[i - 1], time_grid_ns[i]);
            let (p0, p1) = (density_per_ns[i - 1], density_per_ns[i]);
            let h = t1 - t0;
            cumulative += 0.5 * h * (p0 + p1);
            survival.push((1.0 - cumulative).max(0.0));
            mass += 0.5 * h * (p0 + p1);
            first_moment += 0.5 * h * (t0 * p0 + t1 * p1);
            let q = |t: f64| recovered_charge(operating_current_ua, t, tau_ns);
            charge += 0.5 * h * (q(t0) * p0 + q(t1) * p1);
        }
        if !(mass > 0.0) {
            return Err(Error::NeverFires { operating_current_ua });
        }
        Ok(Self {
            operating_current_ua,
            input_rate_cps: f64::NAN,
            dead_time_ns: 0.0,
            time_grid_ns,
            density_per_ns,
            survival,
            mean_interval_ns: first_moment / mass,
            mean_current_ua: charge / first_moment,
        })
    }

    /// Linear interpolation of the density, zero inside the dead time and
    /// outside the grid.
    pub fn density_at(&self, t_ns: f64) -> f64 {
        if t_ns < self.dead_time_ns {
            return 0.0;
        }
        interpolate(&self.time_grid_ns, &self.density_per_ns, t_ns)
    }

    pub fn survival_at(&self, t_ns: f64) -> f64 {
        if t_ns <= self.time_grid_ns[0] {
            return 1.0;
        }
        interpolate(&self.time_grid_ns, &self.survival, t_ns)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    ys[i - 1] + (x - x0) / (x1 - x0) * (ys[i] - ys[i - 1])
}

/// Once `exp(-t / tau)` drops below this the current is fully recovered to
/// double precision and the hazard is constant.
const RECOVERED: f64 = 1e-16;
/// Survival below which the remaining tail is negligible.
const SURVIVAL_FLOOR: f64 = 1e-18;
/// Output samples extend until survival drops below this.
const OUTPUT_SURVIVAL: f64 = 1e-9;

/// Solves the waiting-time law for operating current `i_w_ua` under photon
/// flux `n_in_cps` by integrating the survival ODE
/// `Lambda' = N_in nu(I(t))`, `A' = exp(-Lambda)`, `B' = I(t) exp(-Lambda)`
/// from the end of the dead time, with a closed-form exponential tail once the
/// current has recovered.
pub fn firing_distribution(
    i_w_ua: f64,
    n_in_cps: f64,
    params: &DetectorParams,
    opts: &FiringOptions,
) -> Result<FiringDistribution> {
    let mut grid = Vec::new();
    let mut density = Vec::new();
    let mut survival = Vec::new();
    if params.dead_time_ns > 0.0 {
        // The density jumps at the end of the dead time; the second sample
        // keeps trapezoid sums over the grid from smearing that jump.
        for t in [0.0, params.dead_time_ns * (1.0 - 1e-12)] {
            grid.push(t);
            density.push(0.0);
            survival.push(1.0);
        }
    }
    let rate = n_in_cps * 1e-9;
    let m = firing_moments(i_w_ua, n_in_cps, params, opts, |t, s| {
        grid.push(t);
        survival.push(s);
        density.push(rate * params.efficiency_after_fire(i_w_ua, t) * s);
    })?;

    let step = 2e-3 / m.hazard_end;
    let mut t = m.t_end;
    let mut s = m.s_end;
    while s >= OUTPUT_SURVIVAL && grid.len() < 1_000_000 {
        t += step;
        s = m.s_end * (-m.hazard_end * (t - m.t_end)).exp();
        grid.push(t);
        survival.push(s);
        density.push(m.hazard_end * s);
    }
    let (mean_interval, mean_current) = (m.mean_interval_ns, m.mean_current_ua);
    let dead = params.dead_time_ns;

    Ok(FiringDistribution {
        operating_current_ua: i_w_ua,
        input_rate_cps: n_in_cps,
        dead_time_ns: dead,
        time_grid_ns: grid,
        density_per_ns: density,
        survival,
        mean_interval_ns: mean_interval,
        mean_current_ua: mean_current,
    })
}

/// Integrated quantities of the waiting-time law, without the sampled curve.
#[derive(Debug, Clone, Copy)]
struct FiringMoments {
    mean_interval_ns: f64,
    mean_current_ua: f64,
    /// Where the integration handed over to the exponential tail.
    t_end: f64,
    s_end: f64,
    hazard_end: f64,
}

/// Integrates `Lambda, A, B` from the end of the dead time, calling
/// `observe(t, S(t))` after every accepted step.
fn firing_moments(
    i_w_ua: f64,
    n_in_cps: f64,
    params: &DetectorParams,
    opts: &FiringOptions,
    mut observe: impl FnMut(f64, f64),
) -> Result<FiringMoments> {
    params.validate()?;
    if !(i_w_ua > 0.0) || !i_w_ua.is_finite() {
        return Err(Error::InvalidParameter(format!("operating current {i_w_ua} uA must be > 0")));
    }
    if !(n_in_cps >= 0.0) || !n_in_cps.is_finite() {
        return Err(Error::InvalidParameter(format!("input rate {n_in_cps} cps must be >= 0")));
    }
    let nu_w = params.efficiency_at(i_w_ua);
    if n_in_cps == 0.0 || nu_w == 0.0 {
        return Err(Error::NeverFires {
            operating_current_ua: i_w_ua,
        });
    }

    let rate = n_in_cps * 1e-9;
    let tau = params.tau_ns;
    let dead = params.dead_time_ns;
    let hazard_end = rate * nu_w;
    let t_recovered = -tau * RECOVERED.ln();

    let scale = tau.min(1.0 / hazard_end);
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: 1e-300,
        h_init: scale * 1e-3,
        h_max: opts.max_step_ns.unwrap_or(f64::INFINITY),
        max_steps: 10_000_000,
    };
    let rhs = |t: f64, y: &[f64; 3]| {
        let current = recovering_current(i_w_ua, t, tau);
        let s = (-y[0]).exp();
        [rate * params.efficiency_at(current), s, current * s]
    };
    let (t_end, y_end) = numeric::integrate(rhs, dead, [0.0, 0.0, 0.0], f64::INFINITY, &ode, |t, y| {
        let s = (-y[0]).exp();
        observe(t, s);
        if s < SURVIVAL_FLOOR || t >= t_recovered {
            Step::Stop
        } else {
            Step::Continue
        }
    })?;

    let s_end = (-y_end[0]).exp();
    // Exponential tail with the recovered hazard.
    let tail = s_end / hazard_end;
    let mean_interval = dead + y_end[1] + tail;
    let charge = recovered_charge(i_w_ua, dead, tau) + y_end[2] + i_w_ua * tail;
    Ok(FiringMoments {
        mean_interval_ns: mean_interval,
        mean_current_ua: charge / mean_interval,
        t_end,
        s_end,
        hazard_end,
    })
}

/// Output count rate: inverse mean waiting time plus dark counts.
pub fn count_rate(dist: &FiringDistribution, dark_rate_cps: f64) -> f64 {
    1e9 / dist.mean_interval_ns + dark_rate_cps
}

/// Time-averaged detector current over the waiting-time law.
pub fn mean_current(dist: &FiringDistribution) -> f64 {
    dist.mean_current_ua
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub input_rate_cps: f64,
    /// `None` when latched.
    pub operating_current_ua: Option<f64>,
    pub count_rate_cps: f64,
    pub latched: bool,
    /// Every fixed point found under current stabilization (ascending).
    pub roots_ua: Vec<f64>,
}

impl OperatingPoint {
    pub fn is_multiple(&self) -> bool {
        self.roots_ua.len() > 1
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    /// Scan spacing as a fraction of I_c.
    pub scan_step_frac: f64,
    /// Lower edge of the search bracket as a fraction of I_c.
    pub lower_frac: f64,
    pub max_iter: usize,
    pub firing: FiringOptions,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            scan_step_frac: 1e-3,
            lower_frac: 1e-3,
            max_iter: 200,
            firing: FiringOptions::default(),
        }
    }
}

/// Mean current at operating current `i_w_ua`; equals `i_w_ua` when the
/// detector never fires.
pub fn mean_current_at(i_w_ua: f64, n_in_cps: f64, params: &DetectorParams, opts: &FiringOptions) -> Result<f64> {
    match firing_moments(i_w_ua, n_in_cps, params, opts, |_, _| {}) {
        Ok(m) => Ok(m.mean_current_ua),
        Err(Error::NeverFires { .. }) => Ok(i_w_ua),
        Err(e) => Err(e),
    }
}

/// Output count rate at a fixed operating current.
pub fn count_rate_at(i_w_ua: f64, n_in_cps: f64, params: &DetectorParams, opts: &FiringOptions) -> Result<f64> {
    match firing_moments(i_w_ua, n_in_cps, params, opts, |_, _| {}) {
        Ok(m) => Ok(1e9 / m.mean_interval_ns + params.dark_rate_cps),
        Err(Error::NeverFires { .. }) => Ok(params.dark_rate_cps),
        Err(e) => Err(e),
    }
}

/// Every root of `mean_current(I_w) = target` in `(lower_frac I_c, I_c)`.
///
/// Since the mean current never exceeds `I_w`, the scan starts at the target.
pub fn fixed_points(
    target_mean_ua: f64,
    n_in_cps: f64,
    params: &DetectorParams,
    opts: &FixedPointOptions,
) -> Result<Vec<f64>> {
    let ic = params.critical_current_ua;
    let lower = opts.lower_frac * ic;
    let step = opts.scan_step_frac * ic;
    let g = |i: f64| mean_current_at(i, n_in_cps, params, &opts.firing).map(|m| m - target_mean_ua);

    let first = ((target_mean_ua - lower) / step).floor().max(0.0) as usize;
    let n = ((ic - lower) / step).round() as usize;
    let currents: Vec<f64> = (first..=n).map(|k| (lower + k as f64 * step).min(ic)).collect();
    let values: Vec<f64> = currents.par_iter().map(|&i| g(i)).collect::<Result<_>>()?;

    let mut roots = Vec::new();
    for k in 0..currents.len() - 1 {
        let (a, b) = (values[k], values[k + 1]);
        if a == 0.0 {
            roots.push(currents[k]);
        } else if a.signum() != b.signum() && b != 0.0 {
            let root = numeric::bisect(g, currents[k], currents[k + 1], 1e-10 * ic, opts.max_iter)?;
            roots.push(root);
        }
    }
    if values[values.len() - 1] == 0.0 {
        roots.push(currents[currents.len() - 1]);
    }
    Ok(roots)
}

/// Operating current and count rate under a given bias regime.
///
/// Under current stabilization the largest fixed point is taken; no fixed
/// point in the bracket means the feedback runs away and the detector latches.
pub fn operating_point(
    regime: BiasRegime,
    n_in_cps: f64,
    params: &DetectorParams,
    opts: &FixedPointOptions,
) -> Result<OperatingPoint> {
    params.validate()?;
    regime.validate(params)?;
    if !(n_in_cps >= 0.0) {
        return Err(Error::InvalidParameter(format!("input rate {n_in_cps} cps must be >= 0")));
    }
    match regime {
        BiasRegime::VoltageStabilized { operating_current_ua } => Ok(OperatingPoint {
            input_rate_cps: n_in_cps,
            operating_current_ua: Some(operating_current_ua),
            count_rate_cps: count_rate_at(operating_current_ua, n_in_cps, params, &opts.firing)?,
            latched: false,
            roots_ua: vec![operating_current_ua],
        }),
        BiasRegime::CurrentStabilized { mean_current_ua } => {
            if n_in_cps == 0.0 {
                return Ok(OperatingPoint {
                    input_rate_cps: 0.0,
                    operating_current_ua: Some(mean_current_ua),
                    count_rate_cps: params.dark_rate_cps,
                    latched: false,
                    roots_ua: vec![mean_current_ua],
                });
            }
            let roots = fixed_points(mean_current_ua, n_in_cps, params, opts)?;
            match roots.last() {
                None => Ok(OperatingPoint {
                    input_rate_cps: n_in_cps,
                    operating_current_ua: None,
                    count_rate_cps: params.dark_rate_cps,
                    latched: true,
                    roots_ua: roots,
                }),
                Some(&i_w) => {
                    let residual = mean_current_at(i_w, n_in_cps, params, &opts.firing)? - mean_current_ua;
                    if residual.abs() > 1e-4 * params.critical_current_ua {
                        return Err(Error::NoConvergence {
                            what: "operating-point solver",
                            iterations: opts.max_iter,
                            lo: i_w,
                            hi: i_w,
                        });
                    }
                    Ok(OperatingPoint {
                        input_rate_cps: n_in_cps,
                        operating_current_ua: Some(i_w),
                        count_rate_cps: count_rate_at(i_w, n_in_cps, params, &opts.firing)?,
                        latched: false,
                        roots_ua: roots,
                    })
                }
            }
        }
    }
}

/// [`operating_point`] over a list of input rates, in parallel, order preserved.
pub fn count_rate_sweep(
    regime: BiasRegime,
    n_in_cps: &[f64],
    params: &DetectorParams,
    opts: &FixedPointOptions,
) -> Result<Vec<OperatingPoint>> {
    n_in_cps
        .par_iter()
        .map(|&n| operating_point(regime, n, params, opts))
        .collect()
}

/// Input rate and operating current at which a detector stabilized at
/// `mean_current_ua` counts at `target_cps` on its highest-current branch.
///
/// Along the contour of constant count rate the mean current grows with the
/// operating current, so the operating current is found by bisection, each
/// step inverting the count rate for the input rate. The result is checked
/// against [`operating_point`] at that input rate.
pub fn operating_point_for_count_rate(
    mean_current_ua: f64,
    target_cps: f64,
    params: &DetectorParams,
    opts: &FixedPointOptions,
) -> Result<(f64, OperatingPoint)> {
    params.validate()?;
    let regime = BiasRegime::CurrentStabilized { mean_current_ua };
    regime.validate(params)?;
    let ic = params.critical_current_ua;
    if !(target_cps > params.dark_rate_cps && target_cps < 1e9 / params.dead_time_ns.max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidParameter(format!("count rate {target_cps} cps is unreachable")));
    }
    let firing = &opts.firing;
    let input_for = |i_w: f64| -> Result<f64> {
        let excess = |log_n: f64| Ok(count_rate_at(i_w, 10f64.powf(log_n), params, firing)? - target_cps);
        if excess(15.0)? < 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(10f64.powf(numeric::bisect(excess, 0.0, 15.0, 1e-13, opts.max_iter)?))
    };
    let gap = |i_w: f64| -> Result<f64> {
        let n_in = input_for(i_w)?;
        if n_in.is_infinite() {
            return Ok(-mean_current_ua);
        }
        Ok(mean_current_at(i_w, n_in, params, firing)? - mean_current_ua)
    };
    let i_w = numeric::bisect(gap, mean_current_ua, ic * (1.0 - 1e-9), 1e-10 * ic, opts.max_iter)?;
    let n_in = input_for(i_w)?;
    let point = operating_point(regime, n_in, params, opts)?;
    match point.operating_current_ua {
        Some(found) if (found - i_w).abs() <= 1e-4 * ic => Ok((n_in, point)),
        _ => Err(Error::NoConvergence {
            what: "count-rate inversion (solution is not on the highest branch)",
            iterations: opts.max_iter,
            lo: i_w,
            hi: point.operating_current_ua.unwrap_or(f64::NAN),
        }),
    }
}

/// Probability of detecting a photon `t_ns` after a firing, relative to a
/// fully recovered detector.
pub fn next_photon_probability(t_ns: f64, i_w_ua: f64, params: &DetectorParams) -> Result<f64> {
    if !(t_ns >= 0.0) {
        return Err(Error::Domain(format!("time since firing {t_ns} ns must be >= 0")));
    }
    let nu_w = params.efficiency_at(i_w_ua);
    if nu_w == 0.0 {
        return Err(Error::UndefinedNormalization {
            operating_current_ua: i_w_ua,
        });
    }
    Ok(params.efficiency_after_fire(i_w_ua, t_ns) / nu_w)
}
