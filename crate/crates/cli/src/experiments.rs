//! Experiment kinds: each turns a resolved [`Config`] into output files.

use serde_json::json;
use sspd_core::detector::{
    self, BiasRegime, DetectorParams, EfficiencyCurve, FixedPointOptions, OperatingPoint, FWHM_PER_SIGMA,
};
use sspd_core::optics::{absorption_spectrum, DispersionTable, Layer, LayerStack};
use sspd_core::oracle::{self, HbtScenario, TcspcScenario};
use sspd_core::photon_stats::{
    g2_compensate_background, g2_forward_background, g2_ideal_curve, g2_zero_sweep, jitter_convolve,
    symmetric_grid, ChannelRates, DetectorScenario, EmitterParams, JitterModel, Scene, SweepOptions,
};

use crate::config::Config;
use crate::error::CliError;
use crate::output::{Artifact, Cell, Table};

/// Files produced by one experiment, plus the tally of pass/fail checks for
/// experiments that verify something.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks_total: usize,
    pub checks_failed: usize,
}

impl Outcome {
    fn files(artifacts: Vec<Artifact>) -> Self {
        Self {
            artifacts,
            ..Default::default()
        }
    }
}

pub fn execute(cfg: &Config) -> Result<Outcome, CliError> {
    match cfg.experiment() {
        "tmm-spectrum" => tmm_spectrum(cfg),
        "count-rate" => count_rate(cfg),
        "g2-model" => g2_model(cfg),
        "g2-zero-sweep" => g2_sweep(cfg),
        "hbt-sim" => hbt_sim(cfg),
        "lifetime-sim" => lifetime_sim(cfg),
        "oracle-check" => oracle_check(cfg),
        other => unreachable!("experiment '{other}' passed validation"),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    }
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n).into_iter().map(|x| 10f64.powf(x)).collect()
}

fn positive_range(cfg: &Config, start: &str, end: &str, points: &str) -> Result<(f64, f64, usize), CliError> {
    let (a, b, n) = (cfg.f64(start)?, cfg.f64(end)?, cfg.usize(points)?);
    if !(a > 0.0 && b >= a) {
        return Err(cfg.error(start, format!("need 0 < {start} <= {end}")));
    }
    if n == 0 {
        return Err(cfg.error(points, "need at least one point"));
    }
    Ok((a, b, n))
}

fn sigma_from_fwhm(cfg: &Config, key: &str) -> Result<f64, CliError> {
    let fwhm = cfg.f64(key)?;
    if !(fwhm >= 0.0) {
        return Err(cfg.error(key, "jitter must be >= 0"));
    }
    Ok(fwhm / FWHM_PER_SIGMA)
}

fn material(cfg: &Config, key: &str) -> Result<DispersionTable, CliError> {
    let name = cfg.str(key);
    match DispersionTable::builtin(name) {
        Some(t) => Ok(t),
        None => {
            let path = cfg.base_dir.join(name);
            if !path.is_file() {
                return Err(cfg.error(
                    key,
                    format!("'{name}' is neither a built-in material (vacuum, si, sio2, nbn) nor a readable file"),
                ));
            }
            Ok(DispersionTable::from_file(&path)?)
        }
    }
}

fn tmm_spectrum(cfg: &Config) -> Result<Outcome, CliError> {
    let count = cfg.usize("stack.layer_count")?;
    let mut layers = Vec::with_capacity(count);
    for i in 1..=count {
        let d = material(cfg, &format!("stack.layer{i}.material"))?;
        layers.push(Layer::new(
            d,
            cfg.f64(&format!("stack.layer{i}.thickness_nm"))?,
            cfg.f64(&format!("stack.layer{i}.fill_factor"))?,
        )?);
    }
    let stack = LayerStack {
        ambient: material(cfg, "stack.ambient")?,
        layers,
        substrate: material(cfg, "stack.substrate")?,
    };
    let (a, b, n) = positive_range(cfg, "spectrum.start_nm", "spectrum.end_nm", "spectrum.points")?;
    let responses = absorption_spectrum(&stack, &linspace(a, b, n))?;

    let mut header = vec!["wavelength_nm".to_string(), "reflectance".into(), "transmittance".into()];
    header.extend((1..=count).map(|i| format!("absorption_layer{i}")));
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut peak = (0.0, f64::NEG_INFINITY);
    for r in &responses {
        let mut row: Vec<Cell> = vec![r.wavelength_nm.into(), r.reflectance.into(), r.transmittance.into()];
        row.extend(r.absorption_per_layer.iter().map(|&x| Cell::Real(x)));
        table.push(row);
        if let Some(&first) = r.absorption_per_layer.first() {
            if first > peak.1 {
                peak = (r.wavelength_nm, first);
            }
        }
    }
    let diag = json!({"peak_wavelength_nm_layer1": peak.0, "peak_absorption_layer1": peak.1});
    Ok(Outcome::files(vec![
        Artifact::csv("spectrum.csv", &table),
        Artifact::jsonl("diagnostics.jsonl", &[diag]),
    ]))
}

fn detector_params(cfg: &Config) -> Result<DetectorParams, CliError> {
    let p = DetectorParams {
        critical_current_ua: cfg.f64("detector.I_c_uA")?,
        tau_ns: cfg.f64("detector.tau_ns")?,
        dead_time_ns: cfg.f64("detector.dead_time_ns")?,
        efficiency: EfficiencyCurve::Sigmoid {
            nu_max: cfg.f64("detector.nu_max")?,
            center_frac: cfg.f64("detector.nu_center_frac")?,
            width_frac: cfg.f64("detector.nu_width_frac")?,
        },
        jitter_sigma_ns: sigma_from_fwhm(cfg, "detector.jitter_fwhm_ns")?,
        dark_rate_cps: cfg.f64("detector.dark_cps")?,
    };
    p.validate()?;
    Ok(p)
}

fn operating_current_cell(p: &OperatingPoint) -> Cell {
    Cell::Real(p.operating_current_ua.unwrap_or(f64::NAN))
}

fn count_rate(cfg: &Config) -> Result<Outcome, CliError> {
    let params = detector_params(cfg)?;
    let mut opts = FixedPointOptions::default();
    opts.scan_step_frac = cfg.f64("solver.scan_step_frac")?;
    opts.firing.rtol = cfg.f64("solver.rtol")?;
    if !(opts.scan_step_frac > 0.0 && opts.scan_step_frac <= 0.1) {
        return Err(cfg.error("solver.scan_step_frac", "must be in (0, 0.1]"));
    }
    if !(opts.firing.rtol > 0.0 && opts.firing.rtol < 1e-3) {
        return Err(cfg.error("solver.rtol", "must be in (0, 1e-3)"));
    }
    match cfg.choice("analysis", &["input-sweep", "max-vs-bias", "recovery"])? {
        "input-sweep" => input_sweep(cfg, &params, &opts),
        "max-vs-bias" => max_vs_bias(cfg, &params, &opts),
        _ => recovery(cfg, &params, &opts),
    }
}

fn input_sweep(cfg: &Config, params: &DetectorParams, opts: &FixedPointOptions) -> Result<Outcome, CliError> {
    let ic = params.critical_current_ua;
    let (a, b, n) = positive_range(cfg, "sweep.n_in_start_cps", "sweep.n_in_end_cps", "sweep.n_in_points")?;
    let inputs = logspace(a, b, n);
    let regimes: &[&str] = match cfg.choice("bias.regime", &["current", "voltage", "both"])? {
        "current" => &["current"],
        "voltage" => &["voltage"],
        _ => &["current", "voltage"],
    };
    let fracs = cfg.f64_list("bias.current_frac")?;
    let set_at = cfg.f64("bias.set_at_count_rate_cps")?;
    let mut artifacts = Vec::new();
    let mut diags = Vec::new();
    for &kind in regimes {
        for &frac in &fracs {
            let mean = frac * ic;
            let regime = if kind == "current" {
                BiasRegime::CurrentStabilized { mean_current_ua: mean }
            } else if set_at > 0.0 {
                // Operating current the stabilized supply settles at when the
                // detector counts at `set_at`, then frozen.
                let (_, p) = detector::operating_point_for_count_rate(mean, set_at, params, opts)?;
                BiasRegime::VoltageStabilized {
                    operating_current_ua: p.operating_current_ua.expect("not latched by construction"),
                }
            } else {
                BiasRegime::VoltageStabilized { operating_current_ua: mean }
            };
            let points = detector::count_rate_sweep(regime, &inputs, params, opts)?;
            let mut table = Table::new(&["n_in_cps", "n_out_cps", "operating_current_uA", "latched"]);
            for p in &points {
                table.push(vec![
                    p.input_rate_cps.into(),
                    p.count_rate_cps.into(),
                    operating_current_cell(p),
                    p.latched.into(),
                ]);
            }
            let mut name = "count_rate".to_string();
            if regimes.len() > 1 && kind == "voltage" {
                name.push_str("_voltage");
            }
            if fracs.len() > 1 {
                name.push_str(&format!("_{frac}"));
            }
            name.push_str(".csv");
            let peak = points.iter().filter(|p| !p.latched).map(|p| p.count_rate_cps).fold(0.0, f64::max);
            let latch_onset = points.iter().find(|p| p.latched).map(|p| p.input_rate_cps);
            let multiple = points.iter().filter(|p| p.is_multiple()).count();
            let step = points
                .windows(2)
                .max_by(|x, y| {
                    let jump = |w: &[OperatingPoint]| w[1].count_rate_cps / w[0].count_rate_cps;
                    jump(x).total_cmp(&jump(y))
                })
                .map(|w| w[1].input_rate_cps);
            diags.push(json!({
                "file": name,
                "regime": kind,
                "bias_frac": frac,
                "operating_current_uA": match regime {
                    BiasRegime::VoltageStabilized { operating_current_ua } => Some(operating_current_ua),
                    BiasRegime::CurrentStabilized { .. } => None,
                },
                "peak_count_rate_cps": peak,
                "latch_onset_n_in_cps": latch_onset,
                "largest_step_n_in_cps": step,
                "points_with_multiple_fixed_points": multiple,
            }));
            artifacts.push(Artifact::csv(&name, &table));
        }
    }
    artifacts.push(Artifact::jsonl("diagnostics.jsonl", &diags));
    Ok(Outcome::files(artifacts))
}

fn max_vs_bias(cfg: &Config, params: &DetectorParams, opts: &FixedPointOptions) -> Result<Outcome, CliError> {
    let ic = params.critical_current_ua;
    let (a, b, n) = positive_range(cfg, "sweep.n_in_start_cps", "sweep.n_in_end_cps", "sweep.n_in_points")?;
    let inputs = logspace(a, b, n);
    let (lo, hi, m) = positive_range(cfg, "scan.bias_start_frac", "scan.bias_end_frac", "scan.bias_points")?;
    let mut table = Table::new(&[
        "bias_frac",
        "bias_current_uA",
        "max_count_rate_cps",
        "n_in_at_max_cps",
        "efficiency",
    ]);
    for frac in linspace(lo, hi, m) {
        let regime = BiasRegime::CurrentStabilized {
            mean_current_ua: frac * ic,
        };
        let points = detector::count_rate_sweep(regime, &inputs, params, opts)?;
        let best = points
            .iter()
            .filter(|p| !p.latched)
            .max_by(|x, y| x.count_rate_cps.total_cmp(&y.count_rate_cps));
        let (rate, at) = best.map_or((params.dark_rate_cps, f64::NAN), |p| (p.count_rate_cps, p.input_rate_cps));
        table.push(vec![
            frac.into(),
            (frac * ic).into(),
            rate.into(),
            at.into(),
            params.efficiency_at(frac * ic).into(),
        ]);
    }
    Ok(Outcome::files(vec![Artifact::csv("max_count_rate.csv", &table)]))
}

fn recovery(cfg: &Config, params: &DetectorParams, opts: &FixedPointOptions) -> Result<Outcome, CliError> {
    let fracs = cfg.f64_list("bias.current_frac")?;
    let [frac] = fracs[..] else {
        return Err(cfg.error("bias.current_frac", "recovery analysis takes a single bias"));
    };
    let target = cfg.f64("recovery.count_rate_cps")?;
    let (n_in, point) =
        detector::operating_point_for_count_rate(frac * params.critical_current_ua, target, params, opts)?;
    let i_w = point.operating_current_ua.expect("not latched by construction");
    let end = cfg.f64("recovery.end_ns")?;
    if !(end > 0.0) {
        return Err(cfg.error("recovery.end_ns", "must be > 0"));
    }
    let mut table = Table::new(&["t_ns", "next_photon_probability", "current_uA"]);
    for t in linspace(0.0, end, cfg.usize("recovery.points")?) {
        table.push(vec![
            t.into(),
            detector::next_photon_probability(t, i_w, params)?.into(),
            detector::current_after_fire(i_w, t, params.tau_ns)?.into(),
        ]);
    }
    let diag = json!({
        "bias_frac": frac,
        "count_rate_cps": point.count_rate_cps,
        "n_in_cps": n_in,
        "operating_current_uA": i_w,
        "operating_current_frac": i_w / params.critical_current_ua,
        "probability_at_10ns": detector::next_photon_probability(10.0, i_w, params)?,
    });
    Ok(Outcome::files(vec![
        Artifact::csv("next_photon.csv", &table),
        Artifact::jsonl("diagnostics.jsonl", &[diag]),
    ]))
}

fn curve_table(grid: &[f64], values: &[f64]) -> Table {
    let mut t = Table::new(&["tau_ns", "g2"]);
    for (&x, &y) in grid.iter().zip(values) {
        t.push(vec![x.into(), y.into()]);
    }
    t
}

fn g2_model(cfg: &Config) -> Result<Outcome, CliError> {
    let emitter = EmitterParams::from_lifetime(
        cfg.f64("emitter.lifetime_ns")?,
        cfg.f64("emitter.excitation_rate_per_ns")?,
        1.0,
    )?;
    let rates = ChannelRates::balanced(cfg.f64("channels.signal_cps")?, cfg.f64("channels.noise_cps")?)?;
    let sigma = sigma_from_fwhm(cfg, "detector.jitter_fwhm_ns")?;
    let jitter = JitterModel::combined(sigma, sigma);
    let grid = symmetric_grid(cfg.f64("g2.half_span_ns")?, cfg.f64("g2.spacing_ns")?)?;
    let ideal = g2_ideal_curve(&grid, &emitter)?;
    let background = g2_forward_background(&ideal, &rates)?;
    let measured = jitter_convolve(&background, &jitter)?;
    let compensated = g2_compensate_background(&measured, &rates)?;
    let zero = grid.len() / 2;
    let diag = json!({
        "g2_zero_ideal": ideal.values[zero],
        "g2_zero_background": background.values[zero],
        "g2_zero_measured": measured.values[zero],
        "g2_zero_compensated": compensated.values[zero],
        "combined_jitter_sigma_ns": jitter.sigma_ns,
    });
    Ok(Outcome::files(vec![
        Artifact::csv("g2_ideal.csv", &curve_table(&grid, &ideal.values)),
        Artifact::csv("g2_background.csv", &curve_table(&grid, &background.values)),
        Artifact::csv("g2_measured.csv", &curve_table(&grid, &measured.values)),
        Artifact::csv("g2_compensated.csv", &curve_table(&grid, &compensated.values)),
        Artifact::jsonl("diagnostics.jsonl", &[diag]),
    ]))
}

fn scenarios(cfg: &Config) -> Result<Vec<DetectorScenario>, CliError> {
    let n = cfg.usize("scenario_count")?;
    if n == 0 {
        return Err(cfg.error("scenario_count", "need at least one scenario"));
    }
    (1..=n)
        .map(|i| {
            Ok(DetectorScenario {
                name: cfg.str(&format!("scenario{i}.name")).to_string(),
                qe: cfg.f64(&format!("scenario{i}.qe"))?,
                dark_cps: cfg.f64(&format!("scenario{i}.dark_cps"))?,
                jitter_sigma_ns: sigma_from_fwhm(cfg, &format!("scenario{i}.jitter_fwhm_ns"))?,
            })
        })
        .collect()
}

fn g2_sweep(cfg: &Config) -> Result<Outcome, CliError> {
    let scene = Scene {
        signal_cps: cfg.f64("scene.signal_cps")?,
        background_cps: cfg.f64("scene.background_cps")?,
        reference_qe: cfg.f64("scene.reference_qe")?,
    };
    let opts = SweepOptions {
        excitation_rate_per_ns: cfg.f64("sweep.excitation_rate_per_ns")?,
        ..Default::default()
    };
    let scenarios = scenarios(cfg)?;
    let table = match cfg.choice("sweep.variable", &["lifetime", "qe"])? {
        "lifetime" => {
            let (a, b, n) = positive_range(
                cfg,
                "sweep.lifetime_start_ns",
                "sweep.lifetime_end_ns",
                "sweep.lifetime_points",
            )?;
            let rows = g2_zero_sweep(&logspace(a, b, n), &scenarios, &scene, &opts)?;
            let mut t = Table::new(&["lifetime_ns", "scenario", "g2_zero"]);
            for r in rows {
                t.push(vec![r.lifetime_ns.into(), r.scenario.into(), r.g2_zero.into()]);
            }
            t
        }
        _ => {
            let (a, b, n) = positive_range(cfg, "sweep.qe_start", "sweep.qe_end", "sweep.qe_points")?;
            let qes = logspace(a, b, n);
            let expanded: Vec<DetectorScenario> = qes
                .iter()
                .flat_map(|&qe| scenarios.iter().map(move |s| DetectorScenario { qe, ..s.clone() }))
                .collect();
            let rows = g2_zero_sweep(&[cfg.f64("sweep.lifetime_ns")?], &expanded, &scene, &opts)?;
            let mut t = Table::new(&["qe", "scenario", "g2_zero"]);
            for (s, r) in expanded.iter().zip(rows) {
                t.push(vec![s.qe.into(), r.scenario.into(), r.g2_zero.into()]);
            }
            t
        }
    };
    let diag = json!({"snr": scene.snr(), "scenarios": scenarios.len()});
    Ok(Outcome::files(vec![
        Artifact::csv("g2_zero.csv", &table),
        Artifact::jsonl("diagnostics.jsonl", &[diag]),
    ]))
}

fn hbt_scenario(cfg: &Config) -> Result<HbtScenario, CliError> {
    Ok(HbtScenario {
        lifetime_ns: cfg.f64("emitter.lifetime_ns")?,
        excitation_rate_per_ns: cfg.f64("emitter.excitation_rate_per_ns")?,
        collection_efficiency: cfg.f64("hbt.collection_efficiency")?,
        qe: cfg.f64("hbt.qe")?,
        jitter_fwhm_ns: cfg.f64("detector.jitter_fwhm_ns")?,
        dark_cps: cfg.f64("detector.dark_cps")?,
        dead_time_ns: cfg.f64("detector.dead_time_ns")?,
        duration_ns: cfg.f64("hbt.duration_ns")?,
        bin_width_ns: cfg.f64("hbt.bin_width_ns")?,
        window_ns: cfg.f64("hbt.window_ns")?,
    })
}

fn hbt_artifacts(check: &oracle::HbtCheck, bin_width: f64, prefix: &str) -> (Artifact, serde_json::Value) {
    let mut t = Table::new(&[
        "bin_start_ns",
        "bin_end_ns",
        "counts",
        "g2_estimate",
        "g2_model",
        "std_err",
    ]);
    for b in &check.bins {
        t.push(vec![
            (b.center_ns - 0.5 * bin_width).into(),
            (b.center_ns + 0.5 * bin_width).into(),
            b.counts.into(),
            b.mc_g2.into(),
            b.analytic_g2.into(),
            b.std_err.into(),
        ]);
    }
    let chi2: f64 = check.bins.iter().map(|b| b.z() * b.z()).sum();
    let diag = json!({
        "coincidences": check.coincidences,
        "bins": check.bins.len(),
        "max_abs_z": check.max_abs_z(),
        "chi2": chi2,
        "detected_cps": [check.rates.total_cps(0), check.rates.total_cps(1)],
    });
    (Artifact::csv(&format!("{prefix}hbt.csv"), &t), diag)
}

fn hbt_sim(cfg: &Config) -> Result<Outcome, CliError> {
    let s = hbt_scenario(cfg)?;
    let check = oracle::hbt_check(&s, cfg.u64("seed")?)?;
    let (csv, diag) = hbt_artifacts(&check, s.bin_width_ns, "");
    Ok(Outcome::files(vec![csv, Artifact::jsonl("diagnostics.jsonl", &[diag])]))
}

fn decay_table(h: &sspd_core::montecarlo::DecayHistogram) -> Table {
    let mut t = Table::new(&["bin_start_ns", "bin_end_ns", "counts"]);
    for (k, &c) in h.counts.iter().enumerate() {
        t.push(vec![h.bin_edges_ns[k].into(), h.bin_edges_ns[k + 1].into(), c.into()]);
    }
    t
}

fn tcspc_scenario(cfg: &Config) -> Result<TcspcScenario, CliError> {
    let lifetime = cfg.f64("emitter.lifetime_ns")?;
    Ok(TcspcScenario {
        lifetime_ns: lifetime,
        sync_period_ns: cfg.f64("tcspc.sync_period_ns")?,
        photons_per_pulse: cfg.f64("tcspc.photons_per_pulse")?,
        jitter_fwhm_ns: cfg.f64("detector.jitter_fwhm_ns")?,
        dead_time_ns: cfg.f64("detector.dead_time_ns")?,
        target_counts: cfg.u64("tcspc.target_counts")?,
        bin_width_ns: cfg.f64("tcspc.bin_width_ns")?,
        fit_start_ns: cfg.f64("tcspc.fit_start_ns")?,
        fit_end_ns: cfg.f64("tcspc.fit_end_lifetimes")? * lifetime,
    })
}

fn lifetime_sim(cfg: &Config) -> Result<Outcome, CliError> {
    let s = tcspc_scenario(cfg)?;
    let check = oracle::tcspc_check(&s, cfg.u64("seed")?)?;
    let diag = json!({
        "counts": check.histogram.total_counts(),
        "fitted_lifetime_ns": check.fit.lifetime_ns,
        "fitted_lifetime_std_err_ns": check.fit.lifetime_std_err,
        "relative_error": check.rel_err(s.lifetime_ns),
        "bins_used": check.fit.bins_used,
    });
    Ok(Outcome::files(vec![
        Artifact::csv("decay.csv", &decay_table(&check.histogram)),
        Artifact::jsonl("diagnostics.jsonl", &[diag]),
    ]))
}

/// Tolerances of the analytic-versus-simulation comparison.
pub const COUNT_RATE_REL_TOL: f64 = 0.02;
/// Family-wise coverage of the per-bin HBT test, that of a single 3 sigma test.
pub const HBT_FAMILY_COVERAGE: f64 = 0.9973;
/// Smallest accepted chi-square p-value over all HBT bins.
pub const HBT_MIN_CHI2_P: f64 = 1e-3;
pub const TCSPC_REL_TOL: f64 = 0.05;
pub const TRACE_REL_TOL: f64 = 0.02;

fn oracle_check(cfg: &Config) -> Result<Outcome, CliError> {
    let params = detector_params(cfg)?;
    let seed = cfg.u64("seed")?;
    let mut summary = Vec::new();
    let mut artifacts = Vec::new();
    let mut verdict = |name: &str, pass: bool, metrics: serde_json::Value| {
        summary.push(json!({"check": name, "pass": pass, "metrics": metrics}));
    };

    let points = oracle::default_count_rate_points(&params);
    let checks = oracle::count_rate_checks(&points, &params, cfg.u64("oracle.count_rate_detections")?, seed)?;
    let mut t = Table::new(&[
        "operating_current_uA",
        "n_in_cps",
        "analytic_cps",
        "mc_cps",
        "mc_std_err",
        "rel_err",
        "analytic_mean_current_uA",
        "mc_mean_current_uA",
        "detections",
    ]);
    for c in &checks {
        t.push(vec![
            c.operating_current_ua.into(),
            c.input_rate_cps.into(),
            c.analytic_cps.into(),
            c.mc_cps.into(),
            c.mc_std_err.into(),
            c.rate_rel_err().into(),
            c.analytic_mean_current_ua.into(),
            c.mc_mean_current_ua.into(),
            c.detections.into(),
        ]);
    }
    artifacts.push(Artifact::csv("oracle_count_rate.csv", &t));
    let worst = checks.iter().map(|c| c.rate_rel_err()).fold(0.0, f64::max);
    let worst_current = checks.iter().map(|c| c.current_rel_err()).fold(0.0, f64::max);
    verdict(
        "count_rate",
        worst < COUNT_RATE_REL_TOL,
        json!({"points": checks.len(), "max_rel_err": worst, "tolerance": COUNT_RATE_REL_TOL}),
    );
    verdict(
        "mean_current",
        worst_current < COUNT_RATE_REL_TOL,
        json!({"points": checks.len(), "max_rel_err": worst_current, "tolerance": COUNT_RATE_REL_TOL}),
    );

    let hbt = HbtScenario {
        duration_ns: cfg.f64("oracle.hbt_duration_ns")?,
        ..HbtScenario::sspd_reference()
    };
    let check = oracle::hbt_check(&hbt, seed)?;
    let (csv, mut metrics) = hbt_artifacts(&check, hbt.bin_width_ns, "oracle_");
    artifacts.push(csv);
    let (z_limit, chi2_p) = hbt_thresholds(check.bins.len(), metrics["chi2"].as_f64().unwrap_or(f64::NAN));
    metrics["z_limit"] = json!(z_limit);
    metrics["chi2_p_value"] = json!(chi2_p);
    verdict("hbt", check.max_abs_z() < z_limit && chi2_p > HBT_MIN_CHI2_P, metrics);

    let tcspc = TcspcScenario {
        target_counts: cfg.u64("oracle.tcspc_counts")?,
        ..TcspcScenario::reference(12.0)
    };
    let check = oracle::tcspc_check(&tcspc, seed)?;
    artifacts.push(Artifact::csv("oracle_tcspc.csv", &decay_table(&check.histogram)));
    let rel = check.rel_err(tcspc.lifetime_ns);
    verdict(
        "tcspc",
        rel < TCSPC_REL_TOL,
        json!({"fitted_lifetime_ns": check.fit.lifetime_ns, "rel_err": rel, "tolerance": TCSPC_REL_TOL}),
    );

    let trace = oracle::trace_check(&params, 0.62, 123e6, cfg.f64("oracle.trace_duration_ns")?, seed)?;
    let rel = (trace.mc_trace_mean_ua - trace.analytic_mean_current_ua).abs() / trace.analytic_mean_current_ua;
    let i_w = trace.operating_point.operating_current_ua.unwrap_or(f64::NAN);
    let fit_rel = (trace.segment_fit.u_offset - i_w).abs() / i_w;
    verdict(
        "current_trace",
        rel < TRACE_REL_TOL && fit_rel < TRACE_REL_TOL,
        json!({
            "analytic_mean_current_uA": trace.analytic_mean_current_ua,
            "mc_trace_mean_uA": trace.mc_trace_mean_ua,
            "operating_current_uA": i_w,
            "fitted_offset_uA": trace.segment_fit.u_offset,
            "fitted_tau_ns": trace.segment_fit.tau_fit_ns,
            "mc_count_rate_cps": trace.mc_count_rate_cps,
            "rel_err": rel,
            "tolerance": TRACE_REL_TOL,
        }),
    );

    let failed = summary.iter().filter(|r| r["pass"] == false).count();
    let total = summary.len();
    artifacts.push(Artifact::jsonl("oracle_summary.jsonl", &summary));
    Ok(Outcome {
        artifacts,
        checks_total: total,
        checks_failed: failed,
    })
}

/// Per-bin |z| limit giving [`HBT_FAMILY_COVERAGE`] over `bins` independent
/// bins, and the upper-tail chi-square probability of `chi2`.
pub fn hbt_thresholds(bins: usize, chi2: f64) -> (f64, f64) {
    use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
    let per_bin = HBT_FAMILY_COVERAGE.powf(1.0 / bins as f64);
    let z = Normal::standard().inverse_cdf(0.5 + 0.5 * per_bin);
    let p = ChiSquared::new(bins as f64).map_or(f64::NAN, |d| d.sf(chi2));
    (z, p)
}
