//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! experiment = count-rate
//! detector.I_c_uA = 29.0
//! bias.current_frac = 0.62
//! ```
//!
//! Every key must belong to the schema of the selected experiment. Values are
//! kept as text until an experiment asks for them, so the effective config can
//! be written back exactly as it was read.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const EXPERIMENTS: [&str; 7] = [
    "tmm-spectrum",
    "count-rate",
    "g2-model",
    "g2-zero-sweep",
    "hbt-sim",
    "lifetime-sim",
    "oracle-check",
];

const MAX_INDEXED: usize = 16;

type Schema = &'static [(&'static str, &'static str)];

const COMMON: Schema = &[("experiment", ""), ("seed", "1")];

const DETECTOR: Schema = &[
    ("detector.I_c_uA", "29.0"),
    ("detector.tau_ns", "2.33"),
    ("detector.dead_time_ns", "3.0"),
    ("detector.nu_max", "0.2"),
    ("detector.nu_center_frac", "0.70"),
    ("detector.nu_width_frac", "0.025"),
    ("detector.jitter_fwhm_ns", "0.062"),
    ("detector.dark_cps", "0.1"),
];

const TMM: Schema = &[
    ("spectrum.start_nm", "500"),
    ("spectrum.end_nm", "1300"),
    ("spectrum.points", "81"),
    ("stack.ambient", "vacuum"),
    ("stack.substrate", "si"),
    ("stack.layer_count", "2"),
];

const LAYER_DEFAULTS: [(&str, &str, &str); 2] = [("nbn", "4.0", "0.6"), ("sio2", "160.0", "1.0")];

const COUNT_RATE: Schema = &[
    ("analysis", "input-sweep"),
    ("bias.regime", "current"),
    ("bias.current_frac", "0.62"),
    ("bias.set_at_count_rate_cps", "0"),
    ("sweep.n_in_start_cps", "1e6"),
    ("sweep.n_in_end_cps", "1e11"),
    ("sweep.n_in_points", "101"),
    ("scan.bias_start_frac", "0.40"),
    ("scan.bias_end_frac", "0.98"),
    ("scan.bias_points", "30"),
    ("recovery.count_rate_cps", "123e6"),
    ("recovery.end_ns", "30"),
    ("recovery.points", "301"),
    ("solver.scan_step_frac", "1e-3"),
    ("solver.rtol", "1e-10"),
];

const EMITTER: Schema = &[("emitter.lifetime_ns", "3.0"), ("emitter.excitation_rate_per_ns", "1/30")];

const G2_MODEL: Schema = &[
    ("channels.signal_cps", "80000"),
    ("channels.noise_cps", "37000"),
    ("g2.half_span_ns", "30"),
    ("g2.spacing_ns", "0.005"),
];

const G2_SWEEP: Schema = &[
    ("sweep.variable", "lifetime"),
    ("sweep.lifetime_start_ns", "0.5"),
    ("sweep.lifetime_end_ns", "30"),
    ("sweep.lifetime_points", "60"),
    ("sweep.lifetime_ns", "3.0"),
    ("sweep.qe_start", "0.001"),
    ("sweep.qe_end", "1.0"),
    ("sweep.qe_points", "61"),
    ("sweep.excitation_rate_per_ns", "1/30"),
    ("scene.signal_cps", "80000"),
    ("scene.background_cps", "800"),
    ("scene.reference_qe", "0.2"),
    ("scenario_count", "2"),
];

const SCENARIO_DEFAULTS: [(&str, &str, &str, &str); 2] =
    [("apd", "0.6", "1500", "0.3"), ("sspd", "0.2", "0.1", "0.062")];

const HBT: Schema = &[
    ("hbt.collection_efficiency", "0.33"),
    ("hbt.qe", "0.2"),
    ("hbt.duration_ns", "3e9"),
    ("hbt.bin_width_ns", "1.0"),
    ("hbt.window_ns", "30.5"),
];

const LIFETIME: Schema = &[
    ("tcspc.sync_period_ns", "200"),
    ("tcspc.photons_per_pulse", "0.02"),
    ("tcspc.target_counts", "200000"),
    ("tcspc.bin_width_ns", "0.5"),
    ("tcspc.fit_start_ns", "2.0"),
    ("tcspc.fit_end_lifetimes", "6.0"),
];

const ORACLE: Schema = &[
    ("oracle.fast", "false"),
    ("oracle.count_rate_detections", "1000000"),
    ("oracle.hbt_duration_ns", "3e9"),
    ("oracle.tcspc_counts", "200000"),
    ("oracle.trace_duration_ns", "1e5"),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// Source line in the config file; `None` for command-line overrides.
    line: Option<usize>,
}

/// A parsed configuration with its schema resolved: every key of the
/// selected experiment is present, explicit or defaulted.
#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Where each explicit value came from, for diagnostics.
    origins: BTreeMap<String, Option<usize>>,
    order: Vec<String>,
    /// Directory that relative file paths are resolved against.
    pub base_dir: PathBuf,
}

fn where_(line: Option<usize>) -> String {
    match line {
        Some(l) => format!("line {l}"),
        None => "--set".to_string(),
    }
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, Entry>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(CliError::config(Some(line), None, format!("expected 'key = value', got '{body}'")));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(CliError::config(Some(line), None, format!("invalid key '{k}'")));
        }
        if let Some(prev) = map.insert(
            k.to_string(),
            Entry {
                value: v.to_string(),
                line: Some(line),
            },
        ) {
            return Err(CliError::config(
                Some(line),
                Some(k),
                format!("duplicate key (first set on {})", where_(prev.line)),
            ));
        }
    }
    Ok(map)
}

fn apply_override(map: &mut BTreeMap<String, Entry>, spec: &str) -> Result<(), CliError> {
    let Some((k, v)) = spec.split_once('=') else {
        return Err(CliError::config(None, None, format!("override '{spec}' is not key=value")));
    };
    map.insert(
        k.trim().to_string(),
        Entry {
            value: v.trim().to_string(),
            line: None,
        },
    );
    Ok(())
}

fn count(map: &BTreeMap<String, Entry>, key: &str, default: usize) -> Result<usize, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(e) => match e.value.parse::<usize>() {
            Ok(n) if n <= MAX_INDEXED => Ok(n),
            _ => Err(CliError::config(
                e.line,
                Some(key),
                format!("expected an integer in 0..={MAX_INDEXED}, got '{}'", e.value),
            )),
        },
    }
}

/// Keys and defaults of one experiment, in output order. An empty default
/// marks a required key.
fn schema(kind: &str, map: &BTreeMap<String, Entry>) -> Result<Vec<(String, String)>, CliError> {
    let own = |s: Schema| s.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<Vec<_>>();
    let mut keys = own(COMMON);
    match kind {
        "tmm-spectrum" => {
            keys.extend(own(TMM));
            let n = count(map, "stack.layer_count", LAYER_DEFAULTS.len())?;
            for i in 1..=n {
                let (m, t, f) = LAYER_DEFAULTS.get(i - 1).copied().unwrap_or(("", "", "1.0"));
                keys.push((format!("stack.layer{i}.material"), m.into()));
                keys.push((format!("stack.layer{i}.thickness_nm"), t.into()));
                keys.push((format!("stack.layer{i}.fill_factor"), f.into()));
            }
        }
        "count-rate" => {
            keys.extend(own(DETECTOR));
            keys.extend(own(COUNT_RATE));
        }
        "g2-model" => {
            keys.extend(own(EMITTER));
            keys.push(("detector.jitter_fwhm_ns".into(), "0.062".into()));
            keys.extend(own(G2_MODEL));
        }
        "g2-zero-sweep" => {
            keys.extend(own(G2_SWEEP));
            let n = count(map, "scenario_count", SCENARIO_DEFAULTS.len())?;
            for i in 1..=n {
                let (name, qe, dark, jitter) = SCENARIO_DEFAULTS.get(i - 1).copied().unwrap_or(("", "", "", ""));
                keys.push((format!("scenario{i}.name"), name.into()));
                keys.push((format!("scenario{i}.qe"), qe.into()));
                keys.push((format!("scenario{i}.dark_cps"), dark.into()));
                keys.push((format!("scenario{i}.jitter_fwhm_ns"), jitter.into()));
            }
        }
        "hbt-sim" => {
            keys.extend(own(EMITTER));
            keys.extend(own(HBT));
            keys.extend([
                ("detector.jitter_fwhm_ns".into(), "0.062".into()),
                ("detector.dark_cps".into(), "0.1".into()),
                ("detector.dead_time_ns".into(), "3.0".into()),
            ]);
        }
        "lifetime-sim" => {
            keys.push(("emitter.lifetime_ns".into(), "12.0".into()));
            keys.extend(own(LIFETIME));
            keys.extend([
                ("detector.jitter_fwhm_ns".into(), "0.062".into()),
                ("detector.dead_time_ns".into(), "3.0".into()),
            ]);
        }
        "oracle-check" => {
            keys.extend(own(DETECTOR));
            keys.extend(own(ORACLE));
        }
        _ => unreachable!("experiment kind checked by caller"),
    }
    Ok(keys)
}

impl Config {
    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, overrides, base)
    }

    pub fn parse(text: &str, overrides: &[String], base_dir: PathBuf) -> Result<Self, CliError> {
        let mut map = parse_lines(text)?;
        for o in overrides {
            apply_override(&mut map, o)?;
        }
        let Some(kind) = map.get("experiment") else {
            return Err(CliError::config(
                None,
                Some("experiment"),
                format!("missing; valid kinds: {}", EXPERIMENTS.join(", ")),
            ));
        };
        if !EXPERIMENTS.contains(&kind.value.as_str()) {
            return Err(CliError::config(
                kind.line,
                Some("experiment"),
                format!("unknown experiment '{}'; valid kinds: {}", kind.value, EXPERIMENTS.join(", ")),
            ));
        }
        let keys = schema(&kind.value.clone(), &map)?;
        for (k, e) in &map {
            if !keys.iter().any(|(s, _)| s == k) {
                return Err(CliError::config(
                    e.line,
                    Some(k),
                    format!("unknown key for experiment '{}'", map["experiment"].value),
                ));
            }
        }
        let mut values = BTreeMap::new();
        let mut origins = BTreeMap::new();
        let mut order = Vec::new();
        for (k, default) in keys {
            let v = match map.get(&k) {
                Some(e) => {
                    origins.insert(k.clone(), e.line);
                    e.value.clone()
                }
                None if default.is_empty() => {
                    return Err(CliError::config(None, Some(&k), "required key has no default".to_string()));
                }
                None => default,
            };
            values.insert(k.clone(), v);
            order.push(k);
        }
        Ok(Self {
            values,
            origins,
            order,
            base_dir,
        })
    }

    pub fn experiment(&self) -> &str {
        &self.values["experiment"]
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        if let Some(v) = self.values.get_mut(key) {
            *v = value.into();
        }
    }

    /// All keys in schema order, one `key = value` line each. Parsing this
    /// text yields the same config.
    pub fn effective_text(&self) -> String {
        let mut out = String::new();
        for k in &self.order {
            let _ = writeln!(out, "{k} = {}", self.values[k]);
        }
        out
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key '{key}' not in schema"))
    }

    /// Config error attributed to the line that set `key`, if any.
    pub fn error(&self, key: &str, message: impl Into<String>) -> CliError {
        CliError::config(self.origins.get(key).copied().flatten(), Some(key), message.into())
    }

    fn bad(&self, key: &str, what: &str) -> CliError {
        self.error(key, format!("expected {what}, got '{}'", self.str(key)))
    }

    /// A real number; `a/b` is accepted as a quotient.
    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        parse_real(self.str(key)).ok_or_else(|| self.bad(key, "a real number"))
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.str(key)
            .split(',')
            .map(|s| parse_real(s.trim()))
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| self.bad(key, "a comma-separated list of real numbers"))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.str(key).parse().map_err(|_| self.bad(key, "a non-negative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.str(key).parse().map_err(|_| self.bad(key, "a non-negative integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        self.str(key).parse().map_err(|_| self.bad(key, "true or false"))
    }

    pub fn choice<'a>(&self, key: &str, options: &[&'a str]) -> Result<&'a str, CliError> {
        let v = self.str(key);
        options
            .iter()
            .find(|o| **o == v)
            .copied()
            .ok_or_else(|| self.bad(key, &format!("one of {}", options.join(", "))))
    }
}

fn parse_real(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, overrides: &[&str]) -> Result<Config, CliError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        Config::parse(text, &o, PathBuf::new())
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let c = parse("experiment = count-rate\n", &[]).unwrap();
        assert_eq!(c.f64("detector.I_c_uA").unwrap(), 29.0);
        assert_eq!(c.u64("seed").unwrap(), 1);
    }

    #[test]
    fn unknown_key_names_line() {
        let err = parse("experiment = count-rate\n\ndetector.Ic = 3\n", &[]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("detector.Ic"), "{msg}");
    }

    #[test]
    fn unknown_experiment_lists_kinds() {
        let msg = parse("experiment = magic\n", &[]).unwrap_err().to_string();
        for k in EXPERIMENTS {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn overrides_win_and_can_switch_experiment() {
        let c = parse("experiment = count-rate\nbias.current_frac = 0.5\n", &["bias.current_frac=0.7"]).unwrap();
        assert_eq!(c.f64("bias.current_frac").unwrap(), 0.7);
        let c = parse("experiment = count-rate\n", &["experiment=tmm-spectrum"]).unwrap();
        assert_eq!(c.experiment(), "tmm-spectrum");
    }

    #[test]
    fn indexed_keys_follow_counts() {
        let text = "experiment = tmm-spectrum\nstack.layer_count = 1\nstack.layer2.material = si\n";
        assert!(parse(text, &[]).is_err());
        let text = "experiment = tmm-spectrum\nstack.layer_count = 3\n";
        let msg = parse(text, &[]).unwrap_err().to_string();
        assert!(msg.contains("stack.layer3.material"), "{msg}");
    }

    #[test]
    fn effective_text_round_trips() {
        let c = parse("experiment = g2-zero-sweep # comment\nscene.signal_cps = 1e5\n", &["seed=9"]).unwrap();
        let again = parse(&c.effective_text(), &[]).unwrap();
        assert_eq!(c.effective_text(), again.effective_text());
        assert_eq!(again.f64("scene.signal_cps").unwrap(), 1e5);
    }

    #[test]
    fn duplicate_and_malformed_lines_rejected() {
        assert!(parse("experiment = count-rate\nseed = 1\nseed = 2\n", &[]).is_err());
        assert!(parse("experiment = count-rate\nseed 1\n", &[]).is_err());
    }

    #[test]
    fn reals_accept_quotients() {
        assert_eq!(parse_real("1/30"), Some(1.0 / 30.0));
        assert_eq!(parse_real("1e-3"), Some(1e-3));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_real("abc"), None);
    }
}
