//! Bundled configs, one per reproduced figure.

use std::path::PathBuf;

use crate::config::Config;
use crate::error::CliError;

pub const PRESETS: [(&str, &str); 8] = [
    ("fig1c", include_str!("../presets/fig1c.cfg")),
    ("fig2e", include_str!("../presets/fig2e.cfg")),
    ("fig3a", include_str!("../presets/fig3a.cfg")),
    ("fig3b", include_str!("../presets/fig3b.cfg")),
    ("fig3c", include_str!("../presets/fig3c.cfg")),
    ("fig3d", include_str!("../presets/fig3d.cfg")),
    ("fig6a", include_str!("../presets/fig6a.cfg")),
    ("fig6b", include_str!("../presets/fig6b.cfg")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// First comment line of a preset, used as its description.
pub fn summary(name: &str) -> Option<&'static str> {
    text(name)?.lines().find_map(|l| l.strip_prefix("# ")).map(str::trim)
}

pub fn load(name: &str, overrides: &[String]) -> Result<Config, CliError> {
    let Some(t) = text(name) else {
        return Err(CliError::config(
            None,
            None,
            format!("unknown preset '{name}'; available: {}", names().collect::<Vec<_>>().join(", ")),
        ));
    };
    Config::parse(t, overrides, PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_has_a_summary() {
        for name in names() {
            load(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(summary(name).is_some(), "{name}");
        }
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        assert_eq!(load("fig9", &[]).unwrap_err().exit_code(), 2);
    }
}
