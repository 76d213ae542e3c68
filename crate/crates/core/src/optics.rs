//! Normal-incidence transfer-matrix optics for thin-film stacks.
//!
//! Tables store the complex index as `n + ik` with `k >= 0`. Internally the
//! characteristic matrices use the `exp(+iwt)` convention, where an absorbing
//! medium has index `N = n - ik` and a layer of thickness `d` has phase
//! thickness `delta = 2 pi N d / lambda`:
//!
//! ```text
//!     | cos(delta)        i sin(delta) / N |
//! M = |                                    |
//!     | i N sin(delta)    cos(delta)       |
//! ```
//!
//! Admittances are in units of the free-space admittance. Per-layer absorption
//! is the drop in net Poynting flux across each layer, normalized by the
//! incident flux, so `R + T + sum(A) = 1` holds by construction.

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type Matrix2 = [[Complex64; 2]; 2];

const SILICON_TABLE: &str = include_str!("../data/si.nk");
const SILICA_TABLE: &str = include_str!("../data/sio2.nk");
const NBN_TABLE: &str = include_str!("../data/nbn.nk");

/// Tabulated `n`, `k` against wavelength, linearly interpolated, no extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionTable {
    name: String,
    wavelengths_nm: Vec<f64>,
    n: Vec<f64>,
    k: Vec<f64>,
}

impl DispersionTable {
    pub fn new(name: impl Into<String>, samples: &[(f64, f64, f64)]) -> Result<Self> {
        let name = name.into();
        if samples.len() < 2 {
            return Err(Error::InvalidDispersion(format!(
                "{name}: need at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (i, &(wl, n, k)) in samples.iter().enumerate() {
            if !(wl > 0.0) || !wl.is_finite() {
                return Err(Error::InvalidDispersion(format!(
                    "{name}: wavelength {wl} nm at sample {i} is not positive"
                )));
            }
            if !n.is_finite() || !k.is_finite() {
                return Err(Error::InvalidDispersion(format!("{name}: non-finite n or k at sample {i}")));
            }
            if k < 0.0 {
                return Err(Error::InvalidDispersion(format!(
                    "{name}: k = {k} < 0 at {wl} nm (only passive media are supported)"
                )));
            }
            if i > 0 && wl <= samples[i - 1].0 {
                return Err(Error::InvalidDispersion(format!(
                    "{name}: wavelengths not strictly increasing at sample {i} ({wl} nm)"
                )));
            }
        }
        Ok(Self {
            name,
            wavelengths_nm: samples.iter().map(|s| s.0).collect(),
            n: samples.iter().map(|s| s.1).collect(),
            k: samples.iter().map(|s| s.2).collect(),
        })
    }

    /// A non-dispersive medium valid from 1 nm to 1 mm.
    pub fn constant(name: impl Into<String>, n: f64, k: f64) -> Result<Self> {
        Self::new(name, &[(1.0, n, k), (1.0e6, n, k)])
    }

    pub fn vacuum() -> Self {
        Self::constant("vacuum", 1.0, 0.0).expect("valid constant table")
    }

    /// Crystalline silicon shipped with the crate.
    pub fn silicon() -> Self {
        Self::parse("si", SILICON_TABLE).expect("bundled table parses")
    }

    /// Fused silica shipped with the crate.
    pub fn silica() -> Self {
        Self::parse("sio2", SILICA_TABLE).expect("bundled table parses")
    }

    /// Default ultrathin NbN table shipped with the crate.
    pub fn niobium_nitride() -> Self {
        Self::parse("nbn", NBN_TABLE).expect("bundled table parses")
    }

    /// Looks up a bundled material by name (`vacuum`, `si`, `sio2`, `nbn`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "vacuum" | "air" => Some(Self::vacuum()),
            "si" => Some(Self::silicon()),
            "sio2" => Some(Self::silica()),
            "nbn" => Some(Self::niobium_nitride()),
            _ => None,
        }
    }

    /// Parses the plain-text format: `#` comments, then `wavelength_nm n k` rows.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let name = name.into();
        let mut samples = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("{name}: expected 'wavelength_nm n k', got {} fields", fields.len()),
                });
            }
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f.parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("{name}: '{f}' is not a number"),
                })?;
            }
            samples.push((vals[0], vals[1], vals[2]));
        }
        Self::new(name, &samples)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::parse(name, &text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range_nm(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], *self.wavelengths_nm.last().unwrap())
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.wavelengths_nm
            .iter()
            .zip(&self.n)
            .zip(&self.k)
            .map(|((&w, &n), &k)| (w, n, k))
    }

    /// Complex index `n + ik` at `wavelength_nm`.
    pub fn index_at(&self, wavelength_nm: f64) -> Result<Complex64> {
        let (lo, hi) = self.range_nm();
        if !(wavelength_nm >= lo && wavelength_nm <= hi) {
            return Err(Error::WavelengthOutOfRange {
                table: self.name.clone(),
                wavelength_nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let i = match self.wavelengths_nm.partition_point(|&w| w <= wavelength_nm) {
            0 => 0,
            p if p >= self.wavelengths_nm.len() => self.wavelengths_nm.len() - 2,
            p => p - 1,
        };
        let (w0, w1) = (self.wavelengths_nm[i], self.wavelengths_nm[i + 1]);
        let f = (wavelength_nm - w0) / (w1 - w0);
        let n = self.n[i] + f * (self.n[i + 1] - self.n[i]);
        let k = self.k[i] + f * (self.k[i + 1] - self.k[i]);
        Ok(Complex64::new(n, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub thickness_nm: f64,
    pub dispersion: DispersionTable,
    /// Area fraction covered by the film; 1.0 for a continuous film.
    pub fill_factor: f64,
}

impl Layer {
    pub fn new(dispersion: DispersionTable, thickness_nm: f64, fill_factor: f64) -> Result<Self> {
        if !(thickness_nm >= 0.0) || !thickness_nm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "layer '{}': thickness {thickness_nm} nm must be >= 0",
                dispersion.name()
            )));
        }
        if !(fill_factor > 0.0 && fill_factor <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "layer '{}': fill factor {fill_factor} must be in (0, 1]",
                dispersion.name()
            )));
        }
        Ok(Self {
            thickness_nm,
            dispersion,
            fill_factor,
        })
    }

    pub fn continuous(dispersion: DispersionTable, thickness_nm: f64) -> Result<Self> {
        Self::new(dispersion, thickness_nm, 1.0)
    }

    /// Effective index `n + ik` of the film, mixing its permittivity with
    /// vacuum by fill factor: `eps_eff = f eps + (1 - f)`.
    pub fn effective_index(&self, wavelength_nm: f64) -> Result<Complex64> {
        let index = self.dispersion.index_at(wavelength_nm)?;
        if self.fill_factor == 1.0 {
            return Ok(index);
        }
        let eps = index * index;
        let eps_eff = eps * self.fill_factor + Complex64::new(1.0 - self.fill_factor, 0.0);
        Ok(eps_eff.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    /// Incidence medium; must be non-absorbing.
    pub ambient: DispersionTable,
    /// Layers in the order light meets them.
    pub layers: Vec<Layer>,
    /// Semi-infinite exit medium.
    pub substrate: DispersionTable,
}

impl LayerStack {
    /// Vacuum / NbN 4 nm (fill 0.6) / SiO2 160 nm / Si.
    pub fn paper_default() -> Self {
        Self::paper_default_with_fill(0.6)
    }

    pub fn paper_default_with_fill(fill_factor: f64) -> Self {
        Self {
            ambient: DispersionTable::vacuum(),
            layers: vec![
                Layer::new(DispersionTable::niobium_nitride(), 4.0, fill_factor).expect("valid layer"),
                Layer::continuous(DispersionTable::silica(), 160.0).expect("valid layer"),
            ],
            substrate: DispersionTable::silicon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackResponse {
    pub wavelength_nm: f64,
    pub reflectance: f64,
    pub transmittance: f64,
    pub absorption_per_layer: Vec<f64>,
}

impl StackResponse {
    pub fn total_absorption(&self) -> f64 {
        self.absorption_per_layer.iter().sum()
    }
}

/// Converts a table index `n + ik` to the matrix convention `n - ik`.
fn admittance(index: Complex64) -> Complex64 {
    index.conj()
}

fn matrix_for(index: Complex64, thickness_nm: f64, wavelength_nm: f64) -> Matrix2 {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if thickness_nm == 0.0 {
        return [[one, zero], [zero, one]];
    }
    let y = admittance(index);
    let delta = y * (2.0 * std::f64::consts::PI * thickness_nm / wavelength_nm);
    let (c, s) = (delta.cos(), delta.sin());
    let i = Complex64::i();
    [[c, i * s / y], [i * y * s, c]]
}

/// Normal-incidence characteristic matrix of a single layer.
pub fn characteristic_matrix(layer: &Layer, wavelength_nm: f64) -> Result<Matrix2> {
    let index = layer.effective_index(wavelength_nm)?;
    Ok(matrix_for(index, layer.thickness_nm, wavelength_nm))
}

fn apply(m: &Matrix2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn net_flux(v: [Complex64; 2]) -> f64 {
    (v[0] * v[1].conj()).re
}

pub fn stack_response(stack: &LayerStack, wavelength_nm: f64) -> Result<StackResponse> {
    let ambient = stack.ambient.index_at(wavelength_nm)?;
    if ambient.im != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ambient '{}' absorbs at {wavelength_nm} nm; the incidence medium must be lossless",
            stack.ambient.name()
        )));
    }
    let eta0 = ambient.re;
    let eta_sub = admittance(stack.substrate.index_at(wavelength_nm)?);

    // Field vector [E, H] at the exit face, normalized to unit exit field,
    // propagated back to the front of each layer.
    let mut field = [Complex64::new(1.0, 0.0), eta_sub];
    let mut fluxes = vec![0.0; stack.layers.len() + 1];
    fluxes[stack.layers.len()] = net_flux(field);
    for (j, layer) in stack.layers.iter().enumerate().rev() {
        let m = characteristic_matrix(layer, wavelength_nm)?;
        field = apply(&m, field);
        fluxes[j] = net_flux(field);
    }

    let [b, c] = field;
    let denom = b * eta0 + c;
    let incident = denom.norm_sqr() / (4.0 * eta0);
    let r = (b * eta0 - c) / denom;

    let absorption_per_layer = fluxes.windows(2).map(|w| (w[0] - w[1]) / incident).collect();
    Ok(StackResponse {
        wavelength_nm,
        reflectance: r.norm_sqr(),
        transmittance: eta_sub.re / incident,
        absorption_per_layer,
    })
}

/// Evaluates [`stack_response`] at each wavelength, in parallel, preserving order.
pub fn absorption_spectrum(stack: &LayerStack, wavelengths_nm: &[f64]) -> Result<Vec<StackResponse>> {
    if wavelengths_nm.is_empty() {
        return Err(Error::InvalidParameter("empty wavelength list".into()));
    }
    wavelengths_nm
        .par_iter()
        .enumerate()
        .map(|(index, &wl)| {
            stack_response(stack, wl).map_err(|e| Error::SweepPoint {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
