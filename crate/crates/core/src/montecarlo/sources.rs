//! Photon sources. Each yields arrival times lazily so very long or very
//! dense runs never materialize the full photon stream.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Geometric};

use super::rng::{stream_rng, SimRng};
use super::stream::TimestampStream;
use crate::error::{Error, Result};
use crate::photon_stats::EmitterParams;

pub trait PhotonSource {
    /// Next arrival time, non-decreasing; `None` once the source is exhausted.
    fn next_photon(&mut self) -> Option<f64>;

    /// The consumer ignores arrivals before `t_ns`. Memoryless sources may
    /// jump ahead; others keep producing and let the consumer discard.
    fn skip_until(&mut self, _t_ns: f64) {}

    /// Fraction of photons already removed by thinning. A consumer modelling
    /// efficiency `nu` accepts each delivered photon with `nu / bound`.
    fn efficiency_bound(&self) -> f64 {
        1.0
    }
}

/// Replays a recorded stream.
pub struct StreamSource<'a> {
    times: &'a [f64],
    next: usize,
}

impl<'a> StreamSource<'a> {
    pub fn new(stream: &'a TimestampStream) -> Self {
        Self {
            times: &stream.times_ns,
            next: 0,
        }
    }
}

impl PhotonSource for StreamSource<'_> {
    fn next_photon(&mut self) -> Option<f64> {
        let t = self.times.get(self.next).copied();
        self.next += 1;
        t
    }

    fn skip_until(&mut self, t_ns: f64) {
        while self.next < self.times.len() && self.times[self.next] < t_ns {
            self.next += 1;
        }
    }
}

/// Homogeneous Poisson arrivals, optionally pre-thinned by a known
/// efficiency ceiling.
pub struct PoissonSource {
    rng: SimRng,
    exp: Option<Exp<f64>>,
    t: f64,
    end: f64,
    bound: f64,
}

impl PoissonSource {
    pub fn new(rate_cps: f64, duration_ns: f64, seed: u64, label: &str) -> Result<Self> {
        Self::thinned(rate_cps, 1.0, duration_ns, seed, label)
    }

    /// Delivers only a fraction `bound` of the photons of a rate-`rate_cps`
    /// process.
    pub fn thinned(rate_cps: f64, bound: f64, duration_ns: f64, seed: u64, label: &str) -> Result<Self> {
        if !(rate_cps >= 0.0 && rate_cps.is_finite()) {
            return Err(Error::InvalidParameter(format!("Poisson rate {rate_cps} cps must be >= 0")));
        }
        if !(bound > 0.0 && bound <= 1.0) {
            return Err(Error::InvalidParameter(format!("thinning bound {bound} must be in (0, 1]")));
        }
        if !(duration_ns >= 0.0) {
            return Err(Error::InvalidParameter(format!("duration {duration_ns} ns must be >= 0")));
        }
        let per_ns = rate_cps * bound * 1e-9;
        Ok(Self {
            rng: stream_rng(seed, label),
            exp: (per_ns > 0.0).then(|| Exp::new(per_ns).expect("positive rate")),
            t: 0.0,
            end: duration_ns,
            bound,
        })
    }
}

impl PhotonSource for PoissonSource {
    fn next_photon(&mut self) -> Option<f64> {
        let exp = self.exp.as_ref()?;
        self.t += exp.sample(&mut self.rng);
        (self.t <= self.end).then_some(self.t)
    }

    fn skip_until(&mut self, t_ns: f64) {
        self.t = self.t.max(t_ns);
    }

    fn efficiency_bound(&self) -> f64 {
        self.bound
    }
}

/// Two-level emitter under continuous incoherent pumping. Starts in the
/// steady state; each decay emits a collected photon with probability
/// `radiative_yield`.
pub struct EmitterSource {
    rng: SimRng,
    excite: Option<Exp<f64>>,
    decay: Exp<f64>,
    rate_r: f64,
    gamma: f64,
    skip: Option<Geometric>,
    t: f64,
    end: f64,
    initially_excited: bool,
    yield_p: f64,
}

impl EmitterSource {
    pub fn new(emitter: &EmitterParams, duration_ns: f64, seed: u64, label: &str) -> Result<Self> {
        emitter.validate()?;
        let mut rng = stream_rng(seed, label);
        let initially_excited = rng.random::<f64>() < emitter.steady_state_population();
        let r = emitter.excitation_rate_per_ns;
        Ok(Self {
            rng,
            excite: (r > 0.0).then(|| Exp::new(r).expect("positive rate")),
            decay: Exp::new(emitter.decay_rate_per_ns).expect("positive rate"),
            rate_r: r,
            gamma: emitter.decay_rate_per_ns,
            skip: (emitter.radiative_yield < 1.0)
                .then(|| Geometric::new(emitter.radiative_yield).expect("yield in (0, 1)")),
            t: 0.0,
            end: duration_ns,
            initially_excited,
            yield_p: emitter.radiative_yield,
        })
    }

    /// Duration of `k` full ground -> excited -> ground cycles.
    fn cycles(&mut self, k: u64) -> f64 {
        if k == 1 {
            let excite = self.excite.as_ref().expect("pumped emitter");
            return excite.sample(&mut self.rng) + self.decay.sample(&mut self.rng);
        }
        let k = k as f64;
        Gamma::new(k, 1.0 / self.rate_r).expect("valid").sample(&mut self.rng)
            + Gamma::new(k, 1.0 / self.gamma).expect("valid").sample(&mut self.rng)
    }
}

impl PhotonSource for EmitterSource {
    fn next_photon(&mut self) -> Option<f64> {
        if self.initially_excited {
            self.initially_excited = false;
            self.t += self.decay.sample(&mut self.rng);
            if self.rng.random::<f64>() < self.yield_p {
                return (self.t <= self.end).then_some(self.t);
            }
        }
        self.excite.as_ref()?;
        let k = 1 + self.skip.map_or(0, |g| g.sample(&mut self.rng));
        self.t += self.cycles(k);
        (self.t <= self.end).then_some(self.t)
    }
}

/// Emitter driven by short pulses every `period_ns` starting at t = 0. Each
/// pulse finding the emitter in its ground state excites it with probability
/// `excitation_probability`; the photon follows after an exponential delay.
pub struct PulsedEmitterSource {
    rng: SimRng,
    pulse_skip: Option<Geometric>,
    decay: Exp<f64>,
    period: f64,
    next_pulse: u64,
    end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsedEmitterParams {
    pub period_ns: f64,
    pub excitation_probability: f64,
    pub lifetime_ns: f64,
    /// Probability an excitation yields a detected-band photon.
    pub radiative_yield: f64,
}

impl PulsedEmitterSource {
    pub fn new(p: &PulsedEmitterParams, duration_ns: f64, seed: u64, label: &str) -> Result<Self> {
        if !(p.period_ns > 0.0 && p.lifetime_ns > 0.0) {
            return Err(Error::InvalidParameter("pulse period and lifetime must be > 0".into()));
        }
        let prob = p.excitation_probability * p.radiative_yield;
        if !((0.0..=1.0).contains(&p.excitation_probability) && (0.0..=1.0).contains(&p.radiative_yield)) {
            return Err(Error::InvalidParameter(
                "excitation probability and yield must be in [0, 1]".into(),
            ));
        }
        Ok(Self {
            rng: stream_rng(seed, label),
            pulse_skip: (prob > 0.0).then(|| Geometric::new(prob).expect("probability in (0, 1]")),
            decay: Exp::new(1.0 / p.lifetime_ns).expect("positive rate"),
            period: p.period_ns,
            next_pulse: 0,
            end: duration_ns,
        })
    }
}

impl PhotonSource for PulsedEmitterSource {
    fn next_photon(&mut self) -> Option<f64> {
        let skip = self.pulse_skip?;
        let pulse = self.next_pulse + skip.sample(&mut self.rng);
        let t = pulse as f64 * self.period + self.decay.sample(&mut self.rng);
        if t > self.end {
            self.pulse_skip = None;
            return None;
        }
        // Pulses arriving while the emitter is still excited do nothing.
        self.next_pulse = (pulse + 1).max((t / self.period).ceil() as u64);
        Some(t)
    }
}

/// Drains a source into a stream covering `[0, duration_ns]`.
pub fn collect(source: &mut dyn PhotonSource, duration_ns: f64, seed: u64, label: &str) -> Result<TimestampStream> {
    let mut times: Vec<f64> = Vec::new();
    while let Some(t) = source.next_photon() {
        if t > duration_ns {
            break;
        }
        if times.last().is_none_or(|&last| t > last) {
            times.push(t);
        }
    }
    TimestampStream::new(times, duration_ns, seed, label)
}

pub fn simulate_emitter(emitter: &EmitterParams, duration_ns: f64, seed: u64) -> Result<TimestampStream> {
    check_duration(duration_ns)?;
    let mut src = EmitterSource::new(emitter, duration_ns, seed, "emitter")?;
    collect(&mut src, duration_ns, seed, "emitter")
}

pub fn simulate_poisson(rate_cps: f64, duration_ns: f64, seed: u64) -> Result<TimestampStream> {
    check_duration(duration_ns)?;
    let mut src = PoissonSource::new(rate_cps, duration_ns, seed, "poisson")?;
    collect(&mut src, duration_ns, seed, "poisson")
}

pub fn simulate_pulsed_emitter(p: &PulsedEmitterParams, duration_ns: f64, seed: u64) -> Result<TimestampStream> {
    check_duration(duration_ns)?;
    let mut src = PulsedEmitterSource::new(p, duration_ns, seed, "pulsed-emitter")?;
    collect(&mut src, duration_ns, seed, "pulsed-emitter")
}

fn check_duration(duration_ns: f64) -> Result<()> {
    if duration_ns > 0.0 && duration_ns.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("duration {duration_ns} ns must be finite and > 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unpumped_emitter_is_dark() {
        let e = EmitterParams::new(0.0, 0.3, 1.0).unwrap();
        assert!(simulate_emitter(&e, 1e6, 1).unwrap().is_empty());
        assert!(simulate_poisson(0.0, 1e6, 1).unwrap().is_empty());
    }

    #[test]
    fn emitter_rate_matches_steady_state() {
        let e = EmitterParams::new(1.0 / 30.0, 1.0 / 3.0, 0.4).unwrap();
        let duration = 1e9;
        let s = simulate_emitter(&e, duration, 11).unwrap();
        let expected = e.emission_rate_cps() * duration * 1e-9;
        // Renewal counts are sub-Poissonian, so sqrt(mean) is a generous bound.
        assert!((s.len() as f64 - expected).abs() < 3.0 * expected.sqrt(), "{} vs {expected}", s.len());
    }

    #[test]
    fn poisson_count_in_expected_range() {
        let s = simulate_poisson(1e5, 1e6, 3).unwrap();
        assert!((s.len() as f64 - 100.0).abs() <= 30.0);
        let s = simulate_poisson(1e8, 1e6, 3).unwrap();
        assert!((s.len() as f64 - 1e5).abs() <= 3.0 * 1e5f64.sqrt());
    }

    #[test]
    fn sources_are_deterministic() {
        let e = EmitterParams::new(0.05, 0.2, 0.7).unwrap();
        assert_eq!(simulate_emitter(&e, 1e6, 5).unwrap(), simulate_emitter(&e, 1e6, 5).unwrap());
        assert_ne!(simulate_emitter(&e, 1e6, 5).unwrap(), simulate_emitter(&e, 1e6, 6).unwrap());
        assert_eq!(simulate_poisson(1e7, 1e6, 5).unwrap(), simulate_poisson(1e7, 1e6, 5).unwrap());
    }

    #[test]
    fn pulsed_emitter_photons_follow_pulses() {
        let p = PulsedEmitterParams {
            period_ns: 100.0,
            excitation_probability: 1.0,
            lifetime_ns: 1.0,
            radiative_yield: 1.0,
        };
        let s = simulate_pulsed_emitter(&p, 1e5, 9).unwrap();
        assert!(s.len() > 990);
        assert!(s.times_ns.iter().all(|t| t % 100.0 < 40.0));
    }
}
