//! Synthetic channel source.
//!
//! Each node observes `|A[m]·h[m]·X + n[m]|` where `A` is a slowly varying
//! large-scale amplitude (linear path-loss ramp in dB plus first-order
//! low-pass filtered Gaussian shadowing), `h` is unit-power Rician small-scale
//! fading whose scattered part is a complex AR(1) process, `X` is the probe
//! amplitude and `n` is circular complex Gaussian noise. Alice and Bob share
//! `h` and differ only in noise; Eve's scattered fading is
//! `ρ·s + sqrt(1 − ρ²)·w` with `w` an independent copy of the same process.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{MeasurementSeries, NodeId, Scenario};
use crate::error::{Result, SkgError};
use crate::rng::{stream, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrendSpec {
    /// Path loss added per sample, in dB (positive = signal weakens).
    pub path_loss_db_per_sample: f64,
    pub shadowing_std_db: f64,
    /// Time constant of the shadowing low-pass filter in samples; the
    /// cutoff is `1 / (2π·τ)` cycles per sample.
    pub shadowing_corr_samples: f64,
}

impl Default for TrendSpec {
    fn default() -> Self {
        TrendSpec {
            path_loss_db_per_sample: 2e-5,
            shadowing_std_db: 4.0,
            shadowing_corr_samples: 4000.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FadingSpec {
    /// Lag-one correlation of the scattered fading process.
    pub doppler_corr: f64,
    /// Ratio of specular to scattered power; 0 gives Rayleigh fading.
    pub rician_k: f64,
}

impl Default for FadingSpec {
    fn default() -> Self {
        FadingSpec {
            doppler_corr: 0.9,
            rician_k: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSimConfig {
    pub num_samples: usize,
    /// Scattered (small-scale) signal power over noise power, in dB.
    /// `inf` switches the noise off.
    pub snr_db: f64,
    pub eve_correlation: f64,
    pub trend: TrendSpec,
    pub fading: FadingSpec,
    /// Eve sits next to Bob and sees the same large-scale trend.
    pub eve_shares_trend: bool,
    pub probe_symbol: f64,
    pub sample_period_s: f64,
    pub scenario: Scenario,
    pub seed: u64,
}

impl Default for ChannelSimConfig {
    fn default() -> Self {
        ChannelSimConfig {
            num_samples: 65_536,
            snr_db: 20.0,
            eve_correlation: 0.0,
            trend: TrendSpec::default(),
            fading: FadingSpec::default(),
            eve_shares_trend: true,
            probe_symbol: 1.0,
            sample_period_s: 0.005,
            scenario: Scenario::Nlos,
            seed: 1,
        }
    }
}

impl ChannelSimConfig {
    /// Line-of-sight preset: a strong specular path and a slower,
    /// less noisy scattered component.
    pub fn los(seed: u64) -> Self {
        ChannelSimConfig {
            snr_db: 22.0,
            fading: FadingSpec {
                doppler_corr: 0.9,
                rician_k: 2.0,
            },
            scenario: Scenario::Los,
            seed,
            ..Default::default()
        }
    }

    /// Non-line-of-sight preset: Rayleigh fading.
    pub fn nlos(seed: u64) -> Self {
        ChannelSimConfig {
            snr_db: 18.0,
            scenario: Scenario::Nlos,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_samples < 2 {
            return Err(SkgError::config("num_samples must be at least 2"));
        }
        if !(self.eve_correlation.abs() <= 1.0) {
            return Err(SkgError::config(format!(
                "eve_correlation must lie in [-1, 1], got {}",
                self.eve_correlation
            )));
        }
        if !(self.fading.doppler_corr.abs() < 1.0) {
            return Err(SkgError::config("doppler_corr must lie in (-1, 1)"));
        }
        if !(self.fading.rician_k >= 0.0) {
            return Err(SkgError::config("rician_k must be non-negative"));
        }
        if !(self.probe_symbol > 0.0) {
            return Err(SkgError::config("probe_symbol must be positive"));
        }
        if !(self.trend.shadowing_corr_samples > 0.0) || !(self.trend.shadowing_std_db >= 0.0) {
            return Err(SkgError::config("invalid shadowing parameters"));
        }
        if self.snr_db.is_nan() {
            return Err(SkgError::config("snr_db is NaN"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct Complex {
    re: f64,
    im: f64,
}

fn complex_normal(rng: &mut ChaCha20Rng) -> Complex {
    // CN(0, 1): each component has variance 1/2.
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex {
        re: re * std::f64::consts::FRAC_1_SQRT_2,
        im: im * std::f64::consts::FRAC_1_SQRT_2,
    }
}

/// Unit-power complex AR(1) process.
fn ar1_process(rng: &mut ChaCha20Rng, len: usize, rho: f64) -> Vec<Complex> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut cur = complex_normal(rng);
    out.push(cur);
    for _ in 1..len {
        let z = complex_normal(rng);
        cur = Complex {
            re: rho * cur.re + innov * z.re,
            im: rho * cur.im + innov * z.im,
        };
        out.push(cur);
    }
    out
}

/// Large-scale amplitude (linear) per sample.
fn trend_amplitude(rng: &mut ChaCha20Rng, len: usize, spec: &TrendSpec) -> Vec<f64> {
    let a = (-1.0 / spec.shadowing_corr_samples).exp();
    let innov = (1.0 - a * a).sqrt() * spec.shadowing_std_db;
    let mut shadow: f64 = rng.sample::<f64, _>(StandardNormal) * spec.shadowing_std_db;
    (0..len)
        .map(|m| {
            if m > 0 {
                shadow = a * shadow + innov * rng.sample::<f64, _>(StandardNormal);
            }
            let db = -spec.path_loss_db_per_sample * m as f64 + shadow;
            10f64.powf(db / 20.0)
        })
        .collect()
}

fn observe(
    amp: &[f64],
    specular: Complex,
    scatter_gain: f64,
    scattered: &[Complex],
    x: f64,
    noise_std: f64,
    noise: &mut ChaCha20Rng,
) -> Vec<f64> {
    amp.iter()
        .zip(scattered)
        .map(|(&a, s)| {
            let h_re = specular.re + scatter_gain * s.re;
            let h_im = specular.im + scatter_gain * s.im;
            let mut re = a * h_re * x;
            let mut im = a * h_im * x;
            if noise_std > 0.0 {
                let n = complex_normal(noise);
                re += noise_std * n.re;
                im += noise_std * n.im;
            }
            re.hypot(im)
        })
        .collect()
}

/// Generates aligned (Alice, Bob, Eve) magnitude series.
pub fn simulate_channel(cfg: &ChannelSimConfig) -> Result<(MeasurementSeries, MeasurementSeries, MeasurementSeries)> {
    cfg.validate()?;
    let n = cfg.num_samples;
    let lane = cfg.scenario as u64;
    let rho = cfg.eve_correlation;

    let amp = trend_amplitude(&mut stream(cfg.seed, Purpose::LegitShadowing, lane), n, &cfg.trend);
    let amp_eve = if cfg.eve_shares_trend {
        amp.clone()
    } else {
        trend_amplitude(&mut stream(cfg.seed, Purpose::EveShadowing, lane), n, &cfg.trend)
    };

    let legit = ar1_process(
        &mut stream(cfg.seed, Purpose::LegitFading, lane),
        n,
        cfg.fading.doppler_corr,
    );
    let eve_own: Vec<Complex> = if rho.abs() == 1.0 {
        Vec::new()
    } else {
        ar1_process(
            &mut stream(cfg.seed, Purpose::EveFading, lane),
            n,
            cfg.fading.doppler_corr,
        )
    };
    let mix = (1.0 - rho * rho).sqrt();
    let eve_scatter: Vec<Complex> = legit
        .iter()
        .enumerate()
        .map(|(i, s)| match eve_own.get(i) {
            Some(w) => Complex {
                re: rho * s.re + mix * w.re,
                im: rho * s.im + mix * w.im,
            },
            None => Complex {
                re: rho * s.re,
                im: rho * s.im,
            },
        })
        .collect();

    let k = cfg.fading.rician_k;
    let spec_mag = (k / (k + 1.0)).sqrt();
    let specular = Complex {
        re: spec_mag * std::f64::consts::FRAC_1_SQRT_2,
        im: spec_mag * std::f64::consts::FRAC_1_SQRT_2,
    };
    let scatter_gain = (1.0 / (k + 1.0)).sqrt();

    let x = cfg.probe_symbol;
    let mean_amp_sq = amp.iter().map(|a| a * a).sum::<f64>() / n as f64;
    let scattered_power = x * x * mean_amp_sq * scatter_gain * scatter_gain;
    let noise_std = if cfg.snr_db == f64::INFINITY {
        0.0
    } else {
        (scattered_power / 10f64.powf(cfg.snr_db / 10.0)).sqrt()
    };

    let mk = |node, samples| MeasurementSeries::new(node, 0, 0, samples, cfg.sample_period_s, cfg.scenario);
    let alice = observe(
        &amp,
        specular,
        scatter_gain,
        &legit,
        x,
        noise_std,
        &mut stream(cfg.seed, Purpose::AliceNoise, lane),
    );
    let bob = observe(
        &amp,
        specular,
        scatter_gain,
        &legit,
        x,
        noise_std,
        &mut stream(cfg.seed, Purpose::BobNoise, lane),
    );
    let eve = observe(
        &amp_eve,
        specular,
        scatter_gain,
        &eve_scatter,
        x,
        noise_std,
        &mut stream(cfg.seed, Purpose::EveNoise, lane),
    );
    Ok((mk(NodeId::Alice, alice)?, mk(NodeId::Bob, bob)?, mk(NodeId::Eve, eve)?))
}

/// The scattered fading processes behind a simulation, for checks on the
/// small-scale statistics. Returns (legitimate, Eve) real parts.
#[doc(hidden)]
pub fn scattered_components(cfg: &ChannelSimConfig) -> (Vec<f64>, Vec<f64>) {
    let n = cfg.num_samples;
    let lane = cfg.scenario as u64;
    let rho = cfg.eve_correlation;
    let legit = ar1_process(
        &mut stream(cfg.seed, Purpose::LegitFading, lane),
        n,
        cfg.fading.doppler_corr,
    );
    let own = ar1_process(
        &mut stream(cfg.seed, Purpose::EveFading, lane),
        n,
        cfg.fading.doppler_corr,
    );
    let mix = (1.0 - rho * rho).sqrt();
    let eve = legit.iter().zip(&own).map(|(s, w)| rho * s.re + mix * w.re).collect();
    (legit.iter().map(|s| s.re).collect(), eve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::pearson;

    fn small(seed: u64) -> ChannelSimConfig {
        ChannelSimConfig {
            num_samples: 4096,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_reciprocity() {
        let cfg = ChannelSimConfig {
            snr_db: f64::INFINITY,
            ..small(3)
        };
        let (a, b, _) = simulate_channel(&cfg).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn full_correlation_noiseless_eve_matches_alice() {
        let cfg = ChannelSimConfig {
            snr_db: f64::INFINITY,
            eve_correlation: 1.0,
            eve_shares_trend: true,
            ..small(4)
        };
        let (a, _, e) = simulate_channel(&cfg).unwrap();
        assert_eq!(a.samples(), e.samples());
    }

    #[test]
    fn deterministic_in_seed() {
        let (a1, b1, e1) = simulate_channel(&small(9)).unwrap();
        let (a2, b2, e2) = simulate_channel(&small(9)).unwrap();
        assert_eq!((a1, b1, e1), (a2, b2, e2));
        let (a3, _, _) = simulate_channel(&small(10)).unwrap();
        assert_ne!(a3.samples(), simulate_channel(&small(9)).unwrap().0.samples());
    }

    #[test]
    fn uncorrelated_eve_small_scale() {
        let cfg = ChannelSimConfig {
            num_samples: 100_000,
            ..small(11)
        };
        let (legit, eve) = scattered_components(&cfg);
        let r = pearson(&legit, &eve);
        assert!(r.abs() < 0.02, "correlation {r}");
    }

    #[test]
    fn partial_correlation_is_reproduced() {
        let cfg = ChannelSimConfig {
            num_samples: 100_000,
            eve_correlation: 0.6,
            ..small(12)
        };
        let (legit, eve) = scattered_components(&cfg);
        let r = pearson(&legit, &eve);
        assert!((r - 0.6).abs() < 0.03, "correlation {r}");
    }

    #[test]
    fn reciprocity_degrades_with_noise() {
        let corr: Vec<f64> = [40.0, 20.0, 10.0, 0.0]
            .iter()
            .map(|&snr| {
                let (a, b, _) = simulate_channel(&ChannelSimConfig {
                    snr_db: snr,
                    ..small(5)
                })
                .unwrap();
                pearson(a.samples(), b.samples())
            })
            .collect();
        assert!(corr.windows(2).all(|w| w[1] <= w[0]), "{corr:?}");
    }

    #[test]
    fn rejects_invalid_correlation() {
        let cfg = ChannelSimConfig {
            eve_correlation: 1.5,
            ..small(1)
        };
        assert!(matches!(simulate_channel(&cfg), Err(SkgError::Config(_))));
    }
}
