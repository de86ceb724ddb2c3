//! Synthetic day-ahead solar generation scenarios: a clear-sky half-sine
//! over the daylight window, a random peak, and multiplicative cloud dips.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarGenConfig {
    pub horizon: usize,
    /// First daylight step.
    pub sunrise: usize,
    /// First dark step after the daylight window.
    pub sunset: usize,
    pub peak_kw: f64,
    /// Peak amplitude is drawn uniformly from `peak_kw * (1 +- jitter)`.
    pub amplitude_jitter: f64,
    pub min_dips: usize,
    pub max_dips: usize,
    /// Fractional depth range of a single cloud dip.
    pub dip_depth: (f64, f64),
    /// Gaussian width range of a dip, in steps.
    pub dip_width: (f64, f64),
    pub seed: u64,
}

impl Default for SolarGenConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            sunrise: 6,
            sunset: 19,
            peak_kw: 4.0,
            amplitude_jitter: 0.15,
            min_dips: 0,
            max_dips: 3,
            dip_depth: (0.1, 0.7),
            dip_width: (0.5, 2.0),
            seed: 0,
        }
    }
}

impl SolarGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sunrise >= self.sunset || self.sunset > self.horizon {
            return Err(Error::InvalidWindow {
                sunrise: self.sunrise,
                sunset: self.sunset,
                horizon: self.horizon,
            });
        }
        let range_ok = |(lo, hi): (f64, f64), max: f64| lo >= 0.0 && lo <= hi && hi <= max;
        if !(self.peak_kw > 0.0)
            || !(0.0..1.0).contains(&self.amplitude_jitter)
            || self.min_dips > self.max_dips
            || !range_ok(self.dip_depth, 1.0)
            || !range_ok(self.dip_width, f64::MAX)
            || self.dip_width.0 <= 0.0
        {
            return Err(Error::InvalidArgument(format!("invalid solar generator settings {self:?}")));
        }
        Ok(())
    }

    /// Largest value the generator can produce.
    pub fn upper_bound(&self) -> f64 {
        self.peak_kw * (1.0 + self.amplitude_jitter)
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn profile(cfg: &SolarGenConfig, rng: &mut impl Rng, out: &mut [f64]) {
    let jitter = if cfg.amplitude_jitter > 0.0 {
        rng.gen_range(-cfg.amplitude_jitter..cfg.amplitude_jitter)
    } else {
        0.0
    };
    let amplitude = cfg.peak_kw * (1.0 + jitter);
    let window = (cfg.sunset - cfg.sunrise) as f64;
    let dips: Vec<(f64, f64, f64)> = (0..rng.gen_range(cfg.min_dips..=cfg.max_dips))
        .map(|_| {
            let centre = rng.gen_range(cfg.sunrise as f64..cfg.sunset as f64);
            (centre, draw(rng, cfg.dip_depth), draw(rng, cfg.dip_width))
        })
        .collect();
    for (t, v) in out.iter_mut().enumerate() {
        *v = if (cfg.sunrise..cfg.sunset).contains(&t) {
            let phase = (t - cfg.sunrise) as f64 + 0.5;
            let clear = amplitude * (PI * phase / window).sin();
            let shade: f64 = dips
                .iter()
                .map(|&(c, depth, width)| 1.0 - depth * (-(t as f64 - c).powi(2) / (2.0 * width * width)).exp())
                .product();
            (clear * shade).max(0.0)
        } else {
            0.0
        };
    }
}

/// `size` equiprobable scenarios.
pub fn gen_synthetic(cfg: &SolarGenConfig, size: usize) -> Result<ScenarioSet> {
    cfg.validate()?;
    if size == 0 {
        return Err(Error::EmptySet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut values = vec![0.0; size * cfg.horizon];
    for scenario in values.chunks_exact_mut(cfg.horizon) {
        profile(cfg, &mut rng, scenario);
    }
    ScenarioSet::from_flat(values, vec![1.0 / size as f64; size], cfg.horizon)
}

/// `count` independent sets; set `i` is drawn with seed `base seed + i`.
pub fn gen_corpus(cfg: &SolarGenConfig, size: usize, count: usize) -> Result<Vec<ScenarioSet>> {
    (0..count as u64)
        .map(|i| {
            gen_synthetic(
                &SolarGenConfig {
                    seed: cfg.seed.wrapping_add(i),
                    ..*cfg
                },
                size,
            )
        })
        .collect()
}
