//! Deterministic chain generators.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::MassSpringChain;
use crate::error::{Error, Result};

/// Masses and springs of random fixtures are drawn log-uniformly from
/// `[1/RANGE, RANGE]`.
pub const RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    Uniform,
    RandomLoguniform,
    Palindromic,
    CommonSpectrum,
}

impl FixtureKind {
    pub const ALL: [FixtureKind; 4] =
        [FixtureKind::Uniform, FixtureKind::RandomLoguniform, FixtureKind::Palindromic, FixtureKind::CommonSpectrum];

    pub fn name(self) -> &'static str {
        match self {
            FixtureKind::Uniform => "uniform",
            FixtureKind::RandomLoguniform => "random-loguniform",
            FixtureKind::Palindromic => "palindromic",
            FixtureKind::CommonSpectrum => "common-spectrum",
        }
    }
}

impl fmt::Display for FixtureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown fixture kind '{s}'")))
    }
}

fn log_uniform(rng: &mut ChaCha8Rng) -> f64 {
    let r = RANGE.ln();
    rng.gen_range(-r..=r).exp()
}

pub fn random_loguniform(seed: u64, size: usize) -> Result<MassSpringChain> {
    // Draw order k_1, m_1, k_2, m_2, ... so that a smaller size is a
    // truncation of a larger one with the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masses = Vec::with_capacity(size);
    let mut springs = Vec::with_capacity(size + 1);
    for _ in 0..size {
        springs.push(log_uniform(&mut rng));
        masses.push(log_uniform(&mut rng));
    }
    springs.push(log_uniform(&mut rng));
    MassSpringChain::new(masses, springs)
}

/// Random chain invariant under `j -> N + 1 - j`.
pub fn palindromic(seed: u64, size: usize) -> Result<MassSpringChain> {
    if size == 0 {
        return Err(Error::InvalidInput("fixture size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_m: Vec<f64> = (0..size.div_ceil(2)).map(|_| log_uniform(&mut rng)).collect();
    let half_k: Vec<f64> = (0..(size + 1).div_ceil(2)).map(|_| log_uniform(&mut rng)).collect();
    let masses = (0..size).map(|j| half_m[j.min(size - 1 - j)]).collect();
    let springs = (0..=size).map(|j| half_k[j.min(size - j)]).collect();
    MassSpringChain::new(masses, springs)
}

/// Mirror-symmetric chain of odd length. At the center site the blocks on
/// either side are reflections of each other, so every one of their
/// eigenvalues is shared.
pub fn common_spectrum(seed: u64, size: usize) -> Result<MassSpringChain> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "common-spectrum fixtures need an odd size of at least 3, got {size}"
        )));
    }
    palindromic(seed, size)
}

/// Site whose two sides are mirror images in a [`common_spectrum`] chain.
pub fn center_site(size: usize) -> usize {
    size.div_ceil(2)
}

pub fn generate(kind: FixtureKind, seed: u64, size: usize) -> Result<MassSpringChain> {
    if size == 0 {
        return Err(Error::InvalidInput("fixture size must be positive".into()));
    }
    match kind {
        FixtureKind::Uniform => Ok(MassSpringChain::uniform(size)),
        FixtureKind::RandomLoguniform => random_loguniform(seed, size),
        FixtureKind::Palindromic => palindromic(seed, size),
        FixtureKind::CommonSpectrum => common_spectrum(seed, size),
    }
}
