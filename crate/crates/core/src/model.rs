//! Particle configurations and model parameters shared by all routes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing lattice sites x₁ < x₂ < … < x_N.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct ParticleConfig(Vec<i64>);

impl ParticleConfig {
    pub fn new(sites: Vec<i64>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidInput("configuration needs at least one particle".into()));
        }
        if sites.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!("sites {sites:?} are not strictly increasing")));
        }
        Ok(Self(sites))
    }

    /// Step configuration 1, 2, …, n.
    pub fn step(n: usize) -> Result<Self> {
        Self::new((1..=n as i64).collect())
    }

    pub fn sites(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> i64 {
        self.0[0]
    }

    pub fn last(&self) -> i64 {
        self.0[self.0.len() - 1]
    }
}

impl TryFrom<Vec<i64>> for ParticleConfig {
    type Error = Error;

    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParticleConfig> for Vec<i64> {
    fn from(c: ParticleConfig) -> Self {
        c.0
    }
}

/// Anisotropy Δ, time t and initial configuration Y (N = |Y|).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub delta: f64,
    pub t: f64,
    pub y: ParticleConfig,
}

impl ModelParams {
    pub fn new(delta: f64, t: f64, y: ParticleConfig) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::InvalidInput(format!("anisotropy {delta} is not finite")));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("time {t} must be finite and non-negative")));
        }
        Ok(Self { delta, t, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }
}
