use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Firing delay of a timed transition, in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", content = "params", rename_all = "snake_case")]
pub enum DelayDistribution {
    Constant {
        value: f64,
    },
    /// Normal distribution conditioned on the outcome being non-negative.
    #[serde(alias = "normal")]
    NormalTruncated {
        mean: f64,
        std: f64,
    },
    Exponential {
        rate: f64,
    },
    /// Uniform resampling from a list of observed delays.
    Empirical {
        samples: Vec<f64>,
    },
    Never,
}

/// Outcome of sampling a delay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delay {
    After(f64),
    /// The firing never completes.
    Never,
}

impl Delay {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Delay::After(d) => Some(d),
            Delay::Never => None,
        }
    }

    /// Ordering key where `Never` sorts after every finite delay.
    pub fn key(self) -> f64 {
        self.seconds().unwrap_or(f64::INFINITY)
    }

    pub fn max(self, other: Delay) -> Delay {
        match (self, other) {
            (Delay::After(a), Delay::After(b)) => Delay::After(a.max(b)),
            _ => Delay::Never,
        }
    }
}

impl Default for DelayDistribution {
    fn default() -> Self {
        DelayDistribution::Constant { value: 0.0 }
    }
}

impl DelayDistribution {
    pub fn constant(value: f64) -> Self {
        DelayDistribution::Constant { value }
    }

    pub fn normal(mean: f64, std: f64) -> Self {
        DelayDistribution::NormalTruncated { mean, std }
    }

    pub fn exponential(rate: f64) -> Self {
        DelayDistribution::Exponential { rate }
    }

    pub fn empirical(samples: Vec<f64>) -> Self {
        DelayDistribution::Empirical { samples }
    }

    /// Checks the parameter domain. Returns a human readable reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            DelayDistribution::Constant { value } if !finite_nonneg(*value) => {
                Err(format!("constant delay must be finite and >= 0, got {value}"))
            }
            DelayDistribution::NormalTruncated { mean, std } if !mean.is_finite() || !finite_nonneg(*std) => {
                Err(format!("invalid truncated normal (mean {mean}, std {std})"))
            }
            DelayDistribution::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(format!("exponential rate must be > 0, got {rate}"))
            }
            DelayDistribution::Empirical { samples } if samples.is_empty() => {
                Err("empirical distribution needs at least one sample".into())
            }
            DelayDistribution::Empirical { samples } if !samples.iter().all(|s| finite_nonneg(*s)) => {
                Err("empirical samples must be finite and >= 0".into())
            }
            DelayDistribution::NormalTruncated { mean, std } if *std == 0.0 && *mean < 0.0 => {
                Err(format!("degenerate normal with negative mean {mean}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_immediate(&self) -> bool {
        matches!(self, DelayDistribution::Constant { value } if *value == 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Delay {
        match self {
            DelayDistribution::Constant { value } => Delay::After(*value),
            DelayDistribution::NormalTruncated { mean, std } => Delay::After(truncated_normal(*mean, *std, rng)),
            DelayDistribution::Exponential { rate } => {
                let exp = Exp::new(*rate).expect("validated rate");
                Delay::After(exp.sample(rng))
            }
            DelayDistribution::Empirical { samples } => {
                Delay::After(samples[rng.random_range(0..samples.len())])
            }
            DelayDistribution::Never => Delay::Never,
        }
    }
}

/// Samples N(mean, std²) conditioned on X ≥ 0.
///
/// Plain rejection while the acceptance probability is reasonable; for
/// bounds deep in the tail, Robert's exponential-proposal sampler.
fn truncated_normal<R: Rng + ?Sized>(mean: f64, std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        return mean.max(0.0);
    }
    // lower bound of the standardized variable
    let a = -mean / std;
    let z = if a < 0.5 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a {
                break z;
            }
        }
    } else {
        let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = a + e / lambda;
            let u: f64 = rng.random();
            if u <= (-(z - lambda) * (z - lambda) / 2.0).exp() {
                break z;
            }
        }
    };
    (mean + std * z).max(0.0)
}
