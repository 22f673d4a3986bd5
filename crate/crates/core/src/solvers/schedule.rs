use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepForm {
    /// γₖ = γ₀ / √k
    InvSqrt,
    /// γₖ = γ₀ · k^(−δ)
    InvPow,
    /// γₖ = γ₀, not diminishing.
    Constant,
}

/// Step sizes for the convex combination in parallel coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub form: StepForm,
    pub gamma0: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.6
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            form: StepForm::InvPow,
            gamma0: 1.0,
            delta: 0.6,
        }
    }
}

impl StepSchedule {
    pub fn inv_sqrt(gamma0: f64) -> Self {
        Self {
            form: StepForm::InvSqrt,
            gamma0,
            delta: 0.5,
        }
    }

    pub fn inv_pow(gamma0: f64, delta: f64) -> Self {
        Self {
            form: StepForm::InvPow,
            gamma0,
            delta,
        }
    }

    pub fn constant(gamma0: f64) -> Self {
        Self {
            form: StepForm::Constant,
            gamma0,
            delta: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::config("solver.schedule.gamma0", "must be > 0"));
        }
        if self.form == StepForm::InvPow && !(self.delta > 0.5 && self.delta <= 1.0) {
            return Err(Error::config(
                "solver.schedule.delta",
                format!("{} is outside (0.5, 1]", self.delta),
            ));
        }
        Ok(())
    }

    /// Step size for iteration `k ≥ 1`.
    pub fn gamma(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        let k = k as f64;
        match self.form {
            StepForm::InvSqrt => self.gamma0 / k.sqrt(),
            StepForm::InvPow => self.gamma0 * k.powf(-self.delta),
            StepForm::Constant => self.gamma0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inv_pow_satisfies_step_conditions() {
        for delta in [0.55, 0.6, 0.8, 1.0] {
            let s = StepSchedule::inv_pow(1.0, delta);
            s.validate().unwrap();
            let partial = |n: usize| -> (f64, f64) {
                (1..=n).map(|k| s.gamma(k)).fold((0.0, 0.0), |(a, b), g| (a + g, b + g * g))
            };
            let (s1, q1) = partial(1_000);
            let (s2, q2) = partial(100_000);
            assert!((1..100).all(|k| s.gamma(k) > 0.0 && s.gamma(k + 1) < s.gamma(k)));
            assert!(s.gamma(1_000_000) < 1e-3);
            // Σγ keeps growing (divergent), Σγ² has a small tail (convergent):
            // the tail of Σγ² beyond n is bounded by n^(1-2δ)/(2δ-1).
            assert!(s2 - s1 > 1.0);
            let tail_bound = 1000f64.powf(1.0 - 2.0 * delta) / (2.0 * delta - 1.0);
            assert!(q2 - q1 <= tail_bound);
        }
    }

    #[test]
    fn validation() {
        assert!(StepSchedule::inv_pow(1.0, 0.5).validate().is_err());
        assert!(StepSchedule::inv_pow(1.0, 1.2).validate().is_err());
        assert!(StepSchedule::inv_sqrt(0.0).validate().is_err());
        assert!(StepSchedule::constant(0.5).validate().is_ok());
        assert_eq!(StepSchedule::inv_sqrt(1.0).gamma(4), 0.5);
    }
}
