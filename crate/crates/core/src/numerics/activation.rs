use serde::{Deserialize, Serialize};

/// Elementwise activations. Every variant satisfies `σ(0) = 0` and is
/// 1-Lipschitz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and the
    /// activation output `y = σ(x)`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }

    /// Lipschitz constant `L_σ`.
    pub fn lipschitz(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}` (expected relu, tanh or identity)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_a_fixed_point() {
        for act in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            assert_eq!(act.apply(0.0), 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for act in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            for &x in &[-1.3, -0.2, 0.4, 2.0] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x, act.apply(x))).abs() < 1e-8);
            }
        }
    }
}
