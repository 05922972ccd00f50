use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Kernel {
    Linear,
    /// `(gamma x.y + coef0)^degree`
    Polynomial { gamma: f64, coef0: f64, degree: u32 },
    /// `tanh(gamma x.y + coef0)`
    Sigmoid { gamma: f64, coef0: f64 },
    /// `exp(-gamma |x - y|^2)`
    Rbf { gamma: f64 },
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            Kernel::Linear => Ok(()),
            Kernel::Polynomial { gamma, coef0, degree } => {
                if !(gamma > 0.0 && gamma.is_finite()) || !coef0.is_finite() {
                    bad(format!("polynomial kernel needs gamma > 0 and finite coef0, got {gamma}, {coef0}"))
                } else if degree == 0 {
                    bad("polynomial kernel degree must be at least 1".into())
                } else {
                    Ok(())
                }
            }
            Kernel::Sigmoid { gamma, coef0 } => {
                if !(gamma > 0.0 && gamma.is_finite()) || !coef0.is_finite() {
                    bad(format!("sigmoid kernel needs gamma > 0 and finite coef0, got {gamma}, {coef0}"))
                } else {
                    Ok(())
                }
            }
            Kernel::Rbf { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    bad(format!("rbf kernel needs gamma > 0, got {gamma}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Unchecked evaluation; `x` and `y` must have equal length.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(x, y),
            Kernel::Polynomial { gamma, coef0, degree } => (gamma * dot(x, y) + coef0).powi(degree as i32),
            Kernel::Sigmoid { gamma, coef0 } => (gamma * dot(x, y) + coef0).tanh(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Polynomial { .. } => "polynomial",
            Kernel::Sigmoid { .. } => "sigmoid",
            Kernel::Rbf { .. } => "rbf",
        }
    }
}

pub fn kernel_eval(kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.validate()?;
    Error::check_dim("kernel arguments", x.len(), y.len())?;
    Ok(kernel.eval(x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Linear,
    Polynomial,
    Sigmoid,
    Rbf,
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "polynomial" | "poly" => Ok(KernelKind::Polynomial),
            "sigmoid" => Ok(KernelKind::Sigmoid),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Kernel choice as written in a config file. `gamma` defaults to
/// `1 / input_dim` once the input width is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub gamma: Option<f64>,
    pub coef0: f64,
    pub degree: u32,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            kind: KernelKind::Linear,
            gamma: None,
            coef0: 0.0,
            degree: 3,
        }
    }
}

impl KernelSpec {
    pub fn resolve(&self, input_dim: usize) -> Result<Kernel> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument("kernel input dimension is zero".into()));
        }
        let gamma = self.gamma.unwrap_or(1.0 / input_dim as f64);
        let k = match self.kind {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Polynomial => Kernel::Polynomial {
                gamma,
                coef0: self.coef0,
                degree: self.degree,
            },
            KernelKind::Sigmoid => Kernel::Sigmoid {
                gamma,
                coef0: self.coef0,
            },
            KernelKind::Rbf => Kernel::Rbf { gamma },
        };
        k.validate()?;
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(kernel_eval(&Kernel::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let poly = Kernel::Polynomial { gamma: 1.0, coef0: 0.0, degree: 2 };
        assert_eq!(kernel_eval(&poly, &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        let poly = Kernel::Polynomial { gamma: 0.5, coef0: 1.0, degree: 3 };
        assert_eq!(poly.eval(&[2.0], &[3.0]), 64.0);
        let sig = Kernel::Sigmoid { gamma: 1.0, coef0: 0.0 };
        assert!((sig.eval(&[1.0], &[0.5]) - 0.5f64.tanh()).abs() < 1e-15);
        let rbf = Kernel::Rbf { gamma: 0.5 };
        assert!((rbf.eval(&[0.0, 0.0], &[1.0, 1.0]) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rbf_diagonal_is_one() {
        let rbf = Kernel::Rbf { gamma: 3.7 };
        for x in [[0.0, 0.0], [1e3, -2.0], [-0.3, 0.7]] {
            assert_eq!(rbf.eval(&x, &x), 1.0);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(kernel_eval(&Kernel::Rbf { gamma: 0.0 }, &[1.0], &[1.0]).is_err());
        assert!(kernel_eval(&Kernel::Rbf { gamma: -1.0 }, &[1.0], &[1.0]).is_err());
        let p = Kernel::Polynomial { gamma: 1.0, coef0: 0.0, degree: 0 };
        assert!(p.validate().is_err());
        assert!(kernel_eval(&Kernel::Linear, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spec_gamma_defaults_to_inverse_dim() {
        let spec = KernelSpec {
            kind: KernelKind::Rbf,
            ..Default::default()
        };
        assert_eq!(spec.resolve(4).unwrap(), Kernel::Rbf { gamma: 0.25 });
        let spec = KernelSpec {
            kind: KernelKind::Rbf,
            gamma: Some(-1.0),
            ..Default::default()
        };
        assert!(spec.resolve(4).is_err());
    }

    #[test]
    fn serde_tagged() {
        let k: Kernel = serde_json::from_str(r#"{"kind":"rbf","gamma":0.5}"#).unwrap();
        assert_eq!(k, Kernel::Rbf { gamma: 0.5 });
        assert_eq!(serde_json::to_string(&Kernel::Linear).unwrap(), r#"{"kind":"linear"}"#);
    }
}
