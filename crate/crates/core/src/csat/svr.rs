//! ν-support vector regression.
//!
//! The dual is solved in the form
//!
//! ```text
//! max  -1/2 (α - α*)ᵀ K (α - α*) + (α - α*)ᵀ y
//! s.t. Σ (α_i - α*_i) = 0,  0 <= α_i, α*_i <= C/ℓ,  Σ (α_i + α*_i) = Cν
//! ```
//!
//! by sequential minimal optimisation over the 2ℓ variables `[α; α*]`, with
//! second-order working-set selection inside each half so that both group
//! sums stay fixed. The tube width ε and the bias come out of the final
//! gradients.

use log::debug;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use crate::corpus::{CSAT_MAX, CSAT_MIN};
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Matrix, Tensor};

pub const CHECKPOINT_KIND: &str = "svr";

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvrParams {
    pub nu: f64,
    pub c: f64,
    /// Stop once the largest KKT violation within either group is below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            nu: 0.5,
            c: 1.0,
            tolerance: 1e-8,
            max_iterations: 10_000_000,
        }
    }
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::InvalidArgument(format!("nu must lie in (0, 1], got {}", self.nu)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
    /// Value of the maximised dual objective.
    pub objective: f64,
    pub iterations: usize,
    /// Largest remaining KKT violation.
    pub gap: f64,
}

impl DualSolution {
    /// `α - α*`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.alpha_star).map(|(a, s)| a - s).collect()
    }
}

/// Solves the dual for a precomputed row-major `ℓ x ℓ` Gram matrix.
pub fn solve_nu_svr(gram: &[f64], y: &[f64], params: &SvrParams) -> Result<DualSolution> {
    params.validate()?;
    let l = y.len();
    if l < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 training points, got {l}")));
    }
    Error::check_dim("gram matrix size", l * l, gram.len())?;
    if y.iter().chain(gram).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite target or kernel value".into()));
    }

    let n = 2 * l;
    let upper = params.c / l as f64;
    let k = |i: usize, j: usize| gram[i * l + j];
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let idx = |t: usize| if t < l { t } else { t - l };

    let mut a = vec![0.0; n];
    for half in [0, l] {
        let mut remaining = params.c * params.nu / 2.0;
        for t in half..half + l {
            a[t] = remaining.min(upper).max(0.0);
            remaining -= a[t];
        }
    }
    // r = Kβ - y; the gradient of variable t is sign(t) * r[idx(t)].
    // β starts at zero because both halves are filled identically.
    let mut r: Vec<f64> = y.iter().map(|v| -v).collect();
    let grad = |r: &[f64], t: usize| sign(t) * r[idx(t)];

    let mut iterations = 0;
    let gap = loop {
        let mut gmaxp = f64::NEG_INFINITY;
        let mut gmaxn = f64::NEG_INFINITY;
        let (mut ip, mut in_) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let g = grad(&r, t);
            if t < l {
                if a[t] < upper && -g >= gmaxp {
                    gmaxp = -g;
                    ip = t;
                }
            } else if a[t] > 0.0 && g >= gmaxn {
                gmaxn = g;
                in_ = t;
            }
        }

        let mut gmaxp2 = f64::NEG_INFINITY;
        let mut gmaxn2 = f64::NEG_INFINITY;
        let mut best = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            let g = grad(&r, t);
            let (anchor, diff) = if t < l {
                if a[t] <= 0.0 {
                    continue;
                }
                gmaxp2 = gmaxp2.max(g);
                (ip, gmaxp + g)
            } else {
                if a[t] >= upper {
                    continue;
                }
                gmaxn2 = gmaxn2.max(-g);
                (in_, gmaxn - g)
            };
            if diff > 0.0 {
                let (ia, it) = (idx(anchor), idx(t));
                let quad = k(ia, ia) + k(it, it) - 2.0 * k(ia, it);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= best_obj {
                    best_obj = obj;
                    best = t;
                }
            }
        }

        let gap = (gmaxp + gmaxp2).max(gmaxn + gmaxn2);
        if gap < params.tolerance || best == usize::MAX {
            break gap.max(0.0);
        }
        if iterations >= params.max_iterations {
            let beta: Vec<f64> = (0..l).map(|i| a[i] - a[l + i]).collect();
            return Err(Error::NonConvergence {
                iterations,
                gap,
                objective: objective(&beta, &r, y),
            });
        }
        iterations += 1;

        let (i, j) = (if best < l { ip } else { in_ }, best);
        let (xi, xj) = (idx(i), idx(j));
        let mut quad = k(xi, xi) + k(xj, xj) - 2.0 * k(xi, xj);
        if quad <= 0.0 {
            quad = TAU;
        }
        let (gi, gj) = (grad(&r, i), grad(&r, j));
        let (old_i, old_j) = (a[i], a[j]);
        let delta = (gi - gj) / quad;
        let sum = old_i + old_j;
        a[i] -= delta;
        a[j] += delta;
        if sum > upper {
            if a[i] > upper {
                a[i] = upper;
                a[j] = sum - upper;
            }
        } else if a[j] < 0.0 {
            a[j] = 0.0;
            a[i] = sum;
        }
        if sum > upper {
            if a[j] > upper {
                a[j] = upper;
                a[i] = sum - upper;
            }
        } else if a[i] < 0.0 {
            a[i] = 0.0;
            a[j] = sum;
        }

        let s = sign(i);
        let (di, dj) = (s * (a[i] - old_i), s * (a[j] - old_j));
        for (m, rm) in r.iter_mut().enumerate() {
            *rm += gram[m * l + xi] * di + gram[m * l + xj] * dj;
        }
    };

    // Average gradient over free variables of each half; fall back to the
    // midpoint of the feasible interval when none is free.
    let side = |range: std::ops::Range<usize>| {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free, mut sum) = (0usize, 0.0);
        for t in range {
            let g = grad(&r, t);
            if a[t] >= upper {
                lb = lb.max(g);
            } else if a[t] <= 0.0 {
                ub = ub.min(g);
            } else {
                free += 1;
                sum += g;
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            (ub + lb) / 2.0
        }
    };
    let r1 = side(0..l);
    let r2 = side(l..n);

    let alpha = a[..l].to_vec();
    let alpha_star = a[l..].to_vec();
    let beta: Vec<f64> = alpha.iter().zip(&alpha_star).map(|(p, m)| p - m).collect();
    debug!("nu-svr converged after {iterations} iterations, gap {gap:.3e}");
    Ok(DualSolution {
        objective: objective(&beta, &r, y),
        alpha,
        alpha_star,
        bias: -(r1 - r2) / 2.0,
        epsilon: -(r1 + r2) / 2.0,
        iterations,
        gap,
    })
}

/// `-1/2 βᵀKβ + βᵀy` written in terms of `r = Kβ - y`.
fn objective(beta: &[f64], r: &[f64], y: &[f64]) -> f64 {
    beta.iter()
        .zip(r)
        .zip(y)
        .map(|((b, rv), yv)| 0.5 * b * (yv - rv))
        .sum()
}

pub fn gram_matrix(kernel: &Kernel, x: &Matrix) -> Vec<f64> {
    let l = x.rows();
    let mut gram = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..=i {
            let v = kernel.eval(x.row(i), x.row(j));
            gram[i * l + j] = v;
            gram[j * l + i] = v;
        }
    }
    gram
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub params: SvrParams,
    pub input_dim: usize,
    /// Training rows with a non-zero coefficient.
    pub support_vectors: Matrix,
    /// `α_i - α*_i` for each support vector.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SvrMeta {
    kernel: Kernel,
    params: SvrParams,
    input_dim: usize,
}

/// Trains the model and also returns the full dual solution.
pub fn fit_nu_svr(x: &Matrix, y: &[f64], kernel: Kernel, params: &SvrParams) -> Result<(SvrModel, DualSolution)> {
    kernel.validate()?;
    Error::check_dim("svr targets", x.rows(), y.len())?;
    let solution = solve_nu_svr(&gram_matrix(&kernel, x), y, params)?;
    let beta = solution.coefficients();
    let keep: Vec<usize> = (0..beta.len()).filter(|&i| beta[i] != 0.0).collect();
    let rows: Vec<&[f64]> = keep.iter().map(|&i| x.row(i)).collect();
    let support_vectors = if rows.is_empty() {
        Matrix::zeros(0, x.cols())
    } else {
        Matrix::from_rows(&rows)?
    };
    let model = SvrModel {
        kernel,
        params: *params,
        input_dim: x.cols(),
        support_vectors,
        coefficients: keep.iter().map(|&i| beta[i]).collect(),
        bias: solution.bias,
        epsilon: solution.epsilon,
    };
    Ok((model, solution))
}

pub fn train_nu_svr(x: &Matrix, y: &[f64], kernel: Kernel, params: &SvrParams) -> Result<SvrModel> {
    fit_nu_svr(x, y, kernel, params).map(|(m, _)| m)
}

impl SvrModel {
    pub fn support_vector_count(&self) -> usize {
        self.coefficients.len()
    }

    /// Unclamped regression value.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        Error::check_dim("svr input", self.input_dim, x.len())?;
        Ok(self
            .support_vectors
            .iter_rows()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias)
    }

    /// CSAT estimate clamped to the rating scale.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.decision_value(x)?.clamp(CSAT_MIN, CSAT_MAX))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = SvrMeta {
            kernel: self.kernel,
            params: self.params,
            input_dim: self.input_dim,
        };
        let n = self.coefficients.len();
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(meta).expect("svr metadata serializes"),
            tensors: vec![
                Tensor {
                    name: "support_vectors".into(),
                    shape: vec![n, self.input_dim],
                    data: self.support_vectors.as_slice().to_vec(),
                },
                Tensor {
                    name: "coefficients".into(),
                    shape: vec![n],
                    data: self.coefficients.clone(),
                },
                Tensor {
                    name: "bias_epsilon".into(),
                    shape: vec![2],
                    data: vec![self.bias, self.epsilon],
                },
            ],
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::InvalidArgument(format!("checkpoint kind `{}` is not an svr model", ck.kind)));
        }
        let meta: SvrMeta = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::InvalidArgument(format!("svr metadata: {e}")))?;
        let get = |name: &str| {
            ck.tensor(name)
                .ok_or_else(|| Error::InvalidArgument(format!("missing tensor `{name}`")))
        };
        let sv = get("support_vectors")?;
        let coef = get("coefficients")?;
        let be = get("bias_epsilon")?;
        let n = coef.len();
        Error::check_dim("svr support vector data", n * meta.input_dim, sv.len())?;
        Error::check_dim("svr bias/epsilon", 2, be.len())?;
        Ok(SvrModel {
            kernel: meta.kernel,
            params: meta.params,
            input_dim: meta.input_dim,
            support_vectors: Matrix::from_vec(n, meta.input_dim, sv.data.clone())?,
            coefficients: coef.data.clone(),
            bias: be.data[0],
            epsilon: be.data[1],
        })
    }
}
