//! Binary classifiers over sparse TF-IDF rows: Multinomial Naive Bayes
//! and L2-regularized logistic regression, plus cross-validation and grid
//! search for tuning.
//!
//! Labels map to fixed class indices (negative = 0, positive = 1) and to
//! ±1 targets inside the logistic loss. Exact probability ties predict
//! positive, so outputs are bit-reproducible.

mod cv;
mod lbfgs;

pub use cv::{grid_search, repeated_stratified_kfold, CvPlan, GridEntry, GridSearchResult};
pub use lbfgs::MinimizeResult;

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::vectorize::SparseMatrix;

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Default grid of C values searched when tuning.
pub const DEFAULT_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

// ---------------------------------------------------------------------------
// Multinomial Naive Bayes

/// Multinomial Naive Bayes with additive smoothing. TF-IDF rows are valid
/// input: fractional values act as fractional counts.
#[derive(Debug, Clone, PartialEq)]
pub struct MnbModel {
    log_priors: [f64; 2],
    /// Per class, per feature log θ(t|c); each class row sums to 1 in
    /// probability space.
    feature_log_prob: [Vec<f64>; 2],
    alpha: f64,
}

impl MnbModel {
    pub fn n_features(&self) -> usize {
        self.feature_log_prob[0].len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn log_prior(&self, label: Label) -> f64 {
        self.log_priors[label.index()]
    }

    pub fn feature_log_prob(&self, label: Label) -> &[f64] {
        &self.feature_log_prob[label.index()]
    }

    /// Model TSV with a `#mnb v1` header; floats carry 17 significant
    /// digits so write→read→write is byte-identical.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#mnb v1")?;
        writeln!(out, "alpha\t{:.16e}", self.alpha)?;
        writeln!(out, "n_features\t{}", self.n_features())?;
        writeln!(
            out,
            "log_prior\t{:.16e}\t{:.16e}",
            self.log_priors[0], self.log_priors[1]
        )?;
        for i in 0..self.n_features() {
            writeln!(
                out,
                "f\t{i}\t{:.16e}\t{:.16e}",
                self.feature_log_prob[0][i], self.feature_log_prob[1][i]
            )?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<MnbModel> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::ModelFormat("empty mnb model".into()))?;
        if header != "#mnb v1" {
            return Err(Error::ModelFormat(format!("bad mnb header {header:?}")));
        }
        let mut alpha = None;
        let mut n_features = None;
        let mut log_priors = None;
        let mut features: Vec<(usize, f64, f64)> = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let bad = || Error::ModelFormat(format!("bad mnb line {line:?}"));
            match parts.as_slice() {
                ["alpha", v] => alpha = Some(v.parse::<f64>().map_err(|_| bad())?),
                ["n_features", v] => n_features = Some(v.parse::<usize>().map_err(|_| bad())?),
                ["log_prior", a, b] => {
                    log_priors = Some([
                        a.parse::<f64>().map_err(|_| bad())?,
                        b.parse::<f64>().map_err(|_| bad())?,
                    ])
                }
                ["f", i, a, b] => features.push((
                    i.parse::<usize>().map_err(|_| bad())?,
                    a.parse::<f64>().map_err(|_| bad())?,
                    b.parse::<f64>().map_err(|_| bad())?,
                )),
                _ => return Err(bad()),
            }
        }
        let alpha = alpha.ok_or_else(|| Error::ModelFormat("mnb model missing alpha".into()))?;
        let n = n_features
            .ok_or_else(|| Error::ModelFormat("mnb model missing n_features".into()))?;
        let log_priors =
            log_priors.ok_or_else(|| Error::ModelFormat("mnb model missing log_prior".into()))?;
        if features.len() != n {
            return Err(Error::ModelFormat(format!(
                "mnb model: expected {n} feature rows, found {}",
                features.len()
            )));
        }
        let mut neg = vec![0.0; n];
        let mut pos = vec![0.0; n];
        for (i, a, b) in features {
            if i >= n {
                return Err(Error::ModelFormat(format!("mnb feature index {i} out of range")));
            }
            neg[i] = a;
            pos[i] = b;
        }
        Ok(MnbModel {
            log_priors,
            feature_log_prob: [neg, pos],
            alpha,
        })
    }
}

/// Fits MNB: `prior_c = count(c)/N`,
/// `θ(t|c) = (Σ_{i∈c} x_it + α) / (Σ_{i∈c} Σ_t x_it + α·V)`.
pub fn mnb_fit(x: &SparseMatrix, y: &[Label], alpha: f64) -> Result<MnbModel> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "smoothing alpha must be positive, got {alpha}"
        )));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let v = x.n_cols();
    let mut feature_sums = [vec![0.0; v], vec![0.0; v]];
    let mut totals = [0.0; 2];
    for (i, label) in y.iter().enumerate() {
        let class = label.index();
        let (cols, vals) = x.row(i);
        for (&c, &val) in cols.iter().zip(vals) {
            feature_sums[class][c as usize] += val;
            totals[class] += val;
        }
    }
    let n = y.len() as f64;
    let log_priors = [
        (counts[0] as f64 / n).ln(),
        (counts[1] as f64 / n).ln(),
    ];
    let feature_log_prob = [0, 1].map(|class| {
        let denominator = (totals[class] + alpha * v as f64).ln();
        feature_sums[class]
            .iter()
            .map(|&s| (s + alpha).ln() - denominator)
            .collect()
    });
    Ok(MnbModel {
        log_priors,
        feature_log_prob,
        alpha,
    })
}

/// Predicts labels and class posteriors: `score(c|x) = log prior_c +
/// Σ_t x_t log θ(t|c)`, posterior = softmax over the two scores. An exact
/// score tie predicts positive.
pub fn mnb_predict(model: &MnbModel, x: &SparseMatrix) -> Result<(Vec<Label>, Vec<[f64; 2]>)> {
    if x.n_cols() != model.n_features() {
        return Err(Error::ColumnMismatch {
            expected: model.n_features(),
            found: x.n_cols(),
        });
    }
    let results: Vec<(Label, [f64; 2])> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = x.row(i);
            let mut scores = model.log_priors;
            for (&c, &val) in cols.iter().zip(vals) {
                scores[0] += val * model.feature_log_prob[0][c as usize];
                scores[1] += val * model.feature_log_prob[1][c as usize];
            }
            let label = if scores[1] >= scores[0] {
                Label::Positive
            } else {
                Label::Negative
            };
            (label, softmax2(scores))
        })
        .collect();
    Ok(results.into_iter().unzip())
}

fn softmax2(scores: [f64; 2]) -> [f64; 2] {
    let m = scores[0].max(scores[1]);
    let e = [(scores[0] - m).exp(), (scores[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

fn class_counts(y: &[Label]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for label in y {
        counts[label.index()] += 1;
    }
    counts
}

// ---------------------------------------------------------------------------
// Logistic regression

/// Convergence diagnostics of one [`lr_fit`] run.
#[derive(Debug, Clone)]
pub struct Convergence {
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// False when the iteration limit was hit before ‖∇J‖∞ ≤ tol.
    pub converged: bool,
    /// Objective at the start point and after each accepted step.
    pub objective_history: Vec<f64>,
}

/// L2-regularized logistic regression: weights, unregularized bias, and
/// the inverse regularization strength C that multiplies the data term.
#[derive(Debug, Clone)]
pub struct LrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub convergence: Convergence,
}

impl LrModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "#lr v1")?;
        writeln!(out, "c\t{:.16e}", self.c)?;
        writeln!(out, "n_features\t{}", self.weights.len())?;
        writeln!(out, "bias\t{:.16e}", self.bias)?;
        writeln!(out, "iterations\t{}", self.convergence.iterations)?;
        writeln!(out, "final_grad_norm\t{:.16e}", self.convergence.final_grad_norm)?;
        writeln!(out, "converged\t{}", u8::from(self.convergence.converged))?;
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(out, "w\t{i}\t{w:.16e}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: Read>(input: R) -> Result<LrModel> {
        let mut lines = BufReader::new(input).lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::ModelFormat("empty lr model".into()))?;
        if header != "#lr v1" {
            return Err(Error::ModelFormat(format!("bad lr header {header:?}")));
        }
        let mut c = None;
        let mut n_features = None;
        let mut bias = None;
        let mut iterations = None;
        let mut final_grad_norm = None;
        let mut converged = None;
        let mut weights: Vec<(usize, f64)> = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let bad = || Error::ModelFormat(format!("bad lr line {line:?}"));
            match parts.as_slice() {
                ["c", v] => c = Some(v.parse::<f64>().map_err(|_| bad())?),
                ["n_features", v] => n_features = Some(v.parse::<usize>().map_err(|_| bad())?),
                ["bias", v] => bias = Some(v.parse::<f64>().map_err(|_| bad())?),
                ["iterations", v] => iterations = Some(v.parse::<usize>().map_err(|_| bad())?),
                ["final_grad_norm", v] => {
                    final_grad_norm = Some(v.parse::<f64>().map_err(|_| bad())?)
                }
                ["converged", v] => converged = Some(v == &"1"),
                ["w", i, v] => weights.push((
                    i.parse::<usize>().map_err(|_| bad())?,
                    v.parse::<f64>().map_err(|_| bad())?,
                )),
                _ => return Err(bad()),
            }
        }
        let n = n_features
            .ok_or_else(|| Error::ModelFormat("lr model missing n_features".into()))?;
        if weights.len() != n {
            return Err(Error::ModelFormat(format!(
                "lr model: expected {n} weights, found {}",
                weights.len()
            )));
        }
        let mut w = vec![0.0; n];
        for (i, v) in weights {
            if i >= n {
                return Err(Error::ModelFormat(format!("lr weight index {i} out of range")));
            }
            w[i] = v;
        }
        Ok(LrModel {
            weights: w,
            bias: bias.ok_or_else(|| Error::ModelFormat("lr model missing bias".into()))?,
            c: c.ok_or_else(|| Error::ModelFormat("lr model missing c".into()))?,
            convergence: Convergence {
                iterations: iterations
                    .ok_or_else(|| Error::ModelFormat("lr model missing iterations".into()))?,
                final_grad_norm: final_grad_norm
                    .ok_or_else(|| Error::ModelFormat("lr model missing final_grad_norm".into()))?,
                converged: converged
                    .ok_or_else(|| Error::ModelFormat("lr model missing converged".into()))?,
                objective_history: Vec::new(),
            },
        })
    }
}

/// Objective `J = ½‖w‖² + C Σᵢ ln(1 + exp(−yᵢ(w·xᵢ + b)))` and its exact
/// gradient, packed as `V` weight components followed by the bias
/// component. `y` must hold ±1 targets with one entry per matrix row.
///
/// Row scores are computed in parallel; the loss and gradient are then
/// accumulated in row order, so results do not depend on thread count.
pub fn lr_objective_gradient(
    weights: &[f64],
    bias: f64,
    x: &SparseMatrix,
    y: &[f64],
    c: f64,
) -> (f64, Vec<f64>) {
    assert_eq!(x.n_rows(), y.len(), "one ±1 target per row");
    assert_eq!(x.n_cols(), weights.len(), "one weight per column");
    let scores: Vec<f64> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = x.row(i);
            let dot: f64 = cols
                .iter()
                .zip(vals)
                .map(|(&col, &val)| weights[col as usize] * val)
                .sum();
            dot + bias
        })
        .collect();

    let mut objective = 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
    let mut grad = Vec::with_capacity(weights.len() + 1);
    grad.extend_from_slice(weights);
    grad.push(0.0);
    let bias_slot = weights.len();
    for (i, (&score, &target)) in scores.iter().zip(y).enumerate() {
        let z = -target * score;
        objective += c * log1p_exp(z);
        let coefficient = c * -target * sigmoid(z);
        let (cols, vals) = x.row(i);
        for (&col, &val) in cols.iter().zip(vals) {
            grad[col as usize] += coefficient * val;
        }
        grad[bias_slot] += coefficient;
    }
    (objective, grad)
}

/// Numerically stable ln(1 + eᶻ).
fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Numerically stable σ(z) = 1/(1 + e⁻ᶻ).
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fits logistic regression by deterministic L-BFGS (history 10,
/// strong-Wolfe line search) from the zero vector. Non-convergence within
/// `max_iter` is reported through [`Convergence::converged`], not an
/// error, since the objective is convex.
pub fn lr_fit(x: &SparseMatrix, y: &[Label], c: f64, tol: f64, max_iter: usize) -> Result<LrModel> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive, got {c}")));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "matrix has {} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    let counts = class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let targets: Vec<f64> = y.iter().map(|l| l.signum()).collect();
    let v = x.n_cols();
    let objective = |params: &[f64]| {
        let (weights, bias) = params.split_at(v);
        lr_objective_gradient(weights, bias[0], x, &targets, c)
    };
    let result = lbfgs::minimize(objective, vec![0.0; v + 1], 10, tol, max_iter);
    let mut params = result.x;
    let bias = params.pop().expect("bias slot");
    Ok(LrModel {
        weights: params,
        bias,
        c,
        convergence: Convergence {
            iterations: result.iterations,
            final_grad_norm: result.final_grad_norm,
            converged: result.converged,
            objective_history: result.objective_history,
        },
    })
}

/// Predicts labels and positive-class probabilities `σ(w·x + b)`;
/// p = 0.5 exactly predicts positive.
pub fn lr_predict(model: &LrModel, x: &SparseMatrix) -> Result<(Vec<Label>, Vec<f64>)> {
    if x.n_cols() != model.n_features() {
        return Err(Error::ColumnMismatch {
            expected: model.n_features(),
            found: x.n_cols(),
        });
    }
    let probs: Vec<f64> = (0..x.n_rows())
        .into_par_iter()
        .map(|i| {
            let (cols, vals) = x.row(i);
            let dot: f64 = cols
                .iter()
                .zip(vals)
                .map(|(&col, &val)| model.weights[col as usize] * val)
                .sum();
            sigmoid(dot + model.bias)
        })
        .collect();
    let labels = probs
        .iter()
        .map(|&p| {
            if p >= 0.5 {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    Ok((labels, probs))
}
