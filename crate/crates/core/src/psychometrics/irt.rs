//! Two-parameter logistic IRT fitted by bounded cross-entropy minimisation.
//!
//! The model predicts `P = σ(a·(θ − b))` for a student of ability `θ` on an
//! item with discrimination `a` and difficulty `b`. Fractional scores `s` are
//! used as soft targets, so partial credit never has to be dichotomised:
//!
//! ```text
//! L = −Σ [ s·ln P + (1 − s)·ln(1 − P) ]      over observed cells
//! ```
//!
//! Fitting is joint projected gradient descent over every `θ`, `a` and `b`,
//! with each parameter clamped back into its box after every step.

use serde::{Deserialize, Serialize};

use super::{PsychometricsError, ScoreMatrix};
use crate::parallel::{map_indices, Exec};

pub const THETA_MIN: f64 = -3.0;
pub const THETA_MAX: f64 = 3.0;
pub const A_MIN: f64 = 0.0;
pub const A_MAX: f64 = 2.0;
pub const B_MIN: f64 = -3.0;
pub const B_MAX: f64 = 3.0;

/// Probabilities are clamped to `[PROB_FLOOR, 1 − PROB_FLOOR]` before logs.
pub const PROB_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemEstimate {
    pub id: String,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemParameters {
    pub items: Vec<ItemEstimate>,
}

impl ItemParameters {
    pub fn params(&self) -> Vec<ItemParams> {
        self.items
            .iter()
            .map(|e| ItemParams { a: e.a, b: e.b })
            .collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.items
            .iter()
            .all(|e| (A_MIN..=A_MAX).contains(&e.a) && (B_MIN..=B_MAX).contains(&e.b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbilityEstimate {
    pub id: String,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AbilityEstimates {
    pub students: Vec<AbilityEstimate>,
}

impl AbilityEstimates {
    pub fn thetas(&self) -> Vec<f64> {
        self.students.iter().map(|s| s.theta).collect()
    }

    pub fn within_bounds(&self) -> bool {
        self.students
            .iter()
            .all(|s| (THETA_MIN..=THETA_MAX).contains(&s.theta))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Item characteristic curve: probability of success at ability `theta`.
///
/// Increases with `theta` for `a > 0` and equals 0.5 at `theta == b`.
/// The result is clamped to `[1e-9, 1 − 1e-9]`.
pub fn icc_probability(theta: f64, a: f64, b: f64) -> f64 {
    clamp_prob(sigmoid(a * (theta - b)))
}

/// Binary entropy of a soft target, the per-cell lower bound of the loss.
pub fn binary_entropy(s: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(s) + term(1.0 - s)
}

/// Sum of per-cell binary entropies: the smallest loss any model can reach.
pub fn entropy_floor(matrix: &ScoreMatrix) -> f64 {
    (0..matrix.n_students())
        .map(|j| matrix.row(j).iter().flatten().map(|&s| binary_entropy(s)).sum::<f64>())
        .sum()
}

/// Probability and clamped cross-entropy of one cell, sharing a single
/// exponential: `ln σ(z) = −(max(−z, 0) + ln(1 + e^{−|z|}))`.
fn cell_terms(s: f64, z: f64) -> (f64, f64) {
    let e = (-z.abs()).exp();
    let soft = e.ln_1p();
    let p = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    let (lo, hi) = (PROB_FLOOR.ln(), (-PROB_FLOOR).ln_1p());
    let ln_p = (-((-z).max(0.0) + soft)).clamp(lo, hi);
    let ln_q = (-(z.max(0.0) + soft)).clamp(lo, hi);
    let mut l = 0.0;
    if s > 0.0 {
        l -= s * ln_p;
    }
    if s < 1.0 {
        l -= (1.0 - s) * ln_q;
    }
    (p, l)
}

/// Cross-entropy of the model against the observed fractional scores.
pub fn cross_entropy_loss(
    matrix: &ScoreMatrix,
    items: &ItemParameters,
    abilities: &AbilityEstimates,
) -> Result<f64, PsychometricsError> {
    let params = Params::from_estimates(matrix, items, abilities)?;
    if matrix.observed_count() == 0 {
        return Err(PsychometricsError::EmptyMask);
    }
    Ok(evaluate(matrix, &params, Exec::Sequential).loss)
}

/// Flat parameter vectors in matrix order.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Params {
    pub fn from_estimates(
        matrix: &ScoreMatrix,
        items: &ItemParameters,
        abilities: &AbilityEstimates,
    ) -> Result<Self, PsychometricsError> {
        if items.items.len() != matrix.n_items() {
            return Err(PsychometricsError::Shape {
                expected: matrix.n_items(),
                found: items.items.len(),
            });
        }
        if abilities.students.len() != matrix.n_students() {
            return Err(PsychometricsError::Shape {
                expected: matrix.n_students(),
                found: abilities.students.len(),
            });
        }
        if !items.within_bounds() || !abilities.within_bounds() {
            return Err(PsychometricsError::OutOfBounds);
        }
        Ok(Params {
            a: items.items.iter().map(|e| e.a).collect(),
            b: items.items.iter().map(|e| e.b).collect(),
            theta: abilities.thetas(),
        })
    }

    fn project(&mut self) {
        for a in &mut self.a {
            *a = a.clamp(A_MIN, A_MAX);
        }
        for b in &mut self.b {
            *b = b.clamp(B_MIN, B_MAX);
        }
        for t in &mut self.theta {
            *t = t.clamp(THETA_MIN, THETA_MAX);
        }
    }

    fn stepped(&self, grad: &Gradient, step: f64) -> Params {
        let mv = |x: &[f64], g: &[f64]| x.iter().zip(g).map(|(x, g)| x - step * g).collect();
        let mut next = Params {
            a: mv(&self.a, &grad.a),
            b: mv(&self.b, &grad.b),
            theta: mv(&self.theta, &grad.theta),
        };
        next.project();
        next
    }

    pub fn within_bounds(&self) -> bool {
        self.a.iter().all(|a| (A_MIN..=A_MAX).contains(a))
            && self.b.iter().all(|b| (B_MIN..=B_MAX).contains(b))
            && self.theta.iter().all(|t| (THETA_MIN..=THETA_MAX).contains(t))
    }

    /// Model probability for every cell, row-major (computed for unobserved
    /// cells too).
    pub fn probabilities(&self) -> Vec<f64> {
        self.theta
            .iter()
            .flat_map(|&t| {
                self.a
                    .iter()
                    .zip(&self.b)
                    .map(move |(&a, &b)| icc_probability(t, a, b))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub gradient: Gradient,
}

/// Loss and analytic gradient in one pass.
///
/// With `z = a(θ − b)`, `P = σ(z)` and `r = P − s`:
/// `∂L/∂a = Σ r(θ − b)`, `∂L/∂b = −Σ r·a`, `∂L/∂θ = Σ r·a`.
///
/// Residuals and per-student sums are computed row by row, per-item sums
/// column by column; every sum runs in a fixed order, so the sequential and
/// parallel strategies return identical bits.
pub fn evaluate(matrix: &ScoreMatrix, params: &Params, exec: Exec) -> Evaluation {
    let n_items = matrix.n_items();
    let rows: Vec<(f64, f64, Vec<f64>)> = map_indices(exec, matrix.n_students(), |j| {
        let theta = params.theta[j];
        let mut loss = 0.0;
        let mut g_theta = 0.0;
        let mut residuals = vec![0.0; n_items];
        for (i, cell) in matrix.row(j).iter().enumerate() {
            if let Some(s) = *cell {
                let a = params.a[i];
                let z = a * (theta - params.b[i]);
                let (p, l) = cell_terms(s, z);
                let r = p - s;
                loss += l;
                g_theta += r * a;
                residuals[i] = r;
            }
        }
        (loss, g_theta, residuals)
    });

    let columns: Vec<(f64, f64)> = map_indices(exec, n_items, |i| {
        let (a, b) = (params.a[i], params.b[i]);
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        for (j, (_, _, residuals)) in rows.iter().enumerate() {
            if matrix.get(j, i).is_some() {
                let r = residuals[i];
                g_a += r * (params.theta[j] - b);
                g_b -= r * a;
            }
        }
        (g_a, g_b)
    });

    Evaluation {
        loss: rows.iter().map(|r| r.0).sum(),
        gradient: Gradient {
            a: columns.iter().map(|c| c.0).collect(),
            b: columns.iter().map(|c| c.1).collect(),
            theta: rows.iter().map(|r| r.1).collect(),
        },
    }
}

/// Loss alone, summed in the same order as [`evaluate`].
fn loss_only(matrix: &ScoreMatrix, params: &Params, exec: Exec) -> f64 {
    map_indices(exec, matrix.n_students(), |j| {
        let theta = params.theta[j];
        let mut loss = 0.0;
        for (i, cell) in matrix.row(j).iter().enumerate() {
            if let Some(s) = *cell {
                loss += cell_terms(s, params.a[i] * (theta - params.b[i])).1;
            }
        }
        loss
    })
    .iter()
    .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Initial step size of every iteration.
    pub step: f64,
    /// Stop when the relative loss decrease falls below this.
    pub tolerance: f64,
    /// Halve the step while the loss would increase.
    pub backtracking: bool,
    pub max_halvings: u32,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iters: 50_000,
            step: 0.05,
            tolerance: 1e-9,
            backtracking: true,
            max_halvings: 20,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Relative loss change fell below the tolerance.
    Converged,
    /// No step size within the halving budget decreased the loss.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub entropy_floor: f64,
    pub stop_reason: StopReason,
    /// Whether every accepted step kept the loss nonincreasing.
    pub monotone: bool,
    /// Students whose observed scores are all 0 or all 1.
    pub degenerate_students: Vec<String>,
    /// Items whose observed scores are all 0 or all 1.
    pub degenerate_items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub items: ItemParameters,
    pub abilities: AbilityEstimates,
    pub report: FitReport,
}

/// State handed to a fit observer after initialisation and after every
/// accepted step.
pub struct FitSnapshot<'a> {
    pub iteration: usize,
    pub loss: f64,
    pub params: &'a Params,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Starting point: `a = 1`, `b = 0`, `θ` from the logit of each student's
/// mean observed score.
pub fn initial_params(matrix: &ScoreMatrix) -> Params {
    Params {
        a: vec![1.0; matrix.n_items()],
        b: vec![0.0; matrix.n_items()],
        theta: matrix
            .student_means()
            .into_iter()
            .map(|m| logit(m.unwrap_or(0.5).clamp(0.02, 0.98)).clamp(THETA_MIN, THETA_MAX))
            .collect(),
    }
}

pub fn fit_2pl(matrix: &ScoreMatrix, config: &FitConfig) -> Result<FitResult, PsychometricsError> {
    fit_2pl_observed(matrix, config, |_| {})
}

pub fn fit_2pl_observed(
    matrix: &ScoreMatrix,
    config: &FitConfig,
    mut observer: impl FnMut(&FitSnapshot<'_>),
) -> Result<FitResult, PsychometricsError> {
    matrix.check_fittable()?;
    let mut params = initial_params(matrix);
    let mut current = evaluate(matrix, &params, config.exec);
    if !current.loss.is_finite() {
        return Err(PsychometricsError::NonFiniteLoss { iteration: 0 });
    }
    let initial_loss = current.loss;
    observer(&FitSnapshot {
        iteration: 0,
        loss: current.loss,
        params: &params,
    });

    let mut monotone = true;
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let mut step = config.step;
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let candidate = params.stepped(&current.gradient, step);
            let loss = loss_only(matrix, &candidate, config.exec);
            if !loss.is_finite() {
                return Err(PsychometricsError::NonFiniteLoss {
                    iteration: iterations + 1,
                });
            }
            if !config.backtracking || loss <= current.loss {
                let eval = evaluate(matrix, &candidate, config.exec);
                accepted = Some((candidate, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, eval)) = accepted else {
            stop_reason = StopReason::Stalled;
            break;
        };
        iterations += 1;
        if eval.loss > current.loss {
            monotone = false;
        }
        let change = (current.loss - eval.loss).abs() / current.loss.abs().max(f64::MIN_POSITIVE);
        params = candidate;
        current = eval;
        observer(&FitSnapshot {
            iteration: iterations,
            loss: current.loss,
            params: &params,
        });
        if change < config.tolerance {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let degenerate = |values: Vec<f64>| {
        !values.is_empty() && (values.iter().all(|&s| s == 0.0) || values.iter().all(|&s| s == 1.0))
    };
    let degenerate_students = (0..matrix.n_students())
        .filter(|&j| degenerate(matrix.row(j).iter().flatten().copied().collect()))
        .map(|j| matrix.students()[j].clone())
        .collect();
    let degenerate_items = (0..matrix.n_items())
        .filter(|&i| degenerate((0..matrix.n_students()).filter_map(|j| matrix.get(j, i)).collect()))
        .map(|i| matrix.items()[i].clone())
        .collect();

    let report = FitReport {
        iterations,
        initial_loss,
        final_loss: current.loss,
        entropy_floor: entropy_floor(matrix),
        stop_reason,
        monotone,
        degenerate_students,
        degenerate_items,
    };
    Ok(FitResult {
        items: ItemParameters {
            items: matrix
                .items()
                .iter()
                .zip(params.a.iter().zip(&params.b))
                .map(|(id, (&a, &b))| ItemEstimate { id: id.clone(), a, b })
                .collect(),
        },
        abilities: AbilityEstimates {
            students: matrix
                .students()
                .iter()
                .zip(&params.theta)
                .map(|(id, &theta)| AbilityEstimate {
                    id: id.clone(),
                    theta,
                })
                .collect(),
        },
        report,
    })
}

/// Grid of abilities used for plotted ICC curves: −3 to 3 in steps of 0.05.
pub fn icc_theta_grid() -> Vec<f64> {
    (0..=120).map(|k| THETA_MIN + 0.05 * k as f64).collect()
}

/// ICC curves on [`icc_theta_grid`] as CSV: a `theta` column, then one
/// column per item.
pub fn write_icc_csv<W: std::io::Write>(
    items: &ItemParameters,
    writer: W,
) -> Result<(), PsychometricsError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["theta".to_string()];
    header.extend(items.items.iter().map(|e| e.id.clone()));
    w.write_record(&header)?;
    for theta in icc_theta_grid() {
        let mut rec = vec![format!("{theta:.2}")];
        rec.extend(
            items
                .items
                .iter()
                .map(|e| format!("{:.6}", icc_probability(theta, e.a, e.b))),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| PsychometricsError::Csv(e.to_string()))?;
    Ok(())
}
