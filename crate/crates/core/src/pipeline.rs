//! Hypothesis evaluation on data: lower, execute, split, fit, sparsify and score.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::BasisLibrary;
use crate::forms::{extract_constraints, Constraint, INet};
use crate::interpret::{execute_constraint, lower, region_rows, split_rows, time_axis, ConstraintSamples, Dataset, InterpretError, Interpretation};
use crate::phenomenology::{assemble_feature_matrix, fit_homogeneous, sparsify, with_test, FitConfig, FitError, FitRecord, FitResult};
use crate::scalar::Scalar;
use crate::search::Evaluator;
use crate::symbolic::{canonicalize, emit, emit_expanded, SymbolicError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Interpret(#[from] InterpretError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
    #[error("unknown region axis `{0}`")]
    RegionAxis(String),
    #[error("hypothesis poses no constraint")]
    NoConstraint,
}

/// Piecewise split of one axis at interior `edges` (physical coordinates); each piece
/// is fitted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub axis: String,
    pub edges: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub basis: BasisLibrary,
    pub interpretation: Interpretation,
    /// Leading fraction of the time axis used for training.
    pub split: f64,
    pub fit: FitConfig,
    pub regions: Option<RegionSpec>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            basis: BasisLibrary::standard(),
            interpretation: Interpretation::differential(),
            split: 0.7,
            fit: FitConfig::default(),
            regions: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionFit<T> {
    pub bounds: Option<(f64, f64)>,
    pub fit: FitResult<T>,
    pub record: FitRecord,
    pub equation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualRow {
    pub center: Vec<f64>,
    pub value: f64,
    pub train: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintEvaluation<T> {
    pub key: String,
    pub at: String,
    /// Unexpanded text with unknown functions.
    pub text: String,
    /// Expanded text with symbolic coefficients.
    pub expanded: String,
    pub regions: Vec<RegionFit<T>>,
    /// Rows-weighted mean of the regions' normalized test losses.
    pub loss: f64,
    pub class_key: String,
    pub residuals: Vec<ResidualRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation<T> {
    pub constraints: Vec<ConstraintEvaluation<T>>,
    /// Mean constraint loss.
    pub loss: f64,
    pub class_key: String,
    pub plan: Vec<String>,
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let set: std::collections::BTreeSet<usize> = b.iter().copied().collect();
    a.iter().copied().filter(|r| set.contains(r)).collect()
}

fn region_bounds<T: Scalar>(samples: &ConstraintSamples<T>, cfg: &EvalConfig) -> Result<Vec<(Option<(f64, f64)>, usize)>, PipelineError> {
    let spec = match &cfg.regions {
        None => return Ok(vec![(None, 0)]),
        Some(s) => s,
    };
    let col = &samples.columns[0];
    let axis = col.axes.iter().position(|a| a.name == spec.axis).ok_or_else(|| PipelineError::RegionAxis(spec.axis.clone()))?;
    let ax = &col.axes[axis];
    let mut cuts = vec![0.0];
    cuts.extend(spec.edges.iter().copied());
    cuts.push((ax.extent - 1) as f64 * ax.spacing);
    Ok(cuts.windows(2).map(|w| (Some((w[0], w[1])), axis)).collect())
}

fn residual<T: Scalar>(samples: &ConstraintSamples<T>, fit: &FitResult<T>, row: usize) -> f64 {
    (0..fit.coefficients.len())
        .filter(|&j| fit.support[j])
        .map(|j| fit.slot_coefficient(j).to_f64_lossy() * samples.columns[j].values[row].to_f64_lossy())
        .sum()
}

/// Fits one constraint on executed samples.
pub fn fit_constraint<T: Scalar>(
    inet: &INet,
    c: &Constraint,
    plan: &crate::interpret::ConstraintPlan,
    samples: &ConstraintSamples<T>,
    cfg: &EvalConfig,
) -> Result<ConstraintEvaluation<T>, PipelineError> {
    let axes: Vec<String> = inet.axes.iter().map(|a| a.name.clone()).collect();
    let col = &samples.columns[0];
    let t_axis = time_axis(&col.axes).unwrap_or(0);
    let (train_all, test_all) = split_rows(col, t_axis, cfg.split);
    let margin = plan.reach();
    let mut regions = Vec::new();
    let mut residuals = Vec::new();
    let mut weighted = 0.0;
    let mut total = 0usize;
    for (bounds, axis) in region_bounds(samples, cfg)? {
        let rows: Vec<usize> = match bounds {
            Some((lo, hi)) => region_rows(col, axis, lo, hi, margin[axis]),
            None => (0..col.cell_count()).collect(),
        };
        let train = intersect(&train_all, &rows);
        let test = intersect(&test_all, &rows);
        let fm = assemble_feature_matrix(&plan.expansion, samples, &train, &axes)?;
        let dense = fit_homogeneous(&fm, &cfg.fit)?;
        let sparse = sparsify(&fm, &dense, &cfg.fit)?;
        let test_m = if test.is_empty() {
            crate::linalg::Matrix::zeros(0, fm.values.cols())
        } else {
            assemble_feature_matrix(&plan.expansion, samples, &test, &axes)?.values
        };
        let fit = with_test(sparse, &test_m);
        let loss = fit.normalized_loss().to_f64_lossy();
        weighted += loss * rows.len() as f64;
        total += rows.len();
        let train_set: std::collections::BTreeSet<usize> = train.iter().copied().collect();
        for &r in &rows {
            residuals.push(ResidualRow { center: col.center(r), value: residual(samples, &fit, r), train: train_set.contains(&r) });
        }
        let equation = fit.equation(axes.clone()).render();
        regions.push(RegionFit { bounds, record: fit.record(), equation, fit });
    }
    let first = &regions[0].fit;
    let class_key = canonicalize(&first.equation(axes.clone()));
    let expanded = emit_expanded(inet, c, &vec![cfg.basis.clone(); c.function_slots.len()])?.render();
    Ok(ConstraintEvaluation {
        key: c.key(inet),
        at: plan.at.clone(),
        text: emit(inet, c)?,
        expanded,
        regions,
        loss: if total == 0 { f64::INFINITY } else { weighted / total as f64 },
        class_key,
        residuals,
    })
}

/// Evaluates every constraint of a hypothesis.
pub fn evaluate<T: Scalar>(inet: &INet, constraints: &[Constraint], data: &Dataset<T>, cfg: &EvalConfig) -> Result<Evaluation<T>, PipelineError> {
    if constraints.is_empty() {
        return Err(PipelineError::NoConstraint);
    }
    let plan = lower(inet, constraints, &data.axes, &cfg.basis, &cfg.interpretation)?;
    let mut out = Vec::new();
    for (c, cp) in constraints.iter().zip(&plan.constraints) {
        let samples = execute_constraint(cp, data)?;
        out.push(fit_constraint(inet, c, cp, &samples, cfg)?);
    }
    let loss = out.iter().map(|c| c.loss).sum::<f64>() / out.len() as f64;
    let mut keys: Vec<String> = out.iter().map(|c| c.class_key.clone()).collect();
    keys.sort();
    Ok(Evaluation { class_key: keys.join(" | "), loss, constraints: out, plan: plan.explain() })
}

pub fn evaluate_inet<T: Scalar>(inet: &INet, data: &Dataset<T>, cfg: &EvalConfig) -> Result<Evaluation<T>, PipelineError> {
    evaluate(inet, &extract_constraints(inet), data, cfg)
}

/// Search evaluator over a bound dataset.
pub struct DataEvaluator<'a, T> {
    pub data: &'a Dataset<T>,
    pub config: EvalConfig,
}

impl<T: Scalar> Evaluator for DataEvaluator<'_, T> {
    type Output = Evaluation<T>;
    fn evaluate(&self, inet: &INet, constraints: &[Constraint]) -> Result<(Option<f64>, Evaluation<T>), String> {
        let e = evaluate(inet, constraints, self.data, &self.config).map_err(|e| e.to_string())?;
        Ok((Some(e.loss), e))
    }
}
