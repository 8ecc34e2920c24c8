//! Fitting unknown phenomenological functions from feature columns.
//!
//! Every unknown function is a linear combination of basis functions, so a constraint
//! residual is `A c` for the concatenated coefficient vector `c`. The default estimator
//! is homogeneous: `c` is the unit right singular vector of the column-normalized `A`
//! with the smallest singular value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::Basis;
use crate::interpret::ConstraintSamples;
use crate::linalg::{lstsq, svd, Matrix};
use crate::scalar::{dot, norm2, Scalar};
use crate::symbolic::{Coefficient, Expansion, SymbolicEquation, SymbolicTerm, TermKey};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no evaluation cells")]
    InsufficientData,
    #[error("need at least two active columns, have {0}")]
    TooFewColumns(usize),
    #[error("pivot column `{0}` is not an active term")]
    UnknownPivot(String),
    #[error("pivot least squares is rank deficient")]
    RankDeficient,
}

/// Column description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnLabel {
    pub key: TermKey,
    pub slot: Option<usize>,
    pub basis: Basis,
    pub side: i8,
    /// Rendered term, used in reports.
    pub text: String,
}

/// Raw feature system of one constraint: every expansion column on the chosen rows,
/// with activity (gauge reduction) and train-set column norms.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    pub values: Matrix<T>,
    pub labels: Vec<ColumnLabel>,
    pub active: Vec<bool>,
    pub scales: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    /// Active columns divided by their scales.
    pub fn normalized(&self) -> Matrix<T> {
        let keep = self.active_indices();
        let mut m = self.values.select_columns(&keep);
        for (j, &i) in keep.iter().enumerate() {
            m.scale_column(j, T::one() / self.scales[i]);
        }
        m
    }

    /// Same columns on other rows, normalized with this matrix's scales.
    pub fn with_rows(&self, values: Matrix<T>) -> Self {
        Self { values, labels: self.labels.clone(), active: self.active.clone(), scales: self.scales.clone() }
    }

    /// Stacks row blocks of systems with identical columns (e.g. several regions).
    pub fn stack(parts: &[FeatureMatrix<T>]) -> Option<Self> {
        let first = parts.first()?;
        let mut rows = Vec::new();
        for p in parts {
            for r in 0..p.rows() {
                rows.push(p.values.row(r).to_vec());
            }
        }
        let values = if rows.is_empty() { Matrix::zeros(0, first.values.cols()) } else { Matrix::from_rows(&rows) };
        let mut out = first.with_rows(values);
        out.rescale();
        Some(out)
    }

    /// Recomputes column norms and deactivates numerically zero columns.
    pub fn rescale(&mut self) {
        let norms: Vec<T> = (0..self.values.cols()).map(|j| self.values.column_norm(j)).collect();
        let top = norms.iter().copied().fold(T::zero(), T::max);
        for (j, &n) in norms.iter().enumerate() {
            if !(n > top * T::lit(1e-12)) || n == T::zero() {
                self.active[j] = false;
            }
        }
        self.scales = norms;
    }
}

fn row_block<T: Scalar>(samples: &ConstraintSamples<T>, rows: &[usize]) -> Matrix<T> {
    let cols: Vec<Vec<T>> = samples.columns.iter().map(|c| rows.iter().map(|&r| c.values[r]).collect()).collect();
    let mut m = Matrix::zeros(rows.len(), cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    m
}

/// Builds the feature system from executed columns on the given rows. Vanishing and
/// merged columns are inactive, as are columns that are numerically zero on these rows.
pub fn assemble_feature_matrix<T: Scalar>(
    expansion: &Expansion,
    samples: &ConstraintSamples<T>,
    rows: &[usize],
    axes: &[String],
) -> Result<FeatureMatrix<T>, FitError> {
    if rows.is_empty() {
        return Err(FitError::InsufficientData);
    }
    let values = row_block(samples, rows);
    Ok(from_values(expansion, values, axes))
}

/// Feature system from already aggregated columns (`columns[j][row]`).
pub fn feature_matrix_from_columns<T: Scalar>(expansion: &Expansion, columns: &[Vec<T>], axes: &[String]) -> Result<FeatureMatrix<T>, FitError> {
    let rows = columns.first().map(|c| c.len()).unwrap_or(0);
    if rows == 0 {
        return Err(FitError::InsufficientData);
    }
    let mut m = Matrix::zeros(rows, columns.len());
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(from_values(expansion, m, axes))
}

fn from_values<T: Scalar>(expansion: &Expansion, values: Matrix<T>, axes: &[String]) -> FeatureMatrix<T> {
    let labels = expansion
        .columns
        .iter()
        .map(|t| ColumnLabel { key: t.key.clone(), slot: t.slot, basis: t.basis, side: t.side, text: t.key.render(axes) })
        .collect();
    let active = (0..expansion.columns.len()).map(|i| expansion.kept.contains(&i)).collect();
    let mut fm = FeatureMatrix { values, labels, active, scales: Vec::new() };
    fm.rescale();
    fm
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    /// Both sides of the balance carry unit signal; the fit maximizes their correlation
    /// (residual `2 - 2 rho`). Relations inside one side's basis cannot score.
    #[default]
    Balanced,
    /// Smallest right singular vector of all normalized columns.
    Homogeneous,
    /// Ordinary least squares with one term moved to the right-hand side. `term` is the
    /// rendered term; default is the first active column.
    Pivot { term: Option<String> },
}

/// Fit settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub estimator: Estimator,
    /// Relative hard threshold for sparsification; 0 disables it.
    pub threshold: f64,
    pub max_rounds: usize,
    /// Relative gap below which singular values count as one multiple value.
    pub ambiguity_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { estimator: Estimator::Balanced, threshold: 0.05, max_rounds: 10, ambiguity_tol: 1e-8 }
    }
}

/// Fitted coefficients of one constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub labels: Vec<ColumnLabel>,
    /// Column scales used for normalization (raw-column Euclidean norms on train rows).
    pub scales: Vec<T>,
    /// Unit-norm coefficients of the normalized columns; zero for inactive columns.
    pub coefficients: Vec<T>,
    pub support: Vec<bool>,
    pub train_loss: T,
    pub test_loss: Option<T>,
    /// Losses are `mse(coefficients) * loss_scale`; the balanced estimator measures the
    /// residual relative to the signal on each side.
    pub loss_scale: T,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Two smallest singular values of the final system (ascending).
    pub smallest_singular: Vec<T>,
    pub condition: T,
    pub null_dimension: usize,
    pub normalization: String,
    pub warnings: Vec<String>,
}

impl<T: Scalar> FitResult<T> {
    /// Coefficient of the raw column `j` (multiplies `side * basis(arg)`): the
    /// coefficient inside its unknown function.
    pub fn slot_coefficient(&self, j: usize) -> T {
        if self.scales[j] == T::zero() {
            return T::zero();
        }
        self.coefficients[j] / self.scales[j]
    }

    /// Coefficient of the term in `lhs - rhs = 0`, i.e. including the side sign.
    pub fn term_coefficient(&self, j: usize) -> T {
        self.slot_coefficient(j) * T::lit(self.labels[j].side as f64)
    }

    pub fn column(&self, slot: Option<usize>, basis: Basis) -> Option<usize> {
        self.labels.iter().position(|l| l.slot == slot && l.basis == basis)
    }

    pub fn column_by_text(&self, text: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.text == text)
    }

    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    pub fn support_texts(&self) -> Vec<String> {
        (0..self.labels.len()).filter(|&j| self.support[j]).map(|j| self.labels[j].text.clone()).collect()
    }

    /// Loss relative to unit-norm columns: train MSE times train rows.
    pub fn normalized_train_loss(&self) -> T {
        self.train_loss * T::from_usize_lossy(self.train_rows)
    }

    /// Test loss on the same relative scale; falls back to train loss.
    pub fn normalized_loss(&self) -> T {
        match self.test_loss {
            Some(l) => l * T::from_usize_lossy(self.train_rows),
            None => self.normalized_train_loss(),
        }
    }

    /// Fitted equation with term coefficients, zero terms omitted.
    pub fn equation(&self, axes: Vec<String>) -> SymbolicEquation {
        let terms = (0..self.labels.len())
            .filter(|&j| self.support[j])
            .map(|j| SymbolicTerm { key: self.labels[j].key.clone(), coefficient: Coefficient::Value(self.term_coefficient(j).to_f64_lossy()) })
            .collect();
        SymbolicEquation::new(axes, terms).without_zeros()
    }

    /// Slot name -> list of (basis, de-normalized coefficient) on the support.
    pub fn record(&self) -> FitRecord {
        let mut slots: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for j in 0..self.labels.len() {
            if !self.support[j] {
                continue;
            }
            let l = &self.labels[j];
            let name = match l.slot {
                Some(k) => format!("f{}", k + 1),
                None => "data".to_string(),
            };
            let arg = if l.basis == Basis::Constant { "1".to_string() } else { l.basis.name() };
            slots.entry(name).or_default().push((arg, self.slot_coefficient(j).to_f64_lossy()));
        }
        FitRecord {
            slots,
            train_loss: self.train_loss.to_f64_lossy(),
            test_loss: self.test_loss.map(|t| t.to_f64_lossy()),
            normalization: self.normalization.clone(),
            null_dimension: self.null_dimension,
            condition: self.condition.to_f64_lossy(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Serializable summary of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub slots: BTreeMap<String, Vec<(String, f64)>>,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
    pub normalization: String,
    pub null_dimension: usize,
    pub condition: f64,
    pub warnings: Vec<String>,
}

fn fix_sign<T: Scalar>(c: &mut [T]) {
    let mut best = 0;
    for i in 1..c.len() {
        if c[i].abs() > c[best].abs() {
            best = i;
        }
    }
    if c.get(best).map_or(false, |&v| v < T::zero()) {
        c.iter_mut().for_each(|v| *v = -*v);
    }
}

fn mse<T: Scalar>(a: &Matrix<T>, c: &[T]) -> T {
    if a.rows() == 0 {
        return T::zero();
    }
    let r = a.mul_vec(c);
    r.iter().map(|&x| x * x).sum::<T>() / T::from_usize_lossy(a.rows())
}

/// Orthonormal basis of the column space of `a` (columns with relative singular value
/// above `1e-10`), with the map back to coefficients: `a * map = q`.
fn side_basis<T: Scalar>(a: &Matrix<T>) -> Option<(Matrix<T>, Matrix<T>)> {
    let dec = svd(a);
    let smax = *dec.singular_values.first()?;
    if smax <= T::zero() {
        return None;
    }
    let keep: Vec<usize> = (0..dec.singular_values.len()).filter(|&k| dec.singular_values[k] > smax * T::lit(1e-10)).collect();
    let mut map = Matrix::zeros(a.cols(), keep.len());
    for (j, &k) in keep.iter().enumerate() {
        let v = dec.right_vector(k);
        for i in 0..a.cols() {
            map[(i, j)] = v[i] / dec.singular_values[k];
        }
    }
    let mut q = Matrix::zeros(a.rows(), keep.len());
    for j in 0..keep.len() {
        let col: Vec<T> = (0..a.cols()).map(|i| map[(i, j)]).collect();
        let qc = a.mul_vec(&col);
        for (i, v) in qc.into_iter().enumerate() {
            q[(i, j)] = v;
        }
    }
    Some((q, map))
}

/// Top canonical pair of the two sides of `a` (normalized columns `cols`). Returns
/// unit-norm coefficients and the loss scale that makes `mse * scale = 2 - 2 rho`
/// times the row count.
fn balanced<T: Scalar>(fm: &FeatureMatrix<T>, cols: &[usize], a: &Matrix<T>) -> Option<(Vec<T>, T)> {
    let lhs: Vec<usize> = (0..cols.len()).filter(|&j| fm.labels[cols[j]].side > 0).collect();
    let rhs: Vec<usize> = (0..cols.len()).filter(|&j| fm.labels[cols[j]].side <= 0).collect();
    if lhs.is_empty() || rhs.is_empty() {
        return None;
    }
    let (ql, ml) = side_basis(&a.select_columns(&lhs))?;
    let (qr, mr) = side_basis(&a.select_columns(&rhs))?;
    let mut m = Matrix::zeros(ql.cols(), qr.cols());
    for i in 0..ql.cols() {
        for j in 0..qr.cols() {
            m[(i, j)] = dot(&ql.column(i), &qr.column(j));
        }
    }
    let dec = svd(&m);
    let rho = dec.singular_values[0];
    if rho <= T::zero() {
        return None;
    }
    let v1 = dec.right_vector(0);
    let u1: Vec<T> = m.mul_vec(&v1).into_iter().map(|x| x / rho).collect();
    let a_l = ml.mul_vec(&u1);
    let a_r = mr.mul_vec(&v1);
    let mut c = vec![T::zero(); cols.len()];
    for (k, &j) in lhs.iter().enumerate() {
        c[j] = a_l[k];
    }
    for (k, &j) in rhs.iter().enumerate() {
        c[j] = -a_r[k];
    }
    let n = norm2(&c);
    c.iter_mut().for_each(|x| *x = *x / n);
    Some((c, n * n))
}

/// Homogeneous fit on the given subset of active columns.
fn solve_on<T: Scalar>(fm: &FeatureMatrix<T>, cols: &[usize], cfg: &FitConfig) -> Result<FitResult<T>, FitError> {
    if fm.rows() == 0 {
        return Err(FitError::InsufficientData);
    }
    if cols.len() < 2 {
        return Err(FitError::TooFewColumns(cols.len()));
    }
    let mut a = fm.values.select_columns(cols);
    for (j, &i) in cols.iter().enumerate() {
        a.scale_column(j, T::one() / fm.scales[i]);
    }
    let dec = svd(&a);
    let sv = &dec.singular_values;
    let smin = sv[sv.len() - 1];
    let smax = sv[0];
    let tol = T::lit(cfg.ambiguity_tol) * smax;
    let null_dimension = sv.iter().filter(|&&s| s - smin <= tol).count();
    let mut warnings = Vec::new();
    let mut loss_scale = T::one();
    let mut local = match &cfg.estimator {
        Estimator::Homogeneous => dec.smallest().1,
        Estimator::Balanced => match balanced(fm, cols, &a) {
            Some((c, scale)) => {
                loss_scale = scale;
                c
            }
            None => {
                warnings.push("one side has no active column: homogeneous fit used".into());
                dec.smallest().1
            }
        },
        Estimator::Pivot { term } => {
            let p = match term {
                Some(t) => cols.iter().position(|&i| &fm.labels[i].text == t).ok_or_else(|| FitError::UnknownPivot(t.clone()))?,
                None => 0,
            };
            let others: Vec<usize> = (0..cols.len()).filter(|&j| j != p).collect();
            let rest = a.select_columns(&others);
            let rhs: Vec<T> = a.column(p).iter().map(|&v| -v).collect();
            let x = lstsq(&rest, &rhs).ok_or(FitError::RankDeficient)?;
            let mut c = vec![T::zero(); cols.len()];
            c[p] = T::one();
            for (k, &j) in others.iter().enumerate() {
                c[j] = x[k];
            }
            let n = norm2(&c);
            c.iter_mut().for_each(|v| *v = *v / n);
            c
        }
    };
    if null_dimension > 1 {
        warnings.push(format!("ambiguous solution: null dimension {null_dimension}"));
    }
    fix_sign(&mut local);
    let train_loss = mse(&a, &local) * loss_scale;
    let mut coefficients = vec![T::zero(); fm.labels.len()];
    let mut support = vec![false; fm.labels.len()];
    for (j, &i) in cols.iter().enumerate() {
        coefficients[i] = local[j];
        support[i] = local[j] != T::zero();
    }
    let mut smallest: Vec<T> = sv.iter().rev().take(2).copied().collect();
    smallest.truncate(2);
    let condition = if smin > T::zero() { smax / smin } else { T::infinity() };
    Ok(FitResult {
        labels: fm.labels.clone(),
        scales: fm.scales.clone(),
        coefficients,
        support,
        train_loss,
        test_loss: None,
        loss_scale,
        train_rows: fm.rows(),
        test_rows: 0,
        smallest_singular: smallest,
        condition,
        null_dimension,
        normalization: match cfg.estimator {
            Estimator::Balanced => "columns scaled to unit Euclidean norm on train rows; coefficient vector unit norm, largest entry positive; loss relative to unit signal per side".into(),
            _ => "columns scaled to unit Euclidean norm on train rows; coefficient vector unit norm, largest entry positive".into(),
        },
        warnings,
    })
}

/// Homogeneous (or pivot) fit on all active columns.
pub fn fit_homogeneous<T: Scalar>(fm: &FeatureMatrix<T>, cfg: &FitConfig) -> Result<FitResult<T>, FitError> {
    solve_on(fm, &fm.active_indices(), cfg)
}

/// Sequential hard thresholding: drop coefficients below `threshold * max|c|`, refit on
/// the survivors, repeat until the support is stable. Never fewer than two terms.
pub fn sparsify<T: Scalar>(fm: &FeatureMatrix<T>, init: &FitResult<T>, cfg: &FitConfig) -> Result<FitResult<T>, FitError> {
    if cfg.threshold <= 0.0 {
        return Ok(init.clone());
    }
    let mut fit = init.clone();
    for _ in 0..cfg.max_rounds {
        let current: Vec<usize> = (0..fit.support.len()).filter(|&j| fit.support[j]).collect();
        let top = current.iter().map(|&j| fit.coefficients[j].abs()).fold(T::zero(), T::max);
        let cut = top * T::lit(cfg.threshold);
        let mut keep: Vec<usize> = current.iter().copied().filter(|&j| fit.coefficients[j].abs() >= cut).collect();
        let mut warn = None;
        if keep.len() < 2 {
            let mut ranked = current.clone();
            ranked.sort_by(|&a, &b| fit.coefficients[b].abs().partial_cmp(&fit.coefficients[a].abs()).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
            ranked.truncate(2);
            ranked.sort();
            keep = ranked;
            warn = Some("sparsification kept the two largest terms".to_string());
        }
        if cfg.estimator == Estimator::Balanced {
            // keep the largest term of a side the threshold emptied
            for side in [true, false] {
                let on_side = |j: &usize| (fm.labels[*j].side > 0) == side;
                if !keep.iter().any(on_side) {
                    let best = current.iter().copied().filter(on_side).max_by(|&a, &b| {
                        fit.coefficients[a].abs().partial_cmp(&fit.coefficients[b].abs()).unwrap_or(std::cmp::Ordering::Equal).then(b.cmp(&a))
                    });
                    if let Some(b) = best {
                        keep.push(b);
                        keep.sort();
                    }
                }
            }
        }
        if keep.len() == current.len() {
            break;
        }
        let mut next = solve_on(fm, &keep, cfg)?;
        next.warnings.extend(init.warnings.iter().filter(|w| !w.starts_with("ambiguous")).cloned());
        if let Some(w) = warn {
            next.warnings.push(w);
        }
        fit = next;
    }
    Ok(fit)
}

/// Test MSE of a fit on held-out rows normalized with the fit's (train) scales.
pub fn score<T: Scalar>(fit: &FitResult<T>, test: &Matrix<T>) -> T {
    if test.rows() == 0 {
        return fit.train_loss;
    }
    let c: Vec<T> = (0..fit.coefficients.len())
        .map(|j| if fit.scales[j] == T::zero() { T::zero() } else { fit.coefficients[j] / fit.scales[j] })
        .collect();
    mse(test, &c) * fit.loss_scale
}

/// Attaches a test loss; empty test sets fall back to the train loss with a warning.
pub fn with_test<T: Scalar>(mut fit: FitResult<T>, test: &Matrix<T>) -> FitResult<T> {
    if test.rows() == 0 {
        fit.warnings.push("empty test split: test loss is the train loss".into());
        fit.test_loss = Some(fit.train_loss);
    } else {
        fit.test_loss = Some(score(&fit, test));
        fit.test_rows = test.rows();
    }
    fit
}

/// Model whose feature columns depend nonlinearly on a parameter vector.
pub trait NonlinearModel<T> {
    fn columns(&self, params: &[T]) -> Matrix<T>;
}

impl<T, F: Fn(&[T]) -> Matrix<T>> NonlinearModel<T> for F {
    fn columns(&self, params: &[T]) -> Matrix<T> {
        self(params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NonlinearOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Relative central-difference step.
    pub fd_step: f64,
    pub initial_damping: f64,
}

impl Default for NonlinearOptions {
    fn default() -> Self {
        Self { max_iterations: 100, tolerance: 1e-12, fd_step: 1e-6, initial_damping: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearFit<T> {
    pub params: Vec<T>,
    /// Unit-norm coefficients of the normalized columns at `params`.
    pub coefficients: Vec<T>,
    /// Column scales at `params`.
    pub scales: Vec<T>,
    pub loss: T,
    pub converged: bool,
    pub gradient_norm: T,
    pub iterations: usize,
}

/// Residual of the inner homogeneous problem at fixed parameters.
fn projected<T: Scalar, M: NonlinearModel<T> + ?Sized>(model: &M, params: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut a = model.columns(params);
    let scales: Vec<T> = (0..a.cols()).map(|j| a.column_norm(j)).collect();
    for (j, &s) in scales.iter().enumerate() {
        if s > T::zero() {
            a.scale_column(j, T::one() / s);
        }
    }
    let mut c = svd(&a).smallest().1;
    fix_sign(&mut c);
    (a.mul_vec(&c), c, scales)
}

fn loss_of<T: Scalar>(r: &[T]) -> T {
    if r.is_empty() {
        return T::zero();
    }
    r.iter().map(|&x| x * x).sum::<T>() / T::from_usize_lossy(r.len())
}

/// Central-difference Jacobian of the projected residual.
fn jacobian<T: Scalar, M: NonlinearModel<T> + ?Sized>(model: &M, params: &[T], step: f64) -> Vec<Vec<T>> {
    (0..params.len())
        .map(|k| {
            let h = T::lit(step) * (T::one() + params[k].abs());
            let mut p = params.to_vec();
            p[k] = params[k] + h;
            let (rp, _, _) = projected(model, &p);
            p[k] = params[k] - h;
            let (rm, _, _) = projected(model, &p);
            rp.iter().zip(&rm).map(|(&a, &b)| (a - b) / (h + h)).collect()
        })
        .collect()
}

/// Gradient of the projected MSE used internally: `2 J^T r / rows`.
pub fn nonlinear_gradient<T: Scalar, M: NonlinearModel<T> + ?Sized>(model: &M, params: &[T], step: f64) -> Vec<T> {
    let (r, _, _) = projected(model, params);
    let j = jacobian(model, params, step);
    let n = T::from_usize_lossy(r.len().max(1));
    j.iter().map(|col| T::lit(2.0) * col.iter().zip(&r).map(|(&a, &b)| a * b).sum::<T>() / n).collect()
}

/// Variable projection: outer coefficients by the homogeneous fit, parameters by
/// damped Gauss-Newton on the projected residual.
pub fn fit_nonlinear<T: Scalar, M: NonlinearModel<T> + ?Sized>(model: &M, init: &[T], opts: &NonlinearOptions) -> NonlinearFit<T> {
    let mut params = init.to_vec();
    let (mut r, mut c, mut scales) = projected(model, &params);
    let mut loss = loss_of(&r);
    let mut lambda = T::lit(opts.initial_damping);
    let mut converged = params.is_empty();
    let mut iterations = 0;
    let np = params.len();
    while iterations < opts.max_iterations && !converged {
        iterations += 1;
        let j = jacobian(model, &params, opts.fd_step);
        // normal equations
        let mut jtj = vec![vec![T::zero(); np]; np];
        let mut jtr = vec![T::zero(); np];
        for a in 0..np {
            for b in 0..np {
                jtj[a][b] = j[a].iter().zip(&j[b]).map(|(&x, &y)| x * y).sum();
            }
            jtr[a] = j[a].iter().zip(&r).map(|(&x, &y)| x * y).sum();
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = Matrix::zeros(np, np);
            for a in 0..np {
                for b in 0..np {
                    m[(a, b)] = jtj[a][b];
                }
                m[(a, a)] = m[(a, a)] * (T::one() + lambda) + lambda * T::lit(1e-12);
            }
            let rhs: Vec<T> = jtr.iter().map(|&v| -v).collect();
            let step = match lstsq(&m, &rhs) {
                Some(s) => s,
                None => {
                    lambda = lambda * T::lit(10.0);
                    continue;
                }
            };
            let trial: Vec<T> = params.iter().zip(&step).map(|(&p, &s)| p + s).collect();
            let (rt, ct, st) = projected(model, &trial);
            let lt = loss_of(&rt);
            if lt < loss {
                let rel = (loss - lt) / loss.max(T::min_positive_value());
                params = trial;
                r = rt;
                c = ct;
                scales = st;
                loss = lt;
                lambda = (lambda * T::lit(0.3)).max(T::lit(1e-12));
                improved = true;
                if rel < T::lit(opts.tolerance) || loss <= T::lit(opts.tolerance) * T::lit(1e-6) {
                    converged = true;
                }
                break;
            }
            lambda = lambda * T::lit(10.0);
        }
        if !improved {
            converged = true;
        }
    }
    let g = nonlinear_gradient(model, &params, opts.fd_step);
    NonlinearFit { params, coefficients: c, scales, loss, converged, gradient_norm: norm2(&g), iterations }
}
