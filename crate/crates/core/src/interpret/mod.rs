//! Lowering of posed constraints to numeric residual pipelines.
//!
//! Each side of a constraint becomes a chain of one-axis linear passes (co-boundaries,
//! dual sampling or local polynomial fits), a basis expansion at the unknown function,
//! and exact co-boundaries in the latent complex. Both sides are cropped to the cells
//! they share.

pub mod cochain;
pub mod stencil;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cochain::{pass_range, DualSampling, EvaluatedCochain, Family, SmoothOp};

use crate::basis::BasisLibrary;
use crate::forms::{Constraint, INet, Variable};
use crate::scalar::Scalar;
use crate::symbolic::{expand, Expansion, PathShape, Segment, SymbolicError};
use crate::topology::{AxisKind, AxisSpec, Orientation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("cell family mismatch: {0}")]
    FamilyMismatch(String),
    #[error("axis {0} is already saturated")]
    AxisSaturated(usize),
    #[error("window {window} exceeds the {extent} cells available on axis `{axis}`")]
    WindowTooLarge { axis: String, window: usize, extent: usize },
    #[error("window {window} with degree {degree} is not a valid local fit (odd window, degree < window)")]
    BadWindow { window: usize, degree: usize },
    #[error("no evaluation cells survive on axis `{axis}`")]
    EmptyCells { axis: String },
    #[error("no data bound to measured variable `{0}`")]
    MissingData(String),
    #[error("unknown function nested inside an unknown function")]
    Nested,
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error(transparent)]
    Symbolic(#[from] SymbolicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Differential,
    Integral,
}

/// Numeric reading of a hypothesis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Interpretation {
    pub mode: Mode,
    /// Odd window per axis (one entry broadcasts). Integral mode only.
    pub window: Vec<usize>,
    /// Polynomial degree per axis (one entry broadcasts). Integral mode only.
    pub degree: Vec<usize>,
    pub dual_sampling: DualSampling,
}

impl Default for Interpretation {
    fn default() -> Self {
        Self { mode: Mode::Differential, window: vec![25], degree: vec![3], dual_sampling: DualSampling::Linear }
    }
}

impl Interpretation {
    pub fn differential() -> Self {
        Self::default()
    }

    pub fn integral(window: usize, degree: usize) -> Self {
        Self { mode: Mode::Integral, window: vec![window], degree: vec![degree], ..Self::default() }
    }

    pub fn window_for(&self, axis: usize) -> usize {
        *self.window.get(axis).or(self.window.last()).unwrap_or(&1)
    }

    pub fn degree_for(&self, axis: usize) -> usize {
        *self.degree.get(axis).or(self.degree.last()).unwrap_or(&0)
    }

    pub fn validate(&self, n_axes: usize) -> Result<(), InterpretError> {
        if self.mode == Mode::Integral {
            for a in 0..n_axes {
                let (w, p) = (self.window_for(a), self.degree_for(a));
                if w == 0 || w % 2 == 0 || p >= w {
                    return Err(InterpretError::BadWindow { window: w, degree: p });
                }
            }
        }
        if let DualSampling::Polynomial(0) = self.dual_sampling {
            return Err(InterpretError::BadWindow { window: 1, degree: 0 });
        }
        Ok(())
    }
}

/// Measured fields over a Cartesian grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub axes: Vec<AxisSpec>,
    pub fields: BTreeMap<String, EvaluatedCochain<T>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(axes: Vec<AxisSpec>) -> Self {
        Self { axes, fields: BTreeMap::new() }
    }

    pub fn insert(&mut self, name: &str, family: Family, values: Vec<T>) -> Result<(), InterpretError> {
        let c = EvaluatedCochain::full(family, self.axes.clone(), values, name)?;
        self.fields.insert(name.to_string(), c);
        Ok(())
    }

    pub fn field(&self, name: &str) -> Option<&EvaluatedCochain<T>> {
        self.fields.get(name)
    }

    /// Multiplies every field by `a`.
    pub fn scaled(&self, a: T) -> Self {
        let mut d = self.clone();
        for f in d.fields.values_mut() {
            f.values.iter_mut().for_each(|v| *v = *v * a);
        }
        d
    }
}

pub fn family_of(v: &Variable) -> Family {
    Family::new(v.complex.orientations.clone(), v.cell_dims.clone())
}

/// One step of a lowered path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Coboundary { axis: usize, to: Family },
    Resample { axis: usize, to: Family, method: DualSampling },
    Smooth { axis: usize, to: Family, window: usize, degree: usize, op: SmoothOp },
    Basis { slot: usize },
}

impl Stage {
    fn geometry(&self, from: &Family) -> Option<(usize, &Family, usize, usize)> {
        match self {
            Stage::Coboundary { axis, to } => Some((*axis, to, 2, 0)),
            Stage::Resample { axis, to, method } => {
                let d = to.phase(*axis) as i64 - from.phase(*axis) as i64;
                Some(match (d.rem_euclid(2), method) {
                    (0, _) => (*axis, to, 1, 0),
                    (_, DualSampling::Linear) => (*axis, to, 2, 0),
                    (_, DualSampling::Polynomial(p)) => (*axis, to, p + 1, p / 2),
                })
            }
            Stage::Smooth { axis, to, window, .. } => Some((*axis, to, *window, (window - 1) / 2)),
            Stage::Basis { .. } => None,
        }
    }

    fn describe(&self, axes: &[AxisSpec], from: &Family) -> String {
        match self {
            Stage::Coboundary { axis, to } => {
                format!("coboundary d/d{} {} -> {}", axes[*axis].name, from.label(axes), to.label(axes))
            }
            Stage::Resample { to, method, .. } => {
                let m = match method {
                    DualSampling::Linear => "midpoint".to_string(),
                    DualSampling::Polynomial(p) => format!("lagrange degree {p}"),
                };
                format!("dual sample {} -> {} ({m})", from.label(axes), to.label(axes))
            }
            Stage::Smooth { axis, to, window, degree, op } => format!(
                "local fit along {} window {window} degree {degree} {} {} -> {}",
                axes[*axis].name,
                match op {
                    SmoothOp::Value => "value".to_string(),
                    SmoothOp::CellDifference => "cell-difference".to_string(),
                    SmoothOp::Derivative(r) => format!("derivative {r}"),
                },
                from.label(axes),
                to.label(axes)
            ),
            Stage::Basis { slot } => format!("basis expansion f{}", slot + 1),
        }
    }
}

/// Lowered derivation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathPlan {
    /// `+1` left side, `-1` right side.
    pub side: i8,
    pub source: String,
    pub source_family: Family,
    /// Stages up to the unknown function's argument.
    pub inner: Vec<Stage>,
    /// Product of homological signs folded into local fits (integral mode).
    pub inner_sign: i8,
    pub slot: Option<usize>,
    pub arg_family: Family,
    /// Exact co-boundaries applied after the unknown function.
    pub outer: Vec<Stage>,
    pub end_family: Family,
    pub start: Vec<usize>,
    pub len: Vec<usize>,
    /// Stencil reach per axis in cells.
    pub reach: Vec<usize>,
}

/// Lowered constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintPlan {
    pub at: String,
    pub expansion: Expansion,
    pub lhs: PathPlan,
    pub rhs: PathPlan,
    pub family: Family,
    /// Evaluation block shared by both sides.
    pub start: Vec<usize>,
    pub len: Vec<usize>,
}

impl ConstraintPlan {
    pub fn rows(&self) -> usize {
        self.len.iter().product()
    }

    /// Larger stencil reach of the two sides per axis.
    pub fn reach(&self) -> Vec<usize> {
        self.lhs.reach.iter().zip(&self.rhs.reach).map(|(a, b)| *a.max(b)).collect()
    }

    /// Whether every path ends in at most one outer co-boundary with at least one present.
    pub fn is_balance(&self) -> bool {
        let flux = |p: &PathPlan| p.outer.len();
        (flux(&self.lhs) <= 1 && flux(&self.rhs) <= 1) && (flux(&self.lhs) + flux(&self.rhs) > 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub interpretation: Interpretation,
    pub axes: Vec<AxisSpec>,
    pub constraints: Vec<ConstraintPlan>,
}

impl Plan {
    /// Human-readable listing, one line per stage.
    pub fn explain(&self) -> Vec<String> {
        let mut out = vec![format!("mode {:?}", self.interpretation.mode).to_lowercase()];
        for (k, c) in self.constraints.iter().enumerate() {
            let cells: Vec<String> = (0..self.axes.len())
                .map(|a| format!("{}[{}..{})", self.axes[a].name, c.start[a], c.start[a] + c.len[a]))
                .collect();
            out.push(format!(
                "constraint {k} at {} on {}: {} cells {}",
                c.at,
                c.family.label(&self.axes),
                c.rows(),
                cells.join(" ")
            ));
            for p in [&c.lhs, &c.rhs] {
                let side = if p.side > 0 { "lhs" } else { "rhs" };
                out.push(format!("  {side}: load {} on {}", p.source, p.source_family.label(&self.axes)));
                let mut fam = p.source_family.clone();
                for s in p.inner.iter().chain(&p.outer) {
                    out.push(format!("  {side}: {}", s.describe(&self.axes, &fam)));
                    if let Some((_, to, _, _)) = s.geometry(&fam) {
                        fam = to.clone();
                    }
                }
                out.push(format!("  {side}: sign {:+}", p.side * p.inner_sign));
            }
            out.push(format!(
                "  residual: {} columns, {} kept after gauge reduction",
                c.expansion.columns.len(),
                c.expansion.kept.len()
            ));
        }
        out
    }
}

fn lower_path(
    inet: &INet,
    shape: &PathShape,
    side: i8,
    slots: &[crate::forms::RelId],
    end_family: &Family,
    axes: &[AxisSpec],
    interp: &Interpretation,
) -> Result<PathPlan, InterpretError> {
    if shape.slot_count() > 1 {
        return Err(InterpretError::Nested);
    }
    let n = axes.len();
    let source_var = inet.var(shape.source).ok_or_else(|| InterpretError::MissingData(shape.source_name.clone()))?;
    let source_family = family_of(source_var);
    let slot_pos = shape.slot_position();
    let (inner_segs, outer_segs) = match slot_pos {
        Some(p) => (&shape.segments[..p], &shape.segments[p + 1..]),
        None => (&shape.segments[..], &[][..]),
    };
    let arg_family = match slot_pos {
        Some(p) => {
            let v = inet.var(shape.reached[p]).expect("slot target exists");
            family_of(v)
        }
        None => end_family.clone(),
    };
    let slot = match shape.segments.get(slot_pos.unwrap_or(usize::MAX)) {
        Some(Segment::Slot { rel }) => slots.iter().position(|r| r == rel),
        _ => None,
    };

    let mut inner = Vec::new();
    let mut inner_sign = 1i8;
    let mut fam = source_family.clone();
    match interp.mode {
        Mode::Differential => {
            for s in inner_segs {
                if let Segment::Topo { axis } = s {
                    let to = fam.with_axis(*axis, fam.orientations[*axis], 1);
                    inner.push(Stage::Coboundary { axis: *axis, to: to.clone() });
                    fam = to;
                }
            }
            for a in 0..n {
                if fam.orientations[a] != arg_family.orientations[a] || fam.dims[a] != arg_family.dims[a] {
                    let to = fam.with_axis(a, arg_family.orientations[a], arg_family.dims[a]);
                    inner.push(Stage::Resample { axis: a, to: to.clone(), method: interp.dual_sampling });
                    fam = to;
                }
            }
        }
        Mode::Integral => {
            let mut orders = vec![0u8; n];
            let mut track = fam.clone();
            for s in inner_segs {
                if let Segment::Topo { axis } = s {
                    inner_sign *= track.homological_sign(*axis);
                    track = track.with_axis(*axis, track.orientations[*axis], 1);
                    orders[*axis] += 1;
                }
            }
            for a in 0..n {
                let to = fam.with_axis(a, arg_family.orientations[a], arg_family.dims[a]);
                let op = if orders[a] == 0 { SmoothOp::Value } else { SmoothOp::CellDifference };
                inner.push(Stage::Smooth { axis: a, to: to.clone(), window: interp.window_for(a), degree: interp.degree_for(a), op });
                fam = to;
            }
        }
    }
    if let Some(k) = slot {
        inner.push(Stage::Basis { slot: k });
    }
    let mut outer = Vec::new();
    for s in outer_segs {
        if let Segment::Topo { axis } = s {
            let to = fam.with_axis(*axis, fam.orientations[*axis], 1);
            outer.push(Stage::Coboundary { axis: *axis, to: to.clone() });
            fam = to;
        }
    }
    if fam != *end_family {
        return Err(InterpretError::FamilyMismatch(format!(
            "path ends on {} instead of {}",
            fam.label(axes),
            end_family.label(axes)
        )));
    }

    // propagate the block
    let mut start = vec![0usize; n];
    let mut len: Vec<usize> = (0..n).map(|a| source_family.count(a, axes[a].extent)).collect();
    let mut reach = vec![0usize; n];
    let mut fam = source_family.clone();
    for s in inner.iter().chain(&outer) {
        if let Some((axis, to, width, left)) = s.geometry(&fam) {
            if interp.mode == Mode::Integral {
                if let Stage::Smooth { window, .. } = s {
                    if *window > len[axis] {
                        return Err(InterpretError::WindowTooLarge { axis: axes[axis].name.clone(), window: *window, extent: len[axis] });
                    }
                }
            }
            let (st, l) = pass_range(&fam, to, axis, start[axis], len[axis], axes[axis].extent, width, left);
            start[axis] = st;
            len[axis] = l;
            reach[axis] += width.saturating_sub(1).max(1);
            fam = to.clone();
        }
    }
    Ok(PathPlan {
        side,
        source: shape.source_name.clone(),
        source_family,
        inner,
        inner_sign,
        slot,
        arg_family,
        outer,
        end_family: end_family.clone(),
        start,
        len,
        reach,
    })
}

/// Lowers every constraint; `basis` is used for each unknown function.
pub fn lower(
    inet: &INet,
    constraints: &[Constraint],
    axes: &[AxisSpec],
    basis: &BasisLibrary,
    interp: &Interpretation,
) -> Result<Plan, InterpretError> {
    interp.validate(axes.len())?;
    let mut out = Vec::new();
    for c in constraints {
        let bases = vec![basis.clone(); c.function_slots.len()];
        let expansion = expand(inet, c, &bases)?;
        let at = inet.var(c.at).expect("constraint variable exists");
        let family = family_of(at);
        let lshape = PathShape::from_path(inet, &c.lhs)?;
        let rshape = PathShape::from_path(inet, &c.rhs)?;
        let lhs = lower_path(inet, &lshape, 1, &c.function_slots, &family, axes, interp)?;
        let rhs = lower_path(inet, &rshape, -1, &c.function_slots, &family, axes, interp)?;
        let mut start = vec![0; axes.len()];
        let mut len = vec![0; axes.len()];
        for a in 0..axes.len() {
            let lo = lhs.start[a].max(rhs.start[a]);
            let hi = (lhs.start[a] + lhs.len[a]).min(rhs.start[a] + rhs.len[a]);
            if hi <= lo {
                return Err(InterpretError::EmptyCells { axis: axes[a].name.clone() });
            }
            start[a] = lo;
            len[a] = hi - lo;
        }
        out.push(ConstraintPlan { at: inet.label(c.at), expansion, lhs, rhs, family, start, len });
    }
    Ok(Plan { interpretation: interp.clone(), axes: axes.to_vec(), constraints: out })
}

/// Feature columns of one constraint on its evaluation block, one per raw expansion
/// column, each already multiplied by its side sign.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSamples<T> {
    pub columns: Vec<EvaluatedCochain<T>>,
    /// Co-chains before the final outer co-boundary, for flux-balance aggregation.
    pub pre_flux: Vec<Option<(usize, EvaluatedCochain<T>)>>,
}

impl<T: Scalar> ConstraintSamples<T> {
    pub fn rows(&self) -> usize {
        self.columns.first().map(|c| c.cell_count()).unwrap_or(0)
    }
}

fn run_stage<T: Scalar>(c: &EvaluatedCochain<T>, s: &Stage) -> Result<EvaluatedCochain<T>, InterpretError> {
    match s {
        Stage::Coboundary { axis, .. } => c.apply_coboundary(*axis, true),
        Stage::Resample { axis, to, method } => c.resample_axis(*axis, to.orientations[*axis], to.dims[*axis], *method),
        Stage::Smooth { axis, to, window, degree, op } => {
            c.smooth_axis(*axis, to.orientations[*axis], to.dims[*axis], *window, *degree, *op)
        }
        Stage::Basis { .. } => Ok(c.clone()),
    }
}

fn run_side<T: Scalar>(
    plan: &ConstraintPlan,
    p: &PathPlan,
    data: &Dataset<T>,
    out: &mut [Option<(EvaluatedCochain<T>, Option<(usize, EvaluatedCochain<T>)>)>],
) -> Result<(), InterpretError> {
    let src = data.field(&p.source).ok_or_else(|| InterpretError::MissingData(p.source.clone()))?;
    if src.family != p.source_family {
        return Err(InterpretError::FamilyMismatch(format!(
            "{} is bound on {} but typed {}",
            p.source,
            src.family.label(&data.axes),
            p.source_family.label(&data.axes)
        )));
    }
    let mut arg = src.clone();
    for s in &p.inner {
        arg = run_stage(&arg, s)?;
    }
    let sign = T::lit((p.side * p.inner_sign) as f64);
    for (i, col) in plan.expansion.columns.iter().enumerate() {
        if col.side != p.side {
            continue;
        }
        let mut v = arg.map(&format!("basis {}", col.basis.name()), |x| col.basis.eval(x) * sign);
        let mut pre = None;
        for (k, s) in p.outer.iter().enumerate() {
            if k + 1 == p.outer.len() {
                if let Stage::Coboundary { axis, .. } = s {
                    pre = Some((*axis, v.clone()));
                }
            }
            v = run_stage(&v, s)?;
        }
        out[i] = Some((v.crop(&plan.start, &plan.len)?, pre));
    }
    Ok(())
}

/// Evaluates one lowered constraint on data.
pub fn execute_constraint<T: Scalar>(plan: &ConstraintPlan, data: &Dataset<T>) -> Result<ConstraintSamples<T>, InterpretError> {
    let mut out = vec![None; plan.expansion.columns.len()];
    run_side(plan, &plan.lhs, data, &mut out)?;
    run_side(plan, &plan.rhs, data, &mut out)?;
    let (columns, pre_flux) = out.into_iter().map(|c| c.expect("every column belongs to a side")).unzip();
    Ok(ConstraintSamples { columns, pre_flux })
}

pub fn execute<T: Scalar>(plan: &Plan, data: &Dataset<T>) -> Result<Vec<ConstraintSamples<T>>, InterpretError> {
    plan.constraints.iter().map(|c| execute_constraint(c, data)).collect()
}

/// Column values summed over coarse blocks of `block[a]` cells per axis. Columns that
/// end in a co-boundary are summed through their boundary values (telescoped), so
/// interior faces cancel exactly. Blocks tile the evaluation block from its start;
/// incomplete trailing blocks are dropped.
pub fn balance_columns<T: Scalar>(
    plan: &ConstraintPlan,
    samples: &ConstraintSamples<T>,
    block: &[usize],
) -> Result<Vec<Vec<T>>, InterpretError> {
    if !plan.is_balance() {
        return Err(InterpretError::NotApplicable("constraint is not a flux balance".into()));
    }
    let n = plan.start.len();
    let counts: Vec<usize> = (0..n).map(|a| plan.len[a] / block[a].max(1)).collect();
    if counts.iter().any(|&c| c == 0) {
        let a = counts.iter().position(|&c| c == 0).unwrap_or(0);
        return Err(InterpretError::EmptyCells { axis: plan.family.label(&samples.columns[0].axes) + &format!(" axis {a}") });
    }
    let n_blocks: usize = counts.iter().product();
    let mut out = Vec::with_capacity(samples.columns.len());
    for (col, pre) in samples.columns.iter().zip(&samples.pre_flux) {
        let mut sums = vec![T::zero(); n_blocks];
        for (b, sum) in sums.iter_mut().enumerate() {
            // block multi-index
            let mut rem = b;
            let mut lo = vec![0usize; n];
            for a in (0..n).rev() {
                lo[a] = plan.start[a] + (rem % counts[a]) * block[a];
                rem /= counts[a];
            }
            match pre {
                Some((axis, g)) => {
                    let sign = T::lit(g.family.homological_sign(*axis) as f64);
                    let h = T::lit(g.axes[*axis].spacing);
                    // faces orthogonal to `axis` at both block ends
                    let cross: Vec<usize> = (0..n).map(|a| if a == *axis { 1 } else { block[a] }).collect();
                    let m: usize = cross.iter().product();
                    let mut acc = T::zero();
                    for r in 0..m {
                        let mut rem = r;
                        let mut idx = vec![0usize; n];
                        for a in (0..n).rev() {
                            idx[a] = lo[a] + rem % cross[a];
                            rem /= cross[a];
                        }
                        let first = g.get(&idx).expect("flux face inside block");
                        idx[*axis] += block[*axis];
                        let last = g.get(&idx).expect("flux face inside block");
                        acc = acc + (last - first);
                    }
                    *sum = acc * sign / h;
                }
                None => {
                    let m: usize = block.iter().product();
                    let mut acc = T::zero();
                    for r in 0..m {
                        let mut rem = r;
                        let mut idx = vec![0usize; n];
                        for a in (0..n).rev() {
                            idx[a] = lo[a] + rem % block[a];
                            rem /= block[a];
                        }
                        acc = acc + col.get(&idx).expect("cell inside block");
                    }
                    *sum = acc;
                }
            }
        }
        out.push(sums);
    }
    Ok(out)
}

/// Block residuals `sum_c coefficient_c * column_c` of a flux balance.
pub fn integral_balance<T: Scalar>(
    plan: &ConstraintPlan,
    samples: &ConstraintSamples<T>,
    block: &[usize],
    coefficients: &[T],
) -> Result<Vec<T>, InterpretError> {
    let cols = balance_columns(plan, samples, block)?;
    let n = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok((0..n).map(|r| cols.iter().zip(coefficients).map(|(c, &w)| c[r] * w).sum()).collect())
}

/// Index of the time axis, if any.
pub fn time_axis(axes: &[AxisSpec]) -> Option<usize> {
    axes.iter().position(|a| a.kind == AxisKind::Time)
}

/// Contiguous split along `axis`: rows whose index falls in the first `fraction` of
/// the block train, the rest test.
pub fn split_rows<T: Scalar>(sample: &EvaluatedCochain<T>, axis: usize, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let cut = sample.start[axis] + ((sample.len[axis] as f64) * fraction).floor() as usize;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in 0..sample.cell_count() {
        if sample.cell_index(r)[axis] < cut {
            train.push(r);
        } else {
            test.push(r);
        }
    }
    (train, test)
}

/// Rows whose cell center along `axis` lies in `[lo + margin, hi - margin]`
/// (physical coordinates, margin in cells of that axis).
pub fn region_rows<T: Scalar>(sample: &EvaluatedCochain<T>, axis: usize, lo: f64, hi: f64, margin: usize) -> Vec<usize> {
    let m = margin as f64 * sample.axes[axis].spacing;
    (0..sample.cell_count())
        .filter(|&r| {
            let x = sample.center(r)[axis];
            x >= lo + m - 1e-12 && x <= hi - m + 1e-12
        })
        .collect()
}

/// Orientation helper for callers building latent complexes.
pub fn flipped(orientations: &[Orientation]) -> Vec<Orientation> {
    orientations.iter().map(|o| o.flip()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::extract_constraints;
    use crate::forms::tests::{energy_form, torque_form};

    fn pendulum_data(n: usize, dt: f64, f: impl Fn(f64) -> f64) -> Dataset<f64> {
        let mut d = Dataset::new(vec![AxisSpec::time(n, dt)]);
        d.insert("theta", Family::vertices(1), (0..n).map(|i| f(i as f64 * dt)).collect()).unwrap();
        d
    }

    #[test]
    fn torque_differential_cells() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let plan = lower(&n, &cs, &[AxisSpec::time(1000, 1e-3)], &BasisLibrary::standard(), &Interpretation::differential()).unwrap();
        assert_eq!(plan.constraints[0].rows(), 998);
        assert!(plan.constraints[0].is_balance());
    }

    #[test]
    fn torque_integral_cells() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let plan = lower(&n, &cs, &[AxisSpec::time(1000, 1e-3)], &BasisLibrary::standard(), &Interpretation::integral(25, 3)).unwrap();
        assert_eq!(plan.constraints[0].rows(), 1000 - 25);
    }

    #[test]
    fn energy_rows_are_secondary_instants() {
        let n = energy_form();
        let cs = extract_constraints(&n);
        let plan = lower(&n, &cs, &[AxisSpec::time(1000, 1e-3)], &BasisLibrary::standard(), &Interpretation::differential()).unwrap();
        assert_eq!(plan.constraints[0].rows(), 999);
        assert_eq!(plan.constraints[0].expansion.columns.len(), 10);
        assert!(!plan.constraints[0].is_balance());
    }

    #[test]
    fn executed_columns_match_hand_computation() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let dt = 0.01;
        let data = pendulum_data(50, dt, |t| (2.0 * t).sin());
        let plan = lower(&n, &cs, &data.axes, &BasisLibrary::standard(), &Interpretation::differential()).unwrap();
        let s = execute_constraint(&plan.constraints[0], &data).unwrap();
        let th: Vec<f64> = data.field("theta").unwrap().values.clone();
        // column 3: sin(theta) at T cell j = theta instant j + 1
        for r in 0..s.rows() {
            let j = s.columns[3].cell_index(r)[0];
            assert!((s.columns[3].values[r] - th[j + 1].sin()).abs() < 1e-14);
            // column 6: -(d/dt omega) with omega on intervals
            let w = |i: usize| (th[i + 1] - th[i]) / dt;
            let want = -(w(j + 1) - w(j)) / dt;
            assert!((s.columns[6].values[r] - want).abs() < 1e-9);
        }
    }

    #[test]
    fn explain_lists_stages() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let plan = lower(&n, &cs, &[AxisSpec::time(100, 0.1)], &BasisLibrary::standard(), &Interpretation::differential()).unwrap();
        let text = plan.explain().join("\n");
        assert!(text.contains("coboundary d/dt"));
        assert!(text.contains("basis expansion f2"));
        assert!(text.contains("98 cells"));
    }

    #[test]
    fn window_larger_than_data_is_reported() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let err = lower(&n, &cs, &[AxisSpec::time(20, 0.1)], &BasisLibrary::standard(), &Interpretation::integral(25, 3)).unwrap_err();
        assert!(matches!(err, InterpretError::WindowTooLarge { .. }));
    }

    #[test]
    fn telescoped_blocks_match_cellwise_sums_on_integer_data() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        let data = pendulum_data(60, 1.0, |t| ((t * 7.0) % 5.0).floor());
        let plan = lower(&n, &cs, &data.axes, &BasisLibrary::new(vec![crate::basis::Basis::Monomial(1)]).unwrap(), &Interpretation::differential()).unwrap();
        let cp = &plan.constraints[0];
        let s = execute_constraint(cp, &data).unwrap();
        let blocks = balance_columns(cp, &s, &[7]).unwrap();
        for (col, sums) in s.columns.iter().zip(&blocks) {
            for (b, sum) in sums.iter().enumerate() {
                let direct: f64 = col.values[b * 7..b * 7 + 7].iter().sum();
                assert_eq!(*sum, direct);
            }
        }
        let energy = energy_form();
        let ce = extract_constraints(&energy);
        let pe = lower(&energy, &ce, &data.axes, &BasisLibrary::standard(), &Interpretation::differential()).unwrap();
        let se = execute_constraint(&pe.constraints[0], &data).unwrap();
        assert!(matches!(balance_columns(&pe.constraints[0], &se, &[5]), Err(InterpretError::NotApplicable(_))));
    }
}
