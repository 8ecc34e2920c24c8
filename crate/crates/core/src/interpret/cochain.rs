//! Co-chain values on rectangular blocks of one cell family, and the linear
//! one-axis passes that move them between families.

use serde::{Deserialize, Serialize};

use super::stencil::{lagrange_weights, savgol_weights, FitEval};
use super::InterpretError;
use crate::scalar::Scalar;
use crate::topology::{AxisSpec, Orientation};

/// Per-axis orientation and cell dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Family {
    pub orientations: Vec<Orientation>,
    pub dims: Vec<u8>,
}

fn shift(o: Orientation) -> usize {
    match o {
        Orientation::Primary => 0,
        Orientation::Secondary => 1,
    }
}

impl Family {
    pub fn new(orientations: Vec<Orientation>, dims: Vec<u8>) -> Self {
        Self { orientations, dims }
    }

    /// Primary vertices on every axis.
    pub fn vertices(n_axes: usize) -> Self {
        Self { orientations: vec![Orientation::Primary; n_axes], dims: vec![0; n_axes] }
    }

    pub fn n_axes(&self) -> usize {
        self.dims.len()
    }

    /// `k + s` on an axis: the parity part of the half-unit cell center.
    pub fn phase(&self, axis: usize) -> usize {
        self.dims[axis] as usize + shift(self.orientations[axis])
    }

    /// Cells of this family along an axis with `extent` primary vertices.
    pub fn count(&self, axis: usize, extent: usize) -> usize {
        extent.saturating_sub(self.phase(axis))
    }

    /// Cell center of index `i` in half-spacing units.
    pub fn half_position(&self, axis: usize, i: usize) -> usize {
        2 * i + self.phase(axis)
    }

    pub fn with_axis(&self, axis: usize, o: Orientation, k: u8) -> Self {
        let mut f = self.clone();
        f.orientations[axis] = o;
        f.dims[axis] = k;
        f
    }

    /// `(-1)^(sum of dims on axes before `axis`)`.
    pub fn homological_sign(&self, axis: usize) -> i8 {
        if self.dims[..axis].iter().map(|&k| k as u32).sum::<u32>() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn label(&self, axes: &[AxisSpec]) -> String {
        self.orientations
            .iter()
            .zip(&self.dims)
            .zip(axes)
            .map(|((o, k), a)| format!("{}:{}{}", a.name, if *o == Orientation::Primary { 'P' } else { 'S' }, k))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Values of a co-chain on a rectangular block `start..start+len` of one family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedCochain<T> {
    pub family: Family,
    pub axes: Vec<AxisSpec>,
    pub start: Vec<usize>,
    pub len: Vec<usize>,
    /// Row-major over the block, last axis fastest.
    pub values: Vec<T>,
    pub provenance: Vec<String>,
}

/// Lagrange or midpoint dual sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "degree", rename_all = "lowercase")]
pub enum DualSampling {
    Linear,
    Polynomial(usize),
}

impl Default for DualSampling {
    fn default() -> Self {
        DualSampling::Linear
    }
}

/// Quantity extracted from a local polynomial fit along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SmoothOp {
    Value,
    /// Increment of the fit across the target cell, divided by the spacing.
    CellDifference,
    /// Analytic derivative of the given order.
    Derivative(u32),
}

/// Output block `(start, len)` along `axis` of a stencil of `width` points, `left` of
/// them below the base cell, mapping `from` to `to`. Empty ranges report `len = 0`.
#[allow(clippy::too_many_arguments)]
pub fn pass_range(
    from: &Family,
    to: &Family,
    axis: usize,
    in_start: usize,
    in_len: usize,
    extent: usize,
    width: usize,
    left: usize,
) -> (usize, usize) {
    let d = to.phase(axis) as i64 - from.phase(axis) as i64;
    let fd = d.div_euclid(2);
    let family_len = to.count(axis, extent) as i64;
    let j_min = (in_start as i64 + left as i64 - fd).max(0);
    let j_max = (in_start as i64 + in_len as i64 - width as i64 + left as i64 - fd).min(family_len - 1);
    if j_max >= j_min {
        (j_min as usize, (j_max - j_min + 1) as usize)
    } else {
        (in_start, 0)
    }
}

impl<T: Scalar> EvaluatedCochain<T> {
    /// Co-chain covering a whole family.
    pub fn full(family: Family, axes: Vec<AxisSpec>, values: Vec<T>, name: &str) -> Result<Self, InterpretError> {
        if family.n_axes() != axes.len() {
            return Err(InterpretError::FamilyMismatch(format!("{} axes in family, {} in grid", family.n_axes(), axes.len())));
        }
        let len: Vec<usize> = (0..axes.len()).map(|a| family.count(a, axes[a].extent)).collect();
        let n: usize = len.iter().product();
        if values.len() != n {
            return Err(InterpretError::FamilyMismatch(format!("{name}: {} values for {n} cells", values.len())));
        }
        Ok(Self { family, axes, start: vec![0; len.len()], len, values, provenance: vec![format!("load {name}")] })
    }

    /// Co-chain sampled from a function of the cell-center coordinates.
    pub fn from_fn(family: Family, axes: Vec<AxisSpec>, name: &str, f: impl Fn(&[f64]) -> T) -> Self {
        let len: Vec<usize> = (0..axes.len()).map(|a| family.count(a, axes[a].extent)).collect();
        let mut c = Self {
            family,
            axes,
            start: vec![0; len.len()],
            len,
            values: Vec::new(),
            provenance: vec![format!("load {name}")],
        };
        c.values = (0..c.cell_count()).map(|r| f(&c.center(r))).collect();
        c
    }

    pub fn cell_count(&self) -> usize {
        self.len.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_count() == 0
    }

    fn strides(len: &[usize]) -> Vec<usize> {
        let mut s = vec![1; len.len()];
        for a in (0..len.len().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * len[a + 1];
        }
        s
    }

    /// Global cell index of a block row.
    pub fn cell_index(&self, row: usize) -> Vec<usize> {
        let mut rem = row;
        let strides = Self::strides(&self.len);
        strides.iter().zip(&self.start).map(|(&s, &st)| {
            let i = rem / s;
            rem %= s;
            st + i
        })
        .collect()
    }

    /// Physical cell-center coordinates of a block row.
    pub fn center(&self, row: usize) -> Vec<f64> {
        self.cell_index(row)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.family.half_position(a, i) as f64 * 0.5 * self.axes[a].spacing)
            .collect()
    }

    /// Value at a global cell index, if inside the block.
    pub fn get(&self, index: &[usize]) -> Option<T> {
        let strides = Self::strides(&self.len);
        let mut flat = 0;
        for a in 0..index.len() {
            if index[a] < self.start[a] || index[a] >= self.start[a] + self.len[a] {
                return None;
            }
            flat += (index[a] - self.start[a]) * strides[a];
        }
        Some(self.values[flat])
    }

    pub fn map(&self, label: &str, f: impl Fn(T) -> T) -> Self {
        let mut c = self.clone();
        c.values.iter_mut().for_each(|v| *v = f(*v));
        c.provenance.push(label.to_string());
        c
    }

    /// Restricts to a sub-block given in global indices.
    pub fn crop(&self, start: &[usize], len: &[usize]) -> Result<Self, InterpretError> {
        for a in 0..start.len() {
            if start[a] < self.start[a] || start[a] + len[a] > self.start[a] + self.len[a] {
                return Err(InterpretError::FamilyMismatch(format!("crop outside the block on axis {a}")));
            }
        }
        let n: usize = len.iter().product();
        let mut values = Vec::with_capacity(n);
        let out_strides = Self::strides(len);
        let mut idx = vec![0; start.len()];
        for r in 0..n {
            let mut rem = r;
            for a in 0..start.len() {
                idx[a] = start[a] + rem / out_strides[a];
                rem %= out_strides[a];
            }
            values.push(self.get(&idx).expect("inside block"));
        }
        let mut c = self.clone();
        c.start = start.to_vec();
        c.len = len.to_vec();
        c.values = values;
        Ok(c)
    }

    /// Generic one-axis stencil. Output cell `j` of the target family reads input
    /// cells `base(j) - left .. base(j) - left + weights.len()` where `base(j)` is the
    /// input cell at or just below the target center.
    pub fn stencil_pass(
        &self,
        axis: usize,
        to_orientation: Orientation,
        to_dim: u8,
        weights: &[T],
        left: usize,
        label: String,
    ) -> Result<Self, InterpretError> {
        let target = self.family.with_axis(axis, to_orientation, to_dim);
        let d = target.phase(axis) as i64 - self.family.phase(axis) as i64;
        let fd = d.div_euclid(2);
        let in_start = self.start[axis] as i64;
        let (j_min, out_len) =
            pass_range(&self.family, &target, axis, self.start[axis], self.len[axis], self.axes[axis].extent, weights.len(), left);
        let j_min = j_min as i64;
        let mut len = self.len.clone();
        len[axis] = out_len;
        let mut start = self.start.clone();
        start[axis] = j_min as usize;
        let n_out: usize = len.iter().product();
        let in_strides = Self::strides(&self.len);
        let out_strides = Self::strides(&len);
        let mut values = Vec::with_capacity(n_out);
        for r in 0..n_out {
            // decompose output row, translate to input row offset on other axes
            let mut rem = r;
            let mut base_flat = 0usize;
            let mut j = 0i64;
            for a in 0..len.len() {
                let i = rem / out_strides[a];
                rem %= out_strides[a];
                if a == axis {
                    j = start[a] as i64 + i as i64;
                } else {
                    base_flat += i * in_strides[a];
                }
            }
            let first = j + fd - left as i64 - in_start;
            let mut acc = T::zero();
            for (t, &w) in weights.iter().enumerate() {
                let pos = (first + t as i64) as usize;
                acc = acc + w * self.values[base_flat + pos * in_strides[axis]];
            }
            values.push(acc);
        }
        let mut provenance = self.provenance.clone();
        provenance.push(label);
        Ok(Self { family: target, axes: self.axes.clone(), start, len, values, provenance })
    }

    /// Co-boundary along one axis, divided by the spacing when `metric` is set.
    pub fn apply_coboundary(&self, axis: usize, metric: bool) -> Result<Self, InterpretError> {
        if self.family.dims[axis] != 0 {
            return Err(InterpretError::AxisSaturated(axis));
        }
        let sign = T::lit(self.family.homological_sign(axis) as f64);
        let h = if metric { T::lit(self.axes[axis].spacing) } else { T::one() };
        let w = [-sign / h, sign / h];
        let name = &self.axes[axis].name;
        self.stencil_pass(axis, self.family.orientations[axis], 1, &w, 0, format!("coboundary d/d{name}"))
    }

    /// Moves values to another family on one axis by interpolation between cell centers.
    pub fn resample_axis(&self, axis: usize, to: Orientation, to_dim: u8, method: DualSampling) -> Result<Self, InterpretError> {
        let target = self.family.with_axis(axis, to, to_dim);
        let d = target.phase(axis) as i64 - self.family.phase(axis) as i64;
        let name = &self.axes[axis].name;
        if d.rem_euclid(2) == 0 {
            return self.stencil_pass(axis, to, to_dim, &[T::one()], 0, format!("reindex {name}"));
        }
        match method {
            DualSampling::Linear => {
                let half = T::lit(0.5);
                self.stencil_pass(axis, to, to_dim, &[half, half], 0, format!("midpoint {name}"))
            }
            DualSampling::Polynomial(deg) => {
                let left = deg / 2;
                let nodes: Vec<f64> = (0..=deg).map(|t| t as f64 - left as f64).collect();
                let w: Vec<T> = lagrange_weights(&nodes, 0.5).into_iter().map(T::lit).collect();
                self.stencil_pass(axis, to, to_dim, &w, left, format!("lagrange{deg} {name}"))
            }
        }
    }

    /// Samples on another family, axis by axis. Extrapolated cells are dropped.
    pub fn dual_sample(&self, target: &Family, method: DualSampling) -> Result<Self, InterpretError> {
        let mut c = self.clone();
        for a in 0..target.n_axes() {
            if c.family.orientations[a] != target.orientations[a] || c.family.dims[a] != target.dims[a] {
                c = c.resample_axis(a, target.orientations[a], target.dims[a], method)?;
            }
        }
        Ok(c)
    }

    /// Local polynomial fit along one axis, evaluated at the target family's centers.
    pub fn smooth_axis(
        &self,
        axis: usize,
        to: Orientation,
        to_dim: u8,
        window: usize,
        degree: usize,
        op: SmoothOp,
    ) -> Result<Self, InterpretError> {
        if window > self.len[axis] {
            return Err(InterpretError::WindowTooLarge { axis: self.axes[axis].name.clone(), window, extent: self.len[axis] });
        }
        let target = self.family.with_axis(axis, to, to_dim);
        let d = target.phase(axis) as i64 - self.family.phase(axis) as i64;
        let offset = if d.rem_euclid(2) == 1 { 0.5 } else { 0.0 };
        let h = self.axes[axis].spacing;
        let (eval, scale) = match op {
            SmoothOp::Value => (FitEval::Value { offset }, 1.0),
            SmoothOp::CellDifference => (FitEval::CellDifference { offset }, 1.0 / h),
            SmoothOp::Derivative(r) => (FitEval::Derivative { order: r, offset }, h.powi(-(r as i32))),
        };
        let w = savgol_weights(window, degree, eval).ok_or(InterpretError::BadWindow { window, degree })?;
        let w: Vec<T> = w.into_iter().map(|x| T::lit(x * scale)).collect();
        let name = &self.axes[axis].name;
        self.stencil_pass(axis, to, to_dim, &w, (window - 1) / 2, format!("smooth {name} w{window} p{degree} {op:?}"))
    }

    /// Separable local polynomial smoothing in place, with optional analytic derivatives.
    pub fn smooth_window(&self, window: &[usize], degree: &[usize], derivative: &[u32]) -> Result<Self, InterpretError> {
        let mut c = self.clone();
        for a in 0..self.family.n_axes() {
            let op = if derivative[a] == 0 { SmoothOp::Value } else { SmoothOp::Derivative(derivative[a]) };
            c = c.smooth_axis(a, self.family.orientations[a], self.family.dims[a], window[a], degree[a], op)?;
        }
        Ok(c)
    }
}
