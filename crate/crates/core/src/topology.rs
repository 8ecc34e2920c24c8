//! Staggered Cartesian cell complexes and their integer co-boundary operators.
//!
//! Cells are indexed per axis: along an axis whose complex has `m` vertices there are
//! `m` 0-cells and `m - 1` 1-cells. A multi-dimensional cell family is a per-axis
//! choice of cell dimension (`0` or `1`), and cells in a family are numbered in
//! row-major order with axes in declaration order. The secondary copy of an axis has
//! one vertex fewer than the primary and is shifted by half a spacing, so its vertices
//! sit at the midpoints of primary edges.
//!
//! In half-spacing units the center of cell `i` with dimension `k` on an axis is
//! `2i + k + s`, where `s` is 1 on secondary axes. Dual cells share that center.

use num_traits::Num;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("axis `{axis}` has extent {extent}; at least 2 vertices are required")]
    InvalidExtent { axis: String, extent: usize },
    #[error("axis `{axis}` has non-positive spacing {spacing}")]
    InvalidSpacing { axis: String, spacing: f64 },
    #[error("a context needs at least one axis")]
    NoAxes,
    #[error("axis {axis} is already saturated for input cell dimensions {dims:?}")]
    AxisSaturated { axis: usize, dims: Vec<u8> },
    #[error("cell dimensions {dims:?} do not match a {axes}-axis complex")]
    DimensionMismatch { dims: Vec<u8>, axes: usize },
    #[error("cell {index:?} is outside the family {dims:?} of its complex")]
    CellOutOfRange { dims: Vec<u8>, index: Vec<usize> },
    #[error("cell {index:?} has no registered dual in the partner complex")]
    NoDual { index: Vec<usize> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Primary,
    Secondary,
}

impl Orientation {
    pub fn flip(self) -> Self {
        match self {
            Orientation::Primary => Orientation::Secondary,
            Orientation::Secondary => Orientation::Primary,
        }
    }

    /// Half-spacing shift of this orientation's vertices.
    pub fn shift(self) -> i64 {
        match self {
            Orientation::Primary => 0,
            Orientation::Secondary => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Space,
    Time,
}

/// One axis of a Cartesian context. `extent` counts primary vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub extent: usize,
    pub spacing: f64,
    pub kind: AxisKind,
}

impl AxisSpec {
    pub fn new(name: impl Into<String>, extent: usize, spacing: f64, kind: AxisKind) -> Self {
        Self { name: name.into(), extent, spacing, kind }
    }

    pub fn space(name: impl Into<String>, extent: usize, spacing: f64) -> Self {
        Self::new(name, extent, spacing, AxisKind::Space)
    }

    pub fn time(extent: usize, spacing: f64) -> Self {
        Self::new("t", extent, spacing, AxisKind::Time)
    }

    fn check(&self) -> Result<(), TopologyError> {
        if self.extent < 2 {
            return Err(TopologyError::InvalidExtent { axis: self.name.clone(), extent: self.extent });
        }
        if !(self.spacing > 0.0) {
            return Err(TopologyError::InvalidSpacing { axis: self.name.clone(), spacing: self.spacing });
        }
        Ok(())
    }
}

/// A cell complex on a Cartesian grid with a fixed orientation per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellComplex {
    pub axes: Vec<AxisSpec>,
    pub orientations: Vec<Orientation>,
}

/// A cell: per-axis dimension and per-axis index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub dims: Vec<u8>,
    pub index: Vec<usize>,
}

impl CellComplex {
    pub fn new(axes: Vec<AxisSpec>, orientations: Vec<Orientation>) -> Result<Self, TopologyError> {
        if axes.is_empty() {
            return Err(TopologyError::NoAxes);
        }
        assert_eq!(axes.len(), orientations.len(), "one orientation per axis");
        for a in &axes {
            a.check()?;
        }
        Ok(Self { axes, orientations })
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    /// Orientation shared by every axis, if uniform.
    pub fn orientation(&self) -> Option<Orientation> {
        let first = *self.orientations.first()?;
        self.orientations.iter().all(|&o| o == first).then_some(first)
    }

    /// Number of vertices along `axis` in this complex.
    pub fn vertex_count(&self, axis: usize) -> usize {
        let n = self.axes[axis].extent;
        match self.orientations[axis] {
            Orientation::Primary => n,
            Orientation::Secondary => n - 1,
        }
    }

    /// Per-axis cell counts of the family with cell dimensions `dims`.
    pub fn family_shape(&self, dims: &[u8]) -> Vec<usize> {
        dims.iter()
            .enumerate()
            .map(|(a, &k)| self.vertex_count(a).saturating_sub(k as usize))
            .collect()
    }

    pub fn family_size(&self, dims: &[u8]) -> usize {
        self.family_shape(dims).iter().product()
    }

    /// Total number of cells with total dimension `d`.
    pub fn count_cells(&self, d: usize) -> usize {
        all_families(self.dimension())
            .into_iter()
            .filter(|f| f.iter().map(|&k| k as usize).sum::<usize>() == d)
            .map(|f| self.family_size(&f))
            .sum()
    }

    /// Physical coordinate of a cell's center along `axis`.
    pub fn center(&self, axis: usize, dim: u8, index: usize) -> f64 {
        let half = 2 * index as i64 + dim as i64 + self.orientations[axis].shift();
        half as f64 * 0.5 * self.axes[axis].spacing
    }

    /// Instants (0-cell centers) of a one-axis complex.
    pub fn vertex_positions(&self, axis: usize) -> Vec<f64> {
        (0..self.vertex_count(axis)).map(|i| self.center(axis, 0, i)).collect()
    }

    /// The partner complex with every axis orientation flipped.
    pub fn dual_complex(&self) -> CellComplex {
        CellComplex {
            axes: self.axes.clone(),
            orientations: self.orientations.iter().map(|o| o.flip()).collect(),
        }
    }

    pub fn contains(&self, cell: &Cell) -> bool {
        cell.dims.len() == self.dimension()
            && cell.dims.iter().all(|&k| k <= 1)
            && cell.index.len() == self.dimension()
            && self.family_shape(&cell.dims).iter().zip(&cell.index).all(|(&n, &i)| i < n)
    }

    /// Row-major flat index of a cell within its family.
    pub fn flat_index(&self, cell: &Cell) -> Result<usize, TopologyError> {
        if !self.contains(cell) {
            return Err(TopologyError::CellOutOfRange { dims: cell.dims.clone(), index: cell.index.clone() });
        }
        Ok(flatten(&self.family_shape(&cell.dims), &cell.index))
    }
}

pub(crate) fn flatten(shape: &[usize], index: &[usize]) -> usize {
    shape.iter().zip(index).fold(0, |acc, (&n, &i)| acc * n + i)
}

pub(crate) fn unflatten(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut idx = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        idx[a] = flat % shape[a];
        flat /= shape[a];
    }
    idx
}

/// All `2^n` per-axis dimension patterns.
pub fn all_families(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|a| ((mask >> (n - 1 - a)) & 1) as u8).collect())
        .collect()
}

/// Primary/secondary pair over the same axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPair {
    pub primary: CellComplex,
    pub secondary: CellComplex,
}

impl ComplexPair {
    /// Dual cell of `cell`, which lives in `from`. The result lives in `from.dual_complex()`.
    pub fn dual(&self, from: &CellComplex, cell: &Cell) -> Result<Cell, TopologyError> {
        dual_registration(from, cell)
    }
}

/// Builds the staggered primary/secondary pair for a 1D time axis.
pub fn build_staggered_time(n: usize, dt: f64) -> Result<ComplexPair, TopologyError> {
    let axis = AxisSpec::time(n, dt);
    axis.check()?;
    Ok(ComplexPair {
        primary: CellComplex::new(vec![axis.clone()], vec![Orientation::Primary])?,
        secondary: CellComplex::new(vec![axis], vec![Orientation::Secondary])?,
    })
}

/// Product of space axes and an optional time axis, holding the four
/// orientation combinations of (space, time).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductComplex {
    pub axes: Vec<AxisSpec>,
    pub space_axes: Vec<usize>,
    pub time_axis: Option<usize>,
}

impl ProductComplex {
    pub fn space_dim(&self) -> usize {
        self.space_axes.len()
    }

    pub fn time_dim(&self) -> usize {
        usize::from(self.time_axis.is_some())
    }

    /// The complex with the given group orientations. Orientation of an absent
    /// group is ignored.
    pub fn complex(&self, o_space: Orientation, o_time: Orientation) -> CellComplex {
        let orientations = self
            .axes
            .iter()
            .map(|a| match a.kind {
                AxisKind::Space => o_space,
                AxisKind::Time => o_time,
            })
            .collect();
        CellComplex { axes: self.axes.clone(), orientations }
    }

    /// The distinct orientation combinations: 4 with both groups, 2 with one.
    pub fn combinations(&self) -> Vec<(Orientation, Orientation)> {
        use Orientation::*;
        match (self.space_dim() > 0, self.time_axis.is_some()) {
            (true, true) => vec![(Primary, Primary), (Primary, Secondary), (Secondary, Primary), (Secondary, Secondary)],
            (true, false) => vec![(Primary, Primary), (Secondary, Primary)],
            (false, true) => vec![(Primary, Primary), (Primary, Secondary)],
            (false, false) => vec![],
        }
    }

    pub fn primary(&self) -> CellComplex {
        self.complex(Orientation::Primary, Orientation::Primary)
    }

    pub fn pair(&self) -> ComplexPair {
        let primary = self.primary();
        let secondary = primary.dual_complex();
        ComplexPair { primary, secondary }
    }
}

/// Builds the product context. Space axes come first, then time.
pub fn build_cartesian_product(
    space_axes: Vec<AxisSpec>,
    time_axis: Option<AxisSpec>,
) -> Result<ProductComplex, TopologyError> {
    if space_axes.is_empty() && time_axis.is_none() {
        return Err(TopologyError::NoAxes);
    }
    let mut axes = Vec::new();
    for mut a in space_axes {
        a.kind = AxisKind::Space;
        a.check()?;
        axes.push(a);
    }
    let space: Vec<usize> = (0..axes.len()).collect();
    let time = time_axis.map(|mut t| {
        t.kind = AxisKind::Time;
        axes.push(t);
        axes.len() - 1
    });
    for a in &axes {
        a.check()?;
    }
    Ok(ProductComplex { axes, space_axes: space, time_axis: time })
}

/// Sparse incidence operator from the `input_dims` family to the family with `axis`
/// incremented. Entries are stored unsigned (`-1` trailing, `+1` leading); the
/// homological sign for summing over axes is kept separately in `sign`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceOperator {
    pub input_dims: Vec<u8>,
    pub output_dims: Vec<u8>,
    pub axis: usize,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    /// `(row, col, value)` with rows indexing output cells.
    pub entries: Vec<(usize, usize, i8)>,
    /// `(-1)^(sum of input dims on axes before `axis`)`.
    pub sign: i8,
}

impl IncidenceOperator {
    /// Operator acting on a block of cells with `input_shape` cells per axis in the
    /// family `input_dims`.
    pub fn for_block(input_shape: &[usize], input_dims: &[u8], axis: usize) -> Result<Self, TopologyError> {
        if input_dims.len() != input_shape.len() || axis >= input_dims.len() {
            return Err(TopologyError::DimensionMismatch { dims: input_dims.to_vec(), axes: input_shape.len() });
        }
        if input_dims[axis] != 0 {
            return Err(TopologyError::AxisSaturated { axis, dims: input_dims.to_vec() });
        }
        let mut output_dims = input_dims.to_vec();
        output_dims[axis] = 1;
        let mut output_shape = input_shape.to_vec();
        output_shape[axis] = input_shape[axis].saturating_sub(1);
        let rows: usize = output_shape.iter().product();
        let mut entries = Vec::with_capacity(2 * rows);
        for row in 0..rows {
            let idx = unflatten(&output_shape, row);
            let trailing = flatten(input_shape, &idx);
            let mut lead = idx.clone();
            lead[axis] += 1;
            let leading = flatten(input_shape, &lead);
            entries.push((row, trailing, -1));
            entries.push((row, leading, 1));
        }
        let before: u32 = input_dims[..axis].iter().map(|&k| k as u32).sum();
        let sign = if before % 2 == 0 { 1 } else { -1 };
        Ok(Self {
            input_dims: input_dims.to_vec(),
            output_dims,
            axis,
            input_shape: input_shape.to_vec(),
            output_shape,
            entries,
            sign,
        })
    }

    pub fn rows(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn cols(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Raw incidence sum (no homological sign, no metric).
    pub fn apply<T: Num + Copy>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols(), "co-chain length does not match operator input");
        let mut y = vec![T::zero(); self.rows()];
        for &(r, c, v) in &self.entries {
            y[r] = if v > 0 { y[r] + x[c] } else { y[r] - x[c] };
        }
        y
    }

    /// Incidence sum multiplied by the homological sign.
    pub fn apply_signed<T: Num + Copy>(&self, x: &[T]) -> Vec<T> {
        let y = self.apply(x);
        if self.sign > 0 {
            y
        } else {
            y.into_iter().map(|v| T::zero() - v).collect()
        }
    }

    /// Dense `rows x cols` matrix of signed entries (`sign * entry`).
    pub fn to_dense_signed(&self) -> Vec<Vec<i8>> {
        let mut m = vec![vec![0i8; self.cols()]; self.rows()];
        for &(r, c, v) in &self.entries {
            m[r][c] += v * self.sign;
        }
        m
    }
}

/// Co-boundary along one axis on a whole complex.
pub fn coboundary(complex: &CellComplex, input_dims: &[u8], axis: usize) -> Result<IncidenceOperator, TopologyError> {
    if input_dims.len() != complex.dimension() {
        return Err(TopologyError::DimensionMismatch { dims: input_dims.to_vec(), axes: complex.dimension() });
    }
    IncidenceOperator::for_block(&complex.family_shape(input_dims), input_dims, axis)
}

/// Full co-boundary of a co-chain on the family `dims`: one signed output co-chain
/// per unsaturated axis, keyed by the output family.
pub fn total_coboundary<T: Num + Copy>(
    complex: &CellComplex,
    dims: &[u8],
    values: &[T],
) -> Result<Vec<(Vec<u8>, Vec<T>)>, TopologyError> {
    let mut out = Vec::new();
    for axis in 0..dims.len() {
        if dims[axis] == 0 {
            let op = coboundary(complex, dims, axis)?;
            out.push((op.output_dims.clone(), op.apply_signed(values)));
        }
    }
    Ok(out)
}

/// Registers `cell` of `complex` with its dual cell in the fully flipped complex.
/// Boundary vertices of a primary axis have no dual in the (shrunk) secondary complex.
pub fn dual_registration(complex: &CellComplex, cell: &Cell) -> Result<Cell, TopologyError> {
    if !complex.contains(cell) {
        return Err(TopologyError::CellOutOfRange { dims: cell.dims.clone(), index: cell.index.clone() });
    }
    let partner = complex.dual_complex();
    let mut dims = Vec::with_capacity(cell.dims.len());
    let mut index = Vec::with_capacity(cell.dims.len());
    for a in 0..cell.dims.len() {
        let k = cell.dims[a] as i64;
        let s = complex.orientations[a].shift();
        let i = cell.index[a] as i64 + k + s - 1;
        if i < 0 {
            return Err(TopologyError::NoDual { index: cell.index.clone() });
        }
        dims.push(1 - cell.dims[a]);
        index.push(i as usize);
    }
    let dual = Cell { dims, index };
    if !partner.contains(&dual) {
        return Err(TopologyError::NoDual { index: cell.index.clone() });
    }
    Ok(dual)
}

/// Whether each secondary co-boundary is a signed transpose of the primary one, with rows
/// and columns matched through dual registration.
pub fn transpose_duality_holds(complex: &CellComplex) -> bool {
    let partner = complex.dual_complex();
    let n = complex.dimension();
    for dims in all_families(n) {
        for axis in 0..n {
            if dims[axis] != 0 {
                continue;
            }
            let prim = coboundary(complex, &dims, axis).unwrap().to_dense_signed();
            let mut out_dims = dims.clone();
            out_dims[axis] = 1;
            // secondary operator from dual(out_dims) to dual(dims)
            let sec_in: Vec<u8> = out_dims.iter().map(|k| 1 - k).collect();
            let sec = coboundary(&partner, &sec_in, axis).unwrap();
            let sec_dense = sec.to_dense_signed();
            let out_shape = sec.output_shape.clone();
            let in_shape = sec.input_shape.clone();
            let global = {
                // global sign of the pairing depends only on the family and axis
                let mut g = None;
                for r in 0..sec.rows() {
                    for c in 0..sec.cols() {
                        let rc = Cell { dims: sec.output_dims.clone(), index: unflatten(&out_shape, r) };
                        let cc = Cell { dims: sec_in.clone(), index: unflatten(&in_shape, c) };
                        let pr = dual_registration(&partner, &rc).unwrap();
                        let pc = dual_registration(&partner, &cc).unwrap();
                        let pi = complex.flat_index(&pc).unwrap();
                        let pj = complex.flat_index(&pr).unwrap();
                        let want = prim[pi][pj];
                        let got = sec_dense[r][c];
                        if want == 0 && got == 0 {
                            continue;
                        }
                        if want == 0 || got == 0 {
                            return false;
                        }
                        let s = got / want;
                        match g {
                            None => g = Some(s),
                            Some(prev) if prev != s => return false,
                            _ => {}
                        }
                    }
                }
                g
            };
            if global.is_none() && sec.rows() > 0 && sec.cols() > 1 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn staggered_time_counts_and_positions() {
        let pair = build_staggered_time(4, 0.1).unwrap();
        assert_eq!(pair.primary.family_size(&[0]), 4);
        assert_eq!(pair.primary.family_size(&[1]), 3);
        assert_eq!(pair.secondary.family_size(&[0]), 3);
        assert_eq!(pair.secondary.family_size(&[1]), 2);
        let p: Vec<f64> = pair.primary.vertex_positions(0);
        let s: Vec<f64> = pair.secondary.vertex_positions(0);
        for (got, want) in p.iter().zip([0.0, 0.1, 0.2, 0.3]) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in s.iter().zip([0.05, 0.15, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_staggered_time() {
        let pair = build_staggered_time(2, 1.0).unwrap();
        assert_eq!(pair.primary.family_size(&[0]), 2);
        assert_eq!(pair.primary.family_size(&[1]), 1);
        assert_eq!(pair.secondary.family_size(&[0]), 1);
        assert_eq!(pair.secondary.family_size(&[1]), 0);
    }

    #[test]
    fn staggered_time_rejects_single_instant() {
        assert!(matches!(build_staggered_time(1, 0.1), Err(TopologyError::InvalidExtent { .. })));
    }

    #[test]
    fn dual_of_primary_interval_is_secondary_midpoint() {
        let pair = build_staggered_time(4, 0.1).unwrap();
        let interval = Cell { dims: vec![1], index: vec![1] }; // (0.1, 0.2)
        let d = dual_registration(&pair.primary, &interval).unwrap();
        assert_eq!(d.dims, vec![0]);
        assert!((pair.secondary.center(0, 0, d.index[0]) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn dual_of_primary_instant_is_centered_secondary_interval() {
        let pair = build_staggered_time(5, 0.1).unwrap();
        let instant = Cell { dims: vec![0], index: vec![2] }; // t = 0.2
        let d = dual_registration(&pair.primary, &instant).unwrap();
        assert_eq!(d.dims, vec![1]);
        // spans (0.15, 0.25)
        let lo = pair.secondary.center(0, 0, d.index[0]);
        let hi = pair.secondary.center(0, 0, d.index[0] + 1);
        assert!((lo - 0.15).abs() < 1e-12 && (hi - 0.25).abs() < 1e-12);
        // boundary instants have no dual in the shrunk secondary complex
        let first = Cell { dims: vec![0], index: vec![0] };
        assert!(matches!(dual_registration(&pair.primary, &first), Err(TopologyError::NoDual { .. })));
    }

    #[test]
    fn spatial_edge_dual_crosses_at_midpoint() {
        let ctx = build_cartesian_product(vec![AxisSpec::space("x", 5, 1.0), AxisSpec::space("y", 5, 1.0)], None).unwrap();
        let pair = ctx.pair();
        let edge = Cell { dims: vec![1, 0], index: vec![1, 2] };
        let d = dual_registration(&pair.primary, &edge).unwrap();
        assert_eq!(d.dims, vec![0, 1]);
        for a in 0..2 {
            let c0 = pair.primary.center(a, edge.dims[a], edge.index[a]);
            let c1 = pair.secondary.center(a, d.dims[a], d.index[a]);
            assert!((c0 - c1).abs() < 1e-12);
        }
    }

    #[test]
    fn involution_on_every_secondary_cell_of_5x5_grid() {
        let ctx = build_cartesian_product(vec![AxisSpec::space("x", 5, 1.0), AxisSpec::space("y", 5, 1.0)], None).unwrap();
        let pair = ctx.pair();
        let mut primary_hits = 0;
        for fam in all_families(2) {
            let shape = pair.secondary.family_shape(&fam);
            for flat in 0..shape.iter().product() {
                let cell = Cell { dims: fam.clone(), index: unflatten(&shape, flat) };
                let d = dual_registration(&pair.secondary, &cell).unwrap();
                let back = dual_registration(&pair.primary, &d).unwrap();
                assert_eq!(back, cell);
                primary_hits += 1;
            }
        }
        // every secondary cell is hit once; primary cells with a dual are exactly these
        let mut registered = 0;
        for fam in all_families(2) {
            let shape = pair.primary.family_shape(&fam);
            for flat in 0..shape.iter().product() {
                let cell = Cell { dims: fam.clone(), index: unflatten(&shape, flat) };
                if let Ok(d) = dual_registration(&pair.primary, &cell) {
                    assert_eq!(dual_registration(&pair.secondary, &d).unwrap(), cell);
                    registered += 1;
                }
            }
        }
        assert_eq!(primary_hits, registered);
    }

    #[test]
    fn dual_out_of_range_is_index_error() {
        let pair = build_staggered_time(4, 0.1).unwrap();
        let bad = Cell { dims: vec![1], index: vec![7] };
        assert!(matches!(dual_registration(&pair.primary, &bad), Err(TopologyError::CellOutOfRange { .. })));
    }

    #[test]
    fn product_counts() {
        let st = build_cartesian_product(vec![AxisSpec::space("x", 5, 0.1)], Some(AxisSpec::time(5, 0.1))).unwrap();
        assert_eq!(st.primary().family_size(&[0, 0]), 25);
        assert_eq!(st.combinations().len(), 4);

        let grid = build_cartesian_product(vec![AxisSpec::space("x", 4, 1.0), AxisSpec::space("y", 4, 1.0)], None).unwrap();
        let p = grid.primary();
        assert_eq!(p.count_cells(0), 16);
        assert_eq!(p.count_cells(1), 24);
        assert_eq!(p.count_cells(2), 9);
        assert_eq!(grid.combinations().len(), 2);
    }

    #[test]
    fn time_only_product_degenerates_to_staggered_time() {
        let ctx = build_cartesian_product(vec![], Some(AxisSpec::time(3, 0.5))).unwrap();
        let pair = build_staggered_time(3, 0.5).unwrap();
        assert_eq!(ctx.complex(Orientation::Primary, Orientation::Primary), pair.primary);
        assert_eq!(ctx.complex(Orientation::Primary, Orientation::Secondary), pair.secondary);
    }

    #[test]
    fn product_requires_axes() {
        assert_eq!(build_cartesian_product(vec![], None), Err(TopologyError::NoAxes));
    }

    #[test]
    fn coboundary_is_forward_difference() {
        let pair = build_staggered_time(3, 0.1).unwrap();
        let op = coboundary(&pair.primary, &[0], 0).unwrap();
        assert_eq!(op.apply(&[2i64, 7, 4]), vec![5, -3]);
        let c = coboundary(&build_staggered_time(4, 0.1).unwrap().primary, &[0], 0).unwrap();
        assert_eq!(c.apply(&[5i64, 5, 5, 5]), vec![0, 0, 0]);
    }

    #[test]
    fn coboundary_rejects_saturated_axis() {
        let pair = build_staggered_time(3, 0.1).unwrap();
        assert!(matches!(coboundary(&pair.primary, &[1], 0), Err(TopologyError::AxisSaturated { .. })));
    }

    #[test]
    fn rows_have_two_opposite_entries() {
        let grid = build_cartesian_product(vec![AxisSpec::space("x", 4, 1.0), AxisSpec::space("y", 3, 1.0)], None).unwrap();
        let op = coboundary(&grid.primary(), &[1, 0], 1).unwrap();
        let mut per_row = vec![Vec::new(); op.rows()];
        for &(r, c, v) in &op.entries {
            per_row[r].push((c, v));
        }
        for row in per_row {
            assert_eq!(row.len(), 2);
            let (lo, hi) = (row.iter().min().unwrap(), row.iter().max().unwrap());
            assert_eq!((lo.1, hi.1), (-1, 1));
        }
        assert_eq!(op.sign, -1);
    }

    #[test]
    fn curl_of_gradient_vanishes_on_2d_grid() {
        let grid = build_cartesian_product(vec![AxisSpec::space("x", 4, 1.0), AxisSpec::space("y", 5, 1.0)], None).unwrap();
        let p = grid.primary();
        let f: Vec<i64> = (0..20).map(|i| (i * i * 7 + 3) % 11 - 5).collect();
        let grad = total_coboundary(&p, &[0, 0], &f).unwrap();
        let mut curl = vec![0i64; p.family_size(&[1, 1])];
        for (dims, g) in grad {
            for (_, c) in total_coboundary(&p, &dims, &g).unwrap() {
                for (acc, v) in curl.iter_mut().zip(c) {
                    *acc += v;
                }
            }
        }
        assert!(curl.iter().all(|&v| v == 0));
    }

    #[test]
    fn transpose_duality_in_time_and_2d() {
        assert!(transpose_duality_holds(&build_staggered_time(6, 0.1).unwrap().primary));
        let grid = build_cartesian_product(vec![AxisSpec::space("x", 4, 1.0), AxisSpec::space("y", 5, 1.0)], None).unwrap();
        assert!(transpose_duality_holds(&grid.primary()));
    }

    proptest! {
        #[test]
        fn cell_counts_match_tensor_product(nx in 2usize..10, ny in 2usize..10, nt in 2usize..10) {
            let ctx = build_cartesian_product(
                vec![AxisSpec::space("x", nx, 1.0), AxisSpec::space("y", ny, 1.0)],
                Some(AxisSpec::time(nt, 1.0)),
            ).unwrap();
            for (os, ot) in ctx.combinations() {
                let c = ctx.complex(os, ot);
                for fam in all_families(3) {
                    let expect: usize = (0..3).map(|a| c.vertex_count(a) - fam[a] as usize).product();
                    prop_assert_eq!(c.family_size(&fam), expect);
                }
                // edges along each axis: n - 1
                prop_assert_eq!(c.family_shape(&[1, 0, 0])[0], c.vertex_count(0) - 1);
            }
        }

        #[test]
        fn telescoping_over_contiguous_blocks(n in 3usize..12, lo in 0usize..5, len in 1usize..6, seed in 0i64..1000) {
            // 1D: sum of δ over a contiguous run of 1-cells equals the boundary difference.
            let c = build_staggered_time(n, 1.0).unwrap().primary;
            let op = coboundary(&c, &[0], 0).unwrap();
            let x: Vec<i64> = (0..n as i64).map(|i| (i * 31 + seed) % 17 - 8).collect();
            let y = op.apply(&x);
            let lo = lo.min(y.len() - 1);
            let hi = (lo + len).min(y.len());
            let s: i64 = y[lo..hi].iter().sum();
            prop_assert_eq!(s, x[hi] - x[lo]);
        }
    }
}
