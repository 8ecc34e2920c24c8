//! Typed variables, relations and interaction networks (I-nets).
//!
//! A variable lives in one co-chain sequence (a *complex*): a measured domain or a
//! latent one, with a fixed orientation per axis. Within a complex a variable is
//! identified by its per-axis cell dimensions, so every complex holds at most one
//! variable per cell family. Topological relations move one step up a complex along
//! one axis; phenomenological relations connect complexes in place; algebraic
//! relations are same-type loops used for source/sink bindings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{AxisKind, Orientation};

/// Measurement type of a physical variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FormType {
    pub d_space: u8,
    pub d_time: u8,
    pub o_space: Orientation,
    pub o_time: Orientation,
    #[serde(default)]
    pub tensor_shape: Vec<usize>,
    #[serde(default)]
    pub units: BTreeMap<String, i32>,
}

impl FormType {
    pub fn scalar(d_space: u8, d_time: u8, o_space: Orientation, o_time: Orientation) -> Self {
        Self { d_space, d_time, o_space, o_time, tensor_shape: Vec::new(), units: BTreeMap::new() }
    }

    /// Dual type in a `space_dim + time_dim` product. Orientation of an absent group
    /// stays primary.
    pub fn dual(&self, space_dim: u8, time_dim: u8) -> FormType {
        let flip = |present: bool, o: Orientation| if present { o.flip() } else { o };
        FormType {
            d_space: space_dim - self.d_space,
            d_time: time_dim - self.d_time,
            o_space: flip(space_dim > 0, self.o_space),
            o_time: flip(time_dim > 0, self.o_time),
            tensor_shape: self.tensor_shape.clone(),
            units: self.units.clone(),
        }
    }

    /// Equality of the cell type, ignoring units and tensor shape.
    pub fn same_cells(&self, other: &FormType) -> bool {
        (self.d_space, self.d_time, self.o_space, self.o_time) == (other.d_space, other.d_time, other.o_space, other.o_time)
    }
}

impl fmt::Display for FormType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = |o: Orientation| match o {
            Orientation::Primary => 'P',
            Orientation::Secondary => 'S',
        };
        write!(f, "({}{},{}{})", self.d_space, o(self.o_space), self.d_time, o(self.o_time))
    }
}

/// Every scalar form type of a `d1 + d2` product.
pub fn enumerate_form_types(d1: u8, d2: u8) -> Vec<FormType> {
    use Orientation::*;
    let space_orients: &[Orientation] = if d1 > 0 { &[Primary, Secondary] } else { &[Primary] };
    let time_orients: &[Orientation] = if d2 > 0 { &[Primary, Secondary] } else { &[Primary] };
    let mut out = Vec::new();
    for ds in 0..=d1 {
        for dt in 0..=d2 {
            for &os in space_orients {
                for &ot in time_orients {
                    out.push(FormType::scalar(ds, dt, os, ot));
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for RelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Measured,
    Derived,
    Latent,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// The sequence rooted at the named measured variable.
    Measured(String),
    Latent(u32),
}

/// A co-chain sequence: its domain and per-axis orientation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComplexId {
    pub domain: Domain,
    pub orientations: Vec<Orientation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    #[serde(default)]
    pub name: Option<String>,
    pub kind: VarKind,
    pub complex: ComplexId,
    pub cell_dims: Vec<u8>,
    pub form: FormType,
    /// Data binding of a measured variable.
    #[serde(default)]
    pub binding: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RelationKind {
    Topological { axis: usize },
    Phenomenological,
    Algebraic { tag: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub id: RelId,
    #[serde(flatten)]
    pub kind: RelationKind,
    pub src: VarId,
    pub dst: VarId,
}

/// Axis of the symbolic context.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AxisRef {
    pub name: String,
    pub kind: AxisKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InetError {
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
    #[error("axis {axis} is saturated for variable {var}")]
    AxisSaturated { var: VarId, axis: usize },
    #[error("cell dimensions {dims:?} do not fit a {axes}-axis context")]
    BadDims { dims: Vec<u8>, axes: usize },
    #[error("variable slot {slot} already holds {existing}")]
    SlotOccupied { slot: String, existing: VarId },
    #[error("relation {src} -> {dst} already present")]
    DuplicateRelation { src: VarId, dst: VarId },
    #[error("measured variable name `{0}` is already in use")]
    DuplicateMeasured(String),
}

/// Violation reported by [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeError {
    pub relation: Option<RelId>,
    pub variable: Option<VarId>,
    pub reason: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.relation, self.variable) {
            (Some(r), _) => write!(f, "{r}: {}", self.reason),
            (None, Some(v)) => write!(f, "{v}: {}", self.reason),
            _ => f.write_str(&self.reason),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Phenomenological links whose endpoints are not dual cells.
    pub diagonal: Vec<RelId>,
    /// Unit mismatches across topological links (never fatal).
    pub unit_warnings: Vec<String>,
}

/// Interaction network: typed variables and relations over a symbolic context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct INet {
    pub axes: Vec<AxisRef>,
    pub variables: Vec<Variable>,
    pub relations: Vec<Relation>,
}

impl INet {
    pub fn new(axes: Vec<AxisRef>) -> Self {
        Self { axes, variables: Vec::new(), relations: Vec::new() }
    }

    pub fn space_dim(&self) -> u8 {
        self.axes.iter().filter(|a| a.kind == AxisKind::Space).count() as u8
    }

    pub fn time_dim(&self) -> u8 {
        self.axes.iter().filter(|a| a.kind == AxisKind::Time).count() as u8
    }

    pub fn var(&self, id: VarId) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == id)
    }

    pub fn rel(&self, id: RelId) -> Option<&Relation> {
        self.relations.iter().find(|r| r.id == id)
    }

    pub fn incoming(&self, id: VarId) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.dst == id)
    }

    pub fn outgoing(&self, id: VarId) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.src == id)
    }

    pub fn measured(&self) -> impl Iterator<Item = &Variable> {
        self.variables.iter().filter(|v| v.kind == VarKind::Measured)
    }

    /// Variable occupying a complex slot, if any.
    pub fn slot(&self, complex: &ComplexId, dims: &[u8]) -> Option<&Variable> {
        self.variables.iter().find(|v| &v.complex == complex && v.cell_dims == dims)
    }

    pub fn latent_complexes(&self) -> BTreeSet<ComplexId> {
        self.variables
            .iter()
            .filter(|v| matches!(v.complex.domain, Domain::Latent(_)))
            .map(|v| v.complex.clone())
            .collect()
    }

    pub fn phenomenological_links(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(|r| r.kind == RelationKind::Phenomenological)
    }

    /// Form type implied by cell dimensions and orientations in this context.
    pub fn form_of(&self, dims: &[u8], orientations: &[Orientation]) -> FormType {
        let mut d_space = 0;
        let mut d_time = 0;
        let mut o_space = Orientation::Primary;
        let mut o_time = Orientation::Primary;
        for (a, axis) in self.axes.iter().enumerate() {
            match axis.kind {
                AxisKind::Space => {
                    d_space += dims[a];
                    o_space = orientations[a];
                }
                AxisKind::Time => {
                    d_time += dims[a];
                    o_time = orientations[a];
                }
            }
        }
        FormType::scalar(d_space, d_time, o_space, o_time)
    }

    fn next_var_id(&self) -> VarId {
        VarId(self.variables.iter().map(|v| v.id.0 + 1).max().unwrap_or(0))
    }

    fn next_rel_id(&self) -> RelId {
        RelId(self.relations.iter().map(|r| r.id.0 + 1).max().unwrap_or(0))
    }

    fn check_dims(&self, dims: &[u8]) -> Result<(), InetError> {
        if dims.len() != self.axes.len() || dims.iter().any(|&k| k > 1) {
            return Err(InetError::BadDims { dims: dims.to_vec(), axes: self.axes.len() });
        }
        Ok(())
    }

    /// Adds a measured variable rooting its own primary-or-secondary sequence.
    pub fn add_measured(
        &mut self,
        name: &str,
        dims: &[u8],
        orientations: &[Orientation],
        units: BTreeMap<String, i32>,
    ) -> Result<VarId, InetError> {
        self.check_dims(dims)?;
        if self.measured().any(|v| v.name.as_deref() == Some(name)) {
            return Err(InetError::DuplicateMeasured(name.to_string()));
        }
        let id = self.next_var_id();
        let mut form = self.form_of(dims, orientations);
        form.units = units;
        self.variables.push(Variable {
            id,
            name: Some(name.to_string()),
            kind: VarKind::Measured,
            complex: ComplexId { domain: Domain::Measured(name.to_string()), orientations: orientations.to_vec() },
            cell_dims: dims.to_vec(),
            form,
            binding: Some(name.to_string()),
        });
        Ok(id)
    }

    fn push_relation(&mut self, kind: RelationKind, src: VarId, dst: VarId) -> Result<RelId, InetError> {
        if self.relations.iter().any(|r| r.src == src && r.dst == dst && r.kind == kind) {
            return Err(InetError::DuplicateRelation { src, dst });
        }
        let id = self.next_rel_id();
        self.relations.push(Relation { id, kind, src, dst });
        Ok(id)
    }

    /// Applies a co-boundary along `axis` to `src`. Creates the target variable in
    /// the same complex, or converges on it when the slot is already occupied.
    pub fn add_topological(&mut self, src: VarId, axis: usize) -> Result<(VarId, RelId), InetError> {
        let s = self.var(src).ok_or(InetError::UnknownVariable(src))?.clone();
        if axis >= s.cell_dims.len() || s.cell_dims[axis] != 0 {
            return Err(InetError::AxisSaturated { var: src, axis });
        }
        let mut dims = s.cell_dims.clone();
        dims[axis] = 1;
        let dst = match self.slot(&s.complex, &dims) {
            Some(v) => v.id,
            None => {
                let id = self.next_var_id();
                let mut form = self.form_of(&dims, &s.complex.orientations);
                form.units = s.form.units.clone();
                let kind = match s.complex.domain {
                    Domain::Latent(_) => VarKind::Latent,
                    Domain::Measured(_) => VarKind::Derived,
                };
                self.variables.push(Variable {
                    id,
                    name: None,
                    kind,
                    complex: s.complex.clone(),
                    cell_dims: dims,
                    form,
                    binding: None,
                });
                id
            }
        };
        let rel = self.push_relation(RelationKind::Topological { axis }, src, dst)?;
        Ok((dst, rel))
    }

    /// Creates a latent variable in `complex` at `dims`, defined by a phenomenological
    /// link from `src`.
    pub fn add_latent(&mut self, src: VarId, complex: ComplexId, dims: &[u8]) -> Result<(VarId, RelId), InetError> {
        self.check_dims(dims)?;
        self.var(src).ok_or(InetError::UnknownVariable(src))?;
        if let Some(existing) = self.slot(&complex, dims) {
            return Err(InetError::SlotOccupied { slot: format!("{complex:?}{dims:?}"), existing: existing.id });
        }
        let id = self.next_var_id();
        let form = self.form_of(dims, &complex.orientations);
        self.variables.push(Variable {
            id,
            name: None,
            kind: VarKind::Latent,
            complex,
            cell_dims: dims.to_vec(),
            form,
            binding: None,
        });
        let rel = self.push_relation(RelationKind::Phenomenological, src, id)?;
        Ok((id, rel))
    }

    /// Adds a phenomenological link between two existing variables.
    pub fn add_phenomenological(&mut self, src: VarId, dst: VarId) -> Result<RelId, InetError> {
        self.var(src).ok_or(InetError::UnknownVariable(src))?;
        self.var(dst).ok_or(InetError::UnknownVariable(dst))?;
        self.push_relation(RelationKind::Phenomenological, src, dst)
    }

    pub fn add_algebraic(&mut self, src: VarId, dst: VarId, tag: &str) -> Result<RelId, InetError> {
        self.var(src).ok_or(InetError::UnknownVariable(src))?;
        self.var(dst).ok_or(InetError::UnknownVariable(dst))?;
        self.push_relation(RelationKind::Algebraic { tag: tag.to_string() }, src, dst)
    }

    /// True when `dst` sits on the dual cells of `src`.
    pub fn is_dual_pair(&self, src: &Variable, dst: &Variable) -> bool {
        src.cell_dims.iter().zip(&dst.cell_dims).all(|(a, b)| a + b == 1)
            && src.complex.orientations.iter().zip(&dst.complex.orientations).all(|(a, b)| *a == b.flip())
    }

    /// Phenomenological link that does not map a cell to its dual.
    pub fn is_diagonal(&self, rel: &Relation) -> bool {
        if rel.kind != RelationKind::Phenomenological {
            return false;
        }
        match (self.var(rel.src), self.var(rel.dst)) {
            (Some(s), Some(d)) => !self.is_dual_pair(s, d),
            _ => false,
        }
    }

    pub fn diagonal_count(&self) -> usize {
        self.relations.iter().filter(|r| self.is_diagonal(r)).count()
    }

    /// Stable structural label of a variable: domain, orientation and cell dims.
    pub fn label(&self, id: VarId) -> String {
        let v = match self.var(id) {
            Some(v) => v,
            None => return format!("?{id}"),
        };
        let domain = match &v.complex.domain {
            Domain::Measured(n) => format!("M[{n}]"),
            Domain::Latent(k) => format!("L{k}"),
        };
        let o: String = v
            .complex
            .orientations
            .iter()
            .map(|o| if *o == Orientation::Primary { 'P' } else { 'S' })
            .collect();
        let d: String = v.cell_dims.iter().map(|k| char::from(b'0' + k)).collect();
        format!("{domain}:{o}:{d}")
    }

    pub fn relation_label(&self, rel: &Relation) -> String {
        let kind = match &rel.kind {
            RelationKind::Topological { axis } => format!("d{axis}"),
            RelationKind::Phenomenological => "f".to_string(),
            RelationKind::Algebraic { tag } => format!("a[{tag}]"),
        };
        format!("{}-{}->{}", self.label(rel.src), kind, self.label(rel.dst))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("I-net serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// DOT graph: one cluster per complex, topological edges solid, phenomenological
    /// edges dashed.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::from("digraph inet {\n  node [shape=ellipse, fontname=\"monospace\"];\n");
        for (k, complex) in self.complexes().iter().enumerate() {
            let _ = writeln!(s, "  subgraph cluster_{k} {{");
            let o: String = complex.orientations.iter().map(|o| if *o == Orientation::Primary { 'P' } else { 'S' }).collect();
            let title = match &complex.domain {
                Domain::Measured(n) => format!("{n} ({o})"),
                Domain::Latent(i) => format!("latent {i} ({o})"),
            };
            let _ = writeln!(s, "    label=\"{title}\";");
            for v in self.variables.iter().filter(|v| &v.complex == complex) {
                let name = v.name.clone().unwrap_or_else(|| format!("v{}", v.id.0));
                let shape = if v.kind == VarKind::Measured { ", shape=box" } else { "" };
                let _ = writeln!(s, "    v{} [label=\"{}\\n{}\"{}];", v.id.0, name, self.label(v.id), shape);
            }
            s.push_str("  }\n");
        }
        for r in &self.relations {
            let attr = match &r.kind {
                RelationKind::Topological { axis } => format!("label=\"d{axis}\""),
                RelationKind::Phenomenological => "label=\"f\", style=dashed".to_string(),
                RelationKind::Algebraic { tag } => format!("label=\"{tag}\", style=dotted"),
            };
            let _ = writeln!(s, "  v{} -> v{} [{attr}];", r.src.0, r.dst.0);
        }
        s.push_str("}\n");
        s
    }

    fn complexes(&self) -> Vec<ComplexId> {
        let mut out: Vec<ComplexId> = Vec::new();
        for v in &self.variables {
            if !out.contains(&v.complex) {
                out.push(v.complex.clone());
            }
        }
        out
    }
}

/// Checks every relation against its typing rule. Violations are collected, never fatal.
pub fn validate(inet: &INet) -> Result<ValidationReport, Vec<TypeError>> {
    let mut errors = Vec::new();
    let mut report = ValidationReport::default();
    let n_axes = inet.axes.len();

    let mut seen = BTreeSet::new();
    for v in &inet.variables {
        if !seen.insert(v.id) {
            errors.push(TypeError { relation: None, variable: Some(v.id), reason: "duplicate variable id".into() });
        }
        if v.cell_dims.len() != n_axes || v.complex.orientations.len() != n_axes || v.cell_dims.iter().any(|&k| k > 1) {
            errors.push(TypeError { relation: None, variable: Some(v.id), reason: "cell dimensions do not fit the context".into() });
            continue;
        }
        if !inet.form_of(&v.cell_dims, &v.complex.orientations).same_cells(&v.form) {
            errors.push(TypeError { relation: None, variable: Some(v.id), reason: "form type disagrees with cell dimensions".into() });
        }
        match v.kind {
            VarKind::Measured => {
                if v.binding.is_none() {
                    errors.push(TypeError { relation: None, variable: Some(v.id), reason: "measured variable without data binding".into() });
                }
            }
            VarKind::Derived => {
                if !inet.incoming(v.id).any(|r| matches!(r.kind, RelationKind::Topological { .. })) {
                    errors.push(TypeError { relation: None, variable: Some(v.id), reason: "derived variable without a defining co-boundary".into() });
                }
            }
            VarKind::Latent => {
                if !matches!(v.complex.domain, Domain::Latent(_)) {
                    errors.push(TypeError { relation: None, variable: Some(v.id), reason: "latent variable outside a latent complex".into() });
                }
                if inet.incoming(v.id).next().is_none() {
                    errors.push(TypeError { relation: None, variable: Some(v.id), reason: "latent variable without a definition".into() });
                }
            }
        }
    }
    // one variable per complex slot
    let mut slots = BTreeMap::new();
    for v in &inet.variables {
        if let Some(prev) = slots.insert((v.complex.clone(), v.cell_dims.clone()), v.id) {
            errors.push(TypeError { relation: None, variable: Some(v.id), reason: format!("shares its complex slot with {prev}") });
        }
    }

    for r in &inet.relations {
        let (s, d) = match (inet.var(r.src), inet.var(r.dst)) {
            (Some(s), Some(d)) => (s, d),
            _ => {
                errors.push(TypeError { relation: Some(r.id), variable: None, reason: "references an unknown variable".into() });
                continue;
            }
        };
        match &r.kind {
            RelationKind::Topological { axis } => {
                let axis = *axis;
                if axis >= n_axes {
                    errors.push(TypeError { relation: Some(r.id), variable: None, reason: "axis out of range".into() });
                    continue;
                }
                if s.complex != d.complex {
                    errors.push(TypeError { relation: Some(r.id), variable: None, reason: "co-boundary leaves its complex".into() });
                }
                if s.cell_dims[axis] != 0 {
                    errors.push(TypeError { relation: Some(r.id), variable: None, reason: "axis already saturated".into() });
                } else {
                    let mut want = s.cell_dims.clone();
                    want[axis] = 1;
                    if d.cell_dims == s.cell_dims {
                        errors.push(TypeError { relation: Some(r.id), variable: None, reason: "dimension not incremented".into() });
                    } else if d.cell_dims != want {
                        errors.push(TypeError { relation: Some(r.id), variable: None, reason: "target dimension is not the source incremented on the axis".into() });
                    }
                }
                if s.form.units != d.form.units {
                    report.unit_warnings.push(format!("{}: units change across a co-boundary", r.id));
                }
            }
            RelationKind::Phenomenological => {
                if s.id == d.id {
                    errors.push(TypeError { relation: Some(r.id), variable: None, reason: "phenomenological self-loop".into() });
                } else if !inet.is_dual_pair(s, d) {
                    report.diagonal.push(r.id);
                }
            }
            RelationKind::Algebraic { .. } => {
                if s.cell_dims != d.cell_dims || s.complex.orientations != d.complex.orientations {
                    errors.push(TypeError { relation: Some(r.id), variable: None, reason: "algebraic relation between different form types".into() });
                }
            }
        }
    }

    // acyclic (ignoring algebraic self-loops) and reachable from measured variables
    if let Some(v) = find_cycle(inet) {
        errors.push(TypeError { relation: None, variable: Some(v), reason: "relations form a cycle".into() });
    }
    let reach = reachable_from_measured(inet);
    for v in &inet.variables {
        if !reach.contains(&v.id) {
            errors.push(TypeError { relation: None, variable: Some(v.id), reason: "not reachable from a measured variable".into() });
        }
    }

    if errors.is_empty() {
        Ok(report)
    } else {
        Err(errors)
    }
}

fn find_cycle(inet: &INet) -> Option<VarId> {
    // Kahn's algorithm over non-loop edges
    let mut indeg: BTreeMap<VarId, usize> = inet.variables.iter().map(|v| (v.id, 0)).collect();
    for r in inet.relations.iter().filter(|r| r.src != r.dst) {
        if let Some(d) = indeg.get_mut(&r.dst) {
            *d += 1;
        }
    }
    let mut queue: Vec<VarId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut done = 0;
    while let Some(v) = queue.pop() {
        done += 1;
        for r in inet.outgoing(v).filter(|r| r.src != r.dst) {
            if let Some(d) = indeg.get_mut(&r.dst) {
                *d -= 1;
                if *d == 0 {
                    queue.push(r.dst);
                }
            }
        }
    }
    (done < indeg.len()).then(|| indeg.iter().find(|(_, &d)| d > 0).map(|(&v, _)| v)).flatten()
}

fn reachable_from_measured(inet: &INet) -> BTreeSet<VarId> {
    let mut seen: BTreeSet<VarId> = inet.measured().map(|v| v.id).collect();
    let mut stack: Vec<VarId> = seen.iter().copied().collect();
    while let Some(v) = stack.pop() {
        for r in inet.outgoing(v) {
            if seen.insert(r.dst) {
                stack.push(r.dst);
            }
        }
    }
    seen
}

/// A derivation: a chain of relations starting at a measured variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub source: VarId,
    pub relations: Vec<RelId>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Structural text of the path, independent of ids.
    pub fn key(&self, inet: &INet) -> String {
        let mut s = inet.label(self.source);
        for r in &self.relations {
            let rel = inet.rel(*r).expect("path relation exists");
            let k = match &rel.kind {
                RelationKind::Topological { axis } => format!("d{axis}"),
                RelationKind::Phenomenological => "f".into(),
                RelationKind::Algebraic { tag } => format!("a[{tag}]"),
            };
            s.push_str(&format!(" -{k}-> {}", inet.label(rel.dst)));
        }
        s
    }

    pub fn phenomenological<'a>(&'a self, inet: &'a INet) -> impl Iterator<Item = RelId> + 'a {
        self.relations
            .iter()
            .copied()
            .filter(move |r| inet.rel(*r).map(|x| x.kind == RelationKind::Phenomenological).unwrap_or(false))
    }
}

/// A posed equation: two converging derivations of one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub at: VarId,
    pub lhs: Path,
    pub rhs: Path,
    /// Unknown functions in order of appearance (lhs first).
    pub function_slots: Vec<RelId>,
}

impl Constraint {
    /// Structural identity of the constraint (unordered path pair).
    pub fn key(&self, inet: &INet) -> String {
        let mut k = [self.lhs.key(inet), self.rhs.key(inet)];
        k.sort();
        format!("{} == {}", k[0], k[1])
    }
}

fn path_order(inet: &INet, a: &Path, b: &Path) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.key(inet).cmp(&b.key(inet)))
}

/// Canonical (shortest, then lexicographically smallest) derivation of a variable.
pub fn canonical_derivation(inet: &INet, var: VarId) -> Option<Path> {
    let mut memo = BTreeMap::new();
    canonical_derivation_memo(inet, var, &mut memo, &mut BTreeSet::new())
}

fn canonical_derivation_memo(
    inet: &INet,
    var: VarId,
    memo: &mut BTreeMap<VarId, Option<Path>>,
    visiting: &mut BTreeSet<VarId>,
) -> Option<Path> {
    if let Some(p) = memo.get(&var) {
        return p.clone();
    }
    let v = inet.var(var)?;
    if v.kind == VarKind::Measured {
        let p = Some(Path { source: var, relations: Vec::new() });
        memo.insert(var, p.clone());
        return p;
    }
    if !visiting.insert(var) {
        return None;
    }
    let mut best: Option<Path> = None;
    let incoming: Vec<Relation> = inet.incoming(var).filter(|r| r.src != r.dst).cloned().collect();
    for r in incoming {
        if let Some(mut p) = canonical_derivation_memo(inet, r.src, memo, visiting) {
            p.relations.push(r.id);
            if best.as_ref().map_or(true, |b| path_order(inet, &p, b).is_lt()) {
                best = Some(p);
            }
        }
    }
    visiting.remove(&var);
    memo.insert(var, best.clone());
    best
}

/// All derivations of `var` that end with distinct incoming relations, each using the
/// canonical derivation of the relation's source. Measured variables also carry their
/// data (empty path).
fn derivations(inet: &INet, var: VarId) -> Vec<Path> {
    let mut out = Vec::new();
    let v = match inet.var(var) {
        Some(v) => v,
        None => return out,
    };
    if v.kind == VarKind::Measured {
        out.push(Path { source: var, relations: Vec::new() });
    }
    for r in inet.incoming(var).filter(|r| r.src != r.dst) {
        if let Some(mut p) = canonical_derivation(inet, r.src) {
            p.relations.push(r.id);
            out.push(p);
        }
    }
    out.sort_by(|a, b| path_order(inet, a, b));
    out.dedup();
    out
}

fn is_trivial(inet: &INet, a: &Path, b: &Path) -> bool {
    // same source through the same phenomenological links: the topological steps
    // between links connect the same endpoints and commute exactly
    a.source == b.source && a.phenomenological(inet).eq(b.phenomenological(inet))
}

/// One constraint per extra derivation of every variable that has converging paths.
pub fn extract_constraints(inet: &INet) -> Vec<Constraint> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut vars: Vec<&Variable> = inet.variables.iter().collect();
    vars.sort_by_key(|v| inet.label(v.id));
    for v in vars {
        let ds = derivations(inet, v.id);
        if ds.len() < 2 {
            continue;
        }
        let lhs = &ds[0];
        for rhs in &ds[1..] {
            if is_trivial(inet, lhs, rhs) {
                continue;
            }
            let mut slots: Vec<RelId> = lhs.phenomenological(inet).collect();
            slots.extend(rhs.phenomenological(inet));
            let c = Constraint { at: v.id, lhs: lhs.clone(), rhs: rhs.clone(), function_slots: slots };
            if seen.insert(c.key(inet)) {
                out.push(c);
            }
        }
    }
    out
}

/// True when the I-net poses a constraint absent from every ancestor.
pub fn is_complete(inet: &INet, ancestor_keys: &BTreeSet<String>) -> bool {
    extract_constraints(inet).iter().any(|c| !ancestor_keys.contains(&c.key(inet)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use Orientation::*;

    pub(crate) fn time_axes() -> Vec<AxisRef> {
        vec![AxisRef { name: "t".into(), kind: AxisKind::Time }]
    }

    /// θ and ω = δθ.
    pub(crate) fn pendulum_root() -> (INet, VarId, VarId) {
        let mut n = INet::new(time_axes());
        let th = n.add_measured("theta", &[0], &[Primary], BTreeMap::new()).unwrap();
        let (om, _) = n.add_topological(th, 0).unwrap();
        (n, th, om)
    }

    pub(crate) fn latent() -> ComplexId {
        ComplexId { domain: Domain::Latent(0), orientations: vec![Secondary] }
    }

    /// θ→T (f1), ω→L (f2), L→T (δ*).
    pub(crate) fn torque_form() -> INet {
        let (mut n, th, om) = pendulum_root();
        let (t, _) = n.add_latent(th, latent(), &[1]).unwrap();
        let (l, _) = n.add_latent(om, latent(), &[0]).unwrap();
        let (t2, _) = n.add_topological(l, 0).unwrap();
        assert_eq!(t, t2);
        n
    }

    /// θ→E (diagonal), ω→E.
    pub(crate) fn energy_form() -> INet {
        let (mut n, th, om) = pendulum_root();
        let (e, _) = n.add_latent(om, latent(), &[0]).unwrap();
        n.add_phenomenological(th, e).unwrap();
        n
    }

    #[test]
    fn form_type_counts() {
        assert_eq!(enumerate_form_types(3, 1).len(), 32);
        assert_eq!(enumerate_form_types(0, 1).len(), 4);
        assert_eq!(enumerate_form_types(2, 1).len(), 24);
    }

    #[test]
    fn enumeration_matches_brute_force_and_dual_is_involution() {
        for d1 in 0..=3u8 {
            for d2 in 0..=3u8 {
                if d1 + d2 == 0 {
                    continue;
                }
                let types = enumerate_form_types(d1, d2);
                let groups = u32::from(d1 > 0) + u32::from(d2 > 0);
                let formula = (d1 as usize + 1) * (d2 as usize + 1) * 2usize.pow(groups);
                assert_eq!(types.len(), formula);
                let unique: BTreeSet<_> = types.iter().collect();
                assert_eq!(unique.len(), types.len());
                for t in &types {
                    assert_eq!(t.dual(d1, d2).dual(d1, d2), *t);
                    assert!(types.contains(&t.dual(d1, d2)));
                }
            }
        }
    }

    #[test]
    fn torque_form_validates() {
        let n = torque_form();
        let rep = validate(&n).unwrap();
        assert!(rep.diagonal.is_empty());
    }

    #[test]
    fn topological_edge_without_increment_is_rejected() {
        let (mut n, th, _) = pendulum_root();
        let fake = Variable {
            id: VarId(9),
            name: None,
            kind: VarKind::Derived,
            complex: n.var(th).unwrap().complex.clone(),
            cell_dims: vec![0],
            form: FormType::scalar(0, 0, Primary, Primary),
            binding: None,
        };
        n.variables.push(fake);
        n.relations.push(Relation { id: RelId(9), kind: RelationKind::Topological { axis: 0 }, src: th, dst: VarId(9) });
        let errs = validate(&n).unwrap_err();
        assert!(errs.iter().any(|e| e.relation == Some(RelId(9)) && e.reason.contains("already saturated") || e.reason.contains("dimension not incremented")));
    }

    #[test]
    fn zero_to_zero_time_form_reports_dimension_not_incremented() {
        let mut n = INet::new(time_axes());
        let a = n.add_measured("a", &[0], &[Primary], BTreeMap::new()).unwrap();
        let b = n.add_measured("b", &[0], &[Primary], BTreeMap::new()).unwrap();
        n.relations.push(Relation { id: RelId(5), kind: RelationKind::Topological { axis: 0 }, src: a, dst: b });
        let errs = validate(&n).unwrap_err();
        assert!(errs.iter().any(|e| e.relation == Some(RelId(5)) && e.reason == "dimension not incremented"));
    }

    #[test]
    fn non_dual_phenomenological_link_is_flagged_diagonal() {
        let n = energy_form();
        let rep = validate(&n).unwrap();
        assert_eq!(rep.diagonal.len(), 1);
    }

    #[test]
    fn torque_constraint_at_t() {
        let n = torque_form();
        let cs = extract_constraints(&n);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(n.label(c.at), "L0:S:1");
        assert_eq!(c.lhs.len(), 1);
        assert_eq!(c.rhs.len(), 3);
        assert_eq!(c.function_slots.len(), 2);
        assert!(is_complete(&n, &BTreeSet::new()));
    }

    #[test]
    fn dangling_branch_poses_nothing() {
        let (n, _, _) = pendulum_root();
        assert!(extract_constraints(&n).is_empty());
        let (mut n, th, _) = pendulum_root();
        n.add_latent(th, latent(), &[1]).unwrap();
        assert!(!is_complete(&n, &BTreeSet::new()));
        let mut only = INet::new(time_axes());
        only.add_measured("theta", &[0], &[Primary], BTreeMap::new()).unwrap();
        assert!(!is_complete(&only, &BTreeSet::new()));
    }

    #[test]
    fn energy_form_has_one_constraint() {
        let n = energy_form();
        let cs = extract_constraints(&n);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].lhs.len(), 1);
        assert_eq!(cs[0].rhs.len(), 2);
    }

    #[test]
    fn completeness_is_relative_to_ancestors() {
        let n = energy_form();
        let keys: BTreeSet<String> = extract_constraints(&n).iter().map(|c| c.key(&n)).collect();
        assert!(!is_complete(&n, &keys));
    }

    #[test]
    fn extraction_ignores_insertion_order() {
        let a = torque_form();
        let (mut b, th, om) = pendulum_root();
        let (l, _) = b.add_latent(om, latent(), &[0]).unwrap();
        let (t, _) = b.add_topological(l, 0).unwrap();
        b.add_phenomenological(th, t).unwrap();
        let ka: Vec<String> = extract_constraints(&a).iter().map(|c| c.key(&a)).collect();
        let kb: Vec<String> = extract_constraints(&b).iter().map(|c| c.key(&b)).collect();
        assert_eq!(ka, kb);
    }

    #[test]
    fn purely_topological_cycle_is_trivial() {
        let axes = vec![
            AxisRef { name: "x".into(), kind: AxisKind::Space },
            AxisRef { name: "t".into(), kind: AxisKind::Time },
        ];
        let mut n = INet::new(axes);
        let u = n.add_measured("u", &[0, 0], &[Primary, Primary], BTreeMap::new()).unwrap();
        let (ux, _) = n.add_topological(u, 0).unwrap();
        let (ut, _) = n.add_topological(u, 1).unwrap();
        let (w, _) = n.add_topological(ux, 1).unwrap();
        let (w2, _) = n.add_topological(ut, 0).unwrap();
        assert_eq!(w, w2);
        validate(&n).unwrap();
        assert!(extract_constraints(&n).is_empty());
    }

    #[test]
    fn commuting_coboundaries_after_one_link_are_trivial() {
        let axes = vec![AxisRef { name: "t".into(), kind: AxisKind::Time }, AxisRef { name: "x".into(), kind: AxisKind::Space }];
        let mut n = INet::new(axes);
        let u = n.add_measured("u", &[0, 0], &[Primary, Primary], BTreeMap::new()).unwrap();
        let c = ComplexId { domain: Domain::Latent(0), orientations: vec![Secondary, Secondary] };
        let (l, _) = n.add_latent(u, c, &[0, 0]).unwrap();
        let (lt, _) = n.add_topological(l, 0).unwrap();
        let (lx, _) = n.add_topological(l, 1).unwrap();
        n.add_topological(lt, 1).unwrap();
        n.add_topological(lx, 0).unwrap();
        assert!(extract_constraints(&n).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let n = torque_form();
        let back = INet::from_json(&n.to_json()).unwrap();
        assert_eq!(back, n);
    }
}
