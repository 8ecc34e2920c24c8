//! Best-first enumeration of I-net hypotheses.
//!
//! States grow by three actions: a co-boundary on an existing variable, a new latent
//! variable defined by a phenomenological link, or an extra phenomenological link
//! between existing variables. States are merged by canonical signature, so the
//! explored structure is a DAG.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::forms::{extract_constraints, is_complete, validate, ComplexId, Constraint, Domain, INet, RelationKind, VarId, VarKind};
use crate::topology::Orientation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("the context has no measured variables")]
    NoMeasured,
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("root I-net does not validate: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Penalties {
    pub per_variable: f64,
    pub per_phenom_link: f64,
    pub per_diagonal_link: f64,
    pub per_latent_complex: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Self { per_variable: 1.0, per_phenom_link: 1.0, per_diagonal_link: 4.0, per_latent_complex: 2.0 }
    }
}

/// Which actions are legal. The defaults reproduce the pendulum benchmark grammar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grammar {
    /// Phenomenological links start only in measured complexes.
    pub links_from_measured_only: bool,
    /// New latent variables are placed only on the dual cells of their source.
    pub latent_at_dual_only: bool,
    /// Maximum incoming relations per variable (2 allows one converging definition).
    pub max_in_degree: usize,
}

impl Default for Grammar {
    fn default() -> Self {
        Self { links_from_measured_only: true, latent_at_dual_only: false, max_in_degree: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_latent_complexes: usize,
    pub max_phenom_links: usize,
    pub max_diagonal_links: usize,
    pub max_depth: usize,
    pub w_struct: f64,
    pub w_fit: f64,
    pub penalties: Penalties,
    /// Maximum number of state expansions.
    pub budget: usize,
    pub grammar: Grammar,
    /// Skip expansions that cannot beat the incumbent even with zero loss.
    pub prune: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_latent_complexes: 1,
            max_phenom_links: 2,
            max_diagonal_links: 1,
            max_depth: 8,
            w_struct: 1.0,
            w_fit: 100.0,
            penalties: Penalties::default(),
            budget: 10_000,
            grammar: Grammar::default(),
            prune: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let p = &self.penalties;
        let reals = [self.w_struct, self.w_fit, p.per_variable, p.per_phenom_link, p.per_diagonal_link, p.per_latent_complex];
        if reals.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(SearchError::Config("weights and penalties must be finite and >= 0".into()));
        }
        if self.budget == 0 || self.grammar.max_in_degree == 0 {
            return Err(SearchError::Config("budget and max_in_degree must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Root,
    Coboundary { src: String, axis: usize },
    CreateLatent { src: String, dst: String },
    Link { src: String, dst: String },
}

impl Action {
    pub fn describe(&self) -> String {
        match self {
            Action::Root => "root".into(),
            Action::Coboundary { src, axis } => format!("d{axis}[{src}]"),
            Action::CreateLatent { src, dst } => format!("new {dst} = f({src})"),
            Action::Link { src, dst } => format!("link {src} -> {dst}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: usize,
    pub inet: INet,
    /// Every state from which this one was generated, in discovery order.
    pub parents: Vec<usize>,
    pub action: Action,
    pub depth: usize,
    pub penalty: f64,
    pub status: Status,
    pub loss: Option<f64>,
    pub signature: String,
    pub constraint_keys: Vec<String>,
    pub expanded: bool,
    pub pruned: bool,
    pub error: Option<String>,
}

impl Hypothesis {
    pub fn name(&self) -> String {
        format!("H-{:02}", self.id)
    }

    pub fn is_complete(&self) -> bool {
        self.status == Status::Complete
    }

    pub fn score(&self, cfg: &SearchConfig) -> f64 {
        cfg.w_struct * self.penalty + cfg.w_fit * self.loss.unwrap_or(0.0)
    }
}

/// Scores complete hypotheses. `Ok((None, _))` means structure-only evaluation.
pub trait Evaluator {
    type Output;
    fn evaluate(&self, inet: &INet, constraints: &[Constraint]) -> Result<(Option<f64>, Self::Output), String>;
}

/// Evaluator that fits nothing: the ranking is by structure alone.
pub struct StructureOnly;

impl Evaluator for StructureOnly {
    type Output = ();
    fn evaluate(&self, _: &INet, _: &[Constraint]) -> Result<(Option<f64>, ()), String> {
        Ok((None, ()))
    }
}

pub fn penalty(inet: &INet, cfg: &SearchConfig) -> f64 {
    let p = &cfg.penalties;
    p.per_variable * inet.variables.len() as f64
        + p.per_phenom_link * inet.phenomenological_links().count() as f64
        + p.per_diagonal_link * inet.diagonal_count() as f64
        + p.per_latent_complex * inet.latent_complexes().len() as f64
}

/// Optimistic zero-loss bound against the best complete score found so far.
pub fn prune(h: &Hypothesis, incumbent: Option<f64>, cfg: &SearchConfig) -> bool {
    match incumbent {
        Some(best) => cfg.w_struct * h.penalty > best,
        None => false,
    }
}

fn relabeled(inet: &INet, id: VarId, map: &BTreeMap<u32, u32>) -> String {
    let v = inet.var(id).expect("variable exists");
    let domain = match &v.complex.domain {
        Domain::Measured(n) => format!("M[{n}]"),
        Domain::Latent(k) => format!("L{}", map[k]),
    };
    let o: String = v.complex.orientations.iter().map(|o| if *o == Orientation::Primary { 'P' } else { 'S' }).collect();
    let d: String = v.cell_dims.iter().map(|k| char::from(b'0' + k)).collect();
    format!("{domain}:{o}:{d}")
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur: Vec<u32> = (0..n as u32).collect();
    fn rec(k: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in k..cur.len() {
            cur.swap(k, i);
            rec(k + 1, cur, out);
            cur.swap(k, i);
        }
    }
    rec(0, &mut cur, &mut out);
    out
}

/// Sorted typed-edge text of the I-net, minimized over relabelings of latent complex ids.
pub fn canonical_text(inet: &INet) -> String {
    let latent: Vec<u32> = inet
        .variables
        .iter()
        .filter_map(|v| match v.complex.domain {
            Domain::Latent(k) => Some(k),
            _ => None,
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut best: Option<String> = None;
    for perm in permutations(latent.len()) {
        let map: BTreeMap<u32, u32> = latent.iter().zip(&perm).map(|(&k, &p)| (k, p)).collect();
        let mut items: Vec<String> = inet
            .relations
            .iter()
            .map(|r| {
                let kind = match &r.kind {
                    RelationKind::Topological { axis } => format!("d{axis}"),
                    RelationKind::Phenomenological => "f".into(),
                    RelationKind::Algebraic { tag } => format!("a[{tag}]"),
                };
                format!("{} -{kind}-> {}", relabeled(inet, r.src, &map), relabeled(inet, r.dst, &map))
            })
            .collect();
        for v in &inet.variables {
            if inet.incoming(v.id).next().is_none() && inet.outgoing(v.id).next().is_none() {
                items.push(format!("{} isolated", relabeled(inet, v.id, &map)));
            }
        }
        items.sort();
        let text = items.join("\n");
        if best.as_ref().map_or(true, |b| text < *b) {
            best = Some(text);
        }
    }
    best.unwrap_or_default()
}

pub fn canonical_signature(inet: &INet) -> String {
    let digest = Sha256::digest(canonical_text(inet).as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Measured variables plus their first co-boundaries along every axis.
pub fn root_hypothesis(context: &INet, cfg: &SearchConfig) -> Result<Hypothesis, SearchError> {
    cfg.validate()?;
    let mut inet = context.clone();
    let measured: Vec<VarId> = inet.measured().map(|v| v.id).collect();
    if measured.is_empty() {
        return Err(SearchError::NoMeasured);
    }
    for m in measured {
        for axis in 0..inet.axes.len() {
            let free = inet.var(m).map(|v| v.cell_dims[axis] == 0).unwrap_or(false);
            let present = inet.outgoing(m).any(|r| r.kind == RelationKind::Topological { axis });
            if free && !present {
                inet.add_topological(m, axis).map_err(|e| SearchError::Invalid(e.to_string()))?;
            }
        }
    }
    validate(&inet).map_err(|e| SearchError::Invalid(e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")))?;
    let keys: Vec<String> = extract_constraints(&inet).iter().map(|c| c.key(&inet)).collect();
    Ok(Hypothesis {
        id: 0,
        penalty: penalty(&inet, cfg),
        status: if keys.is_empty() { Status::Incomplete } else { Status::Complete },
        signature: canonical_signature(&inet),
        constraint_keys: keys,
        inet,
        parents: Vec::new(),
        action: Action::Root,
        depth: 0,
        loss: None,
        expanded: false,
        pruned: false,
        error: None,
    })
}

fn within_caps(inet: &INet, cfg: &SearchConfig) -> bool {
    if inet.phenomenological_links().count() > cfg.max_phenom_links
        || inet.diagonal_count() > cfg.max_diagonal_links
        || inet.latent_complexes().len() > cfg.max_latent_complexes
    {
        return false;
    }
    inet.variables.iter().all(|v| inet.incoming(v.id).count() <= cfg.grammar.max_in_degree) && validate(inet).is_ok()
}

fn all_dims(n: usize) -> Vec<Vec<u8>> {
    (0..1usize << n).map(|m| (0..n).map(|a| ((m >> a) & 1) as u8).collect()).collect()
}

/// Children of `inet` in deterministic order (duplicates are not removed here).
pub fn expand(inet: &INet, cfg: &SearchConfig) -> Vec<(Action, INet)> {
    let mut out = Vec::new();
    let n_axes = inet.axes.len();
    let vars: Vec<VarId> = inet.variables.iter().map(|v| v.id).collect();
    let link_source = |id: VarId| {
        let v = inet.var(id).expect("variable exists");
        !cfg.grammar.links_from_measured_only || matches!(v.complex.domain, Domain::Measured(_))
    };

    for &v in &vars {
        for axis in 0..n_axes {
            let mut child = inet.clone();
            if child.add_topological(v, axis).is_ok() && within_caps(&child, cfg) {
                out.push((Action::Coboundary { src: inet.label(v), axis }, child));
            }
        }
    }

    let latent = inet.latent_complexes();
    let next_latent = latent
        .iter()
        .filter_map(|c| match c.domain {
            Domain::Latent(k) => Some(k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    for &src in vars.iter().filter(|&&v| link_source(v)) {
        let s = inet.var(src).expect("variable exists");
        let orientations: Vec<Orientation> = s.complex.orientations.iter().map(|o| o.flip()).collect();
        let mut targets: Vec<ComplexId> = latent.iter().filter(|c| c.orientations == orientations).cloned().collect();
        if latent.len() < cfg.max_latent_complexes {
            targets.push(ComplexId { domain: Domain::Latent(next_latent), orientations: orientations.clone() });
        }
        let dims_options = if cfg.grammar.latent_at_dual_only {
            vec![s.cell_dims.iter().map(|d| 1 - d).collect()]
        } else {
            all_dims(n_axes)
        };
        for complex in &targets {
            for dims in &dims_options {
                let mut child = inet.clone();
                if let Ok((id, _)) = child.add_latent(src, complex.clone(), dims) {
                    if within_caps(&child, cfg) {
                        let dst = child.label(id);
                        out.push((Action::CreateLatent { src: inet.label(src), dst }, child));
                    }
                }
            }
        }
    }

    for &src in vars.iter().filter(|&&v| link_source(v)) {
        for &dst in &vars {
            let d = inet.var(dst).expect("variable exists");
            if src == dst || d.kind != VarKind::Latent {
                continue;
            }
            let mut child = inet.clone();
            if child.add_phenomenological(src, dst).is_ok() && within_caps(&child, cfg) {
                out.push((Action::Link { src: inet.label(src), dst: inet.label(dst) }, child));
            }
        }
    }
    out
}

/// Removes a relation and, transitively, every non-measured variable left without a
/// definition together with its outgoing relations.
fn remove_cascade(inet: &INet, rel: usize) -> INet {
    let mut out = inet.clone();
    out.relations.remove(rel);
    loop {
        let orphan = out
            .variables
            .iter()
            .find(|v| v.kind != VarKind::Measured && out.incoming(v.id).next().is_none())
            .map(|v| v.id);
        match orphan {
            Some(id) => {
                out.variables.retain(|v| v.id != id);
                out.relations.retain(|r| r.src != id && r.dst != id);
            }
            None => return out,
        }
    }
}

/// Constraint keys posed by any structural predecessor (one relation removed).
fn predecessor_keys(inet: &INet, root: &BTreeSet<String>) -> BTreeSet<String> {
    let mut keys = BTreeSet::new();
    for (i, r) in inet.relations.iter().enumerate() {
        if root.contains(&inet.relation_label(r)) {
            continue;
        }
        let prev = remove_cascade(inet, i);
        keys.extend(extract_constraints(&prev).iter().map(|c| c.key(&prev)));
    }
    keys
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchOutcome<O> {
    pub nodes: Vec<Hypothesis>,
    /// Evaluator output per evaluated node id.
    pub outputs: BTreeMap<usize, O>,
    /// Complete node ids, best first.
    pub ranked: Vec<usize>,
    pub expansions: usize,
    pub diagnostics: Vec<String>,
}

#[derive(PartialEq)]
struct Key(f64, String, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| self.1.cmp(&other.1)).then_with(|| self.2.cmp(&other.2))
    }
}

fn rank_order(a: &Hypothesis, b: &Hypothesis, cfg: &SearchConfig) -> Ordering {
    // failed evaluations last
    a.error
        .is_some()
        .cmp(&b.error.is_some())
        .then_with(|| a.score(cfg).total_cmp(&b.score(cfg)))
        .then_with(|| a.signature.cmp(&b.signature))
}

/// Uniform-cost (h = 0) best-first search from `root`.
pub fn astar<E: Evaluator>(root: Hypothesis, evaluator: &E, cfg: &SearchConfig) -> SearchOutcome<E::Output> {
    let root_relations: BTreeSet<String> = root.inet.relations.iter().map(|r| root.inet.relation_label(r)).collect();
    let mut nodes: Vec<Hypothesis> = Vec::new();
    let mut outputs = BTreeMap::new();
    let mut by_sig: BTreeMap<String, usize> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let mut incumbent: Option<f64> = None;
    let mut diagnostics = Vec::new();

    let admit = |mut h: Hypothesis,
                     nodes: &mut Vec<Hypothesis>,
                     heap: &mut BinaryHeap<Reverse<Key>>,
                     incumbent: &mut Option<f64>,
                     outputs: &mut BTreeMap<usize, E::Output>| {
        h.id = nodes.len();
        if h.is_complete() {
            let constraints = extract_constraints(&h.inet);
            match evaluator.evaluate(&h.inet, &constraints) {
                Ok((loss, out)) => {
                    h.loss = loss;
                    outputs.insert(h.id, out);
                    if loss.is_some() {
                        let s = h.score(cfg);
                        *incumbent = Some(incumbent.map_or(s, |b: f64| b.min(s)));
                    }
                }
                Err(e) => h.error = Some(e),
            }
        }
        heap.push(Reverse(Key(h.score(cfg), h.signature.clone(), h.id)));
        nodes.push(h);
    };

    by_sig.insert(root.signature.clone(), 0);
    admit(root, &mut nodes, &mut heap, &mut incumbent, &mut outputs);

    let mut expansions = 0;
    while let Some(Reverse(Key(_, _, id))) = heap.pop() {
        if expansions >= cfg.budget {
            diagnostics.push(format!("budget of {} expansions exhausted", cfg.budget));
            break;
        }
        if cfg.prune && prune(&nodes[id], incumbent, cfg) {
            nodes[id].pruned = true;
            continue;
        }
        if nodes[id].depth >= cfg.max_depth {
            continue;
        }
        expansions += 1;
        nodes[id].expanded = true;
        let parent_depth = nodes[id].depth;
        let children = expand(&nodes[id].inet, cfg);
        for (action, inet) in children {
            let signature = canonical_signature(&inet);
            if let Some(&existing) = by_sig.get(&signature) {
                if existing != id && !nodes[existing].parents.contains(&id) {
                    nodes[existing].parents.push(id);
                }
                continue;
            }
            let keys: Vec<String> = extract_constraints(&inet).iter().map(|c| c.key(&inet)).collect();
            let complete = is_complete(&inet, &predecessor_keys(&inet, &root_relations));
            let h = Hypothesis {
                id: 0,
                penalty: penalty(&inet, cfg),
                status: if complete { Status::Complete } else { Status::Incomplete },
                signature: signature.clone(),
                constraint_keys: keys,
                inet,
                parents: vec![id],
                action,
                depth: parent_depth + 1,
                loss: None,
                expanded: false,
                pruned: false,
                error: None,
            };
            by_sig.insert(signature, nodes.len());
            admit(h, &mut nodes, &mut heap, &mut incumbent, &mut outputs);
        }
    }

    let mut ranked: Vec<usize> = nodes.iter().filter(|h| h.is_complete()).map(|h| h.id).collect();
    ranked.sort_by(|&a, &b| rank_order(&nodes[a], &nodes[b], cfg));
    if ranked.is_empty() {
        diagnostics.push("no complete hypothesis found".into());
    }
    SearchOutcome { nodes, outputs, ranked, expansions, diagnostics }
}

/// Structure-only enumeration without pruning.
pub fn enumerate(root: Hypothesis, cfg: &SearchConfig) -> SearchOutcome<()> {
    let cfg = SearchConfig { prune: false, w_fit: 0.0, ..cfg.clone() };
    astar(root, &StructureOnly, &cfg)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"))
}

impl<O> SearchOutcome<O> {
    /// DOT rendering of the explored DAG; complete states are filled.
    pub fn to_dot(&self, cfg: &SearchConfig) -> String {
        let mut s = String::from("digraph search {\n  node [shape=box, fontname=\"monospace\"];\n");
        for h in &self.nodes {
            let style = if h.is_complete() { ", style=filled, fillcolor=\"#ffe680\"" } else { "" };
            let _ = writeln!(
                s,
                "  \"{}\" [label=\"{}\\npenalty={}\\nloss={}\\nscore={:.6e}\\n{}\"{}];",
                h.name(),
                h.name(),
                h.penalty,
                fmt_opt(h.loss),
                h.score(cfg),
                &h.signature[..12],
                style
            );
        }
        for h in &self.nodes {
            for p in &h.parents {
                let _ = writeln!(s, "  \"{}\" -> \"{}\";", self.nodes[*p].name(), h.name());
            }
        }
        s.push_str("}\n");
        s
    }

    /// One JSON record per state, in discovery order.
    pub fn run_log(&self, cfg: &SearchConfig) -> String {
        let mut s = String::new();
        for h in &self.nodes {
            let rec = serde_json::json!({
                "id": h.name(),
                "signature": h.signature,
                "parents": h.parents.iter().map(|p| self.nodes[*p].name()).collect::<Vec<_>>(),
                "action": h.action.describe(),
                "depth": h.depth,
                "penalty": h.penalty,
                "status": h.status,
                "loss": h.loss,
                "score": h.score(cfg),
                "expanded": h.expanded,
                "pruned": h.pruned,
                "error": h.error,
            });
            s.push_str(&rec.to_string());
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::tests::{energy_form, latent, pendulum_root, time_axes, torque_form};
    use crate::forms::AxisRef;
    use crate::topology::AxisKind;
    use proptest::prelude::*;
    use std::collections::BTreeMap as Map;
    use Orientation::*;

    fn context() -> INet {
        let mut n = INet::new(time_axes());
        n.add_measured("theta", &[0], &[Primary], Map::new()).unwrap();
        n
    }

    #[test]
    fn pendulum_root_holds_theta_and_omega() {
        let h = root_hypothesis(&context(), &SearchConfig::default()).unwrap();
        assert_eq!(h.inet.variables.len(), 2);
        assert_eq!(h.penalty, 2.0);
        assert_eq!(h.status, Status::Incomplete);
        assert_eq!(h.signature, canonical_signature(&pendulum_root().0));
    }

    #[test]
    fn wave_root_holds_both_first_coboundaries() {
        let axes = vec![AxisRef { name: "t".into(), kind: AxisKind::Time }, AxisRef { name: "x".into(), kind: AxisKind::Space }];
        let mut n = INet::new(axes);
        n.add_measured("u", &[0, 0], &[Primary, Primary], Map::new()).unwrap();
        let h = root_hypothesis(&n, &SearchConfig::default()).unwrap();
        let dims: BTreeSet<Vec<u8>> = h.inet.variables.iter().map(|v| v.cell_dims.clone()).collect();
        assert_eq!(dims, [vec![0, 0], vec![1, 0], vec![0, 1]].into_iter().collect());
    }

    #[test]
    fn empty_context_is_rejected() {
        assert_eq!(root_hypothesis(&INet::new(time_axes()), &SearchConfig::default()), Err(SearchError::NoMeasured));
    }

    #[test]
    fn penalty_examples() {
        let cfg = SearchConfig::default();
        assert_eq!(penalty(&pendulum_root().0, &cfg), 2.0);
        assert_eq!(penalty(&torque_form(), &cfg), 8.0);
        assert_eq!(penalty(&energy_form(), &cfg), 3.0 + 2.0 + 4.0 + 2.0);
    }

    #[test]
    fn prune_examples() {
        let cfg = SearchConfig::default();
        let mut h = root_hypothesis(&context(), &cfg).unwrap();
        h.penalty = 12.0;
        assert!(prune(&h, Some(10.0), &cfg));
        h.penalty = 9.0;
        assert!(!prune(&h, Some(10.0), &cfg));
        h.penalty = 1e9;
        assert!(!prune(&h, None, &cfg));
    }

    #[test]
    fn signature_ignores_construction_order_and_latent_ids() {
        let a = torque_form();
        let (mut b, th, om) = pendulum_root();
        let other = ComplexId { domain: Domain::Latent(7), orientations: vec![Secondary] };
        let (l, _) = b.add_latent(om, other.clone(), &[0]).unwrap();
        let (t, _) = b.add_topological(l, 0).unwrap();
        b.add_phenomenological(th, t).unwrap();
        assert_eq!(canonical_signature(&a), canonical_signature(&b));
        assert_ne!(canonical_signature(&a), canonical_signature(&energy_form()));
        let (mut h01, th, _) = pendulum_root();
        h01.add_latent(th, latent(), &[1]).unwrap();
        assert_ne!(canonical_signature(&h01), canonical_signature(&a));
    }

    /// Bitmask of links over θ→T, ω→L, θ→L, ω→T, L→T.
    fn links(n: &INet) -> String {
        let mut s = String::new();
        for (c, text) in [
            ('a', "M[theta]:P:0-f->L0:S:1"),
            ('b', "M[theta]:P:1-f->L0:S:0"),
            ('c', "M[theta]:P:0-f->L0:S:0"),
            ('d', "M[theta]:P:1-f->L0:S:1"),
            ('e', "L0:S:0-d0->L0:S:1"),
        ] {
            if n.relations.iter().any(|r| n.relation_label(r) == text) {
                s.push(c);
            }
        }
        s
    }

    #[test]
    fn pendulum_grammar_has_sixteen_states() {
        let cfg = SearchConfig::default();
        let out = enumerate(root_hypothesis(&context(), &cfg).unwrap(), &cfg);
        assert_eq!(out.nodes.len(), 16);
        let got: BTreeMap<String, Status> = out.nodes.iter().map(|h| (links(&h.inet), h.status)).collect();
        let complete: BTreeSet<&str> = ["ad", "bc", "abe", "bde", "ace"].into_iter().collect();
        let all = ["", "a", "b", "c", "d", "e", "ab", "ac", "ad", "bc", "bd", "be", "ce", "abe", "ace", "bce", "bde"];
        assert_eq!(got.len(), 16);
        for (k, status) in &got {
            assert!(all.contains(&k.as_str()), "unexpected state {k}");
            let want = if complete.contains(k.as_str()) { Status::Complete } else { Status::Incomplete };
            assert_eq!(*status, want, "state {k}");
        }
        // the DAG merges converging derivations
        assert!(out.nodes.iter().any(|h| h.parents.len() > 1));
    }

    #[test]
    fn zero_fit_weight_ranks_by_penalty() {
        let cfg = SearchConfig { w_fit: 0.0, ..Default::default() };
        struct Noisy;
        impl Evaluator for Noisy {
            type Output = ();
            fn evaluate(&self, inet: &INet, _: &[Constraint]) -> Result<(Option<f64>, ()), String> {
                Ok((Some(1.0 / (1.0 + inet.relations.len() as f64)), ()))
            }
        }
        let out = astar(root_hypothesis(&context(), &cfg).unwrap(), &Noisy, &cfg);
        let pens: Vec<f64> = out.ranked.iter().map(|&i| out.nodes[i].penalty).collect();
        assert!(pens.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out.nodes[out.ranked[0]].penalty, 8.0);
    }

    #[test]
    fn penalty_never_decreases_along_edges() {
        let cfg = SearchConfig::default();
        let out = enumerate(root_hypothesis(&context(), &cfg).unwrap(), &cfg);
        for h in &out.nodes {
            for &p in &h.parents {
                assert!(out.nodes[p].penalty <= h.penalty);
            }
        }
        assert!(out.to_dot(&cfg).starts_with("digraph"));
        assert_eq!(out.run_log(&cfg).lines().count(), 16);
    }

    #[test]
    fn caps_at_limit_give_no_children() {
        let cfg = SearchConfig { max_phenom_links: 2, ..Default::default() };
        assert!(expand(&torque_form(), &cfg).is_empty());
    }

    /// Brute-force isomorphism: a bijection of variables that preserves per-variable
    /// type, complex membership (latent complexes may be relabeled) and typed edges.
    fn isomorphic(a: &INet, b: &INet) -> bool {
        if a.variables.len() != b.variables.len() || a.relations.len() != b.relations.len() {
            return false;
        }
        let n = a.variables.len();
        let kind = |r: &RelationKind| format!("{r:?}");
        for perm in permutations(n) {
            let map: Vec<usize> = perm.iter().map(|&p| p as usize).collect();
            let mut cmap: BTreeMap<ComplexId, ComplexId> = BTreeMap::new();
            let mut ok = true;
            for (i, va) in a.variables.iter().enumerate() {
                let vb = &b.variables[map[i]];
                let same_shape = va.cell_dims == vb.cell_dims
                    && va.complex.orientations == vb.complex.orientations
                    && match (&va.complex.domain, &vb.complex.domain) {
                        (Domain::Measured(x), Domain::Measured(y)) => x == y,
                        (Domain::Latent(_), Domain::Latent(_)) => true,
                        _ => false,
                    };
                let consistent = match cmap.get(&va.complex) {
                    Some(c) => *c == vb.complex,
                    None => !cmap.values().any(|c| *c == vb.complex),
                };
                if !same_shape || !consistent {
                    ok = false;
                    break;
                }
                cmap.insert(va.complex.clone(), vb.complex.clone());
            }
            if !ok {
                continue;
            }
            let idx = |n: &INet, id: VarId| n.variables.iter().position(|v| v.id == id).unwrap();
            let mut ea: Vec<(usize, usize, String)> =
                a.relations.iter().map(|r| (map[idx(a, r.src)], map[idx(a, r.dst)], kind(&r.kind))).collect();
            let mut eb: Vec<(usize, usize, String)> = b.relations.iter().map(|r| (idx(b, r.src), idx(b, r.dst), kind(&r.kind))).collect();
            ea.sort();
            eb.sort();
            if ea == eb {
                return true;
            }
        }
        false
    }

    /// Random small I-net: θ, ω plus latent variables in two complexes and random links.
    fn random_inet(picks: &[(u8, u8, u8)]) -> INet {
        let (mut n, th, om) = pendulum_root();
        for &(src, complex, dims) in picks {
            let c = ComplexId { domain: Domain::Latent(u32::from(complex % 2)), orientations: vec![Secondary] };
            let s = if src % 2 == 0 { th } else { om };
            let d = [dims % 2];
            match n.slot(&c, &d).map(|v| v.id) {
                Some(existing) => {
                    let _ = n.add_phenomenological(s, existing);
                }
                None => {
                    let _ = n.add_latent(s, c, &d);
                }
            }
        }
        n
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn signature_equality_matches_isomorphism(
            a in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..4),
            b in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..4),
        ) {
            let (x, y) = (random_inet(&a), random_inet(&b));
            prop_assert_eq!(canonical_signature(&x) == canonical_signature(&y), isomorphic(&x, &y));
        }
    }
}
