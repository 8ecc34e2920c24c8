//! Subcommand drivers. Every artifact is assembled in memory and written at the end
//! by one writer; nothing depends on wall-clock time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use inet_core::basis::BasisLibrary;
use inet_core::fixtures::{self, add_noise, simulate_pendulum, simulate_wave1d, PendulumSpec, Sidecar, WaveSpec};
use inet_core::forms::{extract_constraints, validate, INet};
use inet_core::interpret::{Interpretation, Mode};
use inet_core::phenomenology::FitRecord;
use inet_core::pipeline::{evaluate, DataEvaluator, RegionSpec};
use inet_core::search::{astar, canonical_signature, enumerate, root_hypothesis, SearchOutcome};
use inet_core::symbolic::{emit, emit_expanded, equivalence_classes, EquivalenceClass};
use inet_core::topology::{AxisKind, Orientation};
use inet_core::Evaluation64;

use crate::config::{AxisConfig, ContextConfig, MeasuredConfig, RunConfig};
use crate::error::CliError;

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub window: Option<usize>,
    pub degree: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.interpretation.mode = m;
        }
        if let Some(w) = self.window {
            cfg.interpretation.window = vec![w];
        }
        if let Some(d) = self.degree {
            cfg.interpretation.degree = vec![d];
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub key: String,
    pub text: String,
    pub expanded: String,
    pub equations: Vec<String>,
    pub coefficients: Vec<FitRecord>,
    pub bounds: Vec<Option<(f64, f64)>>,
    pub train_loss: f64,
    pub test_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub id: String,
    pub signature: String,
    pub penalty: f64,
    pub train_loss: Option<f64>,
    pub test_loss: Option<f64>,
    pub structure_score: f64,
    pub fit_score: f64,
    pub score: f64,
    pub class_key: Option<String>,
    pub constraints: Vec<ConstraintReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub seed: u64,
    pub mode: Mode,
    pub states: usize,
    pub expansions: usize,
    pub ranked: Vec<RankedEntry>,
    pub classes: Vec<EquivalenceClass>,
    pub diagnostics: Vec<String>,
}

fn constraint_reports(e: &Evaluation64) -> Vec<ConstraintReport> {
    e.constraints
        .iter()
        .map(|c| {
            let rows: f64 = c.regions.iter().map(|r| r.fit.train_rows as f64).sum();
            let train = c.regions.iter().map(|r| r.fit.normalized_train_loss() * r.fit.train_rows as f64).sum::<f64>() / rows.max(1.0);
            ConstraintReport {
                key: c.key.clone(),
                text: c.text.clone(),
                expanded: c.expanded.clone(),
                equations: c.regions.iter().map(|r| r.equation.clone()).collect(),
                coefficients: c.regions.iter().map(|r| r.record.clone()).collect(),
                bounds: c.regions.iter().map(|r| r.bounds).collect(),
                train_loss: train,
                test_loss: c.loss,
            }
        })
        .collect()
}

fn ranked_entries(out: &SearchOutcome<Evaluation64>, cfg: &RunConfig) -> Vec<RankedEntry> {
    let s = &cfg.search;
    out.ranked
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let h = &out.nodes[i];
            let eval = out.outputs.get(&i);
            let constraints = eval.map(constraint_reports).unwrap_or_default();
            let train_loss = (!constraints.is_empty())
                .then(|| constraints.iter().map(|c| c.train_loss).sum::<f64>() / constraints.len() as f64);
            RankedEntry {
                rank: k + 1,
                id: h.name(),
                signature: h.signature.clone(),
                penalty: h.penalty,
                train_loss,
                test_loss: h.loss,
                structure_score: s.w_struct * h.penalty,
                fit_score: s.w_fit * h.loss.unwrap_or(0.0),
                score: h.score(s),
                class_key: eval.map(|e| e.class_key.clone()),
                constraints,
                error: h.error.clone(),
            }
        })
        .collect()
}

fn residual_csv(e: &Evaluation64, axes: &[String]) -> String {
    let mut s = String::from("constraint,");
    for a in axes {
        let _ = write!(s, "{a},");
    }
    s.push_str("residual,train\n");
    for (k, c) in e.constraints.iter().enumerate() {
        for r in &c.residuals {
            let _ = write!(s, "{k},");
            for x in &r.center {
                let _ = write!(s, "{x:?},");
            }
            let _ = writeln!(s, "{:?},{}", r.value, u8::from(r.train));
        }
    }
    s
}

fn load(cfg_path: &Path, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(cfg_path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn axis_names(cfg: &RunConfig) -> Vec<String> {
    cfg.context.axes.iter().map(|a| a.name.clone()).collect()
}

/// Search without fitting: every reachable state, ranked by penalty.
pub fn run_enumerate(cfg_path: &Path, overrides: &Overrides) -> Result<Report, CliError> {
    let cfg = load(cfg_path, overrides)?;
    let root = root_hypothesis(&cfg.context()?, &cfg.search).map_err(|e| CliError::Config(e.to_string()))?;
    let out = enumerate(root, &cfg.search);
    let ranked = out
        .ranked
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let h = &out.nodes[i];
            RankedEntry {
                rank: k + 1,
                id: h.name(),
                signature: h.signature.clone(),
                penalty: h.penalty,
                train_loss: None,
                test_loss: None,
                structure_score: cfg.search.w_struct * h.penalty,
                fit_score: 0.0,
                score: cfg.search.w_struct * h.penalty,
                class_key: None,
                constraints: Vec::new(),
                error: h.error.clone(),
            }
        })
        .collect();
    let report = Report {
        seed: cfg.seed,
        mode: cfg.interpretation.mode,
        states: out.nodes.len(),
        expansions: out.expansions,
        ranked,
        classes: Vec::new(),
        diagnostics: out.diagnostics.clone(),
    };
    let dir = &cfg.output;
    write(&dir.join("enumerate.json"), &json(&report))?;
    write(&dir.join("dag.dot"), &out.to_dot(&cfg.search))?;
    write(&dir.join("run_log.jsonl"), &out.run_log(&cfg.search))?;
    Ok(report)
}

/// Full run: search, fit every complete hypothesis, rank, write artifacts.
pub fn run_search(cfg_path: &Path, overrides: &Overrides, explain: bool) -> Result<Report, CliError> {
    let cfg = load(cfg_path, overrides)?;
    let data = cfg.dataset()?;
    let root = root_hypothesis(&cfg.context()?, &cfg.search).map_err(|e| CliError::Config(e.to_string()))?;
    let evaluator = DataEvaluator { data: &data, config: cfg.eval_config() };
    let out = astar(root, &evaluator, &cfg.search);
    let ranked = ranked_entries(&out, &cfg);
    let classes = equivalence_classes(ranked.iter().filter_map(|r| r.class_key.clone().map(|k| (k, r.id.clone()))));
    let report = Report {
        seed: cfg.seed,
        mode: cfg.interpretation.mode,
        states: out.nodes.len(),
        expansions: out.expansions,
        ranked,
        classes,
        diagnostics: out.diagnostics.clone(),
    };

    let dir = &cfg.output;
    let axes = axis_names(&cfg);
    write(&dir.join("ranked.json"), &json(&report))?;
    write(&dir.join("dag.dot"), &out.to_dot(&cfg.search))?;
    write(&dir.join("run_log.jsonl"), &out.run_log(&cfg.search))?;
    for entry in &report.ranked {
        let mut text = format!("{} {}\n", entry.id, entry.signature);
        for c in &entry.constraints {
            let _ = writeln!(text, "{}\n  {}", c.text, c.expanded);
            for eq in &c.equations {
                let _ = writeln!(text, "  {eq}");
            }
        }
        write(&dir.join("equations").join(format!("{}.txt", entry.signature)), &text)?;
    }
    for &i in &out.ranked {
        if let Some(e) = out.outputs.get(&i) {
            let sig = &out.nodes[i].signature;
            write(&dir.join("residuals").join(format!("{sig}.csv")), &residual_csv(e, &axes))?;
            if explain {
                write(&dir.join("plans").join(format!("{sig}.txt")), &(e.plan.join("\n") + "\n"))?;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub signature: String,
    pub loss: f64,
    pub class_key: String,
    pub constraints: Vec<ConstraintReport>,
}

fn read_inet(path: &Path) -> Result<INet, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let inet = INet::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    validate(&inet).map_err(|errs| {
        CliError::Config(format!("{}: {}", path.display(), errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))
    })?;
    Ok(inet)
}

/// Fits a given I-net against the config's data.
pub fn run_fit(cfg_path: &Path, inet_path: &Path, overrides: &Overrides, explain: bool) -> Result<FitReport, CliError> {
    let cfg = load(cfg_path, overrides)?;
    let inet = read_inet(inet_path)?;
    let data = cfg.dataset()?;
    let constraints = extract_constraints(&inet);
    if constraints.is_empty() {
        return Err(CliError::Config(format!("{} poses no constraint", inet_path.display())));
    }
    let e = evaluate(&inet, &constraints, &data, &cfg.eval_config()).map_err(|e| CliError::Internal(e.to_string()))?;
    let report = FitReport {
        signature: canonical_signature(&inet),
        loss: e.loss,
        class_key: e.class_key.clone(),
        constraints: constraint_reports(&e),
    };
    let dir = &cfg.output;
    write(&dir.join("fit.json"), &json(&report))?;
    write(&dir.join("residuals.csv"), &residual_csv(&e, &axis_names(&cfg)))?;
    if explain {
        write(&dir.join("plan.txt"), &(e.plan.join("\n") + "\n"))?;
    }
    Ok(report)
}

/// DOT graph and symbolic equations of an I-net.
pub fn run_emit(inet_path: &Path, basis: &BasisLibrary, out: &Path) -> Result<Vec<String>, CliError> {
    let inet = read_inet(inet_path)?;
    let mut lines = Vec::new();
    for c in extract_constraints(&inet) {
        let text = emit(&inet, &c).map_err(|e| CliError::Internal(e.to_string()))?;
        let bases = vec![basis.clone(); c.function_slots.len()];
        let expanded = match emit_expanded(&inet, &c, &bases) {
            Ok(eq) => eq.render(),
            Err(e) => format!("(not expandable: {e})"),
        };
        lines.push(format!("{text}\n  {expanded}"));
    }
    write(&out.join("inet.dot"), &inet.to_dot())?;
    write(&out.join("equations.txt"), &(lines.join("\n") + "\n"))?;
    Ok(lines)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum System {
    Pendulum,
    Wave,
}

/// Runs a fixture and writes its CSV, sidecar and a ready-to-run config.
pub fn run_simulate(system: System, spec_path: Option<&Path>, noise: f64, seed: u64, out: &Path) -> Result<PathBuf, CliError> {
    let spec_text = spec_path
        .map(|p| std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))))
        .transpose()?;
    let (name, data, spec_json, dims, interpretation, regions) = match system {
        System::Pendulum => {
            let spec: PendulumSpec = match &spec_text {
                Some(t) => serde_json::from_str(t).map_err(|e| CliError::Config(e.to_string()))?,
                None => PendulumSpec::default(),
            };
            let d = simulate_pendulum(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            ("theta", d, serde_json::to_value(&spec).expect("spec serializes"), vec![0u8], Interpretation::differential(), None)
        }
        System::Wave => {
            let spec: WaveSpec = match &spec_text {
                Some(t) => serde_json::from_str(t).map_err(|e| CliError::Config(e.to_string()))?,
                None => WaveSpec::default(),
            };
            let d = simulate_wave1d(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            let edges: Vec<f64> = spec.speed.iter().skip(1).map(|r| r.from).collect();
            let regions = (!edges.is_empty()).then(|| RegionSpec { axis: "x".into(), edges });
            ("u", d, serde_json::to_value(&spec).expect("spec serializes"), vec![0, 0], Interpretation::integral(25, 3), regions)
        }
    };
    let values = if noise > 0.0 { add_noise(&data.values, noise, seed) } else { data.values.clone() };
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let csv = out.join(format!("{name}.csv"));
    fixtures::write_csv(&csv, &data, &values).map_err(|e| CliError::Internal(e.to_string()))?;
    let sidecar = Sidecar {
        system: format!("{system:?}").to_lowercase(),
        spec: spec_json,
        seed,
        noise,
        units: BTreeMap::new(),
        axes: data.axes.clone(),
        energy_drift: data.energy_drift,
    };
    fixtures::write_sidecar(&out.join(format!("{name}.json")), &sidecar).map_err(|e| CliError::Internal(e.to_string()))?;

    let axes = data
        .axes
        .iter()
        .map(|(n, len, h)| AxisConfig { name: n.clone(), kind: if n == "t" { AxisKind::Time } else { AxisKind::Space }, extent: *len, spacing: *h })
        .collect();
    let measured = vec![MeasuredConfig {
        name: name.into(),
        orientations: vec![Orientation::Primary; dims.len()],
        dims,
        data: PathBuf::from(format!("{name}.csv")),
        units: BTreeMap::new(),
    }];
    let cfg = RunConfig {
        context: ContextConfig { axes, measured },
        search: Default::default(),
        interpretation,
        split: 0.7,
        fit: Default::default(),
        basis: BasisLibrary::standard(),
        regions,
        output: PathBuf::from("out"),
        seed,
    };
    let cfg_path = out.join("config.json");
    write(&cfg_path, &(cfg.to_json() + "\n"))?;
    Ok(cfg_path)
}
