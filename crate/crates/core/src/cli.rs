//! Config-driven experiment runner behind the `ergolab` binary.
//!
//! One experiment per invocation. Every run writes `report.json` and one or
//! more CSV tables whose bytes depend only on the config and the seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::averaging::{convergence_sweep, sweep_csv, CubeShape, OperatorFamily};
use crate::covering::{
    birkhoff_contradiction_experiment, birkhoff_csv, greedy_cube_selection, max_disjoint_cover, random_candidates,
    BirkhoffOptions, SelectionStrategy,
};
use crate::distributions::TargetLaw;
use crate::error::{Error, Result};
use crate::sculptor::{
    independence_probe, independence_probe_shifted, is_degenerate, plateau_profile, sculpt, stage_csv, stage_reports,
    SculptConfig, SculptPlan,
};
use crate::space::{FiniteSystem, GroupElement, Observable, SystemSpec};
use crate::towers::{build_tower_zd, kakutani_partition, rokhlin_tower_1d, trace_csv, ZdTowerParams};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest window volume handed to the exact cover search.
const EXACT_COVER_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Average,
    Shells,
    Randomsets,
    Kakutani,
    Tower,
    TowerZd,
    Cover,
    Birkhoff,
    Sculpt,
    Plateau,
    Independence,
}

impl Kind {
    pub const ALL: [Kind; 11] = [
        Kind::Average,
        Kind::Shells,
        Kind::Randomsets,
        Kind::Kakutani,
        Kind::Tower,
        Kind::TowerZd,
        Kind::Cover,
        Kind::Birkhoff,
        Kind::Sculpt,
        Kind::Plateau,
        Kind::Independence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Average => "average",
            Kind::Shells => "shells",
            Kind::Randomsets => "randomsets",
            Kind::Kakutani => "kakutani",
            Kind::Tower => "tower",
            Kind::TowerZd => "tower-zd",
            Kind::Cover => "cover",
            Kind::Birkhoff => "birkhoff",
            Kind::Sculpt => "sculpt",
            Kind::Plateau => "plateau",
            Kind::Independence => "independence",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// How the test function `f` is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObservableSpec {
    /// Independent uniform values on `[-1, 1]`, centered by default.
    Random {
        #[serde(default = "yes")]
        zero_mean: bool,
    },
    Values { values: Vec<f64> },
}

fn yes() -> bool {
    true
}

impl Default for ObservableSpec {
    fn default() -> Self {
        ObservableSpec::Random { zero_mean: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub schedule: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellParams {
    pub schedule: Vec<usize>,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KakutaniParams {
    /// Explicit base set; otherwise each atom joins with probability `density`.
    pub base: Option<Vec<usize>>,
    pub density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerParams {
    pub n: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerZdParams {
    pub side: usize,
    pub eps: f64,
    pub aux_side: Option<usize>,
    pub max_iters: Option<usize>,
    pub delta: Option<f64>,
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverParams {
    pub instances: usize,
    pub window: usize,
    pub dim: usize,
    pub max_side: usize,
    #[serde(default)]
    pub strategy: SelectionStrategy,
    /// Also run the exact search on windows of at most 64 cells.
    #[serde(default)]
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirkhoffParams {
    pub s: f64,
    pub schedule: Vec<usize>,
    pub l_divisor: Option<usize>,
    pub h_factor: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SculptParams {
    pub target: TargetLaw,
    #[serde(default)]
    pub plan: SculptConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateauParams {
    pub k: usize,
    #[serde(default = "eight")]
    pub samples: usize,
    pub r_max: Option<usize>,
}

fn eight() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependenceParams {
    pub pairs: Vec<[usize; 2]>,
    /// Control probes: stage `k` against its own translate by this shift.
    #[serde(default)]
    pub control: Vec<ControlProbe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlProbe {
    pub k: usize,
    pub shift: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub average: Option<SweepParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shells: Option<ShellParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub randomsets: Option<SweepParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kakutani: Option<KakutaniParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tower: Option<TowerParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    #[serde(rename = "tower-zd")]
    pub tower_zd: Option<TowerZdParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cover: Option<CoverParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub birkhoff: Option<BirkhoffParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sculpt: Option<SculptParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau: Option<PlateauParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub independence: Option<IndependenceParams>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(out: &mut Vec<Diagnostic>, field: &str, message: impl Into<String>) {
    out.push(Diagnostic { field: field.into(), message: message.into() });
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Kind from the config, or the one given on the command line.
    pub fn resolved_kind(&self, requested: Option<Kind>) -> Option<Kind> {
        requested.or(self.kind)
    }

    fn observable_spec(&self) -> ObservableSpec {
        self.observable.clone().unwrap_or_default()
    }

    fn needs_seed(&self, kind: Kind) -> bool {
        let random_f = matches!(self.observable_spec(), ObservableSpec::Random { .. });
        match kind {
            Kind::Average | Kind::Shells | Kind::Birkhoff => random_f,
            Kind::Randomsets | Kind::Cover => true,
            Kind::Kakutani => self.kakutani.as_ref().is_some_and(|k| k.base.is_none()),
            Kind::Tower | Kind::TowerZd | Kind::Sculpt | Kind::Plateau | Kind::Independence => false,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses and validates config text, returning every problem found.
pub fn validate_text(text: &str, requested: Option<Kind>) -> (Option<ExperimentConfig>, Vec<Diagnostic>) {
    match ExperimentConfig::from_toml(text) {
        Ok(cfg) => {
            let d = validate(&cfg, requested);
            (Some(cfg), d)
        }
        Err(e) => (None, vec![Diagnostic { field: "config".into(), message: e.to_string() }]),
    }
}

pub fn validate(cfg: &ExperimentConfig, requested: Option<Kind>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let kind = cfg.resolved_kind(requested);
    if let (Some(a), Some(b)) = (requested, cfg.kind) {
        if a != b {
            diag(&mut out, "kind", format!("config says `{b}` but `{a}` was requested"));
        }
    }
    let system = match &cfg.system {
        None => {
            diag(&mut out, "system", "missing field");
            None
        }
        Some(spec) => match spec.build() {
            Ok(s) => Some(s),
            Err(e) => {
                diag(&mut out, "system", e.to_string());
                None
            }
        },
    };
    if let (Some(ObservableSpec::Values { values }), Some(s)) = (&cfg.observable, &system) {
        if values.len() != s.atoms() {
            diag(&mut out, "observable.values", format!("expected {} values, got {}", s.atoms(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            diag(&mut out, "observable.values", "values must be finite");
        }
    }
    let Some(kind) = kind else {
        diag(&mut out, "kind", "missing field");
        return out;
    };
    if cfg.needs_seed(kind) && cfg.seed.is_none() {
        diag(&mut out, "seed", format!("missing field; `{kind}` is randomized"));
    }
    let missing = |out: &mut Vec<Diagnostic>, t: &str| diag(out, t, "missing table");
    let schedule = |out: &mut Vec<Diagnostic>, field: &str, v: &[usize]| {
        if v.is_empty() {
            diag(out, field, "must not be empty");
        }
        if v.contains(&0) {
            diag(out, field, "entries must be >= 1");
        }
    };
    let unit_interval = |out: &mut Vec<Diagnostic>, field: &str, v: f64| {
        if !(v > 0.0 && v < 1.0) {
            diag(out, field, format!("must lie in (0, 1), got {v}"));
        }
    };
    match kind {
        Kind::Average => match &cfg.average {
            None => missing(&mut out, "average"),
            Some(p) => schedule(&mut out, "average.schedule", &p.schedule),
        },
        Kind::Randomsets => match &cfg.randomsets {
            None => missing(&mut out, "randomsets"),
            Some(p) => schedule(&mut out, "randomsets.schedule", &p.schedule),
        },
        Kind::Shells => match &cfg.shells {
            None => missing(&mut out, "shells"),
            Some(p) => {
                schedule(&mut out, "shells.schedule", &p.schedule);
                if !(p.c > 0.0) {
                    diag(&mut out, "shells.c", format!("must be positive, got {}", p.c));
                }
            }
        },
        Kind::Kakutani => match &cfg.kakutani {
            None => missing(&mut out, "kakutani"),
            Some(p) => match (&p.base, p.density) {
                (Some(_), Some(_)) => diag(&mut out, "kakutani", "give either `base` or `density`, not both"),
                (None, None) => diag(&mut out, "kakutani", "missing field `base` or `density`"),
                (None, Some(q)) if !(q > 0.0 && q <= 1.0) => {
                    diag(&mut out, "kakutani.density", format!("must lie in (0, 1], got {q}"))
                }
                (Some(b), None) if b.is_empty() => diag(&mut out, "kakutani.base", "must not be empty"),
                _ => {}
            },
        },
        Kind::Tower => match &cfg.tower {
            None => missing(&mut out, "tower"),
            Some(p) => {
                if p.n == 0 {
                    diag(&mut out, "tower.n", "must be >= 1");
                }
                if !(p.eps > 0.0) {
                    diag(&mut out, "tower.eps", format!("must be positive, got {}", p.eps));
                }
            }
        },
        Kind::TowerZd => match &cfg.tower_zd {
            None => missing(&mut out, "tower-zd"),
            Some(p) => {
                if p.side == 0 {
                    diag(&mut out, "tower-zd.side", "must be >= 1");
                }
                unit_interval(&mut out, "tower-zd.eps", p.eps);
                if let Some(d) = p.delta {
                    if !(d > 0.0) {
                        diag(&mut out, "tower-zd.delta", format!("must be positive, got {d}"));
                    }
                }
            }
        },
        Kind::Cover => match &cfg.cover {
            None => missing(&mut out, "cover"),
            Some(p) => {
                for (f, v) in [("instances", p.instances), ("window", p.window), ("dim", p.dim), ("max_side", p.max_side)] {
                    if v == 0 {
                        diag(&mut out, &format!("cover.{f}"), "must be >= 1");
                    }
                }
            }
        },
        Kind::Birkhoff => match &cfg.birkhoff {
            None => missing(&mut out, "birkhoff"),
            Some(p) => {
                schedule(&mut out, "birkhoff.schedule", &p.schedule);
                if !(p.s > 0.0) {
                    diag(&mut out, "birkhoff.s", format!("must be positive, got {}", p.s));
                }
                if p.l_divisor == Some(0) {
                    diag(&mut out, "birkhoff.l_divisor", "must be >= 1");
                }
                if p.h_factor.is_some_and(|h| h < 2) {
                    diag(&mut out, "birkhoff.h_factor", "must be >= 2");
                }
            }
        },
        Kind::Sculpt | Kind::Plateau | Kind::Independence => {
            match &cfg.sculpt {
                None => missing(&mut out, "sculpt"),
                Some(p) => {
                    if let Err(e) = p.target.validate() {
                        diag(&mut out, "sculpt.target", e.to_string());
                    }
                    validate_plan(&mut out, &p.plan);
                }
            }
            let stages = cfg.sculpt.as_ref().map(|p| p.plan.stages).unwrap_or(0);
            let stage_ok = |out: &mut Vec<Diagnostic>, field: &str, k: usize| {
                if k == 0 || k > stages {
                    diag(out, field, format!("stage {k} outside 1..={stages}"));
                }
            };
            if kind == Kind::Plateau {
                match &cfg.plateau {
                    None => missing(&mut out, "plateau"),
                    Some(p) => {
                        stage_ok(&mut out, "plateau.k", p.k);
                        if p.samples == 0 {
                            diag(&mut out, "plateau.samples", "must be >= 1");
                        }
                    }
                }
            }
            if kind == Kind::Independence {
                match &cfg.independence {
                    None => missing(&mut out, "independence"),
                    Some(p) => {
                        if p.pairs.is_empty() && p.control.is_empty() {
                            diag(&mut out, "independence.pairs", "must not be empty");
                        }
                        for [k, j] in &p.pairs {
                            stage_ok(&mut out, "independence.pairs", *k);
                            stage_ok(&mut out, "independence.pairs", *j);
                            if k == j {
                                diag(&mut out, "independence.pairs", format!("pair ({k}, {j}) repeats a stage"));
                            }
                        }
                        for c in &p.control {
                            stage_ok(&mut out, "independence.control.k", c.k);
                            if let Some(s) = &system {
                                if c.shift.len() != s.dim() {
                                    diag(&mut out, "independence.control.shift", "shift dimension differs from the system");
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn validate_plan(out: &mut Vec<Diagnostic>, p: &SculptConfig) {
    if p.stages == 0 {
        diag(out, "sculpt.plan.stages", "must be >= 1");
    }
    if p.first_stage_index == 0 {
        diag(out, "sculpt.plan.first_stage_index", "must be >= 1");
    }
    if !(p.plateau_safety > 0.0) {
        diag(out, "sculpt.plan.plateau_safety", format!("must be positive, got {}", p.plateau_safety));
    }
    for (f, v) in [("eps_tower", p.eps_tower), ("decay", p.decay)] {
        if !(v > 0.0 && v < 1.0) {
            diag(out, &format!("sculpt.plan.{f}"), format!("must lie in (0, 1), got {v}"));
        }
    }
    if !(p.eta > 0.0) {
        diag(out, "sculpt.plan.eta", format!("must be positive, got {}", p.eta));
    }
    for (f, v) in [("subtowers", &p.subtowers), ("periods", &p.periods)] {
        if let Some(v) = v {
            if v.len() != p.stages {
                diag(out, &format!("sculpt.plan.{f}"), format!("needs {} entries, got {}", p.stages, v.len()));
            }
            if v.contains(&0) {
                diag(out, &format!("sculpt.plan.{f}"), "entries must be >= 1");
            }
        }
    }
}

/// Uniform values on `[-1, 1]` from a seeded stream, optionally centered.
pub fn random_observable(system: &FiniteSystem, seed: u64, zero_mean: bool) -> Observable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Observable::new((0..system.atoms()).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .expect("finite values");
    if zero_mean {
        f.sub_constant(system.mean(&f))
    } else {
        f
    }
}

/// Files and summary produced by a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    pub files: Vec<PathBuf>,
}

struct Tables {
    csv: Vec<(String, String)>,
    results: Value,
}

fn observable(cfg: &ExperimentConfig, system: &FiniteSystem) -> Result<Observable> {
    match cfg.observable_spec() {
        ObservableSpec::Values { values } => {
            let f = Observable::new(values)?;
            system.check_observable(&f)?;
            Ok(f)
        }
        ObservableSpec::Random { zero_mean } => Ok(random_observable(system, cfg.seed.unwrap_or(0), zero_mean)),
    }
}

fn plan_for(cfg: &ExperimentConfig, system: &FiniteSystem) -> Result<SculptPlan> {
    let p = cfg.sculpt.as_ref().ok_or_else(|| Error::Config("missing table `sculpt`".into()))?;
    sculpt(system, &p.target, &p.plan)
}

fn opt_csv(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn compute(kind: Kind, cfg: &ExperimentConfig, system: &FiniteSystem) -> Result<Tables> {
    let seed = cfg.seed.unwrap_or(0);
    let table = |name: &str| Error::Config(format!("missing table `{name}`"));
    let sweep = |family: OperatorFamily, ns: &[usize]| -> Result<Tables> {
        let f = observable(cfg, system)?;
        let rows = convergence_sweep(system, &f, &family, ns)?;
        Ok(Tables {
            csv: vec![("sweep.csv".into(), sweep_csv(&rows))],
            results: json!({ "family": family, "rows": rows.len(), "final_l2_dev": rows.last().map(|r| r.l2_dev) }),
        })
    };
    match kind {
        Kind::Average => sweep(OperatorFamily::Cube, &cfg.average.as_ref().ok_or_else(|| table("average"))?.schedule),
        Kind::Shells => {
            let p = cfg.shells.as_ref().ok_or_else(|| table("shells"))?;
            sweep(OperatorFamily::Shell { c: p.c }, &p.schedule)
        }
        Kind::Randomsets => {
            let p = cfg.randomsets.as_ref().ok_or_else(|| table("randomsets"))?;
            sweep(OperatorFamily::RandomSubset { seed }, &p.schedule)
        }
        Kind::Kakutani => {
            let p = cfg.kakutani.as_ref().ok_or_else(|| table("kakutani"))?;
            let base = match (&p.base, p.density) {
                (Some(b), _) => system.set(b.clone())?,
                (None, Some(q)) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut mask: Vec<bool> = (0..system.atoms()).map(|_| rng.random_bool(q)).collect();
                    if !mask.contains(&true) {
                        mask[0] = true;
                    }
                    system.set_from_mask(&mask)
                }
                (None, None) => return Err(Error::Config("kakutani needs `base` or `density`".into())),
            };
            let part = kakutani_partition(system, &base)?;
            part.verify(system)?;
            let mut csv = String::from("height,base_atoms\n");
            for c in part.columns() {
                csv.push_str(&format!("{},{}\n", c.height, c.base.len()));
            }
            Ok(Tables {
                csv: vec![("columns.csv".into(), csv)],
                results: json!({
                    "base_atoms": base.len(),
                    "columns": part.columns().len(),
                    "min_height": part.min_height(),
                    "max_height": part.max_height(),
                }),
            })
        }
        Kind::Tower => {
            let p = cfg.tower.as_ref().ok_or_else(|| table("tower"))?;
            let t = rokhlin_tower_1d(system, p.n, p.eps)?;
            let csv = format!(
                "n,eps,mu_E,bound,min_height,base_atoms\n{},{:e},{:e},{:e},{},{}\n",
                p.n,
                p.eps,
                t.tower.residual_measure(),
                t.bound,
                t.min_height,
                t.tower.base().len()
            );
            Ok(Tables {
                csv: vec![("tower.csv".into(), csv)],
                results: json!({ "mu_E": t.tower.residual_measure(), "bound": t.bound, "min_height": t.min_height }),
            })
        }
        Kind::TowerZd => {
            let p = cfg.tower_zd.as_ref().ok_or_else(|| table("tower-zd"))?;
            let mut params = ZdTowerParams::new(p.side, p.eps);
            params.aux_side = p.aux_side;
            if let Some(v) = p.max_iters {
                params.max_iters = v;
            }
            if let Some(v) = p.delta {
                params.delta = v;
            }
            if let Some(v) = p.patience {
                params.patience = v;
            }
            let b = build_tower_zd(system, &params)?;
            Ok(Tables {
                csv: vec![("trace.csv".into(), trace_csv(&b.trace))],
                results: json!({
                    "measure": b.tower.measure(),
                    "reached": b.reached,
                    "aux_side": b.aux_side,
                    "iterations": b.trace.len().saturating_sub(1),
                }),
            })
        }
        Kind::Cover => {
            let p = cfg.cover.as_ref().ok_or_else(|| table("cover"))?;
            let window = CubeShape::new(p.window, p.dim)?;
            let exact = p.exact && window.volume() <= EXACT_COVER_CELLS;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut csv = String::from("instance,candidates,selected,covered,volume,fraction,exact_max\n");
            let mut worst = f64::INFINITY;
            for i in 0..p.instances {
                let cands = random_candidates(window, p.max_side, &mut rng);
                let best = if exact { Some(max_disjoint_cover(window, &cands)?) } else { None };
                let n = cands.len();
                let sel = greedy_cube_selection(window, cands, p.strategy)?;
                worst = worst.min(sel.fraction);
                csv.push_str(&format!(
                    "{i},{n},{},{},{},{:e},{}\n",
                    sel.selected.len(),
                    sel.covered,
                    sel.volume,
                    sel.fraction,
                    best.map(|b| b.to_string()).unwrap_or_default()
                ));
            }
            Ok(Tables {
                csv: vec![("cover.csv".into(), csv)],
                results: json!({ "min_fraction": worst, "bound": 3f64.powi(-(p.dim as i32)) }),
            })
        }
        Kind::Birkhoff => {
            let p = cfg.birkhoff.as_ref().ok_or_else(|| table("birkhoff"))?;
            let mut opts = BirkhoffOptions::new(p.s);
            if let Some(v) = p.l_divisor {
                opts.l_divisor = v;
            }
            if let Some(v) = p.h_factor {
                opts.h_factor = v;
            }
            let f = observable(cfg, system)?;
            let rows = birkhoff_contradiction_experiment(system, &f, &opts, &p.schedule)?;
            Ok(Tables {
                csv: vec![("birkhoff.csv".into(), birkhoff_csv(&rows, system.dim()))],
                results: json!({ "rows": rows }),
            })
        }
        Kind::Sculpt => {
            let plan = plan_for(cfg, system)?;
            let samples = cfg.sculpt.as_ref().map_or(0, |p| p.plan.plateau_samples);
            let rows = stage_reports(&plan, samples)?;
            Ok(Tables {
                csv: vec![("stages.csv".into(), stage_csv(&rows))],
                results: json!({ "plan": plan.record(), "degenerate": is_degenerate(&plan)?, "stages": rows }),
            })
        }
        Kind::Plateau => {
            let p = cfg.plateau.as_ref().ok_or_else(|| table("plateau"))?;
            let plan = plan_for(cfg, system)?;
            let prof = plateau_profile(&plan, p.k, p.samples, p.r_max)?;
            let mut csv = String::from("n,bl_to_base\n");
            for (n, d) in &prof {
                csv.push_str(&format!("{n},{}\n", opt_csv(*d)));
            }
            let max = prof.iter().filter_map(|r| r.1).fold(0.0, f64::max);
            Ok(Tables {
                csv: vec![("plateau.csv".into(), csv)],
                results: json!({ "plan": plan.record(), "k": p.k, "max_bl": max }),
            })
        }
        Kind::Independence => {
            let p = cfg.independence.as_ref().ok_or_else(|| table("independence"))?;
            let plan = plan_for(cfg, system)?;
            let mut csv = String::from("probe,k,j,shift,value\n");
            for [k, j] in &p.pairs {
                csv.push_str(&format!("stages,{k},{j},,{:e}\n", independence_probe(&plan, *k, *j)?));
            }
            for c in &p.control {
                let z = GroupElement::new(c.shift.clone());
                let shift: Vec<String> = c.shift.iter().map(|v| v.to_string()).collect();
                csv.push_str(&format!(
                    "control,{},,{},{:e}\n",
                    c.k,
                    shift.join(" "),
                    independence_probe_shifted(&plan, c.k, &z)?
                ));
            }
            Ok(Tables { csv: vec![("independence.csv".into(), csv)], results: json!({ "plan": plan.record() }) })
        }
    }
}

/// Runs one experiment and writes its report and tables into `out_dir`.
pub fn run(cfg: &ExperimentConfig, requested: Option<Kind>, out_dir: &Path) -> Result<RunOutput> {
    let diags = validate(cfg, requested);
    if !diags.is_empty() {
        let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(Error::Config(msg.join("; ")));
    }
    let kind = cfg.resolved_kind(requested).expect("validated");
    let mut effective = cfg.clone();
    effective.kind = Some(kind);
    let t0 = Instant::now();
    let system = effective.system.as_ref().expect("validated").build()?;
    let setup = t0.elapsed();
    let tables = compute(kind, &effective, &system)?;
    let total = t0.elapsed();

    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(e.to_string()))?;
    let mut files = Vec::new();
    for (name, body) in &tables.csv {
        let path = out_dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::Io(e.to_string()))?;
        files.push(path);
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "seed": effective.seed,
        "config": effective,
        "config_hash": effective.hash(),
        "versions": { "ergolab": env!("CARGO_PKG_VERSION") },
        "system": { "atoms": system.atoms(), "dim": system.dim(), "periods": system.periods() },
        "timings": {
            "setup_ms": setup.as_secs_f64() * 1e3,
            "total_ms": total.as_secs_f64() * 1e3,
        },
        "outputs": tables.csv.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "results": tables.results,
    });
    let path = out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::Io(e.to_string()))?;
    files.push(path);
    Ok(RunOutput { report, files })
}
