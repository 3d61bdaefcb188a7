//! Sculpting `f = sum_j f_j` so that normalized averages `P_{N_j} f / ||P_{N_j} f||`
//! have prescribed value distributions.
//!
//! Stage `j` lives on a tower with base `q_j Z^d`, cut into `k_j^d` subcubes
//! of side `h_j`; the rest of each period box is the residual `E_j`. Every
//! stage function is `q_j`-periodic with zero sum over a period box, so cube
//! averages whose side is a multiple of `q_j` annihilate it exactly.

use serde::{Deserialize, Serialize};

use crate::averaging::{apply_operator, cube_operator, lp_norm, CubeShape, Norm};
use crate::distributions::{bl_distance, law, EmpiricalDistribution, TargetLaw};
use crate::error::{Error, Result};
use crate::space::{AtomSet, FiniteSystem, GroupElement, Observable};
use crate::towers::Tower;

/// Norms below this are treated as a vanishing average.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Bins per axis when quantizing pairs for the independence probe.
pub const PROBE_BINS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueOrder {
    /// Ascending quantiles along the tower.
    Sorted,
    /// Even ranks ascending then odd ranks descending, rotated so the residual
    /// value sits between its nearest neighbours.
    #[default]
    Zigzag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    #[default]
    L1,
    L2,
    Sup,
}

impl Normalizer {
    fn norm(self) -> Norm {
        match self {
            Normalizer::L1 => Norm::L1,
            Normalizer::L2 => Norm::L2,
            Normalizer::Sup => Norm::Sup,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SculptConfig {
    pub stages: usize,
    /// Stage `j` uses `k_j = first_stage_index + j - 1` subtowers per axis.
    pub first_stage_index: usize,
    /// Explicit `k_j` per stage, overriding `first_stage_index`.
    pub subtowers: Option<Vec<usize>>,
    /// Explicit periods `q_j`; chosen automatically when absent.
    pub periods: Option<Vec<usize>>,
    pub plateau_safety: f64,
    pub eps_tower: f64,
    pub decay: f64,
    pub eta: f64,
    pub value_order: ValueOrder,
    pub normalizer: Normalizer,
    /// Extra candidate scales for `N_j`.
    pub grid: Vec<usize>,
    /// Samples per stage for the plateau column of the report; 0 skips it.
    pub plateau_samples: usize,
}

impl Default for SculptConfig {
    fn default() -> Self {
        SculptConfig {
            stages: 3,
            first_stage_index: 1,
            subtowers: None,
            periods: None,
            plateau_safety: 0.01,
            eps_tower: 1e-3,
            decay: 0.01,
            eta: 0.01,
            value_order: ValueOrder::Zigzag,
            normalizer: Normalizer::L1,
            grid: Vec::new(),
            plateau_samples: 8,
        }
    }
}

impl SculptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.stages == 0 {
            return bad("at least one stage is required");
        }
        if self.first_stage_index == 0 {
            return bad("first_stage_index must be >= 1");
        }
        if !(self.plateau_safety > 0.0) {
            return bad("plateau_safety must be positive");
        }
        if !(self.eps_tower > 0.0 && self.eps_tower < 1.0) {
            return bad("eps_tower must lie in (0, 1)");
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad("decay must lie in (0, 1)");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        for (name, v) in [("subtowers", &self.subtowers), ("periods", &self.periods)] {
            if let Some(v) = v {
                if v.len() != self.stages {
                    return Err(Error::InvalidArgument(format!("{name} needs {} entries", self.stages)));
                }
                if v.contains(&0) {
                    return Err(Error::InvalidArgument(format!("{name} entries must be positive")));
                }
            }
        }
        Ok(())
    }

    fn per_axis(&self, j: usize) -> usize {
        match &self.subtowers {
            Some(v) => v[j - 1],
            None => self.first_stage_index + j - 1,
        }
    }
}

/// Period, subcube count and side of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageGeometry {
    pub period: usize,
    pub per_axis: usize,
    pub height: usize,
}

impl StageGeometry {
    /// Side `h = floor((q - 1)/k)`; `None` when that is zero.
    pub fn new(period: usize, per_axis: usize) -> Option<Self> {
        let height = period.checked_sub(1)? / per_axis;
        (height >= 1).then_some(StageGeometry { period, per_axis, height })
    }

    /// Share of a period box outside the subcubes.
    pub fn residual_share(&self, d: usize) -> f64 {
        1.0 - ((self.per_axis * self.height) as f64 / self.period as f64).powi(d as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub j: usize,
    pub period: usize,
    /// Subcube side `h_j`.
    pub height: usize,
    pub subtower_count: usize,
    pub amplitude: f64,
    /// Value on each subtower, in tower order, before the amplitude.
    pub values: Vec<f64>,
    pub residual_value: f64,
    pub mu_e: f64,
    pub n_j: usize,
    pub r_j: usize,
    /// `||P_{N_j} (sum_{k<j} f_k)||_1 / ||f_j||_1` at the chosen scale.
    pub leak_ratio: f64,
    #[serde(skip)]
    pub e_set: Option<AtomSet>,
}

#[derive(Debug, Clone)]
pub struct SculptPlan {
    pub stages: Vec<StageSpec>,
    pub target: TargetLaw,
    pub normalizer: Normalizer,
    /// Stage shapes at unit amplitude.
    pub shapes: Vec<Observable>,
    pub f: Observable,
    pub system: FiniteSystem,
}

/// Serializable summary of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub target: TargetLaw,
    pub normalizer: Normalizer,
    pub stages: Vec<StageSpec>,
    pub n_schedule: Vec<usize>,
}

impl SculptPlan {
    pub fn record(&self) -> PlanRecord {
        PlanRecord {
            target: self.target.clone(),
            normalizer: self.normalizer,
            stages: self.stages.clone(),
            n_schedule: self.stages.iter().map(|s| s.n_j).collect(),
        }
    }

    /// `a_j` times the stage shape.
    pub fn stage_function(&self, j: usize) -> Observable {
        self.shapes[j - 1].scale(self.stages[j - 1].amplitude)
    }

    /// `P_n f`.
    pub fn average(&self, n: usize) -> Result<Observable> {
        apply_operator(&cube_operator(n, self.system.dim())?, &self.system, &self.f)
    }

    /// Law of `P_n f / ||P_n f||`, or `None` when the average vanishes.
    pub fn normalized_law(&self, n: usize) -> Result<Option<EmpiricalDistribution>> {
        Ok(normalized(&self.system, &self.average(n)?, self.normalizer).map(|u| law(&self.system, &u)).transpose()?)
    }

    /// Target rescaled to unit norm under the plan's normalizer.
    pub fn scaled_target(&self) -> Result<TargetLaw> {
        target_unit(&self.target, self.normalizer)
    }
}

fn normalized(system: &FiniteSystem, u: &Observable, nz: Normalizer) -> Option<Observable> {
    let norm = lp_norm(u, system, nz.norm());
    (norm >= DEGENERATE_NORM).then(|| u.scale(1.0 / norm))
}

fn target_unit(target: &TargetLaw, nz: Normalizer) -> Result<TargetLaw> {
    let scale = match (nz, target) {
        (Normalizer::L1, _) => return target.unit_scale(),
        (Normalizer::L2, TargetLaw::Discrete { values, masses }) => {
            values.iter().zip(masses).map(|(v, m)| v * v * m).sum::<f64>().sqrt()
        }
        (Normalizer::L2, TargetLaw::Uniform { low, high }) => ((low * low + low * high + high * high) / 3.0).sqrt(),
        (Normalizer::Sup, TargetLaw::Discrete { values, .. }) => values.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        (Normalizer::Sup, TargetLaw::Uniform { low, high }) => low.abs().max(high.abs()),
    };
    if scale <= 0.0 {
        return Err(Error::InvalidArgument("target has zero norm".into()));
    }
    Ok(target.scaled(1.0 / scale))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn divisors(n: usize) -> Vec<usize> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut i = 1;
    while i * i <= n {
        if n % i == 0 {
            small.push(i);
            if i * i != n {
                large.push(n / i);
            }
        }
        i += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Stage geometries from the config: explicit periods are validated, missing
/// ones are the smallest admissible divisors of the common period.
pub fn stage_geometries(system: &FiniteSystem, cfg: &SculptConfig) -> Result<Vec<StageGeometry>> {
    cfg.validate()?;
    let dims = system
        .box_dims()
        .ok_or_else(|| Error::InvalidSystem("sculpting needs a torus or a single cycle".into()))?;
    let d = dims.len();
    let g = dims.iter().copied().fold(0, gcd);
    let s = cfg.plateau_safety;
    let mut out: Vec<StageGeometry> = Vec::with_capacity(cfg.stages);
    for j in 1..=cfg.stages {
        let k = cfg.per_axis(j);
        let prev = out.last().map(|p| p.period);
        let need_h = match prev {
            None => (1.0 / s).ceil() as usize,
            Some(p) => (p as f64 / s).ceil() as usize,
        };
        let e_cap = cfg.eps_tower / 2f64.powi(j as i32);
        let fail = |why: String| Error::Stage { stage: j, source: Box::new(Error::Infeasible(why)) };
        let geo = match &cfg.periods {
            Some(ps) => {
                let q = ps[j - 1];
                if g % q != 0 {
                    return Err(fail(format!("period {q} does not divide the system periods {dims:?}")));
                }
                if let Some(p) = prev {
                    if q % p != 0 {
                        return Err(fail(format!("period {q} is not a multiple of the previous period {p}")));
                    }
                }
                StageGeometry::new(q, k).ok_or_else(|| fail(format!("period {q} is too short for {k} subtowers")))?
            }
            None => divisors(g)
                .into_iter()
                .filter(|&q| prev.is_none_or(|p| q % p == 0))
                .filter_map(|q| StageGeometry::new(q, k))
                .find(|geo| geo.height >= need_h && geo.residual_share(d) <= e_cap)
                .ok_or_else(|| {
                    fail(format!(
                        "no period dividing {g} gives {k} subtowers of side >= {need_h} with residual <= {e_cap:.3e}"
                    ))
                })?,
        };
        out.push(geo);
    }
    Ok(out)
}

/// Quantile values at ranks `(i + 0.5)/K`, ascending.
pub fn quantile_values(target: &TargetLaw, count: usize) -> Result<Vec<f64>> {
    (0..count).map(|i| target.quantile((i as f64 + 0.5) / count as f64)).collect()
}

/// Arrangement of ascending `values` along the tower for a residual value `c`.
pub fn arrange_values(values: &[f64], c: f64, order: ValueOrder) -> Vec<f64> {
    match order {
        ValueOrder::Sorted => values.to_vec(),
        ValueOrder::Zigzag => {
            let k = values.len();
            let mut cyc: Vec<f64> = values.iter().step_by(2).copied().collect();
            cyc.extend(values.iter().skip(1).step_by(2).rev());
            // E sits between cyc[r-1] (top subtower) and cyc[r] (next column's bottom)
            let cost = |r: usize| (cyc[(r + k - 1) % k] - c).abs() + (cyc[r] - c).abs();
            let best = (0..k).min_by(|&a, &b| cost(a).total_cmp(&cost(b))).unwrap_or(0);
            cyc.rotate_left(best);
            cyc
        }
    }
}

/// Boustrophedon rank of a subcube multi-index.
fn snake_rank(u: &[usize], k: usize) -> usize {
    let mut p = 0;
    let mut flip = false;
    for &ui in u {
        let digit = if flip { k - 1 - ui } else { ui };
        p = p * k + digit;
        flip = digit % 2 == 1;
    }
    p
}

/// Builds the unit-amplitude stage shape.
pub fn build_stage(
    system: &FiniteSystem,
    j: usize,
    geo: StageGeometry,
    target: &TargetLaw,
    order: ValueOrder,
    eps_tower: f64,
) -> Result<(StageSpec, Observable)> {
    let stage_err = |e: Error| Error::Stage { stage: j, source: Box::new(e) };
    let (dims, frame) = match (system.box_dims(), system.frame()) {
        (Some(d), Some(f)) => (d, f),
        _ => return Err(stage_err(Error::InvalidSystem("sculpting needs a torus or a single cycle".into()))),
    };
    let d = dims.len();
    let (q, k, h) = (geo.period, geo.per_axis, geo.height);
    if dims.iter().any(|&m| m % q != 0) {
        return Err(stage_err(Error::InvalidArgument(format!("period {q} does not divide {dims:?}"))));
    }
    let shape = CubeShape::new(k * h, d)?;
    let base: Vec<usize> = (0..frame.len())
        .filter(|&idx| {
            let mut rest = idx;
            dims.iter().rev().all(|&m| {
                let c = rest % m;
                rest /= m;
                c % q == 0
            })
        })
        .map(|idx| frame[idx])
        .collect();
    let base = system.set(base)?;
    let eps = eps_tower / 2f64.powi(j as i32);
    let tower = Tower::new(system, base, shape).map_err(stage_err)?;
    if tower.residual_measure() >= eps {
        return Err(stage_err(Error::Infeasible(format!("residual {:.3e} >= {eps:.3e}", tower.residual_measure()))));
    }
    if tower.residual().is_empty() {
        return Err(stage_err(Error::Infeasible("tower leaves no residual set".into())));
    }
    let count = k.pow(d as u32);
    let sorted = quantile_values(target, count)?;
    // masses of the subtowers are equal: (h/q)^d each
    let sub_mass = (h as f64 / q as f64).powi(d as i32);
    let mu_e = tower.residual_measure();
    let c = -sub_mass * sorted.iter().sum::<f64>() / mu_e;
    let seq = arrange_values(&sorted, c, order);

    let mut g = vec![c; system.atoms()];
    let offsets = shape.offsets();
    for &b in tower.base().members() {
        for o in &offsets {
            let u: Vec<usize> = o.iter().map(|&x| x as usize / h).collect();
            g[system.apply_unchecked(o, b)] = seq[snake_rank(&u, k)];
        }
    }
    let shape_fn = Observable::new(g)?;
    let mean = system.mean(&shape_fn);
    let scale = sorted.iter().fold(c.abs(), |m, v| m.max(v.abs())).max(1.0);
    if mean.abs() > 1e-10 * scale {
        return Err(stage_err(Error::NonZeroMean(mean)));
    }
    let spec = StageSpec {
        j,
        period: q,
        height: h,
        subtower_count: count,
        amplitude: 1.0,
        values: seq,
        residual_value: c,
        mu_e,
        n_j: 0,
        r_j: 0,
        leak_ratio: 0.0,
        e_set: Some(tower.residual().clone()),
    };
    Ok((spec, shape_fn))
}

/// Outcome of the scale search for one stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NChoice {
    pub n: usize,
    pub leak_ratio: f64,
    pub safety_ratio: f64,
}

/// Smallest grid scale with `||P_N lower||_1 <= eta ||f_j||_1` and `N <= safety h_j`.
pub fn choose_n_j(
    system: &FiniteSystem,
    lower: Option<&Observable>,
    f_j: &Observable,
    height: usize,
    grid: &[usize],
    eta: f64,
    safety: f64,
) -> Result<NChoice> {
    let cap = (safety * height as f64).floor() as usize;
    let fj = lp_norm(f_j, system, Norm::L1);
    let mut cands: Vec<usize> = grid.iter().copied().filter(|&n| n >= 1 && n <= cap).collect();
    cands.sort_unstable();
    cands.dedup();
    if cands.is_empty() {
        return Err(Error::Infeasible(format!("no grid scale fits under safety * h = {cap}")));
    }
    let mut best_leak = f64::INFINITY;
    for &n in &cands {
        let leak = match lower {
            None => 0.0,
            Some(l) => lp_norm(&apply_operator(&cube_operator(n, system.dim())?, system, l)?, system, Norm::L1),
        };
        let ratio = if fj > 0.0 { leak / fj } else if leak == 0.0 { 0.0 } else { f64::INFINITY };
        if ratio <= eta {
            return Ok(NChoice { n, leak_ratio: ratio, safety_ratio: n as f64 / height as f64 });
        }
        best_leak = best_leak.min(ratio);
    }
    Err(Error::Infeasible(format!(
        "no scale up to {cap} suppresses earlier stages (best ratio {best_leak:.3e} > eta {eta}); increase h_j"
    )))
}

/// Doubling grid plus doubling multiples of the previous period, up to `cap`.
fn candidate_grid(prev_period: Option<usize>, cap: usize, extra: &[usize]) -> Vec<usize> {
    let mut g: Vec<usize> = std::iter::successors(Some(1usize), |n| n.checked_mul(2)).take_while(|&n| n <= cap).collect();
    if let Some(p) = prev_period {
        g.extend(std::iter::successors(Some(p), |n| n.checked_mul(2)).take_while(|&n| n <= cap));
    }
    g.extend(extra.iter().copied().filter(|&n| n <= cap));
    g.sort_unstable();
    g.dedup();
    g
}

fn sum_of(system: &FiniteSystem, fs: impl Iterator<Item = Observable>) -> Observable {
    fs.fold(Observable::zeros(system.atoms()), |acc, f| acc.add(&f))
}

/// `||P_{N_j} (sum_{m>j} f_m)||_1 / ||P_{N_j} f_j||_1`.
pub fn tail_bound(plan: &SculptPlan, j: usize) -> Result<f64> {
    let s = &plan.system;
    let n = plan.stages[j - 1].n_j;
    let op = cube_operator(n, s.dim())?;
    let tail = sum_of(s, (j + 1..=plan.stages.len()).map(|m| plan.stage_function(m)));
    let num = lp_norm(&apply_operator(&op, s, &tail)?, s, Norm::L1);
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = lp_norm(&apply_operator(&op, s, &plan.stage_function(j))?, s, Norm::L1);
    Ok(if den > 0.0 { num / den } else { f64::INFINITY })
}

/// Full pipeline: stage shapes, scales `N_j`, amplitudes, composite `f`.
pub fn sculpt(system: &FiniteSystem, target: &TargetLaw, cfg: &SculptConfig) -> Result<SculptPlan> {
    target.validate()?;
    let geos = stage_geometries(system, cfg)?;
    let mut stages = Vec::with_capacity(geos.len());
    let mut shapes = Vec::with_capacity(geos.len());
    for (i, geo) in geos.iter().enumerate() {
        let (mut spec, shape) = build_stage(system, i + 1, *geo, target, cfg.value_order, cfg.eps_tower)?;
        spec.amplitude = cfg.decay.powi(i as i32);
        stages.push(spec);
        shapes.push(shape);
    }
    let mut plan = SculptPlan {
        stages,
        target: target.clone(),
        normalizer: cfg.normalizer,
        shapes,
        f: Observable::zeros(system.atoms()),
        system: system.clone(),
    };
    let big_j = plan.stages.len();
    for j in 1..=big_j {
        let stage_err = |e: Error| Error::Stage { stage: j, source: Box::new(e) };
        let lower = (j > 1).then(|| sum_of(system, (1..j).map(|k| plan.stage_function(k))));
        let geo = geos[j - 1];
        let cap = (cfg.plateau_safety * geo.height as f64).floor() as usize;
        let grid = candidate_grid(j.checked_sub(2).map(|p| geos[p].period), cap, &cfg.grid);
        let choice = choose_n_j(
            system,
            lower.as_ref(),
            &plan.stage_function(j),
            geo.height,
            &grid,
            cfg.eta,
            cfg.plateau_safety,
        )
        .map_err(stage_err)?;
        let st = &mut plan.stages[j - 1];
        st.n_j = choice.n;
        st.leak_ratio = choice.leak_ratio;
        st.r_j = (10 * choice.n).min(cap).max(choice.n);
        if j < big_j {
            let tail = tail_bound(&plan, j)?;
            if tail > cfg.eta {
                let factor = 0.9 * cfg.eta / tail;
                for st in plan.stages.iter_mut().skip(j) {
                    st.amplitude *= factor;
                }
            }
        }
    }
    plan.f = sum_of(system, (1..=big_j).map(|j| plan.stage_function(j)));
    Ok(plan)
}

/// Per-stage report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub j: usize,
    pub n_j: usize,
    /// W1 distance to the rescaled target; `None` when degenerate.
    pub dist_to_target: Option<f64>,
    pub tail_ratio: f64,
    pub plateau_max: Option<f64>,
    pub bl_to_target: Option<f64>,
    pub mu_e: f64,
}

pub fn stage_reports(plan: &SculptPlan, plateau_samples: usize) -> Result<Vec<StageReport>> {
    let target = if plan.target.abs_moment()? > 0.0 { Some(plan.scaled_target()?) } else { None };
    let mut rows = Vec::with_capacity(plan.stages.len());
    for st in &plan.stages {
        let lw = plan.normalized_law(st.n_j)?;
        let (w1, bl) = match (&lw, &target) {
            (Some(l), Some(t)) => (Some(t.w1_from(l)?), Some(t.bl_from(l)?)),
            _ => (None, None),
        };
        let plateau_max = if plateau_samples > 0 && lw.is_some() {
            plateau_profile(plan, st.j, plateau_samples, None)?
                .iter()
                .filter_map(|r| r.1)
                .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
        } else {
            None
        };
        rows.push(StageReport {
            j: st.j,
            n_j: st.n_j,
            dist_to_target: w1,
            tail_ratio: tail_bound(plan, st.j)?,
            plateau_max,
            bl_to_target: bl,
            mu_e: st.mu_e,
        });
    }
    Ok(rows)
}

/// True when some stage average vanishes (e.g. a point-mass target at 0).
pub fn is_degenerate(plan: &SculptPlan) -> Result<bool> {
    for st in &plan.stages {
        if plan.normalized_law(st.n_j)?.is_none() {
            return Ok(true);
        }
    }
    Ok(false)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn stage_csv(rows: &[StageReport]) -> String {
    let mut s = String::from("j,N_j,dist_to_target,tail_ratio,plateau_max,bl_to_target,mu_E\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:e},{},{},{:e}\n",
            r.j,
            r.n_j,
            opt(r.dist_to_target),
            r.tail_ratio,
            opt(r.plateau_max),
            opt(r.bl_to_target),
            r.mu_e
        ));
    }
    s
}

/// Log-spaced integers from `lo` to `hi`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, samples: usize) -> Vec<usize> {
    if samples <= 1 || hi <= lo {
        return vec![lo];
    }
    let ratio = (hi as f64 / lo as f64).ln();
    let mut v: Vec<usize> = (0..samples)
        .map(|i| (lo as f64 * (ratio * i as f64 / (samples - 1) as f64).exp()).round() as usize)
        .map(|n| n.clamp(lo, hi))
        .collect();
    v.dedup();
    v
}

/// `(n, BL(law at n, law at N_k))` for log-spaced `n` in `[N_k, R_k]`.
pub fn plateau_profile(
    plan: &SculptPlan,
    k: usize,
    samples: usize,
    r_k: Option<usize>,
) -> Result<Vec<(usize, Option<f64>)>> {
    let st = plan
        .stages
        .get(k.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidArgument(format!("no stage {k}")))?;
    let r = r_k.unwrap_or(st.r_j);
    if samples == 0 || r < st.n_j {
        return Err(Error::InvalidArgument(format!("empty plateau range [{}, {r}]", st.n_j)));
    }
    let base = plan.normalized_law(st.n_j)?;
    log_spaced(st.n_j, r, samples)
        .into_iter()
        .map(|n| {
            let d = match (&base, plan.normalized_law(n)?) {
                (Some(b), Some(l)) => Some(bl_distance(&l, b)?),
                _ => None,
            };
            Ok((n, d))
        })
        .collect()
}

/// Quantized joint law of `(u, w)` against the product of its marginals.
fn pair_independence(system: &FiniteSystem, u: &Observable, w: &Observable) -> Result<f64> {
    let quantize = |f: &Observable| -> Vec<f64> {
        let (lo, hi) = f.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo <= 0.0 {
            return f.values().to_vec();
        }
        let width = (hi - lo) / PROBE_BINS as f64;
        f.values()
            .iter()
            .map(|&v| {
                let b = (((v - lo) / width) as usize).min(PROBE_BINS - 1);
                lo + (b as f64 + 0.5) * width
            })
            .collect()
    };
    let (qu, qw) = (Observable::new(quantize(u))?, Observable::new(quantize(w))?);
    let joint = crate::distributions::joint_law(system, &qu, &qw)?;
    let (a, b) = crate::distributions::marginals(&joint)?;
    bl_distance(&joint, &crate::distributions::product(&a, &b)?)
}

/// Dependence between the normalized averages at scales `N_k` and `N_j`.
pub fn independence_probe(plan: &SculptPlan, k: usize, j: usize) -> Result<f64> {
    if k == j {
        return Err(Error::InvalidArgument("independence probe needs two distinct stages".into()));
    }
    let get = |i: usize| -> Result<Option<Observable>> {
        let st = plan.stages.get(i.wrapping_sub(1)).ok_or_else(|| Error::InvalidArgument(format!("no stage {i}")))?;
        Ok(normalized(&plan.system, &plan.average(st.n_j)?, plan.normalizer))
    };
    match (get(k)?, get(j)?) {
        (Some(u), Some(w)) => pair_independence(&plan.system, &u, &w),
        _ => Ok(0.0),
    }
}

/// Control probe: the stage-`k` average against its own translate by `shift`.
pub fn independence_probe_shifted(plan: &SculptPlan, k: usize, shift: &GroupElement) -> Result<f64> {
    let st = plan.stages.get(k.wrapping_sub(1)).ok_or_else(|| Error::InvalidArgument(format!("no stage {k}")))?;
    match normalized(&plan.system, &plan.average(st.n_j)?, plan.normalizer) {
        Some(u) => {
            let w = plan.system.compose_shift(&u, shift)?;
            pair_independence(&plan.system, &u, &w)
        }
        None => Ok(0.0),
    }
}
