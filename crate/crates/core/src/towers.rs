//! Kakutani skyscrapers, Rokhlin towers in d = 1 and tower merging in `Z^d`.
//!
//! A tower with base `B` and shape `N` (dimension `d`) is the union of the
//! floors `T^z B` for `z in {0..N-1}^d`, which must be pairwise disjoint.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::averaging::CubeShape;
use crate::error::{Error, Result};
use crate::space::{AtomSet, FiniteSystem, GroupElement};

/// Slack used when screening FFT overlaps before the exact recheck.
const FFT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Tower {
    base: AtomSet,
    shape: CubeShape,
    covered: AtomSet,
    residual: AtomSet,
}

impl Tower {
    /// Validates pairwise disjointness of the floors.
    pub fn new(system: &FiniteSystem, base: AtomSet, shape: CubeShape) -> Result<Tower> {
        if shape.dim != system.dim() {
            return Err(Error::DimensionMismatch { expected: system.dim(), got: shape.dim });
        }
        system.measure(&base)?;
        let offsets = shape.offsets();
        let mut mask = vec![false; system.atoms()];
        for &b in base.members() {
            for o in &offsets {
                let y = system.apply_unchecked(o, b);
                if mask[y] {
                    return Err(Error::Overlap(format!("atom {y} lies on two floors")));
                }
                mask[y] = true;
            }
        }
        let covered = system.set_from_mask(&mask);
        let residual = system.set_from_mask(&mask.iter().map(|b| !b).collect::<Vec<_>>());
        Ok(Tower { base, shape, covered, residual })
    }

    pub fn empty(system: &FiniteSystem, shape: CubeShape) -> Tower {
        Tower { base: system.empty_set(), shape, covered: system.empty_set(), residual: system.full_set() }
    }

    pub fn base(&self) -> &AtomSet {
        &self.base
    }

    pub fn shape(&self) -> CubeShape {
        self.shape
    }

    /// Union of all floors.
    pub fn covered(&self) -> &AtomSet {
        &self.covered
    }

    /// `E`, the complement of the tower.
    pub fn residual(&self) -> &AtomSet {
        &self.residual
    }

    pub fn measure(&self) -> f64 {
        self.covered.measure()
    }

    pub fn residual_measure(&self) -> f64 {
        self.residual.measure()
    }

    /// Floor `T^z B`, `z in {0..N-1}^d`.
    pub fn floor(&self, system: &FiniteSystem, z: &GroupElement) -> Result<AtomSet> {
        if z.coords().iter().any(|&c| c < 0 || c >= self.shape.side as i64) {
            return Err(Error::InvalidArgument(format!("{z} is not a floor index")));
        }
        system.translate_set(z, &self.base)
    }

    pub fn record(&self) -> TowerRecord {
        TowerRecord {
            side: self.shape.side,
            dim: self.shape.dim,
            base: self.base.members().to_vec(),
            measure: self.measure(),
            residual_measure: self.residual_measure(),
        }
    }
}

/// Serialized form of a tower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerRecord {
    pub side: usize,
    pub dim: usize,
    pub base: Vec<usize>,
    pub measure: f64,
    pub residual_measure: f64,
}

impl TowerRecord {
    pub fn into_tower(self, system: &FiniteSystem) -> Result<Tower> {
        Tower::new(system, system.set(self.base)?, CubeShape::new(self.side, self.dim)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub height: usize,
    pub base: AtomSet,
}

/// Columns of the skyscraper over `D`, by increasing height.
#[derive(Debug, Clone, PartialEq)]
pub struct KakutaniPartition {
    base: AtomSet,
    columns: Vec<Column>,
}

impl KakutaniPartition {
    pub fn base(&self) -> &AtomSet {
        &self.base
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn min_height(&self) -> usize {
        self.columns.first().map_or(0, |c| c.height)
    }

    pub fn max_height(&self) -> usize {
        self.columns.last().map_or(0, |c| c.height)
    }

    /// Checks that the floors `T^i D_h`, `0 <= i < h`, partition the space.
    pub fn verify(&self, system: &FiniteSystem) -> Result<()> {
        let mut hits = vec![0u8; system.atoms()];
        for col in &self.columns {
            for &x in col.base.members() {
                let mut y = x;
                for _ in 0..col.height {
                    if hits[y] > 0 {
                        return Err(Error::Overlap(format!("atom {y} on two floors")));
                    }
                    hits[y] = 1;
                    y = system.step(0, y);
                }
                if !self.base.contains(y) {
                    return Err(Error::InvalidArgument(format!("column over {x} does not return to D")));
                }
            }
        }
        match hits.iter().position(|&h| h == 0) {
            Some(x) => Err(Error::InvalidArgument(format!("atom {x} is not covered"))),
            None => Ok(()),
        }
    }
}

fn require_cycle(system: &FiniteSystem) -> Result<()> {
    if system.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: system.dim() });
    }
    if !system.is_ergodic() {
        return Err(Error::NotErgodic(format!("{} orbits", system.orbit_partition_check().orbits)));
    }
    Ok(())
}

/// Return-time partition of `D` by orbit walking.
pub fn kakutani_partition(system: &FiniteSystem, d: &AtomSet) -> Result<KakutaniPartition> {
    require_cycle(system)?;
    system.measure(d)?;
    if d.is_empty() {
        return Err(Error::InvalidArgument("base D is empty".into()));
    }
    let mask = system.mask(d);
    let mut by_height: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &x in d.members() {
        let mut y = system.step(0, x);
        let mut h = 1;
        while !mask[y] {
            y = system.step(0, y);
            h += 1;
        }
        by_height.entry(h).or_default().push(x);
    }
    let columns = by_height
        .into_iter()
        .map(|(height, members)| Column { height, base: system.set_from_sorted(members) })
        .collect();
    Ok(KakutaniPartition { base: d.clone(), columns })
}

/// A d = 1 tower together with the return-time data of its construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RokhlinTower {
    pub tower: Tower,
    /// Minimum column height `k` of the second Kakutani pass.
    pub min_height: usize,
    /// `n / k`, an upper bound on `mu(E)`.
    pub bound: f64,
}

/// Height-`n` tower with `mu(E) < eps`, starting from the singleton `D = {0}`.
pub fn rokhlin_tower_1d(system: &FiniteSystem, n: usize, eps: f64) -> Result<RokhlinTower> {
    require_cycle(system)?;
    let d = system.set(vec![0])?;
    rokhlin_tower_1d_from(system, &d, n, eps)
}

/// Height-`n` tower built over the tallest column of the skyscraper on `D`.
pub fn rokhlin_tower_1d_from(system: &FiniteSystem, d: &AtomSet, n: usize, eps: f64) -> Result<RokhlinTower> {
    if n == 0 || !(eps > 0.0) {
        return Err(Error::InvalidArgument("need n >= 1 and eps > 0".into()));
    }
    if n > system.atoms() {
        return Err(Error::Infeasible(format!("height {n} exceeds the cycle length {}", system.atoms())));
    }
    let first = kakutani_partition(system, d)?;
    let tallest = &first.columns().last().expect("nonempty partition").base;
    let second = kakutani_partition(system, tallest)?;
    let mut base = Vec::new();
    for col in second.columns() {
        for &x in col.base.members() {
            let mut y = x;
            for i in 0..col.height {
                if i % n == 0 && i + n <= col.height {
                    base.push(y);
                }
                y = system.step(0, y);
            }
        }
    }
    base.sort_unstable();
    let tower = Tower::new(system, system.set_from_sorted(base), CubeShape::new(n, 1)?)?;
    let k = second.min_height();
    let bound = n as f64 / k as f64;
    if tower.residual_measure() >= eps {
        return Err(Error::Infeasible(format!(
            "residual {:.6} >= eps {eps} (column height {k}, bound n/k = {bound:.6})",
            tower.residual_measure()
        )));
    }
    Ok(RokhlinTower { tower, min_height: k, bound })
}

/// Positive-measure witness: the tower over a single atom.
pub fn tower_exists(system: &FiniteSystem, shape: CubeShape) -> Result<Tower> {
    if shape.dim != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: shape.dim });
    }
    let periods = system.periods();
    if system.box_dims().is_none() {
        return Err(Error::InvalidSystem("tower search needs a torus or a single cycle".into()));
    }
    if let Some(p) = periods.iter().find(|&&p| p < shape.side) {
        return Err(Error::Infeasible(format!("side {} exceeds period {p}", shape.side)));
    }
    Tower::new(system, system.set(vec![0])?, shape)
}

/// `mu(A ∩ T^z B)`.
pub fn shift_overlap(system: &FiniteSystem, a: &AtomSet, b: &AtomSet, z: &GroupElement) -> Result<f64> {
    let moved = system.translate_set(z, b)?;
    Ok(system.intersection(a, &moved)?.measure())
}

fn frame_of(system: &FiniteSystem) -> Result<(Vec<usize>, Vec<usize>)> {
    match (system.box_dims(), system.frame()) {
        (Some(d), Some(f)) => Ok((d, f)),
        _ => Err(Error::InvalidSystem("shift search needs a torus or a single cycle".into())),
    }
}

fn frame_coords(dims: &[usize], mut k: usize) -> Vec<i64> {
    let mut c = vec![0i64; dims.len()];
    for (slot, &m) in c.iter_mut().zip(dims).rev() {
        *slot = (k % m) as i64;
        k /= m;
    }
    c
}

/// In-place multidimensional FFT over a row-major array.
fn fft_nd(data: &mut [Complex<f64>], dims: &[usize], inverse: bool) {
    let mut planner = FftPlanner::new();
    let total = data.len();
    let mut stride = total;
    let mut line = Vec::new();
    for &m in dims {
        stride /= m;
        let fft = if inverse { planner.plan_fft_inverse(m) } else { planner.plan_fft_forward(m) };
        let block = m * stride;
        for hi in (0..total).step_by(block) {
            for lo in 0..stride {
                let base = hi + lo;
                line.clear();
                line.extend((0..m).map(|c| data[base + c * stride]));
                fft.process(&mut line);
                for (c, v) in line.iter().enumerate() {
                    data[base + c * stride] = *v;
                }
            }
        }
    }
}

/// `z -> mu(A ∩ T^z B)` for every `z` in frame order, via FFT correlation.
pub fn overlap_table(system: &FiniteSystem, a: &AtomSet, b: &AtomSet) -> Result<Vec<f64>> {
    system.measure(a)?;
    system.measure(b)?;
    let (dims, frame) = frame_of(system)?;
    let (ma, mb) = (system.mask(a), system.mask(b));
    let w = system.weights();
    let mut fa: Vec<Complex<f64>> =
        frame.iter().map(|&x| Complex::new(if ma[x] { w[x] } else { 0.0 }, 0.0)).collect();
    let mut fb: Vec<Complex<f64>> =
        frame.iter().map(|&x| Complex::new(if mb[x] { 1.0 } else { 0.0 }, 0.0)).collect();
    fft_nd(&mut fa, &dims, false);
    fft_nd(&mut fb, &dims, false);
    for (u, v) in fa.iter_mut().zip(&fb) {
        *u *= v.conj();
    }
    fft_nd(&mut fa, &dims, true);
    let scale = 1.0 / frame.len() as f64;
    Ok(fa.iter().map(|c| c.re * scale).collect())
}

/// First `z` (lexicographic in frame coordinates `0..M_i`) with
/// `mu(U ∩ T^z V) < mu(U) mu(V) + delta`.
pub fn overlap_shift_search(system: &FiniteSystem, u: &Tower, v: &Tower, delta: f64) -> Result<GroupElement> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let (dims, _) = frame_of(system)?;
    let (us, vs) = (u.covered(), v.covered());
    let bound = us.measure() * vs.measure() + delta;
    let table = overlap_table(system, us, vs)?;
    let mut best = f64::INFINITY;
    for (k, &approx) in table.iter().enumerate() {
        if approx < bound + FFT_SLACK {
            let z = GroupElement(frame_coords(&dims, k));
            let exact = shift_overlap(system, us, vs, &z)?;
            if exact < bound {
                return Ok(z);
            }
            best = best.min(exact);
        }
        best = best.min(approx);
    }
    Err(Error::NoAdmissibleShift { bound, best })
}

/// Measure accounting of one merge step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeLedger {
    pub mu_u: f64,
    pub overlap: f64,
    pub removed: f64,
    pub added: f64,
    pub mu_result: f64,
    /// `overlap + mu(V)((1 + 2(N-1)/H)^d - 1)`.
    pub removed_bound: f64,
    /// `overlap + mu(V)(1 - (1 - N/H)^d)`.
    pub nominal_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub tower: Tower,
    pub ledger: MergeLedger,
}

/// Removes the columns of `U` meeting `T^z V` and adds `T^z V` cut into `N`-blocks.
pub fn tower_merge_step(system: &FiniteSystem, u: &Tower, v: &Tower, z: &GroupElement) -> Result<MergeOutcome> {
    let (n, h, d) = (u.shape().side, v.shape().side, u.shape().dim);
    if v.shape().dim != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.shape().dim });
    }
    if h % n != 0 {
        return Err(Error::InvalidArgument(format!("auxiliary side {h} is not a multiple of {n}")));
    }
    system.check_element(z)?;
    let moved = system.translate_set(z, v.covered())?;
    let wmask = system.mask(&moved);
    let offsets = u.shape().offsets();
    let column_mass = |b: usize| -> f64 { offsets.iter().map(|o| system.weight(system.apply_unchecked(o, b))).sum() };
    let mut kept = Vec::with_capacity(u.base().len());
    let mut removed = 0.0;
    for &b in u.base().members() {
        if offsets.iter().any(|o| wmask[system.apply_unchecked(o, b)]) {
            removed += column_mass(b);
        } else {
            kept.push(b);
        }
    }
    let blocks: Vec<Vec<i64>> =
        CubeShape::new(h / n, d)?.offsets().into_iter().map(|k| k.iter().map(|c| c * n as i64).collect()).collect();
    for &b in v.base().members() {
        let y = system.apply_unchecked(z.coords(), b);
        for k in &blocks {
            kept.push(system.apply_unchecked(k, y));
        }
    }
    let tower = Tower::new(system, system.set(kept)?, u.shape())?;
    let overlap = system.intersection(u.covered(), &moved)?.measure();
    let (nf, hf) = (n as f64, h as f64);
    let ledger = MergeLedger {
        mu_u: u.measure(),
        overlap,
        removed,
        added: v.measure(),
        mu_result: tower.measure(),
        removed_bound: overlap + v.measure() * ((1.0 + 2.0 * (nf - 1.0) / hf).powi(d as i32) - 1.0),
        nominal_bound: overlap + v.measure() * (1.0 - (1.0 - nf / hf).powi(d as i32)),
    };
    Ok(MergeOutcome { tower, ledger })
}

/// Parameters of the iterative `Z^d` construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZdTowerParams {
    pub side: usize,
    pub eps: f64,
    /// Auxiliary side `H`; defaults to `N ceil(10/eps)` capped by the periods.
    pub aux_side: Option<usize>,
    pub max_iters: usize,
    pub delta: f64,
    /// Stop after this many merges without a new best measure.
    pub patience: usize,
}

impl ZdTowerParams {
    pub fn new(side: usize, eps: f64) -> Self {
        ZdTowerParams { side, eps, aux_side: None, max_iters: 1000, delta: 1e-3, patience: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub mu: f64,
    pub removed: f64,
    pub added: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TowerBuild {
    /// Best tower found.
    pub tower: Tower,
    pub trace: Vec<TraceRow>,
    pub aux_side: usize,
    pub reached: bool,
}

impl TowerBuild {
    pub fn into_result(self, eps: f64) -> Result<Tower> {
        if self.reached {
            Ok(self.tower)
        } else {
            Err(Error::TowerNotReached {
                best: self.tower.measure(),
                target: 1.0 - eps,
                iterations: self.trace.len().saturating_sub(1),
            })
        }
    }
}

/// Tower over the lattice points `c_i = 0 mod s`, `c_i + s <= M_i`.
fn packed_tower(system: &FiniteSystem, dims: &[usize], frame: &[usize], s: usize) -> Result<Tower> {
    let base: Vec<usize> = (0..frame.len())
        .filter(|&k| frame_coords(dims, k).iter().zip(dims).all(|(&c, &m)| c as usize % s == 0 && c as usize + s <= m))
        .map(|k| frame[k])
        .collect();
    Tower::new(system, system.set(base)?, CubeShape::new(s, dims.len())?)
}

/// Default auxiliary side: `N ceil(10/eps)`, capped at the largest multiple of `N` below every period.
pub fn default_aux_side(n: usize, eps: f64, periods: &[usize]) -> usize {
    let min_p = periods.iter().copied().min().unwrap_or(n);
    let want = n * (10.0 / eps).ceil() as usize;
    want.min(n * (min_p / n)).max(n)
}

/// Iterates shift search and merging until `mu > 1 - eps` or the budget runs out.
pub fn build_tower_zd(system: &FiniteSystem, params: &ZdTowerParams) -> Result<TowerBuild> {
    let (n, eps) = (params.side, params.eps);
    if n == 0 || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument("need N >= 1 and 0 < eps < 1".into()));
    }
    let (dims, frame) = frame_of(system)?;
    if !system.is_ergodic() {
        return Err(Error::NotErgodic(format!("{} orbits", system.orbit_partition_check().orbits)));
    }
    if let Some(p) = dims.iter().find(|&&p| p < n) {
        return Err(Error::Infeasible(format!("side {n} exceeds period {p}")));
    }
    let target = 1.0 - eps;
    if dims.iter().all(|&m| m % n == 0) {
        let tower = packed_tower(system, &dims, &frame, n)?;
        let trace = vec![TraceRow { iter: 0, mu: tower.measure(), removed: 0.0, added: 0.0 }];
        return Ok(TowerBuild { reached: tower.measure() > target, tower, trace, aux_side: n });
    }
    let h = match params.aux_side {
        Some(h) if h % n != 0 || h == 0 => {
            return Err(Error::InvalidArgument(format!("auxiliary side {h} is not a positive multiple of {n}")))
        }
        Some(h) if dims.iter().any(|&m| m < h) => {
            return Err(Error::Infeasible(format!("auxiliary side {h} exceeds a period")))
        }
        Some(h) => h,
        None => default_aux_side(n, eps, &dims),
    };
    let v = packed_tower(system, &dims, &frame, h)?;
    let mut u = tower_exists(system, CubeShape::new(n, dims.len())?)?;
    let mut trace = vec![TraceRow { iter: 0, mu: u.measure(), removed: 0.0, added: 0.0 }];
    let mut best = u.clone();
    let mut stale = 0;
    for iter in 1..=params.max_iters {
        if best.measure() > target || stale >= params.patience {
            break;
        }
        let z = overlap_shift_search(system, &u, &v, params.delta)?;
        let step = tower_merge_step(system, &u, &v, &z)?;
        trace.push(TraceRow { iter, mu: step.ledger.mu_result, removed: step.ledger.removed, added: step.ledger.added });
        let unchanged = step.tower.base() == u.base();
        u = step.tower;
        if u.measure() > best.measure() {
            best = u.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        if unchanged {
            break;
        }
    }
    Ok(TowerBuild { reached: best.measure() > target, tower: best, trace, aux_side: h })
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iter,mu,removed,added\n");
    for r in trace {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", r.iter, r.mu, r.removed, r.added));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyc(m: usize) -> FiniteSystem {
        FiniteSystem::cycle(m).unwrap()
    }

    /// First return time by brute-force scan.
    fn first_return(s: &FiniteSystem, d: &AtomSet, x: usize) -> usize {
        (1..=s.atoms()).find(|&i| d.contains(s.apply(&GroupElement::new([i as i64]), x).unwrap())).unwrap()
    }

    #[test]
    fn kakutani_examples() {
        let s = cyc(6);
        let k = kakutani_partition(&s, &s.set(vec![0, 3]).unwrap()).unwrap();
        assert_eq!(k.columns().len(), 1);
        assert_eq!(k.columns()[0].height, 3);
        assert_eq!(k.columns()[0].base.members(), &[0, 3]);
        k.verify(&s).unwrap();

        let k = kakutani_partition(&s, &s.set(vec![0, 1]).unwrap()).unwrap();
        let cols: Vec<_> = k.columns().iter().map(|c| (c.height, c.base.members().to_vec())).collect();
        assert_eq!(cols, vec![(1, vec![0]), (5, vec![1])]);
        k.verify(&s).unwrap();

        let k = kakutani_partition(&s, &s.full_set()).unwrap();
        assert_eq!(k.columns().len(), 1);
        assert_eq!(k.columns()[0].height, 1);

        assert!(kakutani_partition(&s, &s.empty_set()).is_err());
        let split = FiniteSystem::permutation(vec![1, 0, 3, 2]).unwrap();
        assert!(matches!(kakutani_partition(&split, &split.set(vec![0]).unwrap()), Err(Error::NotErgodic(_))));
    }

    #[test]
    fn kakutani_matches_brute_force() {
        let order = [0, 5, 2, 8, 1, 9, 3, 7, 4, 6];
        let mut perm = vec![0; 10];
        for i in 0..10 {
            perm[order[i]] = order[(i + 1) % 10];
        }
        let s = FiniteSystem::permutation(perm).unwrap();
        assert!(s.is_ergodic());
        let d = s.set(vec![1, 2, 6]).unwrap();
        let k = kakutani_partition(&s, &d).unwrap();
        k.verify(&s).unwrap();
        for col in k.columns() {
            for &x in col.base.members() {
                assert_eq!(first_return(&s, &d, x), col.height);
            }
        }
    }

    #[test]
    fn rokhlin_examples() {
        let s = cyc(10);
        let r = rokhlin_tower_1d(&s, 3, 0.4).unwrap();
        assert_eq!(r.tower.base().members(), &[0, 3, 6]);
        assert_eq!(r.tower.covered().members(), &(0..9).collect::<Vec<_>>()[..]);
        assert!((r.tower.residual_measure() - 0.1).abs() < 1e-15);
        assert!(r.tower.residual_measure() <= r.bound);

        let r = rokhlin_tower_1d(&s, 1, 0.01).unwrap();
        assert_eq!(r.tower.base().len(), 10);
        assert!(r.tower.residual().is_empty());

        let r = rokhlin_tower_1d(&s, 10, 0.01).unwrap();
        assert_eq!(r.tower.base().len(), 1);
        assert!(r.tower.residual().is_empty());

        assert!(matches!(rokhlin_tower_1d(&s, 11, 0.5), Err(Error::Infeasible(_))));
        assert!(matches!(rokhlin_tower_1d(&s, 3, 0.05), Err(Error::Infeasible(_))));
    }

    #[test]
    fn rokhlin_from_spread_base() {
        let s = cyc(120);
        let d = s.set((0..120).step_by(20).collect()).unwrap();
        let r = rokhlin_tower_1d_from(&s, &d, 6, 0.3).unwrap();
        assert_eq!(r.min_height, 20);
        // 3 blocks of height 6 per column of 20
        assert_eq!(r.tower.base().len(), 18);
        assert!((r.tower.residual_measure() - 12.0 / 120.0).abs() < 1e-15);
    }

    #[test]
    fn tower_exists_examples() {
        let s = FiniteSystem::torus(&[8, 8]).unwrap();
        let t = tower_exists(&s, CubeShape::new(2, 2).unwrap()).unwrap();
        assert_eq!(t.covered().len(), 4);
        assert!((t.measure() - 4.0 / 64.0).abs() < 1e-15);

        let t = tower_exists(&cyc(8), CubeShape::new(8, 1).unwrap()).unwrap();
        assert!((t.measure() - 1.0).abs() < 1e-15);

        let s = FiniteSystem::torus(&[5, 7]).unwrap();
        let t = tower_exists(&s, CubeShape::new(3, 2).unwrap()).unwrap();
        assert_eq!(t.covered().len(), 9);

        assert!(matches!(tower_exists(&s, CubeShape::new(6, 2).unwrap()), Err(Error::Infeasible(_))));
        assert!(Tower::new(&cyc(4), cyc(4).set(vec![0, 1]).unwrap(), CubeShape::new(2, 1).unwrap()).is_err());
    }

    #[test]
    fn overlap_table_matches_naive() {
        for s in [
            FiniteSystem::torus(&[6, 5]).unwrap(),
            cyc(12),
            FiniteSystem::permutation(vec![2, 4, 1, 0, 5, 3]).unwrap(),
        ] {
            let m = s.atoms();
            let a = s.set((0..m).filter(|x| x % 3 != 1).collect()).unwrap();
            let b = s.set(vec![0, 1, m - 1]).unwrap();
            let table = overlap_table(&s, &a, &b).unwrap();
            let (dims, _) = frame_of(&s).unwrap();
            for (k, t) in table.iter().enumerate() {
                let z = GroupElement(frame_coords(&dims, k));
                assert!((t - shift_overlap(&s, &a, &b, &z).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shift_search_examples() {
        let s = cyc(12);
        let one = CubeShape::new(1, 1).unwrap();
        let u = Tower::new(&s, s.set((0..6).collect()).unwrap(), one).unwrap();
        let v = Tower::new(&s, s.set(vec![0, 1]).unwrap(), one).unwrap();
        let delta = 1e-3;
        let z = overlap_shift_search(&s, &u, &v, delta).unwrap();
        // exhaustive oracle: z is admissible and no earlier shift is
        let bound = u.measure() * v.measure() + delta;
        let ov = |k: i64| shift_overlap(&s, u.covered(), v.covered(), &GroupElement::new([k])).unwrap();
        assert!(ov(z.0[0]) < bound);
        assert!((0..z.0[0]).all(|k| ov(k) >= bound));

        let empty = Tower::empty(&s, one);
        assert_eq!(overlap_shift_search(&s, &u, &empty, delta).unwrap(), GroupElement::new([0]));
        let full = Tower::new(&s, s.full_set(), one).unwrap();
        assert_eq!(overlap_shift_search(&s, &full, &v, 1e-9).unwrap(), GroupElement::new([0]));
    }

    #[test]
    fn merge_examples() {
        let s = cyc(100);
        let (two, ten) = (CubeShape::new(2, 1).unwrap(), CubeShape::new(10, 1).unwrap());
        let v = Tower::new(&s, s.set(vec![0, 50]).unwrap(), ten).unwrap();
        let u_empty = Tower::empty(&s, two);
        let out = tower_merge_step(&s, &u_empty, &v, &GroupElement::new([3])).unwrap();
        assert_eq!(out.tower.base().len(), 10);
        assert!((out.tower.measure() - v.measure()).abs() < 1e-15);

        let u = Tower::new(&s, s.set(vec![20, 30, 60]).unwrap(), two).unwrap();
        let out = tower_merge_step(&s, &u, &Tower::empty(&s, ten), &GroupElement::new([0])).unwrap();
        assert_eq!(out.tower, u);

        // column at 60 meets T^5 V = {5..14, 55..64}; 20 and 30 survive
        let out = tower_merge_step(&s, &u, &v, &GroupElement::new([5])).unwrap();
        let l = out.ledger;
        assert!((l.removed - 0.02).abs() < 1e-15);
        assert!((l.mu_result - (l.mu_u - l.removed + l.added)).abs() < 1e-12);
        assert!(l.removed <= l.removed_bound + 1e-12);
        assert!(out.tower.base().contains(20) && out.tower.base().contains(55) && !out.tower.base().contains(60));

        assert!(tower_merge_step(&s, &u, &Tower::empty(&s, CubeShape::new(5, 1).unwrap()), &GroupElement::new([0]))
            .is_err());
    }

    #[test]
    fn build_zd_examples() {
        let s = FiniteSystem::torus(&[8, 12]).unwrap();
        let b = build_tower_zd(&s, &ZdTowerParams::new(4, 0.1)).unwrap();
        assert!(b.reached);
        assert_eq!(b.trace.len(), 1);
        assert!((b.tower.measure() - 1.0).abs() < 1e-15);

        let s = cyc(1000);
        let b = build_tower_zd(&s, &ZdTowerParams::new(7, 0.05)).unwrap();
        assert!(b.reached && b.tower.measure() > 0.95);
        let r = rokhlin_tower_1d(&s, 7, 0.05).unwrap();
        assert!(b.tower.measure() >= r.tower.measure() - 1e-12);

        let s = FiniteSystem::torus(&[101, 103]).unwrap();
        let b = build_tower_zd(&s, &ZdTowerParams::new(4, 0.1)).unwrap();
        assert!(b.reached && b.tower.measure() > 0.9, "{}", b.tower.measure());
        assert!(trace_csv(&b.trace).starts_with("iter,mu,removed,added\n"));
    }

    #[test]
    fn record_roundtrip() {
        let s = FiniteSystem::torus(&[6, 6]).unwrap();
        let t = tower_exists(&s, CubeShape::new(3, 2).unwrap()).unwrap();
        let json = serde_json::to_string(&t.record()).unwrap();
        let back: TowerRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_tower(&s).unwrap(), t);
    }
}
