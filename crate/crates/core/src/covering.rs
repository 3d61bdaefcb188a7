//! First-passage times of heavy orbit segments and disjoint cube selection.
//!
//! The block of an anchor `x` with length `L` is `{T^z x : z in {1..L}^d}`,
//! so its southwest vertex is `T^(1,..,1) x`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::CubeShape;
use crate::error::{Error, Result};
use crate::space::{AtomSet, FiniteSystem, GroupElement, Observable};
use crate::towers::{build_tower_zd, rokhlin_tower_1d, Tower, ZdTowerParams};

/// Bound on `|int f|` accepted as zero mean.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyOrbitParams {
    pub s: f64,
    pub l_cap: usize,
}

impl HeavyOrbitParams {
    pub fn new(s: f64, l_cap: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) || l_cap == 0 {
            return Err(Error::InvalidArgument("need s > 0 and L_cap >= 1".into()));
        }
        Ok(HeavyOrbitParams { s, l_cap })
    }
}

/// Points of `{1..l}^d` with at least one coordinate equal to `l`.
fn shell_points(l: i64, d: usize) -> Vec<Vec<i64>> {
    CubeShape { side: l as usize, dim: d }
        .offsets()
        .into_iter()
        .filter(|o| o.iter().any(|&c| c == l - 1))
        .map(|o| o.iter().map(|c| c + 1).collect())
        .collect()
}

/// Minimal `L <= L_cap` with `L^{-d} sum_{z in {1..L}^d} f(T^z x) > s`.
pub fn first_passage(
    system: &FiniteSystem,
    f: &Observable,
    x: usize,
    params: &HeavyOrbitParams,
) -> Result<Option<usize>> {
    first_passage_from(system, f, x, params.s, 1, params.l_cap)
}

/// Minimal `L` in `[l_min, l_max]` whose cube average at `x` exceeds `s`.
pub fn first_passage_from(
    system: &FiniteSystem,
    f: &Observable,
    x: usize,
    s: f64,
    l_min: usize,
    l_max: usize,
) -> Result<Option<usize>> {
    system.check_observable(f)?;
    if x >= system.atoms() {
        return Err(Error::AtomOutOfRange { index: x, atoms: system.atoms() });
    }
    let d = system.dim();
    let vals = f.values();
    let mut sum = 0.0;
    let mut y = x;
    for l in 1..=l_max {
        if d == 1 {
            y = system.step(0, y);
            sum += vals[y];
        } else {
            sum += shell_points(l as i64, d).iter().map(|z| vals[system.apply_unchecked(z, x)]).sum::<f64>();
        }
        if l >= l_min && sum / (l as f64).powi(d as i32) > s {
            return Ok(Some(l));
        }
    }
    Ok(None)
}

/// Sparse table answering "first index in `[lo, hi]` with value `> c`".
struct MaxTable {
    levels: Vec<Vec<f64>>,
}

impl MaxTable {
    fn new(g: Vec<f64>) -> Self {
        let n = g.len();
        let mut levels = vec![g];
        let mut len = 1;
        while 2 * len <= n {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=n - 2 * len).map(|i| prev[i].max(prev[i + len])).collect();
            levels.push(next);
            len *= 2;
        }
        MaxTable { levels }
    }

    fn first_above(&self, lo: usize, hi: usize, c: f64) -> Option<usize> {
        let n = self.levels[0].len();
        let mut p = lo;
        for k in (0..self.levels.len()).rev() {
            let len = 1usize << k;
            if p + len - 1 <= hi && p + len <= n && self.levels[k][p] <= c {
                p += len;
            }
        }
        (p <= hi && p < n && self.levels[0][p] > c).then_some(p)
    }
}

/// First passages along one orbit segment `v[0..H]`.
///
/// Anchor `i` averages `v[i+1..=i+L]`; only blocks inside the segment count.
pub fn batch_first_passage(v: &[f64], s: f64, l_min: usize, l_max: usize) -> Vec<Option<usize>> {
    let h = v.len();
    let mut g = Vec::with_capacity(h + 1);
    let mut acc = 0.0;
    g.push(0.0);
    for (k, &x) in v.iter().enumerate() {
        acc += x;
        g.push(acc - s * (k + 1) as f64);
    }
    let table = MaxTable::new(g);
    (0..h)
        .map(|i| {
            let fit = h - 1 - i;
            let hi_len = l_max.min(fit);
            if l_min > hi_len || l_min == 0 {
                return None;
            }
            let c = table.levels[0][i + 1];
            table.first_above(i + 1 + l_min, i + 1 + hi_len, c).map(|j| j - i - 1)
        })
        .collect()
}

/// A candidate cube by its southwest vertex (window coordinates) and side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub anchor: Vec<usize>,
    pub side: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    #[default]
    Lexicographic,
    LargestFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSelection {
    pub selected: Vec<Candidate>,
    /// Cells covered by the selection.
    pub covered: usize,
    pub volume: usize,
    pub fraction: f64,
    /// Candidates dropped for leaving the window.
    pub discarded: usize,
}

/// One candidate at every cell of the window, with side uniform in `1..=max_side`.
pub fn random_candidates<R: rand::Rng>(window: CubeShape, max_side: usize, rng: &mut R) -> Vec<Candidate> {
    window
        .offsets()
        .into_iter()
        .map(|a| Candidate { anchor: a.iter().map(|&c| c as usize).collect(), side: rng.random_range(1..=max_side.max(1)) })
        .collect()
}

/// Greedy disjoint subfamily of `candidates` inside the window `{0..H-1}^d`.
pub fn greedy_cube_selection(
    window: CubeShape,
    mut candidates: Vec<Candidate>,
    strategy: SelectionStrategy,
) -> Result<CubeSelection> {
    let (h, d) = (window.side, window.dim);
    let before = candidates.len();
    for c in &candidates {
        if c.anchor.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.anchor.len() });
        }
        if c.side == 0 {
            return Err(Error::InvalidArgument("candidate cube of side 0".into()));
        }
    }
    candidates.retain(|c| c.anchor.iter().all(|&a| a + c.side <= h));
    let discarded = before - candidates.len();
    match strategy {
        SelectionStrategy::Lexicographic => candidates.sort(),
        SelectionStrategy::LargestFirst => candidates.sort_by(|a, b| b.side.cmp(&a.side).then(a.cmp(b))),
    }
    let mut selected = Vec::new();
    if d == 1 && strategy == SelectionStrategy::Lexicographic {
        let mut next_free = 0;
        for c in candidates {
            if c.anchor[0] >= next_free {
                next_free = c.anchor[0] + c.side;
                selected.push(c);
            }
        }
    } else {
        let volume = window.volume();
        let mut occ = vec![false; volume];
        for c in candidates {
            let cells = cube_cells(h, &c);
            if cells.iter().all(|&k| !occ[k]) {
                for k in cells {
                    occ[k] = true;
                }
                selected.push(c);
            }
        }
    }
    let covered: usize = selected.iter().map(|c| c.side.pow(d as u32)).sum();
    let volume = window.volume();
    Ok(CubeSelection { selected, covered, volume, fraction: covered as f64 / volume as f64, discarded })
}

/// Row-major window indices of the cells of `c`.
fn cube_cells(h: usize, c: &Candidate) -> Vec<usize> {
    let d = c.anchor.len();
    CubeShape { side: c.side, dim: d }
        .offsets()
        .into_iter()
        .map(|o| o.iter().zip(&c.anchor).fold(0, |acc, (&oi, &a)| acc * h + a + oi as usize))
        .collect()
}

/// Exact maximum number of cells covered by a disjoint subfamily (small windows).
pub fn max_disjoint_cover(window: CubeShape, candidates: &[Candidate]) -> Result<usize> {
    let volume = window.volume();
    if volume > 64 {
        return Err(Error::InvalidArgument("exact search is limited to 64 cells".into()));
    }
    let h = window.side;
    let mut by_anchor: Vec<Vec<u64>> = vec![Vec::new(); volume];
    for c in candidates {
        if c.anchor.iter().all(|&a| a + c.side <= h) {
            let cells = cube_cells(h, c);
            let mask = cells.iter().fold(0u64, |m, &k| m | 1 << k);
            by_anchor[cells[0]].push(mask);
        }
    }
    fn go(k: usize, occ: u64, by_anchor: &[Vec<u64>], memo: &mut HashMap<(usize, u64), usize>) -> usize {
        if k == by_anchor.len() {
            return 0;
        }
        let future = occ >> k;
        if let Some(&v) = memo.get(&(k, future)) {
            return v;
        }
        let mut best = go(k + 1, occ, by_anchor, memo);
        if occ & (1 << k) == 0 {
            for &m in &by_anchor[k] {
                if occ & m == 0 {
                    best = best.max(m.count_ones() as usize + go(k + 1, occ | m, by_anchor, memo));
                }
            }
        }
        memo.insert((k, future), best);
        best
    }
    Ok(go(0, 0, &by_anchor, &mut HashMap::new()))
}

/// A selected heavy block: anchor atom and side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeavyBlock {
    pub anchor: usize,
    pub side: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringResult {
    pub selected: Vec<HeavyBlock>,
    pub y: AtomSet,
    /// `mu(Y) / mu(window)`.
    pub fraction: f64,
    pub window: CubeShape,
}

/// Atoms of the block anchored at `x` with side `l`.
fn block_atoms(system: &FiniteSystem, x: usize, l: usize) -> Vec<usize> {
    CubeShape { side: l, dim: system.dim() }
        .offsets()
        .iter()
        .map(|o| {
            let z: Vec<i64> = o.iter().map(|c| c + 1).collect();
            system.apply_unchecked(&z, x)
        })
        .collect()
}

fn block_is_heavy(system: &FiniteSystem, f: &Observable, x: usize, l: usize, s: f64) -> bool {
    let atoms = block_atoms(system, x, l);
    let sum: f64 = atoms.iter().map(|&a| f.get(a)).sum();
    sum > s * atoms.len() as f64
}

/// Orbit segment `T^0 x, .., T^{len-1} x` as a d = 1 window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitWindow {
    pub start: usize,
    pub len: usize,
}

/// Left-to-right greedy selection of heavy blocks along one orbit segment.
pub fn greedy_heavy_partition_1d(
    system: &FiniteSystem,
    f: &Observable,
    params: &HeavyOrbitParams,
    window: OrbitWindow,
) -> Result<CoveringResult> {
    if system.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: system.dim() });
    }
    system.check_observable(f)?;
    if window.len == 0 || window.len > system.atoms() {
        return Err(Error::InvalidArgument(format!("window length {} is not in 1..=M", window.len)));
    }
    if window.start >= system.atoms() {
        return Err(Error::AtomOutOfRange { index: window.start, atoms: system.atoms() });
    }
    let (blocks, atoms) = select_in_column(system, f, params.s, 1, params.l_cap, window.start, window.len);
    let y = system.set(atoms)?;
    let window_mass = window.len as f64 / system.atoms() as f64;
    let fraction = if system.is_uniform() { y.measure() / window_mass } else { f64::NAN };
    Ok(CoveringResult { selected: blocks, y, fraction, window: CubeShape { side: window.len, dim: 1 } })
}

/// Greedy heavy blocks in the window `{T^c b : c in {0..H-1}^d}`.
fn select_in_column(
    system: &FiniteSystem,
    f: &Observable,
    s: f64,
    l_min: usize,
    l_max: usize,
    b: usize,
    h: usize,
) -> (Vec<HeavyBlock>, Vec<usize>) {
    let (blocks, _) = select_in_column_counted(system, f, s, l_min, l_max, b, h);
    let atoms = blocks.iter().flat_map(|blk| block_atoms(system, blk.anchor, blk.side)).collect();
    (blocks, atoms)
}

/// Returns the blocks and the number of window cells with a passage time.
fn select_in_column_counted(
    system: &FiniteSystem,
    f: &Observable,
    s: f64,
    l_min: usize,
    l_max: usize,
    b: usize,
    h: usize,
) -> (Vec<HeavyBlock>, usize) {
    let d = system.dim();
    let window = CubeShape { side: h, dim: d };
    let cells = window.offsets();
    let atom_of = |c: &[i64]| system.apply_unchecked(c, b);
    let passages: Vec<Option<usize>> = if d == 1 {
        let mut v = Vec::with_capacity(h);
        let mut y = b;
        for _ in 0..h {
            v.push(f.get(y));
            y = system.step(0, y);
        }
        batch_first_passage(&v, s, l_min, l_max)
    } else {
        cells
            .iter()
            .map(|c| {
                let fit = h - 1 - *c.iter().max().unwrap() as usize;
                first_passage_from(system, f, atom_of(c), s, l_min, l_max.min(fit)).ok().flatten()
            })
            .collect()
    };
    let with_passage = passages.iter().filter(|p| p.is_some()).count();
    let candidates: Vec<Candidate> = cells
        .iter()
        .zip(&passages)
        .filter_map(|(c, p)| p.map(|l| Candidate { anchor: c.iter().map(|&a| a as usize + 1).collect(), side: l }))
        .collect();
    let sel = greedy_cube_selection(window, candidates, SelectionStrategy::Lexicographic)
        .expect("candidates are well formed");
    let blocks = sel
        .selected
        .into_iter()
        .map(|c| {
            let cell: Vec<i64> = c.anchor.iter().map(|&a| a as i64 - 1).collect();
            HeavyBlock { anchor: atom_of(&cell), side: c.side }
        })
        // prefix sums may misjudge ties; keep only blocks heavy by direct summation
        .filter(|blk| block_is_heavy(system, f, blk.anchor, blk.side, s))
        .collect();
    (blocks, with_passage)
}

#[derive(Debug, Clone, PartialEq)]
pub struct YReport {
    pub y: AtomSet,
    pub blocks: Vec<HeavyBlock>,
    pub mu_y: f64,
    pub integral: f64,
    /// `(1/mu(Y)) int_Y f`, absent when `Y` is empty.
    pub normalized_integral: Option<f64>,
    /// Tower mass not covered by `Y`.
    pub uncovered: f64,
    /// Share of tower atoms with a passage time in `[L, N]`.
    pub passage_fraction: f64,
}

/// Union over tower columns of greedy heavy blocks with `L(x) in [L, N]`.
pub fn build_y_n(
    system: &FiniteSystem,
    f: &Observable,
    s: f64,
    l: usize,
    n: usize,
    tower: &Tower,
) -> Result<YReport> {
    system.check_observable(f)?;
    let shape = tower.shape();
    if shape.dim != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: shape.dim });
    }
    if !(s > 0.0) || l == 0 || l > n {
        return Err(Error::InvalidArgument(format!("need s > 0 and 1 <= L <= N (L = {l}, N = {n})")));
    }
    if shape.side <= n {
        return Err(Error::InvalidArgument(format!("tower side {} must exceed N = {n}", shape.side)));
    }
    let per_column: Vec<(Vec<HeavyBlock>, usize)> = tower
        .base()
        .members()
        .par_iter()
        .map(|&b| select_in_column_counted(system, f, s, l, n, b, shape.side))
        .collect();
    let mut blocks = Vec::new();
    let mut with_passage = 0;
    for (bs, c) in per_column {
        blocks.extend(bs);
        with_passage += c;
    }
    let atoms: Vec<usize> = blocks.iter().flat_map(|b| block_atoms(system, b.anchor, b.side)).collect();
    let y = system.set(atoms)?;
    let integral = system.integrate(f, &y)?;
    let normalized_integral = (!y.is_empty()).then(|| {
        let sum: f64 = y.members().iter().map(|&x| f.get(x) * system.weight(x)).sum();
        sum / y.measure()
    });
    let tower_atoms = tower.covered().len().max(1);
    Ok(YReport {
        mu_y: y.measure(),
        uncovered: tower.measure() - y.measure(),
        passage_fraction: with_passage as f64 / tower_atoms as f64,
        integral,
        normalized_integral,
        blocks,
        y,
    })
}

/// `mu(Y Δ T^z Y)` for each shift.
pub fn almost_invariance_profile(system: &FiniteSystem, y: &AtomSet, shifts: &[GroupElement]) -> Result<Vec<f64>> {
    shifts
        .iter()
        .map(|z| {
            let moved = system.translate_set(z, y)?;
            Ok(system.symmetric_difference(y, &moved)?.measure())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffOptions {
    pub s: f64,
    /// `L = max(1, N / l_divisor)`.
    pub l_divisor: usize,
    /// Tower side `H = h_factor * N`.
    pub h_factor: usize,
}

impl BirkhoffOptions {
    pub fn new(s: f64) -> Self {
        BirkhoffOptions { s, l_divisor: 10, h_factor: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffRow {
    pub n: usize,
    pub l: usize,
    pub mu_y: f64,
    pub normalized_integral: Option<f64>,
    /// `mu(Y Δ T^{e_i} Y)` for each generator.
    pub sym_diff: Vec<f64>,
    pub blocks: usize,
    pub fraction: f64,
}

pub fn birkhoff_contradiction_experiment(
    system: &FiniteSystem,
    f: &Observable,
    opts: &BirkhoffOptions,
    schedule: &[usize],
) -> Result<Vec<BirkhoffRow>> {
    system.check_observable(f)?;
    let mean = system.mean(f);
    if mean.abs() > ZERO_MEAN_TOL {
        return Err(Error::NonZeroMean(mean));
    }
    if !system.is_ergodic() {
        return Err(Error::NotErgodic(format!("{} orbits", system.orbit_partition_check().orbits)));
    }
    if opts.l_divisor == 0 || opts.h_factor < 2 {
        return Err(Error::InvalidArgument("need l_divisor >= 1 and h_factor >= 2".into()));
    }
    let d = system.dim();
    let gens: Vec<GroupElement> = (0..d).map(|i| GroupElement::unit(d, i)).collect();
    let mut rows = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let l = (n / opts.l_divisor).max(1);
        let h = opts.h_factor * n;
        let tower = if d == 1 {
            rokhlin_tower_1d(system, h, 1.0)?.tower
        } else {
            let mut p = ZdTowerParams::new(h, 0.5);
            p.max_iters = 50;
            build_tower_zd(system, &p)?.tower
        };
        let rep = build_y_n(system, f, opts.s, l, n, &tower)?;
        let sym_diff = almost_invariance_profile(system, &rep.y, &gens)?;
        rows.push(BirkhoffRow {
            n,
            l,
            mu_y: rep.mu_y,
            normalized_integral: rep.normalized_integral,
            sym_diff,
            blocks: rep.blocks.len(),
            fraction: rep.passage_fraction,
        });
    }
    Ok(rows)
}

pub fn birkhoff_csv(rows: &[BirkhoffRow], dim: usize) -> String {
    let mut s = String::from("N,mu_Y,normalized_integral");
    for i in 1..=dim {
        s.push_str(&format!(",sym_diff_gen{i}"));
    }
    s.push_str(",blocks,fraction\n");
    for r in rows {
        s.push_str(&format!("{},{:e},", r.n, r.mu_y));
        if let Some(v) = r.normalized_integral {
            s.push_str(&format!("{v:e}"));
        }
        for v in &r.sym_diff {
            s.push_str(&format!(",{v:e}"));
        }
        s.push_str(&format!(",{},{:e}\n", r.blocks, r.fraction));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_passage(s: &FiniteSystem, f: &Observable, x: usize, thr: f64, cap: usize) -> Option<usize> {
        let d = s.dim();
        (1..=cap).find(|&l| {
            let pts = CubeShape { side: l, dim: d }.offsets();
            let sum: f64 = pts
                .iter()
                .map(|o| {
                    let z: Vec<i64> = o.iter().map(|c| c + 1).collect();
                    f.get(s.apply_unchecked(&z, x))
                })
                .sum();
            sum / pts.len() as f64 > thr
        })
    }

    #[test]
    fn shell_points_count() {
        for d in 1..=3 {
            for l in 1..=4i64 {
                let pts = shell_points(l, d);
                assert_eq!(pts.len() as i64, l.pow(d as u32) - (l - 1).pow(d as u32));
                assert!(pts.iter().all(|p| p.iter().max() == Some(&l) && p.iter().all(|&c| c >= 1)));
            }
        }
    }

    #[test]
    fn first_passage_examples() {
        let s = FiniteSystem::cycle(8).unwrap();
        let p = HeavyOrbitParams::new(0.4, 8).unwrap();
        let f = Observable::new(vec![0.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(first_passage(&s, &f, 0, &p).unwrap(), Some(2));
        let ones = Observable::constant(8, 1.0);
        assert_eq!(first_passage(&s, &ones, 3, &HeavyOrbitParams::new(0.5, 8).unwrap()).unwrap(), Some(1));
        assert_eq!(first_passage(&s, &Observable::zeros(8), 3, &p).unwrap(), None);
    }

    #[test]
    fn first_passage_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let systems = [FiniteSystem::cycle(300).unwrap(), FiniteSystem::torus(&[9, 11]).unwrap()];
        for s in &systems {
            for _ in 0..200 {
                let f = Observable::new((0..s.atoms()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let x = rng.random_range(0..s.atoms());
                let thr = rng.random_range(0.01..0.6);
                let cap = if s.dim() == 1 { 60 } else { 6 };
                let p = HeavyOrbitParams::new(thr, cap).unwrap();
                assert_eq!(first_passage(s, &f, x, &p).unwrap(), naive_passage(s, &f, x, thr, cap));
            }
        }
    }

    #[test]
    fn batch_matches_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let h = rng.random_range(1..80);
            let v: Vec<f64> = (0..h).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (thr, lmin, lmax) = (rng.random_range(0.0..0.5), rng.random_range(1..5), rng.random_range(1..40));
            let fast = batch_first_passage(&v, thr, lmin, lmax);
            for i in 0..h {
                let mut sum = 0.0;
                let mut want = None;
                for l in 1..=lmax.min(h - 1 - i) {
                    sum += v[i + l];
                    if l >= lmin && sum / l as f64 > thr {
                        want = Some(l);
                        break;
                    }
                }
                assert_eq!(fast[i], want, "anchor {i}");
            }
        }
    }

    #[test]
    fn heavy_partition_examples() {
        let s = FiniteSystem::cycle(20).unwrap();
        let p = HeavyOrbitParams::new(0.5, 20).unwrap();
        let w = OrbitWindow { start: 0, len: 20 };
        let r = greedy_heavy_partition_1d(&s, &Observable::zeros(20), &p, w).unwrap();
        assert!(r.selected.is_empty() && r.fraction == 0.0);

        // every anchor heavy at L = 1; the last anchor's block would leave the window
        let r = greedy_heavy_partition_1d(&s, &Observable::constant(20, 1.0), &p, w).unwrap();
        assert_eq!(r.y.len(), 19);

        let mut v = vec![0.0; 20];
        v[1] = -10.0;
        v[4] = 3.0;
        v[8] = -10.0;
        v[10] = 2.0;
        let f = Observable::new(v).unwrap();
        let r = greedy_heavy_partition_1d(&s, &f, &p, w).unwrap();
        assert_eq!(r.selected, vec![HeavyBlock { anchor: 1, side: 3 }, HeavyBlock { anchor: 8, side: 2 }]);
        assert_eq!(r.y.members(), &[2, 3, 4, 9, 10]);
        assert!(s.integrate(&f, &r.y).unwrap() > 0.5 * r.y.measure());
    }

    #[test]
    fn cube_selection_examples() {
        let w = CubeShape::new(10, 1).unwrap();
        let cands = (0..10).map(|i| Candidate { anchor: vec![i], side: 2 }).collect();
        let sel = greedy_cube_selection(w, cands, SelectionStrategy::Lexicographic).unwrap();
        let starts: Vec<usize> = sel.selected.iter().map(|c| c.anchor[0]).collect();
        assert_eq!(starts, vec![0, 2, 4, 6, 8]);
        assert_eq!(sel.fraction, 1.0);
        assert_eq!(sel.discarded, 1);

        let w2 = CubeShape::new(5, 2).unwrap();
        let one = vec![Candidate { anchor: vec![0, 0], side: 5 }];
        assert_eq!(greedy_cube_selection(w2, one, SelectionStrategy::Lexicographic).unwrap().fraction, 1.0);
    }

    fn random_cover_helper(rng: &mut ChaCha8Rng, h: usize, d: usize, lmax: usize) -> Vec<Candidate> {
        random_candidates(CubeShape::new(h, d).unwrap(), lmax, rng)
    }

    #[test]
    fn greedy_against_exact_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let w = CubeShape::new(6, 2).unwrap();
            let cands = random_cover_helper(&mut rng, 6, 2, 4);
            let best = max_disjoint_cover(w, &cands).unwrap();
            for strat in [SelectionStrategy::Lexicographic, SelectionStrategy::LargestFirst] {
                let sel = greedy_cube_selection(w, cands.clone(), strat).unwrap();
                assert!(sel.covered * 9 >= best);
                let mut seen = vec![false; 36];
                for c in &sel.selected {
                    for k in cube_cells(6, c) {
                        assert!(!seen[k]);
                        seen[k] = true;
                    }
                }
            }
        }
    }

    #[test]
    fn exact_search_small() {
        let w = CubeShape::new(3, 1).unwrap();
        let c = vec![Candidate { anchor: vec![0], side: 2 }, Candidate { anchor: vec![1], side: 2 }];
        assert_eq!(max_disjoint_cover(w, &c).unwrap(), 2);
        let c = vec![
            Candidate { anchor: vec![0], side: 1 },
            Candidate { anchor: vec![0], side: 3 },
            Candidate { anchor: vec![1], side: 2 },
        ];
        assert_eq!(max_disjoint_cover(w, &c).unwrap(), 3);
    }

    #[test]
    fn y_n_examples() {
        let s = FiniteSystem::cycle(1000).unwrap();
        let tower = rokhlin_tower_1d(&s, 100, 0.5).unwrap().tower;
        let c = Observable::constant(1000, 1.0);
        let r = build_y_n(&s, &c, 0.5, 2, 10, &tower).unwrap();
        assert!(r.mu_y > 0.9);
        assert!(r.normalized_integral.unwrap() > 0.5);

        let r = build_y_n(&s, &Observable::zeros(1000), 0.5, 2, 10, &tower).unwrap();
        assert!(r.y.is_empty() && r.normalized_integral.is_none());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = FiniteSystem::cycle(100_000).unwrap();
        let v: Vec<f64> = (0..100_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let f = Observable::new(v.iter().map(|x| x - m).collect()).unwrap();
        let tower = rokhlin_tower_1d(&s, 1000, 1.0).unwrap().tower;
        let r = build_y_n(&s, &f, 0.2, 5, 100, &tower).unwrap();
        assert!(!r.y.is_empty());
        assert!(r.normalized_integral.unwrap() > 0.2);
        // boundary bound: mu(Y Δ TY) <= 2 mu(Y) / L
        let sd = almost_invariance_profile(&s, &r.y, &[GroupElement::new([1])]).unwrap()[0];
        assert!(sd <= 2.0 * r.blocks.len() as f64 / 100_000.0 + 1e-15);
        assert!(sd <= 2.0 * r.mu_y / 5.0 + 1e-15);
    }

    #[test]
    fn y_n_two_dimensional() {
        let s = FiniteSystem::torus(&[24, 24]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = Observable::new((0..576).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let tower = tower_for(&s, 12);
        let r = build_y_n(&s, &f, 0.1, 1, 4, &tower).unwrap();
        if let Some(m) = r.normalized_integral {
            assert!(m > 0.1);
        }
        let fsum: f64 = r.blocks.iter().map(|b| b.side * b.side).sum::<usize>() as f64;
        assert_eq!(fsum as usize, r.y.len());
    }

    fn tower_for(s: &FiniteSystem, h: usize) -> Tower {
        let base = s.set(vec![0, s.atom_at(&[0, 12]), s.atom_at(&[12, 0]), s.atom_at(&[12, 12])]).unwrap();
        Tower::new(s, base, CubeShape::new(h, 2).unwrap()).unwrap()
    }

    #[test]
    fn invariance_examples() {
        let s = FiniteSystem::cycle(100).unwrap();
        let g = [GroupElement::new([1])];
        assert_eq!(almost_invariance_profile(&s, &s.full_set(), &g).unwrap(), vec![0.0]);
        assert_eq!(almost_invariance_profile(&s, &s.empty_set(), &g).unwrap(), vec![0.0]);
        let y = s.set((0..50).collect()).unwrap();
        assert!((almost_invariance_profile(&s, &y, &g).unwrap()[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn birkhoff_examples() {
        let s = FiniteSystem::cycle(10_000).unwrap();
        let opts = BirkhoffOptions::new(0.1);
        let rows = birkhoff_contradiction_experiment(&s, &Observable::zeros(10_000), &opts, &[10, 100]).unwrap();
        assert!(rows.iter().all(|r| r.mu_y == 0.0));
        assert!(birkhoff_contradiction_experiment(&s, &Observable::zeros(10_000), &opts, &[]).unwrap().is_empty());
        let c = Observable::constant(10_000, 1.0);
        assert!(matches!(birkhoff_contradiction_experiment(&s, &c, &opts, &[10]), Err(Error::NonZeroMean(_))));
        let csv = birkhoff_csv(&rows, 1);
        assert!(csv.starts_with("N,mu_Y,normalized_integral,sym_diff_gen1,blocks,fraction\n"));
    }
}
