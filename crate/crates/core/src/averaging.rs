//! Averaging operators `P = sum_z w_z T^z` and convergence diagnostics.
//!
//! Operators act on observables by `(P f)(x) = sum_z w_z f(T^z x)`. Because
//! every `T^z` preserves the measure, the adjoint of `T^z` is `T^{-z}`.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{FiniteSystem, GroupElement, Observable};

/// Tolerance on `sum w_z = 1`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Default cap on the support of composed operators.
pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// Side `N` and dimension `d` of the cube `Q_N = {1..N}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeShape {
    pub side: usize,
    pub dim: usize,
}

impl CubeShape {
    pub fn new(side: usize, dim: usize) -> Result<Self> {
        if side == 0 || dim == 0 {
            return Err(Error::InvalidArgument("cube side and dimension must be positive".into()));
        }
        Ok(CubeShape { side, dim })
    }

    pub fn volume(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    /// All points of `{0..side-1}^dim` in lexicographic order.
    pub fn offsets(&self) -> Vec<Vec<i64>> {
        lattice_box(self.dim, 0, self.side as i64 - 1)
    }
}

fn lattice_box(dim: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * (hi - lo + 1).max(0) as usize);
        for p in &out {
            for c in lo..=hi {
                let mut q = p.clone();
                q.push(c);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

/// Uniform weights on a box `{lo..lo+n-1}^d`; unlocks the sliding-window path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct UniformBox {
    lo: i64,
    n: usize,
}

/// A finitely supported probability vector on `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedOperator {
    dim: usize,
    support: Vec<(GroupElement, f64)>,
    #[serde(skip)]
    boxed: Option<UniformBox>,
}

impl WeightedOperator {
    /// Validates weights (nonnegative, summing to one) and merges duplicates.
    pub fn new(dim: usize, entries: Vec<(GroupElement, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (z, w) in entries {
            if z.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: z.dim() });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!("weight {w} at {z} is not a nonnegative number")));
            }
            if w > 0.0 {
                *map.entry(z).or_insert(0.0) += w;
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightedOperator { dim, support: map.into_iter().collect(), boxed: None })
    }

    pub fn point_mass(z: GroupElement) -> Self {
        WeightedOperator { dim: z.dim(), support: vec![(z, 1.0)], boxed: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self::point_mass(GroupElement::zero(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[(GroupElement, f64)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.support.iter().map(|s| s.1).sum()
    }

    /// `P*`: negate every support vector.
    pub fn adjoint(&self) -> WeightedOperator {
        let mut support: Vec<_> = self.support.iter().map(|(z, w)| (z.neg(), *w)).collect();
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let boxed = self.boxed.map(|b| UniformBox { lo: -(b.lo + b.n as i64 - 1), n: b.n });
        WeightedOperator { dim: self.dim, support, boxed }
    }

    /// `P Q`, the convolution of the weight vectors.
    pub fn compose(&self, other: &WeightedOperator) -> Result<WeightedOperator> {
        self.compose_capped(other, usize::MAX)
    }

    pub fn compose_capped(&self, other: &WeightedOperator, cap: usize) -> Result<WeightedOperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut map: BTreeMap<GroupElement, f64> = BTreeMap::new();
        for (a, wa) in &self.support {
            for (b, wb) in &other.support {
                *map.entry(a.add(b)).or_insert(0.0) += wa * wb;
                if map.len() > cap {
                    return Err(Error::SupportTooLarge { cap });
                }
            }
        }
        Ok(WeightedOperator { dim: self.dim, support: map.into_iter().collect(), boxed: None })
    }
}

/// `P_N = N^{-d} sum_{z in Q_N} T^z` with `Q_N = {1..N}^d`.
pub fn cube_operator(n: usize, d: usize) -> Result<WeightedOperator> {
    let shape = CubeShape::new(n, d)?;
    let w = 1.0 / shape.volume() as f64;
    let support = lattice_box(d, 1, n as i64).into_iter().map(|z| (GroupElement(z), w)).collect();
    Ok(WeightedOperator { dim: d, support, boxed: Some(UniformBox { lo: 1, n }) })
}

/// Uniform average over the lattice shell `{z : j < |z| < j + c}`.
pub fn shell_operator(j: u32, c: f64, d: usize) -> Result<WeightedOperator> {
    if !(c > 0.0 && c.is_finite()) || d == 0 {
        return Err(Error::InvalidArgument("shell needs c > 0 and d >= 1".into()));
    }
    let (inner, outer) = (j as f64 * j as f64, (j as f64 + c) * (j as f64 + c));
    let r = (j as f64 + c).ceil() as i64;
    let pts: Vec<GroupElement> = lattice_box(d, -r, r)
        .into_iter()
        .filter(|z| {
            let n2 = z.iter().map(|c| c * c).sum::<i64>() as f64;
            inner < n2 && n2 < outer
        })
        .map(GroupElement)
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyShell { j, c });
    }
    let w = 1.0 / pts.len() as f64;
    WeightedOperator::new(d, pts.into_iter().map(|z| (z, w)).collect())
}

/// Lattice points of the closed ball `|z| <= j`, lexicographic.
pub fn lattice_ball(j: u32, d: usize) -> Vec<GroupElement> {
    let r = j as i64;
    lattice_box(d, -r, r)
        .into_iter()
        .filter(|z| z.iter().map(|c| c * c).sum::<i64>() <= r * r)
        .map(GroupElement)
        .collect()
}

/// Uniform weights `1/j` on a uniformly random `j`-subset of the ball `B_j`.
pub fn random_subset_operator(j: u32, d: usize, seed: u64) -> Result<WeightedOperator> {
    let ball = lattice_ball(j, d);
    let k = j as usize;
    if k == 0 || ball.len() < k {
        return Err(Error::InvalidArgument(format!("cannot pick {k} points from a ball of {}", ball.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    let mut idx = sample(&mut rng, ball.len(), k).into_vec();
    idx.sort_unstable();
    let w = 1.0 / k as f64;
    WeightedOperator::new(d, idx.into_iter().map(|i| (ball[i].clone(), w)).collect())
}

/// `(P f)(x) = sum_z w_z f(T^z x)`.
pub fn apply_operator(p: &WeightedOperator, system: &FiniteSystem, f: &Observable) -> Result<Observable> {
    if p.dim != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), got: p.dim });
    }
    system.check_observable(f)?;
    if let (Some(b), Some(dims), Some(frame)) = (p.boxed, system.box_dims(), system.frame()) {
        return Ok(apply_box(&dims, &frame, b, f.values()));
    }
    let vals = f.values();
    let out: Vec<f64> = (0..system.atoms())
        .into_par_iter()
        .with_min_len(1024)
        .map(|x| p.support.iter().map(|(z, w)| w * vals[system.apply_unchecked(z.coords(), x)]).sum())
        .collect();
    Ok(Observable::from_vec_unchecked(out))
}

/// Separable sliding-window evaluation of a uniform box average.
fn apply_box(dims: &[usize], frame: &[usize], b: UniformBox, f: &[f64]) -> Observable {
    let m_total = frame.len();
    let mut cur: Vec<f64> = frame.iter().map(|&x| f[x]).collect();
    let mut stride = m_total;
    let mut line = Vec::new();
    let mut prefix = Vec::new();
    for &m in dims {
        stride /= m;
        let block = m * stride;
        let mut next = vec![0.0; m_total];
        for base_hi in (0..m_total).step_by(block) {
            for base_lo in 0..stride {
                let base = base_hi + base_lo;
                line.clear();
                line.extend((0..m).map(|c| cur[base + c * stride]));
                window_sums(&line, b.lo, b.n, &mut prefix);
                for c in 0..m {
                    next[base + c * stride] = prefix[c];
                }
            }
        }
        cur = next;
    }
    let scale = 1.0 / (b.n as f64).powi(dims.len() as i32);
    let mut out = vec![0.0; m_total];
    for (k, &x) in frame.iter().enumerate() {
        out[x] = cur[k] * scale;
    }
    Observable::from_vec_unchecked(out)
}

/// Writes `sum_{k=lo}^{lo+n-1} v[(c + k) mod m]` for every `c` into `out[..m]`.
fn window_sums(v: &[f64], lo: i64, n: usize, out: &mut Vec<f64>) {
    let m = v.len();
    let total: f64 = v.iter().sum();
    let (wraps, rem) = (n / m, n % m);
    let mut prefix = Vec::with_capacity(2 * m + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for i in 0..2 * m {
        acc += v[i % m];
        prefix.push(acc);
    }
    out.clear();
    let start_shift = lo.rem_euclid(m as i64) as usize;
    for c in 0..m {
        let s = (c + start_shift) % m;
        let partial = prefix[s + rem] - prefix[s];
        out.push(wraps as f64 * total + partial);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Sup,
}

/// Weighted `L_p` norm.
pub fn lp_norm(f: &Observable, system: &FiniteSystem, p: Norm) -> f64 {
    let (v, w) = (f.values(), system.weights());
    match p {
        Norm::L1 => v.iter().zip(w).map(|(a, w)| a.abs() * w).sum(),
        Norm::L2 => v.iter().zip(w).map(|(a, w)| a * a * w).sum::<f64>().sqrt(),
        Norm::Sup => v.iter().zip(w).filter(|(_, &w)| w > 0.0).map(|(a, _)| a.abs()).fold(0.0, f64::max),
    }
}

/// `Theta f`, the constant function `int f`.
pub fn mean_projection(system: &FiniteSystem, f: &Observable) -> Observable {
    Observable::constant(system.atoms(), system.mean(f))
}

/// `|| T^g (P f) - P f ||_2`.
pub fn commutator_defect(
    p: &WeightedOperator,
    g: &GroupElement,
    system: &FiniteSystem,
    f: &Observable,
) -> Result<f64> {
    let pf = apply_operator(p, system, f)?;
    let shifted = system.compose_shift(&pf, g)?;
    Ok(lp_norm(&shifted.sub(&pf), system, Norm::L2))
}

/// `< T^g (P* P)^{2^k} f, h > - (int f)(int h)`.
///
/// The support of `(P* P)^{2^k}` is bounded by `cap`; for box-shaped `P`
/// the power is evaluated by repeated application instead of expansion.
pub fn power_correlation(
    p: &WeightedOperator,
    g: &GroupElement,
    k: u32,
    system: &FiniteSystem,
    f: &Observable,
    h: &Observable,
    cap: usize,
) -> Result<f64> {
    system.check_element(g)?;
    system.check_observable(h)?;
    let reps = 1usize.checked_shl(k).ok_or(Error::SupportTooLarge { cap })?;
    let adj = p.adjoint();
    let u = if let Some(b) = p.boxed {
        let side = reps.checked_mul(2 * (b.n - 1)).map(|s| s + 1).ok_or(Error::SupportTooLarge { cap })?;
        let size = side.checked_pow(p.dim as u32).ok_or(Error::SupportTooLarge { cap })?;
        if size > cap {
            return Err(Error::SupportTooLarge { cap });
        }
        let mut u = f.clone();
        for _ in 0..reps {
            u = apply_operator(&adj, system, &apply_operator(p, system, &u)?)?;
        }
        u
    } else {
        let mut q = adj.compose_capped(p, cap)?;
        for _ in 0..k {
            q = q.compose_capped(&q, cap)?;
        }
        apply_operator(&q, system, f)?
    };
    let shifted = system.compose_shift(&u, g)?;
    Ok(system.inner(&shifted, h) - system.mean(f) * system.mean(h))
}

/// Which operator family a sweep indexes by its scale parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum OperatorFamily {
    /// `P_N`, cube of side `N`.
    Cube,
    /// Shell `j < |z| < j + c` with `j = N`.
    Shell { c: f64 },
    /// Random `N`-subset of the ball of radius `N`.
    RandomSubset { seed: u64 },
}

impl OperatorFamily {
    pub fn operator(&self, n: usize, dim: usize) -> Result<WeightedOperator> {
        match self {
            OperatorFamily::Cube => cube_operator(n, dim),
            OperatorFamily::Shell { c } => shell_operator(n as u32, *c, dim),
            OperatorFamily::RandomSubset { seed } => random_subset_operator(n as u32, dim, *seed),
        }
    }
}

/// One row of a convergence sweep: deviations of `P_N f` from `int f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub l1_dev: f64,
    pub l2_dev: f64,
    pub sup_dev: f64,
}

pub fn convergence_sweep(
    system: &FiniteSystem,
    f: &Observable,
    family: &OperatorFamily,
    ns: &[usize],
) -> Result<Vec<SweepRow>> {
    let mean = system.mean(f);
    ns.iter()
        .map(|&n| {
            let p = family.operator(n, system.dim())?;
            let dev = apply_operator(&p, system, f)?.sub_constant(mean);
            Ok(SweepRow {
                n,
                l1_dev: lp_norm(&dev, system, Norm::L1),
                l2_dev: lp_norm(&dev, system, Norm::L2),
                sup_dev: lp_norm(&dev, system, Norm::Sup),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("N,l1_dev,l2_dev,sup_dev\n");
    for r in rows {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", r.n, r.l1_dev, r.l2_dev, r.sup_dev));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_obs(m: usize, seed: u64) -> Observable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Observable::new((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Dense `M x M` matrix of `P` acting on functions.
    fn dense(p: &WeightedOperator, s: &FiniteSystem) -> Vec<Vec<f64>> {
        let m = s.atoms();
        let mut a = vec![vec![0.0; m]; m];
        for (x, row) in a.iter_mut().enumerate() {
            for (z, w) in p.support() {
                row[s.apply(z, x).unwrap()] += w;
            }
        }
        a
    }

    fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
    }

    #[test]
    fn cube_examples() {
        let p = cube_operator(1, 1).unwrap();
        assert_eq!(p.support(), &[(GroupElement::new([1]), 1.0)]);
        let p = cube_operator(2, 2).unwrap();
        let pts: Vec<_> = p.support().iter().map(|(z, _)| z.0.clone()).collect();
        assert_eq!(pts, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
        assert!(p.support().iter().all(|(_, w)| *w == 0.25));
        let p = cube_operator(3, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert!((p.total_weight() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shell_examples() {
        let p = shell_operator(1, 3.0, 3).unwrap();
        let has = |z: [i64; 3]| p.support().iter().any(|(g, _)| g.0 == z);
        assert!(has([2, 0, 0]));
        assert!(!has([1, 0, 0]));
        for (z, _) in p.support() {
            let n = (z.0.iter().map(|c| c * c).sum::<i64>() as f64).sqrt();
            assert!(1.0 < n && n < 4.0);
        }
        // 0 < |z| < 1.5 admits the 6 unit vectors and the 12 vectors of norm sqrt(2)
        let small = shell_operator(0, 1.5, 3).unwrap();
        assert_eq!(small.len(), 18);
        assert!(small.support().iter().all(|(_, w)| (*w - 1.0 / 18.0).abs() < 1e-15));
        assert_eq!(shell_operator(0, 1.2, 3).unwrap().len(), 6);
        assert_eq!(shell_operator(1, 0.2, 3), Err(Error::EmptyShell { j: 1, c: 0.2 }));
    }

    #[test]
    fn random_subset_examples() {
        assert_eq!(lattice_ball(1, 3).len(), 7);
        let p = random_subset_operator(1, 3, 9).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.support()[0].1, 1.0);
        let a = random_subset_operator(5, 3, 42).unwrap();
        let b = random_subset_operator(5, 3, 42).unwrap();
        assert_eq!(a, b);
        assert!((a.total_weight() - 1.0).abs() < 1e-12);
        assert!(a.support().iter().all(|(z, _)| z.0.iter().map(|c| c * c).sum::<i64>() <= 25));
    }

    #[test]
    fn apply_examples() {
        let s = FiniteSystem::cycle(4).unwrap();
        let f = Observable::new(vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let pf = apply_operator(&cube_operator(2, 1).unwrap(), &s, &f).unwrap();
        assert!(pf.values().iter().all(|v| v.abs() < 1e-15));
        let id = apply_operator(&WeightedOperator::identity(1), &s, &f).unwrap();
        assert_eq!(id, f);
        let s = FiniteSystem::cycle(9).unwrap();
        let f = random_obs(9, 1);
        let pf = apply_operator(&cube_operator(9, 1).unwrap(), &s, &f).unwrap();
        let mean = s.mean(&f);
        assert!(pf.values().iter().all(|v| (v - mean).abs() < 1e-12));
        assert!(apply_operator(&cube_operator(2, 2).unwrap(), &s, &f).is_err());
    }

    #[test]
    fn adjoint_compose_examples() {
        let p = WeightedOperator::point_mass(GroupElement::new([3]));
        assert_eq!(p.adjoint(), WeightedOperator::point_mass(GroupElement::new([-3])));
        let a = WeightedOperator::point_mass(GroupElement::new([1]));
        let b = WeightedOperator::point_mass(GroupElement::new([2]));
        assert_eq!(a.compose(&b).unwrap(), WeightedOperator::point_mass(GroupElement::new([3])));
        let c = cube_operator(2, 1).unwrap();
        let cc = c.compose(&c).unwrap();
        let got: Vec<_> = cc.support().iter().map(|(z, w)| (z.0[0], *w)).collect();
        assert_eq!(got, vec![(2, 0.25), (3, 0.5), (4, 0.25)]);
    }

    #[test]
    fn dense_matrix_agreement() {
        let systems = [
            FiniteSystem::cycle(13).unwrap(),
            FiniteSystem::torus(&[4, 5]).unwrap(),
            FiniteSystem::permutation(vec![3, 0, 5, 1, 2, 4, 7, 6]).unwrap(),
            FiniteSystem::permutation(vec![2, 4, 1, 0, 5, 3]).unwrap(),
        ];
        for (i, s) in systems.iter().enumerate() {
            let f = random_obs(s.atoms(), i as u64);
            let d = s.dim();
            let mut ops = vec![cube_operator(3, d).unwrap(), cube_operator(7, d).unwrap()];
            ops.push(ops[0].adjoint());
            ops.push(ops[0].compose(&ops[1]).unwrap());
            if d == 1 {
                ops.push(shell_operator(1, 2.5, 1).unwrap());
            }
            for p in &ops {
                let fast = apply_operator(p, s, &f).unwrap();
                let slow = matvec(&dense(p, s), f.values());
                for (a, b) in fast.values().iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-10, "system {i}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn norms() {
        let s = FiniteSystem::cycle(2).unwrap();
        let f = Observable::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(lp_norm(&f, &s, Norm::L1), 1.0);
        assert_eq!(lp_norm(&f, &s, Norm::L2), 1.0);
        assert_eq!(lp_norm(&f, &s, Norm::Sup), 1.0);
        assert!(mean_projection(&s, &f).values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn commutator_examples() {
        let s = FiniteSystem::cycle(64).unwrap();
        let g = GroupElement::new([1]);
        let c = Observable::constant(64, 3.0);
        assert!(commutator_defect(&cube_operator(16, 1).unwrap(), &g, &s, &c).unwrap() < 1e-14);
        let f = random_obs(64, 5);
        assert!(commutator_defect(&cube_operator(64, 1).unwrap(), &g, &s, &f).unwrap() < 1e-12);
        let defect = commutator_defect(&cube_operator(16, 1).unwrap(), &g, &s, &f).unwrap();
        // telescoped closed form (f o T^{N+1} - f o T) / N
        let closed: Vec<f64> = (0..64).map(|x| (f.get((x + 17) % 64) - f.get((x + 1) % 64)) / 16.0).collect();
        let closed_norm = (closed.iter().map(|v| v * v).sum::<f64>() / 64.0).sqrt();
        assert!((defect - closed_norm).abs() < 1e-12);
        assert!(defect <= 2.0 / 16.0 * lp_norm(&f, &s, Norm::L2) + 1e-10);
    }

    #[test]
    fn power_correlation_examples() {
        let s = FiniteSystem::cycle(8).unwrap();
        let p = cube_operator(2, 1).unwrap();
        let g0 = GroupElement::zero(1);
        let c = Observable::constant(8, 2.0);
        let h = random_obs(8, 3);
        assert!(power_correlation(&p, &g0, 2, &s, &c, &h, DEFAULT_SUPPORT_CAP).unwrap().abs() < 1e-14);

        let f = random_obs(8, 4);
        let f = f.sub_constant(s.mean(&f));
        let v = power_correlation(&p, &g0, 0, &s, &f, &f, DEFAULT_SUPPORT_CAP).unwrap();
        let pf = apply_operator(&p, &s, &f).unwrap();
        assert!((v - s.inner(&pf, &pf)).abs() < 1e-14);

        // dense oracle: (A^T A)^2, then shift by g = 3
        let a = dense(&p, &s);
        let at: Vec<Vec<f64>> = (0..8).map(|i| (0..8).map(|j| a[j][i]).collect()).collect();
        let mut u = f.values().to_vec();
        for _ in 0..2 {
            u = matvec(&at, &matvec(&a, &u));
        }
        let shifted: Vec<f64> = (0..8).map(|x| u[(x + 3) % 8]).collect();
        let expect: f64 = shifted.iter().zip(h.values()).map(|(a, b)| a * b).sum::<f64>() / 8.0
            - s.mean(&f) * s.mean(&h);
        let got = power_correlation(&p, &GroupElement::new([3]), 1, &s, &f, &h, DEFAULT_SUPPORT_CAP).unwrap();
        assert!((got - expect).abs() < 1e-12);
        // generic path agrees with the box path
        let generic = WeightedOperator::new(1, p.support().to_vec()).unwrap();
        let got2 = power_correlation(&generic, &GroupElement::new([3]), 1, &s, &f, &h, DEFAULT_SUPPORT_CAP).unwrap();
        assert!((got - got2).abs() < 1e-12);
        assert_eq!(
            power_correlation(&cube_operator(50, 1).unwrap(), &g0, 20, &s, &f, &h, 1000),
            Err(Error::SupportTooLarge { cap: 1000 })
        );
    }

    #[test]
    fn sweep_examples() {
        let s = FiniteSystem::cycle(32).unwrap();
        let c = Observable::constant(32, 1.5);
        for r in convergence_sweep(&s, &c, &OperatorFamily::Cube, &[1, 4, 32]).unwrap() {
            assert!(r.l1_dev < 1e-14 && r.l2_dev < 1e-14 && r.sup_dev < 1e-14);
        }
        let f = random_obs(32, 8);
        let rows = convergence_sweep(&s, &f, &OperatorFamily::Cube, &[32]).unwrap();
        assert!(rows[0].sup_dev < 1e-12);
        assert!(sweep_csv(&rows).starts_with("N,l1_dev,l2_dev,sup_dev\n"));
    }

    #[test]
    fn weights_validation() {
        assert!(WeightedOperator::new(1, vec![(GroupElement::new([0]), 0.5)]).is_err());
        assert!(WeightedOperator::new(1, vec![(GroupElement::new([0]), -1.0), (GroupElement::new([1]), 2.0)]).is_err());
        let merged =
            WeightedOperator::new(1, vec![(GroupElement::new([1]), 0.5), (GroupElement::new([1]), 0.5)]).unwrap();
        assert_eq!(merged.len(), 1);
    }
}
