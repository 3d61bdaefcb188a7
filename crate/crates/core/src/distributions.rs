//! Value distributions (push-forward laws) of observables and distances
//! between them.
//!
//! The bounded-Lipschitz metric is the working notion of weak-* closeness:
//! `sup |int g d mu_1 - int g d mu_2|` over `g` with `|g| <= 1` and
//! Lipschitz constant `<= 1`. On the line it is computed exactly; in the
//! plane it is a lower bound from a fixed dictionary of test functions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{FiniteSystem, Observable, MEASURE_TOL};

/// Values closer than this are merged into one atom of the law.
pub const VALUE_MERGE_TOL: f64 = 1e-12;

/// Side of the 2-d test-function grid.
const PLANE_GRID: usize = 33;

/// A finitely supported probability law on `R` or `R^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EmpiricalDistribution {
    /// `(value, mass)` sorted by value.
    Line(Vec<(f64, f64)>),
    /// `((x, y), mass)` sorted lexicographically.
    Plane(Vec<((f64, f64), f64)>),
}

impl EmpiricalDistribution {
    /// Law on the line from arbitrary `(value, mass)` pairs; masses are
    /// renormalized only if they already sum to one within tolerance.
    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|(v, m)| !v.is_finite() || !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidArgument("distribution needs finite values and nonnegative masses".into()));
        }
        let total: f64 = points.iter().map(|p| p.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("masses sum to {total}")));
        }
        Ok(EmpiricalDistribution::Line(group_line(points)))
    }

    pub fn point_mass(c: f64) -> Self {
        EmpiricalDistribution::Line(vec![(c, 1.0)])
    }

    /// `n` equal atoms at the midpoints of `[a, b]`.
    pub fn uniform_grid(a: f64, b: f64, n: usize) -> Self {
        let h = (b - a) / n as f64;
        EmpiricalDistribution::Line((0..n).map(|i| (a + (i as f64 + 0.5) * h, 1.0 / n as f64)).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            EmpiricalDistribution::Line(_) => 1,
            EmpiricalDistribution::Plane(_) => 2,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EmpiricalDistribution::Line(p) => p.len(),
            EmpiricalDistribution::Plane(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            EmpiricalDistribution::Line(p) => p.iter().map(|x| x.1).sum(),
            EmpiricalDistribution::Plane(p) => p.iter().map(|x| x.1).sum(),
        }
    }

    pub fn line(&self) -> Result<&[(f64, f64)]> {
        match self {
            EmpiricalDistribution::Line(p) => Ok(p),
            EmpiricalDistribution::Plane(_) => Err(Error::DimensionMismatch { expected: 1, got: 2 }),
        }
    }

    pub fn plane(&self) -> Result<&[((f64, f64), f64)]> {
        match self {
            EmpiricalDistribution::Plane(p) => Ok(p),
            EmpiricalDistribution::Line(_) => Err(Error::DimensionMismatch { expected: 2, got: 1 }),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.line()?.iter().map(|(v, m)| v * m).sum())
    }

    /// `int |t| d nu`.
    pub fn abs_moment(&self) -> Result<f64> {
        Ok(self.line()?.iter().map(|(v, m)| v.abs() * m).sum())
    }

    /// Push-forward under `t -> c t`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let pts = self.line()?.iter().map(|&(v, m)| (v * c, m)).collect();
        Ok(EmpiricalDistribution::Line(group_line(pts)))
    }

    /// `(value, mass)` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            EmpiricalDistribution::Line(p) => {
                out.push_str("value,mass\n");
                for (v, m) in p {
                    out.push_str(&format!("{v:.17e},{m:.17e}\n"));
                }
            }
            EmpiricalDistribution::Plane(p) => {
                out.push_str("x,y,mass\n");
                for ((x, y), m) in p {
                    out.push_str(&format!("{x:.17e},{y:.17e},{m:.17e}\n"));
                }
            }
        }
        out
    }
}

fn group_line(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    let mut anchor = f64::NEG_INFINITY;
    for (v, m) in points {
        if m == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if v - anchor <= VALUE_MERGE_TOL => last.1 += m,
            _ => {
                anchor = v;
                out.push((v, m));
            }
        }
    }
    out
}

/// Law of `f` under the system's measure.
pub fn law(system: &FiniteSystem, f: &Observable) -> Result<EmpiricalDistribution> {
    system.check_observable(f)?;
    let pts = f.values().iter().copied().zip(system.weights().iter().copied()).collect();
    Ok(EmpiricalDistribution::Line(group_line(pts)))
}

/// Joint law of `(f, g)` on `R^2`.
pub fn joint_law(system: &FiniteSystem, f: &Observable, g: &Observable) -> Result<EmpiricalDistribution> {
    system.check_observable(f)?;
    system.check_observable(g)?;
    let mut pts: Vec<((f64, f64), f64)> = f
        .values()
        .iter()
        .zip(g.values())
        .zip(system.weights())
        .map(|((&a, &b), &w)| ((a, b), w))
        .collect();
    pts.sort_by(|a, b| a.0 .0.total_cmp(&b.0 .0).then(a.0 .1.total_cmp(&b.0 .1)));
    Ok(EmpiricalDistribution::Plane(group_plane(pts)))
}

fn group_plane(pts: Vec<((f64, f64), f64)>) -> Vec<((f64, f64), f64)> {
    // pts sorted lexicographically; merge exact-tolerance duplicates
    let mut out: Vec<((f64, f64), f64)> = Vec::with_capacity(pts.len());
    for (p, m) in pts {
        match out.last_mut() {
            Some((q, mass))
                if (p.0 - q.0).abs() <= VALUE_MERGE_TOL && (p.1 - q.1).abs() <= VALUE_MERGE_TOL =>
            {
                *mass += m
            }
            _ => out.push((p, m)),
        }
    }
    out
}

/// Product of two laws on the line.
pub fn product(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<EmpiricalDistribution> {
    let (pa, pb) = (a.line()?, b.line()?);
    let mut pts = Vec::with_capacity(pa.len() * pb.len());
    for &(x, mx) in pa {
        for &(y, my) in pb {
            pts.push(((x, y), mx * my));
        }
    }
    Ok(EmpiricalDistribution::Plane(pts))
}

/// Marginals of a planar law.
pub fn marginals(joint: &EmpiricalDistribution) -> Result<(EmpiricalDistribution, EmpiricalDistribution)> {
    let p = joint.plane()?;
    let xs = p.iter().map(|&((x, _), m)| (x, m)).collect();
    let ys = p.iter().map(|&((_, y), m)| (y, m)).collect();
    Ok((EmpiricalDistribution::Line(group_line(xs)), EmpiricalDistribution::Line(group_line(ys))))
}

/// Merged support with signed mass differences `mu_1 - mu_2`.
fn signed_difference(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(x, m)), Some(&(y, n))) if x == y => {
                out.push((x, m - n));
                i += 1;
                j += 1;
            }
            (Some(&(x, m)), Some(&(y, _))) if x < y => {
                out.push((x, m));
                i += 1;
            }
            (Some(_), Some(&(y, n))) | (None, Some(&(y, n))) => {
                out.push((y, -n));
                j += 1;
            }
            (Some(&(x, m)), None) => {
                out.push((x, m));
                i += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Exact 1-Wasserstein distance `int |F_1 - F_2|`.
pub fn w1_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    let diff = signed_difference(a.line()?, b.line()?);
    let mut cdf = 0.0;
    let mut total = 0.0;
    for w in diff.windows(2) {
        cdf += w[0].1;
        total += cdf.abs() * (w[1].0 - w[0].0);
    }
    Ok(total)
}

/// Bounded-Lipschitz distance.
///
/// On the line this is the exact value of the chain linear program
/// `max sum g_i s_i` subject to `|g_i| <= 1`, `|g_{i+1} - g_i| <= t_{i+1} - t_i`
/// over the merged support `t_i` with signed masses `s_i` (any feasible
/// vector extends piecewise linearly to an admissible test function). In the
/// plane the value is a lower bound over a deterministic dictionary.
pub fn bl_distance(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    match (a, b) {
        (EmpiricalDistribution::Line(pa), EmpiricalDistribution::Line(pb)) => {
            Ok(bl_chain(&signed_difference(pa, pb)))
        }
        (EmpiricalDistribution::Plane(pa), EmpiricalDistribution::Plane(pb)) => Ok(bl_plane(pa, pb)),
        _ => Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() }),
    }
}

/// Concave piecewise-linear value function on `[-1, 1]`, kept as two stacks
/// of breakpoints (position, slope drop) on either side of the maximizer.
///
/// `mid` is the slope of the segment between the two stacks and `(anchor,
/// value)` is its left end and the function value there.
struct ConcaveChain {
    left: VecDeque<(f64, f64)>,
    right: VecDeque<(f64, f64)>,
    left_shift: f64,
    right_shift: f64,
    mid: f64,
    anchor: f64,
    value: f64,
}

impl ConcaveChain {
    fn new() -> Self {
        ConcaveChain {
            left: VecDeque::new(),
            right: VecDeque::new(),
            left_shift: 0.0,
            right_shift: 0.0,
            mid: 0.0,
            anchor: -1.0,
            value: 0.0,
        }
    }

    fn left_top(&self) -> Option<(f64, f64)> {
        self.left.back().map(|&(p, w)| (p + self.left_shift, w))
    }

    fn right_top(&self) -> Option<(f64, f64)> {
        self.right.front().map(|&(p, w)| (p + self.right_shift, w))
    }

    /// `V(g) += s g`, then move the maximizer.
    fn add_linear(&mut self, s: f64) {
        self.value += s * self.anchor;
        self.mid += s;
        while self.mid > 0.0 {
            let Some((p, w)) = self.right_top() else { break };
            self.value += self.mid * (p - self.anchor);
            self.anchor = p;
            if w <= self.mid {
                self.right.pop_front();
                self.left.push_back((p - self.left_shift, w));
                self.mid -= w;
            } else {
                self.right.front_mut().unwrap().1 = w - self.mid;
                self.left.push_back((p - self.left_shift, self.mid));
                self.mid = 0.0;
            }
        }
        while self.mid < 0.0 {
            let Some((p, w)) = self.left_top() else { break };
            // anchor == p here
            if self.mid + w <= 0.0 {
                self.left.pop_back();
                self.right.push_front((p - self.right_shift, w));
                self.mid += w;
                let next = self.left_top().map_or(-1.0, |(q, _)| q);
                self.value += self.mid * (next - p);
                self.anchor = next;
            } else {
                self.left.back_mut().unwrap().1 = w + self.mid;
                self.right.push_front((p - self.right_shift, -self.mid));
                self.mid = 0.0;
            }
        }
    }

    /// `V(g) <- max_{|h - g| <= d, |h| <= 1} V(h)`.
    fn dilate(&mut self, d: f64) {
        if d >= 2.0 {
            let best = self.max_value();
            *self = ConcaveChain::new();
            self.value = best;
            return;
        }
        if self.mid > 0.0 {
            // increasing up to +1
            self.value += self.mid * (1.0 - self.anchor);
            self.left_shift -= d;
            let p = 1.0 - d;
            self.left.push_back((p - self.left_shift, self.mid));
            self.mid = 0.0;
            self.anchor = p;
        } else if self.mid < 0.0 {
            // decreasing from -1; anchor is -1 and left is empty
            self.right_shift += d;
            let p = -1.0 + d;
            self.right.push_front((p - self.right_shift, -self.mid));
            self.mid = 0.0;
        } else {
            self.left_shift -= d;
            self.right_shift += d;
            self.anchor -= d;
        }
        while let Some(&(p, _)) = self.left.front() {
            if p + self.left_shift <= -1.0 {
                self.left.pop_front();
            } else {
                break;
            }
        }
        while let Some(&(p, _)) = self.right.back() {
            if p + self.right_shift >= 1.0 {
                self.right.pop_back();
            } else {
                break;
            }
        }
        if self.anchor < -1.0 {
            self.anchor = -1.0;
        }
    }

    fn max_value(&self) -> f64 {
        if self.mid > 0.0 {
            self.value + self.mid * (1.0 - self.anchor)
        } else {
            self.value
        }
    }
}

fn bl_chain(diff: &[(f64, f64)]) -> f64 {
    let Some(&(_, s0)) = diff.first() else { return 0.0 };
    let mut chain = ConcaveChain::new();
    chain.add_linear(s0);
    for w in diff.windows(2) {
        chain.dilate(w[1].0 - w[0].0);
        chain.add_linear(w[1].1);
    }
    chain.max_value().max(0.0)
}

fn bl_plane(a: &[((f64, f64), f64)], b: &[((f64, f64), f64)]) -> f64 {
    let all = a.iter().chain(b);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &((x, y), _) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return 0.0;
    }
    let grid = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (PLANE_GRID - 1) as f64;
    let eval = |g: &dyn Fn(f64, f64) -> f64| -> f64 {
        let ia: f64 = a.iter().map(|&((x, y), m)| g(x, y) * m).sum();
        let ib: f64 = b.iter().map(|&((x, y), m)| g(x, y) * m).sum();
        (ia - ib).abs()
    };
    let mut best: f64 = 0.0;
    for i in 0..PLANE_GRID {
        let cx = grid(x0, x1, i);
        let cy = grid(y0, y1, i);
        best = best.max(eval(&|x, _| (x - cx).clamp(-1.0, 1.0)));
        best = best.max(eval(&|_, y| (y - cy).clamp(-1.0, 1.0)));
        for j in 0..PLANE_GRID {
            let cy = grid(y0, y1, j);
            best = best.max(eval(&|x, y| (1.0 - (x - cx).hypot(y - cy)).clamp(-1.0, 1.0)));
        }
    }
    best
}

/// Left-continuous generalized inverse of the CDF.
pub fn quantile(nu: &EmpiricalDistribution, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("rank {r} outside (0, 1)")));
    }
    let pts = nu.line()?;
    let mut cdf = 0.0;
    for &(v, m) in pts {
        cdf += m;
        if cdf >= r - MEASURE_TOL {
            return Ok(v);
        }
    }
    pts.last().map(|p| p.0).ok_or_else(|| Error::InvalidArgument("empty distribution".into()))
}

/// A target law for sculpting: finitely supported or uniform on an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetLaw {
    Discrete { values: Vec<f64>, masses: Vec<f64> },
    Uniform { low: f64, high: f64 },
}

impl TargetLaw {
    pub fn rademacher() -> Self {
        TargetLaw::Discrete { values: vec![-1.0, 1.0], masses: vec![0.5, 0.5] }
    }

    pub fn point_mass(c: f64) -> Self {
        TargetLaw::Discrete { values: vec![c], masses: vec![1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TargetLaw::Discrete { values, masses } => {
                if values.len() != masses.len() || values.is_empty() {
                    return Err(Error::InvalidArgument("target values and masses must match".into()));
                }
                self.as_discrete().map(|_| ())
            }
            TargetLaw::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::InvalidArgument("uniform target needs low < high".into()));
                }
                Ok(())
            }
        }
    }

    fn as_discrete(&self) -> Result<EmpiricalDistribution> {
        match self {
            TargetLaw::Discrete { values, masses } => {
                EmpiricalDistribution::from_points(values.iter().copied().zip(masses.iter().copied()).collect())
            }
            TargetLaw::Uniform { .. } => Err(Error::InvalidArgument("not discrete".into())),
        }
    }

    pub fn quantile(&self, r: f64) -> Result<f64> {
        match self {
            TargetLaw::Discrete { .. } => quantile(&self.as_discrete()?, r),
            TargetLaw::Uniform { low, high } => {
                if !(r > 0.0 && r < 1.0) {
                    return Err(Error::InvalidArgument(format!("rank {r} outside (0, 1)")));
                }
                Ok(low + (high - low) * r)
            }
        }
    }

    pub fn abs_moment(&self) -> Result<f64> {
        match self {
            TargetLaw::Discrete { .. } => self.as_discrete()?.abs_moment(),
            TargetLaw::Uniform { low, high } => {
                let (a, b) = (*low, *high);
                // int_a^b |t| dt / (b - a)
                let prim = |t: f64| t * t.abs() / 2.0;
                Ok((prim(b) - prim(a)) / (b - a))
            }
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self, TargetLaw::Discrete { values, .. } if values.len() == 1)
    }

    /// Push-forward under `t -> c t`, `c > 0`.
    pub fn scaled(&self, c: f64) -> TargetLaw {
        match self {
            TargetLaw::Discrete { values, masses } => {
                TargetLaw::Discrete { values: values.iter().map(|v| v * c).collect(), masses: masses.clone() }
            }
            TargetLaw::Uniform { low, high } => TargetLaw::Uniform { low: low * c, high: high * c },
        }
    }

    /// Rescaled to unit first absolute moment (the scale of `P f / ||P f||_1`).
    pub fn unit_scale(&self) -> Result<TargetLaw> {
        let m = self.abs_moment()?;
        if m <= 0.0 {
            return Err(Error::InvalidArgument("target has zero first absolute moment".into()));
        }
        Ok(self.scaled(1.0 / m))
    }

    /// Exact W1 distance from a finitely supported law on the line.
    pub fn w1_from(&self, dist: &EmpiricalDistribution) -> Result<f64> {
        match self {
            TargetLaw::Discrete { .. } => w1_distance(dist, &self.as_discrete()?),
            TargetLaw::Uniform { low, high } => Ok(w1_uniform(dist.line()?, *low, *high)),
        }
    }

    /// Bounded-Lipschitz distance from a finitely supported law; uniform
    /// targets are replaced by a `2^16`-point midpoint grid (error `<= (b-a)/2^18`).
    pub fn bl_from(&self, dist: &EmpiricalDistribution) -> Result<f64> {
        match self {
            TargetLaw::Discrete { .. } => bl_distance(dist, &self.as_discrete()?),
            TargetLaw::Uniform { low, high } => {
                bl_distance(dist, &EmpiricalDistribution::uniform_grid(*low, *high, 1 << 16))
            }
        }
    }
}

/// `int |F(x) - G(x)| dx` with `G` the CDF of Uniform[a, b].
fn w1_uniform(pts: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let g = |x: f64| ((x - a) / (b - a)).clamp(0.0, 1.0);
    // |c - G| integrated over [x, y] where G is linear (or constant) there
    let piece = |c: f64, x: f64, y: f64| -> f64 {
        if y <= x {
            return 0.0;
        }
        let (gx, gy) = (g(x) - c, g(y) - c);
        if gx * gy >= 0.0 {
            (gx.abs() + gy.abs()) / 2.0 * (y - x)
        } else {
            // sign change inside: split at the root
            let t = x + (y - x) * gx.abs() / (gx.abs() + gy.abs());
            gx.abs() / 2.0 * (t - x) + gy.abs() / 2.0 * (y - t)
        }
    };
    let mut cuts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    let mut cdf = 0.0;
    let mut k = 0;
    for w in cuts.windows(2) {
        while k < pts.len() && pts[k].0 <= w[0] {
            cdf += pts[k].1;
            k += 1;
        }
        // split at a and b so G is affine on each piece
        let mut knots = vec![w[0], w[1]];
        for e in [a, b] {
            if e > w[0] && e < w[1] {
                knots.insert(1, e);
            }
        }
        knots.sort_by(f64::total_cmp);
        for kk in knots.windows(2) {
            total += piece(cdf, kk[0], kk[1]);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(p: &[(f64, f64)]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_points(p.to_vec()).unwrap()
    }

    /// Grid dynamic program for the bounded-Lipschitz LP: `g` restricted to
    /// multiples of `1/k`. Independent of the breakpoint solver above.
    fn bl_grid_oracle(a: &EmpiricalDistribution, b: &EmpiricalDistribution, k: i64) -> f64 {
        let diff = signed_difference(a.line().unwrap(), b.line().unwrap());
        let levels: Vec<f64> = (-k..=k).map(|i| i as f64 / k as f64).collect();
        let mut best: Vec<f64> = levels.iter().map(|g| g * diff[0].1).collect();
        for w in diff.windows(2) {
            let d = w[1].0 - w[0].0;
            let reach = (d * k as f64 + 1e-9).floor() as i64;
            let next: Vec<f64> = (0..levels.len() as i64)
                .map(|i| {
                    let lo = (i - reach).max(0);
                    let hi = (i + reach).min(levels.len() as i64 - 1);
                    let m = (lo..=hi).map(|j| best[j as usize]).fold(f64::NEG_INFINITY, f64::max);
                    m + levels[i as usize] * w[1].1
                })
                .collect();
            best = next;
        }
        best.into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn law_groups_values() {
        let s = FiniteSystem::cycle(4).unwrap();
        let f = Observable::new(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        assert_eq!(law(&s, &f).unwrap(), EmpiricalDistribution::Line(vec![(-1.0, 0.5), (1.0, 0.5)]));
        let c = Observable::constant(4, 2.5);
        assert_eq!(law(&s, &c).unwrap(), EmpiricalDistribution::point_mass(2.5));
    }

    #[test]
    fn joint_of_two_rademachers() {
        let s = FiniteSystem::cycle(4).unwrap();
        let f = Observable::new(vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let g = Observable::new(vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let joint = joint_law(&s, &f, &g).unwrap();
        let prod = product(&law(&s, &f).unwrap(), &law(&s, &g).unwrap()).unwrap();
        assert_eq!(joint.len(), 4);
        assert!(bl_distance(&joint, &prod).unwrap() < 1e-15);
        let diag = joint_law(&s, &f, &f).unwrap();
        assert!(diag.plane().unwrap().iter().all(|((x, y), _)| x == y));
        let (mx, my) = marginals(&joint).unwrap();
        assert_eq!(mx, law(&s, &f).unwrap());
        assert_eq!(my, law(&s, &g).unwrap());
    }

    #[test]
    fn w1_examples() {
        let a = EmpiricalDistribution::point_mass(0.0);
        let b = EmpiricalDistribution::point_mass(1.0);
        assert_eq!(w1_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(w1_distance(&a, &b).unwrap(), 1.0);
        let c = line(&[(0.0, 0.5), (2.0, 0.5)]);
        assert!((w1_distance(&c, &b).unwrap() - 1.0).abs() < 1e-15);
        let plane = joint_law(&FiniteSystem::cycle(1).unwrap(), &Observable::zeros(1), &Observable::zeros(1)).unwrap();
        assert!(w1_distance(&a, &plane).is_err());
    }

    #[test]
    fn bl_examples() {
        let a = EmpiricalDistribution::point_mass(0.0);
        let b = EmpiricalDistribution::point_mass(1.0);
        assert_eq!(bl_distance(&a, &a).unwrap(), 0.0);
        assert!((bl_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        // far apart point masses saturate at 2
        assert!((bl_distance(&a, &EmpiricalDistribution::point_mass(7.0)).unwrap() - 2.0).abs() < 1e-15);
        let c = EmpiricalDistribution::point_mass(0.3);
        assert!((bl_distance(&a, &c).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bl_matches_grid_oracle() {
        let cases = [
            (vec![(0.0, 0.5), (2.0, 0.5)], vec![(1.0, 1.0)]),
            (vec![(-3.0, 0.25), (0.0, 0.25), (0.5, 0.5)], vec![(-1.0, 0.5), (4.0, 0.5)]),
            (vec![(0.0, 0.1), (0.25, 0.6), (0.5, 0.3)], vec![(0.125, 0.7), (0.375, 0.3)]),
            (vec![(-1.0, 0.5), (1.0, 0.5)], vec![(-0.5, 0.5), (0.5, 0.5)]),
        ];
        for (p, q) in cases {
            let (a, b) = (line(&p), line(&q));
            let exact = bl_distance(&a, &b).unwrap();
            let oracle = bl_grid_oracle(&a, &b, 800);
            assert!((exact - oracle).abs() < 2e-3, "{exact} vs {oracle}");
            assert!(exact <= w1_distance(&a, &b).unwrap() + 1e-12);
        }
    }

    #[test]
    fn quantile_examples() {
        let rad = line(&[(-1.0, 0.5), (1.0, 0.5)]);
        assert_eq!(quantile(&rad, 0.25).unwrap(), -1.0);
        assert_eq!(quantile(&rad, 0.5).unwrap(), -1.0);
        assert_eq!(quantile(&rad, 0.75).unwrap(), 1.0);
        assert_eq!(quantile(&EmpiricalDistribution::point_mass(3.0), 0.9).unwrap(), 3.0);
        let u = EmpiricalDistribution::uniform_grid(0.0, 1.0, 100);
        assert!((quantile(&u, 0.5).unwrap() - 0.5).abs() < 0.01);
        assert!(quantile(&u, 0.0).is_err());
        assert!(quantile(&u, 1.0).is_err());
    }

    #[test]
    fn w1_to_uniform_target() {
        let t = TargetLaw::Uniform { low: 0.0, high: 1.0 };
        // midpoint grid with n atoms: W1 = 1/(4n)
        for n in [1, 2, 10, 37] {
            let d = EmpiricalDistribution::uniform_grid(0.0, 1.0, n);
            assert!((t.w1_from(&d).unwrap() - 0.25 / n as f64).abs() < 1e-12);
        }
        // point mass far away: W1 = |c - 1/2|
        assert!((t.w1_from(&EmpiricalDistribution::point_mass(3.0)).unwrap() - 2.5).abs() < 1e-12);
        assert!((t.abs_moment().unwrap() - 0.5).abs() < 1e-15);
        let sym = TargetLaw::Uniform { low: -1.0, high: 1.0 };
        assert!((sym.abs_moment().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let d = line(&[(0.0, 0.5), (1.0, 0.5)]);
        let csv = d.to_csv();
        assert!(csv.starts_with("value,mass\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
