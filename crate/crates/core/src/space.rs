//! Finite probability spaces carrying a measure-preserving action of `Z^d`.
//!
//! Two backends sit behind [`FiniteSystem`]:
//!
//! * a box torus `Z_{M_1} x ... x Z_{M_d}` whose generators are the unit
//!   translations (atoms indexed row-major, last axis fastest), and
//! * an explicit permutation for `d = 1`.
//!
//! Sets of atoms are [`AtomSet`]s (sorted, duplicate-free, with a cached
//! measure) and real functions on atoms are [`Observable`]s.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for every equality-of-reals check on measures.
pub const MEASURE_TOL: f64 = 1e-12;

/// Above this many atoms the commutativity audit samples instead of scanning.
const EXHAUSTIVE_AUDIT_LIMIT: usize = 10_000;
const AUDIT_SAMPLES: usize = 10_000;

/// An element `z` of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupElement(pub Vec<i64>);

impl GroupElement {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        GroupElement(coords.into())
    }

    pub fn zero(dim: usize) -> Self {
        GroupElement(vec![0; dim])
    }

    /// Unit vector along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut z = vec![0; dim];
        z[axis] = 1;
        GroupElement(z)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn neg(&self) -> Self {
        GroupElement(self.0.iter().map(|c| -c).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        GroupElement(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Structured description of a system, as read from experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// `"cycle"`, `"permutation"` or `"torus"`.
    pub backend: String,
    /// Box periods `[M_1, ..., M_d]`. For `"permutation"` a single entry
    /// equal to the permutation length, or empty.
    #[serde(default)]
    pub dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl SystemSpec {
    pub fn cycle(m: usize) -> Self {
        SystemSpec { backend: "cycle".into(), dims: vec![m], permutation: None, weights: None }
    }

    pub fn torus(dims: &[usize]) -> Self {
        SystemSpec { backend: "torus".into(), dims: dims.to_vec(), permutation: None, weights: None }
    }

    pub fn build(&self) -> Result<FiniteSystem> {
        let sys = match self.backend.as_str() {
            "cycle" => {
                if self.dims.len() != 1 {
                    return Err(Error::InvalidSystem("cycle backend takes exactly one period".into()));
                }
                FiniteSystem::torus(&self.dims)?
            }
            "torus" => FiniteSystem::torus(&self.dims)?,
            "permutation" => {
                let perm = self
                    .permutation
                    .clone()
                    .ok_or_else(|| Error::InvalidSystem("permutation backend needs `permutation`".into()))?;
                if !self.dims.is_empty() && self.dims != [perm.len()] {
                    return Err(Error::InvalidSystem("dims disagree with permutation length".into()));
                }
                FiniteSystem::permutation(perm)?
            }
            other => return Err(Error::InvalidSystem(format!("unknown backend `{other}`"))),
        };
        match &self.weights {
            Some(w) => sys.with_weights(w.clone()),
            None => Ok(sys),
        }
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Torus { dims: Vec<usize>, strides: Vec<usize> },
    Permutation { perm: Vec<usize>, cycles: Vec<Vec<usize>>, place: Vec<(u32, u32)> },
}

/// Result of the orbit flood-fill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErgodicityReport {
    pub orbits: usize,
    pub transitive: bool,
    pub orbit_sizes: Vec<usize>,
}

/// A finite probability space with `d` commuting measure-preserving bijections.
///
/// Immutable after construction; share it freely across threads.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    dim: usize,
    weights: Vec<f64>,
    uniform: bool,
    backend: Backend,
    ergodicity: ErgodicityReport,
}

impl FiniteSystem {
    /// Single cycle `Z_m` (translation by one).
    pub fn cycle(m: usize) -> Result<Self> {
        Self::torus(&[m])
    }

    /// Box torus with unit-translation generators.
    pub fn torus(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidSystem("torus needs at least one axis".into()));
        }
        if dims.iter().any(|&m| m == 0) {
            return Err(Error::InvalidSystem("torus periods must be positive".into()));
        }
        let atoms = dims
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidSystem("torus too large".into()))?;
        let mut strides = vec![1usize; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let backend = Backend::Torus { dims: dims.to_vec(), strides };
        Self::finish(dims.len(), atoms, backend)
    }

    /// `d = 1` system generated by an explicit permutation (`perm[x] = T x`).
    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let m = perm.len();
        if m == 0 {
            return Err(Error::InvalidSystem("empty permutation".into()));
        }
        let mut seen = vec![false; m];
        for &p in &perm {
            if p >= m || seen[p] {
                return Err(Error::InvalidSystem("generator is not a bijection".into()));
            }
            seen[p] = true;
        }
        let mut place = vec![(u32::MAX, 0u32); m];
        let mut cycles = Vec::new();
        for start in 0..m {
            if place[start].0 != u32::MAX {
                continue;
            }
            let id = cycles.len() as u32;
            let mut cyc = Vec::new();
            let mut x = start;
            loop {
                place[x] = (id, cyc.len() as u32);
                cyc.push(x);
                x = perm[x];
                if x == start {
                    break;
                }
            }
            cycles.push(cyc);
        }
        let backend = Backend::Permutation { perm, cycles, place };
        Self::finish(1, m, backend)
    }

    fn finish(dim: usize, atoms: usize, backend: Backend) -> Result<Self> {
        let mut sys = FiniteSystem {
            dim,
            weights: vec![1.0 / atoms as f64; atoms],
            uniform: true,
            backend,
            ergodicity: ErgodicityReport { orbits: 0, transitive: false, orbit_sizes: vec![] },
        };
        sys.audit_commutativity()?;
        sys.ergodicity = sys.flood_fill();
        Ok(sys)
    }

    /// Replace the uniform measure; every generator must preserve `weights`.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.atoms() {
            return Err(Error::InvalidSystem(format!(
                "{} weights for {} atoms",
                weights.len(),
                self.atoms()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidSystem("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::InvalidSystem(format!("weights sum to {total}, not 1")));
        }
        for axis in 0..self.dim {
            for x in 0..self.atoms() {
                let y = self.step(axis, x);
                if (weights[y] - weights[x]).abs() > MEASURE_TOL {
                    return Err(Error::InvalidSystem(format!(
                        "generator {axis} does not preserve the weight of atom {x}"
                    )));
                }
            }
        }
        self.uniform = false;
        self.weights = weights;
        Ok(self)
    }

    fn audit_commutativity(&self) -> Result<()> {
        if self.dim < 2 {
            return Ok(());
        }
        let m = self.atoms();
        let check = |x: usize| -> Result<()> {
            for i in 0..self.dim {
                for j in (i + 1)..self.dim {
                    if self.step(i, self.step(j, x)) != self.step(j, self.step(i, x)) {
                        return Err(Error::InvalidSystem(format!(
                            "generators {i} and {j} do not commute at atom {x}"
                        )));
                    }
                }
            }
            Ok(())
        };
        if m <= EXHAUSTIVE_AUDIT_LIMIT {
            (0..m).try_for_each(check)
        } else {
            // deterministic stride sample
            let stride = m / AUDIT_SAMPLES;
            (0..AUDIT_SAMPLES).try_for_each(|k| check((k * stride + k) % m))
        }
    }

    fn flood_fill(&self) -> ErgodicityReport {
        let m = self.atoms();
        let mut seen = vec![false; m];
        let mut sizes = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..m {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut size = 0;
            while let Some(x) = queue.pop_front() {
                size += 1;
                for axis in 0..self.dim {
                    for y in [self.step(axis, x), self.step_back(axis, x)] {
                        if !seen[y] {
                            seen[y] = true;
                            queue.push_back(y);
                        }
                    }
                }
            }
            sizes.push(size);
        }
        ErgodicityReport { orbits: sizes.len(), transitive: sizes.len() == 1, orbit_sizes: sizes }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.backend, Backend::Torus { .. })
    }

    pub fn is_ergodic(&self) -> bool {
        self.ergodicity.transitive
    }

    pub fn orbit_partition_check(&self) -> &ErgodicityReport {
        &self.ergodicity
    }

    /// Torus periods, or the cycle lengths of a permutation.
    ///
    /// Finite models are never free: `T^z x = x` whenever `z` lies in the
    /// period lattice `M_1 Z x ... x M_d Z` (torus).
    pub fn periods(&self) -> Vec<usize> {
        match &self.backend {
            Backend::Torus { dims, .. } => dims.clone(),
            Backend::Permutation { cycles, .. } => cycles.iter().map(Vec::len).collect(),
        }
    }

    /// Box shape of the torus; for an ergodic permutation, `[M]`.
    pub fn box_dims(&self) -> Option<Vec<usize>> {
        match &self.backend {
            Backend::Torus { dims, .. } => Some(dims.clone()),
            Backend::Permutation { cycles, .. } if cycles.len() == 1 => Some(vec![cycles[0].len()]),
            Backend::Permutation { .. } => None,
        }
    }

    /// Atoms listed by frame index, row-major over [`box_dims`](Self::box_dims).
    pub fn frame(&self) -> Option<Vec<usize>> {
        match &self.backend {
            Backend::Torus { .. } => Some((0..self.atoms()).collect()),
            Backend::Permutation { cycles, .. } if cycles.len() == 1 => Some(cycles[0].clone()),
            Backend::Permutation { .. } => None,
        }
    }

    /// Coordinates of atom `x` in the cyclic frame of [`box_dims`](Self::box_dims).
    ///
    /// For the permutation backend this is the position along the (single) cycle.
    pub fn coords_of(&self, x: usize) -> Vec<usize> {
        match &self.backend {
            Backend::Torus { dims, strides } => {
                dims.iter().zip(strides).map(|(&m, &s)| (x / s) % m).collect()
            }
            Backend::Permutation { place, .. } => vec![place[x].1 as usize],
        }
    }

    /// Inverse of [`coords_of`](Self::coords_of) (single-cycle permutations only).
    pub fn atom_at(&self, coords: &[usize]) -> usize {
        match &self.backend {
            Backend::Torus { dims, strides } => coords
                .iter()
                .zip(dims.iter().zip(strides))
                .map(|(&c, (&m, &s))| (c % m) * s)
                .sum(),
            Backend::Permutation { cycles, .. } => {
                let cyc = &cycles[0];
                cyc[coords[0] % cyc.len()]
            }
        }
    }

    /// One step of generator `axis`.
    pub fn step(&self, axis: usize, x: usize) -> usize {
        match &self.backend {
            Backend::Torus { dims, strides } => {
                let (m, s) = (dims[axis], strides[axis]);
                if (x / s) % m == m - 1 {
                    x + s - m * s
                } else {
                    x + s
                }
            }
            Backend::Permutation { perm, .. } => perm[x],
        }
    }

    fn step_back(&self, axis: usize, x: usize) -> usize {
        match &self.backend {
            Backend::Torus { dims, strides } => {
                let (m, s) = (dims[axis], strides[axis]);
                if (x / s) % m == 0 {
                    x + m * s - s
                } else {
                    x - s
                }
            }
            Backend::Permutation { cycles, place, .. } => {
                let (c, p) = place[x];
                let cyc = &cycles[c as usize];
                cyc[(p as usize + cyc.len() - 1) % cyc.len()]
            }
        }
    }

    pub fn check_element(&self, z: &GroupElement) -> Result<()> {
        if z.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.dim() });
        }
        Ok(())
    }

    fn check_atom(&self, x: usize) -> Result<()> {
        if x >= self.atoms() {
            return Err(Error::AtomOutOfRange { index: x, atoms: self.atoms() });
        }
        Ok(())
    }

    /// `T^z x`.
    pub fn apply(&self, z: &GroupElement, x: usize) -> Result<usize> {
        self.check_element(z)?;
        self.check_atom(x)?;
        Ok(self.apply_unchecked(z.coords(), x))
    }

    /// `T^z x` without validation; `z.len()` must equal `dim`.
    #[inline]
    pub fn apply_unchecked(&self, z: &[i64], x: usize) -> usize {
        match &self.backend {
            Backend::Torus { dims, strides } => {
                let mut idx = x;
                for ((&zi, &m), &s) in z.iter().zip(dims).zip(strides) {
                    if zi == 0 {
                        continue;
                    }
                    let c = (x / s) % m;
                    let nc = (c as i64 + zi).rem_euclid(m as i64) as usize;
                    idx = idx + nc * s - c * s;
                }
                idx
            }
            Backend::Permutation { cycles, place, .. } => {
                let (c, p) = place[x];
                let cyc = &cycles[c as usize];
                let len = cyc.len() as i64;
                cyc[(p as i64 + z[0]).rem_euclid(len) as usize]
            }
        }
    }

    /// Function `x -> T^z x` over all atoms.
    pub fn shift_table(&self, z: &GroupElement) -> Result<Vec<usize>> {
        self.check_element(z)?;
        Ok((0..self.atoms()).map(|x| self.apply_unchecked(z.coords(), x)).collect())
    }

    // ---- sets -------------------------------------------------------------

    pub fn empty_set(&self) -> AtomSet {
        AtomSet { members: Vec::new(), universe: self.atoms(), measure: 0.0 }
    }

    pub fn full_set(&self) -> AtomSet {
        self.set_from_sorted((0..self.atoms()).collect())
    }

    /// Build a set from arbitrary indices (sorted and deduplicated here).
    pub fn set(&self, mut members: Vec<usize>) -> Result<AtomSet> {
        members.sort_unstable();
        members.dedup();
        if let Some(&last) = members.last() {
            self.check_atom(last)?;
        }
        Ok(self.set_from_sorted(members))
    }

    /// Set of atoms flagged in `mask`.
    pub fn set_from_mask(&self, mask: &[bool]) -> AtomSet {
        debug_assert_eq!(mask.len(), self.atoms());
        self.set_from_sorted(mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
    }

    pub(crate) fn set_from_sorted(&self, members: Vec<usize>) -> AtomSet {
        let measure = self.sum_weights(&members);
        AtomSet { members, universe: self.atoms(), measure }
    }

    fn sum_weights(&self, members: &[usize]) -> f64 {
        if self.uniform {
            members.len() as f64 / self.atoms() as f64
        } else {
            members.iter().map(|&x| self.weights[x]).sum()
        }
    }

    fn check_set(&self, s: &AtomSet) -> Result<()> {
        if s.universe != self.atoms() {
            return Err(Error::SystemMismatch);
        }
        Ok(())
    }

    /// Recomputed measure of `s`.
    pub fn measure(&self, s: &AtomSet) -> Result<f64> {
        self.check_set(s)?;
        Ok(self.sum_weights(&s.members))
    }

    pub fn mask(&self, s: &AtomSet) -> Vec<bool> {
        let mut mask = vec![false; self.atoms()];
        for &x in &s.members {
            mask[x] = true;
        }
        mask
    }

    /// Image `T^z S`.
    pub fn translate_set(&self, z: &GroupElement, s: &AtomSet) -> Result<AtomSet> {
        self.check_element(z)?;
        self.check_set(s)?;
        let mut out: Vec<usize> = s.members.iter().map(|&x| self.apply_unchecked(z.coords(), x)).collect();
        out.sort_unstable();
        Ok(self.set_from_sorted(out))
    }

    pub fn union(&self, a: &AtomSet, b: &AtomSet) -> Result<AtomSet> {
        self.merge(a, b, |ina, inb| ina || inb)
    }

    pub fn intersection(&self, a: &AtomSet, b: &AtomSet) -> Result<AtomSet> {
        self.merge(a, b, |ina, inb| ina && inb)
    }

    pub fn difference(&self, a: &AtomSet, b: &AtomSet) -> Result<AtomSet> {
        self.merge(a, b, |ina, inb| ina && !inb)
    }

    pub fn symmetric_difference(&self, a: &AtomSet, b: &AtomSet) -> Result<AtomSet> {
        self.merge(a, b, |ina, inb| ina != inb)
    }

    pub fn complement(&self, a: &AtomSet) -> Result<AtomSet> {
        self.difference(&self.full_set(), a)
    }

    fn merge(&self, a: &AtomSet, b: &AtomSet, keep: impl Fn(bool, bool) -> bool) -> Result<AtomSet> {
        self.check_set(a)?;
        self.check_set(b)?;
        let (xs, ys) = (&a.members, &b.members);
        let mut out = Vec::with_capacity(xs.len().max(ys.len()));
        let (mut i, mut j) = (0, 0);
        while i < xs.len() || j < ys.len() {
            let (v, ina, inb) = match (xs.get(i), ys.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    (x, true, true)
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    (x, true, false)
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    (y, false, true)
                }
                (Some(&x), None) => {
                    i += 1;
                    (x, true, false)
                }
                (None, Some(&y)) => {
                    j += 1;
                    (y, false, true)
                }
                (None, None) => unreachable!(),
            };
            if keep(ina, inb) {
                out.push(v);
            }
        }
        Ok(self.set_from_sorted(out))
    }

    // ---- functions --------------------------------------------------------

    pub fn check_observable(&self, f: &Observable) -> Result<()> {
        if f.len() != self.atoms() {
            return Err(Error::SystemMismatch);
        }
        Ok(())
    }

    /// `sum_{x in S} f(x) weight(x)`.
    pub fn integrate(&self, f: &Observable, s: &AtomSet) -> Result<f64> {
        self.check_observable(f)?;
        self.check_set(s)?;
        Ok(s.members.iter().map(|&x| f.0[x] * self.weights[x]).sum())
    }

    /// `int_X f dmu`.
    pub fn mean(&self, f: &Observable) -> f64 {
        f.0.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// `<f, h> = int f h dmu`.
    pub fn inner(&self, f: &Observable, h: &Observable) -> f64 {
        f.0.iter().zip(&h.0).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    /// `x -> f(T^z x)`.
    pub fn compose_shift(&self, f: &Observable, z: &GroupElement) -> Result<Observable> {
        self.check_element(z)?;
        self.check_observable(f)?;
        Ok(Observable((0..self.atoms()).map(|x| f.0[self.apply_unchecked(z.coords(), x)]).collect()))
    }
}

/// A set of atoms with its cached measure.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSet {
    members: Vec<usize>,
    universe: usize,
    measure: f64,
}

impl AtomSet {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn into_members(self) -> Vec<usize> {
        self.members
    }
}

/// A real function on atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable(Vec<f64>);

impl Observable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Observable(values))
    }

    pub fn constant(atoms: usize, c: f64) -> Self {
        Observable(vec![c; atoms])
    }

    pub fn zeros(atoms: usize) -> Self {
        Self::constant(atoms, 0.0)
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Observable(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, x: usize) -> f64 {
        self.0[x]
    }

    pub fn scale(&self, c: f64) -> Observable {
        Observable(self.0.iter().map(|v| v * c).collect())
    }

    pub fn add(&self, other: &Observable) -> Observable {
        Observable(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Observable) -> Observable {
        Observable(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn sub_constant(&self, c: f64) -> Observable {
        Observable(self.0.iter().map(|v| v - c).collect())
    }
}
