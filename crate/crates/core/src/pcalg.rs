//! Gaussian conditional-independence testing and the two-phase PC-algorithm.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{meek_orient, Cpdag, PartiallyDirectedGraph, VStructure};
use crate::linalg::{cov_to_corr, submatrix};

/// Partial correlations are clamped to `[-1 + EPS, 1 - EPS]` before the z-transform.
pub const RHO_CLAMP_EPS: f64 = 1e-12;

/// Conditional variances (on the correlation scale) below this are treated as singular.
const SINGULAR_PIVOT: f64 = 1e-12;

/// Separation sets recorded by the skeleton phase. Symmetric by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SepSets {
    p: usize,
    sets: Vec<Option<Vec<usize>>>,
}

impl SepSets {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            sets: vec![None; p * p],
        }
    }

    /// Saves `k` in `S(i, j)` and `S(j, i)`.
    pub fn record(&mut self, i: usize, j: usize, k: &[usize]) {
        debug_assert!(!k.contains(&i) && !k.contains(&j));
        self.sets[i * self.p + j] = Some(k.to_vec());
        self.sets[j * self.p + i] = Some(k.to_vec());
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.sets[i * self.p + j].as_deref()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Recorded `(i, j, S(i, j))` with `i < j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[usize])> + '_ {
        (0..self.p).flat_map(move |i| {
            ((i + 1)..self.p).filter_map(move |j| self.get(i, j).map(|s| (i, j, s)))
        })
    }
}

/// A conditional-independence oracle over nodes `0..p`.
pub trait CiTest {
    fn p(&self) -> usize;

    /// `Ok(true)` when independence of `i` and `j` given `k` is retained.
    fn independent(&self, i: usize, j: usize, k: &[usize]) -> Result<bool>;
}

/// Sample correlations, sample size and level for the Fisher-z test.
#[derive(Debug, Clone)]
pub struct CiTestContext {
    corr: DMatrix<f64>,
    n: usize,
    alpha: f64,
    threshold: f64,
}

impl CiTestContext {
    pub fn new(corr: DMatrix<f64>, n: usize, alpha: f64) -> Result<Self> {
        if !corr.is_square() {
            return Err(Error::InvalidArgument(
                "correlation matrix must be square".into(),
            ));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("sample size {n} < 2")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} not in (0, 1)"
            )));
        }
        let p = corr.nrows();
        for i in 0..p {
            if (corr[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(
                    "correlation diagonal must be 1".into(),
                ));
            }
            for j in 0..p {
                let v = corr[(i, j)];
                if !(-1.0..=1.0).contains(&v) || (v - corr[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(
                        "correlation matrix must be symmetric with entries in [-1, 1]".into(),
                    ));
                }
            }
        }
        let threshold = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
        Ok(Self {
            corr,
            n,
            alpha,
            threshold,
        })
    }

    /// Context from any covariance estimate (sample, robust, ...).
    pub fn from_covariance(cov: &DMatrix<f64>, n: usize, alpha: f64) -> Result<Self> {
        Self::new(cov_to_corr(cov)?, n, alpha)
    }

    pub fn from_data(data: &Dataset, alpha: f64) -> Result<Self> {
        Self::from_covariance(&crate::dagcov::sample_covariance(data), data.n(), alpha)
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `Φ⁻¹(1 - α/2)`.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl CiTest for CiTestContext {
    fn p(&self) -> usize {
        self.corr.nrows()
    }

    fn independent(&self, i: usize, j: usize, k: &[usize]) -> Result<bool> {
        gauss_ci_test(self, i, j, k)
    }
}

/// Exact-correlation oracle: independence iff `|ρ_{ij|K}| <= tol`.
#[derive(Debug, Clone)]
pub struct PopulationCiTest {
    pub corr: DMatrix<f64>,
    pub tol: f64,
}

impl CiTest for PopulationCiTest {
    fn p(&self) -> usize {
        self.corr.nrows()
    }

    fn independent(&self, i: usize, j: usize, k: &[usize]) -> Result<bool> {
        Ok(partial_correlation(&self.corr, i, j, k)?.abs() <= self.tol)
    }
}

/// `ρ_{i,j|K}` from the `(|K|+2)`-square correlation submatrix.
pub fn partial_correlation(corr: &DMatrix<f64>, i: usize, j: usize, k: &[usize]) -> Result<f64> {
    let p = corr.nrows();
    if i == j || i >= p || j >= p || k.iter().any(|&x| x == i || x == j || x >= p) {
        return Err(Error::InvalidArgument(format!(
            "invalid partial correlation query ({i}, {j} | {k:?})"
        )));
    }
    let rho = if k.is_empty() {
        corr[(i, j)]
    } else {
        let mut idx = Vec::with_capacity(k.len() + 2);
        idx.push(i);
        idx.push(j);
        idx.extend_from_slice(k);
        let sub = submatrix(corr, &idx, &idx);
        let chol = sub.cholesky().ok_or(Error::SingularConditioning)?;
        let l = chol.l_dirty();
        if (0..idx.len()).any(|d| l[(d, d)] * l[(d, d)] < SINGULAR_PIVOT) {
            return Err(Error::SingularConditioning);
        }
        let prec = chol.inverse();
        let r = -prec[(0, 1)] / (prec[(0, 0)] * prec[(1, 1)]).sqrt();
        if !r.is_finite() {
            return Err(Error::SingularConditioning);
        }
        r
    };
    Ok(rho.clamp(-1.0 + RHO_CLAMP_EPS, 1.0 - RHO_CLAMP_EPS))
}

/// Fisher's z-transform `½ ln((1+ρ)/(1-ρ))`.
pub fn fisher_z(rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::FisherDomain(rho));
    }
    Ok(0.5 * ((1.0 + rho) / (1.0 - rho)).ln())
}

/// Retains independence iff `sqrt(n - |K| - 3) |Z| <= Φ⁻¹(1 - α/2)`.
/// With `n - |K| - 3 <= 0` the test cannot reject and independence is retained.
pub fn gauss_ci_test(ctx: &CiTestContext, i: usize, j: usize, k: &[usize]) -> Result<bool> {
    let dof = ctx.n as f64 - k.len() as f64 - 3.0;
    if dof <= 0.0 {
        return Ok(true);
    }
    let z = fisher_z(partial_correlation(&ctx.corr, i, j, k)?)?;
    Ok(dof.sqrt() * z.abs() <= ctx.threshold)
}

/// Output of the skeleton phase.
#[derive(Debug, Clone)]
pub struct SkeletonResult {
    pub skeleton: PartiallyDirectedGraph,
    pub sepsets: SepSets,
    pub n_tests: usize,
    /// Tests whose conditioning submatrix was singular (treated as independence).
    pub n_singular: usize,
    /// Largest conditioning-set size visited.
    pub max_level: usize,
}

/// Skeleton phase: starting from the complete graph, test ordered adjacent pairs
/// at increasing conditioning-set size `l`, deleting an edge at the first retained
/// independence. Pairs and subsets are enumerated lexicographically.
pub fn pc_skeleton<T: CiTest + ?Sized>(test: &T, max_order: Option<usize>) -> SkeletonResult {
    let p = test.p();
    let mut g = PartiallyDirectedGraph::complete(p);
    let mut sepsets = SepSets::new(p);
    let mut n_tests = 0;
    let mut n_singular = 0;
    let mut level = 0;
    loop {
        if max_order.is_some_and(|m| level > m) {
            level -= 1;
            break;
        }
        for i in 0..p {
            for j in 0..p {
                if i == j || !g.is_adjacent(i, j) {
                    continue;
                }
                let candidates: Vec<usize> =
                    g.adjacent(i).into_iter().filter(|&x| x != j).collect();
                if candidates.len() < level {
                    continue;
                }
                for k in Combinations::new(&candidates, level) {
                    n_tests += 1;
                    let independent = match test.independent(i, j, &k) {
                        Ok(v) => v,
                        Err(_) => {
                            n_singular += 1;
                            true
                        }
                    };
                    if independent {
                        g.remove_edge(i, j);
                        sepsets.record(i, j, &k);
                        break;
                    }
                }
            }
        }
        let more = (0..p).any(|i| {
            let deg = g.adjacent(i).len();
            deg > 0 && deg - 1 > level
        });
        if !more {
            break;
        }
        level += 1;
    }
    SkeletonResult {
        skeleton: g,
        sepsets,
        n_tests,
        n_singular,
        max_level: level,
    }
}

/// Which stage of the orientation fallback produced the CPDAG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientStage {
    Direct,
    ReversedOrder,
    DroppedConflicts,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct OrientResult {
    pub cpdag: Cpdag,
    /// Candidate v-structures discarded because an earlier one claimed an edge.
    pub conflicts: usize,
    pub stage: OrientStage,
}

impl OrientResult {
    pub fn is_valid(&self) -> bool {
        self.stage != OrientStage::Invalid
    }
}

fn candidate_v_structures(skel: &PartiallyDirectedGraph, sep: &SepSets) -> Vec<VStructure> {
    let p = skel.p();
    let mut out = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if skel.is_adjacent(a, b) {
                continue;
            }
            let s = sep.get(a, b).unwrap_or(&[]);
            for c in 0..p {
                if skel.is_adjacent(a, c) && skel.is_adjacent(b, c) && !s.contains(&c) {
                    out.push(VStructure { a, collider: c, b });
                }
            }
        }
    }
    out
}

/// Places v-structures in the given order, first one wins; returns the graph
/// and the discarded conflicting triples.
fn place_v_structures(
    skel: &PartiallyDirectedGraph,
    triples: impl Iterator<Item = VStructure>,
    skip: &BTreeSet<VStructure>,
) -> (PartiallyDirectedGraph, Vec<VStructure>) {
    let mut g = crate::graph::skeleton(skel);
    let mut conflicts = Vec::new();
    for v in triples {
        if skip.contains(&v) {
            continue;
        }
        if g.is_directed(v.collider, v.a) || g.is_directed(v.collider, v.b) {
            conflicts.push(v);
            continue;
        }
        g.set_directed(v.a, v.collider);
        g.set_directed(v.b, v.collider);
    }
    (meek_orient(&g), conflicts)
}

/// Orientation phase: v-structures from separation sets, then R1-R3.
///
/// If the result has no consistent extension, placement is retried in reverse
/// order, then with every conflicting v-structure dropped. If that still fails
/// the first attempt is returned flagged [`OrientStage::Invalid`].
pub fn pc_orient(skel: &PartiallyDirectedGraph, sep: &SepSets) -> OrientResult {
    let triples = candidate_v_structures(skel, sep);
    let none = BTreeSet::new();

    let (first, conflicts) = place_v_structures(skel, triples.iter().copied(), &none);
    let n_conflicts = conflicts.len();
    let first = Cpdag::from_graph(first);
    if first.is_extendable() {
        return OrientResult {
            cpdag: first,
            conflicts: n_conflicts,
            stage: OrientStage::Direct,
        };
    }

    let (rev, rev_conflicts) = place_v_structures(skel, triples.iter().rev().copied(), &none);
    let rev = Cpdag::from_graph(rev);
    if rev.is_extendable() {
        return OrientResult {
            cpdag: rev,
            conflicts: n_conflicts,
            stage: OrientStage::ReversedOrder,
        };
    }

    // Drop every triple that took part in a conflict, on either side.
    let mut skip: BTreeSet<VStructure> = conflicts.iter().chain(&rev_conflicts).copied().collect();
    for c in conflicts.iter().chain(&rev_conflicts) {
        for t in &triples {
            let shares = |x: usize, y: usize| {
                (t.collider == x && (t.a == y || t.b == y))
                    || (t.collider == y && (t.a == x || t.b == x))
            };
            if shares(c.a, c.collider) || shares(c.b, c.collider) {
                skip.insert(*t);
            }
        }
    }
    if !skip.is_empty() {
        let (dropped, _) = place_v_structures(skel, triples.iter().copied(), &skip);
        let dropped = Cpdag::from_graph(dropped);
        if dropped.is_extendable() {
            return OrientResult {
                cpdag: dropped,
                conflicts: n_conflicts,
                stage: OrientStage::DroppedConflicts,
            };
        }
    }

    OrientResult {
        cpdag: first,
        conflicts: n_conflicts,
        stage: OrientStage::Invalid,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PcDiagnostics {
    pub n_tests: usize,
    pub n_singular: usize,
    pub max_level: usize,
    pub conflicts: usize,
    pub stage: OrientStage,
}

#[derive(Debug, Clone)]
pub struct PcResult {
    pub cpdag: Cpdag,
    pub sepsets: SepSets,
    pub diagnostics: PcDiagnostics,
}

/// Skeleton plus orientation on a prepared test context.
pub fn pc_cpdag(ctx: &CiTestContext, max_order: Option<usize>) -> Result<PcResult> {
    if ctx.n() < 4 {
        return Err(Error::InvalidArgument(format!(
            "PC needs n >= 4, got {}",
            ctx.n()
        )));
    }
    Ok(pc_with_test(ctx, max_order))
}

/// PC with an arbitrary independence oracle.
pub fn pc_with_test<T: CiTest + ?Sized>(test: &T, max_order: Option<usize>) -> PcResult {
    let skel = pc_skeleton(test, max_order);
    let orient = pc_orient(&skel.skeleton, &skel.sepsets);
    PcResult {
        cpdag: orient.cpdag,
        sepsets: skel.sepsets,
        diagnostics: PcDiagnostics {
            n_tests: skel.n_tests,
            n_singular: skel.n_singular,
            max_level: skel.max_level,
            conflicts: orient.conflicts,
            stage: orient.stage,
        },
    }
}

/// Lexicographic `k`-subsets of a slice.
struct Combinations<'a> {
    items: &'a [usize],
    idx: Vec<usize>,
    done: bool,
}

impl<'a> Combinations<'a> {
    fn new(items: &'a [usize], k: usize) -> Self {
        Self {
            items,
            idx: (0..k).collect(),
            done: k > items.len(),
        }
    }
}

impl Iterator for Combinations<'_> {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.iter().map(|&x| self.items[x]).collect();
        let n = self.items.len();
        let k = self.idx.len();
        match (0..k).rev().find(|&x| self.idx[x] != x + n - k) {
            None => self.done = true,
            Some(x) => {
                self.idx[x] += 1;
                for y in (x + 1)..k {
                    self.idx[y] = self.idx[y - 1] + 1;
                }
            }
        }
        Some(out)
    }
}
