//! The alpha-LIS matrix `Q`, its structural checks and left-fixed vectors.

use crate::cascade::{certify, compensated_sum, CascadeReport, FiberEngine, SeriesConfig};
use crate::error::{Result, VlmcError};
use crate::prob::ProbabilisedTree;
use crate::suffix::{alpha_lis_set, AlphaLisSet};
use crate::word::Word;
use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BTreeMap, HashMap};

/// Ordering of the index of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexOrder {
    /// Length, then lexicographic.
    #[default]
    LengthLex,
    /// Length, then words starting with the largest letter first
    /// (`10^(q-1)10^(q+1)` before `0^q10^q1` on the arithmetic tree).
    LengthThenReverse,
}

/// Truncation parameters of [`build_q`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QParams {
    /// Maximal number of indices kept.
    pub trunc: usize,
    /// Fiber levels summed per row.
    pub levels: usize,
    /// Length up to which `S` is listed on infinite trees.
    pub depth: usize,
    pub order: IndexOrder,
    /// Tolerance of the cascade series certification.
    pub series_tol: f64,
}

impl Default for QParams {
    fn default() -> Self {
        QParams { trunc: 256, levels: 64, depth: 24, order: IndexOrder::LengthLex, series_tol: 1e-10 }
    }
}

/// Accuracy of the entries of one row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EntryStatus {
    Exact,
    /// Entries are partial sums; the omitted mass of the row is at most `tail_bound`.
    SeriesApprox { tail_bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truncation {
    pub n: usize,
    pub note: String,
}

pub const TRUNCATION_BANNER: &str = "truncated index, no recurrence claim";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMatrix {
    pub index: Vec<Word>,
    pub entries: Vec<Vec<f64>>,
    pub row_status: Vec<EntryStatus>,
    /// Mass of each row going to alpha-LIS outside the index.
    pub outside: Vec<f64>,
    pub truncation: Option<Truncation>,
    pub stable: bool,
    /// Cascade series of each index word, from the same fiber walk.
    pub kappa: Vec<CascadeReport>,
}

/// Per-level contributions of one row: for each column word, the values at levels `1..=K`.
pub type LevelContributions = BTreeMap<Word, Vec<f64>>;

/// Contributions `casc(βc)` of the fiber contexts `c` of `alpha_lis` at levels `1..=levels`,
/// grouped by the column `βt` (`t` a proper prefix of `c`, `βt ∈ S`).
/// Returns the contributions and the fiber level sums `κ(1..=levels+1)`.
pub fn level_contributions(
    pt: &ProbabilisedTree,
    engine: &FiberEngine,
    set: &AlphaLisSet,
    alpha_lis: &Word,
    levels: usize,
) -> Result<(LevelContributions, Vec<f64>)> {
    let fiber = engine.levels(alpha_lis, levels + 1)?;
    let kappa: Vec<f64> = fiber.iter().map(|l| compensated_sum(l.iter().map(|x| x.1))).collect();
    let b = pt.tree().alphabet().size();
    let mut q = vec![0.0; b];
    let mut out: LevelContributions = BTreeMap::new();
    for (k, level) in fiber.iter().take(levels).enumerate() {
        for (c, casc) in level {
            pt.q_into(c.as_slice(), &mut q)?;
            for beta in pt.tree().alphabet().letters() {
                let v = casc * q[beta as usize];
                if v == 0.0 {
                    continue;
                }
                let bc = c.prepend(beta);
                for j in 0..c.len() {
                    let col = &bc.as_slice()[..=j];
                    if set.contains(col) {
                        let e = out.entry(Word::from(col)).or_insert_with(|| vec![0.0; levels]);
                        e[k] += v;
                    }
                }
            }
        }
    }
    Ok((out, kappa))
}

fn sort_index(v: &mut [Word], order: IndexOrder) {
    match order {
        IndexOrder::LengthLex => v.sort(),
        IndexOrder::LengthThenReverse => v.sort_by_key(|x| (x.len(), Reverse(x.clone()))),
    }
}

/// Assembles `Q_{αs,βt} = Σ casc(βc)` over contexts `c = t⋯` with alpha-LIS `αs`.
pub fn build_q(pt: &ProbabilisedTree, params: QParams) -> Result<QMatrix> {
    if params.trunc == 0 || params.levels == 0 {
        return Err(VlmcError::Param("trunc and levels must be positive".into()));
    }
    let set = alpha_lis_set(pt.tree(), params.depth);
    let mut index: Vec<Word> = set.entries().to_vec();
    sort_index(&mut index, params.order);
    let mut truncation = None;
    if !set.is_finite() {
        truncation = Some(Truncation { n: index.len().min(params.trunc), note: format!("alpha-LIS listed up to length {}; {TRUNCATION_BANNER}", params.depth) });
    }
    if index.len() > params.trunc {
        index.truncate(params.trunc);
        truncation = Some(Truncation { n: params.trunc, note: format!("first {} alpha-LIS kept; {TRUNCATION_BANNER}", params.trunc) });
    }
    let pos: HashMap<&Word, usize> = index.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let max_len = index.iter().map(Word::len).max().unwrap_or(1);
    let engine = FiberEngine::new(pt, max_len + params.levels);
    let finite = engine.finite_fibers();
    let rows: Vec<_> = index
        .par_iter()
        .map(|a| level_contributions(pt, &engine, &set, a, params.levels))
        .collect::<Result<Vec<_>>>()?;
    let n = index.len();
    let mut entries = vec![vec![0.0; n]; n];
    let mut outside = vec![0.0; n];
    let mut row_status = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    for (i, (contrib, ks)) in rows.into_iter().enumerate() {
        for (col, vals) in contrib {
            let v = compensated_sum(vals);
            match pos.get(&col) {
                Some(&j) => entries[i][j] = v,
                None => outside[i] += v,
            }
        }
        // a shallower census leaves the tail unknown
        let next = ks.get(params.levels).copied().unwrap_or(f64::INFINITY);
        row_status.push(if finite || (engine.is_stable() && next == 0.0) {
            EntryStatus::Exact
        } else {
            EntryStatus::SeriesApprox { tail_bound: next }
        });
        let sums = &ks[..ks.len().min(params.levels)];
        let (status, total) = certify(sums, finite, params.series_tol, SeriesConfig::default());
        kappa.push(CascadeReport { alpha_lis: index[i].clone(), level_sums: sums.to_vec(), partial: compensated_sum(sums.iter().copied()), total, status });
    }
    Ok(QMatrix { index, entries, row_status, outside, truncation, stable: engine.is_stable(), kappa })
}

impl QMatrix {
    /// Builds a matrix directly; entries must be finite and non-negative.
    pub fn from_entries(index: Vec<Word>, entries: Vec<Vec<f64>>) -> Result<Self> {
        let n = index.len();
        if entries.len() != n || entries.iter().any(|r| r.len() != n) {
            return Err(VlmcError::Param("matrix must be square and match the index".into()));
        }
        if entries.iter().flatten().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(VlmcError::Param("entries must be finite and non-negative".into()));
        }
        Ok(QMatrix {
            index,
            entries,
            row_status: vec![EntryStatus::Exact; n],
            outside: vec![0.0; n],
            truncation: None,
            stable: true,
            kappa: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn position(&self, x: &Word) -> Option<usize> {
        self.index.iter().position(|y| y == x)
    }

    pub fn get(&self, row: &Word, col: &Word) -> Option<f64> {
        Some(self.entries[self.position(row)?][self.position(col)?])
    }

    pub fn status(&self, row: usize) -> EntryStatus {
        self.row_status[row]
    }

    /// `κ` totals of the index words, when every series converged.
    pub fn kappa_totals(&self) -> Option<Vec<f64>> {
        if self.kappa.len() != self.len() {
            return None;
        }
        self.kappa.iter().map(|r| r.total).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("row");
        for x in &self.index {
            s.push(',');
            s.push_str(&x.to_string());
        }
        s.push('\n');
        for (x, row) in self.index.iter().zip(&self.entries) {
            s.push_str(&x.to_string());
            for v in row {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowSum {
    pub word: Word,
    /// Listed entries plus mass leaving the index.
    pub sum: f64,
    pub deviation: f64,
    pub allowance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StochasticityReport {
    pub rows: Vec<RowSum>,
    pub pass: bool,
}

/// Row sums of `Q` against 1, allowing the row tail bound for series rows.
pub fn row_stochasticity(q: &QMatrix, tol: f64) -> StochasticityReport {
    let rows: Vec<RowSum> = (0..q.len())
        .map(|i| {
            let sum = compensated_sum(q.entries[i].iter().copied().chain([q.outside[i]]));
            let allowance = match q.row_status[i] {
                EntryStatus::Exact => tol,
                EntryStatus::SeriesApprox { tail_bound } => tol + tail_bound,
            };
            RowSum { word: q.index[i].clone(), sum, deviation: (sum - 1.0).abs(), allowance }
        })
        .collect();
    let pass = rows.iter().all(|r| r.deviation <= r.allowance);
    StochasticityReport { rows, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Irreducibility {
    Irreducible,
    Reducible { classes: Vec<Vec<Word>> },
}

/// Strongly connected components of the digraph of positive entries.
pub fn irreducibility(q: &QMatrix) -> Irreducibility {
    let mut g = DiGraph::<usize, ()>::new();
    let nodes: Vec<_> = (0..q.len()).map(|i| g.add_node(i)).collect();
    for (i, row) in q.entries.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut sccs = tarjan_scc(&g);
    if sccs.len() <= 1 {
        return Irreducibility::Irreducible;
    }
    let mut classes: Vec<Vec<Word>> = sccs
        .iter_mut()
        .map(|c| {
            let mut v: Vec<usize> = c.iter().map(|n| g[*n]).collect();
            v.sort_unstable();
            v.into_iter().map(|i| q.index[i].clone()).collect()
        })
        .collect();
    classes.sort();
    Irreducibility::Reducible { classes }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dense,
    PowerIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedVector {
    pub index: Vec<Word>,
    pub values: Vec<f64>,
    /// `Σ v κ` after scaling (1 when normalized).
    pub normalization: f64,
    /// False when `κ` was unavailable and `v` was scaled to unit sum instead.
    pub normalized: bool,
    /// `‖vQ − v‖₁` of the (renormalised) matrix that was solved.
    pub residual: f64,
    pub fixed_space_dim: usize,
    pub unique: bool,
    pub method: SolveMethod,
    pub banner: Option<String>,
}

pub const DENSE_LIMIT: usize = 2000;
const POWER_MAX_ITER: usize = 100_000;

fn power_iteration(m: &[Vec<f64>], tol: f64) -> (Vec<f64>, bool) {
    let n = m.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITER {
        // lazy chain (I + Q)/2 avoids periodicity
        let mut next: Vec<f64> = v.iter().map(|x| 0.5 * x).collect();
        for (i, row) in m.iter().enumerate() {
            let vi = 0.5 * v[i];
            if vi != 0.0 {
                for (j, &x) in row.iter().enumerate() {
                    next[j] += vi * x;
                }
            }
        }
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        let diff: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if diff < tol {
            return (v, true);
        }
    }
    (v, false)
}

fn residual(m: &[Vec<f64>], v: &[f64]) -> f64 {
    let n = v.len();
    let mut r: Vec<f64> = v.iter().map(|x| -x).collect();
    for i in 0..n {
        for j in 0..n {
            r[j] += v[i] * m[i][j];
        }
    }
    r.iter().map(|x| x.abs()).sum()
}

/// Non-negative `v` with `vQ = v`, scaled so that `Σ v κ = 1` when `kappa` is given.
pub fn left_fixed_vector(q: &QMatrix, kappa: Option<&[f64]>, tol: f64) -> Result<FixedVector> {
    let n = q.len();
    if n == 0 {
        return Err(VlmcError::NoFixedVector("empty index".into()));
    }
    let mut m = q.entries.clone();
    let approx = q.truncation.is_some() || q.row_status.iter().any(|s| *s != EntryStatus::Exact);
    if approx && q.stable {
        for row in &mut m {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            }
        }
    }
    let (mut v, dim, method) = if n <= DENSE_LIMIT {
        let a = DMatrix::from_fn(n, n, |i, j| m[j][i] - if i == j { 1.0 } else { 0.0 });
        let svd = a.svd(false, true);
        let smax = svd.singular_values.max().max(1.0);
        let thresh = 1e-9 * smax;
        let dim = svd.singular_values.iter().filter(|&&s| s <= thresh).count();
        if dim == 0 {
            let smin = svd.singular_values.min();
            return Err(VlmcError::NoFixedVector(format!("1 is not an eigenvalue (smallest singular value {smin:.3e})")));
        }
        if dim == 1 {
            let vt = svd.v_t.ok_or_else(|| VlmcError::NoFixedVector("SVD failed".into()))?;
            let (k, _) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            let mut v: Vec<f64> = vt.row(k).iter().copied().collect();
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (v, 1, SolveMethod::Dense)
        } else {
            let (v, _) = power_iteration(&m, tol);
            (v, dim, SolveMethod::PowerIteration)
        }
    } else {
        let (v, converged) = power_iteration(&m, tol);
        if !converged {
            return Err(VlmcError::NoFixedVector(format!("power iteration did not reach {tol:e}")));
        }
        (v, 0, SolveMethod::PowerIteration)
    };
    let vmax = v.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if vmax == 0.0 || v.iter().any(|&x| x < -1e-9 * vmax) {
        return Err(VlmcError::NoFixedVector("fixed vector has entries of both signs".into()));
    }
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    let (normalization, normalized) = match kappa {
        Some(k) if k.len() == n && k.iter().all(|x| x.is_finite()) => {
            let s: f64 = v.iter().zip(k).map(|(a, b)| a * b).sum();
            v.iter_mut().for_each(|x| *x /= s);
            (v.iter().zip(k).map(|(a, b)| a * b).sum(), true)
        }
        _ => {
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            (f64::NAN, false)
        }
    };
    let res = residual(&m, &v);
    let banner = q.truncation.as_ref().map(|t| t.note.clone());
    Ok(FixedVector {
        index: q.index.clone(),
        values: v,
        normalization,
        normalized,
        residual: res,
        fixed_space_dim: dim,
        unique: dim == 1,
        method,
        banner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::cascade;
    use crate::prob::QRule;
    use crate::tree::ContextTree;
    use crate::word::w;
    use proptest::prelude::*;

    fn uniform(n: &str) -> ProbabilisedTree {
        ProbabilisedTree::uniform(ContextTree::zoo(n).unwrap())
    }

    /// Definition of `Q` by enumeration of contexts up to a length.
    fn brute_q(pt: &ProbabilisedTree, set: &AlphaLisSet, index: &[Word], max_len: usize) -> Vec<Vec<f64>> {
        let t = pt.tree();
        let n = index.len();
        let mut m = vec![vec![0.0; n]; n];
        for c in t.contexts_up_to(max_len) {
            let d = crate::suffix::alpha_lis(t, &c).unwrap().alpha_lis();
            let Some(i) = index.iter().position(|x| *x == d) else { continue };
            for beta in t.alphabet().letters() {
                let bc = c.prepend(beta);
                for (j, col) in index.iter().enumerate() {
                    if col.len() <= c.len() && col.as_slice()[0] == beta && bc.starts_with(col.as_slice()) && set.contains(col.as_slice()) {
                        m[i][j] += cascade(pt, &bc).unwrap();
                    }
                }
            }
        }
        m
    }

    #[test]
    fn four_context_tree_matrix() {
        let t = ContextTree::explicit(2, &["1", "00", "010", "011"]).unwrap();
        let pt = ProbabilisedTree::random(t, 21);
        let q = build_q(&pt, QParams::default()).unwrap();
        assert_eq!(q.index, vec![w("1"), w("00"), w("10")]);
        let c = |x: &str| cascade(&pt, &w(x)).unwrap();
        let g = |r: &str, s: &str| q.get(&w(r), &w(s)).unwrap();
        assert!((g("00", "00") - c("000")).abs() < 1e-15);
        assert!((g("00", "10") - c("100")).abs() < 1e-15);
        assert!((g("00", "1") - c("100")).abs() < 1e-15);
        assert!((g("10", "00") - c("0010")).abs() < 1e-15);
        assert!((g("10", "10") - c("1010")).abs() < 1e-15);
        assert!((g("10", "1") - c("1010")).abs() < 1e-15);
        assert!((g("1", "00") - c("0011")).abs() < 1e-15);
        assert!((g("1", "10") - c("1011")).abs() < 1e-15);
        assert!((g("1", "1") - c("1011") - c("11")).abs() < 1e-15);
        let rep = row_stochasticity(&q, 1e-12);
        assert!(!rep.pass);
        let q00 = pt.q(&[0, 0]).unwrap()[1];
        assert!((rep.rows[1].sum - 1.0 - q00).abs() < 1e-14);
    }

    #[test]
    fn small_examples() {
        let q = build_q(&uniform("lc_of_rc"), QParams::default()).unwrap();
        assert_eq!(q.index, vec![w("10")]);
        assert!((q.entries[0][0] - 1.0).abs() < 1e-12);
        let k = q.kappa_totals().unwrap();
        let v = left_fixed_vector(&q, Some(&k), 1e-12).unwrap();
        assert!((v.values[0] - 1.0 / k[0]).abs() < 1e-12 && v.unique);

        let b = build_q(&uniform("b_comb"), QParams::default()).unwrap();
        for r in row_stochasticity(&b, 1e-15).rows {
            assert!(r.deviation <= 2.0 * f64::EPSILON, "{r:?}");
        }
        assert_eq!(irreducibility(&b), Irreducibility::Irreducible);
    }

    #[test]
    fn fixed_vector_by_hand() {
        let q = QMatrix::from_entries(vec![w("0"), w("1")], vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let v = left_fixed_vector(&q, None, 1e-12).unwrap();
        assert!((v.values[0] - 1.0 / 3.0).abs() < 1e-12 && (v.values[1] - 2.0 / 3.0).abs() < 1e-12);
        let v = left_fixed_vector(&q, Some(&[1.0, 2.0]), 1e-12).unwrap();
        assert!((v.normalization - 1.0).abs() < 1e-12 && (v.values[0] - 0.2).abs() < 1e-12);
        let (p, _) = power_iteration(&q.entries, 1e-14);
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_blocks() {
        let e = vec![
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.3, 0.7],
        ];
        let q = QMatrix::from_entries(vec![w("0"), w("1"), w("00"), w("01")], e).unwrap();
        match irreducibility(&q) {
            Irreducibility::Reducible { classes } => assert_eq!(classes.len(), 3),
            x => panic!("{x:?}"),
        }
        let v = left_fixed_vector(&q, None, 1e-12).unwrap();
        assert_eq!(v.fixed_space_dim, 2);
        assert!(!v.unique && v.residual < 1e-9);
        let q = QMatrix::from_entries(vec![w("0"), w("1")], vec![vec![0.5, 0.5], vec![0.5, 0.0]]).unwrap();
        assert!(matches!(left_fixed_vector(&q, None, 1e-12), Err(VlmcError::NoFixedVector(_))));
    }

    #[test]
    fn lc_of_lc_realisation() {
        let a: Vec<Vec<f64>> = (0..6)
            .map(|qq| {
                let r = 0.3 + 0.1 * qq as f64;
                (0..6).map(|p| (1.0 - r) * r.powi(p)).collect::<Vec<f64>>()
            })
            .collect();
        let pt = ProbabilisedTree::new(ContextTree::zoo("lc_of_lc").unwrap(), QRule::Realisation { a: a.clone() }).unwrap();
        let q = build_q(&pt, QParams { trunc: 6, levels: 80, depth: 12, ..QParams::default() }).unwrap();
        assert!(q.truncation.is_some());
        for qq in 0..6 {
            for p in 0..6 {
                let row = Word::from_letters([vec![1u8], vec![0; qq], vec![1]].concat());
                let col = Word::from_letters([vec![1u8], vec![0; p], vec![1]].concat());
                let got = q.get(&row, &col).unwrap();
                assert!((got - a[qq][p]).abs() < 1e-9, "{row} {col}: {got} vs {}", a[qq][p]);
            }
        }
    }

    #[test]
    fn stable_rows_telescope() {
        for n in ["lc_of_rc_cherry", "double_bamboo", "b_comb", "alternating_ones", "lc_of_lc"] {
            let pt = ProbabilisedTree::random(ContextTree::zoo(n).unwrap(), 4);
            let q = build_q(&pt, QParams { levels: 40, trunc: 12, ..QParams::default() }).unwrap();
            for (i, r) in q.kappa.iter().enumerate() {
                let sum: f64 = q.entries[i].iter().sum::<f64>() + q.outside[i];
                let tail = match q.row_status[i] {
                    EntryStatus::Exact => 0.0,
                    EntryStatus::SeriesApprox { tail_bound } => tail_bound,
                };
                if q.stable {
                    assert!((sum + tail - r.level_sums[0]).abs() < 1e-12, "{n} row {i}");
                }
            }
        }
    }

    #[test]
    fn appendix_order() {
        let q = build_q(&uniform("arith_stable"), QParams { trunc: 6, levels: 8, depth: 10, order: IndexOrder::LengthThenReverse, ..QParams::default() }).unwrap();
        let want: Vec<Word> = ["11", "0101", "101000", "001001", "10010000", "00010001"].iter().map(|s| w(s)).collect();
        assert_eq!(q.index, want);
    }

    fn random_tree(seed: u64, b: usize) -> ContextTree {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = crate::word::Alphabet::new(b).unwrap();
        let mut internal = vec![Word::empty()];
        let mut frontier = vec![Word::empty()];
        while let Some(x) = frontier.pop() {
            for l in a.letters() {
                let y = x.append(l);
                if y.len() < 4 && rng.random::<f64>() < 0.6 {
                    internal.push(y.clone());
                    frontier.push(y);
                }
            }
        }
        ContextTree::Explicit(std::sync::Arc::new(crate::tree::ExplicitTree::from_internal(a, &internal).unwrap()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn matches_definition_on_finite_trees(seed in 0u64..5000, b in 2usize..4) {
            let pt = ProbabilisedTree::random(random_tree(seed, b), seed);
            let q = build_q(&pt, QParams::default()).unwrap();
            let set = alpha_lis_set(pt.tree(), 8);
            let m = brute_q(&pt, &set, &q.index, 8);
            for i in 0..q.len() {
                for j in 0..q.len() {
                    prop_assert!((q.entries[i][j] - m[i][j]).abs() < 1e-13);
                }
            }
            prop_assert!(q.entries.iter().flatten().all(|x| x.is_finite() && *x >= 0.0));
        }

        #[test]
        fn stable_finite_fixed_vectors(seed in 0u64..5000) {
            let pt = ProbabilisedTree::random(random_tree(seed, 2), seed);
            let q = build_q(&pt, QParams::default()).unwrap();
            if q.stable && row_stochasticity(&q, 1e-12).pass {
                prop_assert_eq!(irreducibility(&q), Irreducibility::Irreducible);
                let v = left_fixed_vector(&q, q.kappa_totals().as_deref(), 1e-12).unwrap();
                prop_assert!(v.unique && v.residual < 1e-12 && v.values.iter().all(|x| *x > 0.0));
                prop_assert!((v.normalization - 1.0).abs() < 1e-12);
            }
        }
    }
}
