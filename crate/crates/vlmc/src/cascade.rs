//! Cascades, level sums `κ(k)` of the cascade series and their certification.

use crate::error::{Result, VlmcError};
use crate::prob::ProbabilisedTree;
use crate::suffix::{alpha_lis_set, alpha_lis_start, Census};
use crate::tree::{is_stable, ContextTree};
use crate::word::Word;
use rayon::prelude::*;
use serde::Serialize;

/// Numerical settings of the series certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesConfig {
    /// Trailing window of level-sum ratios.
    pub window: usize,
    /// Partial sums above this are reported as suspected divergence.
    pub ceiling: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig { window: 8, ceiling: 1e6 }
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// `casc(w)` on a slice; the empty word has cascade 1.
pub fn cascade_slice(pt: &ProbabilisedTree, w: &[u8]) -> Result<f64> {
    if w.is_empty() {
        return Ok(1.0);
    }
    let tree = pt.tree();
    let p = alpha_lis_start(tree, w);
    let mut prod = 1.0;
    for k in 1..=p {
        let rest = &w[k..];
        let n = tree.cont_len(rest).ok_or_else(|| {
            VlmcError::ContNotFound(format!("suffix {} of {} is internal", Word::from(rest), Word::from(w)))
        })?;
        prod *= pt.q_letter(&rest[..n], w[k - 1])?;
    }
    Ok(prod)
}

/// `casc(w) = Π_{k=1..p} q_{cont(σ^k w)}(w_{k-1})`, `p` the length of the head before the alpha-LIS.
pub fn cascade(pt: &ProbabilisedTree, w: &Word) -> Result<f64> {
    pt.tree().alphabet().check(w.as_slice())?;
    cascade_slice(pt, w.as_slice())
}

/// Contexts of one fiber, grouped by level, with their cascades.
pub type FiberLevels = Vec<Vec<(Word, f64)>>;

/// Enumerates fibers level by level. On stable trees level `k+1` is obtained by
/// prepending letters to level `k`; otherwise from a census of contexts.
#[derive(Debug, Clone)]
pub struct FiberEngine<'a> {
    pt: &'a ProbabilisedTree,
    stable: bool,
    census: Option<Census>,
}

impl<'a> FiberEngine<'a> {
    /// `depth` bounds the context lengths for non-stable infinite trees.
    pub fn new(pt: &'a ProbabilisedTree, depth: usize) -> Self {
        let tree = pt.tree();
        match tree {
            ContextTree::Explicit(e) => {
                FiberEngine { pt, stable: false, census: Some(Census::new(tree, e.height())) }
            }
            ContextTree::Zoo(_) => {
                let stable = is_stable(tree, 12).is_stable();
                let census = (!stable).then(|| Census::new(tree, depth));
                FiberEngine { pt, stable, census }
            }
        }
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    /// Whether every level beyond the enumerated ones is empty.
    pub fn finite_fibers(&self) -> bool {
        self.pt.tree().is_finite()
    }

    /// Largest level available for `alpha_lis` (`None` = unbounded).
    pub fn max_levels(&self, alpha_lis: &Word) -> Option<usize> {
        match (&self.census, self.pt.tree().is_finite()) {
            (Some(_), true) | (None, _) => None,
            (Some(c), false) => Some((c.depth() + 1).saturating_sub(alpha_lis.len())),
        }
    }

    /// Levels `1..=levels` of the fiber of `alpha_lis` (fewer if the census is shallower).
    pub fn levels(&self, alpha_lis: &Word, levels: usize) -> Result<FiberLevels> {
        let n = alpha_lis.len();
        let mut out: FiberLevels = vec![Vec::new(); levels];
        match &self.census {
            Some(c) => {
                for ctx in c.fiber(alpha_lis) {
                    let k = ctx.len() - n;
                    if k < levels {
                        let v = cascade_slice(self.pt, ctx.as_slice())?;
                        out[k].push((ctx.clone(), v));
                    }
                }
                if let Some(m) = self.max_levels(alpha_lis) {
                    out.truncate(m.min(levels));
                }
            }
            None => {
                let tree = self.pt.tree();
                if levels == 0 {
                    return Ok(out);
                }
                out[0].push((alpha_lis.clone(), 1.0));
                let mut q = vec![0.0; tree.alphabet().size()];
                for k in 1..levels {
                    let (prev, rest) = out.split_at_mut(k);
                    for (c, v) in &prev[k - 1] {
                        self.pt.q_into(c.as_slice(), &mut q)?;
                        for a in tree.alphabet().letters() {
                            let ac = c.prepend(a);
                            if tree.cont_len(ac.as_slice()) == Some(ac.len()) {
                                rest[0].push((ac, v * q[a as usize]));
                            }
                        }
                    }
                    rest[0].sort_by(|x, y| x.0.cmp(&y.0));
                }
            }
        }
        Ok(out)
    }
}

/// Convergence status of a cascade series.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeriesStatus {
    Converged { tail_bound: f64 },
    DivergenceSuspected { reason: String },
    Inconclusive { levels: usize },
}

/// Level sums and total of the cascade series of one alpha-LIS.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    pub alpha_lis: Word,
    /// `κ(k)` for `k = 1..=K`.
    pub level_sums: Vec<f64>,
    pub partial: f64,
    /// Partial sum plus the certified tail bound; `None` unless converged.
    pub total: Option<f64>,
    pub status: SeriesStatus,
}

impl CascadeReport {
    pub fn is_converged(&self) -> bool {
        matches!(self.status, SeriesStatus::Converged { .. })
    }

    pub fn tail_bound(&self) -> Option<f64> {
        match self.status {
            SeriesStatus::Converged { tail_bound } => Some(tail_bound),
            _ => None,
        }
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if a == 0.0 {
        f64::INFINITY
    } else {
        b / a
    }
}

/// Classifies a sequence of level sums.
pub fn certify(level_sums: &[f64], finite: bool, tol: f64, cfg: SeriesConfig) -> (SeriesStatus, Option<f64>) {
    let partial = compensated_sum(level_sums.iter().copied());
    let k = level_sums.len();
    if finite {
        return (SeriesStatus::Converged { tail_bound: 0.0 }, Some(partial));
    }
    let w = cfg.window.max(2).min(k);
    if k < 2 {
        return (SeriesStatus::Inconclusive { levels: k }, None);
    }
    let tail = &level_sums[k - w..];
    let rho = tail.windows(2).map(|p| ratio(p[0], p[1])).fold(0.0, f64::max);
    let last = level_sums[k - 1];
    if rho < 1.0 {
        let bound = last * rho / (1.0 - rho);
        if bound < tol {
            return (SeriesStatus::Converged { tail_bound: bound }, Some(partial + bound));
        }
    }
    let non_decreasing = tail.windows(2).all(|p| p[1] >= p[0]);
    if partial > cfg.ceiling && non_decreasing {
        return (
            SeriesStatus::DivergenceSuspected { reason: format!("partial sum {partial:.3e} above ceiling, level sums non-decreasing") },
            None,
        );
    }
    if tail.iter().all(|&x| x > 0.0) {
        // Gauss test h_k = k (κ(k)/κ(k+1) - 1): divergent when h_k stays at most 1
        let first_level = k - w + 1;
        let h: Vec<f64> = tail
            .windows(2)
            .enumerate()
            .map(|(i, p)| (first_level + i) as f64 * (p[0] / p[1] - 1.0))
            .collect();
        let (h0, h1) = (h[0], h[h.len() - 1]);
        let growth_ok = h1 - h0 <= 0.5 * h1.abs() * (w - 1) as f64 / (k - 1) as f64;
        if h.iter().all(|&x| x <= 1.05) && growth_ok {
            return (
                SeriesStatus::DivergenceSuspected { reason: format!("level sums decay like 1/k (Gauss test h = {h1:.4})") },
                None,
            );
        }
    }
    (SeriesStatus::Inconclusive { levels: k }, None)
}

/// Level sums of an alpha-LIS already known to belong to `S`.
pub fn kappa_with(engine: &FiberEngine, alpha_lis: &Word, max_levels: usize, tol: f64, cfg: SeriesConfig) -> Result<CascadeReport> {
    let levels = engine.levels(alpha_lis, max_levels)?;
    let level_sums: Vec<f64> = levels.iter().map(|l| compensated_sum(l.iter().map(|x| x.1))).collect();
    let partial = compensated_sum(level_sums.iter().copied());
    let (status, total) = certify(&level_sums, engine.finite_fibers(), tol, cfg);
    Ok(CascadeReport { alpha_lis: alpha_lis.clone(), level_sums, partial, total, status })
}

/// Cascade series of one context alpha-LIS.
pub fn kappa(pt: &ProbabilisedTree, alpha_lis: &Word, max_levels: usize, tol: f64) -> Result<CascadeReport> {
    if max_levels == 0 || !(tol > 0.0) {
        return Err(VlmcError::Param("kappa needs max_levels >= 1 and tol > 0".into()));
    }
    let set = alpha_lis_set(pt.tree(), alpha_lis.len().max(1));
    if !set.contains(alpha_lis.as_slice()) {
        return Err(VlmcError::NotAlphaLis(alpha_lis.to_string()));
    }
    let engine = FiberEngine::new(pt, alpha_lis.len() + max_levels - 1);
    kappa_with(&engine, alpha_lis, max_levels, tol, SeriesConfig::default())
}

/// Cascade series of every listed alpha-LIS, in the given order.
pub fn kappa_all(pt: &ProbabilisedTree, entries: &[Word], max_levels: usize, tol: f64) -> Result<Vec<CascadeReport>> {
    let depth = entries.iter().map(Word::len).max().unwrap_or(1) + max_levels;
    let engine = FiberEngine::new(pt, depth);
    entries
        .par_iter()
        .map(|a| kappa_with(&engine, a, max_levels, tol, SeriesConfig::default()))
        .collect()
}

/// Whether `κ(k) → 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Vanishing {
    /// `κ(k) < tol` reached and the trailing window stays below and does not increase.
    Holds { level: usize },
    /// Strictly decreasing trailing window, `tol` not reached.
    DecreasingTrend,
    /// Non-decreasing trailing window above `tol`.
    NotVanishing,
    Undetermined,
}

pub fn vanishing_status(level_sums: &[f64], finite: bool, tol: f64, window: usize) -> Vanishing {
    let k = level_sums.len();
    if finite {
        let level = level_sums.iter().rposition(|&x| x > 0.0).map_or(1, |i| i + 2);
        return Vanishing::Holds { level };
    }
    if k == 0 {
        return Vanishing::Undetermined;
    }
    let w = window.max(2).min(k);
    let tail = &level_sums[k - w..];
    if let Some(first) = level_sums.iter().position(|&x| x < tol) {
        let stays = level_sums[first..].iter().all(|&x| x < tol);
        if stays && tail.windows(2).all(|p| p[1] <= p[0]) {
            return Vanishing::Holds { level: first + 1 };
        }
    }
    if tail.windows(2).all(|p| p[1] < p[0]) {
        Vanishing::DecreasingTrend
    } else if tail.windows(2).all(|p| p[1] >= p[0]) {
        Vanishing::NotVanishing
    } else {
        Vanishing::Undetermined
    }
}

/// Vanishing-cascades status for every alpha-LIS of the tree (listed up to `depth`).
pub fn vanishing_check(pt: &ProbabilisedTree, depth: usize, max_levels: usize, tol: f64) -> Result<Vec<(Word, Vanishing)>> {
    let set = alpha_lis_set(pt.tree(), depth);
    let reports = kappa_all(pt, set.entries(), max_levels, tol)?;
    let finite = pt.tree().is_finite();
    Ok(reports
        .into_iter()
        .map(|r| {
            let v = vanishing_status(&r.level_sums, finite, tol, SeriesConfig::default().window);
            (r.alpha_lis, v)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::QRule;
    use crate::word::w;

    fn uniform(n: &str) -> ProbabilisedTree {
        ProbabilisedTree::uniform(ContextTree::zoo(n).unwrap())
    }

    /// Cascade from the definition: strip letters while the remaining suffix is non-internal.
    fn brute_cascade(pt: &ProbabilisedTree, w: &[u8]) -> f64 {
        let t = pt.tree();
        let mut prod = 1.0;
        let mut k = 1;
        while k <= w.len() && !t.is_internal(&w[k..]) {
            let rest = &w[k..];
            let mut n = 1;
            while t.is_internal(&rest[..n]) {
                n += 1;
            }
            prod *= pt.q(&rest[..n]).unwrap()[w[k - 1] as usize];
            k += 1;
        }
        prod
    }

    #[test]
    fn cascade_examples() {
        let t = ContextTree::zoo("three_branch").unwrap();
        let rule = QRule::Random { seed: 11, floor: 0.1 };
        let pt = ProbabilisedTree::new(t.clone(), rule).unwrap();
        let q = |c: &str, a: usize| pt.q(w(c).as_slice()).unwrap()[a];
        let want = q("101", 0) * q("0100", 1) * q("100", 0) * q("00", 1);
        assert!((cascade(&pt, &w("010100")).unwrap() - want).abs() < 1e-15);
        let u = ProbabilisedTree::uniform(t);
        assert_eq!(cascade(&u, &w("010100")).unwrap(), 0.0625);
        for a in ["00", "101", "1011", "0110"] {
            assert_eq!(cascade(&pt, &w(a)).unwrap(), 1.0);
        }
        assert_eq!(cascade(&pt, &Word::empty()).unwrap(), 1.0);
    }

    #[test]
    fn cascade_matches_definition() {
        for n in ["three_branch", "bamboo_blossom", "lc_of_rc", "four_contexts", "arith_stable"] {
            let pt = ProbabilisedTree::random(ContextTree::zoo(n).unwrap(), 3);
            for len in 1..9 {
                for x in pt.tree().alphabet().words_of_len(len) {
                    let got = cascade(&pt, &x).unwrap();
                    let want = brute_cascade(&pt, x.as_slice());
                    assert!((got - want).abs() < 1e-15, "{n} {x}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn left_comb_series() {
        let lc = ContextTree::zoo("left_comb").unwrap();
        let half = ProbabilisedTree::new(lc.clone(), QRule::CombStay { stay: 0.5 }).unwrap();
        let r = kappa(&half, &w("1"), 64, 1e-12).unwrap();
        for (k, x) in r.level_sums.iter().enumerate() {
            assert_eq!(*x, 0.5f64.powi(k as i32));
        }
        // brute-force partial sums of the geometric series
        let brute: f64 = (0..200).map(|n| 0.5f64.powi(n)).sum();
        assert!((r.total.unwrap() - brute).abs() < 1e-12 && r.is_converged());
        let v = vanishing_status(&r.level_sums, false, 1e-10, 8);
        assert!(matches!(v, Vanishing::Holds { .. }));

        let harm = ProbabilisedTree::new(lc, QRule::CombHarmonic).unwrap();
        let r = kappa(&harm, &w("1"), 64, 1e-10).unwrap();
        for (i, x) in r.level_sums.iter().enumerate() {
            let n = i + 1;
            let prod: f64 = (0..i).map(|k| (k as f64 + 1.0) / (k as f64 + 2.0)).product();
            assert!((x - prod).abs() < 1e-12 && (x - 1.0 / n as f64).abs() < 1e-12);
        }
        assert!(matches!(r.status, SeriesStatus::DivergenceSuspected { .. }), "{:?}", r.status);
        assert!(matches!(vanishing_status(&r.level_sums, false, 0.02, 8), Vanishing::Holds { .. }));
        assert_eq!(vanishing_status(&r.level_sums, false, 1e-10, 8), Vanishing::DecreasingTrend);
    }

    #[test]
    fn slow_geometric_is_not_called_divergent() {
        let sums: Vec<f64> = (0..64).map(|k| 0.97f64.powi(k)).collect();
        let (s, _) = certify(&sums, false, 1e-10, SeriesConfig::default());
        assert_eq!(s, SeriesStatus::Inconclusive { levels: 64 });
        let flat = vec![1.0; 64];
        let (s, _) = certify(&flat, false, 1e-10, SeriesConfig::default());
        assert!(matches!(s, SeriesStatus::DivergenceSuspected { .. }));
        assert_eq!(vanishing_status(&flat, false, 1e-10, 8), Vanishing::NotVanishing);
        let sq: Vec<f64> = (1..65).map(|k| 1.0 / (k * k) as f64).collect();
        assert!(matches!(certify(&sq, false, 1e-10, SeriesConfig::default()).0, SeriesStatus::Inconclusive { .. }));
    }

    #[test]
    fn cherry_closed_forms() {
        let pt = uniform("lc_of_rc_cherry");
        let r010 = kappa(&pt, &w("010"), 80, 1e-12).unwrap();
        assert!((r010.total.unwrap() - 2.0).abs() < 1e-9);
        let r110 = kappa(&pt, &w("110"), 80, 1e-12).unwrap();
        // Σ_{p≥0} Σ_{q≥2} 2^-p 2^-(q-2)
        let oracle: f64 = (0..100).flat_map(|p| (2..100).map(move |q| 0.5f64.powi(p) * 0.5f64.powi(q - 2))).sum();
        assert!((r110.total.unwrap() - oracle).abs() < 1e-9, "{:?}", r110.total);
        assert!((oracle - 4.0).abs() < 1e-12);
        assert!(kappa(&pt, &w("011"), 8, 1e-9).is_err());
    }

    #[test]
    fn nine_context_kappas() {
        let pt = uniform("nine_contexts");
        let set = alpha_lis_set(pt.tree(), 4);
        let all = kappa_all(&pt, set.entries(), 8, 1e-12).unwrap();
        let get = |a: &str| all.iter().find(|r| r.alpha_lis == w(a)).unwrap().total.unwrap();
        assert_eq!(get("10"), 2.5);
        assert_eq!(get("000"), 1.0);
        assert_eq!(get("111"), 1.5);
        assert_eq!(get("0011"), 1.0);
    }

    #[test]
    fn finite_trees_vanish() {
        let pt = ProbabilisedTree::random(ContextTree::zoo("four_contexts").unwrap(), 2);
        for (_, v) in vanishing_check(&pt, 4, 16, 1e-10).unwrap() {
            assert!(matches!(v, Vanishing::Holds { .. }));
        }
    }

    #[test]
    fn stable_bfs_matches_census() {
        for n in ["lc_of_rc", "lc_of_rc_cherry", "lc_of_lc", "double_bamboo", "arith_stable"] {
            let pt = ProbabilisedTree::random(ContextTree::zoo(n).unwrap(), 5);
            let set = alpha_lis_set(pt.tree(), 8);
            let bfs = FiberEngine::new(&pt, 0);
            assert!(bfs.is_stable());
            let census = Census::new(pt.tree(), 12);
            for a in set.entries() {
                let levels = bfs.levels(a, 12 - a.len() + 1).unwrap();
                for (k, l) in levels.iter().enumerate() {
                    let want: Vec<&Word> = census.fiber(a).iter().filter(|c| c.len() == a.len() + k).collect();
                    let got: Vec<&Word> = l.iter().map(|x| &x.0).collect();
                    assert_eq!(got, want, "{n} {a} level {}", k + 1);
                    for (c, v) in l {
                        assert!((v - cascade(&pt, c).unwrap()).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn cascade_left_extension_identity() {
        for n in ["three_branch", "bamboo_blossom", "double_bamboo", "four_contexts"] {
            let pt = ProbabilisedTree::random(ContextTree::zoo(n).unwrap(), 8);
            for len in 0..8 {
                for x in pt.tree().alphabet().words_of_len(len) {
                    let sum: f64 = (0..2u8).map(|a| cascade(&pt, &x.prepend(a)).unwrap()).sum();
                    let c = cascade(&pt, &x).unwrap();
                    let internal = pt.tree().is_internal(x.as_slice());
                    assert_eq!((sum - c).abs() < 1e-12, !internal, "{n} {x}");
                    assert!(c > 0.0 && c <= 1.0);
                }
            }
        }
    }
}
