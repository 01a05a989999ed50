//! Semi-Markov kernels on a finite state space and their embedding as VLMC on the b-comb.

use crate::cascade::{compensated_sum, kappa, FiberEngine};
use crate::error::{Result, VlmcError};
use crate::prob::{ProbabilisedTree, QRule};
use crate::qmatrix::{level_contributions, QParams, Truncation};
use crate::sim::{cylinder_freqs_replicas, tv_distance, InitialState, SimConfig, WindowCounter};
use crate::stationary::{verdict, Outcome};
use crate::suffix::alpha_lis_set;
use crate::tree::{is_stable, ContextTree, ZooEntry};
use crate::word::Word;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Tolerance on per-state normalisation.
pub const KERNEL_SUM_TOL: f64 = 1e-12;

/// Remaining mass below which the true-jumps recursion stops.
const TRUE_JUMPS_EPS: f64 = 1e-15;
/// Largest sojourn length produced by the true-jumps recursion.
const TRUE_JUMPS_HORIZON: usize = 20_000;

/// Storage of `p_{a,b}(k)`, `k ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelRepr {
    /// `p[a][b][k-1]` for `k ≤ K_max`, zero beyond.
    FiniteSupport { p: Vec<Vec<Vec<f64>>> },
    /// `head[a][b][k-1]` for `k ≤ H`, then `p(k) = head[a][b][H-1] · ratio[a][b]^(k-H)`.
    GeometricTail { head: Vec<Vec<Vec<f64>>>, ratio: Vec<Vec<f64>> },
    /// `p_{a,b}(k) = w[a][b] / (k (k+1))`: infinite mean sojourn.
    HarmonicTail { w: Vec<Vec<f64>> },
}

/// A semi-Markov kernel with cached tail sums.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "KernelSpec", try_from = "KernelSpec")]
pub struct SemiMarkovKernel {
    states: usize,
    repr: KernelRepr,
    /// `tails[a][l-1] = Σ_{k ≥ l} Σ_b p_{a,b}(k)` for `l ≤ len` (finite support and geometric head).
    tails: Vec<Vec<f64>>,
}

impl PartialEq for SemiMarkovKernel {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states && self.repr == other.repr
    }
}

/// JSON form of a kernel. Pair keys are `"a,b"`; missing pairs are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub states: usize,
    pub support: SupportKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub p: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ratio: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    Finite,
    Geometric,
    Harmonic,
}

fn parse_pair(key: &str, states: usize) -> Result<(usize, usize)> {
    let bad = || VlmcError::InvalidKernel(format!("pair key {key:?} must be \"a,b\" with a, b < {states}"));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a >= states || b >= states {
        return Err(bad());
    }
    Ok((a, b))
}

fn pair_map<T: Clone>(m: &BTreeMap<String, T>, states: usize, zero: T) -> Result<Vec<Vec<T>>> {
    let mut out = vec![vec![zero; states]; states];
    for (k, v) in m {
        let (a, b) = parse_pair(k, states)?;
        out[a][b] = v.clone();
    }
    Ok(out)
}

impl TryFrom<KernelSpec> for SemiMarkovKernel {
    type Error = VlmcError;

    fn try_from(s: KernelSpec) -> Result<Self> {
        let n = s.states;
        if n < 2 {
            return Err(VlmcError::InvalidKernel("states must be at least 2".into()));
        }
        let repr = match s.support {
            SupportKind::Finite => {
                let mut p = pair_map(&s.p, n, Vec::new())?;
                let k = p.iter().flatten().map(Vec::len).max().unwrap_or(0);
                p.iter_mut().flatten().for_each(|v| v.resize(k, 0.0));
                KernelRepr::FiniteSupport { p }
            }
            SupportKind::Geometric => {
                let mut head = pair_map(&s.p, n, Vec::new())?;
                let h = head.iter().flatten().map(Vec::len).max().unwrap_or(0);
                if h == 0 {
                    return Err(VlmcError::InvalidKernel("geometric kernel needs a non-empty head".into()));
                }
                head.iter_mut().flatten().for_each(|v| v.resize(h, 0.0));
                KernelRepr::GeometricTail { head, ratio: pair_map(&s.ratio, n, 0.0)? }
            }
            SupportKind::Harmonic => KernelRepr::HarmonicTail { w: pair_map(&s.weights, n, 0.0)? },
        };
        SemiMarkovKernel::new(n, repr)
    }
}

impl From<SemiMarkovKernel> for KernelSpec {
    fn from(k: SemiMarkovKernel) -> Self {
        let key = |a: usize, b: usize| format!("{a},{b}");
        let mut spec = KernelSpec {
            states: k.states,
            support: SupportKind::Finite,
            p: BTreeMap::new(),
            ratio: BTreeMap::new(),
            weights: BTreeMap::new(),
        };
        let nonzero = |v: &Vec<f64>| v.iter().any(|&x| x != 0.0);
        match k.repr {
            KernelRepr::FiniteSupport { p } => {
                for (a, row) in p.into_iter().enumerate() {
                    for (b, v) in row.into_iter().enumerate() {
                        if nonzero(&v) {
                            spec.p.insert(key(a, b), v);
                        }
                    }
                }
            }
            KernelRepr::GeometricTail { head, ratio } => {
                spec.support = SupportKind::Geometric;
                for (a, row) in head.into_iter().enumerate() {
                    for (b, v) in row.into_iter().enumerate() {
                        if nonzero(&v) || ratio[a][b] != 0.0 {
                            spec.p.insert(key(a, b), v);
                            spec.ratio.insert(key(a, b), ratio[a][b]);
                        }
                    }
                }
            }
            KernelRepr::HarmonicTail { w } => {
                spec.support = SupportKind::Harmonic;
                for (a, row) in w.into_iter().enumerate() {
                    for (b, x) in row.into_iter().enumerate() {
                        if x != 0.0 {
                            spec.weights.insert(key(a, b), x);
                        }
                    }
                }
            }
        }
        spec
    }
}

/// Mean sojourn times `m_a = Σ_k k Σ_b p_{a,b}(k)`; `None` means infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournSummary {
    pub m: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum LimitVerdict {
    HasLimit,
    NoLimit { infinite_states: Vec<usize> },
    Unknown { note: String },
}

impl SemiMarkovKernel {
    /// Validates shapes, signs and per-state normalisation.
    pub fn new(states: usize, repr: KernelRepr) -> Result<Self> {
        let bad = |m: String| Err(VlmcError::InvalidKernel(m));
        let square = |n: usize| n == states;
        match &repr {
            KernelRepr::FiniteSupport { p } => {
                if !square(p.len()) || p.iter().any(|r| !square(r.len())) {
                    return bad("p must be indexed by states × states".into());
                }
                let k = p[0][0].len();
                if k == 0 || p.iter().flatten().any(|v| v.len() != k) {
                    return bad("all p rows must share the same non-zero length".into());
                }
            }
            KernelRepr::GeometricTail { head, ratio } => {
                if !square(head.len()) || head.iter().any(|r| !square(r.len())) || !square(ratio.len()) {
                    return bad("head and ratio must be indexed by states × states".into());
                }
                let h = head[0][0].len();
                if h == 0 || head.iter().flatten().any(|v| v.len() != h) {
                    return bad("all head rows must share the same non-zero length".into());
                }
                if ratio.iter().flatten().any(|r| !(0.0..1.0).contains(r)) {
                    return bad("ratios must lie in [0, 1)".into());
                }
            }
            KernelRepr::HarmonicTail { w } => {
                if !square(w.len()) || w.iter().any(|r| !square(r.len())) {
                    return bad("weights must be indexed by states × states".into());
                }
            }
        }
        let mut k = SemiMarkovKernel { states, repr, tails: Vec::new() };
        k.tails = (0..states).map(|a| k.head_tails(a)).collect();
        for a in 0..states {
            let neg = match &k.repr {
                KernelRepr::FiniteSupport { p } => p[a].iter().flatten().any(|&x| !(x >= 0.0)),
                KernelRepr::GeometricTail { head, .. } => head[a].iter().flatten().any(|&x| !(x >= 0.0)),
                KernelRepr::HarmonicTail { w } => w[a].iter().any(|&x| !(x >= 0.0)),
            };
            if neg {
                return bad(format!("state {a}: negative or non-finite mass"));
            }
            let total = k.tail(a, 1);
            if (total - 1.0).abs() > KERNEL_SUM_TOL {
                return bad(format!("state {a}: total mass {total}, expected 1"));
            }
        }
        Ok(k)
    }

    fn head_tails(&self, a: usize) -> Vec<f64> {
        let n = self.states;
        match &self.repr {
            KernelRepr::FiniteSupport { p } => {
                let kmax = p[a][0].len();
                let mut t = vec![0.0; kmax + 1];
                for l in (0..kmax).rev() {
                    t[l] = t[l + 1] + (0..n).map(|b| p[a][b][l]).sum::<f64>();
                }
                t
            }
            KernelRepr::GeometricTail { head, ratio } => {
                let h = head[a][0].len();
                let mut t = vec![0.0; h + 1];
                t[h] = (0..n).map(|b| head[a][b][h - 1] * ratio[a][b] / (1.0 - ratio[a][b])).sum();
                for l in (0..h).rev() {
                    t[l] = t[l + 1] + (0..n).map(|b| head[a][b][l]).sum::<f64>();
                }
                t
            }
            KernelRepr::HarmonicTail { .. } => Vec::new(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn repr(&self) -> &KernelRepr {
        &self.repr
    }

    /// Largest `k` with a non-zero mass, `None` for infinite support.
    pub fn k_max(&self) -> Option<usize> {
        match &self.repr {
            KernelRepr::FiniteSupport { p } => Some(p[0][0].len()),
            _ => None,
        }
    }

    /// `p_{a,b}(k)`.
    pub fn p(&self, a: usize, b: usize, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.repr {
            KernelRepr::FiniteSupport { p } => p[a][b].get(k - 1).copied().unwrap_or(0.0),
            KernelRepr::GeometricTail { head, ratio } => {
                let h = head[a][b].len();
                if k <= h {
                    head[a][b][k - 1]
                } else {
                    head[a][b][h - 1] * ratio[a][b].powi((k - h) as i32)
                }
            }
            KernelRepr::HarmonicTail { w } => w[a][b] / (k as f64 * (k as f64 + 1.0)),
        }
    }

    /// `Σ_{k ≥ l} Σ_b p_{a,b}(k)`.
    pub fn tail(&self, a: usize, l: usize) -> f64 {
        let l = l.max(1);
        match &self.repr {
            KernelRepr::FiniteSupport { .. } => self.tails[a].get(l - 1).copied().unwrap_or(0.0),
            KernelRepr::GeometricTail { head, ratio } => {
                let h = head[a][0].len();
                if l <= h + 1 {
                    self.tails[a][l - 1]
                } else {
                    (0..self.states)
                        .map(|b| head[a][b][h - 1] * ratio[a][b].powi((l - h) as i32) / (1.0 - ratio[a][b]))
                        .sum()
                }
            }
            KernelRepr::HarmonicTail { w } => w[a].iter().sum::<f64>() / l as f64,
        }
    }

    /// `p_{a,b} = Σ_k p_{a,b}(k)`.
    pub fn jump_prob(&self, a: usize, b: usize) -> f64 {
        match &self.repr {
            KernelRepr::FiniteSupport { p } => p[a][b].iter().sum(),
            KernelRepr::GeometricTail { head, ratio } => {
                let v = &head[a][b];
                v.iter().sum::<f64>() + v[v.len() - 1] * ratio[a][b] / (1.0 - ratio[a][b])
            }
            KernelRepr::HarmonicTail { w } => w[a][b],
        }
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.states).any(|a| self.jump_prob(a, a) > 0.0)
    }

    /// `p_{a,b}(k) > 0` for every `a ≠ b` and every `k ≥ 1`.
    pub fn positivity(&self) -> bool {
        let off = |a: usize, b: usize| a != b;
        match &self.repr {
            KernelRepr::FiniteSupport { .. } => false,
            KernelRepr::GeometricTail { head, ratio } => (0..self.states).all(|a| {
                (0..self.states).filter(|&b| off(a, b)).all(|b| head[a][b].iter().all(|&x| x > 0.0) && ratio[a][b] > 0.0)
            }),
            KernelRepr::HarmonicTail { w } => {
                (0..self.states).all(|a| (0..self.states).filter(|&b| off(a, b)).all(|b| w[a][b] > 0.0))
            }
        }
    }

    /// Next-letter distribution of the b-comb context `a^l c`: jump to `b ≠ a` with
    /// probability `p_{a,b}(l) / tail_a(l)`, stay with `tail_a(l+1) / tail_a(l)`.
    /// Ages with an exhausted tail reuse the last age whose tail is positive.
    pub fn hazard_into(&self, a: usize, age: usize, out: &mut [f64]) {
        let n = self.states;
        let age = age.max(1);
        if let KernelRepr::GeometricTail { head, ratio } = &self.repr {
            let h = head[a][0].len();
            let rmax = ratio[a].iter().cloned().fold(0.0, f64::max);
            if age > h && rmax > 0.0 {
                // scaled by rmax^(age-h) so that long ages do not underflow
                let e = (age - h) as i32;
                let s: Vec<f64> = (0..n).map(|b| head[a][b][h - 1] * (ratio[a][b] / rmax).powi(e)).collect();
                let tail: f64 = (0..n).map(|b| s[b] / (1.0 - ratio[a][b])).sum();
                if tail > 0.0 {
                    let next: f64 = (0..n).map(|b| s[b] * ratio[a][b] / (1.0 - ratio[a][b])).sum();
                    for b in 0..n {
                        out[b] = if b == a { next / tail } else { s[b] / tail };
                    }
                    return;
                }
            }
        }
        if let KernelRepr::HarmonicTail { w } = &self.repr {
            let total: f64 = w[a].iter().sum();
            let l = age as f64;
            for b in 0..n {
                out[b] = if b == a { l / (l + 1.0) } else { w[a][b] / ((l + 1.0) * total) };
            }
            return;
        }
        let mut l = age;
        while l > 1 && self.tail(a, l) <= 0.0 {
            l -= 1;
        }
        let t = self.tail(a, l);
        for b in 0..n {
            out[b] = if b == a { self.tail(a, l + 1) / t } else { self.p(a, b, l) / t };
        }
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= s);
    }

    /// Kernel of the chain that forgets jumps to the same state. Returns a clone when
    /// there are no self-transitions, otherwise a finite-support kernel truncated where
    /// the remaining mass drops below `1e-15` and renormalised.
    pub fn true_jumps(&self) -> Result<SemiMarkovKernel> {
        if !self.has_self_loops() {
            return Ok(self.clone());
        }
        let n = self.states;
        let mut out: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
        let mut horizon = 1;
        for a in 0..n {
            let stay = self.jump_prob(a, a);
            if stay >= 1.0 - 1e-15 {
                return Err(VlmcError::AbsorbingSelfLoop(a));
            }
            let self_p: Vec<f64> = (1..=TRUE_JUMPS_HORIZON).map(|i| self.p(a, a, i)).collect();
            let self_len = self_p.iter().rposition(|&x| x > 0.0).map_or(0, |i| i + 1);
            let mut captured = 0.0;
            let mut k = 0;
            while k < TRUE_JUMPS_HORIZON && (k == 0 || 1.0 - captured > TRUE_JUMPS_EPS) {
                k += 1;
                for b in (0..n).filter(|&b| b != a) {
                    let mut v = self.p(a, b, k);
                    for i in 1..k.min(self_len + 1) {
                        v += self_p[i - 1] * out[a][b][k - i - 1];
                    }
                    out[a][b].push(v);
                    captured += v;
                }
            }
            out[a][a] = vec![0.0; k];
            for b in 0..n {
                out[a][b].iter_mut().for_each(|x| *x /= captured);
            }
            horizon = horizon.max(k);
        }
        for v in out.iter_mut().flatten() {
            v.resize(horizon, 0.0);
        }
        SemiMarkovKernel::new(n, KernelRepr::FiniteSupport { p: out })
    }

    /// Mean sojourn time per state.
    pub fn sojourn_means(&self) -> SojournSummary {
        let n = self.states;
        let m = (0..n)
            .map(|a| match &self.repr {
                KernelRepr::FiniteSupport { p } => Some(
                    (0..n).map(|b| p[a][b].iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum::<f64>()).sum(),
                ),
                KernelRepr::GeometricTail { head, ratio } => {
                    let mut s = 0.0;
                    for b in 0..n {
                        let v = &head[a][b];
                        let h = v.len() as f64;
                        let r = ratio[a][b];
                        s += v.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum::<f64>();
                        s += v[v.len() - 1] * (h * r / (1.0 - r) + r / ((1.0 - r) * (1.0 - r)));
                    }
                    Some(s)
                }
                KernelRepr::HarmonicTail { w } => {
                    if w[a].iter().any(|&x| x > 0.0) {
                        None
                    } else {
                        Some(0.0)
                    }
                }
            })
            .collect();
        SojournSummary { m }
    }

    /// Limit distribution criterion: with true jumps and a positive kernel, a limit
    /// exists iff every mean sojourn time is finite.
    pub fn limit_distribution_verdict(&self) -> Result<LimitVerdict> {
        let k = self.true_jumps()?;
        if !k.positivity() {
            return Ok(LimitVerdict::Unknown {
                note: "positivity fails (some p_{a,b}(k) = 0 with a != b); finite means are then only sufficient".into(),
            });
        }
        let m = k.sojourn_means().m;
        let inf: Vec<usize> = (0..m.len()).filter(|&a| m[a].is_none()).collect();
        Ok(if inf.is_empty() { LimitVerdict::HasLimit } else { LimitVerdict::NoLimit { infinite_states: inf } })
    }

    /// Samples `(next state, sojourn length)` from `p_{a,·}(·)`.
    pub fn sample_jump<R: Rng>(&self, a: usize, rng: &mut R) -> (usize, usize) {
        let n = self.states;
        let u: f64 = rng.random();
        match &self.repr {
            KernelRepr::FiniteSupport { p } => {
                let mut acc = 0.0;
                let mut last = (0, 1);
                for k in 0..p[a][0].len() {
                    for b in 0..n {
                        let x = p[a][b][k];
                        if x > 0.0 {
                            acc += x;
                            last = (b, k + 1);
                            if u < acc {
                                return last;
                            }
                        }
                    }
                }
                last
            }
            KernelRepr::GeometricTail { head, ratio } => {
                let h = head[a][0].len();
                let mut acc = 0.0;
                let mut last = (0, 1);
                for k in 0..h {
                    for b in 0..n {
                        let x = head[a][b][k];
                        if x > 0.0 {
                            acc += x;
                            last = (b, k + 1);
                            if u < acc {
                                return last;
                            }
                        }
                    }
                }
                for b in 0..n {
                    let r = ratio[a][b];
                    let x = head[a][b][h - 1] * r / (1.0 - r);
                    if x > 0.0 {
                        acc += x;
                        if u < acc || b == n - 1 {
                            // geometric number of extra steps, P(j) = (1-r) r^(j-1)
                            let v: f64 = 1.0 - rng.random::<f64>();
                            let j = 1 + (v.ln() / r.ln()).floor() as usize;
                            return (b, h + j);
                        }
                    }
                }
                last
            }
            KernelRepr::HarmonicTail { w } => {
                let total: f64 = w[a].iter().sum();
                let mut acc = 0.0;
                let mut b = n - 1;
                for (i, &x) in w[a].iter().enumerate() {
                    acc += x / total;
                    if u < acc {
                        b = i;
                        break;
                    }
                }
                let v: f64 = 1.0 - rng.random::<f64>();
                let k = (1.0 / v).floor().min(1e15) as usize;
                (b, k.max(1))
            }
        }
    }

    /// A random kernel without self-transitions: geometric tails after a head of
    /// length `head_len`, all masses positive.
    pub fn random_geometric(states: usize, head_len: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_len = head_len.max(1);
        let mut head = vec![vec![vec![0.0; head_len]; states]; states];
        let mut ratio = vec![vec![0.0; states]; states];
        for a in 0..states {
            let mut total = 0.0;
            for b in (0..states).filter(|&b| b != a) {
                for k in 0..head_len {
                    head[a][b][k] = 0.1 + rng.random::<f64>();
                }
                ratio[a][b] = 0.2 + 0.6 * rng.random::<f64>();
                let v = &head[a][b];
                total += v.iter().sum::<f64>() + v[head_len - 1] * ratio[a][b] / (1.0 - ratio[a][b]);
            }
            for b in 0..states {
                head[a][b].iter_mut().for_each(|x| *x /= total);
            }
        }
        SemiMarkovKernel::new(states, KernelRepr::GeometricTail { head, ratio })
    }

    /// A random finite-support kernel, optionally with self-transitions.
    pub fn random_finite(states: usize, k_max: usize, self_loops: bool, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![vec![vec![0.0; k_max]; states]; states];
        for a in 0..states {
            let mut total = 0.0;
            for b in 0..states {
                if b == a && !self_loops {
                    continue;
                }
                let scale = if b == a { 0.4 } else { 1.0 };
                for k in 0..k_max {
                    let x = scale * (0.05 + rng.random::<f64>());
                    p[a][b][k] = x;
                    total += x;
                }
            }
            p[a].iter_mut().flatten().for_each(|x| *x /= total);
        }
        SemiMarkovKernel::new(states, KernelRepr::FiniteSupport { p })
    }

    /// Harmonic-tail kernel with jump weights `w` (rows sum to 1, zero diagonal).
    pub fn harmonic(w: Vec<Vec<f64>>) -> Result<Self> {
        SemiMarkovKernel::new(w.len(), KernelRepr::HarmonicTail { w })
    }
}

/// The b-comb probabilised by the hazards of a kernel with true jumps.
pub fn smc_to_vlmc(kernel: &SemiMarkovKernel) -> Result<ProbabilisedTree> {
    if kernel.has_self_loops() {
        return Err(VlmcError::InvalidKernel(
            "the embedding needs true jumps; apply true_jumps first".into(),
        ));
    }
    let tree = ContextTree::Zoo(ZooEntry::BComb { b: kernel.states() });
    ProbabilisedTree::new(tree, QRule::SemiMarkov { kernel: kernel.clone() })
}

/// Kernel `p_{αs,βt}(k)` of the semi-Markov chain induced by a stable tree, read off the fibers:
/// `p_{αs,βt}(k) = Σ casc(βc)` over fiber contexts `c` of `αs` of length `|αs| + k − 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedKernel {
    pub index: Vec<Word>,
    /// `p[i][j][k-1]` for `k ≤ levels`.
    pub p: Vec<Vec<Vec<f64>>>,
    /// `P(T > levels | J = index[i])`.
    pub tail: Vec<f64>,
    /// Mass per row sent to alpha-LIS outside the index.
    pub outside: Vec<f64>,
    pub truncation: Option<Truncation>,
}

impl InducedKernel {
    pub fn position(&self, w: &Word) -> Option<usize> {
        self.index.iter().position(|x| x == w)
    }

    /// `p_{from,to}(k)`, zero beyond the computed levels.
    pub fn get(&self, from: &Word, to: &Word, k: usize) -> Option<f64> {
        let (i, j) = (self.position(from)?, self.position(to)?);
        Some(if k == 0 { 0.0 } else { self.p[i][j].get(k - 1).copied().unwrap_or(0.0) })
    }

    /// `Σ_k p_{from,to}(k)` over the computed levels.
    pub fn jump_prob(&self, i: usize, j: usize) -> f64 {
        compensated_sum(self.p[i][j].iter().copied())
    }

    /// The same kernel as a finite-support [`SemiMarkovKernel`] on the index; needs a
    /// complete index and zero tails.
    pub fn to_semi_markov(&self) -> Result<SemiMarkovKernel> {
        if self.truncation.is_some() || self.tail.iter().chain(&self.outside).any(|&x| x > 1e-15) {
            return Err(VlmcError::InvalidKernel("induced kernel has mass beyond the computed levels or index".into()));
        }
        let k = self.p.iter().flatten().map(|v| v.iter().rposition(|&x| x > 0.0).map_or(0, |i| i + 1)).max().unwrap_or(0);
        let p: Vec<Vec<Vec<f64>>> = self.p.iter().map(|r| r.iter().map(|v| v[..k.max(1)].to_vec()).collect()).collect();
        let n = p.len();
        let mut p = p;
        for row in p.iter_mut() {
            let total: f64 = row.iter().flatten().sum();
            row.iter_mut().flatten().for_each(|x| *x /= total);
        }
        SemiMarkovKernel::new(n, KernelRepr::FiniteSupport { p })
    }
}

/// Induced semi-Markov kernel of a stable probabilised tree over `params.levels` sojourn lengths.
pub fn induced_kernel(pt: &ProbabilisedTree, params: QParams) -> Result<InducedKernel> {
    if !is_stable(pt.tree(), 12).is_stable() {
        return Err(VlmcError::Param("the induced semi-Markov chain needs a stable tree".into()));
    }
    if params.trunc == 0 || params.levels == 0 {
        return Err(VlmcError::Param("trunc and levels must be positive".into()));
    }
    let set = alpha_lis_set(pt.tree(), params.depth);
    let mut index = set.entries().to_vec();
    index.sort();
    let mut truncation = (!set.is_finite())
        .then(|| Truncation { n: index.len().min(params.trunc), note: format!("alpha-LIS listed up to length {}", params.depth) });
    if index.len() > params.trunc {
        index.truncate(params.trunc);
        truncation = Some(Truncation { n: params.trunc, note: format!("first {} alpha-LIS kept", params.trunc) });
    }
    let max_len = index.iter().map(Word::len).max().unwrap_or(1);
    let engine = FiberEngine::new(pt, max_len + params.levels);
    let rows = index
        .par_iter()
        .map(|a| level_contributions(pt, &engine, &set, a, params.levels))
        .collect::<Result<Vec<_>>>()?;
    let n = index.len();
    let mut p = vec![vec![vec![0.0; params.levels]; n]; n];
    let mut tail = Vec::with_capacity(n);
    let mut outside = vec![0.0; n];
    for (i, (contrib, kappa)) in rows.into_iter().enumerate() {
        for (col, v) in contrib {
            match index.binary_search(&col) {
                Ok(j) => p[i][j] = v,
                Err(_) => outside[i] += compensated_sum(v.into_iter()),
            }
        }
        tail.push(kappa.get(params.levels).copied().unwrap_or(0.0));
    }
    Ok(InducedKernel { index, p, tail, outside, truncation })
}

/// Letter process of a semi-Markov chain: the current state repeated for each step of its sojourn.
#[derive(Debug, Clone)]
pub struct SmcLetters<'a> {
    kernel: &'a SemiMarkovKernel,
    rng: ChaCha8Rng,
    state: usize,
    next: usize,
    remaining: usize,
}

impl<'a> SmcLetters<'a> {
    /// Starts at a jump into `state`.
    pub fn new(kernel: &'a SemiMarkovKernel, state: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let (next, t) = kernel.sample_jump(state, &mut rng);
        SmcLetters { kernel, rng, state, next, remaining: t }
    }

    pub fn step(&mut self) -> u8 {
        if self.remaining == 0 {
            self.state = self.next;
            let (next, t) = self.kernel.sample_jump(self.state, &mut self.rng);
            self.next = next;
            self.remaining = t;
        }
        self.remaining -= 1;
        self.state as u8
    }
}

/// Frequencies of length-`window` letter windows of the directly simulated semi-Markov chain.
pub fn smc_window_freqs(kernel: &SemiMarkovKernel, steps: u64, window: usize, seed: u64, stream: u64, burn_in: u64) -> BTreeMap<Word, f64> {
    let mut letters = SmcLetters::new(kernel, 0, seed, stream);
    let mut counter = WindowCounter::new(kernel.states(), window);
    for _ in 0..burn_in.max(window as u64) {
        counter.shift(letters.step());
    }
    for _ in 0..steps {
        counter.shift(letters.step());
        counter.record();
    }
    counter.frequencies()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundtripConfig {
    pub steps: u64,
    pub window: usize,
    pub seed: u64,
    pub sim: SimConfig,
    pub levels: usize,
    pub series_tol: f64,
}

impl Default for RoundtripConfig {
    fn default() -> Self {
        RoundtripConfig { steps: 1_000_000, window: 3, seed: 0, sim: SimConfig::default(), levels: 512, series_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaVsMean {
    pub alpha_lis: Word,
    pub kappa: Option<f64>,
    pub m: Option<f64>,
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub window: usize,
    pub steps: u64,
    /// TV between the letter windows of the comb VLMC and of the direct simulation.
    pub tv: f64,
    /// Largest TV between two replicas of the same simulator.
    pub replica_tv: f64,
    /// `3 · replica_tv`.
    pub threshold: f64,
    pub tv_pass: bool,
    pub kappa_vs_m: Vec<KappaVsMean>,
    pub max_kappa_diff: Option<f64>,
    pub limit_verdict: LimitVerdict,
    pub stationary_outcome: Outcome,
    /// `None` when the limit criterion does not apply (positivity fails).
    pub verdicts_agree: Option<bool>,
}

/// Compares the kernel's direct simulation with the simulation of its comb VLMC, the cascade
/// series of the comb with the mean sojourn times, and the two existence verdicts.
pub fn roundtrip_check(kernel: &SemiMarkovKernel, cfg: RoundtripConfig) -> Result<RoundtripReport> {
    let k = kernel.true_jumps()?;
    let pt = smc_to_vlmc(&k)?;
    let b = k.states();
    let init = InitialState::ContextAnchor { context: Word::from_letters(vec![0, 1]) };
    let vlmc: Vec<BTreeMap<Word, f64>> = cylinder_freqs_replicas(&pt, &init, cfg.steps, cfg.window, cfg.seed, 2, cfg.sim)?;
    let smc: Vec<BTreeMap<Word, f64>> = (0..2u64)
        .into_par_iter()
        .map(|r| smc_window_freqs(&k, cfg.steps, cfg.window, cfg.seed ^ 0x5eed_5eed, r, cfg.sim.burn_in))
        .collect();
    let tv = tv_distance(&vlmc[0], &smc[0]);
    let replica_tv = tv_distance(&vlmc[0], &vlmc[1]).max(tv_distance(&smc[0], &smc[1]));
    let threshold = 3.0 * replica_tv;

    let means = k.sojourn_means().m;
    let mut kappa_vs_m = Vec::new();
    for a in 0..b {
        for c in (0..b).filter(|&c| c != a) {
            let w = Word::from_letters(vec![a as u8, c as u8]);
            let r = kappa(&pt, &w, cfg.levels, cfg.series_tol)?;
            let diff = r.total.zip(means[a]).map(|(x, y)| (x - y).abs());
            kappa_vs_m.push(KappaVsMean { alpha_lis: w, kappa: r.total, m: means[a], diff });
        }
    }
    let max_kappa_diff = kappa_vs_m.iter().map(|x| x.diff).try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)));

    let limit_verdict = k.limit_distribution_verdict()?;
    let stationary_outcome = if pt.is_non_null() {
        verdict(&pt)?.outcome
    } else {
        Outcome::Unknown { reasons: vec!["comb probabilisation is not non-null (finite-support kernel)".into()] }
    };
    let verdicts_agree = match &limit_verdict {
        LimitVerdict::Unknown { .. } => None,
        LimitVerdict::HasLimit => Some(stationary_outcome == Outcome::UniqueStationary),
        LimitVerdict::NoLimit { .. } => Some(matches!(stationary_outcome, Outcome::NoStationary { .. })),
    };
    Ok(RoundtripReport {
        window: cfg.window,
        steps: cfg.steps,
        tv,
        replica_tv,
        threshold,
        tv_pass: tv <= threshold,
        kappa_vs_m,
        max_kappa_diff,
        limit_verdict,
        stationary_outcome,
        verdicts_agree,
    })
}
