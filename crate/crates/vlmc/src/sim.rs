//! Simulation of the chain, of its context process and of the induced semi-Markov chain.

use crate::error::{Result, VlmcError};
use crate::prob::ProbabilisedTree;
use crate::tree::{is_stable, ContextTree};
use crate::word::Word;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub burn_in: u64,
    /// Letters of history kept in periodic-seed mode.
    pub history_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { burn_in: 1000, history_cap: 1_000_000 }
    }
}

/// How the infinite past of the initial state is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitialState {
    /// A uniformly chosen finite context (anchored on stable trees, else followed by `0^∞`).
    RandomContext,
    /// Stable trees only: the chain is tracked through its context.
    ContextAnchor { context: Word },
    /// `prefix · period^∞`, most recent letter first.
    PeriodicSeed { prefix: Word, period: Word },
}

/// Front-growing history buffer followed by a materialised periodic tail.
#[derive(Debug, Clone)]
struct History {
    data: Vec<u8>,
    start: usize,
    period: Vec<u8>,
    /// Phase of the next tail letter to append.
    phase: usize,
    cap: usize,
    truncated: bool,
}

impl History {
    fn new(prefix: &[u8], period: &[u8], cap: usize) -> Self {
        let mut h = History { data: Vec::with_capacity(1024), start: 0, period: period.to_vec(), phase: 0, cap, truncated: false };
        h.data.extend_from_slice(prefix);
        h.extend_tail(64);
        h
    }

    fn slice(&self) -> &[u8] {
        &self.data[self.start..]
    }

    fn extend_tail(&mut self, n: usize) {
        for _ in 0..n {
            self.data.push(self.period[self.phase]);
            self.phase = (self.phase + 1) % self.period.len();
        }
    }

    fn push_front(&mut self, a: u8) {
        if self.start == 0 {
            let len = self.data.len();
            let extra = len.max(1024);
            let mut d = vec![0u8; extra + len];
            d[extra..].copy_from_slice(&self.data);
            self.data = d;
            self.start = extra;
        }
        self.start -= 1;
        self.data[self.start] = a;
        if self.data.len() - self.start > 2 * self.cap {
            self.data.truncate(self.start + self.cap);
            self.truncated = true;
        }
    }

    /// Length of `cont` of the stored word, extending the tail when needed.
    fn cont_len(&mut self, tree: &ContextTree) -> Result<usize> {
        loop {
            let s = self.slice();
            let n = tree.internal_prefix_len(s);
            if n < s.len() {
                return Ok(n + 1);
            }
            if self.truncated {
                return Err(VlmcError::Simulation(format!(
                    "cont lookup needs more than the {} stored letters of history",
                    s.len()
                )));
            }
            if s.len() > self.cap {
                return Err(VlmcError::Simulation(format!(
                    "no finite context within {} letters of the periodic past (infinite context)",
                    self.cap
                )));
            }
            let n = s.len().max(64);
            self.extend_tail(n);
        }
    }
}

#[derive(Debug, Clone)]
enum Mode {
    Anchor { ctx: Vec<u8> },
    Periodic { hist: History, ctx_len: usize },
}

/// One trajectory of the chain.
#[derive(Debug, Clone)]
pub struct Simulator {
    pt: ProbabilisedTree,
    mode: Mode,
    rng: ChaCha8Rng,
    steps: u64,
    q: Vec<f64>,
}

impl Simulator {
    /// `stream` selects an independent replica for the same `seed`.
    pub fn new(pt: &ProbabilisedTree, init: &InitialState, seed: u64, stream: u64, cfg: SimConfig) -> Result<Self> {
        let tree = pt.tree();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let stable = is_stable(tree, 12).is_stable();
        let init = match init {
            InitialState::RandomContext => {
                let depth = tree.height().unwrap_or(8).min(8);
                let mut cs = tree.contexts_up_to(depth);
                if cs.is_empty() {
                    cs = tree.contexts_up_to(tree.height().unwrap_or(32));
                }
                if cs.is_empty() {
                    return Err(VlmcError::Simulation("no finite context to start from".into()));
                }
                let c = cs[rng.random_range(0..cs.len())].clone();
                if stable {
                    InitialState::ContextAnchor { context: c }
                } else {
                    InitialState::PeriodicSeed { prefix: c, period: Word::from_letters(vec![0]) }
                }
            }
            other => other.clone(),
        };
        let mode = match init {
            InitialState::ContextAnchor { context } => {
                if !stable {
                    return Err(VlmcError::Simulation("context-anchored simulation needs a stable tree".into()));
                }
                tree.alphabet().check(context.as_slice())?;
                if tree.cont_len(context.as_slice()) != Some(context.len()) {
                    return Err(VlmcError::Simulation(format!("{context} is not a context")));
                }
                Mode::Anchor { ctx: context.into_vec() }
            }
            InitialState::PeriodicSeed { prefix, period } => {
                tree.alphabet().check(prefix.as_slice())?;
                tree.alphabet().check(period.as_slice())?;
                if period.is_empty() {
                    return Err(VlmcError::Simulation("empty period".into()));
                }
                let mut hist = History::new(prefix.as_slice(), period.as_slice(), cfg.history_cap.max(16));
                let ctx_len = hist.cont_len(tree)?;
                Mode::Periodic { hist, ctx_len }
            }
            InitialState::RandomContext => unreachable!(),
        };
        let b = tree.alphabet().size();
        let mut sim = Simulator { pt: pt.clone(), mode, rng, steps: 0, q: vec![0.0; b] };
        for _ in 0..cfg.burn_in {
            sim.step()?;
        }
        sim.steps = 0;
        Ok(sim)
    }

    /// Current context `C_n`.
    pub fn context(&self) -> &[u8] {
        match &self.mode {
            Mode::Anchor { ctx } => ctx,
            Mode::Periodic { hist, ctx_len } => &hist.slice()[..*ctx_len],
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Samples the next letter from `q_{C_n}` and updates the context.
    pub fn step(&mut self) -> Result<u8> {
        let tree = self.pt.tree();
        let ctx = match &self.mode {
            Mode::Anchor { ctx } => ctx.as_slice(),
            Mode::Periodic { hist, ctx_len } => &hist.slice()[..*ctx_len],
        };
        self.pt.q_into(ctx, &mut self.q)?;
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut letter = None;
        for (a, &p) in self.q.iter().enumerate() {
            acc += p;
            if p > 0.0 {
                letter = Some(a as u8);
                if u < acc {
                    break;
                }
            }
        }
        let a = letter.ok_or_else(|| VlmcError::Simulation("zero probability row".into()))?;
        match &mut self.mode {
            Mode::Anchor { ctx } => {
                ctx.insert(0, a);
                let n = tree.internal_prefix_len(ctx);
                if n >= ctx.len() {
                    return Err(VlmcError::Simulation("letter·context is internal (tree not stable)".into()));
                }
                ctx.truncate(n + 1);
            }
            Mode::Periodic { hist, ctx_len } => {
                hist.push_front(a);
                *ctx_len = hist.cont_len(tree)?;
            }
        }
        self.steps += 1;
        Ok(a)
    }
}

/// Time-averaged frequencies of the length-`depth` prefixes over `steps` steps (after burn-in).
/// Every word of that length is listed.
pub fn simulate_cylinder_freqs(
    pt: &ProbabilisedTree,
    init: &InitialState,
    steps: u64,
    depth: usize,
    seed: u64,
    cfg: SimConfig,
) -> Result<BTreeMap<Word, f64>> {
    cylinder_freqs_stream(pt, init, steps, depth, seed, 0, cfg)
}

fn cylinder_freqs_stream(
    pt: &ProbabilisedTree,
    init: &InitialState,
    steps: u64,
    depth: usize,
    seed: u64,
    stream: u64,
    cfg: SimConfig,
) -> Result<BTreeMap<Word, f64>> {
    if steps == 0 {
        return Ok(BTreeMap::new());
    }
    let mut sim = Simulator::new(pt, init, seed, stream, cfg)?;
    let mut counter = WindowCounter::new(pt.tree().alphabet().size(), depth);
    for _ in 0..depth {
        counter.shift(sim.step()?);
    }
    for _ in 0..steps {
        counter.shift(sim.step()?);
        counter.record();
    }
    Ok(counter.frequencies())
}

/// Counts of the last `depth` letters, most recent letter first.
#[derive(Debug, Clone)]
pub(crate) struct WindowCounter {
    b: usize,
    depth: usize,
    lead: usize,
    code: usize,
    counts: Vec<u64>,
    total: u64,
}

impl WindowCounter {
    pub(crate) fn new(b: usize, depth: usize) -> Self {
        let size = b.pow(depth as u32);
        WindowCounter { b, depth, lead: size / b, code: 0, counts: vec![0; size], total: 0 }
    }

    pub(crate) fn shift(&mut self, a: u8) {
        if self.depth > 0 {
            self.code = self.code / self.b + a as usize * self.lead;
        }
    }

    pub(crate) fn record(&mut self) {
        self.counts[self.code] += 1;
        self.total += 1;
    }

    pub(crate) fn frequencies(&self) -> BTreeMap<Word, f64> {
        if self.total == 0 {
            return BTreeMap::new();
        }
        let mut out = BTreeMap::new();
        for (i, &c) in self.counts.iter().enumerate() {
            let mut letters = Vec::with_capacity(self.depth);
            let mut x = i;
            let mut place = self.lead;
            for _ in 0..self.depth {
                letters.push((x / place) as u8);
                x %= place;
                place /= self.b;
            }
            out.insert(Word::from_letters(letters), c as f64 / self.total as f64);
        }
        out
    }
}

/// Cylinder frequencies of independent replicas (stream = replica index), in parallel.
pub fn cylinder_freqs_replicas(
    pt: &ProbabilisedTree,
    init: &InitialState,
    steps: u64,
    depth: usize,
    seed: u64,
    replicas: usize,
    cfg: SimConfig,
) -> Result<Vec<BTreeMap<Word, f64>>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| cylinder_freqs_stream(pt, init, steps, depth, seed, r, cfg))
        .collect()
}

/// Total variation distance between two distributions on words (missing keys count as 0).
pub fn tv_distance(a: &BTreeMap<Word, f64>, b: &BTreeMap<Word, f64>) -> f64 {
    let mut s = 0.0;
    for (k, x) in a {
        s += (x - b.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, y) in b {
        if !a.contains_key(k) {
            s += y.abs();
        }
    }
    0.5 * s
}

/// One jump of the induced semi-Markov chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Jump {
    /// Jump time `S_n`.
    pub s: u64,
    /// Index of `J_n` in [`RenewalTrace::states`].
    pub state: usize,
    /// Sojourn `T_n = S_n − S_{n−1}`.
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTrace {
    pub states: Vec<Word>,
    /// `jumps[0]` is the initial state at time 0 with `t = 0`.
    pub jumps: Vec<Jump>,
    /// `Z_n` per step, when requested.
    pub z_path: Option<Vec<usize>>,
    /// Steps where the length-drop and membership definitions of jump times disagree
    /// (`None` on non-stable trees, where only membership is used).
    pub disagreements: Option<u64>,
}

/// Online extraction of `(S_n, J_n, T_n)` from the context process.
#[derive(Debug, Clone)]
pub struct RenewalTracker {
    tree: ContextTree,
    stable: bool,
    ids: HashMap<Word, usize>,
    trace: RenewalTrace,
    last_len: usize,
    last_jump: u64,
    current: usize,
    step: u64,
}

impl RenewalTracker {
    /// Starts from the finite context `C_0`.
    pub fn new(tree: &ContextTree, c0: &[u8], keep_path: bool) -> Self {
        let stable = is_stable(tree, 12).is_stable();
        let mut t = RenewalTracker {
            tree: tree.clone(),
            stable,
            ids: HashMap::new(),
            trace: RenewalTrace { states: Vec::new(), jumps: Vec::new(), z_path: keep_path.then(Vec::new), disagreements: stable.then_some(0) },
            last_len: c0.len(),
            last_jump: 0,
            current: 0,
            step: 0,
        };
        let p = crate::suffix::alpha_lis_start(tree, c0);
        let z0 = t.id(&c0[p..]);
        t.current = z0;
        t.trace.jumps.push(Jump { s: 0, state: z0, t: 0 });
        if let Some(z) = &mut t.trace.z_path {
            z.push(z0);
        }
        t
    }

    fn id(&mut self, w: &[u8]) -> usize {
        let w = Word::from(w);
        if let Some(&i) = self.ids.get(&w) {
            return i;
        }
        let i = self.trace.states.len();
        self.trace.states.push(w.clone());
        self.ids.insert(w, i);
        i
    }

    /// Feeds `C_{n+1}`.
    pub fn push(&mut self, c: &[u8]) {
        self.step += 1;
        let member = !c.is_empty() && self.tree.is_internal(&c[1..]);
        let drop = c.len() <= self.last_len;
        if let Some(d) = &mut self.trace.disagreements {
            if member != drop {
                *d += 1;
            }
        }
        self.last_len = c.len();
        if member {
            let j = self.id(c);
            self.trace.jumps.push(Jump { s: self.step, state: j, t: self.step - self.last_jump });
            self.last_jump = self.step;
            self.current = j;
        } else if !self.stable {
            // on non-stable trees Z_n is recomputed from the context
            let p = crate::suffix::alpha_lis_start(&self.tree, c);
            self.current = self.id(&c[p..]);
        }
        if let Some(z) = &mut self.trace.z_path {
            z.push(self.current);
        }
    }

    pub fn finish(self) -> RenewalTrace {
        self.trace
    }
}

/// Runs `steps` steps and extracts the renewal trace of the context process.
pub fn simulate_renewal(
    pt: &ProbabilisedTree,
    init: &InitialState,
    steps: u64,
    seed: u64,
    stream: u64,
    cfg: SimConfig,
    keep_path: bool,
) -> Result<RenewalTrace> {
    let mut sim = Simulator::new(pt, init, seed, stream, cfg)?;
    let mut tr = RenewalTracker::new(pt.tree(), sim.context(), keep_path);
    for _ in 0..steps {
        sim.step()?;
        tr.push(sim.context());
    }
    Ok(tr.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `k` successes out of `n` at two-sided confidence `level`.
pub fn wilson_interval(k: u64, n: u64, level: f64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    let (n, p) = (n as f64, k as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at the extremes
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    Interval { lo, hi }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCell {
    pub from: Word,
    pub to: Word,
    pub k: u64,
    pub count: u64,
    pub n_from: u64,
    pub p_hat: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SojournStat {
    pub state: Word,
    pub n: u64,
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalKernel {
    pub level: f64,
    pub cells: Vec<KernelCell>,
    pub sojourn: Vec<SojournStat>,
}

impl EmpiricalKernel {
    pub fn cell(&self, from: &Word, to: &Word, k: u64) -> Option<&KernelCell> {
        self.cells.iter().find(|c| &c.from == from && &c.to == to && c.k == k)
    }

    pub fn sojourn_of(&self, state: &Word) -> Option<&SojournStat> {
        self.sojourn.iter().find(|s| &s.state == state)
    }

    /// Estimated `P(T ≥ k | J = state)`.
    pub fn survival(&self, state: &Word, k: u64) -> Option<f64> {
        let n = self.sojourn_of(state)?.n;
        let c: u64 = self.cells.iter().filter(|c| &c.from == state && c.k >= k).map(|c| c.count).sum();
        Some(c as f64 / n as f64)
    }
}

/// Kernel estimate `p̂_{a,b}(k)` from the transitions after the first jump (the first sojourn is censored).
pub fn empirical_kernel(rt: &RenewalTrace, min_jumps: usize, level: f64) -> Result<EmpiricalKernel> {
    let usable = rt.jumps.len().saturating_sub(2);
    if usable < min_jumps.max(1) {
        return Err(VlmcError::InsufficientData(format!("{usable} usable jumps, {min_jumps} required")));
    }
    let mut counts: BTreeMap<(usize, usize, u64), u64> = BTreeMap::new();
    let mut per_state: HashMap<usize, (u64, f64, f64)> = HashMap::new();
    for w in rt.jumps[1..].windows(2) {
        let (a, b, t) = (w[0].state, w[1].state, w[1].t);
        *counts.entry((a, b, t)).or_default() += 1;
        let e = per_state.entry(a).or_default();
        e.0 += 1;
        e.1 += t as f64;
        e.2 += (t as f64) * (t as f64);
    }
    let cells = counts
        .into_iter()
        .map(|((a, b, k), count)| {
            let n_from = per_state[&a].0;
            KernelCell {
                from: rt.states[a].clone(),
                to: rt.states[b].clone(),
                k,
                count,
                n_from,
                p_hat: count as f64 / n_from as f64,
                ci: wilson_interval(count, n_from, level),
            }
        })
        .collect();
    let mut sojourn: Vec<SojournStat> = per_state
        .into_iter()
        .map(|(a, (n, s, s2))| {
            let nf = n as f64;
            let mean = s / nf;
            let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { f64::NAN };
            SojournStat { state: rt.states[a].clone(), n, mean, se: (var / nf).sqrt() }
        })
        .collect();
    sojourn.sort_by(|x, y| x.state.cmp(&y.state));
    Ok(EmpiricalKernel { level, cells, sojourn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{cascade, kappa};
    use crate::prob::QRule;
    use crate::stationary::{stationary, StationaryConfig};
    use crate::word::w;

    fn uniform(n: &str) -> ProbabilisedTree {
        ProbabilisedTree::uniform(ContextTree::zoo(n).unwrap())
    }

    fn letters(pt: &ProbabilisedTree, init: &InitialState, seed: u64, stream: u64, n: usize) -> Vec<u8> {
        letters_with(pt, init, seed, stream, n, SimConfig::default())
    }

    fn letters_with(pt: &ProbabilisedTree, init: &InitialState, seed: u64, stream: u64, n: usize, cfg: SimConfig) -> Vec<u8> {
        let mut s = Simulator::new(pt, init, seed, stream, cfg).unwrap();
        (0..n).map(|_| s.step().unwrap()).collect()
    }

    #[test]
    fn seeded_determinism() {
        let pt = ProbabilisedTree::random(ContextTree::zoo("lc_of_rc_cherry").unwrap(), 3);
        let init = InitialState::RandomContext;
        assert_eq!(letters(&pt, &init, 42, 0, 10_000), letters(&pt, &init, 42, 0, 10_000));
        assert_ne!(letters(&pt, &init, 42, 0, 1000), letters(&pt, &init, 42, 1, 1000));
    }

    #[test]
    fn anchor_and_periodic_modes_agree() {
        let pt = ProbabilisedTree::random(ContextTree::zoo("lc_of_rc").unwrap(), 8);
        let cfg = SimConfig { burn_in: 0, ..SimConfig::default() };
        let c = w("0110");
        assert_eq!(pt.tree().cont(&c).unwrap(), c);
        let mut a = Simulator::new(&pt, &InitialState::ContextAnchor { context: c.clone() }, 5, 0, cfg).unwrap();
        let mut p = Simulator::new(&pt, &InitialState::PeriodicSeed { prefix: c, period: w("1") }, 5, 0, cfg).unwrap();
        for _ in 0..20_000 {
            assert_eq!(a.step().unwrap(), p.step().unwrap());
            assert_eq!(a.context(), p.context());
        }
    }

    #[test]
    fn anchored_context_follows_cont() {
        let pt = ProbabilisedTree::random(ContextTree::zoo("double_bamboo").unwrap(), 1);
        let mut s = Simulator::new(&pt, &InitialState::RandomContext, 9, 0, SimConfig::default()).unwrap();
        for _ in 0..2000 {
            let before = Word::from(s.context());
            let a = s.step().unwrap();
            assert_eq!(s.context(), pt.tree().cont(&before.prepend(a)).unwrap().as_slice());
        }
    }

    #[test]
    fn history_limits_are_reported() {
        let lc = ContextTree::zoo("left_comb").unwrap();
        let pt = ProbabilisedTree::new(lc.clone(), QRule::CombStay { stay: 0.99 }).unwrap();
        let cfg = SimConfig { burn_in: 0, history_cap: 16 };
        let init = InitialState::PeriodicSeed { prefix: w("1"), period: w("1") };
        let mut s = Simulator::new(&pt, &init, 1, 0, cfg).unwrap();
        let err = (0..10_000).find_map(|_| s.step().err()).unwrap();
        assert!(matches!(err, VlmcError::Simulation(_)));
        let zero = InitialState::PeriodicSeed { prefix: Word::empty(), period: w("0") };
        assert!(Simulator::new(&ProbabilisedTree::uniform(lc), &zero, 1, 0, cfg).is_err());
        let bad = InitialState::ContextAnchor { context: w("0001") };
        assert!(Simulator::new(&uniform("bamboo_blossom"), &bad, 1, 0, cfg).is_err());
    }

    #[test]
    fn empty_run_and_frequencies() {
        let pt = uniform("lc_of_rc");
        let f = simulate_cylinder_freqs(&pt, &InitialState::RandomContext, 0, 3, 1, SimConfig::default()).unwrap();
        assert!(f.is_empty());
        let f = simulate_cylinder_freqs(&pt, &InitialState::RandomContext, 200_000, 3, 1, SimConfig::default()).unwrap();
        assert_eq!(f.len(), 8);
        assert!((f.values().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = stationary(&pt, StationaryConfig::default()).unwrap().measure.unwrap();
        let exact: BTreeMap<Word, f64> = f.keys().map(|k| (k.clone(), m.value(k).unwrap())).collect();
        assert!(tv_distance(&f, &exact) < 0.03);
    }

    #[test]
    fn frequency_encoding_matches_trajectory() {
        let pt = ProbabilisedTree::random(ContextTree::explicit(3, &["0", "1", "20", "21", "22"]).unwrap(), 2);
        let cfg = SimConfig { burn_in: 0, ..SimConfig::default() };
        let init = InitialState::PeriodicSeed { prefix: w("0"), period: w("0") };
        let f = simulate_cylinder_freqs(&pt, &init, 500, 2, 7, cfg).unwrap();
        let l = letters_with(&pt, &init, 7, 0, 502, cfg);
        let mut counts: BTreeMap<Word, f64> = BTreeMap::new();
        for t in 2..502 {
            *counts.entry(Word::from_letters(vec![l[t], l[t - 1]])).or_default() += 1.0 / 500.0;
        }
        for (k, v) in &counts {
            assert!((f[k] - v).abs() < 1e-12, "{k}");
        }
    }

    #[test]
    fn jump_definitions_agree_on_stable_trees() {
        for n in ["lc_of_rc_cherry", "nine_contexts", "arith_stable", "b_comb"] {
            let pt = ProbabilisedTree::random(ContextTree::zoo(n).unwrap(), 6);
            let rt = simulate_renewal(&pt, &InitialState::RandomContext, 50_000, 3, 0, SimConfig::default(), true).unwrap();
            assert_eq!(rt.disagreements, Some(0), "{n}");
            let z = rt.z_path.as_ref().unwrap();
            for pair in rt.jumps.windows(2) {
                assert!(pair[1].t >= 1 && pair[1].t == pair[1].s - pair[0].s);
                for j in pair[0].s..pair[1].s {
                    assert_eq!(z[j as usize], pair[0].state);
                }
            }
        }
    }

    #[test]
    fn every_context_its_own_alpha_lis() {
        let pt = ProbabilisedTree::uniform(ContextTree::explicit(2, &["0", "1"]).unwrap());
        let rt = simulate_renewal(&pt, &InitialState::RandomContext, 1000, 1, 0, SimConfig::default(), false).unwrap();
        assert!(rt.jumps[1..].iter().all(|j| j.t == 1));
    }

    #[test]
    fn semi_markov_tree_kernel_and_sojourns() {
        let pt = uniform("nine_contexts");
        let rt = simulate_renewal(&pt, &InitialState::RandomContext, 400_000, 11, 0, SimConfig::default(), false).unwrap();
        let k = empirical_kernel(&rt, 1000, 0.99).unwrap();
        let want = cascade(&pt, &w("10010")).unwrap() + cascade(&pt, &w("10110")).unwrap();
        assert_eq!(want, 0.25);
        let c = k.cell(&w("10"), &w("10"), 3).unwrap();
        assert!(c.ci.contains(want), "{c:?}");
        for s in &k.sojourn {
            let r = kappa(&pt, &s.state, 64, 1e-12).unwrap();
            assert!((s.mean - r.total.unwrap()).abs() <= 3.0 * s.se, "{s:?} vs {:?}", r.total);
            for lvl in 1..5u64 {
                let surv = k.survival(&s.state, lvl).unwrap();
                let ci = wilson_interval((surv * s.n as f64).round() as u64, s.n, 0.999);
                assert!(ci.contains(r.level_sums[lvl as usize - 1]), "{} level {lvl}", s.state);
            }
        }
        let total: f64 = k.cells.iter().filter(|c| c.from == w("10")).map(|c| c.p_hat).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(matches!(empirical_kernel(&rt, 10_000_000, 0.99), Err(VlmcError::InsufficientData(_))));
    }

    #[test]
    fn wilson_reference_values() {
        let i = wilson_interval(25, 100, 0.95);
        assert!((i.lo - 0.1755).abs() < 1e-3 && (i.hi - 0.3430).abs() < 1e-3);
        let i = wilson_interval(0, 10, 0.99);
        assert_eq!(i.lo, 0.0);
    }

    #[test]
    fn replicas_are_independent() {
        let pt = uniform("lc_of_rc_cherry");
        let r = cylinder_freqs_replicas(&pt, &InitialState::RandomContext, 20_000, 2, 4, 3, SimConfig::default()).unwrap();
        assert_eq!(r.len(), 3);
        assert!(r[0] != r[1] && r[1] != r[2]);
        let again = cylinder_freqs_stream(&pt, &InitialState::RandomContext, 20_000, 2, 4, 1, SimConfig::default()).unwrap();
        assert_eq!(again, r[1]);
    }
}
