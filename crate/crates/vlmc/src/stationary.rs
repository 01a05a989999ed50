//! Stationary-measure verdicts and evaluation of the stationary measure on cylinders.

use crate::cascade::{cascade_slice, CascadeReport, SeriesStatus};
use crate::error::{Result, VlmcError};
use crate::prob::{reprobabilise_stabilized, ProbabilisedTree};
use crate::qmatrix::{build_q, left_fixed_vector, FixedVector, QMatrix, QParams};
use crate::suffix::{alpha_lis_set, alpha_lis_start};
use crate::tree::{is_stable, stabilize, ContextTree, Stabilization};
use crate::word::Word;
use serde::Serialize;
use std::collections::HashMap;

/// Numerical settings of [`stationary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryConfig {
    pub q: QParams,
    pub solver_tol: f64,
    /// Context length up to which the measure evaluator enumerates contexts on infinite trees.
    pub measure_depth: usize,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        StationaryConfig { q: QParams::default(), solver_tol: 1e-12, measure_depth: 48 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    UniqueStationary,
    /// `caveat` is set when the conclusion rests on suspected (not proved) divergence.
    NoStationary { caveat: Option<String> },
    Unknown { reasons: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Certified,
    Failed,
    DivergenceSuspected,
    Undetermined,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Recurrence {
    /// Finite irreducible stochastic `Q`.
    AutomaticFiniteS,
    AssumedUnknown,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaSummary {
    pub alpha_lis: Word,
    pub total: Option<f64>,
    pub status: SeriesStatus,
}

impl From<&CascadeReport> for KappaSummary {
    fn from(r: &CascadeReport) -> Self {
        KappaSummary { alpha_lis: r.alpha_lis.clone(), total: r.total, status: r.status.clone() }
    }
}

/// The three conditions under which left-fixed vectors of `Q` give stationary measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditions {
    pub cascade_convergence: ConditionStatus,
    pub recurrence: Recurrence,
    /// Finiteness of `Σ v κ`.
    pub normalization: ConditionStatus,
    pub kappa: Vec<KappaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeClass {
    Finite,
    StableFiniteS,
    StableInfiniteS,
    Stabilizable,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryVerdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub tree_class: TreeClass,
    pub conditions: Conditions,
    /// Name of the stabilized tree the verdict was delegated to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delegated_to: Option<String>,
    pub notes: Vec<String>,
}

/// Verdict together with the objects computed on the way.
#[derive(Debug, Clone)]
pub struct StationaryAnalysis {
    pub verdict: StationaryVerdict,
    pub q: Option<QMatrix>,
    pub fixed_vector: Option<FixedVector>,
    pub measure: Option<Measure>,
}

fn cascade_condition(kappa: &[CascadeReport]) -> ConditionStatus {
    if kappa.iter().all(|r| r.is_converged()) {
        ConditionStatus::Certified
    } else if kappa.iter().any(|r| matches!(r.status, SeriesStatus::DivergenceSuspected { .. })) {
        ConditionStatus::DivergenceSuspected
    } else {
        ConditionStatus::Undetermined
    }
}

fn divergence_caveat(kappa: &[CascadeReport]) -> Option<String> {
    kappa.iter().find_map(|r| match &r.status {
        SeriesStatus::DivergenceSuspected { reason } => Some(format!("cascade series of {} suspected divergent: {reason}", r.alpha_lis)),
        _ => None,
    })
}

/// Level count up to which an undetermined cascade series on a finite alpha-LIS set is extended.
pub const MAX_ESCALATED_LEVELS: usize = 1024;

/// Decides existence and uniqueness of a stationary probability measure.
pub fn verdict(pt: &ProbabilisedTree) -> Result<StationaryVerdict> {
    Ok(stationary(pt, StationaryConfig::default())?.verdict)
}

/// Verdict, `Q`, fixed vector and, when unique, the stationary measure.
pub fn stationary(pt: &ProbabilisedTree, cfg: StationaryConfig) -> Result<StationaryAnalysis> {
    pt.require_non_null()?;
    let tree = pt.tree();
    if tree.is_finite() {
        let q = build_q(pt, cfg.q)?;
        let fv = left_fixed_vector(&q, q.kappa_totals().as_deref(), cfg.solver_tol)?;
        let measure = measure_from_vector(pt, &fv, cfg.measure_depth)?;
        let stable = is_stable(tree, 1).is_stable();
        let verdict = StationaryVerdict {
            outcome: Outcome::UniqueStationary,
            tree_class: TreeClass::Finite,
            conditions: Conditions {
                cascade_convergence: ConditionStatus::Certified,
                recurrence: if stable { Recurrence::AutomaticFiniteS } else { Recurrence::NotApplicable },
                normalization: ConditionStatus::Certified,
                kappa: q.kappa.iter().map(KappaSummary::from).collect(),
            },
            delegated_to: None,
            notes: vec!["finite context tree".into()],
        };
        return Ok(StationaryAnalysis { verdict, q: Some(q), fixed_vector: Some(fv), measure: Some(measure) });
    }
    if is_stable(tree, 12).is_stable() {
        return stable_analysis(pt, cfg);
    }
    match stabilize(tree, cfg.q.depth) {
        Stabilization::Stabilized(t) => {
            let name = t.name();
            let re = reprobabilise_stabilized(pt, cfg.q.depth)?;
            let mut a = stationary(&re, cfg)?;
            a.verdict.tree_class = TreeClass::Stabilizable;
            a.verdict.notes.push(format!("verdict of the reprobabilised stabilized tree {name}; a non-stable tree has at most one stationary measure"));
            a.verdict.delegated_to = Some(name);
            Ok(a)
        }
        other => {
            let q = build_q(pt, cfg.q)?;
            let cc = cascade_condition(&q.kappa);
            let mut reasons = vec!["tree is neither finite, stable nor stabilizable".to_string()];
            if let Stabilization::NotStabilizable { evidence } = other {
                reasons.push(evidence);
            }
            reasons.push("uniqueness of the line of left-fixed vectors is not decidable here".into());
            let verdict = StationaryVerdict {
                outcome: Outcome::Unknown { reasons },
                tree_class: TreeClass::Other,
                conditions: Conditions {
                    cascade_convergence: cc,
                    recurrence: Recurrence::AssumedUnknown,
                    normalization: ConditionStatus::Undetermined,
                    kappa: q.kappa.iter().map(KappaSummary::from).collect(),
                },
                delegated_to: None,
                notes: q.truncation.iter().map(|t| t.note.clone()).collect(),
            };
            Ok(StationaryAnalysis { verdict, q: Some(q), fixed_vector: None, measure: None })
        }
    }
}

fn stable_analysis(pt: &ProbabilisedTree, cfg: StationaryConfig) -> Result<StationaryAnalysis> {
    let set = alpha_lis_set(pt.tree(), cfg.q.depth);
    let finite_s = set.is_finite();
    let mut q = build_q(pt, cfg.q)?;
    let mut cc = cascade_condition(&q.kappa);
    // slowly converging series get more levels before being called undetermined
    let mut levels = cfg.q.levels;
    while finite_s && cc == ConditionStatus::Undetermined && levels < MAX_ESCALATED_LEVELS {
        levels = (levels * 4).min(MAX_ESCALATED_LEVELS);
        q = build_q(pt, QParams { levels, ..cfg.q })?;
        cc = cascade_condition(&q.kappa);
    }
    let kappa: Vec<KappaSummary> = q.kappa.iter().map(KappaSummary::from).collect();
    let tree_class = if finite_s { TreeClass::StableFiniteS } else { TreeClass::StableInfiniteS };
    let mut notes: Vec<String> = q.truncation.iter().map(|t| t.note.clone()).collect();
    let diverging = cc == ConditionStatus::DivergenceSuspected;
    if diverging {
        let verdict = StationaryVerdict {
            outcome: Outcome::NoStationary { caveat: divergence_caveat(&q.kappa) },
            tree_class,
            conditions: Conditions {
                cascade_convergence: cc,
                recurrence: if finite_s { Recurrence::AutomaticFiniteS } else { Recurrence::AssumedUnknown },
                normalization: ConditionStatus::Failed,
                kappa,
            },
            delegated_to: None,
            notes,
        };
        return Ok(StationaryAnalysis { verdict, q: Some(q), fixed_vector: None, measure: None });
    }
    let fv = match q.kappa_totals() {
        Some(k) => left_fixed_vector(&q, Some(&k), cfg.solver_tol).ok(),
        None => None,
    };
    let normalization = match &fv {
        Some(v) if v.normalized => ConditionStatus::Certified,
        _ => ConditionStatus::Undetermined,
    };
    let (outcome, recurrence, measure) = if finite_s {
        match (cc, &fv) {
            (ConditionStatus::Certified, Some(v)) => {
                let m = measure_from_vector(pt, v, cfg.measure_depth)?;
                (Outcome::UniqueStationary, Recurrence::AutomaticFiniteS, Some(m))
            }
            (ConditionStatus::Certified, None) => (
                Outcome::Unknown { reasons: vec!["no non-negative left-fixed vector found".into()] },
                Recurrence::AutomaticFiniteS,
                None,
            ),
            _ => (
                Outcome::Unknown { reasons: vec!["cascade series neither certified convergent nor divergent".into()] },
                Recurrence::AutomaticFiniteS,
                None,
            ),
        }
    } else {
        notes.push("recurrence of an infinite Q is not decided from a finite block".into());
        let m = fv.as_ref().and_then(|v| measure_from_vector(pt, v, cfg.measure_depth).ok());
        (
            Outcome::Unknown { reasons: vec!["infinite alpha-LIS set: recurrence of Q not established".into()] },
            Recurrence::AssumedUnknown,
            m,
        )
    };
    let verdict = StationaryVerdict {
        outcome,
        tree_class,
        conditions: Conditions { cascade_convergence: cc, recurrence, normalization, kappa },
        delegated_to: None,
        notes,
    };
    Ok(StationaryAnalysis { verdict, q: Some(q), fixed_vector: fv, measure })
}

/// Value of a cylinder with an upper bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderValue {
    pub value: f64,
    pub error_bar: f64,
}

/// The stationary measure given by a normalized left-fixed vector.
#[derive(Debug, Clone)]
pub struct Measure {
    pt: ProbabilisedTree,
    v: HashMap<Word, f64>,
    /// Contexts of length at most `depth` in lexicographic byte order, with their measure.
    contexts: Vec<(Vec<u8>, f64)>,
    depth: usize,
    /// `1 − Σ μ(c)` over the enumerated contexts.
    missing: f64,
}

/// Builds the measure `μ(w) = casc(w) · v[alpha-LIS(w)]` extended to all cylinders.
pub fn measure_from_vector(pt: &ProbabilisedTree, fv: &FixedVector, depth: usize) -> Result<Measure> {
    if !fv.normalized || (fv.normalization - 1.0).abs() > 1e-9 {
        return Err(VlmcError::InvalidFixedVector(format!("Σ v κ = {} (must be 1)", fv.normalization)));
    }
    if fv.values.iter().any(|x| !(*x >= 0.0)) {
        return Err(VlmcError::InvalidFixedVector("negative or NaN entries".into()));
    }
    let v: HashMap<Word, f64> = fv.index.iter().cloned().zip(fv.values.iter().copied()).collect();
    let tree = pt.tree();
    let depth = tree.height().unwrap_or(depth);
    let mut contexts = Vec::new();
    for c in tree.contexts_up_to(depth) {
        let m = context_measure(pt, &v, c.as_slice())?;
        contexts.push((c.into_vec(), m));
    }
    contexts.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = contexts.iter().map(|x| x.1).sum();
    let missing = if tree.is_finite() { 0.0 } else { (1.0 - total).max(0.0) };
    Ok(Measure { pt: pt.clone(), v, contexts, depth, missing })
}

fn context_measure(pt: &ProbabilisedTree, v: &HashMap<Word, f64>, c: &[u8]) -> Result<f64> {
    let p = alpha_lis_start(pt.tree(), c);
    Ok(match v.get(&Word::from(&c[p..])) {
        Some(x) => cascade_slice(pt, c)? * x,
        None => 0.0,
    })
}

impl Measure {
    pub fn tree(&self) -> &ContextTree {
        self.pt.tree()
    }

    pub fn probabilised_tree(&self) -> &ProbabilisedTree {
        &self.pt
    }

    /// Upper bound on the mass of contexts longer than the enumeration depth.
    pub fn missing_mass(&self) -> f64 {
        self.missing
    }

    /// `μ(αs)` for an alpha-LIS in the index of the fixed vector.
    pub fn alpha_lis_value(&self, x: &Word) -> Option<f64> {
        self.v.get(x).copied()
    }

    /// `(context, μ(context))` of the enumerated contexts with prefix `s`.
    fn contexts_with_prefix(&self, s: &[u8]) -> Result<Vec<(Vec<u8>, f64)>> {
        if s.len() < self.depth || self.pt.tree().is_finite() {
            let lo = self.contexts.partition_point(|(c, _)| c.as_slice() < s);
            let hi = lo + self.contexts[lo..].partition_point(|(c, _)| c.starts_with(s));
            return Ok(self.contexts[lo..hi].to_vec());
        }
        let max_len = s.len() + 16;
        self.pt
            .tree()
            .contexts_with_prefix(&Word::from(s), max_len)
            .into_iter()
            .map(|c| Ok((c.as_slice().to_vec(), context_measure(&self.pt, &self.v, c.as_slice())?)))
            .collect()
    }

    /// `μ(s)` for internal `s`: sum over contexts extending `s`.
    fn internal_value(&self, s: &[u8]) -> Result<f64> {
        Ok(self.contexts_with_prefix(s)?.iter().map(|x| x.1).sum())
    }

    /// `π(wR)`.
    pub fn eval(&self, w: &Word) -> Result<CylinderValue> {
        self.pt.tree().alphabet().check(w.as_slice())?;
        let w = w.as_slice();
        if w.is_empty() {
            return Ok(CylinderValue { value: 1.0, error_bar: 0.0 });
        }
        let tree = self.pt.tree();
        if tree.is_internal(w) {
            return Ok(CylinderValue { value: self.internal_value(w)?, error_bar: self.missing });
        }
        let p = alpha_lis_start(tree, w);
        let casc = cascade_slice(&self.pt, w)?;
        let alis = &w[p..];
        if let Some(x) = self.v.get(&Word::from(alis)) {
            return Ok(CylinderValue { value: casc * x, error_bar: casc * self.missing });
        }
        // μ(αs) = Σ_{c = s⋯} q_c(α) μ(c)
        let (alpha, s) = (alis[0], &alis[1..]);
        let mut sum = 0.0;
        for (c, m) in self.contexts_with_prefix(s)? {
            sum += self.pt.q_letter(&c, alpha)? * m;
        }
        Ok(CylinderValue { value: casc * sum, error_bar: casc * self.missing })
    }

    pub fn value(&self, w: &Word) -> Result<f64> {
        Ok(self.eval(w)?.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub depth: usize,
    /// `max |Σ_β μ(βw) − μ(w)|`.
    pub stationarity: f64,
    /// `max |Σ_β μ(wβ) − μ(w)|`.
    pub additivity: f64,
    /// `max_n |Σ_{|w|=n} μ(w) − 1|`.
    pub level_sums: f64,
    pub non_positive: usize,
    pub pass: bool,
}

/// Kolmogorov consistency and stationarity of `μ` on all words shorter than `depth`.
pub fn consistency_audit(m: &Measure, depth: usize, tol: f64) -> Result<AuditReport> {
    let a = m.tree().alphabet();
    let mut values: HashMap<Word, f64> = HashMap::new();
    for n in 0..=depth {
        for w in a.words_of_len(n) {
            let v = m.value(&w)?;
            values.insert(w, v);
        }
    }
    let (mut st, mut add, mut lv, mut np) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for n in 0..=depth {
        let words = a.words_of_len(n);
        let s: f64 = words.iter().map(|w| values[w]).sum();
        lv = lv.max((s - 1.0).abs());
        for w in &words {
            let x = values[w];
            if !(x > 0.0) {
                np += 1;
            }
            if n < depth {
                let left: f64 = a.letters().map(|b| values[&w.prepend(b)]).sum();
                let right: f64 = a.letters().map(|b| values[&w.append(b)]).sum();
                st = st.max((left - x).abs());
                add = add.max((right - x).abs());
            }
        }
    }
    let pass = st <= tol && add <= tol && lv <= tol && np == 0;
    Ok(AuditReport { depth, stationarity: st, additivity: add, level_sums: lv, non_positive: np, pass })
}

/// Stationary cylinder probabilities of a finite tree from its order-`h` Markov chain on `A^h`.
/// Intended as an independent oracle; cost grows like `b^{2h}`.
pub fn markov_oracle(pt: &ProbabilisedTree) -> Result<HashMap<Word, f64>> {
    let tree = pt.tree();
    let h = tree.height().ok_or_else(|| VlmcError::Param("oracle needs a finite tree".into()))?.max(1);
    let a = tree.alphabet();
    let states = a.words_of_len(h);
    let pos: HashMap<&Word, usize> = states.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let n = states.len();
    let mut p = nalgebra::DMatrix::<f64>::zeros(n, n);
    for (i, x) in states.iter().enumerate() {
        let c = tree.cont(x)?;
        let q = pt.q(c.as_slice())?;
        for l in a.letters() {
            let y = x.prepend(l).prefix(h);
            p[(i, pos[&y])] += q[l as usize];
        }
    }
    // π (P − I) = 0 with Σ π = 1: replace one equation by the normalization
    let mut m = p.transpose() - nalgebra::DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        m[(n - 1, j)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = m.lu().solve(&rhs).ok_or_else(|| VlmcError::NoFixedVector("singular oracle system".into()))?;
    let mut out = HashMap::new();
    for len in 0..=h {
        for w in a.words_of_len(len) {
            let v: f64 = states.iter().enumerate().filter(|(_, x)| x.starts_with(w.as_slice())).map(|(i, _)| pi[i]).sum();
            out.insert(w, v);
        }
    }
    Ok(out)
}
