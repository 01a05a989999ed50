use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::Path;

use vlmc::appendix::appendix_arith_check;
use vlmc::cascade::{cascade, kappa_all};
use vlmc::io::{load_config, load_kernel, OutputFormat, RunConfig};
use vlmc::qmatrix::{build_q, irreducibility, row_stochasticity, EntryStatus, IndexOrder};
use vlmc::sim::{simulate_cylinder_freqs, InitialState, RenewalTracker, SimConfig, Simulator};
use vlmc::smc::{roundtrip_check, smc_to_vlmc, RoundtripConfig};
use vlmc::stationary::{consistency_audit, stationary};
use vlmc::suffix::{alpha_lis, alpha_lis_set};
use vlmc::tree::{is_stable, stabilize, Stabilization, REGISTRY};
use vlmc::{NodeClass, ProbabilisedTree, Word};

use crate::args::{Cli, Command, Emit, Format, GlobalOpts, Order, SmcCommand, TreeArg, ZooCommand};
use crate::output::{num, opt_num, print_json, Summary, Table};
use crate::UsageError;

struct Ctx {
    cfg: RunConfig,
    format: Format,
    summary: Summary,
    out: BufWriter<std::io::Stdout>,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_config(g: &GlobalOpts) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(x) = g.seed {
        c.seed = x;
    }
    if let Some(x) = g.series_tol {
        c.series_tol = x;
    }
    if let Some(x) = g.solver_tol {
        c.solver_tol = x;
    }
    if let Some(x) = g.levels {
        c.levels = x;
    }
    if let Some(x) = g.trunc {
        c.trunc = x;
    }
    if let Some(x) = g.fiber_depth {
        c.fiber_depth = x;
    }
    if let Some(f) = g.format {
        c.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    let format = match cfg.format {
        OutputFormat::Csv => Format::Csv,
        OutputFormat::Json => Format::Json,
    };
    let mut ctx = Ctx { cfg, format, summary: Summary { path: cli.global.summary.clone() }, out: BufWriter::new(std::io::stdout()) };
    match cli.command {
        Command::Tree { tree, depth } => cmd_tree(&mut ctx, &tree, depth)?,
        Command::Lis { tree, words, set } => cmd_lis(&mut ctx, &tree, &words, set)?,
        Command::Cascade { tree, words } => cmd_cascade(&mut ctx, &tree, &words)?,
        Command::Kappa { tree, alpha_lis, per_level } => cmd_kappa(&mut ctx, &tree, &alpha_lis, per_level)?,
        Command::Q { tree, order } => cmd_q(&mut ctx, &tree, order)?,
        Command::Stationary { tree } => cmd_stationary(&mut ctx, &tree)?,
        Command::Measure { tree, words, all, audit } => cmd_measure(&mut ctx, &tree, &words, all, audit)?,
        Command::Simulate { tree, steps, emit, depth, burn_in, context, prefix, period, history_cap } => {
            let init = match (context, prefix, period) {
                (Some(c), _, _) => Some(Init::Context(c)),
                (None, Some(p), Some(t)) => Some(Init::Periodic(p, t)),
                (None, None, Some(t)) => Some(Init::Periodic(String::new(), t)),
                _ => None,
            };
            cmd_simulate(&mut ctx, &tree, steps, emit, depth, SimConfig { burn_in, history_cap }, init)?
        }
        Command::Smc { command } => cmd_smc(&mut ctx, command)?,
        Command::Zoo { command } => cmd_zoo(&mut ctx, command)?,
        Command::Appendix { r, s, n } => {
            if !(r > 0.0 && r < 1.0 && s > 0.0 && s < 1.0) || n < 12 {
                bail!(usage("appendix needs 0 < r < 1, 0 < s < 1 and n >= 12"));
            }
            print_json(&serde_json::to_value(appendix_arith_check(r, s, n))?, &mut ctx.out)?;
        }
    }
    ctx.out.flush()?;
    Ok(())
}

fn parse_params<'a>(items: impl Iterator<Item = &'a str>) -> Result<BTreeMap<String, Value>> {
    let mut m = BTreeMap::new();
    for it in items {
        let (k, v) = it.split_once('=').ok_or_else(|| usage(format!("parameter {it:?} must be key=value")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        m.insert(k.to_string(), v);
    }
    Ok(m)
}

fn load_tree(arg: &TreeArg) -> Result<ProbabilisedTree> {
    let pt = if let Some(rest) = arg.tree.strip_prefix("zoo:") {
        let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
        let params = parse_params(params.split(',').filter(|s| !s.is_empty()))?;
        ProbabilisedTree::uniform(vlmc::tree::zoo(name, &params)?)
    } else {
        vlmc::io::load_tree(Path::new(&arg.tree))?
    };
    Ok(match arg.random_q {
        Some(seed) => ProbabilisedTree::random(pt.tree().clone(), seed),
        None => pt,
    })
}

fn parse_words(pt: &ProbabilisedTree, words: &[String]) -> Result<Vec<Word>> {
    words
        .iter()
        .map(|s| Word::parse_in(s, pt.tree().alphabet()).with_context(|| format!("word {s:?}")))
        .collect()
}

fn class_name(c: NodeClass) -> &'static str {
    match c {
        NodeClass::Internal => "internal",
        NodeClass::Context => "context",
        NodeClass::External => "external",
    }
}

fn cmd_tree(ctx: &mut Ctx, arg: &TreeArg, depth: usize) -> Result<()> {
    let pt = load_tree(arg)?;
    let tree = pt.tree();
    let mut nodes = tree.internal_up_to(depth);
    nodes.extend(tree.contexts_up_to(depth));
    nodes.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
    let mut t = Table::new(["word", "length", "class"]);
    for w in &nodes {
        t.push(vec![json!(w.to_string()), json!(w.len()), json!(class_name(tree.class_of(w.as_slice())))]);
    }
    t.write(ctx.format, &mut ctx.out)?;
    let stabilization = match stabilize(tree, ctx.cfg.fiber_depth.min(32)) {
        Stabilization::Stabilized(s) => json!({ "status": "stabilized", "tree": s.name() }),
        Stabilization::NotStabilizable { evidence } => json!({ "status": "not_stabilizable", "evidence": evidence }),
        Stabilization::Truncated { depth, internal } => json!({ "status": "truncated", "depth": depth, "internal_nodes": internal.len() }),
    };
    ctx.summary.emit(&json!({
        "tree": serde_json::to_value(&pt)?,
        "finite": tree.is_finite(),
        "height": tree.height(),
        "stability": serde_json::to_value(is_stable(tree, 12))?,
        "stabilization": stabilization,
        "non_null": pt.is_non_null(),
    }))
}

fn cmd_lis(ctx: &mut Ctx, arg: &TreeArg, words: &[String], set: bool) -> Result<()> {
    let pt = load_tree(arg)?;
    let tree = pt.tree();
    if set {
        let s = alpha_lis_set(tree, ctx.cfg.fiber_depth);
        let mut t = Table::new(["alpha_lis", "length"]);
        for w in s.entries() {
            t.push(vec![json!(w.to_string()), json!(w.len())]);
        }
        t.write(ctx.format, &mut ctx.out)?;
        return ctx.summary.emit(&json!({
            "count": s.entries().len(),
            "finite": s.is_finite(),
            "exactness": serde_json::to_value(s.exactness())?,
        }));
    }
    if words.is_empty() {
        bail!(usage("give words or --set"));
    }
    let mut t = Table::new(["word", "class", "head", "alpha", "lis", "alpha_lis", "p"]);
    for w in parse_words(&pt, words)? {
        let d = alpha_lis(tree, &w)?;
        t.push(vec![
            json!(w.to_string()),
            json!(class_name(tree.class_of(w.as_slice()))),
            json!(d.head.to_string()),
            json!(d.alpha.to_string()),
            json!(d.lis.to_string()),
            json!(d.alpha_lis().to_string()),
            json!(d.p()),
        ]);
    }
    t.write(ctx.format, &mut ctx.out)
}

fn cmd_cascade(ctx: &mut Ctx, arg: &TreeArg, words: &[String]) -> Result<()> {
    let pt = load_tree(arg)?;
    let mut t = Table::new(["word", "cascade"]);
    for w in parse_words(&pt, words)? {
        t.push(vec![json!(w.to_string()), num(cascade(&pt, &w)?)]);
    }
    t.write(ctx.format, &mut ctx.out)
}

fn cmd_kappa(ctx: &mut Ctx, arg: &TreeArg, words: &[String], per_level: bool) -> Result<()> {
    let pt = load_tree(arg)?;
    let entries = if words.is_empty() {
        let mut e = alpha_lis_set(pt.tree(), ctx.cfg.fiber_depth).entries().to_vec();
        e.sort();
        e.truncate(ctx.cfg.trunc);
        e
    } else {
        parse_words(&pt, words)?
    };
    let reports = kappa_all(&pt, &entries, ctx.cfg.levels, ctx.cfg.series_tol)?;
    if per_level {
        let mut t = Table::new(["alpha_lis", "level", "level_sum"]);
        for r in &reports {
            for (k, x) in r.level_sums.iter().enumerate() {
                t.push(vec![json!(r.alpha_lis.to_string()), json!(k + 1), num(*x)]);
            }
        }
        t.write(ctx.format, &mut ctx.out)?;
    } else {
        let mut t = Table::new(["alpha_lis", "partial", "total", "status", "tail_bound"]);
        for r in &reports {
            let status = serde_json::to_value(&r.status)?;
            t.push(vec![
                json!(r.alpha_lis.to_string()),
                num(r.partial),
                opt_num(r.total),
                status["status"].clone(),
                opt_num(r.tail_bound()),
            ]);
        }
        t.write(ctx.format, &mut ctx.out)?;
    }
    ctx.summary.emit(&serde_json::to_value(&reports)?)
}

fn cmd_q(ctx: &mut Ctx, arg: &TreeArg, order: Order) -> Result<()> {
    let pt = load_tree(arg)?;
    let order = match order {
        Order::LengthLex => IndexOrder::LengthLex,
        Order::Appendix => IndexOrder::LengthThenReverse,
    };
    let q = build_q(&pt, ctx.cfg.q_params(order))?;
    let stoch = row_stochasticity(&q, 1e-9);
    let mut header = vec!["row".to_string()];
    header.extend(q.index.iter().map(|w| w.to_string()));
    header.extend(["outside", "row_sum", "status", "tail_bound"].map(String::from));
    let mut t = Table::new(header);
    for (i, w) in q.index.iter().enumerate() {
        let mut row = vec![json!(w.to_string())];
        row.extend(q.entries[i].iter().map(|&x| num(x)));
        let (status, tail) = match q.row_status[i] {
            EntryStatus::Exact => ("exact", 0.0),
            EntryStatus::SeriesApprox { tail_bound } => ("series_approx", tail_bound),
        };
        row.extend([num(q.outside[i]), num(stoch.rows[i].sum), json!(status), num(tail)]);
        t.push(row);
    }
    t.write(ctx.format, &mut ctx.out)?;
    ctx.summary.emit(&json!({
        "index": q.index.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "stable": q.stable,
        "truncation": serde_json::to_value(&q.truncation)?,
        "row_stochasticity": serde_json::to_value(&stoch)?,
        "irreducibility": serde_json::to_value(irreducibility(&q))?,
        "kappa": serde_json::to_value(&q.kappa)?,
    }))
}

fn cmd_stationary(ctx: &mut Ctx, arg: &TreeArg) -> Result<()> {
    let pt = load_tree(arg)?;
    let a = stationary(&pt, ctx.cfg.stationary())?;
    print_json(&serde_json::to_value(&a.verdict)?, &mut ctx.out)?;
    ctx.summary.emit(&json!({
        "fixed_vector": serde_json::to_value(&a.fixed_vector)?,
        "missing_mass": a.measure.as_ref().map(|m| m.missing_mass()),
    }))
}

fn cmd_measure(ctx: &mut Ctx, arg: &TreeArg, words: &[String], all: Option<usize>, audit: Option<usize>) -> Result<()> {
    let pt = load_tree(arg)?;
    let mut ws = parse_words(&pt, words)?;
    if let Some(d) = all {
        ws.extend(pt.tree().alphabet().words_of_len(d));
    }
    if ws.is_empty() {
        bail!(usage("give words or --all DEPTH"));
    }
    let a = stationary(&pt, ctx.cfg.stationary())?;
    let Some(m) = a.measure else {
        bail!("no unique stationary measure to evaluate: {}", serde_json::to_string(&a.verdict)?);
    };
    let mut t = Table::new(["word", "value", "error_bar"]);
    for w in &ws {
        let v = m.eval(w)?;
        t.push(vec![json!(w.to_string()), num(v.value), num(v.error_bar)]);
    }
    t.write(ctx.format, &mut ctx.out)?;
    let audit = audit.map(|d| consistency_audit(&m, d, 1e-9)).transpose()?;
    ctx.summary.emit(&json!({
        "outcome": serde_json::to_value(&a.verdict)?["outcome"],
        "missing_mass": m.missing_mass(),
        "audit": serde_json::to_value(&audit)?,
    }))
}

enum Init {
    Context(String),
    Periodic(String, String),
}

fn cmd_simulate(ctx: &mut Ctx, arg: &TreeArg, steps: u64, emit: Emit, depth: usize, sim: SimConfig, init: Option<Init>) -> Result<()> {
    let pt = load_tree(arg)?;
    let alphabet = pt.tree().alphabet();
    let init = match init {
        None => InitialState::RandomContext,
        Some(Init::Context(c)) => InitialState::ContextAnchor { context: Word::parse_in(&c, alphabet)? },
        Some(Init::Periodic(p, t)) => {
            InitialState::PeriodicSeed { prefix: Word::parse_in(&p, alphabet)?, period: Word::parse_in(&t, alphabet)? }
        }
    };
    let seed = ctx.cfg.seed;
    if emit == Emit::Cylinders {
        let f = simulate_cylinder_freqs(&pt, &init, steps, depth, seed, sim)?;
        let mut t = Table::new(["word", "frequency", "naive_se"]);
        for (w, p) in &f {
            t.push(vec![json!(w.to_string()), num(*p), num((p * (1.0 - p) / steps as f64).sqrt())]);
        }
        t.write(ctx.format, &mut ctx.out)?;
        return ctx.summary.emit(&json!({ "steps": steps, "depth": depth, "seed": seed }));
    }
    if ctx.format == Format::Json {
        bail!(usage("--emit letters|contexts|renewal streams CSV only"));
    }
    let mut s = Simulator::new(&pt, &init, seed, 0, sim)?;
    let out = &mut ctx.out;
    match emit {
        Emit::Letters => {
            writeln!(out, "n,letter")?;
            for n in 1..=steps {
                let a = s.step()?;
                writeln!(out, "{n},{a}")?;
            }
        }
        Emit::Contexts => {
            writeln!(out, "n,letter,context")?;
            writeln!(out, "0,,{}", Word::from(s.context()))?;
            for n in 1..=steps {
                let a = s.step()?;
                writeln!(out, "{n},{a},{}", Word::from(s.context()))?;
            }
        }
        Emit::Renewal => {
            let mut tr = RenewalTracker::new(pt.tree(), s.context(), false);
            for _ in 0..steps {
                s.step()?;
                tr.push(s.context());
            }
            let rt = tr.finish();
            writeln!(out, "n,s,j,t")?;
            for (n, j) in rt.jumps.iter().enumerate() {
                writeln!(out, "{n},{},{},{}", j.s, rt.states[j.state], j.t)?;
            }
            return ctx.summary.emit(&json!({
                "steps": steps,
                "seed": seed,
                "jumps": rt.jumps.len() - 1,
                "jump_definition_disagreements": rt.disagreements,
            }));
        }
        Emit::Cylinders => unreachable!(),
    }
    ctx.summary.emit(&json!({ "steps": steps, "seed": seed }))
}

fn cmd_smc(ctx: &mut Ctx, command: SmcCommand) -> Result<()> {
    match command {
        SmcCommand::ToVlmc { kernel } => {
            let k = load_kernel(&kernel)?;
            let tj = k.true_jumps()?;
            let pt = smc_to_vlmc(&tj)?;
            print_json(&serde_json::to_value(&pt)?, &mut ctx.out)?;
            ctx.summary.emit(&json!({
                "true_jumps_applied": k.has_self_loops(),
                "non_null": pt.is_non_null(),
                "note": if pt.is_non_null() { Value::Null } else {
                    json!("finite-support kernel: comb contexts beyond the support are unreachable and carry a conventional q")
                },
            }))
        }
        SmcCommand::Limit { kernel } => {
            let k = load_kernel(&kernel)?;
            let tj = k.true_jumps()?;
            let m: Vec<Value> = tj.sojourn_means().m.into_iter().map(|x| x.map_or(json!("inf"), num)).collect();
            print_json(
                &json!({
                    "mean_sojourn": m,
                    "positivity": tj.positivity(),
                    "verdict": serde_json::to_value(tj.limit_distribution_verdict()?)?,
                }),
                &mut ctx.out,
            )
        }
        SmcCommand::Roundtrip { kernel, steps, window } => {
            let k = load_kernel(&kernel)?;
            let cfg = RoundtripConfig { steps, window, seed: ctx.cfg.seed, levels: ctx.cfg.levels.max(512), ..RoundtripConfig::default() };
            print_json(&serde_json::to_value(roundtrip_check(&k, cfg)?)?, &mut ctx.out)
        }
    }
}

fn cmd_zoo(ctx: &mut Ctx, command: ZooCommand) -> Result<()> {
    match command {
        ZooCommand::List => {
            let mut t = Table::new(["name", "params", "description"]);
            for z in REGISTRY {
                t.push(vec![json!(z.name), json!(z.params), json!(z.description)]);
            }
            t.write(ctx.format, &mut ctx.out)
        }
        ZooCommand::Show { name, params } => {
            let params = parse_params(params.iter().map(String::as_str))?;
            let pt = ProbabilisedTree::uniform(vlmc::tree::zoo(&name, &params)?);
            print_json(&serde_json::to_value(&pt)?, &mut ctx.out)
        }
    }
}
