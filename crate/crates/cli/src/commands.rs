use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use recur_core::builtin::{TABLE1_CSV, TABLE2_CSV};
use recur_core::expand::{ChainIdentity, DEFAULT_DEPTH_CAP};
use recur_core::numeric::{
    finite_diff_check, instantiate, polynomial_check, Activation, JacobianCheckResult,
};
use recur_core::stats::{self, AccuracyTable};
use recur_core::{
    build_graph, check_structure, direct_propagation_check, export, parse_named, structural_equal,
    ArchitectureSpec, Builtin, CheckReport, Engine, ExportFormat, PathPolynomial, StructuralReport,
    StructureKind,
};

use crate::{
    ActivationArg, BuiltinArg, CheckArg, Command, Format, GraphFormat, Method, SpecArgs, Status,
    TableArg,
};

type Output = (String, Status);

pub fn run(command: Command) -> Result<Output> {
    match command {
        Command::Parse { specs, out } => parse(&load_specs(&specs)?, out.format),
        Command::Expand {
            specs,
            depth,
            wrt,
            method,
            out,
        } => expand(
            &engine()?,
            &load_specs(&specs)?,
            depth.depth,
            wrt,
            method,
            out.format,
        ),
        Command::Census {
            specs,
            depth,
            wrt,
            check,
            out,
        } => census(
            &engine()?,
            &load_specs(&specs)?,
            depth.depth,
            wrt,
            check,
            out.format,
        ),
        Command::Equiv {
            specs,
            depth,
            structural,
            out,
        } => equiv(
            &engine()?,
            &load_specs(&specs)?,
            depth.depth,
            structural,
            out.format,
        ),
        Command::Graph {
            specs,
            depth,
            format,
            report,
        } => graph(&load_specs(&specs)?, depth.depth, format, report),
        Command::Verify {
            specs,
            depth,
            wrt,
            dim,
            seed,
            seeds,
            tol,
            activation,
            epsilon,
            out,
        } => {
            let opts = VerifyOpts {
                depth: depth.depth,
                wrt,
                dim,
                seed,
                seeds,
                tol,
                activation,
                epsilon,
            };
            verify(&engine()?, &load_specs(&specs)?, &opts, out.format)
        }
        Command::ChainIdentity { specs, depth, out } => {
            chain_identity(&engine()?, &load_specs(&specs)?, depth.depth, out.format)
        }
        Command::Stats {
            csv,
            table,
            alpha,
            graph_json,
            out,
        } => stats_cmd(
            csv.as_deref(),
            table,
            alpha,
            graph_json.as_deref(),
            out.format,
        ),
    }
}

fn engine() -> Result<Engine> {
    match std::env::var("RECUR_DEPTH_CAP") {
        Ok(v) => {
            let cap: u32 = v.trim().parse().ok().filter(|&c| c > 0).with_context(|| {
                format!("RECUR_DEPTH_CAP must be a positive integer, got `{v}`")
            })?;
            Ok(Engine::new(cap))
        }
        Err(_) => Ok(Engine::new(DEFAULT_DEPTH_CAP)),
    }
}

fn builtin(b: BuiltinArg) -> Builtin {
    match b {
        BuiltinArg::Resnet => Builtin::ResNet,
        BuiltinArg::Chain => Builtin::Chain,
        BuiltinArg::Newarch => Builtin::NewArch,
        BuiltinArg::Eq22 => Builtin::Eq22,
        BuiltinArg::AppendixEx1 => Builtin::AppendixEx1,
        BuiltinArg::AppendixEx2 => Builtin::AppendixEx2,
    }
}

fn load_specs(args: &SpecArgs) -> Result<Vec<ArchitectureSpec>> {
    let mut specs = Vec::new();
    for path in &args.files {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let name = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        let spec = parse_named(&name, &text).with_context(|| path.display().to_string())?;
        specs.push(spec);
    }
    specs.extend(args.builtins.iter().map(|&b| builtin(b).spec()));
    if specs.is_empty() {
        bail!("no formula given (pass a FILE or --builtin NAME)");
    }
    Ok(specs)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn poly_json(p: &PathPolynomial) -> serde_json::Value {
    let terms: Vec<_> = p
        .iter()
        .map(|(w, c)| json!({ "factors": w.factors(), "coeff": c }))
        .collect();
    json!({ "text": p.to_string(), "terms": terms })
}

fn parse(specs: &[ArchitectureSpec], format: Format) -> Result<Output> {
    let out = match format {
        Format::Text => {
            let mut s = String::new();
            for (n, spec) in specs.iter().enumerate() {
                if n > 0 {
                    s.push('\n');
                }
                let _ = writeln!(s, "# {}", spec.name);
                s.push_str(&spec.render());
            }
            s
        }
        Format::Json => {
            let items: Vec<_> = specs
                .iter()
                .map(|s| {
                    json!({
                        "name": s.name,
                        "canonical": s.render(),
                        "first_index": s.rule.first_index(),
                        "base_cases": s.base_cases.keys().collect::<Vec<_>>(),
                    })
                })
                .collect();
            to_json(&items)
        }
    };
    Ok((out, Status::Ok))
}

fn expand(
    engine: &Engine,
    specs: &[ArchitectureSpec],
    depth: u32,
    wrt: Option<u32>,
    method: Method,
    format: Format,
) -> Result<Output> {
    let mut text = String::new();
    let mut items = Vec::new();
    for spec in specs {
        let (label, poly) = match wrt {
            Some(j) => {
                let p = match method {
                    Method::Backward => engine.derivative(spec, depth, j)?,
                    Method::Forward => engine.derivative_bruteforce(spec, depth, j)?,
                };
                (format!("dX[{depth}]/dX[{j}]"), p)
            }
            None => (
                format!("X[{depth}] / X[0]"),
                engine.unroll(spec, depth)?.component(0),
            ),
        };
        let _ = writeln!(text, "{}: {label} = {poly}", spec.name);
        items.push(json!({
            "spec": spec.name,
            "depth": depth,
            "wrt": wrt,
            "polynomial": poly_json(&poly),
        }));
    }
    Ok((pick(format, text, &items), Status::Ok))
}

fn pick<T: Serialize>(format: Format, text: String, json: &T) -> String {
    match format {
        Format::Text => text,
        Format::Json => to_json(json),
    }
}

fn structure_kind(c: CheckArg) -> StructureKind {
    match c {
        CheckArg::Binomial => StructureKind::Binomial,
        CheckArg::SinglePath => StructureKind::SinglePath,
        CheckArg::Widest => StructureKind::Widest,
    }
}

fn write_report(s: &mut String, r: &CheckReport) {
    let verdict = if r.pass { "pass" } else { "FAIL" };
    let _ = writeln!(s, "check {}: {verdict}", r.check);
    for v in &r.violations {
        let _ = writeln!(
            s,
            "  length {}: expected {}, actual {}",
            v.length,
            observed(&v.expected),
            observed(&v.actual)
        );
    }
}

fn observed(o: &recur_core::expand::Observed) -> String {
    match o {
        recur_core::expand::Observed::Count(n) => n.to_string(),
        recur_core::expand::Observed::Term(t) => t.clone(),
    }
}

fn census(
    engine: &Engine,
    specs: &[ArchitectureSpec],
    depth: u32,
    wrt: u32,
    check: Option<CheckArg>,
    format: Format,
) -> Result<Output> {
    let mut text = String::new();
    let mut items = Vec::new();
    let mut status = Status::Ok;
    for spec in specs {
        let poly = engine.derivative(spec, depth, wrt)?;
        let hist = poly.census();
        let _ = writeln!(
            text,
            "{}: dX[{depth}]/dX[{wrt}], {} paths",
            spec.name,
            poly.num_terms()
        );
        let _ = writeln!(text, "length  paths  weight");
        for (k, e) in &hist {
            let _ = writeln!(text, "{k:>6}  {:>5}  {:>6}", e.count, e.weight);
        }
        let report =
            check.map(|c| check_structure(&spec.name, &poly, structure_kind(c), depth, wrt));
        if let Some(r) = &report {
            write_report(&mut text, r);
            if !r.pass {
                status = Status::CheckFailed;
            }
        }
        items.push(json!({
            "spec": spec.name,
            "depth": depth,
            "wrt": wrt,
            "census": hist,
            "check": report,
        }));
    }
    Ok((pick(format, text, &items), status))
}

fn equiv(
    engine: &Engine,
    specs: &[ArchitectureSpec],
    depth: u32,
    structural: bool,
    format: Format,
) -> Result<Output> {
    let [a, b] = specs else {
        bail!("equiv needs exactly two formulas, got {}", specs.len());
    };
    let value = engine.equivalence_report(a, b, depth)?;
    let mut text = String::new();
    let _ = writeln!(text, "{} vs {} at L={depth}", a.name, b.name);
    let _ = writeln!(
        text,
        "value-equivalent: {}",
        if value.pass { "yes" } else { "no" }
    );
    for v in &value.violations {
        let _ = writeln!(
            text,
            "  differs: {} | {}",
            observed(&v.expected),
            observed(&v.actual)
        );
    }
    let mut pass = value.pass;
    let structure = if structural {
        let ga = build_graph(a, depth)?;
        let gb = build_graph(b, depth)?;
        let iso = structural_equal(&ga, &gb)?;
        let (ra, rb) = (direct_propagation_check(&ga), direct_propagation_check(&gb));
        let _ = writeln!(
            text,
            "isomorphic graphs: {}",
            if iso { "yes" } else { "no" }
        );
        for r in [&ra, &rb] {
            let _ = writeln!(
                text,
                "direct identity propagation in {}: {}",
                r.name,
                summary(r)
            );
        }
        pass &= iso;
        Some(json!({ "isomorphic": iso, "propagation": [ra, rb] }))
    } else {
        None
    };
    let json = json!({ "value": value, "structural": structure });
    let status = if pass {
        Status::Ok
    } else {
        Status::CheckFailed
    };
    Ok((pick(format, text, &json), status))
}

fn summary(r: &StructuralReport) -> &'static str {
    if r.pairs.is_empty() {
        "n/a"
    } else if r.all_direct() {
        "all pairs"
    } else if r.none_direct() {
        "no pairs"
    } else {
        "some pairs"
    }
}

fn graph(
    specs: &[ArchitectureSpec],
    depth: u32,
    format: GraphFormat,
    report: bool,
) -> Result<Output> {
    let mut out = String::new();
    let mut reports = Vec::new();
    for spec in specs {
        let g = build_graph(spec, depth)?;
        if report {
            let r = direct_propagation_check(&g);
            if format == GraphFormat::Dot {
                let _ = writeln!(
                    out,
                    "{} L={depth}: direct identity propagation in {}",
                    r.name,
                    summary(&r)
                );
                for p in &r.pairs {
                    let _ = writeln!(
                        out,
                        "  X[{}] -> X[{}]: direct={} cross-layer sources={:?}",
                        p.from, p.to, p.has_direct_identity, p.cross_layer_sources
                    );
                }
            }
            reports.push(r);
        } else {
            let f = match format {
                GraphFormat::Dot => ExportFormat::Dot,
                GraphFormat::Json => ExportFormat::Json,
            };
            out.push_str(&export(&g, f));
            if !out.ends_with('\n') {
                out.push('\n');
            }
        }
    }
    if report && format == GraphFormat::Json {
        out = to_json(&reports);
    }
    Ok((out, Status::Ok))
}

pub struct VerifyOpts {
    depth: u32,
    wrt: Option<u32>,
    dim: usize,
    seed: u64,
    seeds: u64,
    tol: Option<f64>,
    activation: ActivationArg,
    epsilon: f64,
}

fn verify(
    engine: &Engine,
    specs: &[ArchitectureSpec],
    o: &VerifyOpts,
    format: Format,
) -> Result<Output> {
    let activation = match o.activation {
        ActivationArg::None => Activation::None,
        ActivationArg::Tanh => Activation::Tanh,
    };
    let tol = o.tol.unwrap_or(match activation {
        Activation::None => 1e-10,
        Activation::Tanh => 1e-4,
    });
    if !(tol.is_finite() && tol > 0.0) {
        bail!("--tol must be a positive number, got {tol}");
    }
    if o.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    if let Some(j) = o.wrt {
        if j > o.depth {
            bail!("--wrt {j} is past the output X[{}]", o.depth);
        }
    }
    let mut results: Vec<JacobianCheckResult> = Vec::new();
    for spec in specs {
        for seed in o.seed..o.seed.saturating_add(o.seeds) {
            let net = instantiate(spec, o.depth, o.dim, seed, activation)?;
            let wrts = o.wrt.map_or(0..=o.depth, |j| j..=j);
            for j in wrts {
                let r = match activation {
                    Activation::None => polynomial_check(engine, &net, j, tol)?,
                    Activation::Tanh => finite_diff_check(&net, j, o.epsilon, tol)?,
                };
                results.push(r);
            }
        }
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    let mut text = String::new();
    for r in &results {
        let _ = writeln!(
            text,
            "{} L={} j={} d={} seed={} activation={} error={:.3e} tol={:e} {}",
            r.spec,
            r.depth,
            r.wrt,
            r.dim,
            r.seed,
            r.activation,
            r.error,
            r.tol,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(text, "{} checks, {failed} failed", results.len());
    let status = if failed == 0 {
        Status::Ok
    } else {
        Status::CheckFailed
    };
    Ok((pick(format, text, &results), status))
}

#[derive(Serialize)]
struct IdentityJson {
    spec: String,
    m: u32,
    lhs: String,
    rhs: String,
    holds: bool,
}

fn chain_identity(
    engine: &Engine,
    specs: &[ArchitectureSpec],
    depth: u32,
    format: Format,
) -> Result<Output> {
    if depth < 2 {
        bail!("chain-identity needs --depth of at least 2");
    }
    let mut text = String::new();
    let mut items = Vec::new();
    for spec in specs {
        for m in 2..=depth {
            let ChainIdentity {
                lhs, rhs, holds, ..
            } = engine.verify_chain_identity(spec, m)?;
            let _ = writeln!(
                text,
                "{} m={m}: {}",
                spec.name,
                if holds { "holds" } else { "FAILS" }
            );
            if !holds {
                let _ = writeln!(text, "  dX[{m}]/dX[{}] = {lhs}", m - 2);
                let _ = writeln!(text, "  expected      = {rhs}");
            }
            items.push(IdentityJson {
                spec: spec.name.clone(),
                m,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
                holds,
            });
        }
    }
    let status = if items.iter().all(|i| i.holds) {
        Status::Ok
    } else {
        Status::CheckFailed
    };
    Ok((pick(format, text, &items), status))
}

fn stats_cmd(
    csv: Option<&Path>,
    table: Option<TableArg>,
    alpha: f64,
    graph_json: Option<&Path>,
    format: Format,
) -> Result<Output> {
    // reject an untabulated alpha before reading anything
    stats::q_alpha(alpha, 2)?;
    let text = match (csv, table) {
        (Some(path), _) => {
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?
        }
        (None, Some(TableArg::Table1)) => TABLE1_CSV.to_owned(),
        (None, Some(TableArg::Table2)) => TABLE2_CSV.to_owned(),
        (None, None) => bail!("no accuracy table given"),
    };
    let table = AccuracyTable::from_csv(&text)?;
    let ranks = stats::rank(&table);
    let friedman = stats::friedman(&ranks)?;
    let k = ranks.num_methods();
    let nemenyi = match stats::nemenyi(&ranks, alpha) {
        Ok(n) => Some(n),
        Err(stats::StatsError::Range(why)) if !(2..=10).contains(&k) => {
            eprintln!("recur: note: Nemenyi test skipped: {why}");
            None
        }
        Err(e) => return Err(e.into()),
    };
    let graph = nemenyi
        .as_ref()
        .map(|n| stats::friedman_graph_data(&ranks, n));
    if let (Some(path), Some(g)) = (graph_json, &graph) {
        fs::write(path, to_json(g)).with_context(|| format!("cannot write {}", path.display()))?;
    } else if let Some(path) = graph_json {
        bail!(
            "cannot write {}: no Nemenyi result for k = {k}",
            path.display()
        );
    }

    let mut s = String::new();
    let _ = writeln!(s, "{} methods x {} datasets", k, ranks.num_datasets());
    let _ = writeln!(s, "{:<w$}  mean rank", "method", w = width(&ranks.methods));
    for (m, r) in ranks.methods.iter().zip(&ranks.mean_ranks) {
        let _ = writeln!(s, "{m:<w$}  {r:.3}", w = width(&ranks.methods));
    }
    let _ = writeln!(
        s,
        "Friedman: tau_chi2 = {:.4}, tau_F = {:.4}, F({}, {})",
        friedman.tau_chi2, friedman.tau_f, friedman.df1, friedman.df2
    );
    match friedman.p_value {
        Some(p) => {
            let _ = writeln!(s, "p-value = {p:.4e}");
        }
        None => {
            let _ = writeln!(s, "p-value undefined (single dataset)");
        }
    }
    if let (Some(n), Some(g)) = (&nemenyi, &graph) {
        let _ = writeln!(
            s,
            "Nemenyi: alpha = {}, q = {}, CD = {:.3}",
            n.alpha, n.q_alpha, n.cd
        );
        for e in &g.entries {
            let _ = writeln!(
                s,
                "  {:<w$}  [{:.3}, {:.3}]",
                e.method,
                e.lo,
                e.hi,
                w = width(&ranks.methods)
            );
        }
        let mut pairs = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                if n.significant[a][b] {
                    pairs.push(format!("{} / {}", ranks.methods[a], ranks.methods[b]));
                }
            }
        }
        if pairs.is_empty() {
            let _ = writeln!(s, "no pair differs by more than CD");
        } else {
            let _ = writeln!(s, "significant pairs: {}", pairs.join(", "));
        }
    }
    let json = json!({
        "methods": table.methods,
        "datasets": table.datasets,
        "ranks": ranks,
        "friedman": friedman,
        "nemenyi": nemenyi,
        "graph": graph,
    });
    Ok((pick(format, s, &json), Status::Ok))
}

fn width(names: &[String]) -> usize {
    names
        .iter()
        .map(|n| n.chars().count())
        .max()
        .unwrap_or(0)
        .max(6)
}
