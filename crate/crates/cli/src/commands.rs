use std::io::Write;

use biased_walk::exact::{
    ballot_counts, check_domination_lower, check_domination_upper, log_mgf, propagate,
    return_table, Coordinates,
};
use biased_walk::ldp::{
    clt_matrix_check, ldp_consistency, log_psi, path_rate_functional, rate_function, rate_grid,
    scaling_matrix, DomainClass, PiecewiseLinearPath, RateQuery, RateResult,
};
use biased_walk::simulate::{
    boundary_visits, martingale_diagnostic, simulate_batch, trajectory, write_trajectory_csv,
    SimPlan,
};
use biased_walk::{ModelParams, ReflectedState};
use serde_json::{json, Map, Value};

use crate::settings::{CliError, Settings};

type Result<T> = std::result::Result<T, CliError>;

/// The one-line report, and where it goes.
pub(crate) struct Summary {
    pub line: String,
    to_stdout: bool,
}

impl Summary {
    pub(crate) fn sink<'a>(
        &self,
        stdout: &'a mut dyn Write,
        stderr: &'a mut dyn Write,
    ) -> &'a mut dyn Write {
        if self.to_stdout {
            stdout
        } else {
            stderr
        }
    }
}

/// Everything a command produces; rendered as CSV or JSON afterwards.
struct Artifact {
    fields: Map<String, Value>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    summary: String,
}

impl Artifact {
    fn new(header: &[&str]) -> Self {
        Artifact {
            fields: Map::new(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            summary: String::new(),
        }
    }

    fn field(&mut self, key: &str, value: Value) {
        self.fields.insert(key.to_string(), value);
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }
}

/// JSON has no infinity; non-finite values become strings.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

/// Shortest round-trip form, with an exponent for very small or large values.
fn cell(v: f64) -> String {
    format!("{v:?}")
}

fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn header_with(lead: Vec<String>, tail: &[&str]) -> Vec<String> {
    let mut h = lead;
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

fn comment_lines(settings: &Settings) -> String {
    let mut out = format!("# command={}\n", settings.command);
    for (k, v) in settings.echo() {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out
}

fn render(settings: &Settings, artifact: &Artifact, format: &str) -> Result<Vec<u8>> {
    match format {
        "json" => {
            let config: Map<String, Value> = settings
                .echo()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect();
            let mut doc = Map::new();
            doc.insert("command".into(), json!(settings.command));
            doc.insert("config".into(), Value::Object(config));
            for (k, v) in &artifact.fields {
                doc.insert(k.clone(), v.clone());
            }
            let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))
                .map_err(|e| CliError::Io(format!("json failure: {e}")))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        "csv" => {
            let mut bytes = comment_lines(settings).into_bytes();
            {
                let mut w = csv::Writer::from_writer(&mut bytes);
                w.write_record(&artifact.header)?;
                for row in &artifact.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
            }
            Ok(bytes)
        }
        other => Err(CliError::usage(
            "format",
            format!("expected csv or json, got '{other}'"),
        )),
    }
}

pub(crate) fn execute(settings: &Settings, stdout: &mut dyn Write) -> Result<Summary> {
    let format: String = settings.require("format")?;
    if format != "csv" && format != "json" {
        return Err(CliError::usage(
            "format",
            format!("expected csv or json, got '{format}'"),
        ));
    }
    let artifact = match settings.command.as_str() {
        "simulate" => simulate(settings)?,
        "speed" => speed(settings)?,
        "clt" => clt(settings)?,
        "martingale" => martingale(settings)?,
        "boundary" => boundary(settings)?,
        "mgf" => mgf(settings)?,
        "return-prob" => return_prob(settings)?,
        "ballot" => ballot(settings)?,
        "dominate" => dominate(settings)?,
        "rate-fn" => rate_fn(settings)?,
        "matrix-check" => matrix_check(settings)?,
        "path-rate" => path_rate(settings)?,
        "ldp-consistency" => consistency(settings)?,
        "propagate" => propagate_cmd(settings)?,
        other => return Err(CliError::usage("help", format!("unknown subcommand {other}"))),
    };
    let bytes = render(settings, &artifact, &format)?;
    match settings.get("out") {
        Some(path) => {
            std::fs::write(path, &bytes)
                .map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
            Ok(Summary {
                line: format!("{} (written to {path})", artifact.summary),
                to_stdout: true,
            })
        }
        None => {
            stdout.write_all(&bytes)?;
            Ok(Summary {
                line: artifact.summary,
                to_stdout: false,
            })
        }
    }
}

fn plan(settings: &Settings, p: ModelParams, start: ReflectedState) -> Result<SimPlan> {
    let steps: usize = settings.require("steps")?;
    let paths: usize = settings.require("paths")?;
    let seed: u64 = settings.require("seed")?;
    Ok(SimPlan::new(p, start, steps, paths, seed)?)
}

fn simulate(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let start = settings.start(&p, 0)?;
    let plan = plan(settings, p, start)?;
    let s = simulate_batch(&plan)?;
    let d = p.dim();

    let mut a = Artifact::new(&[]);
    a.header = header_with(
        vec!["coord".into()],
        &["mean_endpoint", "martingale_mean", "martingale_variance"],
    );
    a.header.extend(coord_header("cov", d));
    for i in 0..d {
        let mut row = vec![
            (i + 1).to_string(),
            cell(s.mean_endpoint[i]),
            cell(s.martingale_mean[i]),
            cell(s.martingale_variance[i]),
        ];
        row.extend(s.cov_scaled[i].iter().map(|&v| cell(v)));
        a.row(row);
    }
    let visits: u64 = s.boundary_visit_counts.iter().sum();
    a.field("steps", json!(s.steps));
    a.field("paths", json!(s.paths));
    a.field("mean_endpoint", nums(&s.mean_endpoint));
    a.field(
        "cov_scaled",
        Value::Array(s.cov_scaled.iter().map(|r| nums(r)).collect()),
    );
    a.field("martingale_mean", nums(&s.martingale_mean));
    a.field("martingale_variance", nums(&s.martingale_variance));
    a.field("mean_boundary_visits", num(visits as f64 / s.paths as f64));

    if let Some(path) = settings.get("dump-trajectories") {
        let single = SimPlan { paths: 1, ..plan };
        let states = trajectory(&single)?;
        let mut bytes = comment_lines(settings).into_bytes();
        write_trajectory_csv(&mut bytes, &states)?;
        std::fs::write(path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
    }
    a.summary = format!(
        "simulate: {} paths of {} steps, mean |X_n|/n = {:?}",
        s.paths, s.steps, s.mean_endpoint
    );
    Ok(a)
}

fn speed(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let s = simulate_batch(&plan(settings, p, ReflectedState::origin(p.dim()))?)?;
    let v = p.speed_entry();
    let mut a = Artifact::new(&["coord", "estimate", "speed", "abs_error"]);
    let mut worst = 0.0f64;
    for (i, &m) in s.mean_endpoint.iter().enumerate() {
        worst = worst.max((m - v).abs());
        a.row(vec![(i + 1).to_string(), cell(m), cell(v), cell((m - v).abs())]);
    }
    a.field("estimate", nums(&s.mean_endpoint));
    a.field("speed", num(v));
    a.field("max_abs_error", num(worst));
    a.summary = format!("speed: estimate {:?} vs {v:.6}, max error {worst:.3e}", s.mean_endpoint);
    Ok(a)
}

fn clt(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let s = simulate_batch(&plan(settings, p, ReflectedState::origin(p.dim()))?)?;
    let sigma = p.covariance();
    let mut a = Artifact::new(&["i", "j", "estimate", "sigma"]);
    let (mut diff, mut norm) = (0.0, 0.0);
    for i in 0..p.dim() {
        for j in 0..p.dim() {
            diff += (s.cov_scaled[i][j] - sigma[i][j]).powi(2);
            norm += sigma[i][j].powi(2);
            a.row(vec![
                (i + 1).to_string(),
                (j + 1).to_string(),
                cell(s.cov_scaled[i][j]),
                cell(sigma[i][j]),
            ]);
        }
    }
    let rel = if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() };
    a.field("estimate", Value::Array(s.cov_scaled.iter().map(|r| nums(r)).collect()));
    a.field("sigma", Value::Array(sigma.iter().map(|r| nums(r)).collect()));
    a.field("frobenius_relative_error", num(rel));
    a.summary = format!("clt: Frobenius relative error {rel:.4}");
    Ok(a)
}

fn martingale(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let m = martingale_diagnostic(&plan(settings, p, ReflectedState::origin(p.dim()))?)?;
    let radius = m.hoeffding_radius();
    let mut a = Artifact::new(&["coord", "mean", "variance", "hoeffding_radius"]);
    for i in 0..p.dim() {
        a.row(vec![(i + 1).to_string(), cell(m.mean[i]), cell(m.variance[i]), cell(radius)]);
    }
    let inside = m.mean.iter().all(|v| v.abs() <= radius);
    a.field("mean", nums(&m.mean));
    a.field("variance", nums(&m.variance));
    a.field("increments", json!(m.increments));
    a.field("hoeffding_radius", num(radius));
    a.summary = format!(
        "martingale: increment means {:?}, within radius {radius:.2e}: {inside}",
        m.mean
    );
    Ok(a)
}

fn boundary(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let b = boundary_visits(&plan(settings, p, ReflectedState::origin(p.dim()))?)?;
    let mut a = Artifact::new(&["visits", "paths"]);
    let mut hist = Map::new();
    for (&visits, &paths) in &b.histogram {
        a.row(vec![visits.to_string(), paths.to_string()]);
        hist.insert(visits.to_string(), json!(paths));
    }
    let mean = b.per_path.iter().sum::<u64>() as f64 / b.per_path.len() as f64;
    let max = b.per_path.iter().copied().max().unwrap_or(0);
    a.field("histogram", Value::Object(hist));
    a.field("mean_visits", num(mean));
    a.field("max_visits", json!(max));
    a.summary = format!("boundary: mean visits {mean:.3}, max {max}");
    Ok(a)
}

fn mgf(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let s: Vec<f64> = settings.list("s")?;
    if s.len() != p.dim() {
        return Err(CliError::usage(
            "s",
            format!("has {} entries but the dimension is {}", s.len(), p.dim()),
        ));
    }
    let ns: Vec<usize> = settings.list("n-list")?;
    let start = settings.start(&p, 0)?;
    let limit = log_psi(&p, &s);
    let mut a = Artifact::new(&["n", "log_mgf", "scaled", "log_psi", "gap"]);
    let mut rows = Vec::new();
    for &n in &ns {
        if n == 0 {
            return Err(CliError::usage("n-list", "horizons must be positive"));
        }
        let value = log_mgf(&p, &start, n, &s)?;
        let scaled = value / n as f64;
        let gap = (scaled - limit).abs();
        a.row(vec![n.to_string(), cell(value), cell(scaled), cell(limit), cell(gap)]);
        rows.push(json!({"n": n, "log_mgf": num(value), "scaled": num(scaled), "gap": num(gap)}));
    }
    a.field("log_psi", num(limit));
    a.field("rows", Value::Array(rows));
    a.summary = format!("mgf: ln psi = {limit:.6}, {} horizons", ns.len());
    Ok(a)
}

fn return_prob(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let n_max: usize = settings.require("n-max")?;
    if n_max == 0 {
        return Err(CliError::usage("n-max", "must be positive"));
    }
    let table = return_table(&p, n_max)?;
    let mut a = Artifact::new(&["n", "prob", "log_prob", "normalized"]);
    for r in &table {
        a.row(vec![
            r.half_steps.to_string(),
            cell(r.prob),
            cell(r.log_prob),
            cell(r.normalized),
        ]);
    }
    a.field(
        "rows",
        Value::Array(
            table
                .iter()
                .map(|r| {
                    json!({"n": r.half_steps, "prob": num(r.prob), "log_prob": num(r.log_prob),
                           "normalized": num(r.normalized)})
                })
                .collect(),
        ),
    );
    a.field("ln_rho", num(p.rho().ln()));
    let last = table.last().expect("n_max >= 1");
    a.summary = format!("return-prob: P_0(X_{} = 0) = {:.6e}", 2 * last.half_steps, last.prob);
    Ok(a)
}

fn ballot(settings: &Settings) -> Result<Artifact> {
    let n: usize = settings.require("n")?;
    let alpha: i64 = settings.require("alpha")?;
    let beta: i64 = settings.require("beta")?;
    let c = ballot_counts(n, alpha, beta)?;
    let holds = c.satisfies_bound();
    let mut a = Artifact::new(&["n", "alpha", "beta", "p", "q", "bound_holds"]);
    a.row(vec![
        n.to_string(),
        alpha.to_string(),
        beta.to_string(),
        c.p.to_string(),
        c.q.to_string(),
        holds.to_string(),
    ]);
    a.field("n", json!(n));
    a.field("alpha", json!(alpha));
    a.field("beta", json!(beta));
    a.field("p", json!(c.p));
    a.field("q", json!(c.q));
    a.field("bound_holds", json!(holds));
    a.summary = format!("ballot: P = {}, Q = {}, bound holds: {holds}", c.p, c.q);
    Ok(a)
}

fn dominate(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let n_max: usize = settings.require("n-max")?;
    let mode: String = settings.require("mode")?;
    let mut a = Artifact::new(&["n", "extreme", "cells"]);
    let (steps, key, extreme, cells) = match mode.as_str() {
        "upper" => {
            let r = check_domination_upper(&p, n_max)?;
            (r.per_step, "max_violation", r.max_violation, r.cells_checked)
        }
        "lower" => {
            let z = settings.start(&p, 1)?;
            let r = check_domination_lower(&p, &z, n_max)?;
            (r.per_step, "min_slack", r.min_slack, r.cells_checked)
        }
        other => {
            return Err(CliError::usage(
                "mode",
                format!("expected upper or lower, got '{other}'"),
            ))
        }
    };
    for s in &steps {
        a.row(vec![s.n.to_string(), cell(s.extreme), s.cells.to_string()]);
    }
    a.field(key, num(extreme));
    a.field("cells_checked", json!(cells));
    a.field(
        "per_step",
        Value::Array(
            steps
                .iter()
                .map(|s| json!({"n": s.n, "extreme": num(s.extreme), "cells": s.cells}))
                .collect(),
        ),
    );
    a.summary = format!("dominate {mode}: {key} = {extreme:.3e} over {cells} cells");
    Ok(a)
}

fn rate_json(x: &[f64], r: &RateResult) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("x".into(), nums(x));
    m.insert("value".into(), num(r.value));
    m.insert("class".into(), json!(r.domain_class.as_str()));
    m.insert(
        "argmax".into(),
        serde_json::to_value(&r.argmax).unwrap_or(Value::Null),
    );
    m.insert("iterations".into(), json!(r.iterations));
    m.insert("kkt_residual".into(), num(r.kkt_residual));
    m
}

fn rate_row(x: &[f64], r: &RateResult) -> Vec<String> {
    let mut row: Vec<String> = x.iter().map(|&v| cell(v)).collect();
    row.push(cell(r.value));
    row.push(r.domain_class.as_str().to_string());
    row.push(cell(r.kkt_residual));
    row
}

fn rate_fn(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let header = header_with(coord_header("x", p.dim()), &["rate", "class", "kkt_residual"]);
    let mut a = Artifact::new(&[]);
    a.header = header;
    match (settings.get("x"), settings.get("grid")) {
        (Some(_), Some(_)) => Err(CliError::usage("grid", "cannot be combined with --x")),
        (None, None) => Err(CliError::usage("x", "either --x or --grid is required")),
        (Some(_), None) => {
            let x: Vec<f64> = settings.list("x")?;
            let r = rate_function(&RateQuery::new(p, x.clone()))?;
            a.row(rate_row(&x, &r));
            a.fields = rate_json(&x, &r);
            a.summary = format!(
                "rate-fn: Lambda*({x:?}) = {} ({})",
                r.value,
                r.domain_class.as_str()
            );
            Ok(a)
        }
        (None, Some(_)) => {
            let steps: usize = settings.require("grid")?;
            let points = rate_grid(&p, steps)?;
            let finite = points
                .iter()
                .filter(|(_, r)| r.domain_class != DomainClass::Outside)
                .count();
            for (x, r) in &points {
                a.row(rate_row(x, r));
            }
            a.field(
                "points",
                Value::Array(points.iter().map(|(x, r)| Value::Object(rate_json(x, r))).collect()),
            );
            a.summary = format!(
                "rate-fn: {} grid points, {finite} in the effective domain",
                points.len()
            );
            Ok(a)
        }
    }
}

fn matrix_check(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let deviation = clt_matrix_check(&p);
    let m = scaling_matrix(&p);
    let mmt = &m * m.transpose();
    let sigma = p.covariance();
    let d = p.dim();
    let mut a = Artifact::new(&["i", "j", "mmt", "sigma", "abs_diff"]);
    for i in 0..d {
        for j in 0..d {
            a.row(vec![
                (i + 1).to_string(),
                (j + 1).to_string(),
                cell(mmt[(i, j)]),
                cell(sigma[i][j]),
                cell((mmt[(i, j)] - sigma[i][j]).abs()),
            ]);
        }
    }
    let rows = |f: &dyn Fn(usize, usize) -> f64| {
        Value::Array((0..d).map(|i| Value::Array((0..d).map(|j| num(f(i, j))).collect())).collect())
    };
    a.field("max_deviation", num(deviation));
    a.field("m", rows(&|i, j| m[(i, j)]));
    a.field("sigma", rows(&|i, j| sigma[i][j]));
    a.summary = format!("matrix-check: max |M M^T - Sigma| = {deviation:.3e}");
    Ok(a)
}

fn path_rate(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let file: String = settings.require("path")?;
    let text = std::fs::read_to_string(&file)
        .map_err(|e| CliError::usage("path", format!("cannot read {file}: {e}")))?;
    let path = PiecewiseLinearPath::from_json(&text)?;
    let total = path_rate_functional(&p, &path)?;
    let mut a = Artifact::new(&[]);
    a.header = header_with(vec!["t_start".into(), "t_end".into()], &[]);
    a.header.extend(coord_header("slope", path.dim()));
    a.header.push("rate".into());
    let mut segments = Vec::new();
    for (w, (_, slope)) in path.breakpoints().windows(2).zip(path.segments()) {
        let r = rate_function(&RateQuery::new(p, slope.clone()))?;
        let mut row = vec![cell(w[0].t), cell(w[1].t)];
        row.extend(slope.iter().map(|&v| cell(v)));
        row.push(cell(r.value));
        a.row(row);
        segments.push(json!({"t_start": w[0].t, "t_end": w[1].t, "slope": nums(&slope),
                             "rate": num(r.value)}));
    }
    a.field("value", num(total));
    a.field("segments", Value::Array(segments));
    a.summary = format!("path-rate: I(phi) = {total}");
    Ok(a)
}

fn consistency(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let threshold: f64 = settings.require("a")?;
    let ns: Vec<usize> = settings.list("n-list")?;
    let r = ldp_consistency(&p, threshold, &ns)?;
    let mut a = Artifact::new(&["n", "tail_prob", "empirical_rate", "rate_inf", "gap"]);
    for row in &r.rows {
        a.row(vec![
            row.n.to_string(),
            cell(row.tail_prob),
            cell(row.empirical_rate),
            cell(row.rate_inf),
            cell(row.gap),
        ]);
    }
    a.field("threshold", num(threshold));
    a.field("rate_inf", num(r.rate_inf));
    a.field(
        "rows",
        Value::Array(
            r.rows
                .iter()
                .map(|row| {
                    json!({"n": row.n, "tail_prob": num(row.tail_prob),
                           "empirical_rate": num(row.empirical_rate), "gap": num(row.gap)})
                })
                .collect(),
        ),
    );
    let last = r.rows.last().expect("nonempty");
    a.summary = format!(
        "ldp-consistency: rate at n = {} is {:.6}, limit {:.6}",
        last.n, last.empirical_rate, r.rate_inf
    );
    Ok(a)
}

fn propagate_cmd(settings: &Settings) -> Result<Artifact> {
    let p = settings.params()?;
    let n: usize = settings.require("steps")?;
    let start = settings.start(&p, 0)?;
    let dist = propagate(&p, &start, n)?;
    let mut a = Artifact::new(&[]);
    a.header = header_with(coord_header("x", p.dim()), &["prob"]);
    let mut support = Vec::with_capacity(dist.len());
    for (k, m) in dist.iter() {
        let mut row: Vec<String> = k.coords().iter().map(|c| c.to_string()).collect();
        row.push(cell(m));
        a.row(row);
        support.push(json!({"x": k.0, "prob": num(m)}));
    }
    let total = dist.total_mass();
    a.field("total_mass", num(total));
    a.field("support", Value::Array(support));
    a.summary = format!(
        "propagate: {} states after {n} steps, total mass {total}",
        dist.len()
    );
    Ok(a)
}
