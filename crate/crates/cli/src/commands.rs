use rayon::prelude::*;
use serde_json::{json, Map, Value};
use wavegp::kernel::Covariance;
use wavegp::verify::{
    bump_bank, expected_second_moment, monte_carlo_pathwise, verify_kernel_constraint, BumpTestFunction, GaussianField,
    OperatorSpec, RuleSpec,
};
use wavegp::wave_sample::sample_wave_field;
use wavegp::{fit_posterior, Error, ObservationSet, SpacetimePoint, WaveModelSpec};

use crate::output::{csv_header, csv_row, json as json_doc};
use crate::settings::{grid, parse_numbers, parse_points, CliError, CliResult, Settings, Source, AXIS_NAMES};

pub struct Artifact {
    pub body: String,
    /// False when a residual check failed; only `verify` produces such checks.
    pub passed: bool,
}

impl Artifact {
    fn ok(body: String) -> Self {
        Artifact { body, passed: true }
    }
}

pub fn dispatch(name: &str, s: &Settings) -> CliResult<Artifact> {
    match name {
        "kernel-eval" => kernel_eval(s),
        "gram" => gram(s),
        "wave-cov" => wave_cov(s),
        "krige" => krige(s),
        "verify" => verify(s),
        "mc-verify" => mc_verify(s),
        "sample" => sample(s),
        other => Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn coord_names(dim: usize, suffix: &str) -> Vec<String> {
    (0..dim)
        .map(|i| match AXIS_NAMES.get(i).filter(|_| dim <= 4) {
            Some(n) => format!("{n}{suffix}"),
            None => format!("x{i}{suffix}"),
        })
        .collect()
}

fn columns<'a>(names: &'a [String], extra: &[&'a str]) -> Vec<&'a str> {
    names.iter().map(String::as_str).chain(extra.iter().copied()).collect()
}

fn kernel_eval(s: &Settings) -> CliResult<Artifact> {
    s.reject_unknown(|k| s.source_key(k) || ["points", "points2"].contains(&k))?;
    let src = s.source()?;
    let a = parse_points("points", s.require("points")?)?;
    let b = match s.get("points2") {
        Some(v) => parse_points("points2", v)?,
        None => a.clone(),
    };
    let dim = a[0].len();
    if b[0].len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: b[0].len() }.into());
    }
    src.check_dim(dim)?;
    let pairs: Vec<(&Vec<f64>, &Vec<f64>)> = a.iter().flat_map(|p| b.iter().map(move |q| (p, q))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|(p, q)| src.covariance(p.as_slice(), q.as_slice())).collect();
    let (n1, n2) = (coord_names(dim, ""), coord_names(dim, "'"));
    let mut cols = columns(&n1, &[]);
    cols.extend(columns(&n2, &["k"]));
    let mut body = csv_header(s, &cols);
    for ((p, q), v) in pairs.iter().zip(values) {
        let mut row = (*p).clone();
        row.extend_from_slice(q);
        row.push(v);
        csv_row(&mut body, &row);
    }
    Ok(Artifact::ok(body))
}

fn gram(s: &Settings) -> CliResult<Artifact> {
    s.reject_unknown(|k| s.source_key(k) || k == "points")?;
    let src = s.source()?;
    let pts = parse_points("points", s.require("points")?)?;
    src.check_dim(pts[0].len())?;
    let g = wavegp::kernel::covariance_matrix(&src, &pts);
    let names: Vec<String> = (0..pts.len()).map(|j| format!("c{j}")).collect();
    let mut body = csv_header(s, &columns(&names, &[]));
    for i in 0..pts.len() {
        let row: Vec<f64> = g.row(i).iter().copied().collect();
        csv_row(&mut body, &row);
    }
    Ok(Artifact::ok(body))
}

fn wave_cov(s: &Settings) -> CliResult<Artifact> {
    s.reject_unknown(|k| WaveModelSpec::accepts_key(k) || k == "ref" || AXIS_NAMES.contains(&k))?;
    let m = s.wave_model()?;
    let r = SpacetimePoint::from_slice(&parse_numbers("ref", s.require("ref")?)?)?;
    let pts = grid(s, &AXIS_NAMES)?;
    let rows: Vec<[f64; 3]> = pts
        .par_iter()
        .map(|p| {
            let z = SpacetimePoint::new(p[0], p[1], p[2], p[3]);
            [m.kw(&z, &r), m.kv_wave(&z, &r), m.ku_wave(&z, &r)]
        })
        .collect();
    let names = coord_names(4, "");
    let mut body = csv_header(s, &columns(&names, &["kw", "kv_wave", "ku_wave"]));
    for (p, v) in pts.iter().zip(rows) {
        let mut row = p.clone();
        row.extend_from_slice(&v);
        csv_row(&mut body, &row);
    }
    Ok(Artifact::ok(body))
}

/// Numeric CSV rows; blank lines, `#` comments and a non-numeric header line are skipped.
fn read_observations(path: &str) -> CliResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = match parse_numbers("obs", line) {
            Ok(r) => r,
            Err(_) if i == first_data_line(&text) => continue,
            Err(e) => return Err(CliError::Config(format!("{path}: line {}: {e}", i + 1))),
        };
        if row.len() < 2 {
            return Err(CliError::Config(format!("{path}: line {}: need coordinates and a value", i + 1)));
        }
        let (p, v) = row.split_at(row.len() - 1);
        if let Some(first) = points.first().map(Vec::len) {
            if first != p.len() {
                return Err(Error::DimensionMismatch { expected: first, got: p.len() }.into());
            }
        }
        points.push(p.to_vec());
        values.push(v[0]);
    }
    if points.is_empty() {
        return Err(CliError::Config(format!("{path}: no observations")));
    }
    Ok((points, values))
}

fn first_data_line(text: &str) -> usize {
    text.lines()
        .position(|l| {
            let l = l.trim();
            !l.is_empty() && !l.starts_with('#')
        })
        .unwrap_or(0)
}

fn krige(s: &Settings) -> CliResult<Artifact> {
    s.reject_unknown(|k| s.source_key(k) || ["obs", "jitter", "points"].contains(&k) || AXIS_NAMES.contains(&k))?;
    let src = s.source()?;
    let (points, values) = read_observations(s.require("obs")?)?;
    let dim = points[0].len();
    src.check_dim(dim)?;
    let targets = match s.get("points") {
        Some(v) => parse_points("points", v)?,
        None if dim <= 4 => grid(s, &AXIS_NAMES[..dim])?,
        None => return Err(CliError::Config("give `points` for observations beyond four dimensions".into())),
    };
    if targets[0].len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: targets[0].len() }.into());
    }
    let jitter = s.kv.f64_or("jitter", 0.0)?;
    let post = fit_posterior(src, ObservationSet::with_jitter(points, values, jitter)?)?;
    let pred = post.predict(&targets);
    let names = coord_names(dim, "");
    let mut body = csv_header(s, &columns(&names, &["mean", "std"]));
    for (p, (mean, std)) in targets.iter().zip(pred) {
        let mut row = p.clone();
        row.extend_from_slice(&[mean, std]);
        csv_row(&mut body, &row);
    }
    Ok(Artifact::ok(body))
}

const OPERATOR_KEYS: [&str; 4] = ["op", "c", "terms", "rule"];

fn default_tolerance(op: &str) -> f64 {
    if op == "dalembert" {
        1e-3
    } else {
        1e-4
    }
}

/// A scalar or one value per axis.
fn per_axis(s: &Settings, key: &str, dim: usize, default: f64) -> CliResult<Vec<f64>> {
    match s.get(key) {
        None => Ok(vec![default; dim]),
        Some(v) => {
            let xs = parse_numbers(key, v)?;
            match xs.len() {
                1 => Ok(vec![xs[0]; dim]),
                n if n == dim => Ok(xs),
                n => Err(Error::DimensionMismatch { expected: dim, got: n }.into()),
            }
        }
    }
}

fn verify(s: &Settings) -> CliResult<Artifact> {
    let own = ["anchors", "bank.center", "bank.halfwidth", "bank.count", "seed", "tol"];
    s.reject_unknown(|k| s.source_key(k) || OPERATOR_KEYS.contains(&k) || own.contains(&k))?;
    let op = OperatorSpec::from_key_values(&s.kv)?;
    let dim = op.dim();
    let src = s.source()?;
    src.check_dim(dim)?;
    let rule = RuleSpec::from_key_values(&s.kv, dim)?;
    let center = per_axis(s, "bank.center", dim, 0.0)?;
    let half = per_axis(s, "bank.halfwidth", dim, 1.0)?;
    let bank = bump_bank(&center, &half, s.kv.usize_or("bank.count", 8)?, s.seed()?)?;
    let anchors = match s.get("anchors") {
        Some(v) => parse_points("anchors", v)?,
        None => vec![center.clone()],
    };
    let tol = s.kv.f64_or("tol", default_tolerance(s.require("op")?))?;
    let reports = verify_kernel_constraint(&src, &op, &anchors, &bank, &rule, tol)?;
    let passed = reports.iter().all(|r| r.pass);
    let worst = reports.iter().map(|r| r.normalized.abs()).fold(0.0, f64::max);
    let mut fields = Map::new();
    fields.insert("rule".into(), rule.to_string().into());
    fields.insert("tolerance".into(), tol.into());
    fields.insert("max_abs_normalized".into(), worst.into());
    fields.insert("pass".into(), passed.into());
    fields.insert("reports".into(), serde_json::to_value(&reports).expect("reports serialize"));
    Ok(Artifact { body: json_doc(s, fields), passed })
}

fn mc_verify(s: &Settings) -> CliResult<Artifact> {
    let own = ["bump.center", "bump.radii", "samples", "seed", "floor"];
    s.reject_unknown(|k| s.source_key(k) || OPERATOR_KEYS.contains(&k) || own.contains(&k))?;
    let op = OperatorSpec::from_key_values(&s.kv)?;
    let dim = op.dim();
    let src = s.source()?;
    src.check_dim(dim)?;
    let rule = RuleSpec::from_key_values(&s.kv, dim)?;
    s.require("bump.radii")?;
    let phi = BumpTestFunction::new(
        parse_numbers("bump.center", s.require("bump.center")?)?,
        per_axis(s, "bump.radii", dim, 0.0)?,
    )?;
    if phi.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: phi.dim() }.into());
    }
    let n = s.kv.usize_or("samples", 200)?;
    let seed = s.seed()?;
    let floor = match s.get("floor").unwrap_or("false") {
        "true" => true,
        "false" => false,
        v => return Err(CliError::Config(format!("`floor`: expected true or false, got `{v}`"))),
    };
    let stats = match &src {
        Source::Wave(m) => monte_carlo_pathwise(m, &op, &phi, &rule, n, seed)?,
        Source::Kernel(k) => monte_carlo_pathwise(&GaussianField(*k), &op, &phi, &rule, n, seed)?,
    };
    let mut fields = Map::new();
    fields.insert("rule".into(), rule.to_string().into());
    fields.insert("stats".into(), serde_json::to_value(stats).expect("stats serialize"));
    let expected = if floor { json!(expected_second_moment(&src, &op, &phi, &rule)?) } else { Value::Null };
    fields.insert("expected_second_moment".into(), expected);
    Ok(Artifact::ok(json_doc(s, fields)))
}

fn sample(s: &Settings) -> CliResult<Artifact> {
    s.reject_unknown(|k| WaveModelSpec::accepts_key(k) || ["points", "seed"].contains(&k) || AXIS_NAMES.contains(&k))?;
    let m = s.wave_model()?;
    let raw = match s.get("points") {
        Some(v) => parse_points("points", v)?,
        None => grid(s, &AXIS_NAMES)?,
    };
    let pts: Vec<SpacetimePoint> = raw.iter().map(|p| SpacetimePoint::from_slice(p)).collect::<wavegp::Result<_>>()?;
    let draw = sample_wave_field(&m, &pts, s.seed()?)?;
    let names = coord_names(4, "");
    let mut body = csv_header(s, &columns(&names, &["w"]));
    for (p, w) in draw.points.iter().zip(&draw.values) {
        let mut row = p.to_array().to_vec();
        row.push(*w);
        csv_row(&mut body, &row);
    }
    Ok(Artifact::ok(body))
}
