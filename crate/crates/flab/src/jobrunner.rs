//! JSON job files in, a results directory out.
//!
//! A job is one JSON object selecting a task and its parameters. Running it
//! writes `results.json` (all verdicts), `manifest.json` (precision bits,
//! first sample index, seed, crate version), and one CSV per series the task
//! produced. The verdict list is a pure function of the job file and the
//! seed; thread count never changes a byte of `results.json`.
//!
//! Exit codes: 0 when every verdict passes, 1 on a failed verdict or any
//! evaluation error, 2 when a task refuses its input (hypothesis unmet),
//! 3 when the job file does not match the schema.

use std::io::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::averaging::{AveragingScheme, PhaseSeq};
use crate::correlation::{empirical_correlation, CorrelationQuery};
use crate::error::{Error, Result};
use crate::eval::{eval_frac, floor_value};
use crate::exact::ExactCoefficient;
use crate::experiments::{
    equidist_along, joint_factorization_test, floor_sequence_correlation, multi_ergodic_average,
    ortho_test, recurrence_average, sst_invariance, SstSource, Verdict,
};
use crate::hardy::{classify, Classification};
use crate::measures::{lambda_from_expr, uniformity_test};
use crate::oracle::{model_reconciliation, predict_correlation, MeasureSpec, RECONCILE_TOL};
use crate::parse::{parse_coefficient, parse_expr};
use crate::systems::{TorusSystem, WeightSpec};
use crate::torus::TorusPoint;

fn default_dilation() -> u64 {
    1
}

fn default_bins() -> usize {
    1024
}

fn default_max_k() -> i64 {
    16
}

fn default_tol() -> f64 {
    0.05
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightJob {
    ExpLinear { alpha: String },
    ExpQuadratic { beta: String },
    Bernoulli { #[serde(default)] seed: u64 },
    RiemannSample { alpha: String, u: f64, v: f64 },
    FloorPower { expr: String, alpha: String },
}

#[derive(Debug, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase", deny_unknown_fields)]
pub enum Job {
    Classify {
        expr: String,
    },
    Eval {
        expr: String,
        n: Vec<u64>,
    },
    Correlate {
        expr: String,
        shifts: Vec<i64>,
        signs: Vec<i32>,
        #[serde(default = "default_dilation")]
        r: u64,
        #[serde(rename = "N")]
        n_max: u64,
        tol: Option<f64>,
    },
    Predict {
        expr: String,
        shifts: Vec<i64>,
        signs: Vec<i32>,
        #[serde(default = "default_dilation")]
        r: u64,
        lambda: String,
    },
    Reconcile {
        expr: String,
        shifts: Vec<i64>,
        signs: Vec<i32>,
        #[serde(default = "default_dilation")]
        r: u64,
        lambda: String,
    },
    Measure {
        expr: String,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_bins")]
        bins: usize,
        #[serde(default = "default_max_k")]
        max_k: i64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Sst {
        expr: String,
        queries: Vec<CorrelationQuery>,
        r_values: Vec<u64>,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
        /// Rotation angle as a coefficient; switches the source from the
        /// phase e(a(n)) to a rotation orbit observed along [a(n)].
        rotation: Option<String>,
        freqs: Option<Vec<i64>>,
    },
    Ortho {
        expr: String,
        weight: WeightJob,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
        floor_alpha: Option<String>,
    },
    Multiavg {
        alpha_t: String,
        alpha_s: String,
        f_freq: i64,
        g_freq: i64,
        expr: String,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Recurrence {
        alpha_t: String,
        alpha_s: String,
        u: f64,
        v: f64,
        expr: Option<String>,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Equidist {
        expr: String,
        slope: Option<String>,
        #[serde(default)]
        intercept: Option<String>,
        alpha: String,
        k_max: i64,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Joint {
        expr: String,
        alpha: String,
        q1: CorrelationQuery,
        q2: CorrelationQuery,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Floorseq {
        expr: String,
        alpha: String,
        shifts: Vec<i64>,
        signs: Vec<i32>,
        #[serde(default = "default_dilation")]
        r: u64,
        #[serde(rename = "N")]
        n_max: u64,
        #[serde(default = "default_tol")]
        tol: f64,
    },
    Acceptance {
        criteria: Option<Vec<usize>>,
    },
}

pub const TASKS: &[&str] = &[
    "classify", "eval", "correlate", "predict", "reconcile", "measure", "sst", "ortho",
    "multiavg", "recurrence", "equidist", "joint", "floorseq", "acceptance",
];

/// Task catalog with parameter schemas, one task per paragraph.
pub fn catalog() -> String {
    let mut s = String::from("tasks (job files are one JSON object; fields marked ? are optional):\n\n");
    for (name, fields) in [
        ("classify", "expr"),
        ("eval", "expr, n (list of sample indexes)"),
        ("correlate", "expr, shifts, signs, r?=1, N, tol? (verdict checks |value| <= tol when given)"),
        ("predict", "expr, shifts, signs, r?=1, lambda (\"uniform\" or a point-mass position like \"sqrt2\")"),
        ("reconcile", "expr, shifts, signs, r?=1, lambda"),
        ("measure", "expr, N, bins?=1024, max_k?=16, tol?=0.05"),
        ("sst", "expr, queries ([{shifts, signs, r?}]), r_values, N, tol?=0.05, rotation? (angle, switches to an orbit source), freqs?=[1]"),
        ("ortho", "expr, weight ({kind: exp_linear|exp_quadratic|bernoulli|riemann_sample|floor_power, ...}), N, tol?=0.05, floor_alpha?"),
        ("multiavg", "alpha_t, alpha_s, f_freq, g_freq, expr, N, tol?=0.05"),
        ("recurrence", "alpha_t, alpha_s, u, v, expr?, N, tol?=0.05"),
        ("equidist", "expr, slope?, intercept?, alpha, k_max, N, tol?=0.05"),
        ("joint", "expr, alpha, q1 ({shifts, signs, r?}), q2, N, tol?=0.05"),
        ("floorseq", "expr, alpha, shifts, signs, r?=1, N, tol?=0.05"),
        ("acceptance", "criteria? (list of 1..=12, default all)"),
    ] {
        s.push_str("  ");
        s.push_str(name);
        s.push_str(": ");
        s.push_str(fields);
        s.push('\n');
    }
    s.push_str("\ncoefficients and angles are expression-language constants: \"1/2\", \"sqrt2\", \"-3/4*phi\".\n");
    s
}

pub fn task_name(job: &Job) -> &'static str {
    match job {
        Job::Classify { .. } => "classify",
        Job::Eval { .. } => "eval",
        Job::Correlate { .. } => "correlate",
        Job::Predict { .. } => "predict",
        Job::Reconcile { .. } => "reconcile",
        Job::Measure { .. } => "measure",
        Job::Sst { .. } => "sst",
        Job::Ortho { .. } => "ortho",
        Job::Multiavg { .. } => "multiavg",
        Job::Recurrence { .. } => "recurrence",
        Job::Equidist { .. } => "equidist",
        Job::Joint { .. } => "joint",
        Job::Floorseq { .. } => "floorseq",
        Job::Acceptance { .. } => "acceptance",
    }
}

pub struct JobOutput {
    pub verdicts: Vec<Verdict>,
    /// (file name, contents) for every series or table the task produced.
    pub files: Vec<(String, String)>,
    /// Task-specific fields merged into results.json next to the verdicts.
    pub extra: Value,
    pub n_start: u64,
    pub seed: u64,
}

fn coefficient(field: &str, src: &str) -> Result<ExactCoefficient> {
    parse_coefficient(src)
        .map_err(|e| Error::Query(format!("field '{field}': {e}")))
}

fn angle(field: &str, src: &str) -> Result<TorusPoint> {
    Ok(TorusPoint::from_exact(&coefficient(field, src)?))
}

fn lambda_spec(src: &str) -> Result<MeasureSpec> {
    if src == "uniform" {
        Ok(MeasureSpec::Uniform)
    } else {
        Ok(MeasureSpec::PointMass(angle("lambda", src)?))
    }
}

fn query(shifts: &[i64], signs: &[i32], r: u64) -> Result<CorrelationQuery> {
    CorrelationQuery::new(shifts.to_vec(), signs.to_vec(), r)
}

fn cvec(z: num_complex::Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn classification_json(cls: &Classification) -> Value {
    let mut v = json!({
        "case": format!("{:?}", cls.case_id),
        "d": cls.d,
    });
    let obj = v.as_object_mut().expect("literal object");
    if let Some(a) = &cls.alpha {
        obj.insert("alpha".into(), json!(a.to_string()));
    }
    if let Some(r) = cls.modulus_r {
        obj.insert("modulus_r".into(), json!(r));
    }
    if let Some(inner) = &cls.inner {
        obj.insert("inner".into(), classification_json(inner));
    }
    v
}

/// Runs one job. `seed_override` is the FLAB_SEED environment variable when
/// set; it replaces any seed the job file carries.
pub fn execute(
    job: &Job,
    threads: usize,
    precision_bits: u32,
    seed_override: Option<u64>,
) -> Result<JobOutput> {
    let seed_of = |job_seed: u64| seed_override.unwrap_or(job_seed);
    match job {
        Job::Classify { expr } => {
            let e = parse_expr(expr)?;
            let cls = classify(&e)?;
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "classify".into(),
                    params: json!({ "expr": expr }),
                    value: [cls.d as f64, 0.0],
                    reference: [cls.d as f64, 0.0],
                    tolerance: 0.0,
                    pass: true,
                }],
                files: vec![],
                extra: json!({ "classification": classification_json(&cls) }),
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Eval { expr, n } => {
            let e = parse_expr(expr)?;
            let mut csv = String::from("n,frac,err,floor\n");
            let mut worst = 0.0f64;
            for &i in n {
                let (f, err) = eval_frac(&e, i, precision_bits)?;
                let fl = floor_value(&e, i, precision_bits)?;
                csv.push_str(&format!("{i},{f},{err},{fl}\n"));
                worst = worst.max(err);
            }
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "eval".into(),
                    params: json!({ "expr": expr, "count": n.len() }),
                    value: [worst, 0.0],
                    reference: [0.0, 0.0],
                    tolerance: 0.0,
                    pass: true,
                }],
                files: vec![("values.csv".into(), csv)],
                extra: json!({ "worst_err": worst }),
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Correlate { expr, shifts, signs, r, n_max, tol } => {
            let e = parse_expr(expr)?;
            let q = query(shifts, signs, *r)?;
            let series = empirical_correlation(
                &PhaseSeq::new(&e),
                &q,
                &AveragingScheme::full(*n_max),
                threads,
            )?;
            let v = series.final_value();
            let pass = tol.map_or(true, |t| v.norm() <= t);
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "correlate".into(),
                    params: json!({ "expr": expr, "query": q.label(), "N": n_max }),
                    value: cvec(v),
                    reference: [0.0, 0.0],
                    tolerance: tol.unwrap_or(0.0),
                    pass,
                }],
                files: vec![("series.csv".into(), series.to_csv())],
                extra: Value::Null,
                n_start: series.n_start,
                seed: seed_of(0),
            })
        }
        Job::Predict { expr, shifts, signs, r, lambda } => {
            let e = parse_expr(expr)?;
            let cls = classify(&e)?;
            let q = query(shifts, signs, *r)?;
            let v = predict_correlation(&cls, &lambda_spec(lambda)?, &q)?;
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "predict".into(),
                    params: json!({ "expr": expr, "query": q.label(), "lambda": lambda }),
                    value: cvec(v),
                    reference: cvec(v),
                    tolerance: 0.0,
                    pass: true,
                }],
                files: vec![],
                extra: Value::Null,
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Reconcile { expr, shifts, signs, r, lambda } => {
            let e = parse_expr(expr)?;
            let cls = classify(&e)?;
            let q = query(shifts, signs, *r)?;
            let rec = model_reconciliation(&cls, &lambda_spec(lambda)?, &q)?;
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "reconcile".into(),
                    params: json!({ "expr": expr, "query": q.label(), "lambda": lambda }),
                    value: cvec(rec.direct),
                    reference: cvec(rec.model),
                    tolerance: RECONCILE_TOL,
                    pass: rec.matched,
                }],
                files: vec![],
                extra: Value::Null,
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Measure { expr, n_max, bins, max_k, tol } => {
            let e = parse_expr(expr)?;
            let mut measures =
                lambda_from_expr(&e, &AveragingScheme::full(*n_max), *bins, *max_k, threads)?;
            let (at, m) = measures.pop().ok_or_else(|| {
                Error::Measure("scheme produced no checkpoints".to_string())
            })?;
            let u = uniformity_test(&m, *max_k, *tol)?;
            Ok(JobOutput {
                verdicts: vec![Verdict {
                    experiment: "measure".into(),
                    params: json!({ "expr": expr, "N": at, "bins": bins, "max_k": max_k }),
                    value: [u.worst_value, 0.0],
                    reference: [0.0, 0.0],
                    tolerance: *tol,
                    pass: u.pass,
                }],
                files: vec![("fourier.csv".into(), m.fourier_csv())],
                extra: json!({ "worst_k": u.worst_k }),
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Sst { expr, queries, r_values, n_max, tol, rotation, freqs } => {
            let e = parse_expr(expr)?;
            let n_start = e.n_start();
            let source = match rotation {
                None => SstSource::Phase { a: e },
                Some(rot) => SstSource::Orbit {
                    sys: TorusSystem::rotation(angle("rotation", rot)?, TorusPoint::ZERO),
                    a: e,
                    freqs: freqs.clone().unwrap_or_else(|| vec![1]),
                },
            };
            let r = sst_invariance(
                &source,
                queries,
                r_values,
                &AveragingScheme::full(*n_max),
                *tol,
                threads,
            )?;
            let mut csv = String::from("query,re,im\n");
            for (label, v) in &r.finals {
                csv.push_str(&format!("\"{label}\",{},{}\n", v.re, v.im));
            }
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![("finals.csv".into(), csv)],
                extra: json!({ "deviation": r.deviation }),
                n_start,
                seed: seed_of(0),
            })
        }
        Job::Ortho { expr, weight, n_max, tol, floor_alpha } => {
            let e = parse_expr(expr)?;
            let seed = seed_of(match weight {
                WeightJob::Bernoulli { seed } => *seed,
                _ => 0,
            });
            let w = match weight {
                WeightJob::ExpLinear { alpha } => WeightSpec::ExpLinear {
                    alpha: angle("alpha", alpha)?,
                },
                WeightJob::ExpQuadratic { beta } => WeightSpec::ExpQuadratic {
                    beta: angle("beta", beta)?,
                },
                WeightJob::Bernoulli { .. } => WeightSpec::Bernoulli { seed },
                WeightJob::RiemannSample { alpha, u, v } => WeightSpec::RiemannSample {
                    alpha: angle("alpha", alpha)?,
                    u: *u,
                    v: *v,
                },
                WeightJob::FloorPower { expr, alpha } => WeightSpec::FloorPower {
                    a: parse_expr(expr)?,
                    alpha: angle("alpha", alpha)?,
                },
            };
            let fa = floor_alpha
                .as_deref()
                .map(|s| angle("floor_alpha", s))
                .transpose()?;
            let r = ortho_test(&e, fa, &w, &AveragingScheme::full(*n_max), *tol, threads)?;
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![("series.csv".into(), r.series.to_csv())],
                extra: Value::Null,
                n_start: r.series.n_start,
                seed,
            })
        }
        Job::Multiavg { alpha_t, alpha_s, f_freq, g_freq, expr, n_max, tol } => {
            let e = parse_expr(expr)?;
            let r = multi_ergodic_average(
                angle("alpha_t", alpha_t)?,
                angle("alpha_s", alpha_s)?,
                *f_freq,
                *g_freq,
                &e,
                &AveragingScheme::full(*n_max),
                *tol,
                threads,
            )?;
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![("series.csv".into(), r.series.to_csv())],
                extra: json!({ "predicted": cvec(r.predicted) }),
                n_start: r.series.n_start,
                seed: seed_of(0),
            })
        }
        Job::Recurrence { alpha_t, alpha_s, u, v, expr, n_max, tol } => {
            let e = expr.as_deref().map(parse_expr).transpose()?;
            let r = recurrence_average(
                angle("alpha_t", alpha_t)?,
                angle("alpha_s", alpha_s)?,
                *u,
                *v,
                e.as_ref(),
                &AveragingScheme::full(*n_max),
                *tol,
                threads,
            )?;
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![("series.csv".into(), r.series.to_csv())],
                extra: json!({ "bound": r.bound }),
                n_start: r.series.n_start,
                seed: seed_of(0),
            })
        }
        Job::Equidist { expr, slope, intercept, alpha, k_max, n_max, tol } => {
            let e = parse_expr(expr)?;
            let n_start = e.n_start();
            let slope_c = slope
                .as_deref()
                .map(|s| coefficient("slope", s))
                .transpose()?;
            let intercept_r = match intercept.as_deref() {
                None => num_traits::Zero::zero(),
                Some(s) => {
                    let c = coefficient("intercept", s)?;
                    if !c.is_rational() {
                        return Err(Error::Query(
                            "field 'intercept': must be rational".to_string(),
                        ));
                    }
                    c.q
                }
            };
            let b = slope_c.as_ref().map(|c| (c, intercept_r));
            let r = equidist_along(&e, b, &coefficient("alpha", alpha)?, *k_max, *n_max, *tol)?;
            let mut csv = String::from("q,residue,freq\n");
            for (qi, row) in r.residues.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    csv.push_str(&format!("{},{},{}\n", qi + 1, j, p));
                }
            }
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![("residues.csv".into(), csv)],
                extra: json!({
                    "sup_plain": r.sup_plain,
                    "sup_floor": r.sup_floor,
                    "samples": r.samples,
                }),
                n_start,
                seed: seed_of(0),
            })
        }
        Job::Joint { expr, alpha, q1, q2, n_max, tol } => {
            let e = parse_expr(expr)?;
            let r = joint_factorization_test(
                &e,
                &coefficient("alpha", alpha)?,
                q1,
                q2,
                &AveragingScheme::full(*n_max),
                *tol,
                threads,
            )?;
            Ok(JobOutput {
                verdicts: vec![r.verdict],
                files: vec![],
                extra: json!({
                    "joint": cvec(r.joint),
                    "product": cvec(r.product),
                    "deviation": r.deviation,
                }),
                n_start: e.n_start(),
                seed: seed_of(0),
            })
        }
        Job::Floorseq { expr, alpha, shifts, signs, r, n_max, tol } => {
            let e = parse_expr(expr)?;
            let q = query(shifts, signs, *r)?;
            let res = floor_sequence_correlation(
                &e,
                &coefficient("alpha", alpha)?,
                &q,
                &AveragingScheme::full(*n_max),
                *tol,
                threads,
            )?;
            Ok(JobOutput {
                verdicts: vec![res.verdict],
                files: vec![("series.csv".into(), res.series.to_csv())],
                extra: Value::Null,
                n_start: res.series.n_start,
                seed: seed_of(0),
            })
        }
        Job::Acceptance { criteria } => {
            let selected: Vec<usize> = match criteria {
                Some(list) => list.clone(),
                None => (1..=crate::acceptance::COUNT).collect(),
            };
            let mut verdicts = Vec::new();
            let mut details = Vec::new();
            for &i in &selected {
                let r = crate::acceptance::run_one(i, threads);
                println!("{}", r.line());
                verdicts.push(Verdict {
                    experiment: "acceptance".into(),
                    params: json!({ "criterion": r.index, "name": r.name }),
                    value: [if r.pass { 1.0 } else { 0.0 }, 0.0],
                    reference: [1.0, 0.0],
                    tolerance: 0.0,
                    pass: r.pass,
                });
                details.push(r);
            }
            Ok(JobOutput {
                verdicts,
                files: vec![],
                extra: json!({ "criteria": details }),
                n_start: 1,
                seed: seed_of(0),
            })
        }
    }
}

/// Writes results.json, manifest.json, and the task's CSVs into `dir`.
pub fn write_outputs(
    dir: &Path,
    task: &str,
    out: &JobOutput,
    precision_bits: u32,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut results = json!({
        "task": task,
        "verdicts": out.verdicts,
    });
    if !out.extra.is_null() {
        for (k, v) in out.extra.as_object().expect("extra is an object").iter() {
            results
                .as_object_mut()
                .expect("literal object")
                .insert(k.clone(), v.clone());
        }
    }
    let mut f = std::fs::File::create(dir.join("results.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&results)?)?;
    let manifest = json!({
        "precision_bits": precision_bits,
        "n_start": out.n_start,
        "seed": out.seed,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let mut f = std::fs::File::create(dir.join("manifest.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest)?)?;
    for (name, contents) in &out.files {
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

/// Exit code for an execution outcome, per the contract in the module doc.
pub fn exit_code(result: &Result<JobOutput>) -> i32 {
    match result {
        Ok(out) if out.verdicts.iter().all(|v| v.pass) => 0,
        Ok(_) => 1,
        Err(Error::HypothesisUnmet(_)) => 2,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(src: &str) -> Result<JobOutput> {
        let job: Job = serde_json::from_str(src).expect("test job parses");
        execute(&job, 1, 128, None)
    }

    #[test]
    fn catalog_covers_every_task() {
        let cat = catalog();
        for name in TASKS {
            assert!(cat.contains(name), "catalog missing {name}");
        }
    }

    #[test]
    fn task_names_round_trip() {
        // minimal valid job per task; every name in TASKS must deserialize
        // to the variant that reports the same name back
        let minimal = [
            r#"{"task":"classify","expr":"t^(3/2)"}"#,
            r#"{"task":"eval","expr":"t^(3/2)","n":[10]}"#,
            r#"{"task":"correlate","expr":"t^(3/2)","shifts":[0],"signs":[1],"N":1024}"#,
            r#"{"task":"predict","expr":"t^(3/2)","shifts":[0],"signs":[1],"lambda":"uniform"}"#,
            r#"{"task":"reconcile","expr":"t^(3/2)","shifts":[1,0],"signs":[1,-1],"lambda":"uniform"}"#,
            r#"{"task":"measure","expr":"t^(3/2)","N":4096}"#,
            r#"{"task":"sst","expr":"t^(3/2)","queries":[{"shifts":[1,0],"signs":[1,-1]}],"r_values":[1,2],"N":4096}"#,
            r#"{"task":"ortho","expr":"t^(3/2)","weight":{"kind":"bernoulli"},"N":4096}"#,
            r#"{"task":"multiavg","alpha_t":"phi","alpha_s":"sqrt2","f_freq":1,"g_freq":1,"expr":"t^(3/2)","N":4096}"#,
            r#"{"task":"recurrence","alpha_t":"phi","alpha_s":"sqrt2","u":0.0,"v":0.5,"N":4096}"#,
            r#"{"task":"equidist","expr":"t^(3/2)","alpha":"sqrt2","k_max":3,"N":4096}"#,
            r#"{"task":"joint","expr":"t^(3/2)","alpha":"sqrt2","q1":{"shifts":[0],"signs":[1]},"q2":{"shifts":[0],"signs":[1]},"N":4096}"#,
            r#"{"task":"floorseq","expr":"t^(3/2)","alpha":"sqrt2","shifts":[0],"signs":[1],"N":4096}"#,
            r#"{"task":"acceptance"}"#,
        ];
        assert_eq!(minimal.len(), TASKS.len());
        for (src, name) in minimal.iter().zip(TASKS) {
            let job: Job = serde_json::from_str(src)
                .unwrap_or_else(|e| panic!("minimal {name} job rejected: {e}"));
            assert_eq!(task_name(&job), *name);
        }
    }

    #[test]
    fn unknown_task_is_a_schema_error() {
        assert!(serde_json::from_str::<Job>(r#"{"task":"frobnicate"}"#).is_err());
        assert!(serde_json::from_str::<Job>(
            r#"{"task":"classify","expr":"t","bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn classify_job_reports_case_and_degree() {
        let out = run(r#"{"task":"classify","expr":"t^(3/2)"}"#).unwrap();
        assert!(out.verdicts[0].pass);
        assert_eq!(out.extra["classification"]["case"], "I");
        assert_eq!(out.extra["classification"]["d"], 1);
    }

    #[test]
    fn correlate_job_finds_the_constant_phase() {
        let out = run(
            r#"{"task":"correlate","expr":"sqrt2*t^2","shifts":[2,1,1,0],"signs":[1,-1,-1,1],"N":100000}"#,
        )
        .unwrap();
        let [re, im] = out.verdicts[0].value;
        let want = num_complex::Complex64::from_polar(
            1.0,
            std::f64::consts::TAU * (8f64.sqrt() - 2.0),
        );
        assert!((re - want.re).abs() < 1e-9 && (im - want.im).abs() < 1e-9);
        assert_eq!(out.files[0].0, "series.csv");
    }

    #[test]
    fn case_v_prediction_maps_to_refusal_exit() {
        let r = run(
            r#"{"task":"predict","expr":"1/2*t^2 + t^(2/3)","shifts":[0],"signs":[1],"lambda":"uniform"}"#,
        );
        assert_eq!(exit_code(&r), 2);
    }

    #[test]
    fn failing_verdict_exits_one() {
        // a correlation of modulus 1 against tol 0.5 must fail
        let r = run(
            r#"{"task":"correlate","expr":"sqrt2*t^2","shifts":[2,1,1,0],"signs":[1,-1,-1,1],"N":4096,"tol":0.5}"#,
        );
        assert_eq!(exit_code(&r), 1);
    }

    #[test]
    fn seed_override_wins() {
        let job: Job = serde_json::from_str(
            r#"{"task":"ortho","expr":"t^(3/2)","weight":{"kind":"bernoulli","seed":7},"N":4096}"#,
        )
        .unwrap();
        let out = execute(&job, 1, 128, Some(99)).unwrap();
        assert_eq!(out.seed, 99);
        let out = execute(&job, 1, 128, None).unwrap();
        assert_eq!(out.seed, 7);
    }

    #[test]
    fn results_are_thread_count_invariant() {
        let src = r#"{"task":"correlate","expr":"t^(3/2)","shifts":[1,0],"signs":[1,-1],"N":65536}"#;
        let job: Job = serde_json::from_str(src).unwrap();
        let render = |threads| {
            let out = execute(&job, threads, 128, None).unwrap();
            (
                serde_json::to_string(&out.verdicts).unwrap(),
                out.files[0].1.clone(),
            )
        };
        assert_eq!(render(1), render(4));
    }

    #[test]
    fn outputs_land_in_the_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(r#"{"task":"eval","expr":"t^(3/2)","n":[10,100]}"#).unwrap();
        write_outputs(dir.path(), "eval", &out, 128).unwrap();
        assert!(dir.path().join("results.json").exists());
        assert!(dir.path().join("manifest.json").exists());
        let csv = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
        assert!(csv.starts_with("n,frac,err,floor\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
