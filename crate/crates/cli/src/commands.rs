//! Subcommand implementations. Each returns the full rendered output.

use std::fmt::Write as _;
use std::time::Instant;

use ising_quench::bounds::{verify_sweep, SweepConfig, SweepRow, Verdict};
use ising_quench::distribution::{
    empirical_check, full_distribution_with, sample_with, SampleBatch,
};
use ising_quench::instances::{random_matrix, UNIT_ENTRIES};
use ising_quench::permanent::{permanent_fast_with, permanent_naive, NAIVE_MAX_N};
use ising_quench::rug::{Float, Integer};
use ising_quench::series::{
    in_validity_window, leading_coefficient_check, moment_sequence_with, series_amplitude,
    LEADING_CHECK_MAX_N,
};
use ising_quench::spectrum::{
    amplitude_adaptive, amplitude_at, probability_from_amplitude, signed_spectrum_with,
    SpectrumOptions, DEFAULT_MAX_CONFIG_BITS,
};
use ising_quench::{bounds, CouplingMatrix, Execution, Result, SpinConfiguration, Time};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig, SizeRange, Task};

/// Rendered output and whether the run counts as a verification failure.
pub struct Outcome {
    pub output: String,
    pub verification_failed: bool,
}

impl Outcome {
    fn ok(output: String) -> Self {
        Self {
            output,
            verification_failed: false,
        }
    }
}

pub fn run(config: &RunConfig) -> Result<Outcome> {
    let format = config.format;
    let exec = config.exec;
    match &config.task {
        Task::Permanent { matrix } => permanent(matrix, format, exec).map(Outcome::ok),
        Task::Amplitude {
            matrix,
            time,
            target,
            precision_bits,
            adaptive,
        } => amplitude(
            matrix,
            time,
            *target,
            *precision_bits,
            *adaptive,
            format,
            exec,
        )
        .map(Outcome::ok),
        Task::Distribution {
            matrix,
            time,
            precision_bits,
        } => distribution(matrix, time, *precision_bits, format, exec).map(Outcome::ok),
        Task::Sample {
            matrix,
            time,
            precision_bits,
            samples,
            seed,
            method,
            check,
        } => {
            let dist = full_distribution_with(matrix, time, *precision_bits, exec)?;
            let batch = sample_with(&dist, *samples, *seed, *method);
            let report = check.then(|| empirical_check(&batch, &dist)).transpose()?;
            Ok(Outcome::ok(render_samples(&batch, report.as_ref(), format)))
        }
        Task::Series {
            matrix,
            time,
            target,
            alpha_max,
            moments,
            precision_bits,
        } => series(
            matrix,
            time.as_ref(),
            *target,
            *alpha_max,
            *moments,
            *precision_bits,
            format,
            exec,
        )
        .map(Outcome::ok),
        Task::Verify {
            sizes,
            instances,
            entries,
            epsilon,
            epsilon_text,
            seed,
            max_precision,
        } => {
            let cfg = SweepConfig {
                n_values: sizes.sizes(),
                instances: *instances,
                entries: entries.clone(),
                epsilon: epsilon.clone(),
                seed: *seed,
                max_precision: *max_precision,
                exec,
            };
            let rows = verify_sweep(&cfg)?;
            Ok(render_verify(&rows, &cfg, epsilon_text, format))
        }
        Task::Threshold {
            sizes,
            epsilons,
            j_max,
        } => threshold(*sizes, epsilons, *j_max, format).map(Outcome::ok),
        Task::Bench {
            sizes,
            repeats,
            seed,
        } => bench(*sizes, *repeats, *seed, format, exec).map(Outcome::ok),
    }
}

fn digits(precision: u32) -> usize {
    (f64::from(precision) * std::f64::consts::LOG10_2).ceil() as usize + 1
}

/// Decimal rendering with every significant digit of `precision` bits.
fn decimal(x: &Float) -> String {
    x.to_string_radix(10, Some(digits(x.prec())))
}

fn bar(x: &Float) -> String {
    format!("{:e}", x.to_f64_round(ising_quench::rug::float::Round::Up))
}

fn to_json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn csv_text<R: Serialize>(rows: &[R]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("flat rows serialize to CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV output is UTF-8")
}

/// `key: value` lines.
fn text_lines(pairs: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

fn permanent(matrix: &CouplingMatrix, format: Format, exec: Execution) -> Result<String> {
    let n = matrix.n();
    let fast = permanent_fast_with(matrix, exec);
    let naive = (n <= NAIVE_MAX_N)
        .then(|| permanent_naive(matrix))
        .transpose()?;
    let agree = naive.as_ref().map(|p| p.value == fast.value);
    if agree == Some(false) {
        log::error!("permanent engines disagree");
    }
    let naive_text = naive.as_ref().map(|p| p.value.to_string());
    Ok(match format {
        Format::Json => to_json_text(&json!({
            "n": n,
            "permanent": fast.value.to_string(),
            "algorithm": fast.algorithm,
            "naive": naive_text,
            "engines_agree": agree,
        })),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                n: usize,
                permanent: String,
                naive: Option<&'a str>,
                engines_agree: Option<bool>,
            }
            csv_text(&[Row {
                n,
                permanent: fast.value.to_string(),
                naive: naive_text.as_deref(),
                engines_agree: agree,
            }])
        }
        Format::Text => text_lines(&[
            ("n", n.to_string()),
            ("permanent", fast.value.to_string()),
            (
                "naive",
                naive_text.unwrap_or_else(|| format!("skipped (n > {NAIVE_MAX_N})")),
            ),
            (
                "engines agree",
                agree.map_or_else(|| "n/a".to_string(), |a| a.to_string()),
            ),
        ]),
    })
}

#[allow(clippy::too_many_arguments)]
fn amplitude(
    matrix: &CouplingMatrix,
    time: &Time,
    target: SpinConfiguration,
    precision: u32,
    adaptive: bool,
    format: Format,
    exec: Execution,
) -> Result<String> {
    let options = SpectrumOptions {
        exec,
        ..Default::default()
    };
    let spectrum = signed_spectrum_with(matrix, target, &options)?;
    let amp = if adaptive {
        amplitude_adaptive(&spectrum, time, precision)?
    } else {
        amplitude_at(&spectrum, time, precision)?
    };
    let prob = probability_from_amplitude(&amp);
    let fields = [
        ("n", matrix.n().to_string()),
        ("target", target.to_bitstring()),
        ("time", time.to_string()),
        ("precision", amp.precision.to_string()),
        ("re", decimal(&amp.re)),
        ("im", decimal(&amp.im)),
        ("abs", decimal(&amp.abs())),
        ("amplitude_error", bar(&amp.guaranteed_abs_error)),
        ("probability", decimal(&prob.value)),
        ("probability_error", bar(&prob.guaranteed_abs_error)),
        ("resolved", amp.is_resolved().to_string()),
    ];
    Ok(render_fields(
        &fields,
        format,
        &["n", "precision", "resolved"],
    ))
}

/// A single record in any format. Keys in `raw` are emitted as JSON literals.
fn render_fields(fields: &[(&str, String)], format: Format, raw: &[&str]) -> String {
    match format {
        Format::Json => {
            let mut map = serde_json::Map::new();
            for (k, v) in fields {
                let value = if raw.contains(k) {
                    serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.clone()))
                } else {
                    Value::String(v.clone())
                };
                map.insert((*k).to_string(), value);
            }
            to_json_text(&Value::Object(map))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(fields.iter().map(|(k, _)| *k))
                .expect("in-memory CSV");
            w.write_record(fields.iter().map(|(_, v)| v.as_str()))
                .expect("in-memory CSV");
            String::from_utf8(w.into_inner().expect("in-memory writer"))
                .expect("CSV output is UTF-8")
        }
        Format::Text => text_lines(fields),
    }
}

fn distribution(
    matrix: &CouplingMatrix,
    time: &Time,
    precision: u32,
    format: Format,
    exec: Execution,
) -> Result<String> {
    let dist = full_distribution_with(matrix, time, precision, exec)?;
    Ok(match format {
        Format::Json => {
            let mut doc = dist.to_json();
            doc["time"] = Value::String(time.to_string());
            doc["total_mass"] = json!(dist.total_mass());
            to_json_text(&doc)
        }
        Format::Csv => dist.to_csv(),
        Format::Text => {
            let mut out = text_lines(&[
                ("n", dist.n.to_string()),
                ("time", time.to_string()),
                ("precision", dist.precision.to_string()),
                ("total mass", format!("{:e}", dist.total_mass())),
                ("total mass error", format!("{:e}", dist.total_mass_error)),
                ("amplitude error", format!("{:e}", dist.amplitude_error)),
            ]);
            for (mask, &p) in dist.probabilities.iter().enumerate() {
                if p > 0.0 {
                    let c = SpinConfiguration::new(dist.n, mask as u64).expect("mask within range");
                    let _ = writeln!(out, "{} {p:e}", c.to_bitstring());
                }
            }
            out
        }
    })
}

fn render_samples(
    batch: &SampleBatch,
    report: Option<&ising_quench::EmpiricalReport>,
    format: Format,
) -> String {
    let bits = |m: u64| {
        SpinConfiguration::new(batch.n, m)
            .expect("sampled mask within range")
            .to_bitstring()
    };
    if let Some(r) = report {
        log::info!(
            "total variation {:e}, chi-square {:.3} on {} dof",
            r.total_variation,
            r.chi_square,
            r.degrees_of_freedom
        );
    }
    match format {
        Format::Json => to_json_text(&json!({
            "n": batch.n,
            "seed": batch.seed,
            "count": batch.count,
            "method": batch.method,
            "outcomes": batch.outcomes.iter().map(|&m| bits(m)).collect::<Vec<_>>(),
            "check": report,
        })),
        Format::Csv => {
            let mut out = String::from("index,mask,bitstring\n");
            for (k, &m) in batch.outcomes.iter().enumerate() {
                let _ = writeln!(out, "{k},{m},{}", bits(m));
            }
            out
        }
        Format::Text => {
            if let Some(r) = report {
                eprintln!(
                    "total variation: {:e}\nchi-square: {} ({} dof, p = {})\nall-up observed: {} (probability {:e}, ~{:e} samples for a 10% estimate)",
                    r.total_variation,
                    r.chi_square,
                    r.degrees_of_freedom,
                    r.p_value.map_or_else(|| "n/a".into(), |p| format!("{p:e}")),
                    r.all_up_observed,
                    r.all_up_probability,
                    r.samples_for_all_up_estimate,
                );
            }
            batch.to_lines()
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn series(
    matrix: &CouplingMatrix,
    time: Option<&Time>,
    target: SpinConfiguration,
    alpha_max: usize,
    moments: Option<usize>,
    precision: u32,
    format: Format,
    exec: Execution,
) -> Result<String> {
    let n = matrix.n();
    let lowest = {
        let (a, b) = (target.ups_a() as usize, target.ups_b() as usize);
        (a % 2 == b % 2).then_some(a.max(b))
    };
    let top = lowest.map_or(n, |l| l + 2 * alpha_max);
    let m_max = moments.unwrap_or(top).max(top);
    let seq = moment_sequence_with(matrix, target, m_max, exec)?;
    let evaluation = time
        .map(|t| series_amplitude(&seq, t, alpha_max, precision).map(|e| (t, e)))
        .transpose()?;
    let leading = (target.is_all_up() && n <= LEADING_CHECK_MAX_N)
        .then(|| leading_coefficient_check(matrix))
        .transpose()?;
    let moment_text: Vec<String> = seq.moments.iter().map(Integer::to_string).collect();

    Ok(match format {
        Format::Json => {
            let eval = evaluation.as_ref().map(|(t, e)| {
                json!({
                    "time": t.to_string(),
                    "alpha_max": e.alpha_max,
                    "top_order": e.top_order,
                    "precision": e.precision,
                    "re": decimal(&e.re),
                    "im": decimal(&e.im),
                    "tail_bound": e.tail_bound.as_ref().map(bar),
                    "rounding_error": bar(&e.rounding_error),
                    "window_ok": in_validity_window(n, matrix.j_max(), t),
                })
            });
            to_json_text(&json!({
                "n": n,
                "target": target.to_bitstring(),
                "lowest_order": seq.lowest_order(),
                "moments": moment_text,
                "leading_coefficient": leading,
                "evaluation": eval,
            }))
        }
        Format::Csv => {
            let mut out = String::from("order,moment\n");
            for (m, v) in moment_text.iter().enumerate() {
                let _ = writeln!(out, "{m},{v}");
            }
            out
        }
        Format::Text => {
            let mut out = text_lines(&[
                ("n", n.to_string()),
                ("target", target.to_bitstring()),
                (
                    "lowest order",
                    seq.lowest_order()
                        .map_or_else(|| "none (all moments vanish)".into(), |l| l.to_string()),
                ),
            ]);
            for (m, v) in moment_text.iter().enumerate() {
                let _ = writeln!(out, "moment {m}: {v}");
            }
            if let Some(r) = &leading {
                out.push_str(&text_lines(&[
                    ("permanent", r.permanent.to_string()),
                    ("n! * permanent", r.n_factorial_times_permanent.to_string()),
                    ("moment n (state vector)", r.mu_n_state_vector.to_string()),
                    ("moment n (spectrum)", r.mu_n_spectrum.to_string()),
                    ("leading coefficient agrees", r.agrees.to_string()),
                ]));
            }
            if let Some((t, e)) = &evaluation {
                out.push_str(&text_lines(&[
                    ("time", t.to_string()),
                    (
                        "orders",
                        format!(
                            "{}..={} step 2",
                            seq.lowest_order().unwrap_or(0),
                            e.top_order
                        ),
                    ),
                    ("re", decimal(&e.re)),
                    ("im", decimal(&e.im)),
                    (
                        "tail bound",
                        e.tail_bound
                            .as_ref()
                            .map_or_else(|| "none (outside window)".into(), bar),
                    ),
                    ("rounding error", bar(&e.rounding_error)),
                ]));
            }
            out
        }
    })
}

#[derive(Serialize)]
struct VerifyCsvRow<'a> {
    n: usize,
    seed: u64,
    t: f64,
    eta_measured: f64,
    eta_bound: Option<f64>,
    verdict: &'static str,
    eta_error_bar: f64,
    p_exact: &'a str,
    p_exact_error: &'a str,
    p_leading: &'a str,
    permanent: String,
    precision_bits: u32,
    window_ok: bool,
    degenerate: bool,
}

fn render_verify(rows: &[SweepRow], cfg: &SweepConfig, epsilon: &str, format: Format) -> Outcome {
    let count = |v: Verdict| rows.iter().filter(|r| r.report.verdict == v).count();
    let (pass, fail, unresolved, outside) = (
        count(Verdict::Pass),
        count(Verdict::Fail),
        count(Verdict::Unresolved),
        count(Verdict::OutsideWindow),
    );
    if unresolved > 0 {
        log::warn!(
            "{unresolved} instances could not be resolved at {} bits",
            cfg.max_precision
        );
    }
    if fail > 0 {
        log::error!("{fail} instances violate the bound");
    }
    let output = match format {
        Format::Json => to_json_text(&json!({
            "epsilon": epsilon,
            "seed": cfg.seed,
            "instances": cfg.instances,
            "entries": cfg.entries,
            "rows": rows,
            "summary": {"pass": pass, "fail": fail, "unresolved": unresolved, "outside_window": outside},
        })),
        Format::Csv => {
            let csv_rows: Vec<VerifyCsvRow> = rows
                .iter()
                .map(|r| VerifyCsvRow {
                    n: r.n,
                    seed: r.seed,
                    t: r.report.time,
                    eta_measured: r.report.eta_measured,
                    eta_bound: r.report.eta_bound,
                    verdict: r.report.verdict.as_str(),
                    eta_error_bar: r.report.eta_error_bar,
                    p_exact: &r.report.p_exact,
                    p_exact_error: &r.report.p_exact_error,
                    p_leading: &r.report.p_leading,
                    permanent: r.report.permanent.to_string(),
                    precision_bits: r.report.precision_bits,
                    window_ok: r.report.window_ok,
                    degenerate: r.report.degenerate,
                })
                .collect();
            csv_text(&csv_rows)
        }
        Format::Text => {
            let mut out = String::from("n  seed        t             eta            bound          error bar      verdict\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{:<2} {:<11} {:<13.6e} {:<14.6e} {:<14} {:<14.3e} {}",
                    r.n,
                    r.seed,
                    r.report.time,
                    r.report.eta_measured,
                    r.report
                        .eta_bound
                        .map_or_else(|| "-".into(), |b| format!("{b:.6e}")),
                    r.report.eta_error_bar,
                    r.report.verdict.as_str(),
                );
            }
            let _ = writeln!(
                out,
                "pass: {pass}, fail: {fail}, unresolved: {unresolved}, outside window: {outside}"
            );
            out
        }
    };
    Outcome {
        output,
        verification_failed: fail > 0,
    }
}

#[derive(Serialize)]
struct ThresholdRow<'a> {
    n: usize,
    j_max: u64,
    epsilon: &'a str,
    t_star: f64,
    log10_t_star: f64,
    window_limited: bool,
}

fn threshold(
    sizes: SizeRange,
    epsilons: &[(String, ising_quench::rug::Rational)],
    j_max: u64,
    format: Format,
) -> Result<String> {
    let mut rows = Vec::new();
    for (text, eps) in epsilons {
        for n in sizes.sizes() {
            let t = bounds::time_threshold(n, j_max, eps)?;
            let cap = 1.0 / (j_max as f64 * std::f64::consts::SQRT_2 * (n * n) as f64);
            let t_star = t.to_f64();
            rows.push(ThresholdRow {
                n,
                j_max,
                epsilon: text,
                t_star,
                log10_t_star: t_star.log10(),
                window_limited: t_star >= cap * (1.0 - 1e-12),
            });
        }
    }
    Ok(match format {
        Format::Json => to_json_text(&json!({ "rows": rows })),
        Format::Csv => csv_text(&rows),
        Format::Text => {
            let mut out = String::from("n  j_max  epsilon   t*\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:<2} {:<6} {:<9} {:.6e}{}",
                    r.n,
                    r.j_max,
                    r.epsilon,
                    r.t_star,
                    if r.window_limited { "  (window)" } else { "" }
                );
            }
            out
        }
    })
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    threads: usize,
    spectrum_seconds: Option<f64>,
    permanent_seconds: f64,
}

fn median_seconds(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

fn bench(
    sizes: SizeRange,
    repeats: usize,
    seed: u64,
    format: Format,
    exec: Execution,
) -> Result<String> {
    let threads = if exec.is_parallel() {
        crate::worker_threads()
    } else {
        1
    };
    let mut rows = Vec::new();
    for n in sizes.sizes() {
        let matrix = random_matrix(n, &UNIT_ENTRIES, seed)?;
        let options = SpectrumOptions {
            exec,
            ..Default::default()
        };
        let spectrum_seconds = if 2 * n as u32 <= DEFAULT_MAX_CONFIG_BITS {
            Some(median_seconds(repeats, || {
                signed_spectrum_with(&matrix, SpinConfiguration::all_up(n), &options).map(drop)
            })?)
        } else {
            None
        };
        let permanent_seconds = median_seconds(repeats, || {
            permanent_fast_with(&matrix, exec);
            Ok(())
        })?;
        log::info!("n = {n} done");
        rows.push(BenchRow {
            n,
            threads,
            spectrum_seconds,
            permanent_seconds,
        });
    }
    Ok(match format {
        Format::Json => to_json_text(&json!({ "repeats": repeats, "seed": seed, "rows": rows })),
        Format::Csv => csv_text(&rows),
        Format::Text => {
            let mut out = String::from("n  threads  spectrum (s)  permanent (s)\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:<2} {:<8} {:<13} {:.3e}",
                    r.n,
                    r.threads,
                    r.spectrum_seconds
                        .map_or_else(|| "-".into(), |s| format!("{s:.3e}")),
                    r.permanent_seconds
                );
            }
            out
        }
    })
}
