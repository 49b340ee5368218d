use std::io::Write;
use std::path::PathBuf;

use cpt_sense::io::{sig12, sweep_record, SWEEP_COLUMNS};
use cpt_sense::{
    differentials, local_domains, mismatch_loss, numeric_sweep, piecewise_continuation, solve, LocalDomain, Optimum,
    Param, Scenario, SensitivityDifferentials,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::output::{file_stem, json_bytes, table_bytes, Sink};
use crate::{CliError, Command, Format, RunConfig, EXIT_INVALID_SCENARIO, EXIT_OK, EXIT_SOLVER};

/// Tally of per-scenario outcomes, turned into the exit code.
#[derive(Default)]
struct Status {
    invalid: usize,
    failed: usize,
}

impl Status {
    fn code(&self) -> i32 {
        if self.invalid > 0 {
            EXIT_INVALID_SCENARIO
        } else if self.failed > 0 {
            EXIT_SOLVER
        } else {
            EXIT_OK
        }
    }
}

pub(crate) fn dispatch(
    command: &Command,
    config: &RunConfig,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<i32, CliError> {
    if let Command::GenScenarios { count } = command {
        return gen_scenarios(*count, config, stdout);
    }
    let mut status = Status::default();
    let scenarios = valid_scenarios(config, &mut status, stderr)?;
    let mut sink = Sink { dir: config.out.clone(), stdout };
    match command {
        Command::Solve => cmd_solve(&scenarios, config, &mut sink, &mut status, stderr)?,
        Command::Domain => cmd_domain(&scenarios, config, &mut sink, &mut status, stderr)?,
        Command::Sweep => {
            sink.dir = Some(config.out.clone().unwrap_or_else(|| PathBuf::from(".")));
            cmd_sweep(&scenarios, config, &mut sink, &mut status, stderr)?
        }
        Command::Mismatch { assume } => cmd_mismatch(&scenarios, config, assume, &mut sink, &mut status, stderr)?,
        Command::Validate => {
            writeln!(sink.stdout, "{} valid, {} invalid", scenarios.len(), status.invalid)?;
        }
        Command::GenScenarios { .. } => unreachable!("handled above"),
    }
    Ok(status.code())
}

fn valid_scenarios(config: &RunConfig, status: &mut Status, stderr: &mut dyn Write) -> Result<Vec<Scenario>, CliError> {
    let mut valid = Vec::new();
    for (name, s) in config.load_scenarios()? {
        match s.validate() {
            Ok(()) => valid.push(s),
            Err(violations) => {
                status.invalid += 1;
                let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
                writeln!(stderr, "invalid scenario {name}: {}", text.join("; "))?;
            }
        }
    }
    Ok(valid)
}

fn report_failure(status: &mut Status, stderr: &mut dyn Write, label: &str, e: &cpt_sense::Error) -> Result<(), CliError> {
    status.failed += 1;
    writeln!(stderr, "scenario `{label}`: {e}")?;
    Ok(())
}

fn num(v: f64) -> String {
    sig12(v)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(sig12).unwrap_or_default()
}

const SOLVE_COLUMNS: [&str; 9] =
    ["label", "gamma_star", "f_star", "mu_low", "mu_high", "active", "kkt_residual", "concave_certified", "degenerate"];

fn solve_record(label: &str, r: &Optimum) -> Vec<String> {
    vec![
        label.to_string(),
        num(r.gamma_star),
        num(r.f_star),
        num(r.mu_low),
        num(r.mu_high),
        r.active.name().to_string(),
        num(r.kkt_residual),
        r.concave_certified.to_string(),
        r.degenerate.to_string(),
    ]
}

fn cmd_solve(
    scenarios: &[Scenario],
    config: &RunConfig,
    sink: &mut Sink,
    status: &mut Status,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let results: Vec<_> = scenarios.par_iter().map(|s| solve(s, &config.params, &config.policy)).collect();
    let mut solved = Vec::new();
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(r) => solved.push((s.label.clone(), r)),
            Err(e) => report_failure(status, stderr, &s.label, &e)?,
        }
    }
    let bytes = match config.format {
        Format::Csv => {
            let rows: Vec<_> = solved.iter().map(|(l, r)| solve_record(l, r)).collect();
            table_bytes(&SOLVE_COLUMNS, &rows)?
        }
        Format::Json => {
            let items: Vec<Value> = solved.iter().map(|(l, r)| json!({ "label": l, "optimum": r })).collect();
            json_bytes(&Value::Array(items))?
        }
    };
    sink.emit(&format!("solve.{}", config.format.extension()), &bytes)
}

struct Analysis {
    label: String,
    optimum: Optimum,
    diffs: SensitivityDifferentials<f64>,
    domains: LocalDomain<f64>,
}

fn analyse(s: &Scenario, config: &RunConfig) -> Result<Analysis, cpt_sense::Error> {
    let optimum = solve(s, &config.params, &config.policy)?;
    let diffs = differentials(&optimum, s, &config.params, &config.policy)?;
    let domains = local_domains(&optimum, &diffs);
    Ok(Analysis { label: s.label.clone(), optimum, diffs, domains })
}

const DOMAIN_COLUMNS: [&str; 14] = [
    "label",
    "param",
    "active",
    "dgamma_dtheta",
    "dmu_dtheta",
    "df_dtheta",
    "dl_dtheta",
    "d2f_dtheta2",
    "delta_max_pos",
    "delta_max_neg",
    "event_pos",
    "event_neg",
    "domain_pct",
    "binding_event",
];

fn domain_record(a: &Analysis, k: Param) -> Vec<String> {
    let d = &a.diffs;
    let dom = &a.domains[k];
    vec![
        a.label.clone(),
        k.name().to_string(),
        a.optimum.active.name().to_string(),
        num(d.dgamma_dtheta[k]),
        num(d.dmu_dtheta[k]),
        num(d.df_dtheta[k]),
        num(d.dl_dtheta[k]),
        num(d.d2f_dtheta2[k]),
        opt_num(dom.delta_max_pos),
        opt_num(dom.delta_max_neg),
        dom.event_pos.name().to_string(),
        dom.event_neg.name().to_string(),
        opt_num(dom.magnitude()),
        dom.binding_event().name().to_string(),
    ]
}

/// Differentials keyed `dgamma_dalpha`, `d2f_dalpha2`, ... and domains per parameter.
fn analysis_json(a: &Analysis, params: &[Param]) -> Value {
    let mut diffs = Map::new();
    let mut domains = Map::new();
    for &k in params {
        let n = k.name();
        let d = &a.diffs;
        diffs.insert(format!("dgamma_d{n}"), json!(d.dgamma_dtheta[k]));
        diffs.insert(format!("dmu_d{n}"), json!(d.dmu_dtheta[k]));
        diffs.insert(format!("df_d{n}"), json!(d.df_dtheta[k]));
        diffs.insert(format!("dl_d{n}"), json!(d.dl_dtheta[k]));
        diffs.insert(format!("d2f_d{n}2"), json!(d.d2f_dtheta2[k]));
        let dom = &a.domains[k];
        domains.insert(
            n.to_string(),
            json!({
                "delta_max_pos": dom.delta_max_pos,
                "delta_max_neg": dom.delta_max_neg,
                "event_pos": dom.event_pos.name(),
                "event_neg": dom.event_neg.name(),
                "domain_pct": dom.magnitude(),
                "binding_event": dom.binding_event().name(),
            }),
        );
    }
    json!({
        "label": a.label,
        "optimum": a.optimum,
        "differentials": diffs,
        "domains": domains,
    })
}

fn analyses(
    scenarios: &[Scenario],
    config: &RunConfig,
    status: &mut Status,
    stderr: &mut dyn Write,
) -> Result<Vec<Analysis>, CliError> {
    let results: Vec<_> = scenarios.par_iter().map(|s| analyse(s, config)).collect();
    let mut done = Vec::new();
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(a) => done.push(a),
            Err(e) => report_failure(status, stderr, &s.label, &e)?,
        }
    }
    Ok(done)
}

fn cmd_domain(
    scenarios: &[Scenario],
    config: &RunConfig,
    sink: &mut Sink,
    status: &mut Status,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let done = analyses(scenarios, config, status, stderr)?;
    let bytes = match config.format {
        Format::Csv => {
            let rows: Vec<_> = done
                .iter()
                .flat_map(|a| config.sweep_params.iter().map(move |&k| domain_record(a, k)))
                .collect();
            table_bytes(&DOMAIN_COLUMNS, &rows)?
        }
        Format::Json => {
            json_bytes(&Value::Array(done.iter().map(|a| analysis_json(a, &config.sweep_params)).collect()))?
        }
    };
    sink.emit(&format!("domain.{}", config.format.extension()), &bytes)
}

fn cmd_sweep(
    scenarios: &[Scenario],
    config: &RunConfig,
    sink: &mut Sink,
    status: &mut Status,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let done = analyses(scenarios, config, status, stderr)?;
    let jobs: Vec<(&Scenario, Param)> = scenarios
        .iter()
        .filter(|s| done.iter().any(|a| a.label == s.label))
        .flat_map(|s| config.sweep_params.iter().map(move |&k| (s, k)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(s, k)| {
            let spec = config.sweep_spec(k);
            let rows = numeric_sweep(s, &config.params, &config.policy, &spec, config.taylor);
            let pw = piecewise_continuation(s, &config.params, &config.policy, &spec);
            (rows, pw)
        })
        .collect();

    let mut summary = Vec::new();
    for a in &done {
        let mut entry = analysis_json(a, &config.sweep_params);
        let mut breakpoints = Map::new();
        for ((s, k), (rows, pw)) in jobs.iter().zip(&results).filter(|((s, _), _)| s.label == a.label) {
            match rows {
                Ok(rows) => {
                    let name = format!("sweep_{}_{}.{}", file_stem(&s.label), k.name(), config.format.extension());
                    let bytes = match config.format {
                        Format::Csv => table_bytes(&SWEEP_COLUMNS, &rows.iter().map(sweep_record).collect::<Vec<_>>())?,
                        Format::Json => json_bytes(&serde_json::to_value(rows).map_err(cpt_sense::Error::from)?)?,
                    };
                    sink.emit(&name, &bytes)?;
                    if rows.iter().any(|r| r.error.is_some()) {
                        status.failed += 1;
                        writeln!(stderr, "scenario `{}`: some {k} sweep rows failed", s.label)?;
                    }
                }
                Err(e) => report_failure(status, stderr, &s.label, e)?,
            }
            let bp = match pw {
                Ok(pw) => json!({ "breakpoints": pw.breakpoints, "segments": pw.segments.len() }),
                Err(e) => json!({ "error": e.to_string() }),
            };
            breakpoints.insert(k.name().to_string(), bp);
        }
        entry["continuation"] = Value::Object(breakpoints);
        summary.push(entry);
    }
    let config_json = json!({
        "alpha": config.params.alpha(),
        "beta": config.params.beta(),
        "lambda": config.params.lambda(),
        "p": config.params.p_worst(),
        "reference": config.policy.label(),
        "range": config.rel_range,
        "steps": config.steps,
        "taylor2_half_factor": config.taylor.half_factor,
    });
    sink.emit("summary.json", &json_bytes(&json!({ "config": config_json, "scenarios": summary }))?)
}

fn cmd_mismatch(
    scenarios: &[Scenario],
    config: &RunConfig,
    assume: &[(Param, f64)],
    sink: &mut Sink,
    status: &mut Status,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let mut assumed = config.params;
    for &(k, v) in assume {
        assumed = assumed.with(k, v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let results: Vec<_> = scenarios.par_iter().map(|s| mismatch_loss(s, &config.params, &assumed, &config.policy)).collect();
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for (s, r) in scenarios.iter().zip(results) {
        match r {
            Ok(m) => {
                rows.push(vec![
                    s.label.clone(),
                    num(m.delta_f),
                    num(m.gamma_true),
                    num(m.gamma_assumed),
                    num(m.f_true),
                    num(m.f_assumed),
                ]);
                items.push(json!({ "label": s.label, "mismatch": m }));
            }
            Err(e) => report_failure(status, stderr, &s.label, &e)?,
        }
    }
    let bytes = match config.format {
        Format::Csv => table_bytes(&["label", "delta_f", "gamma_true", "gamma_assumed", "f_true", "f_assumed"], &rows)?,
        Format::Json => json_bytes(&Value::Array(items))?,
    };
    sink.emit(&format!("mismatch.{}", config.format.extension()), &bytes)
}

fn gen_scenarios(count: usize, config: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let list: Vec<Scenario> = cpt_sense::generate_random(&config.ranges, count, config.seed)?;
    let bytes = match config.format {
        Format::Csv => {
            let mut buf = Vec::new();
            cpt_sense::io::write_scenarios_csv(&mut buf, &list)?;
            buf
        }
        Format::Json => json_bytes(&serde_json::to_value(&list).map_err(cpt_sense::Error::from)?)?,
    };
    let mut sink = Sink { dir: config.out.clone(), stdout };
    sink.emit(&format!("scenarios.{}", config.format.extension()), &bytes)?;
    Ok(EXIT_OK)
}
