use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lowrank_bp::bp::{expected_error_bound, expected_error_t0, tail_bounds, TailBounds};
use lowrank_bp::combinat::{
    build_packing, build_packing_with_q, conjectured_family_bounds, has_perfect_matching, max_family_no_matchable_with,
    verify_packing, SearchOptions,
};
use lowrank_bp::experiment::{
    run_bp_tail, run_pipeline, run_subspace, BpTailConfig, ExperimentRecord, PipelineExperimentConfig, SubspaceExperimentConfig,
    SUBSPACE_MATCH_TOL,
};
use lowrank_bp::gen::sample_instance;
use lowrank_bp::io;
use lowrank_bp::pipeline::{recover_dataset, PipelineConfig};
use lowrank_bp::subrec::SubrecConfig;
use lowrank_bp::IndexSet;
use serde::Serialize;
use serde_json::json;

use crate::config::Settings;
use crate::CliError;

pub const TAIL_HEADER: [&str; 10] =
    ["t", "trials", "exceed", "p_hat", "wilson_lo", "wilson_hi", "bound_factorial", "bound_uniform", "bound_geometric", "bound_min"];
pub const BOUNDS_HEADER: [&str; 5] = ["t", "bound_factorial", "bound_uniform", "bound_geometric", "bound_min"];
pub const PIPELINE_HEADER: [&str; 9] =
    ["trial", "seed", "subspace_ok", "subspace_distance", "mean_error", "max_error", "mean_estimate_error", "failure", "micros"];
pub const SUBSPACE_HEADER: [&str; 6] = ["trial", "seed", "subspace_ok", "subspace_distance", "failure", "micros"];
pub const RECORD_HEADER: [&str; 4] = ["trial", "seed", "error", "micros"];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn bound_fields(b: &TailBounds) -> [String; 4] {
    [b.bound_factorial.to_string(), b.bound_uniform.to_string(), opt(b.bound_geometric), b.minimum.to_string()]
}

/// CSV sink: `path` or stdout.
fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match path {
        Some(p) => Box::new(fs::File::create(p).map_err(|e| CliError::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn write_rows(path: Option<&Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| CliError::io(path.unwrap_or(Path::new("<stdout>")), e))
}

/// `<out>.json` beside a CSV output.
fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn write_summary(out: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    if let Some(p) = out {
        io::write_json(&summary_path(p), value)?;
    }
    Ok(())
}

pub fn bp_tail(st: &Settings, records: Option<&Path>) -> Result<(), CliError> {
    let cfg = BpTailConfig {
        d: st.d,
        k: st.k,
        s: st.s,
        b: st.b,
        adversary: st.adversary,
        subspace: st.subspace,
        trials: st.trials,
        seed: st.seed,
        t_grid: st.t_grid.clone(),
        execution: st.execution,
    };
    let res = run_bp_tail(&cfg)?;
    write_rows(
        st.out.as_deref(),
        &TAIL_HEADER,
        res.rows.iter().map(|r| {
            let mut v = vec![
                r.t.to_string(),
                r.trials.to_string(),
                r.exceed.to_string(),
                r.p_hat.to_string(),
                r.wilson_lo.to_string(),
                r.wilson_hi.to_string(),
            ];
            v.extend(bound_fields(&r.bounds));
            v
        }),
    )?;
    if let Some(p) = records {
        write_rows(
            Some(p),
            &RECORD_HEADER,
            res.records.iter().map(|r| vec![r.trial.to_string(), r.seed.to_string(), opt(r.error), r.micros.to_string()]),
        )?;
    }
    write_summary(st.out.as_deref(), &json!({ "config": cfg, "mean_error": res.mean_error, "rows": res.rows }))
}

fn pipeline_config(st: &Settings) -> PipelineConfig {
    PipelineConfig {
        truncation_radius_multiplier: st.truncation_multiplier,
        mean_estimator: st.mean_estimator,
        execution: st.execution,
        subrec: SubrecConfig { execution: st.execution, seed: st.seed, ..SubrecConfig::default() },
        ..PipelineConfig::default()
    }
}

fn experiment_config(st: &Settings) -> PipelineExperimentConfig {
    PipelineExperimentConfig {
        d: st.d,
        k: st.k,
        s: st.s,
        n: st.n,
        b: st.b,
        adversary: st.adversary,
        trials: st.trials,
        seed: st.seed,
        offset_mean: st.offset_mean,
        known_bound: !st.estimate_bound,
        pipeline: pipeline_config(st),
        execution: st.execution,
    }
}

fn fail_count(records: &[ExperimentRecord]) -> Result<(), CliError> {
    let failed: Vec<String> = records.iter().filter_map(|r| r.failure.as_ref().map(|f| format!("trial {}: {f}", r.trial))).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Regime(format!("{} of {} trials failed ({})", failed.len(), records.len(), failed[0])))
    }
}

fn ok_flag(r: &ExperimentRecord) -> String {
    r.subspace_distance.map_or("NA".into(), |x| (x < SUBSPACE_MATCH_TOL).to_string())
}

fn mean_of(records: &[ExperimentRecord], f: impl Fn(&ExperimentRecord) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = records.iter().filter_map(f).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn pipeline(st: &Settings, emit_instance: Option<&Path>) -> Result<(), CliError> {
    let cfg = experiment_config(st);
    if let Some(path) = emit_instance {
        let seed = lowrank_bp::gen::trial_seed(st.seed, 0);
        let model = cfg.model(seed)?;
        io::write_instance(path, &sample_instance(&model, st.n, st.s, st.adversary, seed)?)?;
    }
    let records = run_pipeline(&cfg)?;
    write_rows(
        st.out.as_deref(),
        &PIPELINE_HEADER,
        records.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.to_string(),
                ok_flag(r),
                opt(r.subspace_distance),
                opt(r.error),
                opt(r.max_error),
                opt(r.mean_estimate_error),
                r.failure.clone().unwrap_or_default(),
                r.micros.to_string(),
            ]
        }),
    )?;
    let successes = records.iter().filter(|r| r.subspace_distance.is_some_and(|x| x < SUBSPACE_MATCH_TOL)).count();
    write_summary(
        st.out.as_deref(),
        &json!({
            "trials": records.len(),
            "subspace_successes": successes,
            "mean_error": mean_of(&records, |r| r.error),
            "max_error": records.iter().filter_map(|r| r.max_error).reduce(f64::max),
            "mean_estimate_error": mean_of(&records, |r| r.mean_estimate_error),
            "failures": records.iter().filter(|r| r.failure.is_some()).count(),
        }),
    )?;
    fail_count(&records)
}

/// Recovers a stored instance; the report goes to `out` (JSON) or stdout.
pub fn pipeline_instance(st: &Settings, instance: &Path) -> Result<(), CliError> {
    let inst = io::read_instance(instance)?;
    let cfg = pipeline_config(st);
    let bound = (!st.estimate_bound).then(|| inst.model.coord_bound());
    let mut report = recover_dataset(&inst.corrupted, &cfg, bound)?;
    report.score(&inst.clean, inst.model.mean())?;
    match &st.out {
        Some(p) => io::write_report(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report.summary())?),
    }
    Ok(())
}

pub fn subspace(st: &Settings) -> Result<(), CliError> {
    let cfg = SubspaceExperimentConfig {
        d: st.d,
        k: st.k,
        s: st.s,
        n: st.n,
        b: st.b,
        adversary: st.adversary,
        trials: st.trials,
        seed: st.seed,
        offset_mean: st.offset_mean,
        subrec: SubrecConfig { execution: st.execution, ..SubrecConfig::default() },
        execution: st.execution,
    };
    let records = run_subspace(&cfg)?;
    write_rows(
        st.out.as_deref(),
        &SUBSPACE_HEADER,
        records.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.to_string(),
                ok_flag(r),
                opt(r.subspace_distance),
                r.failure.clone().unwrap_or_default(),
                r.micros.to_string(),
            ]
        }),
    )?;
    let successes = records.iter().filter(|r| r.subspace_distance.is_some_and(|x| x < SUBSPACE_MATCH_TOL)).count();
    write_summary(
        st.out.as_deref(),
        &json!({
            "trials": records.len(),
            "subspace_successes": successes,
            "in_regime": SubrecConfig::default().in_regime(st.k, st.s, st.d),
            "max_distance": records.iter().filter_map(|r| r.subspace_distance).reduce(f64::max),
        }),
    )?;
    fail_count(&records)
}

pub fn bounds(st: &Settings) -> Result<(), CliError> {
    write_rows(
        st.out.as_deref(),
        &BOUNDS_HEADER,
        st.t_grid.iter().map(|&t| {
            let mut v = vec![t.to_string()];
            v.extend(bound_fields(&tail_bounds(st.k, st.s, st.d, t)));
            v
        }),
    )?;
    let t0 = expected_error_t0(st.k, st.s, st.d);
    let bound = expected_error_bound(st.k, st.s, st.d, st.b);
    eprintln!("expected error: t0={t0} bound={bound}");
    write_summary(
        st.out.as_deref(),
        &json!({ "k": st.k, "s": st.s, "d": st.d, "B": st.b, "expected_error_t0": t0, "expected_error_bound": bound }),
    )
}

pub fn verify_packing_cmd(d: usize, s: usize, delta: usize, q: Option<u32>) -> Result<String, CliError> {
    let fam = match q {
        Some(q) => build_packing_with_q(d, s, delta, q)?,
        None => build_packing(d, s, delta)?,
    };
    if verify_packing(&fam, delta) {
        Ok(format!("OK size={}", fam.len()))
    } else {
        Err(CliError::Invariant(format!("packing of size {} has an intersection of size >= {delta}", fam.len())))
    }
}

pub fn conjecture_cmd(d: usize, s: usize, k: usize, t: usize, node_limit: Option<u64>) -> Result<String, CliError> {
    let opts = SearchOptions { node_limit, ..SearchOptions::default() };
    let res = max_family_no_matchable_with(d, s, k, t, &opts)?;
    let b = conjectured_family_bounds(d, s, k, t);
    let exact = if res.complete { res.size.to_string() } else { format!(">={}", res.size) };
    let matched = if res.complete { (res.size as u128 == b.exact_max_fi).to_string() } else { "unknown".into() };
    Ok(format!("exact={exact} max_Fi={} closed_form={} match={matched}", b.exact_max_fi, b.closed_form))
}

/// Sets as `"1 2;1 2"`: `;` between sets, whitespace or commas inside.
pub fn parse_sets(text: &str) -> Result<Vec<Vec<usize>>, CliError> {
    text.split(|c| c == ';' || c == '\n')
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<usize>().map_err(|_| CliError::Config(format!("bad element {t:?}"))))
                .collect()
        })
        .collect()
}

pub fn matching_cmd(sets: &[Vec<usize>], s: usize, witness: bool) -> Result<String, CliError> {
    let d = sets.iter().flatten().copied().max().unwrap_or(0);
    let idx = sets
        .iter()
        .map(|e| IndexSet::new(e.clone(), d.max(1)).map_err(|err| CliError::Config(err.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let res = has_perfect_matching(&idx, s);
    let mut out = res.matched.to_string();
    if let (true, Some(w)) = (witness, &res.witness) {
        for t in w {
            let elems: Vec<String> = t.elements().iter().map(ToString::to_string).collect();
            out.push('\n');
            out.push_str(&elems.join(" "));
        }
    }
    Ok(out)
}
