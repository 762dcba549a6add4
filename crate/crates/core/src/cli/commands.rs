use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{EvalSection, PlanSection, SampleSection, ScaleSection, SeedSection};
use super::output::{read_input, write_json, write_lines, Provenance};
use super::{
    AggregateArgs, CliError, CurateArgs, DistributionArgs, EvalArgs, FitArgs, MaterializeArgs,
    PlanArgs, SampleArgs, ScaleArgs, ValidateArgs,
};
use crate::doss::{domain_distribution, DossParams, Plan};
use crate::manifest::{
    canonicalize_sources, index_domains, parse_manifest, write_manifest, CanonicalSourceMap,
    DomainIndex, LineError, ManifestError, SampleRecord,
};
use crate::metrics::{
    parse_score_file, report_from_metrics, set_metrics, CdeAggregation, MetricsError,
};
use crate::plan_file::PlanFile;
use crate::sampler::{builtin_drawers, materialize_select, sample_stream_with, SampleStreamSpec};
use crate::scaling::{aggregate_trials, fit_power_law, Axis, ScalingConfig, TrialResult};
use crate::strategy::builtin_strategies;

const DEFAULT_RHO: f64 = 0.25;
const DEFAULT_TAU: f64 = 1.0;
const DEFAULT_THRESHOLD: f64 = 0.5;
const DEFAULT_DRAWER: &str = "cumulative";

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required (flag or config file)")))
}

fn load_manifest(
    path: &Path,
    prov: &mut Provenance,
) -> Result<(Vec<SampleRecord>, DomainIndex), CliError> {
    let bytes = read_input(path, prov)?;
    let records = parse_manifest(bytes.as_slice()).map_err(|e| in_file(path, e))?;
    let index = index_domains(&records).map_err(|e| in_file(path, e))?;
    Ok((records, index))
}

fn in_file(path: &Path, e: ManifestError) -> CliError {
    match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load_plan(path: &Path, prov: &mut Provenance) -> Result<Plan, CliError> {
    let bytes = read_input(path, prov)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Validation(format!("{}: plan file is not UTF-8", path.display())))?;
    Ok(PlanFile::from_json(&text)?.to_plan()?)
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::Computation(e.to_string()))?;
    Ok(buf)
}

fn emit(out: Option<&Path>, prov: &Provenance, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_lines(path, prov, bytes),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn hours(records: &[SampleRecord]) -> f64 {
    records.iter().map(|r| r.duration_s).sum::<f64>() / 3600.0
}

pub fn validate(args: ValidateArgs) -> Result<i32, CliError> {
    let mut prov = Provenance::new("validate", json!({}));
    let bytes = read_input(&args.manifest, &mut prov)?;
    let (errors, records, domains) = match parse_manifest(bytes.as_slice()) {
        Ok(records) => match index_domains(&records) {
            Ok(index) => (vec![], records.len(), index.len()),
            Err(e) => (
                vec![LineError {
                    line: 0,
                    reason: e.to_string(),
                }],
                records.len(),
                0,
            ),
        },
        Err(ManifestError::Invalid(errors)) => (errors, 0, 0),
        Err(e) => return Err(e.into()),
    };
    let report = json!({
        "valid": errors.is_empty(),
        "records": records,
        "domains": domains,
        "errors": errors,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("json value")
    );
    if let Some(path) = &args.report {
        write_json(path, &prov, &report)?;
    }
    Ok(if errors.is_empty() { 0 } else { 2 })
}

pub fn curate(args: CurateArgs) -> Result<(), CliError> {
    let mut prov = Provenance::new("curate", json!({ "map": args.map }));
    let map = match &args.map {
        Some(path) => {
            let bytes = read_input(path, &mut prov)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))?;
            CanonicalSourceMap::from_json(&text)?
        }
        None => CanonicalSourceMap::new(std::iter::empty::<((String, String), String)>())?,
    };
    let mut records = Vec::new();
    for path in &args.manifests {
        let bytes = read_input(path, &mut prov)?;
        records.extend(parse_manifest(bytes.as_slice()).map_err(|e| in_file(path, e))?);
    }
    let input_count = records.len();
    let (curated, report) = canonicalize_sources(&records, &map);
    // ids must be unique across the merged pool once duplicated reals are gone
    index_domains(&curated)?;

    let mut buf = Vec::new();
    write_manifest(&mut buf, &curated).map_err(|e| CliError::Io(e.to_string()))?;
    write_lines(&args.out, &prov, &buf)?;

    let summary = json!({
        "input_records": input_count,
        "output_records": curated.len(),
        "removed": report.removed,
        "rewritten": report.rewritten,
        "unmapped": report.unmapped,
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("json value")
    );
    if let Some(path) = &args.report {
        write_json(path, &prov, &summary)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PlanConfig<'a> {
    mode: &'a str,
    n_cap: u64,
    rho: f64,
    tau: f64,
}

pub fn plan(args: PlanArgs, cfg: &PlanSection) -> Result<(), CliError> {
    let mode = required(args.mode.or_else(|| cfg.mode.clone()), "mode")?;
    let n_cap = required(args.n_cap.or(cfg.n_cap), "n-cap")?;
    let rho = args.rho.or(cfg.rho).unwrap_or(DEFAULT_RHO);
    let tau = args.tau.or(cfg.tau).unwrap_or(DEFAULT_TAU);
    let strategy = builtin_strategies().get(&mode)?;
    let params = DossParams::new(n_cap, rho, tau)?;

    let mut prov = Provenance::new(
        "plan",
        PlanConfig {
            mode: strategy.name(),
            n_cap,
            rho,
            tau,
        },
    );
    let (records, index) = load_manifest(&args.manifest, &mut prov)?;
    let plan = strategy.plan(index.sizes(), &params)?;
    for w in plan.warnings() {
        log::warn!("{w}");
    }
    let mut file = PlanFile::from_plan(&plan);
    file.params = Some(params);
    write_json(&args.out, &prov, &file)?;

    // mean clip duration per domain, for the hours estimate
    let mut seconds: BTreeMap<_, (f64, u64)> = BTreeMap::new();
    for r in &records {
        let e = seconds.entry(r.domain()).or_insert((0.0, 0));
        e.0 += r.duration_s;
        e.1 += 1;
    }
    let mean_secs = |k| seconds.get(k).map(|&(s, n)| s / n as f64).unwrap_or(0.0);

    println!("mode: {}", strategy.name());
    match &plan {
        Plan::Select(p) => {
            let selected = p.counts.values().filter(|&&n| n > 0).count();
            let hrs: f64 = p
                .counts
                .iter()
                .map(|(k, &n)| mean_secs(k) * n as f64)
                .sum::<f64>()
                / 3600.0;
            let total = p.total();
            let frac = if total == 0 {
                0.0
            } else {
                p.real_total() as f64 / total as f64
            };
            println!("domains: {selected} of {}", index.len());
            println!(
                "samples: {total} (real {}, fake {})",
                p.real_total(),
                p.fake_total()
            );
            println!("hours: {hrs:.3}");
            println!("real fraction: {frac:.6}");
        }
        Plan::Weight(p) => {
            let real = p.real_mass();
            let fake = p.fake_mass();
            println!("domains: {}", p.weights.len());
            println!("samples: {}", index.sizes().total());
            println!("hours: {:.3}", hours(&records));
            println!("real probability: {:.6}", real / (real + fake));
        }
    }
    Ok(())
}

pub fn materialize(args: MaterializeArgs, cfg: &SeedSection) -> Result<(), CliError> {
    let seed = required(args.seed.or(cfg.seed), "seed")?;
    let mut prov = Provenance::new("materialize", json!({ "seed": seed }));
    let (records, index) = load_manifest(&args.manifest, &mut prov)?;
    let Plan::Select(plan) = load_plan(&args.plan, &mut prov)? else {
        return Err(CliError::Usage(
            "materialize needs a select plan; use `sample` for weight plans".into(),
        ));
    };
    let pruned = materialize_select(&index, &records, &plan, seed)?;
    let mut buf = Vec::new();
    write_manifest(&mut buf, &pruned.records).map_err(|e| CliError::Io(e.to_string()))?;
    write_lines(&args.out, &prov, &buf)?;
    println!(
        "materialized {} records ({:.3} hours)",
        pruned.records.len(),
        hours(&pruned.records)
    );
    Ok(())
}

pub fn sample(args: SampleArgs, cfg: &SampleSection) -> Result<(), CliError> {
    let seed = required(args.seed.or(cfg.seed), "seed")?;
    let length = required(args.length.or(cfg.length), "length")?;
    let drawer_name = args
        .drawer
        .or_else(|| cfg.drawer.clone())
        .unwrap_or_else(|| DEFAULT_DRAWER.to_string());
    let drawer = builtin_drawers().get(&drawer_name)?;
    let mut prov = Provenance::new(
        "sample",
        json!({ "seed": seed, "length": length, "drawer": drawer.name() }),
    );
    let (_, index) = load_manifest(&args.manifest, &mut prov)?;
    let Plan::Weight(plan) = load_plan(&args.plan, &mut prov)? else {
        return Err(CliError::Usage(
            "sample needs a weight plan; use `materialize` for select plans".into(),
        ));
    };
    let spec = SampleStreamSpec::new(plan, seed, length)?;
    let stream = sample_stream_with(&spec, &index, drawer.as_ref())?;
    let mut buf = Vec::with_capacity(length as usize * 16);
    for id in stream {
        buf.extend_from_slice(id.as_bytes());
        buf.push(b'\n');
    }
    emit(args.out.as_deref(), &prov, &buf)
}

pub fn distribution(args: DistributionArgs) -> Result<(), CliError> {
    let mut prov = Provenance::new("distribution", json!({}));
    let (_, index) = load_manifest(&args.manifest, &mut prov)?;
    let plan = load_plan(&args.plan, &mut prov)?;
    let table = domain_distribution(&plan, index.sizes())?;
    let buf = csv_bytes(|w| table.write_csv(w))?;
    emit(args.out.as_deref(), &prov, &buf)
}

fn score_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input)
                .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
            let mut found = Vec::new();
            for entry in entries {
                let path = entry
                    .map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?
                    .path();
                if path.is_file() && path.extension().is_some_and(|x| x == "jsonl") {
                    found.push(path);
                }
            }
            if found.is_empty() {
                return Err(CliError::Validation(format!(
                    "{}: no *.jsonl score files",
                    input.display()
                )));
            }
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

#[derive(Serialize)]
struct SetError {
    set: String,
    error: String,
}

pub fn eval(args: EvalArgs, cfg: &EvalSection) -> Result<i32, CliError> {
    let threshold = args
        .threshold
        .or(cfg.threshold)
        .unwrap_or(DEFAULT_THRESHOLD);
    let aggregation = if args.cde_from_macro || cfg.cde_from_macro.unwrap_or(false) {
        CdeAggregation::FromMacro
    } else {
        CdeAggregation::MeanOfSets
    };
    let mut prov = Provenance::new(
        "eval",
        json!({ "threshold": threshold, "cde_aggregation": aggregation }),
    );

    let files = score_files(&args.inputs)?;
    let mut names = BTreeMap::new();
    for path in &files {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if let Some(prev) = names.insert(name.clone(), path.clone()) {
            return Err(CliError::Validation(format!(
                "set name {name:?} used by both {} and {}",
                prev.display(),
                path.display()
            )));
        }
    }

    let mut per_set = BTreeMap::new();
    let mut errors = Vec::new();
    let mut exit = 0;
    for (name, path) in &names {
        let outcome = read_input(path, &mut prov).and_then(|bytes| {
            let set = parse_score_file(name, bytes.as_slice())?;
            Ok(set_metrics(&set, threshold)?)
        });
        match outcome {
            Ok(m) => {
                per_set.insert(name.clone(), m);
            }
            Err(e) => {
                log::error!("set {name}: {e}");
                exit = worst(exit, &e);
                errors.push(SetError {
                    set: name.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    let report = match report_from_metrics(per_set, threshold, aggregation) {
        Ok(r) => serde_json::to_value(&r).expect("report serializes"),
        Err(MetricsError::NoSets) => json!({
            "per_set": {},
            "macro": null,
            "cde_aggregation": aggregation,
            "threshold": threshold,
        }),
        Err(e) => return Err(e.into()),
    };
    let mut payload = report.clone();
    payload["partial"] = Value::Bool(!errors.is_empty());
    payload["errors"] = serde_json::to_value(&errors).expect("errors serialize");

    if let Some(path) = &args.out_json {
        write_json(path, &prov, &payload)?;
    }
    if let Some(path) = &args.out_csv {
        if let Ok(r) = serde_json::from_value::<crate::metrics::MetricReport>(report) {
            write_lines(path, &prov, &csv_bytes(|w| r.write_csv(w))?)?;
        }
    }
    if args.out_json.is_none() {
        println!(
            "{}",
            serde_json::to_string_pretty(&payload).expect("json value")
        );
    }
    Ok(exit)
}

// I/O beats bad input beats undefined metric
fn worst(current: i32, e: &CliError) -> i32 {
    let code = e.exit_code();
    match (current, code) {
        (0, c) => c,
        (1, _) | (_, 1) => 1,
        (a, b) => a.min(b),
    }
}

fn parse_filter(spec: &str) -> Result<(String, String), CliError> {
    spec.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Usage(format!("--where expects COLUMN=VALUE, got {spec:?}")))
}

fn cell_matches(cell: &str, want: &str) -> bool {
    match (cell.trim().parse::<f64>(), want.parse::<f64>()) {
        (Ok(a), Ok(b)) => a == b,
        _ => cell.trim() == want,
    }
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let filters = args
        .filter
        .iter()
        .map(|s| parse_filter(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut prov = Provenance::new(
        "fit",
        json!({ "x_col": args.x_col, "y_col": args.y_col, "where": args.filter }),
    );
    let bytes = read_input(&args.csv, &mut prov)?;
    let bad = |m: String| CliError::Validation(format!("{}: {m}", args.csv.display()));
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (xi, yi) = match (column(&args.x_col), column(&args.y_col)) {
        (Some(x), Some(y)) => (x, y),
        _ if headers.len() == 2 && args.x_col == "x" && args.y_col == "y" => (0, 1),
        _ => {
            return Err(bad(format!(
                "columns {:?} and {:?} not both present",
                args.x_col, args.y_col
            )))
        }
    };
    let filters = filters
        .into_iter()
        .map(|(k, v)| {
            column(&k)
                .map(|i| (i, v))
                .ok_or_else(|| bad(format!("no column {k:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if !filters
            .iter()
            .all(|(c, v)| row.get(*c).is_some_and(|cell| cell_matches(cell, v)))
        {
            continue;
        }
        let num = |c: usize| -> Result<f64, CliError> {
            let cell = row.get(c).unwrap_or("").trim();
            cell.parse()
                .map_err(|_| bad(format!("row {}: {cell:?} is not a number", i + 2)))
        };
        points.push((num(xi)?, num(yi)?));
    }
    let fit = fit_power_law(&points)?;
    println!("{fit}");
    if let Some(path) = &args.out {
        write_json(path, &prov, json!({ "fit": fit, "line": fit.to_string() }))?;
    }
    Ok(())
}

pub fn scale(args: ScaleArgs, cfg: &ScaleSection) -> Result<(), CliError> {
    let axis: Axis = required(args.axis.or_else(|| cfg.axis.clone()), "axis")?.parse()?;
    let n_units = required(args.n_units.or(cfg.n_units), "n-units")?;
    let usage = required(args.usage.or(cfg.usage), "usage")?;
    let mut config = ScalingConfig::new(axis, n_units, usage);
    if let Some(v) = args.rho.or(cfg.rho) {
        config.rho = v;
    }
    if let Some(v) = args.per_source_real.or(cfg.per_source_real) {
        config.per_source_real = v;
    }
    if let Some(v) = args.per_generator_fake.or(cfg.per_generator_fake) {
        config.per_generator_fake = v;
    }
    config.trial_seed = required(args.trial_seed.or(cfg.trial_seed), "trial-seed")?;
    if let Some(v) = args.trials.or(cfg.trials) {
        config.trials = v;
    }
    config.strict = !args.no_strict && cfg.strict.unwrap_or(true);

    let mut prov = Provenance::new("scale", &config);
    let bytes = read_input(&args.manifest, &mut prov)?;
    let records = parse_manifest(bytes.as_slice()).map_err(|e| in_file(&args.manifest, e))?;
    let index = index_domains(&records)?;
    let trials = crate::scaling::build_scaling_config(&config, index.sizes())?;

    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.out_dir.display())))?;
    for t in &trials {
        let mut file = PlanFile::from_select(&t.plan, None);
        file.units = Some(t.units.clone());
        let path = args.out_dir.join(format!("trial-{}.json", t.trial));
        write_json(&path, &prov, &file)?;
        println!(
            "trial {} (seed {}): {} samples, units [{}]",
            t.trial,
            t.seed,
            t.plan.total(),
            t.units.join(", ")
        );
    }
    Ok(())
}

pub fn aggregate(args: AggregateArgs) -> Result<(), CliError> {
    let mut prov = Provenance::new("aggregate", json!({}));
    let bytes = read_input(&args.results, &mut prov)?;
    let mut results = Vec::new();
    for row in csv::Reader::from_reader(bytes.as_slice()).deserialize::<TrialResult>() {
        results.push(
            row.map_err(|e| CliError::Validation(format!("{}: {e}", args.results.display())))?,
        );
    }
    let table = aggregate_trials(&results)?;
    let buf = csv_bytes(|w| table.write_csv(w))?;
    emit(args.out.as_deref(), &prov, &buf)
}

pub fn strategies() {
    println!("mixing strategies:");
    for s in builtin_strategies().iter() {
        println!("  {:<12} {}", s.name(), s.description());
    }
    println!("domain drawers:");
    for d in builtin_drawers().iter() {
        println!("  {:<12} {}", d.name(), d.description());
    }
}
