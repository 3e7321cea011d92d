//! Command implementations behind the `pbtk` binary: file ingestion (local
//! paths, directories, HTTP URLs), validation, rule execution and comparison
//! over grouped election instances, map-data export, category tables, and
//! fetching remote `.pb` files.
//!
//! Every numeric value in reports is rendered from exact rationals with six
//! decimal places, so a re-run with the same inputs and seed is
//! byte-identical. Exit codes: 0 success, 1 domain error, 2 I/O or usage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{
    export_map, jaccard_matrix, mds_embed, normalize_distances, MapDatum, PositionSource,
};
use crate::metrics::{
    average_utility, budget_dispersion, dominance_pair, exclusion_ratio, funds_used, gini,
    power_inequality, tag_shares,
};
use crate::model::{
    assemble_scheme, build_election, namespaced, scheme_label, Election, Scheme, UtilityModel,
};
use crate::pbformat::{parse_pb, validate, ElectionFile};
use crate::rational::{f64_fixed, rat_u, to_fixed, Rat};
use crate::rules::{Completion, RuleSpec};
use num_traits::Zero;

pub const SCHEMA: &str = "pbtk/1";

/// Decimal places used for every number in CLI output.
const PLACES: u32 = 6;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 1 domain error, 2 I/O or usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

/// Output format for batch reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(CliError::Usage(format!("unknown format {other:?}"))),
        }
    }
}

/// A batch run: which files, how to group them, which rules and metrics.
#[derive(Debug, Clone)]
pub struct RunRequest {
    pub inputs: Vec<String>,
    pub scheme: Scheme,
    pub rule_specs: Vec<RuleSpec>,
    /// Metric names; empty means all applicable metrics.
    pub metrics: Vec<String>,
    pub output_format: OutputFormat,
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub parallelism: usize,
}

pub const ALL_METRICS: [&str; 7] = [
    "avg_utility",
    "budget_dispersion",
    "exclusion_ratio",
    "funds_used",
    "gini",
    "power_inequality",
    "robustness",
];

/// Parse `--scheme`.
pub fn parse_scheme(s: &str) -> Result<Scheme, CliError> {
    match s {
        "citywide" => Ok(Scheme::Citywide),
        "districtwise" => Ok(Scheme::Districtwise),
        other => Err(CliError::Usage(format!("unknown scheme {other:?}"))),
    }
}

/// Parse one `--rule` value: `ug`, `mes`, or a full spec id like
/// `mes:cost:add1u`. Bare names take the utility/completion flags.
pub fn parse_rule_spec(s: &str, utility: &str, completion: &str) -> Result<RuleSpec, CliError> {
    let mut parts = s.split(':');
    let rule = parts.next().unwrap_or("");
    let util = parts.next().unwrap_or(utility);
    let comp = parts.next().unwrap_or(completion);
    if parts.next().is_some() {
        return Err(CliError::Usage(format!("malformed rule spec {s:?}")));
    }
    let utility = match util {
        "score" => UtilityModel::Score,
        "cost" => UtilityModel::Cost,
        other => return Err(CliError::Usage(format!("unknown utility {other:?}"))),
    };
    let completion = match comp {
        "none" => Completion::None,
        "u" => Completion::Utilitarian,
        "eps" => Completion::Eps,
        "add1" => Completion::Add1,
        "add1u" => Completion::Add1U,
        other => return Err(CliError::Usage(format!("unknown completion {other:?}"))),
    };
    match rule {
        "ug" => Ok(RuleSpec::utilitarian_greedy(utility)),
        "mes" => Ok(RuleSpec::equal_shares(utility, completion)),
        other => Err(CliError::Usage(format!("unknown rule {other:?}"))),
    }
}

/// Parse the repeatable `--rule` flag against shared utility/completion flags.
pub fn parse_rule_specs(
    rules: &[String],
    utility: &str,
    completion: &str,
) -> Result<Vec<RuleSpec>, CliError> {
    rules
        .iter()
        .map(|r| parse_rule_spec(r, utility, completion))
        .collect()
}

// ---------------------------------------------------------------------------
// Input loading and instance grouping
// ---------------------------------------------------------------------------

fn is_url(input: &str) -> bool {
    input.starts_with("http://") || input.starts_with("https://")
}

fn http_get(url: &str) -> Result<Vec<u8>, CliError> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| CliError::Io(format!("{url}: {e}")))?;
    resp.body_mut()
        .read_to_vec()
        .map_err(|e| CliError::Io(format!("{url}: {e}")))
}

/// Expand paths/URLs into named file bodies. Directories contribute their
/// `.pb` files in name order.
pub fn load_inputs(inputs: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for input in inputs {
        if is_url(input) {
            let bytes = http_get(input)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Io(format!("{input}: response is not UTF-8")))?;
            out.push((input.clone(), text));
            continue;
        }
        let path = Path::new(input);
        let meta = fs::metadata(path).map_err(|e| CliError::Io(format!("{input}: {e}")))?;
        if meta.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(path)
                .map_err(|e| CliError::Io(format!("{input}: {e}")))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "pb"))
                .collect();
            entries.sort();
            for p in entries {
                let text =
                    fs::read_to_string(&p).map_err(|e| CliError::Io(format!("{:?}: {e}", p)))?;
                out.push((p.display().to_string(), text));
            }
        } else {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{input}: {e}")))?;
            out.push((input.clone(), text));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no input files".to_string()));
    }
    Ok(out)
}

/// One solvable unit+instance group, with the election used for metrics
/// (merged across files) and the sub-elections used for districtwise runs.
struct Instance {
    unit: String,
    instance: String,
    scheme: Scheme,
    /// Metrics space: all voters and all (namespaced) projects.
    election: Election,
    subs: Vec<(String, Election)>,
    /// Single-file groups keep raw project ids; merged groups namespace them.
    merged_ids: bool,
}

impl Instance {
    fn subunits(&self) -> Vec<String> {
        self.subs.iter().map(|(l, _)| l.clone()).collect()
    }

    /// Map a sub-election project index into the metrics election.
    fn merged_idx(&self, label: &str, sub: &Election, p: usize) -> usize {
        if self.merged_ids {
            let id = namespaced(label, &sub.project(p).id);
            self.election
                .project_idx(&id)
                .expect("merged election covers all sub projects")
        } else {
            p
        }
    }

    /// Run a rule under the scheme; returns selections as indices into the
    /// metrics election, plus the selection order per sub-election.
    fn run(&self, spec: &RuleSpec, approval: bool) -> BTreeSet<usize> {
        match self.scheme {
            Scheme::Citywide => {
                let out = if approval {
                    spec.execute(&self.election.to_approval())
                } else {
                    spec.execute(&self.election)
                };
                out.selected
            }
            Scheme::Districtwise => {
                let mut selected = BTreeSet::new();
                for (label, sub) in &self.subs {
                    let out = if approval {
                        spec.execute(&sub.to_approval())
                    } else {
                        spec.execute(sub)
                    };
                    for p in out.selected {
                        selected.insert(self.merged_idx(label, sub, p));
                    }
                }
                selected
            }
        }
    }
}

/// Group parsed files by (unit, instance) and assemble each group.
/// Assembly failures are reported per group; the batch continues.
fn build_instances(
    files: Vec<ElectionFile>,
    scheme: Scheme,
) -> (Vec<Instance>, Vec<String>) {
    let mut groups: BTreeMap<(String, String), Vec<ElectionFile>> = BTreeMap::new();
    for f in files {
        groups.entry(f.group_key()).or_default().push(f);
    }
    let mut instances = Vec::new();
    let mut errors = Vec::new();
    for ((unit, inst), group) in groups {
        let built = if group.len() == 1 {
            build_election(&group[0], None).map(|e| Instance {
                unit: unit.clone(),
                instance: inst.clone(),
                scheme,
                subs: vec![(scheme_label(&group[0]), e.clone())],
                election: e,
                merged_ids: false,
            })
        } else {
            let refs: Vec<&ElectionFile> = group.iter().collect();
            assemble_scheme(&refs, scheme).map(|se| Instance {
                unit: unit.clone(),
                instance: inst.clone(),
                scheme,
                election: se.merged,
                subs: se.sub_elections,
                merged_ids: true,
            })
        };
        match built {
            Ok(i) => instances.push(i),
            Err(e) => errors.push(format!("{unit}/{inst}: {e}")),
        }
    }
    (instances, errors)
}

fn parse_files(
    named: Vec<(String, String)>,
) -> (Vec<ElectionFile>, Vec<String>) {
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for (name, text) in named {
        match parse_pb(&text, &name) {
            Ok(f) => files.push(f),
            Err(e) => errors.push(format!("{name}: {e}")),
        }
    }
    (files, errors)
}

// ---------------------------------------------------------------------------
// Metrics evaluation
// ---------------------------------------------------------------------------

/// Metric values are exact rationals; a metric that does not apply carries an
/// explanation instead.
type MetricValues = BTreeMap<String, Result<Rat, String>>;

fn evaluate_metrics(
    instance: &Instance,
    spec: &RuleSpec,
    selected: &BTreeSet<usize>,
    requested: &[String],
) -> Result<MetricValues, CliError> {
    let e = &instance.election;
    let names: Vec<&str> = if requested.is_empty() {
        ALL_METRICS.to_vec()
    } else {
        requested.iter().map(|s| s.as_str()).collect()
    };
    let mut out = MetricValues::new();
    for name in names {
        let value = match name {
            "avg_utility" => Ok(average_utility(e, selected, spec.utility)),
            "exclusion_ratio" => Ok(exclusion_ratio(e, selected)),
            "funds_used" => Ok(funds_used(e, selected)),
            "gini" => {
                let utilities: Vec<Rat> = (0..e.num_voters())
                    .map(|v| e.utility(v, selected.iter().copied(), spec.utility))
                    .collect();
                Ok(gini(&utilities))
            }
            "power_inequality" => {
                power_inequality(e, selected).map_err(|err| err.to_string())
            }
            "budget_dispersion" => {
                budget_dispersion(e, selected).map_err(|err| err.to_string())
            }
            "robustness" => {
                if selected.is_empty() {
                    Ok(Rat::from_integer(1.into()))
                } else {
                    let approval = instance.run(spec, true);
                    let overlap: u64 = selected
                        .intersection(&approval)
                        .map(|&p| e.project(p).cost)
                        .sum();
                    let total = e.cost_of(selected.iter().copied());
                    Ok(rat_u(overlap) / rat_u(total))
                }
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown metric {other:?} (known: {})",
                    ALL_METRICS.join(", ")
                )))
            }
        };
        out.insert(name.to_string(), value);
    }
    Ok(out)
}

fn format_metrics(values: &MetricValues) -> BTreeMap<String, String> {
    values
        .iter()
        .map(|(k, v)| {
            let s = match v {
                Ok(r) => to_fixed(r, PLACES),
                Err(msg) => format!("unavailable: {msg}"),
            };
            (k.clone(), s)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Batch reports (run / compare)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct InstanceEntry {
    pub unit: String,
    pub instance: String,
    pub scheme: String,
    pub rule: String,
    pub subunits: Vec<String>,
    /// Selected project ids in the metrics election's namespace, sorted.
    pub selected: Vec<String>,
    pub total_cost: String,
    pub budget: String,
    pub metrics: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonEntry {
    pub unit: String,
    pub instance: String,
    pub scheme: String,
    pub first: String,
    pub second: String,
    pub dominance_first: String,
    pub dominance_second: String,
    pub improvement_margin: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitAggregate {
    pub unit: String,
    pub scheme: String,
    pub rule: String,
    pub instances: usize,
    pub means: BTreeMap<String, String>,
    /// Absent when the unit has fewer than two instances.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stddevs: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub schema: &'static str,
    pub command: String,
    pub scheme: String,
    pub seed: String,
    pub per_instance: Vec<InstanceEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<ComparisonEntry>,
    pub aggregates: Vec<UnitAggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

fn run_one(
    instance: &Instance,
    spec: &RuleSpec,
    requested: &[String],
) -> Result<(InstanceEntry, MetricValues), CliError> {
    let selected = instance.run(spec, false);
    let values = evaluate_metrics(instance, spec, &selected, requested)?;
    let e = &instance.election;
    let mut ids: Vec<String> = selected.iter().map(|&p| e.project(p).id.clone()).collect();
    ids.sort();
    let entry = InstanceEntry {
        unit: instance.unit.clone(),
        instance: instance.instance.clone(),
        scheme: instance.scheme.as_str().to_string(),
        rule: spec.id(),
        subunits: instance.subunits(),
        selected: ids,
        total_cost: to_fixed(&rat_u(e.cost_of(selected.iter().copied())), PLACES),
        budget: to_fixed(&rat_u(e.budget()), PLACES),
        metrics: format_metrics(&values),
    };
    Ok((entry, values))
}

/// Per-(unit, scheme, rule) mean and standard deviation of each metric over
/// that unit's instances. Metrics unavailable anywhere in the group are
/// dropped from its aggregate.
fn aggregate(
    rows: &[(InstanceEntry, MetricValues)],
) -> Vec<UnitAggregate> {
    let mut groups: BTreeMap<(String, String, String), Vec<&MetricValues>> = BTreeMap::new();
    for (entry, values) in rows {
        groups
            .entry((entry.unit.clone(), entry.scheme.clone(), entry.rule.clone()))
            .or_default()
            .push(values);
    }
    let mut out = Vec::new();
    for ((unit, scheme, rule), group) in groups {
        let k = group.len();
        let metric_names: BTreeSet<&String> = group.iter().flat_map(|v| v.keys()).collect();
        let mut means = BTreeMap::new();
        let mut stddevs = BTreeMap::new();
        for name in metric_names {
            let values: Vec<&Rat> = group
                .iter()
                .filter_map(|v| v.get(name).and_then(|r| r.as_ref().ok()))
                .collect();
            if values.len() != k {
                continue; // unavailable in some instance
            }
            let total: Rat = values.iter().copied().sum();
            let mean = total / rat_u(k as u64);
            if k >= 2 {
                let var: Rat = values
                    .iter()
                    .map(|&v| {
                        let d = v - &mean;
                        &d * &d
                    })
                    .sum::<Rat>()
                    / rat_u(k as u64);
                stddevs.insert(
                    name.clone(),
                    f64_fixed(crate::rational::to_f64(&var).sqrt(), PLACES),
                );
            }
            means.insert(name.clone(), to_fixed(&mean, PLACES));
        }
        out.push(UnitAggregate {
            unit,
            scheme,
            rule,
            instances: k,
            stddevs: if k >= 2 { Some(stddevs) } else { None },
            means,
        });
    }
    out
}

fn with_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(pool.install(f))
}

fn batch_rows(
    instances: &[Instance],
    specs: &[RuleSpec],
    requested: &[String],
    parallelism: usize,
) -> Result<Vec<Result<(InstanceEntry, MetricValues), CliError>>, CliError> {
    let jobs: Vec<(&Instance, &RuleSpec)> = instances
        .iter()
        .flat_map(|i| specs.iter().map(move |s| (i, s)))
        .collect();
    with_pool(parallelism, || {
        jobs.par_iter()
            .map(|(i, s)| run_one(i, s, requested))
            .collect()
    })
}

/// Execute each rule spec on each grouped instance and report outcomes,
/// metrics, and per-unit aggregates.
pub fn cmd_run(req: &RunRequest) -> Result<(String, i32), CliError> {
    if req.rule_specs.is_empty() {
        return Err(CliError::Usage("run needs at least one --rule".to_string()));
    }
    let named = load_inputs(&req.inputs)?;
    let (files, mut errors) = parse_files(named);
    let (instances, group_errors) = build_instances(files, req.scheme);
    errors.extend(group_errors);

    let mut rows = Vec::new();
    for row in batch_rows(&instances, &req.rule_specs, &req.metrics, req.parallelism)? {
        match row {
            Ok(r) => rows.push(r),
            Err(e @ CliError::Usage(_)) => return Err(e),
            Err(e) => errors.push(e.to_string()),
        }
    }
    rows.sort_by(|a, b| {
        (&a.0.unit, &a.0.instance, &a.0.scheme, &a.0.rule)
            .cmp(&(&b.0.unit, &b.0.instance, &b.0.scheme, &b.0.rule))
    });

    let report = BatchReport {
        schema: SCHEMA,
        command: "run".to_string(),
        scheme: req.scheme.as_str().to_string(),
        seed: req.seed.to_string(),
        aggregates: aggregate(&rows),
        per_instance: rows.into_iter().map(|(e, _)| e).collect(),
        comparisons: Vec::new(),
        errors,
    };
    let exit = if report.errors.is_empty() { 0 } else { 1 };
    Ok((render_report(&report, req.output_format)?, exit))
}

/// Run exactly two rule specs and report pairwise dominance per instance.
pub fn cmd_compare(req: &RunRequest) -> Result<(String, i32), CliError> {
    if req.rule_specs.len() != 2 {
        return Err(CliError::Usage(format!(
            "compare needs exactly two --rule values, got {}",
            req.rule_specs.len()
        )));
    }
    let named = load_inputs(&req.inputs)?;
    let (files, mut errors) = parse_files(named);
    let (instances, group_errors) = build_instances(files, req.scheme);
    errors.extend(group_errors);

    let mut rows = Vec::new();
    for row in batch_rows(&instances, &req.rule_specs, &req.metrics, req.parallelism)? {
        match row {
            Ok(r) => rows.push(r),
            Err(e @ CliError::Usage(_)) => return Err(e),
            Err(e) => errors.push(e.to_string()),
        }
    }
    rows.sort_by(|a, b| {
        (&a.0.unit, &a.0.instance, &a.0.scheme, &a.0.rule)
            .cmp(&(&b.0.unit, &b.0.instance, &b.0.scheme, &b.0.rule))
    });

    let [first, second] = [&req.rule_specs[0], &req.rule_specs[1]];
    let mut comparisons = Vec::new();
    for instance in &instances {
        let w1 = instance.run(first, false);
        let w2 = instance.run(second, false);
        let pair = dominance_pair(&instance.election, &w1, &w2, first.utility);
        comparisons.push(ComparisonEntry {
            unit: instance.unit.clone(),
            instance: instance.instance.clone(),
            scheme: instance.scheme.as_str().to_string(),
            first: first.id(),
            second: second.id(),
            dominance_first: to_fixed(&pair.dominance_1_over_2, PLACES),
            dominance_second: to_fixed(&pair.dominance_2_over_1, PLACES),
            improvement_margin: to_fixed(&pair.improvement_margin, PLACES),
        });
    }
    comparisons.sort_by(|a, b| (&a.unit, &a.instance).cmp(&(&b.unit, &b.instance)));

    let report = BatchReport {
        schema: SCHEMA,
        command: "compare".to_string(),
        scheme: req.scheme.as_str().to_string(),
        seed: req.seed.to_string(),
        aggregates: aggregate(&rows),
        per_instance: rows.into_iter().map(|(e, _)| e).collect(),
        comparisons,
        errors,
    };
    let exit = if report.errors.is_empty() { 0 } else { 1 };
    Ok((render_report(&report, req.output_format)?, exit))
}

fn render_report(report: &BatchReport, format: OutputFormat) -> Result<String, CliError> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => Ok(report_to_csv(report)),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Io(e.to_string()))
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Flat projection of a batch report: one row per scalar value.
fn report_to_csv(report: &BatchReport) -> String {
    let mut out = String::from("unit,instance,scheme,rule,metric,value\n");
    let mut push = |unit: &str, instance: &str, scheme: &str, rule: &str, metric: &str, value: &str| {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_escape(unit),
            csv_escape(instance),
            csv_escape(scheme),
            csv_escape(rule),
            csv_escape(metric),
            csv_escape(value)
        ));
    };
    for e in &report.per_instance {
        push(&e.unit, &e.instance, &e.scheme, &e.rule, "total_cost", &e.total_cost);
        push(&e.unit, &e.instance, &e.scheme, &e.rule, "budget", &e.budget);
        for (metric, value) in &e.metrics {
            push(&e.unit, &e.instance, &e.scheme, &e.rule, metric, value);
        }
    }
    for c in &report.comparisons {
        let rule = format!("{} vs {}", c.first, c.second);
        push(&c.unit, &c.instance, &c.scheme, &rule, "dominance_first", &c.dominance_first);
        push(&c.unit, &c.instance, &c.scheme, &rule, "dominance_second", &c.dominance_second);
        push(&c.unit, &c.instance, &c.scheme, &rule, "improvement_margin", &c.improvement_margin);
    }
    for a in &report.aggregates {
        for (metric, value) in &a.means {
            push(&a.unit, "(mean)", &a.scheme, &a.rule, metric, value);
        }
        if let Some(stddevs) = &a.stddevs {
            for (metric, value) in stddevs {
                push(&a.unit, "(stddev)", &a.scheme, &a.rule, metric, value);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct FileValidation {
    file: String,
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    parse_error: Option<String>,
    diagnostics: Vec<crate::pbformat::Diagnostic>,
}

#[derive(Debug, Serialize)]
struct ValidateOutput {
    schema: &'static str,
    command: &'static str,
    files: Vec<FileValidation>,
}

/// Parse and validate each input; exit 0 iff all files are valid.
pub fn cmd_validate(inputs: &[String]) -> Result<(String, i32), CliError> {
    let named = load_inputs(inputs)?;
    let mut files = Vec::new();
    let mut all_valid = true;
    for (name, text) in named {
        match parse_pb(&text, &name) {
            Ok(file) => {
                let report = validate(&file);
                let valid = report.is_valid();
                all_valid &= valid;
                files.push(FileValidation {
                    file: name,
                    valid,
                    parse_error: None,
                    diagnostics: report.diagnostics,
                });
            }
            Err(e) => {
                all_valid = false;
                files.push(FileValidation {
                    file: name,
                    valid: false,
                    parse_error: Some(e.to_string()),
                    diagnostics: Vec::new(),
                });
            }
        }
    }
    let out = ValidateOutput {
        schema: SCHEMA,
        command: "validate",
        files,
    };
    Ok((to_json(&out)?, if all_valid { 0 } else { 1 }))
}

// ---------------------------------------------------------------------------
// fetch
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
pub struct FetchEntry {
    pub url: String,
    /// `saved`, `skipped (unchanged)`, or `failed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
struct FetchOutput {
    schema: &'static str,
    command: &'static str,
    results: Vec<FetchEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn fetch_one(url: &str, dest_dir: &Path) -> Result<FetchEntry, String> {
    let bytes = http_get(url).map_err(|e| e.to_string())?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| "response is not UTF-8".to_string())?;
    // the body must be a valid election file, otherwise the URL failed
    let file = parse_pb(&text, url).map_err(|e| format!("invalid file: {e}"))?;
    let report = validate(&file);
    if !report.is_valid() {
        let first = report
            .diagnostics
            .iter()
            .find(|d| d.severity == crate::pbformat::Severity::Error)
            .map(|d| d.message.clone())
            .unwrap_or_default();
        return Err(format!("invalid file: {first}"));
    }
    let name = url
        .rsplit('/')
        .next()
        .filter(|s| !s.is_empty())
        .unwrap_or("download.pb");
    let path = dest_dir.join(name);
    let hash = sha256_hex(&bytes);
    if let Ok(existing) = fs::read(&path) {
        if existing == bytes {
            return Ok(FetchEntry {
                url: url.to_string(),
                status: "skipped (unchanged)".to_string(),
                path: Some(path.display().to_string()),
                sha256: Some(hash),
                error: None,
            });
        }
    }
    fs::write(&path, &bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(FetchEntry {
        url: url.to_string(),
        status: "saved".to_string(),
        path: Some(path.display().to_string()),
        sha256: Some(hash),
        error: None,
    })
}

/// Download each URL into `dest_dir`, logging content hashes and skipping
/// files whose bytes are unchanged. Exit 1 if any URL failed.
pub fn cmd_fetch(urls: &[String], dest_dir: &Path) -> Result<(String, i32), CliError> {
    if urls.is_empty() {
        return Err(CliError::Usage("no URLs given".to_string()));
    }
    fs::create_dir_all(dest_dir).map_err(|e| CliError::Io(format!("{}: {e}", dest_dir.display())))?;
    let mut results = Vec::new();
    let mut failed = false;
    for url in urls {
        match fetch_one(url, dest_dir) {
            Ok(entry) => results.push(entry),
            Err(e) => {
                failed = true;
                results.push(FetchEntry {
                    url: url.clone(),
                    status: "failed".to_string(),
                    path: None,
                    sha256: None,
                    error: Some(e),
                });
            }
        }
    }
    let out = FetchOutput {
        schema: SCHEMA,
        command: "fetch",
        results,
    };
    Ok((to_json(&out)?, if failed { 1 } else { 0 }))
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

/// Where map positions come from for `cmd_embed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedSource {
    Gps,
    Jaccard,
}

impl EmbedSource {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "gps" => Ok(Self::Gps),
            "jaccard" => Ok(Self::Jaccard),
            other => Err(CliError::Usage(format!("unknown source {other:?}"))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Self::Gps => "gps",
            Self::Jaccard => "jaccard",
        }
    }
}

#[derive(Debug, Serialize)]
struct MapPoint {
    project_id: String,
    x: String,
    y: String,
    cost_radius: String,
    votes_radius: String,
    status: crate::geometry::Status,
}

#[derive(Debug, Serialize)]
struct EmbedEntry {
    unit: String,
    instance: String,
    source: &'static str,
    es_rule: String,
    ug_rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stress: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    degenerate: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    excluded: Vec<String>,
    data: Vec<MapPoint>,
}

#[derive(Debug, Serialize)]
struct EmbedOutput {
    schema: &'static str,
    command: &'static str,
    seed: String,
    entries: Vec<EmbedEntry>,
}

fn map_points(data: &[MapDatum]) -> Vec<MapPoint> {
    data.iter()
        .map(|d| MapPoint {
            project_id: d.project_id.clone(),
            x: f64_fixed(d.position.0, PLACES),
            y: f64_fixed(d.position.1, PLACES),
            cost_radius: f64_fixed(d.cost_radius, PLACES),
            votes_radius: f64_fixed(d.votes_radius, PLACES),
            status: d.status,
        })
        .collect()
}

/// Compare an Equal Shares outcome with Utilitarian Greedy on a map: GPS
/// positions or a seeded Jaccard/SMACOF embedding.
pub fn cmd_embed(
    inputs: &[String],
    source: EmbedSource,
    es_spec: &RuleSpec,
    ug_spec: &RuleSpec,
    seed: u64,
) -> Result<(String, i32), CliError> {
    let named = load_inputs(inputs)?;
    let (files, errors) = parse_files(named);
    if let Some(e) = errors.first() {
        return Err(CliError::Domain(e.clone()));
    }
    let (instances, group_errors) = build_instances(files, Scheme::Citywide);
    if let Some(e) = group_errors.first() {
        return Err(CliError::Domain(e.clone()));
    }

    let mut entries = Vec::new();
    for instance in &instances {
        let e = &instance.election;
        let es = es_spec.execute(e);
        let ug = ug_spec.execute(e);
        let (position_data, stress, degenerate, excluded) = match source {
            EmbedSource::Gps => {
                let data = export_map(e, &PositionSource::Gps, &es, &ug)
                    .map_err(|err| CliError::Domain(err.to_string()))?;
                (data, None, None, Vec::new())
            }
            EmbedSource::Jaccard => {
                let dm = jaccard_matrix(e).map_err(|err| CliError::Domain(err.to_string()))?;
                let norm = normalize_distances(&dm);
                let emb = mds_embed(&norm, seed, 1000, 1e-9);
                let data = export_map(e, &PositionSource::Embedding(&emb), &es, &ug)
                    .map_err(|err| CliError::Domain(err.to_string()))?;
                (
                    data,
                    Some(f64_fixed(emb.stress, PLACES)),
                    Some(emb.degenerate),
                    dm.excluded,
                )
            }
        };
        entries.push(EmbedEntry {
            unit: instance.unit.clone(),
            instance: instance.instance.clone(),
            source: source.as_str(),
            es_rule: es_spec.id(),
            ug_rule: ug_spec.id(),
            stress,
            degenerate,
            excluded,
            data: map_points(&position_data),
        });
    }
    let out = EmbedOutput {
        schema: SCHEMA,
        command: "embed",
        seed: seed.to_string(),
        entries,
    };
    Ok((to_json(&out)?, 0))
}

// ---------------------------------------------------------------------------
// categories
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct TagRow {
    vote_share: String,
    spending_share: String,
}

#[derive(Debug, Serialize)]
struct CategoriesEntry {
    unit: String,
    instance: String,
    rule: String,
    l2: String,
    empty_ballot_voters: usize,
    tags: BTreeMap<String, TagRow>,
}

#[derive(Debug, Serialize)]
struct CategoriesOutput {
    schema: &'static str,
    command: &'static str,
    entries: Vec<CategoriesEntry>,
}

/// Per-tag vote and spending shares for each instance and rule.
pub fn cmd_categories(
    inputs: &[String],
    specs: &[RuleSpec],
) -> Result<(String, i32), CliError> {
    if specs.is_empty() {
        return Err(CliError::Usage("categories needs at least one --rule".to_string()));
    }
    let named = load_inputs(inputs)?;
    let (files, errors) = parse_files(named);
    if let Some(e) = errors.first() {
        return Err(CliError::Domain(e.clone()));
    }
    let (instances, group_errors) = build_instances(files, Scheme::Citywide);
    if let Some(e) = group_errors.first() {
        return Err(CliError::Domain(e.clone()));
    }

    let mut entries = Vec::new();
    for instance in &instances {
        let e = &instance.election;
        if e.projects().iter().all(|p| p.tags.is_empty()) {
            return Err(CliError::Domain(format!(
                "{}/{}: no project has category tags",
                instance.unit, instance.instance
            )));
        }
        for spec in specs {
            let selected = spec.execute(e).selected;
            let shares = tag_shares(e, &selected);
            let names: BTreeSet<&String> = shares
                .vote_shares
                .keys()
                .chain(shares.spending_shares.keys())
                .collect();
            let tags = names
                .into_iter()
                .map(|t| {
                    let zero = Rat::zero();
                    let vote = shares.vote_shares.get(t).unwrap_or(&zero);
                    let spend = shares.spending_shares.get(t).unwrap_or(&zero);
                    (
                        t.clone(),
                        TagRow {
                            vote_share: to_fixed(vote, PLACES),
                            spending_share: to_fixed(spend, PLACES),
                        },
                    )
                })
                .collect();
            entries.push(CategoriesEntry {
                unit: instance.unit.clone(),
                instance: instance.instance.clone(),
                rule: spec.id(),
                l2: f64_fixed(shares.l2, PLACES),
                empty_ballot_voters: shares.empty_ballot_voters,
                tags,
            });
        }
    }
    entries.sort_by(|a, b| (&a.unit, &a.instance, &a.rule).cmp(&(&b.unit, &b.instance, &b.rule)));
    let out = CategoriesOutput {
        schema: SCHEMA,
        command: "categories",
        entries,
    };
    Ok((to_json(&out)?, 0))
}
