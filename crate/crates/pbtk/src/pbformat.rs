//! Parser, validator, and serializer for `.pb` participatory budgeting files.
//!
//! A `.pb` file is a UTF-8 text file with three sections, `META`, `PROJECTS`
//! and `VOTES`, in that order. Each section starts with a header line naming
//! its columns; rows are `;`-separated, list-valued cells (votes, points,
//! categories) are `,`-separated. Four ballot types are supported: approval,
//! ordinal, cumulative, and scoring.
//!
//! Parsing is lossless: every input cell is recoverable either from a typed
//! field or from the row's `extra` map, and [`serialize`] reproduces a file
//! that parses back to an identical [`ElectionFile`].

use indexmap::IndexMap;
use thiserror::Error;

use crate::rational::{parse_decimal, to_decimal_string, Rat};

/// META keys that must be present in every file.
pub const OBLIGATORY_META: [&str; 9] = [
    "description",
    "country",
    "unit",
    "instance",
    "num_projects",
    "num_votes",
    "budget",
    "vote_type",
    "rule",
];

/// All META keys documented by the format; anything else is a non-standard
/// field and reported as a warning by [`validate`].
const KNOWN_META: [&str; 26] = [
    "description",
    "country",
    "unit",
    "subunit",
    "instance",
    "num_projects",
    "num_votes",
    "budget",
    "vote_type",
    "rule",
    "date_begin",
    "date_end",
    "language",
    "edition",
    "district",
    "comment",
    "min_length",
    "max_length",
    "min_sum_cost",
    "max_sum_cost",
    "scoring_fn",
    "min_points",
    "max_points",
    "min_sum_points",
    "max_sum_points",
    "default_score",
];

/// Ballot type of an election file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteType {
    Approval,
    Ordinal,
    Cumulative,
    Scoring,
}

impl VoteType {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "approval" => Some(Self::Approval),
            "ordinal" => Some(Self::Ordinal),
            "cumulative" => Some(Self::Cumulative),
            "scoring" => Some(Self::Scoring),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Approval => "approval",
            Self::Ordinal => "ordinal",
            Self::Cumulative => "cumulative",
            Self::Scoring => "scoring",
        }
    }
}

/// One row of the PROJECTS section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectRow {
    pub project_id: String,
    /// Cost in whole currency units; fractional costs are rejected.
    pub cost: u64,
    pub name: Option<String>,
    pub category: Vec<String>,
    pub target: Vec<String>,
    /// Non-standard columns, in header order.
    pub extra: IndexMap<String, String>,
}

/// One row of the VOTES section.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteRow {
    pub voter_id: String,
    /// Project ids, in ballot order.
    pub vote: Vec<String>,
    /// Parallel to `vote`; present for cumulative/scoring ballots.
    pub points: Option<Vec<Rat>>,
    pub age: Option<String>,
    pub sex: Option<String>,
    pub voting_method: Option<String>,
    pub extra: IndexMap<String, String>,
}

/// Faithful in-memory image of one `.pb` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectionFile {
    /// META key/value pairs, in file order.
    pub meta: IndexMap<String, String>,
    /// PROJECTS header columns, in file order.
    pub project_columns: Vec<String>,
    pub projects: Vec<ProjectRow>,
    /// VOTES header columns, in file order.
    pub vote_columns: Vec<String>,
    pub votes: Vec<VoteRow>,
    /// File path or URL, carried along for diagnostics.
    pub source_name: String,
}

impl ElectionFile {
    pub fn meta_get(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(|s| s.as_str())
    }

    pub fn vote_type(&self) -> Option<VoteType> {
        self.meta_get("vote_type").and_then(VoteType::parse)
    }

    pub fn budget(&self) -> Option<u64> {
        self.meta_get("budget").and_then(|s| s.parse().ok())
    }

    /// `unit`, `instance` and optional `subunit`, used for scheme grouping.
    pub fn group_key(&self) -> (String, String) {
        (
            self.meta_get("unit").unwrap_or("").to_string(),
            self.meta_get("instance").unwrap_or("").to_string(),
        )
    }

    pub fn subunit(&self) -> Option<&str> {
        self.meta_get("subunit").filter(|s| !s.is_empty())
    }
}

/// Errors raised while parsing a `.pb` file. Each carries the 1-based line
/// number where it was detected.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: missing section {section}")]
    MissingSection { section: &'static str, line: usize },
    #[error("line {line}: missing obligatory field {field}")]
    MissingObligatoryField { field: String, line: usize },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: unknown vote type {value:?}")]
    UnknownVoteType { value: String, line: usize },
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: usize, message: String },
}

/// Diagnostic severity. Only `Error` entries make a file invalid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A single validation finding.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Stable machine-readable code, e.g. `BallotTooLong`.
    pub code: String,
    /// Where the problem is (meta key, project id, voter id).
    pub location: String,
    pub message: String,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        !self
            .diagnostics
            .iter()
            .any(|d| d.severity == Severity::Error)
    }

    fn error(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Error,
            code: code.to_string(),
            location: location.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            severity: Severity::Warning,
            code: code.to_string(),
            location: location.into(),
            message: message.into(),
        });
    }
}

fn split_row(line: &str) -> Vec<String> {
    line.split(';').map(|c| c.trim().to_string()).collect()
}

fn split_list(cell: &str) -> Vec<String> {
    if cell.is_empty() {
        Vec::new()
    } else {
        cell.split(',').map(|c| c.trim().to_string()).collect()
    }
}

fn opt_cell(cell: &str) -> Option<String> {
    if cell.is_empty() {
        None
    } else {
        Some(cell.to_string())
    }
}

/// Parse the complete body of a `.pb` file.
pub fn parse_pb(text: &str, source_name: &str) -> Result<ElectionFile, ParseError> {
    // (line_number, content); CRLF tolerated, blank lines skipped
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim_end()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();

    let mut pos = 0usize;
    let expect_section = |pos: &mut usize, name: &'static str| -> Result<usize, ParseError> {
        match lines.get(*pos) {
            Some(&(ln, l)) if l.trim() == name => {
                *pos += 1;
                Ok(ln)
            }
            Some(&(ln, _)) => Err(ParseError::MissingSection {
                section: name,
                line: ln,
            }),
            None => Err(ParseError::MissingSection {
                section: name,
                line: lines.last().map(|&(ln, _)| ln).unwrap_or(1),
            }),
        }
    };

    let meta_line = expect_section(&mut pos, "META")?;
    // META header row ("key; value") is required but carries no information
    match lines.get(pos) {
        Some(&(ln, l)) => {
            let cells = split_row(l);
            if cells.first().map(|c| c.as_str()) != Some("key") {
                return Err(ParseError::MalformedRow {
                    line: ln,
                    message: "expected META header row 'key; value'".into(),
                });
            }
            pos += 1;
        }
        None => {
            return Err(ParseError::MalformedRow {
                line: meta_line,
                message: "META section has no header row".into(),
            })
        }
    }

    let mut meta = IndexMap::new();
    while let Some(&(ln, l)) = lines.get(pos) {
        if l.trim() == "PROJECTS" {
            break;
        }
        let cells = split_row(l);
        if cells.len() < 2 {
            // not a key/value row: the PROJECTS section must start here
            break;
        }
        let key = cells[0].clone();
        // values may themselves contain ';' (e.g. free-text descriptions)
        let value = cells[1..].join("; ");
        if meta.insert(key.clone(), value).is_some() {
            return Err(ParseError::DuplicateId { id: key, line: ln });
        }
        pos += 1;
    }

    for field in OBLIGATORY_META {
        if !meta.contains_key(field) {
            return Err(ParseError::MissingObligatoryField {
                field: field.to_string(),
                line: meta_line,
            });
        }
    }
    let vote_type_line = meta_line; // close enough for diagnostics
    let vote_type = meta.get("vote_type").unwrap();
    let vote_type = VoteType::parse(vote_type).ok_or_else(|| ParseError::UnknownVoteType {
        value: vote_type.clone(),
        line: vote_type_line,
    })?;

    let projects_line = expect_section(&mut pos, "PROJECTS")?;
    let project_columns = match lines.get(pos) {
        Some(&(_, l)) => {
            pos += 1;
            split_row(l)
        }
        None => {
            return Err(ParseError::MalformedRow {
                line: projects_line,
                message: "PROJECTS section has no header row".into(),
            })
        }
    };
    if !project_columns.iter().any(|c| c == "project_id") {
        return Err(ParseError::MissingObligatoryField {
            field: "project_id".into(),
            line: projects_line + 1,
        });
    }
    if !project_columns.iter().any(|c| c == "cost") {
        return Err(ParseError::MissingObligatoryField {
            field: "cost".into(),
            line: projects_line + 1,
        });
    }

    let mut projects: Vec<ProjectRow> = Vec::new();
    let mut seen_projects = std::collections::HashSet::new();
    while let Some(&(ln, l)) = lines.get(pos) {
        if l.trim() == "VOTES" {
            break;
        }
        let cells = split_row(l);
        if cells.len() != project_columns.len() {
            return Err(ParseError::MalformedRow {
                line: ln,
                message: format!(
                    "expected {} cells, found {}",
                    project_columns.len(),
                    cells.len()
                ),
            });
        }
        let mut row = ProjectRow {
            project_id: String::new(),
            cost: 0,
            name: None,
            category: Vec::new(),
            target: Vec::new(),
            extra: IndexMap::new(),
        };
        for (col, cell) in project_columns.iter().zip(&cells) {
            match col.as_str() {
                "project_id" => row.project_id = cell.clone(),
                "cost" => {
                    row.cost = cell.parse().map_err(|_| ParseError::MalformedRow {
                        line: ln,
                        message: format!("cost must be a positive integer, got {cell:?}"),
                    })?;
                }
                "name" => row.name = opt_cell(cell),
                "category" => row.category = split_list(cell),
                "target" => row.target = split_list(cell),
                _ => {
                    row.extra.insert(col.clone(), cell.clone());
                }
            }
        }
        if row.project_id.is_empty() {
            return Err(ParseError::MalformedRow {
                line: ln,
                message: "empty project_id".into(),
            });
        }
        if row.cost == 0 {
            return Err(ParseError::MalformedRow {
                line: ln,
                message: "cost must be at least 1".into(),
            });
        }
        if !seen_projects.insert(row.project_id.clone()) {
            return Err(ParseError::DuplicateId {
                id: row.project_id,
                line: ln,
            });
        }
        projects.push(row);
        pos += 1;
    }

    let votes_line = expect_section(&mut pos, "VOTES")?;
    let vote_columns = match lines.get(pos) {
        Some(&(_, l)) => {
            pos += 1;
            split_row(l)
        }
        None => {
            return Err(ParseError::MalformedRow {
                line: votes_line,
                message: "VOTES section has no header row".into(),
            })
        }
    };
    if !vote_columns.iter().any(|c| c == "voter_id") {
        return Err(ParseError::MissingObligatoryField {
            field: "voter_id".into(),
            line: votes_line + 1,
        });
    }

    let mut votes: Vec<VoteRow> = Vec::new();
    let mut seen_voters = std::collections::HashSet::new();
    while let Some(&(ln, l)) = lines.get(pos) {
        let cells = split_row(l);
        if cells.len() != vote_columns.len() {
            return Err(ParseError::MalformedRow {
                line: ln,
                message: format!(
                    "expected {} cells, found {}",
                    vote_columns.len(),
                    cells.len()
                ),
            });
        }
        let mut row = VoteRow {
            voter_id: String::new(),
            vote: Vec::new(),
            points: None,
            age: None,
            sex: None,
            voting_method: None,
            extra: IndexMap::new(),
        };
        for (col, cell) in vote_columns.iter().zip(&cells) {
            match col.as_str() {
                "voter_id" => row.voter_id = cell.clone(),
                "vote" => row.vote = split_list(cell),
                "points" => {
                    if !cell.is_empty() {
                        let mut pts = Vec::new();
                        for item in split_list(cell) {
                            let p =
                                parse_decimal(&item).ok_or_else(|| ParseError::MalformedRow {
                                    line: ln,
                                    message: format!("bad points value {item:?}"),
                                })?;
                            pts.push(p);
                        }
                        row.points = Some(pts);
                    }
                }
                "age" => row.age = opt_cell(cell),
                "sex" => row.sex = opt_cell(cell),
                "voting_method" => row.voting_method = opt_cell(cell),
                _ => {
                    row.extra.insert(col.clone(), cell.clone());
                }
            }
        }
        if row.voter_id.is_empty() {
            return Err(ParseError::MalformedRow {
                line: ln,
                message: "empty voter_id".into(),
            });
        }
        {
            let mut seen = std::collections::HashSet::new();
            for id in &row.vote {
                if !seen.insert(id) {
                    return Err(ParseError::MalformedRow {
                        line: ln,
                        message: format!("duplicate project {id:?} in ballot"),
                    });
                }
            }
        }
        if let Some(pts) = &row.points {
            if pts.len() != row.vote.len() {
                return Err(ParseError::MalformedRow {
                    line: ln,
                    message: format!(
                        "points list has {} entries for {} vote entries",
                        pts.len(),
                        row.vote.len()
                    ),
                });
            }
        }
        if !seen_voters.insert(row.voter_id.clone()) {
            return Err(ParseError::DuplicateId {
                id: row.voter_id,
                line: ln,
            });
        }
        votes.push(row);
        pos += 1;
    }

    let _ = vote_type;
    Ok(ElectionFile {
        meta,
        project_columns,
        projects,
        vote_columns,
        votes,
        source_name: source_name.to_string(),
    })
}

/// Per-ballot-type bounds with format defaults applied.
struct Bounds {
    min_length: u64,
    max_length: u64,
    min_sum_cost: u64,
    max_sum_cost: Option<u64>,
    min_points: Option<Rat>,
    max_points: Option<Rat>,
    min_sum_points: Rat,
    max_sum_points: Option<Rat>,
}

fn meta_u64(file: &ElectionFile, key: &str, report: &mut ValidationReport) -> Option<u64> {
    match file.meta_get(key) {
        None => None,
        Some(v) => match v.parse() {
            Ok(n) => Some(n),
            Err(_) => {
                report.error(
                    "BadMetaNumber",
                    key,
                    format!("{key} must be a nonnegative integer, got {v:?}"),
                );
                None
            }
        },
    }
}

fn meta_rat(file: &ElectionFile, key: &str, report: &mut ValidationReport) -> Option<Rat> {
    match file.meta_get(key) {
        None => None,
        Some(v) => match parse_decimal(v) {
            Some(r) => Some(r),
            None => {
                report.error(
                    "BadMetaNumber",
                    key,
                    format!("{key} must be a number, got {v:?}"),
                );
                None
            }
        },
    }
}

/// Validate a parsed file: counts, per-ballot-type bounds with the format's
/// defaults, reference integrity, and META hygiene. Never fails; everything
/// is reported inside the returned [`ValidationReport`].
pub fn validate(file: &ElectionFile) -> ValidationReport {
    let mut report = ValidationReport::default();

    for key in file.meta.keys() {
        if !KNOWN_META.contains(&key.as_str()) {
            report.warning(
                "NonStandardMetaField",
                key.clone(),
                format!("non-standard META field {key:?}"),
            );
        }
    }

    let num_projects = meta_u64(file, "num_projects", &mut report);
    let num_votes = meta_u64(file, "num_votes", &mut report);
    if let Some(n) = num_projects {
        if n as usize != file.projects.len() {
            report.error(
                "CountMismatch",
                "num_projects",
                format!("num_projects is {n} but file has {} projects", file.projects.len()),
            );
        }
    }
    if let Some(n) = num_votes {
        if n as usize != file.votes.len() {
            report.error(
                "CountMismatch",
                "num_votes",
                format!("num_votes is {n} but file has {} votes", file.votes.len()),
            );
        }
    }
    match file.budget() {
        Some(0) | None => {
            report.error(
                "BadMetaNumber",
                "budget",
                format!(
                    "budget must be a positive integer, got {:?}",
                    file.meta_get("budget").unwrap_or("")
                ),
            );
        }
        Some(_) => {}
    }

    let vote_type = match file.vote_type() {
        Some(t) => t,
        None => {
            report.error(
                "UnknownVoteType",
                "vote_type",
                format!("unknown vote_type {:?}", file.meta_get("vote_type").unwrap_or("")),
            );
            return report;
        }
    };

    let m = file.projects.len() as u64;
    let mut bounds = Bounds {
        min_length: meta_u64(file, "min_length", &mut report).unwrap_or(1),
        max_length: meta_u64(file, "max_length", &mut report).unwrap_or(m),
        min_sum_cost: meta_u64(file, "min_sum_cost", &mut report).unwrap_or(0),
        max_sum_cost: meta_u64(file, "max_sum_cost", &mut report),
        min_points: meta_rat(file, "min_points", &mut report),
        max_points: meta_rat(file, "max_points", &mut report),
        min_sum_points: meta_rat(file, "min_sum_points", &mut report)
            .unwrap_or_else(|| Rat::from_integer(0.into())),
        max_sum_points: meta_rat(file, "max_sum_points", &mut report),
    };
    if vote_type == VoteType::Cumulative {
        if bounds.max_sum_points.is_none() {
            report.error(
                "MissingObligatoryField",
                "max_sum_points",
                "cumulative elections must declare max_sum_points",
            );
        }
        // defaults: min_points 0, max_points max_sum_points
        if bounds.min_points.is_none() {
            bounds.min_points = Some(Rat::from_integer(0.into()));
        }
        if bounds.max_points.is_none() {
            bounds.max_points = bounds.max_sum_points.clone();
        }
    }
    if vote_type == VoteType::Ordinal {
        let fun = file.meta_get("scoring_fn").unwrap_or("Borda");
        if !fun.eq_ignore_ascii_case("borda") {
            report.warning(
                "UnsupportedScoringFn",
                "scoring_fn",
                format!("scoring_fn {fun:?} is not supported; Borda is assumed downstream"),
            );
        }
    }

    let project_cost: std::collections::HashMap<&str, u64> = file
        .projects
        .iter()
        .map(|p| (p.project_id.as_str(), p.cost))
        .collect();

    for vote in &file.votes {
        let loc = format!("voter {}", vote.voter_id);
        for id in &vote.vote {
            if !project_cost.contains_key(id.as_str()) {
                report.error(
                    "UnknownProject",
                    loc.clone(),
                    format!("ballot references unknown project {id:?}"),
                );
            }
        }
        let len = vote.vote.len() as u64;
        if len > bounds.max_length {
            report.error(
                "BallotTooLong",
                loc.clone(),
                format!("ballot has {len} entries, max_length is {}", bounds.max_length),
            );
        }
        if len < bounds.min_length {
            report.error(
                "BallotTooShort",
                loc.clone(),
                format!("ballot has {len} entries, min_length is {}", bounds.min_length),
            );
        }
        match vote_type {
            VoteType::Approval => {
                if vote.points.is_some() {
                    report.warning(
                        "UnexpectedPoints",
                        loc.clone(),
                        "approval ballots should not carry points",
                    );
                }
                let sum: u64 = vote
                    .vote
                    .iter()
                    .filter_map(|id| project_cost.get(id.as_str()))
                    .sum();
                if sum < bounds.min_sum_cost {
                    report.error(
                        "BallotCostTooLow",
                        loc.clone(),
                        format!("ballot cost sum {sum} below min_sum_cost {}", bounds.min_sum_cost),
                    );
                }
                if let Some(max) = bounds.max_sum_cost {
                    if sum > max {
                        report.error(
                            "BallotCostTooHigh",
                            loc.clone(),
                            format!("ballot cost sum {sum} exceeds max_sum_cost {max}"),
                        );
                    }
                }
            }
            VoteType::Ordinal => {}
            VoteType::Cumulative | VoteType::Scoring => {
                let pts = match &vote.points {
                    Some(p) => p,
                    None => {
                        if !vote.vote.is_empty() {
                            report.error(
                                "MissingPoints",
                                loc.clone(),
                                format!("{} ballots require a points column", vote_type.as_str()),
                            );
                        }
                        continue;
                    }
                };
                for p in pts {
                    if let Some(min) = &bounds.min_points {
                        if p < min {
                            report.error(
                                "PointsOutOfRange",
                                loc.clone(),
                                format!("points value {} below min_points", to_decimal_string(p)),
                            );
                        }
                    }
                    if let Some(max) = &bounds.max_points {
                        if p > max {
                            report.error(
                                "PointsOutOfRange",
                                loc.clone(),
                                format!("points value {} above max_points", to_decimal_string(p)),
                            );
                        }
                    }
                }
                if !pts.windows(2).all(|w| w[0] >= w[1]) {
                    report.warning(
                        "PointsNotDecreasing",
                        loc.clone(),
                        "points are not listed in decreasing order",
                    );
                }
                if vote_type == VoteType::Cumulative {
                    let sum: Rat = pts.iter().sum();
                    if let Some(max) = &bounds.max_sum_points {
                        if &sum > max {
                            report.error(
                                "PointsSumTooHigh",
                                loc.clone(),
                                format!(
                                    "points sum {} exceeds max_sum_points {}",
                                    to_decimal_string(&sum),
                                    to_decimal_string(max)
                                ),
                            );
                        }
                    }
                    if sum < bounds.min_sum_points {
                        report.error(
                            "PointsSumTooLow",
                            loc.clone(),
                            format!("points sum {} below min_sum_points", to_decimal_string(&sum)),
                        );
                    }
                }
            }
        }
    }

    report
}

fn project_cell(row: &ProjectRow, col: &str) -> String {
    match col {
        "project_id" => row.project_id.clone(),
        "cost" => row.cost.to_string(),
        "name" => row.name.clone().unwrap_or_default(),
        "category" => row.category.join(","),
        "target" => row.target.join(","),
        _ => row.extra.get(col).cloned().unwrap_or_default(),
    }
}

fn vote_cell(row: &VoteRow, col: &str) -> String {
    match col {
        "voter_id" => row.voter_id.clone(),
        "vote" => row.vote.join(","),
        "points" => row
            .points
            .as_ref()
            .map(|pts| pts.iter().map(to_decimal_string).collect::<Vec<_>>().join(","))
            .unwrap_or_default(),
        "age" => row.age.clone().unwrap_or_default(),
        "sex" => row.sex.clone().unwrap_or_default(),
        "voting_method" => row.voting_method.clone().unwrap_or_default(),
        _ => row.extra.get(col).cloned().unwrap_or_default(),
    }
}

/// Serialize a file back to `.pb` text. Section and column order are
/// preserved as read; rows use `"; "` separators and LF line endings.
/// `parse_pb(serialize(f))` equals `f` field-by-field for every parseable `f`.
pub fn serialize(file: &ElectionFile) -> String {
    let mut out = String::new();
    out.push_str("META\nkey; value\n");
    for (k, v) in &file.meta {
        out.push_str(k);
        out.push_str("; ");
        out.push_str(v);
        out.push('\n');
    }
    out.push_str("PROJECTS\n");
    out.push_str(&file.project_columns.join("; "));
    out.push('\n');
    for row in &file.projects {
        let cells: Vec<String> = file
            .project_columns
            .iter()
            .map(|c| project_cell(row, c))
            .collect();
        out.push_str(cells.join("; ").trim_end());
        out.push('\n');
    }
    out.push_str("VOTES\n");
    out.push_str(&file.vote_columns.join("; "));
    out.push('\n');
    for row in &file.votes {
        let cells: Vec<String> = file
            .vote_columns
            .iter()
            .map(|c| vote_cell(row, c))
            .collect();
        out.push_str(cells.join("; ").trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = include_str!("../tests/data/toy.pb");

    #[test]
    fn parses_toy_file() {
        let f = parse_pb(TOY, "toy").unwrap();
        assert_eq!(f.projects.len(), 5);
        assert_eq!(f.votes.len(), 10);
        assert_eq!(f.budget(), Some(2500));
        assert_eq!(f.vote_type(), Some(VoteType::Approval));
        assert_eq!(f.meta_get("max_length"), Some("3"));
        assert_eq!(f.projects[2].project_id, "4");
        assert_eq!(f.projects[2].cost, 1400);
        assert_eq!(f.projects[0].category, vec!["culture", "education"]);
        let v3 = &f.votes[2];
        assert_eq!(v3.voter_id, "3");
        assert_eq!(v3.vote, vec!["2", "4", "5"]);
        assert_eq!(v3.sex.as_deref(), Some("m"));
    }

    #[test]
    fn empty_votes_section_ok() {
        let text = TOY
            .replace("num_votes; 10", "num_votes; 0")
            .lines()
            .take_while(|l| !l.starts_with("1; 34"))
            .collect::<Vec<_>>()
            .join("\n");
        let f = parse_pb(&text, "empty").unwrap();
        assert_eq!(f.votes.len(), 0);
        assert!(validate(&f).is_valid());
        assert!(serialize(&f).contains("VOTES\nvoter_id; age; sex; vote\n"));
    }

    #[test]
    fn crlf_tolerated() {
        let crlf = TOY.replace('\n', "\r\n");
        // same source name: derived equality covers all fields
        assert_eq!(parse_pb(&crlf, "toy").unwrap(), parse_pb(TOY, "toy").unwrap());
    }

    #[test]
    fn missing_section_detected() {
        let text = TOY.replace("PROJECTS", "PROJEKTY");
        match parse_pb(&text, "bad") {
            Err(ParseError::MissingSection { section, .. }) => assert_eq!(section, "PROJECTS"),
            other => panic!("expected MissingSection, got {other:?}"),
        }
    }

    #[test]
    fn missing_obligatory_meta_detected() {
        for field in OBLIGATORY_META {
            let text: String = TOY
                .lines()
                .filter(|l| !l.starts_with(&format!("{field}; ")))
                .collect::<Vec<_>>()
                .join("\n");
            match parse_pb(&text, "bad") {
                Err(ParseError::MissingObligatoryField { field: f, .. }) => {
                    assert_eq!(f, field);
                }
                other => panic!("dropping {field} gave {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = TOY.replace("2; 800; sport", "1; 800; sport");
        assert!(matches!(
            parse_pb(&text, "bad"),
            Err(ParseError::DuplicateId { .. })
        ));
        let text = TOY.replace("2; 51; m; 1,2", "1; 51; m; 1,2");
        assert!(matches!(
            parse_pb(&text, "bad"),
            Err(ParseError::DuplicateId { .. })
        ));
    }

    #[test]
    fn unknown_vote_type_rejected() {
        let text = TOY.replace("vote_type; approval", "vote_type; ranked");
        assert!(matches!(
            parse_pb(&text, "bad"),
            Err(ParseError::UnknownVoteType { .. })
        ));
    }

    #[test]
    fn fractional_cost_rejected() {
        let text = TOY.replace("1; 600; culture, education", "1; 600.5; culture, education");
        match parse_pb(&text, "bad") {
            Err(ParseError::MalformedRow { message, .. }) => {
                assert!(message.contains("positive integer"), "{message}");
            }
            other => panic!("expected MalformedRow, got {other:?}"),
        }
    }

    #[test]
    fn toy_is_valid() {
        let f = parse_pb(TOY, "toy").unwrap();
        let report = validate(&f);
        assert!(report.is_valid(), "{:?}", report.diagnostics);
        assert!(report.diagnostics.is_empty());
    }

    #[test]
    fn too_long_ballot_flagged() {
        let text = TOY.replace("1; 34; f; 1,2,4", "1; 34; f; 1,2,4,5");
        let f = parse_pb(&text, "bad").unwrap();
        let report = validate(&f);
        assert!(!report.is_valid());
        let d = report
            .diagnostics
            .iter()
            .find(|d| d.code == "BallotTooLong")
            .expect("BallotTooLong diagnostic");
        assert_eq!(d.location, "voter 1");
    }

    #[test]
    fn count_mismatch_flagged() {
        let text = TOY.replace("num_votes; 10", "num_votes; 11");
        let f = parse_pb(&text, "bad").unwrap();
        let report = validate(&f);
        assert!(report.diagnostics.iter().any(|d| d.code == "CountMismatch"));
    }

    const CUMULATIVE: &str = "META\n\
        key; value\n\
        description; Cumulative toy\n\
        country; Poland\n\
        unit; Test\n\
        instance; 2021\n\
        num_projects; 2\n\
        num_votes; 2\n\
        budget; 100\n\
        vote_type; cumulative\n\
        rule; greedy\n\
        max_sum_points; 10\n\
        PROJECTS\n\
        project_id; cost\n\
        7; 60\n\
        2; 50\n\
        VOTES\n\
        voter_id; vote; points\n\
        a; 7,2; 6,4\n\
        b; 2; 10\n";

    #[test]
    fn cumulative_file_parses_and_validates() {
        let f = parse_pb(CUMULATIVE, "cumulative").unwrap();
        let report = validate(&f);
        assert!(report.is_valid(), "{:?}", report.diagnostics);
        assert_eq!(
            f.votes[0].points.as_ref().unwrap(),
            &vec![crate::rational::rat(6), crate::rational::rat(4)]
        );
        let g = parse_pb(&serialize(&f), "cumulative").unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn cumulative_needs_max_sum_points() {
        let text = CUMULATIVE.replace("max_sum_points; 10\n", "");
        let f = parse_pb(&text, "cumulative").unwrap();
        let report = validate(&f);
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.code == "MissingObligatoryField" && d.location == "max_sum_points"));
    }

    #[test]
    fn cumulative_points_sum_bound_enforced() {
        let text = CUMULATIVE.replace("a; 7,2; 6,4", "a; 7,2; 8,4");
        let f = parse_pb(&text, "cumulative").unwrap();
        let report = validate(&f);
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.code == "PointsSumTooHigh" && d.location == "voter a"));
    }

    #[test]
    fn unknown_meta_key_is_warning() {
        let text = TOY.replace(
            "rule; greedy",
            "rule; greedy\nfunding_source; municipal",
        );
        let f = parse_pb(&text, "warn").unwrap();
        let report = validate(&f);
        assert!(report.is_valid());
        assert!(report
            .diagnostics
            .iter()
            .any(|d| d.code == "NonStandardMetaField" && d.severity == Severity::Warning));
    }

    #[test]
    fn round_trip_identity() {
        let f = parse_pb(TOY, "toy").unwrap();
        let text = serialize(&f);
        let g = parse_pb(&text, "toy").unwrap();
        assert_eq!(f, g);
        assert_eq!(serialize(&g), text);
    }

    #[test]
    fn comment_meta_round_trips() {
        let text = TOY.replace("rule; greedy", "rule; greedy\ncomment; test");
        let f = parse_pb(&text, "toy").unwrap();
        assert!(serialize(&f).contains("comment; test\n"));
    }

    #[test]
    fn extra_columns_preserved() {
        let text = TOY
            .replace("project_id; cost; category", "project_id; cost; category; latitude")
            .replace("1; 600; culture, education", "1; 600; culture, education; 49.98")
            .replace("2; 800; sport", "2; 800; sport; 50.01")
            .replace("4; 1400; culture", "4; 1400; culture; ")
            .replace("5; 1000; health, sport", "5; 1000; health, sport; 49.99")
            .replace("7; 1200; education", "7; 1200; education; 50.00");
        let f = parse_pb(&text, "gps").unwrap();
        assert_eq!(f.projects[0].extra.get("latitude").unwrap(), "49.98");
        assert_eq!(f.projects[2].extra.get("latitude").unwrap(), "");
        let g = parse_pb(&serialize(&f), "gps").unwrap();
        assert_eq!(f, g);
    }
}
