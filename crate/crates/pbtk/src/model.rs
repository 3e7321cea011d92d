//! Semantic election instances: projects, voters, exact rational scores,
//! utility models, approval conversion, and citywide/districtwise scheme
//! assembly.

use std::collections::HashMap;

use num_traits::Zero;
use thiserror::Error;

use crate::pbformat::{ElectionFile, ProjectRow, VoteType};
use crate::rational::{rat, rat_u, Rat};

/// A project with its cost and optional tags/GPS location.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub id: String,
    pub cost: u64,
    pub tags: Vec<String>,
    pub gps: Option<(f64, f64)>,
}

/// Which utility a voter derives from a selected project.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityModel {
    /// `u_i(W) = sum of s_i(p) over p in W`.
    Score,
    /// `u_i(W) = sum of s_i(p) * cost(p) over p in W`.
    Cost,
}

impl UtilityModel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Score => "score",
            Self::Cost => "cost",
        }
    }
}

/// An election instance. Scores are sparse: only strictly positive scores
/// are stored; a missing entry means score zero.
#[derive(Debug, Clone)]
pub struct Election {
    projects: Vec<Project>,
    voters: Vec<String>,
    budget: u64,
    /// Per voter: (project index, score), sorted by project index.
    scores: Vec<Vec<(usize, Rat)>>,
    /// Per project: (voter index, score), sorted by voter index.
    supporters: Vec<Vec<(usize, Rat)>>,
    /// Per voter district label, when known.
    districts: Option<Vec<Option<String>>>,
    project_index: HashMap<String, usize>,
    voter_index: HashMap<String, usize>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown voter {0:?}")]
    UnknownVoter(String),
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("unsupported scoring function {0:?}")]
    UnsupportedScoringFn(String),
    #[error("score for voter {voter:?} on project {project:?} must be positive")]
    NonPositiveScore { voter: String, project: String },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("files mix units or instances: {0} vs {1}")]
    MixedUnits(String, String),
    #[error("duplicate subunit {0:?}")]
    DuplicateSubunit(String),
}

impl Election {
    /// Build an election from parts. `score_triples` holds
    /// `(voter_id, project_id, score)` with strictly positive scores.
    pub fn new(
        projects: Vec<Project>,
        voters: Vec<String>,
        budget: u64,
        score_triples: Vec<(String, String, Rat)>,
        districts: Option<Vec<Option<String>>>,
    ) -> Result<Self, ModelError> {
        if budget == 0 {
            return Err(ModelError::ZeroBudget);
        }
        let project_index: HashMap<String, usize> = projects
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let voter_index: HashMap<String, usize> = voters
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let mut scores = vec![Vec::new(); voters.len()];
        let mut supporters = vec![Vec::new(); projects.len()];
        for (voter, project, score) in score_triples {
            let vi = *voter_index
                .get(&voter)
                .ok_or_else(|| ModelError::UnknownVoter(voter.clone()))?;
            let pi = *project_index
                .get(&project)
                .ok_or_else(|| ModelError::UnknownProject(project.clone()))?;
            if score <= Rat::zero() {
                return Err(ModelError::NonPositiveScore {
                    voter,
                    project,
                });
            }
            scores[vi].push((pi, score.clone()));
            supporters[pi].push((vi, score));
        }
        for list in &mut scores {
            list.sort_by_key(|&(pi, _)| pi);
        }
        for list in &mut supporters {
            list.sort_by_key(|&(vi, _)| vi);
        }
        Ok(Self {
            projects,
            voters,
            budget,
            scores,
            supporters,
            districts,
            project_index,
            voter_index,
        })
    }

    pub fn num_projects(&self) -> usize {
        self.projects.len()
    }

    pub fn num_voters(&self) -> usize {
        self.voters.len()
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn projects(&self) -> &[Project] {
        &self.projects
    }

    pub fn project(&self, idx: usize) -> &Project {
        &self.projects[idx]
    }

    pub fn voters(&self) -> &[String] {
        &self.voters
    }

    pub fn project_idx(&self, id: &str) -> Option<usize> {
        self.project_index.get(id).copied()
    }

    pub fn voter_idx(&self, id: &str) -> Option<usize> {
        self.voter_index.get(id).copied()
    }

    /// Positive scores cast by one voter, `(project index, score)` pairs.
    pub fn ballot(&self, voter: usize) -> &[(usize, Rat)] {
        &self.scores[voter]
    }

    /// Voters with a positive score for the project, with their scores.
    pub fn supporters(&self, project: usize) -> &[(usize, Rat)] {
        &self.supporters[project]
    }

    pub fn score(&self, voter: usize, project: usize) -> Option<&Rat> {
        self.scores[voter]
            .binary_search_by_key(&project, |&(pi, _)| pi)
            .ok()
            .map(|i| &self.scores[voter][i].1)
    }

    /// Total score of a project over all voters.
    pub fn total_score(&self, project: usize) -> Rat {
        self.supporters[project]
            .iter()
            .map(|(_, s)| s)
            .sum()
    }

    /// Per-unit utility weight of a project for a voter under a model:
    /// the score itself, or score times cost.
    pub fn utility_weight(&self, voter: usize, project: usize, model: UtilityModel) -> Rat {
        match self.score(voter, project) {
            None => Rat::zero(),
            Some(s) => match model {
                UtilityModel::Score => s.clone(),
                UtilityModel::Cost => s * rat_u(self.projects[project].cost),
            },
        }
    }

    /// Total utility weight of a project over all voters.
    pub fn total_utility_weight(&self, project: usize, model: UtilityModel) -> Rat {
        let total = self.total_score(project);
        match model {
            UtilityModel::Score => total,
            UtilityModel::Cost => total * rat_u(self.projects[project].cost),
        }
    }

    /// Voter utility for a set of selected projects.
    pub fn utility(
        &self,
        voter: usize,
        selected: impl IntoIterator<Item = usize>,
        model: UtilityModel,
    ) -> Rat {
        let mut total = Rat::zero();
        for p in selected {
            total += self.utility_weight(voter, p, model);
        }
        total
    }

    pub fn cost_of(&self, selected: impl IntoIterator<Item = usize>) -> u64 {
        selected.into_iter().map(|p| self.projects[p].cost).sum()
    }

    /// District label of a voter, when district data is attached.
    pub fn district(&self, voter: usize) -> Option<&str> {
        self.districts
            .as_ref()
            .and_then(|d| d[voter].as_deref())
    }

    pub fn has_districts(&self) -> bool {
        self.districts
            .as_ref()
            .is_some_and(|d| d.iter().any(|x| x.is_some()))
    }

    /// True when every stored score equals 1.
    pub fn is_approval(&self) -> bool {
        let one = rat(1);
        self.scores
            .iter()
            .all(|b| b.iter().all(|(_, s)| *s == one))
    }

    /// Collapse cardinal ballots to approvals: every positive score becomes 1.
    /// The sparsity pattern (who supports what) is unchanged.
    pub fn to_approval(&self) -> Election {
        let one = rat(1);
        let mut e = self.clone();
        for ballot in &mut e.scores {
            for (_, s) in ballot.iter_mut() {
                *s = one.clone();
            }
        }
        for supp in &mut e.supporters {
            for (_, s) in supp.iter_mut() {
                *s = one.clone();
            }
        }
        e
    }
}

fn parse_gps(row: &ProjectRow) -> Option<(f64, f64)> {
    let lat: f64 = row.extra.get("latitude")?.trim().parse().ok()?;
    let lon: f64 = row.extra.get("longitude")?.trim().parse().ok()?;
    Some((lat, lon))
}

/// Derive a semantic [`Election`] from a parsed file.
///
/// Scores per ballot type: approval gives every listed project score 1;
/// cumulative and scoring copy the points; ordinal applies ballot-relative
/// Borda (position `j` of a length-`k` ballot scores `k - j + 1`).
/// `scoring_fn` overrides the META `scoring_fn` for ordinal files.
pub fn build_election(
    file: &ElectionFile,
    scoring_fn: Option<&str>,
) -> Result<Election, ModelError> {
    let vote_type = file.vote_type().unwrap_or(VoteType::Approval);
    if vote_type == VoteType::Ordinal {
        let fun = scoring_fn
            .or(file.meta_get("scoring_fn"))
            .unwrap_or("Borda");
        if !fun.eq_ignore_ascii_case("borda") {
            return Err(ModelError::UnsupportedScoringFn(fun.to_string()));
        }
    }

    let projects: Vec<Project> = file
        .projects
        .iter()
        .map(|row| Project {
            id: row.project_id.clone(),
            cost: row.cost,
            tags: row.category.clone(),
            gps: parse_gps(row),
        })
        .collect();
    let voters: Vec<String> = file.votes.iter().map(|v| v.voter_id.clone()).collect();

    let mut triples = Vec::new();
    for vote in &file.votes {
        match vote_type {
            VoteType::Approval => {
                for id in &vote.vote {
                    triples.push((vote.voter_id.clone(), id.clone(), rat(1)));
                }
            }
            VoteType::Cumulative | VoteType::Scoring => {
                if let Some(points) = &vote.points {
                    for (id, p) in vote.vote.iter().zip(points) {
                        if *p > Rat::zero() {
                            triples.push((vote.voter_id.clone(), id.clone(), p.clone()));
                        }
                    }
                }
            }
            VoteType::Ordinal => {
                let k = vote.vote.len();
                for (j, id) in vote.vote.iter().enumerate() {
                    triples.push((vote.voter_id.clone(), id.clone(), rat((k - j) as i64)));
                }
            }
        }
    }
    // scoring files may assign a positive default score to unlisted projects
    if vote_type == VoteType::Scoring {
        if let Some(default) = file
            .meta_get("default_score")
            .and_then(crate::rational::parse_decimal)
        {
            if default > Rat::zero() {
                for vote in &file.votes {
                    for p in &file.projects {
                        if !vote.vote.contains(&p.project_id) {
                            triples.push((
                                vote.voter_id.clone(),
                                p.project_id.clone(),
                                default.clone(),
                            ));
                        }
                    }
                }
            }
        }
    }

    let budget = file.budget().ok_or(ModelError::ZeroBudget)?;
    Election::new(projects, voters, budget, triples, None)
}

/// How a group of election files is combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Citywide,
    Districtwise,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Citywide => "citywide",
            Self::Districtwise => "districtwise",
        }
    }
}

/// A group of elections from one unit+instance, solvable citywide (one merged
/// election) or districtwise (each sub-election independently).
///
/// `merged` is always built: citywide runs rules on it, and districtwise
/// reports combined-outcome metrics over all voters through it. Merged
/// project ids are namespaced as `label/project_id`.
#[derive(Debug, Clone)]
pub struct SchemeElection {
    pub scheme: Scheme,
    pub sub_elections: Vec<(String, Election)>,
    pub merged: Election,
}

/// Label for a file inside a scheme: its subunit, or `citywide` for the
/// unit-level file without one.
pub fn scheme_label(file: &ElectionFile) -> String {
    file.subunit().unwrap_or("citywide").to_string()
}

/// Merged-namespace id of a sub-election project.
pub fn namespaced(label: &str, project_id: &str) -> String {
    format!("{label}/{project_id}")
}

/// Assemble a scheme election from files sharing one unit and instance.
///
/// Districtwise keeps each file as an independent sub-election. Citywide
/// merges everything: disjoint project union, voters merged by id, ballots
/// concatenated, budget summed. A voter's district is the subunit of the
/// district-level file holding their ballot; voters seen only in the
/// subunit-less file have no district.
pub fn assemble_scheme(
    files: &[&ElectionFile],
    scheme: Scheme,
) -> Result<SchemeElection, ModelError> {
    assert!(!files.is_empty(), "assemble_scheme needs at least one file");
    let key = files[0].group_key();
    let mut labels_seen = std::collections::HashSet::new();
    for f in files {
        let k = f.group_key();
        if k != key {
            return Err(ModelError::MixedUnits(
                format!("{}/{}", key.0, key.1),
                format!("{}/{}", k.0, k.1),
            ));
        }
        let label = scheme_label(f);
        if !labels_seen.insert(label.clone()) {
            return Err(ModelError::DuplicateSubunit(label));
        }
    }

    let mut sub_elections = Vec::new();
    for f in files {
        sub_elections.push((scheme_label(f), build_election(f, None)?));
    }

    // merged election over the namespaced project union
    let mut projects = Vec::new();
    let mut voter_ids: Vec<String> = Vec::new();
    let mut voter_seen: HashMap<String, usize> = HashMap::new();
    let mut district_of: Vec<Option<String>> = Vec::new();
    let mut triples = Vec::new();
    let mut budget = 0u64;
    for (f, (label, sub)) in files.iter().zip(&sub_elections) {
        budget += sub.budget();
        let is_district = f.subunit().is_some();
        for p in sub.projects() {
            projects.push(Project {
                id: namespaced(label, &p.id),
                ..p.clone()
            });
        }
        for (vi, voter) in sub.voters().iter().enumerate() {
            let idx = *voter_seen.entry(voter.clone()).or_insert_with(|| {
                voter_ids.push(voter.clone());
                district_of.push(None);
                voter_ids.len() - 1
            });
            if is_district && district_of[idx].is_none() {
                district_of[idx] = Some(label.clone());
            }
            for (pi, score) in sub.ballot(vi) {
                triples.push((
                    voter.clone(),
                    namespaced(label, &sub.project(*pi).id),
                    score.clone(),
                ));
            }
        }
    }
    let merged = Election::new(projects, voter_ids, budget, triples, Some(district_of))?;

    Ok(SchemeElection {
        scheme,
        sub_elections,
        merged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbformat::parse_pb;

    const TOY: &str = include_str!("../tests/data/toy.pb");

    fn toy() -> Election {
        build_election(&parse_pb(TOY, "toy").unwrap(), None).unwrap()
    }

    #[test]
    fn approval_scores_are_unit() {
        let e = toy();
        assert_eq!(e.num_voters(), 10);
        assert_eq!(e.num_projects(), 5);
        let v1 = e.voter_idx("1").unwrap();
        let ballot: Vec<&str> = e
            .ballot(v1)
            .iter()
            .map(|(p, s)| {
                assert_eq!(*s, rat(1));
                e.project(*p).id.as_str()
            })
            .collect();
        assert_eq!(ballot, vec!["1", "2", "4"]);
        assert!(e.is_approval());
    }

    #[test]
    fn toy_utilities() {
        let e = toy();
        let v3 = e.voter_idx("3").unwrap();
        let w = vec![e.project_idx("4").unwrap(), e.project_idx("5").unwrap()];
        assert_eq!(e.utility(v3, w.iter().copied(), UtilityModel::Cost), rat(2400));
        assert_eq!(e.utility(v3, w.iter().copied(), UtilityModel::Score), rat(2));
        assert_eq!(e.utility(v3, std::iter::empty(), UtilityModel::Cost), rat(0));
    }

    #[test]
    fn utility_additive_over_disjoint_sets() {
        let e = toy();
        let p4 = e.project_idx("4").unwrap();
        let p5 = e.project_idx("5").unwrap();
        for v in 0..e.num_voters() {
            for m in [UtilityModel::Score, UtilityModel::Cost] {
                let joint = e.utility(v, [p4, p5], m);
                let split = e.utility(v, [p4], m) + e.utility(v, [p5], m);
                assert_eq!(joint, split);
            }
        }
    }

    #[test]
    fn cumulative_scores_copied() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 2\nnum_votes; 1\nbudget; 100\nvote_type; cumulative\nrule; greedy\n\
            max_sum_points; 10\nPROJECTS\nproject_id; cost\n7; 60\n2; 50\nVOTES\n\
            voter_id; vote; points\na; 7,2; 6,4\n";
        let e = build_election(&parse_pb(text, "c").unwrap(), None).unwrap();
        let a = e.voter_idx("a").unwrap();
        assert_eq!(e.score(a, e.project_idx("7").unwrap()), Some(&rat(6)));
        assert_eq!(e.score(a, e.project_idx("2").unwrap()), Some(&rat(4)));
    }

    #[test]
    fn ordinal_borda_is_ballot_relative() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 4\nnum_votes; 2\nbudget; 100\nvote_type; ordinal\nrule; greedy\n\
            PROJECTS\nproject_id; cost\na; 10\nb; 10\nc; 10\nd; 10\nVOTES\n\
            voter_id; vote\nv1; a,b,c\nv2; d\n";
        let e = build_election(&parse_pb(text, "o").unwrap(), None).unwrap();
        let v1 = e.voter_idx("v1").unwrap();
        assert_eq!(e.score(v1, e.project_idx("a").unwrap()), Some(&rat(3)));
        assert_eq!(e.score(v1, e.project_idx("b").unwrap()), Some(&rat(2)));
        assert_eq!(e.score(v1, e.project_idx("c").unwrap()), Some(&rat(1)));
        // a truncated ballot starts at its own length, not at m
        let v2 = e.voter_idx("v2").unwrap();
        assert_eq!(e.score(v2, e.project_idx("d").unwrap()), Some(&rat(1)));
    }

    #[test]
    fn unsupported_scoring_fn_rejected() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 1\nnum_votes; 1\nbudget; 100\nvote_type; ordinal\nrule; greedy\n\
            scoring_fn; Dowdall\nPROJECTS\nproject_id; cost\na; 10\nVOTES\nvoter_id; vote\nv1; a\n";
        assert!(matches!(
            build_election(&parse_pb(text, "o").unwrap(), None),
            Err(ModelError::UnsupportedScoringFn(_))
        ));
    }

    #[test]
    fn to_approval_flattens_and_is_idempotent() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 2\nnum_votes; 1\nbudget; 100\nvote_type; cumulative\nrule; greedy\n\
            max_sum_points; 10\nPROJECTS\nproject_id; cost\n7; 60\n2; 50\nVOTES\n\
            voter_id; vote; points\na; 7,2; 6,4\n";
        let e = build_election(&parse_pb(text, "c").unwrap(), None).unwrap();
        let a = e.to_approval();
        let v = a.voter_idx("a").unwrap();
        assert_eq!(a.score(v, a.project_idx("7").unwrap()), Some(&rat(1)));
        assert_eq!(a.score(v, a.project_idx("2").unwrap()), Some(&rat(1)));
        // supporter sets preserved
        for p in 0..e.num_projects() {
            let before: Vec<usize> = e.supporters(p).iter().map(|&(v, _)| v).collect();
            let after: Vec<usize> = a.supporters(p).iter().map(|&(v, _)| v).collect();
            assert_eq!(before, after);
        }
        let aa = a.to_approval();
        assert!(aa.is_approval());
        // idempotent on approval elections
        let toy = toy();
        assert_eq!(toy.to_approval().ballot(0), toy.ballot(0));
    }

    #[test]
    fn gps_read_from_extra_columns() {
        let text = TOY
            .replace(
                "project_id; cost; category",
                "project_id; cost; category; latitude; longitude",
            )
            .replace("1; 600; culture, education", "1; 600; culture, education; 49.98; 20.06")
            .replace("2; 800; sport", "2; 800; sport; ; ")
            .replace("4; 1400; culture", "4; 1400; culture; 50.00; 20.00")
            .replace("5; 1000; health, sport", "5; 1000; health, sport; 49.99; 20.03")
            .replace("7; 1200; education", "7; 1200; education; 50.01; 20.01");
        let e = build_election(&parse_pb(&text, "gps").unwrap(), None).unwrap();
        assert_eq!(e.project(0).gps, Some((49.98, 20.06)));
        assert_eq!(e.project(1).gps, None);
    }

    fn two_district_files() -> (ElectionFile, ElectionFile) {
        let north = "META\nkey; value\ndescription; north\ncountry; PL\nunit; Town\n\
            instance; 2020\nsubunit; North\nnum_projects; 2\nnum_votes; 2\nbudget; 1000\n\
            vote_type; approval\nrule; greedy\nPROJECTS\nproject_id; cost\nn1; 400\nn2; 700\n\
            VOTES\nvoter_id; vote\n42; n1\n7; n1,n2\n";
        let city = "META\nkey; value\ndescription; city\ncountry; PL\nunit; Town\n\
            instance; 2020\nnum_projects; 1\nnum_votes; 2\nbudget; 1500\n\
            vote_type; approval\nrule; greedy\nPROJECTS\nproject_id; cost\nc1; 900\n\
            VOTES\nvoter_id; vote\n42; c1\n99; c1\n";
        (
            parse_pb(north, "north").unwrap(),
            parse_pb(city, "city").unwrap(),
        )
    }

    #[test]
    fn citywide_merge_combines_budgets_and_ballots() {
        let (north, city) = two_district_files();
        let scheme = assemble_scheme(&[&north, &city], Scheme::Citywide).unwrap();
        let m = &scheme.merged;
        assert_eq!(m.budget(), 2500);
        assert_eq!(m.num_projects(), 3);
        assert_eq!(m.num_voters(), 3); // 42 merged across files
        let v42 = m.voter_idx("42").unwrap();
        let ballot: Vec<&str> = m
            .ballot(v42)
            .iter()
            .map(|(p, _)| m.project(*p).id.as_str())
            .collect();
        assert_eq!(ballot.len(), 2);
        assert!(ballot.contains(&"North/n1") && ballot.contains(&"citywide/c1"));
        assert_eq!(m.district(v42), Some("North"));
        assert_eq!(m.district(m.voter_idx("99").unwrap()), None);
    }

    #[test]
    fn merge_preserves_total_ballot_mass() {
        let (north, city) = two_district_files();
        let scheme = assemble_scheme(&[&north, &city], Scheme::Citywide).unwrap();
        let merged_mass: Rat = (0..scheme.merged.num_voters())
            .flat_map(|v| scheme.merged.ballot(v).iter().map(|(_, s)| s.clone()))
            .sum();
        let sub_mass: Rat = scheme
            .sub_elections
            .iter()
            .flat_map(|(_, e)| {
                (0..e.num_voters()).flat_map(|v| e.ballot(v).iter().map(|(_, s)| s.clone()))
            })
            .sum();
        assert_eq!(merged_mass, sub_mass);
    }

    #[test]
    fn singleton_scheme_matches_file() {
        let (north, _) = two_district_files();
        let scheme = assemble_scheme(&[&north], Scheme::Districtwise).unwrap();
        assert_eq!(scheme.sub_elections.len(), 1);
        assert_eq!(scheme.sub_elections[0].1.budget(), 1000);
        assert_eq!(scheme.merged.budget(), 1000);
    }

    #[test]
    fn mixed_units_rejected() {
        let (north, _) = two_district_files();
        let other = parse_pb(
            &TOY.replace("unit; Wieliczka", "unit; Elsewhere"),
            "other",
        )
        .unwrap();
        assert!(matches!(
            assemble_scheme(&[&north, &other], Scheme::Citywide),
            Err(ModelError::MixedUnits(..))
        ));
    }

    #[test]
    fn duplicate_subunit_rejected() {
        let (north, _) = two_district_files();
        let copy = north.clone();
        assert!(matches!(
            assemble_scheme(&[&north, &copy], Scheme::Citywide),
            Err(ModelError::DuplicateSubunit(_))
        ));
    }
}
