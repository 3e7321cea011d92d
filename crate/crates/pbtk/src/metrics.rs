//! Fairness and efficiency metrics over outcomes and outcome pairs:
//! average utility, dominance/improvement margins, exclusion ratio, voter
//! spending shares and power inequality, Gini index, budget dispersion
//! across districts, robustness to approval conversion, and per-tag
//! vote/spending shares.
//!
//! All metrics are pure functions computed in exact rational arithmetic;
//! only the tag-share Euclidean distance is a float.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::model::{Election, UtilityModel};
use crate::rational::{rat, rat_u, to_f64, Rat};
use crate::rules::Outcome;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("selected project {0:?} has zero total score")]
    UnsupportedSelectedProject(String),
    #[error("election has no district information")]
    NoDistricts,
}

/// Mean voter utility, over all voters including those with zero utility.
pub fn average_utility(e: &Election, selected: &BTreeSet<usize>, model: UtilityModel) -> Rat {
    if e.num_voters() == 0 {
        return Rat::zero();
    }
    let total: Rat = (0..e.num_voters())
        .map(|v| e.utility(v, selected.iter().copied(), model))
        .sum();
    total / rat(e.num_voters() as i64)
}

/// Dominance and improvement margins between two outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    /// Fraction of voters with strictly higher utility under the first outcome.
    pub dominance_1_over_2: Rat,
    pub dominance_2_over_1: Rat,
    /// `dominance_1_over_2 - dominance_2_over_1`.
    pub improvement_margin: Rat,
}

/// Per-voter strict utility comparison of two outcomes.
pub fn dominance_pair(
    e: &Election,
    first: &BTreeSet<usize>,
    second: &BTreeSet<usize>,
    model: UtilityModel,
) -> PairReport {
    let n = e.num_voters();
    if n == 0 {
        return PairReport {
            dominance_1_over_2: Rat::zero(),
            dominance_2_over_1: Rat::zero(),
            improvement_margin: Rat::zero(),
        };
    }
    let mut wins1 = 0i64;
    let mut wins2 = 0i64;
    for v in 0..n {
        let u1 = e.utility(v, first.iter().copied(), model);
        let u2 = e.utility(v, second.iter().copied(), model);
        match u1.cmp(&u2) {
            std::cmp::Ordering::Greater => wins1 += 1,
            std::cmp::Ordering::Less => wins2 += 1,
            std::cmp::Ordering::Equal => {}
        }
    }
    let d1 = rat(wins1) / rat(n as i64);
    let d2 = rat(wins2) / rat(n as i64);
    PairReport {
        improvement_margin: &d1 - &d2,
        dominance_1_over_2: d1,
        dominance_2_over_1: d2,
    }
}

/// Fraction of voters who support none of the selected projects.
pub fn exclusion_ratio(e: &Election, selected: &BTreeSet<usize>) -> Rat {
    if e.num_voters() == 0 {
        return Rat::zero();
    }
    let excluded = (0..e.num_voters())
        .filter(|&v| !e.ballot(v).iter().any(|(p, _)| selected.contains(p)))
        .count();
    rat(excluded as i64) / rat(e.num_voters() as i64)
}

/// Per-voter spending shares: each selected project's cost is split among
/// its supporters in proportion to their scores. Shares sum to `cost(W)`.
pub fn voter_shares(
    e: &Election,
    selected: &BTreeSet<usize>,
) -> Result<Vec<Rat>, MetricsError> {
    let mut shares = vec![Rat::zero(); e.num_voters()];
    for &p in selected {
        let total = e.total_score(p);
        if total.is_zero() {
            return Err(MetricsError::UnsupportedSelectedProject(
                e.project(p).id.clone(),
            ));
        }
        let cost = rat_u(e.project(p).cost);
        for (v, s) in e.supporters(p) {
            shares[*v] += s / &total * &cost;
        }
    }
    Ok(shares)
}

/// Mean normalized deviation of voter spending shares from the equal share
/// `b/n`: `(1/n) * sum_i |share_i - b/n| * (n/b)`.
pub fn power_inequality(e: &Election, selected: &BTreeSet<usize>) -> Result<Rat, MetricsError> {
    let n = e.num_voters();
    if n == 0 {
        return Ok(Rat::zero());
    }
    let shares = voter_shares(e, selected)?;
    let fair = rat_u(e.budget()) / rat(n as i64);
    let total: Rat = shares.iter().map(|s| (s - &fair).abs()).sum();
    Ok(total / rat_u(e.budget()))
}

/// Gini index of a utility vector: `sum_{i,j} |u_i - u_j| / (2 n^2 mean)`.
/// The all-zero vector has Gini 0 by convention.
pub fn gini(utilities: &[Rat]) -> Rat {
    let n = utilities.len();
    if n == 0 {
        return Rat::zero();
    }
    let total: Rat = utilities.iter().sum();
    if total.is_zero() {
        return Rat::zero();
    }
    // O(n log n) via the sorted form of the pairwise-difference sum
    let mut sorted = utilities.to_vec();
    sorted.sort();
    let mut weighted = Rat::zero();
    for (i, u) in sorted.iter().enumerate() {
        weighted += rat((2 * (i as i64 + 1)) - n as i64 - 1) * u;
    }
    weighted / (rat(n as i64) * total)
}

/// Dispersion of the budget allocation across districts: the mean relative
/// deviation of per-district spending from population-proportional spending.
/// Voters without district data are excluded from the partition.
pub fn budget_dispersion(e: &Election, selected: &BTreeSet<usize>) -> Result<Rat, MetricsError> {
    if !e.has_districts() {
        return Err(MetricsError::NoDistricts);
    }
    let shares = voter_shares(e, selected)?;
    let mut district_share: BTreeMap<&str, Rat> = BTreeMap::new();
    let mut district_size: BTreeMap<&str, i64> = BTreeMap::new();
    let mut counted = 0i64;
    for v in 0..e.num_voters() {
        if let Some(d) = e.district(v) {
            *district_share.entry(d).or_insert_with(Rat::zero) += &shares[v];
            *district_size.entry(d).or_default() += 1;
            counted += 1;
        }
    }
    let budget = rat_u(e.budget());
    let mut total = Rat::zero();
    for (d, spent) in &district_share {
        let expected = rat(district_size[d]) / rat(counted) * &budget;
        total += (spent - &expected).abs() / expected;
    }
    Ok(total / rat(district_share.len() as i64))
}

/// Cost overlap of a rule's outcome before and after collapsing cardinal
/// ballots to approvals: `cost(W_appr ∩ W_sc) / cost(W_sc)`, or 1 when the
/// cardinal outcome is empty.
pub fn robustness_ratio(e: &Election, rule_runner: impl Fn(&Election) -> Outcome) -> Rat {
    let cardinal = rule_runner(e);
    if cardinal.selected.is_empty() {
        return rat(1);
    }
    let approval = rule_runner(&e.to_approval());
    let overlap: u64 = cardinal
        .selected
        .intersection(&approval.selected)
        .map(|&p| e.project(p).cost)
        .sum();
    rat_u(overlap) / rat_u(cardinal.total_cost)
}

/// Per-tag vote shares, spending shares, and their Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct TagShares {
    pub vote_shares: BTreeMap<String, Rat>,
    pub spending_shares: BTreeMap<String, Rat>,
    /// Euclidean distance of the two vectors over the union of tags.
    pub l2: f64,
    /// Voters skipped from the vote-share sum because their ballot is empty.
    pub empty_ballot_voters: usize,
}

fn project_tags(e: &Election, p: usize) -> Vec<String> {
    let tags = &e.project(p).tags;
    if tags.is_empty() {
        vec!["untagged".to_string()]
    } else {
        tags.clone()
    }
}

/// Vote and spending shares per tag, as used for category analyses of
/// approval elections. Each voter contributes a total of 1 to vote shares,
/// split evenly over their approved projects and those projects' tags;
/// spending shares split each selected project's cost evenly over its tags.
pub fn tag_shares(e: &Election, selected: &BTreeSet<usize>) -> TagShares {
    let mut vote_shares: BTreeMap<String, Rat> = BTreeMap::new();
    let mut spending_shares: BTreeMap<String, Rat> = BTreeMap::new();
    let mut empty_ballot_voters = 0usize;

    let n = e.num_voters();
    for v in 0..n {
        let ballot = e.ballot(v);
        if ballot.is_empty() {
            empty_ballot_voters += 1;
            continue;
        }
        let ballot_len = rat(ballot.len() as i64);
        for (p, _) in ballot {
            let tags = project_tags(e, *p);
            let weight = rat(1) / (&ballot_len * rat(tags.len() as i64));
            for t in tags {
                *vote_shares.entry(t).or_insert_with(Rat::zero) += &weight;
            }
        }
    }
    if n > 0 {
        let n_rat = rat(n as i64);
        for share in vote_shares.values_mut() {
            *share /= &n_rat;
        }
    }

    let total_cost: u64 = e.cost_of(selected.iter().copied());
    if total_cost > 0 {
        for &p in selected {
            let tags = project_tags(e, p);
            let piece = rat_u(e.project(p).cost) / rat(tags.len() as i64);
            for t in tags {
                *spending_shares.entry(t).or_insert_with(Rat::zero) += &piece;
            }
        }
        let total = rat_u(total_cost);
        for share in spending_shares.values_mut() {
            *share /= &total;
        }
    }

    let tags: BTreeSet<&String> = vote_shares.keys().chain(spending_shares.keys()).collect();
    let l2 = tags
        .iter()
        .map(|t| {
            let a = vote_shares.get(*t).map(to_f64).unwrap_or(0.0);
            let b = spending_shares.get(*t).map(to_f64).unwrap_or(0.0);
            (a - b) * (a - b)
        })
        .sum::<f64>()
        .sqrt();

    TagShares {
        vote_shares,
        spending_shares,
        l2,
        empty_ballot_voters,
    }
}

/// Fraction of the budget spent: `cost(W) / b`.
pub fn funds_used(e: &Election, selected: &BTreeSet<usize>) -> Rat {
    rat_u(e.cost_of(selected.iter().copied())) / rat_u(e.budget())
}
