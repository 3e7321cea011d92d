//! Budgeted selection rules: Utilitarian Greedy, the Method of Equal Shares,
//! and the U / Eps / Add1 / Add1U completions that make Equal Shares
//! exhaustive.
//!
//! Everything runs on exact rationals: price-per-utility comparisons and
//! payment ledgers are reproducible and tie-stable across runs and thread
//! counts. Ties are broken by lower cost, then lexicographic project id.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::model::{Election, UtilityModel};
use crate::rational::{rat, rat_u, ratio, Rat};

/// Which rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    UtilitarianGreedy,
    EqualShares,
}

/// Strategy for making an Equal Shares outcome exhaustive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Completion {
    None,
    /// Top up with Utilitarian Greedy over the leftover budget.
    Utilitarian,
    /// Give every zero-score pair a tiny epsilon score and rerun.
    Eps,
    /// Escalate per-voter endowments one currency unit at a time.
    Add1,
    /// Add1 followed by the Utilitarian Greedy top-up.
    Add1U,
}

impl Completion {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Utilitarian => "u",
            Self::Eps => "eps",
            Self::Add1 => "add1",
            Self::Add1U => "add1u",
        }
    }
}

/// Rule, utility model and completion; fully determines a deterministic run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleSpec {
    pub rule: Rule,
    pub utility: UtilityModel,
    pub completion: Completion,
}

impl RuleSpec {
    pub fn utilitarian_greedy(utility: UtilityModel) -> Self {
        Self {
            rule: Rule::UtilitarianGreedy,
            utility,
            completion: Completion::None,
        }
    }

    pub fn equal_shares(utility: UtilityModel, completion: Completion) -> Self {
        Self {
            rule: Rule::EqualShares,
            utility,
            completion,
        }
    }

    /// Stable identifier used in reports, e.g. `mes:cost:add1u`.
    pub fn id(&self) -> String {
        match self.rule {
            Rule::UtilitarianGreedy => format!("ug:{}", self.utility.as_str()),
            Rule::EqualShares => format!(
                "mes:{}:{}",
                self.utility.as_str(),
                self.completion.as_str()
            ),
        }
    }

    /// Run the rule on an election.
    pub fn execute(&self, e: &Election) -> Outcome {
        match self.rule {
            Rule::UtilitarianGreedy => utilitarian_greedy(e, self.utility),
            Rule::EqualShares => match self.completion {
                Completion::None => equal_shares(e, self.utility),
                Completion::Utilitarian => {
                    let core = equal_shares(e, self.utility);
                    complete_utilitarian(e, self.utility, core)
                }
                Completion::Eps => complete_eps(e, self.utility),
                Completion::Add1 => complete_add1(e, self.utility, false),
                Completion::Add1U => complete_add1(e, self.utility, true),
            },
        }
    }
}

/// A selected project set, with the payment ledger for priceable rules.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Selected project indices.
    pub selected: BTreeSet<usize>,
    /// Projects in selection order.
    pub order: Vec<usize>,
    /// `(voter, project) -> payment`; present for Equal Shares runs.
    /// Payments always sum to the cost of each selected project.
    pub payments: Option<BTreeMap<(usize, usize), Rat>>,
    /// Price-per-utility at which each Equal Shares selection was bought,
    /// parallel to the Equal Shares prefix of `order`.
    pub alphas: Vec<Rat>,
    pub total_cost: u64,
}

impl Outcome {
    pub fn empty() -> Self {
        Self {
            selected: BTreeSet::new(),
            order: Vec::new(),
            payments: None,
            alphas: Vec::new(),
            total_cost: 0,
        }
    }

    pub fn funds_used_fraction(&self, e: &Election) -> Rat {
        ratio(self.total_cost as i64, e.budget() as i64)
    }

    /// Selected project ids, sorted.
    pub fn selected_ids(&self, e: &Election) -> Vec<String> {
        let mut ids: Vec<String> = self
            .selected
            .iter()
            .map(|&p| e.project(p).id.clone())
            .collect();
        ids.sort();
        ids
    }
}

/// True iff no unselected project fits in the leftover budget.
pub fn is_exhaustive(e: &Election, selected: &BTreeSet<usize>) -> bool {
    let spent: u64 = e.cost_of(selected.iter().copied());
    (0..e.num_projects())
        .filter(|p| !selected.contains(p))
        .all(|p| spent + e.project(p).cost > e.budget())
}

// Tie order: lower cost first, then lexicographic project id.
fn tie_key<'a>(e: &'a Election, p: usize) -> (u64, &'a str) {
    (e.project(p).cost, e.project(p).id.as_str())
}

/// Utilitarian Greedy over the full election budget.
pub fn utilitarian_greedy(e: &Election, model: UtilityModel) -> Outcome {
    utilitarian_greedy_over(e, model, e.budget(), &BTreeSet::new())
}

/// Utilitarian Greedy over a working budget, skipping excluded projects.
///
/// Projects are visited in descending total-utility-to-cost ratio; a project
/// that does not fit is discarded permanently. The returned outcome is
/// exhaustive relative to the working budget and candidate set.
pub fn utilitarian_greedy_over(
    e: &Election,
    model: UtilityModel,
    budget: u64,
    excluded: &BTreeSet<usize>,
) -> Outcome {
    let mut candidates: Vec<usize> = (0..e.num_projects())
        .filter(|p| !excluded.contains(p))
        .collect();
    // ratio comparison via cross-multiplication keeps everything exact
    candidates.sort_by(|&a, &b| {
        let ra = e.total_utility_weight(a, model) * rat_u(e.project(b).cost);
        let rb = e.total_utility_weight(b, model) * rat_u(e.project(a).cost);
        rb.cmp(&ra).then_with(|| tie_key(e, a).cmp(&tie_key(e, b)))
    });

    let mut out = Outcome::empty();
    for p in candidates {
        if out.total_cost + e.project(p).cost <= budget {
            out.total_cost += e.project(p).cost;
            out.selected.insert(p);
            out.order.push(p);
        }
    }
    out
}

/// Remaining per-voter endowments during an Equal Shares run.
#[derive(Debug, Clone)]
pub struct BudgetLedger {
    pub remaining: Vec<Rat>,
}

impl BudgetLedger {
    pub fn uniform(n: usize, endowment: &Rat) -> Self {
        Self {
            remaining: vec![endowment.clone(); n],
        }
    }
}

/// Result of the affordability check for one project.
#[derive(Debug, Clone, PartialEq)]
pub enum AffordabilityResult {
    Affordable {
        /// Minimal price per unit of utility at which the cost is covered.
        alpha: Rat,
        /// `(voter, payment)` for every paying supporter.
        payments: Vec<(usize, Rat)>,
    },
    NotAffordable,
}

/// Find the minimal `alpha` with `sum_i min(b_i, alpha * u_i(p)) = cost(p)`.
///
/// The left side is piecewise linear and nondecreasing in `alpha` with
/// breakpoints at `b_i / u_i(p)`; sorting supporters by breakpoint and
/// scanning yields the exact solution. The project is not affordable iff
/// the supporters' remaining endowments sum below its cost.
pub fn alpha_affordability(
    e: &Election,
    project: usize,
    ledger: &BudgetLedger,
    model: UtilityModel,
) -> AffordabilityResult {
    let cost = rat_u(e.project(project).cost);
    let mut supporters: Vec<(usize, Rat)> = e
        .supporters(project)
        .iter()
        .map(|(v, _)| (*v, e.utility_weight(*v, project, model)))
        .filter(|(v, _)| !ledger.remaining[*v].is_zero())
        .collect();
    if supporters.is_empty() {
        return AffordabilityResult::NotAffordable;
    }
    let available: Rat = supporters
        .iter()
        .map(|(v, _)| ledger.remaining[*v].clone())
        .sum();
    if available < cost {
        return AffordabilityResult::NotAffordable;
    }

    // ascending breakpoints b_v / u_v
    supporters.sort_by(|(va, ua), (vb, ub)| {
        let lhs = &ledger.remaining[*va] * ub;
        let rhs = &ledger.remaining[*vb] * ua;
        lhs.cmp(&rhs).then(va.cmp(vb))
    });

    let mut remaining_cost = cost.clone();
    let mut active_utility: Rat = supporters.iter().map(|(_, u)| u.clone()).sum();
    let mut alpha = Rat::zero();
    for (idx, (v, u)) in supporters.iter().enumerate() {
        let candidate = &remaining_cost / &active_utility;
        // capped iff alpha * u_v exceeds the voter's remaining budget
        if &candidate * u <= ledger.remaining[*v] {
            alpha = candidate;
            break;
        }
        remaining_cost -= &ledger.remaining[*v];
        active_utility -= u;
        if idx + 1 == supporters.len() || active_utility.is_zero() {
            // every supporter pays their full budget; minimal alpha is the
            // largest breakpoint (available == cost exactly)
            alpha = &ledger.remaining[*v] / u;
        }
    }

    let payments: Vec<(usize, Rat)> = supporters
        .iter()
        .map(|(v, u)| {
            let uncapped = &alpha * u;
            let pay = if uncapped <= ledger.remaining[*v] {
                uncapped
            } else {
                ledger.remaining[*v].clone()
            };
            (*v, pay)
        })
        .filter(|(_, pay)| !pay.is_zero())
        .collect();
    debug_assert_eq!(payments.iter().map(|(_, p)| p.clone()).sum::<Rat>(), cost);
    AffordabilityResult::Affordable { alpha, payments }
}

/// Equal Shares with the standard per-voter endowment `b / n`.
pub fn equal_shares(e: &Election, model: UtilityModel) -> Outcome {
    if e.num_voters() == 0 {
        return Outcome::empty();
    }
    let endowment = ratio(e.budget() as i64, e.num_voters() as i64);
    equal_shares_core(e, model, &endowment)
}

/// The Equal Shares selection loop with an arbitrary initial endowment.
///
/// Repeatedly buys the project affordable at minimal `alpha`, deducting
/// payments, until nothing is affordable. With endowments above `b / n`
/// the outcome may cost more than the election budget; callers enforce
/// budget feasibility (see [`complete_add1`]).
pub fn equal_shares_core(e: &Election, model: UtilityModel, endowment: &Rat) -> Outcome {
    let mut ledger = BudgetLedger::uniform(e.num_voters(), endowment);
    let mut out = Outcome::empty();
    let mut payments = BTreeMap::new();
    // endowments only shrink, so a project seen unaffordable stays so
    let mut alive: Vec<usize> = (0..e.num_projects()).collect();

    loop {
        let mut best: Option<(Rat, usize, Vec<(usize, Rat)>)> = None;
        let mut next_alive = Vec::with_capacity(alive.len());
        for &p in &alive {
            if out.selected.contains(&p) {
                continue;
            }
            match alpha_affordability(e, p, &ledger, model) {
                AffordabilityResult::NotAffordable => {}
                AffordabilityResult::Affordable { alpha, payments } => {
                    let better = match &best {
                        None => true,
                        Some((best_alpha, best_p, _)) => {
                            alpha < *best_alpha
                                || (alpha == *best_alpha
                                    && tie_key(e, p) < tie_key(e, *best_p))
                        }
                    };
                    if better {
                        best = Some((alpha, p, payments));
                    }
                    next_alive.push(p);
                }
            }
        }
        match best {
            None => break,
            Some((alpha, p, pays)) => {
                for (v, pay) in pays {
                    ledger.remaining[v] -= &pay;
                    payments.insert((v, p), pay);
                }
                out.total_cost += e.project(p).cost;
                out.selected.insert(p);
                out.order.push(p);
                out.alphas.push(alpha);
                alive = next_alive;
            }
        }
    }
    out.payments = Some(payments);
    out
}

/// Utilitarian Greedy completion: top up a (budget-feasible) partial outcome
/// with greedy selections over the remaining budget. The payment ledger of
/// the partial outcome is preserved; topped-up projects carry no payments.
pub fn complete_utilitarian(e: &Election, model: UtilityModel, partial: Outcome) -> Outcome {
    debug_assert!(partial.total_cost <= e.budget());
    let remaining = e.budget() - partial.total_cost;
    let extra = utilitarian_greedy_over(e, model, remaining, &partial.selected);
    let mut out = partial;
    for p in extra.order {
        out.total_cost += e.project(p).cost;
        out.selected.insert(p);
        out.order.push(p);
    }
    out
}

/// Eps completion: give every zero-score (voter, project) pair a tiny
/// positive score and run plain Equal Shares on the tweaked election.
///
/// Epsilon is `1 / (1 + m * n * s_max)` as an exact rational, small enough
/// that no epsilon coalition can outbid a genuine supporter per unit of
/// utility. The payment ledger comes from the tweaked run, so it may contain
/// epsilon-driven payments by non-supporters.
pub fn complete_eps(e: &Election, model: UtilityModel) -> Outcome {
    let s_max = (0..e.num_voters())
        .flat_map(|v| e.ballot(v).iter().map(|(_, s)| s.clone()))
        .max()
        .unwrap_or_else(|| rat(1));
    let epsilon = rat(1)
        / (rat(1) + rat(e.num_projects() as i64) * rat(e.num_voters() as i64) * s_max);

    let mut triples = Vec::new();
    for v in 0..e.num_voters() {
        let mut have: Vec<bool> = vec![false; e.num_projects()];
        for (p, s) in e.ballot(v) {
            have[*p] = true;
            triples.push((e.voters()[v].clone(), e.project(*p).id.clone(), s.clone()));
        }
        for p in 0..e.num_projects() {
            if !have[p] {
                triples.push((
                    e.voters()[v].clone(),
                    e.project(p).id.clone(),
                    epsilon.clone(),
                ));
            }
        }
    }
    let tweaked = Election::new(
        e.projects().to_vec(),
        e.voters().to_vec(),
        e.budget(),
        triples,
        None,
    )
    .expect("tweaked election is structurally valid");
    // project indices coincide between e and the tweaked election
    equal_shares(&tweaked, model)
}

/// Add1 completion: rerun Equal Shares from scratch with per-voter endowment
/// `b/n + k` for `k = 0, 1, 2, ...`, stopping at the first exhaustive
/// outcome or when the outcome would overshoot the election budget; the last
/// budget-feasible outcome is returned. With `with_final_ug`, the result is
/// additionally topped up greedily (Add1U).
pub fn complete_add1(e: &Election, model: UtilityModel, with_final_ug: bool) -> Outcome {
    let finish = |out: Outcome| {
        if with_final_ug {
            complete_utilitarian(e, model, out)
        } else {
            out
        }
    };
    if e.num_voters() == 0 {
        return finish(Outcome::empty());
    }
    let supported: BTreeSet<usize> = (0..e.num_projects())
        .filter(|&p| !e.supporters(p).is_empty())
        .collect();
    let base = ratio(e.budget() as i64, e.num_voters() as i64);
    let mut last_feasible = Outcome::empty();
    let mut k = 0u64;
    loop {
        let endowment = &base + rat_u(k);
        let out = equal_shares_core(e, model, &endowment);
        if out.total_cost > e.budget() {
            return finish(last_feasible);
        }
        let done_all_supported = supported.iter().all(|p| out.selected.contains(p));
        last_feasible = out;
        if is_exhaustive(e, &last_feasible.selected) {
            return finish(last_feasible);
        }
        if done_all_supported {
            // larger endowments cannot add anything new
            return finish(last_feasible);
        }
        k += 1;
    }
}
