//! Protocols, sender strategies, receiver decision rules, and playouts.
//!
//! Decision rules are stored as total action maps over report profiles, not
//! posterior systems: with a binary action set and a receiver whose payoff
//! difference changes sign, any off-path action is supportable by degenerate
//! beliefs, so a total action map is all a rule needs to carry. On-path
//! Bayes consistency is checked separately by the verifier.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::game::{Action, Bias, GameInstance, Player};
use crate::reach::{reach_lower, reach_upper};

/// Tolerance for treating two report values as the same point.
pub const REPORT_EQ_TOL: f64 = 1e-12;
/// Equality guard on burden-of-proof thresholds: a report within this band
/// of the reach threshold counts as meeting it. Shields the strict/weak
/// inequality in the rule from bisection noise (root tolerance 1e-12), while
/// staying far below the grid step.
pub const THRESHOLD_EQ_TOL: f64 = 1e-9;
/// A posterior-expected payoff difference within this band of zero counts as
/// a tie (broken toward `a+`). Absorbs rounding in renormalized priors.
pub const BAYES_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Simultaneous,
    Sequential,
}

/// Sender roster and timing. Roster order is speaking order when sequential.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub roster: Vec<usize>,
    pub timing: Timing,
}

impl ProtocolSpec {
    pub fn validate(&self, game: &GameInstance) -> Result<(), EvalError> {
        if self.roster.is_empty() {
            return Err(EvalError::Unsupported("empty roster".into()));
        }
        let mut seen = vec![false; game.n_senders()];
        for &j in &self.roster {
            if j >= game.n_senders() {
                return Err(EvalError::UnknownSender(j));
            }
            if seen[j] {
                return Err(EvalError::Unsupported(format!("duplicate sender {j}")));
            }
            seen[j] = true;
        }
        if self.timing == Timing::Sequential && self.roster.len() > 2 {
            return Err(EvalError::Unsupported(
                "sequential playout supports at most 2 senders".into(),
            ));
        }
        Ok(())
    }
}

/// A tabular reporting rule for one roster position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SenderStrategy {
    /// `reports[state_idx]`; ignores history.
    ByState(Vec<f64>),
    /// `reports[first_report_idx][state_idx]`; only valid for the second
    /// speaker of a sequential protocol.
    ByHistory(Vec<Vec<f64>>),
}

/// One strategy per roster position, in roster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    pub strategies: Vec<SenderStrategy>,
}

impl StrategyProfile {
    /// Table totality and shape checks. Reports that feed later history
    /// lookups must be report-grid points; the last sequential speaker may
    /// output real-valued (reach-derived) reports.
    pub fn validate(&self, game: &GameInstance, protocol: &ProtocolSpec) -> Result<(), EvalError> {
        if self.strategies.len() != protocol.roster.len() {
            return Err(EvalError::IncompleteStrategy(format!(
                "{} strategies for {} roster slots",
                self.strategies.len(),
                protocol.roster.len()
            )));
        }
        let n_states = game.state_grid().len();
        let n_reports = game.report_grid().len();
        for (pos, strat) in self.strategies.iter().enumerate() {
            let must_be_on_grid = match protocol.timing {
                Timing::Simultaneous => false,
                Timing::Sequential => pos + 1 < protocol.roster.len(),
            };
            let check = |r: f64| -> Result<(), EvalError> {
                if must_be_on_grid && !game.report_grid().contains(r) {
                    return Err(EvalError::OffGridReport(r));
                }
                if r < game.report_grid().min() - REPORT_EQ_TOL
                    || r > game.report_grid().max() + REPORT_EQ_TOL
                {
                    return Err(EvalError::OffGridReport(r));
                }
                Ok(())
            };
            match strat {
                SenderStrategy::ByState(rows) => {
                    if rows.len() != n_states {
                        return Err(EvalError::IncompleteStrategy(format!(
                            "position {pos}: {} entries for {n_states} states",
                            rows.len()
                        )));
                    }
                    rows.iter().try_for_each(|&r| check(r))?;
                }
                SenderStrategy::ByHistory(table) => {
                    if protocol.timing != Timing::Sequential || pos != 1 {
                        return Err(EvalError::IncompleteStrategy(format!(
                            "position {pos}: history-indexed table outside the second \
                             sequential slot"
                        )));
                    }
                    if table.len() != n_reports {
                        return Err(EvalError::IncompleteStrategy(format!(
                            "position {pos}: {} history rows for {n_reports} reports",
                            table.len()
                        )));
                    }
                    for row in table {
                        if row.len() != n_states {
                            return Err(EvalError::IncompleteStrategy(format!(
                                "position {pos}: {} entries for {n_states} states",
                                row.len()
                            )));
                        }
                        row.iter().try_for_each(|&r| check(r))?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Report prescribed at `(history, θ)` for the given roster position.
    pub fn report(
        &self,
        game: &GameInstance,
        position: usize,
        history: &[f64],
        state_idx: usize,
    ) -> Result<f64, EvalError> {
        match self
            .strategies
            .get(position)
            .ok_or_else(|| EvalError::IncompleteStrategy(format!("no strategy at {position}")))?
        {
            SenderStrategy::ByState(rows) => Ok(rows[state_idx]),
            SenderStrategy::ByHistory(table) => {
                let first = *history.first().ok_or_else(|| {
                    EvalError::IncompleteStrategy("history-indexed table with no history".into())
                })?;
                let idx = game
                    .report_grid()
                    .index_of(first)
                    .ok_or(EvalError::OffGridReport(first))?;
                Ok(table[idx][state_idx])
            }
        }
    }
}

/// Named decision-rule families plus point overrides. Overrides are checked
/// first; the base kind fills in the remaining (total) map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub kind: RuleKind,
    #[serde(default)]
    pub overrides: Vec<RuleOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleOverride {
    pub reports: Vec<f64>,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Single sender: `a+` iff `r >= t`.
    Threshold { t: f64 },
    /// `a+` iff all reports agree on a common nonnegative value.
    Unanimity,
    /// `a+` iff a strict majority of reports agree on a nonnegative value;
    /// `a-` when the majority value is negative or no strict majority exists.
    Majority,
    /// Burden of proof with the positively biased sender speaking first:
    /// `a+` iff `r_first >= 0` and `r_second` exceeds the second sender's
    /// lower reach at 0.
    BurdenOnSecondNegative { lower_reach: f64 },
    /// Mirrored construction with the negatively biased sender first:
    /// `a+` iff `r_first >= 0` or `r_second` meets the second sender's
    /// upper reach at 0.
    BurdenOnSecondPositive { upper_reach: f64 },
    /// Explicit total table over report-grid profiles, mixed-radix indexed
    /// by report-grid position (last sender varies fastest).
    Explicit { actions: Vec<Action> },
}

impl DecisionRule {
    pub fn named(kind: RuleKind) -> Self {
        Self {
            kind,
            overrides: Vec::new(),
        }
    }

    pub fn with_override(mut self, reports: Vec<f64>, action: Action) -> Self {
        self.overrides.push(RuleOverride { reports, action });
        self
    }

    pub fn action(&self, game: &GameInstance, reports: &[f64]) -> Result<Action, EvalError> {
        for ov in &self.overrides {
            if ov.reports.len() == reports.len()
                && ov
                    .reports
                    .iter()
                    .zip(reports)
                    .all(|(a, b)| (a - b).abs() <= REPORT_EQ_TOL)
            {
                return Ok(ov.action);
            }
        }
        match &self.kind {
            RuleKind::Threshold { t } => {
                let r = reports
                    .first()
                    .copied()
                    .ok_or_else(|| EvalError::Unsupported("empty report profile".into()))?;
                Ok(if r >= *t { Action::Plus } else { Action::Minus })
            }
            RuleKind::Unanimity => {
                let first = reports[0];
                let unanimous = reports.iter().all(|&r| (r - first).abs() <= REPORT_EQ_TOL);
                Ok(if unanimous && first >= 0.0 {
                    Action::Plus
                } else {
                    Action::Minus
                })
            }
            RuleKind::Majority => {
                for &v in reports {
                    let count = reports
                        .iter()
                        .filter(|&&r| (r - v).abs() <= REPORT_EQ_TOL)
                        .count();
                    if 2 * count > reports.len() {
                        return Ok(if v >= 0.0 { Action::Plus } else { Action::Minus });
                    }
                }
                Ok(Action::Minus)
            }
            RuleKind::BurdenOnSecondNegative { lower_reach } => {
                if reports.len() != 2 {
                    return Err(EvalError::Unsupported("burden rule needs 2 reports".into()));
                }
                Ok(
                    if reports[0] >= 0.0 && reports[1] > lower_reach + THRESHOLD_EQ_TOL {
                        Action::Plus
                    } else {
                        Action::Minus
                    },
                )
            }
            RuleKind::BurdenOnSecondPositive { upper_reach } => {
                if reports.len() != 2 {
                    return Err(EvalError::Unsupported("burden rule needs 2 reports".into()));
                }
                Ok(
                    if reports[0] >= 0.0 || reports[1] >= upper_reach - THRESHOLD_EQ_TOL {
                        Action::Plus
                    } else {
                        Action::Minus
                    },
                )
            }
            RuleKind::Explicit { actions } => {
                let n = game.report_grid().len();
                let mut idx = 0usize;
                for &r in reports {
                    let i = game
                        .report_grid()
                        .index_of(r)
                        .ok_or(EvalError::OffGridReport(r))?;
                    idx = idx * n + i;
                }
                actions
                    .get(idx)
                    .copied()
                    .ok_or_else(|| EvalError::IncompleteStrategy("explicit rule table".into()))
            }
        }
    }
}

/// One realized play: reports in roster order, receiver action, and realized
/// utilities (receiver `u_r`, senders `w_j`), all recomputable from
/// `(reports, action, θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub theta: f64,
    pub reports: Vec<f64>,
    pub action: Action,
    pub receiver_utility: f64,
    pub sender_utilities: Vec<f64>,
}

/// Reports generated in timing order; sequential senders see true prefixes.
pub fn reports_for_state(
    game: &GameInstance,
    protocol: &ProtocolSpec,
    profile: &StrategyProfile,
    state_idx: usize,
) -> Result<Vec<f64>, EvalError> {
    let mut reports = Vec::with_capacity(protocol.roster.len());
    for pos in 0..protocol.roster.len() {
        let history: &[f64] = match protocol.timing {
            Timing::Simultaneous => &[],
            Timing::Sequential => &reports,
        };
        let r = profile.report(game, pos, history, state_idx)?;
        reports.push(r);
    }
    Ok(reports)
}

pub fn playout(
    game: &GameInstance,
    protocol: &ProtocolSpec,
    profile: &StrategyProfile,
    rule: &DecisionRule,
    theta: f64,
) -> Result<Outcome, EvalError> {
    let state_idx = game
        .state_grid()
        .index_of(theta)
        .ok_or(EvalError::OffGridState(theta))?;
    let reports = reports_for_state(game, protocol, profile, state_idx)?;
    outcome_for_reports(game, protocol, rule, theta, reports)
}

/// Completes an outcome from already-realized reports.
pub fn outcome_for_reports(
    game: &GameInstance,
    protocol: &ProtocolSpec,
    rule: &DecisionRule,
    theta: f64,
    reports: Vec<f64>,
) -> Result<Outcome, EvalError> {
    let action = rule.action(game, &reports)?;
    let sender_utilities = protocol
        .roster
        .iter()
        .zip(&reports)
        .map(|(&j, &r)| game.sender_total_utility_unchecked(j, r, action, theta))
        .collect();
    Ok(Outcome {
        theta,
        reports,
        action,
        receiver_utility: game.receiver_utility(action, theta),
        sender_utilities,
    })
}

/// `a+` iff the posterior-expected payoff difference is nonnegative
/// (ties break toward `a+`).
pub fn receiver_best_action(game: &GameInstance, posterior: &[f64]) -> Result<Action, EvalError> {
    if posterior.len() != game.state_grid().len() {
        return Err(EvalError::DegeneratePosterior);
    }
    let mut mass = 0.0;
    let mut expected = 0.0;
    for (i, &w) in posterior.iter().enumerate() {
        if w < 0.0 {
            return Err(EvalError::DegeneratePosterior);
        }
        mass += w;
        expected += w * game.delta_u_unchecked(Player::Receiver, game.state_grid().point(i));
    }
    if mass <= 0.0 {
        return Err(EvalError::DegeneratePosterior);
    }
    Ok(if expected >= -BAYES_TIE_TOL {
        Action::Plus
    } else {
        Action::Minus
    })
}

/// Truthful profile: every sender reports θ at every history.
pub fn build_truthful_profile(
    game: &GameInstance,
    protocol: &ProtocolSpec,
) -> Result<StrategyProfile, EvalError> {
    for &theta in game.state_grid().points() {
        if !game.report_grid().contains(theta) {
            return Err(EvalError::GridMisalignment(format!(
                "state {theta} is not a report-grid point"
            )));
        }
    }
    let truth = game.state_grid().points().to_vec();
    Ok(StrategyProfile {
        strategies: protocol
            .roster
            .iter()
            .map(|_| SenderStrategy::ByState(truth.clone()))
            .collect(),
    })
}

/// The public-advocacy equilibrium pair: first speaker truthful; second
/// speaker overturns only in adverse states after a favorable first report,
/// using a reach-threshold report; rule assigns the burden of proof to the
/// second speaker. Supports both speaking orders (the mirrored construction
/// when the negatively biased sender speaks first).
pub fn build_public_advocacy_equilibrium(
    game: &GameInstance,
    protocol: &ProtocolSpec,
) -> Result<(StrategyProfile, DecisionRule), EvalError> {
    if protocol.timing != Timing::Sequential {
        return Err(EvalError::WrongTiming("public advocacy is sequential".into()));
    }
    if protocol.roster.len() != 2 {
        return Err(EvalError::WrongBiasConfiguration(
            "public advocacy needs exactly 2 senders".into(),
        ));
    }
    let (first, second) = (protocol.roster[0], protocol.roster[1]);
    let truth = game.state_grid().points().to_vec();
    let n_states = game.state_grid().len();
    let n_reports = game.report_grid().len();

    match (game.bias(first)?, game.bias(second)?) {
        (Bias::Positive, Bias::Negative) => {
            let lower_reach = reach_lower(game, second, 0.0)?;
            let mut table = vec![vec![0.0; n_states]; n_reports];
            for (ri, row) in table.iter_mut().enumerate() {
                let r1 = game.report_grid().point(ri);
                for (si, cell) in row.iter_mut().enumerate() {
                    let theta = game.state_grid().point(si);
                    *cell = if theta < 0.0 && r1 >= 0.0 {
                        lower_reach.min(theta)
                    } else {
                        theta
                    };
                }
            }
            let profile = StrategyProfile {
                strategies: vec![
                    SenderStrategy::ByState(truth),
                    SenderStrategy::ByHistory(table),
                ],
            };
            let rule = DecisionRule::named(RuleKind::BurdenOnSecondNegative { lower_reach });
            Ok((profile, rule))
        }
        (Bias::Negative, Bias::Positive) => {
            let upper_reach = reach_upper(game, second, 0.0)?;
            let mut table = vec![vec![0.0; n_states]; n_reports];
            for (ri, row) in table.iter_mut().enumerate() {
                let r1 = game.report_grid().point(ri);
                for (si, cell) in row.iter_mut().enumerate() {
                    let theta = game.state_grid().point(si);
                    *cell = if theta >= 0.0 && r1 < 0.0 {
                        upper_reach.max(theta)
                    } else {
                        theta
                    };
                }
            }
            let profile = StrategyProfile {
                strategies: vec![
                    SenderStrategy::ByState(truth),
                    SenderStrategy::ByHistory(table),
                ],
            };
            let rule = DecisionRule::named(RuleKind::BurdenOnSecondPositive { upper_reach });
            Ok((profile, rule))
        }
        _ => Err(EvalError::WrongBiasConfiguration(
            "public advocacy needs opposed-biased senders".into(),
        )),
    }
}

/// The skeptical simultaneous pair for like-biased positive senders:
/// all-truthful profile with the unanimity rule.
pub fn build_skeptical_simultaneous_equilibrium(
    game: &GameInstance,
    protocol: &ProtocolSpec,
) -> Result<(StrategyProfile, DecisionRule), EvalError> {
    if protocol.timing != Timing::Simultaneous {
        return Err(EvalError::WrongTiming("skeptical pair is simultaneous".into()));
    }
    if protocol.roster.len() < 2 {
        return Err(EvalError::WrongBiasConfiguration("need N >= 2 senders".into()));
    }
    for &j in &protocol.roster {
        if game.bias(j)? != Bias::Positive {
            return Err(EvalError::WrongBiasConfiguration(
                "skeptical construction needs like-biased positive senders".into(),
            ));
        }
    }
    let profile = build_truthful_profile(game, protocol)?;
    Ok((profile, DecisionRule::named(RuleKind::Unanimity)))
}

/// f64 with a total order, used as a deterministic map key.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TotalF64(f64);

impl Eq for TotalF64 {}
impl PartialOrd for TotalF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TotalF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// The image of the state grid under the profile's playout reports, with
/// the preimage states of each distinct profile.
#[derive(Debug, Clone)]
pub struct OnPathSet {
    /// Sorted by report profile; each entry carries the state indices that
    /// generate it.
    pub profiles: Vec<(Vec<f64>, Vec<usize>)>,
}

pub fn on_path_set(
    game: &GameInstance,
    protocol: &ProtocolSpec,
    profile: &StrategyProfile,
) -> Result<OnPathSet, EvalError> {
    let mut map: BTreeMap<Vec<TotalF64>, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    for state_idx in 0..game.state_grid().len() {
        let reports = reports_for_state(game, protocol, profile, state_idx)?;
        let key: Vec<TotalF64> = reports.iter().map(|&r| TotalF64(r)).collect();
        map.entry(key)
            .or_insert_with(|| (reports, Vec::new()))
            .1
            .push(state_idx);
    }
    Ok(OnPathSet {
        profiles: map.into_values().collect(),
    })
}

/// Bayes update of the prior on the preimage of a report profile.
#[derive(Debug, Clone, PartialEq)]
pub enum PosteriorResult {
    OnPath(Vec<f64>),
    OffPath,
}

pub fn posterior_update(
    game: &GameInstance,
    protocol: &ProtocolSpec,
    profile: &StrategyProfile,
    report_profile: &[f64],
) -> Result<PosteriorResult, EvalError> {
    let mut posterior = vec![0.0; game.state_grid().len()];
    let mut mass = 0.0;
    for state_idx in 0..game.state_grid().len() {
        let reports = reports_for_state(game, protocol, profile, state_idx)?;
        if reports.len() == report_profile.len()
            && reports
                .iter()
                .zip(report_profile)
                .all(|(a, b)| (a - b).abs() <= REPORT_EQ_TOL)
        {
            posterior[state_idx] = game.prior()[state_idx];
            mass += game.prior()[state_idx];
        }
    }
    if mass <= 0.0 {
        return Ok(PosteriorResult::OffPath);
    }
    posterior.iter_mut().for_each(|w| *w /= mass);
    Ok(PosteriorResult::OnPath(posterior))
}
