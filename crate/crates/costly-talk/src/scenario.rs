//! Scenario files, experiment reports, and the named reproduction suite.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coalition::{check_coalition_proof, check_strong, CoalitionProofResult, StrongResult};
use crate::error::{EvalError, ValidationError};
use crate::game::{Action, GameInstance, PayoffSpec, SenderSpec};
use crate::grid::{Grid, ReportGrid, StateGrid};
use crate::protocol::{
    build_public_advocacy_equilibrium, build_skeptical_simultaneous_equilibrium,
    build_truthful_profile, DecisionRule, ProtocolSpec, RuleKind, SenderStrategy, StrategyProfile,
    Timing,
};
use crate::reach::ReachTable;
use crate::verify::{verify, VerificationReport, GAIN_TOL};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum ScenarioError {
    Io(std::io::Error),
    /// Malformed JSON or schema mismatch → exit code 2.
    Parse(String),
    /// Well-formed scenario describing an invalid game → exit code 2.
    Invalid(Vec<ValidationError>),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Io(e) => write!(f, "cannot read scenario: {e}"),
            ScenarioError::Parse(e) => write!(f, "cannot parse scenario: {e}"),
            ScenarioError::Invalid(errs) => {
                writeln!(f, "scenario rejected:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub state_half_extent: f64,
    pub report_half_extent: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenderConfig {
    pub du_alpha: f64,
    pub du_beta: f64,
    pub cost_scale: f64,
    pub cost_exponent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ProfileConfig {
    /// Every speaker reports the state.
    Truthful,
    /// Sequential opposed-pair construction with a burden-shifting rule.
    PublicAdvocacy,
    /// Truthful reporting under a unanimity rule (like-biased pairs).
    Skeptical,
    /// Explicit per-position strategies (state-indexed report vectors).
    Explicit { by_state: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RuleConfig {
    Threshold { t: f64 },
    Unanimity,
    Majority,
    /// Full |reports|^n action table, row-major over report-grid indices;
    /// entries are "a+" / "a-".
    Explicit { actions: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideConfig {
    pub reports: Vec<f64>,
    pub action: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridConfig,
    /// Receiver payoff difference coefficients.
    pub receiver: SenderConfigPayoffOnly,
    pub senders: Vec<SenderConfig>,
    /// Uniform prior when omitted.
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
    pub roster: Vec<usize>,
    pub timing: String,
    pub profile: ProfileConfig,
    /// Omit to let the construction pick its own rule (public_advocacy,
    /// skeptical); required for truthful/explicit profiles.
    #[serde(default)]
    pub rule: Option<RuleConfig>,
    #[serde(default)]
    pub rule_overrides: Vec<OverrideConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SenderConfigPayoffOnly {
    pub du_alpha: f64,
    pub du_beta: f64,
}

/// Everything needed to run checks: game, protocol, profile, rule.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub game: GameInstance,
    pub protocol: ProtocolSpec,
    pub profile: StrategyProfile,
    pub rule: DecisionRule,
}

fn parse_action(s: &str) -> Result<Action, ScenarioError> {
    match s {
        "a+" => Ok(Action::Plus),
        "a-" => Ok(Action::Minus),
        other => Err(ScenarioError::Parse(format!("unknown action {other:?}"))),
    }
}

pub fn instantiate(config: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::Parse(format!(
            "schema_version {} unsupported (expected {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    let state_grid = StateGrid(
        Grid::symmetric(config.grid.state_half_extent, config.grid.step)
            .map_err(|e| ScenarioError::Invalid(vec![e]))?,
    );
    let report_grid = ReportGrid(
        Grid::symmetric(config.grid.report_half_extent, config.grid.step)
            .map_err(|e| ScenarioError::Invalid(vec![e]))?,
    );
    let n = state_grid.grid().len();
    let prior = match &config.prior {
        Some(p) => p.clone(),
        None => {
            let mut p = vec![1.0 / n as f64; n];
            let sum: f64 = p.iter().sum();
            p[0] += 1.0 - sum;
            p
        }
    };
    let senders: Vec<SenderSpec> = config
        .senders
        .iter()
        .map(|s| SenderSpec {
            payoff: PayoffSpec {
                du_alpha: s.du_alpha,
                du_beta: s.du_beta,
            },
            cost: crate::game::CostSpec {
                scale: s.cost_scale,
                exponent: s.cost_exponent,
            },
        })
        .collect();
    let receiver = PayoffSpec {
        du_alpha: config.receiver.du_alpha,
        du_beta: config.receiver.du_beta,
    };
    let game = GameInstance::new(state_grid, report_grid, prior, receiver, senders)
        .map_err(ScenarioError::Invalid)?;

    let timing = match config.timing.as_str() {
        "simultaneous" => Timing::Simultaneous,
        "sequential" => Timing::Sequential,
        other => return Err(ScenarioError::Parse(format!("unknown timing {other:?}"))),
    };
    let protocol = ProtocolSpec {
        roster: config.roster.clone(),
        timing,
    };
    protocol
        .validate(&game)
        .map_err(|e| ScenarioError::Parse(e.to_string()))?;

    let base_rule = |cfg: &RuleConfig| -> Result<DecisionRule, ScenarioError> {
        Ok(match cfg {
            RuleConfig::Threshold { t } => DecisionRule::named(RuleKind::Threshold { t: *t }),
            RuleConfig::Unanimity => DecisionRule::named(RuleKind::Unanimity),
            RuleConfig::Majority => DecisionRule::named(RuleKind::Majority),
            RuleConfig::Explicit { actions } => {
                let acts = actions
                    .iter()
                    .map(|s| parse_action(s))
                    .collect::<Result<Vec<_>, _>>()?;
                DecisionRule::named(RuleKind::Explicit { actions: acts })
            }
        })
    };

    let (profile, mut rule) = match &config.profile {
        ProfileConfig::Truthful => {
            let profile = build_truthful_profile(&game, &protocol)
                .map_err(|e| ScenarioError::Parse(e.to_string()))?;
            let rule = config
                .rule
                .as_ref()
                .ok_or_else(|| {
                    ScenarioError::Parse("truthful profile requires an explicit rule".into())
                })
                .and_then(|r| base_rule(r))?;
            (profile, rule)
        }
        ProfileConfig::PublicAdvocacy => {
            let (profile, rule) = build_public_advocacy_equilibrium(&game, &protocol)
                .map_err(|e| ScenarioError::Parse(e.to_string()))?;
            if config.rule.is_some() {
                return Err(ScenarioError::Parse(
                    "public_advocacy supplies its own rule; omit `rule`".into(),
                ));
            }
            (profile, rule)
        }
        ProfileConfig::Skeptical => {
            let (profile, rule) = build_skeptical_simultaneous_equilibrium(&game, &protocol)
                .map_err(|e| ScenarioError::Parse(e.to_string()))?;
            if config.rule.is_some() {
                return Err(ScenarioError::Parse(
                    "skeptical supplies its own rule; omit `rule`".into(),
                ));
            }
            (profile, rule)
        }
        ProfileConfig::Explicit { by_state } => {
            if by_state.len() != protocol.roster.len() {
                return Err(ScenarioError::Parse(format!(
                    "explicit profile has {} strategies for a roster of {}",
                    by_state.len(),
                    protocol.roster.len()
                )));
            }
            let strategies = by_state
                .iter()
                .map(|v| SenderStrategy::ByState(v.clone()))
                .collect();
            let profile = StrategyProfile { strategies };
            profile
                .validate(&game, &protocol)
                .map_err(|e| ScenarioError::Parse(e.to_string()))?;
            let rule = config
                .rule
                .as_ref()
                .ok_or_else(|| {
                    ScenarioError::Parse("explicit profile requires an explicit rule".into())
                })
                .and_then(|r| base_rule(r))?;
            (profile, rule)
        }
    };
    for ov in &config.rule_overrides {
        rule = rule.with_override(ov.reports.clone(), parse_action(&ov.action)?);
    }

    Ok(Scenario {
        name: config.name.clone(),
        game,
        protocol,
        profile,
        rule,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(ScenarioError::Io)?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let config: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    instantiate(&config)
}

/// One run's machine-readable output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub tolerance: f64,
    pub verification: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strong: Option<StrongResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coalition_proof: Option<CoalitionProofResult>,
    /// Wall-clock milliseconds; excluded from the canonical form.
    pub elapsed_ms: u128,
}

impl ExperimentReport {
    /// Deterministic JSON with timing fields removed, for run-to-run
    /// comparison.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("elapsed_ms");
        }
        serde_json::to_string_pretty(&v).expect("canonical form serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckSet {
    pub equilibrium: bool,
    pub strong: bool,
    pub coalition_proof: bool,
}

impl Default for CheckSet {
    fn default() -> Self {
        CheckSet {
            equilibrium: true,
            strong: false,
            coalition_proof: false,
        }
    }
}

pub fn run_scenario(
    scenario: &Scenario,
    checks: CheckSet,
    tol: f64,
) -> Result<ExperimentReport, EvalError> {
    let start = std::time::Instant::now();
    let verification = verify(
        &scenario.game,
        &scenario.protocol,
        &scenario.profile,
        &scenario.rule,
        tol,
    )?;
    let strong = if checks.strong {
        Some(check_strong(
            &scenario.game,
            &scenario.protocol,
            &scenario.profile,
            &scenario.rule,
            tol,
        )?)
    } else {
        None
    };
    let coalition_proof = if checks.coalition_proof {
        Some(check_coalition_proof(
            &scenario.game,
            &scenario.protocol,
            &scenario.profile,
            &scenario.rule,
            tol,
        )?)
    } else {
        None
    };
    Ok(ExperimentReport {
        scenario: scenario.name.clone(),
        tolerance: tol,
        verification,
        strong,
        coalition_proof,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

/// CSV form: a witness row per individual-rationality failure, then a reach
/// row per (sender, state).
pub fn report_to_csv(scenario: &Scenario, report: &ExperimentReport) -> Result<String, EvalError> {
    let mut out = String::new();
    out.push_str("section,sender,state,report,gain,reach_upper,reach_lower\n");
    for w in &report.verification.individual_rationality.witnesses {
        out.push_str(&format!(
            "witness,{},{},{},{},,\n",
            w.sender, w.state, w.deviating_report, w.gain
        ));
    }
    let table = ReachTable::build(&scenario.game)?;
    for (sender, rows) in table.rows.iter().enumerate() {
        for row in rows {
            out.push_str(&format!(
                "reach,{},{},,,{},{}\n",
                sender,
                row.state,
                row.upper.map_or(String::new(), |v| v.to_string()),
                row.lower.map_or(String::new(), |v| v.to_string()),
            ));
        }
    }
    Ok(out)
}

// ---- bundled scenarios ----------------------------------------------------

pub const BUNDLED: &[(&str, &str)] = &[
    (
        "l1_public_advocacy",
        include_str!("../scenarios/l1_public_advocacy.json"),
    ),
    (
        "l1_public_advocacy_swapped",
        include_str!("../scenarios/l1_public_advocacy_swapped.json"),
    ),
    (
        "l1_single_sender",
        include_str!("../scenarios/l1_single_sender.json"),
    ),
    (
        "like_biased_twin_simultaneous",
        include_str!("../scenarios/like_biased_twin_simultaneous.json"),
    ),
    (
        "like_biased_twin_sequential",
        include_str!("../scenarios/like_biased_twin_sequential.json"),
    ),
    (
        "l1_opposed_simultaneous",
        include_str!("../scenarios/l1_opposed_simultaneous.json"),
    ),
    ("triple_mixed", include_str!("../scenarios/triple_mixed.json")),
];

pub fn bundled_scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let text = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| ScenarioError::Parse(format!("no bundled scenario named {name:?}")))?;
    parse_scenario(text)
}

// ---- reproduction suite ---------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteItem {
    pub name: String,
    pub reproduced: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub items: Vec<SuiteItem>,
}

impl SuiteReport {
    pub fn all_reproduced(&self) -> bool {
        self.items.iter().all(|i| i.reproduced)
    }
}

pub const SUITE_PROPS: &[&str] = &[
    "single_sender_no_threshold_equilibrium",
    "like_biased_pair_not_coalition_proof",
    "like_biased_sequences_follow_suit",
    "opposed_pair_advocacy_equilibrium",
    "advocacy_order_invariance",
    "committee_needs_opposed_biases",
    "mixed_committee_majority_fragile",
];

/// Runs one named reproduction (or "all") and reports REPRODUCED / FAILED
/// per item.
pub fn run_proposition_suite(which: &str) -> Result<SuiteReport, Box<dyn std::error::Error>> {
    let names: Vec<&str> = if which == "all" {
        SUITE_PROPS.to_vec()
    } else if SUITE_PROPS.contains(&which) {
        vec![which]
    } else {
        return Err(format!(
            "unknown suite item {which:?}; available: {} or \"all\"",
            SUITE_PROPS.join(", ")
        )
        .into());
    };
    let mut items = Vec::new();
    for name in names {
        items.push(run_suite_item(name)?);
    }
    Ok(SuiteReport { items })
}

fn run_suite_item(name: &str) -> Result<SuiteItem, Box<dyn std::error::Error>> {
    let item = match name {
        "single_sender_no_threshold_equilibrium" => {
            // truthful + any grid threshold in [-1, 0] always admits a
            // unilateral deviation
            let scenario = bundled_scenario("l1_single_sender")?;
            let mut ok = true;
            let mut worst = String::new();
            let grid = scenario.game.report_grid().clone();
            for t in grid.points().iter().copied().filter(|&t| (-1.0..=0.0).contains(&t)) {
                let rule = DecisionRule::named(RuleKind::Threshold { t });
                let rep = verify(
                    &scenario.game,
                    &scenario.protocol,
                    &scenario.profile,
                    &rule,
                    GAIN_TOL,
                )?;
                if rep.individual_rationality.passed {
                    ok = false;
                    worst = format!("threshold {t} unexpectedly deviation-free");
                    break;
                }
            }
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: if ok {
                    "every threshold in [-1,0] admits a profitable unilateral deviation".into()
                } else {
                    worst
                },
            }
        }
        "like_biased_pair_not_coalition_proof" => {
            let scenario = bundled_scenario("like_biased_twin_simultaneous")?;
            let rep = run_scenario(
                &scenario,
                CheckSet {
                    equilibrium: true,
                    strong: true,
                    coalition_proof: true,
                },
                GAIN_TOL,
            )?;
            let pbe = rep.verification.is_pbe_and_efficient();
            let cp = rep.coalition_proof.as_ref().unwrap();
            let ok = pbe && !cp.coalition_proof;
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: format!(
                    "efficient PBE: {pbe}; coalition-proof: {}",
                    cp.coalition_proof
                ),
            }
        }
        "like_biased_sequences_follow_suit" => {
            let scenario = bundled_scenario("like_biased_twin_sequential")?;
            let rep = verify(
                &scenario.game,
                &scenario.protocol,
                &scenario.profile,
                &scenario.rule,
                GAIN_TOL,
            )?;
            let ok = !rep.individual_rationality.passed;
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: format!(
                    "a like-biased follower profits by copying a favorable first report: \
                     {} witness(es)",
                    rep.individual_rationality.witnesses.len()
                ),
            }
        }
        "opposed_pair_advocacy_equilibrium" => {
            let scenario = bundled_scenario("l1_public_advocacy")?;
            let rep = run_scenario(
                &scenario,
                CheckSet {
                    equilibrium: true,
                    strong: true,
                    coalition_proof: true,
                },
                GAIN_TOL,
            )?;
            let ok = rep.verification.is_pbe_and_efficient()
                && rep.strong.as_ref().unwrap().strong
                && rep.coalition_proof.as_ref().unwrap().coalition_proof;
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: "efficient PBE, strong, coalition-proof".into(),
            }
        }
        "advocacy_order_invariance" => {
            let scenario = bundled_scenario("l1_public_advocacy_swapped")?;
            let rep = verify(
                &scenario.game,
                &scenario.protocol,
                &scenario.profile,
                &scenario.rule,
                GAIN_TOL,
            )?;
            let ok = rep.is_pbe_and_efficient();
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: "negative-first speaking order also supports the efficient PBE".into(),
            }
        }
        "committee_needs_opposed_biases" => {
            // like-biased truthful profiles break under a permissive rule,
            // opposed ones do not (branch contrast)
            let permissive = bundled_scenario("like_biased_twin_simultaneous")?;
            let rule = permissive
                .rule
                .clone()
                .with_override(vec![0.1, -0.1], Action::Plus);
            let broke = !verify(
                &permissive.game,
                &permissive.protocol,
                &permissive.profile,
                &rule,
                GAIN_TOL,
            )?
            .individual_rationality
            .passed;
            let opposed = bundled_scenario("l1_public_advocacy")?;
            let holds = verify(
                &opposed.game,
                &opposed.protocol,
                &opposed.profile,
                &opposed.rule,
                GAIN_TOL,
            )?
            .individual_rationality
            .passed;
            SuiteItem {
                name: name.into(),
                reproduced: broke && holds,
                detail: format!(
                    "permissive like-biased rule broken: {broke}; opposed advocacy holds: {holds}"
                ),
            }
        }
        "mixed_committee_majority_fragile" => {
            let scenario = bundled_scenario("triple_mixed")?;
            let rep = verify(
                &scenario.game,
                &scenario.protocol,
                &scenario.profile,
                &scenario.rule,
                GAIN_TOL,
            )?;
            let pair = crate::coalition::find_coalition_deviation(
                &scenario.game,
                &scenario.protocol,
                &scenario.profile,
                &scenario.rule,
                &[0, 1],
                GAIN_TOL,
            )?;
            let se = match &pair {
                Some(w) => {
                    crate::coalition::is_self_enforcing(
                        &scenario.game,
                        &scenario.protocol,
                        &scenario.profile,
                        &scenario.rule,
                        w,
                        GAIN_TOL,
                    )?
                    .self_enforcing
                }
                None => false,
            };
            let ok = rep.individual_rationality.passed && se;
            SuiteItem {
                name: name.into(),
                reproduced: ok,
                detail: format!(
                    "unilateral deviations absent: {}; like-biased pair has a self-enforcing \
                     joint deviation: {se}",
                    rep.individual_rationality.passed
                ),
            }
        }
        other => {
            return Err(format!("unknown suite item {other:?}").into());
        }
    };
    Ok(item)
}
