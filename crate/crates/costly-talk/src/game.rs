//! The economic environment: grids, prior, payoff differences, misreporting
//! costs, and player utilities.
//!
//! Payoffs are normalized so that `u_i(a-, θ) = 0` for every player; only the
//! payoff difference `Δu_i(θ) = u_i(a+, θ) - u_i(a-, θ)` matters for any
//! decision, and the affine family `Δu_i(θ) = du_alpha + du_beta · θ` with
//! `du_beta >= 0` satisfies every monotonicity assumption while admitting
//! closed-form reach values for testing.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, ValidationError};
use crate::grid::{Grid, ReportGrid, StateGrid};

/// The receiver's binary decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "a+")]
    Plus,
    #[serde(rename = "a-")]
    Minus,
}

/// A player: the receiver or the sender with the given roster-independent id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    Receiver,
    Sender(usize),
}

/// Affine payoff difference `Δu(θ) = du_alpha + du_beta · θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    pub du_alpha: f64,
    pub du_beta: f64,
}

impl PayoffSpec {
    pub fn delta_u(&self, theta: f64) -> f64 {
        self.du_alpha + self.du_beta * theta
    }
}

/// Misreporting cost `C(r, θ) = scale · |r - θ|^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub scale: f64,
    pub exponent: f64,
}

impl CostSpec {
    pub fn cost(&self, report: f64, theta: f64) -> f64 {
        self.scale * (report - theta).abs().powf(self.exponent)
    }
}

/// One informed sender: payoff difference plus misreporting cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SenderSpec {
    pub payoff: PayoffSpec,
    pub cost: CostSpec,
}

/// Sign of a sender's bias `Δu_j(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bias {
    Positive,
    Negative,
}

/// Bias configuration of a sender roster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasClass {
    AllLikeBiasedPositive,
    AllLikeBiasedNegative,
    ContainsOpposedPair,
}

/// Outcome of [`GameInstance::classify_biases`]: the class plus the sets
/// `Z = {j : Δu_j(0) > 0}` and `Y = {j : Δu_j(0) < 0}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasClassification {
    pub class: BiasClass,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

/// A validated costly-talk environment. Immutable after construction; all
/// operations are pure functions of their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    state_grid: StateGrid,
    report_grid: ReportGrid,
    prior: Vec<f64>,
    receiver: PayoffSpec,
    senders: Vec<SenderSpec>,
}

impl GameInstance {
    /// Validates every environment invariant and returns the instance, or
    /// the full list of named violations.
    pub fn new(
        state_grid: StateGrid,
        report_grid: ReportGrid,
        prior: Vec<f64>,
        receiver: PayoffSpec,
        senders: Vec<SenderSpec>,
    ) -> Result<Self, Vec<ValidationError>> {
        let mut errors = Vec::new();

        if let Err(e) = report_grid.validate_against(&state_grid) {
            errors.push(e);
        }

        // Prior: full support, sums to 1.
        if prior.len() != state_grid.grid().len() {
            errors.push(ValidationError::BadPrior(format!(
                "prior has {} weights for {} states",
                prior.len(),
                state_grid.grid().len()
            )));
        } else {
            if prior.iter().any(|&w| !(w > 0.0)) {
                errors.push(ValidationError::BadPrior(
                    "all weights must be strictly positive".into(),
                ));
            }
            let total: f64 = prior.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                errors.push(ValidationError::BadPrior(format!(
                    "weights sum to {total}, expected 1"
                )));
            }
        }

        // Receiver normalization: Δu_r > 0 on θ > 0, < 0 on θ < 0, >= 0 at 0.
        if receiver.du_beta < 0.0 {
            errors.push(ValidationError::NonMonotonePayoff("receiver".into()));
        }
        {
            let at_zero = receiver.delta_u(0.0);
            let mut ok = at_zero >= 0.0;
            for &theta in state_grid.grid().points() {
                let d = receiver.delta_u(theta);
                if theta > 0.0 && d <= 0.0 {
                    ok = false;
                }
                if theta < 0.0 && d >= 0.0 {
                    ok = false;
                }
            }
            if !ok {
                errors.push(ValidationError::BadReceiverNormalization(format!(
                    "need Δu_r(θ) sign-matching θ on the grid and Δu_r(0) >= 0, \
                     got Δu_r = {} + {}·θ",
                    receiver.du_alpha, receiver.du_beta
                )));
            }
        }

        for (j, s) in senders.iter().enumerate() {
            if s.payoff.du_beta < 0.0 {
                errors.push(ValidationError::NonMonotonePayoff(format!("sender {j}")));
            }
            if s.payoff.delta_u(0.0) == 0.0 {
                errors.push(ValidationError::ZeroBiasSender(j));
            }
            // Conflict: Δu_j > 0 somewhere below 0 or Δu_j < 0 somewhere above.
            let conflicts = state_grid.grid().points().iter().any(|&theta| {
                let d = s.payoff.delta_u(theta);
                (theta < 0.0 && d > 0.0) || (theta > 0.0 && d < 0.0)
            });
            if !conflicts {
                errors.push(ValidationError::NoConflictSender(j));
            }
            if !(s.cost.scale > 0.0) {
                errors.push(ValidationError::BadCost(j, "scale must be > 0".into()));
            }
            if !(s.cost.exponent >= 1.0) {
                errors.push(ValidationError::BadCost(j, "exponent must be >= 1".into()));
            }
        }

        if errors.is_empty() {
            Ok(Self {
                state_grid,
                report_grid,
                prior,
                receiver,
                senders,
            })
        } else {
            Err(errors)
        }
    }

    pub fn state_grid(&self) -> &Grid {
        self.state_grid.grid()
    }

    pub fn report_grid(&self) -> &Grid {
        self.report_grid.grid()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn n_senders(&self) -> usize {
        self.senders.len()
    }

    pub fn sender(&self, j: usize) -> Result<&SenderSpec, EvalError> {
        self.senders.get(j).ok_or(EvalError::UnknownSender(j))
    }

    pub fn receiver_payoff(&self) -> &PayoffSpec {
        &self.receiver
    }

    fn check_state(&self, theta: f64) -> Result<(), EvalError> {
        if self.state_grid().contains(theta) {
            Ok(())
        } else {
            Err(EvalError::OffGridState(theta))
        }
    }

    fn check_report(&self, r: f64) -> Result<(), EvalError> {
        if self.report_grid().contains(r) {
            Ok(())
        } else {
            Err(EvalError::OffGridReport(r))
        }
    }

    /// Payoff difference `Δu_i(θ)` for a grid state.
    pub fn delta_u(&self, player: Player, theta: f64) -> Result<f64, EvalError> {
        self.check_state(theta)?;
        Ok(self.delta_u_unchecked(player, theta))
    }

    /// Same as [`Self::delta_u`] without the grid membership check; used in
    /// inner loops where `theta` is already a grid point.
    pub fn delta_u_unchecked(&self, player: Player, theta: f64) -> f64 {
        match player {
            Player::Receiver => self.receiver.delta_u(theta),
            Player::Sender(j) => self.senders[j].payoff.delta_u(theta),
        }
    }

    /// Sender bias: sign of `Δu_j(0)`.
    pub fn bias(&self, j: usize) -> Result<Bias, EvalError> {
        let s = self.sender(j)?;
        if s.payoff.delta_u(0.0) > 0.0 {
            Ok(Bias::Positive)
        } else {
            Ok(Bias::Negative)
        }
    }

    /// Misreporting cost `C_j(r, θ)`.
    pub fn cost(&self, j: usize, report: f64, theta: f64) -> Result<f64, EvalError> {
        Ok(self.sender(j)?.cost.cost(report, theta))
    }

    /// Baseline utility of the receiver: 0 under `a-`, `Δu_r(θ)` under `a+`.
    pub fn receiver_utility(&self, action: Action, theta: f64) -> f64 {
        match action {
            Action::Plus => self.receiver.delta_u(theta),
            Action::Minus => 0.0,
        }
    }

    /// Sender j's total utility `w_j(r, a, θ) = u_j(a, θ) - C_j(r, θ)`.
    pub fn sender_total_utility(
        &self,
        j: usize,
        report: f64,
        action: Action,
        theta: f64,
    ) -> Result<f64, EvalError> {
        self.check_state(theta)?;
        self.check_report(report)?;
        Ok(self.sender_total_utility_unchecked(j, report, action, theta))
    }

    /// Unchecked variant for inner loops over grid points.
    pub fn sender_total_utility_unchecked(
        &self,
        j: usize,
        report: f64,
        action: Action,
        theta: f64,
    ) -> f64 {
        let s = &self.senders[j];
        let base = match action {
            Action::Plus => s.payoff.delta_u(theta),
            Action::Minus => 0.0,
        };
        base - s.cost.cost(report, theta)
    }

    /// Classifies the roster's bias configuration and returns the sets Z / Y.
    pub fn classify_biases(&self, roster: &[usize]) -> Result<BiasClassification, EvalError> {
        if roster.is_empty() {
            return Err(EvalError::Unsupported("empty roster".into()));
        }
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for &j in roster {
            match self.bias(j)? {
                Bias::Positive => positive.push(j),
                Bias::Negative => negative.push(j),
            }
        }
        let class = if negative.is_empty() {
            BiasClass::AllLikeBiasedPositive
        } else if positive.is_empty() {
            BiasClass::AllLikeBiasedNegative
        } else {
            BiasClass::ContainsOpposedPair
        };
        Ok(BiasClassification {
            class,
            positive,
            negative,
        })
    }
}

/// Builders for the canonical fixtures used throughout the test suite and
/// the proposition runner.
pub mod fixtures {
    use super::*;
    use crate::grid::{Grid, ReportGrid, StateGrid};

    pub const DEFAULT_STATE_HALF_EXTENT: f64 = 2.0;
    pub const DEFAULT_REPORT_HALF_EXTENT: f64 = 4.0;
    pub const DEFAULT_STEP: f64 = 0.02;

    fn default_grids() -> (StateGrid, ReportGrid) {
        (
            StateGrid(Grid::symmetric(DEFAULT_STATE_HALF_EXTENT, DEFAULT_STEP).unwrap()),
            ReportGrid(Grid::symmetric(DEFAULT_REPORT_HALF_EXTENT, DEFAULT_STEP).unwrap()),
        )
    }

    fn uniform_prior(n: usize) -> Vec<f64> {
        // Exact renormalization so the sum check at 1e-12 passes.
        let w = 1.0 / n as f64;
        let mut prior = vec![w; n];
        let sum: f64 = prior.iter().sum();
        prior[0] += 1.0 - sum;
        prior
    }

    fn build(senders: Vec<SenderSpec>) -> GameInstance {
        let (sg, rg) = default_grids();
        let prior = uniform_prior(sg.grid().len());
        GameInstance::new(
            sg,
            rg,
            prior,
            PayoffSpec {
                du_alpha: 0.0,
                du_beta: 1.0,
            },
            senders,
        )
        .expect("fixture must validate")
    }

    fn unit_quadratic() -> CostSpec {
        CostSpec {
            scale: 1.0,
            exponent: 2.0,
        }
    }

    fn constant_sender(delta_u: f64) -> SenderSpec {
        SenderSpec {
            payoff: PayoffSpec {
                du_alpha: delta_u,
                du_beta: 0.0,
            },
            cost: unit_quadratic(),
        }
    }

    /// L1: Δu_r(θ) = θ, Δu_1 ≡ 1, Δu_2 ≡ -1, unit quadratic costs,
    /// states [-2, 2] step 0.02, reports [-4, 4] step 0.02.
    pub fn l1() -> GameInstance {
        build(vec![constant_sender(1.0), constant_sender(-1.0)])
    }

    /// Like-biased twin: two senders with Δu ≡ 1 each.
    pub fn like_biased_twin() -> GameInstance {
        build(vec![constant_sender(1.0), constant_sender(1.0)])
    }

    /// Triple: Δu(0) = (1, 1, -1), unit quadratic costs.
    pub fn triple_mixed() -> GameInstance {
        build(vec![
            constant_sender(1.0),
            constant_sender(1.0),
            constant_sender(-1.0),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::l1;
    use super::*;

    #[test]
    fn l1_validates() {
        let g = l1();
        assert_eq!(g.state_grid().len(), 201);
        assert_eq!(g.report_grid().len(), 401);
        assert_eq!(g.n_senders(), 2);
    }

    #[test]
    fn delta_u_examples() {
        let g = l1();
        assert_eq!(g.delta_u(Player::Receiver, 0.5).unwrap(), 0.5);
        assert_eq!(g.delta_u(Player::Sender(0), -0.5).unwrap(), 1.0);
        assert_eq!(g.delta_u(Player::Sender(1), 0.0).unwrap(), -1.0);
        assert_eq!(
            g.delta_u(Player::Receiver, 0.513),
            Err(EvalError::OffGridState(0.513))
        );
    }

    #[test]
    fn total_utility_examples() {
        let g = l1();
        // Truthful report is costless.
        let w = g.sender_total_utility(0, 0.3, Action::Plus, 0.3).unwrap();
        assert_eq!(w, 1.0);
        let w = g.sender_total_utility(0, 0.0, Action::Plus, -0.5).unwrap();
        assert!((w - 0.75).abs() < 1e-12);
        let w = g.sender_total_utility(1, -1.0, Action::Minus, -0.5).unwrap();
        assert!((w + 0.25).abs() < 1e-12);
    }

    #[test]
    fn truthful_report_costless_for_all_states_and_actions() {
        let g = l1();
        for j in 0..g.n_senders() {
            for &theta in g.state_grid().points() {
                for action in [Action::Plus, Action::Minus] {
                    let w = g.sender_total_utility(j, theta, action, theta).unwrap();
                    let base = match action {
                        Action::Plus => g.delta_u(Player::Sender(j), theta).unwrap(),
                        Action::Minus => 0.0,
                    };
                    assert_eq!(w, base);
                }
            }
        }
    }

    #[test]
    fn utility_strictly_decreasing_in_lie_size() {
        let g = l1();
        let theta = 0.5;
        let idx = g.report_grid().index_of(theta).unwrap();
        // Walk away from the truth on both sides.
        let mut prev = g
            .sender_total_utility(0, theta, Action::Plus, theta)
            .unwrap();
        for i in (idx + 1)..g.report_grid().len() {
            let w = g
                .sender_total_utility(0, g.report_grid().point(i), Action::Plus, theta)
                .unwrap();
            assert!(w < prev);
            prev = w;
        }
        let mut prev = g
            .sender_total_utility(0, theta, Action::Minus, theta)
            .unwrap();
        for i in (0..idx).rev() {
            let w = g
                .sender_total_utility(0, g.report_grid().point(i), Action::Minus, theta)
                .unwrap();
            assert!(w < prev);
            prev = w;
        }
    }

    #[test]
    fn delta_u_weakly_increasing_on_grid() {
        let g = l1();
        for player in [Player::Receiver, Player::Sender(0), Player::Sender(1)] {
            let mut prev = f64::NEG_INFINITY;
            for &theta in g.state_grid().points() {
                let d = g.delta_u(player, theta).unwrap();
                assert!(d >= prev);
                prev = d;
            }
        }
    }

    #[test]
    fn classify_bias_examples() {
        let g = l1();
        let c = g.classify_biases(&[0, 1]).unwrap();
        assert_eq!(c.class, BiasClass::ContainsOpposedPair);
        assert_eq!(c.positive, vec![0]);
        assert_eq!(c.negative, vec![1]);

        let twin = fixtures::like_biased_twin();
        let c = twin.classify_biases(&[0, 1]).unwrap();
        assert_eq!(c.class, BiasClass::AllLikeBiasedPositive);

        let triple = fixtures::triple_mixed();
        let c = triple.classify_biases(&[0, 1, 2]).unwrap();
        assert_eq!(c.class, BiasClass::ContainsOpposedPair);
        assert_eq!(c.positive, vec![0, 1]);
        assert_eq!(c.negative, vec![2]);
    }

    #[test]
    fn classification_invariant_under_positive_rescaling() {
        let g = l1();
        let scaled = {
            let mut senders = Vec::new();
            for j in 0..g.n_senders() {
                let s = *g.sender(j).unwrap();
                senders.push(SenderSpec {
                    payoff: PayoffSpec {
                        du_alpha: s.payoff.du_alpha * 7.5,
                        du_beta: s.payoff.du_beta * 7.5,
                    },
                    cost: s.cost,
                });
            }
            GameInstance::new(
                StateGrid(g.state_grid().clone()),
                ReportGrid(g.report_grid().clone()),
                g.prior().to_vec(),
                *g.receiver_payoff(),
                senders,
            )
            .unwrap()
        };
        assert_eq!(
            g.classify_biases(&[0, 1]).unwrap(),
            scaled.classify_biases(&[0, 1]).unwrap()
        );
    }

    #[test]
    fn zero_bias_sender_rejected() {
        let g = l1();
        let bad = SenderSpec {
            payoff: PayoffSpec {
                du_alpha: 0.0,
                du_beta: 1.0,
            },
            cost: CostSpec {
                scale: 1.0,
                exponent: 2.0,
            },
        };
        let errs = GameInstance::new(
            StateGrid(g.state_grid().clone()),
            ReportGrid(g.report_grid().clone()),
            g.prior().to_vec(),
            *g.receiver_payoff(),
            vec![bad],
        )
        .unwrap_err();
        assert!(errs.contains(&ValidationError::ZeroBiasSender(0)));
    }

    #[test]
    fn flipped_receiver_rejected() {
        let g = l1();
        let errs = GameInstance::new(
            StateGrid(g.state_grid().clone()),
            ReportGrid(g.report_grid().clone()),
            g.prior().to_vec(),
            PayoffSpec {
                du_alpha: 0.0,
                du_beta: -1.0,
            },
            vec![*g.sender(0).unwrap()],
        )
        .unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::NonMonotonePayoff(_))));
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::BadReceiverNormalization(_))));
    }

    #[test]
    fn no_conflict_sender_rejected() {
        // Δu_j(θ) = 1 + 0·θ conflicts (prefers a+ in negative states): valid.
        // A sender matching the receiver's sign pattern everywhere does not.
        let g = l1();
        let aligned = SenderSpec {
            payoff: PayoffSpec {
                du_alpha: 0.01,
                du_beta: 1.0,
            },
            cost: CostSpec {
                scale: 1.0,
                exponent: 2.0,
            },
        };
        // Δu(θ) = 0.01 + θ matches the receiver's sign at every grid point.
        let errs = GameInstance::new(
            StateGrid(g.state_grid().clone()),
            ReportGrid(g.report_grid().clone()),
            g.prior().to_vec(),
            *g.receiver_payoff(),
            vec![aligned],
        )
        .unwrap_err();
        assert!(errs.contains(&ValidationError::NoConflictSender(0)));
    }

    #[test]
    fn bad_prior_rejected() {
        let g = l1();
        let mut prior = g.prior().to_vec();
        prior[0] = 0.0;
        let errs = GameInstance::new(
            StateGrid(g.state_grid().clone()),
            ReportGrid(g.report_grid().clone()),
            prior,
            *g.receiver_payoff(),
            vec![*g.sender(0).unwrap()],
        )
        .unwrap_err();
        assert!(errs
            .iter()
            .any(|e| matches!(e, ValidationError::BadPrior(_))));
    }
}
