//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Everything that can go wrong while working with a map or a family.
///
/// Variants mirror the failure modes of the individual operations; the
/// solver annotates child errors with its induction stage.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    /// Both homogeneous forms evaluated below the magnitude floor.
    DegenerateImage,
    /// Coefficients fail the resultant floor: the map drops degree.
    DegenerateMap { resultant: f64, floor: f64 },
    /// Simultaneous root iteration did not reach the residual tolerance.
    RootFindingFailure { residual: f64 },
    /// Nearest-neighbour label matching was not clearly decidable.
    AmbiguousMatching { detail: String },
    /// No simple-critical-point parameter found within the search budget.
    SplitFailure,
    /// Newton refinement failed after a cycle window match.
    NewtonDivergence { residual: f64 },
    /// No truncation level separates the postcritical set from the critical set.
    NotHyperbolicSet,
    /// A continued cycle lost repelling-ness or Newton left the injectivity radius.
    MotionBreakdown { detail: String },
    /// Orbit passed too close to a pole with chart retries exhausted.
    ChartOverflow,
    /// Orbit left the skeleton neighbourhood before reaching the target scale.
    LeftNeighborhoodEarly { reached: usize },
    /// Orbit hypothesis of a distortion statement failed.
    LeftNeighborhood { step: usize },
    /// Disk image did not cover the critical neighbourhood within the budget.
    NoCoverWithinBudget { tried: usize },
    /// Seeding grid has no residual below the basin threshold.
    SeedNotFound { best_residual: f64 },
    /// Gauss-Newton residual plateaued above tolerance.
    NewtonStall { residual: f64 },
    /// Closing solution rejected: derivative dominance inequality fails.
    DominanceFailure { margin: f64 },
    /// Closing solution rejected: orbit shadowing condition fails.
    ShadowingViolation { step: usize, distance: f64 },
    /// No remaining critical label has finite-order contact.
    InfiniteOrderEverywhere,
    /// No sampled direction has a usable leading coefficient.
    NoGoodDirection { best_score: f64 },
    /// Proposition window `delta'' <= |xi_n - mu_n| <= delta'` violated.
    WindowViolation { value: f64, lo: f64, hi: f64 },
    /// A sampled hypothesis of a distortion statement failed.
    HypothesisViolation { clause: String },
    /// A stated precondition does not hold.
    Precondition { detail: String },
    /// Child error annotated with the closing-induction stage.
    AtStage {
        stage: usize,
        source: alloc::boxed::Box<DynamicsError>,
    },
}

impl DynamicsError {
    pub fn at_stage(self, stage: usize) -> Self {
        DynamicsError::AtStage {
            stage,
            source: alloc::boxed::Box::new(self),
        }
    }
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use DynamicsError::*;
        match self {
            DegenerateImage => write!(f, "homogeneous image degenerate (both forms below floor)"),
            DegenerateMap { resultant, floor } => write!(
                f,
                "resultant {resultant:.3e} below floor {floor:.3e}: map degenerates"
            ),
            RootFindingFailure { residual } => {
                write!(f, "root iteration stalled at residual {residual:.3e}")
            }
            AmbiguousMatching { detail } => write!(f, "ambiguous label matching: {detail}"),
            SplitFailure => write!(f, "no simple-critical-point parameter within budget"),
            NewtonDivergence { residual } => {
                write!(f, "cycle refinement diverged (residual {residual:.3e})")
            }
            NotHyperbolicSet => write!(
                f,
                "no truncation separates the postcritical set from the critical set"
            ),
            MotionBreakdown { detail } => write!(f, "holomorphic motion breakdown: {detail}"),
            ChartOverflow => write!(f, "orbit too close to a pole for the requested chart"),
            LeftNeighborhoodEarly { reached } => write!(
                f,
                "orbit left the skeleton neighbourhood at step {reached} before reaching scale"
            ),
            LeftNeighborhood { step } => {
                write!(f, "orbit left the skeleton neighbourhood at step {step}")
            }
            NoCoverWithinBudget { tried } => {
                write!(f, "no covering time within budget ({tried} iterates tried)")
            }
            SeedNotFound { best_residual } => write!(
                f,
                "seeding grid found no basin (best residual {best_residual:.3e})"
            ),
            NewtonStall { residual } => {
                write!(f, "Gauss-Newton stalled at residual {residual:.3e}")
            }
            DominanceFailure { margin } => write!(
                f,
                "derivative dominance failed (margin {margin:.3e}, need > 100)"
            ),
            ShadowingViolation { step, distance } => write!(
                f,
                "shadowing violated at step {step} (distance {distance:.3e})"
            ),
            InfiniteOrderEverywhere => {
                write!(f, "no remaining critical label has finite-order contact")
            }
            NoGoodDirection { best_score } => {
                write!(f, "no good cone direction (best score {best_score:.3e})")
            }
            WindowViolation { value, lo, hi } => write!(
                f,
                "window violated: {value:.3e} outside [{lo:.3e}, {hi:.3e}]"
            ),
            HypothesisViolation { clause } => write!(f, "hypothesis violated: {clause}"),
            Precondition { detail } => write!(f, "precondition violated: {detail}"),
            AtStage { stage, source } => write!(f, "closing stage {stage}: {source}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DynamicsError {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, DynamicsError>;
