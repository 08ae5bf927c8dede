//! Big-M indicator and binary×continuous product reformulations.

use thiserror::Error;

use super::ir::{Cmp, Constraint, LinearExpr, ModelIR, VarId, VarKey, VarKind};

#[derive(Debug, Error, PartialEq)]
pub enum LinearizeError {
    #[error("big-M must be positive and finite, got {0}")]
    NonPositiveBigM(f64),
    #[error("continuous factor needs a finite upper bound, got {0}")]
    UnboundedContinuous(f64),
}

/// Which implication an indicator encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Implication {
    /// φ = 1 ⇒ expr ≥ 0, written expr ≥ −M(1 − φ).
    OnImpliesNonNegative,
    /// φ = 0 ⇒ expr ≤ 0, written expr ≤ M·φ.
    OffImpliesNonPositive,
}

pub fn linearize_indicator(expr: &LinearExpr, indicator: VarId, implication: Implication, big_m: f64) -> Result<Constraint, LinearizeError> {
    if !(big_m > 0.0 && big_m.is_finite()) {
        return Err(LinearizeError::NonPositiveBigM(big_m));
    }
    Ok(match implication {
        // expr − M·φ ≥ −M
        Implication::OnImpliesNonNegative => Constraint::new("ind_on", expr.clone().with(indicator, -big_m), Cmp::Ge, -big_m),
        // expr − M·φ ≤ 0
        Implication::OffImpliesNonPositive => Constraint::new("ind_off", expr.clone().with(indicator, -big_m), Cmp::Le, 0.0),
    })
}

/// Declares `aux` = `bin`·`cont` through the four standard inequalities,
/// for `cont` ∈ [0, `cont_upper`]. `cont` may be any linear expression.
pub fn linearize_binary_product(
    model: &mut ModelIR,
    aux_key: VarKey,
    bin: VarId,
    cont: &LinearExpr,
    cont_upper: f64,
) -> Result<(VarId, Vec<Constraint>), LinearizeError> {
    if !cont_upper.is_finite() || cont_upper < 0.0 {
        return Err(LinearizeError::UnboundedContinuous(cont_upper));
    }
    let aux = model.add_var(aux_key, VarKind::Continuous, 0.0, cont_upper);
    let cons = vec![
        Constraint::new("prod_le_cont", LinearExpr::var(aux).plus(cont, -1.0), Cmp::Le, 0.0),
        Constraint::new("prod_le_bin", LinearExpr::var(aux).with(bin, -cont_upper), Cmp::Le, 0.0),
        // aux ≥ cont − ub(1 − bin)
        Constraint::new("prod_ge", LinearExpr::var(aux).plus(cont, -1.0).with(bin, -cont_upper), Cmp::Ge, -cont_upper),
    ];
    Ok((aux, cons))
}
