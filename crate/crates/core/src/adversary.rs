//! Diagonal adversaries: for any predictor, the sequence whose every next
//! symbol is the opposite of the predictor's own prediction. The construction
//! guarantees a wrong prediction at every single position, and its
//! description costs exactly 2 bits more than the predictor it defeats.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::dsl::{self, GeneratorDesc, PredictorDesc};
use crate::exec::Lab;
use crate::predictors;

/// Outcome of a duel between a predictor and its own diagonal sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DefeatReport {
    /// Readable form of the predictor.
    pub predictor: String,
    /// Serialized form of the predictor.
    pub predictor_code: BitString,
    pub horizon: u64,
    pub fuel: u64,
    /// Every one of the `horizon` predictions was wrong.
    pub all_wrong: bool,
    pub wrong_positions: u64,
    /// `|serialize_gen(DIAG(p))|`; always `pred_code_bits + 2`.
    pub diag_code_bits: u64,
    /// `|serialize_pred(p)|`.
    pub pred_code_bits: u64,
    /// Diagonal steps whose inner prediction hit a budget error and was
    /// defaulted to 0.
    pub defaulted_predictions: u64,
}

/// The diagonal sequence against `p`: `x_{n+1} = 1 - p(x_{1:n})`.
pub fn diag_sequence(lab: &Lab, p: &PredictorDesc, horizon: u64, fuel: u64) -> BitString {
    let g = GeneratorDesc::Diag(Box::new(p.clone()));
    dsl::eval_gen(lab, &g, horizon, fuel).prefix
}

/// Runs the duel and checks total defeat. A false `all_wrong` is a
/// build-breaking defect rather than data: the construction guarantees it.
pub fn verify_defeat(lab: &Lab, p: &PredictorDesc, horizon: u64, fuel: u64) -> DefeatReport {
    let g = GeneratorDesc::Diag(Box::new(p.clone()));
    let verdict = predictors::errors(lab, p, &g, horizon, fuel);
    let eval = dsl::eval_gen(lab, &g, horizon + 1, fuel);
    let pred_code = dsl::serialize_pred(p);
    let diag_code = dsl::serialize_gen(&g);
    DefeatReport {
        predictor: p.to_string(),
        predictor_code: pred_code.clone(),
        horizon,
        fuel,
        all_wrong: verdict.error_positions.len() as u64 == horizon,
        wrong_positions: verdict.error_positions.len() as u64,
        diag_code_bits: diag_code.len() as u64,
        pred_code_bits: pred_code.len() as u64,
        defaulted_predictions: eval.defaulted_predictions,
    }
}
