//! Log-likelihood terms of the adversarial objectives, always evaluated from
//! raw discriminator logits through softplus:
//! `log D = −softplus(−l)` and `log(1 − D) = −softplus(l)`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{AutodiffError, NodeId, Tape};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLoss {
    /// `−log D(G(·))`
    #[default]
    NonSaturating,
    /// `log(1 − D(G(·)))`
    Minimax,
}

/// Which generated sample the single-input discriminator sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NovelTerm {
    /// `G(z′, z)` with `z` drawn from the prior.
    #[default]
    Prior,
    /// `G(z′, E(x))`, the reconstruction of the real batch.
    Encoded,
}

/// Mean of `log D` over a logit tensor.
pub fn mean_log_d(tape: &mut Tape, logits: NodeId) -> Result<NodeId, AutodiffError> {
    let neg = tape.scale(logits, -1.0)?;
    let sp = tape.softplus(neg)?;
    let m = tape.mean_all(sp)?;
    tape.scale(m, -1.0)
}

/// Mean of `log(1 − D)` over a logit tensor.
pub fn mean_log_one_minus_d(tape: &mut Tape, logits: NodeId) -> Result<NodeId, AutodiffError> {
    let sp = tape.softplus(logits)?;
    let m = tape.mean_all(sp)?;
    tape.scale(m, -1.0)
}

/// Logit nodes feeding the four expectation terms.
#[derive(Clone, Copy, Debug)]
pub struct TermLogits {
    /// `D(x, T(x))`
    pub real_pair: NodeId,
    /// `D(x, G(z′, E(x)))`
    pub fake_pair: NodeId,
    /// `D′(x)`
    pub real: NodeId,
    /// `D′(G(z′, z))`
    pub novel: NodeId,
}

/// Tape nodes of every loss built from [`TermLogits`].
#[derive(Clone, Copy, Debug)]
pub struct ObjectiveNodes {
    pub terms: [NodeId; 4],
    pub loss_d: NodeId,
    pub loss_dprime: NodeId,
    pub loss_ge: NodeId,
}

/// Builds the four terms, the two discriminator losses (negated terms),
/// and the joint generator/encoder loss.
pub fn build_objective(tape: &mut Tape, logits: TermLogits, mode: GeneratorLoss) -> Result<ObjectiveNodes, AutodiffError> {
    let t1 = mean_log_d(tape, logits.real_pair)?;
    let t2 = mean_log_d(tape, logits.real)?;
    let t3 = mean_log_one_minus_d(tape, logits.fake_pair)?;
    let t4 = mean_log_one_minus_d(tape, logits.novel)?;

    let d_sum = tape.add(t1, t3)?;
    let loss_d = tape.scale(d_sum, -1.0)?;
    let dp_sum = tape.add(t2, t4)?;
    let loss_dprime = tape.scale(dp_sum, -1.0)?;

    let loss_ge = match mode {
        GeneratorLoss::Minimax => tape.add(t3, t4)?,
        GeneratorLoss::NonSaturating => {
            let a = mean_log_d(tape, logits.fake_pair)?;
            let b = mean_log_d(tape, logits.novel)?;
            let s = tape.add(a, b)?;
            tape.scale(s, -1.0)?
        }
    };
    Ok(ObjectiveNodes {
        terms: [t1, t2, t3, t4],
        loss_d,
        loss_dprime,
        loss_ge,
    })
}

/// Classical two-player objective from real and generated logits:
/// returns `(log D(x) term, log(1 − D(G(z))) term, loss_d, loss_g)`.
pub fn build_vanilla_objective(
    tape: &mut Tape,
    real: NodeId,
    fake: NodeId,
    mode: GeneratorLoss,
) -> Result<[NodeId; 4], AutodiffError> {
    let t1 = mean_log_d(tape, real)?;
    let t2 = mean_log_one_minus_d(tape, fake)?;
    let s = tape.add(t1, t2)?;
    let loss_d = tape.scale(s, -1.0)?;
    let loss_g = match mode {
        GeneratorLoss::Minimax => t2,
        GeneratorLoss::NonSaturating => {
            let a = mean_log_d(tape, fake)?;
            tape.scale(a, -1.0)?
        }
    };
    Ok([t1, t2, loss_d, loss_g])
}
