//! Continuous entanglement swapping across three nodes: the Werner output
//! polynomial, the steady-state fidelity in quadrature and closed form, and
//! the 6-qubit master-equation model they are checked against.
//!
//! Qubit layout, in order: a, b1, b2, c, ta, tc. Pair (a, b1) links nodes A
//! and B, pair (b2, c) links B and C, and (ta, tc) is the A-C target.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::liouville::{kraus_completeness_defect, LindbladTerm, MasterEquation};
use crate::qops::{
    self, bell_state, embed, outer, pauli, C64, SystemLayout,
};
use crate::quad;
use crate::tol;
use crate::werner;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SwapParams {
    /// Entangler fixed-point fidelity of each source pair.
    pub f: f64,
    /// Entangling rate per source pair.
    pub gamma_sw: f64,
    /// Depolarizing rate per source pair.
    pub eps: f64,
    /// Swap rate.
    pub delta_sw: f64,
}

impl SwapParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.25..=1.0).contains(&self.f) {
            return Err(QdError::InvalidParameter(format!(
                "fidelity {} outside [1/4, 1]",
                self.f
            )));
        }
        for (name, v) in [
            ("gamma_sw", self.gamma_sw),
            ("eps", self.eps),
            ("delta_sw", self.delta_sw),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(QdError::InvalidParameter(format!(
                    "{name} = {v} is not a valid rate"
                )));
            }
        }
        Ok(())
    }

    /// Fixed-point fidelity of one source pair under entangler plus noise.
    pub fn source_fidelity(&self) -> f64 {
        if self.gamma_sw + self.eps == 0.0 {
            return 0.25;
        }
        werner::source_steady_fidelity(self.f, self.gamma_sw, self.eps)
    }

    /// Decay-per-swap exponent (gamma_sw + eps) / delta_sw.
    pub fn exponent(&self) -> f64 {
        (self.gamma_sw + self.eps) / self.delta_sw
    }
}

fn f_poly(f: f64) -> f64 {
    (1.0 - 2.0 * f + 4.0 * f * f) / 3.0
}

/// Output fidelity of one swap on two equal-fidelity Werner pairs:
/// F(f) = (1 - 2f + 4f^2)/3.
pub fn swap_output_fidelity(f: f64) -> Result<f64> {
    if !(0.25..=1.0).contains(&f) {
        return Err(QdError::InvalidParameter(format!(
            "fidelity {f} outside [1/4, 1]"
        )));
    }
    Ok(f_poly(f))
}

/// Closed form of the steady-state target fidelity,
/// 1/4 + (4 f_s - 1)^2 / 12 * 2a^2 / ((a+1)(2a+1)).
pub fn continuous_swap_closed_form(params: &SwapParams) -> Result<f64> {
    params.validate()?;
    let f_s = params.source_fidelity();
    if params.delta_sw == 0.0 {
        return Ok(f_poly(f_s));
    }
    let a = params.exponent();
    let q = 4.0 * f_s - 1.0;
    Ok(0.25 + q * q / 12.0 * 2.0 * a * a / ((a + 1.0) * (2.0 * a + 1.0)))
}

/// Steady-state target fidelity by adaptive quadrature of
/// int_0^1 F(f_s + (1/4 - f_s) x^a) dx, cross-checked against the closed
/// form; disagreement beyond 1e-9 means a transcription error.
pub fn continuous_swap_fidelity(params: &SwapParams) -> Result<f64> {
    params.validate()?;
    let f_s = params.source_fidelity();
    if params.gamma_sw + params.eps == 0.0 {
        // sources are never pumped and stay maximally mixed
        return Ok(0.25);
    }
    if params.delta_sw == 0.0 {
        // sources fully converge between swaps
        return Ok(f_poly(f_s));
    }
    let a = params.exponent();
    let value = quad::integrate_unit_power(
        |x| f_poly(werner::source_block_steady_fidelity_integrand(f_s, a, x)),
        a,
        1e-12,
    )?;
    let closed = continuous_swap_closed_form(params)?;
    if (value - closed).abs() > tol::SWAP_FORM_AGREEMENT {
        return Err(QdError::ConvergenceFailure(format!(
            "swap fidelity forms disagree: quadrature {value}, closed form {closed}"
        )));
    }
    Ok(value)
}

/// The six-qubit layout of the three-node model.
pub fn layout() -> SystemLayout {
    SystemLayout::qubits(&["a", "b1", "b2", "c", "ta", "tc"]).expect("static layout is valid")
}

fn swap_gate() -> Array2<C64> {
    let one = C64::new(1.0, 0.0);
    let mut s = Array2::<C64>::zeros((4, 4));
    s[[0, 0]] = one;
    s[[1, 2]] = one;
    s[[2, 1]] = one;
    s[[3, 3]] = one;
    s
}

/// Kraus set of the swap map T_sw: Bell measurement on (b1, b2), Pauli
/// correction on c, move (a, c) into the target pair, and reset all four
/// source qubits to the maximally mixed state via reset operators
/// |m><n| / 4 on the 16-dimensional source space.
pub fn swap_locc_kraus(layout: &SystemLayout) -> Result<Vec<Array2<C64>>> {
    let n = layout.total_dim();
    // measured-and-corrected branch per Bell outcome, then moved to target
    let move_a = embed(swap_gate().view(), layout, &["a", "ta"])?;
    let move_c = embed(swap_gate().view(), layout, &["c", "tc"])?;
    let mover = move_a.data().dot(move_c.data());
    let mut branches = Vec::with_capacity(4);
    for k in 0..4 {
        let beta = bell_state(k);
        let proj = embed(outer(beta.view(), beta.view()).view(), layout, &["b1", "b2"])?;
        let correct = embed(pauli(k).view(), layout, &["c"])?;
        branches.push(mover.dot(correct.data()).dot(proj.data()));
    }
    let mut kraus = Vec::with_capacity(1024);
    for m in 0..16 {
        for nn in 0..16 {
            let mut reset = Array2::<C64>::zeros((16, 16));
            reset[[m, nn]] = C64::new(0.25, 0.0);
            let reset =
                embed(reset.view(), layout, &["a", "b1", "b2", "c"])?;
            for w in &branches {
                kraus.push(reset.data().dot(w));
            }
        }
    }
    debug_assert_eq!(kraus.len(), 1024);
    let defect = kraus_completeness_defect(&kraus);
    if defect > tol::KRAUS_STRICT {
        return Err(QdError::KrausIncomplete(defect));
    }
    let _ = n;
    Ok(kraus)
}

/// Full three-node master equation: one entangler per source pair, local
/// depolarizing noise on the four source qubits, swap channel at delta_sw.
pub fn build_continuous_swap(params: &SwapParams) -> Result<MasterEquation> {
    params.validate()?;
    let lay = layout();
    let mut terms = Vec::new();
    if params.gamma_sw > 0.0 {
        terms.extend(werner::entangler_terms(
            &lay,
            ("a", "b1"),
            params.gamma_sw,
            params.f,
        )?);
        terms.extend(werner::entangler_terms(
            &lay,
            ("b2", "c"),
            params.gamma_sw,
            params.f,
        )?);
    }
    if params.eps > 0.0 {
        terms.extend(werner::noise_terms(
            &lay,
            &["a", "b1", "b2", "c"],
            params.eps,
        )?);
    }
    if params.delta_sw > 0.0 {
        let kraus = swap_locc_kraus(&lay)?;
        terms.push(LindbladTerm::channel(params.delta_sw, kraus)?);
    }
    MasterEquation::new(lay, terms)
}

/// Steady-state target fidelity of the full 6-qubit model.
pub fn simulate_continuous_swap(params: &SwapParams, seed: u64) -> Result<f64> {
    let me = build_continuous_swap(params)?;
    let ss = me.steady_state(seed)?;
    let target = qops::partial_trace(&ss, &["ta", "tc"])?;
    qops::fidelity_with_omega(&target)
}
