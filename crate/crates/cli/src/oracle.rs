//! Independent gate-level check of the 4-to-1 distillation round, used by
//! `qdistill werner-verify`: three Werner pairs, bilateral CNOT onto the
//! second pair with a coincidence measurement, Hadamards on the first pair,
//! bilateral CNOT onto the third pair with a second coincidence measurement.

use ndarray::Array2;
use qdistill_core::qops::{
    cnot, dag, embed, fidelity_with_omega, hadamard, kron, partial_trace, trace, werner_data,
    DensityMatrix, SystemLayout, C64,
};

/// Returns (output fidelity, success probability) of one round on three
/// fidelity-f inputs.
pub fn four_to_one_gate_sim(f: f64) -> (f64, f64) {
    let lay = SystemLayout::qubits(&["a1", "b1", "a2", "b2", "a3", "b3"])
        .expect("static layout is valid");
    let w = werner_data(f);
    let rho0 = kron(&kron(&w, &w), &w);
    let gate = |m: ndarray::ArrayView2<C64>, qs: &[&str]| -> Array2<C64> {
        embed(m, &lay, qs).expect("gate embeds").data().clone()
    };
    let u1 = gate(cnot().view(), &["a1", "a2"]).dot(&gate(cnot().view(), &["b1", "b2"]));
    let h1 = gate(hadamard().view(), &["a1"]).dot(&gate(hadamard().view(), &["b1"]));
    let u2 = gate(cnot().view(), &["a1", "a3"]).dot(&gate(cnot().view(), &["b1", "b3"]));
    let proj = |q: &str, z: usize| -> Array2<C64> {
        let mut p = Array2::<C64>::zeros((2, 2));
        p[[z, z]] = C64::new(1.0, 0.0);
        gate(p.view(), &[q])
    };
    let mut sigma = Array2::<C64>::zeros((64, 64));
    for z2 in 0..2 {
        for z3 in 0..2 {
            let k = proj("a3", z3)
                .dot(&proj("b3", z3))
                .dot(&u2)
                .dot(&h1)
                .dot(&proj("a2", z2))
                .dot(&proj("b2", z2))
                .dot(&u1);
            sigma = sigma + k.dot(&rho0).dot(&dag(&k.view()));
        }
    }
    let p_succ = trace(&sigma.view()).re;
    let cond = DensityMatrix::new(lay, sigma.mapv(|z| z / p_succ)).expect("conditioned state");
    let s1 = partial_trace(&cond, &["a1", "b1"]).expect("first pair remains");
    (fidelity_with_omega(&s1).expect("two-qubit state"), p_succ)
}
