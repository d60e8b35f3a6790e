//! Werner-family algebra for the communication-assisted scheme: entangler
//! jump sets, the closed-form propagator, continuously distilled fidelities,
//! the 4-to-1 protocol, and target boosting.
//!
//! Everything here is exact scalar algebra on the Werner line; the liouville
//! module provides the brute-force cross-checks at small copy numbers.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::liouville::LindbladTerm;
use crate::qops::{
    bell_state, embed, identity, kron, outer, partial_trace_raw, pauli, werner_data, C64,
    DensityMatrix, SystemLayout,
};
use crate::quad;
use crate::tol;

/// Rates and block sizes of one distillation stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WernerParams {
    /// Entangler fixed-point fidelity.
    pub f: f64,
    /// Entangling rate.
    pub gamma: f64,
    /// Local depolarizing rate (per pair).
    pub eps: f64,
    /// Distillation consumption rate.
    pub delta_d: f64,
    /// Source copies per distillation block.
    pub n: usize,
    /// Boost multiplicity.
    pub m: usize,
}

impl WernerParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.25..=1.0).contains(&self.f) {
            return Err(QdError::InvalidParameter(format!(
                "fixed-point fidelity {} outside [1/4, 1]",
                self.f
            )));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("eps", self.eps),
            ("delta_d", self.delta_d),
        ] {
            if !(v >= 0.0) {
                return Err(QdError::InvalidParameter(format!("{name} = {v} is negative")));
            }
        }
        if self.n < 1 || self.m < 1 {
            return Err(QdError::InvalidParameter(
                "block size n and multiplicity m must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Reduced source fidelity f_s = (gamma f + eps/4) / (gamma + eps).
    pub fn f_s(&self) -> f64 {
        source_steady_fidelity(self.f, self.gamma, self.eps)
    }

    pub fn gamma_prime(&self) -> f64 {
        self.gamma + self.eps
    }

    pub fn gamma_dprime(&self) -> f64 {
        self.gamma + 0.5 * self.eps
    }
}

/// The raw 4x4 jump sets: Q_i = |psi_0><psi_i| over the Bell basis, and the
/// 16 correlated Paulis sigma_i (x) sigma_j / 4. Their dissipator sums give
/// the replacement maps tr(rho) Omega - rho and tr(rho) 1/4 - rho.
pub fn entangler_jumps() -> (Vec<Array2<C64>>, Vec<Array2<C64>>) {
    let psi0 = bell_state(0);
    let q = (0..4)
        .map(|i| outer(psi0.view(), bell_state(i).view()))
        .collect();
    let w = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| kron(&pauli(i), &pauli(j)).mapv(|z| z * 0.25))
        .collect();
    (q, w)
}

/// Lindblad terms of gamma E_f on one pair: the Q_i at rate
/// gamma (4f-1)/3 and the W_ij at rate 4 gamma (1-f)/3.
///
/// Both rates are nonnegative exactly for f in [1/4, 1], which is why the
/// fixed point is restricted to that interval.
pub fn entangler_terms(
    layout: &SystemLayout,
    pair: (&str, &str),
    gamma: f64,
    f: f64,
) -> Result<Vec<LindbladTerm>> {
    if !(0.25..=1.0).contains(&f) {
        return Err(QdError::InvalidParameter(format!(
            "entangler fixed point {f} outside [1/4, 1]"
        )));
    }
    if gamma < 0.0 {
        return Err(QdError::InvalidParameter(format!(
            "entangling rate {gamma} is negative"
        )));
    }
    let (q_ops, w_ops) = entangler_jumps();
    let q_rate = gamma * (4.0 * f - 1.0) / 3.0;
    let w_rate = 4.0 * gamma * (1.0 - f) / 3.0;
    let mut terms = Vec::with_capacity(20);
    for op in q_ops {
        let emb = embed(op.view(), layout, &[pair.0, pair.1])?;
        terms.push(LindbladTerm::jump(q_rate, &emb)?);
    }
    for op in w_ops {
        let emb = embed(op.view(), layout, &[pair.0, pair.1])?;
        terms.push(LindbladTerm::jump(w_rate, &emb)?);
    }
    Ok(terms)
}

/// Depolarizing noise: each listed qubit carries the four jumps sigma_i/2 at
/// rate eps/2, so a pair of qubits realizes eps (N(rho)) with
/// N(rho) = (replace A + replace B)/2 - rho.
pub fn noise_terms(layout: &SystemLayout, qubits: &[&str], eps: f64) -> Result<Vec<LindbladTerm>> {
    if eps < 0.0 {
        return Err(QdError::InvalidParameter(format!(
            "noise rate {eps} is negative"
        )));
    }
    let mut terms = Vec::with_capacity(4 * qubits.len());
    for &q in qubits {
        for i in 0..4 {
            let local = pauli(i).mapv(|z| z * 0.5);
            let emb = embed(local.view(), layout, &[q])?;
            terms.push(LindbladTerm::jump(0.5 * eps, &emb)?);
        }
    }
    Ok(terms)
}

/// f_s = (gamma f + eps/4) / (gamma + eps).
pub fn source_steady_fidelity(f: f64, gamma: f64, eps: f64) -> f64 {
    if gamma + eps == 0.0 {
        return f;
    }
    (gamma * f + 0.25 * eps) / (gamma + eps)
}

/// rho_s = (gamma rho_W(f) + eps 1/4) / (gamma + eps) on a fresh pair.
pub fn source_steady_state(f: f64, gamma: f64, eps: f64) -> Result<DensityMatrix> {
    let layout = SystemLayout::qubits(&["a", "b"])?;
    let fs = source_steady_fidelity(f, gamma, eps);
    DensityMatrix::new(layout, werner_data(fs))
}

/// Closed-form solution rho(t) = sum_i g_i(t) rho_i of the source master
/// equation gamma E_f + eps N for an arbitrary two-qubit initial state.
///
/// Basis states: rho_0 the initial state, rho_1 the single-sided mixture
/// (rho_A (x) 1 + 1 (x) rho_B)/2, rho_2 = rho_W(f), rho_3 = 1/4. The
/// coefficients solve
///   g0' = -g' g0
///   g1' = eps g0 - g'' g1
///   g2' = gamma (g0 + g1 + g3) - eps g2
///   g3' = eps/2 g1 + eps g2 - gamma g3
/// with g' = gamma + eps, g'' = gamma + eps/2, which conserves the sum.
#[derive(Debug, Clone)]
pub struct ExactSolution {
    layout: SystemLayout,
    basis: [Array2<C64>; 4],
    gamma: f64,
    eps: f64,
}

impl ExactSolution {
    pub fn new(rho0: &DensityMatrix, f: f64, gamma: f64, eps: f64) -> Result<Self> {
        if !(0.25..=1.0).contains(&f) {
            return Err(QdError::InvalidParameter(format!(
                "fixed-point fidelity {f} outside [1/4, 1]"
            )));
        }
        if gamma < 0.0 || eps < 0.0 {
            return Err(QdError::InvalidParameter("rates must be nonnegative".into()));
        }
        let layout = rho0.layout().clone();
        let two_qubits = layout.len() == 2 && layout.factors().iter().all(|(_, d)| *d == 2);
        if !two_qubits {
            return Err(QdError::DimensionMismatch(
                "exact solution requires a two-qubit state".into(),
            ));
        }
        let la = layout.factors()[0].0.clone();
        let lb = layout.factors()[1].0.clone();
        let rho_a = partial_trace_raw(&rho0.data().view(), &layout, &[la.as_str()])?;
        let rho_b = partial_trace_raw(&rho0.data().view(), &layout, &[lb.as_str()])?;
        let half = identity(2).mapv(|z| z * 0.5);
        let rho1 = (kron(&rho_a, &half) + kron(&half, &rho_b)).mapv(|z| z * 0.5);
        Ok(Self {
            layout,
            basis: [
                rho0.data().clone(),
                rho1,
                werner_data(f),
                identity(4).mapv(|z| z * 0.25),
            ],
            gamma,
            eps,
        })
    }

    /// (g0, g1, g2, g3) at time t; they sum to 1.
    pub fn coefficients(&self, t: f64) -> [f64; 4] {
        let gp = self.gamma + self.eps;
        let gpp = self.gamma + 0.5 * self.eps;
        let e_p = (-gp * t).exp();
        let e_pp = (-gpp * t).exp();
        let g0 = e_p;
        let g1 = 2.0 * (e_pp - e_p);
        let g2 = if gp > 0.0 {
            self.gamma / gp * (1.0 - e_p)
        } else {
            0.0
        };
        let g3 = 1.0 - g0 - g1 - g2;
        [g0, g1, g2, g3]
    }

    pub fn basis(&self) -> &[Array2<C64>; 4] {
        &self.basis
    }

    pub fn state_at(&self, t: f64) -> Result<DensityMatrix> {
        if t < 0.0 {
            return Err(QdError::InvalidParameter(format!("time {t} is negative")));
        }
        let g = self.coefficients(t);
        let mut data = Array2::<C64>::zeros((4, 4));
        for (gi, rho_i) in g.iter().zip(self.basis.iter()) {
            data.scaled_add(C64::new(*gi, 0.0), rho_i);
        }
        DensityMatrix::new(self.layout.clone(), data)
    }
}

/// Evaluate the closed-form propagator at a single time.
pub fn exact_evolve(
    rho0: &DensityMatrix,
    f: f64,
    gamma: f64,
    eps: f64,
    t: f64,
) -> Result<DensityMatrix> {
    ExactSolution::new(rho0, f, gamma, eps)?.state_at(t)
}

/// Fidelity of a source copy that was reset a relative age x ago:
/// f_s + (1/4 - f_s) x^a with x = exp(-delta_D tau) and a = (gamma+eps)/delta_D.
pub fn source_block_steady_fidelity_integrand(f_s: f64, a: f64, x: f64) -> f64 {
    f_s + (0.25 - f_s) * x.powf(a)
}

/// Steady fidelity of the distillation target: the protocol fidelity map
/// averaged over the stationary age distribution of its source block,
///   f = int_0^1 f_D(f_s + (1/4 - f_s) x^a) dx,   a = (gamma+eps)/delta_D.
///
/// All n copies of a block are reset together, so a single common age x
/// suffices; n is recorded for validation only, the map f_D already encodes
/// the block size.
pub fn distilled_steady_fidelity<F: Fn(f64) -> f64>(
    f_d: F,
    n: usize,
    f_s: f64,
    gamma: f64,
    eps: f64,
    delta_d: f64,
) -> Result<f64> {
    if n < 1 {
        return Err(QdError::InvalidParameter("block size n must be >= 1".into()));
    }
    if !(0.25..=1.0).contains(&f_s) {
        return Err(QdError::InvalidParameter(format!(
            "source fidelity {f_s} outside [1/4, 1]"
        )));
    }
    if gamma < 0.0 || eps < 0.0 || delta_d < 0.0 {
        return Err(QdError::InvalidParameter("rates must be nonnegative".into()));
    }
    if delta_d == 0.0 {
        // consumption never happens: every copy is fully converged
        return Ok(f_d(f_s));
    }
    let a = (gamma + eps) / delta_d;
    if a == 0.0 {
        // sources are consumed instantly after reset
        return Ok(f_d(0.25));
    }
    quad::integrate_unit_power(
        move |x| f_d(source_block_steady_fidelity_integrand(f_s, a, x)),
        a,
        tol::QUAD_ABS,
    )
}

/// Success branch of the 4-to-1 protocol: two bilateral-CNOT syndrome
/// rounds on Werner inputs. Returns (f_out, P_succ).
pub fn four_to_one(f_in: f64) -> Result<(f64, f64)> {
    if !(0.25..=1.0).contains(&f_in) {
        return Err(QdError::InvalidParameter(format!(
            "input fidelity {f_in} outside [1/4, 1]"
        )));
    }
    let g = (4.0 * f_in - 1.0) / 3.0;
    let p_succ = (1.0 + g * g + 2.0 * g * g * g) / 4.0;
    let f_out = (1.0 + g) * (1.0 + 7.0 * g * g) / (16.0 * p_succ);
    Ok((f_out, p_succ))
}

/// Iterate the 4-to-1 success fidelity; levels = 2 gives the nested map
/// f_D(f) = f_out(f_out(f)).
pub fn nested_distill(f_in: f64, levels: u32) -> Result<f64> {
    let mut f = f_in;
    if levels == 0 && !(0.25..=1.0).contains(&f_in) {
        return Err(QdError::InvalidParameter(format!(
            "input fidelity {f_in} outside [1/4, 1]"
        )));
    }
    for _ in 0..levels {
        f = four_to_one(f)?.0;
    }
    Ok(f)
}

/// A protocol that succeeds with probability P consumes blocks at delta_D
/// but delivers at delta_D P.
pub fn effective_rate(p_succ: f64, delta_d: f64) -> f64 {
    p_succ * delta_d
}

/// Fixed point of a target refreshed by m parallel blocks at rate delta each
/// against local noise eps: (m delta f* + eps/4) / (m delta + eps).
pub fn boost_steady_state(f_star: f64, m: usize, delta: f64, eps: f64) -> Result<f64> {
    if !(0.25..=1.0).contains(&f_star) {
        return Err(QdError::InvalidParameter(format!(
            "target fidelity {f_star} outside [1/4, 1]"
        )));
    }
    if m < 1 {
        return Err(QdError::InvalidParameter("multiplicity m must be >= 1".into()));
    }
    if delta < 0.0 || eps < 0.0 {
        return Err(QdError::InvalidParameter("rates must be nonnegative".into()));
    }
    let md = m as f64 * delta;
    if md + eps == 0.0 {
        return Err(QdError::InvalidParameter(
            "boost fixed point undefined at zero total rate".into(),
        ));
    }
    Ok((md * f_star + 0.25 * eps) / (md + eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::{MasterEquation, StepControl};
    use crate::qops::{
        dag, max_abs, max_abs_diff, omega_overlap, omega_projector, trace, trace_distance,
    };
    use crate::random;

    fn replacement_sum(ops: &[Array2<C64>], m: &Array2<C64>) -> Array2<C64> {
        let mut gain = Array2::<C64>::zeros((4, 4));
        let mut norm = Array2::<C64>::zeros((4, 4));
        for k in ops {
            gain += &k.dot(m).dot(&dag(&k.view()));
            norm += &dag(&k.view()).dot(k);
        }
        gain - (norm.dot(m) + m.dot(&norm)).mapv(|z| z * 0.5)
    }

    #[test]
    fn jump_sets_realize_the_replacement_maps() {
        let (q_ops, w_ops) = entangler_jumps();
        assert_eq!(q_ops.len(), 4);
        assert_eq!(w_ops.len(), 16);
        let mut rng = random::rng(2);
        for _ in 0..5 {
            let m = random::random_complex_matrix(4, &mut rng);
            let tr = trace(&m.view());
            let q_expect = omega_projector().mapv(|z| z * tr) - &m;
            let got = replacement_sum(&q_ops, &m);
            assert!(max_abs_diff(&got.view(), &q_expect.view()) < 1e-12);

            let w_expect = identity(4).mapv(|z| z * tr * 0.25) - &m;
            let got = replacement_sum(&w_ops, &m);
            assert!(max_abs_diff(&got.view(), &w_expect.view()) < 1e-12);
        }
    }

    #[test]
    fn q_kills_omega_and_w_kills_the_mixed_state() {
        let (q_ops, w_ops) = entangler_jumps();
        let omega = omega_projector();
        assert!(max_abs(&replacement_sum(&q_ops, &omega).view()) < 1e-14);
        let mixed = identity(4).mapv(|z| z * 0.25);
        assert!(max_abs(&replacement_sum(&w_ops, &mixed).view()) < 1e-14);
    }

    #[test]
    fn entangler_terms_drive_toward_the_werner_fixed_point() {
        // gamma E_f(rho) = gamma (tr(rho) rho_W(f) - rho) as a matrix identity
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let mut rng = random::rng(8);
        for &(gamma, f) in &[(1.0, 0.9), (2.5, 0.25), (0.7, 1.0), (1.3, 0.6)] {
            let me = MasterEquation::new(
                layout.clone(),
                entangler_terms(&layout, ("a", "b"), gamma, f).unwrap(),
            )
            .unwrap();
            for _ in 0..4 {
                let rho = random::random_density(&layout, &mut rng);
                let got = me.rhs(&rho.data().view());
                let expect = (werner_data(f) - rho.data()).mapv(|z| z * gamma);
                assert!(
                    max_abs_diff(&got.view(), &expect.view()) < 1e-12,
                    "gamma = {gamma}, f = {f}"
                );
            }
        }
        assert!(entangler_terms(&layout, ("a", "b"), 1.0, 0.2).is_err());
    }

    #[test]
    fn noise_terms_average_single_sided_replacements() {
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let eps = 0.8;
        let me = MasterEquation::new(
            layout.clone(),
            noise_terms(&layout, &["a", "b"], eps).unwrap(),
        )
        .unwrap();
        let mut rng = random::rng(14);
        let rho = random::random_density(&layout, &mut rng);
        let half = identity(2).mapv(|z| z * 0.5);
        let ra = partial_trace_raw(&rho.data().view(), &layout, &["a"]).unwrap();
        let rb = partial_trace_raw(&rho.data().view(), &layout, &["b"]).unwrap();
        let avg = (kron(&ra, &half) + kron(&half, &rb)).mapv(|z| z * 0.5);
        let expect = (avg - rho.data()).mapv(|z| z * eps);
        let got = me.rhs(&rho.data().view());
        assert!(max_abs_diff(&got.view(), &expect.view()) < 1e-12);
    }

    #[test]
    fn source_steady_state_balances_entangling_and_noise() {
        let (f, gamma, eps) = (0.92, 1.7, 0.25);
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let mut terms = entangler_terms(&layout, ("a", "b"), gamma, f).unwrap();
        terms.extend(noise_terms(&layout, &["a", "b"], eps).unwrap());
        let me = MasterEquation::new(layout, terms).unwrap();
        let ss = me.steady_state(5).unwrap();
        let expect = source_steady_state(f, gamma, eps).unwrap();
        assert!(max_abs_diff(&ss.data().view(), &expect.data().view()) < 1e-9);
        let fs = source_steady_fidelity(f, gamma, eps);
        assert!((omega_overlap(&ss.data().view()) - fs).abs() < 1e-9);
    }

    #[test]
    fn exact_solution_starts_at_rho0_and_ends_at_the_steady_state() {
        let mut rng = random::rng(21);
        let rho0 = random::random_product_pair(&mut rng);
        let (f, gamma, eps) = (0.88, 1.1, 0.3);
        let sol = ExactSolution::new(&rho0, f, gamma, eps).unwrap();
        let at0 = sol.state_at(0.0).unwrap();
        assert!(max_abs_diff(&at0.data().view(), &rho0.data().view()) < 1e-14);
        let g = sol.coefficients(0.0);
        assert!((g[0] - 1.0).abs() < 1e-14);
        for k in 1..4 {
            assert!(g[k].abs() < 1e-14);
        }
        let late = sol.state_at(40.0 / (gamma + eps)).unwrap();
        let ss = source_steady_state(f, gamma, eps).unwrap();
        assert!(trace_distance(&late.data().view(), &ss.data().view()) < 1e-10);
    }

    #[test]
    fn coefficients_sum_to_one_for_all_times() {
        let mut rng = random::rng(33);
        let rho0 = random::random_product_pair(&mut rng);
        let sol = ExactSolution::new(&rho0, 0.8, 0.9, 0.4).unwrap();
        for t in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0] {
            let g = sol.coefficients(t);
            let sum: f64 = g.iter().sum();
            assert!((sum - 1.0).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn mixed_initial_state_follows_the_single_exponential_form() {
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(layout);
        let (f, gamma, eps) = (0.95, 2.0, 0.5);
        let ss = source_steady_state(f, gamma, eps).unwrap();
        for t in [0.0, 0.2, 0.7, 1.9] {
            let got = exact_evolve(&mixed, f, gamma, eps, t).unwrap();
            let decay = (-(gamma + eps) * t).exp();
            let expect = ss.data().mapv(|z| z * (1.0 - decay))
                + mixed.data().mapv(|z| z * decay);
            assert!(max_abs_diff(&got.data().view(), &expect.view()) < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn g_functions_satisfy_their_ode_system() {
        let mut rng = random::rng(55);
        let rho0 = random::random_product_pair(&mut rng);
        let (f, gamma, eps) = (0.85, 1.4, 0.6);
        let sol = ExactSolution::new(&rho0, f, gamma, eps).unwrap();
        let gp = gamma + eps;
        let gpp = gamma + 0.5 * eps;
        let h = 1e-6;
        for t in [0.05, 0.3, 1.1, 2.7] {
            let g = sol.coefficients(t);
            let gm = sol.coefficients(t - h);
            let gq = sol.coefficients(t + h);
            let dg: Vec<f64> = (0..4).map(|i| (gq[i] - gm[i]) / (2.0 * h)).collect();
            let rhs = [
                -gp * g[0],
                eps * g[0] - gpp * g[1],
                gamma * (g[0] + g[1] + g[3]) - eps * g[2],
                0.5 * eps * g[1] + eps * g[2] - gamma * g[3],
            ];
            for i in 0..4 {
                assert!(
                    (dg[i] - rhs[i]).abs() < 1e-6,
                    "t = {t}, i = {i}: {} vs {}",
                    dg[i],
                    rhs[i]
                );
            }
        }
    }

    #[test]
    fn exact_solution_satisfies_the_master_equation() {
        let mut rng = random::rng(71);
        let rho0 = random::random_product_pair(&mut rng);
        let (f, gamma, eps) = (0.9, 1.2, 0.35);
        let layout = rho0.layout().clone();
        let mut terms = entangler_terms(&layout, ("a", "b"), gamma, f).unwrap();
        terms.extend(noise_terms(&layout, &["a", "b"], eps).unwrap());
        let me = MasterEquation::new(layout, terms).unwrap();
        let sol = ExactSolution::new(&rho0, f, gamma, eps).unwrap();
        let h = 1e-5;
        for t in [0.1, 0.7, 2.0] {
            let plus = sol.state_at(t + h).unwrap();
            let minus = sol.state_at(t - h).unwrap();
            let fd = (plus.data() - minus.data()).mapv(|z| z / (2.0 * h));
            let gen = me.rhs(&sol.state_at(t).unwrap().data().view());
            assert!(max_abs_diff(&fd.view(), &gen.view()) < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn exact_evolve_agrees_with_numerical_integration() {
        let mut rng = random::rng(90);
        for case in 0..3 {
            let rho0 = random::random_product_pair(&mut rng);
            let f = 0.25 + 0.75 * rand::Rng::random::<f64>(&mut rng);
            let gamma = 0.5 + rand::Rng::random::<f64>(&mut rng);
            let eps = 0.5 * rand::Rng::random::<f64>(&mut rng);
            let layout = rho0.layout().clone();
            let mut terms = entangler_terms(&layout, ("a", "b"), gamma, f).unwrap();
            terms.extend(noise_terms(&layout, &["a", "b"], eps).unwrap());
            let me = MasterEquation::new(layout, terms).unwrap();
            let times = [0.3, 1.7];
            let numeric = me.evolve(&rho0, &times, &StepControl::default()).unwrap();
            for (state, &t) in numeric.iter().zip(&times) {
                let closed = exact_evolve(&rho0, f, gamma, eps, t).unwrap();
                let d = trace_distance(&state.data().view(), &closed.data().view());
                assert!(d < 1e-8, "case {case}, t = {t}: distance {d}");
            }
        }
    }

    #[test]
    fn integrand_endpoints_and_slow_flip_limit() {
        let f_s = 0.93;
        assert!((source_block_steady_fidelity_integrand(f_s, 3.0, 1.0) - 0.25).abs() < 1e-15);
        assert!((source_block_steady_fidelity_integrand(f_s, 3.0, 0.0) - f_s).abs() < 1e-15);
        for x in [0.2, 0.5, 0.9] {
            let v = source_block_steady_fidelity_integrand(f_s, 1e9, x);
            assert!((v - f_s).abs() < 1e-12, "x = {x}");
            let v = source_block_steady_fidelity_integrand(f_s, 3.0, x);
            assert!((0.25..=f_s).contains(&v));
        }
    }

    #[test]
    fn identity_protocol_matches_the_closed_form() {
        for &(gamma, eps, delta) in &[(1.0, 0.1, 0.5), (2.0, 0.0, 7.0), (0.3, 0.2, 4.0)] {
            let f_s = source_steady_fidelity(0.96, gamma, eps);
            let a = (gamma + eps) / delta;
            let got = distilled_steady_fidelity(|u| u, 1, f_s, gamma, eps, delta).unwrap();
            let exact = f_s - (f_s - 0.25) / (a + 1.0);
            assert!((got - exact).abs() < 1e-10, "a = {a}: {got} vs {exact}");
        }
    }

    #[test]
    fn slow_consumption_recovers_the_source_fidelity() {
        let f_s = 0.91;
        let got = distilled_steady_fidelity(|u| u, 1, f_s, 1.0, 0.2, 0.0).unwrap();
        assert_eq!(got, f_s);
        let got = distilled_steady_fidelity(|u| u, 1, f_s, 1.0, 0.2, 1e-6).unwrap();
        assert!((got - f_s).abs() < 1e-5);
    }

    #[test]
    fn four_to_one_fixed_points_and_reference_value() {
        let (f1, p1) = four_to_one(1.0).unwrap();
        assert!((f1 - 1.0).abs() < 1e-15);
        assert!((p1 - 1.0).abs() < 1e-15);
        let (fq, pq) = four_to_one(0.25).unwrap();
        assert!((fq - 0.25).abs() < 1e-15);
        assert!((pq - 0.25).abs() < 1e-15);
        let (f, p) = four_to_one(0.96).unwrap();
        assert!((f - 0.98517).abs() < 1e-5, "f_out {f}");
        assert!((p - 0.89824).abs() < 1e-5, "P_succ {p}");
        assert!(four_to_one(0.1).is_err());
    }

    #[test]
    fn nested_distill_reference_and_monotonicity() {
        assert_eq!(nested_distill(0.77, 0).unwrap(), 0.77);
        let two = nested_distill(0.96, 2).unwrap();
        assert!((two - 0.99485).abs() < 1e-5, "nested {two}");
        let direct = four_to_one(four_to_one(0.96).unwrap().0).unwrap().0;
        assert!((two - direct).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=20 {
            let f_in = 0.25 + 0.75 * i as f64 / 20.0;
            let out = nested_distill(f_in, 2).unwrap();
            assert!(out >= prev - 1e-12, "monotonicity broken at {f_in}");
            assert!((0.25..=1.0 + 1e-12).contains(&out));
            prev = out;
        }
    }

    #[test]
    fn effective_rate_scales_linearly() {
        assert_eq!(effective_rate(1.0, 3.0), 3.0);
        assert_eq!(effective_rate(0.25, 1.0), 0.25);
    }

    #[test]
    fn boost_fixed_point_formula_and_limits() {
        assert!((boost_steady_state(0.9, 4, 1.0, 0.0).unwrap() - 0.9).abs() < 1e-15);
        // m delta = eps at f* = 1: (1 + 1/4)/2 = 5/8
        assert!((boost_steady_state(1.0, 2, 0.5, 1.0).unwrap() - 0.625).abs() < 1e-15);
        let near = boost_steady_state(0.9, 100000, 1.0, 0.3).unwrap();
        assert!((near - 0.9).abs() < 1e-5);
        assert!(boost_steady_state(0.2, 1, 1.0, 0.1).is_err());
    }

    #[test]
    fn boost_fixed_point_matches_the_master_equation() {
        // target pair refreshed at rate m delta toward fidelity f*, noisy at eps
        let (f_star, m, delta, eps) = (0.97, 3, 0.4, 0.3);
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let mut terms =
            entangler_terms(&layout, ("a", "b"), m as f64 * delta, f_star).unwrap();
        terms.extend(noise_terms(&layout, &["a", "b"], eps).unwrap());
        let me = MasterEquation::new(layout, terms).unwrap();
        let ss = me.steady_state(77).unwrap();
        let expect = boost_steady_state(f_star, m, delta, eps).unwrap();
        assert!((omega_overlap(&ss.data().view()) - expect).abs() < 1e-9);
    }

    #[test]
    fn pipeline_maps_preserve_the_werner_interval() {
        for i in 0..=10 {
            let f = 0.25 + 0.75 * i as f64 / 10.0;
            let (fo, p) = four_to_one(f).unwrap();
            assert!((0.25..=1.0 + 1e-12).contains(&fo));
            assert!((0.0..=1.0).contains(&p));
            let b = boost_steady_state(f, 3, 1.0, 0.4).unwrap();
            assert!((0.25..=1.0).contains(&b));
            let d = distilled_steady_fidelity(|u| u, 1, f.max(0.25), 1.0, 0.2, 0.7).unwrap();
            assert!((0.25 - 1e-10..=1.0).contains(&d));
        }
    }

    #[test]
    fn distilled_fidelity_moves_the_right_way_with_each_rate() {
        let proto = |u: f64| four_to_one(u).map(|r| r.0).unwrap_or(u);
        let base = |gamma: f64, eps: f64, delta: f64| {
            let f_s = source_steady_fidelity(0.96, gamma, eps);
            distilled_steady_fidelity(proto, 4, f_s, gamma, eps, delta).unwrap()
        };
        // increasing gamma helps
        let mut prev = 0.0;
        for gamma in [0.5, 1.0, 2.0, 4.0] {
            let v = base(gamma, 0.1, 0.8);
            assert!(v >= prev, "gamma = {gamma}");
            prev = v;
        }
        // increasing delta_D hurts (less converged sources)
        let mut prev = 1.0;
        for delta in [0.2, 0.8, 2.0, 8.0] {
            let v = base(1.5, 0.1, delta);
            assert!(v <= prev, "delta = {delta}");
            prev = v;
        }
        // increasing eps hurts
        let mut prev = 1.0;
        for eps in [0.0, 0.1, 0.4, 1.0] {
            let v = base(1.5, eps, 0.8);
            assert!(v <= prev, "eps = {eps}");
            prev = v;
        }
    }

    #[test]
    fn params_validation_and_derived_rates() {
        let p = WernerParams {
            f: 0.96,
            gamma: 70.0,
            eps: 0.05,
            delta_d: 1.4,
            n: 16,
            m: 50,
        };
        p.validate().unwrap();
        assert!((p.gamma_prime() - 70.05).abs() < 1e-12);
        assert!((p.gamma_dprime() - 70.025).abs() < 1e-12);
        let fs = p.f_s();
        assert!((fs - (70.0 * 0.96 + 0.0125) / 70.05).abs() < 1e-12);

        let bad = WernerParams { f: 0.1, ..p };
        assert!(bad.validate().is_err());
        let bad = WernerParams { n: 0, ..p };
        assert!(bad.validate().is_err());
    }
}
