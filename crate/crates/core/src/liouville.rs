//! Lindblad master equations: term construction, generator application,
//! row-stacking superoperators, steady states, and adaptive time evolution.
//!
//! Sign conventions:
//! - jump term, rate g:        g (A rho Adag - 1/2 {Adag A, rho})
//! - Hamiltonian term, rate g: + i g [H, rho]
//! - channel term, rate g:     g (sum_k K rho Kdag - rho)

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Factorize, Norm, Solve};
use rand::Rng;

use crate::error::{QdError, Result};
use crate::qops::{self, dag, trace, C64, DensityMatrix, Operator, SystemLayout};
use crate::random;
use crate::rk45;
use crate::tol;

/// Discriminates the three generator term shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermKind {
    Jump,
    Hamiltonian,
    Channel,
}

/// One additive term of the generator, with cached products.
#[derive(Debug, Clone)]
pub struct LindbladTerm {
    kind: TermKind,
    rate: f64,
    ops: Vec<Array2<C64>>,
    dags: Vec<Array2<C64>>,
    /// 1/2 Adag A for jump terms, empty otherwise.
    half_adag_a: Option<Array2<C64>>,
}

impl LindbladTerm {
    /// Dissipator with a single jump operator.
    pub fn jump(rate: f64, op: &Operator) -> Result<Self> {
        if rate < 0.0 {
            return Err(QdError::InvalidParameter(format!(
                "jump rate {rate} is negative"
            )));
        }
        Self::jump_raw(rate, op.data().clone())
    }

    /// Same as [`LindbladTerm::jump`] for callers holding raw matrices.
    pub fn jump_raw(rate: f64, op: Array2<C64>) -> Result<Self> {
        if rate < 0.0 {
            return Err(QdError::InvalidParameter(format!(
                "jump rate {rate} is negative"
            )));
        }
        let d = dag(&op.view());
        let half = d.dot(&op).mapv(|z| z * 0.5);
        Ok(Self {
            kind: TermKind::Jump,
            rate,
            ops: vec![op],
            dags: vec![d],
            half_adag_a: Some(half),
        })
    }

    /// Coherent term + i rate [H, rho]; H must be Hermitian.
    pub fn hamiltonian(rate: f64, op: &Operator) -> Result<Self> {
        Self::hamiltonian_raw(rate, op.data().clone())
    }

    pub fn hamiltonian_raw(rate: f64, op: Array2<C64>) -> Result<Self> {
        let defect = qops::hermiticity_defect(&op.view());
        if defect > tol::STATE_CHECK {
            return Err(QdError::NotHermitian(defect));
        }
        Ok(Self {
            kind: TermKind::Hamiltonian,
            rate,
            ops: vec![op],
            dags: vec![],
            half_adag_a: None,
        })
    }

    /// Completed-map term rate (T(rho) - rho) with T given by Kraus operators.
    /// The set must satisfy sum Kdag K = 1 within `tol::KRAUS_BUILD`.
    pub fn channel(rate: f64, kraus: Vec<Array2<C64>>) -> Result<Self> {
        if rate < 0.0 {
            return Err(QdError::InvalidParameter(format!(
                "channel rate {rate} is negative"
            )));
        }
        if kraus.is_empty() {
            return Err(QdError::InvalidParameter("empty Kraus set".into()));
        }
        let defect = kraus_completeness_defect(&kraus);
        if defect > tol::KRAUS_BUILD {
            return Err(QdError::KrausIncomplete(defect));
        }
        let dags = kraus.iter().map(|k| dag(&k.view())).collect();
        Ok(Self {
            kind: TermKind::Channel,
            rate,
            ops: kraus,
            dags,
            half_adag_a: None,
        })
    }

    pub fn kind(&self) -> TermKind {
        self.kind
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn ops(&self) -> &[Array2<C64>] {
        &self.ops
    }

    fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    fn apply_into(&self, rho: &ArrayView2<C64>, out: &mut Array2<C64>) {
        let r = C64::new(self.rate, 0.0);
        match self.kind {
            TermKind::Jump => {
                let a = &self.ops[0];
                let ad = &self.dags[0];
                let half = self.half_adag_a.as_ref().unwrap();
                let gain = a.dot(rho).dot(ad);
                let loss = half.dot(rho) + rho.dot(half);
                out.scaled_add(r, &(gain - loss));
            }
            TermKind::Hamiltonian => {
                let h = &self.ops[0];
                let comm = h.dot(rho) - rho.dot(h);
                out.scaled_add(r * C64::new(0.0, 1.0), &comm);
            }
            TermKind::Channel => {
                let mut acc = Array2::<C64>::zeros(rho.raw_dim());
                for (k, kd) in self.ops.iter().zip(&self.dags) {
                    acc += &k.dot(rho).dot(kd);
                }
                acc -= rho;
                out.scaled_add(r, &acc);
            }
        }
    }
}

/// Largest entry of |sum Kdag K - 1|.
pub fn kraus_completeness_defect(kraus: &[Array2<C64>]) -> f64 {
    let n = kraus[0].nrows();
    let mut acc = Array2::<C64>::zeros((n, n));
    for k in kraus {
        acc += &dag(&k.view()).dot(k);
    }
    acc -= &Array2::<C64>::eye(n);
    qops::max_abs(&acc.view())
}

/// Step-size and projection settings for [`MasterEquation::evolve`].
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel: f64,
    pub abs: f64,
    /// Restore the Hermitian part and renormalize the trace after each
    /// accepted step. Leaves the physical solution untouched (the drift it
    /// removes is pure integration error) and keeps long trajectories valid.
    pub hermitian_projection: bool,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel: tol::RK_REL,
            abs: tol::RK_ABS,
            hermitian_projection: true,
        }
    }
}

/// A fixed set of Lindblad terms over one layout.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    layout: SystemLayout,
    terms: Vec<LindbladTerm>,
}

/// Dense superoperators above this total dimension are refused (the matrix
/// alone would exceed dim^4 complex entries).
pub const DENSE_SUPEROP_MAX_DIM: usize = 64;

impl MasterEquation {
    pub fn new(layout: SystemLayout, terms: Vec<LindbladTerm>) -> Result<Self> {
        let n = layout.total_dim();
        for t in &terms {
            if t.dim() != n {
                return Err(QdError::DimensionMismatch(format!(
                    "term dimension {} vs layout dimension {n}",
                    t.dim()
                )));
            }
        }
        Ok(Self { layout, terms })
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn terms(&self) -> &[LindbladTerm] {
        &self.terms
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    /// Apply the generator to raw state data.
    pub fn rhs(&self, rho: &ArrayView2<C64>) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros(rho.raw_dim());
        for t in &self.terms {
            t.apply_into(rho, &mut out);
        }
        out
    }

    /// Row-stacking superoperator L with L rvec(rho) = rvec(generator(rho)).
    pub fn superoperator(&self) -> Result<Array2<C64>> {
        let n = self.dim();
        if n > DENSE_SUPEROP_MAX_DIM {
            return Err(QdError::InvalidParameter(format!(
                "dense superoperator refused for dimension {n} > {DENSE_SUPEROP_MAX_DIM}"
            )));
        }
        let n2 = n * n;
        let mut l = Array2::<C64>::zeros((n2, n2));
        let eye = Array2::<C64>::eye(n);
        for t in &self.terms {
            let r = C64::new(t.rate, 0.0);
            match t.kind {
                TermKind::Jump => {
                    let a = &t.ops[0];
                    let abar = a.mapv(|z| z.conj());
                    add_kron_scaled(&mut l, r, &a.view(), &abar.view());
                    let half = t.half_adag_a.as_ref().unwrap();
                    let half_t = half.t().to_owned();
                    add_kron_scaled(&mut l, -r, &half.view(), &eye.view());
                    add_kron_scaled(&mut l, -r, &eye.view(), &half_t.view());
                }
                TermKind::Hamiltonian => {
                    let h = &t.ops[0];
                    let ht = h.t().to_owned();
                    let ir = r * C64::new(0.0, 1.0);
                    add_kron_scaled(&mut l, ir, &h.view(), &eye.view());
                    add_kron_scaled(&mut l, -ir, &eye.view(), &ht.view());
                }
                TermKind::Channel => {
                    for k in &t.ops {
                        let kbar = k.mapv(|z| z.conj());
                        add_kron_scaled(&mut l, r, &k.view(), &kbar.view());
                    }
                    for i in 0..n2 {
                        l[[i, i]] -= r;
                    }
                }
            }
        }
        Ok(l)
    }

    /// Unique steady state by shifted inverse iteration on the dense
    /// superoperator. Degeneracy is detected from two independent starts and
    /// reported with the candidate null directions.
    pub fn steady_state(&self, seed: u64) -> Result<DensityMatrix> {
        let n = self.dim();
        let l = self.superoperator()?;
        let l_max = qops::max_abs(&l.view());
        if l_max == 0.0 {
            return Err(QdError::NonUniqueSteadyState {
                dim: n,
                candidates: vec![Array2::eye(n).mapv(|z: C64| z / n as f64)],
            });
        }
        let n2 = n * n;
        let sigma = 1e-10 * l_max;
        let mut shifted = l.clone();
        for i in 0..n2 {
            shifted[[i, i]] -= sigma;
        }
        let lu = shifted.factorize()?;

        let mut rng = random::rng(seed);
        let mut vecs: Vec<Array1<C64>> = Vec::new();
        for _ in 0..2 {
            let mut v = Array1::from_shape_fn(n2, |_| {
                C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            normalize(&mut v);
            for _ in 0..3 {
                v = lu.solve(&v)?;
                normalize(&mut v);
            }
            vecs.push(v);
        }

        // overlap test: a second independent null direction means degeneracy
        let inner: C64 = vecs[0]
            .iter()
            .zip(vecs[1].iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let mut resid = vecs[1].clone();
        resid.scaled_add(-inner, &vecs[0]);
        let resid_norm = resid.norm_l2();
        if resid_norm > 1e-6 {
            let candidates = vecs
                .iter()
                .map(|v| {
                    let m = unrvec(&v.view(), n);
                    let herm = (&m + &dag(&m.view())).mapv(|z| z * 0.5);
                    let tn = qops::trace_norm(&herm.view());
                    if tn > 0.0 {
                        herm.mapv(|z| z / tn)
                    } else {
                        herm
                    }
                })
                .collect();
            return Err(QdError::NonUniqueSteadyState { dim: n, candidates });
        }

        let m = unrvec(&vecs[0].view(), n);
        let herm = (&m + &dag(&m.view())).mapv(|z| z * 0.5);
        let tr = trace(&herm.view());
        if tr.norm() < 1e-10 {
            return Err(QdError::ConvergenceFailure(
                "steady-state candidate has vanishing trace".into(),
            ));
        }
        let rho = herm.mapv(|z| z / tr);
        let residual = qops::trace_norm(&self.rhs(&rho.view()).view());
        let budget = tol::STEADY_RESIDUAL * l_max.max(1.0);
        if residual > budget {
            return Err(QdError::ConvergenceFailure(format!(
                "steady-state residual {residual:.3e} above budget {budget:.3e}"
            )));
        }
        DensityMatrix::new(self.layout.clone(), rho)
    }

    /// Evolve from `rho0` at t = 0 and report the state at each time in
    /// `times` (non-decreasing, non-negative).
    pub fn evolve(
        &self,
        rho0: &DensityMatrix,
        times: &[f64],
        ctl: &StepControl,
    ) -> Result<Vec<DensityMatrix>> {
        if rho0.layout() != &self.layout {
            return Err(QdError::DimensionMismatch(
                "initial state layout differs from equation layout".into(),
            ));
        }
        let mut prev = 0.0f64;
        for &t in times {
            if t < prev {
                return Err(QdError::InvalidParameter(
                    "times must be non-decreasing and non-negative".into(),
                ));
            }
            prev = t;
        }
        let n = self.dim();
        let mut out = Vec::with_capacity(times.len());
        let mut y = rvec(&rho0.data().view());
        let mut t_now = 0.0f64;
        for &t in times {
            if t > t_now {
                let rhs = |_t: f64, v: &ArrayView1<C64>| {
                    let rho = ArrayView2::from_shape((n, n), v.as_slice().unwrap()).unwrap();
                    let d = self.rhs(&rho);
                    rvec(&d.view())
                };
                let hook = if ctl.hermitian_projection {
                    Some(|v: &mut Array1<C64>| project_state(v, n))
                } else {
                    None
                };
                let (ynew, _) = rk45::integrate(rhs, y, t_now, t, ctl.rel, ctl.abs, hook)?;
                y = ynew;
                t_now = t;
            }
            let rho = unrvec(&y.view(), n);
            out.push(DensityMatrix::new(self.layout.clone(), rho)?);
        }
        Ok(out)
    }
}

/// Row-stacking vectorization.
pub fn rvec(m: &ArrayView2<C64>) -> Array1<C64> {
    Array1::from_iter(m.iter().cloned())
}

/// Inverse of [`rvec`].
pub fn unrvec(v: &ArrayView1<C64>, n: usize) -> Array2<C64> {
    Array2::from_shape_vec((n, n), v.to_vec()).expect("vector length is n*n")
}

fn normalize(v: &mut Array1<C64>) {
    let norm = v.norm_l2();
    if norm > 0.0 {
        v.mapv_inplace(|z| z / norm);
    }
}

/// In place: Hermitian part plus trace renormalization on the flattened state.
fn project_state(v: &mut Array1<C64>, n: usize) {
    let m = unrvec(&v.view(), n);
    let herm = (&m + &dag(&m.view())).mapv(|z| z * 0.5);
    let tr = trace(&herm.view()).re;
    let fixed = if tr.abs() > 1e-14 {
        herm.mapv(|z| z / tr)
    } else {
        herm
    };
    *v = rvec(&fixed.view());
}

/// target += scale * kron(a, b), walking only the nonzero entries.
fn add_kron_scaled(
    target: &mut Array2<C64>,
    scale: C64,
    a: &ArrayView2<C64>,
    b: &ArrayView2<C64>,
) {
    let zero = C64::new(0.0, 0.0);
    let (br, bc) = b.dim();
    let bnz: Vec<(usize, usize, C64)> = b
        .indexed_iter()
        .filter(|(_, z)| **z != zero)
        .map(|((i, j), z)| (i, j, *z))
        .collect();
    for ((i, j), &av) in a.indexed_iter() {
        if av == zero {
            continue;
        }
        let s = scale * av;
        for &(bi, bj, bv) in &bnz {
            target[[i * br + bi, j * bc + bj]] += s * bv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{
        embed, identity, kron, max_abs_diff, pauli, sigma_minus, trace_norm,
    };

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn decay_me(gamma: f64) -> MasterEquation {
        let layout = SystemLayout::qubits(&["q"]).unwrap();
        let a = embed(sigma_minus().view(), &layout, &["q"]).unwrap();
        MasterEquation::new(layout, vec![LindbladTerm::jump(gamma, &a).unwrap()]).unwrap()
    }

    #[test]
    fn amplitude_damping_matches_closed_form() {
        let gamma = 0.7;
        let me = decay_me(gamma);
        let layout = me.layout().clone();
        let mut rho0 = Array2::<C64>::zeros((2, 2));
        rho0[[0, 0]] = c(0.3, 0.0);
        rho0[[1, 1]] = c(0.7, 0.0);
        rho0[[0, 1]] = c(0.2, 0.1);
        rho0[[1, 0]] = c(0.2, -0.1);
        let rho0 = DensityMatrix::new(layout, rho0).unwrap();
        let times = [0.5, 1.5, 4.0];
        let states = me.evolve(&rho0, &times, &StepControl::default()).unwrap();
        for (state, &t) in states.iter().zip(&times) {
            let p1 = 0.7 * (-gamma * t).exp();
            let coh = c(0.2, 0.1) * (-0.5 * gamma * t).exp();
            assert!((state.data()[[1, 1]].re - p1).abs() < 1e-8, "t = {t}");
            assert!((state.data()[[0, 0]].re - (1.0 - p1)).abs() < 1e-8);
            assert!((state.data()[[0, 1]] - coh).norm() < 1e-8);
        }
    }

    #[test]
    fn amplitude_damping_steady_state_is_ground() {
        let me = decay_me(1.3);
        let ss = me.steady_state(7).unwrap();
        let mut expect = Array2::<C64>::zeros((2, 2));
        expect[[0, 0]] = c(1.0, 0.0);
        assert!(max_abs_diff(&ss.data().view(), &expect.view()) < 1e-9);
    }

    #[test]
    fn hamiltonian_term_rotates_populations() {
        // d rho/dt = + i w [sx, rho] gives p1(t) = sin^2(w t) from |0>
        let w = 0.9;
        let layout = SystemLayout::qubits(&["q"]).unwrap();
        let h = embed(pauli(1).view(), &layout, &["q"]).unwrap();
        let me = MasterEquation::new(
            layout.clone(),
            vec![LindbladTerm::hamiltonian(w, &h).unwrap()],
        )
        .unwrap();
        let rho0 = DensityMatrix::from_pure(layout, qops::basis_ket(2, 0).view()).unwrap();
        let t = 0.8;
        let states = me.evolve(&rho0, &[t], &StepControl::default()).unwrap();
        let p1 = (w * t).sin().powi(2);
        assert!((states[0].data()[[1, 1]].re - p1).abs() < 1e-8);
    }

    #[test]
    fn hamiltonian_must_be_hermitian() {
        let layout = SystemLayout::qubits(&["q"]).unwrap();
        let a = embed(sigma_minus().view(), &layout, &["q"]).unwrap();
        assert!(matches!(
            LindbladTerm::hamiltonian(1.0, &a),
            Err(QdError::NotHermitian(_))
        ));
    }

    #[test]
    fn depolarizing_channel_relaxes_to_maximally_mixed() {
        // Kraus sigma_i / 2: T(rho) = tr(rho) I/2, so rho(t) -> I/2 at rate r
        let r = 2.0;
        let layout = SystemLayout::qubits(&["q"]).unwrap();
        let kraus: Vec<Array2<C64>> = (0..4).map(|k| pauli(k).mapv(|z| z * 0.5)).collect();
        let me = MasterEquation::new(
            layout.clone(),
            vec![LindbladTerm::channel(r, kraus).unwrap()],
        )
        .unwrap();
        let rho0 = DensityMatrix::from_pure(layout, qops::basis_ket(2, 1).view()).unwrap();
        let t = 0.6;
        let states = me.evolve(&rho0, &[t], &StepControl::default()).unwrap();
        let p1 = 0.5 + 0.5 * (-r * t).exp();
        assert!((states[0].data()[[1, 1]].re - p1).abs() < 1e-8);

        let ss = me.steady_state(3).unwrap();
        let half = identity(2).mapv(|z| z * 0.5);
        assert!(max_abs_diff(&ss.data().view(), &half.view()) < 1e-9);
    }

    #[test]
    fn incomplete_kraus_sets_are_rejected() {
        let kraus = vec![sigma_minus()];
        assert!(matches!(
            LindbladTerm::channel(1.0, kraus),
            Err(QdError::KrausIncomplete(_))
        ));
    }

    #[test]
    fn zero_kraus_operators_are_tolerated_inside_complete_sets() {
        // completeness comes from the nonzero members
        let kraus = vec![identity(2), Array2::<C64>::zeros((2, 2))];
        assert!(LindbladTerm::channel(1.0, kraus).is_ok());
    }

    #[test]
    fn superoperator_matches_direct_application() {
        let mut rng = random::rng(19);
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let jump_op = embed(sigma_minus().view(), &layout, &["a"]).unwrap();
        let ham = {
            let za = embed(pauli(3).view(), &layout, &["a"]).unwrap();
            let xb = embed(pauli(1).view(), &layout, &["b"]).unwrap();
            Operator::linear_combination(&[(0.4, &za), (1.1, &xb)]).unwrap()
        };
        let kraus: Vec<Array2<C64>> = (0..4)
            .map(|k| kron(&pauli(k).mapv(|z| z * 0.5), &identity(2)))
            .collect();
        let me = MasterEquation::new(
            layout.clone(),
            vec![
                LindbladTerm::jump(0.8, &jump_op).unwrap(),
                LindbladTerm::hamiltonian(0.6, &ham).unwrap(),
                LindbladTerm::channel(1.7, kraus).unwrap(),
            ],
        )
        .unwrap();
        let l = me.superoperator().unwrap();
        for _ in 0..6 {
            let rho = random::random_density(&layout, &mut rng);
            let via_l = l.dot(&rvec(&rho.data().view()));
            let direct = rvec(&me.rhs(&rho.data().view()).view());
            let worst = via_l
                .iter()
                .zip(direct.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0f64, f64::max);
            assert!(worst < tol::GENERATOR_CONSISTENCY * 100.0, "worst {worst}");
        }
    }

    #[test]
    fn generator_is_trace_free_and_hermiticity_preserving() {
        let mut rng = random::rng(31);
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let op = embed(sigma_minus().view(), &layout, &["a"]).unwrap();
        let ham = embed(pauli(2).view(), &layout, &["b"]).unwrap();
        let me = MasterEquation::new(
            layout.clone(),
            vec![
                LindbladTerm::jump(1.0, &op).unwrap(),
                LindbladTerm::hamiltonian(0.5, &ham).unwrap(),
            ],
        )
        .unwrap();
        for _ in 0..5 {
            let rho = random::random_density(&layout, &mut rng);
            let d = me.rhs(&rho.data().view());
            assert!(trace(&d.view()).norm() < 1e-13);
            assert!(qops::hermiticity_defect(&d.view()) < 1e-13);
        }
    }

    #[test]
    fn steady_state_of_random_irreducible_lindbladian_has_small_residual() {
        let mut rng = random::rng(101);
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        // a random jump plus a random Hamiltonian mixes the whole space
        let g = random::random_complex_matrix(4, &mut rng);
        let hraw = {
            let m = random::random_complex_matrix(4, &mut rng);
            (&m + &dag(&m.view())).mapv(|z| z * 0.5)
        };
        let me = MasterEquation::new(
            layout,
            vec![
                LindbladTerm::jump_raw(0.9, g).unwrap(),
                LindbladTerm::hamiltonian_raw(0.3, hraw).unwrap(),
            ],
        )
        .unwrap();
        let ss = me.steady_state(55).unwrap();
        let resid = trace_norm(&me.rhs(&ss.data().view()).view());
        assert!(resid < 1e-9, "residual {resid}");
    }

    #[test]
    fn decoupled_spectator_qubit_gives_degenerate_steady_space() {
        let layout = SystemLayout::qubits(&["a", "b"]).unwrap();
        let a = embed(sigma_minus().view(), &layout, &["a"]).unwrap();
        let me =
            MasterEquation::new(layout, vec![LindbladTerm::jump(1.0, &a).unwrap()]).unwrap();
        match me.steady_state(11) {
            Err(QdError::NonUniqueSteadyState { dim, candidates }) => {
                assert_eq!(dim, 4);
                assert_eq!(candidates.len(), 2);
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn evolve_in_segments_matches_single_span() {
        let me = decay_me(0.9);
        let layout = me.layout().clone();
        let rho0 = DensityMatrix::from_pure(layout, qops::basis_ket(2, 1).view()).unwrap();
        let ctl = StepControl::default();
        let single = me.evolve(&rho0, &[1.2], &ctl).unwrap();
        let multi = me.evolve(&rho0, &[0.3, 0.7, 1.2], &ctl).unwrap();
        assert!(
            max_abs_diff(&single[0].data().view(), &multi[2].data().view()) < 1e-9
        );
    }

    #[test]
    fn evolve_preserves_trace_exactly_with_projection() {
        let me = decay_me(2.0);
        let layout = me.layout().clone();
        let rho0 = DensityMatrix::from_pure(layout, qops::basis_ket(2, 1).view()).unwrap();
        let states = me
            .evolve(&rho0, &[5.0], &StepControl::default())
            .unwrap();
        let tr = trace(&states[0].data().view());
        assert!((tr.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn evolve_rejects_decreasing_times_and_foreign_layouts() {
        let me = decay_me(1.0);
        let rho0 = DensityMatrix::maximally_mixed(me.layout().clone());
        assert!(me
            .evolve(&rho0, &[1.0, 0.5], &StepControl::default())
            .is_err());
        let other = DensityMatrix::maximally_mixed(SystemLayout::qubits(&["z"]).unwrap());
        assert!(me
            .evolve(&other, &[1.0], &StepControl::default())
            .is_err());
    }

    #[test]
    fn superoperator_size_guard() {
        let labels: Vec<String> = (0..7).map(|i| format!("q{i}")).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let layout = SystemLayout::qubits(&refs).unwrap();
        let a = embed(sigma_minus().view(), &layout, &["q0"]).unwrap();
        let me =
            MasterEquation::new(layout, vec![LindbladTerm::jump(1.0, &a).unwrap()]).unwrap();
        assert!(me.superoperator().is_err());
    }
}
