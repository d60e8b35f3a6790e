//! The two-source-pair distillation setup without classical communication
//! (flip Hamiltonian) and with it (flip LOCC channel), plus the steady-state
//! scan used for the entanglement-versus-noise curves.
//!
//! Qubit layout, in order: s1_a, s1_b, s2_a, s2_b, t_a, t_b. Suffix a is
//! Alice's side, b is Bob's. The flip acts per side on (target, s1, s2).

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::liouville::{kraus_completeness_defect, LindbladTerm, MasterEquation};
use crate::qops::{
    self, embed, excited_projector, identity, kron, pauli, sigma_minus, sigma_plus, trace_norm,
    C64, DensityMatrix, Operator, SystemLayout,
};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    NoComm,
    Locc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Alice,
    Bob,
}

impl Side {
    fn suffix(self) -> &'static str {
        match self {
            Side::Alice => "a",
            Side::Bob => "b",
        }
    }
}

/// Parameters of one steady-state evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Scheme1Params {
    /// Squeezing-like entangler parameter; the dark state carries
    /// lambda = tanh(r).
    pub r: f64,
    /// Entangling rate.
    pub gamma: f64,
    /// Flip coupling rate.
    pub delta_f: f64,
    /// Cooling rate (sigma-minus, each source qubit).
    pub eps_c: f64,
    /// Heating rate (sigma-plus, each source qubit).
    pub eps_h: f64,
    /// Dephasing rate (|1><1|, each source qubit).
    pub eps_d: f64,
    pub variant: Variant,
    /// Restrict dephasing to s1 on Alice's side and s2 on Bob's side
    /// instead of all four source qubits.
    pub asymmetric_dephasing: bool,
}

impl Scheme1Params {
    pub fn validate(&self) -> Result<()> {
        if !self.r.is_finite() {
            return Err(QdError::InvalidParameter(format!(
                "parameter r = {} is not finite",
                self.r
            )));
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("delta_f", self.delta_f),
            ("eps_c", self.eps_c),
            ("eps_h", self.eps_h),
            ("eps_d", self.eps_d),
        ] {
            if !(v >= 0.0) {
                return Err(QdError::InvalidParameter(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }
}

/// The six-qubit layout shared by both variants.
pub fn layout() -> SystemLayout {
    SystemLayout::qubits(&["s1_a", "s1_b", "s2_a", "s2_b", "t_a", "t_b"])
        .expect("static layout is valid")
}

/// (|00> - lambda |11>) / sqrt(1 + lambda^2), lambda = tanh(r): the common
/// dark state of the entangling jumps on one pair.
pub fn dark_state(r: f64) -> Array1<C64> {
    let lambda = r.tanh();
    let norm = (1.0 + lambda * lambda).sqrt();
    let mut v = Array1::zeros(4);
    v[0] = C64::new(1.0 / norm, 0.0);
    v[3] = C64::new(-lambda / norm, 0.0);
    v
}

/// The nonlocal pair of jump operators on one source pair:
/// A = cosh(r) sigma-_{Alice} + sinh(r) sigma+_{Bob} and B with the roles of
/// Alice and Bob exchanged.
pub fn entangling_jumps(layout: &SystemLayout, r: f64, pair: &str) -> Result<[Operator; 2]> {
    let la = format!("{pair}_a");
    let lb = format!("{pair}_b");
    let minus_a = embed(sigma_minus().view(), layout, &[la.as_str()])?;
    let minus_b = embed(sigma_minus().view(), layout, &[lb.as_str()])?;
    let plus_a = embed(sigma_plus().view(), layout, &[la.as_str()])?;
    let plus_b = embed(sigma_plus().view(), layout, &[lb.as_str()])?;
    let (ch, sh) = (r.cosh(), r.sinh());
    let a = Operator::linear_combination(&[(ch, &minus_a), (sh, &plus_b)])?;
    let b = Operator::linear_combination(&[(ch, &minus_b), (sh, &plus_a)])?;
    Ok([a, b])
}

/// gamma (L^A + L^B) on one pair; empty when gamma is zero.
pub fn entangling_terms(
    layout: &SystemLayout,
    r: f64,
    gamma: f64,
    pair: &str,
) -> Result<Vec<LindbladTerm>> {
    if gamma == 0.0 {
        return Ok(Vec::new());
    }
    let [a, b] = entangling_jumps(layout, r, pair)?;
    Ok(vec![
        LindbladTerm::jump(gamma, &a)?,
        LindbladTerm::jump(gamma, &b)?,
    ])
}

/// Cooling, heating and dephasing jumps on both qubits of one pair. Terms
/// with zero rate are omitted.
pub fn noise_terms(
    layout: &SystemLayout,
    pair: &str,
    eps_c: f64,
    eps_h: f64,
    eps_d: f64,
) -> Result<Vec<LindbladTerm>> {
    for (name, v) in [("eps_c", eps_c), ("eps_h", eps_h), ("eps_d", eps_d)] {
        if !(v >= 0.0) {
            return Err(QdError::InvalidParameter(format!("{name} = {v} is negative")));
        }
    }
    let mut terms = Vec::new();
    for suffix in ["a", "b"] {
        let label = format!("{pair}_{suffix}");
        for (rate, local) in [
            (eps_c, sigma_minus()),
            (eps_h, sigma_plus()),
            (eps_d, excited_projector()),
        ] {
            if rate > 0.0 {
                let op = embed(local.view(), layout, &[label.as_str()])?;
                terms.push(LindbladTerm::jump(rate, &op)?);
            }
        }
    }
    Ok(terms)
}

/// The flip on one side in the (target, s1, s2) order, target bit most
/// significant: swaps the target qubit with the one-excitation source
/// encoding |0-hat> = |0 1>, |1-hat> = |1 0>, and is zero elsewhere.
pub fn flip_local() -> Array2<C64> {
    let one = C64::new(1.0, 0.0);
    let mut f = Array2::<C64>::zeros((8, 8));
    f[[1, 1]] = one; // |0, 0-hat> fixed
    f[[5, 2]] = one; // |0, 1-hat> -> |1, 0-hat>
    f[[2, 5]] = one;
    f[[6, 6]] = one; // |1, 1-hat> fixed
    f
}

/// Projector onto the one-excitation subspace of (s1, s2).
pub fn one_excitation_projector() -> Array2<C64> {
    let one = C64::new(1.0, 0.0);
    let mut p = Array2::<C64>::zeros((4, 4));
    p[[1, 1]] = one;
    p[[2, 2]] = one;
    p
}

/// The flip embedded on one side's (target, s1, s2) qubits. Hermitian by
/// construction; its square is the projector target (x) one-excitation.
pub fn flip_hamiltonian(layout: &SystemLayout, side: Side) -> Result<Operator> {
    let s = side.suffix();
    let t = format!("t_{s}");
    let s1 = format!("s1_{s}");
    let s2 = format!("s2_{s}");
    embed(
        flip_local().view(),
        layout,
        &[t.as_str(), s1.as_str(), s2.as_str()],
    )
}

/// The sixteen twirl Kraus operators sigma_i (x) sigma_j / 4 on the target
/// pair of the full layout. Applied as a channel they replace the target
/// with the maximally mixed state, which is what makes the primed flip map's
/// source back-action target-independent.
pub fn twirl_kraus(layout: &SystemLayout) -> Result<Vec<Array2<C64>>> {
    let mut kraus = Vec::with_capacity(16);
    for i in 0..4 {
        for j in 0..4 {
            let local = kron(&pauli(i), &pauli(j)).mapv(|z| z * 0.25);
            kraus.push(embed(local.view(), layout, &["t_a", "t_b"])?.data().clone());
        }
    }
    Ok(kraus)
}

/// Kraus set of the flip channel: measure the excitation number on each
/// side, flip on double success, do nothing otherwise. With `primed` the
/// target is twirled first, making the source back-action state-independent.
pub fn locc_map_kraus(layout: &SystemLayout, primed: bool) -> Result<Vec<Array2<C64>>> {
    let fa = flip_hamiltonian(layout, Side::Alice)?;
    let fb = flip_hamiltonian(layout, Side::Bob)?;
    let p_local = one_excitation_projector();
    let mut proj = Vec::new();
    for side in ["a", "b"] {
        let s1 = format!("s1_{side}");
        let s2 = format!("s2_{side}");
        let p = embed(p_local.view(), layout, &[s1.as_str(), s2.as_str()])?;
        let n = layout.total_dim();
        let p_perp = identity(n) - p.data();
        proj.push((p.data().clone(), p_perp));
    }
    let flip_both = fa.data().dot(fb.data());
    let base = vec![
        flip_both,
        proj[0].1.dot(&proj[1].0),
        proj[0].0.dot(&proj[1].1),
        proj[0].1.dot(&proj[1].1),
    ];
    let kraus = if primed {
        let twirl = twirl_kraus(layout)?;
        let mut out = Vec::with_capacity(64);
        for m in &base {
            for u in &twirl {
                out.push(m.dot(u));
            }
        }
        out
    } else {
        base
    };
    let defect = kraus_completeness_defect(&kraus);
    if defect > tol::KRAUS_STRICT {
        return Err(QdError::KrausIncomplete(defect));
    }
    Ok(kraus)
}

fn source_noise(params: &Scheme1Params, lay: &SystemLayout) -> Result<Vec<LindbladTerm>> {
    let mut terms = Vec::new();
    if params.asymmetric_dephasing {
        for pair in ["s1", "s2"] {
            terms.extend(noise_terms(lay, pair, params.eps_c, params.eps_h, 0.0)?);
        }
        // dephasing only on s1 at Alice and s2 at Bob
        if params.eps_d > 0.0 {
            for label in ["s1_a", "s2_b"] {
                let op = embed(excited_projector().view(), lay, &[label])?;
                terms.push(LindbladTerm::jump(params.eps_d, &op)?);
            }
        }
    } else {
        for pair in ["s1", "s2"] {
            terms.extend(noise_terms(
                lay,
                pair,
                params.eps_c,
                params.eps_h,
                params.eps_d,
            )?);
        }
    }
    Ok(terms)
}

/// Entangling + noise terms plus the coherent coupling
/// + i delta_F [F_Alice - F_Bob, rho].
pub fn build_no_comm(params: &Scheme1Params) -> Result<MasterEquation> {
    params.validate()?;
    if params.variant != Variant::NoComm {
        return Err(QdError::InvalidParameter(
            "params request the Locc variant".into(),
        ));
    }
    let lay = layout();
    let mut terms = Vec::new();
    for pair in ["s1", "s2"] {
        terms.extend(entangling_terms(&lay, params.r, params.gamma, pair)?);
    }
    terms.extend(source_noise(params, &lay)?);
    if params.delta_f > 0.0 {
        let fa = flip_hamiltonian(&lay, Side::Alice)?;
        let fb = flip_hamiltonian(&lay, Side::Bob)?;
        let h = Operator::linear_combination(&[(1.0, &fa), (-1.0, &fb)])?;
        terms.push(LindbladTerm::hamiltonian(params.delta_f, &h)?);
    }
    MasterEquation::new(lay, terms)
}

/// Entangling + noise terms plus delta_F (T_F(rho) - rho) with the plain
/// flip channel. The primed variant stays available through
/// [`locc_map_kraus`] for back-action analysis.
pub fn build_locc(params: &Scheme1Params) -> Result<MasterEquation> {
    params.validate()?;
    if params.variant != Variant::Locc {
        return Err(QdError::InvalidParameter(
            "params request the NoComm variant".into(),
        ));
    }
    let lay = layout();
    let mut terms = Vec::new();
    for pair in ["s1", "s2"] {
        terms.extend(entangling_terms(&lay, params.r, params.gamma, pair)?);
    }
    terms.extend(source_noise(params, &lay)?);
    if params.delta_f > 0.0 {
        let kraus = locc_map_kraus(&lay, false)?;
        terms.push(LindbladTerm::channel(params.delta_f, kraus)?);
    }
    MasterEquation::new(lay, terms)
}

/// Steady-state observables of one grid point; `error` carries failures
/// (for example steady-state degeneracy) without aborting the scan.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub params: Scheme1Params,
    pub eof_target: f64,
    pub eof_s1: f64,
    pub entropy_s1: f64,
    pub logneg_source: f64,
    pub ss_residual: f64,
    pub error: Option<String>,
}

/// Steady state and entanglement observables for every grid point.
pub fn scan(grid: &[Scheme1Params], seed: u64) -> Result<Vec<ScanPoint>> {
    if grid.is_empty() {
        return Err(QdError::InvalidParameter("empty scan grid".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    for (i, params) in grid.iter().enumerate() {
        out.push(scan_point(params, seed.wrapping_add(i as u64)));
    }
    Ok(out)
}

fn scan_point(params: &Scheme1Params, seed: u64) -> ScanPoint {
    let fail = |msg: String| ScanPoint {
        params: *params,
        eof_target: f64::NAN,
        eof_s1: f64::NAN,
        entropy_s1: f64::NAN,
        logneg_source: f64::NAN,
        ss_residual: f64::NAN,
        error: Some(msg),
    };
    let me = match params.variant {
        Variant::NoComm => build_no_comm(params),
        Variant::Locc => build_locc(params),
    };
    let me = match me {
        Ok(me) => me,
        Err(e) => return fail(e.to_string()),
    };
    let ss = match me.steady_state(seed) {
        Ok(ss) => ss,
        Err(e) => return fail(e.to_string()),
    };
    match observables(&me, &ss) {
        Ok(mut point) => {
            point.params = *params;
            point
        }
        Err(e) => fail(e.to_string()),
    }
}

fn observables(me: &MasterEquation, ss: &DensityMatrix) -> Result<ScanPoint> {
    let target = qops::partial_trace(ss, &["t_a", "t_b"])?;
    let s1 = qops::partial_trace(ss, &["s1_a", "s1_b"])?;
    let sources = qops::partial_trace(ss, &["s1_a", "s1_b", "s2_a", "s2_b"])?;
    Ok(ScanPoint {
        params: Scheme1Params {
            r: 0.0,
            gamma: 0.0,
            delta_f: 0.0,
            eps_c: 0.0,
            eps_h: 0.0,
            eps_d: 0.0,
            variant: Variant::NoComm,
            asymmetric_dephasing: false,
        },
        eof_target: qops::eof(&target)?,
        eof_s1: qops::eof(&s1)?,
        entropy_s1: qops::entropy(&s1)?,
        logneg_source: qops::log_negativity(&sources, &["s1_a", "s2_a"])?,
        ss_residual: trace_norm(&me.rhs(&ss.data().view()).view()),
        error: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouville::StepControl;
    use crate::qops::{
        computational_ket, dag, max_abs, max_abs_diff, omega_projector, partial_trace,
    };
    use crate::random;

    fn base_params(variant: Variant) -> Scheme1Params {
        Scheme1Params {
            r: 0.4,
            gamma: 1.0,
            delta_f: 0.1,
            eps_c: 0.0,
            eps_h: 0.0,
            eps_d: 0.0,
            variant,
            asymmetric_dephasing: false,
        }
    }

    #[test]
    fn entangling_jumps_reduce_to_cooling_at_r_zero() {
        let lay = layout();
        let [a, b] = entangling_jumps(&lay, 0.0, "s1").unwrap();
        let expect_a = embed(sigma_minus().view(), &lay, &["s1_a"]).unwrap();
        let expect_b = embed(sigma_minus().view(), &lay, &["s1_b"]).unwrap();
        assert!(max_abs_diff(&a.data().view(), &expect_a.data().view()) < 1e-15);
        assert!(max_abs_diff(&b.data().view(), &expect_b.data().view()) < 1e-15);
    }

    #[test]
    fn dark_state_is_annihilated_by_both_jumps() {
        let lay = SystemLayout::qubits(&["p_a", "p_b"]).unwrap();
        for r in [0.1, 0.5, 1.0, 2.0] {
            let [a, b] = entangling_jumps(&lay, r, "p").unwrap();
            let psi = dark_state(r);
            for op in [&a, &b] {
                let out = op.data().dot(&psi);
                let norm: f64 = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!(norm < 1e-14, "r = {r}: residual {norm}");
            }
        }
        // lambda value at r = 0.5
        let psi = dark_state(0.5);
        let lambda = -(psi[3] / psi[0]).re;
        assert!((lambda - 0.5f64.tanh()).abs() < 1e-15);
        assert!((lambda - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn entangler_steady_state_is_the_dark_state() {
        let lay = SystemLayout::qubits(&["p_a", "p_b"]).unwrap();
        let r = 0.5;
        let me = MasterEquation::new(
            lay.clone(),
            entangling_terms(&lay, r, 1.0, "p").unwrap(),
        )
        .unwrap();
        let ss = me.steady_state(3).unwrap();
        let psi = dark_state(r);
        let expect = DensityMatrix::from_pure(lay, psi.view()).unwrap();
        assert!(max_abs_diff(&ss.data().view(), &expect.data().view()) < 1e-9);
    }

    #[test]
    fn noise_terms_zero_rates_give_empty_list() {
        let lay = SystemLayout::qubits(&["p_a", "p_b"]).unwrap();
        let terms = noise_terms(&lay, "p", 0.0, 0.0, 0.0).unwrap();
        assert!(terms.is_empty());
        assert!(noise_terms(&lay, "p", -0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn pure_cooling_relaxes_to_the_ground_state() {
        let lay = SystemLayout::qubits(&["p_a", "p_b"]).unwrap();
        let me = MasterEquation::new(
            lay.clone(),
            noise_terms(&lay, "p", 0.8, 0.0, 0.0).unwrap(),
        )
        .unwrap();
        let ss = me.steady_state(9).unwrap();
        let ground = DensityMatrix::from_pure(lay, computational_ket(&[0, 0]).view()).unwrap();
        assert!(max_abs_diff(&ss.data().view(), &ground.data().view()) < 1e-9);
    }

    #[test]
    fn balanced_heating_and_cooling_give_the_mixed_state() {
        let lay = SystemLayout::qubits(&["p_a", "p_b"]).unwrap();
        let me = MasterEquation::new(
            lay.clone(),
            noise_terms(&lay, "p", 0.6, 0.6, 0.0).unwrap(),
        )
        .unwrap();
        let ss = me.steady_state(12).unwrap();
        let mixed = DensityMatrix::maximally_mixed(lay);
        assert!(max_abs_diff(&ss.data().view(), &mixed.data().view()) < 1e-9);
    }

    #[test]
    fn flip_matrix_identities() {
        let f = flip_local();
        // definition on the encoded subspace: |0_t, 1-hat> -> |1_t, 0-hat>
        let input = computational_ket(&[0, 1, 0]);
        let expect = computational_ket(&[1, 0, 1]);
        let out = f.dot(&input);
        assert!(out
            .iter()
            .zip(expect.iter())
            .all(|(a, b)| (a - b).norm() < 1e-15));
        // zero outside the one-excitation source subspace
        let out = f.dot(&computational_ket(&[0, 0, 0]));
        assert!(out.iter().all(|z| z.norm() < 1e-15));
        // Hermitian, and F^3 = F
        assert!(max_abs_diff(&f.view(), &dag(&f.view()).view()) < 1e-15);
        let f3 = f.dot(&f).dot(&f);
        assert!(max_abs_diff(&f3.view(), &f.view()) < 1e-15);
        // F^2 is the projector target (x) one-excitation
        let f2 = f.dot(&f);
        let expect = kron(&identity(2), &one_excitation_projector());
        assert!(max_abs_diff(&f2.view(), &expect.view()) < 1e-15);
    }

    #[test]
    fn embedded_flips_commute_across_sides() {
        let lay = layout();
        let fa = flip_hamiltonian(&lay, Side::Alice).unwrap();
        let fb = flip_hamiltonian(&lay, Side::Bob).unwrap();
        let ab = fa.data().dot(fb.data());
        let ba = fb.data().dot(fa.data());
        assert!(max_abs_diff(&ab.view(), &ba.view()) < 1e-15);
    }

    #[test]
    fn twirl_kraus_is_complete_and_depolarizes_the_target() {
        let lay = layout();
        let kraus = twirl_kraus(&lay).unwrap();
        assert_eq!(kraus.len(), 16);
        assert!(kraus_completeness_defect(&kraus) < 1e-14);
        // acting on sources (x) target it wipes only the target
        let mut rng = random::rng(40);
        let rho = random::random_density(&lay, &mut rng);
        let mut out = Array2::<C64>::zeros((64, 64));
        for k in &kraus {
            out += &k.dot(rho.data()).dot(&dag(&k.view()));
        }
        let out_state = DensityMatrix::new(lay.clone(), out).unwrap();
        let target = partial_trace(&out_state, &["t_a", "t_b"]).unwrap();
        let mixed = identity(4).mapv(|z| z * 0.25);
        assert!(max_abs_diff(&target.data().view(), &mixed.view()) < 1e-12);
        let src_before = partial_trace(&rho, &["s1_a", "s1_b", "s2_a", "s2_b"]).unwrap();
        let src_after =
            partial_trace(&out_state, &["s1_a", "s1_b", "s2_a", "s2_b"]).unwrap();
        assert!(
            max_abs_diff(&src_before.data().view(), &src_after.data().view()) < 1e-12
        );
    }

    #[test]
    fn flip_channel_kraus_sets_are_complete() {
        let lay = layout();
        let plain = locc_map_kraus(&lay, false).unwrap();
        assert_eq!(plain.len(), 4);
        assert!(kraus_completeness_defect(&plain) < tol::KRAUS_STRICT);
        let primed = locc_map_kraus(&lay, true).unwrap();
        assert_eq!(primed.len(), 64);
        assert!(kraus_completeness_defect(&primed) < tol::KRAUS_STRICT);
    }

    fn apply_channel(kraus: &[Array2<C64>], rho: &Array2<C64>) -> Array2<C64> {
        let n = rho.nrows();
        let mut out = Array2::<C64>::zeros((n, n));
        for k in kraus {
            out += &k.dot(rho).dot(&dag(&k.view()));
        }
        out
    }

    /// Physical state of the encoded source Bell pair: the two-excitation
    /// wave (|0-hat 0-hat> + |1-hat 1-hat>)/sqrt(2) over (s1_a s1_b s2_a s2_b).
    fn encoded_omega_sources() -> Array1<C64> {
        // |0-hat>_A|0-hat>_B = |s1_a=0 s1_b=0 s2_a=1 s2_b=1>, and
        // |1-hat>_A|1-hat>_B = |1 1 0 0>
        let v = computational_ket(&[0, 0, 1, 1]) + computational_ket(&[1, 1, 0, 0]);
        v.mapv(|z| z / 2.0f64.sqrt())
    }

    #[test]
    fn flip_channel_writes_the_encoded_bell_state_onto_the_target() {
        let lay = layout();
        let kraus = locc_map_kraus(&lay, false).unwrap();
        let mut rng = random::rng(64);
        for _ in 0..4 {
            let src = encoded_omega_sources();
            let target = random::random_density(
                &SystemLayout::qubits(&["t_a", "t_b"]).unwrap(),
                &mut rng,
            );
            let src_rho = qops::outer(src.view(), src.view());
            // kron over (sources, target) matches the layout order
            let full = kron(&src_rho, target.data());
            let out = apply_channel(&kraus, &full);
            let out_state = DensityMatrix::new(lay.clone(), out).unwrap();
            let t_out = partial_trace(&out_state, &["t_a", "t_b"]).unwrap();
            assert!(
                max_abs_diff(&t_out.data().view(), &omega_projector().view()) < 1e-12
            );
        }
    }

    #[test]
    fn flip_channel_acts_as_identity_outside_both_excitation_windows() {
        let lay = layout();
        let kraus = locc_map_kraus(&lay, false).unwrap();
        let mut rng = random::rng(65);
        // source sides in the zero- and two-excitation sectors
        for bits in [[0u8, 0, 0, 0], [1, 1, 1, 1], [0, 1, 0, 1]] {
            // bits order: s1_a, s1_b, s2_a, s2_b; choose sectors where each
            // side has 0 or 2 excitations
            let side_a = bits[0] + bits[2];
            let side_b = bits[1] + bits[3];
            if side_a == 1 || side_b == 1 {
                continue;
            }
            let src = computational_ket(&bits);
            let target = random::random_density(
                &SystemLayout::qubits(&["t_a", "t_b"]).unwrap(),
                &mut rng,
            );
            let full = kron(&qops::outer(src.view(), src.view()), target.data());
            let out = apply_channel(&kraus, &full);
            assert!(max_abs_diff(&out.view(), &full.view()) < 1e-13);
        }
    }

    #[test]
    fn primed_flip_back_action_is_target_independent() {
        let lay = layout();
        let kraus = locc_map_kraus(&lay, true).unwrap();
        let mut rng = random::rng(66);
        let src_lay = SystemLayout::qubits(&["s1_a", "s1_b", "s2_a", "s2_b"]).unwrap();
        let t_lay = SystemLayout::qubits(&["t_a", "t_b"]).unwrap();
        let src = random::random_density(&src_lay, &mut rng);
        let mut reference: Option<Array2<C64>> = None;
        for _ in 0..5 {
            let target = random::random_density(&t_lay, &mut rng);
            let full = kron(src.data(), target.data());
            let out = apply_channel(&kraus, &full);
            let out_state = DensityMatrix::new(lay.clone(), out).unwrap();
            let back = partial_trace(&out_state, &["s1_a", "s1_b", "s2_a", "s2_b"])
                .unwrap();
            match &reference {
                None => reference = Some(back.data().clone()),
                Some(r) => {
                    assert!(max_abs_diff(&back.data().view(), &r.view()) < 1e-10)
                }
            }
        }
    }

    #[test]
    fn unprimed_flip_back_action_depends_on_the_target() {
        // the contrast case for the primed variant
        let lay = layout();
        let kraus = locc_map_kraus(&lay, false).unwrap();
        let src = {
            let src_lay = SystemLayout::qubits(&["s1_a", "s1_b", "s2_a", "s2_b"]).unwrap();
            let mut rng = random::rng(67);
            random::random_density(&src_lay, &mut rng)
        };
        let t0 = qops::outer(computational_ket(&[0, 0]).view(), computational_ket(&[0, 0]).view());
        let t1 = qops::outer(computational_ket(&[1, 1]).view(), computational_ket(&[1, 1]).view());
        let backs: Vec<Array2<C64>> = [t0, t1]
            .iter()
            .map(|t| {
                let full = kron(src.data(), t);
                let out = apply_channel(&kraus, &full);
                let out_state = DensityMatrix::new(lay.clone(), out).unwrap();
                partial_trace(&out_state, &["s1_a", "s1_b", "s2_a", "s2_b"])
                    .unwrap()
                    .data()
                    .clone()
            })
            .collect();
        assert!(max_abs_diff(&backs[0].view(), &backs[1].view()) > 1e-4);
    }

    #[test]
    fn no_comm_generator_annihilates_the_double_dark_state() {
        let params = base_params(Variant::NoComm);
        // entangling terms only: build with delta_f = 0 and no noise, then
        // check the combined dark state of both pairs
        let me = build_no_comm(&Scheme1Params {
            delta_f: 0.0,
            ..params
        })
        .unwrap();
        let lay = layout();
        // |psi>_{s1} (x) |psi>_{s2} (x) |00>_t in layout qubit order
        let psi = dark_state(params.r);
        let mut full = Array1::<C64>::zeros(64);
        for (i1, c1) in psi.iter().enumerate() {
            for (i2, c2) in psi.iter().enumerate() {
                // i1 over (s1_a, s1_b), i2 over (s2_a, s2_b); interleave to
                // layout order s1_a s1_b s2_a s2_b t_a t_b
                let idx = (i1 << 4) | (i2 << 2);
                full[idx] = c1 * c2;
            }
        }
        let rho = DensityMatrix::from_pure(lay, full.view()).unwrap();
        let resid = me.rhs(&rho.data().view());
        assert!(max_abs(&resid.view()) < 1e-10);
    }

    #[test]
    fn no_comm_without_coupling_leaves_the_target_alone() {
        let params = Scheme1Params {
            delta_f: 0.0,
            eps_c: 0.2,
            eps_h: 0.1,
            eps_d: 0.15,
            ..base_params(Variant::NoComm)
        };
        let me = build_no_comm(&params).unwrap();
        let lay = layout();
        let mut rng = random::rng(80);
        let src_lay = SystemLayout::qubits(&["s1_a", "s1_b", "s2_a", "s2_b"]).unwrap();
        let t_lay = SystemLayout::qubits(&["t_a", "t_b"]).unwrap();
        let src = random::random_density(&src_lay, &mut rng);
        let target = random::random_density(&t_lay, &mut rng);
        let rho0 = DensityMatrix::new(lay, kron(src.data(), target.data())).unwrap();
        let states = me
            .evolve(&rho0, &[0.4, 1.1], &StepControl::default())
            .unwrap();
        for s in &states {
            let t_red = partial_trace(s, &["t_a", "t_b"]).unwrap();
            assert!(
                max_abs_diff(&t_red.data().view(), &target.data().view()) < 1e-8
            );
        }
    }

    #[test]
    fn builders_enforce_the_variant_tag() {
        assert!(build_no_comm(&base_params(Variant::Locc)).is_err());
        assert!(build_locc(&base_params(Variant::NoComm)).is_err());
        let bad = Scheme1Params {
            gamma: -1.0,
            ..base_params(Variant::NoComm)
        };
        assert!(build_no_comm(&bad).is_err());
    }

    #[test]
    fn scan_rejects_an_empty_grid() {
        assert!(scan(&[], 1).is_err());
    }

    #[test]
    fn asymmetric_dephasing_touches_only_the_listed_qubits() {
        let params = Scheme1Params {
            eps_d: 0.5,
            asymmetric_dephasing: true,
            delta_f: 0.0,
            gamma: 0.0,
            ..base_params(Variant::NoComm)
        };
        let me = build_no_comm(&params).unwrap();
        // two dephasing jumps in total
        assert_eq!(me.terms().len(), 2);
    }
}
