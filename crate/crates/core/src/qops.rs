//! Dense complex operator algebra on labeled tensor products of qubits and
//! finite registers, plus the standard two-qubit entanglement measures.
//!
//! Conventions used throughout the crate:
//! - computational basis, factor order = layout order, first factor most
//!   significant (so `kron(a, b)` puts `a` on the first factor);
//! - `Omega` projects onto (|00> + |11>)/sqrt(2).

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Eig, EigValsh, SVD, UPLO};
use num_complex::Complex64;

use crate::error::{QdError, Result};
use crate::tol;

pub type C64 = Complex64;

pub use ndarray::linalg::kron;

/// Ordered list of labeled tensor factors; the canonical basis order for every
/// operator and state built against it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemLayout {
    factors: Vec<(String, usize)>,
}

impl SystemLayout {
    pub fn new<L: Into<String>>(factors: impl IntoIterator<Item = (L, usize)>) -> Result<Self> {
        let factors: Vec<(String, usize)> =
            factors.into_iter().map(|(l, d)| (l.into(), d)).collect();
        if factors.is_empty() {
            return Err(QdError::InvalidParameter("layout has no factors".into()));
        }
        for (i, (label, dim)) in factors.iter().enumerate() {
            if *dim == 0 {
                return Err(QdError::InvalidParameter(format!(
                    "factor `{label}` has dimension 0"
                )));
            }
            if factors[..i].iter().any(|(l, _)| l == label) {
                return Err(QdError::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { factors })
    }

    /// All factors are qubits.
    pub fn qubits(labels: &[&str]) -> Result<Self> {
        Self::new(labels.iter().map(|&l| (l, 2usize)))
    }

    pub fn total_dim(&self) -> usize {
        self.factors.iter().map(|(_, d)| d).product()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.factors.iter().position(|(l, _)| l == label)
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.factors
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| *d)
    }

    /// Global index stride of each factor (first factor most significant).
    pub fn strides(&self) -> Vec<usize> {
        let n = self.factors.len();
        let mut s = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.factors[i + 1].1;
        }
        s
    }

    fn positions(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for &l in labels {
            let p = self
                .position(l)
                .ok_or_else(|| QdError::UnknownLabel(l.into()))?;
            if out.contains(&p) {
                return Err(QdError::DuplicateLabel(l.into()));
            }
            out.push(p);
        }
        Ok(out)
    }
}

/// Offsets of every mixed-radix tuple over `dims` against global `strides`.
fn offsets(dims: &[usize], strides: &[usize]) -> Vec<usize> {
    let total: usize = dims.iter().product::<usize>().max(1);
    let mut out = vec![0usize; total];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut rem = idx;
        let mut off = 0;
        for k in (0..dims.len()).rev() {
            off += (rem % dims[k]) * strides[k];
            rem /= dims[k];
        }
        *slot = off;
    }
    out
}

/// Hermitian, trace-1, positive matrix over a layout.
///
/// Construction checks Hermiticity and trace at 1e-9. Positivity (eigenvalues
/// >= -1e-9) is checked eagerly up to dimension 64; call [`min_eigenvalue`]
/// for larger systems.
///
/// [`min_eigenvalue`]: DensityMatrix::min_eigenvalue
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    layout: SystemLayout,
    data: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(layout: SystemLayout, data: Array2<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if data.nrows() != n || data.ncols() != n {
            return Err(QdError::DimensionMismatch(format!(
                "state is {}x{}, layout dimension is {n}",
                data.nrows(),
                data.ncols()
            )));
        }
        let asym = hermiticity_defect(&data.view());
        if asym > tol::STATE_CHECK {
            return Err(QdError::NotHermitian(asym));
        }
        let tr = trace(&data.view());
        if (tr.re - 1.0).abs() > tol::STATE_CHECK || tr.im.abs() > tol::STATE_CHECK {
            return Err(QdError::BadTrace((tr - 1.0).norm()));
        }
        if n <= 64 {
            let evs = data.eigvalsh(UPLO::Lower)?;
            let min = evs.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < tol::EIGENVALUE_FLOOR {
                return Err(QdError::NotPositive(min));
            }
        }
        Ok(Self { layout, data })
    }

    /// Normalized projector |psi><psi|. Positive by construction, so no
    /// eigenvalue check regardless of dimension.
    pub fn from_pure(layout: SystemLayout, psi: ArrayView1<C64>) -> Result<Self> {
        let n = layout.total_dim();
        if psi.len() != n {
            return Err(QdError::DimensionMismatch(format!(
                "vector length {} vs layout dimension {n}",
                psi.len()
            )));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QdError::InvalidParameter("zero state vector".into()));
        }
        let v: Array1<C64> = psi.map(|z| z / norm);
        let mut data = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                data[[i, j]] = v[i] * v[j].conj();
            }
        }
        Ok(Self { layout, data })
    }

    pub fn maximally_mixed(layout: SystemLayout) -> Self {
        let n = layout.total_dim();
        let data = Array2::eye(n).mapv(|z: C64| z / n as f64);
        Self { layout, data }
    }

    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let evs = self.data.eigvalsh(UPLO::Lower)?;
        Ok(evs.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// An operator acting as identity outside its declared support.
#[derive(Debug, Clone)]
pub struct Operator {
    layout: SystemLayout,
    data: Array2<C64>,
    support: Vec<String>,
}

impl Operator {
    pub fn layout(&self) -> &SystemLayout {
        &self.layout
    }

    pub fn data(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    /// Real-weighted sum of operators over one layout; support is the union.
    pub fn linear_combination(parts: &[(f64, &Operator)]) -> Result<Operator> {
        let first = parts
            .first()
            .ok_or_else(|| QdError::InvalidParameter("empty combination".into()))?;
        let layout = first.1.layout.clone();
        let n = layout.total_dim();
        let mut data = Array2::<C64>::zeros((n, n));
        let mut support: Vec<String> = Vec::new();
        for (w, op) in parts {
            if op.layout != layout {
                return Err(QdError::DimensionMismatch(
                    "operators live on different layouts".into(),
                ));
            }
            data.scaled_add(C64::new(*w, 0.0), &op.data);
            for s in &op.support {
                if !support.contains(s) {
                    support.push(s.clone());
                }
            }
        }
        Ok(Operator {
            layout,
            data,
            support,
        })
    }
}

/// Embed a local matrix on `targets` (in the given order) into the layout,
/// acting as identity elsewhere. Basis-consistent with layout order even when
/// `targets` are not adjacent or not in layout order.
pub fn embed(local: ArrayView2<C64>, layout: &SystemLayout, targets: &[&str]) -> Result<Operator> {
    let tpos = layout.positions(targets)?;
    let tdims: Vec<usize> = tpos.iter().map(|&p| layout.factors[p].1).collect();
    let ldim: usize = tdims.iter().product();
    if local.nrows() != ldim || local.ncols() != ldim {
        return Err(QdError::DimensionMismatch(format!(
            "local operator is {}x{}, target dims give {ldim}",
            local.nrows(),
            local.ncols()
        )));
    }
    let strides = layout.strides();
    let tstrides: Vec<usize> = tpos.iter().map(|&p| strides[p]).collect();
    let rest: Vec<usize> = (0..layout.len()).filter(|p| !tpos.contains(p)).collect();
    let rdims: Vec<usize> = rest.iter().map(|&p| layout.factors[p].1).collect();
    let rstrides: Vec<usize> = rest.iter().map(|&p| strides[p]).collect();

    let loff = offsets(&tdims, &tstrides);
    let roff = offsets(&rdims, &rstrides);

    let n = layout.total_dim();
    let mut data = Array2::<C64>::zeros((n, n));
    for lr in 0..ldim {
        for lc in 0..ldim {
            let v = local[[lr, lc]];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            for &ro in &roff {
                data[[loff[lr] + ro, loff[lc] + ro]] = v;
            }
        }
    }
    Ok(Operator {
        layout: layout.clone(),
        data,
        support: targets.iter().map(|s| s.to_string()).collect(),
    })
}

/// Reduced state on `keep` (result factors in layout order). Trace preserving.
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let data = partial_trace_raw(&rho.data.view(), &rho.layout, keep)?;
    let mut kpos = rho.layout.positions(keep)?;
    kpos.sort_unstable();
    let layout = SystemLayout::new(kpos.iter().map(|&p| {
        let (l, d) = &rho.layout.factors[p];
        (l.clone(), *d)
    }))?;
    DensityMatrix::new(layout, data)
}

/// Partial trace on raw data; kept factors ordered by layout position.
pub fn partial_trace_raw(
    data: &ArrayView2<C64>,
    layout: &SystemLayout,
    keep: &[&str],
) -> Result<Array2<C64>> {
    let mut kpos = layout.positions(keep)?;
    kpos.sort_unstable();
    let strides = layout.strides();
    let kdims: Vec<usize> = kpos.iter().map(|&p| layout.factors[p].1).collect();
    let kstrides: Vec<usize> = kpos.iter().map(|&p| strides[p]).collect();
    let tpos: Vec<usize> = (0..layout.len()).filter(|p| !kpos.contains(p)).collect();
    let tdims: Vec<usize> = tpos.iter().map(|&p| layout.factors[p].1).collect();
    let tstrides: Vec<usize> = tpos.iter().map(|&p| strides[p]).collect();

    let koff = offsets(&kdims, &kstrides);
    let toff = offsets(&tdims, &tstrides);
    let k = koff.len();
    let mut out = Array2::<C64>::zeros((k, k));
    for (r, &orr) in koff.iter().enumerate() {
        for (c, &occ) in koff.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &toff {
                acc += data[[orr + t, occ + t]];
            }
            out[[r, c]] = acc;
        }
    }
    Ok(out)
}

/// Transpose the indices of the `part` factors only. The result of a valid
/// state need not be positive, so raw data is returned.
pub fn partial_transpose(
    data: &ArrayView2<C64>,
    layout: &SystemLayout,
    part: &[&str],
) -> Result<Array2<C64>> {
    let ppos = layout.positions(part)?;
    let strides = layout.strides();
    let pdims: Vec<usize> = ppos.iter().map(|&p| layout.factors[p].1).collect();
    let pstrides: Vec<usize> = ppos.iter().map(|&p| strides[p]).collect();
    let rest: Vec<usize> = (0..layout.len()).filter(|p| !ppos.contains(p)).collect();
    let rdims: Vec<usize> = rest.iter().map(|&p| layout.factors[p].1).collect();
    let rstrides: Vec<usize> = rest.iter().map(|&p| strides[p]).collect();

    let poff = offsets(&pdims, &pstrides);
    let roff = offsets(&rdims, &rstrides);
    let n = layout.total_dim();
    if data.nrows() != n || data.ncols() != n {
        return Err(QdError::DimensionMismatch(format!(
            "matrix is {}x{}, layout dimension is {n}",
            data.nrows(),
            data.ncols()
        )));
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for &pr in &poff {
        for &pc in &poff {
            for &rr in &roff {
                for &rc in &roff {
                    // swap the part indices between row and column
                    out[[pc + rr, pr + rc]] = data[[pr + rr, pc + rc]];
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Matrix constants and small builders
// ---------------------------------------------------------------------------

pub fn identity(dim: usize) -> Array2<C64> {
    Array2::eye(dim)
}

/// Pauli matrices; index 0 is the identity.
pub fn pauli(k: usize) -> Array2<C64> {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => identity(2),
        1 => Array2::from_shape_vec((2, 2), vec![z, one, one, z]).unwrap(),
        2 => Array2::from_shape_vec((2, 2), vec![z, -i, i, z]).unwrap(),
        3 => Array2::from_shape_vec((2, 2), vec![one, z, z, -one]).unwrap(),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// |0><1|.
pub fn sigma_minus() -> Array2<C64> {
    let mut m = Array2::zeros((2, 2));
    m[[0, 1]] = C64::new(1.0, 0.0);
    m
}

/// |1><0|.
pub fn sigma_plus() -> Array2<C64> {
    let mut m = Array2::zeros((2, 2));
    m[[1, 0]] = C64::new(1.0, 0.0);
    m
}

/// |1><1| (dephasing jump).
pub fn excited_projector() -> Array2<C64> {
    let mut m = Array2::zeros((2, 2));
    m[[1, 1]] = C64::new(1.0, 0.0);
    m
}

pub fn hadamard() -> Array2<C64> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut m = Array2::zeros((2, 2));
    m[[0, 0]] = s;
    m[[0, 1]] = s;
    m[[1, 0]] = s;
    m[[1, 1]] = -s;
    m
}

/// CNOT with the first factor as control.
pub fn cnot() -> Array2<C64> {
    let mut m = Array2::zeros((4, 4));
    let one = C64::new(1.0, 0.0);
    m[[0, 0]] = one;
    m[[1, 1]] = one;
    m[[2, 3]] = one;
    m[[3, 2]] = one;
    m
}

pub fn basis_ket(dim: usize, i: usize) -> Array1<C64> {
    let mut v = Array1::zeros(dim);
    v[i] = C64::new(1.0, 0.0);
    v
}

/// Computational basis ket of qubits, first bit most significant.
pub fn computational_ket(bits: &[u8]) -> Array1<C64> {
    let mut idx = 0usize;
    for &b in bits {
        idx = idx * 2 + b as usize;
    }
    basis_ket(1 << bits.len(), idx)
}

pub fn outer(v: ArrayView1<C64>, w: ArrayView1<C64>) -> Array2<C64> {
    let mut m = Array2::zeros((v.len(), w.len()));
    for i in 0..v.len() {
        for j in 0..w.len() {
            m[[i, j]] = v[i] * w[j].conj();
        }
    }
    m
}

pub fn dag(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub fn trace(m: &ArrayView2<C64>) -> C64 {
    m.diag().sum()
}

/// Bell states (I (x) sigma_k)|Phi+>; k = 0 is (|00>+|11>)/sqrt(2).
pub fn bell_state(k: usize) -> Array1<C64> {
    let phi = computational_ket(&[0, 0]) + computational_ket(&[1, 1]);
    let id2 = identity(2);
    let op = kron(&id2, &pauli(k));
    let v = op.dot(&phi);
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

/// Projector onto (|00>+|11>)/sqrt(2).
pub fn omega_projector() -> Array2<C64> {
    let b = bell_state(0);
    outer(b.view(), b.view())
}

// ---------------------------------------------------------------------------
// Werner states and the fidelity-preserving twirl
// ---------------------------------------------------------------------------

/// f Omega + (1-f)(I - Omega)/3 on a fresh two-qubit layout ("a", "b").
pub fn werner_state(f: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&f) {
        return Err(QdError::InvalidParameter(format!(
            "werner fidelity {f} outside [0, 1]"
        )));
    }
    let layout = SystemLayout::qubits(&["a", "b"])?;
    DensityMatrix::new(layout, werner_data(f))
}

/// Raw 4x4 Werner data (no range check).
pub fn werner_data(f: f64) -> Array2<C64> {
    let om = omega_projector();
    let rest = (identity(4) - &om).mapv(|z| z * ((1.0 - f) / 3.0));
    om.mapv(|z| z * f) + rest
}

/// Overlap tr(Omega rho) of a two-qubit state.
pub fn fidelity_with_omega(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    Ok(omega_overlap(&rho.data().view()))
}

/// tr(Omega m) for raw 4x4 data.
pub fn omega_overlap(m: &ArrayView2<C64>) -> f64 {
    // <Phi+| m |Phi+> = (m00 + m03 + m30 + m33)/2
    0.5 * (m[[0, 0]] + m[[0, 3]] + m[[3, 0]] + m[[3, 3]]).re
}

/// Project a two-qubit state onto the Werner family at fixed Omega overlap.
///
/// Equals the channel that dephases in the Bell basis (correlated Paulis
/// sigma_i (x) conj(sigma_i), weight 1/4 each) and then symmetrizes the three
/// non-Omega Bell populations; both steps are mixtures of unitaries composed
/// with each other, so this is completely positive and trace preserving.
pub fn twirl_to_werner(rho: &DensityMatrix) -> Result<DensityMatrix> {
    require_two_qubits(rho)?;
    let f = omega_overlap(&rho.data().view());
    DensityMatrix::new(rho.layout().clone(), werner_data(f))
}

fn require_two_qubits(rho: &DensityMatrix) -> Result<()> {
    let ok = rho.layout().len() == 2 && rho.layout().factors().iter().all(|(_, d)| *d == 2);
    if ok {
        Ok(())
    } else {
        Err(QdError::DimensionMismatch(
            "operation requires a two-qubit state".into(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Entanglement measures
// ---------------------------------------------------------------------------

fn binary_entropy(x: f64) -> f64 {
    let mut h = 0.0;
    for p in [x, 1.0 - x] {
        if p > 1e-15 {
            h -= p * p.log2();
        }
    }
    h
}

/// Concurrence of a two-qubit state via the spin-flipped spectrum.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    require_two_qubits(rho)?;
    let yy = kron(&pauli(2), &pauli(2));
    let tilde = yy.dot(&rho.data().mapv(|z| z.conj())).dot(&yy);
    let m = rho.data().dot(&tilde);
    let (evs, _) = m.eig()?;
    let mut s: Vec<f64> = evs.iter().map(|z| z.re.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((s[0] - s[1] - s[2] - s[3]).max(0.0))
}

/// Entanglement of formation in bits.
pub fn eof(rho: &DensityMatrix) -> Result<f64> {
    let c = concurrence(rho)?;
    let x = 0.5 * (1.0 + (1.0 - c * c).max(0.0).sqrt());
    Ok(binary_entropy(x))
}

/// Negativity (sum of negative partial-transpose eigenvalues, made positive)
/// across the bipartition `part` vs the rest.
pub fn negativity(rho: &DensityMatrix, part: &[&str]) -> Result<f64> {
    let pt = partial_transpose(&rho.data().view(), rho.layout(), part)?;
    let evs = pt.eigvalsh(UPLO::Lower)?;
    let neg: f64 = evs.iter().filter(|&&e| e < 0.0).map(|e| -e).sum();
    Ok(neg)
}

/// log2 of the trace norm of the partial transpose.
pub fn log_negativity(rho: &DensityMatrix, part: &[&str]) -> Result<f64> {
    let pt = partial_transpose(&rho.data().view(), rho.layout(), part)?;
    let evs = pt.eigvalsh(UPLO::Lower)?;
    let tn: f64 = evs.iter().map(|e| e.abs()).sum();
    Ok(tn.max(1.0).log2())
}

/// Von Neumann entropy in bits.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    let evs = rho.data().eigvalsh(UPLO::Lower)?;
    let mut h = 0.0;
    for &p in evs.iter() {
        if p > 1e-15 {
            h -= p * p.log2();
        }
    }
    Ok(h)
}

// ---------------------------------------------------------------------------
// Norm helpers shared by tests and solvers
// ---------------------------------------------------------------------------

pub fn max_abs(m: &ArrayView2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        worst = worst.max((x - y).norm());
    }
    worst
}

pub fn hermiticity_defect(m: &ArrayView2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Sum of singular values.
pub fn trace_norm(m: &ArrayView2<C64>) -> f64 {
    let (_, s, _) = m.to_owned().svd(false, false).expect("svd failed");
    s.sum()
}

/// Half the trace norm of the difference.
pub fn trace_distance(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    let d = a.to_owned() - b;
    0.5 * trace_norm(&d.view())
}
