//! Dissipative classical channels and the register construction that turns
//! local dissipation plus fast classical communication into an effective
//! LOCC generator delta (T(rho) - rho) on the main system.
//!
//! The full layout is [a, b, ia, ob, ib, oa]: a 2-qubit main system and the
//! four communication registers (input/output of channel 1 from Alice to
//! Bob, then of channel 2 back). Register value 0 means "empty"; values
//! 1..n encode Alice's POVM outcome and 1..n^2 the (i, j) outcome pair.
//! All dynamics keeps the registers diagonal, so states are stored as one
//! main-system block per register configuration.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::liouville::{kraus_completeness_defect, LindbladTerm, MasterEquation};
use crate::qops::{dag, embed, identity, trace, trace_norm, C64, SystemLayout};
use crate::rk45;
use crate::tol;

/// Rates of the construction; alpha = (gamma + delta) / Gamma is the small
/// parameter of the effective-map error.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Communication rate of both classical channels.
    pub big_gamma: f64,
    /// Trigger rate of the LOCC map.
    pub delta: f64,
    /// Rate of the always-on main-system generator.
    pub gamma: f64,
    /// POVM outcomes per measurement; registers have dims n+1 and n^2+1.
    pub n_outcomes: usize,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.big_gamma > 0.0) {
            return Err(QdError::InvalidParameter(format!(
                "communication rate {} must be positive",
                self.big_gamma
            )));
        }
        for (name, v) in [("delta", self.delta), ("gamma", self.gamma)] {
            if !(v >= 0.0) {
                return Err(QdError::InvalidParameter(format!("{name} = {v} is negative")));
            }
        }
        if self.n_outcomes == 0 {
            return Err(QdError::InvalidParameter(
                "need at least one POVM outcome".into(),
            ));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        (self.gamma + self.delta) / self.big_gamma
    }
}

/// Kraus set of the one-way channel reset: an occupied source register is
/// read out, its value written onto the destination (overwriting anything
/// there), and the source emptied. An empty source leaves everything alone,
/// which makes the map idempotent.
pub fn channel_kraus(
    layout: &SystemLayout,
    src: &str,
    dst: &str,
) -> Result<Vec<Array2<C64>>> {
    let ds = layout
        .dim_of(src)
        .ok_or_else(|| QdError::UnknownLabel(src.into()))?;
    let dd = layout
        .dim_of(dst)
        .ok_or_else(|| QdError::UnknownLabel(dst.into()))?;
    let one = C64::new(1.0, 0.0);
    let mut kraus = Vec::new();
    for i in 1..ds {
        if i >= dd {
            return Err(QdError::InvalidParameter(format!(
                "source value {i} does not fit into destination of dim {dd}"
            )));
        }
        for j in 0..dd {
            let mut s = Array2::<C64>::zeros((ds, ds));
            s[[0, i]] = one;
            let mut d = Array2::<C64>::zeros((dd, dd));
            d[[i, j]] = one;
            let op = embed(s.view(), layout, &[src])?
                .data()
                .dot(embed(d.view(), layout, &[dst])?.data());
            kraus.push(op);
        }
    }
    let mut empty = Array2::<C64>::zeros((ds, ds));
    empty[[0, 0]] = one;
    kraus.push(embed(empty.view(), layout, &[src])?.data().clone());
    Ok(kraus)
}

/// The channel as a Lindblad term rate (T(rho) - rho).
pub fn channel_generator(
    layout: &SystemLayout,
    src: &str,
    dst: &str,
    rate: f64,
) -> Result<LindbladTerm> {
    LindbladTerm::channel(rate, channel_kraus(layout, src, dst)?)
}

/// Coarse register-occupation classes: the index position of the leftmost
/// occupied register in (I_a, O_b, I_b, O_a) order; x marks the occupied
/// position, z stands for any value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupationVector {
    pub p_0000: f64,
    pub p_000x: f64,
    pub p_00xz: f64,
    pub p_0xzz: f64,
    pub p_xzzz: f64,
}

impl OccupationVector {
    pub fn as_array(&self) -> [f64; 5] {
        [self.p_0000, self.p_000x, self.p_00xz, self.p_0xzz, self.p_xzzz]
    }

    pub fn from_array(p: [f64; 5]) -> Self {
        OccupationVector {
            p_0000: p[0],
            p_000x: p[1],
            p_00xz: p[2],
            p_0xzz: p[3],
            p_xzzz: p[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.as_array();
        for v in p {
            if !(-1e-10..=1.0 + 1e-10).contains(&v) {
                return Err(QdError::InvalidParameter(format!(
                    "occupation probability {v} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(QdError::InvalidParameter(format!(
                "occupation probabilities sum to {sum}"
            )));
        }
        Ok(())
    }
}

/// Closed five-class rate equations. The only inflow to the top class is a
/// fresh POVM start; each communication step moves the excitation one
/// register to the right at the channel rate.
pub fn occupation_rhs(p: &OccupationVector, delta: f64, big_gamma: f64) -> [f64; 5] {
    let g = big_gamma;
    [
        -delta * p.p_0000 + g * p.p_000x,
        -(delta + g) * p.p_000x + g * p.p_00xz,
        -(delta + g) * p.p_00xz + g * p.p_0xzz,
        -(delta + g) * p.p_0xzz + g * p.p_xzzz,
        -g * p.p_xzzz + delta * (p.p_0000 + p.p_000x + p.p_00xz + p.p_0xzz),
    ]
}

/// Steady state of the five-class system.
pub fn occupation_steady(delta: f64, big_gamma: f64) -> OccupationVector {
    let g = big_gamma;
    let s = g + delta;
    OccupationVector {
        p_0000: g.powi(4) / s.powi(4),
        p_000x: delta * g.powi(3) / s.powi(4),
        p_00xz: delta * g.powi(2) / s.powi(3),
        p_0xzz: delta * g / s.powi(2),
        p_xzzz: delta / s,
    }
}

/// Integrate the five-class system.
pub fn occupation_evolve(
    p0: &OccupationVector,
    delta: f64,
    big_gamma: f64,
    t: f64,
) -> Result<OccupationVector> {
    let y0 = Array1::from_iter(p0.as_array().iter().map(|&v| C64::new(v, 0.0)));
    let rhs = |_t: f64, y: &ArrayView1<C64>| {
        let p = OccupationVector::from_array([y[0].re, y[1].re, y[2].re, y[3].re, y[4].re]);
        Array1::from_iter(
            occupation_rhs(&p, delta, big_gamma)
                .iter()
                .map(|&v| C64::new(v, 0.0)),
        )
    };
    type NoHook = fn(&mut Array1<C64>);
    let (y, _) = rk45::integrate(rhs, y0, 0.0, t, 1e-12, 1e-14, None::<NoHook>)?;
    Ok(OccupationVector::from_array([
        y[0].re, y[1].re, y[2].re, y[3].re, y[4].re,
    ]))
}

/// A one-round LOCC protocol: Alice measures (A_i), Bob measures
/// conditioned on her outcome (B^i_j), Alice closes with a completely
/// positive map per outcome pair (Kraus C^{ij}_k). All operators act on
/// the full main system.
#[derive(Debug, Clone)]
pub struct LoccProtocol {
    alice: Vec<Array2<C64>>,
    bob: Vec<Vec<Array2<C64>>>,
    alice_final: Vec<Vec<Vec<Array2<C64>>>>,
}

impl LoccProtocol {
    pub fn new(
        alice: Vec<Array2<C64>>,
        bob: Vec<Vec<Array2<C64>>>,
        alice_final: Vec<Vec<Vec<Array2<C64>>>>,
    ) -> Result<Self> {
        let n = alice.len();
        if n == 0 || bob.len() != n || alice_final.len() != n {
            return Err(QdError::InvalidParameter(
                "POVM stage counts do not match".into(),
            ));
        }
        let dim = alice[0].nrows();
        let complete = |ops: &[Array2<C64>]| -> Result<()> {
            for op in ops {
                if op.nrows() != dim || op.ncols() != dim {
                    return Err(QdError::DimensionMismatch(format!(
                        "protocol operator is {}x{}, expected {dim}x{dim}",
                        op.nrows(),
                        op.ncols()
                    )));
                }
            }
            let defect = kraus_completeness_defect(ops);
            if defect > tol::KRAUS_BUILD {
                return Err(QdError::KrausIncomplete(defect));
            }
            Ok(())
        };
        complete(&alice)?;
        for row in &bob {
            if row.len() != n {
                return Err(QdError::InvalidParameter(
                    "Bob needs n outcomes per Alice outcome".into(),
                ));
            }
            complete(row)?;
        }
        for row in &alice_final {
            if row.len() != n {
                return Err(QdError::InvalidParameter(
                    "final maps need n entries per Alice outcome".into(),
                ));
            }
            for kraus in row {
                complete(kraus)?;
            }
        }
        Ok(LoccProtocol {
            alice,
            bob,
            alice_final,
        })
    }

    pub fn n_outcomes(&self) -> usize {
        self.alice.len()
    }

    pub fn main_dim(&self) -> usize {
        self.alice[0].nrows()
    }

    /// The ideal one-round map T(rho).
    pub fn apply(&self, rho: &ArrayView2<C64>) -> Array2<C64> {
        let n = self.n_outcomes();
        let mut out = Array2::<C64>::zeros(rho.raw_dim());
        for i in 0..n {
            for j in 0..n {
                let m = self.bob[i][j].dot(&self.alice[i]);
                let mid = m.dot(rho).dot(&dag(&m.view()));
                for c in &self.alice_final[i][j] {
                    out += &c.dot(&mid).dot(&dag(&c.view()));
                }
            }
        }
        out
    }
}

fn kron2(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    ndarray::linalg::kron(a, b)
}

/// Computational measurement at Alice, a basis choice at Bob that depends
/// on her message, and a Pauli correction depending on both outcomes.
pub fn conditional_pauli_protocol() -> LoccProtocol {
    let one = C64::new(1.0, 0.0);
    let half = C64::new(0.5, 0.0);
    let id = identity(2);
    let p0 = Array2::from_shape_fn((2, 2), |(r, c)| if r == 0 && c == 0 { one } else { 0.0.into() });
    let p1 = Array2::from_shape_fn((2, 2), |(r, c)| if r == 1 && c == 1 { one } else { 0.0.into() });
    let plus = Array2::from_elem((2, 2), half);
    let minus = Array2::from_shape_fn((2, 2), |(r, c)| if r == c { half } else { -half });
    let x = crate::qops::pauli(1);
    let z = crate::qops::pauli(3);
    let alice = vec![kron2(&p0, &id), kron2(&p1, &id)];
    let bob = vec![
        vec![kron2(&id, &plus), kron2(&id, &minus)],
        vec![kron2(&id, &p0), kron2(&id, &p1)],
    ];
    let unitaries = [
        [identity(2), z.clone()],
        [x.clone(), x.dot(&z)],
    ];
    let alice_final = unitaries
        .iter()
        .map(|row| row.iter().map(|u| vec![kron2(u, &id)]).collect())
        .collect();
    LoccProtocol::new(alice, bob, alice_final).expect("static protocol is valid")
}

/// One deterministic unitary per side and no conditioning; the registers
/// still cycle, but there is no cross-round measurement interference.
pub fn deterministic_unitary_protocol() -> LoccProtocol {
    let h = crate::qops::hadamard();
    let id = identity(2);
    let alice = vec![kron2(&h, &id)];
    let bob = vec![vec![kron2(&id, &h)]];
    let alice_final = vec![vec![vec![identity(4)]]];
    LoccProtocol::new(alice, bob, alice_final).expect("static protocol is valid")
}

/// Two-qubit main-system layout.
pub fn main_layout() -> SystemLayout {
    SystemLayout::qubits(&["a", "b"]).expect("static layout is valid")
}

/// Main system plus the four communication registers.
pub fn full_layout(n_outcomes: usize) -> Result<SystemLayout> {
    let n = n_outcomes;
    SystemLayout::new([
        ("a".to_string(), 2),
        ("b".to_string(), 2),
        ("ia".to_string(), n + 1),
        ("ob".to_string(), n + 1),
        ("ib".to_string(), n * n + 1),
        ("oa".to_string(), n * n + 1),
    ])
}

fn flat(a: &Array2<C64>) -> Vec<C64> {
    a.iter().cloned().collect()
}

/// out = a b for row-major m x m slices, skipping zero entries of a.
#[inline]
fn mat_mul(m: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    let zero = C64::new(0.0, 0.0);
    for v in out.iter_mut() {
        *v = zero;
    }
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += aik * b[k * m + j];
            }
        }
    }
}

#[inline]
fn axpy(out: &mut [C64], x: &[C64], s: f64) {
    for (o, v) in out.iter_mut().zip(x.iter()) {
        *o += v * s;
    }
}

/// A main-system operator with its adjoint, flattened for the hot loop.
struct FastOp {
    op: Vec<C64>,
    dg: Vec<C64>,
}

impl FastOp {
    fn new(a: &Array2<C64>) -> Self {
        FastOp {
            op: flat(a),
            dg: flat(&dag(&a.view())),
        }
    }
}

/// Register-diagonal representation: one main-system block per register
/// configuration, the dynamics never creating register coherences.
pub struct BlockModel {
    n: usize,
    main_dim: usize,
    configs: usize,
    delta: f64,
    big_gamma: f64,
    alice_ops: Vec<FastOp>,
    bob_ops: Vec<Vec<FastOp>>,
    final_ops: Vec<Vec<Vec<FastOp>>>,
    /// (scaled rate, jump, adjoint, J^dag J)
    jump_ops: Vec<(f64, FastOp, Vec<C64>)>,
}

impl BlockModel {
    pub fn new(
        config: &ChannelConfig,
        protocol: LoccProtocol,
        main_jumps: &[(f64, Array2<C64>)],
    ) -> Result<Self> {
        config.validate()?;
        if protocol.n_outcomes() != config.n_outcomes {
            return Err(QdError::InvalidParameter(format!(
                "protocol has {} outcomes, config says {}",
                protocol.n_outcomes(),
                config.n_outcomes
            )));
        }
        let main_dim = protocol.main_dim();
        let mut jumps = Vec::with_capacity(main_jumps.len());
        for (rate, op) in main_jumps {
            if *rate < 0.0 {
                return Err(QdError::InvalidParameter(format!(
                    "jump rate {rate} is negative"
                )));
            }
            if op.nrows() != main_dim || op.ncols() != main_dim {
                return Err(QdError::DimensionMismatch(format!(
                    "main jump is {}x{}, expected {main_dim}x{main_dim}",
                    op.nrows(),
                    op.ncols()
                )));
            }
            let d = dag(&op.view());
            let dd = d.dot(op);
            jumps.push((config.gamma * rate, FastOp::new(op), flat(&dd)));
        }
        let n = config.n_outcomes;
        let configs = (n + 1) * (n + 1) * (n * n + 1) * (n * n + 1);
        let alice_ops = protocol.alice.iter().map(FastOp::new).collect();
        let bob_ops = protocol
            .bob
            .iter()
            .map(|row| row.iter().map(FastOp::new).collect())
            .collect();
        let final_ops = protocol
            .alice_final
            .iter()
            .map(|row| {
                row.iter()
                    .map(|kraus| kraus.iter().map(FastOp::new).collect())
                    .collect()
            })
            .collect();
        Ok(BlockModel {
            n,
            main_dim,
            configs,
            delta: config.delta,
            big_gamma: config.big_gamma,
            alice_ops,
            bob_ops,
            final_ops,
            jump_ops: jumps,
        })
    }

    pub fn configs(&self) -> usize {
        self.configs
    }

    pub fn main_dim(&self) -> usize {
        self.main_dim
    }

    pub fn state_len(&self) -> usize {
        self.configs * self.main_dim * self.main_dim
    }

    pub fn config_index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let nn = self.n * self.n + 1;
        ((i * (self.n + 1) + j) * nn + k) * nn + l
    }

    fn decompose(&self, r: usize) -> (usize, usize, usize, usize) {
        let nn = self.n * self.n + 1;
        let l = r % nn;
        let k = (r / nn) % nn;
        let j = (r / (nn * nn)) % (self.n + 1);
        let i = r / (nn * nn * (self.n + 1));
        (i, j, k, l)
    }

    fn encode_pair(&self, i: usize, j: usize) -> usize {
        1 + (i - 1) * self.n + (j - 1)
    }

    fn decode_pair(&self, v: usize) -> (usize, usize) {
        ((v - 1) / self.n + 1, (v - 1) % self.n + 1)
    }

    /// All registers empty, the main system in `rho`.
    pub fn initial_state(&self, rho: &ArrayView2<C64>) -> Result<Array1<C64>> {
        if rho.nrows() != self.main_dim || rho.ncols() != self.main_dim {
            return Err(QdError::DimensionMismatch(format!(
                "main state is {}x{}, expected {}x{}",
                rho.nrows(),
                rho.ncols(),
                self.main_dim,
                self.main_dim
            )));
        }
        let mut y = Array1::zeros(self.state_len());
        for (idx, v) in rho.iter().enumerate() {
            y[idx] = *v;
        }
        Ok(y)
    }

    pub fn block<'y>(&self, y: &'y ArrayView1<C64>, r: usize) -> ArrayView2<'y, C64> {
        let m = self.main_dim;
        let flat = y.slice(ndarray::s![r * m * m..(r + 1) * m * m]);
        flat.into_shape_with_order((m, m))
            .expect("block slice is contiguous")
    }

    /// Generator application in the block representation.
    pub fn rhs(&self, y: &ArrayView1<C64>) -> Array1<C64> {
        let m = self.main_dim;
        let m2 = m * m;
        let n = self.n;
        let g = self.big_gamma;
        let ys = y.as_slice().expect("state vector is contiguous");
        let mut out = vec![C64::new(0.0, 0.0); self.state_len()];
        let mut t1 = vec![C64::new(0.0, 0.0); m2];
        let mut t2 = vec![C64::new(0.0, 0.0); m2];
        for r in 0..self.configs {
            let rho = &ys[r * m2..(r + 1) * m2];
            let (i, j, k, l) = self.decompose(r);
            // uniform outflow: POVM restart plus one channel/measurement
            // step per occupied register
            let mut rate = self.delta;
            for occupied in [i > 0, j > 0, k > 0, l > 0] {
                if occupied {
                    rate += g;
                }
            }
            axpy(&mut out[r * m2..(r + 1) * m2], rho, -rate);
            // always-on main-system jumps, block-diagonal
            for (jr, jop, dd) in &self.jump_ops {
                mat_mul(m, &jop.op, rho, &mut t1);
                mat_mul(m, &t1, &jop.dg, &mut t2);
                axpy(&mut out[r * m2..(r + 1) * m2], &t2, *jr);
                mat_mul(m, dd, rho, &mut t1);
                axpy(&mut out[r * m2..(r + 1) * m2], &t1, -0.5 * jr);
                mat_mul(m, rho, dd, &mut t1);
                axpy(&mut out[r * m2..(r + 1) * m2], &t1, -0.5 * jr);
            }
            // Alice starts a round: writes outcome onto I_a
            for i_new in 1..=n {
                let a = &self.alice_ops[i_new - 1];
                mat_mul(m, &a.op, rho, &mut t1);
                mat_mul(m, &t1, &a.dg, &mut t2);
                let tgt = self.config_index(i_new, j, k, l);
                axpy(&mut out[tgt * m2..(tgt + 1) * m2], &t2, self.delta);
            }
            // channel 1 delivers I_a -> O_b
            if i > 0 {
                let tgt = self.config_index(0, i, k, l);
                axpy(&mut out[tgt * m2..(tgt + 1) * m2], rho, g);
            }
            // Bob measures on message j, writes (j, outcome) onto I_b
            if j > 0 {
                for j_new in 1..=n {
                    let b = &self.bob_ops[j - 1][j_new - 1];
                    mat_mul(m, &b.op, rho, &mut t1);
                    mat_mul(m, &t1, &b.dg, &mut t2);
                    let tgt = self.config_index(i, 0, self.encode_pair(j, j_new), l);
                    axpy(&mut out[tgt * m2..(tgt + 1) * m2], &t2, g);
                }
            }
            // channel 2 delivers I_b -> O_a
            if k > 0 {
                let tgt = self.config_index(i, j, 0, k);
                axpy(&mut out[tgt * m2..(tgt + 1) * m2], rho, g);
            }
            // Alice closes the round with T_{ij}
            if l > 0 {
                let (pi, pj) = self.decode_pair(l);
                let tgt = self.config_index(i, j, k, 0);
                for c in &self.final_ops[pi - 1][pj - 1] {
                    mat_mul(m, &c.op, rho, &mut t1);
                    mat_mul(m, &t1, &c.dg, &mut t2);
                    axpy(&mut out[tgt * m2..(tgt + 1) * m2], &t2, g);
                }
            }
        }
        Array1::from(out)
    }

    pub fn evolve(&self, y0: Array1<C64>, t0: f64, t1: f64) -> Result<Array1<C64>> {
        self.evolve_with(y0, t0, t1, 1e-7, 1e-11)
    }

    pub fn evolve_with(
        &self,
        y0: Array1<C64>,
        t0: f64,
        t1: f64,
        rel: f64,
        abs: f64,
    ) -> Result<Array1<C64>> {
        let rhs = |_t: f64, y: &ArrayView1<C64>| self.rhs(y);
        type NoHook = fn(&mut Array1<C64>);
        let (y, _) = rk45::integrate(rhs, y0, t0, t1, rel, abs, None::<NoHook>)?;
        Ok(y)
    }

    /// Five-class occupation probabilities of a block state.
    pub fn class_probabilities(&self, y: &ArrayView1<C64>) -> OccupationVector {
        let mut p = [0.0; 5];
        for r in 0..self.configs {
            let (i, j, k, l) = self.decompose(r);
            let class = if i > 0 {
                4
            } else if j > 0 {
                3
            } else if k > 0 {
                2
            } else if l > 0 {
                1
            } else {
                0
            };
            p[class] += trace(&self.block(y, r)).re;
        }
        OccupationVector {
            p_0000: p[0],
            p_000x: p[1],
            p_00xz: p[2],
            p_0xzz: p[3],
            p_xzzz: p[4],
        }
    }

    /// Occupations of the exact single-excitation configurations
    /// (X000, 0X00, 00X0, 000X).
    pub fn single_x_probabilities(&self, y: &ArrayView1<C64>) -> [f64; 4] {
        let mut p = [0.0; 4];
        for i in 1..=self.n {
            p[0] += trace(&self.block(y, self.config_index(i, 0, 0, 0))).re;
            p[1] += trace(&self.block(y, self.config_index(0, i, 0, 0))).re;
        }
        for v in 1..=self.n * self.n {
            p[2] += trace(&self.block(y, self.config_index(0, 0, v, 0))).re;
            p[3] += trace(&self.block(y, self.config_index(0, 0, 0, v))).re;
        }
        p
    }
}

/// The same generator as explicit Lindblad terms on the 6-factor layout;
/// used to validate the block representation against the literal model.
pub fn literal_master_equation(
    config: &ChannelConfig,
    protocol: &LoccProtocol,
    main_jumps: &[(f64, Array2<C64>)],
) -> Result<MasterEquation> {
    config.validate()?;
    let n = config.n_outcomes;
    if protocol.n_outcomes() != n {
        return Err(QdError::InvalidParameter(format!(
            "protocol has {} outcomes, config says {}",
            protocol.n_outcomes(),
            n
        )));
    }
    let lay = full_layout(n)?;
    let one = C64::new(1.0, 0.0);
    let reg = |label: &str, to: usize, from: usize| -> Result<Array2<C64>> {
        let d = lay
            .dim_of(label)
            .ok_or_else(|| QdError::UnknownLabel(label.into()))?;
        let mut m = Array2::<C64>::zeros((d, d));
        m[[to, from]] = one;
        Ok(embed(m.view(), &lay, &[label])?.data().clone())
    };
    let main_op = |op: &Array2<C64>| -> Result<Array2<C64>> {
        Ok(embed(op.view(), &lay, &["a", "b"])?.data().clone())
    };
    let mut terms = Vec::new();
    for (rate, op) in main_jumps {
        terms.push(LindbladTerm::jump_raw(
            config.gamma * rate,
            main_op(op)?,
        )?);
    }
    // Alice's POVM start: A_i on the main system, I_a overwritten with i
    for i in 1..=n {
        let a = main_op(&protocol.alice[i - 1])?;
        for k in 0..=n {
            terms.push(LindbladTerm::jump_raw(
                config.delta,
                a.dot(&reg("ia", i, k)?),
            )?);
        }
    }
    // Bob's POVM: consumes O_b = i, overwrites I_b with the encoded pair
    let nn = n * n;
    for i in 1..=n {
        for j in 1..=n {
            let b = main_op(&protocol.bob[i - 1][j - 1])?;
            let enc = 1 + (i - 1) * n + (j - 1);
            for xy in 0..=nn {
                let op = b.dot(&reg("ob", 0, i)?).dot(&reg("ib", enc, xy)?);
                terms.push(LindbladTerm::jump_raw(config.big_gamma, op)?);
            }
        }
    }
    // Alice's closing map: consumes O_a = (i, j)
    for i in 1..=n {
        for j in 1..=n {
            let enc = 1 + (i - 1) * n + (j - 1);
            for c in &protocol.alice_final[i - 1][j - 1] {
                let op = main_op(c)?.dot(&reg("oa", 0, enc)?);
                terms.push(LindbladTerm::jump_raw(config.big_gamma, op)?);
            }
        }
    }
    terms.push(channel_generator(&lay, "ia", "ob", config.big_gamma)?);
    terms.push(channel_generator(&lay, "ib", "oa", config.big_gamma)?);
    MasterEquation::new(lay, terms)
}

/// Measured occupations of the four single-excitation classes against the
/// bounds delta/Gamma - 7 delta^2/Gamma^2 <= p <= delta/Gamma.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundsReport {
    pub p_x000: f64,
    pub p_0x00: f64,
    pub p_00x0: f64,
    pub p_000x: f64,
    pub lower: f64,
    pub upper: f64,
    pub all_hold: bool,
}

/// Evolve the register construction with the main generator switched off
/// (occupations do not depend on it) and check the occupation window.
pub fn verify_bounds(delta: f64, big_gamma: f64, t_wait: f64) -> Result<BoundsReport> {
    if !(t_wait > 0.0) {
        return Err(QdError::InvalidParameter(format!(
            "waiting time {t_wait} must be positive"
        )));
    }
    let config = ChannelConfig {
        big_gamma,
        delta,
        gamma: 0.0,
        n_outcomes: 2,
    };
    let model = BlockModel::new(&config, conditional_pauli_protocol(), &[])?;
    let rho0 = identity(4).mapv(|z| z * 0.25);
    let y0 = model.initial_state(&rho0.view())?;
    let y = model.evolve(y0, 0.0, t_wait)?;
    let [p_x000, p_0x00, p_00x0, p_000x] = model.single_x_probabilities(&y.view());
    let ratio = delta / big_gamma;
    let lower = ratio - 7.0 * ratio * ratio;
    let upper = ratio;
    let slack = 1e-12;
    let all_hold = [p_x000, p_0x00, p_00x0, p_000x]
        .iter()
        .all(|&p| p >= lower - slack && p <= upper + slack);
    Ok(BoundsReport {
        p_x000,
        p_0x00,
        p_00x0,
        p_000x,
        lower,
        upper,
        all_hold,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EffectiveErrorPoint {
    pub gamma: f64,
    pub delta: f64,
    pub big_gamma: f64,
    pub alpha: f64,
    /// trace-norm distance between the measured generator action and
    /// gamma L(rho) + delta (T(rho) - rho), per unit main-state norm
    pub error_trace_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveErrorReport {
    pub points: Vec<EffectiveErrorPoint>,
    /// least-squares slope of log error versus log alpha
    pub slope: f64,
}

/// Least-squares slope of ln(y) against ln(x).
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.max(1e-300).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// For each communication rate: wait 10/delta, extract the generator acting
/// on the empty-register block by one-sided second-order finite differences,
/// and compare with the ideal gamma L + delta (T - id).
pub fn effective_locc_error(
    protocol: &LoccProtocol,
    main_jumps: &[(f64, Array2<C64>)],
    gamma: f64,
    delta: f64,
    big_gamma_list: &[f64],
    rho_main: &ArrayView2<C64>,
) -> Result<EffectiveErrorReport> {
    if big_gamma_list.is_empty() {
        return Err(QdError::InvalidParameter("empty rate list".into()));
    }
    if !(delta > 0.0) {
        return Err(QdError::InvalidParameter(format!(
            "trigger rate {delta} must be positive"
        )));
    }
    let t_wait = 10.0 / delta;
    let mut points = Vec::with_capacity(big_gamma_list.len());
    for &big_gamma in big_gamma_list {
        let config = ChannelConfig {
            big_gamma,
            delta,
            gamma,
            n_outcomes: protocol.n_outcomes(),
        };
        let model = BlockModel::new(&config, protocol.clone(), main_jumps)?;
        let y0 = model.initial_state(rho_main)?;
        let y = model.evolve(y0, 0.0, t_wait)?;
        // waiting-time convergence guard: the exact class system must have
        // settled to its steady state up to the slow transient
        let classes = model.class_probabilities(&y.view());
        let steady = occupation_steady(delta, big_gamma);
        if (classes.p_0000 - steady.p_0000).abs() > 1e-3 {
            return Err(QdError::ConvergenceFailure(format!(
                "occupations not settled after t = {t_wait}: p_0000 = {} vs {}",
                classes.p_0000, steady.p_0000
            )));
        }
        // short spans need tight tolerances: the finite difference divides
        // integration error by h
        let h = 1.0 / big_gamma;
        let y_half = model.evolve_with(y.clone(), t_wait, t_wait + 0.5 * h, 1e-10, 1e-13)?;
        let y_full =
            model.evolve_with(y_half.clone(), t_wait + 0.5 * h, t_wait + h, 1e-10, 1e-13)?;
        let b0 = model.block(&y.view(), 0).to_owned();
        let b1 = model.block(&y_half.view(), 0).to_owned();
        let b2 = model.block(&y_full.view(), 0).to_owned();
        // one-sided second-order derivative
        let mut measured = Array2::<C64>::zeros(b0.raw_dim());
        measured.scaled_add(C64::new(-3.0 / h, 0.0), &b0);
        measured.scaled_add(C64::new(4.0 / h, 0.0), &b1);
        measured.scaled_add(C64::new(-1.0 / h, 0.0), &b2);
        let p = trace(&b0.view()).re;
        let mut ideal = Array2::<C64>::zeros(b0.raw_dim());
        for (rate, op) in main_jumps {
            let d = dag(&op.view());
            let dd = d.dot(op);
            let mut term = op.dot(&b0).dot(&d);
            let half = dd.dot(&b0) + b0.dot(&dd);
            term.scaled_add(C64::new(-0.5, 0.0), &half);
            ideal.scaled_add(C64::new(gamma * rate, 0.0), &term);
        }
        let mut locc = protocol.apply(&b0.view());
        locc -= &b0;
        ideal.scaled_add(C64::new(delta, 0.0), &locc);
        let diff = &measured - &ideal;
        points.push(EffectiveErrorPoint {
            gamma,
            delta,
            big_gamma,
            alpha: config.alpha(),
            error_trace_norm: trace_norm(&diff.view()) / p,
        });
    }
    let alphas: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    let errs: Vec<f64> = points.iter().map(|p| p.error_trace_norm).collect();
    let slope = if points.len() >= 2 {
        fit_loglog_slope(&alphas, &errs)
    } else {
        f64::NAN
    };
    Ok(EffectiveErrorReport { points, slope })
}
