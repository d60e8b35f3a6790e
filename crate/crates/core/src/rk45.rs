//! Dormand-Prince 5(4) adaptive integrator on flat complex vectors.
//!
//! The master-equation layer flattens density matrices into vectors and
//! re-imposes structural invariants through the post-step hook, so this
//! module stays generic.

use ndarray::{Array1, ArrayView1};

use crate::error::{QdError, Result};
use crate::qops::C64;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// 5th order weights (identical to the last A row: stiffly accurate pair).
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Embedded 4th order weights.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Integrate dy/dt = rhs(t, y) from t0 to t1 with adaptive step control.
///
/// `rel`/`abs` are per-component tolerances in a scaled RMS norm. The hook,
/// if given, may adjust the state after every accepted step.
pub fn integrate<F, P>(
    mut rhs: F,
    mut y: Array1<C64>,
    t0: f64,
    t1: f64,
    rel: f64,
    abs: f64,
    mut post_step: Option<P>,
) -> Result<(Array1<C64>, StepStats)>
where
    F: FnMut(f64, &ArrayView1<C64>) -> Array1<C64>,
    P: FnMut(&mut Array1<C64>),
{
    if !(rel > 0.0 && abs > 0.0) {
        return Err(QdError::InvalidParameter(
            "integrator tolerances must be positive".into(),
        ));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y, StepStats::default()));
    }
    if span < 0.0 {
        return Err(QdError::InvalidParameter(
            "backward integration is not supported".into(),
        ));
    }
    let n = y.len();
    let mut stats = StepStats::default();
    let mut t = t0;
    let mut h = span / 100.0;
    let h_min = 1e-14 * span.max(1.0);
    let mut k: Vec<Array1<C64>> = Vec::with_capacity(7);

    while t < t1 {
        if h < h_min {
            return Err(QdError::StepSizeUnderflow(h));
        }
        if t + h > t1 {
            h = t1 - t;
        }

        k.clear();
        k.push(rhs(t, &y.view()));
        stats.rhs_evals += 1;
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let w = A[s][j];
                if w != 0.0 {
                    ys.scaled_add(C64::new(h * w, 0.0), kj);
                }
            }
            k.push(rhs(t + C[s] * h, &ys.view()));
            stats.rhs_evals += 1;
        }

        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                y5.scaled_add(C64::new(h * B5[j], 0.0), kj);
            }
            if B4[j] != 0.0 {
                y4.scaled_add(C64::new(h * B4[j], 0.0), kj);
            }
        }

        let mut err_sq = 0.0;
        for i in 0..n {
            let scale = abs + rel * y[i].norm().max(y5[i].norm());
            let e = (y5[i] - y4[i]).norm() / scale;
            err_sq += e * e;
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y = y5;
            if let Some(hook) = post_step.as_mut() {
                hook(&mut y);
            }
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok((y, stats))
}
