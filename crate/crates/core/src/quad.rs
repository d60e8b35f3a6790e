//! Adaptive Gauss-Kronrod quadrature (7-15 pair) for the pumping averages.
//!
//! The integrands here are smooth except for an x^a factor with possibly
//! a < 1 at the left endpoint; [`integrate_unit_power`] removes that with the
//! substitution x = u^q before handing off to the adaptive driver.

use crate::error::{QdError, Result};

/// Positive Kronrod abscissae (descending) plus the center node.
const XK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];

/// 15-point Kronrod weights matching `XK` (center weight last).
const WK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];

/// 7-point Gauss weights for the embedded rule (nodes XK[1], XK[3], XK[5],
/// XK[7]).
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn eval_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Panel> {
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    let mut k15 = WK[7] * f(mid);
    let mut g7 = WG[3] * f(mid);
    for j in 0..7 {
        let dx = half * XK[j];
        let fsum = f(mid - dx) + f(mid + dx);
        k15 += WK[j] * fsum;
        if j % 2 == 1 {
            g7 += WG[j / 2] * fsum;
        }
    }
    k15 *= half;
    g7 *= half;
    if !k15.is_finite() {
        return Err(QdError::QuadratureFailure(f64::NAN));
    }
    Ok(Panel {
        lo,
        hi,
        value: k15,
        error: (k15 - g7).abs(),
    })
}

/// Adaptive integral of `f` over [lo, hi] to absolute tolerance `abs_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, abs_tol: f64) -> Result<f64> {
    if !(abs_tol > 0.0) {
        return Err(QdError::InvalidParameter(format!(
            "quadrature tolerance {abs_tol} must be positive"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let width = (hi - lo).abs();
    let mut panels = vec![eval_panel(&f, lo, hi)?];
    const MAX_PANELS: usize = 4000;
    loop {
        let total_err: f64 = panels.iter().map(|p| p.error).sum();
        if total_err <= abs_tol {
            return Ok(panels.iter().map(|p| p.value).sum());
        }
        if panels.len() >= MAX_PANELS {
            return Err(QdError::QuadratureFailure(total_err));
        }
        // split the worst panel
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.partial_cmp(&b.1.error).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Panel { lo, hi, .. } = panels.swap_remove(worst);
        if (hi - lo).abs() < 1e-15 * width {
            return Err(QdError::QuadratureFailure(total_err));
        }
        let mid = 0.5 * (lo + hi);
        panels.push(eval_panel(&f, lo, mid)?);
        panels.push(eval_panel(&f, mid, hi)?);
    }
}

/// Integral over [0, 1] of `g`, whose only non-smoothness is an x^a factor
/// at the left endpoint; `a > 0`.
///
/// For a >= 1 the integrand is smooth and is integrated directly. For a < 1
/// the substitution x = u^q with q = ceil(2/a) turns x^a into u^(q a) with
/// q a >= 2, so the transformed integrand has a bounded derivative at 0.
/// `g` always receives the original variable x.
pub fn integrate_unit_power<F: Fn(f64) -> f64>(g: F, a: f64, abs_tol: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(QdError::InvalidParameter(format!(
            "endpoint exponent {a} must be positive"
        )));
    }
    if a >= 1.0 {
        return integrate(g, 0.0, 1.0, abs_tol);
    }
    let q = (2.0 / a).ceil().min(1e6);
    integrate(
        move |u| {
            if u <= 0.0 {
                0.0
            } else {
                g(u.powf(q)) * q * u.powf(q - 1.0)
            }
        },
        0.0,
        1.0,
        abs_tol,
    )
}
