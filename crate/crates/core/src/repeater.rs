//! Nested continuous-repeater pipeline: each doubling level runs swaps on
//! the previous level's links, boosts the swap output onto distillation
//! sources, distills, and boosts the distilled pairs onto the level target.
//! The recursion is scale invariant, so one fidelity map f_l -> f_{2l}
//! covers every level.

use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::swap::{continuous_swap_fidelity, SwapParams};
use crate::werner;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RepeaterConfig {
    /// input and target fidelity per link
    pub f_i: f64,
    /// local noise rate
    pub eps: f64,
    /// boosted entangling rate seen by each target
    pub gamma: f64,
    /// flip rate per distillation block
    pub delta_d: f64,
    /// flip rate per swap construction
    pub delta_sw: f64,
    /// boost multiplicity
    pub m: usize,
    /// distillation block size, a power of four (1 disables distillation)
    pub n: usize,
    /// number of length doublings
    pub k: u32,
    /// elementary link length, arbitrary units
    pub l0: f64,
}

impl RepeaterConfig {
    /// The reduced-equation simplification delta_D = delta_sw = gamma / m.
    pub fn simplified(
        f_i: f64,
        eps: f64,
        gamma: f64,
        m: usize,
        n: usize,
        k: u32,
        l0: f64,
    ) -> Result<Self> {
        if m < 1 {
            return Err(QdError::InvalidParameter("multiplicity m must be >= 1".into()));
        }
        let delta = gamma / m as f64;
        let cfg = RepeaterConfig {
            f_i,
            eps,
            gamma,
            delta_d: delta,
            delta_sw: delta,
            m,
            n,
            k,
            l0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_i > 0.25 && self.f_i <= 1.0) {
            return Err(QdError::InvalidParameter(format!(
                "input fidelity {} outside (1/4, 1]",
                self.f_i
            )));
        }
        for (name, v) in [
            ("eps", self.eps),
            ("gamma", self.gamma),
            ("delta_d", self.delta_d),
            ("delta_sw", self.delta_sw),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(QdError::InvalidParameter(format!(
                    "rate {name} = {v} must be finite and nonnegative"
                )));
            }
        }
        if self.m < 1 || self.n < 1 {
            return Err(QdError::InvalidParameter(
                "multiplicity and block size must be >= 1".into(),
            ));
        }
        if !(self.l0 > 0.0) {
            return Err(QdError::InvalidParameter(format!(
                "elementary length {} must be positive",
                self.l0
            )));
        }
        Ok(())
    }

    pub fn rate_simplification_active(&self) -> bool {
        let target = self.gamma / self.m as f64;
        let close = |v: f64| (v - target).abs() <= 1e-12 * target.max(1.0);
        close(self.delta_d) && close(self.delta_sw)
    }

    pub fn total_length(&self) -> f64 {
        self.l0 * f64::powi(2.0, self.k as i32)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelReport {
    /// steady fidelity of one continuous swap construction
    pub f_after_swap: f64,
    /// age-averaged fidelity of a distillation source fed by m swaps
    pub f_after_swap_boost: f64,
    /// steady fidelity of the distillation target
    pub f_after_distill: f64,
    /// level output after the final m-fold boost
    pub f_after_distill_boost: f64,
    /// delivery rate of distilled pairs onto the level target
    pub effective_success_rate: f64,
    /// lower-level pairs consumed per produced pair at this level
    pub pairs_consumed: f64,
}

/// Number of nested 4-to-1 rounds encoded by the block size.
pub fn distill_levels(n: usize) -> Result<u32> {
    let mut levels = 0u32;
    let mut v = n;
    while v > 1 {
        if v % 4 != 0 {
            return Err(QdError::InvalidParameter(format!(
                "block size {n} is not a power of four"
            )));
        }
        v /= 4;
        levels += 1;
    }
    Ok(levels)
}

fn check_fidelity(stage: &str, f: f64) -> Result<f64> {
    if !(0.25 - 1e-12..=1.0 + 1e-12).contains(&f) {
        return Err(QdError::InvalidParameter(format!(
            "{stage} fidelity {f} left [1/4, 1]"
        )));
    }
    Ok(f.clamp(0.25, 1.0))
}

/// One doubling: fidelity map f_l -> f_{2l} with all intermediate stages.
pub fn level_step(f_l: f64, cfg: &RepeaterConfig) -> Result<LevelReport> {
    cfg.validate()?;
    let levels = distill_levels(cfg.n)?;
    let m = cfg.m as f64;

    // (i) continuous swap on two links of the previous level
    let swap = SwapParams {
        f: f_l,
        gamma_sw: cfg.gamma,
        eps: cfg.eps,
        delta_sw: cfg.delta_sw,
    };
    let f_after_swap = check_fidelity("swap", continuous_swap_fidelity(&swap)?)?;

    // (ii) m swap constructions refresh each distillation source at
    // delta_sw, against noise eps and consumption at delta_d; the
    // age-averaged fidelity is the rate-weighted fixed-point mix
    let boosted = m * cfg.delta_sw;
    let denom = boosted + cfg.eps + cfg.delta_d;
    let f_after_swap_boost = check_fidelity(
        "swap boost",
        if denom == 0.0 {
            f_after_swap
        } else {
            (boosted * f_after_swap + 0.25 * cfg.eps + 0.25 * cfg.delta_d) / denom
        },
    )?;

    // (iii) steady fidelity of the distillation target: the nested 4-to-1
    // map averaged over the stationary age of its source block
    let f_hom = if boosted + cfg.eps == 0.0 {
        f_after_swap
    } else {
        werner::boost_steady_state(f_after_swap, cfg.m, cfg.delta_sw, cfg.eps)?
    };
    let f_d = move |f: f64| {
        werner::nested_distill(f.clamp(0.25, 1.0), levels)
            .expect("nested map input stays in range")
    };
    let f_after_distill = check_fidelity(
        "distill",
        werner::distilled_steady_fidelity(
            f_d,
            cfg.n,
            f_hom,
            boosted,
            cfg.eps,
            cfg.delta_d,
        )?,
    )?;

    // (iv) final boost at the probabilistic delivery rate
    let mut p_eff = 1.0;
    let mut f_run = f_after_swap_boost;
    for _ in 0..levels {
        let (f_next, p) = werner::four_to_one(f_run)?;
        p_eff *= p;
        f_run = f_next;
    }
    let delivery = werner::effective_rate(p_eff, cfg.delta_d);
    let f_after_distill_boost = check_fidelity(
        "distill boost",
        if delivery + cfg.eps == 0.0 {
            // zero-rate limit: nothing competes for the target
            f_after_distill
        } else {
            werner::boost_steady_state(f_after_distill, cfg.m, delivery, cfg.eps)?
        },
    )?;

    Ok(LevelReport {
        f_after_swap,
        f_after_swap_boost,
        f_after_distill,
        f_after_distill_boost,
        effective_success_rate: m * delivery,
        pairs_consumed: 2.0 * m * m * cfg.n as f64,
    })
}

/// Iterate the level map k times starting from f_I.
pub fn run_levels(cfg: &RepeaterConfig) -> Result<Vec<LevelReport>> {
    let mut reports = Vec::with_capacity(cfg.k as usize);
    let mut f = cfg.f_i;
    for _ in 0..cfg.k {
        let report = level_step(f, cfg)?;
        f = report.f_after_distill_boost;
        reports.push(report);
    }
    Ok(reports)
}

/// Total elementary pairs consumed by a k-level repeater: (2 m^2 n)^k.
pub fn resources(cfg: &RepeaterConfig) -> f64 {
    (2.0 * (cfg.m * cfg.m * cfg.n) as f64).powi(cfg.k as i32)
}

/// Resource scaling exponent: pairs ~ (L / L0)^log2(2 m^2 n).
pub fn scaling_exponent(m: usize, n: usize) -> f64 {
    (2.0 * (m * m * n) as f64).log2()
}

/// All levels converge in parallel, so total waiting time is linear in the
/// number of doublings.
pub fn convergence_time(k: u32, t0: f64) -> f64 {
    k as f64 * t0
}

/// Grid of candidate parameters. The ratio sets both aging exponents:
/// gamma / delta_sw = ratio for the swap sources and
/// m delta_sw / delta_D = ratio for the distillation sources, so
/// ratio = m reproduces delta_D = delta_sw = gamma / m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    pub m_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub ratio_values: Vec<f64>,
}

fn config_for(
    target_f: f64,
    eps: f64,
    gamma: f64,
    m: usize,
    n: usize,
    ratio: f64,
    k: u32,
    l0: f64,
) -> Result<RepeaterConfig> {
    let delta_sw = gamma / ratio;
    let delta_d = m as f64 * delta_sw / ratio;
    let cfg = RepeaterConfig {
        f_i: target_f,
        eps,
        gamma,
        delta_d,
        delta_sw,
        m,
        n,
        k,
        l0,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fixed_point_value(cfg: &RepeaterConfig) -> f64 {
    match level_step(cfg.f_i, cfg) {
        Ok(report) => report.f_after_distill_boost,
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Smallest-exponent config whose level map sustains the target fidelity:
/// level_step(target) >= target makes the fixed point an attractor at or
/// above the target (the map is monotone).
///
/// Deterministic: candidates ordered by exponent, the ratio grid scanned
/// and the best ratio refined by interval bisection.
pub fn plan_search(
    target_f: f64,
    eps: f64,
    gamma: f64,
    space: &SearchSpace,
    k: u32,
    l0: f64,
) -> Result<RepeaterConfig> {
    if space.m_values.is_empty() || space.n_values.is_empty() || space.ratio_values.is_empty() {
        return Err(QdError::InvalidParameter("empty search space".into()));
    }
    if !(target_f > 0.25 && target_f <= 1.0) {
        return Err(QdError::InvalidParameter(format!(
            "target fidelity {target_f} outside (1/4, 1]"
        )));
    }
    for &r in &space.ratio_values {
        if !(r > 0.0) {
            return Err(QdError::InvalidParameter(format!(
                "rate ratio {r} must be positive"
            )));
        }
    }
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for &m in &space.m_values {
        for &n in &space.n_values {
            if distill_levels(n).is_ok() {
                candidates.push((m, n));
            }
        }
    }
    candidates.sort_by(|a, b| {
        scaling_exponent(a.0, a.1)
            .partial_cmp(&scaling_exponent(b.0, b.1))
            .unwrap()
            .then(a.cmp(b))
    });
    let mut ratios = space.ratio_values.clone();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());

    for (m, n) in candidates {
        // grid scan for the best-performing ratio
        let mut best: Option<(usize, f64, f64)> = None;
        for (idx, &ratio) in ratios.iter().enumerate() {
            let Ok(cfg) = config_for(target_f, eps, gamma, m, n, ratio, k, l0) else {
                continue;
            };
            let value = fixed_point_value(&cfg);
            if best.is_none() || value > best.unwrap().2 {
                best = Some((idx, ratio, value));
            }
        }
        let Some((best_idx, mut best_ratio, mut best_value)) = best else {
            continue;
        };
        // bisection refinement between the neighbors of the best grid point
        let mut lo = if best_idx > 0 { ratios[best_idx - 1] } else { best_ratio };
        let mut hi = if best_idx + 1 < ratios.len() {
            ratios[best_idx + 1]
        } else {
            best_ratio
        };
        for _ in 0..40 {
            if hi - lo < 1e-9 * hi.max(1.0) {
                break;
            }
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            let v1 = config_for(target_f, eps, gamma, m, n, m1, k, l0)
                .map(|c| fixed_point_value(&c))
                .unwrap_or(f64::NEG_INFINITY);
            let v2 = config_for(target_f, eps, gamma, m, n, m2, k, l0)
                .map(|c| fixed_point_value(&c))
                .unwrap_or(f64::NEG_INFINITY);
            if v1 > best_value {
                best_value = v1;
                best_ratio = m1;
            }
            if v2 > best_value {
                best_value = v2;
                best_ratio = m2;
            }
            if v1 < v2 {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        if best_value >= target_f {
            return config_for(target_f, eps, gamma, m, n, best_ratio, k, l0);
        }
    }
    Err(QdError::ConvergenceFailure(format!(
        "no config in the search space sustains fidelity {target_f}"
    )))
}
