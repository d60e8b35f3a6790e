//! `qdistill`: scans, verification suites, and repeater planning on top of
//! qdistill-core. Exit codes: 0 success, 2 flag error, 3 failed verification.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use qdistill_cli::{
    oracle, to_json, write_scan_csv, CommchanBoundsRow, CommchanVerifyReport, RepeaterPlanReport,
    RunManifest, Scheme1ScanReport, Scheme1ScanRow, SwapVerifyPoint, SwapVerifyReport,
    WernerVerifyReport,
};
use qdistill_core::commchan::{occupation_evolve, occupation_steady, verify_bounds};
use qdistill_core::qops::{
    dag, fidelity_with_omega, identity, kron, partial_trace, werner_data, DensityMatrix,
};
use qdistill_core::scheme1::{self, Scheme1Params, Variant};
use qdistill_core::swap::{self, SwapParams};
use qdistill_core::{random, repeater, werner};

use rand::Rng;

#[derive(Parser)]
#[command(
    name = "qdistill",
    version,
    about = "Dissipative entanglement distillation and continuous repeater toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep one parameter of the six-qubit scheme and tabulate steady-state
    /// entanglement observables as CSV or JSON
    Scheme1Scan(Scheme1ScanArgs),
    /// Check the 4-to-1 distillation formulas against a gate-level run
    WernerVerify(WernerVerifyArgs),
    /// Check the continuous swap fidelity forms against each other
    SwapVerify(SwapVerifyArgs),
    /// Check communication-register occupations and the low-excitation window
    CommchanVerify(CommchanVerifyArgs),
    /// Plan a nested repeater and report its resource scaling
    RepeaterPlan(RepeaterPlanArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Locc,
    Nocomm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepArg {
    #[value(name = "r")]
    R,
    #[value(name = "eps_c")]
    EpsC,
    #[value(name = "eps_h")]
    EpsH,
    #[value(name = "eps_d")]
    EpsD,
    /// symmetric noise: eps_c = eps_h = eps_d
    #[value(name = "eps_n")]
    EpsN,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Scheme1ScanArgs {
    #[arg(long, value_enum, default_value_t = VariantArg::Locc)]
    variant: VariantArg,
    /// Parameter swept across the rows
    #[arg(long, value_enum, default_value_t = SweepArg::EpsC)]
    sweep: SweepArg,
    /// Comma-separated sweep values
    #[arg(long, default_value = "0.5,0.7,1.0,2.0")]
    values: String,
    #[arg(long, default_value_t = 0.3)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long = "delta-f", default_value_t = 0.1)]
    delta_f: f64,
    #[arg(long = "eps-c", default_value_t = 0.0)]
    eps_c: f64,
    #[arg(long = "eps-h", default_value_t = 0.15)]
    eps_h: f64,
    #[arg(long = "eps-d", default_value_t = 0.1)]
    eps_d: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Args)]
struct WernerVerifyArgs {
    /// Input fidelity of the distillation round
    #[arg(long, default_value_t = 0.96)]
    f: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct SwapVerifyArgs {
    /// Source fidelity for the output-polynomial matrix check
    #[arg(long, default_value_t = 0.96)]
    f: f64,
    /// Entangling rate scale for the random parameter draws
    #[arg(long, default_value_t = 5.0)]
    gamma: f64,
    /// Noise rate scale for the random parameter draws
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long, default_value_t = 33)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct CommchanVerifyArgs {
    /// Comma-separated communication rates to test at delta = 1
    #[arg(long = "Gamma-list", default_value = "100,1000")]
    gamma_list: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Args)]
struct RepeaterPlanArgs {
    /// Per-link input and target fidelity
    #[arg(long, default_value_t = 0.96)]
    f: f64,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 70.0)]
    gamma: f64,
    /// Boost multiplicity
    #[arg(long, default_value_t = 50)]
    m: usize,
    /// Distillation block size (a power of four)
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Number of length doublings
    #[arg(long, default_value_t = 16)]
    k: u32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

/// Failure carrying the process exit code: 2 usage, 3 verification.
struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        msg: msg.into(),
    }
}

fn verification(msg: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        msg: msg.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Scheme1Scan(args) => cmd_scheme1_scan(args),
        Cmd::WernerVerify(args) => cmd_werner_verify(args),
        Cmd::SwapVerify(args) => cmd_swap_verify(args),
        Cmd::CommchanVerify(args) => cmd_commchan_verify(args),
        Cmd::RepeaterPlan(args) => cmd_repeater_plan(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qdistill: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn parse_float_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(usage(format!("{flag} expects comma-separated numbers, got '{text}'"))),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure {
            code: 2,
            msg: format!("cannot write {}: {e}", path.display()),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn manifest_params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn cmd_scheme1_scan(args: Scheme1ScanArgs) -> Result<(), Failure> {
    let values = parse_float_list(&args.values, "--values")?;
    let variant = match args.variant {
        VariantArg::Locc => Variant::Locc,
        VariantArg::Nocomm => Variant::NoComm,
    };
    let grid: Vec<Scheme1Params> = values
        .iter()
        .map(|&v| {
            let mut p = Scheme1Params {
                r: args.r,
                gamma: args.gamma,
                delta_f: args.delta_f,
                eps_c: args.eps_c,
                eps_h: args.eps_h,
                eps_d: args.eps_d,
                variant,
                asymmetric_dephasing: false,
            };
            match args.sweep {
                SweepArg::R => p.r = v,
                SweepArg::EpsC => p.eps_c = v,
                SweepArg::EpsH => p.eps_h = v,
                SweepArg::EpsD => p.eps_d = v,
                SweepArg::EpsN => {
                    p.eps_c = v;
                    p.eps_h = v;
                    p.eps_d = v;
                }
            }
            p
        })
        .collect();
    for p in &grid {
        p.validate().map_err(|e| usage(e.to_string()))?;
    }

    let sweep_name = ["r", "eps_c", "eps_h", "eps_d", "eps_n"]
        [[SweepArg::R, SweepArg::EpsC, SweepArg::EpsH, SweepArg::EpsD, SweepArg::EpsN]
            .iter()
            .position(|&s| s == args.sweep)
            .expect("sweep arg is listed")];
    let manifest = RunManifest::new(
        "scheme1-scan",
        manifest_params(&[
            ("variant", format!("{:?}", variant)),
            ("sweep", sweep_name.to_string()),
            ("values", args.values.clone()),
            ("r", args.r.to_string()),
            ("gamma", args.gamma.to_string()),
            ("delta_f", args.delta_f.to_string()),
            ("eps_c", args.eps_c.to_string()),
            ("eps_h", args.eps_h.to_string()),
            ("eps_d", args.eps_d.to_string()),
        ]),
        Some(args.seed),
    );

    let points = scheme1::scan(&grid, args.seed).map_err(|e| verification(e.to_string()))?;
    for p in &points {
        if let Some(err) = &p.error {
            return Err(verification(format!("scan point failed: {err}")));
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    let mut prev_eof = f64::NAN;
    for p in &points {
        let boosted = u8::from(p.eof_target > prev_eof + 1e-12 && prev_eof.is_finite());
        rows.push(Scheme1ScanRow {
            r: p.params.r,
            gamma: p.params.gamma,
            delta_f: p.params.delta_f,
            eps_c: p.params.eps_c,
            eps_h: p.params.eps_h,
            eps_d: p.params.eps_d,
            eof_target: p.eof_target,
            eof_s1: p.eof_s1,
            entropy_s1: p.entropy_s1,
            logneg_source: p.logneg_source,
            ss_residual: p.ss_residual,
            target_boosted: boosted,
        });
        prev_eof = p.eof_target;
    }
    let report = Scheme1ScanReport { manifest, rows };
    let text = match args.format {
        FormatArg::Csv => write_scan_csv(&report),
        FormatArg::Json => to_json(&report),
    };
    emit(&args.out, &text)
}

fn cmd_werner_verify(args: WernerVerifyArgs) -> Result<(), Failure> {
    if args.format == FormatArg::Csv {
        return Err(usage("werner-verify reports are JSON only"));
    }
    let (f_out, p_succ) = werner::four_to_one(args.f).map_err(|e| usage(e.to_string()))?;
    let nested = werner::nested_distill(args.f, 2).map_err(|e| usage(e.to_string()))?;
    let (sim_f, sim_p) = oracle::four_to_one_gate_sim(args.f);
    let tolerance = 1e-10;
    let max_deviation = (sim_f - f_out).abs().max((sim_p - p_succ).abs());
    let passed = max_deviation <= tolerance;
    let report = WernerVerifyReport {
        manifest: RunManifest::new(
            "werner-verify",
            manifest_params(&[("f", args.f.to_string())]),
            None,
        ),
        f_in: args.f,
        f_out,
        p_succ,
        nested_f_out: nested,
        gate_sim_f_out: sim_f,
        gate_sim_p_succ: sim_p,
        max_deviation,
        tolerance,
        passed,
    };
    emit(&args.out, &to_json(&report))?;
    if passed {
        Ok(())
    } else {
        Err(verification(format!(
            "gate simulation deviates by {max_deviation:.3e} (tolerance {tolerance:.0e})"
        )))
    }
}

fn cmd_swap_verify(args: SwapVerifyArgs) -> Result<(), Failure> {
    if args.format == FormatArg::Csv {
        return Err(usage("swap-verify reports are JSON only"));
    }
    if !(0.25..=1.0).contains(&args.f) {
        return Err(usage(format!("--f {} outside [1/4, 1]", args.f)));
    }
    if !(args.gamma > 0.0) || !(args.eps >= 0.0) {
        return Err(usage("--gamma must be positive and --eps nonnegative"));
    }
    let form_tolerance = 1e-10;
    let mut rng = random::rng(args.seed);
    let mut points = Vec::with_capacity(12);
    let mut max_form_deviation = 0.0f64;
    for _ in 0..12 {
        let p = SwapParams {
            f: 0.6 + 0.4 * rng.random::<f64>(),
            gamma_sw: args.gamma * (0.5 + rng.random::<f64>()),
            eps: args.eps * rng.random::<f64>(),
            delta_sw: 0.5 + 1.5 * rng.random::<f64>(),
        };
        let quadrature = swap::continuous_swap_fidelity(&p)
            .map_err(|e| verification(e.to_string()))?;
        let closed = swap::continuous_swap_closed_form(&p)
            .map_err(|e| verification(e.to_string()))?;
        let deviation = (quadrature - closed).abs();
        max_form_deviation = max_form_deviation.max(deviation);
        points.push(SwapVerifyPoint {
            f: p.f,
            gamma_sw: p.gamma_sw,
            eps: p.eps,
            delta_sw: p.delta_sw,
            quadrature,
            closed_form: closed,
            deviation,
        });
    }

    // output polynomial against one application of the swap channel
    let lay = swap::layout();
    let kraus = swap::swap_locc_kraus(&lay).map_err(|e| verification(e.to_string()))?;
    let w = werner_data(args.f);
    let mixed = identity(4).mapv(|z| z / 4.0);
    let rho0 = kron(&kron(&w, &w), &mixed);
    let mut out = ndarray::Array2::zeros((64, 64));
    for k in &kraus {
        out = out + k.dot(&rho0).dot(&dag(&k.view()));
    }
    let out = DensityMatrix::new(lay, out).map_err(|e| verification(e.to_string()))?;
    let target = partial_trace(&out, &["ta", "tc"]).map_err(|e| verification(e.to_string()))?;
    let matrix_oracle_value =
        fidelity_with_omega(&target).map_err(|e| verification(e.to_string()))?;
    let output_poly_value = swap::swap_output_fidelity(args.f).map_err(|e| usage(e.to_string()))?;
    let matrix_tolerance = 1e-12;
    let matrix_oracle_deviation = (matrix_oracle_value - output_poly_value).abs();

    let passed =
        max_form_deviation <= form_tolerance && matrix_oracle_deviation <= matrix_tolerance;
    let report = SwapVerifyReport {
        manifest: RunManifest::new(
            "swap-verify",
            manifest_params(&[
                ("f", args.f.to_string()),
                ("gamma", args.gamma.to_string()),
                ("eps", args.eps.to_string()),
            ]),
            Some(args.seed),
        ),
        points,
        max_form_deviation,
        form_tolerance,
        output_poly_f: args.f,
        output_poly_value,
        matrix_oracle_value,
        matrix_oracle_deviation,
        matrix_tolerance,
        passed,
    };
    emit(&args.out, &to_json(&report))?;
    if passed {
        Ok(())
    } else {
        Err(verification(format!(
            "swap forms disagree: quadrature vs closed {max_form_deviation:.3e}, \
             matrix oracle {matrix_oracle_deviation:.3e}"
        )))
    }
}

fn cmd_commchan_verify(args: CommchanVerifyArgs) -> Result<(), Failure> {
    if args.format == FormatArg::Csv {
        return Err(usage("commchan-verify reports are JSON only"));
    }
    let gammas = parse_float_list(&args.gamma_list, "--Gamma-list")?;
    for &g in &gammas {
        if !(g > 1.0) {
            return Err(usage(format!(
                "--Gamma-list entries must exceed the trigger rate 1, got {g}"
            )));
        }
    }
    let steady_tolerance = 1e-10;
    let mut steady_max_deviation = 0.0f64;
    for &(delta, g) in &[(1.0f64, 10.0f64), (0.5, 40.0), (2.0, 9.0)] {
        let steady = occupation_steady(delta, g);
        let p0 = qdistill_core::commchan::OccupationVector::from_array([0.2; 5]);
        let evolved = occupation_evolve(&p0, delta, g, 60.0 / delta.min(g))
            .map_err(|e| verification(e.to_string()))?;
        for (a, b) in evolved.as_array().iter().zip(steady.as_array().iter()) {
            steady_max_deviation = steady_max_deviation.max((a - b).abs());
        }
    }

    let mut bounds = Vec::with_capacity(gammas.len());
    let mut all_hold = true;
    for &g in &gammas {
        let b = verify_bounds(1.0, g, 10.0).map_err(|e| verification(e.to_string()))?;
        all_hold &= b.all_hold;
        bounds.push(CommchanBoundsRow {
            big_gamma: g,
            alpha: 1.0 / g,
            lower: b.lower,
            upper: b.upper,
            occupations: [b.p_x000, b.p_0x00, b.p_00x0, b.p_000x],
            hold: b.all_hold,
        });
    }

    let passed = steady_max_deviation <= steady_tolerance && all_hold;
    let report = CommchanVerifyReport {
        manifest: RunManifest::new(
            "commchan-verify",
            manifest_params(&[("Gamma-list", args.gamma_list.clone())]),
            None,
        ),
        steady_max_deviation,
        steady_tolerance,
        bounds,
        passed,
    };
    emit(&args.out, &to_json(&report))?;
    if passed {
        Ok(())
    } else {
        Err(verification(format!(
            "occupation checks failed: steady deviation {steady_max_deviation:.3e}, \
             windows hold: {all_hold}"
        )))
    }
}

fn cmd_repeater_plan(args: RepeaterPlanArgs) -> Result<(), Failure> {
    if args.format == FormatArg::Csv {
        return Err(usage("repeater-plan reports are JSON only"));
    }
    let cfg = repeater::RepeaterConfig::simplified(
        args.f, args.eps, args.gamma, args.m, args.n, args.k, 1.0,
    )
    .map_err(|e| usage(e.to_string()))?;
    let levels = repeater::run_levels(&cfg).map_err(|e| verification(e.to_string()))?;
    let min_level_fidelity = levels
        .iter()
        .map(|l| l.f_after_distill_boost)
        .fold(f64::INFINITY, f64::min);
    let sustained = min_level_fidelity >= args.f;
    let exponent = repeater::scaling_exponent(args.m, args.n);
    let reference_exponent = 16.4;
    let report = RepeaterPlanReport {
        manifest: RunManifest::new(
            "repeater-plan",
            manifest_params(&[
                ("f", args.f.to_string()),
                ("eps", args.eps.to_string()),
                ("gamma", args.gamma.to_string()),
                ("m", args.m.to_string()),
                ("n", args.n.to_string()),
                ("k", args.k.to_string()),
            ]),
            None,
        ),
        config: cfg,
        levels,
        min_level_fidelity,
        sustained,
        exponent,
        reference_exponent,
        exponent_delta: reference_exponent - exponent,
        total_pairs: repeater::resources(&cfg),
    };
    emit(&args.out, &to_json(&report))?;
    if sustained {
        Ok(())
    } else {
        Err(verification(format!(
            "plan does not sustain the target: min level fidelity {min_level_fidelity:.6} \
             below {}",
            args.f
        )))
    }
}
