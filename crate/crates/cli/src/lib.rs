//! Report types, output formats, and readers shared by the `qdistill`
//! binary and its tests. Every command emits a [`RunManifest`] with its
//! payload; the readers here re-parse anything the binary writes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub mod oracle;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance header attached to every output. The timestamp honors
/// SOURCE_DATE_EPOCH so archived runs reproduce byte for byte.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, parameters: BTreeMap<String, String>, seed: Option<u64>) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| {
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        RunManifest {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            timestamp,
        }
    }
}

/// One steady-state evaluation of the six-qubit scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scheme1ScanRow {
    pub r: f64,
    pub gamma: f64,
    pub delta_f: f64,
    pub eps_c: f64,
    pub eps_h: f64,
    pub eps_d: f64,
    pub eof_target: f64,
    pub eof_s1: f64,
    pub entropy_s1: f64,
    pub logneg_source: f64,
    pub ss_residual: f64,
    /// 1 where the target EoF rose against the previous row of the sweep
    pub target_boosted: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scheme1ScanReport {
    pub manifest: RunManifest,
    pub rows: Vec<Scheme1ScanRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WernerVerifyReport {
    pub manifest: RunManifest,
    pub f_in: f64,
    pub f_out: f64,
    pub p_succ: f64,
    pub nested_f_out: f64,
    pub gate_sim_f_out: f64,
    pub gate_sim_p_succ: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwapVerifyPoint {
    pub f: f64,
    pub gamma_sw: f64,
    pub eps: f64,
    pub delta_sw: f64,
    pub quadrature: f64,
    pub closed_form: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwapVerifyReport {
    pub manifest: RunManifest,
    pub points: Vec<SwapVerifyPoint>,
    pub max_form_deviation: f64,
    pub form_tolerance: f64,
    pub output_poly_f: f64,
    pub output_poly_value: f64,
    pub matrix_oracle_value: f64,
    pub matrix_oracle_deviation: f64,
    pub matrix_tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommchanBoundsRow {
    pub big_gamma: f64,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub occupations: [f64; 4],
    pub hold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommchanVerifyReport {
    pub manifest: RunManifest,
    pub steady_max_deviation: f64,
    pub steady_tolerance: f64,
    pub bounds: Vec<CommchanBoundsRow>,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepeaterPlanReport {
    pub manifest: RunManifest,
    pub config: qdistill_core::repeater::RepeaterConfig,
    pub levels: Vec<qdistill_core::repeater::LevelReport>,
    pub min_level_fidelity: f64,
    pub sustained: bool,
    pub exponent: f64,
    pub reference_exponent: f64,
    pub exponent_delta: f64,
    pub total_pairs: f64,
}

/// Serialize a JSON report the way the binary does.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Re-parse any JSON report the binary writes.
pub fn read_json<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| e.to_string())
}

/// CSV layout: '#'-prefixed manifest lines, then a header row, then data.
pub fn write_scan_csv(report: &Scheme1ScanReport) -> String {
    let mut out = String::from("# qdistill scheme1-scan\n");
    out.push_str("# manifest: ");
    out.push_str(&serde_json::to_string(&report.manifest).expect("manifest serializes"));
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        w.serialize(row).expect("row serializes");
    }
    let body = w.into_inner().expect("csv buffer");
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    out
}

/// Re-parse a scan CSV, manifest included.
pub fn read_scan_csv(text: &str) -> Result<Scheme1ScanReport, String> {
    let mut manifest: Option<RunManifest> = None;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# manifest: ") {
            manifest = Some(serde_json::from_str(rest).map_err(|e| e.to_string())?);
        }
        if !line.starts_with('#') {
            break;
        }
    }
    let body = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<&str>>()
        .join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let rows = rdr
        .deserialize()
        .collect::<Result<Vec<Scheme1ScanRow>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(Scheme1ScanReport {
        manifest: manifest.ok_or("missing manifest comment line")?,
        rows,
    })
}
