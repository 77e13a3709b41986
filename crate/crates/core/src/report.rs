//! Report envelope shared by every subcommand, with JSON and CSV renderers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::exchange::SwapChainReport;
use crate::lindeberg::{DecayVerdict, LindebergReport, MomentCheck};
use crate::specfun::DerivBoundCert;
use crate::stats::ConvergenceReport;

pub const TOOL: &str = "clt-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Informational,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Fail => 1,
            _ => 0,
        }
    }
}

/// Echo of the run: tool, version, subcommand, seed and every parameter.
/// Worker count is omitted so reports are identical across it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiRow {
    pub t: f64,
    pub density: f64,
    pub cdf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub t: f64,
    pub f: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaVerdict {
    pub delta: f64,
    pub verdict: DecayVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsCheck {
    pub n: usize,
    pub ks: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "kebab-case")]
pub enum ReportBody {
    Phi { rows: Vec<PhiRow> },
    Transition { function: String, bounds: DerivBoundCert, rows: Vec<TransitionRow> },
    SwapChain(SwapChainReport),
    Lindeberg { array: String, rows: Vec<LindebergReport>, decay: Vec<DeltaVerdict> },
    CltVerify { report: ConvergenceReport, checks: Vec<KsCheck> },
    Moments(MomentCheck),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub header: RunHeader,
    pub body: ReportBody,
    pub verdict: Verdict,
    /// One line per violated assertion; empty unless the verdict is `fail`.
    pub failures: Vec<String>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Report> {
        serde_json::from_str(text)
    }

    /// Plot-ready table preceded by `#` comment lines carrying the header.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let params = serde_json::to_string(&h.params).expect("params serialize");
        let mut out = String::new();
        let _ = writeln!(out, "# {} {} {} seed={}", h.tool, h.version, h.subcommand, h.seed);
        let _ = writeln!(out, "# params={params}");
        match &self.body {
            ReportBody::Phi { rows } => {
                out.push_str("t,density,cdf\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{}", r.t, r.density, r.cdf);
                }
            }
            ReportBody::Transition { rows, .. } => {
                out.push_str("t,f,f1,f2,f3\n");
                for r in rows {
                    let _ = writeln!(out, "{},{},{},{},{}", r.t, r.f, r.f1, r.f2, r.f3);
                }
            }
            ReportBody::SwapChain(r) => {
                out.push_str("i,estimate,se,gap,gap_se,bound\n");
                for (i, e) in r.estimates.iter().enumerate() {
                    if i == 0 {
                        let _ = writeln!(out, "0,{},{},,,", e.mean, e.std_error);
                    } else {
                        let _ = writeln!(
                            out,
                            "{i},{},{},{},{},{}",
                            e.mean,
                            e.std_error,
                            r.per_swap_gaps[i - 1],
                            r.gap_std_errors[i - 1],
                            r.per_swap_bounds[i - 1]
                        );
                    }
                }
            }
            ReportBody::Lindeberg { rows, decay, .. } => {
                out.push_str("n,m,delta,tail_sum,max_variance,normal_tail_sum,normal_tail_bound\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.n_index, r.row_len, r.delta, r.tail_sum, r.max_variance, r.normal_tail_sum, r.normal_tail_bound
                    );
                }
                for d in decay {
                    let _ = writeln!(out, "# decay delta={} {} (finite-grid heuristic)", d.delta, d.verdict);
                }
            }
            ReportBody::CltVerify { report, .. } => {
                out.push_str("n,ks,n_samples,seed,exact_ks\n");
                for r in &report.rows {
                    let _ = writeln!(out, "{},{},{},{},{}", r.n, r.ks, r.n_samples, r.seed, opt(r.exact_ks));
                }
            }
            ReportBody::Moments(m) => {
                out.push_str("moment,estimate,se,n_samples,seed\n");
                for (name, e) in [("E[Z^2]", &m.second), ("E[Z^4]", &m.fourth)] {
                    let _ = writeln!(out, "{name},{},{},{},{}", e.mean, e.std_error, e.n_samples, e.seed);
                }
            }
        }
        let verdict = serde_json::to_string(&self.verdict).expect("verdict serializes");
        let _ = writeln!(out, "# verdict={}", verdict.trim_matches('"'));
        for f in &self.failures {
            let _ = writeln!(out, "# failure: {f}");
        }
        out
    }
}
