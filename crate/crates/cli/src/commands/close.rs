//! `misclose close`: run the closing solver on a family, or re-verify an
//! existing certificate without solving.

use std::path::Path;

use misclose_core::closing::{close_all, verify_certificate};

use crate::config::RunConfig;
use crate::formats::{self, CertificateOut};

pub struct CloseOutcome {
    pub certificate: CertificateOut,
    pub exit_code: i32,
}

pub fn run(
    family_path: &Path,
    verify_only: Option<&Path>,
    config: &RunConfig,
) -> anyhow::Result<CloseOutcome> {
    let (spec, _) = formats::load_family(family_path)?;
    let family = spec.to_family()?;
    let hash = formats::family_hash(&spec);
    let closing_config = config.closing_config();

    let (cert_out, exit_code) = match verify_only {
        Some(cert_path) => {
            let text = std::fs::read_to_string(cert_path)?;
            let stored: CertificateOut = serde_json::from_str(&text)?;
            if stored.family_hash != hash {
                anyhow::bail!(
                    "certificate family hash {} does not match family file {}",
                    stored.family_hash,
                    hash
                );
            }
            let core_cert = stored.to_core();
            let report = verify_certificate(&family, &core_cert, &closing_config)
                .map_err(|e| anyhow::anyhow!("verification: {e}"))?;
            let mut updated = stored;
            updated.pass = report.pass;
            updated.failures = report.failures.clone();
            let code = if report.pass { 0 } else { 3 };
            (updated, code)
        }
        None => {
            match close_all(&family, &closing_config) {
                Ok(cert) => {
                    let code = if cert.pass { 0 } else { 3 };
                    (formats::certificate_out(&cert, hash), code)
                }
                Err(e) => {
                    // Solver failure: report and exit 2.
                    return Err(SolverFailed(e.to_string()).into());
                }
            }
        }
    };

    let out_path = config.out_dir.join("certificate.json");
    formats::write_json(&out_path, &cert_out)?;
    Ok(CloseOutcome {
        certificate: cert_out,
        exit_code,
    })
}

/// Marker error so the entry point can map solver failures to exit code 2.
#[derive(Debug)]
pub struct SolverFailed(pub String);

impl std::fmt::Display for SolverFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver failed: {}", self.0)
    }
}

impl std::error::Error for SolverFailed {}
