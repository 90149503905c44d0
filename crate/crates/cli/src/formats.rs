//! On-disk formats: map and family specifications, classification reports,
//! certificates, and diagnostic reports. All structured output is JSON with
//! a stable field order, so identical runs are byte-identical.

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use misclose_core::closing::{ClosingCertificate, ClosingConstraint, NeighborhoodBudget};
use misclose_core::family::ParameterFamily;
use misclose_core::orbit::{Classification, CycleKind, PostcriticalSkeleton, Verdict};
use misclose_core::sphere::RationalMap;
use misclose_core::C64;

/// Complex number as `[re, im]`.
pub type Cx = [f64; 2];

pub fn cx(z: C64) -> Cx {
    [z.re, z.im]
}

pub fn from_cx(v: Cx) -> C64 {
    C64::new(v[0], v[1])
}

/// Map specification: coefficient lists, lowest degree first.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub numerator: Vec<Cx>,
    pub denominator: Vec<Cx>,
}

impl MapSpec {
    pub fn to_map(&self) -> anyhow::Result<RationalMap> {
        let num: Vec<C64> = self.numerator.iter().map(|&v| from_cx(v)).collect();
        let den: Vec<C64> = self.denominator.iter().map(|&v| from_cx(v)).collect();
        RationalMap::new(&num, &den).map_err(|e| anyhow::anyhow!("invalid map: {e}"))
    }

    pub fn from_map(map: &RationalMap) -> MapSpec {
        MapSpec {
            numerator: map.numerator().iter().map(|&z| cx(z)).collect(),
            denominator: map.denominator().iter().map(|&z| cx(z)).collect(),
        }
    }
}

/// One coefficient-perturbation direction.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DirectionSpec {
    pub numerator: Vec<Cx>,
    pub denominator: Vec<Cx>,
}

/// Family specification: base map, direction deltas, parameter radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base: MapSpec,
    pub directions: Vec<DirectionSpec>,
    pub radius: f64,
}

impl FamilySpec {
    pub fn to_family(&self) -> anyhow::Result<ParameterFamily> {
        let base = self.base.to_map()?;
        let dirs: Vec<(Vec<C64>, Vec<C64>)> = self
            .directions
            .iter()
            .map(|d| {
                (
                    d.numerator.iter().map(|&v| from_cx(v)).collect(),
                    d.denominator.iter().map(|&v| from_cx(v)).collect(),
                )
            })
            .collect();
        ParameterFamily::new(base, &dirs, self.radius)
            .map_err(|e| anyhow::anyhow!("invalid family: {e}"))
    }
}

pub fn load_map(path: &std::path::Path) -> anyhow::Result<(MapSpec, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading map file {}", path.display()))?;
    let spec: MapSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing map file {}", path.display()))?;
    Ok((spec, text))
}

pub fn load_family(path: &std::path::Path) -> anyhow::Result<(FamilySpec, String)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading family file {}", path.display()))?;
    let spec: FamilySpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing family file {}", path.display()))?;
    if spec.radius <= 0.0 {
        bail!("family radius must be positive");
    }
    Ok((spec, text))
}

/// SHA-256 of the canonical (re-serialized) family JSON.
pub fn family_hash(spec: &FamilySpec) -> String {
    let canonical = serde_json::to_string(spec).expect("family serializes");
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// --- classification report -------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitReportOut {
    pub label: usize,
    pub kind: String,
    pub preperiod: usize,
    pub period: usize,
    pub multiplier: Cx,
    pub landing_residual: f64,
    pub confirmed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonSummaryOut {
    pub points: usize,
    pub truncation: usize,
    pub lambda: f64,
    pub expansion_power: usize,
    pub delta: f64,
    pub delta_prime: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationOut {
    pub verdict: String,
    pub orbits: Vec<OrbitReportOut>,
    pub undecided_labels: Vec<usize>,
    pub skeleton: Option<SkeletonSummaryOut>,
}

pub fn kind_name(kind: CycleKind) -> &'static str {
    match kind {
        CycleKind::Superattracting => "superattracting",
        CycleKind::Attracting => "attracting",
        CycleKind::Repelling => "repelling",
        CycleKind::Indifferent => "indifferent",
    }
}

pub fn verdict_name(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Misiurewicz => "misiurewicz",
        Verdict::HyperbolicLike => "hyperbolic-like",
        Verdict::Undecided => "undecided",
    }
}

pub fn classification_out(
    cls: &Classification,
    skeleton: Option<&PostcriticalSkeleton>,
) -> ClassificationOut {
    let mut orbits = Vec::new();
    let mut undecided = Vec::new();
    for (i, rep) in cls.reports.iter().enumerate() {
        match rep {
            Some(r) => orbits.push(OrbitReportOut {
                label: r.label,
                kind: kind_name(r.cycle.kind).to_string(),
                preperiod: r.preperiod,
                period: r.cycle.period,
                multiplier: cx(r.cycle.multiplier),
                landing_residual: r.landing_residual,
                confirmed: r.confirmed,
            }),
            None => undecided.push(i),
        }
    }
    ClassificationOut {
        verdict: verdict_name(cls.verdict).to_string(),
        orbits,
        undecided_labels: undecided,
        skeleton: skeleton.map(|s| SkeletonSummaryOut {
            points: s.points.len(),
            truncation: s.k,
            lambda: s.lambda,
            expansion_power: s.expansion_power,
            delta: s.delta,
            delta_prime: s.delta_prime,
        }),
    }
}

// --- certificate -------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelCertOut {
    pub label: usize,
    pub preperiod: usize,
    pub period: usize,
    pub multiplier: Cx,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintOut {
    pub label: usize,
    pub total_iterate: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetOut {
    pub stage: usize,
    pub large_scale: f64,
    pub covering_bound: usize,
    pub u_radius: f64,
    pub shadow_tol: f64,
    pub expansion_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateOut {
    pub family_hash: String,
    /// Solution parameter, one `[re, im]` pair per coordinate.
    pub a_star: Vec<Cx>,
    /// Low-order double-double correction of each coordinate.
    pub a_star_correction: Vec<Cx>,
    pub labels: Vec<LabelCertOut>,
    pub constraints: Vec<ConstraintOut>,
    pub budget_schedule: Vec<BudgetOut>,
    pub dominance_margins: Vec<f64>,
    pub verification_precision: String,
    pub pass: bool,
    pub failures: Vec<String>,
}

pub fn certificate_out(cert: &ClosingCertificate, hash: String) -> CertificateOut {
    CertificateOut {
        family_hash: hash,
        a_star: cert.a_star.iter().map(|&z| cx(z)).collect(),
        a_star_correction: cert.a_star_dd.iter().map(|&(_, lo)| cx(lo)).collect(),
        labels: cert
            .labels
            .iter()
            .map(|l| LabelCertOut {
                label: l.label,
                preperiod: l.preperiod,
                period: l.period,
                multiplier: cx(l.multiplier),
                residual: l.residual,
            })
            .collect(),
        constraints: cert
            .constraints
            .iter()
            .map(|c| ConstraintOut {
                label: c.label,
                total_iterate: c.total_iterate,
            })
            .collect(),
        budget_schedule: cert
            .budgets
            .iter()
            .map(|b| BudgetOut {
                stage: b.stage,
                large_scale: b.large_scale,
                covering_bound: b.covering_bound,
                u_radius: b.u_radius,
                shadow_tol: b.shadow_tol,
                expansion_bound: b.expansion_bound,
            })
            .collect(),
        dominance_margins: cert.dominance_margins.clone(),
        verification_precision: "double-double (106-bit significand)".to_string(),
        pass: cert.pass,
        failures: cert.failures.clone(),
    }
}

impl CertificateOut {
    pub fn to_core(&self) -> ClosingCertificate {
        ClosingCertificate {
            a_star: self.a_star.iter().map(|&v| from_cx(v)).collect(),
            a_star_dd: self
                .a_star
                .iter()
                .zip(self.a_star_correction.iter())
                .map(|(&hi, &lo)| (from_cx(hi), from_cx(lo)))
                .collect(),
            labels: self
                .labels
                .iter()
                .map(|l| misclose_core::closing::LabelCertificate {
                    label: l.label,
                    preperiod: l.preperiod,
                    period: l.period,
                    multiplier: from_cx(l.multiplier),
                    residual: l.residual,
                })
                .collect(),
            constraints: self
                .constraints
                .iter()
                .map(|c| ClosingConstraint {
                    label: c.label,
                    total_iterate: c.total_iterate,
                })
                .collect(),
            budgets: self
                .budget_schedule
                .iter()
                .map(|b| NeighborhoodBudget {
                    stage: b.stage,
                    large_scale: b.large_scale,
                    covering_bound: b.covering_bound,
                    u_radius: b.u_radius,
                    shadow_tol: b.shadow_tol,
                    expansion_bound: b.expansion_bound,
                })
                .collect(),
            dominance_margins: self.dominance_margins.clone(),
            pass: self.pass,
            failures: self.failures.clone(),
        }
    }
}

/// Write pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &std::path::Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
