//! `misclose classify`: Misiurewicz classification of a single map.

use std::path::Path;

use misclose_core::critical::critical_points;
use misclose_core::orbit::{build_skeleton, classify_critical_orbits, SkeletonOptions, Verdict};

use crate::config::RunConfig;
use crate::formats::{self, ClassificationOut};

pub struct ClassifyOutcome {
    pub report: ClassificationOut,
    pub exit_code: i32,
}

pub fn run(map_path: &Path, config: &RunConfig) -> anyhow::Result<ClassifyOutcome> {
    let (spec, _) = formats::load_map(map_path)?;
    let map = spec.to_map()?;
    let labeling =
        critical_points(&map).map_err(|e| anyhow::anyhow!("critical point search: {e}"))?;
    let cls = classify_critical_orbits(&map, &labeling, config.classify_options());

    let skeleton = if cls.verdict == Verdict::Misiurewicz {
        build_skeleton(&map, &labeling, &cls, SkeletonOptions::default()).ok()
    } else {
        None
    };

    let report = formats::classification_out(&cls, skeleton.as_ref());
    let out_path = config.out_dir.join("classification.json");
    formats::write_json(&out_path, &report)?;

    let exit_code = match cls.verdict {
        Verdict::Misiurewicz => 0,
        _ => 1,
    };
    Ok(ClassifyOutcome { report, exit_code })
}
