use std::fs;
use std::path::{Path, PathBuf};

use alseg::learner::write_seed_file;
use alseg::postproc::BinaryVolume;
use alseg::scenario::{label_from_truth, plate_phantom, PLATE_SCHEDULE};
use alseg::volume::{make_phantom, save_volume, PhantomSpec};
use anyhow::{Context, Result};

use crate::manifest::RunManifest;

pub const VOLUME_FILE: &str = "volume.raw";
pub const LABELS_FILE: &str = "labels.raw";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhantomFiles {
    pub volume: PathBuf,
    /// u8 labels, one id per primitive and 0 for background.
    pub labels: PathBuf,
}

/// Writes the phantom volume and its label volume into `out`.
pub fn cmd_phantom(spec: &PhantomSpec, out: &Path) -> Result<PhantomFiles> {
    let phantom = make_phantom(spec)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let files = PhantomFiles {
        volume: out.join(VOLUME_FILE),
        labels: out.join(LABELS_FILE),
    };
    save_volume(&files.volume, &phantom.volume)?;
    save_volume(&files.labels, &phantom.labels)?;
    Ok(files)
}

/// Writes the plate phantom, its four seed files labelled from the ground
/// truth, and a run manifest using them. Returns the manifest path.
pub fn write_plate_scenario(seed: u64, out: &Path) -> Result<PathBuf> {
    let spec = plate_phantom(seed);
    cmd_phantom(&spec, out)?;
    let truth = BinaryVolume::from_bools(spec.dims, &make_phantom(&spec)?.foreground())?;
    let mut seedfiles = Vec::new();
    for (i, round) in PLATE_SCHEDULE.iter().enumerate() {
        let name = PathBuf::from(format!("round_{}.seeds", i + 1));
        write_seed_file(&out.join(&name), &label_from_truth(round, &truth))?;
        seedfiles.push(name);
    }
    let manifest = RunManifest {
        volume: Some(PathBuf::from(VOLUME_FILE)),
        phantom: None,
        ground_truth: Some(PathBuf::from(LABELS_FILE)),
        seedfiles,
        out: PathBuf::from("run"),
        seed: None,
        load: Default::default(),
        params: Default::default(),
        postproc: Default::default(),
    };
    let path = out.join("manifest.toml");
    fs::write(&path, manifest.to_text()).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
