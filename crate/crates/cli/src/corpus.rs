use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use scenred_core::csv_io::{load_csv, save_csv};
use scenred_core::reduce::{heuristic_search_reduce, ReductionConfig};
use scenred_core::scenario::canonical_order;
use scenred_core::{NormalizationParams, ScenarioSet};

use crate::error::{CliError, Result};

const TARGET_SUFFIX: &str = ".target.csv";
const MANIFEST: &str = "teacher.json";

/// Scenario-set CSVs of one directory, sorted by file name.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub sets: Vec<ScenarioSet>,
}

impl Corpus {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let mut files = Vec::new();
        for entry in fs::read_dir(&dir).map_err(CliError::file(&dir))? {
            let path = entry.map_err(CliError::file(&dir))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.ends_with(".csv") && !name.ends_with(TARGET_SUFFIX) {
                files.push(path);
            }
        }
        files.sort();
        if files.is_empty() {
            return Err(scenred_core::Error::EmptyCorpus.into());
        }
        let sets = files.iter().map(load_csv).collect::<scenred_core::Result<Vec<_>>>()?;
        let (t, s) = (sets[0].horizon(), sets[0].size());
        if let Some((file, set)) = files.iter().zip(&sets).find(|(_, x)| (x.horizon(), x.size()) != (t, s)) {
            return Err(CliError::InconsistentCorpus {
                path: dir,
                message: format!(
                    "{} has {} scenarios of {} steps, expected {s} of {t}",
                    file.display(),
                    set.size(),
                    set.horizon()
                ),
            });
        }
        Ok(Self { dir, files, sets })
    }

    pub fn horizon(&self) -> usize {
        self.sets[0].horizon()
    }

    pub fn size(&self) -> usize {
        self.sets[0].size()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn file_name(&self, i: usize) -> String {
        self.files[i].file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

pub fn target_path(file: &Path) -> PathBuf {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    file.with_file_name(format!("{stem}{TARGET_SUFFIX}"))
}

/// Settings the cached teacher targets were produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TeacherManifest {
    target_size: usize,
    lambda_moment: f64,
    max_hs_passes: usize,
    normalization: NormalizationParams,
}

/// Heuristic-search reduction of one raw set, run in normalized, canonical
/// order and returned in raw units.
pub fn teacher_reduce(set: &ScenarioSet, cfg: &ReductionConfig, norm: &NormalizationParams) -> Result<ScenarioSet> {
    let scaled = norm.apply(set)?;
    let reduced = heuristic_search_reduce(&canonical_order(&scaled), cfg)?;
    to_raw_units(set, &scaled, &reduced, norm)
}

/// Maps a reduction of `scaled` (the normalized `raw`) back to raw units.
/// Scenarios copied from the input come back bit for bit; anything else,
/// such as a centroid, is unscaled.
pub fn to_raw_units(
    raw: &ScenarioSet,
    scaled: &ScenarioSet,
    reduced: &ScenarioSet,
    norm: &NormalizationParams,
) -> Result<ScenarioSet> {
    let bits = |row: &[f64]| row.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let index: HashMap<Vec<u64>, usize> = scaled.scenarios().enumerate().map(|(s, row)| (bits(row), s)).collect();
    let rows = reduced
        .scenarios()
        .map(|row| match index.get(&bits(row)) {
            Some(&s) => raw.scenario(s).to_vec(),
            None => row.iter().map(|&v| norm.unscale(v)).collect(),
        })
        .collect();
    Ok(ScenarioSet::new(rows, reduced.probs().to_vec())?)
}

/// Teacher targets for every corpus set, read from the `.target.csv` cache
/// when it was built with the same settings and computed in parallel
/// otherwise.
pub fn teacher_targets(corpus: &Corpus, cfg: &ReductionConfig, norm: &NormalizationParams) -> Result<Vec<ScenarioSet>> {
    let manifest = TeacherManifest {
        target_size: cfg.target_size,
        lambda_moment: cfg.lambda_moment,
        max_hs_passes: cfg.max_hs_passes,
        normalization: *norm,
    };
    let manifest_path = corpus.dir.join(MANIFEST);
    if let Some(cached) = read_cache(corpus, &manifest_path, &manifest) {
        return Ok(cached);
    }
    let targets = corpus
        .sets
        .par_iter()
        .map(|set| teacher_reduce(set, cfg, norm))
        .collect::<Result<Vec<_>>>()?;
    for (file, target) in corpus.files.iter().zip(&targets) {
        save_csv(target, target_path(file))?;
    }
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?).map_err(CliError::file(&manifest_path))?;
    Ok(targets)
}

fn read_cache(corpus: &Corpus, manifest_path: &Path, expected: &TeacherManifest) -> Option<Vec<ScenarioSet>> {
    let found: TeacherManifest = serde_json::from_str(&fs::read_to_string(manifest_path).ok()?).ok()?;
    if found != *expected {
        return None;
    }
    let targets = corpus
        .files
        .iter()
        .map(|f| load_csv(target_path(f)).ok())
        .collect::<Option<Vec<_>>>()?;
    targets
        .iter()
        .all(|t| t.size() == expected.target_size && t.horizon() == corpus.horizon())
        .then_some(targets)
}
