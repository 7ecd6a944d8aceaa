//! Versioned JSON snapshot of a [`CheckpointedRun`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CheckpointedRun, ModelKind};
use crate::error::{Result, TriageError};

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "triage-checkpointed-run";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    model_kind: ModelKind,
    checkpoints: usize,
    dim: usize,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    header: Header,
    run: CheckpointedRun,
}

pub fn save_run(run: &CheckpointedRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = SnapshotFile {
        header: Header {
            format: FORMAT_TAG.to_string(),
            version: SNAPSHOT_FORMAT_VERSION,
            model_kind: run.model_kind(),
            checkpoints: run.checkpoints(),
            dim: run.dim(),
            seed: run.seed(),
        },
        run: run.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| TriageError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| TriageError::io(path, e))
}

pub fn load_run(path: impl AsRef<Path>) -> Result<CheckpointedRun> {
    let path = path.as_ref();
    let bad = |message: String| TriageError::Format {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| TriageError::io(path, e))?;
    let file: SnapshotFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let h = &file.header;
    if h.format != FORMAT_TAG {
        return Err(bad(format!("unexpected format tag '{}'", h.format)));
    }
    if h.version != SNAPSHOT_FORMAT_VERSION {
        return Err(bad(format!("unsupported snapshot version {}", h.version)));
    }
    let run = file.run;
    if h.model_kind != run.model_kind()
        || h.checkpoints != run.checkpoints()
        || h.dim != run.dim()
        || h.seed != run.seed()
    {
        return Err(bad("header does not match snapshot body".to_string()));
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_linear_synthetic;
    use crate::regressors::{fit, TrainingConfig};

    #[test]
    fn round_trip_preserves_predictions_bit_exactly() {
        let ds = generate_linear_synthetic(40, &[1.0, -0.5], 0.2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (k, cfg) in [
            TrainingConfig::linear(4, 0.1, 2),
            TrainingConfig::gbdt(4, 0.3, 2, 2),
            TrainingConfig::feedforward(vec![5, 3], 4, 0.01, 2),
        ]
        .iter()
        .enumerate()
        {
            let run = fit(&ds, cfg).unwrap();
            let p = dir.path().join(format!("run{k}.json"));
            save_run(&run, &p).unwrap();
            assert_eq!(load_run(&p).unwrap(), run);
        }
    }

    #[test]
    fn rejects_foreign_version() {
        let ds = generate_linear_synthetic(10, &[1.0], 0.2, 1).unwrap();
        let run = fit(&ds, &TrainingConfig::linear(2, 0.1, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        save_run(&run, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap().replace("\"version\":1", "\"version\":99");
        std::fs::write(&p, text).unwrap();
        assert!(matches!(load_run(&p), Err(TriageError::Format { .. })));
    }
}
