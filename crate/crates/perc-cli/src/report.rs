//! Run artifacts: the fixed-schema CSV of estimates, the JSON manifest,
//! and checkpoints that let long single-accumulator runs resume exactly.
//! Files are written atomically (temp file in place, then rename).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use perc_core::estimate::Estimate;
use serde::{Deserialize, Serialize};

use crate::config::Resolved;

/// Samples per checkpoint interval on chunked runs.
pub const CHECKPOINT_CHUNK: u64 = 1_000_000;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn epoch_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// One CSV row; every experiment reports estimates in this shape.
struct Row {
    experiment: String,
    n: i64,
    p: f64,
    variant: String,
    samples: u64,
    mean: f64,
    stderr: f64,
    seed: u64,
    stream: u64,
}

/// Buffered CSV output with the fixed column set.
#[derive(Default)]
pub struct Csv {
    rows: Vec<Row>,
}

impl Csv {
    pub fn push(&mut self, experiment: impl Into<String>, n: i64, p: f64, variant: &str, est: &Estimate) {
        self.rows.push(Row {
            experiment: experiment.into(),
            n,
            p,
            variant: variant.to_string(),
            samples: est.samples(),
            mean: est.mean(),
            stderr: est.stderr(),
            seed: est.seed(),
            stream: est.streams().start,
        });
    }

    /// A row for an exactly computed value: zero stderr, no rng columns.
    pub fn push_exact(
        &mut self,
        experiment: impl Into<String>,
        n: i64,
        p: f64,
        variant: &str,
        samples: u64,
        mean: f64,
    ) {
        self.rows.push(Row {
            experiment: experiment.into(),
            n,
            p,
            variant: variant.to_string(),
            samples,
            mean,
            stderr: 0.0,
            seed: 0,
            stream: 0,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        let mut text = String::from("experiment,n,p,variant,samples,mean,stderr,seed,stream\n");
        for r in &self.rows {
            writeln!(
                text,
                "{},{},{},{},{},{},{},{},{}",
                r.experiment, r.n, r.p, r.variant, r.samples, r.mean, r.stderr, r.seed, r.stream
            )
            .expect("writing to a string cannot fail");
        }
        atomic_write(path, text.as_bytes())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    seed: u64,
    version: &'static str,
    started: u64,
    finished: u64,
    rows_written: usize,
    /// Enough to re-run: pass this manifest back as the config file.
    experiment: &'static str,
    config: &'a BTreeMap<String, String>,
}

/// Where one run's artifacts live.
pub struct Artifacts {
    pub csv_path: PathBuf,
    manifest_path: PathBuf,
    checkpoint_path: PathBuf,
    started: u64,
}

impl Artifacts {
    pub fn new(out_dir: &Path, name: &str) -> Artifacts {
        Artifacts {
            csv_path: out_dir.join(format!("{name}.csv")),
            manifest_path: out_dir.join(format!("{name}.manifest.json")),
            checkpoint_path: out_dir.join(format!("{name}.checkpoint.json")),
            started: epoch_seconds(),
        }
    }

    pub fn sibling(&self, suffix: &str) -> PathBuf {
        self.csv_path.with_file_name(format!(
            "{}.{suffix}",
            self.csv_path.file_stem().unwrap().to_string_lossy()
        ))
    }

    /// Write the CSV and its manifest.
    pub fn commit(&self, csv: &Csv, resolved: &Resolved, seed: u64) -> anyhow::Result<()> {
        csv.write(&self.csv_path)?;
        let manifest = Manifest {
            config_hash: resolved.hash(),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            started: self.started,
            finished: epoch_seconds(),
            rows_written: csv.len(),
            experiment: resolved.experiment,
            config: &resolved.values,
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        atomic_write(&self.manifest_path, json.as_bytes())?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config_hash: String,
    samples_done: u64,
    successes: u64,
}

/// Run an indicator estimate in checkpointed chunks: after every chunk
/// short of the end, persist the accumulator; on start, resume from a
/// checkpoint whose config hash matches. Streams advance by sample
/// index, so a resumed run merges to the same pooled estimate as an
/// uninterrupted one.
pub fn run_chunked(
    artifacts: &Artifacts,
    config_hash: &str,
    seed: u64,
    stream: u64,
    budget: u64,
    mut chunk: impl FnMut(u64, u64) -> anyhow::Result<u64>,
) -> anyhow::Result<Estimate> {
    let (mut done, mut successes) = (0u64, 0u64);
    if let Ok(text) = std::fs::read_to_string(&artifacts.checkpoint_path) {
        match serde_json::from_str::<Checkpoint>(&text) {
            Ok(cp) if cp.config_hash == config_hash && cp.samples_done <= budget => {
                done = cp.samples_done;
                successes = cp.successes;
                eprintln!("resuming from checkpoint: {done}/{budget} samples");
            }
            _ => eprintln!("ignoring stale checkpoint"),
        }
    }
    while done < budget {
        let len = CHECKPOINT_CHUNK.min(budget - done);
        successes += chunk(stream + done, len)?;
        done += len;
        if done < budget {
            let cp = Checkpoint {
                config_hash: config_hash.to_string(),
                samples_done: done,
                successes,
            };
            atomic_write(
                &artifacts.checkpoint_path,
                serde_json::to_string(&cp)?.as_bytes(),
            )?;
        }
    }
    let _ = std::fs::remove_file(&artifacts.checkpoint_path);
    Ok(Estimate::indicator(
        successes,
        budget,
        seed,
        stream..stream + budget,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_have_the_fixed_schema() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = Csv::default();
        csv.push("pi", 4, 0.5, "", &Estimate::indicator(3, 10, 7, 5..15));
        csv.push_exact("enumerate.pi", 1, 0.5, "exact", 4096, 0.9375);
        let path = dir.path().join("t.csv");
        csv.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,n,p,variant,samples,mean,stderr,seed,stream"
        );
        assert_eq!(lines.next().unwrap().split(',').count(), 9);
        assert!(text.contains("enumerate.pi,1,0.5,exact,4096,0.9375,0,0,0"));
    }

    #[test]
    fn chunked_runs_resume_from_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let artifacts = Artifacts::new(dir.path(), "t");
        // Deterministic fake chunk: one success per even stream index.
        let count = |start: u64, len: u64| -> anyhow::Result<u64> {
            Ok((start..start + len).filter(|s| s % 2 == 0).count() as u64)
        };

        let full = run_chunked(&artifacts, "h", 1, 0, 10, count).unwrap();
        assert!(!artifacts.checkpoint_path.exists());

        // Simulate an interrupted run: persist a mid-run checkpoint, then
        // finish from it; the pooled estimate matches the uninterrupted one.
        let cp = Checkpoint {
            config_hash: "h".into(),
            samples_done: 4,
            successes: 2,
        };
        atomic_write(
            &artifacts.checkpoint_path,
            serde_json::to_string(&cp).unwrap().as_bytes(),
        )
        .unwrap();
        let resumed = run_chunked(&artifacts, "h", 1, 0, 10, |start, len| {
            assert!(start >= 4, "resume must not replay finished streams");
            count(start, len)
        })
        .unwrap();
        assert_eq!(resumed, full);

        // A checkpoint from a different config is ignored.
        atomic_write(
            &artifacts.checkpoint_path,
            serde_json::to_string(&Checkpoint {
                config_hash: "other".into(),
                samples_done: 4,
                successes: 99,
            })
            .unwrap()
            .as_bytes(),
        )
        .unwrap();
        let fresh = run_chunked(&artifacts, "h", 1, 0, 10, count).unwrap();
        assert_eq!(fresh, full);
    }
}
