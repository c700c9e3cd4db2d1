//! CSV emission, run manifests and replay.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::{mean, std_dev};
use super::runner::{run_scenario, RunOutput};
use super::scenario::{AttackKind, ScenarioConfig};
use crate::error::{BrnesError, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "episode",
    "sg",
    "reward",
    "delta_q_mean",
    "tg_cumulative",
    "advice_requests",
    "advice_responses",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub master_seed: u64,
    pub config: ScenarioConfig,
}

impl Manifest {
    pub fn for_config(config: &ScenarioConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            config: config.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| BrnesError::Format {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        if m.master_seed != m.config.master_seed {
            return Err(BrnesError::Format {
                path: path.to_owned(),
                message: "master_seed disagrees with config.master_seed".into(),
            });
        }
        Ok(m)
    }
}

/// Which files `emit_csv` should write besides the core metrics.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmitOptions {
    /// Writes `timing.csv` with wall-clock TG. Off keeps every file a pure
    /// function of the manifest.
    pub timing: bool,
    pub q_tables: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BrnesError + '_ {
    move |source| BrnesError::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> BrnesError + '_ {
    move |source| BrnesError::Csv {
        path: path.to_owned(),
        source,
    }
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes `metrics.csv`, `heatmap.csv`, `inference.csv` (inference runs),
/// `advice.csv` (when logged) and `manifest.json` into `out_dir`.
///
/// `metrics.csv` leaves `tg_cumulative` out so that replays are
/// byte-identical; wall-clock timings go to `timing.csv` instead.
pub fn emit_csv(run: &RunOutput, out_dir: &Path, opts: EmitOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut written = Vec::new();

    let path = out_dir.join("metrics.csv");
    let header: Vec<&str> = METRICS_HEADER
        .iter()
        .copied()
        .filter(|h| *h != "tg_cumulative")
        .collect();
    write_rows(
        &path,
        &header,
        run.metrics.iter().map(|m| {
            [
                m.episode.to_string(),
                m.sg.to_string(),
                m.reward.to_string(),
                m.delta_q_mean.to_string(),
                m.advice_requests.to_string(),
                m.advice_responses.to_string(),
            ]
        }),
    )?;
    written.push(path);

    if opts.timing {
        let path = out_dir.join("timing.csv");
        write_rows(
            &path,
            &["episode", "tg_cumulative"],
            run.metrics
                .iter()
                .map(|m| [m.episode.to_string(), m.tg_cumulative.to_string()]),
        )?;
        written.push(path);
    }

    let path = out_dir.join("heatmap.csv");
    write_rows(
        &path,
        &["x", "y", "visit_count"],
        run.heatmap
            .iter()
            .map(|h| [h.x.to_string(), h.y.to_string(), h.visit_count.to_string()]),
    )?;
    written.push(path);

    if run.config.attacker_kind == AttackKind::Inference {
        let path = out_dir.join("inference.csv");
        write_rows(
            &path,
            &[
                "episode",
                "attacker_id",
                "queries_issued",
                "qualifying_states",
                "success_rate_pct",
            ],
            run.inference.iter().map(|r| {
                [
                    r.episode.to_string(),
                    r.attacker_id.to_string(),
                    r.queries_issued.to_string(),
                    r.qualifying_states.to_string(),
                    r.success_rate_pct.to_string(),
                ]
            }),
        )?;
        written.push(path);
    }

    if run.config.options.log_advice {
        let path = out_dir.join("advice.csv");
        write_rows(
            &path,
            &[
                "episode",
                "step",
                "advisee",
                "advisor",
                "state",
                "gave_advice",
                "perturbed",
            ],
            run.advice_log.iter().map(|r| {
                [
                    r.episode.to_string(),
                    r.step.to_string(),
                    r.advisee.to_string(),
                    r.advisor.to_string(),
                    r.state.to_string(),
                    u8::from(r.gave_advice).to_string(),
                    u8::from(r.perturbed).to_string(),
                ]
            }),
        )?;
        written.push(path);
    }

    if opts.q_tables {
        let dir = out_dir.join("qtables");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (i, q) in run.q_tables.iter().enumerate() {
            let path = dir.join(format!("agent_{i}.csv"));
            q.save_csv(&path)?;
            written.push(path);
        }
    }

    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&Manifest::for_config(&run.config))
        .expect("config serialises");
    let mut f = File::create(&path).map_err(io_err(&path))?;
    writeln!(f, "{json}").map_err(io_err(&path))?;
    written.push(path);

    Ok(written)
}

/// Re-runs the scenario recorded in a manifest and writes its outputs.
pub fn replay(manifest: &Path, out_dir: &Path, opts: EmitOptions) -> Result<RunOutput> {
    let m = Manifest::load(manifest)?;
    let run = run_scenario(&m.config)?;
    emit_csv(&run, out_dir, opts)?;
    Ok(run)
}

/// Per-episode mean and standard deviation across seeds.
pub fn write_summary(runs: &[RunOutput], path: &Path) -> Result<()> {
    let episodes = runs.iter().map(|r| r.metrics.len()).min().unwrap_or(0);
    let stat = |e: usize, f: fn(&super::metrics::MetricsRecord) -> f64| {
        let v: Vec<f64> = runs.iter().map(|r| f(&r.metrics[e])).collect();
        [mean(v.iter().copied()).to_string(), std_dev(&v).to_string()]
    };
    write_rows(
        path,
        &[
            "episode",
            "sg_mean",
            "sg_std",
            "reward_mean",
            "reward_std",
            "delta_q_mean_mean",
            "delta_q_mean_std",
        ],
        (0..episodes).map(|e| {
            let mut row = vec![e.to_string()];
            row.extend(stat(e, |m| m.sg));
            row.extend(stat(e, |m| m.reward));
            row.extend(stat(e, |m| m.delta_q_mean));
            row
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::{Scale, Variant};

    #[test]
    fn manifest_round_trips_config() {
        let mut cfg = ScenarioConfig::new(
            Scale::Custom {
                height: 6,
                width: 7,
                n_agents: 3,
                n_obstacles: 2,
            },
            Variant::LdpOnly,
        )
        .with_attack(AttackKind::Byzantine, 0.3)
        .with_epsilon(0.37)
        .with_seed(123);
        cfg.params.alpha = 0.1 + 0.2;
        let m = Manifest::for_config(&cfg);
        let back: Manifest = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn missing_manifest_reports_path() {
        let err = Manifest::load(Path::new("/definitely/not/here.json")).unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.json"));
    }
}
