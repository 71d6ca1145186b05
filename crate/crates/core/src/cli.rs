//! Subcommands wiring the pipeline stages to files.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evaluation::{ground_truth_objects, recall_curves, IouTable};
use crate::geometry::{load_cloud, Segment, SegmentId};
use crate::oversegment::{oversegment, remove_background};
use crate::pipeline::{prepare_scene, segment_pairs};
use crate::predictor::{GroupingPredictor, HeuristicPredictor, ModelPredictor, OraclePredictor, PredictorModel};
use crate::regret_grouping::run_grouping;
use crate::synthgen::{generate_dataset, Manifest, Split};
use crate::training::{curriculum_train, phase_log_csv, TrainScene};

#[derive(Debug, Parser)]
#[command(name = "regret3d", version, about = "Bottom-up 3D object proposals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// JSON config file or `key.path=value` override; repeatable, later
    /// entries win.
    #[arg(long = "config", value_name = "FILE|KEY=VALUE")]
    pub config: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PredictorKind {
    Oracle,
    Heuristic,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset with a manifest.
    Synth {
        #[arg(long)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Start every scene with two objects in near contact.
        #[arg(long)]
        adversarial: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Over-segment a cloud into planar segments.
    Overseg {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the pair predictor on the train split of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Group segments into ranked proposals.
    Group {
        #[arg(long)]
        segments: PathBuf,
        #[arg(long, conflicts_with = "predictor", required_unless_present = "predictor")]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        predictor: Option<PredictorKind>,
        #[arg(long)]
        out: PathBuf,
        /// Write one JSON record per iteration to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score proposals against a labeled cloud and write recall CSVs.
    Eval {
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub id: u32,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentsFile {
    pub cloud: PathBuf,
    pub segments: Vec<SegmentEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalEntry {
    pub id: u32,
    pub indices: Vec<usize>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProposalsFile {
    pub cloud: PathBuf,
    pub proposals: Vec<ProposalEntry>,
}

/// 2 for configuration and validation errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Unlabeled(_) => 2,
        _ => 1,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, (serde_json::to_string(value)? + "\n").as_bytes())
}

fn out_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

/// Phase log written next to the model: `model.txt` gets `model.phases.csv`.
pub fn phase_log_path(model: &Path) -> PathBuf {
    model.with_extension("phases.csv")
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            scenes,
            seed,
            out,
            adversarial,
            config,
        } => {
            let mut cfg = RunConfig::load(&config.config)?;
            cfg.synth.adversarial |= adversarial;
            generate_dataset(scenes, &cfg.synth, seed, &out)?;
            cfg.write_lock(&out)
        }
        Command::Overseg { input, out, config } => {
            let cfg = RunConfig::load(&config.config)?;
            let cloud = load_cloud(&input)?;
            let segments = remove_background(oversegment(&cloud, &cfg.ransac)?, cloud.len(), &cfg.ransac);
            let file = SegmentsFile {
                cloud: input,
                segments: segments
                    .into_iter()
                    .map(|s| SegmentEntry {
                        id: s.id.0,
                        indices: s.indices().to_vec(),
                    })
                    .collect(),
            };
            write_json(&out, &file)?;
            cfg.write_lock(out_dir(&out))
        }
        Command::Train { manifest, out, config } => {
            let cfg = RunConfig::load(&config.config)?;
            let base = out_dir(&manifest).to_path_buf();
            let paths = Manifest::load(&manifest)?.paths(Split::Train, &base);
            if paths.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "{}: no training scenes",
                    manifest.display()
                )));
            }
            let mut scenes = Vec::with_capacity(paths.len());
            for path in paths {
                let cloud = load_cloud(&path)?;
                let prep = prepare_scene(&cloud, &cfg.ransac, &cfg.grid)?;
                log::info!(
                    "{}: {} segments, {} pairs",
                    path.display(),
                    prep.segments.len(),
                    prep.pairs.len()
                );
                scenes.push(TrainScene {
                    cloud,
                    segments: prep.segments,
                    pairs: prep.pairs,
                });
            }
            let model = PredictorModel::new(&cfg.model, cfg.sample.n)?;
            let outcome = curriculum_train(&scenes, model, &cfg.train)?;
            write_file(&out, outcome.model.to_text().as_bytes())?;
            write_file(&phase_log_path(&out), phase_log_csv(&outcome.log).as_bytes())?;
            cfg.write_lock(out_dir(&out))
        }
        Command::Group {
            segments,
            model,
            predictor,
            out,
            trace,
            config,
        } => {
            let cfg = RunConfig::load(&config.config)?;
            let file: SegmentsFile = read_json(&segments)?;
            let cloud = load_cloud(&file.cloud)?;
            let segs = file
                .segments
                .into_iter()
                .map(|s| Segment::new(SegmentId(s.id), s.indices))
                .collect::<Result<Vec<_>>>()?;
            let pairs = segment_pairs(&cloud, &segs, &cfg.grid)?;
            let g: Box<dyn GroupingPredictor> = match (model, predictor) {
                (Some(path), _) => Box::new(ModelPredictor::new(PredictorModel::load(&path)?)),
                (None, Some(PredictorKind::Oracle)) => Box::new(OraclePredictor::new(&cloud)?),
                (None, Some(PredictorKind::Heuristic)) => Box::new(HeuristicPredictor::new(cfg.heuristic.clone())?),
                (None, None) => return Err(Error::InvalidConfig("either --model or --predictor is required".into())),
            };
            let outcome = run_grouping(&cloud, segs, pairs, &g, &cfg.group)?;
            let file = ProposalsFile {
                cloud: file.cloud,
                proposals: outcome
                    .proposals
                    .iter()
                    .map(|p| ProposalEntry {
                        id: p.segment.id.0,
                        indices: p.segment.indices().to_vec(),
                        score: p.score,
                    })
                    .collect(),
            };
            write_json(&out, &file)?;
            if let Some(path) = trace {
                let mut buf = Vec::new();
                for record in &outcome.trace {
                    serde_json::to_writer(&mut buf, record)?;
                    buf.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
                }
                write_file(&path, &buf)?;
            }
            cfg.write_lock(out_dir(&out))
        }
        Command::Eval {
            proposals,
            gt,
            out,
            config,
        } => {
            let cfg = RunConfig::load(&config.config)?;
            let cloud = load_cloud(&gt)?;
            let gts = ground_truth_objects(&cloud, cfg.eval.min_object_points)?;
            let file: ProposalsFile = read_json(&proposals)?;
            let ranked: Vec<(u32, Vec<usize>)> = file.proposals.into_iter().map(|p| (p.id, p.indices)).collect();
            let table = IouTable::new(&cloud, &ranked, &gts, cfg.eval.iou_mode)?;
            let report = recall_curves(&[(gt.display().to_string(), table)], &cfg.eval)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            report.write_csvs(&out)?;
            cfg.write_lock(&out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::Unlabeled("x".into())), 2);
        assert_eq!(exit_code(&Error::EmptyCloud), 1);
        assert_eq!(exit_code(&Error::io("a", std::io::Error::other("b"))), 1);
    }

    #[test]
    fn group_needs_a_predictor() {
        let r = Cli::try_parse_from(["regret3d", "group", "--segments", "s.json", "--out", "p.json"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from([
            "regret3d",
            "group",
            "--segments",
            "s",
            "--out",
            "p",
            "--model",
            "m",
            "--predictor",
            "oracle",
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn config_flag_repeats() {
        let cli = Cli::try_parse_from([
            "regret3d", "overseg", "--input", "c.xyzl", "--out", "s.json", "--config", "a.json", "--config", "grid.m=8",
        ])
        .unwrap();
        let Command::Overseg { config, .. } = cli.command else {
            panic!()
        };
        assert_eq!(config.config, ["a.json", "grid.m=8"]);
    }

    #[test]
    fn phase_log_sits_next_to_model() {
        assert_eq!(
            phase_log_path(Path::new("out/model.txt")),
            Path::new("out/model.phases.csv")
        );
    }
}
