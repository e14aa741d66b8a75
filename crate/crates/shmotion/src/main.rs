use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use shmotion::config::ExperimentConfig;
use shmotion::experiment::{estimate_audio, run_experiment, synthesize, Setup};
use shmotion::{erank, formats, load_config, presets, report, Error, Result};

/// Direction-of-arrival experiments for moving spherical microphone arrays.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file, or `preset:NAME`.
    config: String,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory (default: the configured one, else `results/NAME`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full Monte-Carlo experiment.
    Run(Common),
    /// Effective-rank analysis only.
    Erank(Common),
    /// Write synthesized microphone signals as WAVE files.
    Synth(Common),
    /// Estimate directions from recorded audio.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Multichannel WAVE file with one channel per microphone.
        #[arg(long)]
        audio: PathBuf,
        /// Trajectory CSV; defaults to the configured motion.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Check a configuration without running it.
    Validate(Common),
    /// List the embedded presets or write them to a directory.
    Presets {
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn prepare(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = load_config(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("results").join(&cfg.name));
    if let Some(j) = c.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    Ok((cfg, out))
}

#[derive(Serialize)]
struct SynthEntry {
    file: String,
    motion_index: usize,
    scenario: usize,
    angular_velocity_deg_s: Option<f64>,
    snr_db: Option<f64>,
    truth_deg: Vec<[f64; 2]>,
    trajectory: String,
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate(c) => {
            let (cfg, _) = prepare(&c)?;
            Setup::new(cfg)?;
            println!("configuration is valid");
        }
        Command::Run(c) => {
            let (cfg, out) = prepare(&c)?;
            let setup = Setup::new(cfg)?;
            let run = run_experiment(&setup)?;
            report::write_run(&out, &run)?;
            report::write_resolved_config(&out, &setup.config)?;
            report::write_run_info(&out, "run", rayon::current_num_threads())?;
            for cond in &run.conditions {
                println!(
                    "condition {:>3}  {:<11} I={:<4} w={:<7} snr={:<6} mean={:>7} std={:>7} failed={}",
                    cond.id,
                    cond.method.label(),
                    cond.stack.map_or("-".into(), |i| i.to_string()),
                    cond.angular_velocity_deg_s.map_or("file".into(), |w| w.to_string()),
                    cond.snr_db.map_or("inf".into(), |s| s.to_string()),
                    cond.mean_error_deg.map_or("-".into(), |m| format!("{m:.2}")),
                    cond.std_error_deg.map_or("-".into(), |m| format!("{m:.2}")),
                    cond.failed,
                );
            }
            println!("results written to {}", out.display());
        }
        Command::Erank(c) => {
            let (cfg, out) = prepare(&c)?;
            let setup = Setup::new(cfg)?;
            let res = erank::erank_sweep(&setup)?;
            report::write_erank(&out, &res)?;
            report::write_resolved_config(&out, &setup.config)?;
            report::write_run_info(&out, "erank", rayon::current_num_threads())?;
            print!("{}", report::erank_csv(&res)?);
        }
        Command::Synth(c) => {
            let (cfg, out) = prepare(&c)?;
            let setup = Setup::new(cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut manifest = Vec::new();
            for s in synthesize(&setup)? {
                let wav = format!("audio_m{}_s{}.wav", s.motion_index, s.scenario);
                let traj = format!("trajectory_m{}.csv", s.motion_index);
                formats::write_wav(&out.join(&wav), &s.audio)?;
                formats::save_trajectory(&out.join(&traj), &s.trajectory)?;
                manifest.push(SynthEntry {
                    file: wav,
                    motion_index: s.motion_index,
                    scenario: s.scenario,
                    angular_velocity_deg_s: s.angular_velocity_deg_s,
                    snr_db: s.snr_db,
                    truth_deg: s.truth_deg,
                    trajectory: traj,
                });
            }
            let path = out.join("synth.json");
            let text = serde_json::to_string_pretty(&manifest)? + "\n";
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            report::write_resolved_config(&out, &setup.config)?;
            println!("{} recordings written to {}", manifest.len(), out.display());
        }
        Command::Estimate {
            common,
            audio,
            trajectory,
        } => {
            let (cfg, out) = prepare(&common)?;
            let setup = Setup::new(cfg)?;
            let wav = formats::read_wav(&audio)?;
            let traj = trajectory.as_deref().map(formats::load_trajectory).transpose()?;
            let res = estimate_audio(&setup, &wav, traj.as_ref())?;
            report::write_estimate(&out, &res)?;
            for r in &res.results {
                println!("{:<11} I={:<4} {:?}", r.method.label(), r.stack.map_or("-".into(), |i| i.to_string()), r.estimates_deg);
            }
        }
        Command::Presets { export } => match export {
            Some(dir) => {
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                for (name, text) in presets::PRESETS {
                    let p = dir.join(format!("{name}.toml"));
                    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                }
            }
            None => {
                for (name, text) in presets::PRESETS {
                    let cfg = ExperimentConfig::from_toml_str(text)?;
                    println!("{name:<10} {}", cfg.description);
                }
            }
        },
    }
    Ok(())
}
