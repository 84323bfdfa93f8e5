use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use uwa_dbn::channel::{apply_channel, sample_channel_params, DistributionSpec};
use uwa_dbn::harness::{
    generate_dataset, read_dataset, run_ber_sweep, run_structure_search, salt, train_classifier, train_denoiser,
    write_dataset, write_structure_csv, write_sweep_csv, Dataset, ExperimentConfig, ExperimentKind,
};
use uwa_dbn::io::{self, ArtifactMeta};
use uwa_dbn::receiver::{receive_with, Method, RxModels, RxReport};
use uwa_dbn::rng::seeded;
use uwa_dbn::waveforms::{build_frame, modulate, BitSequence, Waveform};

const GIT_REV: &str = env!("UWA_GIT_REV");

#[derive(Parser)]
#[command(
    name = "uwa-dbn",
    version,
    about = "Underwater acoustic link simulator with a DBN receiver"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON with a "kind" field plus overrides).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defaults to use when no config file is given.
    #[arg(long, value_parser = parse_kind, default_value = "awgn-denoise")]
    kind: ExperimentKind,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Record zero wall times so reruns are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of clean/noisy symbol pairs.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the de-noising network.
    TrainDenoise {
        #[command(flatten)]
        common: Common,
        /// Dataset directory from `generate`; simulated afresh when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the symbol classifier.
    TrainClassify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: Option<PathBuf>,
        /// De-noise model whose reconstructions feed the classifier.
        #[arg(long)]
        denoiser: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo BER sweep; writes CSV plus a .meta.json sidecar.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        denoiser: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a grid of classifier structures and epoch budgets.
    StructureSearch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one random frame (pilots, guards, payload) as a waveform.
    Transmit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass a waveform through one channel realization.
    Channel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Channel preset (awgn, multipath, overall) or a JSON file holding
        /// a channel distribution; defaults to the config's channel.
        #[arg(long)]
        channel_spec: Option<String>,
        /// Eb/No in dB; defaults to the first grid point of the config.
        #[arg(long, allow_hyphen_values = true)]
        ebno: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Demodulate a received frame and print a JSON report.
    Receive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = parse_method, default_value = "mle")]
        method: Method,
        #[arg(long)]
        denoiser: Option<PathBuf>,
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Run(uwa_dbn::Error),
}

impl From<uwa_dbn::Error> for CliError {
    fn from(e: uwa_dbn::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_named<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    parse_named(s)
}

fn parse_method(s: &str) -> Result<Method, String> {
    parse_named(s)
}

fn load_config(c: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("config file not found: {}", path.display())));
            }
            ExperimentConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => ExperimentConfig::for_kind(c.kind),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    cfg.reproducible |= c.reproducible;
    Ok(cfg)
}

fn artifact(cfg: &ExperimentConfig) -> ArtifactMeta {
    cfg.artifact_meta(GIT_REV)
}

fn dataset(cfg: &ExperimentConfig, input: Option<&Path>) -> CliResult<Dataset> {
    Ok(match input {
        Some(dir) => read_dataset(dir)?,
        None => generate_dataset(cfg)?,
    })
}

fn channel_spec(arg: Option<&str>, cfg: &ExperimentConfig) -> CliResult<DistributionSpec> {
    let fs = cfg.modulation.fs_hz;
    Ok(match arg {
        None => cfg.channel.clone(),
        Some("awgn") => DistributionSpec::awgn(),
        Some("multipath") => DistributionSpec::multipath(fs),
        Some("overall") => DistributionSpec::overall(fs),
        Some(path) => {
            let p = Path::new(path);
            if !p.is_file() {
                return Err(CliError::Usage(format!(
                    "channel spec {path} is neither a preset (awgn, multipath, overall) nor a file"
                )));
            }
            io::read_json(p)?
        }
    })
}

#[derive(Serialize)]
struct BitsFile {
    artifact: ArtifactMeta,
    n_bits: usize,
    bits_hex: String,
    lead_in_samples: usize,
}

#[derive(Serialize)]
struct ReceiveOutput<'a> {
    artifact: ArtifactMeta,
    report: &'a RxReport,
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate { common, out } => {
            let cfg = load_config(&common)?;
            let ds = generate_dataset(&cfg)?;
            write_dataset(&out, &ds, &cfg.resolutions, &artifact(&cfg))?;
            log::info!(
                "wrote {} / {} / {} symbols to {}",
                ds.train.len(),
                ds.validation.len(),
                ds.test.len(),
                out.display()
            );
        }
        Command::TrainDenoise { common, input, out } => {
            let cfg = load_config(&common)?;
            let ds = dataset(&cfg, input.as_deref())?;
            let dm = train_denoiser(&cfg, &ds.train)?;
            io::write_denoise_model(&out, &dm, &cfg.resolutions, &artifact(&cfg))?;
            log::info!(
                "{} noise nodes; model written to {}",
                dm.noise_nodes.len(),
                out.display()
            );
        }
        Command::TrainClassify {
            common,
            input,
            denoiser,
            out,
        } => {
            let cfg = load_config(&common)?;
            let dm = if cfg.classify_on_denoised {
                let path = denoiser.or_else(|| cfg.models.denoise.clone()).ok_or_else(|| {
                    CliError::Usage(format!(
                        "preset {} classifies de-noised symbols; pass --denoiser or set models.denoise",
                        cfg.classify_preset
                    ))
                })?;
                Some(io::read_denoise_model(&path)?)
            } else {
                None
            };
            let ds = dataset(&cfg, input.as_deref())?;
            let cm = train_classifier(&cfg, &ds.train, &ds.validation, dm.as_ref(), None)?;
            io::write_classifier_model(&out, &cm, &artifact(&cfg))?;
            log::info!("validation accuracy {:?}", cm.validation_accuracy);
        }
        Command::Sweep {
            common,
            denoiser,
            classifier,
            out,
        } => {
            let mut cfg = load_config(&common)?;
            if denoiser.is_some() {
                cfg.models.denoise = denoiser;
            }
            if classifier.is_some() {
                cfg.models.classifier = classifier;
            }
            let sweep = run_ber_sweep(&cfg, None)?;
            write_sweep_csv(&out, &sweep, &cfg, &artifact(&cfg))?;
            for r in &sweep.records {
                log::info!("{} {} dB: {}/{} = {:.3e}", r.method, r.ebno_db, r.errors, r.bits, r.ber);
            }
        }
        Command::StructureSearch { common, out } => {
            let cfg = load_config(&common)?;
            let rows = run_structure_search(&cfg)?;
            write_structure_csv(&out, &rows, &cfg, &artifact(&cfg))?;
        }
        Command::Transmit { common, out } => {
            let cfg = load_config(&common)?;
            let spec = &cfg.modulation;
            let layout = cfg.frame.layout(spec.fs_hz)?;
            layout.check_payload(spec)?;
            let mut rng = seeded(cfg.sub_seed(salt::TRANSMIT));
            let bits = BitSequence::random(layout.payload_bits, &mut rng);
            let frame = build_frame(&layout, &modulate(&bits, spec)?)?;
            let lead = layout.guard_samples;
            let mut samples = vec![0.0; lead];
            samples.extend_from_slice(frame.samples());
            samples.resize(samples.len() + layout.guard_samples + spec.samples_per_symbol(), 0.0);
            io::write_waveform(&out, &Waveform::new(samples, spec.fs_hz)?)?;
            let mut bits_path = out.as_os_str().to_owned();
            bits_path.push(".bits.json");
            io::write_json(
                Path::new(&bits_path),
                &BitsFile {
                    artifact: artifact(&cfg),
                    n_bits: bits.len(),
                    bits_hex: bits.to_hex(),
                    lead_in_samples: lead,
                },
            )?;
        }
        Command::Channel {
            common,
            input,
            channel_spec: spec_arg,
            ebno,
            out,
        } => {
            let cfg = load_config(&common)?;
            let dist = channel_spec(spec_arg.as_deref(), &cfg)?;
            let ebno = ebno.unwrap_or(cfg.ebno_grid_db[0]);
            let x = io::read_waveform(&input, Some(cfg.modulation.fs_hz))?;
            let mut rng = seeded(cfg.sub_seed(salt::CHANNEL));
            let params = sample_channel_params(&dist, ebno, x.len(), x.sample_rate_hz(), &mut rng)?;
            // noise is calibrated to the mean symbol energy of the modulation
            let table = cfg.modulation.symbol_waveforms();
            let eb = table.iter().flatten().map(|v| v * v).sum::<f64>()
                / (table.len() * cfg.modulation.bits_per_symbol()) as f64;
            let y = apply_channel(&x, &params, eb, &mut rng)?;
            io::write_waveform(&out, &y)?;
            let mut params_path = out.as_os_str().to_owned();
            params_path.push(".channel.json");
            io::write_json(Path::new(&params_path), &params)?;
        }
        Command::Receive {
            common,
            input,
            method,
            denoiser,
            classifier,
            out,
        } => {
            let cfg = load_config(&common)?;
            let mut rx = cfg.rx_config(method);
            if denoiser.is_some() {
                rx.denoise_model = denoiser;
            }
            if classifier.is_some() {
                rx.classifier_model = classifier;
            }
            let models = RxModels::load(&rx)?;
            let s = io::read_waveform(&input, Some(cfg.modulation.fs_hz))?;
            let report = receive_with(&s, &rx, &models)?;
            let output = ReceiveOutput {
                artifact: artifact(&cfg),
                report: &report,
            };
            match out {
                Some(path) => io::write_json(&path, &output)?,
                None => println!("{}", serde_json::to_string_pretty(&output).expect("report serializes")),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
