use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use dusk_core::calibration::{default_profile, derive_timing_table, fit_profile};
use dusk_core::expert::{corpus_prediction, load_corpus};
use dusk_core::lexicon::DEFAULT_CAP;
use dusk_core::listener::{TuioListener, DEFAULT_TUIO_PORT};
use dusk_core::log::{parse_lines, read_records, write_lines, GestureLogRecord, LogLine};
use dusk_core::replay::replay;
use dusk_core::sim::{simulate_calibration, simulate_session};
use dusk_core::tuio::GestureAssembler;
use dusk_core::{CalibrationProfile, DecoderConfig, DecoderOptions, Exec, Layout, Lexicon, PadSpec, TimingTable};
use dusk_service::{AppState, TuioBridge};

#[derive(Parser)]
#[command(name = "dusk", version, about = "Stroke-based eyes-free text entry decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a calibration profile from a calibration log.
    Fit {
        log: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the per-key timing table derived from the log.
        #[arg(long)]
        timing: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value = "134x63")]
        pad: PadSpec,
    },
    /// Decode a session log and compute text-entry metrics.
    Replay {
        log: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        lexicon_cap: usize,
        #[arg(long)]
        no_predictions: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic session (or calibration) log.
    Simulate {
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Endpoint noise scale; 0 is noiseless.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// One phrase per line.
        #[arg(long, required_unless_present = "calibration")]
        phrases: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Emit a calibration log with this many strokes per key and thumb.
        #[arg(long)]
        calibration: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Predict expert typing speed over a word-frequency corpus.
    Predict {
        #[arg(long)]
        timing: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Record TUIO touches as a session log.
    Listen {
        #[arg(long, default_value_t = DEFAULT_TUIO_PORT)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
        #[arg(long, default_value = "134x63")]
        pad: PadSpec,
        #[arg(short, long)]
        output: PathBuf,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Stop after this many gestures.
        #[arg(long)]
        max_gestures: Option<usize>,
    },
    /// Run the WebSocket session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        lexicon_cap: usize,
        #[arg(long)]
        no_predictions: bool,
        /// Also accept TUIO input on this UDP port.
        #[arg(long)]
        tuio_port: Option<u16>,
        /// Directory of static UI assets.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Fit {
            log,
            output,
            timing,
            layout,
            pad,
        } => fit(&log, &output, timing.as_deref(), &load_layout(layout.as_deref())?, pad),
        Command::Replay {
            log,
            profile,
            layout,
            lexicon,
            lexicon_cap,
            no_predictions,
            report,
        } => {
            let config = decoder_config(profile.as_deref(), layout.as_deref(), lexicon.as_deref(), lexicon_cap)?;
            run_replay(config, !no_predictions, &log, report.as_deref())
        }
        Command::Simulate {
            profile,
            layout,
            noise,
            phrases,
            seed,
            calibration,
            output,
        } => {
            let profile = load_profile(profile.as_deref())?;
            let layout = load_layout(layout.as_deref())?;
            let mut out = output_writer(output.as_deref())?;
            match calibration {
                Some(reps) => {
                    for rec in simulate_calibration(&profile, &layout, reps, noise, seed) {
                        serde_json::to_writer(&mut out, &rec)?;
                        writeln!(out)?;
                    }
                }
                None => {
                    let path = phrases.expect("clap requires phrases");
                    let phrases = read_phrases(&path)?;
                    write_lines(&mut out, &simulate_session(&profile, &layout, &phrases, noise, seed))?;
                }
            }
            out.flush()?;
            Ok(())
        }
        Command::Predict { timing, corpus, layout } => {
            let layout = load_layout(layout.as_deref())?;
            let timing = TimingTable::read_csv(open(&timing)?).with_context(|| format!("reading {}", timing.display()))?;
            let corpus = load_corpus(open(&corpus)?).with_context(|| format!("reading {}", corpus.display()))?;
            let stats = corpus_prediction(&corpus, &timing, &layout, Exec::default())?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(())
        }
        Command::Listen {
            port,
            bind,
            pad,
            output,
            duration,
            max_gestures,
        } => listen(&bind, port, pad, &output, duration, max_gestures),
        Command::Serve {
            port,
            bind,
            profile,
            layout,
            lexicon,
            lexicon_cap,
            no_predictions,
            tuio_port,
            assets,
        } => {
            let config = decoder_config(profile.as_deref(), layout.as_deref(), lexicon.as_deref(), lexicon_cap)?;
            let options = DecoderOptions {
                predictions_enabled: !no_predictions,
            };
            run_server(config, options, &bind, port, tuio_port, assets)
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn output_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_layout(path: Option<&Path>) -> Result<Layout> {
    match path {
        None => Ok(Layout::qwerty()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Layout::from_json(&text).with_context(|| format!("parsing layout {}", p.display()))
        }
    }
}

fn load_profile(path: Option<&Path>) -> Result<CalibrationProfile> {
    match path {
        None => Ok(default_profile()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            CalibrationProfile::from_json(&text).with_context(|| format!("parsing profile {}", p.display()))
        }
    }
}

fn decoder_config(
    profile: Option<&Path>,
    layout: Option<&Path>,
    lexicon: Option<&Path>,
    cap: usize,
) -> Result<Arc<DecoderConfig>> {
    let lexicon = lexicon
        .map(|p| Lexicon::load_path(p, cap).with_context(|| format!("loading lexicon {}", p.display())))
        .transpose()?;
    Ok(Arc::new(DecoderConfig {
        profile: load_profile(profile)?,
        layout: load_layout(layout)?,
        lexicon,
    }))
}

fn read_phrases(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() {
            out.push(line.to_string());
        }
    }
    Ok(out)
}

fn fit(log: &Path, output: &Path, timing: Option<&Path>, layout: &Layout, pad: PadSpec) -> Result<()> {
    let records = read_records(log).with_context(|| format!("reading {}", log.display()))?;
    let (profile, report) = fit_profile(&records, layout, pad)?;
    std::fs::write(output, profile.to_json()).with_context(|| format!("writing {}", output.display()))?;
    if let Some(path) = timing {
        let (table, timing_report) = derive_timing_table(&records, &pad, profile.tap_threshold_mm)?;
        let missing = table.missing_keys();
        if !missing.is_empty() {
            let names: Vec<String> = missing.iter().map(|k| k.name()).collect();
            eprintln!("warning: no timing for {}", names.join(", "));
        }
        table.write_csv(BufWriter::new(File::create(path)?))?;
        for w in timing_report.warnings {
            eprintln!("warning: {w}");
        }
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn run_replay(config: Arc<DecoderConfig>, predictions: bool, log: &Path, report: Option<&Path>) -> Result<()> {
    let lines = parse_lines(open(log)?).with_context(|| format!("reading {}", log.display()))?;
    let options = DecoderOptions {
        predictions_enabled: predictions,
    };
    let r = replay(config, options, &lines)?;
    for o in &r.outcomes {
        match &o.error {
            Some(e) => println!("{:?} -> {:?} ({e})", o.presented, o.transcribed),
            None => println!("{:?} -> {:?}", o.presented, o.transcribed),
        }
    }
    if let Some(wpm) = r.block.mean_wpm {
        println!("mean WPM {wpm:.2}");
    }
    if let (Some(c), Some(u)) = (r.block.corrected_er, r.block.uncorrected_er) {
        println!("corrected ER {:.2}%, uncorrected ER {:.2}%", 100.0 * c, 100.0 * u);
    }
    if r.outcomes.is_empty() {
        println!("{:?}", r.final_text);
    }
    if let Some(path) = report {
        std::fs::write(path, serde_json::to_string_pretty(&r)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn listen(
    bind: &str,
    port: u16,
    pad: PadSpec,
    output: &Path,
    duration: Option<f64>,
    max_gestures: Option<usize>,
) -> Result<()> {
    let epoch = Instant::now();
    let (listener, rx) = TuioListener::spawn((bind, port), pad, epoch)
        .with_context(|| format!("binding UDP {bind}:{port}"))?;
    eprintln!("listening for TUIO on {}", listener.local_addr());
    let mut out = BufWriter::new(File::create(output).with_context(|| format!("creating {}", output.display()))?);
    let mut asm = GestureAssembler::new();
    let mut count = 0;
    let deadline = duration.map(|s| epoch + Duration::from_secs_f64(s));
    while max_gestures.is_none_or(|m| count < m) {
        let wait = match deadline {
            Some(d) => match d.checked_duration_since(Instant::now()) {
                Some(left) => left.min(Duration::from_millis(200)),
                None => break,
            },
            None => Duration::from_millis(200),
        };
        let Ok(ev) = rx.recv_timeout(wait) else { continue };
        if let Some(g) = asm.push(&ev) {
            let line = LogLine::Gesture(GestureLogRecord::from_gesture(&g));
            serde_json::to_writer(&mut out, &line)?;
            writeln!(out)?;
            out.flush()?;
            count += 1;
        }
    }
    let stats = listener.stats();
    listener.shutdown();
    eprintln!("{count} gestures; {}", serde_json::to_string(&stats)?);
    Ok(())
}

fn run_server(
    config: Arc<DecoderConfig>,
    options: DecoderOptions,
    bind: &str,
    port: u16,
    tuio_port: Option<u16>,
    assets: Option<PathBuf>,
) -> Result<()> {
    if let Some(dir) = &assets {
        if !dir.is_dir() {
            bail!("assets directory {} does not exist", dir.display());
        }
    }
    let pad = config.profile.pad;
    let mut state = AppState::new(config, options);
    let _bridge = match tuio_port {
        Some(p) => {
            let addr: SocketAddr = format!("{bind}:{p}").parse().context("TUIO address")?;
            let b = TuioBridge::start(addr, pad, &mut state).with_context(|| format!("binding UDP {addr}"))?;
            eprintln!("bridging TUIO from {}", b.local_addr());
            Some(b)
        }
        None => None,
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((bind, port))
            .await
            .with_context(|| format!("binding {bind}:{port}"))?;
        eprintln!("serving on http://{}/ (WebSocket at /ws)", listener.local_addr()?);
        dusk_service::serve(listener, state, assets).await?;
        Ok(())
    })
}
