use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use biomotion_arena::{leaderboard_json, recover, App, ArenaConfig};
use biomotion_core::analytics::{
    both_bad_rate, correlate_with_ratings, likert_distribution, per_action_breakdown, win_rate_heatmap,
    win_rate_matrix, ScoreManifest, TieTreatment, VariantKind, VoteFilter,
};
use biomotion_core::arena::{read_vote_log, LikertRecord, LikertStore};
use biomotion_core::artifact::{ArtifactId, ArtifactStore, Outcome};
use biomotion_core::motion::{
    encode_gif, golden_script, render_frames, synthesize, write_png_sequence, Action, MotionSpec, RenderOptions,
    SpecId,
};
use biomotion_core::prompt::{enumerate_variants, variant_manifest, Modality, PromptForge, TemplateSet};
use biomotion_gateway::{Gateway, Roster};
use biomotion_sandbox::Sandbox;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tokio::task::JoinSet;
use tracing::{info, warn};

#[derive(Parser)]
#[command(name = "biomotion", version, about = "Point-light motion generation arena")]
struct Cli {
    /// Arena configuration file; defaults apply to anything it leaves out.
    #[arg(long, global = true, env = "BIOMOTION_CONFIG")]
    config: Option<PathBuf>,
    /// Log filter, e.g. `info` or `biomotion_gateway=debug`.
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render reference animations, their PNG frames and an equivalent script.
    Golden(GoldenArgs),
    /// List the benchmark variants.
    Variants {
        #[arg(long)]
        json: bool,
    },
    /// Prompt models and store their responses as artifacts.
    Generate(GenerateArgs),
    /// Run stored scripts in the sandbox and record the outcome.
    Execute(ExecuteArgs),
    /// Serve the voting API.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Rebuild the leaderboard from the vote log and print it.
    Replay,
    #[command(subcommand)]
    Report(Report),
    /// Record an absolute 1 to 5 rating of one model's animation.
    Likert(LikertArgs),
}

#[derive(Args)]
struct GoldenArgs {
    /// Variant id such as `walking/base`; repeatable.
    #[arg(long = "spec")]
    specs: Vec<String>,
    /// Every basic action.
    #[arg(long)]
    all_basic: bool,
    #[arg(long, default_value = "golden")]
    out: PathBuf,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Text,
    Image,
    Both,
}

#[derive(Args)]
struct GenerateArgs {
    /// Roster model id; repeatable.
    #[arg(long = "model")]
    models: Vec<String>,
    #[arg(long)]
    all_models: bool,
    /// Variant id; repeatable.
    #[arg(long = "spec")]
    specs: Vec<String>,
    #[arg(long)]
    all_specs: bool,
    #[arg(long, value_enum, default_value = "text")]
    modality: ModalityArg,
}

#[derive(Args)]
struct ExecuteArgs {
    /// Artifact id; every artifact without a render when omitted.
    #[arg(long = "artifact")]
    artifacts: Vec<String>,
    /// Run artifacts again even if they already have a render.
    #[arg(long)]
    rerun: bool,
    /// Keep sandbox run directories.
    #[arg(long)]
    keep_workdirs: bool,
}

#[derive(Args, Default)]
struct Segment {
    /// `basic` or `fine-grained`.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated models; only battles between them count.
    #[arg(long)]
    models: Option<String>,
}

impl Segment {
    fn filter(&self) -> Result<VoteFilter> {
        let kind = match self.kind.as_deref() {
            None => None,
            Some("basic") => Some(VariantKind::Basic),
            Some("fine-grained") => Some(VariantKind::FineGrained),
            Some(k) => bail!("unknown kind {k:?}"),
        };
        let within = self.models.as_ref().map(|m| m.split(',').map(|s| s.trim().to_string()).collect());
        Ok(VoteFilter { kind, within, ..VoteFilter::default() })
    }
}

#[derive(Subcommand)]
enum Report {
    /// Pairwise win-rate matrix.
    Winrate {
        #[command(flatten)]
        segment: Segment,
        /// Count ties as half a win.
        #[arg(long)]
        half_ties: bool,
        /// Write a PNG heatmap here.
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Share of battles judged both bad.
    Bothbad {
        #[command(flatten)]
        segment: Segment,
    },
    /// Per-action results of one model against another.
    Actions { a: String, b: String },
    /// Likert score distribution of a model.
    Likert { model: String },
    /// Pearson correlation of arena ratings with an external benchmark CSV.
    Correlate {
        manifest: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Args)]
struct LikertArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    spec: String,
    #[arg(long)]
    rater: String,
    #[arg(long)]
    score: u8,
}

fn load_config(path: Option<&Path>) -> Result<ArenaConfig> {
    match path {
        Some(p) => ArenaConfig::load(p),
        None => {
            let mut cfg = ArenaConfig::default();
            cfg.resolve(&std::env::current_dir()?);
            Ok(cfg)
        }
    }
}

fn parse_spec(id: &str) -> Result<MotionSpec> {
    id.parse::<MotionSpec>().with_context(|| format!("bad variant id {id:?}"))
}

fn file_stem(id: &SpecId) -> String {
    id.as_str().chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn golden(args: GoldenArgs) -> Result<()> {
    let mut specs: Vec<MotionSpec> = args.specs.iter().map(|s| parse_spec(s)).collect::<Result<_>>()?;
    if args.all_basic {
        specs.extend(Action::ALL.iter().map(|&a| MotionSpec::basic(a)));
    }
    if specs.is_empty() {
        bail!("pass --spec or --all-basic");
    }
    std::fs::create_dir_all(&args.out)?;
    let opts = RenderOptions::default();
    for spec in specs {
        let traj = synthesize(&spec, args.duration, args.fps)?;
        let seq = render_frames(&traj, &opts)?;
        for w in &seq.warnings {
            warn!(spec = %spec.id(), "{w}");
        }
        let stem = file_stem(&spec.id());
        write_png_sequence(&seq, &args.out.join(&stem))?;
        encode_gif(&seq, std::io::BufWriter::new(std::fs::File::create(args.out.join(format!("{stem}.gif")))?))?;
        std::fs::write(args.out.join(format!("{stem}.py")), golden_script(&traj, &opts))?;
        println!("{}\t{} frames\t{}", spec.id(), seq.frames.len(), args.out.join(&stem).display());
    }
    Ok(())
}

fn variants(json: bool) -> Result<()> {
    let rows = variant_manifest();
    if json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for r in rows {
            println!("{:>3}  {:<13} {:<40} {}", r.index, r.kind, r.id, r.description);
        }
    }
    Ok(())
}

fn roster(cfg: &ArenaConfig) -> Result<Roster> {
    Ok(match &cfg.paths.roster {
        Some(p) => Roster::load(p)?,
        None => Roster::builtin().clone(),
    })
}

async fn generate(cfg: &ArenaConfig, args: GenerateArgs) -> Result<()> {
    let roster = roster(cfg)?;
    let models: Vec<String> = if args.all_models {
        roster.models().iter().map(|m| m.model_id.clone()).collect()
    } else {
        args.models.clone()
    };
    let specs: Vec<MotionSpec> = if args.all_specs {
        enumerate_variants()
    } else {
        args.specs.iter().map(|s| parse_spec(s)).collect::<Result<_>>()?
    };
    if models.is_empty() || specs.is_empty() {
        bail!("pass at least one --model (or --all-models) and --spec (or --all-specs)");
    }
    let modalities: &[Modality] = match args.modality {
        ModalityArg::Text => &[Modality::TextOnly],
        ModalityArg::Image => &[Modality::ImageText],
        ModalityArg::Both => &[Modality::TextOnly, Modality::ImageText],
    };
    let templates = match &cfg.paths.templates {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    };
    let forge = PromptForge::new(templates, cfg.prompt.runtime.clone());
    let store = Arc::new(ArtifactStore::open(&cfg.paths.store)?);
    let gateway = Arc::new(Gateway::new(roster)?);

    let mut jobs = JoinSet::new();
    for model in &models {
        let mcfg = gateway.roster().model(model).with_context(|| format!("unknown model {model:?}"))?.clone();
        for &modality in modalities {
            if !mcfg.modalities.supports(modality) {
                if !args.all_models {
                    warn!(model = %model, ?modality, "model does not accept this modality; skipped");
                }
                continue;
            }
            for spec in &specs {
                let bundle = forge.render_prompt(spec, modality)?;
                let (gateway, store, mcfg) = (gateway.clone(), store.clone(), mcfg.clone());
                jobs.spawn(async move {
                    let r = gateway.generate_into(&bundle, &mcfg, &store).await;
                    (mcfg.model_id, bundle.spec.id(), r)
                });
            }
        }
    }
    let (mut ok, mut failed) = (0usize, 0usize);
    while let Some(joined) = jobs.join_next().await {
        let (model, spec, r) = joined?;
        match r {
            Ok(a) => {
                ok += 1;
                println!("{}\t{}\t{}\t{} loc", a.artifact_id, model, spec, a.loc);
            }
            Err(e) => {
                failed += 1;
                warn!(model = %model, spec = %spec, "generation failed: {e}");
            }
        }
    }
    info!(ok, failed, "generation finished");
    if ok == 0 && failed > 0 {
        bail!("every generation request failed");
    }
    Ok(())
}

async fn execute(cfg: &ArenaConfig, args: ExecuteArgs) -> Result<()> {
    let store = Arc::new(ArtifactStore::open(&cfg.paths.store)?);
    let sandbox = Sandbox::new(
        &cfg.paths.sandbox,
        cfg.sandbox.runtime.clone(),
        cfg.sandbox.limits.clone(),
        cfg.sandbox.max_parallel,
    )?;
    sandbox.set_keep_workdirs(args.keep_workdirs);
    let targets = if args.artifacts.is_empty() {
        store.list()?.into_iter().filter(|a| args.rerun || a.render.is_none()).collect()
    } else {
        args.artifacts
            .iter()
            .map(|id| store.get(&ArtifactId(id.clone())))
            .collect::<Result<Vec<_>, _>>()?
    };
    let mut jobs = JoinSet::new();
    for artifact in targets {
        let (sandbox, store) = (sandbox.clone(), store.clone());
        jobs.spawn(async move {
            let r = sandbox.execute_artifact(&store, &artifact).await;
            (artifact, r)
        });
    }
    let mut tally: BTreeMap<Outcome, usize> = BTreeMap::new();
    while let Some(joined) = jobs.join_next().await {
        let (artifact, r) = joined?;
        let record = r?;
        *tally.entry(record.outcome).or_default() += 1;
        println!("{}\t{}\t{}\t{}", artifact.artifact_id, artifact.model_id, artifact.spec_id, record.outcome);
    }
    for (outcome, n) in tally {
        info!("{outcome}: {n}");
    }
    Ok(())
}

async fn serve(cfg: &ArenaConfig, bind: Option<String>) -> Result<()> {
    let app = App::open(&cfg.service_options()).await?;
    let addr = bind.unwrap_or_else(|| cfg.server.bind.clone());
    let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
    println!("listening on http://{}", listener.local_addr()?);
    std::io::stdout().flush()?;
    axum::serve(listener, app.router()).with_graceful_shutdown(shutdown_signal()).await?;
    app.shutdown().await;
    Ok(())
}

async fn shutdown_signal() {
    let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()).ok();
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = async {
            match term.as_mut() {
                Some(t) => { t.recv().await; }
                None => std::future::pending::<()>().await,
            }
        } => {}
    }
}

fn report(cfg: &ArenaConfig, r: Report) -> Result<()> {
    match r {
        Report::Likert { model } => {
            let store = LikertStore::open(&cfg.paths.likert)?;
            let s = likert_distribution(&store, &model)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
            return Ok(());
        }
        Report::Correlate { manifest, name } => {
            let board = recover(&cfg.paths.vote_log, &cfg.paths.battles, &cfg.elo())?.board;
            let name = name.unwrap_or_else(|| {
                manifest.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let m = ScoreManifest::from_csv(&name, std::fs::File::open(&manifest)?)?;
            let c = correlate_with_ratings(&board, &m)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
            return Ok(());
        }
        _ => {}
    }
    let log = read_vote_log(&cfg.paths.vote_log)?;
    match r {
        Report::Winrate { segment, half_ties, heatmap } => {
            let ties = if half_ties { TieTreatment::Half } else { TieTreatment::Exclude };
            let m = win_rate_matrix(&log, &segment.filter()?, ties);
            print!("{}", m.to_csv());
            if let Some(path) = heatmap {
                win_rate_heatmap(&m, 24).save(&path)?;
            }
        }
        Report::Bothbad { segment } => {
            let r = both_bad_rate(&log, &segment.filter()?)?;
            println!("{} / {} = {}", r.num, r.den, r.percent());
        }
        Report::Actions { a, b } => {
            println!("action\t{a} vs {b}\twins\tlosses\tties\tboth_bad");
            for row in per_action_breakdown(&log, &a, &b) {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    row.action.slug(),
                    row.formatted(),
                    row.wins,
                    row.losses,
                    row.ties,
                    row.both_bad
                );
            }
        }
        Report::Likert { .. } | Report::Correlate { .. } => unreachable!(),
    }
    Ok(())
}

fn likert(cfg: &ArenaConfig, args: LikertArgs) -> Result<()> {
    let spec = parse_spec(&args.spec)?.id();
    let mut store = LikertStore::open(&cfg.paths.likert)?;
    store.ingest(LikertRecord {
        model_id: args.model,
        spec_id: spec,
        rater_id: args.rater,
        score: args.score,
        timestamp: chrono::Utc::now(),
    })?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_new(&cli.log).context("bad --log filter")?)
        .with_writer(std::io::stderr)
        .init();
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Golden(a) => golden(a),
        Command::Variants { json } => variants(json),
        Command::Replay => {
            let rec = recover(&cfg.paths.vote_log, &cfg.paths.battles, &cfg.elo())?;
            print!("{}", leaderboard_json(&rec.board));
            Ok(())
        }
        Command::Report(r) => report(&cfg, r),
        Command::Likert(a) => likert(&cfg, a),
        Command::Generate(a) => runtime()?.block_on(generate(&cfg, a)),
        Command::Execute(a) => runtime()?.block_on(execute(&cfg, a)),
        Command::Serve { bind } => runtime()?.block_on(serve(&cfg, bind)),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}
