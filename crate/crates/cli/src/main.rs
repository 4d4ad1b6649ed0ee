use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fracsig::audio::{self, LoadMode, Signal};
use fracsig::baseline::{self, BaselineKind, FrameSpec};
use fracsig::fractal::{self, MFDVL_LEN};
use fracsig::metrics;
use fracsig::retrieval::{
    self, csv_field, format_number, EvalMode, FeatureAssembly, FeatureKind, PcaMode, SearchIndex,
};
use fracsig::signature::{self, SignatureRecord, DEFAULT_ALPHA};
use fracsig::synth::{SynthKind, SynthSpec, TestSet, DEFAULT_DURATION};
use fracsig::Error;

const STOPWORDS_ENV: &str = "FRACSIG_STOPWORDS";

#[derive(Parser)]
#[command(
    name = "fracsig",
    version,
    about = "Multiscale fractal-dimension signatures for sound similarity search"
)]
struct Cli {
    /// Worker threads for extraction and index building (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic test signals as WAV files plus metadata.jsonl.
    Synth(SynthArgs),
    /// Compute a signature or baseline feature for each input WAV.
    Extract(ExtractArgs),
    /// Build or inspect a search index.
    Index {
        #[command(subcommand)]
        command: IndexCommand,
    },
    /// Rank indexed items by distance to a key sound.
    Query(QueryArgs),
    /// Leave-one-out retrieval evaluation.
    Eval(EvalArgs),
    /// Emit CSV data behind the profile, histogram and discrimination-rate figures.
    Plot {
        #[command(subcommand)]
        command: PlotCommand,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Named test set (SS_t1 .. SS_t5).
    #[arg(long, conflicts_with = "kind", required_unless_present = "kind")]
    set: Option<String>,
    /// Single generator: beat_sine, pulse_sine, cricket, cricket2, pink_noise, snr_mix.
    #[arg(long)]
    kind: Option<String>,
    /// Generator parameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE", requires = "kind")]
    params: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_DURATION)]
    duration: f64,
    /// Seed for every noise source.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct FrameArgs {
    /// MFCC / log-mel frame length.
    #[arg(long, default_value_t = 50.0)]
    window_ms: f64,
    /// MFCC / log-mel hop.
    #[arg(long, default_value_t = 50.0)]
    hop_ms: f64,
    /// EMFD-KDE smoothing constant.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

impl FrameArgs {
    fn frame(&self) -> Result<FrameSpec, Error> {
        let spec = FrameSpec {
            window_ms: self.window_ms,
            hop_ms: self.hop_ms,
            ..FrameSpec::exp1()
        };
        spec.validate()?;
        Ok(spec)
    }

    fn alpha(&self) -> Result<f64, Error> {
        if self.alpha > 0.0 && self.alpha.is_finite() {
            Ok(self.alpha)
        } else {
            Err(config("alpha", format!("must be > 0, got {}", self.alpha)))
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Convert,
}

impl From<Mode> for LoadMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Strict => LoadMode::Strict,
            Mode::Convert => LoadMode::Convert,
        }
    }
}

#[derive(Args)]
struct ExtractArgs {
    /// emfd, emfd-kde, mfd-vl, mfcc13, mfcc39 or logmel.
    #[arg(long)]
    feature: String,
    #[command(flatten)]
    frame: FrameArgs,
    /// How to treat non-canonical WAV formats.
    #[arg(long, value_enum, default_value_t = Mode::Convert)]
    mode: Mode,
    /// Output directory; one `<name>.<feature>.json` per input.
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Extract features for a corpus, fit PCA and write the index.
    Build(BuildArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Corpus metadata (JSON Lines).
    #[arg(long)]
    metadata: PathBuf,
    /// Weighted feature list, e.g. `mfd-vl:1,mfcc13:0.5`.
    #[arg(long, default_value = "mfd-vl")]
    features: String,
    /// var:<ratio>, dim:<count> or identity.
    #[arg(long, default_value = "var:0.99")]
    pca: String,
    /// File listing the ids (one per line) used to fit PCA; default: all.
    #[arg(long)]
    fit_ids: Option<PathBuf>,
    #[command(flatten)]
    frame: FrameArgs,
    #[arg(long)]
    out: PathBuf,
    /// Where to write items that failed to load or extract (JSON Lines).
    #[arg(long)]
    failures: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Indexed item to use as the key.
    #[arg(long, conflicts_with = "audio", required_unless_present = "audio")]
    id: Option<String>,
    /// Unindexed WAV to use as the key.
    #[arg(long)]
    audio: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Leave the key item itself out of the results.
    #[arg(long)]
    exclude_self: bool,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalKind {
    Si,
    Precision,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(value_enum)]
    mode: EvalKind,
    #[arg(long)]
    index: PathBuf,
    /// Cut-offs, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 5, 10])]
    k: Vec<usize>,
    /// Stopword file (one token per line); overrides FRACSIG_STOPWORDS.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Per-query CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Aggregate CSV destination (default: stderr summary only).
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// MFD-VL value at each of the ten scales, per input.
    Mfdvl(PlotArgs),
    /// EMFD (or EMFD-KDE) matrix cells, per input.
    Emfd(EmfdPlotArgs),
    /// Discrimination rates of each input against a reference sound.
    Dr(DrArgs),
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct EmfdPlotArgs {
    /// Smooth with a Gaussian KDE instead of counting.
    #[arg(long)]
    kde: bool,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Args)]
struct DrArgs {
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn config(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("fracsig: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("fracsig: error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(config("jobs", "must be >= 1").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Synth(args) => synth_cmd(args),
        Command::Extract(args) => extract_cmd(args),
        Command::Index {
            command: IndexCommand::Build(args),
        } => build_cmd(args),
        Command::Query(args) => query_cmd(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Plot { command } => match command {
            PlotCommand::Mfdvl(args) => plot_mfdvl(args),
            PlotCommand::Emfd(args) => plot_emfd(args),
            PlotCommand::Dr(args) => plot_dr(args),
        },
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(path: &Path) -> CliResult {
    fs::create_dir_all(path).map_err(|e| Failure::Runtime(format!("creating {}: {e}", path.display())))
}

fn load(path: &Path) -> CliResult<Signal> {
    Ok(audio::load_wav(path, LoadMode::Convert)?)
}

fn synth_cmd(args: SynthArgs) -> CliResult {
    if !(args.duration > 0.0 && args.duration.is_finite()) {
        return Err(config("duration", "must be > 0").into());
    }
    let specs: Vec<(String, SynthSpec)> = match (&args.set, &args.kind) {
        (Some(set), _) => {
            let set: TestSet = set.parse()?;
            let name = args.set.as_deref().unwrap_or_default();
            set.specs(args.duration, args.seed)
                .into_iter()
                .enumerate()
                .map(|(i, spec)| (format!("{name}_{:02}", i + 1), spec))
                .collect()
        }
        (None, Some(kind)) => {
            let kind: SynthKind = kind.parse()?;
            let mut params = BTreeMap::new();
            for p in &args.params {
                let (k, v) = p
                    .split_once('=')
                    .ok_or_else(|| config("param", format!("expected NAME=VALUE, got `{p}`")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| config("param", format!("`{k}` needs a number, got `{v}`")))?;
                params.insert(k.trim().to_string(), v);
            }
            let spec = SynthSpec {
                kind,
                parameters: params,
                duration: args.duration,
                seed: args.seed,
            };
            let id = args.kind.clone().unwrap_or_default();
            vec![(id, spec)]
        }
        (None, None) => return Err(config("set", "either --set or --kind is required").into()),
    };

    create_dir(&args.out)?;
    let mut metadata = String::new();
    for (id, spec) in specs {
        let signal = spec.generate()?;
        let file = format!("{id}.wav");
        audio::write_wav(&signal, args.out.join(&file))?;
        let kind = spec.label();
        let family = kind.split('(').next().unwrap_or_default().to_string();
        let line = json!({
            "id": id,
            "path": file,
            "label": family,
            "tags": [family],
            "synth": spec,
            "description": kind,
        });
        metadata.push_str(&line.to_string());
        metadata.push('\n');
    }
    let meta_path = args.out.join("metadata.jsonl");
    fs::write(&meta_path, metadata).map_err(|e| Failure::Runtime(format!("writing {}: {e}", meta_path.display())))
}

fn extract_one(kind: FeatureKind, signal: &Signal, frame: &FrameSpec, alpha: f64) -> Result<SignatureRecord, Error> {
    Ok(match kind {
        FeatureKind::Emfd => SignatureRecord::Emfd(signature::emfd(signal)?),
        FeatureKind::EmfdKde => SignatureRecord::Emfd(signature::emfd_kde(signal, alpha)?),
        FeatureKind::MfdVl => SignatureRecord::MfdVl(signature::mfdvl(signal)?),
        FeatureKind::Mfcc13 => SignatureRecord::Baseline(baseline::extract(BaselineKind::Mfcc13, signal, frame)?),
        FeatureKind::Mfcc39 => SignatureRecord::Baseline(baseline::extract(BaselineKind::Mfcc39, signal, frame)?),
        FeatureKind::LogMel => SignatureRecord::Baseline(baseline::extract(BaselineKind::LogMel, signal, frame)?),
    })
}

fn extract_cmd(args: ExtractArgs) -> CliResult {
    let kind: FeatureKind = args.feature.parse()?;
    let frame = args.frame.frame()?;
    let alpha = args.frame.alpha()?;
    create_dir(&args.out)?;
    for input in &args.inputs {
        let signal = audio::load_wav(input, args.mode.into())?;
        let record = extract_one(kind, &signal, &frame, alpha)?;
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("signal");
        let path = args.out.join(format!("{stem}.{}.json", kind.name()));
        let bytes = signature::serialize_signature(&record)?;
        fs::write(&path, bytes).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
    }
    Ok(())
}

fn build_cmd(args: BuildArgs) -> CliResult {
    let mut assembly = FeatureAssembly::parse(&args.features)?;
    assembly.frame = args.frame.frame()?;
    assembly.alpha = args.frame.alpha()?;
    assembly.validate()?;
    let mode: PcaMode = args.pca.parse()?;
    let fit_ids = match &args.fit_ids {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))?;
            Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from)
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };

    let items = retrieval::load_corpus(&args.metadata)?;
    let ingested = retrieval::ingest_corpus(&items, &assembly)?;
    for f in &ingested.failures {
        eprintln!("fracsig: skipped `{}` ({}): {}", f.id, f.path.display(), f.error);
    }
    if let Some(path) = &args.failures {
        let text: String = ingested
            .failures
            .iter()
            .map(|f| serde_json::to_string(f).expect("failure serializes") + "\n")
            .collect();
        write_output(Some(path), &text)?;
    }
    let index = SearchIndex::build(ingested, assembly, mode, fit_ids.as_deref())?;
    retrieval::save_index(&index, &args.out)?;
    eprintln!(
        "fracsig: indexed {} items, {} -> {} dimensions",
        index.len(),
        index.pca.dim_in(),
        index.pca.dim_out()
    );
    Ok(())
}

fn query_cmd(args: QueryArgs) -> CliResult {
    if args.k == 0 {
        return Err(config("k", "must be >= 1").into());
    }
    let index = retrieval::load_index(&args.index)?;
    let (key, hits) = match (&args.id, &args.audio) {
        (Some(id), _) => (id.clone(), index.query_id(id, args.k, args.exclude_self)?),
        (None, Some(path)) => (path.display().to_string(), index.query_signal(&load(path)?, args.k)?),
        (None, None) => return Err(config("id", "either --id or --audio is required").into()),
    };
    let mut csv = String::from("query_id,rank,neighbor_id,distance\n");
    for (rank, hit) in hits.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&key),
            rank + 1,
            csv_field(&hit.id),
            format_number(hit.distance)
        ));
    }
    write_output(args.out.as_deref(), &csv)
}

fn stopwords(explicit: Option<&Path>) -> CliResult<Vec<String>> {
    let path = explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(STOPWORDS_ENV).map(PathBuf::from));
    match path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| Failure::Runtime(format!("reading {}: {e}", p.display())))?;
            Ok(metrics::parse_stopwords(&text))
        }
        None => Ok(metrics::default_stopwords()),
    }
}

fn eval_cmd(args: EvalArgs) -> CliResult {
    let mode = match args.mode {
        EvalKind::Si => EvalMode::Si,
        EvalKind::Precision => EvalMode::Precision,
    };
    if args.k.is_empty() || args.k.contains(&0) {
        return Err(config("k", "cut-offs must be >= 1").into());
    }
    let words = stopwords(args.stopwords.as_deref())?;
    let index = retrieval::load_index(&args.index)?;
    let report = retrieval::evaluate(&index, mode, &args.k, &words)?;
    write_output(args.out.as_deref(), &report.rows_csv())?;
    match &args.summary {
        Some(p) => write_output(Some(p), &report.aggregate_csv())?,
        None => eprint!("{}", report.aggregate_csv()),
    }
    Ok(())
}

fn source_name(path: &Path) -> String {
    csv_field(&path.display().to_string())
}

fn plot_mfdvl(args: PlotArgs) -> CliResult {
    let mut csv = String::from("source,scale,radius,side_seconds,mfd\n");
    for input in &args.inputs {
        let signal = load(input)?;
        let ladder = fractal::mfdvl_radii(signal.sample_rate())?;
        let sig = signature::mfdvl(&signal)?;
        for x in 0..MFDVL_LEN {
            let r = ladder.radii()[x];
            csv.push_str(&format!(
                "{},{x},{r},{},{}\n",
                source_name(input),
                format_number(2.0 * r as f64 / f64::from(signal.sample_rate())),
                format_number(sig.values[x])
            ));
        }
    }
    write_output(args.out.as_deref(), &csv)
}

fn plot_emfd(args: EmfdPlotArgs) -> CliResult {
    if !(args.alpha > 0.0 && args.alpha.is_finite()) {
        return Err(config("alpha", "must be > 0").into());
    }
    let mut csv = String::from("source,rbin,dbin,value\n");
    for input in &args.inputs {
        let signal = load(input)?;
        let sig = if args.kde {
            signature::emfd_kde(&signal, args.alpha)?
        } else {
            signature::emfd(&signal)?
        };
        for (rbin, row) in sig.values.iter().enumerate() {
            for (dbin, v) in row.iter().enumerate() {
                csv.push_str(&format!("{},{rbin},{dbin},{}\n", source_name(input), format_number(*v)));
            }
        }
    }
    write_output(args.out.as_deref(), &csv)
}

fn plot_dr(args: DrArgs) -> CliResult {
    let frame = FrameSpec::exp1();
    let reference = load(&args.reference)?;
    let ref_vl = signature::mfdvl(&reference)?;
    let ref_mfcc = baseline::mfcc13(&reference, &frame)?;
    let mut csv = String::from("source,dr_mfdvl,dr_mfcc13\n");
    for input in &args.inputs {
        let signal = load(input)?;
        let vl = signature::mfdvl(&signal)?;
        let mfcc = baseline::mfcc13(&signal, &frame)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            source_name(input),
            format_number(metrics::dr_mfdvl(&ref_vl.values, &vl.values)?),
            format_number(metrics::dr_mfcc13(&ref_mfcc, &mfcc)?)
        ));
    }
    write_output(args.out.as_deref(), &csv)
}
