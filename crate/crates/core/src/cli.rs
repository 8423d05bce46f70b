//! The `lemmasplit` command line.
//!
//! Exit status is 0 on success, 1 on data errors and 2 on usage errors.
//! Every output file is written atomically.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::baseline::{self, RuleModel};
use crate::corpus::{dataset_stats, serialize, LanguageDataset, ParseOptions, MISC_FAMILY};
use crate::files::{self, part_path, sidecar_path, write_atomic};
use crate::metrics::{align_predictions, evaluate, parse_predictions, EvalOptions, EvalResult};
use crate::report::{self, collapse_small_families, DEFAULT_MIN_LANGUAGES};
use crate::splitter::{self, verify_parts, Part, Proportions, SplitMode, SplitSidecar, SplitSpec};

#[derive(Debug, Parser)]
#[command(
    name = "lemmasplit",
    version,
    about = "Re-split inflection data by lemma, verify splits, evaluate and report"
)]
struct Cli {
    /// Print a machine-readable JSON summary on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Do not NFC-normalize strings (byte-exact comparison).
    #[arg(long, global = true)]
    no_normalize: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split one UniMorph file, or every *.tsv in a directory, into .trn/.dev/.tst.
    Split(SplitArgs),
    /// Check a split directory for train/dev/test leakage and completeness.
    Verify(VerifyArgs),
    /// Print size statistics of UniMorph files.
    Stats(StatsArgs),
    /// Score a prediction file against gold data.
    Eval(EvalArgs),
    /// Train the rule baseline and save it as JSON.
    BaselineTrain(BaselineTrainArgs),
    /// Inflect every (lemma, features) of a file with a saved baseline model.
    BaselinePredict(BaselinePredictArgs),
    /// Aggregate evaluation results per language family.
    ReportFamily(ReportFamilyArgs),
    /// Pair form-split and lemma-split results into per-language drop records.
    ReportDrop(ReportDropArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
struct Source {
    /// A single UniMorph TSV file.
    #[arg(long, group = "source")]
    input: Option<PathBuf>,
    /// A directory; every *.tsv file inside is one language.
    #[arg(long, group = "source")]
    dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_parser = parse_mode)]
    mode: SplitMode,
    /// Train,dev,test proportions; must sum to exactly 1.
    #[arg(long, default_value = "0.7,0.1,0.2", value_parser = parse_proportions)]
    proportions: Proportions,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Language code (single-file mode); defaults to the file stem.
    #[arg(long)]
    lang: Option<String>,
    /// Family recorded in the provenance (single-file mode).
    #[arg(long)]
    family: Option<String>,
    /// Two-column TSV mapping language codes to families.
    #[arg(long)]
    families: Option<PathBuf>,
    /// Worker threads in directory mode (0: one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Directory holding <lang>.trn/.dev/.tst files.
    #[arg(long)]
    dir: PathBuf,
    /// Split mode to check; defaults to the mode in <lang>.split.json.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SplitMode>,
    /// Only check this language.
    #[arg(long)]
    lang: Option<String>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    source: Source,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Gold UniMorph file.
    #[arg(long)]
    gold: PathBuf,
    /// Predictions: 3-column TSV (form in column 2) or one form per line.
    #[arg(long)]
    pred: PathBuf,
    /// System name; defaults to the prediction file stem.
    #[arg(long)]
    system: Option<String>,
    /// Split mode the gold file comes from; defaults to the mode in the
    /// split's provenance file, or form.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SplitMode>,
    /// Language code; defaults to the gold file stem.
    #[arg(long)]
    lang: Option<String>,
    /// Also write the result JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BaselineTrainArgs {
    /// Training UniMorph file.
    #[arg(long)]
    train: PathBuf,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Keep every training form and rewrite between a lemma's own forms.
    #[arg(long)]
    memorize: bool,
}

#[derive(Debug, Args)]
struct BaselinePredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// UniMorph file whose lemma and features are inflected; its forms are ignored.
    #[arg(long)]
    input: PathBuf,
    /// Prediction file (3-column TSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportFamilyArgs {
    /// EvalResult JSON files.
    #[arg(long, num_args = 1.., required = true)]
    results: Vec<PathBuf>,
    /// Two-column TSV mapping language codes to families.
    #[arg(long)]
    families: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_LANGUAGES)]
    min_languages: usize,
    /// Two-column TSV of system abbreviations for the table.
    #[arg(long)]
    abbreviations: Option<PathBuf>,
    /// Write the aggregates as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the rendered table as TSV.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportDropArgs {
    /// Form-split EvalResult JSON files.
    #[arg(long, num_args = 1.., required = true)]
    form: Vec<PathBuf>,
    /// Lemma-split EvalResult JSON files.
    #[arg(long, num_args = 1.., required = true)]
    lemma: Vec<PathBuf>,
    /// Two-column TSV of form-split training sizes per language.
    #[arg(
        long,
        conflicts_with = "train_dir",
        required_unless_present = "train_dir"
    )]
    train_sizes: Option<PathBuf>,
    /// Form-split directory; sizes are read from its <lang>.trn files.
    #[arg(long)]
    train_dir: Option<PathBuf>,
    /// Two-column TSV mapping language codes to families; unlisted
    /// languages count as misc.
    #[arg(long)]
    families: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_LANGUAGES)]
    min_languages: usize,
    /// CSV output.
    #[arg(long)]
    out: PathBuf,
    /// JSON output (records plus macro-averaged drops).
    #[arg(long)]
    json_out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<SplitMode, String> {
    s.parse()
}

fn parse_proportions(s: &str) -> Result<Proportions, String> {
    Proportions::parse(s).map_err(|e| e.to_string())
}

struct Settings {
    json: bool,
    parse: ParseOptions,
}

/// Runs the command line and returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return 0;
            }
            eprint!("{err}");
            if let Some(help) = subcommand_help(&args) {
                eprintln!("\n{help}");
            }
            return 2;
        }
    };
    let ctx = Settings {
        json: cli.json,
        parse: ParseOptions {
            normalize: !cli.no_normalize,
        },
    };
    let outcome = match cli.command {
        Command::Split(a) => cmd_split(&ctx, a),
        Command::Verify(a) => cmd_verify(&ctx, a),
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::BaselineTrain(a) => cmd_baseline_train(&ctx, a),
        Command::BaselinePredict(a) => cmd_baseline_predict(&ctx, a),
        Command::ReportFamily(a) => cmd_report_family(&ctx, a),
        Command::ReportDrop(a) => cmd_report_drop(&ctx, a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            if let Some(help) = subcommand_help(&args) {
                eprintln!("\n{help}");
            }
            2
        }
        Err(Failure::Data(err)) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn subcommand_help(args: &[OsString]) -> Option<String> {
    let mut cmd = Cli::command();
    let name = args.iter().skip(1).find_map(|a| {
        let a = a.to_str()?;
        cmd.get_subcommands()
            .any(|s| s.get_name() == a)
            .then(|| a.to_owned())
    })?;
    cmd.find_subcommand_mut(&name)
        .map(|s| s.render_help().to_string())
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(err: E) -> Self {
        Failure::Data(err.into())
    }
}

type CmdResult = Result<i32, Failure>;

fn emit_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("summary serializes")
    );
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Input files with their language codes.
fn sources(source: &Source, lang: Option<&str>) -> anyhow::Result<Vec<(PathBuf, String)>> {
    match (&source.input, &source.dir) {
        (Some(path), _) => {
            let lang = lang
                .map(str::to_owned)
                .unwrap_or_else(|| files::language_from_path(path));
            Ok(vec![(path.clone(), lang)])
        }
        (None, Some(dir)) => {
            let found = files::list_with_extension(dir, "tsv")?;
            if found.is_empty() {
                bail!("no *.tsv files in {}", dir.display());
            }
            Ok(found
                .into_iter()
                .map(|p| {
                    let lang = files::language_from_path(&p);
                    (p, lang)
                })
                .collect())
        }
        (None, None) => unreachable!("clap requires --input or --dir"),
    }
}

fn cmd_split(ctx: &Settings, args: SplitArgs) -> CmdResult {
    if args.lang.is_some() && args.source.dir.is_some() {
        return Err(Failure::Usage("--lang only applies with --input".into()));
    }
    let families = args
        .families
        .as_deref()
        .map(files::read_family_map)
        .transpose()?
        .unwrap_or_default();
    let inputs = sources(&args.source, args.lang.as_deref())?;
    let spec = SplitSpec {
        mode: args.mode,
        proportions: args.proportions,
        seed: args.seed,
    };

    let split_one = |(path, lang): &(PathBuf, String)| -> anyhow::Result<SplitSidecar> {
        let family = args
            .family
            .clone()
            .or_else(|| families.get(lang).cloned())
            .unwrap_or_else(|| MISC_FAMILY.to_owned());
        let dataset = files::read_dataset(path, lang, &family, ctx.parse)?;
        let result =
            splitter::split(&dataset, &spec).with_context(|| format!("{}", path.display()))?;
        for part in Part::ALL {
            write_atomic(
                &part_path(&args.out, lang, part),
                serialize(result.part(part)).as_bytes(),
            )?;
        }
        let sidecar = result.sidecar();
        write_json(&sidecar_path(&args.out, lang), &sidecar)?;
        Ok(sidecar)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()?;
    let outcomes: Vec<anyhow::Result<SplitSidecar>> =
        pool.install(|| inputs.par_iter().map(split_one).collect());

    let mut sidecars = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(s) => sidecars.push(s),
            Err(e) => failures.push(e),
        }
    }
    if ctx.json {
        emit_json(&json!({
            "command": "split",
            "ok": failures.is_empty(),
            "languages": sidecars,
            "errors": failures.iter().map(|e| format!("{e:#}")).collect::<Vec<_>>(),
        }));
    } else {
        for s in &sidecars {
            println!(
                "{}: {} split, train/dev/test = {}/{}/{} examples ({}/{}/{} units)",
                s.language,
                s.mode,
                s.counts.train,
                s.counts.dev,
                s.counts.test,
                s.unit_counts.train,
                s.unit_counts.dev,
                s.unit_counts.test
            );
        }
    }
    match failures.len() {
        0 => Ok(0),
        1 => Err(Failure::Data(failures.remove(0))),
        n => {
            for e in &failures {
                eprintln!("error: {e:#}");
            }
            Err(Failure::Data(anyhow!("{n} languages failed")))
        }
    }
}

/// Languages with at least one part file in `dir`.
fn split_languages(dir: &Path) -> anyhow::Result<Vec<String>> {
    let mut langs: Vec<String> = Part::ALL
        .iter()
        .map(|p| files::list_with_extension(dir, p.extension()))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .map(|p| files::language_from_path(&p))
        .collect();
    langs.sort();
    langs.dedup();
    Ok(langs)
}

fn read_sidecar(dir: &Path, lang: &str) -> anyhow::Result<Option<SplitSidecar>> {
    let path = sidecar_path(dir, lang);
    if !path.exists() {
        return Ok(None);
    }
    let text = files::read_bytes(&path)?;
    Ok(Some(
        serde_json::from_slice(&text).with_context(|| format!("{}", path.display()))?,
    ))
}

fn read_part(
    dir: &Path,
    lang: &str,
    part: Part,
    family: &str,
    parse: ParseOptions,
) -> anyhow::Result<LanguageDataset> {
    let path = part_path(dir, lang, part);
    if !path.exists() {
        return Ok(LanguageDataset::new(lang, family, Vec::new()));
    }
    Ok(files::read_dataset(&path, lang, family, parse)?)
}

fn cmd_verify(ctx: &Settings, args: VerifyArgs) -> CmdResult {
    let langs = match &args.lang {
        Some(l) => vec![l.clone()],
        None => split_languages(&args.dir)?,
    };
    if langs.is_empty() {
        return Err(Failure::Data(anyhow!(
            "no split files in {}",
            args.dir.display()
        )));
    }

    let mut reports = Vec::new();
    for lang in &langs {
        let sidecar = read_sidecar(&args.dir, lang)?;
        let mode = match (args.mode, &sidecar) {
            (Some(m), Some(s)) if m != s.mode => {
                log::warn!("{lang}: checking as {m} split, provenance says {}", s.mode);
                m
            }
            (Some(m), _) => m,
            (None, Some(s)) => s.mode,
            (None, None) => {
                return Err(Failure::Usage(format!(
                    "{lang}: no provenance file; pass --mode"
                )))
            }
        };
        let family = sidecar.as_ref().map_or(MISC_FAMILY, |s| s.family.as_str());
        let parts = Part::ALL.map(|p| read_part(&args.dir, lang, p, family, ctx.parse));
        let [train, dev, test] = parts;
        let (train, dev, test) = (train?, dev?, test?);
        let report = verify_parts(
            mode,
            [&train, &dev, &test],
            sidecar.as_ref().map(|s| s.checksum.as_str()),
        );
        reports.push((lang.clone(), report));
    }

    let total: usize = reports.iter().map(|(_, r)| r.violations.len()).sum();
    if ctx.json {
        let per_lang: Vec<_> = reports
            .iter()
            .map(|(lang, r)| json!({"language": lang, "report": r}))
            .collect();
        emit_json(
            &json!({"command": "verify", "ok": total == 0, "violations": total, "languages": per_lang}),
        );
    } else {
        for (lang, r) in &reports {
            for v in &r.violations {
                println!("{lang}: {v}");
            }
        }
        if total == 0 {
            println!("OK, 0 violations");
        } else {
            println!("FAILED, {total} violations");
        }
    }
    Ok(if total == 0 { 0 } else { 1 })
}

fn cmd_stats(ctx: &Settings, args: StatsArgs) -> CmdResult {
    let mut stats = Vec::new();
    for (path, lang) in sources(&args.source, None)? {
        let dataset = files::read_dataset(&path, &lang, MISC_FAMILY, ctx.parse)?;
        stats.push(dataset_stats(&dataset));
    }
    if ctx.json {
        emit_json(&json!({"command": "stats", "languages": stats}));
    } else {
        println!("language\ttriplets\ttables\tmin\tmean\tmax\tbundles");
        for s in &stats {
            println!(
                "{}\t{}\t{}\t{}\t{:.2}\t{}\t{}",
                s.language,
                s.triplets,
                s.tables,
                s.min_table_size,
                s.mean_table_size,
                s.max_table_size,
                s.distinct_bundles
            );
        }
    }
    Ok(0)
}

fn cmd_eval(ctx: &Settings, args: EvalArgs) -> CmdResult {
    let lang = args
        .lang
        .clone()
        .unwrap_or_else(|| files::language_from_path(&args.gold));
    let system = args
        .system
        .clone()
        .unwrap_or_else(|| files::language_from_path(&args.pred));
    let mode = match args.mode {
        Some(m) => m,
        None => {
            let dir = args.gold.parent().unwrap_or(Path::new("."));
            read_sidecar(dir, &lang)?.map_or(SplitMode::Form, |s| s.mode)
        }
    };
    let gold = files::read_dataset(&args.gold, &lang, MISC_FAMILY, ctx.parse)?;
    let options = EvalOptions {
        normalize: ctx.parse.normalize,
    };
    let lines = parse_predictions(&files::read_bytes(&args.pred)?, options)
        .with_context(|| format!("{}", args.pred.display()))?;
    let predictions = align_predictions(&gold, &lines)
        .with_context(|| format!("{} against {}", args.pred.display(), args.gold.display()))?;
    let result = evaluate(&gold, &predictions, &system, mode, options)?;

    if let Some(out) = &args.out {
        write_json(out, &result)?;
    }
    if ctx.json {
        emit_json(&result);
    } else {
        println!(
            "{}\t{}\t{}\taccuracy={:.4}\tmean_edit_distance={:.4}\tn={}",
            result.language,
            result.system,
            result.split_mode,
            result.accuracy,
            result.mean_edit_distance,
            result.n
        );
    }
    Ok(0)
}

fn cmd_baseline_train(ctx: &Settings, args: BaselineTrainArgs) -> CmdResult {
    let lang = files::language_from_path(&args.train);
    let dataset = files::read_dataset(&args.train, &lang, MISC_FAMILY, ctx.parse)?;
    let model = baseline::train(&dataset, args.memorize)?;
    let mut text = model.to_json();
    text.push('\n');
    write_atomic(&args.out, text.as_bytes())?;
    let n_rules: usize = model.rules.values().map(Vec::len).sum();
    if ctx.json {
        emit_json(&json!({
            "command": "baseline-train",
            "language": lang,
            "examples": dataset.len(),
            "bundles": model.rules.len(),
            "rules": n_rules,
            "memorize": args.memorize,
            "model": args.out,
        }));
    } else {
        println!(
            "{lang}: {} rules over {} bundles from {} examples{}",
            n_rules,
            model.rules.len(),
            dataset.len(),
            if args.memorize { " (memorizing)" } else { "" }
        );
    }
    Ok(0)
}

fn cmd_baseline_predict(ctx: &Settings, args: BaselinePredictArgs) -> CmdResult {
    let text = String::from_utf8(files::read_bytes(&args.model)?)
        .map_err(|_| anyhow!("{}: not UTF-8", args.model.display()))?;
    let model = RuleModel::from_json(&text).with_context(|| format!("{}", args.model.display()))?;
    let lang = files::language_from_path(&args.input);
    let dataset = files::read_dataset(&args.input, &lang, MISC_FAMILY, ctx.parse)?;
    let mut out = String::new();
    for t in &dataset.triplets {
        let form = model.predict(t.lemma(), t.features());
        out.push_str(&format!("{}\t{}\t{}\n", t.lemma(), form, t.features()));
    }
    write_atomic(&args.out, out.as_bytes())?;
    if ctx.json {
        emit_json(
            &json!({"command": "baseline-predict", "language": lang, "predictions": dataset.len(), "out": args.out}),
        );
    } else {
        println!(
            "{lang}: wrote {} predictions to {}",
            dataset.len(),
            args.out.display()
        );
    }
    Ok(0)
}

fn read_results(paths: &[PathBuf]) -> anyhow::Result<Vec<EvalResult>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(files::read_json_values::<EvalResult>(p)?);
    }
    Ok(out)
}

fn cmd_report_family(ctx: &Settings, args: ReportFamilyArgs) -> CmdResult {
    let results = read_results(&args.results)?;
    let families = files::read_family_map(&args.families)?;
    let aggregates = report::aggregate_by_family(&results, &families, args.min_languages)?;
    let abbreviations: HashMap<String, String> = match &args.abbreviations {
        Some(p) => files::read_family_map(p)?,
        None => HashMap::new(),
    };
    let table = report::render_family_table(&aggregates, &abbreviations);
    if let Some(out) = &args.out {
        write_json(out, &aggregates)?;
    }
    if let Some(path) = &args.table {
        write_atomic(path, table.as_bytes())?;
    }
    if ctx.json {
        emit_json(&json!({"command": "report-family", "aggregates": aggregates}));
    } else {
        print!("{table}");
    }
    Ok(0)
}

fn cmd_report_drop(ctx: &Settings, args: ReportDropArgs) -> CmdResult {
    let form = read_results(&args.form)?;
    let lemma = read_results(&args.lemma)?;

    let sizes: HashMap<String, usize> = match (&args.train_sizes, &args.train_dir) {
        (Some(p), _) => files::read_size_map(p)?,
        (None, Some(dir)) => {
            let mut sizes = HashMap::new();
            for r in &form {
                if sizes.contains_key(&r.language) {
                    continue;
                }
                let path = part_path(dir, &r.language, Part::Train);
                let ds = files::read_dataset(&path, &r.language, MISC_FAMILY, ctx.parse)?;
                sizes.insert(r.language.clone(), ds.len());
            }
            sizes
        }
        (None, None) => unreachable!("clap requires a train size source"),
    };

    let mut families = match &args.families {
        Some(p) => files::read_family_map(p)?,
        None => HashMap::new(),
    };
    for r in form.iter().chain(&lemma) {
        families
            .entry(r.language.clone())
            .or_insert_with(|| MISC_FAMILY.to_owned());
    }
    let families = collapse_small_families(
        form.iter().chain(&lemma).map(|r| r.language.as_str()),
        &families,
        args.min_languages,
    )?;

    let summary = report::drop_records(&form, &lemma, &sizes, &families)?;
    write_atomic(
        &args.out,
        report::drop_records_csv(&summary.records).as_bytes(),
    )?;
    if let Some(p) = &args.json_out {
        write_json(p, &summary)?;
    }
    if ctx.json {
        emit_json(&json!({
            "command": "report-drop",
            "records": summary.records.len(),
            "per_system": summary.per_system,
            "per_family": summary.per_family,
            "overall": summary.overall,
            "out": args.out,
        }));
    } else {
        println!("system\tmacro_drop");
        for (system, drop) in &summary.per_system {
            println!("{system}\t{drop:.4}");
        }
        println!("overall\t{:.4}", summary.overall);
    }
    Ok(0)
}
