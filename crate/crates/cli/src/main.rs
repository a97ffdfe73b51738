//! `urbanav`: generate data, run the executor, train and evaluate
//! instruction followers.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use urbanav_core::abstraction::{abstract_text, Lexicon};
use urbanav_core::baselines::{BaselineFactory, BaselineKind};
use urbanav_core::config::FlatConfig;
use urbanav_core::corpus::{load_corpus, save_corpus, Corpus, MapSet};
use urbanav_core::evaluator::{evaluate, run_protocol, FoldPlan, PolicyFactory, Report, ReportRow, SuccessConfig};
use urbanav_core::executor::{execute, parse_actions, Pose};
use urbanav_core::map::{format_tiles, load_map, write_map};
use urbanav_core::stats::stats;
use urbanav_core::synth::{generate, SynthSpec};
use urbanav_neural::autodiff::Fault;
use urbanav_neural::gradcheck::gradient_check;
use urbanav_neural::model::{ModelConfig, Variant, CONFIG_KEYS};
use urbanav_neural::{checkpoint, train, NeuralFactory, NeuralFollower};

const DEFAULT_SEED: u64 = 1;
const GRADCHECK_TOLERANCE: f64 = 1e-4;
const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Parser)]
#[command(name = "urbanav", version, about = "Urban navigation instruction following")]
struct Cli {
    /// Global seed (default: $URBANAV_SEED, then 1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic maps and a corpus.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Preset::Default)]
        preset: Preset,
    },
    /// Print corpus statistics.
    Stats(DataArg),
    /// Execute an action string on a map and print the route.
    Simulate {
        #[arg(long)]
        map: PathBuf,
        /// Start pose `street:index:dir`, e.g. `3:0:1`.
        #[arg(long)]
        start: String,
        /// Space-separated actions ending in END.
        #[arg(long)]
        actions: String,
    },
    /// Replace entity mentions with typed variables.
    Abstract {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Train a model on one fold's training maps.
    Train {
        #[command(flatten)]
        data: DataArg,
        #[arg(long, default_value_t = 1)]
        fold: usize,
        #[arg(long)]
        variant: Option<Variant>,
        /// Model checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch CSV log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on its fold, or run the full protocol for a policy.
    Evaluate {
        #[command(flatten)]
        data: DataArg,
        /// Checkpoint to evaluate on `--fold`'s test map.
        #[arg(long, conflicts_with = "policy")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        fold: usize,
        /// no-move, random, jump, cga, cgae or cgaew.
        #[arg(long, required_unless_present = "model")]
        policy: Option<String>,
        /// Comma-separated seeds for the protocol (default: the global seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// JSON report to write.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV copy of the report rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run NO_MOVE, RANDOM and JUMP through the protocol.
    Baseline {
        #[command(flatten)]
        data: DataArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value = "cgaew")]
        variant: Variant,
        #[arg(long, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
    },
}

#[derive(Args)]
struct DataArg {
    /// Directory holding `maps/*.map` and `corpus.txt`.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Default,
    Run,
    Tiny,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    Tanh,
    Mul,
}

const SYNTH_KEYS: &[&str] = &[
    "seed",
    "width",
    "height",
    "avenues",
    "cross_streets",
    "diagonal",
    "pois_per_map",
    "signal_rate",
    "distractor_rate",
    "min_walk",
    "max_walk",
];

struct Ctx {
    seed: u64,
    config: FlatConfig,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx> {
        let config = match &cli.config {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };
        let seed = match (cli.seed, config.raw("seed"), std::env::var("URBANAV_SEED")) {
            (Some(s), _, _) => s,
            (None, Some(s), _) => s.parse().with_context(|| format!("config seed {s:?}"))?,
            (None, None, Ok(s)) => s.parse().with_context(|| format!("URBANAV_SEED={s:?}"))?,
            (None, None, Err(_)) => DEFAULT_SEED,
        };
        Ok(Ctx { seed, config })
    }

    fn model_config(&self, variant: Option<Variant>) -> Result<ModelConfig> {
        self.config.check_keys(CONFIG_KEYS)?;
        let mut c = ModelConfig::default();
        c.apply(&self.config)?;
        c.seed = self.seed;
        if let Some(v) = variant {
            c.variant = v;
        }
        Ok(c)
    }

    fn synth_spec(&self, preset: Preset) -> Result<SynthSpec> {
        self.config.check_keys(SYNTH_KEYS)?;
        let mut s = match preset {
            Preset::Default => SynthSpec::default(),
            Preset::Run => SynthSpec::run_scale(self.seed),
            Preset::Tiny => SynthSpec::tiny(self.seed),
        };
        s.seed = self.seed;
        let c = &self.config;
        c.apply("width", &mut s.width)?;
        c.apply("height", &mut s.height)?;
        c.apply("avenues", &mut s.avenues)?;
        c.apply("cross_streets", &mut s.cross_streets)?;
        c.apply("diagonal", &mut s.diagonal)?;
        c.apply("pois_per_map", &mut s.pois_per_map)?;
        c.apply("signal_rate", &mut s.signal_rate)?;
        c.apply("distractor_rate", &mut s.distractor_rate)?;
        c.apply("min_walk", &mut s.min_walk)?;
        c.apply("max_walk", &mut s.max_walk)?;
        Ok(s)
    }
}

fn load_data(dir: &Path) -> Result<(MapSet, Corpus)> {
    let maps = MapSet::load_dir(dir.join("maps")).with_context(|| format!("loading maps from {}", dir.display()))?;
    let corpus =
        load_corpus(dir.join("corpus.txt")).with_context(|| format!("loading corpus from {}", dir.display()))?;
    corpus.validate(&maps)?;
    Ok((maps, corpus))
}

fn plan(maps: &MapSet) -> FoldPlan {
    FoldPlan::leave_one_out(&maps.ids(), VALIDATION_FRACTION)
}

fn fold_of(plan: &FoldPlan, fold: usize) -> Result<&urbanav_core::evaluator::Fold> {
    plan.folds
        .iter()
        .find(|f| f.index == fold)
        .with_context(|| format!("--fold {fold}: there are {} folds", plan.folds.len()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn report_config(ctx: &Ctx, corpus: &Corpus, extra: Vec<(String, String)>) -> BTreeMap<String, String> {
    let mut m: BTreeMap<String, String> = ctx
        .config
        .keys()
        .map(|k| (k.to_string(), ctx.config.raw(k).unwrap().to_string()))
        .collect();
    m.insert("seed".into(), ctx.seed.to_string());
    m.insert("paragraphs".into(), corpus.paragraphs.len().to_string());
    m.insert("instructions".into(), corpus.n_instructions().to_string());
    m.insert("validation_fraction".into(), VALIDATION_FRACTION.to_string());
    m.extend(extra);
    m
}

fn save_report(report: &Report, out: &Path, csv: Option<&Path>) -> Result<()> {
    write(out, &report.to_json()?)?;
    if let Some(csv) = csv {
        write(csv, &report.to_csv()?)?;
    }
    Ok(())
}

fn print_summary(report: &Report) {
    for s in &report.summary {
        println!(
            "{:<8} {:<8} sentence {:6.2} (±{:.2})  paragraph {:6.2} (±{:.2})",
            s.policy, s.variant, s.sent_mean, s.sent_std_seeds, s.para_mean, s.para_std_seeds
        );
    }
}

fn factory_for(policy: &str, ctx: &Ctx) -> Result<Box<dyn PolicyFactory>> {
    if let Ok(kind) = policy.parse::<BaselineKind>() {
        return Ok(Box::new(BaselineFactory(kind)));
    }
    match policy.parse::<Variant>() {
        Ok(v) => Ok(Box::new(NeuralFactory::new(ctx.model_config(Some(v))?))),
        Err(_) => bail!("--policy {policy:?}: expected no-move, random, jump, cga, cgae or cgaew"),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Synth { out, preset } => {
            let spec = ctx.synth_spec(preset)?;
            let (maps, corpus) = generate(&spec)?;
            fs::create_dir_all(out.join("maps"))?;
            for m in maps.iter() {
                write(&out.join("maps").join(format!("{}.map", m.id)), &write_map(m))?;
            }
            save_corpus(&corpus, out.join("corpus.txt"))?;
            println!(
                "wrote {} maps, {} paragraphs, {} instructions to {}",
                maps.len(),
                corpus.paragraphs.len(),
                corpus.n_instructions(),
                out.display()
            );
        }
        Command::Stats(d) => {
            let (maps, corpus) = load_data(&d.data)?;
            print!("{}", stats(&corpus, &maps));
        }
        Command::Simulate { map, start, actions } => {
            let map = load_map(&map)?;
            let p0: Pose = start.parse().map_err(anyhow::Error::msg).context("--start")?;
            let actions = parse_actions(&actions)
                .map_err(anyhow::Error::msg)
                .context("--actions")?;
            match execute(&map, &p0, &actions) {
                Ok(route) => {
                    println!("{}", format_tiles(&route.tiles));
                    println!("final {}", route.final_pose);
                }
                Err(f) => {
                    eprintln!("execution failed: {}", f.error);
                    println!("{}", format_tiles(&f.partial.tiles));
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Abstract { map, text } => {
            let map = load_map(&map)?;
            let (_, a) = abstract_text(&text, &Lexicon::from_map(&map))?;
            println!("{}", a.tokens.join(" "));
            for b in &a.bindings {
                let name = map.feature(b.entity).and_then(|f| f.name()).unwrap_or("");
                println!("{} = {} ({name})", b.variable, b.entity);
            }
        }
        Command::Train {
            data,
            fold,
            variant,
            out,
            log,
        } => {
            let (maps, corpus) = load_data(&data.data)?;
            let plan = plan(&maps);
            let split = plan.split(fold_of(&plan, fold)?, &corpus, ctx.seed);
            let config = ctx.model_config(variant)?;
            let (model, train_log) = train(&config, &split.train, &split.validation, &maps)?;
            checkpoint::save(&model, &out)?;
            if let Some(log) = log {
                write(&log, &train_log.to_csv())?;
            }
            let last = train_log.rows.last();
            println!(
                "trained {} on fold {fold}: {} epochs, best epoch {}, final train nll {:.4}, wrote {}",
                config.variant,
                train_log.rows.len(),
                train_log.best_epoch,
                last.map_or(f64::NAN, |r| r.train_nll),
                out.display()
            );
        }
        Command::Evaluate {
            data,
            model,
            fold,
            policy,
            seeds,
            out,
            csv,
        } => {
            let (maps, corpus) = load_data(&data.data)?;
            let plan = plan(&maps);
            let cfg = SuccessConfig::default();
            let report = if let Some(model) = model {
                let m = checkpoint::load(&model)?;
                let f = fold_of(&plan, fold)?;
                let split = plan.split(f, &corpus, ctx.seed);
                let mut extra = m.config.to_map();
                extra.push(("policy".into(), "neural".into()));
                extra.push(("fold".into(), fold.to_string()));
                let variant = m.config.variant.to_string();
                let counts = evaluate(&NeuralFollower::new(m), &split.test, &maps, &cfg, ctx.seed)?;
                let mut r = Report::new(report_config(&ctx, &corpus, extra));
                r.rows.push(ReportRow {
                    policy: "neural".into(),
                    variant,
                    fold: fold.to_string(),
                    n_sentences: counts.sentences,
                    n_paragraphs: counts.paragraphs,
                    sent_acc: (counts.sent_acc() * 1e4).round() / 1e4,
                    para_acc: (counts.para_acc() * 1e4).round() / 1e4,
                    seed: ctx.seed,
                });
                r
            } else {
                let policy = policy.expect("clap requires --policy without --model");
                let seeds = if seeds.is_empty() { vec![ctx.seed] } else { seeds };
                let factory = factory_for(&policy, &ctx)?;
                let seed_list = seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
                let config = report_config(
                    &ctx,
                    &corpus,
                    vec![("policy".into(), policy.clone()), ("seeds".into(), seed_list)],
                );
                let r = run_protocol(&corpus, &maps, factory.as_ref(), &plan, &cfg, &seeds, config)?;
                print_summary(&r);
                r
            };
            for row in &report.rows {
                println!(
                    "{} {} fold {} seed {}: sentence {:.2} paragraph {:.2}",
                    row.policy, row.variant, row.fold, row.seed, row.sent_acc, row.para_acc
                );
            }
            save_report(&report, &out, csv.as_deref())?;
        }
        Command::Baseline { data, out } => {
            let (maps, corpus) = load_data(&data.data)?;
            let plan = plan(&maps);
            let mut report: Option<Report> = None;
            for kind in BaselineKind::ALL {
                let config = report_config(&ctx, &corpus, vec![("policy".into(), "baselines".into())]);
                let r = run_protocol(
                    &corpus,
                    &maps,
                    &BaselineFactory(kind),
                    &plan,
                    &SuccessConfig::default(),
                    &[ctx.seed],
                    config,
                )?;
                match &mut report {
                    Some(acc) => acc.merge(r),
                    None => report = Some(r),
                }
            }
            let report = report.expect("three baselines ran");
            print_summary(&report);
            if let Some(out) = out {
                save_report(&report, &out, None)?;
            }
        }
        Command::Gradcheck { variant, fault } => {
            let fault = match fault {
                FaultArg::None => None,
                FaultArg::Tanh => Some(Fault::TanhBackward),
                FaultArg::Mul => Some(Fault::MulBackward),
            };
            let r = gradient_check(&ModelConfig::tiny(variant), ctx.seed, fault);
            println!(
                "max relative error {:.3e} at {} over {} parameters ({})",
                r.max_rel_error,
                r.worst,
                r.checked,
                if r.max_rel_error < GRADCHECK_TOLERANCE {
                    "ok"
                } else {
                    "FAILED"
                }
            );
            if r.max_rel_error >= GRADCHECK_TOLERANCE {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
