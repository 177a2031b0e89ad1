use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use layoutforge_core::layout::templates::{self, PHOTO_BAD_COUNT, PHOTO_GOOD_COUNT};
use layoutforge_core::layout::{generate_random_layout, perturb_layout, Layout, LayoutTemplate};
use layoutforge_core::model::{loss_ls, predict_sequence, target_level_r2, train_with, ModelParams, TrainConfig, TrainingExample};
use layoutforge_core::optimizer::{optimize, write_trace_dir, ConstraintSpec, OptimizerConfig, PenaltyConfig};
use layoutforge_core::oracle::{simulate_dataset, Dataset, OracleProfile, UserPopulation};
use layoutforge_core::tasks::{build_photo_editing_sequence, build_recipe_sequence, TaskSequence};
use layoutforge_core::{seed as seeds, Error as CoreError};

use crate::config::FileConfig;
use crate::manifest::RunManifest;
use crate::{Cli, Command, EvalArgs, GenLayoutsArgs, GenSequenceArgs, OptimizeArgs, SequenceArgs, ServeArgs, SimulateArgs, TrainArgs, Ui};

/// An error plus the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

const INPUT: u8 = 2;
const RUNTIME: u8 = 3;

fn input(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: INPUT, error: error.into() }
}

fn runtime(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: RUNTIME, error: error.into() }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::NonFiniteLoss { .. }
            | CoreError::NonFiniteObjective { .. }
            | CoreError::Io(_)
            | CoreError::ShapeMismatch { .. }
            | CoreError::CycleDetected(_)
            | CoreError::NonScalarRoot(_) => RUNTIME,
            _ => INPUT,
        };
        Failure { code, error: e.into() }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Attaches context to a core error without losing its exit code.
trait CoreContext<T> {
    fn context_for(self, what: impl FnOnce() -> String) -> Outcome<T>;
}

impl<T> CoreContext<T> for layoutforge_core::Result<T> {
    fn context_for(self, what: impl FnOnce() -> String) -> Outcome<T> {
        self.map_err(|e| {
            let f = Failure::from(e);
            Failure { code: f.code, error: f.error.context(what()) }
        })
    }
}

fn required<T: Clone>(value: &Option<T>, flag: &str) -> Outcome<T> {
    value.clone().ok_or_else(|| input(anyhow!("missing --{flag} (flag or config)")))
}

fn read_input(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(input)
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Outcome {
    fs::write(dir.join(name), contents).with_context(|| format!("writing {}", dir.join(name).display())).map_err(runtime)
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(runtime)
}

fn pretty(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn finish(manifest: &RunManifest, dir: &Path) -> Outcome {
    manifest.write(dir).with_context(|| format!("writing manifest in {}", dir.display())).map_err(runtime)
}

pub fn run(cli: Cli) -> Outcome {
    let file = FileConfig::load(cli.config.as_deref()).map_err(input)?;
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let resolved = |name: &'static str| move |e: anyhow::Error| input(e.context(format!("resolving settings for {name}")));
    match &cli.command {
        Command::GenLayouts(a) => gen_layouts(seed, &file.resolve("gen-layouts", a).map_err(resolved("gen-layouts"))?),
        Command::GenSequence(a) => gen_sequence(seed, &file.resolve("gen-sequence", a).map_err(resolved("gen-sequence"))?),
        Command::Simulate(a) => simulate(seed, &file.resolve("simulate", a).map_err(resolved("simulate"))?),
        Command::Train(a) => train(seed, &file.resolve("train", a).map_err(resolved("train"))?),
        Command::Eval(a) => eval(seed, &file.resolve("eval", a).map_err(resolved("eval"))?),
        Command::Optimize(a) => optimize_cmd(seed, &file.resolve("optimize", a).map_err(resolved("optimize"))?),
        Command::Serve(a) => serve(seed, &file.resolve("serve", a).map_err(resolved("serve"))?),
    }
}

enum TemplateSource {
    Photo,
    Recipe,
    File(PathBuf),
}

fn gen_layouts(seed: u64, args: &GenLayoutsArgs) -> Outcome {
    let out = required(&args.out, "out")?;
    let name = args.template.clone().unwrap_or_else(|| "photo".into());
    let source = match name.as_str() {
        "photo" => TemplateSource::Photo,
        "recipe" => TemplateSource::Recipe,
        path => TemplateSource::File(PathBuf::from(path)),
    };
    let (template, goods, bads): (LayoutTemplate, Vec<Layout>, Vec<Layout>) = match &source {
        TemplateSource::Photo => (
            templates::photo_editing_template(),
            (0..PHOTO_GOOD_COUNT).map(templates::photo_good).collect(),
            (0..PHOTO_BAD_COUNT).map(templates::photo_bad).collect(),
        ),
        TemplateSource::Recipe => (templates::recipe_planner_template(), vec![templates::recipe_good()], vec![templates::recipe_bad()]),
        TemplateSource::File(path) => {
            let t: LayoutTemplate =
                serde_json::from_str(&read_input(path)?).with_context(|| format!("parsing template {}", path.display())).map_err(input)?;
            (t, Vec::new(), Vec::new())
        }
    };
    template.validate().context_for(|| format!("template `{name}`"))?;
    let n_good = args.good_perturbed.unwrap_or(50);
    let n_random = args.random.unwrap_or(50);
    let hand_built = args.hand_built.unwrap_or(false);
    if n_good > 0 && goods.is_empty() {
        return Err(input(anyhow!("template `{name}` has no bundled good layouts to perturb")));
    }

    let resolved = GenLayoutsArgs {
        template: Some(name),
        good_perturbed: Some(n_good),
        random: Some(n_random),
        hand_built: Some(hand_built),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("gen-layouts", &resolved, seed);
    if let TemplateSource::File(p) = &source {
        manifest.input(p);
    }
    create_dir(&out)?;
    let mut write_layout = |file: String, layout: &Layout| -> Outcome {
        write_output(&out, &file, &layout.to_json())?;
        manifest.output(file);
        Ok(())
    };
    if hand_built {
        for (i, l) in goods.iter().enumerate() {
            write_layout(format!("good_{i:03}.json"), l)?;
        }
        for (i, l) in bads.iter().enumerate() {
            write_layout(format!("bad_{i:03}.json"), l)?;
        }
    }
    for i in 0..n_good {
        let s = seeds::derive(seed, "perturbed", i as u64);
        write_layout(format!("perturbed_{i:03}.json"), &perturb_layout(&goods[i % goods.len()], s))?;
    }
    for i in 0..n_random {
        let layout = random_layout(&template, seeds::derive(seed, "random", i as u64)).context_for(|| format!("random layout {i}"))?;
        write_layout(format!("random_{i:03}.json"), &layout)?;
    }
    info!("wrote {} layouts to {}", manifest.outputs.len(), out.display());
    manifest.output("manifest.json");
    finish(&manifest, &out)
}

/// Redraws from derived seeds when a crowded draw cannot be placed; a template
/// that fails every redraw is reported as too dense.
const LAYOUT_REDRAWS: u64 = 20;

fn random_layout(template: &LayoutTemplate, seed: u64) -> Result<Layout, CoreError> {
    let mut last = None;
    for redraw in 0..=LAYOUT_REDRAWS {
        let s = if redraw == 0 { seed } else { seeds::derive(seed, "redraw", redraw) };
        match generate_random_layout(template, s) {
            Ok(layout) => return Ok(layout),
            Err(e @ CoreError::PlacementFailure { .. }) => {
                warn!("placement failed for seed {s} ({e}); redrawing");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one draw"))
}

impl SequenceArgs {
    /// Loads or builds the sequence and reports the resolved settings.
    fn load(&self, seed: u64) -> Outcome<(TaskSequence, SequenceArgs)> {
        let (seq, resolved) = match &self.sequence {
            Some(path) => {
                let seq = TaskSequence::from_json(&read_input(path)?).context_for(|| format!("parsing sequence {}", path.display()))?;
                (seq, SequenceArgs { sequence: Some(path.clone()), ui: None, n_photos: None, truncate: self.truncate })
            }
            None => {
                let ui = self.ui.unwrap_or(Ui::Photo);
                match ui {
                    Ui::Photo => {
                        let n = self.n_photos.unwrap_or(20);
                        if n == 0 {
                            return Err(input(anyhow!("--n-photos must be at least 1")));
                        }
                        (
                            build_photo_editing_sequence(n, seed),
                            SequenceArgs { sequence: None, ui: Some(ui), n_photos: Some(n), truncate: self.truncate },
                        )
                    }
                    Ui::Recipe => {
                        (build_recipe_sequence(seed), SequenceArgs { sequence: None, ui: Some(ui), n_photos: None, truncate: self.truncate })
                    }
                }
            }
        };
        let seq = match self.truncate {
            Some(0) => return Err(input(anyhow!("--truncate must be at least 1"))),
            Some(n) => seq.truncated(n),
            None => seq,
        };
        Ok((seq, resolved))
    }
}

fn gen_sequence(seed: u64, args: &GenSequenceArgs) -> Outcome {
    let out = required(&args.out, "out")?;
    let (seq, resolved) = args.sequence.load(seed)?;
    let mut manifest = RunManifest::new("gen-sequence", GenSequenceArgs { sequence: resolved, out: Some(out.clone()) }, seed);
    if let Some(p) = &args.sequence.sequence {
        manifest.input(p);
    }
    create_dir(&out)?;
    write_output(&out, "sequence.json", &seq.to_json())?;
    manifest.output("sequence.json");
    manifest.output("manifest.json");
    info!("{} tasks, {} steps", seq.tasks.len(), seq.n_steps());
    finish(&manifest, &out)
}

/// Layout files of a directory in name order, ids taken from file stems.
fn read_layout_dir(dir: &Path) -> Outcome<Vec<(String, Layout)>> {
    if !dir.is_dir() {
        return Err(input(anyhow!("layout directory {} does not exist", dir.display())));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))
        .map_err(input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_name().is_some_and(|n| n != "manifest.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input(anyhow!("no layout files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().expect("json files have stems").to_string_lossy().into_owned();
            let layout = Layout::from_json(&read_input(p)?).context_for(|| format!("parsing layout {}", p.display()))?;
            Ok((id, layout))
        })
        .collect()
}

fn simulate(seed: u64, args: &SimulateArgs) -> Outcome {
    let out = required(&args.out, "out")?;
    let dir = required(&args.layouts, "layouts")?;
    let users = args.users.unwrap_or(4);
    if users < 3 {
        return Err(input(anyhow!("--users must be at least 3, got {users}")));
    }
    let layouts = read_layout_dir(&dir)?;
    let (seq, resolved_seq) = args.sequence.load(seed)?;
    let resolved = SimulateArgs { layouts: Some(dir.clone()), sequence: resolved_seq, users: Some(users), out: Some(out.clone()) };
    let mut manifest = RunManifest::new("simulate", &resolved, seed);
    manifest.input(&dir);
    if let Some(p) = &args.sequence.sequence {
        manifest.input(p);
    }
    let profile = OracleProfile::default();
    let population = UserPopulation::default();
    let dataset = simulate_dataset(&layouts, &seq, users, seed, &profile, &population).context_for(|| "simulating users".into())?;
    create_dir(&out)?;
    write_output(&out, "dataset.jsonl", &dataset.to_jsonl())?;
    write_output(&out, "dataset.json", &dataset.to_json())?;
    manifest.output("dataset.jsonl");
    manifest.output("dataset.json");
    manifest.output("manifest.json");
    info!("simulated {} layouts x {} tasks x {users} users", layouts.len(), seq.tasks.len());
    finish(&manifest, &out)
}

fn load_dataset(path: &Path) -> Outcome<(PathBuf, Dataset)> {
    let file = if path.is_dir() { path.join("dataset.json") } else { path.to_path_buf() };
    let ds = Dataset::from_json(&read_input(&file)?).context_for(|| format!("parsing dataset {}", file.display()))?;
    if ds.layouts.is_empty() {
        return Err(input(anyhow!("dataset {} has no layouts", file.display())));
    }
    Ok((file, ds))
}

fn load_model(path: &Path) -> Outcome<ModelParams<f64>> {
    if !path.is_file() {
        return Err(input(anyhow!("model file {} does not exist", path.display())));
    }
    ModelParams::load(path).context_for(|| format!("loading model {}", path.display()))
}

/// Fit quality of a model on a set of examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_layouts: usize,
    /// Mean per-layout sequence loss.
    pub loss_ls: f64,
    pub target_level_r2: Option<f64>,
    pub layouts: Vec<LayoutFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutFit {
    pub id: String,
    pub predicted_total: f64,
    pub observed_total: f64,
}

fn fit_report(params: &ModelParams<f64>, examples: &[&TrainingExample]) -> Outcome<FitReport> {
    let (mut pred, mut obs, mut tasks, mut layouts) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut loss = 0.0;
    for ex in examples {
        let p = predict_sequence(&ex.layout, &ex.sequence, params).context_for(|| format!("predicting layout {}", ex.id))?;
        loss += loss_ls(&p.per_task, &ex.observed).context_for(|| format!("scoring layout {}", ex.id))?;
        layouts.push(LayoutFit { id: ex.id.clone(), predicted_total: p.total, observed_total: ex.observed.iter().sum() });
        pred.extend(p.per_task);
        obs.extend(ex.observed.iter().copied());
        tasks.extend(ex.sequence.tasks.iter().cloned());
    }
    let r2 = target_level_r2(&pred, &obs, &tasks).ok();
    Ok(FitReport { n_layouts: examples.len(), loss_ls: loss / examples.len().max(1) as f64, target_level_r2: r2, layouts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    /// Epoch whose parameters were saved; 0 means the initial weights.
    pub best_epoch: usize,
    pub final_train_loss: Option<f64>,
    pub best_validation_loss: Option<f64>,
    pub train: FitReport,
    pub validation: Option<FitReport>,
    pub history: Vec<layoutforge_core::model::EpochReport>,
}

fn train(seed: u64, args: &TrainArgs) -> Outcome {
    let out = required(&args.out, "out")?;
    let dataset_arg = required(&args.dataset, "dataset")?;
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        clip_norm: args.clip_norm.unwrap_or(defaults.clip_norm),
        epochs: args.epochs.unwrap_or(defaults.epochs),
        seed,
        validation_fraction: args.validation_fraction.unwrap_or(defaults.validation_fraction),
        ..defaults
    };
    if !(config.learning_rate >= 0.0 && config.clip_norm > 0.0 && (0.0..1.0).contains(&config.validation_fraction)) {
        return Err(input(anyhow!("need learning_rate >= 0, clip_norm > 0 and 0 <= validation_fraction < 1")));
    }
    let (file, dataset) = load_dataset(&dataset_arg)?;
    let examples = dataset.examples();
    if config.epochs == 0 {
        warn!("--epochs 0: saving the randomly initialized model");
    }
    let report = train_with::<f64>(&examples, &config, None, |e| {
        if e.epoch % 25 == 0 {
            info!("epoch {} train loss {:.4} validation loss {:?}", e.epoch, e.train_loss, e.validation_loss);
        }
    })
    .context_for(|| "training".into())?;

    let pick = |ids: &[String]| examples.iter().filter(|e| ids.contains(&e.id)).collect::<Vec<_>>();
    let train_fit = fit_report(&report.params, &pick(&report.train_ids))?;
    let val = pick(&report.validation_ids);
    let summary = TrainSummary {
        epochs: config.epochs,
        best_epoch: report.best_epoch,
        final_train_loss: report.history.last().map(|e| e.train_loss),
        best_validation_loss: report.best_validation_loss,
        train: train_fit,
        validation: if val.is_empty() { None } else { Some(fit_report(&report.params, &val)?) },
        history: report.history.clone(),
    };
    let resolved = TrainArgs {
        dataset: Some(dataset_arg),
        epochs: Some(config.epochs),
        learning_rate: Some(config.learning_rate),
        clip_norm: Some(config.clip_norm),
        validation_fraction: Some(config.validation_fraction),
        out: Some(out.clone()),
    };
    let mut manifest = RunManifest::new("train", &resolved, seed);
    manifest.input(&file);
    create_dir(&out)?;
    report.params.save(&out.join("model.json")).context_for(|| "saving model".into())?;
    write_output(&out, "report.json", &pretty(&summary))?;
    manifest.output("model.json");
    manifest.output("report.json");
    manifest.output("manifest.json");
    info!(
        "best epoch {}; train R2 {:?}; validation R2 {:?}",
        summary.best_epoch,
        summary.train.target_level_r2,
        summary.validation.as_ref().and_then(|v| v.target_level_r2)
    );
    finish(&manifest, &out)
}

fn eval(seed: u64, args: &EvalArgs) -> Outcome {
    let model_path = required(&args.model, "model")?;
    let dataset_arg = required(&args.dataset, "dataset")?;
    let params = load_model(&model_path)?;
    let (file, dataset) = load_dataset(&dataset_arg)?;
    let examples = dataset.examples();
    let report = fit_report(&params, &examples.iter().collect::<Vec<_>>())?;
    let text = pretty(&report);
    print!("{text}");
    if let Some(out) = &args.out {
        let mut manifest = RunManifest::new("eval", args, seed);
        manifest.input(&model_path);
        manifest.input(&file);
        create_dir(out)?;
        write_output(out, "report.json", &text)?;
        manifest.output("report.json");
        manifest.output("manifest.json");
        finish(&manifest, out)?;
    }
    Ok(())
}

/// Constraint files hold either a bare list or a full penalty config.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConstraintsFile {
    List(Vec<ConstraintSpec>),
    Config(PenaltyConfig),
}

#[derive(Debug, Serialize)]
struct OptimizeSettings<'a> {
    #[serde(flatten)]
    args: &'a OptimizeArgs,
    optimizer: &'a OptimizerConfig,
    penalties: &'a PenaltyConfig,
}

fn optimize_cmd(seed: u64, args: &OptimizeArgs) -> Outcome {
    let out = required(&args.out, "out")?;
    let layout_path = required(&args.layout, "layout")?;
    let model_path = required(&args.model, "model")?;
    let layout = Layout::from_json(&read_input(&layout_path)?).context_for(|| format!("parsing layout {}", layout_path.display()))?;
    let params = load_model(&model_path)?;
    let (seq, resolved_seq) = args.sequence.load(seed)?;
    let penalties = match &args.constraints {
        None => PenaltyConfig::default(),
        Some(p) => match serde_json::from_str(&read_input(p)?).with_context(|| format!("parsing constraints {}", p.display())).map_err(input)? {
            ConstraintsFile::List(constraints) => PenaltyConfig { constraints, ..PenaltyConfig::default() },
            ConstraintsFile::Config(c) => c,
        },
    };
    let defaults = OptimizerConfig::default();
    let config = OptimizerConfig {
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        grad_clip: args.grad_clip.unwrap_or(defaults.grad_clip),
        steps: args.steps.unwrap_or(defaults.steps),
        seed,
        swaps: !args.no_swaps.unwrap_or(false),
        ..defaults
    };
    if !(config.learning_rate >= 0.0 && config.grad_clip > 0.0) {
        return Err(input(anyhow!("need learning_rate >= 0 and grad_clip > 0")));
    }
    let resolved = OptimizeArgs {
        sequence: resolved_seq,
        steps: Some(config.steps),
        learning_rate: Some(config.learning_rate),
        grad_clip: Some(config.grad_clip),
        no_swaps: Some(!config.swaps),
        ..args.clone()
    };
    let mut manifest = RunManifest::new("optimize", OptimizeSettings { args: &resolved, optimizer: &config, penalties: &penalties }, seed);
    manifest.input(&layout_path);
    manifest.input(&model_path);
    for p in args.sequence.sequence.iter().chain(&args.constraints) {
        manifest.input(p);
    }

    let (trace, failure) = match optimize(&layout, &seq, &params, &config, &penalties) {
        Ok(t) => (t, None),
        Err(CoreError::NonFiniteObjective { step, trace }) => {
            (*trace, Some(runtime(anyhow!("objective became non-finite at step {step}; partial trace written"))))
        }
        Err(e) => return Err(Failure::from(e)),
    };
    create_dir(&out)?;
    write_trace_dir(&trace, &out).context_for(|| format!("writing trace to {}", out.display()))?;
    for s in &trace.steps {
        manifest.output(format!("step_{}.css", s.step));
        manifest.output(format!("step_{}.layout.json", s.step));
    }
    manifest.output("summary.json");
    manifest.output("manifest.json");
    finish(&manifest, &out)?;
    if let (Some(first), Some(best)) = (trace.initial(), trace.best()) {
        let change = 100.0 * (first.predicted_total - best.predicted_total) / first.predicted_total;
        info!(
            "best step {} of {}: predicted {:.1} -> {:.1} ({change:+.2}% improvement)",
            trace.best_step,
            trace.steps.len() - 1,
            first.predicted_total,
            best.predicted_total
        );
    }
    failure.map_or(Ok(()), Err)
}

fn serve(seed: u64, args: &ServeArgs) -> Outcome {
    let model_path = required(&args.model, "model")?;
    let params = load_model(&model_path)?;
    let defaults = layoutforge_service::ServiceConfig::default();
    let config = layoutforge_service::ServiceConfig {
        max_concurrent_jobs: args.max_concurrent_jobs.unwrap_or(defaults.max_concurrent_jobs),
        max_queued_jobs: args.max_queued_jobs.unwrap_or(defaults.max_queued_jobs),
        default_steps: args.default_steps.unwrap_or(defaults.default_steps),
        trace_root: args.trace_root.clone().unwrap_or(defaults.trace_root),
        optimizer: OptimizerConfig { seed, ..defaults.optimizer },
    };
    if config.max_concurrent_jobs == 0 {
        return Err(input(anyhow!("--max-concurrent-jobs must be at least 1")));
    }
    let addr = format!("{}:{}", args.host.as_deref().unwrap_or("127.0.0.1"), args.port.unwrap_or(8080));
    let mut manifest = RunManifest::new("serve", (&addr, &config), seed);
    manifest.input(&model_path);
    create_dir(&config.trace_root)?;
    finish(&manifest, &config.trace_root)?;

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    rt.block_on(async move {
        let state = layoutforge_service::AppState::start(params, config);
        layoutforge_service::serve(&addr, state).await
    })
    .with_context(|| "serving".to_string())
    .map_err(runtime)
}
