//! Train/test scenarios over real and augmented repetitions.
//!
//! Every fold estimates augmentation distributions from its own training
//! side, generates augmented sets from sources on the side they will be used
//! on, and passes the provenance audit before any training starts.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use kinaug_core::augmentation::{derive_seed, estimate_distributions, DistributionSet};
use kinaug_core::classifier::{
    evaluate, finetune, init_model, load_checkpoint, save_checkpoint, train, write_history_csv,
    Evaluation, Example, FinetuneConfig, ModelState, TrainConfig,
};
use kinaug_core::datasets::{
    audit_leakage, build_input_matrix, class_counts, load_dataset, loso_split, oversample_indices,
    reorder_segments, stratified_kfold, Repetition, RepetitionSource, Side, SplitKind, SplitPlan,
};
use kinaug_core::labeling::{ConfusionMatrix, Label, RuleSet, NUM_CLASSES};
use kinaug_core::skeleton::SkeletalModel;
use kinaug_core::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{read_json, write_json, CliError, CliResult};
use crate::resolve;

mod config;
mod select;

pub use config::{AugmentedSizes, ExperimentConfig, FinetuneCounts, Scenario};
pub use select::{even_quotas, generate_quota, select_from_pool, QuotaSummary};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetCounts {
    pub train_real: usize,
    pub train_augmented: usize,
    pub validation_real: usize,
    pub validation_augmented: usize,
    pub test_real: usize,
    pub test_augmented: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationSummary {
    pub train: Option<QuotaSummary>,
    pub validation: Option<QuotaSummary>,
    pub test: Option<QuotaSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneFold {
    pub recorded_class: Label,
    /// Held-out subject repetitions used for tuning.
    pub subject_repetitions: Vec<String>,
    /// Real repetitions of the training subjects added to the tuning set.
    pub real_repetitions: Vec<String>,
    pub augmented: Option<QuotaSummary>,
    pub tune_size: usize,
    pub test_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub split: SplitKind,
    pub seed: u64,
    /// Whether minority classes of the real sets were duplicated.
    pub oversampled: bool,
    pub counts: SetCounts,
    pub augmentation: AugmentationSummary,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub evaluation: Evaluation,
    /// Fine-tuning scenarios: the starting model on the same test set.
    pub baseline: Option<Evaluation>,
    pub finetune: Option<FinetuneFold>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub folds: usize,
    pub macro_f1_mean: f64,
    /// Population standard deviation over folds.
    pub macro_f1_std: f64,
    pub per_class_f1_mean: Vec<f64>,
    /// Sum of the per-fold confusion matrices.
    pub confusion: ConfusionMatrix,
    pub baseline_macro_f1_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Echo of the run configuration without the output directory.
    pub config: ExperimentConfig,
    pub folds: Vec<FoldReport>,
    pub aggregate: AggregateReport,
}

/// Wall-clock timings, kept out of the report so reports compare bytewise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub total_seconds: f64,
    pub folds: Vec<(String, f64)>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn aggregate(folds: &[FoldReport]) -> AggregateReport {
    let f1: Vec<f64> = folds.iter().map(|f| f.evaluation.macro_f1).collect();
    let m = mean(&f1);
    let var = mean(&f1.iter().map(|v| (v - m).powi(2)).collect::<Vec<_>>());
    let mut confusion = ConfusionMatrix::new(NUM_CLASSES);
    for f in folds {
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                for _ in 0..f.evaluation.confusion.get(t, p) {
                    confusion.add(t, p);
                }
            }
        }
    }
    let baselines: Option<Vec<f64>> = folds
        .iter()
        .map(|f| f.baseline.as_ref().map(|b| b.macro_f1))
        .collect();
    AggregateReport {
        folds: folds.len(),
        macro_f1_mean: m,
        macro_f1_std: var.sqrt(),
        per_class_f1_mean: (0..NUM_CLASSES)
            .map(|c| {
                mean(
                    &folds
                        .iter()
                        .map(|f| f.evaluation.per_class_f1[c])
                        .collect::<Vec<_>>(),
                )
            })
            .collect(),
        confusion,
        baseline_macro_f1_mean: baselines.filter(|b| !b.is_empty()).map(|b| mean(&b)),
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    real: Vec<Repetition>,
    index: HashMap<String, usize>,
    pool: Option<Vec<Repetition>>,
    model: SkeletalModel,
    ruleset: RuleSet,
    segment_order: Vec<String>,
    out: PathBuf,
}

impl Context<'_> {
    fn rep(&self, id: &str) -> CliResult<&Repetition> {
        self.index.get(id).map(|&i| &self.real[i]).ok_or_else(|| {
            CliError::Core(Error::Leakage {
                ids: vec![id.to_string()],
            })
        })
    }

    fn side(&self, plan: &SplitPlan, side: Side) -> CliResult<Vec<&Repetition>> {
        plan.side(side).iter().map(|id| self.rep(id)).collect()
    }

    fn examples(&self, reps: &[&Repetition]) -> CliResult<Vec<Example>> {
        let order: Vec<&str> = self.segment_order.iter().map(String::as_str).collect();
        reps.iter()
            .map(|r| {
                Ok(build_input_matrix(
                    &reorder_segments(r, &order)?,
                    self.cfg.time_steps,
                )?)
            })
            .collect()
    }

    /// Augmented examples derived from `sources`, from the pool if one was
    /// given, otherwise freshly generated.
    fn augmented(
        &self,
        sources: &[&Repetition],
        dists: &DistributionSet,
        quotas: [usize; NUM_CLASSES],
        seed: u64,
    ) -> CliResult<(Vec<Repetition>, QuotaSummary)> {
        match &self.pool {
            Some(pool) => {
                let ids: std::collections::HashSet<&str> =
                    sources.iter().map(|r| r.id.as_str()).collect();
                let eligible: Vec<&Repetition> = pool
                    .iter()
                    .filter(|r| {
                        r.provenance
                            .as_ref()
                            .is_some_and(|p| ids.contains(p.source_id.as_str()))
                    })
                    .collect();
                let (picked, summary) = select_from_pool(&eligible, quotas, seed);
                Ok((picked.into_iter().cloned().collect(), summary))
            }
            None => Ok(generate_quota(
                sources,
                dists,
                &self.model,
                &self.ruleset,
                quotas,
                self.cfg.max_attempts,
                seed,
            )?),
        }
    }
}

/// Duplicates minority-class members when every class is present.
fn balance<'a>(reps: &[&'a Repetition], seed: u64) -> (Vec<&'a Repetition>, bool) {
    let labels: Vec<Label> = reps.iter().map(|r| r.label).collect();
    let counts = class_counts(labels.iter().copied());
    if counts.contains(&0) {
        return (reps.to_vec(), false);
    }
    let idx = oversample_indices(&labels, seed).expect("all classes present");
    let changed = idx.len() != reps.len();
    (idx.into_iter().map(|i| reps[i]).collect(), changed)
}

fn fold_name(plan: &SplitPlan) -> String {
    match &plan.kind {
        SplitKind::Kfold { fold, .. } => format!("fold-{fold}"),
        SplitKind::Loso { subject } => format!("loso-{subject}"),
        SplitKind::Finetune { subject } => format!("finetune-{subject}"),
    }
}

fn fold_dir(root: &Path, name: &str) -> PathBuf {
    root.join("folds").join(name)
}

fn save_model(model: &ModelState, dir: &Path, stem: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_checkpoint(model, &dir.join(format!("{stem}.ckpt")))?;
    write_history_csv(model, &dir.join(format!("{stem}.history.csv")))?;
    Ok(())
}

struct Trained {
    model: ModelState,
    oversampled: bool,
    counts: SetCounts,
    augmentation: AugmentationSummary,
}

/// Builds the fold's training and validation sets for `scenario` and trains.
fn train_fold(
    ctx: &Context,
    scenario: Scenario,
    plan: &SplitPlan,
    dists: Option<&DistributionSet>,
    seed: u64,
) -> CliResult<Trained> {
    let cfg = ctx.cfg;
    let train_real = ctx.side(plan, Side::Train)?;
    let val_real = ctx.side(plan, Side::Validation)?;
    let mut summary = AugmentationSummary::default();
    let (mut aug_train, mut aug_val) = (Vec::new(), Vec::new());
    if scenario.augments_training() {
        let dists = dists.expect("distributions estimated for augmenting scenarios");
        let (reps, s) = ctx.augmented(
            &train_real,
            dists,
            even_quotas(cfg.sizes.train),
            derive_seed(seed, "augment-train"),
        )?;
        aug_train = reps;
        summary.train = Some(s);
        if cfg.sizes.validation > 0 && !val_real.is_empty() {
            let (reps, s) = ctx.augmented(
                &val_real,
                dists,
                even_quotas(cfg.sizes.validation),
                derive_seed(seed, "augment-validation"),
            )?;
            aug_val = reps;
            summary.validation = Some(s);
        }
    }
    let mut audited: Vec<(Side, &Repetition)> =
        aug_train.iter().map(|r| (Side::Train, r)).collect();
    audited.extend(aug_val.iter().map(|r| (Side::Validation, r)));
    audit_leakage(plan, &ctx.real, &audited)?;

    let (mut train_set, mut val_set) = (Vec::new(), Vec::new());
    let mut oversampled = false;
    if scenario.trains_on_real() {
        let (t, a) = balance(&train_real, derive_seed(seed, "oversample-train"));
        let (v, b) = balance(&val_real, derive_seed(seed, "oversample-validation"));
        oversampled = a || b;
        train_set = t;
        val_set = v;
    }
    let counts = SetCounts {
        train_real: train_set.len(),
        train_augmented: aug_train.len(),
        validation_real: val_set.len(),
        validation_augmented: aug_val.len(),
        ..SetCounts::default()
    };
    train_set.extend(aug_train.iter());
    val_set.extend(aug_val.iter());
    if train_set.is_empty() || val_set.is_empty() {
        return Err(CliError::Core(Error::InsufficientData {
            group: format!("{} training/validation sets", fold_name(plan)),
            count: train_set.len().min(val_set.len()),
            needed: 1,
        }));
    }
    let train_ex = ctx.examples(&train_set)?;
    let val_ex = ctx.examples(&val_set)?;
    let rows = 4 * ctx.segment_order.len();
    let init = init_model(
        &cfg.network,
        rows,
        cfg.time_steps,
        derive_seed(seed, "init"),
    )?;
    let tcfg = TrainConfig {
        seed: derive_seed(seed, "train"),
        ..cfg.training.clone()
    };
    Ok(Trained {
        model: train(&init, &train_ex, &val_ex, &tcfg)?,
        oversampled,
        counts,
        augmentation: summary,
    })
}

fn run_fold(ctx: &Context, plan: &SplitPlan) -> CliResult<(FoldReport, f64)> {
    let start = Instant::now();
    let cfg = ctx.cfg;
    let name = fold_name(plan);
    let seed = derive_seed(cfg.seed, &name);
    let dir = fold_dir(&ctx.out, &name);
    let train_real = ctx.side(plan, Side::Train)?;
    let test_real = ctx.side(plan, Side::Test)?;
    let base = cfg.scenario.baseline();
    let loaded = cfg.scenario.is_finetune() && cfg.baseline.is_some();
    let needs_dists = (!loaded && base.augments_training())
        || cfg.scenario.augments_test()
        || cfg.scenario == Scenario::TratrFt;
    let dists = if needs_dists && ctx.pool.is_none() {
        let owned: Vec<Repetition> = train_real.iter().map(|r| (*r).clone()).collect();
        Some(estimate_distributions(&owned)?)
    } else {
        None
    };
    let dists_or_empty = || {
        dists.clone().unwrap_or(DistributionSet {
            schema_version: 1,
            distributions: Vec::new(),
        })
    };

    let trained = if loaded {
        audit_leakage(plan, &ctx.real, &[])?;
        let path = fold_dir(cfg.baseline.as_deref().expect("checked"), &name).join("model.ckpt");
        let model = load_checkpoint(&path)?;
        if model.input_rows != 4 * ctx.segment_order.len() || model.input_cols != cfg.time_steps {
            return Err(CliError::Usage(format!(
                "baseline checkpoint {} expects {}x{} inputs, experiment builds {}x{}",
                path.display(),
                model.input_rows,
                model.input_cols,
                4 * ctx.segment_order.len(),
                cfg.time_steps
            )));
        }
        Trained {
            model,
            oversampled: false,
            counts: SetCounts::default(),
            augmentation: AugmentationSummary::default(),
        }
    } else {
        let d = dists_or_empty();
        train_fold(ctx, base, plan, Some(&d), seed)?
    };
    let Trained {
        model,
        oversampled,
        mut counts,
        mut augmentation,
    } = trained;

    let report = if cfg.scenario.is_finetune() {
        let d = dists_or_empty();
        let (tuned, baseline_eval, ft) = finetune_fold(ctx, plan, &model, &d, seed)?;
        save_model(&model, &dir, "baseline")?;
        save_model(&tuned, &dir, "model")?;
        counts.test_real = ft.test_size;
        FoldReport {
            name: name.clone(),
            split: plan.kind.clone(),
            seed,
            oversampled,
            counts,
            augmentation,
            epochs_run: model.history.len(),
            best_epoch: model.best_epoch,
            evaluation: {
                let remaining = finetune_test(ctx, plan, &ft)?;
                evaluate(&tuned, &ctx.examples(&remaining)?)?
            },
            baseline: Some(baseline_eval),
            finetune: Some(ft),
        }
    } else {
        let test_set: Vec<Repetition> = if cfg.scenario.augments_test() {
            let d = dists_or_empty();
            let (reps, s) = ctx.augmented(
                &test_real,
                &d,
                even_quotas(cfg.sizes.test),
                derive_seed(seed, "augment-test"),
            )?;
            let audited: Vec<(Side, &Repetition)> = reps.iter().map(|r| (Side::Test, r)).collect();
            audit_leakage(plan, &ctx.real, &audited)?;
            augmentation.test = Some(s);
            counts.test_augmented = reps.len();
            reps
        } else {
            counts.test_real = test_real.len();
            test_real.iter().map(|r| (*r).clone()).collect()
        };
        if test_set.is_empty() {
            return Err(CliError::Core(Error::InsufficientData {
                group: format!("{name} test set"),
                count: 0,
                needed: 1,
            }));
        }
        let refs: Vec<&Repetition> = test_set.iter().collect();
        let evaluation = evaluate(&model, &ctx.examples(&refs)?)?;
        save_model(&model, &dir, "model")?;
        FoldReport {
            name: name.clone(),
            split: plan.kind.clone(),
            seed,
            oversampled,
            counts,
            augmentation,
            epochs_run: model.history.len(),
            best_epoch: model.best_epoch,
            evaluation,
            baseline: None,
            finetune: None,
        }
    };
    Ok((report, start.elapsed().as_secs_f64()))
}

/// Class with the most repetitions; ties go to the higher label.
fn recorded_class(reps: &[&Repetition]) -> Label {
    let counts = class_counts(reps.iter().map(|r| r.label));
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n >= counts[best] {
            best = c;
        }
    }
    Label::from_index(best)
}

fn finetune_test<'a>(
    ctx: &'a Context,
    plan: &SplitPlan,
    ft: &FinetuneFold,
) -> CliResult<Vec<&'a Repetition>> {
    Ok(ctx
        .side(plan, Side::Test)?
        .into_iter()
        .filter(|r| !ft.subject_repetitions.contains(&r.id))
        .collect())
}

fn finetune_fold(
    ctx: &Context,
    plan: &SplitPlan,
    model: &ModelState,
    dists: &DistributionSet,
    seed: u64,
) -> CliResult<(ModelState, Evaluation, FinetuneFold)> {
    let cfg = ctx.cfg;
    let counts = cfg.finetune_counts;
    let subject = plan
        .held_out_subject()
        .ok_or_else(|| CliError::Usage("fine-tuning needs leave-one-subject-out plans".into()))?
        .to_string();
    let held = ctx.side(plan, Side::Test)?;
    let class = recorded_class(&held);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "finetune-select"));
    let mut candidates: Vec<&Repetition> =
        held.iter().copied().filter(|r| r.label == class).collect();
    candidates.shuffle(&mut rng);
    candidates.truncate(counts.subject_real);
    let subject_reps = candidates;
    let remaining: Vec<&Repetition> = held
        .iter()
        .copied()
        .filter(|r| !subject_reps.iter().any(|s| s.id == r.id))
        .collect();
    if remaining.is_empty() {
        return Err(CliError::Core(Error::InsufficientData {
            group: format!("subject {subject} after taking tuning repetitions"),
            count: 0,
            needed: 1,
        }));
    }

    let mut real_extra: Vec<&Repetition> = Vec::new();
    let mut aug: Vec<Repetition> = Vec::new();
    let mut aug_summary = None;
    match cfg.scenario {
        Scenario::TrtrFt => {
            let train_real = ctx.side(plan, Side::Train)?;
            for c in Label::ALL {
                let mut members: Vec<&Repetition> = train_real
                    .iter()
                    .copied()
                    .filter(|r| r.label == c)
                    .collect();
                members.shuffle(&mut rng);
                real_extra.extend(members.into_iter().take(counts.real_per_class));
            }
        }
        Scenario::TratrFt => {
            let mut quotas = [counts.augmented_missing; NUM_CLASSES];
            quotas[class.index()] = counts.augmented_recorded;
            let (reps, s) = ctx.augmented(
                &subject_reps,
                dists,
                quotas,
                derive_seed(seed, "augment-finetune"),
            )?;
            aug = reps;
            aug_summary = Some(s);
        }
        _ => unreachable!("fine-tuning scenario"),
    }
    let val_real = ctx.side(plan, Side::Validation)?;
    let ft_plan = SplitPlan {
        kind: SplitKind::Finetune {
            subject: subject.clone(),
        },
        train: subject_reps
            .iter()
            .chain(&real_extra)
            .map(|r| r.id.clone())
            .collect(),
        validation: plan.validation.clone(),
        test: remaining.iter().map(|r| r.id.clone()).collect(),
        flagged_subjects: Vec::new(),
    };
    let audited: Vec<(Side, &Repetition)> = aug.iter().map(|r| (Side::Train, r)).collect();
    audit_leakage(&ft_plan, &ctx.real, &audited)?;

    let mut tune: Vec<&Repetition> = subject_reps.iter().chain(&real_extra).copied().collect();
    tune.extend(aug.iter());
    let tune_ex = ctx.examples(&tune)?;
    let val_ex = ctx.examples(&val_real)?;
    let test_ex = ctx.examples(&remaining)?;
    let baseline = evaluate(model, &test_ex)?;
    let fcfg = FinetuneConfig {
        seed: derive_seed(seed, "finetune"),
        ..cfg.finetune.clone()
    };
    let tuned = finetune(model, &tune_ex, &val_ex, &fcfg)?;
    Ok((
        tuned,
        baseline,
        FinetuneFold {
            recorded_class: class,
            subject_repetitions: subject_reps.iter().map(|r| r.id.clone()).collect(),
            real_repetitions: real_extra.iter().map(|r| r.id.clone()).collect(),
            augmented: aug_summary,
            tune_size: tune.len(),
            test_size: remaining.len(),
        },
    ))
}

fn build_plans(cfg: &ExperimentConfig, real: &[Repetition]) -> CliResult<Vec<SplitPlan>> {
    let plans: Vec<SplitPlan> = match &cfg.splits {
        Some(path) => read_json(path)?,
        None if cfg.scenario.is_loso() => loso_split(real, derive_seed(cfg.seed, "splits"))?,
        None => stratified_kfold(real, cfg.k, derive_seed(cfg.seed, "splits"))?,
    };
    for p in &plans {
        let ok = match p.kind {
            SplitKind::Kfold { .. } => !cfg.scenario.is_loso(),
            SplitKind::Loso { .. } => cfg.scenario.is_loso(),
            SplitKind::Finetune { .. } => false,
        };
        if !ok {
            return Err(CliError::Usage(format!(
                "split plan {} does not fit scenario {}",
                fold_name(p),
                cfg.scenario
            )));
        }
    }
    if plans.is_empty() {
        return Err(CliError::Usage("no split plans".into()));
    }
    Ok(plans)
}

/// Runs every fold and writes `report.json`, `runtime.json`, `splits.json`
/// and per-fold checkpoints under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> CliResult<ExperimentReport> {
    let start = Instant::now();
    cfg.validate()?;
    let data = load_dataset(&cfg.data)?;
    let model = resolve::model(cfg.model.as_deref(), &data.exercise_id)?;
    let ruleset = resolve::ruleset(cfg.ruleset.as_deref(), &data.exercise_id)?;
    resolve::check_segments(&data, &model)?;
    let segment_order: Vec<String> = data.segment_ids().iter().map(|s| s.to_string()).collect();
    let real: Vec<Repetition> = data
        .repetitions
        .into_iter()
        .filter(|r| r.source == RepetitionSource::Real)
        .collect();
    let pool = match &cfg.augmented {
        Some(p) => Some(load_dataset(p)?.repetitions),
        None => None,
    };
    if cfg.scenario.needs_augmentation() && pool.is_none() && cfg.max_attempts == 0 {
        return Err(CliError::Usage(
            "augmenting scenarios need max_attempts >= 1".into(),
        ));
    }
    let plans = build_plans(cfg, &real)?;
    for p in &plans {
        audit_leakage(p, &real, &[])?;
    }
    let out = resolve::output_dir(cfg.out.as_deref(), "experiment");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_json(&plans, &out.join("splits.json"))?;

    let index = real
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.clone(), i))
        .collect();
    let ctx = Context {
        cfg,
        real,
        index,
        pool,
        model,
        ruleset,
        segment_order,
        out: out.clone(),
    };
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CliResult<(FoldReport, f64)>> =
        threads.install(|| plans.par_iter().map(|p| run_fold(&ctx, p)).collect());
    let mut folds = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let (fold, secs) = r?;
        timings.push((fold.name.clone(), secs));
        folds.push(fold);
    }
    let report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: cfg.scenario,
        config: ExperimentConfig {
            out: None,
            ..cfg.clone()
        },
        aggregate: aggregate(&folds),
        folds,
    };
    write_json(&report, &out.join("report.json"))?;
    write_json(
        &RuntimeReport {
            total_seconds: start.elapsed().as_secs_f64(),
            folds: timings,
        },
        &out.join("runtime.json"),
    )?;
    Ok(report)
}

#[derive(Debug, clap::Args)]
pub struct ExperimentArgs {
    /// Experiment config JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// TRTR, TATR, TRTA, TRTR-LOSO, TRATR-LOSO, TRTR-FT or TRATR-FT.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Pre-generated augmented pool (output of `augment`).
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    /// Split plans JSON to use instead of building them.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Output directory of a LOSO run to fine-tune from.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// `desk` (default) or `full` network and set sizes.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Folds processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn config_from_args(args: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<ExperimentConfig>(p)?,
        None => ExperimentConfig::default(),
    };
    match args.preset.as_deref() {
        None | Some("desk") => {}
        Some("full") => cfg.apply_full_scale(),
        Some(other) => return Err(CliError::Usage(format!("unknown preset {other}"))),
    }
    if let Some(s) = &args.scenario {
        cfg.scenario =
            Scenario::parse(s).ok_or_else(|| CliError::Usage(format!("unknown scenario {s}")))?;
    }
    if let Some(d) = &args.data {
        cfg.data = d.clone();
    }
    if args.augmented.is_some() {
        cfg.augmented = args.augmented.clone();
    }
    if args.splits.is_some() {
        cfg.splits = args.splits.clone();
    }
    if args.baseline.is_some() {
        cfg.baseline = args.baseline.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    Ok(cfg)
}

pub fn run(args: &ExperimentArgs) -> CliResult<()> {
    let cfg = config_from_args(args)?;
    let report = run_experiment(&cfg, args.jobs)?;
    for f in &report.folds {
        match &f.baseline {
            Some(b) => println!(
                "{:<16} macro F1 {:.4} (baseline {:.4})",
                f.name, f.evaluation.macro_f1, b.macro_f1
            ),
            None => println!("{:<16} macro F1 {:.4}", f.name, f.evaluation.macro_f1),
        }
    }
    println!(
        "{}: macro F1 {:.4} +- {:.4} over {} folds",
        report.scenario,
        report.aggregate.macro_f1_mean,
        report.aggregate.macro_f1_std,
        report.aggregate.folds
    );
    Ok(())
}
