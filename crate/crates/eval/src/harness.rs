use masi_core::{ClusterSample, DatasetSplits, Dictionary, Framework};
use masi_model::{fit_samples, Attention, EpochStats, History, Model, ModelConfig, Prediction};
use rayon::prelude::*;

use crate::error::{EvalError, Result};
use crate::extract::QtcContext;
use crate::score::{score, EvalReport, ReportFramework};

/// Evaluation batching and parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalSettings {
    /// Samples per normalization batch.
    pub batch: usize,
    /// Worker threads for inference; 1 runs inline.
    pub threads: usize,
}

impl EvalSettings {
    pub fn for_model(model: &Model) -> Self {
        EvalSettings {
            batch: model.config().batch,
            threads: 1,
        }
    }
}

/// Forecasts and attention weights for every sample, in sample order.
pub fn predict_all(model: &Model, samples: &[ClusterSample], settings: &EvalSettings) -> Result<Vec<(Prediction, Attention)>> {
    if settings.batch == 0 || settings.threads == 0 {
        return Err(EvalError::usage("batch and thread counts must be positive"));
    }
    let chunks: Vec<Vec<&ClusterSample>> = samples.chunks(settings.batch).map(|c| c.iter().collect()).collect();
    let run = |batch: &Vec<&ClusterSample>| model.predict_with_attention(batch);
    let per_batch: Vec<_> = if settings.threads == 1 {
        chunks.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.threads)
            .build()
            .map_err(|e| EvalError::usage(format!("cannot start {} threads: {e}", settings.threads)))?;
        pool.install(|| chunks.par_iter().map(run).collect())
    };
    let mut out = Vec::with_capacity(samples.len());
    for r in per_batch {
        out.extend(r?);
    }
    Ok(out)
}

fn dictionary_for(dicts: &[Dictionary], framework: ReportFramework) -> Result<&Dictionary> {
    dicts
        .iter()
        .find(|d| d.variant() == framework.variant())
        .ok_or_else(|| EvalError::usage(format!("{framework} needs a {} dictionary", framework.variant())))
}

/// Reports of `model` on `samples` for every reportable framework whose
/// dictionary is supplied.
pub fn evaluate(
    model: &Model,
    samples: &[ClusterSample],
    dicts: &[Dictionary],
    ctx: &QtcContext,
    settings: &EvalSettings,
) -> Result<(Vec<EvalReport>, Vec<Attention>)> {
    if samples.is_empty() {
        return Err(EvalError::usage("evaluation split is empty"));
    }
    let frameworks: Vec<ReportFramework> = ReportFramework::of(model.config().framework)
        .into_iter()
        .filter(|f| f.framework().is_symbolic() || dicts.iter().any(|d| d.variant() == f.variant()))
        .collect();
    let dicts_needed: Vec<&Dictionary> = frameworks.iter().map(|&f| dictionary_for(dicts, f)).collect::<Result<_>>()?;
    let (predictions, attention): (Vec<_>, Vec<_>) = predict_all(model, samples, settings)?.into_iter().unzip();
    let reports = frameworks
        .iter()
        .zip(dicts_needed)
        .map(|(&f, d)| score(f, &predictions, samples, d, ctx, settings.batch))
        .collect::<Result<_>>()?;
    Ok((reports, attention))
}

/// Reports of one framework on the source family's test split and on all of
/// the target family.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainShiftReport {
    pub framework: ReportFramework,
    pub source: EvalReport,
    pub target: EvalReport,
}

/// Trains on `a` and evaluates the frozen model on `a`'s test split and on
/// every sample of `b`. Both datasets are padded to the larger slot count.
pub fn domain_shift_eval(
    a: &DatasetSplits,
    b: &DatasetSplits,
    config: &ModelConfig,
    dicts: &[Dictionary],
    settings: &EvalSettings,
    on_epoch: &mut dyn FnMut(&EpochStats),
) -> Result<(Model, History, Vec<DomainShiftReport>)> {
    if a.framework != b.framework || config.framework != a.framework {
        return Err(EvalError::Compatibility(format!(
            "frameworks differ: source {}, target {}, model {}",
            a.framework.name(),
            b.framework.name(),
            config.framework.name()
        )));
    }
    if a.dictionary_digest != b.dictionary_digest {
        return Err(EvalError::Compatibility(format!(
            "dictionary digests differ: {:016x} vs {:016x}",
            a.dictionary_digest, b.dictionary_digest
        )));
    }
    let (ca, cb) = (QtcContext::of(a), QtcContext::of(b));
    if ca != cb || a.config.t_history != b.config.t_history || a.config.t_future != b.config.t_future {
        return Err(EvalError::Compatibility("source and target differ in window or QTC settings".into()));
    }
    let n_star = a.n_star.max(b.n_star);
    let mut a = a.clone();
    let mut b = b.clone();
    a.pad_to(n_star)?;
    b.pad_to(n_star)?;
    let mut config = config.clone();
    config.n_star = n_star;

    let mut dicts = dicts.to_vec();
    if let Some(d) = &a.dictionary {
        dicts.retain(|x| x.variant() != d.variant());
        dicts.push(d.clone());
    }
    let (model, history) = fit_samples(&a.train, &a.validation, &config, on_epoch)?;
    let (source, _) = evaluate(&model, &a.test, &dicts, &ca, settings)?;
    let target_samples: Vec<ClusterSample> = b.all_samples().cloned().collect();
    let (target, _) = evaluate(&model, &target_samples, &dicts, &cb, settings)?;
    let reports = source
        .into_iter()
        .zip(target)
        .map(|(source, target)| DomainShiftReport {
            framework: source.framework,
            source,
            target,
        })
        .collect();
    Ok((model, history, reports))
}

/// Dictionaries needed to report a framework: its own for symbolic
/// datasets, the supplied ones otherwise.
pub fn report_dictionaries(splits: &DatasetSplits, extra: &[Dictionary]) -> Vec<Dictionary> {
    match (&splits.dictionary, splits.framework) {
        (Some(d), f) if f != Framework::Ts => vec![d.clone()],
        _ => extra.to_vec(),
    }
}
