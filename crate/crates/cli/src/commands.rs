use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use masi_core::{
    build_dictionary, generate_scenario, load_static_objects, load_trajectories, make_dataset, write_static_objects,
    write_trajectories, ClusterConfig, ClusterSample, DatasetOptions, DatasetSplits, Dictionary, Framework,
    SampleData, SamplingConfig, Vec2,
};
use masi_eval::{
    domain_shift_eval, domain_shift_table, emit_reports, evaluate, report_dictionaries, report_table, EvalSettings,
    QtcContext, RunResults,
};
use masi_model::{fit_with, Checkpoint, EpochStats, Model, ModelConfig};
use masi_numerics::gradient_check;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::args::*;
use crate::error::{CliError, Result};

fn log_config(command: &str, config: &impl std::fmt::Debug) {
    eprintln!("masi {command}: effective config {config:#?}");
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", path.display())))
}

fn default_history(f: Framework) -> usize {
    if f.is_symbolic() {
        10
    } else {
        5
    }
}

fn log_epoch(e: &EpochStats) {
    eprintln!("epoch {:>4} train {:.6} val {:.6}", e.epoch, e.train_loss, e.val_loss);
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::BuildDict(a) => build_dict(&a),
        Command::MakeDataset(a) => make_dataset_cmd(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate_cmd(&a),
        Command::DomainShift(a) => domain_shift(&a),
        Command::Gradcheck(a) => gradcheck(&a),
    }
}

fn synth(a: &SynthArgs) -> Result<()> {
    let spec = a.spec();
    log_config("synth", &(a, &spec));
    let set = generate_scenario(&spec)?;
    write_trajectories(&set, &mut create(&a.out)?)?;
    if let Some(path) = &a.objects_out {
        write_static_objects(&set, &mut create(path)?)?;
    }
    eprintln!("wrote {} tracks and {} static objects", set.tracks.len(), set.statics.len());
    Ok(())
}

fn build_dict(a: &BuildDictArgs) -> Result<()> {
    let mut config = SamplingConfig {
        samples: a.samples,
        rate: a.rate,
        tolerances: a.tolerances.tolerances(),
        ..SamplingConfig::default()
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    log_config("build-dict", &(a, &config));
    let build = build_dictionary(a.variant.into(), &config)?;
    let r = &build.report;
    eprintln!("{} dictionary: {} entries, stable: {}", r.variant, build.dictionary.len(), r.stable);
    if let Some(dev) = &r.deviation {
        let text = dev.to_text();
        match &a.deviation_report {
            Some(path) => {
                std::fs::write(path, &text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?
            }
            None => eprint!("{text}"),
        }
    }
    build.dictionary.save(&a.out)?;
    Ok(())
}

fn make_dataset_cmd(a: &MakeDatasetArgs) -> Result<()> {
    let framework: Framework = a.variant.into();
    let config = ClusterConfig {
        radius: a.radius,
        t_history: a.history.unwrap_or(default_history(framework)),
        t_future: a.horizon,
        stride: a.stride,
    };
    let options = DatasetOptions {
        tolerances: a.tolerances.tolerances(),
        n_star: a.n_star,
        split_seed: a.split_seed,
    };
    log_config("make-dataset", &(a, &config, &options));
    let dict = match (&a.dict, framework.is_symbolic()) {
        (Some(p), _) => Some(Dictionary::load(p)?),
        (None, true) => return Err(CliError::Usage(format!("{} needs --dict", framework.name()))),
        (None, false) => None,
    };
    let mut set = load_trajectories(&a.trajectories)?;
    if let Some(p) = &a.objects {
        set = load_static_objects(p, set)?;
    }
    let splits = make_dataset(&set, framework, &config, dict.as_ref().filter(|_| framework.is_symbolic()), &options)?;
    eprintln!(
        "{} samples: train {}, validation {}, test {}; n* = {}",
        splits.len(),
        splits.train.len(),
        splits.validation.len(),
        splits.test.len(),
        splits.n_star
    );
    splits.save(&a.out)?;
    Ok(())
}

fn model_config(ds: &DatasetSplits, t: &TrainArgs) -> Result<ModelConfig> {
    let mut c = ModelConfig::for_dataset(ds);
    if let Some(h) = t.history {
        if h > ds.config.t_history {
            return Err(CliError::Usage(format!(
                "history {h} exceeds the dataset's {}",
                ds.config.t_history
            )));
        }
        c.t_history = h;
    }
    c.hidden = t.hidden;
    c.embed_dim = t.embed_dim;
    c.batch = t.batch.unwrap_or(c.batch);
    c.lr = t.lr;
    c.epochs = t.epochs.unwrap_or(c.epochs);
    c.seed = t.seed;
    c.clip_norm = if t.no_clip { f64::MAX } else { t.clip_norm };
    c.validate()?;
    Ok(c)
}

fn load_dataset(path: &Path, variant: FrameworkArg) -> Result<DatasetSplits> {
    let ds = DatasetSplits::load(path)?;
    let want: Framework = variant.into();
    if ds.framework != want {
        return Err(CliError::Usage(format!(
            "incompatible inputs: --variant {} but {} holds a {} dataset",
            want.name(),
            path.display(),
            ds.framework.name()
        )));
    }
    Ok(ds)
}

fn train(a: &TrainCommand) -> Result<()> {
    let ds = load_dataset(&a.dataset, a.variant)?;
    if let Some(h) = a.horizon.filter(|&h| h != ds.config.t_future) {
        return Err(CliError::Usage(format!(
            "incompatible inputs: --horizon {h} but the dataset forecasts {} steps",
            ds.config.t_future
        )));
    }
    let config = model_config(&ds, &a.train)?;
    log_config("train", &(a, &config));
    let (model, history) = fit_with(&ds, &config, log_epoch)?;
    Checkpoint {
        model,
        dictionary_digest: ds.dictionary_digest,
    }
    .save(&a.out)?;
    if let Some(dir) = &a.report_dir {
        let results = RunResults {
            histories: vec![(config.framework.name().to_string(), history)],
            ..RunResults::default()
        };
        emit_reports(&results, dir)?;
    }
    Ok(())
}

fn load_dicts(paths: &[std::path::PathBuf]) -> Result<Vec<Dictionary>> {
    paths.iter().map(|p| Dictionary::load(p).map_err(CliError::from)).collect()
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let mut ds = DatasetSplits::load(&a.dataset)?;
    ckpt.ensure_compatible(ds.framework, ds.dictionary_digest)?;
    let model = &ckpt.model;
    let n_star = model.config().n_star;
    if ds.n_star > n_star {
        return Err(CliError::Usage(format!(
            "incompatible inputs: dataset has {} slots, the checkpoint {n_star}",
            ds.n_star
        )));
    }
    ds.pad_to(n_star)?;
    let settings = EvalSettings {
        batch: a.batch.unwrap_or(model.config().batch),
        threads: a.threads,
    };
    log_config("evaluate", &(a, model.config(), &settings));
    let samples: Vec<ClusterSample> = match a.split {
        Split::Train => ds.train.clone(),
        Split::Validation => ds.validation.clone(),
        Split::Test => ds.test.clone(),
        Split::All => ds.all_samples().cloned().collect(),
    };
    let dicts = report_dictionaries(&ds, &load_dicts(&a.dict)?);
    let (reports, attention) = evaluate(model, &samples, &dicts, &QtcContext::of(&ds), &settings)?;
    print!("{}", report_table(&reports));
    if let Some(dir) = &a.out_dir {
        let results = RunResults {
            reports,
            attention: vec![(model.config().framework.name().to_string(), attention)],
            ..RunResults::default()
        };
        emit_reports(&results, dir)?;
    }
    Ok(())
}

fn domain_shift(a: &DomainShiftArgs) -> Result<()> {
    let source = load_dataset(&a.source, a.variant)?;
    let target = load_dataset(&a.target, a.variant)?;
    let config = model_config(&source, &a.train)?;
    let settings = EvalSettings {
        batch: config.batch,
        threads: a.threads,
    };
    log_config("domain-shift", &(a, &config, &settings));
    let dicts = report_dictionaries(&source, &load_dicts(&a.dict)?);
    let (model, history, reports) = domain_shift_eval(&source, &target, &config, &dicts, &settings, &mut log_epoch)?;
    print!("{}", domain_shift_table(&reports));
    let name = config.framework.name().to_string();
    emit_reports(
        &RunResults {
            domain_shift: reports,
            histories: vec![(name, history)],
            ..RunResults::default()
        },
        &a.out_dir,
    )?;
    if let Some(path) = &a.checkpoint_out {
        Checkpoint {
            model,
            dictionary_digest: source.dictionary_digest,
        }
        .save(path)?;
    }
    Ok(())
}

/// Random samples whose last slot is padding.
fn random_batch(config: &ModelConfig, count: usize, rng: &mut ChaCha8Rng) -> Vec<ClusterSample> {
    let (slots, th, tf) = (config.n_star, config.t_history, config.t_future);
    let steps = th + tf;
    (0..count)
        .map(|i| {
            let present: Vec<bool> = (0..slots * steps).map(|j| j / steps + 1 < slots).collect();
            let data = if config.framework.is_symbolic() {
                let imp = config.dict_size - 1;
                SampleData::Symbolic(present.iter().map(|&p| if p { rng.gen_range(0..imp) } else { imp }).collect())
            } else {
                let walk = |rng: &mut ChaCha8Rng| {
                    let start = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let v = Vec2::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                    (0..steps).map(move |t| start + v * t as f64).collect::<Vec<_>>()
                };
                let center = walk(rng);
                let mut coords = Vec::with_capacity(slots * steps);
                for k in 0..slots {
                    let w = walk(rng);
                    coords.extend((0..steps).map(|t| if present[k * steps + t] { w[t] } else { Vec2::ZERO }));
                }
                SampleData::Metric {
                    origin: Vec2::ZERO,
                    center,
                    coords,
                }
            };
            ClusterSample {
                center: format!("c{i}"),
                window_start: i as i64,
                members: (0..slots - 1).map(|k| format!("m{k}")).collect(),
                slots,
                t_history: th,
                t_future: tf,
                mask: present.clone(),
                present,
                data,
            }
        })
        .collect()
}

fn gradcheck(a: &GradcheckArgs) -> Result<()> {
    let framework: Framework = a.variant.into();
    let dict_size = match framework {
        Framework::Qtc4 => a.dict_size.unwrap_or(82),
        Framework::Qtc6 => a.dict_size.unwrap_or(640),
        Framework::Ts => 0,
    };
    if a.n_star < 2 {
        return Err(CliError::Usage("gradcheck needs --n-star of at least 2 (one slot is padding)".into()));
    }
    let mut config = ModelConfig::defaults(framework, a.n_star, dict_size, a.horizon);
    config.t_history = a.history;
    config.hidden = a.hidden;
    config.embed_dim = a.embed_dim;
    config.batch = a.batch;
    config.seed = a.seed;
    log_config("gradcheck", &(a, &config));
    let model = Model::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = random_batch(&config, a.batch, &mut rng);
    let batch: Vec<&ClusterSample> = samples.iter().collect();
    let (_, grads) = model.loss_and_gradients(&batch)?;
    let mut failure = None;
    let report = gradient_check(
        model.params(),
        &grads,
        |p| {
            let m = Model::from_params(config.clone(), p.clone()).expect("perturbed parameters keep their layout");
            m.loss(&batch).map_err(|e| match e {
                masi_model::ModelError::Numerics(n) => n,
                other => {
                    failure = Some(other.to_string());
                    masi_numerics::NumericsError::NonFinite { op: "loss" }
                }
            })
        },
        a.step,
        a.tolerance,
    )?;
    if let Some(f) = failure {
        return Err(CliError::Usage(f));
    }
    println!("{:<28} {:>8} {:>12} {:>12} status", "block", "entries", "max_abs_err", "max_rel_err");
    for b in &report.blocks {
        println!(
            "{:<28} {:>8} {:>12.3e} {:>12.3e} {}",
            b.name,
            b.entries,
            b.max_abs_err,
            b.max_rel_err,
            if b.passed { "ok" } else { "FAIL" }
        );
    }
    if report.passed() {
        Ok(())
    } else {
        let n = report.failures().count();
        Err(CliError::Numeric(format!("{n} parameter blocks exceed relative error {}", a.tolerance)))
    }
}
