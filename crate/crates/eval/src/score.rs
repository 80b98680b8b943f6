//! Normalized conceptual-distance scores and the persistence baseline.

use std::fmt;

use masi_core::{conceptual_distance, ClusterSample, Dictionary, Framework, QtcVariant, SampleData, Vec2};
use masi_model::Prediction;

use crate::error::{EvalError, Result};
use crate::extract::{extract_qtc_from_coords, ground_truth_prediction, QtcContext};

/// A reportable framework: the metric framework is reported once per QTC
/// variant used for post-processing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReportFramework {
    Qtc4,
    Qtc6,
    Ts1,
    Ts2,
}

impl ReportFramework {
    pub const ALL: [ReportFramework; 4] =
        [ReportFramework::Qtc4, ReportFramework::Qtc6, ReportFramework::Ts1, ReportFramework::Ts2];

    pub fn label(self) -> &'static str {
        match self {
            ReportFramework::Qtc4 => "F^QTC-4",
            ReportFramework::Qtc6 => "F^QTC-6",
            ReportFramework::Ts1 => "F^ts,1",
            ReportFramework::Ts2 => "F^ts,2",
        }
    }

    pub fn variant(self) -> QtcVariant {
        match self {
            ReportFramework::Qtc4 | ReportFramework::Ts1 => QtcVariant::C1,
            ReportFramework::Qtc6 | ReportFramework::Ts2 => QtcVariant::C2,
        }
    }

    pub fn framework(self) -> Framework {
        match self {
            ReportFramework::Qtc4 => Framework::Qtc4,
            ReportFramework::Qtc6 => Framework::Qtc6,
            ReportFramework::Ts1 | ReportFramework::Ts2 => Framework::Ts,
        }
    }

    /// Reportable frameworks of a trained framework.
    pub fn of(framework: Framework) -> Vec<ReportFramework> {
        match framework {
            Framework::Qtc4 => vec![ReportFramework::Qtc4],
            Framework::Qtc6 => vec![ReportFramework::Qtc6],
            Framework::Ts => vec![ReportFramework::Ts1, ReportFramework::Ts2],
        }
    }
}

impl fmt::Display for ReportFramework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One row of the comparison matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub framework: ReportFramework,
    pub horizon_s: f64,
    pub radius: f64,
    pub mu: f64,
    pub sigma: f64,
    pub baseline_mu: f64,
    pub n_samples: usize,
}

/// Pairwise conceptual distances between dictionary entries.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    size: usize,
    table: Vec<u32>,
}

impl DistanceTable {
    pub fn new(dict: &Dictionary) -> Result<Self> {
        let n = dict.len();
        let mut table = vec![0; n * n];
        for (i, a) in dict.entries().iter().enumerate() {
            for (j, b) in dict.entries().iter().enumerate().skip(i + 1) {
                let d = conceptual_distance(a, b)?;
                table[i * n + j] = d;
                table[j * n + i] = d;
            }
        }
        Ok(DistanceTable { size: n, table })
    }

    pub fn get(&self, a: usize, b: usize) -> Result<u32> {
        if a >= self.size || b >= self.size {
            return Err(EvalError::usage(format!(
                "index {} out of range for dictionary of {}",
                a.max(b),
                self.size
            )));
        }
        Ok(self.table[a * self.size + b])
    }

    /// Summed distance between two index sequences.
    pub fn total(&self, predicted: &[usize], truth: &[usize]) -> Result<u64> {
        if predicted.len() != truth.len() {
            return Err(EvalError::usage(format!(
                "{} predicted indices for {} labels",
                predicted.len(),
                truth.len()
            )));
        }
        predicted.iter().zip(truth).try_fold(0u64, |acc, (&p, &t)| Ok(acc + u64::from(self.get(p, t)?)))
    }
}

/// Mean and population standard deviation of per-batch normalized distances.
///
/// Consecutive groups of `batch` entries form one batch; each entry is the
/// summed distance of one sample over `slots * t_future` labels.
pub fn batch_statistics(totals: &[u64], slots: usize, t_future: usize, batch: usize) -> Result<(f64, f64, Vec<f64>)> {
    if totals.is_empty() || batch == 0 || slots == 0 || t_future == 0 {
        return Err(EvalError::usage("scoring needs samples and positive batch, slot and horizon sizes"));
    }
    let values: Vec<f64> = totals
        .chunks(batch)
        .map(|c| c.iter().sum::<u64>() as f64 / (slots * t_future * c.len()) as f64)
        .collect();
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    Ok((mu, var.sqrt(), values))
}

/// Repeats each slot's last observed index, or extrapolates every path at the
/// velocity of its last two observed frames.
pub fn persistence_baseline(sample: &ClusterSample, t_future: usize) -> Result<Prediction> {
    if sample.t_history == 0 || t_future > sample.t_future {
        return Err(EvalError::usage("baseline needs history and a horizon within the sample"));
    }
    let th = sample.t_history;
    match &sample.data {
        SampleData::Symbolic(idx) => {
            let indices = (0..sample.slots)
                .flat_map(|k| std::iter::repeat_n(idx[sample.at(k, th - 1)], t_future))
                .collect();
            Ok(Prediction::Symbolic { t_future, indices })
        }
        SampleData::Metric { origin, center, coords } => {
            let extrapolate = |last: Vec2, prev: Option<Vec2>| {
                let v = prev.map_or(Vec2::ZERO, |p| last - p);
                (1..=t_future).map(move |j| last + v * j as f64)
            };
            let prev_center = (th >= 2).then(|| center[th - 2]);
            let c = extrapolate(center[th - 1], prev_center).collect();
            let mut members = Vec::with_capacity(sample.slots * t_future);
            for k in 0..sample.slots {
                let at = |t: usize| sample.present[sample.at(k, t)].then(|| coords[sample.at(k, t)]);
                let last = at(th - 1);
                let prev = if th >= 2 { at(th - 2) } else { None };
                members.extend(extrapolate(last.unwrap_or(Vec2::ZERO), last.and(prev)));
            }
            Ok(Prediction::Metric {
                t_future,
                origin: *origin,
                center: c,
                members,
            })
        }
    }
}

/// Dictionary indices of a forecast under `framework`, slot-major.
pub fn forecast_indices(
    framework: ReportFramework,
    prediction: &Prediction,
    sample: &ClusterSample,
    dict: &Dictionary,
    ctx: &QtcContext,
) -> Result<Vec<usize>> {
    match (framework.framework(), prediction) {
        (Framework::Ts, Prediction::Metric { .. }) => extract_qtc_from_coords(prediction, sample, dict, ctx),
        (f, Prediction::Symbolic { indices, .. }) if f.is_symbolic() => Ok(indices.clone()),
        _ => Err(EvalError::usage(format!("forecast kind does not match {framework}"))),
    }
}

/// Ground-truth label indices of a sample over `t_future` steps.
pub fn label_indices(
    framework: ReportFramework,
    sample: &ClusterSample,
    t_future: usize,
    dict: &Dictionary,
    ctx: &QtcContext,
) -> Result<Vec<usize>> {
    if framework.framework().is_symbolic() {
        if sample.is_metric() || t_future > sample.t_future {
            return Err(EvalError::usage(format!("sample does not carry {framework} labels")));
        }
        Ok((0..sample.slots)
            .flat_map(|k| (0..t_future).map(move |j| (k, j)))
            .map(|(k, j)| sample.label_index(k, j).expect("symbolic sample"))
            .collect())
    } else {
        extract_qtc_from_coords(&ground_truth_prediction(sample, t_future)?, sample, dict, ctx)
    }
}

fn prediction_horizon(p: &Prediction) -> usize {
    match p {
        Prediction::Symbolic { t_future, .. } | Prediction::Metric { t_future, .. } => *t_future,
    }
}

/// Scores forecasts against labels and the persistence baseline.
pub fn score(
    framework: ReportFramework,
    predictions: &[Prediction],
    samples: &[ClusterSample],
    dict: &Dictionary,
    ctx: &QtcContext,
    batch: usize,
) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(EvalError::usage("evaluation split is empty"));
    }
    if predictions.len() != samples.len() {
        return Err(EvalError::usage(format!("{} forecasts for {} samples", predictions.len(), samples.len())));
    }
    if dict.variant() != framework.variant() {
        return Err(EvalError::Compatibility(format!(
            "{framework} needs a {} dictionary, got {}",
            framework.variant(),
            dict.variant()
        )));
    }
    let table = DistanceTable::new(dict)?;
    let tf = prediction_horizon(&predictions[0]);
    let slots = samples[0].slots;
    let mut model_totals = Vec::with_capacity(samples.len());
    let mut base_totals = Vec::with_capacity(samples.len());
    for (p, s) in predictions.iter().zip(samples) {
        if s.slots != slots || prediction_horizon(p) != tf {
            return Err(EvalError::usage("samples and forecasts must share slot count and horizon"));
        }
        let truth = label_indices(framework, s, tf, dict, ctx)?;
        let predicted = forecast_indices(framework, p, s, dict, ctx)?;
        let base = forecast_indices(framework, &persistence_baseline(s, tf)?, s, dict, ctx)?;
        model_totals.push(table.total(&predicted, &truth)?);
        base_totals.push(table.total(&base, &truth)?);
    }
    let (mu, sigma, _) = batch_statistics(&model_totals, slots, tf, batch)?;
    let (baseline_mu, _, _) = batch_statistics(&base_totals, slots, tf, batch)?;
    Ok(EvalReport {
        framework,
        horizon_s: tf as f64 / ctx.rate,
        radius: ctx.radius,
        mu,
        sigma,
        baseline_mu,
        n_samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use masi_core::{build_dictionary, SamplingConfig, ToleranceSet};

    #[test]
    fn normalization_matches_worked_example() {
        let (mu, sigma, values) = batch_statistics(&[1 + 1 + 2], 2, 2, 1).unwrap();
        assert_eq!(values, vec![1.0]);
        assert_eq!((mu, sigma), (1.0, 0.0));
        let (mu, sigma, _) = batch_statistics(&[0, 8, 4, 4], 2, 2, 2).unwrap();
        assert_eq!((mu, sigma), (1.0, 0.0));
        let (mu, sigma, _) = batch_statistics(&[0, 0, 8, 8], 2, 2, 2).unwrap();
        assert_eq!((mu, sigma), (1.0, 1.0));
        assert!(batch_statistics(&[], 2, 2, 2).is_err());
    }

    #[test]
    fn distance_table_matches_pairwise_distance() {
        let d = build_dictionary(QtcVariant::C1, &SamplingConfig { samples: 50_000, ..SamplingConfig::default() })
            .unwrap()
            .dictionary;
        let t = DistanceTable::new(&d).unwrap();
        let imp = d.impossible_index();
        for i in [0, 7, 40, imp] {
            for j in [0, 3, 81, imp] {
                let want = conceptual_distance(&d.vector(i).unwrap(), &d.vector(j).unwrap()).unwrap();
                assert_eq!(t.get(i, j).unwrap(), want);
            }
        }
        assert!(t.get(imp + 1, 0).is_err());
    }

    fn stationary(th: usize, tf: usize) -> ClusterSample {
        let steps = th + tf;
        ClusterSample {
            center: "c".into(),
            window_start: 0,
            members: vec!["m".into()],
            slots: 1,
            t_history: th,
            t_future: tf,
            mask: vec![true; steps],
            present: vec![true; steps],
            data: SampleData::Metric {
                origin: Vec2::new(1.0, 1.0),
                center: (0..steps).map(|t| Vec2::new(0.02 * t as f64 - 0.04, 0.01 * t as f64)).collect(),
                coords: (0..steps).map(|t| Vec2::new(0.5 - 0.03 * t as f64, 0.2)).collect(),
            },
        }
    }

    #[test]
    fn constant_velocity_baseline_is_exact() {
        let s = stationary(3, 5);
        let p = persistence_baseline(&s, 5).unwrap();
        let truth = ground_truth_prediction(&s, 5).unwrap();
        let (Prediction::Metric { center: a, members: b, .. }, Prediction::Metric { center: c, members: d, .. }) =
            (&p, &truth)
        else {
            unreachable!()
        };
        for (x, y) in a.iter().chain(b).zip(c.iter().chain(d)) {
            assert!(x.dist(*y) < 1e-9);
        }
        let dict = build_dictionary(QtcVariant::C2, &SamplingConfig { samples: 50_000, ..SamplingConfig::default() })
            .unwrap()
            .dictionary;
        let ctx = QtcContext {
            radius: 3.7,
            rate: 15.0,
            tolerances: ToleranceSet::default(),
        };
        let r = score(ReportFramework::Ts2, &[truth], &[s], &dict, &ctx, 1).unwrap();
        assert_eq!((r.mu, r.sigma, r.baseline_mu), (0.0, 0.0, 0.0));
    }

    #[test]
    fn symbolic_baseline_repeats_last_index() {
        let s = ClusterSample {
            center: "c".into(),
            window_start: 0,
            members: vec!["m".into()],
            slots: 2,
            t_history: 2,
            t_future: 3,
            mask: vec![true; 10],
            present: vec![true; 10],
            data: SampleData::Symbolic(vec![1, 2, 2, 2, 5, 9, 9, 9, 9, 9]),
        };
        match persistence_baseline(&s, 3).unwrap() {
            Prediction::Symbolic { indices, .. } => assert_eq!(indices, vec![2, 2, 2, 9, 9, 9]),
            other => panic!("{other:?}"),
        }
    }
}
