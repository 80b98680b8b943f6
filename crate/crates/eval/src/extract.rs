//! QTC extraction from coordinate forecasts.

use masi_core::{window_pair_series, ClusterSample, DatasetSplits, Dictionary, SampleData, ToleranceSet, Vec2};
use masi_model::Prediction;

use crate::error::{EvalError, Result};

/// Geometry settings shared by label assembly and extraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QtcContext {
    pub radius: f64,
    pub rate: f64,
    pub tolerances: ToleranceSet,
}

impl QtcContext {
    pub fn of(splits: &DatasetSplits) -> Self {
        QtcContext {
            radius: splits.config.radius,
            rate: splits.rate,
            tolerances: splits.tolerances,
        }
    }
}

fn metric_parts(sample: &ClusterSample) -> Result<(&[Vec2], &[Vec2])> {
    match &sample.data {
        SampleData::Metric { center, coords, .. } => Ok((center, coords)),
        SampleData::Symbolic(_) => Err(EvalError::usage("coordinate extraction needs a metric sample")),
    }
}

/// The sample's own future coordinates as a forecast over `t_future` steps.
pub fn ground_truth_prediction(sample: &ClusterSample, t_future: usize) -> Result<Prediction> {
    let (center, coords) = metric_parts(sample)?;
    let SampleData::Metric { origin, .. } = &sample.data else { unreachable!() };
    if t_future > sample.t_future {
        return Err(EvalError::usage(format!("horizon {t_future} exceeds the sample's {}", sample.t_future)));
    }
    let th = sample.t_history;
    let members = (0..sample.slots)
        .flat_map(|k| (0..t_future).map(move |j| (k, j)))
        .map(|(k, j)| coords[sample.at(k, th + j)])
        .collect();
    Ok(Prediction::Metric {
        t_future,
        origin: *origin,
        center: center[th..th + t_future].to_vec(),
        members,
    })
}

/// Dictionary indices, slot-major over `slots x t_future`, of the QTC
/// relations between the forecast center path and every forecast member
/// path.
///
/// The observed history precedes the forecast so the first label step has a
/// predecessor. Member presence comes from the sample; padding slots and
/// absent or out-of-radius steps map to the impossible index, vectors missing
/// from the dictionary to their nearest entry.
pub fn extract_qtc_from_coords(
    prediction: &Prediction,
    sample: &ClusterSample,
    dict: &Dictionary,
    ctx: &QtcContext,
) -> Result<Vec<usize>> {
    let Prediction::Metric {
        t_future,
        center: pred_center,
        members: pred_members,
        ..
    } = prediction
    else {
        return Err(EvalError::usage("coordinate extraction needs a metric forecast"));
    };
    let tf = *t_future;
    let (center, coords) = metric_parts(sample)?;
    let th = sample.t_history;
    if tf > sample.t_future || pred_center.len() != tf || pred_members.len() < sample.members.len() * tf {
        return Err(EvalError::usage(format!(
            "forecast of {} center and {} member points does not fit {} slots over {tf} steps",
            pred_center.len(),
            pred_members.len(),
            sample.members.len()
        )));
    }
    let imp = dict.impossible_index();
    let mut out = vec![imp; sample.slots * tf];
    let path: Vec<Vec2> = center[..th].iter().chain(pred_center).copied().collect();
    for k in 0..sample.members.len() {
        let member: Vec<Option<Vec2>> = (0..th + tf)
            .map(|t| {
                sample.present[sample.at(k, t)].then(|| {
                    if t < th {
                        coords[sample.at(k, t)]
                    } else {
                        pred_members[k * tf + t - th]
                    }
                })
            })
            .collect();
        let series = window_pair_series(dict.variant(), &path, &member, ctx.radius, ctx.rate, &ctx.tolerances);
        for (j, q) in series[th..].iter().enumerate() {
            if let Some(q) = q {
                out[k * tf + j] = dict.nearest_index(q);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use masi_core::{build_dictionary, QtcSymbol, QtcVariant, QtcVector, SamplingConfig};

    fn dict() -> Dictionary {
        build_dictionary(QtcVariant::C1, &SamplingConfig { samples: 50_000, ..SamplingConfig::default() })
            .unwrap()
            .dictionary
    }

    /// Center at the origin walking +x, one member approaching head-on and a
    /// padding slot.
    fn approach() -> ClusterSample {
        let (th, tf) = (3, 4);
        let steps = th + tf;
        let v = 0.05;
        let center: Vec<Vec2> = (0..steps).map(|t| Vec2::new(v * (t as f64 - 2.0), 0.0)).collect();
        let mut coords: Vec<Vec2> = (0..steps).map(|t| Vec2::new(1.0 - v * (t as f64 - 2.0), 0.0)).collect();
        coords.extend(std::iter::repeat_n(Vec2::ZERO, steps));
        ClusterSample {
            center: "c".into(),
            window_start: 0,
            members: vec!["m".into()],
            slots: 2,
            t_history: th,
            t_future: tf,
            mask: (0..2 * steps).map(|i| i < steps).collect(),
            present: (0..2 * steps).map(|i| i < steps).collect(),
            data: SampleData::Metric {
                origin: Vec2::new(4.0, 4.0),
                center,
                coords,
            },
        }
    }

    fn ctx() -> QtcContext {
        QtcContext {
            radius: 3.7,
            rate: 15.0,
            tolerances: ToleranceSet::default(),
        }
    }

    #[test]
    fn collinear_approach_gives_closing_stream() {
        let d = dict();
        let s = approach();
        let truth = ground_truth_prediction(&s, 4).unwrap();
        let idx = extract_qtc_from_coords(&truth, &s, &d, &ctx()).unwrap();
        let closing = QtcVector::new(
            QtcVariant::C1,
            &[QtcSymbol::Minus, QtcSymbol::Minus, QtcSymbol::Zero, QtcSymbol::Zero],
        )
        .unwrap();
        let want = d.index_of(&closing).unwrap();
        assert_eq!(&idx[..4], &[want; 4]);
        assert_eq!(&idx[4..], &[d.impossible_index(); 4]);
    }

    #[test]
    fn departed_member_maps_to_impossible() {
        let d = dict();
        let mut s = approach();
        let last = s.at(0, 6);
        s.present[last] = false;
        let truth = ground_truth_prediction(&s, 4).unwrap();
        let idx = extract_qtc_from_coords(&truth, &s, &d, &ctx()).unwrap();
        assert_eq!(idx[3], d.impossible_index());
        assert_ne!(idx[2], d.impossible_index());
    }

    #[test]
    fn symbolic_inputs_are_rejected() {
        let d = dict();
        let s = approach();
        let p = Prediction::Symbolic { t_future: 4, indices: vec![0; 8] };
        assert!(matches!(extract_qtc_from_coords(&p, &s, &d, &ctx()), Err(EvalError::Usage(_))));
    }
}
