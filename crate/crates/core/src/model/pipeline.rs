//! Multi-round adaptation: train, evaluate, refresh pseudo-labels, repeat.

use rand::seq::index::sample;

use super::params::PredictorParams;
use super::train::{train_round, LossReport, Sample};
use crate::config::{quota, TrainConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalResult, EvalSample};
use crate::rng::{derive_seed, stream};
use crate::upl::{refresh_pseudo_labels, PseudoLabelRecord, RefreshOptions, TargetImage};

/// Everything the pipeline needs. Target-train images carry no labels at all.
#[derive(Clone, Debug, Default)]
pub struct PipelineData {
    /// Labeled source samples at training input size.
    pub source: Vec<Sample>,
    /// Unlabeled target images at training input size.
    pub target_train: Vec<TargetImage>,
    /// Held-out labeled target images at native size, used only for scoring.
    pub target_eval: Vec<EvalSample>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    /// 1-based round number.
    pub round: usize,
    pub split: String,
    pub mae: f64,
    pub f_beta: f64,
}

/// What a finished round hands to the observer.
pub struct RoundArtifacts<'a> {
    pub round: usize,
    pub params: &'a PredictorParams,
    pub pseudo: &'a [PseudoLabelRecord],
    pub loss: &'a LossReport,
    pub eval: Option<&'a EvalResult>,
    pub n_source: usize,
    pub n_target: usize,
}

/// Persists per-round artifacts; an error aborts the pipeline after earlier rounds were saved.
pub trait RoundObserver {
    fn round_finished(&mut self, artifacts: &RoundArtifacts<'_>) -> Result<()>;
}

impl RoundObserver for () {
    fn round_finished(&mut self, _: &RoundArtifacts<'_>) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub params: PredictorParams,
    pub history: Vec<RoundMetrics>,
}

pub const EVAL_SPLIT: &str = "target_eval";

fn source_subset(data: &[Sample], proportion: f64, seed: u64, round: usize) -> Vec<Sample> {
    let n = quota(proportion, data.len());
    let mut idx = sample(
        &mut stream(seed, "source-subset", round as u64),
        data.len(),
        n,
    )
    .into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| data[i].clone()).collect()
}

/// Run every round of `config.schedule` from a seeded initialization.
///
/// Pseudo-labels for round `i` come from the model at the end of round `i - 1`, so the first
/// round (target proportion 0) trains on source samples only.
pub fn run_pipeline(
    config: &TrainConfig,
    data: &PipelineData,
    observer: &mut dyn RoundObserver,
) -> Result<PipelineOutput> {
    config.validate()?;
    if data.source.is_empty() {
        return Err(Error::invalid("pipeline needs at least one source sample"));
    }
    let dims = (config.train_input_dims[0], config.train_input_dims[1]);
    for t in &data.target_train {
        if t.image.dims() != dims {
            return Err(Error::invalid(format!(
                "target image {} is not at training input size",
                t.id
            )));
        }
    }
    let test_dims = (config.test_input_dims[0], config.test_input_dims[1]);
    let mut params = PredictorParams::init(config.seed);
    let mut history = Vec::new();
    for i in 0..config.schedule.rounds {
        let round = i + 1;
        let t_prop = config.schedule.target_props[i];
        let records = if t_prop > 0.0 && !data.target_train.is_empty() {
            let opts = RefreshOptions {
                augment: &config.augment,
                pseudo: &config.pseudo,
                k: config.k,
                proportion: t_prop,
                round,
                seed: derive_seed(config.seed, "refresh", round as u64),
            };
            refresh_pseudo_labels(&params, &data.target_train, &opts)?
        } else {
            Vec::new()
        };
        let target_samples = data
            .target_train
            .iter()
            .zip(&records)
            .filter(|(_, r)| r.selected)
            .map(|(t, r)| {
                Sample::new(
                    &t.id,
                    &t.image,
                    r.pseudo_label.clone(),
                    Some(r.weights.clone()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let source = source_subset(
            &data.source,
            config.schedule.source_props[i],
            config.seed,
            round,
        );
        let (next, loss) = train_round(&params, &source, &target_samples, config, round)?;
        params = next;
        let eval = if data.target_eval.is_empty() {
            None
        } else {
            Some(evaluate(&params, &data.target_eval, test_dims)?)
        };
        if let Some(e) = &eval {
            history.push(RoundMetrics {
                round,
                split: EVAL_SPLIT.into(),
                mae: e.mae,
                f_beta: e.f_beta,
            });
        }
        observer.round_finished(&RoundArtifacts {
            round,
            params: &params,
            pseudo: &records,
            loss: &loss,
            eval: eval.as_ref(),
            n_source: source.len(),
            n_target: target_samples.len(),
        })?;
    }
    Ok(PipelineOutput { params, history })
}

/// `round,split,mae,f_beta` lines with a header.
pub fn history_csv(history: &[RoundMetrics]) -> String {
    let mut s = String::from("round,split,mae,f_beta\n");
    for m in history {
        s.push_str(&format!("{},{},{},{}\n", m.round, m.split, m.mae, m.f_beta));
    }
    s
}
