//! Unembedding: rank channels by an optimized weight vector, score the nested
//! subsets and the constant model, and pick a winner.

use ndarray::Array1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bfgs::{bfgs_minimize, BfgsOptions, OptimizerTrace};
use crate::cv::{trivial_model_cv, weighted_rmsecv, CvPlan, CvValue};
use crate::data_io::{autoscale_weights, channel_std};
use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};
use crate::jacobian::WeightVector;
use crate::objective::{discrete_abic, ObjectiveConfig, SelectionObjective};
use crate::wpls::{wpls_vanilla, WplsModel};

/// Cross-validated errors below `(MSE_NOISE_FLOOR * sd(y))^2` are treated
/// as rounding noise when candidates are compared, so exact fits of
/// different sizes tie and the size penalty decides.
pub const MSE_NOISE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pragma {
    LambdaMagnitude,
    LambdaTimesBeta,
}

impl Pragma {
    pub fn name(self) -> &'static str {
        match self {
            Pragma::LambdaMagnitude => "lambda_magnitude",
            Pragma::LambdaTimesBeta => "lambda_times_beta",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceOrdering {
    pub pragma: Pragma,
    /// 0-based channel indices, most important first.
    pub ranked_channels: Vec<usize>,
    /// Importance score of each ranked channel, in ranking order.
    pub scores: Vec<f64>,
}

fn rank(pragma: Pragma, score: Vec<f64>) -> ImportanceOrdering {
    let mut idx: Vec<usize> = (0..score.len()).collect();
    // stable sort keeps lower indices first among ties
    idx.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    ImportanceOrdering {
        pragma,
        scores: idx.iter().map(|&i| score[i]).collect(),
        ranked_channels: idx,
    }
}

/// Orderings by `|lambda_j|` and by `|lambda_j beta_j|`, where `model` was
/// fitted on the weighted predictors.
pub fn importance_orderings(
    lambda: &WeightVector,
    model: &WplsModel,
) -> Result<Vec<ImportanceOrdering>> {
    if model.beta.len() != lambda.len() {
        return Err(SrcekError::DimensionMismatch(format!(
            "{} weights for a model with {} coefficients",
            lambda.len(),
            model.beta.len()
        )));
    }
    let lam = lambda.as_array();
    Ok(vec![
        rank(Pragma::LambdaMagnitude, lam.iter().map(|v| v.abs()).collect()),
        rank(
            Pragma::LambdaTimesBeta,
            lam.iter().zip(&model.beta).map(|(a, b)| (a * b).abs()).collect(),
        ),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub pragma: Pragma,
    pub k: usize,
    /// 0-based channel indices, ascending.
    pub channels: Vec<usize>,
    pub rmsecv: f64,
    pub msecv: f64,
    pub abic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCandidate {
    pub pragma: Pragma,
    pub k: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateTable {
    pub candidates: Vec<Candidate>,
    pub skipped: Vec<SkippedCandidate>,
}

fn noise_floor(data: &Dataset) -> f64 {
    let mean = data.weighted_mean_y();
    let var = data
        .gamma
        .iter()
        .zip(&data.y)
        .map(|(g, y)| g * (y - mean).powi(2))
        .sum::<f64>()
        / data.gamma_sum();
    let scale = if var > 0.0 { var } else { 1.0 };
    MSE_NOISE_FLOOR * MSE_NOISE_FLOOR * scale
}

/// Candidate information criterion with the rounding-noise floor applied.
fn candidate_abic(data: &Dataset, msecv: f64, l: usize, k: usize) -> Result<f64> {
    discrete_abic(msecv.max(noise_floor(data)), data.n_objects(), l, k)
}

/// Subset of `channels` with its weights; unit weights when `k == l`.
fn subset(
    data: &Dataset,
    channels: &[usize],
    l: usize,
    lambda: &WeightVector,
) -> (Dataset, WeightVector) {
    let sub = data.select_channels(channels);
    let w = if channels.len() == l {
        WeightVector::ones(channels.len())
    } else {
        WeightVector(Array1::from_iter(channels.iter().map(|&j| lambda.0[j])))
    };
    (sub, w)
}

/// Scores the top-`k` channels of `ordering` for `k = l..=k_max`.
pub fn score_model_sequence(
    data: &Dataset,
    ordering: &ImportanceOrdering,
    l: usize,
    plan: &CvPlan,
    k_max: usize,
    lambda: &WeightVector,
) -> Result<CandidateTable> {
    let n = data.n_channels();
    if l == 0 || l > k_max || k_max > n {
        return Err(SrcekError::InvalidArgument(format!(
            "model sequence needs 1 <= l <= k_max <= n, got l = {l}, k_max = {k_max}, n = {n}"
        )));
    }
    let rows = (l..=k_max)
        .into_par_iter()
        .map(|k| {
            let mut channels = ordering.ranked_channels[..k].to_vec();
            channels.sort_unstable();
            let (sub, w) = subset(data, &channels, l, lambda);
            match weighted_rmsecv(&sub, plan, l, &w) {
                Ok(cv) => Ok(Ok(Candidate {
                    pragma: ordering.pragma,
                    k,
                    abic: candidate_abic(data, cv.msecv, l, k)?,
                    channels,
                    rmsecv: cv.rmsecv,
                    msecv: cv.msecv,
                })),
                Err(e @ SrcekError::FoldTooSmall { .. }) => Ok(Err(SkippedCandidate {
                    pragma: ordering.pragma,
                    k,
                    reason: e.to_string(),
                })),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = CandidateTable::default();
    for r in rows {
        match r {
            Ok(c) => table.candidates.push(c),
            Err(s) => table.skipped.push(s),
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    MinRmsecv,
    MinAbic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub objective: ObjectiveConfig,
    pub optimizer: BfgsOptions,
    /// Largest subset scored; defaults to `min(n, 50)`.
    pub k_max: Option<usize>,
    pub criterion: Criterion,
    pub post_optimize: bool,
    pub seed: u64,
}

pub const DEFAULT_K_MAX: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialModel {
    pub mean: f64,
    pub variance: f64,
    pub rmsecv: f64,
    pub msecv: f64,
    pub abic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WinnerKind {
    Trivial,
    Pls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostOptimization {
    pub weights: Vec<f64>,
    pub rmsecv: f64,
    pub abic: f64,
    pub trace: OptimizerTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub kind: WinnerKind,
    pub pragma: Option<Pragma>,
    /// 0-based channel indices, ascending; empty for the trivial model.
    pub channels: Vec<usize>,
    pub channel_labels: Option<Vec<String>>,
    pub factors: usize,
    pub rmsecv: f64,
    pub abic: f64,
    pub criterion_value: f64,
    /// Weights of the selected channels (all ones when `k == l`).
    pub weights: Vec<f64>,
    pub post_optimization: Option<PostOptimization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n_objects: usize,
    pub n_channels: usize,
    pub factors: usize,
    pub objective: crate::objective::ObjectiveKind,
    pub p: f64,
    pub q: f64,
    pub criterion: Criterion,
    pub k_max: usize,
    pub post_optimize: bool,
    pub seed: u64,
    pub plan: crate::cv::PlanProvenance,
    pub plan_folds: usize,
    pub optimizer: BfgsOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub config: ConfigEcho,
    pub winner: Winner,
    pub trivial_model: TrivialModel,
    pub initial_weights: Vec<f64>,
    /// Optimized weights normalized to unit Euclidean norm.
    pub optimized_weights: Vec<f64>,
    pub orderings: Vec<ImportanceOrdering>,
    pub candidates: Vec<Candidate>,
    pub skipped: Vec<SkippedCandidate>,
    pub optimizer: Option<OptimizerTrace>,
    pub notes: Vec<String>,
}

fn criterion_of(criterion: Criterion, data: &Dataset, rmsecv: f64, abic: f64) -> f64 {
    match criterion {
        Criterion::MinAbic => abic,
        Criterion::MinRmsecv => rmsecv.max(noise_floor(data).sqrt()),
    }
}

fn trivial_model(data: &Dataset, plan: &CvPlan) -> Result<(TrivialModel, CvValue)> {
    let cv = trivial_model_cv(data, plan)?;
    let mean = data.weighted_mean_y();
    let variance = data
        .gamma
        .iter()
        .zip(&data.y)
        .map(|(g, y)| g * (y - mean).powi(2))
        .sum::<f64>()
        / data.gamma_sum();
    let abic = candidate_abic(data, cv.msecv, 0, 0)?;
    Ok((
        TrivialModel {
            mean,
            variance,
            rmsecv: cv.rmsecv,
            msecv: cv.msecv,
            abic,
        },
        cv,
    ))
}

/// Minimizes the configured objective from `start`; an objective that
/// cannot be evaluated at the start (a perfect fit) leaves `start` as is.
fn optimize(
    data: &Dataset,
    objective: &ObjectiveConfig,
    optimizer: &BfgsOptions,
    start: &Array1<f64>,
    notes: &mut Vec<String>,
) -> Result<(Array1<f64>, Option<OptimizerTrace>)> {
    let f = SelectionObjective {
        data,
        cfg: objective,
    };
    match bfgs_minimize(&f, start, optimizer) {
        Ok((x, trace)) => Ok((x, Some(trace))),
        Err(SrcekError::PerfectFit) => {
            notes.push("objective has no gradient at the starting weights (perfect fit); optimization skipped".into());
            Ok((start.clone(), None))
        }
        Err(e) => Err(e),
    }
}

/// The full pipeline: autoscaled start, BFGS on the objective, both
/// orderings, nested-model scoring, winner selection and optional
/// re-optimization on the winning subset.
pub fn srcek_select(data: &Dataset, cfg: &SelectionConfig) -> Result<SelectionReport> {
    data.validate()?;
    cfg.objective.validate()?;
    cfg.optimizer.validate()?;
    let l = cfg.objective.factors;
    let n = data.n_channels();
    let plan = &cfg.objective.plan;
    plan.check_for(data, l)?;
    let k_max = cfg.k_max.unwrap_or(DEFAULT_K_MAX).min(n);
    if l > k_max {
        return Err(SrcekError::InvalidArgument(format!(
            "{l} factors exceed the largest scored subset ({k_max} channels)"
        )));
    }
    let mut notes = Vec::new();
    let (trivial, _) = trivial_model(data, plan)?;
    let lambda0 = autoscale_weights(data).0;
    let echo = ConfigEcho {
        n_objects: data.n_objects(),
        n_channels: n,
        factors: l,
        objective: cfg.objective.kind,
        p: cfg.objective.p,
        q: cfg.objective.q,
        criterion: cfg.criterion,
        k_max,
        post_optimize: cfg.post_optimize,
        seed: cfg.seed,
        plan: plan.provenance.clone(),
        plan_folds: plan.len(),
        optimizer: cfg.optimizer.clone(),
    };
    let trivial_winner = |trivial: &TrivialModel| Winner {
        kind: WinnerKind::Trivial,
        pragma: None,
        channels: Vec::new(),
        channel_labels: data.channel_labels.as_ref().map(|_| Vec::new()),
        factors: 0,
        rmsecv: trivial.rmsecv,
        abic: trivial.abic,
        criterion_value: criterion_of(cfg.criterion, data, trivial.rmsecv, trivial.abic),
        weights: Vec::new(),
        post_optimization: None,
    };

    if channel_std(data).iter().all(|&s| s == 0.0) {
        notes.push("every channel is constant; only the trivial model is available".into());
        return Ok(SelectionReport {
            config: echo,
            winner: trivial_winner(&trivial),
            trivial_model: trivial,
            initial_weights: lambda0.to_vec(),
            optimized_weights: lambda0.to_vec(),
            orderings: Vec::new(),
            candidates: Vec::new(),
            skipped: Vec::new(),
            optimizer: None,
            notes,
        });
    }

    let (lambda, trace) = optimize(data, &cfg.objective, &cfg.optimizer, &lambda0, &mut notes)?;
    let norm = lambda.dot(&lambda).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(SrcekError::NonFinite("optimized weight vector"));
    }
    let lambda = WeightVector(lambda / norm);
    let (model, _) = wpls_vanilla(&data.weighted(lambda.as_array())?, l)?;
    let orderings = importance_orderings(&lambda, &model)?;
    let tables = orderings
        .par_iter()
        .map(|o| score_model_sequence(data, o, l, plan, k_max, &lambda))
        .collect::<Result<Vec<_>>>()?;
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    for t in tables {
        candidates.extend(t.candidates);
        skipped.extend(t.skipped);
    }

    let mut winner = trivial_winner(&trivial);
    for c in &candidates {
        let v = criterion_of(cfg.criterion, data, c.rmsecv, c.abic);
        if v < winner.criterion_value {
            let (_, w) = subset(data, &c.channels, l, &lambda);
            winner = Winner {
                kind: WinnerKind::Pls,
                pragma: Some(c.pragma),
                channels: c.channels.clone(),
                channel_labels: data
                    .channel_labels
                    .as_ref()
                    .map(|lab| c.channels.iter().map(|&j| lab[j].clone()).collect()),
                factors: l,
                rmsecv: c.rmsecv,
                abic: c.abic,
                criterion_value: v,
                weights: w.0.to_vec(),
                post_optimization: None,
            };
        }
    }

    if cfg.post_optimize && winner.kind == WinnerKind::Pls && winner.channels.len() > l {
        let sub = data.select_channels(&winner.channels);
        let sub_cfg = ObjectiveConfig {
            plan: plan.clone(),
            ..cfg.objective.clone()
        };
        let start = Array1::from(winner.weights.clone());
        let (w, post_trace) = optimize(&sub, &sub_cfg, &cfg.optimizer, &start, &mut notes)?;
        if let Some(trace) = post_trace {
            let cv = weighted_rmsecv(&sub, plan, l, &WeightVector(w.clone()))?;
            winner.post_optimization = Some(PostOptimization {
                weights: w.to_vec(),
                rmsecv: cv.rmsecv,
                abic: candidate_abic(data, cv.msecv, l, winner.channels.len())?,
                trace,
            });
        }
    }

    Ok(SelectionReport {
        config: echo,
        winner,
        trivial_model: trivial,
        initial_weights: lambda0.to_vec(),
        optimized_weights: lambda.0.to_vec(),
        orderings,
        candidates,
        skipped,
        optimizer: trace,
        notes,
    })
}
