//! Cross-validation plans and the response-weighted RMSECV with its analytic
//! gradient.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, SrcekError};
use crate::jacobian::{residual, residual_with_jacobian, WeightVector};

/// One calibration/test partition (0-based object indices, sorted).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub cal: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanProvenance {
    MonteCarlo { seed: u64, d: usize, folds: usize },
    Interleaved { groups: usize },
    Explicit,
    /// Calibration and test are both the whole dataset (MSEP).
    Resubstitution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n_objects: usize,
    pub folds: Vec<Fold>,
    pub provenance: PlanProvenance,
}

/// Default calibration size for Monte-Carlo plans: `round(m^{3/4})`.
pub fn default_cal_size(m: usize) -> usize {
    (m as f64).powf(0.75).round() as usize
}

impl CvPlan {
    /// `folds` independent uniform delete-`d` partitions. Defaults:
    /// `d = m - round(m^{3/4})`, `folds = 2m`.
    pub fn monte_carlo(m: usize, d: Option<usize>, folds: Option<usize>, seed: u64) -> Result<Self> {
        let d = d.unwrap_or_else(|| m.saturating_sub(default_cal_size(m)));
        let folds = folds.unwrap_or(2 * m);
        if m < 3 || d < 1 || d + 2 > m {
            return Err(SrcekError::InvalidPlan(format!(
                "delete-{d} plan on {m} objects leaves fewer than 2 calibration objects"
            )));
        }
        if folds == 0 {
            return Err(SrcekError::InvalidPlan("at least one fold is required".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..m).collect();
        let mut out = Vec::with_capacity(folds);
        for _ in 0..folds {
            for i in 0..m {
                perm[i] = i;
            }
            // Fisher-Yates prefix of length d
            for i in 0..d {
                let j = rng.random_range(i..m);
                perm.swap(i, j);
            }
            let mut test = perm[..d].to_vec();
            let mut cal = perm[d..].to_vec();
            test.sort_unstable();
            cal.sort_unstable();
            out.push(Fold { cal, test });
        }
        Ok(CvPlan {
            n_objects: m,
            folds: out,
            provenance: PlanProvenance::MonteCarlo { seed, d, folds },
        })
    }

    /// Group `g` tests objects `g, g + G, g + 2G, ...`.
    pub fn interleaved(m: usize, groups: usize) -> Result<Self> {
        if groups < 2 || groups > m {
            return Err(SrcekError::InvalidPlan(format!(
                "{groups} interleaved groups on {m} objects (need 2 <= groups <= objects)"
            )));
        }
        let folds = (0..groups)
            .map(|g| {
                let test: Vec<usize> = (g..m).step_by(groups).collect();
                let cal: Vec<usize> = (0..m).filter(|i| i % groups != g).collect();
                Fold { cal, test }
            })
            .collect();
        Ok(CvPlan {
            n_objects: m,
            folds,
            provenance: PlanProvenance::Interleaved { groups },
        })
    }

    pub fn resubstitution(m: usize) -> Self {
        let all: Vec<usize> = (0..m).collect();
        CvPlan {
            n_objects: m,
            folds: vec![Fold {
                cal: all.clone(),
                test: all,
            }],
            provenance: PlanProvenance::Resubstitution,
        }
    }

    pub fn explicit(m: usize, folds: Vec<Fold>) -> Result<Self> {
        let plan = CvPlan {
            n_objects: m,
            folds,
            provenance: PlanProvenance::Explicit,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    /// Structural checks: indices in range, nonempty groups, disjointness
    /// (except for resubstitution).
    pub fn validate(&self) -> Result<()> {
        if self.folds.is_empty() {
            return Err(SrcekError::InvalidPlan("plan has no folds".into()));
        }
        let m = self.n_objects;
        let mut seen = vec![usize::MAX; m];
        for (f, fold) in self.folds.iter().enumerate() {
            if fold.test.is_empty() || fold.cal.len() < 2 {
                return Err(SrcekError::InvalidPlan(format!(
                    "fold {}: needs a nonempty test group and at least 2 calibration objects",
                    f + 1
                )));
            }
            for &i in fold.cal.iter().chain(&fold.test) {
                if i >= m {
                    return Err(SrcekError::InvalidPlan(format!(
                        "fold {}: object {} out of range 1..={m}",
                        f + 1,
                        i + 1
                    )));
                }
            }
            if self.provenance != PlanProvenance::Resubstitution {
                for &i in &fold.cal {
                    seen[i] = f;
                }
                if let Some(&i) = fold.test.iter().find(|&&i| seen[i] == f) {
                    return Err(SrcekError::InvalidPlan(format!(
                        "fold {}: object {} is in both calibration and test groups",
                        f + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Validates the plan against a dataset and a factor count.
    pub fn check_for(&self, data: &Dataset, l: usize) -> Result<()> {
        if self.n_objects != data.n_objects() {
            return Err(SrcekError::InvalidPlan(format!(
                "plan is for {} objects, dataset has {}",
                self.n_objects,
                data.n_objects()
            )));
        }
        self.validate()?;
        for (f, fold) in self.folds.iter().enumerate() {
            if fold.cal.len() < l + 1 {
                return Err(SrcekError::FoldTooSmall {
                    fold: f + 1,
                    size: fold.cal.len(),
                    factors: l,
                });
            }
        }
        Ok(())
    }

    /// Plain-text form: a `#` header recording provenance, then one fold
    /// per line as `cal: i,j,... | test: k,l,...` with 1-based indices.
    pub fn to_text(&self) -> String {
        let mut s = format!("# srcek-cv-plan objects={}", self.n_objects);
        match &self.provenance {
            PlanProvenance::MonteCarlo { seed, d, folds } => {
                let _ = write!(s, " provenance=monte_carlo seed={seed} d={d} folds={folds}");
            }
            PlanProvenance::Interleaved { groups } => {
                let _ = write!(s, " provenance=interleaved groups={groups}");
            }
            PlanProvenance::Explicit => s.push_str(" provenance=explicit"),
            PlanProvenance::Resubstitution => s.push_str(" provenance=resubstitution"),
        }
        s.push('\n');
        let join = |v: &[usize]| {
            v.iter()
                .map(|i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        for fold in &self.folds {
            let _ = writeln!(s, "cal: {} | test: {}", join(&fold.cal), join(&fold.test));
        }
        s
    }

    /// Parses [`CvPlan::to_text`] output. Without a header the object count
    /// is the largest index seen and the provenance is explicit.
    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let err = |row: usize, message: String| SrcekError::Parse {
            path: origin.to_string(),
            row,
            column: 0,
            message,
        };
        let mut header: Option<(usize, PlanProvenance)> = None;
        let mut folds = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let row = ln + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(h) = parse_header(rest) {
                    header = Some(h.map_err(|e| err(row, e))?);
                }
                continue;
            }
            let (cal, test) = line
                .split_once('|')
                .ok_or_else(|| err(row, "expected `cal: ... | test: ...`".into()))?;
            let parse_side = |side: &str, key: &str| -> Result<Vec<usize>> {
                let body = side
                    .trim()
                    .strip_prefix(key)
                    .and_then(|s| s.trim_start().strip_prefix(':'))
                    .ok_or_else(|| err(row, format!("missing `{key}:`")))?;
                let mut v = Vec::new();
                for tok in body.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                    let i: usize = tok
                        .parse()
                        .map_err(|_| err(row, format!("bad object index `{tok}`")))?;
                    if i == 0 {
                        return Err(err(row, "object indices are 1-based".into()));
                    }
                    v.push(i - 1);
                }
                v.sort_unstable();
                Ok(v)
            };
            folds.push(Fold {
                cal: parse_side(cal, "cal")?,
                test: parse_side(test, "test")?,
            });
        }
        let (n_objects, provenance) = match header {
            Some(h) => h,
            None => {
                let max = folds
                    .iter()
                    .flat_map(|f| f.cal.iter().chain(&f.test))
                    .max()
                    .map_or(0, |m| m + 1);
                (max, PlanProvenance::Explicit)
            }
        };
        let plan = CvPlan {
            n_objects,
            folds,
            provenance,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| SrcekError::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SrcekError::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

fn parse_header(rest: &str) -> Option<std::result::Result<(usize, PlanProvenance), String>> {
    let mut words = rest.split_whitespace();
    if words.next()? != "srcek-cv-plan" {
        return None;
    }
    let mut kv = std::collections::BTreeMap::new();
    for w in words {
        if let Some((k, v)) = w.split_once('=') {
            kv.insert(k, v);
        }
    }
    let num = |k: &str| -> std::result::Result<u64, String> {
        kv.get(k)
            .ok_or_else(|| format!("header lacks `{k}`"))?
            .parse()
            .map_err(|_| format!("bad header value for `{k}`"))
    };
    Some((|| {
        let m = num("objects")? as usize;
        let prov = match kv.get("provenance").copied().unwrap_or("explicit") {
            "monte_carlo" => PlanProvenance::MonteCarlo {
                seed: num("seed")?,
                d: num("d")? as usize,
                folds: num("folds")? as usize,
            },
            "interleaved" => PlanProvenance::Interleaved {
                groups: num("groups")? as usize,
            },
            "explicit" => PlanProvenance::Explicit,
            "resubstitution" => PlanProvenance::Resubstitution,
            other => return Err(format!("unknown provenance `{other}`")),
        };
        Ok((m, prov))
    })())
}

/// Cross-validation error summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CvValue {
    pub rmsecv: f64,
    pub msecv: f64,
    pub per_fold_mse: Vec<f64>,
    pub gradient: Option<Array1<f64>>,
}

fn weighted_mse(gamma: &Array1<f64>, e: &Array1<f64>) -> f64 {
    let mut num = 0.0;
    for (g, r) in gamma.iter().zip(e) {
        num += g * r * r;
    }
    num / gamma.sum()
}

fn summarize(per_fold_mse: Vec<f64>) -> CvValue {
    let msecv = per_fold_mse.iter().sum::<f64>() / per_fold_mse.len() as f64;
    CvValue {
        rmsecv: msecv.sqrt(),
        msecv,
        per_fold_mse,
        gradient: None,
    }
}

fn split(data: &Dataset, fold: &Fold) -> (Dataset, Dataset) {
    (data.select_objects(&fold.cal), data.select_objects(&fold.test))
}

fn with_fold<T>(f: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        SrcekError::FactorCount { requested, reason } => SrcekError::FactorCount {
            requested,
            reason: format!("fold {}: {reason}", f + 1),
        },
        other => other,
    })
}

/// Weighted RMSECV
/// `f = sqrt( (1/J) sum_j <e_j, Gamma_j e_j> / <1, Gamma_j 1> )`
/// where each fold's model is WPLS on the weighted calibration predictors.
pub fn weighted_rmsecv(
    data: &Dataset,
    plan: &CvPlan,
    l: usize,
    lambda: &WeightVector,
) -> Result<CvValue> {
    plan.check_for(data, l)?;
    let per_fold = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (cal, test) = split(data, fold);
            let e = with_fold(f, residual(&cal, &test, l, lambda))?;
            Ok(weighted_mse(&test.gamma, &e))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(per_fold))
}

/// [`weighted_rmsecv`] plus its gradient
/// `(1 / (f J)) sum_j (de_j/dlambda)^T Gamma_j e_j / <1, Gamma_j 1>`.
pub fn rmsecv_with_gradient(
    data: &Dataset,
    plan: &CvPlan,
    l: usize,
    lambda: &WeightVector,
) -> Result<CvValue> {
    let mut value = weighted_rmsecv(data, plan, l, lambda)?;
    if value.rmsecv == 0.0 {
        return Err(SrcekError::PerfectFit);
    }
    let parts = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (cal, test) = split(data, fold);
            let rb = with_fold(f, residual_with_jacobian(&cal, &test, l, lambda))?;
            let ge = &test.gamma * &rb.residual;
            Ok(rb.dresidual.t().dot(&ge) / test.gamma.sum())
        })
        .collect::<Result<Vec<Array1<f64>>>>()?;
    let mut grad = Array1::<f64>::zeros(lambda.len());
    for g in &parts {
        grad += g;
    }
    grad /= value.rmsecv * plan.len() as f64;
    value.gradient = Some(grad);
    Ok(value)
}

/// Mean squared error of prediction: the model is calibrated and tested on
/// all objects.
pub fn msep(data: &Dataset, l: usize, lambda: &WeightVector) -> Result<f64> {
    let plan = CvPlan::resubstitution(data.n_objects());
    Ok(weighted_rmsecv(data, &plan, l, lambda)?.msecv)
}

/// Cross-validation of the constant model that predicts every test object
/// by the weighted calibration mean.
pub fn trivial_model_cv(data: &Dataset, plan: &CvPlan) -> Result<CvValue> {
    plan.check_for(data, 0)?;
    let per_fold = plan
        .folds
        .iter()
        .map(|fold| {
            let (cal, test) = split(data, fold);
            let mean = cal.weighted_mean_y();
            let e = test.y.mapv(|v| v - mean);
            weighted_mse(&test.gamma, &e)
        })
        .collect();
    Ok(summarize(per_fold))
}
