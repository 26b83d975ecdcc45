//! One-vs-rest multiclass SVM with k-fold grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::evaluate_predictions;
use super::svm::{self, BinaryMachine, Kernel, KernelMatrix, SmoParams};
use super::Label;
use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(default = "default_kernels")]
    pub kernels: Vec<KernelKind>,
    #[serde(default = "default_c")]
    pub c_values: Vec<f64>,
    /// Only used by the rbf kernel.
    #[serde(default = "default_gamma")]
    pub gamma_values: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_kernels() -> Vec<KernelKind> {
    vec![KernelKind::Rbf]
}
fn default_c() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0]
}
fn default_gamma() -> Vec<f64> {
    vec![0.001, 0.01, 0.1, 1.0]
}
fn default_folds() -> usize {
    5
}
fn default_tol() -> f64 {
    1e-3
}
fn default_max_iter() -> usize {
    100_000
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            kernels: default_kernels(),
            c_values: default_c(),
            gamma_values: default_gamma(),
            folds: default_folds(),
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

impl GridSpec {
    /// Grid cells ordered by (C, gamma) ascending, the linear kernel counting
    /// as gamma 0. The first cell with the best score wins.
    pub fn cells(&self) -> Vec<(Kernel, f64)> {
        let mut cells = Vec::new();
        for &c in &self.c_values {
            for kind in &self.kernels {
                match kind {
                    KernelKind::Linear => cells.push((Kernel::Linear, c)),
                    KernelKind::Rbf => {
                        for &gamma in &self.gamma_values {
                            cells.push((Kernel::Rbf { gamma }, c));
                        }
                    }
                }
            }
        }
        cells.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then(a.0.gamma_or_zero().total_cmp(&b.0.gamma_or_zero()))
        });
        cells.dedup();
        cells
    }

    fn validate(&self) -> Result<()> {
        if self.kernels.is_empty() || self.c_values.is_empty() {
            return Err(Error::invalid("grid needs at least one kernel and one C value"));
        }
        if self.kernels.contains(&KernelKind::Rbf) && self.gamma_values.is_empty() {
            return Err(Error::invalid("rbf grid needs at least one gamma value"));
        }
        if self.c_values.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("C values must be positive and finite"));
        }
        if self.gamma_values.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::invalid("gamma values must be positive and finite"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::invalid("tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Labeled feature vectors sharing one provider tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub provider_tag: String,
}

impl TrainingSet {
    pub fn from_embeddings(vectors: &[EmbeddingVector], labels: &[Label]) -> Result<Self> {
        let tag = vectors
            .first()
            .map(|v| v.provider_tag.clone())
            .ok_or_else(|| Error::invalid("empty training set"))?;
        if vectors.iter().any(|v| v.provider_tag != tag) {
            return Err(Error::invalid("training vectors come from different providers"));
        }
        Ok(TrainingSet {
            features: vectors.iter().map(|v| v.values.clone()).collect(),
            labels: labels.to_vec(),
            provider_tag: tag,
        })
    }

    fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub kernel: Kernel,
    #[serde(rename = "C")]
    pub c: f64,
    pub mean_macro_f1: f64,
    pub fold_macro_f1: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub grid: GridSpec,
    pub cells: Vec<CellScore>,
    pub train_size: usize,
    /// Per class, in `Label::ALL` order.
    pub iterations: Vec<usize>,
    pub converged: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMachine {
    pub label: Label,
    #[serde(flatten)]
    pub machine: BinaryMachine,
}

/// Trained one-vs-rest model. Serialized as versioned JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub format_version: u32,
    pub kernel: Kernel,
    #[serde(rename = "C")]
    pub c: f64,
    pub dim: usize,
    pub provider_tag: String,
    /// One machine per class in `Label::ALL` order.
    pub machines: Vec<ClassMachine>,
    pub metadata: Option<TrainingMetadata>,
}

impl SvmModel {
    pub fn from_json(data: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(data)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(model.format_version));
        }
        let order_ok = model.machines.len() == 3
            && model.machines.iter().zip(Label::ALL).all(|(m, l)| m.label == l);
        if !order_ok {
            return Err(Error::invalid("model must hold one machine per class in fixed order"));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn decision_values(&self, x: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (slot, m) in out.iter_mut().zip(&self.machines) {
            *slot = m.machine.decision(self.kernel, x);
        }
        out
    }

    /// Argmax of the one-vs-rest decision values; exact ties go to the
    /// earlier class in `Label::ALL`.
    pub fn classify_features(&self, x: &[f64]) -> Label {
        argmax_label(&self.decision_values(x))
    }

    pub fn classify(&self, v: &EmbeddingVector) -> Result<Label> {
        if v.provider_tag != self.provider_tag {
            return Err(Error::invalid(format!(
                "vector from provider {:?}, model trained against {:?}",
                v.provider_tag, self.provider_tag
            )));
        }
        if v.dim() != self.dim {
            return Err(Error::invalid(format!(
                "vector dim {} does not match model dim {}",
                v.dim(),
                self.dim
            )));
        }
        Ok(self.classify_features(&v.values))
    }
}

fn argmax_label(values: &[f64; 3]) -> Label {
    let mut best = 0;
    for c in 1..3 {
        if values[c] > values[best] {
            best = c;
        }
    }
    Label::ALL[best]
}

/// Stratified fold assignment: within each class, the i-th sample (in input
/// order) goes to fold `i % k`. Returns the validation indices per fold.
pub fn stratified_folds(labels: &[Label], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); k];
    let mut seen = [0usize; 3];
    for (i, l) in labels.iter().enumerate() {
        let c = l.index();
        folds[seen[c] % k].push(i);
        seen[c] += 1;
    }
    folds
}

struct OvrFit {
    /// Per class: (coefficients over `train_idx`, bias), or a constant answer.
    machines: Vec<(Vec<f64>, f64)>,
    iterations: Vec<usize>,
    converged: bool,
}

/// Trains the three one-vs-rest machines over `idx` using a precomputed Gram
/// matrix.
fn fit_ovr(gram: &KernelMatrix, labels: &[Label], idx: &[usize], kernel: Kernel, params: &SmoParams) -> OvrFit {
    let k = KernelMatrix::from_gram(gram, idx, kernel);
    let mut machines = Vec::with_capacity(3);
    let mut iterations = Vec::with_capacity(3);
    let mut converged = true;
    for class in Label::ALL {
        let y: Vec<f64> = idx
            .iter()
            .map(|&i| if labels[i] == class { 1.0 } else { -1.0 })
            .collect();
        let positives = y.iter().filter(|&&v| v > 0.0).count();
        if positives == 0 || positives == y.len() {
            let sign = if positives == 0 { -1.0 } else { 1.0 };
            machines.push((vec![0.0; idx.len()], sign));
            iterations.push(0);
            continue;
        }
        let sol = svm::solve(&k, &y, params);
        converged &= sol.converged;
        iterations.push(sol.iterations);
        let coef: Vec<f64> = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).collect();
        machines.push((coef, -sol.rho));
    }
    OvrFit {
        machines,
        iterations,
        converged,
    }
}

fn predict_from_gram(gram: &KernelMatrix, fit: &OvrFit, train_idx: &[usize], kernel: Kernel, x: usize) -> Label {
    let mut values = [0.0; 3];
    for (slot, (coef, bias)) in values.iter_mut().zip(&fit.machines) {
        let mut s = *bias;
        for (&t, &c) in train_idx.iter().zip(coef) {
            if c != 0.0 {
                s += c * kernel.from_inner(gram.get(t, t), gram.get(x, x), gram.get(t, x));
            }
        }
        *slot = s;
    }
    argmax_label(&values)
}

/// Grid search with stratified k-fold cross-validation (selection metric:
/// mean per-fold macro-F1), then a final fit of the best cell on all data.
pub fn train(set: &TrainingSet, grid: &GridSpec) -> Result<SvmModel> {
    grid.validate()?;
    let n = set.features.len();
    if n == 0 || n != set.labels.len() {
        return Err(Error::invalid("training set is empty or labels do not match features"));
    }
    let dim = set.features[0].len();
    if dim == 0 || set.features.iter().any(|x| x.len() != dim) {
        return Err(Error::invalid("training vectors must share a positive dimension"));
    }
    if set.features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training vectors contain non-finite values"));
    }
    let counts = set.class_counts();
    let present: Vec<usize> = counts.iter().copied().filter(|&c| c > 0).collect();
    if present.len() < 2 {
        return Err(Error::invalid("training data must contain at least two classes"));
    }
    let min_count = *present.iter().min().expect("two classes present");
    if grid.folds < 2 || grid.folds > min_count {
        return Err(Error::invalid(format!(
            "folds must be in [2, {min_count}] (smallest class size), got {}",
            grid.folds
        )));
    }

    let gram = {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| svm::dot(&set.features[i], &set.features[j])).collect())
            .collect();
        KernelMatrix::from_fn(n, |i, j| rows[i][j])
    };
    let folds = stratified_folds(&set.labels, grid.folds);
    let splits: Vec<(Vec<usize>, Vec<usize>)> = folds
        .iter()
        .map(|val| {
            let mut in_val = vec![false; n];
            val.iter().for_each(|&i| in_val[i] = true);
            let train: Vec<usize> = (0..n).filter(|&i| !in_val[i]).collect();
            (train, val.clone())
        })
        .collect();

    let cells = grid.cells();
    let scores: Vec<CellScore> = cells
        .par_iter()
        .map(|&(kernel, c)| {
            let params = SmoParams { c, tol: grid.tol, max_iter: grid.max_iter };
            let fold_macro_f1: Vec<f64> = splits
                .iter()
                .map(|(train_idx, val_idx)| {
                    let fit = fit_ovr(&gram, &set.labels, train_idx, kernel, &params);
                    let predicted: Vec<Label> = val_idx
                        .iter()
                        .map(|&v| predict_from_gram(&gram, &fit, train_idx, kernel, v))
                        .collect();
                    let truth: Vec<Label> = val_idx.iter().map(|&v| set.labels[v]).collect();
                    evaluate_predictions(&truth, &predicted)
                        .map(|r| r.macro_f1)
                        .unwrap_or(0.0)
                })
                .collect();
            let mean = fold_macro_f1.iter().sum::<f64>() / fold_macro_f1.len() as f64;
            CellScore {
                kernel,
                c,
                mean_macro_f1: mean,
                fold_macro_f1,
            }
        })
        .collect();

    // Cells are sorted by (C, gamma); strict `>` keeps the first of any tie.
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_macro_f1 > scores[best].mean_macro_f1 {
            best = i;
        }
    }
    let (kernel, c) = (scores[best].kernel, scores[best].c);
    let params = SmoParams { c, tol: grid.tol, max_iter: grid.max_iter };
    let all: Vec<usize> = (0..n).collect();
    let fit = fit_ovr(&gram, &set.labels, &all, kernel, &params);

    let machines = Label::ALL
        .iter()
        .zip(&fit.machines)
        .map(|(&label, (coef, bias))| {
            let mut support_vectors = Vec::new();
            let mut coefficients = Vec::new();
            for (t, &cf) in coef.iter().enumerate() {
                if cf != 0.0 {
                    support_vectors.push(set.features[t].clone());
                    coefficients.push(cf);
                }
            }
            ClassMachine {
                label,
                machine: BinaryMachine {
                    support_vectors,
                    coefficients,
                    bias: *bias,
                },
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if !fit.converged {
        warnings.push(format!(
            "SMO stopped at the iteration cap ({}) before the KKT gap fell below {}",
            grid.max_iter, grid.tol
        ));
        log::warn!("{}", warnings[0]);
    }
    Ok(SvmModel {
        format_version: MODEL_FORMAT_VERSION,
        kernel,
        c,
        dim,
        provider_tag: set.provider_tag.clone(),
        machines,
        metadata: Some(TrainingMetadata {
            grid: grid.clone(),
            cells: scores,
            train_size: n,
            iterations: fit.iterations,
            converged: fit.converged,
            warnings,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::*;

    fn tiny() -> TrainingSet {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            let d = i as f64 * 0.1;
            features.push(vec![3.0 + d, 0.0]);
            labels.push(Resolved);
            features.push(vec![-3.0 - d, 0.0]);
            labels.push(Finding);
        }
        TrainingSet { features, labels, provider_tag: "fixture".into() }
    }

    #[test]
    fn single_class_is_rejected() {
        let mut set = tiny();
        set.labels.iter_mut().for_each(|l| *l = Resolved);
        assert!(matches!(train(&set, &GridSpec::default()), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn folds_bounded_by_smallest_class() {
        let grid = GridSpec { folds: 7, ..Default::default() };
        assert!(train(&tiny(), &grid).is_err());
        let grid = GridSpec { folds: 1, ..Default::default() };
        assert!(train(&tiny(), &grid).is_err());
    }

    #[test]
    fn absent_class_gets_constant_negative_machine() {
        let grid = GridSpec { folds: 3, c_values: vec![1.0], gamma_values: vec![0.1], ..Default::default() };
        let model = train(&tiny(), &grid).unwrap();
        let neutral = &model.machines[Neutral.index()].machine;
        assert!(neutral.support_vectors.is_empty());
        assert_eq!(neutral.bias, -1.0);
        assert_eq!(model.classify_features(&[3.2, 0.0]), Resolved);
        assert_eq!(model.classify_features(&[-3.2, 0.0]), Finding);
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let labels = vec![Resolved, Resolved, Neutral, Resolved, Neutral, Finding, Finding, Resolved];
        let folds = stratified_folds(&labels, 2);
        assert_eq!(folds, vec![vec![0, 2, 3, 5], vec![1, 4, 6, 7]]);
    }

    #[test]
    fn grid_cells_sorted_with_linear_first() {
        let grid = GridSpec {
            kernels: vec![KernelKind::Rbf, KernelKind::Linear],
            c_values: vec![10.0, 1.0],
            gamma_values: vec![0.5, 0.1],
            ..Default::default()
        };
        let cells = grid.cells();
        assert_eq!(cells[0], (Kernel::Linear, 1.0));
        assert_eq!(cells[1], (Kernel::Rbf { gamma: 0.1 }, 1.0));
        assert_eq!(cells[3], (Kernel::Linear, 10.0));
        assert_eq!(cells.len(), 6);
    }

    #[test]
    fn tie_break_follows_class_order() {
        assert_eq!(argmax_label(&[0.5, 0.5, 0.5]), Resolved);
        assert_eq!(argmax_label(&[0.1, 0.7, 0.7]), Neutral);
        assert_eq!(argmax_label(&[-1.0, -2.0, -0.5]), Finding);
    }

    #[test]
    fn model_json_round_trip_and_version_check() {
        let grid = GridSpec { folds: 3, c_values: vec![1.0], gamma_values: vec![0.1], ..Default::default() };
        let model = train(&tiny(), &grid).unwrap();
        let json = model.to_json().unwrap();
        assert_eq!(SvmModel::from_json(&json).unwrap(), model);
        let bumped = json.replacen("\"format_version\": 1", "\"format_version\": 9", 1);
        assert!(matches!(SvmModel::from_json(&bumped), Err(Error::ModelVersion(9))));
    }

    #[test]
    fn classify_checks_provider_tag() {
        let grid = GridSpec { folds: 3, c_values: vec![1.0], gamma_values: vec![0.1], ..Default::default() };
        let model = train(&tiny(), &grid).unwrap();
        let v = EmbeddingVector::normalized(vec![1.0, 0.0], "other");
        assert!(model.classify(&v).is_err());
        let v = EmbeddingVector::normalized(vec![1.0, 0.0], "fixture");
        assert_eq!(model.classify(&v).unwrap(), Resolved);
    }
}
