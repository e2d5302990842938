use std::path::PathBuf;

use hsi_core::classify::{
    kmeans, knn_classify, lda_fit, lda_predict, split, ClassificationMetrics, DistanceMetric,
    LabelMap, SplitSpec,
};
use hsi_core::envi::DataType;
use hsi_core::HsiError;
use serde::Serialize;

use super::{labels_cube, quicklook_labels, read_cube, read_labels, settings, Ctx};

settings!(Settings {
    /// Feature cube; defaults to the reduce output in the same root.
    input,
    /// Ground-truth label map; defaults to the synth labels.
    labels,
    /// `knn`, `lda` or `kmeans`.
    method,
    /// Neighbours voting in `knn`.
    neighbors,
    /// `euclidean` or `spectral_angle`.
    metric,
    /// Fraction of labeled pixels used for training.
    train_fraction,
    stratified,
    /// Cluster count for `kmeans`; defaults to the class count.
    clusters,
    max_iters,
});

pub const SPLIT: &str = "split.json";

#[derive(Debug, Serialize)]
struct Options {
    input: PathBuf,
    labels: PathBuf,
    method: String,
    neighbors: usize,
    metric: String,
    train_fraction: f64,
    stratified: bool,
    clusters: Option<usize>,
    max_iters: usize,
    seed: u64,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct SplitFile {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct Metrics {
    method: String,
    train_pixels: usize,
    test_pixels: usize,
    /// Scores on the test pixels only.
    #[serde(flatten)]
    test: ClassificationMetrics,
}

/// Maps each cluster to the most frequent training label among its
/// members (ties to the lower class). Clusters without training pixels get
/// the most frequent training label overall.
fn label_clusters(
    assign: &[usize],
    k: usize,
    labels: &[u32],
    train: &[usize],
    classes: usize,
) -> Vec<u32> {
    let mut votes = vec![vec![0usize; classes + 1]; k];
    let mut overall = vec![0usize; classes + 1];
    for &i in train {
        votes[assign[i]][labels[i] as usize] += 1;
        overall[labels[i] as usize] += 1;
    }
    let argmax = |v: &[usize]| {
        (1..=classes)
            .max_by(|&a, &b| v[a].cmp(&v[b]).then(b.cmp(&a)))
            .unwrap_or(1) as u32
    };
    let fallback = argmax(&overall);
    votes
        .iter()
        .map(|v| {
            if v.iter().sum::<usize>() == 0 {
                fallback
            } else {
                argmax(v)
            }
        })
        .collect()
}

pub fn run(ctx: &Ctx) -> anyhow::Result<()> {
    let p = &ctx.params;
    let opts = Options {
        input: ctx.path_or("input", ctx.stage("reduce").join("components.hdr"))?,
        labels: ctx.path_or("labels", ctx.stage("synth").join("labels.hdr"))?,
        method: p.choice("method", &["knn", "lda", "kmeans"], "knn")?,
        neighbors: p.get_or("neighbors", 5)?,
        metric: p.choice("metric", &["euclidean", "spectral_angle"], "euclidean")?,
        train_fraction: p.get_or("train_fraction", 0.1)?,
        stratified: p.get_or("stratified", true)?,
        clusters: p.get("clusters")?,
        max_iters: p.get_or("max_iters", 100)?,
        seed: ctx.seed,
    };
    let mut out = ctx.open("classify")?;
    let cube = read_cube(&mut out, &opts.input)?;
    let truth = read_labels(&mut out, &opts.labels)?;
    if (truth.height, truth.width) != (cube.height(), cube.width()) {
        return Err(HsiError::ShapeMismatch(format!(
            "labels are {}x{}, cube is {}x{}",
            truth.height,
            truth.width,
            cube.height(),
            cube.width()
        ))
        .into());
    }
    let spec = SplitSpec {
        train_fraction: opts.train_fraction,
        seed: opts.seed,
        stratified: opts.stratified,
    };
    let (train, test) = split(&truth, &spec)?;
    let classes = truth.classes();
    let x = cube.to_matrix();
    let train_x = x.select_columns(&train);
    let train_y: Vec<u32> = train.iter().map(|&i| truth.labels[i]).collect();

    let predictions: Vec<u32> = match opts.method.as_str() {
        "knn" => {
            let metric = match opts.metric.as_str() {
                "spectral_angle" => DistanceMetric::SpectralAngle,
                _ => DistanceMetric::Euclidean,
            };
            knn_classify(&train_x, &train_y, &x, opts.neighbors, metric)?
        }
        "lda" => lda_predict(&lda_fit(&train_x, &train_y)?, &x)?,
        _ => {
            let k = opts.clusters.unwrap_or(classes);
            let res = kmeans(&x, k, opts.max_iters, opts.seed)?;
            let map = label_clusters(&res.assignments, k, &truth.labels, &train, classes);
            res.assignments.iter().map(|&a| map[a]).collect()
        }
    };

    let pred_test: Vec<u32> = test.iter().map(|&i| predictions[i]).collect();
    let truth_test: Vec<u32> = test.iter().map(|&i| truth.labels[i]).collect();
    let scores = ClassificationMetrics::compute(&pred_test, &truth_test, classes)?;

    let map = LabelMap::new(truth.height, truth.width, predictions)?;
    out.write_cube("predictions", &labels_cube(&map)?, DataType::U16)?;
    quicklook_labels(&mut out, "predictions.pgm", &map)?;
    out.write_json(
        SPLIT,
        &SplitFile {
            train: train.clone(),
            test: test.clone(),
        },
    )?;

    let metrics = Metrics {
        method: opts.method.clone(),
        train_pixels: train.len(),
        test_pixels: test.len(),
        test: scores,
    };
    ctx.finish(out, "classify", &opts, &metrics)
}
