use serde::Serialize;
use sparsevary::VertexBlock;

/// Training-set moments; a zero spread is replaced by one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    pub response_mean: f64,
    pub response_scale: f64,
}

fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = var.sqrt();
    (mean, if scale > 0.0 { scale } else { 1.0 })
}

impl Standardization {
    /// Population moments pooled over every vertex's rows.
    pub fn fit(blocks: &[VertexBlock<f64>]) -> Self {
        let dim = blocks.first().map_or(0, |b| b.x.ncols());
        let (feature_mean, feature_scale) = (0..dim)
            .map(|j| moments(blocks.iter().flat_map(move |b| (0..b.samples()).map(move |i| b.x.row(i)[j]))))
            .unzip();
        let (response_mean, response_scale) = moments(blocks.iter().flat_map(|b| b.y.iter().copied()));
        Self { feature_mean, feature_scale, response_mean, response_scale }
    }

    pub fn apply(&self, blocks: &mut [VertexBlock<f64>]) {
        for b in blocks {
            for i in 0..b.samples() {
                for (j, v) in b.x.row_mut(i).iter_mut().enumerate() {
                    *v = (*v - self.feature_mean[j]) / self.feature_scale[j];
                }
            }
            for y in &mut b.y {
                *y = (*y - self.response_mean) / self.response_scale;
            }
        }
    }
}
