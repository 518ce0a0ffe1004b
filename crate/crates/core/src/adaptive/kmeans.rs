use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_LLOYD_ITERATIONS: usize = 100;

/// k-means model in z-scored coordinates. Centroids are sorted
/// lexicographically so cluster ids do not depend on initialization order.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(centroids: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(centroid, z);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

impl Clustering {
    /// k-means++ seeding followed by Lloyd iterations. Fewer than `k`
    /// centroids are returned when the data has fewer distinct points.
    pub fn fit(points: &[&[f64]], k: usize, seed: u64) -> Self {
        let dim = points[0].len();
        let n = points.len() as f64;
        let means: Vec<f64> = (0..dim).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let stds: Vec<f64> = (0..dim)
            .map(|j| {
                let s = (points.iter().map(|p| (p[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt();
                if s > 0.0 { s } else { 1.0 }
            })
            .collect();
        let z: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().enumerate().map(|(j, v)| (v - means[j]) / stds[j]).collect())
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut centroids = vec![z[rng.random_range(0..z.len())].clone()];
        while centroids.len() < k {
            let d: Vec<f64> = z.iter().map(|p| dist2(&centroids[nearest(&centroids, p)], p)).collect();
            let total: f64 = d.iter().sum();
            if !(total > 0.0) {
                break;
            }
            let mut u = rng.random::<f64>() * total;
            let mut pick = d.iter().rposition(|&v| v > 0.0).unwrap();
            for (i, &v) in d.iter().enumerate() {
                if v > 0.0 && u < v {
                    pick = i;
                    break;
                }
                u -= v;
            }
            centroids.push(z[pick].clone());
        }

        let mut labels: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
        for _ in 0..MAX_LLOYD_ITERATIONS {
            for (c, centroid) in centroids.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = z.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                if members.is_empty() {
                    continue;
                }
                let m = members.len() as f64;
                *centroid = (0..dim).map(|j| members.iter().map(|p| p[j]).sum::<f64>() / m).collect();
            }
            let next: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
            if next == labels {
                break;
            }
            labels = next;
        }
        centroids.sort_by(|a, b| {
            a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });
        centroids.dedup();
        Self { means, stds, centroids }
    }

    pub fn standardize(&self, point: &[f64]) -> Vec<f64> {
        point.iter().enumerate().map(|(j, v)| (v - self.means[j]) / self.stds[j]).collect()
    }

    pub fn assign(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, &self.standardize(point))
    }
}
