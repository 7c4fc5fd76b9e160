//! Lloyd's k-means with k-means++ seeding, used by the VPO baseline.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Point2, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Point2>,
    pub labels: Vec<usize>,
    pub iterations: usize,
    /// Within-cluster sum of squares after every Lloyd iteration.
    pub sse_trace: Vec<f64>,
}

fn nearest(p: &Point2, centroids: &[Point2]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, p.dist_sq(c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn seed_centroids(points: &[Point2], k: usize, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())]];
    while centroids.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.gen_range(0..points.len()),
        };
        centroids.push(points[next]);
    }
    centroids
}

/// Cluster `points` into `k` groups. Stops when the labels stop changing or
/// after `max_iters` Lloyd iterations. An empty cluster keeps its centroid.
pub fn kmeans(points: &[Point2], k: usize, seed: u64, max_iters: usize) -> Result<KMeans> {
    if k == 0 || k > points.len() {
        return Err(Error::invalid("k", format!("need 1 <= k <= {} points, got {k}", points.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
    let mut sse_trace = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l].0 += p.x;
            sums[l].1 += p.y;
            sums[l].2 += 1;
        }
        for (c, &(sx, sy, n)) in centroids.iter_mut().zip(&sums) {
            if n > 0 {
                *c = Point2::new(sx / n as f64, sy / n as f64);
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        sse_trace.push(points.iter().zip(&next).map(|(p, &l)| p.dist_sq(&centroids[l])).sum());
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok(KMeans {
        centroids,
        labels,
        iterations,
        sse_trace,
    })
}
