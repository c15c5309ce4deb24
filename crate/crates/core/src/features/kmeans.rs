use rand::Rng;

/// Result of one k-means fit.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
    /// Seeding ran out of distinct points and duplicated a center.
    pub degenerate: bool,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lower index.
pub fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// k-means++ seeding: the first center uniformly, each next one with
/// probability proportional to its squared distance from the chosen set.
pub fn kmeans_plus_plus<R: Rng>(data: &[Vec<f64>], k: usize, rng: &mut R) -> (Vec<Vec<f64>>, bool) {
    let mut centers = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, &centers[0])).collect();
    let mut degenerate = false;
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            degenerate = true;
            rng.random_range(0..data.len())
        };
        let c = data[next].clone();
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    (centers, degenerate)
}

/// Lloyd iterations from k-means++ seeds. An empty cluster keeps its
/// previous centroid. `data` must hold at least one point.
pub fn kmeans<R: Rng>(data: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut R) -> KMeans {
    let dim = data[0].len();
    let (mut centroids, degenerate) = kmeans_plus_plus(data, k, rng);
    let mut assignments: Vec<usize> = data.iter().map(|x| nearest(&centroids, x)).collect();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        // Means are accumulated as offsets from each cluster's first member,
        // so a cluster of identical points keeps that point exactly.
        let mut anchor: Vec<Option<usize>> = vec![None; k];
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, (x, &a)) in data.iter().zip(&assignments).enumerate() {
            counts[a] += 1;
            let r = &data[*anchor[a].get_or_insert(i)];
            for ((s, v), r) in sums[a].iter_mut().zip(x).zip(r) {
                *s += v - r;
            }
        }
        for c in 0..k {
            if let Some(r) = anchor[c] {
                centroids[c] = sums[c]
                    .iter()
                    .zip(&data[r])
                    .map(|(s, r)| r + s / counts[c] as f64)
                    .collect();
            }
        }
        let next: Vec<usize> = data.iter().map(|x| nearest(&centroids, x)).collect();
        if next == assignments {
            break;
        }
        assignments = next;
    }
    let inertia = data
        .iter()
        .zip(&assignments)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum();
    KMeans {
        centroids,
        assignments,
        inertia,
        iterations,
        degenerate,
    }
}

/// Best of `restarts` k-means runs by inertia (earliest run on ties).
pub fn kmeans_restarts<R: Rng>(data: &[Vec<f64>], k: usize, max_iter: usize, restarts: usize, rng: &mut R) -> KMeans {
    let mut best = kmeans(data, k, max_iter, rng);
    for _ in 1..restarts {
        let run = kmeans(data, k, max_iter, rng);
        if run.inertia < best.inertia {
            best = run;
        }
    }
    best
}
