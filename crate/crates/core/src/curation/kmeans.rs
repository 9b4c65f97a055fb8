//! K-means over sample embeddings, plus cluster-coverage sampling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recognizer::{read_embeddings, write_embeddings, Embeddings};
use crate::rng::{shuffle, stream, weighted_index};

use super::apportion::capped_apportion;

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub k: usize,
    pub dim: usize,
    /// k x dim row-major centroid matrix.
    pub centroids: Vec<f64>,
    /// Sample id -> cluster index; every id maps to its nearest centroid.
    pub assignments: BTreeMap<String, usize>,
    /// Sum of squared distances to assigned centroids at convergence.
    pub inertia: f64,
    pub seed: u64,
    /// Inertia measured after each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn members(&self, cluster: usize) -> Vec<String> {
        self.assignments
            .iter()
            .filter(|(_, &c)| c == cluster)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn centroid(&self, cluster: usize) -> &[f64] {
        &self.centroids[cluster * self.dim..(cluster + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, chunk) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, chunk);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the
/// lowest cluster index and centroid sums accumulate in point order, so the
/// fit is a pure function of (embeddings, ids, k, seed). Empty clusters are
/// reseeded to the point currently farthest from its own centroid.
pub fn fit_kmeans(
    emb: &Embeddings,
    ids: &[String],
    k: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<ClusterModel> {
    let n = emb.count();
    let dim = emb.dim;
    if ids.len() != n {
        return Err(Error::data(format!("{n} embeddings but {} ids", ids.len())));
    }
    if k < 1 || k > n {
        return Err(Error::data(format!("k={k} outside 1..={n}")));
    }
    if emb.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite embedding"));
    }
    let points: Vec<f64> = emb.data.iter().map(|&v| v as f64).collect();
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    // k-means++: first centroid uniform, the rest D^2-weighted.
    let mut rng = stream(seed, "kmeans-seed", &[]);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            weighted_index(&d2, &mut rng)
        } else {
            rng.gen_range(0..n)
        };
        centroids.extend_from_slice(point(next));
        let added = centroids.len() / dim - 1;
        for i in 0..n {
            let d = sq_dist(point(i), &centroids[added * dim..(added + 1) * dim]);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    let mut inertia_history = Vec::new();
    let mut inertia = f64::INFINITY;
    for _ in 0..max_iters.max(1) {
        // Assignment step.
        let mut j = 0.0;
        for i in 0..n {
            let (c, d) = nearest(point(i), &centroids, dim);
            assignments[i] = c;
            j += d;
        }
        inertia = j;
        inertia_history.push(j);

        // Update step: per-cluster means, accumulated in point order.
        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, &v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        // Reseed empty clusters at the points farthest from their centroids.
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| {
                    let da = sq_dist(point(a), &centroids[assignments[a] * dim..(assignments[a] + 1) * dim]);
                    let db = sq_dist(point(b), &centroids[assignments[b] * dim..(assignments[b] + 1) * dim]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("n >= k > number of empty clusters");
            taken.push(far);
            counts[c] = 1;
            sums[c * dim..(c + 1) * dim].copy_from_slice(point(far));
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let target = &mut centroids[c * dim..(c + 1) * dim];
            let mut moved = 0.0;
            for (t, s) in target.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let new = s * inv;
                moved += (new - *t) * (new - *t);
                *t = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < tol {
            break;
        }
    }
    // Final assignment against the last centroids.
    let mut j = 0.0;
    for i in 0..n {
        let (c, d) = nearest(point(i), &centroids, dim);
        assignments[i] = c;
        j += d;
    }
    inertia = inertia.min(j);
    inertia_history.push(j);

    let assignments: BTreeMap<String, usize> = ids
        .iter()
        .cloned()
        .zip(assignments.iter().copied())
        .collect();
    if assignments.len() != n {
        return Err(Error::data("duplicate sample ids in embedding index"));
    }
    Ok(ClusterModel {
        k,
        dim,
        centroids,
        assignments,
        inertia,
        seed,
        inertia_history,
    })
}

/// Draws exactly `n` ids from `m` of the model's k clusters. The m clusters
/// are a prefix of one seeded cluster shuffle, so choices nest as m grows.
/// Quotas are equal shares over the chosen clusters, capped by cluster
/// population with proportional redistribution.
pub fn coverage_sample(model: &ClusterModel, m: usize, n: usize, seed: u64) -> Result<Vec<String>> {
    if m < 1 || m > model.k {
        return Err(Error::data(format!("m={m} outside 1..={}", model.k)));
    }
    if n == 0 {
        return Err(Error::data("sample size must be >= 1"));
    }
    let mut order: Vec<usize> = (0..model.k).collect();
    shuffle(&mut order, &mut stream(seed, "coverage-clusters", &[]));
    let chosen = &order[..m];

    let members: Vec<Vec<String>> = chosen.iter().map(|&c| model.members(c)).collect();
    let caps: Vec<usize> = members.iter().map(Vec::len).collect();
    let take = capped_apportion(n, &vec![1.0; m], &caps).map_err(|_| {
        Error::data(format!(
            "clusters {chosen:?} hold {} samples, need {n}",
            caps.iter().sum::<usize>()
        ))
    })?;
    let mut out = Vec::with_capacity(n);
    for ((cluster, mut ids), quota) in chosen.iter().zip(members).zip(take) {
        shuffle(&mut ids, &mut stream(seed, "coverage-draw", &[*cluster as u64]));
        out.extend(ids.into_iter().take(quota));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ClusterSidecar {
    k: usize,
    dim: usize,
    seed: u64,
    inertia: f64,
}

/// Writes `cluster.json` (k, dim, seed, inertia), `centroids.bin` (same
/// binary layout as embeddings), and `assignments.csv` (id,cluster).
pub fn save_cluster_model(dir: &Path, model: &ClusterModel) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sidecar = ClusterSidecar {
        k: model.k,
        dim: model.dim,
        seed: model.seed,
        inertia: model.inertia,
    };
    let path = dir.join("cluster.json");
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    let centroids = Embeddings {
        dim: model.dim,
        data: model.centroids.iter().map(|&v| v as f32).collect(),
    };
    write_embeddings(&dir.join("centroids.bin"), &centroids)?;

    let path = dir.join("assignments.csv");
    let mut csv = String::from("id,cluster\n");
    for (id, c) in &model.assignments {
        csv.push_str(&format!("{id},{c}\n"));
    }
    std::fs::File::create(&path)
        .and_then(|mut f| f.write_all(csv.as_bytes()))
        .map_err(|e| Error::io(&path, e))
}

/// Inverse of `save_cluster_model`. Centroids round-trip through f32, and
/// the recorded inertia is trusted rather than recomputed.
pub fn load_cluster_model(dir: &Path) -> Result<ClusterModel> {
    let path = dir.join("cluster.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let sidecar: ClusterSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let centroids = read_embeddings(&dir.join("centroids.bin"))?;
    if centroids.dim != sidecar.dim || centroids.count() != sidecar.k {
        return Err(Error::data(format!(
            "{}: centroid matrix is {}x{}, sidecar says {}x{}",
            dir.display(),
            centroids.count(),
            centroids.dim,
            sidecar.k,
            sidecar.dim
        )));
    }
    let path = dir.join("assignments.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut assignments = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "id,cluster" {
                return Err(Error::data(format!(
                    "{}: bad header {line:?}",
                    path.display()
                )));
            }
            continue;
        }
        let (id, cluster) = line.split_once(',').ok_or_else(|| {
            Error::data(format!("{}:{}: missing comma", path.display(), lineno + 1))
        })?;
        let cluster: usize = cluster.parse().map_err(|_| {
            Error::data(format!("{}:{}: bad cluster index", path.display(), lineno + 1))
        })?;
        if cluster >= sidecar.k {
            return Err(Error::data(format!(
                "{}:{}: cluster {cluster} out of range",
                path.display(),
                lineno + 1
            )));
        }
        assignments.insert(id.to_string(), cluster);
    }
    Ok(ClusterModel {
        k: sidecar.k,
        dim: sidecar.dim,
        centroids: centroids.data.iter().map(|&v| v as f64).collect(),
        assignments,
        inertia: sidecar.inertia,
        seed: sidecar.seed,
        inertia_history: Vec::new(),
    })
}

/// Agreement between two flat labelings, chance-corrected: 1.0 for identical
/// partitions, ~0 for independent ones.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0usize; ka * kb];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    let c2 = |v: usize| (v * v.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().map(|&v| c2(v)).sum();
    let row_sum: f64 = rows.iter().map(|&v| c2(v)).sum();
    let col_sum: f64 = cols.iter().map(|&v| c2(v)).sum();
    let expected = row_sum * col_sum / c2(n);
    let max = (row_sum + col_sum) / 2.0;
    if (max - expected).abs() < 1e-12 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
