//! Deliberately naive reference implementations.

use std::collections::BTreeMap;

use qdc::scalar::squared_distance;

pub fn qd(fitness: &[f64], labels: &[usize], n_clusters: usize) -> f64 {
    if fitness.is_empty() {
        return 0.0;
    }
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..fitness.len() {
        let e = best.entry(labels[i]).or_insert(f64::NEG_INFINITY);
        if fitness[i] > *e {
            *e = fitness[i];
        }
    }
    let vals: Vec<f64> = best.values().copied().collect();
    let mut lo = vals[0];
    let mut hi = vals[0];
    for &v in &vals {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    let mut total = 0.0;
    for c in 0..n_clusters {
        if let Some(&f) = best.get(&c) {
            total += if hi == lo { 1.0 } else { (f - lo) / (hi - lo) };
        }
    }
    total / n_clusters as f64
}

pub fn coverage(labels: &[usize], n_clusters: usize) -> f64 {
    let mut occupied = 0;
    for c in 0..n_clusters {
        if labels.contains(&c) {
            occupied += 1;
        }
    }
    100.0 * occupied as f64 / n_clusters as f64
}

pub fn max(fitness: &[f64]) -> f64 {
    let mut sorted = fitness.to_vec();
    sorted.sort_by(f64::total_cmp);
    *sorted.last().unwrap()
}

pub fn sparseness(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = Vec::new();
            for (j, q) in points.iter().enumerate() {
                if i != j {
                    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum();
                    d.push(s.sqrt());
                }
            }
            d.sort_by(f64::total_cmp);
            d[..k].iter().sum::<f64>() / k as f64
        })
        .collect()
}

/// Minimum within-cluster sum of squares over every assignment of the points
/// to `k` non-empty clusters, with the optimal labels.
pub fn brute_force_partition(points: &[Vec<f64>], k: usize) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = (f64::INFINITY, labels.clone());
    let total = k.pow(n as u32);
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut sse = 0.0;
        let mut nonempty = true;
        for j in 0..k {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == j)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                nonempty = false;
                break;
            }
            let dim = members[0].len();
            let mean: Vec<f64> = (0..dim)
                .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
                .collect();
            sse += members
                .iter()
                .map(|p| squared_distance(p, &mean))
                .sum::<f64>();
        }
        if nonempty && sse < best.0 {
            best = (sse, labels.clone());
        }
    }
    best
}

pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    cov / (vx * vy).sqrt()
}
