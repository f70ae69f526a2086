use super::{Result, ShiftError};
use crate::model::{evaluate, Parameters};
use crate::spectro::ActivitySample;
use crate::Scalar;

/// Per true class, the mean predicted softmax vector; classes without
/// samples get an all-zero row.
pub fn mean_softmax_by_class(probs: &[Vec<f64>], labels: &[usize], k: usize) -> Result<Vec<Vec<f64>>> {
    if probs.len() != labels.len() {
        return Err(ShiftError::Shape(format!("{} rows for {} labels", probs.len(), labels.len())));
    }
    let mut sums = vec![vec![0.0; k]; k];
    let mut counts = vec![0usize; k];
    for (p, &y) in probs.iter().zip(labels) {
        if p.len() != k || y >= k {
            return Err(ShiftError::Shape(format!("row of {} with label {y} for {k} classes", p.len())));
        }
        for (s, v) in sums[y].iter_mut().zip(p) {
            *s += v;
        }
        counts[y] += 1;
    }
    for (row, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            row.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    Ok(sums)
}

/// `P(y | X)` aggregated per true class for a trained model.
pub fn output_distribution<S: Scalar>(params: &Parameters<S>, samples: &[&ActivitySample<S>]) -> Result<Vec<Vec<f64>>> {
    Ok(evaluate(params, samples)?.mean_softmax)
}

fn xlogx_over(p: f64, m: f64) -> f64 {
    if p > 0.0 {
        p * (p / m).ln()
    } else {
        0.0
    }
}

/// Jensen-Shannon divergence in nats.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        total += 0.5 * (xlogx_over(a, m) + xlogx_over(b, m));
    }
    total.max(0.0)
}

fn check_probability(rows: &[Vec<f64>]) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        let s: f64 = r.iter().sum();
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (s != 0.0 && (s - 1.0).abs() > 1e-6) {
            return Err(ShiftError::NotProbability(i));
        }
    }
    Ok(())
}

/// Mean per-class JS divergence. Classes whose row is empty on either side
/// are skipped.
pub fn distribution_divergence(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(ShiftError::Shape("distributions cover different classes".into()));
    }
    check_probability(a)?;
    check_probability(b)?;
    let (mut total, mut n) = (0.0, 0usize);
    for (p, q) in a.iter().zip(b) {
        if p.iter().sum::<f64>() == 0.0 || q.iter().sum::<f64>() == 0.0 {
            continue;
        }
        total += js_divergence(p, q);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Mean silhouette coefficient of 2-D points; members of singleton groups score 0.
pub fn cluster_separability(points: &[f64], groups: &[usize]) -> Result<f64> {
    let n = groups.len();
    if points.len() != 2 * n {
        return Err(ShiftError::Shape(format!("{} coordinates for {n} points", points.len())));
    }
    let mut ids: Vec<usize> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(ShiftError::NeedTwoGroups);
    }
    let index = |g: usize| ids.binary_search(&g).unwrap();
    let sizes = ids.iter().map(|&g| groups.iter().filter(|&&x| x == g).count()).collect::<Vec<_>>();
    let mut total = 0.0;
    let mut sums = vec![0.0; ids.len()];
    for i in 0..n {
        let own = index(groups[i]);
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                let (dx, dy) = (points[2 * i] - points[2 * j], points[2 * i + 1] - points[2 * j + 1]);
                sums[index(groups[j])] += (dx * dx + dy * dy).sqrt();
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..ids.len()).filter(|&g| g != own).map(|g| sums[g] / sizes[g] as f64).fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        total += if denom > 0.0 { (b - a) / denom } else { 0.0 };
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_prob(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    fn kl(p: &[f64], q: &[f64]) -> f64 {
        p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
    }

    #[test]
    fn divergence_bounds_and_symmetry() {
        let eye: Vec<Vec<f64>> = (0..10).map(|c| (0..10).map(|j| if j == c { 1.0 } else { 0.0 }).collect()).collect();
        assert_eq!(distribution_divergence(&eye, &eye).unwrap(), 0.0);
        let shifted: Vec<Vec<f64>> = (0..10).map(|c| eye[(c + 1) % 10].clone()).collect();
        assert!((distribution_divergence(&eye, &shifted).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<Vec<f64>> = (0..10).map(|_| random_prob(&mut rng, 10)).collect();
        let b: Vec<Vec<f64>> = (0..10).map(|_| random_prob(&mut rng, 10)).collect();
        let d = distribution_divergence(&a, &b).unwrap();
        assert_eq!(d, distribution_divergence(&b, &a).unwrap());
        let brute: f64 = a
            .iter()
            .zip(&b)
            .map(|(p, q)| {
                let m: Vec<f64> = p.iter().zip(q).map(|(x, y)| 0.5 * (x + y)).collect();
                0.5 * kl(p, &m) + 0.5 * kl(q, &m)
            })
            .sum::<f64>()
            / 10.0;
        assert!((d - brute).abs() < 1e-12);
        assert!(d > 0.0);
        assert!(distribution_divergence(&a, &vec![vec![2.0; 10]; 10]).is_err());
    }

    #[test]
    fn mean_softmax_aggregates_per_class() {
        let probs = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(mean_softmax_by_class(&probs, &[0, 1, 0], 2).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let uniform = vec![vec![0.1; 10]; 20];
        let labels: Vec<usize> = (0..20).map(|i| i % 10).collect();
        for row in mean_softmax_by_class(&uniform, &labels, 10).unwrap() {
            assert!(row.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn silhouette_separated_and_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts = Vec::new();
        let mut groups = Vec::new();
        for g in 0..2 {
            for _ in 0..20 {
                pts.push(100.0 * g as f64 + 0.01 * rng.sample::<f64, _>(StandardNormal));
                pts.push(0.01 * rng.sample::<f64, _>(StandardNormal));
                groups.push(g);
            }
        }
        assert!(cluster_separability(&pts, &groups).unwrap() > 0.95);
        let blob: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let labels: Vec<usize> = (0..200).map(|_| rng.gen_range(0..3)).collect();
        assert!(cluster_separability(&blob, &labels).unwrap().abs() < 0.1);
        assert!(matches!(cluster_separability(&blob, &vec![1; 200]), Err(ShiftError::NeedTwoGroups)));
    }

    #[test]
    fn silhouette_matches_brute_force() {
        let pts: [f64; 10] = [0.0, 0.0, 1.0, 0.0, 0.0, 3.0, 4.0, 4.0, 5.0, 4.0];
        let g = [0, 0, 1, 1, 2];
        let d = |i: usize, j: usize| ((pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2)).sqrt();
        let s = |i: usize, own: &[usize], others: &[&[usize]]| {
            let a = own.iter().filter(|&&j| j != i).map(|&j| d(i, j)).sum::<f64>() / (own.len() - 1) as f64;
            let b = others.iter().map(|o| o.iter().map(|&j| d(i, j)).sum::<f64>() / o.len() as f64).fold(f64::INFINITY, f64::min);
            (b - a) / a.max(b)
        };
        let (g0, g1, g2): (&[usize], &[usize], &[usize]) = (&[0, 1], &[2, 3], &[4]);
        let expect = (s(0, g0, &[g1, g2]) + s(1, g0, &[g1, g2]) + s(2, g1, &[g0, g2]) + s(3, g1, &[g0, g2])) / 5.0;
        assert!((cluster_separability(&pts, &g).unwrap() - expect).abs() < 1e-12);
    }
}
