use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 50;
const RESTARTS: usize = 8;

/// Result of a 2-means clustering.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoMeans {
    /// Cluster index (0 or 1) per input point.
    pub assignment: Vec<u8>,
    pub centers: [[f64; 3]; 2],
    /// Sum of squared distances to assigned centers.
    pub inertia: f64,
}

#[inline]
fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// 2-means with k-means++ seeding, keeping the lowest-inertia of several restarts.
pub fn two_means(points: &[[f64; 3]], seed: u64) -> Result<TwoMeans> {
    if points.len() < 2 {
        return Err(Error::DegenerateFeatures);
    }
    let spread = points.iter().map(|p| dist2(p, &points[0])).fold(0.0, f64::max);
    if spread <= 1e-18 {
        return Err(Error::DegenerateFeatures);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<TwoMeans> = None;
    for _ in 0..RESTARTS {
        let run = hartigan(points, lloyd(points, plus_plus(points, &mut rng)));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn plus_plus(points: &[[f64; 3]], rng: &mut ChaCha8Rng) -> [[f64; 3]; 2] {
    let first = points[rng.gen_range(0..points.len())];
    let weights: Vec<f64> = points.iter().map(|p| dist2(p, &first)).collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    let mut second = *points
        .iter()
        .zip(&weights)
        .rev()
        .find(|(_, &w)| w > 0.0)
        .map(|(p, _)| p)
        .unwrap_or(&first);
    for (p, &w) in points.iter().zip(&weights) {
        if w <= 0.0 {
            continue;
        }
        if target < w {
            second = *p;
            break;
        }
        target -= w;
    }
    [first, second]
}

fn lloyd(points: &[[f64; 3]], mut centers: [[f64; 3]; 2]) -> TwoMeans {
    let mut assignment = vec![0u8; points.len()];
    for iter in 0..MAX_ITERATIONS {
        let mut changed = iter == 0;
        for (a, p) in assignment.iter_mut().zip(points) {
            let k = u8::from(dist2(p, &centers[1]) < dist2(p, &centers[0]));
            changed |= k != *a;
            *a = k;
        }
        let mut sums = [[0.0f64; 3]; 2];
        let mut counts = [0usize; 2];
        for (&a, p) in assignment.iter().zip(points) {
            for c in 0..3 {
                sums[a as usize][c] += p[c];
            }
            counts[a as usize] += 1;
        }
        for k in 0..2 {
            if counts[k] == 0 {
                // Reseed an empty cluster at the point farthest from the other center.
                let other = centers[1 - k];
                let (idx, _) = points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, dist2(p, &other)))
                    .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
                centers[k] = points[idx];
                assignment[idx] = k as u8;
                changed = true;
            } else {
                for c in 0..3 {
                    centers[k][c] = sums[k][c] / counts[k] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(p, &centers[a as usize]))
        .sum();
    TwoMeans {
        assignment,
        centers,
        inertia,
    }
}

/// Single-point moves that lower the inertia, which Lloyd iterations can miss.
fn hartigan(points: &[[f64; 3]], mut run: TwoMeans) -> TwoMeans {
    let mut counts = [0usize; 2];
    for &a in &run.assignment {
        counts[a as usize] += 1;
    }
    loop {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = run.assignment[i] as usize;
            let to = 1 - from;
            let (nf, nt) = (counts[from] as f64, counts[to] as f64);
            if nf < 2.0 {
                continue;
            }
            let gain = nf / (nf - 1.0) * dist2(p, &run.centers[from]);
            let cost = nt / (nt + 1.0) * dist2(p, &run.centers[to]);
            if cost < gain - 1e-12 * gain.max(1.0) {
                for c in 0..3 {
                    run.centers[from][c] = (run.centers[from][c] * nf - p[c]) / (nf - 1.0);
                    run.centers[to][c] = (run.centers[to][c] * nt + p[c]) / (nt + 1.0);
                }
                counts[from] -= 1;
                counts[to] += 1;
                run.assignment[i] = to as u8;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    // Recompute centers exactly to drop incremental rounding.
    let mut sums = [[0.0f64; 3]; 2];
    for (&a, p) in run.assignment.iter().zip(points) {
        for c in 0..3 {
            sums[a as usize][c] += p[c];
        }
    }
    for k in 0..2 {
        for c in 0..3 {
            run.centers[k][c] = sums[k][c] / counts[k] as f64;
        }
    }
    run.inertia = points
        .iter()
        .zip(&run.assignment)
        .map(|(p, &a)| dist2(p, &run.centers[a as usize]))
        .sum();
    run
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition_inertia(points: &[[f64; 3]], bits: u32) -> f64 {
        let mut total = 0.0;
        for side in [0u32, 1] {
            let members: Vec<&[f64; 3]> = points
                .iter()
                .enumerate()
                .filter(|(i, _)| (bits >> i) & 1 == side)
                .map(|(_, p)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = [0.0; 3];
            for m in &members {
                for c in 0..3 {
                    mean[c] += m[c] / members.len() as f64;
                }
            }
            total += members.iter().map(|m| dist2(m, &mean)).sum::<f64>();
        }
        total
    }

    fn exhaustive_min(points: &[[f64; 3]]) -> f64 {
        // Point 0 fixed on side 0; both sides non-empty.
        let n = points.len() as u32;
        (1..(1u32 << (n - 1)))
            .map(|half| partition_inertia(points, half << 1))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn separated_clusters_split_exactly() {
        let mut pts = vec![[0.0, 0.0, 0.0]; 10];
        pts.extend(vec![[1.0, 1.0, 1.0]; 10]);
        let r = two_means(&pts, 7).unwrap();
        assert!(r.inertia < 1e-12);
        assert!(r.assignment[..10].iter().all(|&a| a == r.assignment[0]));
        assert!(r.assignment[10..].iter().all(|&a| a != r.assignment[0]));
    }

    #[test]
    fn matches_exhaustive_bipartition() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..40 {
            let n = rng.gen_range(2..=12);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)])
                .collect();
            let r = two_means(&pts, 7).unwrap();
            let oracle = exhaustive_min(&pts);
            assert!(
                (r.inertia - oracle).abs() <= 1e-9 * oracle.max(1.0),
                "trial {trial}: {} vs {}",
                r.inertia,
                oracle
            );
        }
    }

    #[test]
    fn identical_features_rejected() {
        let pts = vec![[3.0, 1.0, 2.0]; 6];
        assert!(matches!(two_means(&pts, 1), Err(Error::DegenerateFeatures)));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let pts: Vec<[f64; 3]> = (0..30).map(|i| [(i * 7 % 13) as f64, (i % 5) as f64, 0.0]).collect();
        assert_eq!(two_means(&pts, 5).unwrap(), two_means(&pts, 5).unwrap());
    }
}
