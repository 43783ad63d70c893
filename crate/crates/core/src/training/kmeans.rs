use crate::error::{Error, Result};
use crate::rvq::{nearest_code, squared_distance, Codebook};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub codebook: Codebook,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss: Vec<f64>,
    pub assignments: Vec<u32>,
}

/// Lloyd's algorithm over `data` (row-major points of length `dim`).
///
/// Centroids start from `b` distinct points picked by a seeded shuffle.
/// A cluster that ends an iteration empty is moved onto the point that is
/// currently farthest from its own centroid.
pub fn kmeans_init(data: &[f64], dim: usize, b: usize, iters: usize, seed: u64) -> Result<KMeans> {
    if dim == 0 || !data.len().is_multiple_of(dim) {
        return Err(Error::ShapeMismatch(format!(
            "{} values for points of dim {dim}",
            data.len()
        )));
    }
    if b == 0 {
        return Err(Error::EmptyCodebook);
    }
    let n = data.len() / dim;
    if n < b {
        return Err(Error::NotEnoughPoints { needed: b, got: n });
    }
    let point = |i: usize| &data[i * dim..(i + 1) * dim];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut picked: Vec<usize> = Vec::with_capacity(b);
    for &i in &order {
        if picked.len() == b {
            break;
        }
        if picked.iter().all(|&p| point(p) != point(i)) {
            picked.push(i);
        }
    }
    // fewer than b distinct points: pad with repeats, emptiness handling
    // takes care of them below
    for &i in &order {
        if picked.len() == b {
            break;
        }
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    let mut centroids: Vec<f64> = picked.iter().flat_map(|&i| point(i).to_vec()).collect();

    let mut assignments = vec![0u32; n];
    let mut dists = vec![0.0f64; n];
    let mut wcss = Vec::with_capacity(iters + 1);
    let mut sums = vec![0.0f64; b * dim];
    let mut counts = vec![0usize; b];

    let assign = |centroids: &[f64], assignments: &mut [u32], dists: &mut [f64]| -> Result<bool> {
        let cb = Codebook::new(centroids.to_vec(), dim)?;
        let mut changed = false;
        for i in 0..n {
            let (j, c) = nearest_code(point(i), &cb)?;
            if assignments[i] != j as u32 {
                changed = true;
            }
            assignments[i] = j as u32;
            dists[i] = squared_distance(point(i), c);
        }
        Ok(changed)
    };

    assign(&centroids, &mut assignments, &mut dists)?;
    wcss.push(dists.iter().sum());

    for _ in 0..iters {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            let j = assignments[i] as usize;
            counts[j] += 1;
            for (s, x) in sums[j * dim..(j + 1) * dim].iter_mut().zip(point(i)) {
                *s += x;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..b {
            let dst = &mut centroids[j * dim..(j + 1) * dim];
            if counts[j] > 0 {
                for (c, s) in dst.iter_mut().zip(&sums[j * dim..(j + 1) * dim]) {
                    *c = s / counts[j] as f64;
                }
            } else {
                let far = (0..n)
                    .filter(|i| !taken.contains(i))
                    .max_by(|&a, &c| dists[a].total_cmp(&dists[c]).then(c.cmp(&a)));
                if let Some(far) = far {
                    dst.copy_from_slice(point(far));
                    taken.push(far);
                }
            }
        }
        let changed = assign(&centroids, &mut assignments, &mut dists)?;
        wcss.push(dists.iter().sum());
        if !changed && taken.is_empty() {
            break;
        }
    }

    Ok(KMeans {
        codebook: Codebook::new(centroids, dim)?,
        wcss,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn b_distinct_points_are_recovered() {
        let data = vec![0.0, 0.0, 5.0, 1.0, -3.0, 2.0, 7.0, 7.0];
        let km = kmeans_init(&data, 2, 4, 10, 3).unwrap();
        assert_eq!(*km.wcss.last().unwrap(), 0.0);
        let mut got: Vec<Vec<f64>> = km.codebook.iter().map(<[f64]>::to_vec).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f64>> = data.chunks(2).map(<[f64]>::to_vec).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn separated_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = 0.5;
        let means = [[-10.0, 2.0, 0.0], [10.0, -1.0, 4.0]];
        let mut data = Vec::new();
        let mut members: [Vec<Vec<f64>>; 2] = [vec![], vec![]];
        for i in 0..400 {
            let m = means[i % 2];
            let p: Vec<f64> = m
                .iter()
                .map(|&c| c + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            data.extend_from_slice(&p);
            members[i % 2].push(p);
        }
        let km = kmeans_init(&data, 3, 2, 20, 5).unwrap();
        for blob in &members {
            let sample_mean: Vec<f64> = (0..3)
                .map(|d| blob.iter().map(|p| p[d]).sum::<f64>() / blob.len() as f64)
                .collect();
            let (_, c) = nearest_code(&sample_mean, &km.codebook).unwrap();
            let dist = squared_distance(c, &sample_mean).sqrt();
            assert!(dist <= 0.1 * sigma, "centroid off by {dist}");
        }
    }

    #[test]
    fn wcss_is_monotone_on_random_data() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..600).map(|_| rng.random_range(-1.0..1.0)).collect();
            let km = kmeans_init(&data, 3, 16, 30, seed).unwrap();
            for w in km.wcss.windows(2) {
                assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn duplicates_still_give_full_codebook() {
        let mut data = vec![1.0; 20];
        data.extend_from_slice(&[2.0, 3.0]);
        let km = kmeans_init(&data, 1, 3, 5, 0).unwrap();
        assert_eq!(km.codebook.size(), 3);
        assert_eq!(*km.wcss.last().unwrap(), 0.0);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            kmeans_init(&[1.0, 2.0], 1, 3, 5, 0),
            Err(Error::NotEnoughPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = kmeans_init(&data, 3, 8, 10, 4).unwrap();
        let b = kmeans_init(&data, 3, 8, 10, 4).unwrap();
        assert_eq!(a.codebook, b.codebook);
        assert_eq!(a.wcss, b.wcss);
    }
}
